"""Six-spin minimal toric code: ground-state preparation and defect bookkeeping."""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from cqed_anyons.application.gates import (
    RESET_STATES,
    Circuit,
    GateStep,
    MeasureStep,
    hadamard,
    reset_subsystem,
    u_c,
)
from cqed_anyons.application.gates import (
    conditional_excitation as conditional_excitation_gate,
)
from cqed_anyons.application.hilbert import (
    KET_MINUS,
    KET_PLUS,
    PAULI_X,
    PAULI_Z,
    MeasurementPolicy,
    MeasurementResult,
    StateVector,
    SubsystemLayout,
    apply,
    measure_x,
    product_state,
    project_out,
    reduced_cavity_state,
)
from cqed_anyons.application.models import InvariantCheck, PhysicsInvariantError
from cqed_anyons.application.oracle import (
    CanonicalGenerators,
    PauliString,
    StabilizerTableau,
    TableauError,
    apply_pauli_vector,
    reset_qubit,
    stabilizer_fidelity,
)
from cqed_anyons.infrastructure.logging import get_logger

logger = get_logger(__name__)

N_SPINS = 6
CAVITY = 0
AGREEMENT_TOLERANCE = 1e-9

# U^c の順序（役割ラベル）。最後の 2 回は基底状態のスピンとの融合
PREPARATION_ORDER = (2, 1, 3, 6, 5, 4, 6)
GROUND_ROLE = 4

LOOP_SUPPORT = (3, 5, 6)
LOOP_CHECK = "ground-state loop stabilizer"

DEFAULT_PERMUTATION = (1, 2, 3, 4, 5, 6)
DEFAULT_FRAME = frozenset({2, 3, 5, 6})
DEFAULT_X_SUPPORTS = ((1, 2, 3), (3, 5, 6), (4, 5, 6), (1, 2, 3, 6))
DEFAULT_Z_SUPPORTS = ((1, 3, 4, 5), (2, 3, 4, 5))


@dataclass(frozen=True)
class MinimalLattice:
    """
    最小トーリック符号の 6 スピン配置.

    Attributes:
        permutation: 位置 r に役割 r を担う物理スピン番号（1 始まり）
        frame: 準備後に Hadamard を掛ける役割の集合
        x_supports: 宣言された X 型演算子の台（物理スピン番号）
        z_supports: 宣言された Z 型演算子の台（物理スピン番号）
    """

    permutation: tuple[int, ...] = DEFAULT_PERMUTATION
    frame: frozenset[int] = DEFAULT_FRAME
    x_supports: tuple[tuple[int, ...], ...] = DEFAULT_X_SUPPORTS
    z_supports: tuple[tuple[int, ...], ...] = DEFAULT_Z_SUPPORTS

    def __post_init__(self) -> None:
        if sorted(self.permutation) != list(range(1, N_SPINS + 1)):
            raise ValueError(f"labeling must be a permutation of 1..6, got {self.permutation}")
        if not self.frame <= set(range(1, N_SPINS + 1)):
            raise ValueError(f"frame roles must lie in 1..6, got {sorted(self.frame)}")
        for support in self.x_supports + self.z_supports:
            if not set(support) <= set(range(1, N_SPINS + 1)) or len(set(support)) not in (3, 4):
                raise ValueError(f"operator support {support} must be 3 or 4 spins out of 1..6")

    @classmethod
    def from_labeling(cls, labeling: str | Sequence[int] | None) -> MinimalLattice:
        """'1,2,3,4,5,6' 形式（または整数列）から既定の枠で生成する."""
        if labeling is None:
            return cls()
        if isinstance(labeling, str):
            labeling = [int(v) for v in labeling.split(",")]
        return cls(permutation=tuple(labeling))

    def spin(self, role: int) -> int:
        """役割に対応する物理スピン番号."""
        return self.permutation[role - 1]

    @property
    def x_operators(self) -> list[PauliString]:
        return [
            PauliString.from_support(N_SPINS, "X", [s - 1 for s in sup])
            for sup in self.x_supports
        ]

    @property
    def z_operators(self) -> list[PauliString]:
        return [
            PauliString.from_support(N_SPINS, "Z", [s - 1 for s in sup])
            for sup in self.z_supports
        ]

    def labeling_text(self) -> str:
        return ",".join(str(s) for s in self.permutation)


@dataclass
class CrossCheckedRun:
    """状態ベクトルとタブローを並走させた実行結果."""

    state: StateVector
    tableau: StabilizerTableau
    measurements: list[MeasurementResult] = field(default_factory=list)
    min_fidelity: float = 1.0


def run_cross_checked(
    circuit: Circuit,
    state: StateVector,
    tableau: StabilizerTableau,
    seed: int | None = None,
) -> CrossCheckedRun:
    """
    回路を状態ベクトルとタブローの両方で 1 ステップずつ実行し、毎ステップ一致を確認する.

    測定結果は状態ベクトル側で決め、タブローはその結果に事後選択する。

    Raises:
        PhysicsInvariantError: いずれかのステップで忠実度が 1 − 1e−9 を下回った場合
    """
    run = CrossCheckedRun(state, tableau)
    for number, step in enumerate(circuit, start=1):
        if isinstance(step, GateStep):
            run.state = apply(step.gate.matrix, step.targets, run.state)
            run.tableau = run.tableau.apply_clifford(step.gate, step.targets)
        elif isinstance(step, MeasureStep):
            result = measure_x(step.index, run.state, step.policy, seed)
            run.measurements.append(result)
            run.state = result.post_state
            observable = PauliString.from_support(run.tableau.n, "X", [step.index])
            try:
                measured = run.tableau.measure_pauli(observable, outcome=result.outcome)
                run.tableau = measured.tableau
            except TableauError as e:
                raise PhysicsInvariantError("statevector/tableau agreement", str(e)) from e
        else:
            run.state = reset_subsystem(run.state, step.index, RESET_STATES[step.label])
            run.tableau = reset_qubit(run.tableau, step.index, step.label)
        fid = stabilizer_fidelity(run.tableau, run.state)
        run.min_fidelity = min(run.min_fidelity, fid)
        if fid < 1 - AGREEMENT_TOLERANCE:
            raise PhysicsInvariantError(
                "statevector/tableau agreement", f"step {number}: fidelity {fid:.12f}"
            )
    return run


@dataclass(frozen=True)
class PreparedState:
    """
    準備された基底状態.

    Attributes:
        state: 6 スピンの測定後状態
        full_state: キャビティを含む 7 サブシステムの測定後状態
        tableau: full_state に対応するタブロー
        transcript: 準備回路
        outcome: キャビティ X 測定の結果
        probability: その確率
        generators: オラクルが抽出した 6 スピン上の生成元
        css: X 型・Z 型の標準生成元
        other_branch: both_branches のときの反対分岐の生成元
    """

    lattice: MinimalLattice
    state: StateVector
    full_state: StateVector
    tableau: StabilizerTableau
    transcript: Circuit
    outcome: int
    probability: float
    generators: tuple[PauliString, ...]
    css: CanonicalGenerators
    min_fidelity: float
    other_branch: tuple[PauliString, ...] | None = None

    def to_document(self) -> dict:
        """JSON 用の辞書表現."""
        doc = {
            "labeling": self.lattice.labeling_text(),
            "frame": sorted(self.lattice.frame),
            "outcome": self.outcome,
            "probability": self.probability,
            "generators": [p.label() for p in self.generators],
            "x_type": [p.label() for p in self.css.x_type],
            "z_type": [p.label() for p in self.css.z_type],
            "transcript": self.transcript.to_text().splitlines(),
            "min_step_fidelity": self.min_fidelity,
        }
        if self.other_branch is not None:
            doc["other_branch_generators"] = [p.label() for p in self.other_branch]
        return doc


def preparation_circuit(
    lattice: MinimalLattice,
    policy: MeasurementPolicy = MeasurementPolicy.POSTSELECT_PLUS,
) -> Circuit:
    """U^c 列・キャビティ X 測定・Hadamard 枠からなる準備回路."""
    layout = SubsystemLayout.gate_level(N_SPINS)
    circuit = Circuit(layout)
    gate = u_c()
    for role in PREPARATION_ORDER:
        circuit.gate(gate, CAVITY, lattice.spin(role))
    circuit.measure_x(CAVITY, policy)
    for role in sorted(lattice.frame):
        circuit.gate(hadamard(), lattice.spin(role))
    return circuit


def _initial_labels(lattice: MinimalLattice) -> list[str]:
    labels = ["plus"] * (N_SPINS + 1)
    labels[lattice.spin(GROUND_ROLE)] = "zero"
    return labels


def _spin_generators(tableau: StabilizerTableau) -> CanonicalGenerators:
    return tableau.canonical_generators(list(range(1, N_SPINS + 1)))


def prepare_ground_state(
    lattice: MinimalLattice | None = None,
    policy: MeasurementPolicy = MeasurementPolicy.POSTSELECT_PLUS,
    seed: int | None = None,
) -> PreparedState:
    """
    キャビティを介した U^c 列と X 測定で基底状態を準備する.

    キャビティとスピン（基底役割を除く）は |+⟩、基底役割のスピンは |0⟩ から始める。

    Args:
        lattice: スピン配置（省略時は既定）
        policy: キャビティ測定のポリシー（both_branches は +1 分岐を採用し反対分岐も記録）
        seed: sample ポリシーの乱数シード

    Returns:
        準備された状態

    Raises:
        ZeroProbabilityError: 要求した分岐の確率がゼロの場合
        PhysicsInvariantError: 状態ベクトルとタブローが一致しない場合
    """
    lattice = lattice or MinimalLattice()
    circuit = preparation_circuit(lattice, policy)
    labels = _initial_labels(lattice)
    initial = product_state(circuit.layout, [RESET_STATES[label] for label in labels])
    tableau = StabilizerTableau.product_state(labels)

    run = run_cross_checked(circuit, initial, tableau, seed)
    measurement = run.measurements[0]
    cavity_ket = KET_PLUS if measurement.outcome > 0 else KET_MINUS
    spins = project_out(run.state, CAVITY, cavity_ket)

    css = _spin_generators(run.tableau)
    if len(css.generators) != N_SPINS:
        raise PhysicsInvariantError(
            "independent generators", f"expected {N_SPINS}, got {len(css.generators)}"
        )

    other = None
    if policy is MeasurementPolicy.BOTH_BRANCHES:
        other = _other_branch_generators(lattice, -measurement.outcome)

    logger.info(
        "Prepared ground state",
        labeling=lattice.labeling_text(),
        outcome=measurement.outcome,
        probability=measurement.probability,
        generators=[p.label() for p in css.generators],
    )
    return PreparedState(
        lattice=lattice,
        state=spins,
        full_state=run.state,
        tableau=run.tableau,
        transcript=circuit,
        outcome=measurement.outcome,
        probability=measurement.probability,
        generators=css.generators,
        css=css,
        min_fidelity=run.min_fidelity,
        other_branch=other,
    )


def _other_branch_generators(
    lattice: MinimalLattice, outcome: int
) -> tuple[PauliString, ...] | None:
    tab = StabilizerTableau.product_state(_initial_labels(lattice))
    circuit = preparation_circuit(lattice)
    for step in circuit:
        if isinstance(step, GateStep):
            tab = tab.apply_clifford(step.gate, step.targets)
        elif isinstance(step, MeasureStep):
            observable = PauliString.from_support(tab.n, "X", [step.index])
            try:
                tab = tab.measure_pauli(observable, outcome=outcome).tableau
            except TableauError:
                return None
    return _spin_generators(tab).generators


def _as_pauli(op: PauliString | str) -> PauliString:
    return op if isinstance(op, PauliString) else PauliString.from_label(op)


def stabilizer_expectations(state: StateVector, ops: Iterable[PauliString | str]) -> list[float]:
    """
    各 Pauli 文字列の期待値 ⟨ψ|P|ψ⟩.

    Raises:
        TableauError: 文字列が不正、または量子ビット数が合わない場合
    """
    n = len(state.layout)
    values = []
    for op in ops:
        p = _as_pauli(op)
        if p.n != n:
            raise TableauError(f"Pauli {p.label()} acts on {p.n} qubits, state has {n}")
        value = np.vdot(state.amplitudes, apply_pauli_vector(p, state.amplitudes)).real
        values.append(float(np.clip(value, -1.0, 1.0)))
    return values


def _spin_index(state: StateVector, spin: int) -> int:
    return state.layout.index_of(f"spin{spin}")


def create_e_pair(state: StateVector, spin: int) -> StateVector:
    """スピンに σ_z を掛けて電荷欠陥の対を作る."""
    return apply(PAULI_Z, [_spin_index(state, spin)], state)


def create_m_pair(state: StateVector, spin: int) -> StateVector:
    """スピンに σ_x を掛けて磁束欠陥の対を作る."""
    return apply(PAULI_X, [_spin_index(state, spin)], state)


def conditional_excitation(
    state: StateVector,
    spin: int,
    kind: str,
    eta: float = 1.0,
    *,
    require_plus: bool = False,
) -> StateVector:
    """
    キャビティ |0⟩ 分岐でのみ欠陥対を作る部分的な制御操作.

    Args:
        state: キャビティを含む状態
        spin: 物理スピン番号
        kind: "electric"（σ_z）または "magnetic"（σ_x）
        eta: 励起分岐の相対振幅（η = 1 で U_z / U_x）
        require_plus: True ならキャビティが |+⟩ であることを確認する

    Raises:
        ValueError: kind が不正、または |η| > 1 の場合
        PhysicsInvariantError: require_plus でキャビティが |+⟩ でない場合
    """
    if kind not in ("electric", "magnetic"):
        raise ValueError(f"kind must be 'electric' or 'magnetic', got {kind!r}")
    cavity = state.layout.index_of("cavity")
    if require_plus:
        rho = reduced_cavity_state(state)
        overlap = float(np.real(KET_PLUS.conj() @ rho @ KET_PLUS))
        if overlap < 1 - AGREEMENT_TOLERANCE:
            raise PhysicsInvariantError("cavity prepared in |+>", f"overlap {overlap:.12f}")
    gate = conditional_excitation_gate(eta, "z" if kind == "electric" else "x")
    return apply(gate.matrix, [cavity, _spin_index(state, spin)], state)


def ground_state_checks(prepared: PreparedState) -> list[InvariantCheck]:
    """準備状態に対する名前付き不変条件の判定."""
    lattice = prepared.lattice
    tab = prepared.tableau
    checks = []

    def spin_op(p: PauliString) -> PauliString:
        # キャビティ分の恒等を先頭に加える
        return PauliString((0,) + p.x, (0,) + p.z, p.sign)

    loop = PauliString.from_support(N_SPINS, "X", [s - 1 for s in LOOP_SUPPORT])
    loop_value = tab.expectation(spin_op(loop))
    checks.append(
        InvariantCheck(
            LOOP_CHECK,
            loop_value == 1,
            f"<{loop.label()[1:]}> = {loop_value:+d}",
        )
    )

    declared = lattice.x_operators + lattice.z_operators
    oracle_values = [tab.expectation(spin_op(p)) for p in declared]
    failing = [p.label() for p, v in zip(declared, oracle_values, strict=True) if v != 1]
    checks.append(
        InvariantCheck(
            "declared stabilizers",
            not failing,
            "all +1" if not failing else f"not +1: {failing}",
        )
    )

    sv_values = stabilizer_expectations(prepared.state, prepared.generators)
    worst = min(sv_values) if sv_values else 1.0
    checks.append(
        InvariantCheck(
            "generator expectations",
            worst >= 1 - AGREEMENT_TOLERANCE and len(sv_values) == N_SPINS,
            f"{len(sv_values)} generators, min <g> = {worst:.12f}",
        )
    )
    checks.append(
        InvariantCheck(
            "statevector/tableau agreement",
            prepared.min_fidelity >= 1 - AGREEMENT_TOLERANCE,
            f"min step fidelity {prepared.min_fidelity:.12f}",
        )
    )
    return checks


def require_ground_state(prepared: PreparedState) -> None:
    """
    Raises:
        PhysicsInvariantError: 最初に破れた不変条件
    """
    for check in ground_state_checks(prepared):
        if not check.passed:
            raise PhysicsInvariantError(check.name, check.detail)


@dataclass(frozen=True)
class DefectCounts:
    """単一スピン演算で反転する宣言済み生成元の数."""

    electric: dict[int, int]
    magnetic: dict[int, int]


def expected_defect_counts(lattice: MinimalLattice) -> DefectCounts:
    """宣言された台から数えた反転数."""
    return DefectCounts(
        electric={s: sum(s in sup for sup in lattice.x_supports) for s in range(1, N_SPINS + 1)},
        magnetic={s: sum(s in sup for sup in lattice.z_supports) for s in range(1, N_SPINS + 1)},
    )


def measured_defect_counts(prepared: PreparedState) -> DefectCounts:
    """状態ベクトル上で σ_z / σ_x を掛けて実際に −1 になった生成元の数."""
    lattice = prepared.lattice
    electric = {}
    magnetic = {}
    for s in range(1, N_SPINS + 1):
        e_values = stabilizer_expectations(create_e_pair(prepared.state, s), lattice.x_operators)
        m_values = stabilizer_expectations(create_m_pair(prepared.state, s), lattice.z_operators)
        electric[s] = sum(v < 0 for v in e_values)
        magnetic[s] = sum(v < 0 for v in m_values)
    return DefectCounts(electric, magnetic)


@dataclass(frozen=True)
class LabelingCandidate:
    permutation: tuple[int, ...]
    frame: frozenset[int]


def _role_tableau(frame: frozenset[int]) -> StabilizerTableau:
    lattice = MinimalLattice(frame=frame)
    tab = StabilizerTableau.product_state(_initial_labels(lattice))
    for step in preparation_circuit(lattice):
        if isinstance(step, GateStep):
            tab = tab.apply_clifford(step.gate, step.targets)
        elif isinstance(step, MeasureStep):
            observable = PauliString.from_support(tab.n, "X", [step.index])
            tab = tab.measure_pauli(observable, outcome=1).tableau
    return tab


def search_labelings(
    frames: Iterable[frozenset[int]] | None = None,
    x_supports: tuple[tuple[int, ...], ...] = DEFAULT_X_SUPPORTS,
    z_supports: tuple[tuple[int, ...], ...] = DEFAULT_Z_SUPPORTS,
) -> list[LabelingCandidate]:
    """
    宣言された演算子とループ X₃X₅X₆ がすべて +1 になる配置を総当たりで探す.

    枠ごとにタブローを 1 回だけ作り、置換は列の並べ替えで評価する。
    """
    if frames is None:
        roles = range(1, N_SPINS + 1)
        frames = [
            frozenset(c) for k in range(N_SPINS + 1) for c in itertools.combinations(roles, k)
        ]
    required = [
        PauliString.from_support(N_SPINS + 1, "X", sup) for sup in x_supports + (LOOP_SUPPORT,)
    ] + [PauliString.from_support(N_SPINS + 1, "Z", sup) for sup in z_supports]

    found = []
    for frame in frames:
        role_tab = _role_tableau(frame)
        for permutation in itertools.permutations(range(1, N_SPINS + 1)):
            order = [0] * (N_SPINS + 1)
            for role, spin in enumerate(permutation, start=1):
                order[spin] = role
            tab = role_tab.permute_qubits(order)
            if all(tab.expectation(p) == 1 for p in required):
                found.append(LabelingCandidate(tuple(permutation), frame))
    logger.info("Labeling search finished", candidates=len(found))
    return found
