"""Ramsey-type anyonic interferometry with the cavity as the probe."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from cqed_anyons.application.gates import (
    Circuit,
    controlled_x_on_spin,
    pauli_z,
)
from cqed_anyons.application.hilbert import (
    KET_MINUS,
    KET_PLUS,
    PAULI_Z,
    MeasurementPolicy,
    StateVector,
    SubsystemLayout,
    apply,
    fidelity,
    measure_x,
    project_out,
    reduced_cavity_state,
)
from cqed_anyons.application.models import PhysicsInvariantError
from cqed_anyons.application.oracle import PauliString
from cqed_anyons.application.toric import (
    CAVITY,
    N_SPINS,
    MinimalLattice,
    PreparedState,
    prepare_ground_state,
    require_ground_state,
    run_cross_checked,
)
from cqed_anyons.infrastructure.logging import get_logger

logger = get_logger(__name__)

PHASE_THRESHOLD = 0.999
TRACE_TOLERANCE = 1e-9

E_PAIR_SPIN = 3
M_PAIR_SPIN = 4
DEFAULT_LOOP_ORDER = (6, 5, 3)


class InterferometryVariant(str, Enum):
    """干渉計の実行パターン."""

    BRAIDING = "braiding"
    CONTROL_NO_E_PAIR = "control_no_e_pair"
    HALT_AFTER_CREATION = "halt_after_creation"


class BraidingPhase(str, Enum):
    """キャビティから読み出した位相."""

    PLUS = "+1"
    MINUS = "-1"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class InterferometryResult:
    """
    干渉計の実行結果.

    Attributes:
        variant: 実行パターン
        final_state: キャビティを含む最終状態
        cavity_block: キャビティの 2×2 約密度行列
        fidelity_minus: ⟨−|ρ|−⟩
        fidelity_plus: ⟨+|ρ|+⟩
        phase: 抽出した位相
        transcript: 実行した回路
        oracle_cavity_x: タブローでのキャビティ ⟨X⟩（+1, −1, 0）
        branch_fidelities: キャビティ X 結果ごとのスピン状態と参照状態の忠実度
    """

    variant: InterferometryVariant
    final_state: StateVector
    cavity_block: np.ndarray
    fidelity_minus: float
    fidelity_plus: float
    phase: BraidingPhase
    transcript: Circuit
    oracle_cavity_x: int
    branch_fidelities: dict[int, float] = field(default_factory=dict)
    min_fidelity: float = 1.0

    @property
    def control_run(self) -> bool:
        return self.variant is not InterferometryVariant.BRAIDING

    def to_document(self) -> dict:
        """JSON 用の辞書表現."""
        return {
            "variant": self.variant.value,
            "control_run": self.control_run,
            "fidelity_minus": self.fidelity_minus,
            "fidelity_plus": self.fidelity_plus,
            "phase": self.phase.value,
            "oracle_cavity_x": self.oracle_cavity_x,
            "cavity_block": {
                "real": self.cavity_block.real.tolist(),
                "imag": self.cavity_block.imag.tolist(),
            },
            "branch_fidelities": {
                f"{k:+d}": v for k, v in sorted(self.branch_fidelities.items())
            },
            "min_step_fidelity": self.min_fidelity,
            "transcript": self.transcript.to_text().splitlines(),
        }


def classify_phase(fidelity_minus: float, fidelity_plus: float) -> BraidingPhase:
    """閾値 0.999 による位相判定."""
    if fidelity_minus > PHASE_THRESHOLD:
        return BraidingPhase.MINUS
    if fidelity_plus > PHASE_THRESHOLD:
        return BraidingPhase.PLUS
    return BraidingPhase.INDETERMINATE


def braiding_phase(result: InterferometryResult) -> BraidingPhase:
    """結果の忠実度から位相を判定する."""
    return classify_phase(result.fidelity_minus, result.fidelity_plus)


def loop_operator(loop_order: tuple[int, ...] = DEFAULT_LOOP_ORDER) -> PauliString:
    """キャビティ |0⟩ 分岐でスピン側に掛かる X の積（生成と一周分）."""
    product = PauliString.from_label("+" + "I" * N_SPINS)
    for spin in (M_PAIR_SPIN, *loop_order, M_PAIR_SPIN):
        product = product * PauliString.from_support(N_SPINS, "X", [spin - 1])
    return product


def interferometry_circuit(
    variant: InterferometryVariant,
    loop_order: tuple[int, ...] = DEFAULT_LOOP_ORDER,
) -> Circuit:
    """
    e 対生成・キャビティ |+⟩ 設定・m 対の条件付き生成・一周・再融合の回路.

    Raises:
        ValueError: loop_order が (6, 5, 3) の並べ替えでない場合
    """
    if sorted(loop_order) != sorted(DEFAULT_LOOP_ORDER):
        raise ValueError(
            f"loop order must be a permutation of {DEFAULT_LOOP_ORDER}, got {loop_order}"
        )
    circuit = Circuit(SubsystemLayout.gate_level(N_SPINS))
    u_x = controlled_x_on_spin()
    if variant is not InterferometryVariant.CONTROL_NO_E_PAIR:
        circuit.gate(pauli_z(), E_PAIR_SPIN)
    circuit.reset(CAVITY, "plus")
    circuit.gate(u_x, CAVITY, M_PAIR_SPIN)
    if variant is not InterferometryVariant.HALT_AFTER_CREATION:
        for spin in (*loop_order, M_PAIR_SPIN):
            circuit.gate(u_x, CAVITY, spin)
    return circuit


def run_interferometry(
    prepared: PreparedState | None = None,
    variant: InterferometryVariant = InterferometryVariant.BRAIDING,
    *,
    lattice: MinimalLattice | None = None,
    loop_order: tuple[int, ...] = DEFAULT_LOOP_ORDER,
) -> InterferometryResult:
    """
    基底状態からの干渉計を実行し、キャビティの位相を読み出す.

    Args:
        prepared: 準備済みの基底状態（省略時は lattice から準備する）
        variant: 実行パターン
        lattice: prepared を省略した場合の配置
        loop_order: 一周で通るスピンの順（最後に必ずスピン 4 に戻る）

    Returns:
        干渉計の結果

    Raises:
        PhysicsInvariantError: 基底状態のループ安定化子が +1 でない場合、
            またはキャビティ約密度行列のトレースが 1 でない場合
    """
    if prepared is None:
        prepared = prepare_ground_state(lattice)
    require_ground_state(prepared)

    circuit = interferometry_circuit(variant, loop_order)
    run = run_cross_checked(circuit, prepared.full_state, prepared.tableau)

    rho = reduced_cavity_state(run.state)
    trace = float(np.trace(rho).real)
    if abs(trace - 1) > TRACE_TOLERANCE:
        raise PhysicsInvariantError("unit-trace cavity block", f"trace {trace:.12f}")
    fidelity_minus = float(np.real(KET_MINUS.conj() @ rho @ KET_MINUS))
    fidelity_plus = float(np.real(KET_PLUS.conj() @ rho @ KET_PLUS))

    cavity_x = PauliString.from_support(N_SPINS + 1, "X", [CAVITY])
    oracle_value = run.tableau.expectation(cavity_x)

    branch_fidelities: dict[int, float] = {}
    if variant is not InterferometryVariant.HALT_AFTER_CREATION:
        reference = prepared.state
        if variant is InterferometryVariant.BRAIDING:
            reference = apply(PAULI_Z, [E_PAIR_SPIN - 1], reference)
        measured = measure_x(CAVITY, run.state, MeasurementPolicy.BOTH_BRANCHES)
        for branch in measured.branches:
            ket = KET_PLUS if branch.outcome > 0 else KET_MINUS
            spins = project_out(branch.post_state, CAVITY, ket)
            branch_fidelities[branch.outcome] = fidelity(spins, reference)

    result = InterferometryResult(
        variant=variant,
        final_state=run.state,
        cavity_block=rho,
        fidelity_minus=fidelity_minus,
        fidelity_plus=fidelity_plus,
        phase=classify_phase(fidelity_minus, fidelity_plus),
        transcript=circuit,
        oracle_cavity_x=oracle_value,
        branch_fidelities=branch_fidelities,
        min_fidelity=run.min_fidelity,
    )
    logger.info(
        "Interferometry finished",
        variant=variant.value,
        fidelity_minus=fidelity_minus,
        fidelity_plus=fidelity_plus,
        phase=result.phase.value,
        oracle_cavity_x=oracle_value,
    )
    return result
