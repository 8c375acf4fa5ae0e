"""
Stabilizer-tableau oracle.

An independent, float-free Clifford simulator used to cross-check the
state-vector results. Tableau rows 0..n-1 are destabilizers, n..2n-1 are
stabilizers; each row stores x/z bits and a sign bit. Qubit 0 is the most
significant tensor factor, matching the state-vector layout.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from cqed_anyons.application.gates import (
    PAULI_MATRICES,
    Circuit,
    GateOp,
    GateStep,
    MeasureStep,
    hadamard,
    pauli_conjugation_table,
)
from cqed_anyons.application.hilbert import (
    MeasurementPolicy,
    StateVector,
    SubsystemLayout,
)
from cqed_anyons.application.models import PhysicsInvariantError, SimulationError
from cqed_anyons.infrastructure.logging import get_logger

logger = get_logger(__name__)

MAX_STATEVECTOR_QUBITS = 12

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {bits: letter for letter, bits in _LETTER_BITS.items()}

_table_cache: dict[tuple[str, tuple[tuple[str, float], ...]], dict] = {}


class TableauError(SimulationError):
    """タブローの不変条件違反・不可能な事後選択などの例外."""

    def __init__(self, message: str) -> None:
        """
        Initialize TableauError.

        Args:
            message: エラーメッセージ
        """
        super().__init__(f"Tableau error: {message}")


def _g(x1: np.ndarray, z1: np.ndarray, x2: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """P1·P2 の単一量子ビットごとの i の指数."""
    x1, z1, x2, z2 = (np.asarray(a, dtype=np.int64) for a in (x1, z1, x2, z2))
    return np.where(
        (x1 == 1) & (z1 == 1),
        z2 - x2,
        np.where(
            x1 == 1,
            z2 * (2 * x2 - 1),
            np.where(z1 == 1, x2 * (1 - 2 * z2), 0),
        ),
    )


@dataclass(frozen=True)
class PauliString:
    """符号付き Pauli 文字列（Y は行列 Y そのもの）."""

    x: tuple[int, ...]
    z: tuple[int, ...]
    sign: int = 1

    def __post_init__(self) -> None:
        if len(self.x) != len(self.z):
            raise TableauError("x and z parts differ in length")
        if self.sign not in (1, -1):
            raise TableauError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """'+XZI' / '-YY' / 'XX' 形式から生成する."""
        sign = 1
        body = label
        if label[:1] in "+-":
            sign = -1 if label[0] == "-" else 1
            body = label[1:]
        try:
            bits = [_LETTER_BITS[c] for c in body.upper()]
        except KeyError:
            raise TableauError(f"invalid Pauli label {label!r}") from None
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), sign)

    @classmethod
    def from_support(
        cls, n: int, letter: str, support: Iterable[int], sign: int = 1
    ) -> PauliString:
        """support の各量子ビットに letter、他に I を置いた文字列."""
        letters = ["I"] * n
        for q in support:
            letters[q] = letter
        return cls.from_label(("-" if sign < 0 else "+") + "".join(letters))

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def letters(self) -> tuple[str, ...]:
        return tuple(_BITS_LETTER[(a, b)] for a, b in zip(self.x, self.z, strict=True))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, (a, b) in enumerate(zip(self.x, self.z, strict=True)) if a or b)

    @property
    def is_x_type(self) -> bool:
        return not any(self.z)

    @property
    def is_z_type(self) -> bool:
        return not any(self.x)

    def label(self) -> str:
        return ("+" if self.sign > 0 else "-") + "".join(self.letters)

    def commutes_with(self, other: PauliString) -> bool:
        return _symplectic(self.x, self.z, other.x, other.z) == 0

    def __mul__(self, other: PauliString) -> PauliString:
        """可換な 2 つの Pauli の積."""
        if not self.commutes_with(other):
            raise TableauError(f"{self.label()} and {other.label()} anticommute")
        exponent = int(np.sum(_g(self.x, self.z, other.x, other.z))) % 4
        exponent += (0 if self.sign > 0 else 2) + (0 if other.sign > 0 else 2)
        x = tuple(a ^ b for a, b in zip(self.x, other.x, strict=True))
        z = tuple(a ^ b for a, b in zip(self.z, other.z, strict=True))
        return PauliString(x, z, 1 if exponent % 4 == 0 else -1)

    def restricted(self, qubits: Sequence[int]) -> PauliString:
        return PauliString(
            tuple(self.x[q] for q in qubits), tuple(self.z[q] for q in qubits), self.sign
        )

    def matrix(self) -> np.ndarray:
        """密行列表現（小さい n の検証用）."""
        m = np.ones((1, 1), dtype=complex)
        for letter in self.letters:
            m = np.kron(m, PAULI_MATRICES[letter])
        return self.sign * m


def _symplectic(
    x1: Sequence[int], z1: Sequence[int], x2: Sequence[int], z2: Sequence[int]
) -> int:
    a = np.asarray(x1) & np.asarray(z2)
    b = np.asarray(z1) & np.asarray(x2)
    return int(np.sum(a) + np.sum(b)) % 2


def gf2_rref(matrix: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """GF(2) 上の既約行階段形とピボット列."""
    m = np.array(matrix, dtype=np.uint8) % 2
    pivots: list[int] = []
    row = 0
    for col in range(m.shape[1]):
        hits = np.nonzero(m[row:, col])[0]
        if hits.size == 0:
            continue
        pivot = row + int(hits[0])
        m[[row, pivot]] = m[[pivot, row]]
        for r in range(m.shape[0]):
            if r != row and m[r, col]:
                m[r] ^= m[row]
        pivots.append(col)
        row += 1
        if row == m.shape[0]:
            break
    return m, pivots


def gf2_rank(matrix: np.ndarray) -> int:
    return len(gf2_rref(matrix)[1]) if np.size(matrix) else 0


def gf2_nullspace(matrix: np.ndarray) -> np.ndarray:
    """M v = 0 を満たす v の基底（行ベクトルとして返す）."""
    m = np.array(matrix, dtype=np.uint8) % 2
    cols = m.shape[1]
    if m.shape[0] == 0:
        return np.eye(cols, dtype=np.uint8)
    rref, pivots = gf2_rref(m)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[f] = 1
        for i, p in enumerate(pivots):
            v[p] = rref[i, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


def _reduce(paulis: list[PauliString], use_x: bool) -> list[PauliString]:
    """X 部（または Z 部）のビットで符号を保ったまま掃き出す."""
    rows = list(paulis)
    result: list[PauliString] = []
    n = rows[0].n if rows else 0
    for col in range(n):
        idx = next((i for i, p in enumerate(rows) if (p.x if use_x else p.z)[col]), None)
        if idx is None:
            continue
        pivot = rows.pop(idx)
        rows = [p * pivot if (p.x if use_x else p.z)[col] else p for p in rows]
        result = [p * pivot if (p.x if use_x else p.z)[col] else p for p in result]
        result.append(pivot)
    return result


@dataclass(frozen=True)
class CanonicalGenerators:
    """部分系上の安定化群の標準生成元."""

    generators: tuple[PauliString, ...]
    x_type: tuple[PauliString, ...]
    z_type: tuple[PauliString, ...]

    @property
    def is_css(self) -> bool:
        return len(self.x_type) + len(self.z_type) == len(self.generators)


@dataclass(frozen=True)
class PauliMeasurement:
    outcome: int
    probability: float
    deterministic: bool
    tableau: StabilizerTableau


class StabilizerTableau:
    """
    Aaronson–Gottesman 形式の安定化タブロー.

    操作は新しいタブローを返し、元のタブローは変更しない。
    """

    def __init__(self, x: np.ndarray, z: np.ndarray, r: np.ndarray) -> None:
        """
        Initialize StabilizerTableau.

        Args:
            x: (2n, n) の X ビット
            z: (2n, n) の Z ビット
            r: (2n,) の符号ビット（1 で −1）
        """
        self.x = np.array(x, dtype=np.uint8)
        self.z = np.array(z, dtype=np.uint8)
        self.r = np.array(r, dtype=np.uint8)
        if self.x.shape != self.z.shape or self.x.shape[0] != 2 * self.x.shape[1]:
            raise TableauError(f"bad tableau shape {self.x.shape}")
        self.n = self.x.shape[1]

    @classmethod
    def zero_state(cls, n: int) -> StabilizerTableau:
        """|0…0⟩ のタブロー."""
        eye = np.eye(n, dtype=np.uint8)
        zero = np.zeros((n, n), dtype=np.uint8)
        return cls(np.vstack([eye, zero]), np.vstack([zero, eye]), np.zeros(2 * n, np.uint8))

    @classmethod
    def product_state(cls, labels: Sequence[str]) -> StabilizerTableau:
        """'zero' / 'one' / 'plus' / 'minus' の積状態."""
        tab = cls.zero_state(len(labels))
        for q, label in enumerate(labels):
            if label in ("plus", "minus"):
                tab = tab._apply_single(q, hadamard_table())
            if label in ("one", "minus"):
                tab.r[tab.n + q] ^= 1
        return tab

    def copy(self) -> StabilizerTableau:
        return StabilizerTableau(self.x, self.z, self.r)

    def row(self, i: int) -> PauliString:
        return PauliString(
            tuple(int(v) for v in self.x[i]), tuple(int(v) for v in self.z[i]),
            -1 if self.r[i] else 1,
        )

    @property
    def stabilizers(self) -> list[PauliString]:
        return [self.row(self.n + i) for i in range(self.n)]

    @property
    def destabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n)]

    def _rowsum(self, h: int, i: int) -> None:
        total = 2 * int(self.r[h]) + 2 * int(self.r[i])
        total += int(np.sum(_g(self.x[i], self.z[i], self.x[h], self.z[h])))
        self.r[h] = 1 if total % 4 == 2 else 0
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def _anticommutes(self, p: PauliString) -> np.ndarray:
        px = np.asarray(p.x, dtype=np.int64)
        pz = np.asarray(p.z, dtype=np.int64)
        return ((self.x.astype(np.int64) @ pz + self.z.astype(np.int64) @ px) % 2).astype(bool)

    def apply_clifford(self, gate: GateOp, targets: Sequence[int]) -> StabilizerTableau:
        """
        Pauli 共役表によって Clifford ゲートを作用させる.

        Raises:
            NotCliffordError: ゲートが Clifford でない場合
        """
        key = (gate.name, gate.params)
        table = _table_cache.get(key)
        if table is None:
            table = pauli_conjugation_table(gate)
            _table_cache[key] = table
        tab = self.copy()
        targets = list(targets)
        for i in range(2 * self.n):
            letters = tuple(
                _BITS_LETTER[(int(tab.x[i, t]), int(tab.z[i, t]))] for t in targets
            )
            image, sign = table[letters]
            for t, letter in zip(targets, image, strict=True):
                tab.x[i, t], tab.z[i, t] = _LETTER_BITS[letter]
            if sign < 0:
                tab.r[i] ^= 1
        return tab

    def _apply_single(self, q: int, table: dict) -> StabilizerTableau:
        tab = self.copy()
        for i in range(2 * self.n):
            image, sign = table[(_BITS_LETTER[(int(tab.x[i, q]), int(tab.z[i, q]))],)]
            tab.x[i, q], tab.z[i, q] = _LETTER_BITS[image[0]]
            if sign < 0:
                tab.r[i] ^= 1
        return tab

    def _deterministic_sign(self, p: PauliString) -> int:
        """可換な p について、群に含まれる ±p の符号."""
        acc_x = np.zeros(self.n, dtype=np.uint8)
        acc_z = np.zeros(self.n, dtype=np.uint8)
        acc_r = 0
        anti = self._anticommutes(p)
        for i in range(self.n):
            if anti[i]:
                h = self.n + i
                total = 2 * acc_r + 2 * int(self.r[h])
                total += int(np.sum(_g(self.x[h], self.z[h], acc_x, acc_z)))
                acc_r = 1 if total % 4 == 2 else 0
                acc_x ^= self.x[h]
                acc_z ^= self.z[h]
        if tuple(int(v) for v in acc_x) != p.x or tuple(int(v) for v in acc_z) != p.z:
            raise TableauError(f"{p.label()} is not in the stabilizer group")
        return (-1 if acc_r else 1) * p.sign

    def expectation(self, p: PauliString) -> int:
        """⟨P⟩ ∈ {+1, −1, 0}."""
        if p.n != self.n:
            raise TableauError(f"Pauli acts on {p.n} qubits, tableau has {self.n}")
        if np.any(self._anticommutes(p)[self.n :]):
            return 0
        return self._deterministic_sign(p)

    def measure_pauli(
        self,
        p: PauliString,
        outcome: int | None = None,
        rng: np.random.Generator | None = None,
    ) -> PauliMeasurement:
        """
        Pauli 観測量を射影測定する.

        Args:
            p: 観測量（符号付き）
            outcome: 事後選択する結果（None なら rng でサンプル）
            rng: サンプル用乱数生成器

        Returns:
            測定結果と測定後タブロー

        Raises:
            TableauError: 確率ゼロの結果を事後選択した場合
        """
        anti = self._anticommutes(p)
        stab_hits = np.nonzero(anti[self.n :])[0]
        if stab_hits.size == 0:
            value = self._deterministic_sign(p)
            if outcome is not None and outcome != value:
                raise TableauError(
                    f"cannot postselect {outcome:+d} for {p.label()}: "
                    f"outcome is fixed at {value:+d}"
                )
            return PauliMeasurement(value, 1.0, True, self.copy())

        if outcome is None:
            generator = rng if rng is not None else np.random.default_rng()
            outcome = 1 if generator.random() < 0.5 else -1
        tab = self.copy()
        pivot = self.n + int(stab_hits[0])
        for i in range(2 * self.n):
            if i != pivot and anti[i]:
                tab._rowsum(i, pivot)
        tab.x[pivot - self.n] = tab.x[pivot]
        tab.z[pivot - self.n] = tab.z[pivot]
        tab.r[pivot - self.n] = tab.r[pivot]
        tab.x[pivot] = np.asarray(p.x, dtype=np.uint8)
        tab.z[pivot] = np.asarray(p.z, dtype=np.uint8)
        # 符号付き観測量 sP の結果 o は bare P の固有値 o·s
        tab.r[pivot] = 0 if outcome * p.sign > 0 else 1
        return PauliMeasurement(outcome, 0.5, False, tab)

    def validate(self) -> None:
        """
        交換関係・独立性・対の関係を確認する.

        Raises:
            TableauError: いずれかが破れている場合
        """
        n = self.n
        omega = (self.x @ self.z.T + self.z @ self.x.T) % 2
        expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
        expected[:n, n:] = np.eye(n, dtype=np.int64)
        expected[n:, :n] = np.eye(n, dtype=np.int64)
        if not np.array_equal(omega, expected):
            raise TableauError("symplectic pairing of destabilizers and stabilizers is broken")
        if gf2_rank(np.hstack([self.x[n:], self.z[n:]])) != n:
            raise TableauError("stabilizer generators are not independent")

    def permute_qubits(self, order: Sequence[int]) -> StabilizerTableau:
        """新しい量子ビット j を旧量子ビット order[j] とするタブロー."""
        order = list(order)
        if sorted(order) != list(range(self.n)):
            raise TableauError(f"{order} is not a permutation of {self.n} qubits")
        return StabilizerTableau(self.x[:, order], self.z[:, order], self.r)

    def subgroup_on(self, qubits: Sequence[int]) -> list[PauliString]:
        """
        指定量子ビットのみに台を持つ安定化群の元の生成系（qubits 上に制限）.
        """
        qubits = list(qubits)
        outside = [q for q in range(self.n) if q not in qubits]
        stab_x = self.x[self.n :]
        stab_z = self.z[self.n :]
        constraint = np.hstack([stab_x[:, outside], stab_z[:, outside]]).T
        combos = gf2_nullspace(constraint) if outside else np.eye(self.n, dtype=np.uint8)
        stabilizers = self.stabilizers
        elements = []
        for combo in combos:
            element = PauliString.from_label("+" + "I" * self.n)
            for i in np.nonzero(combo)[0]:
                element = element * stabilizers[int(i)]
            elements.append(element.restricted(qubits))
        return elements

    def canonical_generators(self, qubits: Sequence[int]) -> CanonicalGenerators:
        """
        qubits 上の部分群を X 型・Z 型の既約基底で表す.

        群が CSS でない場合、x_type と z_type の合計は生成元数より少なくなる。
        """
        elements = self.subgroup_on(qubits)
        if not elements:
            return CanonicalGenerators((), (), ())
        xs = np.array([e.x for e in elements], dtype=np.uint8)
        zs = np.array([e.z for e in elements], dtype=np.uint8)

        def combine(combos: np.ndarray) -> list[PauliString]:
            out = []
            for combo in combos:
                acc = PauliString.from_label("+" + "I" * len(qubits))
                for i in np.nonzero(combo)[0]:
                    acc = acc * elements[int(i)]
                out.append(acc)
            return out

        x_type = _reduce(combine(gf2_nullspace(zs.T)), use_x=True)
        z_type = _reduce(combine(gf2_nullspace(xs.T)), use_x=False)
        return CanonicalGenerators(tuple(elements), tuple(x_type), tuple(z_type))

    def to_text(self) -> str:
        return "\n".join(p.label() for p in self.stabilizers) + "\n"


def hadamard_table() -> dict:
    key = ("hadamard", ())
    if key not in _table_cache:
        _table_cache[key] = pauli_conjugation_table(hadamard())
    return _table_cache[key]


def apply_pauli_vector(p: PauliString, amplitudes: np.ndarray) -> np.ndarray:
    """P|ψ⟩ をビット演算で計算する（量子ビット 0 が最上位ビット）."""
    n = p.n
    idx = np.arange(2**n)
    shifts = np.arange(n - 1, -1, -1)
    bits = (idx[:, None] >> shifts) & 1
    x_mask = int(sum(b << s for b, s in zip(p.x, shifts, strict=True)))
    n_y = sum(1 for a, b in zip(p.x, p.z, strict=True) if a and b)
    parity = (bits @ np.asarray(p.z, dtype=np.int64)) % 2
    coefficient = (1j**n_y) * p.sign * np.where(parity == 1, -1.0, 1.0)
    out = np.zeros_like(amplitudes, dtype=complex)
    out[idx ^ x_mask] = coefficient * amplitudes
    return out


def tableau_to_statevector(
    tab: StabilizerTableau, layout: SubsystemLayout | None = None
) -> StateVector:
    """
    安定化状態を状態ベクトルに展開する（大域位相は任意）.

    Raises:
        TableauError: n が大きすぎる場合
    """
    n = tab.n
    if n > MAX_STATEVECTOR_QUBITS:
        raise TableauError(
            f"statevector expansion limited to {MAX_STATEVECTOR_QUBITS} qubits, got {n}"
        )
    layout = layout or SubsystemLayout.spins(n)
    stabilizers = tab.stabilizers
    for start in range(2**n):
        psi = np.zeros(2**n, dtype=complex)
        psi[start] = 1.0
        for s in stabilizers:
            psi = (psi + apply_pauli_vector(s, psi)) / 2
        norm = np.linalg.norm(psi)
        if norm > 1e-6:
            return StateVector(layout, psi / norm)
    raise TableauError("stabilizer projector annihilated every basis state")


def run_circuit(
    circuit: Circuit,
    tab: StabilizerTableau,
    seed: int | None = None,
) -> tuple[StabilizerTableau, list[PauliMeasurement]]:
    """
    回路をタブロー上で実行する.

    postselect_plus は +1 を強制し、sample は seed で結果を引き、
    both_branches は +1 分岐が可能ならそれを、そうでなければ −1 を採る。
    リセットは積状態のサブシステムに対してのみ行う。
    """
    if circuit.layout.dimension != 2**tab.n:
        raise TableauError("circuit layout does not match tableau size")
    rng = np.random.default_rng(seed)
    measurements: list[PauliMeasurement] = []
    for step in circuit:
        if isinstance(step, GateStep):
            tab = tab.apply_clifford(step.gate, step.targets)
        elif isinstance(step, MeasureStep):
            observable = PauliString.from_support(tab.n, "X", [step.index])
            if step.policy is MeasurementPolicy.POSTSELECT_PLUS:
                m = tab.measure_pauli(observable, outcome=1)
            elif step.policy is MeasurementPolicy.SAMPLE:
                m = tab.measure_pauli(observable, rng=rng)
            else:
                value = tab.expectation(observable)
                m = tab.measure_pauli(observable, outcome=value if value else 1)
            logger.debug(
                "Tableau measurement",
                qubit=step.index,
                outcome=m.outcome,
                deterministic=m.deterministic,
            )
            measurements.append(m)
            tab = m.tableau
        else:
            tab = reset_qubit(tab, step.index, step.label)
    return tab, measurements


def reset_qubit(tab: StabilizerTableau, q: int, label: str) -> StabilizerTableau:
    """
    積状態の量子ビットを測定と補正で label の状態に置き換える.

    Raises:
        PhysicsInvariantError: 量子ビットが他と絡み合っている場合
    """
    if not tab.subgroup_on([q]):
        raise PhysicsInvariantError("product reset", f"qubit {q} is entangled")
    letter = "X" if label in ("plus", "minus") else "Z"
    wanted = 1 if label in ("plus", "zero") else -1
    observable = PauliString.from_support(tab.n, letter, [q])
    value = tab.expectation(observable)
    if value == 0:
        tab = tab.measure_pauli(observable, outcome=wanted).tableau
    elif value != wanted:
        # 反対側の Pauli で反転する
        flip = PauliString.from_support(tab.n, "Z" if letter == "X" else "X", [q])
        tab = tab.copy()
        tab.r ^= tab._anticommutes(flip).astype(np.uint8)
    return tab


def stabilizer_fidelity(tab: StabilizerTableau, state: StateVector) -> float:
    """タブローの状態と状態ベクトルの重なり |⟨ψ_tab|ψ⟩|²."""
    reference = tableau_to_statevector(tab, state.layout)
    return float(abs(np.vdot(reference.amplitudes, state.amplitudes)) ** 2)
