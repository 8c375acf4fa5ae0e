"""Hybrid cavity + spin register: layouts, state vectors and operators."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse

from cqed_anyons.application.models import SimulationError
from cqed_anyons.infrastructure.logging import get_logger

logger = get_logger(__name__)

UNITARY_TOLERANCE = 1e-10
HERMITIAN_TOLERANCE = 1e-12
ZERO_PROBABILITY = 1e-14

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)


class LayoutError(SimulationError):
    """サブシステム構成が不正な場合の例外."""

    def __init__(self, message: str) -> None:
        """
        Initialize LayoutError.

        Args:
            message: エラーメッセージ
        """
        super().__init__(f"Invalid layout: {message}")


class DimensionMismatchError(SimulationError):
    """演算子と対象サブシステムの次元が合わない場合の例外."""

    def __init__(self, expected: int, actual: int) -> None:
        """
        Initialize DimensionMismatchError.

        Args:
            expected: 期待される次元
            actual: 実際の次元
        """
        super().__init__(f"Dimension mismatch: expected {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class NonUnitaryError(SimulationError):
    """ユニタリでない演算子をフラグなしで適用しようとした場合の例外."""

    def __init__(self, deviation: float) -> None:
        """
        Initialize NonUnitaryError.

        Args:
            deviation: max|U†U - I|
        """
        super().__init__(f"Operator is not unitary (max |U^dag U - I| = {deviation:.3e})")
        self.deviation = deviation


class NonHermitianError(SimulationError):
    """エルミートであるべき演算子がエルミートでない場合の例外."""

    def __init__(self, deviation: float) -> None:
        """
        Initialize NonHermitianError.

        Args:
            deviation: max|M - M†|
        """
        super().__init__(f"Operator is not Hermitian (max |M - M^dag| = {deviation:.3e})")
        self.deviation = deviation


class ZeroProbabilityError(SimulationError):
    """確率ゼロの測定分岐を要求した場合の例外."""

    def __init__(self, outcome: int, probability: float) -> None:
        """
        Initialize ZeroProbabilityError.

        Args:
            outcome: 要求された測定結果（±1）
            probability: その分岐の確率
        """
        super().__init__(
            f"Measurement branch {outcome:+d} has zero probability ({probability:.3e})"
        )
        self.outcome = outcome
        self.probability = probability


@dataclass(frozen=True)
class Subsystem:
    """サブシステム記述子（ラベルと次元）."""

    label: str
    dimension: int


@dataclass(frozen=True)
class SubsystemLayout:
    """
    テンソル積の順序付きサブシステム構成.

    添字 0 が最も遅く変化する（行優先）。慣例として 0 番がキャビティ。
    """

    subsystems: tuple[Subsystem, ...]

    def __post_init__(self) -> None:
        if not self.subsystems:
            raise LayoutError("at least one subsystem is required")
        labels = [s.label for s in self.subsystems]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"labels must be unique: {labels}")
        for s in self.subsystems:
            if s.dimension < 1:
                raise LayoutError(f"dimension of {s.label!r} must be positive")

    @classmethod
    def gate_level(cls, n_spins: int = 6) -> SubsystemLayout:
        """キャビティを 2 準位として扱うゲートレベル構成（cavity, spin1..spinN）."""
        return cls(
            (Subsystem("cavity", 2),)
            + tuple(Subsystem(f"spin{k}", 2) for k in range(1, n_spins + 1))
        )

    @classmethod
    def spins(cls, n_spins: int = 6) -> SubsystemLayout:
        """スピンのみの構成（spin1..spinN）."""
        return cls(tuple(Subsystem(f"spin{k}", 2) for k in range(1, n_spins + 1)))

    @classmethod
    def pulse_level(cls, n_max: int) -> SubsystemLayout:
        """Fock 打ち切り n_max のキャビティと 1 量子ビットの構成."""
        if n_max < 1:
            raise LayoutError(f"n_max must be >= 1, got {n_max}")
        return cls((Subsystem("cavity", n_max + 1), Subsystem("qubit", 2)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dimension for s in self.subsystems)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    @property
    def is_gate_level(self) -> bool:
        return all(d == 2 for d in self.dims)

    def __len__(self) -> int:
        return len(self.subsystems)

    def index_of(self, label: str) -> int:
        """ラベルから添字を引く."""
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown subsystem {label!r}") from None

    def without(self, index: int) -> SubsystemLayout:
        """指定サブシステムを除いた構成を返す."""
        self._check_targets([index])
        return SubsystemLayout(
            tuple(s for i, s in enumerate(self.subsystems) if i != index)
        )

    def _check_targets(self, targets: Sequence[int]) -> None:
        if len(set(targets)) != len(targets):
            raise LayoutError(f"duplicate targets {list(targets)}")
        for t in targets:
            if not 0 <= t < len(self.subsystems):
                raise LayoutError(f"target {t} out of range for {len(self)} subsystems")


@dataclass(frozen=True)
class StateVector:
    """構成に従う複素振幅ベクトル（不変値）."""

    layout: SubsystemLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.dimension:
            raise DimensionMismatchError(self.layout.dimension, amps.shape[0])
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> StateVector:
        norm = self.norm
        if norm < ZERO_PROBABILITY:
            raise SimulationError("cannot normalize a zero vector")
        return StateVector(self.layout, self.amplitudes / norm)

    def tensor(self) -> np.ndarray:
        """サブシステムごとの軸を持つテンソル表現（コピー）."""
        return self.amplitudes.reshape(self.layout.dims).copy()


@dataclass(frozen=True)
class LinearOperator:
    """正方行列演算子（密行列または座標形式の疎行列）."""

    matrix: np.ndarray | sparse.coo_array = field(repr=False)
    hermitian: bool = False

    def __post_init__(self) -> None:
        shape = self.matrix.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise DimensionMismatchError(shape[0], shape[-1])
        if not sparse.issparse(self.matrix):
            dense = np.array(self.matrix, dtype=complex)
            dense.setflags(write=False)
            object.__setattr__(self, "matrix", dense)
        if self.hermitian:
            deviation = hermitian_deviation(self.dense())
            if deviation >= HERMITIAN_TOLERANCE:
                raise NonHermitianError(deviation)

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    def dense(self) -> np.ndarray:
        if sparse.issparse(self.matrix):
            return np.asarray(self.matrix.toarray(), dtype=complex)
        return self.matrix

    def dagger(self) -> LinearOperator:
        return LinearOperator(self.dense().conj().T, hermitian=self.hermitian)

    def __matmul__(self, other: LinearOperator) -> LinearOperator:
        return LinearOperator(self.dense() @ other.dense())

    def unitarity_deviation(self) -> float:
        m = self.dense()
        return float(np.max(np.abs(m.conj().T @ m - np.eye(self.dimension))))


def hermitian_deviation(matrix: np.ndarray) -> float:
    """max|M - M†|."""
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


def _as_matrix(op: LinearOperator | np.ndarray) -> np.ndarray:
    if isinstance(op, LinearOperator):
        return op.dense()
    return np.asarray(op, dtype=complex)


def embed(
    op: LinearOperator | np.ndarray,
    targets: Sequence[int],
    layout: SubsystemLayout,
    *,
    as_sparse: bool = False,
) -> LinearOperator:
    """
    対象サブシステムに op、それ以外に恒等を作用させる全空間演算子を作る.

    Args:
        op: 対象サブシステムの積空間上の演算子（targets の順にテンソル積）
        targets: 対象サブシステムの添字
        layout: 全体の構成
        as_sparse: True なら座標形式の疎行列で返す

    Returns:
        全空間演算子

    Raises:
        LayoutError: targets が重複・範囲外の場合
        DimensionMismatchError: op の次元が対象次元の積と合わない場合
    """
    targets = list(targets)
    layout._check_targets(targets)
    matrix = _as_matrix(op)
    dims = layout.dims
    target_dim = math.prod(dims[t] for t in targets)
    if matrix.shape != (target_dim, target_dim):
        raise DimensionMismatchError(target_dim, matrix.shape[0])

    n = len(dims)
    rest = [i for i in range(n) if i not in targets]
    order = targets + rest
    rest_dim = math.prod(dims[i] for i in rest)

    if as_sparse:
        full = sparse.kron(sparse.coo_array(matrix), sparse.identity(rest_dim), format="coo")
        # 疎行列は添字の置換で軸を並べ替える
        perm = _index_permutation(dims, order)
        full = sparse.coo_array(
            (full.data, (perm[full.row], perm[full.col])), shape=full.shape
        )
        return LinearOperator(full)

    full = np.kron(matrix, np.eye(rest_dim, dtype=complex))
    shaped = full.reshape([dims[o] for o in order] * 2)
    axes_out = [order.index(k) for k in range(n)]
    shaped = shaped.transpose(axes_out + [n + a for a in axes_out])
    return LinearOperator(shaped.reshape(layout.dimension, layout.dimension))


def _index_permutation(dims: tuple[int, ...], order: list[int]) -> np.ndarray:
    """order 順の平坦添字から layout 順の平坦添字への写像."""
    permuted_dims = [dims[o] for o in order]
    idx = np.arange(math.prod(dims)).reshape(permuted_dims)
    multi = np.unravel_index(idx.reshape(-1), permuted_dims)
    layout_multi = [None] * len(dims)
    for pos, o in enumerate(order):
        layout_multi[o] = multi[pos]
    return np.ravel_multi_index(layout_multi, dims)


def apply(
    op: LinearOperator | np.ndarray,
    targets: Sequence[int],
    state: StateVector,
    *,
    unitary: bool = True,
) -> StateVector:
    """
    演算子を対象サブシステムに作用させ、正規化した新しい状態を返す.

    Args:
        op: 対象サブシステム上の演算子
        targets: 対象サブシステムの添字
        state: 入力状態（変更されない）
        unitary: False なら非ユニタリ演算子を許可する（射影など）

    Returns:
        正規化された新しい状態

    Raises:
        NonUnitaryError: unitary=True なのに op がユニタリでない場合
        DimensionMismatchError: 次元が合わない場合
    """
    targets = list(targets)
    layout = state.layout
    layout._check_targets(targets)
    matrix = _as_matrix(op)
    dims = layout.dims
    target_dims = [dims[t] for t in targets]
    target_dim = math.prod(target_dims)
    if matrix.shape != (target_dim, target_dim):
        raise DimensionMismatchError(target_dim, matrix.shape[0])
    if unitary:
        deviation = float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(target_dim))))
        if deviation >= UNITARY_TOLERANCE:
            raise NonUnitaryError(deviation)

    k = len(targets)
    psi = state.amplitudes.reshape(dims)
    op_tensor = matrix.reshape(target_dims * 2)
    result = np.tensordot(op_tensor, psi, axes=(list(range(k, 2 * k)), targets))
    result = np.moveaxis(result, list(range(k)), targets)
    return StateVector(layout, result.reshape(-1)).normalized()


def basis_state(layout: SubsystemLayout, indices: Sequence[int]) -> StateVector:
    """計算基底状態 |i_0 i_1 ...⟩."""
    if len(indices) != len(layout):
        raise DimensionMismatchError(len(layout), len(indices))
    amps = np.zeros(layout.dimension, dtype=complex)
    amps[np.ravel_multi_index(tuple(indices), layout.dims)] = 1.0
    return StateVector(layout, amps)


def product_state(layout: SubsystemLayout, factors: Sequence[np.ndarray]) -> StateVector:
    """各サブシステムの状態ベクトルのテンソル積."""
    if len(factors) != len(layout):
        raise DimensionMismatchError(len(layout), len(factors))
    amps = np.ones(1, dtype=complex)
    for factor, dim in zip(factors, layout.dims, strict=True):
        factor = np.asarray(factor, dtype=complex)
        if factor.shape != (dim,):
            raise DimensionMismatchError(dim, factor.shape[0])
        amps = np.kron(amps, factor)
    return StateVector(layout, amps).normalized()


def prepend(label: str, factor: np.ndarray, state: StateVector) -> StateVector:
    """状態の先頭（最も遅い軸）に新しいサブシステムを積として加える."""
    factor = np.asarray(factor, dtype=complex)
    layout = SubsystemLayout((Subsystem(label, factor.shape[0]),) + state.layout.subsystems)
    return StateVector(layout, np.kron(factor, state.amplitudes)).normalized()


def project_out(state: StateVector, index: int, bra: np.ndarray) -> StateVector:
    """
    サブシステムを bra で縮約して取り除き、残りを正規化して返す.

    Raises:
        ZeroProbabilityError: 縮約結果がゼロの場合
    """
    layout = state.layout
    bra = np.asarray(bra, dtype=complex)
    if bra.shape != (layout.dims[index],):
        raise DimensionMismatchError(layout.dims[index], bra.shape[0])
    psi = np.moveaxis(state.amplitudes.reshape(layout.dims), index, 0)
    remaining = np.tensordot(bra.conj(), psi, axes=(0, 0)).reshape(-1)
    probability = float(np.vdot(remaining, remaining).real)
    if probability < ZERO_PROBABILITY:
        raise ZeroProbabilityError(0, probability)
    return StateVector(layout.without(index), remaining).normalized()


class MeasurementPolicy(str, Enum):
    """X 測定の分岐選択ポリシー."""

    POSTSELECT_PLUS = "postselect_plus"
    SAMPLE = "sample"
    BOTH_BRANCHES = "both_branches"


@dataclass(frozen=True)
class MeasurementBranch:
    """測定の 1 分岐（結果・確率・測定後状態）."""

    outcome: int
    probability: float
    post_state: StateVector


@dataclass(frozen=True)
class MeasurementResult:
    """X 測定の結果. selected は採用された分岐."""

    branches: tuple[MeasurementBranch, ...]
    selected: int = 0

    @property
    def outcome(self) -> int:
        return self.branches[self.selected].outcome

    @property
    def probability(self) -> float:
        return self.branches[self.selected].probability

    @property
    def post_state(self) -> StateVector:
        return self.branches[self.selected].post_state

    def branch(self, outcome: int) -> MeasurementBranch:
        for b in self.branches:
            if b.outcome == outcome:
                return b
        raise ZeroProbabilityError(outcome, 0.0)


def measure_x(
    subsystem: int,
    state: StateVector,
    policy: MeasurementPolicy = MeasurementPolicy.BOTH_BRANCHES,
    seed: int | None = None,
) -> MeasurementResult:
    """
    2 準位サブシステムを X 基底で射影測定する.

    測定後状態は構成を保ったまま、対象サブシステムが |±⟩ に射影されたもの。

    Args:
        subsystem: 測定するサブシステムの添字（次元 2）
        state: 入力状態
        policy: 分岐選択ポリシー
        seed: SAMPLE ポリシーの乱数シード

    Returns:
        測定結果

    Raises:
        LayoutError: 次元が 2 でない場合
        ZeroProbabilityError: 要求された分岐の確率がゼロの場合
    """
    if state.layout.dims[subsystem] != 2:
        raise LayoutError(f"X measurement needs a two-level subsystem, got index {subsystem}")

    branches: list[MeasurementBranch] = []
    for outcome, ket in ((+1, KET_PLUS), (-1, KET_MINUS)):
        projector = np.outer(ket, ket.conj())
        psi = np.moveaxis(state.amplitudes.reshape(state.layout.dims), subsystem, 0)
        projected = np.tensordot(projector, psi, axes=(1, 0))
        projected = np.moveaxis(projected, 0, subsystem).reshape(-1)
        probability = float(np.vdot(projected, projected).real)
        if probability < ZERO_PROBABILITY:
            continue
        branches.append(
            MeasurementBranch(
                outcome,
                probability,
                StateVector(state.layout, projected / math.sqrt(probability)),
            )
        )

    def pick(outcome: int) -> MeasurementResult:
        for i, b in enumerate(branches):
            if b.outcome == outcome:
                return MeasurementResult(tuple(branches), selected=i)
        raise ZeroProbabilityError(outcome, 0.0)

    if policy is MeasurementPolicy.POSTSELECT_PLUS:
        result = pick(+1)
    elif policy is MeasurementPolicy.SAMPLE:
        rng = np.random.default_rng(seed)
        p_plus = sum(b.probability for b in branches if b.outcome == +1)
        result = pick(+1 if rng.random() < p_plus else -1)
    else:
        result = MeasurementResult(tuple(branches), selected=0)

    logger.debug(
        "Measured X",
        subsystem=subsystem,
        policy=policy.value,
        outcome=result.outcome,
        probability=result.probability,
    )
    return result


def reduced_density(state: StateVector, index: int) -> np.ndarray:
    """指定サブシステム以外を部分トレースした密度行列."""
    dims = state.layout.dims
    psi = np.moveaxis(state.amplitudes.reshape(dims), index, 0).reshape(dims[index], -1)
    return psi @ psi.conj().T


def reduced_cavity_state(state: StateVector) -> np.ndarray:
    """
    全スピンを部分トレースしたキャビティの 2×2 密度行列.

    Raises:
        LayoutError: ゲートレベル構成でない、または 0 番がキャビティでない場合
    """
    if not state.layout.is_gate_level or state.layout.labels[0] != "cavity":
        raise LayoutError("reduced_cavity_state needs a gate-level layout with the cavity first")
    return reduced_density(state, 0)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|⟨a|b⟩|²."""
    if a.layout != b.layout:
        raise LayoutError(f"layouts differ: {a.layout.labels} vs {b.layout.labels}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
