"""Ideal gate library and the line-based circuit model."""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from cqed_anyons.application.hilbert import (
    HADAMARD,
    IDENTITY_2,
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DimensionMismatchError,
    LayoutError,
    LinearOperator,
    MeasurementPolicy,
    MeasurementResult,
    NonUnitaryError,
    StateVector,
    SubsystemLayout,
    apply,
    measure_x,
    project_out,
    reduced_density,
)
from cqed_anyons.application.models import PhysicsInvariantError, SimulationError
from cqed_anyons.infrastructure.logging import get_logger

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = get_logger(__name__)

GATE_TOLERANCE = 1e-12

PAULI_MATRICES: dict[str, np.ndarray] = {
    "I": IDENTITY_2,
    "X": PAULI_X,
    "Y": PAULI_Y,
    "Z": PAULI_Z,
}

RESET_STATES: dict[str, np.ndarray] = {
    "zero": KET_0,
    "one": KET_1,
    "plus": KET_PLUS,
    "minus": KET_MINUS,
}

CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


class GateConventionError(SimulationError):
    """U^c の合成チェックがどちらの符号規約でも通らない場合の例外."""

    def __init__(self, distance: float) -> None:
        """
        Initialize GateConventionError.

        Args:
            distance: 最良の符号規約での位相無視距離
        """
        super().__init__(
            f"U^c composition check failed for both Z(pi/2) signs (best distance {distance:.3e})"
        )
        self.distance = distance


class NotCliffordError(SimulationError):
    """Pauli 共役が Pauli にならないゲートの例外."""

    def __init__(self, gate_name: str, pauli: str) -> None:
        """
        Initialize NotCliffordError.

        Args:
            gate_name: ゲート名
            pauli: 像が Pauli にならなかった入力 Pauli
        """
        super().__init__(f"Gate {gate_name!r} is not Clifford: image of {pauli} is not a Pauli")
        self.gate_name = gate_name
        self.pauli = pauli


class CircuitFormatError(SimulationError):
    """回路テキストの解析エラー."""

    def __init__(self, line_number: int, line: str, reason: str) -> None:
        """
        Initialize CircuitFormatError.

        Args:
            line_number: 行番号（1 始まり）
            line: 問題の行
            reason: 理由
        """
        super().__init__(f"Line {line_number}: {reason}: {line!r}")
        self.line_number = line_number
        self.line = line
        self.reason = reason


@dataclass(frozen=True, eq=False)
class GateOp:
    """
    名前付きの理想ゲート.

    params はテキスト形式で再構築するためのパラメータ（名前, 値）。
    """

    name: str
    matrix: LinearOperator
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        dim = self.matrix.dimension
        if dim not in (2, 4):
            raise DimensionMismatchError(4, dim)
        deviation = self.matrix.unitarity_deviation()
        if deviation >= GATE_TOLERANCE:
            raise NonUnitaryError(deviation)

    @property
    def arity(self) -> int:
        return 1 if self.matrix.dimension == 2 else 2

    def dense(self) -> np.ndarray:
        return self.matrix.dense()


def unitary_distance_up_to_phase(u: np.ndarray, v: np.ndarray) -> float:
    """
    大域位相を無視したユニタリ間距離 1 − |tr(U†V)|/d.

    Raises:
        DimensionMismatchError: 次元が異なる場合
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise DimensionMismatchError(u.shape[0], v.shape[0])
    d = u.shape[0]
    return max(0.0, 1.0 - abs(np.trace(u.conj().T @ v)) / d)


def pauli_x() -> GateOp:
    return GateOp("pauli_x", LinearOperator(PAULI_X))


def pauli_z() -> GateOp:
    return GateOp("pauli_z", LinearOperator(PAULI_Z))


def hadamard() -> GateOp:
    return GateOp("hadamard", LinearOperator(HADAMARD))


def _z_half_matrix(sign: int) -> np.ndarray:
    return np.diag([np.exp(-sign * 1j * math.pi / 4), np.exp(sign * 1j * math.pi / 4)])


def z_half() -> GateOp:
    """z 軸まわり π/2 回転 diag(e^{−iπ/4}, e^{+iπ/4})."""
    return GateOp("z_half", LinearOperator(_z_half_matrix(+1)))


def u_theta(theta: float) -> GateOp:
    """
    共鳴 JC 振動のゲート U(θ), θ = g t.

    基底順は {|g0⟩,|g1⟩,|e0⟩,|e1⟩}（第 1 因子がスピン、第 2 因子がキャビティ）。
    回路で使う場合の targets は (スピン, キャビティ) の順。
    """
    c, s = math.cos(theta), math.sin(theta)
    m = np.eye(4, dtype=complex)
    m[1, 1] = m[2, 2] = c
    m[1, 2] = m[2, 1] = -1j * s
    return GateOp("u_theta", LinearOperator(m), params=(("theta", float(theta)),))


def _u_c_matrix() -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1
    m[2, 1] = 1
    m[1, 2] = 1
    m[3, 3] = -1
    return m


def u_c() -> GateOp:
    """
    スワップ付き制御位相ゲート U^c.

    (I⊗Z_{π/2})·U(π/2)·(I⊗Z_{π/2}) と大域位相を除いて一致することを構築時に確認する。

    Raises:
        GateConventionError: どちらの Z_{π/2} 符号でも一致しない場合
    """
    target = _u_c_matrix()
    resonant = u_theta(math.pi / 2).dense()
    best = math.inf
    for sign in (+1, -1):
        dressing = np.kron(IDENTITY_2, _z_half_matrix(sign))
        distance = unitary_distance_up_to_phase(dressing @ resonant @ dressing, target)
        if distance < GATE_TOLERANCE:
            logger.debug("U^c convention resolved", z_half_sign=sign, distance=distance)
            return GateOp("u_c", LinearOperator(target))
        best = min(best, distance)
    raise GateConventionError(best)


def controlled_z_on_spin() -> GateOp:
    """U_z = |0⟩⟨0| ⊗ σ_z + |1⟩⟨1| ⊗ I（制御はキャビティ）."""
    return GateOp("u_z", LinearOperator(np.diag([1, -1, 1, 1]).astype(complex)))


def controlled_x_on_spin() -> GateOp:
    """U_x = |0⟩⟨0| ⊗ σ_x + |1⟩⟨1| ⊗ I. スピン側 Hadamard 共役の U_z と照合する."""
    m = np.zeros((4, 4), dtype=complex)
    m[:2, :2] = PAULI_X
    m[2:, 2:] = IDENTITY_2
    h_spin = np.kron(IDENTITY_2, HADAMARD)
    conjugated = h_spin @ controlled_z_on_spin().dense() @ h_spin
    if np.max(np.abs(conjugated - m)) >= GATE_TOLERANCE:
        raise GateConventionError(float(np.max(np.abs(conjugated - m))))
    return GateOp("u_x", LinearOperator(m))


def conditional_excitation(eta: float, pauli: str = "x") -> GateOp:
    """
    部分的な制御操作 |0⟩⟨0| ⊗ e^{iθ}exp(−iθP) + |1⟩⟨1| ⊗ I, θ = arcsin η.

    η = 1 で U_x / U_z に一致し、η = 0 で恒等になる。

    Args:
        eta: 励起の強さ（−1〜1）
        pauli: "x" または "z"

    Raises:
        ValueError: |η| > 1 または pauli が不正な場合
    """
    if abs(eta) > 1:
        raise ValueError(f"eta must lie in [-1, 1], got {eta}")
    key = pauli.upper()
    if key not in ("X", "Z"):
        raise ValueError(f"pauli must be 'x' or 'z', got {pauli!r}")
    theta = math.asin(eta)
    block = np.exp(1j * theta) * (
        math.cos(theta) * IDENTITY_2 - 1j * math.sin(theta) * PAULI_MATRICES[key]
    )
    m = np.zeros((4, 4), dtype=complex)
    m[:2, :2] = block
    m[2:, 2:] = IDENTITY_2
    return GateOp(f"cond_{pauli.lower()}", LinearOperator(m), params=(("eta", float(eta)),))


GATE_FACTORIES: dict[str, Callable[..., GateOp]] = {
    "pauli_x": pauli_x,
    "pauli_z": pauli_z,
    "hadamard": hadamard,
    "z_half": z_half,
    "u_theta": u_theta,
    "u_c": u_c,
    "u_z": controlled_z_on_spin,
    "u_x": controlled_x_on_spin,
    "cond_x": lambda eta: conditional_excitation(eta, "x"),
    "cond_z": lambda eta: conditional_excitation(eta, "z"),
}


def gate_by_name(name: str, **params: float) -> GateOp:
    """名前とパラメータからゲートを構築する."""
    try:
        factory = GATE_FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown gate {name!r}") from None
    return factory(**params)


PauliLetters = tuple[str, ...]


def pauli_matrix(letters: PauliLetters) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for letter in letters:
        m = np.kron(m, PAULI_MATRICES[letter])
    return m


def pauli_conjugation_table(gate: GateOp) -> dict[PauliLetters, tuple[PauliLetters, int]]:
    """
    G P G† の像を全 Pauli について求める.

    Returns:
        入力 Pauli の文字列タプル → (像の文字列タプル, 符号 ±1)

    Raises:
        NotCliffordError: 像が符号 ±1 の Pauli にならない場合
    """
    g = gate.dense()
    n = gate.arity
    d = 2**n
    candidates = {
        letters: pauli_matrix(letters)
        for letters in itertools.product("IXYZ", repeat=n)
    }
    table: dict[PauliLetters, tuple[PauliLetters, int]] = {}
    for letters, p in candidates.items():
        image = g @ p @ g.conj().T
        for out_letters, q in candidates.items():
            coefficient = np.trace(q @ image) / d
            if abs(abs(coefficient) - 1) < 1e-9:
                if abs(coefficient.imag) > 1e-9:
                    raise NotCliffordError(gate.name, "".join(letters))
                table[letters] = (out_letters, 1 if coefficient.real > 0 else -1)
                break
        else:
            raise NotCliffordError(gate.name, "".join(letters))
    return table


@dataclass(frozen=True, eq=False)
class GateStep:
    gate: GateOp
    targets: tuple[int, ...]


@dataclass(frozen=True)
class MeasureStep:
    index: int
    policy: MeasurementPolicy


@dataclass(frozen=True)
class ResetStep:
    index: int
    label: str


Step = GateStep | MeasureStep | ResetStep


@dataclass
class CircuitRun:
    """回路実行の結果."""

    state: StateVector
    measurements: list[MeasurementResult] = field(default_factory=list)


@dataclass
class Circuit:
    """
    構成上のステップ列（ゲート適用・X 測定・状態リセット注記）.

    Attributes:
        layout: 対象の構成（ゲートレベル）
        steps: ステップ列
    """

    layout: SubsystemLayout
    steps: list[Step] = field(default_factory=list)

    def __iter__(self) -> Iterator[Step]:
        return iter(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def gate(self, gate: GateOp, *targets: int) -> Circuit:
        """ゲート適用ステップを追加する（制御付きゲートは制御が先頭）."""
        if len(targets) != gate.arity:
            raise DimensionMismatchError(gate.arity, len(targets))
        self._check(targets)
        self.steps.append(GateStep(gate, tuple(targets)))
        return self

    def measure_x(
        self, index: int, policy: MeasurementPolicy = MeasurementPolicy.POSTSELECT_PLUS
    ) -> Circuit:
        self._check((index,))
        self.steps.append(MeasureStep(index, policy))
        return self

    def reset(self, index: int, label: str) -> Circuit:
        if label not in RESET_STATES:
            raise ValueError(f"unknown reset state {label!r}")
        self._check((index,))
        self.steps.append(ResetStep(index, label))
        return self

    def _check(self, targets: Sequence[int]) -> None:
        self.layout._check_targets(targets)
        for t in targets:
            if self.layout.dims[t] != 2:
                raise LayoutError(f"subsystem {t} is not two-level")

    def run(self, state: StateVector, seed: int | None = None) -> CircuitRun:
        """
        状態ベクトル上で回路を実行する.

        both_branches の測定では +1 分岐（なければ −1 分岐）を採用して続行する。
        """
        if state.layout != self.layout:
            raise LayoutError("state layout does not match circuit layout")
        run = CircuitRun(state)
        for step in self.steps:
            if isinstance(step, GateStep):
                run.state = apply(step.gate.matrix, step.targets, run.state)
            elif isinstance(step, MeasureStep):
                result = measure_x(step.index, run.state, step.policy, seed)
                run.measurements.append(result)
                run.state = result.post_state
            else:
                run.state = reset_subsystem(run.state, step.index, RESET_STATES[step.label])
        return run

    def to_text(self) -> str:
        """1 行 1 ステップのテキスト表現."""
        lines = []
        for step in self.steps:
            if isinstance(step, GateStep):
                parts = ["gate", step.gate.name, ",".join(str(t) for t in step.targets)]
                parts += [f"{k}={v!r}" for k, v in step.gate.params]
                lines.append(" ".join(parts))
            elif isinstance(step, MeasureStep):
                lines.append(f"measure_x {step.index} {step.policy.value}")
            else:
                lines.append(f"reset {step.index} {step.label}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, layout: SubsystemLayout) -> Circuit:
        """
        to_text の出力を読み戻す. 空行と '#' で始まる行は無視する.

        Raises:
            CircuitFormatError: 行を解釈できない場合
        """
        circuit = cls(layout)
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            try:
                if tokens[0] == "gate" and len(tokens) >= 3:
                    params = {}
                    for token in tokens[3:]:
                        key, _, value = token.partition("=")
                        params[key] = float(value)
                    targets = [int(t) for t in tokens[2].split(",")]
                    circuit.gate(gate_by_name(tokens[1], **params), *targets)
                elif tokens[0] == "measure_x" and len(tokens) == 3:
                    circuit.measure_x(int(tokens[1]), MeasurementPolicy(tokens[2]))
                elif tokens[0] == "reset" and len(tokens) == 3:
                    circuit.reset(int(tokens[1]), tokens[2])
                else:
                    raise CircuitFormatError(number, raw, "unrecognized step")
            except CircuitFormatError:
                raise
            except (ValueError, TypeError, SimulationError) as e:
                raise CircuitFormatError(number, raw, str(e)) from e
        return circuit


def reset_subsystem(state: StateVector, index: int, ket: np.ndarray) -> StateVector:
    """
    積状態になっているサブシステムを ket に置き換える.

    Raises:
        PhysicsInvariantError: サブシステムが残りと絡み合っている場合
    """
    rho = reduced_density(state, index)
    values, vectors = np.linalg.eigh(rho)
    if values[-1] < 1 - 1e-9:
        raise PhysicsInvariantError(
            "product reset", f"subsystem {index} is entangled (purity {values[-1]:.6f})"
        )
    rest = project_out(state, index, vectors[:, -1])
    dims = state.layout.dims
    rest_tensor = rest.amplitudes.reshape([d for i, d in enumerate(dims) if i != index])
    combined = np.multiply.outer(np.asarray(ket, dtype=complex), rest_tensor)
    combined = np.moveaxis(combined, 0, index)
    return StateVector(state.layout, combined.reshape(-1)).normalized()


def ideal_gate_library() -> list[GateOp]:
    """Clifford 検査の対象となるゲート一覧."""
    return [
        pauli_x(),
        pauli_z(),
        hadamard(),
        z_half(),
        u_theta(math.pi / 2),
        u_c(),
        controlled_z_on_spin(),
        controlled_x_on_spin(),
    ]
