"""
Pulse-level cavity + qubit dynamics.

Hamiltonian builders for the Jaynes-Cummings model, its driven, displaced,
rotating-frame and dispersive forms, time evolution, and pulse-versus-ideal
gate fidelities.

Basis: cavity Fock |n⟩ (n = 0..n_max) ⊗ qubit (|g⟩, |e⟩), cavity slowest.
σ^z = |e⟩⟨e| − |g⟩⟨g| and σ^+ = |e⟩⟨g|.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from cqed_anyons.application.hilbert import (
    HERMITIAN_TOLERANCE,
    DimensionMismatchError,
    LinearOperator,
    NonHermitianError,
    StateVector,
    SubsystemLayout,
    basis_state,
    embed,
    hermitian_deviation,
)
from cqed_anyons.application.models import SimulationError
from cqed_anyons.infrastructure.logging import get_logger

logger = get_logger(__name__)

DISPERSIVE_RATIO_WARNING = 5.0
Z_DRIVE_RATIO_WARNING = 5.0

# RK4 の刻みは step·‖H‖ ≤ RK4_STABILITY になるよう細分する
RK4_STABILITY = 0.02
RK4_NORM_TOLERANCE = 1e-6

QUBIT_SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
QUBIT_SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
QUBIT_SIGMA_MINUS = QUBIT_SIGMA_PLUS.T.copy()
QUBIT_SIGMA_X = QUBIT_SIGMA_PLUS + QUBIT_SIGMA_MINUS
QUBIT_SIGMA_Y = 1j * (QUBIT_SIGMA_MINUS - QUBIT_SIGMA_PLUS)
QUBIT_EXCITED = np.diag([0.0, 1.0]).astype(complex)


class ParameterError(SimulationError):
    """物理パラメータが演算の前提を満たさない場合の例外."""

    def __init__(self, parameter: str, message: str) -> None:
        """
        Initialize ParameterError.

        Args:
            parameter: 問題のパラメータ名
            message: 詳細
        """
        super().__init__(f"Invalid parameter {parameter}: {message}")
        self.parameter = parameter


class NormDriftError(SimulationError):
    """RK4 積分でノルムが許容以上にずれた場合の例外."""

    def __init__(self, drift: float) -> None:
        """
        Initialize NormDriftError.

        Args:
            drift: 再規格化前のノルムの相対ずれ
        """
        super().__init__(f"RK4 norm drift {drift:.3e} exceeds {RK4_NORM_TOLERANCE:.0e}")
        self.drift = drift


class SubspaceMismatchError(SimulationError):
    """理想ゲートの次元が比較部分空間と合わない場合の例外."""

    def __init__(self, expected: int, actual: int) -> None:
        """
        Initialize SubspaceMismatchError.

        Args:
            expected: 期待される次元
            actual: 渡された理想ゲートの次元
        """
        super().__init__(f"Ideal gate has dimension {actual}, expected {expected}")
        self.expected = expected
        self.actual = actual


@dataclass(frozen=True)
class PulseParams:
    """
    パルスレベルの物理パラメータ（角周波数、時間の逆数の単位）.

    Attributes:
        omega_r: キャビティ周波数
        nu: 量子ビット分裂
        g: 結合
        omega_d: ドライブ周波数
        epsilon: ドライブ振幅（複素数）
        n_max: Fock 打ち切り
    """

    omega_r: float
    nu: float
    g: float
    omega_d: float
    epsilon: complex = 0.0
    n_max: int = 4

    def __post_init__(self) -> None:
        if self.g < 0:
            raise ParameterError("g", f"must be non-negative, got {self.g}")
        if self.n_max < 1:
            raise ParameterError("n_max", f"must be >= 1, got {self.n_max}")
        object.__setattr__(self, "epsilon", complex(self.epsilon))

    @classmethod
    def for_x_rotation(
        cls,
        ratio: float = 10.0,
        *,
        g: float = 1.0,
        omega_r: float = 60.0,
        rabi: float | None = None,
        n_max: int = 4,
    ) -> PulseParams:
        """
        x 回転の較正点のパラメータ.

        δ = ratio·g、Δ = g²/δ（ε = 0 での真空分裂がゼロになる点）、
        Ω は既定で g/2。

        Args:
            ratio: δ/g
            g: 結合
            omega_r: キャビティ周波数
            rabi: Rabi 周波数 Ω（省略時 g/2）
            n_max: Fock 打ち切り
        """
        delta = ratio * g
        omega_d = omega_r - delta
        detuning = x_resonance_detuning(g, delta)
        rabi = g / 2 if rabi is None else rabi
        return cls(
            omega_r=omega_r,
            nu=omega_d + detuning,
            g=g,
            omega_d=omega_d,
            epsilon=rabi * delta / (2 * g),
            n_max=n_max,
        )

    @classmethod
    def for_z_rotation(
        cls,
        ratio: float = 10.0,
        *,
        g: float = 1.0,
        omega_r: float = 60.0,
        detuning: float = 0.5,
        rabi: float = 0.05,
        n_max: int = 4,
    ) -> PulseParams:
        """z 回転（|Δ| ≫ Ω）用のパラメータ. δ = ratio·g."""
        delta = ratio * g
        omega_d = omega_r - delta
        return cls(
            omega_r=omega_r,
            nu=omega_d + detuning,
            g=g,
            omega_d=omega_d,
            epsilon=rabi * delta / (2 * g),
            n_max=n_max,
        )

    @property
    def delta(self) -> float:
        """δ = ω_r − ω_d."""
        return self.omega_r - self.omega_d

    @property
    def detuning(self) -> float:
        """Δ = ν − ω_d."""
        return self.nu - self.omega_d

    @property
    def rabi(self) -> complex:
        """Ω = 2gε/δ."""
        if self.delta == 0:
            raise ParameterError("delta", "Rabi frequency needs omega_r != omega_d")
        return 2 * self.g * self.epsilon / self.delta

    @property
    def chi(self) -> float:
        """χ = Δ + g²/δ + |Ω|²/(2Δ)."""
        if self.detuning == 0:
            raise ParameterError("detuning", "chi needs nu != omega_d")
        if self.delta == 0:
            raise ParameterError("delta", "chi needs omega_r != omega_d")
        shift = self.g**2 / self.delta
        return self.detuning + shift + abs(self.rabi) ** 2 / (2 * self.detuning)

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout.pulse_level(self.n_max)

    def with_n_max(self, n_max: int) -> PulseParams:
        return replace(self, n_max=n_max)


def x_resonance_detuning(g: float, delta: float) -> float:
    """ε = 0 の真空分裂をゼロにする Δ（= g²/δ）."""
    if delta == 0:
        raise ParameterError("delta", "must be non-zero")
    return g**2 / delta


def vacuum_splitting(p: PulseParams) -> float:
    """
    ε = 0 の回転座標系での |ẽ,0⟩ と |g,0⟩ のエネルギー差.

    (δ+Δ)/2 − √((δ−Δ)²/4 + g²)
    """
    d, dd = p.delta, p.detuning
    return (d + dd) / 2 - math.sqrt((d - dd) ** 2 / 4 + p.g**2)


class _Operators:
    """構成上に埋め込んだ a, a†a, σ^z, σ^±."""

    def __init__(self, n_max: int) -> None:
        layout = SubsystemLayout.pulse_level(n_max)
        a_cav = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)
        self.a = embed(a_cav, [0], layout).dense()
        self.ad = self.a.conj().T
        self.n = self.ad @ self.a
        self.sz = embed(QUBIT_SIGMA_Z, [1], layout).dense()
        self.sp = embed(QUBIT_SIGMA_PLUS, [1], layout).dense()
        self.sm = embed(QUBIT_SIGMA_MINUS, [1], layout).dense()
        self.sx = self.sp + self.sm
        self.sy = embed(QUBIT_SIGMA_Y, [1], layout).dense()
        self.excited = embed(QUBIT_EXCITED, [1], layout).dense()
        self.identity = np.eye(layout.dimension, dtype=complex)


def _ops(p: PulseParams) -> _Operators:
    return _Operators(p.n_max)


def _hermitian(matrix: np.ndarray) -> LinearOperator:
    # 浮動小数の丸めで生じる非対称を取り除く
    return LinearOperator((matrix + matrix.conj().T) / 2, hermitian=True)


def build_jc(p: PulseParams) -> LinearOperator:
    """H = ω_r a†a + (ν/2)σ^z − g(a†σ⁻ + aσ⁺)."""
    o = _ops(p)
    h = p.omega_r * o.n + (p.nu / 2) * o.sz - p.g * (o.ad @ o.sm + o.a @ o.sp)
    return _hermitian(h)


def build_drive(p: PulseParams, t: float) -> LinearOperator:
    """h(t) = ε a† e^{−iω_d t} + ε* a e^{+iω_d t}."""
    o = _ops(p)
    phase = p.epsilon * np.exp(-1j * p.omega_d * t)
    return _hermitian(phase * o.ad + np.conj(phase) * o.a)


def numerical_alpha(p: PulseParams, times: Sequence[float] | np.ndarray) -> np.ndarray:
    """i·α̇ = ω_r α + ε e^{−iω_d t}, α(0) = 0 を DOP853 で解く."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        return np.zeros(0, dtype=complex)
    t_end = float(times.max())
    if t_end == 0:
        return np.zeros_like(times, dtype=complex)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return -1j * (p.omega_r * y + p.epsilon * np.exp(-1j * p.omega_d * t))

    solution = solve_ivp(
        rhs,
        (0.0, t_end),
        np.array([0.0 + 0.0j]),
        method="DOP853",
        t_eval=np.sort(times),
        rtol=1e-12,
        atol=1e-14,
    )
    if not solution.success:
        raise SimulationError(f"alpha integration failed: {solution.message}")
    order = np.argsort(times)
    values = np.empty(times.shape, dtype=complex)
    values[order] = solution.y[0]
    return values


def classical_alpha(p: PulseParams, t: float | np.ndarray) -> complex | np.ndarray:
    """
    古典変位 α(t) = −(ε/δ)(e^{−iω_d t} − e^{−iω_r t}).

    δ = 0（共鳴ドライブ）では閉形式が使えないため警告を出して数値解を返す。
    """
    scalar = np.isscalar(t)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if p.delta == 0:
        logger.warning(
            "Resonant drive, closed-form alpha invalid; integrating numerically",
            omega_r=p.omega_r,
            omega_d=p.omega_d,
        )
        values = numerical_alpha(p, times)
    else:
        values = -(p.epsilon / p.delta) * (
            np.exp(-1j * p.omega_d * times) - np.exp(-1j * p.omega_r * times)
        )
    return complex(values[0]) if scalar else values


def build_displaced(p: PulseParams, alpha: complex) -> LinearOperator:
    """H_D = ω_r a†a + (ν/2)σ^z − g[(a+α)σ⁺ + (a†+α*)σ⁻]."""
    o = _ops(p)
    h = (
        p.omega_r * o.n
        + (p.nu / 2) * o.sz
        - p.g * (o.a + alpha * o.identity) @ o.sp
        - p.g * (o.ad + np.conj(alpha) * o.identity) @ o.sm
    )
    return _hermitian(h)


def _qubit_drive(o: _Operators, rabi: complex) -> np.ndarray:
    # 実数の Ω なら (Ω/2)σ^x
    return (rabi * o.sp + np.conj(rabi) * o.sm) / 2


def build_rotating(p: PulseParams) -> LinearOperator:
    """
    H_RF = δa†a + (Δ/2)σ^z + (Ωσ⁺ + Ω*σ⁻)/2 − g(aσ⁺ + a†σ⁻).

    Raises:
        ParameterError: δ = 0 の場合
    """
    o = _ops(p)
    h = (
        p.delta * o.n
        + (p.detuning / 2) * o.sz
        + _qubit_drive(o, p.rabi)
        - p.g * (o.a @ o.sp + o.ad @ o.sm)
    )
    return _hermitian(h)


def _warn_dispersive(p: PulseParams) -> None:
    if p.g > 0 and abs(p.delta) / p.g < DISPERSIVE_RATIO_WARNING:
        logger.warning("Dispersive condition weak", delta_over_g=abs(p.delta) / p.g)


def build_dispersive_x(p: PulseParams) -> LinearOperator:
    """H_x = δa†a + ((Δ + g²/δ)/2)σ^z + (Ω/2)σ^x."""
    _warn_dispersive(p)
    o = _ops(p)
    shift = p.detuning + p.g**2 / p.delta if p.delta else 0.0
    h = p.delta * o.n + (shift / 2) * o.sz + _qubit_drive(o, p.rabi)
    return _hermitian(h)


def build_dispersive_z(p: PulseParams) -> LinearOperator:
    """
    H_z = δa†a + (χ/2)σ^z.

    Raises:
        ParameterError: Δ = 0 または δ = 0 の場合
    """
    _warn_dispersive(p)
    rabi = abs(p.rabi)
    if rabi > 0 and abs(p.detuning) / rabi < Z_DRIVE_RATIO_WARNING:
        logger.warning(
            "Off-resonant drive condition weak",
            detuning_over_rabi=abs(p.detuning) / rabi,
        )
    o = _ops(p)
    return _hermitian(p.delta * o.n + (p.chi / 2) * o.sz)


class EvolutionMethod(str, Enum):
    MATRIX_EXPONENTIAL = "matrix_exponential"
    FIXED_STEP_RK4 = "fixed_step_rk4"


@dataclass(frozen=True)
class EvolutionSpec:
    """
    時間発展の指定.

    Attributes:
        hamiltonian: エルミートなハミルトニアン
        duration: 発展時間
        method: 積分法
        step: RK4 の刻み幅
    """

    hamiltonian: LinearOperator
    duration: float
    method: EvolutionMethod = EvolutionMethod.MATRIX_EXPONENTIAL
    step: float | None = None

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise ParameterError("duration", f"must be >= 0, got {self.duration}")
        deviation = hermitian_deviation(self.hamiltonian.dense())
        if deviation >= HERMITIAN_TOLERANCE:
            raise NonHermitianError(deviation)
        if self.method is EvolutionMethod.FIXED_STEP_RK4 and self.duration > 0:
            if self.step is None or self.step <= 0:
                raise ParameterError("step", "RK4 needs a positive step")
            if self.step > self.duration / 10:
                raise ParameterError("step", f"must be <= duration/10, got {self.step}")


def propagator(hamiltonian: LinearOperator | np.ndarray, duration: float) -> np.ndarray:
    """exp(−iHt) をエルミート固有分解で計算する."""
    h = hamiltonian.dense() if isinstance(hamiltonian, LinearOperator) else hamiltonian
    energies, vectors = linalg.eigh(h)
    return (vectors * np.exp(-1j * energies * duration)) @ vectors.conj().T


def _rk4(
    hamiltonian_at: Callable[[float], np.ndarray],
    psi: np.ndarray,
    t0: float,
    t1: float,
    step: float,
    norm_bound: float,
) -> np.ndarray:
    span = t1 - t0
    n_steps = max(
        1,
        math.ceil(span / step - 1e-9),
        math.ceil(span * norm_bound / RK4_STABILITY - 1e-9),
    )
    h = (t1 - t0) / n_steps
    t = t0
    for _ in range(n_steps):
        k1 = -1j * (hamiltonian_at(t) @ psi)
        mid = hamiltonian_at(t + h / 2)
        k2 = -1j * (mid @ (psi + h / 2 * k1))
        k3 = -1j * (mid @ (psi + h / 2 * k2))
        k4 = -1j * (hamiltonian_at(t + h) @ (psi + h * k3))
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return psi


def _renormalized(psi: np.ndarray, reference: float) -> np.ndarray:
    norm = float(np.linalg.norm(psi))
    drift = abs(norm / reference - 1)
    if drift > RK4_NORM_TOLERANCE:
        raise NormDriftError(drift)
    return psi * (reference / norm)


def evolve(evolution: EvolutionSpec, state: StateVector) -> StateVector:
    """
    ψ(t) = exp(−iHt)ψ(0).

    RK4 は step·‖H‖ が RK4_STABILITY を超えないよう刻みを細分し、最後に規格化し直す。

    Raises:
        DimensionMismatchError: ハミルトニアンと状態の次元が合わない場合
        NormDriftError: RK4 のノルムのずれが RK4_NORM_TOLERANCE を超えた場合
    """
    h = evolution.hamiltonian.dense()
    if h.shape[0] != state.layout.dimension:
        raise DimensionMismatchError(state.layout.dimension, h.shape[0])
    if evolution.duration == 0:
        return state
    if evolution.method is EvolutionMethod.MATRIX_EXPONENTIAL:
        psi = propagator(h, evolution.duration) @ state.amplitudes
    else:
        assert evolution.step is not None
        bound = float(np.linalg.norm(h, 2))
        psi = _rk4(
            lambda _t: h, state.amplitudes, 0.0, evolution.duration, evolution.step, bound
        )
        psi = _renormalized(psi, state.norm)
    return StateVector(state.layout, psi)


def evolve_trajectory(
    static: np.ndarray,
    coupling: np.ndarray,
    coefficient: Callable[[float], complex],
    psi0: np.ndarray,
    times: Sequence[float],
    step: float,
) -> list[np.ndarray]:
    """
    H(t) = H₀ + c(t)A + c(t)*A† を固定刻み RK4 で積分し、各サンプル時刻の状態を返す.

    Args:
        static: H₀
        coupling: A
        coefficient: c(t)
        psi0: 初期状態（t = 0）
        times: 昇順のサンプル時刻
        step: 最大刻み幅（‖H(t)‖ に応じてさらに細分する）

    Raises:
        NormDriftError: 区間ごとのノルムのずれが RK4_NORM_TOLERANCE を超えた場合
    """
    coupling_dag = coupling.conj().T
    static_norm = float(np.linalg.norm(static, 2))
    coupling_norm = float(np.linalg.norm(coupling, 2))

    def hamiltonian_at(t: float) -> np.ndarray:
        c = coefficient(t)
        return static + c * coupling + np.conj(c) * coupling_dag

    states = []
    psi = np.asarray(psi0, dtype=complex)
    reference = float(np.linalg.norm(psi))
    t_prev = 0.0
    for t in times:
        if t > t_prev:
            peak = max(abs(coefficient(s)) for s in (t_prev, (t_prev + t) / 2, t))
            bound = static_norm + 2 * peak * coupling_norm
            psi = _renormalized(_rk4(hamiltonian_at, psi, t_prev, t, step, bound), reference)
            t_prev = t
        states.append(psi.copy())
    return states


def displacement(p: PulseParams, alpha: complex) -> np.ndarray:
    """D(α) = exp(αa† − α*a)（打ち切り空間）."""
    o = _ops(p)
    return linalg.expm(alpha * o.ad - np.conj(alpha) * o.a)


def qubit_expectations(p: PulseParams, psi: np.ndarray) -> tuple[float, float, float]:
    """⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩."""
    o = _ops(p)
    sx, sy, sz = (float(np.vdot(psi, op @ psi).real) for op in (o.sx, o.sy, o.sz))
    return sx, sy, sz


@dataclass(frozen=True)
class FrameComparison:
    times: np.ndarray
    lab: np.ndarray
    displaced: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.lab - self.displaced)))


def frame_equivalence(
    p: PulseParams,
    duration: float,
    samples: int = 50,
    steps: int = 50_000,
    initial: tuple[int, int] = (0, 1),
) -> FrameComparison:
    """
    実験室系の駆動発展を D(α)† で変換したものと、変位系の発展の量子ビット期待値を比べる.

    Args:
        p: パラメータ（δ ≠ 0）
        duration: 全時間
        samples: サンプル数
        steps: 全時間あたりの RK4 ステップ数
        initial: 初期状態の (Fock 数, 量子ビット) 添字（既定 |e,0⟩）
    """
    o = _ops(p)
    h_jc = build_jc(p).dense()
    psi0 = basis_state(p.layout, initial).amplitudes
    times = np.linspace(0.0, duration, samples + 1)[1:]
    step = duration / steps

    lab_states = evolve_trajectory(
        h_jc, o.ad, lambda t: p.epsilon * np.exp(-1j * p.omega_d * t), psi0, times, step
    )
    # H_D = H_JC − g(α σ⁺ + α* σ⁻)
    displaced_states = evolve_trajectory(
        h_jc, o.sp, lambda t: -p.g * classical_alpha(p, t), psi0, times, step
    )

    lab = []
    displaced = []
    for t, psi_lab, psi_d in zip(times, lab_states, displaced_states, strict=True):
        moved = displacement(p, classical_alpha(p, t)).conj().T @ psi_lab
        lab.append(qubit_expectations(p, moved))
        displaced.append(qubit_expectations(p, psi_d))
    return FrameComparison(times, np.array(lab), np.array(displaced))


def vacuum_rabi(p: PulseParams, times: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """
    共鳴 JC の |e,0⟩ からの発展.

    Returns:
        (P(|g,1⟩)(t), 励起数 ⟨a†a + |e⟩⟨e|⟩(t))
    """
    o = _ops(p)
    h = build_jc(p).dense()
    energies, vectors = linalg.eigh(h)
    psi0 = basis_state(p.layout, (0, 1)).amplitudes
    coefficients = vectors.conj().T @ psi0
    g1 = 2  # |n=1, g⟩
    number = o.n + o.excited
    populations = []
    excitations = []
    for t in times:
        psi = vectors @ (np.exp(-1j * energies * t) * coefficients)
        populations.append(abs(psi[g1]) ** 2)
        excitations.append(float(np.vdot(psi, number @ psi).real))
    return np.array(populations), np.array(excitations)


class PulseGate(str, Enum):
    X_ROTATION = "x_rotation"
    Z_ROTATION = "z_rotation"
    ISWAP = "iswap"


class Subspace(str, Enum):
    SINGLE_EXCITATION = "single_excitation"
    FULL = "full"


def gate_time(which: PulseGate, p: PulseParams, angle: float = math.pi) -> float:
    """
    ゲート時間: x は angle/|Ω|、z は angle/|χ|、iSWAP は π/(2g).

    Raises:
        ParameterError: 対応するレートがゼロの場合
    """
    if which is PulseGate.ISWAP:
        if p.g == 0:
            raise ParameterError("g", "iSWAP time needs g > 0")
        return math.pi / (2 * p.g)
    rate = abs(p.rabi) if which is PulseGate.X_ROTATION else abs(p.chi)
    if rate == 0:
        raise ParameterError("rate", f"{which.value} rate is zero")
    return angle / rate


def ideal_rotation(which: PulseGate, angle: float, phase: float = 0.0) -> LinearOperator:
    """
    (|g⟩, |e⟩) 基底での理想回転.

    x: exp(−i·angle·(e^{iφ}σ⁺ + e^{−iφ}σ⁻)/2)、z: exp(−i·angle·σ^z/2)。
    """
    if which is PulseGate.X_ROTATION:
        generator = (
            np.exp(1j * phase) * QUBIT_SIGMA_PLUS + np.exp(-1j * phase) * QUBIT_SIGMA_MINUS
        ) / 2
    elif which is PulseGate.Z_ROTATION:
        generator = QUBIT_SIGMA_Z / 2
    else:
        raise ValueError("ideal_rotation covers x and z rotations only")
    return LinearOperator(linalg.expm(-1j * angle * generator))


def dressed_vacuum_basis(p: PulseParams) -> np.ndarray:
    """
    ε = 0 の H_RF における |g,0⟩ と、|e,0⟩ に最も近い 1 励起固有状態.

    Returns:
        (dim, 2) の列ベクトル（正の重なりに位相を揃える）
    """
    h = build_rotating(replace(p, epsilon=0.0)).dense()
    dim = h.shape[0]
    g0 = np.zeros(dim, dtype=complex)
    g0[0] = 1.0
    # 励起数 1 のブロック {|g,1⟩, |e,0⟩} を対角化する
    block_index = [2, 1]
    _, vectors = linalg.eigh(h[np.ix_(block_index, block_index)])
    column = int(np.argmax(np.abs(vectors[1, :])))
    v = vectors[:, column]
    v = v * np.exp(-1j * np.angle(v[1]))
    e0 = np.zeros(dim, dtype=complex)
    e0[block_index] = v
    return np.column_stack([g0, e0])


def _iswap_unitary(p: PulseParams, duration: float) -> np.ndarray:
    o = _ops(p)
    u = propagator(build_jc(p), duration)
    free = p.omega_r * o.n + (p.nu / 2) * o.sz
    u = propagator(-free, duration) @ u
    # 量子ビットの σ^z 共役で結合の符号を −i sinθ の規約にそろえる
    return o.sz @ u @ o.sz


def pulse_gate_fidelity(
    ideal: LinearOperator | np.ndarray,
    p: PulseParams,
    which: PulseGate,
    angle: float = math.pi,
    subspace: Subspace = Subspace.SINGLE_EXCITATION,
    duration: float | None = None,
) -> float:
    """
    物理的な発展と理想ゲートの重なり |tr(U_ideal† U)|/d.

    回転は H_RF を gate_time だけ発展させ、ε = 0 の着衣真空状態に射影して比べる。
    iSWAP は実験室系 JC 発展から自由発展を取り除き、
    {|g0⟩,|g1⟩,|e0⟩}（single_excitation）または {|g0⟩,|g1⟩,|e0⟩,|e1⟩}（full）で比べる。

    Args:
        ideal: 理想ゲート（回転は 2×2、iSWAP は {g0,g1,e0,e1} 基底の 4×4）
        p: パラメータ
        which: ゲートの種類
        angle: 回転角
        subspace: iSWAP の比較部分空間
        duration: 明示的な発展時間（省略時 gate_time）

    Raises:
        SubspaceMismatchError: ideal の次元が合わない場合
    """
    ideal_matrix = ideal.dense() if isinstance(ideal, LinearOperator) else np.asarray(ideal)
    if which is PulseGate.ISWAP:
        if ideal_matrix.shape != (4, 4):
            raise SubspaceMismatchError(4, ideal_matrix.shape[0])
        t = gate_time(which, p) if duration is None else duration
        u = _iswap_unitary(p, t)
        # {g0, g1, e0, e1} の全空間での添字
        index = [0, 2, 1, 3]
        if subspace is Subspace.SINGLE_EXCITATION:
            index = index[:3]
            ideal_matrix = ideal_matrix[:3, :3]
        block = u[np.ix_(index, index)]
    else:
        if ideal_matrix.shape != (2, 2):
            raise SubspaceMismatchError(2, ideal_matrix.shape[0])
        t = gate_time(which, p, angle) if duration is None else duration
        u = propagator(build_rotating(p), t)
        basis = dressed_vacuum_basis(p)
        block = basis.conj().T @ u @ basis
    d = ideal_matrix.shape[0]
    value = abs(np.trace(ideal_matrix.conj().T @ block)) / d
    return float(min(1.0, value))


def pi_pulse_time(p: PulseParams, points: int = 3001) -> float:
    """H_RF の下で |g,0⟩ から ⟨σ^z⟩ が最初の最小値をとる時刻（[0, 1.5 t_x] の格子上）."""
    o = _ops(p)
    t_x = gate_time(PulseGate.X_ROTATION, p)
    times = np.linspace(0.0, 1.5 * t_x, points)
    energies, vectors = linalg.eigh(build_rotating(p).dense())
    coefficients = vectors.conj().T @ basis_state(p.layout, (0, 0)).amplitudes
    psi = vectors @ (np.exp(-1j * np.outer(energies, times)) * coefficients[:, None])
    sigma_z = np.real(np.einsum("it,ij,jt->t", psi.conj(), o.sz, psi))
    return float(times[int(np.argmin(sigma_z))])


def dispersive_x_deviation(p: PulseParams, points: int = 401) -> float:
    """1 周期にわたる max|⟨σ^z⟩(t) + cos(Ωt)|（|g,0⟩ から H_RF で発展）."""
    o = _ops(p)
    rabi = abs(p.rabi)
    times = np.linspace(0.0, 2 * math.pi / rabi, points)
    energies, vectors = linalg.eigh(build_rotating(p).dense())
    coefficients = vectors.conj().T @ basis_state(p.layout, (0, 0)).amplitudes
    psi = vectors @ (np.exp(-1j * np.outer(energies, times)) * coefficients[:, None])
    sigma_z = np.real(np.einsum("it,ij,jt->t", psi.conj(), o.sz, psi))
    return float(np.max(np.abs(sigma_z + np.cos(rabi * times))))
