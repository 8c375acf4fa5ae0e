"""Concurrent pulse-fidelity sweeps over the dispersive ratio."""

from __future__ import annotations

import asyncio
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

from cqed_anyons.application.models import InvariantCheck, SweepPoint
from cqed_anyons.application.pulse import (
    ParameterError,
    PulseGate,
    PulseParams,
    ideal_rotation,
    pulse_gate_fidelity,
)
from cqed_anyons.infrastructure.logging import get_logger

logger = get_logger(__name__)

DEFAULT_RATIOS = (5.0, 10.0, 20.0, 50.0)
CONVERGENCE_TOLERANCE = 1e-8
CONVERGENCE_PADDING = 2
MONOTONE_TOLERANCE = 1e-9

# z 回転の Δ と Ω（g 単位）
Z_DETUNING_OVER_G = 0.5
Z_RABI_OVER_G = 0.05


@dataclass(frozen=True)
class SweepResult:
    """
    スイープの結果.

    Attributes:
        gate: 評価したゲート
        points: δ/g の指定順に並んだ各点
        refined: n_max + 2 での再計算（収束チェックを行った場合のみ）
        checks: 単調性・収束のチェック（いずれも soft）
    """

    gate: PulseGate
    points: list[SweepPoint]
    refined: list[SweepPoint] = field(default_factory=list)
    checks: list[InvariantCheck] = field(default_factory=list)

    def to_document(self) -> dict:
        """JSON 用の辞書表現."""
        document: dict = {
            "gate": self.gate.value,
            "points": [
                {"delta_over_g": p.delta_over_g, "n_max": p.n_max, "fidelity": p.fidelity}
                for p in self.points
            ],
        }
        if self.refined:
            document["refined"] = [
                {"delta_over_g": p.delta_over_g, "n_max": p.n_max, "fidelity": p.fidelity}
                for p in self.refined
            ]
        return document


def sweep_params(
    ratio: float,
    which: PulseGate,
    *,
    g: float = 1.0,
    omega_r: float = 60.0,
    n_max: int = 4,
) -> PulseParams:
    """
    δ/g = ratio の較正済みパラメータ.

    Raises:
        ParameterError: iSWAP など δ/g でスイープできないゲートの場合
    """
    if which is PulseGate.X_ROTATION:
        return PulseParams.for_x_rotation(ratio, g=g, omega_r=omega_r, n_max=n_max)
    if which is PulseGate.Z_ROTATION:
        return PulseParams.for_z_rotation(
            ratio,
            g=g,
            omega_r=omega_r,
            detuning=Z_DETUNING_OVER_G * g,
            rabi=Z_RABI_OVER_G * g,
            n_max=n_max,
        )
    raise ParameterError("gate", f"{which.value} cannot be swept over delta/g")


def sweep_point(
    ratio: float,
    which: PulseGate,
    *,
    g: float = 1.0,
    omega_r: float = 60.0,
    n_max: int = 4,
    angle: float = math.pi,
) -> SweepPoint:
    """1 点分の忠実度を計算する."""
    p = sweep_params(ratio, which, g=g, omega_r=omega_r, n_max=n_max)
    value = pulse_gate_fidelity(ideal_rotation(which, angle), p, which, angle)
    return SweepPoint(delta_over_g=float(ratio), n_max=n_max, fidelity=value)


async def _gather_points(
    ratios: Sequence[float],
    which: PulseGate,
    g: float,
    omega_r: float,
    n_max: int,
    angle: float,
) -> list[SweepPoint]:
    tasks = [
        asyncio.to_thread(
            sweep_point, ratio, which, g=g, omega_r=omega_r, n_max=n_max, angle=angle
        )
        for ratio in ratios
    ]
    return list(await asyncio.gather(*tasks))


def monotone_check(points: Sequence[SweepPoint]) -> InvariantCheck:
    """δ/g について忠実度が単調非減少かを調べる."""
    ordered = sorted(points, key=lambda p: p.delta_over_g)
    drops = [
        (a.delta_over_g, b.delta_over_g)
        for a, b in zip(ordered, ordered[1:], strict=False)
        if b.fidelity < a.fidelity - MONOTONE_TOLERANCE
    ]
    detail = "" if not drops else f"fidelity drops between delta/g pairs {drops}"
    return InvariantCheck("fidelity monotone in delta/g", not drops, detail, soft=True)


def convergence_check(
    points: Sequence[SweepPoint],
    refined: Sequence[SweepPoint],
) -> InvariantCheck:
    """打ち切りを n_max + 2 に広げた結果との差を調べる."""
    worst = 0.0
    worst_ratio = None
    for coarse, fine in zip(points, refined, strict=True):
        diff = abs(coarse.fidelity - fine.fidelity)
        if diff > CONVERGENCE_TOLERANCE:
            logger.warning(
                "Truncation not converged",
                delta_over_g=coarse.delta_over_g,
                n_max=coarse.n_max,
                refined_n_max=fine.n_max,
                difference=diff,
            )
        if diff > worst:
            worst, worst_ratio = diff, coarse.delta_over_g
    passed = worst <= CONVERGENCE_TOLERANCE
    detail = f"max |F(n_max) - F(n_max+{CONVERGENCE_PADDING})| = {worst:.3e}"
    if not passed:
        detail += f" at delta/g = {worst_ratio}"
    return InvariantCheck("truncation convergence", passed, detail, soft=True)


async def run_sweep(
    ratios: Sequence[float] = DEFAULT_RATIOS,
    which: PulseGate = PulseGate.X_ROTATION,
    *,
    g: float = 1.0,
    omega_r: float = 60.0,
    n_max: int = 4,
    angle: float = math.pi,
    check_convergence: bool = False,
) -> SweepResult:
    """
    δ/g の各値で忠実度を並行に計算する.

    各点はスレッドで独立に計算し、結果は ratios の順に並べる。

    Args:
        ratios: δ/g の値
        which: x_rotation または z_rotation
        g: 結合
        omega_r: キャビティ周波数
        n_max: Fock 打ち切り
        angle: 回転角
        check_convergence: n_max + 2 でも計算して差を調べるか

    Returns:
        スイープの結果

    Raises:
        ParameterError: スイープできないゲートの場合
    """
    if which is PulseGate.ISWAP:
        raise ParameterError("gate", "iswap cannot be swept over delta/g")
    points = await _gather_points(ratios, which, g, omega_r, n_max, angle)
    checks = [monotone_check(points)]
    refined: list[SweepPoint] = []
    if check_convergence:
        refined = await _gather_points(
            ratios, which, g, omega_r, n_max + CONVERGENCE_PADDING, angle
        )
        checks.append(convergence_check(points, refined))
    logger.info(
        "Sweep finished",
        gate=which.value,
        ratios=list(ratios),
        fidelities=[p.fidelity for p in points],
        n_max=n_max,
    )
    return SweepResult(gate=which, points=points, refined=refined, checks=checks)
