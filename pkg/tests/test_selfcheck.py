"""Tests for the invariant suite."""

from __future__ import annotations

import pytest

from cqed_anyons.application.selfcheck import (
    clifford_table_checks,
    controlled_x_check,
    gate_unitarity_check,
    loop_identity_check,
    run_selfcheck,
    u_c_composition_check,
    vacuum_rabi_check,
)
from cqed_anyons.application.toric import LOOP_CHECK, MinimalLattice


class TestIndividualChecks:
    """個別チェックのテスト."""

    def test_gate_checks_pass(self) -> None:
        """ゲートに関するチェックが通ることを確認する."""
        for check in (gate_unitarity_check(), u_c_composition_check(), controlled_x_check()):
            assert check.passed, check.name

    def test_clifford_tables(self) -> None:
        """Pauli 共役表とタブローのチェックが通ることを確認する."""
        checks = clifford_table_checks()
        assert len(checks) == 2
        assert all(c.passed for c in checks)

    def test_loop_identity(self) -> None:
        """キャビティ |0⟩ 分岐の積がループ演算子に一致することを確認する."""
        assert loop_identity_check().passed

    def test_vacuum_rabi(self) -> None:
        """真空 Rabi 振動のチェックが通ることを確認する."""
        assert vacuum_rabi_check().passed


class TestRunSelfcheck:
    """run_selfcheck のテスト."""

    @pytest.mark.asyncio
    async def test_default_lattice_passes(self) -> None:
        """既定配置で全チェックが通ることを確認する."""
        checks = await run_selfcheck()
        assert [c.name for c in checks if not c.passed] == []
        names = [c.name for c in checks]
        for name in ("braiding phase", "control run phase", "halted run mixedness"):
            assert name in names
        assert names[-1] == "vacuum Rabi oscillation"

    @pytest.mark.asyncio
    async def test_order_is_stable(self) -> None:
        """同じシードで同じ順序・結果になることを確認する."""
        first = await run_selfcheck(seed=3)
        second = await run_selfcheck(seed=3)
        assert first == second

    @pytest.mark.asyncio
    async def test_miscalibrated_labeling(self) -> None:
        """誤った配置でループ安定化子が最初の必須失敗となり、干渉計が省略されることを確認する."""
        checks = await run_selfcheck(MinimalLattice.from_labeling("6,2,3,4,5,1"))
        hard_failures = [c for c in checks if not c.passed and not c.soft]
        assert hard_failures[0].name == LOOP_CHECK
        skipped = [c for c in checks if c.name == "interferometry variants"]
        assert len(skipped) == 1
        assert not skipped[0].passed
