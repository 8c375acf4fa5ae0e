"""Tests for ground-state preparation on the minimal toric code."""

from __future__ import annotations

import numpy as np
import pytest

from cqed_anyons.application.hilbert import (
    KET_0,
    MeasurementPolicy,
    SubsystemLayout,
    product_state,
    reduced_cavity_state,
)
from cqed_anyons.application.models import PhysicsInvariantError
from cqed_anyons.application.toric import (
    DEFAULT_FRAME,
    DEFAULT_PERMUTATION,
    LOOP_CHECK,
    LabelingCandidate,
    MinimalLattice,
    PreparedState,
    conditional_excitation,
    create_e_pair,
    expected_defect_counts,
    ground_state_checks,
    measured_defect_counts,
    preparation_circuit,
    prepare_ground_state,
    require_ground_state,
    search_labelings,
    stabilizer_expectations,
)

MISCALIBRATED = "6,2,3,4,5,1"

# 既定配置の標準生成元（既約形）
GOLDEN_X_TYPE = ["+XXIIXI", "+IIXIXI", "+IIIXXI", "+IIIIIX"]
GOLDEN_Z_TYPE = ["+ZIZZZI", "+IZZZZI"]


@pytest.fixture(scope="module")
def prepared() -> PreparedState:
    """既定配置で準備した基底状態."""
    return prepare_ground_state()


class TestMinimalLattice:
    """MinimalLattice のテスト."""

    def test_default_labeling(self) -> None:
        """既定の配置が恒等置換であることを確認する."""
        lattice = MinimalLattice.from_labeling(None)
        assert lattice.permutation == DEFAULT_PERMUTATION
        assert lattice.labeling_text() == "1,2,3,4,5,6"

    def test_from_text(self) -> None:
        """カンマ区切りの配置を読めることを確認する."""
        lattice = MinimalLattice.from_labeling(MISCALIBRATED)
        assert lattice.spin(1) == 6
        assert lattice.spin(6) == 1

    @pytest.mark.parametrize("labeling", ["1,2,3", "1,1,2,3,4,5", "0,1,2,3,4,5"])
    def test_invalid_labeling(self, labeling: str) -> None:
        """置換でない配置が拒否されることを確認する."""
        with pytest.raises(ValueError):
            MinimalLattice.from_labeling(labeling)

    def test_invalid_frame(self) -> None:
        """範囲外の枠が拒否されることを確認する."""
        with pytest.raises(ValueError):
            MinimalLattice(frame=frozenset({7}))

    def test_invalid_support(self) -> None:
        """2 スピンの台が拒否されることを確認する."""
        with pytest.raises(ValueError):
            MinimalLattice(x_supports=((1, 2),))


class TestPreparation:
    """prepare_ground_state のテスト."""

    def test_circuit_shape(self) -> None:
        """準備回路が U^c 7 回・測定 1 回・Hadamard 4 回であることを確認する."""
        circuit = preparation_circuit(MinimalLattice())
        assert len(circuit.to_text().splitlines()) == 12

    def test_all_checks_pass(self, prepared: PreparedState) -> None:
        """既定配置で全ての基底状態チェックが通ることを確認する."""
        checks = ground_state_checks(prepared)
        assert [c.name for c in checks if not c.passed] == []
        require_ground_state(prepared)

    def test_postselected_outcome(self, prepared: PreparedState) -> None:
        """キャビティ X 測定が 50/50 で、事後選択した結果が +1 であることを確認する."""
        assert prepared.outcome == 1
        assert prepared.probability == pytest.approx(0.5, abs=1e-12)

    def test_generators_are_css(self, prepared: PreparedState) -> None:
        """6 個の独立な生成元が X 型 4 個と Z 型 2 個に分かれることを確認する."""
        assert len(prepared.generators) == 6
        assert prepared.css.is_css
        assert len(prepared.css.x_type) == 4
        assert len(prepared.css.z_type) == 2

    def test_canonical_generators_match_golden(self, prepared: PreparedState) -> None:
        """X 型・Z 型の既約生成元が固定した表と一致することを確認する."""
        assert [p.label() for p in prepared.css.x_type] == GOLDEN_X_TYPE
        assert [p.label() for p in prepared.css.z_type] == GOLDEN_Z_TYPE

    def test_statevector_expectations(self, prepared: PreparedState) -> None:
        """宣言された演算子の状態ベクトル上の期待値が +1 であることを確認する."""
        lattice = prepared.lattice
        values = stabilizer_expectations(prepared.state, lattice.x_operators + lattice.z_operators)
        np.testing.assert_allclose(values, 1.0, atol=1e-9)

    def test_statevector_matches_tableau(self, prepared: PreparedState) -> None:
        """全ステップで状態ベクトルとタブローが一致することを確認する."""
        assert prepared.min_fidelity >= 1 - 1e-9

    def test_document(self, prepared: PreparedState) -> None:
        """JSON 用の辞書に配置・枠・生成元・回路が含まれることを確認する."""
        doc = prepared.to_document()
        assert doc["labeling"] == "1,2,3,4,5,6"
        assert doc["frame"] == [2, 3, 5, 6]
        assert len(doc["generators"]) == 6
        assert len(doc["transcript"]) == 12
        assert "other_branch_generators" not in doc

    def test_both_branches_records_other_branch(self) -> None:
        """both_branches で +1 分岐を採用し、−1 分岐ではループ X₃X₅X₆ の符号が反転することを確認する."""
        result = prepare_ground_state(policy=MeasurementPolicy.BOTH_BRANCHES)
        assert result.outcome == 1
        assert result.probability == pytest.approx(0.5, abs=1e-12)
        assert result.other_branch is not None
        labels = [p.label() for p in result.other_branch]
        assert len(labels) == 6
        assert "-IIXIXX" in labels
        assert "+IIXIXX" not in labels
        assert "other_branch_generators" in result.to_document()

    def test_miscalibrated_labeling_fails_loop_check(self) -> None:
        """誤った配置でループ安定化子のチェックが最初に失敗することを確認する."""
        result = prepare_ground_state(MinimalLattice.from_labeling(MISCALIBRATED))
        checks = ground_state_checks(result)
        assert checks[0].name == LOOP_CHECK
        assert not checks[0].passed
        with pytest.raises(PhysicsInvariantError) as exc_info:
            require_ground_state(result)
        assert exc_info.value.name == LOOP_CHECK


class TestDefects:
    """欠陥の生成と数え上げのテスト."""

    def test_expected_counts(self) -> None:
        """宣言された台から数えた反転数を確認する."""
        counts = expected_defect_counts(MinimalLattice())
        assert counts.electric == {1: 2, 2: 2, 3: 3, 4: 1, 5: 2, 6: 3}
        assert counts.magnetic == {1: 1, 2: 1, 3: 2, 4: 2, 5: 2, 6: 0}

    def test_measured_counts_match(self, prepared: PreparedState) -> None:
        """状態ベクトル上の反転数が宣言から数えた値と一致することを確認する."""
        assert measured_defect_counts(prepared) == expected_defect_counts(prepared.lattice)

    def test_e_pair_flips_loop(self, prepared: PreparedState) -> None:
        """スピン 3 の σ_z でループ X₃X₅X₆ が −1 になることを確認する."""
        excited = create_e_pair(prepared.state, 3)
        (value,) = stabilizer_expectations(excited, ["+IIXIXX"])
        assert value == pytest.approx(-1.0)

    def test_conditional_excitation_mixes_cavity(self, prepared: PreparedState) -> None:
        """|+⟩ のキャビティで条件付き励起するとキャビティが最大混合になることを確認する."""
        excited = conditional_excitation(prepared.full_state, 3, "electric", require_plus=True)
        np.testing.assert_allclose(reduced_cavity_state(excited), np.eye(2) / 2, atol=1e-12)

    def test_conditional_excitation_requires_plus(self) -> None:
        """キャビティが |+⟩ でないと PhysicsInvariantError になることを確認する."""
        state = product_state(SubsystemLayout.gate_level(1), [KET_0, KET_0])
        with pytest.raises(PhysicsInvariantError):
            conditional_excitation(state, 1, "magnetic", require_plus=True)

    def test_conditional_excitation_unknown_kind(self, prepared: PreparedState) -> None:
        """不明な種類が拒否されることを確認する."""
        with pytest.raises(ValueError):
            conditional_excitation(prepared.full_state, 1, "dyonic")


class TestLabelingSearch:
    """search_labelings のテスト."""

    def test_default_labeling_found(self) -> None:
        """既定の枠で既定の配置が見つかり、誤った配置が除外されることを確認する."""
        found = search_labelings(frames=[DEFAULT_FRAME])
        assert LabelingCandidate(DEFAULT_PERMUTATION, DEFAULT_FRAME) in found
        permutations = {c.permutation for c in found}
        assert tuple(int(v) for v in MISCALIBRATED.split(",")) not in permutations

    def test_literal_circuit_has_no_x_type_labeling(self) -> None:
        """Hadamard 枠なしではどの配置も X 型演算子を満たさないことを確認する."""
        assert search_labelings(frames=[frozenset()]) == []
