"""Tests for the stabilizer tableau oracle."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from cqed_anyons.application.gates import (
    RESET_STATES,
    Circuit,
    controlled_x_on_spin,
    controlled_z_on_spin,
    hadamard,
    ideal_gate_library,
    pauli_x,
    u_c,
)
from cqed_anyons.application.hilbert import (
    MeasurementPolicy,
    SubsystemLayout,
    apply,
    product_state,
)
from cqed_anyons.application.models import PhysicsInvariantError
from cqed_anyons.application.oracle import (
    MAX_STATEVECTOR_QUBITS,
    PauliString,
    StabilizerTableau,
    TableauError,
    apply_pauli_vector,
    gf2_nullspace,
    gf2_rank,
    reset_qubit,
    run_circuit,
    stabilizer_fidelity,
    tableau_to_statevector,
)


def _bell_tableau() -> StabilizerTableau:
    """(|00⟩ + |11⟩)/√2 のタブロー."""
    tab = StabilizerTableau.zero_state(2).apply_clifford(hadamard(), [0])
    return tab.apply_clifford(controlled_x_on_spin(), [0, 1]).apply_clifford(pauli_x(), [0])


class TestPauliString:
    """PauliString のテスト."""

    def test_label_round_trip(self) -> None:
        """ラベルから生成した文字列のラベルが一致することを確認する."""
        assert PauliString.from_label("-XYZI").label() == "-XYZI"
        assert PauliString.from_label("ZZ").label() == "+ZZ"

    def test_invalid_label(self) -> None:
        """不正な文字で TableauError になることを確認する."""
        with pytest.raises(TableauError):
            PauliString.from_label("XQ")

    def test_product_of_commuting(self) -> None:
        """XX·ZZ = −YY を確認する."""
        product = PauliString.from_label("XX") * PauliString.from_label("ZZ")
        assert product.label() == "-YY"

    def test_product_matches_matrices(self) -> None:
        """可換な積の符号が行列積と一致することを確認する."""
        labels = ["".join(p) for p in itertools.product("IXYZ", repeat=2)]
        for a, b in itertools.product(labels, repeat=2):
            pa, pb = PauliString.from_label(a), PauliString.from_label(b)
            if not pa.commutes_with(pb):
                continue
            np.testing.assert_allclose((pa * pb).matrix(), pa.matrix() @ pb.matrix(), atol=1e-15)

    def test_anticommuting_product_rejected(self) -> None:
        """反可換な積が拒否されることを確認する."""
        with pytest.raises(TableauError):
            PauliString.from_label("X") * PauliString.from_label("Z")

    def test_support_and_type(self) -> None:
        """台と X 型・Z 型の判定を確認する."""
        p = PauliString.from_support(5, "X", [0, 3])
        assert p.support == (0, 3)
        assert p.is_x_type
        assert not p.is_z_type

    def test_apply_pauli_vector_matches_matrix(self) -> None:
        """ビット演算での作用が密行列と一致することを確認する."""
        rng = np.random.default_rng(3)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        for label in ("XYZ", "-ZIY", "YYX"):
            p = PauliString.from_label(label)
            np.testing.assert_allclose(apply_pauli_vector(p, psi), p.matrix() @ psi, atol=1e-12)


class TestGf2:
    """GF(2) 線形代数のテスト."""

    def test_rank(self) -> None:
        """GF(2) での階数が実数の階数と異なる例を確認する."""
        m = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])
        assert gf2_rank(m) == 2

    def test_nullspace(self) -> None:
        """零空間の基底が M v = 0 を満たすことを確認する."""
        m = np.array([[1, 1, 0, 0], [0, 1, 1, 0]])
        basis = gf2_nullspace(m)
        assert basis.shape == (2, 4)
        assert not np.any((m @ basis.T) % 2)


class TestStabilizerTableau:
    """StabilizerTableau のテスト."""

    def test_zero_state_expectations(self) -> None:
        """|00⟩ の ⟨ZI⟩ = +1、⟨XI⟩ = 0 を確認する."""
        tab = StabilizerTableau.zero_state(2)
        assert tab.expectation(PauliString.from_label("ZI")) == 1
        assert tab.expectation(PauliString.from_label("-IZ")) == -1
        assert tab.expectation(PauliString.from_label("XI")) == 0

    def test_product_state_labels(self) -> None:
        """'one' / 'minus' の符号が正しいことを確認する."""
        tab = StabilizerTableau.product_state(["one", "minus", "plus"])
        assert tab.expectation(PauliString.from_label("ZII")) == -1
        assert tab.expectation(PauliString.from_label("IXI")) == -1
        assert tab.expectation(PauliString.from_label("IIX")) == 1

    def test_bell_state(self) -> None:
        """Bell 状態の XX, ZZ, YY の期待値を確認する."""
        tab = _bell_tableau()
        assert tab.expectation(PauliString.from_label("XX")) == 1
        assert tab.expectation(PauliString.from_label("ZZ")) == 1
        assert tab.expectation(PauliString.from_label("YY")) == -1
        tab.validate()

    def test_operations_do_not_mutate(self) -> None:
        """ゲート適用で元のタブローが変わらないことを確認する."""
        tab = StabilizerTableau.zero_state(1)
        tab.apply_clifford(hadamard(), [0])
        assert tab.expectation(PauliString.from_label("Z")) == 1

    def test_gate_action_matches_statevector(self) -> None:
        """全ゲート・全積状態でタブローと状態ベクトルが一致することを確認する."""
        for gate in ideal_gate_library():
            n = gate.arity
            layout = SubsystemLayout.spins(n)
            for labels in itertools.product(RESET_STATES, repeat=n):
                state = product_state(layout, [RESET_STATES[label] for label in labels])
                dense = apply(gate.matrix, list(range(n)), state)
                tab = StabilizerTableau.product_state(labels).apply_clifford(gate, range(n))
                assert stabilizer_fidelity(tab, dense) == pytest.approx(1.0), (gate.name, labels)

    def test_measure_random_outcome(self) -> None:
        """|0⟩ の X 測定が非決定的で、事後選択した結果になることを確認する."""
        tab = StabilizerTableau.zero_state(1)
        m = tab.measure_pauli(PauliString.from_label("X"), outcome=-1)
        assert not m.deterministic
        assert m.probability == 0.5
        assert m.tableau.expectation(PauliString.from_label("X")) == -1

    def test_measure_signed_observable(self) -> None:
        """符号付き観測量 −X の結果 +1 が X = −1 に対応することを確認する."""
        tab = StabilizerTableau.zero_state(1)
        m = tab.measure_pauli(PauliString.from_label("-X"), outcome=1)
        assert m.tableau.expectation(PauliString.from_label("X")) == -1

    def test_impossible_postselection(self) -> None:
        """確定した結果と逆を事後選択すると TableauError になることを確認する."""
        tab = StabilizerTableau.product_state(["plus"])
        with pytest.raises(TableauError):
            tab.measure_pauli(PauliString.from_label("X"), outcome=-1)

    def test_validate_after_measurement(self) -> None:
        """測定後もタブローの不変条件が保たれることを確認する."""
        tab = _bell_tableau()
        tab.measure_pauli(PauliString.from_label("XI"), outcome=1).tableau.validate()

    def test_validate_detects_broken_pairing(self) -> None:
        """壊れたタブローで TableauError になることを確認する."""
        tab = StabilizerTableau.zero_state(2)
        tab.z[2] = tab.z[3]
        with pytest.raises(TableauError):
            tab.validate()

    def test_permute_qubits(self) -> None:
        """量子ビットの並べ替えが期待値の並べ替えになることを確認する."""
        tab = StabilizerTableau.product_state(["zero", "plus"]).permute_qubits([1, 0])
        assert tab.expectation(PauliString.from_label("XZ")) == 1

    def test_canonical_generators_bell(self) -> None:
        """Bell 状態の標準生成元が XX と ZZ になることを確認する."""
        css = _bell_tableau().canonical_generators([0, 1])
        assert css.is_css
        assert [p.label() for p in css.x_type] == ["+XX"]
        assert [p.label() for p in css.z_type] == ["+ZZ"]

    def test_subgroup_on_entangled_qubit_is_empty(self) -> None:
        """絡み合った量子ビット単独の部分群が空であることを確認する."""
        assert _bell_tableau().subgroup_on([0]) == []

    def test_to_text(self) -> None:
        """テキスト形式が 1 行 1 生成元であることを確認する."""
        assert StabilizerTableau.product_state(["zero", "minus"]).to_text() == "+ZI\n-IX\n"


class TestConversions:
    """状態ベクトル変換と回路実行のテスト."""

    def test_tableau_to_statevector_bell(self) -> None:
        """Bell 状態の展開が (|00⟩ + |11⟩)/√2 になることを確認する."""
        psi = tableau_to_statevector(_bell_tableau()).amplitudes
        expected = np.array([1, 0, 0, 1]) / np.sqrt(2)
        assert abs(np.vdot(expected, psi)) == pytest.approx(1.0)

    def test_statevector_size_limit(self) -> None:
        """大きすぎるタブローの展開が拒否されることを確認する."""
        with pytest.raises(TableauError):
            tableau_to_statevector(StabilizerTableau.zero_state(MAX_STATEVECTOR_QUBITS + 1))

    def test_run_circuit_matches_statevector(self) -> None:
        """測定を含む回路のタブロー実行が状態ベクトル実行と一致することを確認する."""
        layout = SubsystemLayout.gate_level(2)
        circuit = (
            Circuit(layout)
            .gate(u_c(), 0, 1)
            .gate(u_c(), 0, 2)
            .measure_x(0, MeasurementPolicy.POSTSELECT_PLUS)
        )
        labels = ["plus", "plus", "plus"]
        state = product_state(layout, [RESET_STATES[label] for label in labels])
        tab, measurements = run_circuit(circuit, StabilizerTableau.product_state(labels))
        assert measurements[0].outcome == 1
        assert stabilizer_fidelity(tab, circuit.run(state).state) == pytest.approx(1.0)

    def test_reset_qubit(self) -> None:
        """積状態の量子ビットを |−⟩ にリセットできることを確認する."""
        tab = reset_qubit(StabilizerTableau.product_state(["zero", "plus"]), 0, "minus")
        assert tab.expectation(PauliString.from_label("XI")) == -1
        assert tab.expectation(PauliString.from_label("IX")) == 1

    def test_reset_entangled_rejected(self) -> None:
        """絡み合った量子ビットのリセットが拒否されることを確認する."""
        with pytest.raises(PhysicsInvariantError):
            reset_qubit(_bell_tableau(), 0, "zero")

    def test_reset_flips_deterministic_value(self) -> None:
        """|1⟩ を |0⟩ にリセットすると ⟨Z⟩ が反転することを確認する."""
        tab = reset_qubit(StabilizerTableau.product_state(["one"]), 0, "zero")
        assert tab.expectation(PauliString.from_label("Z")) == 1

    def test_controlled_z_entangles(self) -> None:
        """|++⟩ に U_z を作用させると局所 X の期待値が消えることを確認する."""
        tab = StabilizerTableau.product_state(["plus", "plus"]).apply_clifford(
            controlled_z_on_spin(), [0, 1]
        )
        assert tab.expectation(PauliString.from_label("IX")) == 0
