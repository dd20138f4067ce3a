import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqnhe_lab.estimators import dnp_empirical_energy, uvqnhe_empirical_energy
from vqnhe_lab.measurement import (IMAG, REAL, Dataset, collect_samples, outcome_maps, pair_map,
                                   plan_measurement, star_collapse, star_sign)
from vqnhe_lab.pauli import Hamiltonian, PauliString, build_tfim
from vqnhe_lab.simulator import SampleSet, StateVector

from conftest import kron_matrix, random_pauli, random_state


def test_direct_plan_for_diagonal_term():
    plan = plan_measurement(PauliString("ZZ"))
    assert plan.direct and plan.star is None and len(plan.circuit_suffix) == 0
    assert plan.tag == "ansatz"


def test_single_x_plan():
    plan = plan_measurement(PauliString("X"))
    assert plan.star == 0
    assert [(g.kind, g.targets) for g in plan.circuit_suffix.gates] == [("H", (0,))]


def test_xyz_plan_structure():
    plan = plan_measurement(PauliString("XYZ"))
    assert plan.star == 0
    assert [(g.kind, g.targets) for g in plan.circuit_suffix.gates] == [("CY", (0, 1)), ("H", (0,))]
    imag = plan_measurement(PauliString("XYZ"), IMAG)
    assert [g.kind for g in imag.circuit_suffix.gates] == ["CY", "S", "H"]
    y_star = plan_measurement(PauliString("ZYX"))
    assert y_star.star == 1
    last = y_star.circuit_suffix.gates[-1]
    assert last.kind == "RX" and last.angle == pytest.approx(np.pi / 2)
    with pytest.raises(ValueError):
        plan_measurement(PauliString("X"), "complex")


@pytest.mark.parametrize("P,s,expect", [("XYZ", "011", "101"), ("ZZZ", "010", "010"), ("XX", "00", "11")])
def test_pair_map(P, s, expect):
    assert pair_map(PauliString(P), s) == expect


@pytest.mark.parametrize("s,star,expect", [("101", 0, "001"), ("001", 0, "001"), ("111", 2, "110")])
def test_star_collapse(s, star, expect):
    assert star_collapse(s, star) == expect


@pytest.mark.parametrize("s,star,expect", [("000", 0, 1), ("100", 0, -1), ("101", 2, -1)])
def test_star_sign(s, star, expect):
    assert star_sign(s, star) == expect


def test_string_helpers_validate():
    with pytest.raises(ValueError):
        pair_map(PauliString("XX"), "0")
    with pytest.raises(ValueError):
        star_collapse("01", 2)
    with pytest.raises(ValueError):
        star_sign("01", -1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(st.text("IXYZ", min_size=n, max_size=n),
                                                     st.integers(0, (1 << n) - 1))))
def test_pair_map_involution(arg):
    letters, idx = arg
    P = PauliString(letters)
    s = format(idx, f"0{P.n}b")
    assert pair_map(P, pair_map(P, s)) == s


def test_outcome_maps_match_string_helpers():
    P = PauliString("ZXYX")
    m = outcome_maps(P)
    for i in range(16):
        s = format(i, "04b")
        left = star_collapse(s, 1)
        assert format(m.left[i], "04b") == left
        assert format(m.right[i], "04b") == pair_map(P, left)
        zpar = (-1) ** int(s[0])
        assert m.sign[i] == star_sign(s, 1) * zpar


def _single_term(P, v, f):
    """DNP ratio estimator for a lone term, exact-probability inputs."""
    ds = collect_samples(StateVector(P.n, v), [P])
    return dnp_empirical_energy(ds.ansatz, ds.real, f, Hamiltonian(P.n, [(1.0, P)])).value


@pytest.mark.parametrize("n", [2, 3, 4])
def test_oracle_equivalence_unit_weights(n, rng):
    for _ in range(15):
        P = random_pauli(n, rng, allow_identity=False)
        v = random_state(n, rng)
        expect = np.vdot(v, kron_matrix(P.letters) @ v).real
        assert _single_term(P, v, np.ones(1 << n)) == pytest.approx(expect, abs=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_oracle_equivalence_positive_weights(n, rng):
    for _ in range(15):
        P = random_pauli(n, rng, allow_identity=False)
        v = random_state(n, rng)
        F = rng.uniform(0.2, 3.0, size=1 << n)
        w = F * v
        expect = np.vdot(w, kron_matrix(P.letters) @ w).real / np.vdot(w, w).real
        assert _single_term(P, v, F) == pytest.approx(expect, abs=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_imag_variant_oracle_equivalence(n, rng):
    for _ in range(15):
        P = random_pauli(n, rng, allow_identity=False)
        v = random_state(n, rng)
        G = rng.uniform(-np.pi, np.pi, size=1 << n)
        ds = collect_samples(StateVector(n, v), [P], imag=True)
        H = Hamiltonian(n, [(1.0, P)])
        got = uvqnhe_empirical_energy(ds.real, ds.imag, G, H, ds.ansatz).value
        w = np.exp(1j * G) * v
        assert got == pytest.approx(np.vdot(w, kron_matrix(P.letters) @ w).real, abs=1e-10)


def test_collect_samples_shot_mode_and_serialization():
    H = build_tfim(3, 1.0)
    v = StateVector.random(3, np.random.default_rng(0))
    ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=200, shots_term=300, seed=4, imag=True)
    assert ds.ansatz.shots == 200
    assert set(p.letters for p in ds.real) == {"XII", "IXI", "IIX"}
    assert all(s.shots == 300 for s in ds.all_sets()[1:])
    again = collect_samples(v, [p for _, p in H.terms], shots_ansatz=200, shots_term=300, seed=4, imag=True)
    np.testing.assert_array_equal(ds.real[PauliString("IXI")].counts, again.real[PauliString("IXI")].counts)
    back = Dataset.from_dict(ds.to_dict())
    assert not back.is_exact and back.n == 3
    np.testing.assert_array_equal(back.imag[PauliString("XII")].counts, ds.imag[PauliString("XII")].counts)
    assert isinstance(back.ansatz, SampleSet)
    assert collect_samples(v, [p for _, p in H.terms]).is_exact
