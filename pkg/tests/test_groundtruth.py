import numpy as np
import pytest

from vqnhe_lab.groundtruth import cached_ground_state, ground_state
from vqnhe_lab.pauli import build_tfim, exact_expectation
from vqnhe_lab.simulator import StateVector

from conftest import kron_matrix


def test_tfim_n2_h1():
    M = -kron_matrix("ZZ") - kron_matrix("XI") - kron_matrix("IX")
    gs = ground_state(build_tfim(2, 1.0))
    assert gs.E_gs == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-12)
    assert gs.E_gs == pytest.approx(-np.sqrt(5), abs=1e-12)
    assert gs.residual <= 1e-8
    assert gs.distribution.sum() == pytest.approx(1.0)


def test_classical_ising_degenerate():
    gs = ground_state(build_tfim(2, 0.0))
    assert gs.E_gs == pytest.approx(-1.0)
    assert gs.degeneracy_gap == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10])
def test_dense_and_lanczos_agree(n):
    H = build_tfim(n, 1.0)
    a, b = ground_state(H, "dense"), ground_state(H, "lanczos")
    assert a.E_gs == pytest.approx(b.E_gs, abs=1e-8)
    assert b.residual <= 1e-8
    assert abs(np.vdot(a.ground_state.amps, b.ground_state.amps)) == pytest.approx(1.0, abs=1e-6)


def test_n12_lanczos_residual():
    gs = ground_state(build_tfim(12, 1.0))
    assert gs.method == "lanczos" and gs.residual <= 1e-8
    # open-chain energies per site approach -4/pi from above
    assert -4 / np.pi * 12 < gs.E_gs < -4 / np.pi * 12 + 1.0


def test_rayleigh_ritz_on_random_states(rng):
    H = build_tfim(5, 1.0)
    e_gs = cached_ground_state(H).E_gs
    for _ in range(1000):
        assert exact_expectation(H, StateVector.random(5, rng)) >= e_gs - 1e-9


def test_limits_and_serialization():
    with pytest.raises(ValueError):
        ground_state(build_tfim(11, 1.0), "dense")
    with pytest.raises(ValueError):
        ground_state(build_tfim(3, 1.0), "qr")
    with pytest.raises(ValueError):
        ground_state(build_tfim(15, 1.0))
    d = ground_state(build_tfim(3, 1.0)).to_dict()
    assert len(d["ground_state_real"]) == 8
    assert cached_ground_state(build_tfim(3, 1.0)) is cached_ground_state(build_tfim(3, 1.0))
