import numpy as np
import pytest

from vqnhe_lab.estimators import (DegenerateDenominatorError, MissingSamplesError, dnp_empirical_energy,
                                  dnp_exact_energy, dnp_loss_gradient, dnp_weight_gradient,
                                  uvqnhe_empirical_energy, uvqnhe_exact_energy, uvqnhe_loss_gradient,
                                  uvqnhe_phase_gradient, vqe_energy)
from vqnhe_lab.groundtruth import ground_state
from vqnhe_lab.measurement import collect_samples
from vqnhe_lab.neural import NeuralNet
from vqnhe_lab.pauli import Hamiltonian, PauliString, build_tfim, exact_expectation
from vqnhe_lab.simulator import SampleSet, StateVector, rng_stream

from conftest import random_hamiltonian, random_state


def _exact(n, rng, H=None, imag=False):
    v = StateVector(n, random_state(n, rng))
    H = H if H is not None else random_hamiltonian(n, rng)
    return v, H, collect_samples(v, [p for _, p in H.terms], imag=imag)


def test_vqe_energy_examples():
    H = Hamiltonian(1, [(1.0, "Z")])
    ss = SampleSet.from_dict(1, {"0": 60, "1": 40})
    assert vqe_energy({}, H, ss).value == pytest.approx(0.2)
    plus = StateVector(1, [2**-0.5, 2**-0.5])
    Hx = Hamiltonian(1, [(1.0, "X")])
    ds = collect_samples(plus, [PauliString("X")])
    assert vqe_energy(ds.real, Hx).value == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(MissingSamplesError):
        vqe_energy({}, Hx)


def test_vqe_energy_exact_mode(rng):
    v, H, ds = _exact(3, rng)
    assert vqe_energy(ds.real, H, ds.ansatz).value == pytest.approx(exact_expectation(H, v), abs=1e-10)


def test_identity_term_added_exactly(rng):
    v, H, ds = _exact(3, rng)
    H2 = H + Hamiltonian(3, [(2.5, "III")])
    e1 = dnp_empirical_energy(ds.ansatz, ds.real, np.ones(8), H).value
    e2 = dnp_empirical_energy(ds.ansatz, ds.real, np.ones(8), H2).value
    assert e2 - e1 == pytest.approx(2.5, abs=1e-12)


def test_dnp_exact_examples(rng):
    v = StateVector(2, random_state(2, rng))
    H = random_hamiltonian(2, rng)
    assert dnp_exact_energy(v, np.ones(4), H) == pytest.approx(exact_expectation(H, v), abs=1e-12)
    zz = Hamiltonian(2, [(-1.0, "ZZ")])
    assert dnp_exact_energy(StateVector.zero(2), rng.uniform(0.1, 5, 4), zz) == pytest.approx(-1.0)
    with pytest.raises(DegenerateDenominatorError):
        dnp_exact_energy(StateVector.zero(2), np.array([0.0, 1, 1, 1]), zz)


def test_dnp_exact_reconstructs_ground_state(rng):
    H = build_tfim(4, 1.0)
    gs = ground_state(H)
    v = random_state(4, rng)
    f = np.abs(gs.ground_state.amps) / np.abs(v)
    # |v| reweighted to |phi0| still carries v's phases, so strip them first
    v_pos = StateVector(4, np.abs(v))
    assert dnp_exact_energy(v_pos, f, H) == pytest.approx(gs.E_gs, abs=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_dnp_empirical_exact_mode_matches_dense(n, rng):
    for _ in range(10):
        v, H, ds = _exact(n, rng)
        F = rng.uniform(0.1, 4.0, size=1 << n)
        assert dnp_empirical_energy(ds.ansatz, ds.real, F, H).value == pytest.approx(
            dnp_exact_energy(v, F, H), abs=1e-10)


def test_dnp_unit_weights_equal_vqe_on_shots():
    H = build_tfim(4, 0.8)
    v = StateVector.random(4, np.random.default_rng(2))
    ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=300, shots_term=300, seed=1)
    assert dnp_empirical_energy(ds.ansatz, ds.real, np.ones(16), H).value == pytest.approx(
        vqe_energy(ds.real, H, ds.ansatz).value, abs=1e-12)


def test_dnp_scale_invariance(rng):
    H = build_tfim(3, 1.0)
    v = StateVector.random(3, rng)
    ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=100, shots_term=100, seed=3)
    F = rng.uniform(0.2, 2.0, size=8)
    a = dnp_empirical_energy(ds.ansatz, ds.real, F, H).value
    b = dnp_empirical_energy(ds.ansatz, ds.real, 7.3 * F, H).value
    assert a == pytest.approx(b, abs=1e-12)


def test_unbounded_below_when_numerator_string_unsampled():
    # ansatz saw only 00; the X0 term saw outcome 00 whose partner 10 was never sampled
    H = Hamiltonian(2, [(-1.0, "XI"), (-0.1, "ZI")])
    ansatz = SampleSet.from_dict(2, {"00": 10})
    terms = {PauliString("XI"): SampleSet.from_dict(2, {"00": 10}, tag="x")}
    values, zs = [], []
    for k in (10.0, 1e2, 1e3):
        F = np.ones(4)
        F[0b10] = k
        est = dnp_empirical_energy(ansatz, terms, F, H)
        values.append(est.value)
        zs.append(est.denominator)
    assert values[0] > values[1] > values[2]
    assert zs[0] == zs[1] == zs[2]
    with pytest.raises(DegenerateDenominatorError):
        dnp_empirical_energy(ansatz, terms, np.array([0.0, 1, 1, 1]), H)


def _fd_weights(fun, F, h=1e-6):
    out = np.zeros_like(F)
    for i in range(F.size):
        e = np.zeros_like(F)
        e[i] = h
        out[i] = (fun(F + e) - fun(F - e)) / (2 * h)
    return out


def test_dnp_weight_gradient_fd(rng):
    H = build_tfim(3, 1.2)
    v = StateVector.random(3, rng)
    ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=50, shots_term=50, seed=8)
    F = rng.uniform(0.5, 2.0, size=8)
    _, g = dnp_weight_gradient(ds.ansatz, ds.real, F, H)
    fd = _fd_weights(lambda x: dnp_empirical_energy(ds.ansatz, ds.real, x, H).value, F)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)
    # scale invariance: gradient orthogonal to F
    assert abs(np.dot(g, F)) < 1e-10


def _net_fd(value_of, net, h=1e-6):
    out = {}
    for k, p in net.params.items():
        flat, g = p.ravel(), np.zeros(p.size)
        for i in range(p.size):
            plus, minus = flat.copy(), flat.copy()
            plus[i] += h
            minus[i] -= h
            g[i] = (value_of(net.with_params(dict(net.params, **{k: plus.reshape(p.shape)})))
                    - value_of(net.with_params(dict(net.params, **{k: minus.reshape(p.shape)})))) / (2 * h)
        out[k] = g.reshape(p.shape)
    return out


def _assert_rel(a, b, rtol=1e-4):
    # relative to the largest gradient component, so exactly-zero directions are judged fairly
    scale = max(max(np.max(np.abs(v)) for v in b.values()), 1e-6)
    for k in a:
        assert np.max(np.abs(a[k] - b[k])) <= rtol * scale, k


@pytest.mark.parametrize("mode", ["amp_bounded", "amp_positive"])
def test_dnp_loss_gradient_fd(mode):
    rng = np.random.default_rng(42)
    H = build_tfim(3, 1.0)
    for trial in range(3):
        v = StateVector.random(3, rng)
        ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=80, shots_term=80, seed=trial)
        net = NeuralNet.init(3, rng, hidden=5, mode=mode, r=2.5 if mode == "amp_bounded" else None,
                             zero_output=False)
        est, grads = dnp_loss_gradient(ds.ansatz, ds.real, net, H)
        fd = _net_fd(lambda nn: dnp_empirical_energy(ds.ansatz, ds.real, nn, H).value, net)
        _assert_rel(grads, fd)


def test_uvqnhe_exact_examples(rng):
    v = StateVector.random(3, rng)
    H = random_hamiltonian(3, rng)
    assert uvqnhe_exact_energy(v, np.zeros(8), H) == pytest.approx(exact_expectation(H, v), abs=1e-12)
    Hz = Hamiltonian(3, [(0.4, "ZIZ"), (-1.0, "IZI")])
    assert uvqnhe_exact_energy(v, rng.uniform(-3, 3, 8), Hz) == pytest.approx(exact_expectation(Hz, v), abs=1e-12)
    tfim = build_tfim(4, 1.0)
    e_gs = ground_state(tfim).E_gs
    for _ in range(50):
        w = StateVector.random(4, rng)
        assert uvqnhe_exact_energy(w, rng.uniform(-np.pi, np.pi, 16), tfim) >= e_gs - 1e-9


@pytest.mark.parametrize("n", [2, 3, 4])
def test_uvqnhe_empirical_exact_mode(n, rng):
    for _ in range(10):
        v, H, ds = _exact(n, rng, imag=True)
        G = rng.uniform(-np.pi, np.pi, size=1 << n)
        got = uvqnhe_empirical_energy(ds.real, ds.imag, G, H, ds.ansatz)
        assert got.value == pytest.approx(uvqnhe_exact_energy(v, G, H), abs=1e-10)
        assert got.denominator is None


def test_uvqnhe_zero_phase_equals_vqe_and_global_phase():
    H = build_tfim(4, 1.0)
    v = StateVector.random(4, np.random.default_rng(5))
    ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=500, shots_term=500, seed=2, imag=True)
    e0 = uvqnhe_empirical_energy(ds.real, ds.imag, np.zeros(16), H, ds.ansatz).value
    assert e0 == pytest.approx(vqe_energy(ds.real, H, ds.ansatz).value, abs=1e-12)
    G = np.random.default_rng(1).uniform(-1, 1, 16)
    a = uvqnhe_empirical_energy(ds.real, ds.imag, G, H, ds.ansatz).value
    b = uvqnhe_empirical_energy(ds.real, ds.imag, G + 0.37, H, ds.ansatz).value
    assert a == pytest.approx(b, abs=1e-12)
    with pytest.raises(MissingSamplesError):
        uvqnhe_empirical_energy(ds.real, {}, G, H, ds.ansatz)


def test_uvqnhe_exact_mode_variational_on_tfim(rng):
    H = build_tfim(4, 1.0)
    e_gs = ground_state(H).E_gs
    for _ in range(20):
        v, _, ds = _exact(4, rng, H=H, imag=True)
        G = rng.uniform(-np.pi, np.pi, 16)
        assert uvqnhe_empirical_energy(ds.real, ds.imag, G, H, ds.ansatz).value >= e_gs - 1e-9


def test_uvqnhe_affine_in_frequencies(rng):
    # mixing two datasets mixes the estimates: no ratio of random quantities
    H = build_tfim(3, 1.0)
    v = StateVector.random(3, rng)
    G = rng.uniform(-2, 2, 8)
    a = collect_samples(v, [p for _, p in H.terms], shots_ansatz=100, shots_term=100, seed=1, imag=True)
    b = collect_samples(v, [p for _, p in H.terms], shots_ansatz=100, shots_term=100, seed=2, imag=True)

    def merged(x, y):
        return {P: SampleSet(3, x[P].counts + y[P].counts, 200, x[P].tag) for P in x}

    ea = uvqnhe_empirical_energy(a.real, a.imag, G, H, a.ansatz).value
    eb = uvqnhe_empirical_energy(b.real, b.imag, G, H, b.ansatz).value
    ansatz = SampleSet(3, a.ansatz.counts + b.ansatz.counts, 200)
    em = uvqnhe_empirical_energy(merged(a.real, b.real), merged(a.imag, b.imag), G, H, ansatz).value
    assert em == pytest.approx(0.5 * (ea + eb), abs=1e-12)


def test_uvqnhe_gradients_fd(rng):
    H = build_tfim(3, 0.9)
    v = StateVector.random(3, rng)
    ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=60, shots_term=60, seed=4, imag=True)
    G = rng.uniform(-2, 2, 8)
    _, g = uvqnhe_phase_gradient(ds.real, ds.imag, G, H, ds.ansatz)
    fd = _fd_weights(lambda x: uvqnhe_empirical_energy(ds.real, ds.imag, x, H, ds.ansatz).value, G)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)
    net = NeuralNet.init(3, rng, hidden=5, mode="phase", r=None, zero_output=False)
    _, grads = uvqnhe_loss_gradient(ds.real, ds.imag, net, H, ds.ansatz)
    _assert_rel(grads, _net_fd(lambda nn: uvqnhe_empirical_energy(ds.real, ds.imag, nn, H, ds.ansatz).value, net))


def test_statistical_consistency():
    H = build_tfim(3, 1.0)
    v = StateVector.random(3, np.random.default_rng(11))
    G = np.random.default_rng(12).uniform(-1, 1, 8)
    exact = uvqnhe_exact_energy(v, G, H)
    inside = 0
    reps = 300
    for rep in range(reps):
        ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=400, shots_term=400, seed=rep,
                             imag=True, stream="consistency")
        est = uvqnhe_empirical_energy(ds.real, ds.imag, G, H, ds.ansatz)
        inside += abs(est.value - exact) <= 5 * est.stderr
    assert inside / reps >= 0.99
