"""Energy functionals: plain VQE, diagonal reweighting (DNP / VQNHE), and phase-only U-VQNHE.

Each family comes in an exact form (dense linear algebra on the statevector)
and an empirical form that only sees measurement histograms. Passing
exact-probability SampleSets to the empirical forms must reproduce the exact
forms; the test-suite leans on that heavily.

Weight functions may be given as a :class:`NeuralNet`, as a dense array over
all ``2^n`` bit strings, or as a callable taking a bit string.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .measurement import outcome_maps
from .neural import NeuralNet
from .pauli import Hamiltonian, PauliString
from .simulator import SampleSet, StateVector, bits_to_str


class DegenerateDenominatorError(ArithmeticError):
    """The reweighted norm vanished: every sampled configuration has zero weight."""


class MissingSamplesError(KeyError):
    pass


@dataclass
class EnergyEstimate:
    value: float
    per_term_numerators: dict[PauliString, float]
    denominator: float | None = None
    shots_used: dict[str, int | None] = field(default_factory=dict)
    stderr: float | None = None

    def to_dict(self) -> dict:
        return {"value": self.value,
                "per_term": {p.letters: v for p, v in self.per_term_numerators.items()},
                "denominator": self.denominator, "shots": self.shots_used, "stderr": self.stderr}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


WeightLike = NeuralNet | np.ndarray | Callable[[str], float]


def basis_weights(f: WeightLike, n: int) -> np.ndarray:
    """Dense values of ``f`` over all bit strings."""
    if isinstance(f, NeuralNet):
        if f.n_in != n:
            raise ValueError(f"network expects {f.n_in} bits, system has {n}")
        return f.basis_values()
    if callable(f):
        return np.array([f(bits_to_str(i, n)) for i in range(1 << n)], dtype=float)
    arr = np.asarray(f, dtype=float)
    if arr.shape != (1 << n,):
        raise ValueError(f"weight array must have length {1 << n}")
    return arr


def _amps(v) -> np.ndarray:
    return np.asarray(getattr(v, "amps", v), dtype=complex)


def _split(H: Hamiltonian):
    identity = sum(c for c, p in H.terms if p.is_identity)
    return float(identity), [(c, p) for c, p in H.terms if not p.is_identity]


def _term_set(P: PauliString, term_samples: Mapping[PauliString, SampleSet],
              ansatz_samples: SampleSet | None, what: str = "real") -> SampleSet:
    if P in term_samples:
        return term_samples[P]
    if P.is_diagonal and ansatz_samples is not None:
        return ansatz_samples
    raise MissingSamplesError(f"no {what}-variant samples for term {P}")


def _shots(sets: dict[str, SampleSet]) -> dict[str, int | None]:
    return {tag: s.shots for tag, s in sets.items()}


# --- plain VQE ----------------------------------------------------------------

def vqe_energy(term_samples: Mapping[PauliString, SampleSet], H: Hamiltonian,
               ansatz_samples: SampleSet | None = None) -> EnergyEstimate:
    """Shot average of each term's eigenvalue; pure-Z terms may use the ansatz histogram."""
    c_id, terms = _split(H)
    per_term, used = {}, {}
    value, var = c_id, 0.0
    for c, P in terms:
        ss = _term_set(P, term_samples, ansatz_samples)
        m = outcome_maps(P)
        mean = float(np.dot(ss.frequencies, m.sign))
        per_term[P] = mean
        used[ss.tag] = ss
        value += c * mean
        if ss.shots:
            var += c * c * max(1.0 - mean * mean, 0.0) / ss.shots
    stderr = float(np.sqrt(var)) if any(s.shots for s in used.values()) else None
    return EnergyEstimate(value, per_term, None, _shots(used), stderr)


# --- DNP / VQNHE ----------------------------------------------------------------

def dnp_exact_energy(v, f: WeightLike, H: Hamiltonian) -> float:
    """``<v|D_f H D_f|v> / <v|D_f^2|v>`` with ``D_f = diag(f)``."""
    amps = _amps(v)
    w = basis_weights(f, H.n) * amps
    z = float(np.vdot(w, w).real)
    if z <= 0.0:
        raise DegenerateDenominatorError("D_f annihilates the state")
    return float(np.vdot(w, H.apply(w)).real) / z


def _dnp_parts(ansatz_samples: SampleSet, term_samples, F: np.ndarray, H: Hamiltonian):
    c_id, terms = _split(H)
    p_i = ansatz_samples.frequencies
    z = float(np.dot(p_i, F * F))
    nums, sets = {}, {"ansatz": ansatz_samples}
    for c, P in terms:
        ss = _term_set(P, term_samples, ansatz_samples)
        m = outcome_maps(P)
        nums[P] = float(np.dot(ss.frequencies * m.sign, F[m.left] * F[m.right]))
        sets[ss.tag] = ss
    return c_id, terms, z, nums, sets


def dnp_empirical_energy(ansatz_samples: SampleSet, term_samples: Mapping[PauliString, SampleSet],
                         f: WeightLike, H: Hamiltonian) -> EnergyEstimate:
    """Ratio estimator ``sum_P c_P N_f(P) / Z_f`` from histograms.

    ``N_f(P)`` averages ``sign(s) f(s') f(s'~)`` over the term's histogram and
    ``Z_f`` averages ``f(s)^2`` over the ansatz histogram.
    """
    F = basis_weights(f, H.n)
    c_id, terms, z, nums, sets = _dnp_parts(ansatz_samples, term_samples, F, H)
    if not z > 0.0:
        raise DegenerateDenominatorError("empirical normalization Z_f is zero")
    value = c_id + sum(c * nums[P] for c, P in terms) / z
    return EnergyEstimate(float(value), nums, z, _shots(sets))


def dnp_weight_gradient(ansatz_samples: SampleSet, term_samples, F: np.ndarray,
                        H: Hamiltonian) -> tuple[EnergyEstimate, np.ndarray]:
    """Empirical DNP estimate and ``dE/dF`` over all bit strings (quotient rule)."""
    c_id, terms, z, nums, sets = _dnp_parts(ansatz_samples, term_samples, F, H)
    if not z > 0.0:
        raise DegenerateDenominatorError("empirical normalization Z_f is zero")
    num = sum(c * nums[P] for c, P in terms)
    dim = F.shape[0]
    dnum = np.zeros(dim)
    for c, P in terms:
        ss = _term_set(P, term_samples, ansatz_samples)
        m = outcome_maps(P)
        w = c * ss.frequencies * m.sign
        dnum += np.bincount(m.left, weights=w * F[m.right], minlength=dim)
        dnum += np.bincount(m.right, weights=w * F[m.left], minlength=dim)
    dz = 2.0 * ansatz_samples.frequencies * F
    grad = dnum / z - (num / z ** 2) * dz
    return EnergyEstimate(float(c_id + num / z), nums, z, _shots(sets)), grad


def dnp_loss_gradient(ansatz_samples: SampleSet, term_samples, f: NeuralNet,
                      H: Hamiltonian) -> tuple[EnergyEstimate, dict[str, np.ndarray]]:
    """Empirical DNP energy and its gradient w.r.t. the network parameters."""
    F, cache = f.basis_values(return_cache=True)
    est, dF = dnp_weight_gradient(ansatz_samples, term_samples, F, H)
    return est, f.backward_batch(cache, dF)


# --- U-VQNHE ----------------------------------------------------------------------

def uvqnhe_exact_energy(v, g: WeightLike, H: Hamiltonian, tol: float = 1e-10) -> float:
    """``<v|U_g^dag H U_g|v>`` with ``U_g = diag(exp(i g))``."""
    w = np.exp(1j * basis_weights(g, H.n)) * _amps(v)
    e = complex(np.vdot(w, H.apply(w)))
    if abs(e.imag) > tol * max(1.0, H.l1_norm):
        raise ArithmeticError(f"energy has imaginary residue {e.imag:.3e}")
    return e.real


def _uvqnhe_parts(real_samples, imag_samples, G: np.ndarray, H: Hamiltonian,
                  ansatz_samples: SampleSet | None, want_grad: bool):
    c_id, terms = _split(H)
    dim = G.shape[0]
    grad = np.zeros(dim) if want_grad else None
    per_term, sets = {}, {}
    value, var = c_id, 0.0
    shot_mode = False
    for c, P in terms:
        m = outcome_maps(P)
        re_set = _term_set(P, real_samples, ansatz_samples)
        sets[re_set.tag] = re_set
        if P.is_diagonal:
            x_re = m.sign
            t = float(np.dot(re_set.frequencies, x_re))
            per_term[P] = t
            value += c * t
            if re_set.shots:
                shot_mode = True
                var += c * c * max(1.0 - t * t, 0.0) / re_set.shots
            continue
        if P not in imag_samples:
            raise MissingSamplesError(f"no imag-variant samples for term {P}")
        im_set = imag_samples[P]
        sets[im_set.tag] = im_set
        d = G[m.right] - G[m.left]
        cos, sin = np.cos(d), np.sin(d)
        x_re, x_im = m.sign * cos, m.sign * sin
        p_re, p_im = re_set.frequencies, im_set.frequencies
        t_re, t_im = float(np.dot(p_re, x_re)), float(np.dot(p_im, x_im))
        per_term[P] = t_re + t_im
        value += c * (t_re + t_im)
        for ss, x, mean in ((re_set, x_re, t_re), (im_set, x_im, t_im)):
            if ss.shots:
                shot_mode = True
                var += c * c * max(float(np.dot(ss.frequencies, x * x)) - mean * mean, 0.0) / ss.shots
        if want_grad:
            # d/dG[right] of cos d is -sin d, of sin d is cos d; left gets the opposite sign
            w = c * (-p_re * m.sign * sin + p_im * m.sign * cos)
            grad += np.bincount(m.right, weights=w, minlength=dim)
            grad -= np.bincount(m.left, weights=w, minlength=dim)
    stderr = float(np.sqrt(var)) if shot_mode else None
    return float(value), per_term, sets, stderr, grad


def uvqnhe_empirical_energy(real_samples: Mapping[PauliString, SampleSet],
                            imag_samples: Mapping[PauliString, SampleSet], g: WeightLike,
                            H: Hamiltonian, ansatz_samples: SampleSet | None = None) -> EnergyEstimate:
    """Linear estimator of ``<psi|U_g^dag H U_g|psi>``; no normalization ratio."""
    G = basis_weights(g, H.n)
    value, per_term, sets, stderr, _ = _uvqnhe_parts(real_samples, imag_samples, G, H,
                                                     ansatz_samples, False)
    return EnergyEstimate(value, per_term, None, _shots(sets), stderr)


def uvqnhe_phase_gradient(real_samples, imag_samples, G: np.ndarray, H: Hamiltonian,
                          ansatz_samples: SampleSet | None = None) -> tuple[float, np.ndarray]:
    value, _, _, _, grad = _uvqnhe_parts(real_samples, imag_samples, G, H, ansatz_samples, True)
    return value, grad


def uvqnhe_loss_gradient(real_samples, imag_samples, g: NeuralNet, H: Hamiltonian,
                         ansatz_samples: SampleSet | None = None
                         ) -> tuple[EnergyEstimate, dict[str, np.ndarray]]:
    G, cache = g.basis_values(return_cache=True)
    value, per_term, sets, stderr, dG = _uvqnhe_parts(real_samples, imag_samples, G, H,
                                                      ansatz_samples, True)
    est = EnergyEstimate(value, per_term, None, _shots(sets), stderr)
    return est, g.backward_batch(cache, dG)
