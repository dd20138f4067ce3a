"""Executable diagnostics for reweighting instability and its resource cost.

Covers support mismatch between numerator and denominator histograms,
coupon-collector shot counts, Bhattacharyya / Renyi overlaps, the dynamic
range a reweighting needs, the shot count for a target accuracy, and Monte
Carlo scaling of the overlap for random states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .measurement import Dataset, outcome_maps
from .pauli import Hamiltonian, PauliString
from .ansatz import AnsatzSpec, build_ansatz
from .simulator import SampleSet, StateVector, bits_to_str, probabilities, run_circuit
from .estimators import basis_weights, dnp_empirical_energy

NORM_TOL = 1e-8


# --- support sets ---------------------------------------------------------------

@dataclass
class SupportReport:
    n: int
    ansatz_support: frozenset[int]
    numerator_support: frozenset[int]

    @property
    def missing(self) -> frozenset[int]:
        return self.numerator_support - self.ansatz_support

    @property
    def inclusion_holds(self) -> bool:
        return not self.missing

    def strings(self, which: frozenset[int]) -> list[str]:
        return [bits_to_str(i, self.n) for i in sorted(which)]

    def to_dict(self) -> dict:
        return {"B_a": self.strings(self.ansatz_support),
                "B_M": self.strings(self.numerator_support),
                "missing": self.strings(self.missing),
                "inclusion_holds": self.inclusion_holds}


def support_report(ansatz_samples: SampleSet, term_samples: dict[PauliString, SampleSet]) -> SupportReport:
    """Observed ansatz support versus every configuration the numerator touches.

    Pure-Z terms are read from the ansatz histogram and so can never add a
    missing configuration.
    """
    n = ansatz_samples.n
    b_a = frozenset(ansatz_samples.support.tolist())
    b_m = set(b_a)
    for P, ss in term_samples.items():
        if ss.n != n:
            raise ValueError("sample sets disagree on n")
        m = outcome_maps(P)
        seen = ss.support
        b_m.update(m.left[seen].tolist())
        b_m.update(m.right[seen].tolist())
    return SupportReport(n, b_a, frozenset(b_m))


def unboundedness_witness(dataset: Dataset, f_base, H: Hamiltonian,
                          ks=(1.0, 10.0, 1e2, 1e3, 1e4)) -> list[tuple[float, float, float]] | None:
    """Drive the weight of one unsampled configuration to infinity.

    Finds the missing configuration whose weight enters the numerator with the
    most negative net coefficient, sets its weight to each ``k`` and returns
    ``(k, E, Z)``. ``None`` means no such configuration exists in this dataset.
    """
    rep = support_report(dataset.ansatz, dataset.real)
    if rep.inclusion_holds:
        return None
    n = dataset.n
    F = basis_weights(f_base, n).copy()
    coef = np.zeros(1 << n)
    for c, P in H.terms:
        if P.is_diagonal:
            continue
        m = outcome_maps(P)
        w = c * dataset.real[P].frequencies * m.sign
        coef += np.bincount(m.left, weights=w * F[m.right], minlength=1 << n)
        coef += np.bincount(m.right, weights=w * F[m.left], minlength=1 << n)
    missing = np.array(sorted(rep.missing))
    star = int(missing[np.argmin(coef[missing])])
    if coef[star] >= 0.0:
        return None
    out = []
    for k in ks:
        Fk = F.copy()
        Fk[star] = k
        est = dnp_empirical_energy(dataset.ansatz, dataset.real, Fk, H)
        out.append((float(k), est.value, est.denominator))
    return out


# --- coupon collector -------------------------------------------------------------

def harmonic(k: int) -> float:
    return float(np.sum(1.0 / np.arange(1, k + 1)))


def coupon_expected_shots(n: int, n_targets: int) -> float:
    """Expected uniform draws over ``2^n`` outcomes until ``n_targets`` given ones are all seen."""
    if not 1 <= n_targets <= 1 << n:
        raise ValueError(f"need 1 <= N_M <= 2^n, got {n_targets}")
    return (1 << n) * harmonic(n_targets)


def coupon_highprob_shots(n: int, n_targets: int, delta: float) -> int:
    """Draws after which all targets are seen with probability >= 1 - delta (union bound)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not 1 <= n_targets <= 1 << n:
        raise ValueError(f"need 1 <= N_M <= 2^n, got {n_targets}")
    return math.ceil(round((1 << n) * math.log(n_targets / delta), 9))


def coupon_collection_times(n: int, n_targets: int, trials: int, rng: np.random.Generator,
                            chunk: int = 256) -> np.ndarray:
    """Monte Carlo: number of uniform draws until targets ``0..n_targets-1`` have all appeared."""
    d = 1 << n
    horizon = int(4 * coupon_expected_shots(n, n_targets)) + 16
    out = np.empty(trials, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        draws = rng.integers(0, d, size=(b, horizon), dtype=np.int32)
        rows, cols = np.nonzero(draws < n_targets)
        first = np.full((b, n_targets), horizon, dtype=np.int64)
        np.minimum.at(first, (rows, draws[rows, cols]), cols)
        t = first.max(axis=1) + 1
        ok = t <= horizon
        out[done:done + ok.sum()] = t[ok]
        done += int(ok.sum())
        if not ok.all():
            horizon *= 2
    return out


def coupon_inclusion_frequency(n: int, n_targets: int, budget: int, trials: int,
                               rng: np.random.Generator) -> float:
    """Fraction of trials in which ``budget`` uniform draws cover every target."""
    hits = 0
    for _ in range(trials):
        draws = rng.integers(0, 1 << n, size=budget)
        hits += np.unique(draws[draws < n_targets]).size == n_targets
    return hits / trials


# --- overlaps and divergences --------------------------------------------------------

def _dist(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
        raise ValueError("input is not a normalized distribution")
    return p


def bhattacharyya(p, q) -> float:
    p, q = _dist(p), _dist(q)
    if p.shape != q.shape:
        raise ValueError("distributions live on different outcome spaces")
    return float(min(np.sum(np.sqrt(p * q)), 1.0))


def renyi(p, q, order) -> float:
    """Renyi divergence ``D_alpha(p||q)`` in nats for ``order`` 1/2 or infinity."""
    p, q = _dist(p), _dist(q)
    if order in (0.5, "half"):
        b = bhattacharyya(p, q)
        return math.inf if b == 0.0 else max(-2.0 * math.log(b), 0.0)
    if order in (math.inf, "inf", "infinity"):
        on = p > 0
        if np.any(q[on] == 0):
            return math.inf
        return max(float(np.log(np.max(p[on] / q[on]))), 0.0)
    raise ValueError(f"unsupported order {order!r}")


def dynamic_range_bound(p, q) -> tuple[float, float]:
    """Dynamic range ``max f / min f`` of the reweighting ``f = p / q`` and ``B(p, q)``.

    ``f`` lives on the support of ``q``; a zero of ``p`` there makes the range
    infinite. ``gamma >= B^-4`` always holds.
    """
    p, q = _dist(p), _dist(q)
    if not np.any((p > 0) & (q > 0)):
        raise ValueError("p and q share no support")
    if np.any((p > 0) & (q == 0)):
        raise ValueError("q must be positive wherever p is")
    f = p[q > 0] / q[q > 0]
    gamma = math.inf if f.min() == 0.0 else float(f.max() / f.min())
    return gamma, bhattacharyya(p, q)


@dataclass
class DivergenceReport:
    bhattacharyya: float
    renyi_half: float
    renyi_inf_pq: float
    renyi_inf_qp: float
    gamma: float | None
    gamma_lower_bound: float

    def to_dict(self) -> dict:
        return {k: (v if v is None or math.isfinite(v) else "inf") for k, v in self.__dict__.items()}


def divergence_report(p, q) -> DivergenceReport:
    b = bhattacharyya(p, q)
    try:
        gamma, _ = dynamic_range_bound(p, q)
    except ValueError:
        gamma = None
    lower = math.inf if b == 0.0 else b ** -4
    return DivergenceReport(b, renyi(p, q, 0.5), renyi(p, q, math.inf), renyi(q, p, math.inf), gamma, lower)


def network_dynamic_range(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.max() / w.min())


def shot_lower_bound(r: float, eps: float, rounding: str = "ceil") -> int:
    """Shots per circuit for accuracy ``eps`` with weights in ``[1/r, r]``: ``9 r^4 / (4 eps^2)``.

    ``rounding="floor"`` reproduces the truncated figures quoted in the literature.
    """
    if not r >= 1.0 or not eps > 0.0 or not math.isfinite(r) or not math.isfinite(eps):
        raise ValueError("need r >= 1 and eps > 0")
    x = round(9.0 * r ** 4 / (4.0 * eps ** 2), 9)
    if rounding == "ceil":
        return math.ceil(x)
    if rounding == "floor":
        return math.floor(x)
    raise ValueError(f"unknown rounding {rounding!r}")


# --- random-state overlap scaling ---------------------------------------------------------

def haar_sqrt_moment(d: int) -> float:
    """``E[sqrt(q)]`` for one Born probability of a Haar-random state in dimension ``d``."""
    return float(np.exp(gammaln(1.5) + gammaln(d) - gammaln(d + 0.5)))


def _random_circuit_state(n: int, depth: int, rng: np.random.Generator) -> StateVector:
    from scipy.stats import unitary_group

    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for layer in range(depth):
        for a in range(layer % 2, n - 1, 2):
            u = unitary_group.rvs(4, random_state=rng).reshape(2, 2, 2, 2)
            psi = np.moveaxis(np.tensordot(u, psi, axes=([2, 3], [a, a + 1])), [0, 1], [a, a + 1])
    return StateVector(n, psi.reshape(-1))


@dataclass
class ScalingReport:
    n_values: list[int]
    mean_bc: list[float]
    stderr: list[float]
    analytic: list[float]
    slope: float
    intercept: float
    sampler: str

    def to_rows(self) -> list[dict]:
        return [{"n": n, "mean_bc": m, "stderr": s, "analytic_prediction": a}
                for n, m, s, a in zip(self.n_values, self.mean_bc, self.stderr, self.analytic)]


def point_mass(n: int, index: int = 0) -> np.ndarray:
    p = np.zeros(1 << n)
    p[index] = 1.0
    return p


def haar_bc_study(n_range, target=point_mass, trials: int = 200, rng: np.random.Generator | None = None,
                  sampler: str = "haar", depth=None) -> ScalingReport:
    """Mean ``B(p, q)`` of random states ``q`` against a fixed target ``p`` for each ``n``.

    ``target`` maps ``n`` to a distribution. ``sampler="haar"`` draws exact Haar
    states; ``"circuit"`` uses a brickwork of random two-qubit unitaries with
    ``depth(n)`` layers (default ``n``); ``"ansatz"`` uses the RX/RZZ ansatz
    with ``depth(n)`` layers (default 2) and uniform random angles. ``slope`` is the least-squares slope of
    ``ln mean B`` against ``n``.
    """
    if trials < 30:
        raise ValueError("need at least 30 trials per size")
    rng = rng if rng is not None else np.random.default_rng()
    ns, means, ses, preds = [], [], [], []
    for n in n_range:
        p = _dist(target(n))
        sp = np.sqrt(p)
        vals = np.empty(trials)
        for t in range(trials):
            if sampler == "haar":
                v = StateVector.random(n, rng)
            elif sampler == "circuit":
                v = _random_circuit_state(n, depth(n) if depth else n, rng)
            elif sampler == "ansatz":
                spec = AnsatzSpec(n, depth(n) if depth else 2)
                theta = rng.uniform(0.0, 2 * np.pi, spec.num_params)
                v = run_circuit(build_ansatz(spec, theta))
            else:
                raise ValueError(f"unknown sampler {sampler!r}")
            vals[t] = float(np.dot(sp, np.sqrt(probabilities(v))))
        ns.append(int(n))
        means.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / np.sqrt(trials)))
        preds.append(float(sp.sum() * haar_sqrt_moment(1 << n)))
    slope, intercept = np.polyfit(ns, np.log(means), 1)
    return ScalingReport(ns, means, ses, preds, float(slope), float(intercept), sampler)
