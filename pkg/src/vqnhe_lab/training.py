"""Sequential training: derivative-free VQE first, then a network on top of the frozen circuit."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import minimize

from .ansatz import AnsatzSpec, build_ansatz
from .diagnostics import support_report
from .estimators import (DegenerateDenominatorError, dnp_exact_energy, dnp_loss_gradient,
                         uvqnhe_exact_energy, uvqnhe_loss_gradient, vqe_energy)
from .measurement import Dataset, collect_samples
from .neural import AdamState, NeuralNet, adam_step
from .pauli import Hamiltonian, build_tfim, exact_expectation
from .simulator import StateVector, rng_stream, run_circuit

COMPLETED = "completed"
DENOMINATOR_COLLAPSE = "denominator_collapse"
NAN = "nan"
DIVERGED = "diverged"
DIVERGENCE_FACTOR = 1e3


@dataclass
class TrainingConfig:
    n: int = 4
    h: float = 1.0
    boundary: str = "open"
    layers: int = 1
    ansatz_boundary: str = "open"
    # VQE
    vqe_maxiter: int = 3000
    vqe_tol: float = 1e-8
    vqe_rhobeg: float = 0.5
    vqe_shots: int | None = None
    # network
    mode: str = "amp_bounded"
    r: float | None = 3.0
    epochs: int = 200
    lr: float = 0.01
    hidden: int = 64
    activation: str = "tanh"
    # measurement
    exact: bool = False
    shots_term: int | None = 1000
    shots_ansatz: int | None = 1000
    refresh_samples: bool = False
    final_window: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 1 <= self.final_window <= self.epochs + 1:
            raise ValueError("final_window must lie in [1, epochs + 1]")
        if not self.exact:
            for name in ("shots_term", "shots_ansatz"):
                v = getattr(self, name)
                if v is None or v < 1:
                    raise ValueError(f"{name} must be >= 1 unless exact mode is on")

    def hamiltonian(self) -> Hamiltonian:
        return build_tfim(self.n, self.h, self.boundary)

    def ansatz(self) -> AnsatzSpec:
        return AnsatzSpec(self.n, self.layers, self.ansatz_boundary)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class VQEResult:
    theta: np.ndarray
    energy: float
    trace: list[float]
    evaluations: int

    def state(self, spec: AnsatzSpec) -> StateVector:
        return run_circuit(build_ansatz(spec, self.theta))


def run_vqe(config: TrainingConfig, H: Hamiltonian | None = None) -> VQEResult:
    """COBYLA on the VQE energy. ``trace`` is the best-so-far energy per evaluation."""
    H = H if H is not None else config.hamiltonian()
    spec = config.ansatz()
    theta0 = spec.initial_params(rng_stream(config.seed, "vqe-init"))
    trace: list[float] = []
    best = [np.inf, theta0.copy()]

    def energy(theta):
        v = run_circuit(build_ansatz(spec, theta))
        if config.vqe_shots is None:
            e = exact_expectation(H, v)
        else:
            ds = collect_samples(v, [p for _, p in H.terms], shots_ansatz=config.vqe_shots,
                                 shots_term=config.vqe_shots, seed=config.seed,
                                 stream=f"vqe-{len(trace)}")
            e = vqe_energy(ds.real, H, ds.ansatz).value
        if e < best[0]:
            best[0], best[1] = e, np.array(theta, dtype=float)
        trace.append(best[0])
        return e

    minimize(energy, theta0, method="COBYLA",
             options={"maxiter": config.vqe_maxiter, "rhobeg": config.vqe_rhobeg, "tol": config.vqe_tol})
    theta = best[1]
    theta.setflags(write=False)
    return VQEResult(theta, float(best[0]), trace, len(trace))


@dataclass
class EpochRecord:
    epoch: int
    energy: float
    denominator: float | None
    exact_energy: float
    stderr: float | None
    inclusion: bool | None
    wall_ms: float


@dataclass
class TrainingTrace:
    kind: str
    records: list[EpochRecord]
    net: NeuralNet
    theta: np.ndarray
    termination: str
    final_energy: float
    final_exact_energy: float
    baseline_energy: float
    dataset: Dataset | None = None
    meta: dict = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def exact_energies(self) -> np.ndarray:
        return np.array([r.exact_energy for r in self.records])

    def to_csv(self, include_wall: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["epoch", "energy", "denominator", "exact_energy", "inclusion_flag"]
        w.writerow(cols + (["wall_ms"] if include_wall else []))
        for r in self.records:
            row = [r.epoch, repr(r.energy), "" if r.denominator is None else repr(r.denominator),
                   repr(r.exact_energy), "" if r.inclusion is None else int(r.inclusion)]
            w.writerow(row + ([f"{r.wall_ms:.3f}"] if include_wall else []))
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "termination": self.termination,
                "final_energy": self.final_energy, "final_exact_energy": self.final_exact_energy,
                "baseline_energy": self.baseline_energy, "theta": self.theta.tolist(),
                "network": self.net.to_dict(), "records": [asdict(r) for r in self.records],
                "meta": self.meta}


def _dataset(state: StateVector, H: Hamiltonian, config: TrainingConfig, imag: bool, epoch: int) -> Dataset:
    stream = f"nn-epoch-{epoch}" if config.refresh_samples else "nn"
    if config.exact:
        return collect_samples(state, [p for _, p in H.terms], imag=imag)
    return collect_samples(state, [p for _, p in H.terms], shots_ansatz=config.shots_ansatz,
                           shots_term=config.shots_term, seed=config.seed, imag=imag, stream=stream)


def _train(kind: str, theta: np.ndarray, config: TrainingConfig, H: Hamiltonian | None,
           dataset: Dataset | None, net: NeuralNet | None) -> TrainingTrace:
    H = H if H is not None else config.hamiltonian()
    theta = np.array(theta, dtype=float)
    theta.setflags(write=False)
    state = run_circuit(build_ansatz(config.ansatz(), theta))
    imag = kind == "uvqnhe"
    if net is None:
        mode = "phase" if imag else config.mode
        net = NeuralNet.init(H.n, rng_stream(config.seed, "nn-init"), hidden=config.hidden, mode=mode,
                             r=config.r if mode == "amp_bounded" else None, activation=config.activation)
    if imag and net.mode != "phase":
        raise ValueError("U-VQNHE needs a phase-mode network")
    if not imag and net.mode == "phase":
        raise ValueError("DNP needs an amplitude-mode network")
    ds = dataset if dataset is not None else _dataset(state, H, config, imag, 0)
    inclusion = support_report(ds.ansatz, ds.real).inclusion_holds
    exact_fn = uvqnhe_exact_energy if imag else dnp_exact_energy
    baseline = exact_expectation(H, state)
    guard = DIVERGENCE_FACTOR * H.l1_norm

    adam = AdamState(lr=config.lr)
    records: list[EpochRecord] = []
    termination = COMPLETED

    def evaluate(net, ds):
        if imag:
            return uvqnhe_loss_gradient(ds.real, ds.imag, net, H, ds.ansatz)
        return dnp_loss_gradient(ds.ansatz, ds.real, net, H)

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        if config.refresh_samples and epoch > 0 and dataset is None:
            ds = _dataset(state, H, config, imag, epoch)
            inclusion = support_report(ds.ansatz, ds.real).inclusion_holds
        try:
            est, grads = evaluate(net, ds)
        except DegenerateDenominatorError:
            termination = DENOMINATOR_COLLAPSE
            break
        exact_e = exact_fn(state, net, H)
        finite = np.isfinite(est.value) and all(np.all(np.isfinite(g)) for g in grads.values())
        records.append(EpochRecord(epoch, est.value, est.denominator, exact_e, est.stderr, inclusion,
                                   1e3 * (time.perf_counter() - t0)))
        if not finite:
            termination = NAN
            break
        if abs(est.value) > guard:
            termination = DIVERGED
            break
        params, adam = adam_step(net.params, grads, adam)
        net = net.with_params(params)

    final = records[-1].energy if records else float("nan")
    final_exact = records[-1].exact_energy if records else float("nan")
    if termination == COMPLETED:
        if config.refresh_samples and dataset is None:
            ds = _dataset(state, H, config, imag, config.epochs)
        try:
            est, _ = evaluate(net, ds)
            # with fresh samples per epoch the tail estimates are independent; average them
            tail = [r.energy for r in records[len(records) - config.final_window + 1:]]
            final, final_exact = float(np.mean(tail + [est.value])), exact_fn(state, net, H)
            if not np.isfinite(final):
                termination = NAN
        except DegenerateDenominatorError:
            termination = DENOMINATOR_COLLAPSE
    return TrainingTrace(kind, records, net, theta, termination, float(final), float(final_exact),
                         float(baseline), ds)


def train_dnp(theta, config: TrainingConfig, H: Hamiltonian | None = None,
              dataset: Dataset | None = None, net: NeuralNet | None = None) -> TrainingTrace:
    """Adam on the empirical reweighted-ratio energy with the circuit frozen at ``theta``.

    The dataset is drawn once and reused for every epoch unless
    ``config.refresh_samples`` is set.
    """
    return _train("dnp", theta, config, H, dataset, net)


def train_uvqnhe(theta, config: TrainingConfig, H: Hamiltonian | None = None,
                 dataset: Dataset | None = None, net: NeuralNet | None = None) -> TrainingTrace:
    """Adam on the phase-only energy estimator with the circuit frozen at ``theta``."""
    return _train("uvqnhe", theta, config, H, dataset, net)


def config_from_json(text: str) -> TrainingConfig:
    return TrainingConfig.from_dict(json.loads(text))
