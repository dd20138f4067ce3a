"""Dense statevector engine: gates, circuits, Born probabilities, shot sampling."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 24
NORM_TOL = 1e-10

_SQ2 = 1.0 / np.sqrt(2.0)
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
}
_ARITY = {"H": 1, "X": 1, "SDG": 1, "S": 1, "RX": 1, "RZ": 1, "RZZ": 2, "CX": 2, "CY": 2}
_PARAMETRIC = {"RX", "RZ", "RZZ"}


def bits_to_str(index: int, n: int) -> str:
    return format(int(index), f"0{n}b")


def str_to_bits(s: str) -> int:
    if not s or set(s) - {"0", "1"}:
        raise ValueError(f"invalid bit string {s!r}")
    return int(s, 2)


def basis_inputs(n: int) -> np.ndarray:
    """All ``2^n`` bit strings as a ``(2^n, n)`` 0/1 matrix, qubit 0 first."""
    idx = np.arange(1 << n)[:, None]
    shifts = np.arange(n - 1, -1, -1)[None, :]
    return (idx >> shifts) & 1


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown gate {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {_ARITY[self.kind]} qubit(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated target in {self.targets}")
        if (self.kind in _PARAMETRIC) != (self.angle is not None):
            raise ValueError(f"{self.kind}: angle required iff gate is parametric")

    def matrix(self) -> np.ndarray:
        k, a = self.kind, self.angle
        if k in _FIXED:
            return _FIXED[k]
        if k == "RX":
            c, s = np.cos(a / 2), np.sin(a / 2)
            return np.array([[c, -1j * s], [-1j * s, c]])
        if k == "RZ":
            return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
        if k == "RZZ":
            e, f = np.exp(-0.5j * a), np.exp(0.5j * a)
            return np.diag([e, f, f, e])
        u = np.eye(4, dtype=complex)
        u[2:, 2:] = _FIXED["X"] if k == "CX" else np.array([[0, -1j], [1j, 0]])
        return u


# convenience constructors
def H(q): return Gate("H", (q,))
def X(q): return Gate("X", (q,))
def SDG(q): return Gate("SDG", (q,))
def S(q): return Gate("S", (q,))
def RX(q, a): return Gate("RX", (q,), float(a))
def RZ(q, a): return Gate("RZ", (q,), float(a))
def RZZ(q1, q2, a): return Gate("RZZ", (q1, q2), float(a))
def CX(c, t): return Gate("CX", (c, t))
def CY(c, t): return Gate("CY", (c, t))


@dataclass
class Circuit:
    n: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise ValueError(f"n must be in [1, {MAX_QUBITS}], got {self.n}")
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate):
        if any(t >= self.n or t < 0 for t in g.targets):
            raise ValueError(f"gate {g} targets qubit outside 0..{self.n - 1}")

    def append(self, g: Gate) -> "Circuit":
        self._check(g)
        self.gates.append(g)
        return self

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        return Circuit(self.n, self.gates + other.gates)

    def __len__(self):
        return len(self.gates)


class StateVector:
    """``2^n`` complex amplitudes; index bit ``n-1-q`` is qubit ``q``."""

    def __init__(self, n: int, amps, check: bool = True):
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} amplitudes, got shape {amps.shape}")
        if check:
            nrm = float(np.vdot(amps, amps).real)
            if abs(nrm - 1.0) > NORM_TOL:
                raise ValueError(f"state not normalized (norm^2 = {nrm!r})")
        self.n = n
        self.amps = amps

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        a = np.zeros(1 << n, dtype=complex)
        a[0] = 1.0
        return cls(n, a)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "StateVector":
        """Haar-random state from a normalized complex Gaussian vector."""
        a = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return cls(n, a / np.linalg.norm(a))

    def copy(self) -> "StateVector":
        return StateVector(self.n, self.amps.copy(), check=False)

    def __repr__(self):
        return f"StateVector(n={self.n})"


def apply_gate(g: Gate, v: StateVector) -> StateVector:
    n = v.n
    psi = v.amps.reshape((2,) * n)
    u = g.matrix()
    if len(g.targets) == 1:
        (q,) = g.targets
        out = np.tensordot(u, psi, axes=([1], [q]))
        out = np.moveaxis(out, 0, q)
    else:
        q1, q2 = g.targets
        u4 = u.reshape(2, 2, 2, 2)
        out = np.tensordot(u4, psi, axes=([2, 3], [q1, q2]))
        out = np.moveaxis(out, [0, 1], [q1, q2])
    return StateVector(n, np.ascontiguousarray(out).reshape(-1), check=False)


def run_circuit(c: Circuit, initial: StateVector | None = None) -> StateVector:
    """Apply the gates in order to ``|0...0>`` (or to ``initial``)."""
    v = StateVector.zero(c.n) if initial is None else initial.copy()
    if v.n != c.n:
        raise ValueError("initial state size differs from circuit")
    for g in c.gates:
        v = apply_gate(g, v)
    return v


def probabilities(v: StateVector) -> np.ndarray:
    """Born distribution ``|amps|^2`` as a dense array indexed by bit string."""
    p = np.abs(v.amps) ** 2
    return p / p.sum()


def probability_dict(v: StateVector, cutoff: float = 0.0) -> dict[str, float]:
    p = probabilities(v)
    return {bits_to_str(i, v.n): float(x) for i, x in enumerate(p) if x > cutoff}


# --- randomness -------------------------------------------------------------

def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    digest = hashlib.blake2b(str(key).encode(), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def rng_stream(seed: int, *keys) -> np.random.Generator:
    """Counter-based (Philox) generator for the stream named by ``(seed, *keys)``.

    Streams depend only on their names, so the order in which circuits are
    sampled does not change any individual SampleSet.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF] + [_key_int(k) for k in keys])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SampleSet:
    """Histogram of outcomes from one measurement circuit.

    ``counts`` is dense over all ``2^n`` outcomes. For exact-probability mode
    ``shots`` is ``None`` and ``counts`` holds the Born probabilities.
    """

    n: int
    counts: np.ndarray
    shots: int | None
    tag: str = "ansatz"

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (1 << self.n,):
            raise ValueError("counts must be dense over 2^n outcomes")
        if self.shots is not None and int(self.counts.sum()) != self.shots:
            raise ValueError(f"counts sum to {self.counts.sum()}, expected {self.shots}")

    @classmethod
    def exact(cls, v: StateVector, tag: str = "ansatz") -> "SampleSet":
        return cls(v.n, probabilities(v), None, tag)

    @classmethod
    def from_dict(cls, n: int, counts: dict[str, int], tag: str = "ansatz") -> "SampleSet":
        arr = np.zeros(1 << n, dtype=np.int64)
        for s, c in counts.items():
            if len(s) != n:
                raise ValueError(f"bit string {s!r} has length {len(s)}, expected {n}")
            arr[str_to_bits(s)] += int(c)
        return cls(n, arr, int(arr.sum()), tag)

    @property
    def is_exact(self) -> bool:
        return self.shots is None

    @property
    def frequencies(self) -> np.ndarray:
        if self.shots is None:
            return self.counts.astype(float)
        return self.counts / float(self.shots)

    @property
    def support(self) -> np.ndarray:
        """Indices of observed outcomes."""
        return np.flatnonzero(self.counts)

    def as_dict(self) -> dict[str, int | float]:
        return {bits_to_str(i, self.n): self.counts[i].item() for i in self.support}

    def to_dict(self) -> dict:
        return {"tag": self.tag, "n": self.n, "shots": self.shots, "counts": self.as_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "SampleSet":
        counts = d["counts"]
        n = int(d.get("n") or len(next(iter(counts))))
        if d.get("shots") is None:
            arr = np.zeros(1 << n)
            for s, c in counts.items():
                arr[str_to_bits(s)] = float(c)
            return cls(n, arr, None, d.get("tag", "ansatz"))
        out = cls.from_dict(n, counts, d.get("tag", "ansatz"))
        if out.shots != int(d["shots"]):
            raise ValueError(f"shots field {d['shots']} disagrees with counts total {out.shots}")
        return out


def sample(v: StateVector, shots: int, rng: np.random.Generator, tag: str = "ansatz") -> SampleSet:
    """Draw ``shots`` i.i.d. outcomes by inverse-CDF lookup."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    cdf = np.cumsum(probabilities(v))
    cdf[-1] = 1.0
    draws = np.searchsorted(cdf, rng.random(shots), side="right")
    counts = np.bincount(draws, minlength=1 << v.n).astype(np.int64)
    return SampleSet(v.n, counts, int(shots), tag)
