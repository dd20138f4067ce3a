"""Pauli strings, Hamiltonians, and exact operator action on dense statevectors.

Bit strings follow the package-wide convention: qubit 0 is the most
significant bit of the integer index and the leftmost character of a string.
"""

from __future__ import annotations

import json
from functools import lru_cache
from dataclasses import dataclass
from typing import Iterable

import numpy as np

LETTERS = "IXYZ"
DROP_TOL = 1e-15


def qubit_bit(n: int, q: int) -> int:
    """Integer mask of qubit ``q`` in an ``n``-qubit index."""
    return 1 << (n - 1 - q)


@dataclass(frozen=True)
class PauliString:
    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("empty Pauli string")
        bad = set(self.letters) - set(LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    @classmethod
    def from_sparse(cls, n: int, ops: dict[int, str]) -> "PauliString":
        """Build from ``{qubit: letter}``; unlisted qubits get ``I``."""
        letters = ["I"] * n
        for q, p in ops.items():
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for n={n}")
            letters[q] = p
        return cls("".join(letters))

    @property
    def n(self) -> int:
        return len(self.letters)

    def __str__(self):
        return self.letters

    def _mask(self, which: str) -> int:
        m = 0
        for q, p in enumerate(self.letters):
            if p in which:
                m |= qubit_bit(self.n, q)
        return m

    @property
    def flip_mask(self) -> int:
        """Bits flipped by the operator (its X/Y support)."""
        return self._mask("XY")

    @property
    def z_mask(self) -> int:
        """Bits carrying a pure ``Z`` letter."""
        return self._mask("Z")

    @property
    def y_mask(self) -> int:
        return self._mask("Y")

    @property
    def xy_support(self) -> list[int]:
        return [q for q, p in enumerate(self.letters) if p in "XY"]

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    @property
    def is_diagonal(self) -> bool:
        return self.flip_mask == 0

    def phases(self) -> np.ndarray:
        """Phase picked up by each basis state: ``P|s> = phase[s] |s ^ flip_mask>``."""
        idx = np.arange(1 << self.n)
        parity = popcount(idx & (self.y_mask | self.z_mask)) & 1
        n_y = self.letters.count("Y")
        return (1j ** n_y) * (1.0 - 2.0 * parity)

    def matrix(self) -> np.ndarray:
        """Dense ``2^n x 2^n`` matrix (small n only)."""
        dim = 1 << self.n
        out = np.zeros((dim, dim), dtype=complex)
        idx = np.arange(dim)
        out[idx ^ self.flip_mask, idx] = self.phases()
        return out


def popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    c = np.zeros_like(a)
    while np.any(a):
        c += a & 1
        a = a >> 1
    return c


class Hamiltonian:
    """Real-weighted sum of Pauli strings with duplicate terms merged."""

    def __init__(self, n: int, terms: Iterable[tuple[float, PauliString | str]]):
        merged: dict[PauliString, float] = {}
        for c, p in terms:
            if isinstance(p, str):
                p = PauliString(p)
            if p.n != n:
                raise ValueError(f"term {p} has {p.n} qubits, expected {n}")
            c = float(c)
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for {p}")
            merged[p] = merged.get(p, 0.0) + c
        self.n = n
        self.terms: tuple[tuple[float, PauliString], ...] = tuple(
            (c, p) for p, c in merged.items() if abs(c) >= DROP_TOL
        )

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self):
        body = " + ".join(f"{c:+g}*{p}" for c, p in self.terms)
        return f"Hamiltonian(n={self.n}, {body})"

    def __add__(self, other: "Hamiltonian") -> "Hamiltonian":
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        return Hamiltonian(self.n, list(self.terms) + list(other.terms))

    def __mul__(self, a: float) -> "Hamiltonian":
        return Hamiltonian(self.n, [(a * c, p) for c, p in self.terms])

    __rmul__ = __mul__

    @property
    def l1_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix-free ``H|v>``."""
        out = np.zeros(1 << self.n, dtype=complex)
        for c, p in self.terms:
            out += c * _apply(p, v)
        return out

    def matrix(self) -> np.ndarray:
        dim = 1 << self.n
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            out += c * p.matrix()
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "terms": [[c, p.letters] for c, p in self.terms]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Hamiltonian":
        return cls(int(d["n"]), [(c, PauliString(s)) for c, s in d["terms"]])

    @classmethod
    def from_json(cls, text: str) -> "Hamiltonian":
        return cls.from_dict(json.loads(text))


def build_tfim(n: int, h: float = 1.0, boundary: str = "open") -> Hamiltonian:
    """Transverse-field Ising chain ``H = -sum Z_i Z_{i+1} - h sum X_i``."""
    if n < 2:
        raise ValueError(f"TFIM needs n >= 2, got {n}")
    if not np.isfinite(h):
        raise ValueError("field strength must be finite")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    terms = []
    bonds = [(i, i + 1) for i in range(n - 1)]
    if boundary == "periodic" and n > 2:
        bonds.append((n - 1, 0))
    for i, j in bonds:
        terms.append((-1.0, PauliString.from_sparse(n, {i: "Z", j: "Z"})))
    for i in range(n):
        terms.append((-float(h), PauliString.from_sparse(n, {i: "X"})))
    return Hamiltonian(n, terms)


@lru_cache(maxsize=4096)
def _action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << p.n)
    return idx ^ p.flip_mask, p.phases()


def _apply(p: PauliString, v: np.ndarray) -> np.ndarray:
    target, phase = _action(p)
    out = np.empty(v.shape[0], dtype=complex)
    out[target] = phase * v
    return out


def apply_pauli(p: PauliString, v) -> np.ndarray:
    """Return ``P|v>``. ``v`` may be a StateVector or a raw amplitude array."""
    amps = getattr(v, "amps", v)
    amps = np.asarray(amps, dtype=complex)
    if amps.shape[0] != 1 << p.n:
        raise ValueError(f"Pauli on {p.n} qubits applied to vector of length {amps.shape[0]}")
    out = _apply(p, amps)
    if hasattr(v, "amps"):
        return type(v)(p.n, out)
    return out


def pauli_expectation(p: PauliString, amps: np.ndarray) -> complex:
    return complex(np.vdot(amps, _apply(p, amps)))


def exact_expectation(H: Hamiltonian, v, tol: float = 1e-10) -> float:
    """``<v|H|v>`` by dense algebra; ``v`` must be normalized."""
    amps = np.asarray(getattr(v, "amps", v), dtype=complex)
    if amps.shape[0] != 1 << H.n:
        raise ValueError("state and Hamiltonian sizes differ")
    norm = float(np.vdot(amps, amps).real)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state not normalized (norm^2 = {norm!r})")
    total = 0.0
    for c, p in H.terms:
        e = pauli_expectation(p, amps)
        if abs(e.imag) > tol:
            raise ArithmeticError(f"<{p}> has imaginary residue {e.imag:.3e}")
        total += c * e.real
    return total
