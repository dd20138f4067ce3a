"""Per-term measurement circuits and the classical bit-string maps used by the estimators.

For a term with X/Y support, the X/Y parity is collected on a single "star"
qubit: every other X/Y qubit is conditionally flipped by the star, which
merges each basis state with its partner under the Pauli flip into one
two-level system living on the star. A final rotation of the star alone then
reads out the real part (or, with an extra phase gate, the imaginary part) of
the pair's interference term, while the remaining bits still identify the pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import PauliString, popcount, qubit_bit
from .simulator import (CX, CY, RX, Circuit, H, S, SampleSet, StateVector, bits_to_str,
                        rng_stream, run_circuit, sample, str_to_bits)

REAL = "real"
IMAG = "imag"


@dataclass(frozen=True)
class MeasurementPlan:
    pauli: PauliString
    star: int | None
    variant: str
    circuit_suffix: Circuit

    @property
    def direct(self) -> bool:
        return self.star is None

    @property
    def tag(self) -> str:
        if self.direct:
            return "ansatz"
        return f"pauli-{self.variant}({self.pauli.letters})"


def plan_measurement(P: PauliString, variant: str = REAL) -> MeasurementPlan:
    if variant not in (REAL, IMAG):
        raise ValueError(f"variant must be 'real' or 'imag', got {variant!r}")
    suffix = Circuit(P.n)
    support = P.xy_support
    if not support:
        return MeasurementPlan(P, None, variant, suffix)
    star = support[0]
    for j in support[1:]:
        suffix.append(CX(star, j) if P.letters[j] == "X" else CY(star, j))
    if variant == IMAG:
        suffix.append(S(star))
    suffix.append(H(star) if P.letters[star] == "X" else RX(star, np.pi / 2))
    return MeasurementPlan(P, star, variant, suffix)


# --- bit-string maps: string forms for the interface, array forms for estimators

def pair_map(P: PauliString, s: str) -> str:
    if len(s) != P.n:
        raise ValueError("bit string and Pauli lengths differ")
    return bits_to_str(str_to_bits(s) ^ P.flip_mask, P.n)


def star_collapse(s: str, star: int) -> str:
    if not 0 <= star < len(s):
        raise ValueError(f"star {star} out of range")
    return s[:star] + "0" + s[star + 1:]


def star_sign(s: str, star: int) -> int:
    if not 0 <= star < len(s):
        raise ValueError(f"star {star} out of range")
    return -1 if s[star] == "1" else 1


@dataclass(frozen=True)
class OutcomeMaps:
    """Vectorized maps over all ``2^n`` outcomes of one plan.

    ``sign[s]`` is the eigenvalue read from outcome ``s`` (star parity times
    the parity of any Z letters); ``left[s]`` is ``s'`` and ``right[s]`` its
    partner. Direct plans have ``left == right == s``.
    """

    sign: np.ndarray
    left: np.ndarray
    right: np.ndarray


_MAPS: dict[PauliString, OutcomeMaps] = {}


def outcome_maps(P: PauliString) -> OutcomeMaps:
    maps = _MAPS.get(P)
    if maps is None:
        n = P.n
        idx = np.arange(1 << n)
        zpar = popcount(idx & P.z_mask) & 1
        support = P.xy_support
        if support:
            sb = qubit_bit(n, support[0])
            spar = (idx & sb) > 0
            left = idx & ~sb
            right = left ^ P.flip_mask
        else:
            spar = np.zeros_like(idx, dtype=bool)
            left = right = idx
        sign = (1.0 - 2.0 * spar) * (1.0 - 2.0 * zpar)
        maps = OutcomeMaps(sign, left, right)
        _MAPS[P] = maps
    return maps


@dataclass
class Dataset:
    """One measurement round: ansatz histogram plus real/imag term histograms."""

    ansatz: SampleSet
    real: dict[PauliString, SampleSet]
    imag: dict[PauliString, SampleSet]

    @property
    def n(self) -> int:
        return self.ansatz.n

    @property
    def is_exact(self) -> bool:
        return self.ansatz.is_exact

    def all_sets(self) -> list[SampleSet]:
        return [self.ansatz, *self.real.values(), *self.imag.values()]

    def to_dict(self) -> dict:
        return {"ansatz": self.ansatz.to_dict(),
                "real": {p.letters: s.to_dict() for p, s in self.real.items()},
                "imag": {p.letters: s.to_dict() for p, s in self.imag.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        return cls(SampleSet.from_json_dict(d["ansatz"]),
                   {PauliString(k): SampleSet.from_json_dict(v) for k, v in d.get("real", {}).items()},
                   {PauliString(k): SampleSet.from_json_dict(v) for k, v in d.get("imag", {}).items()})


def collect_samples(state: StateVector, paulis, *, shots_ansatz: int | None = None,
                    shots_term: int | None = None, seed: int = 0, imag: bool = False,
                    stream: str = "") -> Dataset:
    """Run the ansatz histogram and every off-diagonal term's measurement circuit.

    ``shots_* = None`` gives exact-probability mode. Each circuit draws from
    its own RNG stream keyed by ``(seed, stream, circuit tag)``.
    """
    def draw(v: StateVector, shots, tag):
        if shots is None:
            return SampleSet.exact(v, tag)
        return sample(v, shots, rng_stream(seed, stream, tag), tag)

    ansatz = draw(state, shots_ansatz, "ansatz")
    real, im = {}, {}
    for P in paulis:
        if P.is_diagonal:
            continue
        variants = (REAL, IMAG) if imag else (REAL,)
        for variant in variants:
            plan = plan_measurement(P, variant)
            out = run_circuit(plan.circuit_suffix, state)
            (real if variant == REAL else im)[P] = draw(out, shots_term, plan.tag)
    return Dataset(ansatz, real, im)
