"""Hardware-efficient RX/RZZ ansatz."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import RX, RZZ, Circuit


@dataclass(frozen=True)
class AnsatzSpec:
    n: int
    layers: int = 1
    boundary: str = "open"

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def pairs(self) -> list[tuple[int, int]]:
        pairs = [(i, i + 1) for i in range(self.n - 1)]
        if self.boundary == "periodic" and self.n > 2:
            pairs.append((self.n - 1, 0))
        return pairs

    @property
    def num_params(self) -> int:
        return self.layers * (self.n + len(self.pairs))

    def initial_params(self, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
        return rng.uniform(-scale, scale, size=self.num_params)


def build_ansatz(spec: AnsatzSpec, params) -> Circuit:
    """Per layer: RX on every qubit, then RZZ on each neighbouring pair."""
    theta = np.asarray(params, dtype=float).ravel()
    if theta.size != spec.num_params:
        raise ValueError(f"expected {spec.num_params} parameters, got {theta.size}")
    c = Circuit(spec.n)
    k = 0
    for _ in range(spec.layers):
        for q in range(spec.n):
            c.append(RX(q, theta[k]))
            k += 1
        for a, b in spec.pairs:
            c.append(RZZ(a, b, theta[k]))
            k += 1
    return c
