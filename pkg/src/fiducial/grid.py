"""Rectangular midpoint grids over a bounded parameter box."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ParameterGrid:
    """Cell-centred grid on ``prod_j [lo_j, hi_j]``.

    Axis ``j`` is cut into ``counts[j]`` equal cells and the nodes are the
    cell midpoints, so ``cell_volume * size`` is exactly the box volume and a
    plain sum over nodes is the midpoint quadrature rule.  Flattened nodes
    are in C order (last axis varies fastest).
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        counts = tuple(int(c) for c in self.counts)
        if not (len(lo) == len(hi) == len(counts)) or len(lo) == 0:
            raise ValueError("lo, hi and counts must have the same nonzero length")
        for j, (a, b, c) in enumerate(zip(lo, hi, counts)):
            if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
                raise ValueError(f"axis {j}: need finite lo < hi, got [{a}, {b}]")
            if c < 1:
                raise ValueError(f"axis {j}: count must be positive, got {c}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_box(cls, lo: Sequence[float], hi: Sequence[float],
                 counts: int | Sequence[int]) -> "ParameterGrid":
        if np.isscalar(counts):
            counts = (int(counts),) * len(lo)
        return cls(tuple(lo), tuple(hi), tuple(counts))

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def widths(self) -> np.ndarray:
        """Per-axis cell width."""
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.counts)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def box_volume(self) -> float:
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))

    def axis_nodes(self, j: int) -> np.ndarray:
        h = (self.hi[j] - self.lo[j]) / self.counts[j]
        return self.lo[j] + h * (np.arange(self.counts[j]) + 0.5)

    def axis_edges(self, j: int) -> np.ndarray:
        return np.linspace(self.lo[j], self.hi[j], self.counts[j] + 1)

    @property
    def nodes(self) -> np.ndarray:
        """All nodes as an array of shape ``(size, ndim)``."""
        axes = [self.axis_nodes(j) for j in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def refined(self, factor: int = 2) -> "ParameterGrid":
        return ParameterGrid(self.lo, self.hi, tuple(c * factor for c in self.counts))

    def coarsened(self, max_count: int) -> "ParameterGrid":
        return ParameterGrid(self.lo, self.hi, tuple(min(c, max_count) for c in self.counts))

    def contains(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.all((xi >= np.array(self.lo)) & (xi <= np.array(self.hi)), axis=-1)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "counts": list(self.counts)}
