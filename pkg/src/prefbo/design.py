"""Space-filling initial designs over a bounding box."""

from __future__ import annotations

import numpy as np

__all__ = ["latin_hypercube"]


def latin_hypercube(dim: int, n: int, box, rng) -> np.ndarray:
    """Draw ``n`` Latin-hypercube points inside ``box``.

    Each dimension is split into ``n`` equal strata and every stratum
    receives exactly one point, placed uniformly at random inside it.
    ``box`` is a (dim, 2) array of (low, high) pairs; zero-width
    dimensions yield the fixed coordinate.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    box = np.asarray(box, dtype=float)
    if box.shape != (dim, 2):
        raise ValueError(f"box must have shape ({dim}, 2)")
    u = rng.random((n, dim))
    cells = np.stack([rng.permutation(n) for _ in range(dim)], axis=1)
    unit = (cells + u) / n
    low, high = box[:, 0], box[:, 1]
    return low + unit * (high - low)
