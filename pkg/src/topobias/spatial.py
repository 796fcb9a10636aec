"""Uniform grid index for fixed-radius near-neighbour pair enumeration."""

from __future__ import annotations

import numpy as np

# forward half of the 3x3 stencil; each unordered cell pair is visited once
_FORWARD = ((0, 0), (1, 0), (-1, 1), (0, 1), (1, 1))


class GridIndex:
    """Buckets points into square cells of side ``cell``.

    Any pair closer than ``cell`` lies in the same or an adjacent cell, so a
    query at radius ``r <= cell`` only compares points in the 3x3 stencil.
    """

    def __init__(self, coords: np.ndarray, cell: float):
        if not cell > 0:
            raise ValueError("cell size must be positive")
        self.coords = np.asarray(coords, dtype=np.float64)
        self.cell = float(cell)
        keys = np.floor(self.coords / self.cell).astype(np.int64)
        self._buckets: dict[tuple[int, int], np.ndarray] = {}
        if len(keys):
            order = np.lexsort((keys[:, 1], keys[:, 0]))
            sk = keys[order]
            breaks = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
            for chunk in np.split(order, breaks):
                cx, cy = keys[chunk[0]]
                self._buckets[(int(cx), int(cy))] = np.sort(chunk)

    def pairs_within(self, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All pairs ``(i, j, d)`` with ``i < j`` and ``d(i, j) < r``.

        Output is sorted lexicographically by ``(i, j)``.
        """
        if r > self.cell:
            raise ValueError(f"radius {r} exceeds grid cell size {self.cell}")
        xy = self.coords
        out_i, out_j, out_d = [], [], []
        for (cx, cy), members in self._buckets.items():
            for dx, dy in _FORWARD:
                other = self._buckets.get((cx + dx, cy + dy))
                if other is None:
                    continue
                diff = xy[members][:, None, :] - xy[other][None, :, :]
                d = np.hypot(diff[..., 0], diff[..., 1])
                if dx == 0 and dy == 0:
                    a, b = np.nonzero(np.triu(d < r, k=1))
                else:
                    a, b = np.nonzero(d < r)
                if len(a):
                    out_i.append(members[a])
                    out_j.append(other[b])
                    out_d.append(d[a, b])
        if not out_i:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty.copy(), np.empty(0)
        i = np.concatenate(out_i)
        j = np.concatenate(out_j)
        d = np.concatenate(out_d)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        order = np.lexsort((hi, lo))
        return lo[order], hi[order], d[order]
