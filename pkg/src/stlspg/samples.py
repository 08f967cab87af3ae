"""Space-time sample index sets."""
from __future__ import annotations

import csv

import numpy as np

__all__ = ["SampleSet"]


class SampleSet:
    """Sampled ``(space, time)`` entries of an ``(N_s, N_t)`` residual.

    Time indices are zero-based columns, i.e. column ``q`` holds ``r^{q+1}``.
    Build with :meth:`pairs` for an explicit list or :meth:`product` for
    ``s x t``; product sets are stored ordered by column-major vec index.
    """

    def __init__(self, space, time, spatial=None, temporal=None):
        self.space = np.asarray(space, dtype=int).ravel()
        self.time = np.asarray(time, dtype=int).ravel()
        if self.space.shape != self.time.shape:
            raise ValueError("space and time index arrays differ in length")
        self.spatial = None if spatial is None else np.asarray(spatial, dtype=int)
        self.temporal = None if temporal is None else np.asarray(temporal, dtype=int)
        key = self.time.astype(np.int64) * (int(self.space.max(initial=0)) + 1) + self.space
        if np.unique(key).size != key.size:
            raise ValueError("duplicate sample indices")
        if np.any(self.space < 0) or np.any(self.time < 0):
            raise ValueError("negative sample index")

    @classmethod
    def pairs(cls, space, time):
        return cls(space, time)

    @classmethod
    def product(cls, spatial, temporal):
        s = np.asarray(spatial, dtype=int)
        t = np.asarray(temporal, dtype=int)
        if np.unique(s).size != s.size or np.unique(t).size != t.size:
            raise ValueError("duplicate sample indices")
        ss, tt = np.sort(s), np.sort(t)
        S, T = np.meshgrid(ss, tt)
        return cls(S.ravel(), T.ravel(), spatial=s, temporal=t)

    @classmethod
    def full(cls, n_space, n_time):
        return cls.product(np.arange(n_space), np.arange(n_time))

    @property
    def is_product(self):
        return self.spatial is not None

    @property
    def size(self):
        return self.space.size

    def __len__(self):
        return self.size

    def vec_index(self, n_space):
        return self.space + n_space * self.time

    def times(self):
        """Distinct sampled time columns (sorted)."""
        return np.unique(self.time)

    def grouped(self):
        """Yield ``(q, positions, space_rows)`` per distinct time column."""
        order = np.argsort(self.time, kind="stable")
        tq = self.time[order]
        cuts = np.flatnonzero(np.diff(tq)) + 1
        for grp in np.split(order, cuts):
            if grp.size:
                yield int(self.time[grp[0]]), grp, self.space[grp]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["space", "time"])
            for i, q in zip(self.space, self.time):
                w.writerow([int(i), int(q) + 1])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=int, ndmin=2)
        return cls(data[:, 0], data[:, 1] - 1)
