"""Per-step observable records shared by microscopic and macroscopic runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io


@dataclass
class SeriesRecord:
    """Columnar time series of one run: t, m, dm, lb, h_smoothed.

    ``lb`` is the border length (zero for macroscopic runs, which have no
    lattice) and ``h_smoothed`` the smoothed global field driving the step.
    """

    t: np.ndarray
    m: np.ndarray
    dm: np.ndarray
    lb: np.ndarray
    h_smoothed: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        io.write_table(path, {
            "t": np.asarray(self.t, dtype=np.int64),
            "m": self.m,
            "dm": self.dm,
            "lb": np.asarray(self.lb, dtype=np.int64),
            "h_smoothed": self.h_smoothed,
        })

    @classmethod
    def from_csv(cls, path) -> "SeriesRecord":
        cols = io.read_table(path)
        return cls(
            t=cols["t"].astype(np.int64),
            m=cols["m"],
            dm=cols["dm"],
            lb=cols["lb"].astype(np.int64),
            h_smoothed=cols["h_smoothed"],
            meta={"source": str(path)},
        )
