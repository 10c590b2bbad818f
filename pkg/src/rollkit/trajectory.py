"""Uniformly indexed time series with named channels."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

REDUCED_COLUMNS = ("t", "theta", "p_theta", "energy", "ell")
TAU_COLUMNS = ("tau", "theta", "p_tilde", "t", "p_theta", "energy", "ell")
FULL_COLUMNS = ("t", "theta", "psi", "phi", "x", "y", "theta_dot", "psi_dot", "phi_dot",
                "x_dot", "y_dot", "energy", "ell", "res_notwist", "res_noslip")


@dataclass
class Trajectory:
    columns: tuple
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))
        self._index = {name: i for i, name in enumerate(self.columns)}

    def __getitem__(self, name):
        return self.data[:, self._index[name]]

    def __contains__(self, name):
        return name in self._index

    def __len__(self):
        return self.data.shape[0]

    @property
    def t(self):
        return self[self.columns[0]]

    def head(self, n):
        return Trajectory(self.columns, self.data[:n].copy(), dict(self.meta))

    def row(self, i):
        return dict(zip(self.columns, self.data[i]))

    def to_csv(self, fh, comment=None):
        """Write with a mandatory header row; numbers in 17-significant-digit scientific notation."""
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(",".join(self.columns) + "\n")
        for row in self.data:
            fh.write(",".join(format_number(v) for v in row) + "\n")

    def to_csv_string(self, comment=None):
        buf = io.StringIO()
        self.to_csv(buf, comment)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path):
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        columns = tuple(lines[0].strip().split(","))
        data = np.array([[float(v) for v in ln.strip().split(",")] for ln in lines[1:] if ln.strip()])
        return cls(columns, data.reshape(-1, len(columns)))


def format_number(v):
    return f"{float(v):.16e}"
