"""Moment tracking, theoretical predictors and CSV/snapshot output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError
from .model import MERGED, SystemState, system_second_moment

TWO_PI = 2.0 * math.pi


@dataclass
class MomentRecord:
    time: float
    Y: float
    F_species: np.ndarray
    n_particles: int
    atoms: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def F_total(self) -> float:
        return float(np.sum(self.F_species))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def atom_mass(self) -> float:
        return float(np.sum(self.atoms))


def critical_mass(mu: float, chi: float) -> float:
    return 8.0 * math.pi * mu / chi


def predicted_slope_regularized(M: float, mu: float, chi: float, atom_masses: Sequence[float] = ()) -> float:
    """dY/dt of the normalised moment for a density plus point masses."""
    atoms = np.asarray(atom_masses, dtype=np.float64)
    if atoms.sum() > M * (1 + 1e-12):
        raise DomainError("atom masses exceed the total mass")
    M_bar = M - atoms.sum()
    return 4.0 * mu * M_bar / M - chi * M / TWO_PI * (1.0 - np.sum((atoms / M) ** 2))


def mpks_moment_rate(chi: float, mus: Sequence[float], masses: Sequence[float]) -> float:
    """d/dt of the total unnormalised second moment of the multispecies system."""
    mu = np.asarray(mus, dtype=np.float64)
    Ms = np.asarray(masses, dtype=np.float64)
    if np.any(Ms <= 0):
        raise DomainError("species masses must be positive")
    M = Ms.sum()
    return float(np.sum((4.0 * mu - chi * M / TWO_PI) * Ms))


def mpks_blowup_condition(chi: float, mus: Sequence[float], masses: Sequence[float]) -> bool:
    return mpks_moment_rate(chi, mus, masses) < 0


def mpks_m_max(chi: float, mu1: float, mu2: float) -> tuple[float, float]:
    """Largest component masses on the zero-rate curve of a two-species system."""
    if not mu1 > 2.0 * mu2:
        raise DomainError("component masses on the curve exist only when mu1 > 2 mu2")
    s = TWO_PI / chi
    return s * (mu1 - 2.0 * mu2) * mu1 / (mu1 - mu2), s * mu1 * mu1 / (mu1 - mu2)


def record(state: SystemState, critical: float | None = None) -> MomentRecord:
    """Snapshot of the moments; atoms are merged particles of at least ``critical`` mass."""
    r2 = np.einsum("ij,ij->i", state.positions, state.positions)
    F = state.composition.T @ r2
    atoms = np.zeros(0)
    if critical is not None:
        sel = (state.species == MERGED) & (state.masses >= critical)
        atoms = np.sort(state.masses[sel])[::-1]
    Y = system_second_moment(state.positions, state.masses) if state.n else 0.0
    return MomentRecord(state.time, Y, F, state.n, atoms)


def series_columns(n_species: int) -> list[str]:
    return (["t", "Y_norm", "F_total"] + [f"F_species_{k + 1}" for k in range(n_species)]
            + ["n_particles", "n_atoms", "atom_mass_total"])


def _row(rec: MomentRecord) -> list[str]:
    f = lambda v: "%.17g" % v  # noqa: E731
    return ([f(rec.time), f(rec.Y), f(rec.F_total)] + [f(v) for v in rec.F_species]
            + [str(rec.n_particles), str(rec.n_atoms), f(rec.atom_mass)])


class SeriesWriter:
    """Appends MomentRecords to a CSV file, one row per record."""

    def __init__(self, path, n_species: int):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise OSError(f"cannot open {self.path}: {exc}") from exc
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(series_columns(n_species))

    def write(self, rec: MomentRecord) -> None:
        self._w.writerow(_row(rec))

    def flush(self):
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_series(records: Sequence[MomentRecord], path) -> None:
    n_species = len(records[0].F_species) if records else 1
    with SeriesWriter(path, n_species) as w:
        for rec in records:
            w.write(rec)


def read_series(path) -> dict[str, np.ndarray]:
    """Columns of a time-series CSV as float arrays."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=np.float64).reshape(len(body), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def read_records(path) -> list[MomentRecord]:
    cols = read_series(path)
    species = sorted((c for c in cols if c.startswith("F_species_")), key=lambda c: int(c.rsplit("_", 1)[1]))
    out = []
    for k in range(len(cols["t"])):
        out.append(MomentRecord(cols["t"][k], cols["Y_norm"][k], np.array([cols[c][k] for c in species]),
                                int(cols["n_particles"][k])))
    return out


def snapshot_name(kind: str, time: float) -> str:
    return f"{kind}_t{time:.6f}.txt"


def write_snapshot(field, directory, time: float) -> list[Path]:
    """Density and potential matrices (ny rows by nx columns) named by the step time."""
    from .meanfield import write_grid

    d = Path(directory)
    paths = []
    for kind, values in (("density", field.density), ("potential", field.potential)):
        p = d / snapshot_name(kind, time)
        try:
            write_grid(p, values)
        except OSError as exc:
            raise OSError(f"cannot write snapshot {p}: {exc}") from exc
        paths.append(p)
    return paths


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float
    n: int


def fit_line(t, y, window: tuple[float, float] | None = None) -> LineFit:
    """Ordinary least squares y ~ a + b t, optionally restricted to a closed time window."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if len(t) < 2:
        raise DomainError("need at least two points to fit a line")
    A = np.column_stack([np.ones_like(t), t])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (a + b * t)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return LineFit(float(b), float(a), r2, len(t))
