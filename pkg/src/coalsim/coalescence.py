"""Second-moment updates of detected clusters and inelastic merges."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import MERGED, FloatArray, SystemState

EVENT_COLUMNS = ["t", "merged_id", "mass", "x", "y", "n_parents", "nu_cluster", "parent_ids"]


@dataclass
class MergeEvent:
    time: float
    merged_id: int
    mass: float
    position: FloatArray
    parent_ids: np.ndarray
    parent_masses: np.ndarray
    parent_positions: FloatArray
    nu_cluster: float = math.nan

    @property
    def n_parents(self) -> int:
        return len(self.parent_ids)

    def row(self) -> list:
        return [repr(float(self.time)), int(self.merged_id), repr(float(self.mass)),
                repr(float(self.position[0])), repr(float(self.position[1])), self.n_parents,
                repr(float(self.nu_cluster)), " ".join(str(int(i)) for i in self.parent_ids)]


def cluster_noise_increment(positions, masses, dW, Y: float | None = None) -> float:
    """(1/sqrt(M' Y)) sum_i sqrt(m_i) (X_i - X_cm) . dW_i over the cluster members.

    ``positions`` are the members' positions at the start of the step and
    ``dW`` their accumulated Wiener increments.
    """
    x = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    m = np.asarray(masses, dtype=np.float64)
    w = np.asarray(dW, dtype=np.float64).reshape(-1, 2)
    M = float(m.sum())
    d = x - (m @ x) / M
    if Y is None:
        Y = float(m @ np.einsum("ij,ij->i", d, d) / M)
    if not Y > 0:
        raise DomainError("noise increment undefined for a zero second moment")
    return float(np.sqrt(m) @ np.einsum("ij,ij->i", d, w) / math.sqrt(M * Y))


def cluster_moment_update(Y, alpha, beta, dt: float, dW_tilde):
    """Euler increment alpha dt + 2 beta sqrt(Y) dW~ of the cluster second moment (scalars or arrays)."""
    if np.ndim(Y) == 0:
        return alpha * dt + 2.0 * beta * math.sqrt(max(Y, 0.0)) * dW_tilde
    return alpha * dt + 2.0 * beta * np.sqrt(np.maximum(Y, 0.0)) * dW_tilde


def should_merge(Y: float, dY: float, rule: str = "zero") -> bool:
    if Y <= 0:
        return True
    if rule == "zero":
        return Y + dY <= 0
    if rule == "decrease":
        return dY <= 0
    raise DomainError(f"unknown merge rule {rule!r}")


def merge_clusters(state: SystemState, groups, nu_clusters=None) -> tuple[SystemState, list[MergeEvent]]:
    """Replace each group of particle indices by one particle at its centre of mass.

    Groups must be disjoint. The merged particle takes the summed mass and
    composition, species tag MERGED and a fresh id. ``state.time`` is the
    time stamped on the events.
    """
    groups = [np.asarray(g, dtype=np.int64) for g in groups]
    if not groups:
        return state, []
    remove = np.zeros(state.n, dtype=bool)
    for g in groups:
        if g.size < 1:
            raise DomainError("cannot merge an empty group")
        if remove[g].any():
            raise DomainError("merge groups overlap")
        remove[g] = True

    next_id = int(state.next_id)
    parents = dict(state.parents)
    new_ids, new_pos, new_mass, new_comp, events = [], [], [], [], []
    for k, g in enumerate(groups):
        m = state.masses[g]
        x = state.positions[g]
        M = float(m.sum())
        com = (m @ x) / M
        pid = state.ids[g]
        new_ids.append(next_id)
        new_pos.append(com)
        new_mass.append(M)
        new_comp.append(state.composition[g].sum(axis=0))
        parents[next_id] = tuple(int(i) for i in pid)
        nu = math.nan if nu_clusters is None else float(nu_clusters[k])
        events.append(MergeEvent(state.time, next_id, M, com, pid.copy(), m.copy(), x.copy(), nu))
        next_id += 1

    keep = ~remove
    merged = SystemState(
        ids=np.concatenate([state.ids[keep], new_ids]),
        positions=np.concatenate([state.positions[keep], np.array(new_pos).reshape(-1, 2)]),
        masses=np.concatenate([state.masses[keep], new_mass]),
        species=np.concatenate([state.species[keep], np.full(len(groups), MERGED)]),
        params=state.params,
        composition=np.concatenate([state.composition[keep], np.array(new_comp)]),
        time=state.time,
        step=state.step,
        next_id=next_id,
        parents=parents,
    )
    return merged, events


def merge_cluster(state: SystemState, members) -> tuple[SystemState, MergeEvent]:
    new, events = merge_clusters(state, [members])
    return new, events[0]


def apply_coalescence(moved: SystemState, start_positions, ledger, clusters, dt: float,
                      rule: str = "zero") -> tuple[SystemState, list[MergeEvent]]:
    """Advance each cluster's second moment with the step's noise and merge those that hit zero.

    ``moved`` holds the post-move particles in the same order as
    ``start_positions`` (the positions the clusters were detected on).
    Clusters are processed in the order given.
    """
    groups, nus = [], []
    x_start = np.asarray(start_positions, dtype=np.float64)
    for cell in clusters:
        idx = cell.members
        if cell.Y > 0:
            dWt = cluster_noise_increment(x_start[idx], moved.masses[idx], ledger.dW[idx], cell.Y)
            dY = cluster_moment_update(cell.Y, cell.alpha, cell.beta, dt, dWt)
        else:
            dY = 0.0
        if should_merge(cell.Y, dY, rule):
            groups.append(idx)
            nus.append(cell.nu)
    return merge_clusters(moved, groups, nus)


def write_events(events, path, append: bool = False) -> None:
    mode = "a" if append else "w"
    try:
        with open(path, mode, newline="") as fh:
            w = csv.writer(fh)
            if not append or fh.tell() == 0:
                w.writerow(EVENT_COLUMNS)
            for e in events:
                w.writerow(e.row())
    except OSError as exc:
        raise OSError(f"cannot write events to {path}: {exc}") from exc


def read_events(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({
            "t": float(r["t"]), "merged_id": int(r["merged_id"]), "mass": float(r["mass"]),
            "position": np.array([float(r["x"]), float(r["y"])]), "n_parents": int(r["n_parents"]),
            "nu_cluster": float(r["nu_cluster"]),
            "parent_ids": [int(i) for i in r["parent_ids"].split()],
        })
    return out
