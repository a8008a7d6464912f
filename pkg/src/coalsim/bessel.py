"""Squared-Bessel index algebra for cluster second moments.

The normalised second moment of an N-particle (sub)system obeys
dY = alpha dt + 2 beta sqrt(Y) dW between collisions; after the time change
t -> t / beta^2 it is a squared Bessel process whose index decides whether
the origin (total collision) is reached.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError
from .model import SystemParams


@dataclass(frozen=True)
class MomentCoefficients:
    alpha: float
    beta: float


class OriginClass(enum.Enum):
    ENTRANCE = "entrance"
    REGULAR = "regular"
    ABSORBING = "absorbing"


def _mass_terms(masses: ArrayLike) -> tuple[int, float, float]:
    m = np.asarray(masses, dtype=np.float64).ravel()
    if m.size < 1 or np.any(m <= 0):
        raise DomainError("need at least one particle, all with positive mass")
    M = float(m.sum())
    return m.size, M, float(1.0 - np.sum((m / M) ** 2))


def moment_coefficients(masses: ArrayLike, params: SystemParams) -> MomentCoefficients:
    n, M, spread = _mass_terms(masses)
    alpha = 4.0 * params.mu_tilde * (n - 1) / M - params.gamma * params.chi * M * spread
    return MomentCoefficients(alpha=alpha, beta=math.sqrt(2.0 * params.mu_tilde / M))


def bessel_index(masses: ArrayLike, params: SystemParams) -> float:
    n, M, spread = _mass_terms(masses)
    return (n - 2) - params.gamma * params.chi * M * M / (4.0 * params.mu_tilde) * spread


def pks_index(n: int, chi: float, mu: float, M: float) -> float:
    """Closed form of the index for n equal masses under the PKS scaling."""
    return (n - 1) * (1.0 - chi * M / (8.0 * math.pi * mu)) - 1.0


def classify_origin(nu: float) -> OriginClass:
    if not math.isfinite(nu):
        raise DomainError("index must be finite")
    if nu >= 0:
        return OriginClass.ENTRANCE
    if nu > -1:
        return OriginClass.REGULAR
    return OriginClass.ABSORBING


def index_after_merge(full_masses: ArrayLike, cluster, params: SystemParams) -> tuple[float, float, float]:
    """Indices before the merge, after it, and of the merging cluster.

    ``cluster`` is an index array or boolean mask into ``full_masses``.
    """
    m = np.asarray(full_masses, dtype=np.float64).ravel()
    mask = np.zeros(m.size, dtype=bool)
    mask[np.asarray(cluster)] = True
    n_in = int(mask.sum())
    if n_in == 0:
        raise DomainError("cluster must be non-empty")
    if n_in == m.size:
        raise DomainError("cluster must be a strict subset: a one-particle system has no index")
    merged = np.append(m[~mask], m[mask].sum())
    return bessel_index(m, params), bessel_index(merged, params), bessel_index(m[mask], params)


def sample_hitting_time(Y0: float, nu: float, beta: float, rng: np.random.Generator, size=None):
    """Absorption time of dY = alpha dt + 2 beta sqrt(Y) dW started at Y0.

    In the rescaled clock the hitting time of zero is Y0 / (2U) with
    U ~ Gamma(|nu|, 1); physical time divides by beta^2.
    """
    if nu >= 0:
        raise DomainError(f"origin is not reachable for index {nu} >= 0")
    if Y0 < 0:
        raise DomainError("Y0 must be nonnegative")
    if Y0 == 0:
        return 0.0 if size is None else np.zeros(size)
    u = rng.gamma(abs(nu), 1.0, size=size)
    return Y0 / (2.0 * u) / beta**2


@numba.njit(cache=True)
def _besq_paths(Y0, nu, dt, n_steps, n_paths, rng, record_path):
    drift = 2.0 * (nu + 1.0) * dt
    sq = math.sqrt(dt)
    times = np.full(n_paths, np.nan)
    path = np.empty(n_steps + 1 if record_path else 1)
    path[0] = Y0
    for p in range(n_paths):
        y = Y0
        if y <= 0.0:
            times[p] = 0.0
            continue
        for k in range(1, n_steps + 1):
            y += drift + 2.0 * math.sqrt(y) * sq * rng.standard_normal()
            if y <= 0.0:
                y = 0.0
            if record_path and p == 0:
                path[k] = y
            if y == 0.0:
                times[p] = k * dt
                if record_path and p == 0:
                    path[k + 1:] = 0.0
                break
    return path, times


def simulate_squared_bessel_oracle(Y0: float, nu: float, dt: float, T_max: float,
                                   rng: np.random.Generator, n_paths: int | None = None):
    """Euler-Maruyama for dY = 2(nu+1) dt + 2 sqrt(Y) dW, absorbed at zero.

    Test oracle only. With ``n_paths=None`` returns ``(path, time_or_None)`` for a
    single path; otherwise returns an array of absorption times with NaN for
    paths still alive at ``T_max``.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    n_steps = int(math.ceil(T_max / dt))
    if n_paths is None:
        path, times = _besq_paths(float(Y0), float(nu), float(dt), n_steps, 1, rng, True)
        t = times[0]
        return path, (None if math.isnan(t) else float(t))
    _, times = _besq_paths(float(Y0), float(nu), float(dt), n_steps, int(n_paths), rng, False)
    return times


# --- subsystem corrections -------------------------------------------------

def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).reshape(-1, 2)


def subsystem_drift_exact3(x1, x2, x3, m1: float, m2: float, m3: float, chi: float,
                           gamma: float = 1.0 / (2.0 * math.pi)) -> float:
    """dt-coefficient added to the pair moment m1 m2/(m1+m2)^2 |X1-X2|^2 by a third particle."""
    x1, x2, x3 = (np.asarray(v, dtype=np.float64).reshape(2) for v in (x1, x2, x3))
    r1, r2 = x1 - x3, x2 - x3
    n1, n2 = r1 @ r1, r2 @ r2
    if n1 == 0 or n2 == 0:
        raise DomainError("third particle coincides with a pair member")
    pull = -chi * m3 * gamma * (r1 / n1 - r2 / n2)
    return float(2.0 * m1 * m2 / (m1 + m2) ** 2 * (x1 - x2) @ pull)


def subsystem_drift_exact(cluster_x, cluster_m, out_x, out_m, chi: float,
                          gamma: float = 1.0 / (2.0 * math.pi)) -> float:
    """Exact drift of the cluster moment due to outsiders: (2/M') sum m_j d_j . (F_j - F_cm)."""
    cx, cm = _as_points(cluster_x), np.asarray(cluster_m, dtype=np.float64)
    ox, om = _as_points(out_x), np.asarray(out_m, dtype=np.float64)
    diff = cx[:, None, :] - ox[None, :, :]
    r2 = np.einsum("jik,jik->ji", diff, diff)
    if np.any(r2 == 0):
        raise DomainError("outsider coincides with a cluster member")
    force = -chi * gamma * np.einsum("i,jik->jk", om, diff / r2[..., None])
    M = cm.sum()
    xcm = cm @ cx / M
    fcm = cm @ force / M
    d = cx - xcm
    return float(2.0 / M * np.sum(cm * np.einsum("jk,jk->j", d, force - fcm)))


def subsystem_drift_monopole(cluster_x, cluster_m, out_x, out_m, chi: float,
                             gamma: float = 1.0 / (2.0 * math.pi)) -> float:
    """Leading tidal correction -2 chi sum_i m_i V''(r_i) sum_{j<k} Y_jk cos(2 theta_ijk).

    Y_jk = m_j m_k |X_j - X_k|^2 / M'^2 is the pair's share of the cluster
    moment, r_i the distance from the pair centre to outsider i and theta_ijk
    the angle between X_j - X_k and that line. V''(r) = -gamma / r^2.
    """
    cx, cm = _as_points(cluster_x), np.asarray(cluster_m, dtype=np.float64)
    ox, om = _as_points(out_x), np.asarray(out_m, dtype=np.float64)
    if len(cm) < 2:
        raise DomainError("cluster needs at least two particles")
    M = cm.sum()
    j, k = np.triu_indices(len(cm), 1)
    sep = cx[j] - cx[k]
    sep2 = np.einsum("pk,pk->p", sep, sep)
    weight = cm[j] * cm[k] * sep2 / M**2
    centre = (cm[j, None] * cx[j] + cm[k, None] * cx[k]) / (cm[j] + cm[k])[:, None]
    line = centre[:, None, :] - ox[None, :, :]
    r2 = np.einsum("pik,pik->pi", line, line)
    if np.any(r2 == 0):
        raise DomainError("outsider coincides with a pair centre")
    dot = np.einsum("pk,pik->pi", sep, line)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos2 = np.where(sep2[:, None] > 0, 2.0 * dot**2 / (sep2[:, None] * r2) - 1.0, 0.0)
    v2 = -gamma / r2
    return float(-2.0 * chi * np.sum(weight[:, None] * om[None, :] * v2 * cos2))
