"""Quadtree detection of isolated aggregates that may collide within a step."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import ndtri

from .bessel import bessel_index, moment_coefficients
from .errors import DomainError
from .model import FloatArray, SystemParams


@dataclass(frozen=True)
class ClusterCell:
    """A square quadtree cell and the second-moment data of the particles in it.

    ``members`` index the particle arrays the detection ran on; ``ids`` are
    the corresponding particle ids, in the same (ascending id) order.
    """

    x0: float
    y0: float
    width: float
    members: np.ndarray
    ids: np.ndarray
    Y: float
    mass: float
    nu: float
    alpha: float
    beta: float
    depth: int = 0

    @property
    def s2(self) -> float:
        """Squared cell diagonal."""
        return 2.0 * self.width**2

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x0 + self.width, self.y0 + self.width)

    def __len__(self):
        return len(self.members)


def inv_normal_cdf(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    return float(ndtri(p))


def make_cell(positions, masses, members, params: SystemParams, x0: float, y0: float, width: float,
              depth: int = 0, ids=None) -> ClusterCell:
    members = np.asarray(members, dtype=np.int64)
    x = np.asarray(positions, dtype=np.float64)[members]
    m = np.asarray(masses, dtype=np.float64)[members]
    M = float(m.sum())
    d = x - (m @ x) / M
    Y = float(m @ np.einsum("ij,ij->i", d, d) / M)
    coef = moment_coefficients(m, params)
    ids = members if ids is None else np.asarray(ids)[members]
    return ClusterCell(x0, y0, width, members, ids, Y, M, bessel_index(m, params),
                       coef.alpha, coef.beta, depth)


def is_separated(cell: ClusterCell, eta: float = 0.1) -> bool:
    return cell.Y / cell.s2 < eta


def is_collidable(cell: ClusterCell, dt: float, p: float, params: SystemParams | None = None) -> bool:
    """Negative index and a below-p-quantile moment path reaches zero within dt.

    ``params`` is accepted for interface symmetry; alpha and beta are cached on the cell.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not cell.nu < 0:
        return False
    q = inv_normal_cdf(p)
    return cell.Y + cell.alpha * dt + 2.0 * cell.beta * math.sqrt(cell.Y) * q * math.sqrt(dt) < 0


def root_square(positions) -> tuple[float, float, float]:
    """(x0, y0, width) of the bounding square, enlarged by 1% about its centre."""
    x = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    lo, hi = x.min(axis=0), x.max(axis=0)
    centre = 0.5 * (lo + hi)
    w = float((hi - lo).max()) * 1.01
    if w == 0.0:
        w = max(1e-12, 1e-12 * float(np.abs(centre).max()))
    return float(centre[0] - 0.5 * w), float(centre[1] - 0.5 * w), w


@numba.njit(cache=True)
def _walk(x, m, order, x0, y0, w, dt, eta, q, chi, mu_tilde, gamma, max_depth):
    """Depth-first quadtree walk; returns kept cells as (start, end) ranges of ``idx`` plus cell data."""
    n = len(order)
    idx = order.copy()
    buf = np.empty(n, dtype=np.int64)
    c = gamma * chi / (4.0 * mu_tilde)
    sq_dt = math.sqrt(dt)
    # stack rows: start, end, depth ; float stack: x0, y0, w
    st_i = np.empty((4 * max_depth + 8, 3), dtype=np.int64)
    st_f = np.empty((4 * max_depth + 8, 3))
    st_i[0, 0] = 0
    st_i[0, 1] = n
    st_i[0, 2] = 0
    st_f[0, 0] = x0
    st_f[0, 1] = y0
    st_f[0, 2] = w
    top = 1
    out_i = np.empty((n, 3), dtype=np.int64)
    out_f = np.empty((n, 8))
    n_out = 0
    counts = np.empty(4, dtype=np.int64)
    while top > 0:
        top -= 1
        a = st_i[top, 0]
        b = st_i[top, 1]
        depth = st_i[top, 2]
        cx0 = st_f[top, 0]
        cy0 = st_f[top, 1]
        width = st_f[top, 2]
        k = b - a
        if k < 2:
            continue
        M = 0.0
        Q = 0.0
        sx = 0.0
        sy = 0.0
        for t in range(a, b):
            j = idx[t]
            M += m[j]
            Q += m[j] * m[j]
            sx += m[j] * x[j, 0]
            sy += m[j] * x[j, 1]
        xc = sx / M
        yc = sy / M
        Y = 0.0
        for t in range(a, b):
            j = idx[t]
            dx = x[j, 0] - xc
            dy = x[j, 1] - yc
            Y += m[j] * (dx * dx + dy * dy)
        Y /= M
        nu = (k - 2) - c * (M * M - Q)
        alpha = 4.0 * mu_tilde * (k - 1) / M - gamma * chi * (M - Q / M)
        beta = math.sqrt(2.0 * mu_tilde / M)
        separated = Y / (2.0 * width * width) < eta
        if separated and nu < 0.0 and Y + alpha * dt + 2.0 * beta * math.sqrt(Y) * q * sq_dt < 0.0:
            out_i[n_out, 0] = a
            out_i[n_out, 1] = b
            out_i[n_out, 2] = depth
            out_f[n_out, 0] = cx0
            out_f[n_out, 1] = cy0
            out_f[n_out, 2] = width
            out_f[n_out, 3] = Y
            out_f[n_out, 4] = M
            out_f[n_out, 5] = nu
            out_f[n_out, 6] = alpha
            out_f[n_out, 7] = beta
            n_out += 1
            continue
        if k <= 2 or depth >= max_depth:
            continue
        half = 0.5 * width
        xm = cx0 + half
        ym = cy0 + half
        counts[:] = 0
        for t in range(a, b):
            j = idx[t]
            counts[(1 if x[j, 0] >= xm else 0) + (2 if x[j, 1] >= ym else 0)] += 1
        starts = np.empty(4, dtype=np.int64)
        pos = a
        for qd in range(4):
            starts[qd] = pos
            pos += counts[qd]
        fill = starts.copy()
        for t in range(a, b):
            j = idx[t]
            qd = (1 if x[j, 0] >= xm else 0) + (2 if x[j, 1] >= ym else 0)
            buf[fill[qd]] = j
            fill[qd] += 1
        for t in range(a, b):
            idx[t] = buf[t]
        # push NE, NW, SE, SW so that SW is visited first
        for qd in range(3, -1, -1):
            st_i[top, 0] = starts[qd]
            st_i[top, 1] = starts[qd] + counts[qd]
            st_i[top, 2] = depth + 1
            st_f[top, 0] = cx0 + (qd % 2) * half
            st_f[top, 1] = cy0 + (qd // 2) * half
            st_f[top, 2] = half
            top += 1
    return idx, out_i[:n_out], out_f[:n_out]


def detect_clusters(positions, masses, dt: float, params: SystemParams, *, eta: float = 0.1,
                    p: float = 0.01, ids=None, max_depth: int = 40) -> list[ClusterCell]:
    """Separated and collidable quadtree cells, in depth-first (SW, SE, NW, NE) order.

    A cell is kept when separated and collidable, otherwise split into four
    when it holds more than two particles, otherwise dropped.
    """
    x = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 2)
    m = np.ascontiguousarray(masses, dtype=np.float64)
    if len(m) < 2:
        raise DomainError("cluster detection needs at least two particles")
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not 0 < eta:
        raise DomainError("eta must be positive")
    q = inv_normal_cdf(p)
    pid = np.arange(len(m)) if ids is None else np.asarray(ids, dtype=np.int64)
    order = np.argsort(pid, kind="stable").astype(np.int64)  # id order makes sums independent of input order
    x0, y0, w = root_square(x)
    idx, cells_i, cells_f = _walk(x, m, order, x0, y0, w, float(dt), float(eta), q, params.chi,
                                  params.mu_tilde, params.gamma, int(max_depth))
    found = []
    for (a, b, depth), (cx0, cy0, width, Y, M, nu, alpha, beta) in zip(cells_i, cells_f):
        members = idx[a:b]
        members = members[np.argsort(pid[members], kind="stable")]
        found.append(ClusterCell(float(cx0), float(cy0), float(width), members, pid[members], float(Y),
                                 float(M), float(nu), float(alpha), float(beta), int(depth)))
    return found
