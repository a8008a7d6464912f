"""Grid-particle interaction field.

Masses are deposited bilinearly on a square-cell grid, the potential solves
the five-point Poisson problem Lap_h C = -P with monopole Dirichlet data,
and the gradient is interpolated back bilinearly. Outside the grid the field
is the monopole of the whole system.

Grid arrays are indexed ``[j, i]``: row ``j`` is the y node, column ``i`` the
x node, so a snapshot file has ``ny`` rows and ``nx`` columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError, SolverError
from .model import FloatArray

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise DomainError("grid needs at least 3 nodes per axis")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise DomainError("empty grid domain")
        hx = (self.x1 - self.x0) / (self.nx - 1)
        hy = (self.y1 - self.y0) / (self.ny - 1)
        if abs(hx - hy) > 1e-9 * max(hx, hy):
            raise DomainError(f"grid cells must be square (dx={hx}, dy={hy})")

    @classmethod
    def square(cls, half_width: float, n: int, center=(0.0, 0.0)) -> "Grid":
        cx, cy = center
        return cls(cx - half_width, cx + half_width, cy - half_width, cy + half_width, n, n)

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def xs(self) -> FloatArray:
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ys(self) -> FloatArray:
        return np.linspace(self.y0, self.y1, self.ny)

    def nodes(self) -> tuple[FloatArray, FloatArray]:
        return np.meshgrid(self.xs, self.ys)

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return ((p[:, 0] >= self.x0) & (p[:, 0] <= self.x1)
                & (p[:, 1] >= self.y0) & (p[:, 1] <= self.y1))

    def shifted(self, offset) -> "Grid":
        ox, oy = offset
        return Grid(self.x0 + ox, self.x1 + ox, self.y0 + oy, self.y1 + oy, self.nx, self.ny)


@dataclass(frozen=True)
class Field:
    grid: Grid
    density: FloatArray
    potential: FloatArray
    cx: FloatArray
    cy: FloatArray
    total_mass: float
    com: FloatArray

    def gradient_at(self, points) -> FloatArray:
        return sample_gradient(points, self)


def _cell_weights(points: np.ndarray, grid: Grid):
    dx = grid.dx
    u = (points[:, 0] - grid.x0) / dx
    v = (points[:, 1] - grid.y0) / dx
    i = np.minimum(np.floor(u).astype(np.int64), grid.nx - 2)
    j = np.minimum(np.floor(v).astype(np.int64), grid.ny - 2)
    return i, j, u - i, v - j


def deposit_mass(positions, masses, grid: Grid) -> FloatArray:
    """Bilinear (cloud-in-cell) mass density; particles outside the grid are skipped."""
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    m = np.asarray(masses, dtype=np.float64)
    inside = grid.contains(p)
    p, m = p[inside], m[inside]
    i, j, fx, fy = _cell_weights(p, grid)
    nx = grid.nx
    base = j * nx + i
    flat_idx = np.concatenate([base, base + 1, base + nx, base + nx + 1])
    weights = np.concatenate([m * (1 - fx) * (1 - fy), m * fx * (1 - fy),
                              m * (1 - fx) * fy, m * fx * fy])
    flat = np.bincount(flat_idx, weights=weights, minlength=grid.nx * grid.ny)
    return flat.reshape(grid.ny, grid.nx) / grid.dx**2


def monopole_boundary(grid: Grid, total_mass: float, com) -> FloatArray:
    """-(M / 2 pi) ln |X - x_cm| on all nodes, distances clamped below by dx/2."""
    X, Y = grid.nodes()
    r = np.hypot(X - com[0], Y - com[1])
    return -total_mass / TWO_PI * np.log(np.maximum(r, 0.5 * grid.dx))


def _apply_neg_laplacian(u: np.ndarray) -> np.ndarray:
    """(4u - neighbour sum) on interior unknowns with zero Dirichlet padding."""
    out = 4.0 * u
    out[1:, :] -= u[:-1, :]
    out[:-1, :] -= u[1:, :]
    out[:, 1:] -= u[:, :-1]
    out[:, :-1] -= u[:, 1:]
    return out


def solve_field(density, grid: Grid, total_mass: float, com, *, tol: float = 1e-8,
                initial=None, max_iter: int | None = None) -> FloatArray:
    """Potential C with Lap_h C = -P inside and monopole data on the boundary.

    Conjugate gradients on the interior unknowns; stops when
    ||Lap_h C + P||_inf <= tol * ||P||_inf (or tol times the boundary-data
    scale when P vanishes).
    """
    com = np.asarray(com, dtype=np.float64)
    if not np.isfinite(com).all():
        raise DomainError("centre of mass must be finite")
    P = np.asarray(density, dtype=np.float64)
    h2 = grid.dx**2
    C = monopole_boundary(grid, total_mass, com) if total_mass != 0 else np.zeros((grid.ny, grid.nx))
    b = h2 * P[1:-1, 1:-1]
    b[0, :] += C[0, 1:-1]
    b[-1, :] += C[-1, 1:-1]
    b[:, 0] += C[1:-1, 0]
    b[:, -1] += C[1:-1, -1]

    scale = np.abs(h2 * P).max()
    if scale == 0:
        scale = np.abs(b).max()
    if scale == 0:
        C[1:-1, 1:-1] = 0.0
        return C
    target = tol * scale

    u = np.zeros_like(b) if initial is None else np.array(initial[1:-1, 1:-1], dtype=np.float64)
    r = b - _apply_neg_laplacian(u)
    d = r.copy()
    rr = float(np.vdot(r, r))
    max_iter = max_iter or 20 * (grid.nx + grid.ny) + 100
    it = 0
    while np.abs(r).max() > target:
        if it >= max_iter:
            raise SolverError(f"CG did not converge in {max_iter} iterations",
                              float(np.abs(r).max() / h2))
        Ad = _apply_neg_laplacian(d)
        curv = float(np.vdot(d, Ad))
        if not (curv > 0 and math.isfinite(curv)):
            raise SolverError("CG broke down (non-positive or non-finite curvature)",
                              float(np.abs(r).max() / h2))
        step = rr / curv
        u += step * d
        r -= step * Ad
        rr_new = float(np.vdot(r, r))
        d *= rr_new / rr
        d += r
        rr = rr_new
        it += 1
        if it % 50 == 0:
            # refresh the recursive residual against rounding drift
            r = b - _apply_neg_laplacian(u)
    C[1:-1, 1:-1] = u
    return C


def discrete_residual(potential, density, grid: Grid) -> FloatArray:
    """Lap_h C + P at interior nodes."""
    C = potential
    lap = (C[1:-1, 2:] + C[1:-1, :-2] + C[2:, 1:-1] + C[:-2, 1:-1] - 4.0 * C[1:-1, 1:-1]) / grid.dx**2
    return lap + np.asarray(density)[1:-1, 1:-1]


def gradient_field(potential, grid: Grid) -> tuple[FloatArray, FloatArray]:
    """Central differences inside, second-order one-sided on the boundary ring."""
    cy, cx = np.gradient(np.asarray(potential, dtype=np.float64), grid.dx, edge_order=2)
    return cx, cy


@numba.njit(cache=True, inline="always")
def grad_at(x, y, cx, cy, x0, y0, x1, y1, dx, total_mass, xcm, ycm):
    """Field gradient at one point: bilinear inside the grid, monopole outside."""
    if x >= x0 and x <= x1 and y >= y0 and y <= y1:
        ny, nx = cx.shape
        u = (x - x0) / dx
        v = (y - y0) / dx
        i = min(int(math.floor(u)), nx - 2)
        j = min(int(math.floor(v)), ny - 2)
        fx = u - i
        fy = v - j
        w00 = (1.0 - fx) * (1.0 - fy)
        w10 = fx * (1.0 - fy)
        w01 = (1.0 - fx) * fy
        w11 = fx * fy
        gx = w00 * cx[j, i] + w10 * cx[j, i + 1] + w01 * cx[j + 1, i] + w11 * cx[j + 1, i + 1]
        gy = w00 * cy[j, i] + w10 * cy[j, i + 1] + w01 * cy[j + 1, i] + w11 * cy[j + 1, i + 1]
        return gx, gy
    rx = x - xcm
    ry = y - ycm
    r2 = rx * rx + ry * ry
    if r2 == 0.0:
        return math.nan, math.nan
    f = -total_mass / (2.0 * math.pi * r2)
    return f * rx, f * ry


@numba.njit(cache=True)
def _grad_many(points, cx, cy, x0, y0, x1, y1, dx, total_mass, xcm, ycm):
    out = np.empty_like(points)
    for n in range(points.shape[0]):
        gx, gy = grad_at(points[n, 0], points[n, 1], cx, cy, x0, y0, x1, y1, dx, total_mass, xcm, ycm)
        out[n, 0] = gx
        out[n, 1] = gy
    return out


def sample_gradient(points, field: Field) -> FloatArray:
    """grad c at ``points`` (shape (2,) or (n, 2))."""
    arr = np.asarray(points, dtype=np.float64)
    p = np.ascontiguousarray(arr.reshape(-1, 2))
    g = field.grid
    out = _grad_many(p, field.cx, field.cy, g.x0, g.y0, g.x1, g.y1, g.dx,
                     float(field.total_mass), float(field.com[0]), float(field.com[1]))
    if not np.isfinite(out).all():
        raise DomainError("monopole field is singular at the centre of mass")
    return out.reshape(arr.shape)


def build_field(positions, masses, grid: Grid, *, tol: float = 1e-8, initial=None) -> Field:
    """Deposit, solve and differentiate in one call."""
    m = np.asarray(masses, dtype=np.float64)
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    M = float(m.sum())
    com = (m @ p) / M
    rho = deposit_mass(p, m, grid)
    C = solve_field(rho, grid, M, com, tol=tol, initial=initial)
    cx, cy = gradient_field(C, grid)
    return Field(grid, rho, C, cx, cy, M, com)


def write_grid(path, values) -> None:
    """Plain-text matrix, ny rows by nx columns, C-locale decimals."""
    np.savetxt(path, np.asarray(values), fmt="%.17g", delimiter=" ")


def read_grid(path) -> FloatArray:
    return np.loadtxt(path, ndmin=2)
