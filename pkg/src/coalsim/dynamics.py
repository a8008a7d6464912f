"""Euler-Maruyama propagation over one macro step and the macro-step loop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field as dc_field

import numba
import numpy as np

from .errors import DomainError, StepError
from .meanfield import Field, Grid, build_field, grad_at
from .model import FloatArray, SystemParams, SystemState
from .rng import normal_pair, stream_key


@dataclass
class NoiseLedger:
    """Accumulated Wiener increment of every particle over one macro step."""

    ids: np.ndarray
    dW: FloatArray
    substeps: np.ndarray
    dt: float

    def __len__(self):
        return len(self.ids)


MAX_SUBSTEPS = 10_000_000


@numba.njit(cache=True, inline="always")
def _substep(b, sigma, dx, remaining):
    tau = remaining
    if b > 0.0:
        tau = min(tau, dx / (2.0 * b))
    if sigma > 0.0:
        h = dx / (2.0 * sigma)
        tau = min(tau, h * h)
    return tau


def choose_substep(b: float, sigma: float, dx: float, remaining: float) -> float:
    """Largest substep whose expected jump b*tau + sigma*sqrt(tau) stays below dx."""
    if not (dx > 0 and remaining > 0):
        raise DomainError("dx and remaining time must be positive")
    tau = _substep(float(b), float(sigma), float(dx), float(remaining))
    if not tau > 0:
        raise DomainError(f"substep underflow (b={b}, sigma={sigma})")
    return tau


@numba.njit(cache=True, parallel=True)
def _advance_kernel(pos, masses, ids, chi, mu_tilde, dt, cx, cy, x0, y0, x1, y1, dx,
                    total_mass, xcm, ycm, seed, step, use_field, out_pos, out_dw, out_k):
    n = pos.shape[0]
    for p in numba.prange(n):
        x = pos[p, 0]
        y = pos[p, 1]
        sigma = math.sqrt(2.0 * mu_tilde / masses[p])
        key = stream_key(seed, step, ids[p])
        wx = 0.0
        wy = 0.0
        elapsed = 0.0
        k = 0
        while True:
            gx = 0.0
            gy = 0.0
            if use_field:
                gx, gy = grad_at(x, y, cx, cy, x0, y0, x1, y1, dx, total_mass, xcm, ycm)
                gx *= chi
                gy *= chi
            remaining = dt - elapsed
            tau = _substep(math.sqrt(gx * gx + gy * gy), sigma, dx, remaining)
            last = tau >= remaining * (1.0 - 1e-12)  # absorb rounding slivers of the clock
            if last:
                tau = remaining
            sq = math.sqrt(tau)
            n1, n2 = normal_pair(key, k)
            x += gx * tau + sigma * sq * n1
            y += gy * tau + sigma * sq * n2
            wx += sq * n1
            wy += sq * n2
            k += 1
            if not (math.isfinite(x) and math.isfinite(y)) or tau <= 0.0 or k > MAX_SUBSTEPS:
                k = -1  # flags the particle; a shared scalar would race under prange
                break
            if last:
                break
            elapsed += tau
        out_pos[p, 0] = x
        out_pos[p, 1] = y
        out_dw[p, 0] = wx
        out_dw[p, 1] = wy
        out_k[p] = k


_NO_FIELD = np.zeros((3, 3))


def advance_particles(positions, masses, ids, dt: float, field: Field | None, params: SystemParams,
                      seed: int, step: int, *, noise_dx: float = math.inf) -> tuple[FloatArray, NoiseLedger]:
    """Advance every particle through dt with the field frozen; returns new positions and the ledger.

    ``field=None`` switches the drift off (pure Brownian motion); the
    substep bound then comes from ``noise_dx`` alone (one substep by default).
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 2)
    m = np.ascontiguousarray(masses, dtype=np.float64)
    pid = np.ascontiguousarray(ids, dtype=np.int64)
    out_pos = np.empty_like(pos)
    out_dw = np.empty_like(pos)
    out_k = np.empty(len(m), dtype=np.int64)
    if field is None:
        args = (_NO_FIELD, _NO_FIELD, 0.0, 0.0, 1.0, 1.0, float(noise_dx), 0.0, 0.0, 0.0)
    else:
        g = field.grid
        args = (field.cx, field.cy, g.x0, g.y0, g.x1, g.y1, g.dx,
                float(field.total_mass), float(field.com[0]), float(field.com[1]))
    _advance_kernel(pos, m, pid, params.chi, params.mu_tilde, float(dt), *args,
                    np.uint64(seed), np.uint64(step), field is not None, out_pos, out_dw, out_k)
    bad = np.flatnonzero(out_k < 0)
    if len(bad):
        b = pid[bad[0]]
        raise StepError(f"particle {b} left the finite range or stalled in substeps", int(b))
    return out_pos, NoiseLedger(pid.copy(), out_dw, out_k, float(dt))


def advance_particle(position, mass: float, pid: int, dt: float, field: Field | None,
                     params: SystemParams, seed: int = 0, step: int = 0) -> tuple[FloatArray, FloatArray]:
    """Single-particle convenience wrapper: (new position, ledger increment)."""
    new, ledger = advance_particles(np.reshape(position, (1, 2)), [mass], [pid], dt, field, params, seed, step)
    return new[0], ledger.dW[0]


# --- macro step ---------------------------------------------------------------

@dataclass
class StepOptions:
    eta: float = 0.1
    p: float = 0.01
    merge_rule: str = "zero"
    seed: int = 0
    max_depth: int = 40
    solver_tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise DomainError("eta must lie in (0, 1)")
        if not 0 < self.p < 1:
            raise DomainError("p must lie in (0, 1)")
        if self.merge_rule not in ("zero", "decrease"):
            raise DomainError(f"unknown merge rule {self.merge_rule!r}")


@dataclass
class StepResult:
    state: SystemState
    events: list = dc_field(default_factory=list)
    field: Field | None = None
    clusters: list = dc_field(default_factory=list)
    ledger: NoiseLedger | None = None


def macro_step(state: SystemState, dt: float, grid: Grid, options: StepOptions | None = None,
               previous: Field | None = None) -> StepResult:
    """Detect clusters, move every particle, then test the clusters for collision.

    Returns a new state; ``state`` itself is left untouched. ``previous`` is
    the field of the last step, used to warm-start the solver.
    """
    from .clustering import detect_clusters
    from .coalescence import apply_coalescence

    if not dt > 0:
        raise DomainError("dt must be positive")
    opts = options or StepOptions()
    params = state.params
    clusters = []
    if state.n >= 2:
        clusters = detect_clusters(state.positions, state.masses, dt, params, eta=opts.eta, p=opts.p,
                                   ids=state.ids, max_depth=opts.max_depth)
    fld = build_field(state.positions, state.masses, grid, tol=opts.solver_tol,
                      initial=None if previous is None else previous.potential)
    moving = fld if state.n >= 2 else None  # a lone particle feels no field
    new_pos, ledger = advance_particles(state.positions, state.masses, state.ids, dt, moving, params,
                                        opts.seed, state.step)
    moved = state.copy()
    moved.positions = new_pos
    moved.time = state.time + dt
    moved.step = state.step + 1
    new_state, events = apply_coalescence(moved, state.positions, ledger, clusters, dt, opts.merge_rule)
    return StepResult(new_state, events, fld, clusters, ledger)
