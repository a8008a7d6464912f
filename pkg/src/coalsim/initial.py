"""Initial-condition samplers: compactly supported bumps on discs and ellipses."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .errors import ConfigurationError

PROFILES = ("mollifier", "uniform")


def mollifier(s):
    """exp(-1 / (1 - s^2)) on |s| < 1, zero outside."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _unit_disc(count: int, rng: np.random.Generator, profile: str) -> np.ndarray:
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown bump profile {profile!r}")
    out = np.empty((0, 2))
    while len(out) < count:
        need = count - len(out)
        n = int(need * (2.6 if profile == "mollifier" else 1.0)) + 16
        r = np.sqrt(rng.random(n))
        theta = 2.0 * math.pi * rng.random(n)
        if profile == "mollifier":
            # accept with f(r) / f(0)
            keep = rng.random(n) < np.exp(1.0 - 1.0 / (1.0 - np.minimum(r, 1 - 1e-16) ** 2))
            r, theta = r[keep], theta[keep]
        pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        out = np.concatenate([out, pts[r < 1.0]])
    return out[:count]


def _check(count, mass):
    if int(count) != count or count < 1:
        raise ConfigurationError("count must be a positive integer")
    if not mass > 0:
        raise ConfigurationError("bump mass must be positive")


def sample_bump_disc(center, radius: float, mass: float, count: int, rng: np.random.Generator,
                     profile: str = "mollifier") -> tuple[np.ndarray, np.ndarray]:
    """``count`` i.i.d. positions from a radial bump of the given radius, each carrying mass/count."""
    if not radius > 0:
        raise ConfigurationError("radius must be positive")
    return sample_bump_ellipse(center, (radius, radius), 0.0, mass, count, rng, profile)


def sample_bump_ellipse(center, semi_axes, angle: float, mass: float, count: int, rng: np.random.Generator,
                        profile: str = "mollifier") -> tuple[np.ndarray, np.ndarray]:
    """Bump on an ellipse: the unit-disc profile stretched by ``semi_axes`` then rotated by ``angle``."""
    _check(count, mass)
    a, b = semi_axes
    if not (a > 0 and b > 0):
        raise ConfigurationError("semi-axes must be positive")
    u = _unit_disc(int(count), rng, profile) * np.array([a, b])
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    pos = u @ rot.T + np.asarray(center, dtype=np.float64)
    return pos, np.full(int(count), mass / count)


def profile_second_moment(radius: float = 1.0, profile: str = "mollifier") -> float:
    """E|X - centre|^2 of the radial bump, by quadrature."""
    if profile == "uniform":
        return 0.5 * radius**2
    f = lambda r: float(mollifier(np.array(r)))  # noqa: E731
    num = integrate.quad(lambda r: r**3 * f(r), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)[0]
    den = integrate.quad(lambda r: r * f(r), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)[0]
    return radius**2 * num / den
