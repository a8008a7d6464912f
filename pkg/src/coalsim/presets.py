"""Named experiment configurations."""

from __future__ import annotations

import math

from .config import Blob, RawParticle, RunConfig
from .errors import ConfigurationError
from .model import SpeciesSpec

PI = math.pi
MPKS_A = 0.35
MPKS_SPECIES = [SpeciesSpec(4.0, 35.0 / 2.0), SpeciesSpec(24.0, 35.0 / 12.0)]

# particle counts used in the original runs and the smaller desk-scale ones
FULL_N0 = {
    "pks-mass-transfer": 40_000,
    "pks-two-singularities": 400_000,
    "mpks-symmetric": 1_000_000,
    "mpks-asymmetric": 1_000_000,
    "mpks-disjoint": 1_000_000,
    "three-particle-moment": 3,
}
DESK_N0 = {
    "pks-mass-transfer": 10_000,
    "pks-two-singularities": 40_000,
    "mpks-symmetric": 100_000,
    "mpks-asymmetric": 100_000,
    "mpks-disjoint": 100_000,
    "three-particle-moment": 3,
}


def _pks_mass_transfer(n0):
    return RunConfig(
        name="pks-mass-transfer", mode="pks", chi=1.0, mu=1.0, n0=n0,
        blobs=[Blob((-5.0, 0.0), (1.0, 1.0), 32.0 * PI, profile="uniform"),
               Blob((4.0, 0.0), (1.0, 7.0), 16.0 * PI, profile="uniform")],
        grid=(-12.0, 12.0, -12.0, 12.0, 128, 128), dt=1e-3, t_end=0.15,
    )


def _pks_two_singularities(n0):
    return RunConfig(
        name="pks-two-singularities", mode="pks", chi=1.0, mu=1.0, n0=n0,
        blobs=[Blob((3.0, 1.0), (0.5, 0.5), 28.0 * PI / 5.0),
               Blob((-3.0, -1.0), (0.5, 0.5), 12.0 * PI / 5.0)],
        grid=(-15.0, 15.0, -15.0, 15.0, 270, 270), dt=0.002, t_end=2.0,
    )


def _mpks(name, n0, blobs):
    return RunConfig(
        name=name, mode="mpks", chi=4.0, n0=n0, species=list(MPKS_SPECIES), blobs=blobs,
        grid=(-1.5, 1.5, -1.5, 1.5, 320, 320), dt=1e-4, t_end=0.003,
    )


def _mpks_symmetric(n0):
    a = MPKS_A
    return _mpks("mpks-symmetric", n0, [Blob((0.0, 0.0), (a, a), 4.0, species=0),
                                        Blob((0.0, 0.0), (a, a), 24.0, species=1)])


def _mpks_asymmetric(n0):
    a = MPKS_A
    return _mpks("mpks-asymmetric", n0, [Blob((0.0, 0.0), (a, a), 4.0, species=0),
                                         Blob((0.1, 0.0), (a / 2.0, 2.0 * a), 24.0, species=1)])


def _mpks_disjoint(n0):
    a = MPKS_A
    return _mpks("mpks-disjoint", n0, [Blob((a, -a), (a, a), 4.0, species=0),
                                       Blob((-a, a), (a, a), 24.0, species=1)])


def _three_particle(n0):
    th = PI / 12.0
    return RunConfig(
        name="three-particle-moment", mode="raw-particles", chi=10.0, mu_tilde=10.0, n0=3,
        particles=[RawParticle(0.0, 0.1, 20.0), RawParticle(0.0, -0.1, 20.0),
                   RawParticle(0.8 * math.cos(th), 0.8 * math.sin(th), 100.0)],
        grid=(-2.0, 2.0, -2.0, 2.0, 129, 129), dt=1e-4, t_end=0.01,
    )


_BUILDERS = {
    "pks-mass-transfer": _pks_mass_transfer,
    "pks-two-singularities": _pks_two_singularities,
    "mpks-symmetric": _mpks_symmetric,
    "mpks-asymmetric": _mpks_asymmetric,
    "mpks-disjoint": _mpks_disjoint,
    "three-particle-moment": _three_particle,
}

NAMES = tuple(_BUILDERS)


def preset(name: str, *, desk: bool = False, n0: int | None = None) -> RunConfig:
    """Configuration of a named experiment.

    ``desk=True`` lowers the particle count (and for mpks the grid to 160^2);
    physical parameters are unchanged.
    """
    if name not in _BUILDERS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(NAMES)}")
    count = n0 if n0 is not None else (DESK_N0 if desk else FULL_N0)[name]
    cfg = _BUILDERS[name](count)
    if desk and name.startswith("mpks"):
        cfg.grid = (-1.5, 1.5, -1.5, 1.5, 160, 160)
    return cfg.validate()
