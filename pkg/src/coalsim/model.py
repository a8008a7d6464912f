"""Domain types, conserved quantities and the PKS/MPKS parameter maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigurationError, DomainError

FloatArray = NDArray[np.float64]

#: species tag carried by particles created by a merge
MERGED = -1

LOG_GAMMA = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class LogKernel:
    """Interaction kernel V(r) = gamma * ln r and its radial derivatives."""

    gamma: float = LOG_GAMMA

    def value(self, r):
        return self.gamma * np.log(r)

    def d1(self, r):
        return self.gamma / r

    def d2(self, r):
        return -self.gamma / (np.asarray(r) ** 2)


@dataclass(frozen=True)
class SystemParams:
    chi: float
    mu_tilde: float
    gamma: float = LOG_GAMMA

    def __post_init__(self):
        for name in ("chi", "mu_tilde", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")

    @property
    def kernel(self) -> LogKernel:
        return LogKernel(self.gamma)


@dataclass
class Particle:
    id: int
    position: FloatArray
    mass: float
    species: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(2)
        if not self.mass > 0:
            raise DomainError(f"particle {self.id}: mass must be positive")
        if not np.isfinite(self.position).all():
            raise DomainError(f"particle {self.id}: non-finite position")


@dataclass(frozen=True)
class SpeciesSpec:
    """One MPKS component: total mass M_i and diffusivity mu_i."""

    mass: float
    mu: float

    def __post_init__(self):
        if not (self.mass > 0 and self.mu > 0):
            raise ConfigurationError("species mass and mu must be positive")


@dataclass
class SystemState:
    """Particle configuration stored as parallel arrays.

    ``composition[n, k]`` is the mass of species ``k`` carried by particle
    ``n``; it sums to ``masses[n]`` and is what per-species moments are
    computed from once particles of different species have merged.
    """

    ids: NDArray[np.int64]
    positions: FloatArray
    masses: FloatArray
    species: NDArray[np.int64]
    params: SystemParams
    composition: FloatArray | None = None
    time: float = 0.0
    step: int = 0
    next_id: int | None = None
    parents: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.masses = np.asarray(self.masses, dtype=np.float64)
        self.species = np.asarray(self.species, dtype=np.int64)
        n = len(self.ids)
        if not (self.positions.shape[0] == n == len(self.masses) == len(self.species)):
            raise ValueError("particle arrays must have equal length")
        if np.any(self.masses <= 0):
            raise DomainError("all particle masses must be positive")
        if not np.isfinite(self.positions).all():
            raise DomainError("particle positions must be finite")
        if self.composition is None:
            n_species = int(self.species.max()) + 1 if n and self.species.max() >= 0 else 1
            comp = np.zeros((n, n_species))
            tagged = self.species >= 0
            comp[np.flatnonzero(tagged), self.species[tagged]] = self.masses[tagged]
            self.composition = comp
        else:
            self.composition = np.asarray(self.composition, dtype=np.float64).reshape(n, -1)
        if self.next_id is None:
            self.next_id = int(self.ids.max()) + 1 if n else 0

    @classmethod
    def from_particles(cls, particles: Sequence[Particle], params: SystemParams, time: float = 0.0):
        return cls(
            ids=[p.id for p in particles],
            positions=np.array([p.position for p in particles]).reshape(-1, 2),
            masses=[p.mass for p in particles],
            species=[p.species for p in particles],
            params=params,
            time=time,
        )

    @classmethod
    def from_arrays(cls, positions: ArrayLike, masses: ArrayLike, params: SystemParams,
                    species: ArrayLike | None = None, n_species: int | None = None):
        masses = np.asarray(masses, dtype=np.float64)
        species = np.zeros(len(masses), dtype=np.int64) if species is None else np.asarray(species)
        comp = None
        if n_species is not None:
            comp = np.zeros((len(masses), n_species))
            comp[np.arange(len(masses)), species] = masses
        return cls(ids=np.arange(len(masses)), positions=positions, masses=masses,
                   species=species, params=params, composition=comp)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def n_species(self) -> int:
        return self.composition.shape[1]

    def particles(self) -> list[Particle]:
        return [Particle(int(i), x.copy(), float(m), int(s))
                for i, x, m, s in zip(self.ids, self.positions, self.masses, self.species)]

    def copy(self) -> "SystemState":
        return SystemState(self.ids.copy(), self.positions.copy(), self.masses.copy(),
                           self.species.copy(), self.params, self.composition.copy(),
                           self.time, self.step, self.next_id, dict(self.parents))


def sigma_of_mass(m, params: SystemParams):
    """Diffusion coefficient sqrt(2 mu~ / m) of a particle of mass ``m``."""
    m_arr = np.asarray(m, dtype=np.float64)
    if np.any(m_arr <= 0):
        raise DomainError("sigma_of_mass requires positive mass")
    out = np.sqrt(2.0 * params.mu_tilde / m_arr)
    return float(out) if out.ndim == 0 else out


def center_of_mass(positions: ArrayLike, masses: ArrayLike) -> FloatArray:
    x = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    m = np.asarray(masses, dtype=np.float64)
    return (m @ x) / m.sum()


def system_second_moment(positions: ArrayLike, masses: ArrayLike) -> float:
    """(1/2M^2) sum_ij m_i m_j |X_i - X_j|^2, evaluated about the centre of mass.

    The pair form equals (1/M) sum_i m_i |X_i - X_cm|^2, which is O(N).
    """
    x = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    m = np.asarray(masses, dtype=np.float64)
    d = x - center_of_mass(x, m)
    return float(m @ np.einsum("ij,ij->i", d, d) / m.sum())


def pks_to_particles(chi: float, mu: float, M: float, N0: int) -> tuple[SystemParams, FloatArray]:
    """Equal-mass particle system whose hydrodynamic limit is the PKS."""
    if int(N0) != N0 or N0 < 1:
        raise ConfigurationError("N0 must be a positive integer")
    if not (chi > 0 and mu > 0 and M > 0):
        raise ConfigurationError("chi, mu and M must be positive")
    N0 = int(N0)
    params = SystemParams(chi=chi, mu_tilde=mu * M / N0, gamma=LOG_GAMMA)
    return params, np.full(N0, M / N0)


class MPKSSetup(NamedTuple):
    params: SystemParams
    masses: FloatArray
    species: NDArray[np.int64]
    counts: NDArray[np.int64]
    mu: float
    eta: FloatArray


def largest_remainder(weights: ArrayLike, total: int) -> NDArray[np.int64]:
    """Integer apportionment of ``total`` proportional to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    quota = w / w.sum() * total
    counts = np.floor(quota).astype(np.int64)
    short = total - int(counts.sum())
    if short:
        # ties go to the lower index
        order = np.argsort(-(quota - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def mpks_to_particles(chi: float, species: Sequence[SpeciesSpec], N0: int) -> MPKSSetup:
    """Multispecies particle system for the MPKS with scalar chi."""
    if len(species) < 1:
        raise ConfigurationError("at least one species is required")
    if int(N0) != N0 or N0 < 1:
        raise ConfigurationError("N0 must be a positive integer")
    N0 = int(N0)
    Ms = np.array([s.mass for s in species], dtype=np.float64)
    mus = np.array([s.mu for s in species], dtype=np.float64)
    M = Ms.sum()
    mu = float(Ms @ mus / M)
    eta = Ms * mus / (M * mu)
    counts = largest_remainder(eta, N0)
    if np.any(counts == 0):
        k = int(np.flatnonzero(counts == 0)[0])
        raise ConfigurationError(
            f"species {k} gets no particles at N0={N0} (eta={eta[k]:.3g}); increase N0")
    params = SystemParams(chi=chi, mu_tilde=mu * M / N0, gamma=LOG_GAMMA)
    tags = np.repeat(np.arange(len(species)), counts)
    masses = (Ms / counts)[tags]
    return MPKSSetup(params, masses, tags.astype(np.int64), counts, mu, eta)


def species_diffusivities(setup: MPKSSetup, species: Sequence[SpeciesSpec]) -> FloatArray:
    """Recover mu_i = (M/M_i) eta_i mu, using the realised particle counts."""
    Ms = np.array([s.mass for s in species], dtype=np.float64)
    M = Ms.sum()
    N0 = setup.counts.sum()
    eta_realised = setup.counts / N0
    return M / Ms * eta_realised * setup.mu
