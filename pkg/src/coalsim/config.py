"""Run configuration and its INI file format."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .initial import PROFILES, sample_bump_ellipse
from .meanfield import Grid
from .model import (LOG_GAMMA, SpeciesSpec, SystemParams, SystemState, largest_remainder,
                    mpks_to_particles, pks_to_particles)

MODES = ("pks", "mpks", "raw-particles")


@dataclass
class Blob:
    """A bump of mass ``mass``; ``species`` indexes the species list in mpks mode."""

    center: tuple[float, float]
    semi_axes: tuple[float, float]
    mass: float
    angle: float = 0.0
    species: int = 0
    profile: str = "mollifier"


@dataclass
class RawParticle:
    x: float
    y: float
    mass: float
    species: int = 0


@dataclass
class RunConfig:
    name: str = "run"
    mode: str = "pks"
    chi: float = 1.0
    mu: float = 1.0
    mu_tilde: float = 1.0          # raw-particles mode only
    gamma: float = LOG_GAMMA
    n0: int = 1000
    species: list[SpeciesSpec] = field(default_factory=list)
    blobs: list[Blob] = field(default_factory=list)
    particles: list[RawParticle] = field(default_factory=list)
    grid: tuple[float, float, float, float, int, int] = (-1.0, 1.0, -1.0, 1.0, 65, 65)
    dt: float = 1e-3
    t_end: float = 0.1
    eta: float = 0.1
    p: float = 0.01
    seed: int = 0
    out_dir: str = "out"
    merge_rule: str = "zero"
    snapshot_stride: int = 0
    record_stride: int = 1
    threads: int = 0

    # --- validation --------------------------------------------------------

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("chi", "dt", "t_end"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.eta < 1:
            raise ConfigurationError("eta must lie in (0, 1)")
        if not 0 < self.p < 1:
            raise ConfigurationError("p must lie in (0, 1)")
        if self.merge_rule not in ("zero", "decrease"):
            raise ConfigurationError("merge_rule must be 'zero' or 'decrease'")
        if self.snapshot_stride < 0 or self.record_stride < 1 or self.threads < 0:
            raise ConfigurationError("strides must be positive and threads nonnegative")
        try:
            self.make_grid()
        except ValueError as exc:
            raise ConfigurationError(f"invalid grid: {exc}") from exc
        for b in self.blobs:
            if b.profile not in PROFILES:
                raise ConfigurationError(f"unknown profile {b.profile!r}")
            if not (b.mass > 0 and b.semi_axes[0] > 0 and b.semi_axes[1] > 0):
                raise ConfigurationError("blob mass and semi-axes must be positive")
        if self.mode == "pks":
            if not self.mu > 0:
                raise ConfigurationError("mu must be positive")
            if not self.blobs:
                raise ConfigurationError("pks mode needs at least one blob")
            if self.n0 < 1:
                raise ConfigurationError("n0 must be positive")
        elif self.mode == "mpks":
            if not self.species:
                raise ConfigurationError("mpks mode needs species")
            for k, s in enumerate(self.species):
                share = sum(b.mass for b in self.blobs if b.species == k)
                if not math.isclose(share, s.mass, rel_tol=1e-12):
                    raise ConfigurationError(f"blob masses of species {k} sum to {share}, expected {s.mass}")
            if any(not 0 <= b.species < len(self.species) for b in self.blobs):
                raise ConfigurationError("blob refers to an unknown species")
        else:
            if not self.particles:
                raise ConfigurationError("raw-particles mode needs particles")
            if not self.mu_tilde > 0:
                raise ConfigurationError("mu_tilde must be positive")
        return self

    def make_grid(self) -> Grid:
        x0, x1, y0, y1, nx, ny = self.grid
        return Grid(float(x0), float(x1), float(y0), float(y1), int(nx), int(ny))

    @property
    def total_mass(self) -> float:
        if self.mode == "raw-particles":
            return float(sum(p.mass for p in self.particles))
        if self.mode == "mpks":
            return float(sum(s.mass for s in self.species))
        return float(sum(b.mass for b in self.blobs))

    @property
    def critical_mass(self) -> float:
        """8 pi mu / chi, with the auxiliary mu in mpks mode."""
        if self.mode == "mpks":
            M = self.total_mass
            mu = sum(s.mass * s.mu for s in self.species) / M
            return 8.0 * math.pi * mu / self.chi
        if self.mode == "raw-particles":
            return 8.0 * math.pi * self.mu_tilde / self.chi
        return 8.0 * math.pi * self.mu / self.chi

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    # --- initial state -------------------------------------------------------

    def initial_state(self) -> SystemState:
        self.validate()
        rng = np.random.default_rng(self.seed)
        if self.mode == "raw-particles":
            params = SystemParams(self.chi, self.mu_tilde, self.gamma)
            pos = np.array([[p.x, p.y] for p in self.particles])
            masses = np.array([p.mass for p in self.particles])
            species = np.array([p.species for p in self.particles])
            return SystemState.from_arrays(pos, masses, params, species, int(species.max()) + 1)
        if self.mode == "pks":
            params, _ = pks_to_particles(self.chi, self.mu, self.total_mass, self.n0)
            params = SystemParams(params.chi, params.mu_tilde, self.gamma)
            counts = largest_remainder([b.mass for b in self.blobs], self.n0)
            parts = [sample_bump_ellipse(b.center, b.semi_axes, b.angle, b.mass, c, rng, b.profile)
                     for b, c in zip(self.blobs, counts) if c > 0]
            pos = np.concatenate([p for p, _ in parts])
            masses = np.full(len(pos), self.total_mass / self.n0)
            return SystemState.from_arrays(pos, masses, params)
        setup = mpks_to_particles(self.chi, self.species, self.n0)
        params = SystemParams(setup.params.chi, setup.params.mu_tilde, self.gamma)
        pos_list, tag_list = [], []
        for k, spec in enumerate(self.species):
            mine = [b for b in self.blobs if b.species == k]
            counts = largest_remainder([b.mass for b in mine], int(setup.counts[k]))
            for b, c in zip(mine, counts):
                if c > 0:
                    p, _ = sample_bump_ellipse(b.center, b.semi_axes, b.angle, b.mass, c, rng, b.profile)
                    pos_list.append(p)
                    tag_list.append(np.full(c, k))
        pos = np.concatenate(pos_list)
        tags = np.concatenate(tag_list)
        masses = np.array([s.mass for s in self.species])[tags] / setup.counts[tags]
        return SystemState.from_arrays(pos, masses, params, tags, len(self.species))

    # --- file format -----------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        run = {}
        for f in fields(self):
            if f.name in ("species", "blobs", "particles", "grid"):
                continue
            run[f.name] = _fmt(getattr(self, f.name))
        cp["run"] = run
        x0, x1, y0, y1, nx, ny = self.grid
        cp["grid"] = {"x0": _fmt(x0), "x1": _fmt(x1), "y0": _fmt(y0), "y1": _fmt(y1),
                      "nx": str(int(nx)), "ny": str(int(ny))}
        for k, s in enumerate(self.species):
            cp[f"species.{k}"] = {"mass": _fmt(s.mass), "mu": _fmt(s.mu)}
        for k, b in enumerate(self.blobs):
            cp[f"blob.{k}"] = {"cx": _fmt(b.center[0]), "cy": _fmt(b.center[1]),
                               "a": _fmt(b.semi_axes[0]), "b": _fmt(b.semi_axes[1]),
                               "angle": _fmt(b.angle), "mass": _fmt(b.mass),
                               "species": str(b.species), "profile": b.profile}
        for k, p in enumerate(self.particles):
            cp[f"particle.{k}"] = {"x": _fmt(p.x), "y": _fmt(p.y), "mass": _fmt(p.mass),
                                   "species": str(p.species)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def save(self, path) -> Path:
        path = Path(path)
        try:
            path.write_text(self.to_ini())
        except OSError as exc:
            raise OSError(f"cannot write config {path}: {exc}") from exc
        return path

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config: {exc}") from exc
        if "run" not in cp:
            raise ConfigurationError("config has no [run] section")
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in cp["run"].items():
            if key not in types or key in ("species", "blobs", "particles", "grid"):
                raise ConfigurationError(f"unknown run key {key!r}")
            kwargs[key] = _parse(raw, types[key], key)
        if "grid" in cp:
            g = cp["grid"]
            try:
                kwargs["grid"] = (float(g["x0"]), float(g["x1"]), float(g["y0"]), float(g["y1"]),
                                  int(g["nx"]), int(g["ny"]))
            except (KeyError, ValueError) as exc:
                raise ConfigurationError(f"bad [grid] section: {exc}") from exc
        try:
            kwargs["species"] = [SpeciesSpec(float(s["mass"]), float(s["mu"]))
                                 for _, s in _numbered(cp, "species")]
            kwargs["blobs"] = [Blob((float(s["cx"]), float(s["cy"])), (float(s["a"]), float(s["b"])),
                                    float(s["mass"]), float(s.get("angle", "0")), int(s.get("species", "0")),
                                    s.get("profile", "mollifier"))
                               for _, s in _numbered(cp, "blob")]
            kwargs["particles"] = [RawParticle(float(s["x"]), float(s["y"]), float(s["mass"]),
                                               int(s.get("species", "0")))
                                   for _, s in _numbered(cp, "particle")]
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"bad section: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        return cls.from_ini(text)


def _numbered(cp, prefix):
    secs = [(int(name.split(".", 1)[1]), cp[name]) for name in cp.sections() if name.startswith(prefix + ".")]
    return sorted(secs, key=lambda t: t[0])


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, typ, key):
    try:
        if typ in ("float", float):
            return float(raw)
        if typ in ("int", int):
            return int(raw)
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc
