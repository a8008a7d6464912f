"""Coalescing stochastic particle systems with logarithmic interactions."""

from .bessel import (MomentCoefficients, OriginClass, bessel_index, classify_origin, index_after_merge,
                     moment_coefficients, pks_index, sample_hitting_time)
from .clustering import ClusterCell, detect_clusters, inv_normal_cdf, is_collidable, is_separated
from .coalescence import (MergeEvent, cluster_moment_update, cluster_noise_increment, merge_cluster,
                          should_merge)
from .config import Blob, RawParticle, RunConfig
from .diagnostics import (MomentRecord, fit_line, mpks_blowup_condition, mpks_m_max, mpks_moment_rate,
                          predicted_slope_regularized, record)
from .dynamics import NoiseLedger, StepOptions, advance_particle, advance_particles, choose_substep, macro_step
from .errors import ConfigurationError, DomainError, SolverError, StepError
from .meanfield import Field, Grid, build_field, deposit_mass, gradient_field, sample_gradient, solve_field
from .model import (MERGED, LogKernel, Particle, SpeciesSpec, SystemParams, SystemState, center_of_mass,
                    mpks_to_particles, pks_to_particles, sigma_of_mass, system_second_moment)
from .presets import preset
from .runner import run, simulate

__version__ = "0.1.0"
