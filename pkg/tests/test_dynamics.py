import math

import numba
import numpy as np
import pytest

from coalsim.dynamics import (MAX_SUBSTEPS, StepOptions, advance_particle, advance_particles, choose_substep,
                              macro_step)
from coalsim.errors import DomainError, StepError
from coalsim.meanfield import Field, Grid, build_field
from coalsim.model import SystemParams, SystemState
from coalsim.rng import counter_normals


def constant_field(g: Grid, gx: float, gy: float, mass=1.0) -> Field:
    z = np.zeros((g.ny, g.nx))
    return Field(g, z, z, np.full_like(z, gx), np.full_like(z, gy), mass, np.zeros(2))


def test_choose_substep_examples():
    assert choose_substep(0.0, 1.0, 0.1, 1.0) == pytest.approx(0.0025)
    assert choose_substep(1e12, 1e12, 0.1, 1.0) > 0
    assert choose_substep(1e12, 1e12, 0.1, 1.0) == pytest.approx(min(0.1 / 2e12, (0.1 / 2e12) ** 2))
    assert choose_substep(1.0, 1.0, 0.1, 1e-6) == 1e-6
    with pytest.raises(DomainError):
        choose_substep(1.0, 1.0, 0.0, 1.0)


def test_zero_field_single_substep():
    params = SystemParams(1.0, 0.5)
    x, dW = advance_particle([1.0, 2.0], 2.0, 7, 0.04, None, params, seed=3, step=5)
    n = counter_normals(3, 5, 7, 1)[0]
    np.testing.assert_allclose(dW, 0.2 * n, rtol=1e-14)
    np.testing.assert_allclose(x, [1.0, 2.0] + math.sqrt(0.5) * 0.2 * n, rtol=1e-14)


def test_deterministic_limit_constant_gradient():
    # sigma -> 0 through a tiny mu_tilde; drift chi * g over dt regardless of tiling
    g = Grid.square(10.0, 201)
    fld = constant_field(g, 0.3, -0.7)
    params = SystemParams(2.0, 1e-30)
    new, ledger = advance_particles([[0.0, 0.0]], [1.0], [0], 1.0, fld, params, 0, 0)
    assert ledger.substeps[0] > 1
    np.testing.assert_allclose(new[0], [0.6, -1.4], rtol=1e-12)


def test_substeps_tile_dt():
    g = Grid.square(1.0, 101)
    fld = constant_field(g, 3.0, 0.0)
    params = SystemParams(1.0, 1e-30)
    dt = 0.1
    new, ledger = advance_particles([[0.0, 0.0]], [1.0], [0], dt, fld, params, 0, 0)
    # drift-limited substeps dx / (2 b) = 0.01 / 6; the sum must equal dt exactly in the displacement
    assert new[0, 0] == pytest.approx(3.0 * dt, rel=1e-12)
    assert ledger.substeps[0] == 30


def test_ledger_variance():
    n = 100_000
    dt = 0.01
    params = SystemParams(1.0, 1.0)
    # forcing several substeps through noise_dx checks that the ledger sums substep increments
    _, ledger = advance_particles(np.zeros((n, 2)), np.ones(n), np.arange(n), dt, None, params, 11, 0,
                                  noise_dx=0.1)
    assert np.all(ledger.substeps > 1)
    var = ledger.dW.var(axis=0)
    np.testing.assert_allclose(var, dt, rtol=0.02)


def test_brownian_mean_square_displacement():
    n = 100_000
    dt, mu_tilde, m = 0.02, 0.3, 1.5
    params = SystemParams(1.0, mu_tilde)
    x0 = np.zeros((n, 2))
    new, _ = advance_particles(x0, np.full(n, m), np.arange(n), dt, None, params, 5, 2)
    msd = np.mean(np.sum(new**2, axis=1))
    assert msd == pytest.approx(4 * mu_tilde / m * dt, rel=0.03)


def test_thread_count_does_not_change_result():
    n = 5000
    rng = np.random.default_rng(0)
    x = rng.normal(size=(n, 2))
    m = rng.uniform(0.5, 1.5, n)
    g = Grid.square(5.0, 65)
    fld = build_field(x, m, g)
    params = SystemParams(1.0, 0.01)
    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        a, la = advance_particles(x, m, np.arange(n), 0.01, fld, params, 9, 4)
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
        b, lb = advance_particles(x, m, np.arange(n), 0.01, fld, params, 9, 4)
    finally:
        numba.set_num_threads(before)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(la.dW, lb.dW)


def test_streams_depend_on_id_not_order():
    params = SystemParams(1.0, 1.0)
    x = np.zeros((3, 2))
    a, _ = advance_particles(x, [1, 1, 1], [4, 8, 15], 0.1, None, params, 1, 1)
    b, _ = advance_particles(x, [1, 1, 1], [15, 4, 8], 0.1, None, params, 1, 1)
    np.testing.assert_array_equal(a[[2, 0, 1]], b)


def test_non_finite_position_raises_step_error():
    params = SystemParams(1.0, 1.0)
    with pytest.raises(StepError) as info:
        advance_particles([[np.inf, 0.0], [0, 0]], [1, 1], [3, 4], 0.1, None, params, 0, 0)
    assert info.value.particle_id == 3
    assert MAX_SUBSTEPS > 0


def test_macro_step_pure_transport_keeps_count():
    # lattice spacing 0.5 is far beyond the pair noise scale 2.3 beta sqrt(dt) ~ 2e-3
    X, Y = np.meshgrid(np.arange(10) * 0.5, np.arange(10) * 0.5)
    s = SystemState.from_arrays(np.column_stack([X.ravel(), Y.ravel()]), np.ones(100), SystemParams(1.0, 1e-3))
    res = macro_step(s, 1e-3, Grid.square(4.0, 65, center=(2.25, 2.25)))
    assert not res.clusters and not res.events
    assert res.state.n == s.n
    assert res.state.step == 1 and res.state.time == pytest.approx(1e-3)
    assert s.step == 0  # input untouched


def test_single_particle_is_pure_brownian():
    params = SystemParams(5.0, 0.2)
    s = SystemState.from_arrays([[0.3, -0.1]], [2.0], params)
    res = macro_step(s, 0.01, Grid.square(2.0, 33), StepOptions(seed=4))
    ref, _ = advance_particles(s.positions, s.masses, s.ids, 0.01, None, params, 4, 0)
    np.testing.assert_array_equal(res.state.positions, ref)


def test_mass_conserved_over_steps_with_merges():
    rng = np.random.default_rng(8)
    merges = 0
    for trial in range(100):
        # tight clumps with a supercritical mass merge within a few steps
        centres = rng.uniform(-2, 2, (3, 2))
        x = np.concatenate([c + rng.normal(0, 1e-3, (4, 2)) for c in centres])
        m = rng.uniform(0.5, 2.0, 12)
        s = SystemState.from_arrays(x, m, SystemParams(50.0, 0.05))
        M0 = s.total_mass
        res = macro_step(s, 1e-3, Grid.square(4.0, 33), StepOptions(seed=trial))
        merges += len(res.events)
        assert res.state.total_mass == pytest.approx(M0, rel=1e-12)
    assert merges >= 100
