import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coalsim.bessel import (OriginClass, bessel_index, classify_origin, index_after_merge, moment_coefficients,
                            pks_index, sample_hitting_time, simulate_squared_bessel_oracle,
                            subsystem_drift_exact, subsystem_drift_exact3, subsystem_drift_monopole)
from coalsim.errors import DomainError
from coalsim.model import SystemParams, pks_to_particles
from oracles import index_oracle

mass_lists = st.lists(st.floats(1e-3, 10), min_size=1, max_size=15)


def test_moment_coefficients_examples():
    c = moment_coefficients([1, 1, 1], SystemParams(2 * math.pi, 1.0))
    assert c.alpha == pytest.approx(2 / 3, rel=1e-14)
    assert c.beta == pytest.approx(math.sqrt(2 / 3), rel=1e-14)
    c = moment_coefficients([2.5], SystemParams(3.0, 1.0))
    assert c.alpha == 0.0
    chi, mu, M, N = 1.7, 0.9, 11.0, 25
    params, m = pks_to_particles(chi, mu, M, N)
    c = moment_coefficients(m, params)
    assert c.alpha == pytest.approx(4 * mu * (N - 1) / N - chi * M / (2 * math.pi) * (1 - 1 / N), rel=1e-12)


def test_bessel_index_examples():
    assert bessel_index([4 * math.pi] * 2, SystemParams(1.0, 4 * math.pi)) == pytest.approx(-1.0, rel=1e-14)
    for N in (2, 7, 100):
        params, m = pks_to_particles(1.3, 0.8, 20.0, N)
        assert bessel_index(m, params) == pytest.approx(pks_index(N, 1.3, 0.8, 20.0), rel=1e-12, abs=1e-12)
    assert bessel_index([1, 2, 3, 4], SystemParams(1e-300, 1.0)) == pytest.approx(2.0)


@given(mass_lists, st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 2))
def test_index_equals_alpha_over_two_beta_squared(m, chi, mu, gamma):
    params = SystemParams(chi, mu, gamma)
    c = moment_coefficients(m, params)
    nu = bessel_index(m, params)
    ref = c.alpha / (2 * c.beta**2) - 1
    assert nu == pytest.approx(ref, rel=1e-12, abs=1e-9 * max(1.0, abs(nu)))
    assert nu == pytest.approx(index_oracle(m, chi, mu, gamma), rel=1e-9, abs=1e-9 * max(1.0, abs(nu)))


@pytest.mark.parametrize("nu,cls", [(0.0, OriginClass.ENTRANCE), (3.0, OriginClass.ENTRANCE),
                                    (-0.5, OriginClass.REGULAR), (-1.0, OriginClass.ABSORBING),
                                    (-7.0, OriginClass.ABSORBING)])
def test_classify_origin(nu, cls):
    assert classify_origin(nu) is cls


def test_classify_origin_rejects_nan():
    with pytest.raises(DomainError):
        classify_origin(float("nan"))


def test_index_after_merge_examples():
    params = SystemParams(2.3, 0.4)
    ni, nf, nb = index_after_merge([1, 1, 1, 1], [0, 1], params)
    assert nf - ni == pytest.approx(-(nb + 1), rel=1e-12)
    tiny = SystemParams(1e-300, 1.0)
    ni, nf, nb = index_after_merge([1, 2, 3, 4, 5], [1, 3, 4], tiny)
    assert (ni, nf, nb) == pytest.approx((3.0, 1.0, 1.0))


def test_index_after_merge_rejects_full_or_empty_cluster():
    params = SystemParams(1.0, 1.0)
    with pytest.raises(DomainError):
        index_after_merge([1, 2, 3], [0, 1, 2], params)
    with pytest.raises(DomainError):
        index_after_merge([1, 2, 3], np.zeros(3, dtype=bool), params)


def test_hard_merges_never_decrease_index():
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(2000):
        m = rng.uniform(0.1, 5, rng.integers(3, 12))
        params = SystemParams(rng.uniform(0.1, 20), rng.uniform(0.1, 5))
        k = rng.integers(2, len(m))
        ni, nf, nb = index_after_merge(m, np.arange(k), params)
        if nb < -1:
            checked += 1
            assert nf > ni
    assert checked > 50


def test_hitting_time_examples():
    rng = np.random.default_rng(1)
    assert sample_hitting_time(0.0, -1.5, 1.0, rng) == 0.0
    tau = sample_hitting_time(1.0, -1.5, 1.0, rng, size=100_000)
    assert tau.mean() == pytest.approx(1.0, rel=0.05)
    with pytest.raises(DomainError):
        sample_hitting_time(1.0, 0.0, 1.0, rng)


def test_hitting_time_scales_with_beta():
    a = sample_hitting_time(2.0, -2.5, 1.0, np.random.default_rng(3), size=10)
    b = sample_hitting_time(2.0, -2.5, 2.0, np.random.default_rng(3), size=10)
    np.testing.assert_allclose(b, a / 4)


def test_oracle_entrance_boundary_not_hit():
    times = simulate_squared_bessel_oracle(1.0, 1.0, 1e-3, 1.0, np.random.default_rng(2), n_paths=1000)
    assert np.mean(~np.isnan(times)) < 0.01


def test_oracle_absorbing_boundary_hit():
    # exact P(tau > 20) = P(Gamma(2) < 1/40) ~ 3e-4
    times = simulate_squared_bessel_oracle(1.0, -2.0, 1e-3, 20.0, np.random.default_rng(2), n_paths=1000)
    assert np.mean(np.isnan(times)) < 0.01


def test_oracle_mean_before_absorption():
    # nu = 1: origin unreachable, so E Y_t = Y0 + 2 (nu + 1) t exactly
    rng = np.random.default_rng(4)
    ends = [simulate_squared_bessel_oracle(1.0, 1.0, 1e-3, 0.5, rng)[0][-1] for _ in range(2000)]
    mean, se = np.mean(ends), np.std(ends) / math.sqrt(len(ends))
    assert abs(mean - (1.0 + 4 * 0.5)) < 4 * se


def test_oracle_single_path_shape():
    path, t = simulate_squared_bessel_oracle(0.01, -3.0, 1e-4, 1.0, np.random.default_rng(0))
    assert path[0] == 0.01 and np.all(path >= 0)
    assert t is not None and path[-1] == 0.0


def symmetric_three_body(eps, d=1.0, m=(1.0, 1.0, 2.0), chi=1.0, angle=0.0):
    u = np.array([math.cos(angle), math.sin(angle)])
    x1, x2 = eps / 2 * u, -eps / 2 * u
    x3 = np.array([0.0, d])
    return x1, x2, x3, m, chi


def test_exact3_trivial_zero_cases():
    x1, x2, x3, (m1, m2, _), chi = symmetric_three_body(0.1)
    assert subsystem_drift_exact3(x1, x2, x3, m1, m2, 0.0, chi) == 0.0
    assert subsystem_drift_exact3(x1, x2, x3, m1, m2, 3.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        subsystem_drift_exact3(x1, x2, x1, m1, m2, 1.0, 1.0)


def test_exact3_matches_general_exact():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = rng.normal(size=(3, 2))
        m = rng.uniform(0.5, 2, 3)
        a = subsystem_drift_exact3(x[0], x[1], x[2], *m, chi=1.7)
        b = subsystem_drift_exact(x[:2], m[:2], x[2:], m[2:], chi=1.7)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_monopole_sign_flips_with_orientation():
    eps = 0.01
    radial = subsystem_drift_monopole(np.array([[0, eps / 2], [0, -eps / 2]]), [1, 1], [[0, 1.0]], [2.0], 1.0)
    perp = subsystem_drift_monopole(np.array([[eps / 2, 0], [-eps / 2, 0]]), [1, 1], [[0, 1.0]], [2.0], 1.0)
    assert radial > 0 > perp
    assert radial == pytest.approx(-perp, rel=1e-12)


def test_monopole_vanishes_with_moment():
    c = [subsystem_drift_monopole([[e, 0], [-e, 0]], [1, 1], [[0.3, 1.0]], [2.0], 1.0) for e in (1e-2, 1e-4, 0)]
    assert abs(c[1]) < abs(c[0]) * 1e-3 and c[2] == 0.0


def test_monopole_converges_to_exact3():
    errs = []
    for eps in (0.1, 0.05, 0.025, 0.0125):
        x1, x2, x3, (m1, m2, m3), chi = symmetric_three_body(eps, angle=0.4)
        ex = subsystem_drift_exact3(x1, x2, x3, m1, m2, m3, chi)
        mono = subsystem_drift_monopole([x1, x2], [m1, m2], [x3], [m3], chi)
        errs.append(abs(mono - ex))
    order = np.polyfit(np.log([0.1, 0.05, 0.025, 0.0125]), np.log(errs), 1)[0]
    assert order >= 1.8


def test_monopole_rejects_outsider_on_pair_centre():
    with pytest.raises(DomainError):
        subsystem_drift_monopole([[1, 0], [-1, 0]], [1, 1], [[0, 0]], [1.0], 1.0)
