import numpy as np
import pytest
from scipy import optimize

from transdiff import DomainError, Skew1DModel
from transdiff.pde_ref import fv_density_distance, fv_transition_density
from transdiff.skew1d import density_axioms, sampler_check, skew_transition

GRID_T = (0.1, 0.5, 2.0)
GRID_X = (-2.0, -0.1, 0.0, 0.1, 2.0)
RATIOS = ((1.0, 1.0), (1.0, 4.0), (4.0, 1.0), (100.0, 1.0))


# frozen values (hand-evaluated image formulas) -----------------------------------


def test_image_weights_for_one_and_four():
    m = Skew1DModel(1.0, 4.0)
    assert m.image_coefficients["+"]["reflection"] == pytest.approx(-1 / 3, abs=1e-15)
    assert m.image_coefficients["+"]["transmission"] == pytest.approx(4 / 3, abs=1e-15)
    assert m.image_coefficients["-"]["reflection"] == pytest.approx(1 / 3, abs=1e-15)
    assert m.image_coefficients["-"]["transmission"] == pytest.approx(2 / 3, abs=1e-15)
    assert m.contact_constant == pytest.approx(2 / 3, abs=1e-15)


def test_density_frozen_values():
    m = Skew1DModel(1.0, 4.0)
    # same side: (1 + beta) exp(-0.3^2 / 2) / sqrt(2 pi)
    assert m.transition_density(0.5, 0.0, 0.3) == pytest.approx(0.2542585436403494, rel=1e-14)
    # far side: kappa exp(-0.3^2 / 8) / sqrt(8 pi)
    assert m.transition_density(0.5, 0.0, -0.3) == pytest.approx(0.2629862206052592, rel=1e-14)
    assert m.transition_density(0.5, 0.2, -0.7) == pytest.approx(0.22862923667958926, rel=1e-13)


def test_crossing_probability_from_zero_is_one_third():
    m = Skew1DModel(1.0, 4.0)
    # sqrt(eps_plus) / (sqrt(eps_plus) + sqrt(eps_minus))
    assert m.crossing_probability(1.0, 0.0) == pytest.approx(1 / 3, abs=1e-10)
    assert 1.0 - m.cdf(1.0, 0.0, 0.0) == pytest.approx(1 / 3, abs=1e-14)


def test_expected_pcaf_at_interface():
    # 2 C sqrt(t / pi) with C = 2/3
    assert Skew1DModel(1.0, 4.0).expected_pcaf(1.0, 0.0) == pytest.approx(4 / (3 * np.sqrt(np.pi)), rel=1e-14)


# examples ----------------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.5, 1.0, 3.0])
def test_equal_diffusivities_give_heat_kernel(eps):
    m = Skew1DModel(eps, eps)
    y = np.linspace(-3, 3, 13)
    t, x = 0.7, 0.4
    exact = np.exp(-(x - y) ** 2 / (4 * eps * t)) / np.sqrt(4 * np.pi * eps * t)
    np.testing.assert_allclose(m.transition_density(t, x, y), exact, rtol=1e-14)


def test_crossing_probability_symmetric_case():
    assert Skew1DModel(2.0, 2.0).crossing_probability(0.3, 0.0) == pytest.approx(0.5, abs=1e-8)


def test_crossing_probability_tail():
    assert Skew1DModel(1.0, 4.0).crossing_probability(0.1, 10.0) >= 1 - 1e-12


def test_crossing_probability_matches_fv_cdf():
    t = 1.0
    centers, fv = fv_transition_density(1.0, 4.0, t, 0.0)
    width = centers[1] - centers[0]
    fv_plus = float(np.sum(fv[centers > 0]) * width)
    assert abs(Skew1DModel(1.0, 4.0).crossing_probability(t, 0.0) - fv_plus) <= 1e-4


def test_chapman_kolmogorov_example():
    m = Skew1DModel(1.0, 4.0)
    s, t, x, y = 0.3, 0.7, 0.5, -1.0
    from scipy import integrate
    f = lambda z: float(m.transition_density(s, x, z) * m.transition_density(t, z, y))
    val = sum(integrate.quad(f, a, b, epsabs=1e-14, limit=200)[0]
              for a, b in ((-np.inf, -1.0), (-1.0, 0.0), (0.0, 0.5), (0.5, np.inf)))
    assert abs(val - m.transition_density(s + t, x, y)) <= 1e-6


def test_nonpositive_time_rejected():
    m = Skew1DModel(1.0, 4.0)
    with pytest.raises(DomainError):
        m.transition_density(0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        m.crossing_probability(-1.0, 0.0)


def test_far_start_has_no_local_time(rng):
    m = Skew1DModel(1.0, 4.0)
    _, dl = m.sample_step(np.full(10**5, 5.0), 1e-4, rng)
    assert np.count_nonzero(dl) == 0


def test_fv_oracle_distance():
    rep = fv_density_distance(1.0, 4.0, 0.5, 0.0)
    assert rep.passed, rep.summary()


# invariants over the test grid -------------------------------------------------------


@pytest.mark.parametrize("eps", RATIOS)
@pytest.mark.parametrize("t", GRID_T)
def test_density_axioms_grid(eps, t):
    m = Skew1DModel(*eps)
    for x in GRID_X:
        rep = density_axioms(m, t, x)
        assert rep.passed, rep.summary()


@pytest.mark.parametrize("eps", RATIOS)
def test_crossing_probability_from_zero_is_time_independent(eps):
    m = Skew1DModel(*eps)
    vals = [m.crossing_probability(t, 0.0) for t in (0.01, 0.3, 1.0, 7.0)]
    assert np.ptp(vals) <= 1e-8


def _smallest_m(p, r2t, upper):
    """Smallest M >= 1 with the Gaussian sandwich holding at all (p sqrt t, r^2/t)."""
    def ok(m):
        if upper:
            return np.all(p <= m * np.exp(-r2t / m) * (1 + 1e-12))
        return np.all(p >= np.exp(-m * r2t) / m * (1 - 1e-12))
    if ok(1.0):
        return 1.0
    hi = 2.0
    while not ok(hi):
        hi *= 2
    return optimize.brentq(lambda m: 1.0 if ok(m) else -1.0, hi / 2, hi, xtol=1e-6) if not ok(hi / 2) else hi / 2


@pytest.mark.parametrize("eps", RATIOS)
def test_gaussian_sandwich_constant_exists(eps):
    m = Skew1DModel(*eps)
    pts = np.array(GRID_X)
    ms = []
    for t in GRID_T:
        P = m.transition_density(t, pts[:, None], pts[None, :]) * np.sqrt(t)
        r2t = (pts[:, None] - pts[None, :]) ** 2 / t
        ms.append(max(_smallest_m(P, r2t, True), _smallest_m(P, r2t, False)))
    assert all(np.isfinite(ms)) and min(ms) >= 1.0
    # the constant only depends on the ellipticity ratio, so it is the same at all times
    # up to the finite grid
    assert max(ms) / min(ms) <= 4.0


# sampler -----------------------------------------------------------------------------


def test_sampler_side_frequencies():
    rep = sampler_check(Skew1DModel(1.0, 4.0), 0.0, 1.0, 2 * 10**5, seed=1)
    assert rep.passed, rep.summary()


def test_sampler_gaussian_reduction():
    rep = sampler_check(Skew1DModel(1.0, 1.0), 0.0, 1.0, 2 * 10**5, seed=2)
    assert rep["ks_gaussian_pvalue"].passed


def test_same_side_outcome_is_euler_step():
    # for u = 1 the far side is never chosen and the move is the Gaussian step
    xi = np.array([-0.4, 0.3, 1.2])
    y, _ = skew_transition(np.array([0.2, -0.5, 0.05]), 0.01, xi, np.ones(3), 1.0, 4.0)
    np.testing.assert_allclose(np.abs(y), np.abs(np.array([0.2, -0.5, 0.05]) + np.sqrt(2 * 0.01 * np.array([1, 4, 1])) * xi))


def test_sampled_law_matches_cdf(rng):
    from scipy import stats
    m = Skew1DModel(1.0, 4.0)
    y, _ = m.sample_step(np.full(10**5, 0.3), 0.5, rng)
    assert stats.kstest(y, lambda v: m.cdf(0.5, 0.3, v)).pvalue > 0.01


def test_local_time_increment_mean(rng):
    m = Skew1DModel(1.0, 4.0)
    dt = 0.05
    _, dl = m.sample_step(np.zeros(4 * 10**5), dt, rng)
    # dL = eps_minus dK with E[K_dt] from the closed form
    exact = 4.0 * m.expected_pcaf(dt, 0.0)
    se = dl.std() / np.sqrt(dl.size)
    assert abs(dl.mean() - exact) <= 4 * se
    assert np.all(dl >= 0)
