import numpy as np
import pytest

from transdiff import CoefficientError, CoefficientField, Sphere
from transdiff.coeffs import coefficients_from_config


def quadratic_field(dim=2):
    """a(x) = (1 + x1^2) I on both sides, with its analytic divergence."""
    eye = np.eye(dim)

    def a(x):
        return (1.0 + x[:, 0] ** 2)[:, None, None] * eye

    def div(x):
        out = np.zeros_like(x)
        out[:, 0] = 2.0 * x[:, 0]
        return out

    return CoefficientField(a, a, lam=1.0, Lam=100.0, dim=dim, a_plus_div=div, a_minus_div=div)


def test_diagonal_sigma_value():
    f = CoefficientField.diagonal(2.0, 1.0, 3)
    np.testing.assert_allclose(f.sigma([0.1, 0.2, 0.3], +1), 2.0 * np.eye(3))


def test_identity_sigma():
    f = CoefficientField.constant(np.eye(2), np.eye(2))
    np.testing.assert_allclose(f.sigma([0.0, 0.0], +1), np.sqrt(2.0) * np.eye(2), atol=1e-15)


def test_anisotropic_sigma_squares_to_two_a():
    f = CoefficientField.constant(np.diag([1.0, 4.0]), np.eye(2))
    s = f.sigma([0.0, 0.0], +1)
    np.testing.assert_allclose(s, np.diag([np.sqrt(2.0), np.sqrt(8.0)]), atol=1e-14)
    np.testing.assert_allclose(s @ s.T, np.diag([2.0, 8.0]), atol=1e-13)


def test_sigma_identity_random_points(rng):
    f = coefficients_from_config({"family": "smooth_radial", "params": {"eps_plus": 1.0, "eps_minus": 3.0}}, 3)
    pts = rng.uniform(-2, 2, size=(1000, 3))
    for side in (+1, -1):
        s = f.sigma(pts, side)
        a = f.matrix(pts, side)
        assert np.max(np.abs(s @ np.swapaxes(s, 1, 2) - 2 * a)) <= 1e-10 * f.Lam


def test_constant_drift_is_zero():
    f = CoefficientField.diagonal(1.0, 4.0, 2)
    np.testing.assert_array_equal(f.divergence_drift([0.3, 0.1], +1), [0.0, 0.0])


def test_analytic_drift_and_fd_fallback():
    f = quadratic_field()
    np.testing.assert_allclose(f.divergence_drift([1.0, 0.0], +1), [2.0, 0.0])
    fd = f.divergence_drift([1.0, 0.0], +1, h_fd=1e-4)
    assert np.max(np.abs(fd - [2.0, 0.0])) <= 1e-6


def test_fd_drift_second_order():
    # a(x) = exp(x1) I has an O(h^2) central-difference error proportional to exp(x1)/6
    eye = np.eye(2)
    f = CoefficientField(lambda x: np.exp(x[:, 0])[:, None, None] * eye,
                         lambda x: np.exp(x[:, 0])[:, None, None] * eye, lam=0.1, Lam=10.0, dim=2)
    exact = np.e
    errs = [abs(f.divergence_drift([1.0, 0.0], +1, h_fd=h)[0] - exact) for h in (1e-2, 5e-3)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


def test_conormal_values():
    f = CoefficientField.diagonal(1.0, 4.0, 2)
    gp, gm = f.conormal(Sphere([0.0, 0.0], 1.0), [1.0, 0.0])
    np.testing.assert_allclose(gp, [-1.0, 0.0])
    np.testing.assert_allclose(gm, [-4.0, 0.0])
    g = CoefficientField.diagonal(2.5, 2.5, 2)
    gp, gm = g.conormal(Sphere([0.0, 0.0], 1.0), [0.0, 1.0])
    np.testing.assert_array_equal(gp - gm, [0.0, 0.0])


def test_anisotropic_conormal():
    from transdiff import Hyperplane
    f = CoefficientField.constant(np.diag([2.0, 3.0]), np.eye(2))
    gp, _ = f.conormal(Hyperplane([0.0, 1.0], 0.0), [0.4, 0.0])
    np.testing.assert_allclose(gp, [0.0, 3.0])


def test_conormal_off_interface_rejected():
    from transdiff import ContractViolation
    f = CoefficientField.diagonal(1.0, 4.0, 2)
    with pytest.raises(ContractViolation):
        f.conormal(Sphere([0.0, 0.0], 1.0), [0.5, 0.0])


def test_audit_passes_and_detects_misdeclaration(rng):
    pts = rng.normal(size=(20, 2))
    assert CoefficientField.constant(np.eye(2), np.eye(2)).audit_ellipticity(pts).passed
    assert CoefficientField.diagonal(1.0, 4.0, 2, lam=1.0, Lam=4.0).audit_ellipticity(pts).passed
    bad = CoefficientField.diagonal(1.0, 4.0, 2, lam=1.0, Lam=2.0).audit_ellipticity(pts)
    assert not bad.passed
    assert bad.offenders[0]["eigenvalues"][-1] == pytest.approx(4.0)


@pytest.mark.parametrize("ep, em", [(0.0, 1.0), (1.0, -2.0)])
def test_nonpositive_diffusivity_rejected(ep, em):
    with pytest.raises(CoefficientError, match="ellipticity condition violated"):
        CoefficientField.diagonal(ep, em, 1)


def test_diagonal_matrix_is_exact():
    f = CoefficientField.diagonal(1.5, 0.5, 3)
    np.testing.assert_array_equal(f.matrix([0.0, 0.0, 0.0], -1), 0.5 * np.eye(3))


def test_conormal_continuous_along_circle():
    f = coefficients_from_config({"family": "smooth_radial", "params": {"eps_plus": 1.0, "eps_minus": 2.0}}, 2)
    theta = np.linspace(0, 2 * np.pi, 400)
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    gp, gm = f.conormal(Sphere([0.0, 0.0], 1.0), pts)
    step = np.linalg.norm(np.diff(gp, axis=0), axis=1)
    assert step.max() <= 2.0 * f.Lam * (theta[1] - theta[0])
