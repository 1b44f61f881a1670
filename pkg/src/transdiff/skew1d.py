"""
One-dimensional transmission diffusion
======================================

Diffusion on the real line generated by ``(eps u')'`` with
``eps = eps_plus`` on ``y > 0`` and ``eps = eps_minus`` on ``y < 0``. Its
transition density is a method-of-images combination of heat kernels with
variance ``2 eps t``. For a start ``x >= 0``::

    p(t, x, y) = g+(x - y) + beta g+(x + y)                      y >= 0
    p(t, x, y) = kappa exp(-(x/sqrt(eps+) - y/sqrt(eps-))^2 / 4t)
                 / sqrt(4 pi eps- t)                               y < 0

where ``(beta, kappa)`` solve the 2x2 system given by continuity of ``p``
and of the flux ``eps dp/dy`` at ``y = 0``. Starts on the negative side
follow by mirror symmetry with the roles of the diffusivities exchanged.

Local-time normalization
------------------------
``ell`` denotes the occupation density of the process at 0 with respect to
Lebesgue measure. The functional ``K`` that multiplies the co-normal jump in
the d-dimensional SDE is ``K = 2 ell``, and the right local time of the
distance to the interface, counted on the minus side, is
``L = eps_minus K``. With this choice ``E[X_t - x] = (eps+ - eps-) E[K_t] / 2``
holds exactly, which is what the reflection term requires.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .exceptions import DomainError

__all__ = ["Skew1DModel", "skew_transition", "density_axioms", "sampler_check"]

# erfc(8)/erfc(0) ~ 1e-29: beyond this the bridge cannot reach 0 in double precision
_BRIDGE_CUTOFF = 8.0


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("time must be strictly positive")
    return t


def _weights(eps_here, eps_there):
    """Closed-form reflection and transmission weights; arrays broadcast."""
    sh, st = np.sqrt(eps_here), np.sqrt(eps_there)
    return (sh - st) / (sh + st), 2.0 * st / (sh + st)


def _kernel(t, x, y, eps_plus, eps_minus):
    plus = x >= 0
    eh = np.where(plus, eps_plus, eps_minus)
    et = np.where(plus, eps_minus, eps_plus)
    beta, kappa = _weights(eh, et)
    sgn = np.where(plus, 1.0, -1.0)
    xs, ys = sgn * x, sgn * y
    var_h = 4.0 * eh * t
    same = (np.exp(-(xs - ys) ** 2 / var_h) + beta * np.exp(-(xs + ys) ** 2 / var_h)) / np.sqrt(np.pi * var_h)
    z = xs / np.sqrt(eh) - ys / np.sqrt(et)
    other = kappa * np.exp(-z**2 / (4.0 * t)) / np.sqrt(4.0 * np.pi * et * t)
    return np.where(ys >= 0, same, other)


def _bridge(t, x, y, eps_plus, eps_minus):
    """``E[ell_t | x, y]`` with exact zeros beyond the erfc cutoff."""
    sp, sm = np.sqrt(eps_plus), np.sqrt(eps_minus)
    a = np.abs(x) / np.where(x >= 0, sp, sm)
    b = np.abs(y) / np.where(y >= 0, sp, sm)
    arg = (a + b) / (2.0 * np.sqrt(t))
    reach = arg < _BRIDGE_CUTOFF
    out = np.zeros(np.shape(arg))
    if np.any(reach):
        pick = lambda v: np.broadcast_to(v, arg.shape)[reach]
        c = 2.0 / (sp + sm)
        c = pick(c)
        p = _kernel(pick(t), pick(x), pick(y), pick(eps_plus), pick(eps_minus))
        out[reach] = c**2 * special.erfc(arg[reach]) / (4.0 * p)
    return out


def skew_transition(x, dt, xi, u, eps_plus, eps_minus, with_local_time=True):
    """Exact transition of the 1D transmission diffusion driven by given noise.

    ``xi`` is standard normal and ``u`` uniform on (0, 1), one of each per
    point; diffusivities may be scalars or per-point arrays. In the
    side-scaled coordinate ``x / sqrt(eps_side)`` the process is a skew
    Brownian motion, so a Gaussian proposal ``z`` fixes the endpoint modulus
    and the path hits 0 surely if ``z < 0`` and with probability
    ``exp(-a |z| / dt)`` otherwise. After a hit the endpoint lands on the far
    side with probability ``sqrt(eps_there) / (sqrt(eps_here) + sqrt(eps_there))``.
    Returns ``(y, dL)`` with ``dL = 2 eps_minus E[ell | x, y]``, or ``(y, None)``.
    """
    x = np.asarray(x, dtype=float)
    plus = x >= 0
    sh = np.sqrt(np.where(plus, eps_plus, eps_minus))
    st = np.sqrt(np.where(plus, eps_minus, eps_plus))
    sgn = np.where(plus, 1.0, -1.0)
    a = sgn * x / sh
    # noise enters with the physical orientation: a same-side outcome is x + sqrt(2 eps dt) xi
    z = a + np.sqrt(2.0 * dt) * sgn * np.asarray(xi, dtype=float)
    m = np.abs(z)
    hit = np.where(z < 0, 1.0, np.exp(-a * m / dt))
    far = np.asarray(u) < hit * st / (sh + st)
    y = sgn * np.where(far, -m * st, m * sh)
    if not with_local_time:
        return y, None
    return y, 2.0 * eps_minus * _bridge(dt, x, y, eps_plus, eps_minus)


@dataclass(frozen=True)
class Skew1DModel:
    """Exact 1D transmission diffusion with interface at 0."""

    eps_plus: float
    eps_minus: float
    image_coefficients: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.eps_plus > 0 and self.eps_minus > 0):
            raise DomainError("diffusivities must be strictly positive")
        object.__setattr__(self, "image_coefficients", {
            "+": self._solve_images(self.eps_plus, self.eps_minus),
            "-": self._solve_images(self.eps_minus, self.eps_plus),
        })

    @staticmethod
    def _solve_images(eps_here, eps_there):
        """Reflection/transmission weights for a start on the ``eps_here`` side.

        Unknowns ``(beta, kappa)``:
          density continuity  (1 + beta)/sqrt(eps_here) = kappa/sqrt(eps_there)
          flux continuity     1 - beta = kappa
        """
        a = np.array([[1.0 / np.sqrt(eps_here), -1.0 / np.sqrt(eps_there)],
                      [1.0, 1.0]])
        rhs = np.array([-1.0 / np.sqrt(eps_here), 1.0])
        beta, kappa = np.linalg.solve(a, rhs)
        return {"reflection": float(beta), "transmission": float(kappa)}

    # -- density -------------------------------------------------------------

    @property
    def contact_constant(self):
        """``C`` with ``p(t, x, 0) = C exp(-a^2/4t)/sqrt(4 pi t)``, ``a = |x|/sqrt(eps_side)``."""
        return 2.0 / (np.sqrt(self.eps_plus) + np.sqrt(self.eps_minus))

    def _side_arrays(self, x):
        plus = x >= 0
        e_here = np.where(plus, self.eps_plus, self.eps_minus)
        e_there = np.where(plus, self.eps_minus, self.eps_plus)
        beta = np.where(plus, self.image_coefficients["+"]["reflection"],
                        self.image_coefficients["-"]["reflection"])
        kappa = np.where(plus, self.image_coefficients["+"]["transmission"],
                         self.image_coefficients["-"]["transmission"])
        sgn = np.where(plus, 1.0, -1.0)
        return sgn, e_here, e_there, beta, kappa

    def transition_density(self, t, x, y):
        """``p(t, x, y)``; arguments broadcast."""
        t = _check_time(t)
        t, x, y = np.broadcast_arrays(t, np.asarray(x, float), np.asarray(y, float))
        sgn, eh, et, beta, kappa = self._side_arrays(x)
        xs, ys = sgn * x, sgn * y
        var_h = 4.0 * eh * t
        same = (np.exp(-(xs - ys) ** 2 / var_h) + beta * np.exp(-(xs + ys) ** 2 / var_h)) / np.sqrt(np.pi * var_h)
        z = xs / np.sqrt(eh) - ys / np.sqrt(et)
        other = kappa * np.exp(-z**2 / (4.0 * t)) / np.sqrt(4.0 * np.pi * et * t)
        out = np.where(ys >= 0, same, other)
        return out[()] if out.ndim == 0 else out

    def cdf(self, t, x, y):
        """``P^x(X_t <= y)`` in closed form."""
        t = _check_time(t)
        t, x, y = np.broadcast_arrays(t, np.asarray(x, float), np.asarray(y, float))
        sgn, eh, et, beta, kappa = self._side_arrays(x)
        xs, ys = sgn * x, sgn * y
        s = np.sqrt(2.0 * eh * t)
        phi = special.ndtr
        # mass on the start side below ys (ys >= 0), and on the far side below ys (ys < 0)
        near = (phi((ys - xs) / s) - phi(-xs / s)) + beta * (phi((ys + xs) / s) - phi(xs / s))
        far_total = kappa * phi(-xs / s)
        far = kappa * phi((ys * np.sqrt(eh / et) - xs) / s)
        below = np.where(ys >= 0, far_total + near, far)  # mass in (-inf, ys] in mirrored frame
        out = np.where(sgn > 0, below, 1.0 - below)
        return out[()] if out.ndim == 0 else out

    def crossing_probability(self, t, x):
        """``P^x(X_t > 0)`` by adaptive quadrature of the density."""
        _check_time(t)
        t = float(t)
        x = float(x)
        s = np.sqrt(2.0 * max(self.eps_plus, self.eps_minus) * t)
        f = lambda y: float(self.transition_density(t, x, y))
        centre = abs(x)
        cuts = sorted({0.0, max(0.0, centre - 12 * s), centre, centre + 12 * s})
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b > a:
                total += integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        total += integrate.quad(f, cuts[-1], np.inf, epsabs=1e-14, limit=200)[0]
        return total

    # -- local time ------------------------------------------------------------

    def _scaled_distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(x) / np.sqrt(np.where(x >= 0, self.eps_plus, self.eps_minus))

    def bridge_occupation(self, t, x, y):
        """``E[ell_t | X_0 = x, X_t = y]``, occupation density at 0 of the bridge.

        Closed form ``C^2 erfc((a + b) / (2 sqrt t)) / (4 p(t, x, y))`` with
        ``a, b`` the side-scaled distances of the endpoints to 0. Returns an
        exact zero when the bridge cannot reach 0 at double precision.
        """
        t = _check_time(t)
        t, x, y = np.broadcast_arrays(t, np.asarray(x, float), np.asarray(y, float))
        out = _bridge(t, x, y, self.eps_plus, self.eps_minus)
        return out[()] if out.ndim == 0 else out

    def expected_pcaf(self, t, x):
        """``E^x[K_t] = 2 int_0^t p(s, x, 0) ds`` in closed form."""
        t = _check_time(t)
        a = self._scaled_distance(x)
        val = np.sqrt(t / np.pi) * np.exp(-a**2 / (4 * t)) - 0.5 * a * special.erfc(a / (2 * np.sqrt(t)))
        return 2.0 * self.contact_constant * val

    # -- sampling --------------------------------------------------------------

    def step_from_noise(self, x, dt, xi, u, with_local_time=True):
        """Exact transition from given noise; see :func:`skew_transition`."""
        return skew_transition(x, dt, xi, u, self.eps_plus, self.eps_minus, with_local_time)

    def sample_step(self, x, dt, rng):
        """Draw ``X_dt`` given ``X_0 = x`` exactly, plus the local-time increment.

        ``x`` may be an array; ``rng`` is a :class:`numpy.random.Generator`.
        """
        if not dt > 0:
            raise DomainError("dt must be strictly positive")
        x = np.asarray(x, dtype=float)
        xi = rng.standard_normal(x.shape)
        u = rng.random(x.shape)
        y, dL = self.step_from_noise(x, dt, xi, u)
        if y.ndim == 0:
            return float(y), float(dL)
        return y, dL


# -- verification ------------------------------------------------------------------


def _line_integral(f, t, eps_max, centre=0.0):
    """``int f(y) dy`` over the line, split at 0 and around ``centre``."""
    s = np.sqrt(2.0 * eps_max * t)
    cuts = sorted({-np.inf, min(0.0, centre) - 14 * s, 0.0, centre, max(0.0, centre) + 14 * s, np.inf})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            total += integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
    return total


def density_axioms(model: Skew1DModel, t, x, n_grid=41):
    """Check the defining properties of the transition density at ``(t, x)``.

    Normalization, symmetry ``p(t, x, y) = p(t, y, x)``, continuity of ``p``
    and of the flux ``eps dp/dy`` across 0, and Chapman-Kolmogorov
    ``p(2t, x, z) = int p(t, x, y) p(t, y, z) dy``.
    """
    from .report import Report

    rep = Report(f"transition density axioms (eps+={model.eps_plus}, eps-={model.eps_minus}, t={t}, x={x})")
    lam_max = max(model.eps_plus, model.eps_minus)
    p = lambda y: float(model.transition_density(t, x, y))
    rep.add("normalization", abs(_line_integral(p, t, lam_max, x) - 1.0), 1e-8)

    s = np.sqrt(2.0 * lam_max * t)
    pts = x + np.linspace(-4 * s, 4 * s, n_grid)
    P = model.transition_density(t, pts[:, None], pts[None, :])
    rep.add("symmetry", float(np.max(np.abs(P - P.T)) / np.max(P)), 1e-10)

    d = 1e-13 * s
    right = float(model.transition_density(t, x, d))
    left = float(model.transition_density(t, x, -d))
    rep.add("interface_continuity", abs(right - left) / max(right, left), 1e-10)

    # one-sided second-order differences, each on the length scale of its side
    dp, dm = 1e-4 * np.sqrt(2.0 * model.eps_plus * t), 1e-4 * np.sqrt(2.0 * model.eps_minus * t)
    steps = np.array([0.0, 1.0, 2.0])
    up = model.transition_density(t, x, steps * dp)
    down = model.transition_density(t, x, -steps * dm - d)
    d_plus = (-3 * up[0] + 4 * up[1] - up[2]) / (2 * dp)
    d_minus = (3 * down[0] - 4 * down[1] + down[2]) / (2 * dm)
    flux_p, flux_m = model.eps_plus * d_plus, model.eps_minus * d_minus
    scale = max(abs(flux_p), abs(flux_m), model.eps_plus * right / s)
    rep.add("flux_continuity", abs(flux_p - flux_m) / scale, 1e-6)

    ck = 0.0
    for z in (x - s, x, x + 0.5 * s, -x + 0.3 * s):
        inner = lambda y: float(model.transition_density(t, x, y) * model.transition_density(t, y, z))
        lhs = float(model.transition_density(2 * t, x, z))
        ck = max(ck, abs(_line_integral(inner, t, lam_max, x) - lhs))
    rep.add("chapman_kolmogorov", ck, 1e-6)
    return rep


def sampler_check(model: Skew1DModel, x=0.0, dt=1.0, n_draws=10**6, seed=0):
    """Side frequencies of exact draws against quadrature of the density.

    When the diffusivities coincide, also a one-sample KS test against the
    Gaussian ``N(x, 2 eps dt)`` at level 0.01.
    """
    from scipy import stats

    from .report import Report

    rng = np.random.Generator(np.random.PCG64(seed))
    y, _ = model.sample_step(np.full(n_draws, float(x)), dt, rng)
    rep = Report("exact sampler")
    q_plus = model.crossing_probability(dt, x)
    for name, freq, q in (("plus", np.mean(y > 0), q_plus), ("minus", np.mean(y < 0), 1.0 - q_plus)):
        se = np.sqrt(q * (1.0 - q) / n_draws)
        rep.add(f"frequency_{name}", abs(freq - q), 3.0 * se, frequency=float(freq), quadrature=q)
    if model.eps_plus == model.eps_minus:
        ks = stats.kstest(y, stats.norm(loc=x, scale=np.sqrt(2.0 * model.eps_plus * dt)).cdf)
        rep.add("ks_gaussian_pvalue", float(ks.pvalue), 0.01, ">=", statistic=float(ks.statistic))
    return rep
