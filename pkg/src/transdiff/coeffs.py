"""
Coefficient fields
==================

A :class:`CoefficientField` holds the two one-sided smooth extensions
``a_plus`` and ``a_minus`` of a symmetric, uniformly elliptic matrix field.
Which extension applies at a point is decided by the geometry, never by the
field itself.

Callables follow a batch convention: ``a_plus(x)`` maps points of shape
``(n, d)`` to matrices of shape ``(n, d, d)``, and the optional divergence
closures map ``(n, d)`` to ``(n, d)`` with ``b_k = sum_j d_j a_kj``.

``side`` arguments are either ``"+"``/``"-"`` (one side for every point) or
a boolean array, ``True`` meaning the ``+`` extension.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .exceptions import CoefficientError, ContractViolation

__all__ = [
    "CoefficientField",
    "EllipticityReport",
    "COEFFICIENT_REGISTRY",
    "coefficients_from_config",
]

_SYM_TOL = 1e-12


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != dim:
        raise ContractViolation(f"expected points of dimension {dim}, got {x.shape}")
    return pts, single


def _side_mask(side, n):
    if isinstance(side, str):
        if side not in ("+", "-"):
            raise ContractViolation(f"side must be '+' or '-', got {side!r}")
        return np.full(n, side == "+")
    side = np.asarray(side)
    mask = side if side.dtype == bool else side > 0
    return np.broadcast_to(mask, (n,))


@dataclass(frozen=True)
class EllipticityReport:
    passed: bool
    lam: float
    Lam: float
    min_eigenvalue: float
    max_eigenvalue: float
    offenders: list = dc_field(default_factory=list)

    def to_dict(self):
        return {
            "passed": self.passed,
            "lambda": self.lam,
            "Lambda": self.Lam,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "offenders": self.offenders,
        }


@dataclass(frozen=True)
class CoefficientField:
    """Matrix coefficient with one-sided extensions and ellipticity bounds.

    Parameters
    ----------
    a_plus, a_minus : callable
        Batched matrix fields on the ``+`` and ``-`` sides.
    lam, Lam : float
        Declared ellipticity bounds ``0 < lam <= Lam``.
    dim : int
        Space dimension.
    a_plus_div, a_minus_div : callable, optional
        Analytic divergence closures. When absent, central differences are used.
    diagonal_constants : (float, float), optional
        ``(eps_plus, eps_minus)`` when ``a = eps * I`` with constant ``eps`` per side.
    fd_step : float, optional
        Fixed finite-difference step; the default is ``1e-5 * (1 + |x|)``.
    """

    a_plus: Callable[[np.ndarray], np.ndarray]
    a_minus: Callable[[np.ndarray], np.ndarray]
    lam: float
    Lam: float
    dim: int
    a_plus_div: Callable | None = None
    a_minus_div: Callable | None = None
    diagonal_constants: tuple | None = None
    fd_step: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if not (self.lam > 0 and self.Lam >= self.lam and np.isfinite(self.Lam)):
            raise CoefficientError(
                f"ellipticity condition violated: need 0 < lambda <= Lambda < inf, "
                f"got lambda={self.lam}, Lambda={self.Lam}"
            )

    # -- constructors ------------------------------------------------------

    @classmethod
    def diagonal(cls, eps_plus, eps_minus, dim, lam=None, Lam=None):
        """Piecewise-constant isotropic field ``a = eps_plus I`` / ``eps_minus I``."""
        eps_plus, eps_minus = float(eps_plus), float(eps_minus)
        if not (eps_plus > 0 and eps_minus > 0):
            raise CoefficientError(
                "ellipticity condition violated: diffusivities must be strictly positive "
                f"(eps_plus={eps_plus}, eps_minus={eps_minus})"
            )
        eye = np.eye(dim)

        def const(eps):
            return lambda x: np.broadcast_to(eps * eye, (len(x), dim, dim)).copy()

        def zero(x):
            return np.zeros((len(x), dim))

        return cls(
            const(eps_plus), const(eps_minus),
            lam=min(eps_plus, eps_minus) if lam is None else lam,
            Lam=max(eps_plus, eps_minus) if Lam is None else Lam,
            dim=dim, a_plus_div=zero, a_minus_div=zero,
            diagonal_constants=(eps_plus, eps_minus), name="diagonal",
        )

    @classmethod
    def constant(cls, a_plus, a_minus, lam=None, Lam=None):
        """Piecewise-constant (possibly anisotropic) matrices."""
        ap = np.asarray(a_plus, dtype=float)
        am = np.asarray(a_minus, dtype=float)
        dim = ap.shape[0]
        eig = np.concatenate([np.linalg.eigvalsh(ap), np.linalg.eigvalsh(am)])
        if eig.min() <= 0:
            raise CoefficientError("ellipticity condition violated: matrices must be positive definite")

        def zero(x):
            return np.zeros((len(x), dim))

        return cls(
            lambda x: np.broadcast_to(ap, (len(x), dim, dim)).copy(),
            lambda x: np.broadcast_to(am, (len(x), dim, dim)).copy(),
            lam=float(eig.min()) if lam is None else lam,
            Lam=float(eig.max()) if Lam is None else Lam,
            dim=dim, a_plus_div=zero, a_minus_div=zero, name="constant",
        )

    # -- evaluation ----------------------------------------------------------

    @property
    def is_diagonal(self):
        return self.diagonal_constants is not None

    def matrix(self, x, side):
        """``a_plus(x)`` or ``a_minus(x)`` per point."""
        pts, single = _points(x, self.dim)
        plus = _side_mask(side, len(pts))
        out = np.empty((len(pts), self.dim, self.dim))
        if plus.any():
            out[plus] = self.a_plus(pts[plus])
        if (~plus).any():
            out[~plus] = self.a_minus(pts[~plus])
        return out[0] if single else out

    def sigma(self, x, side):
        """Symmetric positive square root of ``2 a(x)`` on the given side."""
        pts, single = _points(x, self.dim)
        plus = _side_mask(side, len(pts))
        if self.is_diagonal:
            eps = np.where(plus, *self.diagonal_constants)
            out = np.sqrt(2.0 * eps)[:, None, None] * np.eye(self.dim)
            return out[0] if single else out
        a = self.matrix(pts, plus)
        self._check_symmetric(a, pts)
        w, v = np.linalg.eigh(a)
        if np.any(w <= 0):
            i = int(np.argmax(np.any(w <= 0, axis=1)))
            raise CoefficientError(
                f"coefficient matrix not positive definite at {pts[i].tolist()}: eigenvalues {w[i].tolist()}"
            )
        out = np.einsum("nij,nj,nkj->nik", v, np.sqrt(2.0 * w), v)
        return out[0] if single else out

    def divergence_drift(self, x, side, h_fd=None):
        """Drift ``b_k = sum_j d_j a_kj`` on the given side."""
        pts, single = _points(x, self.dim)
        plus = _side_mask(side, len(pts))
        out = np.empty((len(pts), self.dim))
        for mask, closure, fn in ((plus, self.a_plus_div, self.a_plus),
                                  (~plus, self.a_minus_div, self.a_minus)):
            if not mask.any():
                continue
            if closure is not None and h_fd is None:
                out[mask] = closure(pts[mask])
            else:
                out[mask] = self._fd_divergence(fn, pts[mask], h_fd)
        return out[0] if single else out

    def _fd_divergence(self, fn, pts, h_fd):
        if h_fd is not None:
            h = np.full(len(pts), float(h_fd))
        elif self.fd_step is not None:
            h = np.full(len(pts), float(self.fd_step))
        else:
            h = 1e-5 * (1.0 + np.linalg.norm(pts, axis=1))
        b = np.zeros((len(pts), self.dim))
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = 1.0
            step = h[:, None] * e
            da = (fn(pts + step) - fn(pts - step)) / (2.0 * h[:, None, None])
            b += da[:, :, j]
        return b

    def conormal(self, geom, x, tol=None):
        """Co-normals ``(a_plus nu, a_minus nu)`` at a point of the interface."""
        pts, single = _points(x, self.dim)
        if tol is None:
            scale = geom.bounding_radius if np.isfinite(geom.bounding_radius) else 1.0
            tol = 1e-8 * max(1.0, scale)
        nu = np.atleast_2d(geom.normal_at(pts, tol))
        ap = self.a_plus(pts)
        am = self.a_minus(pts)
        gp = np.einsum("nij,nj->ni", ap, nu)
        gm = np.einsum("nij,nj->ni", am, nu)
        if single:
            return gp[0], gm[0]
        return gp, gm

    def normal_diffusivity(self, x, nu):
        """``(nu . a_plus nu, nu . a_minus nu)`` for batched points and normals."""
        pts, _ = _points(x, self.dim)
        nu = np.atleast_2d(nu)
        if self.is_diagonal:
            ep, em = self.diagonal_constants
            return np.full(len(pts), ep), np.full(len(pts), em)
        ap = self.a_plus(pts)
        am = self.a_minus(pts)
        return (np.einsum("ni,nij,nj->n", nu, ap, nu),
                np.einsum("ni,nij,nj->n", nu, am, nu))

    def audit_ellipticity(self, sample_points, rel_tol=1e-9) -> EllipticityReport:
        """Check the spectra of both extensions against ``[lam, Lam]``."""
        pts, _ = _points(sample_points, self.dim)
        if len(pts) == 0:
            raise ContractViolation("audit needs at least one sample point")
        lo, hi = self.lam * (1 - rel_tol), self.Lam * (1 + rel_tol)
        offenders = []
        wmin, wmax = np.inf, -np.inf
        for label, fn in (("+", self.a_plus), ("-", self.a_minus)):
            a = np.asarray(fn(pts), dtype=float)
            asym = np.max(np.abs(a - np.swapaxes(a, 1, 2)), axis=(1, 2))
            w = np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, 1, 2)))
            wmin = min(wmin, float(w.min()))
            wmax = max(wmax, float(w.max()))
            bad = (w[:, 0] < lo) | (w[:, -1] > hi) | (asym > _SYM_TOL * self.Lam)
            for i in np.flatnonzero(bad):
                offenders.append({
                    "point": pts[i].tolist(),
                    "side": label,
                    "eigenvalues": w[i].tolist(),
                    "asymmetry": float(asym[i]),
                })
        offenders.sort(key=lambda o: -max(o["eigenvalues"][-1] / self.Lam, self.lam / o["eigenvalues"][0]))
        return EllipticityReport(not offenders, self.lam, self.Lam, wmin, wmax, offenders)

    def _check_symmetric(self, a, pts):
        asym = np.max(np.abs(a - np.swapaxes(a, 1, 2)), axis=(1, 2))
        if np.any(asym > _SYM_TOL * self.Lam):
            i = int(np.argmax(asym))
            raise CoefficientError(f"coefficient matrix not symmetric at {pts[i].tolist()}")


# -- registry of built-in families ---------------------------------------------


def _smooth_radial(dim, eps_plus, eps_minus, amplitude=0.5, width=1.0):
    """``a_pm(x) = eps_pm (1 + amplitude exp(-|x|^2 / width^2)) I``."""
    eye = np.eye(dim)

    def make(eps):
        def a(x):
            g = 1.0 + amplitude * np.exp(-np.sum(x**2, axis=1) / width**2)
            return (eps * g)[:, None, None] * eye

        def div(x):
            g = np.exp(-np.sum(x**2, axis=1) / width**2)
            return (eps * amplitude * g)[:, None] * (-2.0 * x / width**2)

        return a, div

    ap, dp = make(eps_plus)
    am, dm = make(eps_minus)
    lo = min(eps_plus, eps_minus) * min(1.0, 1.0 + amplitude)
    hi = max(eps_plus, eps_minus) * max(1.0, 1.0 + amplitude)
    return CoefficientField(ap, am, lam=lo, Lam=hi, dim=dim, a_plus_div=dp, a_minus_div=dm,
                            name="smooth_radial")


def _constant_matrix(dim, a_plus, a_minus):
    field = CoefficientField.constant(a_plus, a_minus)
    if field.dim != dim:
        raise CoefficientError("matrix size does not match the geometry dimension")
    return field


COEFFICIENT_REGISTRY = {
    "smooth_radial": _smooth_radial,
    "constant_matrix": _constant_matrix,
}


def coefficients_from_config(spec: dict, dim: int) -> CoefficientField:
    """``{"diagonal": {...}}`` or ``{"family": name, "params": {...}}``."""
    if "diagonal" in spec:
        d = spec["diagonal"]
        return CoefficientField.diagonal(d["eps_plus"], d["eps_minus"], dim)
    name = spec.get("family")
    if name not in COEFFICIENT_REGISTRY:
        raise CoefficientError(f"unknown coefficient family {name!r}")
    return COEFFICIENT_REGISTRY[name](dim, **spec.get("params", {}))
