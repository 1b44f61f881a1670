"""
Interface geometry
==================

An interface is the zero level set of a scalar field ``phi``. The two open
sides are ``D+ = {phi > 0}`` and ``D- = {phi < 0}``; the unit normal
``nu = grad(phi) / |grad(phi)|`` points into ``D+``.

Three kinds are provided:

* :class:`Hyperplane` -- ``phi(x) = n.x - offset``, closed form everywhere.
* :class:`Sphere` -- closed-form signed distance; ``D+`` is the interior by
  default.
* :class:`LevelSetInterface` -- arbitrary smooth level set given by two
  callbacks (``phi`` and its gradient). Distances are obtained by a
  closest-point projection built from Newton steps along ``grad(phi)``.

All evaluation methods accept a single point of shape ``(d,)`` or a batch of
shape ``(n, d)`` and return results of the matching shape.
"""
from __future__ import annotations

import enum
from typing import Callable

import numpy as np

from .exceptions import ContractViolation, GeometryError

__all__ = [
    "Region",
    "InterfaceGeometry",
    "Hyperplane",
    "Sphere",
    "LevelSetInterface",
    "ellipse",
    "geometry_from_config",
]


class Region(enum.IntEnum):
    MINUS_BULK = -1
    LAYER = 0
    PLUS_BULK = 1


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != dim:
        raise ContractViolation(f"expected points of dimension {dim}, got shape {x.shape}")
    return pts, single


def _unit(v):
    nrm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / nrm


class InterfaceGeometry:
    """Common interface of all geometry kinds.

    Subclasses implement :meth:`levelset`, :meth:`levelset_gradient` and
    :meth:`_project` (closest point on the interface and the signed distance).
    """

    kind = "abstract"
    dim: int
    bounding_radius: float

    def levelset(self, x):
        raise NotImplementedError

    def levelset_gradient(self, x):
        raise NotImplementedError

    def _project(self, pts):
        """Return ``(foot, signed_distance)`` for a batch of points."""
        raise NotImplementedError

    # -- public operations -------------------------------------------------

    def project(self, x):
        """Closest point of the interface to ``x``."""
        pts, single = _as_points(x, self.dim)
        foot, _ = self._project(pts)
        return foot[0] if single else foot

    def signed_distance(self, x):
        """Signed distance to the interface, positive in ``D+``.

        The unsigned distance is ``abs(signed_distance(x))``.
        """
        pts, single = _as_points(x, self.dim)
        _, rho = self._project(pts)
        return float(rho[0]) if single else rho

    def normal_at(self, x, tol):
        """Unit normal (pointing into ``D+``) at the projection of ``x``.

        Raises :class:`ContractViolation` when ``|signed_distance(x)| > tol``.
        """
        pts, single = _as_points(x, self.dim)
        foot, rho = self._project(pts)
        far = np.abs(rho) > tol
        if np.any(far):
            i = int(np.argmax(far))
            raise ContractViolation(
                f"point {pts[i].tolist()} is at distance {abs(rho[i]):.3g} from the "
                f"interface, beyond the layer tolerance {tol:.3g}"
            )
        nu = self._normal_on_surface(foot)
        return nu[0] if single else nu

    def project_with_normal(self, x):
        """Return ``(foot, signed_distance, normal at foot)`` in one pass."""
        pts, single = _as_points(x, self.dim)
        foot, rho = self._project(pts)
        nu = self._normal_on_surface(foot)
        if single:
            return foot[0], float(rho[0]), nu[0]
        return foot, rho, nu

    def classify(self, x, layer_halfwidth):
        """Region of ``x``: ``LAYER`` iff ``|rho| <= layer_halfwidth``, else by side."""
        if not layer_halfwidth > 0:
            raise ContractViolation("layer_halfwidth must be positive")
        rho = np.asarray(self.signed_distance(x))
        out = np.where(
            np.abs(rho) <= layer_halfwidth,
            int(Region.LAYER),
            np.where(rho > 0, int(Region.PLUS_BULK), int(Region.MINUS_BULK)),
        )
        if out.ndim == 0:
            return Region(int(out))
        return out

    def _normal_on_surface(self, foot):
        return _unit(np.asarray(self.levelset_gradient(foot), dtype=float))


class Hyperplane(InterfaceGeometry):
    """``{x : n.x = offset}`` with ``D+ = {n.x > offset}``."""

    kind = "hyperplane"

    def __init__(self, normal, offset=0.0):
        n = np.asarray(normal, dtype=float).ravel()
        nn = np.linalg.norm(n)
        if not nn > 0:
            raise ContractViolation("hyperplane normal must be nonzero")
        self.normal = n / nn
        self.offset = float(offset)
        self.dim = n.size
        self.bounding_radius = np.inf

    def __repr__(self):
        return f"Hyperplane(normal={self.normal.tolist()}, offset={self.offset})"

    def levelset(self, x):
        return np.asarray(x, dtype=float) @ self.normal - self.offset

    def levelset_gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.normal, x.shape).copy()

    def _project(self, pts):
        rho = pts @ self.normal - self.offset
        return pts - rho[:, None] * self.normal, rho

    def _normal_on_surface(self, foot):
        return np.broadcast_to(self.normal, foot.shape).copy()


class Sphere(InterfaceGeometry):
    """Sphere of given center and radius.

    With ``plus="interior"`` (default) ``D+`` is the open ball, so the normal
    points towards the center.
    """

    kind = "sphere"

    def __init__(self, center, radius, plus="interior"):
        self.center = np.asarray(center, dtype=float).ravel()
        self.radius = float(radius)
        if not self.radius > 0:
            raise ContractViolation("sphere radius must be positive")
        if plus not in ("interior", "exterior"):
            raise ContractViolation("plus must be 'interior' or 'exterior'")
        self.plus = plus
        self._sign = 1.0 if plus == "interior" else -1.0
        self.dim = self.center.size
        self.bounding_radius = float(np.linalg.norm(self.center) + self.radius)

    def __repr__(self):
        return f"Sphere(center={self.center.tolist()}, radius={self.radius}, plus={self.plus!r})"

    def levelset(self, x):
        r2 = np.sum((np.asarray(x, dtype=float) - self.center) ** 2, axis=-1)
        return self._sign * (self.radius**2 - r2) / (2.0 * self.radius)

    def levelset_gradient(self, x):
        return -self._sign * (np.asarray(x, dtype=float) - self.center) / self.radius

    def _project(self, pts):
        rel = pts - self.center
        r = np.linalg.norm(rel, axis=1)
        direction = np.empty_like(rel)
        ok = r > 0
        direction[ok] = rel[ok] / r[ok, None]
        # every boundary point is closest to the center; pick a fixed one
        direction[~ok] = 0.0
        direction[~ok, 0] = 1.0
        foot = self.center + self.radius * direction
        return foot, self._sign * (self.radius - r)

    def _normal_on_surface(self, foot):
        return -self._sign * _unit(foot - self.center)


class LevelSetInterface(InterfaceGeometry):
    """Generic compact interface ``{phi = 0}`` given by callbacks.

    ``phi`` maps ``(n, d)`` points to ``(n,)`` values and ``grad_phi`` maps
    them to ``(n, d)`` gradients. A Newton walk along ``grad(phi)`` lands on
    the surface. Newton's method on the closest-point optimality system then
    refines the foot, and a tangential fixed-point loop is the fallback. Each
    loop is capped at ``max_iter`` iterations.

    Within the reach of the surface the foot is the true closest point. Near
    the medial axis two feet can be almost equally close; the fallback then
    returns the nearest surface point it visited, which may be only locally
    closest. The sign is always that of ``phi``.
    """

    kind = "generic"

    def __init__(
        self,
        phi: Callable[[np.ndarray], np.ndarray],
        grad_phi: Callable[[np.ndarray], np.ndarray],
        dim: int,
        bounding_radius: float,
        tol: float | None = None,
        max_iter: int = 50,
    ):
        self._phi = phi
        self._grad = grad_phi
        self.dim = int(dim)
        self.bounding_radius = float(bounding_radius)
        self.tol = 1e-10 * self.bounding_radius if tol is None else float(tol)
        self.max_iter = int(max_iter)

    def __repr__(self):
        return f"LevelSetInterface(dim={self.dim}, bounding_radius={self.bounding_radius})"

    def levelset(self, x):
        pts, single = _as_points(x, self.dim)
        v = np.asarray(self._phi(pts), dtype=float)
        return float(v[0]) if single else v

    def levelset_gradient(self, x):
        pts, single = _as_points(x, self.dim)
        g = np.asarray(self._grad(pts), dtype=float)
        return g[0] if single else g

    def _newton_foot(self, z):
        y = z.copy()
        active = np.ones(len(y), dtype=bool)
        for _ in range(self.max_iter):
            f = self._phi(y[active])
            g = self._grad(y[active])
            gg = np.sum(g * g, axis=1)
            if np.any(gg <= 0):
                bad = np.flatnonzero(active)[np.argmax(gg <= 0)]
                raise GeometryError("vanishing level-set gradient during projection", z[bad])
            step = (f / gg)[:, None] * g
            y[active] -= step
            done = np.linalg.norm(step, axis=1) <= 0.1 * self.tol
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            if not active.any():
                return y
        bad = int(np.flatnonzero(active)[0])
        raise GeometryError("Newton projection onto the level set did not converge", z[bad])

    def _hessian(self, y):
        d = self.dim
        delta = 1e-6 * max(1.0, self.bounding_radius)
        H = np.empty((len(y), d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = delta
            H[:, :, j] = (self._grad(y + e) - self._grad(y - e)) / (2.0 * delta)
        return 0.5 * (H + np.swapaxes(H, 1, 2))

    def _tangential(self, pts, y):
        nu = _unit(self._grad(y))
        diff = pts - y
        return diff - np.sum(diff * nu, axis=1, keepdims=True) * nu

    def _lagrange_newton(self, pts, y):
        """Newton on ``y - x + mu grad(phi)(y) = 0, phi(y) = 0`` from a point on the surface."""
        n, d = y.shape
        g = self._grad(y)
        mu = -np.sum((y - pts) * g, axis=1) / np.sum(g * g, axis=1)
        J = np.zeros((n, d + 1, d + 1))
        for _ in range(self.max_iter):
            g = self._grad(y)
            F = np.concatenate([y - pts + mu[:, None] * g, self._phi(y)[:, None]], axis=1)
            if np.all(np.linalg.norm(F, axis=1) <= 0.1 * self.tol):
                break
            J[:, :d, :d] = np.eye(d) + mu[:, None, None] * self._hessian(y)
            J[:, :d, d] = g
            J[:, d, :d] = g
            try:
                step = np.linalg.solve(J, -F[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(step)):
                return None
            # cap the move to a fraction of the current distance scale
            scale = np.maximum(np.linalg.norm(y - pts, axis=1), self.tol)
            size = np.linalg.norm(step[:, :d], axis=1)
            shrink = np.minimum(1.0, 0.5 * scale / np.maximum(size, 1e-300))[:, None]
            y = y + shrink * step[:, :d]
            mu = mu + shrink[:, 0] * step[:, d]
        return y

    def _project(self, pts):
        y0 = self._newton_foot(pts)
        y = self._lagrange_newton(pts, y0)
        if y is not None:
            y = self._newton_foot(y)
            # keep the Newton answer only where it converged to a nearer foot
            ok = (np.linalg.norm(self._tangential(pts, y), axis=1) <= self.tol) & (
                np.linalg.norm(pts - y, axis=1) <= np.linalg.norm(pts - y0, axis=1) + self.tol)
        else:
            y, ok = y0.copy(), np.zeros(len(pts), dtype=bool)
        if not ok.all():
            y[~ok] = self._fixed_point(pts[~ok], y0[~ok])
        dist = np.linalg.norm(pts - y, axis=1)
        sign = np.sign(self._phi(pts))
        return y, sign * dist

    def _fixed_point(self, pts, y):
        # near the medial axis the loop can cycle between rival feet; keep the
        # nearest surface point visited
        best, best_dist = y.copy(), np.linalg.norm(pts - y, axis=1)
        for _ in range(self.max_iter):
            tangential = self._tangential(pts, y)
            if np.all(np.linalg.norm(tangential, axis=1) <= self.tol):
                return y
            y_new = self._newton_foot(y + tangential)
            moved = np.linalg.norm(y_new - y, axis=1)
            y = y_new
            dist = np.linalg.norm(pts - y, axis=1)
            nearer = dist < best_dist
            best[nearer], best_dist[nearer] = y[nearer], dist[nearer]
            if np.all(moved <= 0.01 * self.tol):
                return y
        off = ~(np.abs(self._phi(best)) <= self.tol * np.linalg.norm(self._grad(best), axis=1))
        off |= ~np.all(np.isfinite(best), axis=1)
        if np.any(off):
            raise GeometryError("closest-point projection did not converge", pts[int(np.argmax(off))])
        return best


def ellipse(semi_axes, center=None, plus="interior", **kwargs) -> LevelSetInterface:
    """Axis-aligned ellipsoid as a generic level-set interface."""
    ax = np.asarray(semi_axes, dtype=float).ravel()
    c = np.zeros_like(ax) if center is None else np.asarray(center, dtype=float).ravel()
    s = 1.0 if plus == "interior" else -1.0
    scale = ax.min()

    def phi(x):
        return s * scale * (1.0 - np.sum(((x - c) / ax) ** 2, axis=-1)) / 2.0

    def grad(x):
        return -s * scale * (x - c) / ax**2

    return LevelSetInterface(phi, grad, dim=ax.size,
                             bounding_radius=float(np.linalg.norm(c) + ax.max()), **kwargs)


def geometry_from_config(spec: dict) -> InterfaceGeometry:
    """Build a geometry from its JSON description.

    ``{"kind": "sphere", "center": [...], "radius": r, "plus": "interior"}``,
    ``{"kind": "hyperplane", "normal": [...], "offset": c}`` or
    ``{"kind": "ellipse", "semi_axes": [...], "center": [...]}``.
    """
    kind = spec["kind"]
    if kind == "sphere":
        return Sphere(spec["center"], spec["radius"], spec.get("plus", "interior"))
    if kind == "hyperplane":
        return Hyperplane(spec["normal"], spec.get("offset", 0.0))
    if kind == "ellipse":
        return ellipse(spec["semi_axes"], spec.get("center"), spec.get("plus", "interior"))
    raise ContractViolation(f"unknown geometry kind {kind!r}")
