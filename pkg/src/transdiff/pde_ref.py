"""
Deterministic reference solvers
===============================

Finite-volume discretizations of ``div(eps grad u)`` on interface-pinned 1D
grids (Cartesian or radially symmetric), exact discrete spectral calculus
for the resulting symmetric operators, and checks built on top of them:
semigroup identities, two-sided Gaussian bounds for the discrete kernel and
the flux-continuity residual at the interface.

Edge fluxes are ``c_e (u_{i+1} - u_i)`` with conductance
``c_e = w_e / (d_i / eps_i + d_{i+1} / eps_{i+1})`` where ``d`` are the
center-to-edge distances and ``w_e`` the edge measure (1 in 1D,
``r_e^(d-1)`` in radial coordinates). On a uniform grid this is the
harmonic mean ``2 eps+ eps- / (eps+ + eps-)`` at the interface edge, which
makes the discrete flux continuous across the jump.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, linalg, sparse

from .exceptions import AssemblyError, ContractViolation, DomainError, UnsupportedCaseError
from .report import Report

__all__ = [
    "Grid1D",
    "DiscreteOperator",
    "assemble_1d",
    "assemble_radial",
    "radial_operator_for",
    "solve_parabolic",
    "heat_kernel",
    "semigroup_identity_suite",
    "discrete_density_aronson",
    "transmission_residual",
    "fv_transition_density",
    "occupation_density_at_interface",
    "fv_density_distance",
]

MAX_EIG_CELLS = 4096


@dataclass(frozen=True)
class Grid1D:
    """Cell edges of a 1D grid, optionally with an interface on one edge."""

    edges: np.ndarray
    interface: float | None = 0.0
    bc: str = "neumann"

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "edges", e)
        if e.ndim != 1 or np.any(np.diff(e) <= 0):
            raise AssemblyError("grid edges must be strictly increasing")
        if e.size - 1 < 16:
            raise AssemblyError("grid needs at least 16 cells")
        if self.bc not in ("neumann", "dirichlet"):
            raise AssemblyError(f"unknown boundary condition {self.bc!r}")

    @classmethod
    def uniform(cls, lo, hi, n, interface=0.0, bc="neumann"):
        """Uniform grid; the edge closest to ``interface`` is pinned onto it."""
        edges = np.linspace(lo, hi, n + 1)
        if interface is not None:
            k = int(np.argmin(np.abs(edges - interface)))
            if abs(edges[k] - interface) <= 1e-9 * (hi - lo) / n:
                edges[k] = interface
        return cls(edges, interface, bc)

    @property
    def n(self):
        return self.edges.size - 1

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def bounds(self):
        return float(self.edges[0]), float(self.edges[-1])

    def interface_edge(self):
        """Index ``k`` of the edge equal to the interface."""
        if self.interface is None:
            raise AssemblyError("grid has no interface")
        hit = np.flatnonzero(self.edges == self.interface)
        if hit.size != 1 or hit[0] in (0, self.n):
            raise AssemblyError(
                f"interface {self.interface} does not coincide with an interior cell edge"
            )
        return int(hit[0])


@dataclass
class DiscreteOperator:
    """Symmetric finite-volume operator ``A = V^-1 L`` on a chain of cells.

    ``L`` is symmetric negative semidefinite; ``V`` the diagonal of cell
    volumes. Eigenpairs ``(gamma_k, e_k)`` of ``-A`` are orthonormal in the
    volume-weighted inner product and are computed on first use.
    """

    centers: np.ndarray
    volumes: np.ndarray
    conductance: np.ndarray
    edge_measure: np.ndarray
    edge_spacing: np.ndarray
    cell_eps: np.ndarray
    boundary_conductance: np.ndarray = field(default_factory=lambda: np.zeros(2))
    interface_edge: int | None = None
    dim: int = 1

    @property
    def n(self):
        return self.centers.size

    @property
    def lam(self):
        return float(self.cell_eps.min())

    @property
    def Lam(self):
        return float(self.cell_eps.max())

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        c = self.conductance
        diag = np.zeros(self.n)
        diag[:-1] -= c
        diag[1:] -= c
        diag[0] -= self.boundary_conductance[0]
        diag[-1] -= self.boundary_conductance[1]
        return sparse.diags([c, diag, c], [-1, 0, 1], format="csr")

    @property
    def matrix(self) -> sparse.csr_matrix:
        return sparse.diags(1.0 / self.volumes) @ self.stiffness

    def dense(self):
        return self.matrix.toarray()

    # -- spectral calculus --------------------------------------------------

    @cached_property
    def eigen(self):
        """``(gamma, modes)``: eigenvalues of ``-A`` (ascending) and V-orthonormal modes."""
        if self.n > MAX_EIG_CELLS:
            raise ContractViolation(f"eigendecomposition limited to {MAX_EIG_CELLS} cells")
        s = 1.0 / np.sqrt(self.volumes)
        main = -self.stiffness.diagonal() * s * s
        off = -self.conductance * s[:-1] * s[1:]
        gamma, q = linalg.eigh_tridiagonal(main, off)
        return gamma, q * s[:, None]

    def spectral_coefficients(self, f):
        _, modes = self.eigen
        return modes.T @ (self.volumes * np.asarray(f, dtype=float))

    def semigroup(self, f, t):
        """``T_t f = sum_k exp(-gamma_k t) (f, e_k) e_k``."""
        gamma, modes = self.eigen
        return modes @ (np.exp(-gamma * t) * self.spectral_coefficients(f))

    def spectral_projection(self, f, level):
        """``E_level f``: projection onto modes with ``gamma_k <= level``."""
        gamma, modes = self.eigen
        return modes @ np.where(gamma <= level, self.spectral_coefficients(f), 0.0)

    # -- quadratic forms ---------------------------------------------------------

    def inner(self, f, g):
        return float(np.sum(self.volumes * f * g))

    def norm(self, f):
        return np.sqrt(self.inner(f, f))

    def energy(self, f, g):
        """Discrete Dirichlet form ``-(A f, g) = sum_e c_e df dg`` (+ Dirichlet ghosts)."""
        e = float(np.sum(self.conductance * np.diff(f) * np.diff(g)))
        b = self.boundary_conductance
        return e + b[0] * f[0] * g[0] + b[1] * f[-1] * g[-1]

    def grad_norm(self, f):
        """``||grad_h f||`` with edge gradients ``df / delta_e`` weighted by ``w_e delta_e``."""
        return float(np.sqrt(np.sum(self.edge_measure * np.diff(f) ** 2 / self.edge_spacing)))

    # -- invariants ------------------------------------------------------------------

    def check_invariants(self) -> Report:
        rep = Report("discrete operator invariants")
        L = self.stiffness.toarray() if self.n <= MAX_EIG_CELLS else None
        scale = abs(self.stiffness).max()
        if L is not None:
            rep.add("volume_symmetry", np.abs(L - L.T).max() / scale, 1e-12)
            gamma, _ = self.eigen
            A_norm = np.abs(gamma).max()
            rep.add("negative_semidefinite", -gamma.min() / A_norm, 1e-10)
        if not self.boundary_conductance.any():
            rows = np.abs(np.asarray(self.stiffness.sum(axis=1)).ravel()) / self.volumes
            rep.add("row_sums", rows.max() / abs(self.matrix).max(), 1e-12)
        return rep


def _chain_operator(edges, cell_eps, edge_measure, volumes, centers, bc, interface_edge,
                    averaging="harmonic", dim=1):
    d_left = edges[1:-1] - centers[:-1]
    d_right = centers[1:] - edges[1:-1]
    el, er = cell_eps[:-1], cell_eps[1:]
    if averaging == "harmonic":
        conductance = edge_measure / (d_left / el + d_right / er)
    elif averaging == "arithmetic":
        conductance = edge_measure * 0.5 * (el + er) / (d_left + d_right)
    else:
        raise AssemblyError(f"unknown averaging {averaging!r}")
    bcond = np.zeros(2)
    if bc == "dirichlet":
        wl = 1.0 if dim == 1 else edges[0] ** (dim - 1)
        bcond[0] = wl * cell_eps[0] / (centers[0] - edges[0])
        bcond[1] = edges[-1] ** (dim - 1) * cell_eps[-1] / (edges[-1] - centers[-1]) if dim > 1 \
            else cell_eps[-1] / (edges[-1] - centers[-1])
    return DiscreteOperator(
        centers=centers, volumes=volumes, conductance=conductance,
        edge_measure=np.asarray(edge_measure, dtype=float) * np.ones_like(conductance),
        edge_spacing=d_left + d_right, cell_eps=cell_eps, boundary_conductance=bcond,
        interface_edge=interface_edge, dim=dim,
    )


def assemble_1d(eps_plus, eps_minus, grid: Grid1D, averaging="harmonic") -> DiscreteOperator:
    """Finite-volume ``d/dy (eps du/dy)`` with ``eps = eps_plus`` right of the interface."""
    if not (eps_plus > 0 and eps_minus > 0):
        raise AssemblyError("diffusivities must be strictly positive")
    k = grid.interface_edge()
    centers = grid.centers
    cell_eps = np.where(np.arange(grid.n) >= k, float(eps_plus), float(eps_minus))
    return _chain_operator(grid.edges, cell_eps, 1.0, grid.widths, centers, grid.bc, k,
                           averaging=averaging)


def assemble_radial(eps_inside, eps_outside, radius, d, grid: Grid1D) -> DiscreteOperator:
    """Radially symmetric ``r^(1-d) (r^(d-1) eps u')'`` on ``[0, R_max]``.

    ``grid`` must start at ``r = 0`` and carry ``radius`` as its interface.
    The edge at ``r = 0`` has zero flux.
    """
    if grid.edges[0] != 0.0:
        raise AssemblyError("radial grid must start at r = 0")
    if grid.interface != radius:
        raise AssemblyError("radial grid interface must equal the sphere radius")
    if not (eps_inside > 0 and eps_outside > 0):
        raise AssemblyError("diffusivities must be strictly positive")
    k = grid.interface_edge()
    e = grid.edges
    volumes = (e[1:] ** d - e[:-1] ** d) / d
    cell_eps = np.where(np.arange(grid.n) < k, float(eps_inside), float(eps_outside))
    return _chain_operator(e, cell_eps, e[1:-1] ** (d - 1), volumes, grid.centers, grid.bc, k,
                           dim=d)


def radial_operator_for(field, geom, grid: Grid1D) -> DiscreteOperator:
    """Radial operator matching a diagonal field on a centered sphere."""
    from .geometry import Sphere

    if not field.is_diagonal:
        raise UnsupportedCaseError("radial reduction needs a diagonal piecewise-constant field")
    if not isinstance(geom, Sphere) or np.any(geom.center != 0):
        raise UnsupportedCaseError("radial reduction needs a sphere centered at the origin")
    ep, em = field.diagonal_constants
    inside, outside = (ep, em) if geom.plus == "interior" else (em, ep)
    return assemble_radial(inside, outside, geom.radius, geom.dim, grid)


# -- time integration --------------------------------------------------------------


def _cn_solve(op: DiscreteOperator, u0, t, dt, rannacher):
    n_steps = max(1, int(np.ceil(t / dt - 1e-12)))
    h = t / n_steps
    L = op.stiffness
    c = L.diagonal()
    off = L.diagonal(1)
    V = op.volumes

    def banded(coef):
        ab = np.zeros((3, op.n))
        ab[0, 1:] = -coef * off
        ab[1] = V - coef * c
        ab[2, :-1] = -coef * off
        return ab

    def apply(coef, u):
        return V * u + coef * (L @ u)

    u = np.asarray(u0, dtype=float).copy()
    be = banded(h / 2)
    for _ in range(2 * min(rannacher, n_steps)):
        u = linalg.solve_banded((1, 1), be, V * u)
    cn = banded(h / 2)
    for _ in range(n_steps - min(rannacher, n_steps)):
        u = linalg.solve_banded((1, 1), cn, apply(h / 2, u))
    return u


def solve_parabolic(op: DiscreteOperator, u0, t, method="auto", dt=None, rannacher=0):
    """``u(t)`` for ``du/dt = A u``, ``u(0) = u0``.

    ``method="eig"`` uses the exact discrete spectral calculus (``n <= 4096``);
    ``method="cn"`` uses Crank-Nicolson with step ``dt`` (default ``t/2000``),
    optionally started with ``rannacher`` pairs of implicit Euler half steps
    for rough data. ``"auto"`` picks ``eig`` when possible.
    """
    if t < 0:
        raise DomainError("time must be nonnegative")
    u0 = np.asarray(u0, dtype=float)
    if t == 0:
        return u0.copy()
    if method == "auto":
        method = "eig" if op.n <= MAX_EIG_CELLS else "cn"
    if method == "eig":
        return op.semigroup(u0, t)
    if method == "cn":
        return _cn_solve(op, u0, t, t / 2000 if dt is None else dt, rannacher)
    raise ValueError(f"unknown method {method!r}")


def heat_kernel(op: DiscreteOperator, t, base=None):
    """Entrywise-accurate ``exp(t A)`` by uniformization.

    ``A + c I`` has nonnegative entries, so its Taylor series and the
    subsequent squarings involve no cancellation; tiny kernel entries keep
    full relative accuracy down to underflow. If ``base = (t0, exp(t0 A))``
    and ``t / t0`` is a power of two, the base is squared instead.
    """
    if base is not None:
        t0, E0 = base
        ratio = t / t0
        m = int(round(np.log2(ratio))) if ratio >= 1 else -1
        if m >= 0 and abs(ratio - 2.0**m) <= 1e-12 * ratio:
            E = E0
            for _ in range(m):
                E = E @ E
            return E
    A = op.matrix.tocsr()
    c = float(-A.diagonal().min())
    k = max(0, int(np.ceil(np.log2(max(c * t, 1e-300) / 0.5))))
    tau = t / 2.0**k
    B = (A + c * sparse.identity(op.n, format="csr")) * tau
    term = sparse.identity(op.n, format="csr")
    acc = term.toarray()
    j = 0
    while True:
        j += 1
        term = (term @ B) / j
        tmax = abs(term).max()
        acc += term.toarray()
        if tmax <= 1e-18 * acc.max() or j > 60:
            break
    E = np.exp(-c * tau) * acc
    for _ in range(k):
        E = E @ E
    return E


# -- verification suites --------------------------------------------------------------


def semigroup_identity_suite(op: DiscreteOperator, f_list, g_list, lam=None, t=1.0,
                             s_grid=None, fd_rel_step=1e-3) -> Report:
    """Discrete versions of the semigroup identities, checked pair by pair.

    * ``symmetry``: ``(T_t f, g) = (f, T_t g)``, relative to ``||f|| ||g||``.
    * ``fundamental_estimate``: for every ``s`` the chain
      ``lam ||grad T_s f||^2 <= E(T_s f, T_s f)`` and
      ``||grad T_s f|| <= ||f|| / sqrt(lam s)``; the reported value is the
      smallest normalized margin of the two (must be ``>= 0``).
    * ``integrated_identity``: ``(T_t f, g) - (f, g) + int_0^t E(T_s f, g) ds``
      with the energy evaluated from edge differences and the integral by
      adaptive quadrature.
    * ``derivative_identity``: centered difference of ``s -> (T_s f, g)``
      against ``-E(T_s f, g)``, divided by the Taylor remainder bound.
    """
    lam = op.lam if lam is None else float(lam)
    s_grid = np.logspace(-3, 1, 13) if s_grid is None else np.asarray(s_grid, dtype=float)
    gamma, _ = op.eigen
    rep = Report("semigroup identity suite")
    sym, fund, integ, deriv = [], [], [], []
    fund_detail = None
    for f, g in zip(f_list, g_list):
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        nf, ng = op.norm(f), op.norm(g)
        scale = nf * ng
        sym.append(abs(op.inner(op.semigroup(f, t), g) - op.inner(f, op.semigroup(g, t))) / scale)

        worst = np.inf
        for s in s_grid:
            u = op.semigroup(f, s)
            gn = op.grad_norm(u)
            energy_margin = (op.energy(u, u) - lam * gn**2) / (nf**2 / s)
            bound = nf / np.sqrt(lam * s)
            estimate_margin = (bound - gn) / bound
            m = min(energy_margin, estimate_margin)
            if m < worst:
                worst = m
                fund_detail = {"s": float(s), "energy_margin": float(energy_margin),
                               "estimate_margin": float(estimate_margin)}
        fund.append(worst)

        integrand = lambda s: op.energy(op.semigroup(f, s), g)
        cuts = np.concatenate([[0.0], np.logspace(-7, np.log10(t), 15)])
        cuts = cuts[cuts <= t]
        if cuts[-1] < t:
            cuts = np.append(cuts, t)
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            total += integrate.quad(integrand, a, b, epsabs=1e-13 * scale, epsrel=1e-12, limit=200)[0]
        resid = op.inner(op.semigroup(f, t), g) - op.inner(f, g) + total
        integ.append(abs(resid) / scale)

        cf = op.spectral_coefficients(f)
        cg = op.spectral_coefficients(g)
        worst_ratio = 0.0
        for s in s_grid:
            h = fd_rel_step * s
            pair = lambda r: op.inner(op.semigroup(f, r), g)
            fd = (pair(s + h) - pair(s - h)) / (2 * h)
            exact = -op.energy(op.semigroup(f, s), g)
            remainder = h**2 / 6 * np.sum(gamma**3 * np.exp(-gamma * (s - h)) * np.abs(cf * cg))
            roundoff = 1e-14 * scale / h
            worst_ratio = max(worst_ratio, abs(fd - exact) / (remainder + roundoff))
        deriv.append(worst_ratio)

    rep.add("symmetry", max(sym), 1e-10)
    rep.add("fundamental_estimate", min(fund), 0.0, ">=", lam=lam, worst=fund_detail)
    rep.add("integrated_identity", max(integ), 1e-8)
    rep.add("derivative_identity", max(deriv), 1.0)
    rep.data.update(lam=lam, t=t, s_grid=s_grid.tolist(), n_pairs=len(sym))
    return rep


def _fit_m(q, r2_over_t, upper):
    """Smallest ``M >= 1`` per pair; ``q = log(p sqrt(t))``.

    upper: ``log M - r2/(M t) >= q``; lower: ``log M + M r2/t + q >= 0``.
    """
    def ok(logm):
        m = np.exp(logm)
        if upper:
            return logm - r2_over_t / m >= q
        return logm + m * r2_over_t + q >= 0

    lo = np.zeros_like(q)
    hi = np.full_like(q, 60.0)
    feasible = ok(hi)
    done = ok(lo)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        good = ok(mid)
        hi = np.where(good, mid, hi)
        lo = np.where(good, lo, mid)
    out = np.where(done, 1.0, np.exp(hi))
    return np.where(feasible, out, np.inf)


def discrete_density_aronson(op: DiscreteOperator, t_list, window=4.0, interior_fraction=0.5,
                             stability_factor=2.0) -> Report:
    """Fit the constant of the two-sided Gaussian bounds to the discrete kernel.

    The kernel is ``p_h(t, x_i, y_j) = exp(tA)_ij / vol_j``. Pairs are taken
    among interior cells (the central ``interior_fraction`` of the domain)
    with ``|x - y| <= window sqrt(2 lam t)``. For each ``t`` the smallest
    ``M >= 1`` with ``exp(-M r^2/t)/(M sqrt t) <= p_h <= M exp(-r^2/(M t))/sqrt t``
    is found by bisection; the check passes when every ``M`` is finite and
    ``max M / min M <= stability_factor``.
    """
    if op.dim != 1:
        raise ContractViolation("Gaussian bound check is implemented for 1D operators")
    t_list = np.sort(np.asarray(t_list, dtype=float))
    lo_b = op.centers[0] - op.volumes[0] / 2
    hi_b = op.centers[-1] + op.volumes[-1] / 2
    length = hi_b - lo_b
    spread = np.sqrt(2.0 * op.Lam * t_list.max())
    if spread > length / 4:
        raise ContractViolation(
            f"boundary pollution: sqrt(2 Lambda t) = {spread:.3g} exceeds a quarter of the "
            f"domain length {length:.3g}; enlarge the domain or reduce t"
        )
    mid = 0.5 * (lo_b + hi_b)
    x = op.centers
    interior = np.abs(x - mid) <= interior_fraction * length / 2
    xi = x[interior]
    rep = Report("discrete Gaussian bounds")
    ms, min_p, sym = [], np.inf, 0.0
    base = None
    for t in t_list:
        E = heat_kernel(op, t, base)
        base = (t, E)
        P = (E / op.volumes[None, :])[np.ix_(interior, interior)]
        sym = max(sym, float(np.max(np.abs(P - P.T) / np.maximum(np.abs(P), 1e-300))))
        r = np.abs(xi[:, None] - xi[None, :])
        sel = r <= window * np.sqrt(2.0 * op.lam * t)
        p = P[sel]
        min_p = min(min_p, float(p.min()))
        with np.errstate(divide="ignore"):
            q = np.log(p * np.sqrt(t))
        r2t = r[sel] ** 2 / t
        m_up = _fit_m(q, r2t, upper=True).max()
        m_lo = _fit_m(q, r2t, upper=False).max()
        ms.append(max(m_up, m_lo))
        rep.data.setdefault("per_t", []).append(
            {"t": float(t), "M": float(max(m_up, m_lo)), "M_upper": float(m_up),
             "M_lower": float(m_lo), "pairs": int(sel.sum())})
    ms = np.asarray(ms)
    rep.add("M_finite", float(ms.max()), np.finfo(float).max)
    rep.add("M_at_least_one", float(ms.min()), 1.0, ">=")
    rep.add("M_stability", float(ms.max() / ms.min()), stability_factor)
    rep.add("kernel_positive", min_p, np.finfo(float).tiny, ">=")
    rep.add("kernel_symmetry", sym, 1e-10)
    rep.data.update(M=float(ms.max()), t_list=t_list.tolist(), window=window)
    return rep


def _one_sided_derivative(z, u):
    """Derivative at ``z = 0`` of the quadratic through three ``(z, u)`` points."""
    z0, z1, z2 = z
    return (u[0] * (-(z1 + z2)) / ((z0 - z1) * (z0 - z2))
            + u[1] * (-(z0 + z2)) / ((z1 - z0) * (z1 - z2))
            + u[2] * (-(z0 + z1)) / ((z2 - z0) * (z2 - z1)))


def transmission_residual(u, grid: Grid1D, eps_plus, eps_minus) -> float:
    """``|eps+ du+/dy - eps- du-/dy|`` at the interface edge.

    One-sided derivatives come from quadratic reconstructions through the
    three cells nearest the interface on each side.
    """
    k = grid.interface_edge()
    u = np.asarray(u, dtype=float)
    if k < 3 or grid.n - k < 3:
        raise ContractViolation("need at least 3 cells on each side of the interface")
    zc = grid.centers - grid.interface
    plus = slice(k, k + 3)
    minus = slice(k - 3, k)
    dp = _one_sided_derivative(zc[plus], u[plus])
    dm = _one_sided_derivative(zc[minus], u[minus])
    return float(abs(eps_plus * dp - eps_minus * dm))


# -- 1D oracle helpers -------------------------------------------------------------------


def _interface_split(eps_plus, eps_minus):
    """Side masses of the exact law started on the interface (minus side on the left)."""
    qp, qm = np.sqrt(eps_plus), np.sqrt(eps_minus)
    return qm / (qp + qm), qp / (qp + qm)


def _delta_cells(grid: Grid1D, x, edge_split=(0.5, 0.5)):
    """Unit-mass cell data concentrated at ``x``.

    An edge point is split between its two cells as ``edge_split = (left,
    right)``; other points are split linearly between the nearest centers on
    the same side.
    """
    u = np.zeros(grid.n)
    hit = np.flatnonzero(grid.edges == x)
    if hit.size and 0 < hit[0] < grid.n:
        k = hit[0]
        u[k - 1] = edge_split[0] / grid.widths[k - 1]
        u[k] = edge_split[1] / grid.widths[k]
        return u
    c = grid.centers
    i = int(np.clip(np.searchsorted(c, x) - 1, 0, grid.n - 2))
    straddles = grid.interface is not None and c[i] < grid.interface < c[i + 1]
    if straddles or not c[i] <= x <= c[i + 1]:
        j = int(np.clip(np.searchsorted(grid.edges, x) - 1, 0, grid.n - 1))
        u[j] = 1.0 / grid.widths[j]
        return u
    # split between the two nearest centers so the first moment is exact
    w = (c[i + 1] - x) / (c[i + 1] - c[i])
    u[i] = w / grid.widths[i]
    u[i + 1] = (1.0 - w) / grid.widths[i + 1]
    return u


def fv_transition_density(eps_plus, eps_minus, t, x, half_width=20.0, n=2**14, dt=None,
                          rannacher=2):
    """Finite-volume transition density ``y -> p(t, x, y)`` at cell centers.

    The process is symmetric, so ``p(t, x, .) = p(t, ., x)``; the cell data
    start as a unit mass at ``x`` and evolve under Crank-Nicolson with an
    implicit Euler start. Returns ``(centers, density)``.
    """
    grid = Grid1D.uniform(-half_width, half_width, n, interface=0.0)
    op = assemble_1d(eps_plus, eps_minus, grid)
    u0 = _delta_cells(grid, x, _interface_split(eps_plus, eps_minus))
    dt = t / 1000 if dt is None else dt
    return grid.centers, solve_parabolic(op, u0, t, method="cn", dt=dt, rannacher=rannacher)


def occupation_density_at_interface(eps_plus, eps_minus, T, x, half_width=20.0, n=4096,
                                    n_times=400):
    """``int_0^T p(s, x, 0) ds`` from the finite-volume density.

    The value at 0 is the mean of the one-sided linear extrapolations;
    the time integral uses Gauss-Legendre in ``sqrt(s)`` to absorb the
    ``s^(-1/2)`` singularity when ``x = 0``.
    """
    grid = Grid1D.uniform(-half_width, half_width, n, interface=0.0)
    op = assemble_1d(eps_plus, eps_minus, grid)
    k = grid.interface_edge()
    u0 = _delta_cells(grid, x, _interface_split(eps_plus, eps_minus))
    nodes, weights = np.polynomial.legendre.leggauss(n_times)
    w = 0.5 * np.sqrt(T) * (nodes + 1.0)
    ww = 0.5 * np.sqrt(T) * weights
    coeffs = op.spectral_coefficients(u0)
    gamma, modes = op.eigen
    # extrapolate linearly to the interface edge from each side, then average
    at0 = 0.25 * (3.0 * modes[k - 1] - modes[k - 2] + 3.0 * modes[k] - modes[k + 1])
    vals = np.array([at0 @ (np.exp(-gamma * wi**2) * coeffs) for wi in w])
    return float(np.sum(ww * 2.0 * w * vals))


def fv_density_distance(eps_plus, eps_minus, t, x, half_width=12.0, n=4096) -> Report:
    """Sup distance between the exact 1D density and the finite-volume oracle."""
    from .skew1d import Skew1DModel

    grid = Grid1D.uniform(-half_width, half_width, n, interface=0.0)
    op = assemble_1d(eps_plus, eps_minus, grid)
    fv = op.semigroup(_delta_cells(grid, x, _interface_split(eps_plus, eps_minus)), t)
    exact = Skew1DModel(eps_plus, eps_minus).transition_density(t, x, grid.centers)
    rep = Report("finite-volume density oracle")
    rep.add("sup_distance", float(np.max(np.abs(fv - exact))), 1e-3, n=n, half_width=half_width)
    rep.data.update(centers=grid.centers, fv=fv, exact=exact)
    return rep
