"""
Monte Carlo solution of the transmission heat equation
======================================================

``u(t, x) = E^x[u0(X_t)]`` estimated from simulated paths and compared with
deterministic finite-volume references on problems that reduce to one
dimension: a 1D interface point, or a centered sphere with isotropic
coefficients and radial initial data.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
import warnings
from typing import Callable

import numpy as np

from . import pde_ref
from .coeffs import CoefficientField
from .exceptions import ConfigError, UnsupportedCaseError
from .geometry import Hyperplane, InterfaceGeometry, Sphere
from .report import Report
from .sde_engine import ConfigWarning, SimConfig, simulate_ensemble
from .skew1d import Skew1DModel

__all__ = [
    "MCEstimate",
    "InitialData",
    "ComparisonCase",
    "LocalTimeCase",
    "estimate_u",
    "estimate_u_times",
    "reference_solution",
    "compare_with_reference",
    "richardson_check",
    "initial_condition_probe",
    "local_time_identification",
    "symmetric_pairing",
]


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error; ``confidence_radius = 3 SE``."""

    mean: float
    std_error: float
    n_paths: int

    @property
    def confidence_radius(self):
        return 3.0 * self.std_error

    @classmethod
    def from_samples(cls, values):
        v = np.asarray(values, dtype=float)
        n = v.size
        if n == 0:
            return cls(float("nan"), float("nan"), 0)
        se = float(v.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(float(v.mean()), se, n)

    def to_dict(self):
        return {"mean": self.mean, "std_error": self.std_error, "n_paths": self.n_paths,
                "confidence_radius": self.confidence_radius}


@dataclass(frozen=True)
class InitialData:
    """Bounded initial datum ``u0`` with its sup norm and a modulus of continuity.

    ``func`` maps ``(n, d)`` points to ``(n,)`` values. ``modulus(delta)``
    bounds ``|u0(x) - u0(y)|`` for ``|x - y| <= delta``; the default is the
    trivial bound ``2 sup_norm``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    modulus: Callable[[float], float] | None = None
    name: str = "u0"

    def __call__(self, x):
        return np.asarray(self.func(np.atleast_2d(np.asarray(x, dtype=float))), dtype=float)

    def continuity_bound(self, delta):
        if self.modulus is None:
            return 2.0 * self.sup_norm
        return float(self.modulus(delta))


def _ensemble_values(x, times, u0, fld, geom, config):
    """Ensemble from ``x`` recording every time in ``times``; returns ``{t: values}`` and the result."""
    T = max(times)
    cfg = replace(config, horizon=T, record_times=tuple(times), trace=False)
    ens = simulate_ensemble(np.asarray(x, dtype=float), fld, geom, cfg)
    return {t: u0(ens.at(t)) for t in times}, ens


def _aligned_groups(times, dt_bulk):
    """Split ``times`` into one group on the grid of ``max(times)`` and singletons."""
    times = sorted(set(float(t) for t in times))
    T = times[-1]
    n = max(1, int(np.ceil(T / dt_bulk * (1 - 1e-12))))
    dt = T / n
    on = [t for t in times if abs(round(t / dt) * dt - t) <= 1e-9 * T]
    return [on] + [[t] for t in times if t not in on]


def estimate_u(x, t, u0: InitialData, fld: CoefficientField, geom: InterfaceGeometry,
               config: SimConfig) -> MCEstimate:
    """``E^x[u0(X_t)]`` from ``config.n_paths`` paths simulated up to ``t``."""
    if not t > 0:
        raise ConfigError("t must be positive")
    vals, _ = _ensemble_values(x, [t], u0, fld, geom, config)
    return MCEstimate.from_samples(vals[t])


def estimate_u_times(x, times, u0: InitialData, fld, geom, config, diagnostics=None):
    """Estimates at several times, sharing paths wherever the time grid allows.

    When ``diagnostics`` is a list, each ensemble appends
    ``(min dK, max dK outside layer steps)``.
    """
    out = {}
    for group in _aligned_groups(times, config.dt_bulk):
        vals, ens = _ensemble_values(x, group, u0, fld, geom, config)
        if diagnostics is not None:
            diagnostics.append((ens.min_increment, ens.max_increment_outside_layer))
        out.update({t: MCEstimate.from_samples(v) for t, v in vals.items()})
    return out


# -- deterministic references ---------------------------------------------------------


def _cell_averages(profile, edges, nodes=4):
    g, w = np.polynomial.legendre.leggauss(nodes)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    pts = mid[:, None] + half[:, None] * g[None, :]
    return (profile(pts.ravel()).reshape(pts.shape) * w).sum(axis=1) / 2.0


def _cell_averages_radial(profile, edges, d, nodes=4):
    g, w = np.polynomial.legendre.leggauss(nodes)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    r = mid[:, None] + half[:, None] * g[None, :]
    weight = w * r ** (d - 1)
    return (profile(r.ravel()).reshape(r.shape) * weight).sum(axis=1) / weight.sum(axis=1)


def _split_grid(lo, hi, interface, n):
    """Nearly uniform grid with ``interface`` exactly on an edge."""
    k = int(np.clip(round(n * (interface - lo) / (hi - lo)), 1, n - 1))
    edges = np.concatenate([np.linspace(lo, interface, k + 1), np.linspace(interface, hi, n - k + 1)[1:]])
    return pde_ref.Grid1D(edges, interface)


def reference_solution(fld: CoefficientField, geom: InterfaceGeometry, u0: InitialData,
                       n_cells=4096, extent=None, t_max=1.0):
    """Reduced finite-volume problem matching ``(fld, geom, u0)``.

    Returns ``evaluate(points, t) -> values``. Raises
    :class:`UnsupportedCaseError` when the problem does not reduce to 1D.
    """
    if not fld.is_diagonal:
        raise UnsupportedCaseError("reference needs isotropic piecewise-constant coefficients")
    ep, em = fld.diagonal_constants
    reach = 8.0 * np.sqrt(2.0 * fld.Lam * t_max)
    if geom.dim == 1 and isinstance(geom, Hyperplane):
        n_sign, off = float(geom.normal[0]), geom.offset
        half = reach + 4.0 if extent is None else extent
        grid = _split_grid(-half, half, 0.0, n_cells)
        op = pde_ref.assemble_1d(ep, em, grid)
        # s = n x - offset is the signed distance
        profile = lambda s: u0(((s + off) * n_sign)[:, None])
        c0 = _cell_averages(profile, grid.edges)

        def coordinate(points):
            return np.atleast_2d(points)[:, 0] * n_sign - off
    elif isinstance(geom, Sphere) and np.all(geom.center == 0):
        d = geom.dim
        rmax = geom.radius + reach + 4.0 if extent is None else extent
        grid = _split_grid(0.0, rmax, geom.radius, n_cells)
        op = pde_ref.radial_operator_for(fld, geom, grid)
        rng = np.random.default_rng(0)
        probe_r = np.linspace(0.0, rmax, 64)
        directions = rng.standard_normal((64, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        e1 = np.zeros(d)
        e1[0] = 1.0
        a = u0(probe_r[:, None] * e1)
        b = u0(probe_r[:, None] * directions)
        if np.max(np.abs(a - b)) > 1e-10 * max(u0.sup_norm, 1e-300):
            raise UnsupportedCaseError("initial datum is not radially symmetric")
        profile = lambda r: u0(r[:, None] * e1)
        c0 = _cell_averages_radial(profile, grid.edges, d)

        def coordinate(points):
            return np.linalg.norm(np.atleast_2d(points), axis=1)
    else:
        raise UnsupportedCaseError(
            "no reduced reference: need a 1D interface point or a sphere centered at the origin")

    centers = grid.centers
    gamma, modes = op.eigen if op.n <= pde_ref.MAX_EIG_CELLS else (None, None)

    def evaluate(points, t):
        if t == 0:
            u = c0
        elif gamma is not None:
            u = op.semigroup(c0, t)
        else:
            u = pde_ref.solve_parabolic(op, c0, t, method="cn", dt=t / 2000, rannacher=2)
        return np.interp(coordinate(points), centers, u)

    evaluate.grid = grid
    evaluate.operator = op
    return evaluate


@dataclass
class ComparisonCase:
    """Probe points and times at which MC and the reduced reference are compared."""

    fld: CoefficientField
    geom: InterfaceGeometry
    u0: InitialData
    probes: list
    times: list
    config: SimConfig
    bias_budget: float = 0.0
    n_cells: int = 4096
    name: str = "comparison"


def compare_with_reference(case: ComparisonCase, reference=None) -> Report:
    """One check per (probe, time): ``|MC - FV| <= max(3 SE, bias_budget)``.

    Also asserts ``K`` monotonicity and that ``K`` only grew at layer steps.
    """
    ref = reference or reference_solution(case.fld, case.geom, case.u0, n_cells=case.n_cells,
                                          t_max=max(case.times))
    rep = Report(f"Monte Carlo vs finite volumes: {case.name}")
    rows = []
    diag = []
    for p in case.probes:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        est = estimate_u_times(p, case.times, case.u0, case.fld, case.geom, case.config, diag)
        for t in sorted(est):
            e = est[t]
            r = float(ref(p[None, :], t)[0])
            disc = abs(e.mean - r)
            tol = max(e.confidence_radius, case.bias_budget)
            label = f"x={p.tolist()},t={t:g}"
            rep.add(f"probe[{label}]", disc, tol, mc=e.mean, std_error=e.std_error, reference=r)
            rows.append({"x": p.tolist(), "t": t, "mc": e.mean, "std_error": e.std_error,
                         "reference": r, "discrepancy": disc, "tolerance": tol,
                         "passed": disc <= tol})
    rep.add("K_nondecreasing", min(d[0] for d in diag), 0.0, ">=")
    rep.add("K_support_outside_layer", max(d[1] for d in diag), 0.0)
    rep.data.update(probes=rows, seed=case.config.seed, dt=case.config.dt_bulk,
                    layer_halfwidth=case.config.layer_halfwidth, n_paths=case.config.n_paths)
    return rep


def _systematic_part(rep: Report):
    """Largest discrepancy in excess of the 3 SE confidence radius."""
    return max(max(0.0, row["discrepancy"] - 3.0 * row["std_error"]) for row in rep.data["probes"])


def richardson_check(case: ComparisonCase, reference=None) -> Report:
    """Compare at ``dt`` and ``dt/2``; the systematic part must not grow.

    The systematic part is the discrepancy exceeding ``3 SE``, maximized
    over probes. Halving the step must not increase it.
    """
    ref = reference or reference_solution(case.fld, case.geom, case.u0, n_cells=case.n_cells,
                                          t_max=max(case.times))
    coarse = compare_with_reference(case, ref)
    fine_case = replace(case, config=replace(case.config, dt_bulk=case.config.dt_bulk / 2))
    fine = compare_with_reference(fine_case, ref)
    s_coarse, s_fine = _systematic_part(coarse), _systematic_part(fine)
    rep = Report(f"step refinement: {case.name}")
    rep.extend(coarse, "dt:")
    rep.extend(fine, "dt/2:")
    rep.add("systematic_part_not_growing", s_fine, s_coarse, coarse=s_coarse, fine=s_fine)
    rep.data.update(coarse=coarse.data, fine=fine.data, systematic_coarse=s_coarse,
                    systematic_fine=s_fine)
    return rep


def initial_condition_probe(x, u0: InitialData, fld, geom, config, t=1e-6) -> Report:
    """Short-time probe: ``|E^x[u0(X_t)] - u0(x)| <= 3 SE + modulus(6 sqrt(2 Lambda t))``."""
    est = estimate_u(x, t, u0, fld, geom, replace(config, dt_bulk=min(config.dt_bulk, t)))
    exact = float(u0(np.atleast_1d(x)[None, :])[0])
    tol = est.confidence_radius + u0.continuity_bound(6.0 * np.sqrt(2.0 * fld.Lam * t))
    rep = Report("initial condition probe")
    rep.add("short_time_limit", abs(est.mean - exact), tol, mc=est.mean, u0=exact, t=t)
    return rep


# -- local time ----------------------------------------------------------------


@dataclass
class LocalTimeCase:
    """Start point and horizon for the boundary-functional study."""

    fld: CoefficientField
    geom: InterfaceGeometry
    x0: np.ndarray
    horizon: float
    name: str = "local time"


def _mean_K(case, config, mode, h):
    cfg = replace(config, horizon=case.horizon, record_times=(), local_time_mode=mode,
                  layer_halfwidth=h, scheme="layer_skew")
    with warnings.catch_warnings():
        # the halved layer is thinner than recommended on purpose
        warnings.simplefilter("ignore", ConfigWarning)
        ens = simulate_ensemble(case.x0, case.fld, case.geom, cfg)
    K = ens.K[:, -1]
    return MCEstimate.from_samples(K), ens


def local_time_identification(case: LocalTimeCase, config: SimConfig, agreement=0.10,
                              halving_tolerance=0.05) -> Report:
    """``E[K_T]`` from the bridge estimator, from occupation counting and, in 1D, from
    the finite-volume occupation density and the closed form.

    Reports pairwise relative differences, the change under halving the layer
    width, and the support property on every ensemble.
    """
    if not case.fld.is_diagonal:
        raise UnsupportedCaseError("local-time identification needs isotropic coefficients")
    h = config.layer_halfwidth
    skew, e1 = _mean_K(case, config, "skew_step", h)
    occ, e2 = _mean_K(case, config, "occupation", h)
    occ_half, e3 = _mean_K(case, config, "occupation", h / 2)
    skew_half, e4 = _mean_K(case, config, "skew_step", h / 2)
    ens = (e1, e2, e3, e4)

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-300)

    rep = Report(f"local-time identification: {case.name}")
    rep.add("skew_vs_occupation", rel(skew.mean, occ.mean), agreement,
            skew=skew.to_dict(), occupation=occ.to_dict())
    rep.add("occupation_layer_halving", rel(occ_half.mean, occ.mean), halving_tolerance,
            h=h, half=occ_half.to_dict())
    rep.add("skew_layer_halving", rel(skew_half.mean, skew.mean), halving_tolerance,
            half=skew_half.to_dict())
    rep.add("K_nondecreasing", min(e.min_increment for e in ens), 0.0, ">=")
    rep.add("K_support_outside_layer", max(e.max_increment_outside_layer for e in ens), 0.0)
    data = {"skew_step": skew.mean, "occupation": occ.mean, "occupation_half_layer": occ_half.mean,
            "skew_step_half_layer": skew_half.mean, "std_errors": [skew.std_error, occ.std_error]}
    geom = case.geom
    if geom.dim == 1 and isinstance(geom, Hyperplane):
        ep, em = case.fld.diagonal_constants
        s0 = float(np.atleast_1d(case.x0)[0] * geom.normal[0] - geom.offset)
        fv = 2.0 * pde_ref.occupation_density_at_interface(ep, em, case.horizon, s0)
        exact = float(Skew1DModel(ep, em).expected_pcaf(case.horizon, s0))
        rep.add("skew_vs_fv_occupation_density", rel(skew.mean, fv), agreement, fv=fv)
        rep.add("occupation_vs_fv_occupation_density", rel(occ.mean, fv), agreement, fv=fv)
        rep.add("fv_vs_closed_form", rel(fv, exact), 1e-3, closed_form=exact)
        data.update(fv_occupation_density=fv, closed_form=exact)
    rep.data.update(data)
    return rep


def symmetric_pairing(f, g, box, t, fld, geom, config) -> Report:
    """``<f, T_t g>`` against ``<g, T_t f>`` for ``f, g`` supported in a 1D ``box``.

    Start points form a midpoint grid of the box (one per path), so
    ``<f, T_t g> ~ |box| mean f(x_i) g(X_t^i)``; both pairings reuse the paths.
    """
    if geom.dim != 1:
        raise UnsupportedCaseError("pairing check is one-dimensional")
    lo, hi = box
    n = int(config.n_paths)
    x = lo + (np.arange(n) + 0.5) / n * (hi - lo)
    cfg = replace(config, horizon=t, record_times=())
    ens = simulate_ensemble(x[:, None], fld, geom, cfg)
    y = ens.terminal
    a = (hi - lo) * f(x[:, None]) * g(y)
    b = (hi - lo) * g(x[:, None]) * f(y)
    ea, eb = MCEstimate.from_samples(a), MCEstimate.from_samples(b)
    combined = 3.0 * np.hypot(ea.std_error, eb.std_error)
    rep = Report("symmetric pairing")
    rep.add("pairing_difference", abs(ea.mean - eb.mean), combined,
            f_Tg=ea.to_dict(), g_Tf=eb.to_dict())
    return rep
