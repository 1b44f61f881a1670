"""
Path simulation of the transmission diffusion
=============================================

Away from the interface a path moves by Euler-Maruyama steps
``X' = X + b dt + sigma sqrt(dt) xi`` with ``sigma sigma^T = 2a`` and
``b = div a`` taken on the current side. Within distance ``h`` of the
interface (``LAYER``) the step is split at the projected interface point:
the signed distance follows the exact 1D transmission kernel with frozen
normal diffusivities, the tangential part is an Euler increment on the side
where the normal coordinate lands, and the boundary functional ``K`` grows.

A bulk step is redone as a layer step with the same noise when its Euler
proposal ends in the layer, changes side, or fails the Brownian-bridge
hitting test ``u < exp(-|rho rho'| / (Lambda dt))``. In 1D the remaining
bulk steps then coincide with the exact kernel path by path.

Random streams
--------------
Paths are grouped into fixed blocks of :data:`BLOCK` consecutive indices.
Block ``j`` owns the generator ``PCG64(SeedSequence(seed, spawn_key=(j,)))``
and draws, per time step, ``BLOCK x d`` normals followed by ``BLOCK``
uniforms; path ``i`` reads column ``i % BLOCK`` of block ``i // BLOCK``.
A path's noise therefore depends only on ``(seed, i)``, not on
``n_paths``, on how blocks are batched or on the number of threads.
"""
from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .coeffs import CoefficientField
from .exceptions import ConfigError, GeometryError, SimulationError
from . import _fastpath
from .geometry import Hyperplane, InterfaceGeometry, Sphere
from .skew1d import skew_transition

__all__ = [
    "BLOCK",
    "SimConfig",
    "ConfigWarning",
    "Trajectory",
    "EnsembleResult",
    "euler_step",
    "layer_step",
    "simulate_path",
    "simulate_ensemble",
    "block_noise",
    "write_trace_csv",
]

BLOCK = 1024
# steps of noise drawn per generator call
_CHUNK = 64
# RNG blocks advanced together in one vectorized batch
_BATCH_BLOCKS = 16

SCHEMES = ("layer_skew", "naive_euler_occupation")
LOCAL_TIME_MODES = ("skew_step", "occupation")


class ConfigWarning(UserWarning):
    """Configuration is valid but numerically unwise."""


@dataclass(frozen=True)
class SimConfig:
    """Time stepping, layer width, ensemble size and randomness.

    ``record_times`` lists the times (multiples of the step) at which
    positions and ``K`` are stored; the horizon is always included.
    """

    dt_bulk: float
    layer_halfwidth: float
    horizon: float
    n_paths: int = 0
    seed: int = 0
    scheme: str = "layer_skew"
    local_time_mode: str = "skew_step"
    record_times: tuple = ()
    trace: bool = False
    threads: int = 1

    def validate(self, Lam=None):
        """Raise :class:`ConfigError` on invalid settings; warn on a thin layer."""
        if not (self.dt_bulk > 0 and np.isfinite(self.dt_bulk)):
            raise ConfigError(f"dt_bulk must be positive, got {self.dt_bulk}")
        if not (self.layer_halfwidth > 0 and np.isfinite(self.layer_halfwidth)):
            raise ConfigError(f"layer_halfwidth must be positive, got {self.layer_halfwidth}")
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 0:
            raise ConfigError(f"n_paths must be a nonnegative integer, got {self.n_paths}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.local_time_mode not in LOCAL_TIME_MODES:
            raise ConfigError(f"local_time_mode must be one of {LOCAL_TIME_MODES}")
        if self.scheme == "naive_euler_occupation" and self.local_time_mode != "occupation":
            raise ConfigError("the naive Euler scheme only supports local_time_mode='occupation'")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        self.step_grid()
        if Lam is not None:
            need = 3.0 * np.sqrt(Lam * self.dt_bulk)
            if self.layer_halfwidth < need * (1 - 1e-12):
                warnings.warn(
                    f"layer_halfwidth {self.layer_halfwidth:.4g} is below 3 sqrt(Lambda dt) = "
                    f"{need:.4g}; bulk steps may jump across the layer",
                    ConfigWarning, stacklevel=3)

    def step_grid(self):
        """``(n_steps, dt, record_steps, record_times)`` of the uniform time grid."""
        n_steps = max(1, int(np.ceil(self.horizon / self.dt_bulk * (1 - 1e-12))))
        dt = self.horizon / n_steps
        times = sorted(set(float(t) for t in self.record_times) | {float(self.horizon)})
        steps = []
        for t in times:
            if not 0 <= t <= self.horizon:
                raise ConfigError(f"record time {t} outside [0, {self.horizon}]")
            k = int(round(t / dt))
            if abs(k * dt - t) > 1e-9 * self.horizon:
                raise ConfigError(f"record time {t} is not a multiple of the step {dt}")
            steps.append(k)
        return n_steps, dt, np.array(steps), np.array(times)


@dataclass
class Trajectory:
    """One simulated path.

    ``positions[k]`` and ``K[k]`` are the state at ``times[k]``;
    occupation times split the horizon by the region of each step.
    """

    times: np.ndarray
    positions: np.ndarray
    K: np.ndarray
    occupation_plus: float
    occupation_minus: float
    occupation_layer: float
    layer_steps: int
    min_increment: float
    max_increment_outside_layer: float
    trace: np.ndarray | None = None

    @property
    def terminal(self):
        return self.positions[-1]

    @property
    def K_T(self):
        return float(self.K[-1])


@dataclass
class EnsembleResult:
    """Per-path records of an ensemble plus aggregate diagnostics."""

    times: np.ndarray
    positions: np.ndarray  # (n_paths, n_times, d)
    K: np.ndarray  # (n_paths, n_times)
    occupation: np.ndarray  # (n_paths, 3): plus, minus, layer
    layer_steps: np.ndarray
    min_increment: float
    max_increment_outside_layer: float
    config: SimConfig
    functionals: dict = dc_field(default_factory=dict)

    @property
    def n_paths(self):
        return self.positions.shape[0]

    @property
    def terminal(self):
        return self.positions[:, -1, :]

    def at(self, t):
        """Positions at record time ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} was not recorded")
        return self.positions[:, k, :]

    def summary(self, functionals=None):
        """Means and variances of terminal points, ``K`` and occupation times.

        ``functionals`` maps names to callables of the ``(n, d)`` terminal
        points; each contributes a mean and a standard error.
        """
        n = self.n_paths
        out = {"n_paths": n, "times": self.times.tolist()}
        if n == 0:
            return out
        ddof = 1 if n > 1 else 0
        out["terminal_mean"] = self.terminal.mean(axis=0).tolist()
        out["terminal_var"] = self.terminal.var(axis=0, ddof=ddof).tolist()
        out["K_mean"] = self.K.mean(axis=0).tolist()
        out["K_var"] = self.K.var(axis=0, ddof=ddof).tolist()
        out["occupation_mean"] = dict(zip(("plus", "minus", "layer"), self.occupation.mean(axis=0).tolist()))
        out["min_increment"] = self.min_increment
        out["max_increment_outside_layer"] = self.max_increment_outside_layer
        for name, fn in {**self.functionals, **(functionals or {})}.items():
            v = np.asarray(fn(self.terminal), dtype=float)
            out[name] = {"mean": float(v.mean()), "std_error": float(v.std(ddof=ddof) / np.sqrt(n))}
        return out


# -- noise --------------------------------------------------------------------


def _block_generator(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


def _noise_chunks(seed, block, n_steps, dim):
    """Yield ``(normals (CHUNK, BLOCK, d), uniforms (CHUNK, BLOCK))`` until ``n_steps`` are covered.

    Chunks are always full, so the noise of step ``k`` does not depend on
    the horizon.
    """
    rng = _block_generator(seed, block)
    for _ in range(-(-n_steps // _CHUNK)):
        yield rng.standard_normal((_CHUNK, BLOCK, dim)), rng.random((_CHUNK, BLOCK))


def block_noise(seed, block, n_steps, dim):
    """Noise of one block for steps ``0 .. n_steps-1``: ``(normals, uniforms)``."""
    parts = list(_noise_chunks(seed, block, n_steps, dim))
    return (np.concatenate([p[0] for p in parts])[:n_steps],
            np.concatenate([p[1] for p in parts])[:n_steps])


# -- step kernels ---------------------------------------------------------------


def _euler_kernel(X, plus, fld: CoefficientField, dt, xi):
    if fld.is_diagonal:
        ep, em = fld.diagonal_constants
        s = np.sqrt(2.0 * dt * np.where(plus, ep, em))
        return X + s[:, None] * xi
    sig = fld.sigma(X, plus)
    b = fld.divergence_drift(X, plus)
    return X + b * dt + np.sqrt(dt) * np.einsum("nij,nj->ni", sig, xi)


def _layer_kernel(X, fld: CoefficientField, geom: InterfaceGeometry, dt, xi, u, mode, h):
    """Layer step for a batch. Returns ``(X', dK)``."""
    foot, rho, nu = geom.project_with_normal(X)
    a_plus, a_minus = fld.normal_diffusivity(foot, nu)
    xi_n = np.sum(xi * nu, axis=1)
    y, dL = skew_transition(rho, dt, xi_n, u, a_plus, a_minus, mode == "skew_step")
    plus_end = y >= 0
    if fld.is_diagonal:
        ep, em = fld.diagonal_constants
        w = np.sqrt(2.0 * dt * np.where(plus_end, ep, em))[:, None] * xi
        drift = 0.0
    else:
        w = np.sqrt(dt) * np.einsum("nij,nj->ni", fld.sigma(foot, plus_end), xi)
        drift = fld.divergence_drift(foot, plus_end) * dt
    tangential = w - np.sum(w * nu, axis=1)[:, None] * nu
    Xn = foot + y[:, None] * nu + tangential + drift
    if mode == "skew_step":
        dK = dL / a_minus
    else:
        dK = np.where(np.abs(rho) < h, dt / h, 0.0)
    return Xn, dK


def euler_step(x, fld: CoefficientField, dt, rng=None, side=None, geom=None, xi=None):
    """One Euler-Maruyama step on a fixed side; no ``K`` increment.

    ``side`` is ``"+"``, ``"-"`` or a boolean mask; when omitted it is read
    from ``geom``. Pass ``xi`` to supply the Gaussian noise (e.g. zeros).
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if side is None:
        if geom is None:
            raise ConfigError("euler_step needs a side or a geometry")
        side = np.atleast_1d(geom.signed_distance(X)) >= 0
    plus = np.broadcast_to(np.asarray(side == "+") if isinstance(side, str) else np.asarray(side, bool),
                           (len(X),))
    if xi is None:
        xi = rng.standard_normal(X.shape)
    out = _euler_kernel(X, plus, fld, dt, np.atleast_2d(xi))
    return out[0] if np.ndim(x) == 1 else out


def layer_step(x, fld: CoefficientField, geom: InterfaceGeometry, dt, rng=None, xi=None, u=None,
               local_time_mode="skew_step", layer_halfwidth=None):
    """One layer step. Returns ``(X', dK)``.

    The signed distance follows the exact 1D kernel with the normal
    diffusivities at the projected point; ``dK = dL / (nu . a_minus nu)``.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if xi is None:
        xi = rng.standard_normal(X.shape)
    if u is None:
        u = rng.random(len(X))
    h = np.inf if layer_halfwidth is None else layer_halfwidth
    Xn, dK = _layer_kernel(X, fld, geom, dt, np.atleast_2d(xi), np.atleast_1d(u), local_time_mode, h)
    if np.ndim(x) == 1:
        return Xn[0], float(dK[0])
    return Xn, dK


# -- batch driver -------------------------------------------------------------------


@dataclass
class _BatchState:
    X: np.ndarray
    rho: np.ndarray
    K: np.ndarray
    counts: np.ndarray  # (n, 3) steps spent plus / minus / layer
    diag: np.ndarray  # [min dK, max dK outside layer steps]


def _advance(st: _BatchState, fld, geom, cfg: SimConfig, dt, xi, u):
    X, rho = st.X, st.rho
    h = cfg.layer_halfwidth
    plus = rho >= 0
    Xn = _euler_kernel(X, plus, fld, dt, xi)
    rho_n = np.atleast_1d(geom.signed_distance(Xn))
    if cfg.scheme == "naive_euler_occupation":
        layer = np.abs(rho) <= h
        dK = np.where(np.abs(rho) < h, dt / h, 0.0)
    else:
        # the Euler proposal may have touched the interface in between: redo
        # the step in the layer when it starts or ends there, crosses, or its
        # Brownian bridge hits the interface (test dominates the exact one)
        layer = ((np.abs(rho) <= h) | (np.abs(rho_n) <= h) | ((rho_n >= 0) != plus)
                 | (u < np.exp(-np.abs(rho * rho_n) / (fld.Lam * dt))))
        idx = np.flatnonzero(layer)
        dK = np.zeros(len(X))
        if idx.size:
            Xl, dKl = _layer_kernel(X[idx], fld, geom, dt, xi[idx], u[idx], cfg.local_time_mode, h)
            Xn[idx] = Xl
            rho_n[idx] = geom.signed_distance(Xl)
            dK[idx] = dKl
    if dK.size:
        st.diag[0] = min(st.diag[0], dK.min())
        if (~layer).any():
            st.diag[1] = max(st.diag[1], np.abs(dK[~layer]).max())
    st.K += dK
    st.counts[:, 0] += ~layer & plus
    st.counts[:, 1] += ~layer & ~plus
    st.counts[:, 2] += layer
    st.X, st.rho = Xn, rho_n


def _fast_geometry(fld, geom):
    """Numbers describing ``geom`` for the compiled loop, or ``None``."""
    if not fld.is_diagonal:
        return None
    if isinstance(geom, Hyperplane):
        return 0, geom.normal, geom.offset, 1.0
    if isinstance(geom, Sphere):
        return 1, geom.center, geom.radius, 1.0 if geom.plus == "interior" else -1.0
    return None


def _run_batch(x0, fld, geom, cfg: SimConfig, blocks, columns=None, trace=False, compiled=None):
    """Simulate the paths of the given RNG blocks (optionally a column subset)."""
    n_steps, dt, rec_steps, _ = cfg.step_grid()
    dim = geom.dim
    cols = slice(None) if columns is None else np.asarray(columns)
    n = len(blocks) * (BLOCK if columns is None else len(cols))
    X = np.broadcast_to(np.asarray(x0, dtype=float), (n, dim)).copy()
    st = _BatchState(X=X, rho=np.atleast_1d(geom.signed_distance(X)).astype(float), K=np.zeros(n),
                     counts=np.zeros((n, 3), dtype=np.int64), diag=np.array([np.inf, 0.0]))
    positions = np.full((n, len(rec_steps), dim), np.nan)
    Ks = np.full((n, len(rec_steps)), np.nan)
    positions[:, rec_steps == 0] = st.X[:, None, :]
    Ks[:, rec_steps == 0] = 0.0
    fast = _fast_geometry(fld, geom) if compiled is None or compiled else None
    if compiled and fast is None:
        raise ConfigError("compiled stepping needs diagonal coefficients on a hyperplane or sphere")
    rows = [np.concatenate([[0.0], st.X[0], [0.0]])] if trace else None
    streams = [_noise_chunks(cfg.seed, b, n_steps, dim) for b in blocks]
    width = BLOCK if columns is None else len(cols)
    step = 0
    while step < n_steps:
        chunks = [next(s) for s in streams]
        m = min(_CHUNK, n_steps - step)
        if fast is not None:
            kind, vec, scalar, orient = fast
            ep, em = fld.diagonal_constants
            per_call = 1 if trace else m
            for k0 in range(0, m, per_call):
                for j, (xi, u) in enumerate(chunks):
                    sl = slice(j * width, (j + 1) * width)
                    head = (st.X[sl], st.rho[sl], st.K[sl], st.counts[sl],
                            xi[k0:k0 + per_call, cols], u[k0:k0 + per_call, cols],
                            dt, cfg.layer_halfwidth, fld.Lam, ep, em)
                    tail = (cfg.local_time_mode == "skew_step", cfg.scheme == "naive_euler_occupation",
                            rec_steps, step + k0, positions[sl], Ks[sl], st.diag)
                    if kind == 0 and dim == 1:
                        _fastpath.advance_steps_line(*head, float(vec[0]), scalar, *tail)
                    else:
                        _fastpath.advance_steps(*head, kind, vec, scalar, orient, *tail)
                if trace:
                    rows.append(np.concatenate([[(step + k0 + 1) * dt], st.X[0], [st.K[0]]]))
        else:
            xi_all = np.concatenate([c[0][:m, cols] for c in chunks], axis=1)
            u_all = np.concatenate([c[1][:m, cols] for c in chunks], axis=1)
            for k in range(m):
                _advance(st, fld, geom, cfg, dt, xi_all[k], u_all[k])
                g = step + k + 1
                hit = rec_steps == g
                if hit.any():
                    positions[:, hit] = st.X[:, None, :]
                    Ks[:, hit] = st.K[:, None]
                if trace:
                    rows.append(np.concatenate([[g * dt], st.X[0], [st.K[0]]]))
        step += m
    return positions, Ks, st, (np.array(rows) if trace else None)


def _occupation(counts, dt):
    return counts * dt


def _check_inputs(fld, geom, cfg):
    if fld.dim != geom.dim:
        raise ConfigError(f"coefficient dimension {fld.dim} does not match geometry dimension {geom.dim}")
    cfg.validate(fld.Lam)


def simulate_path(x0, fld: CoefficientField, geom: InterfaceGeometry, config: SimConfig,
                  path_index: int, compiled=None) -> Trajectory:
    """Simulate path ``path_index``; identical to that path of an ensemble.

    With ``config.trace`` the state after every step is kept in ``trace``.
    """
    _check_inputs(fld, geom, config)
    block, col = divmod(int(path_index), BLOCK)
    positions, Ks, st, rows = _run_batch(x0, fld, geom, config, [block], [col],
                                         trace=config.trace, compiled=compiled)
    n_steps, dt, _, times = config.step_grid()
    if not np.all(np.isfinite(positions)):
        raise SimulationError("non-finite state", {int(path_index): "non-finite position"})
    occ = _occupation(st.counts[0], dt)
    return Trajectory(
        times=times, positions=positions[0], K=Ks[0],
        occupation_plus=float(occ[0]), occupation_minus=float(occ[1]),
        occupation_layer=float(occ[2]), layer_steps=int(st.counts[0, 2]),
        min_increment=float(st.diag[0]), max_increment_outside_layer=float(st.diag[1]),
        trace=rows,
    )


def simulate_ensemble(x0, fld: CoefficientField, geom: InterfaceGeometry, config: SimConfig,
                      functionals=None, compiled=None) -> EnsembleResult:
    """Simulate paths ``0 .. n_paths-1``.

    ``x0`` is one start point or an ``(n_paths, d)`` array of them. Per-path
    failures (non-finite states, geometry errors) are collected with their
    indices and raised together as a :class:`SimulationError`.
    ``compiled`` forces (``True``) or forbids (``False``) the compiled loop;
    by default it is used whenever it applies.
    """
    _check_inputs(fld, geom, config)
    _, dt, _, times = config.step_grid()
    n, dim = int(config.n_paths), geom.dim
    x0 = np.asarray(x0, dtype=float)
    per_path = x0.ndim == 2
    if per_path and x0.shape != (n, dim):
        raise ConfigError(f"start points must have shape ({n}, {dim}), got {x0.shape}")
    n_blocks = -(-n // BLOCK)
    groups = [list(range(g, min(g + _BATCH_BLOCKS, n_blocks))) for g in range(0, n_blocks, _BATCH_BLOCKS)]

    def work(blocks):
        lo = blocks[0] * BLOCK
        start = x0
        if per_path:
            rows = np.minimum(np.arange(lo, lo + len(blocks) * BLOCK), n - 1)
            start = x0[rows]
        try:
            return blocks, _run_batch(start, fld, geom, config, blocks, compiled=compiled), None
        except GeometryError as exc:
            return blocks, None, str(exc)

    if config.threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, groups))
    else:
        results = [work(g) for g in groups]

    positions = np.empty((n, len(times), dim))
    Ks = np.empty((n, len(times)))
    counts = np.empty((n, 3), dtype=np.int64)
    min_inc, max_out = np.inf, 0.0
    failures = {}
    for blocks, res, err in results:
        lo = blocks[0] * BLOCK
        hi = min((blocks[-1] + 1) * BLOCK, n)
        if err is not None:
            failures.update({i: err for i in range(lo, hi)})
            continue
        pos, K, st, _ = res
        m = hi - lo
        positions[lo:hi], Ks[lo:hi], counts[lo:hi] = pos[:m], K[:m], st.counts[:m]
        bad = ~np.all(np.isfinite(pos[:m].reshape(m, -1)), axis=1)
        failures.update({lo + int(i): "non-finite position" for i in np.flatnonzero(bad)})
        min_inc = min(min_inc, float(st.diag[0]))
        max_out = max(max_out, float(st.diag[1]))
    if failures:
        raise SimulationError(f"{len(failures)} of {n} paths failed", failures)
    return EnsembleResult(times=times, positions=positions, K=Ks, occupation=_occupation(counts, dt),
                          layer_steps=counts[:, 2],
                          min_increment=float(min_inc) if n else 0.0,
                          max_increment_outside_layer=float(max_out),
                          config=config, functionals=dict(functionals or {}))


def with_overrides(config: SimConfig, **changes) -> SimConfig:
    """Copy of ``config`` with some fields replaced."""
    return replace(config, **changes)


def write_trace_csv(traj: Trajectory, path):
    """Write ``t, x1..xd, K`` rows of a traced path."""
    if traj.trace is None:
        raise ConfigError("trajectory was simulated without trace=True")
    dim = traj.trace.shape[1] - 2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["t"] + [f"x{j + 1}" for j in range(dim)] + ["K"])
        for row in traj.trace:
            w.writerow([format(v, ".17g") for v in row])
