"""Compiled step loop for isotropic piecewise-constant coefficients on a
hyperplane or sphere interface.

Performs the same operations as the array code in :mod:`sde_engine`, path
by path, without temporaries. Geometry is passed as plain numbers:
``kind = 0`` for a hyperplane ``n.x = offset`` and ``kind = 1`` for a sphere
with ``orient = +1`` when ``D+`` is the interior.
"""
import math

import numpy as np
from numba import njit

_BRIDGE_CUTOFF = 8.0


@njit(cache=True, error_model="numpy")
def _signed_distance(x, kind, vec, scalar, orient):
    d = x.shape[0]
    if kind == 0:
        s = 0.0
        for j in range(d):
            s += x[j] * vec[j]
        return s - scalar
    r2 = 0.0
    for j in range(d):
        r2 += (x[j] - vec[j]) ** 2
    return orient * (scalar - math.sqrt(r2))


@njit(cache=True, error_model="numpy")
def _project(X, i, kind, vec, scalar, orient, foot, nu):
    d = X.shape[1]
    if kind == 0:
        rho = -scalar
        for j in range(d):
            rho += X[i, j] * vec[j]
        for j in range(d):
            foot[j] = X[i, j] - rho * vec[j]
            nu[j] = vec[j]
        return rho
    r2 = 0.0
    for j in range(d):
        r2 += (X[i, j] - vec[j]) ** 2
    r = math.sqrt(r2)
    for j in range(d):
        u = (X[i, j] - vec[j]) / r if r > 0 else (1.0 if j == 0 else 0.0)
        foot[j] = vec[j] + scalar * u
        nu[j] = -orient * u
    return orient * (scalar - r)


@njit(cache=True, error_model="numpy")
def _skew(x, dt, xi, u, qp, qm, with_lt, lt_scale):
    """Scalar transition; ``qp, qm`` are the square roots of the diffusivities.

    ``lt_scale = eps_minus C^2 / 2`` turns ``erfc / p`` into ``dL``.
    """
    if x >= 0:
        sh, st, sgn = qp, qm, 1.0
    else:
        sh, st, sgn = qm, qp, -1.0
    a = sgn * x / sh
    z = a + math.sqrt(2.0 * dt) * sgn * xi
    m = abs(z)
    # ratio of the reflected to the direct Gaussian term
    ratio = math.exp(-a * m / dt)
    hit = 1.0 if z < 0 else ratio
    w = st / (sh + st)
    far = u < hit * w
    y = -sgn * m * st if far else sgn * m * sh
    if not with_lt:
        return y, 0.0
    arg = (a + m) / (2.0 * math.sqrt(dt))
    if arg >= _BRIDGE_CUTOFF:
        return y, 0.0
    # endpoint density in the side-scaled variable, divided back by the length
    # scale of the landing side; the reflected term is g0 * ratio
    g0 = math.exp(-(a - m) ** 2 / (4.0 * dt))
    if far:
        p = 2.0 * w * g0 * ratio / st
    else:
        p = g0 * (1.0 + (1.0 - 2.0 * w) * ratio) / sh
    p /= math.sqrt(4.0 * math.pi * dt)
    return y, lt_scale * math.erfc(arg) / p


@njit(cache=True, error_model="numpy")
def advance_steps(X, rho, K, counts, xi, u, dt, h, Lam, ep, em, kind, vec, scalar, orient,
                  skew_mode, naive, rec_steps, step0, positions, Ks, diag):
    """Advance all paths over ``xi.shape[0]`` steps starting at global step ``step0``.

    ``counts[i] = (plus, minus, layer)`` step tallies; ``diag = [min dK,
    max dK outside layer]`` is updated in place.
    """
    n, d = X.shape
    m = xi.shape[0]
    sp, sm = math.sqrt(2.0 * dt * ep), math.sqrt(2.0 * dt * em)
    qp, qm = math.sqrt(ep), math.sqrt(em)
    lt_scale = 2.0 * em / (qp + qm) ** 2
    inv_ldt = 1.0 / (Lam * dt)
    xn = np.empty(d)
    foot = np.empty(d)
    nu = np.empty(d)
    dk_min, dk_max = diag[0], diag[1]
    for k in range(m):
        for i in range(n):
            r = rho[i]
            plus = r >= 0
            s = sp if plus else sm
            for j in range(d):
                xn[j] = X[i, j] + s * xi[k, i, j]
            rn = _signed_distance(xn, kind, vec, scalar, orient)
            dk = 0.0
            if naive:
                layer = abs(r) <= h
                if abs(r) < h:
                    dk = dt / h
            else:
                layer = abs(r) <= h or abs(rn) <= h or (rn >= 0) != plus
                if not layer:
                    e = abs(r * rn) * inv_ldt
                    uk = u[k, i]
                    # 1 - e <= exp(-e) <= 1 / (1 + e) settles most draws without exp;
                    # exp(-40) is below the smallest nonzero uniform draw
                    if e >= 40.0 or uk * (1.0 + e) >= 1.0:
                        layer = False
                    elif uk < 1.0 - e:
                        layer = True
                    else:
                        layer = uk < math.exp(-e)
                if layer:
                    r0 = _project(X, i, kind, vec, scalar, orient, foot, nu)
                    xin = 0.0
                    for j in range(d):
                        xin += xi[k, i, j] * nu[j]
                    y, dl = _skew(r0, dt, xin, u[k, i], qp, qm, skew_mode, lt_scale)
                    se = sp if y >= 0 else sm
                    for j in range(d):
                        xn[j] = foot[j] + y * nu[j] + se * (xi[k, i, j] - xin * nu[j])
                    rn = _signed_distance(xn, kind, vec, scalar, orient)
                    if skew_mode:
                        dk = dl / em
                    elif abs(r0) < h:
                        dk = dt / h
            if dk < dk_min:
                dk_min = dk
            if layer:
                counts[i, 2] += 1
            else:
                if dk > dk_max:
                    dk_max = dk
                if plus:
                    counts[i, 0] += 1
                else:
                    counts[i, 1] += 1
            K[i] += dk
            for j in range(d):
                X[i, j] = xn[j]
            rho[i] = rn
        g = step0 + k + 1
        for q in range(rec_steps.shape[0]):
            if rec_steps[q] == g:
                for i in range(n):
                    for j in range(d):
                        positions[i, q, j] = X[i, j]
                    Ks[i, q] = K[i]
    diag[0] = dk_min
    diag[1] = dk_max


@njit(cache=True, error_model="numpy")
def advance_steps_line(X, rho, K, counts, xi, u, dt, h, Lam, ep, em, nvec, offset,
                       skew_mode, naive, rec_steps, step0, positions, Ks, diag):
    """:func:`advance_steps` for ``d = 1`` and a point interface ``n x = offset``, ``n = +-1``.

    Same arithmetic as the general loop with the vector work removed; results
    agree with it up to rounding of the interface foot.
    """
    n = X.shape[0]
    m = xi.shape[0]
    sp, sm = math.sqrt(2.0 * dt * ep), math.sqrt(2.0 * dt * em)
    qp, qm = math.sqrt(ep), math.sqrt(em)
    lt_scale = 2.0 * em / (qp + qm) ** 2
    inv_ldt = 1.0 / (Lam * dt)
    dk_min, dk_max = diag[0], diag[1]
    for k in range(m):
        for i in range(n):
            r = rho[i]
            plus = r >= 0
            s = sp if plus else sm
            x = X[i, 0]
            xn = x + s * xi[k, i, 0]
            rn = nvec * xn - offset
            dk = 0.0
            if naive:
                layer = abs(r) <= h
                if abs(r) < h:
                    dk = dt / h
            else:
                layer = abs(r) <= h or abs(rn) <= h or (rn >= 0) != plus
                if not layer:
                    e = abs(r * rn) * inv_ldt
                    uk = u[k, i]
                    if e >= 40.0 or uk * (1.0 + e) >= 1.0:
                        layer = False
                    elif uk < 1.0 - e:
                        layer = True
                    else:
                        layer = uk < math.exp(-e)
                if layer:
                    r0 = nvec * x - offset
                    y, dl = _skew(r0, dt, xi[k, i, 0] * nvec, u[k, i], qp, qm, skew_mode, lt_scale)
                    xn = offset * nvec + y * nvec
                    rn = nvec * xn - offset
                    if skew_mode:
                        dk = dl / em
                    elif abs(r0) < h:
                        dk = dt / h
            if dk < dk_min:
                dk_min = dk
            if layer:
                counts[i, 2] += 1
            else:
                if dk > dk_max:
                    dk_max = dk
                if plus:
                    counts[i, 0] += 1
                else:
                    counts[i, 1] += 1
            K[i] += dk
            X[i, 0] = xn
            rho[i] = rn
        g = step0 + k + 1
        for q in range(rec_steps.shape[0]):
            if rec_steps[q] == g:
                for i in range(n):
                    positions[i, q, 0] = X[i, 0]
                    Ks[i, q] = K[i]
    diag[0] = dk_min
    diag[1] = dk_max
