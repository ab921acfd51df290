"""Numpy/pure-Python implementations of the numerical kernels.

Two hot paths live here (and in the optional compiled twin ``_kernels``):

* ``solve_steady_state`` -- damped Newton iteration on the three
  steady-state balance equations of the cylinder (piston velocity and the
  two chamber pressures as unknowns).
* ``solve_box_lad`` -- bounded-variable primal simplex for the
  box-constrained quantile-regression LP (least absolute deviations at
  tau = 0.5) with Bland's anti-cycling rule.

The compiled module must expose the same functions with the same
signatures and status codes.
"""

from __future__ import annotations

import math

import numpy as np

backend_name = "python"

# steady-state status codes
STEADY_OK = 0
STEADY_MAXITER = 1
STEADY_SINGULAR = 2

# LP status codes
LP_OPTIMAL = 0
LP_ITERLIMIT = 1
LP_BREAKDOWN = 2


def flow_value(kv: float, alpha: float, dp: float, dp_lam: float) -> float:
    """Volume flow through one fully open valve at pressure difference dp.

    Turbulent signed-power law outside +-dp_lam; inside, an odd cubic that
    matches the power law's value and slope at the boundary (keeps the
    Jacobian bounded at dp = 0).
    """
    if dp >= dp_lam or dp <= -dp_lam:
        return kv * math.copysign(abs(dp) ** alpha, dp)
    c1 = kv * dp_lam ** (alpha - 1.0) * (3.0 - alpha) * 0.5
    c3 = kv * (alpha - 1.0) * dp_lam ** (alpha - 3.0) * 0.5
    return c1 * dp + c3 * dp * dp * dp


def _flow_and_deriv(kv: float, alpha: float, dp: float, dp_lam: float) -> tuple[float, float]:
    if dp >= dp_lam or dp <= -dp_lam:
        ad = abs(dp)
        return kv * math.copysign(ad**alpha, dp), kv * alpha * ad ** (alpha - 1.0)
    c1 = kv * dp_lam ** (alpha - 1.0) * (3.0 - alpha) * 0.5
    c3 = kv * (alpha - 1.0) * dp_lam ** (alpha - 3.0) * 0.5
    return c1 * dp + c3 * dp * dp * dp, c1 + 3.0 * c3 * dp * dp


def solve_steady_state(
    kv,
    alpha,
    bits,
    area_a: float,
    area_b: float,
    p_s: float,
    p_t: float,
    force: float,
    dp_lam: float,
    tol: float,
    max_iter: int,
):
    """Solve the three balance equations for (v, p_a, p_b).

    ``kv``/``alpha``/``bits`` are flat per-valve arrays in word order
    (PA, BT, AT, PB blocks of equal length). Returns
    ``(v, p_a, p_b, iters, status)`` with status STEADY_OK / STEADY_MAXITER /
    STEADY_SINGULAR. Residuals are normalized before the tolerance test:
    the two flow equations by area * max(|v|, 1e-6 m/s), the force equation
    by max(|F|, area_a * max(p_s, p_t), 1).
    """
    kv = [float(x) for x in kv]
    alpha = [float(x) for x in alpha]
    bits = [int(x) for x in bits]
    n4 = len(kv)
    n = n4 // 4
    if not any(bits):
        return 0.0, math.nan, math.nan, 0, STEADY_SINGULAR

    f_scale = max(abs(force), area_a * max(p_s, p_t), 1.0)
    v = 0.0
    pa = 0.5 * (p_s + p_t)
    pb = pa

    def chamber_terms(pa_: float, pb_: float):
        qpa = qbt = qat = qpb = 0.0
        spa = sbt = sat = spb = 0.0
        dp = p_s - pa_
        for i in range(0, n):
            if bits[i]:
                q, d = _flow_and_deriv(kv[i], alpha[i], dp, dp_lam)
                qpa += q
                spa += d
        dp = pb_ - p_t
        for i in range(n, 2 * n):
            if bits[i]:
                q, d = _flow_and_deriv(kv[i], alpha[i], dp, dp_lam)
                qbt += q
                sbt += d
        dp = pa_ - p_t
        for i in range(2 * n, 3 * n):
            if bits[i]:
                q, d = _flow_and_deriv(kv[i], alpha[i], dp, dp_lam)
                qat += q
                sat += d
        dp = p_s - pb_
        for i in range(3 * n, 4 * n):
            if bits[i]:
                q, d = _flow_and_deriv(kv[i], alpha[i], dp, dp_lam)
                qpb += q
                spb += d
        return qpa, qbt, qat, qpb, spa + sat, spb + sbt

    def residuals(v_: float, pa_: float, pb_: float):
        qpa, qbt, qat, qpb, sa, sb = chamber_terms(pa_, pb_)
        f1 = qpa - qat - area_a * v_
        f2 = qpb - qbt + area_b * v_
        f3 = area_a * pa_ - area_b * pb_ - force
        return f1, f2, f3, sa, sb

    def merit(f1: float, f2: float, f3: float) -> float:
        a = f1 / area_a
        b = f2 / area_b
        c = f3 / f_scale
        return a * a + b * b + c * c

    f1, f2, f3, sa, sb = residuals(v, pa, pb)
    for it in range(1, max_iter + 1):
        v_scale = max(abs(v), 1e-6)
        r1 = abs(f1) / (area_a * v_scale)
        r2 = abs(f2) / (area_b * v_scale)
        r3 = abs(f3) / f_scale
        if max(r1, r2, r3) <= tol:
            return v, pa, pb, it - 1, STEADY_OK

        # Newton step by block elimination; the denominator vanishes only
        # when no valve is open anywhere, which was excluded above.
        denom = (area_a / area_b) * sb + (area_b / area_a) * sa
        if denom <= 0.0 or not math.isfinite(denom):
            return v, pa, pb, it - 1, STEADY_SINGULAR
        dpb = (f1 + (area_a / area_b) * f2 + (sa / area_a) * f3) / denom
        dv = (-f2 + sb * dpb) / area_b
        dpa = (-f3 + area_b * dpb) / area_a

        phi0 = merit(f1, f2, f3)
        step = 1.0
        for _ in range(31):
            v_n = v + step * dv
            pa_n = pa + step * dpa
            pb_n = pb + step * dpb
            g1, g2, g3, sa_n, sb_n = residuals(v_n, pa_n, pb_n)
            if merit(g1, g2, g3) < phi0:
                break
            step *= 0.5
        v, pa, pb = v_n, pa_n, pb_n
        f1, f2, f3, sa, sb = g1, g2, g3, sa_n, sb_n

    v_scale = max(abs(v), 1e-6)
    r1 = abs(f1) / (area_a * v_scale)
    r2 = abs(f2) / (area_b * v_scale)
    r3 = abs(f3) / f_scale
    if max(r1, r2, r3) <= tol:
        return v, pa, pb, max_iter, STEADY_OK
    return v, pa, pb, max_iter, STEADY_MAXITER


def solve_box_lad(A, b, tau: float, max_iter: int = 0):
    """Minimize sum_i rho_tau(b_i - (Ax)_i) subject to 0 <= x <= 1.

    Bounded-variable primal simplex on the equality form
    ``Ax + r+ - r- = b`` with Bland's rule for both the entering and the
    leaving choice. Returns ``(x, objective, iters, status)``; the
    objective is recomputed from the original data at the returned x.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    if max_iter <= 0:
        max_iter = 200 + 40 * (m + n)
    nt = n + 2 * m
    rows = np.arange(m)

    T = np.zeros((m, nt))
    T[:, :n] = A
    T[rows, n + rows] = 1.0
    T[rows, n + m + rows] = -1.0

    xb = b.copy()
    basis = n + rows.copy()
    neg = xb < 0.0
    basis[neg] = n + m + rows[neg]
    T[neg, :] *= -1.0
    xb[neg] = -xb[neg]

    upper = np.full(nt, np.inf)
    upper[:n] = 1.0
    cost = np.zeros(nt)
    cost[n : n + m] = tau
    cost[n + m :] = 1.0 - tau
    at_upper = np.zeros(nt, dtype=bool)
    is_basic = np.zeros(nt, dtype=bool)
    is_basic[basis] = True

    tol_d = 1e-9
    tol_p = 1e-10
    status = LP_OPTIMAL
    it = 0
    while True:
        cb = cost[basis]
        d = cost - cb @ T
        eligible = (~is_basic) & (
            ((~at_upper) & (d < -tol_d)) | (at_upper & (d > tol_d))
        )
        cand = np.nonzero(eligible)[0]
        if cand.size == 0:
            break
        if it >= max_iter:
            status = LP_ITERLIMIT
            break
        it += 1
        j = int(cand[0])
        direction = -1.0 if at_upper[j] else 1.0
        col = direction * T[:, j]

        ratios = np.full(m, np.inf)
        pos = col > tol_p
        ratios[pos] = xb[pos] / col[pos]
        negc = col < -tol_p
        ub = upper[basis]
        cap = negc & np.isfinite(ub)
        ratios[cap] = (ub[cap] - xb[cap]) / (-col[cap])
        rmin = float(ratios.min()) if m else math.inf
        t_enter = float(upper[j])

        if t_enter < rmin:
            # entering variable traverses its whole range: bound flip
            xb -= t_enter * col
            np.maximum(xb, 0.0, out=xb)
            at_upper[j] = not at_upper[j]
            continue
        if not math.isfinite(rmin):
            status = LP_BREAKDOWN
            break

        tie = np.nonzero(ratios <= rmin * (1.0 + 1e-12) + 1e-15)[0]
        r = int(tie[np.argmin(basis[tie])])
        leave = int(basis[r])
        left_at_upper = col[r] < 0.0

        xb -= rmin * col
        xb[r] = rmin if not at_upper[j] else upper[j] - rmin
        np.maximum(xb, 0.0, out=xb)

        piv = T[r, j]
        if abs(piv) < tol_p:
            status = LP_BREAKDOWN
            break
        T[r] /= piv
        colj = T[:, j].copy()
        colj[r] = 0.0
        T -= np.outer(colj, T[r])

        is_basic[leave] = False
        at_upper[leave] = left_at_upper
        basis[r] = j
        is_basic[j] = True
        at_upper[j] = False

    x = np.zeros(n)
    x[at_upper[:n]] = 1.0
    in_x = basis < n
    x[basis[in_x]] = xb[in_x]
    np.clip(x, 0.0, 1.0, out=x)
    resid = b - A @ x
    obj = tau * resid[resid > 0.0].sum() - (1.0 - tau) * resid[resid < 0.0].sum()
    return x, float(obj), it, status
