# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_kernels_py``.

Same functions, same signatures, same status codes; see the fallback module
for the algorithm documentation.
"""

from libc.math cimport fabs, copysign, pow, isfinite, INFINITY, NAN

import numpy as np

backend_name = "compiled"

STEADY_OK = 0
STEADY_MAXITER = 1
STEADY_SINGULAR = 2

LP_OPTIMAL = 0
LP_ITERLIMIT = 1
LP_BREAKDOWN = 2


cdef inline double _flow(double kv, double alpha, double dp, double dp_lam) nogil:
    cdef double c1, c3
    if dp >= dp_lam or dp <= -dp_lam:
        return kv * copysign(pow(fabs(dp), alpha), dp)
    c1 = kv * pow(dp_lam, alpha - 1.0) * (3.0 - alpha) * 0.5
    c3 = kv * (alpha - 1.0) * pow(dp_lam, alpha - 3.0) * 0.5
    return c1 * dp + c3 * dp * dp * dp


cdef inline void _flow_deriv(double kv, double alpha, double dp, double dp_lam,
                             double* q, double* d) nogil:
    cdef double ad, c1, c3
    if dp >= dp_lam or dp <= -dp_lam:
        ad = fabs(dp)
        q[0] = kv * copysign(pow(ad, alpha), dp)
        d[0] = kv * alpha * pow(ad, alpha - 1.0)
    else:
        c1 = kv * pow(dp_lam, alpha - 1.0) * (3.0 - alpha) * 0.5
        c3 = kv * (alpha - 1.0) * pow(dp_lam, alpha - 3.0) * 0.5
        q[0] = c1 * dp + c3 * dp * dp * dp
        d[0] = c1 + 3.0 * c3 * dp * dp


def flow_value(double kv, double alpha, double dp, double dp_lam):
    """Volume flow through one fully open valve at pressure difference dp."""
    return _flow(kv, alpha, dp, dp_lam)


cdef void _terms(double[::1] kv, double[::1] alpha, unsigned char[::1] bits,
                 Py_ssize_t n, double pa, double pb, double p_s, double p_t,
                 double dp_lam, double* out) nogil:
    # out = [qpa, qbt, qat, qpb, sa, sb]
    cdef Py_ssize_t i
    cdef double dp, q, d
    cdef double qpa = 0.0, qbt = 0.0, qat = 0.0, qpb = 0.0
    cdef double spa = 0.0, sbt = 0.0, sat = 0.0, spb = 0.0
    dp = p_s - pa
    for i in range(0, n):
        if bits[i]:
            _flow_deriv(kv[i], alpha[i], dp, dp_lam, &q, &d)
            qpa += q
            spa += d
    dp = pb - p_t
    for i in range(n, 2 * n):
        if bits[i]:
            _flow_deriv(kv[i], alpha[i], dp, dp_lam, &q, &d)
            qbt += q
            sbt += d
    dp = pa - p_t
    for i in range(2 * n, 3 * n):
        if bits[i]:
            _flow_deriv(kv[i], alpha[i], dp, dp_lam, &q, &d)
            qat += q
            sat += d
    dp = p_s - pb
    for i in range(3 * n, 4 * n):
        if bits[i]:
            _flow_deriv(kv[i], alpha[i], dp, dp_lam, &q, &d)
            qpb += q
            spb += d
    out[0] = qpa
    out[1] = qbt
    out[2] = qat
    out[3] = qpb
    out[4] = spa + sat
    out[5] = spb + sbt


def solve_steady_state(double[::1] kv, double[::1] alpha, unsigned char[::1] bits,
                       double area_a, double area_b, double p_s, double p_t,
                       double force, double dp_lam, double tol, int max_iter):
    """Damped Newton solve; see the fallback module for the contract."""
    cdef Py_ssize_t n4 = kv.shape[0]
    cdef Py_ssize_t n = n4 // 4
    cdef Py_ssize_t i
    cdef int it, h
    cdef bint any_open = False
    for i in range(n4):
        if bits[i]:
            any_open = True
            break
    if not any_open:
        return 0.0, NAN, NAN, 0, STEADY_SINGULAR

    cdef double f_scale = max(fabs(force), area_a * max(p_s, p_t))
    if f_scale < 1.0:
        f_scale = 1.0
    cdef double v = 0.0
    cdef double pa = 0.5 * (p_s + p_t)
    cdef double pb = pa
    cdef double w[6]
    cdef double f1, f2, f3, sa, sb
    cdef double g1, g2, g3, sa_n, sb_n
    cdef double v_scale, r1, r2, r3, denom, dpb, dv, dpa
    cdef double phi0, phi, step, a_, b_, c_
    cdef double v_n, pa_n, pb_n

    _terms(kv, alpha, bits, n, pa, pb, p_s, p_t, dp_lam, w)
    f1 = w[0] - w[2] - area_a * v
    f2 = w[3] - w[1] + area_b * v
    f3 = area_a * pa - area_b * pb - force
    sa = w[4]
    sb = w[5]

    for it in range(1, max_iter + 1):
        v_scale = fabs(v)
        if v_scale < 1e-6:
            v_scale = 1e-6
        r1 = fabs(f1) / (area_a * v_scale)
        r2 = fabs(f2) / (area_b * v_scale)
        r3 = fabs(f3) / f_scale
        if r1 <= tol and r2 <= tol and r3 <= tol:
            return v, pa, pb, it - 1, STEADY_OK

        denom = (area_a / area_b) * sb + (area_b / area_a) * sa
        if denom <= 0.0 or not isfinite(denom):
            return v, pa, pb, it - 1, STEADY_SINGULAR
        dpb = (f1 + (area_a / area_b) * f2 + (sa / area_a) * f3) / denom
        dv = (-f2 + sb * dpb) / area_b
        dpa = (-f3 + area_b * dpb) / area_a

        a_ = f1 / area_a
        b_ = f2 / area_b
        c_ = f3 / f_scale
        phi0 = a_ * a_ + b_ * b_ + c_ * c_
        step = 1.0
        for h in range(31):
            v_n = v + step * dv
            pa_n = pa + step * dpa
            pb_n = pb + step * dpb
            _terms(kv, alpha, bits, n, pa_n, pb_n, p_s, p_t, dp_lam, w)
            g1 = w[0] - w[2] - area_a * v_n
            g2 = w[3] - w[1] + area_b * v_n
            g3 = area_a * pa_n - area_b * pb_n - force
            sa_n = w[4]
            sb_n = w[5]
            a_ = g1 / area_a
            b_ = g2 / area_b
            c_ = g3 / f_scale
            phi = a_ * a_ + b_ * b_ + c_ * c_
            if phi < phi0:
                break
            step *= 0.5
        v = v_n
        pa = pa_n
        pb = pb_n
        f1 = g1
        f2 = g2
        f3 = g3
        sa = sa_n
        sb = sb_n

    v_scale = fabs(v)
    if v_scale < 1e-6:
        v_scale = 1e-6
    r1 = fabs(f1) / (area_a * v_scale)
    r2 = fabs(f2) / (area_b * v_scale)
    r3 = fabs(f3) / f_scale
    if r1 <= tol and r2 <= tol and r3 <= tol:
        return v, pa, pb, max_iter, STEADY_OK
    return v, pa, pb, max_iter, STEADY_MAXITER


def solve_box_lad(A, b, double tau, int max_iter=0):
    """Bounded-variable primal simplex; see the fallback module."""
    A_arr = np.ascontiguousarray(A, dtype=np.float64)
    b_arr = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] Am = A_arr
    cdef double[::1] bm = b_arr
    cdef Py_ssize_t m = Am.shape[0]
    cdef Py_ssize_t n = Am.shape[1]
    cdef Py_ssize_t nt = n + 2 * m
    if max_iter <= 0:
        max_iter = 200 + 40 * <int> (m + n)

    T_arr = np.zeros((m, nt))
    cdef double[:, ::1] T = T_arr
    xb_arr = np.empty(m)
    cdef double[::1] xb = xb_arr
    basis_arr = np.empty(m, dtype=np.intp)
    cdef Py_ssize_t[::1] basis = basis_arr
    cost_arr = np.zeros(nt)
    cdef double[::1] cost = cost_arr
    upper_arr = np.empty(nt)
    cdef double[::1] upper = upper_arr
    atup_arr = np.zeros(nt, dtype=np.uint8)
    cdef unsigned char[::1] at_upper = atup_arr
    isb_arr = np.zeros(nt, dtype=np.uint8)
    cdef unsigned char[::1] is_basic = isb_arr
    y_arr = np.empty(m)
    cdef double[::1] y = y_arr
    col_arr = np.empty(m)
    cdef double[::1] col = col_arr

    cdef Py_ssize_t i, j, q_, r, j_enter, leave
    cdef double tol_d = 1e-9
    cdef double tol_p = 1e-10
    cdef double dj, direction, rmin, t_enter, ratio, piv, inv, f, ubi, val
    cdef int status = LP_OPTIMAL
    cdef int it = 0
    cdef bint left_at_upper

    for i in range(m):
        for j in range(n):
            T[i, j] = Am[i, j]
        T[i, n + i] = 1.0
        T[i, n + m + i] = -1.0
        if bm[i] < 0.0:
            basis[i] = n + m + i
            for j in range(nt):
                T[i, j] = -T[i, j]
            xb[i] = -bm[i]
        else:
            basis[i] = n + i
            xb[i] = bm[i]
        is_basic[basis[i]] = 1
    for j in range(nt):
        upper[j] = 1.0 if j < n else INFINITY
        if n <= j < n + m:
            cost[j] = tau
        elif j >= n + m:
            cost[j] = 1.0 - tau

    while True:
        for i in range(m):
            y[i] = cost[basis[i]]
        j_enter = -1
        direction = 1.0
        for j in range(nt):
            if is_basic[j]:
                continue
            dj = cost[j]
            for i in range(m):
                dj -= y[i] * T[i, j]
            if at_upper[j]:
                if dj > tol_d:
                    j_enter = j
                    direction = -1.0
                    break
            elif dj < -tol_d:
                j_enter = j
                direction = 1.0
                break
        if j_enter < 0:
            break
        if it >= max_iter:
            status = LP_ITERLIMIT
            break
        it += 1
        j = j_enter
        for i in range(m):
            col[i] = direction * T[i, j]

        rmin = INFINITY
        for i in range(m):
            if col[i] > tol_p:
                ratio = xb[i] / col[i]
            elif col[i] < -tol_p:
                ubi = upper[basis[i]]
                if not isfinite(ubi):
                    continue
                ratio = (ubi - xb[i]) / (-col[i])
            else:
                continue
            if ratio < rmin:
                rmin = ratio
        t_enter = upper[j]

        if t_enter < rmin:
            for i in range(m):
                xb[i] -= t_enter * col[i]
                if xb[i] < 0.0:
                    xb[i] = 0.0
            at_upper[j] = 0 if at_upper[j] else 1
            continue
        if not isfinite(rmin):
            status = LP_BREAKDOWN
            break

        # leaving row: smallest basis index among the minimizing ratios
        r = -1
        for i in range(m):
            if col[i] > tol_p:
                ratio = xb[i] / col[i]
            elif col[i] < -tol_p:
                ubi = upper[basis[i]]
                if not isfinite(ubi):
                    continue
                ratio = (ubi - xb[i]) / (-col[i])
            else:
                continue
            if ratio <= rmin * (1.0 + 1e-12) + 1e-15:
                if r < 0 or basis[i] < basis[r]:
                    r = i
        if r < 0:
            status = LP_BREAKDOWN
            break
        leave = basis[r]
        left_at_upper = col[r] < 0.0

        for i in range(m):
            xb[i] -= rmin * col[i]
            if xb[i] < 0.0:
                xb[i] = 0.0
        xb[r] = rmin if not at_upper[j] else upper[j] - rmin

        piv = T[r, j]
        if fabs(piv) < tol_p:
            status = LP_BREAKDOWN
            break
        inv = 1.0 / piv
        for q_ in range(nt):
            T[r, q_] *= inv
        for i in range(m):
            if i == r:
                continue
            f = T[i, j]
            if f != 0.0:
                for q_ in range(nt):
                    T[i, q_] -= f * T[r, q_]

        is_basic[leave] = 0
        at_upper[leave] = 1 if left_at_upper else 0
        basis[r] = j
        is_basic[j] = 1
        at_upper[j] = 0

    x_arr = np.zeros(n)
    cdef double[::1] x = x_arr
    for j in range(n):
        if at_upper[j]:
            x[j] = 1.0
    for i in range(m):
        if basis[i] < n:
            val = xb[i]
            if val < 0.0:
                val = 0.0
            elif val > 1.0:
                val = 1.0
            x[basis[i]] = val
    cdef double obj = 0.0
    cdef double resid
    for i in range(m):
        resid = bm[i]
        for j in range(n):
            resid -= Am[i, j] * x[j]
        if resid > 0.0:
            obj += tau * resid
        else:
            obj -= (1.0 - tau) * resid
    return x_arr, obj, it, status
