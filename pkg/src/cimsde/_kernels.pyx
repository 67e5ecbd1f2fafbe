# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-step loops for the exact and Gaussian backends.

Same contract as ``_pykernels``: arrays are updated in place and the
return value is ``(steps_done, counter, status)``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log, erfc, fabs, copysign, isfinite, INFINITY

cnp.import_array()

cdef int OK = 0
cdef int DIVERGED = 1
cdef int DEGENERATE = 2
cdef double SQRT1_2 = 0.7071067811865476


cdef inline double phi(double x) noexcept nogil:
    return 0.5 * erfc(-x * SQRT1_2)


cdef inline void csqrt_parts(double a, double b, double* re, double* im) noexcept nogil:
    # principal branch; the sign of a zero imaginary part selects the side of the cut
    cdef double r, t
    if a == 0.0 and b == 0.0:
        re[0] = 0.0
        im[0] = b
        return
    r = sqrt(a * a + b * b)
    if a >= 0.0:
        t = sqrt(0.5 * (r + a))
        re[0] = t
        im[0] = b / (2.0 * t)
    else:
        t = sqrt(0.5 * (r - a))
        re[0] = fabs(b) / (2.0 * t)
        im[0] = copysign(t, b)


def exact_block(double complex[:, ::1] eta, double complex[:, ::1] mu, double[:, ::1] w,
                const double[:, ::1] J, const double[::1] pump,
                const double[:, :, ::1] z_eta, const double[:, :, ::1] z_mu,
                const double[:, ::1] z_meas, const double[:, ::1] u_res,
                double g, double xi_norm, double zeta_norm, double dtau,
                double ess_frac, double bound, traces=None):
    cdef Py_ssize_t n = eta.shape[0], m = eta.shape[1]
    cdef int want = traces is not None
    cdef double[:, :, ::1] tr = traces if want else np.empty((1, 1, 9))
    cdef double[::1] xbar = np.empty(n)
    cdef double[::1] xt = np.empty(n)
    cdef double[::1] f = np.empty(n)
    cdef double[::1] cum = np.empty(m)
    cdef double complex[::1] tmp_e = np.empty(m, dtype=np.complex128)
    cdef double complex[::1] tmp_m = np.empty(m, dtype=np.complex128)
    cdef Py_ssize_t done = 0
    cdef long n_res = 0
    cdef int status
    with nogil:
        status = _exact_loop(eta, mu, w, J, pump, z_eta, z_mu, z_meas, u_res, g, xi_norm,
                             zeta_norm, dtau, ess_frac, bound, want, tr, xbar, xt, f, cum,
                             tmp_e, tmp_m, &done, &n_res)
    return done, n_res, status


cdef int _exact_loop(double complex[:, ::1] eta, double complex[:, ::1] mu, double[:, ::1] w,
                     const double[:, ::1] J, const double[::1] pump,
                     const double[:, :, ::1] z_eta, const double[:, :, ::1] z_mu,
                     const double[:, ::1] z_meas, const double[:, ::1] u_res,
                     double g, double xi_norm, double zeta_norm, double dtau,
                     double ess_frac, double bound, int want, double[:, :, ::1] tr,
                     double[::1] xbar, double[::1] xt, double[::1] f, double[::1] cum,
                     double complex[::1] tmp_e, double complex[::1] tmp_m,
                     Py_ssize_t* done, long* n_res) noexcept nogil:
    cdef Py_ssize_t n = eta.shape[0], m = eta.shape[1], nsteps = pump.shape[0]
    cdef Py_ssize_t s, i, j, k, idx
    cdef double sq = sqrt(dtau), sxi = sqrt(xi_norm), loss = 1.0 + xi_norm
    cdef double p, wk, a, b, ea, eb, ua, ub, t1, t2, qa, qb, ra, rb, xb
    cdef double de_a, de_b, dm_a, dm_b, be_a, be_b, bm_a, bm_b
    cdef double tot, ess, pos, dev, xbar_i, zm, sw, half_xi_dt
    cdef double mx, mxi, nph, e2, e3, x2, x3, pp, pn
    cdef double g2 = g * g, g3 = g * g * g, bound2 = bound * bound
    cdef double inv_m = 1.0 / m
    cdef double complex ze, zmu
    half_xi_dt = 0.5 * xi_norm * dtau
    for s in range(nsteps):
        p = pump[s]
        for i in range(n):
            xb = 0.0
            for k in range(m):
                xb = xb + w[i, k] * (eta[i, k].real + mu[i, k].real)
            xbar[i] = xb
            if xi_norm > 0:
                xt[i] = xb + g * z_meas[s, i] / (sxi * sq)
            else:
                xt[i] = xb
        for i in range(n):
            t1 = 0.0
            for j in range(n):
                t1 = t1 + J[i, j] * (0.5 * xt[j])
            f[i] = zeta_norm * t1

        if want:
            for i in range(n):
                sw = 0.0; mx = 0.0; mxi = 0.0; nph = 0.0; e2 = 0.0; e3 = 0.0; pp = 0.0; pn = 0.0
                for k in range(m):
                    wk = w[i, k]
                    ze = eta[i, k]
                    zmu = mu[i, k]
                    a = ze.real + zmu.real
                    b = ze.imag + zmu.imag
                    sw = sw + wk
                    mx = mx + wk * a
                    mxi = mxi + wk * b
                    nph = nph + wk * (ze.real * zmu.real - ze.imag * zmu.imag)
                    e2 = e2 + wk * (a * a - b * b)
                    e3 = e3 + wk * (a * a * a - 3.0 * a * b * b)
                    pp = pp + wk * phi(a / g)
                    pn = pn + wk * phi(-a / g)
                mx = mx / g
                x2 = e2 / g2 + 1.0
                x3 = e3 / g3 + 3.0 * mx
                tr[s, i, 0] = mx
                tr[s, i, 1] = mxi / g
                tr[s, i, 2] = nph / g2
                tr[s, i, 3] = x2 - mx * mx
                tr[s, i, 4] = x3 - 3.0 * mx * x2 + 2.0 * mx * mx * mx
                tr[s, i, 5] = pp / sw
                tr[s, i, 6] = pn / sw
                tr[s, i, 7] = xt[i] / g
                tr[s, i, 8] = f[i]

        for i in range(n):
            xbar_i = xbar[i]
            zm = z_meas[s, i] * sq
            tot = 0.0
            for k in range(m):
                ea = eta[i, k].real; eb = eta[i, k].imag
                ua = mu[i, k].real; ub = mu[i, k].imag
                # p - eta^2 and p - mu^2, evaluated as numpy does for complex arrays
                qa = p - (ea * ea - eb * eb)
                qb = 0.0 - (ea * eb + eb * ea)
                ra = p - (ua * ua - ub * ub)
                rb = 0.0 - (ua * ub + ub * ua)
                de_a = -loss * ea + (ua * qa - ub * qb) + f[i]
                de_b = -loss * eb + (ua * qb + ub * qa)
                dm_a = -loss * ua + (ea * ra - eb * rb) + f[i]
                dm_b = -loss * ub + (ea * rb + eb * ra)
                csqrt_parts(qa, qb, &be_a, &be_b)
                csqrt_parts(ra, rb, &bm_a, &bm_b)
                t1 = z_eta[s, i, k] * sq
                t2 = z_mu[s, i, k] * sq
                ze = (ea + de_a * dtau + g * be_a * t1) + 1j * (eb + de_b * dtau + g * be_b * t1)
                zmu = (ua + dm_a * dtau + g * bm_a * t2) + 1j * (ub + dm_b * dtau + g * bm_b * t2)
                eta[i, k] = ze
                mu[i, k] = zmu
                if xi_norm > 0:
                    dev = ((ea + ua) - xbar_i) / g
                    w[i, k] = w[i, k] * exp(sxi * dev * zm - half_xi_dt * dev * dev)
                tot = tot + w[i, k]
                a = ze.real * ze.real + ze.imag * ze.imag
                b = zmu.real * zmu.real + zmu.imag * zmu.imag
                if not (isfinite(a) and isfinite(b)) or a > bound2 or b > bound2:
                    done[0] = s
                    return DIVERGED
            if not (tot > 0.0 and isfinite(tot)):
                done[0] = s
                return DEGENERATE
            ess = 0.0
            for k in range(m):
                wk = w[i, k] / tot
                w[i, k] = wk
                ess = ess + wk * wk
            if 1.0 / ess < ess_frac * m:
                tot = 0.0
                for k in range(m):
                    tot = tot + w[i, k]
                    cum[k] = tot
                cum[m - 1] = 1.0
                idx = 0
                for k in range(m):
                    pos = (u_res[s, i] + k) / m
                    while idx < m - 1 and cum[idx] < pos:
                        idx = idx + 1
                    tmp_e[k] = eta[i, idx]
                    tmp_m[k] = mu[i, idx]
                for k in range(m):
                    eta[i, k] = tmp_e[k]
                    mu[i, k] = tmp_m[k]
                    w[i, k] = inv_m
                n_res[0] = n_res[0] + 1
    done[0] = nsteps
    return OK


def gaussian_block(double[::1] mu, double[::1] var, const double[:, ::1] J, const double[::1] eps_p,
                   const double[:, ::1] z_meas, double gamma_s, double gamma_p, double kappa,
                   double xi, double zeta, double dt, double var_floor, traces=None):
    cdef Py_ssize_t n = mu.shape[0]
    cdef int want = traces is not None
    cdef double[:, :, ::1] tr = traces if want else np.empty((1, 1, 9))
    cdef double[::1] dw = np.zeros(n)
    cdef double[::1] xrec = np.empty(n)
    cdef double[::1] eps_s = np.empty(n)
    cdef Py_ssize_t done = 0
    cdef long hits = 0
    cdef int status
    with nogil:
        status = _gaussian_loop(mu, var, J, eps_p, z_meas, gamma_s, gamma_p, kappa, xi, zeta,
                                dt, var_floor, want, tr, dw, xrec, eps_s, &done, &hits)
    return done, hits, status


cdef int _gaussian_loop(double[::1] mu, double[::1] var, const double[:, ::1] J, const double[::1] eps_p,
                        const double[:, ::1] z_meas, double gamma_s, double gamma_p, double kappa,
                        double xi, double zeta, double dt, double var_floor, int want,
                        double[:, :, ::1] tr, double[::1] dw, double[::1] xrec,
                        double[::1] eps_s, Py_ssize_t* done, long* hits) noexcept nogil:
    cdef Py_ssize_t n = mu.shape[0], nsteps = eps_p.shape[0]
    cdef Py_ssize_t s, i, j
    cdef double sq = sqrt(dt), sxi = sqrt(xi)
    cdef double c = kappa * kappa / (2.0 * gamma_p)
    cdef double gnorm = kappa / sqrt(2.0 * gamma_p * gamma_s)
    cdef double a, v, q, mi, t, sd, d_mu, d_var
    for s in range(nsteps):
        a = kappa * eps_p[s] / gamma_p
        for i in range(n):
            if xi > 0:
                dw[i] = z_meas[s, i] * sq
                xrec[i] = 2.0 * mu[i] + dw[i] / (sxi * dt)
            else:
                dw[i] = 0.0
                xrec[i] = 2.0 * mu[i]
        for i in range(n):
            t = 0.0
            for j in range(n):
                t = t + J[i, j] * (0.5 * xrec[j])
            eps_s[i] = zeta * t
        if want:
            for i in range(n):
                sd = sqrt(var[i])
                tr[s, i, 0] = 2.0 * mu[i]
                tr[s, i, 1] = 0.0
                tr[s, i, 2] = mu[i] * mu[i] + var[i] + 1.0 / (16.0 * var[i]) - 0.5
                tr[s, i, 3] = 4.0 * var[i]
                tr[s, i, 4] = 0.0
                tr[s, i, 5] = phi(mu[i] / sd)
                tr[s, i, 6] = phi(-mu[i] / sd)
                tr[s, i, 7] = xrec[i]
                tr[s, i, 8] = gnorm * eps_s[i] / gamma_s
        for i in range(n):
            v = var[i]
            mi = mu[i]
            q = v - 0.25
            d_mu = (sxi * q * dw[i]
                    + (-gamma_s * mi + a * mi
                       - c * (mi * mi * mi + (mi / v) * q * (3.0 * v - 0.25))
                       + eps_s[i]) * dt)
            d_var = (-2.0 * gamma_s * q + 2.0 * a * (v + 0.25)
                     - c * (0.625 + 6.0 * v * v + 6.0 * v * mi * mi - 0.5 * v
                            + 1.5 * mi * mi - 3.0 / (32.0 * v))
                     - 4.0 * xi * q * q) * dt
            mu[i] = mi + d_mu
            var[i] = v + d_var
        for i in range(n):
            if not (isfinite(mu[i]) and isfinite(var[i])):
                done[0] = s
                return DIVERGED
            if var[i] < var_floor:
                var[i] = var_floor
                hits[0] = hits[0] + 1
    done[0] = nsteps
    return OK
