# Compiled likelihood kernels; same contract as _pykernels.
import numpy as np

from libc.math cimport exp, log, log1p, fabs

cdef double HALF_LOG_2PI = 0.91893853320467274178


cdef inline double _log_sigmoid(double z) nogil:
    if z >= 0:
        return -log1p(exp(-z))
    return z - log1p(exp(z))


cdef inline double _sigmoid(double z) nogil:
    cdef double ez
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


cdef inline double _logaddexp(double a, double b) nogil:
    if a >= b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def gc_sup(const double[::1] theta, const double[::1] xc, const double[::1] y,
           const double[::1] xe, const double[::1] w):
    cdef Py_ssize_t i, n = xc.shape[0]
    cdef double m = theta[0], mu0 = theta[1], mu1 = theta[2]
    cdef double z, s, r, total = 0.0, g0 = 0.0, g1 = 0.0, g2 = 0.0
    with nogil:
        for i in range(n):
            z = xc[i] - m
            s = _sigmoid(z)
            if y[i] > 0.5:
                r = xe[i] - mu1
                total += w[i] * (_log_sigmoid(z) - HALF_LOG_2PI - 0.5 * r * r)
                g2 += w[i] * r
            else:
                r = xe[i] - mu0
                total += w[i] * (_log_sigmoid(-z) - HALF_LOG_2PI - 0.5 * r * r)
                g1 += w[i] * r
            g0 -= w[i] * (y[i] - s)
    grad = np.empty(3)
    grad[0] = g0
    grad[1] = g1
    grad[2] = g2
    return total, grad


def gc_unsup(const double[::1] theta, const double[::1] xc, const double[::1] xe):
    cdef Py_ssize_t i, n = xc.shape[0]
    cdef double m = theta[0], mu0 = theta[1], mu1 = theta[2]
    cdef double z, s, r0, r1, a0, a1, lse, p0, p1
    cdef double total = 0.0, g0 = 0.0, g1 = 0.0, g2 = 0.0
    with nogil:
        for i in range(n):
            z = xc[i] - m
            s = _sigmoid(z)
            r0 = xe[i] - mu0
            r1 = xe[i] - mu1
            a0 = _log_sigmoid(-z) - 0.5 * r0 * r0
            a1 = _log_sigmoid(z) - 0.5 * r1 * r1
            lse = _logaddexp(a0, a1)
            p0 = exp(a0 - lse)
            p1 = exp(a1 - lse)
            total += lse
            g0 += p0 * s - p1 * (1.0 - s)
            g1 += p0 * r0
            g2 += p1 * r1
    grad = np.empty(3)
    grad[0] = g0
    grad[1] = g1
    grad[2] = g2
    return total - n * HALF_LOG_2PI, grad


def lg_sup(const double[::1] theta, const double[::1] xc, const double[::1] y,
           const double[::1] xe, const double[::1] w):
    cdef Py_ssize_t i, n = xc.shape[0]
    cdef double a = theta[0], b = theta[1], c = theta[2], d = theta[3]
    cdef double lsy = theta[4], lse = theta[5]
    cdef double vy = exp(2.0 * lsy), ve = exp(2.0 * lse)
    cdef double ry, re, total = 0.0
    cdef double g0 = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0, g4 = 0.0, g5 = 0.0
    with nogil:
        for i in range(n):
            ry = y[i] - a - b * xc[i]
            re = xe[i] - c - d * y[i]
            total += w[i] * (-2.0 * HALF_LOG_2PI - lsy - lse
                             - 0.5 * ry * ry / vy - 0.5 * re * re / ve)
            g0 += w[i] * ry
            g1 += w[i] * ry * xc[i]
            g2 += w[i] * re
            g3 += w[i] * re * y[i]
            g4 += w[i] * (ry * ry / vy - 1.0)
            g5 += w[i] * (re * re / ve - 1.0)
    grad = np.empty(6)
    grad[0] = g0 / vy
    grad[1] = g1 / vy
    grad[2] = g2 / ve
    grad[3] = g3 / ve
    grad[4] = g4
    grad[5] = g5
    return total, grad


def lg_unsup(const double[::1] theta, const double[::1] xc, const double[::1] xe):
    cdef Py_ssize_t i, n = xc.shape[0]
    cdef double a = theta[0], b = theta[1], c = theta[2], d = theta[3]
    cdef double vy = exp(2.0 * theta[4]), ve = exp(2.0 * theta[5])
    cdef double v = d * d * vy + ve
    cdef double pred_y, r, dmu, sum_rr = 0.0, sum_dmu = 0.0, sum_dmu_x = 0.0
    cdef double sum_dmu_py = 0.0, sum_dv = 0.0
    with nogil:
        for i in range(n):
            pred_y = a + b * xc[i]
            r = xe[i] - c - d * pred_y
            dmu = r / v
            sum_rr += r * r
            sum_dmu += dmu
            sum_dmu_x += dmu * xc[i]
            sum_dmu_py += dmu * pred_y
            sum_dv += 0.5 * (r * r / v - 1.0) / v
    total = -n * (HALF_LOG_2PI + 0.5 * log(v)) - 0.5 * sum_rr / v
    grad = np.empty(6)
    grad[0] = d * sum_dmu
    grad[1] = d * sum_dmu_x
    grad[2] = sum_dmu
    grad[3] = sum_dmu_py + sum_dv * 2.0 * d * vy
    grad[4] = sum_dv * 2.0 * d * d * vy
    grad[5] = sum_dv * 2.0 * ve
    return total, grad


def disc_sup(const double[::1] theta, const double[:, ::1] xc, const double[::1] y,
             const double[:, ::1] xe, const double[::1] w):
    cdef Py_ssize_t i, j, n = xc.shape[0], dc = xc.shape[1], de = xe.shape[1]
    cdef Py_ssize_t off = dc + 1, col
    cdef double eta, s, q, resid, total = 0.0
    grad_arr = np.zeros(off + 2 * de)
    cdef double[::1] grad = grad_arr
    with nogil:
        for i in range(n):
            eta = theta[0]
            for j in range(dc):
                eta += theta[1 + j] * xc[i, j]
            col = 1 if y[i] > 0.5 else 0
            if col == 1:
                total += w[i] * _log_sigmoid(eta)
            else:
                total += w[i] * _log_sigmoid(-eta)
            resid = w[i] * (y[i] - _sigmoid(eta))
            grad[0] += resid
            for j in range(dc):
                grad[1 + j] += resid * xc[i, j]
            for j in range(de):
                q = theta[off + 2 * j + col]
                if xe[i, j] > 0.5:
                    total += w[i] * _log_sigmoid(q)
                else:
                    total += w[i] * _log_sigmoid(-q)
                grad[off + 2 * j + col] += w[i] * (xe[i, j] - _sigmoid(q))
    return total, grad_arr


def disc_unsup(const double[::1] theta, const double[:, ::1] xc, const double[:, ::1] xe,
               const double[::1] w):
    cdef Py_ssize_t i, j, n = xc.shape[0], dc = xc.shape[1], de = xe.shape[1]
    cdef Py_ssize_t off = dc + 1
    cdef double eta, a0, a1, lse, r0, r1, resid, q0, q1, total = 0.0
    grad_arr = np.zeros(off + 2 * de)
    cdef double[::1] grad = grad_arr
    with nogil:
        for i in range(n):
            eta = theta[0]
            for j in range(dc):
                eta += theta[1 + j] * xc[i, j]
            a0 = _log_sigmoid(-eta)
            a1 = _log_sigmoid(eta)
            for j in range(de):
                q0 = theta[off + 2 * j]
                q1 = theta[off + 2 * j + 1]
                if xe[i, j] > 0.5:
                    a0 += _log_sigmoid(q0)
                    a1 += _log_sigmoid(q1)
                else:
                    a0 += _log_sigmoid(-q0)
                    a1 += _log_sigmoid(-q1)
            lse = _logaddexp(a0, a1)
            total += w[i] * lse
            r0 = w[i] * exp(a0 - lse)
            r1 = w[i] * exp(a1 - lse)
            resid = r1 - w[i] * _sigmoid(eta)
            grad[0] += resid
            for j in range(dc):
                grad[1 + j] += resid * xc[i, j]
            for j in range(de):
                grad[off + 2 * j] += r0 * (xe[i, j] - _sigmoid(theta[off + 2 * j]))
                grad[off + 2 * j + 1] += r1 * (xe[i, j] - _sigmoid(theta[off + 2 * j + 1]))
    return total, grad_arr
