"""Pure numpy versions of the likelihood kernels.

Every function returns ``(total, gradient)`` where ``total`` is the sum of
per-row log-densities (weighted for the supervised kernels) and
``gradient`` its derivative with respect to the flat parameter vector.
The compiled module ``_ckernels`` exposes the same functions.
"""

import numpy as np

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def log_sigmoid(z):
    z = np.asarray(z, dtype=float)
    return -np.logaddexp(0.0, -z)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def gc_sup(theta, xc, y, xe, w):
    m, mu0, mu1 = theta[0], theta[1], theta[2]
    z = xc - m
    s = sigmoid(z)
    is1 = y > 0.5
    mu = np.where(is1, mu1, mu0)
    r = xe - mu
    lp = np.where(is1, log_sigmoid(z), log_sigmoid(-z)) - _HALF_LOG_2PI - 0.5 * r * r
    grad = np.empty(3)
    grad[0] = -np.sum(w * (y - s))
    grad[1] = np.sum(w * r * ~is1)
    grad[2] = np.sum(w * r * is1)
    return float(np.sum(w * lp)), grad


def gc_unsup(theta, xc, xe):
    m, mu0, mu1 = theta[0], theta[1], theta[2]
    z = xc - m
    s = sigmoid(z)
    r0 = xe - mu0
    r1 = xe - mu1
    a0 = log_sigmoid(-z) - 0.5 * r0 * r0
    a1 = log_sigmoid(z) - 0.5 * r1 * r1
    lse = np.logaddexp(a0, a1)
    p0 = np.exp(a0 - lse)
    p1 = np.exp(a1 - lse)
    grad = np.empty(3)
    grad[0] = np.sum(p0 * s - p1 * (1.0 - s))
    grad[1] = np.sum(p0 * r0)
    grad[2] = np.sum(p1 * r1)
    return float(np.sum(lse) - xc.shape[0] * _HALF_LOG_2PI), grad


def lg_sup(theta, xc, y, xe, w):
    a, b, c, d, lsy, lse = theta
    vy = np.exp(2.0 * lsy)
    ve = np.exp(2.0 * lse)
    ry = y - a - b * xc
    re = xe - c - d * y
    lp = -2.0 * _HALF_LOG_2PI - lsy - lse - 0.5 * ry * ry / vy - 0.5 * re * re / ve
    grad = np.empty(6)
    grad[0] = np.sum(w * ry) / vy
    grad[1] = np.sum(w * ry * xc) / vy
    grad[2] = np.sum(w * re) / ve
    grad[3] = np.sum(w * re * y) / ve
    grad[4] = np.sum(w * (ry * ry / vy - 1.0))
    grad[5] = np.sum(w * (re * re / ve - 1.0))
    return float(np.sum(w * lp)), grad


def lg_unsup(theta, xc, xe):
    a, b, c, d, lsy, lse = theta
    vy = np.exp(2.0 * lsy)
    ve = np.exp(2.0 * lse)
    v = d * d * vy + ve
    pred_y = a + b * xc
    r = xe - c - d * pred_y
    dl_dmu = r / v
    dl_dv = 0.5 * (r * r / v - 1.0) / v
    total = -xc.shape[0] * (_HALF_LOG_2PI + 0.5 * np.log(v)) - 0.5 * np.sum(r * r) / v
    sum_dv = np.sum(dl_dv)
    grad = np.empty(6)
    grad[0] = d * np.sum(dl_dmu)
    grad[1] = d * np.sum(dl_dmu * xc)
    grad[2] = np.sum(dl_dmu)
    grad[3] = np.sum(dl_dmu * pred_y) + sum_dv * 2.0 * d * vy
    grad[4] = sum_dv * 2.0 * d * d * vy
    grad[5] = sum_dv * 2.0 * ve
    return float(total), grad


def _disc_split(theta, dc, de):
    k = dc + 1
    return theta[:k], theta[k:].reshape(de, 2)


def disc_sup(theta, xc, y, xe, w):
    """Binary model; ``xc`` and ``xe`` are 2-D and ``theta`` is
    ``(bias, weights, logit_p row-major)``."""
    beta, lp = _disc_split(theta, xc.shape[1], xe.shape[1])
    eta = beta[0] + xc @ beta[1:]
    yi = (y > 0.5).astype(int)
    lps = lp[:, yi].T  # each row's own-class logits
    ll = np.where(yi == 1, log_sigmoid(eta), log_sigmoid(-eta))
    ll = ll + np.sum(xe * log_sigmoid(lps) + (1.0 - xe) * log_sigmoid(-lps), axis=1)
    resid = w * (y - sigmoid(eta))
    g_lp = np.zeros_like(lp)
    eff_resid = w[:, None] * (xe - sigmoid(lps))
    for k in (0, 1):
        g_lp[:, k] = eff_resid[yi == k].sum(axis=0)
    grad = np.concatenate([[resid.sum()], xc.T @ resid, g_lp.reshape(-1)])
    return float(np.sum(w * ll)), grad


def disc_unsup(theta, xc, xe, w):
    beta, lp = _disc_split(theta, xc.shape[1], xe.shape[1])
    eta = beta[0] + xc @ beta[1:]
    a0 = log_sigmoid(-eta) + xe @ log_sigmoid(lp[:, 0]) + (1.0 - xe) @ log_sigmoid(-lp[:, 0])
    a1 = log_sigmoid(eta) + xe @ log_sigmoid(lp[:, 1]) + (1.0 - xe) @ log_sigmoid(-lp[:, 1])
    lse = np.logaddexp(a0, a1)
    r1 = w * np.exp(a1 - lse)
    r0 = w * np.exp(a0 - lse)
    resid = r1 - w * sigmoid(eta)
    g_lp = np.empty_like(lp)
    g_lp[:, 0] = r0 @ xe - r0.sum() * sigmoid(lp[:, 0])
    g_lp[:, 1] = r1 @ xe - r1.sum() * sigmoid(lp[:, 1])
    grad = np.concatenate([[resid.sum()], xc.T @ resid, g_lp.reshape(-1)])
    return float(w @ lse), grad
