"""Pure numpy implementations of the path-exponent kernels.

Used when the compiled ``_kernel`` extension is unavailable, or when
``PATHPDF_PURE=1`` is set. Results agree with the compiled kernels to
rounding (summation order differs), not bitwise.
"""

import numpy as np

EXPONENT_CAP = 1e300


def _step_power(omega, p):
    # overflow to inf is fine: the exponent is capped afterwards
    with np.errstate(over="ignore"):
        if p == 2.0:
            return omega * omega
        if p == 1.0:
            return np.abs(omega)
        return np.abs(omega) ** p


def _finish(s, dtf, gamma, beta):
    s = s * dtf
    with np.errstate(over="ignore", invalid="ignore"):
        e = beta * s if gamma == 1.0 else beta * s ** gamma
    e[~(e < EXPONENT_CAP)] = EXPONENT_CAP
    return e


def path_exponents(inner, x0, xT, dt, r, p, gamma, beta, dtf):
    inner = np.asarray(inner, dtype=np.float64)
    n, d = inner.shape
    full = np.empty((n, d + 2))
    full[:, 0] = x0
    full[:, 1:-1] = inner
    full[:, -1] = xT
    omega = np.diff(full, axis=1) / dt - r
    return _finish(_step_power(omega, p).sum(axis=1), dtf, gamma, beta)


def bridge_log_weights(yunit, base_logq, scale, xt_rel, dt, r, p, gamma, beta, dtf):
    yunit = np.asarray(yunit, dtype=np.float64)
    n, d = yunit.shape
    slope = xt_rel / (d + 1)
    full = np.empty((n, d + 2))
    full[:, 0] = 0.0
    full[:, 1:-1] = scale * yunit + slope * np.arange(1, d + 1)
    full[:, -1] = xt_rel
    omega = np.diff(full, axis=1) / dt - r
    e = _finish(_step_power(omega, p).sum(axis=1), dtf, gamma, beta)
    return -e - base_logq
