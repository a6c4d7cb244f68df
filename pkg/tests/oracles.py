"""Independent reference computations used by the tests.

Nothing here imports the package; every value is computed a second way.
"""

import math

import numpy as np

# First 32 Sobol points (zero point skipped, Gray-code order) in dims 1-8,
# as integer multiples of 1/64. Frozen from scipy.stats.qmc.Sobol(scramble=False).
SOBOL_REF_64THS = [
    [32, 32, 32, 32, 32, 32, 32, 32], [48, 16, 16, 16, 48, 48, 16, 48],
    [16, 48, 48, 48, 16, 16, 48, 16], [24, 24, 40, 56, 24, 8, 24, 56],
    [56, 56, 8, 24, 56, 40, 56, 24], [40, 8, 56, 40, 40, 56, 8, 8],
    [8, 40, 24, 8, 8, 24, 40, 40], [12, 20, 60, 28, 36, 20, 28, 60],
    [44, 52, 28, 60, 4, 52, 60, 28], [60, 4, 44, 12, 20, 36, 12, 12],
    [28, 36, 12, 44, 52, 4, 44, 44], [20, 12, 20, 36, 60, 28, 4, 4],
    [52, 44, 52, 4, 28, 60, 36, 36], [36, 28, 4, 52, 12, 44, 20, 52],
    [4, 60, 36, 20, 44, 12, 52, 20], [6, 30, 30, 42, 18, 62, 34, 54],
    [38, 62, 62, 10, 50, 30, 2, 22], [54, 14, 14, 58, 34, 14, 50, 6],
    [22, 46, 46, 26, 2, 46, 18, 38], [30, 6, 54, 18, 10, 54, 58, 14],
    [62, 38, 22, 50, 42, 22, 26, 46], [46, 22, 38, 2, 58, 6, 42, 62],
    [14, 54, 6, 34, 26, 38, 10, 30], [10, 10, 34, 54, 54, 42, 62, 10],
    [42, 42, 2, 22, 22, 10, 30, 42], [58, 26, 50, 38, 6, 26, 46, 58],
    [26, 58, 18, 6, 38, 58, 14, 26], [18, 18, 10, 14, 46, 34, 38, 50],
    [50, 50, 42, 46, 14, 2, 6, 18], [34, 2, 26, 30, 30, 18, 54, 2],
    [2, 34, 58, 62, 62, 50, 22, 34], [3, 17, 45, 35, 9, 59, 51, 43],
]


def sobol_reference():
    return np.array(SOBOL_REF_64THS, dtype=float) / 64.0


def exponent_loop(x, dt, r, sigma, p, gamma):
    """Scalar re-implementation of the finite-slice exponent."""
    f = p - (p / 2.0) ** gamma / gamma
    s = math.fsum(abs((b - a) / dt - r) ** p for a, b in zip(x[:-1], x[1:]))
    return (s * dt ** f) ** gamma / (2.0 * sigma ** p)


def gaussian_quadratic(x, dt, r, sigma):
    return dt / (2.0 * sigma * sigma) * math.fsum(((b - a) / dt - r) ** 2 for a, b in zip(x[:-1], x[1:]))


def normal_pdf(x, mean, sd):
    z = (np.asarray(x, dtype=float) - mean) / sd
    return np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))


def box_discrepancy(points, m=32):
    """Largest gap between point fraction and volume over anchored dyadic boxes [0,i/m) x [0,j/m)."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    worst = 0.0
    for i in range(1, m + 1):
        inx = pts[:, 0] < i / m
        for j in range(1, m + 1):
            frac = np.count_nonzero(inx & (pts[:, 1] < j / m)) / n
            worst = max(worst, abs(frac - (i / m) * (j / m)))
    return worst


def trapezoid_1d(y, x):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))
