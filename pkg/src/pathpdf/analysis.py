"""Convergence studies, semigroup residuals and model-versus-data fits."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .integrator import (
    NumericError,
    OutsideMassWarning,
    PdfCurve,
    SamplingConfig,
    _single_path,
    default_grid,
    default_span,
    outside_mass,
    pdf_curve,
    replica_stats,
)
from .market import EmpiricalHistogram
from .model import ModelParams
from .sampling import GeneratorKind


class GridMismatch(ValueError):
    pass


class CoverageError(ValueError):
    """The model grid does not cover the histogram range."""


# ---------------------------------------------------------------------------
# extreme-price metric


@dataclass(frozen=True)
class ExtremeMetric:
    absolute: float
    relative: float


def _same_grid(a: PdfCurve, b: PdfCurve):
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise GridMismatch("curves are defined on different grids")


def extreme_price_metric(a: PdfCurve, b: PdfCurve) -> ExtremeMetric:
    """Mean absolute difference of two curves at the lowest and highest grid price.

    ``relative`` divides by the mean of the four endpoint densities.
    """
    _same_grid(a, b)
    da = a.density[[0, -1]]
    db = b.density[[0, -1]]
    absolute = float(np.mean(np.abs(da - db)))
    scale = float(np.mean(np.concatenate([da, db])))
    relative = absolute / scale if scale > 0 else (0.0 if absolute == 0 else math.inf)
    return ExtremeMetric(absolute, relative)


def sup_metric(a: PdfCurve, b: PdfCurve) -> float:
    """Largest pointwise difference relative to the larger peak density."""
    _same_grid(a, b)
    peak = max(float(np.max(a.density)), float(np.max(b.density)))
    return float(np.max(np.abs(a.density - b.density))) / peak


# ---------------------------------------------------------------------------
# dimension convergence


@dataclass(frozen=True)
class ConvergenceReport:
    params: ModelParams
    dims: tuple
    curves: tuple
    pairwise_metric: np.ndarray
    pairwise_absolute: np.ndarray
    pairwise_sup: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return self.curves[0].grid

    def metric(self, d1: int, d2: int) -> float:
        return float(self.pairwise_metric[self.dims.index(d1), self.dims.index(d2)])

    def max_qmc_error(self) -> float:
        """Largest stderr relative to density over all curves and grid points."""
        worst = 0.0
        for c in self.curves:
            pos = c.density > 0
            worst = max(worst, float(np.max(c.stderr[pos] / c.density[pos])))
        return worst


def convergence_study(params: ModelParams, dims, config: SamplingConfig | None = None,
                      grid=None, span: float | None = None, workers: int = 1) -> ConvergenceReport:
    """One curve per slice count on a shared grid, with all pairwise metrics.

    The grid defaults to :func:`default_grid` of the largest dimension.
    """
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise ValueError("dims must not be empty")
    if min(dims) < 2:
        raise ValueError("every dimension must be at least 2")
    config = SamplingConfig() if config is None else config
    if grid is None:
        grid = default_grid(params.replace(D=max(dims)), span)
    grid = np.asarray(grid, dtype=float)
    curves = []
    for d in dims:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutsideMassWarning)
            curves.append(pdf_curve(0.0, grid, params.replace(D=d), config, workers))
    k = len(dims)
    rel = np.zeros((k, k))
    ab = np.zeros((k, k))
    sup = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            m = extreme_price_metric(curves[i], curves[j])
            rel[i, j] = rel[j, i] = m.relative
            ab[i, j] = ab[j, i] = m.absolute
            sup[i, j] = sup[j, i] = sup_metric(curves[i], curves[j])
    return ConvergenceReport(params, dims, tuple(curves), rel, ab, sup)


# ---------------------------------------------------------------------------
# Chapman-Kolmogorov composition


@dataclass(frozen=True)
class CkReport:
    direct: PdfCurve
    composed: PdfCurve
    residual: np.ndarray
    combined_stderr: np.ndarray
    split: float
    intermediate: np.ndarray = field(repr=False)
    truncation_mass: float = 0.0

    @property
    def peak(self) -> float:
        return float(np.max(self.direct.density))

    @property
    def max_relative(self) -> float:
        return float(np.max(self.residual)) / self.peak

    @property
    def mean_relative(self) -> float:
        return float(np.mean(self.residual)) / self.peak

    @property
    def max_z(self) -> float:
        """Largest residual in units of the combined standard error."""
        se = self.combined_stderr
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, self.residual / se, np.where(self.residual > 0, np.inf, 0.0))
        return float(np.max(z))

    def summary(self) -> dict:
        return {
            "split": self.split,
            "max_residual_rel": self.max_relative,
            "mean_residual_rel": self.mean_relative,
            "max_residual_z": self.max_z,
            "truncation_mass": self.truncation_mass,
        }


def _component_logs(points, params: ModelParams, config: SamplingConfig, workers: int):
    """Log kernel values ``(P, R)`` per replica, plus relative stderr for crude MC."""
    points = np.asarray(points, dtype=float)
    R = config.replicas if config.sampler == "sobol" else 1
    if params.D == 1:
        logs = np.array([_single_path(float(x), params).log_scale for x in points])
        return np.repeat(logs[:, None], R, axis=1), np.zeros(points.size)
    batch, stats = replica_stats(points, params, config, workers)
    with np.errstate(divide="ignore"):
        logs = np.array([[m + math.log(s1) if s1 > 0 else -math.inf for m, s1, _ in row] for row in stats])
    rel = np.zeros(points.size)
    if batch.kind is GeneratorKind.CRUDE_MC:
        n = batch.points_per_replica
        for i, ((_, s1, s2),) in enumerate(stats):
            if s1 > 0:
                rel[i] = math.sqrt(max(s2 - s1 * s1, 0.0) / max(n - 1, 1)) / s1
    return logs, rel


def _intermediate_grid(grid, params, pK, pR, mesh):
    """Intermediate log-prices on a lattice commensurate with the output grid."""
    hx = float(grid[1] - grid[0])
    rK, rR = params.r * pK.T, params.r * pR.T
    sK, sR = default_span(pK) / 2, default_span(pR) / 2
    lo = min(rK - sK, grid[0] - rR - sR)
    hi = max(rK + sK, grid[-1] - rR + sR)
    need = (hi - lo) / (mesh - 1)
    if hx >= need:
        hy = hx / math.floor(hx / need)
    else:
        hy = hx * math.ceil(need / hx)
    mid = 0.5 * (lo + hi)
    return mid + hy * (np.arange(mesh) - (mesh - 1) / 2), min(hx, hy)


def ck_residual(params: ModelParams, K_fraction: float, config: SamplingConfig | None = None,
                mesh: int = 81, grid=None, workers: int = 1) -> CkReport:
    """Compare the direct curve over ``[0, T]`` with the composition through time ``K``.

    The split is snapped to the nearest slice boundary so that both legs keep
    the time step ``T / D``; the realized fraction is reported as ``split``.
    The composition is a trapezoid sum over ``mesh`` intermediate log-prices.
    The direct curve and the two legs use independent seeds.
    """
    if not 0.0 < K_fraction < 1.0:
        raise ValueError("K_fraction must lie strictly between 0 and 1")
    if params.D < 2:
        raise ValueError("a split needs at least two slices")
    if mesh < 3:
        raise ValueError("mesh must be at least 3")
    config = SamplingConfig() if config is None else config
    grid = default_grid(params) if grid is None else np.asarray(grid, dtype=float)
    DK = min(max(int(round(K_fraction * params.D)), 1), params.D - 1)
    split = DK / params.D
    pK = params.replace(T=params.T * split, D=DK)
    pR = params.replace(T=params.T - pK.T, D=params.D - DK)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideMassWarning)
        direct = pdf_curve(0.0, grid, params, config, workers)

    ygrid, step = _intermediate_grid(grid, params, pK, pR, mesh)
    diffs = grid[:, None] - ygrid[None, :]
    origin = float(grid[0] - ygrid[-1])
    idx = np.rint((diffs - origin) / step).astype(np.int64)
    lattice = origin + step * np.arange(int(idx.max()) + 1)
    used = np.unique(idx)
    logK, relK = _component_logs(ygrid, pK, dataclasses.replace(config, seed=config.seed + 1), workers)
    logR_used, relR_used = _component_logs(lattice[used], pR, dataclasses.replace(config, seed=config.seed + 2), workers)
    pos = np.searchsorted(used, idx)

    w = np.full(ygrid.size, ygrid[1] - ygrid[0])
    w[[0, -1]] *= 0.5
    VK = np.exp(logK - np.max(logK))
    VR = np.exp(logR_used - np.max(logR_used))[pos]  # (G, M, R)
    terms = w[None, :, None] * VR * VK[None, :, :]
    per_rep = terms.sum(axis=1)  # (G, R)
    mean = per_rep.mean(axis=1)
    if config.sampler == "sobol":
        err = per_rep.std(axis=1, ddof=1) / math.sqrt(per_rep.shape[1])
    else:
        t = terms[:, :, 0]
        err = np.sqrt(np.sum((t * relK[None, :]) ** 2 + (t * relR_used[pos]) ** 2, axis=1))
    z = float(trapezoid(mean, grid))
    if not (z > 0 and math.isfinite(z)):
        raise NumericError("composed density vanishes on the whole grid")

    avg = terms.mean(axis=2)
    strong = mean >= 1e-3 * mean.max()
    lost = max(outside_mass(ygrid, avg[i]) for i in np.flatnonzero(strong))
    if lost > 0.01:
        warnings.warn(f"about {lost:.3g} of the composition mass lies outside the intermediate grid",
                      OutsideMassWarning, stacklevel=2)

    meta = dict(direct.meta, split=split, mesh=mesh, truncation_mass=lost)
    composed = PdfCurve(0.0, grid, mean / z, err / z, params, meta)
    residual = np.abs(direct.density - composed.density)
    combined = np.hypot(direct.stderr, composed.stderr)
    return CkReport(direct, composed, residual, combined, split, ygrid, lost)


# ---------------------------------------------------------------------------
# model versus data


@dataclass(frozen=True)
class FitMetrics:
    log_rmse: float
    within_fraction: float
    chi2: float
    bins: int
    rmse_bins: int
    central_within: float
    outer_within: float

    @property
    def chi2_per_bin(self) -> float:
        return self.chi2 / self.bins


def compare_model_to_data(hist: EmpiricalHistogram, curve, k: float = 1.0) -> FitMetrics:
    """Fit statistics of a model curve against a histogram.

    ``curve`` is anything with ``grid`` and ``density`` arrays. The model is
    linearly interpolated at the bin centers. A bin counts as within its error
    bar when ``|model - density| <= k * errbar``; empty bins stay in that
    fraction but are left out of the log-space RMSE and of chi-square.
    """
    grid = np.asarray(curve.grid, dtype=float)
    dens = np.asarray(curve.density, dtype=float)
    centers = hist.bin_centers
    tol = 1e-9 * hist.width
    if grid[0] > centers[0] + tol or grid[-1] < centers[-1] - tol:
        raise CoverageError(
            f"model grid [{grid[0]:.6g}, {grid[-1]:.6g}] does not cover bin centers "
            f"[{centers[0]:.6g}, {centers[-1]:.6g}]")
    model = np.interp(np.clip(centers, grid[0], grid[-1]), grid, dens)
    data, err = hist.density, hist.errbar
    filled = hist.counts > 0
    ok = filled & (model > 0)
    log_rmse = float(np.sqrt(np.mean((np.log(model[ok]) - np.log(data[ok])) ** 2))) if ok.any() else math.inf
    within = np.abs(model - data) <= k * err
    chi2 = float(np.sum(((model[filled] - data[filled]) / err[filled]) ** 2))
    N = centers.size
    third = np.zeros(N, dtype=bool)
    third[N // 3: N - N // 3] = True
    return FitMetrics(log_rmse, float(np.mean(within)), chi2, N, int(ok.sum()),
                      float(np.mean(within[third])), float(np.mean(within[~third])))


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    p: float
    sigma: float
    metrics: FitMetrics


def sweep_grid(hist: EmpiricalHistogram, points: int = 40) -> np.ndarray:
    """Model grid spanning the histogram from first to last bin edge."""
    edges = hist.edges
    return np.linspace(edges[0], edges[-1], points)


def parameter_sweep(hist: EmpiricalHistogram, gammas, ps, sigmas, base: ModelParams | None = None,
                    config: SamplingConfig | None = None, points: int = 40,
                    workers: int = 1) -> list[SweepRow]:
    """Rank every ``(gamma, p, sigma)`` combination by log-space RMSE (ties keep input order).

    ``base`` supplies ``r``, ``T`` and ``D``.
    """
    triples = list(product(gammas, ps, sigmas))
    if not triples:
        raise ValueError("empty parameter grid")
    base = ModelParams(1.0, 2.0, 1.0) if base is None else base
    config = SamplingConfig() if config is None else config
    grid = sweep_grid(hist, points)
    rows = []
    for g, p, s in triples:
        params = base.replace(gamma=float(g), p=float(p), sigma=float(s))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutsideMassWarning)
            curve = pdf_curve(0.0, grid, params, config, workers)
        rows.append(SweepRow(float(g), float(p), float(s), compare_model_to_data(hist, curve)))
    order = sorted(range(len(rows)), key=lambda i: (rows[i].metrics.log_rmse, i))
    return [rows[i] for i in order]


# ---------------------------------------------------------------------------
# tail weight


@dataclass(frozen=True)
class TailComparison:
    reference: np.ndarray
    tail_index: np.ndarray
    ratio: np.ndarray

    @property
    def heavier(self) -> bool:
        return bool(np.all(self.ratio > 1.0))


def gaussian_reference(curve) -> np.ndarray:
    """Unit-mass normal density on the curve grid matching the curve at its peak.

    The mean is the curve's mean; the width is chosen so the normal density
    equals the curve at the grid point where the curve is largest.
    """
    grid = np.asarray(curve.grid, dtype=float)
    dens = np.asarray(curve.density, dtype=float)
    mass = trapezoid(dens, grid)
    mu = trapezoid(grid * dens, grid) / mass
    k = int(np.argmax(dens))
    peak = float(dens[k]) / mass
    d = abs(grid[k] - mu)
    s = 1.0 / (peak * math.sqrt(2.0 * math.pi))
    if d > 0:
        # larger root of  N(d; 0, s) = peak;  N(d; 0, s) is maximal at s = d
        g = lambda ls: -ls - 0.5 * d * d * math.exp(-2 * ls) - 0.5 * math.log(2 * math.pi) - math.log(peak)
        lo = math.log(d)
        if g(lo) > 0:
            s = math.exp(brentq(g, lo, lo + 50.0))
        else:
            s = d
    return mass * np.exp(-0.5 * ((grid - mu) / s) ** 2) / (s * math.sqrt(2.0 * math.pi))


def tail_excess(curve, fraction: float = 0.1) -> TailComparison:
    """Model-to-reference density ratio at the outermost ``fraction`` of grid points."""
    if not 0.0 < fraction <= 0.5:
        raise ValueError("fraction must lie in (0, 0.5]")
    dens = np.asarray(curve.density, dtype=float)
    G = dens.size
    k = max(1, int(round(fraction * G / 2)))
    idx = np.r_[np.arange(k), np.arange(G - k, G)]
    ref = gaussian_reference(curve)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = dens[idx] / ref[idx]
    return TailComparison(ref, idx, ratio)
