"""Finite-slice transition densities by randomized quasi-Monte Carlo.

The transition density between log-prices ``x0`` and ``xT`` is the integral of
the path weight ``exp(-E)`` over the ``D - 1`` intermediate log-prices, with
the flat measure in log-price (the gauge-invariant ``dS/S``).

Two integration domains are supported:

``bridge`` (default)
    Paths are drawn around the straight line from ``x0`` to ``xT`` from a
    multivariate Student-t law whose scale matrix is a Brownian-bridge
    covariance; the estimate is the average of ``weight / proposal density``.
    It integrates over all of ``R^(D-1)`` and stays accurate for ``D`` up to
    the Sobol table limit.
``box``
    Uniform points mapped into an axis-aligned :class:`IntegrationBox`; the
    estimate is the truncated integral over the box. Only practical for a few
    intermediate prices, and the one checked by :func:`quadrature_oracle`.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.integrate import trapezoid
from scipy.special import gammaincinv, gammaln, hyp1f1, ndtri

from . import kernels
from .model import DiscretePath, ModelParams, discrete_exponent
from .sampling import (
    GeneratorKind,
    IntegrationBox,
    SampleBatch,
    cmc_points,
    sobol_batch,
)

_U_EPS = 2.0 ** -53


class DimensionMismatch(ValueError):
    pass


class NumericError(ArithmeticError):
    """The estimate is unusable (e.g. every weight underflowed)."""


class OutsideMassWarning(UserWarning):
    """A noticeable part of the probability mass falls outside the grid."""


# ---------------------------------------------------------------------------
# closed forms and domain construction


def gaussian_closed_form(x0, xT, sigma, r, T):
    """Normal density of ``xT`` with mean ``x0 + r T`` and variance ``sigma^2 T``."""
    if not (sigma > 0 and T > 0):
        raise ValueError("sigma and T must be positive")
    var = sigma * sigma * T
    d = np.asarray(xT, dtype=float) - x0 - r * T
    return np.exp(-d * d / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def default_half_width(params: ModelParams) -> float:
    p, s = params.p, params.sigma
    return 8.0 * s * math.sqrt(params.T) * max(1.0, (2.0 * s) ** ((p - 2.0) / p))


def default_box(x0: float, xT: float, params: ModelParams, half_width: float | None = None) -> IntegrationBox:
    """Box centered on the straight line from ``x0`` to ``xT``."""
    if params.D < 2:
        raise DimensionMismatch("D = 1 has no intermediate prices")
    w = default_half_width(params) if half_width is None else half_width
    k = np.arange(1, params.D)
    return IntegrationBox(x0 + (xT - x0) * k / params.D, np.full(params.D - 1, float(w)))


def bridge_matrix(D: int) -> np.ndarray:
    """Brownian-bridge construction matrix for ``D`` unit-variance steps.

    Column ``j`` holds the response of the ``D - 1`` interior points to the
    ``j``-th standard normal, in bisection order (midpoint first), so that
    ``B @ B.T`` is the pinned random-walk covariance ``i (D - j) / D``.
    """
    d = D - 1
    B = np.zeros((d, d))
    if d == 0:
        return B
    # interior index i is stored at row i - 1; endpoints 0 and D are pinned at 0
    order = []
    queue = [(0, D)]
    while queue:
        nxt = []
        for lo, hi in queue:
            if hi - lo < 2:
                continue
            mid = (lo + hi) // 2
            order.append((lo, mid, hi))
            nxt.extend([(lo, mid), (mid, hi)])
        queue = nxt
    rows = {0: np.zeros(d), D: np.zeros(d)}
    for col, (lo, mid, hi) in enumerate(order):
        row = ((hi - mid) * rows[lo] + (mid - lo) * rows[hi]) / (hi - lo)
        row[col] += math.sqrt((mid - lo) * (hi - mid) / (hi - lo))
        rows[mid] = row
        B[mid - 1] = row
    return B


def _abs_moment(mu: float, s: float, p: float) -> float:
    """``E|mu + s W|^p`` for standard normal ``W``."""
    if s <= 0:
        return abs(mu) ** p
    x = mu * mu / (2.0 * s * s)
    if x > 200.0:
        return abs(mu) ** p * (1.0 + 0.5 * p * (p - 1.0) * (s / mu) ** 2)
    return s ** p * 2.0 ** (p / 2) * math.exp(gammaln((p + 1) / 2)) / math.sqrt(math.pi) * hyp1f1(-p / 2, 0.5, -x)


def proposal_scale(xt_rel: float, params: ModelParams) -> float:
    """Per-step scale of the bridge proposal for a final log-return ``xt_rel``.

    Maximizes ``(D-1) log h - beta * (E S_h)^gamma`` where ``S_h`` is the
    discrete action of the straight line perturbed by a Gaussian bridge with
    step scale ``h``; for the Gaussian model this is exactly ``sigma sqrt(dt)``.
    """
    D, dt = params.D, params.dt
    d = D - 1
    c = xt_rel / params.T - params.r
    dtf = dt ** params.exponent
    shrink = math.sqrt(d / D) / dt

    def neg(lh):
        h = math.exp(lh)
        es = D * dtf * _abs_moment(c, h * shrink, params.p)
        return -(d * lh - params.beta * es ** params.gamma)

    center = math.log(params.sigma * math.sqrt(dt))
    res = minimize_scalar(neg, bounds=(center - 60.0, center + 20.0), method="bounded",
                          options={"xatol": 1e-9, "maxiter": 500})
    return math.exp(res.x)


@dataclass(frozen=True)
class BridgeProposal:
    """Student-t bridge proposal with per-step ``scale`` and ``dof`` degrees of freedom."""

    scale: float
    dof: float = 6.0

    def __post_init__(self):
        if not (self.scale > 0 and self.dof > 0):
            raise ValueError("scale and dof must be positive")


# ---------------------------------------------------------------------------
# sampling configuration


@dataclass(frozen=True)
class SamplingConfig:
    n: int = 2 ** 16
    replicas: int = 10
    seed: int = 0
    sampler: str = "sobol"
    domain: str = "bridge"
    half_width: float | None = None
    dof: float = 6.0

    def __post_init__(self):
        if self.sampler not in ("sobol", "cmc"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.domain not in ("bridge", "box"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.sampler == "sobol" and self.replicas < 2:
            raise ValueError("shifted Sobol sampling needs at least two replicas")
        if self.half_width is not None and not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if not self.dof > 0:
            raise ValueError("dof must be positive")

    def batch(self, dim: int) -> SampleBatch:
        if self.sampler == "cmc":
            return cmc_points(dim, self.n * self.replicas, self.seed)
        return sobol_batch(dim, self.n, self.replicas, self.seed)

    def domain_dim(self, params: ModelParams) -> int:
        return params.D if self.domain == "bridge" else params.D - 1


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class KernelEstimate:
    """Estimate ``exp(log_scale) * (mean +- stderr)``; kept scaled to survive deep tails."""

    log_scale: float
    mean: float
    stderr: float

    @property
    def value(self) -> float:
        return math.exp(self.log_scale) * self.mean if self.mean > 0 else 0.0

    @property
    def error(self) -> float:
        return math.exp(self.log_scale) * self.stderr if self.stderr > 0 else 0.0


def _moments(lw: np.ndarray):
    m = float(np.max(lw))
    if not math.isfinite(m):
        raise NumericError("non-finite log-weight maximum")
    w = np.exp(lw - m)
    return m, float(np.mean(w)), float(np.mean(w * w))


def _combine(kind: GeneratorKind, stats, n_points: int) -> KernelEstimate:
    """Turn per-replica ``(max, mean, mean-square)`` triples into one estimate."""
    if kind is GeneratorKind.CRUDE_MC:
        m, s1, s2 = stats[0]
        var = max(s2 - s1 * s1, 0.0) * n_points / max(n_points - 1, 1)
        return KernelEstimate(m, s1, math.sqrt(var / n_points))
    logs = np.array([m + math.log(s1) for m, s1, _ in stats])
    top = float(np.max(logs))
    v = np.exp(logs - top)
    R = v.size
    return KernelEstimate(top, float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(R)))


class _BridgeReplica:
    """Unit-scale bridge paths and proposal log-densities for one replica."""

    def __init__(self, u: np.ndarray, D: int, dof: float, B: np.ndarray):
        d = D - 1
        u = np.clip(u, _U_EPS, 1.0 - _U_EPS)
        w = 2.0 * gammaincinv(dof / 2.0, u[:, 0]) / dof
        z = ndtri(u[:, 1:])
        rs = 1.0 / np.sqrt(w)
        self.yunit = np.ascontiguousarray((z @ B.T) * rs[:, None])
        zz = np.einsum("ij,ij->i", z, z) * (rs * rs)
        logdet = -0.5 * math.log(D)
        const = gammaln((dof + d) / 2.0) - gammaln(dof / 2.0) - 0.5 * d * math.log(dof * math.pi) - logdet
        self.base_logq = np.ascontiguousarray(const - 0.5 * (dof + d) * np.log1p(zz / dof))
        self.d = d

    def log_weights(self, xt_rel: float, scale: float, params: ModelParams) -> np.ndarray:
        lw = kernels.bridge_log_weights(
            self.yunit, self.base_logq, scale, xt_rel, params.dt, params.r, params.p,
            params.gamma, params.beta, params.dt ** params.exponent,
        )
        return lw + self.d * math.log(scale)


def _box_log_weights(u: np.ndarray, xt_rel: float, box_rel: IntegrationBox, params: ModelParams) -> np.ndarray:
    inner = np.ascontiguousarray(box_rel.centers + (2.0 * u - 1.0) * box_rel.half_width)
    e = kernels.path_exponents(inner, 0.0, xt_rel, params.dt, params.r, params.p, params.gamma,
                               params.beta, params.dt ** params.exponent)
    return math.log(box_rel.jacobian) - e


def _single_path(xt_rel: float, params: ModelParams) -> KernelEstimate:
    e = discrete_exponent(DiscretePath(np.array([0.0, xt_rel]), params.dt), params)
    return KernelEstimate(-e, 1.0, 0.0)


def _check_batch(batch: SampleBatch, dim: int):
    if batch.dim != dim:
        raise DimensionMismatch(f"sample dimension {batch.dim} does not match integral dimension {dim}")


def estimate_kernel(xt_rel: float, params: ModelParams, batch: SampleBatch, domain) -> KernelEstimate:
    """Scaled estimate of the transition kernel at log-return ``xt_rel``.

    ``domain`` is an :class:`IntegrationBox` given relative to ``x0`` or a
    :class:`BridgeProposal`.
    """
    if params.D == 1:
        return _single_path(xt_rel, params)
    stats = []
    if isinstance(domain, IntegrationBox):
        if domain.dim != params.D - 1:
            raise DimensionMismatch(f"box has dimension {domain.dim}, expected {params.D - 1}")
        _check_batch(batch, params.D - 1)
        for r in range(batch.replicas):
            stats.append(_moments(_box_log_weights(batch.replica(r), xt_rel, domain, params)))
    elif isinstance(domain, BridgeProposal):
        _check_batch(batch, params.D)
        B = bridge_matrix(params.D)
        for r in range(batch.replicas):
            rep = _BridgeReplica(batch.replica(r), params.D, domain.dof, B)
            stats.append(_moments(rep.log_weights(xt_rel, domain.scale, params)))
    else:
        raise TypeError(f"unsupported integration domain {type(domain).__name__}")
    return _combine(batch.kind, stats, batch.points_per_replica)


def transition_kernel(x0: float, xT: float, params: ModelParams, batch: SampleBatch | None = None,
                      box: IntegrationBox | BridgeProposal | None = None):
    """Unnormalized transition density ``(value, stderr)`` from ``x0`` to ``xT``.

    With ``D = 1`` the batch and domain are ignored and the result is the
    weight of the two-point path with zero error. ``box`` may be an absolute
    :class:`IntegrationBox` or a :class:`BridgeProposal`; by default a bridge
    proposal tuned to ``(x0, xT)`` is used.
    """
    xt_rel = xT - x0
    if params.D == 1:
        est = _single_path(xt_rel, params)
        return est.value, 0.0
    if box is None:
        box = BridgeProposal(proposal_scale(xt_rel, params))
    if isinstance(box, IntegrationBox):
        domain = IntegrationBox(box.centers - x0, box.half_width)
    else:
        domain = box
    if batch is None:
        batch = SamplingConfig().batch(params.D if isinstance(domain, BridgeProposal) else params.D - 1)
    est = estimate_kernel(xt_rel, params, batch, domain)
    return est.value, est.error


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class PdfCurve:
    """Normalized density of the final log-return on a grid."""

    x0: float
    grid: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    params: ModelParams
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or not np.all(np.diff(g) > 0):
            raise ValueError("grid must be strictly increasing with at least two points")

    def __call__(self, x):
        return np.interp(x, self.grid, self.density)


def default_span(params: ModelParams, width: float = 10.0) -> float:
    """Grid span of ``width`` times the bulk scale of the model at the center."""
    if params.D == 1:
        return width * params.sigma * math.sqrt(params.T)
    return width * proposal_scale(params.r * params.T, params) * math.sqrt(params.D)


def default_grid(params: ModelParams, span: float | None = None, points: int = 40) -> np.ndarray:
    """Uniform grid of final log-returns centered on the drift ``r T``."""
    if points < 2:
        raise ValueError("a grid needs at least two points")
    span = default_span(params) if span is None else span
    if not span > 0:
        raise ValueError("span must be positive")
    return params.r * params.T + np.linspace(-span / 2, span / 2, points)


def outside_mass(grid: np.ndarray, density: np.ndarray) -> float:
    """Fraction of mass beyond the grid ends, from exponential extrapolation of the end decay."""
    grid = np.asarray(grid, dtype=float)
    density = np.asarray(density, dtype=float)
    total = float(trapezoid(density, grid))
    if not total > 0:
        return math.inf
    tail = 0.0
    for end, inner, h in ((density[0], density[1], grid[1] - grid[0]),
                          (density[-1], density[-2], grid[-1] - grid[-2])):
        if end <= 0:
            continue
        if inner <= end:
            return math.inf
        tail += end * h / math.log(inner / end)
    return tail / total


def replica_stats(grid, params: ModelParams, config: SamplingConfig, workers: int = 1):
    """Per-grid-point, per-replica ``(max, mean, mean-square)`` of the scaled weights.

    Returns ``(batch, stats)`` with ``stats[i][r]`` for grid point ``i`` and
    replica ``r``. Work items are independent; results do not depend on
    ``workers``.
    """
    grid = np.asarray(grid, dtype=float)
    batch = config.batch(config.domain_dim(params))
    G = grid.size
    stats = [[None] * batch.replicas for _ in range(G)]
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def run(fn, items):
        if pool is None:
            return [fn(i) for i in items]
        return list(pool.map(fn, items))

    try:
        if config.domain == "bridge":
            scales = run(lambda i: proposal_scale(float(grid[i]), params), range(G))
            B = bridge_matrix(params.D)
            for r in range(batch.replicas):
                rep = _BridgeReplica(batch.replica(r), params.D, config.dof, B)
                res = run(lambda i: _moments(rep.log_weights(float(grid[i]), scales[i], params)), range(G))
                for i in range(G):
                    stats[i][r] = res[i]
        else:
            boxes = [default_box(0.0, float(x), params, config.half_width) for x in grid]
            for r in range(batch.replicas):
                u = batch.replica(r)
                res = run(lambda i: _moments(_box_log_weights(u, float(grid[i]), boxes[i], params)), range(G))
                for i in range(G):
                    stats[i][r] = res[i]
    finally:
        if pool is not None:
            pool.shutdown()
    return batch, stats


def kernel_estimates(grid, params: ModelParams, config: SamplingConfig, workers: int = 1) -> list[KernelEstimate]:
    """Scaled kernel estimates at every final log-return in ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if params.D == 1:
        return [_single_path(float(x), params) for x in grid]
    batch, stats = replica_stats(grid, params, config, workers)
    return [_combine(batch.kind, s, batch.points_per_replica) for s in stats]


def normalize(grid, estimates: list[KernelEstimate]):
    """Scale estimates to a density integrating to one over ``grid`` (trapezoid)."""
    grid = np.asarray(grid, dtype=float)
    logs = np.array([e.log_scale for e in estimates])
    top = float(np.max(logs))
    factor = np.exp(logs - top)
    dens = factor * np.array([e.mean for e in estimates])
    err = factor * np.array([e.stderr for e in estimates])
    z = float(trapezoid(dens, grid))
    if not (z > 0 and math.isfinite(z)):
        raise NumericError("density vanishes on the whole grid")
    return dens / z, err / z


def pdf_curve(x0: float, grid, params: ModelParams, config: SamplingConfig | None = None,
              workers: int = 1) -> PdfCurve:
    """Normalized transition density over a grid of final log-returns ``xT - x0``."""
    config = SamplingConfig() if config is None else config
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing with at least two points")
    estimates = kernel_estimates(grid, params, config, workers)
    density, stderr = normalize(grid, estimates)
    lost = outside_mass(grid, density)
    if lost > 0.01:
        warnings.warn(f"about {lost:.3g} of the probability mass lies outside the grid",
                      OutsideMassWarning, stacklevel=2)
    meta = {
        "n": config.n,
        "replicas": config.replicas,
        "seed": config.seed,
        "sampler": config.sampler,
        "domain": config.domain,
        "dof": config.dof,
        "half_width": config.half_width if config.half_width is not None else default_half_width(params),
        "outside_mass": lost,
        "backend": kernels.BACKEND,
    }
    return PdfCurve(x0, grid, density, stderr, params, meta)


# ---------------------------------------------------------------------------
# dense quadrature oracle


def quadrature_oracle(x0: float, xT: float, params: ModelParams, mesh: int = 256,
                      box: IntegrationBox | None = None) -> float:
    """Tensor-product trapezoid value of the box-truncated integral (``D <= 4``)."""
    if params.D > 4:
        raise DimensionMismatch("the dense oracle supports at most three intermediate prices")
    xt_rel = xT - x0
    if params.D == 1:
        return _single_path(xt_rel, params).value
    if mesh < 16:
        raise ValueError("mesh must be at least 16")
    box = default_box(x0, xT, params) if box is None else box
    if box.dim != params.D - 1:
        raise DimensionMismatch(f"box has dimension {box.dim}, expected {params.D - 1}")
    d = box.dim
    axes = [np.linspace(c - w, c + w, mesh) - x0 for c, w in zip(box.centers, box.half_width)]
    tw = []
    for ax in axes:
        w = np.full(mesh, ax[1] - ax[0])
        w[[0, -1]] *= 0.5
        tw.append(w)
    dtf = params.dt ** params.exponent
    total = 0.0
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, d - 1) if d > 1 else np.zeros((1, 0))
    rest_w = np.ones(1)
    for w in tw[1:]:
        rest_w = np.multiply.outer(rest_w, w).ravel()
    for a, wa in zip(axes[0], tw[0]):
        inner = np.ascontiguousarray(np.column_stack([np.full(rest.shape[0], a), rest]))
        e = kernels.path_exponents(inner, 0.0, xt_rel, params.dt, params.r, params.p, params.gamma,
                                   params.beta, dtf)
        total += wa * float(np.dot(rest_w, np.exp(-e)))
    return total


def quadrature_estimate(x0: float, xT: float, params: ModelParams, mesh: int = 256,
                        box: IntegrationBox | None = None):
    """Oracle value with an error estimate from halving the mesh."""
    fine = quadrature_oracle(x0, xT, params, mesh, box)
    coarse = quadrature_oracle(x0, xT, params, mesh // 2, box)
    return fine, abs(fine - coarse)
