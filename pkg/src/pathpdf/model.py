"""Parameters, discrete paths and the action family of the price model.

All quantities are expressed in log-price coordinates ``x = log S``. Every
function here depends on the path only through its increments, so adding a
constant to all log-prices (rescaling the currency unit) changes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Exponent cap applied before exponentiation; weights then underflow to 0.
EXPONENT_CAP = 1e300


class ParameterError(ValueError):
    """Raised when a parameter set violates the model invariants."""


@dataclass(frozen=True)
class ModelParams:
    """One path-integral problem.

    Attributes:
        gamma: outer exponent applied to the action, in (0, 1].
        p: action exponent, in [1, 2].
        sigma: scale parameter (not the volatility).
        r: risk-free log-drift per unit time.
        T: time horizon, in the sampling unit of the data.
        D: number of time slices; the integral has ``D - 1`` intermediate prices.
    """

    gamma: float
    p: float
    sigma: float
    r: float = 0.0
    T: float = 1.0
    D: int = 10

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ParameterError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not (1.0 <= self.p <= 2.0):
            raise ParameterError(f"p must lie in [1, 2], got {self.p}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ParameterError(f"T must be positive, got {self.T}")
        if int(self.D) != self.D or self.D < 1:
            raise ParameterError(f"D must be a positive integer, got {self.D}")
        object.__setattr__(self, "D", int(self.D))
        if not math.isfinite(self.r):
            raise ParameterError("r must be finite")
        try:
            beta = self.beta
        except (ZeroDivisionError, OverflowError):
            beta = math.inf
        if not (beta > 0 and math.isfinite(beta)):
            raise ParameterError(f"derived beta_p = {beta} is not finite and positive")

    @property
    def beta(self) -> float:
        """Action scale ``1 / (2 sigma^p)``; always derived from sigma."""
        return 1.0 / (2.0 * self.sigma ** self.p)

    @property
    def dt(self) -> float:
        return self.T / self.D

    @property
    def exponent(self) -> float:
        """Time-step power ``f(p, gamma)`` used by the discretized action."""
        return scaling_exponent(self.p, self.gamma)

    def replace(self, **changes) -> "ModelParams":
        values = dict(gamma=self.gamma, p=self.p, sigma=self.sigma, r=self.r, T=self.T, D=self.D)
        values.update(changes)
        return ModelParams(**values)

    @classmethod
    def from_beta(cls, gamma, p, beta, **kw) -> "ModelParams":
        """Build parameters from ``beta_p`` instead of sigma."""
        if beta <= 0:
            raise ParameterError("beta must be positive")
        sigma = (1.0 / (2.0 * beta)) ** (1.0 / p)
        return cls(gamma=gamma, p=p, sigma=sigma, **kw)


@dataclass(frozen=True)
class DiscretePath:
    """Log-prices ``x_0 .. x_D`` sampled every ``dt``."""

    log_prices: np.ndarray = field(repr=False)
    dt: float

    def __post_init__(self):
        x = np.array(self.log_prices, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a path needs at least two log-prices")
        if not np.all(np.isfinite(x)):
            raise ValueError("log-prices must be finite")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "log_prices", x)

    @property
    def D(self) -> int:
        return self.log_prices.size - 1

    @classmethod
    def for_params(cls, log_prices, params: ModelParams) -> "DiscretePath":
        path = cls(log_prices, params.dt)
        path.check(params)
        return path

    @classmethod
    def risk_free(cls, x0: float, params: ModelParams) -> "DiscretePath":
        """The minimal-action path ``x_i = x_0 + r i dt``."""
        i = np.arange(params.D + 1)
        return cls(x0 + params.r * i * params.dt, params.dt)

    def check(self, params: ModelParams) -> None:
        if self.D != params.D:
            raise ValueError(f"path has {self.D} steps, parameters expect D={params.D}")
        if not math.isclose(self.dt, params.dt, rel_tol=1e-12):
            raise ValueError(f"path dt={self.dt} differs from T/D={params.dt}")

    def curvature(self, r: float) -> np.ndarray:
        """Excess log-drift ``(x_{i+1} - x_i)/dt - r`` of every step."""
        return np.diff(self.log_prices) / self.dt - r


def scaling_exponent(p: float, gamma: float) -> float:
    """Return ``f(p, gamma) = p - (p/2)**gamma / gamma``.

    For ``gamma == 1`` this is exactly ``p / 2``, the power that keeps the
    discretized pure ``|.|^p`` action stable as the slice count grows.
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    # gamma == 1: p - p/2 is exact in binary floating point
    return p - (p / 2) ** gamma / gamma


def discrete_exponent(path: DiscretePath, params: ModelParams) -> float:
    """Exponent ``E`` of the path weight for the finite-slice action.

    ``E = beta_p * (sum_i |Omega_i|^p * dt^f) ** gamma`` with
    ``Omega_i = (x_{i+1} - x_i)/dt - r``. Saturates at :data:`EXPONENT_CAP`.
    """
    path.check(params)
    omega = path.curvature(params.r)
    total = float(np.sum(np.abs(omega) ** params.p)) * params.dt ** params.exponent
    with np.errstate(over="ignore"):
        value = params.beta * total ** params.gamma
    if not value < EXPONENT_CAP:
        return EXPONENT_CAP
    return value


def path_weight(path: DiscretePath, params: ModelParams) -> float:
    """Unnormalized probability ``exp(-E)`` of one path; 1 on the risk-free path."""
    return math.exp(-discrete_exponent(path, params))


def continuum_action(path: DiscretePath, p: float, r: float, beta: float) -> float:
    """Riemann-sum estimate of ``beta * integral |d/dt log S - r|^p dt``.

    ``p = 1`` gives the maximal-earnings action and ``p = 2`` the arbitrage
    action.
    """
    if not (1.0 <= p <= 2.0):
        raise ParameterError(f"p must lie in [1, 2], got {p}")
    omega = path.curvature(r)
    return beta * float(np.sum(np.abs(omega) ** p)) * path.dt
