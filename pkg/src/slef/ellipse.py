"""Lissajous point cloud and ellipse fits.

The cloud pairs the centered sum and difference of two normalized
patterns. For ideal patterns ``cos(phi)`` and ``cos(phi + delta)`` it lies on
the axis-aligned ellipse ``theta1 x^2 + theta2 y^2 = 1`` with
``theta1 = 1 / (2 cos(delta/2))^2`` and ``theta2 = 1 / (2 sin(delta/2))^2``.

Three estimators are provided: two-coefficient least squares
(:func:`fit_ls2`), the classic five-coefficient conic (:func:`fit_ls5`) and
a robust two-coefficient fit with Leclerc weights solved by iteratively
reweighted least squares (:func:`fit_robust`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import DegenerateCloudError, DomainError, InsufficientDataError, RobustCollapseError, SizeError
from .field import as_field

MIN_POINTS = 8
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class LissajousCloud:
    """Point set ``(x, y)``; :func:`build_cloud` centers it."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64).ravel()
        y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise SizeError(f"x and y differ in length: {x.size} vs {y.size}")
        if x.size < MIN_POINTS:
            raise InsufficientDataError(f"cloud has {x.size} points, need at least {MIN_POINTS}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("cloud coordinates must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def count(self) -> int:
        return self.x.size

    @classmethod
    def from_points(cls, x, y, center: bool = True) -> "LissajousCloud":
        x = np.asarray(x, dtype=np.float64).ravel()
        y = np.asarray(y, dtype=np.float64).ravel()
        if center:
            x = x - x.mean()
            y = y - y.mean()
        return cls(x, y)


@dataclass(frozen=True)
class RobustConfig:
    """IRLS settings.

    Weights are ``exp(-weight_factor * kappa * r^2)``. The default factor 1
    makes every reweighted solve a majorize-minimize step on the Leclerc
    objective at ``kappa``, so that objective never increases. A factor of
    2 reproduces the ``exp(-2 k r^2)`` weighting sometimes quoted for this
    potential; it descends the objective at ``2 kappa`` instead.
    """

    kappa: float = 0.1
    max_iterations: int = 3
    tol: float = 1e-4
    weight_factor: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0 or not math.isfinite(self.kappa):
            raise DomainError("kappa must be positive")
        if not self.weight_factor > 0 or not math.isfinite(self.weight_factor):
            raise DomainError("weight_factor must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise DomainError("max_iterations must be an integer >= 1")
        if not self.tol >= 0:
            raise DomainError("tol must be >= 0")


@dataclass(frozen=True)
class EllipseFit2:
    """Two-coefficient fit ``theta1 x^2 + theta2 y^2 - 1 = residual``."""

    theta1: float
    theta2: float
    residual_rms: float
    iterations: int = 1
    objective_trace: tuple[float, ...] = field(default=(), repr=False)
    converged: bool = True
    last_change: float = 0.0

    @property
    def degenerate(self) -> bool:
        return not (self.theta1 > 0 and self.theta2 > 0)

    def to_dict(self) -> dict:
        return {"theta": [self.theta1, self.theta2], "residual_rms": self.residual_rms,
                "iterations": self.iterations, "degenerate": self.degenerate,
                "converged": self.converged}


@dataclass(frozen=True)
class EllipseFit5:
    """Conic ``t1 x^2 + t2 y^2 + t3 x + t4 y + t5 = 0`` with ``t5 = -1``."""

    theta1: float
    theta2: float
    theta3: float
    theta4: float
    theta5: float = -1.0
    residual_rms: float = 0.0
    iterations: int = 1

    @property
    def degenerate(self) -> bool:
        return not (self.theta1 > 0 and self.theta2 > 0)

    @property
    def center(self) -> tuple[float, float]:
        return -self.theta3 / (2.0 * self.theta1), -self.theta4 / (2.0 * self.theta2)

    @property
    def axes(self) -> tuple[float, float]:
        """Semi-axes ``(alpha_x, alpha_y)``; NaN when the conic is not an ellipse."""
        x0, y0 = self.center
        k = self.theta1 * x0 * x0 + self.theta2 * y0 * y0 - self.theta5
        if self.degenerate or k <= 0:
            return math.nan, math.nan
        return math.sqrt(k / self.theta1), math.sqrt(k / self.theta2)

    @property
    def normalized_theta(self) -> tuple[float, float]:
        """``(1/alpha_x^2, 1/alpha_y^2)`` after moving the center to the origin."""
        x0, y0 = self.center
        k = self.theta1 * x0 * x0 + self.theta2 * y0 * y0 - self.theta5
        return self.theta1 / k, self.theta2 / k

    def to_dict(self) -> dict:
        return {"theta": [self.theta1, self.theta2, self.theta3, self.theta4, self.theta5],
                "residual_rms": self.residual_rms, "iterations": self.iterations,
                "degenerate": self.degenerate}


def add_sub(n1, n2) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-wise sum and difference of two co-registered patterns."""
    a = np.asarray(as_field(n1).data)
    b = np.asarray(as_field(n2).data)
    if a.shape != b.shape:
        raise SizeError(f"patterns differ in size: {a.shape} vs {b.shape}")
    return a + b, a - b


def build_cloud(n1, n2, stride: int = 1, border: int = 0) -> LissajousCloud:
    """Centered ``(n1 + n2, n1 - n2)`` over every ``stride``-th pixel.

    ``border`` pixels are dropped on each side first (filter-window
    artifacts live there).
    """
    if int(stride) != stride or stride < 1:
        raise DomainError("stride must be an integer >= 1")
    if border < 0:
        raise DomainError("border must be >= 0")
    add, sub = add_sub(n1, n2)
    if border:
        add = add[border:-border, border:-border]
        sub = sub[border:-border, border:-border]
    add = add[::stride, ::stride]
    sub = sub[::stride, ::stride]
    if add.size < MIN_POINTS:
        raise InsufficientDataError(f"only {add.size} pixels retained, need at least {MIN_POINTS}")
    return LissajousCloud.from_points(add, sub, center=True)


def residuals(cloud: LissajousCloud, theta1: float, theta2: float) -> np.ndarray:
    return theta1 * cloud.x ** 2 + theta2 * cloud.y ** 2 - 1.0


def leclerc(z, kappa: float):
    """Leclerc potential ``1 - exp(-kappa z^2) / kappa``."""
    return 1.0 - np.exp(-kappa * np.square(z)) / kappa


def leclerc_objective(cloud: LissajousCloud, theta1: float, theta2: float, kappa: float) -> float:
    return float(np.sum(leclerc(residuals(cloud, theta1, theta2), kappa)))


def _solve_moments(m, error_cls, what):
    # normal equations [[Sx4, Sx2y2], [Sx2y2, Sy4]] T = [Sx2, Sy2]
    a = np.array([[m[0], m[1]], [m[1], m[2]]])
    rhs = np.array([m[3], m[4]])
    if not np.all(np.isfinite(a)) or np.linalg.cond(a) > COND_LIMIT:
        raise error_cls(f"{what} normal matrix is singular or ill-conditioned "
                        "(ellipse collapsed to a line?)")
    return np.linalg.solve(a, rhs)


def _rms(cloud, t1, t2) -> float:
    z = residuals(cloud, t1, t2)
    return float(np.sqrt(np.mean(z * z)))


def fit_ls2(cloud: LissajousCloud) -> EllipseFit2:
    """Least-squares ``(theta1, theta2)`` from the 2x2 normal equations."""
    m = _accel.ellipse_moments(cloud.x, cloud.y, np.ones(cloud.count))
    t1, t2 = _solve_moments(m, DegenerateCloudError, "least-squares")
    return EllipseFit2(float(t1), float(t2), _rms(cloud, t1, t2), 1)


def fit_ls5(cloud: LissajousCloud) -> EllipseFit5:
    """Least-squares conic with the constant term fixed at -1.

    Regresses ``[x^2, y^2, x, y]`` against a vector of ones.
    """
    x, y = cloud.x, cloud.y
    design = np.column_stack([x * x, y * y, x, y])
    normal = design.T @ design
    if not np.all(np.isfinite(normal)) or np.linalg.cond(normal) > COND_LIMIT:
        raise DegenerateCloudError("conic normal matrix is singular or ill-conditioned")
    theta = np.linalg.solve(normal, design.sum(axis=0))
    res = design @ theta - 1.0
    t1, t2, t3, t4 = (float(v) for v in theta)
    return EllipseFit5(t1, t2, t3, t4, -1.0, float(np.sqrt(np.mean(res * res))), 1)


def fit_robust(cloud: LissajousCloud, config: RobustConfig = RobustConfig()) -> EllipseFit2:
    """Leclerc-potential fit by iteratively reweighted least squares.

    Iteration 1 is plain least squares (unit weights). Each further
    iteration reweights by ``w_i = exp(-c kappa r_i^2)`` (``c`` is
    ``config.weight_factor``) with residuals of the previous estimate and
    re-solves the weighted normal equations. Stops after ``max_iterations``
    solves or once the largest relative change of ``(theta1, theta2)``
    drops below ``tol``; ``converged`` records which. ``objective_trace``
    holds the Leclerc objective at ``kappa`` after every solve.
    """
    kappa = config.kappa
    ls = fit_ls2(cloud)
    theta = np.array([ls.theta1, ls.theta2])
    trace = [leclerc_objective(cloud, theta[0], theta[1], kappa)]
    iterations = 1
    change = math.inf
    while iterations < config.max_iterations:
        w = _accel.leclerc_weights(cloud.x, cloud.y, theta[0], theta[1], config.weight_factor * kappa)
        if not w.sum() > 1e-300:
            raise RobustCollapseError(f"all robust weights vanished at kappa={kappa}; try a smaller kappa")
        m = _accel.ellipse_moments(cloud.x, cloud.y, w)
        try:
            new = _solve_moments(m, RobustCollapseError, "weighted")
        except RobustCollapseError as exc:
            raise RobustCollapseError(f"{exc}; robust weights collapsed at kappa={kappa}, "
                                      "try a smaller kappa") from None
        iterations += 1
        change = float(np.max(np.abs(new - theta) / np.maximum(np.abs(theta), 1e-300)))
        theta = new
        trace.append(leclerc_objective(cloud, theta[0], theta[1], kappa))
        if change < config.tol:
            break
    return EllipseFit2(float(theta[0]), float(theta[1]), _rms(cloud, theta[0], theta[1]),
                       iterations, tuple(trace), change < config.tol, change)
