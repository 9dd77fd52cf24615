"""Phase step and phase map recovery, plus wrapped-error metrics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .ellipse import EllipseFit2, EllipseFit5
from .errors import DataError, DegenerateFitError, DomainError, SizeError
from .field import ScalarField, as_field, wrap_to_pi

MASK_EPS = 1e-9


class Method(str, enum.Enum):
    SLEF_LS = "SLEF-LS"
    SLEF_RE = "SLEF-RE"
    LEF_5TERM = "LEF-5term"

    def __str__(self):
        return self.value


class Formula(str, enum.Enum):
    TWO_STEP = "two-step"
    LEF_PISTON = "lef-piston"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class PhaseStepEstimate:
    delta: float
    method: Method
    fit: EllipseFit2 | EllipseFit5 | None = None

    def to_dict(self) -> dict:
        return {"delta": self.delta, "method": str(self.method),
                "fit": self.fit.to_dict() if self.fit is not None else None}


@dataclass(frozen=True, eq=False)
class PhaseMapResult:
    phase: ScalarField
    formula: Formula
    mask: np.ndarray  # True where the pixel is valid

    @property
    def valid_fraction(self) -> float:
        return float(self.mask.mean())


@dataclass(frozen=True, eq=False)
class ErrorReport:
    mae: float
    error_map: ScalarField
    excluded_fraction: float
    piston: float = 0.0

    def to_dict(self) -> dict:
        return {"mae": self.mae, "excluded_fraction": self.excluded_fraction, "piston": self.piston}


def step_from_theta(theta1: float, theta2: float) -> float:
    """``delta = 2 arctan(sqrt(theta1 / theta2))``."""
    if not (theta1 > 0 and theta2 > 0):
        raise DegenerateFitError(f"theta1={theta1}, theta2={theta2} do not describe an ellipse")
    return 2.0 * math.atan(math.sqrt(theta1 / theta2))


def step_from_fit(fit, method: Method | str | None = None) -> PhaseStepEstimate:
    """Phase step from a two- or five-coefficient fit.

    The method label defaults to SLEF-LS (one iteration), SLEF-RE (more)
    or LEF-5term according to the fit type.
    """
    if method is None:
        if isinstance(fit, EllipseFit5):
            method = Method.LEF_5TERM
        else:
            method = Method.SLEF_LS if fit.iterations <= 1 else Method.SLEF_RE
    delta = step_from_theta(fit.theta1, fit.theta2)
    if not 0.0 < delta < math.pi:
        raise DegenerateFitError(f"phase step {delta} collapsed onto the boundary of (0, pi)")
    return PhaseStepEstimate(delta, Method(method), fit)


def _check_delta(delta):
    if not (math.isfinite(delta) and 0.0 < delta < math.pi):
        raise DomainError(f"phase step {delta} must lie strictly inside (0, pi)")


def phase_two_step(n1, n2, delta: float) -> PhaseMapResult:
    """Two-frame phase ``atan2(n1 cos(delta) - n2, n1 sin(delta))``.

    Pixels where numerator and denominator both fall below 1e-9 in
    magnitude are masked invalid (phase 0).
    """
    _check_delta(delta)
    a = np.asarray(as_field(n1).data)
    b = np.asarray(as_field(n2).data)
    if a.shape != b.shape:
        raise SizeError(f"patterns differ in size: {a.shape} vs {b.shape}")
    num = a * math.cos(delta) - b
    den = a * math.sin(delta)
    valid = (np.abs(num) >= MASK_EPS) | (np.abs(den) >= MASK_EPS)
    phase = np.where(valid, wrap_to_pi(np.arctan2(num, den)), 0.0)
    valid.setflags(write=False)
    return PhaseMapResult(ScalarField(phase), Formula.TWO_STEP, valid)


def phase_lef(add, sub, fit: EllipseFit5, delta: float) -> PhaseMapResult:
    """Classic ellipse-fitting phase with its ``-delta/2`` term.

    ``atan2(sub * sqrt(theta2/theta1), add + theta3/(2 theta1)) - delta/2``,
    wrapped. ``add`` and ``sub`` must be expressed in the coordinates the
    conic was fitted in (centered, when the cloud was centered).

    With a two-argument arctangent the ``-delta/2`` term exactly cancels
    the phase of the sum/difference rotation, so on ideal data this map
    coincides with :func:`phase_two_step` instead of being offset from it.
    """
    _check_delta(delta)
    if fit.theta1 == 0:
        raise DegenerateFitError("theta1 is zero")
    ratio = fit.theta2 / fit.theta1
    if not ratio > 0:
        raise DegenerateFitError(f"theta2/theta1 = {ratio} is not positive")
    s = np.asarray(as_field(sub).data)
    a = np.asarray(as_field(add).data)
    if a.shape != s.shape:
        raise SizeError(f"sum and difference differ in size: {a.shape} vs {s.shape}")
    num = s * math.sqrt(ratio)
    den = a + fit.theta3 / (2.0 * fit.theta1)
    valid = (np.abs(num) >= MASK_EPS) | (np.abs(den) >= MASK_EPS)
    phase = np.where(valid, wrap_to_pi(np.arctan2(num, den) - delta / 2.0), 0.0)
    valid.setflags(write=False)
    return PhaseMapResult(ScalarField(phase), Formula.LEF_PISTON, valid)


def circular_mean(angles) -> float:
    """Angle of the mean unit phasor."""
    z = np.exp(1j * np.asarray(angles, dtype=np.float64))
    return float(np.angle(z.mean()))


def wrapped_error(estimate: PhaseMapResult, truth, remove_piston: bool = False,
                  region: np.ndarray | None = None) -> ErrorReport:
    """Wrapped difference ``estimate - truth`` and its mean absolute value.

    With ``remove_piston`` the circular mean of the raw wrapped difference
    is subtracted first. ``region`` optionally restricts the evaluation
    (e.g. to the interior away from filter boundaries); pixels outside it
    or masked by the estimate are excluded and read 0 in the error map.
    """
    truth = np.asarray(as_field(truth).data)
    est = np.asarray(estimate.phase.data)
    if est.shape != truth.shape:
        raise SizeError(f"estimate {est.shape} and truth {truth.shape} differ in size")
    use = np.array(estimate.mask, dtype=bool)
    if region is not None:
        use &= np.asarray(region, dtype=bool)
    if not use.any():
        raise DataError("no valid pixels to evaluate")
    raw = wrap_to_pi(est - truth)
    piston = circular_mean(raw[use]) if remove_piston else 0.0
    err = np.where(use, wrap_to_pi(raw - piston), 0.0)
    mae = float(np.mean(np.abs(err[use])))
    return ErrorReport(mae, ScalarField(err), float(1.0 - use.mean()), piston)


def interior_mask(shape, border: int) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    if 2 * border >= min(shape):
        raise SizeError(f"border {border} leaves no interior in {shape}")
    mask[border:shape[0] - border, border:shape[1] - border] = True
    return mask
