"""End-to-end pipeline: normalize, fit, demodulate, evaluate, sweep.

The preprocessing stage is injectable. :class:`GfbPreprocessor` is the
built-in normalizer, :class:`IdentityPreprocessor` passes frames through
unchanged (for inputs that are already normalized, including patterns
produced by an external normalizer), and any callable mapping a
:class:`~slef.field.ScalarField` to a ScalarField can be supplied instead.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Protocol

import numpy as np

from . import demod, ellipse, gfb, synth
from .demod import Method
from .errors import DataError, DomainError, SlefError
from .field import ScalarField, as_field, wrap_to_pi

SWEEP_CSV_VERSION = "slef-sweep-csv v1"
SUMMARY_CSV_VERSION = "slef-sweep-summary v1"
SWEEP_COLUMNS = ("pattern_id", "noise_sigma", "true_delta", "method", "estimated_delta",
                 "delta_abs_error", "phase_mae", "phase_mae_piston_removed", "iterations",
                 "wall_time", "status")
METHOD_ORDER = (Method.SLEF_LS, Method.SLEF_RE, Method.LEF_5TERM)


# -- preprocessing -------------------------------------------------------------

class Preprocessor(Protocol):
    name: str

    def __call__(self, image: ScalarField) -> ScalarField: ...


@dataclass(frozen=True)
class GfbPreprocessor:
    """Filter-bank normalization, optionally blended with low frequencies."""

    config: gfb.GfbConfig = gfb.GfbConfig()
    blend_sigma: float | None = None
    name: str = "gfb"

    def response(self, image) -> gfb.GfbResponse:
        return gfb.normalize(image, self.config)

    def __call__(self, image) -> ScalarField:
        resp = self.response(image)
        if self.blend_sigma is None:
            return resp.normalized
        return gfb.low_freq_blend(resp, image, self.blend_sigma)


@dataclass(frozen=True)
class IdentityPreprocessor:
    """Pass-through for frames that are already normalized."""

    name: str = "identity"

    def __call__(self, image) -> ScalarField:
        return as_field(image)


# -- configuration -------------------------------------------------------------

def _parse_method(m) -> Method:
    try:
        return Method(str(m))
    except ValueError:
        raise DomainError(f"unknown method {m!r}; choose from {[x.value for x in Method]}") from None


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for one run of the pipeline.

    ``border_crop`` defaults to the largest filter half-width when the
    filter bank is used and to 0 when normalization is skipped. It removes
    that many pixels on each side both from the Lissajous cloud and from
    phase-error evaluation.
    """

    gfb: gfb.GfbConfig = gfb.GfbConfig()
    robust: ellipse.RobustConfig = ellipse.RobustConfig()
    methods: tuple[Method, ...] = METHOD_ORDER
    stride: int = 1
    border_crop: int | None = None
    piston_removal: bool = False
    skip_normalize: bool = False
    blend: bool = False
    blend_sigma: float | None = None

    def __post_init__(self):
        methods = tuple(dict.fromkeys(_parse_method(m) for m in self.methods))
        if not methods:
            raise DomainError("at least one method must be selected")
        object.__setattr__(self, "methods", methods)
        if int(self.stride) != self.stride or self.stride < 1:
            raise DomainError("stride must be an integer >= 1")
        if self.border_crop is not None and (int(self.border_crop) != self.border_crop
                                             or self.border_crop < 0):
            raise DomainError("border_crop must be a non-negative integer")
        if self.blend_sigma is not None and not self.blend_sigma > 0:
            raise DomainError("blend_sigma must be positive")

    @property
    def border(self) -> int:
        if self.border_crop is not None:
            return int(self.border_crop)
        return 0 if self.skip_normalize else self.gfb.max_half_width

    @property
    def lowpass_sigma(self) -> float | None:
        """Blend low-pass width (largest bank period unless set), or None."""
        if not self.blend:
            return None
        return self.blend_sigma if self.blend_sigma is not None else max(self.gfb.periods)

    def preprocessor(self) -> Preprocessor:
        if self.skip_normalize:
            return IdentityPreprocessor()
        return GfbPreprocessor(self.gfb, self.lowpass_sigma)

    def to_dict(self) -> dict:
        return {
            "gfb": self.gfb.to_dict(),
            "robust": {"kappa": self.robust.kappa, "max_iterations": self.robust.max_iterations,
                       "tol": self.robust.tol, "weight_factor": self.robust.weight_factor},
            "methods": [m.value for m in self.methods],
            "stride": self.stride,
            "border_crop": self.border_crop,
            "piston_removal": self.piston_removal,
            "skip_normalize": self.skip_normalize,
            "blend": self.blend,
            "blend_sigma": self.blend_sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        known = {"gfb", "robust", "methods", "stride", "border_crop", "piston_removal",
                 "skip_normalize", "blend", "blend_sigma"}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown pipeline config keys: {sorted(unknown)}")
        if "gfb" in d:
            d["gfb"] = gfb.GfbConfig.from_dict(d["gfb"])
        if "robust" in d:
            try:
                d["robust"] = ellipse.RobustConfig(**d["robust"])
            except TypeError as exc:
                raise DomainError(f"bad robust config: {exc}") from None
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise DataError(f"config is not valid JSON: {exc}") from None


# -- single pair ---------------------------------------------------------------

def _staged(stage: str, exc: SlefError) -> SlefError:
    """Prefix ``exc`` with the pipeline stage it came from."""
    if not getattr(exc, "stage", None):
        exc.stage = stage
        if exc.args:
            exc.args = (f"[{stage}] {exc.args[0]}",) + exc.args[1:]
    return exc


def normalize_frames(frame1, frame2, config: PipelineConfig,
                     preprocessor: Preprocessor | Callable | None = None):
    pre = preprocessor if preprocessor is not None else config.preprocessor()
    try:
        return as_field(pre(as_field(frame1))), as_field(pre(as_field(frame2)))
    except SlefError as exc:
        raise _staged("normalize", exc)


def _fit(cloud: ellipse.LissajousCloud, method: Method, robust: ellipse.RobustConfig):
    if method is Method.SLEF_LS:
        fit = ellipse.fit_ls2(cloud)
    elif method is Method.SLEF_RE:
        fit = ellipse.fit_robust(cloud, robust)
    else:
        fit = ellipse.fit_ls5(cloud)
    return demod.step_from_fit(fit, method)


def estimate_step(n1, n2, config: PipelineConfig, method: Method | str) -> demod.PhaseStepEstimate:
    """Phase step of two normalized patterns with one fitter."""
    method = _parse_method(method)
    try:
        cloud = ellipse.build_cloud(n1, n2, config.stride, config.border)
    except SlefError as exc:
        raise _staged("cloud", exc)
    try:
        return _fit(cloud, method, config.robust)
    except SlefError as exc:
        raise _staged(f"fit:{method.value}", exc)


def estimate_steps(n1, n2, config: PipelineConfig) -> dict[Method, demod.PhaseStepEstimate]:
    return {m: estimate_step(n1, n2, config, m) for m in config.methods}


def centered_add_sub(n1, n2, stride: int = 1, border: int = 0):
    """Full-size sum and difference centered with the cloud's means."""
    add, sub = ellipse.add_sub(n1, n2)
    region = (slice(border, add.shape[0] - border or None, stride),
              slice(border, add.shape[1] - border or None, stride))
    return add - add[region].mean(), sub - sub[region].mean()


def evaluation_region(shape, border: int) -> np.ndarray | None:
    return demod.interior_mask(shape, border) if border else None


@dataclass(frozen=True, eq=False)
class DemodResult:
    """Outcome of :func:`demodulate`."""

    estimate: demod.PhaseStepEstimate
    phase: demod.PhaseMapResult
    n1: ScalarField
    n2: ScalarField
    report: demod.ErrorReport | None = None

    def to_dict(self) -> dict:
        d = {"delta": self.estimate.delta, "method": self.estimate.method.value,
             "formula": self.phase.formula.value, "valid_fraction": self.phase.valid_fraction,
             "fit": self.estimate.fit.to_dict() if self.estimate.fit is not None else None}
        if self.report is not None:
            d["phase_mae"] = self.report.mae
            d["piston"] = self.report.piston
            d["excluded_fraction"] = self.report.excluded_fraction
        return d


def demodulate(frame1, frame2, config: PipelineConfig = PipelineConfig(),
               method: Method | str | None = None, truth=None,
               preprocessor: Preprocessor | Callable | None = None) -> DemodResult:
    """Normalize, fit, and recover the phase map with the two-step formula.

    ``method`` defaults to the first method of ``config``. With ``truth``
    the result carries an error report over the interior region.
    """
    method = _parse_method(method) if method is not None else config.methods[0]
    n1, n2 = normalize_frames(frame1, frame2, config, preprocessor)
    est = estimate_step(n1, n2, config, method)
    try:
        phase = demod.phase_two_step(n1, n2, est.delta)
    except SlefError as exc:
        raise _staged("demodulate", exc)
    report = None
    if truth is not None:
        report = demod.wrapped_error(phase, truth, config.piston_removal,
                                     evaluation_region(phase.phase.shape, config.border))
    return DemodResult(est, phase, n1, n2, report)


@dataclass(frozen=True, eq=False)
class PhaseComparison:
    variant: str
    method: Method
    formula: demod.Formula
    delta: float
    mae: float
    mae_piston_removed: float
    piston: float
    error_map: ScalarField

    def to_dict(self) -> dict:
        return {"variant": self.variant, "method": self.method.value,
                "formula": self.formula.value, "delta": self.delta, "mae": self.mae,
                "mae_piston_removed": self.mae_piston_removed, "piston": self.piston}


COMPARE_VARIANTS = (
    ("LEF-5term+lef-piston", Method.LEF_5TERM, demod.Formula.LEF_PISTON),
    ("LEF-5term+two-step", Method.LEF_5TERM, demod.Formula.TWO_STEP),
    ("SLEF-LS+two-step", Method.SLEF_LS, demod.Formula.TWO_STEP),
    ("SLEF-RE+two-step", Method.SLEF_RE, demod.Formula.TWO_STEP),
)


def compare_phase(frame1, frame2, truth, config: PipelineConfig = PipelineConfig(),
                  preprocessor: Preprocessor | Callable | None = None) -> list[PhaseComparison]:
    """Phase MAE of the four estimator/formula combinations on one pair.

    The classic formula is fed the sum and difference images centered the
    same way as the cloud the conic was fitted to. Both raw and
    piston-removed MAE are reported; the error maps follow
    ``config.piston_removal``.
    """
    if truth is None:
        raise DataError("phase comparison needs a ground-truth phase")
    truth = as_field(truth)
    n1, n2 = normalize_frames(frame1, frame2, config, preprocessor)
    region = evaluation_region(truth.shape, config.border)
    full = replace(config, methods=tuple(Method))
    steps = estimate_steps(n1, n2, full)
    add, sub = centered_add_sub(n1, n2, config.stride, config.border)
    out = []
    for name, method, formula in COMPARE_VARIANTS:
        est = steps[method]
        if formula is demod.Formula.LEF_PISTON:
            pm = demod.phase_lef(add, sub, est.fit, est.delta)
        else:
            pm = demod.phase_two_step(n1, n2, est.delta)
        raw = demod.wrapped_error(pm, truth, False, region)
        rem = demod.wrapped_error(pm, truth, True, region)
        chosen = rem if config.piston_removal else raw
        out.append(PhaseComparison(name, method, formula, est.delta, raw.mae, rem.mae,
                                   rem.piston, chosen.error_map))
    return out


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    pattern_id: int
    noise_sigma: float
    true_delta: float
    method: str
    estimated_delta: float | None = None
    delta_abs_error: float | None = None
    phase_mae: float | None = None
    phase_mae_piston_removed: float | None = None
    iterations: int | None = None
    wall_time: float | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sort_key(self):
        order = {m.value: i for i, m in enumerate(METHOD_ORDER)}
        return (self.pattern_id, self.noise_sigma, self.true_delta, order.get(self.method, 99))


def _error_status(exc: BaseException) -> str:
    msg = " ".join(str(exc).split())
    return f"error:{type(exc).__name__}:{msg}"


def run_pair(spec: synth.PairSpec, config: PipelineConfig,
             preprocessor: Preprocessor | Callable | None = None) -> list[SweepRow]:
    """One sweep cell: every configured method on one generated pair.

    Failures never propagate; they become rows with an ``error:`` status.
    ``phase_mae`` uses the two-step formula for the two-term fits and the
    classic piston formula for the five-term fit.
    """
    base = dict(pattern_id=int(spec.pattern_id), noise_sigma=float(spec.noise_sigma),
                true_delta=float(spec.step))
    t0 = time.perf_counter()
    try:
        pair = synth.generate_pair(spec)
        n1, n2 = normalize_frames(pair.frame1, pair.frame2, config, preprocessor)
    except (SlefError, ArithmeticError, ValueError) as exc:
        return [SweepRow(method=m.value, status=_error_status(exc), **base) for m in config.methods]
    shared = time.perf_counter() - t0
    region = evaluation_region(n1.shape, config.border)
    rows = []
    for m in config.methods:
        t1 = time.perf_counter()
        try:
            est = estimate_step(n1, n2, config, m)
            if m is Method.LEF_5TERM:
                add, sub = centered_add_sub(n1, n2, config.stride, config.border)
                pm = demod.phase_lef(add, sub, est.fit, est.delta)
            else:
                pm = demod.phase_two_step(n1, n2, est.delta)
            raw = demod.wrapped_error(pm, pair.truth_phase, False, region)
            rem = demod.wrapped_error(pm, pair.truth_phase, True, region)
        except (SlefError, ArithmeticError, ValueError) as exc:
            rows.append(SweepRow(method=m.value, status=_error_status(exc), **base))
            continue
        err = abs(float(wrap_to_pi(est.delta - spec.step)))
        rows.append(SweepRow(method=m.value, estimated_delta=est.delta, delta_abs_error=err,
                             phase_mae=raw.mae, phase_mae_piston_removed=rem.mae,
                             iterations=est.fit.iterations,
                             wall_time=shared + time.perf_counter() - t1, **base))
    return rows


def _run_pair_job(args):
    spec, config = args
    return run_pair(spec, config)


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: tuple[SweepRow, ...] = ()

    @property
    def failures(self) -> tuple[SweepRow, ...]:
        return tuple(r for r in self.rows if not r.ok)

    def to_csv(self, timing: bool = True) -> str:
        """Rows as CSV with a version comment line.

        Floats are written with ``repr`` so the text is exact and
        reproducible. With ``timing=False`` the wall-time column is left
        empty, making the file a pure function of its inputs.
        """
        buf = io.StringIO()
        buf.write(f"# {SWEEP_CSV_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            cells = []
            for col in SWEEP_COLUMNS:
                v = getattr(r, col)
                if col == "wall_time" and (not timing or v is None):
                    cells.append("")
                elif v is None:
                    cells.append("")
                elif isinstance(v, float):
                    cells.append(repr(v))
                else:
                    cells.append(str(v))
            w.writerow(cells)
        return buf.getvalue()

    def aggregate(self, by: str) -> list[dict]:
        """Mean and sample standard deviation per ``(method, by)`` cell.

        ``by`` is ``"noise_sigma"`` or ``"true_delta"``. Failed rows are
        counted but excluded from the statistics.
        """
        if by not in ("noise_sigma", "true_delta"):
            raise DomainError(f"cannot aggregate by {by!r}")
        cells: dict[tuple, list[SweepRow]] = {}
        for r in self.rows:
            cells.setdefault((r.method, getattr(r, by)), []).append(r)
        order = {m.value: i for i, m in enumerate(METHOD_ORDER)}
        out = []
        for (method, key), rows in sorted(cells.items(), key=lambda kv: (order.get(kv[0][0], 99), kv[0][1])):
            good = [r for r in rows if r.ok]
            d = np.array([r.delta_abs_error for r in good])
            p = np.array([r.phase_mae for r in good])
            q = np.array([r.phase_mae_piston_removed for r in good])
            out.append({
                "group": by, "method": method, "key": key, "count": len(good),
                "failures": len(rows) - len(good),
                "mean_delta_error": _mean(d), "std_delta_error": _std(d),
                "mean_phase_mae": _mean(p), "std_phase_mae": _std(p),
                "mean_phase_mae_piston_removed": _mean(q),
            })
        return out

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {SUMMARY_CSV_VERSION}\n")
        cols = ("group", "method", "key", "count", "failures", "mean_delta_error",
                "std_delta_error", "mean_phase_mae", "std_phase_mae",
                "mean_phase_mae_piston_removed")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for by in ("noise_sigma", "true_delta"):
            for cell in self.aggregate(by):
                w.writerow(["" if cell[c] is None else (repr(cell[c]) if isinstance(cell[c], float)
                                                       else str(cell[c])) for c in cols])
        return buf.getvalue()


def _mean(a):
    return float(np.mean(a)) if a.size else None


def _std(a):
    return float(np.std(a, ddof=1)) if a.size > 1 else (0.0 if a.size else None)


def sweep(specs: Iterable[synth.PairSpec], config: PipelineConfig = PipelineConfig(),
          workers: int = 1, preprocessor: Preprocessor | Callable | None = None) -> SweepResult:
    """Run every pair of a suite; rows come back sorted, independent of scheduling.

    ``workers > 1`` uses a process pool (custom preprocessors must then be
    picklable and are only honored in-process, so pass ``workers=1`` with
    them).
    """
    specs = list(specs)
    if workers < 1:
        raise DomainError("workers must be >= 1")
    rows: list[SweepRow] = []
    if workers == 1 or len(specs) < 2 or preprocessor is not None:
        for spec in specs:
            rows.extend(run_pair(spec, config, preprocessor))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_pair_job, [(s, config) for s in specs]):
                rows.extend(chunk)
    rows.sort(key=SweepRow.sort_key)
    return SweepResult(tuple(rows))


def parse_suite(doc) -> list[synth.PairSpec]:
    """Suite document: ``{"suite": {...standard_suite kwargs}}`` or ``{"pairs": [...]}``.

    Both keys may appear; explicit pairs follow the generated ones.
    """
    if not isinstance(doc, dict):
        raise DataError("suite spec must be a JSON object")
    unknown = set(doc) - {"suite", "pairs"}
    if unknown:
        raise DataError(f"unknown suite keys: {sorted(unknown)}")
    specs = []
    if "suite" in doc:
        params = dict(doc["suite"] or {})
        allowed = {"width", "height", "families", "noise_levels", "steps", "base_seed"}
        bad = set(params) - allowed
        if bad:
            raise DataError(f"unknown suite parameters: {sorted(bad)}")
        for key in ("noise_levels", "steps"):
            if key in params:
                params[key] = tuple(float(v) for v in params[key])
        specs.extend(synth.standard_suite(**params))
    for p in doc.get("pairs", []) or []:
        specs.append(synth.PairSpec.from_dict(p))
    return specs


__all__ = [
    "Preprocessor", "GfbPreprocessor", "IdentityPreprocessor", "PipelineConfig",
    "normalize_frames", "estimate_step", "estimate_steps", "demodulate", "DemodResult",
    "compare_phase", "PhaseComparison", "COMPARE_VARIANTS", "centered_add_sub",
    "SweepRow", "SweepResult", "run_pair", "sweep", "parse_suite",
    "SWEEP_COLUMNS", "SWEEP_CSV_VERSION",
]
