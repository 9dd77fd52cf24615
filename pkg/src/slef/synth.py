"""Seeded synthetic interferogram pairs with ground truth.

Frames follow the intensity model

    I_k(p) = a_k(p) + b_k(p) cos(phi(p) + delta_k) + eta_k(p),   delta_1 = 0, delta_2 = step

with Gaussian-envelope background ``a_k`` and modulation ``b_k`` that drift
between frames, and zero-mean Gaussian noise ``eta_k``. Noise is drawn from
numpy's PCG64 bit generator seeded through ``SeedSequence(seed)``, one
independent seed per frame.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DomainError, SizeError
from .field import ScalarField

PHASE_KINDS = ("radial-quadratic", "gaussian-peaks", "linear-carrier")
DEFAULT_NOISE_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_STEPS = (math.pi / 10, math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)
MIN_SIZE = 16


@dataclass(frozen=True)
class PhaseSpec:
    """Phase map generator.

    ``radial-quadratic``: ``curvature * |p - center|^2 + offset``.
    ``gaussian-peaks``: sum of ``amp * exp(-|p - c|^2 / (2 w^2))`` over
    ``peaks = ((cx, cy, amp, w), ...)``.
    ``linear-carrier``: ``carrier . p + offset``.

    Coordinates are pixels, ``x`` along columns and ``y`` along rows.
    ``center=None`` means the image center.
    """

    kind: str = "radial-quadratic"
    center: tuple[float, float] | None = None
    curvature: float = 0.002
    peaks: tuple[tuple[float, float, float, float], ...] = ()
    carrier: tuple[float, float] = (0.0, 0.0)
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in PHASE_KINDS:
            raise DomainError(f"unknown phase kind {self.kind!r}; expected one of {PHASE_KINDS}")
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "peaks", tuple(tuple(float(v) for v in p) for p in self.peaks))
        object.__setattr__(self, "carrier", tuple(float(c) for c in self.carrier))
        for p in self.peaks:
            if len(p) != 4 or p[3] <= 0:
                raise DomainError(f"peak {p} must be (cx, cy, amplitude, width>0)")

    def render(self, width: int, height: int) -> np.ndarray:
        yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
        if self.kind == "radial-quadratic":
            cx, cy = self.center if self.center is not None else _center(width, height)
            return self.curvature * ((xx - cx) ** 2 + (yy - cy) ** 2) + self.offset
        if self.kind == "gaussian-peaks":
            phi = np.full((height, width), self.offset)
            for cx, cy, amp, w in self.peaks:
                phi += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * w * w))
            return phi
        fx, fy = self.carrier
        return fx * xx + fy * yy + self.offset


@dataclass(frozen=True)
class ModulationSpec:
    """Background or amplitude map for both frames.

    Frame ``k`` (0 or 1) evaluates to
    ``base * drift**k * exp(-|p - center - k*shift|^2 / (2 width^2))``;
    ``width=None`` gives a flat map.
    """

    base: float = 1.0
    center: tuple[float, float] | None = None
    width: float | None = None
    drift: float = 1.0
    shift: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.base < 0 or not math.isfinite(self.base):
            raise DomainError("modulation base must be finite and >= 0")
        if self.width is not None and self.width <= 0:
            raise DomainError("envelope width must be positive")
        if self.drift <= 0:
            raise DomainError("temporal drift factor must be positive")
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "shift", tuple(float(c) for c in self.shift))

    def render(self, width: int, height: int, frame: int) -> np.ndarray:
        scale = self.base * self.drift ** frame
        if self.width is None:
            return np.full((height, width), scale)
        cx, cy = self.center if self.center is not None else _center(width, height)
        cx += frame * self.shift[0]
        cy += frame * self.shift[1]
        yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
        r2 = (xx - cx) ** 2 + (yy - cy) ** 2
        return scale * np.exp(-r2 / (2.0 * self.width ** 2))


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise DomainError("noise sigma must be finite and >= 0")
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)

    def render(self, width: int, height: int) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros((height, width))
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        return self.sigma * rng.standard_normal((height, width))


@dataclass(frozen=True)
class PairSpec:
    """Everything needed to regenerate one interferogram pair."""

    phase: PhaseSpec = field(default_factory=PhaseSpec)
    background: ModulationSpec = field(default_factory=lambda: ModulationSpec(base=0.0))
    amplitude: ModulationSpec = field(default_factory=ModulationSpec)
    noise: tuple[NoiseSpec, NoiseSpec] = (NoiseSpec(), NoiseSpec(seed=1))
    step: float = math.pi / 3
    width: int = 256
    height: int = 256
    pattern_id: int = 0

    @property
    def noise_sigma(self) -> float:
        return self.noise[0].sigma

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PairSpec":
        d = dict(d)
        kwargs = {}
        if "phase" in d:
            kwargs["phase"] = PhaseSpec(**d.pop("phase"))
        if "background" in d:
            kwargs["background"] = ModulationSpec(**d.pop("background"))
        if "amplitude" in d:
            kwargs["amplitude"] = ModulationSpec(**d.pop("amplitude"))
        if "noise" in d:
            noise = d.pop("noise")
            if isinstance(noise, dict):
                noise = [noise, {**noise, "seed": int(noise.get("seed", 0)) + 1}]
            if len(noise) != 2:
                raise DomainError("noise must describe exactly two frames")
            kwargs["noise"] = tuple(NoiseSpec(**n) for n in noise)
        allowed = {"step", "width", "height", "pattern_id"}
        unknown = set(d) - allowed
        if unknown:
            raise DomainError(f"unknown pair spec keys: {sorted(unknown)}")
        kwargs.update(d)
        return cls(**kwargs)


@dataclass(frozen=True)
class InterferogramPair:
    frame1: ScalarField
    frame2: ScalarField
    truth_phase: ScalarField | None = None
    truth_step: float | None = None

    def __post_init__(self):
        if self.frame1.shape != self.frame2.shape:
            raise SizeError(f"frames differ in size: {self.frame1.shape} vs {self.frame2.shape}")
        if self.truth_phase is not None and self.truth_phase.shape != self.frame1.shape:
            raise SizeError("truth phase does not match frame size")
        if self.truth_step is not None and not 0.0 < self.truth_step < math.pi:
            raise DomainError(f"truth step {self.truth_step} outside (0, pi)")


def _center(width, height):
    return (width - 1) / 2.0, (height - 1) / 2.0


def generate_pair(spec: PairSpec) -> InterferogramPair:
    """Render both frames of ``spec``; a pure function of the spec (including seeds)."""
    if not 0.0 < spec.step < math.pi:
        raise DomainError(f"phase step {spec.step} must lie strictly inside (0, pi)")
    w, h = spec.width, spec.height
    if w < MIN_SIZE or h < MIN_SIZE:
        raise SizeError(f"synthetic frames must be at least {MIN_SIZE}x{MIN_SIZE}, got {w}x{h}")
    phi = spec.phase.render(w, h)
    frames = []
    for k, delta in enumerate((0.0, spec.step)):
        a = spec.background.render(w, h, k)
        b = spec.amplitude.render(w, h, k)
        frames.append(ScalarField(a + b * np.cos(phi + delta) + spec.noise[k].render(w, h)))
    return InterferogramPair(frames[0], frames[1], ScalarField(phi), float(spec.step))


def ideal_pair(phase: PhaseSpec, step: float, width: int = 256, height: int = 256) -> InterferogramPair:
    """Noise-free pair with ``a = 0`` and ``b = 1`` (already normalized)."""
    spec = PairSpec(phase=phase, background=ModulationSpec(base=0.0),
                    amplitude=ModulationSpec(base=1.0), step=step, width=width, height=height)
    return generate_pair(spec)


# -- pattern families ----------------------------------------------------------

def _radial(width, height, cx, cy, fmax):
    # curvature chosen so the local frequency 2*c*r reaches fmax at the farthest corner
    rmax = max(math.hypot(x - cx, y - cy) for x in (0, width - 1) for y in (0, height - 1))
    return PhaseSpec("radial-quadratic", center=(cx, cy), curvature=fmax / (2.0 * rmax))


def _peak(cx, cy, grad, w):
    # max |grad| of amp*exp(-r^2/2w^2) is amp / (w sqrt(e))
    return (cx, cy, grad * w * math.sqrt(math.e), w)


def family_phase(family: int, width: int, height: int) -> PhaseSpec:
    """Phase map of pattern family ``family`` (templates repeat every ten).

    Closed circular fringes, arcs of off-image centers, Gaussian bumps and
    one tilted carrier, with local frequencies mostly inside the default
    bank's band (periods 7 to 25 pixels).
    """
    s = float(min(width, height))
    cx, cy = _center(width, height)
    t = family % 10
    # later cycles move the fringe centers so families stay distinct
    jx = 0.07 * s * (family // 10)
    if t == 0:
        return _radial(width, height, cx + jx, cy, 1.0)
    if t == 1:
        return PhaseSpec("gaussian-peaks", peaks=(_peak(cx + jx, cy, 0.55, 0.28 * s),))
    if t == 2:
        return _radial(width, height, -0.15 * width + jx, 0.5 * height, 0.9)
    if t == 3:
        return PhaseSpec("gaussian-peaks", peaks=(
            _peak(0.35 * width + jx, 0.4 * height, 0.5, 0.2 * s),
            _peak(0.68 * width, 0.62 * height, -0.45, 0.22 * s),
        ))
    if t == 4:
        return _radial(width, height, 0.4 * width + jx, 0.44 * height, 1.0)
    if t == 5:
        return PhaseSpec("linear-carrier", carrier=(0.42, 0.28), offset=0.3 * (family // 10))
    if t == 6:
        return PhaseSpec("gaussian-peaks", peaks=(
            _peak(0.3 * width, 0.3 * height + jx, 0.45, 0.18 * s),
            _peak(0.7 * width, 0.35 * height, 0.4, 0.2 * s),
            _peak(0.5 * width, 0.72 * height, -0.4, 0.2 * s),
        ))
    if t == 7:
        return _radial(width, height, cx, cy + jx, 1.2)
    if t == 8:
        return _radial(width, height, -0.05 * width + jx, -0.1 * height, 0.9)
    return PhaseSpec("gaussian-peaks", peaks=(_peak(0.45 * width + jx, 0.55 * height, 0.6, 0.35 * s),))


def family_modulation(family: int, width: int, height: int) -> tuple[ModulationSpec, ModulationSpec]:
    """Background and amplitude maps of pattern family ``family``.

    Both vary in space (Gaussian envelopes) and between frames (drift and shift).
    """
    s = float(min(width, height))
    t = family % 10
    sign = 1.0 if t % 2 == 0 else -1.0
    background = ModulationSpec(
        base=0.8 + 0.07 * t,
        center=((0.3 + 0.04 * t) * width, (0.6 - 0.03 * t) * height),
        width=(0.55 + 0.03 * t) * s,
        drift=1.0 + sign * (0.08 + 0.01 * t),
        shift=(sign * 0.03 * s, 0.02 * s),
    )
    amplitude = ModulationSpec(
        base=1.0,
        center=((0.55 - 0.02 * t) * width, (0.45 + 0.02 * t) * height),
        width=(0.8 + 0.02 * t) * s,
        drift=1.0 - sign * (0.06 + 0.005 * t),
        shift=(-0.02 * s, sign * 0.03 * s),
    )
    return background, amplitude


def _seed(base_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def family_pair(family: int, sigma: float, step: float, width: int = 256, height: int = 256,
                base_seed: int = 0, noise_index: int = 0, step_index: int = 0) -> PairSpec:
    background, amplitude = family_modulation(family, width, height)
    noise = tuple(NoiseSpec(sigma, _seed(base_seed, family, noise_index, step_index, k))
                  for k in (0, 1))
    return PairSpec(phase=family_phase(family, width, height), background=background,
                    amplitude=amplitude, noise=noise, step=float(step),
                    width=width, height=height, pattern_id=family)


def standard_suite(width: int = 256, height: int = 256, families: int = 10,
                noise_levels=DEFAULT_NOISE_LEVELS, steps=DEFAULT_STEPS,
                base_seed: int = 0) -> list[PairSpec]:
    """Full factorial suite: families x noise levels x steps.

    Every pair gets its own seeds derived from ``base_seed`` and its
    position in the design, so the suite is reproducible.
    """
    specs = []
    for fam in range(families):
        for ni, sigma in enumerate(noise_levels):
            for si, step in enumerate(steps):
                specs.append(family_pair(fam, sigma, step, width, height,
                                         base_seed=base_seed, noise_index=ni, step_index=si))
    return specs


def with_seed(spec: PairSpec, seed: int) -> PairSpec:
    """Copy of ``spec`` with frame seeds derived from ``seed``."""
    noise = tuple(replace(n, seed=_seed(seed, k)) for k, n in enumerate(spec.noise))
    return replace(spec, noise=noise)
