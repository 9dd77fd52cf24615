"""Gabor filter bank: kernels, filtering, winner-take-all normalization.

A fringe pattern is convolved with every complex Gabor kernel of the bank.
At each pixel the filter with the largest response magnitude wins; its
response ``m * exp(-i psi)`` gives the local magnitude ``m`` and phase
``psi``, and the normalized pattern is ``cos(psi)``.

Kernels are mean-subtracted (zero DC) and L1-normalized so magnitudes are
comparable across periods and constant backgrounds are rejected.
Boundaries use symmetric (edge-duplicating) mirror extension.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft
from scipy import ndimage, signal

from . import _accel
from .errors import DegenerateResponseError, DomainError, SizeError
from .field import ComplexField, ScalarField, as_field, wrap_to_pi

DIRECT_MAX_SIZE = 15
DEGENERATE_REL = 1e-12


@dataclass(frozen=True)
class GfbConfig:
    """Filter-bank parameters.

    Orientations are ``theta_j = j * pi / orientations``; each period ``tau``
    (pixels) gives a Gaussian width ``sigma_ratio * tau`` and a kernel
    half-extent ``ceil(window_ratio * tau)``.
    """

    periods: tuple[float, ...] = (7.0, 10.0, 15.0, 25.0)
    orientations: int = 10
    sigma_ratio: float = 0.5
    window_ratio: float = 2.0
    zero_dc: bool = True

    def __post_init__(self):
        periods = tuple(float(p) for p in self.periods)
        object.__setattr__(self, "periods", periods)
        if not periods:
            raise DomainError("filter bank needs at least one period")
        if any(not math.isfinite(p) or p < 3 for p in periods):
            raise DomainError(f"every period must be >= 3 pixels, got {periods}")
        if int(self.orientations) != self.orientations or self.orientations < 1:
            raise DomainError("orientation count must be a positive integer")
        object.__setattr__(self, "orientations", int(self.orientations))
        if not self.sigma_ratio > 0 or not self.window_ratio > 0:
            raise DomainError("sigma and window ratios must be positive")

    @property
    def size(self) -> int:
        return len(self.periods) * self.orientations

    def half_width(self, period: float) -> int:
        return max(1, math.ceil(self.window_ratio * period - 1e-9))

    @property
    def max_half_width(self) -> int:
        return max(self.half_width(p) for p in self.periods)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["periods"] = list(self.periods)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GfbConfig":
        unknown = set(d) - {"periods", "orientations", "sigma_ratio", "window_ratio", "zero_dc"}
        if unknown:
            raise DomainError(f"unknown GFB config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class GaborKernel:
    taps: np.ndarray
    period: float
    theta: float
    sigma: float
    index: int = 0

    @property
    def omega(self) -> tuple[float, float]:
        """Tuned frequency ``(w_x, w_y)`` in rad/pixel (x along columns)."""
        k = 2.0 * math.pi / self.period
        return k * math.cos(self.theta), k * math.sin(self.theta)

    @property
    def half_width(self) -> int:
        return self.taps.shape[0] // 2

    @property
    def shape(self) -> tuple[int, int]:
        return self.taps.shape


@dataclass(frozen=True, eq=False)
class GfbResponse:
    magnitude: ScalarField
    phase: ScalarField
    winner: np.ndarray
    normalized: ScalarField
    filter_magnitudes: tuple[ScalarField, ...] | None = field(default=None, repr=False)


def make_kernel(period: float, theta: float, sigma: float, half_width: int,
                zero_dc: bool = True, index: int = 0) -> GaborKernel:
    """Sample ``exp(-i w.x) G(x, sigma)`` on a ``(2h+1)^2`` grid."""
    k = 2.0 * math.pi / period
    wx, wy = k * math.cos(theta), k * math.sin(theta)
    r = np.arange(-half_width, half_width + 1, dtype=np.float64)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    gauss = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    taps = np.exp(-1j * (wx * dx + wy * dy)) * gauss
    if zero_dc:
        taps = taps - taps.mean()
    taps = taps / np.abs(taps).sum()
    taps.setflags(write=False)
    return GaborKernel(taps, float(period), float(theta), float(sigma), index)


def build_bank(config: GfbConfig) -> list[GaborKernel]:
    """Kernels ordered period-major: filter id ``p * orientations + j``."""
    bank = []
    for period in config.periods:
        h = config.half_width(period)
        for j in range(config.orientations):
            theta = j * math.pi / config.orientations
            bank.append(make_kernel(period, theta, config.sigma_ratio * period, h,
                                    config.zero_dc, index=len(bank)))
    return bank


def _pad(image: np.ndarray, r: int) -> np.ndarray:
    return np.pad(image, r, mode="symmetric")


def filter_image(image, kernel: GaborKernel, method: str = "auto") -> ComplexField:
    """Complex response of ``image`` to one kernel (same size as the image).

    ``method`` is ``"direct"``, ``"fft"`` or ``"auto"`` (direct for kernels
    up to 15x15).
    """
    img = np.asarray(as_field(image).data)
    kh, kw = kernel.shape
    if img.shape[0] < kh or img.shape[1] < kw:
        raise SizeError(f"image {img.shape[1]}x{img.shape[0]} is smaller than kernel {kw}x{kh}")
    if method == "auto":
        method = "direct" if max(kh, kw) <= DIRECT_MAX_SIZE else "fft"
    padded = _pad(img, kernel.half_width)
    if method == "direct":
        out = _accel.convolve_valid(padded, np.ascontiguousarray(kernel.taps))
    elif method == "fft":
        out = signal.fftconvolve(padded, kernel.taps, mode="valid")
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    return ComplexField(out)


@lru_cache(maxsize=8)
def _bank_spectra(config: GfbConfig, grid: tuple[int, int]):
    bank = build_bank(config)
    spectra = [scipy.fft.fft2(k.taps, s=grid) for k in bank]
    return bank, spectra


def normalize(image, config: GfbConfig = GfbConfig(), keep_filter_magnitudes: bool = False) -> GfbResponse:
    """Winner-take-all normalization of a fringe pattern.

    All kernels share one FFT of the image padded by the largest
    half-width. Ties go to the lowest filter id; pixels whose winning
    magnitude is negligible (below ``1e-12 * max|image|``) are treated as
    an all-way tie: filter 0 and phase 0, so the normalized value is 1.
    """
    img = np.asarray(as_field(image).data)
    h, w = img.shape
    big = 2 * config.max_half_width + 1
    if h < big or w < big:
        raise SizeError(f"image {w}x{h} is smaller than the largest kernel ({big}x{big})")
    R = config.max_half_width
    grid = (scipy.fft.next_fast_len(h + 4 * R), scipy.fft.next_fast_len(w + 4 * R))
    bank, spectra = _bank_spectra(config, grid)
    img_hat = scipy.fft.fft2(_pad(img, R), s=grid)

    best_mag = np.full((h, w), -1.0)
    best_resp = np.zeros((h, w), dtype=np.complex128)
    best_idx = np.zeros((h, w), dtype=np.int64)
    per_filter = [] if keep_filter_magnitudes else None
    for kernel, spec in zip(bank, spectra):
        full = scipy.fft.ifft2(img_hat * spec)
        r = kernel.half_width
        resp = np.ascontiguousarray(full[R + r:R + r + h, R + r:R + r + w])
        _accel.wta_update(best_mag, best_resp, best_idx, resp, kernel.index)
        if per_filter is not None:
            per_filter.append(ScalarField(np.hypot(resp.real, resp.imag)))

    psi = wrap_to_pi(-np.angle(best_resp))
    scale = float(np.max(np.abs(img)))
    degenerate = best_mag <= DEGENERATE_REL * scale
    psi[degenerate] = 0.0
    best_idx[degenerate] = 0
    best_idx.setflags(write=False)
    return GfbResponse(
        magnitude=ScalarField(best_mag),
        phase=ScalarField(psi),
        winner=best_idx,
        normalized=ScalarField(np.cos(psi)),
        filter_magnitudes=tuple(per_filter) if per_filter is not None else None,
    )


def low_freq_blend(response: GfbResponse, original, lowpass_sigma: float) -> ScalarField:
    """Blend the normalized pattern with a low-passed copy of the original.

    ``alpha = m / max(m)`` weights the normalized field; ``1 - alpha``
    weights the original after Gaussian low-pass and min/max rescaling to
    [-1, 1]. Recovers low frequencies the bank misses.
    """
    mag = np.asarray(response.magnitude.data)
    peak = float(mag.max())
    if not peak > 0:
        raise DegenerateResponseError("filter-bank magnitude is zero everywhere; nothing to blend")
    alpha = mag / peak
    low = ndimage.gaussian_filter(np.asarray(as_field(original).data), lowpass_sigma, mode="reflect")
    lo, hi = float(low.min()), float(low.max())
    low = 2.0 * (low - lo) / (hi - lo) - 1.0 if hi > lo else np.zeros_like(low)
    return ScalarField(alpha * np.asarray(response.normalized.data) + (1.0 - alpha) * low)
