"""Local phase quantization: 8-bit sign codes of local DFT coefficients.

Each pixel gets a short-time Fourier coefficient at four low frequencies
u1=(a,0), u2=(0,a), u3=(a,a), u4=(a,-a) with a = 1/M over its M x M
neighborhood (borders clamped). Signs of the eight real/imaginary parts
form a code in 0..255; the descriptor is the normalized 256-bin code
histogram.

Numerical policy: the kernels sum to zero over a full period, so the
coefficients are computed on center-subtracted windows (identical in
exact arithmetic) and coefficient components below 1e-9 of the window's
L1 mass snap to exact zero. This makes constant regions quantize through
the sign(0) -> 1 convention instead of on round-off noise, and keeps the
codes invariant under intensity offsets and positive rescaling whenever
those transforms are float-exact. Decorrelation/whitening variants of the
descriptor are intentionally not implemented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NonFiniteCoefficient, PatchTooSmall

N_BINS = 256
SNAP_REL = 1e-9


@dataclass(frozen=True)
class LpqConfig:
    """Window size M (odd, >= 3); the analysis frequency is fixed at 1/M."""

    window: int = 7

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")

    @property
    def freq(self) -> float:
        return 1.0 / self.window


def _phase_kernels(m: int) -> np.ndarray:
    """(m*m, 4) complex kernels for the sum over f(x - y) exp(-2j pi u.y).

    The window enumerates offsets z = -y, so each tap carries
    exp(+2j pi u.z); the grid is indexed [dy, dx].
    """
    r = m // 2
    t = np.arange(-r, r + 1, dtype=np.float64)
    a = 1.0 / m
    wx = np.exp(2j * np.pi * a * t)
    ones = np.ones(m, dtype=np.complex128)
    k1 = np.outer(ones, wx)  # u = (a, 0)
    k2 = np.outer(wx, ones)  # u = (0, a)
    k3 = np.outer(wx, wx)  # u = (a, a)
    k4 = np.outer(np.conj(wx), wx)  # u = (a, -a)
    return np.stack([k.ravel() for k in (k1, k2, k3, k4)], axis=1)


def stft_coefficients(patch: np.ndarray, config: LpqConfig = LpqConfig()) -> np.ndarray:
    """Per-pixel complex coefficients at the four analysis frequencies.

    Returns an (h, w, 4) complex array. Raises PatchTooSmall when the
    patch cannot contain a single window.
    """
    f = np.asarray(patch, dtype=np.float64)
    m = config.window
    if f.ndim != 2 or f.shape[0] < m or f.shape[1] < m:
        raise PatchTooSmall(f"patch {f.shape} smaller than window {m}x{m}")
    r = m // 2
    padded = np.pad(f, r, mode="edge")
    windows = sliding_window_view(padded, (m, m)).reshape(f.shape[0], f.shape[1], m * m)
    centered = windows - f[:, :, None]  # exact-zero rows for constant windows
    coeffs = centered @ _phase_kernels(m)
    # snap round-off-scale components to exact zero so sign(0) applies
    tol = SNAP_REL * np.abs(centered).sum(axis=2)
    re = np.real(coeffs)
    im = np.imag(coeffs)
    re[np.abs(re) <= tol[:, :, None]] = 0.0
    im[np.abs(im) <= tol[:, :, None]] = 0.0
    return re + 1j * im


def quantize_codes(coeffs: np.ndarray) -> np.ndarray:
    """Sign-quantize (h, w, 4) coefficients into per-pixel codes 0..255.

    Bit b is set iff component b >= 0, components ordered
    [Re u1, Im u1, Re u2, Im u2, Re u3, Im u3, Re u4, Im u4] from the LSB.
    """
    c = np.asarray(coeffs)
    if not (np.all(np.isfinite(c.real)) and np.all(np.isfinite(c.imag))):
        raise NonFiniteCoefficient("non-finite STFT coefficient")
    codes = np.zeros(c.shape[:2], dtype=np.uint16)
    for j in range(4):
        codes |= (c[:, :, j].real >= 0).astype(np.uint16) << (2 * j)
        codes |= (c[:, :, j].imag >= 0).astype(np.uint16) << (2 * j + 1)
    return codes.astype(np.uint8)


def lpq_histogram(patch: np.ndarray, config: LpqConfig = LpqConfig()) -> np.ndarray:
    """Normalized 256-bin histogram of the per-pixel codes."""
    codes = quantize_codes(stft_coefficients(patch, config))
    counts = np.bincount(codes.ravel(), minlength=N_BINS).astype(np.float64)
    return counts / counts.sum()
