"""Fourier spectrum of a sampled autocorrelation function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Spectrum:
    xi: np.ndarray  # angular frequencies, ascending
    magnitude: np.ndarray
    peaks: np.ndarray  # peak frequencies, largest magnitude first
    bin_width: float


def spectrum(a, dt: float, window: str | None = None, pad: int = 1) -> Spectrum:
    """``|a_hat(xi)|`` with ``a_hat(xi) = dt * sum_j a(t_j) exp(+i xi t_j)``.

    With this sign a component ``exp(-i E t)`` peaks at ``xi = E``.  The
    frequency grid is ``2 pi k / (N dt)``; ``pad > 1`` zero-pads to ``pad * N``
    samples to interpolate between bins (the resolution stays ``2 pi / (N dt)``).
    ``window="cosine"`` applies a half-cosine taper ``cos(pi t / (2 T))``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 1 or a.size < 8:
        raise ValueError("need at least 8 uniform samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    N = a.size
    if window == "cosine":
        a = a * np.cos(0.5 * np.pi * np.arange(N) / N)
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    L = N * int(pad)
    ahat = dt * L * np.fft.ifft(a, n=L)
    xi = 2 * np.pi * np.fft.fftfreq(L, d=dt)
    order = np.argsort(xi)
    xi, mag = xi[order], np.abs(ahat[order])
    inner = (mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:])
    idx = np.nonzero(inner)[0] + 1
    idx = idx[np.argsort(-mag[idx], kind="stable")]
    return Spectrum(xi, mag, xi[idx], 2 * np.pi / (N * dt))
