"""Intermittent oscillators on the time torus.

The profile is a compactly supported bump with unit squared integral.
The concentrated oscillator pair (g, g_dual = kappa * g) is sampled
exactly at lattice times and then rescaled by one scalar so the lattice
mean of their product is exactly one; the saw-tooth corrector is the
exact spectral antiderivative of (product - 1), anchored at t = 0.
These discrete normalizations are what let the defect-equation algebra
close to machine precision downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _spectral as sp

__all__ = [
    "TimeProfile",
    "TemporalOscillator",
    "default_time_profile",
    "build_oscillator",
    "intermittency_table",
]

_FINE = 1 << 14
_LO, _HI = 0.125, 0.875


def _bump(u):
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = (u > 0.0) & (u < 1.0)
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (ui * (1.0 - ui)))
    return out


@dataclass(frozen=True)
class TimeProfile:
    """Smooth compactly supported profile on [0,1] with integral g^2 = 1."""

    scale: float

    def __call__(self, s):
        return self.scale * _bump((np.asarray(s) - _LO) / (_HI - _LO))

    def support(self) -> tuple[float, float]:
        return (_LO, _HI)


def default_time_profile() -> TimeProfile:
    s = (np.arange(_FINE) + 0.5) / _FINE
    raw = float(np.mean(_bump((s - _LO) / (_HI - _LO)) ** 2))
    return TimeProfile(scale=raw**-0.5)


@dataclass(frozen=True)
class TemporalOscillator:
    """Concentrated oscillator pair and saw-tooth corrector on the lattice.

    g: samples of g_kappa(sigma t); g_dual = kappa * g (pointwise exact);
    h: samples of the corrector h_kappa(sigma t), with
    h_over_sigma = h / sigma satisfying  d/dt h_over_sigma = g_dual*g - 1
    exactly in lattice arithmetic.
    """

    kappa: int
    sigma: int
    n_time: int
    g: np.ndarray = field(repr=False)
    g_dual: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    h_over_sigma: np.ndarray = field(repr=False)

    def product(self) -> np.ndarray:
        return self.g_dual * self.g


def build_oscillator(
    kappa: int, sigma: int, n_time: int, profile: TimeProfile | None = None
) -> TemporalOscillator:
    """Sample g_kappa(sigma t), kappa*g_kappa(sigma t) and the corrector.

    Requires 8*sigma*kappa <= n_time (temporal resolution) and sigma | n_time.
    """
    if kappa < 1 or sigma < 1:
        raise ValueError("kappa and sigma must be integers >= 1")
    if 8 * sigma * kappa > n_time:
        raise ValueError(
            f"n_time={n_time} cannot resolve sigma*kappa={sigma * kappa}; need n_time >= {8 * sigma * kappa}"
        )
    if n_time % sigma != 0:
        raise ValueError(f"sigma={sigma} must divide n_time={n_time}")
    if profile is None:
        profile = default_time_profile()
    t = np.arange(n_time) / n_time
    phase = kappa * np.mod(sigma * t, 1.0)
    g = np.where(phase <= 1.0, profile(phase), 0.0)
    # one scalar so that the lattice mean of (kappa g) * g is exactly 1
    s = float(np.mean(kappa * g * g))
    if s <= 0.0:
        raise ValueError("oscillator unresolved on this time lattice")
    g = g / np.sqrt(s)
    g_dual = float(kappa) * g
    prod_minus_one = g_dual * g - 1.0
    h_over_sigma = sfft.irfft(
        sfft.rfft(prod_minus_one) * _antideriv_mult(n_time), n=n_time
    )
    h_over_sigma = h_over_sigma - h_over_sigma[0]
    return TemporalOscillator(
        kappa=kappa,
        sigma=sigma,
        n_time=n_time,
        g=g,
        g_dual=g_dual,
        h=sigma * h_over_sigma,
        h_over_sigma=h_over_sigma,
    )


def _antideriv_mult(n: int) -> np.ndarray:
    kk = np.arange(n // 2 + 1, dtype=np.float64)
    mult = np.zeros(n // 2 + 1, dtype=np.complex128)
    mult[1:] = 1.0 / (2j * np.pi * kk[1:])
    if n % 2 == 0:
        mult[-1] = 0.0
    return mult


def _lr(a: np.ndarray, r: float) -> float:
    if np.isinf(r):
        return float(np.max(np.abs(a)))
    return float(np.mean(np.abs(a) ** r) ** (1.0 / r))


def intermittency_table(osc: TemporalOscillator, r_list) -> list[dict]:
    """L^r norms of the oscillator pair over [0,1] for scaling tests."""
    return [
        {
            "kappa": osc.kappa,
            "sigma": osc.sigma,
            "r": r,
            "g": _lr(osc.g, r),
            "g_dual": _lr(osc.g_dual, r),
        }
        for r in r_list
    ]
