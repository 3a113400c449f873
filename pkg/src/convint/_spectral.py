"""Low-level spectral helpers on periodic lattices.

All routines operate on raw float64 arrays of shape (n_time, n, ..., n)
with axis 0 = time and d trailing spatial axes of equal size n.  Big
transforms are chunked/slice-looped: monolithic multi-axis FFTs on 4-D
arrays are an order of magnitude slower than per-slice transforms on
this memory hierarchy, and the per-slice route keeps complex temporaries
small.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

# columns per chunk for time-axis transforms; keeps complex temporaries ~100MB
_TIME_CHUNK = 1 << 16

TWO_PI = 2.0 * np.pi


def int_freqs(n: int) -> np.ndarray:
    """Signed integer frequencies of a length-n periodic axis."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


def rfft_freqs(n: int) -> np.ndarray:
    """Non-negative integer frequencies of a length-n rfft axis."""
    return np.arange(n // 2 + 1, dtype=np.int64)


def _deriv_multiplier_r(n: int, order: int) -> np.ndarray:
    """(2*pi*i*k)**order on the rfft half axis, Nyquist zeroed for odd order."""
    k = rfft_freqs(n).astype(np.float64)
    mult = (TWO_PI * 1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    return mult


def axis_derivative(a: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    """Spectral derivative of given order along one axis of a real array."""
    n = a.shape[axis]
    mult = _deriv_multiplier_r(n, order)
    if axis == 0 and a.ndim > 1:
        return _apply_time_multiplier(a, mult)
    return _apply_axis_multiplier(a, axis, mult)


def axis_antiderivative(a: np.ndarray, axis: int) -> np.ndarray:
    """Zero-mean spectral antiderivative along one axis.

    Exact left inverse of axis_derivative on zero-mean input up to the
    (zeroed) Nyquist mode.
    """
    n = a.shape[axis]
    k = rfft_freqs(n).astype(np.float64)
    mult = np.zeros(n // 2 + 1, dtype=np.complex128)
    mult[1:] = 1.0 / (TWO_PI * 1j * k[1:])
    if n % 2 == 0:
        mult[-1] = 0.0
    if axis == 0 and a.ndim > 1:
        return _apply_time_multiplier(a, mult)
    return _apply_axis_multiplier(a, axis, mult)


def _apply_axis_multiplier(a: np.ndarray, axis: int, mult: np.ndarray) -> np.ndarray:
    """irfft(mult * rfft(a, axis), axis), slice-looped over axis 0 when 4-D+."""
    n = a.shape[axis]
    out = np.empty_like(a)
    shape = [1] * a.ndim
    shape[axis] = len(mult)
    m = mult.reshape(shape)
    if a.ndim >= 3 and axis != 0:
        ms = np.squeeze(m, axis=0) if m.shape[0] == 1 else m
        for i in range(a.shape[0]):
            spec = sfft.rfft(a[i], axis=axis - 1)
            spec *= ms
            out[i] = sfft.irfft(spec, n=n, axis=axis - 1)
    else:
        spec = sfft.rfft(a, axis=axis)
        spec *= m
        out[...] = sfft.irfft(spec, n=n, axis=axis)
    return out


def _apply_time_multiplier(a: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """Chunked multiplier application along axis 0 of a large array."""
    n = a.shape[0]
    flat = a.reshape(n, -1)
    out = np.empty_like(flat)
    m = mult[:, None]
    for j in range(0, flat.shape[1], _TIME_CHUNK):
        spec = sfft.rfft(flat[:, j : j + _TIME_CHUNK], axis=0)
        spec *= m
        out[:, j : j + _TIME_CHUNK] = sfft.irfft(spec, n=n, axis=0)
    return out.reshape(a.shape)


class SpatialOperator:
    """Cached rfftn-based spatial Fourier multipliers for an n**d lattice.

    Gradient/divergence/inverse-Laplacian share one frequency layout: the
    last spatial axis is stored on the rfft half spectrum.  Nyquist modes
    are zeroed in first derivatives (the real-representable convention),
    and the inverse Laplacian uses the matching zeroed symbol so that
    div(antidivergence(f)) reproduces f - mean(f) exactly on the lattice
    for every mode the gradient can see.
    """

    def __init__(self, dim: int, n: int):
        self.dim = dim
        self.n = n
        ks = []
        for j in range(dim):
            if j == dim - 1:
                k = rfft_freqs(n).astype(np.float64)
            else:
                k = int_freqs(n).astype(np.float64)
            if n % 2 == 0:
                k = k.copy()
                k[np.abs(k) == n // 2] = 0.0
            shape = [1] * dim
            shape[j] = len(k)
            ks.append((TWO_PI * k).reshape(shape))
        self.ik = [1j * k for k in ks]
        k2 = sum(k * k for k in ks)
        inv = np.zeros_like(k2)
        np.divide(1.0, k2, out=inv, where=k2 > 0.0)
        self.inv_k2 = inv

    def _rfftn(self, s: np.ndarray) -> np.ndarray:
        return sfft.rfftn(s, axes=tuple(range(self.dim)))

    def _irfftn(self, spec: np.ndarray) -> np.ndarray:
        return sfft.irfftn(spec, s=(self.n,) * self.dim, axes=tuple(range(self.dim)))

    def gradient_slice(self, s: np.ndarray) -> list[np.ndarray]:
        spec = self._rfftn(s)
        return [self._irfftn(spec * ikj) for ikj in self.ik]

    def antidivergence_slice(self, s: np.ndarray) -> list[np.ndarray]:
        """Delta^{-1} grad of (s - mean s); exact right inverse of div."""
        spec = self._rfftn(s)
        spec *= -self.inv_k2
        return [self._irfftn(spec * ikj) for ikj in self.ik]

    def divergence_spec(self, comps: list[np.ndarray]) -> np.ndarray:
        spec = self._rfftn(comps[0]) * self.ik[0]
        for j in range(1, self.dim):
            spec += self._rfftn(comps[j]) * self.ik[j]
        return spec

    def divergence_slice(self, comps: list[np.ndarray]) -> np.ndarray:
        return self._irfftn(self.divergence_spec(comps))

    def antidivergence_of_div_slice(self, comps: list[np.ndarray]) -> list[np.ndarray]:
        """R(div X) for a slice, fused in spectral space."""
        spec = self.divergence_spec(comps)
        spec *= -self.inv_k2
        return [self._irfftn(spec * ikj) for ikj in self.ik]


_OP_CACHE: dict[tuple[int, int], SpatialOperator] = {}


def spatial_operator(dim: int, n: int) -> SpatialOperator:
    key = (dim, n)
    if key not in _OP_CACHE:
        if len(_OP_CACHE) > 3:
            _OP_CACHE.clear()
        _OP_CACHE[key] = SpatialOperator(dim, n)
    return _OP_CACHE[key]


def spatial_gradient(a: np.ndarray, dim: int) -> list[np.ndarray]:
    """Gradient over the d trailing spatial axes, slice-looped over time."""
    op = spatial_operator(dim, a.shape[-1])
    out = [np.empty_like(a) for _ in range(dim)]
    for i in range(a.shape[0]):
        for j, g in enumerate(op.gradient_slice(a[i])):
            out[j][i] = g
    return out


def spatial_divergence(comps: list[np.ndarray], dim: int) -> np.ndarray:
    op = spatial_operator(dim, comps[0].shape[-1])
    out = np.empty_like(comps[0])
    for i in range(comps[0].shape[0]):
        out[i] = op.divergence_slice([c[i] for c in comps])
    return out


def spatial_antidivergence(a: np.ndarray, dim: int) -> list[np.ndarray]:
    op = spatial_operator(dim, a.shape[-1])
    out = [np.empty_like(a) for _ in range(dim)]
    for i in range(a.shape[0]):
        for j, g in enumerate(op.antidivergence_slice(a[i])):
            out[j][i] = g
    return out


def dealias_spatial(a: np.ndarray, dim: int) -> np.ndarray:
    """2/3-rule truncation over the spatial axes."""
    n = a.shape[-1]
    cut = n // 3
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        spec = sfft.rfftn(a[i], axes=tuple(range(dim)))
        for j in range(dim):
            k = rfft_freqs(n) if j == dim - 1 else np.abs(int_freqs(n))
            mask = k > cut
            sl = [slice(None)] * dim
            sl[j] = mask
            spec[tuple(sl)] = 0.0
        out[i] = sfft.irfftn(spec, s=(n,) * dim, axes=tuple(range(dim)))
    return out
