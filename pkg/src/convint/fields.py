"""Sampled time-periodic fields on [0,1] x T^d with spectral calculus.

Fields are immutable value objects: float64 samples on the uniform
periodic lattice (no duplicated endpoint), axis 0 = time, axes 1..d =
space.  All operations are pure functions returning new fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _spectral as sp

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "derivative",
    "gradient",
    "divergence",
    "antiderivative_time",
    "lebesgue_norm",
    "mixed_norm",
    "mean",
    "rescale_periodic",
    "dealias",
    "spectral_l2",
    "time_axis",
    "space_axes",
    "random_band_limited",
]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Lattice sizes: d spatial axes of n_space points, n_time time points."""

    dim: int
    n_space: int
    n_time: int

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError(f"dim must be >= 3, got {self.dim}")
        if self.n_space < 4 or not _is_pow2(self.n_space):
            raise ValueError(f"n_space must be a power of two >= 4, got {self.n_space}")
        if self.n_time < 4 or not _is_pow2(self.n_time):
            raise ValueError(f"n_time must be a power of two >= 4, got {self.n_time}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_time,) + (self.n_space,) * self.dim

    def times(self) -> np.ndarray:
        return np.arange(self.n_time) / self.n_time

    def space_coords(self) -> np.ndarray:
        return np.arange(self.n_space) / self.n_space


@dataclass(frozen=True)
class ScalarField:
    grid: GridSpec
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.samples, dtype=np.float64)
        if a.shape != self.grid.shape:
            raise ValueError(f"samples shape {a.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("samples contain non-finite values")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "samples", a)


@dataclass(frozen=True)
class VectorField:
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        grids = {c.grid for c in self.components}
        if len(grids) != 1:
            raise ValueError("all components must share one grid")
        if len(self.components) != self.components[0].grid.dim:
            raise ValueError("a VectorField needs one component per spatial axis")

    @property
    def grid(self) -> GridSpec:
        return self.components[0].grid

    def magnitude(self) -> np.ndarray:
        sq = sum(c.samples**2 for c in self.components)
        return np.sqrt(sq)


def scalar(grid: GridSpec, samples: np.ndarray) -> ScalarField:
    return ScalarField(grid, samples)


def vector(grid: GridSpec, comps) -> VectorField:
    return VectorField(tuple(ScalarField(grid, c) for c in comps))


def time_axis() -> int:
    return 0


def space_axes(grid: GridSpec) -> tuple[int, ...]:
    return tuple(range(1, grid.dim + 1))


def derivative(f: ScalarField, axis: int) -> ScalarField:
    """Exact Fourier derivative along one axis (0 = time, 1..d = space)."""
    if not 0 <= axis <= f.grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {f.grid.dim}")
    return ScalarField(f.grid, sp.axis_derivative(f.samples, axis))


def antiderivative_time(f: ScalarField) -> ScalarField:
    """Zero-mean spectral antiderivative along the time axis."""
    return ScalarField(f.grid, sp.axis_antiderivative(f.samples, 0))


def gradient(f: ScalarField) -> VectorField:
    comps = sp.spatial_gradient(f.samples, f.grid.dim)
    return vector(f.grid, comps)


def divergence(v: VectorField) -> ScalarField:
    out = sp.spatial_divergence([c.samples for c in v.components], v.grid.dim)
    return ScalarField(v.grid, out)


def _norm_of_samples(a: np.ndarray, r: float, scope: str) -> np.ndarray | float:
    n_t = a.shape[0]
    flat = np.abs(a).reshape(n_t, -1)
    if scope == "space":
        if np.isinf(r):
            return flat.max(axis=1)
        return (np.mean(flat**r, axis=1)) ** (1.0 / r)
    if scope == "spacetime":
        if np.isinf(r):
            return float(flat.max())
        return float(np.mean(flat**r) ** (1.0 / r))
    raise ValueError(f"unknown scope {scope!r}")


def lebesgue_norm(f, r: float, scope: str = "spacetime"):
    """L^r norm by periodic-lattice quadrature; r = inf returns max |sample|.

    scope='space' returns one value per time slice, scope='spacetime' a float.
    Vector fields use the pointwise Euclidean magnitude.
    """
    if not np.isinf(r) and r < 1:
        raise ValueError(f"r must be >= 1 or inf, got {r}")
    a = f.magnitude() if isinstance(f, VectorField) else f.samples
    return _norm_of_samples(a, r, scope)


def _grad_magnitude_sq(arrays: list[np.ndarray], dim: int) -> list[np.ndarray]:
    """One derivative order applied to every array; returns all components."""
    out = []
    for a in arrays:
        out.extend(sp.spatial_gradient(a, dim))
    return out


def mixed_norm(f, time_exponent: float, space_exponent: float, space_smoothness: int = 0):
    """|| t -> ||f(t)||_{W^{m,r}} ||_{L^s[0,1]} with the Sobolev norm taken as
    the sum over derivative orders 0..m of spatial L^r norms."""
    for e in (time_exponent, space_exponent):
        if not np.isinf(e) and e < 1:
            raise ValueError(f"exponent must be >= 1 or inf, got {e}")
    if space_smoothness < 0:
        raise ValueError("space_smoothness must be >= 0")
    if isinstance(f, VectorField):
        arrays = [c.samples for c in f.components]
        dim = f.grid.dim
    else:
        arrays = [f.samples]
        dim = f.grid.dim
    per_time = np.zeros(arrays[0].shape[0])
    level = arrays
    for m in range(space_smoothness + 1):
        mag_sq = sum(a * a for a in level)
        mag = np.sqrt(mag_sq)
        per_time += _norm_of_samples(mag, space_exponent, "space")
        if m < space_smoothness:
            level = _grad_magnitude_sq(level, dim)
    if np.isinf(time_exponent):
        return float(per_time.max())
    return float(np.mean(per_time**time_exponent) ** (1.0 / time_exponent))


def mean(f: ScalarField, scope: str = "space"):
    """Lattice average, per time slice (scope='space') or overall."""
    a = f.samples
    if scope == "space":
        return a.reshape(a.shape[0], -1).mean(axis=1)
    if scope == "spacetime":
        return float(a.mean())
    raise ValueError(f"unknown scope {scope!r}")


def _resample_indices(n: int, sigma: int) -> np.ndarray:
    return (sigma * np.arange(n)) % n


def rescale_periodic(f: ScalarField, sigma: int, axes: str = "space") -> ScalarField:
    """x -> f(sigma x mod 1) by exact index resampling.

    sigma must divide the grid size on every rescaled axis; otherwise the
    dilated spectrum would alias and silently corrupt downstream identities.
    """
    if sigma < 1:
        raise ValueError("sigma must be a positive integer")
    a = f.samples
    grid = f.grid
    which = []
    if axes in ("space", "both"):
        which.extend(range(1, grid.dim + 1))
    if axes in ("time", "both"):
        which.append(0)
    if axes not in ("space", "time", "both"):
        raise ValueError(f"axes must be space|time|both, got {axes!r}")
    for ax in which:
        n = a.shape[ax]
        if n % sigma != 0:
            raise ValueError(
                f"sigma={sigma} does not divide grid size {n} on axis {ax}"
            )
        a = np.take(a, _resample_indices(n, sigma), axis=ax)
    return ScalarField(grid, a)


def dealias(f: ScalarField) -> ScalarField:
    """2/3-rule spatial dealiasing (spectral truncation above n/3)."""
    return ScalarField(f.grid, sp.dealias_spatial(f.samples, f.grid.dim))


def spectral_l2(f: ScalarField) -> float:
    """sqrt of the Parseval sum of squared Fourier coefficients."""
    spec = np.fft.fftn(f.samples) / f.samples.size
    return float(np.sqrt(np.sum(np.abs(spec) ** 2)))


def random_band_limited(
    grid: GridSpec,
    max_space_freq: int,
    max_time_freq: int = 0,
    rng: np.random.Generator | None = None,
    zero_mean: bool = False,
) -> ScalarField:
    """Random real trig polynomial with spectrum inside the given box."""
    rng = np.random.default_rng() if rng is None else rng
    shape = grid.shape
    spec = np.zeros(shape, dtype=np.complex128)
    kt = sp.int_freqs(grid.n_time)
    ks = sp.int_freqs(grid.n_space)
    mask = np.abs(kt)[:, None] <= max_time_freq
    for _ in range(grid.dim):
        mask = mask[..., None] & (np.abs(ks) <= max_space_freq)
    idx = np.argwhere(mask.reshape(shape))
    vals = rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
    spec[tuple(idx.T)] = vals
    out = np.fft.ifftn(spec).real
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out / peak
    if zero_mean:
        out = out - out.mean()
    return ScalarField(grid, out)
