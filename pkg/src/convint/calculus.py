"""Periodic antidivergence operators and oscillation estimates.

The scalar antidivergence R = Delta^{-1} grad is an exact right inverse
of the divergence on zero-mean lattice fields.  Its bilinear companion
B(a, f) = a Rf - R(div(a Rf) - a f) is algebraically identical to the
textbook form a Rf - R(grad a . Rf) in exact arithmetic, but this
formulation keeps div B(a,f) = af - mean(af) true to machine precision
for arbitrary lattice fields, not just band-limited ones.
"""

from __future__ import annotations

import numpy as np

from . import _spectral as sp
from .fields import (
    GridSpec,
    ScalarField,
    VectorField,
    lebesgue_norm,
    mean,
    rescale_periodic,
    vector,
)

__all__ = [
    "antidivergence",
    "bilinear_antidivergence",
    "c_norm",
    "improved_holder_gap",
    "oscillatory_mean",
    "oscillatory_mean_bound",
]


def antidivergence(f: ScalarField) -> VectorField:
    """R f = Delta^{-1} grad (f - mean f), per time slice.

    Satisfies div(R f) = f - mean_x f exactly in lattice arithmetic.
    """
    comps = sp.spatial_antidivergence(f.samples, f.grid.dim)
    return vector(f.grid, comps)


def _antidiv_arrays(a: np.ndarray, dim: int) -> list[np.ndarray]:
    return sp.spatial_antidivergence(a, dim)


def bilinear_antidivergence_arrays(
    a: np.ndarray, f: np.ndarray, dim: int, rf: list[np.ndarray] | None = None
) -> list[np.ndarray]:
    """Raw-array B(a, f) with optional precomputed R f.

    f must have zero spatial mean on every time slice.  f (and rf) may be
    time-independent d-dim arrays, e.g. stationary building blocks.
    """
    op = sp.spatial_operator(dim, a.shape[-1])
    f_static = f.ndim == dim
    if rf is None:
        rf = op.antidivergence_slice(f) if f_static else sp.spatial_antidivergence(f, dim)
        rf_static = f_static
    else:
        rf_static = rf[0].ndim == dim
    out = [np.empty_like(a) for _ in range(dim)]
    for i in range(a.shape[0]):
        ai = a[i]
        fi = f if f_static else f[i]
        arf = [ai * (c if rf_static else c[i]) for c in rf]
        # g := div(a Rf) - a f  equals grad a . Rf - mean(af) in exact arithmetic
        g = op._irfftn(op.divergence_spec(arf))
        g -= ai * fi
        corr = op.antidivergence_slice(g)
        for j in range(dim):
            out[j][i] = arf[j] - corr[j]
    return out


def bilinear_antidivergence_sum(
    a_list, f_list, dim: int, rf_list
) -> list[np.ndarray]:
    """sum_k B(a_k, f_k) with one fused antidivergence correction.

    B is bilinear, so the corrections R(div(a_k Rf_k) - a_k f_k) can be
    applied to the summed fields: one transform set per slice instead of
    one per k.  All f_k must be zero-mean time-independent arrays with
    precomputed antidivergence images rf_list[k].
    """
    op = sp.spatial_operator(dim, a_list[0].shape[-1])
    n_t = a_list[0].shape[0]
    out = [np.empty_like(a_list[0]) for _ in range(dim)]
    for i in range(n_t):
        arf = [a_list[0][i] * rf_list[0][j] for j in range(dim)]
        af = a_list[0][i] * f_list[0]
        for k in range(1, len(a_list)):
            ai = a_list[k][i]
            for j in range(dim):
                arf[j] += ai * rf_list[k][j]
            af += ai * f_list[k]
        spec = op.divergence_spec(arf)
        spec -= op._rfftn(af)
        spec *= -op.inv_k2
        for j in range(dim):
            out[j][i] = arf[j]
            out[j][i] -= op._irfftn(spec * op.ik[j])
    return out


def bilinear_antidivergence(a: ScalarField, f: ScalarField) -> VectorField:
    """B(a, f) = a Rf - R(grad a . Rf) for zero-mean f, per time slice.

    div B(a, f) = af - mean_x(af) holds exactly on the lattice.
    """
    fm = np.max(np.abs(mean(f, "space")))
    if fm > 1e-10:
        raise ValueError(f"f must have zero spatial mean per slice (max |mean| = {fm:.3e})")
    comps = bilinear_antidivergence_arrays(a.samples, f.samples, a.grid.dim)
    return vector(a.grid, comps)


def c_norm(f: ScalarField, order: int) -> float:
    """Lattice C^n norm: max over m <= n of the sup of |grad^m f|."""
    dim = f.grid.dim
    level = [f.samples]
    best = float(np.max(np.abs(f.samples)))
    for _ in range(order):
        level = [g for a in level for g in sp.spatial_gradient(a, dim)]
        mag = np.sqrt(sum(a * a for a in level))
        best = max(best, float(mag.max()))
    return best


def improved_holder_gap(
    a: ScalarField, f: ScalarField, sigma: int, r: float
) -> tuple[float, float]:
    """Gap | ||a f(sigma .)||_r - ||a||_r ||f||_r | and its oscillation bound.

    The bound factor is sigma^{-1/r} ||a||_{C^1} ||f||_r.
    """
    fs = rescale_periodic(f, sigma, axes="space")
    prod = ScalarField(a.grid, a.samples * fs.samples)
    na = lebesgue_norm(a, r)
    nf = lebesgue_norm(f, r)
    gap = abs(lebesgue_norm(prod, r) - na * nf)
    bound = sigma ** (-1.0 / r) * c_norm(a, 1) * nf
    return float(gap), float(bound)


def oscillatory_mean(a: ScalarField, f: ScalarField, sigma: int) -> float:
    """integral of a(x) f(sigma x) over space-time by lattice quadrature."""
    fm = np.max(np.abs(mean(f, "space")))
    if fm > 1e-10:
        raise ValueError(f"f must have zero spatial mean per slice (max |mean| = {fm:.3e})")
    fs = rescale_periodic(f, sigma, axes="space")
    return float(np.mean(a.samples * fs.samples))


def oscillatory_mean_bound(a: ScalarField, f: ScalarField, sigma: int, order: int) -> float:
    """Riemann-Lebesgue bound sigma^{-n} ||a||_{C^n} ||f||_2 for even n."""
    if order % 2 != 0 or order < 0:
        raise ValueError("order must be a nonnegative even integer")
    return sigma ** (-float(order)) * c_norm(a, order) * lebesgue_norm(f, 2)
