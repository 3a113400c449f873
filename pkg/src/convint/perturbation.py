"""One oscillatory-perturbation step: parameters, cutoffs, coefficients,
and the five perturbation pieces.

The density perturbation splits into a principal part (coefficient
fields riding the oscillated blocks), a spatial-mean corrector, and a
temporal oscillator balancing high time frequencies; the velocity
perturbation into a principal part and a divergence corrector.  All
algebraic identities the defect assembly relies on (coefficient product
identity, zero means, exact supports, solenoidality of the velocity
perturbation) hold to machine precision on the lattice by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _spectral as sp
from .calculus import bilinear_antidivergence_sum
from .mikado import MikadoBlock, ResolutionError, dilate_block
from .temporal import TemporalOscillator

__all__ = [
    "ParameterSchedule",
    "CutoffFamily",
    "PerturbationSet",
    "choose_parameters",
    "support_margin",
    "build_cutoffs",
    "build_coefficients",
    "build_perturbations",
]


@dataclass
class ParameterSchedule:
    """Exponents and frequency parameters of one step."""

    p: float
    q: float
    d: int
    p_prime: float
    gamma: float
    lam: float
    mu: float
    kappa: int
    sigma: int
    mode: str
    nu: float = 1.0
    delta: float = 1.0
    r_time: float = 0.0
    aux_r: float = 0.0
    valid: bool = True
    violations: list = field(default_factory=list)


def _check_regime(p: float, q: float) -> None:
    if p <= 1:
        raise ValueError(f"p must exceed 1, got p={p}")
    if 1.0 / p + 1.0 / q <= 1.0:
        raise ValueError(
            f"exponents out of regime: 1/p + 1/q = {1.0 / p + 1.0 / q:.6f} must exceed 1"
        )


def choose_parameters(
    p: float,
    q: float,
    lam: float,
    mode: str = "validated",
    d: int = 3,
    mu: float | None = None,
    kappa: int | None = None,
    sigma: int | None = None,
) -> ParameterSchedule:
    """Build a parameter schedule in validated or desk mode.

    Validated mode ties mu = kappa = lambda and sigma = floor(lambda^gamma)
    with gamma at half the regime slack.  Desk mode takes (mu, kappa,
    sigma) overrides and re-checks the frequency-hierarchy inequalities
    numerically, marking the schedule invalid (not raising) on failure.
    """
    _check_regime(p, q)
    p_prime = p / (p - 1.0)
    slack = min(1.0 - 1.0 / p, 1.0 / q - 1.0 / p_prime)
    gamma = slack / 8.0
    # largest r > 1 with (d-1)(1/p - 1/r) <= -gamma at mu = lambda
    aux_r = 1.0 / (1.0 / p + gamma / (d - 1))
    if mode == "validated":
        mu_v = lam
        kappa_v = int(round(lam))
        sigma_v = int(math.floor(lam**gamma))
        if sigma_v < 1:
            raise ValueError(f"sigma = floor(lambda^gamma) = {sigma_v} < 1")
        sched = ParameterSchedule(
            p=p, q=q, d=d, p_prime=p_prime, gamma=gamma, lam=lam,
            mu=mu_v, kappa=kappa_v, sigma=sigma_v, mode=mode, aux_r=aux_r,
        )
    elif mode == "desk":
        if mu is None or kappa is None or sigma is None:
            raise ValueError("desk mode requires mu, kappa and sigma overrides")
        if sigma < 1 or kappa < 1:
            raise ValueError("sigma and kappa must be >= 1")
        sched = ParameterSchedule(
            p=p, q=q, d=d, p_prime=p_prime, gamma=gamma, lam=lam,
            mu=float(mu), kappa=int(kappa), sigma=int(sigma), mode=mode, aux_r=aux_r,
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")
    _check_hierarchy(sched)
    return sched


def _check_hierarchy(s: ParameterSchedule) -> None:
    """Numeric re-check of the two frequency-hierarchy inequalities."""
    d = s.d
    lhs1 = s.sigma * s.mu ** ((d - 1) / s.p_prime - (d - 1) / s.q)
    rhs1 = s.lam ** (-2.0 * s.gamma)
    if lhs1 > rhs1 * (1 + 1e-12):
        s.violations.append(
            f"sigma*mu^((d-1)/p'-(d-1)/q) = {lhs1:.4g} > lambda^(-2 gamma) = {rhs1:.4g}"
        )
    lhs2 = s.mu ** ((d - 1) / s.p - (d - 1) / s.aux_r)
    rhs2 = s.lam ** (-s.gamma)
    if lhs2 > rhs2 * (1 + 1e-12):
        s.violations.append(
            f"mu^((d-1)/p-(d-1)/r) = {lhs2:.4g} > lambda^(-gamma) = {rhs2:.4g} at r = {s.aux_r:.4g}"
        )
    s.valid = not s.violations


def support_margin(R: np.ndarray | object, d: int | None = None) -> float:
    """Margin r = min(1/8, 1/(4d(||R||_inf + 1))) for the time cutoff."""
    if hasattr(R, "magnitude"):
        sup = float(R.magnitude().max())
        d = R.grid.dim
    else:
        arr = np.asarray(R)
        sup = float(np.max(np.abs(arr)))
        if d is None:
            raise ValueError("d required for raw arrays")
    return min(0.125, 1.0 / (4.0 * d * (sup + 1.0)))


def smooth_transition(s: np.ndarray) -> np.ndarray:
    """C^infinity monotone step: 0 for s <= 0, 1 for s >= 1.

    All derivatives vanish at the endpoints, so cutoffs composed with it
    keep rapidly decaying spectra; a merely C^2 polynomial step leaves
    algebraic spectral tails that dominate the defect-identity residuals
    at desk resolutions.
    """
    s = np.asarray(s, dtype=np.float64)
    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    a = np.exp(-1.0 / sm)
    b = np.exp(-1.0 / (1.0 - sm))
    out = np.select([s <= 0.0, s >= 1.0], [lo, hi], default=0.0)
    out[mid] = a / (a + b)
    return out


def time_window(times: np.ndarray, r: float) -> np.ndarray:
    """Smooth ramp: 0 outside [r/2, 1-r/2], 1 on [r, 1-r]."""
    up = smooth_transition((times - r / 2.0) / (r / 2.0))
    down = smooth_transition(((1.0 - r / 2.0) - times) / (r / 2.0))
    return up * down


@dataclass
class CutoffFamily:
    """Component cutoffs chi_k with amplitude thresholds and time margins."""

    chi: list  # d arrays, (n_t, n, ..., n)
    delta: float
    r: float
    lo: float
    hi: float


def build_cutoffs(R_comps: list[np.ndarray], delta: float, r: float) -> CutoffFamily:
    """chi_k = S(|R_k|; delta/(8d), delta/(4d)) * S_time(t; r/2, r).

    Quintic-smoothstep transitions; exact zeros below the lower threshold
    and outside [r/2, 1-r/2], exact ones on the joint plateau.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    d = len(R_comps)
    lo = delta / (8.0 * d)
    hi = delta / (4.0 * d)
    n_t = R_comps[0].shape[0]
    times = np.arange(n_t) / n_t
    tw = time_window(times, r).reshape((n_t,) + (1,) * (R_comps[0].ndim - 1))
    chi = []
    for Rk in R_comps:
        amp = smooth_transition((np.abs(Rk) - lo) / (hi - lo))
        amp *= tw
        chi.append(amp)
    return CutoffFamily(chi=chi, delta=delta, r=r, lo=lo, hi=hi)


def _slice_mean_abs(a: np.ndarray) -> np.ndarray:
    return np.abs(a).reshape(a.shape[0], -1).mean(axis=1)


def build_coefficients(
    R_comps: list[np.ndarray], cutoffs: CutoffFamily, schedule: ParameterSchedule
):
    """Coefficient fields (A_k, B_k) with A_k B_k = -chi_k^2 R_k pointwise.

    Per-slice normalization by the cut defect mass; slices where the cut
    component vanishes identically get exact zero coefficients.  Returns
    (A, B, alpha, N) with alpha the per-slice L^1 masses and N their
    space-time totals.
    """
    p, pp = schedule.p, schedule.p_prime
    d = len(R_comps)
    A, B, alphas, totals = [], [], [], []
    shape_t = (R_comps[0].shape[0],) + (1,) * (R_comps[0].ndim - 1)
    for k in range(d):
        chi = cutoffs.chi[k]
        Rk = R_comps[k]
        cut = chi * Rk
        alpha = _slice_mean_abs(cut)
        N = float(alpha.mean())
        alphas.append(alpha)
        totals.append(N)
        if N == 0.0:
            A.append(np.zeros_like(Rk))
            B.append(np.zeros_like(Rk))
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            fA = np.where(alpha > 0.0, (alpha / N) ** (1.0 / pp), 0.0)
            fB = np.where(alpha > 0.0, (N / alpha) ** (1.0 / pp), 0.0)
        absR = np.abs(Rk)
        A.append(fA.reshape(shape_t) * chi * np.sign(-Rk) * absR ** (1.0 / p))
        B.append(fB.reshape(shape_t) * chi * absR ** (1.0 / pp))
    return A, B, alphas, totals


@dataclass
class PerturbationSet:
    """The five perturbation pieces plus everything defect assembly reuses.

    theta_c is stored broadcast-shaped (n_t, 1, ..., 1); w_p/w_c are lists
    of d component arrays.  statics holds the sigma-dilated block sample
    arrays and their antidivergence images (all time-independent).

    theta_p is stored with its pure-Nyquist spatial modes removed (the
    lattice gradient annihilates them, so no divergence could balance
    their time derivative in the defect equation); nyq_coeffs holds the
    removed per-slice coefficients so product identities can account for
    them exactly.
    """

    schedule: ParameterSchedule
    oscillator: TemporalOscillator
    cutoff: CutoffFamily | None
    theta_p: np.ndarray
    theta_c: np.ndarray
    theta_o: np.ndarray
    w_p: list
    w_c: list
    A: list
    B: list
    Y: np.ndarray
    statics: dict
    nyq_coeffs: np.ndarray | None = None
    nothing_to_do: bool = False

    def theta_total(self) -> np.ndarray:
        return self.theta_p + self.theta_c + self.theta_o

    def w_total(self) -> list:
        return [wp + wc for wp, wc in zip(self.w_p, self.w_c)]

    def nyquist_slice(self, i: int) -> np.ndarray | float:
        """Removed pure-Nyquist part of theta_p at time slice i."""
        if self.nyq_coeffs is None:
            return 0.0
        d = self.schedule.d
        n = self.theta_p.shape[-1]
        basis = _nyquist_basis(d, n)
        out = np.zeros((n,) * d)
        for c, s in zip(self.nyq_coeffs[i], basis):
            if c != 0.0:
                out += c * s
        return out


def _nyquist_basis(d: int, n: int) -> list:
    """Sign checkerboards spanning the pure-Nyquist spatial modes."""
    key = (d, n)
    if key not in _NYQ_CACHE:
        sign = 1.0 - 2.0 * (np.arange(n) % 2)
        basis = []
        for bits in range(1, 2**d):
            s = np.ones((1,) * d)
            for j in range(d):
                if bits >> j & 1:
                    shape = [1] * d
                    shape[j] = n
                    s = s * sign.reshape(shape)
                else:
                    s = s * np.ones((1,) * d)
            basis.append(np.broadcast_to(s, (n,) * d))
        if len(_NYQ_CACHE) > 2:
            _NYQ_CACHE.clear()
        _NYQ_CACHE[key] = basis
    return _NYQ_CACHE[key]


_NYQ_CACHE: dict = {}


def project_out_nyquist(a: np.ndarray, d: int) -> np.ndarray:
    """Remove the pure-Nyquist spatial modes per slice; returns coefficients.

    Mutates a in place and returns the (n_t, 2^d - 1) coefficient array.
    """
    n = a.shape[-1]
    n_t = a.shape[0]
    basis = _nyquist_basis(d, n)
    coeffs = np.empty((n_t, len(basis)))
    flat = a.reshape(n_t, -1)
    for j, s in enumerate(basis):
        sf = s.reshape(-1)
        coeffs[:, j] = flat @ sf / sf.size
    for i in range(n_t):
        for j, s in enumerate(basis):
            if coeffs[i, j] != 0.0:
                a[i] -= coeffs[i, j] * s
    return coeffs


def _dilated_statics(blocks: list[MikadoBlock], sigma: int) -> dict:
    """Materialize sigma-dilated block arrays and antidivergence images."""
    d = blocks[0].dim
    n = blocks[0].n_space
    op = sp.spatial_operator(d, n)
    phi_s, w_s, theta_tilde, means = [], [], [], []
    r_phi, r_theta, r_w = [], [], []
    for blk in blocks:
        dil = dilate_block(blk, sigma)
        phi = dil.density_array()
        w = dil.field_scalar_array()
        tt = phi * w
        m = float(tt.mean())  # exactly 1 by block normalization, up to roundoff
        tt -= m
        phi_s.append(phi)
        w_s.append(w)
        theta_tilde.append(tt)
        means.append(m)
        r_phi.append(op.antidivergence_slice(phi))
        r_theta.append(op.antidivergence_slice(tt))
        r_w.append(op.antidivergence_slice(w))
    return {
        "phi": phi_s,
        "w": w_s,
        "theta_tilde": theta_tilde,
        "m": means,
        "r_phi": r_phi,
        "r_theta": r_theta,
        "r_w": r_w,
    }


def build_perturbations(
    R_comps: list[np.ndarray],
    schedule: ParameterSchedule,
    blocks: list[MikadoBlock],
    oscillator: TemporalOscillator,
    cutoffs: CutoffFamily,
    keep_cutoffs: bool = True,
) -> PerturbationSet:
    """Assemble the perturbation pieces from cut coefficients and blocks.

    theta_p rides the dual (concentration-weighted) oscillator on the
    densities, w_p the plain oscillator on the fields; theta_c removes
    the spatial mean, w_c restores solenoidality through the bilinear
    antidivergence, and theta_o integrates the high temporal frequencies
    against the saw-tooth corrector.
    """
    d = schedule.d
    sigma = schedule.sigma
    if len(blocks) != d:
        raise ValueError("need one block per direction")
    for blk in blocks:
        if abs(blk.mu - schedule.mu) > 1e-12 or abs(blk.p - schedule.p) > 1e-12:
            raise ValueError("blocks built with a different (mu, p) than the schedule")
    if oscillator.sigma != sigma or oscillator.kappa != schedule.kappa:
        raise ValueError("oscillator built with a different (kappa, sigma)")
    n_t = R_comps[0].shape[0]
    if oscillator.n_time != n_t:
        raise ValueError("oscillator time lattice differs from the field lattice")
    n = R_comps[0].shape[-1]
    if n % sigma != 0:
        raise ResolutionError(f"sigma={sigma} must divide n_space={n}")

    A, B, alphas, totals = build_coefficients(R_comps, cutoffs, schedule)
    nothing = all(t == 0.0 for t in totals)
    statics = _dilated_statics(blocks, sigma)
    nu = schedule.nu
    tshape = (n_t,) + (1,) * d
    gd = oscillator.g_dual.reshape(tshape)
    g = oscillator.g.reshape(tshape)

    theta_p = np.zeros_like(R_comps[0])
    for k in range(d):
        theta_p += A[k] * statics["phi"][k]
    theta_p *= nu * gd
    nyq = project_out_nyquist(theta_p, d)
    theta_c = -theta_p.reshape(n_t, -1).mean(axis=1).reshape(tshape)

    # Y = sum_k m_k d_k(chi_k^2 R_k) = -sum_k m_k d_k(A_k B_k); the block
    # product means m_k are 1 up to roundoff and kept for exact algebra
    Y = np.zeros_like(R_comps[0])
    for k in range(d):
        Y -= statics["m"][k] * sp.axis_derivative(A[k] * B[k], k + 1)
    theta_o = oscillator.h_over_sigma.reshape(tshape) * Y

    w_p = []
    for k in range(d):
        w_p.append((nu ** -1.0) * g * (B[k] * statics["w"][k]))
    dB = [sp.axis_derivative(B[k], k + 1) for k in range(d)]
    w_c = bilinear_antidivergence_sum(dB, statics["w"], d, statics["r_w"])
    del dB
    for j in range(d):
        w_c[j] *= -(nu ** -1.0) * g

    return PerturbationSet(
        schedule=schedule,
        oscillator=oscillator,
        cutoff=cutoffs if keep_cutoffs else None,
        theta_p=theta_p,
        theta_c=theta_c,
        theta_o=theta_o,
        w_p=w_p,
        w_c=w_c,
        A=A,
        B=B,
        Y=Y,
        statics=statics,
        nothing_to_do=nothing,
    )
