"""Assembly of the new defect field and residual verification.

The new defect splits into six pieces: spatial and temporal oscillation
errors, the cutoff remainder, the time-derivative (temporal) error, and
the linear and corrector products.  Each piece is computed from its
defining divergence equation in a form whose lattice divergence identity
holds to machine precision, so the assembled field solves the
continuity-defect equation up to floating-point roundoff plus the
(reported) high-frequency content the grid cannot represent.

Space-time fields at production grids run ~10^2 MB each and the whole
assembly must fit in a few GB, so the stages are ordered to touch each
large array as briefly as possible and `release_inputs` lets the
assembly consume the perturbation's coefficient fields in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _spectral as sp
from .calculus import bilinear_antidivergence_sum
from .perturbation import PerturbationSet

__all__ = ["DefectBreakdown", "assemble_defect", "residual_check", "defect_norm_ledger"]

PIECES = ("osc_x", "osc_t", "rem", "tem", "lin", "cor")


@dataclass
class DefectBreakdown:
    """Six defect pieces, their total, L^1 norms, and identity residuals."""

    R_total: list
    norms: dict
    identity_residuals: dict = field(default_factory=dict)
    pieces: dict | None = None
    resolving_ratio: dict | None = None

    def piece_norm(self, name: str) -> float:
        return self.norms[name]


def _l1(comps: list[np.ndarray]) -> float:
    mag2 = comps[0] ** 2
    for c in comps[1:]:
        mag2 += c**2
    np.sqrt(mag2, out=mag2)
    return float(np.mean(mag2))


def _l2(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a**2)))


def residual_check(rho: np.ndarray, u_comps, R_comps, dim: int | None = None) -> float:
    """Relative residual of d_t rho + div(rho u) = div R.

    Spectral derivatives on the raw lattice samples; the product rho*u is
    formed pointwise (no truncation) so the measured value reflects the
    construction error rather than a dealiasing difference.  Normalized
    by the sum of the three term norms.
    """
    d = dim if dim is not None else rho.ndim - 1
    acc = sp.axis_derivative(rho, 0)
    n_dt = _l2(acc)
    n_div = 0.0
    if u_comps is not None:
        div_ru = sp.spatial_divergence([rho * u for u in u_comps], d)
        n_div = _l2(div_ru)
        acc += div_ru
        del div_ru
    divR = sp.spatial_divergence(list(R_comps), d)
    n_R = _l2(divR)
    acc -= divR
    del divR
    denom = n_dt + n_div + n_R + np.finfo(np.float64).eps
    return _l2(acc) / denom


def _relative(num: float, *scales: float) -> float:
    return num / (sum(scales) + np.finfo(np.float64).eps)


def assemble_defect(
    prev_rho: np.ndarray,
    prev_u: list | None,
    prev_R: list,
    pert: PerturbationSet,
    keep_pieces: bool = True,
    check_identities: bool = True,
    release_inputs: bool = False,
) -> DefectBreakdown:
    """Compute the six defect pieces for the perturbed solution.

    prev_u may be None for an exactly zero previous vector field.  With
    keep_pieces=False only norms and the running total are retained, and
    release_inputs=True lets the assembly null out the perturbation's
    coefficient fields once they are no longer needed.
    """
    sched = pert.schedule
    d = sched.d
    osc = pert.oscillator
    n_t = prev_rho.shape[0]
    if prev_R[0].shape != pert.theta_p.shape:
        raise ValueError("perturbation built on a different grid than the triple")
    tshape = (n_t,) + (1,) * d
    gd = osc.g_dual.reshape(tshape)
    prod = osc.product()
    c_g = float(prod.mean())  # exactly 1 by oscillator normalization
    P = (prod - c_g).reshape(tshape)
    nu = sched.nu

    norms: dict[str, float] = {}
    ids: dict[str, float] = {}
    pieces: dict[str, list] = {}
    total = [np.zeros_like(prev_rho) for _ in range(d)]

    def commit(name: str, comps: list):
        norms[name] = _l1(comps)
        for j in range(d):
            total[j] += comps[j]
        if keep_pieces:
            pieces[name] = comps

    # --- temporal error: div R_tem = d_t(theta_p + theta_c) exactly
    V = bilinear_antidivergence_sum(
        pert.A, pert.statics["phi"], d, pert.statics["r_phi"]
    )
    # ledger split: oscillator-derivative part; the coefficient part is
    # the exact complement, so split-vs-direct is an identity
    dgd = sp.axis_derivative(osc.g_dual, 0).reshape(tshape)
    norms["tem_split_deriv"] = _l1([nu * dgd * V[j] for j in range(d)])
    del dgd
    for j in range(d):
        V[j] *= nu * gd
    R_tem = [sp.axis_derivative(V[j], 0) for j in range(d)]
    del V
    if check_identities:
        lhs = sp.axis_derivative(pert.theta_p + pert.theta_c, 0)
        rhs = sp.spatial_divergence(R_tem, d)
        n_l, n_r = _l2(lhs), _l2(rhs)
        lhs -= rhs
        del rhs
        ids["temporal"] = _relative(_l2(lhs), n_l, n_r)
        del lhs
    commit("tem", R_tem)
    del R_tem

    # --- oscillation error in space
    AB = [pert.A[k] * pert.B[k] for k in range(d)]
    if release_inputs:
        pert.A = pert.B = None
    m_k = pert.statics["m"]
    dAB = [sp.axis_derivative(AB[k], k + 1) for k in range(d)]
    R_osc_x = bilinear_antidivergence_sum(
        dAB, pert.statics["theta_tilde"], d, pert.statics["r_theta"]
    )
    del dAB
    gg = prod.reshape(tshape)
    for j in range(d):
        R_osc_x[j] *= gg

    # --- remainder
    R_rem = [prev_R[k] + (c_g * m_k[k]) * AB[k] for k in range(d)]

    if check_identities:
        # space-time oscillation split:
        # div(theta_p w_p + R) = div(osc_x + hi_t + rem)
        lhs = sp.spatial_divergence(
            [pert.theta_p * pert.w_p[j] + prev_R[j] for j in range(d)], d
        )
        rhs = sp.spatial_divergence(
            [R_osc_x[j] + P * (m_k[j] * AB[j]) + R_rem[j] for j in range(d)], d
        )
        n_l, n_r = _l2(lhs), _l2(rhs)
        lhs -= rhs
        del rhs
        ids["oscillation_space"] = _relative(_l2(lhs), n_l, n_r)
        del lhs

    # --- oscillation error in time, from its defining divergence equation
    # div R_osc_t = d_t theta_o - P*Y; equals h R(d_t Y) in exact arithmetic
    src = sp.axis_derivative(pert.theta_o, 0)
    src -= P * pert.Y
    R_osc_t = sp.spatial_antidivergence(src, d)
    del src
    if check_identities:
        # temporal cancellation: d_t theta_o + div hi_t = div osc_t
        acc = sp.axis_derivative(pert.theta_o, 0)
        n_a = _l2(acc)
        div_hi = sp.spatial_divergence([P * (m_k[k] * AB[k]) for k in range(d)], d)
        n_h = _l2(div_hi)
        acc += div_hi
        del div_hi
        div_ot = sp.spatial_divergence(R_osc_t, d)
        n_o = _l2(div_ot)
        acc -= div_ot
        del div_ot
        ids["oscillation_time"] = _relative(_l2(acc), n_a, n_h, n_o)
        del acc
    del AB
    if release_inputs:
        pert.Y = None

    commit("osc_x", R_osc_x)
    del R_osc_x
    commit("osc_t", R_osc_t)
    del R_osc_t
    commit("rem", R_rem)
    del R_rem

    # --- linear and corrector products
    theta = pert.theta_total()
    if release_inputs:
        pert.theta_p = None
    R_lin = []
    for j in range(d):
        comp = prev_rho * (pert.w_p[j] + pert.w_c[j])
        if prev_u is not None:
            comp += theta * prev_u[j]
        R_lin.append(comp)
    commit("lin", R_lin)
    del R_lin
    oc = pert.theta_o + pert.theta_c
    R_cor = [theta * pert.w_c[j] + oc * pert.w_p[j] for j in range(d)]
    commit("cor", R_cor)
    del R_cor, oc, theta

    norms["total"] = _l1(total)
    res_ratio = {
        "space": prev_rho.shape[-1] / (4.0 * sched.sigma * sched.mu),
        "time": n_t / (8.0 * sched.sigma * max(sched.kappa, 1)),
    }
    return DefectBreakdown(
        R_total=total,
        norms=norms,
        identity_residuals=ids,
        pieces=pieces if keep_pieces else None,
        resolving_ratio=res_ratio,
    )


def defect_norm_ledger(breakdown: DefectBreakdown, params: dict | None = None) -> list[dict]:
    """One row per defect piece plus the total."""
    rows = []
    for name in PIECES + ("total",):
        row = {"name": f"defect_{name}", "value": breakdown.norms[name]}
        if params:
            row.update(params)
        rows.append(row)
    return rows
