"""convint: pseudospectral construction and verification of oscillatory
solutions to the continuity-defect equation on the periodic torus.

The package builds tube-supported stationary flows, temporally
intermittent oscillators, and the perturbation/defect algebra of a
convex-integration step, with every structural identity verifiable on
the lattice.
"""

from .fields import (
    GridSpec,
    ScalarField,
    VectorField,
    derivative,
    divergence,
    gradient,
    lebesgue_norm,
    mean,
    mixed_norm,
    rescale_periodic,
)
from .calculus import (
    antidivergence,
    bilinear_antidivergence,
    improved_holder_gap,
    oscillatory_mean,
    oscillatory_mean_bound,
)
from .mikado import (
    MikadoBlock,
    ProfilePair,
    block_norm_table,
    build_block,
    build_blocks,
    default_profile,
    placement,
)
from .temporal import TemporalOscillator, build_oscillator, default_time_profile, intermittency_table
from .perturbation import (
    CutoffFamily,
    ParameterSchedule,
    PerturbationSet,
    build_coefficients,
    build_cutoffs,
    build_perturbations,
    choose_parameters,
    support_margin,
)
from .defect import DefectBreakdown, assemble_defect, defect_norm_ledger, residual_check
from .driver import (
    NormLedger,
    RunConfig,
    SolutionTriple,
    init_from_target,
    iterate,
    run,
    theorem_preset_target,
)

__version__ = "0.1.0"
