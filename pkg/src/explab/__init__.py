"""Numerical laboratory for the exponential family f(z) = lambda * exp(z)."""

from explab.classify import (
    CycleInfo, CycleNotFound, DerivativeSingular, NoConvergence, ParamClass, Verdict,
    classify_parameter, detect_attracting_cycle, is_delta_nonrecurrent, newton_refine_cycle,
)
from explab.derivatives import (
    DerivativeLedger, DisagreementError, LevinEstimate, NoExpansionFound, ScaledComplex,
    build_ledger, expansion_constants, levin_estimate, param_derivative, transversality_ratio,
)
from explab.hyperbolic import (
    CertificationFailure, DiskEnclosure, HyperbolicWitness, NotFound, OverflowEnclosure,
    RouteOverflow, TargetRoute, TrapCertificate, build_route, certify_disk_contraction,
    find_hyperbolic_near, propagate_disk, solve_singular_target,
)
from explab.measure import DensityReport, density_scan, escaping_density
from explab.motion import (
    BranchAmbiguity, BudgetExceeded, DistortionStats, EscapeDuringTracking, MotionTrack,
    distortion_report, time_to_scale, track_point, verify_conjugacy,
)
from explab.orbit import (
    EscapePolicy, EscapeSignal, OrbitPoint, OrbitRecord, Param, ParamError, block_orbit,
    full_orbit, inverse_step, singular_orbit, step,
)
from explab.render import ImageBuffer, Palette, ViewRect, render_dynamical_plane, render_parameter_plane, write_ppm

__version__ = "0.1.0"
