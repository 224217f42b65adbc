"""kfplab: solver and verification laboratory for a nonlocal kinetic
Fokker-Planck equation with integral collision kernels.

Subpackages cover phase-space discretization (:mod:`kfplab.phase`),
Fourier-multiplier and mollifier calculus (:mod:`kfplab.fracops`), the
singular collision kernel and its quadratic forms (:mod:`kfplab.kernel`),
the soft radial cutoff ladder (:mod:`kfplab.cutoffs`), the kinetic stepper
(:mod:`kfplab.solver`), regularity diagnostics (:mod:`kfplab.diagnostics`),
kinetic scaling/translation (:mod:`kfplab.kinetic_scaling`), and propagation
cone geometry (:mod:`kfplab.conegeom`).
"""

from kfplab.phase import (
    Field,
    PhaseGrid,
    Region,
    gagliardo_seminorm,
    hs_norm_v,
    level_set_measure,
    load_field,
    lp_norm,
    make_grid,
    sample_field,
    save_field,
    velocity_average,
)
from kfplab.fracops import (
    Mollifier,
    MultiplierOp,
    apply_multiplier,
    bessel_pow,
    lambda_pow,
    mollifier_rate,
    mollify,
)
from kfplab.kernel import (
    Kernel,
    apply_L,
    bilinear_B,
    collision_generator,
    cross_term,
    spectral_constant,
    validate_bounds,
)
from kfplab.cutoffs import (
    CutoffFamily,
    build_cutoff_family,
    check_properties,
    epsilon0,
    level_cutoff,
    psi_collision,
    scaling_gap,
)
from kfplab.solver import (
    RunConfig,
    Trajectory,
    config_hash,
    plan_config,
    run,
    stability_limit,
    step,
    weak_residual,
)
from kfplab.diagnostics import (
    AveragingReport,
    DG2Report,
    EnergyReport,
    ExponentTable,
    LevelReport,
    UniversalConstants,
    averaging_check,
    degiorgi_levels,
    dg2_measures,
    energy_report,
    exponents,
    gamma_crossing,
    reports_csv,
    save_json,
    transport_apply,
)
from kfplab.kinetic_scaling import (
    KineticCylinder,
    OscillationProfile,
    ScaledKernel,
    ScalingParams,
    oscillation_profile,
    oscillation_profiles,
    scale_field,
    scale_kernel,
    scale_source,
    translate_field,
)
from kfplab.configio import (
    SCHEMA_VERSION,
    ConfigError,
    build_initial,
    build_run_config,
    build_source,
    default_config,
    load_config,
    resolve_config,
    save_config,
)
from kfplab.conegeom import (
    ConeProblem,
    ConeReport,
    IndicatorGrid,
    SpaceTimeBox,
    certify_segments,
    cone_bounds,
    cone_measure_check,
    cross_section_area,
    cross_section_profile,
    line_fit_r2,
    load_problem,
    random_cone_instance,
    ray_hits_base,
    reports_to_csv,
    segment_measure,
)

__version__ = "0.1.0"
