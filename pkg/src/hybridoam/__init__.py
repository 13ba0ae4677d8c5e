"""Numerical simulator of a hybrid polarization-OAM entanglement bench.

Builds the two-photon polarization singlet, transfers one qubit onto the
+/-2 orbital-angular-momentum subspace through modeled optical elements,
simulates Poissonian coincidence counting, and runs the analysis chain:
state tomography with maximum-likelihood refinement, fringe visibility,
CHSH, and the coincidence-rate budget.
"""

__version__ = "0.1.0"

from .states import (
    ATOL,
    OAM_FULL,
    OAM_FUNDAMENTAL,
    OAM_O2,
    POLARIZATION,
    BasisLabel,
    DegenerateInputError,
    DensityMatrix,
    InvalidLabelError,
    StateVector,
    basis_ket,
    density_from_ket,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    project_to_physical,
    tensor,
)
from .elements import (
    DETERMINISTIC,
    PROBABILISTIC,
    DomainError,
    OpticalMap,
    apply,
    half_waveplate,
    polarizer,
    qplate,
    quarter_waveplate,
    smf_filter,
    success_probability,
    transferrer_o2_to_pi,
    transferrer_pi_to_o2,
)
from .source import (
    O2_FRAME_ALIGNMENT,
    REFERENCE_CONCURRENCE,
    REFERENCE_FIDELITY,
    REFERENCE_LINEAR_ENTROPY,
    NoiseModel,
    apply_noise,
    fit_noise_model,
    hybrid_singlet,
    hybrid_singlet_ket,
    hybrid_state,
    noise_fit_report,
    noise_preset,
    prepare_hybrid,
    singlet,
    singlet_ket,
)
from .measurement import (
    CountRecord,
    ExpectedCountRecord,
    FitFailureError,
    MeasurementSetting,
    exact_counts,
    expected_counts,
    fit_fringe,
    fringe_scan,
    fringe_scan_records,
    joint_probability,
    read_counts_csv,
    setting_from_labels,
    setting_stream_seed,
    simulate_counts,
    visibility_minmax,
    write_counts_csv,
)
from .tomography import (
    InsufficientDataError,
    MLEResult,
    StateMetrics,
    TomographyRun,
    concurrence,
    fidelity,
    linear_entropy,
    linear_inversion,
    log_likelihood,
    metric_uncertainties,
    mle_reconstruct,
    reconstruct,
    simulate_tomography,
    tomography_settings,
    trace_distance,
)
from .bell import (
    ChshResult,
    DichotomicObservable,
    UndefinedCorrelationError,
    chsh_empirical,
    chsh_exact,
    chsh_settings,
    correlation,
    correlation_from_counts,
    observable_from_kets,
    observable_from_labels,
    predicted_s,
)
from .budget import (
    DEFAULT_OBSERVED_RATE_CPS,
    RateBudget,
    budget_report,
    det_probability,
    expected_rate,
    format_report,
    prep_probability,
    upgraded_budget,
)
