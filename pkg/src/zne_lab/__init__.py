"""Zero-noise extrapolation by identity insertion, with an exact
density-matrix simulator and multi-device execution studies."""
from .circuit import (
    CNOT,
    Circuit,
    CircuitError,
    OneQubitUnitary,
    append_gate,
    cnot_positions,
    generate_alternating_pair_chain,
    generate_cnot_chain,
    new_circuit,
)
from .noise import (
    BitValue,
    IntegrityError,
    NoiseModel,
    TargetProbability,
    apply_amplitude_damping,
    apply_depolarizing_2q,
    apply_gate_ideal,
    exact_expectation,
    expectation,
    leading_order_expectation,
    probabilities,
    simulate,
)
from .insertion import (
    MitigationPlan,
    PlanEntry,
    PlanError,
    deepen,
    fiim_plan,
    fold,
    liim_fiim_plan,
    liim_riim_plan,
    make_plan,
    richardson_coefficients,
    riim_plan,
    siim_plan,
    unmitigated_plan,
)
from .estimator import (
    Estimate,
    ShotBudget,
    ShotResult,
    allocate_shots,
    combine,
    estimate_observable,
    run_plan,
    sample,
)
from .ensemble import (
    DeviceEnsemble,
    DeviceProfile,
    JobLimits,
    additional_error,
    batch_jobs,
    load_device_profiles,
    noise_model_of,
    run_replicated,
    run_sharded,
    sample_normal_profiles,
)

__version__ = "0.1.0"
