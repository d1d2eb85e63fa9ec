"""Entanglement distillation as renormalisation of Bell-diagonal MPOs."""

from .channels import (
    AscentResult,
    ChannelMatrix,
    apply,
    dual,
    ergodicity,
    fundamental_channel,
    norm_1to1_general,
    norm_1to1_positive,
    perron_left,
    steady_state,
)
from .exceptions import (
    ConstructionError,
    DegenerateSpectrumError,
    DegenerateStateError,
    DimensionMismatchError,
    GaugeFailureError,
    MPODistillError,
    NumericalInconsistencyError,
    SingularFundamentalError,
    SingularPerronError,
)
from .flowbounds import (
    BoundState,
    analytic_threshold,
    converges,
    five_qubit_bound_step,
    recurrence_bound_step,
    region_scan,
    speed_bound,
)
from .mpo import (
    BellMPO,
    GaugeResult,
    GaugeTag,
    canonical_gauge,
    contract_trace,
    epsilon,
    fidelity,
    fidelity_infinite,
    local_infidelity,
    string_probability,
    tau_A,
    transfer,
)
from .physmodel import PhysicalParams, build_memory_mpo, dephasing_channel, heisenberg_unitary, relative_noise
from .protocols import (
    ComputationalMPO,
    FlowTrace,
    PatternClassification,
    Protocol,
    bell_from_computational,
    build_pattern_tables,
    computational_from_bell,
    computational_step,
    distill_flow,
    five_qubit_step,
    recurrence_double_step,
    recurrence_single_step,
    success_probability,
)

__version__ = "0.1.0"
