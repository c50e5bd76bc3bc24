from .astrocyte import (
    AstrocyteGroup,
    AstrocyteInstance,
    AstrocytePrototype,
    ConnectionMask,
    astrocyte_step,
    connect_inputs,
    connect_outputs,
    create_astrocyte,
)
from .chaos import (
    ChaosMonitorConfig,
    RateEstimates,
    WaveFrequencyReport,
    f_astro_reference,
    f_astro_weighted_sum,
    measure_wave_frequency,
    run_activity,
    train_bhp,
)
from .config import ExperimentConfig, PatternSet, load_experiment_config, parse_experiment_config
from .errors import ClassificationError, ConfigError, EmptyTableError, SnanError, WiringError
from .experiments import (
    SummaryReport,
    register_experiment,
    run_chaos,
    run_experiment,
    run_group_sync,
    run_memory,
    run_sync,
)
from .ising import (
    CouplingSpec,
    IsingLattice,
    classify_states,
    init_lattice,
    mcmc_sweep,
    spins_to_spikes,
    downsample,
    susceptibility,
)
from .network import Network, read_spikes_csv, step_network
from .outputs import emit_outputs
from .plasticity import (
    BhpParams,
    BhpState,
    CombinedRule,
    HsdParams,
    LearningRule,
    RewardChannel,
    StdpParams,
    StdpRule,
    TraceProductRule,
    TraceSet,
    apply_rule,
    bhp_step,
)
from .sic_table import SicConfigRow, SicConfigTable, build_sic_table, lookup_sic_config
from .substrate import (
    CompartmentConfig,
    CompartmentState,
    PoissonSource,
    SpikeEvent,
    Synapse,
    Trace,
    poisson_spike,
    step_compartment,
    update_trace,
)

__all__ = [
    "AstrocyteGroup",
    "AstrocyteInstance",
    "AstrocytePrototype",
    "ConnectionMask",
    "astrocyte_step",
    "connect_inputs",
    "connect_outputs",
    "create_astrocyte",
    "ChaosMonitorConfig",
    "RateEstimates",
    "WaveFrequencyReport",
    "f_astro_reference",
    "f_astro_weighted_sum",
    "measure_wave_frequency",
    "run_activity",
    "train_bhp",
    "ExperimentConfig",
    "PatternSet",
    "load_experiment_config",
    "parse_experiment_config",
    "ClassificationError",
    "ConfigError",
    "EmptyTableError",
    "SnanError",
    "WiringError",
    "SummaryReport",
    "register_experiment",
    "run_chaos",
    "run_experiment",
    "run_group_sync",
    "run_memory",
    "run_sync",
    "CouplingSpec",
    "IsingLattice",
    "classify_states",
    "init_lattice",
    "mcmc_sweep",
    "spins_to_spikes",
    "downsample",
    "susceptibility",
    "Network",
    "read_spikes_csv",
    "step_network",
    "emit_outputs",
    "BhpParams",
    "BhpState",
    "CombinedRule",
    "HsdParams",
    "LearningRule",
    "RewardChannel",
    "StdpParams",
    "StdpRule",
    "TraceProductRule",
    "TraceSet",
    "apply_rule",
    "bhp_step",
    "SicConfigRow",
    "SicConfigTable",
    "build_sic_table",
    "lookup_sic_config",
    "CompartmentConfig",
    "CompartmentState",
    "PoissonSource",
    "SpikeEvent",
    "Synapse",
    "Trace",
    "poisson_spike",
    "step_compartment",
    "update_trace",
]
