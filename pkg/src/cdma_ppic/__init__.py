"""Synchronous baseband CDMA multiuser detection simulator.

Multistage partial parallel interference cancelation driven by a bank of NLMS
adaptive filters, with channel phases estimated simultaneously from
quarter-only side information, plus the conventional correlator baseline and
a Monte Carlo BER harness for balanced, unbalanced and Rayleigh-fading
channels.
"""

from .channels import (
    FadingProcessState,
    ScenarioKind,
    ScenarioSpec,
    next_channel,
    sos_tap_coefficients,
)
from .detectors import (
    DetectorVariant,
    PpicConfig,
    StageState,
    StepSizeBank,
    cancel_interference,
    conventional_detect,
    decide_bit,
    detect_with_channel,
    estimate_phase,
    make_step_bank,
    nlms_bank_run,
    run_ppic,
    run_stage,
    step_size_range,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    NumericError,
    SimulationError,
    UndefinedAngleError,
)
from .harness import (
    DEFAULT_PLMS_MULTIPLIERS,
    BerEntry,
    BerReport,
    DetectorKind,
    ExperimentConfig,
    PhaseEntry,
    PhaseReport,
    emit_reports,
    load_config,
    run_experiment,
)
from .signal_model import (
    ChannelState,
    NoiseModel,
    ReceivedFrame,
    SpreadingCodeSet,
    SymbolFrame,
    generate_codes,
    normalize_angle,
    quarter_midpoint,
    quarter_of,
    synthesize_frame,
)

__version__ = "0.1.0"
