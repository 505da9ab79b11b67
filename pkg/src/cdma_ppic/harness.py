"""Monte Carlo experiment driver: sweeps, BER/phase aggregation, CSV output.

An experiment sweeps (user count, code length) points.  Every frame gets fresh
random codes, fresh bits and a fresh channel draw; all enabled detectors see
the identical frame so their error rates are paired.  Randomness is derived
from ``(seed, point index, frame index)`` substreams, making every report
byte-for-byte reproducible and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .channels import FadingProcessState, ScenarioKind, ScenarioSpec, next_channel
from .detectors import (
    DetectorVariant,
    PpicConfig,
    StepSizeBank,
    conventional_detect,
    make_step_bank,
    run_ppic,
)
from .errors import ConfigurationError
from .signal_model import (
    NoiseModel,
    SymbolFrame,
    generate_codes,
    normalize_angle,
    synthesize_frame,
)

PI_OVER_8 = math.pi / 8.0

# multiplier ladder used when no bank is configured explicitly
DEFAULT_PLMS_MULTIPLIERS = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

BER_CSV_HEADER = "detector,M,N,stage,bits,errors,ber,ci95"
PHASE_CSV_HEADER = "detector,N,stage,mean_phase_rad,mean_phase_pi8,runs"


class DetectorKind(Enum):
    CONVENTIONAL = "conventional"
    MODIFIED_LMS_PPIC = "lms_ppic"
    MODIFIED_PLMS_PPIC = "plms_ppic"


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment run.

    The step-size bank for the PLMS detector is either a uniform partition of
    ``bank_size`` steps or an explicit multiplier ladder; the LMS detector
    always uses the single multiplier ``lms_multiplier``.  ``pinned_phase``
    holds (user index, radians) and forces that user's channel phase every
    symbol, which feeds the phase-estimate report.
    """

    user_counts: Tuple[int, ...] = (5, 10, 15, 20, 25)
    code_lengths: Tuple[int, ...] = (64, 256)
    snr_db: float = 0.0
    stages: int = 2
    bank_size: Optional[int] = None
    bank_multipliers: Optional[Tuple[float, ...]] = None
    lms_multiplier: float = 0.1
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec.balanced)
    frames_per_point: int = 100
    seed: int = 0
    detectors: Tuple[DetectorKind, ...] = (
        DetectorKind.CONVENTIONAL,
        DetectorKind.MODIFIED_LMS_PPIC,
        DetectorKind.MODIFIED_PLMS_PPIC,
    )
    pinned_phase: Optional[Tuple[int, float]] = None

    def __post_init__(self) -> None:
        if not self.user_counts or any(m < 1 for m in self.user_counts):
            raise ConfigurationError("user_counts must be a non-empty list of M >= 1")
        if not self.code_lengths or any(n < 1 for n in self.code_lengths):
            raise ConfigurationError("code_lengths must be a non-empty list of N >= 1")
        if self.frames_per_point < 1:
            raise ConfigurationError("frames_per_point must be >= 1")
        if self.stages < 1:
            raise ConfigurationError("stages must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must fit in 64 bits")
        if not self.detectors:
            raise ConfigurationError("at least one detector must be enabled")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigurationError("detector list contains duplicates")
        if self.bank_size is not None and self.bank_multipliers is not None:
            raise ConfigurationError("give bank_size or bank_multipliers, not both")
        if self.bank_size is not None and self.bank_size < 1:
            raise ConfigurationError("bank_size must be >= 1")
        if self.bank_multipliers is not None:
            mults = np.asarray(self.bank_multipliers, dtype=np.float64)
            if mults.size < 1 or np.any(mults <= 0.0) or np.any(mults > 1.0):
                raise ConfigurationError("bank_multipliers must lie in (0, 1]")
            if np.any(np.diff(mults) <= 0.0):
                raise ConfigurationError("bank_multipliers must be strictly increasing")
        if not 0.0 < self.lms_multiplier <= 1.0:
            raise ConfigurationError("lms_multiplier must lie in (0, 1]")
        if self.pinned_phase is not None:
            user, phase = self.pinned_phase
            if not 0 <= user < min(self.user_counts):
                raise ConfigurationError(
                    f"pinned user {user} is out of range for the smallest sweep point"
                )
            object.__setattr__(self, "pinned_phase", (int(user), normalize_angle(phase)))

    def plms_bank(self, n_users: int) -> StepSizeBank:
        if self.bank_size is not None:
            return make_step_bank(n_users, self.bank_size)
        multipliers = self.bank_multipliers or DEFAULT_PLMS_MULTIPLIERS
        return StepSizeBank.from_multipliers(n_users, multipliers)

    def lms_bank(self, n_users: int) -> StepSizeBank:
        return StepSizeBank.from_multipliers(n_users, (self.lms_multiplier,))


@dataclass(frozen=True)
class BerEntry:
    """Error counts for one (detector, M, N, stage) cell."""

    detector: DetectorKind
    n_users: int
    code_length: int
    stage: int
    bits_total: int
    bit_errors: int

    def __post_init__(self) -> None:
        if not 0 <= self.bit_errors <= self.bits_total:
            raise ConfigurationError("bit_errors must lie in [0, bits_total]")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total

    @property
    def ci95_half_width(self) -> float:
        """Normal-approximation 95% half-width of the error proportion."""
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits_total)


@dataclass(frozen=True)
class BerReport:
    entries: Tuple[BerEntry, ...]

    def find(self, detector: DetectorKind, n_users: int, code_length: int, stage: int) -> BerEntry:
        for entry in self.entries:
            if (
                entry.detector is detector
                and entry.n_users == n_users
                and entry.code_length == code_length
                and entry.stage == stage
            ):
                return entry
        raise KeyError(f"no entry for {detector.value}, M={n_users}, N={code_length}, stage={stage}")

    def final_stage(self, detector: DetectorKind, n_users: int, code_length: int) -> BerEntry:
        """Headline cell: the highest-stage entry for the detector at a sweep point."""
        candidates = [
            e
            for e in self.entries
            if e.detector is detector and e.n_users == n_users and e.code_length == code_length
        ]
        if not candidates:
            raise KeyError(f"no entries for {detector.value}, M={n_users}, N={code_length}")
        return max(candidates, key=lambda e: e.stage)


@dataclass(frozen=True)
class PhaseEntry:
    """Mean phase estimate of the pinned user for one (detector, N, stage) cell."""

    detector: DetectorKind
    code_length: int
    stage: int
    mean_phase_rad: float
    runs: int

    @property
    def mean_phase_pi8(self) -> float:
        return self.mean_phase_rad / PI_OVER_8


@dataclass(frozen=True)
class PhaseReport:
    entries: Tuple[PhaseEntry, ...]

    def find(self, detector: DetectorKind, code_length: int, stage: int) -> PhaseEntry:
        for entry in self.entries:
            if (
                entry.detector is detector
                and entry.code_length == code_length
                and entry.stage == stage
            ):
                return entry
        raise KeyError(f"no entry for {detector.value}, N={code_length}, stage={stage}")


def _detector_configs(config: ExperimentConfig, n_users: int) -> Dict[DetectorKind, PpicConfig]:
    configs: Dict[DetectorKind, PpicConfig] = {}
    for kind in config.detectors:
        if kind is DetectorKind.MODIFIED_LMS_PPIC:
            configs[kind] = PpicConfig(
                n_stages=config.stages,
                bank=config.lms_bank(n_users),
                variant=DetectorVariant.MODIFIED_LMS_PPIC,
            )
        elif kind is DetectorKind.MODIFIED_PLMS_PPIC:
            configs[kind] = PpicConfig(
                n_stages=config.stages,
                bank=config.plms_bank(n_users),
                variant=DetectorVariant.MODIFIED_PLMS_PPIC,
            )
    return configs


def run_experiment(config: ExperimentConfig) -> Tuple[BerReport, PhaseReport]:
    """Run the configured sweep and aggregate BER and phase-estimate statistics.

    Every enabled detector contributes one BER cell per stage it runs (stage 0
    is the conventional front end).  Phase cells are aggregated only when a
    pinned phase is configured; the mean is the circular mean of the per-run
    estimates, reduced to [0, 2*pi).
    """
    noise = NoiseModel.from_snr_db(config.snr_db)
    sweep = [(m, n) for m in config.user_counts for n in config.code_lengths]
    ber_entries: List[BerEntry] = []
    # (detector, N, stage) -> [sum of unit phasors, run count]
    phase_acc: Dict[Tuple[DetectorKind, int, int], List] = {}

    for point_index, (n_users, code_length) in enumerate(sweep):
        detector_configs = _detector_configs(config, n_users)
        channel_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(point_index, 0))
        )
        errors: Dict[Tuple[DetectorKind, int], int] = {}
        process_state: Optional[FadingProcessState] = None

        for frame_index in range(config.frames_per_point):
            frame_rng = np.random.default_rng(
                np.random.SeedSequence(config.seed, spawn_key=(point_index, 1 + frame_index))
            )
            codes = generate_codes(n_users, code_length, frame_rng)
            true_bits = SymbolFrame(bits=2 * frame_rng.integers(0, 2, size=n_users) - 1)
            draw_rng = (
                channel_rng
                if config.scenario.kind is ScenarioKind.RAYLEIGH_FADING
                else frame_rng
            )
            channel, process_state = next_channel(
                config.scenario,
                process_state,
                frame_index,
                n_users,
                draw_rng,
                code_length=code_length,
            )
            if config.pinned_phase is not None:
                channel = channel.with_pinned_phase(*config.pinned_phase)
            frame = synthesize_frame(true_bits, channel, codes, noise, frame_rng)
            quarters = channel.quarter_info

            conv_bits, conv_phases = conventional_detect(frame, codes, quarters)
            conv_errors = int(np.count_nonzero(conv_bits.bits != true_bits.bits))

            for kind in config.detectors:
                errors[kind, 0] = errors.get((kind, 0), 0) + conv_errors
                _record_phase(phase_acc, config, kind, code_length, 0, conv_phases)
                if kind is DetectorKind.CONVENTIONAL:
                    continue
                stages = run_ppic(frame, codes, quarters, detector_configs[kind])
                for stage in stages:
                    miss = int(np.count_nonzero(stage.bit_estimates.bits != true_bits.bits))
                    errors[kind, stage.stage_index] = (
                        errors.get((kind, stage.stage_index), 0) + miss
                    )
                    _record_phase(
                        phase_acc, config, kind, code_length, stage.stage_index,
                        stage.phase_estimates,
                    )

        bits_total = config.frames_per_point * n_users
        for kind in config.detectors:
            n_stages = 0 if kind is DetectorKind.CONVENTIONAL else config.stages
            for stage in range(n_stages + 1):
                ber_entries.append(
                    BerEntry(
                        detector=kind,
                        n_users=n_users,
                        code_length=code_length,
                        stage=stage,
                        bits_total=bits_total,
                        bit_errors=errors[kind, stage],
                    )
                )

    phase_entries = [
        PhaseEntry(
            detector=kind,
            code_length=code_length,
            stage=stage,
            mean_phase_rad=_circular_mean(acc[0]),
            runs=acc[1],
        )
        for (kind, code_length, stage), acc in phase_acc.items()
    ]
    return BerReport(entries=tuple(ber_entries)), PhaseReport(entries=tuple(phase_entries))


def _record_phase(
    phase_acc: Dict,
    config: ExperimentConfig,
    kind: DetectorKind,
    code_length: int,
    stage: int,
    phases: np.ndarray,
) -> None:
    if config.pinned_phase is None:
        return
    user = config.pinned_phase[0]
    acc = phase_acc.setdefault((kind, code_length, stage), [0j, 0])
    acc[0] += complex(np.exp(1j * phases[user]))
    acc[1] += 1


def _circular_mean(phasor_sum: complex) -> float:
    if phasor_sum == 0:
        return 0.0
    return normalize_angle(math.atan2(phasor_sum.imag, phasor_sum.real))


def emit_reports(
    reports: Tuple[BerReport, PhaseReport], out_dir: Union[str, Path]
) -> Tuple[Path, Path]:
    """Write ber.csv and phase.csv (UTF-8, LF, round-trip-exact floats)."""
    ber_report, phase_report = reports
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ber_path = out / "ber.csv"
    phase_path = out / "phase.csv"

    ber_lines = [BER_CSV_HEADER]
    for e in ber_report.entries:
        ber_lines.append(
            f"{e.detector.value},{e.n_users},{e.code_length},{e.stage},"
            f"{e.bits_total},{e.bit_errors},{e.ber!r},{e.ci95_half_width!r}"
        )
    phase_lines = [PHASE_CSV_HEADER]
    for p in phase_report.entries:
        phase_lines.append(
            f"{p.detector.value},{p.code_length},{p.stage},"
            f"{p.mean_phase_rad!r},{p.mean_phase_pi8!r},{p.runs}"
        )
    ber_path.write_text("\n".join(ber_lines) + "\n", encoding="utf-8", newline="\n")
    phase_path.write_text("\n".join(phase_lines) + "\n", encoding="utf-8", newline="\n")
    return ber_path, phase_path


# --- flat key=value configuration files -------------------------------------

_SCENARIO_TOKENS = {kind.value: kind for kind in ScenarioKind}
_DETECTOR_TOKENS = {kind.value: kind for kind in DetectorKind}


def _parse_int(text: str) -> int:
    return int(text.strip())

def _parse_float(text: str) -> float:
    return float(text.strip())

def _parse_int_list(text: str) -> Tuple[int, ...]:
    return tuple(_parse_int(tok) for tok in text.split(","))

def _parse_float_list(text: str) -> Tuple[float, ...]:
    return tuple(_parse_float(tok) for tok in text.split(","))


_CONFIG_KEYS = frozenset(
    {
        "user_counts", "code_lengths", "snr_db", "stages", "bank_size",
        "bank_multipliers", "lms_multiplier", "scenario", "gain_range",
        "doppler_hz", "tap_delays_s", "tap_gains_db", "chip_rate_hz",
        "frames_per_point", "seed", "detectors", "pin_phase_user",
        "pin_phase_rad",
    }
)


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat ``key = value`` experiment format (# starts a comment)."""
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    try:
        scenario_kwargs: dict = {}
        if "gain_range" in raw:
            pair = _parse_float_list(raw.pop("gain_range"))
            if len(pair) != 2:
                raise ConfigurationError("gain_range needs exactly two values")
            scenario_kwargs["gain_range"] = (pair[0], pair[1])
        if "doppler_hz" in raw:
            scenario_kwargs["doppler_hz"] = _parse_float(raw.pop("doppler_hz"))
        if "tap_delays_s" in raw:
            scenario_kwargs["tap_delays_s"] = _parse_float_list(raw.pop("tap_delays_s"))
        if "tap_gains_db" in raw:
            scenario_kwargs["tap_gains_db"] = _parse_float_list(raw.pop("tap_gains_db"))
        if "chip_rate_hz" in raw:
            scenario_kwargs["chip_rate_hz"] = _parse_float(raw.pop("chip_rate_hz"))
        kind_token = raw.pop("scenario", ScenarioKind.BALANCED.value)
        if kind_token not in _SCENARIO_TOKENS:
            raise ConfigurationError(
                f"unknown scenario {kind_token!r}; expected one of "
                f"{sorted(_SCENARIO_TOKENS)}"
            )
        scenario = ScenarioSpec(kind=_SCENARIO_TOKENS[kind_token], **scenario_kwargs)

        kwargs: dict = {"scenario": scenario}
        if "user_counts" in raw:
            kwargs["user_counts"] = _parse_int_list(raw.pop("user_counts"))
        if "code_lengths" in raw:
            kwargs["code_lengths"] = _parse_int_list(raw.pop("code_lengths"))
        if "snr_db" in raw:
            kwargs["snr_db"] = _parse_float(raw.pop("snr_db"))
        if "stages" in raw:
            kwargs["stages"] = _parse_int(raw.pop("stages"))
        if "bank_size" in raw:
            kwargs["bank_size"] = _parse_int(raw.pop("bank_size"))
        if "bank_multipliers" in raw:
            kwargs["bank_multipliers"] = _parse_float_list(raw.pop("bank_multipliers"))
        if "lms_multiplier" in raw:
            kwargs["lms_multiplier"] = _parse_float(raw.pop("lms_multiplier"))
        if "frames_per_point" in raw:
            kwargs["frames_per_point"] = _parse_int(raw.pop("frames_per_point"))
        if "seed" in raw:
            kwargs["seed"] = _parse_int(raw.pop("seed"))
        if "detectors" in raw:
            kwargs["detectors"] = parse_detector_list(raw.pop("detectors"))
        pin_user = raw.pop("pin_phase_user", None)
        pin_rad = raw.pop("pin_phase_rad", None)
        if (pin_user is None) != (pin_rad is None):
            raise ConfigurationError("pin_phase_user and pin_phase_rad must appear together")
        if pin_user is not None:
            kwargs["pinned_phase"] = (_parse_int(pin_user), _parse_float(pin_rad))
    except ValueError as exc:
        raise ConfigurationError(f"malformed configuration value: {exc}") from exc

    assert not raw, f"unconsumed keys: {sorted(raw)}"
    return ExperimentConfig(**kwargs)


def parse_detector_list(text: str) -> Tuple[DetectorKind, ...]:
    kinds = []
    for token in text.split(","):
        token = token.strip()
        if token not in _DETECTOR_TOKENS:
            raise ConfigurationError(
                f"unknown detector {token!r}; expected one of {sorted(_DETECTOR_TOKENS)}"
            )
        kinds.append(_DETECTOR_TOKENS[token])
    return tuple(kinds)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read an experiment configuration file; unknown keys are an error."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def override_config(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Apply non-None keyword overrides, revalidating the result."""
    filtered = {k: v for k, v in changes.items() if v is not None}
    scenario_kind = filtered.pop("scenario_kind", None)
    if scenario_kind is not None:
        filtered["scenario"] = replace(config.scenario, kind=scenario_kind)
    return replace(config, **filtered) if filtered else config
