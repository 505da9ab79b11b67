"""Per-symbol channel trajectories for the three experimental scenarios.

Balanced channels have unit gains and fresh uniform phases every symbol.
Unbalanced channels additionally attenuate each user by a gain drawn once per
run and held constant.  The Rayleigh scenario evolves a three-tap fading
channel per user with a Jakes-style sum-of-sinusoids process; the detector
models a single complex coefficient per user, so the taps are aligned on the
chip grid and summed into one composite coefficient whose magnitude is clamped
to the unit-gain model (clamp events are counted on the process state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DomainError
from .signal_model import TWO_PI, ChannelState, normalize_angle

# oscillators per user/tap in the sum-of-sinusoids generator
JAKES_OSCILLATORS = 16

_TINY_GAIN = np.finfo(np.float64).tiny


class ScenarioKind(Enum):
    BALANCED = "balanced"
    UNBALANCED = "unbalanced"
    RAYLEIGH_FADING = "fading"


@dataclass(frozen=True)
class ScenarioSpec:
    """Configuration of one channel scenario.

    The fading parameters (doppler_hz, tap_delays_s, tap_gains_db,
    chip_rate_hz) are only consulted when kind is RAYLEIGH_FADING; gain_range
    only when kind is UNBALANCED.
    """

    kind: ScenarioKind
    gain_range: Tuple[float, float] = (0.0, 0.3)
    doppler_hz: float = 40.0
    tap_delays_s: Tuple[float, ...] = (2e-6, 2.5e-6, 3e-6)
    tap_gains_db: Tuple[float, ...] = (-5.0, -3.0, -10.0)
    chip_rate_hz: float = 1e6

    def __post_init__(self) -> None:
        low, high = self.gain_range
        if not (0.0 <= low < high <= 1.0):
            raise ConfigurationError(f"gain_range must be a sub-interval of [0, 1], got {self.gain_range}")
        if len(self.tap_delays_s) != len(self.tap_gains_db) or not self.tap_delays_s:
            raise ConfigurationError("tap_delays_s and tap_gains_db must be non-empty and equally long")
        if any(b <= a for a, b in zip(self.tap_delays_s, self.tap_delays_s[1:])):
            raise ConfigurationError("tap_delays_s must be strictly increasing")
        if self.kind is ScenarioKind.RAYLEIGH_FADING:
            if not (self.doppler_hz > 0.0 and self.chip_rate_hz > 0.0):
                raise ConfigurationError("fading needs doppler_hz > 0 and chip_rate_hz > 0")

    @classmethod
    def balanced(cls) -> "ScenarioSpec":
        return cls(kind=ScenarioKind.BALANCED)

    @classmethod
    def unbalanced(cls, gain_range: Tuple[float, float] = (0.0, 0.3)) -> "ScenarioSpec":
        return cls(kind=ScenarioKind.UNBALANCED, gain_range=gain_range)

    @classmethod
    def rayleigh_fading(
        cls,
        doppler_hz: float = 40.0,
        tap_delays_s: Sequence[float] = (2e-6, 2.5e-6, 3e-6),
        tap_gains_db: Sequence[float] = (-5.0, -3.0, -10.0),
        chip_rate_hz: float = 1e6,
    ) -> "ScenarioSpec":
        return cls(
            kind=ScenarioKind.RAYLEIGH_FADING,
            doppler_hz=doppler_hz,
            tap_delays_s=tuple(tap_delays_s),
            tap_gains_db=tuple(tap_gains_db),
            chip_rate_hz=chip_rate_hz,
        )


@dataclass(frozen=True)
class FadingProcessState:
    """Run-scoped channel process state threaded between symbols.

    For the unbalanced scenario this pins the per-user gains drawn at symbol 0.
    For Rayleigh fading it holds the sum-of-sinusoids generator (per
    user/tap/oscillator Doppler angles and phases), the tap amplitudes and
    chip-grid delays, the symbol duration that maps symbol indices to time,
    the most recent per-user/per-tap coefficients, and a running count of
    magnitude clamp events.
    """

    kind: ScenarioKind
    fixed_gains: Optional[np.ndarray] = None
    oscillator_angles: Optional[np.ndarray] = None
    oscillator_phases: Optional[np.ndarray] = None
    tap_amplitudes: Optional[np.ndarray] = None
    tap_chip_delays: Optional[np.ndarray] = None
    symbol_duration_s: Optional[float] = None
    tap_coefficients: Optional[np.ndarray] = None
    clamp_count: int = 0


def _new_state(
    spec: ScenarioSpec, n_users: int, rng: np.random.Generator, code_length: Optional[int]
) -> FadingProcessState:
    if spec.kind is ScenarioKind.BALANCED:
        return FadingProcessState(kind=spec.kind)
    if spec.kind is ScenarioKind.UNBALANCED:
        low, high = spec.gain_range
        gains = rng.uniform(low, high, size=n_users)
        # a draw of exactly 0 would violate the 0 < gain model
        gains = np.maximum(gains, _TINY_GAIN)
        return FadingProcessState(kind=spec.kind, fixed_gains=gains)
    if code_length is None:
        raise ConfigurationError("Rayleigh fading needs code_length to derive the symbol duration")
    n_taps = len(spec.tap_delays_s)
    shape = (n_users, n_taps, JAKES_OSCILLATORS)
    return FadingProcessState(
        kind=spec.kind,
        oscillator_angles=rng.uniform(0.0, TWO_PI, size=shape),
        oscillator_phases=rng.uniform(0.0, TWO_PI, size=shape),
        tap_amplitudes=np.asarray([10.0 ** (g / 20.0) for g in spec.tap_gains_db]),
        tap_chip_delays=np.asarray(
            [math.floor(d * spec.chip_rate_hz + 0.5) for d in spec.tap_delays_s], dtype=np.int64
        ),
        symbol_duration_s=code_length / spec.chip_rate_hz,
    )


def sos_tap_coefficients(state: FadingProcessState, t: float, doppler_hz: float) -> np.ndarray:
    """Evaluate every user/tap sum-of-sinusoids coefficient at time t (seconds).

    Each tap is an equal-power sum of JAKES_OSCILLATORS complex oscillators at
    Doppler-spread frequencies, scaled so its mean power matches the
    configured tap gain.
    """
    omega = TWO_PI * doppler_hz
    args = omega * np.cos(state.oscillator_angles) * t + state.oscillator_phases
    per_tap = np.exp(1j * args).sum(axis=2) / math.sqrt(JAKES_OSCILLATORS)
    return state.tap_amplitudes[np.newaxis, :] * per_tap


def next_channel(
    spec: ScenarioSpec,
    prev: Optional[FadingProcessState],
    symbol_index: int,
    n_users: int,
    rng: np.random.Generator,
    code_length: Optional[int] = None,
) -> Tuple[ChannelState, FadingProcessState]:
    """Produce the channel state for one symbol and the carried-over process state.

    Parameters
    ----------
    spec : ScenarioSpec
        Scenario configuration.
    prev : FadingProcessState or None
        State returned for the previous symbol; None exactly at symbol 0.
        Balanced symbols are stateless, so prev may also be None there.
    symbol_index : int
        0-based symbol position inside the run; for fading it maps to time
        symbol_index * code_length / chip_rate_hz.
    n_users : int
        Number of users M.
    rng : numpy.random.Generator
        Source for phase/gain/oscillator draws.  Fading consumes it only at
        symbol 0, so later symbols are pure functions of the state.
    code_length : int, optional
        Chips per symbol; required at symbol 0 of a fading run.
    """
    if symbol_index < 0:
        raise DomainError(f"symbol_index must be >= 0, got {symbol_index}")
    if n_users < 1:
        raise DomainError(f"n_users must be >= 1, got {n_users}")

    if prev is None:
        if symbol_index > 0 and spec.kind is not ScenarioKind.BALANCED:
            raise ConfigurationError(
                f"{spec.kind.value} needs the previous process state for symbol_index > 0"
            )
        state = _new_state(spec, n_users, rng, code_length)
    else:
        if prev.kind is not spec.kind:
            raise ConfigurationError(
                f"process state belongs to scenario {prev.kind.value!r}, not {spec.kind.value!r}"
            )
        state = prev

    if spec.kind is ScenarioKind.BALANCED:
        phases = rng.uniform(0.0, TWO_PI, size=n_users)
        return ChannelState.from_phases(phases, np.ones(n_users)), state

    if spec.kind is ScenarioKind.UNBALANCED:
        if state.fixed_gains.size != n_users:
            raise ConfigurationError("process state was created for a different user count")
        phases = rng.uniform(0.0, TWO_PI, size=n_users)
        return ChannelState.from_phases(phases, state.fixed_gains), state

    t = symbol_index * state.symbol_duration_s
    taps = sos_tap_coefficients(state, t, spec.doppler_hz)
    composite = taps.sum(axis=1)
    magnitudes = np.abs(composite)
    clamped = int(np.count_nonzero(magnitudes > 1.0))
    gains = np.clip(magnitudes, _TINY_GAIN, 1.0)
    phases = np.array([normalize_angle(a) for a in np.angle(composite)])
    state = replace(state, tap_coefficients=taps, clamp_count=state.clamp_count + clamped)
    return ChannelState.from_phases(phases, gains), state
