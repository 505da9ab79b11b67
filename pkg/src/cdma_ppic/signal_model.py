"""Baseband signal model for a synchronous CDMA uplink.

Each of the M users spreads one antipodal symbol over an N-chip +/-1 code and
all users transmit simultaneously through flat channels, so one received frame
is N complex chip-rate samples

    r(n) = sum_m gain_m * bit_m * exp(j*phase_m) * code_m(n) + v(n)

with v(n) circularly symmetric complex Gaussian noise.  The receiver's only
phase side information is which quarter of [0, 2*pi) each channel phase
occupies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpreadingCodeSet:
    """Per-user +/-1 chip sequences, one row per user."""

    codes: np.ndarray

    def __post_init__(self) -> None:
        codes = np.array(self.codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 1:
            raise DimensionError(
                f"codes must be a non-empty 2-D matrix, got shape {codes.shape}"
            )
        if not np.all(np.abs(codes) == 1):
            raise DomainError("every chip must be exactly -1 or +1")
        object.__setattr__(self, "codes", _frozen(codes))

    @property
    def n_users(self) -> int:
        return self.codes.shape[0]

    @property
    def code_length(self) -> int:
        return self.codes.shape[1]


@dataclass(frozen=True)
class SymbolFrame:
    """One antipodal symbol per user."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=np.int64)
        if bits.ndim != 1 or bits.size < 1:
            raise DimensionError(f"bits must be a non-empty vector, got shape {bits.shape}")
        if not np.all(np.abs(bits) == 1):
            raise DomainError("every symbol must be exactly -1 or +1")
        object.__setattr__(self, "bits", _frozen(bits))

    @property
    def n_users(self) -> int:
        return self.bits.size


@dataclass(frozen=True)
class ChannelState:
    """Per-user channel phase, amplitude gain, and phase-quarter side information.

    ``quarter_info[m]`` always equals ``quarter_of(phases[m])``; build instances
    through :meth:`from_phases` unless the quarters are already consistent.
    """

    phases: np.ndarray
    gains: np.ndarray
    quarter_info: np.ndarray

    def __post_init__(self) -> None:
        phases = np.array(self.phases, dtype=np.float64)
        gains = np.array(self.gains, dtype=np.float64)
        quarters = np.array(self.quarter_info, dtype=np.int64)
        if not (phases.ndim == gains.ndim == quarters.ndim == 1):
            raise DimensionError("phases, gains and quarter_info must be vectors")
        if not (phases.size == gains.size == quarters.size) or phases.size < 1:
            raise DimensionError("phases, gains and quarter_info must share one length")
        if np.any(phases < 0.0) or np.any(phases >= TWO_PI):
            raise DomainError("phases must lie in [0, 2*pi)")
        if np.any(gains <= 0.0) or np.any(gains > 1.0):
            raise DomainError("gains must lie in (0, 1]")
        expected = np.array([quarter_of(p) for p in phases], dtype=np.int64)
        if not np.array_equal(quarters, expected):
            raise DomainError("quarter_info is inconsistent with phases")
        object.__setattr__(self, "phases", _frozen(phases))
        object.__setattr__(self, "gains", _frozen(gains))
        object.__setattr__(self, "quarter_info", _frozen(quarters))

    @classmethod
    def from_phases(cls, phases: np.ndarray, gains: np.ndarray) -> "ChannelState":
        """Build a state with the quarter information derived from the phases."""
        phases = np.asarray(phases, dtype=np.float64)
        quarters = np.array([quarter_of(p) for p in phases], dtype=np.int64)
        return cls(phases=phases, gains=np.asarray(gains, dtype=np.float64), quarter_info=quarters)

    @property
    def n_users(self) -> int:
        return self.phases.size

    def with_pinned_phase(self, user: int, phase: float) -> "ChannelState":
        """Return a copy with one user's phase overridden (quarter recomputed)."""
        if not 0 <= user < self.n_users:
            raise DomainError(f"user index {user} out of range for {self.n_users} users")
        phases = np.array(self.phases)
        phases[user] = normalize_angle(phase)
        return ChannelState.from_phases(phases, self.gains)


@dataclass(frozen=True)
class ReceivedFrame:
    """N complex chip-rate samples observed during one symbol interval."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size < 1:
            raise DimensionError(f"samples must be a non-empty vector, got shape {samples.shape}")
        object.__setattr__(self, "samples", _frozen(samples))

    @property
    def code_length(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class NoiseModel:
    """Complex AWGN level, tied to the per-user per-chip SNR convention.

    Unit signal power per user makes sigma2 = 10**(-snr_db/10); the total
    variance sigma2 is split evenly between the real and imaginary parts.
    """

    sigma2: float
    snr_db: float

    def __post_init__(self) -> None:
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise DomainError("sigma2 must be positive and finite")
        expected = 10.0 ** (-self.snr_db / 10.0)
        if not math.isclose(self.sigma2, expected, rel_tol=1e-9):
            raise DomainError(
                f"sigma2={self.sigma2} disagrees with snr_db={self.snr_db} "
                f"(expected {expected})"
            )

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseModel":
        return cls(sigma2=10.0 ** (-snr_db / 10.0), snr_db=snr_db)


def generate_codes(n_users: int, code_length: int, rng: np.random.Generator) -> SpreadingCodeSet:
    """Draw independent equiprobable +/-1 chips for every user.

    Deterministic for a given generator state.
    """
    if n_users < 1 or code_length < 1:
        raise DimensionError(
            f"need at least one user and one chip, got n_users={n_users}, "
            f"code_length={code_length}"
        )
    chips = 2 * rng.integers(0, 2, size=(n_users, code_length), dtype=np.int64) - 1
    return SpreadingCodeSet(codes=chips)


def normalize_angle(theta: float) -> float:
    """Reduce an angle modulo 2*pi into [0, 2*pi)."""
    if not math.isfinite(theta):
        raise DomainError(f"angle must be finite, got {theta}")
    reduced = theta % TWO_PI
    # float wrap-around: tiny negative inputs can reduce to exactly 2*pi
    if reduced >= TWO_PI:
        reduced = 0.0
    return reduced


def quarter_of(phase: float) -> int:
    """Index (1..4) of the quarter of [0, 2*pi) that contains the phase.

    Quarters are half-open: [(i-1)*pi/2, i*pi/2), so boundary angles belong
    to the upper quarter.
    """
    if not (0.0 <= phase < TWO_PI):
        raise DomainError(f"phase must lie in [0, 2*pi), got {phase}")
    return min(int(phase // HALF_PI) + 1, 4)


def quarter_midpoint(quarter: int) -> float:
    """Midpoint angle (2*i - 1)*pi/4 of quarter i."""
    if quarter not in (1, 2, 3, 4):
        raise DomainError(f"quarter index must be 1..4, got {quarter}")
    return (2 * quarter - 1) * math.pi / 4.0


def synthesize_frame(
    bits: SymbolFrame,
    channel: ChannelState,
    codes: SpreadingCodeSet,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> ReceivedFrame:
    """Superpose every user's spread symbol through its flat channel and add AWGN."""
    n_users = codes.n_users
    if bits.n_users != n_users or channel.n_users != n_users:
        raise DimensionError(
            f"user counts disagree: codes={n_users}, bits={bits.n_users}, "
            f"channel={channel.n_users}"
        )
    coeff = channel.gains * bits.bits * np.exp(1j * channel.phases)
    clean = coeff @ codes.codes
    scale = math.sqrt(noise.sigma2 / 2.0)
    awgn = scale * (
        rng.standard_normal(codes.code_length) + 1j * rng.standard_normal(codes.code_length)
    )
    return ReceivedFrame(samples=clean + awgn)
