"""Multiuser detectors: conventional correlator and multistage PPIC.

The adaptive detector reformulates the received frame as r(n) = W^T X(n) + v(n)
where X(n) stacks every user's previous-stage bit estimate times its chip and
the ideal weight entries are unit-magnitude phasors carrying the channel
phases.  Each stage therefore

1. runs a bank of NLMS recursions with different step sizes over the frame,
   keeping at every chip the candidate whose weight magnitudes are closest to
   one (``nlms_bank_run``),
2. turns each converged weight into a phase estimate confined to the known
   quarter of the true channel phase (``estimate_phase``),
3. subtracts every other user's weighted regenerated signal from the frame and
   re-decides each bit by a phase-corrected correlator (``cancel_interference``
   + ``decide_bit``).

Stage 0 is the conventional detector, which correlates against the quarter
midpoint phase.  With a single-entry bank the algorithm degenerates to one
plain NLMS recursion (the LMS-PPIC variant).

Weight, regressor and phase vectors are plain numpy arrays ordered by user.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DimensionError, DomainError, NumericError, UndefinedAngleError
from .signal_model import (
    ChannelState,
    ReceivedFrame,
    SpreadingCodeSet,
    SymbolFrame,
    normalize_angle,
    quarter_midpoint,
    quarter_of,
)


class DetectorVariant(Enum):
    MODIFIED_LMS_PPIC = "lms_ppic"
    MODIFIED_PLMS_PPIC = "plms_ppic"


def step_size_range(n_users: int) -> float:
    """Upper edge of the stable NLMS step-size interval (0, 1 - sqrt((M-1)/M)]."""
    if n_users < 1:
        raise DomainError(f"n_users must be >= 1, got {n_users}")
    return 1.0 - math.sqrt((n_users - 1) / n_users)


@dataclass(frozen=True)
class StepSizeBank:
    """Strictly increasing NLMS step sizes, all within the stable range for n_users."""

    n_users: int
    mus: np.ndarray

    def __post_init__(self) -> None:
        mus = np.array(self.mus, dtype=np.float64)
        if mus.ndim != 1 or mus.size < 1:
            raise DomainError("the bank needs at least one step size")
        edge = step_size_range(self.n_users)
        if np.any(mus <= 0.0) or np.any(mus > edge * (1.0 + 1e-12)):
            raise DomainError(
                f"every step size must lie in (0, {edge}] for n_users={self.n_users}"
            )
        if np.any(np.diff(mus) <= 0.0):
            raise DomainError("step sizes must be strictly increasing")
        mus.setflags(write=False)
        object.__setattr__(self, "mus", mus)

    def __len__(self) -> int:
        return self.mus.size

    @classmethod
    def from_multipliers(cls, n_users: int, multipliers: Sequence[float]) -> "StepSizeBank":
        """Scale a strictly increasing multiplier list in (0, 1] by the range edge."""
        mults = np.asarray(multipliers, dtype=np.float64)
        if mults.ndim != 1 or mults.size < 1:
            raise DomainError("need at least one multiplier")
        if np.any(mults <= 0.0) or np.any(mults > 1.0):
            raise DomainError("multipliers must lie in (0, 1]")
        return cls(n_users=n_users, mus=mults * step_size_range(n_users))


def make_step_bank(n_users: int, n_steps: int) -> StepSizeBank:
    """Uniform partition of the stable step-size range into n_steps sizes l/L * edge."""
    if n_users < 1:
        raise DomainError(f"n_users must be >= 1, got {n_users}")
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    edge = step_size_range(n_users)
    mus = np.arange(1, n_steps + 1, dtype=np.float64) * (edge / n_steps)
    return StepSizeBank(n_users=n_users, mus=mus)


@dataclass(frozen=True)
class PpicConfig:
    """Stage count, step-size bank and variant of the adaptive detector."""

    n_stages: int
    bank: StepSizeBank
    variant: DetectorVariant = DetectorVariant.MODIFIED_PLMS_PPIC

    def __post_init__(self) -> None:
        if self.n_stages < 1:
            raise DomainError(f"n_stages must be >= 1, got {self.n_stages}")
        if self.variant is DetectorVariant.MODIFIED_LMS_PPIC and len(self.bank) != 1:
            raise DomainError("the LMS-PPIC variant uses exactly one step size")


@dataclass(frozen=True)
class StageState:
    """Everything one stage produced: weights, decisions, phases, and the
    final unit-magnitude mismatch sum ``sum_m ||w_m| - 1|``."""

    stage_index: int
    weights: np.ndarray
    bit_estimates: SymbolFrame
    phase_estimates: np.ndarray
    mismatch: float

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.complex128)
        phases = np.array(self.phase_estimates, dtype=np.float64)
        n = self.bit_estimates.n_users
        if weights.shape != (n,) or phases.shape != (n,):
            raise DimensionError("weights, bits and phase estimates must share one length")
        if not np.all(np.isfinite(weights)):
            raise NumericError("stage weights contain non-finite values")
        if np.any(phases < 0.0) or np.any(phases >= 2.0 * math.pi):
            raise DomainError("phase estimates must lie in [0, 2*pi)")
        weights.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "phase_estimates", phases)


def _check_frame(frame: ReceivedFrame, codes: SpreadingCodeSet) -> None:
    if frame.code_length != codes.code_length:
        raise DimensionError(
            f"frame has {frame.code_length} samples but codes are {codes.code_length} chips long"
        )


def conventional_detect(
    frame: ReceivedFrame, codes: SpreadingCodeSet, quarter_info: np.ndarray
) -> Tuple[SymbolFrame, np.ndarray]:
    """Single-user correlator with the quarter midpoint as phase estimate.

    Returns the stage-0 bit estimates and the midpoint phases used; a zero
    correlator output decides +1.
    """
    _check_frame(frame, codes)
    quarters = np.asarray(quarter_info, dtype=np.int64)
    if quarters.shape != (codes.n_users,):
        raise DimensionError(
            f"quarter_info must have one entry per user, got shape {quarters.shape}"
        )
    phases = np.array([quarter_midpoint(int(q)) for q in quarters])
    correlations = codes.codes @ frame.samples
    statistics = np.real(np.exp(-1j * phases) * correlations)
    bits = np.where(statistics >= 0.0, 1, -1)
    return SymbolFrame(bits=bits), phases


def nlms_bank_run(
    frame: ReceivedFrame,
    prev_bits: SymbolFrame,
    codes: SpreadingCodeSet,
    bank: StepSizeBank,
) -> np.ndarray:
    """Estimate the weight vector by a bank of NLMS recursions over one frame.

    The weights start at zero.  At each chip n the shared error
    e(n) = r(n) - W(n-1)^T X(n) and normalized update direction
    Z(n) = X(n) e(n) / ||X(n)||^2 are computed once; each bank member proposes
    W(n-1) + mu_k Z(n) and the proposal with the smallest unit-magnitude
    mismatch sum_m ||w_m| - 1| is kept (ties go to the smallest step size).

    Returns the selected weight vector after the last chip.
    """
    _check_frame(frame, codes)
    n_users = codes.n_users
    if prev_bits.n_users != n_users:
        raise DimensionError(
            f"prev_bits has {prev_bits.n_users} entries but codes have {n_users} users"
        )
    if bank.n_users != n_users:
        raise DimensionError(
            f"bank was built for {bank.n_users} users but codes have {n_users}"
        )
    # row-per-chip, complex layout keeps the sequential update loop cheap
    regressors = np.ascontiguousarray(
        (prev_bits.bits[:, np.newaxis] * codes.codes).T, dtype=np.complex128
    )
    samples = frame.samples
    mus = bank.mus[:, np.newaxis]
    weights = np.zeros(n_users, dtype=np.complex128)
    for n in range(codes.code_length):
        x = regressors[n]
        error = samples[n] - weights @ x
        direction = x * (error / n_users)  # ||x||^2 == n_users for +/-1 entries
        candidates = weights[np.newaxis, :] + mus * direction[np.newaxis, :]
        mismatches = np.abs(np.abs(candidates) - 1.0).sum(axis=1)
        weights = candidates[int(np.argmin(mismatches))]
    if not np.all(np.isfinite(weights)):
        raise NumericError("NLMS recursion produced non-finite weights")
    return weights


def estimate_phase(weight: complex, quarter: int) -> float:
    """Phase estimate from one converged weight plus the true phase's quarter.

    Of the candidates angle(w) and angle(w) +/- pi (all reduced to [0, 2*pi)),
    return the first that falls in the given quarter; if none does the weight
    has not converged and the quarter midpoint is returned instead.
    """
    if quarter not in (1, 2, 3, 4):
        raise DomainError(f"quarter index must be 1..4, got {quarter}")
    if weight == 0:
        raise UndefinedAngleError("cannot take the angle of a zero weight")
    theta = normalize_angle(float(np.angle(weight)))
    for candidate in (theta, normalize_angle(theta + math.pi), normalize_angle(theta - math.pi)):
        if quarter_of(candidate) == quarter:
            return candidate
    return quarter_midpoint(quarter)


def cancel_interference(
    frame: ReceivedFrame,
    weights: np.ndarray,
    prev_bits: SymbolFrame,
    codes: SpreadingCodeSet,
    user: int,
) -> np.ndarray:
    """Subtract every other user's weighted regenerated signal from the frame.

    Returns the cleaned chip sequence for the given user (0-based index).
    """
    _check_frame(frame, codes)
    weights = np.asarray(weights, dtype=np.complex128)
    if weights.shape != (codes.n_users,) or prev_bits.n_users != codes.n_users:
        raise DimensionError("weights and prev_bits must have one entry per user")
    if not 0 <= user < codes.n_users:
        raise DomainError(f"user index {user} out of range for {codes.n_users} users")
    scaled = weights * prev_bits.bits
    total = scaled @ codes.codes
    own = scaled[user] * codes.codes[user]
    return frame.samples - (total - own)


def decide_bit(cleaned: np.ndarray, phase_estimate: float, code: np.ndarray) -> int:
    """Sign of the phase-corrected correlation statistic; zero decides +1."""
    cleaned = np.asarray(cleaned, dtype=np.complex128)
    code = np.asarray(code)
    if cleaned.shape != code.shape:
        raise DimensionError(
            f"cleaned samples and code disagree: {cleaned.shape} vs {code.shape}"
        )
    statistic = np.real(np.exp(-1j * phase_estimate) * np.dot(cleaned, code))
    return 1 if statistic >= 0.0 else -1


def run_stage(
    frame: ReceivedFrame,
    codes: SpreadingCodeSet,
    prev_bits: SymbolFrame,
    quarter_info: np.ndarray,
    config: PpicConfig,
    stage_index: int,
) -> StageState:
    """One full PPIC stage: weight estimation, phase estimation, cancelation, re-decision."""
    if stage_index < 1:
        raise DomainError(f"stage_index must be >= 1, got {stage_index}")
    weights = nlms_bank_run(frame, prev_bits, codes, config.bank)
    quarters = np.asarray(quarter_info, dtype=np.int64)
    phases = np.empty(codes.n_users)
    for m in range(codes.n_users):
        try:
            phases[m] = estimate_phase(weights[m], int(quarters[m]))
        except UndefinedAngleError:
            phases[m] = quarter_midpoint(int(quarters[m]))
    bits = np.empty(codes.n_users, dtype=np.int64)
    for m in range(codes.n_users):
        cleaned = cancel_interference(frame, weights, prev_bits, codes, m)
        bits[m] = decide_bit(cleaned, phases[m], codes.codes[m])
    mismatch = float(np.abs(np.abs(weights) - 1.0).sum())
    return StageState(
        stage_index=stage_index,
        weights=weights,
        bit_estimates=SymbolFrame(bits=bits),
        phase_estimates=phases,
        mismatch=mismatch,
    )


def run_ppic(
    frame: ReceivedFrame,
    codes: SpreadingCodeSet,
    quarter_info: np.ndarray,
    config: PpicConfig,
) -> List[StageState]:
    """Run the conventional front end and chain every adaptive stage.

    Returns the per-stage states for stages 1..n_stages; the last entry holds
    the final bit estimates.
    """
    bits, _ = conventional_detect(frame, codes, quarter_info)
    stages: List[StageState] = []
    for s in range(1, config.n_stages + 1):
        state = run_stage(frame, codes, bits, quarter_info, config, s)
        stages.append(state)
        bits = state.bit_estimates
    return stages


def detect_with_channel(
    frame: ReceivedFrame, codes: SpreadingCodeSet, channel: ChannelState, config: PpicConfig
) -> List[StageState]:
    """Convenience wrapper taking the receiver's side information from a channel state."""
    return run_ppic(frame, codes, channel.quarter_info, config)
