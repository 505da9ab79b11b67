"""Command-line entry point for running Monte Carlo sweeps."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .channels import ScenarioKind
from .errors import SimulationError
from .harness import (
    ExperimentConfig,
    emit_reports,
    load_config,
    override_config,
    parse_detector_list,
    run_experiment,
)
from .signal_model import normalize_angle


def _int_list(text: str):
    return tuple(int(tok.strip()) for tok in text.split(","))


def _pin_phase(text: str):
    user, _, phase = text.partition(":")
    if not phase:
        raise argparse.ArgumentTypeError("expected <user>:<radians>")
    return int(user), float(phase)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description=(
            "Monte Carlo BER/phase sweep of the conventional, LMS-PPIC and "
            "PLMS-PPIC multiuser detectors over balanced, unbalanced and "
            "Rayleigh-fading CDMA channels."
        ),
    )
    parser.add_argument("--config", metavar="FILE", help="flat key=value experiment file")
    parser.add_argument("--users", type=_int_list, metavar="M[,M...]",
                        help="user counts to sweep")
    parser.add_argument("--code-length", type=_int_list, metavar="N[,N...]",
                        help="spreading-code lengths to sweep")
    parser.add_argument("--snr-db", type=float, help="per-user chip SNR in dB")
    parser.add_argument("--stages", type=int, help="number of cancelation stages")
    parser.add_argument("--bank-size", type=int,
                        help="size of a uniformly partitioned step-size bank")
    parser.add_argument("--scenario", choices=[k.value for k in ScenarioKind],
                        help="channel scenario")
    parser.add_argument("--frames", type=int, help="frames per sweep point")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", default=".", metavar="DIR",
                        help="directory for ber.csv and phase.csv (default: .)")
    parser.add_argument("--detectors", type=parse_detector_list,
                        metavar="NAME[,NAME...]",
                        help="subset of conventional,lms_ppic,plms_ppic")
    parser.add_argument("--pin-phase", type=_pin_phase, metavar="USER:RADIANS",
                        help="pin one user's channel phase every symbol")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        config = override_config(
            config,
            user_counts=args.users,
            code_lengths=args.code_length,
            snr_db=args.snr_db,
            stages=args.stages,
            bank_size=args.bank_size,
            scenario_kind=ScenarioKind(args.scenario) if args.scenario else None,
            frames_per_point=args.frames,
            seed=args.seed,
            detectors=args.detectors,
            pinned_phase=(
                (args.pin_phase[0], normalize_angle(args.pin_phase[1]))
                if args.pin_phase
                else None
            ),
        )
        reports = run_experiment(config)
        ber_path, phase_path = emit_reports(reports, args.out)
    except (SimulationError, OSError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 1
    ber_report, _ = reports
    for m in config.user_counts:
        for n in config.code_lengths:
            summary = ", ".join(
                f"{kind.value}={ber_report.final_stage(kind, m, n).ber:.4g}"
                for kind in config.detectors
            )
            print(f"M={m} N={n}: BER {summary}")
    print(f"wrote {ber_path} and {phase_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
