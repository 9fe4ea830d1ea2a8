"""Command-line entry point: ``siib score | eval | simulate``.

Exit codes: 0 success, 2 I/O error, 3 validation or usage error,
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .audio_io import load_audio, save_audio
from .channel_sim import ChannelSpec, apply_channel
from .core import SiibConfig, siib
from .errors import AudioIOError, ValidationError
from .evaluation import evaluate, load_manifest

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_INTERNAL = 4

log = logging.getLogger("siib")

# flag dest -> (SiibConfig field, type, help)
CONFIG_FLAGS = {
    "fft_size": ("fft_size", int, "STFT size in samples (400)"),
    "hop": ("hop", int, "STFT hop in samples (200)"),
    "filters": ("num_filters", int, "number of gammatone filters (28)"),
    "flo": ("f_lo", float, "lowest center frequency in Hz (100)"),
    "fhi": ("f_hi", float, "highest center frequency in Hz (6500)"),
    "stack": ("stack", int, "frames per stacked vector K (15)"),
    "knn_k": ("knn_k", int, "KSG neighbour count (4)"),
    "vad_db": ("vad_db", float, "VAD threshold below the loudest frame in dB (40)"),
    "masking_decay": ("masking_decay_db", float, "forward-masking decay in dB/frame (5)"),
    "r": ("r", float, "production noise correlation coefficient (0.75)"),
    "seed": ("seed", int, "jitter seed for the MI estimator (0)"),
}

# config-file spellings accepted in addition to the SiibConfig field names
FILE_ALIASES = {
    "K": "stack",
    "num_filters": "num_filters",
    "masking_decay_db_per_frame": "masking_decay_db",
    "threshold_db": "vad_db",
    "jitter_seed": "seed",
}


class UsageError(Exception):
    pass


def _error(exc):
    print(f"siib: error: {exc}", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("metric configuration")
    for dest, (_, typ, help_) in CONFIG_FLAGS.items():
        flag = "--" + dest.replace("_", "-")
        group.add_argument(flag, dest=dest, type=typ, help=help_, default=argparse.SUPPRESS)
    common.add_argument("--config", help="TOML file of key = value settings",
                        default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, help="parallel workers (1)",
                        default=argparse.SUPPRESS)
    common.add_argument("--json", action="store_true", help="print full JSON output",
                        default=argparse.SUPPRESS)
    common.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS,
                        help="print the effective configuration and its digest, then exit")
    return common


def build_parser():
    common = _common_parser()
    parser = _Parser(prog="siib", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"siib {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("score", parents=[common], help="score one clean/degraded pair")
    p.add_argument("clean_path")
    p.add_argument("degraded_path")

    p = sub.add_parser("eval", parents=[common], help="correlate scores with a manifest")
    p.add_argument("manifest_path")
    p.add_argument("--output", "-o", help="write the JSON report here")
    p.add_argument("--text", action="store_true", help="print a per-condition table")
    p.add_argument("--aggregate", choices=("mean", "concat"), default="mean",
                   help="per-condition aggregation over pairs (mean)")

    p = sub.add_parser("simulate", parents=[common], help="write a degraded WAV file")
    p.add_argument("clean_path")
    p.add_argument("kind", help="ssn | white | gain_mask | passthrough")
    p.add_argument("snr_db", type=float)
    p.add_argument("out_path")
    p.add_argument("--noise-ref", help="shape SSN from this file instead of the input")
    return parser


def _read_config_file(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise AudioIOError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from exc
    return {FILE_ALIASES.get(k, k): v for k, v in data.items() if k != "jobs"}, data.get("jobs")


def resolve_config(args):
    """Flags override the config file, which overrides the built-in defaults."""
    values, jobs = {}, None
    if getattr(args, "config", None):
        values, jobs = _read_config_file(args.config)
    for dest, (field_name, _, _) in CONFIG_FLAGS.items():
        if hasattr(args, dest):
            values[field_name] = getattr(args, dest)
    jobs = getattr(args, "jobs", jobs) or 1
    return SiibConfig.from_mapping(values), int(jobs)


def cmd_score(args, config, jobs):
    score = siib(load_audio(args.clean_path), load_audio(args.degraded_path), config, jobs=jobs)
    if getattr(args, "json", False):
        print(score.to_json(indent=2))
    else:
        print(f"{score.bits_per_second:.4f}")
    return EXIT_OK


def cmd_eval(args, config, jobs):
    conditions = load_manifest(args.manifest_path)
    report = evaluate(conditions, config, jobs=jobs, aggregate=args.aggregate)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                json.dump(report.to_dict(), fh, indent=2, allow_nan=False)
                fh.write("\n")
        except OSError as exc:
            raise AudioIOError(f"cannot write {args.output}: {exc}") from exc
    if getattr(args, "json", False):
        print(report.to_json(indent=2))
    elif args.text:
        print(report.to_text())
    print(f"tau={report.tau:.4f} rho={report.rho:.4f} "
          f"a={report.fit.a:.6g} b={report.fit.b:.6g} rmse={report.fit.rmse:.4f}")
    return EXIT_OK


def cmd_simulate(args, config, jobs):
    spec = ChannelSpec(args.kind, args.snr_db, config.seed)
    clean = load_audio(args.clean_path)
    ref = load_audio(args.noise_ref) if args.noise_ref else None
    save_audio(args.out_path, apply_channel(clean, spec, noise_reference=ref))
    return EXIT_OK


COMMANDS = {"score": cmd_score, "eval": cmd_eval, "simulate": cmd_simulate}


def main(argv=None):
    logging.basicConfig(format="%(name)s: %(levelname)s: %(message)s")
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        config, jobs = resolve_config(args)
        if getattr(args, "print_config", False):
            print(json.dumps({"config": config.to_dict(), "digest": config.digest(),
                              "jobs": jobs}, indent=2))
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_VALIDATION
        return COMMANDS[args.command](args, config, jobs)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except AudioIOError as exc:
        _error(exc)
        return EXIT_IO
    except ValidationError as exc:
        if args is not None and args.command == "simulate" and "kind" in str(exc):
            parser.print_usage(sys.stderr)
        _error(exc)
        return EXIT_VALIDATION
    except (OSError, UnicodeDecodeError) as exc:
        _error(exc)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
