"""Command-line entry point: ``cmspde figure|sweep|resonance|track|selftest``."""
import argparse
import json
import sys
from pathlib import Path

from .experiments import ConfigError, ExperimentConfig, parse_length, run_experiment
from .stochastic_core import InvalidParameterError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_BLEW_UP = 3


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_common(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--ensemble", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--dx", type=str, help="grid spacing, e.g. 0.19635 or pi/16")
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma", type=_floats, help="one value or a comma-separated list")
    p.add_argument("--horizon", type=float)
    p.add_argument("--out", type=str)
    p.add_argument("--config", type=Path, help="JSON object of settings (or a run summary)")
    p.add_argument("--format", choices=("csv", "json"))


def build_parser():
    parser = argparse.ArgumentParser(prog="cmspde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    fig = sub.add_parser("figure", help="reproduce one of the figure experiments")
    fig.add_argument("which", choices=("fig1", "fig2", "fig3", "fig4", "fig5"))
    _add_common(fig)
    for name, text in (("sweep", "Lyapunov sweep of the weak model over sigma"),
                       ("resonance", "Monte-Carlo drift/diffusion of the quadratic noises"),
                       ("track", "strong tracking: SPDE against the normal-form model")):
        _add_common(sub.add_parser(name, help=text))
    sub.add_parser("selftest", help="run the built-in sanity checks")
    return parser


def config_from_args(args):
    settings = {}
    if args.config is not None:
        try:
            settings = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a JSON object")
        if "config" in settings and "schema_version" in settings:
            settings = settings["config"]
    kind = args.which if args.command == "figure" else args.command
    if settings.get("kind", kind) != kind:
        raise ConfigError(f"config is for {settings['kind']!r}, not {kind!r}")
    settings["kind"] = kind
    for key in ("seed", "ensemble", "dt", "gamma", "sigma", "horizon", "out", "format"):
        val = getattr(args, key)
        if val is not None:
            settings[key] = val
    if args.dx is not None:
        settings["dx"] = parse_length(args.dx)
    return ExperimentConfig.from_dict(settings)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_all
        return 1 if run_all() else EXIT_OK
    try:
        cfg = config_from_args(args)
        record = run_experiment(cfg)
    except (ConfigError, InvalidParameterError, TypeError) as exc:
        print(f"cmspde: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(record.to_dict()["summary"], indent=2))
    if record.all_blew_up:
        print("cmspde: every trajectory blew up", file=sys.stderr)
        return EXIT_ALL_BLEW_UP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
