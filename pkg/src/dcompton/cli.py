"""Command-line driver: scan, validate, report, preset.

Exit codes: 0 on success, 1 for configuration problems (bad config text,
unknown preset, bad usage), 2 for runtime failures (I/O, unreadable
results, unexpected errors during a run).
"""

import argparse
import sys

from .config import ConfigError, load_config, parse_config, serialize_config, \
    with_overrides
from .presets import PRESETS, preset_text

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

# Reference totals for the standard setup (511 MeV electron against a
# 2.5 eV, xi = 1 wave with the documented cuts).  The report marks each
# value PASS/FAIL against these; the acceptance tests pin the same
# numbers.
BENCHMARKS = {
    "pair_rate": (3.5e7, 0.25, "1/s"),
    "pair_rate_weak_field": (2.5e7, 0.25, "1/s"),
    "rate_ratio": (1.4, 0.20, ""),
    "one_photon_rate": (3.0e13, 0.25, "1/s"),
}
# pairs per shot is quoted as an order-of-magnitude estimate; accept
# within a factor of two
PAIRS_PER_SHOT_REFERENCE = 2.0e3


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 1 (configuration)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="dcompton",
        description="two-photon emission rates and photon polarization "
                    "entanglement for an electron in a strong laser wave",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="run a scan from a config or preset")
    _add_source_flags(scan)
    scan.add_argument("--out", metavar="PATH",
                      help="output base path (overrides output.path)")
    scan.add_argument("--workers", type=int, metavar="N",
                      help="worker processes (overrides execution.workers)")
    scan.add_argument("--seed", type=int, metavar="S",
                      help="RNG seed (overrides execution.seed)")
    scan.add_argument("--resolution", type=int, metavar="R",
                      help="points per scan axis (overrides axis points)")
    scan.add_argument("--perturbative", action="store_true",
                      help="switch map observables to the weak-field "
                           "reference mode")

    validate = sub.add_parser("validate",
                              help="parse a config and echo the normalized "
                                   "form")
    _add_source_flags(validate)

    report = sub.add_parser("report",
                            help="summarize a finished scan and render "
                                 "figures next to it")
    report.add_argument("result", metavar="RESULT",
                        help="result sidecar (.json) or its base path")

    preset = sub.add_parser("preset", help="preset utilities")
    preset_sub = preset.add_subparsers(dest="preset_command", required=True)
    preset_sub.add_parser("list", help="list available presets")

    return parser


def _add_source_flags(sub):
    sub.add_argument("--config", metavar="PATH", help="config file to load")
    sub.add_argument("--preset", metavar="NAME",
                     help="built-in preset (see 'preset list')")


def _resolve_config(args):
    if bool(args.config) == bool(args.preset):
        raise ConfigError([(0, "exactly one of --config or --preset is "
                               "required")])
    if args.preset:
        try:
            return parse_config(preset_text(args.preset))
        except KeyError as exc:
            raise ConfigError([(0, str(exc.args[0]))]) from None
    try:
        return load_config(args.config)
    except OSError as exc:
        raise ConfigError([(0, f"cannot read {args.config!r}: {exc}")]) \
            from None


def _cmd_scan(args) -> int:
    from .output import write_result
    from .runner import run_scan

    cfg = _resolve_config(args)
    cfg = with_overrides(cfg, workers=args.workers, seed=args.seed,
                         resolution=args.resolution,
                         perturbative=args.perturbative, out=args.out)
    result = run_scan(cfg, log=lambda msg: print(msg, file=sys.stderr))
    paths = write_result(result)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"observable: {result.observable}")
    print(f"config: {result.config_digest}")
    print(f"cells: {result.values.shape[0]}")
    for key in sorted(result.totals):
        print(f"{key} = {result.totals[key]:.6e}")
    print(f"wrote {paths['csv']}")
    print(f"wrote {paths['json']}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _resolve_config(args)
    sys.stdout.write(serialize_config(cfg))
    return EXIT_OK


def _verdict(value: float, target: float, tol: float) -> str:
    rel = value / target - 1.0
    word = "PASS" if abs(rel) <= tol else "FAIL"
    return (f"reference {target:.3g} within {tol:.0%}: {word} "
            f"({rel:+.1%})")


def _physics_context(config_text: str) -> list:
    from .kinematics import chi_parameter, effective_mass, head_on_electron

    cfg = parse_config(config_text)
    p = cfg.physics
    laser = p.laser()
    electron = head_on_electron(p.electron_energy, laser)
    return [
        f"beam: E_i = {p.electron_energy:g} m_e, omega = "
        f"{p.laser_omega:g} eV, xi = {p.xi:g}",
        f"dressed mass m_* = {effective_mass(p.xi):.6f} m_e",
        f"quantum parameter chi = {chi_parameter(electron, laser):.3e}",
        f"intensity = {laser.intensity_w_cm2:.3e} W/cm^2",
    ]


def _cmd_report(args) -> int:
    from .output import load_sidecar
    from .plots import render_figures

    doc = load_sidecar(args.result)
    print(f"observable: {doc['observable']}")
    print(f"config: {doc['config_digest']}  complete: "
          f"{'yes' if doc['complete'] else 'no'}")
    mask = doc["cells"]["mask"]
    counts = {}
    for code in mask:
        counts[code] = counts.get(code, 0) + 1
    counted = ", ".join(f"{k}: {v}" for k, v in sorted(counts.items()))
    print(f"cells: {len(mask)} ({counted})")
    for line in _physics_context(doc["config"]):
        print(line)

    totals = doc.get("totals", {})
    if totals:
        print("totals:")
        for key in sorted(totals):
            value = totals[key]
            line = f"  {key} = {value:.6e}"
            if key in BENCHMARKS:
                target, tol, unit = BENCHMARKS[key]
                line += f" {unit}".rstrip() + f"  [{_verdict(value, target, tol)}]"
            elif key == "pairs_per_shot":
                ratio = value / PAIRS_PER_SHOT_REFERENCE
                word = "PASS" if 0.5 <= ratio <= 2.0 else "FAIL"
                line += (f"  [reference ~{PAIRS_PER_SHOT_REFERENCE:.0e} "
                         f"within factor 2: {word} (x{ratio:.2f})]")
            print(line)
    for warning in doc.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)

    base = args.result[:-5] if args.result.endswith(".json") else args.result
    for path in render_figures(doc, base):
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_preset(args) -> int:
    if args.preset_command == "list":
        width = max(len(name) for name in PRESETS)
        for name, preset in PRESETS.items():
            print(f"{name:<{width}}  {preset.description}")
    return EXIT_OK


_COMMANDS = {
    "scan": _cmd_scan,
    "validate": _cmd_validate,
    "report": _cmd_report,
    "preset": _cmd_preset,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for line in exc.format_errors():
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
