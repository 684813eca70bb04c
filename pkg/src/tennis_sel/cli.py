"""Command-line entry point: ``tennis-sel <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(including unreadable or unwritable files), 3 numerical failure.
Every file written with ``--out`` gets a ``<out>.json`` sidecar holding the
tool version, the resolved seed and the argv that reproduces it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import generate_synthetic, parse_matches, read_matches, serialize_matches
from .errors import ConfigError, DataError, NumericalError, SelError
from .evaluation import FitOptions, fit_model, parse_report, render_report, run_validation
from .features import (
    DEFAULT_INITIAL,
    DEFAULT_K,
    FEATURE_ORDER,
    FeatureName,
    Learner,
    ModelSpec,
    annotate_pre_match_elo,
    annotations_from_columns,
    build_design,
    enumerate_specs,
    serialize_annotated,
)
from .glm_linear import coefficient_report, render_coefficients

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class StrictFailure(NumericalError):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SEL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"SEL_SEED must be an integer, got {env!r}") from None


def _write(text: str, out, args, argv) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8")
    write_sidecar(out, args, argv)


def write_sidecar(out, args, argv) -> None:
    recorded = list(argv)
    if args.seed is None and hasattr(args, "resolved_seed"):
        recorded += ["--seed", str(args.resolved_seed)]
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    meta = {"tool": "tennis-sel", "version": __version__, "seed": getattr(args, "resolved_seed", None),
            "argv": recorded, "config": config}
    Path(f"{out}.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n",
                                   encoding="utf-8")


def _annotated(args, data):
    if getattr(args, "precomputed_elo", False):
        return annotations_from_columns(data)
    k = DEFAULT_K if args.elo_k is None else args.elo_k
    return annotate_pre_match_elo(data, args.elo_init, k)


def _parse_specs(text, learner):
    if text in (None, "all"):
        return enumerate_specs(learner)
    return [ModelSpec.parse(part, learner) for part in text.split(";") if part.strip()]


def _parse_learners(text):
    if text == "all":
        return list(Learner)
    try:
        return [Learner(t.strip()) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"--learner must be linear, spline, forest or all, got {text!r}") from None


def _parse_mtry(text):
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"--mtry must be 'auto' or a positive integer, got {text!r}") from None
    if value < 1:
        raise ConfigError("--mtry must be >= 1")
    return value


def _options(args) -> FitOptions:
    return FitOptions(seed=args.resolved_seed, ntree=args.ntree, mtry=_parse_mtry(args.mtry),
                      min_node=args.min_node)


def _check_converged(converged, args, what):
    if converged:
        return
    if args.strict:
        raise StrictFailure(f"{what} did not converge")
    print(f"warning: {what} did not converge", file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_ingest(args, argv):
    data = parse_matches(Path(args.data).read_text(encoding="utf-8"))
    _write(serialize_matches(data), args.out, args, argv)
    print(f"{len(data)} matches in {data.n_tournaments} tournaments", file=sys.stderr)


def cmd_synth(args, argv):
    data = generate_synthetic(args.years, args.tournaments_per_year, args.players,
                              seed=args.resolved_seed, start_year=args.start_year)
    _write(serialize_matches(data), args.out, args, argv)


def cmd_elo(args, argv):
    data = read_matches(args.data)
    _write(serialize_annotated(_annotated(args, data)), args.out, args, argv)


def cmd_fit(args, argv):
    from .explain import effect_svg
    from .glm_spline import effect_curve
    from .persist import model_to_json

    learner = Learner(args.learner)
    specs = _parse_specs(args.features, learner)
    if len(specs) != 1:
        raise ConfigError("fit takes exactly one feature list")
    spec = specs[0]
    data = read_matches(args.data)
    design = build_design(_annotated(args, data), spec.features)
    model = fit_model(design, learner, options=_options(args), stream=("fit", spec.key))
    _check_converged(getattr(model, "converged", True), args, f"{learner.value} fit")
    _write(model_to_json(model), args.out, args, argv)

    if args.coefficients:
        if learner is not Learner.Linear:
            raise ConfigError("--coefficients needs --learner linear")
        text = render_coefficients(coefficient_report(model, args.intercept), args.format)
        _write(text, args.coefficients, args, argv)
    if args.effects:
        if learner is not Learner.Spline:
            raise ConfigError("--effects needs --learner spline")
        base = Path(args.effects)
        for f in model.features:
            curve = effect_curve(model, f, args.grid)
            stem = base.with_name(f"{base.stem}_{f.value}")
            lines = ["feature,x,effect"] + [f"{f.value},{x!r},{v!r}" for x, v in
                                             zip(curve.x.tolist(), curve.values.tolist())]
            _write("\n".join(lines) + "\n", stem.with_suffix(".csv"), args, argv)
            effect_svg(curve, stem.with_suffix(".svg"))


def cmd_validate(args, argv):
    data = read_matches(args.data)
    learners = _parse_learners(args.learner)
    specs = _parse_specs(args.specs, Learner.Linear)
    report = run_validation(data, args.scheme, specs, learners, window=args.window,
                            final_year=args.final_year, options=_options(args),
                            annotated=_annotated(args, data), jobs=args.jobs)
    bad = [f"{c.learner.value} {c.spec.key}" for c in report.ordered_cells() if not all(c.converged)]
    if bad:
        _check_converged(False, args, f"{len(bad)} cell(s) ({', '.join(bad[:3])}...)")
    _write(render_report(report, args.format), args.out, args, argv)


def _load_for_explain(args):
    from .persist import load_model

    model = load_model(args.model)
    data = read_matches(args.data)
    return model, build_design(_annotated(args, data), FEATURE_ORDER)


def cmd_explain(args, argv):
    from .explain import curve_csv, curve_svg, ice

    model, design = _load_for_explain(args)
    bundle = ice(model, design, FeatureName.parse(args.feature), args.grid,
                 sample=args.ice_sample, seed=args.resolved_seed)
    item = bundle.curve if args.kind == "pdp" else bundle
    _write(curve_csv(item), args.out, args, argv)
    if args.svg:
        curve_svg(item, args.svg, show_pdp=args.kind != "ice")
        write_sidecar(args.svg, args, argv)


def _parse_grid(text):
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise ConfigError(f"--grid must look like 30x30, got {text!r}") from None
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2:
        raise ConfigError(f"--grid must look like 30x30, got {text!r}")
    return parts


def cmd_explain2d(args, argv):
    from .explain import pdp_2d, surface_csv, surface_svg

    model, design = _load_for_explain(args)
    g1, g2 = _parse_grid(args.grid)
    surface = pdp_2d(model, design, FeatureName.parse(args.f1), FeatureName.parse(args.f2), g1, g2)
    _write(surface_csv(surface), args.out, args, argv)
    if args.svg:
        surface_svg(surface, args.svg)
        write_sidecar(args.svg, args, argv)


def cmd_report(args, argv):
    report = parse_report(Path(args.input).read_text(encoding="utf-8"))
    _write(render_report(report, args.format), args.out, args, argv)


# ---------------------------------------------------------------- parser

def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (falls back to $SEL_SEED, then 0)")


def _add_elo(p, allow_precomputed=True):
    g = p.add_mutually_exclusive_group()
    if allow_precomputed:
        g.add_argument("--precomputed-elo", action="store_true",
                       help="use the elo1/elo2 columns of the data instead of computing ratings")
    g.add_argument("--elo-k", type=float, default=None, help=f"Elo K-factor (default {DEFAULT_K:g})")
    p.add_argument("--elo-init", type=float, default=DEFAULT_INITIAL,
                   help=f"initial Elo rating (default {DEFAULT_INITIAL:g})")


def _add_forest(p):
    p.add_argument("--ntree", type=int, default=400)
    p.add_argument("--mtry", default="auto", help="'auto' (10-fold CV per window) or an integer")
    p.add_argument("--min-node", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tennis-sel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate and normalise a match CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p.add_argument("--years", type=int, default=3)
    p.add_argument("--tournaments-per-year", type=int, default=4)
    p.add_argument("--players", type=int, default=128)
    p.add_argument("--start-year", type=int, default=2011)
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("elo", help="append pre-match elo1/elo2 columns")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    _add_elo(p, allow_precomputed=False)
    _add_seed(p)
    p.set_defaults(func=cmd_elo)

    p = sub.add_parser("fit", help="fit one model and save it as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--learner", choices=[lr.value for lr in Learner], default="linear")
    p.add_argument("--features", "--specs", dest="features", default="Points,Rank,Elo",
                   help="comma-separated feature list, e.g. Points,Rank,Elo,Age30")
    p.add_argument("--out", required=True)
    p.add_argument("--coefficients", help="write the coefficient table here (linear only)")
    p.add_argument("--intercept", action="store_true", help="include the intercept row")
    p.add_argument("--effects", help="write spline effect curves as <stem>_<feature>.csv/.svg")
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--format", choices=["csv", "md"], default="csv")
    p.add_argument("--strict", action="store_true", help="exit 3 when the fit does not converge")
    _add_elo(p)
    _add_forest(p)
    _add_seed(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="run a validation scheme over specs x learners")
    p.add_argument("--data", required=True)
    p.add_argument("--scheme", choices=["expanding", "rolling", "cv"], default="expanding")
    p.add_argument("--learner", default="linear", help="linear, spline, forest, a comma list or all")
    p.add_argument("--specs", default="all",
                   help="'all' or feature lists separated by ';', e.g. 'Points,Rank;Points,Rank,Elo'")
    p.add_argument("--window", type=int, default=12)
    p.add_argument("--final-year", type=int, default=None)
    p.add_argument("--format", choices=["csv", "md"], default="csv")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--strict", action="store_true", help="exit 3 when any fit does not converge")
    _add_elo(p)
    _add_forest(p)
    _add_seed(p)
    p.set_defaults(func=cmd_validate)

    for name, fn in (("explain", cmd_explain), ("explain2d", cmd_explain2d)):
        p = sub.add_parser(name, help="PDP/ICE curves" if name == "explain" else "2-D PDP surface")
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--svg")
        if name == "explain":
            p.add_argument("--feature", required=True)
            p.add_argument("--kind", choices=["pdp", "ice", "both"], default="both")
            p.add_argument("--grid", type=int, default=50)
            p.add_argument("--ice-sample", type=int, default=None)
        else:
            p.add_argument("--f1", required=True)
            p.add_argument("--f2", required=True)
            p.add_argument("--grid", default="30x30")
        _add_elo(p)
        _add_seed(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("report", help="re-render a report CSV (e.g. as Markdown)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["csv", "md"], default="md")
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _main(argv)
    except SystemExit as exc:
        # --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK


def _main(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.resolved_seed = _seed(args)
        args.func(args, argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
