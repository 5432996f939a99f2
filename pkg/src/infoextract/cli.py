"""Command-line interface: ``infoextract <subcommand> ...``.

Pipelines chain through files. Every command that writes files also writes
its effective configuration to ``<primary output>.config.json``. Exit codes:
0 success, 1 invalid input / format problems, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, hcr
from .datasets import KINDS, GeneratorSpec, generate, load_csv, write_csv
from .decoupling import cross_mi, decouple, dependence_report, symmetric_extract
from .errors import InfoExtractError, InvalidInput, NumericalFailure, RefusedOverwrite
from .extraction import (apply_extraction, invert_layers, iterate_extraction, layers_from_dict,
                         layers_to_dict)
from .granger import analyze_pair, delay_spectrum, multivariate_granger, pca_reduce
from .infoflow import (NATS_PER_BIT, conditional_mi_reference, direct_mutual_information,
                       mutual_information_binned, mutual_information_hcr)
from .normalization import QuantileMap, denormalize_table, normalize_table
from .svg import emit_svg_lineplot
from .table import SampleTable

log = logging.getLogger("infoextract")

LAYER_FORMAT = "infoextract-layers"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# helpers


def _split(value):
    if value is None:
        return []
    return [v.strip() for v in value.split(",") if v.strip()]


def _check_writable(path, force):
    if path and os.path.exists(path) and not force:
        raise RefusedOverwrite(f"{path} exists; pass --force to overwrite")


def _write_json(path, payload, force):
    _check_writable(path, force)
    with open(path, "w") as fh:
        fh.write(_dumps(payload))


def _dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_config(args, primary):
    if not primary:
        return
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    with open(f"{primary}.config.json", "w") as fh:
        fh.write(_dumps(config))


def _units(value_nats, units):
    return value_nats if units == "nats" else value_nats / NATS_PER_BIT


def _load(args) -> tuple[SampleTable, list | None]:
    table = load_csv(args.input, args.delimiter, args.drop_missing)
    if getattr(args, "normalized", False):
        return table, None
    normalized, maps = normalize_table(table)
    return normalized, maps


def _maps_payload(table, maps):
    if maps is None:
        return None
    return {name: q.to_dict()["sorted_values"] for name, q in zip(table.names, maps)}


def _method(args):
    return None if args.method == "auto" else args.method


def _extraction_options(args) -> dict:
    return {"grid_size": args.grid, "floor": args.floor, "ridge": args.ridge}


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    if args.spec:
        spec = GeneratorSpec.from_json(args.spec)
    else:
        if not args.kind:
            raise InvalidInput("synth needs --kind or --spec")
        names = {"n": args.n, "rho": args.rho, "dims": args.dims, "alpha": args.alpha,
                 "beta": args.beta, "noise_z": args.noise_z, "noise_y": args.noise_y,
                 "delay": args.delay, "coupling": args.coupling, "noise": args.noise,
                 "delay_xy": args.delay_xy, "delay_yz": args.delay_yz}
        params = {k: v for k, v in names.items() if v is not None}
        spec = GeneratorSpec(args.kind, params, args.seed)
    table = generate(spec, normalized=args.normalized)
    write_csv(table, args.output, args.force)
    _write_config(args, args.output)
    print(_dumps({"output": args.output, "spec": spec.to_dict(), "rows": table.n_rows}), end="")


def cmd_normalize(args):
    raw = load_csv(args.input, args.delimiter, args.drop_missing)
    table, maps = normalize_table(raw)
    write_csv(table, args.output, args.force)
    if args.maps:
        _write_json(args.maps, {"format": "infoextract-maps", "maps": _maps_payload(table, maps)},
                    args.force)
    _write_config(args, args.output)


def _max_mi_with(table, target, given, bins):
    return max((mutual_information_binned(table.column(target), table.column(g), bins).value
                for g in given), default=0.0)


def cmd_extract(args):
    table, maps = _load(args)
    given = _split(args.given)
    layers = iterate_extraction(table, args.target, given, _method(args), args.degree,
                                args.iterations, **_extraction_options(args))
    history = [{"iteration": 0,
                "max_mi_with_given": _units(_max_mi_with(table, args.target, given, args.bins),
                                            args.units)}]
    current = table
    for k, layer in enumerate(layers, start=1):
        current = apply_extraction(layer, current)
        history.append({"iteration": k, "max_mi_with_given": _units(
            _max_mi_with(current, args.target, given, args.bins), args.units)})
    write_csv(current, args.output, args.force)
    if args.layers:
        _write_json(args.layers, {"format": LAYER_FORMAT, "columns": list(table.names),
                                  "maps": _maps_payload(table, maps), **layers_to_dict(layers),
                                  "history": history, "units": args.units}, args.force)
    if args.plot:
        _check_writable(args.plot, args.force)
        ycol = given[0] if given else args.target
        emit_svg_lineplot({"before": (table.column(args.target), table.column(ycol)),
                           "after": (current.column(args.target), current.column(ycol))},
                          args.plot, mode="scatter", xlabel=args.target, ylabel=ycol,
                          title=f"extraction of {args.target} given {', '.join(given) or '-'}")
    _write_config(args, args.output)
    print(_dumps({"output": args.output, "iterations": history, "units": args.units}), end="")


def _read_layers(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != LAYER_FORMAT:
        raise InvalidInput(f"{path} is not an {LAYER_FORMAT} document")
    return payload


def cmd_reconstruct(args):
    payload = _read_layers(args.layers)
    if not payload.get("invertible", True):
        raise InvalidInput("these layers come from a non-invertible transform")
    table = load_csv(args.input, args.delimiter, args.drop_missing)
    back = invert_layers(layers_from_dict(payload), table)
    if args.denormalize:
        maps = payload.get("maps")
        if not maps:
            raise InvalidInput("the layer file holds no quantile maps to denormalize with")
        back = denormalize_table(back, [QuantileMap.from_dict({"sorted_values": maps[n]})
                                        for n in back.names])
    write_csv(back, args.output, args.force)
    _write_config(args, args.output)


def cmd_decouple(args):
    table, maps = _load(args)
    order = _split(args.order) or "natural"
    options = _extraction_options(args)
    if args.symmetric:
        result = symmetric_extract(table, _method(args), args.degree, **options)
        report = dependence_report(result, args.bins)
        doc = {"format": LAYER_FORMAT, "invertible": False, "columns": list(table.names),
               "layers": []}
        history = [{"sweep": 1, "max_abs_spearman": report.max_spearman,
                    "max_mi_nats": report.max_mi}]
    else:
        dec = decouple(table, order, _method(args), args.degree, args.sweeps,
                       conditioning=args.conditioning, bins=args.bins, **options)
        result = dec.result
        report = dependence_report(result, args.bins)
        doc = {"format": LAYER_FORMAT, "columns": list(table.names),
               "maps": _maps_payload(table, maps), **dec.to_dict()}
        history = dec.history
    write_csv(result, args.output, args.force)
    if args.layers:
        _write_json(args.layers, doc, args.force)
    if args.report:
        rep = report.to_dict()
        rep["history"] = history
        rep["cross_mi_nats"] = cross_mi(result, table, args.bins).tolist()
        rep["invertible"] = not args.symmetric
        _write_json(args.report, rep, args.force)
    _write_config(args, args.output)


def cmd_mi(args):
    table, _ = _load(args)
    u, v = table.column(args.x), table.column(args.y)
    out = {"pair": [args.x, args.y], "units": args.units}
    if args.estimator in ("binned", "both"):
        out["binned"] = _units(mutual_information_binned(u, v, args.bins).value, args.units)
    if args.estimator in ("hcr", "both"):
        est = mutual_information_hcr(u, v, args.degree)
        out["hcr_plugin"] = _units(est.details["plugin"], args.units)
        out["hcr_quadratic"] = _units(est.details["quadratic"], args.units)
    _emit(args, out)


def _emit(args, payload):
    if args.output:
        _write_json(args.output, payload, args.force)
        _write_config(args, args.output)
    print(_dumps(payload), end="")


def _dmi_record(table, x, y, z, args):
    est = direct_mutual_information(table, x, y, z, _method(args), args.degree, args.bins,
                                    **_extraction_options(args))
    rec = {"pair": [x, y], "z": list(z), "I": _units(est.details["raw"], args.units),
           "I_d": _units(est.value, args.units), "units": args.units}
    if args.reference and len(z) <= 2:
        ref = conditional_mi_reference(table, x, y, z, args.ref_bins)
        rec["reference"] = _units(ref.value, args.units)
    return rec


def cmd_dmi(args):
    table, _ = _load(args)
    if args.x and args.y:
        z = _split(args.z)
        _emit(args, _dmi_record(table, args.x, args.y, z, args))
        return
    names = table.names
    matrix = np.zeros((len(names), len(names)))
    records = []
    for i, x in enumerate(names):
        for j in range(i + 1, len(names)):
            y = names[j]
            z = [c for c in names if c not in (x, y)]
            rec = _dmi_record(table, x, y, z, args)
            matrix[i, j] = matrix[j, i] = rec["I_d"]
            records.append(rec)
    if args.matrix:
        write_csv(SampleTable(names, matrix), args.matrix, args.force)
        _write_config(args, args.matrix)
    _emit(args, {"records": records, "columns": list(names), "units": args.units})


def cmd_granger(args):
    table, _ = _load(args)
    prefix = args.output
    if args.source and args.target:
        pair = analyze_pair(table.column(args.target), table.column(args.source), args.lags,
                            args.max_delay, args.degree, args.source, args.target,
                            bins=args.bins, rank=args.rank, mode=args.mode,
                            iterations=args.iterations)
        _granger_outputs(args, prefix, pair)
        summary = pair.summary()
        summary["peak_mi"] = _units(summary.pop("peak_mi_nats"), args.units)
        summary["units"] = args.units
        _write_json(f"{prefix}.summary.json", summary, args.force)
        _write_config(args, f"{prefix}.summary.json")
        print(_dumps(summary), end="")
        return
    if args.source or args.target:
        raise InvalidInput("pass both --source and --target, or neither for a panel scan")
    report = multivariate_granger(table, args.lags, args.max_delay, args.degree,
                                  decouple_first=args.decouple, sweeps=args.sweeps,
                                  bins=args.bins, rank=args.rank,
                                  residue_iterations=args.iterations, workers=args.threads)
    doc = report.to_dict()
    doc["units"] = args.units
    for p in doc["pairs"]:
        p["peak_mi"] = _units(p.pop("peak_mi_nats"), args.units)
    prof = np.array([[i, d, c, m] for i, r in enumerate(report.pairs)
                     for d, c, m in r.profile.to_rows()])
    _write_json(f"{prefix}.report.json", doc, args.force)
    write_csv(SampleTable(["pair", "delay", "correlation", "mi_nats"], prof),
              f"{prefix}.profiles.csv", args.force)
    _write_config(args, f"{prefix}.report.json")
    print(_dumps(doc), end="")


def _granger_outputs(args, prefix, pair):
    prof = pair.profile
    write_csv(SampleTable(["delay", "correlation", "mi_nats"], np.array(prof.to_rows())),
              f"{prefix}.profile.csv", args.force)
    write_csv(SampleTable(["delay", "j", "k", "a_jk"], np.array(pair.field.to_rows())),
              f"{prefix}.coefficients.csv", args.force)
    dec = pair.decomposition
    if args.variance is not None:
        dec = pca_reduce(pair.field, variance=args.variance)
    _write_json(f"{prefix}.decomposition.json", dec.to_dict(), args.force)
    if len(prof.delays) >= 4:
        freqs, mags = delay_spectrum(prof)
        write_csv(SampleTable(["frequency", "magnitude"], np.column_stack([freqs, mags])),
                  f"{prefix}.spectrum.csv", args.force)
    if args.plot:
        _check_writable(args.plot, args.force)
        series = {"correlation": (prof.delays, prof.correlation)}
        for i in range(dec.rank):
            series[f"a_{i + 1}(dt)"] = (dec.delays, dec.scores[:, i])
        peak = prof.argmax_delay
        emit_svg_lineplot(series, args.plot, title=f"{pair.source} -> {pair.target}",
                          xlabel="delay", ylabel="dependence",
                          annotations=[(peak, prof.correlation[peak], f"argmax dt={peak}")])


def cmd_report(args):
    table, _ = _load(args)
    rep = dependence_report(table, args.bins).to_dict()
    rep["units"] = "nats"
    _emit(args, rep)


# --------------------------------------------------------------------------
# parser


def _common(p, output_required=True):
    p.add_argument("-i", "--input", required=True, help="input CSV file")
    p.add_argument("-o", "--output", required=output_required, help="output path")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--drop-missing", action="store_true", help="drop rows with empty cells")
    p.add_argument("--normalized", action="store_true",
                   help="input is already on the [0,1] quantile scale")


def _model(p):
    p.add_argument("--method", choices=["auto", "joint", "regression"], default="auto")
    p.add_argument("--degree", type=int, default=hcr.DEFAULT_DEGREE)
    p.add_argument("--grid", type=int, default=hcr.DEFAULT_GRID)
    p.add_argument("--floor", type=float, default=hcr.DEFAULT_FLOOR)
    p.add_argument("--ridge", type=float, default=hcr.DEFAULT_RIDGE)
    p.add_argument("--bins", type=int, default=16)


def _globals(p, defaults):
    def d(value):
        return value if defaults else argparse.SUPPRESS
    p.add_argument("--json-errors", action="store_true", default=d(False),
                   help="report errors as JSON on stderr")
    p.add_argument("--threads", type=int, default=d(None),
                   help="worker bound (default: $INFOEXTRACT_THREADS or all cores)")
    p.add_argument("--units", choices=["bits", "nats"], default=d("bits"))
    p.add_argument("--force", action="store_true", default=d(False),
                   help="overwrite existing outputs")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infoextract", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _globals(parser, defaults=True)
    # the same options are accepted after the subcommand name
    shared = argparse.ArgumentParser(add_help=False)
    _globals(shared, defaults=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[shared], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("synth", help="generate a seeded synthetic table")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--spec", help="JSON generator spec (overrides the flags)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--dims", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--noise-z", type=float)
    p.add_argument("--noise-y", type=float)
    p.add_argument("--delay", type=int)
    p.add_argument("--coupling", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--delay-xy", type=int)
    p.add_argument("--delay-yz", type=int)
    p.add_argument("--normalized", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("normalize", help="quantile-normalize every column")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--maps", help="write the fitted quantile maps as JSON")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--drop-missing", action="store_true")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("extract", help="remove the given columns' information from a target")
    _common(p)
    _model(p)
    p.add_argument("--target", required=True)
    p.add_argument("--given", default="", help="comma-separated conditioning columns")
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--layers", help="write the fitted layer stack as JSON")
    p.add_argument("--plot", help="write a before/after scatter SVG")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("reconstruct", help="invert a layer stack")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--layers", required=True)
    p.add_argument("--denormalize", action="store_true",
                   help="map back to the raw scale with the stored quantile maps")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--drop-missing", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("decouple", help="transform columns into independent components")
    _common(p)
    _model(p)
    p.add_argument("--order", help="comma-separated column order (default: file order)")
    p.add_argument("--sweeps", type=int, default=2)
    p.add_argument("--conditioning", choices=["current", "original"], default="current")
    p.add_argument("--symmetric", action="store_true",
                   help="extract every column against all original others (not invertible)")
    p.add_argument("--layers")
    p.add_argument("--report")
    p.set_defaults(func=cmd_decouple)

    p = sub.add_parser("mi", help="mutual information between two columns")
    _common(p, output_required=False)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--degree", type=int, default=hcr.DEFAULT_DEGREE)
    p.add_argument("--estimator", choices=["binned", "hcr", "both"], default="both")
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("dmi", help="direct mutual information")
    _common(p, output_required=False)
    _model(p)
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--z", default="", help="comma-separated intermediate columns")
    p.add_argument("--reference", action="store_true",
                   help="also report the binned conditional MI (at most 2 z columns)")
    p.add_argument("--ref-bins", type=int, default=8)
    p.add_argument("--matrix", help="full-table scan: write the direct-MI matrix CSV here")
    p.set_defaults(func=cmd_dmi)

    p = sub.add_parser("granger", help="multi-feature Granger delay profiles")
    _common(p)
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--lags", type=int, default=2)
    p.add_argument("--max-delay", type=int, default=10)
    p.add_argument("--degree", type=int, default=hcr.DEFAULT_DEGREE)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--variance", type=float, help="PCA variance target instead of --rank")
    p.add_argument("--mode", choices=["distribution", "linear"], default="distribution")
    p.add_argument("--iterations", type=int, default=2, help="residue extraction passes")
    p.add_argument("--sweeps", type=int, default=2)
    p.add_argument("--no-decouple", dest="decouple", action="store_false",
                   help="panel mode: skip decoupling and third-series conditioning")
    p.add_argument("--plot", help="SVG of correlation(dt) and a_i(dt)")
    p.set_defaults(func=cmd_granger)

    p = sub.add_parser("report", help="pairwise dependence report")
    _common(p, output_required=False)
    p.add_argument("--bins", type=int, default=16)
    p.set_defaults(func=cmd_report)
    return parser


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("INFOEXTRACT_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidInput(f"INFOEXTRACT_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.threads = _threads(args)
        if args.threads < 1:
            raise InvalidInput("--threads must be positive")
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            args.func(args)
        return 0
    except (InfoExtractError, OSError) as exc:
        code = exc.exit_code if isinstance(exc, InfoExtractError) else 1
        if args.json_errors:
            sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                         "exit_code": code}) + "\n")
        else:
            sys.stderr.write(f"infoextract: {type(exc).__name__}: {exc}\n")
        return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
