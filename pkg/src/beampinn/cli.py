"""Command-line entry point: ``beampinn {forward,inverse,oracle,eval,delta-fit}``.

Exit codes: 0 success, 2 configuration/usage error, 3 training divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .beam import BeamConfig, analytical_deflection, relative_error_percent
from .config import Experiment, OracleSettings, build_experiment, load_experiment
from .errors import BeamPinnError, ConfigurationError, TrainingError, UsageError
from .fields import GridField, read_field_csv, write_field_csv
from .network import forward, load_checkpoint, save_checkpoint
from .reference import solve_reference
from .sampling import read_sensor_csv, sample_sensor_data
from .trainer import RunReport, delta_fit_preset, fit_delta_dnn, train

log = logging.getLogger("beampinn")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4


def make_oracle(beam: BeamConfig, settings: OracleSettings, delta=None):
    """Field evaluator ``(x, t) -> u`` for the selected ground-truth engine."""
    if settings.engine == "series":
        return lambda x, t: analytical_deflection(x, t, beam, settings.n_terms, settings.resonance_eps)
    if delta is None or delta.kind != "gaussian":
        raise ConfigurationError("the modal engine needs a Gaussian delta model")
    return solve_reference(beam, delta, settings.n_modes, settings.dt)


def _grid_axes(beam: BeamConfig, nx: int, nt: int):
    return np.linspace(0.0, beam.L, nx), np.linspace(0.0, beam.t_end, nt)


def _experiment(args, preset: str) -> Experiment:
    if args.config is None:
        return build_experiment({}, preset)
    return load_experiment(args.config, preset)


def _apply_overrides(exp: Experiment, args) -> Experiment:
    train = exp.train
    changes = {}
    for name in ("epochs", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    delta_kind = getattr(args, "delta", None)
    if delta_kind is not None:
        changes["delta"] = dataclasses.replace(train.delta, kind=delta_kind)
    beam = exp.beam
    if getattr(args, "p", None) is not None:
        beam = dataclasses.replace(beam, p=args.p)
    out_dir = getattr(args, "out", None) or exp.output_dir
    return dataclasses.replace(exp, beam=beam, train=dataclasses.replace(train, **changes), output_dir=out_dir)


def _write_run(out_dir: Path, exp: Experiment, report: RunReport, params) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    xs, ts = _grid_axes(exp.beam, exp.train.eval_nx, exp.train.eval_nt)
    field = GridField.from_function(lambda x, t: forward(params, x, t), xs, ts)
    write_field_csv(out_dir / "field.csv", field)
    save_checkpoint(out_dir / "params.bin", params)
    doc = report.to_dict()
    doc["config"] = exp.echo()
    doc["counts"] = report.config.get("counts")
    doc["checkpoint"] = "params.bin"
    doc["field_csv"] = "field.csv"
    (out_dir / "config.json").write_text(json.dumps(exp.echo(), indent=2) + "\n")
    (out_dir / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    return doc


def _summary(doc: dict) -> str:
    parts = [f"final_loss={doc['final_loss']:.6g}"]
    if doc.get("relative_error_percent") is not None:
        parts.append(f"R_final={doc['relative_error_percent']:.6g}%")
    if doc.get("relative_error_percent_grid") is not None:
        parts.append(f"R_grid={doc['relative_error_percent_grid']:.6g}%")
    if doc.get("predicted_p") is not None:
        parts.append(f"p_hat={doc['predicted_p']:.6g}")
    return " ".join(parts)


def _progress(every: int = 500):
    def report(epoch, value):
        if epoch % every == 0:
            log.info("epoch %d loss %.6g", epoch, value)

    return report


def cmd_forward(args) -> int:
    exp = _apply_overrides(_experiment(args, "forward"), args)
    oracle = make_oracle(exp.beam, exp.oracle, exp.train.delta)
    report, params = train(exp.beam, exp.train, oracle, progress=_progress())
    report.provenance = {"oracle": exp.oracle.engine}
    doc = _write_run(Path(exp.output_dir or "runs/forward"), exp, report, params)
    print(_summary(doc))
    return EXIT_OK


def cmd_inverse(args) -> int:
    exp = _apply_overrides(_experiment(args, "inverse"), args)
    cfg = exp.train
    if args.data:
        data = read_sensor_csv(args.data)
        provenance = {"sensor_data": str(args.data), "source": "csv"}
    else:
        fwd_report = Path(args.from_forward)
        doc = json.loads(fwd_report.read_text())
        ckpt = fwd_report.parent / doc.get("checkpoint", "params.bin")
        net = load_checkpoint(ckpt)
        data = sample_sensor_data(cfg.sensor_locations, cfg.n_data, exp.beam, lambda x, t: forward(net, x, t), cfg.seed)
        provenance = {"sensor_data": str(fwd_report), "source": "forward-run", "checkpoint": str(ckpt)}
        true_p = doc.get("config", {}).get("beam", {}).get("p")
        if true_p is not None:
            provenance["forward_p"] = true_p
            exp = dataclasses.replace(exp, beam=dataclasses.replace(exp.beam, p=float(true_p)))
    oracle = make_oracle(exp.beam, exp.oracle, cfg.delta)
    report, params = train(exp.beam, cfg, oracle, data=data, progress=_progress(250))
    report.provenance = {**provenance, "oracle": exp.oracle.engine}
    doc = _write_run(Path(exp.output_dir or "runs/inverse"), exp, report, params)
    print(_summary(doc))
    return EXIT_OK


def cmd_oracle(args) -> int:
    exp = _experiment(args, "forward")
    settings = exp.oracle if args.engine is None else dataclasses.replace(exp.oracle, engine=args.engine)
    fn = make_oracle(exp.beam, settings, exp.train.delta)
    xs, ts = _grid_axes(exp.beam, exp.train.eval_nx, exp.train.eval_nt)
    write_field_csv(args.out, GridField.from_function(fn, xs, ts))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred, truth = read_field_csv(args.pred), read_field_csv(args.truth)
    if not pred.same_grid(truth):
        raise UsageError(
            f"grid mismatch: {args.pred} has {len(pred.ts)}x{len(pred.xs)} points, "
            f"{args.truth} has {len(truth.ts)}x{len(truth.xs)}"
        )
    r_grid = relative_error_percent(pred.values, truth.values)
    r_final = relative_error_percent(pred.values[-1], truth.values[-1])
    print(f"R = {r_grid:.17g}")
    print(f"R_final_time = {r_final:.17g}")
    if args.emit_abs_err:
        write_field_csv(args.emit_abs_err, GridField(pred.xs, pred.ts, np.abs(pred.values - truth.values)))
    return EXIT_OK


def cmd_delta_fit(args) -> int:
    overrides = {k: getattr(args, k) for k in ("epochs", "seed", "learning_rate") if getattr(args, k) is not None}
    cfg = delta_fit_preset(**overrides)
    report, params = fit_delta_dnn(args.sigma, cfg, progress=_progress(1000))
    doc = report.to_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "params.bin", params)
        doc["checkpoint"] = "params.bin"
        (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"R = {report.relative_error_percent:.6g}%")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beampinn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="train a forward PINN and write field, report and checkpoint")
    p.add_argument("--config", help="experiment JSON (omitted: built-in defaults)")
    p.add_argument("--delta", choices=["gaussian", "discrete"])
    p.add_argument("--p", type=float, help="override the load magnitude")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("inverse", help="recover the load magnitude from sensor data")
    p.add_argument("--config")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV with columns x,t,u")
    src.add_argument("--from-forward", help="report.json of a forward run to sample sensors from")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_inverse)

    p = sub.add_parser("oracle", help="write a ground-truth field CSV")
    p.add_argument("--config")
    p.add_argument("--engine", choices=["series", "modal"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="relative error percent between two field CSVs")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--emit-abs-err", help="also write |pred - truth| as a field CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("delta-fit", help="fit a narrow Gaussian with a plain network")
    p.add_argument("--sigma", type=float, default=1e-3)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_delta_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigurationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BeamPinnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
