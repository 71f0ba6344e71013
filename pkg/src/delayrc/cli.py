"""Command-line entry point: ``delayrc {generate,scan,sweep,report}``.

Exit codes: 0 success, 1 validation error, 2 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from . import io
from .errors import NumericalError, ValidationError
from .masking import MaskDistribution, calibrate_input_range, generate_masks
from .optimizer import (PRESETS, ClassificationObjective, SeriesObjective, TaskPreset,
                        get_preset, scan_beta2_delay, sweep_attenuation, with_overrides)
from .reservoir import Nonlinearity
from .tasks import (MackeyGlassParams, Narma10Params, SeriesTask, SplitSpec,
                    generate_mackey_glass, generate_narma10, generate_separable_utterances,
                    generate_temporal_context_utterances)

logger = logging.getLogger("delayrc")


# --- config -> experiment --------------------------------------------------

def build_objective(cfg: io.ExperimentConfig, base_dir: Path):
    split = SplitSpec(**cfg.split) if cfg.split else None
    if cfg.task == "narma10":
        task = generate_narma10(Narma10Params(**cfg.task_params), split)
        return SeriesObjective(task)
    if cfg.task == "mackey-glass":
        task = generate_mackey_glass(MackeyGlassParams(**cfg.task_params), split)
        return SeriesObjective(task)
    path = Path(cfg.dataset_path)
    if not path.is_absolute():
        path = base_dir / path
    data = io.read_dataset(path)
    if isinstance(data, SeriesTask):
        if split is not None:
            data = dataclasses.replace(data, split=split)
        return SeriesObjective(data)
    proto = dict(cfg.protocol)
    kind = proto.pop("kind")
    return ClassificationObjective(data, kind, name=path.stem, **proto)


def resolve_preset(cfg: io.ExperimentConfig, objective) -> TaskPreset:
    if cfg.preset is not None:
        base = get_preset(cfg.preset)
    else:
        base = TaskPreset("custom", cfg.beta1, cfg.bias_j0, (cfg.attenuation_db or 0.0,),
                          cfg.ridge_lambda, cfg.n_nodes)
    preset = with_overrides(base, beta1=cfg.beta1, bias_j0=cfg.bias_j0,
                            attenuation_db=cfg.attenuation_db, ridge_lambda=cfg.ridge_lambda,
                            n_nodes=cfg.n_nodes)
    if cfg.calibrate_input is not None:
        masks = generate_masks(preset.n_nodes, objective.inputs.channels, cfg.seeds[0],
                               cfg.mask_distribution)
        beta1, bias = calibrate_input_range(objective.inputs, masks, *cfg.calibrate_input)
        preset = dataclasses.replace(preset, beta1=beta1, bias_j0=bias)
    return preset


def _task_name(cfg, objective) -> str:
    return cfg.task if cfg.task != "dataset" else objective.name


def _echo(cfg: io.ExperimentConfig) -> io.ExperimentConfig:
    # output location and worker count do not influence results
    return dataclasses.replace(cfg, output_dir="", parallelism=1)


def _sidecar(t0: float, started: str) -> dict:
    return {"started": started, "wall_seconds": time.perf_counter() - t0}


def run_scan(cfg: io.ExperimentConfig, base_dir: Path, out_dir: Path) -> dict:
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    objective = build_objective(cfg, base_dir)
    preset = resolve_preset(cfg, objective)
    result = scan_beta2_delay(
        objective, preset, cfg.beta2_grid, cfg.d_grid, cfg.seeds, alpha=cfg.alpha,
        nonlinearity=Nonlinearity(cfg.nonlinearity),
        mask_distribution=MaskDistribution(cfg.mask_distribution), experiment_seed=cfg.seed,
        seeded_initial_state=cfg.seeded_initial_state, parallelism=cfg.parallelism,
    )
    best = result.best_cell
    logger.info("best %s = %.4g at beta2=%g d=%d (baseline %.4g)", result.metric, best.metric,
                best.beta2, best.d, result.baseline())
    return io.write_scan(result, _echo(cfg), _task_name(cfg, objective), out_dir,
                         _sidecar(t0, started))


def run_sweep(cfg: io.ExperimentConfig, base_dir: Path, out_dir: Path) -> dict:
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    objective = build_objective(cfg, base_dir)
    preset = resolve_preset(cfg, objective)
    curves = [
        sweep_attenuation(
            objective, preset, mode, cfg.attenuation_grid_db, beta2_grid=cfg.beta2_grid,
            d_grid=cfg.d_grid, seeds=cfg.seeds, beta1_factors=cfg.beta1_factors,
            lambda_grid=cfg.lambda_grid, nonlinearity=Nonlinearity(cfg.nonlinearity),
            mask_distribution=MaskDistribution(cfg.mask_distribution),
            experiment_seed=cfg.seed, parallelism=cfg.parallelism,
        )
        for mode in cfg.modes
    ]
    return io.write_sweep(curves, _echo(cfg), _task_name(cfg, objective), preset, out_dir,
                          _sidecar(t0, started))


# --- argument parsing ------------------------------------------------------

def _generate(args) -> int:
    kind = args.kind
    if kind == "narma10":
        data = generate_narma10(Narma10Params(length=args.length, input_seed=args.seed,
                                              target_offset=args.target_offset))
    elif kind == "mackey-glass":
        data = generate_mackey_glass(MackeyGlassParams(
            length=args.length, horizon=args.horizon, substeps=args.substeps,
            transient_samples=args.transient, history_value=args.history))
    elif kind == "synthetic-utterances":
        data = generate_separable_utterances(args.classes, args.count, args.channels,
                                             args.min_len, args.max_len, args.noise, args.seed)
    elif kind == "temporal-context":
        data = generate_temporal_context_utterances(args.lag, args.count, noise=args.noise,
                                                    seed=args.seed)
    else:
        data = io.import_feature_manifest(args.manifest, args.classes)
    out = Path(args.out)
    io.write_dataset(out, data)
    if args.text:
        io.export_text(data, out.with_suffix(out.suffix + ".tsv"))
    print(out)
    return 0


def _apply_cli_overrides(cfg: io.ExperimentConfig, args) -> io.ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.parallelism is not None:
        changes["parallelism"] = args.parallelism
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise ValidationError(f"unknown preset {args.preset!r}; known: {', '.join(PRESETS)}")
        changes["preset"] = args.preset
    if args.out is not None:
        changes["output_dir"] = args.out
    return dataclasses.replace(cfg, **changes)


def _experiment(args, runner) -> int:
    cfg = _apply_cli_overrides(io.load_config(args.config), args)
    base = Path(args.config).resolve().parent
    paths = runner(cfg, base, Path(cfg.output_dir))
    for p in paths.values():
        print(p)
    return 0


def _report(args) -> int:
    payloads = [io.load_result(p) for p in args.results]
    print(io.format_report(io.summary_rows(payloads)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayrc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a benchmark dataset file")
    gen.add_argument("kind", choices=["narma10", "mackey-glass", "synthetic-utterances",
                                      "temporal-context", "import"])
    gen.add_argument("--out", required=True)
    gen.add_argument("--text", action="store_true", help="also write a .tsv text export")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--length", type=int, default=21000)
    gen.add_argument("--target-offset", type=int, default=1, help="NARMA10: target(n) = q(n + offset)")
    gen.add_argument("--horizon", type=int, default=10)
    gen.add_argument("--substeps", type=int, default=10)
    gen.add_argument("--transient", type=int, default=1000)
    gen.add_argument("--history", type=float, default=1.2)
    gen.add_argument("--classes", type=int, default=None)
    gen.add_argument("--count", type=int, default=60)
    gen.add_argument("--channels", type=int, default=3)
    gen.add_argument("--min-len", type=int, default=8)
    gen.add_argument("--max-len", type=int, default=15)
    gen.add_argument("--noise", type=float, default=0.02)
    gen.add_argument("--lag", type=int, default=3)
    gen.add_argument("--manifest", help="import: id<TAB>label<TAB>path manifest")
    gen.set_defaults(func=_generate)

    for name, runner, text in (("scan", run_scan, "scan (beta2, d) and write the metric surface"),
                               ("sweep", run_sweep, "sweep feedback attenuation per mode")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="experiment seed (overrides config)")
        p.add_argument("--parallelism", type=int, default=None)
        p.add_argument("--preset", default=None, choices=sorted(PRESETS))
        p.set_defaults(func=lambda a, r=runner: _experiment(a, r))

    rep = sub.add_parser("report", help="summarise result files")
    rep.add_argument("results", nargs="*")
    rep.set_defaults(func=_report)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "kind", None) == "synthetic-utterances" and args.classes is None:
        args.classes = 3
    if getattr(args, "kind", None) == "import" and not args.manifest:
        parser.error("import needs --manifest")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
