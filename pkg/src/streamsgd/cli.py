"""Command-line interface: run experiments, sweep parameter grids, and print
the analytic buffer-growth table.

Subcommands: run, sweep, analyze buffer-model. Exit codes: 0 success,
1 config error, 2 runtime divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import math
import sys
from pathlib import Path

from .config import ConfigError, SimConfig, load_config, parse_config, render_config
from .engine import DivergenceError, IterationMetrics, RunResult, run_experiment
from .streams import QueueModelParams, analytic_queue_size

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2

_BASE_COLUMNS = [
    "iteration",
    "sim_time_s",
    "epoch",
    "global_batch",
    "lr_used",
    "train_loss",
    "test_accuracy",
    "wait_time_s",
    "buffer_samples_total",
    "buffer_bytes",
    "floats_sent_cum",
    "bytes_sent_cum",
    "cnc_cum",
    "injection_bytes",
    "injection_bytes_cum",
]


def metrics_columns(n_devices: int) -> list[str]:
    return _BASE_COLUMNS + [f"buffer_len_dev{d}" for d in range(n_devices)]


def _cell(value) -> str:
    return "" if value is None else repr(value) if isinstance(value, float) else str(value)


def metrics_row(m: IterationMetrics) -> list[str]:
    values = [
        m.iteration, m.sim_time_s, m.epoch, m.global_batch, m.lr_used,
        m.train_loss, m.test_accuracy, m.wait_time_s, m.buffer_samples_total,
        m.buffer_bytes, m.floats_sent_cum, m.bytes_sent_cum, m.cnc_cum,
        m.injection_bytes, m.injection_bytes_cum,
    ]
    return [_cell(v) for v in values] + [str(o) for o in m.buffer_occupancy]


def write_metrics_csv(path, result: RunResult, n_devices: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(metrics_columns(n_devices))
        for row in result.metrics:
            writer.writerow(metrics_row(row))


def write_summary_json(path, result: RunResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(result.summary), fh, indent=2)
        fh.write("\n")


def _execute_run(config: SimConfig, out_dir: Path, quiet: bool) -> RunResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_experiment(config)
    write_metrics_csv(out_dir / "metrics.csv", result, config.n_devices)
    write_summary_json(out_dir / "summary.json", result)
    if not quiet:
        s = result.summary
        acc = "n/a" if s.final_accuracy is None else f"{s.final_accuracy:.4f}"
        print(
            f"{out_dir}: {s.iterations} iterations, {s.epochs_completed} epochs, "
            f"sim time {s.sim_time_s:.2f}s, accuracy {acc}"
        )
    return result


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        _execute_run(config, Path(args.out), args.quiet)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"run diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _parse_grid(specs: list[str]) -> list[tuple[tuple[str, ...], list[tuple]]]:
    """Parse --grid KEY=V1,V2 or zipped --grid K1,K2=V1a,V2a;V1b,V2b."""
    axes = []
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"grid spec needs KEY=VALUES: {spec!r}")
        key_part, value_part = spec.split("=", 1)
        keys = tuple(k.strip() for k in key_part.split(","))
        groups = value_part.split(";") if ";" in value_part else (
            value_part.split(",") if len(keys) == 1 else [value_part]
        )
        points = []
        for group in groups:
            parts = [p.strip() for p in group.split(",")]
            if len(parts) != len(keys):
                raise ConfigError(
                    f"grid point {group!r} does not match keys {','.join(keys)}"
                )
            points.append(tuple(json.loads(p) for p in parts))
        if not points:
            raise ConfigError(f"empty grid for {','.join(keys)}")
        axes.append((keys, points))
    if not axes:
        raise ConfigError("sweep needs at least one --grid axis")
    return axes


def _set_path(data: dict, dotted: str, value) -> None:
    node = data
    parts = dotted.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def _point_label(assignment: dict) -> str:
    pieces = [f"{k.split('.')[-1]}={v}" for k, v in assignment.items()]
    return "_".join(pieces).replace("/", "-")


def cmd_sweep(args) -> int:
    try:
        base_text = Path(args.config).read_text(encoding="utf-8")
        base_config = parse_config(base_text)  # validate before sweeping
        if args.seed is not None:
            base_config.seed = args.seed
        axes = _parse_grid(args.grid)

        out_root = Path(args.out)
        out_root.mkdir(parents=True, exist_ok=True)
        grid_keys = [k for keys, _ in axes for k in keys]
        summary_rows = []
        for i, combo in enumerate(itertools.product(*(points for _, points in axes))):
            assignment: dict = {}
            for (keys, _), values in zip(axes, combo):
                for k, v in zip(keys, values):
                    assignment[k] = v
            data = json.loads(render_config(base_config))
            for key, value in assignment.items():
                _set_path(data, key, value)
            config = parse_config(json.dumps(data))
            run_dir = out_root / f"{i:03d}_{_point_label(assignment)}"
            result = _execute_run(config, run_dir, args.quiet)
            row = {k: assignment[k] for k in grid_keys}
            row.update(dataclasses.asdict(result.summary))
            summary_rows.append(row)

        with open(out_root / "sweep_summary.csv", "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=list(summary_rows[0].keys()), lineterminator="\n"
            )
            writer.writeheader()
            for row in summary_rows:
                writer.writerow({k: _cell(v) for k, v in row.items()})
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"run diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_buffer_model(args) -> int:
    try:
        if args.t < 0 or args.rate <= 0 or args.batch < 1 or args.t_max < 0:
            raise ConfigError("buffer-model needs t >= 0, rate > 0, batch >= 1, t-max >= 0")
        step = args.step if args.step else max(1, args.t_max // 20)
        exact_ok = args.t > 0 and args.t * args.rate >= args.batch

        header = ["T", "Q_exact", "Q_approx", "GB", "log10_Q_approx"]
        rows = []
        for T in range(0, args.t_max + 1, step):
            p = QueueModelParams(t=args.t, S=args.rate, b=args.batch, T=T)
            q_approx = analytic_queue_size(p, form="approx")
            q_exact = analytic_queue_size(p, form="exact") if exact_ok else None
            gb = q_approx * args.sample_bytes / 1024**3
            rows.append(
                [
                    str(T),
                    "n/a" if q_exact is None else repr(q_exact),
                    repr(q_approx),
                    repr(gb),
                    repr(math.log10(q_approx)),
                ]
            )
        widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
        if not args.quiet:
            print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
            for r in rows:
                print("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        if args.out:
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                for r in rows:
                    writer.writerow(["" if c == "n/a" else c for c in r])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamsgd",
        description="Simulate synchronous distributed SGD over streaming data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("--config", required=True, help="path to a JSON config")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a grid of configs")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.add_argument(
        "--grid",
        action="append",
        default=[],
        metavar="KEY=V1,V2",
        help="grid axis over a dotted config path; repeat for a product, "
        "use K1,K2=a,b;c,d for zipped pairs",
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_analyze = sub.add_parser("analyze", help="analytic tools")
    analyze_sub = p_analyze.add_subparsers(dest="analysis", required=True)
    p_bm = analyze_sub.add_parser(
        "buffer-model", help="closed-form buffer occupancy over timesteps"
    )
    p_bm.add_argument("--t", type=float, required=True, help="iteration time, seconds")
    p_bm.add_argument("--rate", type=float, required=True, help="stream rate, samples/sec")
    p_bm.add_argument("--batch", type=int, default=64, help="batch consumed per iteration")
    p_bm.add_argument("--t-max", type=int, required=True, help="largest timestep")
    p_bm.add_argument("--step", type=int, default=0, help="timestep stride (default t-max/20)")
    p_bm.add_argument("--sample-bytes", type=int, default=3072)
    p_bm.add_argument("--out", default=None, help="also write the table as CSV")
    p_bm.add_argument("--quiet", action="store_true")
    p_bm.set_defaults(func=cmd_buffer_model)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
