"""Command line interface.

Exit codes: 0 success, 2 invalid configuration or data, 64 usage error,
1 internal failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .errors import ConfigError, InternalError, SpikeProjError
from .model import BulkSpectrum, Rotation, validate_spikes
from .randgen import EntryDistribution, fourth_moment
from .spectral import eig_desc
from .stieltjes import empirical_m, estimate_spike
from .inference import Hypothesis, statistic_T2
from .experiments import (
    FIGURE_REFERENCE,
    ExperimentConfig,
    export_report,
    figure_config,
    power_config,
    run_experiment,
    size_config,
)

_CONFIG_KEYS = (
    "experiment",
    "spikes",
    "bulk",
    "rotation",
    "p",
    "n",
    "c",
    "distribution",
    "replicates",
    "seed",
    "level",
    "track",
    "alt_direction",
    "workers",
    "output",
)

_TABLE1_GRID = [
    (d2, c, n) for d2 in (5, 10, 50, 100) for c in (0.1, 1, 2) for n in (200, 500)
]
_TABLE2_GRID = [
    (d2, c, n) for d2 in (10, 100) for c in (0.1, 1, 2) for n in (100, 200, 500)
]


# --------------------------------------------------------------------------
# configuration file parsing
# --------------------------------------------------------------------------


def _parse_pairs(text: str, line: int, key: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(
                f"line {line}: key {key!r}: expected 'value:count' pairs, got {chunk!r}"
            )
        left, right = chunk.split(":", 1)
        try:
            pairs.append((float(left), float(right)))
        except ValueError as exc:
            raise ConfigError(f"line {line}: key {key!r}: {exc}") from exc
    if not pairs:
        raise ConfigError(f"line {line}: key {key!r}: no pairs given")
    return tuple(pairs)


def _parse_rotation(text: str, line: int) -> Rotation:
    parts = [s.strip() for s in text.split(":")]
    kind = parts[0]
    try:
        if kind == "identity":
            if len(parts) > 1:
                raise ConfigError(f"line {line}: identity rotation takes no parameter")
            return Rotation("identity")
        if kind == "bidiagonal":
            tau = float(parts[1]) if len(parts) > 1 else 0.5
            return Rotation("bidiagonal", tau=tau)
        if kind == "random_orthogonal":
            if len(parts) < 2:
                raise ConfigError(
                    f"line {line}: random_orthogonal rotation needs a seed, "
                    "e.g. random_orthogonal:7"
                )
            return Rotation("random_orthogonal", seed=int(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"line {line}: key 'rotation': {exc}") from exc
    raise ConfigError(f"line {line}: unknown rotation {kind!r}")


def _parse_distribution(text: str, line: int) -> EntryDistribution:
    parts = [s.strip() for s in text.split(":")]
    kind = parts[0]
    try:
        dof = float(parts[1]) if len(parts) > 1 else None
        return EntryDistribution(kind, dof=dof)
    except (ValueError, SpikeProjError) as exc:
        raise ConfigError(f"line {line}: key 'distribution': {exc}") from exc


def parse_config_file(path: str) -> ExperimentConfig:
    """Parse a flat `key = value` experiment description.

    Blank lines and lines starting with '#' are ignored. Errors name the
    offending line and key.
    """
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    seen: dict[str, tuple[str, int]] = {}
    for idx, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {idx}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key, value = key.strip().lower(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {idx}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"line {idx}: key {key!r} already set on line {seen[key][1]}"
            )
        if not value:
            raise ConfigError(f"line {idx}: key {key!r} has no value")
        seen[key] = (value, idx)

    def take(key: str) -> tuple[str, int] | None:
        return seen.get(key)

    def require(key: str) -> tuple[str, int]:
        got = take(key)
        if got is None:
            raise ConfigError(f"missing required key {key!r}")
        return got

    def as_int(key: str, default: int | None = None) -> int | None:
        got = take(key)
        if got is None:
            return default
        value, line = got
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"line {line}: key {key!r}: {exc}") from exc

    def as_float(key: str, default: float | None = None) -> float | None:
        got = take(key)
        if got is None:
            return default
        value, line = got
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"line {line}: key {key!r}: {exc}") from exc

    experiment, _ = require("experiment")
    spikes_text, spikes_line = require("spikes")
    spikes = tuple(
        (v, int(m)) for v, m in _parse_pairs(spikes_text, spikes_line, "spikes")
    )
    bulk_got = take("bulk")
    bulk = (
        _parse_pairs(bulk_got[0], bulk_got[1], "bulk")
        if bulk_got
        else ((1.0, 1.0),)
    )
    rot_got = take("rotation")
    rotation = _parse_rotation(rot_got[0], rot_got[1]) if rot_got else Rotation()
    dist_got = take("distribution")
    distribution = (
        _parse_distribution(dist_got[0], dist_got[1])
        if dist_got
        else EntryDistribution("gaussian")
    )

    n = as_int("n")
    if n is None:
        raise ConfigError("missing required key 'n'")
    p = as_int("p")
    c = as_float("c")
    if p is not None and c is not None:
        raise ConfigError("give 'p' or 'c', not both")
    if p is None:
        if c is None:
            raise ConfigError("one of 'p' or 'c' is required")
        exact = c * n
        if abs(exact - round(exact)) > 1e-9:
            _, line = take("c")
            raise ConfigError(f"line {line}: c = {c} with n = {n} gives non-integer p")
        p = int(round(exact))

    track_got = take("track")
    track = None
    if track_got:
        value, line = track_got
        try:
            track = tuple(int(s.strip()) - 1 for s in value.split(",") if s.strip())
        except ValueError as exc:
            raise ConfigError(f"line {line}: key 'track': {exc}") from exc

    alt = as_int("alt_direction")
    out_got = take("output")

    try:
        return ExperimentConfig(
            experiment=experiment,
            spikes=spikes,
            bulk=bulk,
            rotation=rotation,
            p=p,
            n=n,
            distribution=distribution,
            replicates=as_int("replicates", 100),
            seed=as_int("seed", 20260101),
            level=as_float("level", 0.05),
            track=track,
            alt_direction=alt - 1 if alt is not None else None,
            workers=as_int("workers", 1),
            output=out_got[0] if out_got else None,
        )
    except SpikeProjError:
        raise
    except Exception as exc:  # bad combinations surface as config errors
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _load_matrix(path: str, what: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{what} {path} is not a numeric CSV: {exc}") from exc
    return data


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "replicates", None) is not None:
        updates["replicates"] = args.replicates
    if getattr(args, "level", None) is not None:
        updates["level"] = args.level
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if getattr(args, "output", None) is not None:
        updates["output"] = args.output
    if getattr(args, "fast", False):
        updates["replicates"] = min(
            updates.get("replicates", cfg.replicates), 500
        )
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _run_and_report(cfg: ExperimentConfig) -> dict:
    report = run_experiment(cfg)
    if cfg.output:
        paths = export_report(report, cfg.output)
        report.summary["output_files"] = paths
    return report.summary


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_validate_model(args) -> int:
    cfg = parse_config_file(args.config)
    model = cfg.model()
    rows = validate_spikes(model, cfg.c)
    print(f"p = {cfg.p}, n = {cfg.n}, c = {cfg.c:g}, rotation = {cfg.rotation.kind}")
    print(f"{'spike':>10} {'mult':>5} {'side':>6} {'psi':>12} {'slope':>12} detectable")
    for row in rows:
        print(
            f"{row.value:>10.6g} {row.multiplicity:>5d} {row.side:>6} "
            f"{row.psi_value:>12.6f} {row.psi_slope:>12.6f} "
            f"{'yes' if row.detectable else 'NO'}"
        )
    return 0


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(parse_config_file(args.config), args)
    _print_json(_run_and_report(cfg))
    return 0


def cmd_estimate(args) -> int:
    data = _load_matrix(args.data, "data matrix")
    p, n = data.shape
    if n < 2:
        raise ConfigError(f"need at least 2 samples (columns), got {n}")
    b = (data @ data.T) / n
    spec = eig_desc((b + b.T) * 0.5)
    try:
        ranks = [int(s) for s in args.ranks.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--ranks: {exc}") from exc
    out = []
    for rank in ranks:
        emp = empirical_m(spec.eigenvalues, rank, n)
        out.append(
            {
                "rank": rank,
                "eigenvalue": emp.target_value,
                "spike_estimate": estimate_spike(spec.eigenvalues, rank, n),
                "c_tilde": emp.c_tilde,
                "clustered_ranks": list(emp.excluded),
            }
        )
    _print_json({"p": p, "n": n, "estimates": out})
    return 0


def cmd_test(args) -> int:
    data = _load_matrix(args.data, "data matrix")
    p, n = data.shape
    basis = _load_matrix(args.basis, "basis vector")
    v = basis[:, 0] if basis.shape[1] == 1 else basis[0, :]
    if v.size != p:
        raise ConfigError(
            f"basis length {v.size} does not match data dimension {p}"
        )
    bulk = BulkSpectrum.from_pairs(
        _parse_pairs(args.bulk, 0, "--bulk") if args.bulk else ((1.0, 1.0),)
    )
    dist = _parse_distribution(
        args.distribution if args.dof is None else f"{args.distribution}:{args.dof}",
        0,
    )
    b = (data @ data.T) / n
    spec = eig_desc((b + b.T) * 0.5)
    mode = "oracle" if args.oracle_spike is not None else "adaptive"
    outcome = statistic_T2(
        spec,
        n,
        Hypothesis((args.rank,), v),
        p / n,
        bulk,
        ex4=fourth_moment(dist),
        level=args.level,
        mode=mode,
        d2_oracle=args.oracle_spike,
    )
    _print_json(dataclasses.asdict(outcome))
    return 0


def _parse_cell(text: str) -> tuple[float, float, int]:
    parts = dict()
    for chunk in text.split(","):
        if "=" not in chunk:
            raise ConfigError(f"--cell: expected d2=..,c=..,n=.., got {chunk!r}")
        key, value = chunk.split("=", 1)
        parts[key.strip()] = value.strip()
    try:
        return float(parts["d2"]), float(parts["c"]), int(parts["n"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"--cell needs d2=, c=, n=: {exc}") from exc


def _run_table(args, grid, make_config, reference, label: str) -> int:
    chosen = grid
    if args.cell:
        want = _parse_cell(args.cell)
        chosen = [
            cell
            for cell in grid
            if (float(cell[0]), float(cell[1]), cell[2])
            == (want[0], want[1], want[2])
        ]
        if not chosen:
            raise ConfigError(f"--cell {args.cell!r} is not in the {label} grid")
    replicates = 500 if args.fast else 2000
    print(
        f"{'d2':>6} {'c':>5} {'n':>5} {'p':>6} {'R':>6} "
        f"{'rate':>8} {'se':>8} {'reference':>10}"
    )
    rows = []
    for idx, (d2, c, n) in enumerate(grid):
        if (d2, c, n) not in chosen:
            continue
        cfg = make_config(
            d2,
            c,
            n,
            replicates=replicates,
            seed=args.seed + idx,
            workers=args.workers,
        )
        summary = _run_and_report(
            dataclasses.replace(
                cfg,
                output=(
                    f"{args.output}/cell_d{d2:g}_c{c:g}_n{n}" if args.output else None
                ),
            )
        )
        ref = reference.get((d2, c, n))
        rows.append(summary)
        print(
            f"{d2:>6g} {c:>5g} {n:>5d} {summary['p']:>6d} "
            f"{summary['replicates']:>6d} {summary['rejection_rate']:>8.4f} "
            f"{summary['rejection_se']:>8.4f} "
            f"{ref if ref is not None else float('nan'):>10.4f}"
        )
    return 0


def cmd_reproduce_table1(args) -> int:
    from .experiments import SIZE_REFERENCE

    return _run_table(args, _TABLE1_GRID, size_config, SIZE_REFERENCE, "size table")


def cmd_reproduce_table2(args) -> int:
    from .experiments import POWER_REFERENCE

    return _run_table(args, _TABLE2_GRID, power_config, POWER_REFERENCE, "power table")


def cmd_reproduce_figures(args) -> int:
    replicates = 250 if args.fast else 1000
    for case in (1, 2):
        cfg = figure_config(
            case,
            replicates=replicates,
            seed=args.seed,
            workers=args.workers,
        )
        if args.output:
            cfg = dataclasses.replace(cfg, output=f"{args.output}/case{case}")
        summary = _run_and_report(cfg)
        print(f"case {case}: p={summary['p']} n={summary['n']} R={summary['replicates']}")
        for name, stats in summary["statistics"].items():
            ref = FIGURE_REFERENCE.get(f"case{case}_{name}")
            line = (
                f"  {name}: spike={stats['group_spike']:g} "
                f"center_n={stats['center_n']:.6f} "
                f"mean_raw={stats['mean_raw']:.6f} "
                f"sd_limit={np.sqrt(stats['variance_limit']):.4f} "
                f"ks_p={stats['ks_pvalue']:.4f}"
            )
            if ref is not None:
                line += f" reference_center={ref[0]:.4f} reference_sd={ref[1]:.4f}"
            print(line)
    return 0


# --------------------------------------------------------------------------
# parser and entry point
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeproj",
        description=(
            "Asymptotic centers, fluctuations, and tests for eigenprojections "
            "of spiked sample covariance matrices."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, output_default=None):
        sp.add_argument("--seed", type=int, default=None, help="override RNG seed")
        sp.add_argument(
            "--replicates", type=int, default=None, help="override replicate count"
        )
        sp.add_argument("--level", type=float, default=None, help="test level")
        sp.add_argument("--workers", type=int, default=None, help="process count")
        sp.add_argument("--output", default=output_default, help="report directory")
        sp.add_argument(
            "--fast",
            action="store_true",
            help="cap replicates at 500 for a quick pass",
        )

    sp = sub.add_parser("validate-model", help="check a model config, report spikes")
    sp.add_argument("--config", required=True)
    sp.set_defaults(handler=cmd_validate_model)

    sp = sub.add_parser("simulate", help="run the experiment described by a config")
    sp.add_argument("--config", required=True)
    add_common(sp)
    sp.set_defaults(handler=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate spikes from a p x n data CSV")
    sp.add_argument("--data", required=True, help="CSV, rows are variables")
    sp.add_argument(
        "--ranks",
        default="0",
        help="comma list of eigenvalue ranks to invert (0 = largest)",
    )
    sp.set_defaults(handler=cmd_estimate)

    sp = sub.add_parser("test", help="eigenspace test from data and a direction")
    sp.add_argument("--data", required=True, help="CSV, rows are variables")
    sp.add_argument("--basis", required=True, help="CSV holding the unit direction")
    sp.add_argument("--rank", type=int, default=0, help="sample eigenvalue rank")
    sp.add_argument("--level", type=float, default=0.05)
    sp.add_argument("--bulk", default=None, help="bulk atoms, e.g. '2:0.5, 1:0.5'")
    sp.add_argument(
        "--distribution",
        default="gaussian",
        help="entry law: gaussian | rademacher | uniform | student_t",
    )
    sp.add_argument("--dof", type=float, default=None, help="student_t dof")
    sp.add_argument(
        "--oracle-spike",
        type=float,
        default=None,
        help="use this true spike instead of the plug-in estimate",
    )
    sp.set_defaults(handler=cmd_test)

    for name, handler, default_seed in (
        ("reproduce-table1", cmd_reproduce_table1, 20260101),
        ("reproduce-table2", cmd_reproduce_table2, 20260115),
    ):
        sp = sub.add_parser(name, help=f"{name.replace('-', ' ')} cells")
        sp.add_argument("--cell", default=None, help="single cell: d2=5,c=0.1,n=200")
        sp.add_argument("--seed", type=int, default=default_seed)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--output", default=None, help="per-cell report directory")
        sp.add_argument("--fast", action="store_true", help="500 replicates per cell")
        sp.set_defaults(handler=handler)

    sp = sub.add_parser("reproduce-figures", help="projection CLT for both cases")
    sp.add_argument("--seed", type=int, default=20260101)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--output", default=None)
    sp.add_argument("--fast", action="store_true", help="250 replicates")
    sp.set_defaults(handler=cmd_reproduce_figures)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return 0 if exc.code in (0, None) else 64
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except SpikeProjError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last resort
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
