"""Command-line entry point for substrate ingestion, exposure analysis,
simulation runs, phase sweeps, and tail fitting.

Every command is deterministic given its inputs and master seed: reruns
overwrite their outputs with identical bytes. Exit codes: 0 success,
1 input or validation error, 2 runtime (engine) error.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, section_for
from .dynamics import Params
from .exposure import compute_exposure, rank_exposure
from .experiments import (
    PhaseGridSpec,
    ScenarioSpec,
    child_seed,
    convergence_report,
    preset_scenarios,
    prepare_substrate,
    run_phase_grid,
    run_scenario,
)
from .ingest import (
    DEFAULT_MEAN_LEAKAGE,
    TableError,
    list_years,
    parse_io_table,
    synth_substrate,
    write_io_table,
)
from .operators import OperatorKind, build_operator, leakage_profile
from .tail import TailError, ccdf, fit_alpha, select_xmin

_CELL_RE = re.compile(r"^([A-Za-z0-9_-]+):([0-9.eE+-]+):([0-9.eE+-]+)$")
_NAME_RE = re.compile(r"^[A-Za-z0-9_-]+$")


def _fmt(value) -> str:
    # repr keeps float cells round-trip exact, so reruns are byte-identical
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _emit(out_dir: Path, name: str, header: tuple[str, ...], rows, as_json: bool) -> Path:
    rows = list(rows)
    path = out_dir / name
    _write_csv(path, header, rows)
    if as_json:
        payload = [
            {k: (v.value if hasattr(v, "value") else v) for k, v in zip(header, row)}
            for row in rows
        ]
        jpath = path.with_suffix(".json")
        with open(jpath, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_substrate_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("substrate")
    g.add_argument("--flows", help="long-format flows CSV")
    g.add_argument("--year", type=int, help="year to select from the flows file")
    g.add_argument("--row-use", help="companion gross row-use CSV (default: sibling row_use.csv)")
    g.add_argument("--synth-nodes", type=int, help="generate a synthetic substrate with this many nodes")
    g.add_argument("--synth-density", type=float, default=0.1, help="edge probability for the synthetic substrate")
    g.add_argument("--synth-seed", type=int, default=0, help="seed for the synthetic substrate")
    g.add_argument(
        "--synth-mean-leakage",
        type=float,
        default=DEFAULT_MEAN_LEAKAGE,
        help="mean leak share of the synthetic substrate (calibrated default)",
    )
    g.add_argument("--synth-year", type=int, default=2014, help="year stamp for the synthetic substrate")


def _load_table(args):
    if args.flows:
        if args.year is None:
            raise TableError("--year is required with --flows")
        return parse_io_table(args.flows, args.year, row_use_path=args.row_use)
    if args.synth_nodes:
        return synth_substrate(
            args.synth_nodes,
            args.synth_density,
            args.synth_seed,
            year=args.synth_year,
            mean_leakage=args.synth_mean_leakage,
        )
    raise TableError("no substrate given: pass --flows with --year, or --synth-nodes")


def _add_param_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("engine parameters (calibrated defaults)")
    g.add_argument("--delta", type=float, default=0.20, help="per-period stress decay rate")
    g.add_argument("--alpha", type=float, default=0.30, help="idiosyncratic shock weight")
    g.add_argument("--beta", type=float, default=0.40, help="network propagation weight")
    g.add_argument("--gamma", type=float, default=0.50, help="stress-loading weight")
    g.add_argument("--theta", type=float, default=1.00, help="toppling threshold")
    g.add_argument("--epsilon", type=float, default=1e-6, help="denominator regularizer")
    g.add_argument("--sigma-x", type=float, default=0.20, help="shock scale (half-normal)")
    g.add_argument(
        "--redistribution-fraction",
        type=float,
        default=0.5,
        help="share of toppled excess pushed to out-neighbors; the rest dissipates",
    )
    g.add_argument("--theta-reset", type=float, default=0.0, help="post-topple stress level")
    g.add_argument("--count-unique", action="store_true", help="count unique toppled nodes per period instead of toppling events")
    g.add_argument("--max-relax-rounds", type=int, default=None, help="cascade round budget (default: 10n)")


def _params_from(args) -> Params:
    return Params(
        delta=args.delta,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        theta=args.theta,
        epsilon=args.epsilon,
        sigma_x=args.sigma_x,
        redistribution_fraction=args.redistribution_fraction,
        theta_reset=args.theta_reset,
        count_unique=args.count_unique,
        max_relax_rounds=args.max_relax_rounds,
    )


def _add_exposure_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("exposure")
    g.add_argument("--field", type=float, default=1.0, help="field intensity B for static stress loading")
    g.add_argument("--d-floor", type=float, default=0.05, help="redundancy floor")
    g.add_argument("--c-floor", type=float, default=0.05, help="capacity floor")
    g.add_argument("--exposure-epsilon", type=float, default=1e-6, help="stress-loading denominator regularizer")


def _add_operator_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--operator",
        default="leak",
        help="propagation operator: share, leak, or max (default: leak)",
    )


def cmd_ingest(args) -> int:
    table = parse_io_table(args.flows, args.year, row_use_path=args.row_use)
    leak = leakage_profile(table)
    print(
        f"year {table.year}: {table.n} nodes, {table.Z.nnz} flows, "
        f"total {table.total_flow():.6g}, mean leakage {leak.mean_leakage:.4f}"
    )
    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_io_table(table, out / "flows.csv", out / "row_use.csv")
        print(f"wrote normalized copy to {out}")
    return 0


def cmd_synth(args) -> int:
    table = synth_substrate(
        args.nodes, args.density, args.seed, year=args.year, mean_leakage=args.mean_leakage
    )
    out = _out_dir(args)
    write_io_table(table, out / "flows.csv", out / "row_use.csv")
    leak = leakage_profile(table)
    print(
        f"wrote {out / 'flows.csv'}: {table.n} nodes, {table.Z.nnz} flows, "
        f"mean leakage {leak.mean_leakage:.4f}"
    )
    return 0


PANEL_HEADER = ("year", "rho_share", "rho_leak", "rho_max", "mean_leakage", "mean_Hrel", "p95_Hrel")


def cmd_network_panel(args) -> int:
    if args.flows is None:
        raise TableError("--flows is required")
    years = (
        [int(y) for y in args.years.split(",")] if args.years else list_years(args.flows)
    )
    rows = []
    for year in years:
        table = parse_io_table(args.flows, year, row_use_path=args.row_use)
        share = build_operator(table, OperatorKind.ROW_SHARE)
        leak_op = build_operator(table, OperatorKind.LEAKAGE_ADJUSTED)
        max_op = build_operator(table, OperatorKind.MAX_ROW)
        leak = leakage_profile(table)
        prof = compute_exposure(
            table,
            B=args.field,
            d_floor=args.d_floor,
            c_floor=args.c_floor,
            epsilon=args.exposure_epsilon,
        )
        rows.append(
            (
                year,
                float(share.spectral_radius),
                float(leak_op.spectral_radius),
                float(max_op.spectral_radius),
                float(leak.mean_leakage),
                float(prof.H_rel.mean()),
                float(np.percentile(prof.H_rel, 95)),
            )
        )
    out = _out_dir(args)
    path = _emit(out, "panel.csv", PANEL_HEADER, rows, args.json)
    print(f"wrote {path} ({len(rows)} year(s))")
    return 0


EXPOSURE_HEADER = ("node", "country", "sector", "I", "HHI_out", "HHI_in", "D", "C", "R", "H", "H_rel")
TOP_HEADER = ("rank", "node", "country", "sector", "I", "R", "H_rel")


def cmd_exposure(args) -> int:
    table = _load_table(args)
    prof = compute_exposure(
        table,
        B=args.field,
        d_floor=args.d_floor,
        c_floor=args.c_floor,
        epsilon=args.exposure_epsilon,
    )
    rows = [
        (
            nd.index,
            nd.country,
            nd.sector,
            float(prof.I[nd.index]),
            float(prof.HHI_out[nd.index]),
            float(prof.HHI_in[nd.index]),
            float(prof.D[nd.index]),
            float(prof.C[nd.index]),
            float(prof.R[nd.index]),
            float(prof.H[nd.index]),
            float(prof.H_rel[nd.index]),
        )
        for nd in table.nodes
    ]
    out = _out_dir(args)
    path = _emit(out, "exposure.csv", EXPOSURE_HEADER, rows, args.json)
    top = [
        (
            rank,
            r.index,
            table.nodes[r.index].country,
            table.nodes[r.index].sector,
            float(r.I),
            float(r.R),
            float(r.H_rel),
        )
        for rank, r in enumerate(rank_exposure(prof, args.top), start=1)
    ]
    _emit(out, "top_nodes.csv", TOP_HEADER, top, args.json)
    print(f"wrote {path} and top_nodes.csv (top {len(top)})")
    return 0


SCENARIO_HEADER = (
    "scenario",
    "B_bar",
    "sigma_D",
    "mean_S",
    "se_mean_S",
    "pr_nonzero",
    "pr_ge5",
    "pr_ge10",
    "pr_ge20",
    "p50",
    "p95",
    "p99",
    "max",
    "regime",
)
AVALANCHE_HEADER = ("replication", "period", "S", "B_realised", "relax_rounds")


def _stats_row(name: str, stats) -> tuple:
    return (
        name,
        float(stats.B_bar),
        float(stats.sigma_D),
        float(stats.mean_S),
        float(stats.se_mean_S),
        float(stats.pr_nonzero),
        float(stats.pr_ge[5]),
        float(stats.pr_ge[10]),
        float(stats.pr_ge[20]),
        float(stats.p50),
        float(stats.p95),
        float(stats.p99),
        int(stats.s_max),
        stats.regime.value,
    )


def cmd_simulate(args) -> int:
    table = _load_table(args)
    substrate = prepare_substrate(
        table,
        kind=OperatorKind.from_string(args.operator),
        d_floor=args.d_floor,
        c_floor=args.c_floor,
        epsilon=args.exposure_epsilon,
    )
    params = _params_from(args)

    specs: list[ScenarioSpec] = []
    if args.presets.strip().lower() != "none":
        names = [n.strip() for n in args.presets.split(",") if n.strip()]
        specs.extend(
            preset_scenarios(
                args.master_seed,
                T_burn=args.t_burn,
                T_stat=args.t_stat,
                replications=args.replications,
                names=names,
            )
        )
    for k, cell in enumerate(args.cell or []):
        m = _CELL_RE.match(cell)
        if not m:
            raise ValueError(f"bad --cell {cell!r}; expected NAME:B_BAR:SIGMA_D")
        name, b_bar, sigma_d = m.group(1), float(m.group(2)), float(m.group(3))
        # custom cells sit after the four preset positions in the seed tree
        specs.append(
            ScenarioSpec(
                name=name,
                B_bar=b_bar,
                sigma_D=sigma_d,
                master_seed=child_seed(args.master_seed, 4 + k),
                T_burn=args.t_burn,
                T_stat=args.t_stat,
                replications=args.replications,
            )
        )
    if not specs:
        raise ValueError("nothing to run: presets are 'none' and no --cell given")
    seen = set()
    for spec in specs:
        if spec.name in seen:
            raise ValueError(f"duplicate scenario name {spec.name!r}")
        seen.add(spec.name)

    out = _out_dir(args)
    keep = not args.no_series
    rows = []
    for spec in specs:
        result = run_scenario(
            spec,
            substrate,
            params,
            sigma_b_ratio=args.sigma_b_ratio,
            keep_series=keep,
            threads=args.threads,
        )
        rows.append(_stats_row(result.name, result.stats))
        if keep:
            series_rows = []
            for rep, (S, B, rounds) in enumerate(
                zip(result.series, result.B_realised, result.relax_rounds)
            ):
                for t in range(S.size):
                    series_rows.append(
                        (rep, args.t_burn + t, int(S[t]), float(B[t]), int(rounds[t]))
                    )
            _emit(out, f"avalanches_{result.name}.csv", AVALANCHE_HEADER, series_rows, args.json)
    path = _emit(out, "scenarios.csv", SCENARIO_HEADER, rows, args.json)
    print(f"wrote {path} ({len(rows)} scenario(s))")
    return 0


GRID_HEADER = (
    "B_bar",
    "sigma_D",
    "mean_S",
    "se_mean_S",
    "pr_nonzero",
    "pr_ge5",
    "pr_ge10",
    "pr_ge20",
    "p50",
    "p95",
    "p99",
    "max",
    "regime",
)
CONVERGENCE_HEADER = (
    "B_bar",
    "sigma_D",
    "regime",
    "mean_S",
    "se_mean_S",
    "se_over_mean",
    "se_pr_ge5",
    "se_pr_ge10",
    "se_pr_ge20",
    "within_bounds",
)


def cmd_phase_grid(args) -> int:
    table = _load_table(args)
    substrate = prepare_substrate(
        table,
        kind=OperatorKind.from_string(args.operator),
        d_floor=args.d_floor,
        c_floor=args.c_floor,
        epsilon=args.exposure_epsilon,
    )
    params = _params_from(args)
    spec = PhaseGridSpec(
        B_values=tuple(float(b) for b in np.linspace(args.b_min, args.b_max, args.b_steps)),
        sigmaD_values=tuple(
            float(s) for s in np.linspace(args.sigma_min, args.sigma_max, args.sigma_steps)
        ),
        master_seed=args.master_seed,
        T_burn=args.t_burn,
        T_stat=args.t_stat,
        replications=args.replications,
    )
    result = run_phase_grid(
        spec, substrate, params, sigma_b_ratio=args.sigma_b_ratio, threads=args.threads
    )
    rows = [
        (
            float(c.B_bar),
            float(c.sigma_D),
            float(c.mean_S),
            float(c.se_mean_S),
            float(c.pr_nonzero),
            float(c.pr_ge[5]),
            float(c.pr_ge[10]),
            float(c.pr_ge[20]),
            float(c.p50),
            float(c.p95),
            float(c.p99),
            int(c.s_max),
            c.regime.value,
        )
        for c in result.cells
    ]
    out = _out_dir(args)
    path = _emit(out, "phase_grid.csv", GRID_HEADER, rows, args.json)
    if args.convergence:
        diag_rows = [
            (
                float(d.B_bar),
                float(d.sigma_D),
                d.regime.value,
                float(d.mean_S),
                float(d.se_mean_S),
                float(d.se_over_mean) if d.se_over_mean is not None else "",
                float(d.se_pr_ge[5]),
                float(d.se_pr_ge[10]),
                float(d.se_pr_ge[20]),
                d.within_bounds,
            )
            for d in convergence_report(result)
        ]
        _emit(out, "convergence.csv", CONVERGENCE_HEADER, diag_rows, args.json)
    print(f"wrote {path} ({len(rows)} cells)")
    return 0


TAIL_HEADER = ("regime", "x_min", "n_tail", "alpha", "ks", "informative")


def _series_name(path: Path) -> str:
    m = re.match(r"^avalanches_(.+)$", path.stem)
    name = m.group(1) if m else path.stem
    if not _NAME_RE.match(name):
        raise TailError(f"cannot derive a clean series name from {path.name!r}")
    return name


def _read_sizes(path: Path) -> np.ndarray:
    if not path.exists():
        raise TailError(f"series file not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "S" not in reader.fieldnames:
            raise TailError(f"{path}: missing S column")
        values = []
        for k, row in enumerate(reader, start=2):
            try:
                values.append(int(float(row["S"])))
            except (TypeError, ValueError):
                raise TailError(f"{path} row {k}: bad S value {row['S']!r}") from None
    if not values:
        raise TailError(f"{path}: no rows")
    return np.asarray(values, dtype=np.int64)


def cmd_tail_fit(args) -> int:
    out = _out_dir(args)
    rows = []
    for raw in args.series:
        path = Path(raw)
        name = _series_name(path)
        sizes = _read_sizes(path)
        positive = sizes[sizes >= 1]
        if positive.size == 0:
            raise TailError(f"{path}: no positive cascade sizes to fit")
        if args.x_min is not None:
            n_tail = int((positive >= args.x_min).sum())
            distinct = np.unique(positive[positive >= args.x_min]).size
            alpha = fit_alpha(positive, args.x_min)
            informative = bool(
                n_tail >= args.min_tail and distinct > 2 and np.isfinite(alpha) and alpha > 1.0
            )
            fit_row = (name, args.x_min, n_tail, float(alpha), float("nan"), informative)
        else:
            fit = select_xmin(positive, min_tail=args.min_tail)
            fit_row = (
                name,
                int(fit.x_min),
                int(fit.n_tail),
                float(fit.alpha),
                float(fit.ks_distance),
                bool(fit.informative),
            )
        rows.append(fit_row)
        _emit(
            out,
            f"ccdf_{name}.csv",
            ("x", "prob"),
            [(int(x), float(p)) for x, p in ccdf(positive)],
            args.json,
        )
    path = _emit(out, "tail_fits.csv", TAIL_HEADER, rows, args.json)
    print(f"wrote {path} ({len(rows)} fit(s))")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hallsand",
        description="Production-network instability engine: operators, stress exposure, cascade dynamics, phase sweeps, tail fits.",
    )
    parser.add_argument("--config", help="YAML config file; command-line flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    command_map: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(
            name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        p.set_defaults(func=func)
        command_map[name] = p
        return p

    p = add("ingest", cmd_ingest, "validate a flows CSV and print a summary")
    p.add_argument("--flows", required=True, help="long-format flows CSV")
    p.add_argument("--year", type=int, required=True, help="year to select")
    p.add_argument("--row-use", help="companion gross row-use CSV")
    p.add_argument("--out-dir", default=None, help="write a normalized copy here")

    p = add("synth", cmd_synth, "generate a synthetic substrate and write it to CSV")
    p.add_argument("--nodes", type=int, default=200, help="node count")
    p.add_argument("--density", type=float, default=0.1, help="edge probability")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument(
        "--mean-leakage", type=float, default=DEFAULT_MEAN_LEAKAGE, help="mean leak share (calibrated default)"
    )
    p.add_argument("--year", type=int, default=2014, help="year stamp")
    p.add_argument("--out-dir", default=".", help="output directory")

    p = add("network-panel", cmd_network_panel, "spectral and leakage panel, one row per year")
    p.add_argument("--flows", required=True, help="long-format flows CSV")
    p.add_argument("--row-use", help="companion gross row-use CSV")
    p.add_argument("--years", help="comma-separated years (default: all in the file)")
    _add_exposure_args(p)
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--json", action="store_true", help="also write JSON mirrors")

    p = add("exposure", cmd_exposure, "per-node stress exposure table and top-loaded nodes")
    _add_substrate_args(p)
    _add_exposure_args(p)
    p.add_argument("--top", type=int, default=10, help="rows in top_nodes.csv")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--json", action="store_true", help="also write JSON mirrors")

    p = add("simulate", cmd_simulate, "run preset or custom scenario cells")
    _add_substrate_args(p)
    _add_exposure_args(p)
    _add_param_args(p)
    _add_operator_arg(p)
    p.add_argument(
        "--presets",
        default="stable,latent,critical,avalanche",
        help="comma-separated preset names, or 'none'",
    )
    p.add_argument(
        "--cell",
        action="append",
        help="extra scenario NAME:B_BAR:SIGMA_D (repeatable)",
    )
    p.add_argument("--replications", type=int, default=100, help="replications per scenario")
    p.add_argument("--t-burn", type=int, default=50, help="burn-in periods")
    p.add_argument("--t-stat", type=int, default=150, help="post-burn periods kept")
    p.add_argument("--master-seed", type=int, default=0, help="root of the seed tree")
    p.add_argument("--sigma-b-ratio", type=float, default=0.1, help="field volatility as a share of B_bar")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: HALLSAND_THREADS or CPU count)")
    p.add_argument("--no-series", action="store_true", help="skip the per-period avalanche files")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--json", action="store_true", help="also write JSON mirrors")

    p = add("phase-grid", cmd_phase_grid, "sweep field intensity by dispersion and classify regimes")
    _add_substrate_args(p)
    _add_exposure_args(p)
    _add_param_args(p)
    _add_operator_arg(p)
    p.add_argument("--b-min", type=float, default=0.25, help="lowest field level")
    p.add_argument("--b-max", type=float, default=2.0, help="highest field level")
    p.add_argument("--b-steps", type=int, default=10, help="field levels")
    p.add_argument("--sigma-min", type=float, default=0.5, help="lowest dispersion")
    p.add_argument("--sigma-max", type=float, default=2.5, help="highest dispersion")
    p.add_argument("--sigma-steps", type=int, default=9, help="dispersion values")
    p.add_argument("--replications", type=int, default=50, help="replications per cell")
    p.add_argument("--t-burn", type=int, default=50, help="burn-in periods")
    p.add_argument("--t-stat", type=int, default=150, help="post-burn periods kept")
    p.add_argument("--master-seed", type=int, default=0, help="root of the seed tree")
    p.add_argument("--sigma-b-ratio", type=float, default=0.1, help="field volatility as a share of B_bar")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: HALLSAND_THREADS or CPU count)")
    p.add_argument("--convergence", action="store_true", help="also write convergence.csv diagnostics")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--json", action="store_true", help="also write JSON mirrors")

    p = add("tail-fit", cmd_tail_fit, "fit cascade-size tail exponents from avalanche series files")
    p.add_argument("series", nargs="+", help="avalanche CSV files with an S column")
    p.add_argument("--x-min", type=int, default=None, help="fixed tail cutoff (default: scan)")
    p.add_argument("--min-tail", type=int, default=50, help="minimum tail samples for an informative fit")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--json", action="store_true", help="also write JSON mirrors")

    parser._command_map = command_map  # type: ignore[attr-defined]
    return parser


def _scan_argv(argv: list[str], commands) -> tuple[str | None, str | None]:
    config_path = None
    command = None
    k = 0
    while k < len(argv):
        tok = argv[k]
        if tok == "--config" and k + 1 < len(argv):
            config_path = argv[k + 1]
            k += 2
            continue
        if tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
        elif command is None and tok in commands:
            command = tok
        k += 1
    return config_path, command


def _apply_config(parser: argparse.ArgumentParser, config_path: str, command: str | None) -> None:
    config = load_config(config_path)
    known = set(parser._command_map) | {"common"}  # type: ignore[attr-defined]
    unknown_sections = set(config) - known
    if unknown_sections:
        raise ConfigError(f"unknown config section(s): {sorted(unknown_sections)}")
    if command is None:
        return
    section = section_for(config, command)
    sub = parser._command_map[command]  # type: ignore[attr-defined]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in section.items():
        if key not in actions or key == "help":
            raise ConfigError(f"config option {key!r} is not a flag of {command!r}")
        action = actions[key]
        if isinstance(value, str) and action.type is not None:
            try:
                value = action.type(value)
            except (TypeError, ValueError):
                raise ConfigError(f"config option {key!r}: bad value {value!r}") from None
        defaults[key] = value
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    config_path, command = _scan_argv(argv, parser._command_map)  # type: ignore[attr-defined]
    try:
        if config_path is not None:
            _apply_config(parser, config_path, command)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            code = exc.code if exc.code is not None else 0
            return 0 if code == 0 else 1
        return args.func(args) or 0
    except (ConfigError, TableError, TailError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except RuntimeError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
