"""Monte Carlo scenario runs, phase grids, and regime classification."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import FieldModel, Params, RelaxationBudgetError, init_state, run
from .exposure import ExposureProfile, compute_exposure
from .ingest import IOTable
from .operators import OperatorKind, PropagationOperator, build_operator

# Named (B_bar, sigma_D) cells used throughout the scenario analysis.
PRESETS: dict[str, tuple[float, float]] = {
    "stable": (0.45, 0.7),
    "latent": (0.70, 1.4),
    "critical": (1.00, 1.8),
    "avalanche": (1.35, 2.3),
}

DEFAULT_SIGMA_B_RATIO = 0.10

# Regime bands on mean cascade size; each boundary belongs to the band above it.
_ABSORPTION_MAX = 0.30
_LATENT_MAX = 1.5
_CRITICAL_MAX = 5.0

_MASK64 = (1 << 64) - 1


class SimulationError(RuntimeError):
    """An engine failure wrapped with scenario/replication context."""


class RegimeLabel(str, Enum):
    ABSORPTION = "absorption"
    LATENT_FRAGILITY = "latent_fragility"
    CRITICAL_TRANSITION = "critical_transition"
    AVALANCHE = "avalanche"


@dataclass(frozen=True)
class Substrate:
    """A table with its propagation operator and exposure profile precomputed."""

    table: IOTable
    operator: PropagationOperator
    exposure: ExposureProfile


@dataclass(frozen=True)
class ScenarioSpec:
    """One Monte Carlo cell: field level, dispersion, and the run protocol."""

    name: str
    B_bar: float
    sigma_D: float
    master_seed: int
    T_burn: int = 50
    T_stat: int = 150
    replications: int = 100

    def validate(self) -> None:
        if self.B_bar < 0:
            raise ValueError(f"B_bar must be non-negative, got {self.B_bar}")
        if self.sigma_D <= 0:
            raise ValueError(f"sigma_D must be positive, got {self.sigma_D}")
        if self.T_burn < 0 or self.T_stat < 1:
            raise ValueError(f"bad protocol: T_burn={self.T_burn}, T_stat={self.T_stat}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")


@dataclass(frozen=True)
class CellStats:
    """Pooled post-burn cascade statistics for one (B_bar, sigma_D) cell."""

    B_bar: float
    sigma_D: float
    mean_S: float
    se_mean_S: float
    pr_nonzero: float
    pr_ge: dict[int, float]
    p50: float
    p95: float
    p99: float
    s_max: int
    n_obs: int
    regime: RegimeLabel


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    stats: CellStats
    series: tuple[np.ndarray, ...] | None
    B_realised: tuple[np.ndarray, ...] | None = None
    relax_rounds: tuple[np.ndarray, ...] | None = None


@dataclass(frozen=True)
class PhaseGridSpec:
    """Cartesian sweep over field levels and dispersion values."""

    B_values: tuple[float, ...]
    sigmaD_values: tuple[float, ...]
    master_seed: int
    T_burn: int = 50
    T_stat: int = 150
    replications: int = 50

    def validate(self) -> None:
        for name, axis in (("B_values", self.B_values), ("sigmaD_values", self.sigmaD_values)):
            if len(axis) == 0:
                raise ValueError(f"{name} must be non-empty")
            if list(axis) != sorted(set(axis)):
                raise ValueError(f"{name} must be strictly ascending")

    @property
    def n_cells(self) -> int:
        return len(self.B_values) * len(self.sigmaD_values)


@dataclass(frozen=True)
class PhaseGridResult:
    spec: PhaseGridSpec
    cells: tuple[CellStats, ...]  # row-major: B outer, sigma_D inner

    def cell(self, i_B: int, i_sD: int) -> CellStats:
        return self.cells[i_B * len(self.spec.sigmaD_values) + i_sD]

    def mean_S_grid(self) -> np.ndarray:
        shape = (len(self.spec.B_values), len(self.spec.sigmaD_values))
        return np.array([c.mean_S for c in self.cells]).reshape(shape)


@dataclass(frozen=True)
class CellDiagnostics:
    """Convergence report row: standard errors against the protocol bounds."""

    B_bar: float
    sigma_D: float
    regime: RegimeLabel
    mean_S: float
    se_mean_S: float
    se_over_mean: float | None
    se_pr_ge: dict[int, float]
    within_bounds: bool


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def child_seed(master: int, *indices: int) -> int:
    """Derive a child seed by hashing indices into the master, left to right.

    Deriving in stages gives the same child as deriving in one call
    (child_seed(m, a, b) == child_seed(child_seed(m, a), b)), so grid cells
    and replications can be split independently and in any order.
    """
    state = master & _MASK64
    for ix in indices:
        state = _splitmix64(state ^ _splitmix64((ix + 1) & _MASK64))
    return state


def default_phase_grid(master_seed: int, replications: int = 50) -> PhaseGridSpec:
    """The 90-cell sweep: 10 field levels on [0.25, 2.0] by 9 dispersion
    values on [0.5, 2.5]."""
    return PhaseGridSpec(
        B_values=tuple(float(b) for b in np.linspace(0.25, 2.0, 10)),
        sigmaD_values=tuple(float(s) for s in np.linspace(0.5, 2.5, 9)),
        master_seed=master_seed,
        replications=replications,
    )


def prepare_substrate(
    table: IOTable,
    kind: OperatorKind = OperatorKind.LEAKAGE_ADJUSTED,
    d_floor: float = 0.05,
    c_floor: float = 0.05,
    epsilon: float = 1e-6,
) -> Substrate:
    """Build the operator and exposure profile once for reuse across cells."""
    operator = build_operator(table, kind)
    exposure = compute_exposure(table, B=1.0, d_floor=d_floor, c_floor=c_floor, epsilon=epsilon)
    return Substrate(table=table, operator=operator, exposure=exposure)


def _classify(mean_S: float) -> RegimeLabel:
    if mean_S < _ABSORPTION_MAX:
        return RegimeLabel.ABSORPTION
    if mean_S < _LATENT_MAX:
        return RegimeLabel.LATENT_FRAGILITY
    if mean_S < _CRITICAL_MAX:
        return RegimeLabel.CRITICAL_TRANSITION
    return RegimeLabel.AVALANCHE


def classify_regime(stats: CellStats) -> RegimeLabel:
    """Band the cell by mean cascade size; boundaries belong to the band above."""
    return _classify(stats.mean_S)


def make_cell_stats(
    B_bar: float, sigma_D: float, series: list[np.ndarray]
) -> CellStats:
    """Pool per-replication series into one cell's statistics.

    The standard error of mean_S comes from the spread of per-replication
    means (0 when there is a single replication).
    """
    pooled = np.concatenate(series)
    rep_means = np.array([float(s.mean()) for s in series])
    R = len(series)
    se = float(np.std(rep_means, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    mean_S = float(pooled.mean())
    p50, p95, p99 = (float(q) for q in np.percentile(pooled, [50, 95, 99]))
    return CellStats(
        B_bar=B_bar,
        sigma_D=sigma_D,
        mean_S=mean_S,
        se_mean_S=se,
        pr_nonzero=float(np.mean(pooled > 0)),
        pr_ge={k: float(np.mean(pooled >= k)) for k in (5, 10, 20)},
        p50=p50,
        p95=p95,
        p99=p99,
        s_max=int(pooled.max()),
        n_obs=int(pooled.size),
        regime=_classify(mean_S),
    )


def _run_replication(
    substrate: Substrate,
    params: Params,
    spec: ScenarioSpec,
    rep: int,
    sigma_b_ratio: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    seed = child_seed(spec.master_seed, rep)
    state = init_state(
        substrate.operator, substrate.exposure, params, sigma_D=spec.sigma_D, seed=seed
    )
    fieldmodel = FieldModel(spec.B_bar, sigma_b_ratio * spec.B_bar)
    try:
        records = run(state, fieldmodel, spec.T_burn + spec.T_stat)
    except RelaxationBudgetError as err:
        raise SimulationError(
            f"scenario {spec.name!r} replication {rep} period {state.period}: {err}"
        ) from err
    kept = records[spec.T_burn:]
    S = np.array([r.S for r in kept], dtype=np.int64)
    B = np.array([r.B_realised for r in kept])
    rounds = np.array([r.relax_rounds for r in kept], dtype=np.int64)
    return S, B, rounds


def _replication_worker(args) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    substrate, params, spec, rep, ratio = args
    S, B, rounds = _run_replication(substrate, params, spec, rep, ratio)
    return rep, S, B, rounds


def resolve_threads(threads: int | None) -> int:
    """Worker count: explicit value, else HALLSAND_THREADS, else one per CPU."""
    if threads is not None:
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        return threads
    env = os.environ.get("HALLSAND_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"HALLSAND_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"HALLSAND_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def run_scenario(
    spec: ScenarioSpec,
    substrate: Substrate,
    params: Params,
    sigma_b_ratio: float = DEFAULT_SIGMA_B_RATIO,
    keep_series: bool = False,
    threads: int | None = 1,
) -> ScenarioResult:
    """Run one cell's replications and pool the post-burn statistics.

    Replication r runs on its own stream seeded child_seed(master_seed, r),
    so results are independent of execution order; the fold over
    replications is by index, making serial and parallel runs identical.
    """
    spec.validate()
    params.validate(substrate.operator.n)
    n_workers = resolve_threads(threads)
    reps = range(spec.replications)
    if n_workers > 1 and spec.replications > 1:
        payload = [(substrate, params, spec, r, sigma_b_ratio) for r in reps]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_replication_worker, payload))
        results.sort(key=lambda item: item[0])
        triples = [(S, B, rounds) for _, S, B, rounds in results]
    else:
        triples = [_run_replication(substrate, params, spec, r, sigma_b_ratio) for r in reps]
    series = [t[0] for t in triples]
    stats = make_cell_stats(spec.B_bar, spec.sigma_D, series)
    if keep_series:
        return ScenarioResult(
            name=spec.name,
            stats=stats,
            series=tuple(series),
            B_realised=tuple(t[1] for t in triples),
            relax_rounds=tuple(t[2] for t in triples),
        )
    return ScenarioResult(name=spec.name, stats=stats, series=None)


def _cell_worker(args) -> tuple[int, CellStats]:
    index, substrate, params, spec, ratio = args
    result = run_scenario(spec, substrate, params, sigma_b_ratio=ratio, threads=1)
    return index, result.stats


def run_phase_grid(
    spec: PhaseGridSpec,
    substrate: Substrate,
    params: Params,
    sigma_b_ratio: float = DEFAULT_SIGMA_B_RATIO,
    threads: int | None = 1,
) -> PhaseGridResult:
    """Sweep the grid cell by cell, row-major (field outer, dispersion inner).

    Cell (i, j) gets master seed child_seed(grid_seed, cell_index), so a
    single-cell grid reproduces run_scenario under the same derivation, and
    cells can run in parallel with a deterministic index-ordered fold.
    """
    spec.validate()
    cells: list[ScenarioSpec] = []
    for i, B_bar in enumerate(spec.B_values):
        for j, sigma_D in enumerate(spec.sigmaD_values):
            index = i * len(spec.sigmaD_values) + j
            cells.append(
                ScenarioSpec(
                    name=f"cell_{i}_{j}",
                    B_bar=B_bar,
                    sigma_D=sigma_D,
                    master_seed=child_seed(spec.master_seed, index),
                    T_burn=spec.T_burn,
                    T_stat=spec.T_stat,
                    replications=spec.replications,
                )
            )
    n_workers = resolve_threads(threads)
    if n_workers > 1 and len(cells) > 1:
        payload = [(k, substrate, params, cell, sigma_b_ratio) for k, cell in enumerate(cells)]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_cell_worker, payload))
        results.sort(key=lambda item: item[0])
        stats = tuple(s for _, s in results)
    else:
        stats = tuple(
            run_scenario(cell, substrate, params, sigma_b_ratio=sigma_b_ratio, threads=1).stats
            for cell in cells
        )
    return PhaseGridResult(spec=spec, cells=stats)


def convergence_report(result: PhaseGridResult) -> list[CellDiagnostics]:
    """Per-cell standard errors with the protocol's precision flags.

    Absorbing cells must have se(mean_S) below 0.02; all other cells must
    have se/mean below 5%. Tail probabilities get binomial standard errors.
    """
    report = []
    for stats in result.cells:
        se_pr = {
            k: math.sqrt(p * (1.0 - p) / stats.n_obs) for k, p in sorted(stats.pr_ge.items())
        }
        if stats.regime is RegimeLabel.ABSORPTION:
            ratio = stats.se_mean_S / stats.mean_S if stats.mean_S > 0 else None
            ok = stats.se_mean_S < 0.02
        else:
            ratio = stats.se_mean_S / stats.mean_S if stats.mean_S > 0 else None
            ok = ratio is not None and ratio < 0.05
        report.append(
            CellDiagnostics(
                B_bar=stats.B_bar,
                sigma_D=stats.sigma_D,
                regime=stats.regime,
                mean_S=stats.mean_S,
                se_mean_S=stats.se_mean_S,
                se_over_mean=ratio,
                se_pr_ge=se_pr,
                within_bounds=ok,
            )
        )
    return report


def preset_scenarios(
    master_seed: int,
    T_burn: int = 50,
    T_stat: int = 150,
    replications: int = 100,
    names: list[str] | None = None,
) -> list[ScenarioSpec]:
    """The named preset cells as runnable scenario specs.

    Each preset derives its master seed from its position in the canonical
    ordering, so adding or dropping presets does not shift the others.
    """
    chosen = names if names is not None else list(PRESETS)
    specs = []
    order = list(PRESETS)
    for name in chosen:
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; expected one of {order}")
        B_bar, sigma_D = PRESETS[name]
        specs.append(
            ScenarioSpec(
                name=name,
                B_bar=B_bar,
                sigma_D=sigma_D,
                master_seed=child_seed(master_seed, order.index(name)),
                T_burn=T_burn,
                T_stat=T_stat,
                replications=replications,
            )
        )
    return specs
