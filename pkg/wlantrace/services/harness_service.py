"""
Experiment harness

Runs quarantine strategies against the SEIR simulator on the hybrid graph:
the strategy table (no quarantine, random, SymC and Hybrid per measure), the
one-week betweenness table, the quarantine budget sweep with its turning
point, and the centrality-seeded spread curves.
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from wlantrace.core.artifacts import ArtifactWriter
from wlantrace.core.models import (
    CentralityScores, EnsembleResult, ExperimentReport, GraphMode, Measure,
    ReportRow, SeirParams, Strategy, StrategyKind, SweepGrid
)
from wlantrace.core.seeding import derive_seed, make_rng
from wlantrace.services.centrality_service import centrality, top_k
from wlantrace.services.contact_service import ContactGraph
from wlantrace.services.seir_service import METRIC_NAMES, Network, ensemble, trace_frame

logger = logging.getLogger(__name__)

# Stream index reserved for random person draws, kept apart from the simulation streams
RANDOM_STREAM = 0x52414E44

REPORT_COLUMNS = {
    'doubling_time': 'DB-Time',
    'total_infected_fraction': 'T-Inf',
    'peak_infected_time': 'PK-Time',
    'peak_infected_fraction': 'PK-Inf',
}

Rankings = Dict[Tuple[GraphMode, Measure], CentralityScores]


def _random_pick(vertices: Sequence[str], k: int, seed: int) -> Set[str]:
    positions = make_rng(seed).choice(len(vertices), size=k, replace=False)
    return {vertices[position] for position in positions}


class RandomPick:
    """Draws a fresh uniform person set for every run index"""

    def __init__(self, vertices: Sequence[str], k: int, master_seed: int):
        if k > len(vertices):
            raise ValueError(f"k ({k}) exceeds the population ({len(vertices)})")
        self.vertices = tuple(vertices)
        self.k = k
        self.master_seed = master_seed

    def __call__(self, run_index: int) -> Set[str]:
        return _random_pick(self.vertices, self.k, derive_seed(self.master_seed, run_index))


def default_strategies(k: int, measures: Sequence[Measure] = tuple(Measure)) -> List[Strategy]:
    strategies = [
        Strategy(kind=StrategyKind.NO_QUARANTINE, k=0),
        Strategy(kind=StrategyKind.RANDOM, k=k),
    ]
    for measure in measures:
        strategies.append(Strategy(kind=StrategyKind.SYMC, measure=measure, k=k))
        strategies.append(Strategy(kind=StrategyKind.HYBRID, measure=measure, k=k))
    return strategies


def _ranking(graph: ContactGraph, measure: Measure, rankings: Optional[Rankings], threads: int) -> CentralityScores:
    key = (graph.mode, measure)
    if rankings is not None and key in rankings:
        return rankings[key]
    scores = centrality(graph, measure, threads=threads)
    if rankings is not None:
        rankings[key] = scores
    return scores


def select_quarantine(strategy: Strategy, sym_g: ContactGraph, hybrid_g: ContactGraph, rng_seed: int,
                      rankings: Optional[Rankings] = None, threads: int = 1) -> Set[str]:
    """
    Persons a strategy quarantines

    Args:
        strategy: what to select and how many
        sym_g: symmetric graph ranked by SymC
        hybrid_g: hybrid graph ranked by Hybrid
        rng_seed: seed of the Random draw
        rankings: optional cache of centrality scores keyed by (graph mode, measure)
        threads: workers for centrality computation

    Returns:
        Set of person ids, empty for no quarantine
    """
    if sym_g.vertices != hybrid_g.vertices:
        raise ValueError("symmetric and hybrid graphs must share the same vertex set")
    if strategy.k > hybrid_g.n:
        raise ValueError(f"k ({strategy.k}) exceeds the population ({hybrid_g.n})")

    if strategy.kind == StrategyKind.NO_QUARANTINE:
        return set()
    if strategy.kind == StrategyKind.RANDOM:
        return _random_pick(hybrid_g.vertices, strategy.k, rng_seed)
    graph = sym_g if strategy.kind == StrategyKind.SYMC else hybrid_g
    return set(top_k(_ranking(graph, strategy.measure, rankings, threads), strategy.k))


def _deltas(rows: List[ReportRow]):
    symc = {(row.strategy.measure, row.strategy.k): row for row in rows if row.strategy.kind == StrategyKind.SYMC}
    for row in rows:
        if row.strategy.kind != StrategyKind.HYBRID:
            continue
        baseline = symc.get((row.strategy.measure, row.strategy.k))
        if baseline is None:
            continue
        delta = {}
        for name in METRIC_NAMES:
            hybrid_value = getattr(row.result.mean, name)
            symc_value = getattr(baseline.result.mean, name)
            delta[name] = None if hybrid_value is None or symc_value is None else hybrid_value - symc_value
        row.delta = delta


def run_table(strategies: List[Strategy], graphs: Tuple[ContactGraph, ContactGraph], params: SeirParams,
              threads: int = 1, rankings: Optional[Rankings] = None, label: str = 'daily') -> ExperimentReport:
    """
    One ensemble per strategy, always simulated on the hybrid graph

    Every row reuses params.seed so rows differ only by their quarantine set.
    The Random row redraws its set each run from a stream derived from the
    master seed.
    """
    sym_g, hybrid_g = graphs
    network = Network.from_graph(hybrid_g)
    rankings = {} if rankings is None else rankings
    random_master = derive_seed(params.seed, RANDOM_STREAM)

    rows = []
    for strategy in strategies:
        if strategy.kind == StrategyKind.RANDOM:
            quarantine = RandomPick(hybrid_g.vertices, strategy.k, random_master)
        else:
            quarantine = select_quarantine(strategy, sym_g, hybrid_g, random_master, rankings, threads)
        result = ensemble(network, params, quarantine=quarantine, threads=threads)
        rows.append(ReportRow(strategy=strategy, result=result))
        measure = strategy.measure.value if strategy.measure else '-'
        logger.info(
            f"{label} {strategy.label}/{measure}: T-Inf {result.mean.total_infected_fraction:.2f}% "
            f"± {result.std.total_infected_fraction:.2f}"
        )

    _deltas(rows)
    report = ExperimentReport(rows=rows, metadata={
        'table': label,
        'population': hybrid_g.n,
        'hybrid_arcs': hybrid_g.arc_count(),
        'symmetric_arcs': sym_g.arc_count(),
        'initial_infected': params.initial_infected,
        'runs': params.runs,
        'max_days': params.max_days,
        'seed': params.seed,
    })
    logger.info(f"✅ {label} table finished with {len(rows)} rows")
    return report


def weekly_table(sym_week: ContactGraph, hybrid_week: ContactGraph, params: SeirParams, k: int,
                 threads: int = 1) -> ExperimentReport:
    """Strategy table on one-week graphs, betweenness only"""
    strategies = default_strategies(k, measures=[Measure.BETWEENNESS])
    return run_table(strategies, (sym_week, hybrid_week), params, threads=threads, label='weekly')


def report_frame(report: ExperimentReport) -> pd.DataFrame:
    records = []
    for row in report.rows:
        record = {
            'Method': row.strategy.label,
            'Measure': row.strategy.measure.value if row.strategy.measure else '-',
            'K': row.strategy.k,
        }
        for name, column in REPORT_COLUMNS.items():
            record[column] = getattr(row.result.mean, name)
        for name, column in REPORT_COLUMNS.items():
            record[f"{column}-std"] = getattr(row.result.std, name)
        for name, column in REPORT_COLUMNS.items():
            record[f"{column}-delta"] = row.delta.get(name) if row.delta else None
        record['DB-undefined'] = row.result.undefined_doubling_count
        records.append(record)
    return pd.DataFrame.from_records(records)


def curves_frame(report: ExperimentReport) -> pd.DataFrame:
    """Mean infected percentage per day for every row"""
    population = report.metadata.get('population') or 1
    frame = None
    for row in report.rows:
        trace = trace_frame(row.result.mean_trace)
        if frame is None:
            frame = trace[['day']].copy()
        measure = row.strategy.measure.value if row.strategy.measure else 'none'
        frame[f"{row.strategy.label}/{measure}"] = 100.0 * trace['I'] / population
    return frame if frame is not None else pd.DataFrame({'day': []})


def write_report(report: ExperimentReport, out_dir, writer: Optional[ArtifactWriter] = None,
                 name: str = 'table', stage: str = 'experiment') -> Path:
    writer = writer or ArtifactWriter()
    out_dir = Path(out_dir)
    writer.write_frame(report_frame(report), out_dir / f"{name}.csv", stage=stage)
    writer.write_frame(curves_frame(report), out_dir / f"{name}_curves.csv", stage=stage)
    writer.write_json(report.model_dump(mode='json'), out_dir / f"{name}.json", stage=stage)
    return out_dir / f"{name}.csv"


def sweep_axis(step: float, start: float = 0.0) -> List[float]:
    count = int(math.floor((100.0 - start) / step + 1e-9))
    return [round(start + step * index, 6) for index in range(count + 1)]


def _count_for(fraction: float, population: int) -> int:
    return int(math.ceil(round(fraction * population / 100.0, 9)))


def _sweep_cell(network: Network, params: SeirParams, quarantine: Set[str]) -> EnsembleResult:
    return ensemble(network, params, quarantine=quarantine, threads=1)


def _attack_rate(value: float, infected: float, quarantined: float) -> Optional[float]:
    """Share of the free, not initially infected people who end up infected"""
    pool = 100.0 - infected - quarantined
    if pool <= 0.0:
        return None
    return (value - infected) / pool


def row_turning_point(row: Sequence[Optional[float]], infected: float, quarantine_fracs: Sequence[float],
                      threshold: float = 0.5, per: float = 5.0, min_secondary: float = 5.0) -> Optional[float]:
    """
    Turning point of one sweep row

    Quarantining more people lowers T-Inf in two ways: the extra people can no
    longer be infected themselves, and the rest of the free population is
    infected less often. Only the second part counts here: each step's drop in
    attack rate among free people is weighted by the free pool left after the
    step and scaled to `per` percent of extra quarantine.

    Returns:
        The first quarantine fraction whose step prevents fewer than threshold
        points of T-Inf; math.inf when every step prevents more; None when the
        row has fewer than two cells, or when its secondary infections at the
        first cell are below min_secondary or below the initial fraction
        (seeding, not spread, drives the row)
    """
    cells = [(q, value) for q, value in zip(quarantine_fracs, row) if value is not None]
    if len(cells) < 2:
        return None
    secondary = cells[0][1] - infected
    if secondary < max(min_secondary, infected):
        return None

    for (q, value), (q_next, value_next) in zip(cells, cells[1:]):
        attack = _attack_rate(value, infected, q)
        if attack is None:
            break
        attack_next = _attack_rate(value_next, infected, q_next)
        if attack_next is None:
            return float(q)
        pool_next = 100.0 - infected - q_next
        prevented = pool_next * (attack - attack_next) * per / (q_next - q)
        if prevented < threshold:
            return float(q)
    return math.inf


def detect_turning_point(values: List[List[Optional[float]]], infected_fracs: Sequence[float],
                         quarantine_fracs: Sequence[float], threshold: float = 0.5, per: float = 5.0,
                         min_secondary: float = 5.0) -> Optional[float]:
    """
    Smallest quarantine fraction after which extra quarantine stops paying off

    Every row where spread dominates gets its own turning point (see
    row_turning_point). The grid's turning point is the lower median of them,
    so it is always a grid fraction. None when no row qualifies or when most
    rows never flatten.
    """
    points = []
    for row, infected in zip(values, infected_fracs):
        point = row_turning_point(row, infected, quarantine_fracs, threshold, per, min_secondary)
        if point is not None:
            points.append(point)
    if not points:
        return None
    median = sorted(points)[(len(points) - 1) // 2]
    return None if math.isinf(median) else median


def budget_sweep(hybrid_g: ContactGraph, measure: Measure, infected_fracs: Sequence[float],
                 quarantine_fracs: Sequence[float], params: SeirParams, threads: int = 1,
                 threshold: float = 0.5, ranking: Optional[CentralityScores] = None) -> SweepGrid:
    """
    Mean total infected fraction over a grid of initial-infected and quarantined percentages

    Cell (i, q) starts ceil(i N / 100) random infected persons and quarantines
    the top ceil(q N / 100) persons of the measure. Cells with i + q > 100 are
    infeasible and hold None. Every cell of row r uses derive_seed(params.seed, r),
    so cells along a row differ only by their quarantine set.
    """
    for fraction in list(infected_fracs) + list(quarantine_fracs):
        if not 0.0 <= fraction <= 100.0:
            raise ValueError(f"sweep fractions must lie in [0, 100], got {fraction}")

    population = hybrid_g.n
    network = Network.from_graph(hybrid_g)
    ranking = ranking or centrality(hybrid_g, measure, threads=threads)

    cells = []
    for row, infected in enumerate(infected_fracs):
        for column, quarantined in enumerate(quarantine_fracs):
            n_infected = _count_for(infected, population)
            n_quarantined = _count_for(quarantined, population)
            if infected + quarantined > 100.0 or n_infected + n_quarantined > population:
                continue
            cell_params = params.model_copy(update={
                'initial_infected': n_infected,
                'seed': derive_seed(params.seed, row),
            })
            cells.append((row, column, cell_params, set(ranking.ranking[:n_quarantined])))

    logger.info(f"Budget sweep over {len(cells)} feasible cells ({measure.value}, N={population})")
    if threads > 1 and len(cells) > 1:
        results = Parallel(n_jobs=threads)(
            delayed(_sweep_cell)(network, cell_params, quarantine) for _, _, cell_params, quarantine in cells
        )
    else:
        results = [_sweep_cell(network, cell_params, quarantine) for _, _, cell_params, quarantine in cells]

    values: List[List[Optional[float]]] = [[None] * len(quarantine_fracs) for _ in infected_fracs]
    stderr: List[List[Optional[float]]] = [[None] * len(quarantine_fracs) for _ in infected_fracs]
    for (row, column, _, _), result in zip(cells, results):
        values[row][column] = result.mean.total_infected_fraction
        stderr[row][column] = result.stderr('total_infected_fraction')

    turning_point = detect_turning_point(values, infected_fracs, quarantine_fracs, threshold=threshold)
    logger.info(f"✅ Budget sweep finished, turning point at {turning_point}% quarantined")
    return SweepGrid(
        measure=measure,
        infected_fracs=list(infected_fracs),
        quarantine_fracs=list(quarantine_fracs),
        values=values,
        stderr=stderr,
        turning_point=turning_point,
    )


def _grid_frame(grid: SweepGrid, cells: List[List[Optional[float]]]) -> pd.DataFrame:
    frame = pd.DataFrame(
        [[np.nan if value is None else value for value in row] for row in cells],
        index=[f"{fraction:g}" for fraction in grid.infected_fracs],
        columns=[f"{fraction:g}" for fraction in grid.quarantine_fracs],
    )
    frame.index.name = 'infected_pct\\quarantined_pct'
    return frame


def write_sweep(grid: SweepGrid, out_dir, writer: Optional[ArtifactWriter] = None) -> Path:
    """sweep.csv (mean T-Inf), sweep_stderr.csv and sweep.json with the turning point"""
    writer = writer or ArtifactWriter()
    out_dir = Path(out_dir)
    writer.write_frame(_grid_frame(grid, grid.values), out_dir / 'sweep.csv', stage='sweep', index=True)
    writer.write_frame(_grid_frame(grid, grid.stderr), out_dir / 'sweep_stderr.csv', stage='sweep', index=True)
    writer.write_json(grid.model_dump(mode='json'), out_dir / 'sweep.json', stage='sweep')
    return out_dir / 'sweep.csv'


def seeding_curves(hybrid_g: ContactGraph, params: SeirParams, k: int, threads: int = 1,
                   measures: Sequence[Measure] = tuple(Measure)) -> Dict[str, EnsembleResult]:
    """Spread started by the top-k persons of each measure versus k random persons, no quarantine"""
    network = Network.from_graph(hybrid_g)
    groups: Dict[str, EnsembleResult] = {}
    for measure in measures:
        seeds = set(top_k(centrality(hybrid_g, measure, threads=threads), k))
        groups[measure.value] = ensemble(network, params, seeds=seeds, threads=threads)
    random_seeds = RandomPick(hybrid_g.vertices, k, derive_seed(params.seed, RANDOM_STREAM))
    groups['random'] = ensemble(network, params, seeds=random_seeds, threads=threads)

    for name, result in groups.items():
        logger.info(f"Seeded by {name}: T-Inf {result.mean.total_infected_fraction:.2f}%")
    return groups


def write_seeding_curves(groups: Dict[str, EnsembleResult], population: int, out_dir,
                         writer: Optional[ArtifactWriter] = None) -> Path:
    writer = writer or ArtifactWriter()
    out_dir = Path(out_dir)
    frame = None
    for name, result in groups.items():
        trace = trace_frame(result.mean_trace)
        if frame is None:
            frame = trace[['day']].copy()
        frame[name] = 100.0 * trace['I'] / population
    writer.write_frame(frame, out_dir / 'seeding_curves.csv', stage='experiment')
    writer.write_json({name: result.to_export() for name, result in groups.items()},
                      out_dir / 'seeding_metrics.json', stage='experiment')
    return out_dir / 'seeding_curves.csv'
