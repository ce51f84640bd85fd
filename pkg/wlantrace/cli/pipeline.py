"""
Pipeline stages

Each stage function does one step of ingest -> build -> graph -> rank ->
experiment -> sweep -> stability and writes its artifacts with config-hash
sidecars. The `pipeline` command chains them; individual subcommands reuse
the same functions.
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click

from wlantrace.cli import CliState, staged, trace, writer_for
from wlantrace.core.artifacts import ArtifactWriter, dumps
from wlantrace.core.errors import ConfigError, InsufficientDataError, StageError
from wlantrace.core.models import GraphMode, LogEntry, Measure
from wlantrace.core.settings import RunConfig
from wlantrace.services.analysis_service import accumulated_week_matrix, cross_measure_matrix, write_matrix
from wlantrace.services.centrality_service import centrality, write_scores
from wlantrace.services.contact_service import ContactGraph, build_graph, write_graph
from wlantrace.services.harness_service import (
    Rankings, budget_sweep, default_strategies, run_table, seeding_curves, sweep_axis,
    weekly_table, write_report, write_seeding_curves, write_sweep
)
from wlantrace.services.trajectory_service import (
    AnalysisWindow, TrajectoryStore, WalkTimeMatrix, make_window, parse_window
)
from wlantrace.services.wlan_log_service import (
    ApDirectory, IngestStats, parse_log_file, validate_and_filter, write_events
)

logger = logging.getLogger(__name__)

GRAPH_DIRS = {
    GraphMode.SYMMETRIC: 'symmetric',
    GraphMode.ASYMMETRIC: 'asymmetric',
    GraphMode.HYBRID: 'hybrid',
}


@contextmanager
def stage(name: str):
    logger.info(f"Stage {name} started")
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e
    logger.info(f"✅ Stage {name} finished")


def load_directory(path: Optional[str], run_config: RunConfig) -> ApDirectory:
    path = path or run_config.ap_directory
    if not path:
        raise ConfigError("an AP directory is required: pass --ap-dir or set AP_DIRECTORY")
    return ApDirectory.from_csv(path)


def load_walk(path: Optional[str], run_config: RunConfig) -> WalkTimeMatrix:
    path = path or run_config.walk_matrix
    if not path:
        logger.warning(f"No walking-time matrix given, every building pair uses {run_config.default_walk}s")
        return WalkTimeMatrix(default_walk=run_config.default_walk)
    return WalkTimeMatrix.from_csv(path, default_walk=run_config.default_walk)


def daily_window(store: TrajectoryStore, run_config: RunConfig) -> AnalysisWindow:
    if run_config.window:
        return parse_window(run_config.window, run_config.timezone)
    if store.first_day is None:
        raise InsufficientDataError("no trajectories to build a daily window from")
    return make_window(store.first_day, 1, run_config.timezone)


def weekly_window(store: TrajectoryStore, run_config: RunConfig) -> AnalysisWindow:
    if run_config.weekly_window:
        return parse_window(run_config.weekly_window, run_config.timezone)
    if store.first_day is None:
        raise InsufficientDataError("no trajectories to build a weekly window from")
    return make_window(store.first_day, 7, run_config.timezone)


def freeze_config(run_config: RunConfig, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / 'config.env').write_text(run_config.to_env_text(), encoding='utf-8')
    (out_dir / 'config.json').write_text(dumps(run_config.snapshot()) + "\n", encoding='utf-8')


def run_ingest(run_config: RunConfig, log_path, directory: ApDirectory, events_path: Path,
               writer: ArtifactWriter) -> Tuple[List[LogEntry], IngestStats]:
    stats = IngestStats()
    parsed = parse_log_file(log_path, ssid_filter=run_config.ssids, stats=stats)
    events = list(validate_and_filter(parsed, directory, stats=stats))
    write_events(events, events_path)
    writer.write_metadata(events_path, 'ingest')
    writer.write_json(stats.to_dict(), events_path.with_name('ingest_stats.json'), stage='ingest')
    logger.info(f"Ingested {len(events)} events out of {stats.lines} lines ({stats.dropped} dropped)")
    return events, stats


def run_build(run_config: RunConfig, events: List[LogEntry], directory: ApDirectory, walk: WalkTimeMatrix,
              trajectories_path: Path, writer: ArtifactWriter,
              window: Optional[AnalysisWindow] = None) -> TrajectoryStore:
    store = TrajectoryStore.from_entries(
        events, directory, walk,
        session_timeout=run_config.session_timeout,
        max_terminal_stay=run_config.max_terminal_stay,
        timezone=run_config.timezone,
        window=window,
    )
    writer.write_frame(store.to_frame(), trajectories_path, stage='build')
    return store


def run_graphs(run_config: RunConfig, store: TrajectoryStore, window: Optional[AnalysisWindow],
               out_dir: Path, writer: ArtifactWriter,
               modes=(GraphMode.SYMMETRIC, GraphMode.ASYMMETRIC, GraphMode.HYBRID)) -> Dict[GraphMode, ContactGraph]:
    cfg = run_config.contact_config()
    trajectories = store.trajectories(window)
    graphs = {}
    for mode in modes:
        graph = build_graph(trajectories, cfg, mode, population=store.persons, threads=run_config.threads)
        write_graph(graph, out_dir / GRAPH_DIRS[mode], writer)
        graphs[mode] = graph
    return graphs


def run_rankings(run_config: RunConfig, graphs: Dict[GraphMode, ContactGraph], out_dir: Path,
                 writer: ArtifactWriter, measures=tuple(Measure)) -> Rankings:
    rankings: Rankings = {}
    for mode, graph in graphs.items():
        k = min(run_config.k_for(graph.n), graph.n)
        for measure in measures:
            scores = centrality(graph, measure, threads=run_config.threads)
            rankings[(mode, measure)] = scores
            path = out_dir / GRAPH_DIRS[mode] / f"{measure.value}.csv"
            write_scores(scores, path, writer)
            writer.write_text("\n".join(scores.ranking[:k]) + "\n",
                              path.with_name(f"top_{measure.value}.txt"), stage='rank')
    return rankings


def run_experiment(run_config: RunConfig, graphs: Dict[GraphMode, ContactGraph], out_dir: Path,
                   writer: ArtifactWriter, rankings: Optional[Rankings] = None, label: str = 'daily',
                   weekly: bool = False, k: Optional[int] = None):
    sym_g, hybrid_g = graphs[GraphMode.SYMMETRIC], graphs[GraphMode.HYBRID]
    params = run_config.seir_params(hybrid_g.n)
    k = min(run_config.k_for(hybrid_g.n) if k is None else k, hybrid_g.n)
    if weekly:
        report = weekly_table(sym_g, hybrid_g, params, k, threads=run_config.threads)
    else:
        report = run_table(default_strategies(k), (sym_g, hybrid_g), params,
                           threads=run_config.threads, rankings=rankings, label=label)
    report.metadata['config_hash'] = run_config.config_hash()
    write_report(report, out_dir, writer, name=f"{label}_table")
    return report


def run_seeding(run_config: RunConfig, hybrid_g: ContactGraph, out_dir: Path, writer: ArtifactWriter,
                k: Optional[int] = None):
    params = run_config.seir_params(hybrid_g.n)
    k = run_config.k_for(hybrid_g.n) if k is None else k
    groups = seeding_curves(hybrid_g, params, min(k, hybrid_g.n), threads=run_config.threads)
    write_seeding_curves(groups, hybrid_g.n, out_dir, writer)
    return groups


def run_sweep(run_config: RunConfig, hybrid_g: ContactGraph, out_dir: Path, writer: ArtifactWriter,
              measure: Optional[Measure] = None, rankings: Optional[Rankings] = None):
    measure = Measure(measure or run_config.sweep_measure)
    step = run_config.sweep_step
    ranking = (rankings or {}).get((GraphMode.HYBRID, measure))
    grid = budget_sweep(
        hybrid_g, measure,
        infected_fracs=sweep_axis(step, start=step),
        quarantine_fracs=sweep_axis(step),
        params=run_config.seir_params(hybrid_g.n),
        threads=run_config.threads,
        threshold=run_config.turning_point_threshold,
        ranking=ranking,
    )
    write_sweep(grid, out_dir, writer)
    return grid


def run_stability(run_config: RunConfig, store: TrajectoryStore, out_path: Path, writer: ArtifactWriter,
                  weeks: Optional[int] = None, measure: Optional[Measure] = None, k: Optional[int] = None,
                  clamp: bool = False):
    weeks = weeks or run_config.stability_weeks
    if clamp and store.weeks_spanned() < weeks:
        logger.warning(f"Only {store.weeks_spanned()} weeks of data, stability matrix limited to that span")
        weeks = store.weeks_spanned()
    measure = Measure(measure or run_config.sweep_measure)
    k = run_config.k_for(len(store.persons)) if k is None else k
    matrix = accumulated_week_matrix(
        store, weeks, measure, k, run_config.contact_config(), p=run_config.rbo_p, threads=run_config.threads
    )
    write_matrix(matrix, out_path, writer)
    return matrix


@trace.command('pipeline')
@click.option('--log', 'log_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Raw WLAN log')
@click.option('--ap-dir', '--ap-directory', 'ap_directory', type=click.Path(exists=True, dir_okay=False))
@click.option('--walk', 'walk_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', type=click.Path(), default=None, help='Artifact directory')
@click.pass_obj
@staged('pipeline')
def pipeline(state: CliState, log_path, ap_directory, walk_path, out):
    """Run ingest, build, graph, rank, experiment, sweep and stability in one go"""
    with stage('config'):
        run_config = state.run_config()
        out_dir = state.out_path(out)
        freeze_config(run_config, out_dir)
        writer = writer_for(run_config)

    with stage('ingest'):
        directory = load_directory(ap_directory, run_config)
        events, _ = run_ingest(run_config, log_path, directory, out_dir / 'events.csv', writer)

    with stage('build'):
        walk = load_walk(walk_path, run_config)
        store = run_build(run_config, events, directory, walk, out_dir / 'trajectories.csv', writer)

    with stage('graph'):
        daily = daily_window(store, run_config)
        graphs = run_graphs(run_config, store, daily, out_dir / 'graphs' / 'daily', writer)

    with stage('rank'):
        rankings = run_rankings(run_config, graphs, out_dir / 'rankings', writer)

    with stage('experiment'):
        reports_dir = out_dir / 'reports'
        run_experiment(run_config, graphs, reports_dir, writer, rankings=rankings)
        run_seeding(run_config, graphs[GraphMode.HYBRID], reports_dir, writer)
        k = min(run_config.k_for(graphs[GraphMode.HYBRID].n), graphs[GraphMode.HYBRID].n)
        write_matrix(cross_measure_matrix(graphs[GraphMode.HYBRID], k, p=run_config.rbo_p,
                                          threads=run_config.threads),
                     reports_dir / 'cross_measure.csv', writer, stage='experiment')
        if run_config.weekly_table:
            weekly = weekly_window(store, run_config)
            weekly_graphs = run_graphs(run_config, store, weekly, out_dir / 'graphs' / 'weekly', writer,
                                       modes=(GraphMode.SYMMETRIC, GraphMode.HYBRID))
            run_experiment(run_config, weekly_graphs, reports_dir, writer, label='weekly', weekly=True)

    with stage('sweep'):
        run_sweep(run_config, graphs[GraphMode.HYBRID], out_dir / 'sweep', writer, rankings=rankings)

    with stage('stability'):
        run_stability(run_config, store, out_dir / 'stability.csv', writer, clamp=True)

    logger.info(f"✅ Pipeline finished, artifacts in {out_dir}")
    click.echo(str(out_dir))
