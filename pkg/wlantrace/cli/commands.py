import logging

import click

from wlantrace.cli import CliState, staged, trace, writer_for
from wlantrace.cli.pipeline import (
    GRAPH_DIRS, load_directory, load_walk, run_build, run_experiment, run_graphs, run_ingest,
    run_rankings, run_seeding, run_stability, run_sweep
)
from wlantrace.core.models import GraphMode, Measure
from wlantrace.core.seeding import derive_seed
from wlantrace.services.centrality_service import read_person_list
from wlantrace.services.contact_service import read_graph
from wlantrace.services.seir_service import ensemble, simulate, write_ensemble, write_exposures
from wlantrace.services.synth_service import generate, load_campus_spec
from wlantrace.services.trajectory_service import TrajectoryStore, parse_window
from wlantrace.services.wlan_log_service import read_events

logger = logging.getLogger(__name__)

MODES = {'sym': GraphMode.SYMMETRIC, 'asym': GraphMode.ASYMMETRIC, 'hybrid': GraphMode.HYBRID}
MEASURES = [measure.value for measure in Measure]


@trace.command()
@click.option('--log', 'log_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--ap-dir', '--ap-directory', 'ap_directory', type=click.Path(exists=True, dir_okay=False))
@click.option('--ssid', 'ssids', multiple=True, help='SSID to keep (repeatable); overrides SSIDS')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Clean event file (.csv or .parquet)')
@click.pass_obj
@staged('ingest')
def ingest(state: CliState, log_path, ap_directory, ssids, out):
    """Parse a raw WLAN log and keep successful associations at known APs"""
    run_config = state.run_config(ssids=list(ssids) or None)
    directory = load_directory(ap_directory, run_config)
    events_path = state.out_path(out, 'events.csv')
    events, stats = run_ingest(run_config, log_path, directory, events_path, writer_for(run_config))
    click.echo(f"{len(events)} events written to {events_path} ({stats.dropped} lines dropped)")


@trace.command()
@click.option('--events', 'events_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--ap-dir', '--ap-directory', 'ap_directory', type=click.Path(exists=True, dir_okay=False))
@click.option('--walk', 'walk_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--window', default=None, help='YYYY-MM-DD or YYYY-MM-DD/YYYY-MM-DD')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Trajectory CSV')
@click.pass_obj
@staged('build')
def build(state: CliState, events_path, ap_directory, walk_path, window, out):
    """Build per-person trajectories from clean events"""
    run_config = state.run_config(window=window)
    directory = load_directory(ap_directory, run_config)
    walk = load_walk(walk_path, run_config)
    analysis_window = parse_window(run_config.window, run_config.timezone) if run_config.window else None
    trajectories_path = state.out_path(out, 'trajectories.csv')
    store = run_build(run_config, read_events(events_path), directory, walk, trajectories_path,
                      writer_for(run_config), window=analysis_window)
    click.echo(f"{len(store.persons)} trajectories written to {trajectories_path}")


@trace.command()
@click.option('--trajectories', 'trajectories_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--mode', type=click.Choice(sorted(MODES)), default='hybrid', show_default=True)
@click.option('--window', default=None, help='Restrict to YYYY-MM-DD or YYYY-MM-DD/YYYY-MM-DD')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Graph directory')
@click.pass_obj
@staged('graph')
def graph(state: CliState, trajectories_path, mode, window, out):
    """Build a symmetric, asymmetric or hybrid contact graph"""
    run_config = state.run_config(window=window)
    store = TrajectoryStore.from_csv(trajectories_path, run_config.timezone)
    analysis_window = parse_window(run_config.window, run_config.timezone) if run_config.window else None
    out_dir = state.out_path(out, 'graphs')
    graphs = run_graphs(run_config, store, analysis_window, out_dir, writer_for(run_config), modes=(MODES[mode],))
    built = graphs[MODES[mode]]
    click.echo(f"{built.mode.value} graph with N={built.n} and {built.arc_count()} arcs "
               f"written to {out_dir / GRAPH_DIRS[MODES[mode]]}")


@trace.command()
@click.option('--graph', 'graph_path', required=True, type=click.Path(exists=True))
@click.option('--measure', type=click.Choice(MEASURES + ['all']), default='all', show_default=True)
@click.option('--k', type=click.IntRange(min=0), default=None, help='Length of the top-k list')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Ranking directory')
@click.pass_obj
@staged('rank')
def rank(state: CliState, graph_path, measure, k, out):
    """Score every person by centrality and write ranked lists"""
    run_config = state.run_config(k=k)
    contact_graph = read_graph(graph_path)
    measures = tuple(Measure) if measure == 'all' else (Measure(measure),)
    out_dir = state.out_path(out, 'rankings')
    run_rankings(run_config, {contact_graph.mode: contact_graph}, out_dir, writer_for(run_config), measures)
    click.echo(f"Rankings written to {out_dir / GRAPH_DIRS[contact_graph.mode]}")


@trace.command('simulate')
@click.option('--graph', 'graph_path', required=True, type=click.Path(exists=True))
@click.option('--quarantine', 'quarantine_path', type=click.Path(exists=True, dir_okay=False),
              help='Person ids to quarantine, one per line')
@click.option('--params', 'params_path', type=click.Path(exists=True, dir_okay=False),
              help='Config file with SEIR keys')
@click.option('--runs', type=click.IntRange(min=1), default=None)
@click.option('--seed', type=int, default=None, help='Overrides the global --seed')
@click.option('--exposures/--no-exposures', default=False, help='Also write the transmission log of run 0')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Output directory')
@click.pass_obj
@staged('simulate')
def simulate_command(state: CliState, graph_path, quarantine_path, params_path, runs, seed, exposures, out):
    """Run an SEIR ensemble on a contact graph"""
    run_config = state.run_config(extra_path=params_path, runs=runs, seed=seed)
    contact_graph = read_graph(graph_path)
    quarantine = set(read_person_list(quarantine_path)) if quarantine_path else set()
    params = run_config.seir_params(contact_graph.n)
    writer = writer_for(run_config)
    out_dir = state.out_path(out, 'simulation')

    result = ensemble(contact_graph, params, quarantine=quarantine, threads=run_config.threads)
    write_ensemble(result, out_dir, writer)
    if exposures:
        trace_0 = simulate(contact_graph, params, quarantine, rng_seed=derive_seed(params.seed, 0), record_exposures=True)
        write_exposures(trace_0, out_dir / 'exposures.csv', writer)
    click.echo(f"T-Inf {result.mean.total_infected_fraction:.2f}% over {result.runs} runs, written to {out_dir}")


@trace.command()
@click.option('--sym', 'sym_path', required=True, type=click.Path(exists=True))
@click.option('--hybrid', 'hybrid_path', required=True, type=click.Path(exists=True))
@click.option('--params', 'params_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--k', type=click.IntRange(min=0), default=None)
@click.option('--weekly', is_flag=True, help='Graphs span one week: betweenness-only table')
@click.option('--seeding/--no-seeding', default=False, help='Also write centrality-seeded spread curves')
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.pass_obj
@staged('experiment')
def experiment(state: CliState, sym_path, hybrid_path, params_path, k, weekly, seeding, out):
    """Compare quarantine strategies with SEIR ensembles on the hybrid graph"""
    run_config = state.run_config(extra_path=params_path, k=k)
    graphs = {GraphMode.SYMMETRIC: read_graph(sym_path), GraphMode.HYBRID: read_graph(hybrid_path)}
    writer = writer_for(run_config)
    out_dir = state.out_path(out, 'reports')
    label = 'weekly' if weekly else 'daily'
    report = run_experiment(run_config, graphs, out_dir, writer, label=label, weekly=weekly)
    if seeding:
        run_seeding(run_config, graphs[GraphMode.HYBRID], out_dir, writer)
    click.echo(f"{len(report.rows)} strategy rows written to {out_dir / (label + '_table.csv')}")


@trace.command()
@click.option('--hybrid', 'hybrid_path', required=True, type=click.Path(exists=True))
@click.option('--measure', type=click.Choice(MEASURES), default=None)
@click.option('--step', type=float, default=None, help='Grid step in percent')
@click.option('--params', 'params_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.pass_obj
@staged('sweep')
def sweep(state: CliState, hybrid_path, measure, step, params_path, out):
    """Mean total infected fraction over initial-infected x quarantined percentages"""
    run_config = state.run_config(extra_path=params_path, sweep_measure=measure, sweep_step=step)
    out_dir = state.out_path(out, 'sweep')
    grid = run_sweep(run_config, read_graph(hybrid_path), out_dir, writer_for(run_config))
    click.echo(f"Sweep written to {out_dir}, turning point {grid.turning_point}")


@trace.command()
@click.option('--trajectories', 'trajectories_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--weeks', type=click.IntRange(min=1), default=None)
@click.option('--measure', type=click.Choice(MEASURES), default=None)
@click.option('--k', type=click.IntRange(min=1), default=None)
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Similarity matrix CSV')
@click.pass_obj
@staged('stability')
def stability(state: CliState, trajectories_path, weeks, measure, k, out):
    """RBO similarity of top-k lists across accumulated weeks"""
    run_config = state.run_config(stability_weeks=weeks, sweep_measure=measure, k=k)
    store = TrajectoryStore.from_csv(trajectories_path, run_config.timezone)
    out_path = state.out_path(out, 'stability.csv')
    matrix = run_stability(run_config, store, out_path, writer_for(run_config))
    click.echo(f"{len(matrix.labels)}x{len(matrix.labels)} stability matrix written to {out_path}")


@trace.command()
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False), help='Campus spec file')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Log file to write')
@click.option('--manifest', 'manifest_path', type=click.Path(dir_okay=False), default=None)
@click.option('--students', type=click.IntRange(min=1), default=None)
@click.option('--weeks', type=click.IntRange(min=1), default=None)
@click.option('--campus-seed', type=int, default=None)
@click.pass_obj
@staged('synth')
def synth(state: CliState, spec_path, out, manifest_path, students, weeks, campus_seed):
    """Generate a synthetic campus log with planted superspreaders"""
    spec = load_campus_spec(spec_path, overrides={'n_students': students, 'weeks': weeks, 'seed': campus_seed})
    log_path = state.out_path(out, 'campus.log')
    manifest = manifest_path or log_path.with_name('manifest.json')
    campus = generate(spec, log_path, manifest)
    click.echo(f"{len(campus.lines)} log lines written to {log_path}, "
               f"{len(campus.manifest['spreaders'])} planted spreaders in {manifest}")
