import itertools
import json

import numpy as np
import pytest

from wlantrace.core.models import GraphMode, SeirParams, TraceKind
from wlantrace.services.contact_service import ContactGraph
from wlantrace.services.seir_service import (
    _doubling_time, ensemble, run_metrics, simulate, write_ensemble, write_exposures
)


def _graph(arcs, vertices=()):
    return ContactGraph(vertices, {arc: frozenset([TraceKind.SYMMETRIC]) for arc in arcs}, GraphMode.HYBRID)


@pytest.fixture
def dense_graph():
    rng = np.random.default_rng(4)
    names = [f"p{i:02d}" for i in range(40)]
    arcs = [(a, b) for a, b in itertools.permutations(names, 2) if rng.random() < 0.15]
    return _graph(arcs, vertices=names)


def test_compartments_are_conserved(dense_graph):
    params = SeirParams(beta=0.3, initial_infected=3, max_days=40, runs=1, seed=1)
    trace = simulate(dense_graph, params, quarantine={'p00', 'p01'}, rng_seed=99)
    assert trace.days == 40
    for day in range(trace.days + 1):
        total = trace.S[day] + trace.E[day] + trace.I[day] + trace.R[day] + trace.Q[day]
        assert total == dense_graph.n
        assert trace.Q[day] == 2
        assert trace.cumulative_infected[day] == dense_graph.n - trace.S[day] - trace.Q[day]
    assert trace.cumulative_infected == sorted(trace.cumulative_infected)


def test_no_transmission_when_beta_is_zero(dense_graph):
    params = SeirParams(beta=0.0, initial_infected=5, max_days=30, runs=1)
    trace = simulate(dense_graph, params, quarantine=set(), rng_seed=7)
    assert set(trace.cumulative_infected) == {5}


def test_quarantining_everyone_else_stops_spread(dense_graph):
    seeds = set(dense_graph.vertices[:4])
    quarantine = set(dense_graph.vertices) - seeds
    params = SeirParams(beta=1.0, initial_infected=4, max_days=30, runs=1)
    trace = simulate(dense_graph, params, quarantine=quarantine, rng_seed=3)
    assert trace.cumulative_infected[-1] == 4


def test_single_arc_deterministic_limit():
    graph = _graph([('a', 'b')])
    params = SeirParams(beta=1.0, sigma=1.0, gamma=0.1, initial_infected=1, max_days=5, runs=1)
    trace = simulate(graph, params, quarantine=set(), rng_seed=11, seeds={'a'}, record_exposures=True)
    assert trace.E[1] == 1
    assert trace.E[2] == 0
    assert trace.S[2] == 0
    assert trace.exposures[0] == (1, 'b', ('a',))


def test_infection_follows_arc_direction():
    graph = _graph([('a', 'b')])
    params = SeirParams(beta=1.0, sigma=1.0, initial_infected=1, max_days=20, runs=1)
    trace = simulate(graph, params, quarantine=set(), rng_seed=5, seeds={'b'})
    assert trace.cumulative_infected[-1] == 1


def test_too_many_initial_infected_rejected():
    graph = _graph([('a', 'b'), ('b', 'c')])
    params = SeirParams(initial_infected=2, runs=1)
    with pytest.raises(ValueError):
        simulate(graph, params, quarantine={'a', 'b'}, rng_seed=1)


def test_seeds_outside_graph_rejected():
    params = SeirParams(initial_infected=1, runs=1)
    with pytest.raises(ValueError):
        simulate(_graph([('a', 'b')]), params, quarantine=set(), rng_seed=1, seeds={'zz'})


def test_doubling_time_interpolates():
    assert _doubling_time(np.array([50, 80, 120]), 50) == pytest.approx(1.5)
    assert _doubling_time(np.array([50, 60, 70]), 50) is None
    assert _doubling_time(np.array([50, 100]), 50) == pytest.approx(1.0)


def test_peak_time_of_declining_epidemic():
    params = SeirParams(initial_infected=50, runs=1)
    trace = simulate(_graph([], vertices=[f"p{i}" for i in range(100)]), params, set(), rng_seed=2)
    trace.I = [50, 40, 30] + [20] * (len(trace.I) - 3)
    metrics = run_metrics(trace, population=100, initial_infected=50)
    assert metrics.peak_infected_time == 0.0
    assert metrics.peak_infected_fraction == 50.0
    assert metrics.doubling_time is None


def test_single_run_has_zero_spread(dense_graph):
    params = SeirParams(beta=0.2, initial_infected=2, max_days=30, runs=1, seed=8)
    result = ensemble(dense_graph, params)
    assert result.runs == 1
    assert result.std.total_infected_fraction == 0.0
    assert result.std.peak_infected_time == 0.0


def test_deterministic_runs_have_zero_spread():
    names = [f"p{i}" for i in range(10)]
    graph = _graph([], vertices=names)
    params = SeirParams(beta=0.0, initial_infected=2, max_days=10, runs=4)
    result = ensemble(graph, params)
    assert result.mean.total_infected_fraction == pytest.approx(20.0)
    assert result.std.total_infected_fraction == 0.0
    assert result.undefined_doubling_count == 4
    assert result.mean.doubling_time is None


def test_ensemble_is_reproducible(dense_graph):
    params = SeirParams(beta=0.2, initial_infected=2, max_days=30, runs=6, seed=123)
    first = ensemble(dense_graph, params)
    second = ensemble(dense_graph, params)
    parallel = ensemble(dense_graph, params, threads=2)
    assert first == second
    assert first == parallel


def test_quarantine_callable_gets_run_index(dense_graph):
    seen = []

    def pick(run_index):
        seen.append(run_index)
        return {dense_graph.vertices[run_index]}

    params = SeirParams(beta=0.1, initial_infected=1, max_days=5, runs=3)
    ensemble(dense_graph, params, quarantine=pick)
    assert sorted(seen) == [0, 1, 2]


def test_outputs_written(tmp_path, dense_graph):
    params = SeirParams(beta=0.3, initial_infected=2, max_days=20, runs=2)
    result = ensemble(dense_graph, params)
    write_ensemble(result, tmp_path)
    metrics = json.loads((tmp_path / 'metrics.json').read_text())
    assert metrics['runs'] == 2
    assert set(metrics['stddevs']) == {
        'doubling_time', 'total_infected_fraction', 'peak_infected_time', 'peak_infected_fraction'
    }
    assert (tmp_path / 'trace.csv').read_text().splitlines()[0] == 'day,S,E,I,R,Q,cumulative_infected'
    assert len((tmp_path / 'trace.csv').read_text().splitlines()) == 22

    trace = simulate(dense_graph, params, set(), rng_seed=1, record_exposures=True)
    write_exposures(trace, tmp_path / 'exposures.csv')
    rows = (tmp_path / 'exposures.csv').read_text().splitlines()
    assert rows[0] == 'day,person_id,infectious_in_neighbours'
    assert len(rows) - 1 == len(trace.exposures)


def test_growing_quarantine_lowers_total_infected(dense_graph):
    params = SeirParams(beta=0.3, initial_infected=3, max_days=60, runs=30, seed=8)
    G = dense_graph.to_networkx()
    by_degree = sorted(dense_graph.vertices, key=lambda person: (-G.out_degree(person), person))
    results = [ensemble(dense_graph, params, quarantine=set(by_degree[:size])) for size in (0, 4, 8, 12)]
    for before, after in zip(results, results[1:]):
        margin = 2 * max(before.stderr('total_infected_fraction'), after.stderr('total_infected_fraction'))
        assert after.mean.total_infected_fraction <= before.mean.total_infected_fraction + margin
