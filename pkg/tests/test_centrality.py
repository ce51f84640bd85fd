import itertools
import json

import networkx as nx
import numpy as np
import pytest

from wlantrace.core.errors import InsufficientDataError
from wlantrace.core.models import GraphMode, Measure, TraceKind
from wlantrace.services import centrality_service
from wlantrace.services.centrality_service import (
    betweenness_centrality, centrality, closeness_centrality, degree_centrality, read_person_list, top_k,
    write_scores
)
from wlantrace.services.contact_service import ContactGraph


def _graph(arcs, vertices=()):
    return ContactGraph(vertices, {arc: frozenset([TraceKind.SYMMETRIC]) for arc in arcs}, GraphMode.HYBRID)


def _undirected(*edges):
    return _graph([(a, b) for a, b in edges] + [(b, a) for a, b in edges])


def _random_digraph(rng):
    n = int(rng.integers(2, 13))
    names = [f"v{i:02d}" for i in range(n)]
    density = rng.uniform(0.1, 0.6)
    arcs = [(a, b) for a, b in itertools.permutations(names, 2) if rng.random() < density]
    return _graph(arcs, vertices=names)


def _distances(graph):
    """All-pairs hop counts by Floyd-Warshall"""
    n = graph.n
    position = {person: i for i, person in enumerate(graph.vertices)}
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0)
    for src, dst in graph.arcs:
        dist[position[src], position[dst]] = 1
    for middle in range(n):
        dist = np.minimum(dist, dist[:, [middle]] + dist[[middle], :])
    return dist


def _closeness_oracle(graph):
    dist = _distances(graph)
    scores = {}
    for i, person in enumerate(graph.vertices):
        reached = [d for j, d in enumerate(dist[i]) if j != i and np.isfinite(d)]
        if not reached:
            scores[person] = 0.0
        else:
            r = len(reached)
            scores[person] = (r / (graph.n - 1)) * (r / sum(reached))
    return scores


def _betweenness_oracle(graph):
    G = graph.to_networkx()
    scores = dict.fromkeys(graph.vertices, 0.0)
    for s, t in itertools.permutations(graph.vertices, 2):
        if not nx.has_path(G, s, t):
            continue
        paths = list(nx.all_shortest_paths(G, s, t))
        for path in paths:
            for inner in path[1:-1]:
                scores[inner] += 1.0 / len(paths)
    return scores


def test_degree_of_directed_star():
    scores = degree_centrality(_graph([('hub', 'a'), ('hub', 'b'), ('hub', 'c')]))
    assert scores.scores['hub'] == 1.0
    assert scores.scores['a'] == 0.0


def test_isolated_vertex_scores_zero():
    graph = _graph([('a', 'b'), ('b', 'a')], vertices=['a', 'b', 'lonely'])
    for measure in Measure:
        assert centrality(graph, measure).scores['lonely'] == 0.0


def test_closeness_on_undirected_path():
    scores = closeness_centrality(_undirected(('a', 'b'), ('b', 'c'))).scores
    assert scores['b'] == pytest.approx(1.0)
    assert scores['a'] == pytest.approx(2 / 3)


def test_betweenness_on_directed_path():
    scores = betweenness_centrality(_graph([('a', 'b'), ('b', 'c')])).scores
    assert scores == {'a': 0.0, 'b': 1.0, 'c': 0.0}


def test_betweenness_of_complete_graph_is_zero():
    names = ['a', 'b', 'c', 'd']
    scores = betweenness_centrality(_graph(list(itertools.permutations(names, 2)))).scores
    assert all(value == 0.0 for value in scores.values())


def test_single_vertex_rejected():
    with pytest.raises(InsufficientDataError):
        degree_centrality(_graph([], vertices=['solo']))


def test_measures_match_brute_force_oracles():
    rng = np.random.default_rng(2015)
    for _ in range(200):
        graph = _random_digraph(rng)
        G = graph.to_networkx()

        degree = degree_centrality(graph).scores
        for person in graph.vertices:
            assert degree[person] == G.out_degree(person) / (graph.n - 1)

        closeness = closeness_centrality(graph).scores
        for person, expected in _closeness_oracle(graph).items():
            assert closeness[person] == pytest.approx(expected, abs=1e-12)

        betweenness = betweenness_centrality(graph).scores
        for person, expected in _betweenness_oracle(graph).items():
            assert betweenness[person] == pytest.approx(expected, abs=1e-9)


def test_chunked_betweenness_matches_single_pass(monkeypatch):
    graph = _random_digraph(np.random.default_rng(9))
    whole = betweenness_centrality(graph).scores
    monkeypatch.setattr(centrality_service, 'SOURCE_CHUNK', 3)
    chunked = betweenness_centrality(graph).scores
    for person in graph.vertices:
        assert chunked[person] == pytest.approx(whole[person], abs=1e-12)


def test_ties_rank_lower_id_first():
    scores = degree_centrality(_graph([('b', 'x'), ('a', 'y')], vertices=['a', 'b', 'x', 'y']))
    assert scores.ranking[:2] == ['a', 'b']
    assert scores.rank_of('b') == 2


def test_top_k_bounds():
    scores = degree_centrality(_graph([('a', 'b'), ('b', 'c')]))
    assert top_k(scores, 0) == []
    assert top_k(scores, 3) == scores.ranking
    with pytest.raises(ValueError):
        top_k(scores, 4)


def test_scores_written_with_summary(tmp_path):
    scores = degree_centrality(_graph([('a', 'b'), ('a', 'c'), ('b', 'c')]))
    path = write_scores(scores, tmp_path / 'degree.csv')
    assert path.read_text().splitlines()[0] == 'person_id,score,rank'
    summary = json.loads((tmp_path / 'degree.summary.json').read_text())
    assert summary['count'] == 3
    assert summary['max'] == 1.0
    assert sum(summary['histogram']['relative_frequency']) == pytest.approx(1.0)


def test_person_list_formats(tmp_path):
    plain = tmp_path / 'plain.txt'
    plain.write_text("s1\ns2\n\n")
    assert read_person_list(plain) == ['s1', 's2']
    table = tmp_path / 'table.csv'
    table.write_text("person_id,score,rank\ns3,0.5,1\n")
    assert read_person_list(table) == ['s3']


@pytest.mark.parametrize('measure', list(Measure))
def test_scores_follow_relabelled_vertices(measure):
    rng = np.random.default_rng(31)
    for _ in range(20):
        graph = _random_digraph(rng)
        names = list(graph.vertices)
        renamed = dict(zip(names, [f"r{i:02d}" for i in rng.permutation(len(names))]))
        relabelled = _graph([(renamed[a], renamed[b]) for a, b in graph.arcs], vertices=renamed.values())

        scores = centrality(graph, measure).scores
        relabelled_scores = centrality(relabelled, measure).scores
        for person in names:
            assert relabelled_scores[renamed[person]] == pytest.approx(scores[person], rel=1e-9, abs=1e-12)
