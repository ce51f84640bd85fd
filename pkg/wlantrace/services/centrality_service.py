"""
Centrality scoring

Degree, closeness and betweenness on the directed contact graph. Sources are
processed in fixed-size chunks and the per-chunk totals are reduced in chunk
order, so scores are identical for any THREADS value.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import networkx as nx
import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from wlantrace.core.artifacts import ArtifactWriter
from wlantrace.core.errors import InsufficientDataError
from wlantrace.core.models import CentralityScores, Measure
from wlantrace.services.contact_service import ContactGraph

logger = logging.getLogger(__name__)

SOURCE_CHUNK = 256
HISTOGRAM_BINS = 20


def _require_pair(graph: ContactGraph):
    if graph.n < 2:
        raise InsufficientDataError(f"centrality needs at least 2 vertices, graph has {graph.n}")


def _chunks(items: Sequence[str]) -> List[Sequence[str]]:
    return [items[start:start + SOURCE_CHUNK] for start in range(0, len(items), SOURCE_CHUNK)]


def _map_chunks(func, G: nx.DiGraph, threads: int) -> list:
    chunks = _chunks(sorted(G))
    if threads > 1 and len(chunks) > 1:
        return Parallel(n_jobs=threads)(delayed(func)(G, chunk) for chunk in chunks)
    return [func(G, chunk) for chunk in chunks]


def degree_centrality(graph: ContactGraph) -> CentralityScores:
    """Out-degree over N - 1"""
    _require_pair(graph)
    G = graph.to_networkx()
    denominator = graph.n - 1
    scores = {person: G.out_degree(person) / denominator for person in G}
    return CentralityScores.from_scores(Measure.DEGREE, scores)


def _closeness_chunk(G: nx.DiGraph, sources: Sequence[str]) -> Dict[str, float]:
    denominator = len(G) - 1
    values = {}
    for source in sources:
        distances = nx.single_source_shortest_path_length(G, source)
        reached = len(distances) - 1
        total = sum(distances.values())
        if reached == 0 or total == 0:
            values[source] = 0.0
        else:
            values[source] = (reached / denominator) * (reached / total)
    return values


def closeness_centrality(graph: ContactGraph, threads: int = 1) -> CentralityScores:
    """
    Closeness over the vertices reachable from each person

    With r people reachable from u at total distance D the score is
    (r / (N - 1)) * (r / D), and 0 when nobody is reachable.
    """
    _require_pair(graph)
    G = graph.to_networkx()
    scores: Dict[str, float] = {}
    for values in _map_chunks(_closeness_chunk, G, threads):
        scores.update(values)
    return CentralityScores.from_scores(Measure.CLOSENESS, scores)


def _betweenness_chunk(G: nx.DiGraph, sources: Sequence[str]) -> Dict[str, float]:
    return nx.betweenness_centrality_subset(G, sources=list(sources), targets=list(G), normalized=False)


def betweenness_centrality(graph: ContactGraph, threads: int = 1) -> CentralityScores:
    """Unnormalized shortest-path betweenness over ordered (s, t) pairs"""
    _require_pair(graph)
    G = graph.to_networkx()
    scores = dict.fromkeys(G, 0.0)
    for partial in _map_chunks(_betweenness_chunk, G, threads):
        for person in scores:
            scores[person] += partial[person]
    return CentralityScores.from_scores(Measure.BETWEENNESS, scores)


def centrality(graph: ContactGraph, measure: Measure, threads: int = 1) -> CentralityScores:
    measure = Measure(measure)
    if measure == Measure.DEGREE:
        return degree_centrality(graph)
    if measure == Measure.CLOSENESS:
        return closeness_centrality(graph, threads=threads)
    return betweenness_centrality(graph, threads=threads)


def rank_all(graph: ContactGraph, threads: int = 1) -> Dict[Measure, CentralityScores]:
    ranked = {measure: centrality(graph, measure, threads=threads) for measure in Measure}
    logger.info(f"Ranked {graph.n} persons by {', '.join(m.value for m in ranked)} on the {graph.mode.value} graph")
    return ranked


def top_k(scores: CentralityScores, k: int) -> List[str]:
    if k < 0 or k > len(scores.ranking):
        raise ValueError(f"k must be between 0 and {len(scores.ranking)}, got {k}")
    return scores.ranking[:k]


def score_summary(scores: CentralityScores) -> Dict[str, object]:
    """Distribution statistics and a relative-frequency histogram of one measure"""
    values = np.array([scores.scores[person] for person in scores.ranking], dtype=float)
    counts, edges = np.histogram(values, bins=HISTOGRAM_BINS)
    return {
        'measure': scores.measure.value,
        'count': int(values.size),
        'mean': float(values.mean()),
        'std': float(values.std()),
        'min': float(values.min()),
        'max': float(values.max()),
        'median': float(np.median(values)),
        'q1': float(np.percentile(values, 25)),
        'q3': float(np.percentile(values, 75)),
        'zero_count': int((values == 0).sum()),
        'histogram': {
            'bin_edges': edges.tolist(),
            'relative_frequency': (counts / values.size).tolist(),
        },
    }


def scores_frame(scores: CentralityScores) -> pd.DataFrame:
    return pd.DataFrame({
        'person_id': scores.ranking,
        'score': [scores.scores[person] for person in scores.ranking],
        'rank': range(1, len(scores.ranking) + 1),
    })


def write_scores(scores: CentralityScores, path, writer: Optional[ArtifactWriter] = None) -> Path:
    """Write person_id,score,rank plus a sibling <name>.summary.json"""
    writer = writer or ArtifactWriter()
    path = Path(path)
    writer.write_frame(scores_frame(scores), path, stage='rank')
    writer.write_json(score_summary(scores), path.with_name(path.stem + '.summary.json'), stage='rank')
    return path


def read_person_list(path) -> List[str]:
    """One person id per line, or a CSV with a person_id column"""
    path = Path(path)
    text = path.read_text(encoding='utf-8')
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if lines and lines[0].split(',')[0] == 'person_id':
        return [line.split(',')[0] for line in lines[1:]]
    return lines
