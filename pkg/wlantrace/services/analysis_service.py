"""
Superspreader stability analysis

Compares top-k candidate lists with extrapolated rank-biased overlap, across
accumulated week windows and across centrality measures.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd
from joblib import Parallel, delayed

from wlantrace.core.artifacts import ArtifactWriter
from wlantrace.core.models import ContactConfig, GraphMode, Measure, RankedList, SimilarityMatrix
from wlantrace.services.centrality_service import centrality, top_k
from wlantrace.services.contact_service import ContactGraph, build_graph
from wlantrace.services.trajectory_service import TrajectoryStore

logger = logging.getLogger(__name__)


def _ids(ranked: Union[RankedList, Sequence[str]]) -> List[str]:
    return list(ranked.ids) if isinstance(ranked, RankedList) else list(ranked)


def rbo(list_a: Union[RankedList, Sequence[str]], list_b: Union[RankedList, Sequence[str]], p: float = 0.9) -> float:
    """
    Extrapolated rank-biased overlap evaluated at the depth of the shorter list

    Args:
        list_a: ranked ids, best first
        list_b: ranked ids, best first
        p: persistence in (0, 1); smaller values weight the head more

    Returns:
        Similarity in [0, 1]; exactly 1.0 when the compared prefixes are identical
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"rbo persistence p must lie in (0, 1), got {p}")
    a, b = _ids(list_a), _ids(list_b)
    if not a or not b:
        raise ValueError("rbo needs two non-empty ranked lists")

    depth = min(len(a), len(b))
    if a[:depth] == b[:depth]:
        return 1.0

    seen_a, seen_b = set(), set()
    overlap = 0
    weighted = 0.0
    weight = 1.0
    agreement = 0.0
    for position in range(depth):
        x, y = a[position], b[position]
        if x == y:
            overlap += 1
        else:
            overlap += (x in seen_b) + (y in seen_a)
        seen_a.add(x)
        seen_b.add(y)
        agreement = overlap / (position + 1)
        weighted += weight * agreement
        weight *= p

    score = (1.0 - p) * weighted + agreement * p ** depth
    return min(1.0, max(0.0, score))


def similarity_matrix(lists: List[RankedList], p: float) -> SimilarityMatrix:
    size = len(lists)
    values = [[1.0] * size for _ in range(size)]
    for row in range(size):
        for column in range(row + 1, size):
            score = rbo(lists[row], lists[column], p)
            values[row][column] = score
            values[column][row] = score
    return SimilarityMatrix(labels=[ranked.label for ranked in lists], values=values)


def _week_ranking(store: TrajectoryStore, n_weeks: int, measure: Measure, k: int, cfg: ContactConfig) -> RankedList:
    window = store.week_window(n_weeks)
    graph = build_graph(store.trajectories(window), cfg, GraphMode.HYBRID, population=store.persons)
    scores = centrality(graph, measure)
    return RankedList(ids=top_k(scores, min(k, graph.n)), label=window.label)


def accumulated_week_matrix(store: TrajectoryStore, weeks: int, measure: Measure, k: int, cfg: ContactConfig,
                            p: float = 0.9, threads: int = 1) -> SimilarityMatrix:
    """
    RBO between the top-k lists of hybrid graphs built over weeks 1..N, for N = 1..weeks

    Raises InsufficientDataError when the store spans fewer than 7 * weeks days.
    """
    store.require_weeks(weeks)
    if threads > 1 and weeks > 1:
        lists = Parallel(n_jobs=threads)(
            delayed(_week_ranking)(store, n_weeks, measure, k, cfg) for n_weeks in range(1, weeks + 1)
        )
    else:
        lists = [_week_ranking(store, n_weeks, measure, k, cfg) for n_weeks in range(1, weeks + 1)]

    matrix = similarity_matrix(lists, p)
    logger.info(f"✅ Stability matrix over {weeks} accumulated weeks ({measure.value}, k={k}, p={p})")
    return matrix


def cross_measure_matrix(graph: ContactGraph, k: int, p: float = 0.9, threads: int = 1) -> SimilarityMatrix:
    """RBO between the top-k lists of every centrality measure on one graph"""
    lists = [
        RankedList(ids=top_k(centrality(graph, measure, threads=threads), min(k, graph.n)), label=measure.value)
        for measure in Measure
    ]
    return similarity_matrix(lists, p)


def matrix_frame(matrix: SimilarityMatrix) -> pd.DataFrame:
    frame = pd.DataFrame(matrix.values, index=matrix.labels, columns=matrix.labels)
    frame.index.name = 'window'
    return frame


def write_matrix(matrix: SimilarityMatrix, path, writer: Optional[ArtifactWriter] = None,
                 stage: str = 'stability') -> Path:
    writer = writer or ArtifactWriter()
    return writer.write_frame(matrix_frame(matrix), path, stage=stage, index=True)
