"""
Contact tracing

Builds symmetric (mutual co-location) and asymmetric (environmental) contact
graphs from trajectories and merges them into a hybrid graph. Intervals are
closed on both ends and every criterion uses >=.
"""

import json
import logging
from bisect import bisect_left, bisect_right
from collections import defaultdict
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx
import pandas as pd
from joblib import Parallel, delayed

from wlantrace.core.artifacts import ArtifactWriter
from wlantrace.core.errors import LogFileError
from wlantrace.core.models import ContactConfig, GraphMode, TraceKind, Trajectory

logger = logging.getLogger(__name__)

Arc = Tuple[str, str]
# (arrival, stay, person_id) for every tracklet seen at one AP
ApVisits = List[Tuple[int, int, str]]

KIND_SEPARATOR = '+'


def overlap_duration(t_q: int, st_q: int, t_p: int, st_p: int) -> int:
    """Co-location length of two visits; negative values are the gap between them"""
    return st_q + st_p - max(t_q + st_q, t_p + st_p) + min(t_q, t_p)


def asymmetric_overlap(t_q: int, st_q: int, t_p: int, st_p: int, d_env: int) -> int:
    """Overlap of p's visit with the part of q's visit that starts d_env after q arrived"""
    return (st_q - d_env) + st_p - max(t_q + st_q, t_p + st_p) + min(t_q + d_env, t_p)


class ContactGraph:
    """Immutable directed contact graph; every arc carries the set of tracing kinds that found it"""

    def __init__(self, vertices: Iterable[str], arcs: Dict[Arc, FrozenSet[TraceKind]], mode: GraphMode):
        vertex_set = set(vertices)
        for src, dst in arcs:
            if src == dst:
                raise ValueError(f"self-arc on {src}")
            vertex_set.add(src)
            vertex_set.add(dst)
        self.vertices: Tuple[str, ...] = tuple(sorted(vertex_set))
        self.arcs: Dict[Arc, FrozenSet[TraceKind]] = {arc: frozenset(arcs[arc]) for arc in sorted(arcs)}
        self.mode = GraphMode(mode)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def arc_count(self, kind: Optional[TraceKind] = None) -> int:
        if kind is None:
            return len(self.arcs)
        return sum(1 for kinds in self.arcs.values() if kind in kinds)

    def has_arc(self, src: str, dst: str, kind: Optional[TraceKind] = None) -> bool:
        kinds = self.arcs.get((src, dst))
        if kinds is None:
            return False
        return kind is None or kind in kinds

    def is_symmetric(self) -> bool:
        return all((dst, src) in self.arcs for src, dst in self.arcs)

    def with_population(self, population: Iterable[str]) -> 'ContactGraph':
        return ContactGraph(set(self.vertices) | set(population), self.arcs, self.mode)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.arcs)
        return graph

    def summary(self) -> Dict[str, object]:
        both = sum(1 for kinds in self.arcs.values() if len(kinds) > 1)
        return {
            'mode': self.mode.value,
            'N': self.n,
            'arcs': self.arc_count(),
            'symmetric_arcs': self.arc_count(TraceKind.SYMMETRIC),
            'asymmetric_arcs': self.arc_count(TraceKind.ASYMMETRIC),
            'both_kinds_arcs': both,
        }

    def __repr__(self) -> str:
        return f"ContactGraph(mode={self.mode.value}, N={self.n}, arcs={len(self.arcs)})"


def _as_trajectories(trajectories: Union[Dict[str, Trajectory], Iterable[Trajectory]]) -> List[Trajectory]:
    if isinstance(trajectories, dict):
        return [trajectories[person] for person in sorted(trajectories)]
    return sorted(trajectories, key=lambda trajectory: trajectory.person_id)


def _visits_by_ap(trajectories: List[Trajectory]) -> Dict[int, ApVisits]:
    by_ap: Dict[int, ApVisits] = defaultdict(list)
    for trajectory in trajectories:
        for tracklet in trajectory.tracklets:
            by_ap[tracklet.ap_id].append((tracklet.arrival, tracklet.stay, trajectory.person_id))
    for visits in by_ap.values():
        visits.sort()
    return by_ap


def _join_ap(visits: ApVisits, kind: TraceKind, cfg: ContactConfig, method: str) -> Set[Arc]:
    """All arcs found among the visits of one AP"""
    if kind == TraceKind.SYMMETRIC:
        offset, threshold = 0, cfg.d_sym
    else:
        offset, threshold = cfg.d_env, cfg.d_asym

    arcs: Set[Arc] = set()
    arrivals = [visit[0] for visit in visits]
    max_stay = max((visit[1] for visit in visits), default=0)

    for t_q, st_q, person_q in visits:
        if st_q < offset:
            continue
        query_start, query_end = t_q + offset, t_q + st_q
        if method == 'bruteforce':
            candidates = range(len(visits))
        else:
            # A match needs arrival <= query_end - threshold and
            # departure >= query_start + threshold, with departure <= arrival + max_stay
            low = bisect_left(arrivals, query_start + threshold - max_stay)
            high = bisect_right(arrivals, query_end - threshold)
            candidates = range(low, high)

        for index in candidates:
            t_p, st_p, person_p = visits[index]
            if person_p == person_q:
                continue
            if kind == TraceKind.SYMMETRIC:
                matched = overlap_duration(t_q, st_q, t_p, st_p) >= threshold
            else:
                matched = asymmetric_overlap(t_q, st_q, t_p, st_p, offset) >= threshold
            if matched:
                arcs.add((person_q, person_p))
                if kind == TraceKind.SYMMETRIC:
                    arcs.add((person_p, person_q))
    return arcs


def _trace(trajectories, cfg: ContactConfig, kind: TraceKind, method: str, threads: int) -> Set[Arc]:
    if method not in ('indexed', 'bruteforce'):
        raise ValueError(f"unknown candidate search method: {method}")
    by_ap = _visits_by_ap(_as_trajectories(trajectories))
    ap_ids = sorted(by_ap)

    if threads > 1 and len(ap_ids) > 1:
        found = Parallel(n_jobs=threads)(
            delayed(_join_ap)(by_ap[ap_id], kind, cfg, method) for ap_id in ap_ids
        )
    else:
        found = [_join_ap(by_ap[ap_id], kind, cfg, method) for ap_id in ap_ids]

    arcs: Set[Arc] = set()
    for ap_arcs in found:
        arcs |= ap_arcs
    logger.debug(f"{kind.value} tracing over {len(ap_ids)} APs found {len(arcs)} arcs")
    return arcs


def symmetric_edges(trajectories, cfg: ContactConfig, method: str = 'indexed', threads: int = 1) -> Set[Arc]:
    """Both arcs of every pair co-located at one AP for at least d_sym seconds"""
    return _trace(trajectories, cfg, TraceKind.SYMMETRIC, method, threads)


def asymmetric_edges(trajectories, cfg: ContactConfig, method: str = 'indexed', threads: int = 1) -> Set[Arc]:
    """
    Directed environmental arcs

    A source visit q that lasts at least d_env contaminates the AP from
    t_q + d_env until it leaves; anyone present at that AP for at least
    d_asym seconds of that window gets an arc q -> p.
    """
    return _trace(trajectories, cfg, TraceKind.ASYMMETRIC, method, threads)


def merge_graphs(sym: ContactGraph, asym: ContactGraph) -> ContactGraph:
    arcs: Dict[Arc, Set[TraceKind]] = defaultdict(set)
    for graph in (sym, asym):
        for arc, kinds in graph.arcs.items():
            arcs[arc] |= kinds
    merged = ContactGraph(set(sym.vertices) | set(asym.vertices), arcs, GraphMode.HYBRID)
    logger.debug(f"Merged {sym.arc_count()} symmetric and {asym.arc_count()} asymmetric arcs into {merged.arc_count()}")
    return merged


def build_graph(trajectories, cfg: ContactConfig, mode: GraphMode = GraphMode.HYBRID,
                population: Optional[Iterable[str]] = None, method: str = 'indexed',
                threads: int = 1) -> ContactGraph:
    """
    Build the contact graph of the requested mode

    Args:
        trajectories: person_id -> Trajectory (or an iterable of Trajectory)
        cfg: contact thresholds
        mode: symmetric, asymmetric or hybrid
        population: extra person ids added as isolated vertices so N stays fixed
        method: 'indexed' per-AP interval index or 'bruteforce' all-pairs scan
        threads: joblib workers for the per-AP joins

    Returns:
        ContactGraph over every traced person plus the population
    """
    trajectories = _as_trajectories(trajectories)
    vertices = {trajectory.person_id for trajectory in trajectories} | set(population or ())
    mode = GraphMode(mode)

    sym = asym = None
    if mode in (GraphMode.SYMMETRIC, GraphMode.HYBRID):
        arcs = symmetric_edges(trajectories, cfg, method=method, threads=threads)
        sym = ContactGraph(vertices, {arc: frozenset([TraceKind.SYMMETRIC]) for arc in arcs}, GraphMode.SYMMETRIC)
    if mode in (GraphMode.ASYMMETRIC, GraphMode.HYBRID):
        arcs = asymmetric_edges(trajectories, cfg, method=method, threads=threads)
        asym = ContactGraph(vertices, {arc: frozenset([TraceKind.ASYMMETRIC]) for arc in arcs}, GraphMode.ASYMMETRIC)

    graph = merge_graphs(sym, asym) if mode == GraphMode.HYBRID else (sym or asym)
    logger.info(f"Built {mode.value} graph: N={graph.n}, {graph.arc_count()} arcs")
    return graph


def _kind_text(kinds: FrozenSet[TraceKind]) -> str:
    order = [TraceKind.SYMMETRIC, TraceKind.ASYMMETRIC]
    return KIND_SEPARATOR.join(kind.value for kind in order if kind in kinds)


def write_graph(graph: ContactGraph, out_dir, writer: Optional[ArtifactWriter] = None) -> Path:
    """Write edges.csv (src,dst,kind), vertices.csv and summary.json into out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = writer or ArtifactWriter()

    edges = pd.DataFrame(
        [(src, dst, _kind_text(kinds)) for (src, dst), kinds in graph.arcs.items()],
        columns=['src', 'dst', 'kind']
    )
    vertices = pd.DataFrame({'person_id': list(graph.vertices)})
    writer.write_frame(edges, out_dir / 'edges.csv', stage='graph')
    writer.write_frame(vertices, out_dir / 'vertices.csv', stage='graph')
    writer.write_json(graph.summary(), out_dir / 'summary.json', stage='graph')
    logger.info(f"Wrote {graph.mode.value} graph to {out_dir}")
    return out_dir


def read_graph(path) -> ContactGraph:
    """Load a graph directory written by write_graph (or the path of its edges.csv)"""
    path = Path(path)
    graph_dir = path.parent if path.suffix == '.csv' else path
    try:
        edges = pd.read_csv(graph_dir / 'edges.csv', dtype=str, keep_default_na=False)
        vertices = pd.read_csv(graph_dir / 'vertices.csv', dtype=str, keep_default_na=False)
    except OSError as e:
        raise LogFileError(f"cannot read graph from {graph_dir}: {e}") from e

    arcs: Dict[Arc, FrozenSet[TraceKind]] = {}
    for row in edges.itertuples(index=False):
        kinds = frozenset(TraceKind(value) for value in row.kind.split(KIND_SEPARATOR))
        arcs[(row.src, row.dst)] = arcs.get((row.src, row.dst), frozenset()) | kinds

    summary_path = graph_dir / 'summary.json'
    if summary_path.exists():
        mode = GraphMode(json.loads(summary_path.read_text(encoding='utf-8'))['mode'])
    else:
        all_kinds = set().union(*arcs.values()) if arcs else set()
        if all_kinds == {TraceKind.SYMMETRIC}:
            mode = GraphMode.SYMMETRIC
        elif all_kinds == {TraceKind.ASYMMETRIC}:
            mode = GraphMode.ASYMMETRIC
        else:
            mode = GraphMode.HYBRID

    graph = ContactGraph(vertices['person_id'], arcs, mode)
    logger.info(f"Loaded {graph!r} from {graph_dir}")
    return graph
