"""
Stochastic discrete-time SEIR on a contact graph

Each day, synchronously: a susceptible person with k infectious in-neighbours
is exposed with probability 1 - (1 - beta)^k, exposed people become
infectious with probability sigma, infectious people recover with probability
gamma. Quarantined people sit in Q for the whole run and never interact.
"""

import logging
from pathlib import Path
from typing import Callable, Collection, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from wlantrace.core.artifacts import ArtifactWriter
from wlantrace.core.models import EnsembleResult, EpidemicMetrics, SeirParams, SeirTrace
from wlantrace.core.seeding import derive_seed, make_rng
from wlantrace.services.contact_service import ContactGraph

logger = logging.getLogger(__name__)

SUSCEPTIBLE, EXPOSED, INFECTIOUS, RECOVERED, QUARANTINED = range(5)
COMPARTMENTS = ['S', 'E', 'I', 'R', 'Q']
TRACE_COLUMNS = ['day'] + COMPARTMENTS + ['cumulative_infected']
METRIC_NAMES = ['doubling_time', 'total_infected_fraction', 'peak_infected_time', 'peak_infected_fraction']

# A fixed person set, or a callable run_index -> person set for per-run redraws
PersonSource = Union[None, Collection[str], Callable[[int], Collection[str]]]


class Network(NamedTuple):
    """Arc arrays of a contact graph, indexed by position in the sorted vertex tuple"""
    vertices: Tuple[str, ...]
    index: Dict[str, int]
    src: np.ndarray
    dst: np.ndarray

    @classmethod
    def from_graph(cls, graph: ContactGraph) -> 'Network':
        index = {person: position for position, person in enumerate(graph.vertices)}
        arcs = list(graph.arcs)
        src = np.fromiter((index[s] for s, _ in arcs), dtype=np.int64, count=len(arcs))
        dst = np.fromiter((index[d] for _, d in arcs), dtype=np.int64, count=len(arcs))
        return cls(graph.vertices, index, src, dst)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def positions(self, persons: Collection[str], what: str) -> np.ndarray:
        unknown = [person for person in persons if person not in self.index]
        if unknown:
            raise ValueError(f"{what} contains {len(unknown)} persons not in the graph (e.g. {sorted(unknown)[0]})")
        return np.array(sorted(self.index[person] for person in persons), dtype=np.int64)


class _Run(NamedTuple):
    counts: np.ndarray          # (days + 1, 5)
    cumulative: np.ndarray      # (days + 1,)
    exposures: Optional[List[Tuple[int, str, Tuple[str, ...]]]]


def _simulate(network: Network, params: SeirParams, quarantine: Collection[str], rng_seed: int,
              seeds: Optional[Collection[str]] = None, record_exposures: bool = False) -> _Run:
    n = network.n
    state = np.full(n, SUSCEPTIBLE, dtype=np.int8)
    state[network.positions(quarantine, 'quarantine set')] = QUARANTINED
    rng = make_rng(rng_seed)

    if seeds is not None:
        seed_positions = network.positions(seeds, 'initial infected set')
        if np.any(state[seed_positions] == QUARANTINED):
            raise ValueError("initial infected set overlaps the quarantine set")
    else:
        # One permutation of everyone, so growing the quarantine set keeps the other seeds
        order = rng.permutation(n)
        available = order[state[order] == SUSCEPTIBLE]
        if params.initial_infected > available.size:
            raise ValueError(
                f"initial_infected ({params.initial_infected}) exceeds the "
                f"non-quarantined population ({available.size})"
            )
        seed_positions = available[:params.initial_infected]
    state[seed_positions] = INFECTIOUS
    ever_infected = state == INFECTIOUS

    in_arcs = None
    exposures = [] if record_exposures else None
    if record_exposures:
        order = np.argsort(network.dst, kind='stable')
        in_arcs = (network.dst[order], network.src[order])

    exposure_prob = 1.0 - params.beta
    counts = [np.bincount(state, minlength=5)]
    cumulative = [int(ever_infected.sum())]

    for day in range(1, params.max_days + 1):
        if counts[-1][EXPOSED] + counts[-1][INFECTIOUS] == 0:
            break
        infectious = state == INFECTIOUS
        pressure = np.bincount(network.dst[infectious[network.src]], minlength=n)

        draw_s = rng.random(n)
        draw_e = rng.random(n)
        draw_i = rng.random(n)

        newly_exposed = (state == SUSCEPTIBLE) & (pressure > 0) & (draw_s < 1.0 - exposure_prob ** pressure)
        newly_infectious = (state == EXPOSED) & (draw_e < params.sigma)
        newly_recovered = (state == INFECTIOUS) & (draw_i < params.gamma)

        if record_exposures:
            for position in np.flatnonzero(newly_exposed):
                low, high = np.searchsorted(in_arcs[0], [position, position + 1])
                sources = in_arcs[1][low:high]
                culprits = tuple(sorted(network.vertices[s] for s in sources[infectious[sources]]))
                exposures.append((day, network.vertices[position], culprits))

        state[newly_exposed] = EXPOSED
        state[newly_infectious] = INFECTIOUS
        state[newly_recovered] = RECOVERED
        ever_infected |= newly_exposed

        counts.append(np.bincount(state, minlength=5))
        cumulative.append(int(ever_infected.sum()))

    # Extinct runs keep their final state until max_days
    while len(counts) < params.max_days + 1:
        counts.append(counts[-1])
        cumulative.append(cumulative[-1])

    return _Run(np.vstack(counts), np.array(cumulative, dtype=np.int64), exposures)


def simulate(graph: ContactGraph, params: SeirParams, quarantine: Collection[str], rng_seed: int,
             seeds: Optional[Collection[str]] = None, record_exposures: bool = False) -> SeirTrace:
    """
    Run one simulation

    Args:
        graph: contact graph; infection travels along arcs src -> dst
        params: SEIR rates, initial_infected and max_days
        quarantine: persons removed before day 0
        rng_seed: seed of this run's random stream
        seeds: explicit initial infected set; drawn uniformly from the
            non-quarantined persons when omitted
        record_exposures: keep (day, person, infectious in-neighbours) for every exposure

    Returns:
        SeirTrace with max_days + 1 daily entries
    """
    run = _simulate(Network.from_graph(graph), params, quarantine, rng_seed, seeds, record_exposures)
    columns = {name: run.counts[:, position].tolist() for position, name in enumerate(COMPARTMENTS)}
    return SeirTrace(**columns, cumulative_infected=run.cumulative.tolist(), exposures=run.exposures)


def _doubling_time(cumulative: np.ndarray, initial_infected: int) -> Optional[float]:
    if initial_infected <= 0:
        return None
    target = 2 * initial_infected
    crossed = np.flatnonzero(cumulative >= target)
    if crossed.size == 0:
        return None
    day = int(crossed[0])
    if day == 0:
        return 0.0
    before, after = cumulative[day - 1], cumulative[day]
    return (day - 1) + (target - before) / (after - before)


def _metrics(infectious: np.ndarray, cumulative: np.ndarray, population: int, initial_infected: int) -> EpidemicMetrics:
    return EpidemicMetrics(
        doubling_time=_doubling_time(cumulative, initial_infected),
        total_infected_fraction=100.0 * float(cumulative[-1]) / population,
        peak_infected_time=float(np.argmax(infectious)),
        peak_infected_fraction=100.0 * float(infectious.max()) / population,
    )


def run_metrics(trace: SeirTrace, population: int, initial_infected: int) -> EpidemicMetrics:
    return _metrics(np.asarray(trace.I), np.asarray(trace.cumulative_infected), population, initial_infected)


def _resolve(source: PersonSource, run_index: int) -> Optional[Collection[str]]:
    if callable(source):
        return source(run_index)
    return source


def _ensemble_run(network: Network, params: SeirParams, quarantine: PersonSource, seeds: PersonSource,
                  run_index: int) -> Tuple[EpidemicMetrics, np.ndarray]:
    run_seeds = _resolve(seeds, run_index)
    run = _simulate(
        network, params,
        quarantine=_resolve(quarantine, run_index) or (),
        rng_seed=derive_seed(params.seed, run_index),
        seeds=run_seeds,
    )
    initial = len(run_seeds) if run_seeds is not None else params.initial_infected
    metrics = _metrics(run.counts[:, INFECTIOUS], run.cumulative, network.n, initial)
    return metrics, np.column_stack([run.counts, run.cumulative])


def ensemble(graph: Union[ContactGraph, Network], params: SeirParams, quarantine: PersonSource = None,
             seeds: PersonSource = None, threads: int = 1) -> EnsembleResult:
    """
    Run params.runs independent simulations and aggregate their metrics

    Run i uses derive_seed(params.seed, i). quarantine and seeds may be fixed
    sets or callables taking the run index, so a baseline can redraw its set
    every run. Runs whose cumulative infections never double are left out of
    the doubling-time mean and counted in undefined_doubling_count.
    """
    network = graph if isinstance(graph, Network) else Network.from_graph(graph)

    if threads > 1 and params.runs > 1:
        results = Parallel(n_jobs=threads)(
            delayed(_ensemble_run)(network, params, quarantine, seeds, index) for index in range(params.runs)
        )
    else:
        results = [_ensemble_run(network, params, quarantine, seeds, index) for index in range(params.runs)]

    metrics = [result[0] for result in results]
    traces = np.stack([result[1] for result in results]).astype(float)

    means, stds = {}, {}
    for name in METRIC_NAMES:
        values = np.array([getattr(m, name) for m in metrics if getattr(m, name) is not None], dtype=float)
        means[name] = float(values.mean()) if values.size else None
        stds[name] = float(values.std()) if values.size else None
    undefined = sum(1 for m in metrics if m.doubling_time is None)

    mean_trace = traces.mean(axis=0)
    result = EnsembleResult(
        mean=EpidemicMetrics(**means),
        std=EpidemicMetrics(**stds),
        runs=params.runs,
        undefined_doubling_count=undefined,
        mean_trace={name: mean_trace[:, position].tolist()
                    for position, name in enumerate(COMPARTMENTS + ['cumulative_infected'])},
    )
    logger.debug(
        f"Ensemble of {params.runs} runs: T-Inf {result.mean.total_infected_fraction:.2f}% "
        f"± {result.std.total_infected_fraction:.2f}"
    )
    return result


def trace_frame(trace: Union[SeirTrace, Dict[str, List[float]]]) -> pd.DataFrame:
    columns = trace.model_dump(exclude={'exposures'}) if isinstance(trace, SeirTrace) else trace
    frame = pd.DataFrame({name: columns[name] for name in COMPARTMENTS + ['cumulative_infected']})
    frame.insert(0, 'day', range(len(frame)))
    return frame


def write_ensemble(result: EnsembleResult, out_dir, writer: Optional[ArtifactWriter] = None,
                   stage: str = 'simulate') -> Path:
    """Write trace.csv (ensemble mean per day) and metrics.json into out_dir"""
    writer = writer or ArtifactWriter()
    out_dir = Path(out_dir)
    writer.write_frame(trace_frame(result.mean_trace), out_dir / 'trace.csv', stage=stage)
    writer.write_json(result.to_export(), out_dir / 'metrics.json', stage=stage)
    return out_dir


def write_exposures(trace: SeirTrace, path, writer: Optional[ArtifactWriter] = None) -> Path:
    """Transmission log: one row per exposure with its infectious in-neighbours"""
    writer = writer or ArtifactWriter()
    rows = [(day, person, ';'.join(sources)) for day, person, sources in (trace.exposures or [])]
    frame = pd.DataFrame(rows, columns=['day', 'person_id', 'infectious_in_neighbours'])
    return writer.write_frame(frame, path, stage='simulate')
