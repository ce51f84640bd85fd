import pytest

from tests.conftest import MONDAY
from wlantrace.core.errors import InsufficientDataError
from wlantrace.core.models import ContactConfig, GraphMode, Measure, RankedList, TraceKind, Tracklet
from wlantrace.services.analysis_service import (
    accumulated_week_matrix, cross_measure_matrix, rbo, similarity_matrix, write_matrix
)
from wlantrace.services.contact_service import ContactGraph
from wlantrace.services.trajectory_service import TrajectoryStore, local_date

CFG = ContactConfig()


def test_identical_lists_score_one():
    for p in (0.1, 0.5, 0.9, 0.99):
        assert rbo(['a', 'b', 'c'], ['a', 'b', 'c'], p) == 1.0


def test_disjoint_lists_score_zero():
    assert rbo(['a', 'b', 'c'], ['x', 'y', 'z'], 0.9) == 0.0


def test_swapped_pair():
    assert rbo(['x', 'y'], ['y', 'x'], 0.9) == pytest.approx(0.9, abs=1e-12)


def test_rbo_is_symmetric_and_bounded():
    a = ['a', 'b', 'c', 'd', 'e']
    b = ['c', 'a', 'f', 'e', 'g']
    score = rbo(a, b, 0.8)
    assert 0.0 <= score <= 1.0
    assert score == rbo(b, a, 0.8)


def test_head_agreement_outweighs_tail():
    base = ['a', 'b', 'c', 'd']
    head_swap = ['b', 'a', 'c', 'd']
    tail_swap = ['a', 'b', 'd', 'c']
    assert rbo(base, tail_swap, 0.9) > rbo(base, head_swap, 0.9)


@pytest.mark.parametrize('p', [0.0, 1.0, -0.5, 1.5])
def test_persistence_outside_open_interval_rejected(p):
    with pytest.raises(ValueError):
        rbo(['a'], ['a'], p)


def test_empty_list_rejected():
    with pytest.raises(ValueError):
        rbo([], ['a'])


def test_ranked_list_rejects_duplicates():
    with pytest.raises(ValueError):
        RankedList(ids=['a', 'a'])


def test_similarity_matrix_shape():
    lists = [
        RankedList(ids=['a', 'b', 'c'], label='one'),
        RankedList(ids=['b', 'a', 'c'], label='two'),
        RankedList(ids=['c', 'd', 'e'], label='three'),
    ]
    matrix = similarity_matrix(lists, 0.9)
    assert matrix.labels == ['one', 'two', 'three']
    for i in range(3):
        assert matrix.values[i][i] == 1.0
        for j in range(3):
            assert matrix.values[i][j] == matrix.values[j][i]


def _weekly_store(weeks):
    """Person 'hub' meets a..e every weekday; 'x' meets 'y' once a week"""
    days = {}
    for week in range(weeks):
        for weekday in range(5):
            start = MONDAY + (7 * week + weekday) * 86400 + 9 * 3600
            people = {'hub': (Tracklet(1, start, 7200),)}
            for offset, person in enumerate(['a', 'b', 'c', 'd', 'e']):
                people[person] = (Tracklet(1, start + 600 * offset, 1800),)
            if weekday == 0:
                people['x'] = (Tracklet(2, start, 3600),)
                people['y'] = (Tracklet(2, start, 3600),)
            days[local_date(start, 'UTC')] = people
    return TrajectoryStore(days)


def test_single_week_matrix():
    matrix = accumulated_week_matrix(_weekly_store(1), 1, Measure.DEGREE, k=3, cfg=CFG)
    assert matrix.values == [[1.0]]
    assert matrix.labels == ['week 1']


def test_stationary_schedule_is_stable(tmp_path):
    matrix = accumulated_week_matrix(_weekly_store(3), 3, Measure.DEGREE, k=3, cfg=CFG)
    assert matrix.labels == ['week 1', 'weeks 1-2', 'weeks 1-3']
    for row in matrix.values:
        assert row == [1.0, 1.0, 1.0]
    write_matrix(matrix, tmp_path / 'stability.csv')
    assert (tmp_path / 'stability.csv').read_text().splitlines()[0] == 'window,week 1,weeks 1-2,weeks 1-3'


def test_short_store_names_shortfall():
    with pytest.raises(InsufficientDataError, match='short by 2 weeks'):
        accumulated_week_matrix(_weekly_store(1), 3, Measure.DEGREE, k=3, cfg=CFG)


def test_cross_measure_matrix_labels():
    arcs = {(a, b): frozenset([TraceKind.SYMMETRIC]) for a, b in [('a', 'b'), ('b', 'c'), ('c', 'a'), ('a', 'd')]}
    matrix = cross_measure_matrix(ContactGraph([], arcs, GraphMode.HYBRID), k=2)
    assert matrix.labels == [measure.value for measure in Measure]
    assert [matrix.values[i][i] for i in range(3)] == [1.0, 1.0, 1.0]
