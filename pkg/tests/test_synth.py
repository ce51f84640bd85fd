import json

import pytest

from wlantrace.core.errors import ConfigError
from wlantrace.core.models import CampusSpec, ContactConfig, GraphMode, Measure, SpreaderProfile, TraceKind
from wlantrace.services.centrality_service import centrality
from wlantrace.services.contact_service import build_graph
from wlantrace.services.synth_service import build_campus, expected_counts, load_campus_spec, planted_ids
from wlantrace.services.trajectory_service import TrajectoryStore, WalkTimeMatrix
from wlantrace.services.wlan_log_service import ApDirectory, IngestStats, parse_log_file, validate_and_filter


def _store(files):
    directory = ApDirectory.from_csv(files.directory)
    walk = WalkTimeMatrix.from_csv(files.walk)
    stats = IngestStats()
    events = list(validate_and_filter(parse_log_file(files.log, stats=stats), directory, stats=stats))
    return TrajectoryStore.from_entries(events, directory, walk), stats


def test_same_seed_same_log(small_spec):
    assert build_campus(small_spec).lines == build_campus(small_spec).lines


def test_different_seed_different_log(small_spec):
    other = small_spec.model_copy(update={'seed': small_spec.seed + 1})
    assert build_campus(small_spec).lines != build_campus(other).lines


def test_no_planted_spreaders():
    spec = CampusSpec(n_students=30, n_buildings=2, aps_per_building=4, hub_spreaders=0, env_spreaders=0, weeks=1)
    campus = build_campus(spec)
    assert campus.manifest['spreaders'] == []
    assert campus.lines


def test_spec_rejects_too_many_spreaders():
    with pytest.raises(ValueError):
        CampusSpec(n_students=5, hub_spreaders=3, env_spreaders=3)


def test_spec_file_and_overrides(tmp_path):
    path = tmp_path / 'campus.env'
    path.write_text("N_STUDENTS=50\nWEEKS=3\nCOLOUR=blue\n")
    spec = load_campus_spec(path, overrides={'weeks': 1, 'seed': None})
    assert spec.n_students == 50
    assert spec.weeks == 1
    assert spec.seed == CampusSpec().seed
    with pytest.raises(ConfigError):
        load_campus_spec(tmp_path / 'missing.env')
    with pytest.raises(ConfigError):
        load_campus_spec(None, overrides={'n_students': 0})


def test_manifest_written(campus_files, small_spec):
    manifest = json.loads(campus_files.manifest.read_text())
    assert manifest['spec']['n_students'] == small_spec.n_students
    assert len(planted_ids(manifest)) == small_spec.planted
    assert len(planted_ids(manifest, SpreaderProfile.HUB)) == small_spec.hub_spreaders
    assert len(planted_ids(manifest, SpreaderProfile.ENVIRONMENTAL)) == small_spec.env_spreaders
    assert manifest['log_lines'] == len(campus_files.log.read_text().splitlines())


def test_round_trip_recovers_tracklet_counts(campus_files):
    store, stats = _store(campus_files)
    assert stats.accepted + stats.dropped == stats.lines
    expected = expected_counts(json.loads(campus_files.manifest.read_text()))
    trajectories = store.trajectories()
    for student_id, count in expected.items():
        found = len(trajectories[student_id].tracklets) if student_id in trajectories else 0
        assert abs(found - count) <= 1, student_id


def test_hub_spreaders_lead_symmetric_degree(campus_files, small_spec):
    store, _ = _store(campus_files)
    graph = build_graph(store.trajectories(), ContactConfig(), GraphMode.SYMMETRIC, population=store.persons)
    hubs = planted_ids(campus_files.campus.manifest, SpreaderProfile.HUB)
    leaders = centrality(graph, Measure.DEGREE).ranking[:2 * len(hubs)]
    assert set(hubs) <= set(leaders)


def test_environmental_spreaders_need_asymmetric_tracing(campus_files):
    store, _ = _store(campus_files)
    hybrid = build_graph(store.trajectories(), ContactConfig(), GraphMode.HYBRID, population=store.persons)
    for spreader in planted_ids(campus_files.campus.manifest, SpreaderProfile.ENVIRONMENTAL):
        asymmetric_only = [
            dst for (src, dst), kinds in hybrid.arcs.items()
            if src == spreader and kinds == frozenset([TraceKind.ASYMMETRIC])
        ]
        assert asymmetric_only, spreader


def test_noise_lines_are_all_dropped(campus_files, small_spec):
    manifest = json.loads(campus_files.manifest.read_text())
    directory = ApDirectory.from_csv(campus_files.directory)
    stats = IngestStats()
    parsed = parse_log_file(campus_files.log, ssid_filter=[small_spec.ssid], stats=stats)
    kept = list(validate_and_filter(parsed, directory, stats=stats))
    assert stats.lines == manifest['log_lines']
    assert stats.dropped == manifest['noise_lines']
    assert len(kept) == manifest['log_lines'] - manifest['noise_lines']


@pytest.mark.slow
@pytest.mark.parametrize('measure', list(Measure))
def test_planted_spreaders_lead_weekly_hybrid_ranking(full_campus, measure):
    planted = planted_ids(full_campus.manifest)
    leaders = set(centrality(full_campus.hybrid_week, measure, threads=4).ranking[:2 * len(planted)])
    assert len(leaders & set(planted)) >= 0.8 * len(planted)


@pytest.mark.slow
@pytest.mark.parametrize('measure', list(Measure))
def test_environmental_spreader_found_only_by_hybrid(full_campus, measure):
    k = full_campus.run_config.k_for(full_campus.hybrid.n)
    hybrid_top = set(centrality(full_campus.hybrid, measure, threads=4).ranking[:k])
    symmetric_top = set(centrality(full_campus.sym, measure, threads=4).ranking[:k])
    env_spreaders = planted_ids(full_campus.manifest, SpreaderProfile.ENVIRONMENTAL)
    assert [person for person in env_spreaders if person in hybrid_top and person not in symmetric_top]
