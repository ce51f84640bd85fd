import json
from types import SimpleNamespace

import pytest
from click.testing import CliRunner

from wlantrace import create_app
from wlantrace.core.models import CampusSpec, GraphMode
from wlantrace.core.settings import RunConfig
from wlantrace.services.contact_service import build_graph
from wlantrace.services.synth_service import generate
from wlantrace.services.trajectory_service import TrajectoryStore, WalkTimeMatrix, make_window
from wlantrace.services.wlan_log_service import ApDirectory, parse_log_file, validate_and_filter

# 2015-03-02 00:00 UTC, a Monday
MONDAY = 1425254400

SMALL_CAMPUS = dict(
    n_students=120,
    n_buildings=3,
    aps_per_building=6,
    hub_spreaders=2,
    env_spreaders=2,
    weeks=1,
    seed=11,
)


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run full-size campus tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def app():
    app = create_app('testing')
    return app


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_spec():
    return CampusSpec(**SMALL_CAMPUS)


@pytest.fixture
def campus_files(tmp_path, small_spec):
    """A generated small campus on disk"""
    log_path = tmp_path / 'campus' / 'campus.log'
    manifest_path = tmp_path / 'campus' / 'manifest.json'
    campus = generate(small_spec, log_path, manifest_path)
    return SimpleNamespace(
        campus=campus,
        log=log_path,
        manifest=manifest_path,
        directory=log_path.with_name('ap_directory.csv'),
        walk=log_path.with_name('walk_matrix.csv'),
    )


@pytest.fixture
def quick_params(tmp_path):
    """Config file that keeps CLI runs short"""
    path = tmp_path / 'quick.env'
    path.write_text(
        "RUNS=3\n"
        "MAX_DAYS=30\n"
        "SWEEP_STEP=25\n"
        "STABILITY_WEEKS=1\n"
        "WEEKLY_TABLE=false\n",
        encoding='utf-8'
    )
    return path


@pytest.fixture(scope='session')
def full_campus(tmp_path_factory):
    """Default-size campus with its first-day and first-week graphs, built once per session"""
    out = tmp_path_factory.mktemp('full_campus')
    spec = CampusSpec()
    generate(spec, out / 'campus.log', out / 'manifest.json')
    manifest = json.loads((out / 'manifest.json').read_text(encoding='utf-8'))

    run_config = RunConfig(threads=4)
    directory = ApDirectory.from_csv(out / 'ap_directory.csv')
    walk = WalkTimeMatrix.from_csv(out / 'walk_matrix.csv')
    events = list(validate_and_filter(parse_log_file(out / 'campus.log'), directory))
    store = TrajectoryStore.from_entries(events, directory, walk)

    cfg = run_config.contact_config()
    graphs = {}
    for label, n_days in (('day', 1), ('week', 7)):
        trajectories = store.trajectories(make_window(store.first_day, n_days))
        for mode in (GraphMode.SYMMETRIC, GraphMode.HYBRID):
            graphs[label, mode] = build_graph(trajectories, cfg, mode, population=store.persons,
                                              threads=run_config.threads)

    return SimpleNamespace(
        spec=spec,
        manifest=manifest,
        run_config=run_config,
        sym=graphs['day', GraphMode.SYMMETRIC],
        hybrid=graphs['day', GraphMode.HYBRID],
        sym_week=graphs['week', GraphMode.SYMMETRIC],
        hybrid_week=graphs['week', GraphMode.HYBRID],
    )
