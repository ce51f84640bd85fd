"""
Synthetic campus generator

Produces WLAN association logs for a campus whose students follow a weekly
class timetable, plus planted superspreaders:

- hub spreaders stay at a hotspot AP all day and share 20 minute visits with
  passing students (found by symmetric tracing)
- environmental spreaders stay at a hotspot AP all day but visitors only
  stay 10 minutes, so the contact is only found by asymmetric tracing

Every campus visit ends with a trip to the student's own residence AP, which
makes arrival-to-arrival stay estimation recover the scheduled visit lengths.
"""

import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from dotenv import dotenv_values
from pydantic import ValidationError

from wlantrace.core.artifacts import dumps
from wlantrace.core.errors import ConfigError
from wlantrace.core.models import CampusSpec, SpreaderProfile
from wlantrace.core.seeding import derive_seed, make_rng
from wlantrace.services.trajectory_service import WalkTimeMatrix, midnight
from wlantrace.services.wlan_log_service import ApDirectory

logger = logging.getLogger(__name__)

PROCESS = 'authmgr'
ROLE = 'student'

# Timetable, seconds after local midnight
FIRST_CLASS = 8 * 3600
SLOT_SPACING = 2 * 3600
SLOTS_PER_DAY = 5
CLASS_LENGTH = 90 * 60
MAX_ARRIVAL_JITTER = 300

HOTSPOT_OPEN = 11 * 3600
HOTSPOT_LAST_SLOT = 17 * 3600
VISIT_SPACING = 6 * 60
HUB_VISIT = 20 * 60
ENV_VISIT = 10 * 60
SPREADER_LEAVES = 17 * 3600 + 45 * 60
CLASS_BUFFER = 30 * 60

REASSOC_MIN, REASSOC_MAX = 15 * 60, 25 * 60
WALK_MIN, WALK_MAX = 120, 600
HOME_APS_PER_RESIDENCE = 250


@dataclass
class Visit:
    start: int
    end: int
    ap_name: str
    kind: str
    then_home: bool = True


@dataclass
class Campus:
    spec: CampusSpec
    directory: ApDirectory
    walk: WalkTimeMatrix
    lines: List[str]
    manifest: Dict[str, object] = field(default_factory=dict)


def load_campus_spec(path=None, overrides: Optional[Dict[str, object]] = None) -> CampusSpec:
    """Read a dotenv style campus spec file; missing keys keep their defaults"""
    values: Dict[str, object] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"campus spec file not found: {path}")
        for key, raw in dotenv_values(path).items():
            name = key.lower()
            if name not in CampusSpec.model_fields:
                logger.warning(f"Ignoring unknown campus spec key {key} in {path}")
                continue
            if raw not in (None, ''):
                values[name] = raw
    values.update({name: value for name, value in (overrides or {}).items() if value is not None})
    try:
        return CampusSpec(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(map(str, err['loc'])) or 'spec'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid campus spec field {problems}") from e


def _mac(index: int) -> str:
    return "02:00:" + ":".join(f"{(index >> shift) & 0xFF:02x}" for shift in (24, 16, 8, 0))


def _layout(spec: CampusSpec, rng):
    campus_aps = [
        (f"AP-B{b + 1:02d}-{a + 1:02d}", f"B{b + 1:02d}")
        for b in range(spec.n_buildings) for a in range(spec.aps_per_building)
    ]
    home_aps = [
        (f"AP-R{i // HOME_APS_PER_RESIDENCE + 1:02d}-{i % HOME_APS_PER_RESIDENCE + 1:03d}",
         f"R{i // HOME_APS_PER_RESIDENCE + 1:02d}")
        for i in range(spec.n_students)
    ]
    directory = ApDirectory(campus_aps + home_aps)

    buildings = sorted({building for _, building in campus_aps + home_aps})
    walk_entries = {}
    for position, first in enumerate(buildings):
        for second in buildings[position + 1:]:
            walk_entries[(first, second)] = int(rng.integers(WALK_MIN, WALK_MAX + 1))
    return campus_aps, home_aps, directory, WalkTimeMatrix(walk_entries)


def _weekdays(spec: CampusSpec) -> List[date]:
    first = date.fromisoformat(spec.start_date)
    days = [first + timedelta(days=offset) for offset in range(7 * spec.weeks)]
    return [day for day in days if day.weekday() < 5]


def _class_clashes(visit_start: int, visit_end: int, class_start: Optional[int]) -> bool:
    if class_start is None:
        return False
    class_end = class_start + CLASS_LENGTH
    return not (visit_end + CLASS_BUFFER <= class_start or visit_start >= class_end + CLASS_BUFFER)


def build_campus(spec: CampusSpec) -> Campus:
    """Generate the campus layout, timetable, log lines and manifest in memory"""
    rng = make_rng(spec.seed)
    campus_aps, home_aps, directory, walk = _layout(spec, rng)
    building = dict(campus_aps + home_aps)

    width = max(4, len(str(spec.n_students)))
    students = [f"s{index + 1:0{width}d}" for index in range(spec.n_students)]

    # Planted spreaders: the first hub_spreaders draws are hubs, the rest environmental
    drawn = [int(i) for i in rng.choice(spec.n_students, size=spec.planted, replace=False)]
    hotspot_positions = [int(i) for i in rng.choice(len(campus_aps), size=spec.planted, replace=False)]
    profile_of: Dict[int, SpreaderProfile] = {}
    hotspot_of: Dict[int, str] = {}
    for order, student in enumerate(drawn):
        profile_of[student] = SpreaderProfile.HUB if order < spec.hub_spreaders else SpreaderProfile.ENVIRONMENTAL
        hotspot_of[student] = campus_aps[hotspot_positions[order]][0]
    hotspots = [hotspot_of[student] for student in drawn]
    hotspot_profile = {hotspot_of[student]: profile_of[student] for student in drawn}
    hotspot_set = set(hotspot_positions)
    classrooms = [ap for position, (ap, _) in enumerate(campus_aps) if position not in hotspot_set]

    # Weekly timetable: (weekday, slot) per course, one class per student per day
    courses: Dict[int, Dict[int, int]] = {}
    for student in range(spec.n_students):
        if student in profile_of:
            courses[student] = {weekday: 0 for weekday in range(5)}
            continue
        count = int(rng.integers(3, 6))
        weekdays = sorted(int(day) for day in rng.choice(5, size=count, replace=False))
        slots = rng.integers(0, SLOTS_PER_DAY, size=count)
        courses[student] = {weekday: int(slot) for weekday, slot in zip(weekdays, slots)}

    groups: Dict[Tuple[int, int], List[int]] = {}
    for student in range(spec.n_students):
        for weekday, slot in courses[student].items():
            groups.setdefault((weekday, slot), []).append(student)
    classroom_of: Dict[Tuple[int, int], str] = {}
    counter = 0
    for key in sorted(groups):
        members = groups[key]
        for start in range(0, len(members), spec.class_size):
            ap_name = classrooms[counter % len(classrooms)]
            counter += 1
            for student in members[start:start + spec.class_size]:
                classroom_of[(student, key[0])] = ap_name

    student_rngs = [make_rng(derive_seed(spec.seed, index + 1)) for index in range(spec.n_students)]
    background = [student for student in range(spec.n_students) if student not in profile_of]
    schedule: Dict[int, List[Tuple[date, Visit]]] = {student: [] for student in range(spec.n_students)}

    for day in _weekdays(spec):
        day_start = midnight(day, spec.timezone)
        weekday = day.weekday()
        class_start_of: Dict[int, int] = {}

        for student in range(spec.n_students):
            slot = courses[student].get(weekday)
            if slot is None:
                continue
            nominal = day_start + FIRST_CLASS + SLOT_SPACING * slot
            class_start_of[student] = nominal
            jitter = int(student_rngs[student].integers(0, MAX_ARRIVAL_JITTER + 1))
            ap_name = classroom_of[(student, weekday)]
            visit = Visit(nominal + jitter, nominal + CLASS_LENGTH, ap_name, 'class')
            if student in profile_of:
                visit.then_home = False
                shift_start = visit.end + walk.walk(building[ap_name], building[hotspot_of[student]])
                schedule[student].append((day, visit))
                schedule[student].append(
                    (day, Visit(shift_start, day_start + SPREADER_LEAVES, hotspot_of[student], 'hotspot'))
                )
            else:
                schedule[student].append((day, visit))

        if not hotspots:
            continue
        taken = {ap_name: set() for ap_name in hotspots}
        visit_slots = (HOTSPOT_LAST_SLOT - HOTSPOT_OPEN) // VISIT_SPACING
        for position in rng.permutation(len(background)):
            student = background[int(position)]
            if rng.random() >= spec.hotspot_visit_prob:
                continue
            hotspot = hotspots[int(rng.integers(len(hotspots)))]
            length = HUB_VISIT if hotspot_profile[hotspot] == SpreaderProfile.HUB else ENV_VISIT
            allowed = [
                slot for slot in range(visit_slots)
                if slot not in taken[hotspot] and not _class_clashes(
                    day_start + HOTSPOT_OPEN + VISIT_SPACING * slot,
                    day_start + HOTSPOT_OPEN + VISIT_SPACING * slot + length,
                    class_start_of.get(student)
                )
            ]
            if not allowed:
                continue
            slot = allowed[int(rng.integers(len(allowed)))]
            taken[hotspot].add(slot)
            start = day_start + HOTSPOT_OPEN + VISIT_SPACING * slot
            schedule[student].append((day, Visit(start, start + length, hotspot, 'hotspot')))

    lines: List[Tuple[int, str]] = []
    noise_lines = 0
    manifest_students = {}
    manifest_schedule = {}
    for student, student_id in enumerate(students):
        student_rng = student_rngs[student]
        home_ap, home_building = home_aps[student]
        mac = _mac(student)
        visits = sorted(schedule[student], key=lambda item: item[1].start)
        expected = 0
        events: List[Tuple[int, str]] = []
        for _, visit in visits:
            events.append((visit.start, visit.ap_name))
            moment = visit.start + int(student_rng.integers(REASSOC_MIN, REASSOC_MAX + 1))
            while moment < visit.end:
                events.append((moment, visit.ap_name))
                moment += int(student_rng.integers(REASSOC_MIN, REASSOC_MAX + 1))
            expected += 1
            if visit.then_home:
                events.append((visit.end + walk.walk(building[visit.ap_name], home_building), home_ap))
                expected += 1

        for timestamp, ap_name in events:
            line = f"{timestamp},{PROCESS},{ap_name},{student_id},{ROLE},{mac},{spec.ssid},success"
            lines.append((timestamp, line))
            if student_rng.random() < spec.noise_rate:
                noise_lines += 1
                kind = int(student_rng.integers(3))
                if kind == 0:
                    noisy = f"{timestamp},{PROCESS},{ap_name},{student_id},{ROLE},{mac},{spec.open_ssid},success"
                elif kind == 1:
                    other_ap = campus_aps[int(student_rng.integers(len(campus_aps)))][0]
                    noisy = f"{timestamp},{PROCESS},{other_ap},{student_id},{ROLE},{mac},{spec.ssid},failure"
                else:
                    noisy = ",".join(line.split(',')[:5])
                lines.append((timestamp, noisy))

        manifest_students[student_id] = {
            'home_ap': home_ap,
            'courses': [
                {'weekday': weekday, 'slot': slot, 'ap': classroom_of[(student, weekday)]}
                for weekday, slot in sorted(courses[student].items())
            ],
            'expected_tracklets': expected,
        }
        manifest_schedule[student_id] = [
            {'day': day.isoformat(), 'ap': visit.ap_name, 'start': visit.start, 'end': visit.end, 'kind': visit.kind}
            for day, visit in visits
        ]

    lines.sort()
    manifest = {
        'spec': spec.model_dump(mode='json'),
        'spreaders': sorted(
            ({'id': students[student], 'profile': profile_of[student].value, 'hotspot': hotspot_of[student]}
             for student in drawn),
            key=lambda item: item['id']
        ),
        'students': manifest_students,
        'schedule': manifest_schedule,
        'log_lines': len(lines),
        'noise_lines': noise_lines,
    }
    logger.info(
        f"Generated campus: {spec.n_students} students, {len(directory)} APs, "
        f"{spec.planted} planted spreaders, {len(lines)} log lines ({noise_lines} noise)"
    )
    return Campus(spec=spec, directory=directory, walk=walk, lines=[line for _, line in lines], manifest=manifest)


def generate(spec: CampusSpec, out_log, manifest_path, ap_directory_path=None, walk_path=None) -> Campus:
    """
    Write a synthetic campus to disk

    Args:
        spec: campus description
        out_log: raw log file in the association log format
        manifest_path: JSON ground truth (spreaders, courses, schedule, expected tracklets)
        ap_directory_path: AP directory CSV; defaults to ap_directory.csv next to the log
        walk_path: walking-time matrix CSV; defaults to walk_matrix.csv next to the log

    Returns:
        The generated Campus
    """
    campus = build_campus(spec)
    out_log = Path(out_log)
    out_log.parent.mkdir(parents=True, exist_ok=True)
    out_log.write_text("\n".join(campus.lines) + "\n", encoding='utf-8')

    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(dumps(campus.manifest) + "\n", encoding='utf-8')

    campus.directory.to_csv(ap_directory_path or out_log.with_name('ap_directory.csv'))
    campus.walk.to_csv(walk_path or out_log.with_name('walk_matrix.csv'))
    logger.info(f"✅ Wrote synthetic campus log to {out_log}")
    return campus


def planted_ids(manifest: Dict[str, object], profile: Optional[SpreaderProfile] = None) -> List[str]:
    return [
        spreader['id'] for spreader in manifest['spreaders']
        if profile is None or spreader['profile'] == SpreaderProfile(profile).value
    ]


def expected_counts(manifest: Dict[str, object]) -> Dict[str, int]:
    return {student_id: info['expected_tracklets'] for student_id, info in manifest['students'].items()}

