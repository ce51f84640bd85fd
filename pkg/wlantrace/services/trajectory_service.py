"""
Trajectory construction

Turns each person's time-sorted association events into tracklets
(AP, arrival time, stay time). Stays are estimated from the next arrival:
within a building the stay runs until the next arrival, across buildings the
walking time between the two buildings is subtracted. Trajectories are built
per local day; the last tracklet of every day is closed with a capped
terminal stay.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union
from zoneinfo import ZoneInfo

import pandas as pd

from wlantrace.core.errors import LogFileError, InsufficientDataError
from wlantrace.core.models import LogEntry, Tracklet, Trajectory
from wlantrace.services.wlan_log_service import ApDirectory

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ['person_id', 'ap_id', 'arrival_time', 'stay_time']


class WalkTimeMatrix:
    """Symmetric walking seconds between buildings with a fallback default"""

    def __init__(self, entries: Optional[Dict[Tuple[str, str], int]] = None, default_walk: int = 300):
        if default_walk < 0:
            raise ValueError("default_walk must be non-negative")
        self.default_walk = int(default_walk)
        self._entries: Dict[frozenset, int] = {}
        for (building_a, building_b), seconds in (entries or {}).items():
            if seconds < 0:
                raise ValueError(f"negative walking time between {building_a} and {building_b}")
            self._entries[frozenset((building_a, building_b))] = int(seconds)

    @classmethod
    def from_csv(cls, path, default_walk: int = 300) -> 'WalkTimeMatrix':
        try:
            frame = pd.read_csv(path, dtype={'building_a': str, 'building_b': str}, keep_default_na=False)
        except OSError as e:
            raise LogFileError(f"cannot read walking-time matrix {path}: {e}") from e
        entries = {
            (row.building_a, row.building_b): int(row.seconds)
            for row in frame.itertuples(index=False)
        }
        logger.info(f"Loaded {len(entries)} building pairs from {path}")
        return cls(entries, default_walk=default_walk)

    def to_csv(self, path):
        rows = sorted(tuple(sorted(pair)) + (seconds,) for pair, seconds in self._entries.items()
                      if len(pair) == 2)
        frame = pd.DataFrame(rows, columns=['building_a', 'building_b', 'seconds'])
        frame.to_csv(path, index=False, lineterminator='\n')

    def walk(self, building_a: str, building_b: str) -> int:
        if building_a == building_b:
            return 0
        return self._entries.get(frozenset((building_a, building_b)), self.default_walk)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class AnalysisWindow:
    """[start, end) in epoch seconds, aligned to local midnights"""
    start: int
    end: int
    first_day: date
    n_days: int
    label: str

    def contains(self, timestamp: int) -> bool:
        return self.start <= timestamp < self.end

    @property
    def dates(self) -> List[date]:
        return [self.first_day + timedelta(days=offset) for offset in range(self.n_days)]


def midnight(day: date, timezone: str) -> int:
    return int(datetime.combine(day, time(0), tzinfo=ZoneInfo(timezone)).timestamp())


def local_date(timestamp: int, timezone: str) -> date:
    return datetime.fromtimestamp(timestamp, ZoneInfo(timezone)).date()


def make_window(first_day: date, n_days: int, timezone: str = 'UTC', label: Optional[str] = None) -> AnalysisWindow:
    if n_days < 1:
        raise ValueError("a window spans at least one day")
    last_day = first_day + timedelta(days=n_days - 1)
    if label is None:
        label = first_day.isoformat() if n_days == 1 else f"{first_day.isoformat()}/{last_day.isoformat()}"
    return AnalysisWindow(
        start=midnight(first_day, timezone),
        end=midnight(last_day + timedelta(days=1), timezone),
        first_day=first_day,
        n_days=n_days,
        label=label
    )


def parse_window(text: str, timezone: str = 'UTC') -> AnalysisWindow:
    """Parse YYYY-MM-DD or YYYY-MM-DD/YYYY-MM-DD (inclusive end date)"""
    try:
        if '/' in text:
            first_text, last_text = text.split('/', 1)
            first_day = date.fromisoformat(first_text.strip())
            last_day = date.fromisoformat(last_text.strip())
        else:
            first_day = last_day = date.fromisoformat(text.strip())
    except ValueError as e:
        raise ValueError(f"invalid window {text!r}: expected YYYY-MM-DD or YYYY-MM-DD/YYYY-MM-DD") from e
    if last_day < first_day:
        raise ValueError(f"invalid window {text!r}: end date before start date")
    return make_window(first_day, (last_day - first_day).days + 1, timezone)


def terminal_stay(last_event: Union[LogEntry, int], cutoff: int, max_terminal_stay: int) -> int:
    """Stay credited to the final open-ended tracklet of a day"""
    last_timestamp = last_event.timestamp if isinstance(last_event, LogEntry) else int(last_event)
    if cutoff < last_timestamp:
        raise ValueError(f"cutoff {cutoff} precedes the last event at {last_timestamp}")
    return min(cutoff - last_timestamp, max_terminal_stay)


def _day_tracklets(events: List[Tuple[int, int]], directory: ApDirectory, walk: WalkTimeMatrix,
                   session_timeout: int, cutoff: int, max_terminal_stay: int) -> List[Tracklet]:
    tracklets = []
    current_ap, arrival, last_seen = events[0][1], events[0][0], events[0][0]

    for timestamp, ap_id in events[1:]:
        if ap_id == current_ap and timestamp - last_seen <= session_timeout:
            last_seen = timestamp
            continue
        building_here = directory.building_of(current_ap)
        building_next = directory.building_of(ap_id)
        walking = walk.walk(building_here, building_next)
        stay = max(0, timestamp - arrival - walking)
        tracklets.append(Tracklet(current_ap, arrival, stay))
        current_ap, arrival, last_seen = ap_id, timestamp, timestamp

    stay = (last_seen - arrival) + terminal_stay(last_seen, cutoff, max_terminal_stay)
    tracklets.append(Tracklet(current_ap, arrival, stay))
    return tracklets


def _person_days(events: List[Tuple[int, str, int]], timezone: str) -> Dict[date, List[Tuple[int, int]]]:
    """Sort one person's (timestamp, ap_name, ap_id) events and split them by local day"""
    events = sorted(events)
    by_day: Dict[date, List[Tuple[int, int]]] = defaultdict(list)
    for position, (timestamp, _, ap_id) in enumerate(events):
        # Same-timestamp events keep only the last one so arrivals strictly increase
        if position + 1 < len(events) and events[position + 1][0] == timestamp:
            continue
        by_day[local_date(timestamp, timezone)].append((timestamp, ap_id))
    return by_day


class TrajectoryStore:
    """Per-day trajectories of every person, concatenated on demand into any window"""

    def __init__(self, days: Dict[date, Dict[str, Tuple[Tracklet, ...]]], timezone: str = 'UTC',
                 persons: Optional[Iterable[str]] = None):
        self.timezone = timezone
        self._days = {day: dict(people) for day, people in sorted(days.items())}
        known = set(persons or ())
        for people in self._days.values():
            known.update(people)
        self.persons: Tuple[str, ...] = tuple(sorted(known))

    @classmethod
    def from_entries(cls, entries: Iterable[LogEntry], directory: ApDirectory, walk: WalkTimeMatrix,
                     session_timeout: int = 3600, max_terminal_stay: int = 7200,
                     timezone: str = 'UTC', window: Optional[AnalysisWindow] = None) -> 'TrajectoryStore':
        grouped: Dict[str, List[Tuple[int, str, int]]] = defaultdict(list)
        for entry in entries:
            if window is not None and not window.contains(entry.timestamp):
                continue
            ap_id = directory.resolve(entry.ap_name)
            if ap_id is None:
                continue
            grouped[entry.student_id].append((entry.timestamp, entry.ap_name, ap_id))

        days: Dict[date, Dict[str, Tuple[Tracklet, ...]]] = defaultdict(dict)
        for person_id in sorted(grouped):
            for day, events in _person_days(grouped[person_id], timezone).items():
                cutoff = midnight(day + timedelta(days=1), timezone)
                days[day][person_id] = tuple(_day_tracklets(
                    events, directory, walk, session_timeout, cutoff, max_terminal_stay
                ))

        store = cls(days, timezone=timezone, persons=grouped.keys())
        logger.info(f"Built trajectories for {len(store.persons)} persons over {len(store.dates)} days")
        return store

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, timezone: str = 'UTC') -> 'TrajectoryStore':
        days: Dict[date, Dict[str, List[Tracklet]]] = defaultdict(lambda: defaultdict(list))
        ordered = frame.sort_values(['person_id', 'arrival_time'], kind='mergesort')
        for row in ordered.itertuples(index=False):
            tracklet = Tracklet(int(row.ap_id), int(row.arrival_time), int(row.stay_time))
            days[local_date(tracklet.arrival, timezone)][str(row.person_id)].append(tracklet)
        frozen = {day: {person: tuple(items) for person, items in people.items()} for day, people in days.items()}
        return cls(frozen, timezone=timezone)

    @classmethod
    def from_csv(cls, path, timezone: str = 'UTC') -> 'TrajectoryStore':
        try:
            frame = pd.read_csv(path, dtype={'person_id': str})
        except OSError as e:
            raise LogFileError(f"cannot read trajectory file {path}: {e}") from e
        missing = set(TRAJECTORY_COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"trajectory file {path} is missing columns: {', '.join(sorted(missing))}")
        store = cls.from_frame(frame, timezone)
        logger.info(f"Loaded trajectories of {len(store.persons)} persons over {len(store.dates)} days from {path}")
        return store

    def to_frame(self, window: Optional[AnalysisWindow] = None) -> pd.DataFrame:
        rows = [
            (trajectory.person_id, tracklet.ap_id, tracklet.arrival, tracklet.stay)
            for trajectory in self.trajectories(window).values()
            for tracklet in trajectory.tracklets
        ]
        return pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)

    @property
    def dates(self) -> List[date]:
        return list(self._days)

    @property
    def first_day(self) -> Optional[date]:
        return self.dates[0] if self._days else None

    @property
    def last_day(self) -> Optional[date]:
        return self.dates[-1] if self._days else None

    def span_days(self) -> int:
        if not self._days:
            return 0
        return (self.last_day - self.first_day).days + 1

    def trajectories(self, window: Optional[AnalysisWindow] = None) -> Dict[str, Trajectory]:
        """Trajectories of every person active in the window, days concatenated in order"""
        collected: Dict[str, List[Tracklet]] = defaultdict(list)
        wanted = set(window.dates) if window is not None else None
        for day, people in self._days.items():
            if wanted is not None and day not in wanted:
                continue
            for person_id, tracklets in people.items():
                collected[person_id].extend(tracklets)
        return {person: Trajectory(person, tuple(collected[person])) for person in sorted(collected)}

    def week_window(self, first_n_weeks: int) -> AnalysisWindow:
        """Calendar-aligned window covering weeks 1..N from the first midnight"""
        if self.first_day is None:
            raise InsufficientDataError("trajectory store is empty")
        return make_window(self.first_day, 7 * first_n_weeks, self.timezone,
                           label=f"weeks 1-{first_n_weeks}" if first_n_weeks > 1 else "week 1")

    def weeks_spanned(self) -> int:
        """Calendar weeks, counted from the first midnight, that hold at least one day of data"""
        if not self._days:
            return 0
        return (self.last_day - self.first_day).days // 7 + 1

    def require_weeks(self, weeks: int):
        available = self.weeks_spanned()
        if available < weeks:
            raise InsufficientDataError(
                f"trajectory store spans {available} weeks ({self.span_days()} days) but {weeks} "
                f"were requested (short by {weeks - available} weeks)"
            )


def build_trajectories(entries: Iterable[LogEntry], directory: ApDirectory, walk: WalkTimeMatrix,
                       session_timeout: int = 3600, max_terminal_stay: int = 7200,
                       window: Optional[AnalysisWindow] = None, timezone: str = 'UTC') -> Dict[str, Trajectory]:
    """
    Build one Trajectory per person from validated events

    Args:
        entries: validated LogEntry stream, any order
        directory: AP directory used to resolve APs and buildings
        walk: inter-building walking times
        session_timeout: same-AP re-associations within this gap extend the current tracklet
        max_terminal_stay: cap on the last tracklet of each day
        window: optional analysis window; events outside it are ignored
        timezone: zone whose midnights split days

    Returns:
        person_id -> Trajectory, tracklets ordered by arrival
    """
    store = TrajectoryStore.from_entries(
        entries, directory, walk,
        session_timeout=session_timeout,
        max_terminal_stay=max_terminal_stay,
        timezone=timezone,
        window=window
    )
    return store.trajectories()


def write_trajectories(trajectories: Dict[str, Trajectory], path) -> pd.DataFrame:
    rows = [
        (person_id, tracklet.ap_id, tracklet.arrival, tracklet.stay)
        for person_id in sorted(trajectories)
        for tracklet in trajectories[person_id].tracklets
    ]
    frame = pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n')
    return frame
