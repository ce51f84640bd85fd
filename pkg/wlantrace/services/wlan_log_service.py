"""
WLAN log ingestion

Parses raw association logs in the
timestamp,process,ap-name,student-id,role,MAC,SSID,result
format, keeps only presence-establishing entries and resolves AP names
against the AP directory.
"""

import csv
import logging
import re
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Iterator, Optional, Dict, List

import pandas as pd
from pydantic import ValidationError

from wlantrace.core.errors import LogFileError
from wlantrace.core.models import LogEntry, AuthResult

logger = logging.getLogger(__name__)

LOG_FIELDS = ['timestamp', 'process', 'ap_name', 'student_id', 'role', 'mac', 'ssid', 'result']
CANONICAL_TIMESTAMP = re.compile(r'[1-9][0-9]*')
RESULT_VALUES = frozenset(result.value for result in AuthResult)


@dataclass
class IngestStats:
    lines: int = 0
    parsed: int = 0
    accepted: int = 0
    malformed: int = 0
    ssid_dropped: int = 0
    failure_dropped: int = 0
    missing_field_dropped: int = 0
    unknown_ap_dropped: int = 0

    @property
    def dropped(self) -> int:
        return (self.malformed + self.ssid_dropped + self.failure_dropped
                + self.missing_field_dropped + self.unknown_ap_dropped)

    def to_dict(self) -> Dict[str, int]:
        return {**asdict(self), 'dropped': self.dropped}


class ApDirectory:
    """AP name -> dense integer handle, plus the building each AP sits in"""

    def __init__(self, rows: Iterable[tuple]):
        self._ids: Dict[str, int] = {}
        self._names: List[str] = []
        self._buildings: List[str] = []
        for ap_name, building_id in rows:
            ap_name = str(ap_name).strip()
            building_id = str(building_id).strip()
            if not ap_name or not building_id:
                raise ValueError(f"AP directory row has an empty field: {ap_name!r},{building_id!r}")
            if ap_name in self._ids:
                raise ValueError(f"AP {ap_name} listed twice in the AP directory")
            self._ids[ap_name] = len(self._names)
            self._names.append(ap_name)
            self._buildings.append(building_id)

    @classmethod
    def from_csv(cls, path) -> 'ApDirectory':
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except OSError as e:
            raise LogFileError(f"cannot read AP directory {path}: {e}") from e
        missing = {'ap_name', 'building_id'} - set(frame.columns)
        if missing:
            raise ValueError(f"AP directory {path} is missing columns: {', '.join(sorted(missing))}")
        directory = cls(zip(frame['ap_name'], frame['building_id']))
        logger.info(f"Loaded {len(directory)} APs in {len(set(directory._buildings))} buildings from {path}")
        return directory

    def to_csv(self, path):
        frame = pd.DataFrame({'ap_name': self._names, 'building_id': self._buildings})
        frame.to_csv(path, index=False, lineterminator='\n')

    def resolve(self, ap_name: str) -> Optional[int]:
        return self._ids.get(ap_name)

    def name_of(self, ap_id: int) -> str:
        return self._names[ap_id]

    def building_of(self, ap_id: int) -> str:
        return self._buildings[ap_id]

    def __contains__(self, ap_name) -> bool:
        return ap_name in self._ids

    def __len__(self) -> int:
        return len(self._names)


def parse_line(line: str) -> Optional[LogEntry]:
    """
    Parse one log line; returns None when the line is malformed or has empty ids

    Only canonical lines parse: no padded fields, a plain decimal timestamp
    and a lower-case result. Any accepted line satisfies
    parse_line(line).to_line() == line without its line terminator.
    """
    fields = line.rstrip('\r\n').split(',')
    if len(fields) != len(LOG_FIELDS):
        return None
    if any(field != field.strip() for field in fields):
        return None
    record = dict(zip(LOG_FIELDS, fields))
    if not record['student_id'] or not record['ap_name']:
        return None
    if not CANONICAL_TIMESTAMP.fullmatch(record['timestamp']):
        return None
    if record['result'] not in RESULT_VALUES:
        return None
    try:
        return LogEntry(**record)
    except ValidationError:
        return None


def parse_log_file(path, ssid_filter: Optional[Iterable[str]] = None,
                   stats: Optional[IngestStats] = None) -> Iterator[LogEntry]:
    """
    Stream LogEntry records from a raw WLAN log file

    Args:
        path: log file, UTF-8, one entry per line, no header
        ssid_filter: SSIDs to keep; entries on any other SSID are dropped.
            None or empty keeps every SSID.
        stats: counters updated while the stream is consumed

    Yields:
        LogEntry in file order
    """
    stats = stats if stats is not None else IngestStats()
    allowed = set(ssid_filter) if ssid_filter else None
    path = Path(path)

    try:
        handle = open(path, 'r', encoding='utf-8')
    except OSError as e:
        raise LogFileError(f"cannot read log file {path}: {e}") from e

    with handle:
        try:
            for line in handle:
                if not line.strip():
                    continue
                stats.lines += 1
                entry = parse_line(line)
                if entry is None:
                    stats.malformed += 1
                    continue
                if allowed is not None and entry.ssid not in allowed:
                    stats.ssid_dropped += 1
                    continue
                stats.parsed += 1
                yield entry
        except UnicodeDecodeError as e:
            raise LogFileError(f"log file {path} is not valid UTF-8: {e}") from e

    logger.info(
        f"Parsed {path.name}: {stats.parsed} parsed, {stats.malformed} malformed, "
        f"{stats.ssid_dropped} on filtered SSIDs"
    )


def validate_and_filter(entries: Iterable[LogEntry], directory: ApDirectory,
                        stats: Optional[IngestStats] = None) -> Iterator[LogEntry]:
    """
    Keep only successful associations with both ids present and a known AP

    Every input entry is either yielded unchanged or counted in exactly one
    drop counter, so accepted + dropped equals the input count.
    """
    stats = stats if stats is not None else IngestStats()
    unknown_aps = set()

    for entry in entries:
        if entry.result != AuthResult.SUCCESS:
            stats.failure_dropped += 1
            continue
        if not entry.student_id.strip() or not entry.ap_name.strip():
            stats.missing_field_dropped += 1
            continue
        if entry.ap_name not in directory:
            stats.unknown_ap_dropped += 1
            unknown_aps.add(entry.ap_name)
            continue
        stats.accepted += 1
        yield entry

    if unknown_aps:
        sample = ', '.join(sorted(unknown_aps)[:5])
        logger.warning(f"{len(unknown_aps)} AP names missing from the AP directory (e.g. {sample})")


def write_events(entries: Iterable[LogEntry], path) -> int:
    """Persist a clean event stream as CSV (or parquet when the path ends in .parquet)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == '.parquet':
        frame = pd.DataFrame(
            [entry.model_dump(mode='json') for entry in entries],
            columns=LOG_FIELDS
        )
        frame.to_parquet(path, index=False)
        return len(frame)

    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(LOG_FIELDS)
        for entry in entries:
            writer.writerow(entry.to_line().split(','))
            count += 1
    return count


def read_events(path) -> List[LogEntry]:
    path = Path(path)
    try:
        if path.suffix == '.parquet':
            frame = pd.read_parquet(path)
        else:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as e:
        raise LogFileError(f"cannot read event file {path}: {e}") from e

    entries = [
        LogEntry(**{**record, 'timestamp': int(record['timestamp'])})
        for record in frame[LOG_FIELDS].astype(str).to_dict('records')
    ]
    logger.info(f"Loaded {len(entries)} events from {path}")
    return entries
