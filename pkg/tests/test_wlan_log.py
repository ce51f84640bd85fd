import numpy as np
import pytest

from wlantrace.core.errors import LogFileError
from wlantrace.core.models import AuthResult
from wlantrace.services.wlan_log_service import (
    ApDirectory, IngestStats, parse_line, parse_log_file, read_events, validate_and_filter, write_events
)

SAMPLE = "1425000000,auth,AP-Lib-3F-02,s001,student,00:11:22:xx:xx:xx,SecureNet,success"


@pytest.fixture
def directory():
    return ApDirectory([('AP-Lib-3F-02', 'LIB'), ('AP-Lib-3F-03', 'LIB'), ('AP-Eng-1F-01', 'ENG')])


def _write_log(tmp_path, lines):
    path = tmp_path / 'wlan.log'
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding='utf-8')
    return path


def test_parse_line_maps_fields():
    entry = parse_line(SAMPLE)
    assert entry.timestamp == 1425000000
    assert entry.ap_name == 'AP-Lib-3F-02'
    assert entry.student_id == 's001'
    assert entry.result == AuthResult.SUCCESS
    assert entry.to_line() == SAMPLE


@pytest.mark.parametrize('line', [
    "1425000000,auth,AP-Lib-3F-02,,student,00:11,SecureNet,success",
    "1425000000,auth,,s001,student,00:11,SecureNet,success",
    "1425000000,auth,AP-Lib-3F-02,s001,student",
    "not-a-time,auth,AP-Lib-3F-02,s001,student,00:11,SecureNet,success",
    "1425000000,auth,AP-Lib-3F-02,s001,student,00:11,SecureNet,maybe",
    SAMPLE.replace("success", "Success"),
    SAMPLE + " ",
    "0" + SAMPLE,
    SAMPLE.replace("1425000000", "+1425000000"),
    SAMPLE.replace("AP-Lib-3F-02", " AP-Lib-3F-02"),
    SAMPLE.replace(",s001,", ",s001 ,"),
])
def test_parse_line_rejects_invalid(line):
    assert parse_line(line) is None


def test_empty_file_gives_empty_stream(tmp_path):
    stats = IngestStats()
    assert list(parse_log_file(_write_log(tmp_path, []), stats=stats)) == []
    assert stats.lines == 0
    assert stats.dropped == 0


def test_missing_file_is_fatal(tmp_path):
    with pytest.raises(LogFileError):
        list(parse_log_file(tmp_path / 'nope.log'))


def test_ssid_filter_counts_dropped(tmp_path):
    lines = [SAMPLE, SAMPLE.replace('SecureNet', 'OpenNet')]
    stats = IngestStats()
    entries = list(parse_log_file(_write_log(tmp_path, lines), ssid_filter=['SecureNet'], stats=stats))
    assert len(entries) == 1
    assert stats.ssid_dropped == 1


def test_ten_entries_three_invalid(tmp_path, directory):
    good = [SAMPLE.replace('1425000000', str(1425000000 + 60 * i)) for i in range(7)]
    bad = [
        SAMPLE.replace('success', 'failure'),
        SAMPLE.replace('AP-Lib-3F-02', 'AP-Unknown'),
        SAMPLE.replace(',s001,', ',,'),
    ]
    stats = IngestStats()
    parsed = parse_log_file(_write_log(tmp_path, good + bad), stats=stats)
    kept = list(validate_and_filter(parsed, directory, stats=stats))

    assert len(kept) == 7
    assert stats.dropped == 3
    assert stats.failure_dropped == 1
    assert stats.unknown_ap_dropped == 1
    assert stats.malformed == 1
    assert stats.accepted + stats.dropped == stats.lines


def test_valid_entries_pass_through_unchanged(directory):
    entry = parse_line(SAMPLE)
    assert list(validate_and_filter([entry], directory)) == [entry]


def test_directory_rejects_duplicates():
    with pytest.raises(ValueError):
        ApDirectory([('AP-1', 'B1'), ('AP-1', 'B2')])


def test_directory_csv_round_trip(tmp_path, directory):
    path = tmp_path / 'aps.csv'
    directory.to_csv(path)
    loaded = ApDirectory.from_csv(path)
    assert len(loaded) == 3
    ap_id = loaded.resolve('AP-Eng-1F-01')
    assert loaded.name_of(ap_id) == 'AP-Eng-1F-01'
    assert loaded.building_of(ap_id) == 'ENG'
    assert loaded.resolve('AP-Missing') is None


@pytest.mark.parametrize('suffix', ['.csv', '.parquet'])
def test_events_written_and_read_back(tmp_path, suffix):
    entries = [parse_line(SAMPLE), parse_line(SAMPLE.replace('s001', 's002'))]
    path = tmp_path / f'events{suffix}'
    write_events(entries, path)
    assert read_events(path) == entries


def test_accepted_lines_round_trip(campus_files):
    lines = campus_files.log.read_text(encoding='utf-8').splitlines()
    accepted = [line for line in lines if parse_line(line) is not None]
    assert accepted
    for line in accepted:
        assert parse_line(line).to_line() == line


def test_padded_ap_name_is_malformed(tmp_path, directory):
    stats = IngestStats()
    parsed = parse_log_file(_write_log(tmp_path, [SAMPLE.replace('AP-Lib-3F-02', 'AP-Lib-3F-02 ')]), stats=stats)
    assert list(validate_and_filter(parsed, directory, stats=stats)) == []
    assert stats.malformed == 1
    assert stats.unknown_ap_dropped == 0


def _ingest(path, directory):
    stats = IngestStats()
    entries = list(validate_and_filter(parse_log_file(path, stats=stats), directory, stats=stats))
    return entries, stats


def test_ingest_ignores_line_order(tmp_path, campus_files):
    directory = ApDirectory.from_csv(campus_files.directory)
    lines = campus_files.log.read_text(encoding='utf-8').splitlines()
    shuffled = [lines[i] for i in np.random.default_rng(4).permutation(len(lines))]

    entries, stats = _ingest(campus_files.log, directory)
    shuffled_entries, shuffled_stats = _ingest(_write_log(tmp_path, shuffled), directory)

    assert sorted(e.to_line() for e in entries) == sorted(e.to_line() for e in shuffled_entries)
    assert stats.to_dict() == shuffled_stats.to_dict()


def test_validation_is_idempotent(campus_files):
    directory = ApDirectory.from_csv(campus_files.directory)
    kept, _ = _ingest(campus_files.log, directory)
    stats = IngestStats()
    assert list(validate_and_filter(kept, directory, stats=stats)) == kept
    assert stats.accepted == len(kept)
    assert stats.dropped == 0
