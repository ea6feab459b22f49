import logging

from flatdisk.logging_utils import FieldFormatter, log_extra


def _record(**extra) -> logging.LogRecord:
    record = logging.makeLogRecord({"name": "flatdisk.disk", "levelname": "INFO", "msg": "Disk built"})
    for key, value in extra.items():
        setattr(record, key, value)
    return record


def test_log_extra_drops_none() -> None:
    assert log_extra(disk_id="square", seed=None, chi=0) == {"disk_id": "square", "chi": 0}


def test_formatter_appends_sorted_fields() -> None:
    formatter = FieldFormatter("%(levelname)s %(name)s %(message)s")
    line = formatter.format(_record(disk_id="square", chi=0, area=1.0 / 3.0))
    assert line == "INFO flatdisk.disk Disk built area=0.333333 chi=0 disk_id=square"


def test_formatter_without_fields() -> None:
    formatter = FieldFormatter("%(message)s")
    assert formatter.format(_record()) == "Disk built"
