"""JSONL ingestion of reaction-procedure records, the time-based train/test
split, and the quality-score gate used to curate training data.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field
from typing import Optional

REQUIRED_FIELDS = ("id", "reaction", "procedure_text", "date")
AXES = ("reactant_completeness", "workup_completeness", "condition_completeness", "safety")


class DatasetError(ValueError):
    pass


class DuplicateIdError(DatasetError):
    pass


class UndatedRecordError(DatasetError):
    pass


class RecordParseError(DatasetError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class QualityScores:
    reactant_completeness: float
    workup_completeness: float
    condition_completeness: float
    safety: float

    def __post_init__(self):
        for axis in AXES:
            value = getattr(self, axis)
            if not 0.0 <= value <= 10.0:
                raise ValueError(f"{axis} must be in [0, 10], got {value}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return tuple(getattr(self, axis) for axis in AXES)


@dataclass
class DatasetRecord:
    id: str
    reaction: str
    procedure_text: str
    date: Optional[dt.date]
    roles: Optional[dict[str, str]] = None
    scores: Optional[QualityScores] = None
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "id": self.id,
            "reaction": self.reaction,
            "procedure_text": self.procedure_text,
            "date": self.date.isoformat() if self.date else None,
        }
        if self.roles is not None:
            out["roles"] = self.roles
        if self.scores is not None:
            out["scores"] = {axis: getattr(self.scores, axis) for axis in AXES}
        out.update(self.extra)
        return out


@dataclass
class Dataset:
    records: list[DatasetRecord] = field(default_factory=list)
    sidecar: list[tuple[int, str]] = field(default_factory=list)  # (line_no, message)

    def __len__(self) -> int:
        return len(self.records)


def _record_from_obj(obj: dict, line_no: int) -> DatasetRecord:
    if not isinstance(obj, dict):
        raise RecordParseError(line_no, "record is not a JSON object")
    missing = [f for f in REQUIRED_FIELDS if f not in obj]
    if missing:
        raise RecordParseError(line_no, f"missing fields: {', '.join(missing)}")
    try:
        date = dt.date.fromisoformat(str(obj["date"])[:10]) if obj["date"] is not None else None
    except ValueError:
        raise RecordParseError(line_no, f"unparseable date {obj['date']!r}")
    scores = None
    if obj.get("scores") is not None:
        try:
            scores = QualityScores(**{axis: float(obj["scores"][axis]) for axis in AXES})
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordParseError(line_no, f"bad scores: {exc}")
    known = set(REQUIRED_FIELDS) | {"roles", "scores"}
    return DatasetRecord(
        id=str(obj["id"]),
        reaction=str(obj["reaction"]),
        procedure_text=str(obj["procedure_text"]),
        date=date,
        roles=obj.get("roles"),
        scores=scores,
        extra={k: v for k, v in obj.items() if k not in known},
    )


def load_jsonl(path: str, strict: bool = False) -> Dataset:
    """One record per line; malformed lines go to the error sidecar unless
    strict. Duplicate ids are always fatal."""
    ds = Dataset()
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                record = _record_from_obj(obj, line_no)
            except (json.JSONDecodeError, RecordParseError) as exc:
                if strict:
                    if isinstance(exc, RecordParseError):
                        raise
                    raise RecordParseError(line_no, str(exc))
                ds.sidecar.append((line_no, str(exc)))
                continue
            if record.id in seen:
                raise DuplicateIdError(f"line {line_no}: duplicate id {record.id!r}")
            seen.add(record.id)
            ds.records.append(record)
    return ds


def write_jsonl(ds: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in ds.records:
            fh.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")


def time_split(ds: Dataset, test_fraction: float = 0.10) -> tuple[Dataset, Dataset]:
    """Newest ceil(fraction * n) records form the test set, except that records
    sharing a date never straddle the boundary: the boundary moves earlier
    instead, growing the test set."""
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError("test_fraction must be in [0, 1]")
    for record in ds.records:
        if record.date is None:
            raise UndatedRecordError(f"record {record.id!r} has no date")
    ordered = sorted(enumerate(ds.records), key=lambda pair: (pair[1].date, pair[0]))
    records = [record for _, record in ordered]
    n = len(records)
    k = math.ceil(test_fraction * n)
    if k == 0:
        return Dataset(records=list(records)), Dataset(records=[])
    cut = n - k
    while cut > 0 and records[cut - 1].date == records[cut].date:
        cut -= 1
    return Dataset(records=records[:cut]), Dataset(records=records[cut:])


def quality_gate(scores: QualityScores, avg_min: float = 5.0, axis_min: float = 3.0) -> bool:
    """True when the axis average reaches avg_min and no axis falls below
    axis_min (both bounds inclusive)."""
    values = scores.as_tuple()
    return sum(values) / len(values) >= avg_min and min(values) >= axis_min
