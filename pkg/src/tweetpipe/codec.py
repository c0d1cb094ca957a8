"""Line codec and file naming for crawled tweet records.

A record is seven text fields joined by the literal "<8>" delimiter, one
record per line. The delimiter was chosen over comma or semicolon because
tweet bodies routinely contain those, making field boundaries ambiguous.

Field order: creation date, id, language code, location, display name,
username, tweet text. The creation date is stored verbatim as the string
the source API produced; this codec never parses it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timezone

DELIMITER = "<8>"

FIELD_NAMES = ("creation_date", "id", "lang", "location", "name", "username", "text")

KIND_CRAWL = "crawl"
KIND_PROCESSED = "processed"

_LINE_BREAKS = re.compile(r"\r\n|[\r\n]")
_CRAWL_PATH = re.compile(r"(\d{2})-(\d{2})-(\d{4})[/\\]tweets-(\d{2}) (AM|PM)\.txt$")


class InvalidRecordError(ValueError):
    """Record violates a codec invariant; sanitize the fields first."""


class FieldCountError(ValueError):
    """A line did not split into exactly seven fields."""

    def __init__(self, field_count: int):
        super().__init__(f"expected 7 fields, got {field_count}")
        self.field_count = field_count


@dataclass(frozen=True)
class TweetRecord:
    """One crawled tweet in the seven-field on-disk schema."""

    creation_date: str
    id: str
    lang: str
    location: str
    name: str
    username: str
    text: str

    def fields(self) -> tuple[str, ...]:
        return (
            self.creation_date,
            self.id,
            self.lang,
            self.location,
            self.name,
            self.username,
            self.text,
        )

    def validate(self) -> None:
        """Raise InvalidRecordError unless every codec invariant holds."""
        for field_name, value in zip(FIELD_NAMES, self.fields()):
            if DELIMITER in value:
                raise InvalidRecordError(f"{field_name} contains the {DELIMITER!r} delimiter")
            if "\n" in value or "\r" in value:
                raise InvalidRecordError(f"{field_name} contains a line break")
            # Decoding trims one optional space around each delimiter, so a
            # field with a leading/trailing space would not round-trip.
            if value.startswith(" ") or value.endswith(" "):
                raise InvalidRecordError(f"{field_name} has leading or trailing space")
        if not self.id or not self.id.isdigit():
            raise InvalidRecordError("id must be a non-empty decimal-digit string")
        if not self.location:
            raise InvalidRecordError("location must be non-empty")


def sanitize_field(raw: str) -> str:
    """Make a raw string safe to store as a record field.

    Line breaks become a single space each, any embedded "<8>" becomes
    "<8 >" (lossy but unambiguous), and surrounding whitespace is dropped
    so decoding's delimiter-space trimming cannot alter the field.
    Idempotent.
    """
    out = _LINE_BREAKS.sub(" ", raw)
    out = out.replace(DELIMITER, "<8 >")
    return out.strip()


def encode_record(record: TweetRecord) -> str:
    """Encode a record as a single delimited line.

    Raises InvalidRecordError if the record violates an invariant; callers
    are expected to run sanitize_field over untrusted values first.
    """
    record.validate()
    return DELIMITER.join(record.fields())


def _trim_field(field: str) -> str:
    # At most one leading and one trailing space belong to the delimiter
    # convention ("a <8> b"), never to the field itself.
    if field.startswith(" "):
        field = field[1:]
    if field.endswith(" "):
        field = field[:-1]
    return field


def decode_record(line: str) -> TweetRecord:
    """Decode one line into a TweetRecord.

    Accepts both the bare ("a<8>b") and spaced ("a <8> b") delimiter
    forms. Raises FieldCountError when the split does not yield exactly
    seven fields, which signals a corrupt input line.
    """
    parts = line.split(DELIMITER)
    if len(parts) != len(FIELD_NAMES):
        raise FieldCountError(len(parts))
    return TweetRecord(*(_trim_field(part) for part in parts))


@dataclass(frozen=True)
class FileLocator:
    """Calendar date, hour and kind identifying one output file."""

    date: date
    hour: int
    kind: str = KIND_CRAWL

    def __post_init__(self) -> None:
        if not 0 <= self.hour <= 23:
            raise ValueError(f"hour out of range: {self.hour}")
        if self.kind not in (KIND_CRAWL, KIND_PROCESSED):
            raise ValueError(f"unknown kind: {self.kind}")

    @classmethod
    def from_timestamp_ms(cls, ts_ms: int, kind: str = KIND_CRAWL) -> "FileLocator":
        dt = datetime.fromtimestamp(ts_ms / 1000.0, tz=timezone.utc)
        return cls(date=dt.date(), hour=dt.hour, kind=kind)


def _hour_token(hour: int) -> str:
    meridiem = "AM" if hour < 12 else "PM"
    return f"{hour:02d} {meridiem}"


def _date_token(d: date) -> str:
    return f"{d.month:02d}-{d.day:02d}-{d.year:04d}"


def crawl_file_path(loc: FileLocator, root: str = "./data") -> str:
    """Path of the crawl file for a date/hour: <root>/<MM-DD-YYYY>/tweets-<HH> <AM|PM>.txt"""
    if loc.kind != KIND_CRAWL:
        raise ValueError("locator kind must be 'crawl'")
    return f"{root}/{_date_token(loc.date)}/tweets-{_hour_token(loc.hour)}.txt"


def processed_file_path(loc: FileLocator, root: str = "./data") -> str:
    """Path of the processed file: <root>/<MM-DD-YYYY>-tweets-<HH> <AM|PM>.json"""
    if loc.kind != KIND_PROCESSED:
        raise ValueError("locator kind must be 'processed'")
    return f"{root}/{_date_token(loc.date)}-tweets-{_hour_token(loc.hour)}.json"


def parse_crawl_file_path(path: str) -> FileLocator:
    """Recover the FileLocator from a crawl file path.

    Raises ValueError if the path does not match the crawl naming scheme
    or the hour and AM/PM marker disagree.
    """
    m = _CRAWL_PATH.search(str(path))
    if m is None:
        raise ValueError(f"not a crawl file path: {path!r}")
    month, day, year, hour, meridiem = m.groups()
    hour_n = int(hour)
    if hour_n > 23:
        raise ValueError(f"hour out of range in path: {path!r}")
    if meridiem != ("AM" if hour_n < 12 else "PM"):
        raise ValueError(f"hour/meridiem mismatch in path: {path!r}")
    return FileLocator(date=date(int(year), int(month), int(day)), hour=hour_n, kind=KIND_CRAWL)
