"""Count-based analyses over processed tweets, written as CSV files.

Four analyses are built in: records per language, records per detected
country, hashtag occurrences and mention occurrences. Further analyses
come from a file of named regular expressions; each counts the records
whose text matches, keyed by the first matched text so the CSV stays
inspectable.
"""

from __future__ import annotations

import csv
import os
import re
from collections import Counter
from dataclasses import dataclass

KIND_LANG = "builtin_lang"
KIND_COUNTRY = "builtin_country"
KIND_HASHTAG = "builtin_hashtag"
KIND_MENTION = "builtin_mention"
KIND_REGEX = "regex"
KINDS = (KIND_LANG, KIND_COUNTRY, KIND_HASHTAG, KIND_MENTION, KIND_REGEX)

HASHTAG_RE = re.compile(r"#\w+")
MENTION_RE = re.compile(r"@\w+")

# Analysis names double as output file names, so keep them path-safe.
_NAME_RE = re.compile(r"^[\w.-]+$")


class ParseError(ValueError):
    """A regex-spec line is malformed."""

    def __init__(self, path, line_num: int, message: str):
        super().__init__(f"{path}:{line_num}: {message}")
        self.path = path
        self.line_num = line_num


class RegexError(ParseError):
    """A regex-spec pattern does not compile."""


@dataclass(frozen=True)
class AnalysisSpec:
    name: str
    kind: str
    pattern: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown analysis kind: {self.kind}")
        if (self.pattern is not None) != (self.kind == KIND_REGEX):
            raise ValueError("pattern is required for regex specs and only for them")
        if self.pattern is not None:
            re.compile(self.pattern)
        if not _NAME_RE.match(self.name):
            raise ValueError(f"analysis name not usable as a file name: {self.name!r}")


@dataclass(frozen=True)
class AnalysisRow:
    key: str
    count: int


BUILTIN_SPECS = (
    AnalysisSpec(KIND_LANG, KIND_LANG),
    AnalysisSpec(KIND_COUNTRY, KIND_COUNTRY),
    AnalysisSpec(KIND_HASHTAG, KIND_HASHTAG),
    AnalysisSpec(KIND_MENTION, KIND_MENTION),
)


def load_regex_specs(path) -> list[AnalysisSpec]:
    """Parse a regex-spec file: one "name: pattern" per line.

    Blank lines and lines starting with "#" are ignored. Raises
    ParseError (with line number) for malformed lines and duplicate
    names, RegexError for patterns that do not compile.
    """
    specs: list[AnalysisSpec] = []
    names: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_num, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, sep, pattern = line.partition(":")
            name = name.strip()
            pattern = pattern.strip()
            if not sep or not name or not pattern:
                raise ParseError(path, line_num, "expected 'name: pattern'")
            if not _NAME_RE.match(name):
                raise ParseError(path, line_num, f"name not usable as a file name: {name!r}")
            if name in names:
                raise ParseError(path, line_num, f"duplicate analysis name: {name}")
            try:
                re.compile(pattern)
            except re.error as exc:
                raise RegexError(path, line_num, f"bad pattern: {exc}") from exc
            names.add(name)
            specs.append(AnalysisSpec(name=name, kind=KIND_REGEX, pattern=pattern))
    return specs


def sort_rows(counter: Counter) -> list[AnalysisRow]:
    """Counter to rows: descending count, ties broken by ascending key."""
    return [
        AnalysisRow(key=k, count=n)
        for k, n in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def analyze(records, specs) -> dict[str, list[AnalysisRow]]:
    """Run every spec over the records; returns name -> sorted rows.

    The language and country builtins count records per key (records
    with no detected country are excluded); the hashtag and mention
    builtins count token occurrences; regex specs count matching records
    keyed by the first match's text. Keys with zero count never appear.
    """
    results: dict[str, list[AnalysisRow]] = {}
    for spec in specs:
        counter: Counter = Counter()
        if spec.kind == KIND_LANG:
            counter.update(r.lang for r in records)
        elif spec.kind == KIND_COUNTRY:
            counter.update(r.country for r in records if r.country is not None)
        elif spec.kind == KIND_HASHTAG:
            for r in records:
                counter.update(HASHTAG_RE.findall(r.text))
        elif spec.kind == KIND_MENTION:
            for r in records:
                counter.update(MENTION_RE.findall(r.text))
        else:
            compiled = re.compile(spec.pattern)
            for r in records:
                m = compiled.search(r.text)
                if m is not None:
                    counter[m.group(0)] += 1
        results[spec.name] = sort_rows(counter)
    return results


def write_rows(path, rows) -> str:
    """Write rows to one CSV file with a "key,count" header.

    Standard CSV quoting, so keys containing commas or quotes stay
    parseable.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["key", "count"])
        for row in rows:
            writer.writerow([row.key, row.count])
    return str(path)


def write_csv(name: str, rows, out_dir) -> str:
    """Write one analysis as <out_dir>/<name>.csv and return the path."""
    if not name:
        raise ValueError("analysis name must be non-empty")
    os.makedirs(out_dir, exist_ok=True)
    return write_rows(os.path.join(out_dir, f"{name}.csv"), rows)


def read_rows_csv(path) -> list[AnalysisRow]:
    """Read rows back from an analysis CSV (header required)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["key", "count"]:
            raise ValueError(f"{path}: not an analysis CSV (bad header {header!r})")
        return [AnalysisRow(key=row[0], count=int(row[1])) for row in reader if row]
