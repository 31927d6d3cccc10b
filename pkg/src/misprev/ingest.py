"""Corpus parsing, preprocessing and slicing by analysis unit."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from misprev.labels import (
    EMPTY_KEYWORD,
    AnalysisUnit,
    AnnotatedPost,
    LabelCategory,
    Platform,
)

logger = logging.getLogger(__name__)

__all__ = [
    "COLUMNS",
    "IngestError",
    "MissingColumn",
    "RowError",
    "BadLabel",
    "BadPlatform",
    "BadViews",
    "DuplicatePostId",
    "MalformedRow",
    "ParseOptions",
    "ParseResult",
    "Provenance",
    "Corpus",
    "parse_corpus",
    "preprocess",
    "load_corpus",
    "slice_by_unit",
    "unit_family",
]

COLUMNS = (
    "post_id",
    "platform",
    "language",
    "keyword",
    "views",
    "junior_label",
    "senior_label",
    "agreed_label",
)


class IngestError(Exception):
    pass


class MissingColumn(IngestError):
    def __init__(self, column: str):
        super().__init__(f"input is missing required column {column!r}")
        self.column = column


@dataclass(frozen=True)
class RowError:
    """A row that could not become an :class:`AnnotatedPost`.

    ``row`` is the 1-based data row number (the header is row 0).
    """

    kind: str
    row: int
    value: str
    message: str = ""

    def __str__(self):
        return f"row {self.row}: {self.kind} ({self.value!r}) {self.message}".rstrip()


def BadLabel(row: int, value: str) -> RowError:
    return RowError("BadLabel", row, value)


def BadPlatform(row: int, value: str) -> RowError:
    return RowError("BadPlatform", row, value)


def BadViews(row: int, value: str) -> RowError:
    return RowError("BadViews", row, value)


def DuplicatePostId(row: int, value: str) -> RowError:
    return RowError("DuplicatePostId", row, value)


def MalformedRow(row: int, value: str, message: str) -> RowError:
    return RowError("MalformedRow", row, value, message)


class RowErrors(IngestError):
    def __init__(self, errors: Sequence[RowError]):
        self.errors = list(errors)
        head = "; ".join(str(e) for e in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{len(self.errors)} invalid row(s): {head}{more}")


@dataclass(frozen=True)
class ParseOptions:
    delimiter: str = ","
    encoding: str = "utf-8"
    strict: bool = False  # raise RowErrors instead of collecting


@dataclass(frozen=True)
class ParseResult:
    posts: list[AnnotatedPost]
    errors: list[RowError]
    source: str = ""


@dataclass(frozen=True)
class Provenance:
    source: str = ""
    rows_read: int = 0
    dropped_r1: int = 0
    dropped_r2: int = 0
    rows_kept: int = 0
    parse_errors: int = 0

    def as_dict(self) -> dict:
        return {
            "source": self.source,
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "dropped_r1": self.dropped_r1,
            "dropped_r2": self.dropped_r2,
            "parse_errors": self.parse_errors,
        }


@dataclass(frozen=True)
class Corpus:
    posts: tuple[AnnotatedPost, ...]
    provenance: Provenance = field(default_factory=Provenance)

    def __len__(self):
        return len(self.posts)

    def __iter__(self):
        return iter(self.posts)


def _optional_label(text: str) -> Optional[LabelCategory]:
    return LabelCategory.parse(text) if text.strip() else None


def parse_rows(rows: Iterable[dict], options: ParseOptions = ParseOptions()) -> ParseResult:
    """Validate already-tokenised rows (dicts keyed by :data:`COLUMNS`)."""
    posts: list[AnnotatedPost] = []
    errors: list[RowError] = []
    seen: set[str] = set()
    for i, row in enumerate(rows, start=1):
        post_id = (row.get("post_id") or "").strip()
        if not post_id:
            errors.append(MalformedRow(i, post_id, "empty post_id"))
            continue
        if post_id in seen:
            errors.append(DuplicatePostId(i, post_id))
            continue
        try:
            platform = Platform.parse(row["platform"])
        except ValueError:
            errors.append(BadPlatform(i, row["platform"]))
            continue
        views_text = (row.get("views") or "").strip()
        try:
            views = int(views_text)
        except ValueError:
            try:
                as_float = float(views_text)
            except ValueError:
                as_float = -1.0
            views = int(as_float) if as_float.is_integer() else -1
        if views < 0:
            errors.append(BadViews(i, views_text))
            continue
        labels = []
        bad = None
        for col in ("junior_label", "senior_label", "agreed_label"):
            text = row.get(col) or ""
            try:
                labels.append(_optional_label(text))
            except ValueError:
                bad = text
                break
        if bad is not None:
            errors.append(BadLabel(i, bad))
            continue
        junior, senior, agreed = labels
        if junior is None:
            errors.append(BadLabel(i, ""))
            continue
        if (senior is None) != (agreed is None):
            errors.append(
                MalformedRow(i, post_id, "senior_label and agreed_label must be both present or both absent")
            )
            continue
        language = (row.get("language") or "").strip().lower()
        if not language:
            errors.append(MalformedRow(i, post_id, "empty language"))
            continue
        keyword = (row.get("keyword") or "").strip() or EMPTY_KEYWORD
        seen.add(post_id)
        posts.append(
            AnnotatedPost(
                post_id=post_id,
                platform=platform,
                language=language,
                keyword=keyword,
                views=views,
                junior_label=junior,
                senior_label=senior,
                agreed_label=agreed,
            )
        )
    if options.strict and errors:
        raise RowErrors(errors)
    return ParseResult(posts, errors)


def parse_corpus(path: Union[str, Path], options: ParseOptions = ParseOptions()) -> ParseResult:
    """Read a corpus CSV and validate every row.

    Raises
    ------
    MissingColumn
        When the header lacks one of :data:`COLUMNS`.
    RowErrors
        In strict mode, when any row is invalid.
    """
    path = Path(path)
    with path.open(newline="", encoding=options.encoding) as fh:
        reader = csv.DictReader(fh, delimiter=options.delimiter)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for col in COLUMNS:
            if col not in header:
                raise MissingColumn(col)
        reader.fieldnames = header
        result = parse_rows(reader, options)
    return ParseResult(result.posts, result.errors, str(path))


def _drop_rule(post: AnnotatedPost) -> Optional[str]:
    if post.senior_label is LabelCategory.Deleted:
        if post.junior_label is LabelCategory.Deleted:
            return "r1"
        return "r2"
    return None


def preprocess(raw: Union[Sequence[AnnotatedPost], ParseResult, Corpus], source: str = "") -> Corpus:
    """Remove records that were unavailable to the annotators.

    R1 drops posts labelled Deleted by both junior and senior; R2 drops
    posts the senior labelled Deleted while the junior did not. Junior-only
    posts are always retained.
    """
    parse_errors = 0
    if isinstance(raw, ParseResult):
        source = source or raw.source
        parse_errors = len(raw.errors)
        rows = raw.posts
    elif isinstance(raw, Corpus):
        source = source or raw.provenance.source
        rows = raw.posts
    else:
        rows = raw
    kept = []
    drops = {"r1": 0, "r2": 0}
    ids: set[str] = set()
    for post in rows:
        if post.post_id in ids:
            raise IngestError(f"duplicate post_id {post.post_id!r}")
        ids.add(post.post_id)
        rule = _drop_rule(post)
        if rule is None:
            kept.append(post)
        else:
            drops[rule] += 1
    prov = Provenance(
        source=source,
        rows_read=len(rows),
        dropped_r1=drops["r1"],
        dropped_r2=drops["r2"],
        rows_kept=len(kept),
        parse_errors=parse_errors,
    )
    return Corpus(tuple(kept), prov)


def load_corpus(path: Union[str, Path], options: ParseOptions = ParseOptions(strict=True)) -> Corpus:
    """Parse and preprocess in one step."""
    return preprocess(parse_corpus(path, options))


def slice_by_unit(corpus: Union[Corpus, Sequence[AnnotatedPost]], unit: AnalysisUnit) -> tuple[list[AnnotatedPost], bool]:
    """Posts belonging to ``unit`` and a flag that is True when none match."""
    posts = [p for p in corpus if unit.matches(p)]
    if not posts:
        logger.warning("analysis unit %s matches no posts", unit.render())
    return posts, not posts


def unit_family(corpus: Union[Corpus, Sequence[AnnotatedPost]], kind: str) -> list[AnalysisUnit]:
    """All units of one kind present in the corpus, sorted by canonical key."""
    if kind == "language":
        units = {AnalysisUnit.language_unit(p.language) for p in corpus}
    elif kind == "platform":
        units = {AnalysisUnit.platform_unit(p.platform) for p in corpus}
    elif kind == "platform-language":
        units = {AnalysisUnit.platform_language(p.platform, p.language) for p in corpus}
    else:
        raise ValueError(f"unknown unit family {kind!r}")
    return sorted(units, key=lambda u: u.key)
