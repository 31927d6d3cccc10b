"""Domain types and label algebra shared by every estimator."""

from __future__ import annotations

import enum
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Optional, Union

__all__ = [
    "EMPTY_KEYWORD",
    "LabelCategory",
    "LabelGroup",
    "Platform",
    "PrevalenceDefinition",
    "AnnotatedPost",
    "AnalysisUnit",
    "GroupedCounts",
    "group_label",
    "effective_label",
    "count_groups",
]

# Reserved keyword for posts retrieved without keyword matching.
EMPTY_KEYWORD = "__EMPTY__"


def _norm(text: str) -> str:
    return "".join(ch for ch in text.strip().lower() if ch.isalnum())


class LabelCategory(enum.Enum):
    """The nine annotation categories."""

    MisDisinformation = "Mis/disinformation"
    CredibleInformative = "Credible and informative"
    Borderline = "Borderline"
    Abusive = "Abusive"
    Unverifiable = "Unverifiable"
    Irrelevant = "Irrelevant"
    OtherLanguage = "Other language"
    Deleted = "Deleted"
    DontKnow = "Don't know"

    @classmethod
    def parse(cls, text: str) -> "LabelCategory":
        """Parse a label case-insensitively, ignoring whitespace and punctuation.

        Both the member name (``MisDisinformation``) and the display name
        (``Mis/disinformation``) are accepted.
        """
        key = _norm(text)
        try:
            return _LABEL_LOOKUP[key]
        except KeyError:
            raise ValueError(f"unknown annotation label: {text!r}") from None


_LABEL_LOOKUP = {}
for _c in LabelCategory:
    _LABEL_LOOKUP[_norm(_c.name)] = _c
    _LABEL_LOOKUP[_norm(_c.value)] = _c


class LabelGroup(enum.IntEnum):
    """Three-way grouping used in all prevalence arithmetic.

    The integer value is the row/column index in reference matrices.
    """

    MisDisinfo = 0
    Legit = 1
    AllTheRest = 2


_GROUP_OF = {
    LabelCategory.MisDisinformation: LabelGroup.MisDisinfo,
    LabelCategory.CredibleInformative: LabelGroup.Legit,
    LabelCategory.Unverifiable: LabelGroup.Legit,
}


def group_label(label: LabelCategory) -> LabelGroup:
    """Map an annotation category onto its label group."""
    return _GROUP_OF.get(label, LabelGroup.AllTheRest)


class Platform(enum.Enum):
    Facebook = "Facebook"
    Instagram = "Instagram"
    LinkedIn = "LinkedIn"
    TikTok = "TikTok"
    XTwitter = "XTwitter"
    YouTube = "YouTube"

    @classmethod
    def parse(cls, text: str) -> "Platform":
        key = _norm(text)
        try:
            return _PLATFORM_LOOKUP[key]
        except KeyError:
            raise ValueError(f"unknown platform: {text!r}") from None


_PLATFORM_LOOKUP = {_norm(p.value): p for p in Platform}
_PLATFORM_LOOKUP.update({"x": Platform.XTwitter, "twitter": Platform.XTwitter})


class PrevalenceDefinition(enum.Enum):
    """Denominator choice: Restricted is mis / (mis + legit), Total is mis / all."""

    Restricted = "restricted"
    Total = "total"

    @classmethod
    def parse(cls, text: str) -> "PrevalenceDefinition":
        return cls(text.strip().lower())


@dataclass(frozen=True, slots=True)
class AnnotatedPost:
    post_id: str
    platform: Platform
    language: str
    keyword: str
    views: int
    junior_label: LabelCategory
    senior_label: Optional[LabelCategory] = None
    agreed_label: Optional[LabelCategory] = None

    def __post_init__(self):
        if not self.post_id:
            raise ValueError("post_id must be non-empty")
        if self.keyword == "":
            raise ValueError("keyword must be non-empty; use EMPTY_KEYWORD for absence")
        if self.views < 0:
            raise ValueError(f"views must be nonnegative, got {self.views}")
        if (self.senior_label is None) != (self.agreed_label is None):
            raise ValueError(
                f"post {self.post_id}: senior and agreed labels must be both present or both absent"
            )

    @property
    def double_coded(self) -> bool:
        return self.agreed_label is not None


def effective_label(post: AnnotatedPost) -> LabelCategory:
    """Final label of a post: the agreed label when present, else the junior one."""
    return post.agreed_label if post.agreed_label is not None else post.junior_label


@dataclass(frozen=True, slots=True)
class GroupedCounts:
    n_mis: int = 0
    n_legit: int = 0
    n_rest: int = 0

    @property
    def total(self) -> int:
        return self.n_mis + self.n_legit + self.n_rest

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_mis, self.n_legit, self.n_rest)

    def __add__(self, other: "GroupedCounts") -> "GroupedCounts":
        return GroupedCounts(
            self.n_mis + other.n_mis, self.n_legit + other.n_legit, self.n_rest + other.n_rest
        )


def count_groups(
    posts: Iterable[Union[tuple[LabelCategory, int], LabelCategory]],
) -> GroupedCounts:
    """Tally label groups, each item weighted by its multiplicity.

    Items are ``(label, multiplicity)`` pairs; a bare label counts once.
    """
    tally = [0, 0, 0]
    for item in posts:
        if isinstance(item, LabelCategory):
            label, mult = item, 1
        else:
            label, mult = item
            if mult < 1:
                raise ValueError(f"multiplicity must be >= 1, got {mult}")
        tally[group_label(label)] += mult
    return GroupedCounts(*tally)


_UNIT_KINDS = ("language", "platform", "platform-language")


@dataclass(frozen=True, slots=True)
class AnalysisUnit:
    """Aggregation slice: a language, a platform, or a platform-language pair.

    Use the :meth:`language`, :meth:`platform_unit` and
    :meth:`platform_language` constructors rather than building directly.
    """

    kind: str
    platform: Optional[Platform] = None
    language: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _UNIT_KINDS:
            raise ValueError(f"unknown unit kind {self.kind!r}")
        need_platform = self.kind in ("platform", "platform-language")
        need_language = self.kind in ("language", "platform-language")
        if need_platform != (self.platform is not None) or need_language != (
            self.language is not None
        ):
            raise ValueError(f"fields do not match unit kind {self.kind!r}")

    @classmethod
    def language_unit(cls, language: str) -> "AnalysisUnit":
        return cls("language", language=language)

    @classmethod
    def platform_unit(cls, platform: Union[Platform, str]) -> "AnalysisUnit":
        if isinstance(platform, str):
            platform = Platform.parse(platform)
        return cls("platform", platform=platform)

    @classmethod
    def platform_language(cls, platform: Union[Platform, str], language: str) -> "AnalysisUnit":
        if isinstance(platform, str):
            platform = Platform.parse(platform)
        return cls("platform-language", platform=platform, language=language)

    @property
    def key(self) -> str:
        """Canonical unit key, e.g. ``fr``, ``TikTok`` or ``TikTok/sk``."""
        if self.kind == "language":
            return self.language
        if self.kind == "platform":
            return self.platform.value
        return f"{self.platform.value}/{self.language}"

    def render(self) -> str:
        return f"{self.kind}:{self.key}"

    def matches(self, post: AnnotatedPost) -> bool:
        if self.platform is not None and post.platform is not self.platform:
            return False
        if self.language is not None and post.language != self.language:
            return False
        return True

    @classmethod
    def parse(cls, text: str) -> "AnalysisUnit":
        """Inverse of :meth:`render`."""
        kind, _, key = text.partition(":")
        if kind == "language":
            return cls.language_unit(key)
        if kind == "platform":
            return cls.platform_unit(key)
        if kind == "platform-language":
            platform, _, language = key.partition("/")
            return cls.platform_language(platform, language)
        raise ValueError(f"cannot parse analysis unit {text!r}")
