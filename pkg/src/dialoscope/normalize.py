"""Surface-variant generation and slot-value matching in utterance text.

A normalized slot value may surface in an utterance verbatim, as a typo,
as an equivalent entity rendering (number words, time phrases, weekday
abbreviations, alternative spellings, shortcuts), or as a semantically
equivalent phrase from a curated lexicon. `variants` enumerates the
generatable surfaces; `match_in_text` locates the value in a turn's text
and classifies how it surfaced.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple


class MatchCategory(str, Enum):
    VERBATIM = "verbatim"
    TYPO = "typo"
    ENTITY_RECOGNITION = "entity_recognition"
    SEMANTIC_UNDERSTANDING = "semantic_understanding"
    COMPUTATION = "computation"
    # curated-other lexicon phrases and manual overrides land here
    OTHER = "other"
    UNRESOLVED = "unresolved"


class EntityKind(str, Enum):
    ALT_SPELLING = "alt_spelling"
    NUMBER = "number"
    DATE_TIME = "date_time"
    SHORTCUT = "shortcut"


@dataclass(frozen=True)
class Variant:
    surface: str
    category: MatchCategory
    sub_kind: Optional[EntityKind] = None


@dataclass(frozen=True)
class MatchResult:
    category: MatchCategory
    sub_kind: Optional[EntityKind] = None
    span: Optional[Tuple[int, int]] = None
    matched_surface: Optional[str] = None
    distance: Optional[int] = None  # edit distance, typo matches only

    @property
    def resolved(self) -> bool:
        return self.category is not MatchCategory.UNRESOLVED


UNRESOLVED = MatchResult(MatchCategory.UNRESOLVED)


# ---------------------------------------------------------------------------
# lexicon
# ---------------------------------------------------------------------------

class LexiconError(ValueError):
    pass


@dataclass
class Lexicon:
    """Curated phrase mappings, immutable after load.

    Keys are "domain/slot/value", "slot/value" or "*/value", all lowercase.
    """
    semantic_map: Dict[str, Set[str]]
    shortcut_map: Dict[str, Set[str]]
    other_map: Dict[str, Set[str]]

    @staticmethod
    def empty() -> "Lexicon":
        return Lexicon({}, {}, {})

    def _lookup(self, table: Dict[str, Set[str]], value: str,
                slot: Optional[Tuple[str, str]]) -> List[str]:
        value = value.lower()
        keys = []
        if slot is not None:
            domain, name = slot
            keys.append(f"{domain.lower()}/{name.lower()}/{value}")
            keys.append(f"{name.lower()}/{value}")
        keys.append(f"*/{value}")
        phrases: List[str] = []
        for key in keys:
            for phrase in sorted(table.get(key, ())):
                if phrase not in phrases:
                    phrases.append(phrase)
        return phrases

    def semantic_phrases(self, value, slot=None):
        return self._lookup(self.semantic_map, value, slot)

    def other_phrases(self, value, slot=None):
        return self._lookup(self.other_map, value, slot)

    def shortcuts(self, value: str) -> List[str]:
        return sorted(self.shortcut_map.get(value.lower(), ()))


def load_lexicon(path) -> Lexicon:
    """Parse the plain-text lexicon file.

    Line format: `[domain/]slot/value: phrase|phrase|...`. Lines starting
    with `!shortcut` map an entity to abbreviations, `!other` marks
    curated-other phrases. `#` starts a comment; duplicate keys merge.
    """
    semantic: Dict[str, Set[str]] = {}
    shortcut: Dict[str, Set[str]] = {}
    other: Dict[str, Set[str]] = {}
    text = Path(path).read_text("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        table = semantic
        if line.startswith("!shortcut "):
            table = shortcut
            line = line[len("!shortcut "):]
        elif line.startswith("!other "):
            table = other
            line = line[len("!other "):]
        key, sep, phrases = line.partition(":")
        key = key.strip().lower()
        if not sep or not key:
            raise LexiconError(f"{path}:{lineno}: expected 'key: phrase|phrase'")
        if table is not shortcut and "/" not in key:
            raise LexiconError(f"{path}:{lineno}: key must be [domain/]slot/value")
        phrase_set = {p.strip().lower() for p in phrases.split("|") if p.strip()}
        if not phrase_set:
            raise LexiconError(f"{path}:{lineno}: empty phrase set")
        table.setdefault(key, set()).update(phrase_set)
    return Lexicon(semantic, shortcut, other)


def default_lexicon() -> Lexicon:
    from importlib import resources
    with resources.as_file(resources.files("dialoscope") / "data" / "lexicon.txt") as p:
        return load_lexicon(p)


# ---------------------------------------------------------------------------
# entity renderings
# ---------------------------------------------------------------------------

_ONES = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
         "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
         "sixteen", "seventeen", "eighteen", "nineteen"]
_TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
         "eighty", "ninety"]


def number_to_words(n: int) -> str:
    if n < 0:
        return "minus " + number_to_words(-n)
    if n < 20:
        return _ONES[n]
    if n < 100:
        tens, ones = divmod(n, 10)
        return _TENS[tens] + (f" {_ONES[ones]}" if ones else "")
    if n < 1000:
        hundreds, rest = divmod(n, 100)
        out = f"{_ONES[hundreds]} hundred"
        return out + (f" {number_to_words(rest)}" if rest else "")
    thousands, rest = divmod(n, 1000)
    out = f"{number_to_words(thousands)} thousand"
    return out + (f" {number_to_words(rest)}" if rest else "")


@lru_cache(maxsize=1)
def _words_to_number() -> Dict[str, int]:
    table = {}
    for i in range(0, 1000):
        words = number_to_words(i)
        table[words] = i
        table[words.replace(" ", "-")] = i
    return table


_WEEKDAYS = {
    "monday": "mon", "tuesday": "tue", "wednesday": "wed", "thursday": "thu",
    "friday": "fri", "saturday": "sat", "sunday": "sun",
}
_WEEKDAY_ABBR = {abbr: full for full, abbr in _WEEKDAYS.items()}
_WEEKDAY_ABBR.update({"tues": "tuesday", "thur": "thursday", "thurs": "thursday"})

_ALT_SPELLINGS = [
    ("center", "centre"), ("theater", "theatre"), ("color", "colour"),
    ("neighborhood", "neighbourhood"), ("gray", "grey"),
    ("catalog", "catalogue"), ("favorite", "favourite"),
    ("jewelry", "jewellery"), ("traveling", "travelling"),
]

_TIME_24H = re.compile(r"^([01]?\d|2[0-3]):([0-5]\d)$")
_TIME_12H = re.compile(r"^(1[0-2]|0?\d):([0-5]\d)\s*(am|pm)$", re.IGNORECASE)
_CURRENCY = re.compile(r"^\$\s?(\d+)(?:\.\d+)?$")
_INT = re.compile(r"^\d+$")


def _clock_variants(hour24: int, minute: int) -> List[str]:
    h12 = hour24 % 12 or 12
    ampm = "am" if hour24 < 12 else "pm"
    out = [f"{h12}:{minute:02d} {ampm}", f"{h12}:{minute:02d}{ampm}"]
    if minute == 0:
        out += [f"{h12} {ampm}", f"{h12} o'clock"]
    elif minute == 30:
        out.append(f"half past {h12}")
    elif minute == 15:
        out.append(f"quarter past {h12}")
    elif minute == 45:
        nxt = (hour24 + 1) % 24 % 12 or 12
        out.append(f"quarter to {nxt}")
    return out


def _time_variants(value: str) -> List[str]:
    m = _TIME_24H.match(value)
    if m:
        hour, minute = int(m.group(1)), int(m.group(2))
        out = list(_clock_variants(hour, minute))
        h12 = hour % 12 or 12
        for alt in (f"{hour}:{minute:02d}", f"{hour:02d}:{minute:02d}",
                    f"{h12}:{minute:02d}"):
            if alt != value:
                out.append(alt)
        return list(dict.fromkeys(out))
    m = _TIME_12H.match(value)
    if m:
        h12, minute, ampm = int(m.group(1)), int(m.group(2)), m.group(3).lower()
        hour24 = h12 % 12 + (12 if ampm == "pm" else 0)
        out = [f"{hour24:02d}:{minute:02d}", f"{hour24 % 24}:{minute:02d}"]
        out += [v for v in _clock_variants(hour24, minute) if v.lower() != value.lower()]
        return list(dict.fromkeys(out))
    return []


def _number_variants(value: str) -> List[str]:
    if _INT.match(value):
        n = int(value)
        if n < 1000000:
            words = number_to_words(n)
            return [words, words.replace(" ", "-")] if " " in words else [words]
        return []
    n = _words_to_number().get(value.lower())
    return [str(n)] if n is not None else []


def _currency_variants(value: str) -> List[str]:
    m = _CURRENCY.match(value)
    if not m:
        return []
    n = int(m.group(1))
    words = number_to_words(n)
    return [f"{n} dollars", f"{n} bucks", f"{words} dollars", f"{words} bucks"]


def _alt_spelling_variants(value: str) -> List[str]:
    out = []
    words = value.lower().split()
    for a, b in _ALT_SPELLINGS:
        for src, dst in ((a, b), (b, a)):
            if src in words:
                out.append(" ".join(dst if w == src else w for w in words))
    return out


def _weekday_variants(value: str) -> List[str]:
    v = value.lower()
    if v in _WEEKDAYS:
        return [_WEEKDAYS[v]]
    if v in _WEEKDAY_ABBR:
        return [_WEEKDAY_ABBR[v]]
    return []


def variants(value: str, slot: Optional[Tuple[str, str]] = None,
             lexicon: Optional[Lexicon] = None) -> List[Variant]:
    """All generatable surfaces of a value, verbatim first.

    Typo forms are never enumerated; they are caught at match time by
    bounded edit distance.
    """
    if not value:
        raise ValueError("value must be non-empty")
    lexicon = lexicon or Lexicon.empty()
    out = [Variant(value, MatchCategory.VERBATIM)]
    seen = {value.lower()}

    def add(surfaces, kind: Optional[EntityKind],
            category=MatchCategory.ENTITY_RECOGNITION):
        for s in surfaces:
            s = s.strip()
            if s and s.lower() not in seen:
                seen.add(s.lower())
                out.append(Variant(s, category, kind))

    add(_number_variants(value), EntityKind.NUMBER)
    add(_currency_variants(value), EntityKind.NUMBER)
    add(_time_variants(value), EntityKind.DATE_TIME)
    add(_weekday_variants(value), EntityKind.SHORTCUT)
    add(_alt_spelling_variants(value), EntityKind.ALT_SPELLING)
    add(lexicon.shortcuts(value), EntityKind.SHORTCUT)
    add(lexicon.semantic_phrases(value, slot), None, MatchCategory.SEMANTIC_UNDERSTANDING)
    add(lexicon.other_phrases(value, slot), None, MatchCategory.OTHER)
    return out


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------

@lru_cache(maxsize=65536)
def _bounded_pattern(surface: str) -> "re.Pattern":
    return re.compile(r"(?<!\w)" + re.escape(surface) + r"(?!\w)", re.IGNORECASE)


def _find_word_bounded(surface: str, text: str) -> Optional[Tuple[int, int]]:
    m = _bounded_pattern(surface).search(text)
    return (m.start(), m.end()) if m else None


_EDGE_PUNCT = ".,;!?\"'()[]"


def _tokens_with_spans(text: str) -> List[Tuple[str, int, int]]:
    toks = []
    for m in re.finditer(r"\S+", text):
        tok, start, end = m.group(), m.start(), m.end()
        stripped = tok.strip(_EDGE_PUNCT)
        if not stripped:
            continue
        offset = tok.index(stripped[0]) if stripped else 0
        toks.append((stripped, start + offset, start + offset + len(stripped)))
    return toks


def damerau_levenshtein(a: str, b: str) -> int:
    """Optimal string alignment distance (adjacent transposition counts 1)."""
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return max(la, lb)
    prev2: List[int] = []
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        curr = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            curr[j] = min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + cost)
            if (i > 1 and j > 1 and a[i - 1] == b[j - 2]
                    and a[i - 2] == b[j - 1]):
                curr[j] = min(curr[j], prev2[j - 2] + 1)
        prev2, prev = prev, curr
    return prev[lb]


# typo matching is too noisy on very short strings; 4 chars is the floor
_TYPO_MIN_LEN = 4


def _typo_threshold(target: str) -> int:
    return 2 if len(target) >= 8 else 1


def _typo_match(targets: List[str], text: str) -> Optional[MatchResult]:
    toks = _tokens_with_spans(text)
    best: Optional[Tuple[int, int, MatchResult]] = None  # (distance, start, result)
    for target in targets:
        if len(target) < _TYPO_MIN_LEN:
            continue
        n_words = len(target.split())
        threshold = _typo_threshold(target)
        tgt = target.lower()
        for i in range(len(toks) - n_words + 1):
            cand = " ".join(t[0] for t in toks[i:i + n_words]).lower()
            if abs(len(cand) - len(tgt)) > threshold:
                continue
            dist = damerau_levenshtein(tgt, cand)
            if dist == 0 or dist > threshold:
                continue
            span = (toks[i][1], toks[i + n_words - 1][2])
            result = MatchResult(MatchCategory.TYPO, span=span,
                                 matched_surface=text[span[0]:span[1]],
                                 distance=dist)
            key = (dist, span[0], result)
            if best is None or key[:2] < best[:2]:
                best = key
    return best[2] if best else None


def match_in_text(value: str, slot: Optional[Tuple[str, str]], text: str,
                  lexicon: Optional[Lexicon] = None) -> MatchResult:
    """Locate a slot value in text, by category precedence.

    Precedence: verbatim, then entity recognition, then semantic
    understanding, then curated-other phrases, then typo (bounded
    Damerau-Levenshtein against the value or any variant).
    """
    if not value or not text:
        return UNRESOLVED
    lexicon = lexicon or Lexicon.empty()
    vlist = variants(value, slot, lexicon)

    span = _find_word_bounded(value, text)
    if span:
        return MatchResult(MatchCategory.VERBATIM, span=span,
                           matched_surface=text[span[0]:span[1]])
    order = (MatchCategory.ENTITY_RECOGNITION,
             MatchCategory.SEMANTIC_UNDERSTANDING,
             MatchCategory.OTHER)
    for category in order:
        group = [v for v in vlist if v.category is category]
        # longest surfaces first so the most specific phrase claims the span
        group.sort(key=lambda v: -len(v.surface))
        for var in group:
            span = _find_word_bounded(var.surface, text)
            if span:
                return MatchResult(category, sub_kind=var.sub_kind, span=span,
                                   matched_surface=text[span[0]:span[1]])
    typo = _typo_match([v.surface for v in vlist], text)
    if typo:
        return typo
    return UNRESOLVED
