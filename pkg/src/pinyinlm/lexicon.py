"""Pinyin syllable inventory and character-to-pinyin mappings.

A lexicon file is UTF-8 text with one row per (character, reading):

    <char>\\t<syllable>[\\t<rank>]

Rows for the same character are ordered by preference; the first row is the
default reading used when annotating raw text. Lines starting with ``#`` and
blank lines are ignored. Character order within a pronunciation class follows
file order, so frequency-sorted files give frequency-sorted candidate classes.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

# Syllable onsets recognized by the splitter, two-letter onsets first so the
# longest-prefix rule picks "zh" over "z".
INITIALS = (
    "zh", "ch", "sh",
    "b", "p", "m", "f", "d", "t", "n", "l",
    "g", "k", "h", "j", "q", "x", "r",
    "z", "c", "s", "y", "w",
)

_INITIAL_SET = frozenset(INITIALS)
_VOWELS = frozenset("aeiouv")  # "v" stands in for u-with-umlaut (lv, nv, lve)

PERFECT = "perfect"
ABBREV = "abbrev"
MODES = (PERFECT, ABBREV)


class LexiconError(ValueError):
    """Malformed lexicon data, or a lookup of an unknown syllable/key."""


@dataclass(frozen=True)
class PinyinSyllable:
    """A full (perfect) pinyin syllable split into initial and final."""

    text: str
    initial: str
    final: str

    def __post_init__(self):
        if self.initial + self.final != self.text:
            raise LexiconError(f"syllable {self.text!r} != {self.initial!r} + {self.final!r}")


@dataclass(frozen=True)
class PinyinToken:
    """One unit of user input: a full syllable or an abbreviation key."""

    mode: str
    value: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise LexiconError(f"unknown pinyin mode {self.mode!r}")

    @property
    def is_perfect(self) -> bool:
        return self.mode == PERFECT


def split_syllable(text: str) -> tuple[str, str] | None:
    """Split a syllable into (initial, final) by longest-prefix initial match.

    Returns None when the text is not a plausible toneless pinyin syllable
    (empty final, final not starting with a vowel, non-alphabetic input).
    """
    if not text or not text.isascii() or not text.isalpha() or text != text.lower():
        return None
    initial = ""
    for cand in INITIALS:
        if text.startswith(cand):
            initial = cand
            break
    final = text[len(initial):]
    if not final or final[0] not in _VOWELS:
        return None
    return initial, final


def abbreviation_of(syllable: PinyinSyllable) -> str:
    """Abbreviation key for a syllable: the initial, or for zero-initial
    syllables the first letter of the final ("an" -> "a")."""
    return syllable.initial if syllable.initial else syllable.final[0]


class Lexicon:
    """Immutable character/pinyin tables shared by training and decoding.

    Attributes
    ----------
    char_to_readings : dict mapping character -> ordered readings (first =
        default), perfect_to_chars : syllable text -> ordered characters,
        abbrev_to_perfect : abbreviation key -> ordered syllable texts,
        abbrev_to_chars : abbreviation key -> ordered characters (derived
        union of the perfect classes, duplicates removed, order stable).
    """

    def __init__(self, rows: list[tuple[str, str]]):
        if not rows:
            raise LexiconError("empty lexicon: no (character, syllable) rows")
        char_to_readings: dict[str, list[PinyinSyllable]] = {}
        perfect_to_chars: dict[str, list[str]] = {}
        seen_pairs: set[tuple[str, str]] = set()
        for lineno, (char, text) in enumerate(rows, start=1):
            if len(char) != 1:
                raise LexiconError(f"row {lineno}: character field {char!r} must be one codepoint")
            parts = split_syllable(text)
            if parts is None:
                raise LexiconError(f"row {lineno}: syllable {text!r} is not decomposable")
            if (char, text) in seen_pairs:
                raise LexiconError(f"row {lineno}: duplicate pair ({char!r}, {text!r})")
            seen_pairs.add((char, text))
            syl = PinyinSyllable(text, *parts)
            char_to_readings.setdefault(char, []).append(syl)
            bucket = perfect_to_chars.setdefault(text, [])
            if char not in bucket:
                bucket.append(char)

        abbrev_to_perfect: dict[str, list[str]] = {}
        for text in perfect_to_chars:
            initial, final = split_syllable(text)  # validated above
            key = initial if initial else final[0]
            abbrev_to_perfect.setdefault(key, []).append(text)

        abbrev_to_chars: dict[str, list[str]] = {}
        for key, texts in abbrev_to_perfect.items():
            merged: dict[str, None] = {}
            for text in texts:
                for char in perfect_to_chars[text]:
                    merged[char] = None
            abbrev_to_chars[key] = list(merged)

        self.char_to_readings = char_to_readings
        self.perfect_to_chars = perfect_to_chars
        self.abbrev_to_perfect = abbrev_to_perfect
        self.abbrev_to_chars = abbrev_to_chars

    # -- syllable-level queries -------------------------------------------------

    def decompose(self, syllable_text: str) -> tuple[str, str]:
        """(initial, final) of a syllable in the perfect inventory."""
        if syllable_text not in self.perfect_to_chars:
            raise LexiconError(f"unknown syllable {syllable_text!r}")
        parts = split_syllable(syllable_text)
        assert parts is not None  # load() rejected non-decomposable rows
        return parts

    def abbreviation_key(self, syllable_text: str) -> str:
        initial, final = self.decompose(syllable_text)
        return initial if initial else final[0]

    # -- class and annotation queries -------------------------------------------

    def legitimate_chars(self, token: PinyinToken) -> list[str]:
        """Characters allowed at a position whose pinyin is `token`.

        Perfect tokens map to the characters with that exact syllable;
        abbreviated tokens map to the union over all syllables sharing the
        key. Raises LexiconError for values absent from the inventory.
        """
        table = self.perfect_to_chars if token.is_perfect else self.abbrev_to_chars
        chars = table.get(token.value)
        if chars is None:
            kind = "syllable" if token.is_perfect else "abbreviation key"
            raise LexiconError(f"unknown {kind} {token.value!r}")
        return chars

    def annotate(self, sentence: str) -> list[PinyinSyllable | None]:
        """Default reading per character; None for characters with no reading."""
        out: list[PinyinSyllable | None] = []
        for char in sentence:
            readings = self.char_to_readings.get(char)
            out.append(readings[0] if readings else None)
        return out

    def readings_match(self, char: str, token: PinyinToken) -> bool:
        """True when ANY reading of `char` matches the token (used by the
        decoding constraint; heteronyms match through every reading)."""
        for syl in self.char_to_readings.get(char, ()):
            if token.is_perfect:
                if syl.text == token.value:
                    return True
            elif abbreviation_of(syl) == token.value:
                return True
        return False

    def token_for(self, syllable: PinyinSyllable, mode: str) -> PinyinToken:
        if mode == PERFECT:
            return PinyinToken(PERFECT, syllable.text)
        return PinyinToken(ABBREV, abbreviation_of(syllable))

    def stats(self) -> dict[str, int]:
        return {
            "characters": len(self.char_to_readings),
            "syllables": len(self.perfect_to_chars),
            "abbreviation_keys": len(self.abbrev_to_chars),
        }


def parse_lexicon_rows(lines) -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (2, 3):
            raise LexiconError(f"line {lineno}: expected 2 or 3 tab-separated fields, got {len(fields)}")
        char, syllable = fields[0], fields[1]
        if len(fields) == 3:
            try:
                int(fields[2])
            except ValueError:
                raise LexiconError(f"line {lineno}: rank {fields[2]!r} is not an integer") from None
        rows.append((char, syllable))
    return rows


def load_lexicon(path: str | Path) -> Lexicon:
    """Load a lexicon file. Deterministic: the same file yields identical
    ordered tables. Raises LexiconError with a line number on bad rows and on
    empty files."""
    with open(path, encoding="utf-8") as fh:
        rows = parse_lexicon_rows(fh)
    if not rows:
        raise LexiconError(f"{path}: no lexicon rows")
    return Lexicon(rows)


def default_lexicon_path() -> Path:
    """Path of the small lexicon bundled for tests and demos."""
    return Path(__file__).parent / "data" / "lexicon_small.tsv"
