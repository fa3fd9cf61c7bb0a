"""WordNet-backed lexicon: WNDB file parsing, morphy lemmatization, synset
lookup, alias tables, and the pairwise word-match predicate used by the miner.

The lexicon is built from the plain-text WNDB database files (``index.noun``,
``index.verb``, ``noun.exc``, ``verb.exc``) plus an optional alias file with
one comma-separated equivalence class per line. After loading, a Lexicon is
immutable and safe for concurrent reads.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:['_\-][a-z0-9]+)*")


class LexiconError(Exception):
    """Fatal problem loading WordNet or alias files."""


class Pos(enum.Enum):
    NOUN = "n"
    VERB = "v"


class MatchCondition(enum.Enum):
    """Which rule matched a word pair; lower rank wins when several hold."""

    RAW = 0
    LEMMA = 1
    SYNSET = 2
    ALIAS = 3
    NONE = 4


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    condition: MatchCondition


NO_MATCH = MatchResult(False, MatchCondition.NONE)

# WNDB detachment rules: (suffix, replacement), tried in order.
_DETACHMENT_RULES: dict[Pos, list[tuple[str, str]]] = {
    Pos.NOUN: [
        ("s", ""),
        ("ses", "s"),
        ("ves", "f"),
        ("xes", "x"),
        ("zes", "z"),
        ("ches", "ch"),
        ("shes", "sh"),
        ("men", "man"),
        ("ies", "y"),
    ],
    Pos.VERB: [
        ("s", ""),
        ("ies", "y"),
        ("es", "e"),
        ("es", ""),
        ("ed", "e"),
        ("ed", ""),
        ("ing", "e"),
        ("ing", ""),
    ],
}


def normalize_token(token: str) -> str:
    """Lowercase, trim surrounding punctuation, collapse inner whitespace."""
    token = token.strip().lower()
    token = token.strip("\"'`.,:;!?()[]{}<>/\\|~*+=#&%$@^")
    return " ".join(token.split())


def tokenize(text: str) -> list[str]:
    """Split text into lowercase word tokens (apostrophes/hyphens kept)."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Lexicon:
    """Parsed WordNet indices, exception maps, and the alias table.

    Synset ids are strings like ``"02958343-n"`` so that noun and verb
    offsets never collide. All stored words are lowercase and trimmed.
    """

    noun_index: dict[str, list[str]] = field(default_factory=dict)
    verb_index: dict[str, list[str]] = field(default_factory=dict)
    noun_exceptions: dict[str, str] = field(default_factory=dict)
    verb_exceptions: dict[str, str] = field(default_factory=dict)
    aliases: dict[str, set[str]] = field(default_factory=dict)
    skipped_lines: int = 0
    # memos over the immutable tables; benign to race, never serialized
    _morphy_cache: dict[tuple[str, Pos], str | None] = field(
        default_factory=dict, repr=False, compare=False)
    _synset_cache: dict[tuple[str, Pos], frozenset[str]] = field(
        default_factory=dict, repr=False, compare=False)

    def _index(self, pos: Pos) -> dict[str, list[str]]:
        return self.noun_index if pos is Pos.NOUN else self.verb_index

    def _exceptions(self, pos: Pos) -> dict[str, str]:
        return self.noun_exceptions if pos is Pos.NOUN else self.verb_exceptions

    def _in_index(self, word: str, pos: Pos) -> bool:
        index = self._index(pos)
        return word in index or word.replace(" ", "_") in index

    def _index_ids(self, word: str, pos: Pos) -> list[str]:
        index = self._index(pos)
        if word in index:
            return index[word]
        return index.get(word.replace(" ", "_"), [])

    def morphy(self, word: str, pos: Pos) -> str | None:
        """Return the base form of ``word`` for the given part of speech.

        Resolution order: exception list, then one application of the WNDB
        detachment rules (first candidate found in the index), then the word
        itself if it is in the index. None when nothing resolves.
        """
        word = normalize_token(word)
        if not word:
            return None
        key = (word, pos)
        if key in self._morphy_cache:
            return self._morphy_cache[key]
        result = self._morphy_uncached(word, pos)
        self._morphy_cache[key] = result
        return result

    def _morphy_uncached(self, word: str, pos: Pos) -> str | None:
        exc = self._exceptions(pos).get(word)
        if exc is not None:
            return exc
        for suffix, replacement in _DETACHMENT_RULES[pos]:
            if word.endswith(suffix):
                candidate = word[: len(word) - len(suffix)] + replacement
                if candidate and self._in_index(candidate, pos):
                    return candidate
        if self._in_index(word, pos):
            return word
        return None

    def synsets(self, word: str, pos: Pos) -> frozenset[str]:
        """Synset ids of ``word`` and, when different, of its morphy lemma."""
        word = normalize_token(word)
        key = (word, pos)
        cached = self._synset_cache.get(key)
        if cached is not None:
            return cached
        ids = set(self._index_ids(word, pos))
        lemma = self.morphy(word, pos)
        if lemma is not None and lemma != word:
            ids.update(self._index_ids(lemma, pos))
        result = frozenset(ids)
        self._synset_cache[key] = result
        return result

    def has_entry(self, word: str, pos: Pos | None = None) -> bool:
        """True when the word (directly or via morphy) is in the index."""
        poses = (pos,) if pos is not None else (Pos.NOUN, Pos.VERB)
        return any(self.morphy(word, p) is not None for p in poses)

    def words_match(self, w1: str, w2: str, pos_hint: Pos | None = None) -> MatchResult:
        """Match two tokens by raw text, lemma, synset overlap, or alias.

        The reported condition is the first satisfied rule in the order
        RAW < LEMMA < SYNSET < ALIAS. Symmetric in its arguments.
        """
        n1, n2 = normalize_token(w1), normalize_token(w2)
        if not n1 or not n2:
            return NO_MATCH
        if n1 == n2:
            return MatchResult(True, MatchCondition.RAW)

        poses = (pos_hint,) if pos_hint is not None else (Pos.NOUN, Pos.VERB)
        lemmas1 = {p: self.morphy(n1, p) for p in poses}
        lemmas2 = {p: self.morphy(n2, p) for p in poses}
        for p in poses:
            if lemmas1[p] is not None and lemmas1[p] == lemmas2[p]:
                return MatchResult(True, MatchCondition.LEMMA)

        syns1: set[str] = set()
        syns2: set[str] = set()
        for p in poses:
            syns1 |= self.synsets(n1, p)
            syns2 |= self.synsets(n2, p)
        if syns1 & syns2:
            return MatchResult(True, MatchCondition.SYNSET)

        forms1 = {n1} | {l for l in lemmas1.values() if l is not None}
        forms2 = {n2} | {l for l in lemmas2.values() if l is not None}
        for a in forms1:
            others = self.aliases.get(a)
            if others and not others.isdisjoint(forms2):
                return MatchResult(True, MatchCondition.ALIAS)
        return NO_MATCH


def _parse_index_file(path: Path, pos: Pos, lexicon: Lexicon) -> None:
    index = lexicon._index(pos)
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            if line.startswith("  "):
                continue  # license header
            if line.startswith(" "):
                raise LexiconError(
                    f"{path}: malformed header at line {lineno} "
                    "(header lines must begin with two spaces)"
                )
            fields = line.split()
            try:
                lemma = fields[0]
                n_synsets = int(fields[2])
                n_pointers = int(fields[3])
                offsets = fields[6 + n_pointers:]
                if n_synsets < 1 or len(offsets) != n_synsets:
                    raise ValueError("synset count mismatch")
                ids = [f"{int(off):08d}-{pos.value}" for off in offsets]
            except (IndexError, ValueError):
                lexicon.skipped_lines += 1
                log.debug("%s:%d: skipping unparseable line", path, lineno)
                continue
            index[lemma.lower()] = ids


def _parse_exception_file(path: Path, pos: Pos, lexicon: Lexicon) -> None:
    exceptions = lexicon._exceptions(pos)
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            terms = line.split()
            if not terms:
                continue
            if len(terms) < 2:
                lexicon.skipped_lines += 1
                log.debug("%s:%d: skipping unparseable line", path, lineno)
                continue
            inflected, bases = terms[0].lower(), [t.lower() for t in terms[1:]]
            # prefer the first base form that has an index entry
            base = next((b for b in bases if lexicon._in_index(b, pos)), bases[0])
            exceptions[inflected] = base


def load_wordnet(directory: str | Path) -> Lexicon:
    """Parse WNDB files (index.noun, index.verb, noun.exc, verb.exc).

    Raises LexiconError naming the file when one is missing or its header
    is malformed. Unparseable entry lines are skipped and counted in
    ``Lexicon.skipped_lines``.
    """
    directory = Path(directory)
    required = ["index.noun", "index.verb", "noun.exc", "verb.exc"]
    for name in required:
        if not (directory / name).is_file():
            raise LexiconError(f"missing WordNet file: {directory / name}")

    lexicon = Lexicon()
    _parse_index_file(directory / "index.noun", Pos.NOUN, lexicon)
    _parse_index_file(directory / "index.verb", Pos.VERB, lexicon)
    _parse_exception_file(directory / "noun.exc", Pos.NOUN, lexicon)
    _parse_exception_file(directory / "verb.exc", Pos.VERB, lexicon)
    if lexicon.skipped_lines:
        log.warning("skipped %d unparseable WordNet lines", lexicon.skipped_lines)
    return lexicon


def load_aliases(lexicon: Lexicon, path: str | Path) -> Lexicon:
    """Merge an alias file into the lexicon's alias table.

    Each non-blank line is a comma-separated equivalence class; all names on
    a line become mutual aliases (symmetric closure per line, no transitivity
    across lines). Loading the same file twice is a no-op.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LexiconError(f"cannot read alias file {path}: {exc}") from exc
    for line in text.splitlines():
        names = [normalize_token(part) for part in line.split(",")]
        names = [n for n in names if n]
        for name in names:
            group = lexicon.aliases.setdefault(name, set())
            group.update(other for other in names if other != name)
    return lexicon
