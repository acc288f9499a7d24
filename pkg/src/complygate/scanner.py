"""License evidence detection in source trees.

Two detection methods feed the clearance workflow and the policy engine:

* ``tag`` — exact ``SPDX-License-Identifier:`` lines in any text file.
* ``text_match`` — full-text similarity of license-like files
  (``LICENSE*``, ``COPYING*``, ``NOTICE*``) against a bundled corpus of
  canonical license texts, scored with the Sørensen–Dice coefficient
  over token-bigram multisets.

Findings are deterministic: files are visited in lexicographic path
order and scores depend only on file contents and the corpus.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .licexpr import (
    Conjunction,
    ExpressionSyntaxError,
    LicenseExpression,
    parse_expression,
    render,
)

__all__ = [
    "CorpusEntry",
    "Corpus",
    "ScanConfig",
    "ScanFinding",
    "ScanWarning",
    "ScanResult",
    "normalize_text",
    "similarity",
    "extract_tags",
    "scan_tree",
    "load_corpus",
    "bundled_corpus",
]

SPDX_TAG_MARKER = "SPDX-License-Identifier:"

# Typographic characters folded to ASCII before tokenizing.
_TYPOGRAPHIC = str.maketrans(
    {
        "‘": "'",
        "’": "'",
        "‚": "'",
        "“": '"',
        "”": '"',
        "„": '"',
        "‐": "-",
        "‑": "-",
        "‒": "-",
        "–": "-",
        "—": "-",
        "―": "-",
        " ": " ",
    }
)

# A copyright notice line: the word "copyright" (or a (c)/© marker and then
# the word) at the start of the line, modulo leading comment punctuation.
_COPYRIGHT_LINE_RE = re.compile(
    r"^[\s#*/;\-<!\"']*(copyright\b|\(c\)\s*copyright\b|©\s*copyright\b|©\s*\d|\(c\)\s*\d)",
    re.IGNORECASE,
)

_NON_WORD_RE = re.compile(r"[^a-z0-9]+")

_LICENSE_FILE_RE = re.compile(r"^(license|copying|notice)", re.IGNORECASE)

_TRAILING_COMMENT_CLOSERS = ("*/", "-->", "#")


@dataclass(frozen=True)
class ScanConfig:
    """Thresholds and limits for tree scanning."""

    match_floor: float = 0.80
    confident: float = 0.95
    max_file_bytes: int = 4 * 1024 * 1024


@dataclass(frozen=True)
class CorpusEntry:
    license_id: str
    canonical_text: str
    normalized_tokens: tuple[str, ...]


@dataclass(frozen=True)
class ScanFinding:
    """One piece of license evidence in a file.

    ``copyright_lines`` carries the raw copyright notice lines seen in the
    same file, for attribution documents.
    """

    path: str
    method: str  # "tag" | "text_match"
    expression: LicenseExpression
    score: float
    span: tuple[int, int]  # (start_line, end_line), 1-based inclusive
    copyright_lines: tuple[str, ...] = ()

    def rendered(self) -> str:
        return render(self.expression)


@dataclass(frozen=True)
class ScanWarning:
    path: str
    code: str  # "MalformedTag" | "IoError" | "FileTooLarge"
    detail: str


@dataclass
class ScanResult:
    findings: list[ScanFinding]
    summary: LicenseExpression | None  # None = unknown
    warnings: list[ScanWarning] = field(default_factory=list)


class Corpus:
    """Canonical license texts, indexed by id."""

    def __init__(self, entries: Iterable[CorpusEntry]) -> None:
        self.entries: dict[str, CorpusEntry] = {}
        self._lower_index: dict[str, str] = {}
        for entry in entries:
            self.entries[entry.license_id] = entry
            self._lower_index[entry.license_id.lower()] = entry.license_id

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, license_id: str) -> bool:
        return license_id in self.entries

    def ids(self) -> list[str]:
        return sorted(self.entries)

    def get(self, license_id: str) -> CorpusEntry | None:
        return self.entries.get(license_id)

    def get_fuzzy(self, license_id: str) -> tuple[CorpusEntry | None, bool]:
        """Exact-case lookup, then a case-insensitive fallback.

        Returns ``(entry, fallback_used)``; callers surface a warning when
        the fallback matched.
        """
        entry = self.entries.get(license_id)
        if entry is not None:
            return entry, False
        canonical = self._lower_index.get(license_id.lower())
        if canonical is not None:
            return self.entries[canonical], True
        return None, False


def normalize_text(text: str) -> list[str]:
    """Reduce text to the ordered word list used for matching.

    Copyright notice lines are dropped, typographic quotes and dashes are
    folded to ASCII, everything is lowercased, punctuation becomes word
    breaks, and whitespace collapses.
    """
    kept_lines = [
        line for line in text.splitlines() if not _COPYRIGHT_LINE_RE.match(line)
    ]
    folded = "\n".join(kept_lines).translate(_TYPOGRAPHIC).lower()
    return [w for w in _NON_WORD_RE.split(folded) if w]


def copyright_lines(text: str) -> list[str]:
    """Raw copyright notice lines, as written (for attribution output)."""
    return [
        line.strip()
        for line in text.splitlines()
        if _COPYRIGHT_LINE_RE.match(line) and line.strip()
    ]


def _bigrams(tokens: Sequence[str]) -> Counter:
    return Counter(zip(tokens, tokens[1:]))


def similarity(a: Sequence[str], b: Sequence[str]) -> float:
    """Sørensen–Dice coefficient over token-bigram multisets.

    Symmetric; 1.0 for identical non-empty sequences, 0.0 when exactly one
    side is empty, and 1.0 when both are.
    """
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    if list(a) == list(b):
        return 1.0
    ca, cb = _bigrams(a), _bigrams(b)
    total = sum(ca.values()) + sum(cb.values())
    if total == 0:
        # Two different single-token sequences: no bigrams to compare.
        return 0.0
    overlap = sum((ca & cb).values())
    return 2.0 * overlap / total


def extract_tags(
    file_text: str, path: str
) -> tuple[list[ScanFinding], list[ScanWarning]]:
    """Findings for every ``SPDX-License-Identifier:`` line in a file.

    Malformed expressions become ``MalformedTag`` warnings, never errors.
    """
    findings: list[ScanFinding] = []
    warnings: list[ScanWarning] = []
    cr_lines = tuple(copyright_lines(file_text))
    for lineno, line in enumerate(file_text.splitlines(), start=1):
        idx = line.find(SPDX_TAG_MARKER)
        if idx < 0:
            continue
        remainder = line[idx + len(SPDX_TAG_MARKER):].strip()
        changed = True
        while changed:
            changed = False
            for closer in _TRAILING_COMMENT_CLOSERS:
                if remainder.endswith(closer):
                    remainder = remainder[: -len(closer)].rstrip()
                    changed = True
        try:
            expression = parse_expression(remainder)
        except ExpressionSyntaxError as err:
            warnings.append(
                ScanWarning(path, "MalformedTag", f"line {lineno}: {err}")
            )
            continue
        findings.append(
            ScanFinding(
                path=path,
                method="tag",
                expression=expression,
                score=1.0,
                span=(lineno, lineno),
                copyright_lines=cr_lines,
            )
        )
    return findings, warnings


def _looks_binary(chunk: bytes) -> bool:
    return b"\x00" in chunk


def _is_license_like(name: str) -> bool:
    return bool(_LICENSE_FILE_RE.match(name))


def scan_tree(
    root: Path | str, corpus: Corpus | None = None, config: ScanConfig | None = None
) -> ScanResult:
    """Scan a directory tree for license evidence.

    Tag extraction runs on every text file; full-text matching runs on
    license-like files against the corpus. The summary is the conjunction
    of distinct confident findings (score at or above ``config.confident``),
    or ``None`` when there are none. Unreadable files become warnings and
    the scan continues.
    """
    root = Path(root)
    corpus = corpus if corpus is not None else bundled_corpus()
    config = config or ScanConfig()
    findings: list[ScanFinding] = []
    warnings: list[ScanWarning] = []

    for file_path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = file_path.relative_to(root).as_posix()
        try:
            raw = file_path.read_bytes()
        except OSError as err:
            warnings.append(ScanWarning(rel, "IoError", str(err)))
            continue
        if len(raw) > config.max_file_bytes:
            warnings.append(
                ScanWarning(rel, "FileTooLarge", f"{len(raw)} bytes, skipped")
            )
            continue
        if _looks_binary(raw[:8192]):
            continue
        text = raw.decode("utf-8", errors="replace")

        tag_findings, tag_warnings = extract_tags(text, rel)
        findings.extend(tag_findings)
        warnings.extend(tag_warnings)

        if _is_license_like(file_path.name):
            match = _best_corpus_match(text, corpus, config)
            if match is not None:
                findings.append(match._replace_path(rel))

    summary = _summarize(findings, config)
    findings.sort(key=lambda f: (f.path, f.method, f.span))
    warnings.sort(key=lambda w: (w.path, w.code, w.detail))
    return ScanResult(findings=findings, summary=summary, warnings=warnings)


@dataclass(frozen=True)
class _UnplacedFinding:
    expression: LicenseExpression
    score: float
    span: tuple[int, int]
    copyright_lines: tuple[str, ...]

    def _replace_path(self, path: str) -> ScanFinding:
        return ScanFinding(
            path=path,
            method="text_match",
            expression=self.expression,
            score=self.score,
            span=self.span,
            copyright_lines=self.copyright_lines,
        )


def _best_corpus_match(
    text: str, corpus: Corpus, config: ScanConfig
) -> _UnplacedFinding | None:
    tokens = normalize_text(text)
    if not tokens:
        return None
    best_id: str | None = None
    best_score = 0.0
    for license_id in corpus.ids():
        score = similarity(tokens, corpus.entries[license_id].normalized_tokens)
        if score > best_score:
            best_id, best_score = license_id, score
    if best_id is None or best_score < config.match_floor:
        return None
    line_count = max(1, text.count("\n") + (0 if text.endswith("\n") else 1))
    return _UnplacedFinding(
        expression=parse_expression(best_id),
        score=best_score,
        span=(1, line_count),
        copyright_lines=tuple(copyright_lines(text)),
    )


def _summarize(
    findings: list[ScanFinding], config: ScanConfig
) -> LicenseExpression | None:
    confident = [f for f in findings if f.score >= config.confident]
    if not confident:
        return None
    distinct: dict[str, LicenseExpression] = {}
    for finding in confident:
        distinct.setdefault(finding.rendered(), finding.expression)
    ordered = [distinct[key] for key in sorted(distinct)]
    summary = ordered[0]
    for expr in ordered[1:]:
        summary = Conjunction(summary, expr)
    return summary


def load_corpus(directory: Path | str) -> Corpus:
    """Load ``<license-id>.txt`` files from a directory."""
    directory = Path(directory)
    entries = []
    for path in sorted(directory.glob("*.txt")):
        text = path.read_text(encoding="utf-8", errors="replace")
        entries.append(
            CorpusEntry(
                license_id=path.stem,
                canonical_text=text,
                normalized_tokens=tuple(normalize_text(text)),
            )
        )
    return Corpus(entries)


_BUNDLED: Corpus | None = None


def bundled_corpus() -> Corpus:
    """The corpus shipped with the package (loaded once per process)."""
    global _BUNDLED
    if _BUNDLED is None:
        entries = []
        corpus_files = resources.files(__package__).joinpath("corpus")
        for item in sorted(corpus_files.iterdir(), key=lambda p: p.name):
            if item.name.endswith(".txt"):
                text = item.read_text(encoding="utf-8")
                entries.append(
                    CorpusEntry(
                        license_id=item.name[:-4],
                        canonical_text=text,
                        normalized_tokens=tuple(normalize_text(text)),
                    )
                )
        _BUNDLED = Corpus(entries)
    return _BUNDLED
