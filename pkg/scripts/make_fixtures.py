#!/usr/bin/env python3
"""Generate the committed test fixtures (deterministic, seeded).

* tests/fixtures/expressions.txt — 200 valid license expression strings
  for the parse/render round-trip check.
* tests/fixtures/mit_mutated/LICENSE — the bundled MIT text with 5% of its
  whitespace tokens deleted, for the degraded-match threshold check.

Rerunning reproduces identical files. The mutated fixture's expected match
score is printed via the independent similarity oracle so it can be frozen
into the tests.
"""

import random
from pathlib import Path

from normalize_oracle import tokenize
from similarity_oracle import dice

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

LICENSE_IDS = [
    "MIT",
    "Apache-2.0",
    "GPL-2.0-only",
    "GPL-2.0-or-later",
    "GPL-3.0-only",
    "LGPL-2.1-only",
    "BSD-2-Clause",
    "BSD-3-Clause",
    "MPL-2.0",
    "EPL-2.0",
    "ISC",
    "Zlib",
    "CDDL-1.0",
    "Unlicense",
    "LicenseRef-acme-proprietary",
]

EXCEPTION_IDS = [
    "Classpath-exception-2.0",
    "LLVM-exception",
    "GCC-exception-3.1",
    "Autoconf-exception-3.0",
]


def random_term(rng: random.Random) -> str:
    term = rng.choice(LICENSE_IDS)
    if not term.startswith("LicenseRef") and rng.random() < 0.15:
        term += "+"
    if not term.startswith("LicenseRef") and rng.random() < 0.2:
        term += " WITH " + rng.choice(EXCEPTION_IDS)
    return term


def random_expr(rng: random.Random, depth: int) -> str:
    if depth == 0 or rng.random() < 0.35:
        return random_term(rng)
    op = rng.choice([" AND ", " OR ", " and ", " or "])
    left = random_expr(rng, depth - 1)
    right = random_expr(rng, depth - 1)
    text = left + op + right
    if rng.random() < 0.4:
        text = "(" + text + ")"
    return text


def make_expression_corpus() -> None:
    rng = random.Random(1003)
    lines = []
    # Every plain id and a few hand-picked shapes first, then random fill.
    lines.extend(LICENSE_IDS)
    lines.extend(
        [
            "MIT OR Apache-2.0",
            "Apache-2.0 AND MIT",
            "GPL-2.0-or-later WITH Classpath-exception-2.0 OR MIT",
            "(MIT OR Apache-2.0) AND BSD-3-Clause",
            "MIT AND (ISC OR Zlib) AND BSD-2-Clause",
            "gpl-3.0-only or mit",
            "((MIT))",
        ]
    )
    while len(lines) < 200:
        lines.append(random_expr(rng, depth=rng.randint(1, 4)))
    out = FIXTURES / "expressions.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines[:200]) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(lines[:200])} expressions)")


def make_mutated_mit() -> None:
    rng = random.Random(77)
    source = ROOT / "src" / "complygate" / "corpus" / "MIT.txt"
    text = source.read_text(encoding="utf-8")
    # Delete 5% of whitespace tokens, preserving the line structure.
    lines = [line.split(" ") for line in text.splitlines()]
    positions = [
        (i, j)
        for i, words in enumerate(lines)
        for j, word in enumerate(words)
        if word
    ]
    to_delete = set(rng.sample(positions, k=round(0.05 * len(positions))))
    mutated_lines = []
    for i, words in enumerate(lines):
        kept = [w for j, w in enumerate(words) if w and (i, j) not in to_delete]
        mutated_lines.append(" ".join(kept))
    mutated = "\n".join(mutated_lines) + "\n"
    out = FIXTURES / "mit_mutated" / "LICENSE"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(mutated, encoding="utf-8")

    score = dice(tokenize(mutated), tokenize(source.read_text(encoding="utf-8")))
    print(f"wrote {out}")
    print(f"oracle dice score vs canonical MIT: {score!r}")
    # Cross-check discrimination against the closest sibling license.
    isc = (ROOT / "src" / "complygate" / "corpus" / "ISC.txt").read_text(encoding="utf-8")
    print(f"oracle dice score vs ISC: {dice(tokenize(mutated), tokenize(isc))!r}")


if __name__ == "__main__":
    make_expression_corpus()
    make_mutated_mit()
