#!/usr/bin/env python3
"""Brute-force bigram-multiset Dice score between two files.

Independent check for complygate.scanner.similarity: builds explicit bigram
lists with the reference tokenizer and counts the multiset intersection by
removal, no Counter arithmetic. Used to freeze regression constants:

    python scripts/similarity_oracle.py LICENSE-A LICENSE-B
"""

import sys

from normalize_oracle import tokenize


def bigram_list(tokens: list[str]) -> list[tuple[str, str]]:
    return [(tokens[i], tokens[i + 1]) for i in range(len(tokens) - 1)]


def dice(a_tokens: list[str], b_tokens: list[str]) -> float:
    if not a_tokens and not b_tokens:
        return 1.0
    if not a_tokens or not b_tokens:
        return 0.0
    if a_tokens == b_tokens:
        return 1.0
    a = bigram_list(a_tokens)
    b = bigram_list(b_tokens)
    if not a and not b:
        return 0.0
    remaining = list(b)
    overlap = 0
    for bigram in a:
        if bigram in remaining:
            remaining.remove(bigram)
            overlap += 1
    return 2.0 * overlap / (len(a) + len(b))


def main() -> None:
    path_a, path_b = sys.argv[1], sys.argv[2]
    with open(path_a, encoding="utf-8", errors="replace") as fh:
        tokens_a = tokenize(fh.read())
    with open(path_b, encoding="utf-8", errors="replace") as fh:
        tokens_b = tokenize(fh.read())
    score = dice(tokens_a, tokens_b)
    print(f"dice({path_a}, {path_b}) = {score!r}")


if __name__ == "__main__":
    main()
