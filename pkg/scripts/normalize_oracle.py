#!/usr/bin/env python3
"""Reference tokenizer used to freeze expected values for scanner tests.

Implements the same normalization rules as complygate.scanner.normalize_text
but with an independent character-by-character pass (no regex), so the two
can check each other. Run it on a file to get its token count and a token
preview:

    python scripts/normalize_oracle.py src/complygate/corpus/MIT.txt
"""

import sys

QUOTE_MAP = {
    "‘": "'", "’": "'", "‚": "'",
    "“": '"', "”": '"', "„": '"',
    "‐": "-", "‑": "-", "‒": "-",
    "–": "-", "—": "-", "―": "-",
    " ": " ",
}

COMMENT_LEAD = set(" \t#*/;-<!\"'")


def is_copyright_line(line: str) -> bool:
    i = 0
    while i < len(line) and line[i] in COMMENT_LEAD:
        i += 1
    rest = line[i:].lower()
    if rest.startswith("copyright"):
        # word boundary: end of line or a non-letter next
        after = rest[len("copyright"):]
        return after == "" or not after[0].isalpha()
    for marker in ("(c)", "©"):
        if rest.startswith(marker):
            tail = rest[len(marker):].lstrip()
            if tail.startswith("copyright"):
                return True
            if tail[:1].isdigit():
                return True
    return False


def tokenize(text: str) -> list[str]:
    words = []
    for line in text.splitlines():
        if is_copyright_line(line):
            continue
        word_chars = []
        for ch in line:
            ch = QUOTE_MAP.get(ch, ch)
            ch = ch.lower()
            if ("a" <= ch <= "z") or ("0" <= ch <= "9"):
                word_chars.append(ch)
            else:
                if word_chars:
                    words.append("".join(word_chars))
                    word_chars = []
        if word_chars:
            words.append("".join(word_chars))
    return words


def main() -> None:
    for path in sys.argv[1:]:
        with open(path, encoding="utf-8", errors="replace") as fh:
            tokens = tokenize(fh.read())
        print(f"{path}: {len(tokens)} tokens")
        print(f"  first: {tokens[:8]}")
        print(f"  last:  {tokens[-8:]}")


if __name__ == "__main__":
    main()
