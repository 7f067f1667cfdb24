"""Deterministic tweet normalization, tokenization, and character n-grams.

Every downstream feature extractor shares this tokenizer so lexicon
matching, frequency analysis, TFIDF, and embeddings all see the same
alphabet.  Rules: lowercase everything; collapse URLs to ``<url>`` and
@-mentions to ``<usr>``; keep hashtag bodies as tokens; strip punctuation
at word boundaries but keep apostrophes inside words; treat ``*`` as a
word character so censored profanity like "f***" survives.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

__all__ = [
    "TokenKind",
    "Token",
    "TokenStream",
    "WORD_KINDS",
    "tokenize",
    "character_ngrams",
]


class TokenKind(enum.Enum):
    WORD = "word"
    MENTION = "mention"
    URL = "url"
    HASHTAG = "hashtag"
    NUMBER = "number"
    SYMBOL = "emoji-or-symbol"


# Kinds whose surfaces participate in lexicon matching and word statistics.
WORD_KINDS = frozenset({TokenKind.WORD, TokenKind.HASHTAG})


@dataclass(frozen=True)
class Token:
    surface: str
    kind: TokenKind


@dataclass(frozen=True)
class TokenStream:
    """Ordered tokens of one tweet, in source-text order."""

    tokens: tuple[Token, ...]
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def surfaces(self) -> list[str]:
        """All token surfaces in order (includes <url>, <usr>, symbols)."""
        return [t.surface for t in self.tokens]

    def words(self) -> list[str]:
        """Surfaces of word-like tokens only (words and hashtag bodies)."""
        return [t.surface for t in self.tokens if t.kind in WORD_KINDS]


_TOKEN_RE = re.compile(
    r"""
    (?P<url>https?://\S+|www\.\S+)
  | (?P<mention>@\w+)
  | (?P<hashtag>\#[\w*]+)
  | (?P<word>[\w*]+(?:'[\w*]+)*)
  | (?P<other>[^\w\s]+)
    """,
    re.VERBOSE,
)

_DIGITS_RE = re.compile(r"\d+$")
_ASCII_PUNCT = set(r"""!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~""")


def tokenize(text: str, source_id: str = "") -> TokenStream:
    """Tokenize one tweet.

    Empty or whitespace-only input yields an empty stream.  Runs of ASCII
    punctuation are dropped; runs containing non-ASCII symbols (emoji,
    dingbats) are kept as single emoji-or-symbol tokens.
    """
    tokens: list[Token] = []
    for m in _TOKEN_RE.finditer(text.lower()):
        if m.lastgroup == "url":
            tokens.append(Token("<url>", TokenKind.URL))
        elif m.lastgroup == "mention":
            tokens.append(Token("<usr>", TokenKind.MENTION))
        elif m.lastgroup == "hashtag":
            tokens.append(Token(m.group("hashtag")[1:], TokenKind.HASHTAG))
        elif m.lastgroup == "word":
            surface = m.group("word")
            kind = TokenKind.NUMBER if _DIGITS_RE.fullmatch(surface) else TokenKind.WORD
            tokens.append(Token(surface, kind))
        else:
            residue = "".join(c for c in m.group("other") if c not in _ASCII_PUNCT)
            if residue:
                tokens.append(Token(residue, TokenKind.SYMBOL))
    return TokenStream(tokens=tuple(tokens), source_id=source_id)


def character_ngrams(token: str, n_min: int = 3, n_max: int = 6) -> list[str]:
    """Boundary-marked character n-grams of a word token, plus the whole token.

    The token is wrapped as ``<token>``; all contiguous n-grams for each n
    in [n_min, n_max] are emitted in increasing-n, left-to-right order,
    followed by the wrapped whole token unless it already appeared as an
    n-gram (a token of length n-2 wrapped is itself the only n-gram).

    Args:
        token: word surface, without boundary markers.
        n_min: smallest n-gram size, >= 1.
        n_max: largest n-gram size, >= n_min.
    """
    if not (1 <= n_min <= n_max):
        raise ValueError(f"need 1 <= n_min <= n_max, got {n_min}..{n_max}")
    wrapped = f"<{token}>"
    L = len(wrapped)
    grams: list[str] = []
    for n in range(n_min, n_max + 1):
        for i in range(L - n + 1):
            grams.append(wrapped[i:i + n])
    if wrapped not in grams:
        grams.append(wrapped)
    return grams
