"""Light text preprocessing: punctuation stripping, stop-word removal and
suffix stemming. Only English has a stop-word list and stemmer; for other
languages those two flags are ignored (punctuation removal is
language-neutral).
"""

from __future__ import annotations

import re
import unicodedata

SUPPORTED_STOPWORD_LANGS = {"en"}

ENGLISH_STOPWORDS = frozenset("""
a about above after again against all am an and any are aren't as at be
because been before being below between both but by can't cannot could
couldn't did didn't do does doesn't doing don't down during each few for
from further had hadn't has hasn't have haven't having he he'd he'll he's
her here here's hers herself him himself his how how's i i'd i'll i'm
i've if in into is isn't it it's its itself let's me more most mustn't my
myself no nor not of off on once only or other ought our ours ourselves
out over own same shan't she she'd she'll she's should shouldn't so some
such than that that's the their theirs them themselves then there there's
these they they'd they'll they're they've this those through to too under
until up very was wasn't we we'd we'll we're we've were weren't what
what's when when's where where's which while who who's whom why why's
with won't would wouldn't you you'd you'll you're you've your yours
yourself yourselves
""".split())

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def strip_punctuation(text: str) -> str:
    return "".join(
        " " if unicodedata.category(ch).startswith("P") else ch for ch in text
    )


def remove_stopwords(tokens: list[str], lang: str) -> list[str]:
    if lang not in SUPPORTED_STOPWORD_LANGS:
        return tokens
    return [t for t in tokens if t not in ENGLISH_STOPWORDS]


def stem_token(token: str) -> str:
    """Small suffix stripper; enough to merge plural/participle variants."""
    if token.endswith("ies") and len(token) > 5:
        return token[:-3] + "y"
    if token.endswith("ing") and len(token) > 6:
        return token[:-3]
    if token.endswith("ed") and len(token) > 5:
        return token[:-2]
    if token.endswith("es") and len(token) > 5:
        stem = token[:-2]
        if re.search(r"(s|x|z|ch|sh)$", stem):
            return stem
        return token[:-1]
    if token.endswith("s") and len(token) > 4 and not token.endswith("ss"):
        return token[:-1]
    return token


def stem_tokens(tokens: list[str], lang: str) -> list[str]:
    if lang not in SUPPORTED_STOPWORD_LANGS:
        return tokens
    return [stem_token(t) for t in tokens]


def preprocess(
    text: str,
    lang: str = "en",
    remove_punct: bool = False,
    remove_stops: bool = False,
    apply_stemming: bool = False,
) -> str:
    """Apply the requested steps and re-join into a single string.

    Returns the processed text, possibly empty when everything was
    stripped; callers decide how to handle that.
    """
    if remove_punct:
        text = strip_punctuation(text)
    if not (remove_stops or apply_stemming):
        return " ".join(text.split())
    tokens = tokenize(text)
    if remove_stops:
        tokens = remove_stopwords(tokens, lang)
    if apply_stemming:
        tokens = stem_tokens(tokens, lang)
    return " ".join(tokens)
