"""Article text cleaning and short-text normalization.

Article text: wiki markup and maintenance constructs are stripped, then the
text is tokenized, lowercased, stopword-filtered and Porter-stemmed.

Short texts follow per-platform rules:

- twitter: ``@name`` becomes ``MENTION``, the ``RT`` marker is dropped and
  ``#tag`` keeps ``tag`` only if it is an English word (camel-case tags are
  split first, every part must be a word).
- youtube, flickr: auto-generated media file names are bypassed, a media
  suffix is removed when the remaining name is an English word (otherwise the
  token is dropped) and machine tags such as ``hidden:filter=Boost`` are ignored.
- every platform: URLs are removed and non-English texts are emptied.

Utterance corpus format (UTF-8, tab separated, one record per line)::

    utterance_id  platform  kind  user_id  raw text
"""

import functools
import logging
import re
import string
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import mwparserfromhell
from nltk.stem.porter import PorterStemmer

from .errors import SnapshotFormatError
from .records import numbered_lines

logger = logging.getLogger(__name__)

MENTION = 'MENTION'
DEFAULT_LATIN_RATIO = 0.85
DEFAULT_STOPWORD_MIN_TOKENS = 3

MEDIA_EXTENSIONS = (
    'jpg', 'jpeg', 'png', 'gif', 'bmp', 'tif', 'tiff', 'heic',
    'avi', 'mov', 'mp4', 'mpg', 'mpeg', 'wmv', '3gp',
)
_EXT = '|'.join(MEDIA_EXTENSIONS)

URL_RE = re.compile(r'(?:https?://|www\.)\S+', re.IGNORECASE)
MENTION_RE = re.compile(r'^@+\w')
RETWEET_RE = re.compile(r'^rt:?$', re.IGNORECASE)
AUTO_FILENAME_RE = re.compile(rf'^(?:img|mov|dsc)[_-]?\d+\.(?:{_EXT})$', re.IGNORECASE)
FILE_SUFFIX_RE = re.compile(rf'^(.+)\.(?:{_EXT})$', re.IGNORECASE)
MACHINE_TAG_RE = re.compile(r'^[a-z][\w-]*:[\w-]+=\S*$', re.IGNORECASE)
CAMEL_PART_RE = re.compile(r'[A-Z][a-z]+|[a-z]+|[A-Z]+(?![a-z])|\d+')
ARTICLE_TOKEN_RE = re.compile(r'[^\W_]+')
WORD_RE = re.compile(r'[^\W\d_]+')

PUNCTUATION = string.punctuation + '‘’“”…«»'
TWITTER_WRAPPERS = PUNCTUATION.replace('@', '').replace('#', '')
# Latin script ends with Latin Extended-B.
LATIN_MAX_CODEPOINT = 0x24F
HIDDEN_LINK_PREFIXES = ('category:', 'file:', 'image:')


class Platform(str, Enum):
    TWITTER = 'twitter'
    YOUTUBE = 'youtube'
    FLICKR = 'flickr'
    GENERIC = 'generic'


class UtteranceKind(str, Enum):
    TWEET = 'tweet'
    TITLE = 'title'
    DESCRIPTION = 'description'
    TAG = 'tag'


@dataclass(frozen=True)
class Utterance:
    """One short text. ``raw`` is kept verbatim; ``normalized`` is filled by preprocessing."""

    utterance_id: str
    platform: Platform
    kind: UtteranceKind
    raw: str
    user_id: str = ''
    normalized: Tuple[str, ...] = ()
    english: Optional[bool] = None


def _read_word_file(name: str) -> FrozenSet[str]:
    text = resources.files('entsense').joinpath('data', name).read_text(encoding='utf-8')
    return frozenset(
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith('#')
    )


STOPWORDS: FrozenSet[str] = _read_word_file('stopwords.txt')
DEFAULT_WORDLIST: FrozenSet[str] = _read_word_file('wordlist.txt')

_stemmer = PorterStemmer()


@functools.lru_cache(maxsize=65536)
def stem(token: str) -> str:
    """Porter stem of a lowercase token."""
    return _stemmer.stem(token)


def load_wordlist(path: Optional[Union[str, Path]] = None) -> FrozenSet[str]:
    """Embedded wordlist, extended with the words in ``path`` if given."""
    if path is None:
        return DEFAULT_WORDLIST
    extra = {
        line.strip().lower() for _, line in numbered_lines(path) if line.strip() and not line.startswith('#')
    }
    return DEFAULT_WORDLIST | frozenset(extra)


def strip_markup(raw: str) -> str:
    """Plain text of a wiki article, without templates, references or category links."""
    code = mwparserfromhell.parse(raw)
    for link in code.filter_wikilinks():
        if str(link.title).strip().lower().startswith(HIDDEN_LINK_PREFIXES):
            try:
                code.remove(link)
            except ValueError:
                pass
    return code.strip_code(normalize=True, collapse=True)


def clean_article_text(raw: str) -> List[str]:
    """Tokenize, lowercase, drop stopwords and stem the text of an article."""
    if not raw:
        return []
    text = strip_markup(raw).lower()
    return [stem(token) for token in ARTICLE_TOKEN_RE.findall(text) if token not in STOPWORDS]


def content_word_count(raw: str) -> int:
    """Number of non-stopword tokens in an article."""
    if not raw:
        return 0
    text = strip_markup(raw).lower()
    return sum(1 for token in ARTICLE_TOKEN_RE.findall(text) if token not in STOPWORDS)


def split_camel_case(body: str) -> List[str]:
    """Split ``CantWait`` into ``['Cant', 'Wait']``; single-case text is one part."""
    if body.islower() or body.isupper():
        return [body]
    return CAMEL_PART_RE.findall(body)


class TextNormalizer:
    """Platform-aware short-text normalizer with a fixed wordlist."""

    def __init__(
        self,
        wordlist: Optional[Iterable[str]] = None,
        latin_ratio: float = DEFAULT_LATIN_RATIO,
        stopword_min_tokens: int = DEFAULT_STOPWORD_MIN_TOKENS,
    ):
        self.wordlist = frozenset(w.lower() for w in wordlist) if wordlist is not None else DEFAULT_WORDLIST
        self.latin_ratio = latin_ratio
        self.stopword_min_tokens = stopword_min_tokens

    def is_word(self, token: str) -> bool:
        return token.lower() in self.wordlist

    def is_english(self, text: str) -> bool:
        """Heuristic language check.

        At least ``latin_ratio`` of the letters must be Latin script, and texts
        of ``stopword_min_tokens`` or more words need at least one stopword.
        """
        letters = [ch for ch in text if ch.isalpha()]
        if not letters:
            return False
        latin = sum(1 for ch in letters if ord(ch) <= LATIN_MAX_CODEPOINT)
        if latin / len(letters) < self.latin_ratio:
            return False
        words = WORD_RE.findall(text.lower())
        if len(words) >= self.stopword_min_tokens:
            return any(word in STOPWORDS for word in words)
        return True

    def _hashtag(self, token: str) -> List[str]:
        body = token.lstrip('#').strip(PUNCTUATION)
        if not body:
            return []
        parts = [part.lower() for part in split_camel_case(body)]
        if parts and all(self.is_word(part) and not RETWEET_RE.match(part) for part in parts):
            return parts
        return []

    def _twitter_token(self, token: str) -> List[str]:
        core = token.strip(TWITTER_WRAPPERS)
        if MENTION_RE.match(core):
            return [MENTION]
        if core.startswith('#'):
            return self._hashtag(core)
        word = core.strip(PUNCTUATION).lower()
        if not word or RETWEET_RE.match(word):
            return []
        return [word]

    def _media_token(self, core: str) -> Optional[List[str]]:
        """Apply the youtube/flickr rules; None means no rule fired."""
        if MACHINE_TAG_RE.match(core):
            return []
        if AUTO_FILENAME_RE.match(core):
            return []
        match = FILE_SUFFIX_RE.match(core)
        if match:
            name = match.group(1).strip(PUNCTUATION).lower()
            return [name] if name and self.is_word(name) else []
        return None

    def tokens(self, raw: str, platform: Platform) -> List[str]:
        """Normalized tokens before the language check.

        Rules see each token with its surrounding punctuation removed, so
        ``(RT)``, ``"@bob:`` and ``(#tag)`` are handled like their bare forms.
        """
        text = URL_RE.sub(' ', raw)
        out: List[str] = []
        for token in text.split():
            if token == MENTION:
                out.append(MENTION)
                continue
            if platform == Platform.TWITTER:
                out.extend(self._twitter_token(token))
                continue
            core = token.strip(PUNCTUATION)
            if platform in (Platform.YOUTUBE, Platform.FLICKR):
                handled = self._media_token(core)
                if handled is not None:
                    out.extend(handled)
                    continue
            if core:
                out.append(core.lower())
        return out

    def preprocess(self, utterance: Utterance) -> Utterance:
        """Return a copy of the utterance with ``normalized`` and ``english`` filled.

        ``english`` stays None when nothing but mentions is left to judge.
        """
        tokens = self.tokens(utterance.raw, utterance.platform)
        content = ' '.join(t for t in tokens if t != MENTION)
        if not content:
            return replace(utterance, normalized=tuple(tokens), english=None)
        english = self.is_english(content)
        if not english:
            logger.debug("Utterance %s flagged non-English", utterance.utterance_id)
            tokens = []
        return replace(utterance, normalized=tuple(tokens), english=english)


DEFAULT_NORMALIZER = TextNormalizer()


def is_english(text: str) -> bool:
    """Language check with the default settings."""
    return DEFAULT_NORMALIZER.is_english(text)


def preprocess_utterance(u: Utterance, normalizer: Optional[TextNormalizer] = None) -> Utterance:
    """Normalize one utterance with the given (or default) normalizer."""
    return (normalizer or DEFAULT_NORMALIZER).preprocess(u)


def load_utterances(path: Union[str, Path]) -> List[Utterance]:
    """Read an utterance corpus file."""
    path = Path(path)
    utterances: List[Utterance] = []
    seen = set()
    for line_no, line in numbered_lines(path):
        line = line.rstrip('\n')
        if not line.strip() or line.startswith('#'):
            continue
        fields = line.split('\t', 4)
        if len(fields) != 5:
            raise SnapshotFormatError(path, line_no, "expected 5 tab-separated fields")
        utterance_id, platform, kind, user_id, raw = fields
        if utterance_id in seen:
            raise SnapshotFormatError(path, line_no, f"duplicate utterance id {utterance_id}")
        try:
            utterances.append(
                Utterance(
                    utterance_id=utterance_id,
                    platform=Platform(platform),
                    kind=UtteranceKind(kind),
                    user_id=user_id,
                    raw=raw,
                )
            )
        except ValueError as e:
            raise SnapshotFormatError(path, line_no, str(e)) from e
        seen.add(utterance_id)
    return utterances


def write_utterances(utterances: Sequence[Utterance], path: Union[str, Path]) -> None:
    """Write utterances in corpus format, preserving the given order."""
    with open(path, 'w', encoding='utf-8') as f:
        for u in utterances:
            raw = u.raw.replace('\r', ' ').replace('\n', ' ')
            f.write('\t'.join([u.utterance_id, u.platform.value, u.kind.value, u.user_id, raw]) + '\n')
