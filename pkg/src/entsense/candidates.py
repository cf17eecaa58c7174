"""Ambiguous entities, candidate providers and entity filters.

Fixture candidate format (UTF-8, tab separated, one surface form per line)::

    surface  word_class  topic|prior[|confidence]  topic|prior[|confidence] ...

``surface`` is lowercase and may hold several space-separated words;
``word_class`` is ``noun``, ``named-entity`` or ``other``.
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from .errors import InputError, ProviderError, SnapshotFormatError
from .graph import KnowledgeGraph
from .records import numbered_lines
from .text import DEFAULT_NORMALIZER, MENTION, TextNormalizer, Utterance

logger = logging.getLogger(__name__)

MAX_NGRAM = 3
MIN_SURFACE_LENGTH = 2
MIN_CANDIDATES = 2
ALNUM_RE = re.compile(r'[^\W_]')


class WordClass(str, Enum):
    NOUN = 'noun'
    NAMED_ENTITY = 'named-entity'
    OTHER = 'other'


@dataclass(frozen=True)
class CandidateMeaning:
    """A topic an ambiguous surface form may refer to."""

    topic_id: str
    prior: float
    confidence: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.prior <= 1.0:
            raise InputError(f"Prior for {self.topic_id} must be in [0, 1], got {self.prior}")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"Confidence for {self.topic_id} must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class AmbiguousEntity:
    surface: str
    utterance_id: str
    candidates: Tuple[CandidateMeaning, ...]
    word_class: WordClass = WordClass.NOUN
    entity_id: str = ''

    @property
    def key(self) -> str:
        return self.entity_id or f'{self.utterance_id}:{self.surface}'


@dataclass(frozen=True)
class Mention:
    """A spotted span of normalized tokens with its candidate meanings."""

    start: int
    end: int
    surface: str
    candidates: Tuple[CandidateMeaning, ...]
    word_class: WordClass = WordClass.OTHER


class CandidateProvider(Protocol):
    """Maps normalized utterance tokens to mentions with all their candidates."""

    def spot(self, tokens: Sequence[str]) -> List[Mention]:
        ...


def parse_candidate(field: str) -> CandidateMeaning:
    """Parse ``topic|prior[|confidence]``."""
    parts = field.split('|')
    if len(parts) not in (2, 3) or not parts[0]:
        raise ValueError(f"bad candidate {field!r}")
    confidence = float(parts[2]) if len(parts) == 3 and parts[2] != '' else None
    return CandidateMeaning(topic_id=parts[0], prior=float(parts[1]), confidence=confidence)


def format_candidate(candidate: CandidateMeaning) -> str:
    fields = [candidate.topic_id, repr(candidate.prior)]
    if candidate.confidence is not None:
        fields.append(repr(candidate.confidence))
    return '|'.join(fields)


class FixtureCandidateProvider:
    """Offline provider reading surface -> candidates maps from a file.

    Spotting is greedy longest-match over token n-grams; ``MENTION`` tokens
    never take part in a span. The provider is read-only after loading.
    """

    def __init__(
        self,
        entries: Mapping[str, Tuple[WordClass, Sequence[CandidateMeaning]]],
        max_ngram: int = MAX_NGRAM,
    ):
        self._entries = {
            surface.lower(): (word_class, tuple(candidates))
            for surface, (word_class, candidates) in entries.items()
        }
        self.max_ngram = max_ngram

    @classmethod
    def load(cls, path: Union[str, Path], graph: Optional[KnowledgeGraph] = None) -> 'FixtureCandidateProvider':
        """Read a fixture candidate file.

        With a graph, candidates whose topic is not in it are dropped with a warning.
        """
        path = Path(path)
        entries: Dict[str, Tuple[WordClass, Sequence[CandidateMeaning]]] = {}
        for line_no, line in numbered_lines(path):
            line = line.rstrip('\n')
            if not line.strip() or line.startswith('#'):
                continue
            fields = line.split('\t')
            if len(fields) < 2:
                raise SnapshotFormatError(path, line_no, "expected surface and word class")
            surface = fields[0].strip().lower()
            if surface in entries:
                raise SnapshotFormatError(path, line_no, f"duplicate surface {surface!r}")
            try:
                word_class = WordClass(fields[1].strip())
                candidates = [parse_candidate(field) for field in fields[2:] if field]
            except ValueError as e:
                raise SnapshotFormatError(path, line_no, str(e)) from e
            if graph is not None:
                known = []
                for candidate in candidates:
                    if graph.is_topic(candidate.topic_id):
                        known.append(candidate)
                    else:
                        logger.warning(
                            "Dropping candidate %s for %r: not in graph", candidate.topic_id, surface
                        )
                candidates = known
            entries[surface] = (word_class, candidates)
        return cls(entries)

    @property
    def surfaces(self) -> Tuple[str, ...]:
        return tuple(sorted(self._entries))

    def lexicon(self) -> Dict[str, WordClass]:
        return {surface: word_class for surface, (word_class, _) in self._entries.items()}

    def topic_ids(self) -> List[str]:
        """Every candidate topic id, sorted."""
        return sorted({c.topic_id for _, candidates in self._entries.values() for c in candidates})

    def spot(self, tokens: Sequence[str]) -> List[Mention]:
        mentions: List[Mention] = []
        i = 0
        while i < len(tokens):
            found = None
            for n in range(min(self.max_ngram, len(tokens) - i), 0, -1):
                span = tokens[i:i + n]
                if MENTION in span:
                    continue
                surface = ' '.join(span)
                if surface in self._entries:
                    word_class, candidates = self._entries[surface]
                    found = Mention(i, i + n, surface, tuple(candidates), word_class)
                    break
            if found is None:
                i += 1
            else:
                mentions.append(found)
                i = found.end
        return mentions


class LexiconTagger:
    """Word-class tagger backed by a fixed surface -> class lexicon."""

    def __init__(self, lexicon: Mapping[str, WordClass], default: WordClass = WordClass.OTHER):
        self._lexicon = {surface.lower(): word_class for surface, word_class in lexicon.items()}
        self.default = default

    def tag(self, surface: str) -> WordClass:
        return self._lexicon.get(surface.lower(), self.default)


def detect_entities(
    u: Utterance, provider: CandidateProvider, tagger: Optional[LexiconTagger] = None
) -> List[AmbiguousEntity]:
    """Spot every known surface form in a preprocessed utterance.

    Provider failures surface as ProviderError, never as an empty result.
    """
    try:
        mentions = provider.spot(list(u.normalized))
    except ProviderError:
        raise
    except (OSError, LookupError) as e:
        raise ProviderError(f"Candidate provider failed on {u.utterance_id}: {e}") from e
    entities = []
    for mention in mentions:
        word_class = tagger.tag(mention.surface) if tagger is not None else mention.word_class
        entities.append(
            AmbiguousEntity(
                surface=mention.surface,
                utterance_id=u.utterance_id,
                candidates=mention.candidates,
                word_class=word_class,
                entity_id=f'{u.utterance_id}:{mention.start}',
            )
        )
    return entities


def entity_rejection(entity: AmbiguousEntity, normalizer: Optional[TextNormalizer] = None) -> Optional[str]:
    """Why the entity fails the validity filters, or None if it passes.

    The language check uses ``normalizer``, the default settings if omitted.
    """
    surface = entity.surface.strip()
    if len(surface) < MIN_SURFACE_LENGTH or not ALNUM_RE.search(surface):
        return 'parse-error'
    if not (normalizer or DEFAULT_NORMALIZER).is_english(surface):
        return 'non-english'
    if entity.word_class not in (WordClass.NOUN, WordClass.NAMED_ENTITY):
        return 'word-class'
    if len(entity.candidates) < MIN_CANDIDATES:
        return 'unambiguous'
    return None


def filter_entities(
    entities: Sequence[AmbiguousEntity], normalizer: Optional[TextNormalizer] = None
) -> List[AmbiguousEntity]:
    """Keep valid, ambiguous noun or named-entity mentions."""
    kept = []
    for entity in entities:
        reason = entity_rejection(entity, normalizer)
        if reason is None:
            kept.append(entity)
        else:
            logger.debug("Entity %s (%r) filtered: %s", entity.key, entity.surface, reason)
    return kept


def prior_frequency_rank(e: AmbiguousEntity) -> List[CandidateMeaning]:
    """Candidates by descending prior, ties by topic id."""
    return sorted(e.candidates, key=lambda c: (-c.prior, c.topic_id))


def provider_top_rank(e: AmbiguousEntity) -> List[CandidateMeaning]:
    """Candidates by descending provider confidence, falling back to the prior."""
    return sorted(
        e.candidates,
        key=lambda c: (-(c.confidence if c.confidence is not None else c.prior), -c.prior, c.topic_id),
    )


@dataclass(frozen=True)
class CandidateCountStats:
    count: int
    minimum: int
    mean: float
    median: float
    maximum: int


def candidate_count_stats(entities: Sequence[AmbiguousEntity]) -> CandidateCountStats:
    """Min, mean, median and max number of candidates per entity."""
    if not entities:
        return CandidateCountStats(0, 0, 0.0, 0.0, 0)
    counts = np.array([len(e.candidates) for e in entities], dtype=np.int64)
    return CandidateCountStats(
        count=int(counts.size),
        minimum=int(counts.min()),
        mean=float(counts.mean()),
        median=float(np.median(counts)),
        maximum=int(counts.max()),
    )
