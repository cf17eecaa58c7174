"""User interest models built from knowledge-base edit histories.

Edit-history format (UTF-8, tab separated, one edit per line)::

    user_id  topic_id  timestamp  kind  delta

``timestamp`` is ISO-8601, ``kind`` one of ``normal``, ``revert``, ``minor``
(``typo`` is accepted as an alias of ``minor``) and ``delta`` the signed
character count of the edit.
"""

import functools
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from .errors import InactiveUserError, InputError, InvariantViolation, SnapshotFormatError
from .graph import (
    DEFAULT_MAX_DEPTH,
    AggregatedInterestGraph,
    KnowledgeGraph,
    aggregate,
    build_topic_interest_graph,
)
from .records import numbered_lines
from .text import clean_article_text, content_word_count

logger = logging.getLogger(__name__)

DEFAULT_MIN_NONSTOP_WORDS = 100
DEFAULT_COVERAGE_DEPTHS = (1, 2, 3, 4)


class EditKind(str, Enum):
    NORMAL = 'normal'
    REVERT = 'revert'
    MINOR = 'minor'

    @classmethod
    def parse(cls, value: str) -> 'EditKind':
        value = value.strip().lower()
        if value == 'typo':
            return cls.MINOR
        return cls(value)


@dataclass(frozen=True)
class EditRecord:
    """One knowledge-base edit.

    ``page_editors`` and ``quality`` are carried for richer interest signals
    but are not used by the model.
    """

    user_id: str
    topic_id: str
    timestamp: str
    kind: EditKind = EditKind.NORMAL
    delta_size: int = 0
    page_editors: Optional[int] = None
    quality: Optional[float] = None


@dataclass(frozen=True)
class UserInterestModel:
    """Aggregated topic-interest graphs and article corpus of one user."""

    user_id: str
    aggregated: AggregatedInterestGraph
    edited_topics: Mapping[str, int]
    corpus: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    max_depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        if not self.edited_topics:
            raise InvariantViolation(f"Interest model for {self.user_id} has no edited topics")
        if any(count < 1 for count in self.edited_topics.values()):
            raise InvariantViolation(f"Interest model for {self.user_id} has a non-positive edit count")
        missing = set(self.edited_topics) - set(self.aggregated.topics)
        if missing:
            raise InvariantViolation(
                f"Edited topics without interest rows: {', '.join(sorted(missing))}"
            )

    @property
    def topics(self) -> Tuple[str, ...]:
        return tuple(sorted(self.edited_topics))

    @property
    def edit_count(self) -> int:
        return sum(self.edited_topics.values())


def _check_timestamp(value: str) -> str:
    datetime.fromisoformat(value.replace('Z', '+00:00'))
    return value


def load_edits(path: Union[str, Path]) -> List[EditRecord]:
    """Read an edit-history file."""
    path = Path(path)
    edits: List[EditRecord] = []
    for line_no, line in numbered_lines(path):
        line = line.rstrip('\n')
        if not line.strip() or line.startswith('#'):
            continue
        fields = line.split('\t')
        if len(fields) != 5:
            raise SnapshotFormatError(path, line_no, "expected 5 tab-separated fields")
        user_id, topic_id, timestamp, kind, delta = fields
        try:
            edits.append(
                EditRecord(
                    user_id=user_id,
                    topic_id=topic_id,
                    timestamp=_check_timestamp(timestamp),
                    kind=EditKind.parse(kind),
                    delta_size=int(delta),
                )
            )
        except ValueError as e:
            raise SnapshotFormatError(path, line_no, str(e)) from e
    return edits


def write_edits(edits: Iterable[EditRecord], path: Union[str, Path]) -> None:
    """Write edits in edit-history format, preserving order."""
    with open(path, 'w', encoding='utf-8') as f:
        for edit in edits:
            f.write(
                '\t'.join(
                    [edit.user_id, edit.topic_id, edit.timestamp, edit.kind.value, str(edit.delta_size)]
                )
                + '\n'
            )


def filter_edits(
    edits: Sequence[EditRecord],
    graph: KnowledgeGraph,
    min_nonstop_words: int = DEFAULT_MIN_NONSTOP_WORDS,
) -> List[EditRecord]:
    """Drop reverts, minor edits and edits to articles too short to carry concepts.

    Edits to topics missing from the graph are skipped with a warning.
    """
    word_counts: Dict[str, int] = {}
    kept: List[EditRecord] = []
    for edit in edits:
        if edit.kind in (EditKind.REVERT, EditKind.MINOR):
            continue
        if not graph.is_topic(edit.topic_id):
            logger.warning("Skipping edit by %s to unknown topic %s", edit.user_id, edit.topic_id)
            continue
        if edit.topic_id not in word_counts:
            word_counts[edit.topic_id] = content_word_count(graph.topic(edit.topic_id).description)
        if word_counts[edit.topic_id] < min_nonstop_words:
            continue
        kept.append(edit)
    return kept


@functools.lru_cache(maxsize=8192)
def topic_document(graph: KnowledgeGraph, topic_id: str) -> Tuple[str, ...]:
    """Cleaned tokens of a topic's title, body and direct category titles."""
    topic = graph.topic(topic_id)
    tokens = clean_article_text(topic.title) + clean_article_text(topic.description)
    for category_id in topic.categories:
        tokens.extend(clean_article_text(graph.title(category_id)))
    return tuple(tokens)


def build_user_model(
    user_id: str,
    edits: Sequence[EditRecord],
    graph: KnowledgeGraph,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_edits: int = 1,
) -> UserInterestModel:
    """Aggregate one topic-interest graph per distinct edited topic.

    Args:
        user_id: Knowledge-base user the model describes
        edits: Filtered edits; records of other users are ignored
        graph: Knowledge graph the edits refer to
        max_depth: Traversal depth for topic-interest graphs
        min_edits: Fewest surviving edits accepted

    Returns:
        The user's interest model

    Raises:
        InactiveUserError: Fewer than ``min_edits`` (and at least one) edits survive
    """
    counts = Counter(edit.topic_id for edit in edits if edit.user_id == user_id)
    total = sum(counts.values())
    if total == 0 or total < min_edits:
        raise InactiveUserError(
            f"User {user_id} has {total} surviving edits (minimum {max(min_edits, 1)})"
        )
    topics = sorted(counts)
    for topic_id in topics:
        if not graph.is_topic(topic_id):
            raise InputError(f"Edit by {user_id} references unknown topic {topic_id}")

    aggregated = aggregate(build_topic_interest_graph(graph, t, max_depth) for t in topics)
    corpus = {t: topic_document(graph, t) for t in topics}
    logger.debug(
        "Built model for %s: %d topics, %d categories", user_id, len(topics), len(aggregated.category_set)
    )
    return UserInterestModel(
        user_id=user_id,
        aggregated=aggregated,
        edited_topics=MappingProxyType({t: counts[t] for t in topics}),
        corpus=MappingProxyType(corpus),
        max_depth=max_depth,
    )


def model_to_dict(model: UserInterestModel) -> Dict:
    interest: Dict[str, Dict[str, str]] = {t: {} for t in model.aggregated.topics}
    for (topic_id, category_id), weight in model.aggregated.topic_edges.items():
        interest[topic_id][category_id] = str(weight)
    return {
        'user': model.user_id,
        'max_depth': model.max_depth,
        'edited_topics': dict(model.edited_topics),
        'interest_graph': interest,
        'corpus': {t: list(tokens) for t, tokens in model.corpus.items()},
    }


def dump_user_model(model: UserInterestModel) -> str:
    """Serialize a model to YAML with sorted keys and exact fractional weights."""
    return yaml.safe_dump(model_to_dict(model), sort_keys=True, default_flow_style=False, allow_unicode=True)


def load_user_model(text: str) -> UserInterestModel:
    """Parse a model produced by ``dump_user_model``."""
    try:
        data = yaml.safe_load(text)
        edges: Dict[Tuple[str, str], Fraction] = {}
        for topic_id, categories in (data.get('interest_graph') or {}).items():
            for category_id, weight in (categories or {}).items():
                edges[(str(topic_id), str(category_id))] = Fraction(str(weight))
        ordered = {key: edges[key] for key in sorted(edges)}
        aggregated = AggregatedInterestGraph(
            topic_edges=MappingProxyType(ordered),
            category_set=tuple(sorted({c for _, c in ordered})),
            roots=tuple(sorted(str(t) for t in (data.get('interest_graph') or {}))),
        )
        edited = {str(t): int(n) for t, n in sorted((data.get('edited_topics') or {}).items())}
        corpus = {str(t): tuple(tokens) for t, tokens in sorted((data.get('corpus') or {}).items())}
        return UserInterestModel(
            user_id=str(data['user']),
            aggregated=aggregated,
            edited_topics=MappingProxyType(edited),
            corpus=MappingProxyType(corpus),
            max_depth=int(data.get('max_depth', DEFAULT_MAX_DEPTH)),
        )
    except (yaml.YAMLError, AttributeError, KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise InputError(f"Invalid interest model: {e}") from e


def _categories_within(graph: KnowledgeGraph, topics: Iterable[str], d: int) -> set:
    reached = set()
    for topic_id in topics:
        reached.update(build_topic_interest_graph(graph, topic_id, d).weighted_edges)
    return reached


def coverage_at_distance(
    model: UserInterestModel, entities: Sequence, graph: KnowledgeGraph, d: int
) -> Optional[float]:
    """Fraction of entities with a candidate in a category within ``d`` edges of an edited topic.

    Returns None for an empty entity list.
    """
    if d < 1:
        raise InputError(f"Coverage distance must be positive, got {d}")
    if not entities:
        return None
    reached = _categories_within(graph, model.topics, d)
    covered = 0
    for entity in entities:
        for candidate in entity.candidates:
            if not graph.is_topic(candidate.topic_id):
                logger.warning("Candidate %s is not in the graph", candidate.topic_id)
                continue
            if reached.intersection(graph.topic(candidate.topic_id).categories):
                covered += 1
                break
    return covered / len(entities)


def coverage_profile(
    model: UserInterestModel,
    entities: Sequence,
    graph: KnowledgeGraph,
    depths: Sequence[int] = DEFAULT_COVERAGE_DEPTHS,
) -> Dict[int, Optional[float]]:
    """Coverage at each distance in ``depths``."""
    return {d: coverage_at_distance(model, entities, graph, d) for d in depths}
