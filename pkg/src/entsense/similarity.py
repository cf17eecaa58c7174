"""Content and category similarity between a user and candidate meanings.

Content vectors are TF-IDF over the union of the user's edited articles and
the candidate articles of one entity. Category vectors weight every category
reached from a subject's topics by ``dist(c) * freq(c)``: ``dist`` is the
closest topic-interest edge weight ``1/p`` and ``freq`` the number of the
subject's topics linked to ``c``. Both are compared by cosine, and the two
similarities are mixed as ``alpha * content + (1 - alpha) * category``.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .candidates import AmbiguousEntity, CandidateMeaning
from .errors import ConfigError, InputError
from .graph import DEFAULT_MAX_DEPTH, KnowledgeGraph, build_topic_interest_graph
from .interest import UserInterestModel, topic_document

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.5
DEFAULT_MIN_DF = 2
DEFAULT_MAX_DF_RATIO = 0.9


@dataclass(frozen=True)
class SparseVector:
    """Non-negative sparse weights; zero entries are never stored."""

    weights: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_weights(cls, weights: Mapping[str, float]):
        for key, value in weights.items():
            if not math.isfinite(value) or value < 0:
                raise InputError(f"Vector weight for {key!r} must be finite and non-negative, got {value}")
        kept = {key: float(weights[key]) for key in sorted(weights) if weights[key] > 0}
        return cls(MappingProxyType(kept))

    def __len__(self) -> int:
        return len(self.weights)

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.weights.values()))

    def scaled(self, k: float):
        return type(self).from_weights({key: v * k for key, v in self.weights.items()})


class TermVector(SparseVector):
    """TF-IDF weights over the pruned term space."""


class CategoryVector(SparseVector):
    """``dist * freq`` weights over category ids."""


VectorLike = Union[SparseVector, Mapping[str, float]]


def _as_vector(v: VectorLike) -> SparseVector:
    return v if isinstance(v, SparseVector) else SparseVector.from_weights(v)


def cosine_similarity(a: VectorLike, b: VectorLike) -> float:
    """Cosine of two sparse vectors, 0.0 when either is zero."""
    va, vb = _as_vector(a), _as_vector(b)
    norm_a, norm_b = va.norm(), vb.norm()
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    common = sorted(set(va.weights) & set(vb.weights))
    dot = math.fsum(va.weights[k] * vb.weights[k] for k in common)
    return min(1.0, max(0.0, dot / (norm_a * norm_b)))


class CorpusStats:
    """Document frequencies and idf over one comparison corpus.

    ``idf = ln(N / df)``. Terms in fewer than ``min_df`` documents or in more
    than ``max_df_ratio * N`` documents are left out of the term space.
    """

    def __init__(
        self,
        document_frequencies: Mapping[str, int],
        n_documents: int,
        min_df: int = DEFAULT_MIN_DF,
        max_df_ratio: float = DEFAULT_MAX_DF_RATIO,
    ):
        if n_documents <= 0:
            raise InputError("Cannot compute term statistics over an empty corpus")
        self.n_documents = n_documents
        self.min_df = min_df
        self.max_df_ratio = max_df_ratio
        limit = max_df_ratio * n_documents
        self.idf: Dict[str, float] = {
            term: math.log(n_documents / df)
            for term, df in sorted(document_frequencies.items())
            if min_df <= df <= limit
        }

    @classmethod
    def from_documents(
        cls,
        documents: Sequence[Sequence[str]],
        min_df: int = DEFAULT_MIN_DF,
        max_df_ratio: float = DEFAULT_MAX_DF_RATIO,
    ) -> 'CorpusStats':
        df: Counter = Counter()
        for doc in documents:
            df.update(set(doc))
        return cls(df, len(documents), min_df=min_df, max_df_ratio=max_df_ratio)

    @property
    def vocabulary(self) -> Tuple[str, ...]:
        return tuple(self.idf)


def tfidf_vector(documents: Iterable[Sequence[str]], stats: CorpusStats) -> TermVector:
    """Raw term counts over the subject's documents times idf."""
    tf: Counter = Counter()
    for doc in documents:
        tf.update(doc)
    return TermVector.from_weights(
        {term: count * stats.idf[term] for term, count in tf.items() if term in stats.idf}
    )


def category_vector(
    subject: Union[UserInterestModel, CandidateMeaning],
    graph: KnowledgeGraph,
    max_depth: Optional[int] = None,
    freq_by_edits: bool = False,
) -> CategoryVector:
    """Category weights ``dist(c) * freq(c)`` of a user or a candidate.

    A user's vector comes from the model's own aggregated graph, so a
    ``max_depth`` other than the depth the model was built with is rejected.
    With ``freq_by_edits`` a category's frequency sums the edit counts of the
    topics linked to it instead of counting the topics.
    """
    dist: Dict[str, Fraction] = {}
    freq: Counter = Counter()
    if isinstance(subject, UserInterestModel):
        if max_depth is not None and max_depth != subject.max_depth:
            raise InputError(
                f"Model for {subject.user_id} was built at depth {subject.max_depth}, not {max_depth}"
            )
        for (topic_id, category_id), weight in subject.aggregated.topic_edges.items():
            if weight > dist.get(category_id, Fraction(0)):
                dist[category_id] = weight
            freq[category_id] += subject.edited_topics.get(topic_id, 1) if freq_by_edits else 1
    else:
        depth = DEFAULT_MAX_DEPTH if max_depth is None else max_depth
        interest = build_topic_interest_graph(graph, subject.topic_id, depth)
        for category_id, weight in interest.weighted_edges.items():
            dist[category_id] = weight
            freq[category_id] = 1
    return CategoryVector.from_weights({c: float(dist[c] * freq[c]) for c in dist})


@dataclass(frozen=True)
class ScoreTriple:
    sim_content: float
    sim_category: float
    combined: float


def check_alpha(alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be between 0.0 and 1.0, got {alpha}")
    return float(alpha)


def combine(sim_content: float, sim_category: float, alpha: float) -> ScoreTriple:
    """Convex combination of the two similarities."""
    alpha = check_alpha(alpha)
    combined = alpha * sim_content + (1.0 - alpha) * sim_category
    return ScoreTriple(sim_content, sim_category, min(1.0, max(0.0, combined)))


@dataclass(frozen=True)
class RankedCandidate:
    candidate: CandidateMeaning
    scores: ScoreTriple

    @property
    def topic_id(self) -> str:
        return self.candidate.topic_id


@dataclass(frozen=True)
class RankedResult:
    """Candidates of one entity in descending combined-score order."""

    entity: AmbiguousEntity
    ranked: Tuple[RankedCandidate, ...]

    @property
    def top(self) -> CandidateMeaning:
        return self.ranked[0].candidate

    @property
    def order(self) -> List[str]:
        return [r.topic_id for r in self.ranked]


def _sort_ranked(ranked: Iterable[RankedCandidate]) -> Tuple[RankedCandidate, ...]:
    return tuple(
        sorted(ranked, key=lambda r: (-r.scores.combined, -r.candidate.prior, r.candidate.topic_id))
    )


def rank_by_alpha(result: RankedResult, alpha: float) -> RankedResult:
    """Re-mix stored similarities with another alpha and re-sort."""
    rescored = [
        RankedCandidate(r.candidate, combine(r.scores.sim_content, r.scores.sim_category, alpha))
        for r in result.ranked
    ]
    return RankedResult(result.entity, _sort_ranked(rescored))


class Ranker:
    """Ranks entity candidates against one user model.

    The user's term counts, document frequencies and category vector are
    computed once and shared by every entity ranked through this object.
    """

    def __init__(
        self,
        model: UserInterestModel,
        graph: KnowledgeGraph,
        alpha: float = DEFAULT_ALPHA,
        max_depth: Optional[int] = None,
        min_df: int = DEFAULT_MIN_DF,
        max_df_ratio: float = DEFAULT_MAX_DF_RATIO,
        freq_by_edits: bool = False,
    ):
        self.model = model
        self.graph = graph
        self.alpha = check_alpha(alpha)
        self.max_depth = max_depth if max_depth is not None else model.max_depth
        self.min_df = min_df
        self.max_df_ratio = max_df_ratio

        self._user_docs: Dict[str, Sequence[str]] = {}
        for topic_id in model.topics:
            doc = model.corpus.get(topic_id)
            self._user_docs[topic_id] = doc if doc is not None else topic_document(graph, topic_id)
        self._user_df: Counter = Counter()
        for doc in self._user_docs.values():
            self._user_df.update(set(doc))
        self.user_categories = category_vector(model, graph, self.max_depth, freq_by_edits)
        self._candidate_categories: Dict[str, CategoryVector] = {}

    def corpus_stats(self, candidates: Sequence[CandidateMeaning]) -> CorpusStats:
        """Statistics over the user's articles plus the given candidates' articles."""
        df = Counter(self._user_df)
        extra = sorted({c.topic_id for c in candidates} - set(self._user_docs))
        for topic_id in extra:
            df.update(set(topic_document(self.graph, topic_id)))
        return CorpusStats(
            df, len(self._user_docs) + len(extra), min_df=self.min_df, max_df_ratio=self.max_df_ratio
        )

    def candidate_categories(self, candidate: CandidateMeaning) -> CategoryVector:
        cached = self._candidate_categories.get(candidate.topic_id)
        if cached is None:
            cached = category_vector(candidate, self.graph, self.max_depth)
            self._candidate_categories[candidate.topic_id] = cached
        return cached

    def score(self, candidate: CandidateMeaning, stats: CorpusStats) -> ScoreTriple:
        user_terms = tfidf_vector(self._user_docs.values(), stats)
        return self._score(candidate, stats, user_terms)

    def _score(self, candidate: CandidateMeaning, stats: CorpusStats, user_terms: TermVector) -> ScoreTriple:
        candidate_terms = tfidf_vector([topic_document(self.graph, candidate.topic_id)], stats)
        sim_content = cosine_similarity(user_terms, candidate_terms)
        sim_category = cosine_similarity(self.user_categories, self.candidate_categories(candidate))
        return combine(sim_content, sim_category, self.alpha)

    def rank(self, entity: AmbiguousEntity) -> RankedResult:
        if not entity.candidates:
            raise InputError(f"Entity {entity.key} has no candidates to rank")
        stats = self.corpus_stats(entity.candidates)
        user_terms = tfidf_vector(self._user_docs.values(), stats)
        ranked = [RankedCandidate(c, self._score(c, stats, user_terms)) for c in entity.candidates]
        return RankedResult(entity, _sort_ranked(ranked))


def combined_score(
    u: UserInterestModel,
    m: CandidateMeaning,
    alpha: float,
    graph: KnowledgeGraph,
    candidates: Optional[Sequence[CandidateMeaning]] = None,
    **options,
) -> ScoreTriple:
    """Score one candidate; the term space spans ``candidates`` (default just ``m``)."""
    ranker = Ranker(u, graph, alpha=alpha, **options)
    return ranker.score(m, ranker.corpus_stats(candidates or [m]))


def rank_candidates(
    u: UserInterestModel,
    e: AmbiguousEntity,
    alpha: float,
    graph: KnowledgeGraph,
    **options,
) -> RankedResult:
    """Rank the entity's candidates by combined score, then prior, then topic id."""
    return Ranker(u, graph, alpha=alpha, **options).rank(e)
