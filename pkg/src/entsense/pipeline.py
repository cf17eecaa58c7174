"""Lazily loaded inputs of a configured run, shared by the CLI commands."""

import functools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .candidates import AmbiguousEntity, FixtureCandidateProvider, LexiconTagger, detect_entities, filter_entities
from .config import PipelineConfig
from .errors import IdentityNotBridgedError, InactiveUserError
from .graph import KnowledgeGraph, load_snapshot
from .identity import Verification, load_annotations, match_usernames
from .interest import EditRecord, UserInterestModel, build_user_model, filter_edits, load_edits
from .similarity import Ranker
from .text import TextNormalizer, Utterance, load_utterances, load_wordlist

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResolvedUtterance:
    utterance: Utterance
    detected: Tuple[AmbiguousEntity, ...]
    entities: Tuple[AmbiguousEntity, ...]


class Pipeline:
    """Graph, edits, models and corpora named by one configuration."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._models: Dict[str, UserInterestModel] = {}

    @functools.cached_property
    def graph(self) -> KnowledgeGraph:
        return load_snapshot(
            self.config.require_path('graph', 'snapshot'),
            articles=self.config.path('graph', 'articles'),
        )

    @functools.cached_property
    def edits(self) -> List[EditRecord]:
        return load_edits(self.config.require_path('paths', 'edits'))

    @functools.cached_property
    def filtered_edits(self) -> List[EditRecord]:
        return filter_edits(self.edits, self.graph, self.config.min_nonstop_words)

    @functools.cached_property
    def kb_users(self) -> Tuple[str, ...]:
        return tuple(sorted({e.user_id for e in self.edits}))

    @functools.cached_property
    def normalizer(self) -> TextNormalizer:
        text = self.config.data['text']
        return TextNormalizer(
            wordlist=load_wordlist(self.config.path('text', 'wordlist')),
            latin_ratio=float(text['latin_ratio']),
            stopword_min_tokens=int(text['stopword_min_tokens']),
        )

    @functools.cached_property
    def utterances(self) -> List[Utterance]:
        return load_utterances(self.config.require_path('paths', 'utterances'))

    @functools.cached_property
    def provider(self) -> FixtureCandidateProvider:
        return FixtureCandidateProvider.load(self.config.require_path('paths', 'candidates'), self.graph)

    @functools.cached_property
    def tagger(self) -> LexiconTagger:
        return LexiconTagger(self.provider.lexicon())

    @functools.cached_property
    def annotations(self) -> Dict[Tuple[str, str], Verification]:
        path = self.config.path('paths', 'annotations')
        return load_annotations(path) if path is not None and path.exists() else {}

    def model(self, kb_user: str) -> UserInterestModel:
        if kb_user not in self._models:
            self._models[kb_user] = build_user_model(
                kb_user,
                self.filtered_edits,
                self.graph,
                max_depth=self.config.max_depth,
                min_edits=self.config.min_edits,
            )
        return self._models[kb_user]

    def models(self) -> Dict[str, UserInterestModel]:
        """Models of every user with enough surviving edits."""
        models = {}
        for user in self.kb_users:
            try:
                models[user] = self.model(user)
            except InactiveUserError as e:
                logger.warning("%s", e)
        return models

    def bridge(self, username: str, platform: str = 'generic') -> Optional[str]:
        """Knowledge-base account of a social username, or None."""
        result = match_usernames(
            [username], self.kb_users, platform=platform, strict=self.config.strict_usernames
        )[0]
        if not result.matched:
            return None
        if self.annotations.get((platform, username)) == Verification.DIFFERENT_PERSON:
            logger.warning("%s on %s is annotated as a different person than %s", username, platform, result.kb_username)
            return None
        return result.kb_username

    def require_bridge(self, username: str, platform: str = 'generic') -> str:
        kb_user = self.bridge(username, platform)
        if kb_user is None:
            raise IdentityNotBridgedError(f"Identity not bridged: {username} has no knowledge-base account")
        return kb_user

    def author_of(self, u: Utterance) -> Optional[str]:
        return self.bridge(u.user_id, u.platform.value)

    def ranker(self, kb_user: str, alpha: Optional[float] = None) -> Ranker:
        return Ranker(self.model(kb_user), self.graph, alpha=self.config.alpha if alpha is None else alpha, **self.ranking_options())

    def ranking_options(self) -> Dict:
        return {
            'max_depth': self.config.max_depth,
            'min_df': self.config.min_df,
            'max_df_ratio': self.config.max_df_ratio,
            'freq_by_edits': self.config.freq_by_edits,
        }

    def resolve_entities(self, u: Utterance) -> ResolvedUtterance:
        """Preprocess, detect and filter the entities of one utterance."""
        normalized = self.normalizer.preprocess(u)
        detected = detect_entities(normalized, self.provider, self.tagger)
        kept = filter_entities(detected, self.normalizer)
        return ResolvedUtterance(normalized, tuple(detected), tuple(kept))
