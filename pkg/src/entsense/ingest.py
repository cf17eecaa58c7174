"""Collects a snapshot bundle from a social-text source and the knowledge-base API.

Outputs, all under ``paths.output_dir``::

    graph.txt         knowledge-graph snapshot
    articles.jsonl    article texts
    edits.tsv         edit histories of bridged users
    utterances.tsv    utterances of active, bridged users
    exclusions.tsv    user, platform, reason for every dropped user

Progress is checkpointed per user in ``ingest-checkpoint.json``; an
interrupted run resumes from it and a completed run removes it.
"""

import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from .candidates import FixtureCandidateProvider
from .config import PipelineConfig
from .errors import IngestInterruptedError, InputError, MalformedResponseError, ServiceError
from .graph import CategoryNode, KnowledgeGraph, TopicNode, write_articles, write_snapshot
from .identity import match_usernames
from .interest import EditKind, EditRecord, write_edits
from .mediawiki import MediaWikiClient, client_from_config, page_id, page_title
from .text import Utterance, load_utterances, write_utterances

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'ingest-checkpoint.json'
REVERT_RE = re.compile(r'\b(?:revert(?:ed|ing)?|rvv?|undid|undo|rollback|rolled back)\b', re.IGNORECASE)


@dataclass(frozen=True)
class Exclusion:
    user: str
    platform: str
    reason: str


@dataclass
class IngestResult:
    users: List[str] = field(default_factory=list)
    exclusions: List[Exclusion] = field(default_factory=list)
    topics: int = 0
    categories: int = 0
    edits: int = 0
    utterances: int = 0


def classify_edit(contrib: Dict) -> EditKind:
    """Minor-flagged edits are minor; comments with a revert marker are reverts."""
    if contrib.get('minor'):
        return EditKind.MINOR
    if REVERT_RE.search(contrib.get('comment') or ''):
        return EditKind.REVERT
    return EditKind.NORMAL


def contrib_to_edit(user: str, contrib: Dict) -> EditRecord:
    try:
        return EditRecord(
            user_id=user,
            topic_id=page_id(contrib['title']),
            timestamp=str(contrib['timestamp']),
            kind=classify_edit(contrib),
            delta_size=int(contrib.get('sizediff') or 0),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedResponseError(f"Bad contribution record for {user}: {e}") from e


def select_active(
    utterances: List[Utterance], min_utterances: int
) -> Tuple[List[Utterance], List[Exclusion]]:
    """Keep the most recent ``min_utterances`` utterances of each user who has that many.

    Source order is recency order, newest last.
    """
    by_user: Dict[Tuple[str, str], List[Utterance]] = {}
    for u in utterances:
        by_user.setdefault((u.user_id, u.platform.value), []).append(u)
    kept: List[Utterance] = []
    excluded: List[Exclusion] = []
    for (user, platform), items in sorted(by_user.items()):
        if len(items) < min_utterances:
            excluded.append(Exclusion(user, platform, 'too-few-utterances'))
            continue
        kept.extend(items[-min_utterances:])
    return kept, excluded


class Checkpoint:
    def __init__(self, path: Path):
        self.path = path
        self.edits: Dict[str, List[Dict]] = {}
        self.exclusions: List[Exclusion] = []
        if path.exists():
            try:
                with open(path, 'r', encoding='utf-8') as f:
                    data = json.load(f)
                self.edits = data.get('edits', {})
                self.exclusions = [Exclusion(**e) for e in data.get('exclusions', [])]
            except (ValueError, TypeError, AttributeError) as e:
                raise InputError(f"Unreadable checkpoint {path}, remove it to start over: {e}") from e
            logger.info("Resuming ingest from %s (%d users done)", path, len(self.edits))

    def done(self, user: str) -> bool:
        return user in self.edits or any(e.user == user for e in self.exclusions)

    def save(self) -> None:
        with open(self.path, 'w', encoding='utf-8') as f:
            json.dump(
                {'edits': self.edits, 'exclusions': [asdict(e) for e in self.exclusions]},
                f,
                indent=1,
                sort_keys=True,
            )

    def remove(self) -> None:
        if self.path.exists():
            self.path.unlink()


def _edit_to_json(edit: EditRecord) -> Dict:
    return {
        'topic': edit.topic_id,
        'timestamp': edit.timestamp,
        'kind': edit.kind.value,
        'delta': edit.delta_size,
    }


def _edit_from_json(user: str, data: Dict) -> EditRecord:
    return EditRecord(user, data['topic'], data['timestamp'], EditKind(data['kind']), int(data['delta']))


def collect_categories(
    client: MediaWikiClient, direct: Set[str], max_depth: int
) -> Dict[str, Tuple[str, ...]]:
    """Category closure up to ``max_depth`` levels above the articles."""
    parents: Dict[str, Tuple[str, ...]] = {c: () for c in direct}
    frontier = sorted(direct)
    for _ in range(max_depth - 1):
        if not frontier:
            break
        fetched = client.category_parents(frontier)
        next_frontier = set()
        for child, ups in fetched.items():
            parents[child] = ups
            next_frontier.update(c for c in ups if c not in parents)
        for c in next_frontier:
            parents[c] = ()
        frontier = sorted(next_frontier)
    known = set(parents)
    return {c: tuple(p for p in ups if p in known) for c, ups in sorted(parents.items())}


def run_ingest(config: PipelineConfig, client: Optional[MediaWikiClient] = None) -> IngestResult:
    """Build the snapshot bundle described by ``config``."""
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    client = client or client_from_config(config)
    result = IngestResult()

    source = config.require_path('ingest', 'utterance_source')
    utterances = load_utterances(source)
    if not utterances:
        logger.warning("Utterance source %s is empty; writing an empty snapshot", source)

    active, exclusions = select_active(utterances, config.min_utterances)
    platform_of: Dict[str, str] = {}
    for u in active:
        platform_of.setdefault(u.user_id, u.platform.value)

    by_platform: Dict[str, List[str]] = {}
    for user, platform in sorted(platform_of.items()):
        by_platform.setdefault(platform, []).append(user)
    bridged: Dict[str, str] = {}
    if platform_of:
        known = client.existing_users(platform_of)
        for platform, users in sorted(by_platform.items()):
            for r in match_usernames(users, known, platform=platform, strict=config.strict_usernames):
                if r.matched:
                    bridged[r.username] = r.kb_username
                else:
                    exclusions.append(Exclusion(r.username, platform, 'not-bridged'))

    checkpoint = Checkpoint(out_dir / CHECKPOINT_NAME)
    contrib_limit = int(config.data['ingest']['contrib_limit'])
    for user in sorted(bridged):
        if checkpoint.done(user):
            continue
        kb_user = bridged[user]
        try:
            edits = [contrib_to_edit(kb_user, c) for c in client.user_contributions(kb_user, contrib_limit)]
        except MalformedResponseError as e:
            logger.warning("Skipping user %s: %s", user, e)
            checkpoint.exclusions.append(Exclusion(user, platform_of[user], 'malformed-response'))
            checkpoint.save()
            continue
        except ServiceError as e:
            checkpoint.save()
            raise IngestInterruptedError(f"Ingest stopped at user {user}: {e}", checkpoint.path) from e
        surviving = sum(1 for e in edits if e.kind == EditKind.NORMAL)
        if surviving < config.min_edits:
            checkpoint.exclusions.append(Exclusion(user, platform_of[user], 'too-few-edits'))
        else:
            checkpoint.edits[user] = [_edit_to_json(e) for e in edits]
        checkpoint.save()

    exclusions.extend(checkpoint.exclusions)
    excluded_users = {e.user for e in exclusions}
    users = sorted(u for u in checkpoint.edits if u not in excluded_users)
    all_edits = [
        _edit_from_json(bridged.get(user, user), data) for user in users for data in checkpoint.edits[user]
    ]

    titles = {page_title(e.topic_id) for e in all_edits}
    candidates_path = config.path('paths', 'candidates')
    if candidates_path is not None and candidates_path.exists():
        titles.update(page_title(t) for t in FixtureCandidateProvider.load(candidates_path).topic_ids())
    try:
        pages = client.page_details(titles)
        direct = {c for page in pages.values() for c in page.categories}
        categories = collect_categories(client, direct, config.max_depth)
    except ServiceError as e:
        raise IngestInterruptedError(f"Ingest stopped while fetching articles: {e}", checkpoint.path) from e

    topic_ids = {page_id(title) for title in pages}
    # Category ids share the node namespace with articles.
    rename = {c: f'Category:{c}' for c in categories if c in topic_ids}
    topics = [
        TopicNode(
            id=page_id(title),
            description=page.text,
            categories=tuple(rename.get(c, c) for c in page.categories),
        )
        for title, page in sorted(pages.items())
    ]
    graph = KnowledgeGraph(
        topics,
        [CategoryNode(rename.get(c, c), tuple(rename.get(p, p) for p in ups)) for c, ups in categories.items()],
    )
    kept_edits = sorted(
        (e for e in all_edits if graph.is_topic(e.topic_id)),
        key=lambda e: (e.user_id, e.timestamp, e.topic_id),
    )
    kept_users = set(users)
    kept_utterances = [u for u in active if u.user_id in kept_users]

    write_snapshot(graph, out_dir / 'graph.txt')
    write_articles({t.id: t.description for t in topics}, out_dir / 'articles.jsonl')
    write_edits(kept_edits, out_dir / 'edits.tsv')
    write_utterances(kept_utterances, out_dir / 'utterances.tsv')
    exclusions = sorted(set(exclusions), key=lambda e: (e.user, e.platform, e.reason))
    with open(out_dir / 'exclusions.tsv', 'w', encoding='utf-8') as f:
        for e in exclusions:
            f.write(f'{e.user}\t{e.platform}\t{e.reason}\n')
    checkpoint.remove()

    result.users = users
    result.exclusions = exclusions
    result.topics = len(graph.topics)
    result.categories = len(graph.categories)
    result.edits = len(kept_edits)
    result.utterances = len(kept_utterances)
    logger.info(
        "Ingested %d users, %d topics, %d categories, %d edits",
        len(users), result.topics, result.categories, result.edits,
    )
    return result
