"""Knowledge graph of topics and categories, and topic-interest graphs built on it.

Snapshot format (one record per line, whitespace separated, ``#`` comments)::

    T <topic-id> <category-id>*
    C <category-id> <broader-category-id>*

Article texts live in a JSON-lines sidecar, one ``{"id": ..., "text": ...}``
object per line. Ids never contain whitespace; underscores stand for spaces
in display titles.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import sparse

from .errors import GraphError, SnapshotFormatError
from .records import numbered_lines

logger = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 4


def title_from_id(node_id: str) -> str:
    """Display title for a topic or category id."""
    return node_id.replace('_', ' ')


@dataclass(frozen=True)
class CategoryNode:
    """A category with its outgoing ``broader`` relations."""

    id: str
    parents: Tuple[str, ...] = ()


@dataclass(frozen=True)
class TopicNode:
    """An article: id, descriptive text and the categories it belongs to."""

    id: str
    description: str = ''
    categories: Tuple[str, ...] = ()

    @property
    def title(self) -> str:
        return title_from_id(self.id)


class KnowledgeGraph:
    """Directed graph of topic and category nodes.

    Edges run topic -> category and category -> broader category. Category
    cycles are allowed. The graph is read-only once built.
    """

    def __init__(self, topics: Iterable[TopicNode], categories: Iterable[CategoryNode]):
        topic_map: Dict[str, TopicNode] = {}
        category_map: Dict[str, CategoryNode] = {}
        for category in categories:
            if category.id in category_map:
                raise GraphError(f"Duplicate category id: {category.id}")
            category_map[category.id] = category
        for topic in topics:
            if topic.id in topic_map or topic.id in category_map:
                raise GraphError(f"Duplicate node id: {topic.id}")
            topic_map[topic.id] = topic

        digraph = nx.DiGraph()
        digraph.add_nodes_from(sorted(topic_map), kind='topic')
        digraph.add_nodes_from(sorted(category_map), kind='category')
        for topic in topic_map.values():
            for category_id in topic.categories:
                if category_id not in category_map:
                    raise GraphError(f"Topic {topic.id} references unknown category {category_id}")
                digraph.add_edge(topic.id, category_id)
        for category in category_map.values():
            for parent_id in category.parents:
                if parent_id not in category_map:
                    raise GraphError(f"Category {category.id} references unknown category {parent_id}")
                digraph.add_edge(category.id, parent_id)

        self._topics = MappingProxyType(topic_map)
        self._categories = MappingProxyType(category_map)
        self._digraph = digraph
        self._successors = {node: tuple(sorted(digraph.successors(node))) for node in digraph.nodes}

    @property
    def topics(self) -> Mapping[str, TopicNode]:
        return self._topics

    @property
    def categories(self) -> Mapping[str, CategoryNode]:
        return self._categories

    @property
    def edges(self) -> List[Tuple[str, str]]:
        """All directed edges, sorted."""
        return sorted(self._digraph.edges)

    def is_topic(self, node_id: str) -> bool:
        return node_id in self._topics

    def is_category(self, node_id: str) -> bool:
        return node_id in self._categories

    def successors(self, node_id: str) -> Tuple[str, ...]:
        """Outgoing neighbours in sorted order."""
        try:
            return self._successors[node_id]
        except KeyError:
            raise GraphError(f"Unknown node: {node_id}") from None

    def topic(self, topic_id: str) -> TopicNode:
        try:
            return self._topics[topic_id]
        except KeyError:
            raise GraphError(f"Unknown topic: {topic_id}") from None

    def title(self, node_id: str) -> str:
        return title_from_id(node_id)

    def path_length(self, source: str, target: str) -> Optional[int]:
        """Length of the shortest directed path, None when unreachable."""
        for node_id in (source, target):
            if not (self.is_topic(node_id) or self.is_category(node_id)):
                raise GraphError(f"Unknown node: {node_id}")
        try:
            return nx.shortest_path_length(self._digraph, source, target)
        except nx.NetworkXNoPath:
            return None


@dataclass(frozen=True)
class TopicInterestGraph:
    """Bipartite graph linking one root topic to its reachable categories.

    Each weight is ``1/p`` with ``p`` the shortest directed path length from
    the root to the category.
    """

    root: str
    weighted_edges: Mapping[str, Fraction] = field(default_factory=dict)


@dataclass(frozen=True)
class AggregatedInterestGraph:
    """Union of topic-interest graphs with duplicate categories merged."""

    topic_edges: Mapping[Tuple[str, str], Fraction] = field(default_factory=dict)
    category_set: Tuple[str, ...] = ()
    roots: Tuple[str, ...] = ()

    @property
    def topics(self) -> Tuple[str, ...]:
        """Root topics, including those that reach no category."""
        return tuple(sorted(set(self.roots) | {topic for topic, _ in self.topic_edges}))

    def edges_for(self, topic_id: str) -> Dict[str, Fraction]:
        return {c: w for (t, c), w in self.topic_edges.items() if t == topic_id}


@dataclass(frozen=True)
class TopicCategoryMatrix:
    """Topic x category edge-weight matrix with sorted row and column ids."""

    topics: Tuple[str, ...]
    categories: Tuple[str, ...]
    values: sparse.csr_matrix
    exact: Mapping[Tuple[int, int], Fraction]

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.topics), len(self.categories))

    def toarray(self) -> np.ndarray:
        return self.values.toarray()

    def fraction(self, row: int, col: int) -> Fraction:
        return self.exact.get((row, col), Fraction(0))

    def rows(self) -> List[List[Fraction]]:
        """Exact rows, zeros included."""
        return [
            [self.fraction(i, j) for j in range(len(self.categories))]
            for i in range(len(self.topics))
        ]


def shortest_path_length(graph: KnowledgeGraph, source: str, target: str) -> Optional[int]:
    """Length of the shortest directed path from ``source`` to ``target``.

    Returns None when the target is unreachable.
    """
    return graph.path_length(source, target)


def build_topic_interest_graph(
    graph: KnowledgeGraph, root: str, max_depth: int = DEFAULT_MAX_DEPTH
) -> TopicInterestGraph:
    """Collapse the categories above ``root`` into weighted root -> category edges.

    Traversal walks outgoing edges level by level. Every category reached at
    depth ``p`` proposes the weight ``1/p`` and keeps the greater of that and
    any weight it already has. A visited set keeps category cycles finite.
    """
    if not graph.is_topic(root):
        raise GraphError(f"Root must be a topic node: {root}")
    if max_depth < 1:
        raise GraphError(f"max_depth must be positive, got {max_depth}")

    weights: Dict[str, Fraction] = {}
    visited = {root}
    frontier = [root]
    for depth in range(1, max_depth + 1):
        proposed = Fraction(1, depth)
        next_frontier = []
        for node in frontier:
            for successor in graph.successors(node):
                current = weights.get(successor)
                if current is None or proposed > current:
                    weights[successor] = proposed
                if successor not in visited:
                    visited.add(successor)
                    next_frontier.append(successor)
        if not next_frontier:
            break
        frontier = next_frontier

    ordered = {category: weights[category] for category in sorted(weights)}
    return TopicInterestGraph(root=root, weighted_edges=MappingProxyType(ordered))


def aggregate(graphs: Iterable[TopicInterestGraph]) -> AggregatedInterestGraph:
    """Merge topic-interest graphs, keeping one node per category id.

    A root appearing twice keeps the greater weight per category.
    """
    edges: Dict[Tuple[str, str], Fraction] = {}
    roots = set()
    for interest_graph in graphs:
        roots.add(interest_graph.root)
        for category, weight in interest_graph.weighted_edges.items():
            key = (interest_graph.root, category)
            current = edges.get(key)
            if current is None or weight > current:
                edges[key] = weight
    ordered = {key: edges[key] for key in sorted(edges)}
    categories = tuple(sorted({category for _, category in ordered}))
    return AggregatedInterestGraph(
        topic_edges=MappingProxyType(ordered), category_set=categories, roots=tuple(sorted(roots))
    )


def to_matrix(agg: AggregatedInterestGraph) -> TopicCategoryMatrix:
    """Topic x category matrix of an aggregate, rows and columns sorted by id."""
    topics = agg.topics
    categories = agg.category_set
    row_index = {topic: i for i, topic in enumerate(topics)}
    col_index = {category: j for j, category in enumerate(categories)}

    exact: Dict[Tuple[int, int], Fraction] = {}
    for (topic, category), weight in agg.topic_edges.items():
        exact[(row_index[topic], col_index[category])] = weight

    cells = sorted(exact)
    rows = np.array([i for i, _ in cells], dtype=np.int64)
    cols = np.array([j for _, j in cells], dtype=np.int64)
    data = np.array([float(exact[cell]) for cell in cells], dtype=np.float64)
    values = sparse.csr_matrix((data, (rows, cols)), shape=(len(topics), len(categories)))
    return TopicCategoryMatrix(
        topics=topics,
        categories=categories,
        values=values,
        exact=MappingProxyType(exact),
    )


def load_articles(path: Union[str, Path]) -> Dict[str, str]:
    """Read the JSON-lines article sidecar into an id -> text map."""
    path = Path(path)
    texts: Dict[str, str] = {}
    for line_no, line in numbered_lines(path):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            texts[str(record['id'])] = str(record.get('text') or '')
        except (ValueError, KeyError, TypeError) as e:
            raise SnapshotFormatError(path, line_no, f"bad article record: {e}") from e
    return texts


def write_articles(texts: Mapping[str, str], path: Union[str, Path]) -> None:
    """Write an id -> text map as sorted JSON lines."""
    with open(path, 'w', encoding='utf-8') as f:
        for topic_id in sorted(texts):
            f.write(json.dumps({'id': topic_id, 'text': texts[topic_id]}, ensure_ascii=False))
            f.write('\n')


def load_snapshot(
    path: Union[str, Path], articles: Optional[Union[str, Path, Mapping[str, str]]] = None
) -> KnowledgeGraph:
    """Parse a graph snapshot, rejecting dangling references with their line number."""
    path = Path(path)
    if articles is None or isinstance(articles, Mapping):
        texts: Mapping[str, str] = articles or {}
    else:
        texts = load_articles(articles)

    topic_lines: Dict[str, Tuple[int, Sequence[str]]] = {}
    category_lines: Dict[str, Tuple[int, Sequence[str]]] = {}
    for line_no, line in numbered_lines(path):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        fields = stripped.split()
        kind = fields[0]
        if kind not in ('T', 'C'):
            raise SnapshotFormatError(path, line_no, f"unknown record type {kind!r}")
        if len(fields) < 2:
            raise SnapshotFormatError(path, line_no, "record has no id")
        node_id, refs = fields[1], fields[2:]
        if node_id in topic_lines or node_id in category_lines:
            raise SnapshotFormatError(path, line_no, f"duplicate id {node_id}")
        target = topic_lines if kind == 'T' else category_lines
        target[node_id] = (line_no, refs)

    for lines, label in ((topic_lines, 'topic'), (category_lines, 'category')):
        for node_id, (line_no, refs) in lines.items():
            for ref in refs:
                if ref not in category_lines:
                    raise SnapshotFormatError(
                        path, line_no, f"{label} {node_id} references unknown category {ref}"
                    )

    for topic_id in sorted(set(texts) - set(topic_lines)):
        logger.warning("Article text for unknown topic %s ignored", topic_id)

    topics = [
        TopicNode(id=topic_id, description=texts.get(topic_id, ''), categories=tuple(refs))
        for topic_id, (_, refs) in topic_lines.items()
    ]
    categories = [
        CategoryNode(id=category_id, parents=tuple(refs))
        for category_id, (_, refs) in category_lines.items()
    ]
    logger.debug("Loaded %d topics and %d categories from %s", len(topics), len(categories), path)
    return KnowledgeGraph(topics, categories)


def write_snapshot(graph: KnowledgeGraph, path: Union[str, Path]) -> None:
    """Write a graph in snapshot format, topics first, ids sorted."""
    with open(path, 'w', encoding='utf-8') as f:
        for topic_id in sorted(graph.topics):
            topic = graph.topics[topic_id]
            f.write(' '.join(['T', topic_id, *topic.categories]) + '\n')
        for category_id in sorted(graph.categories):
            category = graph.categories[category_id]
            f.write(' '.join(['C', category_id, *category.parents]) + '\n')
