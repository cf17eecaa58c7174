"""Evaluation against gold labels, ranking baselines and corpus statistics.

Gold dataset format (UTF-8, tab separated, one entity per line)::

    entity_id  utterance_id  surface  candidates  labels  gold_topic

``candidates`` is a ``;``-separated list of ``topic|prior[|confidence]``,
``labels`` a ``;``-separated list of per-annotator answers (a topic id or
``none``). Rows whose annotators did not all choose the gold topic are kept
but flagged excluded.
"""

import json
import logging
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from statsmodels.stats.inter_rater import aggregate_raters, fleiss_kappa

from .candidates import (
    AmbiguousEntity,
    CandidateMeaning,
    WordClass,
    candidate_count_stats,
    parse_candidate,
    prior_frequency_rank,
    provider_top_rank,
)
from .errors import ConfigError, InputError, MissingLabelError, SnapshotFormatError
from .graph import KnowledgeGraph
from .identity import percent
from .interest import UserInterestModel
from .records import numbered_lines
from .similarity import RankedResult, Ranker, rank_by_alpha
from .text import Utterance

logger = logging.getLogger(__name__)

NO_LABEL = 'none'
METHODS = ('interest', 'RC', 'PF', 'RU', 'PT')
ALL_PLATFORMS = 'all'
SWEEP_ALPHAS = tuple(i / 10 for i in range(11))
LENGTH_BIN = 10
CONFIDENCE_BINS = 10


@dataclass(frozen=True)
class GoldLabel:
    entity: AmbiguousEntity
    gold_topic: str
    annotator_labels: Tuple[str, ...] = ()
    excluded: bool = False

    @property
    def entity_id(self) -> str:
        return self.entity.key


def load_gold(path: Union[str, Path]) -> List[GoldLabel]:
    """Read a gold dataset, flagging rows without unanimous annotator agreement."""
    path = Path(path)
    rows: List[GoldLabel] = []
    seen = set()
    for line_no, line in numbered_lines(path):
        line = line.rstrip('\n')
        if not line.strip() or line.startswith('#'):
            continue
        fields = line.split('\t')
        if len(fields) != 6:
            raise SnapshotFormatError(path, line_no, "expected 6 tab-separated fields")
        entity_id, utterance_id, surface, candidates, labels, gold_topic = fields
        if entity_id in seen:
            raise SnapshotFormatError(path, line_no, f"duplicate entity id {entity_id}")
        seen.add(entity_id)
        try:
            parsed = tuple(parse_candidate(c) for c in candidates.split(';') if c)
        except ValueError as e:
            raise SnapshotFormatError(path, line_no, str(e)) from e
        annotator_labels = tuple(label.strip() for label in labels.split(';') if label.strip())
        gold_topic = gold_topic.strip()
        excluded = gold_topic == NO_LABEL or any(label != gold_topic for label in annotator_labels)
        if not excluded and gold_topic not in {c.topic_id for c in parsed}:
            raise SnapshotFormatError(
                path, line_no, f"gold topic {gold_topic} is not a candidate of {entity_id}"
            )
        entity = AmbiguousEntity(
            surface=surface,
            utterance_id=utterance_id,
            candidates=parsed,
            word_class=WordClass.NOUN,
            entity_id=entity_id,
        )
        rows.append(GoldLabel(entity, gold_topic, annotator_labels, excluded))
    return rows


def count_hits(rankings: Mapping[str, Sequence[str]], gold: Mapping[str, str]) -> Tuple[int, int]:
    """Number of entities whose first-ranked topic is the gold topic, and the total."""
    missing = [entity_id for entity_id in rankings if entity_id not in gold]
    if missing:
        raise MissingLabelError(missing)
    hits = sum(1 for entity_id, order in rankings.items() if order and order[0] == gold[entity_id])
    return hits, len(rankings)


def p_at_1(rankings: Mapping[str, Sequence[str]], gold: Mapping[str, str]) -> float:
    """Fraction of ranked entities whose top topic equals the gold topic; 0.0 when empty."""
    hits, total = count_hits(rankings, gold)
    return hits / total if total else 0.0


def _entity_rng(seed: int, key: str) -> np.random.Generator:
    if seed < 0:
        raise ConfigError(f"Seeds must be non-negative, got {seed}")
    return np.random.default_rng([seed, zlib.crc32(key.encode('utf-8'))])


def baseline_rc(entity: AmbiguousEntity, seed: int) -> List[CandidateMeaning]:
    """Uniform random order of the candidates, reproducible from the seed and entity id."""
    order = _entity_rng(seed, entity.key).permutation(len(entity.candidates))
    return [entity.candidates[i] for i in order]


def baseline_pf(entity: AmbiguousEntity) -> List[CandidateMeaning]:
    """Candidates by commonness."""
    return prior_frequency_rank(entity)


def draw_random_user(pool: Sequence[str], author: str, seed: int, key: str = '') -> str:
    """Pick a user other than the author from the model pool."""
    users = sorted(set(pool))
    if len(users) < 2:
        raise InputError(f"Random-user baseline needs at least 2 users in the pool, got {len(users)}")
    others = [u for u in users if u != author]
    index = int(_entity_rng(seed, f'{author}\t{key}').integers(len(others)))
    return others[index]


def baseline_ru(
    entity: AmbiguousEntity,
    random_user_model: UserInterestModel,
    alpha: float,
    graph: KnowledgeGraph,
    **options,
) -> RankedResult:
    """The interest ranking with another user's model substituted."""
    return Ranker(random_user_model, graph, alpha=alpha, **options).rank(entity)


@dataclass(frozen=True)
class AgreementStats:
    observed: float
    kappa: float
    items: int
    raters: int


def agreement_stats(labels: Sequence[Sequence[str]]) -> AgreementStats:
    """Observed agreement and Fleiss kappa over an item x annotator label matrix."""
    if not labels:
        raise InputError("No annotations to compute agreement over")
    raters = len(labels[0])
    if any(len(row) != raters for row in labels):
        raise InputError("Every item needs the same number of annotator labels")
    if raters < 2:
        raise InputError("Agreement needs at least 2 annotators per item")

    categories = sorted({label for row in labels for label in row})
    code = {label: i for i, label in enumerate(categories)}
    codes = np.array([[code[label] for label in row] for row in labels], dtype=np.int64)
    table, _ = aggregate_raters(codes, n_cat=len(categories))

    per_item = ((table * table).sum(axis=1) - raters) / (raters * (raters - 1))
    observed = float(per_item.mean())
    shares = table.sum(axis=0) / table.sum()
    expected = float((shares * shares).sum())
    if math.isclose(expected, 1.0):
        kappa = 1.0
    else:
        kappa = float(fleiss_kappa(table, method='fleiss'))
    return AgreementStats(observed=observed, kappa=kappa, items=len(labels), raters=raters)


@dataclass(frozen=True)
class AmbiguityRow:
    platform: str
    kind: str
    texts: int
    texts_with_ambiguous: int
    entities: int
    ambiguous_entities: int

    @property
    def text_rate(self) -> float:
        return self.texts_with_ambiguous / self.texts if self.texts else 0.0

    @property
    def entity_rate(self) -> float:
        return self.ambiguous_entities / self.entities if self.entities else 0.0


@dataclass(frozen=True)
class AmbiguityReport:
    rows: Tuple[AmbiguityRow, ...]
    length_histograms: Mapping[str, Tuple[int, ...]]
    confidence_histogram: Tuple[int, ...]
    candidate_counts: Mapping[str, float]

    def to_dict(self) -> Dict:
        return {
            'ambiguity': [
                {
                    'platform': r.platform,
                    'kind': r.kind,
                    'texts': r.texts,
                    'texts_with_ambiguous': r.texts_with_ambiguous,
                    'entities': r.entities,
                    'ambiguous_entities': r.ambiguous_entities,
                    'text_rate': percent(r.texts_with_ambiguous, r.texts),
                    'entity_rate': percent(r.ambiguous_entities, r.entities),
                }
                for r in self.rows
            ],
            'length_histograms': {k: list(v) for k, v in self.length_histograms.items()},
            'length_bin': LENGTH_BIN,
            'confidence_histogram': list(self.confidence_histogram),
            'candidate_counts': dict(self.candidate_counts),
        }


def ambiguity_stats(
    utterances: Sequence[Utterance], entities: Mapping[str, Sequence[AmbiguousEntity]]
) -> AmbiguityReport:
    """Ambiguity rates per platform and kind, text lengths and top-candidate confidences.

    ``entities`` holds every detected entity per utterance id, before filtering;
    an entity is ambiguous when it has two or more candidates.
    """
    counts: Dict[Tuple[str, str], List[int]] = {}
    lengths: Dict[str, List[int]] = {}
    confidences: List[float] = []
    ambiguous_all: List[AmbiguousEntity] = []
    for u in utterances:
        key = (u.platform.value, u.kind.value)
        row = counts.setdefault(key, [0, 0, 0, 0])
        detected = entities.get(u.utterance_id, ())
        ambiguous = [e for e in detected if len(e.candidates) >= 2]
        row[0] += 1
        row[1] += 1 if ambiguous else 0
        row[2] += len(detected)
        row[3] += len(ambiguous)
        lengths.setdefault(f'{key[0]}/{key[1]}', []).append(len(u.raw))
        ambiguous_all.extend(ambiguous)
        for e in ambiguous:
            top = provider_top_rank(e)[0]
            if top.confidence is not None:
                confidences.append(top.confidence)

    rows = tuple(AmbiguityRow(p, k, *counts[(p, k)]) for p, k in sorted(counts))
    length_histograms = {
        key: tuple(int(n) for n in np.bincount(np.array(values, dtype=np.int64) // LENGTH_BIN))
        for key, values in sorted(lengths.items())
    }
    hist, _ = np.histogram(np.array(confidences, dtype=np.float64), bins=CONFIDENCE_BINS, range=(0.0, 1.0))
    stats = candidate_count_stats(ambiguous_all)
    return AmbiguityReport(
        rows=rows,
        length_histograms=length_histograms,
        confidence_histogram=tuple(int(n) for n in hist),
        candidate_counts={
            'count': stats.count,
            'min': stats.minimum,
            'mean': stats.mean,
            'median': stats.median,
            'max': stats.maximum,
        },
    )


@dataclass
class Cell:
    hits: int = 0
    total: int = 0

    @property
    def p_at_1(self) -> float:
        return self.hits / self.total if self.total else 0.0


@dataclass(frozen=True)
class EntityOutcome:
    entity_id: str
    platform: str
    gold_topic: str
    tops: Mapping[str, str]
    interest: RankedResult


@dataclass
class EvalReport:
    """Method x platform P@1 grid with integer counts behind every value."""

    alpha: float
    platforms: Tuple[str, ...]
    grid: Dict[str, Dict[str, Cell]]
    outcomes: List[EntityOutcome] = field(default_factory=list)
    excluded: int = 0
    skipped: int = 0
    sweep: Dict[float, Dict[str, Cell]] = field(default_factory=dict)
    agreement: Optional[AgreementStats] = None
    ambiguity: Optional[AmbiguityReport] = None

    def p_at_1(self, method: str, platform: str = ALL_PLATFORMS) -> float:
        return self.grid[method][platform].p_at_1

    def to_dict(self) -> Dict:
        data: Dict = {
            'alpha': self.alpha,
            'excluded': self.excluded,
            'skipped': self.skipped,
            'grid': {
                method: {
                    platform: {'hits': cell.hits, 'total': cell.total, 'p_at_1': round(cell.p_at_1, 6)}
                    for platform, cell in cells.items()
                }
                for method, cells in self.grid.items()
            },
            'entities': [
                {
                    'entity_id': o.entity_id,
                    'platform': o.platform,
                    'gold': o.gold_topic,
                    'top': dict(o.tops),
                    'interest': [
                        {
                            'topic': r.topic_id,
                            'sim_content': round(r.scores.sim_content, 9),
                            'sim_category': round(r.scores.sim_category, 9),
                            'combined': round(r.scores.combined, 9),
                        }
                        for r in o.interest.ranked
                    ],
                }
                for o in self.outcomes
            ],
        }
        if self.sweep:
            data['sweep'] = {
                f'{alpha:.1f}': {p: {'hits': c.hits, 'total': c.total} for p, c in cells.items()}
                for alpha, cells in self.sweep.items()
            }
        if self.agreement is not None:
            data['agreement'] = {
                'observed': round(self.agreement.observed, 9),
                'kappa': round(self.agreement.kappa, 9),
                'items': self.agreement.items,
                'raters': self.agreement.raters,
            }
        if self.ambiguity is not None:
            data['corpus'] = self.ambiguity.to_dict()
        return data


def _empty_cells(platforms: Sequence[str]) -> Dict[str, Cell]:
    return {p: Cell() for p in (*platforms, ALL_PLATFORMS)}


def _tally(cells: Dict[str, Cell], platform: str, hit: bool) -> None:
    for key in (platform, ALL_PLATFORMS):
        cells[key].total += 1
        cells[key].hits += 1 if hit else 0


def evaluate(
    dataset: Sequence[GoldLabel],
    utterances: Mapping[str, Utterance],
    models: Mapping[str, UserInterestModel],
    author_of: Callable[[Utterance], Optional[str]],
    graph: KnowledgeGraph,
    alpha: float = 0.5,
    seed_random_candidate: int = 0,
    seed_random_user: int = 0,
    **options,
) -> EvalReport:
    """Rank every unanimous gold entity with each method and tally P@1.

    Args:
        dataset: Gold rows; excluded rows are counted but not ranked
        utterances: Utterances by id, for platform and author
        models: Interest models by knowledge-base user id
        author_of: Maps an utterance to its author's knowledge-base user id
        graph: Knowledge graph the models and candidates refer to
        alpha: Content/category mixing weight
        seed_random_candidate: Seed of the random-candidate baseline
        seed_random_user: Seed of the random-user baseline

    Returns:
        The filled report
    """
    kept: List[Tuple[GoldLabel, Utterance, str]] = []
    excluded = skipped = 0
    for row in dataset:
        if row.excluded:
            excluded += 1
            continue
        u = utterances.get(row.entity.utterance_id)
        if u is None:
            logger.warning("Gold entity %s refers to unknown utterance %s", row.entity_id, row.entity.utterance_id)
            skipped += 1
            continue
        author = author_of(u)
        if author is None or author not in models:
            logger.warning("No interest model for the author of %s; entity skipped", row.entity_id)
            skipped += 1
            continue
        kept.append((row, u, author))

    platforms = tuple(sorted({u.platform.value for _, u, _ in kept}))
    grid = {method: _empty_cells(platforms) for method in METHODS}
    rankers: Dict[str, Ranker] = {}
    pool = sorted(models)

    def ranker_for(user_id: str) -> Ranker:
        if user_id not in rankers:
            rankers[user_id] = Ranker(models[user_id], graph, alpha=alpha, **options)
        return rankers[user_id]

    outcomes = []
    for row, u, author in kept:
        entity = row.entity
        interest = ranker_for(author).rank(entity)
        random_user = draw_random_user(pool, author, seed_random_user, entity.key)
        tops = {
            'interest': interest.top.topic_id,
            'RC': baseline_rc(entity, seed_random_candidate)[0].topic_id,
            'PF': baseline_pf(entity)[0].topic_id,
            'RU': ranker_for(random_user).rank(entity).top.topic_id,
            'PT': provider_top_rank(entity)[0].topic_id,
        }
        for method in METHODS:
            _tally(grid[method], u.platform.value, tops[method] == row.gold_topic)
        outcomes.append(EntityOutcome(entity.key, u.platform.value, row.gold_topic, tops, interest))

    logger.info("Evaluated %d entities (%d excluded, %d skipped)", len(outcomes), excluded, skipped)
    return EvalReport(
        alpha=alpha,
        platforms=platforms,
        grid=grid,
        outcomes=outcomes,
        excluded=excluded,
        skipped=skipped,
    )


def alpha_sweep(
    report: EvalReport, alphas: Sequence[float] = SWEEP_ALPHAS
) -> Dict[float, Dict[str, Cell]]:
    """Interest-method P@1 counts per platform at each alpha, from stored similarities."""
    sweep: Dict[float, Dict[str, Cell]] = {}
    for alpha in alphas:
        cells = _empty_cells(report.platforms)
        for outcome in report.outcomes:
            top = rank_by_alpha(outcome.interest, alpha).top.topic_id
            _tally(cells, outcome.platform, top == outcome.gold_topic)
        sweep[alpha] = cells
    return sweep


def format_grid(report: EvalReport) -> str:
    """Human-readable P@1 grid, one row per method."""
    columns = [*report.platforms, ALL_PLATFORMS]
    lines = ['\t'.join(['method', *columns])]
    for method in METHODS:
        cells = report.grid[method]
        lines.append('\t'.join([method, *(f'{cells[c].p_at_1:.3f}' for c in columns)]))
    return '\n'.join(lines) + '\n'


def format_sweep(sweep: Mapping[float, Mapping[str, Cell]]) -> str:
    if not sweep:
        return ''
    columns = list(next(iter(sweep.values())))
    lines = ['\t'.join(['alpha', *columns])]
    for alpha, cells in sweep.items():
        lines.append('\t'.join([f'{alpha:.1f}', *(f'{cells[c].p_at_1:.3f}' for c in columns)]))
    return '\n'.join(lines) + '\n'


def write_grid_tsv(report: EvalReport, path: Union[str, Path]) -> None:
    """Long-format grid: method, platform, hits, total, P@1."""
    with open(path, 'w', encoding='utf-8') as f:
        f.write('method\tplatform\thits\ttotal\tp_at_1\n')
        for method in METHODS:
            for platform, cell in report.grid[method].items():
                f.write(f'{method}\t{platform}\t{cell.hits}\t{cell.total}\t{cell.p_at_1:.6f}\n')


def write_report_json(report: EvalReport, path: Union[str, Path]) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')
