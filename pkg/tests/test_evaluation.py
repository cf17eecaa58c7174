import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from entsense.candidates import AmbiguousEntity, CandidateMeaning
from entsense.errors import ConfigError, InputError, MissingLabelError, SnapshotFormatError
from entsense.evaluation import (
    METHODS,
    alpha_sweep,
    agreement_stats,
    ambiguity_stats,
    baseline_pf,
    baseline_rc,
    baseline_ru,
    count_hits,
    draw_random_user,
    evaluate,
    format_grid,
    format_sweep,
    load_gold,
    p_at_1,
    write_grid_tsv,
    write_report_json,
)
from entsense.similarity import Ranker
from entsense.text import Platform, Utterance, UtteranceKind

CORPUS = Path(__file__).parent / 'fixtures' / 'corpus'

FINN = (
    CandidateMeaning('Finland', 0.4),
    CandidateMeaning('Huckleberry_Finn', 0.25),
    CandidateMeaning('Finn_the_Human', 0.2),
    CandidateMeaning('Finn_Hudson', 0.15),
)


def run_evaluation(pipeline, alpha=None):
    config = pipeline.config
    return evaluate(
        load_gold(config.require_path('paths', 'gold')),
        {u.utterance_id: u for u in pipeline.utterances},
        pipeline.models(),
        pipeline.author_of,
        pipeline.graph,
        alpha=config.alpha if alpha is None else alpha,
        seed_random_candidate=config.seed_random_candidate,
        seed_random_user=config.seed_random_user,
        **pipeline.ranking_options(),
    )


def test_load_gold_fixture():
    """Test row counts and the unanimity exclusion."""
    rows = load_gold(CORPUS / 'gold.tsv')
    assert len(rows) == 51
    excluded = sorted(r.entity_id for r in rows if r.excluded)
    assert excluded == ['codemonk-11:0', 'traveler-10:0', 'tvfan-11:1']
    first = rows[0]
    assert first.entity_id == 'tvfan-01:2'
    assert first.gold_topic == 'The_Office_(American_TV_series)'
    assert len(first.entity.candidates) == 4


def test_load_gold_rejects_non_candidate_gold(tmp_path):
    """Test that a unanimous gold topic must be one of the candidates."""
    path = tmp_path / 'gold.tsv'
    path.write_text('e1\tu1\tparis\tParis|0.7;Paris_Hilton|0.3\tLouvre;Louvre\tLouvre\n')
    with pytest.raises(SnapshotFormatError, match='not a candidate'):
        load_gold(path)


def test_load_gold_rejects_duplicates(tmp_path):
    """Test that entity ids are unique."""
    row = 'e1\tu1\tparis\tParis|0.7;Paris_Hilton|0.3\tParis;Paris\tParis\n'
    path = tmp_path / 'gold.tsv'
    path.write_text(row + row)
    with pytest.raises(SnapshotFormatError) as excinfo:
        load_gold(path)
    assert excinfo.value.line_no == 2


def test_p_at_1():
    """Test P@1 over first-ranked topics."""
    rankings = {'e1': ['A', 'B'], 'e2': ['B', 'A'], 'e3': ['C']}
    gold = {'e1': 'A', 'e2': 'A', 'e3': 'C'}
    assert count_hits(rankings, gold) == (2, 3)
    assert p_at_1(rankings, gold) == pytest.approx(2 / 3)
    assert p_at_1({}, gold) == 0.0


def test_p_at_1_needs_every_label():
    """Test that unlabeled rankings raise MissingLabelError."""
    with pytest.raises(MissingLabelError) as excinfo:
        p_at_1({'e1': ['A'], 'e9': ['B']}, {'e1': 'A'})
    assert excinfo.value.entity_ids == ['e9']


def test_baseline_pf_and_rc_are_permutations():
    """Test that both baselines return every candidate once."""
    entity = AmbiguousEntity('finn', 'u', FINN, entity_id='u:0')
    assert [c.topic_id for c in baseline_pf(entity)] == ['Finland', 'Huckleberry_Finn', 'Finn_the_Human', 'Finn_Hudson']
    shuffled = baseline_rc(entity, seed=3)
    assert sorted(c.topic_id for c in shuffled) == sorted(c.topic_id for c in FINN)
    assert baseline_rc(entity, seed=3) == shuffled


def test_baseline_rc_rejects_negative_seed():
    """Test that seeds must be non-negative."""
    with pytest.raises(ConfigError):
        baseline_rc(AmbiguousEntity('finn', 'u', FINN), seed=-1)


def test_baseline_rc_is_uniform():
    """Test that each candidate comes first about a quarter of the time."""
    entity = AmbiguousEntity('finn', 'u', FINN, entity_id='u:0')
    firsts = [baseline_rc(entity, seed)[0].topic_id for seed in range(10000)]
    for candidate in FINN:
        assert firsts.count(candidate.topic_id) / 10000 == pytest.approx(0.25, abs=0.02)


def test_baseline_rc_expected_precision():
    """Test that random-candidate P@1 approaches the mean of 1/k on the gold rows."""
    rows = [r for r in load_gold(CORPUS / 'gold.tsv') if not r.excluded]
    expected = float(np.mean([1 / len(r.entity.candidates) for r in rows]))
    hits = [
        baseline_rc(r.entity, seed)[0].topic_id == r.gold_topic
        for seed in range(250)
        for r in rows
    ]
    assert float(np.mean(hits)) == pytest.approx(expected, abs=0.02)


def test_draw_random_user():
    """Test that the drawn user is never the author and is reproducible."""
    pool = ['BugHunter', 'CarNut', 'TvFan']
    for key in ('a', 'b', 'c', 'd'):
        drawn = draw_random_user(pool, 'TvFan', 0, key)
        assert drawn in ('BugHunter', 'CarNut')
        assert draw_random_user(pool, 'TvFan', 0, key) == drawn
    with pytest.raises(InputError):
        draw_random_user(['TvFan'], 'TvFan', 0)


def test_random_user_with_own_model_equals_interest(pipeline):
    """Test that substituting the author's own model reproduces the interest ranking."""
    model = pipeline.model('TvFan')
    entity = AmbiguousEntity('finn', 'tvfan-05', FINN, entity_id='tvfan-05:0')
    options = pipeline.ranking_options()
    own = baseline_ru(entity, model, 0.5, pipeline.graph, **options)
    assert own == Ranker(model, pipeline.graph, alpha=0.5, **options).rank(entity)


def test_agreement_hand_example():
    """Test observed agreement and kappa on a two-item example."""
    stats = agreement_stats([['a', 'a', 'b'], ['b', 'b', 'b']])
    assert stats.observed == pytest.approx(2 / 3)
    assert stats.kappa == pytest.approx(0.25)
    assert (stats.items, stats.raters) == (2, 3)


def test_agreement_perfect_and_random():
    """Test kappa at perfect agreement and near zero for independent raters."""
    assert agreement_stats([['a', 'a'], ['b', 'b'], ['c', 'c']]).kappa == pytest.approx(1.0)
    assert agreement_stats([['a', 'a'], ['a', 'a']]).kappa == 1.0

    rng = np.random.default_rng(5)
    labels = [[str(x) for x in row] for row in rng.integers(0, 4, size=(5000, 3))]
    assert abs(agreement_stats(labels).kappa) < 0.05


def test_agreement_rejects_ragged_input():
    """Test that every item needs the same number of at least two labels."""
    with pytest.raises(InputError):
        agreement_stats([['a', 'b'], ['a']])
    with pytest.raises(InputError):
        agreement_stats([['a'], ['b']])
    with pytest.raises(InputError):
        agreement_stats([])


def test_ambiguity_stats():
    """Test per-platform rates, length bins and confidence histogram."""
    utterances = [
        Utterance('t1', Platform.TWITTER, UtteranceKind.TWEET, 'the office again', 'a'),
        Utterance('t2', Platform.TWITTER, UtteranceKind.TWEET, 'nothing here', 'a'),
        Utterance('f1', Platform.FLICKR, UtteranceKind.TAG, 'louvre', 'b'),
    ]
    office = AmbiguousEntity('office', 't1', (CandidateMeaning('A', 0.6, 0.72), CandidateMeaning('B', 0.4)))
    louvre = AmbiguousEntity('louvre', 'f1', (CandidateMeaning('Louvre', 1.0),))
    report = ambiguity_stats(utterances, {'t1': [office], 'f1': [louvre]})

    assert [(r.platform, r.kind) for r in report.rows] == [('flickr', 'tag'), ('twitter', 'tweet')]
    flickr, twitter = report.rows
    assert (flickr.texts, flickr.texts_with_ambiguous, flickr.entities, flickr.ambiguous_entities) == (1, 0, 1, 0)
    assert (twitter.texts, twitter.texts_with_ambiguous, twitter.entities, twitter.ambiguous_entities) == (2, 1, 1, 1)
    assert twitter.text_rate == 0.5
    assert report.length_histograms['twitter/tweet'] == (0, 2)
    assert report.confidence_histogram == (0, 0, 0, 0, 0, 0, 0, 1, 0, 0)
    assert report.candidate_counts['max'] == 2
    assert report.to_dict()['ambiguity'][1]['text_rate'] == '50.0%'


def test_evaluate_fixture_counts(pipeline):
    """Test exclusions, skips and baseline counts on the fixture corpus."""
    report = run_evaluation(pipeline)

    assert report.excluded == 3
    assert report.skipped == 3
    assert report.platforms == ('flickr', 'twitter', 'youtube')
    assert report.grid['PF']['all'].total == 45
    assert [(report.grid['PF'][p].hits, report.grid['PF'][p].total) for p in report.platforms] == [
        (10, 18), (8, 18), (5, 9),
    ]
    assert [report.grid['PT'][p].hits for p in (*report.platforms, 'all')] == [12, 9, 1, 22]
    assert report.grid['interest']['all'].hits > report.grid['PF']['all'].hits
    assert report.grid['interest']['all'].hits > report.grid['RC']['all'].hits


def test_evaluate_skips_unresolvable_authors(pipeline):
    """Test that different-person, inactive and unbridged authors are skipped."""
    report = run_evaluation(pipeline)
    evaluated = {o.entity_id.split('-')[0] for o in report.outcomes}
    assert evaluated == {'bughunter', 'carnut', 'codemonk', 'traveler', 'tvfan'}


def test_category_only_ranking(pipeline):
    """Test the alpha = 0 sweep point and specific category-only resolutions."""
    report = run_evaluation(pipeline)
    sweep = alpha_sweep(report)
    assert list(sweep) == [i / 10 for i in range(11)]
    assert sweep[0.0]['all'].hits == 44

    tops = {o.entity_id: o.tops['interest'] for o in run_evaluation(pipeline, alpha=0.0).outcomes}
    assert tops['tvfan-01:2'] == 'The_Office_(American_TV_series)'
    assert tops['tvfan-05:0'] == 'Finn_the_Human'
    assert tops['traveler-01:2'] == 'Paris'
    assert tops['bughunter-01:1'] == 'Beetle'
    assert tops['carnut-01:3'] == 'Volkswagen_Beetle'
    assert tops['codemonk-09:0'] == 'Microsoft_Office'


def test_evaluate_is_deterministic(pipeline):
    """Test that two runs give identical reports."""
    assert run_evaluation(pipeline).to_dict() == run_evaluation(pipeline).to_dict()


def test_report_writers(pipeline, tmp_path):
    """Test the grid TSV, JSON report and text tables."""
    report = run_evaluation(pipeline)
    report.sweep = alpha_sweep(report, alphas=(0.0, 1.0))

    grid = tmp_path / 'grid.tsv'
    write_grid_tsv(report, grid)
    lines = grid.read_text().splitlines()
    assert lines[0] == 'method\tplatform\thits\ttotal\tp_at_1'
    assert 'PF\tall\t23\t45\t0.511111' in lines
    assert len(lines) == 1 + len(METHODS) * 4

    out = tmp_path / 'report.json'
    write_report_json(report, out)
    data = json.loads(out.read_text())
    assert data['excluded'] == 3
    assert data['grid']['PT']['all'] == {'hits': 22, 'total': 45, 'p_at_1': 0.488889}
    assert set(data['sweep']) == {'0.0', '1.0'}

    text = format_grid(report)
    assert text.splitlines()[0] == 'method\tflickr\ttwitter\tyoutube\tall'
    assert text.splitlines()[3] == 'PF\t0.556\t0.444\t0.556\t0.511'
    assert format_sweep(report.sweep).splitlines()[1].startswith('0.0\t')


def test_pf_counts_match_direct_gold_count(pipeline):
    """Test PF hits against a recount of gold senses that carry the highest prior."""
    report = run_evaluation(pipeline)
    gold = {row.entity_id: row for row in load_gold(CORPUS / 'gold.tsv')}
    hits = Counter()
    totals = Counter()
    for outcome in report.outcomes:
        row = gold[outcome.entity_id]
        assert not row.excluded
        most_common = min(row.entity.candidates, key=lambda c: (-c.prior, c.topic_id))
        totals[outcome.platform] += 1
        hits[outcome.platform] += most_common.topic_id == row.gold_topic
    for platform in report.platforms:
        cell = report.grid['PF'][platform]
        assert (cell.hits, cell.total) == (hits[platform], totals[platform]), platform
    assert report.grid['PF']['all'].hits == sum(hits.values())
    assert report.grid['PF']['all'].total == sum(totals.values())
