from pathlib import Path

import pytest

from entsense.candidates import (
    AmbiguousEntity,
    CandidateMeaning,
    FixtureCandidateProvider,
    LexiconTagger,
    WordClass,
    candidate_count_stats,
    detect_entities,
    entity_rejection,
    filter_entities,
    format_candidate,
    parse_candidate,
    prior_frequency_rank,
    provider_top_rank,
)
from entsense.errors import InputError, ProviderError, SnapshotFormatError
from entsense.text import MENTION, Platform, TextNormalizer, Utterance, UtteranceKind, preprocess_utterance

CORPUS = Path(__file__).parent / 'fixtures' / 'corpus'


@pytest.fixture
def provider(corpus_graph):
    return FixtureCandidateProvider.load(CORPUS / 'candidates.tsv', corpus_graph)


def tweet(raw, utterance_id='t1'):
    return preprocess_utterance(Utterance(utterance_id, Platform.TWITTER, UtteranceKind.TWEET, raw, 'someone'))


def meanings(*pairs):
    return tuple(CandidateMeaning(topic, prior) for topic, prior in pairs)


def test_parse_candidate():
    """Test the topic|prior[|confidence] field."""
    assert parse_candidate('Jaguar|0.45|0.6') == CandidateMeaning('Jaguar', 0.45, 0.6)
    assert parse_candidate('Jaguar|0.45') == CandidateMeaning('Jaguar', 0.45)
    assert format_candidate(CandidateMeaning('Jaguar', 0.45, 0.6)) == 'Jaguar|0.45|0.6'
    for bad in ('Jaguar', '|0.4', 'Jaguar|x', 'a|0.1|0.2|0.3'):
        with pytest.raises(ValueError):
            parse_candidate(bad)


def test_prior_must_be_probability():
    """Test that priors and confidences outside [0, 1] are rejected."""
    with pytest.raises(InputError):
        CandidateMeaning('T', 1.5)
    with pytest.raises(InputError):
        CandidateMeaning('T', 0.5, -0.1)


def test_load_fixture_candidates(provider):
    """Test the shipped candidate map."""
    assert 'beetle' in provider.surfaces
    assert 'stag beetle' in provider.surfaces
    assert provider.lexicon()['play'] is WordClass.OTHER
    assert 'Beetle_(botanist)' in provider.topic_ids()


def test_load_drops_candidates_missing_from_graph(tmp_path, corpus_graph, caplog):
    """Test that unknown candidate topics are dropped with a warning."""
    path = tmp_path / 'candidates.tsv'
    path.write_text('paris\tnamed-entity\tParis|0.7\tParis,_Texas|0.3\n')
    provider = FixtureCandidateProvider.load(path, corpus_graph)
    assert provider.spot(['paris'])[0].candidates == (CandidateMeaning('Paris', 0.7),)
    assert 'Paris,_Texas' in caplog.text


def test_load_rejects_bad_lines(tmp_path):
    """Test that malformed candidate files report their line."""
    path = tmp_path / 'candidates.tsv'
    path.write_text('paris\tnamed-entity\tParis|0.7\nparis\tnoun\tParis|0.7\n')
    with pytest.raises(SnapshotFormatError, match='duplicate'):
        FixtureCandidateProvider.load(path)
    path.write_text('paris\tverb\tParis|0.7\n')
    with pytest.raises(SnapshotFormatError) as excinfo:
        FixtureCandidateProvider.load(path)
    assert excinfo.value.line_no == 1


def test_spot_prefers_longest_match(provider):
    """Test that 'stag beetle' wins over 'beetle'."""
    mentions = provider.spot(['a', 'stag', 'beetle', 'and', 'a', 'beetle'])
    assert [(m.start, m.end, m.surface) for m in mentions] == [(1, 3, 'stag beetle'), (5, 6, 'beetle')]


def test_spot_skips_mention_tokens():
    """Test that MENTION never takes part in a span."""
    provider = FixtureCandidateProvider({'a b': (WordClass.NOUN, meanings(('X', 0.5), ('Y', 0.5)))})
    assert provider.spot(['a', MENTION, 'b']) == []
    assert provider.spot([MENTION, 'a', 'b'])[0].start == 1


def test_detect_entities(provider):
    """Test detection on the office example with entity ids from token offsets."""
    u = tweet('RT @dwight: the office holiday party episode is the best', 'tvfan-01')
    entities = detect_entities(u, provider, LexiconTagger(provider.lexicon()))

    assert len(entities) == 1
    office = entities[0]
    assert office.entity_id == 'tvfan-01:2'
    assert office.surface == 'office'
    assert office.word_class is WordClass.NOUN
    assert [c.topic_id for c in office.candidates] == [
        'Office',
        'Microsoft_Office',
        'The_Office_(American_TV_series)',
        'The_Office_(British_TV_series)',
    ]


def test_detect_entities_on_non_english_text(provider):
    """Test that an emptied non-English utterance yields no entities."""
    assert detect_entities(tweet('la oficina es mi serie favorita office'), provider) == []


def test_provider_failure_is_not_empty_result(mocker):
    """Test that a failing provider raises ProviderError."""
    broken = mocker.Mock()
    broken.spot.side_effect = OSError('candidate index unavailable')
    with pytest.raises(ProviderError, match='candidate index unavailable'):
        detect_entities(tweet('the office'), broken)


@pytest.mark.parametrize('surface, word_class, candidates, reason', [
    ('office', WordClass.NOUN, meanings(('A', 0.5), ('B', 0.5)), None),
    ('paris', WordClass.NAMED_ENTITY, meanings(('A', 0.5), ('B', 0.5)), None),
    ('x', WordClass.NOUN, meanings(('A', 0.5), ('B', 0.5)), 'parse-error'),
    ('!!', WordClass.NOUN, meanings(('A', 0.5), ('B', 0.5)), 'parse-error'),
    ('東京', WordClass.NOUN, meanings(('A', 0.5), ('B', 0.5)), 'non-english'),
    ('play', WordClass.OTHER, meanings(('A', 0.5), ('B', 0.5)), 'word-class'),
    ('louvre', WordClass.NAMED_ENTITY, meanings(('A', 1.0)), 'unambiguous'),
])
def test_entity_rejection(surface, word_class, candidates, reason):
    """Test each validity filter."""
    entity = AmbiguousEntity(surface, 'u', candidates, word_class)
    assert entity_rejection(entity) == reason


def test_language_filter_follows_configured_normalizer():
    """Test that the entity language check uses the configured thresholds."""
    city = AmbiguousEntity('new york city', 'u', meanings(('A', 0.5), ('B', 0.5)), WordClass.NAMED_ENTITY)
    mixed = AmbiguousEntity('paris 東', 'u', meanings(('A', 0.5), ('B', 0.5)), WordClass.NAMED_ENTITY)
    assert entity_rejection(city) == 'non-english'
    assert entity_rejection(mixed) == 'non-english'

    lenient = TextNormalizer(latin_ratio=0.5, stopword_min_tokens=4)
    assert entity_rejection(city, lenient) is None
    assert entity_rejection(mixed, lenient) is None
    assert filter_entities([city, mixed], lenient) == [city, mixed]
    assert filter_entities([city, mixed]) == []


def test_filter_entities_on_fixture(provider):
    """Test that unambiguous and other-class mentions are filtered out."""
    tagger = LexiconTagger(provider.lexicon())
    detected = detect_entities(tweet('the louvre and a stag beetle at play with the python'), provider, tagger)
    assert [e.surface for e in detected] == ['louvre', 'stag beetle', 'play', 'python']
    assert [e.surface for e in filter_entities(detected)] == ['python']


def test_lexicon_tagger_default():
    """Test that unknown surfaces get the default class."""
    tagger = LexiconTagger({'Paris': WordClass.NAMED_ENTITY})
    assert tagger.tag('paris') is WordClass.NAMED_ENTITY
    assert tagger.tag('tuesday') is WordClass.OTHER


def test_prior_frequency_rank_ties_by_topic_id():
    """Test descending prior with ties broken by topic id."""
    entity = AmbiguousEntity('x', 'u', meanings(('b', 0.3), ('c', 0.4), ('a', 0.3)))
    assert [c.topic_id for c in prior_frequency_rank(entity)] == ['c', 'a', 'b']


def test_provider_top_rank_uses_confidence():
    """Test that provider confidence outranks the prior when present."""
    entity = AmbiguousEntity(
        'jaguar', 'u', (CandidateMeaning('Jaguar_Cars', 0.55, 0.4), CandidateMeaning('Jaguar', 0.45, 0.6))
    )
    assert [c.topic_id for c in provider_top_rank(entity)] == ['Jaguar', 'Jaguar_Cars']


def test_candidate_count_stats():
    """Test min, mean, median and max candidates per entity."""
    entities = [
        AmbiguousEntity('a', 'u', meanings(*[(f't{i}', 0.1) for i in range(n)]))
        for n in (2, 3, 4, 4, 12)
    ]
    stats = candidate_count_stats(entities)
    assert (stats.count, stats.minimum, stats.maximum) == (5, 2, 12)
    assert stats.mean == 5.0
    assert stats.median == 4.0
    assert candidate_count_stats([]).count == 0
