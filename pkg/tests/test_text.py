import random
from pathlib import Path

import pytest

from entsense.errors import SnapshotFormatError
from entsense.text import (
    DEFAULT_WORDLIST,
    MENTION,
    STOPWORDS,
    Platform,
    TextNormalizer,
    Utterance,
    UtteranceKind,
    clean_article_text,
    content_word_count,
    is_english,
    load_utterances,
    load_wordlist,
    preprocess_utterance,
    split_camel_case,
    strip_markup,
    write_utterances,
)

GOLDEN = Path(__file__).parent / 'fixtures' / 'golden'


def utterance(raw, platform=Platform.TWITTER, kind=UtteranceKind.TWEET):
    return Utterance('u1', platform, kind, raw, user_id='someone')


def test_preprocessing_golden_file():
    """Test every short-text rule against the byte-exact golden output."""
    lines = []
    for u in load_utterances(GOLDEN / 'preprocess.in.tsv'):
        out = preprocess_utterance(u)
        flag = {True: 'true', False: 'false', None: 'unknown'}[out.english]
        lines.append(f"{u.utterance_id}\t{flag}\t{' '.join(out.normalized)}\n")
    expected = (GOLDEN / 'preprocess.out.tsv').read_bytes()
    assert ''.join(lines).encode('utf-8') == expected


def test_embedded_word_lists():
    """Test that packaged stopwords and wordlist load without their headers."""
    assert 'the' in STOPWORDS
    assert not any(w.startswith('#') for w in STOPWORDS | DEFAULT_WORDLIST)
    assert {'beetle', 'python', 'office'} <= DEFAULT_WORDLIST


def test_custom_wordlist_extends_default(tmp_path):
    """Test that a configured wordlist adds to the embedded one."""
    path = tmp_path / 'words.txt'
    path.write_text('# extra\nTGIF\n')
    words = load_wordlist(path)
    assert 'tgif' in words
    assert 'beetle' in words


def test_custom_wordlist_changes_hashtags(tmp_path):
    """Test that a hashtag is kept once its word is known."""
    normalizer = TextNormalizer(wordlist=DEFAULT_WORDLIST | {'tgif'})
    assert normalizer.tokens('so tired #tgif', Platform.TWITTER) == ['so', 'tired', 'tgif']


def test_raw_text_is_never_mutated():
    """Test that preprocessing returns a copy and keeps the raw text."""
    u = utterance('RT @a: the #python talk')
    out = preprocess_utterance(u)
    assert out.raw == u.raw
    assert u.normalized == ()
    assert out.normalized == (MENTION, 'the', 'python', 'talk')


def test_literal_mention_token_survives():
    """Test that an already-normalized MENTION token is kept on any platform."""
    normalizer = TextNormalizer()
    assert normalizer.tokens('MENTION said hi', Platform.FLICKR) == [MENTION, 'said', 'hi']


def test_mentions_only_on_twitter():
    """Test that @names are plain tokens outside twitter."""
    normalizer = TextNormalizer()
    assert normalizer.tokens('@studio upload', Platform.YOUTUBE) == ['studio', 'upload']


@pytest.mark.parametrize('raw, tokens', [
    ('(RT) the office', ['the', 'office']),
    ('"RT @bob: hi"', [MENTION, 'hi']),
    ('thanks (@alice)!', ['thanks', MENTION]),
    ('"@@carol" said', [MENTION, 'said']),
    ('the (#xyzzy) tip', ['the', 'tip']),
    ('the (#python), talk', ['the', 'python', 'talk']),
    ('#RT now', ['now']),
    ('c# and a@b', ['c', 'and', 'a@b']),
])
def test_twitter_rules_see_through_wrapping_punctuation(raw, tokens):
    """Test that quotes and brackets around markers do not bypass the twitter rules."""
    assert TextNormalizer().tokens(raw, Platform.TWITTER) == tokens


def test_mentions_only_utterance_is_not_flagged():
    """Test that an utterance with no content words gets no language verdict."""
    out = preprocess_utterance(utterance('@alice @bob'))
    assert out.normalized == (MENTION, MENTION)
    assert out.english is None

    tags = preprocess_utterance(utterance('hidden:filter=Boost', Platform.FLICKR, UtteranceKind.TAG))
    assert tags.normalized == ()
    assert tags.english is None


TOKEN_POOL = [
    'RT', '(RT)', '"RT', 'rt:', '@alice', '(@bob)', '"@carol:', '@@dave', '@', '#',
    '#python', '(#python)', '#xyzzy', '#CantWait', '#SuperBowlXLVI', 'the', 'office',
    'is', 'back', 'Beetles,', 'garden!', "don't", 'c#', 'a@b', 'foo#', '...',
    'IMG_0042.JPG', '_IMG_0042.JPG', 'dog.mp4', '(dog.mp4)', 'xyzzy.avi', 'www.',
    'hidden:filter=Boost', 'geo:lat=48.85', 'https://t.co/x', 'www.example.com',
    'MENTION', '東京', 'タワー', 'la', 'oficina',
]


def test_preprocessing_is_idempotent():
    """Test that preprocessing the normalized text changes nothing, on every platform."""
    rng = random.Random(2012)
    normalizer = TextNormalizer()
    for _ in range(2000):
        platform = rng.choice(list(Platform))
        raw = ' '.join(rng.choice(TOKEN_POOL) for _ in range(rng.randint(0, 8)))
        once = normalizer.preprocess(Utterance('x', platform, UtteranceKind.TWEET, raw))
        twice = normalizer.preprocess(Utterance('x', platform, UtteranceKind.TWEET, ' '.join(once.normalized)))
        assert twice.normalized == once.normalized, (platform, raw)


TWITTER_ONLY = ['RT', '(RT)', 'rt:', '@alice', '(@bob)', '#python', '#xyzzy', '(#CantWait)']
MEDIA_ONLY = ['IMG_0042.JPG', 'DSC-1234.jpeg', 'dog.mp4', 'xyzzy.avi', 'hidden:filter=Boost', 'geo:lat=48.85']
NEUTRAL = ['the', 'office', 'beetle', 'garden!', 'Paris,']


def test_platform_rules_do_not_leak():
    """Test that twitter markers are plain text on media platforms and vice versa."""
    rng = random.Random(99)
    normalizer = TextNormalizer()
    for _ in range(500):
        social = ' '.join(rng.choice(TWITTER_ONLY + NEUTRAL) for _ in range(rng.randint(1, 6)))
        media = ' '.join(rng.choice(MEDIA_ONLY + NEUTRAL) for _ in range(rng.randint(1, 6)))
        plain_social = normalizer.tokens(social, Platform.GENERIC)
        assert normalizer.tokens(social, Platform.FLICKR) == plain_social
        assert normalizer.tokens(social, Platform.YOUTUBE) == plain_social
        assert normalizer.tokens(media, Platform.TWITTER) == normalizer.tokens(media, Platform.GENERIC)


@pytest.mark.parametrize('body, parts', [
    ('CantWait', ['Cant', 'Wait']),
    ('python', ['python']),
    ('NASA', ['NASA']),
    ('SuperBowlXLVI', ['Super', 'Bowl', 'XLVI']),
    ('Top10Songs', ['Top', '10', 'Songs']),
])
def test_split_camel_case(body, parts):
    """Test camel-case hashtag splitting."""
    assert split_camel_case(body) == parts


@pytest.mark.parametrize('text, expected', [
    ('the office is back', True),
    ('beetle', True),
    ('beetle macro', True),
    ('beetle macro shot', False),
    ('la oficina es mi serie favorita', False),
    ('東京 タワー', False),
    ('', False),
    ('12345', False),
])
def test_is_english(text, expected):
    """Test the script-ratio and stopword language heuristic."""
    assert is_english(text) is expected


def test_latin_ratio_threshold():
    """Test that a mostly Latin text passes and a mostly non-Latin one fails."""
    normalizer = TextNormalizer(latin_ratio=0.5)
    assert normalizer.is_english('paris 東')
    assert not normalizer.is_english('a 東京タワー')


def test_strip_markup_removes_templates_refs_and_categories():
    """Test wiki markup stripping."""
    raw = "{{Infobox|name=X}}'''Bold''' text<ref>cite</ref> [[Paris|the city]] [[Category:Cities]] [[File:a.jpg|thumb|cap]]"
    text = strip_markup(raw)
    assert 'Infobox' not in text
    assert 'cite' not in text
    assert 'Cities' not in text
    assert 'thumb' not in text
    assert 'Bold text' in text
    assert 'the city' in text


def test_clean_article_text():
    """Test lowercasing, stopword removal and stemming of article text."""
    assert clean_article_text("The '''beetles''' are running in the gardens") == ['beetl', 'run', 'garden']
    assert clean_article_text('') == []


def test_content_word_count():
    """Test the non-stopword count used by the edit filter."""
    assert content_word_count('Beetle was a Dutch botanist.') == 3
    assert content_word_count('') == 0


def test_load_utterances_fixture():
    """Test reading the shipped utterance corpus."""
    utterances = load_utterances(Path(__file__).parent / 'fixtures' / 'corpus' / 'utterances.tsv')
    first = utterances[0]
    assert first.utterance_id == 'tvfan-01'
    assert first.platform is Platform.TWITTER
    assert first.kind is UtteranceKind.TWEET
    assert first.user_id == 'tvfan'
    assert first.normalized == ()
    assert {u.platform for u in utterances} == {Platform.TWITTER, Platform.FLICKR, Platform.YOUTUBE}


def test_load_utterances_rejects_bad_rows(tmp_path):
    """Test that malformed and duplicate rows report their line."""
    path = tmp_path / 'u.tsv'
    path.write_text('a\ttwitter\ttweet\tx\thello\nb\ttwitter\n')
    with pytest.raises(SnapshotFormatError) as excinfo:
        load_utterances(path)
    assert excinfo.value.line_no == 2

    path.write_text('a\ttwitter\ttweet\tx\thello\na\ttwitter\ttweet\tx\tagain\n')
    with pytest.raises(SnapshotFormatError, match='duplicate'):
        load_utterances(path)

    path.write_text('a\tmyspace\ttweet\tx\thello\n')
    with pytest.raises(SnapshotFormatError, match='myspace'):
        load_utterances(path)


def test_raw_text_keeps_tabs_after_fourth_field(tmp_path):
    """Test that the raw text column is taken verbatim."""
    path = tmp_path / 'u.tsv'
    path.write_text('a\tgeneric\tdescription\tx\tleft\tright\n')
    assert load_utterances(path)[0].raw == 'left\tright'


def test_write_utterances_flattens_newlines(tmp_path):
    """Test that written raw text stays on one line."""
    path = tmp_path / 'u.tsv'
    write_utterances([Utterance('a', Platform.FLICKR, UtteranceKind.DESCRIPTION, 'two\nlines', 'x')], path)
    assert path.read_text() == 'a\tflickr\tdescription\tx\ttwo lines\n'
