import shutil
from pathlib import Path

import pytest

from entsense.config import PipelineConfig
from entsense.graph import CategoryNode, KnowledgeGraph, TopicNode, load_snapshot
from entsense.pipeline import Pipeline

FIXTURES = Path(__file__).parent / 'fixtures'
CORPUS = FIXTURES / 'corpus'


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep ~/.config/entsense inside the test's temporary directory."""
    home = tmp_path / 'home'
    home.mkdir()
    monkeypatch.setattr('pathlib.Path.home', lambda: home)
    return home


@pytest.fixture
def corpus_dir(tmp_path):
    """Writable copy of the shipped fixture corpus."""
    target = tmp_path / 'corpus'
    shutil.copytree(CORPUS, target)
    return target


@pytest.fixture
def corpus_config(corpus_dir):
    return PipelineConfig.load(corpus_dir / 'config.yaml')


@pytest.fixture
def pipeline(corpus_config):
    return Pipeline(corpus_config)


@pytest.fixture(scope='session')
def corpus_graph():
    return load_snapshot(CORPUS / 'graph.txt', articles=CORPUS / 'articles.jsonl')


@pytest.fixture
def three_topic_graph():
    """Three topics over four categories: t1->c2, t2->c2,c4, t3->c4, c2->c1, c1->c3, c4->c3."""
    return KnowledgeGraph(
        [
            TopicNode('t1', categories=('c2',)),
            TopicNode('t2', categories=('c2', 'c4')),
            TopicNode('t3', categories=('c4',)),
        ],
        [
            CategoryNode('c1', ('c3',)),
            CategoryNode('c2', ('c1',)),
            CategoryNode('c3'),
            CategoryNode('c4', ('c3',)),
        ],
    )
