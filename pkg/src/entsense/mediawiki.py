"""MediaWiki action API client with record and replay modes.

In ``record`` mode every response is also written to a ``ResponseStore``;
in ``replay`` mode responses come only from the store and the network is
never touched.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import requests

from .errors import ConfigError, MalformedResponseError, ReplayMissError, ServiceError

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = 'https://en.wikipedia.org/w/api.php'
DEFAULT_USER_AGENT = 'entsense/0.1'
DEFAULT_TIMEOUT = 30
DEFAULT_BATCH_SIZE = 50
MAX_CONTRIB_LIMIT = 500
CATEGORY_PREFIX = 'Category:'
MODES = ('live', 'record', 'replay')


def page_id(title: str) -> str:
    """Snapshot id of an article title."""
    return title.strip().replace(' ', '_')


def page_title(node_id: str) -> str:
    return node_id.replace('_', ' ')


def category_id(title: str) -> str:
    """Snapshot id of a category page title, without the namespace prefix."""
    title = title.strip()
    if title.startswith(CATEGORY_PREFIX):
        title = title[len(CATEGORY_PREFIX):]
    return page_id(title)


def _canonical_params(params: Dict[str, Any]) -> Dict[str, str]:
    return {str(k): str(v) for k, v in sorted(params.items())}


class ResponseStore:
    """Directory of recorded JSON responses keyed by their request parameters."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    @staticmethod
    def key(params: Dict[str, Any]) -> str:
        canonical = json.dumps(_canonical_params(params), sort_keys=True, separators=(',', ':'))
        return hashlib.sha1(canonical.encode('utf-8')).hexdigest()

    def path_for(self, params: Dict[str, Any]) -> Path:
        return self.directory / f'{self.key(params)}.json'

    def get(self, params: Dict[str, Any]) -> Optional[Dict[str, Any]]:
        path = self.path_for(params)
        if not path.exists():
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)['response']
        except (OSError, ValueError, KeyError) as e:
            raise MalformedResponseError(f"Unreadable recording {path}: {e}") from e

    def put(self, params: Dict[str, Any], payload: Dict[str, Any]) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(params)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(
                {'params': _canonical_params(params), 'response': payload},
                f,
                indent=1,
                sort_keys=True,
                ensure_ascii=False,
            )
            f.write('\n')
        return path


@dataclass(frozen=True)
class PageDetails:
    title: str
    text: str
    categories: Tuple[str, ...]


def _batches(items: Sequence[str], size: int) -> Iterator[List[str]]:
    for start in range(0, len(items), size):
        yield list(items[start:start + size])


class MediaWikiClient:
    """Read-only client for the parts of the action API ingestion needs."""

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        mode: str = 'live',
        store: Optional[ResponseStore] = None,
        session: Optional[requests.Session] = None,
        timeout: float = DEFAULT_TIMEOUT,
        token: Optional[str] = None,
        user_agent: Optional[str] = None,
        batch_size: int = DEFAULT_BATCH_SIZE,
    ):
        if mode not in MODES:
            raise ConfigError(f"Unknown client mode {mode!r}; expected one of {', '.join(MODES)}")
        if mode != 'live' and store is None:
            raise ConfigError(f"Mode {mode} needs a recordings directory (ingest.recordings)")
        self.endpoint = endpoint
        self.mode = mode
        self.store = store
        self.session = session or requests.Session()
        self.timeout = timeout
        self.batch_size = batch_size
        self.token = token if token is not None else os.environ.get('ENTSENSE_API_TOKEN')
        self.user_agent = os.environ.get('ENTSENSE_USER_AGENT') or user_agent or DEFAULT_USER_AGENT

    @property
    def headers(self) -> Dict[str, str]:
        headers = {'User-Agent': self.user_agent}
        if self.token:
            headers['Authorization'] = f'Bearer {self.token}'
        return headers

    def _get(self, params: Dict[str, Any]) -> Dict[str, Any]:
        params = {**params, 'format': 'json', 'formatversion': 2}
        if self.mode == 'replay':
            payload = self.store.get(params)
            if payload is None:
                raise ReplayMissError(
                    f"No recorded response for {json.dumps(_canonical_params(params), sort_keys=True)}"
                )
        else:
            logger.debug("GET %s %s", self.endpoint, params)
            try:
                response = self.session.get(
                    self.endpoint, params=params, headers=self.headers, timeout=self.timeout
                )
                response.raise_for_status()
            except requests.exceptions.RequestException as e:
                raise ServiceError(f"Request to {self.endpoint} failed: {e}") from e
            try:
                payload = response.json()
            except ValueError as e:
                raise MalformedResponseError(f"Response from {self.endpoint} is not JSON") from e
            if self.mode == 'record' and isinstance(payload, dict):
                self.store.put(params, payload)

        if not isinstance(payload, dict):
            raise MalformedResponseError(f"Expected a JSON object from {self.endpoint}")
        if 'error' in payload:
            error = payload['error'] if isinstance(payload['error'], dict) else {}
            raise ServiceError(
                f"API error {error.get('code', 'unknown')}: {error.get('info', payload['error'])}"
            )
        return payload

    def query(self, params: Dict[str, Any]) -> Iterator[Dict[str, Any]]:
        """Yield the ``query`` part of every continuation of a query."""
        params = {'action': 'query', **params}
        cont: Dict[str, Any] = {}
        while True:
            payload = self._get({**params, **cont})
            yield payload.get('query') or {}
            if 'continue' not in payload:
                break
            cont = payload['continue']

    def existing_users(self, names: Iterable[str]) -> Set[str]:
        """Names among ``names`` that have an account, as the wiki spells them."""
        found: Set[str] = set()
        for batch in _batches(sorted(set(names)), self.batch_size):
            for result in self.query({'list': 'users', 'ususers': '|'.join(batch)}):
                for user in result.get('users', []):
                    if user.get('missing') or user.get('invalid') or 'name' not in user:
                        continue
                    found.add(user['name'])
        return found

    def user_contributions(self, user: str, limit: int = MAX_CONTRIB_LIMIT) -> List[Dict[str, Any]]:
        """Main-namespace contributions of a user, newest first, at most ``limit``."""
        params = {
            'list': 'usercontribs',
            'ucuser': user,
            'uclimit': min(limit, MAX_CONTRIB_LIMIT),
            'ucnamespace': 0,
            'ucprop': 'ids|title|timestamp|comment|sizediff|flags',
        }
        contribs: List[Dict[str, Any]] = []
        for result in self.query(params):
            contribs.extend(result.get('usercontribs', []))
            if len(contribs) >= limit:
                break
        return contribs[:limit]

    def page_details(self, titles: Iterable[str]) -> Dict[str, PageDetails]:
        """Latest wikitext and visible categories of each existing page."""
        texts: Dict[str, str] = {}
        categories: Dict[str, List[str]] = {}
        for batch in _batches(sorted(set(titles)), self.batch_size):
            params = {
                'prop': 'revisions|categories',
                'rvprop': 'content',
                'rvslots': 'main',
                'clshow': '!hidden',
                'cllimit': 'max',
                'titles': '|'.join(batch),
            }
            for result in self.query(params):
                for page in result.get('pages', []):
                    title = page.get('title')
                    if title is None:
                        logger.warning("Skipping page record without title")
                        continue
                    if page.get('missing') or page.get('invalid'):
                        logger.warning("Page %s does not exist", title)
                        continue
                    for revision in page.get('revisions', []):
                        content = revision.get('slots', {}).get('main', {}).get('content', revision.get('content'))
                        if content is not None:
                            texts[title] = content
                    categories.setdefault(title, []).extend(
                        c['title'] for c in page.get('categories', []) if 'title' in c
                    )
        return {
            title: PageDetails(
                title=title,
                text=texts.get(title, ''),
                categories=tuple(sorted({category_id(c) for c in categories.get(title, [])})),
            )
            for title in sorted(set(texts) | set(categories))
        }

    def category_parents(self, categories: Iterable[str]) -> Dict[str, Tuple[str, ...]]:
        """Visible parent categories of each category id."""
        parents: Dict[str, Set[str]] = {c: set() for c in categories}
        titles = sorted(CATEGORY_PREFIX + page_title(c) for c in parents)
        for batch in _batches(titles, self.batch_size):
            params = {
                'prop': 'categories',
                'clshow': '!hidden',
                'cllimit': 'max',
                'titles': '|'.join(batch),
            }
            for result in self.query(params):
                for page in result.get('pages', []):
                    if 'title' not in page:
                        continue
                    child = category_id(page['title'])
                    parents.setdefault(child, set()).update(
                        category_id(c['title']) for c in page.get('categories', []) if 'title' in c
                    )
        return {c: tuple(sorted(p)) for c, p in sorted(parents.items())}


def client_from_config(config) -> MediaWikiClient:
    """Build a client from the ``ingest`` section of a PipelineConfig."""
    ingest = config.data['ingest']
    recordings = config.path('ingest', 'recordings')
    return MediaWikiClient(
        endpoint=ingest['endpoint'],
        mode=config.ingest_mode,
        store=ResponseStore(recordings) if recordings is not None else None,
        timeout=ingest['timeout'],
        user_agent=ingest['user_agent'],
        batch_size=ingest['batch_size'],
    )
