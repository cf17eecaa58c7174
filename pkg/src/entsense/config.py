"""Configuration management for entsense."""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)


def deep_merge(defaults: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Deep merge two dictionaries, with overrides taking precedence.

    Recursively merges nested dictionaries, so that:
    - Missing nested keys remain populated from defaults
    - Explicit user overrides win deterministically

    Args:
        defaults: The default dictionary (base)
        overrides: The dictionary with overrides (takes precedence)

    Returns:
        A new dictionary with deep-merged values
    """
    result = copy.deepcopy(defaults)

    for key, value in overrides.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = deep_merge(result[key], value)
        else:
            result[key] = copy.deepcopy(value)

    return result


DEFAULT_CONFIG: Dict[str, Any] = {
    'graph': {
        'snapshot': None,
        'articles': None,
        'max_depth': 4,
    },
    'ranking': {
        'alpha': 0.5,
        'min_df': 2,
        'max_df_ratio': 0.9,
        'freq_by_edits': False,
    },
    'activity': {
        'min_utterances': 100,
        'min_edits': 100,
    },
    'filters': {
        'min_nonstop_words': 100,
    },
    'text': {
        'wordlist': None,
        'latin_ratio': 0.85,
        'stopword_min_tokens': 3,
    },
    'identity': {
        'strict': False,
    },
    'seeds': {
        'random_candidate': 0,
        'random_user': 0,
    },
    'paths': {
        'edits': None,
        'utterances': None,
        'candidates': None,
        'gold': None,
        'annotations': None,
        'output_dir': 'entsense-out',
    },
    'ingest': {
        'endpoint': 'https://en.wikipedia.org/w/api.php',
        'mode': 'replay',
        'recordings': None,
        'utterance_source': None,
        'usernames': None,
        'batch_size': 50,
        'timeout': 30,
        'contrib_limit': 500,
        'user_agent': 'entsense/0.1',
    },
}

INGEST_MODES = ('live', 'record', 'replay')


def default_config_dir() -> Path:
    """Return the per-user configuration directory."""
    return Path.home() / '.config' / 'entsense'


class PipelineConfig:
    """Validated, deep-merged pipeline configuration.

    Relative paths inside a configuration file are resolved against the
    directory holding that file.
    """

    def __init__(self, data: Optional[Dict[str, Any]] = None, base_dir: Optional[Path] = None):
        self.data = deep_merge(DEFAULT_CONFIG, data or {})
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        self._validate()

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'PipelineConfig':
        """Load configuration from a YAML file."""
        path = Path(path).expanduser()
        try:
            with open(path, 'r', encoding='utf-8') as f:
                raw = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in config file {path}: {e}") from e
        except UnicodeDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid UTF-8: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"Config file {path} must contain a mapping")
        logger.debug("Loaded config from %s", path)
        return cls(raw, base_dir=path.parent)

    def _validate(self) -> None:
        alpha = self.alpha
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"ranking.alpha must be between 0.0 and 1.0, got {alpha}")
        for section, key in (
            ('graph', 'max_depth'),
            ('activity', 'min_utterances'),
            ('activity', 'min_edits'),
            ('filters', 'min_nonstop_words'),
            ('ranking', 'min_df'),
            ('ingest', 'batch_size'),
            ('ingest', 'contrib_limit'),
        ):
            value = self.data[section][key]
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{section}.{key} must be a positive integer, got {value!r}")
        ratio = self.max_df_ratio
        if not 0.0 < ratio <= 1.0:
            raise ConfigError(f"ranking.max_df_ratio must be in (0, 1], got {ratio}")
        latin = float(self.data['text']['latin_ratio'])
        if not 0.0 < latin <= 1.0:
            raise ConfigError(f"text.latin_ratio must be in (0, 1], got {latin}")
        if self.ingest_mode not in INGEST_MODES:
            raise ConfigError(
                f"ingest.mode must be one of {', '.join(INGEST_MODES)}, got {self.ingest_mode!r}"
            )

    def to_dict(self) -> Dict[str, Any]:
        """Return a copy of the merged configuration."""
        return copy.deepcopy(self.data)

    def dump(self) -> str:
        """Serialize to the canonical YAML form."""
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)

    def save(self, path: Union[str, Path]) -> None:
        """Write the canonical form to a file."""
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.dump())

    def with_overrides(self, overrides: Dict[str, Any]) -> 'PipelineConfig':
        """Return a new config with overrides deep-merged on top."""
        return PipelineConfig(deep_merge(self.data, overrides), base_dir=self.base_dir)

    def path(self, section: str, key: str) -> Optional[Path]:
        """Resolve a configured path, or None if unset."""
        value = self.data.get(section, {}).get(key)
        if not value:
            return None
        p = Path(value).expanduser()
        if not p.is_absolute():
            p = self.base_dir / p
        return p

    def require_path(self, section: str, key: str) -> Path:
        """Resolve a configured path, failing if it is unset."""
        p = self.path(section, key)
        if p is None:
            raise ConfigError(f"{section}.{key} is not configured")
        return p

    @property
    def max_depth(self) -> int:
        return int(self.data['graph']['max_depth'])

    @property
    def alpha(self) -> float:
        try:
            return float(self.data['ranking']['alpha'])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"ranking.alpha must be a number: {e}") from e

    @property
    def min_df(self) -> int:
        return int(self.data['ranking']['min_df'])

    @property
    def max_df_ratio(self) -> float:
        return float(self.data['ranking']['max_df_ratio'])

    @property
    def freq_by_edits(self) -> bool:
        return bool(self.data['ranking']['freq_by_edits'])

    @property
    def min_utterances(self) -> int:
        return int(self.data['activity']['min_utterances'])

    @property
    def min_edits(self) -> int:
        return int(self.data['activity']['min_edits'])

    @property
    def min_nonstop_words(self) -> int:
        return int(self.data['filters']['min_nonstop_words'])

    @property
    def strict_usernames(self) -> bool:
        return bool(self.data['identity']['strict'])

    @property
    def seed_random_candidate(self) -> int:
        return int(self.data['seeds']['random_candidate'])

    @property
    def seed_random_user(self) -> int:
        return int(self.data['seeds']['random_user'])

    @property
    def ingest_mode(self) -> str:
        return str(self.data['ingest']['mode'])

    @property
    def output_dir(self) -> Path:
        return self.require_path('paths', 'output_dir')
