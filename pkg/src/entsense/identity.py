"""Bridging social-platform usernames to knowledge-base accounts.

Annotation format (UTF-8, tab separated)::

    username  platform  label

with ``label`` one of ``same-person``, ``different-person``, ``undetermined``.
"""

import logging
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import SnapshotFormatError
from .records import numbered_lines

logger = logging.getLogger(__name__)


class Verification(str, Enum):
    UNVERIFIED = 'unverified'
    SAME_PERSON = 'same-person'
    DIFFERENT_PERSON = 'different-person'
    UNDETERMINED = 'undetermined'


@dataclass(frozen=True)
class BridgeResult:
    platform: str
    username: str
    matched: bool
    normalized: str
    kb_username: Optional[str] = None
    verification: Verification = Verification.UNVERIFIED


def _canonical(name: str) -> str:
    return name.strip().replace('_', ' ')


def normalize_username(name: str, strict: bool = False) -> str:
    """Comparison key for a username.

    Default mode case-folds. Strict mode only applies the knowledge-base
    convention of an upper-case first letter. Underscores and spaces are
    always equivalent.
    """
    name = _canonical(name)
    if strict:
        return name[:1].upper() + name[1:]
    return name.casefold()


def match_usernames(
    usernames: Iterable[str],
    kb: Iterable[str],
    platform: str = 'generic',
    strict: bool = False,
) -> List[BridgeResult]:
    """Match each social username against the knowledge-base account set."""
    index: Dict[str, str] = {}
    for kb_name in sorted(kb):
        key = normalize_username(kb_name, strict)
        if key in index and index[key] != kb_name:
            logger.warning("Accounts %s and %s collide after normalization", index[key], kb_name)
            continue
        index[key] = kb_name
    results = []
    for name in usernames:
        key = normalize_username(name, strict)
        kb_name = index.get(key)
        results.append(
            BridgeResult(
                platform=platform,
                username=name,
                matched=kb_name is not None,
                normalized=key,
                kb_username=kb_name,
            )
        )
    return results


def load_usernames(path: Union[str, Path]) -> List[Tuple[str, str]]:
    """Read ``username  platform`` pairs."""
    path = Path(path)
    pairs = []
    for line_no, line in numbered_lines(path):
        line = line.rstrip('\n')
        if not line.strip() or line.startswith('#'):
            continue
        fields = line.split('\t')
        if len(fields) != 2:
            raise SnapshotFormatError(path, line_no, "expected username and platform")
        pairs.append((fields[0].strip(), fields[1].strip()))
    return pairs


def load_annotations(path: Union[str, Path]) -> Dict[Tuple[str, str], Verification]:
    """Read verification labels keyed by (platform, username)."""
    path = Path(path)
    labels: Dict[Tuple[str, str], Verification] = {}
    for line_no, line in numbered_lines(path):
        line = line.rstrip('\n')
        if not line.strip() or line.startswith('#'):
            continue
        fields = line.split('\t')
        if len(fields) != 3:
            raise SnapshotFormatError(path, line_no, "expected username, platform and label")
        username, platform, label = (f.strip() for f in fields)
        try:
            verification = Verification(label)
        except ValueError as e:
            raise SnapshotFormatError(path, line_no, str(e)) from e
        labels[(platform, username)] = verification
    return labels


def apply_verification(
    results: Sequence[BridgeResult], labels: Mapping[Tuple[str, str], Verification]
) -> List[BridgeResult]:
    """Attach annotated verification labels; unlabeled results stay unverified."""
    return [
        replace(r, verification=labels.get((r.platform, r.username), Verification.UNVERIFIED))
        for r in results
    ]


def percent(part: int, whole: int) -> str:
    """Percentage with one decimal, computed from integer counts."""
    if whole == 0:
        return '0.0%'
    tenths = (200 * 10 * part + whole) // (2 * whole)
    return f'{tenths // 10}.{tenths % 10}%'


@dataclass(frozen=True)
class PlatformBridgeStats:
    platform: str
    total: int
    matched: int
    verification: Mapping[str, int]

    @property
    def match_rate(self) -> str:
        return percent(self.matched, self.total)


def bridge_report(results: Sequence[BridgeResult]) -> List[PlatformBridgeStats]:
    """Per-platform totals, matches and verification counts, platforms sorted."""
    by_platform: Dict[str, List[BridgeResult]] = {}
    for r in results:
        by_platform.setdefault(r.platform, []).append(r)
    report = []
    for platform in sorted(by_platform):
        rows = by_platform[platform]
        labels = Counter(r.verification.value for r in rows if r.matched)
        report.append(
            PlatformBridgeStats(
                platform=platform,
                total=len(rows),
                matched=sum(1 for r in rows if r.matched),
                verification={v.value: labels.get(v.value, 0) for v in Verification},
            )
        )
    return report


def format_bridge_report(report: Sequence[PlatformBridgeStats]) -> str:
    """Tab-separated table: platform, total, matched, rate and verification counts."""
    header = ['platform', 'total', 'matched', 'rate'] + [v.value for v in Verification]
    lines = ['\t'.join(header)]
    for row in report:
        lines.append(
            '\t'.join(
                [row.platform, str(row.total), str(row.matched), row.match_rate]
                + [str(row.verification[v.value]) for v in Verification]
            )
        )
    return '\n'.join(lines) + '\n'
