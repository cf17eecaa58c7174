"""Line reading shared by the data file loaders."""

from pathlib import Path
from typing import Iterator, Tuple, Union

from .errors import SnapshotFormatError


def numbered_lines(path: Union[str, Path]) -> Iterator[Tuple[int, str]]:
    """Yield ``(line_no, line)`` pairs of a UTF-8 file, line endings as ``\\n``.

    Each line is decoded on its own so an undecodable byte is reported as a
    SnapshotFormatError on the line that holds it.
    """
    path = Path(path)
    with open(path, 'rb') as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as e:
                raise SnapshotFormatError(path, line_no, f"invalid UTF-8 at byte {e.start}") from e
            if line.endswith('\r\n'):
                line = line[:-2] + '\n'
            yield line_no, line
