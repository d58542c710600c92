"""Reader and writer for the flat key-value file grammar.

One ``key = value`` per line; ``#`` starts a comment; a ``[name]`` header opens
a new block of keys that belongs to that header until the next header. Keys
before the first header are top-level.
"""

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

from utils.errors import InvalidConfig, IoFailure

logger = logging.getLogger(__name__)

Blocks = List[Tuple[str, Dict[str, str]]]


def parse_keyvalue(text: str) -> Tuple[Dict[str, str], Blocks]:
    """
    Parse key-value text.

    Args:
        text: File contents

    Returns:
        Tuple of (top-level keys, list of (header, keys) blocks in file order)
    """
    top: Dict[str, str] = {}
    blocks: Blocks = []
    current = top

    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if not name:
                raise InvalidConfig(f"Line {number}: empty block header")
            current = {}
            blocks.append((name, current))
            continue

        if "=" not in line:
            raise InvalidConfig(f"Line {number}: expected 'key = value', got {raw!r}")

        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InvalidConfig(f"Line {number}: missing key")
        current[key.lower()] = value

    return top, blocks


def load_keyvalue(path: Union[str, Path]) -> Tuple[Dict[str, str], Blocks]:
    """Read and parse a key-value file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read {path}: {e}") from e
    return parse_keyvalue(text)


def format_keyvalue(top: Dict[str, object], blocks: List[Tuple[str, Dict[str, object]]] = ()) -> str:
    """Render top-level keys and blocks back to text."""
    lines = [f"{key} = {value}" for key, value in top.items()]
    for name, keys in blocks:
        lines.append("")
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {value}" for key, value in keys.items())
    return "\n".join(lines) + "\n"


def parse_list(value: str, cast=float) -> List:
    """Split a comma-separated value into typed items."""
    return [cast(item.strip()) for item in value.split(",") if item.strip()]
