"""Identifiers embedded in every emitted artifact."""

import hashlib
import json
from dataclasses import asdict, is_dataclass
from functools import lru_cache
from pathlib import Path

from . import __version__


@lru_cache(maxsize=1)
def build_id():
    """Package version plus a digest of the package sources."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def config_digest(config):
    """Short digest of a JSON-serialisable config or dataclass."""
    if is_dataclass(config):
        config = asdict(config)
    blob = json.dumps(config, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def fmt(value):
    """Decimal text with 17 significant digits for floats."""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)
