"""Line-oriented ``key = value`` parser shared by application.properties and
experiment configs.

Experiment configs add ``[section]`` headers; keys below a header are stored as
``section.key``. Comments start with ``#`` or ``;``. Every entry remembers the
line it came from so validation errors can point back into the file.
"""

from dataclasses import dataclass
from pathlib import Path

from src.application.common.errors import ConfigParseError


@dataclass(frozen=True)
class PropertyEntry:
    key: str
    value: str
    line: int


def parse_properties(text: str, allow_sections: bool = False) -> dict[str, PropertyEntry]:
    entries: dict[str, PropertyEntry] = {}
    section = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("["):
            if not allow_sections:
                raise ConfigParseError("sections are not allowed here", line=number)
            if not line.endswith("]") or len(line) < 3:
                raise ConfigParseError(f"malformed section header {line!r}", line=number)
            section = line[1:-1].strip().lower()
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got {line!r}", line=number)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigParseError("empty key", line=number)
        full_key = f"{section}.{key}" if section else key
        if full_key in entries:
            raise ConfigParseError(
                f"duplicate key (first defined on line {entries[full_key].line})",
                line=number, field=full_key,
            )
        entries[full_key] = PropertyEntry(full_key, value.strip(), number)
    return entries


def read_properties(path: Path, allow_sections: bool = False) -> dict[str, PropertyEntry]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_properties(f.read(), allow_sections=allow_sections)
