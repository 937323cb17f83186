"""Run-configuration parsing for the command-line front-end.

The format is plain UTF-8 structured text: ``[section]`` headers and
``key = value`` lines, ``#`` comments, repeated keys allowed where noted.
Channel sections accept either the shorthand constructor

    [forward]
    bsc_pair = 0.1 0.3

or an explicit row-major conditional probability table

    [backward]
    alphabet = 2 2 2          # input, legit-output, eve-output sizes
    row = 0.81 0.09 0.09 0.01 # P(y,z | x=0), row-major over (y, z)
    row = 0.01 0.09 0.09 0.81

Decimal strings are parsed to the nearest double exactly once, so the
probabilities a run used are reproducible bit-for-bit from the file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import Dmbc, TwoDmbcSetup, make_bsc_pair
from .probability import Alphabet, ConditionalPmf


class SkecConfigError(ValueError):
    """Malformed configuration; carries the offending line and field."""

    def __init__(self, message: str, line: int | None = None,
                 fieldname: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if fieldname is not None:
            where.append(f"field {fieldname!r}")
        super().__init__(f"{message}" + (f" ({', '.join(where)})" if where else ""))
        self.line = line
        self.fieldname = fieldname


@dataclass
class Section:
    name: str
    line: int
    entries: list[tuple[int, str, str]] = field(default_factory=list)

    def all(self, key: str) -> list[tuple[int, str]]:
        return [(ln, v) for ln, k, v in self.entries if k == key]

    def get(self, key: str, default: str | None = None) -> str | None:
        hits = self.all(key)
        if not hits:
            return default
        if len(hits) > 1:
            raise SkecConfigError(f"key given more than once", hits[1][0], key)
        return hits[0][1]

    def get_float(self, key: str, default=None):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise SkecConfigError(f"expected a number, got {raw!r}",
                                  self._line_of(key), key) from None

    def get_int(self, key: str, default=None):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise SkecConfigError(f"expected an integer, got {raw!r}",
                                  self._line_of(key), key) from None

    def get_flag(self, key: str, default: bool) -> bool:
        raw = self.get(key)
        if raw is None:
            return default
        if raw in ("on", "true", "yes", "1"):
            return True
        if raw in ("off", "false", "no", "0"):
            return False
        raise SkecConfigError(f"expected on/off, got {raw!r}", self._line_of(key), key)

    def _line_of(self, key: str) -> int | None:
        hits = self.all(key)
        return hits[0][0] if hits else None


@dataclass
class RunConfig:
    sections: dict[str, Section]
    path: str

    def section(self, name: str) -> Section | None:
        return self.sections.get(name)

    def require(self, name: str) -> Section:
        sec = self.sections.get(name)
        if sec is None:
            raise SkecConfigError(f"missing required section [{name}]")
        return sec


def parse_config_text(text: str, path: str = "<string>") -> RunConfig:
    sections: dict[str, Section] = {}
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise SkecConfigError("unterminated section header", lineno)
            name = line[1:-1].strip()
            if not name:
                raise SkecConfigError("empty section name", lineno)
            if name in sections:
                raise SkecConfigError(f"duplicate section [{name}]", lineno)
            current = Section(name=name, line=lineno)
            sections[name] = current
            continue
        if "=" not in line:
            raise SkecConfigError("expected 'key = value'", lineno)
        if current is None:
            raise SkecConfigError("entry outside any [section]", lineno)
        key, _, value = line.partition("=")
        current.entries.append((lineno, key.strip(), value.strip()))
    return RunConfig(sections=sections, path=path)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SkecConfigError(f"cannot read config: {exc}") from None
    return parse_config_text(text, path)


def _parse_floats(raw: str, line: int | None, key: str) -> list[float]:
    out = []
    for tok in raw.split():
        try:
            out.append(float(tok))
        except ValueError:
            raise SkecConfigError(f"expected numbers, got {tok!r}", line, key) from None
    return out


def build_channel(sec: Section) -> Dmbc:
    """Build one broadcast channel from a [forward]/[backward] section."""
    shorthand = sec.get("bsc_pair")
    if shorthand is not None:
        line = sec._line_of("bsc_pair")
        vals = _parse_floats(shorthand, line, "bsc_pair")
        if len(vals) != 2:
            raise SkecConfigError("bsc_pair needs exactly two crossovers",
                                  line, "bsc_pair")
        try:
            return make_bsc_pair(*vals)
        except Exception as exc:
            raise SkecConfigError(str(exc), line, "bsc_pair") from None
    alph = sec.get("alphabet")
    if alph is None:
        raise SkecConfigError(f"section [{sec.name}] needs 'bsc_pair' or "
                              "'alphabet' plus 'row' lines", sec.line)
    sizes = _parse_floats(alph, sec._line_of("alphabet"), "alphabet")
    if len(sizes) != 3 or any(s != int(s) or s < 1 for s in sizes):
        raise SkecConfigError("alphabet needs three positive integers "
                              "(input, legit, eve)", sec._line_of("alphabet"),
                              "alphabet")
    nx, ny, nz = (int(s) for s in sizes)
    rows = sec.all("row")
    if len(rows) != nx:
        raise SkecConfigError(f"expected {nx} 'row' lines, found {len(rows)}",
                              sec.line, "row")
    table = np.empty((nx, ny, nz))
    for x, (line, raw) in enumerate(rows):
        vals = _parse_floats(raw, line, "row")
        if len(vals) != ny * nz:
            raise SkecConfigError(f"row {x} needs {ny * nz} probabilities, "
                                  f"got {len(vals)}", line, "row")
        table[x] = np.asarray(vals).reshape(ny, nz)
    try:
        law = ConditionalPmf(Alphabet(nx), (Alphabet(ny), Alphabet(nz)), table)
        return Dmbc(law)
    except Exception as exc:
        raise SkecConfigError(str(exc), sec.line) from None


def build_setup(config: RunConfig) -> TwoDmbcSetup:
    return TwoDmbcSetup(forward=build_channel(config.require("forward")),
                        backward=build_channel(config.require("backward")))


def channel_is_bsc_pair(sec: Section) -> tuple[float, float] | None:
    raw = sec.get("bsc_pair")
    if raw is None:
        return None
    vals = _parse_floats(raw, sec._line_of("bsc_pair"), "bsc_pair")
    return (vals[0], vals[1]) if len(vals) == 2 else None
