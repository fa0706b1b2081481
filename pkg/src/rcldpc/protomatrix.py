"""Protomatrices and the nested rate-compatible family built by extension.

A protomatrix stores edge multiplicities between check types (rows) and
variable types (columns).  The family grows from a 3 x 11 daughter code: each
extension adds one check row and one degree-1 variable column hanging off it,
so every higher-rate member is the top-left block of every lower-rate one.

Indices are 0-based in memory and 1-based in every text format.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np


class InvalidProtomatrixError(ValueError):
    """Raised when a protomatrix violates its structural invariants."""


class ProtomatrixParseError(ValueError):
    """Raised on malformed protomatrix text; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class FamilyRangeError(IndexError):
    """Raised when an extension count falls outside the family."""


@dataclass(frozen=True, eq=False)
class Protomatrix:
    """Edge-multiplicity matrix plus the set of punctured columns.

    Parameters
    ----------
    entries : array_like of int, shape (n_c, n_v)
        Number of edges between check type ``i`` and variable type ``j``.
    punctured : iterable of int
        0-based indices of columns that are never transmitted.
    """

    entries: np.ndarray
    punctured: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidProtomatrixError("entries must be a non-empty 2-D matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "punctured", frozenset(int(c) for c in self.punctured))

        n_c, n_v = arr.shape
        if (arr < 0).any():
            raise InvalidProtomatrixError("edge multiplicities must be non-negative")
        empty_rows = np.flatnonzero(arr.sum(axis=1) == 0)
        if empty_rows.size:
            raise InvalidProtomatrixError(f"row {empty_rows[0] + 1} has no edges")
        empty_cols = np.flatnonzero(arr.sum(axis=0) == 0)
        if empty_cols.size:
            raise InvalidProtomatrixError(f"column {empty_cols[0] + 1} has no edges")
        bad = [c for c in self.punctured if not 0 <= c < n_v]
        if bad:
            raise InvalidProtomatrixError(f"punctured column {bad[0] + 1} out of range")
        if n_v <= n_c:
            raise InvalidProtomatrixError(
                f"{n_c} x {n_v} protomatrix has no positive rate")
        if n_v - len(self.punctured) <= 0:
            raise InvalidProtomatrixError("every column is punctured")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def n_checks(self) -> int:
        return self.entries.shape[0]

    @property
    def n_vars(self) -> int:
        return self.entries.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Protomatrix):
            return NotImplemented
        return (self.entries.shape == other.entries.shape
                and bool((self.entries == other.entries).all())
                and self.punctured == other.punctured)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes(), self.punctured))

    def submatrix(self, n_c: int, n_v: int) -> "Protomatrix":
        """Top-left ``n_c x n_v`` block, keeping punctured columns that survive."""
        return Protomatrix(self.entries[:n_c, :n_v],
                           frozenset(c for c in self.punctured if c < n_v))

    def extend(self, row: Iterable[int]) -> "Protomatrix":
        """Append one check row over the current columns plus a new degree-1 column."""
        row = np.asarray(list(row), dtype=np.int64)
        if row.shape != (self.n_vars,):
            raise InvalidProtomatrixError(
                f"extension row has {row.size} entries, expected {self.n_vars}")
        n_c, n_v = self.shape
        out = np.zeros((n_c + 1, n_v + 1), dtype=np.int64)
        out[:n_c, :n_v] = self.entries
        out[n_c, :n_v] = row
        out[n_c, n_v] = 1
        return Protomatrix(out, self.punctured)

    def to_text(self) -> str:
        return format_protomatrix(self)


def rate(p: Protomatrix) -> Fraction:
    """Design rate ``(n_v - n_c) / (n_v - |punctured|)`` as an exact fraction."""
    n_c, n_v = p.shape
    denom = n_v - len(p.punctured)
    if denom <= 0:
        raise InvalidProtomatrixError("every column is punctured")
    return Fraction(n_v - n_c, denom)


def format_protomatrix(p: Protomatrix) -> str:
    n_c, n_v = p.shape
    lines = [f"{n_c} {n_v}"]
    lines += [" ".join(str(int(v)) for v in row) for row in p.entries]
    lines.append("punctured:" + "".join(f" {c + 1}" for c in sorted(p.punctured)))
    return "\n".join(lines) + "\n"


def parse_protomatrix(text: str) -> Protomatrix:
    """Parse the ``n_c n_v`` / rows / ``punctured: ...`` text format.

    Blank lines and ``#`` comment lines are ignored; reported line numbers
    refer to the original text.
    """
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ProtomatrixParseError("empty protomatrix text", 1)

    lineno, header = lines[0]
    try:
        n_c, n_v = (int(t) for t in header.split())
    except ValueError:
        raise ProtomatrixParseError(
            f"expected header 'n_c n_v', got {header!r}", lineno) from None
    if n_c <= 0 or n_v <= 0:
        raise ProtomatrixParseError("dimensions must be positive", lineno)

    rows = []
    for lineno, ln in lines[1:n_c + 1]:
        try:
            vals = [int(t) for t in ln.split()]
        except ValueError:
            raise ProtomatrixParseError(f"non-integer entry in {ln!r}", lineno) from None
        if len(vals) != n_v:
            raise ProtomatrixParseError(
                f"row has {len(vals)} entries, expected {n_v}", lineno)
        rows.append(vals)
    if len(lines) < n_c + 2:
        raise ProtomatrixParseError(
            f"expected {n_c} rows and a 'punctured:' line", lines[-1][0] + 1)

    lineno, tail = lines[n_c + 1]
    if not tail.startswith("punctured:"):
        raise ProtomatrixParseError(f"expected 'punctured:' line, got {tail!r}", lineno)
    try:
        punctured = [int(t) - 1 for t in tail[len("punctured:"):].split()]
    except ValueError:
        raise ProtomatrixParseError("non-integer punctured index", lineno) from None
    if len(lines) > n_c + 2:
        raise ProtomatrixParseError("trailing content", lines[n_c + 2][0])

    try:
        return Protomatrix(np.array(rows), frozenset(punctured))
    except InvalidProtomatrixError as exc:
        raise ProtomatrixParseError(str(exc), lineno) from None


def read_protomatrix(path) -> Protomatrix:
    return parse_protomatrix(Path(path).read_text())


def write_protomatrix(p: Protomatrix, path) -> None:
    Path(path).write_text(format_protomatrix(p))


# Rate-4/5 AR4JA daughter protograph; column 11 is the punctured node.
AR4JA_4_5 = np.array([
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2],
    [0, 1, 1, 1, 3, 1, 3, 1, 3, 1, 3],
    [0, 1, 2, 2, 1, 3, 1, 3, 1, 3, 1],
])

# Daughter columns and punctured column of each extension row (1-based); the
# row also carries a single edge to its own new variable.
_EXTENSION_ROWS = [
    ({7, 8, 9, 10}, 1),
    ({6, 7, 8, 9, 10}, 2),
    ({5, 6, 7, 8, 9, 10}, 2),
    ({3, 7, 8, 9, 10}, 2),
    ({3, 6, 7, 9}, 2),
    ({3, 7, 9}, 1),
    ({2, 7, 9, 10}, 1),
    ({6, 9, 10}, 2),
    ({5, 7, 9}, 1),
    ({5, 6, 9}, 2),
    ({2, 6, 9}, 1),
    ({3, 7}, 1),
    ({2, 7, 9}, 1),
    ({2, 3, 5}, 1),
]


def _build_full_family() -> np.ndarray:
    n_ext = len(_EXTENSION_ROWS)
    h = np.zeros((3 + n_ext, 11 + n_ext), dtype=np.int64)
    h[:3, :11] = AR4JA_4_5
    for r, (cols, punct) in enumerate(_EXTENSION_ROWS):
        for c in cols:
            h[3 + r, c - 1] = 1
        h[3 + r, 10] = punct
        h[3 + r, 11 + r] = 1
    return h


RC_FAMILY_17x25 = _build_full_family()
PUNCTURED_COLUMN = 10
FAMILY_FIXTURE = "rc_family_17x25.pm"
FAMILY_FIXTURE_SHA256 = "e9c70a946713f43266182f6a547245646725b40265f90968555affc222fab0d9"


def fixture_text() -> str:
    """Text of the shipped 17 x 25 fixture, after verifying its checksum."""
    data = resources.files("rcldpc").joinpath("data", FAMILY_FIXTURE).read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    if digest != FAMILY_FIXTURE_SHA256:
        raise InvalidProtomatrixError(
            f"{FAMILY_FIXTURE} checksum mismatch: {digest}")
    return data.decode()


@dataclass(frozen=True)
class RcFamily:
    """Nested family: member ``n`` is the top-left ``(3+n) x (11+n)`` block of ``full``."""

    full: Protomatrix
    daughter_rows: int = 3
    daughter_cols: int = 11

    @property
    def max_extension(self) -> int:
        return self.full.n_checks - self.daughter_rows

    def __len__(self) -> int:
        return self.max_extension + 1

    def member(self, n: int) -> Protomatrix:
        return member(self, n)

    def members(self) -> list[Protomatrix]:
        return [member(self, n) for n in range(len(self))]


def embedded_family() -> RcFamily:
    """The 15-member family from rate 4/5 down to 1/3."""
    return RcFamily(Protomatrix(RC_FAMILY_17x25, frozenset({PUNCTURED_COLUMN})))


def daughter() -> Protomatrix:
    return Protomatrix(AR4JA_4_5, frozenset({PUNCTURED_COLUMN}))


def member(f: RcFamily, n: int) -> Protomatrix:
    """Member with ``n`` extensions; its rate is ``8 / (10 + n)`` for the embedded family."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"extension count must be an integer, got {n!r}")
    if not 0 <= n <= f.max_extension:
        raise FamilyRangeError(
            f"extension count {n} outside 0..{f.max_extension}")
    return f.full.submatrix(f.daughter_rows + n, f.daughter_cols + n)


def validate_family(f: RcFamily) -> list[str]:
    """List every violated family rule; empty when the family is well formed.

    Rules checked per extension row: exactly one edge to its own new
    variable, no edges to any other extension column, and total weight >= 4.
    """
    violations = []
    h = f.full.entries
    n_c, n_v = h.shape
    dr, dc = f.daughter_rows, f.daughter_cols
    if n_c - dr != n_v - dc:
        violations.append(
            f"shape {n_c}x{n_v}: extension rows ({n_c - dr}) and columns "
            f"({n_v - dc}) differ")
    for r in range(dr, n_c):
        own = dc + (r - dr)
        if own < n_v and h[r, own] != 1:
            violations.append(
                f"nesting: row {r + 1} has {h[r, own]} edges to its new column {own + 1}")
        for c in range(dc, n_v):
            if c != own and h[r, c] != 0:
                violations.append(
                    f"nesting: row {r + 1} connects to extension column {c + 1}")
        weight = int(h[r].sum())
        if weight < 4:
            violations.append(f"weight: row {r + 1} has weight {weight} < 4")
    for c in range(dc, n_v):
        # New variables are touched by their own check only.
        above = h[:dr, c]
        if above.any():
            violations.append(
                f"nesting: daughter row connects to extension column {c + 1}")
    return violations


def export_family(f: RcFamily) -> dict[int, str]:
    """Text form of each member keyed by extension count."""
    return {n: format_protomatrix(member(f, n)) for n in range(len(f))}
