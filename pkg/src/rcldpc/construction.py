"""Two-stage lifting of a protomatrix into a quasi-cyclic parity-check matrix.

Stage one spreads every multi-edge over a small binary block with PEG so the
base matrix has no parallel edges.  Stage two picks one circulant shift per
base edge, again greedily maximising the shortest cycle through the new edge.

Lifted index conventions: base check ``r`` / variable ``c`` come from
protograph type ``r // factor`` / ``c // factor``; lifted column ``c*Z + x``
is circulant copy ``x`` of base column ``c``.  A block with shift ``s`` puts
a one at ``(r*Z + i, c*Z + (i + s) % Z)``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .protomatrix import (FamilyRangeError, Protomatrix, RcFamily, embedded_family,
                          member)


class InfeasibleLiftError(ValueError):
    """Raised when a protograph multiplicity exceeds the lifting factor."""


class QcFormatError(ValueError):
    """Raised on malformed QC code text."""


DEFAULT_FACTOR = 4
DEFAULT_Z = 32
DEFAULT_SEED = 0
MAX_RETRIES = 64
MIN_GIRTH = 6
_CIRCULANT_DEPTH = 10


@dataclass(frozen=True, eq=False)
class BinaryBaseMatrix:
    """Parallel-edge-free base matrix obtained by a small PEG lift."""

    entries: np.ndarray
    punctured: frozenset[int]
    row_type: np.ndarray
    col_type: np.ndarray
    factor: int


def _bfs_check_distances(var_adj, chk_adj, root, n_checks):
    """Edge distance from variable ``root`` to every check (inf if unreachable)."""
    dist = np.full(n_checks, np.inf)
    seen_v = {root}
    frontier = [root]
    d = 1
    while frontier:
        nxt_c = []
        for v in frontier:
            for c in var_adj[v]:
                if dist[c] == np.inf:
                    dist[c] = d
                    nxt_c.append(c)
        nxt_v = []
        for c in nxt_c:
            for v in chk_adj[c]:
                if v not in seen_v:
                    seen_v.add(v)
                    nxt_v.append(v)
        frontier = nxt_v
        d += 2
    return dist


def peg_expand(p: Protomatrix, factor: int = DEFAULT_FACTOR) -> BinaryBaseMatrix:
    """Lift ``p`` by ``factor`` so that every block has row/column sums ``b_ij``.

    Variables are placed in order of increasing protograph degree.  Each
    edge goes to the farthest admissible check copy (unreachable first), then
    the lowest current degree, then the lowest index.  A check copy is
    forced when its leftover capacity equals the number of unplaced
    variables of that type, which keeps the block sums satisfiable.
    """
    b = p.entries
    if b.max() > factor:
        raise InfeasibleLiftError(
            f"multiplicity {b.max()} exceeds lifting factor {factor}")
    n_c, n_v = b.shape
    rows, cols = n_c * factor, n_v * factor
    cap = np.repeat(b[:, :, None], factor, axis=2)
    left = np.full(n_v, factor)
    var_adj = [[] for _ in range(cols)]
    chk_adj = [[] for _ in range(rows)]
    deg_c = np.zeros(rows, dtype=int)

    degree = b.sum(axis=0)
    order = sorted(range(n_v), key=lambda j: (degree[j], j))
    for j in order:
        for t in range(factor):
            v = j * factor + t
            r = left[j]
            need = {i: int(b[i, j]) for i in range(n_c) if b[i, j] > 0}

            def place(i, tc):
                c = i * factor + tc
                var_adj[v].append(c)
                chk_adj[c].append(v)
                deg_c[c] += 1
                cap[i, j, tc] -= 1
                need[i] -= 1

            for i in need:
                for tc in range(factor):
                    if cap[i, j, tc] == r:
                        place(i, tc)
            while any(need.values()):
                cands = [i * factor + tc for i in need if need[i] > 0
                         for tc in range(factor)
                         if cap[i, j, tc] > 0 and i * factor + tc not in var_adj[v]]
                if var_adj[v]:
                    dist = _bfs_check_distances(var_adj, chk_adj, v, rows)
                    best = min(cands, key=lambda c: (-dist[c], deg_c[c], c))
                else:
                    best = min(cands, key=lambda c: (deg_c[c], c))
                place(best // factor, best % factor)
            left[j] -= 1

    h = np.zeros((rows, cols), dtype=np.uint8)
    for v, cs in enumerate(var_adj):
        h[cs, v] = 1
    punct = frozenset(j * factor + t for j in p.punctured for t in range(factor))
    return BinaryBaseMatrix(h, punct, np.arange(rows) // factor,
                            np.arange(cols) // factor, factor)


def _circulant_distances(shifts, root_col, z, max_depth):
    """Edge distance from lifted variable (root_col, 0) to every lifted check.

    Frontiers are kept per base node as boolean vectors of length ``z``;
    walking a block with shift ``s`` is a cyclic roll.
    """
    n_r, n_c = shifts.shape
    edges = [(r, c, int(shifts[r, c])) for r, c in zip(*np.nonzero(shifts >= 0))]
    dist = np.full((n_r, z), np.inf)
    seen_v = np.zeros((n_c, z), dtype=bool)
    seen_c = np.zeros((n_r, z), dtype=bool)
    front_v = np.zeros((n_c, z), dtype=bool)
    front_v[root_col, 0] = True
    seen_v[root_col, 0] = True
    d = 1
    while d <= max_depth:
        front_c = np.zeros((n_r, z), dtype=bool)
        for r, c, s in edges:
            if front_v[c].any():
                front_c[r] |= np.roll(front_v[c], -s)
        front_c &= ~seen_c
        if not front_c.any():
            break
        seen_c |= front_c
        dist[front_c] = d
        front_v = np.zeros((n_c, z), dtype=bool)
        for r, c, s in edges:
            if front_c[r].any():
                front_v[c] |= np.roll(front_c[r], s)
        front_v &= ~seen_v
        if not front_v.any():
            break
        seen_v |= front_v
        d += 2
    return dist


def _assign_shifts(base: np.ndarray, z: int, seed: int, max_depth: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n_r, n_c = base.shape
    shifts = np.full((n_r, n_c), -1, dtype=np.int64)
    degree = base.sum(axis=0)
    for c in sorted(range(n_c), key=lambda j: (degree[j], j)):
        for r in np.flatnonzero(base[:, c]):
            dist = _circulant_distances(shifts, c, z, max_depth)[r]
            # shift s joins variable copy 0 to check copy (-s) mod z
            cycle = dist[(-np.arange(z)) % z] + 1
            best = cycle.max()
            options = np.flatnonzero(cycle == best)
            shifts[r, c] = int(options[rng.integers(options.size)])
    return shifts


@dataclass(frozen=True, eq=False)
class QcCode:
    """Quasi-cyclic LDPC code defined by a circulant shift table.

    ``punctured`` holds base-column indices; ``tx_map`` lists transmitted
    lifted columns in ascending order.  ``info_cols`` / ``parity_cols`` is
    the systematic split used by the encoder.  ``factor`` and ``daughter``
    (protograph rows, columns of the daughter code) locate the extension
    structure inside the base matrix.
    """

    shifts: np.ndarray
    Z: int
    punctured: frozenset[int]
    info_cols: np.ndarray
    factor: int = DEFAULT_FACTOR
    daughter: tuple[int, int] = (3, 11)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.array(self.shifts, dtype=np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "shifts", s)
        info = np.array(self.info_cols, dtype=np.int64)
        info.setflags(write=False)
        object.__setattr__(self, "info_cols", info)
        object.__setattr__(self, "punctured", frozenset(int(c) for c in self.punctured))

    @property
    def n(self) -> int:
        return self.shifts.shape[1] * self.Z

    @property
    def n_rows(self) -> int:
        return self.shifts.shape[0] * self.Z

    @property
    def k(self) -> int:
        return int(self.info_cols.size)

    @property
    def parity_cols(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.info_cols] = False
        return np.flatnonzero(mask)

    @property
    def punctured_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for c in self.punctured:
            mask[c * self.Z:(c + 1) * self.Z] = True
        return mask

    @property
    def tx_map(self) -> np.ndarray:
        return np.flatnonzero(~self.punctured_mask)

    @property
    def rate(self) -> float:
        return self.k / self.tx_map.size

    @property
    def base(self) -> np.ndarray:
        return (self.shifts >= 0).astype(np.uint8)

    def parity_check(self) -> sp.csr_matrix:
        """Explicit sparse parity-check matrix."""
        z = self.Z
        r, c = np.nonzero(self.shifts >= 0)
        s = self.shifts[r, c]
        i = np.arange(z)
        rows = (r[:, None] * z + i[None, :]).ravel()
        cols = (c[:, None] * z + (i[None, :] + s[:, None]) % z).ravel()
        data = np.ones(rows.size, dtype=np.uint8)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_rows, self.n))

    def crop(self, n_rows_base: int, n_cols_base: int, info_cols=None) -> "QcCode":
        info = self.info_cols if info_cols is None else info_cols
        info = np.asarray(info)
        info = info[info < n_cols_base * self.Z]
        return QcCode(self.shifts[:n_rows_base, :n_cols_base], self.Z,
                      frozenset(c for c in self.punctured if c < n_cols_base),
                      info, self.factor, self.daughter, dict(self.meta))


def systematic_split(h, col_priority) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """GF(2) elimination choosing pivot columns in ``col_priority`` order.

    Returns ``(pivot_cols, info_cols, A)`` where ``A`` (rank x |info|) gives
    the pivot bits as ``A @ u mod 2`` from the info bits ``u``; rows of ``A``
    follow ``pivot_cols``.
    """
    m = (h.toarray() if sp.issparse(h) else np.asarray(h)).astype(bool)
    n_rows, n_cols = m.shape
    pivots = []
    free_row = 0
    for col in col_priority:
        if free_row == n_rows:
            break
        hit = np.flatnonzero(m[free_row:, col])
        if hit.size == 0:
            continue
        src = free_row + hit[0]
        if src != free_row:
            m[[free_row, src]] = m[[src, free_row]]
        others = np.flatnonzero(m[:, col])
        others = others[others != free_row]
        m[others] ^= m[free_row]
        pivots.append(col)
        free_row += 1
    pivots = np.array(pivots, dtype=np.int64)
    mask = np.ones(n_cols, dtype=bool)
    mask[pivots] = False
    info = np.flatnonzero(mask)
    return pivots, info, m[:len(pivots)][:, info].astype(np.uint8)


def daughter_priority(code_shape_cols: int, z: int, punctured_base, daughter_cols_base: int):
    """Pivot preference: punctured columns, then the rest in descending index."""
    punct = [c * z + x for c in sorted(punctured_base) if c < daughter_cols_base
             for x in range(z)]
    punct_set = set(punct)
    rest = [c for c in range(daughter_cols_base * z - 1, -1, -1) if c not in punct_set]
    return punct + rest


def _with_split(shifts, z, punctured, factor, daughter, meta) -> QcCode:
    """Attach the encoder's info/parity split computed on the daughter block."""
    dr, dc = daughter[0] * factor, daughter[1] * factor
    probe = QcCode(shifts[:dr, :dc], z, frozenset(c for c in punctured if c < dc),
                   np.zeros(0, dtype=np.int64), factor, daughter)
    h_d = probe.parity_check()
    pivots, info, _ = systematic_split(h_d, daughter_priority(dc * z, z, punctured, dc))
    meta = dict(meta, daughter_rank=int(pivots.size),
                daughter_full_rank=bool(pivots.size == dr * z))
    return QcCode(shifts, z, punctured, info, factor, daughter, meta)


def circulant_lift(b: BinaryBaseMatrix, Z: int = DEFAULT_Z, seed: int = DEFAULT_SEED,
                   daughter: tuple[int, int] = (3, 11),
                   max_depth: int = _CIRCULANT_DEPTH) -> QcCode:
    """Assign one circulant shift per base edge by circulant PEG.

    Edges are processed column by column in order of increasing degree; each
    shift maximises the shortest cycle it closes (up to ``max_depth`` edges
    deep), with ties drawn from a generator seeded by ``seed``.
    """
    if Z < 1:
        raise ValueError("Z must be positive")
    shifts = _assign_shifts(b.entries, Z, seed, max_depth)
    return _with_split(shifts, Z, b.punctured, b.factor, daughter, {"seed": seed})


def _bipartite_girth(var_adj, chk_adj, roots) -> float:
    """Shortest cycle through any of ``roots`` (variable indices)."""
    best = math.inf
    for root in roots:
        dist = {("v", root): 0}
        parent = {("v", root): None}
        q = deque([("v", root)])
        while q:
            node = q.popleft()
            d = dist[node]
            if 2 * d + 1 >= best:
                break
            kind, idx = node
            nbrs = (("c", c) for c in var_adj[idx]) if kind == "v" else \
                   (("v", v) for v in chk_adj[idx])
            for nb in nbrs:
                if nb == parent[node]:
                    continue
                if nb in dist:
                    best = min(best, d + dist[nb] + 1)
                else:
                    dist[nb] = d + 1
                    parent[nb] = node
                    q.append(nb)
    return best


def girth(code) -> float:
    """Length of the shortest Tanner-graph cycle; ``math.inf`` when acyclic.

    For a :class:`QcCode` one breadth-first search per base column suffices,
    since circulant symmetry maps every cycle onto one through copy 0.
    """
    if isinstance(code, QcCode):
        h = code.parity_check().tocsc()
        roots = [c * code.Z for c in range(code.shifts.shape[1])]
    else:
        h = sp.csc_matrix(code.entries if isinstance(code, BinaryBaseMatrix)
                          else np.asarray(code))
        roots = range(h.shape[1])
    h = sp.csc_matrix(h)
    hr = h.tocsr()
    var_adj = [h.indices[h.indptr[j]:h.indptr[j + 1]].tolist() for j in range(h.shape[1])]
    chk_adj = [hr.indices[hr.indptr[i]:hr.indptr[i + 1]].tolist() for i in range(h.shape[0])]
    return _bipartite_girth(var_adj, chk_adj, roots)


def lift(p: Protomatrix, Z: int = DEFAULT_Z, seed: int = DEFAULT_SEED,
         factor: int = DEFAULT_FACTOR, daughter: tuple[int, int] = (3, 11),
         min_girth: int = MIN_GIRTH, max_retries: int = MAX_RETRIES) -> QcCode:
    """Full two-stage lift, retrying circulant seeds until the girth target is met.

    ``meta`` records the seed actually used, the number of attempts, the
    final girth and whether the target was reached.
    """
    base = peg_expand(p, factor)
    best = None
    for attempt in range(max_retries):
        code = circulant_lift(base, Z, seed + attempt, daughter)
        g = girth(code)
        code.meta.update(requested_seed=seed, attempts=attempt + 1, girth=g,
                         girth_ok=g >= min_girth)
        if g >= min_girth:
            return code
        if best is None or g > best.meta["girth"]:
            best = code
    best.meta["attempts"] = max_retries
    return best


@lru_cache(maxsize=8)
def _family_code(full_key: bytes, shape, punctured, Z, seed, factor, daughter):
    entries = np.frombuffer(full_key, dtype=np.int64).reshape(shape)
    return lift(Protomatrix(entries, punctured), Z, seed, factor, daughter)


def family_code(f: RcFamily, Z: int = DEFAULT_Z, seed: int = DEFAULT_SEED,
                factor: int = DEFAULT_FACTOR) -> QcCode:
    """Lift the lowest-rate member once; every member is a crop of this code."""
    full = f.full
    return _family_code(np.ascontiguousarray(full.entries).tobytes(), full.shape,
                        full.punctured, Z, seed, factor,
                        (f.daughter_rows, f.daughter_cols))


def member_code(f: RcFamily, n: int, Z: int = DEFAULT_Z, seed: int = DEFAULT_SEED,
                factor: int = DEFAULT_FACTOR) -> QcCode:
    """QC code of member ``n``: the top-left crop of the lifted full family."""
    p = member(f, n)
    full = family_code(f, Z, seed, factor)
    code = full.crop(p.n_checks * factor, p.n_vars * factor)
    code.meta["member"] = n
    return code


def embedded_member_code(n: int, Z: int = DEFAULT_Z, seed: int = DEFAULT_SEED) -> QcCode:
    return member_code(embedded_family(), n, Z, seed)


def format_qc(code: QcCode, header: dict | None = None) -> str:
    """Text form: optional ``#`` provenance line, ``Z rows cols``, shift rows,
    then ``punctured:``, ``info_cols:``, ``factor:`` and ``daughter:`` lines.
    Column indices are 1-based."""
    lines = []
    if header is not None:
        lines.append("# " + json.dumps(header, sort_keys=True))
    n_r, n_c = code.shifts.shape
    lines.append(f"{code.Z} {n_r} {n_c}")
    lines += [" ".join(str(int(v)) for v in row) for row in code.shifts]
    lines.append("punctured:" + "".join(f" {c + 1}" for c in sorted(code.punctured)))
    lines.append("info_cols:" + "".join(f" {c + 1}" for c in code.info_cols))
    lines.append(f"factor: {code.factor}")
    lines.append(f"daughter: {code.daughter[0]} {code.daughter[1]}")
    return "\n".join(lines) + "\n"


def parse_qc(text: str) -> QcCode:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise QcFormatError("empty QC code text")
    lineno, head = lines[0]
    try:
        z, n_r, n_c = (int(t) for t in head.split())
    except ValueError:
        raise QcFormatError(f"line {lineno}: expected 'Z rows cols'") from None
    if len(lines) < n_r + 1:
        raise QcFormatError("truncated shift table")
    table = []
    for lineno, ln in lines[1:n_r + 1]:
        try:
            vals = [int(t) for t in ln.split()]
        except ValueError:
            raise QcFormatError(f"line {lineno}: non-integer shift") from None
        if len(vals) != n_c or any(v < -1 or v >= z for v in vals):
            raise QcFormatError(f"line {lineno}: bad shift row")
        table.append(vals)
    fields = {}
    for lineno, ln in lines[n_r + 1:]:
        key, _, rest = ln.partition(":")
        try:
            fields[key.strip()] = [int(t) for t in rest.split()]
        except ValueError:
            raise QcFormatError(f"line {lineno}: non-integer value") from None
    if "punctured" not in fields or "info_cols" not in fields:
        raise QcFormatError("missing 'punctured:' or 'info_cols:' line")
    factor = fields.get("factor", [DEFAULT_FACTOR])[0]
    daughter = tuple(fields.get("daughter", [3, 11]))
    return QcCode(np.array(table), z, frozenset(c - 1 for c in fields["punctured"]),
                  np.array(fields["info_cols"], dtype=np.int64) - 1, factor, daughter)


def read_qc(path) -> QcCode:
    return parse_qc(Path(path).read_text())


def write_qc(code: QcCode, path, header: dict | None = None) -> None:
    Path(path).write_text(format_qc(code, header))


__all__ = [
    "BinaryBaseMatrix", "QcCode", "InfeasibleLiftError", "QcFormatError",
    "FamilyRangeError", "peg_expand", "circulant_lift", "girth", "lift",
    "member_code", "family_code", "systematic_split", "format_qc", "parse_qc",
    "read_qc", "write_qc",
]
