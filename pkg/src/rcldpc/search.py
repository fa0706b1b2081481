"""Search for the next extension row of a rate-compatible family.

Candidate rows connect the new check to the daughter columns with single
edges, to the punctured column with one or two edges, and to a fresh
degree-1 variable.  Candidates are ranked by PEXIT threshold; the best ``M``
are lifted and the one with the lowest simulated FER at an operating point
above capacity is kept.

Error-floor screening by minimum-distance growth is not performed; the
girth requirement on the lifted code and the measured FER take its place,
and every report says so.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .analysis import capacity_limit, pexit_thresholds
from .construction import DEFAULT_FACTOR, MIN_GIRTH, lift
from .protomatrix import PUNCTURED_COLUMN, Protomatrix, rate
from .simulation import ChannelSpec, DecoderConfig, StopRule, run_point

WATERFALL_GAP_DB = 1.7
DEFAULT_M = 8
DEFAULT_FRAMES = 200_000
MIN_ROW_WEIGHT = 4
FLOOR_SCREEN_NOTE = ("minimum-distance-growth screening not implemented; "
                     "girth >= 6 and measured FER used instead")


@dataclass(frozen=True, order=True)
class CandidateRow:
    """Edges from a new check to the existing columns (new-variable edge implied)."""

    old_col_edges: tuple[int, ...]

    @property
    def weight(self) -> int:
        return sum(self.old_col_edges) + 1

    def violations(self, punctured: int = PUNCTURED_COLUMN,
                   daughter_cols: int | None = None) -> list[str]:
        out = []
        if self.weight < MIN_ROW_WEIGHT:
            out.append(f"weight {self.weight} < {MIN_ROW_WEIGHT}")
        for c, v in enumerate(self.old_col_edges):
            if c == punctured:
                if v not in (1, 2):
                    out.append(f"punctured column {c + 1} has {v} edges, not 1 or 2")
            elif daughter_cols is not None and c >= daughter_cols:
                if v != 0:
                    out.append(f"column {c + 1} is an extension column")
            elif v not in (0, 1):
                out.append(f"column {c + 1} has {v} edges, not 0 or 1")
        return out


def _daughter_rows(n_daughter: int, punctured: int) -> list[tuple[int, ...]]:
    others = [c for c in range(n_daughter) if c != punctured]
    rows = []
    for p in (1, 2):
        for bits in itertools.product((0, 1), repeat=len(others)):
            row = [0] * n_daughter
            row[punctured] = p
            for c, b in zip(others, bits):
                row[c] = b
            rows.append(tuple(row))
    return rows


def candidate_space(member: Protomatrix, daughter_cols: int = 11,
                    punctured: int = PUNCTURED_COLUMN, weight_filter: bool = True
                    ) -> list[CandidateRow]:
    """All admissible rows in lexicographic order of their daughter part."""
    pad = (0,) * (member.n_vars - daughter_cols)
    rows = [CandidateRow(r + pad) for r in _daughter_rows(daughter_cols, punctured)]
    if weight_filter:
        rows = [r for r in rows if r.weight >= MIN_ROW_WEIGHT]
    return sorted(rows)


def enumerate_candidates(member: Protomatrix, budget: int, rng: np.random.Generator | None = None,
                         daughter_cols: int = 11) -> Iterator[CandidateRow]:
    """Yield up to ``budget`` distinct valid rows.

    The whole space is returned in order when it fits the budget; otherwise
    ``budget`` rows are drawn uniformly without replacement.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    space = candidate_space(member, daughter_cols)
    if len(space) <= budget:
        yield from space
        return
    rng = rng if rng is not None else np.random.default_rng(0)
    for i in rng.choice(len(space), size=budget, replace=False):
        yield space[int(i)]


def rank_by_threshold(member: Protomatrix, candidates: Sequence[CandidateRow], M: int,
                      tol_db: float = 1e-3) -> list[tuple[CandidateRow, float]]:
    """The ``M`` lowest-threshold extensions; ties go to lower weight, then row order."""
    if M < 1:
        raise ValueError("M must be at least 1")
    candidates = list(candidates)
    if not candidates:
        return []
    protos = [member.extend(c.old_col_edges) for c in candidates]
    thr = pexit_thresholds(protos, tol_db)
    ranked = sorted(zip(candidates, thr.tolist()),
                    key=lambda ct: (ct[1], ct[0].weight, ct[0].old_col_edges))
    return ranked[:M]


@dataclass
class RankedCandidate:
    row: CandidateRow
    threshold_db: float
    fer: float
    frames: int
    frame_errors: int
    girth: float
    girth_ok: bool
    lift_seed: int

    def as_dict(self) -> dict:
        return {
            "row": list(self.row.old_col_edges),
            "weight": self.row.weight,
            "threshold_db": round(self.threshold_db, 6),
            "fer": self.fer,
            "frames": self.frames,
            "frame_errors": self.frame_errors,
            "girth": None if math.isinf(self.girth) else int(self.girth),
            "girth_ok": self.girth_ok,
            "lift_seed": self.lift_seed,
        }


@dataclass
class SearchReport:
    ranked: list[RankedCandidate]
    chosen: CandidateRow
    config: dict

    @property
    def chosen_entry(self) -> RankedCandidate:
        return next(r for r in self.ranked if r.row == self.chosen)

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "ranked": [r.as_dict() for r in self.ranked],
            "chosen": list(self.chosen.old_col_edges),
            "chosen_threshold_db": round(self.chosen_entry.threshold_db, 6),
            "note": FLOOR_SCREEN_NOTE,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def select_by_fer(member: Protomatrix, shortlist: Sequence[tuple[CandidateRow, float]],
                  operating_ebn0_db: float | None = None, frame_budget: int = DEFAULT_FRAMES,
                  Z: int = 32, seed: int = 0, factor: int = DEFAULT_FACTOR,
                  decoder: DecoderConfig = DecoderConfig(), workers: int = 1,
                  max_retries: int = 64, daughter: tuple[int, int] = (3, 11)) -> SearchReport:
    """Lift every shortlisted extension and keep the lowest FER at the operating point.

    A candidate whose lift misses girth 6 within ``max_retries`` seeds is
    flagged and ranked after all others.  FER ties go to the lower threshold.
    """
    if not shortlist:
        raise ValueError("shortlist is empty")
    new_rate = rate(member.extend(shortlist[0][0].old_col_edges))
    if operating_ebn0_db is None:
        operating_ebn0_db = capacity_limit(new_rate) + WATERFALL_GAP_DB
    entries = []
    for row, thr in shortlist:
        proto = member.extend(row.old_col_edges)
        code = lift(proto, Z, seed, factor, daughter, max_retries=max_retries)
        ok = bool(code.meta["girth_ok"])
        if ok:
            rec = run_point(code, ChannelSpec.for_code(code, operating_ebn0_db),
                            StopRule(frame_budget, frame_budget), decoder, seed, workers)
            fer, frames, errs = rec.fer, rec.frames, rec.frame_errors
        else:
            fer, frames, errs = math.nan, 0, 0
        entries.append(RankedCandidate(row, float(thr), fer, frames, errs,
                                       code.meta["girth"], ok, int(code.meta["seed"])))

    def key(e: RankedCandidate):
        return (not e.girth_ok, e.fer if e.girth_ok else math.inf, e.threshold_db)

    entries.sort(key=key)
    config = {
        "M": len(shortlist), "operating_ebn0_db": round(float(operating_ebn0_db), 6),
        "frame_budget": frame_budget, "Z": Z, "factor": factor, "seed": seed,
        "max_iters": decoder.max_iters, "quantize": decoder.quantize,
        "new_rate": str(Fraction(new_rate)),
    }
    return SearchReport(entries, entries[0].row, config)


def search_extension(member: Protomatrix, budget: int = 4096, M: int = DEFAULT_M,
                     operating_ebn0_db: float | None = None,
                     frame_budget: int = DEFAULT_FRAMES, Z: int = 32, seed: int = 0,
                     decoder: DecoderConfig = DecoderConfig(), workers: int = 1
                     ) -> SearchReport:
    """Enumerate, rank by threshold, then choose by FER."""
    rng = np.random.default_rng(seed)
    cands = list(enumerate_candidates(member, budget, rng))
    shortlist = rank_by_threshold(member, cands, M)
    report = select_by_fer(member, shortlist, operating_ebn0_db, frame_budget, Z, seed,
                           decoder=decoder, workers=workers)
    report.config.update(budget=budget, candidates=len(cands),
                         member_shape=list(member.shape))
    return report
