"""Protograph EXIT (PEXIT) thresholds and BI-AWGN capacity limits.

All mutual-information recursions work on squared LLR spreads, so the
J-function is tabulated against ``sigma**2``: near zero J is linear in
``sigma**2`` and the table interpolates cleanly in both directions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

from .protomatrix import Protomatrix, RcFamily, member, rate


class AnalysisError(RuntimeError):
    """Raised when a threshold search cannot bracket the convergence point."""


DEFAULT_MAX_ITERS = 1000
DEFAULT_EPSILON = 1e-4
DEFAULT_TOL_DB = 1e-3
BRACKET_DB = (-5.0, 10.0)

_SIGMA_MAX = 40.0
_STALL = 1e-12


@lru_cache(maxsize=None)
def _j_table():
    """(sigma**2 grid, J values, strictly increasing J, matching sigma**2)."""
    sigma = np.linspace(0.0, _SIGMA_MAX, 20001)
    z = np.linspace(-12.0, 12.0, 1201)
    w = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    dz = z[1] - z[0]
    jv = np.empty_like(sigma)
    for start in range(0, sigma.size, 2000):
        s = sigma[start:start + 2000, None]
        llr = s * z[None, :] + 0.5 * s * s
        loss = np.logaddexp(0.0, -llr) / math.log(2.0)
        jv[start:start + 2000] = 1.0 - integrate.trapezoid(w * loss, dx=dz, axis=1)
    jv[0] = 0.0
    jv = np.maximum.accumulate(np.clip(jv, 0.0, 1.0))
    s2 = sigma * sigma
    keep = np.concatenate([[True], np.diff(jv) > 0])
    return s2, jv, jv[keep], s2[keep]


def _j_of_s2(s2):
    grid, jv, _, _ = _j_table()
    return np.interp(s2, grid, jv, right=1.0)


def _jinv_s2(mi):
    _, _, jv, grid = _j_table()
    return np.interp(mi, jv, grid)


def j_function(sigma):
    """Mutual information of a consistent Gaussian LLR with spread ``sigma``.

    The LLR has mean ``sigma**2 / 2`` and variance ``sigma**2``.  Accepts
    scalars or arrays; saturates at 1 for ``sigma >= 40``.
    """
    s = np.asarray(sigma, dtype=float)
    if (s < 0).any():
        raise ValueError("sigma must be non-negative")
    out = _j_of_s2(s * s)
    return float(out) if out.ndim == 0 else out


def j_inverse(mi):
    """Inverse of :func:`j_function` on ``[0, 1)``."""
    i = np.asarray(mi, dtype=float)
    if (i >= 1).any() or (i < 0).any() or np.isnan(i).any():
        raise ValueError("mutual information must lie in [0, 1)")
    out = np.sqrt(_jinv_s2(i))
    return float(out) if out.ndim == 0 else out


def channel_s2(p: Protomatrix, ebn0_db: float) -> np.ndarray:
    """Per-column squared channel-LLR spread; zero on punctured columns."""
    r = float(rate(p))
    s2 = np.full(p.n_vars, 8.0 * r * 10.0 ** (ebn0_db / 10.0))
    s2[sorted(p.punctured)] = 0.0
    return s2


@dataclass
class PexitState:
    """Edge-class mutual information after a PEXIT run (zero where b_ij = 0)."""

    I_av: np.ndarray
    I_ev: np.ndarray
    I_ac: np.ndarray
    I_ec: np.ndarray
    I_app: np.ndarray
    sigma_ch: np.ndarray
    iterations: int
    converged: bool


def _pexit_batch(b, s2ch, max_iters, epsilon, keep_state=False):
    """Run the PEXIT recursion for a stack of same-shape protomatrices.

    ``b`` has shape (K, n_c, n_v); ``s2ch`` has shape (K, n_v).  Returns a
    boolean convergence vector, plus per-candidate final state if requested.
    """
    b = np.asarray(b, dtype=float)
    s2ch = np.asarray(s2ch, dtype=float)
    k = b.shape[0]
    conv = np.zeros(k, dtype=bool)
    iters = np.zeros(k, dtype=int)
    idx = np.arange(k)
    mask = b > 0
    i_av = np.zeros(b.shape)
    app_prev = np.full(s2ch.shape, -1.0)
    final = {}

    for it in range(1, max_iters + 1):
        # variable -> check
        a = np.where(mask, _jinv_s2(i_av), 0.0)
        col = (b * a).sum(axis=1)
        # sum over the other edges of the column, parallel copies included
        s2 = col[:, None, :] - a + s2ch[:, None, :]
        i_ev = np.where(mask, _j_of_s2(np.maximum(s2, 0.0)), 0.0)
        # check -> variable
        c = np.where(mask, _jinv_s2(np.minimum(1.0 - i_ev, 1.0)), 0.0)
        row = (b * c).sum(axis=2)
        s2 = row[:, :, None] - c
        i_ec = np.where(mask, 1.0 - _j_of_s2(np.maximum(s2, 0.0)), 0.0)
        i_av = i_ec
        a = np.where(mask, _jinv_s2(i_av), 0.0)
        app = _j_of_s2((b * a).sum(axis=1) + s2ch)

        done_ok = app.min(axis=1) >= 1.0 - epsilon
        stalled = ~done_ok & (np.abs(app - app_prev).max(axis=1) < _STALL)
        finished = done_ok | stalled | (it == max_iters)
        if finished.any():
            conv[idx[finished]] = done_ok[finished]
            iters[idx[finished]] = it
            if keep_state:
                for pos in np.flatnonzero(finished):
                    final[idx[pos]] = (i_av[pos], i_ev[pos], app[pos])
            live = ~finished
            if not live.any():
                break
            b, mask = b[live], mask[live]
            s2ch, i_av, app, idx = s2ch[live], i_av[live], app[live], idx[live]
        app_prev = app
    if keep_state:
        return conv, iters, final
    return conv


def pexit_run(p: Protomatrix, ebn0_db: float, max_iters: int = DEFAULT_MAX_ITERS,
              epsilon: float = DEFAULT_EPSILON) -> PexitState:
    """Run PEXIT at one operating point and return the final edge MI state."""
    s2ch = channel_s2(p, ebn0_db)
    conv, iters, final = _pexit_batch(p.entries[None], s2ch[None], max_iters,
                                      epsilon, keep_state=True)
    i_av, i_ev, app = final[0]
    return PexitState(I_av=i_av, I_ev=i_ev, I_ac=i_ev.copy(), I_ec=i_av.copy(),
                      I_app=app, sigma_ch=np.sqrt(s2ch), iterations=int(iters[0]),
                      converged=bool(conv[0]))


def pexit_converges(p: Protomatrix, ebn0_db: float,
                    max_iters: int = DEFAULT_MAX_ITERS,
                    epsilon: float = DEFAULT_EPSILON) -> bool:
    """True when every a-posteriori MI reaches ``1 - epsilon`` within ``max_iters``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s2ch = channel_s2(p, ebn0_db)
    return bool(_pexit_batch(p.entries[None], s2ch[None], max_iters, epsilon)[0])


def pexit_thresholds(protos: Sequence[Protomatrix], tol_db: float = DEFAULT_TOL_DB,
                     max_iters: int = DEFAULT_MAX_ITERS,
                     epsilon: float = DEFAULT_EPSILON,
                     bracket: tuple[float, float] = BRACKET_DB) -> np.ndarray:
    """Bisect the PEXIT threshold (Eb/N0 dB) of many same-shape protomatrices at once."""
    if tol_db <= 0:
        raise ValueError("tol_db must be positive")
    protos = list(protos)
    if not protos:
        return np.zeros(0)
    shapes = {p.shape for p in protos}
    if len(shapes) > 1:
        out = np.empty(len(protos))
        for shape in shapes:
            pos = [i for i, p in enumerate(protos) if p.shape == shape]
            out[pos] = pexit_thresholds([protos[i] for i in pos], tol_db,
                                        max_iters, epsilon, bracket)
        return out

    b = np.stack([p.entries for p in protos])
    base = np.stack([channel_s2(p, 0.0) for p in protos])

    def converges(db):
        s2 = base * (10.0 ** (np.asarray(db)[:, None] / 10.0))
        return _pexit_batch(b, s2, max_iters, epsilon)

    lo = np.full(len(protos), bracket[0])
    hi = np.full(len(protos), bracket[1])
    if not converges(hi).all():
        raise AnalysisError(f"no convergence at {bracket[1]} dB")
    if converges(lo).any():
        raise AnalysisError(f"already converging at {bracket[0]} dB")
    while (hi - lo).max() > tol_db:
        mid = 0.5 * (lo + hi)
        ok = converges(mid)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return hi


def pexit_threshold(p: Protomatrix, tol_db: float = DEFAULT_TOL_DB,
                    max_iters: int = DEFAULT_MAX_ITERS,
                    epsilon: float = DEFAULT_EPSILON) -> float:
    """Smallest Eb/N0 (dB) at which PEXIT converges, to within ``tol_db``."""
    return float(pexit_thresholds([p], tol_db, max_iters, epsilon)[0])


def biawgn_capacity(ebn0_db: float, code_rate: float) -> float:
    """BPSK-input AWGN mutual information (bits/use) at the given Eb/N0 and rate."""
    var = 1.0 / (2.0 * code_rate * 10.0 ** (ebn0_db / 10.0))
    sd = math.sqrt(var)

    def integrand(y):
        dens = math.exp(-(y - 1.0) ** 2 / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)
        return dens * np.logaddexp(0.0, -2.0 * y / var)

    val, _ = integrate.quad(integrand, 1.0 - 40.0 * sd, 1.0 + 40.0 * sd,
                            limit=400, epsabs=1e-13)
    return 1.0 - val / math.log(2.0)


def capacity_limit(code_rate) -> float:
    """Minimum Eb/N0 (dB) at which BI-AWGN capacity equals ``code_rate``."""
    r = float(code_rate)
    if not 0 < r < 1:
        raise ValueError("rate must lie in (0, 1)")
    return float(optimize.brentq(lambda db: biawgn_capacity(db, r) - r,
                                 -10.0, 20.0, xtol=1e-10))


@dataclass(frozen=True)
class ThresholdReport:
    rate: Fraction
    threshold_db: float
    capacity_db: float

    @property
    def gap_db(self) -> float:
        return self.threshold_db - self.capacity_db


def threshold_report(p: Protomatrix, tol_db: float = DEFAULT_TOL_DB) -> ThresholdReport:
    r = rate(p)
    return ThresholdReport(r, pexit_threshold(p, tol_db), capacity_limit(r))


def family_report(f: RcFamily, tol_db: float = DEFAULT_TOL_DB) -> list[ThresholdReport]:
    members = [member(f, n) for n in range(len(f))]
    out = []
    for p in members:
        r = rate(p)
        out.append(ThresholdReport(r, pexit_threshold(p, tol_db), capacity_limit(r)))
    return out


REPORT_FIELDS = ("rate", "threshold_db", "capacity_db", "gap_db")


def format_report_text(rows: Sequence[ThresholdReport], labels=None) -> str:
    """Aligned text table: one line per code, thresholds to 3 decimals."""
    labels = labels or [str(r.rate) for r in rows]
    width = max([len("rate")] + [len(s) for s in labels])
    head = f"{'rate':<{width}}  {'threshold_db':>12}  {'capacity_db':>11}  {'gap_db':>7}"
    lines = [head]
    for lab, r in zip(labels, rows):
        lines.append(f"{lab:<{width}}  {r.threshold_db:>12.3f}  "
                     f"{r.capacity_db:>11.3f}  {r.gap_db:>7.3f}")
    return "\n".join(lines) + "\n"


def format_report_csv(rows: Sequence[ThresholdReport], labels=None) -> str:
    labels = labels or [str(r.rate) for r in rows]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for lab, r in zip(labels, rows):
        w.writerow([lab, f"{r.threshold_db:.4f}", f"{r.capacity_db:.4f}",
                    f"{r.gap_db:.4f}"])
    return buf.getvalue()
