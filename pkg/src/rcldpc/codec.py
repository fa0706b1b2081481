"""Systematic encoding and flooding sum-product decoding of lifted codes.

The encoder solves the daughter block once by GF(2) elimination.  Every
extension check touches exactly one extension bit, so extension parities are
plain XORs of daughter bits.

The decoder works in the LLR domain with the tanh rule.  Optional 8-bit mode
rounds the channel LLRs and every exchanged message to a 0.125 grid clipped
at +/-15.875 (255 levels, i.e. a signed byte).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
import scipy.sparse as sp

from .construction import QcCode, daughter_priority, systematic_split


class EncoderBuildError(RuntimeError):
    """Raised when the daughter block cannot be put in systematic form."""


class DecoderInputError(ValueError):
    """Raised on LLR vectors of the wrong length or with non-finite values."""


LLR_MAX = 25.0
Q_STEP = 0.125
Q_MAX = 15.875
DEFAULT_MAX_ITERS = 200


class Encoder:
    """Precomputed systematic encoder for a :class:`QcCode`.

    Parameters
    ----------
    code : QcCode
        Code whose base matrix is a daughter block followed by extension
        rows, each tied to exactly one extension column.
    """

    def __init__(self, code: QcCode):
        self.code = code
        z, f = code.Z, code.factor
        dr, dc = code.daughter[0] * f * z, code.daughter[1] * f * z
        dc_base = code.daughter[1] * f
        h = code.parity_check()
        h_d = h[:dr, :dc]
        prio = daughter_priority(dc, z, [c for c in code.punctured if c < dc_base], dc_base)
        pivots, info, a = systematic_split(h_d, prio)
        if pivots.size != dr:
            raise EncoderBuildError(
                f"daughter block has rank {pivots.size} < {dr} rows")
        if not np.array_equal(info, code.info_cols):
            raise EncoderBuildError("code info_cols do not match the daughter split")
        self.daughter_len = dc
        self.info_cols = info
        self.daughter_parity = pivots
        self._a = a.astype(np.float32)

        ext = h[dr:, :].tocsr()
        ext_part = ext[:, dc:].tocoo()
        if ext_part.nnz != ext.shape[0] or np.unique(ext_part.row).size != ext.shape[0]:
            raise EncoderBuildError("extension rows must each touch one extension bit")
        order = np.argsort(ext_part.row)
        self.ext_var = dc + ext_part.col[order]
        self.extension_rows = ext[:, :dc].tocsr().astype(np.float32)

    @property
    def k(self) -> int:
        return int(self.info_cols.size)

    def encode(self, u) -> np.ndarray:
        """Codeword (length n, punctured bits included) for info bits ``u``.

        ``u`` may be a single vector of length k or a (frames, k) batch.
        """
        u = np.asarray(u, dtype=np.uint8)
        single = u.ndim == 1
        u2 = np.atleast_2d(u)
        if u2.shape[1] != self.k:
            raise ValueError(f"info word has length {u2.shape[1]}, expected {self.k}")
        n_frames = u2.shape[0]
        c = np.zeros((n_frames, self.code.n), dtype=np.uint8)
        c[:, self.info_cols] = u2
        par = (u2.astype(np.float32) @ self._a.T).astype(np.int64) & 1
        c[:, self.daughter_parity] = par
        d = c[:, :self.daughter_len].astype(np.float32)
        ext = (self.extension_rows @ d.T).T.astype(np.int64) & 1
        c[:, self.ext_var] = ext
        return c[0] if single else c


@lru_cache(maxsize=32)
def _encoder_for(code: QcCode) -> Encoder:
    return Encoder(code)


def encode(e, u) -> np.ndarray:
    """Encode with an :class:`Encoder` (or a :class:`QcCode`, built on demand)."""
    if isinstance(e, QcCode):
        e = _encoder_for(e)
    return e.encode(u)


def transmit_select(code: QcCode, c) -> np.ndarray:
    """Drop punctured positions; keeps ``tx_map`` order."""
    c = np.asarray(c)
    if c.shape[-1] != code.n:
        raise ValueError(f"codeword has length {c.shape[-1]}, expected {code.n}")
    return c[..., code.tx_map]


def syndrome(code: QcCode, bits) -> np.ndarray:
    h = code.parity_check()
    return (h @ np.asarray(bits, dtype=np.int64)) % 2


@dataclass
class DecodeResult:
    bits: np.ndarray
    converged: bool
    iterations: int


@numba.njit(cache=True)
def _quant(x, step, qmax):
    y = np.round(x / step) * step
    if y > qmax:
        return qmax
    if y < -qmax:
        return -qmax
    return y


@numba.njit(cache=True)
def _check_update(v2c, c2v, t, chk_ptr, clip, quantize, step, qmax):
    tmax = np.tanh(0.5 * clip)
    for e in range(v2c.size):
        t[e] = np.tanh(0.5 * v2c[e])
    for ch in range(chk_ptr.size - 1):
        lo, hi = chk_ptr[ch], chk_ptr[ch + 1]
        # extrinsic products via forward/backward sweeps
        fwd = 1.0
        for e in range(lo, hi):
            c2v[e] = fwd
            fwd *= t[e]
        bwd = 1.0
        for e in range(hi - 1, lo - 1, -1):
            p = c2v[e] * bwd
            bwd *= t[e]
            if p > tmax:
                p = tmax
            elif p < -tmax:
                p = -tmax
            m = 2.0 * np.arctanh(p)
            if quantize:
                m = _quant(m, step, qmax)
            c2v[e] = m


@numba.njit(cache=True)
def _var_update(llr, v2c, c2v, var_ptr, var_edge, total, clip, quantize, step, qmax):
    for v in range(var_ptr.size - 1):
        s = llr[v]
        for k in range(var_ptr[v], var_ptr[v + 1]):
            s += c2v[var_edge[k]]
        total[v] = s
        for k in range(var_ptr[v], var_ptr[v + 1]):
            e = var_edge[k]
            m = s - c2v[e]
            if quantize:
                m = _quant(m, step, qmax)
            elif m > clip:
                m = clip
            elif m < -clip:
                m = -clip
            v2c[e] = m


@numba.njit(cache=True)
def _syndrome_ok(bits, edge_var, chk_ptr):
    for ch in range(chk_ptr.size - 1):
        acc = 0
        for e in range(chk_ptr[ch], chk_ptr[ch + 1]):
            acc ^= bits[edge_var[e]]
        if acc:
            return False
    return True


@numba.njit(cache=True)
def _bp(llr, edge_var, chk_ptr, var_ptr, var_edge, max_iters, clip, quantize,
        step, qmax, early_stop, v2c, c2v, bits):
    n = var_ptr.size - 1
    total = np.empty(n)
    t = np.empty(edge_var.size)
    for e in range(edge_var.size):
        m = llr[edge_var[e]]
        if not quantize:
            if m > clip:
                m = clip
            elif m < -clip:
                m = -clip
        v2c[e] = m
    for it in range(1, max_iters + 1):
        _check_update(v2c, c2v, t, chk_ptr, clip, quantize, step, qmax)
        _var_update(llr, v2c, c2v, var_ptr, var_edge, total, clip, quantize, step, qmax)
        for v in range(n):
            bits[v] = 1 if total[v] < 0 else 0
        if early_stop and _syndrome_ok(bits, edge_var, chk_ptr):
            return it, True
    return max_iters, _syndrome_ok(bits, edge_var, chk_ptr)


class SumProductDecoder:
    """Flooding belief propagation over the Tanner graph of ``code``.

    Edges are stored check-major: ``edge_check[e]`` / ``edge_var[e]`` name
    the endpoints of edge ``e``, which also indexes the message arrays.
    """

    def __init__(self, code: QcCode, quantize: str | bool = "off",
                 llr_max: float = LLR_MAX, q_step: float = Q_STEP, q_max: float = Q_MAX):
        self.code = code
        self.quantize = quantize not in (False, None, "off")
        self.llr_max = float(llr_max)
        self.q_step, self.q_max = float(q_step), float(q_max)
        h = code.parity_check().tocsr()
        h.sort_indices()
        self.edge_var = h.indices.astype(np.int64)
        self.chk_ptr = h.indptr.astype(np.int64)
        self.edge_check = np.repeat(np.arange(h.shape[0]), np.diff(h.indptr))
        order = np.argsort(self.edge_var, kind="stable")
        self.var_edge = order.astype(np.int64)
        self.var_ptr = np.concatenate(
            [[0], np.cumsum(np.bincount(self.edge_var, minlength=code.n))]).astype(np.int64)
        self.tx_map = code.tx_map
        self.n = code.n

    def channel_llr(self, llr) -> np.ndarray:
        """Full-length channel LLRs with zeros on punctured positions."""
        llr = np.asarray(llr, dtype=float)
        if llr.shape != (self.tx_map.size,):
            raise DecoderInputError(
                f"expected {self.tx_map.size} LLRs, got shape {llr.shape}")
        if not np.isfinite(llr).all():
            raise DecoderInputError("LLRs must be finite")
        full = np.zeros(self.n)
        full[self.tx_map] = llr
        if self.quantize:
            full = np.clip(np.round(full / self.q_step) * self.q_step,
                           -self.q_max, self.q_max)
        return full

    def _run(self, llr, max_iters, early_stop):
        full = self.channel_llr(llr)
        v2c = np.empty(self.edge_var.size)
        c2v = np.empty(self.edge_var.size)
        bits = np.empty(self.n, dtype=np.uint8)
        it, ok = _bp(full, self.edge_var, self.chk_ptr, self.var_ptr, self.var_edge,
                     int(max_iters), self.llr_max, self.quantize, self.q_step,
                     self.q_max, early_stop, v2c, c2v, bits)
        return DecodeResult(bits, bool(ok), int(it)), v2c, c2v

    def decode(self, llr, max_iters: int = DEFAULT_MAX_ITERS) -> DecodeResult:
        return self._run(llr, max_iters, True)[0]

    def messages(self, llr, iterations: int = 1):
        """(variable-to-check, check-to-variable) edge messages after ``iterations``."""
        _, v2c, c2v = self._run(llr, iterations, False)
        return v2c, c2v


@lru_cache(maxsize=32)
def _decoder_for(code: QcCode, quantize: bool) -> SumProductDecoder:
    return SumProductDecoder(code, "8bit" if quantize else "off")


def decode(code: QcCode, llr, max_iters: int = DEFAULT_MAX_ITERS,
           quantize: str | bool = "off") -> DecodeResult:
    """Decode channel LLRs given over the transmitted positions."""
    dec = _decoder_for(code, quantize not in (False, None, "off"))
    return dec.decode(llr, max_iters)



__all__ = ["Encoder", "EncoderBuildError", "DecoderInputError", "DecodeResult",
           "SumProductDecoder", "encode", "decode", "transmit_select", "syndrome",
           "LLR_MAX", "Q_STEP", "Q_MAX"]
