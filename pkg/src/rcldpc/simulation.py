"""Monte Carlo FER/BER measurement over the BPSK / AWGN channel.

Frames are drawn in fixed-size chunks; chunk ``j`` of a point owns the
random stream ``default_rng([seed, j])``.  Chunks may be computed by any
number of worker processes, but they are merged in order and the stopping
rule is applied frame by frame, so a record never depends on the worker
count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codec import DEFAULT_MAX_ITERS, Encoder, SumProductDecoder, transmit_select
from .construction import DEFAULT_SEED, DEFAULT_Z, QcCode, member_code
from .protomatrix import RcFamily

log = logging.getLogger(__name__)

CHUNK_FRAMES = 32
DEFAULT_MIN_FRAME_ERRORS = 100
DEFAULT_MAX_FRAMES = 10 ** 7

CSV_FIELDS = ("rate", "ebn0_db", "frames", "frame_errors", "bit_errors", "fer", "ber",
              "mean_iterations", "seed", "wall_time_s")


@dataclass(frozen=True)
class ChannelSpec:
    """Operating point; ``rate`` is k over the number of transmitted bits."""

    ebn0_db: float
    rate: float

    def __post_init__(self):
        if not 0 < float(self.rate) <= 1:
            raise ValueError("rate must lie in (0, 1]")

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * float(self.rate) * 10.0 ** (self.ebn0_db / 10.0))

    @classmethod
    def for_code(cls, code: QcCode, ebn0_db: float) -> "ChannelSpec":
        return cls(ebn0_db, Fraction(code.k, code.tx_map.size))


@dataclass(frozen=True)
class StopRule:
    min_frame_errors: int = DEFAULT_MIN_FRAME_ERRORS
    max_frames: int = DEFAULT_MAX_FRAMES

    def __post_init__(self):
        if self.min_frame_errors < 1 or self.max_frames < 1:
            raise ValueError("stop rule limits must be at least 1")


@dataclass(frozen=True)
class DecoderConfig:
    max_iters: int = DEFAULT_MAX_ITERS
    quantize: str = "off"


@dataclass
class SimRecord:
    rate: str
    ebn0_db: float
    frames: int
    frame_errors: int
    bit_errors: int
    fer: float
    ber: float
    mean_iterations: float
    seed: int
    wall_time_s: float = field(default=0.0, compare=False)

    def row(self) -> list[str]:
        return [self.rate, f"{self.ebn0_db:.4f}", str(self.frames), str(self.frame_errors),
                str(self.bit_errors), f"{self.fer:.6e}", f"{self.ber:.6e}",
                f"{self.mean_iterations:.4f}", str(self.seed), f"{self.wall_time_s:.3f}"]


def awgn_llr(tx_bits, spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """BPSK (0 -> +1, 1 -> -1) through AWGN; returns ``2 y / sigma**2``."""
    x = 1.0 - 2.0 * np.asarray(tx_bits, dtype=float)
    var = spec.sigma2
    y = x + math.sqrt(var) * rng.standard_normal(x.shape)
    return 2.0 * y / var


class _Link:
    """Encoder + decoder pair held per process."""

    def __init__(self, code: QcCode, decoder: DecoderConfig):
        self.code = code
        self.encoder = Encoder(code)
        self.decoder = SumProductDecoder(code, decoder.quantize)
        self.max_iters = decoder.max_iters
        self.h = code.parity_check()

    def chunk(self, spec: ChannelSpec, seed: int, index: int, frames: int):
        """Per-frame (frame_error, bit_errors, iterations) for one chunk."""
        rng = np.random.default_rng([seed, index])
        info = self.code.info_cols
        fe = np.zeros(frames, dtype=bool)
        be = np.zeros(frames, dtype=np.int64)
        it = np.zeros(frames, dtype=np.int64)
        for f in range(frames):
            u = rng.integers(0, 2, self.code.k, dtype=np.uint8)
            c = self.encoder.encode(u)
            llr = awgn_llr(transmit_select(self.code, c), spec, rng)
            res = self.decoder.decode(llr, self.max_iters)
            if res.converged and ((self.h @ res.bits.astype(np.int64)) & 1).any():
                raise RuntimeError("decoder reported convergence with a nonzero syndrome")
            wrong = int(np.count_nonzero(res.bits[info] != u))
            fe[f] = wrong > 0
            be[f] = wrong
            it[f] = res.iterations
        return fe, be, it


_WORKER_LINK: _Link | None = None


def _worker_init(code, decoder):
    global _WORKER_LINK
    _WORKER_LINK = _Link(code, decoder)


def _worker_chunk(spec, seed, index, frames):
    return _WORKER_LINK.chunk(spec, seed, index, frames)


def run_point(code: QcCode, spec: ChannelSpec, stop: StopRule = StopRule(),
              decoder: DecoderConfig = DecoderConfig(), seed: int = 0,
              workers: int = 1, encoder: Encoder | None = None,
              chunk_frames: int = CHUNK_FRAMES) -> SimRecord:
    """Simulate one operating point until ``stop`` is met.

    A frame error is any mismatch between decoded and sent info bits, so
    undetected decoding errors count.  Stops at the exact frame where the
    error budget is reached, or at ``stop.max_frames``.
    """
    t0 = time.perf_counter()
    n_chunks = -(-stop.max_frames // chunk_frames)

    def size(j):
        return min(chunk_frames, stop.max_frames - j * chunk_frames)

    frames = frame_errors = bit_errors = iters = 0
    done = False

    def absorb(fe, be, it):
        nonlocal frames, frame_errors, bit_errors, iters, done
        cum = np.cumsum(fe)
        hit = np.flatnonzero(frame_errors + cum >= stop.min_frame_errors)
        take = hit[0] + 1 if hit.size else fe.size
        frames += int(take)
        frame_errors += int(fe[:take].sum())
        bit_errors += int(be[:take].sum())
        iters += int(it[:take].sum())
        done = bool(hit.size) or frames >= stop.max_frames

    if workers <= 1:
        link = _Link(code, decoder)
        if encoder is not None:
            link.encoder = encoder
        for j in range(n_chunks):
            absorb(*link.chunk(spec, seed, j, size(j)))
            if done:
                break
    else:
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(code, decoder)) as pool:
            next_j = 0
            pending = []
            while not done and (pending or next_j < n_chunks):
                while len(pending) < 2 * workers and next_j < n_chunks:
                    pending.append(pool.submit(_worker_chunk, spec, seed, next_j, size(next_j)))
                    next_j += 1
                absorb(*pending.pop(0).result())
            for fut in pending:
                fut.cancel()

    k = code.k
    return SimRecord(
        rate=str(Fraction(spec.rate).limit_denominator(10 ** 6)),
        ebn0_db=float(spec.ebn0_db), frames=frames, frame_errors=frame_errors,
        bit_errors=bit_errors, fer=frame_errors / frames, ber=bit_errors / (frames * k),
        mean_iterations=iters / frames, seed=int(seed),
        wall_time_s=time.perf_counter() - t0)


def _header_line(config: dict) -> str:
    return "# " + json.dumps(config, sort_keys=True) + "\n"


def read_results(path) -> tuple[dict | None, list[SimRecord]]:
    """Parse a results file written by :func:`run_campaign`."""
    path = Path(path)
    if not path.exists():
        return None, []
    text = path.read_text()
    config = None
    body = []
    for ln in text.splitlines():
        if ln.startswith("# "):
            config = json.loads(ln[2:])
        elif ln.strip():
            body.append(ln)
    records = []
    for row in csv.DictReader(io.StringIO("\n".join(body))):
        records.append(SimRecord(
            rate=row["rate"], ebn0_db=float(row["ebn0_db"]), frames=int(row["frames"]),
            frame_errors=int(row["frame_errors"]), bit_errors=int(row["bit_errors"]),
            fer=float(row["fer"]), ber=float(row["ber"]),
            mean_iterations=float(row["mean_iterations"]), seed=int(row["seed"]),
            wall_time_s=float(row["wall_time_s"])))
    return config, records


def _point_key(rate: str, ebn0_db: float) -> tuple[str, str]:
    return rate, f"{ebn0_db:.4f}"


def run_campaign(family: RcFamily, members: Sequence[int], ebn0_grid: Iterable[float],
                 stop: StopRule, out_path, decoder: DecoderConfig = DecoderConfig(),
                 seed: int = 0, Z: int = DEFAULT_Z, build_seed: int = DEFAULT_SEED,
                 workers: int = 1, config_extra: dict | None = None) -> list[SimRecord]:
    """Simulate every (member, Eb/N0) pair, appending one CSV row per point.

    The output starts with a JSON config line and a CSV header.  Re-running
    with the same config skips points already present in the file.
    """
    out_path = Path(out_path)
    grid = [float(x) for x in ebn0_grid]
    config = {
        "kind": "simulation", "members": [int(m) for m in members],
        "ebn0_db": grid, "Z": Z, "build_seed": build_seed, "seed": seed,
        "min_frame_errors": stop.min_frame_errors, "max_frames": stop.max_frames,
        "max_iters": decoder.max_iters, "quantize": decoder.quantize,
        "chunk_frames": CHUNK_FRAMES,
    }
    if config_extra:
        config.update(config_extra)

    old_config, records = read_results(out_path)
    if old_config is not None:
        keys = ("Z", "build_seed", "seed", "min_frame_errors", "max_frames",
                "max_iters", "quantize")
        if any(old_config.get(k) != config[k] for k in keys):
            raise ValueError(f"{out_path} was written with a different configuration")
    else:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with out_path.open("w") as fh:
            fh.write(_header_line(config))
            fh.write(",".join(CSV_FIELDS) + "\n")
    done = {_point_key(r.rate, r.ebn0_db) for r in records}

    for n in members:
        code = member_code(family, n, Z, build_seed)
        enc = Encoder(code)
        for db in grid:
            spec = ChannelSpec.for_code(code, db)
            key = _point_key(str(Fraction(spec.rate)), db)
            if key in done:
                log.info("skipping completed point %s @ %s dB", *key)
                continue
            rec = run_point(code, spec, stop, decoder, seed, workers, encoder=enc)
            with out_path.open("a") as fh:
                csv.writer(fh, lineterminator="\n").writerow(rec.row())
            log.info("rate %s @ %.3f dB: %d/%d frame errors", rec.rate, db,
                     rec.frame_errors, rec.frames)
            records.append(rec)
            done.add(key)
    return records


def fer_monotone_violations(records: Sequence[SimRecord], z: float = 1.96) -> list[str]:
    """Adjacent Eb/N0 pairs (per rate) whose FER rises beyond 95% Wilson intervals."""

    def wilson(k, n):
        if n == 0:
            return 0.0, 1.0
        p = k / n
        den = 1 + z * z / n
        mid = (p + z * z / (2 * n)) / den
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
        return mid - half, mid + half

    out = []
    by_rate: dict[str, list[SimRecord]] = {}
    for r in records:
        by_rate.setdefault(r.rate, []).append(r)
    for rate_label, rows in by_rate.items():
        rows = sorted(rows, key=lambda r: r.ebn0_db)
        for a, b in zip(rows, rows[1:]):
            # a rise counts only if the intervals separate
            if wilson(b.frame_errors, b.frames)[0] > wilson(a.frame_errors, a.frames)[1]:
                out.append(f"rate {rate_label}: FER rises from {a.ebn0_db} to {b.ebn0_db} dB")
    return out


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


__all__ = ["ChannelSpec", "StopRule", "DecoderConfig", "SimRecord", "awgn_llr", "run_point",
           "run_campaign", "read_results", "fer_monotone_violations", "CSV_FIELDS"]
