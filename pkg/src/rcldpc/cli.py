"""Command-line entry point: ``rcldpc {analyze,build,simulate,search,family}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime error.
Output files default to ``$RCLDPC_OUT_DIR`` (or the working directory) and
begin with a ``#`` line holding the JSON config that produced them.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (ThresholdReport, capacity_limit, format_report_csv, format_report_text,
                       pexit_thresholds)
from .construction import DEFAULT_Z, MIN_GIRTH, member_code, write_qc
from .protomatrix import (FamilyRangeError, embedded_family, format_protomatrix, member,
                          rate, read_protomatrix, validate_family)
from .search import DEFAULT_FRAMES, DEFAULT_M, search_extension
from .simulation import (DEFAULT_MAX_FRAMES, DEFAULT_MIN_FRAME_ERRORS, DecoderConfig, StopRule,
                         default_workers, run_campaign)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
OUT_DIR_ENV = "RCLDPC_OUT_DIR"

log = logging.getLogger("rcldpc")


class UsageError(Exception):
    pass


def _out_path(name: str | None, default: str) -> Path:
    if name:
        return Path(name)
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / default


def _header(config: dict) -> str:
    return "# " + json.dumps(dict(config, version=__version__), sort_keys=True) + "\n"


def parse_ebn0(spec: str) -> list[float]:
    """``"1.0,1.5"`` or ``"start:stop:step"`` (stop inclusive)."""
    try:
        if ":" in spec:
            start, stop, step = (float(t) for t in spec.split(":"))
            if step <= 0:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 6) for i in range(count)]
        return [float(t) for t in spec.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad Eb/N0 list {spec!r}") from None


def parse_members(rates: str | None, members: str | None, family) -> list[int]:
    """Member indices from ``--member 0,6`` or ``--rate 4/5,1/2`` (or ``all``)."""
    if members:
        if members == "all":
            return list(range(len(family)))
        try:
            return [int(t) for t in members.split(",")]
        except ValueError:
            raise UsageError(f"bad member list {members!r}") from None
    if rates:
        if rates == "all":
            return list(range(len(family)))
        lookup = {rate(member(family, n)): n for n in range(len(family))}
        out = []
        for t in rates.split(","):
            try:
                r = Fraction(t.strip())
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"bad rate {t!r}") from None
            if r not in lookup:
                raise FamilyRangeError(f"rate {t} is not a family member")
            out.append(lookup[r])
        return out
    raise UsageError("give --rate or --member")


def cmd_analyze(args) -> int:
    if args.proto:
        protos = [read_protomatrix(args.proto)]
        source = str(args.proto)
    else:
        fam = embedded_family()
        protos = fam.members()
        source = "embedded"
    thr = pexit_thresholds(protos, args.tol)
    rows = [ThresholdReport(rate(p), float(t), capacity_limit(rate(p)))
            for p, t in zip(protos, thr)]
    config = {"command": "analyze", "source": source, "tol_db": args.tol}
    text = format_report_text(rows)
    csv_text = format_report_csv(rows)
    sys.stdout.write(csv_text if args.format == "csv" else text)
    if args.out:
        Path(args.out).write_text(_header(config) + csv_text)
    return EXIT_OK


def cmd_build(args) -> int:
    fam = embedded_family()
    code = member_code(fam, args.member, args.Z, args.seed)
    report = {
        "member": args.member, "rate": str(Fraction(code.k, code.tx_map.size)),
        "Z": code.Z, "n": code.n, "rows": code.n_rows, "k": code.k,
        "transmitted": int(code.tx_map.size), "base_shape": list(code.shifts.shape),
        "girth": None if code.meta["girth"] == float("inf") else int(code.meta["girth"]),
        "girth_ok": bool(code.meta["girth_ok"]), "requested_seed": args.seed,
        "seed_used": code.meta["seed"], "attempts": code.meta["attempts"],
        "daughter_full_rank": code.meta["daughter_full_rank"],
        "parallel_edges": False,
    }
    config = {"command": "build", "member": args.member, "Z": args.Z, "seed": args.seed}
    out = _out_path(args.out, f"member_{args.member:02d}_Z{args.Z}.qc")
    write_qc(code, out, dict(config, version=__version__, report=report))
    for key, val in report.items():
        print(f"{key}: {val}")
    print(f"written: {out}")
    if not report["girth_ok"]:
        log.warning("girth %s below %d after %d attempts", report["girth"], MIN_GIRTH,
                    report["attempts"])
    return EXIT_OK


def cmd_simulate(args) -> int:
    fam = embedded_family()
    members = parse_members(args.rate, args.member, fam)
    grid = parse_ebn0(args.ebn0)
    stop = StopRule(args.min_errors, args.max_frames)
    decoder = DecoderConfig(args.max_iters, args.quantize)
    out = _out_path(args.out, "simulation.csv")
    records = run_campaign(fam, members, grid, stop, out, decoder, args.seed, args.Z,
                           args.build_seed, args.workers)
    for r in records:
        print(f"rate {r.rate} @ {r.ebn0_db:.3f} dB: frames {r.frames} "
              f"FER {r.fer:.3e} BER {r.ber:.3e}")
    print(f"written: {out}")
    return EXIT_OK


def cmd_search(args) -> int:
    fam = embedded_family()
    base = member(fam, args.member)
    report = search_extension(base, args.budget, args.M, args.operating_ebn0, args.frames,
                              args.Z, args.seed, DecoderConfig(args.max_iters, args.quantize),
                              args.workers)
    report.config.update(member=args.member)
    out = _out_path(args.out, f"search_member_{args.member:02d}.json")
    out.write_text(report.to_json())
    e = report.chosen_entry
    print(f"chosen row: {' '.join(map(str, report.chosen.old_col_edges))} "
          f"threshold {e.threshold_db:.3f} dB FER {e.fer:.3e}")
    print(f"written: {out}")
    return EXIT_OK


def cmd_family(args) -> int:
    fam = embedded_family()
    problems = validate_family(fam)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_DATA
    out_dir = Path(args.out_dir) if args.out_dir else Path(os.environ.get(OUT_DIR_ENV, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    for n in range(len(fam)):
        p = member(fam, n)
        path = out_dir / f"member_{n:02d}.pm"
        config = {"command": "family", "member": n, "rate": str(rate(p))}
        path.write_text(_header(config) + format_protomatrix(p))
        line = f"member {n:2d}: rate {str(rate(p)):>5}  {p.n_checks}x{p.n_vars}  {path}"
        if args.lift:
            code = member_code(fam, n, args.Z, args.seed)
            qc = out_dir / f"member_{n:02d}_Z{args.Z}.qc"
            write_qc(code, qc, dict(config, Z=args.Z, seed=args.seed, version=__version__))
            line += f"  {qc}"
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcldpc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="PEXIT thresholds and capacity gaps")
    g = a.add_mutually_exclusive_group()
    g.add_argument("--family", choices=["embedded"], default="embedded")
    g.add_argument("--proto", help="protomatrix text file")
    a.add_argument("--tol", type=float, default=1e-3, help="bisection tolerance (dB)")
    a.add_argument("--format", choices=["text", "csv"], default="text")
    a.add_argument("--out", help="also write the CSV report here")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("build", help="lift one family member to a QC code")
    b.add_argument("--member", type=int, required=True)
    b.add_argument("--Z", type=int, default=DEFAULT_Z)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("simulate", help="Monte Carlo FER/BER campaign")
    s.add_argument("--rate", help="comma-separated rates, e.g. 4/5,1/2, or 'all'")
    s.add_argument("--member", help="comma-separated extension counts instead of --rate")
    s.add_argument("--ebn0", required=True, help="list '1,1.5' or range 'start:stop:step'")
    s.add_argument("--min-errors", type=int, default=DEFAULT_MIN_FRAME_ERRORS)
    s.add_argument("--max-frames", type=int, default=DEFAULT_MAX_FRAMES)
    s.add_argument("--max-iters", type=int, default=200)
    s.add_argument("--quantize", choices=["off", "8bit"], default="off")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--Z", type=int, default=DEFAULT_Z)
    s.add_argument("--build-seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=default_workers())
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("search", help="search the next extension row")
    r.add_argument("--member", type=int, default=0)
    r.add_argument("--budget", type=int, default=4096)
    r.add_argument("--M", type=int, default=DEFAULT_M)
    r.add_argument("--operating-ebn0", type=float)
    r.add_argument("--frames", type=int, default=DEFAULT_FRAMES)
    r.add_argument("--max-iters", type=int, default=200)
    r.add_argument("--quantize", choices=["off", "8bit"], default="off")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--Z", type=int, default=DEFAULT_Z)
    r.add_argument("--workers", type=int, default=default_workers())
    r.add_argument("--out")
    r.set_defaults(func=cmd_search)

    f = sub.add_parser("family", help="export all member protomatrices")
    f.add_argument("--out-dir")
    f.add_argument("--lift", action="store_true", help="also write lifted QC codes")
    f.add_argument("--Z", type=int, default=DEFAULT_Z)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_family)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rcldpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, IndexError) as exc:
        print(f"rcldpc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"rcldpc: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
