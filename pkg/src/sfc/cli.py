"""Command-line driver: code design, inspection, SER sweeps, plotting.

Exit codes: 0 ok, 2 bad configuration, 3 construction failure, 4 I/O or
malformed data files.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import channel, decoder, diversity, sfcode
from .lattices import BoxTooLarge, UnsupportedLattice
from .manifold import dimension
from .spherewrap import EmptyCode, MinDistanceViolation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONSTRUCTION = 3
EXIT_IO = 4

CSV_COLUMNS = ["snr_db", "trials", "symbol_errors", "ser", "decoder",
               "code_id", "seed"]
DESIGN_SEEDS = 200_000


class ConfigError(ValueError):
    pass


class MalformedCsv(ValueError):
    pass


def parse_snr(text):
    """SNR sweep "start:step:stop" in dB, inclusive of stop."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--snr wants start:step:stop, got {text!r}")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"non-numeric SNR sweep {text!r}")
    if step <= 0 or stop < start:
        raise ConfigError("SNR sweep must increase")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def _thread_count():
    raw = os.environ.get("SFC_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, min(int(raw), 64))
    except ValueError:
        raise ConfigError(f"SFC_THREADS={raw!r} is not an integer")


def run_sweep(cb, decoder_name, snr_db, trials, seed, n_r, noiseless=False,
              ctx=None, progress=None):
    """Monte Carlo SER rows for one codebook; deterministic in (args, seed).

    Trial t of sweep point i draws everything (message, taps, noise) from
    the counter stream (seed, i*trials + t), so results do not depend on
    execution order or thread count.
    """
    p = cb.params
    words = cb.words
    n = len(cb)

    def one_trial(index):
        rng = channel.trial_rng(seed, index)
        msg = int(rng.integers(0, n))
        _, h = channel.sample_channel(p.K, p.L, p.n_t, n_r, rng)
        rec = channel.transmit(words[msg], h, rho, rng=rng,
                               noiseless=noiseless)
        if ctx is None:
            res = decoder.ml_decode(rec, h, words, rho)
        else:
            res = decoder.lattice_decode(rec, h, ctx, rho)
        return res.index != msg

    workers = _thread_count()
    rows = []
    for i, db in enumerate(snr_db):
        rho = 10.0 ** (db / 10.0)
        t0 = time.time()
        base = i * trials
        if workers == 1:
            errors = sum(one_trial(base + t) for t in range(trials))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                errors = sum(pool.map(one_trial, range(base, base + trials),
                                      chunksize=64))
        wall = time.time() - t0
        rows.append({"snr_db": db, "trials": trials,
                     "symbol_errors": int(errors),
                     "ser": errors / trials, "wall_time": wall})
        if progress:
            progress(rows[-1])
    return rows


def write_csv(path, rows, decoder_name, code_id, seed):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([repr(float(r["snr_db"])), r["trials"],
                        r["symbol_errors"], repr(r["ser"]), decoder_name,
                        code_id, seed])


def _summary(cb, config):
    pts = cb.sphere_points
    min_geo = None
    if pts is not None and 2 <= len(pts) <= 4096:
        g = np.clip(pts @ pts.T, -1.0, 1.0)
        np.fill_diagonal(g, -1.0)
        min_geo = float(np.arccos(g.max()))
    meta = cb.lattice_meta or {}
    return {
        "config": config,
        "D": dimension(cb.params.n_t, cb.params.T) if meta else None,
        "T": cb.params.T,
        "words": len(cb),
        "rate": cb.rate,
        "min_geodesic": min_geo,
        "reclaimed": meta.get("reclaimed"),
    }


def cmd_design(args):
    config = {"K": args.K, "L": args.L, "nt": args.nt, "lattice": args.lattice,
              "dmin": args.dmin, "alpha": args.alpha,
              "band_width": args.band_width}
    cb = sfcode.spherical_codebook(args.K, args.L, args.nt, args.lattice,
                                   args.dmin, alpha=args.alpha,
                                   band_width=args.band_width,
                                   seeds=DESIGN_SEEDS)
    sfcode.save_codebook(cb, args.out)
    config["band_width"] = cb.lattice_meta["band_width"]
    print(json.dumps(_summary(cb, config), indent=2))
    return EXIT_OK


def cmd_baseline(args):
    cb = sfcode.alamouti_codebook(args.scheme.removeprefix("alamouti-"), K=args.K)
    sfcode.save_codebook(cb, args.out)
    print(json.dumps(_summary(cb, {"scheme": args.scheme, "K": args.K}),
                     indent=2))
    return EXIT_OK


def cmd_inspect(args):
    cb = sfcode.load_codebook(args.codebook)
    rep = diversity.codebook_report(cb)
    out = {
        "words": len(cb),
        "rate": cb.rate,
        "params": {"K": cb.params.K, "L": cb.params.L, "nt": cb.params.n_t},
        "report": rep.to_dict(),
        "orthogonality_certified": bool(rep.max_orth_residual <= 1e-9),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _lattice_context(cb):
    meta = cb.lattice_meta
    if not meta:
        raise ConfigError("lattice decoding needs a lattice-designed codebook")
    p = cb.params
    rebuilt = sfcode.spherical_codebook(
        p.K, p.L, p.n_t, meta["family"], meta["d_S"], alpha=meta["alpha"],
        band_width=meta["band_width"], seeds=meta.get("seeds", DESIGN_SEEDS))
    if rebuilt.words.shape != cb.words.shape or \
            np.abs(rebuilt.words - cb.words).max() > 1e-9:
        raise sfcode.SchemaMismatch(
            "stored words do not match their construction record")
    return decoder.DecoderContext(rebuilt)


def cmd_simulate(args):
    cb = sfcode.load_codebook(args.codebook)
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    if args.nr < 1:
        raise ConfigError("--nr must be >= 1")
    snr = parse_snr(args.snr)
    ctx = None
    if args.decoder == "lattice":
        if args.nr < cb.params.n_t:
            raise ConfigError("lattice decoding needs --nr >= nt")
        ctx = _lattice_context(cb)
    code_id = os.path.splitext(os.path.basename(args.codebook))[0]

    def progress(row):
        print("snr=%g ser=%g (%.1fs)" % (row["snr_db"], row["ser"],
                                         row["wall_time"]), file=sys.stderr)

    rows = run_sweep(cb, args.decoder, snr, args.trials, args.seed, args.nr,
                     noiseless=args.noiseless, ctx=ctx, progress=progress)
    write_csv(args.out, rows, args.decoder, code_id, args.seed)
    return EXIT_OK


def read_results(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise MalformedCsv(f"{path}: unexpected header {header}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise MalformedCsv(f"{path}:{line_no}: wrong column count")
            rec = dict(zip(CSV_COLUMNS, row))
            if rec["ser"] == "":
                print(f"warning: {path}:{line_no}: empty ser, skipped",
                      file=sys.stderr)
                continue
            try:
                rec["snr_db"] = float(rec["snr_db"])
                rec["ser"] = float(rec["ser"])
            except ValueError:
                raise MalformedCsv(f"{path}:{line_no}: non-numeric values")
            rows.append(rec)
    return rows


def cmd_plot(args):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = {}
    for path in args.csvs:
        for rec in read_results(path):
            key = (rec["code_id"], rec["decoder"])
            series.setdefault(key, []).append((rec["snr_db"], rec["ser"]))
    if not series:
        raise MalformedCsv("no plottable rows found")
    fig, ax = plt.subplots(figsize=(7, 5))
    for (code_id, dec), pts in sorted(series.items()):
        pts.sort()
        x = [p[0] for p in pts]
        y = [max(p[1], 1e-12) for p in pts]  # keep zero-SER points on the log axis
        ax.semilogy(x, y, marker="o", label=f"{code_id} [{dec}]")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("symbol error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.savefig(args.out, format="svg", bbox_inches="tight")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="sfc",
                                 description="spherical space-frequency codes")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="build a codebook and write it as JSON")
    d.add_argument("--K", type=int, required=True)
    d.add_argument("--L", type=int, required=True)
    d.add_argument("--nt", type=int, required=True)
    d.add_argument("--lattice", required=True)
    d.add_argument("--dmin", type=float, required=True)
    d.add_argument("--alpha", type=float, default=0.0)
    d.add_argument("--band-width", dest="band_width", type=float, default=None)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_design)

    b = sub.add_parser("baseline", help="build an Alamouti baseline codebook")
    b.add_argument("--scheme", choices=["alamouti-qpsk", "alamouti-8psk"],
                   required=True)
    b.add_argument("--K", type=int, default=4)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_baseline)

    i = sub.add_parser("inspect", help="pairwise diversity report for a codebook")
    i.add_argument("codebook")
    i.set_defaults(func=cmd_inspect)

    s = sub.add_parser("simulate", help="Monte Carlo SER sweep to CSV")
    s.add_argument("codebook")
    s.add_argument("--snr", required=True, help="start:step:stop in dB")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--nr", type=int, default=1)
    s.add_argument("--decoder", choices=["ml", "lattice"], default="ml")
    s.add_argument("--noiseless", action="store_true",
                   help="sanity mode: omit the noise term")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="render SER curves from result CSVs")
    p.add_argument("csvs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, sfcode.IndivisibleK, UnsupportedLattice) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        if isinstance(e, (sfcode.SchemaMismatch, MalformedCsv)):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyCode, MinDistanceViolation, BoxTooLarge) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
