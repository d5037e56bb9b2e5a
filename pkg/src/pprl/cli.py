"""Command-line entry points: generate, run, tune, bench, score.

The `run` command drives one side of a linkage session over TLS, or both
sides in-process with --loopback for demos and experiments. Outputs land in
a directory as matches.csv plus a manifest.json with sizes, byte counts and
timings.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
import time

from . import analysis, datagen, protocol, transport
from .config import LinkageConfig, load_config, save_config
from .lsh import LshParams
from .protocol import MatchCount, MatchResult
from .records import load_csv, save_csv


def _cmd_generate(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    pair = datagen.generate_pair(
        args.n_left,
        args.n_right,
        args.shared,
        seed=args.seed,
        typo_rate=args.typo_rate,
        max_typo_fields=args.max_typo_fields,
    )
    save_csv(pair.left, os.path.join(args.out, "left.csv"))
    save_csv(pair.right, os.path.join(args.out, "right.csv"))
    datagen.save_truth(pair, os.path.join(args.out, "truth.csv"))
    if args.emit_config:
        cfg = LinkageConfig(
            specs=datagen.DEFAULT_GROUPS,
            params=LshParams(
                bands=args.bands, rows=args.rows, seed=secrets.token_bytes(32)
            ),
        )
        save_config(cfg, args.emit_config)
        print(f"wrote config to {args.emit_config}")
    print(
        f"wrote {len(pair.left)} + {len(pair.right)} records "
        f"({args.shared} shared entities) to {args.out}"
    )
    return 0


def _write_outputs(result: MatchResult | MatchCount, cfg: LinkageConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "variant": cfg.variant.value,
        "bands": cfg.params.bands,
        "rows": cfg.params.rows,
        "params_digest": cfg.params_digest().hex(),
        "spec_digest": cfg.spec_digest().hex(),
        "n_local": result.n_local,
        "n_peer": result.n_peer,
    }
    if result.stats is not None:
        manifest.update(
            {
                "bytes_sent": result.stats.bytes_sent,
                "bytes_received": result.stats.bytes_received,
                "comm_kb": result.stats.comm_kb,
                "comm_seconds": result.stats.comm_seconds,
                "offline_seconds": result.stats.offline_seconds,
                "total_seconds": result.stats.total_seconds,
            }
        )
    if isinstance(result, MatchCount):
        manifest["match_count"] = result.count
    else:
        manifest["match_count"] = len(result.entries)
        rows = ["record_id,hits,jaccard_low,jaccard_high,exact_jaccard,handle"]
        for e in result.entries:
            lo, hi = analysis.estimate_jaccard_interval(
                e.hits, cfg.params.bands, cfg.params.rows
            )
            exact = "" if e.exact_jaccard is None else f"{float(e.exact_jaccard):.6f}"
            rows.append(
                f"{e.record_id},{e.hits},{lo:.6f},{hi:.6f},{exact},{e.handle.hex()}"
            )
        with open(os.path.join(out_dir, "matches.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
        if result.revealed is not None:
            revealed = [
                {"handle": h.hex(), "fields": f} for h, f in result.revealed.items()
            ]
            with open(
                os.path.join(out_dir, "revealed.json"), "w", encoding="utf-8"
            ) as fh:
                json.dump(revealed, fh, indent=2)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    dataset = load_csv(args.dataset)
    entropy = bytes.fromhex(args.run_seed) if args.run_seed else None
    if entropy is not None:
        print(
            "warning: --run-seed makes keys and permutations reproducible; "
            "use only for experiments",
            file=sys.stderr,
        )

    if args.loopback:
        if not args.peer_dataset:
            print("--loopback requires --peer-dataset", file=sys.stderr)
            return 2
        peer = load_csv(args.peer_dataset)
        result, outcome, *_ = protocol.run_loopback(
            dataset,
            peer,
            cfg,
            sender_entropy=entropy,
            receiver_entropy=entropy,
        )
        _write_outputs(result, cfg, args.out)
        if isinstance(result, MatchCount):
            print(f"match count: {result.count}")
        else:
            print(f"sender matches: {len(result.entries)}")
            if outcome.matches is not None:
                print(f"receiver matches: {len(outcome.matches.entries)}")
        print(f"outputs in {args.out}")
        return 0

    if not args.cert or not args.key or not args.peer_cert:
        print("network runs need --cert, --key and --peer-cert", file=sys.stderr)
        return 2

    if args.role == "receiver":
        host, port = _parse_endpoint(args.listen or "0.0.0.0:7815")
        channel = transport.TlsChannel.serve(
            host, port, args.cert, args.key, args.peer_cert, timeout=args.timeout
        )
        try:
            outcome = protocol.run_receiver(dataset, cfg, channel, entropy=entropy)
        finally:
            channel.close()
        print(f"session complete; peer holds {outcome.n_peer} records")
        if outcome.matches is not None:
            _write_outputs(outcome.matches, cfg, args.out)
            print(f"receiver matches: {len(outcome.matches.entries)} -> {args.out}")
        if outcome.revealed_ids is not None:
            print(f"records revealed to peer: {len(outcome.revealed_ids)}")
        return 0

    if not args.connect:
        print("sender role needs --connect HOST:PORT", file=sys.stderr)
        return 2
    host, port = _parse_endpoint(args.connect)
    channel = transport.TlsChannel.connect(
        host, port, args.cert, args.key, args.peer_cert, timeout=args.timeout
    )
    try:
        result = protocol.run_sender(dataset, cfg, channel, entropy=entropy)
    finally:
        channel.close()
    _write_outputs(result, cfg, args.out)
    if isinstance(result, MatchCount):
        print(f"match count: {result.count}")
    else:
        print(f"matches: {len(result.entries)} -> {args.out}")
    return 0


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _cmd_tune(args: argparse.Namespace) -> int:
    target = analysis.CurveSpec(
        bands=args.bands, rows=args.rows, threshold=args.threshold
    )
    result = analysis.tune_parameters(
        target,
        epsilon=args.epsilon,
        max_bands=args.max_bands,
        max_rows=args.max_rows,
    )
    if result is None:
        print(
            f"no (bands, rows) within bounds tracks ({args.bands}, {args.rows}) "
            f"to epsilon {args.epsilon}"
        )
        return 1
    print(
        f"target ({target.bands} bands, {target.rows} rows) ~= "
        f"({result.bands} bands, {result.rows} rows), "
        f"max curve deviation {result.max_deviation:.4f}"
    )
    print(
        f"signature work per record: {target.bands * target.rows} -> "
        f"{result.bands * result.rows} hashes"
    )
    if args.curve_out:
        with open(args.curve_out, "w", encoding="utf-8") as fh:
            fh.write("jaccard,target,tuned\n")
            tuned = dict(analysis.curve_samples(result.bands, result.rows))
            for j, p in analysis.curve_samples(target.bands, target.rows):
                fh.write(f"{j:.2f},{p:.6f},{tuned[j]:.6f}\n")
        print(f"curves written to {args.curve_out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    seed = bytes.fromhex(args.seed) if args.seed else secrets.token_bytes(32)
    cfg = LinkageConfig(
        specs=datagen.DEFAULT_GROUPS,
        params=LshParams(bands=args.bands, rows=args.rows, seed=seed),
    )
    print(f"{'n':>8} {'comm KB':>12} {'comm s':>8} {'offline s':>10} {'total s':>8}")
    for n in sizes:
        pair = datagen.generate_pair(n, n, max(1, n // 10), seed=n)
        t0 = time.perf_counter()
        result, outcome, ch_s, _ = protocol.run_loopback(pair.left, pair.right, cfg)
        wall = time.perf_counter() - t0
        offline = result.stats.offline_seconds + outcome.stats.offline_seconds
        comm_kb = (ch_s.stats.bytes_sent + ch_s.stats.bytes_received) / 1000.0
        comm_s = ch_s.stats.comm_seconds
        print(f"{n:>8} {comm_kb:>12.1f} {comm_s:>8.2f} {offline:>10.2f} {wall:>8.2f}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    left_map, right_map = datagen.load_truth(args.truth)
    truth, peer = (
        (left_map, right_map) if args.side == "left" else (right_map, left_map)
    )
    reported = []
    with open(args.matches, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        idx = header.index("record_id")
        for line in fh:
            if line.strip():
                reported.append(line.strip().split(",")[idx])
    report = analysis.evaluate_accuracy(reported, truth, set(peer.values()))
    print(
        f"tp={report.true_positives} fp={report.false_positives} "
        f"fn={report.false_negatives}"
    )
    print(f"precision={report.precision:.4f} recall={report.recall:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pprl", description="privacy-preserving record linkage toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a linked dataset pair")
    g.add_argument("--n-left", type=int, default=1000)
    g.add_argument("--n-right", type=int, default=1000)
    g.add_argument("--shared", type=int, default=100)
    g.add_argument("--typo-rate", type=float, default=0.15)
    g.add_argument("--max-typo-fields", type=int, default=2)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out", required=True)
    g.add_argument("--emit-config", default="")
    g.add_argument("--bands", type=int, default=24)
    g.add_argument("--rows", type=int, default=10)
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run one linkage session")
    r.add_argument("--config", required=True)
    r.add_argument("--dataset", required=True)
    r.add_argument("--role", choices=("sender", "receiver"), default="sender")
    r.add_argument("--loopback", action="store_true", help="run both roles in-process")
    r.add_argument("--peer-dataset", default="")
    r.add_argument("--listen", default="", help="receiver endpoint HOST:PORT")
    r.add_argument("--connect", default="", help="sender target HOST:PORT")
    r.add_argument("--cert", default="")
    r.add_argument("--key", default="")
    r.add_argument("--peer-cert", default="")
    r.add_argument("--timeout", type=float, default=120.0)
    r.add_argument("--run-seed", default="", help="hex entropy for reproducible runs")
    r.add_argument("--out", default="out")
    r.set_defaults(func=_cmd_run)

    t = sub.add_parser("tune", help="search cheaper banding parameters")
    t.add_argument("--bands", type=int, required=True)
    t.add_argument("--rows", type=int, required=True)
    t.add_argument("--threshold", type=float, default=0.5)
    t.add_argument("--epsilon", type=float, default=0.05)
    t.add_argument("--max-bands", type=int, default=64)
    t.add_argument("--max-rows", type=int, default=512)
    t.add_argument("--curve-out", default="")
    t.set_defaults(func=_cmd_tune)

    b = sub.add_parser("bench", help="loopback throughput at growing sizes")
    b.add_argument("--sizes", default="256,1024,4096")
    b.add_argument("--bands", type=int, default=10)
    b.add_argument("--rows", type=int, default=5)
    b.add_argument("--seed", default="", help="hex 32-byte shared seed")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("score", help="score matches against ground truth")
    s.add_argument("--matches", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--side", choices=("left", "right"), default="left")
    s.set_defaults(func=_cmd_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
