"""Command-line entry point ``protcc``.

Exit codes: 0 success, 1 check failure, 2 partial batch failure,
64 usage error, 65 corrupt or incompatible data.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .checks import SUITES, run_suite
from .complex import DEFAULT_K, DEFAULT_MIN_SSE, build_pcc
from .errors import CorruptBlob, PccError, ShapeMismatch, VersionMismatch
from .features import featurize
from .serialize import (PccBundle, atomic_write, load_params, outputs_to_bytes, outputs_to_text,
                        save_params)
from .sse import assign_sse
from .structure_io import TrackKind, load_annotations, parse_pdb
from .synthetic import random_protein
from .tcpnet import ModelConfig, Readout, forward, init_params, readout

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64
EXIT_DATA = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _workers() -> int:
    raw = os.environ.get("PCC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"PCC_THREADS must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------

def featurize_file(path, args, sse_text=None, three_di_text=None) -> PccBundle:
    text = Path(path).read_text()
    s = parse_pdb(text, source_id=Path(path).stem)
    if sse_text is not None:
        labels = load_annotations(sse_text, TrackKind.SSE3, s)
        sse_source = "file"
    else:
        labels = assign_sse(s)
        sse_source = "assigned"
    three_di = None if three_di_text is None else load_annotations(three_di_text, TrackKind.THREE_DI, s)
    cc = build_pcc(s, labels, args.knn, args.min_sse)
    feats = featurize(cc, s, three_di, use_sequence=not args.no_sequence)
    if args.f32:
        feats = tuple(b.astype(np.float32) for b in feats)
    return PccBundle.build(cc, feats, s.source_id, sequence_withheld=args.no_sequence,
                           sse_source=sse_source, knn=args.knn, min_sse=args.min_sse)


def cmd_featurize(args) -> int:
    if (args.sse_from or args.three_di_from) and len(args.inputs) != 1:
        raise UsageError("--sse-from and --3di-from annotate a single input file")
    sse_text = Path(args.sse_from).read_text() if args.sse_from else None
    tdi_text = Path(args.three_di_from).read_text() if args.three_di_from else None
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise UsageError(f"output directory {out_dir} does not exist")

    def one(path):
        try:
            bundle = featurize_file(path, args, sse_text, tdi_text)
            target = out_dir / (Path(path).stem + ".pcc")
            bundle.write(target)
            return path, target, bundle, None
        except (OSError, PccError, ValueError) as exc:
            return path, None, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(one, args.inputs))
    failed = 0
    for path, target, bundle, err in results:
        if err is None:
            h = bundle.header
            print(f"ok {path} -> {target} nodes={h['counts'][0]} edges={h['counts'][1]} "
                  f"sse={h['counts'][2]}")
        else:
            failed += 1
            print(f"error {path}: {err}", file=sys.stderr)
    return EXIT_OK if failed == 0 else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# forward / init-params
# ---------------------------------------------------------------------------

def check_compatible(bundle: PccBundle, config: ModelConfig):
    for r in range(4):
        have = bundle.features[r].widths
        want = (config.input_scalar_dims[r], config.input_vector_dims[r])
        if have != want:
            raise ShapeMismatch(f"rank {r}: bundle widths (scalars {have[0]}, vectors {have[1]}) "
                                f"vs params (scalars {want[0]}, vectors {want[1]})")


def cmd_forward(args) -> int:
    bundle = PccBundle.read(args.bundle)
    if args.params:
        params = load_params(args.params)
    else:
        params = init_params(ModelConfig(), seed=args.seed)
    dtype = np.float32 if args.f32 else np.float64
    params = params.astype(dtype)
    check_compatible(bundle, params.config)
    feats = tuple(b.astype(dtype) for b in bundle.features)
    final = forward(params, bundle.to_cc(), feats)
    vec = readout(final, args.readout, params.config.protein_channel)
    out = Path(args.out) if args.out else Path(args.bundle).with_suffix("")
    txt_path = out.with_name(out.name + ".emb.txt")
    bin_path = out.with_name(out.name + ".emb.bin")
    atomic_write(txt_path, outputs_to_text(final, vec, args.readout).encode("ascii"))
    atomic_write(bin_path, outputs_to_bytes(final, vec, args.readout))
    print(f"readout {args.readout} width={len(vec)} -> {txt_path} {bin_path}")
    return EXIT_OK


def cmd_init_params(args) -> int:
    config = ModelConfig(num_layers=args.layers, seed=args.seed)
    params = init_params(config)
    if args.f32:
        params = params.astype(np.float32)
    save_params(params, args.out)
    count = sum(a.size for _, a in params.named_arrays())
    print(f"wrote {args.out} layers={args.layers} seed={args.seed} weights={count}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check / bench / inspect
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    print(f"suite={args.suite} seed={args.seed} trials={args.trials if args.trials else 'default'}")
    results = run_suite(args.suite, seed=args.seed, trials=args.trials)
    for res in results:
        print(res.line(), flush=True)
    failed = sum(not r.passed for r in results)
    print(f"summary checks={len(results)} failed={failed} seed={args.seed}")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), min(times)


def bench_rows(sizes, repeats=5, seed=0, layers=6):
    """``(size, stage, median_s, min_s)`` per size and stage."""
    rng = np.random.default_rng(seed)
    params = init_params(ModelConfig(num_layers=layers), seed=seed)
    rows = []
    for n in sizes:
        s = random_protein(n, rng)

        def feat():
            cc = build_pcc(s, assign_sse(s))
            return cc, featurize(cc, s)

        cc, feats = feat()
        rows.append((n, "featurize", *_median_time(feat, repeats)))
        rows.append((n, "forward", *_median_time(lambda: forward(params, cc, feats), repeats)))
    return rows


def format_table(header, rows) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def cmd_bench(args) -> int:
    rows = bench_rows(args.sizes, args.repeats, args.seed, args.layers)
    table = [(n, stage, f"{med:.6f}", f"{lo:.6f}") for n, stage, med, lo in rows]
    print(format_table(("size", "stage", "median_s", "min_s"), table))
    return EXIT_OK


def sse_composition(labels) -> str:
    counts = {k: list(labels).count(k) for k in "HEC"}
    parts = [f"{k}×{v}" for k, v in counts.items() if v]
    return f" ({', '.join(parts)})" if parts else ""


def inspect_lines(bundle: PccBundle) -> list:
    h = bundle.header
    n, e, c, p = h["counts"]
    lines = [
        f"source: {h['source_id']}",
        f"0-cells: {n}",
        f"1-cells: {e}",
        f"2-cells: {c}{sse_composition(h['sse_labels'])}",
        f"3-cells: {p}",
        "widths: scalars " + " ".join(map(str, h["scalar_widths"]))
        + " | vectors " + " ".join(map(str, h["vector_widths"])),
        "nnz: " + " ".join(f"{k}={len(v)}" for k, v in bundle.matrices.items()),
        f"flags: sequence_withheld={str(h['sequence_withheld']).lower()} sse_source={h['sse_source']} "
        f"knn={h['knn']} min_sse={h['min_sse']} dtype={h['dtype']}",
    ]
    return lines


def cmd_inspect(args) -> int:
    print("\n".join(inspect_lines(PccBundle.read(args.bundle))))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="protcc", description="Protein combinatorial complexes and TCPNet.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("featurize", help="PDB files -> PCC bundles")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out-dir", default=".")
    p.add_argument("--knn", type=_positive, default=DEFAULT_K)
    p.add_argument("--min-sse", type=_positive, default=DEFAULT_MIN_SSE)
    p.add_argument("--no-sequence", action="store_true", help="zero the amino-acid blocks")
    p.add_argument("--sse-from", help="H/E/C labels instead of assigning them")
    p.add_argument("--3di-from", dest="three_di_from", help="3Di labels, one per residue")
    p.add_argument("--f32", action="store_true", help="store 32-bit features")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("forward", help="run the network on a bundle")
    p.add_argument("bundle")
    p.add_argument("--params", help="parameter blob; random init from --seed if omitted")
    p.add_argument("--readout", choices=[m.value for m in Readout], default="mean")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("-o", "--out", help="output prefix (default: bundle path without suffix)")
    p.add_argument("--f32", action="store_true")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("init-params", help="write a seeded parameter blob")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--layers", type=_positive, default=6)
    p.add_argument("--f32", action="store_true")
    p.set_defaults(func=cmd_init_params)

    p = sub.add_parser("check", help="run a verification suite")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--trials", type=_positive, default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="time featurize and forward on synthetic proteins")
    p.add_argument("--sizes", type=_positive, nargs="+", default=[64, 256, 1024])
    p.add_argument("--repeats", type=_positive, default=5)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--layers", type=_positive, default=6)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="summarize a bundle")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"protcc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorruptBlob, VersionMismatch, ShapeMismatch) as exc:
        print(f"protcc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"protcc: error: cannot open {exc.filename}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
