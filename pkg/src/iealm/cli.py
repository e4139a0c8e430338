"""Command-line entry point: ``iealm <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis, attack, lclm
from .cipher import apply_keystream, channel_sums
from .imageio import ImageFormatError, read_image, write_image
from .keystream import B_MAX, B_MIN, ChannelSums, KeyMaterial, generate_keystream
from .oracle import LocalOracle, OracleConfig, OracleError, RemoteOracle, serve


class CLIError(Exception):
    pass


def _b_value(text: str) -> float:
    try:
        b = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not B_MIN <= b < B_MAX:
        raise argparse.ArgumentTypeError(f"b={b} outside [{B_MIN}, {B_MAX})")
    return b


def _sums(text: str) -> ChannelSums:
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sums must be three integers, got {text!r}") from None
    if len(parts) != 3 or any(p < 0 for p in parts):
        raise argparse.ArgumentTypeError(f"sums must be three non-negative integers, got {text!r}")
    return ChannelSums(*parts)


def _size(text: str) -> tuple[int, int]:
    try:
        m, n = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 256x256, got {text!r}") from None
    if m < 1 or n < 1 or m * n < 2:
        raise argparse.ArgumentTypeError(f"size {text} has fewer than two pixels")
    return m, n


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def _write_json(path: str | None, doc: dict) -> None:
    text = json.dumps(doc, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _cipher_cmd(args, decrypt: bool) -> int:
    img = read_image(args.input)
    if args.sums is None:
        if decrypt:
            raise CLIError("decrypt needs --sums (the plain-image sums are not recoverable from the cipher)")
        if img.ndim != 3:
            raise CLIError("--faithful needs an RGB (P6) image")
        sums = channel_sums(img)
        print(json.dumps({"sums": list(sums)}))
    else:
        sums = args.sums
    m, n = img.shape[:2]
    if m * n < 2:
        raise CLIError("image must have at least two pixels")
    ks = generate_keystream(KeyMaterial(args.b, sums), m * n)
    write_image(args.output, apply_keystream(img, ks, decrypt=decrypt))
    return 0


def cmd_encrypt(args) -> int:
    return _cipher_cmd(args, decrypt=False)


def cmd_decrypt(args) -> int:
    return _cipher_cmd(args, decrypt=True)


def _open_oracle(args):
    if args.oracle == "local":
        if args.b is None or args.sums is None or args.size is None:
            raise CLIError("a local oracle needs --b, --sums and --size")
        return LocalOracle(OracleConfig(KeyMaterial(args.b, args.sums), args.size, args.mode))
    return RemoteOracle(args.oracle)


def cmd_attack(args) -> int:
    oracle = _open_oracle(args)
    try:
        eq, report = attack.run_attack(oracle, packing=args.packing, all_planes=args.all_planes,
                                       verify=args.verify)
    except attack.NonBijectiveRecovery as exc:
        raise CLIError(f"{exc}; the oracle does not reuse one keystream across queries, "
                       "so the chosen-plaintext premise fails") from exc
    finally:
        if isinstance(oracle, RemoteOracle):
            oracle.close()
    doc = report.to_dict()
    if args.save_eqkey:
        eq.save(args.save_eqkey)
        doc["eqkey"] = str(args.save_eqkey)
    if args.decrypt:
        cipher = read_image(args.decrypt)
        plain = attack.recover_plaintext(cipher, eq)
        out = args.out or str(Path(args.decrypt).with_suffix(".recovered.ppm"))
        write_image(out, plain)
        doc["recovered"] = out
    _write_json(args.report, doc)
    if args.figure:
        from . import plotting

        plotting.plot_query_counts(doc, args.figure)
    return 0


def cmd_recover(args) -> int:
    eq = attack.EquivalentKey.load(args.eqkey)
    cipher = read_image(args.input)
    plain = attack.recover_plaintext(cipher, eq)
    write_image(args.output, plain)
    if args.figure:
        from . import plotting

        reference = read_image(args.reference) if args.reference else plain
        plotting.plot_attack_panels(reference, cipher, plain, args.figure)
    return 0


def cmd_graph(args) -> int:
    cfg = lclm.QuantizedMapConfig(args.n, args.b, args.quantizer)
    g = lclm.build_functional_graph(cfg)
    stats = lclm.graph_stats(g)
    if args.dot:
        Path(args.dot).write_text(lclm.graph_to_dot(g))
    if args.json:
        Path(args.json).write_text(lclm.graph_to_json(g, stats) + "\n")
    doc = {"n": args.n, "b": str(cfg.b), "quantizer": args.quantizer, "nodes": g.size ** 2, **stats.to_dict()}
    if len(doc["component_sizes"]) > 32:
        doc["component_sizes"] = doc["component_sizes"][:32]
    print(json.dumps(doc, indent=2))
    if args.figure:
        from . import plotting

        plotting.plot_functional_graph(g, stats, args.figure)
    return 0


def cmd_keyspace(args) -> int:
    _write_json(args.report, analysis.keyspace_report(args.precision, args.m, args.n))
    return 0


def cmd_corpus(args) -> int:
    images, names = analysis.load_corpus(args.directory)
    doc = analysis.corpus_means(images, args.bin_width, names)
    _write_json(args.report, doc)
    if args.figure:
        from . import plotting

        plotting.plot_corpus_histogram(doc, args.figure)
    return 0


def cmd_serve(args) -> int:
    serve(args.endpoint, OracleConfig(KeyMaterial(args.b, args.sums), args.size, args.mode))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iealm", description="Chaotic image cipher and its chosen-plaintext break")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (("encrypt", cmd_encrypt, "encrypt a PPM/PGM/raw image"),
                            ("decrypt", cmd_decrypt, "decrypt with the true key")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("input")
        sp.add_argument("output")
        sp.add_argument("--b", type=_b_value, required=True, help="control parameter in [1.69, 2)")
        grp = sp.add_mutually_exclusive_group(required=(name == "decrypt"))
        grp.add_argument("--sums", type=_sums, help="frozen channel sums R,G,B")
        if name == "encrypt":
            grp.add_argument("--faithful", action="store_true", help="derive the sums from the image (default)")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("attack", help="run the chosen-plaintext attack against an oracle")
    sp.add_argument("--oracle", default="local", help="'local' or host:port of a running oracle")
    sp.add_argument("--b", type=_b_value)
    sp.add_argument("--sums", type=_sums)
    sp.add_argument("--size", type=_size, help="MxN")
    sp.add_argument("--mode", choices=("frozen", "faithful"), default="frozen", help="local oracle mode")
    sp.add_argument("--packing", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--all-planes", action="store_true",
                    help="recover bit plane 1 separately instead of assuming it matches plane 0")
    sp.add_argument("--verify", type=int, default=0, metavar="N",
                    help="spend N extra queries checking the recovered key")
    sp.add_argument("--report", help="write the attack report JSON here")
    sp.add_argument("--save-eqkey", help="write the recovered equivalent key here")
    sp.add_argument("--decrypt", help="cipher-image to decrypt with the recovered key")
    sp.add_argument("--out", help="where to write the recovered plain-image")
    sp.add_argument("--figure", help="bar chart of queries per stage (PNG/PDF/SVG)")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("recover", help="decrypt with a saved equivalent key, no oracle needed")
    sp.add_argument("eqkey")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--reference", help="original plain-image for the comparison figure")
    sp.add_argument("--figure", help="plain / cipher / recovered panels")
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("graph", help="functional graph of the quantized z-recurrence")
    sp.add_argument("--n", type=int, default=3, help="fractional bits (1..16)")
    sp.add_argument("--b", type=_fraction, default=Fraction(511, 256))
    sp.add_argument("--quantizer", choices=lclm.QUANTIZERS, default="floor")
    sp.add_argument("--dot")
    sp.add_argument("--json")
    sp.add_argument("--figure")
    sp.set_defaults(func=cmd_graph)

    sp = sub.add_parser("keyspace", help="key-count and key-space estimates")
    sp.add_argument("precision", type=int, help="arithmetic precision L in bits")
    sp.add_argument("m", type=int)
    sp.add_argument("n", type=int)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_keyspace)

    sp = sub.add_parser("corpus", help="per-channel mean statistics of a directory of images")
    sp.add_argument("directory")
    sp.add_argument("--bin-width", type=float, default=8.0)
    sp.add_argument("--report")
    sp.add_argument("--figure")
    sp.set_defaults(func=cmd_corpus)

    sp = sub.add_parser("serve", help="serve a chosen-plaintext oracle over TCP")
    sp.add_argument("--endpoint", default="127.0.0.1:7878")
    sp.add_argument("--b", type=_b_value, required=True)
    sp.add_argument("--sums", type=_sums, required=True)
    sp.add_argument("--size", type=_size, required=True)
    sp.add_argument("--mode", choices=("frozen", "faithful"), default="frozen")
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CLIError, ImageFormatError, OracleError, analysis.EmptyCorpus,
            attack.CodebookInconsistent, attack.RecoveryMismatch, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
