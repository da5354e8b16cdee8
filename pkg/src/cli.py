"""
texseek command line

Exit status is 0 on success, 1 on a usage error and 2 on a data or protocol
error. Results go to stdout; diagnostics go to stderr.
"""
import argparse
import asyncio
import logging
import pathlib
import sys
from typing import Dict, List, Optional, Sequence

from dotenv import load_dotenv

from src.agents.broker import (
    ProviderEndpoint,
    dispatch_index,
    fetch_image,
    parse_endpoint,
    remote_query,
    resolve_timeout,
)
from src.agents.provider import serve_provider
from src.config import Settings, load_settings
from src.errors import EvaluationError, NoEmbeddedAttributesError, PayloadError, TexSeekError, UsageError
from src.imaging.gabor import FeatureVector, feature_vector, normalize_rotation
from src.imaging.image import histogram_delta, histogram_tsv, load_image, save_image
from src.imaging.stego import StegoPayload, baseline, embed_payload, encode_payload, psnr, read_payload
from src.log_config import configure_logging
from src.retrieval.corpus import MANIFEST_NAME, gen_corpus, load_manifest
from src.retrieval.evaluation import (
    evaluate_index,
    format_pr,
    format_sweep,
    mean_curve,
    mean_precision_at,
    psnr_sweep,
    separation_margin,
)
from src.retrieval.index import format_attributes, load_index, save_index
from src.retrieval.search import build_index, format_results, query_from_image, query_from_stego

logger = logging.getLogger(__name__)

DEFAULT_LISTEN = "127.0.0.1:7070"
SELF_TEST_MARGIN = 2.0


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that reports bad usage as UsageError instead of exiting"""

    def error(self, message: str):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _write_output(text: str, out: Optional[str]) -> None:
    if out:
        pathlib.Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _providers(values: Optional[List[str]]) -> List[ProviderEndpoint]:
    entries = [entry.strip() for value in values or [] for entry in value.split(",") if entry.strip()]
    if not entries:
        raise UsageError("at least one provider is required")
    return [parse_endpoint(entry) for entry in entries]


def _sizes(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"--sizes must be comma-separated integers, got {text!r}") from exc


def _settings(args) -> Settings:
    return load_settings(args.config).with_parity_dc(getattr(args, "parity_dc", None))


def _report(lines: Sequence[str]) -> None:
    for line in lines:
        print(line, file=sys.stderr)


def cmd_index(args) -> int:
    settings = _settings(args)
    result = build_index(
        args.corpus, settings, embed_attributes=args.embed, stego_dir=args.stego_dir, workers=args.workers
    )
    pathlib.Path(args.out).write_bytes(save_index(result.index))
    _report([f"indexed {len(result.index)} images into {args.out}"])
    if result.unembedded:
        _report([f"not embedded: {', '.join(result.unembedded)}"])
    return 0


def _query_features(args, settings: Settings) -> FeatureVector:
    img = load_image(args.image)
    if args.from_stego:
        try:
            return read_payload(
                img,
                feature_dims=settings.bank.dimensions,
                orientations=settings.bank.orientations,
                table=settings.quant_table,
                parity_dc=settings.parity_dc,
            ).features
        except PayloadError as exc:
            if not args.pixel_fallback:
                raise
            logger.warning("%s; computing features from pixels", exc)
    return normalize_rotation(feature_vector(img, settings.bank))


def cmd_query(args) -> int:
    settings = _settings(args)
    if args.providers:
        if settings.standardize:
            logger.warning("standardize is ignored for provider queries")
        features = _query_features(args, settings)
        outcome = asyncio.run(remote_query(_providers(args.providers), features, args.top, settings, args.timeout))
        _report(outcome.failures)
        sys.stdout.write(format_results(outcome.results))
        return 0

    if not args.index:
        raise UsageError("query needs --index or --providers")
    index = load_index(pathlib.Path(args.index).read_bytes())
    img = load_image(args.image)
    if args.from_stego:
        try:
            results = query_from_stego(img, index, args.top, settings)
        except NoEmbeddedAttributesError as exc:
            if not args.pixel_fallback:
                raise
            logger.warning("%s; computing features from pixels", exc)
            results = query_from_image(img, index, args.top, settings)
    else:
        results = query_from_image(img, index, args.top, settings)
    sys.stdout.write(format_results(results))
    return 0


def _attributes(tokens: Sequence[str]) -> Dict[str, str]:
    attributes = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise UsageError(f"--attrs entries must be key=value, got {token!r}")
        attributes[key] = value
    return attributes


def cmd_embed(args) -> int:
    settings = _settings(args)
    cover = load_image(args.cover)
    attributes = {"size": f"{cover.width}x{cover.height}"}
    attributes.update(_attributes(args.attrs or []))
    features = normalize_rotation(feature_vector(cover, settings.bank)).as_float32()
    payload = StegoPayload(features=features, attributes=attributes)
    stego = embed_payload(cover, payload, settings.quant_table, settings.parity_dc)
    save_image(stego, args.out)
    reference = baseline(cover, settings.quant_table)
    print(
        f"bits\t{encode_payload(payload).size}\n"
        f"psnr_baseline\t{psnr(reference, stego):.4f}\n"
        f"psnr_cover\t{psnr(cover, stego):.4f}"
    )
    return 0


def cmd_extract(args) -> int:
    settings = _settings(args)
    payload = read_payload(
        load_image(args.stego),
        feature_dims=settings.bank.dimensions,
        orientations=settings.bank.orientations,
        table=settings.quant_table,
        parity_dc=settings.parity_dc,
    )
    print(f"attributes\t{format_attributes(payload.attributes)}")
    print(f"dominant\t{payload.features.dominant_orientation}")
    print("features\t" + " ".join(format(float(value), ".9g") for value in payload.features.values))
    return 0


async def _serve(host: str, port: int, corpus: str, settings: Settings, label: Optional[str]) -> None:
    server = await serve_provider(host, port, corpus, settings, label)
    bound = server.sockets[0].getsockname()
    _report([f"serving {corpus} on {bound[0]}:{bound[1]}"])
    async with server:
        await server.serve_forever()


def cmd_serve(args) -> int:
    host, sep, port = args.listen.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--listen must be host:port, got {args.listen!r}")
    try:
        asyncio.run(_serve(host or "0.0.0.0", int(port), args.corpus, _settings(args), args.label))
    except KeyboardInterrupt:
        pass
    return 0


def cmd_dispatch(args) -> int:
    settings = _settings(args)
    result = asyncio.run(dispatch_index(_providers(args.providers), settings, args.timeout))
    pathlib.Path(args.out).write_bytes(save_index(result.index))
    _report(result.failures)
    summary = ", ".join(f"{label}={count}" for label, count in sorted(result.counts.items()))
    _report([f"merged {len(result.index)} records ({summary}) into {args.out}"])
    return 0


def cmd_fetch(args) -> int:
    img = asyncio.run(fetch_image(_providers(args.providers), args.id, _settings(args), args.timeout))
    save_image(img, args.out)
    return 0


def cmd_eval_pr(args) -> int:
    index = load_index(pathlib.Path(args.index).read_bytes())
    if args.at < 0:
        raise UsageError(f"--at must be >= 0, got {args.at}")
    curves = evaluate_index(index, load_manifest(args.manifest))
    precision = mean_precision_at(curves.values(), args.at) if args.at else None
    _write_output(format_pr(mean_curve(curves)), args.out)
    if precision is not None:
        _report([f"mean precision@{args.at}\t{precision:.6f}"])
    return 0


def cmd_eval_sweep(args) -> int:
    rows = psnr_sweep(load_image(args.cover), _sizes(args.sizes), args.seed, _settings(args))
    _write_output(format_sweep(rows), args.out)
    return 0


def cmd_eval_hist(args) -> int:
    cover, stego = load_image(args.cover), load_image(args.stego)
    _write_output(histogram_tsv(cover, stego), args.out)
    _report([f"histogram L1 delta\t{histogram_delta(cover, stego)}"])
    return 0


def cmd_gen_corpus(args) -> int:
    manifest = gen_corpus(args.out, args.classes, args.per_class, args.size, args.seed)
    _report([f"wrote {len(manifest)} images to {args.out}"])
    if args.self_test:
        index = build_index(args.out, _settings(args)).index
        margin = separation_margin(index, load_manifest(pathlib.Path(args.out) / MANIFEST_NAME))
        _report([f"class separation margin\t{margin:.3f}"])
        if margin < SELF_TEST_MARGIN:
            raise EvaluationError(f"class separation margin {margin:.3f} is below {SELF_TEST_MARGIN}")
    return 0


def _add_timeout(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--timeout", type=float, default=None, help="Seconds per provider connect/reply")


def build_parser() -> CommandParser:
    parser = CommandParser(prog="texseek", description="Texture retrieval with embedded attributes")
    parser.add_argument("--config", help="Config file (default: $TEXSEEK_CONFIG)")
    parser.add_argument("--log-level", choices=["error", "warning", "info", "debug"], help="Log level (default: $TEXSEEK_LOG)")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    index = commands.add_parser("index", help="Compute features for a corpus, optionally embedding them")
    index.add_argument("--corpus", required=True)
    index.add_argument("--out", required=True)
    index.add_argument("--embed", action="store_true", help="Write <name>.stego.pgm carrying each record")
    index.add_argument("--stego-dir", help="Where stego images go (default: next to the cover)")
    index.add_argument("--workers", type=int, default=None)
    index.add_argument("--parity-dc", action=argparse.BooleanOptionalAction, default=None)
    index.set_defaults(handler=cmd_index)

    query = commands.add_parser("query", help="Rank an index or providers against a query image")
    query.add_argument("--index")
    query.add_argument("--image", required=True)
    query.add_argument("--top", type=int, default=10)
    query.add_argument("--from-stego", action="store_true", help="Use the features embedded in the query image")
    query.add_argument(
        "--pixel-fallback", action="store_true", help="With --from-stego, use pixel features when nothing is embedded"
    )
    query.add_argument("--providers", action="append", help="[label=]host:port, comma-separated or repeated")
    query.add_argument("--parity-dc", action=argparse.BooleanOptionalAction, default=None)
    _add_timeout(query)
    query.set_defaults(handler=cmd_query)

    embed = commands.add_parser("embed", help="Hide a cover's features and attributes in it")
    embed.add_argument("--cover", required=True)
    embed.add_argument("--out", required=True)
    embed.add_argument("--attrs", nargs="+", metavar="KEY=VALUE", help="Attributes to embed alongside the features")
    embed.add_argument("--parity-dc", action=argparse.BooleanOptionalAction, default=None)
    embed.set_defaults(handler=cmd_embed)

    extract = commands.add_parser("extract", help="Read the payload embedded in a stego image")
    extract.add_argument("--stego", required=True)
    extract.add_argument("--parity-dc", action=argparse.BooleanOptionalAction, default=None)
    extract.set_defaults(handler=cmd_extract)

    serve = commands.add_parser("serve", help="Serve an archive to brokers")
    serve.add_argument("--corpus", required=True)
    serve.add_argument("--listen", default=DEFAULT_LISTEN)
    serve.add_argument("--label", help="Archive label (default: corpus directory name)")
    serve.set_defaults(handler=cmd_serve)

    dispatch = commands.add_parser("dispatch", help="Collect and merge provider indexes")
    dispatch.add_argument("--providers", action="append", required=True)
    dispatch.add_argument("--out", required=True)
    _add_timeout(dispatch)
    dispatch.set_defaults(handler=cmd_dispatch)

    fetch = commands.add_parser("fetch", help="Retrieve an image from its provider")
    fetch.add_argument("--providers", action="append", required=True)
    fetch.add_argument("--id", required=True, help="label/path as listed in a merged index")
    fetch.add_argument("--out", required=True)
    _add_timeout(fetch)
    fetch.set_defaults(handler=cmd_fetch)

    evaluate = commands.add_parser("eval", help="Evaluation harness")
    evals = evaluate.add_subparsers(dest="eval_command", required=True, metavar="what")

    pr = evals.add_parser("pr", help="Mean precision/recall per rank cutoff")
    pr.add_argument("--index", required=True)
    pr.add_argument("--manifest", required=True)
    pr.add_argument("--at", type=int, default=15, help="Also report mean precision at this k (0 to skip)")
    pr.add_argument("--out")
    pr.set_defaults(handler=cmd_eval_pr)

    sweep = evals.add_parser("sweep", help="PSNR against payload size")
    sweep.add_argument("--cover", required=True)
    sweep.add_argument("--sizes", default="1000,2000,5000,10000")
    sweep.add_argument("--seed", type=int, default=42)
    sweep.add_argument("--out")
    sweep.set_defaults(handler=cmd_eval_sweep)

    hist = evals.add_parser("hist", help="Cover and stego histograms")
    hist.add_argument("--cover", required=True)
    hist.add_argument("--stego", required=True)
    hist.add_argument("--out")
    hist.set_defaults(handler=cmd_eval_hist)

    corpus = commands.add_parser("gen-corpus", help="Write a labeled synthetic texture corpus")
    corpus.add_argument("--out", required=True)
    corpus.add_argument("--classes", type=int, default=4)
    corpus.add_argument("--per-class", type=int, default=16)
    corpus.add_argument("--size", type=int, default=256)
    corpus.add_argument("--seed", type=int, default=42)
    corpus.add_argument("--self-test", action="store_true", help="Check same-class vs cross-class separation")
    corpus.set_defaults(handler=cmd_gen_corpus)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments and run one command

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Process exit status
    """
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    configure_logging(args.log_level)
    try:
        if hasattr(args, "timeout"):
            args.timeout = resolve_timeout(args.timeout)
        return args.handler(args)
    except TexSeekError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
