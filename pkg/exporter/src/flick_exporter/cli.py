"""Standalone exporter CLI: JSONL corpus in, FLKE embeddings (+ labels) out."""

from __future__ import annotations

import argparse
import logging
import sys

from .encode import DEFAULT_MODEL, HASH_DIM_DEFAULT
from .errors import CorpusDataError, CorpusFormatError, EncoderLoadError, ExportError
from .export import ExportSpec, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flick-export",
        description="Encode a JSONL text corpus ({'id','text',optional 'label'}) "
        "into an FLKE embedding file plus a JSONL label file.",
    )
    parser.add_argument("--input", required=True, help="corpus JSONL path")
    parser.add_argument("--out-embeddings", required=True, help="FLKE output path")
    parser.add_argument("--out-labels", help="labels JSONL output path")
    parser.add_argument(
        "--backend", choices=["sentence-transformers", "hash"],
        default="sentence-transformers",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="sentence-transformers model name")
    parser.add_argument("--dim", type=int, default=HASH_DIM_DEFAULT,
                        help="embedding dimension for the hash backend")
    parser.add_argument("--lang", default="en",
                        help="language tag for stop words and stemming")
    parser.add_argument("--remove-punctuation", action="store_true")
    parser.add_argument("--remove-stopwords", action="store_true")
    parser.add_argument("--apply-stemming", action="store_true")
    parser.add_argument("--batch-size", type=int, default=256)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        input_path=args.input,
        embeddings_out=args.out_embeddings,
        labels_out=args.out_labels,
        backend=args.backend,
        model_name=args.model,
        hash_dim=args.dim,
        lang=args.lang,
        remove_punctuation=args.remove_punctuation,
        remove_stopwords=args.remove_stopwords,
        apply_stemming=args.apply_stemming,
        batch_size=args.batch_size,
    )
    try:
        report = export(spec)
    except EncoderLoadError as exc:
        logging.getLogger("flick_exporter").error("environment error: %s", exc)
        return 5
    except (CorpusFormatError, CorpusDataError) as exc:
        logging.getLogger("flick_exporter").error("%s", exc)
        return 3
    except ExportError as exc:
        logging.getLogger("flick_exporter").error("%s", exc)
        return 1
    except OSError as exc:
        logging.getLogger("flick_exporter").error("%s", exc)
        return 3
    logging.getLogger("flick_exporter").info(
        "wrote %d vectors (d=%d, %d labeled, %d fallback) to %s",
        report.count, report.dim, report.labeled_count,
        len(report.fallback_ids), args.out_embeddings,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
