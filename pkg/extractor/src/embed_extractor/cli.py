"""Command-line front end for reuse-mode extraction and keyword coding."""

from __future__ import annotations

import argparse
import csv
import sys

from .coder import keyword_treatment_coder
from .errors import ExtractorError
from .extract import extract
from .io import load_texts
from .job import ExtractionJob

DEFAULT_SYSTEM = "You are a text repeater."
DEFAULT_TEMPLATE = "Repeat the following text exactly: {text}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="embed-extract",
        description="Extract pooled hidden-state representations of texts.")
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract")
    ex.add_argument("inputs", help="JSON-lines file or directory of texts")
    ex.add_argument("--model-id", default="repeat-rnn")
    ex.add_argument("--mode", default="reuse", choices=("reuse", "generate"))
    ex.add_argument("--pooling", default="last_token",
                    choices=("last_token", "cls_token", "mean"))
    ex.add_argument("--system-prompt", default=DEFAULT_SYSTEM)
    ex.add_argument("--template", default=DEFAULT_TEMPLATE)
    ex.add_argument("--out-representations", default="representations.bin")
    ex.add_argument("--out-labels", default="labels.csv")
    ex.add_argument("--out-manifest", default="manifest.json")

    co = sub.add_parser("code-treatment")
    co.add_argument("inputs", help="JSON-lines file or directory of texts")
    co.add_argument("--keyword", action="append", required=True,
                    help="repeatable; any match codes the text as treated")
    co.add_argument("--out", default="treatment.csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        texts = load_texts(args.inputs)
        if args.command == "extract":
            job = ExtractionJob(
                model_id=args.model_id, mode=args.mode,
                system_prompt=args.system_prompt,
                user_prompt_template=args.template,
                inputs=texts, pooling=args.pooling,
                out_representations=args.out_representations,
                out_labels=args.out_labels, out_manifest=args.out_manifest,
            )
            result = extract(job)
            for obs_id, reason in result.omitted:
                print(f"omitted {obs_id}: {reason}", file=sys.stderr)
            print(f"wrote {result.n_written} rows to "
                  f"{result.representations_path}")
        else:
            t = keyword_treatment_coder(texts, args.keyword)
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["index", "t"])
                for i, v in enumerate(t):
                    w.writerow([i, int(v)])
            print(f"coded {len(t)} texts, {int(t.sum())} treated")
    except ExtractorError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
