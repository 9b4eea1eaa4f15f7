"""CLI entry point: export a corpus through a transformer into JERX-EMB."""

import argparse
import sys

from .export import AlignmentError, ModelLoadError, export


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jerx-embexport",
        description="Export transformer embeddings/attention to JERX-EMB v1",
    )
    parser.add_argument("--corpus", required=True,
                        help="canonical JSON corpus file")
    parser.add_argument("--model", required=True,
                        help="hub name or local model directory")
    parser.add_argument("--pool", default="first-subtoken",
                        choices=["first-subtoken", "mean-subtoken"])
    parser.add_argument("--attention", action="store_true",
                        help="include per-head attention tensors")
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        stats = export(
            args.corpus, args.model, args.out,
            pool=args.pool, include_attention=args.attention,
        )
    except ModelLoadError as e:
        print(f"model error: {e}", file=sys.stderr)
        return 1
    except (AlignmentError, OSError, ValueError) as e:
        print(f"export error: {e}", file=sys.stderr)
        return 2
    print(
        f"wrote {args.out}: {stats['sentences']} sentences, "
        f"{stats['tokens']} tokens, hidden {stats['hidden_size']}"
        + (f", attention {stats['layer_count']}x{stats['head_count']}"
           if stats["layer_count"] else "")
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
