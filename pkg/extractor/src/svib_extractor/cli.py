"""CLI for the extractor: training features, inference features, logprobs."""

import argparse
import json
import sys

from .capture import Extractor, ExtractorConfig, read_corpus


def _add_backbone_flags(p):
    p.add_argument("--model", default="tiny:gpt2",
                   help="hub id, or tiny:gpt2 for a local seeded toy backbone")
    p.add_argument("--device", default="cpu")
    p.add_argument("--mode", choices=("window-isolated", "full-context-sliced"),
                   default="window-isolated")
    p.add_argument("--window-len", type=int, default=7)
    p.add_argument("--dim", type=int, default=None,
                   help="feature dimension (default window_len^2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tiny-layers", type=int, default=4)
    p.add_argument("--tiny-heads", type=int, default=4)
    p.add_argument("--tiny-embd", type=int, default=32)


def _config(args) -> ExtractorConfig:
    return ExtractorConfig(
        model=args.model, device=args.device, mode=args.mode,
        window_len=args.window_len, feature_dim=args.dim, seed=args.seed,
        mixed_fraction=getattr(args, "mixed_fraction", 0.5),
        max_new_tokens=getattr(args, "max_new_tokens", 8),
        tiny_layers=args.tiny_layers, tiny_heads=args.tiny_heads,
        tiny_embd=args.tiny_embd,
    )


def cmd_train_features(args) -> int:
    extractor = Extractor(_config(args))
    manifest, report = extractor.extract_training_features(
        read_corpus(args.corpus), args.out)
    print(manifest)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_infer_features(args) -> int:
    extractor = Extractor(_config(args))
    with open(args.context, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    manifest = extractor.extract_inference_features(tokens, args.out)
    print(manifest)
    return 0


def cmd_logprobs(args) -> int:
    extractor = Extractor(_config(args))
    with open(args.prompts, "r", encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    results = extractor.extract_answer_logprobs(records)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in results:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    failures = sum(1 for r in results if "error" in r)
    print(f"{len(results) - failures}/{len(results)} records extracted -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svib-extract",
        description="Extract attention features and token log-likelihoods "
                    "from a causal LM into the swinvib formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-features",
                       help="labeled per-layer SVF1 files from a corpus")
    _add_backbone_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mixed-fraction", type=float, default=0.5)
    p.set_defaults(func=cmd_train_features)

    p = sub.add_parser("infer-features",
                       help="per-layer SVQ1 files for every window of one context")
    _add_backbone_flags(p)
    p.add_argument("--context", required=True, help="plain-text context file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer_features)

    p = sub.add_parser("logprobs",
                       help="answer token log-likelihoods (greedy or forced)")
    _add_backbone_flags(p)
    p.add_argument("--prompts", required=True,
                   help="JSON lines: {id, prompt, answer?}")
    p.add_argument("--out", required=True)
    p.add_argument("--max-new-tokens", type=int, default=8)
    p.set_defaults(func=cmd_logprobs)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
