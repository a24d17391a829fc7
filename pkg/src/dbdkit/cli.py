"""Command-line pipeline: decode, evaluate, analyze-positions, selfcheck.

Exit codes: 0 success, 1 usage error, 2 data validation failure,
3 model or bridge failure.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import ingest, report
from .bridge_client import BridgeModel, bridge_command_from_env
from .core import SearchConfig, SelectionConfig, merge_manifests, validate_manifest
from .errors import DBDError, ModelError
from .metrics import DEFAULT_KS, evaluate
from .models import GenerativeModel, ToyModel, load_toy_spec
from .presets import DIRECT_SUFFIX, PRESETS, SEARCH_PROMPT, SUMMARY_PROMPT
from .search import search, select_facts, summarize
from .selfcheck import run_selfcheck

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MODEL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; our contract reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def parse_alpha_schedule(text: str) -> tuple[tuple[int | None, float], ...]:
    """Parse ``V1:T1,V2`` into ((T1, V1), (None, V2)); a bare ``V`` is constant."""
    pairs: list[tuple[int | None, float]] = []
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError(f"empty alpha schedule {text!r}")
    for i, part in enumerate(parts):
        if ":" in part:
            value, threshold = part.split(":", 1)
            pairs.append((int(threshold), float(value)))
        else:
            if i != len(parts) - 1:
                raise ValueError(f"only the final alpha segment may omit a threshold: {text!r}")
            pairs.append((None, float(part)))
    if pairs[-1][0] is not None:
        raise ValueError(f"alpha schedule must end with an unbounded segment: {text!r}")
    return tuple(pairs)


def _write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _open_model(args) -> GenerativeModel:
    if args.model == "bridge":
        command = shlex.split(args.bridge_cmd) if args.bridge_cmd else bridge_command_from_env()
        return BridgeModel(command=command, model_id=args.model_id)
    return ToyModel(load_toy_spec(args.model))


def cmd_decode(args) -> int:
    preset = PRESETS[args.preset]
    base = preset.search
    schedule = args.alpha if args.alpha else base.alpha_schedule
    search_cfg = SearchConfig(
        beams=args.beams if args.beams is not None else base.beams,
        top_k=args.topk if args.topk is not None else base.top_k,
        alpha_schedule=schedule,
        max_steps=args.max_steps if args.max_steps is not None else base.max_steps,
        seed=args.seed,
    )
    selection_cfg = SelectionConfig(
        alpha=args.select_alpha if args.select_alpha is not None else preset.selection.alpha,
        max_facts=args.select_n if args.select_n is not None else preset.selection.max_facts,
    )
    direct = args.direct_suffix or preset.direct_suffix
    prompt = args.prompt if args.prompt is not None else SEARCH_PROMPT
    summary_prompt = args.summary_prompt if args.summary_prompt is not None else SUMMARY_PROMPT
    if direct:
        prompt = f"{prompt} {DIRECT_SUFFIX}"
        summary_prompt = f"{summary_prompt} {DIRECT_SUFFIX}"

    config_echo = {
        "command": "decode",
        "model": args.model,
        "model_id": args.model_id,
        "image": args.image,
        "preset": preset.name,
        "search": search_cfg.to_dict(),
        "selection": selection_cfg.to_dict(),
        "prompt": prompt,
        "summary_prompt": summary_prompt,
        "max_summary_tokens": args.max_summary_tokens,
    }
    print(json.dumps(config_echo, indent=2, sort_keys=True))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with _open_model(args) as model:
        facts = search(model, search_cfg, prompt=prompt, image=args.image)
        _write_json(facts.to_dict(), out / "facts.json")
        if len(facts):
            selected = select_facts(facts, selection_cfg)
            summary = summarize(
                model, selected, template=summary_prompt,
                image=args.image, max_tokens=args.max_summary_tokens,
            )
            caption = summary.text
        else:
            print("warning: search completed no facts; caption left empty", file=sys.stderr)
            selected = facts
            caption = ""
        _write_json(selected.to_dict(), out / "selected.json")
        (out / "caption.txt").write_text(caption + "\n", encoding="utf-8")
        _write_json(config_echo, out / "config.json")
    print(f"decode: {len(facts)} facts, {len(selected)} selected -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    image_set = ingest.read_embeddings(args.image_emb)
    caption_set = ingest.read_embeddings(args.caption_emb)
    image_manifest = ingest.read_manifest(
        args.image_manifest if args.image_manifest else ingest.sidecar_path(args.image_emb)
    )
    caption_manifest = ingest.read_manifest(
        args.caption_manifest if args.caption_manifest else ingest.sidecar_path(args.caption_emb)
    )
    manifest = merge_manifests(image_manifest, caption_manifest)
    violations = validate_manifest(
        manifest,
        embedding_counts={"image": len(image_set), "caption": len(caption_set)},
    )
    if violations:
        for v in violations:
            print(f"manifest violation: {v}", file=sys.stderr)
        return EXIT_DATA

    ks = args.k if args.k else list(DEFAULT_KS)
    result = evaluate(image_set, caption_set, manifest, ks=ks)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_metrics_csv(result, out / "metrics.csv")
    report.write_partitions_csv(result, out / "partitions.csv")
    _write_json(result.to_dict(), out / "report.json")
    report.render_metrics_figure(result, out / "metrics.png")
    print(report.format_metrics_table(result))
    print(f"evaluate: wrote metrics.csv, partitions.csv, report.json, metrics.png -> {out}")
    return EXIT_OK


def cmd_analyze_positions(args) -> int:
    captions = ingest.load_captions(args.captions)
    annotations = ingest.load_annotations(args.annotations)
    profile = ingest.position_size_profile(captions, annotations, bins=args.bins)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_profile_csv(profile, out / "profile.csv")
    report.render_profile_figure(profile, out / "profile.png")
    print(report.format_profile_table(profile))
    print(f"analyze-positions: wrote profile.csv, profile.png -> {out}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    results = run_selfcheck(spec_path=args.model, seed=args.seed)
    for r in results:
        print(r)
    return EXIT_OK if all(r.passed for r in results) else EXIT_DATA


def build_parser() -> _Parser:
    parser = _Parser(prog="dbdkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="run the differentiated beam decode pipeline")
    p.add_argument("--model", required=True,
                   help="path to a toy model spec JSON, or 'bridge' for an external endpoint")
    p.add_argument("--bridge-cmd", default=None,
                   help="bridge command line (falls back to $DBD_BRIDGE_CMD)")
    p.add_argument("--model-id", default="default", help="model id forwarded to the bridge")
    p.add_argument("--image", default=None, help="image path forwarded to the model")
    p.add_argument("--preset", choices=sorted(PRESETS), default="standard")
    p.add_argument("--beams", type=int, default=None, help="parallel candidate count")
    p.add_argument("--topk", type=int, default=None, help="expansion width per candidate")
    p.add_argument("--alpha", type=parse_alpha_schedule, default=None,
                   help="differential weight schedule, e.g. '10:3,5' or a constant '4'")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--select-alpha", type=float, default=None, help="selection differential weight")
    p.add_argument("--select-n", type=int, default=None, help="number of facts to keep")
    p.add_argument("--prompt", default=None)
    p.add_argument("--summary-prompt", default=None)
    p.add_argument("--direct-suffix", action="store_true",
                   help="append the terse-answer suffix to both prompts")
    p.add_argument("--max-summary-tokens", type=int, default=256)
    p.add_argument("--out", default="decode-out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="compute the CLIP metric set from embedding files")
    p.add_argument("--image-emb", required=True)
    p.add_argument("--caption-emb", required=True)
    p.add_argument("--image-manifest", default=None,
                   help="defaults to <image-emb>.manifest.json")
    p.add_argument("--caption-manifest", default=None,
                   help="defaults to <caption-emb>.manifest.json")
    p.add_argument("--k", type=int, action="append", default=None,
                   help="metric parameter k; repeatable (default 3, 5, 10)")
    p.add_argument("--out", default="eval-out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze-positions",
                       help="profile object mention position vs object size")
    p.add_argument("--captions", required=True, help="JSON list or one caption per line")
    p.add_argument("--annotations", required=True, help="region annotation JSON")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", default="analysis-out")
    p.set_defaults(func=cmd_analyze_positions)

    p = sub.add_parser("selfcheck", help="run the built-in oracle suite")
    p.add_argument("--model", default=None, help="optionally validate a toy spec file")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DBDError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
