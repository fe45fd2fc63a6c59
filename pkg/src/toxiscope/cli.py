"""Operational CLI: the same platform handlers, headless.

Examples:
    toxiscope serve --config config/service.yaml
    toxiscope ingest --file chats.csv --name chats
    toxiscope classify --dataset builtin-edos --classifier stub-a --schema sexism-binary
    toxiscope eval --dataset builtin-edos --classifier vote-ensemble --schema sexism-binary
    toxiscope ppl-gain --dataset ds-x --conversation c1 --provider local --output "yes"
    toxiscope summarize --dataset ds-x --conversation c1 --provider local
    toxiscope persona --dataset ds-x --speaker alice --provider local
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from .config import default_config, load_config
from .service import Platform


def _platform(args) -> Platform:
    config = load_config(args.config) if args.config else default_config(args.db)
    return Platform(config)


def _print(payload) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False))


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(_platform(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_ingest(args) -> int:
    platform = _platform(args)
    with open(args.file, "rb") as fh:
        raw = fh.read()
    fmt = args.format or ("jsonl" if args.file.endswith((".jsonl", ".json")) else "csv")
    descriptor, report = platform.store.ingest_dataset(
        args.name or args.file, raw, fmt
    )
    _print({"dataset": descriptor.to_json(), "report": report.to_json()})
    return 0


def cmd_classify(args) -> int:
    platform = _platform(args)
    payload = platform.classify_dataset(args.dataset, args.classifier, args.schema)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, ensure_ascii=False)
        print(f"wrote {args.out}")
    else:
        _print(payload)
    return 0


def cmd_eval(args) -> int:
    platform = _platform(args)
    payload = platform.classify_dataset(args.dataset, args.classifier, args.schema)
    report = payload.get("report")
    if report is None:
        print("dataset has no usable gold labels for this schema", file=sys.stderr)
        return 1
    _print(report)
    return 0


def cmd_ppl_gain(args) -> int:
    platform = _platform(args)
    payload = platform.run_ppl_gain(
        args.dataset, args.conversation, args.provider, args.granularity, args.output
    )
    _print(payload)
    return 0


def cmd_summarize(args) -> int:
    platform = _platform(args)
    handle = platform.submit_job(
        "summarization",
        {
            "dataset_id": args.dataset,
            "conversation_key": args.conversation,
            "provider_id": args.provider,
        },
    )
    while True:
        snapshot = platform.jobs.poll(handle.job_id)
        print(f"progress {snapshot.progress:.2f} ({snapshot.state})", file=sys.stderr)
        if snapshot.state in ("done", "failed", "cancelled"):
            break
        time.sleep(0.2)
    if snapshot.state != "done":
        print(f"job {snapshot.state}: {snapshot.error}", file=sys.stderr)
        return 1
    _print(platform.jobs.result(handle.job_id))
    return 0


def cmd_persona(args) -> int:
    platform = _platform(args)
    summaries = None
    if args.summary_file:
        with open(args.summary_file, encoding="utf-8") as fh:
            summaries = [block for block in fh.read().split("\n\n") if block.strip()]
    _print(platform.run_persona(args.dataset, args.speaker, args.provider, summaries))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toxiscope")
    parser.add_argument("--config", default="", help="service config YAML")
    parser.add_argument("--db", default="data/toxiscope.db", help="db path when no config given")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ingest", help="ingest a CSV/JSONL dataset")
    p.add_argument("--file", required=True)
    p.add_argument("--name", default="")
    p.add_argument("--format", default="", choices=["", "csv", "jsonl"])
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("classify", help="classify a dataset's messages")
    p.add_argument("--dataset", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="classify and print the gold-label report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--schema", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ppl-gain", help="leave-one-out perplexity attribution")
    p.add_argument("--dataset", required=True)
    p.add_argument("--conversation", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--granularity", default="message", choices=["message", "sentence"])
    p.add_argument("--output", default=None, help="output text to attribute")
    p.set_defaults(func=cmd_ppl_gain)

    p = sub.add_parser("summarize", help="toxic-aware per-speaker summaries")
    p.add_argument("--dataset", required=True)
    p.add_argument("--conversation", required=True)
    p.add_argument("--provider", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("persona", help="Big-Five profile from stored summaries")
    p.add_argument("--dataset", required=True)
    p.add_argument("--speaker", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--summary-file", default="")
    p.set_defaults(func=cmd_persona)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
