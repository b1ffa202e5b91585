"""Command-line interface: every capability behind one binary, JSONL in/out.

Exit codes: 0 success, 1 domain error (validation failure, unparseable input),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

from . import __version__
from .dataset import DatasetError, load_jsonl, time_split, write_jsonl
from .grammar import ProcedureSyntaxError, parse_procedure, render_procedure
from .jsonio import canonical_json_bytes
from .judge import (
    CORRUPTION_MODES,
    NotEnoughActionsError,
    UnparseableResponseError,
    build_judge_prompt,
    corrupt,
    judge_many,
    parse_judge_scores,
)
from .metrics import evaluate_corpus
from .retrieval import FingerprintIndex, nearest
from .rewards import AGG_MEAN, AGG_SUM, MODE_ALGORITHM1, MODE_MAIN_TEXT, RewardConfig, batch_reward
from .schema import load_schema_config
from .validation import validate_text

THINK_WRAP = "<think></think>"


class CliError(Exception):
    pass


def _emit(args, payload: bytes) -> None:
    out = getattr(args, "out", None)
    if out:
        Path(out).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()


def _load_jsonl_texts(path: str, fields: tuple[str, ...]) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"{path}:{line_no}: bad JSON: {exc}")
            if not isinstance(obj, dict):
                raise CliError(f"{path}:{line_no}: record is not an object")
            for field in fields:
                if field in obj:
                    rows.append({"id": obj.get("id", str(line_no)), "text": obj[field], "field": field, "obj": obj})
                    break
            else:
                raise CliError(f"{path}:{line_no}: none of the fields {fields} present")
    if not rows:
        raise CliError(f"{path}: no records")
    return rows


def _schema_config(args):
    return load_schema_config(args.schema) if args.schema else load_schema_config()


def _reward_config(args, schema_config) -> RewardConfig:
    overrides = {}
    if getattr(args, "theta", None) is not None:
        overrides["theta"] = args.theta
    if getattr(args, "exceeding_mode", None) is not None:
        overrides["exceeding_mode"] = args.exceeding_mode
    if getattr(args, "sequence_aggregation", None) is not None:
        overrides["sequence_aggregation"] = args.sequence_aggregation
    return RewardConfig.from_schema_config(schema_config, **overrides)


# --- subcommands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    config = _schema_config(args)
    failed = False
    chunks = []
    for path in args.paths:
        report = validate_text(Path(path).read_text(encoding="utf-8"), config)
        if not report.ok:
            failed = True
        doc = report.to_json_dict()
        if len(args.paths) > 1:
            doc = {"path": path, **doc}
        if args.output == "table":
            lines = [f"{path}: {'ok' if report.ok else 'FAIL'}"]
            lines.extend(f"  [{d.severity}] {d.code} at action {d.ordinal}: {d.message}" for d in report.diagnostics)
            chunks.append(("\n".join(lines) + "\n").encode())
        else:
            chunks.append(canonical_json_bytes(doc))
    _emit(args, b"".join(chunks))
    return 1 if failed else 0


def cmd_reward(args) -> int:
    config = _schema_config(args)
    reward_cfg = _reward_config(args, config)
    ref_rows = _load_jsonl_texts(args.refs, ("procedure_text", "reference", "text"))
    pred_rows = _load_jsonl_texts(args.preds, ("prediction_raw", "procedure_text", "prediction", "text"))
    if len(ref_rows) != len(pred_rows):
        raise CliError(f"{len(ref_rows)} references vs {len(pred_rows)} predictions")
    try:
        refs = [parse_procedure(row["text"], config) for row in ref_rows]
    except ProcedureSyntaxError as exc:
        raise CliError(f"reference does not parse: {exc}")
    preds = []
    for row in pred_rows:
        text = row["text"]
        # bare procedure text (no raw generation available): treat it as the
        # answer block of an empty-reasoning response
        if row["field"] != "prediction_raw":
            text = THINK_WRAP + text
        preds.append(text)
    result = batch_reward(refs, preds, config, reward_cfg)
    if args.output == "table":
        lines = ["sample  sequence_reward  steps"]
        for i, (seq, steps) in enumerate(zip(result.sequence_rewards, result.per_sample)):
            lines.append(f"{i:>6}  {seq:>15.4f}  {len(steps)}")
        _emit(args, ("\n".join(lines) + "\n").encode())
    else:
        _emit(args, canonical_json_bytes(result.to_json_dict()))
    return 0


def cmd_metrics(args) -> int:
    config = _schema_config(args)
    ref_rows = _load_jsonl_texts(args.refs, ("procedure_text", "reference", "text"))
    pred_rows = _load_jsonl_texts(args.preds, ("prediction", "procedure_text", "text"))
    if len(ref_rows) != len(pred_rows):
        raise CliError(f"{len(ref_rows)} references vs {len(pred_rows)} predictions")
    pairs = [(r["text"], p["text"]) for r, p in zip(ref_rows, pred_rows)]
    report = evaluate_corpus(pairs, config=config)
    if args.output == "table":
        _emit(args, (report.to_table() + "\n").encode())
    else:
        _emit(args, canonical_json_bytes(report.to_json_dict()))
    return 0


def cmd_split(args) -> int:
    ds = load_jsonl(args.input, strict=args.strict)
    train, test = time_split(ds, args.test_frac)
    write_jsonl(train, args.train)
    write_jsonl(test, args.test)
    _emit(args, canonical_json_bytes({"train": len(train), "test": len(test), "sidecar": len(ds.sidecar)}))
    return 0


def cmd_retrieve(args) -> int:
    if args.build_from:
        ds = load_jsonl(args.build_from)
        index = FingerprintIndex(width=args.width)
        for i, record in enumerate(ds.records):
            index.add(i, record.reaction)
        index.save(args.index)
    else:
        index = FingerprintIndex.load(args.index)
    if args.query is None:
        _emit(args, canonical_json_bytes({"indexed": len(index.entries), "width": index.width}))
        return 0
    query = Path(args.query).read_text(encoding="utf-8").strip()
    hits = nearest(query, index, args.k)
    _emit(args, canonical_json_bytes({"results": [{"id": i, "similarity": s} for i, s in hits]}))
    return 0


def cmd_skeleton(args) -> int:
    from .skeleton import build_skeleton

    config = _schema_config(args)
    ds = load_jsonl(args.input)
    chunks = []
    for record in ds.records:
        procedure = parse_procedure(record.procedure_text, config)
        skel = build_skeleton(
            record.reaction,
            procedure,
            annotations=record.roles,
            reaction_name=record.extra.get("reaction_name"),
        )
        chunks.append(canonical_json_bytes({"id": record.id, **skel.to_json_dict()}))
    _emit(args, b"".join(chunks))
    return 0


def cmd_corrupt(args) -> int:
    config = _schema_config(args)
    ds = load_jsonl(args.input)
    chunks = []
    failures = 0
    for record in ds.records:
        procedure = parse_procedure(record.procedure_text, config)
        try:
            corrupted = corrupt(procedure, args.mode, args.seed)
        except NotEnoughActionsError as exc:
            failures += 1
            chunks.append(canonical_json_bytes({"id": record.id, "error": str(exc)}))
            continue
        doc = record.to_json_dict()
        doc["procedure_text"] = render_procedure(corrupted, config)
        doc["corruption"] = args.mode
        chunks.append(canonical_json_bytes(doc))
    _emit(args, b"".join(chunks))
    return 1 if failures else 0


def cmd_judge(args) -> int:
    config = _schema_config(args)
    ref_rows = _load_jsonl_texts(args.refs, ("procedure_text", "reference", "text"))
    pred_rows = _load_jsonl_texts(args.preds, ("procedure_text", "prediction", "text"))
    if len(ref_rows) != len(pred_rows):
        raise CliError(f"{len(ref_rows)} references vs {len(pred_rows)} predictions")
    prompts = []
    for ref_row, pred_row in zip(ref_rows, pred_rows):
        ref = parse_procedure(ref_row["text"], config)
        pred = parse_procedure(pred_row["text"], config)
        prompts.append(build_judge_prompt(ref, pred))
    api_key = os.environ.get(args.api_key_env) if args.api_key_env else None
    responses = judge_many(
        args.endpoint,
        args.model,
        prompts,
        timeout=args.timeout,
        api_key=api_key,
        max_in_flight=args.max_in_flight,
    )
    raw_dir = Path(args.raw_dir) if args.raw_dir else None
    if raw_dir:
        raw_dir.mkdir(parents=True, exist_ok=True)
    chunks = []
    failures = 0
    for i, (row, response) in enumerate(zip(ref_rows, responses)):
        raw_path = None
        if raw_dir:
            safe_id = re.sub(r"[^\w.-]", "_", str(row["id"])) or str(i)
            raw_path = str(raw_dir / f"{safe_id}.txt")
            Path(raw_path).write_text(response, encoding="utf-8")
        try:
            scores = parse_judge_scores(response)
        except UnparseableResponseError as exc:
            failures += 1
            chunks.append(canonical_json_bytes({"id": row["id"], "error": str(exc), "raw_response_path": raw_path}))
            continue
        doc = scores.to_json_dict()
        chunks.append(
            canonical_json_bytes(
                {"id": row["id"], "scores": {k: doc[k] for k in ("reaction", "workup", "conditions", "safety")},
                 "total": doc["total"], "raw_response_path": raw_path}
            )
        )
    _emit(args, b"".join(chunks))
    return 1 if failures else 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    config = _schema_config(args)
    cfg = ServiceConfig(
        host=args.host,
        port=args.port,
        max_body=args.max_body_mib << 20,
        workers=args.workers,
        batch_cap=args.batch_cap,
        schema_config=config,
        reward_config=_reward_config(args, config),
    )
    serve(cfg)
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procrew", description=__doc__)
    parser.add_argument("--version", action="version", version=f"procrew {__version__}")
    parser.add_argument("--schema", default=os.environ.get("PROCREW_SCHEMA"), help="schema config JSON override")
    parser.add_argument("--output", choices=["json", "table"], default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate procedure files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reward", help="score predictions against references")
    p.add_argument("--refs", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--exceeding-mode", dest="exceeding_mode", choices=[MODE_MAIN_TEXT, MODE_ALGORITHM1], default=None)
    p.add_argument("--seq-agg", dest="sequence_aggregation", choices=[AGG_MEAN, AGG_SUM], default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("metrics", help="corpus metrics over reference/prediction pairs")
    p.add_argument("--refs", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("split", help="time-based train/test split")
    p.add_argument("--input", required=True)
    p.add_argument("--test-frac", dest="test_frac", type=float, default=0.10)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("retrieve", help="nearest-neighbor lookup over reaction fingerprints")
    p.add_argument("--index", required=True)
    p.add_argument("--build-from", dest="build_from")
    p.add_argument("--query")
    p.add_argument("-k", type=int, default=1)
    p.add_argument("--width", type=int, default=2048)
    p.add_argument("--out")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("skeleton", help="extract factual skeletons from records")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_skeleton)

    p = sub.add_parser("corrupt", help="corruption baselines for judge calibration")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", required=True, choices=list(CORRUPTION_MODES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("judge", help="LLM-as-a-judge scoring via an external endpoint")
    p.add_argument("--refs", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--api-key-env", dest="api_key_env", default="PROCREW_API_KEY")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int, default=4)
    p.add_argument("--raw-dir", dest="raw_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("serve", help="run the scoring service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--max-body-mib", dest="max_body_mib", type=int, default=64)
    p.add_argument("--batch-cap", dest="batch_cap", type=int, default=4096)
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--exceeding-mode", dest="exceeding_mode", choices=[MODE_MAIN_TEXT, MODE_ALGORITHM1], default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DatasetError, ProcedureSyntaxError) as exc:
        print(f"procrew: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"procrew: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
