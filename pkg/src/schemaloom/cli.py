"""Operator command line binding the whole workflow together.

Subcommands mirror the three-stage flow plus its supporting operations:
``init``, ``convert``, ``stage1``, ``stage2``, ``stage3``, ``feedback``,
``experiment``, ``ground``, ``compare``, ``serve``, ``resume``. Every
subcommand honors --env-file, repeatable --set KEY=VALUE overrides, and
--dry-run (print the plan, touch nothing over the network).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from schemaloom import SchemaloomError
from schemaloom.config import ENV_EXAMPLE, EnvConfig
from schemaloom.corpus import CorpusRole, convert_pdfs, load_corpus
from schemaloom.embeddings import EmbeddingClient
from schemaloom.grounding import (
    GroundingConfig,
    OlsClient,
    OntologyAllowList,
    ground_schema,
)
from schemaloom.metrics import build_pairwise_report, render_report_text
from schemaloom.model import parse_schema
from schemaloom.pipeline import (
    RunContext,
    StoreGate,
    accept_feedback,
    enumerate_experiments,
    experiment_label,
    resume as resume_run,
    run_stage1,
    run_stage2,
    run_stage3,
)
from schemaloom.prompts import default_templates, load_templates, write_default_templates
from schemaloom.runstate import Cadence, FeedbackChannel, FeedbackMode, NO_FEEDBACK
from schemaloom.store import SnapshotStore

_CHANNELS = {
    "descriptive": FeedbackChannel.DESCRIPTIVE,
    "edited": FeedbackChannel.EDITED,
    "combined": FeedbackChannel.COMBINED,
    "none": FeedbackChannel.NONE,
}
_CADENCES = {
    "first": Cadence.FIRST_ITERATION_ONLY,
    "every": Cadence.EVERY_ITERATION,
    "never": Cadence.NEVER,
}


def _error_line(exc: Exception) -> str:
    detail = " ".join(str(exc).split())
    run_id = getattr(exc, "run_id", "") or ""
    return f"error kind={type(exc).__name__} run_id={run_id} detail={detail}"


def _load_config(args) -> EnvConfig:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise SchemaloomError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    import os

    return EnvConfig.resolve(Path(args.env_file), os.environ, overrides)


def _templates(cfg: EnvConfig):
    if cfg.templates_dir:
        return load_templates(Path(cfg.templates_dir))
    return default_templates()


def _context(cfg: EnvConfig) -> RunContext:
    return RunContext(
        store=SnapshotStore(Path(cfg.runs_dir)),
        model=cfg.model_config(),
        templates=_templates(cfg),
        clock=cfg.clock(),
    )


def _feedback_mode(args) -> FeedbackMode:
    channel = _CHANNELS[args.feedback_mode]
    if channel is FeedbackChannel.NONE:
        return NO_FEEDBACK
    if not args.cadence or args.cadence == "never":
        raise SchemaloomError(
            f"feedback mode {args.feedback_mode} needs --cadence first|every"
        )
    return FeedbackMode(channel, _CADENCES[args.cadence])


def _print_plan(command: str, plan: dict) -> None:
    print(f"DRY-RUN {command} " + json.dumps(plan, sort_keys=True))


def _headless_gate(cfg: EnvConfig, store: SnapshotStore) -> StoreGate:
    def announce(ticket):
        print(f"review gate open: run={ticket.run_id} stage={ticket.stage.value} "
              f"iteration={ticket.iteration}")
        print(f"ticket: {store.pending_ticket_path(ticket.run_id)}")
        print("guiding questions:")
        for n, q in enumerate(ticket.guiding_questions, 1):
            print(f"  {n}. {q}")
        print(f"submit with: schemaloom feedback submit --run-id {ticket.run_id} "
              f"--file answers.json  (or POST /runs/{ticket.run_id}/feedback)")
        sys.stdout.flush()

    return StoreGate(store, on_wait=announce)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_init(args) -> int:
    cfg = _load_config(args)
    data = Path(cfg.data_dir)
    created = []
    for sub in ("stage-1", "stage-2/research-papers", "stage-3/research-papers"):
        path = data / sub
        if not path.is_dir():
            path.mkdir(parents=True)
            created.append(path)
    runs = Path(cfg.runs_dir)
    if not runs.is_dir():
        runs.mkdir(parents=True)
        created.append(runs)
    env_example = Path(".env.example")
    if args.dry_run:
        _print_plan("init", {"create": [str(p) for p in created], "env_example": str(env_example)})
        return 0
    if not env_example.exists():
        env_example.write_text(ENV_EXAMPLE, encoding="utf-8")
        created.append(env_example)
    created += write_default_templates(data / "templates")
    for path in created:
        print(f"created {path}")
    print("ok init")
    return 0


def cmd_convert(args) -> int:
    cfg = _load_config(args)
    directories = [Path(args.dir)] if args.dir else [
        Path(cfg.data_dir) / "stage-2" / "research-papers",
        Path(cfg.data_dir) / "stage-3" / "research-papers",
    ]
    converter = args.converter or cfg.pdf_converter
    if args.dry_run:
        _print_plan("convert", {"dirs": [str(d) for d in directories], "converter": converter})
        return 0
    total = 0
    for directory in directories:
        if directory.is_dir():
            total += convert_pdfs(directory, converter)
    print(f"ok converted={total}")
    return 0


def cmd_stage1(args) -> int:
    cfg = _load_config(args)
    spec_dir = Path(cfg.data_dir) / "stage-1"
    if args.dry_run:
        _print_plan("stage1", {
            "spec_dir": str(spec_dir),
            "model": cfg.llm_model,
            "base_url": cfg.llm_base_url,
            "temperature": cfg.llm_temperature,
            "context_tokens": cfg.llm_context_tokens,
            "run_id": args.run_id or "(generated)",
        })
        return 0
    ctx = _context(cfg)
    spec = load_corpus(spec_dir, CorpusRole.SPECIFICATION, ctx.estimator)
    snapshot = run_stage1(ctx, spec, run_id=args.run_id)
    print(f"ok run_id={snapshot.run_id} "
          f"snapshot={ctx.store.schema_path(snapshot.run_id, snapshot.stage, 0)}")
    return 0


def _run_iterative(args, stage3: bool) -> int:
    cfg = _load_config(args)
    mode = _feedback_mode(args)
    sub = "stage-3" if stage3 else "stage-2"
    role = CorpusRole.EXTENDED if stage3 else CorpusRole.CURATED
    papers_dir = Path(cfg.data_dir) / sub / "research-papers"
    if args.dry_run:
        _print_plan("stage3" if stage3 else "stage2", {
            "run_id": args.run_id,
            "papers_dir": str(papers_dir),
            "feedback_mode": mode.to_json_dict(),
            "model": cfg.llm_model,
        })
        return 0
    ctx = _context(cfg)
    corpus = load_corpus(papers_dir, role, ctx.estimator)
    prev = ctx.store.latest_snapshot(args.run_id)
    if prev is None:
        raise SchemaloomError(f"run {args.run_id} has no snapshots; run stage1 first")
    gate = _headless_gate(cfg, ctx.store)
    runner = run_stage3 if stage3 else run_stage2
    snapshots = runner(ctx, prev, corpus, mode, gate)
    print(f"ok run_id={args.run_id} stage={'Finalize' if stage3 else 'Refine'} "
          f"snapshots={len(snapshots)}")
    return 0


def cmd_stage2(args) -> int:
    return _run_iterative(args, stage3=False)


def cmd_stage3(args) -> int:
    if not args.dry_run and not args.confirm_finalize:
        print("stage3 rolls the run over to the finalization corpus; "
              "re-run with --confirm-finalize to proceed", file=sys.stderr)
        return 2
    return _run_iterative(args, stage3=True)


def cmd_feedback_submit(args) -> int:
    cfg = _load_config(args)
    payload = json.loads(Path(args.file).read_text(encoding="utf-8"))
    if args.dry_run:
        masked = dict(payload)
        if "edited_schema" in masked and masked["edited_schema"]:
            masked["edited_schema"] = f"({len(masked['edited_schema'])} chars)"
        _print_plan("feedback-submit", {"run_id": args.run_id, "payload": masked})
        return 0
    store = SnapshotStore(Path(cfg.runs_dir))
    accept_feedback(
        store,
        args.run_id,
        payload["stage"],
        int(payload["iteration"]),
        descriptive=payload.get("descriptive"),
        edited_schema_text=payload.get("edited_schema"),
        author=payload.get("author", "expert"),
    )
    print(f"ok run_id={args.run_id} stage={payload['stage']} iteration={payload['iteration']}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    if not args.matrix:
        raise SchemaloomError("only --matrix mode is supported")
    models = [m.strip() for m in (args.models or cfg.llm_model).split(",") if m.strip()]
    modes = enumerate_experiments()
    plan = []
    for model in models:
        for mode in modes:
            label = experiment_label(mode)
            safe_model = model.replace("/", "-").replace(":", "-")
            plan.append({
                "run_id": f"exp{label}-{safe_model}",
                "model": model,
                "experiment": label,
                "feedback_mode": mode.to_json_dict(),
            })
    if args.dry_run:
        _print_plan("experiment", {"runs": plan, "scheduled": len(plan)})
        print(f"scheduled {len(plan)} runs")
        return 0

    def execute(entry) -> None:
        run_cfg = EnvConfig(**{**cfg.__dict__, "llm_model": entry["model"]})
        ctx = _context(run_cfg)
        spec = load_corpus(Path(cfg.data_dir) / "stage-1", CorpusRole.SPECIFICATION, ctx.estimator)
        curated = load_corpus(
            Path(cfg.data_dir) / "stage-2" / "research-papers", CorpusRole.CURATED, ctx.estimator
        )
        extended = load_corpus(
            Path(cfg.data_dir) / "stage-3" / "research-papers", CorpusRole.EXTENDED, ctx.estimator
        )
        mode = FeedbackMode.from_json_dict(entry["feedback_mode"])
        gate = _headless_gate(cfg, ctx.store)
        s1 = run_stage1(ctx, spec, run_id=entry["run_id"], mode=mode)
        s2 = run_stage2(ctx, s1, curated, mode, gate)
        run_stage3(ctx, s2[-1] if s2 else s1, extended, mode, gate)

    if args.parallel > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            list(pool.map(execute, plan))
    else:
        for entry in plan:
            execute(entry)
    print(f"ok scheduled={len(plan)} completed={len(plan)}")
    return 0


def cmd_ground(args) -> int:
    cfg = _load_config(args)
    snapshot_path = Path(args.snapshot)
    if args.dry_run:
        _print_plan("ground", {
            "snapshot": str(snapshot_path),
            "ols": cfg.ols_base_url,
            "embedder": cfg.embed_base_url,
            "top_k": args.top_k or cfg.grounding_top_k,
        })
        return 0
    doc = parse_schema(snapshot_path.read_text(encoding="utf-8"))
    allow = None
    if cfg.ontology_allowlist:
        allow = OntologyAllowList.from_file(Path(cfg.ontology_allowlist))
    grounding_cfg = GroundingConfig(
        ols=OlsClient(cfg.ols_base_url),
        embedder=EmbeddingClient(cfg.embed_base_url, cfg.embed_model, cfg.llm_api_key),
        allow=allow,
        top_k=args.top_k or cfg.grounding_top_k,
    )
    report = ground_schema(doc, grounding_cfg)
    out = snapshot_path.with_name(snapshot_path.name.replace(".schema.json", "") + ".grounding.json")
    out.write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    counts = {"grounded": 0, "no-match": 0, "error": 0}
    for entry in report.entries.values():
        counts[entry.status] += 1
    print(f"ok report={out} grounded={counts['grounded']} "
          f"no_match={counts['no-match']} errors={counts['error']}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    paths = [Path(p) for p in args.snapshots]
    labels = (
        [s.strip() for s in args.labels.split(",")]
        if args.labels
        else [p.name.replace(".schema.json", "") for p in paths]
    )
    if len(labels) != len(paths):
        raise SchemaloomError(f"{len(paths)} snapshots but {len(labels)} labels")
    if args.dry_run:
        _print_plan("compare", {
            "snapshots": [str(p) for p in paths],
            "labels": labels,
            "fields": args.fields,
        })
        return 0
    schemas = {
        label: parse_schema(path.read_text(encoding="utf-8"))
        for label, path in zip(labels, paths)
    }
    embedder = EmbeddingClient(cfg.embed_base_url, cfg.embed_model, cfg.llm_api_key)
    report = build_pairwise_report(schemas, args.stage, embedder, fields=args.fields)
    print(render_report_text([report]), end="")
    if args.json:
        Path(args.json).write_text(
            json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        print(f"ok json={args.json}")
    return 0


def cmd_serve(args) -> int:
    cfg = _load_config(args)
    from schemaloom.service import ServeConfig, serve

    static = args.static or cfg.serve_static
    serve_cfg = ServeConfig(
        runs_dir=Path(cfg.runs_dir),
        host=args.host or cfg.serve_host,
        port=args.port or cfg.serve_port,
        auth_token=(args.token or cfg.serve_token) or None,
        static_dir=Path(static) if static else None,
    )
    if args.dry_run:
        _print_plan("serve", {
            "host": serve_cfg.host,
            "port": serve_cfg.port,
            "runs_dir": str(serve_cfg.runs_dir),
            "static": str(serve_cfg.static_dir) if serve_cfg.static_dir else None,
            "auth": bool(serve_cfg.auth_token),
        })
        return 0
    serve(serve_cfg)
    return 0


def cmd_resume(args) -> int:
    cfg = _load_config(args)
    if args.dry_run:
        _print_plan("resume", {"run_id": args.run_id, "runs_dir": cfg.runs_dir})
        return 0
    ctx = _context(cfg)
    manifest = ctx.store.load_manifest(args.run_id)
    gate = _headless_gate(cfg, ctx.store)
    snapshots = resume_run(ctx, args.run_id, gate)
    if not snapshots and manifest.status.value == "Completed":
        print(f"ok run_id={args.run_id} already-completed=true")
    else:
        print(f"ok run_id={args.run_id} resumed-snapshots={len(snapshots)}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schemaloom",
        description="Mine JSON schemas from scientific text with an LLM and expert review.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--env-file", default=".env", help="configuration file (default .env)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--dry-run", action="store_true",
                       help="print the plan without any network calls")

    p = sub.add_parser("init", help="scaffold data directories, templates, .env.example")
    common(p)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("convert", help="convert PDFs to text via the configured converter")
    common(p)
    p.add_argument("--dir", help="directory of PDFs (default: stage-2 and stage-3 paper dirs)")
    p.add_argument("--converter", help="command template with {input}/{output}")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stage1", help="generate the initial schema from the specification")
    common(p)
    p.add_argument("--run-id", help="run identifier (generated when omitted)")
    p.set_defaults(func=cmd_stage1)

    for name, helptext in (("stage2", "refine over the curated paper set"),
                           ("stage3", "finalize over the extended corpus")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--run-id", required=True)
        p.add_argument("--feedback-mode", choices=sorted(_CHANNELS), default="none")
        p.add_argument("--cadence", choices=sorted(_CADENCES), default=None)
        if name == "stage3":
            p.add_argument("--confirm-finalize", action="store_true",
                           help="explicitly confirm the stage-2 to stage-3 rollover")
            p.set_defaults(func=cmd_stage3)
        else:
            p.set_defaults(func=cmd_stage2)

    p = sub.add_parser("feedback", help="submit expert feedback to a waiting gate")
    fb_sub = p.add_subparsers(dest="feedback_command", required=True)
    ps = fb_sub.add_parser("submit")
    common(ps)
    ps.add_argument("--run-id", required=True)
    ps.add_argument("--file", required=True,
                    help="JSON file: {stage, iteration, descriptive?, edited_schema?, author?}")
    ps.set_defaults(func=cmd_feedback_submit)

    p = sub.add_parser("experiment", help="run the feedback-protocol matrix across models")
    common(p)
    p.add_argument("--matrix", action="store_true", help="schedule all seven protocols per model")
    p.add_argument("--models", help="comma-separated model names (default: configured model)")
    p.add_argument("--parallel", type=int, default=1, help="run N experiments concurrently")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("ground", help="ground a schema snapshot's properties to ontology terms")
    common(p)
    p.add_argument("snapshot", help="path to a .schema.json snapshot")
    p.add_argument("--top-k", type=int, default=None)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("compare", help="pairwise schema variance metrics across snapshots")
    common(p)
    p.add_argument("snapshots", nargs="+", help="two or more .schema.json paths")
    p.add_argument("--labels", help="comma-separated model labels (default: file stems)")
    p.add_argument("--stage", default="snapshot", help="stage label for the report header")
    p.add_argument("--fields", choices=["full", "descriptions"], default="full")
    p.add_argument("--json", help="also write the machine-readable report here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="run the review HTTP service")
    common(p)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--token", default=None, help="bearer token required for mutations")
    p.add_argument("--static", default=None, help="directory with the built review UI")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("resume", help="continue an interrupted run from its cursor")
    common(p)
    p.add_argument("run_id")
    p.set_defaults(func=cmd_resume)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaloomError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
