"""Command-line entry point: index building, query evaluation, compilation, benchmarks.

stdout carries only machine-parseable output (JSON or id lines); diagnostics
go to stderr. Exit codes: 0 success, 1 usage/validation/I-O error, 2 empty
result under --fail-empty.
"""
import argparse
import asyncio
import inspect
import json
import sys
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ValidationError, field_validator

from src.bench.corpus import gen_corpus, load_corpus_spec, write_corpus_jsonl
from src.bench.experiments import EXPERIMENTS, BenchReport
from src.bench.history import record_report
from src.bench.reports import FORMATS, report_to_json, write_report
from src.config import SETTINGS
from src.constraints import compile_constraint_text
from src.database import make_engine
from src.errors import RetrievalError, UnknownExperiment, UsageError
from src.evaluator import EvalOptions, compute_pn
from src.index import InvertedIndex, load_index, read_corpus_jsonl, save_index
from src.query_dag import parse_dag, serialize_dag
from src.run_log import log_run, setup_console_logging, setup_run_log

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2


class CliConfig(BaseModel):
    """Validated paths and output mode of one invocation."""

    command: str
    inputs: List[Path] = []
    output: Optional[Path] = None
    mode: Literal["ids", "count", "report"] = "ids"

    @field_validator("inputs")
    @classmethod
    def _inputs_exist(cls, paths: List[Path]) -> List[Path]:
        for path in paths:
            if not path.is_file():
                raise ValueError(f"{path} does not exist or is not a file")
        return paths

    @field_validator("output")
    @classmethod
    def _output_dir_exists(cls, path: Optional[Path]) -> Optional[Path]:
        if path is not None and not path.parent.is_dir():
            raise ValueError(f"directory {path.parent} does not exist")
        return path


def _config(**kwargs) -> CliConfig:
    try:
        return CliConfig(**kwargs)
    except ValidationError as e:
        raise UsageError(e.errors()[0]["msg"].removeprefix("Value error, ")) from e


def _emit(text: str, output: Optional[Path] = None) -> None:
    if text and not text.endswith("\n"):
        text += "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _result_keys(index: InvertedIndex, docs) -> List[str]:
    """External keys sorted as strings; bare DocIds stay in numeric order."""
    if index.doc_keys is None:
        return [str(d) for d in docs.tolist()]
    return sorted(index.doc_key(d) for d in docs.tolist())


# --- subcommands -------------------------------------------------------------


def cmd_index_build(args) -> int:
    cfg = _config(command="index build", inputs=[Path(args.corpus)], output=Path(args.index))
    index = read_corpus_jsonl(cfg.inputs[0])
    save_index(index, cfg.output)
    _emit(json.dumps({"universe_size": index.universe_size, "terms": len(index.postings)}))
    return EXIT_OK


def cmd_query(args) -> int:
    mode = "report" if args.report else "count" if args.count else "ids"
    output = Path(args.output) if args.output else None
    cfg = _config(command="query eval", inputs=[Path(args.index), Path(args.dag)], output=output, mode=mode)
    index = load_index(cfg.inputs[0])
    dag = parse_dag(cfg.inputs[1].read_text(encoding="utf-8"))
    opts = EvalOptions(
        adaptive_leaf_polarity=args.adaptive_polarity,
        parallel=args.parallel,
        collect_counters=not args.no_counters,
        shrink_intermediate=args.shrink,
    )
    report = compute_pn(dag, index, opts)

    if cfg.mode == "report":
        data = report.to_json(include_ids=True, per_node=args.per_node)
        data["result"] = _result_keys(index, report.result)
        _emit(json.dumps(data, sort_keys=True), cfg.output)
    elif cfg.mode == "count":
        _emit(str(report.count), cfg.output)
    else:
        _emit("\n".join(_result_keys(index, report.result)), cfg.output)

    if args.fail_empty and report.count == 0:
        return EXIT_EMPTY
    return EXIT_OK


def cmd_compile(args) -> int:
    cfg = _config(command="compile", inputs=[Path(args.constraint)], output=Path(args.dag_out))
    dag = compile_constraint_text(cfg.inputs[0].read_text(encoding="utf-8"), fold_constants=not args.no_fold)
    cfg.output.write_text(serialize_dag(dag, indent=2) + "\n", encoding="utf-8")
    _emit(json.dumps({"nodes": len(dag), "output": str(cfg.output)}))
    return EXIT_OK


def _experiment_params(args, experiment) -> dict:
    given = {
        # parameter: (flag, value)
        "sizes": ("--sizes", args.sizes),
        "list_size": ("--list-size", args.list_size),
        "list_sizes": ("--list-sizes", args.list_sizes),
        "depths": ("--depths", args.depths),
        "universe_size": ("--universe", args.universe),
        "topic_terms": ("--topics", args.topics),
        "max_tree_nodes": ("--max-tree-nodes", args.max_tree_nodes),
        "seed": ("--seed", args.seed),
    }
    accepted = inspect.signature(experiment).parameters
    params = {}
    for name, (flag, value) in given.items():
        if value is None:
            continue
        if name not in accepted:
            raise UsageError(f"{flag} does not apply to {args.experiment}")
        params[name] = value
    if "opts" in accepted:
        params["opts"] = EvalOptions(adaptive_leaf_polarity=args.adaptive_polarity, parallel=args.parallel)
    return params


def cmd_bench(args) -> int:
    experiment = EXPERIMENTS.get(args.experiment)
    if experiment is None:
        raise UnknownExperiment(args.experiment)
    output = Path(args.output) if args.output else None
    if output is not None and output.exists() and not output.is_dir():
        raise UsageError(f"{output} is not a directory")
    report: BenchReport = experiment(**_experiment_params(args, experiment))

    summary = {
        "experiment": report.experiment,
        "seed": report.seed,
        "passed": report.passed,
        "verdicts": [v.model_dump() for v in report.verdicts],
    }
    if output is not None:
        formats = args.format or list(FORMATS)
        summary["files"] = [str(p) for p in write_report(report, output, formats)]

    status = EXIT_OK if report.passed else EXIT_ERROR
    if args.record:
        drifts = asyncio.run(_record(report))
        summary["drift"] = [d.describe() for d in drifts]
        if drifts:
            status = EXIT_ERROR

    if output is None:
        data = json.loads(report_to_json(report))
        data.update(summary)
        _emit(json.dumps(data, indent=2, sort_keys=True))
    else:
        _emit(json.dumps(summary, sort_keys=True))
    for verdict in report.verdicts:
        if not verdict.passed:
            print(f"FAIL {verdict.name}: {verdict.detail}", file=sys.stderr)
    return status


async def _record(report: BenchReport):
    engine = make_engine(SETTINGS.database_path)
    try:
        return await record_report(report, engine)
    finally:
        await engine.dispose()


def cmd_bench_corpus(args) -> int:
    cfg = _config(command="bench corpus", inputs=[Path(args.spec)], output=Path(args.out))
    spec = load_corpus_spec(cfg.inputs[0])
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    index = gen_corpus(spec)
    lines = write_corpus_jsonl(index, cfg.output)
    _emit(json.dumps({"universe_size": index.universe_size, "terms": len(index.postings), "lines": lines}))
    return EXIT_OK


# --- parser ------------------------------------------------------------------


class CliParser(argparse.ArgumentParser):
    """Usage errors exit 1; 2 belongs to --fail-empty."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _eval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--adaptive-polarity", action="store_true", help="flip leaves denser than |U|/2")
    parser.add_argument("--parallel", action="store_true", help="evaluate independent nodes concurrently")


def build_parser() -> CliParser:
    parser = CliParser(prog="pnretrieve", description="Boolean retrieval over query dags with PN-responses")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    groups = parser.add_subparsers(dest="group", required=True)

    index = groups.add_parser("index", help="build inverted indexes")
    index_cmds = index.add_subparsers(dest="action", required=True)
    build = index_cmds.add_parser("build", help="JSONL corpus -> binary index")
    build.add_argument("corpus")
    build.add_argument("index")
    build.set_defaults(handler=cmd_index_build)

    query = groups.add_parser("query", help="evaluate query dags")
    query_cmds = query.add_subparsers(dest="action", required=True)
    evaluate = query_cmds.add_parser("eval", help="evaluate a dag against an index")
    evaluate.add_argument("index")
    evaluate.add_argument("dag")
    _eval_flags(evaluate)
    evaluate.add_argument("--shrink", action="store_true", help="re-polarize large intermediate sets")
    evaluate.add_argument("--no-counters", action="store_true", help="skip cost accounting")
    modes = evaluate.add_mutually_exclusive_group()
    modes.add_argument("--report", action="store_true", help="print the full evaluation report as JSON")
    modes.add_argument("--count", action="store_true", help="print only the result size")
    evaluate.add_argument("--per-node", action="store_true", help="include per-node set sizes in --report")
    evaluate.add_argument("--fail-empty", action="store_true", help="exit 2 when nothing matches")
    evaluate.add_argument("--output", help="write to this file instead of stdout")
    evaluate.set_defaults(handler=cmd_query)

    compile_ = groups.add_parser("compile", help="constraint DSL -> wire-format dag")
    compile_.add_argument("constraint")
    compile_.add_argument("dag_out")
    compile_.add_argument("--no-fold", action="store_true", help="keep constant gates")
    compile_.set_defaults(handler=cmd_compile)

    bench = groups.add_parser("bench", help="synthetic corpora and scaling experiments")
    bench_cmds = bench.add_subparsers(dest="action", required=True)
    run = bench_cmds.add_parser("run", help="run one experiment")
    run.add_argument("experiment", help=", ".join(EXPERIMENTS))
    run.add_argument("--seed", type=int)
    run.add_argument("--output", help="directory for report files; stdout otherwise")
    run.add_argument("--format", action="append", choices=FORMATS)
    run.add_argument("--record", action="store_true", help="store rows in the history database")
    run.add_argument("--sizes", type=int, nargs="+")
    run.add_argument("--list-size", type=int)
    run.add_argument("--list-sizes", type=int, nargs="+")
    run.add_argument("--depths", type=int, nargs="+")
    run.add_argument("--universe", type=int)
    run.add_argument("--topics", type=int)
    run.add_argument("--max-tree-nodes", type=int)
    _eval_flags(run)
    run.set_defaults(handler=cmd_bench)

    corpus = bench_cmds.add_parser("corpus", help="write a synthetic JSONL corpus")
    corpus.add_argument("spec")
    corpus.add_argument("out")
    corpus.add_argument("--seed", type=int)
    corpus.set_defaults(handler=cmd_bench_corpus)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_console_logging(args.verbose)
    setup_run_log(SETTINGS.log_dir)

    command = " ".join(p for p in (args.group, getattr(args, "action", None)) if p)
    params = {k: v for k, v in vars(args).items() if k not in ("handler", "group", "action")}
    try:
        status = args.handler(args)
    except (RetrievalError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        log_run(command, params, "error", e)
        return EXIT_ERROR
    log_run(command, params, "ok" if status == EXIT_OK else f"exit {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
