"""
treepen command line.

    python -m app.cli fit --data boston.csv --target medv --criterion cart --penalty none --out model.json
    python -m app.cli tune --data boston.csv --target medv --penalty new-variable --c 0.10 --trace trace.csv
    python -m app.cli oob --data boston.csv --target medv --penalty ema --bootstrap 100
    python -m app.cli compare --data boston.csv --target medv --penalties none,new-variable,ema
    python -m app.cli render --model model.json --format dot
    python -m app.cli predict --model model.json --data new.csv

Exit codes: 0 success, 1 usage error, 2 data error.
"""
import argparse
import sys
from typing import List, Optional, Sequence

import structlog
from pydantic import ValidationError

from app.config import Settings, load_settings, parse_k_grid
from app.engines.dataset import Dataset, load_csv, load_feature_matrix
from app.engines.evaluation import compare_penalties, oob_estimate
from app.engines.export import (
    compare_frame,
    emit,
    format_frame,
    oob_frame,
    predictions_frame,
    read_model,
    render,
    serialize,
    trace_frame,
    training_line,
)
from app.engines.grower import grow
from app.engines.tuning import tune
from app.exceptions import TreepenError
from app.logging_config import configure_logging
from app.models import ClassImpurity, Criterion, GainKind, OutputFormat, PenaltyKind, TaskKind
from app.schemas import GrowConfig, OobConfig, TuneConfig

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

# pydantic field -> flag, for usage diagnostics
_FIELD_FLAGS = {
    "k": "--k",
    "min_node_fraction": "--min-node-frac",
    "class_of_interest": "--class-of-interest",
    "c": "--c",
    "k_grid": "--k-grid",
    "replicates": "--bootstrap",
    "base_seed": "--seed",
    "n_jobs": "--n-jobs",
}


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        self.flag = flag
        super().__init__(f"{flag}: {message}" if flag else message)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _enum_values(enum_cls) -> List[str]:
    return [member.value for member in enum_cls]


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="dotenv-style settings file (TREEPEN_* keys)")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--log-json", action="store_true", help="Render logs as JSON lines")
    common.add_argument("--out", default=None, help="Output path (stdout when omitted)")
    common.add_argument("--format", choices=_enum_values(OutputFormat), default=None)

    data = _ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="Input CSV with a header row")
    data.add_argument("--target", required=True, help="Target column")
    data.add_argument("--task", choices=_enum_values(TaskKind), default=None, help="Default: detect from the target")
    data.add_argument("--features", default=None, help="Comma-separated predictor columns (default: all but target)")

    criterion = _ArgumentParser(add_help=False)
    criterion.add_argument("--criterion", choices=_enum_values(Criterion), default=Criterion.CART.value)
    criterion.add_argument("--impurity", choices=_enum_values(ClassImpurity), default=ClassImpurity.GINI.value)
    criterion.add_argument("--class-of-interest", default=None, help="Class label (or index) for os-extreme")
    criterion.add_argument("--penalty", choices=_enum_values(PenaltyKind), default=PenaltyKind.NONE.value)
    criterion.add_argument("--k", type=float, default=0.0, help="Penalty constant in [0, 1]")
    criterion.add_argument("--min-node-frac", type=float, default=None)

    tuning = _ArgumentParser(add_help=False)
    tuning.add_argument("--c", type=float, default=None, help="Allowed relative loss increase for k*")
    tuning.add_argument("--k-grid", default=None, help="start:step:end or comma list")
    tuning.add_argument("--n-jobs", type=int, default=None, help="Worker processes")

    bootstrap = _ArgumentParser(add_help=False)
    bootstrap.add_argument("--bootstrap", type=int, default=None, help="Replicate count B")
    bootstrap.add_argument("--seed", type=int, default=None)
    bootstrap.add_argument("--fixed-k", action="store_true", help="Use --k in every replicate instead of tuning k*")
    bootstrap.add_argument("--dataset-name", default=None, help="Dataset column of the report (default: file stem)")

    parser = _ArgumentParser(prog="treepen", description="Penalized decision trees")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    commands.add_parser("fit", parents=[common, data, criterion], help="Grow a tree with a fixed k")

    tune_parser = commands.add_parser("tune", parents=[common, data, criterion, tuning], help="Select k* and grow")
    tune_parser.add_argument("--trace", default=None, help="Write the per-k loss trace CSV here")

    commands.add_parser(
        "oob", parents=[common, data, criterion, tuning, bootstrap], help="Out-of-bag risk estimate"
    )

    compare_parser = commands.add_parser(
        "compare", parents=[common, data, criterion, tuning, bootstrap], help="Paired OOB comparison of penalties"
    )
    compare_parser.add_argument("--penalties", default="none,new-variable,ema")
    compare_parser.add_argument("--classes-of-interest", default=None, help="Comma-separated labels for os-extreme")

    render_parser = commands.add_parser("render", parents=[common], help="Render a model as DOT or text")
    render_parser.add_argument("--model", required=True)

    predict_parser = commands.add_parser("predict", parents=[common], help="Predict new rows from a model")
    predict_parser.add_argument("--model", required=True)
    predict_parser.add_argument("--data", required=True)
    predict_parser.add_argument("--target", default=None, help="Column to ignore if present")

    return parser


# Argument resolution
def resolve_class(dataset: Dataset, value: str, flag: str = "--class-of-interest") -> int:
    """A class label, or failing that a class index"""
    if value in dataset.class_labels:
        return dataset.class_labels.index(value)
    try:
        index = int(value)
    except ValueError:
        raise UsageError(flag, f"'{value}' is not a class label ({', '.join(dataset.class_labels)})")
    if not 0 <= index < dataset.n_classes:
        raise UsageError(flag, f"class index {index} out of range")
    return index


def _validation_error(e: ValidationError) -> UsageError:
    error = e.errors()[0]
    loc = error.get("loc") or ()
    flag = _FIELD_FLAGS.get(str(loc[-1]), "") if loc else ""
    message = error["msg"]
    if not flag and "class of interest" in message:
        flag = "--class-of-interest"
    return UsageError(flag, message)


def load_dataset(args) -> Dataset:
    task = TaskKind(args.task) if args.task else None
    features = [name.strip() for name in args.features.split(",")] if args.features else None
    return load_csv(args.data, args.target, task, features)


def grow_config(args, dataset: Dataset, settings: Settings) -> GrowConfig:
    try:
        gain_kind = GainKind.resolve(Criterion(args.criterion), dataset.task, ClassImpurity(args.impurity))
    except ValueError as e:
        raise UsageError("--criterion", str(e))

    class_of_interest = None
    if gain_kind.needs_class_of_interest and args.class_of_interest is not None:
        class_of_interest = resolve_class(dataset, args.class_of_interest)

    try:
        return GrowConfig(
            gain_kind=gain_kind,
            penalty=PenaltyKind(args.penalty),
            k=args.k,
            min_node_fraction=settings.MIN_NODE_FRACTION if args.min_node_frac is None else args.min_node_frac,
            class_of_interest=class_of_interest,
        )
    except ValidationError as e:
        raise _validation_error(e)


def tune_config(args, base: GrowConfig, settings: Settings) -> TuneConfig:
    try:
        grid = parse_k_grid(args.k_grid if args.k_grid is not None else settings.K_GRID)
    except ValueError as e:
        raise UsageError("--k-grid", str(e))
    try:
        return TuneConfig(base=base, k_grid=grid, c=settings.TUNE_C if args.c is None else args.c)
    except ValidationError as e:
        raise _validation_error(e)


def oob_config(args, dataset: Dataset, settings: Settings) -> OobConfig:
    base = grow_config(args, dataset, settings)
    tuning = None if args.fixed_k else tune_config(args, base, settings)
    try:
        return OobConfig(
            grow=base,
            tune=tuning,
            replicates=settings.BOOTSTRAP_REPLICATES if args.bootstrap is None else args.bootstrap,
            base_seed=settings.SEED if args.seed is None else args.seed,
            n_jobs=_n_jobs(args, settings),
        )
    except ValidationError as e:
        raise _validation_error(e)


def _n_jobs(args, settings: Settings) -> int:
    n_jobs = settings.N_JOBS if args.n_jobs is None else args.n_jobs
    if n_jobs < 1:
        raise UsageError("--n-jobs", "must be at least 1")
    return n_jobs


def _dataset_name(args) -> str:
    if args.dataset_name:
        return args.dataset_name
    stem = args.data.replace("\\", "/").rsplit("/", 1)[-1]
    return stem.rsplit(".", 1)[0] if "." in stem else stem


def _output_format(args, default: OutputFormat, allowed: Sequence[OutputFormat]) -> OutputFormat:
    fmt = OutputFormat(args.format) if args.format else default
    if fmt not in allowed:
        raise UsageError("--format", f"{fmt.value} is not available here ({', '.join(f.value for f in allowed)})")
    return fmt


def _summary(args, lines: Sequence[str]) -> None:
    """Summary goes to stdout unless stdout already carries the output document"""
    stream = sys.stdout if args.out and args.out != "-" else sys.stderr
    for line in lines:
        if line:
            stream.write(line + "\n")
    stream.flush()


# Subcommands
def run_fit(args, settings: Settings) -> None:
    dataset = load_dataset(args)
    config = grow_config(args, dataset, settings)
    tree = grow(dataset.all_rows(), config)
    emit(serialize(tree), args.out)
    _summary(args, [training_line(tree), f"terminals = {tree.n_terminals()}"])


def run_tune(args, settings: Settings) -> None:
    dataset = load_dataset(args)
    config = tune_config(args, grow_config(args, dataset, settings), settings)
    result = tune(dataset.all_rows(), config, n_jobs=_n_jobs(args, settings))
    emit(serialize(result.tree), args.out)
    if args.trace:
        emit(format_frame(trace_frame(result.trace, dataset.task), OutputFormat.CSV), args.trace)
    _summary(
        args,
        [
            f"k* = {result.k_star:g}",
            f"loss = {result.tuned_loss:.6g} (unpenalized {result.unpenalized_loss:.6g}, limit {result.threshold:.6g})",
            training_line(result.tree),
            f"terminals = {result.tree.n_terminals()}",
        ],
    )


def run_oob(args, settings: Settings) -> None:
    fmt = _output_format(args, OutputFormat.CSV, (OutputFormat.CSV, OutputFormat.TEXT, OutputFormat.JSON))
    dataset = load_dataset(args)
    report = oob_estimate(dataset, oob_config(args, dataset, settings))
    emit(format_frame(oob_frame(report, _dataset_name(args)), fmt), args.out)


def run_compare(args, settings: Settings) -> None:
    fmt = _output_format(args, OutputFormat.CSV, (OutputFormat.CSV, OutputFormat.TEXT, OutputFormat.JSON))
    try:
        penalties = [PenaltyKind(name.strip()) for name in args.penalties.split(",") if name.strip()]
    except ValueError as e:
        raise UsageError("--penalties", str(e))
    if not penalties:
        raise UsageError("--penalties", "no penalties given")

    dataset = load_dataset(args)
    config = oob_config(args, dataset, settings)
    classes = None
    if args.classes_of_interest:
        if not config.grow.gain_kind.needs_class_of_interest:
            raise UsageError("--classes-of-interest", "only applies to --criterion os-extreme on a classification target")
        classes = [
            resolve_class(dataset, label.strip(), "--classes-of-interest")
            for label in args.classes_of_interest.split(",")
            if label.strip()
        ]

    rows = compare_penalties(dataset, config, penalties, _dataset_name(args), classes)
    emit(format_frame(compare_frame(rows), fmt), args.out)


def run_render(args, settings: Settings) -> None:
    fmt = _output_format(args, OutputFormat.DOT, (OutputFormat.DOT, OutputFormat.TEXT, OutputFormat.JSON))
    emit(render(read_model(args.model), fmt), args.out)


def run_predict(args, settings: Settings) -> None:
    fmt = _output_format(args, OutputFormat.CSV, (OutputFormat.CSV, OutputFormat.TEXT, OutputFormat.JSON))
    tree = read_model(args.model)
    ignore = (args.target,) if args.target else ()
    features = load_feature_matrix(args.data, tree.feature_names, ignore=ignore)
    emit(format_frame(predictions_frame(tree, tree.predict_many(features)), fmt), args.out)


COMMANDS = {
    "fit": run_fit,
    "tune": run_tune,
    "oob": run_oob,
    "compare": run_compare,
    "render": run_render,
    "predict": run_predict,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        settings = load_settings(args.config)
    except ValidationError as e:
        error = e.errors()[0]
        name = f"TREEPEN_{error['loc'][-1]}" if error.get("loc") else "--config"
        sys.stderr.write(f"treepen: error: {name}: {error['msg']}\n")
        return EXIT_USAGE
    except OSError as e:
        sys.stderr.write(f"treepen: error: --config: {e}\n")
        return EXIT_USAGE
    configure_logging(args.log_level or settings.LOG_LEVEL, args.log_json or settings.LOG_JSON)

    try:
        COMMANDS[args.command](args, settings)
    except UsageError as e:
        sys.stderr.write(f"treepen: error: {e}\n")
        return EXIT_USAGE
    except TreepenError as e:
        logger.error("Command failed", command=args.command, error=str(e))
        sys.stderr.write(f"treepen: {e}\n")
        return EXIT_DATA
    except OSError as e:
        # output paths; inputs are reported as UnreadableFile
        sys.stderr.write(f"treepen: {e.strerror or e}: {e.filename}\n")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
