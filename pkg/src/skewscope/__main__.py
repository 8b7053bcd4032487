"""skewscope CLI interface."""

from __future__ import annotations

from contextlib import contextmanager
import sys
from typing import TYPE_CHECKING

import typer as t
from upath import UPath

from skewscope import __version__, constants
from skewscope.exceptions import (
    BaselineIntegrityError,
    ConfigError,
    SimulationError,
    SkewScopeError,
    TraceFormatError,
    TraceIntegrityError,
)
from skewscope.experiments import (
    analyze_trace,
    dump_config,
    emit_report,
    emit_sweep_summary,
    load_config,
    load_report,
    run_baseline,
    run_drift_recovery,
    run_queueing_control,
    run_sweep,
)
from skewscope.experiments.report import REPORT_FILE, ReportFormat
from skewscope.experiments.runner import Run
from skewscope.log import configure_logging, get_logger, set_level
from skewscope.trace_io import TraceFileHeader, read_trace, write_trace


if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    from skewscope.experiments import ExperimentConfig

logger = get_logger(__name__)

cli = t.Typer(
    name="skewscope",
    help=(
        "Clock-skew causality simulator. Run skew experiments on a simulated "
        "inference pipeline and audit traces for negative timing spans."
    ),
    no_args_is_help=True,
)

# Common option definitions
CONFIG_HELP = "Config file, or the name of a packaged config (default, drift_recovery)"
OUT_HELP = "Output directory"
SEED_HELP = "Override the config seed"
DURATION_HELP = "Override the run duration in seconds"
FORMAT_HELP = "Report format"
VERBOSE_HELP = "Enable verbose output"
QUIET_HELP = "Suppress non-essential output"

# Option command tuples
CONFIG_CMDS = "-c", "--config"
OUT_CMDS = "-o", "--out"
SEED_CMDS = "-s", "--seed"
DURATION_CMDS = "-d", "--duration"
FORMAT_CMDS = "-f", "--format"
VERBOSE_CMDS = "-v", "--verbose"
QUIET_CMDS = "-q", "--quiet"

TRACE_FILE = "trace.jsonl"

_EXIT_CODES: dict[type[SkewScopeError], int] = {
    ConfigError: constants.EXIT_USAGE,
    TraceFormatError: constants.EXIT_USAGE,
    TraceIntegrityError: constants.EXIT_USAGE,
    BaselineIntegrityError: constants.EXIT_FAILURE,
    SimulationError: constants.EXIT_FAILURE,
}


def version_callback(value: bool) -> None:
    """Print version and exit if --version is used."""
    if value:
        t.echo(f"skewscope version: {__version__}")
        raise t.Exit


def verbose_callback(ctx: t.Context, _param: t.CallbackParam, value: bool) -> bool:
    """Set up verbose logging."""
    if value:
        set_level(constants.LOG_LEVELS["debug"])
    return value


def quiet_callback(ctx: t.Context, _param: t.CallbackParam, value: bool) -> bool:
    """Set up quiet logging."""
    if value:
        set_level(constants.LOG_LEVELS["error"])
    return value


def exit_code_for(exc: SkewScopeError) -> int:
    for exc_type in type(exc).__mro__:
        if exc_type in _EXIT_CODES:
            return _EXIT_CODES[exc_type]  # type: ignore[index]
    return constants.EXIT_FAILURE


@contextmanager
def _exit_on_error() -> Iterator[None]:
    """Turn package errors into an error line and the matching exit code."""
    try:
        yield
    except SkewScopeError as exc:
        t.echo(f"Error: {exc}", err=True)
        raise t.Exit(exit_code_for(exc)) from exc


def parse_skews(value: str) -> list[int]:
    """Parse a comma-separated list of skews in ms into ns."""
    try:
        skews = [round(float(part) * constants.NS_PER_MS) for part in value.split(",")]
    except ValueError as exc:
        msg = f"Invalid skew list {value!r}, expected comma-separated ms values"
        raise ConfigError(msg) from exc
    return skews


def parse_field_map(pairs: Sequence[str]) -> dict[str, str]:
    """Parse `foreign=field` pairs."""
    mapping = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key or not value:
            msg = f"Invalid field mapping {pair!r}, expected foreign=field"
            raise ConfigError(msg)
        mapping[key] = value
    return mapping


def _prepare(
    config: str,
    out: UPath,
    seed: int | None,
    duration: float | None,
) -> ExperimentConfig:
    cfg = load_config(config).with_overrides(seed=seed, run_duration_s=duration)
    dump_config(cfg, out / constants.RESOLVED_CONFIG_NAME)
    return cfg


def _write_run(run: Run, out: UPath, fmt: ReportFormat) -> None:
    header = TraceFileHeader(
        run_id=run.report.run_id,
        config_digest=run.report.config_digest,
    )
    write_trace(out / TRACE_FILE, run.trace, header)
    emit_report(run.report, out, fmt)


def _echo_run(label: str, run: Run) -> None:
    report = run.report
    t.echo(
        f"{label}: {report.total_requests} requests, {report.total_tokens} tokens, "
        f"{report.negative_span_count}/{report.total_spans} negative spans "
        f"({report.violation_rate:.2%})"
    )


@cli.callback()
def main_callback(
    version: bool = t.Option(None, "--version", callback=version_callback, is_eager=True),  # type: ignore
) -> None:
    """Clock-skew causality simulator."""
    configure_logging("info")


@cli.command()
def baseline(
    config: str = t.Option(constants.DEFAULT_CONFIG_NAME, *CONFIG_CMDS, help=CONFIG_HELP),
    out: str = t.Option("out/baseline", *OUT_CMDS, help=OUT_HELP),
    seed: int | None = t.Option(None, *SEED_CMDS, help=SEED_HELP),
    duration: float | None = t.Option(None, *DURATION_CMDS, help=DURATION_HELP),
    fmt: ReportFormat = t.Option("both", *FORMAT_CMDS, help=FORMAT_HELP),
    verbose: bool = t.Option(
        False, *VERBOSE_CMDS, help=VERBOSE_HELP, callback=verbose_callback
    ),
    quiet: bool = t.Option(False, *QUIET_CMDS, help=QUIET_HELP, callback=quiet_callback),
) -> None:
    """Zero-skew baseline: validate the setup and estimate Δt_min."""
    with _exit_on_error():
        target = UPath(out)
        cfg = _prepare(config, target, seed, duration)
        run = run_baseline(cfg)
        _write_run(run, target, fmt)
        _echo_run("baseline", run)
        stats = run.report.delta_t_min_stats or {}
        for label, dtm in stats.items():
            quantiles = ", ".join(f"q{q:g}={v}" for q, v in dtm.quantiles.items())
            t.echo(f"  Δt_min {label}: min={dtm.min_ns} ns, {quantiles}")
        t.echo(f"  alert threshold: {run.report.alert_threshold_ns} ns")


@cli.command()
def sweep(
    config: str = t.Option(constants.DEFAULT_CONFIG_NAME, *CONFIG_CMDS, help=CONFIG_HELP),
    out: str = t.Option("out/sweep", *OUT_CMDS, help=OUT_HELP),
    seed: int | None = t.Option(None, *SEED_CMDS, help=SEED_HELP),
    duration: float | None = t.Option(None, *DURATION_CMDS, help=DURATION_HELP),
    skews: str | None = t.Option(None, help="Comma-separated skews in ms"),
    fine: bool = t.Option(False, help="Sweep 0..6 ms in 0.25 ms steps"),
    workers: int = t.Option(1, help="Parallel worker processes"),
    fmt: ReportFormat = t.Option("both", *FORMAT_CMDS, help=FORMAT_HELP),
    verbose: bool = t.Option(
        False, *VERBOSE_CMDS, help=VERBOSE_HELP, callback=verbose_callback
    ),
    quiet: bool = t.Option(False, *QUIET_CMDS, help=QUIET_HELP, callback=quiet_callback),
) -> None:
    """Step-skew sweep at the inference stage."""
    with _exit_on_error():
        if skews is not None:
            skews_ns = parse_skews(skews)
        elif fine:
            skews_ns = [us * 1_000 for us in constants.FINE_SKEWS_US]
        else:
            skews_ns = [ms * constants.NS_PER_MS for ms in constants.DEFAULT_SKEWS_MS]
        target = UPath(out)
        cfg = _prepare(config, target, seed, duration)
        result = run_sweep(cfg, skews_ns, workers=workers)
        for run in result.runs:
            _write_run(run, target / f"skew_{run.report.skew_ns}ns", fmt)
        emit_sweep_summary(result.rows, target)
        for row in result.rows:
            t.echo(
                f"skew {row.skew_ns / constants.NS_PER_MS:g} ms: "
                f"{row.negative_span_count} negative spans "
                f"(predicted {row.predicted_violations}), "
                f"violation rate {row.violation_rate:.2%}, min health {row.min_health}"
            )
        clean, dirty = result.onset
        t.echo(f"onset between {clean} ns and {dirty} ns")


@cli.command()
def drift(
    config: str = t.Option("drift_recovery", *CONFIG_CMDS, help=CONFIG_HELP),
    out: str = t.Option("out/drift", *OUT_CMDS, help=OUT_HELP),
    seed: int | None = t.Option(None, *SEED_CMDS, help=SEED_HELP),
    duration: float | None = t.Option(None, *DURATION_CMDS, help=DURATION_HELP),
    fmt: ReportFormat = t.Option("both", *FORMAT_CMDS, help=FORMAT_HELP),
    verbose: bool = t.Option(
        False, *VERBOSE_CMDS, help=VERBOSE_HELP, callback=verbose_callback
    ),
    quiet: bool = t.Option(False, *QUIET_CMDS, help=QUIET_HELP, callback=quiet_callback),
) -> None:
    """Step skew with opposing drift: watch health recover."""
    with _exit_on_error():
        target = UPath(out)
        cfg = _prepare(config, target, seed, duration)
        run = run_drift_recovery(cfg)
        _write_run(run, target, fmt)
        _echo_run("drift", run)
        report = run.report
        t.echo(f"  ε below link floor at: {report.crossing_ns} ns")
        t.echo(f"  last violation at: {report.last_violation_ns} ns")
        t.echo(f"  health recovered at: {report.health_recovered_at_ns} ns")


@cli.command()
def queueing(
    config: str = t.Option(constants.DEFAULT_CONFIG_NAME, *CONFIG_CMDS, help=CONFIG_HELP),
    out: str = t.Option("out/queueing", *OUT_CMDS, help=OUT_HELP),
    seed: int | None = t.Option(None, *SEED_CMDS, help=SEED_HELP),
    duration: float | None = t.Option(None, *DURATION_CMDS, help=DURATION_HELP),
    backlog_load: float = t.Option(0.9, help="λ/μ of the backlog arm"),
    low_load: float = t.Option(0.1, help="λ/μ of the low-load arms"),
    skew_ms: float = t.Option(5.0, help="Step skew of the skewed low-load arm, in ms"),
    fmt: ReportFormat = t.Option("both", *FORMAT_CMDS, help=FORMAT_HELP),
    verbose: bool = t.Option(
        False, *VERBOSE_CMDS, help=VERBOSE_HELP, callback=verbose_callback
    ),
    quiet: bool = t.Option(False, *QUIET_CMDS, help=QUIET_HELP, callback=quiet_callback),
) -> None:
    """Queueing control: backlog without skew versus skew without backlog."""
    with _exit_on_error():
        target = UPath(out)
        cfg = _prepare(config, target, seed, duration)
        result = run_queueing_control(
            cfg,
            backlog_load=backlog_load,
            low_load=low_load,
            skew_ns=round(skew_ms * constants.NS_PER_MS),
        )
        t.echo(f"inference service rate μ = {result.service_rate:.3f} req/s")
        arms = {
            "backlog": result.backlog,
            "low_load": result.low_load,
            "low_load_skewed": result.low_load_skewed,
        }
        for name, run in arms.items():
            _write_run(run, target / name, fmt)
            _echo_run(name, run)
            wait_ms = run.report.mean_queue_delay_ns / constants.NS_PER_MS
            t.echo(f"  mean inference queue delay: {wait_ms:.1f} ms")


@cli.command()
def analyze(
    trace: str = t.Argument(..., help="Trace file to audit"),
    window_s: float = t.Option(
        constants.DEFAULT_HEALTH_WINDOW_S, help="Health window in seconds"
    ),
    tick_s: float = t.Option(
        constants.DEFAULT_METRIC_TICK_S, help="Health tick in seconds"
    ),
    field_map: list[str] = t.Option(  # noqa: B008
        [], "--field-map", help="Rename a foreign key: foreign=field (repeatable)"
    ),
    out: str | None = t.Option(None, *OUT_CMDS, help="Write the analysis report here"),
    fmt: ReportFormat = t.Option("both", *FORMAT_CMDS, help=FORMAT_HELP),
    verbose: bool = t.Option(
        False, *VERBOSE_CMDS, help=VERBOSE_HELP, callback=verbose_callback
    ),
    quiet: bool = t.Option(False, *QUIET_CMDS, help=QUIET_HELP, callback=quiet_callback),
) -> None:
    """Audit a trace for negative spans and print a causal-trust verdict."""
    with _exit_on_error():
        header, events = read_trace(trace, parse_field_map(field_map) or None)
        analysis = analyze_trace(header, events, window_s=window_s, tick_s=tick_s)
        report = analysis.report
        source = "external" if analysis.external else "simulated"
        t.echo(f"events: {len(events)} ({source} clocks)")
        t.echo(
            f"spans: {report.total_spans}, negative: {report.negative_span_count} "
            f"({report.violation_rate:.2%}), in flight: {report.in_flight}"
        )
        for label, count in report.negative_spans_per_edge.items():
            if count:
                t.echo(f"  {label}: {count}")
        share = analysis.untrusted_share
        t.echo(f"untrusted spans: {analysis.untrusted_spans} ({share:.2%})")
        for label, dtm in (report.delta_t_min_stats or {}).items():
            t.echo(f"  Δt_min {label}: min={dtm.min_ns} ns")
        t.echo(f"verdict: {analysis.verdict}")
        if out is not None:
            emit_report(report, out, fmt)


@cli.command()
def report(
    source: str = t.Argument(..., help="Run directory or report.json"),
    out: str | None = t.Option(None, *OUT_CMDS, help="Re-render into this directory"),
    fmt: ReportFormat = t.Option("both", *FORMAT_CMDS, help=FORMAT_HELP),
    verbose: bool = t.Option(
        False, *VERBOSE_CMDS, help=VERBOSE_HELP, callback=verbose_callback
    ),
    quiet: bool = t.Option(False, *QUIET_CMDS, help=QUIET_HELP, callback=quiet_callback),
) -> None:
    """Summarize a stored report and optionally re-render it."""
    with _exit_on_error():
        path = UPath(source)
        if path.is_dir():
            path /= REPORT_FILE
        loaded = load_report(path)
        t.echo(f"run: {loaded.run_id} ({loaded.kind}, seed {loaded.seed})")
        t.echo(f"config digest: {loaded.config_digest}")
        t.echo(
            f"tokens: {loaded.total_tokens}, requests: {loaded.total_requests}, "
            f"negative spans: {loaded.negative_span_count}/{loaded.total_spans}"
        )
        if loaded.health_timeline:
            healthy = sum(h for _, h in loaded.health_timeline)
            t.echo(f"healthy ticks: {healthy}/{len(loaded.health_timeline)}")
        if out is not None:
            emit_report(loaded, out, fmt)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        cli(args=args, prog_name="skewscope", standalone_mode=True)
    except SystemExit as exc:
        if exc.code is None or isinstance(exc.code, int):
            return exc.code or constants.EXIT_OK
        t.echo(exc.code, err=True)
        return constants.EXIT_FAILURE
    except SkewScopeError as exc:
        t.echo(f"Error: {exc}", err=True)
        return exit_code_for(exc)
    return constants.EXIT_OK


def run() -> None:
    """Entry point for the CLI."""
    sys.exit(main())


if __name__ == "__main__":
    run()
