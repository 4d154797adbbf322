"""
Command-line front end.

Subcommands: ``compile``, ``infer``, ``serve``, ``bench``, ``trace`` and
``config``. Exit status is 0 on success, 2 for user or input errors, 3 for
environment errors (such as a port in use) and 4 for internal errors.
"""

import argparse
import sys
from pathlib import Path

from hydra.errors import HydraException
from omegaconf.errors import OmegaConfBaseException

from . import __version__, _settings
from ._errors import RcbkitError
from ._logging import get_logger, set_log_level
from .bench.kernel import BENCH_GRAPHS, run_kernel_bench
from .bench.sweep import compare_control_path, run_transfer_sweep, to_long
from .compiler.pack import compile_graph, load_model
from .config import RuntimeConfig, load_config, pretty_print_config, read_override_file
from .net.service import serve
from .runtime.context import Runtime

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USER = 2
EXIT_ENV = 3
EXIT_INTERNAL = 4


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcbkit", description="Command-stream accelerator runtime")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, default=None, help="key=value configuration file")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Configuration override, e.g. device.cols=8 (repeatable, wins over --config)",
    )
    parser.add_argument(
        "--log-level", type=str.upper, default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default from RCBKIT_LOG_LEVEL)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="Compile a graph into a packed model directory")
    p.add_argument("graph", type=Path, help="Graph IR JSON file")
    p.add_argument("out", type=Path, help="Output model directory")
    p.add_argument("--weights", type=Path, default=None, help="Directory of <file_id>.bin weights")
    p.add_argument("--sync", choices=["poll", "event"], default=None, help="Kernel completion wait")
    p.add_argument("--cache-flush", action="store_true", default=None, help="Flush host-written inputs")

    p = sub.add_parser("infer", help="Run one inference in-process")
    p.add_argument("model", type=Path)
    p.add_argument("input", type=Path, help="Graph inputs, concatenated raw bytes")
    p.add_argument("output", type=Path, help="Where to write the graph outputs")

    p = sub.add_parser("serve", help="Serve the inference protocol over TCP")
    p.add_argument("--model", type=Path, default=None, help="Provision this model before serving")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--max-connections", type=int, default=None)

    p = sub.add_parser("bench", help="Stage latency benches and control-path sweeps")
    p.add_argument("--kernel", choices=sorted(BENCH_GRAPHS), default="passthrough")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--sweep", action="store_true", help="Run the block-size transfer sweep instead")
    p.add_argument(
        "--control-path", action="store_true",
        help="Compare direct and mediated control paths on a compiled pipeline",
    )
    p.add_argument("--model", type=Path, default=None, help="Model for --control-path (default 64x64 matmul)")
    p.add_argument("--penalty", type=int, default=None, help="Crossing penalty in ticks")
    p.add_argument("--csv", type=Path, default=None, help="Also write metric,key,value rows here")
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("trace", help="Print the per-operation execution trace of one inference")
    p.add_argument("model", type=Path)
    p.add_argument("input", type=Path)

    sub.add_parser("config", help="Print the resolved configuration")
    return parser


def resolve_config(args) -> RuntimeConfig:
    try:
        overrides = read_override_file(args.config) if args.config is not None else []
        return load_config(overrides=overrides + list(args.overrides))
    except (HydraException, OmegaConfBaseException, ValueError) as exc:
        if isinstance(exc, RcbkitError):
            raise
        raise RcbkitError(f"bad configuration: {exc}") from exc


def cmd_compile(args, cfg: RuntimeConfig) -> int:
    if args.sync is not None:
        cfg.compiler.sync = args.sync
    if args.cache_flush:
        cfg.compiler.cache_flush = True
    model = compile_graph(args.graph, args.weights, args.out, cfg.compiler, cfg.device)
    print(f"{len(model.rcbs)} rcb(s), image {len(model.image)} bytes -> {args.out}")
    return EXIT_OK


def _runtime(model_dir, cfg: RuntimeConfig) -> Runtime:
    runtime = Runtime(cfg.device)
    runtime.provision(load_model(model_dir))
    return runtime


def cmd_infer(args, cfg: RuntimeConfig) -> int:
    runtime = _runtime(args.model, cfg)
    out = runtime.run(args.input.read_bytes())
    args.output.write_bytes(out)
    logger.info("wrote %d bytes to %s", len(out), args.output)
    return EXIT_OK


def cmd_trace(args, cfg: RuntimeConfig) -> int:
    runtime = _runtime(args.model, cfg)
    runtime.run(args.input.read_bytes())
    for block, trace in enumerate(runtime.last_result.traces):
        for line in trace.to_lines():
            print(f"{block} {line}")
    return EXIT_OK


def cmd_serve(args, cfg: RuntimeConfig) -> int:
    runtime = Runtime(cfg.device)
    if args.model is not None:
        runtime.provision(load_model(args.model))
    host = args.host or cfg.net.host
    port = cfg.net.port if args.port is None else args.port
    try:
        serve(runtime, host, port, args.max_connections)
    except KeyboardInterrupt:
        logger.info("interrupted")
    return EXIT_OK


def cmd_bench(args, cfg: RuntimeConfig) -> int:
    if args.sweep:
        table = run_transfer_sweep(
            penalty=args.penalty, device=cfg.device, bench=cfg.bench, progress=args.progress
        )
    elif args.control_path:
        model = (
            load_model(args.model)
            if args.model is not None
            else compile_graph(BENCH_GRAPHS["matmul"](), options=cfg.compiler, grid=cfg.device)
        )
        table = compare_control_path(model, args.penalty, cfg.device, cfg.bench)
    else:
        result = run_kernel_bench(
            args.kernel, args.iterations, cfg.device, cfg.bench, progress=args.progress
        )
        table = result.table()
    print(table.to_string())
    if args.csv is not None:
        to_long(table).to_csv(args.csv, index=False)
    return EXIT_OK


def cmd_config(args, cfg: RuntimeConfig) -> int:
    pretty_print_config(cfg)
    return EXIT_OK


COMMANDS = {
    "compile": cmd_compile,
    "infer": cmd_infer,
    "serve": cmd_serve,
    "bench": cmd_bench,
    "trace": cmd_trace,
    "config": cmd_config,
}


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    set_log_level(args.log_level or _settings.get_setting("log_level"))
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except RcbkitError as exc:
        logger.error("%s", exc)
        return EXIT_USER
    except FileNotFoundError as exc:
        logger.error("no such file: %s", exc.filename)
        return EXIT_USER
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_ENV
    except Exception as exc:
        logger.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
