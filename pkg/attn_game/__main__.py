# -*- coding: utf-8 -*-
"""
"""

import argparse
import logging
import logging.handlers
import os
import re
import sys

import numpy as np

from . import BANNER
from . import VERSION
from . import analysis
from . import conf
from . import report
from . import runner
from . import utils
from . import world


class HighlightFormatter(logging.Formatter):

    reset = "\x1b[0m"
    red = "\x1b[0;31m"
    green = "\x1b[0;32m"
    yellow = "\x1b[0;33m"
    purple = "\x1b[0;35m"
    cyan = "\x1b[0;36m"
    grey = "\x1b[0;38m"
    light_purple = "\x1b[0;95m"
    bold_red = "\x1b[31;1m"

    def __init__(self, format):
        super(HighlightFormatter, self).__init__(format)
        self._format = format.replace(
            "%(asctime)s", self.grey + "%(asctime)s" + self.reset
        )
        self.FORMATS = {
            5: self.grey,
            logging.DEBUG: self.cyan,
            logging.INFO: self.green,
            logging.WARNING: self.yellow,
            logging.ERROR: self.red,
            logging.CRITICAL: self.bold_red,
        }

    def format(self, record):
        log_fmt = self._format.replace(
            "%(levelname)s",
            self.FORMATS.get(record.levelno, self.reset) + "%(levelname)s" + self.reset,
        )
        record.msg = re.sub(
            r"\[((?:no)?at-(?:no)?at)\]\[(\d+)\]",
            r"[%(setting)s\1%(reset)s][%(seed)s\2%(reset)s]"
            % {
                "setting": self.purple,
                "seed": self.light_purple,
                "reset": self.reset,
            },
            str(record.msg),
        )
        record.msg = re.sub(
            r"\[([\d\.]+)\]",
            r"[%(seconds)s\1%(reset)s]" % {"seconds": self.cyan, "reset": self.reset},
            record.msg,
        )
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)


def setup_logging(args):
    handler = logging.StreamHandler()
    fmt = "[%(asctime)s][%(levelname)s]%(message)s"
    if args.no_color:
        formatter = logging.Formatter(fmt)
    else:
        formatter = HighlightFormatter(fmt)
    handler.setFormatter(formatter)

    if args.log_level == "verbose":
        utils.logger.setLevel(5)
    elif args.log_level == "debug":
        utils.logger.setLevel(logging.DEBUG)
    elif args.log_level == "info":
        utils.logger.setLevel(logging.INFO)
    elif args.log_level == "warn":
        utils.logger.setLevel(logging.WARN)
    elif args.log_level == "error":
        utils.logger.setLevel(logging.ERROR)

    utils.logger.propagate = 0
    utils.logger.addHandler(handler)

    if args.log_file:
        handler = logging.handlers.RotatingFileHandler(
            os.path.abspath(args.log_file), maxBytes=10 * 1024 * 1024, backupCount=4
        )
        formatter = logging.Formatter(
            "[%(asctime)s][%(levelname)s][%(filename)s][%(lineno)d]%(message)s"
        )
        handler.setFormatter(formatter)
        utils.logger.addHandler(handler)


def format_value(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return "%.4f" % value
    return str(value)


def handle_train(args):
    if not os.path.exists(args.config):
        print("Config file %s not exist" % args.config, file=sys.stderr)
        return -1
    config = conf.ExperimentConfig.load(args.config)
    if args.output:
        config = config.replace(output_dir=args.output)
    results = runner.run_experiment(config, workers=args.workers)
    print("setting   alpha     seed  status  train_acc  gen_acc  topsim")
    for result in results:
        print(
            "%-9s %-9g %-5d %-7s %-10s %-8s %s"
            % (
                result.setting,
                result.alpha,
                result.seed,
                result.status,
                format_value(result.train_acc),
                format_value(result.gen_acc),
                format_value(result.topsim),
            )
        )
    failed = [it for it in results if it.status != runner.STATUS_OK]
    return 1 if failed else 0


def handle_eval(args):
    train_acc, gen_acc = runner.reevaluate_run(args.run, args.rounds)
    print("train_acc %.4f" % train_acc)
    print("gen_acc   %.4f" % gen_acc)
    return 0


def handle_analyze(args):
    result = runner.analyze_run(args.run, args.rounds)
    print(result.table.to_text())
    print("topsim %s" % format_value(result.topsim))
    if result.labels is not None:
        print("symbols:")
        for symbol in sorted(result.labels):
            print("  %2d %s" % (symbol, result.labels[symbol]))
    if result.gibberish is not None:
        print(
            "universe success %s, with gibberish %s, without %s"
            % (
                format_value(result.gibberish.success_rate),
                format_value(result.gibberish.gibberish_rate),
                format_value(result.gibberish.clean_rate),
            )
        )
    if result.traces and args.show:
        for trace in result.traces[: args.show]:
            print(
                "episode %d target %s message %s %s"
                % (
                    trace.episode_id,
                    trace.instance.object_type.label,
                    " ".join(str(it) for it in trace.message),
                    "success" if trace.success else "failure",
                )
            )
            for symbol, row in zip(trace.message, trace.speaker_attention):
                if len(row) != trace.instance.patches.shape[0]:
                    continue
                print("  symbol %d" % symbol)
                print(analysis.render_attention(row, trace.instance.grid))
    if result.samples:
        success = [it.discrepancy for it in result.samples if it.success]
        failure = [it.discrepancy for it in result.samples if not it.success]
        print(
            "discrepancy success %s failure %s"
            % (
                format_value(float(np.mean(success)) if success else None),
                format_value(float(np.mean(failure)) if failure else None),
            )
        )
    return 0


def handle_report(args):
    result = report.report_sweep(args.sweep, args.top_k, args.out, svg=not args.no_svg)
    for path in result.files:
        print(path)
    return 0


def handle_gen_features(args):
    config = conf.ExperimentConfig.load(args.spec)
    spec = config.world_spec()
    if spec.kind != world.KIND_SYNTHETIC:
        print("Feature files are generated from synthetic worlds", file=sys.stderr)
        return -1
    synthetic = world.build_world(spec, config.world_seed)
    count = world.write_feature_file(
        args.out, synthetic, args.instances, np.random.default_rng(args.seed)
    )
    print("Wrote %d instances to %s" % (count, args.out))
    return 0


def main():
    print("\x1b[0;36m%s \x1b[0;32m v%s\x1b[0m\n" % (BANNER.rstrip(), VERSION))
    parser = argparse.ArgumentParser(
        prog="attn-game", description="Attention referential game cmdline tool v%s" % VERSION
    )
    parser.add_argument(
        "--log-level",
        help="log level, default is info",
        choices=("verbose", "debug", "info", "warn", "error"),
        default="info",
    )
    parser.add_argument("--log-file", help="log file save path")
    parser.add_argument(
        "--no-color", help="disable color output", action="store_true", default=False
    )
    parser.add_argument(
        "-V",
        "--version",
        help="show current version",
        action="store_true",
        default=False,
    )
    subparsers = parser.add_subparsers(dest="command")

    train_parser = subparsers.add_parser("train", help="train and evaluate a sweep")
    train_parser.add_argument("-c", "--config", required=True, help="config file path")
    train_parser.add_argument("--workers", type=int, help="parallel worker processes")
    train_parser.add_argument("-o", "--output", help="override output directory")
    train_parser.add_argument(
        "-d", "--daemon", help="run as daemon", action="store_true", default=False
    )

    eval_parser = subparsers.add_parser("eval", help="re-evaluate a run directory")
    eval_parser.add_argument("--run", required=True, help="run directory")
    eval_parser.add_argument("--rounds", type=int, help="evaluation rounds")

    analyze_parser = subparsers.add_parser("analyze", help="analyze a run directory")
    analyze_parser.add_argument("--run", required=True, help="run directory")
    analyze_parser.add_argument("--rounds", type=int, help="analysis rounds")
    analyze_parser.add_argument(
        "--show", type=int, default=1, help="episodes rendered as attention maps"
    )

    report_parser = subparsers.add_parser("report", help="emit plot data for a sweep")
    report_parser.add_argument("--sweep", required=True, help="sweep output directory")
    report_parser.add_argument("--top-k", type=int, default=10, help="runs kept per setting")
    report_parser.add_argument("--out", help="report directory")
    report_parser.add_argument(
        "--no-svg", help="skip SVG rendering", action="store_true", default=False
    )

    features_parser = subparsers.add_parser(
        "gen-features", help="write a synthetic feature file"
    )
    features_parser.add_argument("--spec", required=True, help="world config file path")
    features_parser.add_argument("--out", required=True, help="feature file path")
    features_parser.add_argument(
        "--instances", type=int, default=4, help="instances per object type"
    )
    features_parser.add_argument("--seed", type=int, default=0, help="render seed")

    args = sys.argv[1:]
    if not args:
        parser.print_help()
        return 0

    args = parser.parse_args(args)

    if args.version:
        print("v%s" % VERSION)
        return 0

    if not args.command:
        parser.print_help()
        return 0

    if args.command == "train" and args.daemon:
        if sys.platform == "win32":
            print("Daemon mode is not supported on Windows", file=sys.stderr)
            return -1
        import daemon

        daemon.DaemonContext(
            working_directory=os.getcwd(), stderr=open("error.txt", "w")
        ).open()

    setup_logging(args)

    handlers = {
        "train": handle_train,
        "eval": handle_eval,
        "analyze": handle_analyze,
        "report": handle_report,
        "gen-features": handle_gen_features,
    }
    try:
        return handlers[args.command](args)
    except utils.ConfigError as ex:
        print("Invalid config: %s" % ex, file=sys.stderr)
        if ex.keys:
            print("Offending keys: %s" % ", ".join(ex.keys), file=sys.stderr)
        return -1
    except KeyboardInterrupt:
        tasks = utils.AsyncTaskManager().running_tasks
        for task in tasks:
            print("Task %s can't auto exit" % task, file=sys.stderr)
        print("Process exit warmly.")
        return -1


if __name__ == "__main__":
    sys.exit(main())
