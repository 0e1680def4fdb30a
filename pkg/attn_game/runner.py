# -*- coding: utf-8 -*-
"""Experiment sweeps
"""

import asyncio
import concurrent.futures
import functools
import os

import numpy as np
import tornado.ioloop

from . import agents
from . import analysis
from . import conf
from . import metrics
from . import training
from . import utils
from . import world as world_mod

STATUS_OK = "ok"
STATUS_FAILED = "failed"
TOPSIM_DEGENERATE = "degenerate"

CONFIG_FILE = "config.yml"
METRICS_FILE = "metrics.csv"
LOG_FILE = "log.csv"
SPEAKER_FILE = "speaker.ck"
LISTENER_FILE = "listener.ck"
LANGUAGE_FILE = "language.txt"
DISCREPANCY_FILE = "discrepancy.csv"
FAILURE_FILE = "failed.csv"

RESULT_FIELDS = [
    "config_hash",
    "architecture",
    "setting",
    "alpha",
    "seed",
    "status",
    "train_acc",
    "gen_acc",
    "topsim",
    "topsim_status",
    "discrepancy_success",
    "discrepancy_failure",
]


class RunResult(object):
    def __init__(
        self,
        config_hash,
        architecture,
        setting,
        alpha,
        seed,
        status=STATUS_OK,
        train_acc=None,
        gen_acc=None,
        topsim=None,
        topsim_status=STATUS_OK,
        discrepancy_success=None,
        discrepancy_failure=None,
        run_dir=None,
    ):
        self.config_hash = config_hash
        self.architecture = architecture
        self.setting = setting
        self.alpha = alpha
        self.seed = seed
        self.status = status
        self.train_acc = train_acc
        self.gen_acc = gen_acc
        self.topsim = topsim
        self.topsim_status = topsim_status
        self.discrepancy_success = discrepancy_success
        self.discrepancy_failure = discrepancy_failure
        self.run_dir = run_dir

    def __str__(self):
        return "<RunResult %s/%s alpha=%g seed=%d %s gen_acc=%s topsim=%s>" % (
            self.architecture,
            self.setting,
            self.alpha,
            self.seed,
            self.status,
            self.gen_acc,
            self.topsim,
        )

    @property
    def group(self):
        return self.architecture, self.setting

    @property
    def log_path(self):
        return os.path.join(self.run_dir, LOG_FILE) if self.run_dir else None

    @property
    def speaker_path(self):
        return os.path.join(self.run_dir, SPEAKER_FILE) if self.run_dir else None

    @property
    def listener_path(self):
        return os.path.join(self.run_dir, LISTENER_FILE) if self.run_dir else None

    def to_row(self):
        row = []
        for field in RESULT_FIELDS:
            value = getattr(self, field)
            row.append(float(value) if isinstance(value, (float, np.floating)) else value)
        return row

    def write(self, path):
        utils.write_csv(path, RESULT_FIELDS, [self.to_row()])

    @staticmethod
    def read(path):
        row = utils.read_csv(path)[0]

        def number(key):
            return float(row[key]) if row[key] != "" else None

        return RunResult(
            row["config_hash"],
            row["architecture"],
            row["setting"],
            float(row["alpha"]),
            int(row["seed"]),
            status=row["status"],
            train_acc=number("train_acc"),
            gen_acc=number("gen_acc"),
            topsim=number("topsim"),
            topsim_status=row["topsim_status"],
            discrepancy_success=number("discrepancy_success"),
            discrepancy_failure=number("discrepancy_failure"),
            run_dir=os.path.dirname(os.path.abspath(path)),
        )


def format_alpha(alpha):
    return "%g" % alpha


def run_directory(config, alpha, seed):
    return os.path.join(
        config.output_dir, config.config_hash, format_alpha(alpha), str(seed)
    )


def _mean_or_none(values):
    return float(np.mean(values)) if len(values) else None


def evaluate_run(config, world, speaker, listener, seed, run_dir=None):
    """TrainAcc, GenAcc, TopSim and attention discrepancy of trained agents"""
    accuracies = {}
    for split in (world_mod.SPLIT_TRAIN, world_mod.SPLIT_EVAL):
        accuracies[split] = training.evaluate(
            speaker,
            listener,
            world,
            split,
            config.eval_rounds,
            seed=seed,
            num_candidates=config.num_candidates,
            distractor_source=config.distractor_source,
        )

    table = analysis.language_table(speaker, world, seed)
    topsim_status = STATUS_OK
    try:
        topsim = metrics.topsim(table)
    except utils.UndefinedCorrelationError as ex:
        utils.logger.warning("[%s][%d] Degenerate language: %s" % (config.setting, seed, ex))
        topsim = None
        topsim_status = TOPSIM_DEGENERATE

    samples = []
    if speaker.mode == agents.MODE_AT and listener.mode == agents.MODE_AT:
        traces = analysis.collect_traces(
            speaker,
            listener,
            world,
            world_mod.SPLIT_EVAL,
            config.analysis_rounds,
            seed=seed,
            num_candidates=config.num_candidates,
            same_instance=True,
        )
        samples = analysis.discrepancy_samples(traces, config.discrepancy_target)
    success, failure = analysis.split_by_outcome(samples)

    if run_dir:
        analysis.write_language_table(os.path.join(run_dir, LANGUAGE_FILE), table)
        if samples:
            analysis.write_discrepancy_csv(os.path.join(run_dir, DISCREPANCY_FILE), samples)

    return RunResult(
        config.config_hash,
        config.architecture,
        config.setting,
        None,
        seed,
        train_acc=accuracies[world_mod.SPLIT_TRAIN],
        gen_acc=accuracies[world_mod.SPLIT_EVAL],
        topsim=topsim,
        topsim_status=topsim_status,
        discrepancy_success=_mean_or_none(success),
        discrepancy_failure=_mean_or_none(failure),
        run_dir=run_dir,
    )


def failed_result(config, alpha, seed, error=None):
    result = RunResult(
        config.config_hash,
        config.architecture,
        config.setting,
        alpha,
        seed,
        status=STATUS_FAILED,
        run_dir=run_directory(config, alpha, seed),
    )
    if error is not None:
        utils.logger.error(
            "[%s][%d] Run alpha=%g crashed: %s" % (config.setting, seed, alpha, error)
        )
    return result


def run_single(config, alpha, seed):
    """Train, evaluate and analyze one (alpha, seed) run; finished runs are reused"""
    run_dir = run_directory(config, alpha, seed)
    metrics_path = os.path.join(run_dir, METRICS_FILE)
    if os.path.isfile(metrics_path):
        utils.logger.info(
            "[%s][%d] Run alpha=%g already done, skipped" % (config.setting, seed, alpha)
        )
        return RunResult.read(metrics_path)
    utils.ensure_dir(run_dir)
    world = world_mod.build_world(config.world_spec(), config.world_seed)
    try:
        speaker, listener, log = training.train(config, seed, alpha, world)
    except utils.TrainingDivergedError as ex:
        utils.logger.exception(
            "[%s][%d] Run alpha=%g diverged" % (config.setting, seed, alpha)
        )
        utils.write_csv(
            os.path.join(run_dir, FAILURE_FILE),
            ["key", "value"],
            sorted((key, str(value)) for key, value in ex.diagnostic.items()),
        )
        result = failed_result(config, alpha, seed)
        result.write(metrics_path)
        return result

    log.write(os.path.join(run_dir, LOG_FILE))
    extra = {
        "config_hash": config.config_hash,
        "speaker_mode": config.speaker_mode,
        "listener_mode": config.listener_mode,
        "alpha": float(alpha),
        "seed": seed,
    }
    agents.save_agent(os.path.join(run_dir, SPEAKER_FILE), speaker, extra)
    agents.save_agent(os.path.join(run_dir, LISTENER_FILE), listener, extra)
    result = evaluate_run(config, world, speaker, listener, seed, run_dir)
    result.alpha = alpha
    result.write(metrics_path)
    utils.logger.info("[%s][%d] Finished %s" % (config.setting, seed, result))
    return result


async def run_inline(config, alpha, seed):
    return run_single(config, alpha, seed)


async def sweep(config, workers=1):
    """Run every (alpha, seed) pair, ``workers`` processes at a time"""
    manager = utils.AsyncTaskManager()
    loop = asyncio.get_event_loop()
    executor = None
    if workers > 1:
        executor = concurrent.futures.ProcessPoolExecutor(max_workers=workers)
    tasks = []
    try:
        for alpha in config.alphas:
            for seed in config.seeds:
                if executor:
                    job = loop.run_in_executor(executor, run_single, config, alpha, seed)
                else:
                    job = run_inline(config, alpha, seed)
                tasks.append(
                    manager.wrap_task(
                        job,
                        "run-%s-%s-%d" % (config.config_hash, format_alpha(alpha), seed),
                        functools.partial(failed_result, config, alpha, seed),
                    )
                )
        return list(await asyncio.gather(*tasks))
    finally:
        if executor:
            executor.shutdown()


def run_experiment(config, workers=None):
    """Run the sweep a config describes and return its results in order"""
    if not isinstance(config, conf.ExperimentConfig):
        config = conf.ExperimentConfig.load(config)
    workers = workers or config.workers
    base_dir = utils.ensure_dir(os.path.join(config.output_dir, config.config_hash))
    config.dump(os.path.join(base_dir, CONFIG_FILE))
    utils.logger.info(
        "[Runner] Sweep %s: %d alphas x %d seeds, %d workers, output %s"
        % (config, len(config.alphas), len(config.seeds), workers, base_dir)
    )
    results = tornado.ioloop.IOLoop.current().run_sync(
        functools.partial(sweep, config, workers)
    )
    utils.write_csv(
        os.path.join(base_dir, "results.csv"),
        RESULT_FIELDS,
        [it.to_row() for it in results],
    )
    return results


def _rank_key(result):
    gen_acc = result.gen_acc if result.gen_acc is not None else -1.0
    topsim = result.topsim if result.topsim is not None else -2.0
    return -gen_acc, -topsim, result.seed


def select_top_k(results, k):
    """The k best results by GenAcc, ties broken by TopSim then seed"""
    results = list(results)
    if k > len(results):
        raise utils.ParamError("Cannot select top %d of %d results" % (k, len(results)))
    return sorted(results, key=_rank_key)[:k]


def load_results(sweep_dir):
    results = []
    for root, _, files in sorted(os.walk(sweep_dir)):
        if METRICS_FILE in files:
            results.append(RunResult.read(os.path.join(root, METRICS_FILE)))
    results.sort(key=lambda it: (it.architecture, it.setting, it.alpha, it.seed))
    return results


def load_run(run_dir):
    """Config, world and agents of a finished run directory"""
    config_path = os.path.join(run_dir, os.pardir, os.pardir, CONFIG_FILE)
    config = conf.ExperimentConfig.load(os.path.normpath(config_path))
    world = world_mod.build_world(config.world_spec(), config.world_seed)
    speaker, speaker_manifest = agents.load_agent(os.path.join(run_dir, SPEAKER_FILE))
    listener, _ = agents.load_agent(os.path.join(run_dir, LISTENER_FILE))
    return config, world, speaker, listener, speaker_manifest


def reevaluate_run(run_dir, rounds=None):
    """Recompute TrainAcc and GenAcc from a run's checkpoints"""
    config, world, speaker, listener, manifest = load_run(run_dir)
    if rounds:
        config = config.replace(eval_rounds=rounds)
    seed = int(manifest.get("seed", 0))
    accuracies = {}
    for split in (world_mod.SPLIT_TRAIN, world_mod.SPLIT_EVAL):
        accuracies[split] = training.evaluate(
            speaker,
            listener,
            world,
            split,
            config.eval_rounds,
            seed=seed,
            num_candidates=config.num_candidates,
            distractor_source=config.distractor_source,
        )
    return accuracies[world_mod.SPLIT_TRAIN], accuracies[world_mod.SPLIT_EVAL]


class RunAnalysis(object):
    def __init__(self, table, topsim, matrix, labels, samples, gibberish, traces=None):
        self.table = table
        self.topsim = topsim
        self.matrix = matrix
        self.labels = labels
        self.samples = samples
        self.gibberish = gibberish
        self.traces = traces or []


def analyze_run(run_dir, rounds=None):
    """TopSim, symbol-concept associations, discrepancy and gibberish study"""
    config, world, speaker, listener, manifest = load_run(run_dir)
    seed = int(manifest.get("seed", 0))
    rounds = rounds or config.analysis_rounds
    table = analysis.language_table(speaker, world, seed)
    try:
        topsim = metrics.topsim(table)
    except utils.UndefinedCorrelationError:
        topsim = None
    traces = analysis.collect_traces(
        speaker,
        listener,
        world,
        world_mod.SPLIT_EVAL,
        rounds,
        seed=seed,
        num_candidates=config.num_candidates,
        same_instance=True,
    )
    matrix = labels = gibberish = None
    samples = []
    if speaker.mode == agents.MODE_AT:
        matrix = metrics.symbol_concept_map(
            analysis.association_traces(traces), config.vocab_size, world.num_values
        )
        labels = metrics.classify_symbols(matrix, config.gibberish_threshold)
        analysis.write_association_csv(os.path.join(run_dir, "association.csv"), matrix)
        analysis.write_symbol_classes(os.path.join(run_dir, "symbols.csv"), labels, matrix)
        gibberish = analysis.gibberish_success(
            speaker,
            listener,
            world,
            rounds,
            [symbol for symbol, label in labels.items() if label == metrics.GIBBERISH],
            seed=seed,
        )
        if listener.mode == agents.MODE_AT:
            samples = analysis.discrepancy_samples(traces, config.discrepancy_target)
            analysis.write_discrepancy_csv(os.path.join(run_dir, DISCREPANCY_FILE), samples)
    analysis.write_language_table(os.path.join(run_dir, LANGUAGE_FILE), table)
    return RunAnalysis(table, topsim, matrix, labels, samples, gibberish, traces)
