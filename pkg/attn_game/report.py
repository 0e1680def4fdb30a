# -*- coding: utf-8 -*-
"""Plot data for sweeps
"""

import collections
import math
import os

import numpy as np

from . import analysis
from . import metrics
from . import runner
from . import utils

METRICS = ("train_acc", "gen_acc", "topsim")

# Order of the four attention settings, speaker first
SETTING_ORDER = ("noat-noat", "at-noat", "noat-at", "at-at")

HISTOGRAM_BINS = 20


def setting_key(group):
    architecture, setting = group
    order = SETTING_ORDER.index(setting) if setting in SETTING_ORDER else len(SETTING_ORDER)
    return architecture, order, setting


def group_results(results):
    groups = collections.OrderedDict()
    for result in results:
        groups.setdefault(result.group, []).append(result)
    return collections.OrderedDict(
        (key, groups[key]) for key in sorted(groups, key=setting_key)
    )


def box_summary(values):
    """(min, q1, median, q3, max) with linear-interpolated quartiles"""
    values = np.asarray(values, dtype=np.float64)
    if not len(values):
        raise utils.ParamError("Box summary of an empty group")
    return tuple(float(it) for it in np.percentile(values, [0, 25, 50, 75, 100]))


def metric_values(results, metric):
    return [
        getattr(it, metric)
        for it in results
        if it.status == runner.STATUS_OK and getattr(it, metric) is not None
    ]


def normalized_histogram(values, edges):
    if not len(values):
        return np.zeros(len(edges) - 1)
    counts, _ = np.histogram(np.clip(values, edges[0], edges[-1]), bins=edges)
    return counts / float(len(values))


class Report(object):
    def __init__(self, out_dir):
        self._out_dir = utils.ensure_dir(out_dir)
        self._warnings = []
        self._files = []

    @property
    def warnings(self):
        return self._warnings

    @property
    def files(self):
        return self._files

    def path(self, name):
        path = os.path.join(self._out_dir, name)
        self._files.append(path)
        return path

    def warn(self, scope, message):
        utils.logger.warning("[%s] %s: %s" % (self.__class__.__name__, scope, message))
        self._warnings.append([scope, message])

    def write_metric(self, groups, metric):
        rows = []
        box_rows = []
        for (architecture, setting), results in groups.items():
            values = []
            for result in results:
                value = getattr(result, metric)
                if result.status != runner.STATUS_OK or value is None:
                    continue
                values.append(value)
                rows.append([architecture, setting, result.seed, float(result.alpha), float(value)])
            if not values:
                self.warn("%s/%s" % (architecture, setting), "no %s values, skipped" % metric)
                continue
            box_rows.append([architecture, setting, len(values)] + list(box_summary(values)))
        utils.write_csv(
            self.path("%s.csv" % metric),
            ["architecture", "setting", "seed", "alpha", "value"],
            rows,
        )
        utils.write_csv(
            self.path("%s_box.csv" % metric),
            ["architecture", "setting", "count", "min", "q1", "median", "q3", "max"],
            box_rows,
        )
        return box_rows

    def write_discrepancy(self, groups):
        edges = np.linspace(0.0, math.log(2), HISTOGRAM_BINS + 1)
        rows = []
        ks_rows = []
        pooled = collections.OrderedDict()
        for (architecture, setting), results in groups.items():
            samples = []
            for result in results:
                path = os.path.join(result.run_dir or "", runner.DISCREPANCY_FILE)
                if result.run_dir and os.path.isfile(path):
                    samples.extend(analysis.read_discrepancy_csv(path))
            if not samples:
                continue
            success, failure = analysis.split_by_outcome(samples)
            pooled[(architecture, setting)] = (success, failure)
            success_freq = normalized_histogram(success, edges)
            failure_freq = normalized_histogram(failure, edges)
            for i in range(HISTOGRAM_BINS):
                rows.append(
                    [
                        architecture,
                        setting,
                        float(edges[i]),
                        float(edges[i + 1]),
                        float(success_freq[i]),
                        float(failure_freq[i]),
                    ]
                )
            if success and failure:
                statistic, p_value = metrics.ks_statistic(success, failure)
                ks_rows.append(
                    [
                        architecture,
                        setting,
                        len(success),
                        len(failure),
                        float(np.mean(success)),
                        float(np.mean(failure)),
                        statistic,
                        p_value,
                    ]
                )
            else:
                self.warn(
                    "%s/%s" % (architecture, setting),
                    "discrepancy needs both successful and failed episodes",
                )
        utils.write_csv(
            self.path("discrepancy_hist.csv"),
            ["architecture", "setting", "bin_low", "bin_high", "success_freq", "failure_freq"],
            rows,
        )
        utils.write_csv(
            self.path("discrepancy_ks.csv"),
            [
                "architecture",
                "setting",
                "success_count",
                "failure_count",
                "success_mean",
                "failure_mean",
                "ks_d",
                "ks_p",
            ],
            ks_rows,
        )
        return pooled

    def write_comparison(self, groups):
        """Per metric and architecture: mean per setting, AT-AT over NoAT-NoAT p-value"""
        rows = []
        architectures = sorted(set(it[0] for it in groups))
        for metric in METRICS:
            for architecture in architectures:
                row = [metric, architecture]
                for setting in SETTING_ORDER:
                    values = metric_values(groups.get((architecture, setting), []), metric)
                    row.append(float(np.mean(values)) if values else None)
                attended = metric_values(groups.get((architecture, "at-at"), []), metric)
                plain = metric_values(groups.get((architecture, "noat-noat"), []), metric)
                row.append(
                    metrics.rank_sum_greater(attended, plain) if attended and plain else None
                )
                rows.append(row)
        utils.write_csv(
            self.path("comparison.csv"),
            ["metric", "architecture"]
            + ["mean_%s" % it for it in SETTING_ORDER]
            + ["p_at_at_greater"],
            rows,
        )
        return rows

    def write_warnings(self):
        utils.write_csv(self.path("warnings.csv"), ["scope", "message"], self._warnings)

    def render_svg(self, groups, pooled):
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            self.warn("svg", "matplotlib not installed, SVG rendering skipped")
            return False

        labels = ["%s\n%s" % key for key in groups]
        for metric in METRICS:
            data = [metric_values(results, metric) for results in groups.values()]
            keep = [i for i, it in enumerate(data) if it]
            if not keep:
                continue
            figure, axes = plt.subplots(figsize=(1.6 * len(keep) + 2, 4))
            axes.boxplot([data[i] for i in keep])
            axes.set_xticks(range(1, len(keep) + 1))
            axes.set_xticklabels([labels[i] for i in keep])
            axes.set_ylabel(metric)
            figure.tight_layout()
            figure.savefig(self.path("%s.svg" % metric))
            plt.close(figure)

        edges = np.linspace(0.0, math.log(2), HISTOGRAM_BINS + 1)
        for (architecture, setting), (success, failure) in pooled.items():
            figure, axes = plt.subplots(figsize=(5, 3.5))
            width = edges[1] - edges[0]
            axes.bar(
                edges[:-1],
                normalized_histogram(success, edges),
                width=width,
                align="edge",
                alpha=0.6,
                label="success",
            )
            axes.bar(
                edges[:-1],
                normalized_histogram(failure, edges),
                width=width,
                align="edge",
                alpha=0.6,
                label="failure",
            )
            axes.set_xlabel("attention discrepancy")
            axes.set_ylabel("frequency")
            axes.legend()
            figure.tight_layout()
            figure.savefig(self.path("discrepancy_%s_%s.svg" % (architecture, setting)))
            plt.close(figure)
        return True


def emit_plots(results, out_dir, svg=True):
    """Write per-metric, box, histogram and comparison CSVs; SVGs when possible"""
    report = Report(out_dir)
    groups = group_results(results)
    for metric in METRICS:
        report.write_metric(groups, metric)
    pooled = report.write_discrepancy(groups)
    report.write_comparison(groups)
    if svg:
        report.render_svg(groups, pooled)
    report.write_warnings()
    utils.logger.info(
        "[%s] Wrote %d files to %s" % (report.__class__.__name__, len(report.files), out_dir)
    )
    return report


def report_sweep(sweep_dir, top_k=None, out_dir=None, svg=True):
    """Load a sweep, keep the top-k runs of every setting and emit plot data"""
    results = runner.load_results(sweep_dir)
    if top_k:
        selected = []
        for group, members in group_results(results).items():
            if len(members) < top_k:
                utils.logger.warning(
                    "[Report] %s/%s has %d runs, fewer than top %d"
                    % (group[0], group[1], len(members), top_k)
                )
            selected.extend(runner.select_top_k(members, min(top_k, len(members))))
        results = selected
    return emit_plots(results, out_dir or os.path.join(sweep_dir, "report"), svg=svg)
