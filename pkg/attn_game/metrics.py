# -*- coding: utf-8 -*-
"""Language metrics
"""

import itertools
import math

import editdistance
import numpy as np
import scipy.special
import scipy.stats

from . import utils

UNFOCUSED = "unfocused"

MONOSEMY = "monosemy"
POLYSEMY = "polysemy"
GIBBERISH = "gibberish"
UNUSED = "unused"


def levenshtein(first, second):
    return int(editdistance.eval(list(first), list(second)))


def cosine_distance(first, second):
    first = np.asarray(first, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    norms = np.linalg.norm(first) * np.linalg.norm(second)
    if norms == 0:
        raise utils.ParamError("Cosine distance of a zero vector")
    return float(1.0 - np.dot(first, second) / norms)


def spearman(xs, ys):
    """Pearson correlation of average ranks"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) != len(ys):
        raise utils.ParamError(
            "Spearman inputs differ in length: %d vs %d" % (len(xs), len(ys))
        )
    if len(xs) < 2:
        raise utils.ParamError("Spearman needs at least two pairs")
    x_ranks = scipy.stats.rankdata(xs, method="average")
    y_ranks = scipy.stats.rankdata(ys, method="average")
    x_ranks -= x_ranks.mean()
    y_ranks -= y_ranks.mean()
    denominator = math.sqrt(np.dot(x_ranks, x_ranks) * np.dot(y_ranks, y_ranks))
    if denominator == 0:
        raise utils.UndefinedCorrelationError("Spearman of a constant input")
    return float(np.clip(np.dot(x_ranks, y_ranks) / denominator, -1.0, 1.0))


class LanguageTable(object):
    """One (object type, message) entry per type"""

    def __init__(self, entries=None):
        self._entries = []
        self._types = set()
        for object_type, message in entries or []:
            self.add(object_type, message)

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def add(self, object_type, message):
        if object_type in self._types:
            raise utils.ParamError("Duplicate language entry for %r" % object_type)
        self._types.add(object_type)
        self._entries.append((object_type, tuple(int(it) for it in message)))

    @property
    def entries(self):
        return self._entries

    @property
    def messages(self):
        return [it[1] for it in self._entries]

    def to_text(self):
        width = max([len(it.label) for it, _ in self._entries] + [len("object")])
        lines = ["%s  message" % "object".ljust(width)]
        for object_type, message in self._entries:
            lines.append(
                "%s  %s" % (object_type.label.ljust(width), " ".join(str(it) for it in message))
            )
        return "\n".join(lines) + "\n"


def pairwise_distances(table):
    object_distances = []
    message_distances = []
    for (first_type, first_message), (second_type, second_message) in itertools.combinations(
        table.entries, 2
    ):
        object_distances.append(
            cosine_distance(first_type.binary_vector, second_type.binary_vector)
        )
        message_distances.append(levenshtein(first_message, second_message))
    return object_distances, message_distances


def topsim(table):
    """Spearman correlation between object and message distances over all pairs"""
    if len(table) < 3:
        raise utils.ParamError("TopSim needs at least 3 object types, got %d" % len(table))
    object_distances, message_distances = pairwise_distances(table)
    if len(set(message_distances)) < 2:
        raise utils.DegenerateLanguageError(
            "All %d message pairs are equally distant" % len(message_distances)
        )
    return spearman(object_distances, message_distances)


def _check_distribution(name, value):
    if value.ndim != 1 or np.any(value < 0) or abs(value.sum() - 1.0) > 1e-6:
        raise utils.ParamError("%s is not a probability vector" % name)


def jsd(p, q):
    """Jensen-Shannon divergence in nats"""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise utils.DimensionError(
            "JSD inputs %s and %s differ"
            % (utils.shape_str(p.shape), utils.shape_str(q.shape))
        )
    _check_distribution("p", p)
    _check_distribution("q", q)
    middle = 0.5 * (p + q)
    value = 0.5 * np.sum(scipy.special.rel_entr(p, middle)) + 0.5 * np.sum(
        scipy.special.rel_entr(q, middle)
    )
    return float(min(max(value, 0.0), math.log(2)))


def attention_discrepancy(speaker_attention, listener_attention):
    """Mean over symbols of the JSD between the two agents' attention rows"""
    speaker_attention = np.asarray(speaker_attention, dtype=np.float64)
    listener_attention = np.asarray(listener_attention, dtype=np.float64)
    if speaker_attention.shape != listener_attention.shape or speaker_attention.ndim != 2:
        raise utils.ParamError(
            "Attention records %s and %s disagree"
            % (
                utils.shape_str(speaker_attention.shape),
                utils.shape_str(listener_attention.shape),
            )
        )
    return float(
        np.mean([jsd(p, q) for p, q in zip(speaker_attention, listener_attention)])
    )


class AssociationMatrix(object):
    """Symbol x concept counts, last column is the unfocused bucket"""

    def __init__(self, vocab_size, num_concepts):
        self._counts = np.zeros((vocab_size, num_concepts + 1), dtype=np.int64)

    @property
    def counts(self):
        return self._counts

    @property
    def vocab_size(self):
        return self._counts.shape[0]

    @property
    def num_concepts(self):
        return self._counts.shape[1] - 1

    @property
    def unfocused(self):
        return self._counts[:, -1]

    def add(self, symbol, concept=None):
        column = self.num_concepts if concept is None else concept
        self._counts[symbol, column] += 1

    def row_sums(self):
        return self._counts.sum(axis=1)

    def header(self):
        return ["symbol"] + [str(it) for it in range(self.num_concepts)] + [UNFOCUSED]

    def rows(self):
        return [[symbol] + [int(it) for it in row] for symbol, row in enumerate(self._counts)]


def center_of_gravity(weights, grid):
    """Attention-weighted mean (row, col) of patch centers"""
    grid_h, grid_w = grid
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (grid_h * grid_w,):
        raise utils.DimensionError(
            "Attention row %s does not cover a %dx%d grid"
            % (utils.shape_str(weights.shape), grid_h, grid_w)
        )
    rows, cols = np.divmod(np.arange(grid_h * grid_w), grid_w)
    return float(np.dot(weights, rows)), float(np.dot(weights, cols))


def box_contains(box, point):
    """Whether ``point`` lies in the patches of ``box``, each patch spanning
    half a unit around its center
    """
    row0, col0, row1, col1 = box
    row, col = point
    return row0 - 0.5 <= row < row1 - 0.5 and col0 - 0.5 <= col < col1 - 0.5


def symbol_concept_map(traces, vocab_size, num_concepts):
    """Count symbol occurrences by the item their attention centers on

    ``traces`` yields (message, attention (T, P), instance) triples.
    """
    matrix = AssociationMatrix(vocab_size, num_concepts)
    for message, attention, instance in traces:
        for symbol, row in zip(message, attention):
            point = center_of_gravity(row, instance.grid)
            hits = [
                value for value, box in instance.boxes.items() if box_contains(box, point)
            ]
            matrix.add(int(symbol), hits[0] if len(hits) == 1 else None)
    return matrix


def classify_symbols(matrix, threshold=0.5, dominance=0.9):
    labels = {}
    for symbol, row in enumerate(matrix.counts):
        total = row.sum()
        focused = row[:-1]
        if not total:
            labels[symbol] = UNUSED
        elif row[-1] / float(total) > threshold:
            labels[symbol] = GIBBERISH
        elif focused.max() >= dominance * focused.sum():
            labels[symbol] = MONOSEMY
        else:
            labels[symbol] = POLYSEMY
    return labels


def ks_statistic(first, second):
    """Two-sample Kolmogorov-Smirnov D with its asymptotic p-value"""
    first = np.sort(np.asarray(first, dtype=np.float64))
    second = np.sort(np.asarray(second, dtype=np.float64))
    if not len(first) or not len(second):
        raise utils.ParamError("KS statistic of an empty sample")
    pooled = np.concatenate([first, second])
    first_cdf = np.searchsorted(first, pooled, side="right") / float(len(first))
    second_cdf = np.searchsorted(second, pooled, side="right") / float(len(second))
    statistic = float(np.max(np.abs(first_cdf - second_cdf)))
    en = math.sqrt(len(first) * len(second) / float(len(first) + len(second)))
    p_value = float(scipy.special.kolmogorov((en + 0.12 + 0.11 / en) * statistic))
    return statistic, min(max(p_value, 0.0), 1.0)


def rank_sum_greater(first, second):
    """One-sided Mann-Whitney p-value for ``first`` tending to exceed ``second``"""
    if not len(first) or not len(second):
        raise utils.ParamError("Rank-sum test of an empty sample")
    return float(
        scipy.stats.mannwhitneyu(first, second, alternative="greater").pvalue
    )
