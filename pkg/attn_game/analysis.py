# -*- coding: utf-8 -*-
"""Analysis-mode games over trained agents
"""

import numpy as np

from . import metrics
from . import tensor
from . import utils
from . import world as world_mod

DISCREPANCY_TARGET = "target"
DISCREPANCY_CHOSEN = "chosen"

SHADES = " .:-=+*#%@"


class EpisodeTrace(object):
    """Everything one analysis round produces"""

    def __init__(
        self,
        episode_id,
        episode,
        message,
        step_distributions,
        speaker_attention,
        scores,
        listener_attention,
    ):
        self.episode_id = episode_id
        self.episode = episode
        self.message = message
        self.step_distributions = step_distributions
        self.speaker_attention = speaker_attention
        self.scores = scores
        self.listener_attention = listener_attention

    @property
    def target_index(self):
        return self.episode.target_index

    @property
    def chosen_index(self):
        return int(np.argmax(self.scores))

    @property
    def success(self):
        return self.chosen_index == self.target_index

    @property
    def reward(self):
        return 1.0 if self.success else 0.0

    @property
    def instance(self):
        return self.episode.speaker_instance


class DiscrepancySample(object):
    def __init__(self, episode_id, success, discrepancy):
        self.episode_id = episode_id
        self.success = success
        self.discrepancy = discrepancy

    def to_row(self):
        return [self.episode_id, int(self.success), float(self.discrepancy)]


def collect_traces(
    speaker,
    listener,
    world,
    split,
    rounds,
    seed=0,
    num_candidates=15,
    same_instance=True,
    batch_size=500,
    distractor_source="split",
):
    """Greedy rounds with full attention records

    With ``same_instance`` the listener's target candidate is the speaker's
    own rendering, so both agents attend over identical patches.
    """
    rng = np.random.default_rng([seed, 4])
    traces = []
    with tensor.no_grad():
        for start in range(0, rounds, batch_size):
            batch = world_mod.sample_batch(
                world,
                split,
                num_candidates,
                min(batch_size, rounds - start),
                rng,
                distractor_source,
            )
            if same_instance:
                batch.share_target_instance()
            spoken = speaker(batch.speaker_patches, mode="greedy")
            heard = listener(spoken.message, batch.candidate_patches)
            distributions = spoken.step_distributions
            for i, episode in enumerate(batch.episodes):
                traces.append(
                    EpisodeTrace(
                        start + i,
                        episode,
                        spoken.message[i],
                        distributions[i],
                        spoken.attention[i],
                        heard.scores.data[i],
                        heard.attention[i],
                    )
                )
    return traces


def discrepancy_samples(traces, target=DISCREPANCY_TARGET):
    if target not in (DISCREPANCY_TARGET, DISCREPANCY_CHOSEN):
        raise utils.ConfigError(
            "Unknown discrepancy target %s" % target, ["discrepancy_target"]
        )
    samples = []
    for trace in traces:
        index = trace.target_index if target == DISCREPANCY_TARGET else trace.chosen_index
        samples.append(
            DiscrepancySample(
                trace.episode_id,
                trace.success,
                metrics.attention_discrepancy(
                    trace.speaker_attention, trace.listener_attention[index]
                ),
            )
        )
    return samples


def split_by_outcome(samples):
    success = [it.discrepancy for it in samples if it.success]
    failure = [it.discrepancy for it in samples if not it.success]
    return success, failure


def association_traces(traces):
    return [(it.message, it.speaker_attention, it.instance) for it in traces]


def language_table(speaker, world, seed=0, types=None):
    """Greedy message for one rendering of every type"""
    rng = np.random.default_rng([seed, 5])
    types = world.universe if types is None else types
    instances = [world_mod.render_instance(it, world, rng) for it in types]
    with tensor.no_grad():
        spoken = speaker(np.stack([it.patches for it in instances]), mode="greedy")
    return metrics.LanguageTable(zip(types, spoken.message))


class GibberishReport(object):
    def __init__(self, rounds, successes, gibberish_rounds, gibberish_successes):
        self.rounds = rounds
        self.successes = successes
        self.gibberish_rounds = gibberish_rounds
        self.gibberish_successes = gibberish_successes

    @property
    def success_rate(self):
        return self.successes / float(self.rounds) if self.rounds else 0.0

    @property
    def gibberish_rate(self):
        if not self.gibberish_rounds:
            return None
        return self.gibberish_successes / float(self.gibberish_rounds)

    @property
    def clean_rate(self):
        clean_rounds = self.rounds - self.gibberish_rounds
        if not clean_rounds:
            return None
        return (self.successes - self.gibberish_successes) / float(clean_rounds)


def gibberish_success(
    speaker, listener, world, rounds, gibberish_symbols, seed=0, batch_size=100
):
    """Success with every universe type as a candidate, split by gibberish use"""
    gibberish_symbols = set(int(it) for it in gibberish_symbols)
    traces = collect_traces(
        speaker,
        listener,
        world,
        world_mod.SPLIT_UNIVERSE,
        rounds,
        seed=seed,
        num_candidates=len(world.universe),
        same_instance=False,
        batch_size=batch_size,
    )
    successes = gibberish_rounds = gibberish_successes = 0
    for trace in traces:
        has_gibberish = bool(gibberish_symbols.intersection(int(it) for it in trace.message))
        successes += trace.success
        if has_gibberish:
            gibberish_rounds += 1
            gibberish_successes += trace.success
    return GibberishReport(len(traces), successes, gibberish_rounds, gibberish_successes)


def render_attention(weights, grid):
    """Text heat map of one attention row over the patch grid"""
    grid_h, grid_w = grid
    weights = np.asarray(weights, dtype=np.float64).reshape(grid_h, grid_w)
    peak = weights.max()
    lines = []
    for row in weights:
        cells = []
        for value in row:
            level = 0 if peak <= 0 else int(round(value / peak * (len(SHADES) - 1)))
            cells.append(SHADES[level])
        lines.append("|%s|" % "".join(cells))
    return "\n".join(lines)


def write_discrepancy_csv(path, samples):
    utils.write_csv(
        path, ["episode", "success", "discrepancy"], [it.to_row() for it in samples]
    )


def read_discrepancy_csv(path):
    return [
        DiscrepancySample(int(row["episode"]), row["success"] == "1", float(row["discrepancy"]))
        for row in utils.read_csv(path)
    ]


def write_association_csv(path, matrix):
    utils.write_csv(path, matrix.header(), matrix.rows())


def write_symbol_classes(path, labels, matrix):
    rows = []
    for symbol in sorted(labels):
        rows.append([symbol, labels[symbol], int(matrix.row_sums()[symbol])])
    utils.write_csv(path, ["symbol", "class", "occurrences"], rows)


def write_language_table(path, table):
    with open(path, "w", encoding="utf-8", newline="") as fp:
        fp.write(table.to_text())
