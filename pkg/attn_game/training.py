# -*- coding: utf-8 -*-
"""Speaker and Listener optimization
"""

import collections
import time

import numpy as np

from . import agents
from . import optim
from . import tensor
from . import utils
from . import world as world_mod

LOG_HEADER = [
    "step",
    "train_acc",
    "policy_loss",
    "entropy",
    "kl",
    "listener_loss",
    "msg_entropy",
    "seconds",
]


def reward(chosen_index, target_index):
    return 1.0 if int(chosen_index) == int(target_index) else 0.0


def batch_rewards(choices, target_index):
    return (np.asarray(choices) == np.asarray(target_index)).astype(np.float64)


class SpeakerLossTerms(object):
    """Batch-averaged speaker loss terms

    ``loss`` is the differentiable combined tensor
    policy + alpha * entropy_term + beta * kl_term, with
    entropy_term = -entropy.
    """

    def __init__(self, loss, policy, entropy, kl, alpha, beta):
        self._loss = loss
        self._policy = policy
        self._entropy = entropy
        self._kl = kl
        self._alpha = alpha
        self._beta = beta

    @property
    def loss(self):
        return self._loss

    @property
    def combined(self):
        return self._loss.item()

    @property
    def policy(self):
        return self._policy

    @property
    def entropy(self):
        return self._entropy

    @property
    def entropy_term(self):
        return -self._entropy

    @property
    def kl(self):
        return self._kl

    @property
    def kl_term(self):
        return self._kl

    @property
    def alpha(self):
        return self._alpha

    @property
    def beta(self):
        return self._beta


def speaker_loss(output, rewards, ema_log_probs, alpha, beta, baseline=False):
    """-r * sum_t log pi(m_t) - alpha * sum_t H_t + beta * sum_t KL(pi || ema)

    ``ema_log_probs`` is a constant array shaped like ``output.log_probs``.
    """
    log_probs = output.log_probs
    if np.shape(ema_log_probs) != log_probs.shape:
        raise utils.DimensionError(
            "EMA distributions %s do not match policy %s"
            % (utils.shape_str(np.shape(ema_log_probs)), utils.shape_str(log_probs.shape))
        )
    rewards = np.asarray(rewards, dtype=np.float64).reshape(-1)
    if baseline and len(rewards) > 1:
        rewards = rewards - np.mean(rewards)
    chosen = tensor.take_along_axis(log_probs, output.message[..., None], axis=-1)
    message_log_prob = tensor.sum(chosen, axis=(1, 2))
    policy = -tensor.mean(message_log_prob * rewards)

    probs = tensor.exp(log_probs)
    entropy = tensor.mean(-tensor.sum(probs * log_probs, axis=(1, 2)))
    kl = tensor.mean(tensor.sum(probs * (log_probs - ema_log_probs), axis=(1, 2)))
    loss = policy - alpha * entropy + beta * kl
    return SpeakerLossTerms(loss, policy.item(), entropy.item(), kl.item(), alpha, beta)


def listener_loss(scores, target_index):
    """Mean cross-entropy of softmax(scores) at the target"""
    scores = tensor.as_tensor(scores)
    target_index = np.asarray(target_index, dtype=np.int64)
    if scores.ndim == 1:
        scores = tensor.reshape(scores, (1, scores.shape[0]))
        target_index = target_index.reshape(1)
    log_probs = tensor.log_softmax(scores, axis=-1)
    picked = tensor.take_along_axis(log_probs, target_index[:, None], axis=-1)
    return -tensor.mean(picked)


def ema_update(shadow, live, decay):
    """shadow <- decay * shadow + (1 - decay) * live, in place per tensor"""
    if set(shadow) != set(live):
        raise utils.ParamError(
            "EMA parameters %s do not match live parameters %s"
            % (sorted(shadow), sorted(live))
        )
    for name, value in shadow.items():
        target = value.data if isinstance(value, tensor.Tensor) else value
        source = live[name]
        source = source.data if isinstance(source, tensor.Tensor) else source
        if target.shape != np.shape(source):
            raise utils.DimensionError(
                "EMA parameter %s has shape %s, live has %s"
                % (name, utils.shape_str(target.shape), utils.shape_str(np.shape(source)))
            )
        target *= decay
        target += (1.0 - decay) * source
    return shadow


class EmaPolicy(object):
    """Speaker clone whose weights track an exponential moving average"""

    def __init__(self, speaker, decay=0.99):
        if not 0.0 <= decay <= 1.0:
            raise utils.ParamError("EMA decay %r outside [0, 1]" % decay)
        self._decay = decay
        self._speaker = agents.create_speaker(
            speaker.architecture, speaker.sizes, speaker.mode, np.random.default_rng(0)
        )
        self._speaker.load_state_dict(speaker.state_dict())

    @property
    def decay(self):
        return self._decay

    @property
    def speaker(self):
        return self._speaker

    @property
    def parameters(self):
        return self._speaker.parameters()

    def update(self, speaker):
        ema_update(self.parameters, speaker.parameters(), self._decay)

    def log_probs(self, patches, message):
        """Teacher-forced step log-distributions of ``message``, no gradient"""
        with tensor.no_grad():
            output = self._speaker(patches, message=message)
        return output.log_probs.data


def message_entropy(messages):
    """Entropy in nats of the empirical distribution of whole messages"""
    counter = collections.Counter(tuple(int(it) for it in message) for message in messages)
    total = float(sum(counter.values()))
    if not total:
        return 0.0
    probs = np.array(list(counter.values())) / total
    return float(-np.sum(probs * np.log(probs)))


class TrainRecord(object):
    def __init__(self, step, train_acc, policy_loss, entropy, kl, listener_loss, msg_entropy, seconds):
        self.step = step
        self.train_acc = train_acc
        self.policy_loss = policy_loss
        self.entropy = entropy
        self.kl = kl
        self.listener_loss = listener_loss
        self.msg_entropy = msg_entropy
        self.seconds = seconds

    def to_row(self):
        return [
            self.step,
            float(self.train_acc),
            float(self.policy_loss),
            float(self.entropy),
            float(self.kl),
            float(self.listener_loss),
            float(self.msg_entropy),
            float(self.seconds),
        ]


class TrainLog(object):
    def __init__(self):
        self._records = []

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    @property
    def records(self):
        return self._records

    @property
    def last(self):
        return self._records[-1] if self._records else None

    def append(self, record):
        if self._records and record.step <= self._records[-1].step:
            raise utils.ParamError(
                "Log step %d after step %d" % (record.step, self._records[-1].step)
            )
        self._records.append(record)

    def write(self, path):
        utils.write_csv(path, LOG_HEADER, [it.to_row() for it in self._records])

    @staticmethod
    def read(path):
        log = TrainLog()
        for row in utils.read_csv(path):
            log.append(
                TrainRecord(
                    int(row["step"]),
                    *[float(row[it]) for it in LOG_HEADER[1:]]
                )
            )
        return log


class IntervalStats(object):
    def __init__(self):
        self.reset()

    def reset(self):
        self.correct = 0.0
        self.episodes = 0
        self.steps = 0
        self.policy = 0.0
        self.entropy = 0.0
        self.kl = 0.0
        self.listener = 0.0
        self.messages = []

    def add(self, rewards, terms, listener_value, messages):
        self.correct += float(np.sum(rewards))
        self.episodes += len(rewards)
        self.steps += 1
        self.policy += terms.policy
        self.entropy += terms.entropy
        self.kl += terms.kl
        self.listener += listener_value
        self.messages.extend(messages)

    def record(self, step, seconds):
        steps = float(max(self.steps, 1))
        return TrainRecord(
            step,
            self.correct / max(self.episodes, 1),
            self.policy / steps,
            self.entropy / steps,
            self.kl / steps,
            self.listener / steps,
            message_entropy(self.messages),
            seconds,
        )


def agent_sizes(config, world):
    return agents.AgentSizes(
        config.vocab_size,
        config.message_length,
        config.hidden_size,
        world.num_patches,
        world.feature_size,
    )


def create_agents(config, world, seed):
    init_rng = np.random.default_rng([seed, 0])
    sizes = agent_sizes(config, world)
    speaker = agents.create_speaker(
        config.architecture, sizes, config.speaker_mode, init_rng
    )
    listener = agents.create_listener(
        config.architecture,
        sizes,
        config.listener_mode,
        init_rng,
        config.listener_attention_scale,
    )
    listener.silence()
    return speaker, listener


def train_step(speaker, listener, ema, batch, rng, alpha, beta, baseline):
    with tensor.Tape() as tape:
        output = speaker(batch.speaker_patches, mode="sample", rng=rng)
        heard = listener(output.message, batch.candidate_patches)
        rewards = batch_rewards(heard.choices, batch.target_index)
        ema_log_probs = ema.log_probs(batch.speaker_patches, output.message)
        terms = speaker_loss(output, rewards, ema_log_probs, alpha, beta, baseline)
        listener_value = listener_loss(heard.scores, batch.target_index)
        total = terms.loss + listener_value
    speaker.zero_grad()
    listener.zero_grad()
    tensor.backward(total, tape)
    return output, rewards, terms, listener_value.item()


def train(config, seed, alpha=None, world=None):
    """Train one Speaker/Listener pair, deterministic under (config, seed)"""
    alpha = config.alphas[0] if alpha is None else alpha
    if world is None:
        world = world_mod.build_world(config.world_spec(), config.world_seed)
    speaker, listener = create_agents(config, world, seed)
    data_rng = np.random.default_rng([seed, 1])
    sample_rng = np.random.default_rng([seed, 2])
    speaker_optimizer = optim.Adam(speaker.parameters(), lr=config.learning_rate)
    listener_optimizer = optim.Adam(listener.parameters(), lr=config.learning_rate)
    ema = EmaPolicy(speaker, config.ema_decay)
    log = TrainLog()
    stats = IntervalStats()
    tag = "[%s][%d]" % (config.setting, seed)
    time0 = time.time()
    utils.logger.info(
        "%s Training %s for %d steps, alpha=%g beta=%g batch=%d"
        % (tag, config.architecture, config.max_steps, alpha, config.beta, config.batch_size)
    )
    for step in range(1, config.max_steps + 1):
        batch = world_mod.sample_batch(
            world,
            world_mod.SPLIT_TRAIN,
            config.num_candidates,
            config.batch_size,
            data_rng,
            config.distractor_source,
        )
        try:
            output, rewards, terms, listener_value = train_step(
                speaker,
                listener,
                ema,
                batch,
                sample_rng,
                alpha,
                config.beta,
                config.reward_baseline,
            )
            if not np.isfinite(terms.combined) or not np.isfinite(listener_value):
                raise utils.NumericError("Non-finite loss")
            speaker_optimizer.step()
            listener_optimizer.step()
        except utils.NumericError as ex:
            diagnostic = {"step": step, "error": str(ex)}
            if stats.steps:
                last = stats.record(step, 0.0)
                diagnostic.update(
                    policy_loss=last.policy_loss,
                    entropy=last.entropy,
                    kl=last.kl,
                    listener_loss=last.listener_loss,
                )
            raise utils.TrainingDivergedError(
                "Training diverged at step %d: %s" % (step, ex), diagnostic
            )
        ema.update(speaker)
        stats.add(rewards, terms, listener_value, output.message)
        utils.logger.verbose(
            "%s step=%d acc=%.3f policy=%.4f entropy=%.4f kl=%.5f listener=%.4f"
            % (
                tag,
                step,
                np.mean(rewards),
                terms.policy,
                terms.entropy,
                terms.kl,
                listener_value,
            )
        )
        if step % config.log_interval == 0 or step == config.max_steps:
            seconds = time.time() - time0 if config.log_timing else 0.0
            record = stats.record(step, seconds)
            log.append(record)
            stats.reset()
            utils.logger.info(
                "%s[%.3f] step %d train_acc=%.4f listener_loss=%.4f msg_entropy=%.3f"
                % (
                    tag,
                    time.time() - time0,
                    step,
                    record.train_acc,
                    record.listener_loss,
                    record.msg_entropy,
                )
            )
    return speaker, listener, log


def evaluate(
    speaker,
    listener,
    world,
    split,
    rounds,
    seed=0,
    num_candidates=15,
    batch_size=500,
    distractor_source="split",
):
    """Fraction of greedy rounds in which the listener picks the target"""
    if rounds < 1:
        raise utils.ParamError("Evaluation needs at least one round")
    rng = np.random.default_rng([seed, 3])
    correct = 0
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
            output = speaker(batch.speaker_patches, mode="greedy")
            choices = listener(output.message, batch.candidate_patches).choices
            correct += int(np.sum(choices == batch.target_index))
    return correct / float(rounds)
