"""DDPG agent that picks IRS phases from the previous step's SINRs and reward.

The environment state is the 3-vector ``(gamma_1, gamma_2, reward)`` of the
previous time step. Every step draws a fresh channel realization, the actor
proposes all M+N phases at once, and the reward is either the desired user's
received power in dB (``desired_user``) or the sum rate (``sum_rate``).

The critic sees ``[features(s), a / pi - 1]``; for noiseless actions the
second block is exactly the actor's tanh output, which keeps the action
chain rule a single scalar factor.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import metrics
from .channel import ChannelRealization, RngStream
from .errors import ConfigValueError, ShapeError
from .linkbudget import LinkBudget
from .metrics import PhaseConfig
from .neuralnet import (
    AdamState,
    MlpParams,
    adam_from_dict,
    adam_step,
    adam_to_dict,
    backward,
    forward,
    mlp_init,
    params_from_dict,
    params_to_dict,
    soft_update,
)
from .numerics import wrap_to_2pi

OBJECTIVES = ("desired_user", "sum_rate")

# stream ids under the training seed; channel trials use small ids per trial
_STREAM_ACTOR, _STREAM_CRITIC, _STREAM_ENV, _STREAM_RESET, _STREAM_OU, _STREAM_REPLAY = (
    2**40 + i for i in range(6)
)
_LINK_EVAL_RESET = 15  # per-trial stream for the evaluation start state


@dataclass
class TrainConfig:
    objective: str = "sum_rate"
    episodes: int = 10_000
    steps_per_episode: int = 50
    batch_size: int = 128
    buffer_capacity: int = 100_000
    gamma: float = 0.99
    tau: float = 1e-3
    actor_lr: float = 1e-4
    critic_lr: float = 3e-4
    hidden: int = 128
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    reward_offset_db: float = 100.0  # added to P_rx in dBm for the desired-user reward
    state_transform: str = "log1p"  # "log1p" | "raw" applied to the SINR slots
    user: int = 0  # desired user for the desired_user objective
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ConfigValueError("objective", f"must be one of {OBJECTIVES}, got {self.objective!r}")
        for name in ("episodes", "steps_per_episode", "batch_size", "buffer_capacity", "hidden"):
            if not int(getattr(self, name)) >= 1:
                raise ConfigValueError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.buffer_capacity < self.batch_size:
            raise ConfigValueError("buffer_capacity", "must be >= batch_size")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigValueError("gamma", f"must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigValueError("tau", f"must lie in (0, 1], got {self.tau}")
        for name in ("actor_lr", "critic_lr"):
            if not getattr(self, name) > 0:
                raise ConfigValueError(name, f"must be > 0, got {getattr(self, name)}")
        if self.ou_theta < 0 or self.ou_sigma < 0:
            raise ConfigValueError("ou_sigma" if self.ou_sigma < 0 else "ou_theta", "must be >= 0")
        if self.state_transform not in ("log1p", "raw"):
            raise ConfigValueError("state_transform", f"must be 'log1p' or 'raw', got {self.state_transform!r}")
        if self.user not in (0, 1):
            raise ConfigValueError("user", f"must be 0 or 1, got {self.user}")

    def replace(self, **changes) -> "TrainConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return TrainConfig(**values)


# --- environment ----------------------------------------------------------------


@dataclass(frozen=True)
class EnvState:
    gamma1_prev: float
    gamma2_prev: float
    reward_prev: float

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma1_prev, self.gamma2_prev, self.reward_prev])


@dataclass(frozen=True)
class StepOutcome:
    state: EnvState
    reward: float
    phases: PhaseConfig
    sinr: np.ndarray
    p_rx: np.ndarray


def features(states: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    """Network input for one ``(3,)`` state or a ``(B, 3)`` batch."""
    s = np.array(states, dtype=float)
    if cfg.state_transform == "log1p":
        s[..., :2] = np.log1p(s[..., :2])
    return s


def objective_reward(p_rx: np.ndarray, sinr: np.ndarray, cfg: TrainConfig) -> float:
    if cfg.objective == "sum_rate":
        return metrics.sum_rate(sinr)
    # watts -> dBm, shifted so typical rewards are order one
    return 10.0 * math.log10(max(float(p_rx[cfg.user]), 1e-300) * 1e3) + cfg.reward_offset_db


def evaluate_action(lb: LinkBudget, ch: ChannelRealization, phases: PhaseConfig, cfg: TrainConfig) -> StepOutcome:
    p = metrics.received_powers(ch, phases, lb.losses, lb.tx_power, lb.alpha)
    g = metrics.sinrs(p, lb.noise)
    r = objective_reward(p, g, cfg)
    return StepOutcome(EnvState(float(g[0]), float(g[1]), r), r, phases, g, p)


def env_reset(lb: LinkBudget, cfg: TrainConfig, rng) -> EnvState:
    """Fresh channel, uniformly random phases; their outcome is the first state."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    ch = lb.channel.draw(gen)
    phases = PhaseConfig(gen.uniform(0.0, 2 * np.pi, lb.cfg.m), gen.uniform(0.0, 2 * np.pi, lb.cfg.n))
    return evaluate_action(lb, ch, phases, cfg).state


def env_step(state: EnvState, action, lb: LinkBudget, cfg: TrainConfig, rng) -> tuple[EnvState, float]:
    """Apply ``action`` on a newly drawn channel; returns ``(next_state, reward)``."""
    out = env_step_full(action, lb, cfg, rng)
    return out.state, out.reward


def env_step_full(action, lb: LinkBudget, cfg: TrainConfig, rng) -> StepOutcome:
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    action = np.asarray(action, dtype=float)
    m, n = lb.cfg.m, lb.cfg.n
    if action.shape != (m + n,):
        raise ShapeError(f"action has shape {action.shape}, expected ({m + n},)")
    if not np.all(np.isfinite(action)):
        raise ShapeError("action has non-finite entries")
    ch = lb.channel.draw(gen)
    return evaluate_action(lb, ch, PhaseConfig.from_vector(action, m), cfg)


# --- exploration ------------------------------------------------------------------


@dataclass
class OuNoise:
    x: np.ndarray
    theta: float = 0.15
    sigma: float = 0.2
    mu: float = 0.0

    @classmethod
    def zeros(cls, size: int, theta: float = 0.15, sigma: float = 0.2) -> "OuNoise":
        return cls(np.zeros(size), theta, sigma)

    def reset(self) -> None:
        self.x = np.zeros_like(self.x)


def ou_step(noise: OuNoise, rng) -> np.ndarray:
    """Advance ``x <- x + theta (mu - x) + sigma g`` in place and return a copy."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    noise.x = noise.x + noise.theta * (noise.mu - noise.x) + noise.sigma * gen.standard_normal(noise.x.shape)
    return noise.x.copy()


# --- replay -------------------------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    state: EnvState
    action: np.ndarray
    reward: float
    next_state: EnvState


@dataclass
class Batch:
    states: np.ndarray  # (B, 3)
    actions: np.ndarray  # (B, A) in [0, 2 pi)
    rewards: np.ndarray  # (B,)
    next_states: np.ndarray  # (B, 3)


class ReplayBuffer:
    """Fixed-capacity ring; once full, each insert overwrites the oldest entry."""

    def __init__(self, capacity: int, action_dim: int):
        if capacity < 1:
            raise ConfigValueError("buffer_capacity", f"must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.action_dim = int(action_dim)
        self.states = np.zeros((capacity, 3))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, 3))
        self.size = 0
        self.head = 0  # next write position
        self.inserted = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        a = np.asarray(t.action, dtype=float)
        if a.shape != (self.action_dim,):
            raise ShapeError(f"action has shape {a.shape}, expected ({self.action_dim},)")
        i = self.head
        self.states[i] = t.state.as_array()
        self.actions[i] = a
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state.as_array()
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserted += 1

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        start = self.head if self.size == self.capacity else 0
        order = [(start + j) % self.capacity for j in range(self.size)]
        return [
            Transition(EnvState(*self.states[i]), self.actions[i].copy(), float(self.rewards[i]),
                       EnvState(*self.next_states[i]))
            for i in order
        ]

    def sample(self, batch_size: int, rng) -> Batch:
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        idx = gen.integers(0, self.size, batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])


# --- agent ----------------------------------------------------------------------------


@dataclass
class Agent:
    actor: MlpParams
    critic: MlpParams
    actor_target: MlpParams
    critic_target: MlpParams
    actor_opt: AdamState
    critic_opt: AdamState

    @property
    def action_dim(self) -> int:
        return self.actor.sizes[-1]


def make_agent(action_dim: int, cfg: TrainConfig) -> Agent:
    h = cfg.hidden
    actor = mlp_init([3, h, h, action_dim], ["relu", "relu", "tanh"], RngStream(cfg.seed, _STREAM_ACTOR))
    critic = mlp_init([3 + action_dim, h, h, 1], ["relu", "relu", "linear"], RngStream(cfg.seed, _STREAM_CRITIC))
    return Agent(actor, critic, actor.copy(), critic.copy(), AdamState.fresh(actor), AdamState.fresh(critic))


def action_from_output(y: np.ndarray) -> np.ndarray:
    """Map tanh outputs in (-1, 1) to phases ``pi (y + 1)``."""
    return np.pi * (np.asarray(y) + 1.0)


def agent_act(actor: MlpParams, state: EnvState, noise: OuNoise | None = None,
              rng=None, cfg: TrainConfig | None = None) -> np.ndarray:
    """Phase vector in [0, 2 pi). With ``noise`` given, one OU step is added."""
    cfg = cfg or TrainConfig()
    if actor.sizes[0] != 3:
        raise ShapeError(f"actor takes {actor.sizes[0]} inputs, the state has 3")
    y, _ = forward(actor, features(state.as_array(), cfg))
    a = action_from_output(y)
    if noise is not None:
        if noise.x.shape != a.shape:
            raise ShapeError(f"noise has shape {noise.x.shape}, action {a.shape}")
        a = a + ou_step(noise, rng)
    return wrap_to_2pi(np.atleast_1d(a))


def critic_input(states: np.ndarray, action_feat: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    return np.concatenate([features(states, cfg), action_feat], axis=-1)


def policy_gradient(actor: MlpParams, critic: MlpParams, states: np.ndarray, cfg: TrainConfig):
    """``J = mean_b Q(s_b, mu(s_b))`` and ``dJ/d(actor params)``."""
    y, a_cache = forward(actor, features(states, cfg))
    q, c_cache = forward(critic, critic_input(states, y, cfg))
    b = q.shape[0]
    _, dx = backward(critic, c_cache, np.full_like(q, 1.0 / b), param_grads=False)
    grads, _ = backward(actor, a_cache, dx[:, 3:], input_grad=False)
    return float(q.mean()), grads


def bellman_targets(agent: Agent, batch: Batch, cfg: TrainConfig) -> np.ndarray:
    if cfg.gamma == 0.0:
        return batch.rewards.copy()
    y2, _ = forward(agent.actor_target, features(batch.next_states, cfg))
    q2, _ = forward(agent.critic_target, critic_input(batch.next_states, y2, cfg))
    return batch.rewards + cfg.gamma * q2[:, 0]


def critic_loss_and_grad(critic: MlpParams, batch: Batch, targets: np.ndarray, cfg: TrainConfig):
    q, cache = forward(critic, critic_input(batch.states, batch.actions / np.pi - 1.0, cfg))
    err = q[:, 0] - targets
    loss = float(np.mean(err**2))
    grads, _ = backward(critic, cache, (2.0 / err.size) * err[:, None], input_grad=False)
    return loss, grads


def train_step(agent: Agent, batch: Batch, cfg: TrainConfig) -> tuple[float, float]:
    """Critic regression, actor ascent, then soft target updates (in place).

    Returns ``(critic_loss, actor_objective)`` where the loss is measured
    before the critic update and the objective after it.
    """
    if batch.states.shape[0] != cfg.batch_size:
        raise ShapeError(f"batch has {batch.states.shape[0]} rows, config says {cfg.batch_size}")
    if batch.actions.shape[1] != agent.action_dim:
        raise ShapeError(f"batch actions have width {batch.actions.shape[1]}, agent emits {agent.action_dim}")
    targets = bellman_targets(agent, batch, cfg)
    loss, c_grads = critic_loss_and_grad(agent.critic, batch, targets, cfg)
    agent.critic, agent.critic_opt = adam_step(agent.critic, c_grads, agent.critic_opt, cfg.critic_lr)
    j, a_grads = policy_gradient(agent.actor, agent.critic, batch.states, cfg)
    # ascend J: descend on -J
    neg = a_grads.with_arrays([-g for g in a_grads.arrays()])
    agent.actor, agent.actor_opt = adam_step(agent.actor, neg, agent.actor_opt, cfg.actor_lr)
    agent.critic_target = soft_update(agent.critic_target, agent.critic, cfg.tau)
    agent.actor_target = soft_update(agent.actor_target, agent.actor, cfg.tau)
    return loss, j


# --- training loop ---------------------------------------------------------------------


@dataclass
class TrainResult:
    agent: Agent
    rewards: np.ndarray  # per-episode mean reward
    critic_losses: list = field(default_factory=list)  # per-episode mean, nan before learning starts
    rng_states: dict = field(default_factory=dict)


def _generators(seed: int) -> dict:
    return {
        "env": RngStream(seed, _STREAM_ENV).generator(),
        "reset": RngStream(seed, _STREAM_RESET).generator(),
        "ou": RngStream(seed, _STREAM_OU).generator(),
        "replay": RngStream(seed, _STREAM_REPLAY).generator(),
    }


def train(cfg: TrainConfig, lb: LinkBudget, progress=None) -> TrainResult:
    """Run the full act / step / store / learn loop.

    ``progress`` is an optional callback ``(episode, mean_reward)``.
    """
    m, n = lb.cfg.m, lb.cfg.n
    agent = make_agent(m + n, cfg)
    gens = _generators(cfg.seed)
    buf = ReplayBuffer(cfg.buffer_capacity, m + n)
    noise = OuNoise.zeros(m + n, cfg.ou_theta, cfg.ou_sigma)
    rewards = np.zeros(cfg.episodes)
    losses = []
    for ep in range(cfg.episodes):
        state = env_reset(lb, cfg, gens["reset"])
        noise.reset()
        total = 0.0
        ep_losses = []
        for _ in range(cfg.steps_per_episode):
            action = agent_act(agent.actor, state, noise, gens["ou"], cfg)
            nxt, reward = env_step(state, action, lb, cfg, gens["env"])
            buf.add(Transition(state, action, reward, nxt))
            total += reward
            state = nxt
            if len(buf) >= cfg.batch_size:
                loss, _ = train_step(agent, buf.sample(cfg.batch_size, gens["replay"]), cfg)
                ep_losses.append(loss)
        rewards[ep] = total / cfg.steps_per_episode
        losses.append(float(np.mean(ep_losses)) if ep_losses else float("nan"))
        if progress is not None:
            progress(ep, rewards[ep])
    return TrainResult(agent, rewards, losses, {k: _plain(g.bit_generator.state) for k, g in gens.items()})


def _plain(obj):
    """Bit-generator state with arrays turned into lists (JSON-safe, comparable)."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def moving_average(x, window: int = 100) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    x = np.asarray(x, dtype=float)
    c = np.cumsum(np.insert(x, 0, 0.0))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def convergence_gain(rewards, window: int = 100, fraction: float = 0.1) -> float:
    """Relative improvement of the moving average, last ``fraction`` vs first."""
    ma = moving_average(rewards, window)
    k = max(1, int(round(fraction * ma.size)))
    first, last = float(ma[:k].mean()), float(ma[-k:].mean())
    return (last - first) / abs(first) if first != 0 else math.inf


# --- evaluation ---------------------------------------------------------------------------


def eval_start_state(lb: LinkBudget, ch: ChannelRealization, cfg: TrainConfig, seed: int, trial: int) -> EnvState:
    """State the frozen policy sees on ``trial``: random phases on that trial's channel."""
    gen = RngStream.for_trial(seed, trial, _LINK_EVAL_RESET).generator()
    phases = PhaseConfig(gen.uniform(0.0, 2 * np.pi, lb.cfg.m), gen.uniform(0.0, 2 * np.pi, lb.cfg.n))
    return evaluate_action(lb, ch, phases, cfg).state


def policy_phases(actor: MlpParams, lb: LinkBudget, ch: ChannelRealization, cfg: TrainConfig,
                  seed: int, trial: int) -> PhaseConfig:
    """Noiseless action of ``actor`` on Monte-Carlo ``trial``; independent of other trials."""
    state = eval_start_state(lb, ch, cfg, seed, trial)
    return PhaseConfig.from_vector(agent_act(actor, state, None, None, cfg), lb.cfg.m)


# --- persistence ---------------------------------------------------------------------------


def save_checkpoint(path, result: TrainResult, cfg: TrainConfig) -> None:
    a = result.agent
    data = {}
    for name, net in (("actor", a.actor), ("critic", a.critic),
                      ("actor_target", a.actor_target), ("critic_target", a.critic_target)):
        data.update(params_to_dict(net, f"{name}."))
    data.update(adam_to_dict(a.actor_opt, "actor_opt."))
    data.update(adam_to_dict(a.critic_opt, "critic_opt."))
    data["rewards"] = result.rewards
    data["train_config"] = np.array(json.dumps(asdict(cfg), sort_keys=True))
    data["rng_states"] = np.array(json.dumps(result.rng_states, sort_keys=True))
    with open(Path(path), "wb") as fh:
        np.savez(fh, **data)


def load_checkpoint(path) -> tuple[TrainResult, TrainConfig]:
    with np.load(Path(path), allow_pickle=False) as data:
        nets = {name: params_from_dict(data, f"{name}.")
                for name in ("actor", "critic", "actor_target", "critic_target")}
        agent = Agent(
            nets["actor"], nets["critic"], nets["actor_target"], nets["critic_target"],
            adam_from_dict(data, 2 * len(nets["actor"].layers), "actor_opt."),
            adam_from_dict(data, 2 * len(nets["critic"].layers), "critic_opt."),
        )
        cfg = TrainConfig(**json.loads(str(data["train_config"])))
        result = TrainResult(agent, np.array(data["rewards"]), [], json.loads(str(data["rng_states"])))
    return result, cfg


def write_reward_csv(path, rewards) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "mean_reward"])
        for i, r in enumerate(rewards):
            w.writerow([i, repr(float(r))])
