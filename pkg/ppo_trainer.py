"""
Обучение политики PPO: сбор роллаутов, GAE и обновление по обрезанной суррогатной цели
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

import storage
from config import EnvConfig, PpoConfig, RunConfig
from environment import N_ACTIONS, OBSERVATION_SIZE, LulcEnv
from errors import CheckpointError, NonFiniteLoss
from neural import (
    Actor,
    AdamState,
    CategoricalDist,
    Critic,
    MlpParams,
    adam_update,
    architecture_descriptor,
    backward,
    forward,
    sample,
)
from rng import XorShift64Star
from runoff import CoefficientTable, LulcGrid

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.json"
STATS_NAME = "stats.csv"
ADVANTAGE_EPS = 1e-8


@dataclass
class RolloutBuffer:
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    masks: np.ndarray
    bootstrap_value: float = 0.0
    episode_runoffs: List[float] = field(default_factory=list)
    last_runoff: float = 0.0

    def __len__(self):
        return len(self.rewards)


@dataclass
class TrainStats:
    update: int
    mean_reward: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    final_episode_runoff_m3_per_s: float

    def as_row(self) -> Dict:
        return {column: getattr(self, column) for column in storage.STATS_COLUMNS}


def collect_rollout(env: LulcEnv, actor: Actor, critic: Critic, horizon: int,
                    rng: XorShift64Star) -> RolloutBuffer:
    """
    horizon шагов среды с маскированными сэмплированными действиями;
    после done среда сбрасывается, эпизоды продолжаются между вызовами
    """
    if horizon < 1:
        raise ValueError(f"Горизонт роллаута должен быть >= 1: {horizon}")
    if env.state is None or env.state.done:
        _, obs = env.reset()
    else:
        obs = env.observe()

    observations = np.zeros((horizon, OBSERVATION_SIZE), dtype=np.float64)
    actions = np.zeros(horizon, dtype=np.int64)
    log_probs = np.zeros(horizon, dtype=np.float64)
    rewards = np.zeros(horizon, dtype=np.float64)
    dones = np.zeros(horizon, dtype=bool)
    masks = np.zeros((horizon, N_ACTIONS), dtype=bool)
    episode_runoffs = []

    for t in range(horizon):
        mask = env.action_mask()
        action, log_prob = sample(actor.distribution(obs, mask), rng)
        observations[t] = obs
        masks[t] = mask
        actions[t] = action
        log_probs[t] = log_prob
        state, obs, reward, done = env.step(action)
        rewards[t] = reward
        dones[t] = done
        if done:
            episode_runoffs.append(state.current_runoff_m3_per_s)
            _, obs = env.reset()

    values = critic.value(observations)
    bootstrap = 0.0 if dones[-1] else critic.value(obs)
    return RolloutBuffer(
        observations=observations,
        actions=actions,
        log_probs=log_probs,
        rewards=rewards,
        values=np.asarray(values, dtype=np.float64),
        dones=dones,
        masks=masks,
        bootstrap_value=float(bootstrap),
        episode_runoffs=episode_runoffs,
        last_runoff=env.state.current_runoff_m3_per_s,
    )


def compute_gae(buffer: RolloutBuffer, gamma: float, gae_lambda: float) -> Tuple[np.ndarray, np.ndarray]:
    """Обобщенная оценка преимущества; нормализация делается перед обновлением"""
    horizon = len(buffer)
    advantages = np.zeros(horizon, dtype=np.float64)
    last = 0.0
    for t in range(horizon - 1, -1, -1):
        next_value = buffer.bootstrap_value if t == horizon - 1 else buffer.values[t + 1]
        nonterminal = 0.0 if buffer.dones[t] else 1.0
        delta = buffer.rewards[t] + gamma * next_value * nonterminal - buffer.values[t]
        last = delta + gamma * gae_lambda * nonterminal * last
        advantages[t] = last
    return advantages, advantages + buffer.values


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    return (advantages - advantages.mean()) / (advantages.std() + ADVANTAGE_EPS)


def clipped_surrogate(ratio, advantage, clip_epsilon: float):
    """min(ρA, clip(ρ, 1-ε, 1+ε)A) по каждому образцу"""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    return np.minimum(ratio * advantage, clipped * advantage)


def concatenate_buffers(buffers: List[RolloutBuffer]) -> RolloutBuffer:
    if len(buffers) == 1:
        return buffers[0]
    return RolloutBuffer(
        observations=np.concatenate([b.observations for b in buffers]),
        actions=np.concatenate([b.actions for b in buffers]),
        log_probs=np.concatenate([b.log_probs for b in buffers]),
        rewards=np.concatenate([b.rewards for b in buffers]),
        values=np.concatenate([b.values for b in buffers]),
        dones=np.concatenate([b.dones for b in buffers]),
        masks=np.concatenate([b.masks for b in buffers]),
        bootstrap_value=buffers[-1].bootstrap_value,
        episode_runoffs=[runoff for b in buffers for runoff in b.episode_runoffs],
        last_runoff=buffers[-1].last_runoff,
    )


def ppo_update(actor: Actor, critic: Critic, buffer: RolloutBuffer, advantages: np.ndarray,
               returns: np.ndarray, cfg: PpoConfig, actor_adam: AdamState, critic_adam: AdamState,
               rng: XorShift64Star, update_index: int = 0) -> Dict[str, float]:
    """Эпохи обновления по мини-батчам; сети и состояния Adam меняются на месте"""
    n = len(buffer)
    advantages = normalize_advantages(advantages)
    eye = np.eye(N_ACTIONS)
    policy_losses, value_losses, entropies = [], [], []
    clipped_count = 0
    sample_count = 0

    for epoch in range(cfg.epochs_per_update):
        order = rng.shuffle(list(range(n)))
        for start in range(0, n, cfg.minibatch_size):
            index = np.array(order[start:start + cfg.minibatch_size], dtype=np.int64)
            batch = len(index)
            obs = buffer.observations[index]
            actions = buffer.actions[index]
            adv = advantages[index]
            ret = returns[index]

            dist = CategoricalDist(forward(actor.params, obs), buffer.masks[index])
            new_log_probs = dist.log_prob(actions)
            ratio = np.exp(new_log_probs - buffer.log_probs[index])
            unclipped = ratio * adv
            surrogate = clipped_surrogate(ratio, adv, cfg.clip_epsilon)
            entropy = dist.entropy()
            values = forward(critic.params, obs)[:, 0]

            policy_loss = -float(np.mean(surrogate))
            value_loss = float(np.mean((values - ret) ** 2))
            entropy_mean = float(np.mean(entropy))
            total_loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_mean
            if not math.isfinite(total_loss):
                raise NonFiniteLoss("Функция потерь не конечна", {
                    "update": update_index, "epoch": epoch, "policy_loss": policy_loss,
                    "value_loss": value_loss, "entropy": entropy_mean,
                })

            # d(surrogate)/d logπ(a) = ρA, если активна необрезанная ветвь
            surrogate_grad = np.where(unclipped <= surrogate, unclipped, 0.0)
            onehot = eye[actions]
            logits_grad = -(surrogate_grad[:, None] * (onehot - dist.probs)) / batch
            logits_grad += cfg.entropy_coef * dist.probs * (dist.log_probs + entropy[:, None]) / batch
            value_grad = (cfg.value_coef * 2.0 * (values - ret) / batch)[:, None]

            actor_grads = backward(actor.params, obs, logits_grad)
            critic_grads = backward(critic.params, obs, value_grad)
            actor.params = adam_update(actor.params, actor_grads, actor_adam)
            critic.params = adam_update(critic.params, critic_grads, critic_adam)
            if not (actor.params.all_finite() and critic.params.all_finite()):
                raise NonFiniteLoss("Параметры сети стали не конечными", {
                    "update": update_index, "epoch": epoch, "policy_loss": policy_loss,
                    "value_loss": value_loss, "entropy": entropy_mean,
                })

            policy_losses.append(policy_loss)
            value_losses.append(value_loss)
            entropies.append(entropy_mean)
            clipped_count += int(np.sum(np.abs(ratio - 1.0) > cfg.clip_epsilon))
            sample_count += batch
            logger.debug(
                f"Обновление {update_index}, эпоха {epoch}: policy={policy_loss:.5f} "
                f"value={value_loss:.5f} entropy={entropy_mean:.4f}"
            )

    return {
        "policy_loss": float(np.mean(policy_losses)),
        "value_loss": float(np.mean(value_losses)),
        "entropy": float(np.mean(entropies)),
        "clip_fraction": clipped_count / sample_count,
    }


def _collect_worker(args):
    """Сбор роллаута в отдельном процессе: возвращает буфер и новые состояния"""
    env, actor_params, critic_params, horizon, rng_state = args
    rng = XorShift64Star.from_state(rng_state)
    buffer = collect_rollout(env, Actor(actor_params), Critic(critic_params), horizon, rng)
    return buffer, env.state, rng.state


class PpoTrainer:
    """Цикл обучения PPO: роллауты, GAE, обновления, чекпоинты и статистика"""

    def __init__(self, grid: LulcGrid, table: CoefficientTable, env_cfg: EnvConfig,
                 ppo_cfg: PpoConfig, seed: int):
        self.grid = grid
        self.table = table
        self.env_cfg = env_cfg
        self.cfg = ppo_cfg
        self.seed = seed
        self.workers = ppo_cfg.workers
        self.envs = [LulcEnv(grid, env_cfg, table) for _ in range(self.workers)]

        self.rng = XorShift64Star(seed)
        self.worker_rngs = [XorShift64Star.for_worker(seed, k) for k in range(self.workers)]
        hidden = list(ppo_cfg.hidden_sizes)
        self.actor = Actor.create([OBSERVATION_SIZE, *hidden, N_ACTIONS], self.rng)
        self.critic = Critic.create([OBSERVATION_SIZE, *hidden, 1], self.rng)
        self.actor_adam = self._new_adam(self.actor.params)
        self.critic_adam = self._new_adam(self.critic.params)
        self.update = 0
        self.history: List[TrainStats] = []

    def _new_adam(self, params: MlpParams) -> AdamState:
        return AdamState.for_params(params, self.cfg.learning_rate, self.cfg.adam_beta1,
                                    self.cfg.adam_beta2, self.cfg.adam_eps)

    @classmethod
    def from_run_config(cls, cfg: RunConfig, grid: LulcGrid, table: CoefficientTable) -> "PpoTrainer":
        return cls(grid, table, cfg.env, cfg.ppo, cfg.seed)

    @property
    def architecture(self) -> Dict:
        return architecture_descriptor(OBSERVATION_SIZE, self.cfg.hidden_sizes, N_ACTIONS)

    def _worker_horizons(self) -> List[int]:
        base, extra = divmod(self.cfg.rollout_horizon, self.workers)
        return [base + (1 if k < extra else 0) for k in range(self.workers)]

    def collect(self, executor: Optional[ProcessPoolExecutor] = None) -> List[RolloutBuffer]:
        horizons = self._worker_horizons()
        if executor is None:
            return [
                collect_rollout(env, self.actor, self.critic, horizon, rng)
                for env, horizon, rng in zip(self.envs, horizons, self.worker_rngs)
                if horizon > 0
            ]

        jobs = [
            (env, self.actor.params, self.critic.params, horizon, rng.state)
            for env, horizon, rng in zip(self.envs, horizons, self.worker_rngs)
            if horizon > 0
        ]
        buffers = []
        for k, (buffer, env_state, rng_state) in enumerate(executor.map(_collect_worker, jobs)):
            self.envs[k].state = env_state
            self.worker_rngs[k] = XorShift64Star.from_state(rng_state)
            buffers.append(buffer)
        return buffers

    def train_step(self, executor: Optional[ProcessPoolExecutor] = None) -> TrainStats:
        """Одно обновление: роллаут → GAE → эпохи PPO"""
        buffers = self.collect(executor)
        advantages, returns = [], []
        for buffer in buffers:
            adv, ret = compute_gae(buffer, self.cfg.gamma, self.cfg.gae_lambda)
            advantages.append(adv)
            returns.append(ret)
        buffer = concatenate_buffers(buffers)
        losses = ppo_update(
            self.actor, self.critic, buffer, np.concatenate(advantages), np.concatenate(returns),
            self.cfg, self.actor_adam, self.critic_adam, self.rng, self.update,
        )
        self.update += 1
        runoff = buffer.episode_runoffs[-1] if buffer.episode_runoffs else buffer.last_runoff
        stats = TrainStats(
            update=self.update,
            mean_reward=float(np.mean(buffer.rewards)),
            policy_loss=losses["policy_loss"],
            value_loss=losses["value_loss"],
            entropy=losses["entropy"],
            clip_fraction=losses["clip_fraction"],
            final_episode_runoff_m3_per_s=float(runoff),
        )
        self.history.append(stats)
        logger.info(
            f"Обновление {stats.update}/{self.cfg.total_updates}: награда {stats.mean_reward:.4f}, "
            f"policy {stats.policy_loss:.4f}, value {stats.value_loss:.4f}, "
            f"энтропия {stats.entropy:.4f}, clip {stats.clip_fraction:.3f}, "
            f"сток {stats.final_episode_runoff_m3_per_s:.6f} м³/с"
        )
        return stats

    def checkpoint_payload(self) -> Dict:
        return {
            "architecture": self.architecture,
            "actor": self.actor.params.to_dict(),
            "critic": self.critic.params.to_dict(),
            "actor_adam": self.actor_adam.to_dict(),
            "critic_adam": self.critic_adam.to_dict(),
            "rng_state": {
                "master": self.rng.state,
                "workers": [rng.state for rng in self.worker_rngs],
            },
            "update": self.update,
            "seed": self.seed,
        }

    def save(self, out_dir) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        checkpoint_path = storage.save_checkpoint(out_dir / CHECKPOINT_NAME, self.checkpoint_payload())
        stats_path = storage.write_stats_csv(out_dir / STATS_NAME, [s.as_row() for s in self.history])
        return checkpoint_path, stats_path

    def run(self, out_dir) -> Tuple[Path, List[TrainStats]]:
        """total_updates обновлений с периодическими чекпоинтами"""
        total = self.cfg.total_updates
        logger.info(
            f"Старт обучения: {total} обновлений, горизонт {self.cfg.rollout_horizon}, "
            f"воркеров {self.workers}, seed {self.seed}"
        )
        executor = ProcessPoolExecutor(max_workers=self.workers) if self.workers > 1 else None
        try:
            while self.update < total:
                self.train_step(executor)
                if self.update % self.cfg.checkpoint_every == 0 and self.update < total:
                    self.save(out_dir)
        finally:
            if executor is not None:
                executor.shutdown()
        checkpoint_path, _ = self.save(out_dir)
        return checkpoint_path, self.history


def train(cfg: RunConfig, grid: LulcGrid, table: CoefficientTable) -> Tuple[Path, List[TrainStats]]:
    """Полный цикл обучения по конфигурации запуска"""
    trainer = PpoTrainer.from_run_config(cfg, grid, table)
    return trainer.run(cfg.output.directory)


def load_policy(checkpoint_path, hidden_sizes) -> Tuple[Actor, Critic, Dict]:
    """Actor и Critic из чекпоинта с проверкой архитектуры"""
    document = storage.load_checkpoint(
        checkpoint_path, required_fields=("architecture", "actor", "critic", "rng_state", "update")
    )
    expected = architecture_descriptor(OBSERVATION_SIZE, hidden_sizes, N_ACTIONS)
    if document["architecture"] != expected:
        raise CheckpointError(
            f"Архитектура чекпоинта {document['architecture']} не совпадает с ожидаемой {expected}",
            field="architecture",
        )
    try:
        actor = Actor(MlpParams.from_dict(document["actor"]))
        critic = Critic(MlpParams.from_dict(document["critic"]))
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Веса чекпоинта повреждены: {e}", field="actor/critic") from e
    sizes = [OBSERVATION_SIZE, *hidden_sizes]
    if actor.params.sizes != [*sizes, N_ACTIONS] or critic.params.sizes != [*sizes, 1]:
        raise CheckpointError("Размеры весов не совпадают с дескриптором архитектуры", field="architecture")
    return actor, critic, document
