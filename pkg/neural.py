"""
Небольшие полносвязные сети с аналитическими градиентами:
общая MLP-механика, категориальная политика (Actor), функция ценности (Critic), Adam
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ShapeMismatch
from rng import XorShift64Star

logger = logging.getLogger(__name__)

MASK_LOGIT = -1e9
POLICY_OUTPUT_SCALE = 0.01


@dataclass
class MlpParams:
    """Веса (in, out) и смещения слоев; скрытые слои tanh, выход линейный"""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @property
    def sizes(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "MlpParams":
        return MlpParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def arrays(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases]

    def all_finite(self) -> bool:
        return all(np.isfinite(array).all() for array in self.arrays())

    def to_dict(self) -> Dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "MlpParams":
        weights = [np.array(w, dtype=np.float64) for w in data["weights"]]
        biases = [np.array(b, dtype=np.float64) for b in data["biases"]]
        for w, b in zip(weights, biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeMismatch(f"Несогласованные размеры слоя: {w.shape} и {b.shape}")
        for previous, current in zip(weights, weights[1:]):
            if previous.shape[1] != current.shape[0]:
                raise ShapeMismatch(f"Слои не стыкуются: {previous.shape} → {current.shape}")
        return cls(weights, biases)


def init_mlp(sizes: Sequence[int], rng: XorShift64Star, output_scale: float = 1.0) -> MlpParams:
    """Равномерная инициализация U(-1/√fan_in, 1/√fan_in), нулевые смещения"""
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform_array((fan_in, fan_out), -bound, bound)
        if layer == len(sizes) - 2:
            w *= output_scale
        weights.append(w)
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpParams(weights, biases)


def _as_batch(params: MlpParams, obs: np.ndarray) -> Tuple[np.ndarray, bool]:
    obs = np.asarray(obs, dtype=np.float64)
    single = obs.ndim == 1
    batch = obs[None, :] if single else obs
    if batch.ndim != 2 or batch.shape[1] != params.sizes[0]:
        raise ShapeMismatch(f"Ожидается вход длины {params.sizes[0]}, получено {obs.shape}")
    return batch, single


def forward_cache(params: MlpParams, obs: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Прямой проход с сохранением входов каждого слоя"""
    x, _ = _as_batch(params, obs)
    inputs = []
    last = len(params.weights) - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(x)
        x = x @ w + b
        if layer < last:
            x = np.tanh(x)
    return x, inputs


def forward(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    out, _ = forward_cache(params, obs)
    return out[0] if np.asarray(obs).ndim == 1 else out


def backward(params: MlpParams, obs: np.ndarray, output_grad: np.ndarray) -> MlpParams:
    """Точные градиенты скалярной функции от выхода сети (сумма по батчу)"""
    _, single = _as_batch(params, obs)
    _, inputs = forward_cache(params, obs)
    grad = np.asarray(output_grad, dtype=np.float64)
    if single:
        grad = grad[None, :]
    if grad.shape != (inputs[0].shape[0], params.sizes[-1]):
        raise ShapeMismatch(f"Градиент выхода {grad.shape} не совпадает с выходом сети")

    grads = params.zeros_like()
    for layer in range(len(params.weights) - 1, -1, -1):
        layer_input = inputs[layer]
        grads.weights[layer] = layer_input.T @ grad
        grads.biases[layer] = grad.sum(axis=0)
        if layer > 0:
            # вход слоя: выход tanh предыдущего
            grad = (grad @ params.weights[layer].T) * (1.0 - layer_input ** 2)
    return grads


def logsumexp(z: np.ndarray) -> np.ndarray:
    peak = np.max(z, axis=-1, keepdims=True)
    return (peak + np.log(np.sum(np.exp(z - peak), axis=-1, keepdims=True)))[..., 0]


class CategoricalDist:
    """Категориальное распределение по логитам с маской недопустимых действий"""

    def __init__(self, logits: np.ndarray, mask: Optional[np.ndarray] = None):
        logits = np.asarray(logits, dtype=np.float64)
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)
        self.logits = logits if self.mask is None else np.where(self.mask, logits, MASK_LOGIT)
        self.log_probs = self.logits - logsumexp(self.logits)[..., None]
        self.probs = np.exp(self.log_probs)

    def log_prob(self, action) -> np.ndarray:
        action = np.asarray(action)
        if action.ndim == 0:
            return float(self.log_probs[int(action)])
        return np.take_along_axis(self.log_probs, action[:, None], axis=-1)[:, 0]

    def entropy(self):
        value = -np.sum(self.probs * self.log_probs, axis=-1)
        return float(value) if np.ndim(value) == 0 else value

    def greedy(self) -> int:
        return int(np.argmax(self.logits))


def sample(dist: CategoricalDist, rng: XorShift64Star) -> Tuple[int, float]:
    """Обратная функция распределения по одному равномерному числу"""
    u = rng.uniform()
    cdf = np.cumsum(dist.probs)
    action = int(np.searchsorted(cdf, u, side='right'))
    if action >= len(cdf) or dist.probs[action] == 0.0:
        # u за пределами cdf[-1] из-за округления
        action = int(np.flatnonzero(dist.probs > 0.0)[-1])
    return action, dist.log_prob(action)


def entropy(dist: CategoricalDist):
    return dist.entropy()


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    step: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 3e-4, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like(), 0, lr, beta1, beta2, eps)

    def to_dict(self) -> Dict:
        return {
            "m": self.m.to_dict(),
            "v": self.v.to_dict(),
            "step": self.step,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "AdamState":
        return cls(
            MlpParams.from_dict(data["m"]),
            MlpParams.from_dict(data["v"]),
            int(data["step"]),
            float(data["lr"]),
            float(data["beta1"]),
            float(data["beta2"]),
            float(data["eps"]),
        )


def adam_update(params: MlpParams, grads: MlpParams, state: AdamState) -> MlpParams:
    """Шаг Adam с коррекцией смещения; состояние обновляется на месте"""
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    updated = params.copy()
    for param, grad, m, v in zip(updated.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad ** 2
        param -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return updated


class Actor:
    """Политика: MLP → логиты 7 действий"""

    def __init__(self, params: MlpParams):
        self.params = params

    @classmethod
    def create(cls, sizes: Sequence[int], rng: XorShift64Star) -> "Actor":
        return cls(init_mlp(sizes, rng, output_scale=POLICY_OUTPUT_SCALE))

    def distribution(self, obs: np.ndarray, mask: Optional[np.ndarray] = None) -> CategoricalDist:
        return CategoricalDist(forward(self.params, obs), mask)


class Critic:
    """Функция ценности состояния: MLP → скаляр"""

    def __init__(self, params: MlpParams):
        self.params = params

    @classmethod
    def create(cls, sizes: Sequence[int], rng: XorShift64Star) -> "Critic":
        return cls(init_mlp(sizes, rng))

    def value(self, obs: np.ndarray):
        out = forward(self.params, obs)
        return float(out[0]) if np.asarray(obs).ndim == 1 else out[:, 0]


def architecture_descriptor(observation_size: int, hidden_sizes: Sequence[int], n_actions: int) -> Dict:
    return {
        "observation_size": observation_size,
        "hidden_sizes": list(hidden_sizes),
        "actor_output": n_actions,
        "critic_output": 1,
        "activation": "tanh",
        "dtype": "float64",
    }
