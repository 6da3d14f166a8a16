"""
Воспроизводимый генератор случайных чисел xorshift64*

Переход состояния (все операции по модулю 2^64):
    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    выход = x * 0x2545F4914F6CDD1D

Начальное состояние = splitmix64(seed); нулевое состояние заменяется на 0x9E3779B97F4A7C15.
Равномерное число в [0, 1): (выход >> 11) * 2^-53.
Поток воркера k: seed_k = splitmix64(seed ^ splitmix64(k + 1)).
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
XORSHIFT_MULTIPLIER = 0x2545F4914F6CDD1D
UNIFORM_SCALE = 2.0 ** -53


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    """Генератор xorshift64* с явным состоянием (сохраняется в чекпоинт)"""

    def __init__(self, seed: int = 0):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"Seed должен быть 64-битным беззнаковым числом: {seed}")
        self.state = splitmix64(seed) or GOLDEN_GAMMA

    @classmethod
    def from_state(cls, state: int) -> "XorShift64Star":
        if not 0 < state <= MASK64:
            raise ValueError(f"Некорректное состояние генератора: {state}")
        rng = cls.__new__(cls)
        rng.state = state
        return rng

    @classmethod
    def for_worker(cls, seed: int, worker_index: int) -> "XorShift64Star":
        """Независимый поток для воркера с номером worker_index"""
        return cls(splitmix64(seed ^ splitmix64(worker_index + 1)))

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * XORSHIFT_MULTIPLIER) & MASK64

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * UNIFORM_SCALE

    def below(self, n: int) -> int:
        """Целое в [0, n)"""
        if n < 1:
            raise ValueError(f"n должно быть положительным: {n}")
        return min(int(self.uniform() * n), n - 1)

    def uniform_array(self, shape, low: float, high: float) -> np.ndarray:
        size = int(np.prod(shape))
        values = [low + (high - low) * self.uniform() for _ in range(size)]
        return np.array(values, dtype=np.float64).reshape(shape)

    def shuffle(self, items: list) -> list:
        """Перемешивание Фишера-Йетса на месте"""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
