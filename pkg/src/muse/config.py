"""Training configuration: every hyperparameter, serializable for echo files."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigError
from .representation import RewardKind
from .selection import Strategy, StrategyKind


class Learner(enum.Enum):
    POLICY_GRADIENT = "policy"
    Q_LEARNING = "qlearning"


@dataclass
class TrainingConfig:
    """All knobs of a training run.

    Defaults follow the reference setup (d=300, 3 senses, window 5,
    lr 0.025, 25 negatives, epsilon 5%, batch 2048). ``validate`` resolves
    the learner-dependent defaults and rejects invalid combinations.
    """

    d: int = 300
    n: int = 3
    m: int = 5
    lr0: float = 0.025
    negatives: int = 25
    epsilon: float = 0.05
    batch_size: int = 2048
    learner: Learner = Learner.Q_LEARNING
    strategy: Strategy = field(default_factory=lambda: Strategy(StrategyKind.BOLTZMANN))
    reward: Optional[RewardKind] = None
    reward_direction: str = "forward"
    epochs: int = 1
    subsample_t: float = 1e-4
    min_count: int = 5
    min_sentence_tokens: int = 10
    lowercase: bool = False
    all_offsets: bool = False
    power: float = 0.75
    seed: int = 1
    threads: int = 1
    strict: bool = True
    lr_floor_ratio: float = 1e-4
    progress_interval: int = 0
    checkpoint_interval: int = 0

    def validate(self) -> "TrainingConfig":
        """Resolve learner-dependent defaults; raise ConfigError on conflicts."""
        if min(self.d, self.n, self.m, self.batch_size, self.epochs) < 1:
            raise ConfigError("d, n, m, batch_size and epochs must be >= 1")
        if self.negatives < 0:
            raise ConfigError("negatives must be >= 0")
        if self.lr0 <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.threads > 1 and self.strict:
            raise ConfigError("multi-threaded training requires relaxed mode")
        if self.reward_direction not in ("forward", "reversed"):
            raise ConfigError("reward_direction must be 'forward' or 'reversed'")

        strategy = self.strategy
        reward = self.reward
        if self.learner is Learner.POLICY_GRADIENT:
            # REINFORCE is only valid when senses are drawn from the policy.
            if strategy is None or strategy.kind in (StrategyKind.BOLTZMANN,
                                                     StrategyKind.POLICY_SAMPLE):
                strategy = Strategy(StrategyKind.POLICY_SAMPLE)
            else:
                raise ConfigError(
                    "policy-gradient training requires on-policy sampling; "
                    f"strategy {strategy.kind.value!r} is not valid"
                )
            if reward is None:
                reward = RewardKind.APPROX_LOG_LIK
            if reward is not RewardKind.APPROX_LOG_LIK:
                raise ConfigError("policy gradient uses the realized log value as reward")
            if self.reward_direction != "forward":
                raise ConfigError("reward_direction applies to Q-learning only")
        else:
            if strategy is None:
                strategy = Strategy(StrategyKind.BOLTZMANN)
            if strategy.kind is StrategyKind.EPSILON_GREEDY:
                strategy = Strategy(StrategyKind.EPSILON_GREEDY, epsilon=self.epsilon)
            if reward is None:
                reward = RewardKind.BERNOULLI
            if reward is RewardKind.EXACT_CATEGORICAL:
                raise ConfigError("the exact categorical estimate is diagnostic only")
            if self.reward_direction == "reversed" and reward is not RewardKind.BERNOULLI:
                raise ConfigError("reward_direction=reversed needs the bernoulli reward")
        return replace(self, strategy=strategy, reward=reward)

    def to_dict(self) -> dict:
        d = {
            "d": self.d, "n": self.n, "m": self.m, "lr0": self.lr0,
            "negatives": self.negatives, "epsilon": self.epsilon,
            "batch_size": self.batch_size, "learner": self.learner.value,
            "strategy": self.strategy.kind.value if self.strategy else None,
            "reward": self.reward.value if self.reward else None,
            "reward_direction": self.reward_direction,
            "epochs": self.epochs, "subsample_t": self.subsample_t,
            "min_count": self.min_count,
            "min_sentence_tokens": self.min_sentence_tokens,
            "lowercase": self.lowercase, "all_offsets": self.all_offsets,
            "power": self.power, "seed": self.seed, "threads": self.threads,
            "strict": self.strict, "lr_floor_ratio": self.lr_floor_ratio,
            "progress_interval": self.progress_interval,
            "checkpoint_interval": self.checkpoint_interval,
        }
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingConfig":
        cfg = cls()
        known = cfg.to_dict().keys()
        kwargs = {}
        for key in known:
            if key not in data:
                continue
            value = data[key]
            if key == "learner":
                value = Learner(value)
            elif key == "strategy":
                value = Strategy(StrategyKind(value)) if value else None
            elif key == "reward":
                value = RewardKind(value) if value else None
            kwargs[key] = value
        return replace(cfg, **kwargs)
