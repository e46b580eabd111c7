"""Linear variance schedule and the forward perturbation process."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variances beta_t and their signal survival products.

    betas rise linearly from beta_start to beta_end over `steps` steps;
    alpha_bar[t-1] = prod_{s<=t} (1 - beta_s) is the remaining signal power
    after t perturbation steps.
    """

    steps: int = 700
    beta_start: float = 0.0001
    beta_end: float = 0.04
    betas: np.ndarray = field(init=False, repr=False)
    alpha_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not 0 < self.beta_start < self.beta_end < 1:
            raise ValueError(
                f"require 0 < beta_start < beta_end < 1, got "
                f"[{self.beta_start}, {self.beta_end}]"
            )
        betas = np.linspace(self.beta_start, self.beta_end, self.steps, dtype=np.float64)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bar", np.cumprod(1.0 - betas))

    def signal_level(self, t: int) -> float:
        """alpha_bar at step t (1-indexed); t = 0 means the clean signal."""
        if t == 0:
            return 1.0
        if not 1 <= t <= self.steps:
            raise ValueError(f"step {t} outside [1, {self.steps}]")
        return float(self.alpha_bar[t - 1])


def forward_diffuse(features: np.ndarray, t: int, schedule: NoiseSchedule,
                    noise: np.ndarray) -> np.ndarray:
    """Closed-form marginal of t perturbation steps applied at once.

    Returns sqrt(alpha_bar_t) * features + sqrt(1 - alpha_bar_t) * noise.
    """
    features = np.asarray(features, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != features.shape:
        raise ValueError(f"noise shape {noise.shape} != features shape {features.shape}")
    if not 1 <= t <= schedule.steps:
        raise ValueError(f"step {t} outside [1, {schedule.steps}]")
    ab = schedule.signal_level(t)
    return np.sqrt(ab) * features + np.sqrt(1.0 - ab) * noise


def stepwise_perturb(features: np.ndarray, t: int, schedule: NoiseSchedule,
                     rng: np.random.Generator) -> np.ndarray:
    """Literal step-by-step perturbation chain, used to validate the marginal.

    Applies x <- sqrt(1 - beta_s) x + sqrt(beta_s) eps_s for s = 1..t.
    """
    x = np.asarray(features, dtype=np.float64).copy()
    if not 1 <= t <= schedule.steps:
        raise ValueError(f"step {t} outside [1, {schedule.steps}]")
    for s in range(t):
        beta = schedule.betas[s]
        x = np.sqrt(1.0 - beta) * x + np.sqrt(beta) * rng.standard_normal(x.shape)
    return x
