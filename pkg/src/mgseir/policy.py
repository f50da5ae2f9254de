"""Piecewise-constant shielding schedules."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

DEFAULT_KNOTS = 13


class Family(str, enum.Enum):
    UNIFORM = "uniform"
    SEMI_TARGETED = "semi_targeted"
    FULLY_TARGETED = "fully_targeted"

    @property
    def channels(self) -> int:
        return _CHANNELS[self]

    @property
    def group_channel(self) -> tuple[int, int, int]:
        """Channel index driving each of the young, middle and senior groups."""
        return _GROUP_CHANNEL[self]

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, Family):
            return value
        key = value.strip().lower().replace("-", "_")
        aliases = {"semi": "semi_targeted", "full": "fully_targeted", "fully": "fully_targeted"}
        return cls(aliases.get(key, key))


_CHANNELS = {Family.UNIFORM: 1, Family.SEMI_TARGETED: 2, Family.FULLY_TARGETED: 3}
_GROUP_CHANNEL = {
    Family.UNIFORM: (0, 0, 0),
    Family.SEMI_TARGETED: (0, 0, 1),
    Family.FULLY_TARGETED: (0, 1, 2),
}
# nesting order: each family contains the previous one
FAMILY_ORDER = (Family.UNIFORM, Family.SEMI_TARGETED, Family.FULLY_TARGETED)


@dataclass(frozen=True, eq=False)
class PolicySchedule:
    """Shielding levels on ``K`` equal blocks covering ``[0, horizon)``.

    ``levels`` has shape (channels, K). Uniform policies have one channel,
    semi-targeted ones a young/middle channel and a senior channel, fully
    targeted ones a channel per group.
    """

    family: Family
    horizon: float
    levels: np.ndarray

    def __post_init__(self):
        fam = Family.parse(self.family)
        arr = np.array(self.levels, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(fam.channels, -1)
        if arr.ndim != 2 or arr.shape[0] != fam.channels or arr.shape[1] < 1:
            raise ValueError(f"{fam.value} schedule needs shape ({fam.channels}, K), got {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("shielding levels must lie in [0, 1]")
        if not self.horizon > 0:
            raise ValueError("policy horizon must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "levels", arr)

    @classmethod
    def constant(cls, family, horizon: float, level: float = 0.0, knots: int = DEFAULT_KNOTS):
        fam = Family.parse(family)
        return cls(fam, horizon, np.full((fam.channels, knots), float(level)))

    @classmethod
    def zero(cls, horizon: float, family=Family.UNIFORM, knots: int = DEFAULT_KNOTS):
        return cls.constant(family, horizon, 0.0, knots)

    @classmethod
    def from_vector(cls, family, horizon: float, x) -> "PolicySchedule":
        fam = Family.parse(family)
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return cls(fam, horizon, x.reshape(fam.channels, -1))

    @property
    def knots(self) -> int:
        return self.levels.shape[1]

    @property
    def block(self) -> float:
        return self.horizon / self.knots

    @property
    def vector(self) -> np.ndarray:
        """Levels flattened channel-major."""
        return self.levels.ravel().copy()

    def group_levels(self) -> np.ndarray:
        """Per-group levels, shape (3, K)."""
        return self.levels[list(self.family.group_channel), :].copy()

    def level_at(self, t: float) -> np.ndarray:
        """Right-continuous lookup of the three group levels; zero from the horizon on."""
        if t >= self.horizon or t < 0:
            return np.zeros(3)
        k = min(int(t / self.block), self.knots - 1)
        return self.group_levels()[:, k]

    def embed(self, family) -> "PolicySchedule":
        """Express this schedule in a family that contains it (same group levels)."""
        target = Family.parse(family)
        if FAMILY_ORDER.index(target) < FAMILY_ORDER.index(self.family):
            raise ValueError(f"cannot express a {self.family.value} policy as {target.value}")
        groups = self.group_levels()
        rows = [groups[target.group_channel.index(c)] for c in range(target.channels)]
        return PolicySchedule(target, self.horizon, np.array(rows))

    def with_horizon(self, horizon: float) -> "PolicySchedule":
        return PolicySchedule(self.family, horizon, self.levels)

    def __eq__(self, other):
        if not isinstance(other, PolicySchedule):
            return NotImplemented
        return (
            self.family == other.family
            and self.horizon == other.horizon
            and np.array_equal(self.levels, other.levels)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "horizon": self.horizon,
            "knots": self.knots,
            "levels": [list(map(float, row)) for row in self.levels],
        }

    @classmethod
    def from_dict(cls, tree: Mapping[str, Any]) -> "PolicySchedule":
        unknown = set(tree) - {"family", "horizon", "knots", "levels"}
        if unknown:
            raise ValueError(f"unknown policy field(s): {sorted(unknown)}")
        policy = cls(tree["family"], tree["horizon"], tree["levels"])
        if "knots" in tree and int(tree["knots"]) != policy.knots:
            raise ValueError("policy knots do not match the levels")
        return policy
