"""Model primitives shared by every other module.

A K-level queue runs its arrival and service clocks at level-dependent
speeds: while the queue length sits in level set i the arrival clock drains
at rate ``lam[i]`` and the service clock at ``mu[i]`` (frozen when the
system is empty).  The heavy-traffic family indexed by n has rates
``rate + shift / sqrt(n)`` and thresholds ``level * sqrt(n)``; this module
holds that parameterization, the indexed pre-limit configurations, and the
level-partition logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import yaml

__all__ = [
    "Family",
    "RenewalSpec",
    "HeavyTrafficParams",
    "QueueModel",
    "LevelPartition",
    "PrelimitConfig",
    "level_of",
    "build_prelimit",
    "drift_fn",
    "variance_fn",
    "load_model",
    "dump_model",
    "model_from_dict",
    "model_to_dict",
]


class Family(str, Enum):
    """Unit-mean renewal increment families with tractable transforms."""

    EXPONENTIAL = "exponential"
    DETERMINISTIC = "deterministic"
    ERLANG = "erlang"
    HYPEREXPONENTIAL = "hyperexponential"
    UNIFORM = "uniform"


# Integer codes shared with the numba kernels.
FAMILY_CODE = {
    Family.EXPONENTIAL: 0,
    Family.DETERMINISTIC: 1,
    Family.ERLANG: 2,
    Family.HYPEREXPONENTIAL: 3,
    Family.UNIFORM: 4,
}


@dataclass(frozen=True)
class RenewalSpec:
    """Unit-mean increment distribution for the arrival or service clock.

    ``erlang`` uses ``shape`` stages of rate ``shape``;
    ``hyperexponential`` mixes Exp(r1) and Exp(r2) with weight ``p`` on the
    first branch, constrained to mean one;
    ``uniform`` is supported on ``[1 - half_width, 1 + half_width]``.
    """

    family: Family
    shape: int = 0
    p: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    half_width: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family == Family.ERLANG:
            if self.shape < 1:
                raise ValueError("erlang needs a positive integer shape")
        elif self.family == Family.HYPEREXPONENTIAL:
            if not (0.0 < self.p < 1.0) or self.r1 <= 0.0 or self.r2 <= 0.0:
                raise ValueError("hyperexponential needs 0<p<1 and positive rates")
            mean = self.p / self.r1 + (1.0 - self.p) / self.r2
            if abs(mean - 1.0) > 1e-12:
                raise ValueError(f"hyperexponential mean is {mean!r}, must be 1")
        elif self.family == Family.UNIFORM:
            if not (0.0 < self.half_width <= 1.0):
                raise ValueError("uniform half_width must lie in (0, 1]")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def exponential() -> "RenewalSpec":
        return RenewalSpec(Family.EXPONENTIAL)

    @staticmethod
    def deterministic() -> "RenewalSpec":
        return RenewalSpec(Family.DETERMINISTIC)

    @staticmethod
    def erlang(shape: int) -> "RenewalSpec":
        return RenewalSpec(Family.ERLANG, shape=int(shape))

    @staticmethod
    def hyperexponential(p: float, r1: float, r2: float) -> "RenewalSpec":
        return RenewalSpec(Family.HYPEREXPONENTIAL, p=p, r1=r1, r2=r2)

    @staticmethod
    def hyperexponential_cv2(cv2: float) -> "RenewalSpec":
        """Balanced-means two-phase mixture with squared CV ``cv2 > 1``."""
        if cv2 <= 1.0:
            raise ValueError("hyperexponential needs cv2 > 1")
        p = 0.5 * (1.0 + math.sqrt((cv2 - 1.0) / (cv2 + 1.0)))
        return RenewalSpec(Family.HYPEREXPONENTIAL, p=p, r1=2.0 * p, r2=2.0 * (1.0 - p))

    @staticmethod
    def uniform(half_width: float) -> "RenewalSpec":
        return RenewalSpec(Family.UNIFORM, half_width=half_width)

    # -- moments -----------------------------------------------------------

    @property
    def mean(self) -> float:
        return 1.0

    @property
    def variance(self) -> float:
        if self.family == Family.EXPONENTIAL:
            return 1.0
        if self.family == Family.DETERMINISTIC:
            return 0.0
        if self.family == Family.ERLANG:
            return 1.0 / self.shape
        if self.family == Family.HYPEREXPONENTIAL:
            second = 2.0 * (self.p / self.r1**2 + (1.0 - self.p) / self.r2**2)
            return second - 1.0
        return self.half_width**2 / 3.0

    def numba_params(self) -> tuple[int, float, float, float]:
        """(family code, p1, p2, p3) as consumed by the sampling kernels."""
        if self.family == Family.ERLANG:
            return FAMILY_CODE[self.family], float(self.shape), 0.0, 0.0
        if self.family == Family.HYPEREXPONENTIAL:
            return FAMILY_CODE[self.family], self.p, self.r1, self.r2
        if self.family == Family.UNIFORM:
            return FAMILY_CODE[self.family], self.half_width, 0.0, 0.0
        return FAMILY_CODE[self.family], 0.0, 0.0, 0.0

    def to_dict(self) -> dict:
        d: dict = {"family": self.family.value}
        if self.family == Family.ERLANG:
            d["shape"] = self.shape
        elif self.family == Family.HYPEREXPONENTIAL:
            d.update(p=self.p, r1=self.r1, r2=self.r2)
        elif self.family == Family.UNIFORM:
            d["half_width"] = self.half_width
        return d

    @staticmethod
    def from_dict(d: dict) -> "RenewalSpec":
        d = dict(d)
        family = Family(d.pop("family"))
        if family == Family.HYPEREXPONENTIAL and "cv2" in d:
            return RenewalSpec.hyperexponential_cv2(float(d["cv2"]))
        return RenewalSpec(family, **d)


@dataclass(frozen=True)
class LevelPartition:
    """Partition of [0, inf) into level sets by finite right endpoints.

    Level 1 is the closed interval up to the first boundary (so 0 belongs
    to level 1), interior levels are half-open (lo, hi], and the top level
    is unbounded.
    """

    boundaries: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))
        b = self.boundaries
        if not b or b[0] <= 0.0 or any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("boundaries must be positive and strictly increasing")

    @property
    def k(self) -> int:
        return len(self.boundaries) + 1

    def level_of(self, x: float) -> int:
        """1-based index of the level set containing x; boundaries belong
        to the level below (left-closed only at 0)."""
        if x < 0.0:
            raise ValueError("queue length cannot be negative")
        for i, b in enumerate(self.boundaries):
            if x <= b:
                return i + 1
        return self.k

    @staticmethod
    def is_empty(x: float) -> bool:
        return x == 0.0


def level_of(x: float, partition: LevelPartition) -> int:
    return partition.level_of(x)


@dataclass(frozen=True)
class HeavyTrafficParams:
    """Limit-scale parameters of the heavy-traffic family.

    ``levels`` are the K-1 finite thresholds on the diffusion scale;
    ``rates`` the common per-level clock speed (arrival and service speeds
    share the same first-order value); ``arrival_shift``/``service_shift``
    the order-1/sqrt(n) perturbations whose difference is the per-level
    drift.  The top-level drift must be negative (stability).
    """

    levels: tuple[float, ...]
    rates: tuple[float, ...]
    arrival_shift: tuple[float, ...]
    service_shift: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        object.__setattr__(self, "rates", tuple(float(x) for x in self.rates))
        object.__setattr__(self, "arrival_shift", tuple(float(x) for x in self.arrival_shift))
        object.__setattr__(self, "service_shift", tuple(float(x) for x in self.service_shift))
        k = len(self.rates)
        if k < 2:
            raise ValueError("need at least two levels")
        if len(self.levels) != k - 1:
            raise ValueError(f"expected {k - 1} thresholds for {k} levels")
        if len(self.arrival_shift) != k or len(self.service_shift) != k:
            raise ValueError("shift vectors must have one entry per level")
        LevelPartition(self.levels)  # ordering/positivity
        if any(r <= 0.0 for r in self.rates):
            raise ValueError("base rates must be positive")
        if self.drift[-1] >= 0.0:
            raise ValueError("top-level drift must be negative for stability")

    @property
    def k(self) -> int:
        return len(self.rates)

    @property
    def lam(self) -> tuple[float, ...]:
        return self.rates

    @property
    def mu(self) -> tuple[float, ...]:
        return self.rates

    @property
    def drift(self) -> tuple[float, ...]:
        return tuple(a - s for a, s in zip(self.arrival_shift, self.service_shift))

    def partition(self) -> LevelPartition:
        return LevelPartition(self.levels)


@dataclass(frozen=True)
class QueueModel:
    """Heavy-traffic parameters bundled with the renewal increment pair."""

    params: HeavyTrafficParams
    arrival: RenewalSpec
    service: RenewalSpec

    def __post_init__(self):
        if self.arrival.variance + self.service.variance <= 0.0:
            raise ValueError("at least one clock must have positive variance")

    @property
    def sigma2(self) -> tuple[float, ...]:
        va, vs = self.arrival.variance, self.service.variance
        return tuple(l * va + m * vs for l, m in zip(self.params.lam, self.params.mu))

    @property
    def beta(self) -> tuple[float, ...]:
        return tuple(2.0 * b / s2 for b, s2 in zip(self.params.drift, self.sigma2))


def drift_fn(params: HeavyTrafficParams, x: float) -> float:
    """Step drift: per-level value at the level containing x."""
    return params.drift[params.partition().level_of(x) - 1]


def variance_fn(model: QueueModel, x: float) -> float:
    """Step variance: arrival-rate-weighted clock variances at x's level."""
    return model.sigma2[model.params.partition().level_of(x) - 1]


@dataclass(frozen=True)
class PrelimitConfig:
    """The n-th system: exact rates and thresholds, no slack terms."""

    n: int
    model: QueueModel
    lam: tuple[float, ...]
    mu: tuple[float, ...]
    levels: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.lam)

    @property
    def sqrt_n(self) -> float:
        return math.sqrt(self.n)

    @property
    def rho(self) -> tuple[float, ...]:
        return tuple(l / m for l, m in zip(self.lam, self.mu))

    def partition(self) -> LevelPartition:
        return LevelPartition(self.levels)

    @property
    def boundary_states(self) -> tuple[int, ...]:
        """Largest integer queue length inside each bounded level: the
        state from which an arrival crosses into the next level."""
        return tuple(int(math.floor(b)) for b in self.levels)


def build_prelimit(model: QueueModel, n: int) -> PrelimitConfig:
    """Instantiate the n-th system with the slack terms set exactly to zero.

    Fails loudly on threshold spacing below one, nonpositive rates, or an
    unstable top level.
    """
    if n < 1:
        raise ValueError("scaling index n must be >= 1")
    p = model.params
    root = math.sqrt(n)
    inv = 1.0 / root
    lam = tuple(r + a * inv for r, a in zip(p.rates, p.arrival_shift))
    mu = tuple(r + s * inv for r, s in zip(p.rates, p.service_shift))
    levels = tuple(l * root for l in p.levels)
    if any(x <= 0.0 for x in lam) or any(x <= 0.0 for x in mu):
        raise ValueError(f"nonpositive clock rate at n={n}")
    prev = 0.0
    for l in levels:
        if l - prev < 1.0:
            raise ValueError(
                f"threshold spacing {l - prev:.6g} < 1 at n={n}; increase n"
            )
        prev = l
    if lam[-1] / mu[-1] >= 1.0:
        raise ValueError(f"top level unstable at n={n}: utilization >= 1")
    return PrelimitConfig(n=int(n), model=model, lam=lam, mu=mu, levels=levels)


# -- config file ---------------------------------------------------------


def model_to_dict(model: QueueModel) -> dict:
    p = model.params
    return {
        "model": {
            "levels": list(p.levels),
            "rates": list(p.rates),
            "arrival_shift": list(p.arrival_shift),
            "service_shift": list(p.service_shift),
        },
        "arrival": model.arrival.to_dict(),
        "service": model.service.to_dict(),
    }


def model_from_dict(data: dict) -> QueueModel:
    try:
        m = data["model"]
        params = HeavyTrafficParams(
            levels=m["levels"],
            rates=m["rates"],
            arrival_shift=m["arrival_shift"],
            service_shift=m["service_shift"],
        )
        arrival = RenewalSpec.from_dict(data["arrival"])
        service = RenewalSpec.from_dict(data["service"])
    except KeyError as exc:
        raise ValueError(f"config is missing section/key {exc}") from exc
    return QueueModel(params=params, arrival=arrival, service=service)


def load_model(path: str | Path) -> QueueModel:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return model_from_dict(data)


def dump_model(model: QueueModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(model_to_dict(model), fh, sort_keys=False)
