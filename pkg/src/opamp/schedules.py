"""Row-update protocols and the bookkeeping that tracks them.

A *schedule* produces one binary mask per iteration: ``delta_t[i] = 1`` means
row i of the data matrix is applied at step t.  Every protocol updates all
rows at t = 0; the engines and the state-evolution initialization rely on
that convention.

``ScheduleState`` tracks, for each coordinate, the most recent step at which
it was updated (``last_update[i]``), plus the per-step class counts
``counts[s] = #{i : last_update[i] = s}``.  These counts are exactly the
traces of the projector products that appear in the long-memory correction
term, which is verified against dense matrix products in the test suite.

Masks are a pure function of (protocol parameters, seed, t), so trials can
be replayed or evaluated out of order.
"""

import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_dimension, check_mask, rng_from_key


@dataclass(frozen=True)
class UpdateMask:
    t: int
    delta: np.ndarray


class Schedule:
    """Base class for update protocols; subclasses implement mask(t)."""

    protocol = None

    def __init__(self, n):
        self.n = check_dimension(n)

    def mask(self, t):
        raise NotImplementedError

    def limiting_measure(self, t):
        """Limiting fraction of coordinates last updated at s, for s < t.

        Returns a probability vector p of length t with p[s] the asymptotic
        fraction of coordinates whose most recent update before step t
        happened at step s.  Nonnegative and sums to one.
        """
        raise NotImplementedError

    def label(self):
        return self.protocol

    def to_config(self):
        raise NotImplementedError

    def to_json(self):
        return json.dumps(self.to_config(), sort_keys=True)

    def __repr__(self):
        fields = ", ".join(f"{k}={v!r}" for k, v in self.to_config().items())
        return f"{type(self).__name__}({fields})"


class FullMatrixSchedule(Schedule):
    """Every row is updated at every step."""

    protocol = "full"

    def mask(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        return np.ones(self.n, dtype=np.uint8)

    def limiting_measure(self, t):
        if t < 1:
            raise ValueError("t must be >= 1")
        p = np.zeros(t)
        p[t - 1] = 1.0
        return p

    def to_config(self):
        return {"protocol": "full", "n": self.n}


class RandomUpdateSchedule(Schedule):
    """Each row is updated independently with a fixed probability per step.

    Models partial updates arriving at random, e.g. straggling workers that
    miss an iteration deadline.  Masks for different t use independent
    substreams of the seed, so mask(t) is random-access reproducible.
    """

    protocol = "random"

    def __init__(self, n, gamma, seed=0):
        super().__init__(n)
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {gamma}")
        self.gamma = float(gamma)
        self.seed = seed if isinstance(seed, (tuple, list)) else int(seed)

    def mask(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        if t == 0:
            return np.ones(self.n, dtype=np.uint8)
        rng = rng_from_key(self.seed, t)
        return (rng.random(self.n) < self.gamma).astype(np.uint8)

    def limiting_measure(self, t):
        if t < 1:
            raise ValueError("t must be >= 1")
        g = self.gamma
        s = np.arange(t)
        p = g * (1.0 - g) ** (t - 1 - s)
        # all rows refresh at t = 0, so class 0 holds everything never hit since
        p[0] = (1.0 - g) ** (t - 1)
        return p

    def label(self):
        return f"random({self.gamma:g})"

    def to_config(self):
        seed = list(self.seed) if isinstance(self.seed, (tuple, list)) else self.seed
        return {"protocol": "random", "n": self.n, "gamma": self.gamma, "seed": seed}


class RoundRobinSchedule(Schedule):
    """Cycle through a fixed partition of the rows, one block per step.

    The rows are split into ``n_blocks`` contiguous index blocks of equal
    size; step t >= 1 updates block (t - 1) mod n_blocks, so every row is
    refreshed at least once every n_blocks steps.
    """

    protocol = "round_robin"

    def __init__(self, n, n_blocks):
        super().__init__(n)
        n_blocks = int(n_blocks)
        if n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if self.n % n_blocks != 0:
            raise ValueError(f"n_blocks={n_blocks} must divide n={self.n}")
        self.n_blocks = n_blocks
        self.block_size = self.n // n_blocks

    def mask(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        if t == 0:
            return np.ones(self.n, dtype=np.uint8)
        block = (t - 1) % self.n_blocks
        delta = np.zeros(self.n, dtype=np.uint8)
        delta[block * self.block_size:(block + 1) * self.block_size] = 1
        return delta

    def limiting_measure(self, t):
        if t < 1:
            raise ValueError("t must be >= 1")
        J = self.n_blocks
        p = np.zeros(t)
        if t <= J:
            # t - 1 blocks refreshed once each; the rest still carry step 0
            p[0] = 1.0 - (t - 1) / J
            p[1:t] = 1.0 / J
        else:
            p[t - J:t] = 1.0 / J
        return p

    def label(self):
        return f"round_robin({self.n_blocks})"

    def to_config(self):
        return {"protocol": "round_robin", "n": self.n, "J": self.n_blocks}


def full_matrix(n):
    return FullMatrixSchedule(n)


def random_update(n, gamma, seed=0):
    return RandomUpdateSchedule(n, gamma, seed)


def round_robin(n, n_blocks):
    return RoundRobinSchedule(n, n_blocks)


def schedule_from_config(config):
    """Build a schedule from its JSON-style description."""
    if isinstance(config, str):
        config = json.loads(config)
    kind = config.get("protocol")
    n = config["n"]
    if kind == "full":
        return full_matrix(n)
    if kind == "random":
        return random_update(n, config["gamma"], config.get("seed", 0))
    if kind == "round_robin":
        return round_robin(n, config["J"])
    raise ValueError(f"unknown protocol {kind!r}")


def limiting_measure(protocol, t, gamma=None, n_blocks=None):
    """Closed-form limiting class measure for a named protocol at step t.

    The measure does not depend on the dimension, only on the protocol
    parameters; a minimal schedule instance is built just to evaluate it.
    """
    if protocol == "full":
        return FullMatrixSchedule(1).limiting_measure(t)
    if protocol == "random":
        return RandomUpdateSchedule(1, gamma).limiting_measure(t)
    if protocol == "round_robin":
        return RoundRobinSchedule(n_blocks, n_blocks).limiting_measure(t)
    raise ValueError(f"unknown protocol {protocol!r}")


class ScheduleState:
    """Last-update indices and class counts, advanced one mask at a time.

    After advancing through masks delta_0, ..., delta_{t-1}:

    - ``last_update[i]`` is the most recent s < t with delta_s[i] = 1;
    - ``counts[s]`` is the number of coordinates with last_update = s, which
      equals the trace of the projector product that weighs class s in the
      correction term at step t.
    """

    def __init__(self, n):
        self.n = check_dimension(n)
        self.t = 0
        self.last_update = np.full(self.n, -1, dtype=np.int64)
        self.counts = np.zeros(0, dtype=np.int64)

    def advance(self, delta, t=None):
        """Apply the mask for step ``self.t`` and move to step t + 1."""
        delta = check_mask(delta, n=self.n)
        if t is not None and t != self.t:
            raise ValueError(f"mask is for step {t}, state is at step {self.t}")
        if self.t == 0 and not delta.all():
            raise ValueError("the step-0 mask must update every coordinate")
        updated = delta.astype(bool)
        moved = self.last_update[updated]
        moved = moved[moved >= 0]
        if moved.size:
            self.counts -= np.bincount(moved, minlength=self.counts.size)
        self.counts = np.append(self.counts, np.int64(updated.sum()))
        self.last_update[updated] = self.t
        self.t += 1
        return self

    def trace_weight(self, s):
        """Count of coordinates last updated at step s (= projector-product trace)."""
        if not 0 <= s < self.t:
            raise IndexError(f"s must be in [0, {self.t}), got {s}")
        return int(self.counts[s])

    def class_fractions(self):
        """Empirical class measure counts / n as a vector over s = 0..t-1."""
        return self.counts / self.n

    def alive_classes(self):
        return np.flatnonzero(self.counts)


def replay(schedule, horizon):
    """Advance a fresh state through ``horizon`` masks; returns (state, masks)."""
    state = ScheduleState(schedule.n)
    masks = []
    for t in range(horizon):
        delta = schedule.mask(t)
        state.advance(delta)
        masks.append(delta)
    return state, masks
