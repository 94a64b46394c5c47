"""Offline (Benjamini-Hochberg) and online (SAFFRON) false discovery rate control."""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import zeta

from .._core import saffron_levels
from ..errors import InvalidInputError


def bh_reject(pvalues, q):
    """Benjamini-Hochberg step-up; returns one rejection flag per input p-value."""
    p = np.asarray(pvalues, dtype=np.float64).ravel()
    m = p.size
    if m == 0:
        return []
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise InvalidInputError("p-values must lie in [0, 1]")
    order = np.argsort(p, kind="mergesort")
    thresholds = q * np.arange(1, m + 1) / m
    passing = np.flatnonzero(p[order] <= thresholds)
    if passing.size == 0:
        return [False] * m
    cutoff = p[order][passing[-1]]
    return [bool(v) for v in p <= cutoff]


@dataclass(frozen=True)
class SaffronState:
    """Immutable SAFFRON state.

    ``reject_times[0]`` is 0 (the stream start); entry j >= 1 is the time of
    the j-th rejection. ``cand_after[j]`` counts candidates (p <= lam) seen
    strictly after ``reject_times[j]``.
    """

    alpha: float
    lam: float = 0.5
    w0: float = None
    gamma_exp: float = 1.6
    t: int = 0
    reject_times: tuple = (0,)
    cand_after: tuple = (0,)
    spent: float = 0.0
    last_level: float = 0.0
    gamma_norm: float = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.lam < 1.0:
            raise InvalidInputError(f"lambda must be in (0, 1), got {self.lam}")
        if self.w0 is None:
            object.__setattr__(self, "w0", self.alpha / 2.0)
        if not 0.0 <= self.w0 <= self.alpha:
            raise InvalidInputError("initial wealth must lie in [0, alpha]")
        if self.gamma_exp <= 1.0:
            raise InvalidInputError("spending exponent must exceed 1 for a summable sequence")
        if self.gamma_norm is None:
            object.__setattr__(self, "gamma_norm", float(zeta(self.gamma_exp, 1)))

    @property
    def rejections(self):
        return len(self.reject_times) - 1

    @property
    def fdp_hat(self):
        """SAFFRON's running FDP estimate; kept <= alpha by construction."""
        return self.spent / max(self.rejections, 1)

    @property
    def wealth(self):
        return self.alpha * max(self.rejections, 1) - self.spent

    def gamma(self, j):
        return float(j) ** -self.gamma_exp / self.gamma_norm

    def next_level(self):
        t = self.t + 1
        rt, ca = self.reject_times, self.cand_after
        level = self.w0 * float(t - ca[0]) ** -self.gamma_exp / self.gamma_norm
        if len(rt) > 1:
            level += (self.alpha - self.w0) * float(t - rt[1] - ca[1]) ** -self.gamma_exp / self.gamma_norm
        for j in range(2, len(rt)):
            level += self.alpha * float(t - rt[j] - ca[j]) ** -self.gamma_exp / self.gamma_norm
        level = (1.0 - self.lam) * level
        return self.lam if level > self.lam else level


def saffron_step(state, p):
    """Test one p-value; returns (rejected, next state)."""
    if not isinstance(state, SaffronState):
        raise InvalidInputError("SAFFRON state is not initialized")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p-value out of range: {p}")
    level = state.next_level()
    t = state.t + 1
    cand_after = state.cand_after
    spent = state.spent
    if p <= state.lam:
        cand_after = tuple(c + 1 for c in cand_after)
    else:
        spent = spent + level / (1.0 - state.lam)
    rejected = p <= level
    reject_times = state.reject_times
    if rejected:
        reject_times = reject_times + (t,)
        cand_after = cand_after + (0,)
    new = replace(state, t=t, reject_times=reject_times, cand_after=cand_after,
                  spent=spent, last_level=level)
    return rejected, new


def saffron_run(pvalues, alpha, lam=0.5, w0=None, gamma_exp=1.6):
    """Whole-stream SAFFRON via the compiled kernel; returns (decisions, levels)."""
    state = SaffronState(alpha=alpha, lam=lam, w0=w0, gamma_exp=gamma_exp)
    p = np.ascontiguousarray(pvalues, dtype=np.float64).ravel()
    decisions, levels, _ = saffron_levels(p, state.alpha, state.lam, state.w0,
                                          state.gamma_exp, state.gamma_norm)
    return decisions.astype(bool), levels
