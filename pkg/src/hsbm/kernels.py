"""Conjugate model families for block interaction parameters.

Two kernels are provided:

* ``PoissonGamma`` (degree-corrected model): edge weight between a pair is
  Poisson with rate ``lambda * rho_ij`` and ``lambda ~ Gamma(a0, b0)``.
* ``BernoulliBeta`` (plain model): an edge is present with probability
  ``theta`` and ``theta ~ Beta(a0, b0)``.

Both work with a two-component sufficient statistic ``(e, w)``: ``e`` is
the (expected) edge mass and ``w`` the exposure -- the summed ``rho`` over
pairs for Poisson, the pair count for Bernoulli.  Scores are log-scale and
omit every term that depends on the data only (``A_ij!``, ``rho^A``), so
they are comparable across groups for one vertex but not across vertices.

All functions accept scalars or numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import betaln, digamma, gammaln

POISSON = 0
BERNOULLI = 1
RULE_MF = 0
RULE_COLLAPSED = 1

_RULES = {"mf": RULE_MF, "collapsed": RULE_COLLAPSED}


class InvalidStatistic(ValueError):
    """Bernoulli statistics with more edges than pairs."""


@dataclass(frozen=True)
class Prior:
    a0: float = 1.0
    b0: float = 1.0

    def __post_init__(self):
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("prior parameters must be positive")


class SuffStat(NamedTuple):
    e: float
    w: float


class NatParam(NamedTuple):
    first: float
    second: float


def rule_code(rule: str) -> int:
    try:
        return _RULES[rule]
    except KeyError:
        raise ValueError(f"unknown local rule {rule!r}") from None


class Kernel:
    name: str
    code: int

    def posterior_update(self, prior: Prior, E, W):
        raise NotImplementedError

    def expected_nat_param(self, alpha, beta) -> NatParam:
        raise NotImplementedError

    def mf_log_score(self, nat: NatParam, s: SuffStat):
        raise NotImplementedError

    def collapsed_log_score(self, alpha, beta, s: SuffStat):
        raise NotImplementedError

    def log_marginal(self, prior: Prior, E, W):
        """Log marginal likelihood of statistics ``(E, W)`` under the prior."""
        return self.collapsed_log_score(prior.a0, prior.b0, SuffStat(E, W))

    def log_score(self, rule: str, alpha, beta, s: SuffStat):
        """Score one node term under the mean-field or collapsed rule."""
        if rule_code(rule) == RULE_MF:
            return self.mf_log_score(self.expected_nat_param(alpha, beta), s)
        return self.collapsed_log_score(alpha, beta, s)

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class PoissonGamma(Kernel):
    name = "hdsb"
    code = POISSON

    def posterior_update(self, prior, E, W):
        if np.any(np.asarray(E) < 0) or np.any(np.asarray(W) < 0):
            raise InvalidStatistic("statistics must be nonnegative")
        return prior.a0 + E, prior.b0 + W

    def expected_nat_param(self, alpha, beta):
        # (E[ln lambda], -E[lambda])
        return NatParam(digamma(alpha) - np.log(beta), -np.divide(alpha, beta))

    def mf_log_score(self, nat, s):
        return nat[0] * s[0] + nat[1] * s[1]

    def collapsed_log_score(self, alpha, beta, s):
        e, w = s
        return (gammaln(np.add(alpha, e)) - gammaln(alpha) + alpha * np.log(beta)
                - np.add(alpha, e) * np.log(np.add(beta, w)))


class BernoulliBeta(Kernel):
    name = "hsb"
    code = BERNOULLI

    @staticmethod
    def _check(e, w):
        if np.any(np.asarray(e) < 0) or np.any(np.asarray(e) > np.asarray(w) + 1e-9):
            raise InvalidStatistic("Bernoulli statistics need 0 <= e <= w")

    def posterior_update(self, prior, E, W):
        self._check(E, W)
        return prior.a0 + E, prior.b0 + np.subtract(W, E)

    def expected_nat_param(self, alpha, beta):
        # (E[ln theta - ln(1-theta)], E[ln(1-theta)])
        return NatParam(digamma(alpha) - digamma(beta),
                        digamma(beta) - digamma(np.add(alpha, beta)))

    def mf_log_score(self, nat, s):
        # theta^e (1-theta)^(w-e) = (theta/(1-theta))^e (1-theta)^w
        return nat[0] * s[0] + nat[1] * s[1]

    def collapsed_log_score(self, alpha, beta, s):
        e, w = s
        self._check(e, w)
        return betaln(np.add(alpha, e), beta + np.subtract(w, e)) - betaln(alpha, beta)


def get_kernel(model: str) -> Kernel:
    if model in ("hdsb", "poisson"):
        return PoissonGamma()
    if model in ("hsb", "bernoulli"):
        return BernoulliBeta()
    raise ValueError(f"unknown model {model!r}")
