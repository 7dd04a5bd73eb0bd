"""Objective (fractional Bayes factor) marginal likelihoods.

The default prior ``p(B, Omega) ~ |Omega|^{(a_D - q - 1)/2}`` is turned into a
proper matrix normal Wishart by spending a fraction ``b = n0/n`` of the
likelihood. The remaining ``1 - b`` of the likelihood acts like ``n - n0``
observations with the same B-hat, X'X/n and E'E/n, which gives the closed
forms below.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DagscoreError, NotSPDError, ProprietyError
from .mnw import (
    DesignMatrix,
    MnwHyper,
    ResponseMatrix,
    SufficientStats,
    cholesky,
    compute_stats,
    log_multigamma,
    logdet_chol,
)

LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class FractionalConfig:
    """How to pick the default-prior exponent a_D and the training size n0.

    ``recommended`` uses a_D = q - 1 and n0 = p + 2 (so the fractional prior
    has a = q degrees of freedom); ``explicit`` takes both values as given.

    Fractional Bayes factors are only coherent when every model compared uses
    the same fraction b. When designs with different p are compared, set
    ``common_p`` to the largest p under consideration: recommended mode then
    uses n0 = common_p + 2 for every design.
    """

    mode: str = "recommended"
    a_d: Optional[float] = None
    n0: Optional[int] = None
    common_p: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("recommended", "explicit"):
            raise DagscoreError(f"unknown fractional mode {self.mode!r}")
        if self.mode == "explicit":
            if self.a_d is None or self.n0 is None:
                raise DagscoreError("explicit mode needs both a_d and n0")
            if int(self.n0) != self.n0 or self.n0 < 1:
                raise DagscoreError(f"n0 must be a positive integer, got {self.n0}")
            object.__setattr__(self, "n0", int(self.n0))
            object.__setattr__(self, "a_d", float(self.a_d))

    @classmethod
    def explicit(cls, a_d: float, n0: int) -> "FractionalConfig":
        return cls("explicit", a_d, n0)

    @classmethod
    def parse(cls, text: str) -> "FractionalConfig":
        """Parse ``recommended`` or ``a_d=F,n0=K``."""
        text = text.strip()
        if text == "recommended":
            return cls()
        m = re.fullmatch(r"a_d\s*=\s*([^,]+?)\s*,\s*n0\s*=\s*(\d+)", text)
        if not m:
            raise DagscoreError(f"cannot parse fractional setting {text!r}")
        try:
            a_d = float(m.group(1))
        except ValueError:
            raise DagscoreError(f"cannot parse a_d value {m.group(1)!r}") from None
        return cls.explicit(a_d, int(m.group(2)))

    def with_common_p(self, p_max: int) -> "FractionalConfig":
        """Same config with one fraction shared by all designs having p <= p_max."""
        if self.mode == "explicit":
            return self
        return FractionalConfig("recommended", common_p=int(p_max))

    def resolve(self, n: int, p: int, q: int) -> "FractionParams":
        if self.mode == "recommended":
            if self.common_p is not None and p > self.common_p:
                raise DagscoreError(f"design has p={p} > common_p={self.common_p}")
            base = p if self.common_p is None else self.common_p
            return FractionParams(float(q - 1), base + 2, n, p, q)
        return FractionParams(self.a_d, self.n0, n, p, q)

    def describe(self) -> str:
        if self.mode == "recommended":
            return "recommended" if self.common_p is None else f"recommended,common_p={self.common_p}"
        return f"a_d={self.a_d!r},n0={self.n0}"


@dataclass(frozen=True)
class FractionParams:
    """A FractionalConfig resolved against concrete (n, p, q).

    The fraction b is kept as the integer pair (n0, n).
    """

    a_d: float
    n0: int
    n: int
    p: int
    q: int

    def __post_init__(self):
        if not 0 < self.n0 < self.n:
            raise ProprietyError(
                f"training size n0={self.n0} must satisfy 0 < n0 < n={self.n}"
            )
        lhs = self.a_d + self.n0 - self.p
        if not lhs > self.q:
            raise ProprietyError(
                "condition i) a_D + n0 - p > q fails: "
                f"{self.a_d:g} + {self.n0} - {self.p} = {lhs:g} <= q = {self.q} "
                f"(left side must grow by more than {self.q - lhs:g})"
            )

    @property
    def dof(self) -> float:
        """Degrees of freedom a of the fractional prior on the full Omega."""
        return self.a_d + self.n0 - self.p - 1

    @property
    def log_fraction(self) -> float:
        return math.log(self.n0) - math.log(self.n)


@dataclass(frozen=True)
class SubsetScore:
    subset: tuple[int, ...]
    log_ml: float
    valid: bool
    reason: Optional[str] = None


def _canonical(J: Iterable[int], q: int) -> tuple[int, ...]:
    J = tuple(sorted(set(int(j) for j in J)))
    if J and (J[0] < 0 or J[-1] >= q):
        raise DagscoreError(f"subset {J} out of range for q={q}")
    return J


def subset_score_from_ete(ete: np.ndarray, J: Sequence[int], params: FractionParams) -> SubsetScore:
    """Closed-form log m(Y_J) from the full residual cross-product matrix.

    B-hat_J is the column subset of B-hat, so E_J'E_J is the principal
    submatrix of E'E indexed by J.
    """
    J = _canonical(J, params.q)
    k = len(J)
    if k == 0:
        return SubsetScore(J, 0.0, True)
    n, n0, p = params.n, params.n0, params.p
    if not k < n - p:
        return SubsetScore(
            J, -math.inf, False, f"|J|={k} violates |J| < n - p = {n - p}"
        )
    n_out = params.q - k
    try:
        L = cholesky(ete[np.ix_(J, J)], "residual cross-product")
    except NotSPDError:
        return SubsetScore(
            J, -math.inf, False, "residual cross-product E_J'E_J is not positive definite"
        )
    log_ml = (
        -(n - n0) * k / 2.0 * LOG_PI
        + log_multigamma(k, (params.a_d + n - p - 1 - n_out) / 2.0)
        - log_multigamma(k, (params.a_d + n0 - p - 1 - n_out) / 2.0)
        + k * (params.a_d + n0 - n_out) / 2.0 * params.log_fraction
        - (n - n0) / 2.0 * logdet_chol(L)
    )
    return SubsetScore(J, log_ml, True)


def log_ml_subset(
    config: FractionalConfig, Y: ResponseMatrix, X: DesignMatrix, J: Iterable[int]
) -> SubsetScore:
    """Fractional marginal likelihood of the response columns in J."""
    stats = compute_stats(Y, X)
    params = config.resolve(Y.n, X.p, Y.q)
    return subset_score_from_ete(stats.ete, J, params)


def log_ml_iid(config: FractionalConfig, Y: ResponseMatrix, J: Iterable[int]) -> SubsetScore:
    """The i.i.d. special case (no predictors, unknown mean)."""
    y = Y.values
    centered = y - y.mean(axis=0)
    ete = centered.T @ centered
    ete = (ete + ete.T) / 2.0
    params = config.resolve(Y.n, 0, Y.q)
    return subset_score_from_ete(ete, J, params)


def fractional_hyper(
    config: FractionalConfig, stats: SufficientStats, full: bool = True
) -> MnwHyper:
    """Fractional matrix normal Wishart prior built from the data.

    B0 = B-hat, C = (n0/n) X'X, a = a_D + n0 - p - 1, R = (n0/n) E'E. With
    ``full`` set, condition ii) (n > p + q) is checked first so that the error
    names it rather than surfacing as a Cholesky failure.
    """
    params = config.resolve(stats.n, stats.p, stats.q)
    if full and not stats.n > stats.p + stats.q:
        raise ProprietyError(
            f"condition ii) n > p + q fails: n={stats.n} <= p + q = {stats.p + stats.q} "
            f"(short by {stats.p + stats.q - stats.n + 1})"
        )
    frac = params.n0 / params.n
    return MnwHyper(stats.bhat, frac * stats.xtx, params.dof, frac * stats.ete)


def remaining_likelihood_stats(stats: SufficientStats, n0: int) -> SufficientStats:
    """Statistics of the likelihood raised to 1 - n0/n.

    That power is a Gaussian likelihood with n - n0 observations, the same
    B-hat, and X'X, X'Y, E'E all scaled by (n - n0)/n.
    """
    scale = (stats.n - n0) / stats.n
    return SufficientStats(
        stats.xtx * scale, stats.xty * scale, stats.bhat, stats.ete * scale, stats.n - n0
    )
