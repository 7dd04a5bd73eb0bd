"""Matrix-normal-Wishart conjugate machinery for Gaussian multivariate regression.

The model is ``Y | B, Omega ~ N_{n,q}(X B, I_n, Omega^{-1})`` with the conjugate
prior ``B | Omega ~ N_{p+1,q}(B0, C^{-1}, Omega^{-1})``, ``Omega ~ W_q(a, R)``.
The Wishart is parameterized so that ``E[Omega] = a R^{-1}``.

Everything is kept in log space. Determinants come from Cholesky factors and a
failed factorization is the s.p.d. test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .errors import DomainError, NotSPDError, ProprietyError, RankDeficientError, DagscoreError

LOG_2PI = math.log(2.0 * math.pi)
RANK_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ResponseMatrix:
    """n x q response matrix with column labels."""

    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim == 1:
            vals = _frozen(vals[:, None])
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise DagscoreError(f"response matrix must be 2-d and non-empty, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            i, j = np.argwhere(~np.isfinite(vals))[0]
            raise DagscoreError(f"non-finite response value at row {i + 1}, column {j + 1}")
        labels = tuple(self.labels) or tuple(f"y{j + 1}" for j in range(vals.shape[1]))
        if len(labels) != vals.shape[1]:
            raise DagscoreError("number of response labels does not match number of columns")
        if len(set(labels)) != len(labels):
            raise DagscoreError("response labels must be unique")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]

    def columns(self, J: Sequence[int]) -> "ResponseMatrix":
        J = list(J)
        return ResponseMatrix(self.values[:, J], tuple(self.labels[j] for j in J))

    def take_rows(self, rows) -> "ResponseMatrix":
        return ResponseMatrix(self.values[rows], self.labels)


@dataclass(frozen=True)
class DesignMatrix:
    """n x (p+1) design matrix whose first column is the unit vector.

    Full column rank is checked lazily by :func:`compute_stats`, which is
    where the Cholesky factor of X'X gets built anyway.
    """

    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 2 or vals.shape[1] < 1:
            raise DagscoreError(f"design matrix must be 2-d with >= 1 column, got {vals.shape}")
        if not np.all(vals[:, 0] == 1.0):
            raise DagscoreError("first column of the design matrix must be the unit vector")
        if not np.all(np.isfinite(vals)):
            raise DagscoreError("design matrix has non-finite entries")
        p = vals.shape[1] - 1
        labels = tuple(self.labels) if self.labels else tuple(f"x{k + 1}" for k in range(p))
        if len(labels) != p:
            raise DagscoreError("number of predictor labels must equal p (intercept unlabeled)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def intercept_only(cls, n: int) -> "DesignMatrix":
        return cls(np.ones((n, 1)), ())

    @classmethod
    def from_predictors(cls, Z: np.ndarray, labels: Sequence[str] = ()) -> "DesignMatrix":
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        return cls(np.column_stack([np.ones(Z.shape[0]), Z]), tuple(labels))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1] - 1

    def take_rows(self, rows) -> "DesignMatrix":
        return DesignMatrix(self.values[rows], self.labels)


@dataclass(frozen=True)
class PredictorPool:
    """The n x p_star matrix Z of candidate predictors."""

    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim == 1:
            vals = _frozen(vals[:, None])
        if not np.all(np.isfinite(vals)):
            raise DagscoreError("predictor pool has non-finite entries")
        labels = tuple(self.labels) or tuple(f"z{k + 1}" for k in range(vals.shape[1]))
        if len(labels) != vals.shape[1]:
            raise DagscoreError("number of predictor labels does not match number of columns")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def empty(cls, n: int) -> "PredictorPool":
        return cls(np.zeros((n, 0)), ())

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p_star(self) -> int:
        return self.values.shape[1]

    def design(self, subset: Sequence[int]) -> DesignMatrix:
        subset = sorted(subset)
        return DesignMatrix.from_predictors(
            self.values[:, subset].reshape(self.n, len(subset)),
            [self.labels[k] for k in subset],
        )


@dataclass(frozen=True)
class MnwHyper:
    """Hyperparameters (B0, C, a, R) of a matrix normal Wishart law."""

    b_mean: np.ndarray
    c_prec: np.ndarray
    dof: float
    r_scale: np.ndarray
    _chol_c: np.ndarray = field(default=None, repr=False, compare=False)
    _chol_r: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        b = _frozen(self.b_mean)
        c = _frozen(self.c_prec)
        r = _frozen(self.r_scale)
        if b.ndim != 2 or c.shape != (b.shape[0], b.shape[0]) or r.shape != (b.shape[1], b.shape[1]):
            raise DagscoreError(
                f"inconsistent hyperparameter shapes: B0 {b.shape}, C {c.shape}, R {r.shape}"
            )
        q = b.shape[1]
        if not self.dof > q - 1:
            raise ProprietyError(f"Wishart degrees of freedom {self.dof} must exceed q-1 = {q - 1}")
        object.__setattr__(self, "b_mean", b)
        object.__setattr__(self, "c_prec", c)
        object.__setattr__(self, "r_scale", r)
        object.__setattr__(self, "dof", float(self.dof))
        object.__setattr__(self, "_chol_c", cholesky(c, "C"))
        object.__setattr__(self, "_chol_r", cholesky(r, "R"))

    @property
    def p_plus_1(self) -> int:
        return self.b_mean.shape[0]

    @property
    def q(self) -> int:
        return self.b_mean.shape[1]


@dataclass(frozen=True)
class SufficientStats:
    xtx: np.ndarray
    xty: np.ndarray
    bhat: np.ndarray
    ete: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.xtx.shape[0] - 1

    @property
    def q(self) -> int:
        return self.ete.shape[0]


def cholesky(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor; raises NotSPDError when the factorization fails."""
    a = np.asarray(a, dtype=float)
    try:
        return linalg.cholesky(a, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NotSPDError(f"{name} is not symmetric positive definite") from exc


def logdet_chol(L: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def logdet_spd(a: np.ndarray, name: str = "matrix") -> float:
    return logdet_chol(cholesky(a, name))


def log_multigamma(q: int, x: float) -> float:
    """log of the q-dimensional gamma function at x."""
    if q < 1:
        raise DomainError(f"dimension must be a positive integer, got {q}")
    if not x > (q - 1) / 2.0:
        raise DomainError(f"log_multigamma({q}, {x}) needs x > {(q - 1) / 2.0}")
    j = np.arange(1, q + 1)
    return q * (q - 1) / 4.0 * math.log(math.pi) + float(np.sum(gammaln(x + (1.0 - j) / 2.0)))


def _rank_checked_cholesky(xtx: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    # Unpivoted Cholesky that keeps going past tiny pivots so that every
    # dependent column is reported, not just the first one.
    k = xtx.shape[0]
    tol = RANK_TOL * float(np.max(np.diag(xtx)))
    L = np.zeros_like(xtx)
    bad = []
    for j in range(k):
        d = xtx[j, j] - L[j, :j] @ L[j, :j]
        if d <= tol:
            bad.append(j)
            continue
        L[j, j] = math.sqrt(d)
        L[j + 1 :, j] = (xtx[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    if bad:
        raise RankDeficientError([labels[j] for j in bad])
    return L


def compute_stats(Y: ResponseMatrix, X: DesignMatrix) -> SufficientStats:
    """Least-squares fit of Y on X: X'X, X'Y, B-hat and residual cross-products."""
    if Y.n != X.n:
        raise DagscoreError(f"Y has {Y.n} rows but X has {X.n}")
    x, y = X.values, Y.values
    xtx = x.T @ x
    xtx = (xtx + xtx.T) / 2.0
    xty = x.T @ y
    L = _rank_checked_cholesky(xtx, ("(intercept)",) + tuple(X.labels))
    bhat = linalg.cho_solve((L, True), xty)
    resid = y - x @ bhat
    ete = resid.T @ resid
    ete = (ete + ete.T) / 2.0
    return SufficientStats(_frozen(xtx), _frozen(xty), _frozen(bhat), _frozen(ete), Y.n)


def log_norm_const(hyper: MnwHyper) -> float:
    """log K(C, R, a) of the matrix normal Wishart density."""
    k, q, a = hyper.p_plus_1, hyper.q, hyper.dof
    return (
        q * k / 2.0 * LOG_2PI
        + a * q / 2.0 * math.log(2.0)
        + log_multigamma(q, a / 2.0)
        - q / 2.0 * logdet_chol(hyper._chol_c)
        - a / 2.0 * logdet_chol(hyper._chol_r)
    )


def posterior_update(hyper: MnwHyper, stats: SufficientStats) -> MnwHyper:
    """Conjugate prior-to-posterior update of (B0, C, a, R).

    The discrepancy term uses {C^-1 + (X'X)^-1}^-1 = C - C (C + X'X)^-1 C,
    so neither C nor X'X is inverted.
    """
    if hyper.p_plus_1 != stats.xtx.shape[0] or hyper.q != stats.q:
        raise DagscoreError("hyperparameter and data dimensions disagree")
    c_post = hyper.c_prec + stats.xtx
    c_post = (c_post + c_post.T) / 2.0
    L = cholesky(c_post, "C + X'X")
    b_post = linalg.cho_solve((L, True), stats.xty + hyper.c_prec @ hyper.b_mean)
    delta = hyper.b_mean - stats.bhat
    c_delta = hyper.c_prec @ delta
    w = linalg.solve_triangular(L, c_delta, lower=True)
    d = delta.T @ c_delta - w.T @ w
    r_post = hyper.r_scale + stats.ete + d
    r_post = (r_post + r_post.T) / 2.0
    return MnwHyper(b_post, c_post, hyper.dof + stats.n, r_post)


def log_marginal_full(hyper: MnwHyper, stats: SufficientStats) -> float:
    """log m(Y): ratio of posterior to prior normalizing constants."""
    post = posterior_update(hyper, stats)
    return log_norm_const(post) - log_norm_const(hyper) - stats.n * stats.q / 2.0 * LOG_2PI


def subset_hyper(hyper: MnwHyper, J: Sequence[int]) -> MnwHyper:
    """Induced prior on (B_J, Omega_{JJ.Jbar}) for the response columns in J."""
    J = sorted(set(int(j) for j in J))
    q = hyper.q
    if not J or J[0] < 0 or J[-1] >= q:
        raise DagscoreError(f"subset must be a nonempty subset of 0..{q - 1}")
    if len(J) == q:
        return hyper
    n_out = q - len(J)
    dof = hyper.dof - n_out
    if not dof > len(J) - 1:
        raise ProprietyError(
            f"reduced degrees of freedom {dof} must exceed |J|-1 = {len(J) - 1}"
        )
    return MnwHyper(hyper.b_mean[:, J], hyper.c_prec, dof, hyper.r_scale[np.ix_(J, J)])


def log_likelihood(Y: ResponseMatrix, X: DesignMatrix, B: np.ndarray, omega: np.ndarray) -> float:
    """Matrix normal log density of Y given (B, Omega), evaluated from the raw residuals."""
    resid = Y.values - X.values @ B
    n, q = resid.shape
    return (
        n / 2.0 * logdet_spd(omega, "Omega")
        - n * q / 2.0 * LOG_2PI
        - 0.5 * float(np.trace(omega @ resid.T @ resid))
    )


def log_mnw_density(hyper: MnwHyper, B: np.ndarray, omega: np.ndarray) -> float:
    """Joint matrix normal Wishart log density p(B, Omega)."""
    k, q, a = hyper.p_plus_1, hyper.q, hyper.dof
    dev = B - hyper.b_mean
    quad = dev.T @ hyper.c_prec @ dev + hyper.r_scale
    return (
        (k + a - q - 1) / 2.0 * logdet_spd(omega, "Omega")
        - 0.5 * float(np.trace(omega @ quad))
        - log_norm_const(hyper)
    )


def schur_complement(a: np.ndarray, J: Sequence[int]) -> np.ndarray:
    """A_{JJ.Jbar} = A_JJ - A_{J Jbar} A_{Jbar Jbar}^{-1} A_{Jbar J}."""
    J = list(J)
    rest = [k for k in range(a.shape[0]) if k not in set(J)]
    if not rest:
        return np.array(a[np.ix_(J, J)], dtype=float)
    a_jj = a[np.ix_(J, J)]
    a_jr = a[np.ix_(J, rest)]
    a_rr = a[np.ix_(rest, rest)]
    return a_jj - a_jr @ np.linalg.solve(a_rr, a_jr.T)
