"""Augmented inverse operators and estimators of the augmentation factor.

The augmented estimate of ``A^{-1} b`` from a noisy operator ``A_hat`` is

    x_beta = (A_hat^{-1} - beta K_hat) b

where ``K_hat`` is the augmentation matrix (one of the kinds below) and
``beta`` the augmentation factor.  ``optimal_beta_exact`` computes the
error-minimizing factor over a finite ensemble with the true operator known;
the ``bootstrap_beta_*`` functions estimate it by parametric bootstrap, with
``A_hat`` standing in for the truth and draws ``A_b`` from the estimated noise
model standing in for ``A_hat``.
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateAugmentationError, DimensionError, NoiseModelError, SingularMatrixError
from .linalg import LUFactor, _inner, as_spd, as_square, as_vector, factorize

# Draws are processed in fixed-size chunks so memory stays bounded and the
# random stream is consumed identically for a given m.
CHUNK = 32
MAX_REJECTED_FRACTION = 0.1

# Weights on the quadratic terms of the second-order Taylor estimator,
# (numerator b^T W^2 b, denominator q^T W^2 q) with W = Z_b A_hat^{-1}.
TAYLOR_WEIGHTS = (1.0, 2.0)
# Weights that result if the quadratic term of the inverse expansion is
# written as 2 A^{-1} Z A^{-1} Z A^{-1}; overestimates beta by ~50% as noise -> 0.
DOUBLED_TAYLOR_WEIGHTS = (2.0, 4.0)


# -- augmentation kinds ---------------------------------------------------


@dataclass(frozen=True)
class InverseShrink:
    """``K_hat = A_hat^{-1}``: shrinks the inverse toward zero."""

    def apply(self, factor, x):
        return factor.solve(x)

    def matrix(self, a_inv):
        return a_inv


@dataclass(frozen=True, eq=False)
class AutocorrelationShrink:
    """``K_hat = A_hat^{-1} R^{-1}`` for a right-hand side with autocorrelation ``R``."""

    r_inverse: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r_inverse", as_spd(self.r_inverse, "r_inverse"))

    def apply(self, factor, x):
        return factor.solve(self.r_inverse @ x)

    def matrix(self, a_inv):
        return a_inv @ self.r_inverse


@dataclass(frozen=True, eq=False)
class ExplicitMatrix:
    """A fixed augmentation matrix that does not depend on the draw."""

    k: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k", as_square(self.k, "k"))

    def apply(self, factor, x):
        return self.k @ x

    def matrix(self, a_inv):
        return self.k


# -- ensembles and priors -------------------------------------------------


class MatrixEnsemble:
    """A distribution over n x n matrices.

    Either a finite list of atoms with probabilities (``from_atoms``) or a
    sampler ``f(rng, size)`` returning ``size`` draws (``from_sampler``).
    Sampler draws may be an ``(size, n, n)`` array or any batch object that
    supports ``len``, ``batch[i]`` (dense matrix) and ``batch.matvec(x)`` for
    ``x`` of shape ``(size, n)``.
    """

    def __init__(self, dim, atoms=None, probs=None, sampler=None):
        self.dim = dim
        self.atoms = atoms
        self.probs = probs
        self._sampler = sampler

    @classmethod
    def from_atoms(cls, atoms: Sequence, probs: Optional[Sequence[float]] = None):
        atoms = [as_square(a, "atom") for a in atoms]
        if not atoms:
            raise ValueError("ensemble needs at least one atom")
        dim = atoms[0].shape[0]
        if any(a.shape[0] != dim for a in atoms):
            raise DimensionError("ensemble atoms have different dimensions")
        if probs is None:
            probs = np.full(len(atoms), 1.0 / len(atoms))
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (len(atoms),):
            raise DimensionError("one probability per atom is required")
        if np.any(probs < 0) or np.any(probs > 1) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must lie in [0, 1] and sum to 1")
        return cls(dim, atoms=atoms, probs=probs)

    @classmethod
    def from_sampler(cls, sampler: Callable, dim: int):
        return cls(dim, sampler=sampler)

    @property
    def is_discrete(self):
        return self.atoms is not None

    def sample(self, rng, size):
        if self._sampler is not None:
            return self._sampler(rng, size)
        idx = rng.choice(len(self.atoms), size=size, p=self.probs)
        return np.stack(self.atoms)[idx]


@dataclass(frozen=True, eq=False)
class Deterministic:
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", as_vector(self.b, name="b"))

    @property
    def dim(self):
        return self.b.shape[0]

    @property
    def autocorrelation(self):
        return np.outer(self.b, self.b)

    @property
    def second_moment(self):
        return float(self.b @ self.b)

    def sample(self, rng, size):
        return np.tile(self.b, (size, 1))


@dataclass(frozen=True)
class IsotropicGaussian:
    dim: int

    @property
    def autocorrelation(self):
        return np.eye(self.dim)

    @property
    def second_moment(self):
        return float(self.dim)

    def sample(self, rng, size):
        return rng.standard_normal((size, self.dim))


@dataclass(frozen=True, eq=False)
class GaussianWithAutocorrelation:
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", as_spd(self.r, "r"))

    @property
    def dim(self):
        return self.r.shape[0]

    @property
    def autocorrelation(self):
        return self.r

    @property
    def second_moment(self):
        return float(np.trace(self.r))

    def sample(self, rng, size):
        z = rng.standard_normal((size, self.dim))
        return z @ _psd_sqrt(self.r).T


def _psd_sqrt(m):
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


# -- augmented solve and exact optimum ------------------------------------


def apply_augmented(a_hat, beta, kind, b):
    """Return ``(A_hat^{-1} - beta K_hat) b``."""
    factor = factorize(a_hat)
    b = as_vector(b, factor.dim, "b")
    x = factor.solve(b)
    if isinstance(kind, InverseShrink):
        return x - beta * x
    return x - beta * kind.apply(factor, b)


class ExactBeta(NamedTuple):
    beta: float
    numerator: float
    denominator: float


def _inverse(a):
    f = LUFactor(a)
    return f.solve(np.eye(f.dim))


def optimal_beta_exact(ensemble, a_true, kind, b, r, full_output=False):
    """Exact minimizer of the expected ``||.||_{B,R}`` error over a finite ensemble.

    ``beta* = E<K, A_hat^{-1} - A^{-1}>_{B,R} / E||K||^2_{B,R}`` with the
    expectations taken as probability-weighted sums over the atoms.
    """
    if not ensemble.is_discrete:
        raise ValueError("optimal_beta_exact needs an ensemble of atoms")
    a_true = as_square(a_true, "a_true")
    b, r = as_spd(b, "b"), as_spd(r, "r")
    if not a_true.shape[0] == b.shape[0] == r.shape[0] == ensemble.dim:
        raise DimensionError("ensemble, a_true, b and r must share a dimension")
    a_inv = _inverse(a_true)
    num = den = scale = 0.0
    for atom, p in zip(ensemble.atoms, ensemble.probs):
        ai = _inverse(atom)
        k = kind.matrix(ai)
        num += p * _inner(k, ai - a_inv, b, r)
        den += p * _inner(k, k, b, r)
        scale += p * float(np.sum(k * k))
    scale *= np.linalg.norm(b, 2) * np.linalg.norm(r, 2)
    if not den > 1e-14 * scale:
        raise DegenerateAugmentationError("augmentation matrix has zero expected semi-norm")
    beta = num / den
    return ExactBeta(beta, num, den) if full_output else beta


def semi_bayes_objective(ensemble, a_true, kind, beta, b, r):
    """Expected ``||A_hat^{-1} - beta K - A^{-1}||^2_{B,R}`` over a finite ensemble."""
    a_true = as_square(a_true, "a_true")
    b, r = as_spd(b, "b"), as_spd(r, "r")
    a_inv = _inverse(a_true)
    total = 0.0
    for atom, p in zip(ensemble.atoms, ensemble.probs):
        ai = _inverse(atom)
        e = ai - beta * kind.matrix(ai) - a_inv
        total += p * _inner(e, e, b, r)
    return total


# -- bootstrap estimators -------------------------------------------------


@dataclass
class BetaEstimate:
    """A bootstrap estimate of the augmentation factor with its delta-method standard error."""

    beta: float
    stderr: float
    samples: int
    rejected: int = 0


def _ratio_stderr(num, den, c_num=0.0, c_den=0.0):
    # se of (c_num + mean(num)) / (c_den + mean(den)) by the delta method
    m = len(num)
    if m < 2:
        return float("nan")
    d = c_den + den.mean()
    ratio = (c_num + num.mean()) / d
    return float(np.std(num - ratio * den, ddof=1) / (abs(d) * np.sqrt(m)))


def _draw_matrix(draws, i):
    return np.asarray(draws[i], dtype=np.float64)


def _batch_matvec(draws, x):
    if isinstance(draws, np.ndarray):
        return np.einsum("kij,kj->ki", draws, x)
    return draws.matvec(x)


def _factorized_draws(ensemble, m, rng, tally):
    """Yield ``m`` LU factors of nonsingular draws, redrawing singular ones."""
    accepted = 0
    while accepted < m:
        need = min(CHUNK, m - accepted)
        draws = ensemble.sample(rng, need)
        for i in range(need):
            try:
                factor = LUFactor(_draw_matrix(draws, i))
            except SingularMatrixError:
                tally["rejected"] += 1
                if tally["rejected"] > MAX_REJECTED_FRACTION * m:
                    raise NoiseModelError(
                        f"{tally['rejected']} singular bootstrap draws out of {m} requested"
                    ) from None
                continue
            accepted += 1
            yield factor


def _check_m(m):
    if int(m) != m or m < 1:
        raise ValueError(f"sample count m must be a positive integer, got {m}")
    return int(m)


def bootstrap_beta_general(a_hat, bootstrap, kind, m, prior, rng, full_output=False):
    """Monte Carlo bootstrap estimate of beta for any augmentation kind and prior.

    ``beta = sum_i (A K_i b_i)^T A (A_i^{-1} - A^{-1}) b_i / sum_i ||A K_i b_i||^2``
    where ``A`` is ``a_hat``, ``A_i`` are draws from ``bootstrap`` and ``b_i``
    are drawn from ``prior``.
    """
    m = _check_m(m)
    factor = factorize(a_hat)
    a = factor.matrix
    if prior.dim != factor.dim or bootstrap.dim != factor.dim:
        raise DimensionError("prior, bootstrap and a_hat must share a dimension")
    b = prior.sample(rng, m)
    x_hat = factor.solve(b.T).T
    num = np.empty(m)
    den = np.empty(m)
    tally = {"rejected": 0}
    shrink_inverse = isinstance(kind, InverseShrink)
    for i, fb in enumerate(_factorized_draws(bootstrap, m, rng, tally)):
        u = fb.solve(b[i])
        kb = u if shrink_inverse else kind.apply(fb, b[i])
        v = a @ kb
        num[i] = v @ (a @ (u - x_hat[i]))
        den[i] = v @ v
    beta = float(num.sum() / den.sum())
    if not full_output:
        return beta
    return BetaEstimate(beta, _ratio_stderr(num, den), m, tally["rejected"])


def _is_identity(m):
    return np.array_equal(m, np.eye(m.shape[0]))


def _rhs_pair(rng, m, n, r_inv):
    # b ~ N(0, I), q ~ N(0, R^{-1}); q is b itself when R = I
    b = rng.standard_normal((m, n))
    if _is_identity(r_inv):
        return b, b
    z = rng.standard_normal((m, n))
    return b, z @ np.linalg.cholesky(r_inv).T


def bootstrap_beta_mc(a_hat, bootstrap, m, r_inv, rng, full_output=False):
    """Bootstrap beta for ``K_hat = A_hat^{-1} R^{-1}``.

    ``beta = 1 - sum_i b_i^T A_i^{-T} A^T b_i / sum_i ||A A_i^{-1} q_i||^2``
    with ``b_i ~ N(0, I)`` and ``q_i ~ N(0, R^{-1})``.  Each draw is
    factorized once; no inverse is formed.
    """
    m = _check_m(m)
    factor = factorize(a_hat)
    a = factor.matrix
    r_inv = as_spd(r_inv, "r_inv")
    if r_inv.shape[0] != factor.dim or bootstrap.dim != factor.dim:
        raise DimensionError("r_inv, bootstrap and a_hat must share a dimension")
    b, q = _rhs_pair(rng, m, factor.dim, r_inv)
    coupled = q is b
    num = np.empty(m)
    den = np.empty(m)
    tally = {"rejected": 0}
    for i, fb in enumerate(_factorized_draws(bootstrap, m, rng, tally)):
        wb = a @ fb.solve(b[i])
        wq = wb if coupled else a @ fb.solve(q[i])
        num[i] = b[i] @ wb
        den[i] = wq @ wq
    beta = float(1.0 - num.sum() / den.sum())
    if not full_output:
        return beta
    return BetaEstimate(beta, _ratio_stderr(num, den), m, tally["rejected"])


def _taylor_terms(factor, noise, b, q, rng):
    """Per-sample ``b^T W^2 b``, ``||W q||^2`` and ``q^T W^2 q`` with ``W = Z_i A^{-1}``."""
    m = b.shape[0]
    coupled = q is b
    bw2b = np.empty(m)
    wq2 = np.empty(m)
    qw2q = np.empty(m)
    for start in range(0, m, CHUNK):
        stop = min(start + CHUNK, m)
        z = noise.sample(rng, stop - start)

        def w(x):
            return _batch_matvec(z, factor.solve(x.T).T)

        qc = q[start:stop]
        y1 = w(qc)
        y2 = w(y1)
        wq2[start:stop] = np.sum(y1 * y1, axis=1)
        qw2q[start:stop] = np.sum(qc * y2, axis=1)
        if coupled:
            bw2b[start:stop] = qw2q[start:stop]
        else:
            bc = b[start:stop]
            bw2b[start:stop] = np.sum(bc * w(w(bc)), axis=1)
    return bw2b, wq2, qw2q


def _taylor_beta(bw2b, wq2, qw2q, tr_b, tr_q, weights, full_output):
    c_num, c_den = weights
    num = c_num * bw2b
    den = wq2 + c_den * qw2q
    beta = float(1.0 - (tr_b + num.mean()) / (tr_q + den.mean()))
    if not full_output:
        return beta
    return BetaEstimate(beta, _ratio_stderr(num, den, tr_b, tr_q), len(num))


def bootstrap_beta_taylor(a_hat, noise, m, r_inv, rng, weights=TAYLOR_WEIGHTS, full_output=False):
    """Second-order Taylor approximation of ``bootstrap_beta_mc``.

    ``noise`` is the ensemble of bootstrap perturbations ``Z_i = A_i - A_hat``.
    ``A_hat`` is factorized once; each sample costs two block solves and two
    products with ``Z_i``.  Terms linear in ``Z_i`` are dropped since they
    vanish in expectation.
    """
    m = _check_m(m)
    factor = factorize(a_hat)
    r_inv = as_spd(r_inv, "r_inv")
    if r_inv.shape[0] != factor.dim or noise.dim != factor.dim:
        raise DimensionError("r_inv, noise and a_hat must share a dimension")
    b, q = _rhs_pair(rng, m, factor.dim, r_inv)
    terms = _taylor_terms(factor, noise, b, q, rng)
    return _taylor_beta(*terms, float(factor.dim), float(np.trace(r_inv)), weights, full_output)


def bootstrap_beta_taylor_prior(a_hat, noise, m, prior, rng, weights=TAYLOR_WEIGHTS, full_output=False):
    """Taylor estimate for ``K_hat = A_hat^{-1}`` with right-hand sides drawn from ``prior``.

    Same expansion as ``bootstrap_beta_taylor`` with ``b_i = q_i ~ prior`` and
    both trace constants replaced by the prior's second moment ``tr(R)``.
    With an isotropic Gaussian prior this coincides with
    ``bootstrap_beta_taylor`` at ``R = I``.
    """
    m = _check_m(m)
    factor = factorize(a_hat)
    if prior.dim != factor.dim or noise.dim != factor.dim:
        raise DimensionError("prior, noise and a_hat must share a dimension")
    b = prior.sample(rng, m)
    terms = _taylor_terms(factor, noise, b, b, rng)
    tr = prior.second_moment
    return _taylor_beta(*terms, tr, tr, weights, full_output)


def threshold_beta(beta):
    beta = float(beta)
    if not np.isfinite(beta):
        raise ValueError(f"cannot threshold non-finite beta {beta}")
    return beta if beta > 0.0 else 0.0
