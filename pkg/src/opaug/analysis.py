"""Adversarial ensembles where the optimal augmentation factor turns negative,
and the small-noise expansion of the positivity criterion.

Every counter-example is a small finite ensemble, so its optimal factor is
computed exactly by ``optimal_beta_exact`` with numerically inverted atoms.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .augmentation import InverseShrink, MatrixEnsemble, optimal_beta_exact, semi_bayes_objective
from .errors import SingularMatrixError
from .linalg import LUFactor, as_square, as_vector, min_eig_sym, residual_norm_matrix


@dataclass
class CounterexampleReport:
    name: str
    parameter: float
    beta_star: float
    objective_at_optimum: float
    objective_at_zero: float
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        out = {
            "name": self.name,
            "parameter": self.parameter,
            "beta_star": self.beta_star,
            "objective_at_optimum": self.objective_at_optimum,
            "objective_at_zero": self.objective_at_zero,
        }
        out.update(self.extras)
        return out


def _report(name, parameter, ensemble, a_true, b, r, extras=None):
    kind = InverseShrink()
    beta = optimal_beta_exact(ensemble, a_true, kind, b, r)
    return CounterexampleReport(
        name,
        float(parameter),
        float(beta),
        semi_bayes_objective(ensemble, a_true, kind, beta, b, r),
        semi_bayes_objective(ensemble, a_true, kind, 0.0, b, r),
        extras or {},
    )


def _inv(a):
    f = LUFactor(a)
    return f.solve(np.eye(f.dim))


def anisotropy_ensemble(k):
    """Two equiprobable atoms ``I + Z`` and ``I - Z`` with ``Z = [[0, k], [0, -k]]``."""
    if k in (1, -1):
        raise SingularMatrixError(f"k = {k} makes an atom of the anisotropy ensemble singular")
    z = np.array([[0.0, k], [0.0, -k]])
    return MatrixEnsemble.from_atoms([np.eye(2) + z, np.eye(2) - z])


def anisotropy_mineig(k):
    """Smallest eigenvalue of the symmetric part of ``E[A^{-T} A^{-1} - A^{-T}]``.

    A negative value means some right-hand side ``b`` has ``b^T M b < 0`` and
    hence a negative optimal factor under the deterministic prior ``b``.
    """
    ens = anisotropy_ensemble(k)
    m = np.zeros((2, 2))
    for atom, p in zip(ens.atoms, ens.probs):
        ai = _inv(atom)
        m += p * (ai.T @ ai - ai.T)
    return min_eig_sym(0.5 * (m + m.T))


def anisotropy_beta(k, b=(2.0, -1.0)):
    b = as_vector(b, 2, "b")
    if not np.any(b):
        raise ValueError("b must be nonzero")
    ens = anisotropy_ensemble(k)
    # A = I, so the residual norm matrix is the identity
    return _report("anisotropy", k, ens, np.eye(2), np.eye(2), np.outer(b, b), {"b": b.tolist()})


def masking_beta(k):
    """Unbiased but asymmetric scalar noise ``Z in {I, kI, -(k+1)I}`` around ``A = I``."""
    if not k > 1:
        raise ValueError(f"masking example needs k > 1, got {k}")
    eye = np.eye(2)
    ens = MatrixEnsemble.from_atoms([eye + eye, eye + k * eye, eye - (k + 1) * eye])
    return _report("masking", k, ens, eye, eye, eye)


def l2_counterexample_beta(epsilon, norm="frobenius"):
    """Nearly singular ``A = [[1, -eps], [eps, 0]]`` with rotation noise ``+-[[0, 1], [-1, 0]]``.

    ``norm`` selects the objective: ``"frobenius"`` (B = I) or ``"residual"``
    (B = A^T A).  ``extras["scaled_beta"]`` is ``beta* eps^2``.
    """
    if not 0.0 < epsilon < 0.1:
        raise ValueError(f"epsilon must lie in (0, 0.1), got {epsilon}")
    a = np.array([[1.0, -epsilon], [epsilon, 0.0]])
    z = np.array([[0.0, 1.0], [-1.0, 0.0]])
    ens = MatrixEnsemble.from_atoms([a + z, a - z])
    if norm == "frobenius":
        b = np.eye(2)
    elif norm == "residual":
        b = residual_norm_matrix(a)
    else:
        raise ValueError(f"norm must be 'frobenius' or 'residual', got {norm!r}")
    report = _report("l2", epsilon, ens, a, b, np.eye(2), {"norm": norm})
    report.extras["scaled_beta"] = report.beta_star * epsilon**2
    return report


# -- small-noise expansion ------------------------------------------------


def f_objective(y):
    """``tr[(I+Y)^{-T} (I+Y)^{-1} - (I+Y)^{-T}]``; its expectation over ``Y = Z A^{-1}``
    is the residual-norm numerator of the optimal factor."""
    y = as_square(y, "y")
    inv = _inv(np.eye(y.shape[0]) + y)
    return float(np.sum(inv * inv) - np.trace(inv))


def second_variation(y):
    """``tr[(Y + Y^T)^T (Y + Y^T)]``, equal to ``2 tr[Y^T Y + Y Y]``.

    This is the coefficient of ``t^2`` in ``f(tY) + f(-tY)``.
    """
    y = as_square(y, "y")
    s = y + y.T
    return float(np.sum(s * s))


def symmetric_pair_sum(y):
    return f_objective(y) + f_objective(-y)


def trace_identity_sides(y):
    """Both sides of ``tr[(I-Y^2)^{-T} + (I-Y^2)^{-1}] = tr[(I+Y)^{-T} + (I-Y)^{-T}]``."""
    y = as_square(y, "y")
    eye = np.eye(y.shape[0])
    lhs = 2.0 * np.trace(_inv(eye - y @ y))
    rhs = np.trace(_inv(eye + y)) + np.trace(_inv(eye - y))
    return float(lhs), float(rhs)


class Overshoot(NamedTuple):
    mean_of_inverse: float
    inverse_of_mean: float
    stderr: float


def overshoot_demo(shape, scale, samples, rng, full_output=False):
    """Monte Carlo ``E[1/X]`` against ``1/E[X]`` for ``X ~ Gamma(shape, scale)``.

    For ``shape <= 2`` the variance of ``1/X`` is infinite, so the reported
    standard error is the sample one and converges slowly.
    """
    if not shape > 1:
        raise ValueError(f"E[1/X] diverges for shape <= 1 (got {shape})")
    if int(samples) != samples or samples < 1:
        raise ValueError(f"samples must be a positive integer, got {samples}")
    inv = 1.0 / rng.gamma(shape, scale, size=int(samples))
    se = float(inv.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("nan")
    out = Overshoot(float(inv.mean()), 1.0 / (shape * scale), se)
    return out if full_output else out[:2]
