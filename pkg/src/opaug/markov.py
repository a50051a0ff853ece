"""Benchmark Markov chains on periodic grids and their noisy empirical estimates.

States of a D-dimensional grid with side K are the coordinate tuples
``v in {0, ..., K-1}^D``, flattened row-major (``np.ravel_multi_index``);
all moves wrap modulo K.  Coordinates are taken mod K, so formulas written
for ``v in {1, ..., K}`` give the same values.

Non-uniform drift: the probability of stepping from ``v`` to ``v - e_d`` is
``c + sin(2 pi v_d / K) / 8`` and to ``v + e_d`` is ``c - sin(2 pi v_d / K) / 8``
with ``c = 1/4`` in 2D and ``1/6`` in 3D.
"""

from dataclasses import dataclass, field

import numpy as np

from .augmentation import MatrixEnsemble
from .linalg import as_square, as_vector, solve

FAMILY_DIMS = {
    "drift1d": 1,
    "skip1d": 1,
    "complete1d": 1,
    "unif2d": 2,
    "nonunif2d": 2,
    "unif3d": 3,
    "nonunif3d": 3,
}
FAMILY_PARAMS = {
    "drift1d": {"l": 0.25, "r": 0.25},
    "skip1d": {"l1": 0.125, "l2": 0.125, "r1": 0.125, "r2": 0.125},
}
# (K, gamma) per grid dimension
GRID_DEFAULTS = {1: (16, 0.99), 2: (16, 0.99), 3: (8, 0.9)}

REWARD_KINDS = ("sine1d", "sine2d", "sine3d", "isotropic")
STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class ChainSpec:
    """A transition family with its grid size and discount factor.

    ``K`` and ``gamma`` default to 16 and 0.99 for 1D and 2D chains and to
    8 and 0.9 for 3D chains.
    """

    family: str
    K: int = None
    gamma: float = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILY_DIMS:
            raise ValueError(f"unknown chain family {self.family!r}; expected one of {sorted(FAMILY_DIMS)}")
        object.__setattr__(self, "family", family)
        k_default, gamma_default = GRID_DEFAULTS[FAMILY_DIMS[family]]
        K = k_default if self.K is None else self.K
        gamma = gamma_default if self.gamma is None else float(self.gamma)
        if int(K) != K or K < 1:
            raise ValueError(f"grid size K must be a positive integer, got {K}")
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"discount gamma must lie in (0, 1), got {gamma}")
        object.__setattr__(self, "K", int(K))
        object.__setattr__(self, "gamma", gamma)

        expected = FAMILY_PARAMS.get(family, {})
        unknown = set(self.params) - set(expected)
        if unknown:
            raise ValueError(f"{family} does not take parameters {sorted(unknown)}")
        params = {name: float(self.params.get(name, default)) for name, default in expected.items()}
        if any(p < 0 for p in params.values()) or sum(params.values()) > 1.0 + STOCHASTIC_TOL:
            raise ValueError(f"{family} move probabilities must be >= 0 with sum <= 1, got {params}")
        object.__setattr__(self, "params", params)

    @property
    def ndim(self):
        return FAMILY_DIMS[self.family]

    @property
    def n_states(self):
        return self.K**self.ndim

    @property
    def chain_id(self):
        parts = [self.family] + [f"{k}{v:g}" for k, v in self.params.items()]
        return "_".join(parts + [f"K{self.K}", f"g{self.gamma:g}"])


def _grid_moves(spec):
    """Return a list of (offset vector, probability array over states)."""
    D, K = spec.ndim, spec.K
    coords = np.indices((K,) * D).reshape(D, -1)
    n = spec.n_states
    p = spec.params
    if spec.family == "drift1d":
        table = {-1: p["l"], 0: 1.0 - p["l"] - p["r"], 1: p["r"]}
        return [((s,), np.full(n, w)) for s, w in table.items()]
    if spec.family == "skip1d":
        stay = 1.0 - p["l1"] - p["l2"] - p["r1"] - p["r2"]
        table = {-2: p["l1"], -1: p["l2"], 0: stay, 1: p["r1"], 2: p["r2"]}
        return [((s,), np.full(n, w)) for s, w in table.items()]
    if spec.family == "complete1d":
        return [((s,), np.full(n, 1.0 / K)) for s in range(K)]
    base = 1.0 / (2 * D)
    moves = []
    for d in range(D):
        e = np.zeros(D, dtype=int)
        e[d] = 1
        if spec.family.startswith("nonunif"):
            tilt = np.sin(2 * np.pi * coords[d] / K) / 8.0
        else:
            tilt = np.zeros(n)
        moves.append((tuple(-e), base + tilt))
        moves.append((tuple(e), base - tilt))
    return moves


def build_chain(spec):
    """Dense row-stochastic transition matrix of the chain described by ``spec``."""
    D, K = spec.ndim, spec.K
    shape = (K,) * D
    coords = np.indices(shape).reshape(D, -1)
    rows = np.arange(spec.n_states)
    p = np.zeros((spec.n_states, spec.n_states))
    for offset, prob in _grid_moves(spec):
        target = np.ravel_multi_index(tuple((coords[d] + offset[d]) % K for d in range(D)), shape)
        np.add.at(p, (rows, target), prob)
    return check_transition_matrix(p)


def check_transition_matrix(p):
    p = as_square(p, "transition matrix")
    if np.any(p < 0) or np.any(p > 1.0 + STOCHASTIC_TOL):
        raise ValueError("transition matrix entries must lie in [0, 1]")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
        raise ValueError("transition matrix rows must sum to 1")
    return p


def value_operator(p, gamma):
    """``A = I - gamma P``, nonsingular for any stochastic P when 0 < gamma < 1."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"discount gamma must lie in (0, 1), got {gamma}")
    p = as_square(p, "transition matrix")
    return np.eye(p.shape[0]) - gamma * p


def solve_value(p, gamma, r):
    """Value function ``q`` solving ``(I - gamma P) q = r``."""
    a = value_operator(p, gamma)
    return solve(a, as_vector(r, a.shape[0], "reward"))


def reward_vector(kind, spec, rng=None):
    kind = str(kind).lower()
    if kind == "sine":
        kind = f"sine{spec.ndim}d"
    if kind not in REWARD_KINDS:
        raise ValueError(f"unknown reward kind {kind!r}; expected one of {REWARD_KINDS}")
    if kind == "isotropic":
        if rng is None:
            raise ValueError("an isotropic reward needs a random generator")
        return rng.standard_normal(spec.n_states)
    if int(kind[4]) != spec.ndim:
        raise ValueError(f"reward {kind} does not match the {spec.ndim}D chain {spec.family}")
    coords = np.indices((spec.K,) * spec.ndim).reshape(spec.ndim, -1)
    if spec.ndim == 1:
        return np.sin(4 * np.pi * coords[0] / spec.K)
    return -np.prod(np.sin(2 * np.pi * coords / spec.K), axis=0)


# -- empirical transitions and their bootstrap ----------------------------


def _row_support(p):
    """Compact rows: columns (S, w) and probabilities (S, w), nonzeros first."""
    mask = p > 0
    width = max(int(mask.sum(axis=1).max()), 1)
    cols = np.argsort(~mask, axis=1, kind="stable")[:, :width]
    return cols, np.take_along_axis(p, cols, axis=1)


def _multinomial_rows(probs, n, rng, size=None):
    # guard against the last cumulative probability drifting above 1
    probs = probs / probs.sum(axis=1, keepdims=True)
    shape = probs.shape[:1] if size is None else (size, probs.shape[0])
    return rng.multinomial(n, probs, size=shape)


class RowSparseBatch:
    """A batch of matrices sharing a per-row column pattern.

    ``cols`` has shape (S, w) and ``vals`` shape (size, S, w); row ``s`` of
    matrix ``i`` has entry ``vals[i, s, j]`` at column ``cols[s, j]``.
    """

    def __init__(self, cols, vals):
        self.cols = cols
        self.vals = vals

    def __len__(self):
        return self.vals.shape[0]

    @property
    def dim(self):
        return self.cols.shape[0]

    def matvec(self, x):
        return np.sum(self.vals * x[:, self.cols], axis=-1)

    def __getitem__(self, i):
        out = np.zeros((self.dim, self.dim))
        rows = np.broadcast_to(np.arange(self.dim)[:, None], self.cols.shape)
        np.add.at(out, (rows, self.cols), self.vals[i])
        return out

    def toarray(self):
        return np.stack([self[i] for i in range(len(self))])


def sample_empirical_transition(p, n, rng):
    """Row-wise empirical estimate of ``p`` from ``n`` observed transitions per state.

    Row ``v`` is ``Multinomial(n, p[v]) / n``, drawn independently per row.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"transition count n must be a positive integer, got {n}")
    p = check_transition_matrix(p)
    cols, probs = _row_support(p)
    counts = _multinomial_rows(probs, int(n), rng)
    return RowSparseBatch(cols, (counts / n)[None])[0]


class TransitionBootstrap:
    """Parametric bootstrap of ``A_hat = I - gamma P_hat`` under the multinomial noise model.

    Each draw resamples every row of ``P_hat`` as ``Multinomial(n, P_hat[v]) / n``.
    """

    def __init__(self, p_hat, n, gamma):
        self.p_hat = check_transition_matrix(p_hat)
        self.n = int(n)
        self.gamma = float(gamma)
        self.dim = self.p_hat.shape[0]
        self._cols, self._probs = _row_support(self.p_hat)

    def _sample_rows(self, rng, size):
        return _multinomial_rows(self._probs, self.n, rng, size) / self.n

    def operators(self):
        """Ensemble of dense draws ``A_b = I - gamma P_b``."""
        eye = np.eye(self.dim)

        def sampler(rng, size):
            batch = RowSparseBatch(self._cols, -self.gamma * self._sample_rows(rng, size))
            return batch.toarray() + eye

        return MatrixEnsemble.from_sampler(sampler, self.dim)

    def perturbations(self):
        """Ensemble of row-sparse draws ``Z_b = A_b - A_hat = -gamma (P_b - P_hat)``."""

        def sampler(rng, size):
            return RowSparseBatch(self._cols, -self.gamma * (self._sample_rows(rng, size) - self._probs))

        return MatrixEnsemble.from_sampler(sampler, self.dim)
