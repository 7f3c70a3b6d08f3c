"""Conditional click probabilities p(k|n) of the time-multiplexed detector."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import comb

from .detector import ModeProbabilities
from .errors import NumericalError, ValidationError

DEFAULT_N_MAX = 8
COLUMN_TOL = 1e-10
FACTORIZATION_TOL = 1e-10


@dataclass(frozen=True)
class PhotonDistribution:
    """rho[n] over photon number, optionally with error bars.

    ``signed`` marks unconstrained estimates that may hold negative entries.
    ``iterations`` is set by iterative estimators.
    """

    rho: np.ndarray
    signed: bool = False
    std_err: np.ndarray | None = None
    iterations: int | None = None
    converged: bool | None = None
    least_squares: bool = False

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float)
        object.__setattr__(self, "rho", rho)
        if self.std_err is not None:
            object.__setattr__(self, "std_err", np.asarray(self.std_err, dtype=float))
        if not self.signed:
            if np.any(rho < 0) or abs(rho.sum() - 1.0) > 1e-9:
                raise ValidationError("unsigned photon distribution must be a probability vector")

    @property
    def n_max(self) -> int:
        return self.rho.size - 1

    @property
    def mean(self) -> float:
        return float(np.arange(self.rho.size) @ self.rho)


@dataclass(frozen=True)
class ConditionalMatrix:
    """p[k, n] = P(k clicks | n incident photons), k = 0..N, n = 0..n_max."""

    p: np.ndarray
    factorized: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2:
            raise ValidationError("conditional matrix must be 2-D")
        sums = p.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > COLUMN_TOL:
            raise ValidationError(f"columns must sum to 1 (worst {sums[np.argmax(np.abs(sums - 1))]!r})")
        if p.min() < -COLUMN_TOL or p.max() > 1 + COLUMN_TOL:
            raise ValidationError("conditional probabilities must lie in [0, 1]")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n_modes(self) -> int:
        return self.p.shape[0] - 1

    @property
    def n_max(self) -> int:
        return self.p.shape[1] - 1

    @property
    def is_square(self) -> bool:
        return self.p.shape[0] == self.p.shape[1]

    def forward(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if rho.shape[-1] != self.p.shape[1]:
            raise ValidationError(
                f"distribution has {rho.shape[-1]} entries, matrix expects {self.p.shape[1]}"
            )
        return rho @ self.p.T


def _subset_power_sums(modes: ModeProbabilities, ns: np.ndarray) -> np.ndarray:
    """A[t, j] = sum over subsets T with |T| = t of (q_loss + q(T)) ** ns[j]."""
    n_modes = modes.n_modes
    if n_modes > 20:
        raise ValidationError(f"inclusion-exclusion over 2**{n_modes} subsets is not supported")
    masks = np.arange(2**n_modes)
    bits = (masks[:, None] >> np.arange(n_modes)) & 1
    sizes = bits.sum(axis=1)
    base = modes.q_loss + bits @ modes.q
    powers = np.power(base[:, None], ns[None, :])
    out = np.zeros((n_modes + 1, ns.size))
    np.add.at(out, sizes, powers)
    return out


def _occupancy_from_power_sums(power_sums: np.ndarray) -> np.ndarray:
    # P(k) = sum_t (-1)^(k-t) C(N-t, k-t) A_t
    n_modes = power_sums.shape[0] - 1
    k = np.arange(n_modes + 1)
    t = np.arange(n_modes + 1)
    diff = k[:, None] - t[None, :]
    coeff = np.where(diff >= 0, (-1.0) ** np.abs(diff) * comb(n_modes - t[None, :], diff), 0.0)
    return coeff @ power_sums


def occupancy_matrix(modes: ModeProbabilities, n_max: int) -> np.ndarray:
    """Columns n = 0..n_max of the occupied-mode-count law.

    Each of n photons lands independently in mode i with probability q[i] or
    is lost with probability q_loss; k counts modes holding at least one
    photon. Evaluated by inclusion-exclusion over all 2**N mode subsets.
    """
    ns = np.arange(n_max + 1)
    p = _occupancy_from_power_sums(_subset_power_sums(modes, ns))
    # entries with k > n vanish analytically; kill cancellation residue
    p[np.arange(p.shape[0])[:, None] > ns[None, :]] = 0.0
    return np.clip(p, 0.0, 1.0)


def occupancy_distribution(modes: ModeProbabilities, n: int) -> np.ndarray:
    """P(exactly k modes occupied | n photons), k = 0..N."""
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ValidationError(f"photon number must be a non-negative integer, got {n!r}")
    return occupancy_matrix(modes, int(n))[:, -1]


def loss_matrix(eta: float, n_max: int) -> np.ndarray:
    """Binomial loss channel L[m, n] = C(n, m) eta**m (1 - eta)**(n - m)."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"eta must lie in [0, 1], got {eta!r}")
    n = np.arange(n_max + 1)
    return stats.binom.pmf(n[:, None], n[None, :], eta)


def factorized_matrix(n_modes: int, eta: float, n_max: int) -> np.ndarray:
    """Lossless balanced occupancy composed with a binomial loss of ``eta``."""
    occ = occupancy_matrix(ModeProbabilities.balanced(n_modes), n_max)
    return occ @ loss_matrix(eta, n_max)


def build_matrix(modes: ModeProbabilities, n_max: int = DEFAULT_N_MAX) -> ConditionalMatrix:
    """Truncated conditional matrix, rows k = 0..N and columns n = 0..n_max.

    For a balanced tree the loss-then-spread factorization is also computed
    and must agree with the direct evaluation; it is attached as
    ``factorized``. Unbalanced survivals do not factorize and get only the
    direct form.
    """
    if isinstance(n_max, bool) or int(n_max) != n_max or n_max < 1:
        raise ValidationError(f"n_max must be an integer >= 1, got {n_max!r}")
    direct = occupancy_matrix(modes, int(n_max))
    fact = None
    if modes.is_balanced:
        fact = factorized_matrix(modes.n_modes, modes.survival, int(n_max))
        worst = float(np.max(np.abs(fact - direct)))
        if worst > FACTORIZATION_TOL:
            raise NumericalError(f"factorized and direct matrices differ by {worst:.3e}")
    return ConditionalMatrix(p=direct, factorized=fact)


def tail_cutoff(mean: float, tail: float = 1e-12) -> int:
    """Smallest n with P(Poisson(mean) > n) below ``tail``."""
    if mean <= 0:
        return 0
    guess = stats.poisson.isf(tail, mean)
    n = int(guess) if np.isfinite(guess) else int(mean)
    while stats.poisson.sf(n, mean) >= tail:
        n += 1
    return n


def truncation_error(modes: ModeProbabilities, n_max: int, input_state) -> float:
    """Total variation between the full and the truncated forward click laws.

    The full law sums photon numbers up to at least ``4 * n_max`` (further
    if the input tail demands it); the truncated law uses the input cut at
    ``n_max`` and renormalized.
    """
    n_hi = 4 * n_max
    if input_state.kind == "poisson":
        n_hi = max(n_hi, tail_cutoff(input_state.mean_photons, 1e-15))
    else:
        n_hi = max(n_hi, input_state.support_max())
    rho_full = input_state.raw_pmf(n_hi)
    full = occupancy_matrix(modes, n_hi) @ rho_full
    rho_cut = rho_full[: n_max + 1].copy()
    mass = rho_cut.sum()
    if mass <= 0:
        return 1.0
    rho_cut /= mass
    trunc = occupancy_matrix(modes, n_max) @ rho_cut
    return 0.5 * math.fsum(np.abs(full - trunc))
