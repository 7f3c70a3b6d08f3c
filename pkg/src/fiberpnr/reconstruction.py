"""Recovering photon-number statistics from click histograms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize, stats

from .detector import ModeProbabilities
from .errors import InversionError, NumericalError, ValidationError
from .matrix import ConditionalMatrix, PhotonDistribution, occupancy_matrix, tail_cutoff

DEFAULT_CONDITION_BOUND = 1e12
DEFAULT_RESAMPLES = 1000
MLE_XTOL = 1e-6


@dataclass(frozen=True)
class CountHistogram:
    """Number of trials that produced k = 0..N clicks."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size == 0:
            raise ValidationError("histogram must be a non-empty 1-D array")
        if np.any(c < 0) or np.any(np.asarray(c, dtype=float) % 1 != 0):
            raise ValidationError("histogram counts must be non-negative integers")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_probabilities(cls, probs: Sequence[float], trials: int) -> "CountHistogram":
        """Closest integer histogram to ``trials * probs`` with the exact total.

        Uses largest-remainder rounding so the counts sum to ``trials``.
        """
        p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        raw = p / p.sum() * trials
        counts = np.floor(raw).astype(np.int64)
        short = trials - int(counts.sum())
        if short:
            counts[np.argsort(counts - raw, kind="stable")[:short]] += 1
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            raise ValidationError("histogram holds no trials")
        return self.counts / self.total


def _check_shapes(matrix: ConditionalMatrix, hist: CountHistogram) -> None:
    if hist.counts.size != matrix.p.shape[0]:
        raise ValidationError(
            f"histogram has {hist.counts.size} bins, matrix has {matrix.p.shape[0]} click rows"
        )


def _solver(matrix: ConditionalMatrix, condition_bound: float):
    p = matrix.p
    if p.shape[1] > p.shape[0]:
        raise InversionError(
            f"{p.shape[0]} click bins cannot determine {p.shape[1]} photon numbers; lower n_max"
        )
    cond = float(np.linalg.cond(p))
    if not math.isfinite(cond) or cond > condition_bound:
        raise InversionError(
            f"conditional matrix {p.shape} has condition number {cond:.3e} "
            f"(bound {condition_bound:.1e}); reduce n_max or check for dead modes"
        )
    if matrix.is_square:
        return lambda rhs: np.linalg.solve(p, rhs), False
    return lambda rhs: np.linalg.lstsq(p, rhs, rcond=None)[0], True


def direct_invert(
    matrix: ConditionalMatrix,
    hist: CountHistogram,
    condition_bound: float = DEFAULT_CONDITION_BOUND,
) -> PhotonDistribution:
    """Solve the forward model linearly for the photon-number distribution.

    No positivity constraint and no renormalization: negative entries are
    returned as they come out of the solve. A non-square matrix falls back to
    least squares and sets ``least_squares``.
    """
    _check_shapes(matrix, hist)
    solve, lsq = _solver(matrix, condition_bound)
    rho = solve(hist.frequencies)
    return PhotonDistribution(rho=rho, signed=True, least_squares=lsq)


class _EMState(NamedTuple):
    rho: np.ndarray
    iterations: int
    converged: bool
    log_likelihoods: list[float]


def _em(p: np.ndarray, freqs: np.ndarray, max_iters: int, tol: float, trace: bool) -> _EMState:
    # freqs: (..., K); rho: (..., N+1), batched over leading axis
    rho = np.full(freqs.shape[:-1] + (p.shape[1],), 1.0 / p.shape[1])
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        pred = rho @ p.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(pred > 0, freqs / pred, 0.0)
            if trace:
                history.append(float(np.sum(np.where(freqs > 0, freqs * np.log(pred), 0.0))))
        new = rho * (ratio @ p)
        new /= new.sum(axis=-1, keepdims=True)
        delta = float(np.max(np.abs(new - rho)))
        rho = new
        if delta < tol:
            converged = True
            break
    if trace:
        pred = rho @ p.T
        with np.errstate(divide="ignore", invalid="ignore"):
            history.append(float(np.sum(np.where(freqs > 0, freqs * np.log(pred), 0.0))))
    return _EMState(rho, it, converged, history)


def em_reconstruct(
    matrix: ConditionalMatrix,
    hist: CountHistogram,
    max_iters: int = 100_000,
    tol: float = 1e-10,
    return_trace: bool = False,
):
    """Expectation-maximization estimate of rho, non-negative and normalized.

    Starts from the uniform distribution and stops once the max-norm update
    drops below ``tol``. With ``return_trace`` the per-iteration
    log-likelihoods (per trial) are returned as well.
    """
    _check_shapes(matrix, hist)
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    state = _em(matrix.p, hist.frequencies, int(max_iters), tol, return_trace)
    dist = PhotonDistribution(
        rho=state.rho, signed=False, iterations=state.iterations, converged=state.converged
    )
    if return_trace:
        return dist, np.asarray(state.log_likelihoods)
    return dist


def bootstrap_errors(
    matrix: ConditionalMatrix,
    hist: CountHistogram,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int | None = None,
    method: str = "direct",
    condition_bound: float = DEFAULT_CONDITION_BOUND,
    em_max_iters: int = 5_000,
    em_tol: float = 1e-8,
    count_floor: bool = False,
) -> np.ndarray:
    """Per-bin standard deviation of the reconstruction under resampling.

    Draws ``resamples`` multinomial histograms of the same size from the
    empirical frequencies and reconstructs each one with ``method``.

    Click bins with no counts never vary under resampling. With
    ``count_floor`` the result is combined in quadrature with
    :func:`count_resolution` so those bins keep a one-event error.
    """
    _check_shapes(matrix, hist)
    if hist.total == 0:
        raise ValidationError("cannot bootstrap an empty histogram")
    if resamples < 1:
        raise ValidationError("resamples must be >= 1")
    if resamples == 1:
        warnings.warn("a single bootstrap resample gives zero spread", RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(hist.total, hist.frequencies, size=resamples) / hist.total
    if method == "direct":
        solve, _ = _solver(matrix, condition_bound)
        estimates = solve(draws.T).T
    elif method == "em":
        estimates = _em(matrix.p, draws, em_max_iters, em_tol, False).rho
    else:
        raise ValidationError(f"unknown reconstruction method {method!r}")
    std = estimates.std(axis=0)
    if count_floor:
        std = np.hypot(std, count_resolution(matrix, hist, condition_bound))
    return std


def count_resolution(
    matrix: ConditionalMatrix,
    hist: CountHistogram,
    condition_bound: float = DEFAULT_CONDITION_BOUND,
) -> np.ndarray:
    """Linear-inversion response to one event in each empty click bin.

    Returns, per photon number, the quadrature sum over empty bins k of
    ``|(p^-1)[n, k]| / T``.
    """
    _check_shapes(matrix, hist)
    solve, _ = _solver(matrix, condition_bound)
    empty = np.diag((hist.counts == 0) / hist.total)
    return np.sqrt((solve(empty) ** 2).sum(axis=1))


def truncated_poisson(mean: float, n_max: int) -> np.ndarray:
    """Poisson law on 0..n_max renormalized over the kept range."""
    n = np.arange(n_max + 1)
    if mean == 0:
        return (n == 0).astype(float)
    logp = stats.poisson.logpmf(n, mean)
    w = np.exp(logp - logp.max())
    return w / w.sum()


def poisson_log_likelihood(matrix: ConditionalMatrix, hist: CountHistogram, mean: float) -> float:
    """Total log-likelihood of the histogram under a truncated Poisson input."""
    pred = matrix.forward(truncated_poisson(mean, matrix.n_max))
    c = hist.counts
    mask = c > 0
    if np.any(pred[mask] <= 0):
        return -math.inf
    return float(np.dot(c[mask], np.log(pred[mask])))


class MLEResult(NamedTuple):
    mean: float
    log_likelihood: float
    at_boundary: bool
    fitted: PhotonDistribution


def mle_poisson_mean(
    matrix: ConditionalMatrix,
    hist: CountHistogram,
    mean_max: float | None = None,
    grid_points: int = 161,
) -> MLEResult:
    """Maximum-likelihood mean of a truncated-Poisson input.

    A coarse grid locates the best bracket (ties go to the smaller mean),
    then bounded Brent refines it to ``MLE_XTOL`` in the mean.
    """
    _check_shapes(matrix, hist)
    if hist.total == 0:
        raise ValidationError("cannot fit an empty histogram")
    upper = float(matrix.n_max if mean_max is None else mean_max)
    if upper <= 0:
        raise ValidationError("mean_max must be positive")

    def fit(mu: float, boundary: bool) -> MLEResult:
        return MLEResult(
            mean=mu,
            log_likelihood=poisson_log_likelihood(matrix, hist, mu),
            at_boundary=boundary,
            fitted=PhotonDistribution(truncated_poisson(mu, matrix.n_max)),
        )

    if hist.counts[0] == hist.total:
        return fit(0.0, True)

    grid = np.linspace(0.0, upper, grid_points)
    ll = np.array([poisson_log_likelihood(matrix, hist, mu) for mu in grid])
    if not np.any(np.isfinite(ll)):
        raise NumericalError("likelihood is zero for every mean on the search grid")
    best = int(np.argmax(ll))  # first maximum, i.e. smallest mean on ties
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid_points - 1)]
    res = optimize.minimize_scalar(
        lambda mu: -poisson_log_likelihood(matrix, hist, mu),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": MLE_XTOL / 4, "maxiter": 500},
    )
    if not res.success:
        raise NumericalError(f"mean optimisation did not converge: {res.message} (bracket {lo}, {hi})")
    mu = float(res.x)
    flat = 1e-12 * max(1.0, abs(ll[best]))
    if -res.fun <= ll[best] + flat:
        # no improvement over the grid: walk down through ties to the smallest mean
        while best > 0 and ll[best - 1] >= ll[best] - flat:
            best -= 1
        mu = float(grid[best])
    boundary = mu <= MLE_XTOL or mu >= upper - MLE_XTOL
    return fit(mu, boundary)


def confidence(modes: ModeProbabilities, prior_mean: float, eta: float, l: int) -> float:
    """Posterior probability that ``l`` clicks came from exactly ``l`` photons.

    The prior is Poisson with mean ``prior_mean`` counted before the loss
    ``eta``, which each photon survives independently ahead of the tree.
    """
    if isinstance(l, bool) or int(l) != l or not 1 <= l <= modes.n_modes:
        raise ValidationError(f"l must be an integer in 1..{modes.n_modes}, got {l!r}")
    if not prior_mean > 0:
        raise ValidationError(f"prior mean must be positive, got {prior_mean!r}")
    lossy = modes.attenuated(eta)
    l = int(l)
    # tail bound relative to the posterior, not just absolute
    cutoff = max(l, tail_cutoff(prior_mean, 1e-12 * stats.poisson.pmf(l, prior_mean)))
    row = occupancy_matrix(lossy, cutoff)[l]
    prior = stats.poisson.pmf(np.arange(cutoff + 1), prior_mean)
    evidence = math.fsum(prior * row)
    if evidence <= 0:
        raise ValidationError(f"{l} clicks are impossible for eta={eta}")
    return float(prior[l] * row[l] / evidence)


@dataclass(frozen=True)
class ConfidenceTable:
    """values[i, j]: confidence for ``ls[i]`` clicks under ``columns[j] = (eta, mean)``."""

    ls: tuple[int, ...]
    columns: tuple[tuple[float, float], ...]
    values: np.ndarray

    def get(self, l: int, eta: float, mean: float) -> float:
        return float(self.values[self.ls.index(l), self.columns.index((eta, mean))])


def confidence_table(
    modes: ModeProbabilities,
    columns: Sequence[tuple[float, float]],
    ls: Sequence[int],
) -> ConfidenceTable:
    columns = tuple((float(e), float(m)) for e, m in columns)
    ls = tuple(int(l) for l in ls)
    values = np.array([[confidence(modes, m, e, l) for e, m in columns] for l in ls])
    return ConfidenceTable(ls=ls, columns=columns, values=values)
