"""Monte Carlo click generation and exact forward click laws."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .detector import ModeProbabilities
from .errors import ValidationError
from .matrix import ConditionalMatrix, tail_cutoff

DEFAULT_N_CUT = 8
_BATCH = 200_000


@dataclass(frozen=True)
class InputState:
    """Photon-number law of the light entering the detector.

    Build with :meth:`poisson`, :meth:`fock` or :meth:`explicit`. A Poisson
    input is truncated at ``n_cut`` and renormalized unless ``n_cut`` is
    None.
    """

    kind: str
    mean_photons: float = 0.0
    n: int = 0
    probs: tuple[float, ...] = ()
    n_cut: int | None = DEFAULT_N_CUT

    @classmethod
    def poisson(cls, mean: float, n_cut: int | None = DEFAULT_N_CUT) -> "InputState":
        if not mean >= 0:
            raise ValidationError(f"Poisson mean must be >= 0, got {mean!r}")
        if n_cut is not None and n_cut < 0:
            raise ValidationError("n_cut must be >= 0")
        return cls(kind="poisson", mean_photons=float(mean), n_cut=n_cut)

    @classmethod
    def fock(cls, n: int) -> "InputState":
        if int(n) != n or n < 0:
            raise ValidationError(f"Fock photon number must be a non-negative integer, got {n!r}")
        return cls(kind="fock", n=int(n), n_cut=int(n))

    @classmethod
    def explicit(cls, probs: Sequence[float]) -> "InputState":
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("explicit input must be a probability vector")
        return cls(kind="explicit", probs=tuple(p / p.sum()), n_cut=p.size - 1)

    @classmethod
    def parse(cls, spec: str) -> "InputState":
        """Parse ``poisson:0.79[:n_cut]``, ``fock:3`` or ``explicit:0.5,0.5``."""
        kind, _, rest = spec.partition(":")
        try:
            if kind == "poisson":
                mean, _, cut = rest.partition(":")
                return cls.poisson(float(mean), int(cut) if cut else DEFAULT_N_CUT)
            if kind == "fock":
                return cls.fock(int(rest))
            if kind == "explicit":
                return cls.explicit([float(x) for x in rest.split(",")])
        except ValueError as exc:
            raise ValidationError(f"bad input spec {spec!r}: {exc}") from exc
        raise ValidationError(f"unknown input kind {kind!r} (poisson, fock, explicit)")

    @property
    def mean(self) -> float:
        if self.kind == "poisson" and self.n_cut is None:
            return self.mean_photons
        p = self.pmf()
        return float(np.arange(p.size) @ p)

    def support_max(self) -> int:
        """Largest photon number with non-zero weight (tail cutoff if unbounded)."""
        if self.n_cut is not None:
            return self.n_cut
        return tail_cutoff(self.mean_photons, 1e-15)

    def raw_pmf(self, n_max: int) -> np.ndarray:
        """Probabilities over 0..n_max, Poisson untruncated (not renormalized)."""
        n = np.arange(n_max + 1)
        if self.kind == "poisson":
            return stats.poisson.pmf(n, self.mean_photons)
        return _pad(self.pmf(), n_max)

    def pmf(self, n_max: int | None = None) -> np.ndarray:
        """Probabilities of the (truncated, renormalized) law over 0..n_max.

        ``n_max`` defaults to the support bound; asking for fewer entries than
        the support holds is an error.
        """
        top = self.support_max()
        if self.kind == "poisson":
            p = stats.poisson.pmf(np.arange(top + 1), self.mean_photons)
            p = p / p.sum()
        elif self.kind == "fock":
            p = np.zeros(self.n + 1)
            p[self.n] = 1.0
        else:
            p = np.asarray(self.probs)
        if n_max is None:
            return p
        if n_max < top and np.any(p[n_max + 1 :] > 0):
            raise ValidationError(f"input extends to n = {top}, beyond n_max = {n_max}")
        return _pad(p[: n_max + 1], n_max)


def _pad(p: np.ndarray, n_max: int) -> np.ndarray:
    out = np.zeros(n_max + 1)
    m = min(p.size, n_max + 1)
    out[:m] = p[:m]
    return out


@dataclass(frozen=True)
class ClickRecord:
    """Modes that fired in one trial (sorted, unique)."""

    modes: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class SimulationResult:
    counts: np.ndarray
    records: list[ClickRecord] | None = None

    @property
    def trials(self) -> int:
        return int(self.counts.sum())


def _simulate_batch(
    rng: np.random.Generator,
    modes: ModeProbabilities,
    photon_law: np.ndarray | None,
    poisson_mean: float,
    trials: int,
    dark_count_prob: float,
) -> np.ndarray:
    n_modes = modes.n_modes
    if photon_law is None:
        photons = rng.poisson(poisson_mean, size=trials)
    else:
        photons = rng.choice(photon_law.size, size=trials, p=photon_law)
    # one categorical draw per photon over N modes plus the loss bin
    bins = rng.choice(n_modes + 1, size=int(photons.sum()), p=np.append(modes.q, modes.q_loss))
    owner = np.repeat(np.arange(trials), photons)
    fired = np.zeros((trials, n_modes), dtype=bool)
    kept = bins < n_modes
    fired[owner[kept], bins[kept]] = True
    if dark_count_prob > 0:
        fired |= rng.random((trials, n_modes)) < dark_count_prob
    return fired


def iter_fired(
    modes: ModeProbabilities,
    input_state: InputState,
    trials: int,
    seed: int | None,
    dark_count_prob: float = 0.0,
) -> Iterator[np.ndarray]:
    """Yield boolean (batch, N) arrays of fired modes, deterministic in ``seed``."""
    if isinstance(trials, bool) or int(trials) != trials or trials < 1:
        raise ValidationError(f"trials must be an integer >= 1, got {trials!r}")
    if not 0.0 <= dark_count_prob <= 1.0:
        raise ValidationError(f"dark_count_prob must lie in [0, 1], got {dark_count_prob!r}")
    if input_state.kind == "poisson" and input_state.n_cut is None:
        law, mean = None, input_state.mean_photons
    else:
        law, mean = input_state.pmf(), 0.0
    rng = np.random.default_rng(seed)
    remaining = int(trials)
    while remaining:
        batch = min(remaining, _BATCH)
        yield _simulate_batch(rng, modes, law, mean, batch, dark_count_prob)
        remaining -= batch


def sample_clicks(
    modes: ModeProbabilities,
    input_state: InputState,
    trials: int,
    seed: int | None = None,
    dark_count_prob: float = 0.0,
    keep_records: bool = False,
) -> SimulationResult:
    """Simulate ``trials`` detector pulses and histogram the click numbers.

    Every photon is routed independently to a mode or to loss; a mode clicks
    when it holds at least one photon, or spuriously with probability
    ``dark_count_prob``.
    """
    counts = np.zeros(modes.n_modes + 1, dtype=np.int64)
    records: list[ClickRecord] | None = [] if keep_records else None
    for fired in iter_fired(modes, input_state, trials, seed, dark_count_prob):
        counts += np.bincount(fired.sum(axis=1), minlength=modes.n_modes + 1)
        if records is not None:
            records.extend(ClickRecord(tuple(np.flatnonzero(row).tolist())) for row in fired)
    return SimulationResult(counts=counts, records=records)


def exact_click_distribution(matrix: ConditionalMatrix, input_state: InputState | np.ndarray) -> np.ndarray:
    """p(k) = sum_n p(k|n) rho(n) for an input supported on 0..n_max."""
    if isinstance(input_state, InputState):
        rho = input_state.pmf(matrix.n_max)
    else:
        rho = np.asarray(input_state, dtype=float)
    return matrix.forward(rho)
