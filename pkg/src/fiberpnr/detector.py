"""Binary fiber delay tree: per-mode photon probabilities and timing checks.

A tree with ``stages`` coupler columns has ``2**stages`` leaves (temporal
modes, both output fibers folded into one flat list). Couplers are stored in
breadth-first order: column ``j`` holds couplers ``2**j - 1 .. 2**(j+1) - 2``
and coupler ``c`` feeds children ``2c + 1`` (arm 0) and ``2c + 2`` (arm 1).
Arm 0 receives the fraction ``ratio``; arm 1 receives ``1 - ratio``. Fiber
segment ``2c + a`` is the output arm ``a`` of coupler ``c``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError

NORMALIZATION_TOL = 1e-12


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class TimingSpec:
    """Pulse separations after the tree, APD dead time and gate width (ns)."""

    separations_ns: tuple[float, ...]
    dead_time_ns: float
    gate_width_ns: float

    def __post_init__(self) -> None:
        seps = tuple(float(s) for s in self.separations_ns)
        object.__setattr__(self, "separations_ns", seps)
        if not seps:
            raise ValidationError("timing needs at least one separation")
        for value in (*seps, self.dead_time_ns, self.gate_width_ns):
            if not value > 0:
                raise ValidationError(f"timing values must be positive, got {value!r}")


@dataclass(frozen=True)
class DetectorConfig:
    """Declarative description of the splitting network and its losses.

    ``couplers`` holds split ratios, either one per tree node
    (``2**stages - 1`` entries) or one per column (``stages`` entries, shared
    by every coupler in that column). ``segment_transmissions`` is either
    empty (lossless fiber) or one value per arm, ``2 * (2**stages - 1)``
    entries.
    """

    stages: int
    couplers: tuple[float, ...]
    segment_transmissions: tuple[float, ...] = ()
    detector_efficiency: float = 1.0
    dark_count_prob: float = 0.0
    timing: TimingSpec | None = None

    def __post_init__(self) -> None:
        if isinstance(self.stages, bool) or not isinstance(self.stages, (int, np.integer)):
            raise ConfigurationError(f"stages must be an integer, got {self.stages!r}")
        if self.stages < 1:
            raise ConfigurationError(f"stages must be >= 1, got {self.stages}")
        n_nodes = 2**self.stages - 1
        couplers = tuple(_check_unit("coupler ratio", r) for r in self.couplers)
        if len(couplers) == self.stages and len(couplers) != n_nodes:
            couplers = tuple(couplers[_column(c)] for c in range(n_nodes))
        if len(couplers) != n_nodes:
            raise ConfigurationError(
                f"{self.stages} stages need {n_nodes} couplers "
                f"(or {self.stages}, one per column), got {len(self.couplers)}"
            )
        segments = tuple(_check_unit("segment transmission", t) for t in self.segment_transmissions)
        if segments and len(segments) != 2 * n_nodes:
            raise ConfigurationError(
                f"{self.stages} stages need {2 * n_nodes} segment transmissions, got {len(segments)}"
            )
        object.__setattr__(self, "couplers", couplers)
        object.__setattr__(self, "segment_transmissions", segments)
        _check_unit("detector_efficiency", self.detector_efficiency)
        _check_unit("dark_count_prob", self.dark_count_prob)

    @property
    def n_modes(self) -> int:
        return 2**self.stages

    # JSON layout: {"stages", "couplers": [{"ratio"}], "segments": [{"transmission"}],
    # "detector_efficiency", "dark_count_prob",
    # "timing": {"separations_ns", "dead_time_ns", "gate_width_ns"}}
    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "stages": int(self.stages),
            "couplers": [{"ratio": r} for r in self.couplers],
            "segments": [{"transmission": t} for t in self.segment_transmissions],
            "detector_efficiency": self.detector_efficiency,
            "dark_count_prob": self.dark_count_prob,
        }
        if self.timing is not None:
            out["timing"] = {
                "separations_ns": list(self.timing.separations_ns),
                "dead_time_ns": self.timing.dead_time_ns,
                "gate_width_ns": self.timing.gate_width_ns,
            }
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DetectorConfig":
        try:
            timing = data.get("timing")
            return cls(
                stages=data["stages"],
                couplers=tuple(c["ratio"] for c in data["couplers"]),
                segment_transmissions=tuple(s["transmission"] for s in data.get("segments", [])),
                detector_efficiency=data.get("detector_efficiency", 1.0),
                dark_count_prob=data.get("dark_count_prob", 0.0),
                timing=None
                if timing is None
                else TimingSpec(
                    separations_ns=tuple(timing["separations_ns"]),
                    dead_time_ns=timing["dead_time_ns"],
                    gate_width_ns=timing["gate_width_ns"],
                ),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed detector config: {exc!r}") from exc


def _column(node: int) -> int:
    return int(math.floor(math.log2(node + 1)))


# Bounding pulse separations, dead time and gate width of the two-stage fiber device.
PAPER_TIMING = TimingSpec(separations_ns=(108.0, 164.0), dead_time_ns=50.0, gate_width_ns=45.0)


def balanced_config(
    stages: int = 3,
    transmission: float = 1.0,
    detector_efficiency: float = 1.0,
    dark_count_prob: float = 0.0,
    timing: TimingSpec | None = PAPER_TIMING,
) -> DetectorConfig:
    """Ideal 50/50 tree whose fiber loss is spread evenly over each path.

    ``transmission`` is the end-to-end fiber transmission of every path; each
    of the ``stages`` segments on a path gets ``transmission ** (1 / stages)``.
    """
    _check_unit("transmission", transmission)
    n_nodes = 2**stages - 1
    per_segment = transmission ** (1.0 / stages)
    segments = () if transmission == 1.0 else (per_segment,) * (2 * n_nodes)
    return DetectorConfig(
        stages=stages,
        couplers=(0.5,) * n_nodes,
        segment_transmissions=segments,
        detector_efficiency=detector_efficiency,
        dark_count_prob=dark_count_prob,
        timing=timing,
    )


def load_config(path: str | Path) -> DetectorConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    return DetectorConfig.from_dict(data)


def save_config(config: DetectorConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class ModeProbabilities:
    """Probability that one input photon ends up detectable in each mode.

    ``q[i]`` folds path splitting, fiber transmission and detector efficiency;
    ``q_loss`` collects everything else so that ``sum(q) + q_loss == 1``.
    """

    q: np.ndarray
    q_loss: float

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or q.size == 0:
            raise ValidationError("q must be a non-empty 1-D vector")
        if np.any(q < 0) or self.q_loss < -NORMALIZATION_TOL:
            raise ValidationError("mode probabilities must be non-negative")
        total = q.sum() + self.q_loss
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"mode probabilities sum to {total!r}, expected 1")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "q_loss", max(float(self.q_loss), 0.0))

    @classmethod
    def from_q(cls, q: Sequence[float]) -> "ModeProbabilities":
        q = np.asarray(q, dtype=float)
        return cls(q=q, q_loss=max(1.0 - float(q.sum()), 0.0))

    @classmethod
    def balanced(cls, n_modes: int = 8, survival: float = 1.0) -> "ModeProbabilities":
        _check_unit("survival", survival)
        return cls.from_q(np.full(n_modes, survival / n_modes))

    @property
    def n_modes(self) -> int:
        return int(self.q.size)

    @property
    def survival(self) -> float:
        """Overall probability that a photon is detectable at all."""
        return float(self.q.sum())

    @property
    def is_balanced(self) -> bool:
        return bool(np.ptp(self.q) <= 1e-14 * max(self.q.max(), 1e-300))

    def attenuated(self, eta: float) -> "ModeProbabilities":
        """Apply an extra per-photon survival ``eta`` ahead of the tree."""
        _check_unit("eta", eta)
        return ModeProbabilities.from_q(self.q * eta)


def build_mode_probabilities(config: DetectorConfig) -> ModeProbabilities:
    n_nodes = 2**config.stages - 1
    seg = config.segment_transmissions or (1.0,) * (2 * n_nodes)
    # weight[c] = probability a photon reaches the input of node c
    weight = np.zeros(2 * n_nodes + 1)
    weight[0] = 1.0
    for c in range(n_nodes):
        r = config.couplers[c]
        weight[2 * c + 1] = weight[c] * r * seg[2 * c]
        weight[2 * c + 2] = weight[c] * (1.0 - r) * seg[2 * c + 1]
    q = weight[n_nodes:] * config.detector_efficiency
    q_loss = 1.0 - math.fsum(q)
    if q_loss < 0:
        # rounding only; true value is non-negative
        q_loss = 0.0
    return ModeProbabilities(q=q, q_loss=q_loss)


@dataclass(frozen=True)
class TimingReport:
    feasible: bool
    dead_time_ok: bool
    gates_ok: bool
    margins_ns: tuple[float, ...]
    min_margin_ns: float
    gate_clearances_ns: tuple[float, ...] = field(default=())


def validate_timing(config: DetectorConfig) -> TimingReport:
    """Check that adjacent pulses are resolvable by the APDs.

    A separation must exceed the dead time, and gates centred on adjacent
    pulses must not overlap (gate width below the separation).
    """
    if config.timing is None:
        raise ValidationError("detector config has no timing section")
    t = config.timing
    seps = np.asarray(t.separations_ns)
    margins = seps - t.dead_time_ns
    clearances = seps - t.gate_width_ns
    dead_ok = bool(np.all(margins > 0))
    gates_ok = bool(np.all(clearances > 0))
    return TimingReport(
        feasible=dead_ok and gates_ok,
        dead_time_ok=dead_ok,
        gates_ok=gates_ok,
        margins_ns=tuple(float(m) for m in margins),
        min_margin_ns=float(margins.min()),
        gate_clearances_ns=tuple(float(c) for c in clearances),
    )
