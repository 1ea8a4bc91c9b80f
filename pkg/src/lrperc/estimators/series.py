"""Result containers and their CSV / JSON-lines serialisation."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = "abscissa,mean,stderr,n_samples"


def _fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def jsonable(value):
    """Recursively convert numpy scalars/arrays and infinities for JSON output."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if hasattr(value, "value") and not isinstance(value, (str, bytes)):
        return value.value
    return value


@dataclass
class SeriesEstimate:
    """Monte-Carlo curve: ``mean[i] +- stderr[i]`` at ``abscissa[i]``."""

    abscissa: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int
    meta: dict = field(default_factory=dict)
    raw: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not (len(self.abscissa) == len(self.mean) == len(self.stderr)):
            raise ValueError("abscissa, mean and stderr must have equal lengths")
        if np.any(self.stderr < 0):
            raise ValueError("stderr must be nonnegative")

    def __len__(self):
        return len(self.abscissa)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for a, m, s in zip(self.abscissa, self.mean, self.stderr):
            buf.write(f"{_fmt(a)},{_fmt(m)},{_fmt(s)},{int(self.n_samples)}\n")
        return buf.getvalue()

    def metadata_record(self) -> str:
        return json.dumps(jsonable(self.meta), sort_keys=True)

    @classmethod
    def from_csv(cls, text: str, meta: dict | None = None) -> "SeriesEstimate":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if lines[0].strip() != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {lines[0]!r}")
        rows = [ln.split(",") for ln in lines[1:]]
        n = int(rows[0][3]) if rows else 0
        return cls(
            abscissa=[float(r[0]) for r in rows],
            mean=[float(r[1]) for r in rows],
            stderr=[float(r[2]) for r in rows],
            n_samples=n,
            meta=dict(meta or {}),
        )

    def select(self, mask) -> "SeriesEstimate":
        mask = np.asarray(mask)
        return SeriesEstimate(self.abscissa[mask], self.mean[mask], self.stderr[mask],
                              self.n_samples, dict(self.meta))


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    amplitude: float
    ci_low: float
    ci_high: float
    window: tuple[float, float]
    n_points: int = 0

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


@dataclass(frozen=True)
class CriticalPoint:
    beta_hat: float
    uncertainty: float
    method: str
    sizes: tuple[int, ...]
    crossings: tuple[float, ...] = ()
    crossing_errors: tuple[float, ...] = ()

    def to_json(self) -> str:
        return json.dumps(jsonable(self.__dict__), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CriticalPoint":
        raw = json.loads(text)
        return cls(
            beta_hat=float(raw["beta_hat"]),
            uncertainty=float(raw["uncertainty"]),
            method=raw["method"],
            sizes=tuple(int(s) for s in raw["sizes"]),
            crossings=tuple(float(c) for c in raw.get("crossings", ())),
            crossing_errors=tuple(float(c) for c in raw.get("crossing_errors", ())),
        )
