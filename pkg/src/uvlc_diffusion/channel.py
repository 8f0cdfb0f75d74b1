"""
Underwater visible-light link model.

Deterministic path loss for a semi-collimated source, log-normal turbulence
fading of the received irradiance, and the embedded log-amplitude variance
tables (by node distance and by water temperature/salinity).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

#: log-amplitude variances below this are treated as a deterministic link
SIGMA_X2_FLOOR = 1e-12


class Normalization(str, Enum):
    """How the log-amplitude mean is tied to its variance."""

    UNIT_MEAN = "unit_mean"  # mu_x = -sigma_x^2, E[I] = 1 exactly
    PAPER_LITERAL = "paper_literal"  # mu_x = -sigma_x^2 / 2, E[I] = exp(sigma_x^2)


@dataclass(frozen=True)
class WaterProfile:
    """Optical properties of the water column.

    ``extinction`` is used directly when ``absorption``/``scattering`` are not
    given; otherwise it must equal their sum. Dissipation rates only document
    where the tabulated variances came from.
    """

    extinction: float | None = None
    absorption: float | None = None
    scattering: float | None = None
    correction: float = 0.05
    temperature: float | None = None
    salinity: float | None = None
    thermal_dissipation: float = 1e-3
    kinetic_dissipation: float = 1e-2

    def __post_init__(self):
        a, b, c = self.absorption, self.scattering, self.extinction
        if a is not None and b is not None:
            if c is None:
                object.__setattr__(self, "extinction", a + b)
            elif not math.isclose(c, a + b, rel_tol=1e-12, abs_tol=0.0):
                raise ValueError(f"extinction {c} != absorption + scattering {a + b}")
        elif a is not None or b is not None:
            raise ValueError("absorption and scattering must be given together")
        if self.extinction is None or not self.extinction > 0:
            raise ValueError("extinction coefficient must be positive")
        if not 0 <= self.correction < 1:
            raise ValueError("correction coefficient must lie in [0, 1)")
        if self.salinity is not None and self.salinity < 0:
            raise ValueError("salinity must be non-negative")


#: clear ocean defaults used throughout the experiments
CLEAR_OCEAN = WaterProfile(extinction=0.15, correction=0.05)


@dataclass(frozen=True)
class LinkGeometry:
    """Distance (m), receiver aperture diameter (m), full beam divergence (rad)."""

    distance: float
    aperture: float = 0.05
    divergence: float = math.radians(6.0)

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("distance must be positive")
        if not self.aperture > 0:
            raise ValueError("aperture diameter must be positive")
        if not 0 < self.divergence < math.pi:
            raise ValueError("beam divergence must lie in (0, pi) radians")

    @classmethod
    def from_degrees(cls, distance, aperture=0.05, divergence_deg=6.0):
        return cls(distance, aperture, math.radians(divergence_deg))


def path_loss(geom: LinkGeometry, water: WaterProfile) -> float:
    """Mean channel gain of a semi-collimated link.

    Evaluates ``D^2 th^-2 d^-2 exp(-c D^2 th^-2 d^(1-T))`` with the aperture
    ratio inside the exponent, exactly as the model is usually quoted.
    """
    d, D, th = geom.distance, geom.aperture, geom.divergence
    c, T = water.extinction, water.correction
    if d <= 0 or D <= 0 or th <= 0 or c is None or c <= 0:
        raise ValueError("path loss needs positive distance, aperture, divergence and extinction")
    ratio = D**2 / th**2
    return ratio / d**2 * math.exp(-c * ratio * d ** (1.0 - T))


def sigma_x_from_scintillation(scint_index: float) -> float:
    """Log-amplitude variance ``0.25 ln(1 + sigma_I^2)``."""
    if scint_index < 0:
        raise ValueError("scintillation index must be non-negative")
    return 0.25 * math.log1p(scint_index)


def scintillation_from_sigma_x(sigma_x2: float) -> float:
    """Inverse of :func:`sigma_x_from_scintillation`."""
    if sigma_x2 < 0:
        raise ValueError("log-amplitude variance must be non-negative")
    return math.expm1(4.0 * sigma_x2)


@dataclass(frozen=True)
class FadingModel:
    """Log-normal irradiance fading ``I = exp(2x)``, ``x ~ N(mu_x, sigma_x^2)``.

    ``mean_gain`` scales the irradiance (used to fold a deterministic path loss
    into the link); it shifts ``mu_x`` by ``ln(mean_gain) / 2``.
    """

    sigma_x2: float
    normalization: Normalization = Normalization.UNIT_MEAN
    mean_gain: float = 1.0

    def __post_init__(self):
        if self.sigma_x2 < 0 or not math.isfinite(self.sigma_x2):
            raise ValueError("log-amplitude variance must be finite and non-negative")
        if not self.mean_gain > 0:
            raise ValueError("mean gain must be positive")
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if self.sigma_x2 < SIGMA_X2_FLOOR:
            object.__setattr__(self, "sigma_x2", 0.0)

    @classmethod
    def from_scintillation(cls, scint_index, normalization=Normalization.UNIT_MEAN):
        return cls(sigma_x_from_scintillation(scint_index), normalization)

    @property
    def mu_x(self) -> float:
        shift = 0.0 if self.mean_gain == 1.0 else 0.5 * math.log(self.mean_gain)
        if self.normalization is Normalization.UNIT_MEAN:
            return shift - self.sigma_x2
        return shift - self.sigma_x2 / 2.0

    @property
    def scintillation_index(self) -> float:
        return scintillation_from_sigma_x(self.sigma_x2)

    @property
    def deterministic(self) -> bool:
        return self.sigma_x2 == 0.0


def sample_fading(model: FadingModel, rng: np.random.Generator, size=None):
    """Draw irradiance samples; returns a float when ``size`` is None."""
    if model.deterministic:
        gain = math.exp(2.0 * model.mu_x)
        return gain if size is None else np.full(size, gain)
    x = rng.normal(model.mu_x, math.sqrt(model.sigma_x2), size=size)
    return np.exp(2.0 * x)


def fading_pdf(model: FadingModel, irradiance):
    """Log-normal density of the irradiance (vectorised over ``irradiance``)."""
    if model.deterministic:
        raise ValueError("density undefined for a deterministic link (sigma_x^2 = 0)")
    I = np.asarray(irradiance, dtype=float)
    if np.any(I <= 0):
        raise ValueError("irradiance must be positive")
    var = 4.0 * model.sigma_x2
    out = np.exp(-((np.log(I) - 2.0 * model.mu_x) ** 2) / (2.0 * var)) / (I * np.sqrt(2.0 * np.pi * var))
    return out if out.ndim else float(out)


def link_moments(model: FadingModel) -> tuple[float, float]:
    """``(E[I], E[I^2])`` of the fading gain."""
    mu, s2 = model.mu_x, model.sigma_x2
    return math.exp(2.0 * mu + 2.0 * s2), math.exp(4.0 * mu + 8.0 * s2)


# ---------------------------------------------------------------------------
# variance tables


class TableKeyError(KeyError):
    pass


@dataclass(frozen=True)
class VarianceTable:
    """Log-amplitude variances by node distance and by (temperature, salinity)."""

    by_distance: tuple[tuple[float, float], ...] = ()
    by_water: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        ds = [d for d, _ in self.by_distance]
        if any(b <= a for a, b in zip(ds, ds[1:])):
            raise ValueError("table distances must be strictly increasing")
        values = [s for _, s in self.by_distance] + [s for *_, s in self.by_water]
        if any(not s > 0 for s in values):
            raise ValueError("tabulated variances must be positive")

    @property
    def distances(self) -> list[float]:
        return [d for d, _ in self.by_distance]


def lookup_variance_by_distance(table: VarianceTable, distance: float, interp: str = "exact") -> float:
    """Variance at ``distance``; ``interp`` is ``"exact"`` or ``"linear"``."""
    ds = np.array(table.distances)
    vals = np.array([s for _, s in table.by_distance])
    if interp == "exact":
        for d, s in table.by_distance:
            if d == distance:
                return s
        raise TableKeyError(f"no table entry at d = {distance} m")
    if interp != "linear":
        raise ValueError(f"unknown interpolation {interp!r}")
    if not ds[0] <= distance <= ds[-1]:
        raise TableKeyError(f"d = {distance} m outside tabulated range [{ds[0]}, {ds[-1]}]")
    return float(np.interp(distance, ds, vals))


def lookup_variance_by_water(table: VarianceTable, temperature: float, salinity: float) -> float:
    for t, s, v in table.by_water:
        if t == temperature and s == salinity:
            return v
    raise TableKeyError(f"no table entry for T = {temperature} C, S = {salinity} PPT")


#: distances 1..20 m, 35 PPT / 20 C water
DISTANCE_TABLE = (
    (1.0, 1.07e-3), (2.0, 3.5e-3), (3.0, 6.97e-3), (4.0, 1.13e-2), (5.0, 1.64e-2),
    (6.0, 2.22e-2), (7.0, 2.85e-2), (8.0, 3.54e-2), (9.0, 4.27e-2), (10.0, 5.04e-2),
    (11.0, 5.84e-2), (12.0, 6.67e-2), (13.0, 7.52e-2), (14.0, 8.39e-2), (15.0, 9.28e-2),
    (16.0, 1.02e-1), (17.0, 1.11e-1), (18.0, 1.2e-1), (19.0, 1.29e-1), (20.0, 1.38e-1),
)

WATER_TABLE = (
    (1.0, 35.0, 8.04e-5),
    (28.0, 35.0, 1.57e-3),
    (20.0, 33.0, 1.04e-3),
    (20.0, 36.5, 1.09e-3),
)

DEFAULT_TABLE = VarianceTable(by_distance=DISTANCE_TABLE, by_water=WATER_TABLE)


# CSV round trip. repr() of a float is the shortest string that reads back to the
# same double, so export -> import -> export is byte-identical.

def _fmt(x: float) -> str:
    return repr(float(x))


def distance_table_csv(table: VarianceTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["distance_m", "sigma_x2"])
    for d, s in table.by_distance:
        w.writerow([_fmt(d), _fmt(s)])
    return buf.getvalue()


def water_table_csv(table: VarianceTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["temp_c", "salinity_ppt", "sigma_x2"])
    for t, s, v in table.by_water:
        w.writerow([_fmt(t), _fmt(s), _fmt(v)])
    return buf.getvalue()


def _read_rows(text: str, header: list[str]) -> list[tuple[float, ...]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != header:
        raise ValueError(f"expected header {','.join(header)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields")
        out.append(tuple(float(x) for x in row))
    return out


def read_table_csv(distance_csv: str | Path | None = None, water_csv: str | Path | None = None) -> VarianceTable:
    """Load tables from CSV files; a missing file leaves that table empty."""
    by_d = _read_rows(Path(distance_csv).read_text(), ["distance_m", "sigma_x2"]) if distance_csv else ()
    by_w = _read_rows(Path(water_csv).read_text(), ["temp_c", "salinity_ppt", "sigma_x2"]) if water_csv else ()
    return VarianceTable(tuple(by_d), tuple(by_w))


def write_table_csv(table: VarianceTable, distance_csv: str | Path, water_csv: str | Path) -> None:
    Path(distance_csv).write_text(distance_table_csv(table))
    Path(water_csv).write_text(water_table_csv(table))
