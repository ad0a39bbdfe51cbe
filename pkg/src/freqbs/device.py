"""Closed-form acousto-optic device physics.

All formulas take angular frequencies (rad/s); convert Hz with ``2*pi*f``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import NamedTuple

from .errors import SingularityError, ValidationError

SPEED_OF_LIGHT = 299_792_458.0


def _positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class CrystalParams:
    refractive_index: float
    photoelastic_constant: float
    density: float  # kg/m^3
    sound_speed: float  # m/s
    name: str = ""
    citation: str = ""

    def __post_init__(self):
        for f in ("refractive_index", "photoelastic_constant", "density", "sound_speed"):
            _positive(f, getattr(self, f))

    @property
    def figure_of_merit(self) -> float:
        """M2 = n^6 p^2 / (rho v^3), in s^3/kg."""
        n, p = self.refractive_index, self.photoelastic_constant
        return n**6 * p**2 / (self.density * self.sound_speed**3)


@dataclass(frozen=True)
class AOMGeometry:
    interaction_length: float  # m

    def __post_init__(self):
        _positive("interaction_length", self.interaction_length)


@dataclass(frozen=True)
class AcousticDrive:
    intensity: float  # W/m^2
    modulation_frequency: float  # Hz

    def __post_init__(self):
        _positive("intensity", self.intensity)
        _positive("modulation_frequency", self.modulation_frequency)


@lru_cache(maxsize=None)
def _material_table() -> dict:
    text = resources.files("freqbs").joinpath("data/materials.json").read_text()
    return json.loads(text)


def materials() -> dict[str, CrystalParams]:
    table = _material_table()["materials"]
    return {
        name: CrystalParams(
            entry["refractive_index"],
            entry["photoelastic_constant"],
            entry["density"],
            entry["sound_speed"],
            name=name,
            citation=entry["citation"],
        )
        for name, entry in table.items()
    }


def material(name: str) -> CrystalParams:
    table = materials()
    if name not in table:
        raise ValidationError(f"unknown material {name!r}; known: {', '.join(sorted(table))}")
    return table[name]


def coupling_eta(crystal: CrystalParams, drive: AcousticDrive, omega: float) -> float:
    """Field coupling constant eta (1/m) = omega / (2 sqrt2 c) * sqrt(M2 * I)."""
    _positive("omega", omega)
    return omega / (2 * math.sqrt(2) * SPEED_OF_LIGHT) * math.sqrt(crystal.figure_of_merit * drive.intensity)


def interaction_R(crystal: CrystalParams, drive: AcousticDrive, geometry: AOMGeometry) -> float:
    """R = eta * l / omega in seconds; the optical frequency cancels."""
    return coupling_eta(crystal, drive, 1.0) * geometry.interaction_length


def conversion_efficiency(theta: float) -> float:
    return math.sin(theta) ** 2


def required_intensity(target_theta: float, crystal: CrystalParams, geometry: AOMGeometry, omega: float) -> float:
    """Acoustic intensity (W/m^2) at which eta * l equals ``target_theta``."""
    if not (0 < target_theta <= math.pi / 2):
        raise ValidationError(f"target_theta must lie in (0, pi/2], got {target_theta}")
    _positive("omega", omega)
    scale = omega * geometry.interaction_length / (2 * math.sqrt(2) * SPEED_OF_LIGHT)
    return (target_theta / scale) ** 2 / crystal.figure_of_merit


class BandwidthRatio(NamedTuple):
    exact: float
    first_order: float

    @property
    def error(self) -> float:
        return abs(self.exact - self.first_order)


def bandwidth_ratio(omega: float, delta: float, R: float) -> BandwidthRatio:
    """Shifted-fraction ratio between light at ``omega + delta`` and at ``omega``.

    Exact: sin^2((omega+delta) R) / sin^2(omega R). First order in delta*R:
    1 + 2 delta R cot(omega R).
    """
    x = omega * R
    s = math.sin(x)
    if abs(s) < 1e-12:
        raise SingularityError(f"omega*R = {x} is a multiple of pi; the reference shift efficiency is zero")
    exact = math.sin((omega + delta) * R) ** 2 / s**2
    first = 1 + 2 * delta * R * math.cos(x) / s
    return BandwidthRatio(exact, first)
