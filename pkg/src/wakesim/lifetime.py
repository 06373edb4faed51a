"""Battery lifetime under a constant idle draw plus periodic events.

Self-discharge is a constant power equal to a fixed fraction of the
initial battery energy per year, so lifetime has the closed form
``E0 / (P_avg + P_selfdischarge)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .config import Document, load_data

SECONDS_PER_YEAR = 365.25 * 86400
SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class Battery:
    capacity_mah: float
    nominal_voltage: float
    self_discharge: float = 0.0  # fraction of E0 per year
    usable_fraction: float = 1.0  # cutoff-voltage derating, off by default

    def __post_init__(self):
        if self.capacity_mah <= 0:
            raise ValueError("capacity must be positive")
        if not 0 <= self.self_discharge < 1:
            raise ValueError("self_discharge must lie in [0, 1)")
        if not 0 < self.usable_fraction <= 1:
            raise ValueError("usable_fraction must lie in (0, 1]")

    @property
    def energy(self) -> float:
        """Usable energy in joules."""
        return self.capacity_mah * 3.6 * self.nominal_voltage * self.usable_fraction

    @property
    def self_discharge_power(self) -> float:
        return self.self_discharge * self.capacity_mah * 3.6 * self.nominal_voltage / SECONDS_PER_YEAR


@dataclass(frozen=True)
class ProfileEvent:
    label: str
    energy: float  # J
    rate: float = 0.0  # events per second


@dataclass(frozen=True)
class DutyProfile:
    idle_power: float
    events: tuple[ProfileEvent, ...] = ()

    def __post_init__(self):
        if self.idle_power < 0:
            raise ValueError("idle_power must be non-negative")
        for ev in self.events:
            if ev.rate < 0 or ev.energy < 0:
                raise ValueError(f"event {ev.label!r} needs non-negative energy and rate")

    def with_rate(self, rate: float, labels: Iterable[str] | None = None) -> "DutyProfile":
        """Copy with every event (or only ``labels``) occurring at ``rate``."""
        labels = None if labels is None else set(labels)
        events = tuple(replace(ev, rate=rate) if labels is None or ev.label in labels else ev
                       for ev in self.events)
        return replace(self, events=events)


@dataclass(frozen=True)
class LifetimeReport:
    lifetime: float  # s, math.inf when nothing drains the cell
    average_power: float
    self_discharge_power: float
    breakdown: dict[str, float] = field(default_factory=dict)

    @property
    def years(self) -> float:
        return self.lifetime / SECONDS_PER_YEAR

    @property
    def days(self) -> float:
        return self.lifetime / SECONDS_PER_DAY


def average_power(profile: DutyProfile) -> float:
    return profile.idle_power + sum(ev.energy * ev.rate for ev in profile.events)


def lifetime(battery: Battery, profile: DutyProfile) -> LifetimeReport:
    breakdown = {"idle": profile.idle_power}
    for ev in profile.events:
        breakdown[ev.label] = breakdown.get(ev.label, 0.0) + ev.energy * ev.rate
    p_avg = average_power(profile)
    p_sd = battery.self_discharge_power
    drain = p_avg + p_sd
    life = math.inf if drain <= 0 else battery.energy / drain
    return LifetimeReport(life, p_avg, p_sd, breakdown)


def log_grid(lo: float, hi: float, per_decade: int = 10) -> list[float]:
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n).tolist()


def sweep(battery: Battery, profile: DutyProfile, rates: Iterable[float],
          labels: Iterable[str] | None = None) -> list[dict]:
    """Lifetime at each event rate, as rows with SI-unit column names."""
    rows = []
    for r in sorted(set(float(x) for x in rates)):
        rep = lifetime(battery, profile.with_rate(r, labels))
        rows.append({
            "rate_hz": r,
            "avg_power_w": rep.average_power,
            "lifetime_s": rep.lifetime,
            "lifetime_years": rep.years,
        })
    return rows


# -- config --------------------------------------------------------------

def load_battery(name: str = "CR2032", doc: Document | None = None) -> Battery:
    doc = doc if doc is not None else load_data("presets.yaml")
    key = f"battery.{name}"
    doc.get(key)
    return Battery(
        float(doc.number(f"{key}.capacity_mah")),
        float(doc.number(f"{key}.nominal_voltage_v")),
        float(doc.number(f"{key}.self_discharge_per_year", 0)),
        float(doc.number(f"{key}.usable_fraction", 1)),
    )


def load_profile(name: str = "eink_tag", doc: Document | None = None, power_model=None) -> DutyProfile:
    """Load a duty profile; events give ``energy_uj``/``energy_mj`` or a ``reception`` config.

    A reception event costs one analytic receiver transaction under
    ``power_model``. All event rates start at zero.
    """
    doc = doc if doc is not None else load_data("presets.yaml")
    key = f"profile.{name}"
    doc.get(key)
    idle = float(doc.number(f"{key}.idle_power_uw")) * 1e-6
    events = []
    for i, ev in enumerate(doc.get(f"{key}.events", []) or []):
        ek = f"{key}.events[{i}]"
        if "energy_mj" in ev:
            energy = float(doc.number(f"{ek}.energy_mj")) * 1e-3
        elif "energy_uj" in ev:
            energy = float(doc.number(f"{ek}.energy_uj")) * 1e-6
        elif "reception" in ev:
            from .energy import default_model
            from .mls import RadioConfig

            rx = ev["reception"]
            model = power_model or default_model()
            cfg = RadioConfig(int(rx["ldr"]), int(rx["hdr"]))
            energy = float(model.receiver_cost(cfg, 8 * int(rx.get("payload_bytes", 0))).energy)
        else:
            raise doc.error(ek, "event needs energy_mj, energy_uj or reception")
        events.append(ProfileEvent(str(doc.get(f"{ek}.label")), energy, 0.0))
    return DutyProfile(idle, tuple(events))


REFERENCE_POINTS = {
    # label: (rate Hz, low, high, unit)
    "0.1 Hz": (0.1, 2.0, 2.2, "days"),
    "hourly": (1 / 3600, 1.6, 1.8, "years"),
    "daily": (1 / 86400, 7.6, 8.4, "years"),
    "never": (0.0, 9.4, 9.6, "years"),
}
