"""Free-space link budget and a logistic wake-up delivery curve.

The delivery probability is a logistic function of link margin (received
power minus sensitivity), fitted through measured (margin, PDR) anchors.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import Document, load_data

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class LinkParams:
    carrier_freq_mhz: float = 868.35
    tx_antenna_gain_dbi: float = -2.1
    rx_antenna_gain_dbi: float = -2.1
    sensitivity_dbm: float = -72.62
    path_loss_exponent: float = 2.0
    reference_distance_m: float = 1.0
    pdr_midpoint_db: float = 0.0
    pdr_slope_db: float = 1.0
    max_range_cutoff_m: float | None = 130.0
    pdr_ceiling: float | None = None

    def __post_init__(self):
        if self.carrier_freq_mhz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.pdr_slope_db <= 0:
            raise ValueError("pdr slope must be positive")
        if self.sensitivity_dbm >= 0:
            raise ValueError("sensitivity must be below 0 dBm")
        if self.reference_distance_m <= 0:
            raise ValueError("reference distance must be positive")


@dataclass(frozen=True)
class LinkSample:
    distance: float
    rssi: float
    margin: float
    pdr: float


def path_loss(distance: float, params: LinkParams) -> float:
    d0 = params.reference_distance_m
    if distance < d0:
        raise ValueError(f"distance {distance} m is below the reference distance {d0} m")
    f_hz = params.carrier_freq_mhz * 1e6
    fspl_d0 = 20 * math.log10(4 * math.pi * d0 * f_hz / SPEED_OF_LIGHT)
    return fspl_d0 + 10 * params.path_loss_exponent * math.log10(distance / d0)


def rssi(distance: float, tx_power: float, params: LinkParams) -> float:
    return tx_power + params.tx_antenna_gain_dbi + params.rx_antenna_gain_dbi - path_loss(distance, params)


def margin(distance: float, tx_power: float, params: LinkParams) -> float:
    return rssi(distance, tx_power, params) - params.sensitivity_dbm


def pdr(margin_db: float, params: LinkParams, distance: float | None = None) -> float:
    if distance is not None and params.max_range_cutoff_m is not None and distance > params.max_range_cutoff_m:
        return 0.0
    z = (margin_db - params.pdr_midpoint_db) / params.pdr_slope_db
    # split on sign so exp never overflows
    if z >= 0:
        p = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        p = e / (1.0 + e)
    if params.pdr_ceiling is not None:
        p = min(p, params.pdr_ceiling)
    return p


def sample(distance: float, tx_power: float, params: LinkParams) -> LinkSample:
    r = rssi(distance, tx_power, params)
    m = r - params.sensitivity_dbm
    return LinkSample(distance, r, m, pdr(m, params, distance))


def _logit(p: float) -> float:
    return math.log(p / (1 - p))


def calibrate_pdr(anchors: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Fit ``(midpoint, slope)`` of the logistic through ``(margin, pdr)`` anchors.

    Two anchors are solved exactly; more are fitted by least squares on the
    logits, which is linear in the margin.
    """
    if len(anchors) < 2:
        raise ValueError("need at least two anchors")
    for m, p in anchors:
        if not 0 < p < 1:
            raise ValueError(f"anchor pdr {p} at margin {m} dB has an infinite logit; use 0 < pdr < 1")
    margins = np.array([a[0] for a in anchors], dtype=float)
    if len(np.unique(margins)) < 2:
        raise ValueError("anchors need at least two distinct margins")
    logits = np.array([_logit(a[1]) for a in anchors])
    if len(anchors) == 2:
        (m1, l1), (m2, l2) = zip(margins, logits)
        a = (l1 - l2) / (m1 - m2)
        b = l1 - a * m1
    else:
        a, b = np.polyfit(margins, logits, 1)
    if a <= 0:
        raise ValueError("anchors imply pdr falling with margin; slope would be negative")
    slope = 1.0 / a
    return float(-b * slope), float(slope)


def calibrate_params(params: LinkParams, tx_power: float, distance_anchors: Sequence[tuple[float, float]]) -> LinkParams:
    """Calibrate the curve from ``(distance, pdr)`` anchors measured at ``tx_power``."""
    anchors = [(margin(d, tx_power, params), p) for d, p in distance_anchors]
    mid, slope = calibrate_pdr(anchors)
    return replace(params, pdr_midpoint_db=mid, pdr_slope_db=slope)


def trial_rng(seed, trial: int = 0) -> np.random.Generator:
    seed = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
    return np.random.default_rng([*seed, trial])


def deliver(distance: float, tx_power: float, params: LinkParams, seed, trial: int = 0) -> bool:
    """One Bernoulli delivery draw, reproducible for a given ``(seed, trial)``."""
    p = sample(distance, tx_power, params).pdr
    return bool(trial_rng(seed, trial).random() < p)


# -- presets -------------------------------------------------------------

def load_presets(doc: Document | None = None) -> dict[str, LinkParams]:
    doc = doc if doc is not None else load_data("presets.yaml")
    presets = {}
    for name, spec in (doc.get("link") or {}).items():
        key = f"link.{name}"
        fields = {k: float(doc.number(f"{key}.{k}")) for k in (
            "carrier_freq_mhz", "tx_antenna_gain_dbi", "rx_antenna_gain_dbi", "sensitivity_dbm",
            "path_loss_exponent", "reference_distance_m") if k in spec}
        cutoff = spec.get("max_range_cutoff_m")
        fields["max_range_cutoff_m"] = None if cutoff is None else float(doc.number(f"{key}.max_range_cutoff_m"))
        ceiling = spec.get("pdr_ceiling")
        fields["pdr_ceiling"] = None if ceiling is None else float(doc.number(f"{key}.pdr_ceiling"))
        base = LinkParams(**fields)
        cal = spec.get("calibration")
        if cal is None:
            raise doc.error(key, "missing calibration block")
        if "same_as" in cal:
            other = presets.get(cal["same_as"])
            if other is None:
                raise doc.error(f"{key}.calibration.same_as", f"preset {cal['same_as']!r} must be defined earlier")
            presets[name] = replace(base, pdr_midpoint_db=other.pdr_midpoint_db, pdr_slope_db=other.pdr_slope_db)
            continue
        tx = float(doc.number(f"{key}.calibration.tx_power_dbm"))
        anchors = [(float(doc.number(f"{key}.calibration.anchors[{i}].distance_m")),
                    float(doc.number(f"{key}.calibration.anchors[{i}].pdr")))
                   for i in range(len(cal.get("anchors", [])))]
        try:
            presets[name] = calibrate_params(base, tx, anchors)
        except ValueError as exc:
            raise doc.error(f"{key}.calibration", str(exc)) from None
    return presets


@lru_cache(maxsize=None)
def _default_presets() -> dict[str, LinkParams]:
    return load_presets()


def preset(name: str = "field") -> LinkParams:
    presets = _default_presets()
    try:
        return presets[name]
    except KeyError:
        raise KeyError(f"unknown link preset {name!r}; available: {sorted(presets)}") from None
