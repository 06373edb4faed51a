"""Measured wake-up module power tables and per-transaction airtime/energy.

All quantities are exact :class:`~fractions.Fraction` values in SI units
(W, J, s). Chip durations are dyadic, so every total in a report is the
exact sum of its phases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .config import ConfigError, Document, load_data
from .mls import ADDRESS_BITS, MAX_PAYLOAD_BYTES, RadioConfig, airtime

AUX_OPS = ("WhoAmI", "SetupWuR", "SendWuC_overhead", "IRQReason", "IRQ_no_payload", "IRQ_payload6")
MIN_TX_RATE = 1024

_MICRO = Fraction(1, 10**6)
_MILLI = Fraction(1, 10**3)
_NANO = Fraction(1, 10**9)


class UnsupportedRateError(ValueError):
    pass


class VoltageRangeError(ValueError):
    pass


@dataclass(frozen=True)
class TxPoint:
    voltage: Fraction
    tx_power_dbm: Fraction
    consumption: Fraction  # W


@dataclass(frozen=True)
class AuxOp:
    name: str
    energy: Fraction  # J
    duration: Fraction  # s

    @property
    def power(self) -> Fraction:
        return self.energy / self.duration


@dataclass(frozen=True)
class Phase:
    name: str
    power: Fraction | None
    duration: Fraction
    energy: Fraction


@dataclass(frozen=True)
class CostReport:
    phases: tuple[Phase, ...]

    @property
    def energy(self) -> Fraction:
        return sum((p.energy for p in self.phases), Fraction(0))

    @property
    def duration(self) -> Fraction:
        return sum((p.duration for p in self.phases), Fraction(0))


@dataclass(frozen=True)
class TransactionReport:
    sender: CostReport
    receiver: CostReport

    @property
    def sender_energy(self) -> Fraction:
        return self.sender.energy

    @property
    def sender_duration(self) -> Fraction:
        return self.sender.duration

    @property
    def receiver_energy(self) -> Fraction:
        return self.receiver.energy

    @property
    def receiver_duration(self) -> Fraction:
        return self.receiver.duration

    @property
    def breakdown(self) -> list[tuple[str, Phase]]:
        return [("sender", p) for p in self.sender.phases] + [("receiver", p) for p in self.receiver.phases]


@dataclass(frozen=True)
class PowerModel:
    idle: dict[int, Fraction]
    tx: tuple[TxPoint, ...]
    aux: dict[str, AuxOp]
    shutdown_floor: Fraction = Fraction(29) * _NANO
    reference: tuple[dict, ...] = ()
    source_text: dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    # -- loading ---------------------------------------------------------

    @classmethod
    def from_document(cls, doc: Document) -> "PowerModel":
        rows = doc.get("idle_listening")
        if not isinstance(rows, list) or not rows:
            raise doc.error("idle_listening", "expected a non-empty list of rows")
        idle = {}
        for i, _ in enumerate(rows):
            rate = doc.number(f"idle_listening[{i}].rate_bps")
            if rate.denominator != 1 or rate <= 0:
                raise doc.error(f"idle_listening[{i}].rate_bps", f"expected a positive integer, got {rate}")
            power = doc.number(f"idle_listening[{i}].power_uw")
            if power <= 0:
                raise doc.error(f"idle_listening[{i}].power_uw", "must be positive")
            idle[int(rate)] = power * _MICRO
        _check_increasing(doc, "idle_listening", [idle[r] for r in sorted(idle)], sorted(idle))

        tx_rows = doc.get("tx")
        if not isinstance(tx_rows, list) or len(tx_rows) < 2:
            raise doc.error("tx", "expected at least two rows")
        tx = []
        for i, _ in enumerate(tx_rows):
            tx.append(TxPoint(
                doc.number(f"tx[{i}].voltage_v"),
                doc.number(f"tx[{i}].tx_power_dbm"),
                doc.number(f"tx[{i}].consumption_mw") * _MILLI,
            ))
        tx.sort(key=lambda p: p.voltage)
        for col in ("voltage", "tx_power_dbm", "consumption"):
            vals = [getattr(p, col) for p in tx]
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise doc.error("tx", f"column {col} must be strictly increasing in voltage")

        ops = doc.get("aux_operations")
        if not isinstance(ops, dict):
            raise doc.error("aux_operations", "expected a mapping of operation rows")
        missing = [name for name in AUX_OPS if name not in ops]
        if missing:
            raise doc.error("aux_operations", f"missing rows {missing}")
        aux = {}
        for name in ops:
            key = f"aux_operations.{name}"
            row = doc.get(key)
            if not isinstance(row, dict):
                raise doc.error(key, "expected a mapping")
            if ("energy_uj" in row) == ("energy_mj" in row):
                raise doc.error(key, "give exactly one of energy_uj / energy_mj")
            if "energy_uj" in row:
                energy = doc.number(f"{key}.energy_uj") * _MICRO
            else:
                energy = doc.number(f"{key}.energy_mj") * _MILLI
            duration = doc.number(f"{key}.duration_ms") * _MILLI
            if energy <= 0 or duration <= 0:
                raise doc.error(key, "energy and duration must be positive")
            aux[name] = AuxOp(name, energy, duration)

        floor = doc.number("shutdown_floor_nw", Fraction(29)) * _NANO
        reference = tuple(doc.get("reference", []) or [])
        return cls(idle, tuple(tx), aux, floor, reference, dict(doc.raw))

    @classmethod
    def load(cls, path=None) -> "PowerModel":
        doc = Document.load(path) if path is not None else load_data("power_tables.yaml")
        return cls.from_document(doc)

    # -- table lookups ---------------------------------------------------

    def idle_power(self, rate: int) -> Fraction:
        try:
            return self.idle[int(rate)]
        except KeyError:
            raise UnsupportedRateError(
                f"no idle-listening power measured at {rate} bit/s; "
                f"available rates: {sorted(self.idle)}"
            ) from None

    def tx_operating_point(self, voltage) -> tuple[Fraction, Fraction]:
        """(TX power in dBm, consumption in W) at a supply voltage, interpolated per column."""
        v = Fraction(str(voltage)) if isinstance(voltage, float) else Fraction(voltage)
        lo, hi = self.tx[0].voltage, self.tx[-1].voltage
        if not lo <= v <= hi:
            raise VoltageRangeError(f"supply voltage {float(v)} V outside the measured range [{float(lo)}, {float(hi)}] V")
        for a, b in zip(self.tx, self.tx[1:]):
            if v == a.voltage:
                return a.tx_power_dbm, a.consumption
            if a.voltage < v <= b.voltage:
                if v == b.voltage:
                    return b.tx_power_dbm, b.consumption
                w = (v - a.voltage) / (b.voltage - a.voltage)
                return (a.tx_power_dbm + w * (b.tx_power_dbm - a.tx_power_dbm),
                        a.consumption + w * (b.consumption - a.consumption))
        raise AssertionError("unreachable")

    def aux_cost(self, op: str) -> AuxOp:
        try:
            return self.aux[op]
        except KeyError:
            raise KeyError(f"unknown auxiliary operation {op!r}; known: {sorted(self.aux)}") from None

    def irq_op(self, payload_bits: int) -> AuxOp:
        # FIFO readout happens for any payload; only the 6-byte case is measured
        return self.aux_cost("IRQ_payload6" if payload_bits else "IRQ_no_payload")

    # -- transactions ----------------------------------------------------

    def sender_cost(self, cfg: RadioConfig, payload_bits: int = 0, voltage=Fraction(9, 5),
                    *, allow_low_rate: bool = False) -> CostReport:
        _check_payload_bits(payload_bits)
        if not allow_low_rate and min(cfg.ldr, cfg.hdr) < MIN_TX_RATE:
            raise UnsupportedRateError(
                f"SendWuC below {MIN_TX_RATE} bit/s risks transmitter auto-shutdown "
                f"(ldr={cfg.ldr}, hdr={cfg.hdr})"
            )
        overhead = self.aux_cost("SendWuC_overhead")
        _, p_tx = self.tx_operating_point(voltage)
        t_air = airtime(cfg, payload_bits)
        return CostReport((
            Phase("sendwuc-overhead", overhead.power, overhead.duration, overhead.energy),
            Phase("tx", p_tx, t_air, p_tx * t_air),
        ))

    def receiver_cost(self, cfg: RadioConfig, payload_bits: int = 0) -> CostReport:
        _check_payload_bits(payload_bits)
        n = cfg.chips_per_bit
        t_pre = Fraction(n, cfg.ldr)
        t_dec = Fraction((ADDRESS_BITS + payload_bits) * n, cfg.hdr)
        p_pre = self.idle_power(cfg.ldr)
        p_dec = self.idle_power(cfg.hdr)
        irq = self.irq_op(payload_bits)
        return CostReport((
            Phase("preamble", p_pre, t_pre, p_pre * t_pre),
            Phase("decoding", p_dec, t_dec, p_dec * t_dec),
            Phase("irq-handling", irq.power, irq.duration, irq.energy),
        ))

    def transaction(self, cfg: RadioConfig, payload_bits: int = 0, voltage=Fraction(9, 5)) -> TransactionReport:
        return TransactionReport(self.sender_cost(cfg, payload_bits, voltage), self.receiver_cost(cfg, payload_bits))


def _check_payload_bits(bits: int) -> None:
    if bits < 0 or bits % 8 or bits > 8 * MAX_PAYLOAD_BYTES:
        raise ValueError(f"payload_bits must be 0 or a whole number of bytes up to 48, got {bits}")


def _check_increasing(doc, key, values, rates):
    if any(b <= a for a, b in zip(values, values[1:])):
        raise doc.error(key, f"power must increase strictly with rate (rates {rates})")


_DEFAULT: PowerModel | None = None


def default_model() -> PowerModel:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PowerModel.load()
    return _DEFAULT


def idle_power(rate: int) -> Fraction:
    return default_model().idle_power(rate)


def tx_operating_point(voltage) -> tuple[Fraction, Fraction]:
    return default_model().tx_operating_point(voltage)


def aux_cost(op: str) -> AuxOp:
    return default_model().aux_cost(op)


def sender_cost(cfg: RadioConfig, payload_bits: int = 0, voltage=Fraction(9, 5), **kw) -> CostReport:
    return default_model().sender_cost(cfg, payload_bits, voltage, **kw)


def receiver_cost(cfg: RadioConfig, payload_bits: int = 0) -> CostReport:
    return default_model().receiver_cost(cfg, payload_bits)


__all__ = [
    "PowerModel", "TxPoint", "AuxOp", "Phase", "CostReport", "TransactionReport", "ConfigError",
    "UnsupportedRateError", "VoltageRangeError", "default_model", "idle_power", "tx_operating_point",
    "aux_cost", "sender_cost", "receiver_cost", "AUX_OPS",
]
