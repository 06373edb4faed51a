"""Discrete-event simulation of wake-up radio modules.

Each :class:`Device` is one module: a wake-up receiver, an OOK transmitter
with auto-shutdown, an RF switch and a shutdown-first MCU driven by a host
over four commands. Time is exact (``Fraction`` seconds) and every device
keeps an :class:`EnergyLedger` whose intervals tile the simulated horizon.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from . import link as linkmod
from .energy import MIN_TX_RATE, PowerModel, default_model
from .mls import (
    DEFAULT_THRESHOLD, MAX_PAYLOAD_BYTES, ChipStream, MalformedFrameError, RadioConfig, WucFrame,
    chip_flip_noise, decode_stream, encode_frame, find_preamble, longest_off_run,
)

log = logging.getLogger(__name__)

EVENT_KINDS = frozenset({
    "chip-boundary", "preamble-detected", "frame-complete", "irq-assert",
    "sdn-low", "command", "timer", "tx-complete",
})
WHO_AM_I_ID = 0x6D
MCU_WAKE_TIME = Fraction(290, 10**6)
AUTO_SHUTDOWN_ZERO_RUN = 5


class SimulationError(RuntimeError):
    pass


class NoResponseError(SimulationError):
    """Command sent while the SDN line was not pulled low."""


class DeviceBusyError(SimulationError):
    pass


class NotConfiguredError(SimulationError):
    pass


class AutoShutdownRiskError(SimulationError):
    """SendWuC below 1024 bit/s in strict mode: off-runs can trip transmitter auto-shutdown."""


def as_time(t) -> Fraction:
    if isinstance(t, Fraction):
        return t
    if isinstance(t, float):
        return Fraction(repr(t))
    return Fraction(t)


# -- events and trace ----------------------------------------------------

@dataclass(frozen=True)
class SimEvent:
    time: Fraction
    target: str
    kind: str
    detail: str = ""

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class TraceRow:
    time: Fraction
    device: str
    event: str
    detail: str = ""


# -- ledger --------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    start: Fraction
    end: Fraction
    state: str
    power: Fraction

    @property
    def energy(self) -> Fraction:
        return self.power * (self.end - self.start)


@dataclass(frozen=True)
class DiscreteCost:
    time: Fraction
    label: str
    energy: Fraction


class EnergyLedger:
    def __init__(self, device: str, start: Fraction, state: str, power: Fraction):
        self.device = device
        self.intervals: list[Interval] = []
        self.discrete: list[DiscreteCost] = []
        self._open = (start, state, power)

    @property
    def state(self) -> str:
        return self._open[1]

    def enter(self, t: Fraction, state: str, power: Fraction) -> None:
        start, cur, p = self._open
        if t < start:
            raise SimulationError(f"{self.device}: ledger moved backwards ({t} < {start})")
        if t > start:
            self.intervals.append(Interval(start, t, cur, p))
        self._open = (t, state, power)

    def add(self, t: Fraction, label: str, energy: Fraction) -> None:
        self.discrete.append(DiscreteCost(t, label, energy))

    def closed_at(self, t: Fraction) -> list[Interval]:
        """All intervals with the open one cut off at ``t``."""
        start, state, power = self._open
        out = [iv for iv in self.intervals if iv.start < t]
        if out and out[-1].end > t:
            last = out[-1]
            out[-1] = Interval(last.start, t, last.state, last.power)
        if start < t:
            out.append(Interval(start, t, state, power))
        return out

    def total_energy(self, until: Fraction) -> Fraction:
        return (sum((iv.energy for iv in self.closed_at(until)), Fraction(0))
                + sum((d.energy for d in self.discrete if d.time <= until), Fraction(0)))

    def select(self, states: Iterable[str], since: Fraction, until: Fraction) -> list[Interval]:
        states = set(states)
        return [iv for iv in self.closed_at(until) if iv.state in states and iv.start >= since]

    def rows(self, until: Fraction) -> list[dict]:
        rows = [{"device": self.device, "start_s": iv.start, "end_s": iv.end, "state": iv.state,
                 "power_w": iv.power, "energy_j": iv.energy} for iv in self.closed_at(until)]
        rows += [{"device": self.device, "start_s": d.time, "end_s": d.time, "state": d.label,
                  "power_w": Fraction(0), "energy_j": d.energy} for d in self.discrete if d.time <= until]
        rows.sort(key=lambda r: (r["start_s"], r["end_s"]))
        return rows


# -- device --------------------------------------------------------------

@dataclass
class ModuleState:
    mcu: str = "shutdown"  # shutdown | handling-irq | serving-host
    wur: str = "suspended"  # idle-listen | decoding | suspended
    tx: str = "shutdown"  # shutdown | ramp-up | transmitting | auto-shutdown-pending
    rf_switch: str = "rx-branch"  # rx-branch | tx-branch

    def check(self) -> None:
        if self.tx == "transmitting" and self.rf_switch != "tx-branch":
            raise SimulationError("transmitting with the RF switch on the RX branch")
        if self.wur == "decoding" and self.rf_switch != "rx-branch":
            raise SimulationError("decoding with the RF switch on the TX branch")


@dataclass
class BackupRegisters:
    reason: str | None = None
    payload: bytes = b""


@dataclass(frozen=True)
class IrqReason:
    reason: str | None
    payload: bytes


# Host commands.

@dataclass(frozen=True)
class WhoAmI:
    pass


@dataclass(frozen=True)
class SetupWuR:
    config: RadioConfig


@dataclass(frozen=True)
class SendWuC:
    address: int
    payload: bytes = b""
    voltage: Fraction | float = Fraction(9, 5)
    config: RadioConfig | None = None  # rate override; defaults to the sender's own setup

    def __post_init__(self):
        if len(self.payload) > MAX_PAYLOAD_BYTES:
            raise ValueError(f"SendWuC payload is {len(self.payload)} bytes, at most {MAX_PAYLOAD_BYTES}")


@dataclass(frozen=True)
class IRQReason:
    pass


HostCommand = WhoAmI | SetupWuR | SendWuC | IRQReason


@dataclass
class Transmission:
    sender: str
    frame: WucFrame
    config: RadioConfig
    stream: ChipStream
    command_time: Fraction
    air_start: Fraction
    air_end: Fraction
    corrupted: bool = False


@dataclass
class Reception:
    receiver: str
    stream_start: Fraction
    delivered: bool
    frame: WucFrame | None = None
    matched: bool = False
    irq_time: Fraction | None = None

    @property
    def latency(self) -> Fraction | None:
        return None if self.irq_time is None else self.irq_time - self.stream_start


@dataclass
class Device:
    id: str
    position: tuple[float, float]
    voltage: Fraction
    ledger: EnergyLedger
    tx_power_dbm: float | None = None
    state: ModuleState = field(default_factory=ModuleState)
    backup: BackupRegisters = field(default_factory=BackupRegisters)
    config: RadioConfig | None = None
    sdn_low: bool = False
    irq_line: bool = False
    busy_until: Fraction = Fraction(0)
    receptions: list[Reception] = field(default_factory=list)


def distance(a: Device, b: Device) -> float:
    return ((a.position[0] - b.position[0]) ** 2 + (a.position[1] - b.position[1]) ** 2) ** 0.5


# -- simulator -----------------------------------------------------------

class Simulator:
    """Single-threaded event loop owning every device and its generator state.

    ``chip_flip_prob`` switches delivery from one Bernoulli draw per wake-up
    call to chip-level noise on every in-range stream. ``strict_rates``
    rejects SendWuC below 1024 bit/s; with it off, such frames are marked
    corrupted when they contain long enough off-runs.
    """

    def __init__(self, power: PowerModel | None = None, link: linkmod.LinkParams | None = None, seed=0, *,
                 strict_rates: bool = True, chip_flip_prob: float | None = None,
                 threshold: float = DEFAULT_THRESHOLD, zero_run_limit: int = AUTO_SHUTDOWN_ZERO_RUN):
        self.power = power or default_model()
        self.link = link or linkmod.preset("field")
        self.seed = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
        self.strict_rates = strict_rates
        self.chip_flip_prob = chip_flip_prob
        self.threshold = threshold
        self.zero_run_limit = zero_run_limit
        self.clock = Fraction(0)
        self.devices: dict[str, Device] = {}
        self.trace: list[TraceRow] = []
        self.transmissions: list[Transmission] = []
        self._queue: list = []
        self._seq = 0
        self._draws = 0

    # -- event loop ------------------------------------------------------

    def schedule(self, time, target: str, kind: str, detail: str = "",
                 action: Callable[[Fraction], None] | None = None) -> SimEvent:
        time = as_time(time)
        if time < self.clock:
            raise SimulationError(f"cannot schedule {kind} at {time} s, clock is at {self.clock} s")
        ev = SimEvent(time, target, kind, detail)
        # float first for cheap comparisons; float() is monotone so exact ties fall through
        heapq.heappush(self._queue, (float(time), time, target, self._seq, ev, action))
        self._seq += 1
        return ev

    def run_until(self, t) -> list[TraceRow]:
        t = as_time(t)
        if t < self.clock:
            raise SimulationError(f"run_until({t}) is before the clock ({self.clock})")
        first = len(self.trace)
        while self._queue and self._queue[0][1] <= t:
            _, time, _, _, ev, action = heapq.heappop(self._queue)
            self.clock = time
            self._log(ev.target, ev.kind, ev.detail)
            if action is not None:
                action(time)
        self.clock = t
        return self.trace[first:]

    def pending(self) -> int:
        return len(self._queue)

    def _log(self, device: str, event: str, detail: str = "") -> None:
        self.trace.append(TraceRow(self.clock, device, event, detail))

    # -- devices ---------------------------------------------------------

    def add_device(self, id: str, position=(0.0, 0.0), voltage=Fraction(9, 5), tx_power_dbm: float | None = None) -> Device:
        if id in self.devices:
            raise ValueError(f"duplicate device id {id!r}")
        ledger = EnergyLedger(id, self.clock, "shutdown", self.power.shutdown_floor)
        dev = Device(id, (float(position[0]), float(position[1])), as_time(voltage), ledger, tx_power_dbm)
        self.devices[id] = dev
        return dev

    def _dev(self, dev) -> Device:
        return dev if isinstance(dev, Device) else self.devices[dev]

    def _enter(self, dev: Device, t: Fraction, state: str, power: Fraction) -> None:
        dev.ledger.enter(t, state, power)
        dev.state.check()

    def _return_idle(self, dev: Device, t: Fraction) -> None:
        dev.state.mcu = "shutdown"
        dev.state.tx = "shutdown"
        dev.state.rf_switch = "rx-branch"
        if dev.config is not None:
            dev.state.wur = "idle-listen"
            self._enter(dev, t, "idle-listen", self.power.idle_power(dev.config.ldr))
        else:
            dev.state.wur = "suspended"
            self._enter(dev, t, "shutdown", self.power.shutdown_floor)

    def tx_power_of(self, dev: Device, voltage) -> float:
        if dev.tx_power_dbm is not None:
            return dev.tx_power_dbm
        return float(self.power.tx_operating_point(voltage)[0])

    # -- host interface --------------------------------------------------

    def assert_sdn_low(self, dev) -> None:
        dev = self._dev(dev)
        dev.sdn_low = True
        self._log(dev.id, "sdn-low")

    def host_command(self, dev, cmd: HostCommand, *, _logged: bool = False):
        """Execute ``cmd`` on ``dev`` at the current clock and return the response."""
        dev = self._dev(dev)
        t = self.clock
        if not dev.sdn_low:
            raise NoResponseError(f"{dev.id}: {type(cmd).__name__} sent without SDN low")
        if t < dev.busy_until:
            raise DeviceBusyError(f"{dev.id}: busy until {float(dev.busy_until)} s")
        dev.sdn_low = False
        if not _logged:
            self._log(dev.id, "command", type(cmd).__name__)
        if isinstance(cmd, SendWuC):
            return self._send_wuc(dev, cmd, t)
        dev.state.mcu = "serving-host"
        if isinstance(cmd, WhoAmI):
            response = WHO_AM_I_ID
            op = self.power.aux_cost("WhoAmI")
        elif isinstance(cmd, SetupWuR):
            # reject unmeasured idle rates before spending anything
            self.power.idle_power(cmd.config.ldr)
            self.power.idle_power(cmd.config.hdr)
            op = self.power.aux_cost("SetupWuR")
            dev.state.wur = "suspended"
            response = "ok"
        elif isinstance(cmd, IRQReason):
            response = IrqReason(dev.backup.reason, dev.backup.payload)
            dev.irq_line = False
            op = self.power.aux_cost("IRQReason")
        else:
            raise TypeError(f"unknown host command {cmd!r}")
        self._enter(dev, t, op.name, op.power)
        end = t + op.duration
        dev.busy_until = end

        def done(now, dev=dev, cmd=cmd):
            if isinstance(cmd, SetupWuR):
                dev.config = cmd.config
            self._return_idle(dev, now)

        self.schedule(end, dev.id, "timer", f"{op.name} done", done)
        return response

    def host_send_wuc(self, dev, cmd: SendWuC) -> Transmission:
        return self.host_command(dev, cmd)

    def schedule_command(self, at, dev_id: str, cmd: HostCommand) -> None:
        """Pull SDN low and issue ``cmd`` at time ``at``; responses go to the trace."""
        self.schedule(at, dev_id, "sdn-low", "", lambda now: setattr(self.devices[dev_id], "sdn_low", True))

        def run(now):
            resp = self.host_command(dev_id, cmd, _logged=True)
            self._log(dev_id, "command", f"response {_fmt_response(resp)}")

        self.schedule(at, dev_id, "command", type(cmd).__name__, run)

    def system_reset(self, dev) -> None:
        """Reset wake source: the MCU wakes for 290 us and goes straight back to shutdown."""
        dev = self._dev(dev)
        t = self.clock
        if t < dev.busy_until:
            raise DeviceBusyError(f"{dev.id}: busy until {float(dev.busy_until)} s")
        self._log(dev.id, "timer", "system-reset")
        _, label, power = dev.ledger._open
        self._enter(dev, t, "mcu-wake", power)
        end = t + MCU_WAKE_TIME
        dev.busy_until = max(dev.busy_until, end)
        self.schedule(end, dev.id, "timer", "reset done", lambda now: self._enter(dev, now, label, power))

    def full_reset(self, dev) -> None:
        """Power cycle: configuration and backup registers are lost."""
        dev = self._dev(dev)
        dev.config = None
        dev.backup = BackupRegisters()
        dev.irq_line = False
        self._return_idle(dev, self.clock)

    # -- transmit path ---------------------------------------------------

    def _send_wuc(self, dev: Device, cmd: SendWuC, t: Fraction) -> Transmission:
        cfg = cmd.config or dev.config
        if cfg is None:
            raise NotConfiguredError(f"{dev.id}: SendWuC needs data rates; run SetupWuR or pass a config")
        low = min(cfg.ldr, cfg.hdr) < MIN_TX_RATE
        if low and self.strict_rates:
            raise AutoShutdownRiskError(
                f"{dev.id}: SendWuC at ldr={cfg.ldr}, hdr={cfg.hdr} bit/s; zero runs below "
                f"{MIN_TX_RATE} bit/s can trigger transmitter auto-shutdown"
            )
        frame = WucFrame(cmd.address, cmd.payload)
        stream = encode_frame(frame, cfg)
        corrupted = low and longest_off_run(stream, below_rate=MIN_TX_RATE) >= self.zero_run_limit
        report = self.power.sender_cost(cfg, frame.payload_bits, cmd.voltage, allow_low_rate=low)
        overhead, tx = report.phases
        air_start = t + overhead.duration
        air_end = air_start + tx.duration
        trans = Transmission(dev.id, frame, cfg, stream, t, air_start, air_end, corrupted)
        self.transmissions.append(trans)

        dev.state.mcu = "serving-host"
        dev.state.wur = "suspended"
        dev.state.tx = "ramp-up"
        dev.state.rf_switch = "tx-branch"
        self._enter(dev, t, "sendwuc-overhead", overhead.power)
        dev.busy_until = air_end

        def start_air(now):
            dev.state.tx = "transmitting"
            self._enter(dev, now, "tx", tx.power)

        def finish(now):
            dev.state.tx = "auto-shutdown-pending"
            self._return_idle(dev, now)

        self.schedule(air_start, dev.id, "timer", "tx-start", start_air)
        self.schedule(air_end, dev.id, "tx-complete", "corrupted" if corrupted else "", finish)
        if corrupted:
            log.info("%s: frame to %#06x corrupted by transmitter auto-shutdown", dev.id, frame.address)
            return trans

        tx_power = self.tx_power_of(dev, cmd.voltage)
        for other in sorted(self.devices.values(), key=lambda d: d.id):
            if other is dev:
                continue
            d = max(distance(dev, other), self.link.reference_distance_m)
            p = linkmod.sample(d, tx_power, self.link).pdr
            rng = linkmod.trial_rng(self.seed, self._draws)
            self._draws += 1
            if self.chip_flip_prob is None:
                delivered = bool(rng.random() < p)
                rx_stream = stream
            else:
                delivered = p > 0
                rx_stream = chip_flip_noise(stream, self.chip_flip_prob, int(rng.integers(2**63)))
            self.schedule(air_start, other.id, "chip-boundary", f"stream from {dev.id}",
                          lambda now, o=other, s=rx_stream, ok=delivered: self.wur_receive(o, s, ok))
        return trans

    # -- receive path ----------------------------------------------------

    def wur_receive(self, dev, stream: ChipStream, delivered: bool) -> Reception | None:
        """Feed a stream to ``dev``'s wake-up receiver at the current clock."""
        dev = self._dev(dev)
        t = self.clock
        if dev.config is None:
            return None
        if dev.state.wur != "idle-listen" or t < dev.busy_until:
            log.warning("%s: stream at %s s ignored, receiver busy", dev.id, float(t))
            self._log(dev.id, "chip-boundary", "ignored: receiver busy")
            return None
        rec = Reception(dev.id, t, delivered)
        dev.receptions.append(rec)
        if not delivered:
            self._log(dev.id, "chip-boundary", "not delivered")
            return rec
        cfg = dev.config
        try:
            frame = decode_stream(stream, cfg, self.threshold)
        except MalformedFrameError as exc:
            self._log(dev.id, "chip-boundary", f"malformed: {exc}")
            return rec
        if frame is None:
            self._log(dev.id, "chip-boundary", "no preamble")
            return rec
        rec.frame = frame
        start = find_preamble(stream, cfg, self.threshold)
        t_pre = t + sum((Fraction(1, int(r)) for r in stream.rates[:start]), Fraction(0))
        n = cfg.chips_per_bit
        t_dec = t_pre + Fraction(n, cfg.ldr)
        t_end = t_dec + Fraction((16 + frame.payload_bits) * n, cfg.hdr)
        self._enter(dev, t_pre, "preamble", self.power.idle_power(cfg.ldr))
        dev.busy_until = t_end

        def detected(now):
            dev.state.wur = "decoding"
            self._enter(dev, now, "decoding", self.power.idle_power(cfg.hdr))

        def complete(now):
            dev.state.wur = "idle-listen"
            if frame.address != cfg.address:
                self._log(dev.id, "frame-complete", f"address {frame.address:#06x} not ours")
                self._return_idle(dev, now)
                return
            rec.matched = True
            irq = self.power.irq_op(frame.payload_bits)
            dev.state.mcu = "handling-irq"
            self._enter(dev, now, "irq-handling", irq.power)
            dev.busy_until = now + irq.duration

            def assert_irq(at):
                dev.backup.reason = "wur"
                dev.backup.payload = frame.payload
                dev.irq_line = True
                rec.irq_time = at
                self._return_idle(dev, at)

            self.schedule(now + irq.duration, dev.id, "irq-assert", f"payload={frame.payload.hex()}", assert_irq)

        self.schedule(t_dec, dev.id, "preamble-detected", "", detected)
        self.schedule(t_end, dev.id, "frame-complete", f"address={frame.address:#06x}", complete)
        return rec


def _fmt_response(resp) -> str:
    if isinstance(resp, int):
        return f"{resp:#04x}"
    if isinstance(resp, IrqReason):
        return f"reason={resp.reason} payload={resp.payload.hex()}"
    if isinstance(resp, Transmission):
        return f"air {float(resp.air_start):.6f}-{float(resp.air_end):.6f}" + (" corrupted" if resp.corrupted else "")
    return str(resp)


# -- end-to-end transaction ----------------------------------------------

SENDER_STATES = ("sendwuc-overhead", "tx")
RECEIVER_STATES = ("preamble", "decoding", "irq-handling")


@dataclass
class TransactionOutcome:
    delivered: bool
    latency: Fraction | None
    sender_energy: Fraction
    sender_duration: Fraction
    receiver_energy: Fraction
    receiver_duration: Fraction
    sim: Simulator
    horizon: Fraction

    @property
    def ledgers(self) -> dict[str, EnergyLedger]:
        return {k: d.ledger for k, d in self.sim.devices.items()}


def _window(ledger: EnergyLedger, states, since, until) -> tuple[Fraction, Fraction]:
    ivs = ledger.select(states, since, until)
    return (sum((iv.energy for iv in ivs), Fraction(0)),
            sum((iv.end - iv.start for iv in ivs), Fraction(0)))


def end_to_end_wakeup(distance_m: float, cfg: RadioConfig, payload: bytes = b"", voltage=Fraction(9, 5),
                      seed=0, *, power: PowerModel | None = None, link: linkmod.LinkParams | None = None,
                      tx_power_dbm: float | None = None, chip_flip_prob: float | None = None) -> TransactionOutcome:
    """Configure a sender/receiver pair, send one wake-up call, and account for it.

    Both modules run SetupWuR at t=0; the SendWuC command is issued at t=1 s.
    """
    sim = Simulator(power, link, seed, chip_flip_prob=chip_flip_prob)
    tx = sim.add_device("tx", (0.0, 0.0), voltage, tx_power_dbm)
    rx = sim.add_device("rx", (float(distance_m), 0.0), voltage)
    for dev in (tx, rx):
        sim.assert_sdn_low(dev)
        sim.host_command(dev, SetupWuR(cfg))
    t_send = Fraction(1)
    sim.run_until(t_send)
    sim.assert_sdn_low(tx)
    sim.host_command(tx, SendWuC(cfg.address, payload, voltage))
    horizon = t_send + 1
    sim.run_until(horizon)
    s_e, s_d = _window(tx.ledger, SENDER_STATES, t_send, horizon)
    r_e, r_d = _window(rx.ledger, RECEIVER_STATES, t_send, horizon)
    rec = rx.receptions[-1] if rx.receptions else None
    latency = rec.latency if rec else None
    return TransactionOutcome(latency is not None, latency, s_e, s_d, r_e, r_d, sim, horizon)


def wakeup_series(distance_m: float, cfg: RadioConfig, trials: int, seed=0, *, payload: bytes = b"",
                  voltage=Fraction(9, 5), power: PowerModel | None = None, link: linkmod.LinkParams | None = None,
                  tx_power_dbm: float | None = None, spacing=Fraction(1, 4)) -> list[bool]:
    """Send ``trials`` wake-up calls over one configured pair; returns per-call IRQ outcomes.

    Calls are ``spacing`` seconds apart, long enough for both ends to be idle
    again, and each draws from its own ``(seed, trial)`` stream.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    sim = Simulator(power, link, seed)
    tx = sim.add_device("tx", (0.0, 0.0), voltage, tx_power_dbm)
    rx = sim.add_device("rx", (float(distance_m), 0.0), voltage)
    for dev in (tx, rx):
        sim.assert_sdn_low(dev)
        sim.host_command(dev, SetupWuR(cfg))
    spacing = as_time(spacing)
    t = Fraction(1)
    outcomes = []
    for _ in range(trials):
        sim.run_until(t)
        sim.assert_sdn_low(tx)
        sim.host_command(tx, SendWuC(cfg.address, payload, voltage))
        seen = len(rx.receptions)
        t += spacing
        sim.run_until(t)
        outcomes.append(len(rx.receptions) > seen and rx.receptions[-1].irq_time is not None)
    return outcomes
