"""Scenario files: devices, link preset, seed, horizon and a timed host-command script."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import link as linkmod
from .config import ConfigError, Document, load_data
from .energy import PowerModel, default_model
from .mls import RadioConfig
from .sim import IRQReason, SendWuC, SetupWuR, Simulator, WhoAmI

COMMANDS = ("SetupWuR", "WhoAmI", "IRQReason", "SendWuC", "SystemReset")
TRACE_COLUMNS = ("time_s", "device", "event", "detail")
LEDGER_COLUMNS = ("device", "start_s", "end_s", "state", "power_w", "energy_j")


@dataclass(frozen=True)
class DeviceSpec:
    id: str
    role: str
    position: tuple[float, float]
    voltage: Fraction
    radio: RadioConfig
    tx_power_dbm: float | None = None


@dataclass(frozen=True)
class ScriptStep:
    at: Fraction
    device: str
    command: str
    address: int | None = None
    payload: bytes = b""
    voltage: Fraction | None = None


@dataclass
class ScenarioConfig:
    seed: int
    horizon: Fraction
    link_preset: str
    link: linkmod.LinkParams
    radio: RadioConfig
    devices: list[DeviceSpec]
    script: list[ScriptStep] = field(default_factory=list)
    strict_rates: bool = True
    chip_flip_prob: float | None = None
    threshold: float = 0.8
    outputs: dict[str, str] = field(default_factory=dict)

    def device(self, role: str) -> DeviceSpec:
        for d in self.devices:
            if d.role == role:
                return d
        raise KeyError(f"scenario has no device with role {role!r}")


def _radio(doc: Document, key: str, base: RadioConfig | None = None) -> RadioConfig:
    try:
        return RadioConfig(
            int(doc.get(f"{key}.ldr", base.ldr if base else 1024)),
            int(doc.get(f"{key}.hdr", base.hdr if base else 32768)),
            int(doc.get(f"{key}.address", base.address if base else 0)),
        )
    except ValueError as exc:
        raise doc.error(key, str(exc)) from None


def parse_scenario(doc: Document, presets: dict[str, linkmod.LinkParams] | None = None) -> ScenarioConfig:
    if "seed" not in doc.data:
        raise doc.error("seed", "missing; scenarios must fix their seed")
    seed = doc.number("seed")
    if seed.denominator != 1 or seed < 0:
        raise doc.error("seed", "expected a non-negative integer")
    presets = presets if presets is not None else linkmod.load_presets()
    name = str(doc.get("link_preset", "field"))
    if name not in presets:
        raise doc.error("link_preset", f"unknown preset {name!r}; available: {sorted(presets)}")
    radio = _radio(doc, "radio")

    devices = []
    for i, spec in enumerate(doc.get("devices")):
        key = f"devices[{i}]"
        pos = spec.get("position_m", [0, 0])
        radio_i = RadioConfig(radio.ldr, radio.hdr, int(spec.get("address", radio.address)))
        if "radio" in spec:
            radio_i = _radio(doc, f"{key}.radio", radio_i)
        devices.append(DeviceSpec(
            str(doc.get(f"{key}.id")),
            str(spec.get("role", "receiver")),
            (float(pos[0]), float(pos[1])),
            doc.number(f"{key}.voltage_v", Fraction(9, 5)),
            radio_i,
            float(doc.number(f"{key}.tx_power_dbm")) if "tx_power_dbm" in spec else None,
        ))
    ids = [d.id for d in devices]
    if len(set(ids)) != len(ids):
        raise doc.error("devices", f"duplicate device ids in {ids}")

    script = []
    for i, step in enumerate(doc.get("script", []) or []):
        key = f"script[{i}]"
        cmd = str(doc.get(f"{key}.command"))
        if cmd not in COMMANDS:
            raise doc.error(f"{key}.command", f"unknown command {cmd!r}; expected one of {COMMANDS}")
        dev = str(doc.get(f"{key}.device"))
        if dev not in ids:
            raise doc.error(f"{key}.device", f"no device {dev!r}")
        payload = step.get("payload", "")
        try:
            payload = bytes.fromhex(str(payload)) if payload else b""
        except ValueError:
            raise doc.error(f"{key}.payload", f"expected hex bytes, got {payload!r}") from None
        script.append(ScriptStep(
            doc.number(f"{key}.at_s"), dev, cmd,
            int(step["address"]) if "address" in step else None,
            payload,
            doc.number(f"{key}.voltage_v") if "voltage_v" in step else None,
        ))
    script.sort(key=lambda s: s.at)

    opts = doc.get("options", {}) or {}
    flip = opts.get("chip_flip_prob")
    return ScenarioConfig(
        seed=int(seed),
        horizon=doc.number("horizon_s"),
        link_preset=name,
        link=presets[name],
        radio=radio,
        devices=devices,
        script=script,
        strict_rates=bool(opts.get("strict_rates", True)),
        chip_flip_prob=None if flip is None else float(doc.number("options.chip_flip_prob")),
        threshold=float(opts.get("threshold", 0.8)),
        outputs={k: str(v) for k, v in (doc.get("outputs", {}) or {}).items()},
    )


def load_scenario(path=None) -> ScenarioConfig:
    doc = Document.load(path) if path is not None else load_data("field_test.yaml")
    return parse_scenario(doc)


def build(scn: ScenarioConfig, power: PowerModel | None = None, seed=None) -> Simulator:
    sim = Simulator(power or default_model(), scn.link, scn.seed if seed is None else seed,
                    strict_rates=scn.strict_rates, chip_flip_prob=scn.chip_flip_prob, threshold=scn.threshold)
    specs = {d.id: d for d in scn.devices}
    for d in scn.devices:
        sim.add_device(d.id, d.position, d.voltage, d.tx_power_dbm)
    for step in scn.script:
        spec = specs[step.device]
        if step.command == "SystemReset":
            sim.schedule(step.at, step.device, "timer", "reset request",
                         lambda now, dev=step.device: sim.system_reset(dev))
            continue
        if step.command == "SetupWuR":
            cmd = SetupWuR(spec.radio)
        elif step.command == "WhoAmI":
            cmd = WhoAmI()
        elif step.command == "IRQReason":
            cmd = IRQReason()
        else:
            if step.address is None:
                raise ConfigError(f"SendWuC at {float(step.at)} s needs an address")
            cmd = SendWuC(step.address, step.payload, step.voltage if step.voltage is not None else spec.voltage)
        sim.schedule_command(step.at, step.device, cmd)
    return sim


def run_scenario(scn: ScenarioConfig, power: PowerModel | None = None) -> Simulator:
    sim = build(scn, power)
    sim.run_until(scn.horizon)
    return sim


def _num(x) -> str:
    return repr(float(x))


def trace_csv(sim: Simulator) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in sim.trace:
        w.writerow((_num(row.time), row.device, row.event, row.detail))
    return buf.getvalue()


def ledger_csv(sim: Simulator, horizon: Fraction | None = None) -> str:
    horizon = sim.clock if horizon is None else horizon
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_COLUMNS)
    for dev_id in sorted(sim.devices):
        for r in sim.devices[dev_id].ledger.rows(horizon):
            w.writerow((r["device"], _num(r["start_s"]), _num(r["end_s"]), r["state"],
                        _num(r["power_w"]), _num(r["energy_j"])))
    return buf.getvalue()


def write_outputs(sim: Simulator, trace_path=None, ledger_path=None) -> None:
    if trace_path:
        Path(trace_path).write_text(trace_csv(sim))
    if ledger_path:
        Path(ledger_path).write_text(ledger_csv(sim))
