"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test carries a ``criterion`` mark; conftest prints one PASS/FAIL line
per criterion at the end of the run.
"""
import time
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from test_mls import PRIMITIVE, brute_period, cyclic_autocorr
from test_sim import assert_tiles, run_random, scenarios
from wakesim.cli import main, pdr_sweep
from wakesim.energy import default_model
from wakesim.lifetime import lifetime, load_battery, load_profile
from wakesim.link import margin, pdr, preset, rssi
from wakesim.mls import (
    SUPPORTED_RATES, MalformedFrameError, RadioConfig, WucFrame, chip_flip_noise, decode_stream, default_code,
    encode_frame, find_preamble, generate_mls,
)
from wakesim.scenario import load_scenario, run_scenario, trace_csv
from wakesim.sim import end_to_end_wakeup

mJ, uJ, ms = F(1, 10**3), F(1, 10**6), F(1, 10**3)


def crit(n, title):
    return pytest.mark.criterion(n, title)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# -- 1 -------------------------------------------------------------------

@crit(1, "airtime 46.875 ms with 31.25 ms preamble at 1024/32768, exact")
def test_c1_airtime(note):
    cfg = RadioConfig(1024, 32768)
    s = encode_frame(WucFrame(0xBEEF), cfg)
    durations = [d for _, d in s.chips]
    assert sum(durations[:32], F(0)) == F(3125, 10**5)
    assert s.total_duration == F(46875, 10**6)
    note(f"{float(s.total_duration) * 1e3} ms")


# -- 2 -------------------------------------------------------------------

REFERENCE = {
    # config: (sender energy, sender duration, receiver energy, receiver duration)
    "A": (RadioConfig(1024, 32768), F("1.33") * mJ, F("72.58") * ms, F("17.75") * uJ, F("54.28") * ms),
    "B": (RadioConfig(32768, 32768), F("539.12") * uJ, F("42.3") * ms, F("17.64") * uJ, F("24.00") * ms),
}


@crit(2, "transaction reproduction within 0.5%, analytic == simulated within 1 ppm")
@pytest.mark.parametrize("name", sorted(REFERENCE))
def test_c2_transactions(name, note):
    cfg, se, sd, re_, rd = REFERENCE[name]
    with Timer() as t:
        rep = default_model().transaction(cfg)
        sim = end_to_end_wakeup(1.0, cfg, seed=0)
    got = (rep.sender_energy, rep.sender_duration, rep.receiver_energy, rep.receiver_duration)
    for value, target in zip(got, (se, sd, re_, rd)):
        assert abs(value - target) <= F(5, 1000) * target
    simulated = (sim.sender_energy, sim.sender_duration, sim.receiver_energy, sim.receiver_duration)
    for a, s in zip(got, simulated):
        assert abs(a - s) <= F(1, 10**6) * a
    assert sim.latency == rep.receiver_duration
    assert t.elapsed < 1.0
    note(f"{name}: {float(rep.sender_energy) * 1e3:.5f} mJ/{float(rep.sender_duration) * 1e3:.4f} ms, "
         f"{float(rep.receiver_energy) * 1e6:.4f} uJ/{float(rep.receiver_duration) * 1e3:.4f} ms")


# -- 3 -------------------------------------------------------------------

TABLE_VALUES = {
    "idle_listening": [("1024", "6.88"), ("2048", "10.08"), ("4096", "16.54"), ("8192", "29.41"),
                       ("16384", "55.01"), ("32768", "105.88")],
    "tx": [("1.8", "2.78", "26.08"), ("2.0", "4.98", "34.46"), ("2.5", "8.32", "58.68"),
           ("2.75", "9.31", "73.04"), ("3.0", "10.10", "88.44"), ("3.3", "10.92", "108.54")],
    "aux_operations": [("WhoAmI", "26.59", "15.9"), ("SetupWuR", "1.14", "564.2"),
                       ("SendWuC_overhead", "106.15", "25.7"), ("IRQReason", "57.54", "18.9"),
                       ("IRQ_no_payload", "15.88", "7.4"), ("IRQ_payload6", "46.64", "19.6")],
}


@crit(3, "tables command prints every table value exactly as loaded")
def test_c3_tables(capsys, note):
    assert main(["tables"]) == 0
    out = capsys.readouterr().out
    model = default_model()
    raw = model.source_text
    count = 0
    for i, (rate, uw) in enumerate(TABLE_VALUES["idle_listening"]):
        assert (raw[f"idle_listening[{i}].rate_bps"], raw[f"idle_listening[{i}].power_uw"]) == (rate, uw)
        assert f"{rate} bit/s, {uw} µW" in out
        assert model.idle_power(int(rate)) == F(uw) * uJ
        count += 1
    for i, (v, dbm, mw) in enumerate(TABLE_VALUES["tx"]):
        assert f"{v} V, {dbm} dBm, {mw} mW" in out
        assert model.tx_operating_point(F(v)) == (F(dbm), F(mw) * mJ)
        count += 2
    for name, e, d in TABLE_VALUES["aux_operations"]:
        unit = "mJ" if name == "SetupWuR" else "µJ"
        assert f"{name}, {e} {unit}, {d} ms" in out
        op = model.aux_cost(name)
        assert (op.energy, op.duration) == (F(e) * (mJ if unit == "mJ" else uJ), F(d) * ms)
        count += 1
    note(f"{count} values checked")


# -- 4 -------------------------------------------------------------------

@crit(4, "modelled RSSI at 100 m within 0.5 dB of -72.62 dBm")
def test_c4_rssi(note):
    p = preset("field")
    assert (p.carrier_freq_mhz, p.tx_antenna_gain_dbi, p.rx_antenna_gain_dbi, p.path_loss_exponent) == (868.35, -2.1, -2.1, 2.0)
    r = rssi(100.0, 2.8, p)
    assert abs(r - (-72.62)) <= 0.5
    note(f"{r:.4f} dBm")


# -- 5 -------------------------------------------------------------------

@crit(5, "PDR >= 0.94 up to 100 m, 0.11 +/- 0.01 at 130 m over 1e4 trials, none at 150 m")
def test_c5_pdr(note):
    scn = load_scenario()
    tx = scn.device("sender").tx_power_dbm
    with Timer() as t:
        for d in np.linspace(1.1, 100.0, 200):
            assert pdr(margin(d, tx, scn.link), scn.link, d) >= 0.94 - 1e-12
        rows = pdr_sweep(scn, [130.0, 150.0], 10_000, scn.seed)
    at130, at150 = rows[0]["pdr_empirical"], rows[1]["pdr_empirical"]
    assert abs(at130 - 0.11) <= 0.01
    assert at150 == 0
    assert t.elapsed < 10
    note(f"130 m: {at130:.4f}; 150 m: {at150}; {t.elapsed:.1f} s")


# -- 6 -------------------------------------------------------------------

@crit(6, "lifetime projections for 0.1 Hz, hourly, daily and never")
@pytest.mark.parametrize("label,rate,lo,hi,unit", [
    ("0.1 Hz", 0.1, 2.0, 2.2, "days"),
    ("hourly", 1 / 3600, 1.6, 1.8, "years"),
    ("daily", 1 / 86400, 7.6, 8.4, "years"),
    ("never", 0.0, 9.5 * 0.98, 9.5 * 1.02, "years"),
])
def test_c6_lifetime(label, rate, lo, hi, unit, note):
    rep = lifetime(load_battery("CR2032"), load_profile("eink_tag").with_rate(rate))
    value = rep.days if unit == "days" else rep.years
    assert lo <= value <= hi
    note(f"{label} {value:.3f} {unit}")


# -- 7 -------------------------------------------------------------------

@crit(7, "property suites: roundtrip, MLS, ledger, determinism")
def test_c7_roundtrip_ten_thousand(note):
    seen = []

    @settings(max_examples=10_000, deadline=None, database=None)
    @given(st.builds(WucFrame, st.integers(0, 0xFFFF), st.binary(max_size=6)),
           st.tuples(st.sampled_from(SUPPORTED_RATES), st.sampled_from(SUPPORTED_RATES)).map(sorted),
           st.floats(0.51, 1.0))
    def roundtrip(frame, rates, threshold):
        cfg = RadioConfig(*rates)
        assert decode_stream(encode_frame(frame, cfg), cfg, threshold) == frame
        seen.append(1)

    with Timer() as t:
        roundtrip()
    assert len(seen) >= 10_000
    assert t.elapsed < 25  # leaves room for the other parts of the 30 s budget
    note(f"{len(seen)} roundtrips in {t.elapsed:.1f} s")


@crit(7, "property suites: roundtrip, MLS, ledger, determinism")
def test_c7_mls_all_primitive():
    assert len(PRIMITIVE) == 6
    for taps in PRIMITIVE:
        code = generate_mls(5, taps)
        assert brute_period(sorted(taps)) == 31
        assert sum(code.core) == 16
        ac = cyclic_autocorr(code.core)
        assert ac[0] == 31 and set(ac[1:]) == {-1}


@crit(7, "property suites: roundtrip, MLS, ledger, determinism")
@settings(max_examples=100, deadline=None)
@given(scenarios())
def test_c7_ledger(scn):
    sim, horizon = run_random(*scn)
    for dev in sim.devices.values():
        assert_tiles(dev.ledger, horizon)
        ivs = dev.ledger.closed_at(horizon)
        assert dev.ledger.total_energy(horizon) == sum(iv.energy for iv in ivs)
        mid = horizon / 2
        assert dev.ledger.total_energy(mid) + sum(
            iv.power * (iv.end - max(iv.start, mid)) for iv in ivs if iv.end > mid) == dev.ledger.total_energy(horizon)


@crit(7, "property suites: roundtrip, MLS, ledger, determinism")
def test_c7_determinism():
    scn = load_scenario()
    assert trace_csv(run_scenario(scn)) == trace_csv(run_scenario(scn))
    outs = [[end_to_end_wakeup(120, RadioConfig(1024, 32768), seed=(3, k)).delivered for k in range(200)]
            for _ in range(2)]
    assert outs[0] == outs[1]


# -- 8 -------------------------------------------------------------------

def ml_templates(code):
    """Packed chip sequences for all 65536 addresses: bit 1 sends the code, bit 0 its complement."""
    c = np.asarray(code, dtype=np.uint8)
    per_bit = np.stack([1 - c, c])  # row = bit value
    addrs = np.arange(1 << 16, dtype=np.uint32)
    bits = (addrs[:, None] >> np.arange(15, -1, -1, dtype=np.uint32)) & 1
    chips = per_bit[bits].reshape(1 << 16, 16 * len(c))
    return np.packbits(chips, axis=1).view(np.uint64)


@crit(8, "decoder matches exhaustive ML address decisions on >= 95% of 1000 noisy frames")
def test_c8_ml_oracle(note):
    cfg = RadioConfig(1024, 32768)
    code = default_code().chips
    templates = ml_templates(code)
    rng = np.random.default_rng(8)
    matches = 0
    ties = 0
    with Timer() as t:
        for k in range(1000):
            addr = int(rng.integers(1 << 16))
            noisy = chip_flip_noise(encode_frame(WucFrame(addr), cfg), 0.10, 8000 + k)
            body = np.asarray(noisy.levels[32:32 + 16 * 32], dtype=np.uint8)
            received = np.packbits(body).view(np.uint64)
            dist = np.bitwise_count(templates ^ received).sum(axis=1)
            best = np.flatnonzero(dist == dist.min())
            ties += len(best) > 1
            try:
                frame = decode_stream(noisy, cfg, 0.7)
            except MalformedFrameError:
                frame = None
            # the correlator must also lock onto the true preamble position
            if frame is not None and find_preamble(noisy, cfg, 0.7) == 0 and frame.address in best:
                matches += 1
    rate = matches / 1000
    assert rate >= 0.95
    assert t.elapsed < 60
    note(f"{matches}/1000 match, {ties} ML ties, {t.elapsed:.1f} s")
