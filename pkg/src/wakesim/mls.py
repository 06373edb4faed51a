"""Maximum-length sequences and the OOK chip-level wake-up call codec.

A wake-up call goes on air as one MLS interval at the low data rate (the
preamble) followed by 16 address bits and an optional payload, each bit
spread into one MLS interval at the high data rate. A ``1`` bit is sent as
the code, a ``0`` bit as its complement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SUPPORTED_RATES = (256, 512, 1024, 2048, 4096, 8192, 16384, 32768)
ADDRESS_BITS = 16
MAX_PAYLOAD_BYTES = 6
DEFAULT_TAPS = frozenset({5, 3})
DEFAULT_THRESHOLD = 0.8


class MalformedFrameError(ValueError):
    """A preamble was found but the frame after it is truncated or mistimed."""


@dataclass(frozen=True)
class MlsCode:
    order: int
    taps: frozenset[int]
    chips: tuple[int, ...]

    @property
    def core(self) -> tuple[int, ...]:
        """The 2**order - 1 chips of one LFSR period, without the pad chip."""
        return self.chips[:-1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.chips, dtype=np.uint8)


def lfsr_sequence(order: int, taps: Sequence[int], length: int, seed: int | None = None) -> list[int]:
    """Run a Fibonacci LFSR and return ``length`` output bits.

    Stage ``order`` is the output; the feedback is the XOR of the tapped
    stages and enters stage 1. ``seed`` is the initial register (bit k-1
    holds stage k), all ones by default.
    """
    if seed is None:
        seed = (1 << order) - 1
    state = [(seed >> k) & 1 for k in range(order)]
    out = []
    for _ in range(length):
        out.append(state[order - 1])
        fb = 0
        for t in taps:
            fb ^= state[t - 1]
        state = [fb] + state[:-1]
    return out


def lfsr_period(order: int, taps: Sequence[int], seed: int | None = None) -> int:
    """Number of steps until the register state first repeats."""
    if seed is None:
        seed = (1 << order) - 1
    mask = (1 << order) - 1
    start = seed & mask
    state = start
    for step in range(1, 1 << order):
        fb = 0
        for t in taps:
            fb ^= (state >> (t - 1)) & 1
        state = ((state << 1) | fb) & mask
        if state == start:
            return step
    return 0


def generate_mls(order: int = 5, taps=DEFAULT_TAPS, seed: int | None = None) -> MlsCode:
    taps = frozenset(int(t) for t in taps)
    if order < 2 or not taps or max(taps) != order or min(taps) < 1:
        raise ValueError(f"taps {sorted(taps)} must lie in 1..{order} and include stage {order}")
    if seed is not None and not 0 < seed < (1 << order):
        raise ValueError(f"seed must be a nonzero {order}-bit value, got {seed}")
    period = lfsr_period(order, sorted(taps), seed)
    expected = (1 << order) - 1
    if period != expected:
        raise ValueError(
            f"taps {sorted(taps)} are not primitive for order {order}: "
            f"period {period}, expected {expected}"
        )
    core = lfsr_sequence(order, sorted(taps), expected, seed)
    # pad to a power of two so one logical bit is exactly 2**order chips
    return MlsCode(order, taps, tuple(core + core[:1]))


_DEFAULT_CODE = None


def default_code() -> MlsCode:
    global _DEFAULT_CODE
    if _DEFAULT_CODE is None:
        _DEFAULT_CODE = generate_mls(5, DEFAULT_TAPS)
    return _DEFAULT_CODE


@dataclass(frozen=True)
class RadioConfig:
    ldr: int = 1024
    hdr: int = 32768
    address: int = 0
    code: MlsCode = field(default_factory=default_code)

    def __post_init__(self):
        for name in ("ldr", "hdr"):
            if getattr(self, name) not in SUPPORTED_RATES:
                raise ValueError(f"{name}={getattr(self, name)} not in {SUPPORTED_RATES}")
        if self.hdr < self.ldr:
            raise ValueError(f"hdr ({self.hdr}) must be >= ldr ({self.ldr})")
        if not 0 <= self.address <= 0xFFFF:
            raise ValueError(f"address {self.address:#x} is not a 16-bit value")

    @property
    def chips_per_bit(self) -> int:
        return len(self.code.chips)


@dataclass(frozen=True)
class WucFrame:
    address: int
    payload: bytes = b""

    def __post_init__(self):
        if not 0 <= self.address <= 0xFFFF:
            raise ValueError(f"address {self.address:#x} is not a 16-bit value")
        object.__setattr__(self, "payload", bytes(self.payload))
        if len(self.payload) > MAX_PAYLOAD_BYTES:
            raise ValueError(f"payload is {len(self.payload)} bytes, at most {MAX_PAYLOAD_BYTES} allowed")

    @property
    def payload_bits(self) -> int:
        return 8 * len(self.payload)

    def bits(self) -> list[int]:
        """Address bits then payload bits, MSB first."""
        out = [(self.address >> (ADDRESS_BITS - 1 - k)) & 1 for k in range(ADDRESS_BITS)]
        for byte in self.payload:
            out.extend((byte >> (7 - k)) & 1 for k in range(8))
        return out


@dataclass(frozen=True, eq=False)
class ChipStream:
    """On-air OOK chips. Chip ``k`` is on when ``levels[k]`` is 1 and lasts ``1/rates[k]`` s."""

    levels: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.uint8)
        rates = np.asarray(self.rates, dtype=np.int64)
        if levels.shape != rates.shape or levels.ndim != 1:
            raise ValueError("levels and rates must be 1-D arrays of equal length")
        if np.any(rates <= 0):
            raise ValueError("every chip rate must be positive")
        if np.any(levels > 1):
            raise ValueError("chip levels must be 0 or 1")
        levels.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "rates", rates)

    def __len__(self) -> int:
        return len(self.levels)

    def __eq__(self, other):
        if not isinstance(other, ChipStream):
            return NotImplemented
        return np.array_equal(self.levels, other.levels) and np.array_equal(self.rates, other.rates)

    @property
    def chips(self) -> Iterator[tuple[int, Fraction]]:
        for level, rate in zip(self.levels.tolist(), self.rates.tolist()):
            yield level, Fraction(1, rate)

    @property
    def total_duration(self) -> Fraction:
        rates, counts = np.unique(self.rates, return_counts=True)
        return sum((Fraction(int(c), int(r)) for r, c in zip(rates, counts)), Fraction(0))

    def segments(self) -> list[tuple[int, int, int]]:
        """Runs of equal chip rate as ``(start, stop, rate)`` index ranges."""
        if len(self) == 0:
            return []
        edges = np.flatnonzero(np.diff(self.rates)) + 1
        starts = np.concatenate(([0], edges))
        stops = np.concatenate((edges, [len(self)]))
        return [(int(a), int(b), int(self.rates[a])) for a, b in zip(starts, stops)]


def airtime(cfg: RadioConfig, payload_bits: int = 0) -> Fraction:
    """Exact on-air duration of one wake-up call in seconds."""
    n = cfg.chips_per_bit
    return Fraction(n, cfg.ldr) + Fraction((ADDRESS_BITS + payload_bits) * n, cfg.hdr)


def encode_frame(frame: WucFrame, cfg: RadioConfig) -> ChipStream:
    code = cfg.code.as_array()
    comp = 1 - code
    bits = frame.bits()
    body = np.concatenate([code if b else comp for b in bits])
    levels = np.concatenate([code, body])
    rates = np.concatenate([
        np.full(len(code), cfg.ldr, dtype=np.int64),
        np.full(len(body), cfg.hdr, dtype=np.int64),
    ])
    return ChipStream(levels, rates)


def _agreement(windows: np.ndarray, code: np.ndarray) -> np.ndarray:
    """Fraction of chips in each window that match the code; 0.5 is chance."""
    return (windows == code).mean(axis=-1)


def find_preamble(stream: ChipStream, cfg: RadioConfig, threshold: float = DEFAULT_THRESHOLD) -> int | None:
    """Index of the first LDR-timed window whose agreement reaches ``threshold``."""
    n = cfg.chips_per_bit
    if len(stream) < n:
        return None
    code = cfg.code.as_array()
    on_rate = np.flatnonzero(sliding_window_view(stream.rates == cfg.ldr, n).all(axis=1))
    if not on_rate.size:
        return None
    windows = sliding_window_view(stream.levels, n)[on_rate]
    hits = on_rate[_agreement(windows, code) >= threshold]
    return int(hits[0]) if hits.size else None


def _decide_bits(levels: np.ndarray, code: np.ndarray) -> list[int]:
    blocks = levels.reshape(-1, len(code))
    return (_agreement(blocks, code) > 0.5).astype(int).tolist()


def decode_stream(stream: ChipStream, cfg: RadioConfig, threshold: float = DEFAULT_THRESHOLD) -> WucFrame | None:
    """Recover a frame from a chip stream, or ``None`` when no preamble is found.

    Raises :class:`MalformedFrameError` when a preamble is detected but the
    16 address bits at the high data rate do not follow it in full.
    """
    if not 0.5 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0.5, 1], got {threshold}")
    start = find_preamble(stream, cfg, threshold)
    if start is None:
        return None
    n = cfg.chips_per_bit
    code = cfg.code.as_array()
    pos = start + n
    addr_end = pos + ADDRESS_BITS * n
    if addr_end > len(stream) or np.any(stream.rates[pos:addr_end] != cfg.hdr):
        raise MalformedFrameError(
            f"preamble at chip {start} but only {len(stream) - pos} HDR chips follow, "
            f"{ADDRESS_BITS * n} needed for the address"
        )
    addr_bits = _decide_bits(stream.levels[pos:addr_end], code)
    address = int("".join(map(str, addr_bits)), 2)

    tail = stream.rates[addr_end:] != cfg.hdr
    run = int(np.argmax(tail)) if tail.any() else len(tail)
    n_bytes = min(run // (8 * n), MAX_PAYLOAD_BYTES)
    payload = b""
    if n_bytes:
        bits = _decide_bits(stream.levels[addr_end:addr_end + 8 * n * n_bytes], code)
        payload = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
    return WucFrame(address, payload)


def chip_flip_noise(stream: ChipStream, flip_prob: float, seed: int) -> ChipStream:
    if not 0 <= flip_prob <= 1:
        raise ValueError(f"flip_prob must lie in [0, 1], got {flip_prob}")
    rng = np.random.default_rng(seed)
    flips = rng.random(len(stream)) < flip_prob
    return ChipStream(stream.levels ^ flips.astype(np.uint8), stream.rates)


def longest_off_run(stream: ChipStream, below_rate: int | None = None) -> int:
    """Longest run of consecutive off chips, optionally counting only chips slower than ``below_rate``."""
    off = stream.levels == 0
    if below_rate is not None:
        off &= stream.rates < below_rate
    best = cur = 0
    for v in off.tolist():
        cur = cur + 1 if v else 0
        best = max(best, cur)
    return best


# Golden vectors: "# key: value" header lines then one chip per line.

def write_golden(path, frame: WucFrame, cfg: RadioConfig, stream: ChipStream | None = None) -> None:
    if stream is None:
        stream = encode_frame(frame, cfg)
    lines = [
        f"# ldr: {cfg.ldr}",
        f"# hdr: {cfg.hdr}",
        f"# taps: {','.join(str(t) for t in sorted(cfg.code.taps, reverse=True))}",
        f"# address: {frame.address:#06x}",
        f"# payload: {frame.payload.hex()}",
        f"# chips: {len(stream)}",
        f"# total_duration_s: {stream.total_duration}",
    ]
    lines.extend(str(int(c)) for c in stream.levels)
    Path(path).write_text("\n".join(lines) + "\n")


def read_golden(path) -> tuple[WucFrame, RadioConfig, ChipStream]:
    header = {}
    chips = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
        elif line in ("0", "1"):
            chips.append(int(line))
        else:
            raise ValueError(f"{path}:{lineno}: expected chip 0 or 1, got {line!r}")
    taps = [int(t) for t in header["taps"].split(",")]
    cfg = RadioConfig(int(header["ldr"]), int(header["hdr"]), code=generate_mls(max(taps), taps))
    frame = WucFrame(int(header["address"], 16), bytes.fromhex(header["payload"]))
    if int(header["chips"]) != len(chips):
        raise ValueError(f"{path}: header declares {header['chips']} chips, found {len(chips)}")
    n = cfg.chips_per_bit
    rates = [cfg.ldr] * n + [cfg.hdr] * (len(chips) - n)
    return frame, cfg, ChipStream(np.asarray(chips), np.asarray(rates))


__all__ = [
    "SUPPORTED_RATES", "MlsCode", "RadioConfig", "WucFrame", "ChipStream", "MalformedFrameError",
    "generate_mls", "default_code", "lfsr_sequence", "lfsr_period", "airtime", "encode_frame",
    "decode_stream", "find_preamble", "chip_flip_noise", "longest_off_run", "write_golden", "read_golden",
]
