"""Regenerate the chip-level golden vectors in tests/golden/."""
from pathlib import Path

from wakesim.mls import RadioConfig, WucFrame, write_golden

OUT = Path(__file__).resolve().parents[1] / "tests" / "golden"

CASES = {
    "ldr1024_hdr32768_beef": (WucFrame(0xBEEF), RadioConfig(1024, 32768)),
    "ldr32768_hdr32768_0000": (WucFrame(0x0000), RadioConfig(32768, 32768)),
    "ldr1024_hdr32768_ffff_payload6": (WucFrame(0xFFFF, bytes.fromhex("0102030405ff")), RadioConfig(1024, 32768)),
    "ldr2048_hdr8192_1234_payload1": (WucFrame(0x1234, b"\x00"), RadioConfig(2048, 8192)),
}


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, (frame, cfg) in CASES.items():
        write_golden(OUT / f"{name}.txt", frame, cfg)
        print(f"wrote {name}.txt")
