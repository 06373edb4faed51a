"""Print analytic and simulated costs of the two reference wake-up configurations."""
from fractions import Fraction

from wakesim.energy import default_model
from wakesim.mls import RadioConfig
from wakesim.sim import end_to_end_wakeup

CONFIGS = {"A": RadioConfig(1024, 32768), "B": RadioConfig(32768, 32768)}


def main():
    model = default_model()
    for name, cfg in CONFIGS.items():
        for volts in (Fraction(9, 5), Fraction(33, 10)):
            rep = model.transaction(cfg, 0, volts)
            sim = end_to_end_wakeup(1.0, cfg, voltage=volts, seed=0)
            assert sim.sender_energy == rep.sender_energy and sim.receiver_energy == rep.receiver_energy
            print(f"{name} {float(volts):.1f} V  sender {float(rep.sender_energy) * 1e6:9.3f} uJ "
                  f"{float(rep.sender_duration) * 1e3:8.4f} ms  receiver {float(rep.receiver_energy) * 1e6:7.3f} uJ "
                  f"{float(rep.receiver_duration) * 1e3:8.4f} ms")


if __name__ == "__main__":
    main()
