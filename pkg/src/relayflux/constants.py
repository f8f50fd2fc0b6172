"""Physical constants (CODATA 2018 exact values, SI units)."""

HBAR = 1.054571817e-34  # reduced Planck constant [J s]
K_B = 1.380649e-23  # Boltzmann constant [J/K]
C0 = 2.99792458e8  # speed of light in vacuum [m/s]
H_PLANCK = 6.62607015e-34  # Planck constant [J s]


def as_dict():
    return {"hbar": HBAR, "k_B": K_B, "c": C0}
