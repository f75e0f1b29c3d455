"""Physical constants in the unit system used throughout the package."""

from scipy import constants as _sc

K_B_EV = _sc.k / _sc.e  # eV / K
E_CHARGE = _sc.e  # C
H_PLANCK = _sc.h
C_LIGHT = _sc.c

UM2_PER_CM2 = 1e8


def photon_energy_joule(energy_ev):
    return energy_ev * _sc.e
