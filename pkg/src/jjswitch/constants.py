"""Physical constants (2019 SI exact values and quantities derived from them).

All derived constants are computed from the exact defining constants rather
than quoted as rounded literals, so algebraic identities between them (e.g.
R_Q * 4e^2 = h) hold to floating-point precision.
"""

import math

# Exact SI defining constants
H_PLANCK = 6.62607015e-34      # Planck constant, J s
E_CHARGE = 1.602176634e-19     # elementary charge, C
K_BOLTZMANN = 1.380649e-23     # Boltzmann constant, J/K

# Derived
HBAR = H_PLANCK / (2.0 * math.pi)          # reduced Planck constant, J s
PHI0 = H_PLANCK / (2.0 * E_CHARGE)         # superconducting flux quantum, Wb
R_QUANTUM = H_PLANCK / (4.0 * E_CHARGE**2)  # h/4e^2, resistance quantum, Ohm (~6.45 kOhm)
