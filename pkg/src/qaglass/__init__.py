"""Ground-state inference for noisy triangular-ladder Ising models.

The package simulates recovering the ground state of a disordered ladder
Hamiltonian when only a noise-degraded copy of its couplings is known,
and provides the matching mean-field analysis for fully connected models.
A transverse field applied while solving the degraded model acts as a
tunable regularizer; the analysis locates the field strength that
maximizes the overlap with the true ground state.
"""

from .disorder import LadderInstance, generate_instance, load_instance, save_instance
from .ladder import (
    SpinConfiguration,
    brute_force_ground_state,
    classical_energy,
    viterbi_ground_state,
)

__version__ = "0.1.0"
