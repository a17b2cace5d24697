"""Magnetic Euler-Heisenberg and Pauli-Villars vacuum energies."""
