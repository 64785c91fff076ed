"""Quantum power method simulator."""
