"""Covariant Hamiltonian field theory with symmetry: the charged SO(3)-strand."""

__version__ = "0.1.0"
