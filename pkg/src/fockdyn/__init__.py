"""Exact diagonalization of multi-species fermion lattice models: quench
dynamics, reversal with local perturbations, erasure sequences and echoes."""

__version__ = "0.1.0"
