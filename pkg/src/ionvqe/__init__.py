"""Variational quantum eigensolver toolkit for trapped-ion gate sets."""
from .ansatz import AnsatzEntry, AnsatzSpec, ExcitationOperator
from .circuit import Circuit, Gate
from .fermion import FermionSum, bravyi_kitaev, jordan_wigner
from .kernels import BACKEND
from .pauli import PauliString, PauliSum

__version__ = "0.1.0"

__all__ = [
    "AnsatzEntry",
    "AnsatzSpec",
    "BACKEND",
    "Circuit",
    "ExcitationOperator",
    "FermionSum",
    "Gate",
    "PauliString",
    "PauliSum",
    "bravyi_kitaev",
    "jordan_wigner",
]
