"""Symplectic autoencoders and structure-preserving linear reduction for Hamiltonian systems."""

from .autoencoder import SymplecticAutoencoder, SymplecticAutoencoderNetwork
from .hamiltonian import HamiltonianSystem, LinearWaveFOM, OscillatorFOM, PhaseVector
from .integrators import IntegratorConfig, SnapshotMatrix, Trajectory, integrate
from .linear import POD, PSD

__version__ = "0.1.0"

__all__ = [
    "SymplecticAutoencoder",
    "SymplecticAutoencoderNetwork",
    "HamiltonianSystem",
    "LinearWaveFOM",
    "OscillatorFOM",
    "PhaseVector",
    "IntegratorConfig",
    "SnapshotMatrix",
    "Trajectory",
    "integrate",
    "POD",
    "PSD",
]
