"""Heterogeneous Helmholtz workbench.

Reference FDFD solvers (1D tridiagonal, 2D banded with PML), spectral GRF
sound-speed maps, a from-scratch conditional diffusion surrogate with
DDPM/DDIM/SDE samplers, error metrics, and coefficient-space sensitivity
studies, orchestrated by the ``helmdl`` command-line tool.
"""

__version__ = "0.1.0"
