"""mmsflow: proximal (minimizing-movement) time stepping of neural
least-squares energies, with a Gauss-Newton/Levenberg-Marquardt inner
solver, first-order baselines, exact reference trajectories, and a
diagnostics layer that computes and certifies the convergence constants
of the scheme."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
