"""Pseudo-spectral solver and verification tools for the co-rotational
Q-tensor / Navier-Stokes system on a periodic box.

Modules
-------
tensor        pointwise algebra of symmetric traceless 3x3 tensors
potentials    bulk free energies and their hypothesis checks
spectral      periodic grid, transforms, differential operators, checkpoints
dynamics      right-hand sides and the integrating-factor Heun stepper
diagnostics   energy reports, balance residuals, monitors, decay fits
stationary    gradient flow to stationary states and Pohozaev functionals
bootstrap     scalar checks of the Fourier-splitting decay argument
cli_io        configuration, initial data, runs, checkpoints, command line
"""
__version__ = "0.1.0"
