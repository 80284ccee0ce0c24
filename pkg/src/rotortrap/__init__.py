"""Rotational dynamics of charged rigid bodies in quadrupole (Paul) traps.

Submodules
----------
model       trap drive, rigid body, spheroid presets
rotor1d     planar pendulum reduction, hysteresis sweeps, phase diagrams
floquet     monodromy / Floquet stability of periodic linear systems
rotor3d     full rigid-body dynamics, equilibria and secular frequencies
signal      synthetic detection signal and PSD regime signatures
nvspin      NV- ensemble spin model, continuous and stroboscopic ODMR
reconstruct line extraction and rotation-axis fits
cli         ``rotortrap`` command-line interface
"""
__version__ = "0.1.0"

from ._jit import USING_NUMBA  # noqa: E402,F401
