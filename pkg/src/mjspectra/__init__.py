"""Classical and semiclassical tools for Maupertuis-Jacobi correspondent systems.

Submodules
----------
models        Hamiltonian symbols on T*T² and T*S² (Liouville, mechanical, Jacobi, water-wave, Katok)
flow          adaptive integration, orbit distances, Poincaré sections, return maps
action_angle  separated tori of Liouville metrics: actions, angles, frequencies, KAM filters
mj            time factor, averages and the conjugacy between correspondent flows
bsm           Bohr-Sommerfeld-Maslov eigenvalue lattices
oracle        Fourier-Galerkin spectra, gap statistics, Larmor operator
larmor        rational tori: fiber frequencies, Reeb structure, reduced ladders
katok         Katok-Randers metrics on the sphere
cli           ``mjspectra`` command-line pipelines
"""
__version__ = "0.1.0"

from .errors import ConfigError, MJSpectraError, NumericalFailure  # noqa: E402,F401
