"""Sediment concentration estimation by effective-medium waveform inversion.

Pipeline: random two-phase media from an inhomogeneous Poisson cloud
(:mod:`sedinv.medium`), time-domain acoustic forward modeling
(:mod:`sedinv.wavesim`), frequency-domain homogenization verification
(:mod:`sedinv.helmholtz`), L2 / quadratic-Wasserstein misfits
(:mod:`sedinv.misfit`), adjoint-state bounded quasi-Newton inversion
(:mod:`sedinv.inversion`) and concentration reporting (:mod:`sedinv.report`).
"""

from ._backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
