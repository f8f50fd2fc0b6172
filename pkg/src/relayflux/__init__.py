"""Near-field radiative heat flux between planar slabs, with and without a passive relay slab."""

__version__ = "0.1.0"

from .materials import (Drude, DrudeLorentz, NoRootError, Vacuum, get_model, matched_drude,
                        permittivity, surface_polariton_frequency)
from .quadrature import NonConvergenceError
from .scattering import (ModePoint, SingularDenominatorError, SlabResponse, dressed_reflection,
                         fresnel_interface, slab_response)
from .thermal import (balance_temperature, cutoff_wavevector, flux_limits, occupation,
                      thermal_conductance_quantum)
from .transport import (Numerics, SystemConfig, net_power_body2, refine_relay_temperature,
                        spectral_flux_three_slab, spectral_flux_two_slab, total_flux,
                        transmission_three_slab, transmission_two_slab)
