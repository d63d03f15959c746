"""Phase-damped Jaynes-Cummings dynamics of a two-level atom moving through a
traveling wave in a homogeneous gravitational field.

The analytic super-operator solution (``evolve``/``observables``) and a
brute-force master-equation integrator (``oracle``) compute the same five
observable families -- population inversion, dipole squeezing, momentum
diffusion, photon statistics, quadrature squeezing -- and are compared
against each other in the regime where both solve the same equation.
"""

__version__ = "0.1.0"

from .config import (ConfigError, InitialState, MomentumGrid, NumericsParams,
                     PhysicalParams, build_momentum_grid, coherent_weights,
                     load_config, make_initial_state, resolved_config)
from .blockalg import (CoefficientSet, LadderScalars, block_spectrum,
                       coefficient_set, doppler_detuning, effective_coupling,
                       ladder_scalars)
from .evolve import (BlockElementsAtK, ElementTables, PsiAmplitudes,
                     block_elements, density_snapshot, evolve_grid,
                     psi_amplitudes, series_sum)
from .observables import (FieldMoments, ObservableSeries, build_series,
                          compute_series)
from .oracle import (DiscrepancyReport, build_hamiltonian, compare_observables,
                     integrate_master, lindblad_rhs, oracle_elements)
