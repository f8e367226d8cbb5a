"""Single-excitation quantum transport in disordered dipolar spin networks.

Random planar spin configurations couple through the isotropic dipolar
power law; a local-dephasing Lindblad generator drives relaxation.  The
package computes trajectories, Liouvillian spectra, integrated
survival/transfer measures, trapping-based passage times, steady transport
fluxes with bond-current maps, and disorder-ensemble statistics, with
closed-form three-site oracles for verification.
"""

__version__ = "0.1.0"

from .geometry import (CouplingMatrix, CouplingStats, SpinConfiguration,
                       competing_pathway_configuration, coupling_matrix,
                       coupling_stats, dipolar_coupling, generate_configuration,
                       load_configuration, place_gateway, save_configuration,
                       tight_cluster_configuration, with_labels)
from .liouvillian import (Hamiltonian, LiouvillianOperator, LossChannel,
                          SpectralDecomposition, build_hamiltonian,
                          build_liouvillian, decompose, mode_site_weights)
from .dynamics import Trajectory, evolve, evolve_rk4, log_time_grid, plateau_report, site_state
from .measures import (MfptResult, TransferMatrix, absorbing_liouvillian,
                       gamma_grid, mfpt_with_trap, survival_curve,
                       transfer_matrix)
from .ness import (FluxSweep, NessProblem, NessResult, dominant_pathway,
                   find_flux_peaks, flux_sweep, probability_currents, solve_ness)
from .reference import (MinimalModelParams, analytic_eta, golden_rule_rate,
                        hierarchical_hamiltonian, homogeneous_hamiltonian,
                        regime_timescale, simulated_regime_time)
from .ensemble import (CampaignSpec, FitResult, bootstrap_median, fit_model,
                       run_gateway_campaign, run_scaling_campaign)

__all__ = [name for name in dir() if not name.startswith("_")]
