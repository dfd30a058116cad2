"""Equation-free coarse-grained analysis of stochastic majority-rule
neuronal dynamics on Erdos-Renyi networks: bifurcation diagrams, stability
via leading eigenvalues, and rare-event escape times, all computed from
short bursts of the microscopic simulator used as a black box."""

from .coarse import (CoarseState, CoarseTimestepper, DegreeLayout,
                     EnsembleSpec, FixedNetwork, RegeneratedNetworks,
                     coarse_timestepper, layout_from_network, lift,
                     poisson_layout, restrict)
from .continuation import (Branch, BranchPoint, CorrectorTols,
                           NewtonConvergenceError, classify_stability,
                           detect_bifurcations, fd_jacobian_vector,
                           newton_corrector, solve_fixed_point, trace_branch)
from .graph import (Network, clustering_coefficient, degree_histogram,
                    generate_er, mean_path_length)
from .krylov import (KrylovResult, LinearOperator, arnoldi, gmres,
                     leading_eigenvalues)
from .meanfield import MfParams, mf_bifurcation_diagram, mf_fixed_points, mf_map
from .micro import SimParams, active_neighbor_count, run, step, total_density
from .rare import (FokkerPlanckProfile, ReactionFrame, embed,
                   estimate_drift_diffusion, free_energy, mean_escape_time,
                   noise_gaussianity, reaction_coordinate)

__version__ = "0.1.0"
