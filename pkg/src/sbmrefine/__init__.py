"""Community detection in stochastic block models: regularized spectral
initialization followed by penalized neighbor-voting refinement."""

from .graph import (Graph, GraphError, LabelError, average_degree, build_graph, degrees,
                    largest_connected_component, subgraph_excluding)
from .greedy import DegenerateClusteringWarning, GreedyConfig, greedy_cluster
from .metrics import best_permutation, confusion_matrix, loss, loss_unpermuted, misclassified_count
from .refine import (DegeneratePenaltyError, EstimationError, PenaltyMode, RefineOptions,
                     brute_force_mle, consensus_align, estimate_connectivity,
                     iterate_refinement, penalized_vote, penalty_params, penalty_rho,
                     penalty_t, refine_full, refine_simplified)
from .sbm import (GeneralSbmParams, ParameterError, PlantedPartitionParams,
                  condition_diagnostics, minimax_rate, population_lambda_k, population_matrix,
                  renyi_divergence, sample_general_sbm, sample_planted_partition,
                  verify_theta0_membership)
from .spectral import (SpectralInitializer, TauPolicy, leading_eigenvectors, nsc,
                       regularized_laplacian, spectral_embedding, trim, usc)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
