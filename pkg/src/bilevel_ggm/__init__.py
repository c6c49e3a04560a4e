"""Joint estimation of group- and individual-level Gaussian graphical models
under a random covariance model."""
from .errors import *  # noqa: F401,F403
from .glasso import GlassoOptions, SolveReport, glasso_fit, glasso_kkt, glasso_objective
from .linalg import (SubjectData, kl_penalty, l1_offdiag, log_det_pd,
                     sample_covariance, soft_threshold)
from .metrics import (EdgeConfusion, edge_confusion, estimation_error,
                      majority_vote_group, mean_adjacency)
from .rcm import (LambdaTriple, RcmFit, RcmOptions, bic1, bic2,
                  degrees_of_freedom, rcm_fit, rcm_kkt, rcm_objective)
from .simgen import (EdgeSet, SimScenario, SimTruth, edges_from_precision,
                     generate_group_graph, generate_precision, generate_scenario,
                     perturb_edges)
from .sparsecov import SparseCovOptions, sparsecov_fit, sparsecov_kkt, sparsecov_objective
from .tuning import LambdaGrid, TuneEntry, TuneResult, default_grid, tune

__version__ = "0.1.0"
