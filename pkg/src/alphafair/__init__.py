"""Weighted alpha-fair allocation: lower bounds and a distributed ADMM solver."""
from .bounds import (BoundComparison, BoundKind, BoundVector, compare_bounds, local_midpoint,
                     soa_bound, theorem_bound, utopia)
from .fdadmm import (DomainPartition, SolveResult, SolverConfig, Trace, domain_step,
                     make_partition, master_step, partition, residuals, solve)
from .instance import (GeneratorConfig, Instance, InstanceError, Link, Request, build_instance,
                       generate_instance, load_instance, save_instance)
from .oracle import (KktReport, check_restriction_lemma, restricted_problem, solve_reference,
                     verify_kkt, waterfill_single_link)
from .subproblem import (PenaltyParams, RbConfig, penalty_from_bound, project_capped_simplex,
                         prox_fair, residual_balance)

__version__ = "0.1.0"
