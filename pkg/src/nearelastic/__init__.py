"""Simulation of nearly-elastic mechanical systems.

Event-driven dynamics of a particle losing a small fraction of its speed
at every wall collision, the averaged slow motion of its energy on the
Reeb graph of the level sets, stochastic regularizations of the
branching at saddle energies, and a planar convex billiard analogue.
"""

from .billiard2d import (BilliardPath, ConvexDomain, billiard_map,
                         check_integral_geometry, chord_length,
                         jacobian_identity_defect, reflected_diffusion_step,
                         section_chain_step, simulate_billiard)
from .harness import ExperimentConfig, ks_distance, run_experiment, \
    write_results
from .limitproc import (EdgeFlow, GraphPath, branching_probability,
                        hitting_time, path_distance, path_distance_sup,
                        sample_limit_path)
from .model1d import (FlatModelSpec, GraphEdge, GraphPoint, GraphVertex,
                      ModelError, PhasePoint, PotentialSpec, ReebGraph,
                      build_graph, make_potential, period, project)
from .regularize import (BranchingResult, aligned_eps, bump_sampler,
                         final_well_deterministic, sensitive_three_well,
                         simulate_with_dyn_noise, simulate_with_init_noise,
                         strip_boundaries, strip_ratio, wilson_interval)
from .rngs import path_key, replica_blocks, substream
from .sim1d import (CollisionLog, CollisionRecord, SimResult, SimulationError,
                    SlowPath, max_energy_jump, piecewise_linear_energy,
                    simulate_flat, simulate_potential)
from .walk import (ParityResult, log_loss_sampler, parity_probability_numeric,
                   stopping_parity, uniform_sampler)

__version__ = "0.1.0"
