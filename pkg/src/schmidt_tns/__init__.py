"""Schmidt tensor network states for frustrated spin lattices.

A state is kept in Schmidt form ``sum_r lambda_r U|r> (x) V|r>`` with two
circuits of orthogonal tensors and a nonnegative matrix product state of
Schmidt coefficients. The package provides the lattice models, the ansatz,
network contraction of local energies (finite and infinite), gradient
training, exact diagonalization, perfect sampling of Schmidt bitstrings,
checkpoints and a batch command line (``python -m schmidt_tns``).
"""

__version__ = "0.1.0"

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .contraction import (
    ConvergenceError,
    EnergyPlan,
    EnergyReport,
    Environment,
    energy,
    expectation,
    fixed_point,
    infinite_energy,
)
from .exact import (
    GroundState,
    SchmidtSpectrum,
    ed_ground_state,
    entanglement_entropy,
    mps_entanglement,
    schmidt_decompose,
    top_k_schmidt,
)
from .lattice import Bipartition, Hamiltonian, Lattice, build_hamiltonian, build_zpaf, load_lattice, zpaf_fragment
from .optimizer import (
    TrainConfig,
    TrainTrace,
    TrainingDiverged,
    compute_gradients,
    step,
    train,
    train_depth_series,
)
from .sampler import SampleBatch, SampleReport, sample, validate
from .schmidt_state import (
    Architecture,
    MpsLambda,
    SchmidtTNS,
    deepen,
    init_state,
    make_architecture,
    materialize,
    spin_flip,
)
from .tensor_core import Parameter, Tensor
