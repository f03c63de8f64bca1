from .corrector import CorrectorEstimate, dyadic_radii, estimate_corrector
from .cover import BallCover, proper_cover
from .dirichlet import (
    DirichletError,
    HarmonicField,
    dirichlet_solve,
    dirichlet_solve_many,
    mean_value_residual,
)
from .gram import (
    GramProbeReport,
    LemmaB,
    ZeroMeanSubspace,
    ball_means,
    check_lemma_b,
    dirichlet_candidates,
    gram,
    gram_dimension_probe,
    hadamard_ratio,
    numerical_rank,
    zero_mean_subspace,
)
from .poincare import (
    DoublingReport,
    ReversePoincare,
    ball_mass,
    check_reverse_poincare,
    edge_energy,
    poincare_constant,
    poincare_pencil_dense,
    volume_doubling,
)
