from .core import (
    BallView,
    EnvMeta,
    HorizonError,
    RootedEnvironment,
    ValidationError,
    ball,
    bfs_distances,
    distances,
    kernel_from_weights,
    validate,
    weights_from_edges,
)
from .generators import (
    gen_balanced,
    gen_kesten_tree,
    gen_lattice,
    gen_percolation,
    gen_random_conductance,
    gen_sierpinski,
    gen_torus,
    sierpinski_count,
    spine_offspring,
)
from .io import EnvironmentFormatError, deserialize, serialize

__all__ = [
    "BallView", "EnvMeta", "EnvironmentFormatError", "HorizonError", "RootedEnvironment",
    "ValidationError", "ball", "bfs_distances", "deserialize", "distances", "gen_balanced",
    "gen_kesten_tree", "gen_lattice", "gen_percolation", "gen_random_conductance",
    "gen_sierpinski", "gen_torus", "kernel_from_weights", "serialize", "sierpinski_count", "spine_offspring",
    "validate", "weights_from_edges",
]
