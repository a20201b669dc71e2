"""Wavefront propagation on 2-D grids.

Grayscale morphological reconstruction, Euclidean distance transforms and a
tile-based parallel execution pipeline, all built on one generic
propagation engine: grid cells carry values, a queue carries the active
front, and a rule decides when a cell improves its neighbor.
"""

from .grid import (
    BG,
    FG,
    Coord,
    Image2D,
    StructuringElement,
    axis_half_neighbors,
    half_neighbors,
    neighbors,
)
from .errors import (
    ContractViolation,
    EngineError,
    GridwaveError,
    NoBackgroundError,
    PgmFormatError,
)
from .engine import EngineConfig, PropagationRule, RunStats
from .wqueue import QueueConfig, QueueStrategy
from .recon import (
    ReconInput,
    recon_fh,
    recon_parallel,
    recon_qb,
    recon_sr,
    recon_tiled,
    regional_maxima,
)
from .edt import (
    VoronoiMap,
    edt,
    edt_exact_bruteforce,
    edt_init,
    edt_tiled,
    finalize_distance_map,
)
from .tiles import MicroConfig, PipelineConfig, TileGrid, partition, run_pipeline
from .bench import BenchReport, run_experiment, to_csv, to_json
from .verify import SuiteResult, run_suites

__all__ = [
    "BG",
    "FG",
    "Coord",
    "Image2D",
    "StructuringElement",
    "axis_half_neighbors",
    "half_neighbors",
    "neighbors",
    "ContractViolation",
    "EngineError",
    "GridwaveError",
    "NoBackgroundError",
    "PgmFormatError",
    "EngineConfig",
    "PropagationRule",
    "RunStats",
    "QueueConfig",
    "QueueStrategy",
    "ReconInput",
    "recon_fh",
    "recon_parallel",
    "recon_qb",
    "recon_sr",
    "recon_tiled",
    "regional_maxima",
    "VoronoiMap",
    "edt",
    "edt_exact_bruteforce",
    "edt_init",
    "edt_tiled",
    "finalize_distance_map",
    "MicroConfig",
    "PipelineConfig",
    "TileGrid",
    "partition",
    "run_pipeline",
    "BenchReport",
    "run_experiment",
    "to_csv",
    "to_json",
    "SuiteResult",
    "run_suites",
]

__version__ = "0.1.0"
