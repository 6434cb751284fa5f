from .cost import DIRECTIONS, CostMatrix, build_cost_matrix, direction_costs, neighbor_cost, tiling_cost
from .counting import (
    SizeLimitError,
    count_tilings_exact,
    count_tilings_formula,
    count_tilings_resultant,
    count_tilings_transfer,
    enumerate_tilings,
)
from .domino import domino_tiling, pixel_domino_pair
from .fills import FILLS, fill_avg_neighbor, fill_best_neighbor, fill_random_neighbor
from .grid import Crop, Parity, Tiling, checkerboard_downsample, crop, pad_to_even, render_tiling, verify_tiling
from .lap import InfeasibleError, assignment_cost, solve_lap

__all__ = [
    "DIRECTIONS",
    "CostMatrix",
    "Crop",
    "InfeasibleError",
    "Parity",
    "SizeLimitError",
    "Tiling",
    "assignment_cost",
    "build_cost_matrix",
    "checkerboard_downsample",
    "count_tilings_exact",
    "count_tilings_formula",
    "count_tilings_resultant",
    "count_tilings_transfer",
    "crop",
    "direction_costs",
    "domino_tiling",
    "enumerate_tilings",
    "fill_avg_neighbor",
    "fill_best_neighbor",
    "fill_random_neighbor",
    "FILLS",
    "neighbor_cost",
    "pad_to_even",
    "pixel_domino_pair",
    "render_tiling",
    "solve_lap",
    "tiling_cost",
    "verify_tiling",
]
