"""Heat kernels on weighted graphs: Dirichlet exhaustions, stochastic
completeness and Feller tests, curvature calculators and regular coverings."""
from heatgraph.covering import CoveringMap, cyclic_cover, line_over_cycle, product_cover
from heatgraph.exprlang import compile_expr, evaluate, parse, to_text
from heatgraph.graph import (
    BirthDeathChain,
    FiniteGraph,
    GraphOracle,
    birth_death,
    cycle,
    lattice,
    line,
    product,
    regular_tree,
)
from heatgraph.heat import capacity, green, heat_kernel, heat_mass, lambda0
from heatgraph.specfile import GraphSpec, SpecError

__all__ = [
    "BirthDeathChain",
    "CoveringMap",
    "FiniteGraph",
    "GraphOracle",
    "GraphSpec",
    "SpecError",
    "birth_death",
    "capacity",
    "compile_expr",
    "cycle",
    "cyclic_cover",
    "evaluate",
    "green",
    "heat_kernel",
    "heat_mass",
    "lambda0",
    "lattice",
    "line",
    "line_over_cycle",
    "parse",
    "product",
    "product_cover",
    "regular_tree",
    "to_text",
]
__version__ = "0.1.0"
