"""COP instances, factor graphs, benchmark generators and the instance file format."""

from .generators import (
    FAMILIES,
    GeneratorConfig,
    gen_random_cop,
    gen_scale_free,
    gen_small_world,
    gen_wgcp,
    generate,
)
from .graph import FactorGraph, FunctionGroup, build_factor_graph
from .instance import (
    COPInstance,
    CostFunction,
    InvalidInstanceError,
    check_assignment,
    split_scfg,
    total_cost,
)
from .io import (
    InstanceFormatError,
    deserialize,
    load_instance,
    save_instance,
    serialize,
    serialize_bytes,
)

__all__ = [
    "COPInstance",
    "CostFunction",
    "FAMILIES",
    "FactorGraph",
    "FunctionGroup",
    "GeneratorConfig",
    "InstanceFormatError",
    "InvalidInstanceError",
    "build_factor_graph",
    "check_assignment",
    "deserialize",
    "gen_random_cop",
    "gen_scale_free",
    "gen_small_world",
    "gen_wgcp",
    "generate",
    "load_instance",
    "save_instance",
    "serialize",
    "serialize_bytes",
    "split_scfg",
    "total_cost",
]
