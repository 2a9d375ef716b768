from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidInstanceError(ValueError):
    """An instance, assignment or generator setting violates its contract."""


@dataclass
class CostFunction:
    """Cost table over an ordered scope.

    ``table`` is indexed by the values of the scope variables in scope order;
    its flattened (row-major) form is what the instance file stores.
    """

    scope: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        self.scope = tuple(int(v) for v in self.scope)
        self.table = np.asarray(self.table, dtype=np.float64)

    @property
    def arity(self) -> int:
        return len(self.scope)

    def cost_range(self) -> float:
        """Largest minus smallest entry of the table."""
        return float(self.table.max() - self.table.min())


@dataclass
class COPInstance:
    """Variables ``0..n-1`` with finite domains and a list of cost functions."""

    domains: list[int]
    functions: list[CostFunction] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domains = [int(d) for d in self.domains]
        self.functions = [
            f if isinstance(f, CostFunction) else CostFunction(*f) for f in self.functions
        ]
        self.validate()

    def validate(self) -> None:
        for i, d in enumerate(self.domains):
            if d < 1:
                raise InvalidInstanceError(f"variable {i}: domain size must be positive, got {d}")
        n = len(self.domains)
        for idx, f in enumerate(self.functions):
            if len(set(f.scope)) != len(f.scope):
                raise InvalidInstanceError(f"function {idx}: duplicate variable in scope {f.scope}")
            for v in f.scope:
                if not 0 <= v < n:
                    raise InvalidInstanceError(
                        f"function {idx}: scope references unknown variable {v} (instance has {n})"
                    )
            shape = tuple(self.domains[v] for v in f.scope)
            if f.table.shape != shape:
                if f.table.size != int(np.prod(shape, dtype=np.int64)):
                    raise InvalidInstanceError(
                        f"function {idx}: table has {f.table.size} entries, scope needs {int(np.prod(shape))}"
                    )
                f.table = f.table.reshape(shape)
            if not np.all(np.isfinite(f.table)):
                raise InvalidInstanceError(f"function {idx}: table contains non-finite costs")

    @property
    def variables(self) -> range:
        return range(len(self.domains))

    @property
    def num_variables(self) -> int:
        return len(self.domains)

    @property
    def num_functions(self) -> int:
        return len(self.functions)

    def search_space_size(self) -> int:
        return int(np.prod(self.domains, dtype=object)) if self.domains else 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, COPInstance):
            return NotImplemented
        return (
            self.domains == other.domains
            and len(self.functions) == len(other.functions)
            and all(
                a.scope == b.scope and np.array_equal(a.table, b.table)
                for a, b in zip(self.functions, other.functions)
            )
            and self.meta == other.meta
        )


def check_assignment(instance: COPInstance, assignment: Sequence[int]) -> np.ndarray:
    a = np.asarray(assignment)
    if a.ndim != 1 or len(a) != instance.num_variables:
        raise InvalidInstanceError(
            f"assignment covers {a.size} values but the instance has {instance.num_variables} variables"
        )
    if a.size and not np.issubdtype(a.dtype, np.integer):
        raise InvalidInstanceError("assignment values must be integer indices")
    for i, (value, d) in enumerate(zip(a, instance.domains)):
        if not 0 <= value < d:
            raise InvalidInstanceError(f"variable {i}: value index {value} outside domain of size {d}")
    return a.astype(np.intp)


def total_cost(instance: COPInstance, assignment: Sequence[int]) -> float:
    """Sum of every function's cost at the projection of ``assignment``."""
    a = check_assignment(instance, assignment)
    cost = 0.0
    for f in instance.functions:
        cost += float(f.table[tuple(a[list(f.scope)])])
    return cost


def split_scfg(instance: COPInstance, rho: float) -> COPInstance:
    """Replace every function ``f`` by the pair ``rho*f`` and ``(1-rho)*f``.

    The copies of function ``l`` sit at indices ``2l`` and ``2l+1``.
    """
    if not 0.0 < rho < 1.0:
        raise InvalidInstanceError(f"splitting ratio must lie in (0, 1), got {rho}")
    functions = []
    for f in instance.functions:
        functions.append(CostFunction(f.scope, rho * f.table))
        functions.append(CostFunction(f.scope, (1.0 - rho) * f.table))
    meta = dict(instance.meta)
    meta["split_ratio"] = rho
    meta["original_num_functions"] = instance.num_functions
    return COPInstance(list(instance.domains), functions, meta)
