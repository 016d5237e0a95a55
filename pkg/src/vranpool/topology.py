"""CPU pool layout: N physical CPUs exposed as 2N SMT virtual cores.

Virtual cores ``j`` and ``j + N`` live on the same physical CPU ``j``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np


class InvalidActionError(ValueError):
    """Raised for a core count outside ``1..2N``."""


@dataclass(frozen=True)
class ActivationVector:
    """Sorted tuple of active virtual-core indices."""

    cores: tuple[int, ...]

    def __post_init__(self):
        cores = tuple(int(c) for c in self.cores)
        if not cores:
            raise ValueError("activation vector must hold at least one core")
        if any(b <= a for a, b in zip(cores, cores[1:])):
            raise ValueError(f"cores must be strictly increasing, got {cores}")
        if cores[0] < 0:
            raise ValueError(f"negative core index in {cores}")
        object.__setattr__(self, "cores", cores)

    def __len__(self) -> int:
        return len(self.cores)

    def __iter__(self) -> Iterator[int]:
        return iter(self.cores)

    def __contains__(self, j: object) -> bool:
        return j in self.cores


@dataclass(frozen=True)
class GppTopology:
    n_physical: int

    def __post_init__(self):
        if self.n_physical < 1:
            raise ValueError("need at least one physical CPU")

    @property
    def n_virtual(self) -> int:
        return 2 * self.n_physical

    @property
    def actions(self) -> range:
        return range(1, self.n_virtual + 1)

    def check_core(self, j: int) -> None:
        if not 0 <= j < self.n_virtual:
            raise IndexError(f"virtual core {j} outside [0, {self.n_virtual})")

    def check_vector(self, v: ActivationVector) -> None:
        if v.cores[-1] >= self.n_virtual:
            raise ValueError(f"{v.cores} references cores beyond {self.n_virtual - 1}")

    def check_action(self, a: int) -> None:
        if not 1 <= a <= self.n_virtual:
            raise InvalidActionError(f"action {a} outside 1..{self.n_virtual}")

    def sibling(self, j: int) -> int:
        self.check_core(j)
        n = self.n_physical
        return j + n if j < n else j - n

    def physical_cpus_used(self, v: ActivationVector) -> int:
        self.check_vector(v)
        return len({j % self.n_physical for j in v})

    def rho(self, a: int) -> ActivationVector:
        """Cheapest activation vector with ``a`` cores.

        Physical CPUs are filled in index order, both siblings before the
        next CPU, which yields the lexicographically smallest vector among
        those touching the fewest physical CPUs.
        """
        self.check_action(a)
        n = self.n_physical
        cores = []
        for p in range(n):
            for j in (p, p + n):
                if len(cores) < a:
                    cores.append(j)
        return ActivationVector(tuple(sorted(cores)))

    def enumerate_activation_vectors(self, a: int) -> list[ActivationVector]:
        self.check_action(a)
        return [ActivationVector(c) for c in itertools.combinations(range(self.n_virtual), a)]

    def mask(self, v: ActivationVector) -> np.ndarray:
        self.check_vector(v)
        m = np.zeros(self.n_virtual, dtype=np.uint8)
        m[list(v.cores)] = 1
        return m

    def rho_masks(self) -> np.ndarray:
        """Row ``a - 1`` is the core mask of ``rho(a)``."""
        return np.stack([self.mask(self.rho(a)) for a in self.actions])
