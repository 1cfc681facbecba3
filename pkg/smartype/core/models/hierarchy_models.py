"""
Type hierarchy of the knowledge base ontology.
"""

from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from smartype.core.exceptions import HierarchyError


@dataclass(frozen=True, eq=False)
class TypeHierarchy:
    """
    Child → parent graph (roots have parent None) with derived depths.
    Roots have depth 1; `height` is the maximum depth.
    """
    parents: Mapping[str, str | None]
    _depths: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        parents = dict(self.parents)
        for child, parent in parents.items():
            if parent is not None and parent not in parents:
                raise HierarchyError(f"Type '{child}' has parent '{parent}' which is not part of the hierarchy")
        object.__setattr__(self, "parents", MappingProxyType(parents))
        object.__setattr__(self, "_depths", MappingProxyType(self._compute_depths(parents)))

    @staticmethod
    def _compute_depths(parents: dict[str, str | None]) -> dict[str, int]:
        depths: dict[str, int] = {}
        for start in parents:
            chain = []
            on_chain = set()
            node = start
            while node is not None and node not in depths:
                if node in on_chain:
                    raise HierarchyError(f"Cycle in type hierarchy through '{node}'")
                on_chain.add(node)
                chain.append(node)
                node = parents[node]
            depth = 0 if node is None else depths[node]
            for member in reversed(chain):
                depth += 1
                depths[member] = depth
        return depths

    def __contains__(self, label: str) -> bool:
        return label in self.parents

    def __len__(self) -> int:
        return len(self.parents)

    @property
    def height(self) -> int:
        return max(self._depths.values(), default=0)

    def depth(self, label: str) -> int:
        return self._depths[label]

    def parent(self, label: str) -> str | None:
        return self.parents[label]

    def ancestors(self, label: str) -> list[str]:
        """Ancestors of a type, nearest first (the type itself excluded)."""
        chain = []
        node = self.parents[label]
        while node is not None:
            chain.append(node)
            node = self.parents[node]
        return chain

    def is_ancestor(self, ancestor: str, label: str) -> bool:
        return ancestor in self.ancestors(label)

    def distance(self, first: str, second: str) -> int | None:
        """Parent edges between two types on one ancestor path, None otherwise."""
        if first == second:
            return 0
        if first not in self or second not in self:
            return None
        deep, shallow = (first, second) if self.depth(first) >= self.depth(second) else (second, first)
        if self.is_ancestor(shallow, deep):
            return self.depth(deep) - self.depth(shallow)
        return None

    def depths(self) -> dict[str, int]:
        return dict(self._depths)
