"""
Ontology type hierarchy: loading, path tests and the lenient linear-decay gain.
"""

import logging
from collections.abc import Iterable
from pathlib import Path

from smartype.core.exceptions import HierarchyError
from smartype.core.models.hierarchy_models import TypeHierarchy

logger = logging.getLogger(__name__)

ROOT_TOKEN = "ROOT"


def load_hierarchy(path: str | Path) -> TypeHierarchy:
    """
    Read `child<TAB>parent` lines; the parent ROOT marks a top-level type.
    Blank lines and lines starting with '#' are ignored.
    """
    parents: dict[str, str | None] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise HierarchyError(f"Cannot read hierarchy '{path}': {exc}") from exc
    except UnicodeDecodeError as exc:
        raise HierarchyError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc
    for number, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
            raise HierarchyError(f"{path}:{number}: expected 'child<TAB>parent', got {line!r}")
        child, parent = fields[0].strip(), fields[1].strip()
        parent = None if parent == ROOT_TOKEN else parent
        if child in parents and parents[child] != parent:
            raise HierarchyError(f"{path}:{number}: type '{child}' has two parents")
        parents[child] = parent
    hierarchy = TypeHierarchy(parents)
    logger.info("Loaded type hierarchy with %d types, height %d", len(hierarchy), hierarchy.height)
    return hierarchy


def on_same_path(t: str, g: str, hier: TypeHierarchy) -> bool:
    """True iff t = g or one is an ancestor of the other. Unknown types are never on a path."""
    if t == g:
        return True
    for label in (t, g):
        if label not in hier:
            logger.warning("Type '%s' is not part of the hierarchy", label)
            return False
    return hier.distance(t, g) is not None


def lenient_gain(t: str, gold: Iterable[str], hier: TypeHierarchy) -> float:
    """
    1 - d / h for the closest gold type on a shared ancestor path, 0 when there is none.
    d counts parent edges, h is the hierarchy height.
    """
    gold = set(gold)
    if t in gold:
        return 1.0
    if t not in hier or hier.height == 0:
        return 0.0
    distances = [hier.distance(t, g) for g in gold if g in hier]
    distances = [d for d in distances if d is not None]
    if not distances:
        return 0.0
    return 1.0 - min(distances) / hier.height


def export_depths(hier: TypeHierarchy) -> str:
    """Types with their depth as TSV, deepest first."""
    rows = sorted(hier.depths().items(), key=lambda item: (-item[1], item[0]))
    return "".join(f"{label}\t{depth}\n" for label, depth in rows)
