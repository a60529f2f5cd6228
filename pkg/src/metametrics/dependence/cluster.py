"""Average-linkage clustering of metrics on 1 - |correlation|."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage, to_tree
from scipy.spatial.distance import squareform

from ..errors import InvalidInput


@dataclass
class ClusterTree:
    """Merges in scipy's linkage convention: row i joins clusters a and b
    (ids >= n_leaves are earlier merges) at ``height``."""

    labels: list
    linkage: np.ndarray

    @property
    def heights(self) -> np.ndarray:
        return self.linkage[:, 2]

    def merges(self):
        n = len(self.labels)
        for i, (a, b, h, size) in enumerate(self.linkage):
            yield {
                "step": i + 1,
                "left": self._name(int(a), n),
                "right": self._name(int(b), n),
                "height": float(h),
                "size": int(size),
            }

    def _name(self, idx, n):
        return self.labels[idx] if idx < n else f"#{idx - n + 1}"

    def to_newick(self) -> str:
        root = to_tree(self.linkage)

        def quote(name):
            if any(ch in name for ch in " ():;,[]'"):
                return "'" + name.replace("'", "''") + "'"
            return name

        def rec(node, parent_h):
            length = parent_h - node.dist
            if node.is_leaf():
                return f"{quote(self.labels[node.id])}:{length:.6g}"
            inner = f"({rec(node.left, node.dist)},{rec(node.right, node.dist)})"
            return f"{inner}:{length:.6g}"

        return f"({rec(root.left, root.dist)},{rec(root.right, root.dist)});"


def cluster_metrics(C, labels: Optional[Sequence[str]] = None) -> ClusterTree:
    C = np.asarray(C, dtype=float)
    M = C.shape[0]
    if M < 2:
        raise InvalidInput("clustering needs at least 2 metrics")
    D = 1.0 - np.abs(C)
    D = np.clip(0.5 * (D + D.T), 0.0, 1.0)
    np.fill_diagonal(D, 0.0)
    Lk = linkage(squareform(D, checks=False), method="average")
    names = list(labels) if labels is not None else [f"M{i + 1}" for i in range(M)]
    return ClusterTree(names, Lk)
