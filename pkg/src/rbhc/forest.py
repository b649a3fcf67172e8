"""Merge forests, partitions and their on-disk formats.

Node ids follow the linkage-matrix convention: leaves are ``0..n-1`` and the
``k``-th merge creates node ``n + k``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np


@dataclass
class MergeRecord:
    left: int
    right: int
    height: float
    new_size: int
    merge_posterior: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"left": self.left, "right": self.right, "height": self.height, "new_size": self.new_size}
        if self.merge_posterior is not None:
            out["merge_posterior"] = self.merge_posterior
        return out


@dataclass
class Forest:
    leaf_count: int
    merges: List[MergeRecord] = field(default_factory=list)
    roots: List[int] = field(default_factory=list)

    def node_count(self) -> int:
        return self.leaf_count + len(self.merges)

    def children(self, node: int):
        if node < self.leaf_count:
            return None
        rec = self.merges[node - self.leaf_count]
        return rec.left, rec.right

    def leaves(self, node: int) -> List[int]:
        out, stack = [], [node]
        while stack:
            v = stack.pop()
            if v < self.leaf_count:
                out.append(v)
            else:
                rec = self.merges[v - self.leaf_count]
                stack.extend((rec.right, rec.left))
        return sorted(out)

    def merge_pairs(self) -> set:
        """Merges as an unordered set of (leaf-set, leaf-set) pairs."""
        return {
            frozenset((frozenset(self.leaves(r.left)), frozenset(self.leaves(r.right))))
            for r in self.merges
        }

    def validate(self) -> None:
        n = self.leaf_count
        if len(self.merges) > max(n - 1, 0):
            raise ValueError("too many merges for the number of leaves")
        live = set(range(n))
        sizes = [1] * n
        for k, rec in enumerate(self.merges):
            if rec.left not in live or rec.right not in live or rec.left == rec.right:
                raise ValueError(f"merge {k} references a node that is not a live root")
            if rec.new_size != sizes[rec.left] + sizes[rec.right]:
                raise ValueError(f"merge {k} has inconsistent new_size")
            live -= {rec.left, rec.right}
            live.add(n + k)
            sizes.append(rec.new_size)
        if sorted(self.roots) != sorted(live):
            raise ValueError("roots do not match the surviving nodes")

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "leaf_count": self.leaf_count,
            "merges": [r.to_dict() for r in self.merges],
            "roots": list(self.roots),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Forest":
        merges = [
            MergeRecord(
                int(m["left"]),
                int(m["right"]),
                float(m["height"]),
                int(m["new_size"]),
                m.get("merge_posterior"),
            )
            for m in data["merges"]
        ]
        forest = cls(int(data["leaf_count"]), merges, [int(r) for r in data["roots"]])
        forest.validate()
        return forest

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def to_linkage_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["left", "right", "height", "new_size"])
        for r in self.merges:
            writer.writerow([r.left, r.right, f"{r.height:.17g}", r.new_size])
        return buf.getvalue()


def forest_from_merges(leaf_count: int, merges: List[MergeRecord]) -> Forest:
    live = set(range(leaf_count))
    for k, rec in enumerate(merges):
        live.discard(rec.left)
        live.discard(rec.right)
        live.add(leaf_count + k)
    return Forest(leaf_count, list(merges), sorted(live))


@dataclass
class Partition:
    """Cluster label per leaf; labels are contiguous from 0."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def clusters(self) -> List[List[int]]:
        return [np.flatnonzero(self.labels == k).tolist() for k in range(self.n_clusters)]

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Relabel arbitrary hashable labels to 0.. in order of first appearance."""
        mapping: dict = {}
        out = [mapping.setdefault(lab, len(mapping)) for lab in labels]
        return cls(np.array(out, dtype=np.int64))

    def to_csv(self) -> str:
        lines = ["id,label"] + [f"{i},{lab}" for i, lab in enumerate(self.labels)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "Partition":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["id", "label"]:
            raise ValueError("partition CSV must start with an 'id,label' header")
        pairs = sorted((int(r[0]), int(r[1])) for r in rows[1:] if r)
        if [i for i, _ in pairs] != list(range(len(pairs))):
            raise ValueError("partition CSV ids must be 0..n-1")
        return cls.from_labels([lab for _, lab in pairs])


def extract_partition(forest: Forest) -> Partition:
    """Each root's leaves form one cluster, labelled in order of first leaf."""
    n = forest.leaf_count
    parent = np.arange(forest.node_count())
    for k, rec in enumerate(forest.merges):
        parent[rec.left] = n + k
        parent[rec.right] = n + k
    # parents always have larger ids, so one backward sweep resolves roots
    root = parent.copy()
    for v in range(forest.node_count() - 1, -1, -1):
        root[v] = root[parent[v]] if parent[v] != v else v
    return Partition.from_labels(root[:n].tolist())
