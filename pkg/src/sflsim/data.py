"""Dataset ingestion and label-restricted client partitioning.

LIBSVM line grammar: ``<label> <index>:<value> ...`` with 1-based strictly
increasing indices.  Labels <= 0 map to class 0 and labels > 0 to class 1,
unconditionally, so parsed datasets are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Union

import numpy as np

from .rng import stream

__all__ = [
    "Dataset",
    "Partition",
    "LibsvmParseError",
    "PartitionError",
    "parse_libsvm",
    "dump_libsvm",
    "partition_by_labels",
    "generate_synthetic",
    "shard_matrix",
]


class LibsvmParseError(ValueError):
    def __init__(self, line: int, token: str, reason: str):
        self.line = line
        self.token = token
        super().__init__(f"parse error at line {line}, token {token!r}: {reason}")


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Sparse labeled samples; feature indices are 1-based."""

    samples: tuple[tuple[dict[int, float], int], ...]
    dim: int

    def __post_init__(self):
        for feats, label in self.samples:
            if label not in (0, 1):
                raise ValueError(f"labels must be 0/1, got {label}")
            for idx in feats:
                if idx < 1 or idx > self.dim:
                    raise ValueError(f"feature index {idx} outside 1..{self.dim}")

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> list[int]:
        return [label for _, label in self.samples]

    def distinct_labels(self) -> list[int]:
        return sorted(set(self.labels()))


@dataclass(frozen=True)
class Partition:
    """Disjoint client shards of sample indices, each covering <= C labels."""

    shards: tuple[tuple[int, ...], ...]
    labels_per_client: int


def parse_libsvm(source: Union[str, IO[str], Iterable[str]], dim: int | None = None) -> Dataset:
    """Parse LIBSVM text into a Dataset.

    ``source`` may be a string, an open text file, or an iterable of lines.
    ``dim`` overrides the inferred dimension (max feature index).
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source
    samples: list[tuple[dict[int, float], int]] = []
    max_index = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label_value = float(tokens[0])
        except ValueError:
            raise LibsvmParseError(lineno, tokens[0], "label is not a number") from None
        label = 1 if label_value > 0 else 0
        feats: dict[int, float] = {}
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(lineno, tok, "expected index:value")
            try:
                idx = int(idx_s)
            except ValueError:
                raise LibsvmParseError(lineno, tok, "index is not an integer") from None
            try:
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(lineno, tok, "value is not a number") from None
            if idx < 1:
                raise LibsvmParseError(lineno, tok, "indices are 1-based")
            if idx <= prev:
                raise LibsvmParseError(lineno, tok, "indices must be strictly increasing")
            prev = idx
            feats[idx] = val
        max_index = max(max_index, prev)
        samples.append((feats, label))
    inferred = max_index if dim is None else dim
    return Dataset(tuple(samples), inferred)


def dump_libsvm(ds: Dataset) -> str:
    """Serialize back to LIBSVM text; parse(dump(ds)) reproduces ds."""
    lines = []
    for feats, label in ds.samples:
        parts = [str(label)] + [f"{i}:{feats[i]!r}" for i in sorted(feats)]
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def partition_by_labels(
    ds: Dataset, M: int, C: int, rng: Union[int, np.random.Generator]
) -> Partition:
    """Assign each of M clients exactly C labels, then split every label's
    samples uniformly among the clients holding it.

    The label list is shuffled once with ``rng`` and dealt to clients in a
    cycle, so every label lands on at least one client whenever M*C covers
    the label count.  Deterministic given the seed.
    """
    if isinstance(rng, (int, np.integer)):
        rng = stream(int(rng), "partition")
    labels = ds.distinct_labels()
    if M < 1:
        raise PartitionError("M must be >= 1")
    if not 1 <= C <= len(labels):
        raise PartitionError(f"C must be in 1..{len(labels)}, got {C}")

    shuffled = [labels[i] for i in rng.permutation(len(labels))]
    holders: dict[int, list[int]] = {lab: [] for lab in labels}
    for client in range(M):
        for j in range(C):
            holders[shuffled[(client * C + j) % len(shuffled)]].append(client)

    by_label: dict[int, list[int]] = {lab: [] for lab in labels}
    for i, (_, lab) in enumerate(ds.samples):
        by_label[lab].append(i)

    shards: list[list[int]] = [[] for _ in range(M)]
    for lab in labels:
        owners = holders[lab]
        if not owners:
            continue
        idxs = by_label[lab]
        if len(idxs) < len(owners):
            raise PartitionError(
                f"label {lab} has {len(idxs)} samples for {len(owners)} clients"
            )
        order = rng.permutation(len(idxs))
        for pos, which in enumerate(order):
            shards[owners[pos % len(owners)]].append(idxs[which])
    return Partition(tuple(tuple(sorted(s)) for s in shards), C)


def generate_synthetic(n: int, dim: int, seed: int) -> Dataset:
    """Two opposite Gaussian clusters (means +-1 per coordinate, unit
    variance) with an exact ceil(n/2) / floor(n/2) label split."""
    if n < 2 or dim < 1:
        raise ValueError("need n >= 2 and dim >= 1")
    rng = stream(seed, "synthetic")
    n_pos = math.ceil(n / 2)
    samples: list[tuple[dict[int, float], int]] = []
    for i in range(n):
        label = 1 if i < n_pos else 0
        mean = 1.0 if label == 1 else -1.0
        vec = rng.normal(loc=mean, scale=1.0, size=dim)
        samples.append(({j + 1: float(vec[j]) for j in range(dim)}, label))
    return Dataset(tuple(samples), dim)


def shard_matrix(ds: Dataset, indices: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    """Densify a shard into (features, labels) arrays of width ds.dim."""
    idx = list(indices)
    feats = np.zeros((len(idx), ds.dim))
    labels = np.zeros(len(idx))
    for row, i in enumerate(idx):
        f, lab = ds.samples[i]
        for j, v in f.items():
            feats[row, j - 1] = v
        labels[row] = lab
    return feats, labels
