"""Multi-input address clustering.

Addresses co-spent as inputs of one transaction belong to one user;
the transitive closure of that relation partitions all addresses seen
(inputs and outputs alike) into users.  Multi-address users (TypeA)
get rank-based identifiers — zero-padded decimal rank by descending
cluster size, ties broken by the lexicographically smallest member
address — while single-address users (TypeB) are identified by the
address itself.  The result depends only on the final partition, so
any permutation of the record stream produces identical IDs.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import DataError
from .records import TransferRecord

log = logging.getLogger(__name__)

TYPE_A = "TypeA"
TYPE_B = "TypeB"

# Width of zero-padded TypeA identifiers ("0000000000" is rank 0).
_ID_WIDTH = 10

# Union pairs buffered between kernel calls.
_FLUSH_AT = 1 << 18

LABEL_CATEGORIES = frozenset(
    {"Exchange", "Service", "Gambling", "Pool", "Historic", "Other"}
)


@dataclass(frozen=True)
class UserClustering:
    """Partition of addresses into users.

    All three maps are keyed consistently: ``address_to_user`` sends
    every address seen to its user-id, ``user_type`` and ``user_size``
    describe each user.  Treat instances as immutable.
    """

    address_to_user: dict[str, str]
    user_type: dict[str, str]
    user_size: dict[str, int]

    @property
    def n_addresses(self) -> int:
        return len(self.address_to_user)

    @property
    def n_users(self) -> int:
        return len(self.user_type)

    def users_of_type(self, kind: str) -> list[str]:
        return sorted(u for u, t in self.user_type.items() if t == kind)


@dataclass(frozen=True)
class IdentityLabel:
    user_id: str
    name: str
    category: str
    country: str | None = None

    def __post_init__(self):
        if self.category not in LABEL_CATEGORIES:
            raise DataError(
                f"unknown label category {self.category!r} for {self.user_id}"
            )


class _UnionFind:
    """Growable array union-find fed in batches to the kernel backend."""

    def __init__(self):
        self.parent = np.empty(0, dtype=np.int64)
        self.sizes = np.empty(0, dtype=np.int64)
        self.n = 0
        self._left: list[int] = []
        self._right: list[int] = []

    def _grow(self, n: int):
        cap = len(self.parent)
        if n <= cap:
            self.n = max(self.n, n)
            return
        new_cap = max(1024, 2 * cap)
        while new_cap < n:
            new_cap *= 2
        parent = np.arange(new_cap, dtype=np.int64)
        parent[: self.n] = self.parent[: self.n]
        sizes = np.ones(new_cap, dtype=np.int64)
        sizes[: self.n] = self.sizes[: self.n]
        self.parent, self.sizes = parent, sizes
        self.n = n

    def union(self, a: int, b: int):
        self._grow(max(a, b) + 1)
        self._left.append(a)
        self._right.append(b)
        if len(self._left) >= _FLUSH_AT:
            self.flush()

    def touch(self, a: int):
        self._grow(a + 1)

    def flush(self):
        if not self._left:
            return
        _kernels.union_pairs(
            self.parent[: self.n],
            self.sizes[: self.n],
            np.asarray(self._left, dtype=np.int64),
            np.asarray(self._right, dtype=np.int64),
        )
        self._left.clear()
        self._right.clear()

    def roots(self) -> np.ndarray:
        self.flush()
        return _kernels.find_roots(self.parent[: self.n])


def cluster_addresses(records: Iterable[TransferRecord]) -> UserClustering:
    """Partition addresses into users via the multi-input heuristic.

    Two addresses share a user iff they are linked through co-occurrence
    in transaction input sets.  Output-only addresses become singleton
    TypeB users.  An empty stream yields an empty clustering.
    """
    index: dict[str, int] = {}
    uf = _UnionFind()

    def intern(addr: str) -> int:
        i = index.get(addr)
        if i is None:
            i = len(index)
            index[addr] = i
            uf.touch(i)
        return i

    for rec in records:
        first = intern(rec.inputs[0])
        for addr in rec.inputs[1:]:
            uf.union(first, intern(addr))
        for addr, _ in rec.outputs:
            intern(addr)

    if not index:
        return UserClustering({}, {}, {})

    roots = uf.roots()
    members: dict[int, list[str]] = {}
    for addr, i in index.items():
        members.setdefault(int(roots[i]), []).append(addr)

    address_to_user: dict[str, str] = {}
    user_type: dict[str, str] = {}
    user_size: dict[str, int] = {}

    multi = [addrs for addrs in members.values() if len(addrs) >= 2]
    multi.sort(key=lambda addrs: (-len(addrs), min(addrs)))
    for rank, addrs in enumerate(multi):
        uid = f"{rank:0{_ID_WIDTH}d}"
        user_type[uid] = TYPE_A
        user_size[uid] = len(addrs)
        for addr in addrs:
            address_to_user[addr] = uid
    for addrs in members.values():
        if len(addrs) == 1:
            addr = addrs[0]
            address_to_user[addr] = addr
            user_type[addr] = TYPE_B
            user_size[addr] = 1

    return UserClustering(address_to_user, user_type, user_size)


def rank_size(clustering: UserClustering) -> list[tuple[int, int]]:
    """(rank, size) per TypeA user, largest first, ranks from 1."""
    sizes = sorted(
        (size for uid, size in clustering.user_size.items()
         if clustering.user_type[uid] == TYPE_A),
        reverse=True,
    )
    return [(rank, size) for rank, size in enumerate(sizes, start=1)]


def load_labels(path, clustering: UserClustering) -> dict[str, IdentityLabel]:
    """Load identity labels, keeping only rows whose user-id resolves.

    Duplicate user-ids in the file are an error; rows naming unknown
    users are dropped with a warning (and a summary count).
    """
    path = Path(path)
    labels: dict[str, IdentityLabel] = {}
    seen: set[str] = set()
    unresolved = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"user_id", "name", "category"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"label file missing columns {sorted(missing)}")
        for row_no, row in enumerate(reader, start=2):
            uid = (row.get("user_id") or "").strip()
            if not uid:
                raise DataError(f"label file row {row_no}: empty user_id")
            if uid in seen:
                raise DataError(f"duplicate label for user {uid} (row {row_no})")
            seen.add(uid)
            label = IdentityLabel(
                user_id=uid,
                name=(row.get("name") or "").strip(),
                category=(row.get("category") or "").strip(),
                country=(row.get("country") or "").strip() or None,
            )
            if uid not in clustering.user_type:
                unresolved += 1
                log.warning("label row %d: unknown user %s, skipped", row_no, uid)
                continue
            labels[uid] = label
    if unresolved:
        log.warning("%d label rows referenced unknown users", unresolved)
    return labels
