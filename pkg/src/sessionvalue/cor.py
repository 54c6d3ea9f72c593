"""Co-occurrence recommender (COR): symmetric pair counts, frequency-ranked top-k.

A pair (x, y) counts the number of sessions whose *unique* product set
contains both x and y; repeated clicks within one session count once.
Rankings order neighbors by decreasing count, ties broken by ascending
product id, which makes every list totally ordered and reproducible.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .corpus import Dataset, Session
from .errors import MatrixUnderflowError

Pair = tuple[str, str]


def product_pair(a: str, b: str) -> Pair:
    """Canonical unordered key: lexicographically smaller id first."""
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class RecommendationList:
    """Top-k alternatives for one seed, strictly ordered by (score desc, id asc)."""

    seed: str
    items: tuple[tuple[str, float], ...]
    seed_known: bool = True

    @property
    def product_ids(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.items)


@dataclass(eq=True)
class CoocMatrix:
    """Sparse symmetric co-occurrence counts over unordered product pairs.

    ``session_membership[p]`` counts sessions whose unique set contains p, so
    the observed-product index survives exact removals. Instances are treated
    as immutable values; ``remove_session`` returns a new matrix.
    """

    counts: dict[Pair, int] = field(default_factory=dict)
    session_membership: dict[str, int] = field(default_factory=dict)

    @property
    def products(self) -> frozenset[str]:
        return frozenset(self.session_membership)

    def count(self, a: str, b: str) -> int:
        return self.counts.get(product_pair(a, b), 0)


def _session_pairs(session: Session) -> list[Pair]:
    unique = sorted(session.unique_products)
    return [(unique[i], unique[j]) for i in range(len(unique)) for j in range(i + 1, len(unique))]


def build_matrix(dataset: Dataset) -> CoocMatrix:
    counts: dict[Pair, int] = {}
    membership: dict[str, int] = {}
    for session in dataset.sessions:
        for p in sorted(session.unique_products):
            membership[p] = membership.get(p, 0) + 1
        for pair in _session_pairs(session):
            counts[pair] = counts.get(pair, 0) + 1
    return CoocMatrix(counts=counts, session_membership=membership)


def remove_session(matrix: CoocMatrix, session: Session) -> CoocMatrix:
    """Exact incremental removal; equals a from-scratch rebuild without the session.

    The input matrix is left untouched. Decrements that would go below zero
    raise MatrixUnderflowError (the session was never in the build).
    """
    counts = dict(matrix.counts)
    membership = dict(matrix.session_membership)
    for p in session.unique_products:
        current = membership.get(p, 0)
        if current <= 0:
            raise MatrixUnderflowError(f"product {p!r} not present in matrix")
        if current == 1:
            del membership[p]
        else:
            membership[p] = current - 1
    for pair in _session_pairs(session):
        current = counts.get(pair, 0)
        if current <= 0:
            raise MatrixUnderflowError(f"pair {pair!r} not present in matrix")
        if current == 1:
            del counts[pair]
        else:
            counts[pair] = current - 1
    return CoocMatrix(counts=counts, session_membership=membership)


def _rank(neighbors: list[tuple[str, int]], k: int) -> tuple[tuple[str, float], ...]:
    neighbors.sort(key=lambda item: (-item[1], item[0]))
    return tuple((p, c) for p, c in neighbors[:k])


def top_k(matrix: CoocMatrix, seed: str, k: int) -> RecommendationList:
    """Highest-count neighbors of ``seed``; unknown seeds yield an empty, flagged list."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if seed not in matrix.session_membership:
        return RecommendationList(seed=seed, items=(), seed_known=False)
    neighbors = []
    for (a, b), c in matrix.counts.items():
        if a == seed:
            neighbors.append((b, c))
        elif b == seed:
            neighbors.append((a, c))
    return RecommendationList(seed=seed, items=_rank(neighbors, k))


def all_top_k(matrix: CoocMatrix, k: int) -> dict[str, RecommendationList]:
    """One ranked list per observed product, pointwise equal to ``top_k``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    adjacency: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for (a, b), c in matrix.counts.items():
        adjacency[a].append((b, c))
        adjacency[b].append((a, c))
    out: dict[str, RecommendationList] = {}
    for seed in sorted(matrix.session_membership):
        out[seed] = RecommendationList(seed=seed, items=_rank(adjacency[seed], k))
    return out


def dump_matrix(matrix: CoocMatrix) -> str:
    """Canonical text dump: sorted ``a<TAB>b<TAB>count`` lines, byte-exact across runs."""
    lines = [f"{a}\t{b}\t{c}" for (a, b), c in sorted(matrix.counts.items())]
    return "".join(line + "\n" for line in lines)
