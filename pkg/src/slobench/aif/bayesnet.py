"""Discrete Bayesian networks: BIC hill climbing, count-based CPTs and exact queries.

Data is an integer matrix with one column per variable holding state indices
``0..card-1``. CPTs are dense arrays of shape (parent configurations, states)
with parents in ascending variable order and the first parent most significant.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MAX_CPT_CELLS = 2_000_000


def _n_configs(parents, card) -> int:
    return int(np.prod([card[p] for p in parents], dtype=np.int64)) if parents else 1


def parent_codes(data: np.ndarray, parents, card) -> np.ndarray:
    if not parents:
        return np.zeros(len(data), dtype=np.int64)
    return np.ravel_multi_index(tuple(data[:, p] for p in parents),
                                tuple(card[p] for p in parents))


def family_counts(data: np.ndarray, node: int, parents, card, weights=None) -> np.ndarray:
    """(q, r) table of joint counts of parent configuration and node state."""
    q, r = _n_configs(parents, card), card[node]
    key = parent_codes(data, parents, card) * r + data[:, node]
    return np.bincount(key, weights=weights, minlength=q * r).reshape(q, r).astype(float)


class BicScore:
    """Decomposable BIC with the penalty counted over observed states only.

    ``weights`` lets each row stand for several identical observations.
    Counting is sparse, so large parent sets cost memory only for the
    configurations that actually occur.
    """

    def __init__(self, data: np.ndarray, card, weights=None):
        self.data = np.asarray(data, dtype=np.int64)
        self.card = tuple(card)
        self.weights = (np.ones(len(self.data)) if weights is None
                        else np.asarray(weights, dtype=float))
        self.log_n = math.log(self.weights.sum())
        present = self.weights > 0
        self.observed = [len(np.unique(self.data[present, v])) for v in range(self.data.shape[1])]
        self._cache: dict = {}

    def local(self, node: int, parents: tuple) -> float:
        key = (node, parents)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        r = self.card[node]
        pa = parent_codes(self.data, parents, self.card)
        cells, inv = np.unique(pa * r + self.data[:, node], return_inverse=True)
        counts = np.bincount(inv.reshape(-1), weights=self.weights)
        rows, row_inv = np.unique(cells // r, return_inverse=True)
        totals = np.bincount(row_inv.reshape(-1), weights=counts)[row_inv.reshape(-1)]
        nz = counts > 0
        ll = float(np.sum(counts[nz] * np.log(counts[nz] / totals[nz])))
        q = math.prod(self.observed[p] for p in parents)
        score = ll - 0.5 * self.log_n * q * (self.observed[node] - 1)
        self._cache[key] = score
        return score


def _reaches(parents: dict, src: int, dst: int) -> bool:
    """True if a directed path src -> ... -> dst exists (parents maps child -> parent set)."""
    children: dict[int, list] = {}
    for c, ps in parents.items():
        for p in ps:
            children.setdefault(p, []).append(c)
    stack, seen = [src], {src}
    while stack:
        v = stack.pop()
        if v == dst:
            return True
        for c in children.get(v, ()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def is_acyclic(parents: dict) -> bool:
    state: dict[int, int] = {}

    def visit(v) -> bool:
        state[v] = 1
        for p in parents.get(v, ()):
            s = state.get(p, 0)
            if s == 1 or (s == 0 and not visit(p)):
                return False
        state[v] = 2
        return True

    return all(state.get(v, 0) == 2 or visit(v) for v in parents)


def hill_climb(data: np.ndarray, card, max_indegree: int = 8, epsilon: float = 1.0,
               roots=(), max_iter: int = 10_000, weights=None) -> dict[int, tuple]:
    """Greedy search over single-edge additions, removals and reversals.

    Starts from the empty graph and stops once the best move improves the
    score by less than ``epsilon``. Nodes in ``roots`` never receive parents.
    Ties go to the first move in (source, target, add/remove/reverse) order.
    """
    data = np.asarray(data, dtype=np.int64)
    n_vars = data.shape[1]
    scorer = BicScore(data, card, weights)
    parents: dict[int, tuple] = {v: () for v in range(n_vars)}
    roots = set(roots)

    def legal_family(node, pa) -> bool:
        return (node not in roots and len(pa) <= max_indegree
                and _n_configs(pa, card) * card[node] <= MAX_CPT_CELLS)

    for _ in range(max_iter):
        best, best_delta = None, -math.inf
        for x in range(n_vars):
            for y in range(n_vars):
                if x == y:
                    continue
                pa_y = parents[y]
                if x not in pa_y:
                    new_pa = tuple(sorted(pa_y + (x,)))
                    if legal_family(y, new_pa) and not _reaches(parents, y, x):
                        d = scorer.local(y, new_pa) - scorer.local(y, pa_y)
                        if d > best_delta:
                            best, best_delta = ("add", x, y), d
                else:
                    less = tuple(p for p in pa_y if p != x)
                    d = scorer.local(y, less) - scorer.local(y, pa_y)
                    if d > best_delta:
                        best, best_delta = ("remove", x, y), d
                    new_px = tuple(sorted(parents[x] + (y,)))
                    if legal_family(x, new_px):
                        trial = dict(parents)
                        trial[y] = less
                        if not _reaches(trial, x, y):
                            d = (scorer.local(y, less) - scorer.local(y, pa_y)
                                 + scorer.local(x, new_px) - scorer.local(x, parents[x]))
                            if d > best_delta:
                                best, best_delta = ("reverse", x, y), d
        if best is None or best_delta < epsilon:
            break
        op, x, y = best
        if op == "add":
            parents[y] = tuple(sorted(parents[y] + (x,)))
        elif op == "remove":
            parents[y] = tuple(p for p in parents[y] if p != x)
        else:
            parents[y] = tuple(p for p in parents[y] if p != x)
            parents[x] = tuple(sorted(parents[x] + (y,)))
    return parents


@dataclass
class BayesNet:
    card: tuple
    parents: dict[int, tuple]
    cpts: dict[int, np.ndarray] = field(default_factory=dict)
    row_counts: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.card = tuple(int(c) for c in self.card)
        self.parents = {int(k): tuple(sorted(int(p) for p in v)) for k, v in self.parents.items()}
        for v in range(len(self.card)):
            self.parents.setdefault(v, ())
        if not is_acyclic(self.parents):
            raise ValueError("parent sets contain a cycle")

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((p, c) for c, ps in self.parents.items() for p in ps)

    def ancestors(self, nodes) -> set:
        out, stack = set(), list(nodes)
        while stack:
            v = stack.pop()
            if v in out:
                continue
            out.add(v)
            stack.extend(self.parents[v])
        return out

    def log_joint(self, data: np.ndarray) -> np.ndarray:
        """Per-row log probability of complete observations."""
        data = np.asarray(data, dtype=np.int64)
        total = np.zeros(len(data))
        for v in range(len(self.card)):
            codes = parent_codes(data, self.parents[v], self.card)
            total += np.log(self.cpts[v][codes, data[:, v]])
        return total

    def factor(self, v: int) -> np.ndarray:
        shape = tuple(self.card[p] for p in self.parents[v]) + (self.card[v],)
        return self.cpts[v].reshape(shape)

    def conditional(self, target: int, given: int) -> np.ndarray:
        """P(target | given) for every state of ``given`` as a (card[given], card[target]) array."""
        nodes = sorted(self.ancestors([target, given]))
        operands = []
        for v in nodes:
            operands += [self.factor(v), list(self.parents[v]) + [v]]
        joint = np.einsum(*operands, [given, target], optimize=True)
        return joint / joint.sum(axis=1, keepdims=True)


def fit_parameters(data: np.ndarray, parents: dict, card, weights=None) -> BayesNet:
    """Laplace-smoothed (+1 per cell) conditional frequencies."""
    net = BayesNet(card=card, parents=parents)
    data = np.asarray(data, dtype=np.int64)
    for v in range(len(net.card)):
        counts = family_counts(data, v, net.parents[v], net.card, weights)
        rows = counts.sum(axis=1)
        net.cpts[v] = (counts + 1.0) / (rows[:, None] + net.card[v])
        net.row_counts[v] = rows
    return net


def blend_parameters(old: BayesNet | None, new_data: np.ndarray, parents: dict, card,
                     past_weight: float = 0.6, weights=None) -> BayesNet:
    """Fit on ``new_data`` and mix with ``old`` row by row.

    Rows seen in both take ``past_weight*old + (1-past_weight)*new``; rows
    with no new evidence keep the old distribution; rows only seen now take
    the new fit. A node whose parent set changed is fitted fresh.
    """
    fresh = fit_parameters(new_data, parents, card, weights)
    if old is None:
        return fresh
    for v in range(len(fresh.card)):
        if old.parents.get(v) != fresh.parents[v] or old.card != fresh.card:
            log.info("parent set of node %d changed; old parameters dropped", v)
            continue
        new_rows = fresh.row_counts[v] > 0
        old_rows = old.row_counts[v] > 0
        both = new_rows & old_rows
        cpt = fresh.cpts[v].copy()
        cpt[both] = past_weight * old.cpts[v][both] + (1.0 - past_weight) * cpt[both]
        cpt[both] /= cpt[both].sum(axis=1, keepdims=True)
        keep = ~new_rows
        cpt[keep] = old.cpts[v][keep]
        fresh.cpts[v] = cpt
        fresh.row_counts[v] = fresh.row_counts[v] + old.row_counts[v]
    return fresh
