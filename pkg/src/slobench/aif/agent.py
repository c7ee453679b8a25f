"""Active inference agent over the configuration grid.

The agent keeps a discrete Bayesian network of (action, cpu, mem, five SLO
bins) and three belief tensors over the 6x3x6 grid: pragmatic value (expected
QoE compliance), risk assigned (expected QoS compliance) and information gain.
Each batch of 32 observations is scored for surprise, which decides whether
parameters or structure are relearned, and the next configuration is the
argmax of pv + ra + ig.
"""
from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from slobench.aif.bayesnet import BayesNet, blend_parameters, fit_parameters, hill_climb
from slobench.aif.discretize import (CARDINALITY, MU, QOE_VARIABLES, QOS_VARIABLES, VARIABLES,
                                     discretize_batch)
from slobench.env.actions import CORNER_INDICES, GRID_SHAPE, N_ACTIONS, StreamConfig
from slobench.errors import CheckpointError, ContractViolation
from slobench.slo import SloThresholds, compliance_levels

ACTION = 0
UNVISITED_PRIOR = 0.5


@dataclass(frozen=True)
class AifParams:
    threshold_factor: float = 2.0          # h
    past_weight: float = 0.6
    initial_additional_surprise: float = 1.0
    max_indegree: int = 8
    hill_climb_epsilon: float = 1.0
    batch_size: int = 32
    interior_boost: float = 0.25
    history: int = 10
    memory_cap: int | None = None          # None keeps every observation
    binary_compliance: bool = False        # score SLO bins as met/unmet instead of mu


class SurpriseTracker:
    """Median gate over the last ``capacity`` batch surprises."""

    def __init__(self, h: float = 2.0, capacity: int = 10):
        self.h = h
        self.history: deque = deque(maxlen=capacity)

    def median(self) -> float:
        return float(statistics.median(self.history)) if self.history else -math.inf

    def gate(self, surprise: float) -> tuple[bool, bool]:
        """(relearn parameters, relearn structure) for a new surprise value."""
        if not self.history:
            return True, True
        med = self.median()
        structure = surprise > med * self.h
        return structure or surprise > med, structure

    def push(self, surprise: float):
        self.history.append(float(surprise))


# value of each SLO bin when only exact compliance counts
BINARY = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])


def expected_compliance_table(model: BayesNet, group, values: np.ndarray = MU) -> np.ndarray:
    """Mean of sum_s values(s) P(s | a) over the group's SLO variables, for every action.

    ``values`` defaults to the graded approximation mu; BINARY gives the
    probability of full compliance averaged over the group.
    """
    total = np.zeros(model.card[ACTION])
    for name in group:
        total += model.conditional(VARIABLES.index(name), ACTION) @ values
    return total / len(group)


def interpolate_grid(values: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Fill unknown cells by linear interpolation along streams, then resolution, then fps.

    Interpolation runs in index space over the known cells of each grid line
    and clamps to the nearest known cell outside their range. With only the
    eight corners known this is exact trilinear interpolation.
    """
    if not known.any():
        return np.zeros(values.shape)
    out = np.where(known, values, np.nan)
    for axis in range(3):
        moved = np.moveaxis(out, axis, -1)
        lines = moved.reshape(-1, moved.shape[-1])
        pos = np.arange(lines.shape[1])
        for line in lines:
            ok = ~np.isnan(line)
            if ok.any() and not ok.all():
                line[~ok] = np.interp(pos[~ok], pos[ok], line[ok])
        out = np.moveaxis(lines.reshape(moved.shape), -1, axis)
    return out


class ObservationMemory:
    """Observations kept for structure learning.

    Unbounded memory stores each distinct row once with its multiplicity,
    which is all the count-based learners need, so its size follows the
    number of distinct observations rather than their total. With ``cap`` set
    it is a ring of the newest ``cap`` raw rows.
    """

    def __init__(self, cap: int | None = None):
        self.cap = cap
        self.total = 0
        self._codes = np.zeros(0, np.int64)
        self._weights = np.zeros(0)
        self._ring: list[np.ndarray] = []

    def extend(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.int64)
        self.total += len(rows)
        if self.cap is not None:
            self._ring.append(rows.astype(np.int8))
            held = np.concatenate(self._ring)[-self.cap:]
            self._ring = [held]
            return
        codes = np.ravel_multi_index(tuple(rows.T), CARDINALITY)
        uniq, inv = np.unique(np.concatenate([self._codes, codes]), return_inverse=True)
        w = np.concatenate([self._weights, np.ones(len(codes))])
        self._codes, self._weights = uniq, np.bincount(inv.reshape(-1), weights=w)

    def __len__(self):
        return self.total if self.cap is None else sum(len(r) for r in self._ring)

    def data(self) -> tuple[np.ndarray, np.ndarray | None]:
        """(rows, weights); weights is None for raw ring storage."""
        if self.cap is not None:
            rows = self._ring[0] if self._ring else np.zeros((0, len(VARIABLES)), np.int8)
            return rows.astype(np.int64), None
        rows = np.stack(np.unravel_index(self._codes, CARDINALITY), axis=1).astype(np.int64)
        return rows, self._weights

    def state_arrays(self) -> dict:
        if self.cap is not None:
            return {"mem_rows": self.data()[0].astype(np.int8),
                    "mem_total": np.array([self.total])}
        return {"mem_codes": self._codes, "mem_weights": self._weights,
                "mem_total": np.array([self.total])}

    def load_arrays(self, arrays: dict):
        self.total = int(arrays["mem_total"][0])
        if self.cap is not None:
            self._ring = [arrays["mem_rows"].astype(np.int8)] if "mem_rows" in arrays else []
        else:
            self._codes = arrays["mem_codes"].astype(np.int64)
            self._weights = arrays["mem_weights"].astype(float)


class AifAgent:
    name = "aif"

    def __init__(self, slos: SloThresholds, params: AifParams = AifParams(),
                 allowed_actions=None):
        self.slos = slos
        self.params = params
        self.model: BayesNet | None = None
        self.tracker = SurpriseTracker(params.threshold_factor, params.history)
        self.memory = ObservationMemory(params.memory_cap)
        self.pending = ObservationMemory()    # evidence since the last relearn
        self.visits = np.zeros(N_ACTIONS, dtype=np.int64)
        self.pv_obs = np.zeros(N_ACTIONS)
        self.ra_obs = np.zeros(N_ACTIONS)
        boost = np.full(N_ACTIONS, params.interior_boost)
        boost[list(CORNER_INDICES)] = params.initial_additional_surprise
        self.boost = boost
        self.allowed = None if allowed_actions is None else np.array(sorted(allowed_actions))
        self.parameter_relearns = 0
        self.structure_relearns = 0
        self.last_surprise = math.nan
        self.last_gate = (False, False)
        self.batches_seen = 0

    # ----- beliefs -----------------------------------------------------
    @property
    def ig(self) -> np.ndarray:
        return self.boost / (1.0 + self.visits)

    def beliefs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """pv, ra, ig as 6x3x6 tensors; unvisited pv/ra are interpolated."""
        known = (self.visits > 0).reshape(GRID_SHAPE)
        pv = interpolate_grid(self.pv_obs.reshape(GRID_SHAPE), known)
        ra = interpolate_grid(self.ra_obs.reshape(GRID_SHAPE), known)
        return pv, ra, self.ig.reshape(GRID_SHAPE)

    def scores(self) -> np.ndarray:
        pv, ra, ig = self.beliefs()
        return (pv + ra + ig).reshape(-1)

    def select_action(self) -> int:
        s = self.scores()
        if self.allowed is not None:
            return int(self.allowed[np.argmax(s[self.allowed])])
        return int(np.argmax(s))

    def act(self) -> int:
        """Deterministic choice from the current beliefs; does not learn."""
        return self.select_action()

    def expected_compliance(self, action: int, which: str) -> tuple[float, bool]:
        """(value, flagged); flagged when the action was never observed and 0.5 is returned."""
        if self.model is None or self.visits[action] == 0:
            return UNVISITED_PRIOR, True
        group = QOE_VARIABLES if which.lower() == "qoe" else QOS_VARIABLES
        return float(expected_compliance_table(self.model, group, self._bin_values)[action]), False

    # ----- learning ----------------------------------------------------
    def surprise(self, rows: np.ndarray) -> float:
        if self.model is None:
            baseline = fit_parameters(rows, {}, CARDINALITY)
            return self.params.initial_additional_surprise + float(-baseline.log_joint(rows).mean())
        return float(-self.model.log_joint(rows).mean())

    @property
    def _bin_values(self) -> np.ndarray:
        return BINARY if self.params.binary_compliance else MU

    def _refresh(self, actions):
        qoe = expected_compliance_table(self.model, QOE_VARIABLES, self._bin_values)
        qos = expected_compliance_table(self.model, QOS_VARIABLES, self._bin_values)
        self.pv_obs[actions] = qoe[actions]
        self.ra_obs[actions] = qos[actions]

    def observe_rows(self, rows: np.ndarray, action: int) -> int:
        rows = np.asarray(rows, dtype=np.int64)
        if len(rows) != self.params.batch_size:
            raise ContractViolation(f"expected a batch of {self.params.batch_size}, got {len(rows)}")
        surprise = self.surprise(rows)
        relearn_params, relearn_structure = self.tracker.gate(surprise)
        self.memory.extend(rows)
        self.pending.extend(rows)
        if relearn_structure:
            data, weights = self.memory.data()
            parents = hill_climb(data, CARDINALITY, self.params.max_indegree,
                                 self.params.hill_climb_epsilon, roots=(ACTION,), weights=weights)
            self.model = fit_parameters(data, parents, CARDINALITY, weights)
            self.structure_relearns += 1
            self.parameter_relearns += 1
            self.pending = ObservationMemory()
        elif relearn_params:
            new, weights = self.pending.data()
            self.model = blend_parameters(self.model, new, self.model.parents, CARDINALITY,
                                          self.params.past_weight, weights)
            self.parameter_relearns += 1
            self.pending = ObservationMemory()
        self.visits[action] += 1
        if relearn_params or relearn_structure:
            self._refresh(np.flatnonzero(self.visits))
        else:
            self._refresh([action])
        self.tracker.push(surprise)
        self.last_surprise = surprise
        self.last_gate = (relearn_params, relearn_structure)
        self.batches_seen += 1
        return self.select_action()

    def observe(self, batch, action) -> int:
        """Learn from a batch collected at ``action`` and return the next action index."""
        action = action.index if isinstance(action, StreamConfig) else int(action)
        levels = compliance_levels(batch, self.slos)
        return self.observe_rows(discretize_batch(batch, levels, action), action)

    # ----- persistence -------------------------------------------------
    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {"visits": self.visits, "pv_obs": self.pv_obs, "ra_obs": self.ra_obs,
                  **self.memory.state_arrays(),
                  "history": np.array(self.tracker.history, dtype=float)}
        arrays.update({f"pending_{k}": v for k, v in self.pending.state_arrays().items()})
        if self.model is not None:
            for v in range(len(CARDINALITY)):
                arrays[f"cpt_{v}"] = self.model.cpts[v]
                arrays[f"rows_{v}"] = self.model.row_counts[v]
        return arrays

    def state_header(self) -> dict:
        return {
            "agent": self.name,
            "params": self.params.__dict__,
            "slos": self.slos.__dict__,
            "edges": None if self.model is None else self.model.edges,
            "counters": [self.parameter_relearns, self.structure_relearns, self.batches_seen],
            "allowed": None if self.allowed is None else self.allowed.tolist(),
        }

    def load_state(self, header: dict, arrays: dict):
        if header.get("agent") != self.name:
            raise CheckpointError(f"checkpoint holds agent {header.get('agent')!r}, not {self.name!r}")
        self.visits = arrays["visits"].astype(np.int64)
        self.pv_obs = arrays["pv_obs"].astype(float)
        self.ra_obs = arrays["ra_obs"].astype(float)
        self.memory = ObservationMemory(self.params.memory_cap)
        self.memory.load_arrays(arrays)
        self.tracker.history.clear()
        for s in arrays["history"]:
            self.tracker.push(s)
        self.pending = ObservationMemory()
        self.pending.load_arrays({k[len("pending_"):]: v for k, v in arrays.items()
                                  if k.startswith("pending_")})
        if header["edges"] is None:
            self.model = None
        else:
            parents: dict[int, list] = {v: [] for v in range(len(CARDINALITY))}
            for p, c in header["edges"]:
                parents[c].append(p)
            self.model = BayesNet(card=CARDINALITY, parents=parents)
            for v in range(len(CARDINALITY)):
                self.model.cpts[v] = arrays[f"cpt_{v}"]
                self.model.row_counts[v] = arrays[f"rows_{v}"]
        self.parameter_relearns, self.structure_relearns, self.batches_seen = header["counters"]
