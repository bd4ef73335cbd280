"""Run-by-run relevant-subset allocation (randomized RRSD and deterministic DRSD).

An experiment starts from an a priori design ``w`` and a first run of ``n1``
observations.  After each run the invariant information ``g`` of every
support group is recomputed from all data so far, and the centered statistic
``u = g - w * sum(g)`` steers the next run: points whose observed information
fell short of their share are favoured.

The state is an ordinary mutable object; serialization helpers at the bottom
support a human running a real experiment one batch at a time.
"""

from dataclasses import dataclass, field
import enum
import hashlib
import json
import math
import warnings

import numpy as np

from .designs import Design
from .error_models import ErrorModel, Family, elemental_info
from .estimation import mle_location, weighted_location
from .information import SupportGroup, invariant_info, relevant_info_eta, uv_statistics

STATE_SCHEMA_VERSION = 1


class Mode(str, enum.Enum):
    RRSD = "RRSD"
    DRSD = "DRSD"


class AdaptiveError(ValueError):
    pass


@dataclass
class RunPlan:
    """The next run: its size and either allocation probabilities or a single point.

    ``allocations`` holds the sampled support indices once the plan has been
    realized; it is what an experimenter acts on.
    """

    size: int
    probs: np.ndarray = None
    chosen_index: int = None
    capped: bool = False
    allocations: np.ndarray = None

    def to_dict(self):
        out = {"size": int(self.size), "capped": bool(self.capped)}
        if self.probs is not None:
            out["probs"] = [float(x) for x in self.probs]
        if self.chosen_index is not None:
            out["chosen_index"] = int(self.chosen_index)
        if self.allocations is not None:
            out["allocations"] = [int(i) for i in self.allocations]
        return out

    @classmethod
    def from_dict(cls, spec):
        return cls(
            size=int(spec["size"]),
            probs=None if spec.get("probs") is None else np.asarray(spec["probs"], dtype=float),
            chosen_index=spec.get("chosen_index"),
            capped=bool(spec.get("capped", False)),
            allocations=(None if spec.get("allocations") is None
                         else np.asarray(spec["allocations"], dtype=int)),
        )


@dataclass
class ExperimentState:
    design: Design
    model: ErrorModel
    mode: Mode
    n1: int
    run_index: int = 0
    support_index: list = field(default_factory=list)
    responses: list = field(default_factory=list)
    precisions: list = field(default_factory=list)
    eta_hat: np.ndarray = None
    h: np.ndarray = None
    g_current: np.ndarray = None
    u_current: np.ndarray = None
    capped: bool = False
    pending: RunPlan = None
    seed: int = 0

    @property
    def n(self):
        return self.design.n

    @property
    def d(self):
        return self.design.d

    @property
    def remaining(self):
        return self.n - len(self.responses)

    @property
    def counts(self):
        return np.bincount(np.asarray(self.support_index, dtype=int), minlength=self.d)

    @property
    def complete(self):
        return self.remaining == 0

    def groups(self):
        idx = np.asarray(self.support_index, dtype=int)
        y = np.asarray(self.responses, dtype=float)
        a = np.asarray(self.precisions, dtype=float) if self.precisions else None
        out = []
        for i in range(self.d):
            mask = idx == i
            out.append(SupportGroup(i, y[mask], float(self.eta_hat[i]),
                                    None if a is None else a[mask]))
        return out


def first_run_allocation(design, n1, rng=None):
    """Support indices of the first run.

    Exact ``n1 * w_i`` counts when those are integers, otherwise ``n1``
    independent draws from ``w``.
    """
    w = design.weights
    nw = n1 * w
    if np.allclose(nw, np.rint(nw), atol=1e-9):
        return np.repeat(np.arange(design.d), np.rint(nw).astype(int))
    if rng is None:
        raise AdaptiveError("a random generator is needed when n1 * w is not integral")
    return np.sort(rng.choice(design.d, size=n1, p=w))


def initialize(design, model, n1, mode=Mode.RRSD, rng=None, *, first_run=None):
    """Start an experiment and fix the first-run allocation.

    ``first_run`` optionally gives explicit per-point counts for run one
    (summing to ``n1``); otherwise :func:`first_run_allocation` is used.
    The returned state carries the first run as its pending plan.
    """
    mode = Mode(mode)
    n1 = int(n1)
    if n1 > design.n:
        raise AdaptiveError(f"n1 = {n1} exceeds n = {design.n}")
    if n1 < design.d:
        raise AdaptiveError(f"n1 = {n1} is smaller than the number of support points {design.d}")
    if np.any(design.weights <= 0):
        raise AdaptiveError("every support point needs a positive weight")
    if first_run is None and np.any(n1 * design.weights < 2):
        warnings.warn("some support points expect fewer than two first-run observations",
                      stacklevel=2)
    if first_run is not None:
        counts = np.asarray(first_run, dtype=int)
        if counts.shape != (design.d,) or counts.sum() != n1 or np.any(counts < 0):
            raise AdaptiveError(f"first_run counts {counts.tolist()} do not allocate n1 = {n1}")
        alloc = np.repeat(np.arange(design.d), counts)
    else:
        alloc = first_run_allocation(design, n1, rng)
    state = ExperimentState(design=design, model=model, mode=mode, n1=n1)
    state.eta_hat = np.full(design.d, np.nan)
    state.h = np.zeros(design.d)
    state.g_current = np.zeros(design.d)
    state.u_current = np.zeros(design.d)
    state.pending = RunPlan(size=n1, probs=design.weights.copy(), allocations=alloc)
    return state


def _check_ready(state):
    if state.run_index == 0:
        raise AdaptiveError("record the first-run responses before planning")
    if state.remaining <= 0:
        raise AdaptiveError("the experiment is complete")


def rrsd_probabilities(u, w, remaining):
    """Run size and allocation probabilities from ``u``.

    Returns ``(size, probs, capped)``.  The size is the smallest integer that
    keeps every probability non-negative, ``ceil(max_i u_i / w_i)``; when that
    exceeds the remaining budget the run spends the whole budget at ``w``.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    ratios = u / w
    top = ratios.max()
    if top <= 1e-12:
        # nothing to correct: one observation allocated at the target weights
        return 1, w.copy(), False
    # guard against u/w landing a rounding error above an integer
    size = math.ceil(top - 1e-9)
    if size > remaining:
        return int(remaining), w.copy(), True
    probs = np.clip(w - u / size, 0.0, 1.0)
    return size, probs / probs.sum(), False


def plan_next_run(state):
    """RRSD plan for the next run."""
    _check_ready(state)
    if state.mode is not Mode.RRSD:
        raise AdaptiveError("plan_next_run is for RRSD experiments; use drsd_next_point")
    size, probs, capped = rrsd_probabilities(state.u_current, state.design.weights,
                                             state.remaining)
    return RunPlan(size=size, probs=probs, capped=capped)


def drsd_next_point(state):
    """DRSD plan: one observation at ``argmax_i (w_i - u_i)``, lowest index on ties."""
    _check_ready(state)
    scores = state.design.weights - state.u_current
    # exact ties are broken towards the lowest index; rounding noise in u
    # should not decide a tie
    best = scores.max()
    chosen = int(np.flatnonzero(scores >= best - 1e-12 * max(1.0, abs(best)))[0])
    return RunPlan(size=1, chosen_index=chosen)


def next_plan(state):
    if state.complete:
        return None
    if state.mode is Mode.RRSD:
        return plan_next_run(state)
    return drsd_next_point(state)


def realize(plan, rng):
    """Sample the support indices of a plan in place and return them."""
    if plan.allocations is None:
        if plan.chosen_index is not None:
            plan.allocations = np.full(plan.size, plan.chosen_index, dtype=int)
        else:
            plan.allocations = rng.choice(len(plan.probs), size=plan.size, p=plan.probs)
    return plan.allocations


def _refresh(state, changed):
    model = state.model
    idx = np.asarray(state.support_index, dtype=int)
    y = np.asarray(state.responses, dtype=float)
    a = np.asarray(state.precisions, dtype=float) if state.precisions else None
    for i in changed:
        mask = idx == i
        if not mask.any():
            continue
        if model.family is Family.HETERO_NORMAL_GAMMA:
            state.eta_hat[i] = weighted_location(y[mask], a[mask])
        else:
            state.eta_hat[i] = mle_location(model, y[mask])
        group = SupportGroup(i, y[mask], state.eta_hat[i], None if a is None else a[mask])
        state.h[i] = relevant_info_eta(model, group)
    state.g_current = invariant_info(state.h, elemental_info(model))
    state.u_current, _ = uv_statistics(state.g_current, state.design.weights, len(y))


def record_run(state, plan, responses, precisions=None, rng=None):
    """Append one run of responses and update the group statistics.

    ``plan.allocations`` says which support point each response belongs to;
    an unrealized RRSD plan is realized with ``rng`` first.  Groups that
    received no new data keep their estimates, which is the same as refitting
    them from scratch.
    """
    if state.remaining <= 0:
        raise AdaptiveError("the experiment is complete")
    if plan.allocations is None:
        if rng is None and plan.chosen_index is None:
            raise AdaptiveError("plan has no allocations and no generator was given")
        realize(plan, rng)
    alloc = np.asarray(plan.allocations, dtype=int)
    y = np.asarray(responses, dtype=float).ravel()
    if y.size != plan.size or alloc.size != plan.size:
        raise AdaptiveError(f"plan expects {plan.size} responses, got {y.size}")
    if plan.size > state.remaining:
        raise AdaptiveError("run would exceed the total sample size")
    if np.any((alloc < 0) | (alloc >= state.d)):
        raise AdaptiveError("allocation refers to a support point that does not exist")
    if not np.all(np.isfinite(y)):
        raise AdaptiveError("responses must be finite")
    nig = state.model.family is Family.HETERO_NORMAL_GAMMA
    if nig:
        if precisions is None:
            raise AdaptiveError("hetero_normal_gamma runs need the observed precisions")
        a = np.asarray(precisions, dtype=float).ravel()
        if a.size != y.size or np.any(a <= 0):
            raise AdaptiveError("need one positive precision per response")
        state.precisions.extend(a.tolist())
    state.support_index.extend(alloc.tolist())
    state.responses.extend(y.tolist())
    state.capped = state.capped or plan.capped
    state.run_index += 1
    _refresh(state, np.unique(alloc))
    state.pending = None
    return state


# -- serialization ---------------------------------------------------------

def _payload(state):
    return {
        "schema_version": STATE_SCHEMA_VERSION,
        "design": state.design.to_dict(),
        "model": state.model.to_dict(),
        "mode": state.mode.value,
        "n1": state.n1,
        "seed": int(state.seed),
        "run_index": state.run_index,
        "support_index": [int(i) for i in state.support_index],
        "responses": [float(y) for y in state.responses],
        "precisions": [float(a) for a in state.precisions],
        "capped": bool(state.capped),
        "pending": None if state.pending is None else state.pending.to_dict(),
    }


def _digest(payload):
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def state_to_dict(state):
    """Serializable state with derived statistics and an integrity digest.

    Only the raw observations are authoritative; ``g`` and ``u`` are included
    for the reader's benefit and recomputed on load.
    """
    payload = _payload(state)
    out = dict(payload)
    out["derived"] = {
        "remaining": state.remaining,
        "eta_hat": [None if not np.isfinite(x) else float(x) for x in state.eta_hat],
        "g": [float(x) for x in state.g_current],
        "u": [float(x) for x in state.u_current],
    }
    out["digest"] = _digest(payload)
    return out


def state_from_dict(spec):
    payload = {k: v for k, v in spec.items() if k not in ("derived", "digest")}
    if "digest" in spec and spec["digest"] != _digest(payload):
        raise AdaptiveError("state file was modified after it was written (digest mismatch)")
    design = Design.from_dict(spec["design"])
    model = ErrorModel.from_dict(spec["model"])
    state = ExperimentState(design=design, model=model, mode=Mode(spec["mode"]),
                            n1=int(spec["n1"]), run_index=int(spec["run_index"]),
                            capped=bool(spec.get("capped", False)),
                            seed=int(spec.get("seed", 0)))
    state.support_index = [int(i) for i in spec["support_index"]]
    state.responses = [float(y) for y in spec["responses"]]
    state.precisions = [float(a) for a in spec.get("precisions", [])]
    if len(state.responses) > design.n or len(state.support_index) != len(state.responses):
        raise AdaptiveError("state holds an inconsistent number of observations")
    state.eta_hat = np.full(design.d, np.nan)
    state.h = np.zeros(design.d)
    state.g_current = np.zeros(design.d)
    state.u_current = np.zeros(design.d)
    if state.responses:
        _refresh(state, range(design.d))
    state.pending = None if spec.get("pending") is None else RunPlan.from_dict(spec["pending"])
    return state
