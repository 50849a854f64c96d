"""Distributed minimax localization with certified shrinking radii.

The algorithm runs in three phases on each sensor:

1. Bound propagation.  Anchors flood their positions with a hop counter;
   a sensor without a direct measurement to anchor k chains its tightest
   neighbor information along the shortest hop path into a distance
   interval [lower_ik, upper_ik] (triangle inequality both ways).

2. Initial estimate.  Each sensor solves a small SDP over its anchor
   distance intervals alone.  The optimal value is a certified squared
   radius: the true position lies within sqrt(radius_sq) of the estimate
   whenever every measurement error is within the error bound.

3. Iterative refinement.  In synchronous rounds, every not-yet-localized
   sensor treats its neighbors' current estimates as anchors, intersects
   the resulting annuli with its own certified ball, and re-centers.  The
   ball constraint alone guarantees the new radius never exceeds the old
   one (the new program admits the previous center as a feasible dual
   point with value radius_sq), so the per-node radii decrease
   monotonically and the network-wide RMSE upper bound never increases.

Each per-node program here is the single-sensor specialization of the
network dual solved by :mod:`minmaxloc.central`, with the neighbor ball
constraint added.  The multiplier recovery divides by the normalization
kappa = alpha + sum(psi_j - phi_j), which every feasible point keeps >= 1.

All rounds are Jacobi: updates at round tau+1 read only round-tau states,
so any execution order inside a round produces the identical trace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .model import Edge, IntervalBound, NetworkScenario, Point2, build_feasibility_intervals
from .sdp import Block, SdpProblem, SolveStatus, SolverConfig, scalar_block, solve


class UnreachableAnchor(RuntimeError):
    """A sensor never acquired a distance bound to some anchor."""


class DegenerateEstimate(RuntimeError):
    """Multiplier recovery hit a vanishing normalization denominator."""


@dataclass(frozen=True)
class BoundEntry:
    """Distance interval from one sensor to one anchor plus its hop count."""

    lower: float
    upper: float
    hops: int

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper:
            raise ValueError(f"invalid bound [{self.lower}, {self.upper}]")
        if self.hops < 1:
            raise ValueError("hop count must be >= 1")


BoundTable = Dict[Tuple[int, int], BoundEntry]


@dataclass
class NodeState:
    """Per-sensor algorithm state after some round.

    ``radius_sq`` is the certified squared error bound, clamped to be
    non-increasing across rounds; ``raw_radius_sq`` keeps the solver's
    pre-clamp optimum so the monotonicity guarantee can be audited without
    the clamp hiding a violation.
    """

    estimate: Point2
    radius_sq: float
    localized: bool
    iteration: int
    raw_radius_sq: float

    def __post_init__(self):
        if self.radius_sq < 0.0:
            raise ValueError("radius_sq must be nonnegative")


@dataclass(frozen=True)
class DisMinMaxConfig:
    """Knobs for the distributed run.

    ``epsilon`` declares a node localized once its certified squared radius
    stops shrinking by more than this.  The per-node solver accepts dual
    feasibility at 1e-6 rather than the solver default: symmetric anchor
    layouts put these tiny programs on degenerate faces where pushing the
    dual residual to 1e-8 exceeds what finite precision delivers, and every
    consumer of the certificates works at 1e-6 anyway.
    """

    epsilon: float = 1e-6
    max_rounds: int = 200
    solver: SolverConfig = SolverConfig(feas_tol=1e-6)

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")


def _interval(bounds: Mapping[Edge, IntervalBound], a: int, b: int) -> IntervalBound:
    try:
        return bounds[(a, b)]
    except KeyError:
        return bounds[(b, a)]


def propagate_distance_bounds(
    scenario: NetworkScenario, bounds: Mapping[Edge, IntervalBound]
) -> BoundTable:
    """Hop-count flooding of per-anchor distance intervals.

    Runs synchronous relaxation rounds until the whole table stops
    changing.  A sensor adjacent to anchor k keeps its measured interval at
    hop count 1.  Otherwise it picks the neighbor with the fewest hops to k
    (smallest id on ties) and chains intervals through the triangle
    inequality.  Anchors participate as relays with exact pairwise
    distances at hop count 1, since every anchor position is known
    network-wide after the flood.
    """
    anchor_ids = sorted(scenario.anchors)
    sensor_neighbors = {i: scenario.neighbors(i) for i in scenario.sensors}

    # (node, anchor) -> entry, where node may be a sensor or an anchor.
    table: Dict[Tuple[int, int], BoundEntry] = {}
    for m in anchor_ids:
        for k in anchor_ids:
            if m == k:
                continue
            am, ak = scenario.anchors[m], scenario.anchors[k]
            d = math.hypot(am[0] - ak[0], am[1] - ak[1])
            table[(m, k)] = BoundEntry(d, d, 1)
    direct: Dict[Tuple[int, int], BoundEntry] = {}
    for (i, k) in scenario.anchor_edges:
        b = bounds[(i, k)]
        direct[(i, k)] = BoundEntry(b.lower, b.upper, 1)
    table.update(direct)

    while True:
        updated = dict(table)
        for i in scenario.sensors:
            for k in anchor_ids:
                if (i, k) in direct:
                    continue
                candidates = [
                    (table[(j, k)].hops, j)
                    for j in sensor_neighbors[i]
                    if (j, k) in table
                ]
                if not candidates:
                    continue
                hops_jk, j = min(candidates)
                via = table[(j, k)]
                edge = _interval(bounds, i, j)
                lower = max(edge.lower - via.upper, via.lower - edge.upper, 0.0)
                updated[(i, k)] = BoundEntry(lower, edge.upper + via.upper, hops_jk + 1)
        if updated == table:
            break
        table = updated

    result: BoundTable = {}
    for i in scenario.sensors:
        for k in anchor_ids:
            if (i, k) not in table:
                raise UnreachableAnchor(
                    f"sensor {i} has no path to anchor {k}; the graph is not connected"
                )
            result[(i, k)] = table[(i, k)]
    return result


def _chebyshev_dual(
    references: List[Tuple[Point2, float, float]],
    ball: Optional[Tuple[Point2, float]],
) -> Tuple[SdpProblem, int]:
    """Single-node dual SDP shared by the initial and iterate solves.

    ``references`` holds (position, lower, upper) triples; ``ball`` is an
    optional (center, radius_sq) own-uncertainty constraint.  Variables are
    [t, (alpha,) lower multiplier and upper multiplier per reference]; the
    return value includes the index where reference multipliers start.
    """
    has_ball = ball is not None
    first_ref = 2 if has_ball else 1
    m = first_ref + 2 * len(references)
    c = np.zeros(m)
    c[0] = 1.0

    lmi: Dict[int, List[Tuple[int, int, float]]] = {0: [(2, 2, 1.0)]}
    norm: Dict[int, float] = {}
    if has_ball:
        (bx, by), r2 = ball
        c[1] = r2 - (bx * bx + by * by)
        lmi[1] = [(0, 0, 1.0), (1, 1, 1.0), (2, 0, bx), (2, 1, by)]
        norm[1] = 1.0
    for e, ((px, py), lo, up) in enumerate(references):
        lo_k = first_ref + 2 * e
        up_k = first_ref + 2 * e + 1
        sq = px * px + py * py
        c[lo_k] = sq - lo * lo
        c[up_k] = up * up - sq
        lmi[lo_k] = [(0, 0, -1.0), (1, 1, -1.0), (2, 0, -px), (2, 1, -py)]
        lmi[up_k] = [(0, 0, 1.0), (1, 1, 1.0), (2, 0, px), (2, 1, py)]
        norm[lo_k] = -1.0
        norm[up_k] = 1.0

    blocks = [Block(3, [], lmi), scalar_block(-1.0, norm)]
    for k in range(1, m):
        blocks.append(scalar_block(0.0, {k: 1.0}))
    return SdpProblem(num_vars=m, objective=c, blocks=blocks), first_ref


def _recover_center(
    x: np.ndarray,
    references: List[Tuple[Point2, float, float]],
    ball: Optional[Tuple[Point2, float]],
    first_ref: int,
) -> Tuple[Point2, float]:
    """Multiplier-weighted center and the normalization kappa."""
    kappa = 0.0
    gx = gy = 0.0
    if ball is not None:
        (bx, by), _ = ball
        kappa += x[1]
        gx += x[1] * bx
        gy += x[1] * by
    for e, ((px, py), _, _) in enumerate(references):
        w = x[first_ref + 2 * e + 1] - x[first_ref + 2 * e]
        kappa += w
        gx += w * px
        gy += w * py
    if abs(kappa) < 1e-12:
        raise DegenerateEstimate(f"normalization denominator {kappa!r} vanishes")
    return (gx / kappa, gy / kappa), kappa


def initial_estimate(
    sensor: int,
    table: BoundTable,
    anchors: Mapping[int, Point2],
    config: Optional[DisMinMaxConfig] = None,
) -> NodeState:
    """First position fix from the propagated anchor distance intervals."""
    cfg = config or DisMinMaxConfig()
    refs = [
        (anchors[k], table[(sensor, k)].lower, table[(sensor, k)].upper)
        for k in sorted(anchors)
    ]
    problem, first_ref = _chebyshev_dual(refs, ball=None)
    sol = solve(problem, cfg.solver)
    if sol.status != SolveStatus.OPTIMAL:
        raise RuntimeError(
            f"initial estimate for sensor {sensor} failed: {sol.status.value}"
        )
    center, _ = _recover_center(sol.x, refs, None, first_ref)
    value = max(sol.objective_value, 0.0)
    return NodeState(
        estimate=center,
        radius_sq=value,
        localized=False,
        iteration=0,
        raw_radius_sq=value,
    )


def iterate_node(
    sensor: int,
    neighbor_states: Mapping[int, NodeState],
    own: NodeState,
    bounds: Mapping[Edge, IntervalBound],
    config: Optional[DisMinMaxConfig] = None,
) -> NodeState:
    """One refinement round for one sensor.

    Intersects the sensor's certified ball with annuli around each
    neighbor's current estimate and re-centers on the relaxed Chebyshev
    center of that region.  Each annulus is widened by the neighbor's own
    certified radius: the measured interval constrains the distance to the
    neighbor's true position, and the estimate can sit anywhere within
    that radius of it.  Without the widening the region can lose the true
    position entirely (neighbor error shifts the annulus off it), which
    both voids the certificate and empties the region when intervals are
    tight.  Any solver trouble makes the node keep its previous state for
    the round; the certified radius is clamped so it never grows through
    roundoff.
    """
    if not neighbor_states:
        raise ValueError(f"sensor {sensor} has no neighbors to iterate against")
    cfg = config or DisMinMaxConfig()
    if own.radius_sq <= cfg.epsilon:
        # The radius cannot grow, so any solve outcome would change it by
        # at most its current value; the node is localized by definition.
        # Skipping the solve also avoids a singleton ball constraint that
        # leaves the solver nothing strictly feasible to work with.
        return replace(
            own,
            iteration=own.iteration + 1,
            localized=True,
            raw_radius_sq=own.radius_sq,
        )
    refs = []
    for j in sorted(neighbor_states):
        b = _interval(bounds, sensor, j)
        slack = math.sqrt(max(neighbor_states[j].radius_sq, 0.0))
        refs.append(
            (neighbor_states[j].estimate, max(b.lower - slack, 0.0), b.upper + slack)
        )
    ball = (own.estimate, own.radius_sq)

    problem, first_ref = _chebyshev_dual(refs, ball)
    sol = solve(problem, cfg.solver)
    keep = replace(
        own,
        iteration=own.iteration + 1,
        localized=False,
        raw_radius_sq=own.radius_sq,
    )
    if sol.status != SolveStatus.OPTIMAL:
        return keep
    try:
        center, kappa = _recover_center(sol.x, refs, ball, first_ref)
    except DegenerateEstimate:
        return keep
    if kappa < 0.5:
        # Feasible multipliers satisfy kappa >= 1; anything materially
        # below means the solver's answer cannot be trusted this round.
        return keep

    raw = max(sol.objective_value, 0.0)
    clamped = min(raw, own.radius_sq)
    return NodeState(
        estimate=center,
        radius_sq=clamped,
        localized=abs(clamped - own.radius_sq) <= cfg.epsilon,
        iteration=own.iteration + 1,
        raw_radius_sq=raw,
    )


@dataclass
class RoundRecord:
    round_index: int
    states: Dict[int, NodeState]
    rmse_upper_bound: float
    messages: int


@dataclass
class DisMinMaxResult:
    rounds: List[RoundRecord]
    converged: bool
    table: BoundTable = field(repr=False)


def _rmse_upper_bound(states: Mapping[int, NodeState]) -> float:
    return math.sqrt(sum(s.radius_sq for s in states.values()) / len(states))


def run_dis_minmax(
    scenario: NetworkScenario, config: Optional[DisMinMaxConfig] = None
) -> DisMinMaxResult:
    """Full distributed run: propagate, initialize, refine until localized.

    Rounds are synchronous; a localized node stops updating but its last
    estimate keeps serving neighbors.  Message accounting charges each
    active sensor two reals per sensor neighbor (its broadcast estimate);
    anchor neighbors cost nothing because their positions are already
    known after the propagation phase.
    """
    cfg = config or DisMinMaxConfig()
    bounds = build_feasibility_intervals(scenario)
    table = propagate_distance_bounds(scenario, bounds)

    states = {
        i: initial_estimate(i, table, scenario.anchors, cfg) for i in scenario.sensors
    }
    rounds = [RoundRecord(0, dict(states), _rmse_upper_bound(states), 0)]

    sensor_nbrs: Dict[int, List[int]] = {}
    anchor_nbrs: Dict[int, List[int]] = {}
    for i in scenario.sensors:
        all_nbrs = scenario.neighbors(i)
        sensor_nbrs[i] = [j for j in all_nbrs if j not in scenario.anchors]
        anchor_nbrs[i] = [j for j in all_nbrs if j in scenario.anchors]

    for tau in range(1, cfg.max_rounds + 1):
        if all(s.localized for s in states.values()):
            break
        prev = states
        states = {}
        messages = 0
        for i in scenario.sensors:
            if prev[i].localized:
                states[i] = prev[i]
                continue
            nbr_states: Dict[int, NodeState] = {}
            for j in sensor_nbrs[i]:
                nbr_states[j] = prev[j]
            for k in anchor_nbrs[i]:
                nbr_states[k] = NodeState(
                    estimate=scenario.anchors[k],
                    radius_sq=0.0,
                    localized=True,
                    iteration=tau - 1,
                    raw_radius_sq=0.0,
                )
            messages += 2 * len(sensor_nbrs[i])
            states[i] = iterate_node(i, nbr_states, prev[i], bounds, cfg)
        rounds.append(RoundRecord(tau, dict(states), _rmse_upper_bound(states), messages))

    return DisMinMaxResult(
        rounds=rounds,
        converged=all(s.localized for s in states.values()),
        table=table,
    )


def trace_to_jsonl(result: DisMinMaxResult) -> str:
    """One JSON object per round, nodes sorted by id."""
    lines = []
    for record in result.rounds:
        doc = {
            "round": record.round_index,
            "per_node": [
                {
                    "id": i,
                    "x": s.estimate[0],
                    "y": s.estimate[1],
                    "radius_sq": s.radius_sq,
                    "localized": s.localized,
                }
                for i, s in sorted(record.states.items())
            ],
            "rmse_upper_bound": record.rmse_upper_bound,
        }
        lines.append(json.dumps(doc))
    return "\n".join(lines) + "\n"
