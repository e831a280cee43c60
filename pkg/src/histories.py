"""Branch tree of the natural history family and its path-tracing checks.

Choices are classical branch labels: the tree first splits on the earlier
region's (choice, outcome), then on the later region's choice, then on its
outcome. Leaf weight = policy(first choice) x policy(second choice) x the
joint-table entry, and every inner node weighs the sum of its children.

The consistency check works on the particle space: for each fixed choice
assignment the history chain operators C = P_R P_L give the decoherence
functional D(a, b) = Tr[C_a rho C_b^H], whose off-diagonal part must vanish.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import DimensionError, EmptyStart, PreconditionViolated
from .experiment import Setup, World, logical_worlds
from .formula import Atom, Formula
from .quantum import MeasurementModel, StateVector
from .report import Status, Verdict
from .semantics import Model, truth_at

logger = logging.getLogger(__name__)

CONSISTENCY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ChoicePolicy:
    """Probability of each measurement choice, per region."""
    weights: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        for per_region in self.weights:
            if any(w < 0 for w in per_region) or abs(sum(per_region) - 1.0) > 1e-12:
                raise PreconditionViolated(f"Choice weights {per_region} are not a distribution")

    @classmethod
    def uniform(cls, setup: Setup) -> ChoicePolicy:
        return cls(tuple(tuple(1.0 / len(ms) for _ in ms) for ms in setup.outcomes))

    @classmethod
    def random(cls, setup: Setup, rng: np.random.Generator) -> ChoicePolicy:
        """Full-support policy drawn from a flat Dirichlet."""
        weights = []
        for ms in setup.outcomes:
            draw = rng.dirichlet(np.ones(len(ms)))
            draw = draw / draw.sum()
            weights.append(tuple(float(x) for x in draw[:-1]) + (1.0 - float(draw[:-1].sum()),))
        return cls(tuple(weights))

    def of(self, r: int, choice: int) -> float:
        return self.weights[r][choice]


@dataclass(eq=False)
class BranchNode:
    atom: Optional[Atom]                # None at the root
    depth: int
    weight: float = 0.0
    children: List[BranchNode] = field(default_factory=list)
    parent: Optional[BranchNode] = field(default=None, repr=False)
    world: Optional[World] = None       # leaves only
    probability: float = 0.0            # leaves only: joint-table entry

    @property
    def label(self) -> str:
        return self.atom.name if self.atom else 'root'

    def leaves(self) -> Iterator[BranchNode]:
        if not self.children:
            yield self
        for child in self.children:
            yield from child.leaves()

    def ancestor(self, depth: int) -> BranchNode:
        node = self
        while node.depth > depth:
            node = node.parent
        return node


@dataclass
class BranchTree:
    model: Model
    policy: ChoicePolicy
    root: BranchNode

    @property
    def setup(self) -> Setup:
        return self.model.setup

    def level(self, depth: int) -> List[BranchNode]:
        nodes = [self.root]
        for _ in range(depth):
            nodes = [c for n in nodes for c in n.children]
        return nodes

    def leaves(self) -> List[BranchNode]:
        return list(self.root.leaves())

    def possible(self, leaf: BranchNode) -> bool:
        """Positive policy weight and a non-null joint probability."""
        return leaf.weight > 0 and leaf.probability > self.model.table.null_tolerance

    def leaf_label(self, leaf: BranchNode) -> str:
        return self.setup.format_world(leaf.world)

    def render(self) -> str:
        lines = []

        def visit(node: BranchNode, indent: int):
            lines.append(f"{'  ' * indent}{node.label}  {node.weight:.6f}")
            for child in node.children:
                visit(child, indent + 1)

        for child in self.root.children:
            visit(child, 0)
        return '\n'.join(lines)

    def leaf_frame(self) -> pd.DataFrame:
        return pd.DataFrame.from_records([
            {'leaf': self.leaf_label(leaf), 'weight': leaf.weight,
             'probability': leaf.probability, 'possible': self.possible(leaf)}
            for leaf in self.leaves()])


def build_family(m: Model, policy: Optional[ChoicePolicy] = None) -> BranchTree:
    """Tree of (5.1) first-region pairs, (5.2) second choices and (5.3) second outcomes."""
    if m.table is None:
        raise PreconditionViolated("Building the history tree needs the joint table")
    if len(m.setup.regions) != 2:
        raise PreconditionViolated("The history tree is built for two regions")
    setup = m.setup
    policy = policy or ChoicePolicy.uniform(setup)
    first, second = setup.regions

    root = BranchNode(None, 0)
    for c1, o1 in setup.region_pairs(0):
        n1 = BranchNode(Atom(first, c1 + 1, setup.labels(first, c1 + 1)[o1]), 1, parent=root)
        root.children.append(n1)
        for c2, labels in enumerate(setup.outcomes[1]):
            n2 = BranchNode(Atom(second, c2 + 1), 2, parent=n1)
            n1.children.append(n2)
            for o2, sign in enumerate(labels):
                w = World((c1, c2), (o1, o2))
                p = m.table[w]
                leaf = BranchNode(Atom(second, c2 + 1, sign), 3, parent=n2, world=w, probability=p,
                                  weight=policy.of(0, c1) * policy.of(1, c2) * p)
                n2.children.append(leaf)
            n2.weight = sum(leaf.weight for leaf in n2.children)
        n1.weight = sum(n2.weight for n2 in n1.children)
    root.weight = sum(n1.weight for n1 in root.children)
    logger.debug("History tree: %d leaves, total weight %.12f",
                 sum(1 for _ in root.leaves()), root.weight)
    return BranchTree(m, policy, root)


# ---------------------------------------------------------------------------
# Projector families and the decoherence functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class History:
    choices: Tuple[int, ...]
    labels: Tuple[str, ...]
    chain: Tuple[np.ndarray, ...]       # earliest first

    def operator(self) -> np.ndarray:
        c = np.eye(self.chain[0].shape[0], dtype=complex)
        for p in self.chain:
            c = p @ c
        return c


@dataclass(frozen=True)
class HistoryFamily:
    rho: np.ndarray
    histories: Tuple[History, ...]

    def groups(self) -> Dict[Tuple[int, ...], List[History]]:
        grouped: Dict[Tuple[int, ...], List[History]] = {}
        for h in self.histories:
            grouped.setdefault(h.choices, []).append(h)
        return grouped


def natural_family(state: StateVector, measurements: MeasurementModel, setup: Setup) -> HistoryFamily:
    """One two-step chain [P_first, P_second] per world."""
    first, second = setup.regions
    histories = []
    for w in logical_worlds(setup):
        a1, a2 = (setup.outcome_atom(w, r) for r in (first, second))
        chain = (measurements.get(first, a1.measurement, a1.sign),
                 measurements.get(second, a2.measurement, a2.sign))
        histories.append(History(w.choices, (a1.name, a2.name), chain))
    return HistoryFamily(state.density(), tuple(histories))


def injected_family(state: StateVector, measurements: MeasurementModel, setup: Setup) -> HistoryFamily:
    """Second region measured twice in a row, R2 then R1, within one history slot.

    R1 and R2 do not commute, so this family is not consistent.
    """
    first, second = setup.regions
    histories = []
    for c1, o1 in setup.region_pairs(0):
        m1 = c1 + 1
        s1 = setup.labels(first, m1)[o1]
        for s2 in setup.labels(second, 2):
            for s3 in setup.labels(second, 1):
                chain = (measurements.get(first, m1, s1), measurements.get(second, 2, s2),
                         measurements.get(second, 1, s3))
                histories.append(History((c1,), (f"{first}{m1}{s1}", f"{second}2{s2}",
                                                  f"{second}1{s3}"), chain))
    return HistoryFamily(state.density(), tuple(histories))


def decoherence_functional(rho: np.ndarray, histories: Sequence[History]) -> np.ndarray:
    """D[a, b] = Tr[C_a rho C_b^H]."""
    ops = [h.operator() for h in histories]
    for op in ops:
        if op.shape != rho.shape:
            raise DimensionError(f"History operator {op.shape} does not act on a {rho.shape} state")
    d = np.empty((len(ops), len(ops)), dtype=complex)
    for i, ca in enumerate(ops):
        for j, cb in enumerate(ops):
            d[i, j] = np.trace(ca @ rho @ cb.conj().T)
    return d


def check_consistency(family: HistoryFamily) -> float:
    """Largest |Re D(a, b)|, a != b, over every choice subtree."""
    worst = 0.0
    for histories in family.groups().values():
        d = decoherence_functional(family.rho, histories)
        off = np.abs(d.real - np.diag(np.diag(d.real)))
        worst = max(worst, float(off.max(initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# Path tracing
# ---------------------------------------------------------------------------

def _choice_depth(tree: BranchTree, region: str) -> int:
    # First region decides at depth 1, second at depth 2.
    return 1 if tree.setup.region_index(region) == 0 else 2


def matching_leaves(tree: BranchTree, start: Formula) -> List[BranchNode]:
    return [leaf for leaf in tree.leaves()
            if tree.possible(leaf) and truth_at(tree.model, leaf.world, start)]


def trace_pivot_path(tree: BranchTree, start: Formula, pivot: str,
                     alternative: Atom) -> List[BranchNode]:
    """Back from each start leaf to just before the pivot choice, then down `alternative`.

    Returns the possible leaves reached, in tree order.
    """
    starts = matching_leaves(tree, start)
    if not starts:
        raise EmptyStart(f"No possible leaf satisfies {start}")
    depth = _choice_depth(tree, pivot)
    reached: Dict[int, BranchNode] = {}
    for leaf in starts:
        ancestor = leaf.ancestor(depth - 1)
        for branch in ancestor.children:
            if branch.atom.choice() != alternative:
                continue
            for end in branch.leaves():
                if tree.possible(end):
                    reached[id(end)] = end
    order = {id(leaf): i for i, leaf in enumerate(tree.leaves())}
    return sorted(reached.values(), key=lambda leaf: order[id(leaf)])


@dataclass(frozen=True)
class Line5Trace:
    start: Tuple[BranchNode, ...]
    reachable: Tuple[BranchNode, ...]
    forced: bool                # every reachable leaf is R1-
    start_in_l2_plus: bool      # no L2- & R2+ leaf among the starts


def trace_line5(tree: BranchTree) -> Line5Trace:
    m = tree.model
    start = m.parse('L2 & R2 & R2+')
    try:
        reachable = trace_pivot_path(tree, start, 'R', Atom('R', 1))
    except EmptyStart:
        return Line5Trace((), (), True, True)
    starts = matching_leaves(tree, start)
    target, l2_plus = m.parse('R1 & R1-'), m.parse('L2+')
    return Line5Trace(
        start=tuple(starts),
        reachable=tuple(reachable),
        forced=all(truth_at(m, leaf.world, target) for leaf in reachable),
        start_in_l2_plus=all(truth_at(m, leaf.world, l2_plus) for leaf in starts),
    )


def verify_histories_line5(tree: BranchTree) -> bool:
    """Every R1 path back from an L2 & R2 & R2+ leaf ends in R1-."""
    return trace_line5(tree).forced


@dataclass(frozen=True)
class ParadoxTrace:
    start: Tuple[BranchNode, ...]
    start_in_r2_plus: bool
    reachable: Tuple[BranchNode, ...]
    paradox_leaves: Tuple[BranchNode, ...]      # reachable R1+ leaves

    @property
    def reproduced(self) -> bool:
        return bool(self.start) and self.start_in_r2_plus and bool(self.paradox_leaves)

    @property
    def verdict(self) -> str:
        return 'CONTRADICTION-REPRODUCED' if self.reproduced else 'NOT-REPRODUCED'


def verify_5_4_contradiction(tree: BranchTree) -> ParadoxTrace:
    """From L1 & R2 & L1- (hence R2+), the R1 path still reaches R1+ leaves."""
    m = tree.model
    start = m.parse('L1 & R2 & L1-')
    try:
        reachable = trace_pivot_path(tree, start, 'R', Atom('R', 1))
    except EmptyStart:
        return ParadoxTrace((), False, (), ())
    starts = matching_leaves(tree, start)
    r2_plus, r1_plus = m.parse('R2+'), m.parse('R1+')
    return ParadoxTrace(
        start=tuple(starts),
        start_in_r2_plus=all(truth_at(m, leaf.world, r2_plus) for leaf in starts),
        reachable=tuple(reachable),
        paradox_leaves=tuple(leaf for leaf in reachable if truth_at(m, leaf.world, r1_plus)),
    )


def history_verdicts(tree: BranchTree) -> List[Verdict]:
    """Tree shape, line 5 and the (5.4) tension."""
    setup = tree.setup
    sizes = [len(tree.level(d)) for d in (1, 2, 3)]
    total = tree.root.weight
    verdicts = [Verdict('histories.tree', Status.PASS if abs(total - 1.0) <= 1e-9 else Status.FAIL,
                        f"{sizes[0]}/{sizes[1]}/{sizes[2]} nodes, total weight {total:.12f}")]

    line5 = trace_line5(tree)
    verdicts.append(Verdict('histories.line5', Status.PASS if line5.forced else Status.FAIL,
                            f"{len(line5.start)} start leaves, {len(line5.reachable)} reached"))
    verdicts.append(Verdict('histories.line5-start', Status.PASS if line5.start_in_l2_plus else Status.FAIL,
                            'starts lie in L2+' if line5.start_in_l2_plus else 'an L2- & R2+ leaf starts'))

    paradox = verify_5_4_contradiction(tree)
    if paradox.reproduced:
        leaf = paradox.paradox_leaves[0]
        detail = f"{paradox.verdict}: {setup.format_world(leaf.world)} weight {leaf.weight:.6f}"
    else:
        detail = paradox.verdict
    verdicts.append(Verdict('histories.5.4', Status.PASS if paradox.reproduced else Status.FAIL, detail))
    return verdicts


def policy_independent(m: Model, rng: np.random.Generator, trials: int = 5) -> Verdict:
    """Line-5 and (5.4) outcomes agree across random full-support policies."""
    baseline_tree = build_family(m)
    baseline = (verify_histories_line5(baseline_tree), verify_5_4_contradiction(baseline_tree).verdict)
    same = 0
    for _ in range(trials):
        tree = build_family(m, ChoicePolicy.random(m.setup, rng))
        same += (verify_histories_line5(tree), verify_5_4_contradiction(tree).verdict) == baseline
    return Verdict('histories.policy-independence', Status.PASS if same == trials else Status.FAIL,
                   f"{same}/{trials} random policies agree")
