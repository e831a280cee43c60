"""Possible-worlds semantics over the physically possible worlds.

Extensions are WorldSets. The strict conditional `A => B` is model-global:
its extension is every physical world when {A} is a subset of {B}, and empty
otherwise. `C []-> D` holds at W when D holds at every physical world that
makes the choice C and coincides with W outside the forward cone of the
region where C conflicts with W.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    FormulaInvalid, IdentityViolated, NotRudimentary, PreconditionViolated, SideConditionViolated,
)
from .experiment import (
    CausalStructure, Setup, World, WorldSet, agrees_outside_cone, atom_truth, conflict_region,
    localized_outside, logical_worlds,
)
from .formula import (
    And, Atom, Counterfactual, Formula, MaterialCond, Not, Or, StrictCond,
    conjoin, conjuncts, is_rudimentary, parse, random_formula,
)
from .quantum import JointTable, physically_possible_worlds
from .report import Status, Verdict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Model:
    setup: Setup
    causal: CausalStructure
    phys: WorldSet
    table: Optional[JointTable] = field(default=None, compare=False, repr=False)
    # (world, choice atom) -> accessible worlds
    _accessible: Dict[Tuple[World, Atom], WorldSet] = field(
        default_factory=dict, compare=False, repr=False)

    def parse(self, text: str) -> Formula:
        return parse(text, self.setup)

    def relaxed(self, phys: WorldSet) -> Model:
        """Same setup and cones over a different set of possible worlds."""
        return dataclasses.replace(self, phys=phys, _accessible={})


def build_model(setup: Setup, causal: CausalStructure, table: JointTable) -> Model:
    """Model whose possible worlds are the non-null entries of the table."""
    phys = physically_possible_worlds(setup, table)
    for choices, worlds in table.rows().items():
        if not any(w in phys for w in worlds):
            names = ','.join(f"{r}{c + 1}" for r, c in zip(setup.regions, choices))
            raise PreconditionViolated(f"No physically possible world for choices {names}")
    logger.info("Model: %d of %d worlds physically possible", len(phys), setup.world_count)
    return Model(setup, causal, phys, table)


def _choice(c: Formula) -> Atom:
    if not (isinstance(c, Atom) and c.is_choice):
        raise FormulaInvalid(f"Counterfactual antecedent {c} is not a single choice atom")
    return c


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def truth_at(m: Model, w: World, f: Formula) -> bool:
    """Classical truth of a rudimentary formula at one world."""
    if isinstance(f, Atom):
        return atom_truth(m.setup, w, f)
    if isinstance(f, Not):
        return not truth_at(m, w, f.operand)
    if isinstance(f, And):
        return truth_at(m, w, f.left) and truth_at(m, w, f.right)
    if isinstance(f, Or):
        return truth_at(m, w, f.left) or truth_at(m, w, f.right)
    if isinstance(f, MaterialCond):
        return (not truth_at(m, w, f.antecedent)) or truth_at(m, w, f.consequent)
    raise NotRudimentary(f"{f} is not rudimentary; evaluate it with extension()")


def extension(m: Model, f: Formula) -> WorldSet:
    """Physically possible worlds at which f is true."""
    if isinstance(f, Atom):
        return WorldSet.of(m.setup, (w for w in m.phys if atom_truth(m.setup, w, f)))
    if isinstance(f, Not):
        return m.phys - extension(m, f.operand)
    if isinstance(f, And):
        return extension(m, f.left) & extension(m, f.right)
    if isinstance(f, Or):
        return extension(m, f.left) | extension(m, f.right)
    if isinstance(f, MaterialCond):
        return (m.phys - extension(m, f.antecedent)) | extension(m, f.consequent)
    if isinstance(f, StrictCond):
        return m.phys if holds_strict(m, f.antecedent, f.consequent) else WorldSet.empty(m.setup)
    return counterfactual_set(m, _choice(f.antecedent), extension(m, f.consequent))


def true_at(m: Model, w: World, f: Formula) -> bool:
    """Truth of any formula at a physical world."""
    return w in extension(m, f)


def holds(m: Model, f: Formula) -> bool:
    """f is true at every physically possible world."""
    return extension(m, f) == m.phys


def holds_strict(m: Model, a: Formula, b: Formula) -> bool:
    """A => B, computed both as {A} & {~B} = {} and as {A} <= {B}."""
    ext_a, ext_b = extension(m, a), extension(m, b)
    disjoint = not (ext_a & (m.phys - ext_b))
    subset = ext_a <= ext_b
    if disjoint != subset:
        raise IdentityViolated(f"Set forms of {a} => {b} disagree")
    return subset


def accessible_worlds(m: Model, w: World, c: Atom) -> WorldSet:
    """Physical C-worlds that coincide with w outside V+(C/w)."""
    key = (w, c)
    cached = m._accessible.get(key)
    if cached is None:
        source = conflict_region(m.setup, w, c)
        cached = WorldSet.of(m.setup, (
            v for v in m.phys
            if atom_truth(m.setup, v, c) and agrees_outside_cone(m.setup, v, w, source, m.causal)))
        m._accessible[key] = cached
    return cached


def counterfactual_set(m: Model, c: Atom, target: WorldSet) -> WorldSet:
    """{W : accessible(W, C) <= target}, the set form of C []-> D."""
    return WorldSet.of(m.setup, (w for w in m.phys if accessible_worlds(m, w, c) <= target))


def eval_counterfactual(m: Model, w: World, c: Atom, d: Formula) -> bool:
    """C []-> D at w; vacuously true when nothing is accessible."""
    return accessible_worlds(m, w, _choice(c)) <= extension(m, d)


def _counterfactual_pointwise(m: Model, w: World, c: Atom, d: Formula) -> bool:
    # Direct reading: D at every V with C at V and V = W outside V+(C/W).
    source = conflict_region(m.setup, w, c)
    for v in m.phys:
        if atom_truth(m.setup, v, c) and agrees_outside_cone(m.setup, v, w, source, m.causal):
            if not true_at(m, v, d):
                return False
    return True


# ---------------------------------------------------------------------------
# Eq. (2.1) and its vacuity pitfall
# ---------------------------------------------------------------------------

def eq_2_1_instance(m: Model, a: Formula, b: Formula, c: Formula) -> bool:
    """Both sides of Eq. (2.1) agree; C may contain counterfactuals."""
    return holds_strict(m, a, MaterialCond(b, c)) == holds_strict(m, And(a, b), c)


def check_eq_2_1(m: Model, a: Formula, b: Formula, c: Formula) -> bool:
    """[A => (B -> C)] and [(A & B) => C] have the same truth value."""
    for f in (a, b, c):
        if not is_rudimentary(f):
            raise NotRudimentary(f"{f} is not rudimentary")
    return eq_2_1_instance(m, a, b, c)


def vacuity_demo(m: Model, b: Formula, rng: np.random.Generator, trials: int,
                 atoms: Optional[Sequence[Atom]] = None) -> List[Verdict]:
    """A => (B -> C) with A = ~B (or ~B & D) holds for every C tried.

    Also replays the mutually exclusive choices case: with R1 and R2
    exclusive, (L2 & R2 & L2+) => (R1 -> X) holds whatever X is.
    """
    atoms = list(atoms or _outcome_and_choice_atoms(m.setup))
    plain = with_d = exclusive = 0
    antecedent = m.parse('L2 & R2 & L2+') if m.setup.declares(Atom('R', 1)) else None
    for _ in range(trials):
        c = random_formula(rng, atoms, depth=3)
        d = random_formula(rng, atoms, depth=2)
        plain += holds_strict(m, Not(b), MaterialCond(b, c))
        with_d += holds_strict(m, And(Not(b), d), MaterialCond(b, c))
        if antecedent is not None:
            exclusive += holds_strict(m, antecedent, MaterialCond(Atom('R', 1), c))
    verdicts = [
        Verdict('vacuity.not-b', Status.PASS if plain == trials else Status.FAIL,
                f"{plain}/{trials} random C"),
        Verdict('vacuity.not-b-and-d', Status.PASS if with_d == trials else Status.FAIL,
                f"{with_d}/{trials} random C, D"),
    ]
    if antecedent is not None:
        verdicts.append(Verdict('vacuity.exclusive-choices',
                                Status.PASS if exclusive == trials else Status.FAIL,
                                f"{exclusive}/{trials} random final clauses"))
    return verdicts


def _outcome_and_choice_atoms(setup: Setup) -> List[Atom]:
    atoms = []
    for r, region in enumerate(setup.regions):
        for mi, labels in enumerate(setup.outcomes[r], start=1):
            atoms.append(Atom(region, mi))
            atoms.extend(Atom(region, mi, s) for s in labels if s in ('+', '-'))
    return atoms


def fuzz_eq_2_1(m: Model, rng: np.random.Generator, trials: int) -> Verdict:
    atoms = _outcome_and_choice_atoms(m.setup)
    agree = sum(check_eq_2_1(m, *(random_formula(rng, atoms, depth=3) for _ in range(3)))
                for _ in range(trials))
    status = Status.PASS if agree == trials else Status.FAIL
    return Verdict('eq.2.1', status, f"{agree}/{trials} random triples agree")


# ---------------------------------------------------------------------------
# LOC1 lemmas
# ---------------------------------------------------------------------------

def _require_outside(m: Model, b: Formula, c: Atom) -> None:
    if not localized_outside(b, c.region, m.causal):
        raise SideConditionViolated(f"{b} is not localized outside the forward cone of {c}")


def loc1c_consequent(m: Model, a: Formula, c: Atom) -> Formula:
    """C together with the conjuncts of A that lie outside V+(C), in A's order."""
    parts = []
    for part in conjuncts(a):
        if localized_outside(part, c.region, m.causal):
            parts.append(part)
        elif c not in parts:
            parts.append(c)
    if c not in parts:
        parts.append(c)
    return conjoin(parts)


def check_loc1c(m: Model, a: Formula, c: Atom) -> bool:
    """A => (C []-> D) for D built by loc1c_consequent, in formula and set form."""
    d = loc1c_consequent(m, a, c)
    formula_form = holds_strict(m, a, Counterfactual(c, d))
    set_form = extension(m, a) <= counterfactual_set(m, c, extension(m, d))
    if formula_form != set_form:
        raise IdentityViolated(f"LOC1c forms disagree for A={a}, C={c}")
    return formula_form


def check_loc1d(m: Model, a: Formula, b: Formula, c: Atom, d: Formula) -> bool:
    """[(A & B) => (C []-> D)] == [A => (C []-> (B -> D))], with both set forms."""
    _require_outside(m, b, c)
    ext_a, ext_b, ext_d = extension(m, a), extension(m, b), extension(m, d)
    not_b = m.phys - ext_b
    forms = (
        holds_strict(m, And(a, b), Counterfactual(c, d)),
        holds_strict(m, a, Counterfactual(c, MaterialCond(b, d))),
        ext_a & ext_b <= counterfactual_set(m, c, ext_d),
        ext_a <= counterfactual_set(m, c, ext_d | not_b),
        ext_a & ext_b <= counterfactual_set(m, c, ext_d | not_b),
    )
    return len(set(forms)) == 1


def check_loc1e(m: Model, a: Formula, b: Formula, c: Atom, d: Formula) -> bool:
    """[(A & B) => (C []-> B & D)] == [(A & B) => (C []-> D)]."""
    _require_outside(m, b, c)
    ext_ab = extension(m, a) & extension(m, b)
    forms = (
        holds_strict(m, And(a, b), Counterfactual(c, And(b, d))),
        holds_strict(m, And(a, b), Counterfactual(c, d)),
        ext_ab <= counterfactual_set(m, c, extension(m, d) & extension(m, b)),
    )
    return len(set(forms)) == 1


def check_loc1f(m: Model, b: Formula, c: Atom, d: Formula) -> bool:
    """[B => (C -> D)] entails [B => (C []-> D)]."""
    _require_outside(m, b, c)
    ext_b = extension(m, b)
    strict_form = holds_strict(m, b, MaterialCond(c, d))
    set_form = ext_b <= (extension(m, d) | (m.phys - extension(m, c)))
    if strict_form != set_form:
        raise IdentityViolated(f"LOC1f premise forms disagree for B={b}, C={c}")
    conclusion = ext_b <= counterfactual_set(m, c, extension(m, d))
    return (not strict_form) or conclusion


DEFAULT_POOL = ('L1', 'L2+', '~L1-', 'L1 & L1-', 'R2 & R2+', 'R1-', 'L2 | R1', 'L1- -> R1-')


def _choice_atoms(setup: Setup) -> List[Atom]:
    return [Atom(region, mi) for r, region in enumerate(setup.regions)
            for mi in range(1, len(setup.outcomes[r]) + 1)]


def lemma_instances(m: Model, pool: Iterable[str] = DEFAULT_POOL):
    """(A, B, C, D) with B localized outside V+(C), in pool order."""
    formulas = [m.parse(text) for text in pool]
    for c in _choice_atoms(m.setup):
        outside = [b for b in formulas if localized_outside(b, c.region, m.causal)]
        for a, b, d in itertools.product(formulas, outside, formulas):
            yield a, b, c, d


def verify_loc1_lemmas(m: Model, pool: Iterable[str] = DEFAULT_POOL) -> List[Verdict]:
    """LOC1c-f on the instances used in the proof and on the whole pool."""
    pool = tuple(pool)
    verdicts = []
    hardy = m.setup.declares(Atom('L', 2, '+')) and m.setup.declares(Atom('R', 1, '-'))

    checks = []
    if hardy:
        p = m.parse
        checks.append(('loc1c.proof', check_loc1c(m, p('L2 & R2 & L2+'), Atom('R', 1))))
        checks.append(('loc1d.proof', check_loc1d(m, p('L1 & R2'), p('L1-'), Atom('R', 1), p('R1 & R1-'))))
        checks.append(('loc1e.proof', check_loc1e(m, p('R2 & R2+'), p('L2'), Atom('R', 1), p('R1 & R1-'))))
        checks.append(('loc1f.proof', check_loc1f(m, p('L1'), Atom('R', 1), p('~(L1- -> R1 & R1-)'))))
    for check_id, ok in checks:
        verdicts.append(Verdict(check_id, Status.PASS if ok else Status.FAIL))

    instances = list(lemma_instances(m, pool))
    formulas = [m.parse(text) for text in pool]
    loc1c_ok = sum(check_loc1c(m, a, c) for a in formulas for c in _choice_atoms(m.setup))
    loc1c_total = len(formulas) * len(_choice_atoms(m.setup))
    counts = {
        'loc1c.pool': (loc1c_ok, loc1c_total),
        'loc1d.pool': (sum(check_loc1d(m, *inst) for inst in instances), len(instances)),
        'loc1e.pool': (sum(check_loc1e(m, *inst) for inst in instances), len(instances)),
        'loc1f.pool': (sum(check_loc1f(m, b, c, d) for _, b, c, d in instances), len(instances)),
    }
    for check_id, (ok, total) in counts.items():
        verdicts.append(Verdict(check_id, Status.PASS if ok == total else Status.FAIL,
                                f"{ok}/{total} instances"))
    logger.info("LOC1 lemmas checked on %d pool instances", len(instances))
    return verdicts


def verify_loc1f_random(m: Model, b: Formula, c: Atom, rng: np.random.Generator,
                        trials: int) -> Verdict:
    """LOC1f for fixed B and C over random consequents D."""
    atoms = _outcome_and_choice_atoms(m.setup)
    ok = sum(check_loc1f(m, b, c, random_formula(rng, atoms, depth=4)) for _ in range(trials))
    return Verdict('loc1f.random', Status.PASS if ok == trials else Status.FAIL,
                   f"{ok}/{trials} random D")


# ---------------------------------------------------------------------------
# Appendix set identities
# ---------------------------------------------------------------------------

def verify_appendix_identities(m: Model, pool: Iterable[str] = DEFAULT_POOL) -> List[Verdict]:
    """Set forms against per-world evaluation for every pair from the pool."""
    formulas = [m.parse(text) for text in pool]
    pairs = list(itertools.product(formulas, repeat=2))
    agree = {'A.1-A.2': 0, 'A.3-A.4': 0, 'A.5-A.6': 0, 'A.7-A.8': 0}

    for a, b in pairs:
        try:
            holds_strict(m, a, b)
            agree['A.1-A.2'] += 1
        except IdentityViolated:
            pass

        pointwise = WorldSet.of(m.setup, (w for w in m.phys
                                          if not truth_at(m, w, a) or truth_at(m, w, b)))
        set_form = (m.phys - extension(m, a)) | extension(m, b)
        agree['A.3-A.4'] += pointwise == set_form == extension(m, MaterialCond(a, b))

        for c in formulas[:3]:
            left = not (extension(m, a) & (m.phys - extension(m, MaterialCond(b, c))))
            right = not (extension(m, And(a, b)) & (m.phys - extension(m, c)))
            agree['A.5-A.6'] += (left == right) and check_eq_2_1(m, a, b, c)

    choices = _choice_atoms(m.setup)
    for c, d in itertools.product(choices, formulas):
        by_set = counterfactual_set(m, c, extension(m, d))
        by_world = WorldSet.of(m.setup, (w for w in m.phys if _counterfactual_pointwise(m, w, c, d)))
        agree['A.7-A.8'] += by_set == by_world

    totals = {'A.1-A.2': len(pairs), 'A.3-A.4': len(pairs),
              'A.5-A.6': len(pairs) * min(3, len(formulas)),
              'A.7-A.8': len(choices) * len(formulas)}
    return [Verdict(f"identity.{key}", Status.PASS if agree[key] == totals[key] else Status.FAIL,
                    f"{agree[key]}/{totals[key]}")
            for key in agree]
