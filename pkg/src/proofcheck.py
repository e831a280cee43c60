"""Proof replay, LOC2 injection and the accessibility constraint search.

A proof script is a list of `<formula> [<tags>]` lines. Each line is checked
against its justification in a fixed model:

    3.1-3.4          the cited prediction holds, and so does the line, both in
                     the model and with only that prediction's worlds removed
    LOC1c            line has the LOC1c shape and holds
    LOC1d/e/f, 2.1   the line is a lemma partner of the previous line (tags
                     are applied in order) and every lemma instance used holds
    From i, j / LOGIC  the premises' extensions intersect inside the line's
    LOC2             the line is the LOC2 transform of the previous line; it
                     cannot be checked and is flagged as an injected assumption

The constraint search enumerates every assignment of nonempty R1-successor
sets to the physically possible R2-worlds and tests the line-6, line-11 and
line-14 constraints against each.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import pandas as pd

from .config import Config
from .errors import (
    BadIndex, CapacityError, CheckError, ConfigInvalid, SearchIncomplete, ShapeMismatch,
    SideConditionViolated,
)
from .experiment import World, WorldSet, localized_outside
from .formula import (
    And, Atom, Counterfactual, Formula, MaterialCond, Not, StrictCond,
    conjoin, conjuncts, normalize, parse, to_text, validate_proof_line,
)
from .quantum import PREDICTIONS
from .report import Report, Status, Verdict
from .semantics import (
    Model, accessible_worlds, check_loc1d, check_loc1e, check_loc1f, counterfactual_set,
    eq_2_1_instance, extension, holds, holds_strict,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Scripts and justifications
# ---------------------------------------------------------------------------

class Rule(StrEnum):
    LOC1C = 'LOC1c'
    LOC1D = 'LOC1d'
    LOC1E = 'LOC1e'
    LOC1F = 'LOC1f'
    QM = 'QM'
    FROM = 'From'
    EQ2_1 = '2.1'
    LOGIC = 'LOGIC'
    LOC2 = 'LOC2'


LEMMA_RULES = (Rule.LOC1D, Rule.LOC1E, Rule.LOC1F, Rule.EQ2_1)


@dataclass(frozen=True)
class Tag:
    rule: Rule
    eq_id: Optional[str] = None         # QM only
    lines: Tuple[int, ...] = ()         # From only

    def __str__(self) -> str:
        if self.rule == Rule.QM:
            return self.eq_id
        if self.rule == Rule.FROM:
            return 'From ' + ', '.join(map(str, self.lines))
        return str(self.rule)


@dataclass(frozen=True)
class Justification:
    tags: Tuple[Tag, ...]

    @property
    def rules(self) -> Tuple[Rule, ...]:
        return tuple(t.rule for t in self.tags)

    def __str__(self) -> str:
        return ', '.join(str(t) for t in self.tags)


_TAG_RE = re.compile(r'\[([^\[\]]*)\]\s*$')
_RULE_NAMES = {r.value.lower(): r for r in Rule if r not in (Rule.QM, Rule.FROM)}


def parse_justification(text: str) -> Justification:
    """Tags like `LOC1e, 2.1`, `3.2` or `From 1, 2, 3`; parentheses ignored."""
    text = text.strip()
    if text.lower().startswith('from'):
        try:
            lines = tuple(int(x) for x in text[4:].replace(' ', '').split(','))
        except ValueError:
            raise ConfigInvalid(f"Bad line list in justification {text!r}")
        return Justification((Tag(Rule.FROM, lines=lines),))

    tags = []
    for raw in text.split(','):
        name = raw.strip().strip('()').strip()
        if name in PREDICTIONS:
            tags.append(Tag(Rule.QM, eq_id=name))
        elif name.lower() in _RULE_NAMES:
            tags.append(Tag(_RULE_NAMES[name.lower()]))
        else:
            raise ConfigInvalid(f"Unknown justification tag {name!r}")
    if not tags:
        raise ConfigInvalid("Empty justification")
    return Justification(tuple(tags))


def parse_script_line(text: str, setup=None) -> Tuple[Formula, Justification]:
    """Split `<formula> [<tags>]` and parse both halves."""
    m = _TAG_RE.search(text)
    if not m:
        raise ConfigInvalid(f"Proof line has no [justification]: {text!r}")
    return parse(text[:m.start()], setup), parse_justification(m.group(1))


@dataclass(frozen=True)
class ProofLine:
    index: int                  # 1-based
    formula: Formula
    justification: Justification

    def __str__(self) -> str:
        return f"{to_text(self.formula)} [{self.justification}]"


@dataclass(frozen=True)
class ProofScript:
    name: str
    lines: Tuple[ProofLine, ...]

    def __post_init__(self):
        for line in self.lines:
            violations = validate_proof_line(line.formula)
            if violations:
                raise ConfigInvalid(f"Line {line.index}: {'; '.join(violations)}")
            for tag in line.justification.tags:
                if tag.rule == Rule.FROM and not all(1 <= i < line.index for i in tag.lines):
                    raise ConfigInvalid(f"Line {line.index} cites a line that is not earlier: {tag}")

    @classmethod
    def from_lines(cls, name: str, texts: Sequence[str], setup=None) -> ProofScript:
        lines = []
        for i, text in enumerate(texts, start=1):
            try:
                formula, justification = parse_script_line(text, setup)
            except CheckError as e:
                raise ConfigInvalid(f"Script line {i}: {e}") from e
            lines.append(ProofLine(i, formula, justification))
        return cls(name, tuple(lines))

    @classmethod
    def builtin(cls, setup=None) -> ProofScript:
        return cls.from_lines('builtin', BUILTIN_SCRIPT, setup)

    @classmethod
    def from_file(cls, path: Path, setup=None) -> ProofScript:
        """One proof line per non-blank line; `#` starts a comment."""
        try:
            raw = Path(path).read_text(encoding='utf-8').splitlines()
        except OSError as e:
            raise ConfigInvalid(f"Cannot read script {path}: {e}") from e
        texts = [t.split('#', 1)[0].strip() for t in raw]
        return cls.from_lines(str(path), [t for t in texts if t], setup)

    def line(self, idx: int) -> ProofLine:
        if not 1 <= idx <= len(self.lines):
            raise BadIndex(f"Line {idx} is outside 1..{len(self.lines)}")
        return self.lines[idx - 1]


BUILTIN_SCRIPT = (
    "(L2 & R2 & L2+) => (R1 []-> (L2 & R1 & L2+)) [LOC1c]",
    "(L2 & R2 & R2+) => (L2 & R2 & L2+) [3.1]",
    "(L2 & R1 & L2+) => (L2 & R1 & R1-) [3.2]",
    "(L2 & R2 & R2+) => (R1 []-> (L2 & R1 & R1-)) [From 1, 2, 3]",
    "L2 => ((R2 & R2+) -> (R1 []-> (R1 & R1-))) [LOC1e, 2.1]",
    "L1 => ((R2 & R2+) -> (R1 []-> (R1 & R1-))) [LOC2]",
    "(L1 & R2) => (R2+ -> (R1 []-> (R1 & R1-))) [LOGIC]",
    "(L1 & R2) => (L1- -> R2+) [3.3]",
    "(L1 & R2) => (L1- -> (R1 []-> (R1 & R1-))) [From 7, 8]",
    "(L1 & R2 & L1-) => (R1 []-> (R1 & R1-)) [2.1]",
    "(L1 & R2) => (R1 []-> (L1- -> (R1 & R1-))) [LOC1d]",
    "L1 => (R1 -> ~(L1- -> (R1 & R1-))) [3.4]",
    "L1 => (R1 []-> ~(L1- -> (R1 & R1-))) [LOC1f]",
    "(L1 & R2) => (R1 []-> ~(L1- -> (R1 & R1-))) [LOGIC]",
)


# ---------------------------------------------------------------------------
# Lemma partners
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaInstance:
    rule: Rule
    args: Tuple[Formula, ...]

    def __str__(self) -> str:
        return f"{self.rule}(" + '; '.join(to_text(a) for a in self.args) + ')'


def lemma_partners(f: Formula, rule: Rule) -> List[Tuple[Formula, LemmaInstance]]:
    """Every formula the rule relates f to, with the lemma instance used."""
    if not isinstance(f, StrictCond):
        return []
    a, rhs = f.antecedent, f.consequent
    xs = conjuncts(a)
    splits = [(conjoin(xs[:k]), conjoin(xs[k:])) for k in range(1, len(xs))]
    out: List[Tuple[Formula, LemmaInstance]] = []

    if rule == Rule.EQ2_1:
        # A => (B -> C)  <=>  (A & B) => C
        if isinstance(rhs, MaterialCond):
            b, c = rhs.antecedent, rhs.consequent
            out.append((StrictCond(conjoin(xs + conjuncts(b)), c), LemmaInstance(rule, (a, b, c))))
        for head, tail in splits:
            out.append((StrictCond(head, MaterialCond(tail, rhs)), LemmaInstance(rule, (head, tail, rhs))))

    elif rule == Rule.LOC1D and isinstance(rhs, Counterfactual):
        # (A & B) => (C []-> D)  <=>  A => (C []-> (B -> D))
        c, d = rhs.antecedent, rhs.consequent
        for head, tail in splits:
            out.append((StrictCond(head, Counterfactual(c, MaterialCond(tail, d))),
                        LemmaInstance(rule, (head, tail, c, d))))
        if isinstance(d, MaterialCond):
            b, inner = d.antecedent, d.consequent
            out.append((StrictCond(conjoin(xs + conjuncts(b)), Counterfactual(c, inner)),
                        LemmaInstance(rule, (a, b, c, inner))))

    elif rule == Rule.LOC1E and isinstance(rhs, Counterfactual):
        # (A & B) => (C []-> B & D)  <=>  (A & B) => (C []-> D)
        c, d = rhs.antecedent, rhs.consequent
        ys = conjuncts(d)
        for i, y in enumerate(ys):
            if len(ys) > 1 and y in xs:
                rest_d = conjoin(ys[:i] + ys[i + 1:])
                out.append((StrictCond(a, Counterfactual(c, rest_d)),
                            LemmaInstance(rule, (_without(xs, y), y, c, rest_d))))
        for x in xs:
            if x not in ys:
                out.append((StrictCond(a, Counterfactual(c, conjoin([x] + ys))),
                            LemmaInstance(rule, (_without(xs, x), x, c, d))))

    elif rule == Rule.LOC1F and isinstance(rhs, MaterialCond):
        # B => (C -> D)  entails  B => (C []-> D)
        c = rhs.antecedent
        if isinstance(c, Atom) and c.is_choice:
            out.append((StrictCond(a, Counterfactual(c, rhs.consequent)),
                        LemmaInstance(rule, (a, c, rhs.consequent))))

    return [(normalize(p), inst) for p, inst in out]


def _without(xs: List[Formula], y: Formula) -> Formula:
    rest = [x for x in xs if x != y]
    return conjoin(rest) if rest else y


def verify_instance(m: Model, inst: LemmaInstance) -> bool:
    """Semantic check of one lemma instance; side conditions raise."""
    if inst.rule == Rule.EQ2_1:
        return eq_2_1_instance(m, *inst.args)
    if inst.rule == Rule.LOC1D:
        return check_loc1d(m, *inst.args)
    if inst.rule == Rule.LOC1E:
        return check_loc1e(m, *inst.args)
    return check_loc1f(m, *inst.args)


# ---------------------------------------------------------------------------
# LOC2
# ---------------------------------------------------------------------------

def loc2_transform(f: Formula) -> Formula:
    """Replace the far choice `X2` heading a line-5 shaped formula by `X1`.

    Expected shape: X2 => (P -> (C []-> D)).
    """
    if not (isinstance(f, StrictCond)
            and isinstance(f.antecedent, Atom) and f.antecedent.is_choice
            and isinstance(f.consequent, MaterialCond)
            and isinstance(f.consequent.consequent, Counterfactual)):
        raise ShapeMismatch(f"{f} is not of the form X2 => (P -> (C []-> D))")
    choice = f.antecedent
    if choice.measurement != 2:
        raise ShapeMismatch(f"{choice} is not a second-measurement choice")
    return StrictCond(Atom(choice.region, 1), f.consequent)


def line5_constraint_forced(m: Model) -> bool:
    """Every L2 & R2 & R2+ world forces R1 & R1- on all its R1-successors."""
    target = extension(m, m.parse('R1 & R1-'))
    start = extension(m, m.parse('L2 & R2 & R2+'))
    return all(accessible_worlds(m, w, Atom('R', 1)) <= target for w in start)


# ---------------------------------------------------------------------------
# Line checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LineVerdict:
    index: int
    status: Status
    detail: str = ''
    witness: Optional[World] = None
    contested: bool = False     # failing line citing an existence prediction


def counterexample(m: Model, f: Formula) -> Optional[World]:
    """First physical world refuting f (for A => B, a world of A outside B)."""
    if isinstance(f, StrictCond):
        bad = extension(m, f.antecedent) - extension(m, f.consequent)
    else:
        bad = m.phys - extension(m, f)
    return next(iter(bad), None)


def check_line(m: Model, script: ProofScript, idx: int) -> LineVerdict:
    line = script.line(idx)
    rules = line.justification.rules
    tags = line.justification.tags

    if len(tags) == 1 and rules[0] == Rule.QM:
        return _check_qm(m, line, tags[0].eq_id)
    if len(tags) == 1 and rules[0] == Rule.LOC1C:
        return _check_loc1c(m, line)
    if len(tags) == 1 and rules[0] in (Rule.FROM, Rule.LOGIC):
        premises = tags[0].lines if rules[0] == Rule.FROM else (idx - 1,)
        return _check_entailment(m, script, line, premises)
    if len(tags) == 1 and rules[0] == Rule.LOC2:
        return _check_loc2(script, line)
    if all(r in LEMMA_RULES for r in rules):
        return _check_lemma_chain(m, script, line)
    return LineVerdict(idx, Status.FAIL, f"unsupported justification [{line.justification}]")


def _prediction_relaxation(m: Model, eq_id: str) -> Model:
    # Logical worlds minus exactly the worlds this prediction rules out.
    full = m.relaxed(WorldSet.full(m.setup))
    f = parse(PREDICTIONS[eq_id].formula, m.setup)
    if isinstance(f, StrictCond):
        excluded = extension(full, And(f.antecedent, Not(f.consequent)))
        return m.relaxed(full.phys - excluded)
    return full


def _check_qm(m: Model, line: ProofLine, eq_id: str) -> LineVerdict:
    prediction = PREDICTIONS[eq_id]
    if not holds(m, parse(prediction.formula, m.setup)):
        return LineVerdict(line.index, Status.FAIL, f"prediction {eq_id} does not hold in the model")
    if not holds(m, line.formula):
        w = counterexample(m, line.formula)
        where = f" at {m.setup.format_world(w)}" if w else ''
        return LineVerdict(line.index, Status.FAIL, f"plain-semantics FAIL{where}", w,
                           contested=prediction.positive)
    relaxed = _prediction_relaxation(m, eq_id)
    if not holds(relaxed, line.formula):
        w = counterexample(relaxed, line.formula)
        return LineVerdict(line.index, Status.FAIL,
                           f"does not follow from prediction {eq_id} alone "
                           f"(counterexample {m.setup.format_world(w)})", w)
    return LineVerdict(line.index, Status.PASS)


def _check_loc1c(m: Model, line: ProofLine) -> LineVerdict:
    f = line.formula
    if not (isinstance(f, StrictCond) and isinstance(f.consequent, Counterfactual)):
        return LineVerdict(line.index, Status.FAIL, "not of the form A => (C []-> D)")
    a, c, d = f.antecedent, f.consequent.antecedent, f.consequent.consequent
    xs = conjuncts(a)
    for y in conjuncts(d):
        if y != c and not (y in xs and localized_outside(y, c.region, m.causal)):
            return LineVerdict(line.index, Status.FAIL,
                               f"{y} is neither {c} nor a conjunct of A outside the cone of {c}")
    formula_form = holds_strict(m, a, Counterfactual(c, d))
    set_form = extension(m, a) <= counterfactual_set(m, c, extension(m, d))
    if formula_form and set_form:
        return LineVerdict(line.index, Status.PASS)
    return LineVerdict(line.index, Status.FAIL, "does not hold", counterexample(m, f))


def _check_entailment(m: Model, script: ProofScript, line: ProofLine,
                      premises: Sequence[int]) -> LineVerdict:
    common = m.phys
    for i in premises:
        common = common & extension(m, script.line(i).formula)
    conclusion = extension(m, line.formula)
    if common <= conclusion:
        vacuous = common != m.phys
        return LineVerdict(line.index, Status.PASS, 'vacuous' if vacuous else '')
    w = next(iter(common - conclusion))
    return LineVerdict(line.index, Status.FAIL,
                       f"premises {', '.join(map(str, premises))} hold at "
                       f"{m.setup.format_world(w)} but the line does not", w)


def _check_loc2(script: ProofScript, line: ProofLine) -> LineVerdict:
    if line.index < 2:
        return LineVerdict(line.index, Status.FAIL, "LOC2 needs a previous line")
    try:
        expected = loc2_transform(script.line(line.index - 1).formula)
    except ShapeMismatch as e:
        return LineVerdict(line.index, Status.FAIL, str(e))
    if normalize(expected) != normalize(line.formula):
        return LineVerdict(line.index, Status.FAIL,
                           f"LOC2 applied to line {line.index - 1} gives {to_text(expected)}")
    return LineVerdict(line.index, Status.FLAG, 'assumption-injected')


def _check_lemma_chain(m: Model, script: ProofScript, line: ProofLine) -> LineVerdict:
    if line.index < 2:
        return LineVerdict(line.index, Status.FAIL, "lemma step needs a previous line")
    premise = script.line(line.index - 1).formula
    current = [(normalize(premise), ())]
    for rule in line.justification.rules:
        current = [(p, path + (inst,)) for f, path in current for p, inst in lemma_partners(f, rule)]
    target = normalize(line.formula)
    paths = [path for f, path in current if f == target]
    if not paths:
        return LineVerdict(line.index, Status.FAIL,
                           f"not obtainable from line {line.index - 1} by [{line.justification}]")

    first_error = ''
    for path in paths:
        try:
            failed = [inst for inst in path if not verify_instance(m, inst)]
        except SideConditionViolated as e:
            first_error = first_error or f"side condition: {e}"
            continue
        if failed:
            first_error = first_error or f"lemma instance fails: {failed[0]}"
            continue
        detail = '' if holds(m, premise) else 'premise false in model'
        return LineVerdict(line.index, Status.PASS, detail)
    return LineVerdict(line.index, Status.FAIL, first_error)


# ---------------------------------------------------------------------------
# Appendix analysis of line 12
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Line12Analysis:
    paradox_set: WorldSet          # {L1} & {R1} & {L1-} & {R1+}
    complement_set: WorldSet       # {L1} & {R1} & {L1-} & {~R1-}
    claimed_empty: WorldSet        # {L1} & {R1} & ({R1-} | {~L1-})

    def verdicts(self, setup) -> List[Verdict]:
        witness = next(iter(self.claimed_empty), None)
        a19 = (Verdict('appendix.A.19', Status.PASS, 'set is empty') if witness is None else
               Verdict('appendix.A.19', Status.FLAG,
                       f"literal emptiness claim FAIL, witness {setup.format_world(witness)}; see line.12"))
        return [
            Verdict('appendix.A.21', Status.PASS if self.paradox_set else Status.FAIL,
                    f"{len(self.paradox_set)} world(s)"),
            Verdict('appendix.A.20', Status.PASS if self.complement_set else Status.FAIL,
                    f"{len(self.complement_set)} world(s)"),
            a19,
        ]


def check_appendix_line12(m: Model) -> Line12Analysis:
    e = lambda text: extension(m, m.parse(text))
    base = e('L1') & e('R1')
    return Line12Analysis(
        paradox_set=base & e('L1-') & e('R1+'),
        complement_set=base & e('L1-') & (m.phys - e('R1-')),
        claimed_empty=base & (e('R1-') | (m.phys - e('L1-'))),
    )


# ---------------------------------------------------------------------------
# Accessibility candidates and the constraint search
# ---------------------------------------------------------------------------

SEARCH_FROM = Atom('R', 2)
SEARCH_TO = Atom('R', 1)


@dataclass(frozen=True)
class Constraint:
    constraint_id: str
    antecedent: str     # worlds the constraint applies to
    consequent: str     # every successor must satisfy this


CONSTRAINTS: Dict[str, Constraint] = {c.constraint_id: c for c in (
    Constraint('C-LOC2', 'R2 & R2+', 'R1 & R1-'),
    Constraint('C-11', 'L1 & R2', 'L1- -> (R1 & R1-)'),
    Constraint('C-14', 'L1 & R2', '~(L1- -> (R1 & R1-))'),
)}


@dataclass(frozen=True)
class AccessibilityCandidate:
    index: int
    successors: Tuple[Tuple[World, WorldSet], ...]

    def of(self, w: World) -> WorldSet:
        return dict(self.successors)[w]


@dataclass(frozen=True)
class CandidateViolation:
    index: int
    world: World
    constraint_id: str


def _candidate_options(m: Model) -> List[Tuple[World, List[WorldSet]]]:
    """Per R2-world, every nonempty subset of its R1-accessible worlds."""
    options = []
    for w in extension(m, SEARCH_FROM):
        acc = list(accessible_worlds(m, w, SEARCH_TO))
        subsets = [WorldSet.of(m.setup, (v for i, v in enumerate(acc) if mask >> i & 1))
                   for mask in range(1, 2 ** len(acc))]
        options.append((w, subsets))
    return options


def candidate_count(m: Model) -> int:
    count = 1
    for _, subsets in _candidate_options(m):
        count *= len(subsets)
    return count


def enumerate_candidates(m: Model, start: int = 0, stop: Optional[int] = None,
                         capacity: Optional[int] = None) -> Iterator[AccessibilityCandidate]:
    """Candidates start..stop-1 of the full space, last world varying fastest."""
    capacity = Config.CANDIDATE_CAPACITY if capacity is None else capacity
    options = _candidate_options(m)
    total = candidate_count(m)
    if total > capacity:
        raise CapacityError(f"{total} accessibility candidates exceed the capacity of {capacity}")
    worlds = [w for w, _ in options]
    combos = itertools.product(*(subsets for _, subsets in options))
    stop = total if stop is None else min(stop, total)
    for index, combo in enumerate(itertools.islice(combos, start, stop), start=start):
        yield AccessibilityCandidate(index, tuple(zip(worlds, combo)))


def _constraint_sets(m: Model, ids: Sequence[str]) -> List[Tuple[str, WorldSet, WorldSet]]:
    return [(cid, extension(m, m.parse(CONSTRAINTS[cid].antecedent)),
             extension(m, m.parse(CONSTRAINTS[cid].consequent))) for cid in ids]


def _violation(candidate: AccessibilityCandidate, sets) -> Optional[CandidateViolation]:
    for w, successors in candidate.successors:
        for cid, applies, allowed in sets:
            if w in applies and not successors <= allowed:
                return CandidateViolation(candidate.index, w, cid)
    return None


def violation_at(m: Model, candidate: AccessibilityCandidate, ids: Sequence[str],
                 w: World) -> Optional[CandidateViolation]:
    """Constraints the candidate's successors of w break, joined as 'C-11+C-14'."""
    successors = candidate.of(w)
    broken = [cid for cid, applies, allowed in _constraint_sets(m, ids)
              if w in applies and not successors <= allowed]
    return CandidateViolation(candidate.index, w, '+'.join(broken)) if broken else None


@dataclass
class SearchResult:
    constraint_ids: Tuple[str, ...]
    total: int
    searched: int = 0
    satisfying: Optional[AccessibilityCandidate] = None
    violations: List[CandidateViolation] = field(default_factory=list)

    @property
    def satisfiable(self) -> bool:
        return self.satisfying is not None

    @property
    def complete(self) -> bool:
        return self.searched == self.total


def search_constraints(m: Model, ids: Sequence[str], start: int = 0,
                       stop: Optional[int] = None,
                       capacity: Optional[int] = None) -> SearchResult:
    """Check one slice of the candidate space against a constraint set."""
    ids = tuple(ids)
    result = SearchResult(ids, candidate_count(m))
    sets = _constraint_sets(m, ids)
    for candidate in enumerate_candidates(m, start, stop, capacity):
        result.searched += 1
        violation = _violation(candidate, sets)
        if violation:
            result.violations.append(violation)
        elif result.satisfying is None:
            result.satisfying = candidate
    return result


def merge_results(parts: Sequence[SearchResult]) -> SearchResult:
    """Combine slice results; the earliest satisfying candidate wins."""
    merged = SearchResult(parts[0].constraint_ids, parts[0].total)
    for part in parts:
        merged.searched += part.searched
        merged.violations.extend(part.violations)
        if part.satisfying is not None and (
                merged.satisfying is None or part.satisfying.index < merged.satisfying.index):
            merged.satisfying = part.satisfying
    merged.violations.sort(key=lambda v: v.index)
    return merged


@dataclass(frozen=True)
class UnsatCertificate:
    conflicting: Tuple[str, str]
    searched_count: int
    witness_world: Optional[World]
    witness_kind: str           # pair-conflict | single-constraint | none
    log: Tuple[CandidateViolation, ...]


def find_witness(m: Model, ids: Tuple[str, str]) -> Tuple[Optional[World], str]:
    """World where the constraints clash.

    Prefers the first world where each constraint alone leaves a successor
    but together they leave none; otherwise the first world where the pair
    leaves none.
    """
    sets = _constraint_sets(m, ids)
    fallback = None
    for w in extension(m, SEARCH_FROM):
        acc = accessible_worlds(m, w, SEARCH_TO)
        allowed = [allowed if w in applies else acc for _, applies, allowed in sets]
        alone = [bool(acc & a) for a in allowed]
        joint = acc & allowed[0] & allowed[1]
        if not joint:
            if all(alone):
                return w, 'pair-conflict'
            fallback = fallback or w
    return (fallback, 'single-constraint') if fallback else (None, 'none')


@dataclass
class Contradiction:
    unsat_11_14: SearchResult
    unsat_loc2_14: SearchResult
    sat_loc2_11: SearchResult
    certificate: Optional[UnsatCertificate]


def verify_contradiction(m: Model, capacity: Optional[int] = None) -> Contradiction:
    """Exhaustive search for the three constraint pairs of the closing argument."""
    try:
        results = [search_constraints(m, ids, capacity=capacity)
                   for ids in (('C-11', 'C-14'), ('C-LOC2', 'C-14'), ('C-LOC2', 'C-11'))]
    except CapacityError as e:
        raise SearchIncomplete(str(e)) from e
    for r in results:
        if not r.complete:
            raise SearchIncomplete(f"searched {r.searched} of {r.total} candidates")
        logger.info("Search %s: %d candidates, satisfiable=%s",
                    '+'.join(r.constraint_ids), r.total, r.satisfiable)

    certificate = None
    main = results[0]
    if not main.satisfiable:
        witness, kind = find_witness(m, main.constraint_ids)
        if kind == 'pair-conflict':
            # every candidate refuted at the witness world itself
            log = tuple(violation_at(m, candidate, main.constraint_ids, witness)
                        for candidate in enumerate_candidates(m, capacity=capacity))
        else:
            log = tuple(main.violations)
        certificate = UnsatCertificate(main.constraint_ids, main.searched, witness, kind, log)
    return Contradiction(*results, certificate=certificate)


def search_verdicts(m: Model, c: Contradiction) -> List[Verdict]:
    verdicts = []
    for r in (c.unsat_11_14, c.unsat_loc2_14, c.sat_loc2_11):
        check_id = 'search.' + '+'.join(r.constraint_ids)
        if r.satisfiable:
            mapping = '; '.join(f"{m.setup.format_world(w)}->{s.format()}"
                                for w, s in r.satisfying.successors)
            verdicts.append(Verdict(check_id, Status.SAT,
                                    f"candidate {r.satisfying.index} of {r.total}: {mapping}"))
        else:
            detail = f"{r.searched}/{r.total} candidates refuted"
            if r is c.unsat_11_14 and c.certificate is not None:
                cert = c.certificate
                where = m.setup.format_world(cert.witness_world) if cert.witness_world else 'none'
                detail += f", witness {where} ({cert.witness_kind})"
            verdicts.append(Verdict(check_id, Status.UNSAT, detail))
    return verdicts


# ---------------------------------------------------------------------------
# Whole-script replay
# ---------------------------------------------------------------------------

@dataclass
class ScriptResult:
    lines: List[LineVerdict]
    line12: Line12Analysis
    contradiction: Contradiction
    line5_forced: bool
    status: str

    @property
    def replayed(self) -> bool:
        return self.status == 'THEOREM-REPLAYED'


def line_verdict(v: LineVerdict) -> Verdict:
    """Report form of a line verdict; a contested FAIL is shown as FLAG."""
    if v.status == Status.FAIL and v.contested:
        return Verdict(f"line.{v.index}", Status.FLAG, f"contested step: {v.detail}")
    return Verdict(f"line.{v.index}", v.status, v.detail)


def run_script(m: Model, script: ProofScript, capacity: Optional[int] = None) -> ScriptResult:
    """Check every line, the line-12 appendix reading and the constraint search.

    THEOREM-REPLAYED needs no failing line apart from contested ones, at
    least one injected LOC2 line, and {C-11, C-14} unsatisfiable.
    """
    lines = [check_line(m, script, i) for i in range(1, len(script.lines) + 1)]
    contradiction = verify_contradiction(m, capacity)
    hard_failures = [v for v in lines if v.status == Status.FAIL and not v.contested]
    injected = any(v.status == Status.FLAG for v in lines)
    replayed = not hard_failures and injected and not contradiction.unsat_11_14.satisfiable
    return ScriptResult(
        lines=lines,
        line12=check_appendix_line12(m),
        contradiction=contradiction,
        line5_forced=line5_constraint_forced(m),
        status='THEOREM-REPLAYED' if replayed else 'NOT-REPLAYED',
    )


def script_report(m: Model, script: ProofScript, result: ScriptResult) -> Report:
    report = Report('Proof replay')
    report.note(f"Script: {script.name} ({len(script.lines)} lines)")
    for line, v in zip(script.lines, result.lines):
        report.note(f"  {line.index:>2}. {line}")
    report.extend(line_verdict(v) for v in result.lines)
    report.extend(result.line12.verdicts(m.setup))
    report.add('line5.forced', Status.PASS if result.line5_forced else Status.FAIL)
    report.extend(search_verdicts(m, result.contradiction))
    report.add('proof.status', Status.PASS if result.replayed else Status.FAIL, result.status)
    report.attach('lines', pd.DataFrame.from_records([
        {'line': line.index, 'formula': to_text(line.formula),
         'justification': str(line.justification), 'status': str(line_verdict(v).status),
         'detail': v.detail}
        for line, v in zip(script.lines, result.lines)]))
    return report
