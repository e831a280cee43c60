"""Modal formula language: atoms, connectives, parser and printer.

Concrete syntax, tightest binding first:

    ~      negation
    &      conjunction
    |      disjunction
    ->     material conditional (right-associative)
    []->   counterfactual, "if, instead"
    =>     strict conditional

`[]->` and `=>` occur at most once per level; parenthesise to nest.
Atoms are region + measurement number, with an optional outcome sign:
`R1` is "R1 is chosen and performed", `R1-` is "outcome - of R1 appears".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import FormulaSyntaxError, UnknownAtom


class AtomKind(StrEnum):
    CHOICE = 'choice'
    OUTCOME = 'outcome'


class _Node:
    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Atom(_Node):
    """`region``measurement` (choice) or `region``measurement``sign` (outcome)."""
    region: str
    measurement: int            # 1-based
    sign: str | None = None     # None for choice atoms

    @property
    def kind(self) -> AtomKind:
        return AtomKind.CHOICE if self.sign is None else AtomKind.OUTCOME

    @property
    def is_choice(self) -> bool:
        return self.sign is None

    def choice(self) -> Atom:
        """The choice atom this atom presupposes."""
        return Atom(self.region, self.measurement)

    @property
    def name(self) -> str:
        return f"{self.region}{self.measurement}{self.sign or ''}"


@dataclass(frozen=True)
class Not(_Node):
    operand: Formula


@dataclass(frozen=True)
class And(_Node):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(_Node):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class MaterialCond(_Node):
    antecedent: Formula
    consequent: Formula


@dataclass(frozen=True)
class StrictCond(_Node):
    antecedent: Formula
    consequent: Formula


@dataclass(frozen=True)
class Counterfactual(_Node):
    antecedent: Formula
    consequent: Formula


Formula = Union[Atom, Not, And, Or, MaterialCond, StrictCond, Counterfactual]


def children(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, Atom):
        return ()
    if isinstance(f, Not):
        return (f.operand,)
    if isinstance(f, (And, Or)):
        return (f.left, f.right)
    return (f.antecedent, f.consequent)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r'''
      (?P<ws>\s+)
    | (?P<cf>\[\]->)
    | (?P<strict>=>)
    | (?P<cond>->)
    | (?P<not>~)
    | (?P<and>&)
    | (?P<or>\|)
    | (?P<lparen>\()
    | (?P<rparen>\))
    | (?P<atom>[A-Za-z]+\d+(?:\+|-(?!>))?)
''', re.VERBOSE)

_ATOM_RE = re.compile(r'([A-Za-z]+)(\d+)([+-]?)')

# Token kind -> text shown in "expected" sets.
_SHOWN = {
    'cf': '[]->', 'strict': '=>', 'cond': '->', 'not': '~', 'and': '&',
    'or': '|', 'lparen': '(', 'rparen': ')', 'atom': 'ATOM', 'end': 'end of input',
}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise FormulaSyntaxError(
                f"unexpected character {text[pos]!r}", pos,
                frozenset(_SHOWN[k] for k in ('not', 'lparen', 'atom')))
        if m.lastgroup != 'ws':
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token('end', '', len(text)))
    return tokens


class _Parser:
    """Recursive descent over the token list, one method per grammar level."""

    def __init__(self, text: str, setup=None):
        self.tokens = _tokenize(text)
        self.i = 0
        self.setup = setup

    @property
    def peek(self) -> _Token:
        return self.tokens[self.i]

    def _take(self, kind: str) -> bool:
        if self.peek.kind == kind:
            self.i += 1
            return True
        return False

    def _fail(self, message: str, *expected: str):
        tok = self.peek
        found = 'end of input' if tok.kind == 'end' else repr(tok.text)
        raise FormulaSyntaxError(
            f"{message}, found {found}", tok.pos,
            frozenset(_SHOWN[k] for k in expected))

    def parse(self) -> Formula:
        f = self.strict()
        if self.peek.kind != 'end':
            self._fail("trailing input", 'end')
        return f

    def strict(self) -> Formula:
        left = self.cf()
        if self._take('strict'):
            return StrictCond(left, self.cf())
        return left

    def cf(self) -> Formula:
        left = self.cond()
        if self._take('cf'):
            return Counterfactual(left, self.cond())
        return left

    def cond(self) -> Formula:
        left = self.disj()
        if self._take('cond'):
            return MaterialCond(left, self.cond())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        if self._take('or'):
            return Or(left, self.disj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        if self._take('and'):
            return And(left, self.conj())
        return left

    def unary(self) -> Formula:
        tok = self.peek
        if self._take('not'):
            return Not(self.unary())
        if self._take('lparen'):
            inner = self.strict()
            if not self._take('rparen'):
                self._fail("unbalanced parenthesis", 'rparen')
            return inner
        if self._take('atom'):
            return self._atom(tok)
        self._fail("expected a formula", 'not', 'lparen', 'atom')

    def _atom(self, tok: _Token) -> Atom:
        region, digits, sign = _ATOM_RE.fullmatch(tok.text).groups()
        atom = Atom(region, int(digits), sign or None)
        if self.setup is not None and not self.setup.declares(atom):
            raise UnknownAtom(f"atom {tok.text!r} at position {tok.pos} is not declared by the setup")
        return atom


def parse(text: str, setup=None) -> Formula:
    """Parse formula text. With a setup, undeclared atoms raise UnknownAtom."""
    return _Parser(text, setup).parse()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_LEVEL = {StrictCond: 1, Counterfactual: 2, MaterialCond: 3, Or: 4, And: 5}
_SYMBOL = {StrictCond: '=>', Counterfactual: '[]->', MaterialCond: '->', Or: '|', And: '&'}


def _level(f: Formula) -> int:
    return _LEVEL.get(type(f), 6)


def _operand(f: Formula, min_level: int) -> str:
    text = to_text(f)
    return f"({text})" if _level(f) < min_level else text


def to_text(f: Formula) -> str:
    """Canonical text; parse(to_text(f)) == f.

    Compound operands of the three conditionals are always bracketed, the way
    the lines of a written proof are; conjunction and disjunction chains print
    flat when right-associated.
    """
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return '~' + _operand(f.operand, 6)
    if isinstance(f, And):
        return f"{_operand(f.left, 6)} & {_operand(f.right, 5)}"
    if isinstance(f, Or):
        return f"{_operand(f.left, 5)} | {_operand(f.right, 4)}"
    symbol = _SYMBOL[type(f)]
    return f"{_operand(f.antecedent, 6)} {symbol} {_operand(f.consequent, 6)}"


# ---------------------------------------------------------------------------
# Structure helpers
# ---------------------------------------------------------------------------

def is_rudimentary(f: Formula) -> bool:
    """No strict conditional and no counterfactual anywhere."""
    if isinstance(f, (StrictCond, Counterfactual)):
        return False
    return all(is_rudimentary(c) for c in children(f))


def walk(f: Formula) -> Iterable[Formula]:
    yield f
    for c in children(f):
        yield from walk(c)


def atoms_of(f: Formula) -> Tuple[Atom, ...]:
    seen = dict.fromkeys(n for n in walk(f) if isinstance(n, Atom))
    return tuple(seen)


def regions_of(f: Formula) -> frozenset[str]:
    return frozenset(a.region for a in atoms_of(f))


def conjuncts(f: Formula) -> List[Formula]:
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def conjoin(parts: Sequence[Formula]) -> Formula:
    """Right-associated conjunction of one or more formulas."""
    if not parts:
        raise ValueError("cannot conjoin an empty sequence")
    result = parts[-1]
    for part in reversed(parts[:-1]):
        result = And(part, result)
    return result


def normalize(f: Formula) -> Formula:
    """Flatten every conjunction chain to canonical right association."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, And):
        return conjoin([normalize(c) for c in conjuncts(f)])
    if isinstance(f, Not):
        return Not(normalize(f.operand))
    return type(f)(*(normalize(c) for c in children(f)))


def validate_proof_line(f: Formula) -> Tuple[str, ...]:
    """Violations of the proof-line rules; empty when the line is acceptable.

    A proof line carries at most one `=>`, at the top (optionally under one
    negation), and every `[]->` has a single choice atom as antecedent.
    """
    violations: List[str] = []
    top = f.operand if isinstance(f, Not) else f
    stricts = [n for n in walk(f) if isinstance(n, StrictCond)]
    if len(stricts) > 1:
        violations.append(f"{len(stricts)} strict conditionals; a proof line allows one")
    elif stricts and stricts[0] is not top:
        violations.append("strict conditional is not at the top level")
    for node in walk(f):
        if isinstance(node, Counterfactual):
            ante = node.antecedent
            if not (isinstance(ante, Atom) and ante.is_choice):
                violations.append(
                    f"counterfactual antecedent {to_text(ante)!r} is not a single choice atom")
    return tuple(violations)


def random_formula(rng: np.random.Generator, atoms: Sequence[Atom], depth: int,
                   modal: bool = False) -> Formula:
    """Random well-formed formula of at most `depth` connectives deep.

    Rudimentary unless `modal`, in which case counterfactuals (with a choice
    atom antecedent) and strict conditionals may appear anywhere.
    """
    if depth <= 0 or rng.random() < 0.25:
        return atoms[int(rng.integers(len(atoms)))]
    kinds = [Not, And, Or, MaterialCond]
    if modal:
        kinds += [Counterfactual, StrictCond]
    kind = kinds[int(rng.integers(len(kinds)))]
    if kind is Not:
        return Not(random_formula(rng, atoms, depth - 1, modal))
    if kind is Counterfactual:
        choices = [a for a in atoms if a.is_choice] or [a.choice() for a in atoms]
        ante = choices[int(rng.integers(len(choices)))]
        return Counterfactual(ante, random_formula(rng, atoms, depth - 1, modal))
    return kind(random_formula(rng, atoms, depth - 1, modal),
                random_formula(rng, atoms, depth - 1, modal))
