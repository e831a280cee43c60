"""Experimental universe: regions, causal structure, frames and worlds.

A world fixes, for every region, which measurement was chosen and which
outcome appeared. Worlds are enumerated lexicographically over regions, each
region contributing its (choice, outcome) pairs in declaration order, so
`world_index` is a mixed-radix number and reports are deterministic.
"""

from __future__ import annotations

import functools
import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .config import Config
from .errors import CapacityError, FormulaInvalid
from .formula import Atom, Formula, regions_of

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class World:
    """One choice and one outcome per region, both 0-based indices."""
    choices: Tuple[int, ...]
    outcomes: Tuple[int, ...]


@dataclass(frozen=True)
class Setup:
    """Regions, their measurements and the outcome labels of each measurement.

    `outcomes[r][m]` lists the outcome labels of measurement m+1 in region r.
    """
    regions: Tuple[str, ...]
    outcomes: Tuple[Tuple[Tuple[str, ...], ...], ...]

    def __post_init__(self):
        if not self.regions:
            raise ValueError("Setup needs at least one region")
        if len(set(self.regions)) != len(self.regions):
            raise ValueError(f"Region names must be unique: {self.regions}")
        if len(self.outcomes) != len(self.regions):
            raise ValueError(
                f"{len(self.regions)} regions but outcome lists for {len(self.outcomes)}")
        for region, per_measurement in zip(self.regions, self.outcomes):
            if not per_measurement:
                raise ValueError(f"Region {region} declares no measurements")
            for i, labels in enumerate(per_measurement, start=1):
                if not labels:
                    raise ValueError(f"Measurement {region}{i} declares no outcomes")
                if len(set(labels)) != len(labels):
                    raise ValueError(f"Outcome labels of {region}{i} are not unique: {labels}")

    @classmethod
    def uniform(cls, regions, n_measurements: int, labels=('+', '-')) -> Setup:
        """Every region gets the same number of measurements with the same outcomes."""
        per_region = tuple(tuple(labels) for _ in range(n_measurements))
        return cls(tuple(regions), tuple(per_region for _ in regions))

    def region_index(self, region: str) -> int:
        return self.regions.index(region)

    def measurement_count(self, region: str) -> int:
        return len(self.outcomes[self.region_index(region)])

    def labels(self, region: str, measurement: int) -> Tuple[str, ...]:
        """Outcome labels of a 1-based measurement."""
        return self.outcomes[self.region_index(region)][measurement - 1]

    def declares(self, atom: Atom) -> bool:
        if atom.region not in self.regions:
            return False
        if not 1 <= atom.measurement <= self.measurement_count(atom.region):
            return False
        return atom.sign is None or atom.sign in self.labels(atom.region, atom.measurement)

    def region_pairs(self, r: int) -> List[Tuple[int, int]]:
        """(choice, outcome) pairs of region r in enumeration order."""
        return [(c, o) for c, labels in enumerate(self.outcomes[r]) for o in range(len(labels))]

    @property
    def world_count(self) -> int:
        count = 1
        for r in range(len(self.regions)):
            count *= len(self.region_pairs(r))
        return count

    @functools.cached_property
    def _pair_positions(self) -> Tuple[Dict[Tuple[int, int], int], ...]:
        return tuple({pair: i for i, pair in enumerate(self.region_pairs(r))}
                     for r in range(len(self.regions)))

    def world_index(self, w: World) -> int:
        index = 0
        for r, positions in enumerate(self._pair_positions):
            index = index * len(positions) + positions[(w.choices[r], w.outcomes[r])]
        return index

    def outcome_atom(self, w: World, region: str) -> Atom:
        r = self.region_index(region)
        measurement = w.choices[r] + 1
        return Atom(region, measurement, self.labels(region, measurement)[w.outcomes[r]])

    def format_world(self, w: World) -> str:
        parts = []
        for region in self.regions:
            outcome = self.outcome_atom(w, region)
            parts.append(f"{region}{outcome.measurement},{outcome.sign}")
        return f"({','.join(parts)})"

    def parse_world(self, text: str) -> World:
        """Inverse of format_world, e.g. "(L1,-,R2,+)"."""
        fields = [f.strip() for f in text.strip().strip('()').split(',')]
        if len(fields) != 2 * len(self.regions):
            raise ValueError(f"World {text!r} needs a choice and an outcome per region")
        choices, outcomes = [], []
        for region, choice, sign in zip(self.regions, fields[0::2], fields[1::2]):
            m = re.fullmatch(rf'{re.escape(region)}(\d+)', choice)
            atom = Atom(region, int(m.group(1)), sign) if m else None
            if atom is None or not self.declares(atom):
                raise ValueError(f"World {text!r}: {choice},{sign} is not declared for region {region}")
            choices.append(atom.measurement - 1)
            outcomes.append(self.labels(region, atom.measurement).index(sign))
        return World(tuple(choices), tuple(outcomes))


@dataclass(frozen=True)
class CausalStructure:
    """Region-level light-cone relation.

    `cone` holds pairs (a, b) meaning b lies in the forward cone of a. The
    relation is taken reflexive; distinct regions related in neither
    direction are spacelike.
    """
    regions: Tuple[str, ...]
    cone: frozenset = frozenset()

    def __post_init__(self):
        for a, b in self.cone:
            if a not in self.regions or b not in self.regions:
                raise ValueError(f"Cone pair ({a}, {b}) names an undeclared region")
            if a != b and (b, a) in self.cone:
                raise ValueError(f"Regions {a} and {b} cannot each lie in the other's forward cone")

    def in_forward_cone(self, a: str, b: str) -> bool:
        """True when region b lies in V+(a)."""
        return a == b or (a, b) in self.cone

    def spacelike(self, a: str, b: str) -> bool:
        return not self.in_forward_cone(a, b) and not self.in_forward_cone(b, a)


@dataclass(frozen=True)
class Frame:
    """A time ordering of the regions, earliest first."""
    order: Tuple[str, ...]

    def later(self, a: str, b: str) -> bool:
        """True when region a happens after region b in this frame."""
        return self.order.index(a) > self.order.index(b)


HARDY_SETUP = Setup.uniform(('L', 'R'), 2)
HARDY_CAUSAL = CausalStructure(('L', 'R'))


def enumerate_logical_worlds(setup: Setup, capacity: Optional[int] = None) -> List[World]:
    """All (N_M x N_O)^N_E logically possible worlds in lexicographic order."""
    capacity = Config.WORLD_CAPACITY if capacity is None else capacity
    count = setup.world_count
    if count > capacity:
        raise CapacityError(f"{count} logical worlds exceed the capacity of {capacity}")

    per_region = [setup.region_pairs(r) for r in range(len(setup.regions))]
    worlds = [World(tuple(c for c, _ in combo), tuple(o for _, o in combo))
              for combo in itertools.product(*per_region)]
    logger.debug("Enumerated %d logical worlds over regions %s", len(worlds), setup.regions)
    return worlds


@functools.lru_cache(maxsize=None)
def logical_worlds(setup: Setup) -> Tuple[World, ...]:
    """Cached enumeration; WorldSet bit i is world i of this tuple."""
    return tuple(enumerate_logical_worlds(setup))


@dataclass(frozen=True)
class WorldSet:
    """Subset of the logical worlds of a setup, held as a bitmask."""
    setup: Setup = field(repr=False)
    mask: int = 0

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.setup.world_count:
            raise ValueError(f"Mask {self.mask:#x} has bits beyond {self.setup.world_count} worlds")

    @classmethod
    def empty(cls, setup: Setup) -> WorldSet:
        return cls(setup, 0)

    @classmethod
    def full(cls, setup: Setup) -> WorldSet:
        return cls(setup, (1 << setup.world_count) - 1)

    @classmethod
    def of(cls, setup: Setup, worlds: Iterable[World]) -> WorldSet:
        mask = 0
        for w in worlds:
            mask |= 1 << setup.world_index(w)
        return cls(setup, mask)

    def _check(self, other: WorldSet) -> None:
        if other.setup != self.setup:
            raise ValueError("World sets over different setups cannot be combined")

    def __or__(self, other: WorldSet) -> WorldSet:
        self._check(other)
        return WorldSet(self.setup, self.mask | other.mask)

    def __and__(self, other: WorldSet) -> WorldSet:
        self._check(other)
        return WorldSet(self.setup, self.mask & other.mask)

    def __sub__(self, other: WorldSet) -> WorldSet:
        self._check(other)
        return WorldSet(self.setup, self.mask & ~other.mask)

    def __invert__(self) -> WorldSet:
        """Complement within the logical worlds."""
        return WorldSet.full(self.setup) - self

    def __le__(self, other: WorldSet) -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def __contains__(self, w: World) -> bool:
        return bool(self.mask >> self.setup.world_index(w) & 1)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __iter__(self) -> Iterator[World]:
        worlds = logical_worlds(self.setup)
        mask, i = self.mask, 0
        while mask:
            if mask & 1:
                yield worlds[i]
            mask >>= 1
            i += 1

    def format(self) -> str:
        return '{' + ', '.join(self.setup.format_world(w) for w in self) + '}'


def atom_truth(setup: Setup, w: World, atom: Atom) -> bool:
    """Choice atoms hold when chosen; outcome atoms also need their outcome."""
    r = setup.region_index(atom.region)
    if w.choices[r] != atom.measurement - 1:
        return False
    if atom.sign is None:
        return True
    return setup.labels(atom.region, atom.measurement)[w.outcomes[r]] == atom.sign


def conflict_region(setup: Setup, w: World, c: Atom) -> Optional[str]:
    """Region where choice c conflicts with w, or None when w already has c."""
    if not c.is_choice:
        raise FormulaInvalid(f"{c.name} is an outcome atom; a conflict needs a choice")
    return None if atom_truth(setup, w, c) else c.region


def agrees_outside_cone(setup: Setup, v: World, w: World, source: Optional[str],
                        causal: CausalStructure) -> bool:
    """v and w coincide on every region outside V+(source).

    With no source the cone is empty and the worlds must be equal.
    """
    for r, region in enumerate(setup.regions):
        if source is not None and causal.in_forward_cone(source, region):
            continue
        if v.choices[r] != w.choices[r] or v.outcomes[r] != w.outcomes[r]:
            return False
    return True


def frames(setup: Setup, causal: CausalStructure) -> List[Frame]:
    """Orderings of the regions that keep every cone-related pair in cone order."""
    result = []
    for order in itertools.permutations(setup.regions):
        if all(order.index(a) < order.index(b)
               for a in order for b in order
               if a != b and causal.in_forward_cone(a, b)):
            result.append(Frame(order))
    return result


def localized_outside(f: Formula, region: str, causal: CausalStructure) -> bool:
    """Every atom of f lives in a region outside V+(region)."""
    return all(not causal.in_forward_cone(region, r) for r in regions_of(f))
