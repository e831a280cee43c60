"""Two-qubit quantum backend for Hardy-type experiments.

Covers the probability and reduction formulas, commutators of local
projectors, the no-signalling trace identity, construction of a Hardy state
with its local measurement bases, and the joint-probability table from which
the physically possible worlds are read off.

Conventions: the L2/R2 eigenbases are the computational basis (|0> is the +
outcome), amplitudes are ordered |LR> = |00>, |01>, |10>, |11>, and a local
2x2 operator is embedded as kron(op, I) on L and kron(I, op) on R.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .config import Config
from .errors import ConfigInvalid, DimensionError, PreconditionViolated, SolveFailure
from .experiment import HARDY_SETUP, Setup, World, WorldSet, logical_worlds
from .report import Status, Verdict

logger = logging.getLogger(__name__)

DIM = 4
_I2 = np.eye(2, dtype=complex)

# (region, measurement) -> (theta, phi) of the local basis
Angles = Dict[Tuple[str, int], Tuple[float, float]]


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    tolerance: float = Config.NUMERIC_TOLERANCE

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, 'amplitudes', amps)
        if amps.shape != (DIM,):
            raise DimensionError(f"State needs {DIM} amplitudes, got shape {amps.shape}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1) > self.tolerance:
            raise PreconditionViolated(f"State norm is {norm!r}, not 1", deviation=abs(norm - 1))

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def is_projector(p: np.ndarray, tol: float = Config.NUMERIC_TOLERANCE) -> bool:
    """Hermitian and idempotent within tol."""
    return (np.max(np.abs(p - p.conj().T)) <= tol
            and np.max(np.abs(p @ p - p)) <= tol)


def local_basis(theta: float, phi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Rank-1 projectors (+, -) of the qubit basis at polar angle theta, phase phi."""
    plus = np.array([math.cos(theta), np.exp(1j * phi) * math.sin(theta)], dtype=complex)
    minus = np.array([-np.exp(-1j * phi) * math.sin(theta), math.cos(theta)], dtype=complex)
    return np.outer(plus, plus.conj()), np.outer(minus, minus.conj())


def embed(local: np.ndarray, side: int) -> np.ndarray:
    """Lift a 2x2 operator on side 0 (L) or 1 (R) to the two-qubit space."""
    return np.kron(local, _I2) if side == 0 else np.kron(_I2, local)


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Projector per (region, measurement, sign) on the two-qubit space."""
    projectors: Dict[Tuple[str, int, str], np.ndarray]

    def get(self, region: str, measurement: int, sign: str) -> np.ndarray:
        return self.projectors[(region, measurement, sign)]

    def labels(self, region: Optional[str] = None) -> List[Tuple[str, int, str]]:
        return [k for k in self.projectors if region is None or k[0] == region]

    def validate(self, tol: float = Config.NUMERIC_TOLERANCE) -> None:
        """Each pair is a complete set of orthogonal projectors."""
        for key, p in self.projectors.items():
            if not is_projector(p, tol):
                raise PreconditionViolated(f"{key[0]}{key[1]}{key[2]} is not a projector")
        pairs = {(r, m) for r, m, _ in self.projectors}
        for r, m in pairs:
            plus, minus = self.get(r, m, '+'), self.get(r, m, '-')
            if np.max(np.abs(plus + minus - np.eye(DIM))) > tol:
                raise PreconditionViolated(f"{r}{m}+ and {r}{m}- do not sum to identity")
            if np.max(np.abs(plus @ minus)) > tol:
                raise PreconditionViolated(f"{r}{m}+ and {r}{m}- are not orthogonal")


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """A state and the local basis angles of every measurement."""
    state: StateVector
    angles: Angles
    setup: Setup = HARDY_SETUP

    @property
    def measurements(self) -> MeasurementModel:
        projectors = {}
        for (region, measurement), (theta, phi) in sorted(self.angles.items()):
            plus, minus = local_basis(theta, phi)
            side = self.setup.region_index(region)
            projectors[(region, measurement, '+')] = embed(plus, side)
            projectors[(region, measurement, '-')] = embed(minus, side)
        return MeasurementModel(projectors)


# ---------------------------------------------------------------------------
# Principles: probability, reduction, microcausality, no-signalling
# ---------------------------------------------------------------------------

def _check_dims(*ops: np.ndarray) -> None:
    for op in ops:
        if op.shape != (DIM, DIM):
            raise DimensionError(f"Expected a {DIM}x{DIM} operator, got shape {op.shape}")


def _density(state) -> np.ndarray:
    return state.density() if isinstance(state, StateVector) else np.asarray(state, dtype=complex)


def born_probability(state, p: np.ndarray) -> float:
    """Trace(P S) / Trace(S) for a state vector or density operator S."""
    rho = _density(state)
    _check_dims(rho, p)
    return float(np.real(np.trace(p @ rho) / np.trace(rho)))


def reduce(rho, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split S into the branches P S P and (1-P) S (1-P)."""
    rho = _density(rho)
    _check_dims(rho, p)
    q = np.eye(DIM) - p
    return p @ rho @ p, q @ rho @ q


def commutator_norm(q1: np.ndarray, q2: np.ndarray) -> float:
    """Largest entry magnitude of Q1 Q2 - Q2 Q1."""
    _check_dims(q1, q2)
    return float(np.max(np.abs(q1 @ q2 - q2 @ q1)))


def verify_no_signaling(state, p1: np.ndarray, p2: np.ndarray,
                        tol: float = Config.NUMERIC_TOLERANCE) -> float:
    """|Tr P1 [P2 S P2 + (1-P2) S (1-P2)] - Tr P1 S|.

    Requires P1 and P2 to commute (projectors of spacelike regions); when
    they do not the deviation is computed but PreconditionViolated is raised.
    """
    rho = _density(state)
    yes, no = reduce(rho, p2)
    deviation = float(abs(np.trace(p1 @ (yes + no)) - np.trace(p1 @ rho)))
    if commutator_norm(p1, p2) > tol:
        raise PreconditionViolated(
            f"projectors do not commute; no-signalling deviation {deviation:.3e}",
            deviation=deviation)
    return deviation


# ---------------------------------------------------------------------------
# Hardy construction
# ---------------------------------------------------------------------------

def hardy_state(a: complex, b: complex, d: complex) -> StateVector:
    """a|++> + b|+-> + d|--> in the L2/R2 eigenbasis; no |-+> component."""
    return StateVector(np.array([a, b, 0, d], dtype=complex))


def hardy_bases(a: float, b: float, d: float) -> Angles:
    """L1 and R1 bases that make the three Hardy zeros exact for real a, b, d.

    R1+ is orthogonal to the R-state left by L2+, and L1- is orthogonal to the
    L-state left by R2-.
    """
    n, m = math.hypot(a, b), math.hypot(b, d)
    if n < 1e-12 or m < 1e-12:
        raise SolveFailure(f"Degenerate amplitudes a={a}, b={b}, d={d}")
    return {
        ('L', 1): (math.atan2(d, b), 0.0),
        ('L', 2): (0.0, 0.0),
        ('R', 1): (math.atan2(-a, b), 0.0),
        ('R', 2): (0.0, 0.0),
    }


def paradox_probability(a: float, b: float, d: float) -> float:
    """p(L1- & R1+ | L1, R1) for the state and bases of hardy_bases."""
    denom = (a * a + b * b) * (b * b + d * d)
    return (a * b * d) ** 2 / denom if denom > 0 else 0.0


def _spherical(x: np.ndarray) -> Tuple[float, float, float]:
    alpha, beta = x
    return (math.sin(alpha) * math.cos(beta), math.cos(alpha), math.sin(alpha) * math.sin(beta))


def solve_hardy(null_tolerance: float = Config.NULL_TOLERANCE) -> QuantumModel:
    """Maximise the paradox probability over unit (a, b, d) with Nelder-Mead."""
    result = minimize(lambda x: -paradox_probability(*_spherical(x)),
                      x0=np.array([1.0, 0.7]), method='Nelder-Mead',
                      options={'xatol': 1e-10, 'fatol': 1e-15, 'maxiter': 4000})
    a, b, d = _spherical(result.x)
    logger.info("Hardy solve: %d iterations, paradox probability %.9f",
                result.nit, -result.fun)
    model = QuantumModel(hardy_state(a, b, d), hardy_bases(a, b, d))
    problems = hardy_violations(joint_table(HARDY_SETUP, model, null_tolerance))
    if problems:
        raise SolveFailure(f"Solved model misses the Hardy conditions: {'; '.join(problems)}")
    return model


def preset_optimal() -> QuantumModel:
    """Closed form of the optimum found by solve_hardy: a = d, a^2 = (3 - sqrt 5)/2."""
    a = math.sqrt((3 - math.sqrt(5)) / 2)
    b = math.sqrt(math.sqrt(5) - 2)
    return QuantumModel(hardy_state(a, b, a), hardy_bases(a, b, a))


def build_hardy_model(mode: str = 'preset-optimal', amplitudes=None,
                      angles: Optional[Angles] = None,
                      null_tolerance: float = Config.NULL_TOLERANCE) -> QuantumModel:
    """Hardy model by preset, numerical solve, or from explicit parameters.

    Explicit models must produce exactly the three Hardy zeros and a positive
    paradox entry, otherwise ConfigInvalid.
    """
    if mode == 'preset-optimal':
        return preset_optimal()
    if mode == 'solve':
        return solve_hardy(null_tolerance)
    if mode != 'explicit':
        raise ConfigInvalid(f"Unknown model mode: {mode!r}")

    try:
        state = StateVector(np.asarray(amplitudes, dtype=complex), tolerance=1e-9)
    except (PreconditionViolated, DimensionError) as e:
        raise ConfigInvalid(f"Invalid amplitudes: {e}") from e
    full = {('L', 2): (0.0, 0.0), ('R', 2): (0.0, 0.0)}
    full.update(angles or {})
    missing = {('L', 1), ('R', 1)} - full.keys()
    if missing:
        raise ConfigInvalid(f"Missing basis angles for {sorted(f'{r}{m}' for r, m in missing)}")
    model = QuantumModel(state, full)
    problems = hardy_violations(joint_table(HARDY_SETUP, model, null_tolerance))
    if problems:
        raise ConfigInvalid(f"Model is not of Hardy type: {'; '.join(problems)}")
    return model


def model_to_config_text(model: QuantumModel) -> str:
    """`[model]` section reproducing the model exactly when reloaded."""
    amps = model.state.amplitudes
    lines = ['[model]', 'mode = explicit',
             'amplitudes = ' + ', '.join(repr(float(x.real)) for x in amps)]
    if np.any(amps.imag != 0):
        lines.append('amplitudes_imag = ' + ', '.join(repr(float(x.imag)) for x in amps))
    for (region, measurement), (theta, phi) in sorted(model.angles.items()):
        lines.append(f"basis.{region}{measurement} = {theta!r}, {phi!r}")
    return '\n'.join(lines) + '\n'


# ---------------------------------------------------------------------------
# Joint table and physically possible worlds
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class JointTable:
    """p(outcomes | choices) per logical world, indexed like logical_worlds."""
    setup: Setup
    probs: np.ndarray
    null_tolerance: float = Config.NULL_TOLERANCE

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, 'probs', probs)
        if probs.shape != (self.setup.world_count,):
            raise DimensionError(
                f"Table has {probs.size} entries for {self.setup.world_count} worlds")

    @classmethod
    def uniform(cls, setup: Setup, null_tolerance: float = Config.NULL_TOLERANCE) -> JointTable:
        probs = [1.0 / _row_size(setup, w) for w in logical_worlds(setup)]
        return cls(setup, np.array(probs), null_tolerance)

    def __getitem__(self, w: World) -> float:
        return float(self.probs[self.setup.world_index(w)])

    def at(self, text: str) -> float:
        """Entry for a world written like "(L1,-,R1,+)"."""
        return self[self.setup.parse_world(text)]

    def with_entry(self, w: World, value: float) -> JointTable:
        probs = self.probs.copy()
        probs[self.setup.world_index(w)] = value
        return JointTable(self.setup, probs, self.null_tolerance)

    def rows(self) -> Dict[Tuple[int, ...], List[World]]:
        """Worlds grouped by their choice tuple, in world order."""
        grouped: Dict[Tuple[int, ...], List[World]] = {}
        for w in logical_worlds(self.setup):
            grouped.setdefault(w.choices, []).append(w)
        return grouped

    def row_sums(self) -> Dict[Tuple[int, ...], float]:
        return {c: sum(self[w] for w in ws) for c, ws in self.rows().items()}

    def to_frame(self) -> pd.DataFrame:
        records = []
        for w in logical_worlds(self.setup):
            atoms = [self.setup.outcome_atom(w, r) for r in self.setup.regions]
            records.append({
                'choices': ','.join(a.choice().name for a in atoms),
                'outcomes': ','.join(a.sign for a in atoms),
                'world': self.setup.format_world(w),
                'probability': self[w],
                'possible': self[w] > self.null_tolerance,
            })
        return pd.DataFrame.from_records(records)

    def pivot(self) -> pd.DataFrame:
        """One row per choice tuple, one column per outcome tuple."""
        frame = self.to_frame()
        return frame.pivot(index='choices', columns='outcomes', values='probability')


def _row_size(setup: Setup, w: World) -> int:
    size = 1
    for r, c in enumerate(w.choices):
        size *= len(setup.outcomes[r][c])
    return size


def joint_table(setup: Setup, model: QuantumModel,
                null_tolerance: float = Config.NULL_TOLERANCE) -> JointTable:
    """Born probability of every world given its choices."""
    if len(setup.regions) != 2:
        raise DimensionError(f"Quantum tables need two regions, setup has {len(setup.regions)}")
    meas = model.measurements
    rho = model.state.density()
    probs = []
    for w in logical_worlds(setup):
        product = np.eye(DIM, dtype=complex)
        for region in setup.regions:
            atom = setup.outcome_atom(w, region)
            product = product @ meas.get(region, atom.measurement, atom.sign)
        probs.append(born_probability(rho, product))
    return JointTable(setup, np.array(probs), null_tolerance)


def physically_possible_worlds(setup: Setup, table: JointTable) -> WorldSet:
    """Worlds whose joint probability exceeds the null tolerance."""
    return WorldSet.of(setup, (w for w in logical_worlds(setup) if table[w] > table.null_tolerance))


def marginal(table: JointTable, choices: Tuple[int, ...], region: str) -> np.ndarray:
    """Outcome distribution of one region given the full choice tuple."""
    r = table.setup.region_index(region)
    dist = np.zeros(len(table.setup.outcomes[r][choices[r]]))
    for w in table.rows()[choices]:
        dist[w.outcomes[r]] += table[w]
    return dist


def marginal_deviation(table: JointTable) -> float:
    """Largest change of any local marginal under a change of far choices."""
    worst = 0.0
    by_local: Dict[Tuple[str, int], List[np.ndarray]] = {}
    for choices in table.rows():
        for r, region in enumerate(table.setup.regions):
            by_local.setdefault((region, choices[r]), []).append(marginal(table, choices, region))
    for dists in by_local.values():
        for dist in dists[1:]:
            worst = max(worst, float(np.max(np.abs(dist - dists[0]))))
    return worst


# ---------------------------------------------------------------------------
# Predictions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    """A zero (or positive) joint probability and its strict-conditional reading."""
    eq_id: str
    event: str          # world whose probability is predicted
    positive: bool
    formula: str

    def holds(self, table: JointTable) -> bool:
        p = table.at(self.event)
        return p > table.null_tolerance if self.positive else p <= table.null_tolerance


PREDICTIONS: Dict[str, Prediction] = {p.eq_id: p for p in (
    Prediction('3.1', '(L2,-,R2,+)', False, '(L2 & R2 & R2+) => (L2 & R2 & L2+)'),
    Prediction('3.2', '(L2,+,R1,+)', False, '(L2 & R1 & L2+) => (L2 & R1 & R1-)'),
    Prediction('3.3', '(L1,-,R2,-)', False, '(L1 & R2 & L1-) => (L1 & R2 & R2+)'),
    Prediction('3.4', '(L1,-,R1,+)', True, '~((L1 & R1 & L1-) => R1-)'),
)}


def hardy_violations(table: JointTable) -> List[str]:
    """Reasons the table is not of Hardy type; empty when it is."""
    problems = [f"prediction {p.eq_id} fails (p{p.event} = {table.at(p.event):.3e})"
                for p in PREDICTIONS.values() if not p.holds(table)]
    zeros = {p.event for p in PREDICTIONS.values() if not p.positive}
    for w in logical_worlds(table.setup):
        text = table.setup.format_world(w)
        if text not in zeros and text != PREDICTIONS['3.4'].event and table[w] <= table.null_tolerance:
            problems.append(f"p{text} is null")
    return problems


def verify_predictions(setup: Setup, table: JointTable,
                       numeric_tolerance: float = Config.NUMERIC_TOLERANCE) -> List[Verdict]:
    """Verdicts for the four predictions plus detector completeness (3.5)."""
    verdicts = []
    for p in PREDICTIONS.values():
        value = table.at(p.event)
        relation = '>' if p.positive else '<='
        status = Status.PASS if p.holds(table) else Status.FAIL
        verdicts.append(Verdict(f"prediction.{p.eq_id}", status,
                                f"p{p.event}={value:.6g} {relation} {table.null_tolerance:g}"))
    sums = table.row_sums()
    worst = max(abs(s - 1) for s in sums.values())
    status = Status.PASS if worst <= numeric_tolerance else Status.FAIL
    verdicts.append(Verdict('prediction.3.5', status, f"max|row sum - 1|={worst:.3e}"))
    return verdicts


# ---------------------------------------------------------------------------
# Sweeps over all cross-region projector pairs
# ---------------------------------------------------------------------------

def _name(key: Tuple[str, int, str]) -> str:
    return f"{key[0]}{key[1]}{key[2]}"


def no_signaling_sweep(model: QuantumModel,
                       tol: float = Config.NUMERIC_TOLERANCE) -> List[Tuple[str, str, float]]:
    """Deviation for every (L projector, R projector) pair."""
    meas = model.measurements
    rho = model.state.density()
    left, right = model.setup.regions
    return [(_name(k1), _name(k2), verify_no_signaling(rho, meas.projectors[k1], meas.projectors[k2], tol))
            for k1 in meas.labels(left) for k2 in meas.labels(right)]


def microcausality_sweep(model: QuantumModel) -> List[Tuple[str, str, float]]:
    """Commutator norm for every (L projector, R projector) pair."""
    meas = model.measurements
    left, right = model.setup.regions
    return [(_name(k1), _name(k2), commutator_norm(meas.projectors[k1], meas.projectors[k2]))
            for k1 in meas.labels(left) for k2 in meas.labels(right)]
