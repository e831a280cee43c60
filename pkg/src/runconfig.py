"""Run configuration: the `--config` INI file.

    [setup]       regions = L, R / measurements = 2 / outcomes = +, - / cone = L>R, ...
    [model]       mode = preset-optimal | solve | explicit | table | uniform
                  amplitudes = a, b, c, d / amplitudes_imag = ... / basis.L1 = theta, phi
    [table]       (L1,-,R1,+) = 0.09 ...   (mode = table; missing worlds are 0)
    [tolerances]  null_tolerance / numeric_tolerance
    [search]      candidate_capacity / world_capacity
    [script]      1 = <formula> [<tags>] ...

Every section is optional; with no file at all the Hardy preset is used.
Numbers must be plain decimals. Unknown sections and keys are rejected with
the line and column where they appear.
"""

import configparser
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .config import Config
from .errors import ConfigInvalid, PreconditionViolated
from .experiment import CausalStructure, HARDY_CAUSAL, HARDY_SETUP, Setup
from .quantum import JointTable, QuantumModel, build_hardy_model, joint_table
from .semantics import Model, build_model

logger = logging.getLogger(__name__)

MODES = ('preset-optimal', 'solve', 'explicit', 'table', 'uniform')

_KEYS = {
    'setup': {'regions', 'measurements', 'outcomes', 'cone'},
    'model': {'mode', 'amplitudes', 'amplitudes_imag'},
    'table': None,          # world texts, checked separately
    'tolerances': {'null_tolerance', 'numeric_tolerance'},
    'search': {'candidate_capacity', 'world_capacity'},
    'script': None,         # line numbers
}
_BASIS_KEY = re.compile(r'basis\.([A-Za-z]+)(\d+)')
_DECIMAL = re.compile(r'[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?')


@dataclass
class RunConfig:
    setup: Setup = HARDY_SETUP
    causal: CausalStructure = HARDY_CAUSAL
    mode: str = 'preset-optimal'
    quantum: Optional[QuantumModel] = None
    table: Optional[JointTable] = None
    null_tolerance: float = Config.NULL_TOLERANCE
    numeric_tolerance: float = Config.NUMERIC_TOLERANCE
    candidate_capacity: int = Config.CANDIDATE_CAPACITY
    world_capacity: int = Config.WORLD_CAPACITY
    script_lines: Optional[Tuple[str, ...]] = None
    source: Optional[Path] = None
    _model: Optional[Model] = field(default=None, repr=False)

    def model(self) -> Model:
        """Possible-worlds model of the configured table, built once."""
        if self._model is None:
            try:
                self._model = build_model(self.setup, self.causal, self.table)
            except PreconditionViolated as e:
                raise ConfigInvalid(f"Unusable joint table: {e}") from e
        return self._model


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def _locate(text: str, section: str, key: Optional[str] = None) -> Tuple[Optional[int], Optional[int]]:
    """1-based line and column of a section header or of a key inside it."""
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith('[') and stripped.endswith(']'):
            current = stripped[1:-1].strip()
            if key is None and current == section:
                return n, raw.index('[') + 1
            continue
        if key is not None and current == section:
            name = re.split(r'\s*[=:]', stripped, maxsplit=1)[0]
            if name == key:
                return n, raw.index(key) + 1
    return None, None


def _error(text: str, message: str, section: str, key: Optional[str] = None) -> ConfigInvalid:
    line, column = _locate(text, section, key)
    return ConfigInvalid(message, line, column)


def _number(text: str, section: str, key: str, value: str) -> float:
    value = value.strip()
    if not _DECIMAL.fullmatch(value):
        raise _error(text, f"[{section}] {key}: {value!r} is not a decimal number", section, key)
    return float(value)


def _numbers(text: str, section: str, key: str, value: str) -> List[float]:
    return [_number(text, section, key, part) for part in value.split(',')]


def _integer(text: str, section: str, key: str, value: str) -> int:
    number = _number(text, section, key, value)
    if number != int(number) or number <= 0:
        raise _error(text, f"[{section}] {key} must be a positive integer", section, key)
    return int(number)


def _read(text: str, name: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, delimiters=('=',),
                                       comment_prefixes=('#', ';'), inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=name)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigInvalid("Entry outside of any [section]", e.lineno, 1) from e
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigInvalid(e.message.split(':', 1)[-1].strip().splitlines()[0],
                            e.lineno, 1) from e
    except configparser.ParsingError as e:
        lineno, line = e.errors[0]
        raise ConfigInvalid(f"Cannot parse {line!r}", lineno, 1) from e
    return parser


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

def _check_keys(text: str, parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in _KEYS:
            raise _error(text, f"Unknown section [{section}]", section)
        allowed = _KEYS[section]
        for key in parser[section]:
            if section == 'model' and _BASIS_KEY.fullmatch(key):
                continue
            if allowed is not None and key not in allowed:
                raise _error(text, f"Unknown key {key!r} in [{section}]", section, key)


def _setup(text: str, section) -> Tuple[Setup, CausalStructure]:
    regions = tuple(r.strip() for r in section.get('regions', 'L, R').split(',') if r.strip())
    n = _integer(text, 'setup', 'measurements', section.get('measurements', '2'))
    labels = tuple(s.strip() for s in section.get('outcomes', '+, -').split(',') if s.strip())
    try:
        setup = Setup.uniform(regions, n, labels)
        cone = []
        for pair in section.get('cone', '').split(','):
            if not pair.strip():
                continue
            a, sep, b = pair.partition('>')
            if not sep:
                raise ValueError(f"Cone entry {pair.strip()!r} is not of the form A>B")
            cone.append((a.strip(), b.strip()))
        causal = CausalStructure(regions, frozenset(cone))
    except ValueError as e:
        raise _error(text, str(e), 'setup') from e
    return setup, causal


def _table(text: str, parser, setup: Setup, null_tolerance: float) -> JointTable:
    probs = np.zeros(setup.world_count)
    section = parser['table'] if parser.has_section('table') else {}
    for key, value in section.items():
        world_text = key if key.startswith('(') else f"({key})"
        try:
            w = setup.parse_world(world_text)
        except ValueError as e:
            raise _error(text, str(e), 'table', key) from e
        probs[setup.world_index(w)] = _number(text, 'table', key, value)
    return JointTable(setup, probs, null_tolerance)


def _quantum(text: str, section, mode: str, null_tolerance: float) -> QuantumModel:
    amplitudes = angles = None
    if mode == 'explicit':
        if 'amplitudes' not in section:
            raise _error(text, "Explicit mode needs amplitudes", 'model')
        real = np.array(_numbers(text, 'model', 'amplitudes', section['amplitudes']))
        imag = (np.array(_numbers(text, 'model', 'amplitudes_imag', section['amplitudes_imag']))
                if 'amplitudes_imag' in section else np.zeros_like(real))
        if real.shape != imag.shape:
            raise _error(text, "amplitudes and amplitudes_imag differ in length",
                         'model', 'amplitudes_imag')
        amplitudes = real + 1j * imag
        angles = {}
        for key, value in section.items():
            m = _BASIS_KEY.fullmatch(key)
            if m:
                pair = _numbers(text, 'model', key, value)
                if len(pair) != 2:
                    raise _error(text, f"{key} needs 'theta, phi'", 'model', key)
                angles[(m.group(1), int(m.group(2)))] = (pair[0], pair[1])
    try:
        return build_hardy_model(mode, amplitudes, angles, null_tolerance)
    except ConfigInvalid as e:
        raise _error(text, str(e), 'model') from e


def parse_run_config(text: str, name: str = '<config>',
                     tolerance: Optional[float] = None) -> RunConfig:
    parser = _read(text, name)
    _check_keys(text, parser)
    rc = RunConfig()

    if parser.has_section('setup'):
        rc.setup, rc.causal = _setup(text, parser['setup'])

    if parser.has_section('tolerances'):
        tol = parser['tolerances']
        if 'null_tolerance' in tol:
            rc.null_tolerance = _number(text, 'tolerances', 'null_tolerance', tol['null_tolerance'])
        if 'numeric_tolerance' in tol:
            rc.numeric_tolerance = _number(text, 'tolerances', 'numeric_tolerance', tol['numeric_tolerance'])
    if tolerance is not None:
        rc.null_tolerance = tolerance
    if rc.null_tolerance <= 0 or rc.numeric_tolerance <= 0:
        raise _error(text, "Tolerances must be positive", 'tolerances')

    if parser.has_section('search'):
        search = parser['search']
        if 'candidate_capacity' in search:
            rc.candidate_capacity = _integer(text, 'search', 'candidate_capacity', search['candidate_capacity'])
        if 'world_capacity' in search:
            rc.world_capacity = _integer(text, 'search', 'world_capacity', search['world_capacity'])
    if rc.setup.world_count > rc.world_capacity:
        raise _error(text, f"{rc.setup.world_count} logical worlds exceed world_capacity", 'search')

    model = parser['model'] if parser.has_section('model') else {}
    rc.mode = model.get('mode', 'preset-optimal').strip()
    if rc.mode not in MODES:
        raise _error(text, f"Unknown model mode {rc.mode!r}; expected one of {', '.join(MODES)}",
                     'model', 'mode')
    if parser.has_section('table') and rc.mode != 'table':
        raise _error(text, "[table] is only read with mode = table", 'table')

    if rc.mode == 'table':
        rc.table = _table(text, parser, rc.setup, rc.null_tolerance)
    elif rc.mode == 'uniform':
        rc.table = JointTable.uniform(rc.setup, rc.null_tolerance)
    else:
        if rc.setup != HARDY_SETUP:
            raise _error(text, "Quantum model modes need the two-region, two-measurement +/- setup",
                         'setup')
        rc.quantum = _quantum(text, model, rc.mode, rc.null_tolerance)
        rc.table = joint_table(rc.setup, rc.quantum, rc.null_tolerance)

    if parser.has_section('script'):
        entries = []
        for key, value in parser['script'].items():
            if not key.isdigit():
                raise _error(text, f"Script keys are line numbers, got {key!r}", 'script', key)
            entries.append((int(key), value.strip()))
        numbers = sorted(n for n, _ in entries)
        if numbers != list(range(1, len(numbers) + 1)):
            raise _error(text, "Script lines must be numbered 1, 2, 3, ... without gaps", 'script')
        rc.script_lines = tuple(v for _, v in sorted(entries))

    logger.info("Run configuration %s: mode %s, %d regions", name, rc.mode, len(rc.setup.regions))
    return rc


def load_run_config(path: Optional[Path] = None, tolerance: Optional[float] = None) -> RunConfig:
    """Read `path`, or fall back to the Hardy preset when no path is given."""
    if path is None:
        return parse_run_config('', '<preset>', tolerance)
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigInvalid(f"Cannot read config {path}: {e}") from e
    rc = parse_run_config(text, str(path), tolerance)
    rc.source = Path(path)
    return rc
