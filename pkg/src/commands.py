"""Check suites behind the CLI commands; each returns a Report."""

import logging
from typing import List, Optional

import numpy as np
import pandas as pd

from .config import Config
from .errors import SideConditionViolated
from .experiment import frames, logical_worlds
from .formula import Atom
from .histories import (
    CONSISTENCY_TOLERANCE, build_family, check_consistency, history_verdicts, injected_family,
    natural_family, policy_independent,
)
from .proofcheck import ProofScript, run_script, script_report
from .quantum import (
    PREDICTIONS, born_probability, marginal_deviation, microcausality_sweep, no_signaling_sweep,
    reduce, verify_predictions,
)
from .report import Report, Status
from .runconfig import RunConfig
from .semantics import (
    check_loc1d, fuzz_eq_2_1, vacuity_demo, verify_appendix_identities, verify_loc1_lemmas,
    verify_loc1f_random,
)

logger = logging.getLogger(__name__)


def _is_hardy(rc: RunConfig) -> bool:
    return all(rc.setup.declares(Atom(r, m, s)) for r in 'LR' for m in (1, 2) for s in '+-')


def cmd_worlds(rc: RunConfig) -> Report:
    """Logical and physically possible worlds, and why each missing world is out."""
    m = rc.model()
    setup = m.setup
    report = Report('Worlds')
    logical = logical_worlds(setup)
    report.note(f"Regions: {', '.join(setup.regions)}; frames: "
                + '; '.join(' < '.join(f.order) for f in frames(setup, m.causal)))
    report.add('worlds.count', Status.PASS, f"{len(logical)} logical / {len(m.phys)} physical")

    excluded_by = {p.event: p.eq_id for p in PREDICTIONS.values() if not p.positive}
    for w in logical:
        if w in m.phys:
            continue
        text = setup.format_world(w)
        tag = excluded_by.get(text) if _is_hardy(rc) else None
        report.add(f"worlds.excluded.{text}", Status.PASS,
                   f"excluded by {tag}" if tag else 'null entry')

    frame = rc.table.to_frame()
    report.note(frame.to_string(index=False))
    report.attach('worlds', frame)
    return report


def cmd_quantum(rc: RunConfig) -> Report:
    """Predictions, no-signalling, microcausality and the reduction formula."""
    report = Report('Quantum')
    table = rc.table
    if _is_hardy(rc):
        report.extend(verify_predictions(rc.setup, table, rc.numeric_tolerance))
    report.note(table.pivot().to_string(float_format=lambda x: f"{x:.6f}"))
    report.attach('joint_table', table.to_frame())

    deviation = marginal_deviation(table)
    report.add('quantum.orthodox-locality',
               Status.PASS if deviation <= rc.numeric_tolerance else Status.FAIL,
               f"max marginal change {deviation:.3e}")

    if rc.quantum is None:
        report.add('quantum.sweeps', Status.FLAG, f"skipped: model given as {rc.mode}")
        return report

    model = rc.quantum
    signaling = no_signaling_sweep(model, rc.numeric_tolerance)
    commutators = microcausality_sweep(model)
    worst_signal = max(v for _, _, v in signaling)
    worst_comm = max(v for _, _, v in commutators)
    report.add('quantum.no-signaling', Status.PASS if worst_signal <= rc.numeric_tolerance else Status.FAIL,
               f"max deviation {worst_signal:.3e} over {len(signaling)} pairs")
    report.add('quantum.microcausality', Status.PASS if worst_comm <= rc.numeric_tolerance else Status.FAIL,
               f"max commutator {worst_comm:.3e} over {len(commutators)} pairs")
    report.attach('sweeps', pd.DataFrame(
        [(a, b, s, c) for (a, b, s), (_, _, c) in zip(signaling, commutators)],
        columns=['left', 'right', 'no_signaling', 'commutator']))

    # Reduction then probability: p(a & b) = Tr[Pb (Pa S Pa)] for commuting Pa, Pb.
    meas = model.measurements
    rho = model.state.density()
    worst = 0.0
    for w in logical_worlds(rc.setup):
        left, right = (rc.setup.outcome_atom(w, r) for r in rc.setup.regions)
        pa = meas.get(left.region, left.measurement, left.sign)
        pb = meas.get(right.region, right.measurement, right.sign)
        branch, _ = reduce(rho, pa)
        worst = max(worst, abs(float(np.real(np.trace(pb @ branch))) - born_probability(rho, pa @ pb)))
    report.add('quantum.reduction', Status.PASS if worst <= rc.numeric_tolerance else Status.FAIL,
               f"max deviation {worst:.3e}")
    return report


def cmd_lemmas(rc: RunConfig, seed: int = 0) -> Report:
    """Eq. (2.1) fuzz, vacuity, LOC1c-f and the appendix identities."""
    m = rc.model()
    rng = np.random.default_rng(seed)
    report = Report('Lemmas')
    report.note(f"Seed {seed}, {Config.FUZZ_TRIALS} random triples")
    report.extend([fuzz_eq_2_1(m, rng, Config.FUZZ_TRIALS)])

    if not _is_hardy(rc):
        report.add('lemmas.proof-instances', Status.FLAG, 'skipped: setup does not declare L/R atoms')
        report.extend(verify_appendix_identities(m, _generic_pool(rc)))
        return report

    r1 = Atom('R', 1)
    report.extend(vacuity_demo(m, r1, rng, 100))
    report.extend(verify_loc1_lemmas(m))
    report.extend([verify_loc1f_random(m, m.parse('L1'), r1, rng, 200)])
    report.extend(verify_appendix_identities(m))
    try:
        check_loc1d(m, m.parse('L1'), m.parse('R2+'), r1, m.parse('R1-'))
        report.add('loc1d.side-condition', Status.FAIL, 'R2+ accepted inside the cone of R1')
    except SideConditionViolated as e:
        report.add('loc1d.side-condition', Status.FLAG, f"rejected as expected: {e}")
    return report


def _generic_pool(rc: RunConfig) -> List[str]:
    atoms = []
    for region in rc.setup.regions:
        atoms.append(f"{region}1")
        atoms.extend(f"{region}1{s}" for s in '+-' if rc.setup.declares(Atom(region, 1, s)))
    return atoms


def cmd_proof(rc: RunConfig, script: Optional[str] = None) -> Report:
    """Replay a proof script; `script` is 'builtin', a path, or None for the config's."""
    m = rc.model()
    if not _is_hardy(rc):
        report = Report('Proof replay')
        report.add('proof.status', Status.FLAG, 'skipped: the constraint search needs the L/R setup')
        return report
    if script and script != 'builtin':
        proof = ProofScript.from_file(script, rc.setup)
    elif script is None and rc.script_lines:
        proof = ProofScript.from_lines(f"{rc.source or 'config'} [script]", rc.script_lines, rc.setup)
    else:
        proof = ProofScript.builtin(rc.setup)
    logger.info("Replaying %s (%d lines)", proof.name, len(proof.lines))
    result = run_script(m, proof, rc.candidate_capacity)
    report = script_report(m, proof, result)
    cert = result.contradiction.certificate
    if cert is not None:
        report.attach('certificate', pd.DataFrame.from_records([
            {'candidate': v.index, 'world': rc.setup.format_world(v.world), 'constraint': v.constraint_id}
            for v in cert.log]))
    return report


def cmd_histories(rc: RunConfig, seed: int = 0) -> Report:
    """Branch tree, consistency of the natural family, line 5 and (5.4)."""
    m = rc.model()
    report = Report('Histories')
    if not _is_hardy(rc):
        report.add('histories.tree', Status.FLAG, 'skipped: setup does not declare L/R atoms')
        return report
    tree = build_family(m)
    report.note(tree.render())
    report.attach('leaves', tree.leaf_frame())
    report.extend(history_verdicts(tree))

    if rc.quantum is None:
        report.add('histories.consistency', Status.FLAG, f"skipped: model given as {rc.mode}")
    else:
        state, meas = rc.quantum.state, rc.quantum.measurements
        worst = check_consistency(natural_family(state, meas, rc.setup))
        report.add('histories.consistency', Status.PASS if worst <= CONSISTENCY_TOLERANCE else Status.FAIL,
                   f"max |Re D| off-diagonal {worst:.3e}")
        injected = check_consistency(injected_family(state, meas, rc.setup))
        report.add('histories.consistency-injected', Status.PASS if injected > 0.01 else Status.FAIL,
                   f"R2-then-R1 family max |Re D| {injected:.3e}")
        report.add('histories.consistency-functional', Status.FLAG,
                   'standard decoherence functional; the argument states consistency without one')
    report.extend([policy_independent(m, np.random.default_rng(seed))])
    return report


def cmd_all(rc: RunConfig, seed: int = 0, script: Optional[str] = None) -> List[Report]:
    return [cmd_worlds(rc), cmd_quantum(rc), cmd_lemmas(rc, seed),
            cmd_proof(rc, script), cmd_histories(rc, seed)]
