"""Shared fixtures: the Hardy model and a few variations of its table."""

import pytest

from src.experiment import HARDY_CAUSAL, HARDY_SETUP, logical_worlds
from src.quantum import JointTable, build_hardy_model, joint_table
from src.semantics import build_model


@pytest.fixture(scope='session')
def hardy_table():
    return joint_table(HARDY_SETUP, build_hardy_model('preset-optimal'))


@pytest.fixture
def hardy_model(hardy_table):
    return build_model(HARDY_SETUP, HARDY_CAUSAL, hardy_table)


@pytest.fixture
def uniform_model():
    return build_model(HARDY_SETUP, HARDY_CAUSAL, JointTable.uniform(HARDY_SETUP))


@pytest.fixture
def world():
    return HARDY_SETUP.parse_world


@pytest.fixture(scope='session')
def paradox_free_config(hardy_table):
    """Run config text for the Hardy table with the (L1,-,R1,+) entry zeroed."""
    table = hardy_table.with_entry(HARDY_SETUP.parse_world("(L1,-,R1,+)"), 0.0)
    entries = [f"{HARDY_SETUP.format_world(w)} = {table[w]!r}"
               for w in logical_worlds(HARDY_SETUP) if table[w] != 0]
    return "[model]\nmode = table\n\n[table]\n" + '\n'.join(entries) + '\n'
