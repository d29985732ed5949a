from __future__ import annotations

import pytest

from ssla.cli import drive_negotiation
from ssla.expression import ExpressionSet, SetRole
from ssla.hashcash import PowPolicy
from ssla.identity import generate_keypair
from ssla.protocol import Hooks, NegotiationParty, ProtocolPolicy
from ssla.service import LoopbackTransport, NegotiationService
from ssla.translation import load_seed_kb, seed_kb_directory

from oracles import load_raw_kb

# The hotspot scenario, as shipped in fixtures/scenario/.
SCENARIO_REQUIREMENTS = ["Function.23.3", "Function.12.1.3", "Function.17", "Function.15"]
SCENARIO_USER_CAPS = ["Technique.7.2"]
SCENARIO_SP_CAPS = [
    "Technique.3.1",
    "Technique.3.5",
    "Technique.7.2",
    "Technique.11.4",
    "Function.15",
]
# Derived by the decision oracle over the seed tables before the build.
SCENARIO_SSLA = [
    "Function.23.3:Technique.3.1",
    "Function.12.1.3:Technique.3.1",
    "Function.17:Technique.7.2",
    "Function.15",
]

# Low difficulty keeps protocol tests fast; hashcash difficulty itself is
# exercised in test_hashcash and the acceptance suite at the 12-bit default.
TEST_POLICY = ProtocolPolicy(pow=PowPolicy(required_bits=8))


@pytest.fixture(scope="session")
def kb():
    return load_seed_kb()


@pytest.fixture(scope="session")
def raw_kb():
    return load_raw_kb(seed_kb_directory())


@pytest.fixture(scope="session")
def user_key():
    return generate_keypair()


@pytest.fixture(scope="session")
def sp_key():
    return generate_keypair()


@pytest.fixture(scope="session")
def other_key():
    return generate_keypair()


def make_user(kb, key, *, seed=11, policy=TEST_POLICY, requirements=None, capabilities=None):
    return NegotiationParty(
        private_key=key,
        kb=kb,
        requirements=ExpressionSet.from_strings(
            SetRole.REQUIREMENT,
            SCENARIO_REQUIREMENTS if requirements is None else requirements,
        ),
        capabilities=ExpressionSet.from_strings(
            SetRole.CAPABILITY, SCENARIO_USER_CAPS if capabilities is None else capabilities
        ),
        policy=policy,
        kb_uri="kb://user-trusted",
        hooks=Hooks.deterministic(seed),
    )


def make_sp(kb, key, *, seed=12, policy=TEST_POLICY, capabilities=None, requirements=()):
    return NegotiationParty(
        private_key=key,
        kb=kb,
        requirements=ExpressionSet.from_strings(SetRole.REQUIREMENT, requirements),
        capabilities=ExpressionSet.from_strings(
            SetRole.CAPABILITY, SCENARIO_SP_CAPS if capabilities is None else capabilities
        ),
        policy=policy,
        provides_service=True,
        kb_uri="kb://sp-trusted",
        hooks=Hooks.deterministic(seed),
    )


def run_scenario(kb, user_key, sp_key, *, user_seed=11, sp_seed=12):
    user = make_user(kb, user_key, seed=user_seed)
    sp = make_sp(kb, sp_key, seed=sp_seed)
    transport = LoopbackTransport(NegotiationService(sp))
    outcome, detail = drive_negotiation(user, sp.identity.hex, transport)
    return outcome, detail, user, sp


@pytest.fixture(scope="session")
def scenario_run(kb, user_key, sp_key):
    """One completed hotspot run: (user record, sp record, user, sp)."""
    outcome, _, user, sp = run_scenario(kb, user_key, sp_key)
    assert outcome == "agreed"
    negotiation_id = next(iter(user.records))
    return user.records[negotiation_id], sp.records[negotiation_id], user, sp
