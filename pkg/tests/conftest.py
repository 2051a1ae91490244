from __future__ import annotations

import os

from hypothesis import HealthCheck, settings

from paroracle.calibration import CalibrationProfile, LayerTiming
from paroracle.cost import NetworkTier, SystemDescriptor
from paroracle.model_ir import parse_model

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# filled by test_acceptance, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def flat_system(alpha=0.0, beta=1.0, delta=4, threshold=0, memory=1e30, gamma=1.0, phi=1, overrides=None):
    """One tier big enough for every test; ring collectives unless a threshold is given."""
    return SystemDescriptor(
        tiers=(NetworkTier("all", 1 << 20, alpha, beta),),
        pe_memory_capacity=memory,
        delta=delta,
        gamma=gamma,
        ring_tree_threshold=threshold,
        contention_phi=phi,
        overrides=overrides or {},
    )


def uniform(fw=1.0, bw=1.0, wu=0.0) -> CalibrationProfile:
    return CalibrationProfile.uniform(fw, bw, wu)


def profile(**rows) -> CalibrationProfile:
    return CalibrationProfile({k: LayerTiming(k, *v) for k, v in rows.items()})


def model(body: str, D=100, B=10, E=1):
    return parse_model(f"dataset D={D} B={B} E={E}\n{body}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
