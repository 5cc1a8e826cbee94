import numpy as np
import pytest

from chaindecode.channel import DecodingProfile, compute_profile
from chaindecode.cli.geometry import Geometry, geometry_to_stats

import oracles

# criterion id -> [(passed, detail), ...]; filled by test_acceptance and echoed at the end
ACCEPTANCE_RESULTS: dict = {}


def reference_stats(d_sp, alpha=2.0, mean_snr_p=20.0):
    return geometry_to_stats(Geometry(d_sp, alpha, mean_snr_p))


@pytest.fixture(scope="session")
def stats_d2():
    return reference_stats(2.0)


@pytest.fixture(scope="session")
def profile_d2(stats_d2):
    return compute_profile(stats_d2)


@pytest.fixture(scope="session")
def random_profiles():
    rng = np.random.default_rng(20240611)
    out = []
    for _ in range(6):
        w, r0, r1, rs = oracles.random_profile_fields(rng)
        out.append(DecodingProfile.from_regions(w, r0, r1, rate_s=rs))
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS):
        parts = ACCEPTANCE_RESULTS[cid]
        ok = all(p for p, _ in parts)
        detail = " | ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {cid:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
