import os
import re
from collections import defaultdict

import pytest

from recapaug.icc import build_default_profiles
from recapaug.policy import AssetBanks
from recapaug.press import build_default_presets
from recapaug.printsim import BLUENOISE_MODES, DotClusterTable, make_bluenoise_texture
from recapaug.replay import BackgroundBank, MoireTexture, build_default_layouts, tile_layout


@pytest.fixture(scope="session")
def test_banks():
    """Small but complete banks: unwarped moiré tiles and 32px dither arrays
    keep unit tests fast; full-size banks are exercised by the acceptance
    suite."""
    layouts = build_default_layouts()
    moire = [
        MoireTexture(layout.name, warp, tile_layout(layout))
        for layout in layouts[:2]
        for warp in range(2)
    ]
    bluenoise = [
        make_bluenoise_texture(mode, 0, seed=123, size=32) for mode in BLUENOISE_MODES
    ]
    return AssetBanks(
        profiles=build_default_profiles(),
        presets=build_default_presets(),
        moire_textures=moire,
        bluenoise=bluenoise,
        backgrounds=BackgroundBank.fallback(),
        cluster_table=DotClusterTable.default(),
    )


@pytest.fixture(scope="session")
def full_bank_dir(tmp_path_factory):
    """The real 190-moiré + 48-blue-noise bank, generated once per session
    through the actual CLI command."""
    from recapaug.cli import main

    out = tmp_path_factory.mktemp("fullbank")
    rc = main(["gen-banks", "--out", str(out), "--seed", "2024"])
    assert rc == 0
    return out


# --- acceptance criterion reporting -----------------------------------------

CRITERIA = {
    1: "structural constants",
    2: "identity/endpoint suite",
    3: "oracle equivalence",
    4: "blue-noise properties",
    5: "label semantics",
    6: "end-to-end determinism",
    7: "SARE desk-scale behavior",
    8: "degenerate-domain variance",
}

_CRITERION_RE = re.compile(r"test_acceptance\.py::.*test_c(\d+)_")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = defaultdict(lambda: {"passed": 0, "failed": 0})
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            match = _CRITERION_RE.search(report.nodeid)
            if match:
                key = "passed" if status == "passed" else "failed"
                outcomes[int(match.group(1))][key] += 1
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        if number not in outcomes:
            continue
        counts = outcomes[number]
        verdict = "PASS" if counts["failed"] == 0 else "FAIL"
        terminalreporter.write_line(
            f"criterion {number} ({CRITERIA[number]}): {verdict} "
            f"({counts['passed']} passed, {counts['failed']} failed)"
        )
