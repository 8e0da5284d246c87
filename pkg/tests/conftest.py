import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    tagged, failed = {}, set()
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if not hasattr(rep, "nodeid") or not hasattr(rep, "when"):
                continue
            if rep.failed:
                failed.add(rep.nodeid)
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" in props and rep.when == "call":
                tagged[rep.nodeid] = (props["criterion"], rep.duration, props.get("detail", ""))
    if not tagged:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, ((num, title), secs, detail) in sorted(tagged.items(), key=lambda kv: kv[1][0]):
        verdict = "FAIL" if nodeid in failed else "PASS"
        terminalreporter.write_line(f"[{verdict}] {num:2d}. {title} ({secs:.1f} s) {detail}".rstrip())
