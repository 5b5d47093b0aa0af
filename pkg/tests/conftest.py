"""Shared fixtures: the acceptance-criteria summary and one trained pipeline.

The pipeline fixture runs the real CLI end to end once per session (corpus,
stage 1, stage 2) and hands the checkpoint directories to every test that
needs a trained model, so training cost is paid once.
"""

import pytest

from segvid import cli, synth
from segvid.grid import write_siv1

ACC_KEY = "segvid/acceptance"


def pytest_sessionstart(session):
    session.config.cache.set(ACC_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.cache.get(ACC_KEY, {})
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(rows, key=int):
        ok, detail = rows[n]
        terminalreporter.write_line(
            f"criterion {int(n):2d} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def criterion(request):
    """Record one acceptance-criterion outcome for the terminal summary."""
    def record(n, ok, detail):
        rows = request.config.cache.get(ACC_KEY, {})
        rows[str(n)] = [bool(ok), detail]
        request.config.cache.set(ACC_KEY, rows)
        assert ok, f"criterion {n}: {detail}"
    return record


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """CLI defaults end to end: 6-clip T=81 corpus, 600-step stage 1, 600-step
    stage 2, plus a single-frame SIV1 input image for generate tests."""
    root = tmp_path_factory.mktemp("pipeline")
    corpus = str(root / "corpus")
    s1 = str(root / "s1")
    s2 = str(root / "s2")
    assert cli.main(["synth", "--out", corpus]) == 0
    assert cli.main(["train-stage1", "--corpus", corpus, "--out", s1]) == 0
    assert cli.main(["train-stage2", "--corpus", corpus, "--stage1", s1,
                     "--out", s2]) == 0
    image = str(root / "input.siv1")
    frame = synth.render_scene(synth.SceneSpec(seed=777, T=17))[:1]
    write_siv1(image, frame)
    return {"root": root, "corpus": corpus, "s1": s1, "s2": s2, "image": image}
