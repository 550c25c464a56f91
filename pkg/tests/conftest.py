import functools
import warnings

import numpy as np
import pytest
from hypothesis import settings

from dynabg.detection import DetectionConfig, detect
from dynabg.evaluation import ConfusionCounts, SceneConfig, compare, metrics, synth_scene

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def scene(**kw):
    return synth_scene(SceneConfig(**kw))


@functools.lru_cache(maxsize=None)
def scene_detection(mode: str, **kw):
    """(MetricReport, DetectionResult, seconds) for a cached synthetic scene."""
    import time

    frames, gts = scene(**kw)
    t = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("error")  # a non-converged run should not pass quietly
        res = detect(frames, DetectionConfig(mode=mode))
    elapsed = time.perf_counter() - t
    total = sum((compare(m, g) for m, g in zip(res.masks, gts)), ConfusionCounts())
    return metrics(total), res, elapsed


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k)):
        ok, detail = ACCEPTANCE[key]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")
