"""Shared fixtures and the per-criterion pass/fail summary."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from tsmot.simworld import DetectorProfile, WorldConfig, generate_world

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else "FAIL"
        prev = _CRITERIA.get(n)
        if prev is None or prev[1] == "PASS":
            _CRITERIA[n] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}")


@pytest.fixture
def small_world_config() -> WorldConfig:
    return WorldConfig(width=320, height=240, n_objects=5, frames=40, box_width_range=(20, 30),
                       birth_rate=0.0, death_rate=0.0, seed=3)


@pytest.fixture
def small_world(small_world_config):
    return generate_world(small_world_config)


def profile(name="teacher", **kw) -> DetectorProfile:
    base = dict(name=name, base_recall=1.0, occluded_recall=1.0, clutter_rate=0.0,
                localization_std=0.0, cost_per_frame=10.0)
    base.update(kw)
    return DetectorProfile(**base)


@pytest.fixture
def perfect_teacher():
    return profile("teacher", cost_per_frame=48.0)


@pytest.fixture
def noisy_pair():
    t = profile("teacher", base_recall=0.95, occluded_recall=0.85, clutter_rate=0.3,
                localization_std=1.0, cost_per_frame=48.0, feature_noise=0.05)
    s = profile("student", base_recall=0.7, occluded_recall=0.3, clutter_rate=1.0,
                localization_std=2.0, cost_per_frame=26.0, feature_noise=0.08, attention_gain=0.35)
    return t, s


def replace(obj, **kw):
    return dataclasses.replace(obj, **kw)


def rng(seed=0) -> np.random.Generator:
    return np.random.default_rng(seed)
