import json
import shutil
from pathlib import Path

import pytest

from trimodal.config import load_config
from trimodal.data import toy_dataset_dir

REPO = Path(__file__).resolve().parent.parent
_acceptance: dict[str, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _acceptance.get(num, (title, True))
    _acceptance[num] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance, key=int):
        title, ok = _acceptance[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title}")


def _merge(base, extra):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


@pytest.fixture
def toy_config(tmp_path):
    """Factory writing a variant of configs/toy.json; outputs go under tmp_path."""
    counter = iter(range(1000))

    def make(out="out", **overrides):
        data = json.loads((REPO / "configs" / "toy.json").read_text())
        data["dataset"]["dir"] = str(toy_dataset_dir())
        data["output"] = {"dir": str(tmp_path / out)}
        _merge(data, overrides)
        path = tmp_path / f"cfg{next(counter)}.json"
        path.write_text(json.dumps(data))
        return path

    return make


@pytest.fixture
def toy_copy(tmp_path):
    """Writable copy of the bundled toy dataset."""
    dest = tmp_path / "toy"
    shutil.copytree(toy_dataset_dir(), dest)
    return dest


@pytest.fixture
def load(toy_config):
    return lambda **kw: load_config(toy_config(**kw))
