import json
import time
from pathlib import Path

import pytest

from nasdisrupt import cli
from nasdisrupt.corpus import SyntheticSpec

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def small_spec(**kw) -> SyntheticSpec:
    """A corpus small enough for per-test pipeline runs."""
    base = dict(n_groups=6, days=60, n_artcc=4, n_multi_hub_artcc=2, flights_per_group_day=12, seed=3)
    base.update(kw)
    return SyntheticSpec(**base)


def write_run_config(data_dir: Path, spec: SyntheticSpec, **extra) -> Path:
    rc = cli.main(["synth", "--out", str(data_dir), "--write-config"] + (
        ["--spec", str(_dump_spec(data_dir, spec))] if spec is not None else []))
    assert rc == 0
    path = data_dir / "run_config.json"
    if extra:
        cfg = json.loads(path.read_text())
        for section, values in extra.items():
            cfg.setdefault(section, {}).update(values)
        path.write_text(json.dumps(cfg))
    return path


def _dump_spec(data_dir: Path, spec: SyntheticSpec) -> Path:
    data_dir.mkdir(parents=True, exist_ok=True)
    p = data_dir / "spec_in.json"
    p.write_text(json.dumps(spec.to_dict()))
    return p


@pytest.fixture(scope="session")
def demo_corpus(tmp_path_factory):
    """The bundled demo corpus written once per session."""
    data = tmp_path_factory.mktemp("demo_data")
    assert cli.main(["synth", "--out", str(data), "--write-config"]) == 0
    return data


@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory, demo_corpus):
    """Two full demo runs from one config, at --threads 1 and --threads 4."""
    cfg = demo_corpus / "run_config.json"
    out = {}
    for threads in (1, 4):
        target = tmp_path_factory.mktemp(f"demo_run_t{threads}")
        t0 = time.perf_counter()
        rc = cli.main(["run", "--config", str(cfg), "--out", str(target), "--threads", str(threads)])
        out[threads] = {"dir": target, "rc": rc, "seconds": time.perf_counter() - t0}
    return out


@pytest.fixture(scope="session")
def small_run(tmp_path_factory):
    data = tmp_path_factory.mktemp("small_data")
    cfg = write_run_config(data, small_spec(), kmeans={"k": 4, "sweep_max": 6})
    out = tmp_path_factory.mktemp("small_out")
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    return {"data": data, "config": cfg, "out": out}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
