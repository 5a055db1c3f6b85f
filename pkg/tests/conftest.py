import json
import subprocess
import sys

import pytest

sys.path.insert(0, str(__import__("pathlib").Path(__file__).parent))


def cli(*args, cwd):
    proc = subprocess.run(
        [sys.executable, "-m", "neuralparc.cli", *[str(a) for a in args]],
        cwd=cwd, capture_output=True, text=True,
    )
    return proc


@pytest.fixture(scope="session")
def drift_pipeline(tmp_path_factory):
    """Full drift2d pipeline artifacts, built once through the CLI.

    10^4 training rows, widths 8,8,8,8, interval/final bounds validated on
    10x fresh samples, and a narrow-gap scenario solved with certified
    samples.  Several acceptance criteria read these artifacts.
    """
    import neuralparc as npc

    d = tmp_path_factory.mktemp("drift_pipeline")
    r = cli("collect", "--system", "drift2d", "--n", 10_000, "--seed", 42,
            "-o", "data.json", cwd=d)
    assert r.returncode == 0, r.stderr
    r = cli("train", "--data", "data.json", "--widths", "8,8,8,8", "--epochs", 2500,
            "--seed", 7, "-o", "net.json", cwd=d)
    assert r.returncode == 0, r.stderr
    r = cli("bounds", "--net", "net.json", "--n-sample", 10_000, "--substeps", 21,
            "--margin", 0.25, "--margin-abs", 0.03, "--validate-factor", 10,
            "--seed", 5, "-o", "bounds.json", cwd=d)
    assert r.returncode == 0, r.stderr

    system = npc.builtin("drift2d")
    scenario = npc.Scenario(
        p0_box=npc.Hyperrectangle([-0.3, -0.3], [0.3, 0.3]),
        k_box=system.k_box,
        spec=system.spec,
        goal=npc.Hyperrectangle([24.7, 10.2, 2.2], [27.9, 12.8, 3.0]),
        obstacles=[
            npc.Hyperrectangle([18.0, 3.0], [25.5, 7.0]),
            npc.Hyperrectangle([29.5, 3.0], [36.0, 7.0]),
        ],
        agent_radius=0.3,
        system="drift2d",
    )
    scenario.save(d / "scen.json")
    return d


@pytest.fixture(scope="session")
def drift_solved(drift_pipeline):
    """The drift scenario solved through the CLI (timed separately)."""
    import time

    t0 = time.perf_counter()
    r = cli("solve", "--scenario", "scen.json", "--net", "net.json",
            "--bounds", "bounds.json", "--budget-regions", 300, "--seed", 123,
            "-o", "report", cwd=drift_pipeline)
    wall = time.perf_counter() - t0
    assert r.returncode == 0, r.stderr + r.stdout
    (drift_pipeline / "solve_wall_seconds.txt").write_text(str(wall))
    return drift_pipeline


@pytest.fixture(scope="session")
def boat_pipeline(tmp_path_factory):
    """Full boat2d pipeline with disturbances and 27-cell partitioned bounds."""
    import neuralparc as npc

    d = tmp_path_factory.mktemp("boat_pipeline")
    r = cli("collect", "--system", "boat2d", "--n", 12_000, "--seed", 21,
            "--k-margin", 0.08, "-o", "data.json", cwd=d)
    assert r.returncode == 0, r.stderr
    r = cli("train", "--data", "data.json", "--widths", "8,8,8,8", "--epochs", 6000,
            "--seed", 3, "-o", "net.json", cwd=d)
    assert r.returncode == 0, r.stderr
    r = cli("bounds", "--net", "net.json", "--n-sample", 30_000, "--substeps", 21,
            "--splits", 3, "--margin", 0.5, "--margin-abs", 0.05,
            "--validate-factor", 10, "--seed", 5, "-o", "bounds.json", cwd=d)
    assert r.returncode == 0, r.stderr

    system = npc.builtin("boat2d")
    scenario = npc.Scenario(
        p0_box=npc.Hyperrectangle([-0.25, -0.25], [0.25, 0.25]),
        k_box=system.k_box,
        spec=system.spec,
        goal=npc.Hyperrectangle([4.9, -0.45], [6.1, 0.45]),
        obstacles=[
            npc.Hyperrectangle([2.0, 0.65], [2.8, 2.2]),
            npc.Hyperrectangle([2.0, -2.2], [2.8, -0.65]),
        ],
        agent_radius=0.15,
        system="boat2d",
    )
    scenario.save(d / "scen.json")
    r = cli("solve", "--scenario", "scen.json", "--net", "net.json",
            "--bounds", "bounds.json", "--budget-regions", 200, "--seed", 77,
            "-o", "report", cwd=d)
    assert r.returncode == 0, r.stderr + r.stdout
    return d


def load_report(d):
    return json.loads((d / "report" / "report.json").read_text())
