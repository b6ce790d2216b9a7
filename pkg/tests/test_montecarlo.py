import numpy as np
import pytest

from mqrl.simulation import run_monte_carlo, scenario
from mqrl.simulation.montecarlo import run_replicate


@pytest.fixture(scope="module")
def table():
    spec = scenario(1, n=40, m=3, t0s=(0.0, 1.0))
    return run_monte_carlo(spec, 6, methods=("fr", "cfs"), B=20, seed=3)


def test_layout(table):
    text = table.to_csv()
    head = text.splitlines()[0].split(",")
    assert head[:6] == ["coef", "t0", "tau", "truth", "bias", "MCSD"]
    assert "ASE_FR" in head and "CP_CFS" in head
    assert not any(h.startswith("runtime") for h in head)
    assert len(text.splitlines()) == 1 + 2 * 2


def test_timing_columns(table):
    head = table.to_csv(timing=True).splitlines()[0]
    assert "runtime_FR" in head and "runtime_CFS" in head


def test_summary_matches_replicates(table):
    spec = scenario(1, n=40, m=3, t0s=(0.0, 1.0))
    reps = [run_replicate(spec, r, ("FR", "CFS"), 20, 3) for r in range(6)]
    est = np.array([r["alpha"][0.5, 0.0] for r in reps])
    row = table.row(0, 0.0, 0.5)
    assert row["bias"] == pytest.approx(est[:, 0].mean() - row["truth"], abs=1e-14)
    assert row["MCSD"] == pytest.approx(est[:, 0].std(ddof=1), abs=1e-14)
    se = np.array([r["se"][(0.5, 0.0), "FR"][0] for r in reps])
    assert row["ASE_FR"] == pytest.approx(se.mean(), abs=1e-14)
    covered = np.abs(est[:, 0] - row["truth"]) <= 1.959963984540054 * se
    assert row["CP_FR"] == covered.mean()


def test_workers_do_not_change_output(table):
    spec = scenario(1, n=40, m=3, t0s=(0.0, 1.0))
    again = run_monte_carlo(spec, 6, methods=("FR", "CFS"), B=20, seed=3, workers=2)
    assert again.to_csv() == table.to_csv()


def test_argument_checks():
    with pytest.raises(ValueError):
        run_monte_carlo(scenario(1), 1)
    with pytest.raises(ValueError):
        run_monte_carlo(scenario(1), 5, workers=0)
