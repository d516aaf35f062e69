import pytest

from netsched.experiments import GridSetup, make_grid_setup, probe_c_table

PROBE_WINDOW = 100_000
PROBE_TOL = 1e-3


@pytest.fixture(scope="session")
def grid_setups() -> dict[int, GridSetup]:
    return {seed: make_grid_setup(seed) for seed in (0, 1, 2)}


@pytest.fixture(scope="session")
def c_tables(grid_setups):
    """Probed 3x3 load constants per setup seed (expensive, shared across
    the acceptance criteria)."""
    out = {}
    for seed, setup in grid_setups.items():
        out[seed] = probe_c_table(setup, window=PROBE_WINDOW, tol=PROBE_TOL,
                                  seed=seed, workers=2)
    return out


def rand_queue(spec, rng, scale=10.0):
    from netsched.model import QueueMatrix

    q = QueueMatrix.zeros(spec)
    for v in range(spec.node_count):
        for d in spec.destinations:
            if v != d:
                q.set(v, d, float(rng.uniform(0, scale)))
    return q


def report(criterion: str, ok: bool, detail: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    print(f"[acceptance] {criterion}: {tag}{' - ' + detail if detail else ''}")
    assert ok, f"{criterion}: {detail}"
