"""Shared fixtures and helpers for the cpcopt test suite."""

import numpy as np
import pytest

from cpcopt.nlp_assembly import BuildOptions, CpcProblem
from cpcopt.progress import EndConditions, Track
from cpcopt.quad_model import QuadState, named_config


def make_track(waypoints, tolerance=0.3, start=None, end=None):
    waypoints = np.asarray(waypoints, dtype=float)
    start = QuadState.hover(np.zeros(3)) if start is None else start
    end = EndConditions() if end is None else end
    return Track(
        waypoints=waypoints,
        tolerance=tolerance,
        start_state=start,
        end_conditions=end,
    )


def make_problem(
    waypoints=((4.0, 0.0, 0.0),),
    node_count=10,
    d_tol=0.3,
    model="full",
    end=None,
    cfg=None,
    **opt_kwargs,
):
    track = make_track(waypoints, tolerance=d_tol, end=end)
    cfg = named_config("standard") if cfg is None else cfg
    options = BuildOptions(node_count=node_count, d_tol=d_tol, model=model, **opt_kwargs)
    return CpcProblem(track, cfg, options)


def consistent_point(problem, rng=None, spread=0.1):
    """A random-but-consistent packed vector: exact RK4 rollout states and a
    valid progress chain, with randomized inputs and progress placement."""
    rng = np.random.default_rng(0) if rng is None else rng
    from cpcopt.quad_model import dynamics_core, point_mass_core, reduced_dynamics_core
    from cpcopt.transcription import rk4_step

    g = problem.grid
    N, M, sd = g.node_count, g.waypoint_count, g.state_dim
    cfg = problem.cfg
    t = 2.0 + rng.uniform(-spread, spread)
    dt = t / N

    if problem.model == "full":
        hover = cfg.mass * cfg.gravity / 4.0
        # Keep differential thrust small: the body-rate dynamics are stiff
        # (inertias ~1e-3), and large random torques make the coarse RK4
        # rollout blow up, which turns this into a test of float noise.
        inputs = hover + 0.02 * spread * rng.standard_normal((N, 4))
        f = lambda s, u: np.array(dynamics_core(s, u, cfg))
        x0 = problem.x_init.copy()
    elif problem.model == "reduced":
        hover = cfg.mass * cfg.gravity
        inputs = np.column_stack(
            [hover + spread * rng.standard_normal(N), spread * rng.standard_normal((N, 3))]
        )

        f = lambda s, u: np.array(reduced_dynamics_core(s, u, cfg))
        x0 = problem.x_init.copy()
    else:
        inputs = spread * rng.standard_normal((N, 3))
        f = lambda s, u: np.array(point_mass_core(s, u))
        x0 = problem.x_init.copy()

    states = np.empty((N + 1, sd))
    states[0] = x0
    for k in range(N):
        states[k + 1] = rk4_step(f, states[k], inputs[k], dt)
    if problem.model == "reduced":
        states[1:, 10:13] = inputs[:, 1:4]

    lam = np.empty((N + 1, M))
    mu = rng.uniform(0.0, 1.0, (N, M))
    mu /= mu.sum(axis=0, keepdims=True)
    lam[0] = 1.0
    lam[1:] = 1.0 - np.cumsum(mu, axis=0)
    lam[-1] = 0.0
    nu = rng.uniform(0.0, problem.d_tol**2, (N, M))
    return g.pack(t, states, inputs, lam, mu, nu)


def pytest_terminal_summary(terminalreporter):
    """Repeat the one-line acceptance criterion verdicts at the end."""
    try:
        import test_acceptance
    except ImportError:
        return
    lines = getattr(test_acceptance, "CRITERION_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def standard_cfg():
    return named_config("standard")


@pytest.fixture
def race_cfg():
    return named_config("race")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
