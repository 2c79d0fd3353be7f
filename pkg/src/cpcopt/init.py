"""Initial-guess generators for the minimum-time NLP.

All generators return a flat variable vector matching the problem layout,
with an exactly consistent progress chain: each lambda column steps from 1
to 0 at its switch node and the corresponding mu is concentrated there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quad_model as qm
from .nlp_assembly import BuildOptions, CpcProblem
from .progress import ProgressVariables
from .solution import Solution

__all__ = [
    "InitialGuess",
    "default_guess",
    "endpoint_interp_guess",
    "random_anchor_guess",
    "orientation_interp_guess",
    "bang_bang_guess",
    "point_mass_warm_start",
]


@dataclass(frozen=True)
class InitialGuess:
    x: np.ndarray
    provenance: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.x)):
            raise ValueError("initial guess contains non-finite entries")

    def as_solution(self, problem: CpcProblem) -> Solution:
        """View the guess through the Solution container (CSV export etc.)."""
        t, states, inputs, lam, mu, nu = problem.split(self.x)
        return Solution(
            total_time=t,
            states=states,
            inputs=inputs,
            progress=ProgressVariables(lam=lam, mu=mu, nu=nu),
            metadata={"provenance": self.provenance},
        )


def _switch_nodes(N: int, M: int) -> np.ndarray:
    # waypoint j (0-based) is passed at node k_j = N (j+1) / M
    return np.array([int(round(N * (j + 1) / M)) for j in range(M)])


def _progress_guess(problem: CpcProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    N, M = problem.grid.node_count, problem.grid.waypoint_count
    ks = _switch_nodes(N, M)
    lam = np.zeros((N + 1, M))
    mu = np.zeros((N, M))
    for j, k in enumerate(ks):
        lam[:k, j] = 1.0
        mu[k - 1, j] = 1.0
    nu = np.full((N, M), 0.5) * problem.d_tol[None, :] ** 2
    return lam, mu, nu


def _path_samples(problem: CpcProblem) -> tuple[np.ndarray, np.ndarray, float]:
    """Arc-length uniform positions and unit tangents along the waypoint polyline."""
    N = problem.grid.node_count
    pts = np.vstack([problem.track.start_state.position, problem.waypoints])
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    total = float(np.sum(seg_len))
    if total <= 0:
        pos = np.tile(pts[0], (N + 1, 1))
        tan = np.tile(np.array([1.0, 0.0, 0.0]), (N + 1, 1))
        return pos, tan, total
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = np.linspace(0.0, total, N + 1)
    pos = np.empty((N + 1, 3))
    tan = np.empty((N + 1, 3))
    j = 0
    for i, si in enumerate(s):
        while j < len(seg_len) - 1 and si > cum[j + 1]:
            j += 1
        frac = 0.0 if seg_len[j] == 0 else (si - cum[j]) / seg_len[j]
        pos[i] = pts[j] + frac * seg[j]
        tan[i] = seg[j] / seg_len[j] if seg_len[j] > 0 else np.array([1.0, 0.0, 0.0])
    return pos, tan, total


def _assemble(problem, t, states, inputs, lam, mu, nu, tag) -> InitialGuess:
    x = problem.grid.pack(t, states, inputs, lam, mu, nu)
    # clamp to the variable box (lambda is unbounded so the chain survives)
    x = np.clip(x, problem.lb, problem.ub)
    return InitialGuess(x=x, provenance=tag)


def default_guess(problem: CpcProblem) -> InitialGuess:
    """Linear interpolation between waypoints at 1 m/s, hover inputs."""
    grid = problem.grid
    N = grid.node_count
    pos, tan, total = _path_samples(problem)
    t_guess = max(total / 1.0, problem.options.t_min * 2)

    states = np.zeros((N + 1, grid.state_dim))
    states[:, 0:3] = pos
    if problem.model == "point_mass":
        states[:, 3:6] = tan  # 1 m/s along the path
        inputs = np.zeros((N, grid.input_dim))
    else:
        states[:, 3] = 1.0  # identity attitude
        states[:, 7:10] = tan
        hover = problem.cfg.hover_thrust
        if problem.model == "reduced":
            inputs = np.zeros((N, grid.input_dim))
            inputs[:, 0] = 4 * hover
        else:
            inputs = np.full((N, grid.input_dim), hover)
    lam, mu, nu = _progress_guess(problem)
    return _assemble(problem, t_guess, states, inputs, lam, mu, nu, "default")


def _guess_from_anchors(problem: CpcProblem, anchors: np.ndarray, tag: str) -> InitialGuess:
    """Default-style guess with positions interpolated through given anchors.

    Anchors are positions pinned at node 0, the waypoint switch nodes, and
    node N (one row per anchor, M + 2 rows); everything else matches the
    default guess.
    """
    grid = problem.grid
    N, M = grid.node_count, grid.waypoint_count
    anchors = np.asarray(anchors, dtype=float)
    if anchors.shape != (M + 2, 3):
        raise ValueError(f"need {M + 2} anchor positions, got {anchors.shape}")
    nodes = np.concatenate([[0], _switch_nodes(N, M), [N]])
    pos = np.empty((N + 1, 3))
    vel = np.zeros((N + 1, 3))
    for k in range(N + 1):
        seg = min(int(np.searchsorted(nodes, k, side="right")) - 1, len(nodes) - 2)
        k0, k1 = nodes[seg], nodes[seg + 1]
        frac = 0.0 if k1 == k0 else (k - k0) / (k1 - k0)
        pos[k] = anchors[seg] + frac * (anchors[seg + 1] - anchors[seg])
        d = anchors[seg + 1] - anchors[seg]
        n = np.linalg.norm(d)
        vel[k] = d / n if n > 1e-12 else np.zeros(3)

    total = float(np.sum(np.linalg.norm(np.diff(anchors, axis=0), axis=1)))
    t_guess = max(total / 1.0, problem.options.t_min * 2)
    states = np.zeros((N + 1, grid.state_dim))
    states[:, 0:3] = pos
    if problem.model == "point_mass":
        states[:, 3:6] = vel
        inputs = np.zeros((N, grid.input_dim))
    else:
        states[:, 3] = 1.0
        states[:, 7:10] = vel
        hover = problem.cfg.hover_thrust
        if problem.model == "reduced":
            inputs = np.zeros((N, grid.input_dim))
            inputs[:, 0] = 4 * hover
        else:
            inputs = np.full((N, grid.input_dim), hover)
    lam, mu, nu = _progress_guess(problem)
    return _assemble(problem, t_guess, states, inputs, lam, mu, nu, tag)


def endpoint_interp_guess(problem: CpcProblem, end_position=None) -> InitialGuess:
    """Poor guess: straight line from start to end, ignoring mid waypoints."""
    M = problem.grid.waypoint_count
    end = np.asarray(end_position, dtype=float) if end_position is not None else problem.waypoints[-1]
    start = problem.track.start_state.position
    # all anchors sit on the start-end chord
    fracs = np.linspace(0.0, 1.0, M + 2)
    anchors = start[None, :] + fracs[:, None] * (end - start)[None, :]
    return _guess_from_anchors(problem, anchors, "endpoint_interp")


def random_anchor_guess(problem: CpcProblem, boxes, rng: np.random.Generator) -> InitialGuess:
    """Random position guess: anchors drawn uniformly from per-anchor boxes.

    boxes: (M + 2, 3, 2) array of [lo, hi] per anchor and axis — one box for
    the start node, each waypoint switch node, and the end node.
    """
    boxes = np.asarray(boxes, dtype=float)
    M = problem.grid.waypoint_count
    if boxes.shape != (M + 2, 3, 2):
        raise ValueError(f"need boxes shaped ({M + 2}, 3, 2), got {boxes.shape}")
    anchors = rng.uniform(boxes[..., 0], boxes[..., 1])
    return _guess_from_anchors(problem, anchors, "random_anchor")


def orientation_interp_guess(problem: CpcProblem, angles) -> InitialGuess:
    """Default guess with the attitude replaced by interpolated rotations.

    angles: one (axis, angle) pair for the start plus one per waypoint,
    anchored at the switch nodes.  Angles are cumulative: 0 -> 2*pi winds a
    full turn through pi instead of staying put.
    """
    if problem.model == "point_mass":
        raise ValueError("point-mass layout has no attitude")
    M = problem.grid.waypoint_count
    N = problem.grid.node_count
    if len(angles) != M + 1:
        raise ValueError(f"need {M + 1} angle targets (start + one per waypoint), got {len(angles)}")
    axes = np.array([np.asarray(a, dtype=float) for a, _ in angles])
    theta = np.array([float(t) for _, t in angles])
    norms = np.linalg.norm(axes, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("rotation axes must be unit vectors")

    guess = default_guess(problem)
    x = guess.x.copy()
    anchors = np.concatenate([[0], _switch_nodes(N, M)])
    for k in range(N + 1):
        seg = int(np.searchsorted(anchors, k, side="right")) - 1
        seg = min(seg, len(anchors) - 2)
        k0, k1 = anchors[seg], anchors[seg + 1]
        frac = 0.0 if k1 == k0 else (k - k0) / (k1 - k0)
        if np.allclose(axes[seg], axes[seg + 1]):
            ang = (1 - frac) * theta[seg] + frac * theta[seg + 1]
            q = _axis_angle_quat(axes[seg], ang)
        else:
            qa = _axis_angle_quat(axes[seg], theta[seg])
            qb = _axis_angle_quat(axes[seg + 1], theta[seg + 1])
            q = _slerp(qa, qb, frac)
        sl = problem.grid.state_slice(k)
        x[sl.start + 3 : sl.start + 7] = q
    return InitialGuess(x=np.clip(x, problem.lb, problem.ub), provenance="orientation_interp")


def _axis_angle_quat(axis: np.ndarray, angle: float) -> np.ndarray:
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def _slerp(qa: np.ndarray, qb: np.ndarray, frac: float) -> np.ndarray:
    dot = float(qa @ qb)
    if dot < 0:
        qb, dot = -qb, -dot
    dot = min(dot, 1.0)
    omega = np.arccos(dot)
    if omega < 1e-12:
        q = (1 - frac) * qa + frac * qb
    else:
        q = (np.sin((1 - frac) * omega) * qa + np.sin(frac * omega) * qb) / np.sin(omega)
    return q / np.linalg.norm(q)


def _z_align_quat(direction: np.ndarray) -> np.ndarray:
    """Quaternion rotating body-z onto the given world direction."""
    n = np.linalg.norm(direction)
    if n < 1e-12:
        return np.array([1.0, 0, 0, 0])
    u = direction / n
    ez = np.array([0.0, 0.0, 1.0])
    c = float(ez @ u)
    if c > 1.0 - 1e-12:
        return np.array([1.0, 0, 0, 0])
    if c < -1.0 + 1e-12:
        return np.array([0.0, 1.0, 0.0, 0.0])  # half turn about x
    axis = np.cross(ez, u)
    axis /= np.linalg.norm(axis)
    return _axis_angle_quat(axis, float(np.arccos(c)))


def _default_a_max(cfg: qm.QuadConfig) -> float:
    return 4.0 * cfg.thrust_max / cfg.mass - cfg.gravity


def bang_bang_guess(problem: CpcProblem, a_max: float | None = None) -> InitialGuess:
    """Gravity-free symmetric bang-bang profile per waypoint segment.

    Each segment accelerates at a_max toward the target for half the
    segment, then decelerates; the attitude guess points body-z along the
    guessed acceleration, so a pure descent flips the vehicle.
    """
    grid = problem.grid
    N, M = grid.node_count, grid.waypoint_count
    if a_max is None:
        a_max = problem.options.a_max or _default_a_max(problem.cfg)
    if a_max <= 0:
        raise ValueError("a_max must be positive")

    pts = np.vstack([problem.track.start_state.position, problem.waypoints])
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)

    # merge consecutive collinear segments: intermediate waypoints on a
    # straight stretch are passed at speed instead of stopped at, which
    # keeps the guess out of the much slower stop-and-go local basin
    groups: list[list[int]] = []
    for j in range(len(seg)):
        if (
            groups
            and seg_len[j] > 0
            and seg_len[groups[-1][-1]] > 0
            and float(seg[groups[-1][-1]] @ seg[j])
            / (seg_len[groups[-1][-1]] * seg_len[j])
            > 1.0 - 1e-9
        ):
            groups[-1].append(j)
        else:
            groups.append([j])
    g_start = np.array([g[0] for g in groups])
    g_len = np.array([float(np.sum(seg_len[g])) for g in groups])
    g_dir = np.array(
        [
            seg[g[0]] / seg_len[g[0]] if seg_len[g[0]] > 0 else np.zeros(3)
            for g in groups
        ]
    )
    g_time = 2.0 * np.sqrt(g_len / a_max)
    t_total = float(np.sum(g_time))
    if t_total <= 0:
        return default_guess(problem)
    cum_t = np.concatenate([[0.0], np.cumsum(g_time)])

    def _phase(gi: int, tau: float):
        """(offset, speed, accel-sign) along group gi at local time tau."""
        half = g_time[gi] / 2.0
        if tau <= half:
            return 0.5 * a_max * tau**2, a_max * tau, 1.0
        tb = g_time[gi] - tau
        return g_len[gi] - 0.5 * a_max * tb**2, a_max * tb, -1.0

    # time at which each waypoint is reached (waypoint j ends segment j)
    wp_t = np.empty(M)
    for gi, g in enumerate(groups):
        s = 0.0
        for j in g:
            s += seg_len[j]
            if g_len[gi] <= 0 or s <= g_len[gi] / 2.0:
                tau = np.sqrt(2.0 * s / a_max) if g_len[gi] > 0 else 0.0
            else:
                tau = g_time[gi] - np.sqrt(2.0 * (g_len[gi] - s) / a_max)
            wp_t[j] = cum_t[gi] + tau

    # sample the concatenated profile at N+1 uniform times
    times = np.linspace(0.0, t_total, N + 1)
    pos = np.empty((N + 1, 3))
    vel = np.empty((N + 1, 3))
    acc = np.empty((N + 1, 3))
    for i, ti in enumerate(times):
        gi = min(int(np.searchsorted(cum_t, ti, side="right")) - 1, len(groups) - 1)
        while g_time[gi] == 0 and gi < len(groups) - 1:
            gi += 1
        if g_time[gi] == 0:
            pos[i], vel[i], acc[i] = pts[g_start[gi]], np.zeros(3), np.zeros(3)
            continue
        off, speed, sign = _phase(gi, ti - cum_t[gi])
        e = g_dir[gi]
        pos[i] = pts[g_start[gi]] + off * e
        vel[i] = speed * e
        acc[i] = sign * a_max * e

    states = np.zeros((N + 1, grid.state_dim))
    states[:, 0:3] = pos
    if problem.model == "point_mass":
        states[:, 3:6] = vel
        inputs = acc[:N].copy()
    else:
        states[:, 7:10] = vel
        cfg = problem.cfg
        # specific force the rotors must produce so the translational
        # dynamics hold along the profile: thrust/m = a + g e_z + drag
        # (isotropic-drag approximation of the body-frame drag term)
        f_req = acc.copy()
        f_req[:, 2] += cfg.gravity
        f_req += np.mean(cfg.drag_diag) * vel
        thrust = cfg.mass * np.linalg.norm(f_req, axis=1)
        for i in range(N + 1):
            states[i, 3:7] = (
                _z_align_quat(f_req[i])
                if np.linalg.norm(f_req[i]) > 1e-9
                else np.array([1.0, 0, 0, 0])
            )
        if problem.model == "reduced":
            inputs = np.zeros((N, grid.input_dim))
            inputs[:, 0] = np.clip(thrust[:N], 4 * cfg.thrust_min, 4 * cfg.thrust_max)
        else:
            per_rotor = np.clip(thrust[:N] / 4.0, cfg.thrust_min, cfg.thrust_max)
            inputs = np.repeat(per_rotor[:, None], grid.input_dim, axis=1)

    # progress switches at the nodes where the profile actually reaches each
    # waypoint, so the complementarity rows of the guess are consistent
    lam = np.zeros((N + 1, M))
    mu = np.zeros((N, M))
    nu = np.full((N, M), 0.5) * problem.d_tol[None, :] ** 2
    k_prev = 0
    for j in range(M):
        k = int(round(N * wp_t[j] / t_total))
        k = min(max(k, k_prev + 1, 1), N - (M - 1 - j)) if N >= M else N
        k_prev = k
        lam[:k, j] = 1.0
        mu[k - 1, j] = 1.0
    return _assemble(problem, t_total, states, inputs, lam, mu, nu, "bang_bang")


def point_mass_warm_start(
    problem: CpcProblem,
    a_max: float | None = None,
    solver_options=None,
) -> InitialGuess:
    """Solve the point-mass CPC problem on the same track and lift it.

    The lifted attitude points body-z along the point-mass acceleration
    (non-continuous across nodes); progress variables and total time carry
    over directly.
    """
    from .solver import SolverOptions, solve_raw

    if a_max is None:
        a_max = _default_a_max(problem.cfg)
    if a_max <= 0:
        raise ValueError("a_max must be positive")
    pm_opts = BuildOptions(
        node_count=problem.grid.node_count,
        d_tol=float(np.min(problem.d_tol)),
        model="point_mass",
        a_max=a_max,
        t_min=problem.options.t_min,
    )
    pm = CpcProblem(problem.track, problem.cfg, pm_opts)
    x0 = bang_bang_guess(pm, a_max=a_max).x
    opts = solver_options or SolverOptions(kkt_tolerance=1e-5, max_iterations=3000)
    from .solver import solve_homotopy as _sh

    sol, report = _sh(pm, x0, opts)
    if not report.success:
        # A certified optimum is not required for an initial guess: a
        # converged relaxed stage is still an excellent warm start.  Only
        # give up when no stage moved past the seed guess at all.
        if abs(sol.total_time - x0[0]) < 1e-12:
            raise RuntimeError(
                f"point-mass warm start failed: {report.status.value}: {report.message}"
            )

    grid = problem.grid
    N = grid.node_count
    states = np.zeros((N + 1, grid.state_dim))
    states[:, 0:3] = sol.states[:, 0:3]
    acc = np.vstack([sol.inputs, sol.inputs[-1]])
    if problem.model == "point_mass":
        states[:, 3:6] = sol.states[:, 3:6]
        inputs = sol.inputs.copy()
    else:
        states[:, 7:10] = sol.states[:, 3:6]
        cfg = problem.cfg
        vel = states[:, 7:10]
        # specific force the rotors must produce (see bang_bang_guess)
        f_req = acc.copy()
        f_req[:, 2] += cfg.gravity
        f_req += np.mean(cfg.drag_diag) * vel
        thrust = cfg.mass * np.linalg.norm(f_req, axis=1)
        for i in range(N + 1):
            states[i, 3:7] = (
                _z_align_quat(f_req[i])
                if np.linalg.norm(f_req[i]) > 1e-9
                else np.array([1.0, 0, 0, 0])
            )
        if problem.model == "reduced":
            inputs = np.zeros((N, grid.input_dim))
            inputs[:, 0] = np.clip(thrust[:N], 4 * cfg.thrust_min, 4 * cfg.thrust_max)
        else:
            inputs = np.repeat(
                np.clip(thrust[:N] / 4.0, cfg.thrust_min, cfg.thrust_max)[:, None],
                grid.input_dim,
                axis=1,
            )
    return _assemble(
        problem,
        sol.total_time,
        states,
        inputs,
        sol.progress.lam,
        sol.progress.mu,
        sol.progress.nu,
        "point_mass_warm",
    )
