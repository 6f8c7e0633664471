"""Kinematic robot-person-following simulator.

World frame: metres, yaw in degrees counter-clockwise from +x. The person
follows a scripted sequence of walk / spin / pause segments. Three clocks run
phase-aligned from t = 0: position measurements (10 Hz), orientation
estimates (25 Hz) and control (20 Hz). Events at equal times are processed in
that order, and each consumer uses the latest available measurement.
"""

import csv
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

from ._rng import derive_rng
from .circular import circ_diff, normalize_deg
from .errors import ConfigError, InvalidInputError
from .gating import TemporalGate
from .model import predict
from .skeleton import OcclusionMode, synthesize

ESTIMATORS = ("cv_baseline", "model", "ground_truth")
TASKS = ("backward", "forward")
LOG_FIELDS = ("t", "px", "py", "ptheta", "rx", "ry", "rtheta", "gx", "gy", "gtheta", "est_theta", "conf")


@dataclass
class PersonState:
    x: float
    y: float
    theta: float
    speed: float = 0.0


@dataclass
class RobotState:
    x: float
    y: float
    heading: float
    v: float = 0.0
    omega: float = 0.0


@dataclass
class GoalPose:
    x: float
    y: float
    theta: float


@dataclass
class Segment:
    kind: str
    duration_s: float
    speed_mps: float = 0.0
    heading_deg: float = None
    rate_dps: float = 0.0


@dataclass
class Scenario:
    name: str
    duration_s: float
    segments: list
    occlusion_mode: str = "full"
    noise: dict = field(default_factory=lambda: {"position_m": 0.0, "skeleton": 0.0})
    seed: int = 0
    start: tuple = (0.0, 0.0)

    def initial_heading(self):
        for seg in self.segments:
            if seg.heading_deg is not None:
                return normalize_deg(seg.heading_deg)
        return 0.0


@dataclass
class SimConfig:
    position_hz: float = 10.0
    orientation_hz: float = 25.0
    control_hz: float = 20.0
    follow_distance: float = 1.0
    v_max: float = 1.5
    omega_max: float = 2.5
    grid_v: int = 15  # half-width of the velocity grid
    grid_omega: int = 15
    horizon: int = 10
    w_pos: float = 1.0
    w_theta: float = 0.02
    cv_eps: float = 0.05
    transient_s: float = 2.0
    rate_window_s: float = 1.0
    gate_window: int = 5

    def __post_init__(self):
        for name in ("position_hz", "orientation_hz", "control_hz", "follow_distance", "v_max", "omega_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", field=name)

    def to_dict(self):
        return asdict(self)


_SEGMENT_KEYS = {
    "walk": ("speed_mps", "heading_deg"),
    "spin": ("rate_dps",),
    "pause": (),
}


def scenario_from_dict(doc):
    """Validate a scenario document; errors name the offending field."""
    def need(d, key, where):
        if key not in d:
            raise ConfigError(f"missing field {where}{key!r}", field=f"{where}{key}")
        return d[key]

    name = str(need(doc, "name", ""))
    duration = float(need(doc, "duration_s", ""))
    if not duration > 0:
        raise ConfigError("duration_s must be positive", field="duration_s")
    segs = []
    for i, raw in enumerate(need(doc, "segments", "")):
        where = f"segments[{i}]."
        kind = need(raw, "kind", where)
        if kind not in _SEGMENT_KEYS:
            raise ConfigError(f"{where}kind must be one of {sorted(_SEGMENT_KEYS)}", field=f"{where}kind")
        for key in _SEGMENT_KEYS[kind]:
            need(raw, key, where)
        seg_duration = float(need(raw, "duration_s", where))
        if not seg_duration > 0:
            raise ConfigError(f"{where}duration_s must be positive", field=f"{where}duration_s")
        segs.append(Segment(
            kind, seg_duration,
            speed_mps=float(raw.get("speed_mps", 0.0)),
            heading_deg=float(raw["heading_deg"]) if "heading_deg" in raw else None,
            rate_dps=float(raw.get("rate_dps", 0.0)),
        ))
    if not segs:
        raise ConfigError("scenario needs at least one segment", field="segments")
    if sum(s.duration_s for s in segs) < duration - 1e-9:
        raise ConfigError("segments do not cover duration_s", field="segments")
    mode = str(doc.get("occlusion_mode", "full"))
    try:
        OcclusionMode.parse(mode)
    except InvalidInputError as exc:
        raise ConfigError(str(exc), field="occlusion_mode") from None
    noise = {"position_m": 0.0, "skeleton": 0.0}
    noise.update({k: float(v) for k, v in doc.get("noise", {}).items()})
    return Scenario(name, duration, segs, mode, noise, int(doc.get("seed", 0)),
                    tuple(float(v) for v in doc.get("start", (0.0, 0.0))))


def scenario_to_dict(sc):
    segs = []
    for s in sc.segments:
        d = {"kind": s.kind, "duration_s": s.duration_s}
        for key in _SEGMENT_KEYS[s.kind]:
            d[key] = getattr(s, key)
        segs.append(d)
    return {
        "name": sc.name, "duration_s": sc.duration_s, "segments": segs,
        "occlusion_mode": sc.occlusion_mode, "noise": dict(sc.noise), "seed": sc.seed,
        "start": list(sc.start),
    }


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_dict(doc)


def builtin_scenario(name):
    """``straight_walk``, ``spin`` or ``turn_walk`` from the bundled files."""
    text = resources.files("parthoe").joinpath("scenarios", f"{name}.json").read_text(encoding="utf-8")
    return scenario_from_dict(json.loads(text))


def person_state(scenario, t):
    """True person pose at time ``t`` (segments integrated in closed form)."""
    x, y = scenario.start
    theta = scenario.initial_heading()
    elapsed = 0.0
    for seg in scenario.segments:
        dt = min(seg.duration_s, t - elapsed)
        if dt <= 0:
            break
        speed = 0.0
        if seg.kind == "walk":
            theta = normalize_deg(seg.heading_deg)
            h = math.radians(theta)
            x += seg.speed_mps * dt * math.cos(h)
            y += seg.speed_mps * dt * math.sin(h)
            speed = seg.speed_mps
        elif seg.kind == "spin":
            theta = normalize_deg(theta + seg.rate_dps * dt)
        elapsed += seg.duration_s
        if t <= elapsed:
            return PersonState(x, y, theta, speed)
    return PersonState(x, y, theta, 0.0)


def cv_orientation(prev, curr, prev_theta, eps=0.05):
    """Heading of the displacement ``prev -> curr``; held when it is shorter than ``eps``."""
    dx, dy = curr[0] - prev[0], curr[1] - prev[1]
    if math.hypot(dx, dy) < eps:
        return prev_theta
    return normalize_deg(math.degrees(math.atan2(dy, dx)))


def backward_goal(person, d=1.0):
    h = math.radians(person.theta)
    return GoalPose(person.x - d * math.cos(h), person.y - d * math.sin(h), normalize_deg(person.theta))


def forward_goal(person, d=1.0):
    h = math.radians(person.theta)
    return GoalPose(person.x + d * math.cos(h), person.y + d * math.sin(h), normalize_deg(person.theta + 180.0))


def goal_for(task, person, d):
    if task == "backward":
        return backward_goal(person, d)
    if task == "forward":
        return forward_goal(person, d)
    raise ConfigError(f"unknown task {task!r}; valid: {', '.join(TASKS)}", field="task")


def command_grid(config):
    """Candidate (v, omega) pairs, v-major; exact zeros sit in the middle."""
    kv, kw = config.grid_v, config.grid_omega
    v = config.v_max * np.arange(-kv, kv + 1) / kv
    w = config.omega_max * np.arange(-kw, kw + 1) / kw
    vv, ww = np.meshgrid(v, w, indexing="ij")
    return vv.ravel(), ww.ravel()


def rollout(robot, v, omega, dt, steps):
    """Forward-Euler unicycle rollouts for arrays of constant commands."""
    x = np.full(np.shape(v), robot.x, dtype=float)
    y = np.full(np.shape(v), robot.y, dtype=float)
    h = np.full(np.shape(v), math.radians(robot.heading), dtype=float)
    for _ in range(steps):
        x = x + v * np.cos(h) * dt
        y = y + v * np.sin(h) * dt
        h = h + omega * dt
    return x, y, h


def controller_step(robot, goal, dt, config=None, goal_velocity=(0.0, 0.0)):
    """Receding-horizon command search.

    Every grid command is held for ``config.horizon`` steps; the one with the
    smallest terminal cost ``w_pos * |pos - goal|^2 + w_theta * dheading^2``
    (radians) against the goal extrapolated by ``goal_velocity`` wins. Ties go
    to the lowest grid index.
    """
    config = config or SimConfig()
    v, w = command_grid(config)
    x, y, h = rollout(robot, v, w, dt, config.horizon)
    lead = config.horizon * dt
    gx = goal.x + goal_velocity[0] * lead
    gy = goal.y + goal_velocity[1] * lead
    dh = np.radians(circ_diff(np.degrees(h), goal.theta))
    cost = config.w_pos * ((x - gx) ** 2 + (y - gy) ** 2) + config.w_theta * dh ** 2
    best = int(np.argmin(cost))
    return float(v[best]), float(w[best])


def step_robot(robot, v, omega, dt):
    h = math.radians(robot.heading)
    return RobotState(
        robot.x + v * math.cos(h) * dt,
        robot.y + v * math.sin(h) * dt,
        normalize_deg(robot.heading + math.degrees(omega * dt)),
        v, omega,
    )


def ate(robot_xy, goal_xy):
    """Root-mean-square position error between time-aligned trajectories."""
    r = np.asarray(robot_xy, dtype=float).reshape(-1, 2)
    g = np.asarray(goal_xy, dtype=float).reshape(-1, 2)
    if len(r) != len(g):
        raise InvalidInputError(f"trajectory lengths differ: {len(r)} vs {len(g)}")
    if len(r) == 0:
        raise InvalidInputError("empty trajectory")
    return float(np.sqrt(np.mean(np.sum((r - g) ** 2, axis=1))))


def yaw_rate(samples):
    """Least-squares yaw rate (deg/s) of unwrapped ``(t, theta)`` samples."""
    if len(samples) < 2:
        return 0.0
    t = np.array([s[0] for s in samples])
    th = np.degrees(np.unwrap(np.radians([s[1] for s in samples])))
    tc = t - t.mean()
    denom = float(np.sum(tc ** 2))
    if denom == 0.0:
        return 0.0
    return float(np.sum(tc * (th - th.mean())) / denom)


def clock(duration_s, rate_hz):
    """Exact event times ``k / rate`` in ``[0, duration)``."""
    rate = Fraction(rate_hz).limit_denominator(10 ** 6)
    dur = Fraction(duration_s).limit_denominator(10 ** 6)
    n = math.ceil(dur * rate)
    return [Fraction(k) / rate for k in range(n)]


def observe_position(person, k, noise_m, seed):
    """Noisy position measurement number ``k``."""
    if noise_m == 0:
        return person.x, person.y
    e = derive_rng(seed, "position", k).normal(0.0, noise_m, size=2)
    return person.x + float(e[0]), person.y + float(e[1])


def timeline(scenario, config):
    """Merged (time, priority, kind, index) events, deterministic order."""
    events = []
    for prio, (kind, rate) in enumerate((
        ("position", config.position_hz),
        ("orientation", config.orientation_hz),
        ("control", config.control_hz),
    )):
        events.extend((t, prio, kind, k) for k, t in enumerate(clock(scenario.duration_s, rate)))
    events.sort()
    return events


def observe(scenario, config, seed):
    """Position measurement stream and orientation event times.

    Returns ``(positions, orientation_times)`` where ``positions`` is a list of
    ``(t, x, y)``. Orientation values depend on the estimator and are produced
    inside :func:`run_scenario`.
    """
    positions, orient_times = [], []
    for t, _, kind, k in timeline(scenario, config):
        if kind == "position":
            x, y = observe_position(person_state(scenario, float(t)), k, scenario.noise.get("position_m", 0.0), seed)
            positions.append((float(t), x, y))
        elif kind == "orientation":
            orient_times.append(float(t))
    return positions, orient_times


@dataclass
class SimResult:
    scenario: str
    estimator: str
    task: str
    log: np.ndarray  # rows of LOG_FIELDS
    ate: float

    @property
    def t(self):
        return self.log[:, 0]

    def column(self, name):
        return self.log[:, LOG_FIELDS.index(name)]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_FIELDS)
            for row in self.log:
                w.writerow([repr(float(v)) for v in row])


def run_scenario(scenario, estimator, task="backward", config=None, seed=None, params=None):
    """Simulate one following run and score it.

    ``estimator`` is ``cv_baseline`` (heading of consecutive position
    measurements), ``ground_truth`` (true yaw at the orientation rate) or
    ``model`` (synthesized skeleton -> network -> temporal gate; needs
    ``params``). ATE is computed against the ideal goal of the true person
    pose over frames at or after ``config.transient_s``.
    """
    config = config or SimConfig()
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}; valid: {', '.join(ESTIMATORS)}", field="estimator")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; valid: {', '.join(TASKS)}", field="task")
    if estimator == "model" and params is None:
        raise ConfigError("the model estimator needs trained parameters", field="model")
    seed = scenario.seed if seed is None else seed
    mode = OcclusionMode.parse(scenario.occlusion_mode)
    pos_noise = scenario.noise.get("position_m", 0.0)
    skel_noise = scenario.noise.get("skeleton", 0.0)
    d = config.follow_distance
    dt = 1.0 / config.control_hz

    p0 = person_state(scenario, 0.0)
    g0 = goal_for(task, p0, d)
    robot = RobotState(g0.x, g0.y, g0.theta)
    est_theta = p0.theta
    conf = 1.0 if estimator != "cv_baseline" else float("nan")
    gate = TemporalGate(config.gate_window)
    meas, meas_t = None, 0.0
    vel = (0.0, 0.0)
    recent = deque()
    lead = config.horizon * dt
    rows = []

    for tf, _, kind, k in timeline(scenario, config):
        t = float(tf)
        person = person_state(scenario, t)
        if kind == "position":
            new = observe_position(person, k, pos_noise, seed)
            if meas is not None:
                span = t - meas_t
                vel = ((new[0] - meas[0]) / span, (new[1] - meas[1]) / span)
                if estimator == "cv_baseline":
                    est_theta = cv_orientation(meas, new, est_theta, config.cv_eps)
            meas, meas_t = new, t
        elif kind == "orientation":
            if estimator == "ground_truth":
                est_theta = person.theta
            elif estimator == "model" and meas is not None:
                # yaw seen by the camera: 0 when the person faces the robot
                view = math.degrees(math.atan2(person.y - robot.y, person.x - robot.x))
                sample = synthesize(person.theta - view - 180.0, mode, skel_noise,
                                    seed=int(derive_rng(seed, "skeleton", k).integers(2 ** 62)))
                pred, c = predict(params, sample.skeleton)
                seen = math.degrees(math.atan2(meas[1] - robot.y, meas[0] - robot.x))
                gate.push(normalize_deg(pred + seen + 180.0), c)
                est_theta = gate.current()
                conf = max(c for _, c in gate.window)
        else:
            if meas is None:
                continue
            recent.append((t, est_theta))
            while recent[0][0] < t - config.rate_window_s:
                recent.popleft()
            rate = yaw_rate(recent)
            ahead = t - meas_t + lead
            future = PersonState(meas[0] + vel[0] * ahead, meas[1] + vel[1] * ahead,
                                 normalize_deg(est_theta + rate * lead))
            ideal = goal_for(task, person, d)
            rows.append((t, person.x, person.y, person.theta, robot.x, robot.y, robot.heading,
                         ideal.x, ideal.y, ideal.theta, est_theta, conf))
            v, w = controller_step(robot, goal_for(task, future, d), dt, config)
            robot = step_robot(robot, v, w, dt)

    log = np.asarray(rows, dtype=float)
    keep = log[:, 0] >= config.transient_s - 1e-12
    if not keep.any():
        keep[:] = True
    score = ate(log[keep][:, 4:6], log[keep][:, 7:9])
    return SimResult(scenario.name, estimator, task, log, score)
