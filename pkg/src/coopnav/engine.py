"""Deterministic tick-loop orchestration of one seeded mission.

Per tick, in fixed order: guidance from the fused estimates, truth advance,
dead reckoning of both estimates, pressure-depth replacement, protocol
events (pings, fusion, broadcasts, deliveries), fix application, metric
accumulation.  Identical (config, seed) pairs produce byte-identical event
logs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acoustic import LossModelCoefficients, UsblNoiseConfig
from .conflict import build_conflict_graph, greedy_color
from .formation import AsvLayout, FormationConfig, asv_positions
from .mission import (GuidanceConfig, VehicleTruth, advance_truth,
                      guidance_step, plan_lawnmower, point_segment_distance)
from .nav import KinematicInput, NavState, apply_fix, dead_reckon_step, depth_update
from .protocol import TdmaScheduler, TimingConfig


@dataclass
class SimConfig:
    L: float = 60.0
    n_auv: int = 4
    n_asv: int = 1
    alpha0: float = 0.0                  # formation angle, rad
    duration: float = 300.0              # s
    f_t: int = 30                        # Hz
    seed: int = 0
    r_hf: float = 50.0                   # HF uplink range, m
    delta_b: float = 0.0                 # formation radius buffer, m
    asv_jitter_std: float = 0.0          # station-keeping jitter std, m
    depth: float = 10.0                  # survey depth, m
    track_spacing: float | None = None   # None: strip height / 3
    noise: UsblNoiseConfig = field(default_factory=UsblNoiseConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    bias: tuple[float, float] = (0.06, 0.06)
    sigma: float = 0.027
    sigma_z: float = 0.05
    gamma: float = 0.90
    guidance_on_truth: bool = False      # steer on truth instead of the estimate
    usbl_enabled: bool = True
    conflict_source: str = "truth"       # or "last_fix"
    contention: str = "fleet"            # or "group"
    trace: bool = False

    def validate(self):
        if self.n_auv < 1:
            raise ValueError(f"n_auv must be >= 1 (got {self.n_auv})")
        if self.n_asv < 1:
            raise ValueError(f"n_asv must be >= 1 (got {self.n_asv})")
        if self.L <= 0:
            raise ValueError(f"L must be > 0 (got {self.L})")
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0 (got {self.duration})")
        if self.f_t < 1 or int(self.f_t) != self.f_t:
            raise ValueError(f"f_t must be a positive integer (got {self.f_t})")
        if self.r_hf <= 0:
            raise ValueError(f"r_hf must be > 0 (got {self.r_hf})")
        if self.delta_b < 0:
            raise ValueError(f"delta_b must be >= 0 (got {self.delta_b})")
        if self.asv_jitter_std < 0:
            raise ValueError(f"asv_jitter_std must be >= 0 (got {self.asv_jitter_std})")
        if self.conflict_source not in ("truth", "last_fix"):
            raise ValueError(f"conflict_source must be 'truth' or 'last_fix' "
                             f"(got {self.conflict_source!r})")
        if self.contention not in ("fleet", "group"):
            raise ValueError(f"contention must be 'fleet' or 'group' "
                             f"(got {self.contention!r})")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1] (got {self.gamma})")
        self.timing.validate()
        self.guidance.validate()

    def canonical_items(self) -> list[tuple[str, str]]:
        """Flat, ordered (key, value) view of everything that shapes dynamics."""
        items = [
            ("L", repr(self.L)), ("n_auv", repr(self.n_auv)),
            ("n_asv", repr(self.n_asv)), ("alpha0", repr(self.alpha0)),
            ("duration", repr(self.duration)), ("f_t", repr(self.f_t)),
            ("r_hf", repr(self.r_hf)), ("delta_b", repr(self.delta_b)),
            ("asv_jitter_std", repr(self.asv_jitter_std)),
            ("depth", repr(self.depth)), ("track_spacing", repr(self.track_spacing)),
            ("bias", repr(self.bias)), ("sigma", repr(self.sigma)),
            ("sigma_z", repr(self.sigma_z)), ("gamma", repr(self.gamma)),
            ("guidance_on_truth", repr(self.guidance_on_truth)),
            ("usbl_enabled", repr(self.usbl_enabled)),
            ("conflict_source", self.conflict_source),
            ("contention", self.contention),
        ]
        for prefix, obj in (("noise", self.noise), ("timing", self.timing),
                            ("guidance", self.guidance)):
            for k in sorted(vars(obj)):
                items.append((f"{prefix}.{k}", repr(getattr(obj, k))))
        return items

    def config_hash(self) -> str:
        blob = "\n".join(f"{k}={v}" for k, v in self.canonical_items())
        return hashlib.sha1(blob.encode()).hexdigest()[:12]


@dataclass
class AuvMetrics:
    auv_id: int
    mean_cte: float
    mean_est_err: float
    fix_count: int
    coverage: float
    distance: float
    allocation: float
    mean_inter_fix_s: float
    max_inter_fix_s: float
    final_imu_err: float
    max_fused_err: float


@dataclass
class MissionReport:
    config_hash: str
    seed: int
    ticks: int
    duration_s: float
    per_auv: list[AuvMetrics]
    total_applied: int
    applied_rate_hz: float
    latency_mean_s: float
    latency_p95_s: float
    dropped: dict[str, int]
    max_innovation: float
    excursion_ticks: int
    event_log: list[str]
    trace_log: list[str]


def derive_rng(seed: int, stream_label: str) -> np.random.Generator:
    """Independent deterministic generator for one (seed, label) stream."""
    key = tuple(stream_label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def coverage_fraction(ping_log) -> float:
    """Fraction of ping attempts heard by at least one ASV (0 when none)."""
    if len(ping_log) == 0:
        return 0.0
    return sum(1 for h in ping_log if h) / len(ping_log)


def _percentile(sorted_vals: list[float], q: float) -> float:
    if not sorted_vals:
        return 0.0
    idx = max(0, math.ceil(q * len(sorted_vals)) - 1)
    return sorted_vals[idx]


def run(config: SimConfig) -> MissionReport:
    """Execute one seeded mission and return its report."""
    config.validate()
    noise = replace(config.noise, r_max=config.r_hf)
    timing = replace(config.timing, f_t=config.f_t)
    guid = config.guidance
    n, m = config.n_auv, config.n_asv
    f_t = config.f_t
    dt = 1.0 / f_t
    half = config.L / 2.0

    plan = plan_lawnmower(config.L, n, config.track_spacing, config.depth)

    def active_cte(i: int, x: float, y: float) -> float:
        # cross-track error against the segment currently being tracked; a
        # starved vehicle's divergence is then measured, not absorbed by
        # whichever parallel track it happens to drift past
        wps = plan.waypoints[i]
        w = min(max(wp_index[i], 1), len(wps) - 1)
        return point_segment_distance(x, y, wps[w - 1][0], wps[w - 1][1],
                                      wps[w][0], wps[w][1])
    layout = asv_positions(FormationConfig(
        n_asv=m, L=config.L, r_hf=config.r_hf, delta_b=config.delta_b,
        alpha0=config.alpha0))
    base_asv = layout.positions

    seed = config.seed
    imu_rng = [derive_rng(seed, f"imu/{i}") for i in range(n)]
    depth_rng = [derive_rng(seed, f"depth/{i}") for i in range(n)]
    usbl_rng = [[derive_rng(seed, f"usbl/{i}/{j}") for j in range(m)] for i in range(n)]
    loss_rng = [[derive_rng(seed, f"loss/{i}/{j}") for j in range(m)] for i in range(n)]
    jitter_rng = derive_rng(seed, "asv_jitter") if config.asv_jitter_std > 0 else None

    truths, navs, wp_index, kin = [], [], [], []
    for i in range(n):
        x0, y0 = plan.waypoints[i][0]
        x1, y1 = plan.waypoints[i][1]
        yaw0 = math.atan2(y1 - y0, x1 - x0)
        truths.append(VehicleTruth(x0, y0, config.depth, yaw0))
        navs.append(NavState.at(x0, y0, config.depth, bias=config.bias,
                                sigma=config.sigma, sigma_z=config.sigma_z,
                                gamma=config.gamma))
        wp_index.append(0)
        kin.append(None)

    proto = TdmaScheduler(timing, noise, LossModelCoefficients(), config.L,
                          n, m, lambda i, j: (usbl_rng[i][j], loss_rng[i][j]),
                          contention=config.contention)
    last_fix_xy = [(t.x, t.y) for t in truths]
    asv_now = base_asv

    def recolor():
        if config.conflict_source == "truth":
            pos = [(t.x, t.y) for t in truths]
        else:
            pos = list(last_fix_xy)
        g = build_conflict_graph(pos, AsvLayout(asv_now), config.r_hf)
        return g, greedy_color(g)

    proto.start_round(*recolor(), tick=0)

    cte_sum = [0.0] * n
    err_sum = [0.0] * n
    dist = [0.0] * n
    applied = [0] * n
    applied_ticks: list[list[int]] = [[] for _ in range(n)]
    max_fused_err = [0.0] * n
    max_innovation = 0.0
    excursions = 0
    trace_log: list[str] = []

    total_ticks = round(config.duration * f_t)
    ticks_run = 0
    for k in range(total_ticks):
        if jitter_rng is not None:
            asv_now = base_asv + jitter_rng.normal(
                0.0, config.asv_jitter_std, size=base_asv.shape)

        due = proto.due_auvs(k) if config.usbl_enabled else set()
        for i in range(n):
            t = truths[i]
            if config.guidance_on_truth:
                est_xy = (t.x, t.y)
            else:
                est_xy = (navs[i].p_fused[0], navs[i].p_fused[1])
            speed_cmd, yaw_cmd, wp_index[i] = guidance_step(
                t, est_xy, plan.waypoints[i], wp_index[i], guid, dt)
            advance_truth(t, speed_cmd, yaw_cmd, guid, dt, config.depth)
            kin[i] = KinematicInput((t.speed, 0.0), t.yaw, dt, config.depth)
            dead_reckon_step(navs[i], kin[i], imu_rng[i],
                             advance_fused=(i not in due))
            depth_update(navs[i], t.z, depth_rng[i])

        if config.usbl_enabled:
            pos3 = [(t.x, t.y, t.z) for t in truths]
            delivered = proto.step(k, pos3, asv_now, recolor)
            for i, pd in delivered:
                fx, fy = pd.fix.position[0], pd.fix.position[1]
                innov = math.hypot(fx - navs[i].p_fused[0], fy - navs[i].p_fused[1])
                max_innovation = max(max_innovation, innov)
                apply_fix(navs[i], pd.fix, kin[i])
                applied[i] += 1
                applied_ticks[i].append(k)
                last_fix_xy[i] = (fx, fy)

        for i in range(n):
            t = truths[i]
            cte = active_cte(i, t.x, t.y)
            cte_sum[i] += cte
            e = math.hypot(navs[i].p_fused[0] - t.x, navs[i].p_fused[1] - t.y)
            err_sum[i] += e
            max_fused_err[i] = max(max_fused_err[i], e)
            dist[i] += t.speed * dt
            if abs(t.x) > half + 1e-9 or abs(t.y) > half + 1e-9:
                excursions += 1
            if config.trace:
                nv = navs[i]
                trace_log.append(
                    f"TRACE{{tick={k}, auv={i}, "
                    f"true=({t.x:.6f}, {t.y:.6f}, {t.z:.6f}), "
                    f"imu=({nv.p_imu[0]:.6f}, {nv.p_imu[1]:.6f}, {nv.p_imu[2]:.6f}), "
                    f"fused=({nv.p_fused[0]:.6f}, {nv.p_fused[1]:.6f}, "
                    f"{nv.p_fused[2]:.6f}), cte={cte:.6f}}}")

        ticks_run = k + 1
        if all(wp_index[i] >= len(plan.waypoints[i]) for i in range(n)):
            break

    duration_s = ticks_run / f_t
    total_applied = sum(applied)
    lat_sorted = sorted(proto.latencies)
    per_auv = []
    for i in range(n):
        gaps = [(b - a) / f_t for a, b in zip(applied_ticks[i], applied_ticks[i][1:])]
        per_auv.append(AuvMetrics(
            auv_id=i,
            mean_cte=cte_sum[i] / ticks_run if ticks_run else 0.0,
            mean_est_err=err_sum[i] / ticks_run if ticks_run else 0.0,
            fix_count=applied[i],
            coverage=coverage_fraction(proto.heard_log[i]),
            distance=dist[i],
            allocation=applied[i] / total_applied if total_applied else 0.0,
            mean_inter_fix_s=sum(gaps) / len(gaps) if gaps else 0.0,
            max_inter_fix_s=max(gaps) if gaps else 0.0,
            final_imu_err=math.hypot(navs[i].p_imu[0] - truths[i].x,
                                     navs[i].p_imu[1] - truths[i].y),
            max_fused_err=max_fused_err[i],
        ))
    return MissionReport(
        config_hash=config.config_hash(),
        seed=seed,
        ticks=ticks_run,
        duration_s=duration_s,
        per_auv=per_auv,
        total_applied=total_applied,
        applied_rate_hz=total_applied / duration_s if duration_s else 0.0,
        latency_mean_s=sum(lat_sorted) / len(lat_sorted) if lat_sorted else 0.0,
        latency_p95_s=_percentile(lat_sorted, 0.95),
        dropped=dict(proto.dropped),
        max_innovation=max_innovation,
        excursion_ticks=excursions,
        event_log=list(proto.events),
        trace_log=trace_log,
    )
