"""End-effector perturbation sampling.

Contactless frames draw independent per-arm perturbations uniformly (direction
on the sphere, magnitude in [m_lb, m_ub], per-axis rotation in [r_lb, r_ub]).
Contact-rich frames search a single shared translation for BOTH arms with dual
annealing over normalized coordinates, so the grasped object's relative
geometry is preserved. Feasibility is enforced by the LM-IK oracle plus
table-clearance and inter-EEF-distance constraints; every accepted sample can
be re-verified from scratch by forward kinematics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .annealing import AnnealConfig, dual_annealing
from .kinematics import IkConfig, KinematicChain, fk_eef, solve_ik_lm
from .se3 import SE3Pose, perturbed_pose, quat_from_rpy

LEFT = "left"
RIGHT = "right"
ARMS = (LEFT, RIGHT)


@dataclass
class PerturbationConfig:
    m_lb: float = 0.05          # translation magnitude bounds, meters
    m_ub: float = 0.1
    r_lb: float = -math.radians(28.7)  # per-axis rotation bounds, radians
    r_ub: float = math.radians(28.7)
    d_table: float = 0.03       # min EEF height above the table, meters
    d_eff: float = 0.10         # min distance between the two EEFs, meters
    table_height: float = 0.0
    retry_cap: int = 50
    # penalty weights for the contact-rich cost (violation => cost >= weight)
    w_too_small: float = 10.0
    w_table: float = 100.0
    w_eff: float = 100.0
    w_ik: float = 1000.0

    def validate(self) -> None:
        if not 0.0 < self.m_lb <= self.m_ub:
            raise ValueError("need 0 < m_lb <= m_ub")
        if not self.r_lb < self.r_ub:
            raise ValueError("need r_lb < r_ub")
        if self.d_table <= 0 or self.d_eff <= 0:
            raise ValueError("d_table and d_eff must be positive")
        if self.retry_cap < 1:
            raise ValueError("retry_cap must be >= 1")

    def to_dict(self) -> dict:
        return {
            "m_lb": self.m_lb,
            "m_ub": self.m_ub,
            "r_lb": self.r_lb,
            "r_ub": self.r_ub,
            "d_table": self.d_table,
            "d_eff": self.d_eff,
            "table_height": self.table_height,
            "retry_cap": self.retry_cap,
        }

    @staticmethod
    def from_dict(d: dict) -> "PerturbationConfig":
        cfg = PerturbationConfig()
        for k, v in d.items():
            if hasattr(cfg, k):
                setattr(cfg, k, v)
        cfg.validate()
        return cfg


class SamplingFailed(Exception):
    """No feasible perturbation was found for this frame; keep it unaugmented."""


@dataclass
class ArmPerturbation:
    delta: SE3Pose
    joints: np.ndarray
    target: SE3Pose


@dataclass
class FramePerturbation:
    phase: str  # "contactless" | "contact"
    arms: dict[str, ArmPerturbation]

    @property
    def deltas(self) -> dict[str, SE3Pose]:
        return {k: v.delta for k, v in self.arms.items()}

    @property
    def joints(self) -> dict[str, np.ndarray]:
        return {k: v.joints for k, v in self.arms.items()}


def _eef_ok(p: np.ndarray, other: np.ndarray, cfg: PerturbationConfig) -> bool:
    if p[2] < cfg.table_height + cfg.d_table:
        return False
    return float(np.linalg.norm(p - other)) >= cfg.d_eff


def sample_contactless(
    eef_src: dict[str, SE3Pose],
    chains: dict[str, KinematicChain],
    q_src: dict[str, np.ndarray],
    cfg: PerturbationConfig,
    rng: np.random.Generator,
    ik: IkConfig | None = None,
) -> FramePerturbation:
    """Independent per-arm uniform perturbations with feasibility retries.

    Raises SamplingFailed when an arm exhausts its retry cap.
    """
    cfg.validate()
    ik = ik or IkConfig()
    out: dict[str, ArmPerturbation] = {}
    other_pos = {LEFT: eef_src[RIGHT].trans, RIGHT: eef_src[LEFT].trans}
    for arm in ARMS:
        src = eef_src[arm]
        accepted = None
        for _ in range(cfg.retry_cap):
            direction = rng.normal(size=3)
            n = np.linalg.norm(direction)
            if n < 1e-12:
                continue
            magnitude = rng.uniform(cfg.m_lb, cfg.m_ub)
            rpy = rng.uniform(cfg.r_lb, cfg.r_ub, size=3)
            delta = SE3Pose(quat_from_rpy(*rpy), direction / n * magnitude)
            target = perturbed_pose(src, delta)
            if not _eef_ok(target.trans, other_pos[arm], cfg):
                continue
            q_new = solve_ik_lm(chains[arm], target, q_src[arm], ik)
            if q_new is None:
                continue
            accepted = ArmPerturbation(delta=delta, joints=q_new, target=target)
            break
        if accepted is None:
            raise SamplingFailed(f"{arm} arm: contactless retry cap {cfg.retry_cap} exhausted")
        out[arm] = accepted
        # the second arm must keep clear of the first arm's NEW position
        other_pos[RIGHT if arm == LEFT else LEFT] = accepted.target.trans
    return FramePerturbation(phase="contactless", arms=out)


# ---------------------------------------------------------------------------
# Contact-rich: shared-translation constrained search
# ---------------------------------------------------------------------------

@dataclass
class CostContext:
    eef_src: dict[str, SE3Pose]
    chains: dict[str, KinematicChain]
    q_src: dict[str, np.ndarray]
    cfg: PerturbationConfig
    ik: IkConfig = field(default_factory=IkConfig)


def scale_translation(c_trans: np.ndarray, cfg: PerturbationConfig) -> np.ndarray:
    """Map normalized coordinates in [-1,1]^3 to a metric translation.

    Components are scaled by m_ub, then the vector norm is clamped to m_ub;
    the lower magnitude bound is enforced by the cost, not the mapping.
    """
    v = np.asarray(c_trans, dtype=float) * cfg.m_ub
    n = float(np.linalg.norm(v))
    if n > cfg.m_ub:
        v = v * (cfg.m_ub / n)
    return v


def cost(c_trans, context: CostContext) -> float:
    """Penalty sum for a shared candidate translation; zero iff feasible.

    Terms: magnitude below m_lb, table proximity, inter-EEF proximity, and IK
    invalidity (largest weight). Each violated term contributes at least its
    weight plus a graded amount so the optimizer can descend toward validity.
    """
    cfg = context.cfg
    v = scale_translation(c_trans, cfg)
    total = 0.0
    mag = float(np.linalg.norm(v))
    if mag < cfg.m_lb:
        total += cfg.w_too_small * (1.0 + (cfg.m_lb - mag) / cfg.m_lb)
    pos = {arm: context.eef_src[arm].trans + v for arm in ARMS}
    for arm in ARMS:
        clearance = pos[arm][2] - cfg.table_height
        if clearance < cfg.d_table:
            total += cfg.w_table * (1.0 + (cfg.d_table - clearance) / cfg.d_table)
    gap = float(np.linalg.norm(pos[LEFT] - pos[RIGHT]))
    if gap < cfg.d_eff:
        total += cfg.w_eff * (1.0 + (cfg.d_eff - gap) / cfg.d_eff)
    delta = SE3Pose(trans=v)
    for arm in ARMS:
        target = perturbed_pose(context.eef_src[arm], delta)
        if solve_ik_lm(context.chains[arm], target, context.q_src[arm], context.ik) is None:
            total += cfg.w_ik
    return total


def sample_contact_rich(
    eef_src: dict[str, SE3Pose],
    chains: dict[str, KinematicChain],
    q_src: dict[str, np.ndarray],
    cfg: PerturbationConfig,
    anneal: AnnealConfig | None = None,
    rng: np.random.Generator | None = None,
    ik: IkConfig | None = None,
) -> FramePerturbation:
    """One shared world-frame translation for both arms via dual annealing.

    The rotation stays at identity; both relabeled joint vectors must pass IK
    and all proximity constraints, otherwise SamplingFailed is raised.
    """
    cfg.validate()
    ik = ik or IkConfig()
    context = CostContext(eef_src=eef_src, chains=chains, q_src=q_src, cfg=cfg, ik=ik)
    anneal = anneal or AnnealConfig(max_iters=200)
    if anneal.early_cost is None:
        anneal = AnnealConfig.from_dict({**anneal.to_dict(), "early_cost": 0.0})
    bounds = [(-1.0, 1.0)] * 3
    result = dual_annealing(lambda c: cost(c, context), bounds, anneal, rng)
    if result.fun > 0.0:
        raise SamplingFailed(f"annealing best cost {result.fun:.3g} still infeasible")
    v = scale_translation(result.x, cfg)
    delta = SE3Pose(trans=v)
    arms: dict[str, ArmPerturbation] = {}
    for arm in ARMS:
        target = perturbed_pose(eef_src[arm], delta)
        q_new = solve_ik_lm(chains[arm], target, q_src[arm], ik)
        if q_new is None:  # cost() said valid; re-solve must agree
            raise SamplingFailed(f"{arm} arm: IK re-check failed")
        arms[arm] = ArmPerturbation(delta=delta, joints=q_new, target=target)
    return FramePerturbation(phase="contact", arms=arms)


class FrameSampler:
    """Bundles chains + configs; the per-frame entry point used by the pipeline."""

    def __init__(
        self,
        chains: dict[str, KinematicChain],
        cfg: PerturbationConfig | None = None,
        anneal: AnnealConfig | None = None,
        ik: IkConfig | None = None,
    ):
        self.chains = chains
        self.cfg = cfg or PerturbationConfig()
        self.anneal = anneal or AnnealConfig(max_iters=200)
        self.ik = ik or IkConfig()

    def sample(self, q_src: dict[str, np.ndarray], contact: bool, rng) -> FramePerturbation:
        eef_src = {arm: fk_eef(self.chains[arm], q_src[arm]) for arm in ARMS}
        if contact:
            return sample_contact_rich(
                eef_src, self.chains, q_src, self.cfg, self.anneal, rng, self.ik
            )
        return sample_contactless(eef_src, self.chains, q_src, self.cfg, rng, self.ik)
