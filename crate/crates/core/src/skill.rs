//! Encapsulated skills: pre/invariant/post conditions, composite chaining,
//! resume, and goal blending between the alignment and insertion targets.

use crate::se3::{wrap_angle, Pose6};
use crate::sim::{insertion_depth, PegHoleGeometry, SimState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SkillError {
    #[error("composite skill must have at least one child")]
    Empty,
    #[error("chaining broken between children {0} and {1}: post-condition region cannot reach the next pre-condition")]
    ChainMismatch(usize, usize),
    #[error("no child pre-condition holds in the current world state")]
    NoEntryPoint,
    #[error("start index {0} out of range for {1} children")]
    BadStartIndex(usize, usize),
}

/// World snapshot a condition is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct WorldView<'a> {
    pub state: &'a SimState,
    pub geom: &'a PegHoleGeometry,
}

/// Predicates over the world state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    /// Componentwise |wrapped error| <= tol against a target pose.
    PoseWithin { target: Pose6, tol: [f64; 6] },
    /// Total contact force magnitude below a limit, N.
    ForceBelow { limit: f64 },
    /// Insertion depth at least this many meters.
    DepthAtLeast { depth: f64 },
    /// All sub-conditions hold.
    Conjunction(Vec<Condition>),
}

impl Condition {
    pub fn always() -> Self {
        Condition::Conjunction(Vec::new())
    }

    pub fn eval(&self, world: &WorldView) -> bool {
        match self {
            Condition::PoseWithin { target, tol } => {
                let cur = world.state.peg_pose.to_array();
                let tgt = target.to_array();
                (0..6).all(|i| {
                    let err = if i < 3 { tgt[i] - cur[i] } else { wrap_angle(tgt[i] - cur[i]) };
                    err.abs() <= tol[i]
                })
            }
            Condition::ForceBelow { limit } => world.state.last_wrench.force_norm() < *limit,
            Condition::DepthAtLeast { depth } => {
                insertion_depth(&world.state.peg_pose, world.geom) >= *depth
            }
            Condition::Conjunction(cs) => cs.iter().all(|c| c.eval(world)),
        }
    }

    pub fn validate(&self) -> Result<(), SkillError> {
        match self {
            Condition::PoseWithin { tol, .. } => {
                if tol.iter().any(|t| *t <= 0.0) {
                    return Err(SkillError::ChainMismatch(0, 0));
                }
            }
            Condition::ForceBelow { limit } if *limit <= 0.0 => {
                return Err(SkillError::ChainMismatch(0, 0));
            }
            Condition::Conjunction(cs) => {
                for c in cs {
                    c.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Interval of peg-center z values compatible with the condition, used by
    /// the chaining check. `DepthAtLeast` maps through the small-angle relation
    /// depth ~ -z, slackened by the peg half-diagonal to cover tilt.
    fn z_interval(&self, geom: &PegHoleGeometry) -> (f64, f64) {
        match self {
            Condition::PoseWithin { target, tol } => (target.z - tol[2], target.z + tol[2]),
            Condition::DepthAtLeast { depth } => {
                let slack = geom.peg_side * std::f64::consts::SQRT_2 / 2.0;
                (f64::NEG_INFINITY, -depth + slack)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn intersects(&self, other: &Condition, geom: &PegHoleGeometry) -> bool {
        let (a_lo, a_hi) = self.z_interval(geom);
        let (b_lo, b_hi) = other.z_interval(geom);
        if a_lo.max(b_lo) > a_hi.min(b_hi) {
            return false;
        }
        match (self, other) {
            (Condition::Conjunction(cs), _) => cs.iter().all(|c| c.intersects(other, geom)),
            (_, Condition::Conjunction(cs)) => cs.iter().all(|c| self.intersects(c, geom)),
            (
                Condition::PoseWithin { target: ta, tol: la },
                Condition::PoseWithin { target: tb, tol: lb },
            ) => {
                let a = ta.to_array();
                let b = tb.to_array();
                (0..6).all(|i| {
                    let d = if i < 3 { a[i] - b[i] } else { wrap_angle(a[i] - b[i]) };
                    d.abs() <= la[i] + lb[i]
                })
            }
            _ => true,
        }
    }
}

/// Behavior executed while a skill runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BehaviorRef {
    NominalController,
    ResidualPolicy { checkpoint: String },
}

/// An atomic skill: when it may start, what must hold throughout, what
/// success means, and which behavior drives it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    pub name: String,
    pub pre: Condition,
    pub inv: Condition,
    pub post: Condition,
    pub behavior: BehaviorRef,
    /// Seconds of simulated time before the skill fails with Timeout.
    pub timeout: f64,
}

impl Skill {
    pub fn validate(&self) -> Result<(), SkillError> {
        self.pre.validate()?;
        self.inv.validate()?;
        self.post.validate()?;
        if self.timeout <= 0.0 {
            return Err(SkillError::ChainMismatch(0, 0));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailReason {
    PreUnsatisfied,
    InvariantViolated,
    Timeout,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionStatus {
    Inactive,
    Running(usize),
    Succeeded,
    Failed(FailReason),
}

impl ExecutionStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, ExecutionStatus::Succeeded | ExecutionStatus::Failed(_))
    }
}

/// Tracks one skill execution across ticks.
#[derive(Debug, Clone)]
pub struct SkillRun {
    started: bool,
    elapsed: f64,
    status: ExecutionStatus,
}

impl SkillRun {
    pub fn new() -> Self {
        Self { started: false, elapsed: 0.0, status: ExecutionStatus::Inactive }
    }

    pub fn status(&self) -> ExecutionStatus {
        self.status
    }

    /// Evaluate the skill state machine against the current world. Checks the
    /// pre-condition on the first tick only, then the invariant, then the
    /// post-condition, then the timeout. Terminal states never transition.
    pub fn tick(&mut self, skill: &Skill, world: &WorldView, dt: f64) -> ExecutionStatus {
        if self.status.is_terminal() {
            return self.status;
        }
        if !world.state.peg_pose.is_finite() || !world.state.last_wrench.is_finite() {
            self.status = ExecutionStatus::Failed(FailReason::NonFinite);
            return self.status;
        }
        if !self.started {
            self.started = true;
            if !skill.pre.eval(world) {
                self.status = ExecutionStatus::Failed(FailReason::PreUnsatisfied);
                return self.status;
            }
        }
        if !skill.inv.eval(world) {
            self.status = ExecutionStatus::Failed(FailReason::InvariantViolated);
            return self.status;
        }
        if skill.post.eval(world) {
            self.status = ExecutionStatus::Succeeded;
            return self.status;
        }
        self.elapsed += dt;
        if self.elapsed > skill.timeout {
            self.status = ExecutionStatus::Failed(FailReason::Timeout);
            return self.status;
        }
        self.status = ExecutionStatus::Running(0);
        self.status
    }
}

impl Default for SkillRun {
    fn default() -> Self {
        Self::new()
    }
}

/// Ordered composition where each child's post-condition establishes the next
/// child's pre-condition; checked structurally at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSkill {
    children: Vec<Skill>,
}

impl CompositeSkill {
    pub fn new(children: Vec<Skill>, geom: &PegHoleGeometry) -> Result<Self, SkillError> {
        if children.is_empty() {
            return Err(SkillError::Empty);
        }
        for child in &children {
            child.validate()?;
        }
        for i in 0..children.len() - 1 {
            if !children[i].post.intersects(&children[i + 1].pre, geom) {
                return Err(SkillError::ChainMismatch(i, i + 1));
            }
        }
        Ok(Self { children })
    }

    pub fn children(&self) -> &[Skill] {
        &self.children
    }

    /// Largest child index whose pre-condition holds, for resuming an
    /// interrupted execution without repeating earlier skills.
    pub fn resume_index(&self, world: &WorldView) -> Result<usize, SkillError> {
        self.children
            .iter()
            .enumerate()
            .rev()
            .find(|(_, child)| child.pre.eval(world))
            .map(|(i, _)| i)
            .ok_or(SkillError::NoEntryPoint)
    }
}

/// Drives the world forward while a skill runs; implemented by the control
/// loop (or by test stubs).
pub trait Behavior {
    fn act(&mut self, world: &mut SimState, skill: &Skill, dt: f64);
}

impl<F: FnMut(&mut SimState, &Skill, f64)> Behavior for F {
    fn act(&mut self, world: &mut SimState, skill: &Skill, dt: f64) {
        self(world, skill, dt)
    }
}

/// Run children in order from `start_index`, ticking each skill and letting
/// the behavior advance the world between ticks. Returns the status trace;
/// the first failure short-circuits.
pub fn run_composite<B: Behavior>(
    comp: &CompositeSkill,
    world: &mut SimState,
    geom: &PegHoleGeometry,
    start_index: usize,
    behavior: &mut B,
    dt: f64,
) -> Result<Vec<ExecutionStatus>, SkillError> {
    let n = comp.children.len();
    if start_index >= n {
        return Err(SkillError::BadStartIndex(start_index, n));
    }
    let mut trace = Vec::new();
    for (idx, child) in comp.children.iter().enumerate().skip(start_index) {
        let mut run = SkillRun::new();
        loop {
            let status = {
                let view = WorldView { state: world, geom };
                run.tick(child, &view, dt)
            };
            match status {
                ExecutionStatus::Running(_) => {
                    trace.push(ExecutionStatus::Running(idx));
                    behavior.act(world, child, dt);
                }
                ExecutionStatus::Succeeded => {
                    if idx == n - 1 {
                        trace.push(ExecutionStatus::Succeeded);
                    }
                    break;
                }
                failed @ ExecutionStatus::Failed(_) => {
                    trace.push(failed);
                    return Ok(trace);
                }
                ExecutionStatus::Inactive => unreachable!("tick never leaves Inactive"),
            }
        }
    }
    Ok(trace)
}

/// Goal interpolation state between the alignment and insertion targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendState {
    pub alpha_smooth: f64,
    pub x_align: Pose6,
    pub x_insert: Pose6,
    /// Latched once the alignment post-condition has held.
    pub align_reached: bool,
    /// Depth over which alpha ramps 0 -> 1 once alignment is reached.
    pub ramp_depth: f64,
}

impl BlendState {
    pub fn new(x_align: Pose6, x_insert: Pose6, ramp_depth: f64) -> Self {
        Self { alpha_smooth: 0.0, x_align, x_insert, align_reached: false, ramp_depth }
    }
}

/// Affine interpolation `(1 - alpha) x_align + alpha x_insert`, with angular
/// components interpolated along the shortest path.
pub fn blend_goal(b: &BlendState) -> Pose6 {
    let a = b.x_align.to_array();
    let c = b.x_insert.to_array();
    let t = b.alpha_smooth;
    let mut out = [0.0; 6];
    for i in 0..3 {
        out[i] = (1.0 - t) * a[i] + t * c[i];
    }
    for i in 3..6 {
        out[i] = wrap_angle(a[i] + t * wrap_angle(c[i] - a[i]));
    }
    Pose6::from_array(out)
}

/// Depth-driven alpha schedule: zero until the alignment post-condition first
/// holds, then `min(1, depth / ramp_depth)`, monotone within one execution.
pub fn advance_alpha(b: &BlendState, align_post_holds: bool, world: &WorldView) -> BlendState {
    let mut next = *b;
    if !next.align_reached {
        if !align_post_holds {
            return next;
        }
        next.align_reached = true;
    }
    let depth = insertion_depth(&world.state.peg_pose, world.geom);
    let target = (depth / next.ramp_depth).clamp(0.0, 1.0);
    next.alpha_smooth = next.alpha_smooth.max(target);
    next
}
