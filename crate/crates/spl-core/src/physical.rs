//! Symbolic track blueprints (hills, valleys, storage loops over cyclic
//! 1-D tracks), the rewrite operators that grow the design family, a
//! time-stepped ball simulator with exact energy bookkeeping, and the SPL
//! verdict over a simulated trace.
//!
//! The simulator proposes each ball's path kinematically (slope and
//! friction over `step_dt`) and then settles its kinetic energy by exact
//! bookkeeping along the traversed profile, so
//! `kinetic + potential + dissipated - burst input` stays at the initial
//! energy to floating-point precision at every step.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arc length of every feature segment.
pub const FEATURE_LEN: f64 = 2.0;
/// Gravity-equivalent acceleration (unit mass).
pub const GRAVITY: f64 = 1.0;
/// Friction coefficient of a freshly created storage loop.
pub const WELL_LUBRICATED_FRICTION: f64 = 0.004;
/// Balls closer than this on the same cycle collide.
const COLLISION_RADIUS: f64 = 0.05;
const V_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Hill,
    Valley,
    Loop,
}

/// One track segment: a hill or valley of the given height/depth, or a
/// low-friction storage loop of the given depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub kind: FeatureKind,
    /// Height (hill) or depth (valley/loop) in energy units.
    pub magnitude: f64,
    /// Friction coefficient inside a loop feature; ignored otherwise.
    #[serde(default)]
    pub loop_friction: f64,
}

impl Feature {
    pub fn hill(height: f64) -> Feature {
        Feature {
            kind: FeatureKind::Hill,
            magnitude: height,
            loop_friction: 0.0,
        }
    }

    pub fn valley(depth: f64) -> Feature {
        Feature {
            kind: FeatureKind::Valley,
            magnitude: depth,
            loop_friction: 0.0,
        }
    }

    pub fn storage_loop(depth: f64, friction: f64) -> Feature {
        Feature {
            kind: FeatureKind::Loop,
            magnitude: depth,
            loop_friction: friction,
        }
    }

    pub fn is_valley(&self) -> bool {
        self.kind == FeatureKind::Valley
    }

    pub fn is_loop(&self) -> bool {
        self.kind == FeatureKind::Loop
    }
}

/// Merge point: a shared boundary between two cycles. Boundary `i` of a
/// cycle is the point between feature `i-1` and feature `i` (boundary 0 is
/// the marker point). All boundaries sit at base elevation, so switching
/// cycles there is energy-neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Junction {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

/// One-way transfer channel between two cycle boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub from: (usize, usize),
    pub to: (usize, usize),
}

/// A cyclic track design: one or more feature cycles, optionally sharing
/// junctions or connected by channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackBlueprint {
    pub cycles: Vec<Vec<Feature>>,
    #[serde(default)]
    pub junctions: Vec<Junction>,
    #[serde(default)]
    pub channels: Vec<Channel>,
    pub base_friction: f64,
    pub n_balls: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum PhysicalError {
    #[error("blueprint invalid: {0}")]
    InvalidBlueprint(String),
    #[error("k must be >= 1")]
    ZeroInsertions,
    #[error("segment {index} is {found:?}, not a valley")]
    NotAValley { index: usize, found: FeatureKind },
    #[error("boundary index {index} out of range for cycle of {len} features")]
    BoundaryOutOfRange { index: usize, len: usize },
    #[error("cannot merge a blueprint with itself")]
    IdentityMerge,
}

impl TrackBlueprint {
    pub fn single_cycle(features: Vec<Feature>, base_friction: f64, n_balls: usize) -> TrackBlueprint {
        TrackBlueprint {
            cycles: vec![features],
            junctions: Vec::new(),
            channels: Vec::new(),
            base_friction,
            n_balls,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicalError> {
        if self.cycles.is_empty() {
            return Err(PhysicalError::InvalidBlueprint("no cycles".into()));
        }
        for (ci, cycle) in self.cycles.iter().enumerate() {
            if cycle.is_empty() {
                return Err(PhysicalError::InvalidBlueprint(format!(
                    "cycle {ci} has no features"
                )));
            }
            for (fi, f) in cycle.iter().enumerate() {
                if !(f.magnitude > 0.0) || !f.magnitude.is_finite() {
                    return Err(PhysicalError::InvalidBlueprint(format!(
                        "feature {fi} of cycle {ci} must have positive magnitude"
                    )));
                }
                if f.loop_friction < 0.0 {
                    return Err(PhysicalError::InvalidBlueprint(format!(
                        "feature {fi} of cycle {ci} has negative loop friction"
                    )));
                }
            }
        }
        if self.base_friction < 0.0 {
            return Err(PhysicalError::InvalidBlueprint(
                "negative base friction".into(),
            ));
        }
        for j in &self.junctions {
            self.check_boundary(j.a)?;
            self.check_boundary(j.b)?;
        }
        for c in &self.channels {
            self.check_boundary(c.from)?;
            self.check_boundary(c.to)?;
        }
        Ok(())
    }

    fn check_boundary(&self, (cycle, boundary): (usize, usize)) -> Result<(), PhysicalError> {
        let len = self
            .cycles
            .get(cycle)
            .ok_or(PhysicalError::BoundaryOutOfRange {
                index: cycle,
                len: self.cycles.len(),
            })?
            .len();
        if boundary >= len {
            return Err(PhysicalError::BoundaryOutOfRange {
                index: boundary,
                len,
            });
        }
        Ok(())
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles.len()
    }

    pub fn loop_feature_count(&self) -> usize {
        self.cycles
            .iter()
            .flat_map(|c| c.iter())
            .filter(|f| f.is_loop())
            .count()
    }

    /// Elevation of the track at arc position `x` of `cycle`.
    pub fn elevation(&self, cycle: usize, x: f64) -> f64 {
        CycleProfile::new(&self.cycles[cycle], self.base_friction).elevation(x)
    }
}

/// Insert `k` extra valleys spread evenly through the first cycle. New
/// valleys take the mean depth of the existing valleys (or 1.0 if there are
/// none); original features keep their order.
pub fn add_valleys(bp: &TrackBlueprint, k: usize) -> Result<TrackBlueprint, PhysicalError> {
    if k == 0 {
        return Err(PhysicalError::ZeroInsertions);
    }
    bp.validate()?;
    let cycle = &bp.cycles[0];
    let depths: Vec<f64> = cycle
        .iter()
        .filter(|f| f.is_valley())
        .map(|f| f.magnitude)
        .collect();
    let depth = if depths.is_empty() {
        1.0
    } else {
        depths.iter().sum::<f64>() / depths.len() as f64
    };

    let n = cycle.len();
    let mut out: Vec<Feature> = Vec::with_capacity(n + k);
    // slot i of k goes after original position floor((i+1)*n/(k+1))
    let mut inserts_after = vec![0usize; n + 1];
    for i in 0..k {
        let pos = ((i + 1) * n) / (k + 1);
        inserts_after[pos.min(n)] += 1;
    }
    for (pos, feature) in cycle.iter().enumerate() {
        for _ in 0..inserts_after[pos] {
            out.push(Feature::valley(depth));
        }
        out.push(feature.clone());
    }
    for _ in 0..inserts_after[n] {
        out.push(Feature::valley(depth));
    }

    let mut grown = bp.clone();
    grown.cycles[0] = out;
    // boundary indices shift; junctions/channels are only kept for
    // untouched cycles
    grown.junctions.retain(|j| j.a.0 != 0 && j.b.0 != 0);
    grown.channels.retain(|c| c.from.0 != 0 && c.to.0 != 0);
    Ok(grown)
}

/// Convert the valley at `index` (first cycle) into a well-lubricated
/// storage loop of the same depth.
pub fn valley_to_loop(bp: &TrackBlueprint, index: usize) -> Result<TrackBlueprint, PhysicalError> {
    bp.validate()?;
    let cycle = &bp.cycles[0];
    let feature = cycle
        .get(index)
        .ok_or(PhysicalError::BoundaryOutOfRange {
            index,
            len: cycle.len(),
        })?;
    if !feature.is_valley() {
        return Err(PhysicalError::NotAValley {
            index,
            found: feature.kind,
        });
    }
    let mut out = bp.clone();
    out.cycles[0][index] = Feature::storage_loop(feature.magnitude, WELL_LUBRICATED_FRICTION);
    Ok(out)
}

/// Merge two blueprints: both cycle sets coexist and the given boundary
/// pairs become shared junctions (first cycle of each side). Ball budgets
/// add; the first blueprint's base friction is kept.
pub fn merge_blueprints(
    a: &TrackBlueprint,
    b: &TrackBlueprint,
    junctions: &[(usize, usize)],
) -> Result<TrackBlueprint, PhysicalError> {
    if a == b {
        return Err(PhysicalError::IdentityMerge);
    }
    a.validate()?;
    b.validate()?;
    let offset = a.cycles.len();
    let mut merged = a.clone();
    merged.cycles.extend(b.cycles.iter().cloned());
    merged.junctions.extend(b.junctions.iter().map(|j| Junction {
        a: (j.a.0 + offset, j.a.1),
        b: (j.b.0 + offset, j.b.1),
    }));
    merged.channels.extend(b.channels.iter().map(|c| Channel {
        from: (c.from.0 + offset, c.from.1),
        to: (c.to.0 + offset, c.to.1),
    }));
    for &(ja, jb) in junctions {
        let junction = Junction {
            a: (0, ja),
            b: (offset, jb),
        };
        merged.junctions.push(junction);
    }
    merged.n_balls = a.n_balls + b.n_balls;
    merged.validate()?;
    Ok(merged)
}

/// Link two blueprints with a one-way transfer channel from a boundary of
/// `a`'s first cycle to a boundary of `b`'s first cycle.
pub fn link_blueprints(
    a: &TrackBlueprint,
    b: &TrackBlueprint,
    channel: (usize, usize),
) -> Result<TrackBlueprint, PhysicalError> {
    a.validate()?;
    b.validate()?;
    let offset = a.cycles.len();
    let mut linked = a.clone();
    linked.cycles.extend(b.cycles.iter().cloned());
    linked.junctions.extend(b.junctions.iter().map(|j| Junction {
        a: (j.a.0 + offset, j.a.1),
        b: (j.b.0 + offset, j.b.1),
    }));
    linked.channels.extend(b.channels.iter().map(|c| Channel {
        from: (c.from.0 + offset, c.from.1),
        to: (c.to.0 + offset, c.to.1),
    }));
    linked.channels.push(Channel {
        from: (0, channel.0),
        to: (offset, channel.1),
    });
    linked.n_balls = a.n_balls + b.n_balls;
    linked.validate()?;
    Ok(linked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSimParams {
    pub step_dt: f64,
    /// Poisson arrival rate of energy bursts (events per time unit).
    pub energy_burst_rate: f64,
    /// Kinetic energy added per burst, delivered along the travel direction
    /// (forward for a resting ball). A fixed energy quantum keeps the total
    /// input rate bounded regardless of how fast the balls already move.
    pub burst_magnitude: f64,
    /// Simulated time span.
    pub horizon: f64,
    pub seed: u64,
    /// Initial forward speed of every ball.
    #[serde(default = "default_initial_speed")]
    pub initial_speed: f64,
}

fn default_initial_speed() -> f64 {
    1.0
}

/// Per-step snapshot of the full simulation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub time: f64,
    /// (cycle, arc position) per ball.
    pub positions: Vec<(usize, f64)>,
    /// Signed speed per ball.
    pub velocities: Vec<f64>,
    /// Cumulative friction + collision losses.
    pub dissipated: f64,
    /// Cumulative burst energy input.
    pub burst_input: f64,
    /// Kinetic + potential energy of all balls.
    pub mechanical_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub time: f64,
    pub ball: usize,
    pub cycle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub time: f64,
    pub ball: usize,
    pub from_cycle: usize,
    pub to_cycle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackTrace {
    pub samples: Vec<StepSample>,
    /// Forward crossings of each cycle's marker (boundary 0).
    pub passages: Vec<Passage>,
    pub transfers: Vec<Transfer>,
    /// Loop features each ball entered, as global `(cycle, feature)` pairs.
    pub loop_visits: Vec<BTreeSet<(usize, usize)>>,
    pub initial_energy: f64,
    /// Largest per-step audit residual
    /// `|mechanical + dissipated - bursts - initial|`.
    pub max_audit_error: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl TrackTrace {
    pub fn final_sample(&self) -> &StepSample {
        self.samples.last().expect("horizon > 0 guarantees samples")
    }

    /// Marker passage times on the primary cycle.
    pub fn primary_passage_times(&self) -> Vec<f64> {
        self.passages
            .iter()
            .filter(|p| p.cycle == 0)
            .map(|p| p.time)
            .collect()
    }
}

// piecewise-linear elevation profile of one cycle
struct Piece {
    x0: f64,
    x1: f64,
    z0: f64,
    slope: f64,
    mu: f64,
    feature: usize,
    in_loop: bool,
}

struct CycleProfile {
    pieces: Vec<Piece>,
    length: f64,
}

impl CycleProfile {
    fn new(features: &[Feature], base_friction: f64) -> CycleProfile {
        let mut pieces = Vec::new();
        for (fi, f) in features.iter().enumerate() {
            let start = fi as f64 * FEATURE_LEN;
            match f.kind {
                FeatureKind::Hill | FeatureKind::Valley => {
                    let peak = if f.kind == FeatureKind::Hill {
                        f.magnitude
                    } else {
                        -f.magnitude
                    };
                    let half = FEATURE_LEN / 2.0;
                    pieces.push(Piece {
                        x0: start,
                        x1: start + half,
                        z0: 0.0,
                        slope: peak / half,
                        mu: base_friction,
                        feature: fi,
                        in_loop: false,
                    });
                    pieces.push(Piece {
                        x0: start + half,
                        x1: start + FEATURE_LEN,
                        z0: peak,
                        slope: -peak / half,
                        mu: base_friction,
                        feature: fi,
                        in_loop: false,
                    });
                }
                FeatureKind::Loop => {
                    let ramp = FEATURE_LEN / 4.0;
                    let depth = f.magnitude;
                    pieces.push(Piece {
                        x0: start,
                        x1: start + ramp,
                        z0: 0.0,
                        slope: -depth / ramp,
                        mu: f.loop_friction,
                        feature: fi,
                        in_loop: true,
                    });
                    pieces.push(Piece {
                        x0: start + ramp,
                        x1: start + FEATURE_LEN - ramp,
                        z0: -depth,
                        slope: 0.0,
                        mu: f.loop_friction,
                        feature: fi,
                        in_loop: true,
                    });
                    pieces.push(Piece {
                        x0: start + FEATURE_LEN - ramp,
                        x1: start + FEATURE_LEN,
                        z0: -depth,
                        slope: depth / ramp,
                        mu: f.loop_friction,
                        feature: fi,
                        in_loop: true,
                    });
                }
            }
        }
        CycleProfile {
            length: features.len() as f64 * FEATURE_LEN,
            pieces,
        }
    }

    fn wrap(&self, x: f64) -> f64 {
        x.rem_euclid(self.length)
    }

    /// Piece containing `x` when moving in direction `dir`.
    fn piece_index(&self, x: f64, dir: f64) -> usize {
        let x = self.wrap(x);
        for (i, p) in self.pieces.iter().enumerate() {
            if x >= p.x0 && x < p.x1 {
                // exactly on a piece edge moving backwards belongs to the
                // previous piece
                if dir < 0.0 && x == p.x0 {
                    return if i == 0 { self.pieces.len() - 1 } else { i - 1 };
                }
                return i;
            }
        }
        if dir < 0.0 {
            self.pieces.len() - 1
        } else {
            0
        }
    }

    fn elevation(&self, x: f64) -> f64 {
        let x = self.wrap(x);
        let p = &self.pieces[self.piece_index(x, 1.0)];
        p.z0 + p.slope * (x - p.x0)
    }

    fn slope_right(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x, 1.0)].slope
    }

    fn slope_left(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x, -1.0)].slope
    }

    fn mu_at(&self, x: f64, dir: f64) -> f64 {
        self.pieces[self.piece_index(x, dir)].mu
    }

    fn in_loop(&self, x: f64) -> bool {
        self.pieces[self.piece_index(x, 1.0)].in_loop
    }
}

struct MoveOutcome {
    new_x: f64,
    new_ke: f64,
    friction_loss: f64,
    stopped: bool,
    /// Feature boundaries crossed, in crossing order, with the travel
    /// direction (+1 forward, -1 backward).
    boundaries: Vec<(usize, f64)>,
}

/// Advance a ball along the profile by up to `dist`, spending and gaining
/// kinetic energy exactly from the slope and friction of each traversed
/// piece. Stops early when the kinetic energy hits zero.
fn advance(profile: &CycleProfile, x: f64, dir: f64, dist: f64, ke: f64) -> MoveOutcome {
    let mut x = profile.wrap(x);
    let mut remaining = dist;
    let mut ke = ke;
    let mut loss = 0.0;
    let mut stopped = false;
    let mut boundaries = Vec::new();
    let n_features = (profile.length / FEATURE_LEN).round() as usize;
    let boundary_index = |pos: f64| -> Option<usize> {
        let fb = pos / FEATURE_LEN;
        if (fb - fb.round()).abs() < 1e-9 {
            Some((fb.round() as usize) % n_features)
        } else {
            None
        }
    };

    while remaining > 1e-15 {
        let pi = profile.piece_index(x, dir);
        let p = &profile.pieces[pi];
        let edge = if dir > 0.0 { p.x1 - x } else { x - p.x0 };
        // energy rate per unit distance in the travel direction
        let rate = -(p.slope * dir * GRAVITY) - p.mu * GRAVITY;
        let afford = if rate < 0.0 { ke / (-rate) } else { f64::INFINITY };
        let step = remaining.min(edge).min(afford);

        ke += rate * step;
        loss += p.mu * GRAVITY * step;
        x += dir * step;
        remaining -= step;

        if ke <= 1e-15 && step >= afford - 1e-15 && afford <= edge && afford <= dist {
            ke = ke.max(0.0);
            stopped = true;
            break;
        }
        // crossed onto the next piece
        if step >= edge - 1e-15 && remaining > 0.0 {
            if dir > 0.0 {
                let boundary_pos = p.x1;
                if let Some(idx) = boundary_index(boundary_pos) {
                    boundaries.push((idx, 1.0));
                }
                x = if boundary_pos >= profile.length {
                    0.0
                } else {
                    boundary_pos
                };
            } else {
                if let Some(idx) = boundary_index(p.x0) {
                    boundaries.push((idx, -1.0));
                }
                x = if p.x0 <= 0.0 { profile.length } else { p.x0 };
            }
        }
    }
    // landing exactly on a feature boundary also counts as a crossing
    if !stopped {
        if let Some(idx) = boundary_index(profile.wrap(x)) {
            if boundaries.last().map(|&(b, _)| b) != Some(idx) {
                boundaries.push((idx, dir));
            }
        }
    }

    MoveOutcome {
        new_x: profile.wrap(x),
        new_ke: ke.max(0.0),
        friction_loss: loss,
        stopped,
        boundaries,
    }
}

struct Ball {
    cycle: usize,
    x: f64,
    dir: f64,
    ke: f64,
}

impl Ball {
    fn speed(&self) -> f64 {
        (2.0 * self.ke).sqrt()
    }

    fn velocity(&self) -> f64 {
        self.dir * self.speed()
    }
}

/// Simulate the blueprint under Poisson-timed energy bursts. Deterministic
/// for a fixed seed.
pub fn simulate_track(
    bp: &TrackBlueprint,
    sim: &TrackSimParams,
) -> Result<TrackTrace, PhysicalError> {
    bp.validate()?;
    if !(sim.horizon > 0.0) || !(sim.step_dt > 0.0) {
        return Err(PhysicalError::InvalidBlueprint(
            "horizon and step_dt must be positive".into(),
        ));
    }
    let profiles: Vec<CycleProfile> = bp
        .cycles
        .iter()
        .map(|c| CycleProfile::new(c, bp.base_friction))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);

    // balls spread evenly over cycles and arc length
    let n_cycles = bp.cycles.len();
    let mut balls: Vec<Ball> = (0..bp.n_balls)
        .map(|i| {
            let cycle = i % n_cycles;
            let on_cycle = (bp.n_balls + n_cycles - 1 - cycle) / n_cycles;
            let rank = i / n_cycles;
            let x = profiles[cycle].length * rank as f64 / on_cycle.max(1) as f64;
            Ball {
                cycle,
                x,
                dir: 1.0,
                ke: 0.5 * sim.initial_speed * sim.initial_speed,
            }
        })
        .collect();

    let initial_energy: f64 = balls
        .iter()
        .map(|b| b.ke + profiles[b.cycle].elevation(b.x) * GRAVITY)
        .sum();

    let n_steps = (sim.horizon / sim.step_dt).ceil() as usize;
    let mut dissipated = 0.0;
    let mut burst_input = 0.0;
    let mut next_burst = if sim.energy_burst_rate > 0.0 {
        exp_variate(&mut rng, sim.energy_burst_rate)
    } else {
        f64::INFINITY
    };

    let mut samples = Vec::with_capacity(n_steps);
    let mut passages = Vec::new();
    let mut transfers = Vec::new();
    let mut loop_visits: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); bp.n_balls];

    for step in 0..n_steps {
        let t = step as f64 * sim.step_dt;

        // bursts due before this step
        while next_burst <= t {
            if !balls.is_empty() {
                let idx = rng.gen_range(0..balls.len());
                let ball = &mut balls[idx];
                if ball.ke <= V_EPS {
                    ball.dir = 1.0;
                }
                ball.ke += sim.burst_magnitude;
                burst_input += sim.burst_magnitude;
            }
            next_burst += exp_variate(&mut rng, sim.energy_burst_rate);
        }

        // move every ball
        for (bi, ball) in balls.iter_mut().enumerate() {
            let profile = &profiles[ball.cycle];
            let (dir, dist) = if ball.ke > V_EPS {
                let v = ball.velocity();
                let slope = if ball.dir > 0.0 {
                    profile.slope_right(ball.x)
                } else {
                    profile.slope_left(ball.x)
                };
                let mu = profile.mu_at(ball.x, ball.dir);
                let accel = -slope * GRAVITY - mu * GRAVITY * ball.dir.signum();
                let v_prop = v + accel * sim.step_dt;
                let dir = if v_prop >= 0.0 { 1.0 } else { -1.0 };
                // direction flip with zero distance credit: treat as a stop,
                // the energy walk will restart it next step
                if dir != ball.dir && v.abs() > V_EPS {
                    (ball.dir, (v_prop.abs().min(v.abs())) * sim.step_dt)
                } else {
                    (dir, v_prop.abs() * sim.step_dt)
                }
            } else {
                // at rest: slide only if a side is steeper than friction
                let right = profile.slope_right(ball.x);
                let left = profile.slope_left(ball.x);
                let mu = profile.mu_at(ball.x, 1.0);
                if -right > mu {
                    let a = (-right - mu) * GRAVITY;
                    (1.0, a * sim.step_dt * sim.step_dt)
                } else if left > mu {
                    let a = (left - profile.mu_at(ball.x, -1.0)) * GRAVITY;
                    (-1.0, a * sim.step_dt * sim.step_dt)
                } else {
                    (1.0, 0.0)
                }
            };

            if dist <= 0.0 {
                continue;
            }
            let outcome = advance(profile, ball.x, dir, dist, ball.ke);
            dissipated += outcome.friction_loss;
            ball.x = outcome.new_x;
            ball.ke = outcome.new_ke;
            ball.dir = dir;
            if outcome.stopped {
                ball.ke = 0.0;
            }
            if profile.in_loop(ball.x) {
                let feature = profile.pieces[profile.piece_index(ball.x, 1.0)].feature;
                loop_visits[bi].insert((ball.cycle, feature));
            }

            // markers count both directions; transfers keep the forward flow
            for (boundary, cross_dir) in outcome.boundaries {
                if boundary == 0 {
                    passages.push(Passage {
                        time: t,
                        ball: bi,
                        cycle: ball.cycle,
                    });
                }
                if cross_dir < 0.0 {
                    continue;
                }
                let here = (ball.cycle, boundary);
                // relocation conserves mechanical energy: the kinetic energy
                // already paid for any overshoot past the boundary, so the
                // elevation difference is credited back (and a ball too slow
                // to be lifted to the target stays where it is)
                let relocate = |ball: &mut Ball, target: (usize, usize)| -> bool {
                    let z_now = profiles[ball.cycle].elevation(ball.x);
                    let target_x = profiles[target.0].wrap(target.1 as f64 * FEATURE_LEN);
                    let z_target = profiles[target.0].elevation(target_x);
                    let ke_new = ball.ke + (z_now - z_target) * GRAVITY;
                    if ke_new < 0.0 {
                        return false;
                    }
                    ball.cycle = target.0;
                    ball.x = target_x;
                    ball.ke = ke_new;
                    true
                };
                // junction: coin-flip switch to the shared cycle
                for j in &bp.junctions {
                    let other = if j.a == here {
                        Some(j.b)
                    } else if j.b == here {
                        Some(j.a)
                    } else {
                        None
                    };
                    if let Some(target) = other {
                        if rng.gen_bool(0.5) {
                            let from_cycle = ball.cycle;
                            if relocate(ball, target) {
                                transfers.push(Transfer {
                                    time: t,
                                    ball: bi,
                                    from_cycle,
                                    to_cycle: target.0,
                                });
                            }
                            break;
                        }
                    }
                }
                // channel: coin-flip one-way diversion
                for c in &bp.channels {
                    if c.from == (ball.cycle, boundary) && rng.gen_bool(0.5) {
                        let from_cycle = ball.cycle;
                        if relocate(ball, c.to) {
                            transfers.push(Transfer {
                                time: t,
                                ball: bi,
                                from_cycle,
                                to_cycle: c.to.0,
                            });
                        }
                        break;
                    }
                }
            }
        }

        // inelastic collisions outside storage loops, per cycle
        for cycle in 0..n_cycles {
            let mut members: Vec<usize> = (0..balls.len())
                .filter(|&i| balls[i].cycle == cycle && !profiles[cycle].in_loop(balls[i].x))
                .collect();
            members.sort_by(|&i, &j| balls[i].x.partial_cmp(&balls[j].x).unwrap());
            let m = members.len();
            if m < 2 {
                continue;
            }
            let length = profiles[cycle].length;
            for k in 0..m {
                let i = members[k];
                let j = members[(k + 1) % m];
                if i == j {
                    continue;
                }
                let gap = if k + 1 == m {
                    balls[j].x + length - balls[i].x
                } else {
                    balls[j].x - balls[i].x
                };
                if gap < COLLISION_RADIUS {
                    let vi = balls[i].velocity();
                    let vj = balls[j].velocity();
                    if (vi - vj).abs() > V_EPS {
                        let v_common = 0.5 * (vi + vj);
                        let ke_new = 0.5 * v_common * v_common;
                        dissipated += balls[i].ke + balls[j].ke - 2.0 * ke_new;
                        for &b in [&i, &j] {
                            balls[b].ke = ke_new;
                            balls[b].dir = if v_common >= 0.0 { 1.0 } else { -1.0 };
                        }
                    }
                }
            }
        }

        let mechanical_energy: f64 = balls
            .iter()
            .map(|b| b.ke + profiles[b.cycle].elevation(b.x) * GRAVITY)
            .sum();
        samples.push(StepSample {
            time: t + sim.step_dt,
            positions: balls.iter().map(|b| (b.cycle, b.x)).collect(),
            velocities: balls.iter().map(Ball::velocity).collect(),
            dissipated,
            burst_input,
            mechanical_energy,
        });
    }

    let max_audit_error = samples
        .iter()
        .map(|s| (s.mechanical_energy + s.dissipated - s.burst_input - initial_energy).abs())
        .fold(0.0, f64::max);

    Ok(TrackTrace {
        samples,
        passages,
        transfers,
        loop_visits,
        initial_energy,
        max_audit_error,
        horizon: sim.horizon,
        seed: sim.seed,
    })
}

fn exp_variate(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    -u.ln() / rate
}

/// Definition-style SPL verdict over a simulated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplVerdict {
    pub is_spl: bool,
    /// Dominant recurrence period from the autocorrelation of marker
    /// passages, if any recurs.
    pub period_estimate: Option<f64>,
    /// End of the sustained-circulation prefix (see [`sustain_time`]).
    pub sustain_time: f64,
    pub ratio: f64,
    /// (a) recurring circulation.
    pub condition_a: bool,
    /// (b) at least two interacting loops exchanging balls or energy.
    pub condition_b: bool,
    /// (c) bounded response.
    pub condition_c: bool,
    /// Set when the design has fewer than two loop structures, in which
    /// case (b) is reported but not required.
    pub b_waived: bool,
}

/// Minimum sustained-to-period ratio for an SPL verdict.
pub const SPL_SUSTAIN_RATIO: f64 = 10.0;
const MIN_PASSAGES: usize = 3;
const AUTOCORR_BIN: f64 = 0.5;
/// A marker silence longer than this ends the sustained-circulation prefix.
pub const SUSTAIN_DEAD_GAP: f64 = 30.0;

/// Period estimate: the lag maximizing the autocorrelation of the binned
/// passage-event series.
pub fn passage_period(times: &[f64]) -> Option<f64> {
    if times.len() < MIN_PASSAGES {
        return None;
    }
    let t_max = times.last().copied().unwrap_or(0.0);
    let n_bins = ((t_max / AUTOCORR_BIN).ceil() as usize + 1).max(4);
    let mut series = vec![0.0f64; n_bins];
    for &t in times {
        let bin = ((t / AUTOCORR_BIN) as usize).min(n_bins - 1);
        series[bin] += 1.0;
    }
    let max_lag = (n_bins / 2).max(2);
    let mut best_lag = 0;
    let mut best_score = 0.0;
    for lag in 1..max_lag {
        let score: f64 = (0..n_bins - lag).map(|i| series[i] * series[i + lag]).sum();
        if score > best_score {
            best_score = score;
            best_lag = lag;
        }
    }
    if best_lag == 0 {
        // no repeated co-occurrence at any lag; fall back to the median gap
        let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.retain(|g| *g > 0.0);
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return gaps.get(gaps.len() / 2).copied();
    }
    Some(best_lag as f64 * AUTOCORR_BIN)
}

/// Sustained circulation: the last passage in the prefix chain whose
/// inter-passage gaps stay within [`SUSTAIN_DEAD_GAP`]. Sparse lucky
/// revivals after a long silence do not extend it.
pub fn sustain_time(times: &[f64]) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    let mut last = times[0];
    for &t in &times[1..] {
        if t - last > SUSTAIN_DEAD_GAP {
            break;
        }
        last = t;
    }
    last
}

/// Evaluate the SPL definition on a trace: (a) recurring circulation with a
/// period estimate, (b) parallel interacting loops (waived for single-loop
/// designs), (c) bounded response, plus the sustain/period longevity rider.
pub fn spl_test(trace: &TrackTrace, bp: &TrackBlueprint) -> SplVerdict {
    let times = trace.primary_passage_times();
    let period = passage_period(&times);
    let sustain = sustain_time(&times);
    let condition_a = times.len() >= MIN_PASSAGES && period.is_some();

    let parallel_structures = bp.cycle_count() - 1 + bp.loop_feature_count() + 1;
    let b_waived = parallel_structures < 2;
    let interacting = !trace.transfers.is_empty()
        || trace.loop_visits.iter().any(|v| v.len() >= 2)
        || (bp.loop_feature_count() >= 1
            && trace.loop_visits.iter().filter(|v| !v.is_empty()).count() >= 2);
    let condition_b = parallel_structures >= 2 && interacting;

    let energy_bound = trace.initial_energy
        + trace.final_sample().burst_input
        + 1e-6;
    let condition_c = trace.samples.iter().all(|s| {
        s.mechanical_energy.is_finite() && s.mechanical_energy <= energy_bound
    });

    let ratio = match period {
        Some(p) if p > 0.0 => sustain / p,
        _ => 0.0,
    };
    let is_spl =
        condition_a && condition_c && ratio >= SPL_SUSTAIN_RATIO && (condition_b || b_waived);

    SplVerdict {
        is_spl,
        period_estimate: period,
        sustain_time: sustain,
        ratio,
        condition_a,
        condition_b,
        condition_c,
        b_waived,
    }
}
