//! Deterministic synthetic planar-manipulation world.
//!
//! Objects are convex polygons or ellipses with color-linked physical
//! attributes (stiffness follows the red channel, mass the green channel, so
//! the attributes that drive labels are visible in the rendered image). All
//! labels come from closed-form oracles:
//!
//! * grasp: success iff the grasp point is on the object and the chord
//!   through it along the gripper-closing direction fits the gripper opening;
//! * push: the object translates along the push vector scaled by gain/mass
//!   and rotates with the moment of the contact point about the centroid;
//! * poke: response slope is proportional to stiffness, intercept to the
//!   covered area fraction.
//!
//! Every sample derives its own generator stream from (seed, task, pool,
//! index), so datasets are reproducible and train/novel pools are disjoint
//! by construction.

pub mod geometry;
pub mod render;

use crate::data::{Dataset, GraspSample, PokeSample, PushSample, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::rng::Rng;
use geometry::{LocalShape, Placed, Pose};
pub use render::{render, render_empty, render_view};

pub const CANVAS: f64 = IMAGE_SIDE as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    /// Canvas margin every object keeps to each border, pixels.
    pub margin: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Smallest allowed ratio of minor to major axis.
    pub min_aspect: f64,
    /// Gripper opening, pixels; the default is one global constant so grasp
    /// labels are a function of visible geometry alone.
    pub gripper_width: f64,
    pub stiffness_range: (f64, f64),
    pub mass_range: (f64, f64),
    /// Translation per unit push vector at mass 1.
    pub push_gain: f64,
    /// Rotation per unit moment (px^2) at mass 1.
    pub rotation_gain: f64,
    /// Gain multiplier when pushing at the high z setting.
    pub high_push_gain: f64,
    /// Poke slope per unit stiffness.
    pub poke_slope_coeff: f64,
    /// Poke intercept per unit covered-area fraction.
    pub poke_intercept_coeff: f64,
    /// Standard deviation of optional poke label noise (0 = exact oracle).
    pub poke_noise_sigma: f64,
    /// Rejection-sample grasp labels to roughly 50/50 instead of the natural
    /// positive rate.
    pub balanced_grasp: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            margin: 4.0,
            min_radius: 6.0,
            max_radius: 13.0,
            min_aspect: 0.35,
            gripper_width: 14.0,
            stiffness_range: (0.2, 1.0),
            mass_range: (0.5, 2.0),
            push_gain: 0.4,
            rotation_gain: 0.003,
            high_push_gain: 0.6,
            poke_slope_coeff: 1.0,
            poke_intercept_coeff: 4.0,
            poke_noise_sigma: 0.0,
            balanced_grasp: true,
        }
    }
}

/// Pool tag partitioning object seeds: training and evaluation pools never
/// share an object stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Train,
    Novel,
}

impl Pool {
    pub fn tag(self) -> u64 {
        match self {
            Pool::Train => 0,
            Pool::Novel => 1,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Pool::Train),
            "novel" => Ok(Pool::Novel),
            _ => Err(Error::parse(format!("pool must be 'train' or 'novel', got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldObject {
    pub shape: LocalShape,
    pub color: [f64; 3],
    pub pose: Pose,
    /// Max gripper opening applicable to this object, pixels.
    pub graspable_width: f64,
    pub stiffness: f64,
    pub mass: f64,
}

impl WorldObject {
    pub fn placed(&self) -> Placed<'_> {
        Placed { shape: &self.shape, pose: &self.pose }
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.pose.center()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.placed().contains(p)
    }

    pub fn fits_canvas(&self, margin: f64) -> bool {
        let he = self.shape.rotated_half_extents(self.pose.theta);
        self.pose.x - he[0] >= margin
            && self.pose.x + he[0] <= CANVAS - margin
            && self.pose.y - he[1] >= margin
            && self.pose.y + he[1] <= CANVAS - margin
    }

    pub fn validate(&self, cfg: &WorldConfig) -> Result<()> {
        if !self.shape.is_convex_ccw() {
            return Err(Error::geometry("world_object", "shape not convex CCW"));
        }
        if !self.fits_canvas(cfg.margin) {
            return Err(Error::geometry(
                "world_object",
                format!("object at ({}, {}) leaves the canvas margin", self.pose.x, self.pose.y),
            ));
        }
        let (s_lo, s_hi) = cfg.stiffness_range;
        let (m_lo, m_hi) = cfg.mass_range;
        if !(s_lo..=s_hi).contains(&self.stiffness) {
            return Err(Error::contract("world_object", "stiffness out of range"));
        }
        if !(m_lo..=m_hi).contains(&self.mass) {
            return Err(Error::contract("world_object", "mass out of range"));
        }
        Ok(())
    }
}

fn lerp(range: (f64, f64), t: f64) -> f64 {
    range.0 + (range.1 - range.0) * t
}

/// Deterministically generate one object from a seed.
pub fn gen_object(cfg: &WorldConfig, seed: u64) -> WorldObject {
    let mut rng = Rng::from_parts(&[seed, 0x6f626a]); // "obj"
    gen_object_from(cfg, &mut rng)
}

/// Generate one object from an existing stream.
pub fn gen_object_from(cfg: &WorldConfig, rng: &mut Rng) -> WorldObject {
    let major = rng.range(cfg.min_radius, cfg.max_radius);
    let minor = major * rng.range(cfg.min_aspect, 1.0);

    let shape = if rng.chance(0.3) {
        LocalShape::Ellipse { a: major, b: minor }
    } else {
        // Vertices on the ellipse profile at jittered angles: points on a
        // convex curve in angular order always form a convex polygon.
        let n = 3 + rng.below(6); // 3..=8
        let step = std::f64::consts::TAU / n as f64;
        let phase = rng.range(0.0, std::f64::consts::TAU);
        let mut verts = Vec::with_capacity(n);
        for i in 0..n {
            let ang = phase + i as f64 * step + rng.range(-0.35, 0.35) * step;
            let (s, c) = ang.sin_cos();
            verts.push([major * c, minor * s]);
        }
        let mut poly = LocalShape::Polygon(verts);
        // Recenter so the local origin is the centroid.
        let cen = poly.centroid();
        if let LocalShape::Polygon(v) = &mut poly {
            for p in v.iter_mut() {
                p[0] -= cen[0];
                p[1] -= cen[1];
            }
        }
        poly
    };

    let color = [rng.range(0.25, 1.0), rng.range(0.25, 1.0), rng.range(0.25, 1.0)];
    let stiffness = lerp(cfg.stiffness_range, (color[0] - 0.25) / 0.75);
    let mass = lerp(cfg.mass_range, (color[1] - 0.25) / 0.75);

    let theta = rng.range(0.0, std::f64::consts::TAU);
    let he = shape.rotated_half_extents(theta);
    let x = rng.range(cfg.margin + he[0], CANVAS - cfg.margin - he[0]);
    let y = rng.range(cfg.margin + he[1], CANVAS - cfg.margin - he[1]);

    WorldObject {
        shape,
        color,
        pose: Pose { x, y, theta },
        graspable_width: cfg.gripper_width,
        stiffness,
        mass,
    }
}

/// Gripper-closing direction for a discrete grasp angle bin.
fn closing_direction(theta_d: u8) -> [f64; 2] {
    let ang = (theta_d as f64 * 10.0 + 90.0).to_radians();
    [ang.cos(), ang.sin()]
}

/// Grasp oracle: the point must lie on the object and the cross-section
/// along the closing direction must fit the gripper opening.
pub fn label_grasp(object: &WorldObject, point: [f64; 2], theta_d: u8) -> bool {
    match object.placed().chord_through(point, closing_direction(theta_d)) {
        Some(width) => width <= object.graspable_width,
        None => false,
    }
}

/// A linear planar push in world pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushAction {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub z_high: bool,
}

impl PushAction {
    /// The paper-form 5-tuple in normalized units: pixel coordinates map to
    /// [-1,1] and z to -0.5 (low) or +0.5 (high).
    pub fn normalized(&self) -> [f64; 5] {
        let nx = |v: f64| v / (CANVAS / 2.0) - 1.0;
        [
            nx(self.start[0]),
            nx(self.start[1]),
            nx(self.end[0]),
            nx(self.end[1]),
            if self.z_high { 0.5 } else { -0.5 },
        ]
    }

    pub fn gain(&self, cfg: &WorldConfig) -> f64 {
        if self.z_high {
            cfg.high_push_gain
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushOutcome {
    pub pose: Pose,
    /// Boundary point where the pusher first meets the object; None for a
    /// push that misses (a no-op).
    pub contact: Option<[f64; 2]>,
    /// Whether the object still honors the canvas margin afterwards.
    pub fits: bool,
}

/// Push oracle: quasi-static displacement model.
///
/// translation = gain(z) * push_gain * v / mass, rotation proportional to
/// the moment of the contact point about the centroid. A push through the
/// centroid has zero moment and produces a pure translation.
pub fn simulate_push(cfg: &WorldConfig, object: &WorldObject, action: &PushAction) -> PushOutcome {
    let entry = object.placed().segment_entry(action.start, action.end);
    let Some((_, contact)) = entry else {
        return PushOutcome { pose: object.pose, contact: None, fits: object.fits_canvas(cfg.margin) };
    };
    let v = [action.end[0] - action.start[0], action.end[1] - action.start[1]];
    let gain = action.gain(cfg);
    let scale = gain * cfg.push_gain / object.mass;
    let c = object.centroid();
    let arm = [contact[0] - c[0], contact[1] - c[1]];
    let moment = arm[0] * v[1] - arm[1] * v[0];
    let pose = Pose {
        x: object.pose.x + scale * v[0],
        y: object.pose.y + scale * v[1],
        theta: object.pose.theta + gain * cfg.rotation_gain * moment / object.mass,
    };
    let moved = WorldObject { pose, ..object.clone() };
    PushOutcome { pose, contact: Some(contact), fits: moved.fits_canvas(cfg.margin) }
}

/// Poke oracle: slope tracks stiffness, intercept tracks covered area.
/// With sigma = 0 the response is an exact function of the object.
pub fn simulate_poke(cfg: &WorldConfig, object: &WorldObject, rng: &mut Rng) -> [f64; 2] {
    let area_fraction = object.shape.area() / (CANVAS * CANVAS);
    let mut slope = cfg.poke_slope_coeff * object.stiffness;
    let mut intercept = cfg.poke_intercept_coeff * area_fraction;
    if cfg.poke_noise_sigma > 0.0 {
        slope += cfg.poke_noise_sigma * rng.normal();
        intercept += cfg.poke_noise_sigma * rng.normal();
    }
    [slope, intercept]
}

const TASK_STREAM_GRASP: u64 = 0x67726173; // "gras"
const TASK_STREAM_PUSH: u64 = 0x70757368; // "push"
const TASK_STREAM_POKE: u64 = 0x706f6b65; // "poke"

fn sample_rng(seed: u64, task: u64, pool: Pool, index: u64) -> Rng {
    Rng::from_parts(&[seed, task, pool.tag(), index])
}

/// Uniform point inside the shape by rejection from its bounding box.
fn point_inside(object: &WorldObject, rng: &mut Rng) -> [f64; 2] {
    let he = object.shape.rotated_half_extents(object.pose.theta);
    loop {
        let p = [
            rng.range(object.pose.x - he[0], object.pose.x + he[0]),
            rng.range(object.pose.y - he[1], object.pose.y + he[1]),
        ];
        if object.contains(p) {
            return p;
        }
    }
}

/// One grasp record: a (point, angle) attempt on a fresh object, the patch
/// centered on the attempt point, and the oracle label.
fn gen_grasp_sample(cfg: &WorldConfig, seed: u64, pool: Pool, index: u64) -> GraspSample {
    let mut rng = sample_rng(seed, TASK_STREAM_GRASP, pool, index);
    let want_positive = cfg.balanced_grasp && index % 2 == 0;
    let want_negative = cfg.balanced_grasp && !want_positive;

    for _attempt in 0..40 {
        let object = gen_object_from(cfg, &mut rng);
        if !cfg.balanced_grasp {
            // Natural sampling: a point near the object, any angle.
            let he = object.shape.rotated_half_extents(object.pose.theta);
            let p = [
                rng.range(object.pose.x - 1.5 * he[0], object.pose.x + 1.5 * he[0]),
                rng.range(object.pose.y - 1.5 * he[1], object.pose.y + 1.5 * he[1]),
            ];
            let theta = rng.below(18) as u8;
            let y = label_grasp(&object, p, theta);
            return make_grasp_sample(&object, p, theta, y);
        }

        if want_positive {
            for _ in 0..60 {
                let p = point_inside(&object, &mut rng);
                let theta = rng.below(18) as u8;
                if label_grasp(&object, p, theta) {
                    return make_grasp_sample(&object, p, theta, true);
                }
            }
        } else if want_negative {
            // Half of negatives miss the object entirely, half attempt a bad
            // angle or an ungraspable cross-section on the object.
            let background = rng.chance(0.5);
            if background {
                for _ in 0..60 {
                    let p = [rng.range(0.0, CANVAS), rng.range(0.0, CANVAS)];
                    if !object.contains(p) {
                        let theta = rng.below(18) as u8;
                        return make_grasp_sample(&object, p, theta, false);
                    }
                }
            }
            for _ in 0..60 {
                let p = point_inside(&object, &mut rng);
                let theta = rng.below(18) as u8;
                if !label_grasp(&object, p, theta) {
                    return make_grasp_sample(&object, p, theta, false);
                }
            }
        }
        // This object cannot produce the wanted label; try another.
    }

    // Give up on balancing for this index: take whatever comes.
    let mut rng = sample_rng(seed, TASK_STREAM_GRASP, pool, index ^ 0x8000_0000_0000_0000);
    let object = gen_object_from(cfg, &mut rng);
    let p = point_inside(&object, &mut rng);
    let theta = rng.below(18) as u8;
    let y = label_grasp(&object, p, theta);
    make_grasp_sample(&object, p, theta, y)
}

fn make_grasp_sample(object: &WorldObject, point: [f64; 2], theta: u8, y: bool) -> GraspSample {
    GraspSample { patch: render_view(object, point), theta, label: y as u8 }
}

/// Push record plus the oracle quantities behind it, for probe tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushTruth {
    pub pose_delta: [f64; 2],
    pub rotation: f64,
    pub mass: f64,
    pub gain: f64,
}

fn gen_push_sample(cfg: &WorldConfig, seed: u64, pool: Pool, index: u64) -> (PushSample, PushTruth) {
    let mut rng = sample_rng(seed, TASK_STREAM_PUSH, pool, index);
    loop {
        let object = gen_object_from(cfg, &mut rng);
        let he = object.shape.rotated_half_extents(object.pose.theta);
        let reach = he[0].max(he[1]);
        for _ in 0..100 {
            let c = object.centroid();
            let jitter = 0.4 * reach;
            let target = [
                c[0] + rng.range(-jitter, jitter),
                c[1] + rng.range(-jitter, jitter),
            ];
            let ang = rng.range(0.0, std::f64::consts::TAU);
            let dir = [ang.cos(), ang.sin()];
            let back = rng.range(reach + 2.0, reach + 10.0);
            let forward = rng.range(4.0, 12.0);
            let action = PushAction {
                start: [target[0] - back * dir[0], target[1] - back * dir[1]],
                end: [target[0] + forward * dir[0], target[1] + forward * dir[1]],
                z_high: rng.chance(0.5),
            };
            let in_canvas = |p: [f64; 2]| {
                p[0] >= 0.0 && p[0] <= CANVAS && p[1] >= 0.0 && p[1] <= CANVAS
            };
            if !in_canvas(action.start) || !in_canvas(action.end) {
                continue;
            }
            // The pusher must start clear of the object.
            if object.contains(action.start) {
                continue;
            }
            let outcome = simulate_push(cfg, &object, &action);
            let (Some(_), true) = (outcome.contact, outcome.fits) else { continue };

            let begin = render(&object);
            let moved = WorldObject { pose: outcome.pose, ..object.clone() };
            let end = render(&moved);
            let truth = PushTruth {
                pose_delta: [outcome.pose.x - object.pose.x, outcome.pose.y - object.pose.y],
                rotation: outcome.pose.theta - object.pose.theta,
                mass: object.mass,
                gain: action.gain(cfg),
            };
            return (
                PushSample { begin, end, action: action.normalized() },
                truth,
            );
        }
        // Object too awkward to push inside the canvas; draw a new one.
    }
}

fn gen_poke_sample(cfg: &WorldConfig, seed: u64, pool: Pool, index: u64) -> PokeSample {
    let mut rng = sample_rng(seed, TASK_STREAM_POKE, pool, index);
    let object = gen_object_from(cfg, &mut rng);
    let response = simulate_poke(cfg, &object, &mut rng);
    PokeSample { image: render(&object), response }
}

/// Requested record counts per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskMix {
    pub grasp: usize,
    pub push: usize,
    pub poke: usize,
}

impl TaskMix {
    pub fn total(&self) -> usize {
        self.grasp + self.push + self.poke
    }
}

/// Generate in-memory datasets for every task with a nonzero count.
pub fn generate(cfg: &WorldConfig, mix: TaskMix, seed: u64, pool: Pool) -> Result<Vec<Dataset>> {
    if mix.total() == 0 {
        return Err(Error::contract("build_dataset", "task mix requests zero records"));
    }
    let mut out = Vec::new();
    if mix.grasp > 0 {
        let samples: Vec<GraspSample> =
            (0..mix.grasp as u64).map(|i| gen_grasp_sample(cfg, seed, pool, i)).collect();
        out.push(Dataset::Grasp(samples));
    }
    if mix.push > 0 {
        let samples: Vec<PushSample> =
            (0..mix.push as u64).map(|i| gen_push_sample(cfg, seed, pool, i).0).collect();
        out.push(Dataset::Push(samples));
    }
    if mix.poke > 0 {
        let samples: Vec<PokeSample> =
            (0..mix.poke as u64).map(|i| gen_poke_sample(cfg, seed, pool, i)).collect();
        out.push(Dataset::Poke(samples));
    }
    Ok(out)
}

/// Push data along with the oracle truth for each record.
pub fn generate_push_with_truth(
    cfg: &WorldConfig,
    n: usize,
    seed: u64,
    pool: Pool,
) -> Vec<(PushSample, PushTruth)> {
    (0..n as u64).map(|i| gen_push_sample(cfg, seed, pool, i)).collect()
}
