//! Anti-aliased parametric shapes on a black background.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::classifier::LabeledDataset;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;
use crate::seeds::{task_rng, Domain};

/// Shape families in class order.
pub const SHAPE_FAMILIES: [&str; 6] = ["ellipse", "rectangle", "triangle", "cross", "ring", "chevron"];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    pub test_per_class: usize,
    pub size: usize,
    pub seed: u64,
    /// Largest rotation away from each family's canonical pose, in degrees.
    pub max_rotation_deg: f64,
    /// Largest offset of the shape center, in normalized coordinates.
    pub max_offset: f64,
    /// Range of the shape radius, in normalized coordinates.
    pub scale_range: (f64, f64),
    /// Standard deviation of additive pixel noise.
    pub noise: f64,
    /// Stroke width in pixels for outlined shapes; 0 fills them.
    pub stroke: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 3,
            samples_per_class: 20,
            test_per_class: 100,
            size: 32,
            seed: 42,
            max_rotation_deg: 10.0,
            max_offset: 0.05,
            scale_range: (0.4, 0.65),
            noise: 0.02,
            stroke: 2.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 {
            return Err(Error::Config(format!("synthetic images must be at least 16 pixels, got {}", self.size)));
        }
        if !(2..=SHAPE_FAMILIES.len()).contains(&self.classes) {
            return Err(Error::Config(format!("synthetic classes must be in 2..={}", SHAPE_FAMILIES.len())));
        }
        if self.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be positive".into()));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!("bad scale range {lo}..{hi}")));
        }
        if !(self.max_offset >= 0.0 && self.max_rotation_deg >= 0.0 && self.noise >= 0.0 && self.stroke >= 0.0) {
            return Err(Error::Config("offset, rotation, noise and stroke must be non-negative".into()));
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        SHAPE_FAMILIES[..self.classes].iter().map(|s| s.to_string()).collect()
    }
}

/// Pose of one rendered shape.
#[derive(Clone, Copy, Debug)]
struct Pose {
    cx: f64,
    cy: f64,
    radius: f64,
    angle: f64,
    aspect: f64,
    intensity: f64,
}

fn polygon_sdf(x: f64, y: f64, verts: &[(f64, f64)]) -> f64 {
    // Counter-clockwise convex polygon; max of edge half-plane distances.
    let n = verts.len();
    (0..n)
        .map(|i| {
            let (ax, ay) = verts[i];
            let (bx, by) = verts[(i + 1) % n];
            let (ex, ey) = (bx - ax, by - ay);
            let len = (ex * ex + ey * ey).sqrt();
            ((x - ax) * ey - (y - ay) * ex) / len
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn box_sdf(x: f64, y: f64, hx: f64, hy: f64) -> f64 {
    (x.abs() - hx).max(y.abs() - hy)
}

/// Signed distance (negative inside) in the shape's unit frame.
fn family_sdf(family: usize, x: f64, y: f64, aspect: f64) -> f64 {
    match family {
        0 => {
            let (a, b) = (1.0, aspect);
            ((x / a).hypot(y / b) - 1.0) * b
        }
        1 => box_sdf(x, y, 0.85, 0.85 * aspect),
        2 => {
            let verts: Vec<(f64, f64)> = (0..3).map(|k| PI / 2.0 + k as f64 * TAU / 3.0).map(|t| (t.cos(), t.sin())).collect();
            polygon_sdf(x, y, &verts)
        }
        3 => box_sdf(x, y, 1.0, 0.3).min(box_sdf(x, y, 0.3, 1.0)),
        4 => (x.hypot(y) - 0.75).abs() - 0.25,
        _ => {
            let left = polygon_sdf(x, y, &[(-1.0, 0.2), (0.0, -0.8), (0.0, -0.2), (-1.0, 0.8)]);
            let right = polygon_sdf(x, y, &[(0.0, -0.8), (1.0, 0.2), (1.0, 0.8), (0.0, -0.2)]);
            left.min(right)
        }
    }
}

fn render<T: Real>(family: usize, pose: &Pose, size: usize, stroke: f64, noise: &[f64]) -> Image<T> {
    let pitch = 2.0 / size as f64;
    let (s, c) = pose.angle.sin_cos();
    Image::from_fn(size, size, |r, col| {
        let x = (2 * col + 1) as f64 / size as f64 - 1.0 - pose.cx;
        let y = (2 * r + 1) as f64 / size as f64 - 1.0 - pose.cy;
        let (u, v) = ((c * x + s * y) / pose.radius, (-s * x + c * y) / pose.radius);
        let mut d = family_sdf(family, u, v, pose.aspect) * pose.radius;
        if stroke > 0.0 {
            d = d.abs() - 0.5 * stroke * pitch;
        }
        // Linear coverage ramp one pixel wide.
        let coverage = (0.5 - d / pitch).clamp(0.0, 1.0);
        let v = pose.intensity * coverage + noise[r * size + col];
        T::lit(v.clamp(0.0, 1.0))
    })
}

fn draw_sample<T: Real>(spec: &SyntheticSpec, family: usize, rng: &mut impl Rng) -> Image<T> {
    let max_rot = spec.max_rotation_deg.to_radians();
    let pose = Pose {
        cx: rng.random_range(-1.0..=1.0) * spec.max_offset,
        cy: rng.random_range(-1.0..=1.0) * spec.max_offset,
        radius: rng.random_range(spec.scale_range.0..=spec.scale_range.1),
        angle: rng.random_range(-1.0..=1.0) * max_rot,
        aspect: rng.random_range(0.55..=0.8),
        intensity: rng.random_range(0.7..=1.0),
    };
    let noise: Vec<f64> = (0..spec.size * spec.size)
        .map(|_| spec.noise * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    render(family, &pose, spec.size, spec.stroke, &noise)
}

fn generate<T: Real>(spec: &SyntheticSpec, per_class: usize, domain: Domain) -> Result<LabeledDataset<T>> {
    spec.validate()?;
    let mut images = Vec::with_capacity(per_class * spec.classes);
    let mut labels = Vec::with_capacity(per_class * spec.classes);
    for i in 0..per_class {
        for family in 0..spec.classes {
            let index = (i * spec.classes + family) as u64;
            let mut rng = task_rng(spec.seed, domain, index);
            images.push(draw_sample(spec, family, &mut rng));
            labels.push(family);
        }
    }
    LabeledDataset::new(images, labels, spec.class_names())
}

/// Training split: `samples_per_class` images of every family, interleaved by class.
pub fn generate_synthetic_dataset<T: Real>(spec: &SyntheticSpec) -> Result<LabeledDataset<T>> {
    generate(spec, spec.samples_per_class, Domain::Dataset)
}

/// Test split drawn from a disjoint stream of the same distribution.
pub fn generate_synthetic_test_set<T: Real>(spec: &SyntheticSpec) -> Result<LabeledDataset<T>> {
    if spec.test_per_class == 0 {
        return Err(Error::Config("test_per_class must be positive".into()));
    }
    generate(spec, spec.test_per_class, Domain::TestDataset)
}
