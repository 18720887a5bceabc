//! Boundary search on a transformation group.
//!
//! Starting from the identity, each iteration computes the tangent-space direction
//! that decreases the pairwise margin `f = score_l − score_k` fastest under the
//! appearance metric, takes a momentum step found by geometric backoff, and retracts
//! it onto the group through the exponential map. Once the warped image leaves class
//! `l` the last step is bisected back so the sample stays on the ground-truth side.

use std::fmt;
use std::str::FromStr;

use crate::classifier::{argmax, Classifier};
use crate::error::{Error, Result};
use crate::geodesic::{transform_distance, DEFAULT_SEGMENTS};
use crate::group::{compose, exp_map, AlgebraVector, GeneratorSet, GroupKind, Transform};
use crate::image::Image;
use crate::linalg::regularized_lstsq;
use crate::scalar::Real;
use crate::warp::{warp_image, warp_with_jacobian, AppearanceJacobian};

/// Relative Tikhonov weight in the normal equations of [`movement_direction`].
pub const DIRECTION_REGULARIZATION: f64 = 1e-8;

/// Which target classes to craft toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetPolicy {
    AllClasses,
    /// The `k` highest-scoring classes other than the label.
    TopK(usize),
}

impl fmt::Display for TargetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetPolicy::AllClasses => f.write_str("all"),
            TargetPolicy::TopK(k) => write!(f, "top:{k}"),
        }
    }
}

impl FromStr for TargetPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "all" => Ok(TargetPolicy::AllClasses),
            Some(("top", k)) => match k.parse() {
                Ok(k) if k > 0 => Ok(TargetPolicy::TopK(k)),
                _ => Err(Error::Config(format!("bad target count in `{s}`"))),
            },
            _ => Err(Error::Config(format!("unknown target policy `{s}` (expected `all` or `top:<k>`)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CraftConfig {
    pub max_iter: usize,
    pub momentum: f64,
    pub step_init: f64,
    /// Line-search backoff factor.
    pub shrink: f64,
    /// Number of backoffs tried after the initial step.
    pub line_search_tries: usize,
    pub backtrack_bisections: usize,
    pub group: GroupKind,
    pub target_policy: TargetPolicy,
    /// Segments of the geodesic used for reported distances.
    pub path_segments: usize,
}

impl Default for CraftConfig {
    fn default() -> Self {
        CraftConfig {
            max_iter: 50,
            momentum: 0.5,
            step_init: 0.05,
            shrink: 0.5,
            line_search_tries: 8,
            backtrack_bisections: 12,
            group: GroupKind::Affine,
            target_policy: TargetPolicy::AllClasses,
            path_segments: DEFAULT_SEGMENTS,
        }
    }
}

impl CraftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("line-search shrink {} outside (0, 1)", self.shrink)));
        }
        if !(self.step_init > 0.0) {
            return Err(Error::Config("initial step must be positive".into()));
        }
        if self.group == GroupKind::Projective {
            return Err(Error::Config("crafting uses non-projective groups only".into()));
        }
        if self.path_segments < 2 {
            return Err(Error::Config("path needs at least 2 segments".into()));
        }
        Ok(())
    }
}

/// `u = −(JᵀJ + εI)⁻¹ Jᵀ g` with `ε = 1e-8 · trace(JᵀJ) / d`.
pub fn movement_direction<T: Real>(jacobian: &AppearanceJacobian<T>, gradient: &[T]) -> Result<AlgebraVector<T>> {
    if jacobian.rows() != gradient.len() {
        return Err(Error::DimensionMismatch { expected: jacobian.rows(), got: gradient.len() });
    }
    let (solution, trace) = regularized_lstsq(&jacobian.columns, gradient, T::lit(DIRECTION_REGULARIZATION));
    if !(trace >= T::lit(1e-20)) {
        return Err(Error::DegenerateJacobian(trace.to_f64_lossy()));
    }
    let u = solution.ok_or(Error::DegenerateJacobian(trace.to_f64_lossy()))?;
    Ok(AlgebraVector(u.into_iter().map(|v| -v).collect()))
}

/// One accepted iteration.
#[derive(Clone, Debug)]
pub struct StepOutcome<T> {
    pub transform: Transform<T>,
    /// `u_new = λ·û + γ·u_prev`, composed on the left of the previous transform.
    pub direction: AlgebraVector<T>,
    pub step_size: T,
    /// No tried step decreased the margin; the smallest was accepted anyway.
    pub stuck: bool,
    pub margin_before: T,
    pub margin_after: T,
    /// `warp(x0, transform)`.
    pub warped: Image<T>,
}

/// A crafted sample.
#[derive(Clone, Debug)]
pub struct ManiFoolResult<T> {
    pub success: bool,
    /// Accumulated transform after backtracking (the final iterate on failure).
    pub transform: Transform<T>,
    /// First accumulated transform that left the ground-truth class.
    pub boundary_transform: Transform<T>,
    pub iterations: usize,
    /// Class the margin was driven against.
    pub target_class: usize,
    /// Prediction at `boundary_transform`.
    pub boundary_class: usize,
    /// Normalized geodesic distance of `transform`.
    pub distance: T,
    /// `warp(x0, transform)`.
    pub warped: Image<T>,
    /// Per-iteration left factors `u_i`; the accumulated transform is
    /// `exp(u_n) ∘ … ∘ exp(u_1)` before backtracking.
    pub steps: Vec<AlgebraVector<T>>,
    pub stuck_steps: usize,
    /// Fraction `s` of the last step kept by backtracking.
    pub backtrack_fraction: T,
}

#[cfg(test)]
impl ManiFoolResult<f64> {
    pub(crate) fn failure_for_tests() -> Self {
        ManiFoolResult {
            success: false,
            transform: Transform::identity(GroupKind::Affine),
            boundary_transform: Transform::identity(GroupKind::Affine),
            iterations: 0,
            target_class: 1,
            boundary_class: 0,
            distance: 0.0,
            warped: Image::zeros(8, 8, 1),
            steps: Vec::new(),
            stuck_steps: 0,
            backtrack_fraction: 0.0,
        }
    }
}

/// Crafting context: a generator basis for one image size and the configuration.
#[derive(Clone, Debug)]
pub struct Crafter<T> {
    basis: GeneratorSet<T>,
    config: CraftConfig,
}

impl<T: Real> Crafter<T> {
    pub fn new(config: CraftConfig, height: usize, width: usize) -> Result<Self> {
        config.validate()?;
        let basis = GeneratorSet::for_image(config.group, height, width)?;
        Ok(Crafter { basis, config })
    }

    pub fn basis(&self) -> &GeneratorSet<T> {
        &self.basis
    }

    pub fn config(&self) -> &CraftConfig {
        &self.config
    }

    fn check_image<C: Classifier<T> + ?Sized>(&self, clf: &C, x0: &Image<T>) -> Result<()> {
        let (h, w, _) = x0.shape();
        let reference = GeneratorSet::<T>::for_image(self.config.group, h, w)?;
        if reference.scales() != self.basis.scales() {
            return Err(Error::Precondition(format!("crafter basis was built for a different image size than {h}x{w}")));
        }
        if x0.len() != clf.input_len() {
            return Err(Error::DimensionMismatch { expected: clf.input_len(), got: x0.len() });
        }
        Ok(())
    }

    fn warp_at(&self, x0: &Image<T>, v: &AlgebraVector<T>, base: &Transform<T>) -> Result<(Transform<T>, Image<T>)> {
        let t = compose(&exp_map(v, &self.basis)?, base);
        let warped = warp_image(x0, &t)?;
        Ok((t, warped))
    }

    /// One momentum line-search iteration from `current`.
    #[allow(clippy::too_many_arguments)]
    pub fn step<C: Classifier<T> + ?Sized>(
        &self,
        clf: &C,
        x0: &Image<T>,
        current: &Transform<T>,
        u_prev: &AlgebraVector<T>,
        l: usize,
        k: usize,
    ) -> Result<StepOutcome<T>> {
        let (x_cur, jac) = warp_with_jacobian(x0, current, &self.basis)?;
        let margin_before = clf.margin(&x_cur, l, k);
        if margin_before < T::zero() {
            return Err(Error::Precondition(format!("margin of class {l} over {k} is already negative")));
        }
        let grad = clf.input_gradient(&x_cur, l, k)?;
        let u = movement_direction(&jac, &grad)?;
        let norm = u.norm();
        let unit = if norm > T::zero() { u.scale(norm.recip()) } else { u };
        let gamma = T::lit(self.config.momentum);
        let shrink = T::lit(self.config.shrink);
        let mut lambda = T::lit(self.config.step_init);
        for attempt in 0..=self.config.line_search_tries {
            let direction = unit.scale(lambda).axpy(gamma, u_prev);
            let (transform, warped) = self.warp_at(x0, &direction, current)?;
            let margin_after = clf.margin(&warped, l, k);
            let last = attempt == self.config.line_search_tries;
            if margin_after < margin_before || last {
                return Ok(StepOutcome {
                    transform,
                    direction,
                    step_size: lambda,
                    stuck: !(margin_after < margin_before),
                    margin_before,
                    margin_after,
                    warped,
                });
            }
            lambda *= shrink;
        }
        unreachable!("the last line-search attempt is always accepted")
    }

    /// Bisect `s ∈ [0, 1]` over `exp(s·last_step) ∘ before` for the largest tested `s`
    /// still classified as `l`.
    pub fn backtrack<C: Classifier<T> + ?Sized>(
        &self,
        clf: &C,
        x0: &Image<T>,
        before: &Transform<T>,
        last_step: &AlgebraVector<T>,
        l: usize,
    ) -> Result<(Transform<T>, T)> {
        let (_, start) = self.warp_at(x0, &last_step.scale(T::zero()), before)?;
        let (_, end) = self.warp_at(x0, last_step, before)?;
        if clf.predict(&start) != l || clf.predict(&end) == l {
            return Err(Error::Precondition("backtracking needs an in-class start and an out-of-class end".into()));
        }
        let mut lo = T::zero();
        let mut hi = T::one();
        let half = T::lit(0.5);
        for _ in 0..self.config.backtrack_bisections {
            let mid = (lo + hi) * half;
            let (_, warped) = self.warp_at(x0, &last_step.scale(mid), before)?;
            if clf.predict(&warped) == l {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let transform = compose(&exp_map(&last_step.scale(lo), &self.basis)?, before);
        Ok((transform, lo))
    }

    /// Drive the margin of `l` over `k` to the boundary, starting from the identity.
    pub fn craft_pair<C: Classifier<T> + ?Sized>(&self, clf: &C, x0: &Image<T>, l: usize, k: usize) -> Result<ManiFoolResult<T>> {
        self.check_image(clf, x0)?;
        if l == k || k >= clf.n_classes() {
            return Err(Error::Precondition(format!("invalid target class {k} for label {l}")));
        }
        if clf.predict(x0) != l {
            return Err(Error::Precondition(format!("image is not classified as its label {l}")));
        }
        let identity = Transform::identity(self.config.group);
        let mut current = identity;
        let mut current_image = x0.clone();
        let mut u_prev = AlgebraVector::zeros(self.basis.dim());
        let mut steps = Vec::new();
        let mut stuck_steps = 0;
        for iter in 0..self.config.max_iter {
            let out = self.step(clf, x0, &current, &u_prev, l, k)?;
            stuck_steps += usize::from(out.stuck);
            let predicted = argmax(&clf.scores(&out.warped));
            if predicted != l {
                let (transform, fraction) = self.backtrack(clf, x0, &current, &out.direction, l)?;
                let warped = warp_image(x0, &transform)?;
                let distance = transform_distance(x0, &transform, &self.basis, self.config.path_segments)?;
                steps.push(out.direction);
                return Ok(ManiFoolResult {
                    success: true,
                    transform,
                    boundary_transform: out.transform,
                    iterations: iter + 1,
                    target_class: k,
                    boundary_class: predicted,
                    distance,
                    warped,
                    steps,
                    stuck_steps,
                    backtrack_fraction: fraction,
                });
            }
            current = out.transform;
            current_image = out.warped;
            u_prev = out.direction.clone();
            steps.push(out.direction);
        }
        let distance = if current == identity {
            T::zero()
        } else {
            transform_distance(x0, &current, &self.basis, self.config.path_segments)?
        };
        Ok(ManiFoolResult {
            success: false,
            transform: current,
            boundary_transform: current,
            iterations: self.config.max_iter,
            target_class: k,
            boundary_class: l,
            distance,
            warped: current_image,
            steps,
            stuck_steps,
            backtrack_fraction: T::zero(),
        })
    }

    /// Target classes under the configured policy, in crafting order.
    pub fn targets<C: Classifier<T> + ?Sized>(&self, clf: &C, x0: &Image<T>, l: usize) -> Vec<usize> {
        let mut others: Vec<usize> = (0..clf.n_classes()).filter(|&c| c != l).collect();
        if let TargetPolicy::TopK(k) = self.config.target_policy {
            let scores = clf.scores(x0);
            others.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            others.truncate(k);
        }
        others
    }

    /// One [`Crafter::craft_pair`] run per target class.
    pub fn craft_candidates<C: Classifier<T> + ?Sized>(&self, clf: &C, x0: &Image<T>, l: usize) -> Result<Vec<ManiFoolResult<T>>> {
        self.targets(clf, x0, l).into_iter().map(|k| self.craft_pair(clf, x0, l, k)).collect()
    }

    /// The successful candidate with the smallest distance, else the failure with the
    /// most iterations.
    pub fn craft_multiclass<C: Classifier<T> + ?Sized>(&self, clf: &C, x0: &Image<T>, l: usize) -> Result<ManiFoolResult<T>> {
        select_candidate(self.craft_candidates(clf, x0, l)?)
    }
}

/// Selection rule of [`Crafter::craft_multiclass`]; ties keep the earlier candidate.
pub fn select_candidate<T: Real>(candidates: Vec<ManiFoolResult<T>>) -> Result<ManiFoolResult<T>> {
    let mut best: Option<ManiFoolResult<T>> = None;
    for c in candidates {
        let better = match &best {
            None => true,
            Some(b) if c.success && b.success => c.distance < b.distance,
            Some(b) if c.success != b.success => c.success,
            Some(b) => c.iterations > b.iterations,
        };
        if better {
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::Precondition("no target classes to craft toward".into()))
}
