//! Geodesic distances on the image-appearance manifold and robustness measures.
//!
//! The distance from the identity to `exp(v)` is measured along the one-parameter
//! subgroup `t ↦ exp(t·v)`, as the L2 length of the warped-image curve discretized
//! into `N` chords.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::group::{compose, exp_map, invert, log_map, AlgebraVector, GeneratorSet, Transform};
use crate::image::Image;
use crate::manifool::ManiFoolResult;
use crate::scalar::{compensated_sum, Real};
use crate::seeds::{task_rng, Domain};
use crate::warp::warp_image;

/// Default number of path segments.
pub const DEFAULT_SEGMENTS: usize = 64;
/// Default relative tolerance of [`random_transform_at_distance`].
pub const DEFAULT_DISTANCE_TOL: f64 = 0.02;
/// Largest scale tried by [`random_transform_at_distance`].
pub const MAX_DIRECTION_SCALE: f64 = 20.0;
/// Default misclassification threshold of [`r_tau`].
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check_segments(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Precondition(format!("path needs at least 2 segments, got {n}")));
    }
    Ok(())
}

/// Sum of chord lengths between consecutive warps along `transforms`.
fn chord_sum<T: Real>(img: &Image<T>, transforms: impl Iterator<Item = Result<Transform<T>>>) -> Result<T> {
    let mut prev: Option<Image<T>> = None;
    let mut chords = Vec::new();
    for t in transforms {
        let cur = warp_image(img, &t?)?;
        if let Some(p) = &prev {
            chords.push(cur.l2_distance(p));
        }
        prev = Some(cur);
    }
    Ok(compensated_sum(chords))
}

/// Discretized length of `t ↦ warp(img, exp(t·v))`, `t ∈ [0, 1]`.
pub fn path_length<T: Real>(img: &Image<T>, v: &AlgebraVector<T>, basis: &GeneratorSet<T>, segments: usize) -> Result<T> {
    check_segments(segments)?;
    let n = T::from_usize_lossy(segments);
    chord_sum(img, (0..=segments).map(|k| exp_map(&v.scale(T::from_usize_lossy(k) / n), basis)))
}

/// [`path_length`] divided by `‖img‖₂`.
pub fn normalized_distance<T: Real>(img: &Image<T>, v: &AlgebraVector<T>, basis: &GeneratorSet<T>, segments: usize) -> Result<T> {
    let norm = img.l2_norm();
    if !(norm >= T::lit(1e-12)) {
        return Err(Error::ZeroImage);
    }
    Ok(path_length(img, v, basis, segments)? / norm)
}

/// Normalized distance from the identity to `t`, along `exp(s·log t)`.
pub fn transform_distance<T: Real>(img: &Image<T>, t: &Transform<T>, basis: &GeneratorSet<T>, segments: usize) -> Result<T> {
    normalized_distance(img, &log_map(t, basis)?, basis, segments)
}

/// Path length between `warp(img, t1)` and `warp(img, t2)` along `exp(s·w) ∘ t1`
/// with `w = log(t2 ∘ t1⁻¹)`.
pub fn path_length_between<T: Real>(
    img: &Image<T>,
    t1: &Transform<T>,
    t2: &Transform<T>,
    basis: &GeneratorSet<T>,
    segments: usize,
) -> Result<T> {
    check_segments(segments)?;
    let w = log_map(&compose(t2, &invert(t1)?), basis)?;
    let n = T::from_usize_lossy(segments);
    chord_sum(
        img,
        (0..=segments).map(|k| exp_map(&w.scale(T::from_usize_lossy(k) / n), basis).map(|e| compose(&e, t1))),
    )
}

/// Length of the polyline through `warp(img, t)` for the identity followed by `iterates`.
///
/// Diagnostic companion of [`transform_distance`]; the two are never mixed.
pub fn piecewise_path_length<T: Real>(img: &Image<T>, iterates: &[Transform<T>]) -> Result<T> {
    let start = iterates.first().map(|t| Transform::identity(t.kind()));
    chord_sum(img, start.into_iter().chain(iterates.iter().copied()).map(Ok))
}

/// Mean normalized distance of the successful samples.
pub fn robustness_score<T: Real>(samples: &[ManiFoolResult<T>]) -> Result<T> {
    let distances: Vec<T> = samples.iter().filter(|s| s.success).map(|s| s.distance).collect();
    if distances.is_empty() {
        return Err(Error::NoSamples);
    }
    Ok(compensated_sum(distances.iter().copied()) / T::from_usize_lossy(distances.len()))
}

/// A random transform drawn at a prescribed distance.
#[derive(Clone, Debug)]
pub struct DistanceDraw<T> {
    pub transform: Transform<T>,
    pub coords: AlgebraVector<T>,
    /// Achieved normalized distance.
    pub distance: T,
}

/// Uniform random unit direction, scaled so that the normalized distance lands within
/// `r·(1 ± tol)`.
///
/// The scale is first read off a cumulative length profile along the direction, then
/// checked against [`normalized_distance`] and corrected by bisection if needed.
pub fn random_transform_at_distance<T: Real, R: Rng + ?Sized>(
    img: &Image<T>,
    basis: &GeneratorSet<T>,
    r: f64,
    rng: &mut R,
    tol: f64,
) -> Result<DistanceDraw<T>> {
    if !(r > 0.0) || !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Precondition(format!("target distance {r} and tolerance {tol} must be positive")));
    }
    let norm = img.l2_norm();
    if !(norm >= T::lit(1e-12)) {
        return Err(Error::ZeroImage);
    }
    let dir = loop {
        let v: Vec<f64> = (0..basis.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            break AlgebraVector(v.into_iter().map(|a| T::lit(a / n)).collect::<Vec<T>>());
        }
    };
    let (lo_band, hi_band) = (r * (1.0 - tol), r * (1.0 + tol));
    // Transforms that cannot be evaluated (degenerate projective maps) count as too far.
    let eval = |s: f64| -> Option<f64> {
        normalized_distance(img, &dir.scale(T::lit(s)), basis, DEFAULT_SEGMENTS)
            .ok()
            .map(Real::to_f64_lossy)
    };
    let finish = |s: f64, d: f64| -> Result<DistanceDraw<T>> {
        let coords = dir.scale(T::lit(s));
        Ok(DistanceDraw { transform: exp_map(&coords, basis)?, coords, distance: T::lit(d) })
    };
    let (guess, wall) = match length_profile(img, &dir, basis, r * norm.to_f64_lossy()) {
        Profile::Crossed { s } => (Some(s), MAX_DIRECTION_SCALE),
        Profile::Wall { s } => (None, s),
        Profile::Short { reached } => {
            return Err(Error::Unreachable { target: r, reached: reached / norm.to_f64_lossy(), s_max: MAX_DIRECTION_SCALE })
        }
    };
    let mut lo = 0.0;
    let mut hi = wall;
    // Length grows almost linearly in the scale, so a few ratio corrections usually land.
    let mut next = guess;
    for _ in 0..3 {
        let Some(s) = next.filter(|&s| s > lo && s < hi) else { break };
        next = None;
        match eval(s) {
            Some(d) if d >= lo_band && d <= hi_band => return finish(s, d),
            Some(d) if d < lo_band => {
                lo = s;
                if d > 0.0 {
                    next = Some(s * r / d);
                }
            }
            Some(d) => {
                hi = s;
                next = Some(s * r / d);
            }
            None => hi = s,
        }
    }
    // The profile missed the band; bisect on the exact length.
    let mut best = 0.0f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match eval(mid) {
            Some(d) if d >= lo_band && d <= hi_band => return finish(mid, d),
            Some(d) if d < lo_band => {
                best = best.max(d);
                lo = mid;
            }
            _ => hi = mid,
        }
    }
    Err(Error::Unreachable { target: r, reached: best, s_max: MAX_DIRECTION_SCALE })
}

/// Step of the cumulative length profile near the identity.
const PROFILE_STEP: f64 = 0.01;

enum Profile {
    /// Interpolated scale at which the cumulative length reaches the target.
    Crossed { s: f64 },
    /// The warp stopped being defined at this scale before the target was reached.
    Wall { s: f64 },
    /// Length reached by `MAX_DIRECTION_SCALE`, below the target.
    Short { reached: f64 },
}

/// Walk `t ↦ warp(img, exp(t·dir))` with steps growing like `t/32`, accumulating chord
/// lengths until `target` is passed.
fn length_profile<T: Real>(img: &Image<T>, dir: &AlgebraVector<T>, basis: &GeneratorSet<T>, target: f64) -> Profile {
    let mut t = 0.0f64;
    let mut prev = img.clone();
    let mut total = 0.0f64;
    while t < MAX_DIRECTION_SCALE {
        let next = (t + PROFILE_STEP.max(t / 32.0)).min(MAX_DIRECTION_SCALE);
        let cur = match exp_map(&dir.scale(T::lit(next)), basis).and_then(|m| warp_image(img, &m)) {
            Ok(c) => c,
            Err(_) => return Profile::Wall { s: next },
        };
        let chord = cur.l2_distance(&prev).to_f64_lossy();
        if total + chord >= target {
            return Profile::Crossed { s: t + (next - t) * (target - total) / chord };
        }
        total += chord;
        t = next;
        prev = cur;
    }
    Profile::Short { reached: total }
}

/// Outcome counts of random transforms at one distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialCounts {
    /// Transforms evaluated.
    pub trials: usize,
    /// Draws skipped because the distance was unreachable.
    pub skipped: usize,
    /// Prediction on the transformed image differs from the clean prediction.
    pub flipped: usize,
    /// Prediction on the transformed image equals the ground-truth label.
    pub correct: usize,
}

impl TrialCounts {
    fn merge(&mut self, other: &TrialCounts) {
        self.trials += other.trials;
        self.skipped += other.skipped;
        self.flipped += other.flipped;
        self.correct += other.correct;
    }
}

/// Draws `trials` random transforms at each distance for every image and evaluates `clf`.
///
/// Image `i` at distance index `d` draws from stream `i · |distances| + d` of `domain`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_random_transforms<T: Real, C: Classifier<T> + ?Sized>(
    clf: &C,
    images: &[Image<T>],
    labels: &[usize],
    basis: &GeneratorSet<T>,
    distances: &[f64],
    trials: usize,
    seed: u64,
    domain: Domain,
) -> Result<Vec<TrialCounts>> {
    if distances.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("distances must be strictly increasing".into()));
    }
    if trials == 0 {
        return Err(Error::Precondition("at least one trial per distance is required".into()));
    }
    let nd = distances.len();
    let per_task: Vec<TrialCounts> = (0..images.len() * nd)
        .into_par_iter()
        .map(|task| {
            let (i, d) = (task / nd, task % nd);
            let img = &images[i];
            let clean = clf.predict(img);
            let mut rng = task_rng(seed, domain, task as u64);
            let mut counts = TrialCounts::default();
            for _ in 0..trials {
                match random_transform_at_distance(img, basis, distances[d], &mut rng, DEFAULT_DISTANCE_TOL) {
                    Ok(draw) => {
                        let pred = clf.predict(&warp_image(img, &draw.transform)?);
                        counts.trials += 1;
                        counts.flipped += usize::from(pred != clean);
                        counts.correct += usize::from(pred == labels[i]);
                    }
                    Err(Error::Unreachable { .. } | Error::ZeroImage) => counts.skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let mut totals = vec![TrialCounts::default(); nd];
    for (task, c) in per_task.iter().enumerate() {
        totals[task % nd].merge(c);
    }
    Ok(totals)
}

/// One point of a misclassification-rate curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub distance: f64,
    /// Fraction of transformed images whose prediction changed, in `[0, 1]`.
    pub rate: f64,
    pub trials: usize,
    pub skipped: usize,
}

pub fn curve_from_counts(distances: &[f64], counts: &[TrialCounts]) -> Vec<CurvePoint> {
    distances
        .iter()
        .zip(counts)
        .map(|(&distance, c)| CurvePoint {
            distance,
            rate: if c.trials == 0 { 0.0 } else { c.flipped as f64 / c.trials as f64 },
            trials: c.trials,
            skipped: c.skipped,
        })
        .collect()
}

/// Rate at which random transforms at each distance change the prediction of `clf`.
pub fn misclassification_curve<T: Real, C: Classifier<T> + ?Sized>(
    clf: &C,
    images: &[Image<T>],
    basis: &GeneratorSet<T>,
    distances: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let labels: Vec<usize> = images.iter().map(|im| clf.predict(im)).collect();
    let counts = evaluate_random_transforms(clf, images, &labels, basis, distances, trials, seed, Domain::AffineEvaluation)?;
    Ok(curve_from_counts(distances, &counts))
}

/// Smallest distance at which the rate reaches `threshold`, linearly interpolated
/// between curve points; `None` when no point reaches it.
pub fn r_tau(curve: &[CurvePoint], threshold: f64) -> Option<f64> {
    let i = curve.iter().position(|p| p.rate >= threshold)?;
    if i == 0 {
        return Some(curve[0].distance);
    }
    let (a, b) = (&curve[i - 1], &curve[i]);
    Some(a.distance + (threshold - a.rate) / (b.rate - a.rate) * (b.distance - a.distance))
}

/// Robustness summary of one classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessReport {
    pub rho: Option<f64>,
    pub curve: Vec<CurvePoint>,
    pub r_tau: Option<f64>,
    pub threshold: f64,
}

impl RobustnessReport {
    pub fn new(rho: Option<f64>, curve: Vec<CurvePoint>, threshold: f64) -> Self {
        let r_tau = r_tau(&curve, threshold);
        RobustnessReport { rho, curve, r_tau, threshold }
    }
}

/// CSV with header `distance,rate,trials,skipped`.
pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("distance,rate,trials,skipped\n");
    for p in curve {
        writeln!(out, "{},{:.6},{},{}", p.distance, p.rate, p.trials, p.skipped).expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blob(h: usize, w: usize) -> Image<f64> {
        Image::from_fn(h, w, |r, c| {
            let (y, x) = (r as f64 - 0.45 * h as f64, c as f64 - 0.55 * w as f64);
            (-(x * x + y * y) / 18.0).exp()
        })
    }

    fn point(distance: f64, rate: f64) -> CurvePoint {
        CurvePoint { distance, rate, trials: 10, skipped: 0 }
    }

    #[test]
    fn zero_vector_has_zero_length() {
        let basis = GeneratorSet::for_image(GroupKind::Affine, 16, 16).unwrap();
        let img = blob(16, 16);
        assert_eq!(path_length(&img, &AlgebraVector::zeros(6), &basis, 64).unwrap(), 0.0);
        assert_eq!(normalized_distance(&img, &AlgebraVector::zeros(6), &basis, 64).unwrap(), 0.0);
        assert!(path_length(&img, &AlgebraVector::zeros(6), &basis, 1).is_err());
    }

    #[test]
    fn constant_image_length_comes_from_the_border_only() {
        let basis = GeneratorSet::<f64>::for_image(GroupKind::Translation, 16, 16).unwrap();
        let v = AlgebraVector(vec![2.0 / 16.0 / basis.scales()[0], 0.0]);
        // Zero content never moves; a constant image only changes where the zero padding enters.
        assert_eq!(path_length(&Image::zeros(16, 16, 1), &v, &basis, 8).unwrap(), 0.0);
        let flat = Image::constant(16, 16, 1, 0.5);
        let len = path_length(&flat, &v, &basis, 8).unwrap();
        // One-pixel shift: one column of 16 pixels goes from 0.5 to 0 linearly.
        assert!((len - 0.5 * 4.0).abs() < 1e-9, "{len}");
    }

    #[test]
    fn translation_length_matches_direct_chords() {
        let img = blob(16, 16);
        let basis = GeneratorSet::for_image(GroupKind::Translation, 16, 16).unwrap();
        let v = AlgebraVector(vec![0.3, -0.1]);
        let direct: f64 = (0..8)
            .map(|k| {
                let t = |s: f64| Transform::translation(s * 0.3 * basis.scales()[0], -s * 0.1 * basis.scales()[1]);
                let a = warp_image(&img, &t(k as f64 / 8.0)).unwrap();
                let b = warp_image(&img, &t((k + 1) as f64 / 8.0)).unwrap();
                a.l2_distance(&b)
            })
            .sum();
        assert!((path_length(&img, &v, &basis, 8).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn refinement_changes_length_by_less_than_one_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // White noise is too rough for bilinear paths; use random smooth bumps.
        let bumps: Vec<[f64; 4]> = (0..6)
            .map(|_| [rng.random_range(4.0..28.0), rng.random_range(4.0..28.0), rng.random_range(2.0..5.0), rng.random()])
            .collect();
        let img = Image::from_fn(32, 32, |r, c| {
            bumps.iter().map(|[y, x, s, a]| a * (-((r as f64 - y).powi(2) + (c as f64 - x).powi(2)) / (2.0 * s * s)).exp()).sum()
        });
        let basis = GeneratorSet::for_image(GroupKind::Affine, 32, 32).unwrap();
        let v = AlgebraVector(vec![0.2, -0.1, 0.3, 0.1, -0.2, 0.05]);
        let v = v.scale(0.5 / v.norm());
        let coarse = path_length(&img, &v, &basis, 64).unwrap();
        let fine = path_length(&img, &v, &basis, 512).unwrap();
        assert!((coarse - fine).abs() / fine < 0.01, "{coarse} vs {fine}");
    }

    #[test]
    fn normalized_distance_is_scale_invariant() {
        let img = blob(16, 16);
        let basis = GeneratorSet::for_image(GroupKind::Affine, 16, 16).unwrap();
        let v = AlgebraVector(vec![0.1, 0.2, -0.3, 0.05, 0.0, 0.1]);
        let base = normalized_distance(&img, &v, &basis, 64).unwrap();
        for alpha in [0.5, 2.0] {
            assert_eq!(normalized_distance(&img.scaled(alpha), &v, &basis, 64).unwrap(), base);
        }
        let direct = path_length(&img, &v, &basis, 64).unwrap() / img.l2_norm();
        assert_eq!(base, direct);
        assert!(matches!(normalized_distance(&Image::zeros(16, 16, 1), &v, &basis, 64), Err(Error::ZeroImage)));
    }

    #[test]
    fn between_reduces_to_identity_distance() {
        let img = blob(16, 16);
        let basis = GeneratorSet::for_image(GroupKind::Affine, 16, 16).unwrap();
        let v = AlgebraVector(vec![0.1, 0.2, -0.3, 0.05, 0.0, 0.1]);
        let t = exp_map(&v, &basis).unwrap();
        let id = Transform::identity(GroupKind::Affine);
        let a = path_length_between(&img, &id, &t, &basis, 32).unwrap();
        let b = path_length(&img, &v, &basis, 32).unwrap();
        assert!((a - b).abs() < 1e-9 * b);
    }

    #[test]
    fn piecewise_path_is_at_least_the_chord() {
        let img = blob(16, 16);
        let iterates = [Transform::translation(0.1, 0.0), Transform::translation(0.1, 0.1), Transform::translation(0.2, 0.1)];
        let len = piecewise_path_length(&img, &iterates).unwrap();
        let chord = img.l2_distance(&warp_image(&img, &iterates[2]).unwrap());
        assert!(len >= chord);
        assert_eq!(piecewise_path_length::<f64>(&img, &[]).unwrap(), 0.0);
    }

    #[test]
    fn random_draw_hits_target_distance() {
        let img = blob(20, 20);
        let basis = GeneratorSet::for_image(GroupKind::Affine, 20, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draw = random_transform_at_distance(&img, &basis, 1.0, &mut rng, 0.02).unwrap();
        let again = normalized_distance(&img, &log_map(&draw.transform, &basis).unwrap(), &basis, 64).unwrap();
        assert!((again - 1.0).abs() <= 0.02, "{again}");
        let tiny = random_transform_at_distance(&img, &basis, 1e-4, &mut rng, 0.02).unwrap();
        assert!(tiny.coords.norm() < 1e-3);
    }

    #[test]
    fn unreachable_and_degenerate_targets() {
        let basis = GeneratorSet::for_image(GroupKind::Translation, 16, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // A constant image reaches at most about sqrt(width) by sliding out of the frame.
        let flat = Image::constant(16, 16, 1, 0.5);
        assert!(random_transform_at_distance(&flat, &basis, 1.0, &mut rng, 0.02).is_ok());
        let far = random_transform_at_distance(&flat, &basis, 50.0, &mut rng, 0.02);
        assert!(matches!(far, Err(Error::Unreachable { .. })), "{far:?}");
        let zero = random_transform_at_distance(&Image::zeros(16, 16, 1), &basis, 1.0, &mut rng, 0.02);
        assert!(matches!(zero, Err(Error::ZeroImage)));
        assert!(random_transform_at_distance(&flat, &basis, 0.0, &mut rng, 0.02).is_err());
    }

    #[test]
    fn robustness_score_is_the_mean() {
        let mut a = ManiFoolResult::<f64>::failure_for_tests();
        a.success = true;
        a.distance = 1.0;
        let mut b = a.clone();
        b.distance = 3.0;
        let failed = ManiFoolResult::<f64>::failure_for_tests();
        assert_eq!(robustness_score(&[a.clone(), b, failed.clone()]).unwrap(), 2.0);
        a.distance = 0.7;
        assert_eq!(robustness_score(&[a]).unwrap(), 0.7);
        assert!(matches!(robustness_score(&[failed]), Err(Error::NoSamples)));
    }

    #[test]
    fn r_tau_interpolates() {
        assert_eq!(r_tau(&[point(1.0, 0.2), point(2.0, 0.5)], 0.5), Some(2.0));
        assert_eq!(r_tau(&[point(1.0, 0.4), point(3.0, 0.8)], 0.5), Some(1.5));
        assert_eq!(r_tau(&[point(1.0, 0.1), point(3.0, 0.4)], 0.5), None);
        assert_eq!(r_tau(&[point(1.0, 0.6)], 0.5), Some(1.0));
        assert_eq!(r_tau(&[], 0.5), None);
    }

    struct Constant;
    impl Classifier<f64> for Constant {
        fn n_classes(&self) -> usize {
            2
        }
        fn input_len(&self) -> usize {
            400
        }
        fn logits(&self, _: &[f64]) -> Vec<f64> {
            vec![1.0, 0.0]
        }
        fn margin_gradient(&self, _: &[f64], _: usize, _: usize) -> Vec<f64> {
            vec![0.0; 400]
        }
    }

    #[test]
    fn constant_classifier_never_flips() {
        let basis = GeneratorSet::for_image(GroupKind::Affine, 20, 20).unwrap();
        let images = vec![blob(20, 20); 3];
        let curve = misclassification_curve(&Constant, &images, &basis, &[0.5, 1.0], 2, 3).unwrap();
        assert_eq!(curve.len(), 2);
        assert!(curve.iter().all(|p| p.rate == 0.0 && p.trials == 6));
        assert!(misclassification_curve(&Constant, &images, &basis, &[], 2, 3).unwrap().is_empty());
        assert!(misclassification_curve(&Constant, &images, &basis, &[1.0, 0.5], 2, 3).is_err());
    }

    #[test]
    fn curve_csv_has_header() {
        let csv = curve_to_csv(&[point(1.0, 0.25)]);
        assert_eq!(csv, "distance,rate,trials,skipped\n1,0.250000,10,0\n");
    }
}
