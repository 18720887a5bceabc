//! Training-set augmentation. Every mode appends exactly one sample per original.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::classifier::{Classifier, LabeledDataset};
use crate::error::{Error, Result};
use crate::group::{compose, Transform};
use crate::image::Image;
use crate::manifool::{CraftConfig, Crafter, ManiFoolResult};
use crate::scalar::Real;
use crate::seeds::{task_rng, Domain};
use crate::warp::warp_image;

pub const MAX_ROTATION_DEG: f64 = 30.0;
pub const ERASE_AREA: (f64, f64) = (0.02, 0.2);
pub const ERASE_ASPECT: (f64, f64) = (0.3, 3.3);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AugmentMode {
    None,
    Random,
    Erasing,
    Manifool,
}

impl AugmentMode {
    pub const ALL: [AugmentMode; 4] = [AugmentMode::None, AugmentMode::Random, AugmentMode::Erasing, AugmentMode::Manifool];

    pub fn name(self) -> &'static str {
        match self {
            AugmentMode::None => "none",
            AugmentMode::Random => "random",
            AugmentMode::Erasing => "erasing",
            AugmentMode::Manifool => "manifool",
        }
    }
}

impl fmt::Display for AugmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AugmentMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown augmentation mode `{s}`")))
    }
}

/// Where a training sample came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Original,
    Random,
    Erasing,
    Manifool,
    /// Random copy standing in for a failed or skipped craft.
    Fallback,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Random => "random",
            Provenance::Erasing => "erasing",
            Provenance::Manifool => "manifool",
            Provenance::Fallback => "fallback",
        }
    }
}

/// An augmented training set: originals first, then one added sample per original.
#[derive(Clone, Debug)]
pub struct Augmented<T> {
    pub dataset: LabeledDataset<T>,
    pub provenance: Vec<Provenance>,
    /// Index of the original each sample derives from.
    pub source: Vec<usize>,
}

impl<T: Real> Augmented<T> {
    fn from_additions(original: &LabeledDataset<T>, added: Vec<(Image<T>, Provenance)>) -> Result<Self> {
        let n = original.len();
        let mut images = original.images.clone();
        let mut labels = original.labels.clone();
        let mut provenance = vec![Provenance::Original; n];
        for (i, (img, tag)) in added.into_iter().enumerate() {
            images.push(img);
            labels.push(original.labels[i]);
            provenance.push(tag);
        }
        let source = (0..n).chain(0..n).collect();
        Ok(Augmented { dataset: LabeledDataset::new(images, labels, original.class_names.clone())?, provenance, source })
    }

    /// The dataset unchanged, for the `none` baseline.
    pub fn unchanged(original: &LabeledDataset<T>) -> Self {
        Augmented {
            dataset: original.clone(),
            provenance: vec![Provenance::Original; original.len()],
            source: (0..original.len()).collect(),
        }
    }

    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }
}

/// Parameters of one random rotation-and-flip draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomPose {
    pub angle_deg: f64,
    pub flipped: bool,
}

impl RandomPose {
    pub fn draw(rng: &mut impl Rng) -> Self {
        RandomPose {
            angle_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
            flipped: rng.random_bool(0.5),
        }
    }

    pub fn transform<T: Real>(&self) -> Transform<T> {
        let rot = Transform::rotation(T::lit(self.angle_deg.to_radians()));
        if self.flipped {
            compose(&Transform::horizontal_flip(), &rot)
        } else {
            rot
        }
    }

    pub fn apply<T: Real>(&self, img: &Image<T>) -> Result<Image<T>> {
        warp_image(img, &self.transform())
    }
}

/// One rotated (uniform in ±30°) and possibly mirrored copy per image.
pub fn augment_random<T: Real>(dataset: &LabeledDataset<T>, seed: u64) -> Result<Augmented<T>> {
    let added = dataset
        .images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let pose = RandomPose::draw(&mut task_rng(seed, Domain::RandomAugment, i as u64));
            Ok((pose.apply(img)?, Provenance::Random))
        })
        .collect::<Result<Vec<_>>>()?;
    Augmented::from_additions(dataset, added)
}

/// Rectangle replaced by erasing noise, in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EraseRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl EraseRect {
    pub fn draw(h: usize, w: usize, rng: &mut impl Rng) -> Self {
        let area = rng.random_range(ERASE_AREA.0..=ERASE_AREA.1) * (h * w) as f64;
        let aspect = rng.random_range(ERASE_ASPECT.0..=ERASE_ASPECT.1);
        let height = ((area * aspect).sqrt().round() as usize).clamp(1, h);
        let width = ((area / aspect).sqrt().round() as usize).clamp(1, w);
        let top = rng.random_range(0..=h - height);
        let left = rng.random_range(0..=w - width);
        EraseRect { top, left, height, width }
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.top + self.height).contains(&row) && (self.left..self.left + self.width).contains(&col)
    }
}

/// Replace `rect` by standard normal noise clipped to `[0, 1]`.
pub fn erase<T: Real>(img: &Image<T>, rect: &EraseRect, rng: &mut impl Rng) -> Image<T> {
    let mut out = img.clone();
    for r in rect.top..rect.top + rect.height {
        for c in rect.left..rect.left + rect.width {
            for ch in 0..img.channels() {
                let z: f64 = rng.sample(StandardNormal);
                out.set(r, c, ch, T::lit(z.clamp(0.0, 1.0)));
            }
        }
    }
    out
}

/// One copy per image with a random rectangle replaced by clipped Gaussian noise.
pub fn augment_erasing<T: Real>(dataset: &LabeledDataset<T>, seed: u64) -> Result<Augmented<T>> {
    let added = dataset
        .images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut rng = task_rng(seed, Domain::ErasingAugment, i as u64);
            let rect = EraseRect::draw(img.height(), img.width(), &mut rng);
            (erase(img, &rect, &mut rng), Provenance::Erasing)
        })
        .collect();
    Augmented::from_additions(dataset, added)
}

/// Outcome of crafting one training image.
#[derive(Clone, Debug)]
pub enum CraftOutcome<T> {
    Crafted(ManiFoolResult<T>),
    /// The crafting search ran out of iterations.
    Failed(ManiFoolResult<T>),
    /// The crafter misclassifies the original, so it was not crafted.
    Misclassified,
}

impl<T> CraftOutcome<T> {
    pub fn result(&self) -> Option<&ManiFoolResult<T>> {
        match self {
            CraftOutcome::Crafted(r) | CraftOutcome::Failed(r) => Some(r),
            CraftOutcome::Misclassified => None,
        }
    }
}

/// Craft against `crafter` for every image; misclassified images are not crafted.
pub fn craft_dataset<T: Real, C: Classifier<T> + ?Sized>(
    dataset: &LabeledDataset<T>,
    crafter: &C,
    cfg: &CraftConfig,
) -> Result<Vec<CraftOutcome<T>>> {
    let (h, w, _) = dataset.image_shape()?;
    let engine = Crafter::new(cfg.clone(), h, w)?;
    dataset
        .images
        .par_iter()
        .zip(&dataset.labels)
        .map(|(img, &l)| {
            if crafter.predict(img) != l {
                return Ok(CraftOutcome::Misclassified);
            }
            let res = engine.craft_multiclass(crafter, img, l)?;
            Ok(if res.success { CraftOutcome::Crafted(res) } else { CraftOutcome::Failed(res) })
        })
        .collect()
}

/// One post-backtrack crafted copy per image; images that were not crafted
/// successfully get a random rotation-and-flip copy instead.
pub fn augment_manifool<T: Real, C: Classifier<T> + ?Sized>(
    dataset: &LabeledDataset<T>,
    crafter: &C,
    cfg: &CraftConfig,
    seed: u64,
) -> Result<(Augmented<T>, Vec<CraftOutcome<T>>)> {
    let outcomes = craft_dataset(dataset, crafter, cfg)?;
    let added = outcomes
        .par_iter()
        .enumerate()
        .map(|(i, outcome)| match outcome {
            CraftOutcome::Crafted(res) => Ok((res.warped.clone(), Provenance::Manifool)),
            _ => {
                let pose = RandomPose::draw(&mut task_rng(seed, Domain::ManifoolFallback, i as u64));
                Ok((pose.apply(&dataset.images[i])?, Provenance::Fallback))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Augmented::from_additions(dataset, added)?, outcomes))
}
