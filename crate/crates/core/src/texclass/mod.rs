//! Texture classification with one dictionary per class.
//!
//! Every patch gets the label of the class dictionary that codes it with the
//! smallest error; an image is described by the histogram of its patch labels
//! and classified by the χ² nearest training histogram.

mod cv;
mod io;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coding::{ksvd_learn, rksvd_learn, Coder, Dictionary, LearnConfig, LearnReport};
use crate::error::{Error, Result};
use crate::patches::{extract_patches, Image, LabeledImageSet, Split, TEST_ANGLES_DEG};
use crate::steerbasis::{steer, BasisSpec, SteerableBasis, SteerableCoeffs};

pub use cv::{cross_validate, CvResult, CvRow, HoldoutDirection, SweepGrid};
pub use io::{load_model, save_model, write_sweep_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrainMode {
    /// K-SVD on upright patches.
    Standard,
    /// K-SVD on patches each steered by a random test-set angle.
    StandardAug,
    /// Rotational K-SVD.
    Rotational,
}

impl TrainMode {
    pub const ALL: [TrainMode; 3] = [
        TrainMode::Standard,
        TrainMode::StandardAug,
        TrainMode::Rotational,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Standard => "standard",
            TrainMode::StandardAug => "standard_aug",
            TrainMode::Rotational => "rotational",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(TrainMode::Standard),
            "standard_aug" => Ok(TrainMode::StandardAug),
            "rotational" => Ok(TrainMode::Rotational),
            _ => Err(Error::invalid(format!(
                "unknown mode `{s}` (expected standard, standard_aug or rotational)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassParams {
    pub n: usize,
    pub atoms: usize,
    pub sparsity: usize,
    /// Rotation count for rotational mode; the standard modes always use 1.
    pub rotations: usize,
    pub iterations: usize,
    pub patches_per_image: usize,
    /// Stride of the patch grid used for histograms.
    pub stride: usize,
}

impl Default for ClassParams {
    fn default() -> Self {
        ClassParams {
            n: 11,
            atoms: 10,
            sparsity: 2,
            rotations: 36,
            iterations: 10,
            patches_per_image: 500,
            stride: 1,
        }
    }
}

impl ClassParams {
    /// Rotation count actually used by `mode`.
    pub fn rotations_for(&self, mode: TrainMode) -> usize {
        match mode {
            TrainMode::Rotational => self.rotations,
            _ => 1,
        }
    }
}

/// Output of [`train_class_dicts`].
#[derive(Clone, Debug)]
pub struct TrainedDicts {
    pub dicts: Vec<Dictionary>,
    pub reports: Vec<LearnReport>,
    /// Images that had fewer usable patches than requested.
    pub clamped_images: usize,
}

fn class_seed(seed: u64, class: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(class as u64 + 1)
}

/// Learn one dictionary per class from the training split.
pub fn train_class_dicts(
    train: &LabeledImageSet,
    params: &ClassParams,
    mode: TrainMode,
    seed: u64,
) -> Result<TrainedDicts> {
    train.validate()?;
    let basis = SteerableBasis::new(&BasisSpec::new(params.n))?;
    let mut dicts = Vec::with_capacity(train.classes);
    let mut reports = Vec::with_capacity(train.classes);
    let mut clamped_images = 0;
    for class in 0..train.classes {
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, class));
        let mut pooled: Vec<Vec<f64>> = Vec::new();
        for item in train.split(Split::Train).filter(|i| i.label == class) {
            let set = extract_patches(&item.image, params.n, 1, true)?;
            let take = params.patches_per_image.min(set.len());
            if take < params.patches_per_image {
                clamped_images += 1;
            }
            let mut idx = sample(&mut rng, set.len(), take).into_vec();
            idx.sort_unstable();
            pooled.extend(idx.into_iter().map(|i| set.patches[i].clone()));
        }
        if pooled.is_empty() {
            return Err(Error::Training {
                class,
                msg: "no usable (non-flat) training patches".into(),
            });
        }
        let mut coeffs: Vec<SteerableCoeffs> = pooled
            .par_iter()
            .map(|p| basis.analyze(p))
            .collect::<Result<_>>()?;
        if mode == TrainMode::StandardAug {
            for c in coeffs.iter_mut() {
                let deg = TEST_ANGLES_DEG[rng.random_range(0..TEST_ANGLES_DEG.len())];
                *c = steer(c, &basis.phases_for_angle(deg.to_radians()))?;
            }
        }
        let config = LearnConfig::new(
            params.atoms,
            params.sparsity,
            params.rotations_for(mode),
            params.iterations,
        )
        .with_seed(class_seed(seed, class));
        let (dict, _, report) = match mode {
            TrainMode::Rotational => rksvd_learn(&basis, &coeffs, &config),
            _ => ksvd_learn(&basis, &coeffs, &config),
        }
        .map_err(|e| Error::Training {
            class,
            msg: e.to_string(),
        })?;
        dicts.push(dict);
        reports.push(report);
    }
    Ok(TrainedDicts {
        dicts,
        reports,
        clamped_images,
    })
}

/// Per-class coders over a shared basis.
pub struct Labeler {
    basis: SteerableBasis,
    coders: Vec<Coder>,
    sparsity: usize,
}

impl Labeler {
    pub fn new(dicts: &[Dictionary], sparsity: usize) -> Result<Self> {
        let first = dicts
            .first()
            .ok_or_else(|| Error::invalid("no class dictionaries"))?;
        if dicts.iter().any(|d| d.spec != first.spec) {
            return Err(Error::invalid(
                "class dictionaries do not share one basis spec",
            ));
        }
        let basis = first.basis()?;
        let coders = dicts
            .iter()
            .map(|d| Coder::new(&basis, d, d.spec.r))
            .collect::<Result<_>>()?;
        Ok(Labeler {
            basis,
            coders,
            sparsity,
        })
    }

    pub fn basis(&self) -> &SteerableBasis {
        &self.basis
    }

    pub fn classes(&self) -> usize {
        self.coders.len()
    }

    /// Label of a packed coefficient vector: the class with the smallest
    /// coding error, lowest index on ties.
    pub fn label_packed(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, coder) in self.coders.iter().enumerate() {
            let (_, err) = coder.omp_packed(x, self.sparsity);
            if err < best.1 {
                best = (c, err);
            }
        }
        best.0
    }

    pub fn label(&self, x: &SteerableCoeffs) -> Result<usize> {
        if x.len() != self.basis.cols() {
            return Err(Error::invalid(format!(
                "coefficient vector has {} entries, basis has {}",
                x.len(),
                self.basis.cols()
            )));
        }
        Ok(self.label_packed(&self.basis.packed_layout().pack(x)))
    }

    /// Normalized label counts over packed patches.
    pub fn histogram_packed(&self, patches: &[Vec<f64>]) -> Result<Vec<f64>> {
        if patches.is_empty() {
            return Err(Error::invalid(
                "histogram of an image with no usable patches",
            ));
        }
        let labels: Vec<usize> = patches.par_iter().map(|x| self.label_packed(x)).collect();
        let mut h = vec![0.0; self.classes()];
        for l in labels {
            h[l] += 1.0;
        }
        let total = patches.len() as f64;
        h.iter_mut().for_each(|v| *v /= total);
        Ok(h)
    }

    /// Packed coefficients of the normalized patches of `image`.
    pub fn image_patches(&self, image: &Image, stride: usize) -> Result<Vec<Vec<f64>>> {
        let set = extract_patches(image, self.basis.n(), stride, true)?;
        let layout = self.basis.packed_layout();
        set.patches
            .par_iter()
            .map(|p| self.basis.analyze(p).map(|c| layout.pack(&c)))
            .collect()
    }

    pub fn image_histogram(&self, image: &Image, stride: usize) -> Result<Vec<f64>> {
        self.histogram_packed(&self.image_patches(image, stride)?)
    }
}

/// Class whose dictionary codes `x` with the smallest error.
pub fn patch_label(x: &SteerableCoeffs, dicts: &[Dictionary], sparsity: usize) -> Result<usize> {
    Labeler::new(dicts, sparsity)?.label(x)
}

/// `Σ (a−b)²/(a+b)`, with `0/0` terms contributing 0.
pub fn chi2(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "chi2 of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::invalid("chi2 needs non-negative entries"));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x + y > 0.0 {
                (x - y).powi(2) / (x + y)
            } else {
                0.0
            }
        })
        .sum())
}

/// Index of the χ²-nearest feature, lowest index on ties.
pub fn nearest_neighbor(query: &[f64], features: &[Vec<f64>]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in features.iter().enumerate() {
        let d = chi2(query, f)?;
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::invalid("no training features"))
}

/// Trained classifier: class dictionaries plus one histogram per training image.
pub struct ClassifierModel {
    pub params: ClassParams,
    pub mode: TrainMode,
    pub dicts: Vec<Dictionary>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    labeler: Labeler,
}

impl ClassifierModel {
    pub fn from_parts(
        params: ClassParams,
        mode: TrainMode,
        dicts: Vec<Dictionary>,
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::invalid("feature and label counts differ"));
        }
        let labeler = Labeler::new(&dicts, params.sparsity)?;
        if dicts[0].spec.n != params.n {
            return Err(Error::invalid(
                "dictionary N does not match the model parameters",
            ));
        }
        if let Some(f) = features.iter().find(|f| f.len() != dicts.len()) {
            return Err(Error::invalid(format!(
                "feature of length {} for {} classes",
                f.len(),
                dicts.len()
            )));
        }
        if labels.iter().any(|&l| l >= dicts.len()) {
            return Err(Error::invalid("training label outside the class range"));
        }
        Ok(ClassifierModel {
            params,
            mode,
            dicts,
            features,
            labels,
            labeler,
        })
    }

    /// Learn class dictionaries and the histogram of every training image.
    pub fn train(
        train: &LabeledImageSet,
        params: &ClassParams,
        mode: TrainMode,
        seed: u64,
    ) -> Result<Self> {
        let trained = train_class_dicts(train, params, mode, seed)?;
        let labeler = Labeler::new(&trained.dicts, params.sparsity)?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for item in train.split(Split::Train) {
            features.push(labeler.image_histogram(&item.image, params.stride)?);
            labels.push(item.label);
        }
        Ok(ClassifierModel {
            params: params.clone(),
            mode,
            dicts: trained.dicts,
            features,
            labels,
            labeler,
        })
    }

    pub fn labeler(&self) -> &Labeler {
        &self.labeler
    }

    pub fn classes(&self) -> usize {
        self.dicts.len()
    }

    pub fn image_histogram(&self, image: &Image) -> Result<Vec<f64>> {
        self.labeler.image_histogram(image, self.params.stride)
    }

    pub fn classify_histogram(&self, h: &[f64]) -> Result<usize> {
        Ok(self.labels[nearest_neighbor(h, &self.features)?])
    }

    pub fn classify(&self, image: &Image) -> Result<usize> {
        self.classify_histogram(&self.image_histogram(image)?)
    }

    /// Fraction of test-split images classified correctly.
    pub fn test_accuracy(&self, set: &LabeledImageSet) -> Result<f64> {
        let items: Vec<_> = set.split(Split::Test).collect();
        if items.is_empty() {
            return Err(Error::invalid("no test images"));
        }
        let mut correct = 0;
        for item in &items {
            if self.classify(&item.image)? == item.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / items.len() as f64)
    }
}

/// Histogram of `image` under `model`.
pub fn image_histogram(image: &Image, model: &ClassifierModel) -> Result<Vec<f64>> {
    model.image_histogram(image)
}

/// Nearest-training-histogram label of `image`.
pub fn classify(image: &Image, model: &ClassifierModel) -> Result<usize> {
    model.classify(image)
}
