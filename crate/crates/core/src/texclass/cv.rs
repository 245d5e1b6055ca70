//! Hold-out cross-validation over `(N, K, M)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{nearest_neighbor, train_class_dicts, ClassParams, Labeler, TrainMode};
use crate::error::{Error, Result};
use crate::patches::{LabeledImageSet, Split};

/// Which side of the split the configured fraction describes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HoldoutDirection {
    /// The fraction is the share of images classified (held out); the rest
    /// form the nearest-neighbor reference set.
    #[default]
    HoldOut,
    /// The fraction is the share of images kept as the reference set.
    Retain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub m: Vec<usize>,
    pub repeats: usize,
    pub fraction: f64,
    pub direction: HoldoutDirection,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            n: vec![11],
            k: vec![1, 2],
            m: vec![10, 25],
            repeats: 20,
            fraction: 0.88,
            direction: HoldoutDirection::HoldOut,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.k.is_empty() || self.m.is_empty() {
            return Err(Error::invalid("sweep grid lists must be non-empty"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("sweep needs at least one repeat"));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::invalid(format!(
                "hold-out fraction {} not in (0, 1)",
                self.fraction
            )));
        }
        Ok(())
    }

    pub fn settings(&self) -> usize {
        self.n.len() * self.k.len() * self.m.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvRow {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub mode: TrainMode,
    pub accuracy_mean: f64,
    /// Population standard deviation over repeats.
    pub accuracy_std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best: CvRow,
    pub table: Vec<CvRow>,
}

const MAX_RESAMPLES: usize = 100;

/// Accuracy of classifying held-out images by their nearest retained image,
/// once per repeat.
fn repeat_accuracies(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    grid: &SweepGrid,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let total = labels.len();
    let share = (grid.fraction * total as f64).round() as usize;
    let held = match grid.direction {
        HoldoutDirection::HoldOut => share,
        HoldoutDirection::Retain => total - share,
    }
    .clamp(1, total.saturating_sub(1).max(1));
    if total < 2 {
        return Err(Error::invalid(
            "cross-validation needs at least two training images",
        ));
    }
    let mut out = Vec::with_capacity(grid.repeats);
    for _ in 0..grid.repeats {
        let mut attempt = 0;
        let (test, keep) = loop {
            let mut order: Vec<usize> = (0..total).collect();
            order.shuffle(rng);
            let (test, keep) = order.split_at(held);
            if (0..classes).all(|c| keep.iter().any(|&i| labels[i] == c)) {
                break (test.to_vec(), keep.to_vec());
            }
            attempt += 1;
            if attempt >= MAX_RESAMPLES {
                return Err(Error::invalid(format!(
                    "could not draw a split keeping every class after {MAX_RESAMPLES} tries"
                )));
            }
        };
        let reference: Vec<Vec<f64>> = keep.iter().map(|&i| features[i].clone()).collect();
        let mut correct = 0;
        for &i in &test {
            let nn = nearest_neighbor(&features[i], &reference)?;
            if labels[keep[nn]] == labels[i] {
                correct += 1;
            }
        }
        out.push(correct as f64 / test.len() as f64);
    }
    Ok(out)
}

/// Train dictionaries once per `(N, K, M)`, then score repeated random
/// hold-out splits of the training images. The best row maximizes the mean
/// accuracy; ties prefer smaller `M`, then `N`, then `K`.
pub fn cross_validate(
    train: &LabeledImageSet,
    grid: &SweepGrid,
    base: &ClassParams,
    mode: TrainMode,
    seed: u64,
) -> Result<CvResult> {
    grid.validate()?;
    train.validate()?;
    let items: Vec<_> = train.split(Split::Train).collect();
    let labels: Vec<usize> = items.iter().map(|i| i.label).collect();
    let mut table = Vec::with_capacity(grid.settings());
    for &n in &grid.n {
        for &k in &grid.k {
            for &m in &grid.m {
                let params = ClassParams {
                    n,
                    sparsity: k,
                    atoms: m,
                    ..base.clone()
                };
                let trained = train_class_dicts(train, &params, mode, seed)?;
                let labeler = Labeler::new(&trained.dicts, k)?;
                let features = items
                    .iter()
                    .map(|i| labeler.image_histogram(&i.image, params.stride))
                    .collect::<Result<Vec<_>>>()?;
                // same splits for every setting
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_C0DE);
                let acc = repeat_accuracies(&features, &labels, train.classes, grid, &mut rng)?;
                let mean = acc.iter().sum::<f64>() / acc.len() as f64;
                let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / acc.len() as f64;
                table.push(CvRow {
                    n,
                    k,
                    m,
                    mode,
                    accuracy_mean: mean,
                    accuracy_std: var.sqrt(),
                });
            }
        }
    }
    let best = table
        .iter()
        .min_by(|a, b| {
            b.accuracy_mean
                .total_cmp(&a.accuracy_mean)
                .then(a.m.cmp(&b.m))
                .then(a.n.cmp(&b.n))
                .then(a.k.cmp(&b.k))
        })
        .expect("non-empty grid")
        .clone();
    Ok(CvResult { best, table })
}
