//! Coding-error sweeps over dictionary size, sparsity, iterations and angles.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coding::{ksvd_learn, rksvd_learn, LearnConfig, LearnReport, MSE_SCALE};
use crate::error::{Error, Result};
use crate::patches::{extract_patches, Image};
use crate::steerbasis::export::fmt17;
use crate::steerbasis::{BasisSpec, SteerableBasis, SteerableCoeffs};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodingMethod {
    Ksvd,
    Rksvd,
}

impl CodingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CodingMethod::Ksvd => "ksvd",
            CodingMethod::Rksvd => "rksvd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: CodingMethod,
    pub m: usize,
    pub k: usize,
    pub mse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergencePoint {
    /// 0 is the random initial dictionary.
    pub iter: usize,
    pub mse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnglePoint {
    pub r: usize,
    pub mse: f64,
}

fn report_mse(objective: f64, patches: usize) -> f64 {
    MSE_SCALE * objective / patches as f64
}

fn final_mse(report: &LearnReport, patches: usize) -> f64 {
    report_mse(
        *report.objectives.last().expect("at least one iteration"),
        patches,
    )
}

/// Normalized stride-1 patches of `image` in steerable coordinates, keeping a
/// seeded subset of at most `cap` of them (in image order).
pub fn image_coefficients(
    image: &Image,
    basis: &SteerableBasis,
    cap: Option<usize>,
    seed: u64,
) -> Result<Vec<SteerableCoeffs>> {
    let set = extract_patches(image, basis.n(), 1, true)?;
    let mut patches = set.patches;
    if let Some(cap) = cap {
        if cap < patches.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut keep = rand::seq::index::sample(&mut rng, patches.len(), cap).into_vec();
            keep.sort_unstable();
            patches = keep
                .into_iter()
                .map(|i| std::mem::take(&mut patches[i]))
                .collect();
        }
    }
    if patches.is_empty() {
        return Err(Error::invalid("image yields no non-flat patches"));
    }
    patches.par_iter().map(|p| basis.analyze(p)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodingSweepConfig {
    pub n: usize,
    pub atoms: Vec<usize>,
    pub sparsity: Vec<usize>,
    pub rotations: usize,
    pub iterations: usize,
    /// Subsample the image's patches to at most this many.
    pub cap: Option<usize>,
    pub seed: u64,
}

/// K-SVD and rotational K-SVD MSE for every `(M, K)` on one image.
pub fn sweep_coding(image: &Image, config: &CodingSweepConfig) -> Result<Vec<SweepRow>> {
    if config.atoms.is_empty() || config.sparsity.is_empty() {
        return Err(Error::invalid(
            "coding sweep needs at least one M and one K",
        ));
    }
    let basis = SteerableBasis::new(&BasisSpec::new(config.n))?;
    let coeffs = image_coefficients(image, &basis, config.cap, config.seed)?;
    let mut rows = Vec::new();
    for &m in &config.atoms {
        for &k in &config.sparsity {
            let learn =
                LearnConfig::new(m, k, config.rotations, config.iterations).with_seed(config.seed);
            let (_, _, standard) = ksvd_learn(&basis, &coeffs, &learn)?;
            let (_, _, rotational) = rksvd_learn(&basis, &coeffs, &learn)?;
            for (method, report) in [
                (CodingMethod::Ksvd, standard),
                (CodingMethod::Rksvd, rotational),
            ] {
                rows.push(SweepRow {
                    method,
                    m,
                    k,
                    mse: final_mse(&report, coeffs.len()),
                });
            }
        }
    }
    Ok(rows)
}

/// MSE of the random initial dictionary followed by the MSE after each of
/// `max_iters` learning rounds.
pub fn sweep_convergence(
    basis: &SteerableBasis,
    patches: &[SteerableCoeffs],
    config: &LearnConfig,
) -> Result<Vec<ConvergencePoint>> {
    let (_, _, report) = rksvd_learn(basis, patches, config)?;
    let mut out = vec![ConvergencePoint {
        iter: 0,
        mse: report_mse(report.initial_objective, patches.len()),
    }];
    out.extend(
        report
            .objectives
            .iter()
            .enumerate()
            .map(|(i, &o)| ConvergencePoint {
                iter: i + 1,
                mse: report_mse(o, patches.len()),
            }),
    );
    Ok(out)
}

/// Final MSE of one full learning run per rotation count.
pub fn sweep_angles(
    basis: &SteerableBasis,
    patches: &[SteerableCoeffs],
    config: &LearnConfig,
    rotations: &[usize],
) -> Result<Vec<AnglePoint>> {
    rotations
        .iter()
        .map(|&r| {
            let learn = LearnConfig {
                rotations: r,
                ..config.clone()
            };
            let (_, _, report) = rksvd_learn(basis, patches, &learn)?;
            Ok(AnglePoint {
                r,
                mse: final_mse(&report, patches.len()),
            })
        })
        .collect()
}

fn write(path: &Path, csv: String) -> Result<()> {
    fs::write(path, csv).map_err(|e| Error::io(path, e))
}

pub fn write_sweep_coding_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut csv = String::from("method,M,K,mse\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.method.as_str(),
            r.m,
            r.k,
            fmt17(r.mse)
        );
    }
    write(path.as_ref(), csv)
}

pub fn write_convergence_csv(path: impl AsRef<Path>, points: &[ConvergencePoint]) -> Result<()> {
    let mut csv = String::from("iter,mse\n");
    for p in points {
        let _ = writeln!(csv, "{},{}", p.iter, fmt17(p.mse));
    }
    write(path.as_ref(), csv)
}

pub fn write_angles_csv(path: impl AsRef<Path>, points: &[AnglePoint]) -> Result<()> {
    let mut csv = String::from("R,mse\n");
    for p in points {
        let _ = writeln!(csv, "{},{}", p.r, fmt17(p.mse));
    }
    write(path.as_ref(), csv)
}
