//! Discrete steerable basis: sampled annular circular harmonics, biorthogonal
//! analysis, diagonal steering and interpolation-based rotation baselines.

pub(crate) mod export;
pub(crate) mod interp;
mod packed;
mod steering;

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use export::{read_basis_text, write_basis_text, BasisText};
pub use interp::{build_interp_rotation, InterpMethod, SparseOperator};
pub use packed::{PackedLayout, PackedRotation, PackedSteering};
pub use steering::{steer, SteeringPhases};

/// Pixel offset `(dy, dx)` relative to the patch center.
pub type Offset = (i32, i32);

/// Eigenvalue window every default within-annulus Gram block must satisfy.
pub const GRAM_EIG_MIN: f64 = 0.1;
pub const GRAM_EIG_MAX: f64 = 2.0;

/// All offsets of an `n × n` grid inside the disk of radius `n/2`, row-major.
///
/// This ordering is the patch vectorization used everywhere in the crate.
pub fn disk_mask(n: usize) -> Result<Vec<Offset>> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::invalid(format!(
            "patch diameter must be odd and >= 3, got {n}"
        )));
    }
    let half = ((n - 1) / 2) as i32;
    let r2 = (n as f64 / 2.0).powi(2);
    let mut out = Vec::new();
    for dy in -half..=half {
        for dx in -half..=half {
            if f64::from(dx * dx + dy * dy) <= r2 {
                out.push((dy, dx));
            }
        }
    }
    Ok(out)
}

/// Construction parameters for a [`SteerableBasis`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisSpec {
    /// Patch diameter (odd).
    pub n: usize,
    /// Number of annuli.
    pub s: usize,
    /// Maximum frequency per annulus; `None` selects the default cutoffs.
    pub t: Option<Vec<usize>>,
    /// Rotation discretization used for learning.
    pub r: usize,
}

impl BasisSpec {
    /// Spec with `S = floor(N/2)`, default cutoffs and `R = 1`.
    pub fn new(n: usize) -> Self {
        BasisSpec {
            n,
            s: (n / 2).max(1),
            t: None,
            r: 1,
        }
    }

    pub fn with_annuli(mut self, s: usize) -> Self {
        self.s = s;
        self
    }

    pub fn with_cutoffs(mut self, t: Vec<usize>) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_rotations(mut self, r: usize) -> Self {
        self.r = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.n % 2 == 0 {
            return Err(Error::invalid(format!(
                "patch diameter must be odd and >= 3, got {}",
                self.n
            )));
        }
        if self.s == 0 {
            return Err(Error::invalid("annulus count must be >= 1"));
        }
        if self.r == 0 {
            return Err(Error::invalid("rotation count must be >= 1"));
        }
        if let Some(t) = &self.t {
            if t.len() != self.s {
                return Err(Error::invalid(format!(
                    "expected {} cutoffs, got {}",
                    self.s,
                    t.len()
                )));
            }
        }
        Ok(())
    }

    /// Ceiling of the half circumference at each annulus mid-radius.
    pub fn ceiling_cutoffs(n: usize, s: usize) -> Vec<usize> {
        (1..=s)
            .map(|si| (PI * (si as f64 - 0.5) * n as f64 / (2.0 * s as f64)).ceil() as usize)
            .collect()
    }

    /// Same spec with every resolved cutoff halved (rounded down).
    pub fn halved(&self, resolved: &[usize]) -> Self {
        BasisSpec {
            t: Some(resolved.iter().map(|t| t / 2).collect()),
            ..self.clone()
        }
    }
}

/// Annulus index (1-based) of a radius, or `None` outside the disk.
fn annulus_of(n: usize, s: usize, radius: f64) -> Option<usize> {
    let outer = n as f64 / 2.0;
    if radius > outer {
        return None;
    }
    let width = outer / s as f64;
    let idx = (radius / width).floor() as usize + 1;
    Some(idx.min(s))
}

/// One annulus worth of columns.
#[derive(Clone, Debug)]
struct AnnulusBlock {
    s: usize,
    tmax: usize,
    /// Indices into the disk mask.
    pixels: Vec<usize>,
    /// `pixels.len() × cols` sampled (normalized) harmonics.
    samples: DMatrix<Complex64>,
    chol: Cholesky<Complex64, Dyn>,
    col_start: usize,
}

impl AnnulusBlock {
    fn cols(&self) -> usize {
        2 * self.tmax + 1
    }
}

/// `None` marks the center pixel, where only `t = 0` is nonzero.
fn sample_block(angles: &[Option<f64>], tmax: usize) -> DMatrix<Complex64> {
    let all = 1.0 / (angles.len() as f64).sqrt();
    let off_center = 1.0 / (angles.iter().filter(|a| a.is_some()).count().max(1) as f64).sqrt();
    let cols = 2 * tmax + 1;
    DMatrix::from_fn(angles.len(), cols, |k, c| {
        let t = c as f64 - tmax as f64;
        let norm = if t == 0.0 { all } else { off_center };
        match angles[k] {
            Some(phi) => Complex64::from_polar(norm, t * phi),
            None if t == 0.0 => Complex64::new(norm, 0.0),
            None => Complex64::new(0.0, 0.0),
        }
    })
}

fn gram_eigen_range(samples: &DMatrix<Complex64>) -> (f64, f64) {
    let gram = samples.adjoint() * samples;
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Sampled annular circular harmonics `φ_{s,t}` stacked column-wise, with a
/// precomputed per-annulus Cholesky factor of the Gram matrix.
#[derive(Clone, Debug)]
pub struct SteerableBasis {
    spec: BasisSpec,
    cutoffs: Vec<usize>,
    mask: Vec<Offset>,
    blocks: Vec<AnnulusBlock>,
    labels: Vec<(usize, i32)>,
    dropped: usize,
}

impl SteerableBasis {
    pub fn new(spec: &BasisSpec) -> Result<Self> {
        spec.validate()?;
        let mask = disk_mask(spec.n)?;
        let mut pixels_by_annulus = vec![Vec::new(); spec.s];
        for (i, &(dy, dx)) in mask.iter().enumerate() {
            let radius = f64::from(dx * dx + dy * dy).sqrt();
            if let Some(s) = annulus_of(spec.n, spec.s, radius) {
                pixels_by_annulus[s - 1].push(i);
            }
        }

        let explicit = spec.t.is_some();
        let requested = spec
            .t
            .clone()
            .unwrap_or_else(|| BasisSpec::ceiling_cutoffs(spec.n, spec.s));

        let mut blocks = Vec::new();
        let mut labels = Vec::new();
        let mut cutoffs = Vec::with_capacity(spec.s);
        let mut dropped = 0;
        for (si, pixels) in pixels_by_annulus.into_iter().enumerate() {
            let s = si + 1;
            let wanted = requested[si];
            if pixels.is_empty() {
                dropped += 2 * wanted + 1;
                cutoffs.push(0);
                continue;
            }
            let angles: Vec<Option<f64>> = pixels
                .iter()
                .map(|&i| match mask[i] {
                    (0, 0) => None,
                    (dy, dx) => Some(f64::from(dy).atan2(f64::from(dx))),
                })
                .collect();

            let mut tmax = wanted;
            let mut samples = sample_block(&angles, tmax);
            if !explicit {
                // Lower the cutoff until the block is well conditioned; lattice
                // symmetries alias high frequencies on small annuli.
                loop {
                    let (lo, hi) = gram_eigen_range(&samples);
                    if (lo >= GRAM_EIG_MIN && hi < GRAM_EIG_MAX) || tmax == 0 {
                        break;
                    }
                    tmax -= 1;
                    samples = sample_block(&angles, tmax);
                }
            }
            let gram = samples.adjoint() * &samples;
            let chol = Cholesky::new(gram).ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "annulus {s}: Gram block with T = {tmax} is singular on {} pixels",
                    pixels.len()
                ))
            })?;
            if explicit {
                let (lo, _) = gram_eigen_range(&samples);
                if lo < 1e-10 {
                    return Err(Error::InvalidSpec(format!(
                        "annulus {s}: Gram block with T = {tmax} is numerically singular (λ_min = {lo:e})"
                    )));
                }
            }
            dropped += 2 * (wanted - tmax);
            let col_start = labels.len();
            for c in 0..=2 * tmax {
                labels.push((s, c as i32 - tmax as i32));
            }
            cutoffs.push(tmax);
            blocks.push(AnnulusBlock {
                s,
                tmax,
                pixels,
                samples,
                chol,
                col_start,
            });
        }
        if labels.is_empty() {
            return Err(Error::InvalidSpec("every basis column was dropped".into()));
        }
        Ok(SteerableBasis {
            spec: spec.clone(),
            cutoffs,
            mask,
            blocks,
            labels,
            dropped,
        })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    /// Patch diameter.
    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Resolved per-annulus cutoffs (0 for empty annuli).
    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    /// Spec with the resolved cutoffs filled in.
    pub fn resolved_spec(&self) -> BasisSpec {
        BasisSpec {
            t: Some(self.cutoffs.clone()),
            ..self.spec.clone()
        }
    }

    pub fn mask(&self) -> &[Offset] {
        &self.mask
    }

    /// Number of pixels (rows of Φ).
    pub fn rows(&self) -> usize {
        self.mask.len()
    }

    /// Number of basis columns `B`.
    pub fn cols(&self) -> usize {
        self.labels.len()
    }

    /// `(s, t)` label of every column.
    pub fn labels(&self) -> &[(usize, i32)] {
        &self.labels
    }

    /// Columns removed relative to the requested cutoffs (empty annuli and
    /// conditioning reductions).
    pub fn dropped_columns(&self) -> usize {
        self.dropped
    }

    /// Dense copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        let (s, _) = self.labels[j];
        let block = self.blocks.iter().find(|b| b.s == s).expect("label block");
        let c = j - block.col_start;
        for (k, &p) in block.pixels.iter().enumerate() {
            out[p] = block.samples[(k, c)];
        }
        out
    }

    /// Dense `Φ*Φ`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        let b = self.cols();
        let cols: Vec<Vec<Complex64>> = (0..b).map(|j| self.column(j)).collect();
        DMatrix::from_fn(b, b, |i, j| {
            cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(a, c)| a.conj() * c)
                .sum()
        })
    }

    /// Eigenvalue range of each within-annulus Gram block, in annulus order.
    pub fn block_eigen_ranges(&self) -> Vec<(usize, f64, f64)> {
        self.blocks
            .iter()
            .map(|b| {
                let (lo, hi) = gram_eigen_range(&b.samples);
                (b.s, lo, hi)
            })
            .collect()
    }

    /// Biorthogonal coordinates `(Φ*Φ)⁻¹Φ*x` of a real patch.
    pub fn analyze(&self, patch: &[f64]) -> Result<SteerableCoeffs> {
        if patch.len() != self.rows() {
            return Err(Error::invalid(format!(
                "patch has {} samples, basis expects {}",
                patch.len(),
                self.rows()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols()];
        for block in &self.blocks {
            let local = DVector::from_iterator(
                block.pixels.len(),
                block.pixels.iter().map(|&p| Complex64::new(patch[p], 0.0)),
            );
            let rhs = block.samples.ad_mul(&local);
            let sol = block.chol.solve(&rhs);
            out[block.col_start..block.col_start + block.cols()].copy_from_slice(sol.as_slice());
        }
        Ok(SteerableCoeffs(out))
    }

    /// Complex synthesis `Φ·c`.
    pub fn synthesize_complex(&self, coeffs: &SteerableCoeffs) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.cols() {
            return Err(Error::invalid(format!(
                "coefficient vector has {} entries, basis has {} columns",
                coeffs.len(),
                self.cols()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        for block in &self.blocks {
            let local = DVector::from_column_slice(
                &coeffs.0[block.col_start..block.col_start + block.cols()],
            );
            let vals = &block.samples * local;
            for (k, &p) in block.pixels.iter().enumerate() {
                out[p] = vals[k];
            }
        }
        Ok(out)
    }

    /// Real patch `Re(Φ·c)`. Conjugate-symmetric input must synthesize to a
    /// real patch; a large imaginary residual is reported as an error.
    pub fn synthesize(&self, coeffs: &SteerableCoeffs) -> Result<Vec<f64>> {
        let full = self.synthesize_complex(coeffs)?;
        let max_im = full.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let scale = coeffs.norm().max(1.0);
        if max_im > 1e-6 * scale && self.is_conjugate_symmetric(coeffs, 1e-10 * scale) {
            return Err(Error::Consistency(format!(
                "imaginary residual {max_im:e} after synthesizing conjugate-symmetric coefficients"
            )));
        }
        Ok(full.into_iter().map(|z| z.re).collect())
    }

    /// Index of the column with label `(s, -t)` for every column.
    pub fn partner_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .map(|(j, &(_, t))| (j as i64 - 2 * i64::from(t)) as usize)
            .collect()
    }

    /// Whether entry `(s,-t)` equals the conjugate of `(s,t)` for every column.
    pub fn is_conjugate_symmetric(&self, coeffs: &SteerableCoeffs, tol: f64) -> bool {
        self.conjugate_asymmetry(coeffs) <= tol
    }

    /// `max_j |c[(s,-t)] - conj(c[(s,t)])|`.
    pub fn conjugate_asymmetry(&self, coeffs: &SteerableCoeffs) -> f64 {
        self.partner_indices()
            .iter()
            .enumerate()
            .map(|(j, &p)| (coeffs.0[p] - coeffs.0[j].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Steering phases `e^{-i t 2πr/R}` for discrete rotation `r` of `R`.
    pub fn steering_phases(&self, r: usize, rotations: usize) -> Result<SteeringPhases> {
        SteeringPhases::discrete(&self.labels, r, rotations)
    }

    /// Steering phases `e^{-i t θ}` for a continuous angle.
    pub fn phases_for_angle(&self, angle: f64) -> SteeringPhases {
        SteeringPhases::continuous(&self.labels, angle)
    }

    /// Layout mapping conjugate-symmetric coefficients to real vectors.
    pub fn packed_layout(&self) -> PackedLayout {
        PackedLayout::new(&self.labels)
    }

    /// Rotate a real patch by `angle` radians.
    pub fn rotate_patch(
        &self,
        patch: &[f64],
        angle: f64,
        method: RotationMethod,
    ) -> Result<Vec<f64>> {
        match method {
            RotationMethod::Steer => {
                let coeffs = self.analyze(patch)?;
                let steered = steer(&coeffs, &self.phases_for_angle(angle))?;
                self.synthesize(&steered)
            }
            RotationMethod::Nearest | RotationMethod::Bicubic => {
                if patch.len() != self.rows() {
                    return Err(Error::invalid(format!(
                        "patch has {} samples, mask has {}",
                        patch.len(),
                        self.rows()
                    )));
                }
                let interp = if method == RotationMethod::Nearest {
                    InterpMethod::Nearest
                } else {
                    InterpMethod::Bicubic
                };
                let op = build_interp_rotation(self.n(), angle, interp)?;
                Ok(op.apply(patch))
            }
        }
    }
}

/// Coordinates of a patch in a [`SteerableBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct SteerableCoeffs(pub Vec<Complex64>);

impl SteerableCoeffs {
    pub fn zeros(len: usize) -> Self {
        SteerableCoeffs(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Re⟨self, other⟩`.
    pub fn real_dot(&self, other: &SteerableCoeffs) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }
}

/// How [`SteerableBasis::rotate_patch`] rotates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationMethod {
    Steer,
    Nearest,
    Bicubic,
}

impl std::str::FromStr for RotationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steer" => Ok(RotationMethod::Steer),
            "nearest" => Ok(RotationMethod::Nearest),
            "bicubic" => Ok(RotationMethod::Bicubic),
            other => Err(Error::invalid(format!("unknown rotation method `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_patch(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn mask_sizes() {
        assert_eq!(disk_mask(11).unwrap().len(), 97);
        assert_eq!(disk_mask(3).unwrap().len(), 9);
        // brute-force lattice count for radius 3.5
        let mut count = 0;
        for y in -3i32..=3 {
            for x in -3i32..=3 {
                if ((x * x + y * y) as f64).sqrt() <= 3.5 {
                    count += 1;
                }
            }
        }
        assert_eq!(disk_mask(7).unwrap().len(), count);
    }

    #[test]
    fn mask_rejects_even_and_small() {
        assert!(disk_mask(4).is_err());
        assert!(disk_mask(1).is_err());
        assert!(disk_mask(0).is_err());
    }

    #[test]
    fn mask_is_row_major() {
        let m = disk_mask(5).unwrap();
        assert!(m.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ceiling_rule_for_n11() {
        assert_eq!(BasisSpec::ceiling_cutoffs(11, 5), vec![2, 6, 9, 13, 16]);
        let b: usize = BasisSpec::ceiling_cutoffs(11, 5)
            .iter()
            .map(|t| 2 * t + 1)
            .sum();
        assert_eq!(b, 97);
    }

    #[test]
    fn default_cutoffs_are_conditioned() {
        let basis = SteerableBasis::new(&BasisSpec::new(11)).unwrap();
        assert_eq!(basis.rows(), 97);
        assert_eq!(basis.cutoffs(), &[1, 3, 9, 11, 16]);
        assert_eq!(basis.cols(), 85);
        assert_eq!(basis.dropped_columns(), 12);
        for (_, lo, hi) in basis.block_eigen_ranges() {
            assert!(lo >= GRAM_EIG_MIN && hi < GRAM_EIG_MAX);
        }
    }

    #[test]
    fn single_constant_column() {
        let spec = BasisSpec::new(3).with_annuli(1).with_cutoffs(vec![0]);
        let basis = SteerableBasis::new(&spec).unwrap();
        assert_eq!(basis.cols(), 1);
        let col = basis.column(0);
        for z in col {
            assert!((z.re - 1.0 / 3.0).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn explicit_singular_cutoffs_rejected() {
        // inner annulus of N=11 has 5 pixels; t = ±2 alias exactly
        let spec = BasisSpec::new(11).with_cutoffs(vec![2, 3, 9, 11, 16]);
        assert!(matches!(
            SteerableBasis::new(&spec),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn empty_annuli_dropped() {
        let spec = BasisSpec::new(5).with_annuli(8).with_cutoffs(vec![0; 8]);
        let basis = SteerableBasis::new(&spec).unwrap();
        assert!(basis.dropped_columns() > 0);
        assert!(basis.cols() < 8);
    }

    #[test]
    fn gram_is_block_diagonal() {
        let basis = SteerableBasis::new(&BasisSpec::new(7)).unwrap();
        let g = basis.gram();
        let labels = basis.labels();
        for i in 0..basis.cols() {
            for j in 0..basis.cols() {
                if labels[i].0 != labels[j].0 {
                    assert_eq!(g[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
            assert!((g[(i, i)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analyze_one_hot_t0_column() {
        let basis = SteerableBasis::new(&BasisSpec::new(11)).unwrap();
        for (j, &(_, t)) in basis.labels().iter().enumerate() {
            if t != 0 {
                continue;
            }
            let patch: Vec<f64> = basis.column(j).iter().map(|z| z.re).collect();
            let c = basis.analyze(&patch).unwrap();
            for (i, z) in c.0.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((z - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn analyze_length_mismatch() {
        let basis = SteerableBasis::new(&BasisSpec::new(5)).unwrap();
        assert!(basis.analyze(&[0.0; 3]).is_err());
        assert!(basis.synthesize(&SteerableCoeffs::zeros(2)).is_err());
    }

    #[test]
    fn zero_round_trip() {
        let basis = SteerableBasis::new(&BasisSpec::new(7)).unwrap();
        let c = basis.analyze(&vec![0.0; basis.rows()]).unwrap();
        assert!(c.norm() == 0.0);
        let x = basis
            .synthesize(&SteerableCoeffs::zeros(basis.cols()))
            .unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_matches_least_squares_oracle() {
        // Independent route: real normal equations on the realified Φ.
        let basis = SteerableBasis::new(&BasisSpec::new(7)).unwrap();
        let x = random_patch(basis.rows(), 3);
        let recon = basis.synthesize(&basis.analyze(&x).unwrap()).unwrap();

        let rows = basis.rows();
        let cols = basis.cols();
        let mut a = DMatrix::<f64>::zeros(rows, 2 * cols);
        for j in 0..cols {
            for (i, z) in basis.column(j).iter().enumerate() {
                a[(i, 2 * j)] = z.re;
                a[(i, 2 * j + 1)] = z.im;
            }
        }
        let svd = a.clone().svd(true, true);
        let coef = svd.solve(&DVector::from_column_slice(&x), 1e-10).unwrap();
        let oracle = &a * coef;
        for i in 0..rows {
            assert!((oracle[i] - recon[i]).abs() < 1e-9, "pixel {i}");
        }
    }

    #[test]
    fn reconstruct_on_span() {
        let basis = SteerableBasis::new(&BasisSpec::new(9)).unwrap();
        let x = random_patch(basis.rows(), 9);
        let proj = basis.synthesize(&basis.analyze(&x).unwrap()).unwrap();
        let again = basis.synthesize(&basis.analyze(&proj).unwrap()).unwrap();
        for (a, b) in proj.iter().zip(&again) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn analysis_is_conjugate_symmetric() {
        let basis = SteerableBasis::new(&BasisSpec::new(11)).unwrap();
        let c = basis.analyze(&random_patch(basis.rows(), 1)).unwrap();
        assert!(basis.is_conjugate_symmetric(&c, 1e-10));
    }

    #[test]
    fn non_symmetric_input_keeps_real_part() {
        let basis = SteerableBasis::new(&BasisSpec::new(5)).unwrap();
        let mut c = SteerableCoeffs::zeros(basis.cols());
        let j = basis.labels().iter().position(|&(_, t)| t == 0).unwrap();
        c.0[j] = Complex64::new(0.0, 1.0);
        // not conjugate-symmetric (t=0 entry must be real): real part only
        let x = basis.synthesize(&c).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn one_hot_t0_synthesizes_column() {
        let basis = SteerableBasis::new(&BasisSpec::new(7)).unwrap();
        let j = basis
            .labels()
            .iter()
            .position(|&(s, t)| s == 2 && t == 0)
            .unwrap();
        let mut c = SteerableCoeffs::zeros(basis.cols());
        c.0[j] = Complex64::new(1.0, 0.0);
        let x = basis.synthesize(&c).unwrap();
        for (v, z) in x.iter().zip(basis.column(j)) {
            assert!((v - z.re).abs() < 1e-15);
        }
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        (d / b.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    fn sample(basis: &SteerableBasis, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        basis
            .mask()
            .iter()
            .map(|&(dy, dx)| f(f64::from(dx), f64::from(dy)))
            .collect()
    }

    fn random_symmetric(basis: &SteerableBasis, seed: u64) -> SteerableCoeffs {
        let layout = basis.packed_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..layout.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        layout.unpack(&v)
    }

    #[test]
    fn analysis_inverts_synthesis() {
        for n in [3, 5, 7, 11, 15] {
            let basis = SteerableBasis::new(&BasisSpec::new(n)).unwrap();
            for seed in 0..3 {
                let c = random_symmetric(&basis, seed);
                let back = basis.analyze(&basis.synthesize(&c).unwrap()).unwrap();
                let err =
                    c.0.iter()
                        .zip(&back.0)
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max);
                assert!(err < 1e-10, "N={n}: {err}");
            }
        }
    }

    #[test]
    fn rotate_zero_angle_is_identity() {
        let basis = SteerableBasis::new(&BasisSpec::new(11)).unwrap();
        let x = random_patch(basis.rows(), 3);
        let proj = basis.synthesize(&basis.analyze(&x).unwrap()).unwrap();
        let steered = basis.rotate_patch(&x, 0.0, RotationMethod::Steer).unwrap();
        for (a, b) in steered.iter().zip(&proj) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(
            basis
                .rotate_patch(&x, 0.0, RotationMethod::Nearest)
                .unwrap(),
            x
        );
    }

    #[test]
    fn quarter_turn_steer_matches_pixel_permutation() {
        // oracle: (dy, dx) -> (-dx, dy) maps the disk onto itself
        let basis = SteerableBasis::new(&BasisSpec::new(11)).unwrap();
        let x = random_patch(basis.rows(), 5);
        let proj = basis.synthesize(&basis.analyze(&x).unwrap()).unwrap();
        let steered = basis
            .rotate_patch(&proj, FRAC_PI_2, RotationMethod::Steer)
            .unwrap();
        let moved = basis
            .rotate_patch(&proj, FRAC_PI_2, RotationMethod::Nearest)
            .unwrap();
        for (a, b) in steered.iter().zip(&moved) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn annulus_constant_patch_is_rotation_invariant() {
        let basis = SteerableBasis::new(&BasisSpec::new(11)).unwrap();
        let x = sample(&basis, |x, y| {
            let r = (x * x + y * y).sqrt();
            annulus_of(11, 5, r).map_or(0.0, |s| (s as f64).cos())
        });
        for angle in [0.3, 1.7, 4.0] {
            let y = basis
                .rotate_patch(&x, angle, RotationMethod::Steer)
                .unwrap();
            assert!(rel_diff(&y, &x) < 1e-12);
        }
    }

    #[test]
    fn radial_gaussian_steers_close_to_itself() {
        // pixels in one annulus sit at different radii, so a smooth radial
        // profile leaks into the lattice-symmetric t = 4k components
        let n = 51;
        let basis = SteerableBasis::new(&BasisSpec::new(n)).unwrap();
        let sigma = n as f64 / 4.0;
        let x = sample(&basis, |x, y| {
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        });
        let at_zero = basis.rotate_patch(&x, 0.0, RotationMethod::Steer).unwrap();
        for angle in [0.3, 1.0, 2.5] {
            let y = basis
                .rotate_patch(&x, angle, RotationMethod::Steer)
                .unwrap();
            assert!(rel_diff(&y, &at_zero) < 0.04, "angle {angle}");
        }
    }

    #[test]
    fn steering_tracks_bicubic_on_smooth_ridge() {
        let n = 51;
        let basis = SteerableBasis::new(&BasisSpec::new(n)).unwrap();
        let (w, s) = (n as f64 / 3.0, 2.0);
        let x = sample(&basis, |x, y| {
            let across = 0.6 * x + 0.8 * y;
            (-across * across / (2.0 * s * s) - (x * x + y * y) / (2.0 * w * w)).exp()
        });
        let angle = (100.0 + 2f64.sqrt()).to_radians();
        let cubic = basis
            .rotate_patch(&x, angle, RotationMethod::Bicubic)
            .unwrap();
        let steer = rel_diff(
            &basis
                .rotate_patch(&x, angle, RotationMethod::Steer)
                .unwrap(),
            &cubic,
        );
        let nearest = rel_diff(
            &basis
                .rotate_patch(&x, angle, RotationMethod::Nearest)
                .unwrap(),
            &cubic,
        );
        assert!(steer < 0.10, "{steer}");
        assert!(nearest > steer, "{nearest} vs {steer}");
    }

    #[test]
    fn method_parse() {
        assert_eq!(
            "steer".parse::<RotationMethod>().unwrap(),
            RotationMethod::Steer
        );
        assert!("lanczos".parse::<RotationMethod>().is_err());
    }
}
