//! Sparse coding and dictionary learning in steerable coordinates.

mod io;
mod learn;
mod omp;
mod svd;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::steerbasis::{BasisSpec, SteerableBasis, SteerableCoeffs};

pub use io::{read_codes_csv, read_dictionary, write_codes_csv, write_dictionary};
pub use learn::{
    atom_update, ksvd_learn, reset_unused_atom, rksvd_learn, AtomUpdate, LearnConfig, LearnReport,
};
pub use omp::{Coder, CorrelationMode, OMP_EPS};

/// Reported MSE is this constant times the mean squared residual.
pub const MSE_SCALE: f64 = 100.0;

/// One selected `(atom, rotation, weight)` triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodeEntry {
    pub m: usize,
    pub r: usize,
    pub w: f64,
}

/// Sparse code of one patch: at most `K` entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseCode {
    pub entries: Vec<CodeEntry>,
}

impl SparseCode {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether the code satisfies the sparsity and index constraints.
    pub fn is_feasible(&self, sparsity: usize, atoms: usize, rotations: usize) -> bool {
        self.entries.len() <= sparsity
            && self.entries.iter().all(|e| e.m < atoms && e.r < rotations)
    }
}

/// `M` unit-norm conjugate-symmetric atoms in steerable coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    /// Resolved spec of the basis the atoms live in (`r` is the learning `R`).
    pub spec: BasisSpec,
    pub atoms: Vec<SteerableCoeffs>,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Basis matching `spec`.
    pub fn basis(&self) -> Result<SteerableBasis> {
        SteerableBasis::new(&self.spec)
    }

    /// Check unit norm (1e-10) and conjugate symmetry (1e-8) of every atom.
    pub fn validate(&self, basis: &SteerableBasis) -> Result<()> {
        for (m, a) in self.atoms.iter().enumerate() {
            if a.len() != basis.cols() {
                return Err(Error::invalid(format!(
                    "atom {m} has {} coefficients, basis has {}",
                    a.len(),
                    basis.cols()
                )));
            }
            if (a.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(format!("atom {m} has norm {}", a.norm())));
            }
            if !basis.is_conjugate_symmetric(a, 1e-8) {
                return Err(Error::invalid(format!(
                    "atom {m} is not conjugate-symmetric"
                )));
            }
        }
        Ok(())
    }

    /// Patch-domain atoms `Φ D̂`.
    pub fn synthesize_atoms(&self, basis: &SteerableBasis) -> Result<Vec<Vec<f64>>> {
        self.atoms.iter().map(|a| basis.synthesize(a)).collect()
    }
}

/// Seeded random dictionary: unit normal coefficients, symmetrized, normalized.
pub fn random_dictionary(
    basis: &SteerableBasis,
    atoms: usize,
    rotations: usize,
    seed: u64,
) -> Dictionary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = basis.packed_layout();
    let atoms = (0..atoms)
        .map(|_| random_unit_atom(&layout, basis.cols(), &mut rng))
        .collect();
    Dictionary {
        spec: basis.resolved_spec().with_rotations(rotations),
        atoms,
    }
}

pub(crate) fn random_unit_atom(
    layout: &crate::steerbasis::PackedLayout,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> SteerableCoeffs {
    loop {
        let raw = SteerableCoeffs(
            (0..len)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im)
                })
                .collect(),
        );
        let mut sym = layout.symmetrize(&raw);
        let n = sym.norm();
        if n > 1e-12 {
            sym.0.iter_mut().for_each(|z| *z /= n);
            return sym;
        }
    }
}

/// `Σ w · steer(atom_m, r)`.
pub fn reconstruct(
    basis: &SteerableBasis,
    dict: &Dictionary,
    code: &SparseCode,
    rotations: usize,
) -> Result<SteerableCoeffs> {
    Coder::new(basis, dict, rotations)?.reconstruct(code)
}

/// Greedy `K`-sparse code of `x` over all `M·R` steered atoms.
pub fn omp(
    basis: &SteerableBasis,
    dict: &Dictionary,
    x: &SteerableCoeffs,
    sparsity: usize,
    rotations: usize,
) -> Result<SparseCode> {
    Coder::new(basis, dict, rotations)?.omp(x, sparsity)
}

/// Code every patch independently; returns the codes and the total squared
/// coefficient-domain error.
pub fn code_set(
    basis: &SteerableBasis,
    dict: &Dictionary,
    patches: &[SteerableCoeffs],
    sparsity: usize,
    rotations: usize,
) -> Result<(Vec<SparseCode>, f64)> {
    Coder::new(basis, dict, rotations)?.code_set(patches, sparsity)
}

/// `MSE_SCALE` × mean squared coefficient-domain residual.
pub fn mse(
    basis: &SteerableBasis,
    patches: &[SteerableCoeffs],
    dict: &Dictionary,
    codes: &[SparseCode],
    rotations: usize,
) -> Result<f64> {
    if patches.is_empty() {
        return Err(Error::invalid("MSE of an empty patch set"));
    }
    if patches.len() != codes.len() {
        return Err(Error::invalid(format!(
            "{} patches but {} codes",
            patches.len(),
            codes.len()
        )));
    }
    let coder = Coder::new(basis, dict, rotations)?;
    let mut total = 0.0;
    for (i, (x, code)) in patches.iter().zip(codes).enumerate() {
        let rec = coder.reconstruct(code).map_err(|e| Error::AtPatch {
            index: i,
            source: Box::new(e),
        })?;
        total +=
            x.0.iter()
                .zip(&rec.0)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
    }
    Ok(MSE_SCALE * total / patches.len() as f64)
}
