//! Orthogonal matching pursuit over the rotation-augmented dictionary, in
//! packed (real) steerable coordinates.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{CodeEntry, Dictionary, SparseCode};
use crate::error::{Error, Result};
use crate::steerbasis::{PackedLayout, PackedSteering, SteerableBasis, SteerableCoeffs};

/// Residual and correlation threshold below which OMP stops.
pub const OMP_EPS: f64 = 1e-12;

/// How the `M·R` correlations per OMP step are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CorrelationMode {
    /// One inner product per steered atom.
    Direct,
    /// Group coefficients by frequency; all `R` correlations of one atom are
    /// a length-`R` inverse DFT.
    #[default]
    Fourier,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precomputed state for coding against one dictionary at `R` rotations.
pub struct Coder {
    layout: PackedLayout,
    steering: PackedSteering,
    atoms: Vec<Vec<f64>>,
    /// `M·R` steered atoms, atom-major; only built in direct mode.
    augmented: Vec<Vec<f64>>,
    mode: CorrelationMode,
    fft: Option<Arc<dyn Fft<f64>>>,
    /// Role of each packed slot: a real `t = 0` entry or half of a `t > 0` pair.
    slot_kind: Vec<SlotKind>,
}

#[derive(Clone, Copy, Debug)]
enum SlotKind {
    Zero,
    PairRe(usize),
    PairIm,
}

impl Coder {
    pub fn new(basis: &SteerableBasis, dict: &Dictionary, rotations: usize) -> Result<Self> {
        let layout = basis.packed_layout();
        if dict.atoms.iter().any(|a| a.len() != layout.len()) {
            return Err(Error::invalid(format!(
                "dictionary atoms do not match a basis with {} columns",
                layout.len()
            )));
        }
        let atoms = dict.atoms.iter().map(|a| layout.pack(a)).collect();
        Self::from_packed(layout, atoms, rotations, CorrelationMode::default())
    }

    pub(crate) fn from_packed(
        layout: PackedLayout,
        atoms: Vec<Vec<f64>>,
        rotations: usize,
        mode: CorrelationMode,
    ) -> Result<Self> {
        if rotations == 0 {
            return Err(Error::invalid("rotation count must be >= 1"));
        }
        let steering = layout.steering(rotations);
        let mut slot_kind = Vec::with_capacity(layout.len());
        let freqs = layout.slot_frequencies();
        let mut i = 0;
        while i < freqs.len() {
            if freqs[i] == 0 {
                slot_kind.push(SlotKind::Zero);
                i += 1;
            } else {
                slot_kind.push(SlotKind::PairRe(freqs[i] as usize));
                slot_kind.push(SlotKind::PairIm);
                i += 2;
            }
        }
        let mut coder = Coder {
            layout,
            steering,
            atoms,
            augmented: Vec::new(),
            mode,
            fft: None,
            slot_kind,
        };
        coder.set_mode(mode);
        Ok(coder)
    }

    pub fn with_mode(mut self, mode: CorrelationMode) -> Self {
        self.set_mode(mode);
        self
    }

    fn set_mode(&mut self, mode: CorrelationMode) {
        self.mode = mode;
        match mode {
            CorrelationMode::Direct => {
                let r = self.rotations();
                self.augmented = self
                    .atoms
                    .iter()
                    .flat_map(|a| (0..r).map(move |ri| (a, ri)))
                    .map(|(a, ri)| self.steering.apply(a, ri))
                    .collect();
                self.fft = None;
            }
            CorrelationMode::Fourier => {
                self.augmented.clear();
                self.fft = Some(FftPlanner::new().plan_fft_inverse(self.rotations()));
            }
        }
    }

    pub fn layout(&self) -> &PackedLayout {
        &self.layout
    }

    pub fn steering(&self) -> &PackedSteering {
        &self.steering
    }

    pub fn rotations(&self) -> usize {
        self.steering.rotations()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Packed `steer(atom_m, r)`.
    pub fn steered_atom(&self, m: usize, r: usize) -> Vec<f64> {
        if self.mode == CorrelationMode::Direct {
            self.augmented[m * self.rotations() + r].clone()
        } else {
            self.steering.apply(&self.atoms[m], r)
        }
    }

    /// `Re⟨residual, steer(atom_m, r)⟩` for every `r`, into `out`.
    fn correlations(&self, m: usize, residual: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        let rr = self.rotations();
        match self.mode {
            CorrelationMode::Direct => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = dot(residual, &self.augmented[m * rr + r]);
                }
            }
            CorrelationMode::Fourier => {
                let atom = &self.atoms[m];
                buf.clear();
                buf.resize(rr, Complex64::new(0.0, 0.0));
                let mut k = 0;
                while k < atom.len() {
                    match self.slot_kind[k] {
                        SlotKind::Zero => {
                            buf[0].re += residual[k] * atom[k];
                            k += 1;
                        }
                        SlotKind::PairRe(t) => {
                            let (a, b) = (residual[k], residual[k + 1]);
                            let (c, d) = (atom[k], atom[k + 1]);
                            // P − iQ with P = ac + bd, Q = ad − bc
                            buf[t % rr] += Complex64::new(a * c + b * d, b * c - a * d);
                            k += 2;
                        }
                        SlotKind::PairIm => unreachable!("pair slots are consumed together"),
                    }
                }
                self.fft.as_ref().expect("fft plan").process(buf);
                for (o, z) in out.iter_mut().zip(buf.iter()) {
                    *o = z.re;
                }
            }
        }
    }

    /// OMP on a packed coefficient vector. Returns the code and its squared
    /// residual norm.
    pub fn omp_packed(&self, x: &[f64], sparsity: usize) -> (SparseCode, f64) {
        self.omp_trace(x, sparsity, |_, _| {})
    }

    /// OMP that reports `(selected columns, residual)` after each refit.
    pub(crate) fn omp_trace(
        &self,
        x: &[f64],
        sparsity: usize,
        mut observe: impl FnMut(&[Vec<f64>], &[f64]),
    ) -> (SparseCode, f64) {
        let rr = self.rotations();
        let budget = sparsity.min(self.atom_count() * rr);
        let mut residual = x.to_vec();
        let mut selected: Vec<(usize, usize)> = Vec::with_capacity(budget);
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(budget);
        let mut weights: Vec<f64> = Vec::new();
        let mut corr = vec![0.0; rr];
        let mut buf = Vec::with_capacity(rr);

        while selected.len() < budget {
            if dot(&residual, &residual).sqrt() < OMP_EPS {
                break;
            }
            let mut best: Option<(usize, usize, f64)> = None;
            for m in 0..self.atom_count() {
                self.correlations(m, &residual, &mut corr, &mut buf);
                for (r, &c) in corr.iter().enumerate() {
                    if best.is_some_and(|(_, _, b)| c.abs() <= b) {
                        continue;
                    }
                    if selected.contains(&(m, r)) {
                        continue;
                    }
                    best = Some((m, r, c.abs()));
                }
            }
            let Some((m, r, score)) = best else { break };
            if score < OMP_EPS {
                break;
            }
            selected.push((m, r));
            columns.push(self.steered_atom(m, r));

            let k = columns.len();
            let gram = DMatrix::from_fn(k, k, |i, j| dot(&columns[i], &columns[j]));
            let rhs = DVector::from_iterator(k, columns.iter().map(|c| dot(c, x)));
            let Some(chol) = Cholesky::new(gram) else {
                // the new column is linearly dependent on the selected set
                selected.pop();
                columns.pop();
                break;
            };
            let sol = chol.solve(&rhs);
            if sol.iter().any(|v| !v.is_finite()) {
                selected.pop();
                columns.pop();
                break;
            }
            weights = sol.iter().copied().collect();
            residual.copy_from_slice(x);
            for (c, w) in columns.iter().zip(&weights) {
                residual
                    .iter_mut()
                    .zip(c)
                    .for_each(|(ri, ci)| *ri -= w * ci);
            }
            observe(&columns, &residual);
        }
        if columns.is_empty() {
            weights.clear();
        }
        weights.truncate(columns.len());
        let entries = selected
            .into_iter()
            .zip(weights)
            .map(|((m, r), w)| CodeEntry { m, r, w })
            .collect();
        (SparseCode { entries }, dot(&residual, &residual))
    }

    /// Packed `Σ w · steer(atom_m, r)`.
    pub fn reconstruct_packed(&self, code: &SparseCode) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.layout.len()];
        let mut tmp = vec![0.0; self.layout.len()];
        for e in &code.entries {
            if e.m >= self.atom_count() || e.r >= self.rotations() {
                return Err(Error::invalid(format!(
                    "code entry (m={}, r={}) out of range for M={}, R={}",
                    e.m,
                    e.r,
                    self.atom_count(),
                    self.rotations()
                )));
            }
            self.steering
                .apply_into(&self.atoms[e.m], e.r, false, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += e.w * t);
        }
        Ok(out)
    }

    pub fn reconstruct(&self, code: &SparseCode) -> Result<SteerableCoeffs> {
        Ok(self.layout.unpack(&self.reconstruct_packed(code)?))
    }

    pub fn omp(&self, x: &SteerableCoeffs, sparsity: usize) -> Result<SparseCode> {
        if x.len() != self.layout.len() {
            return Err(Error::invalid(format!(
                "coefficient vector has {} entries, dictionary atoms have {}",
                x.len(),
                self.layout.len()
            )));
        }
        Ok(self.omp_packed(&self.layout.pack(x), sparsity).0)
    }

    /// Code every packed patch; output order matches input order.
    pub fn code_set_packed(&self, patches: &[Vec<f64>], sparsity: usize) -> (Vec<SparseCode>, f64) {
        let results: Vec<(SparseCode, f64)> = patches
            .par_iter()
            .map(|x| self.omp_packed(x, sparsity))
            .collect();
        let total = results.iter().map(|(_, e)| e).sum();
        (results.into_iter().map(|(c, _)| c).collect(), total)
    }

    pub fn code_set(
        &self,
        patches: &[SteerableCoeffs],
        sparsity: usize,
    ) -> Result<(Vec<SparseCode>, f64)> {
        let packed = patches
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.len() != self.layout.len() {
                    Err(Error::AtPatch {
                        index: i,
                        source: Box::new(Error::invalid(format!(
                            "coefficient vector has {} entries, expected {}",
                            p.len(),
                            self.layout.len()
                        ))),
                    })
                } else {
                    Ok(self.layout.pack(p))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.code_set_packed(&packed, sparsity))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::random_dictionary;
    use crate::steerbasis::{steer, BasisSpec};

    fn setup(m: usize, rr: usize, seed: u64) -> (SteerableBasis, Dictionary) {
        let basis = SteerableBasis::new(&BasisSpec::new(7).with_rotations(rr)).unwrap();
        let dict = random_dictionary(&basis, m, rr, seed);
        (basis, dict)
    }

    #[test]
    fn exact_single_atom() {
        let (basis, dict) = setup(6, 8, 1);
        let coder = Coder::new(&basis, &dict, 8).unwrap();
        let mut x = steer(&dict.atoms[3], &basis.steering_phases(5, 8).unwrap()).unwrap();
        x.0.iter_mut().for_each(|z| *z *= 2.0);
        let code = coder.omp(&x, 1).unwrap();
        assert_eq!(code.entries.len(), 1);
        let e = code.entries[0];
        assert_eq!((e.m, e.r), (3, 5));
        assert!((e.w - 2.0).abs() < 1e-10);
        let rec = coder.reconstruct(&code).unwrap();
        let err: f64 = rec
            .0
            .iter()
            .zip(&x.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!(err < 1e-20);
    }

    #[test]
    fn empty_dictionary_gives_empty_code() {
        let (basis, _) = setup(1, 4, 0);
        let dict = Dictionary {
            spec: basis.resolved_spec(),
            atoms: Vec::new(),
        };
        let coder = Coder::new(&basis, &dict, 4).unwrap();
        let x = basis.analyze(&vec![0.5; basis.rows()]).unwrap();
        let packed = coder.layout().pack(&x);
        let (code, err) = coder.omp_packed(&packed, 3);
        assert!(code.entries.is_empty());
        assert!((err - x.norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn sparsity_clamped_to_augmented_size() {
        let (basis, dict) = setup(1, 2, 4);
        let coder = Coder::new(&basis, &dict, 2).unwrap();
        let x = basis
            .analyze(
                &(0..basis.rows())
                    .map(|i| (i as f64).sin())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
        let code = coder.omp(&x, 10).unwrap();
        assert!(code.entries.len() <= 2);
    }

    #[test]
    fn fourier_and_direct_agree() {
        let (basis, dict) = setup(4, 12, 9);
        let direct = Coder::new(&basis, &dict, 12)
            .unwrap()
            .with_mode(CorrelationMode::Direct);
        let fourier = Coder::new(&basis, &dict, 12).unwrap();
        for seed in 0..20u64 {
            let x: Vec<f64> = (0..basis.rows())
                .map(|i| ((i as u64 * 31 + seed * 7) as f64).sin())
                .collect();
            let xc = basis.analyze(&x).unwrap();
            let p = direct.layout().pack(&xc);
            let mut c1 = vec![0.0; 12];
            let mut c2 = vec![0.0; 12];
            let mut buf = Vec::new();
            for m in 0..4 {
                direct.correlations(m, &p, &mut c1, &mut buf);
                fourier.correlations(m, &p, &mut c2, &mut buf);
                for (a, b) in c1.iter().zip(&c2) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            assert_eq!(
                direct.omp(&xc, 3).unwrap().entries.len(),
                fourier.omp(&xc, 3).unwrap().entries.len()
            );
        }
    }

    #[test]
    fn out_of_range_reconstruct() {
        let (basis, dict) = setup(2, 4, 0);
        let coder = Coder::new(&basis, &dict, 4).unwrap();
        let bad = SparseCode {
            entries: vec![CodeEntry { m: 2, r: 0, w: 1.0 }],
        };
        assert!(coder.reconstruct(&bad).is_err());
        let bad_r = SparseCode {
            entries: vec![CodeEntry { m: 0, r: 4, w: 1.0 }],
        };
        assert!(coder.reconstruct(&bad_r).is_err());
    }

    #[test]
    fn residual_monotone_and_orthogonal() {
        let (basis, dict) = setup(5, 10, 2);
        let coder = Coder::new(&basis, &dict, 10).unwrap();
        let x: Vec<f64> = (0..basis.rows()).map(|i| ((i * 7) as f64).cos()).collect();
        let p = coder.layout().pack(&basis.analyze(&x).unwrap());
        let mut last = dot(&p, &p);
        let mut steps = 0;
        coder.omp_trace(&p, 6, |cols, res| {
            let e = dot(res, res);
            assert!(e <= last + 1e-12);
            last = e;
            for c in cols {
                assert!(dot(c, res).abs() < 1e-8);
            }
            steps += 1;
        });
        assert_eq!(steps, 6);
    }
}
