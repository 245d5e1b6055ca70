//! Rotational K-SVD.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::omp::{dot, Coder, CorrelationMode};
use super::svd::{leading_left_singular, rayleigh};
use super::{random_unit_atom, Dictionary, SparseCode};
use crate::error::{Error, Result};
use crate::steerbasis::{PackedLayout, PackedSteering, SteerableBasis, SteerableCoeffs};

#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    /// Dictionary size `M`.
    pub atoms: usize,
    /// Sparsity `K`.
    pub sparsity: usize,
    /// Rotation count `R`.
    pub rotations: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Re-run OMP against the final dictionary before returning.
    pub final_recode: bool,
    pub correlation: CorrelationMode,
}

impl LearnConfig {
    pub fn new(atoms: usize, sparsity: usize, rotations: usize, iterations: usize) -> Self {
        LearnConfig {
            atoms,
            sparsity,
            rotations,
            iterations,
            seed: 0,
            final_recode: true,
            correlation: CorrelationMode::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms == 0 || self.sparsity == 0 || self.rotations == 0 || self.iterations == 0 {
            return Err(Error::invalid(format!(
                "M, K, R and iterations must all be >= 1 (got M={}, K={}, R={}, iterations={})",
                self.atoms, self.sparsity, self.rotations, self.iterations
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearnReport {
    /// Total squared error of the codes against the random initial dictionary.
    pub initial_objective: f64,
    /// Total squared error after each iteration (fresh OMP against the
    /// updated dictionary; the last entry is the final recode when enabled).
    pub objectives: Vec<f64>,
    /// Number of codes using each atom, from the final codes.
    pub usage: Vec<usize>,
    pub resets: usize,
    pub seconds: f64,
}

/// Outcome of updating one atom.
#[derive(Clone, Debug, PartialEq)]
pub enum AtomUpdate {
    /// Atom replaced; `contributors` patches had their weight refit.
    Updated { contributors: usize },
    /// No patch uses the atom.
    Unused,
}

/// Occurrence of atom `m` used to align patch residuals: largest `|w|`, then
/// smallest `r`.
fn pick_occurrence(code: &SparseCode, m: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in code.entries.iter().enumerate() {
        if e.m != m {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &code.entries[b];
                if e.w.abs() > cur.w.abs() || (e.w.abs() == cur.w.abs() && e.r < cur.r) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

struct Workspace<'a> {
    steering: &'a PackedSteering,
    atoms: &'a mut [Vec<f64>],
}

impl Workspace<'_> {
    /// `x − Σ_{j ≠ skip} w_j steer(atom_{m_j}, r_j)`.
    fn residual(&self, x: &[f64], code: &SparseCode, skip: Option<usize>) -> Vec<f64> {
        let mut res = x.to_vec();
        let mut tmp = vec![0.0; x.len()];
        for (j, e) in code.entries.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            self.steering
                .apply_into(&self.atoms[e.m], e.r, false, &mut tmp);
            res.iter_mut().zip(&tmp).for_each(|(a, b)| *a -= e.w * b);
        }
        res
    }

    fn update(&mut self, m: usize, patches: &[Vec<f64>], codes: &mut [SparseCode]) -> AtomUpdate {
        let picks: Vec<(usize, usize)> = codes
            .iter()
            .enumerate()
            .filter_map(|(p, c)| pick_occurrence(c, m).map(|i| (p, i)))
            .collect();
        if picks.is_empty() {
            return AtomUpdate::Unused;
        }
        let this = &*self;
        let aligned: Vec<Vec<f64>> = picks
            .par_iter()
            .map(|&(p, i)| {
                let e = this.residual(&patches[p], &codes[p], Some(i));
                this.steering.apply_inverse(&e, codes[p].entries[i].r)
            })
            .collect();

        let old = self.atoms[m].clone();
        let mut atom = match leading_left_singular(&aligned, &old) {
            Some(u) if rayleigh(&aligned, &u) >= rayleigh(&aligned, &old) => u,
            _ => old.clone(),
        };
        let n = dot(&atom, &atom).sqrt();
        atom.iter_mut().for_each(|v| *v /= n);

        // A patch that uses atom m more than once also sees the new atom in
        // its other occurrences, so the rank-1 step alone can raise the error.
        // Keep the old atom and weights in that case.
        let repeated = picks
            .iter()
            .any(|&(p, _)| codes[p].entries.iter().filter(|e| e.m == m).count() > 1);
        let before = if repeated {
            self.contributing_error(&picks, patches, codes)
        } else {
            0.0
        };
        let saved: Vec<f64> = picks.iter().map(|&(p, i)| codes[p].entries[i].w).collect();
        for (&(p, i), y) in picks.iter().zip(&aligned) {
            codes[p].entries[i].w = dot(&atom, y);
        }
        self.atoms[m] = atom;
        if repeated && self.contributing_error(&picks, patches, codes) > before {
            self.atoms[m] = old;
            for (&(p, i), w) in picks.iter().zip(saved) {
                codes[p].entries[i].w = w;
            }
        }
        AtomUpdate::Updated {
            contributors: picks.len(),
        }
    }

    fn contributing_error(
        &self,
        picks: &[(usize, usize)],
        patches: &[Vec<f64>],
        codes: &[SparseCode],
    ) -> f64 {
        picks
            .par_iter()
            .map(|&(p, _)| {
                let r = self.residual(&patches[p], &codes[p], None);
                dot(&r, &r)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    /// Squared coding error of every patch under the current atoms.
    fn errors(&self, patches: &[Vec<f64>], codes: &[SparseCode]) -> Vec<f64> {
        patches
            .par_iter()
            .zip(codes)
            .map(|(x, c)| {
                let r = self.residual(x, c, None);
                dot(&r, &r)
            })
            .collect()
    }

    /// Point atom `m` at the highest-error patch not in `exclude` (ties: lowest
    /// index). Returns the chosen patch.
    fn reset(
        &mut self,
        m: usize,
        patches: &[Vec<f64>],
        codes: &[SparseCode],
        exclude: &[usize],
    ) -> Option<usize> {
        let errors = self.errors(patches, codes);
        let mut best: Option<(usize, f64)> = None;
        for (p, &e) in errors.iter().enumerate() {
            if exclude.contains(&p) {
                continue;
            }
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((p, e));
            }
        }
        let (p, _) = best?;
        let n = dot(&patches[p], &patches[p]).sqrt();
        if n > 0.0 {
            self.atoms[m] = patches[p].iter().map(|v| v / n).collect();
        }
        Some(p)
    }
}

fn pack_patches(layout: &PackedLayout, patches: &[SteerableCoeffs]) -> Result<Vec<Vec<f64>>> {
    patches
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.len() != layout.len() {
                return Err(Error::AtPatch {
                    index: i,
                    source: Box::new(Error::invalid(format!(
                        "coefficient vector has {} entries, expected {}",
                        p.len(),
                        layout.len()
                    ))),
                });
            }
            Ok(layout.pack(p))
        })
        .collect()
}

/// Result of learning in packed coordinates.
pub(crate) struct PackedLearn {
    pub atoms: Vec<Vec<f64>>,
    pub codes: Vec<SparseCode>,
    pub report: LearnReport,
}

pub(crate) fn learn_packed(
    layout: &PackedLayout,
    patches: &[Vec<f64>],
    config: &LearnConfig,
) -> Result<PackedLearn> {
    config.validate()?;
    if patches.is_empty() {
        return Err(Error::invalid(
            "cannot learn a dictionary from an empty patch set",
        ));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut atoms: Vec<Vec<f64>> = (0..config.atoms)
        .map(|_| layout.pack(&random_unit_atom(layout, layout.len(), &mut rng)))
        .collect();
    let steering = layout.steering(config.rotations);

    let code_with = |atoms: &[Vec<f64>]| -> Result<(Vec<SparseCode>, f64)> {
        let coder = Coder::from_packed(
            layout.clone(),
            atoms.to_vec(),
            config.rotations,
            config.correlation,
        )?;
        Ok(coder.code_set_packed(patches, config.sparsity))
    };

    let mut report = LearnReport::default();
    let (mut codes, err0) = code_with(&atoms)?;
    report.initial_objective = err0;
    for it in 0..config.iterations {
        if it > 0 {
            let (c, e) = code_with(&atoms)?;
            codes = c;
            report.objectives.push(e);
        }
        let mut ws = Workspace {
            steering: &steering,
            atoms: &mut atoms,
        };
        let mut reset_from = Vec::new();
        for m in 0..config.atoms {
            if ws.update(m, patches, &mut codes) == AtomUpdate::Unused {
                if let Some(p) = ws.reset(m, patches, &codes, &reset_from) {
                    reset_from.push(p);
                    report.resets += 1;
                }
            }
        }
    }
    if config.final_recode {
        let (c, e) = code_with(&atoms)?;
        codes = c;
        report.objectives.push(e);
    } else {
        let ws = Workspace {
            steering: &steering,
            atoms: &mut atoms,
        };
        report
            .objectives
            .push(ws.errors(patches, &codes).iter().sum());
    }
    report.usage = vec![0; config.atoms];
    for c in &codes {
        for e in &c.entries {
            report.usage[e.m] += 1;
        }
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(PackedLearn {
        atoms,
        codes,
        report,
    })
}

/// Rotational K-SVD on patches given in steerable coordinates.
pub fn rksvd_learn(
    basis: &SteerableBasis,
    patches: &[SteerableCoeffs],
    config: &LearnConfig,
) -> Result<(Dictionary, Vec<SparseCode>, LearnReport)> {
    let layout = basis.packed_layout();
    let packed = pack_patches(&layout, patches)?;
    let out = learn_packed(&layout, &packed, config)?;
    let dict = Dictionary {
        spec: basis.resolved_spec().with_rotations(config.rotations),
        atoms: out.atoms.iter().map(|a| layout.unpack(a)).collect(),
    };
    Ok((dict, out.codes, out.report))
}

/// Standard K-SVD: [`rksvd_learn`] with a single rotation.
pub fn ksvd_learn(
    basis: &SteerableBasis,
    patches: &[SteerableCoeffs],
    config: &LearnConfig,
) -> Result<(Dictionary, Vec<SparseCode>, LearnReport)> {
    let config = LearnConfig {
        rotations: 1,
        ..config.clone()
    };
    rksvd_learn(basis, patches, &config)
}

/// Replace atom `m` by the leading singular vector of the rotation-aligned
/// residuals of every patch that uses it, refitting those weights in place.
pub fn atom_update(
    basis: &SteerableBasis,
    m: usize,
    patches: &[SteerableCoeffs],
    codes: &mut [SparseCode],
    dict: &mut Dictionary,
    rotations: usize,
) -> Result<AtomUpdate> {
    if m >= dict.len() {
        return Err(Error::invalid(format!(
            "atom {m} out of range for M={}",
            dict.len()
        )));
    }
    let layout = basis.packed_layout();
    let packed = pack_patches(&layout, patches)?;
    let steering = layout.steering(rotations);
    let mut atoms: Vec<Vec<f64>> = dict.atoms.iter().map(|a| layout.pack(a)).collect();
    let mut ws = Workspace {
        steering: &steering,
        atoms: &mut atoms,
    };
    let out = ws.update(m, &packed, codes);
    dict.atoms[m] = layout.unpack(&atoms[m]);
    Ok(out)
}

/// Point an unused atom at the patch with the largest current coding error
/// (ties: lowest index). Returns the chosen patch index.
pub fn reset_unused_atom(
    basis: &SteerableBasis,
    dict: &mut Dictionary,
    m: usize,
    patches: &[SteerableCoeffs],
    codes: &[SparseCode],
    rotations: usize,
) -> Result<usize> {
    if m >= dict.len() {
        return Err(Error::invalid(format!(
            "atom {m} out of range for M={}",
            dict.len()
        )));
    }
    let layout = basis.packed_layout();
    let packed = pack_patches(&layout, patches)?;
    if packed.is_empty() {
        return Err(Error::invalid("no patches to reset from"));
    }
    let steering = layout.steering(rotations);
    let mut atoms: Vec<Vec<f64>> = dict.atoms.iter().map(|a| layout.pack(a)).collect();
    let mut ws = Workspace {
        steering: &steering,
        atoms: &mut atoms,
    };
    let p = ws
        .reset(m, &packed, codes, &[])
        .expect("non-empty patch set");
    dict.atoms[m] = layout.unpack(&atoms[m]);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{random_dictionary, reconstruct, CodeEntry};
    use crate::steerbasis::{steer, BasisSpec};

    fn basis() -> SteerableBasis {
        SteerableBasis::new(&BasisSpec::new(9)).unwrap()
    }

    fn steered(
        b: &SteerableBasis,
        a: &SteerableCoeffs,
        r: usize,
        rr: usize,
        w: f64,
    ) -> SteerableCoeffs {
        let mut s = steer(a, &b.steering_phases(r, rr).unwrap()).unwrap();
        s.0.iter_mut().for_each(|z| *z *= w);
        s
    }

    fn real_corr(a: &SteerableCoeffs, b: &SteerableCoeffs) -> f64 {
        a.real_dot(b) / (a.norm() * b.norm())
    }

    #[test]
    fn rank_one_update_keeps_atom() {
        let b = basis();
        let mut d = random_dictionary(&b, 2, 8, 1);
        let old = d.atoms[0].clone();
        let patches = vec![steered(&b, &old, 3, 8, 1.0)];
        let mut codes = vec![SparseCode {
            entries: vec![CodeEntry { m: 0, r: 3, w: 1.0 }],
        }];
        let out = atom_update(&b, 0, &patches, &mut codes, &mut d, 8).unwrap();
        assert_eq!(out, AtomUpdate::Updated { contributors: 1 });
        assert!(real_corr(&old, &d.atoms[0]).abs() > 1.0 - 1e-8);
        assert!((codes[0].entries[0].w.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn aligned_copies_recover_template() {
        let b = basis();
        let rr = 12;
        let mut d = random_dictionary(&b, 1, rr, 4);
        let template = random_dictionary(&b, 1, rr, 99).atoms.remove(0);
        let patches = vec![
            steered(&b, &template, 2, rr, 0.8),
            steered(&b, &template, 7, rr, 1.3),
        ];
        let mut codes = vec![
            SparseCode {
                entries: vec![CodeEntry { m: 0, r: 2, w: 0.5 }],
            },
            SparseCode {
                entries: vec![CodeEntry { m: 0, r: 7, w: 0.5 }],
            },
        ];
        atom_update(&b, 0, &patches, &mut codes, &mut d, rr).unwrap();
        // oracle: direct average of the aligned residuals
        let mut avg = SteerableCoeffs::zeros(b.cols());
        for (p, r) in patches.iter().zip([2, 7]) {
            let al = steer(p, &b.steering_phases(r, rr).unwrap().inverse()).unwrap();
            avg.0.iter_mut().zip(&al.0).for_each(|(a, x)| *a += x);
        }
        assert!(real_corr(&avg, &d.atoms[0]).abs() > 0.999);
        assert!(real_corr(&template, &d.atoms[0]).abs() > 0.999);
    }

    #[test]
    fn orthogonal_residuals_pick_larger() {
        let b = basis();
        let mut d = random_dictionary(&b, 1, 1, 0);
        let layout = b.packed_layout();
        let mut e1 = vec![0.0; b.cols()];
        e1[0] = 1.0;
        let mut e2 = vec![0.0; b.cols()];
        e2[1] = 1.0;
        let patches = vec![
            layout.unpack(&e1.iter().map(|v| v * 0.5).collect::<Vec<_>>()),
            layout.unpack(&e2.iter().map(|v| v * 2.0).collect::<Vec<_>>()),
        ];
        let mut codes = vec![
            SparseCode {
                entries: vec![CodeEntry { m: 0, r: 0, w: 0.1 }],
            };
            2
        ];
        atom_update(&b, 0, &patches, &mut codes, &mut d, 1).unwrap();
        let got = layout.pack(&d.atoms[0]);
        assert!((got[1].abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unused_atom_signalled_and_reset() {
        let b = basis();
        let mut d = random_dictionary(&b, 2, 4, 2);
        let patches: Vec<SteerableCoeffs> = (0..5)
            .map(|s| {
                let x: Vec<f64> = (0..b.rows())
                    .map(|i| ((i * (s + 2)) as f64 * 0.3).sin())
                    .collect();
                b.analyze(&x).unwrap()
            })
            .collect();
        let mut codes = vec![
            SparseCode {
                entries: vec![CodeEntry { m: 0, r: 1, w: 0.2 }],
            };
            5
        ];
        assert_eq!(
            atom_update(&b, 1, &patches, &mut codes, &mut d, 4).unwrap(),
            AtomUpdate::Unused
        );

        // brute-force error scan
        let errs: Vec<f64> = patches
            .iter()
            .zip(&codes)
            .map(|(x, c)| {
                let r = reconstruct(&b, &d, c, 4).unwrap();
                x.0.iter().zip(&r.0).map(|(a, b)| (a - b).norm_sqr()).sum()
            })
            .collect();
        let want = errs
            .iter()
            .enumerate()
            .fold(0, |best, (i, e)| if *e > errs[best] { i } else { best });
        let p = reset_unused_atom(&b, &mut d, 1, &patches, &codes, 4).unwrap();
        assert_eq!(p, want);
        assert!(real_corr(&d.atoms[1], &patches[p]) > 1.0 - 1e-12);
        d.validate(&b).unwrap();
    }

    #[test]
    fn reset_tie_breaks_to_lowest_index() {
        let b = basis();
        let mut d = random_dictionary(&b, 2, 1, 2);
        let patches: Vec<SteerableCoeffs> = (0..3).map(|_| d.atoms[0].clone()).collect();
        let codes = vec![
            SparseCode {
                entries: vec![CodeEntry { m: 0, r: 0, w: 1.0 }],
            };
            3
        ];
        assert_eq!(
            reset_unused_atom(&b, &mut d, 1, &patches, &codes, 1).unwrap(),
            0
        );
    }

    #[test]
    fn duplicate_occurrence_picks_largest_weight() {
        let code = SparseCode {
            entries: vec![
                CodeEntry { m: 0, r: 5, w: 0.5 },
                CodeEntry {
                    m: 0,
                    r: 2,
                    w: -0.9,
                },
                CodeEntry { m: 0, r: 1, w: 0.9 },
            ],
        };
        assert_eq!(pick_occurrence(&code, 0), Some(2));
        assert_eq!(pick_occurrence(&code, 1), None);
    }

    #[test]
    fn update_does_not_increase_error() {
        let b = basis();
        let rr = 6;
        for seed in 0..5 {
            let mut d = random_dictionary(&b, 3, rr, seed);
            let patches: Vec<SteerableCoeffs> = (0..40)
                .map(|s| {
                    let x: Vec<f64> = (0..b.rows())
                        .map(|i| ((i * 7 + s * 13 + seed as usize) as f64 * 0.19).sin())
                        .collect();
                    b.analyze(&x).unwrap()
                })
                .collect();
            let (mut codes, before) = crate::coding::code_set(&b, &d, &patches, 2, rr).unwrap();
            for m in 0..3 {
                atom_update(&b, m, &patches, &mut codes, &mut d, rr).unwrap();
            }
            let after: f64 = patches
                .iter()
                .zip(&codes)
                .map(|(x, c)| {
                    let r = reconstruct(&b, &d, c, rr).unwrap();
                    x.0.iter()
                        .zip(&r.0)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                })
                .sum();
            assert!(
                after <= before * (1.0 + 1e-12),
                "seed {seed}: {after} > {before}"
            );
        }
    }

    #[test]
    fn learning_is_deterministic_and_ksvd_is_r1() {
        let b = basis();
        let patches: Vec<SteerableCoeffs> = (0..60)
            .map(|s| {
                let x: Vec<f64> = (0..b.rows())
                    .map(|i| ((i * 3 + s * 11) as f64 * 0.23).cos())
                    .collect();
                let c = b.analyze(&x).unwrap();
                let n = c.norm();
                SteerableCoeffs(c.0.iter().map(|z| z / n).collect())
            })
            .collect();
        let cfg = LearnConfig::new(4, 2, 8, 4).with_seed(7);
        let (d1, c1, r1) = rksvd_learn(&b, &patches, &cfg).unwrap();
        let (d2, c2, r2) = rksvd_learn(&b, &patches, &cfg).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(c1, c2);
        assert_eq!(r1.objectives, r2.objectives);
        assert_eq!(r1.objectives.len(), 4);
        d1.validate(&b).unwrap();
        for c in &c1 {
            assert!(c.is_feasible(2, 4, 8));
        }

        let r1cfg = LearnConfig {
            rotations: 1,
            ..cfg.clone()
        };
        let (dk, ck, _) = ksvd_learn(&b, &patches, &cfg).unwrap();
        let (dr, cr, _) = rksvd_learn(&b, &patches, &r1cfg).unwrap();
        assert_eq!(dk, dr);
        assert_eq!(ck, cr);
    }

    #[test]
    fn single_patch_ksvd() {
        let b = basis();
        let x: Vec<f64> = (0..b.rows()).map(|i| (i as f64 * 0.5).sin()).collect();
        let c = b.analyze(&x).unwrap();
        let patches = vec![c.clone(); 5];
        let (d, _, rep) = ksvd_learn(&b, &patches, &LearnConfig::new(1, 1, 1, 3)).unwrap();
        assert!(real_corr(&d.atoms[0], &c).abs() > 1.0 - 1e-10);
        assert!(*rep.objectives.last().unwrap() < 1e-20);
    }

    #[test]
    fn empty_set_and_bad_config() {
        let b = basis();
        assert!(rksvd_learn(&b, &[], &LearnConfig::new(1, 1, 1, 1)).is_err());
        let p = vec![b.analyze(&vec![1.0; b.rows()]).unwrap()];
        assert!(rksvd_learn(&b, &p, &LearnConfig::new(0, 1, 1, 1)).is_err());
    }
}
