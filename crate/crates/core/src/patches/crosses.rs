//! Toy set: every patch is the sum of two rotated copies of one ridge.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PatchSet;
use crate::error::Result;
use crate::steerbasis::{disk_mask, steer, BasisSpec, SteerableBasis};

const SUPERSAMPLE: usize = 4;

/// Anti-aliased horizontal ridge through the center: Gaussian cross-profile
/// with standard deviation `N/8`, length `0.9·N`, unit norm, on the disk mask.
pub fn ridge_template(n: usize) -> Result<Vec<f64>> {
    let mask = disk_mask(n)?;
    let sigma = n as f64 / 8.0;
    let half_len = 0.45 * n as f64;
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut t: Vec<f64> = mask
        .iter()
        .map(|&(dy, dx)| {
            let mut acc = 0.0;
            for i in 0..SUPERSAMPLE {
                for j in 0..SUPERSAMPLE {
                    let y = f64::from(dy) - 0.5 + step * (i as f64 + 0.5);
                    let x = f64::from(dx) - 0.5 + step * (j as f64 + 0.5);
                    if x.abs() <= half_len {
                        acc += (-y * y / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            acc / (SUPERSAMPLE * SUPERSAMPLE) as f64
        })
        .collect();
    let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    t.iter_mut().for_each(|v| *v /= norm);
    Ok(t)
}

/// Toy patches built at explicit angle pairs. Returns the set and the true
/// atom (the template's projection onto the basis, unit norm).
pub fn synth_crosses_at(n: usize, angles: &[(f64, f64)]) -> Result<(PatchSet, Vec<f64>)> {
    let basis = SteerableBasis::new(&BasisSpec::new(n))?;
    let coeffs = basis.analyze(&ridge_template(n)?)?;
    let mut atom = basis.synthesize(&coeffs)?;
    let an = atom.iter().map(|v| v * v).sum::<f64>().sqrt();
    atom.iter_mut().for_each(|v| *v /= an);

    let mut patches = Vec::with_capacity(angles.len());
    for &(a, b) in angles {
        let s1 = steer(&coeffs, &basis.phases_for_angle(a))?;
        let s2 = steer(&coeffs, &basis.phases_for_angle(b))?;
        let sum = crate::steerbasis::SteerableCoeffs(
            s1.0.iter().zip(&s2.0).map(|(x, y)| x + y).collect(),
        );
        let mut p = basis.synthesize(&sum)?;
        let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        p.iter_mut().for_each(|v| *v /= pn);
        patches.push(p);
    }
    Ok((
        PatchSet {
            n,
            mask: basis.mask().to_vec(),
            patches,
            origins: Vec::new(),
            normalized: true,
            dropped: 0,
        },
        atom,
    ))
}

/// `count` toy patches with both angles uniform in `[0, 2π)`.
pub fn synth_crosses(count: usize, n: usize, seed: u64) -> Result<(PatchSet, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles: Vec<(f64, f64)> = (0..count)
        .map(|_| (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)))
        .collect();
    synth_crosses_at(n, &angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let (set, atom) = synth_crosses(50, 11, 3).unwrap();
        assert_eq!(set.len(), 50);
        assert!((norm(&atom) - 1.0).abs() < 1e-12);
        for p in &set.patches {
            assert!((norm(p) - 1.0).abs() < 1e-10);
        }
        assert_eq!(synth_crosses(50, 11, 3).unwrap().0, set);
    }

    #[test]
    fn zero_angles_give_the_atom() {
        let (set, atom) = synth_crosses_at(15, &[(0.0, 0.0)]).unwrap();
        for (a, b) in set.patches[0].iter().zip(&atom) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn template_is_a_horizontal_ridge() {
        let n = 21;
        let t = ridge_template(n).unwrap();
        let mask = disk_mask(n).unwrap();
        let at = |k: (i32, i32)| t[mask.iter().position(|&m| m == k).unwrap()];
        assert!(at((0, 8)) > 10.0 * at((8, 0)));
        assert!((at((0, 3)) - at((0, -3))).abs() < 1e-12);
        assert!((at((2, 0)) - at((-2, 0))).abs() < 1e-12);
    }

    #[test]
    fn angular_power_is_flat_under_steering() {
        let n = 11;
        let basis = SteerableBasis::new(&BasisSpec::new(n)).unwrap();
        let (set, _) = synth_crosses(1000, n, 9).unwrap();
        let mut energy = vec![0.0; basis.cols()];
        let mut steered = vec![0.0; basis.cols()];
        let phases = basis.phases_for_angle(0.77);
        for p in &set.patches {
            let c = basis.analyze(p).unwrap();
            let s = steer(&c, &phases).unwrap();
            for j in 0..basis.cols() {
                energy[j] += c.0[j].norm_sqr();
                steered[j] += s.0[j].norm_sqr();
            }
        }
        for (e, s) in energy.iter().zip(&steered) {
            assert!((e - s).abs() <= 0.1 * e.max(1e-12));
        }
    }
}
