//! Rotation throughput benchmark and coding-error sweeps.

mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::steerbasis::{
    build_interp_rotation, BasisSpec, InterpMethod, PackedRotation, RotationMethod, SparseOperator,
    SteerableBasis,
};

pub use sweep::{
    image_coefficients, sweep_angles, sweep_coding, sweep_convergence, write_angles_csv,
    write_convergence_csv, write_sweep_coding_csv, AnglePoint, CodingMethod, CodingSweepConfig,
    ConvergencePoint, SweepRow,
};

/// Angle used for timing; generic so no operator degenerates to a permutation.
pub const BENCH_ANGLE_DEG: f64 = 100.0 + std::f64::consts::SQRT_2;

/// Methods timed by [`bench_rotation`], in output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchMethod {
    Nearest,
    Bicubic,
    Steer,
    /// Steering in a basis whose angular cutoffs are halved.
    SteerHalf,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 4] = [
        BenchMethod::Nearest,
        BenchMethod::Bicubic,
        BenchMethod::Steer,
        BenchMethod::SteerHalf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchMethod::Nearest => "nearest",
            BenchMethod::Bicubic => "bicubic",
            BenchMethod::Steer => "steer",
            BenchMethod::SteerHalf => "steer_half",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub patch_count: usize,
    /// Timed repetitions per method; the median is reported.
    pub runs: usize,
    pub seed: u64,
    /// Spread patches over the rayon pool instead of one thread.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![11, 21, 31],
            patch_count: 10_000,
            runs: 5,
            seed: 0,
            parallel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub method: BenchMethod,
    pub n: usize,
    pub patches: usize,
    /// Length of the vectors the operator acts on (pixels or basis columns).
    pub dim: usize,
    /// Median wall time over the runs.
    pub seconds: f64,
    pub patches_per_sec: f64,
    pub single_threaded: bool,
}

enum Kernel<'a> {
    Pixels(&'a SparseOperator),
    Packed(&'a PackedRotation),
}

impl Kernel<'_> {
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Kernel::Pixels(op) => op.apply_into(x, out),
            Kernel::Packed(rot) => rot.apply_into(x, out),
        }
    }
}

/// Median seconds to apply `kernel` to every input, over `runs` repetitions.
fn time_kernel(
    kernel: &Kernel,
    inputs: &[Vec<f64>],
    dim: usize,
    runs: usize,
    parallel: bool,
) -> f64 {
    let mut times: Vec<f64> = (0..runs)
        .map(|_| {
            let mut out = vec![vec![0.0; dim]; inputs.len()];
            let start = Instant::now();
            if parallel {
                out.par_iter_mut()
                    .zip(inputs)
                    .for_each(|(o, x)| kernel.apply_into(black_box(x), o));
            } else {
                for (o, x) in out.iter_mut().zip(inputs) {
                    kernel.apply_into(black_box(x), o);
                }
            }
            let t = start.elapsed().as_secs_f64();
            black_box(&out);
            t
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2].max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

const GATE_TOL: f64 = 1e-9;

/// Checks run before any timing: zero angle is the identity for every
/// method, the timed kernels agree with the reference rotation paths, and
/// steering a quarter turn matches the exact pixel permutation on the
/// basis span.
fn correctness_gate(
    basis: &SteerableBasis,
    half: &SteerableBasis,
    sample: &[Vec<f64>],
    angle: f64,
) -> Result<()> {
    let n = basis.n();
    let fail = |what: &str, err: f64| {
        Err(Error::Consistency(format!(
            "rotation gate failed at N = {n}: {what} (max error {err:e})"
        )))
    };
    for b in [basis, half] {
        let layout = b.packed_layout();
        let id = PackedRotation::new(&layout, 0.0);
        let rot = PackedRotation::new(&layout, angle);
        for x in sample {
            let p = layout.pack(&b.analyze(x)?);
            let err = max_abs_diff(&id.apply(&p), &p);
            if err > GATE_TOL {
                return fail("steering by zero is not the identity", err);
            }
            let timed = b.synthesize(&layout.unpack(&rot.apply(&p)))?;
            let reference = b.rotate_patch(x, angle, RotationMethod::Steer)?;
            let err = max_abs_diff(&timed, &reference);
            if err > GATE_TOL {
                return fail("packed steering disagrees with coefficient steering", err);
            }
            let proj = b.synthesize(&layout.unpack(&p))?;
            let quarter = b
                .synthesize(&layout.unpack(
                    &PackedRotation::new(&layout, std::f64::consts::FRAC_PI_2).apply(&p),
                ))?;
            let moved =
                b.rotate_patch(&proj, std::f64::consts::FRAC_PI_2, RotationMethod::Nearest)?;
            let err = max_abs_diff(&quarter, &moved);
            if err > GATE_TOL {
                return fail(
                    "quarter-turn steering differs from the pixel permutation",
                    err,
                );
            }
        }
    }
    for method in [InterpMethod::Nearest, InterpMethod::Bicubic] {
        let id = build_interp_rotation(n, 0.0, method)?;
        for x in sample {
            let err = max_abs_diff(&id.apply(x), x);
            if err > GATE_TOL {
                return fail("interpolation at zero angle is not the identity", err);
            }
        }
    }
    Ok(())
}

/// Time rotating `patch_count` seeded random patches at every size. Steering
/// acts on pre-analyzed coefficients; analysis and operator construction are
/// not timed.
pub fn bench_rotation(config: &BenchConfig) -> Result<Vec<BenchResult>> {
    if config.runs == 0 || config.patch_count == 0 {
        return Err(Error::invalid(
            "benchmark needs at least one run and one patch",
        ));
    }
    let angle = BENCH_ANGLE_DEG.to_radians();
    let mut results = Vec::new();
    for &n in &config.sizes {
        let basis = SteerableBasis::new(&BasisSpec::new(n))?;
        let half = SteerableBasis::new(&basis.spec().halved(basis.cutoffs()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ n as u64);
        let patches: Vec<Vec<f64>> = (0..config.patch_count)
            .map(|_| {
                (0..basis.rows())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        correctness_gate(&basis, &half, &patches[..patches.len().min(8)], angle)?;

        let nearest = build_interp_rotation(n, angle, InterpMethod::Nearest)?;
        let bicubic = build_interp_rotation(n, angle, InterpMethod::Bicubic)?;
        for method in BenchMethod::ALL {
            let (seconds, dim) = match method {
                BenchMethod::Nearest | BenchMethod::Bicubic => {
                    let op = if method == BenchMethod::Nearest {
                        &nearest
                    } else {
                        &bicubic
                    };
                    let t = time_kernel(
                        &Kernel::Pixels(op),
                        &patches,
                        op.dim(),
                        config.runs,
                        config.parallel,
                    );
                    (t, op.dim())
                }
                BenchMethod::Steer | BenchMethod::SteerHalf => {
                    let b = if method == BenchMethod::Steer {
                        &basis
                    } else {
                        &half
                    };
                    let layout = b.packed_layout();
                    let coeffs = patches
                        .iter()
                        .map(|x| Ok(layout.pack(&b.analyze(x)?)))
                        .collect::<Result<Vec<_>>>()?;
                    let rot = PackedRotation::new(&layout, angle);
                    let t = time_kernel(
                        &Kernel::Packed(&rot),
                        &coeffs,
                        rot.len(),
                        config.runs,
                        config.parallel,
                    );
                    (t, rot.len())
                }
            };
            results.push(BenchResult {
                method,
                n,
                patches: config.patch_count,
                dim,
                seconds,
                patches_per_sec: config.patch_count as f64 / seconds,
                single_threaded: !config.parallel,
            });
        }
    }
    Ok(results)
}

/// Coefficient of determination of a least-squares line through `(x, y)`.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

/// R² of per-patch steering time against basis size across the benchmarked
/// sizes (both full and halved cutoffs).
pub fn steer_cost_r2(results: &[BenchResult]) -> f64 {
    let points: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| matches!(r.method, BenchMethod::Steer | BenchMethod::SteerHalf))
        .map(|r| (r.dim as f64, r.seconds / r.patches as f64))
        .collect();
    linear_fit_r2(&points)
}

pub fn write_bench_csv(path: impl AsRef<Path>, results: &[BenchResult]) -> Result<()> {
    let path = path.as_ref();
    let mut csv = String::from("method,N,patches,seconds,patches_per_sec\n");
    for r in results {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6e},{:.6e}",
            r.method.as_str(),
            r.n,
            r.patches,
            r.seconds,
            r.patches_per_sec
        );
    }
    fs::write(path, csv).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig {
            sizes: vec![7, 11],
            patch_count: 200,
            runs: 3,
            seed: 1,
            parallel: false,
        }
    }

    #[test]
    fn every_method_and_size_reported() {
        let res = bench_rotation(&small()).unwrap();
        assert_eq!(res.len(), 8);
        for r in &res {
            assert!(r.seconds > 0.0);
            assert!(
                (r.patches_per_sec - r.patches as f64 / r.seconds).abs()
                    <= 1e-9 * r.patches_per_sec
            );
            assert!(r.single_threaded);
        }
        let dims: Vec<usize> = res.iter().filter(|r| r.n == 11).map(|r| r.dim).collect();
        assert_eq!(dims[0], 97);
        assert!(dims[3] < dims[2]);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(bench_rotation(&BenchConfig { runs: 0, ..small() }).is_err());
        assert!(bench_rotation(&BenchConfig {
            sizes: vec![8],
            ..small()
        })
        .is_err());
    }

    #[test]
    fn r2_of_exact_line_is_one() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        assert!((linear_fit_r2(&pts) - 1.0).abs() < 1e-12);
        assert_eq!(linear_fit_r2(&[(1.0, 2.0), (1.0, 3.0)]), 0.0);
    }

    #[test]
    fn csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench_rotation.csv");
        let res = bench_rotation(&BenchConfig {
            sizes: vec![5],
            patch_count: 10,
            ..small()
        })
        .unwrap();
        write_bench_csv(&path, &res).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("method,N,patches,seconds,patches_per_sec\nnearest,5,10,"));
        assert_eq!(text.lines().count(), 5);
    }
}
