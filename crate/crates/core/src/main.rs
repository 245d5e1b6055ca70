use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rotsparse::bench::{
    bench_rotation, steer_cost_r2, sweep_angles, sweep_coding, sweep_convergence, write_angles_csv,
    write_bench_csv, write_convergence_csv, write_sweep_coding_csv, BenchConfig, CodingSweepConfig,
};
use rotsparse::coding::{
    code_set, ksvd_learn, read_dictionary, rksvd_learn, write_codes_csv, write_dictionary,
    LearnConfig, MSE_SCALE,
};
use rotsparse::patches::{
    extract_patches_tagged, load_pgm, montage, read_patches_csv, rotate_image, save_pgm,
    synth_crosses, synth_textures, write_patches_csv, LabeledImageSet, PatchSet, Split,
};
use rotsparse::steerbasis::{steer, BasisSpec, RotationMethod, SteerableBasis, SteerableCoeffs};
use rotsparse::texclass::{
    cross_validate, load_model, save_model, write_sweep_csv, ClassParams, ClassifierModel,
    SweepGrid, TrainMode,
};
use rotsparse::{Error, Result, FORMAT_VERSIONS};

const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\nformats: ");

#[derive(Parser, Debug)]
#[command(
    name = "rotsparse",
    version,
    about = "Rotational sparse coding of image patches"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 forces the deterministic single-threaded path.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Learn a dictionary from patches.
    Learn(LearnArgs),
    /// Sparse-code patches against a dictionary and report the MSE.
    Code(CodeArgs),
    /// Rotate the central disk of a PGM image.
    Rotate(RotateArgs),
    /// Texture classification.
    #[command(subcommand)]
    Classify(ClassifyCommand),
    /// Coding-error sweeps.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Timing benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Render dictionary atoms as a tiled PGM.
    Montage(MontageArgs),
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Crossing-ridge patches plus the ridge template.
    Crosses {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 41)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Labeled texture images with an upright train split and a rotated test split.
    Textures {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        /// Images per class in each split.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Ksvd,
    Rksvd,
}

/// Where patches come from.
#[derive(Args, Debug, Clone)]
struct PatchSource {
    /// A PGM image, a patch CSV, or a directory holding `patches.csv`, a
    /// texture set (`manifest.csv`, train split) or PGM images.
    #[arg(long)]
    input: PathBuf,
    /// Patch grid stride for images.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Keep at most this many patches (seeded subsample).
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[arg(long, value_enum, default_value = "rksvd")]
    method: Method,
    #[arg(long, default_value_t = 11)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    atoms: usize,
    #[arg(long, default_value_t = 2)]
    sparsity: usize,
    /// Rotation count R (ignored by ksvd).
    #[arg(long, default_value_t = 36)]
    angles: usize,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[command(flatten)]
    source: PatchSource,
    #[arg(long)]
    out: PathBuf,
    /// Also write the final codes.
    #[arg(long)]
    codes: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CodeArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 2)]
    sparsity: usize,
    /// Rotation count; defaults to the one stored in the dictionary.
    #[arg(long)]
    angles: Option<usize>,
    #[command(flatten)]
    source: PatchSource,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RotateMethod {
    Steer,
    Nearest,
    Bicubic,
}

#[derive(Args, Debug)]
struct RotateArgs {
    /// Counter-clockwise angle in degrees.
    #[arg(long, allow_hyphen_values = true)]
    angle: f64,
    #[arg(long, value_enum, default_value = "steer")]
    method: RotateMethod,
    /// Steer only the basis projection, dropping the out-of-span residual.
    #[arg(long)]
    projection_only: bool,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 11)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    atoms: usize,
    #[arg(long, default_value_t = 2)]
    sparsity: usize,
    #[arg(long, default_value_t = 36)]
    angles: usize,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    patches_per_image: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// standard, standard_aug or rotational.
    #[arg(long, default_value = "rotational")]
    mode: TrainMode,
}

impl ModelArgs {
    fn params(&self) -> ClassParams {
        ClassParams {
            n: self.n,
            atoms: self.atoms,
            sparsity: self.sparsity,
            rotations: self.angles,
            iterations: self.iters,
            patches_per_image: self.patches_per_image,
            stride: self.stride,
        }
    }
}

#[derive(Subcommand, Debug)]
enum ClassifyCommand {
    /// Train class dictionaries and store the model directory.
    Train {
        /// Texture set directory (`manifest.csv`).
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the test split of a texture set.
    Test {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Per-image predictions CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hold-out cross-validation of (N, K, M) on the train split.
    Cv {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "11")]
        n_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        k_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "10,25")]
        m_list: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        /// Share of images held out per repeat.
        #[arg(long, default_value_t = 0.88)]
        fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum SweepCommand {
    /// K-SVD vs rotational K-SVD MSE over (M, K) on one image.
    Coding {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 11)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "10,20")]
        atoms: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        sparsity: Vec<usize>,
        #[arg(long, default_value_t = 36)]
        angles: usize,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// MSE after each learning iteration.
    Convergence {
        #[command(flatten)]
        source: PatchSource,
        #[arg(long, default_value_t = 11)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        atoms: usize,
        #[arg(long, default_value_t = 2)]
        sparsity: usize,
        #[arg(long, default_value_t = 60)]
        angles: usize,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Final MSE for each rotation count.
    Angles {
        #[command(flatten)]
        source: PatchSource,
        #[arg(long, default_value_t = 11)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        atoms: usize,
        #[arg(long, default_value_t = 2)]
        sparsity: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,10,20,40,60")]
        angles: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Time nearest, bicubic, steering and half-cutoff steering rotations.
    Rotate {
        #[arg(long, value_delimiter = ',', default_value = "11,21,31")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        patches: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Spread patches over the thread pool.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct MontageArgs {
    #[arg(long)]
    dict: PathBuf,
    /// Show each atom at this many evenly spaced rotations.
    #[arg(long, default_value_t = 1)]
    rotations: usize,
    #[arg(long)]
    columns: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn images_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_pgm(p))
        .collect();
    out.sort();
    Ok(out)
}

/// Load patches of diameter `n` from any supported source.
fn load_patches(src: &PatchSource, n: usize, seed: u64) -> Result<PatchSet> {
    let input = &src.input;
    let mut set = if input.is_dir() && input.join("patches.csv").is_file() {
        read_patches_csv(input.join("patches.csv"))?
    } else if input.is_file() && !is_pgm(input) {
        read_patches_csv(input)?
    } else {
        let images = if input.is_dir() && input.join("manifest.csv").is_file() {
            LabeledImageSet::load(input)?
                .split(Split::Train)
                .map(|i| i.image.clone())
                .collect()
        } else if input.is_dir() {
            images_in(input)?
                .iter()
                .map(load_pgm)
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![load_pgm(input)?]
        };
        let mut all: Option<PatchSet> = None;
        for (k, img) in images.iter().enumerate() {
            let s = extract_patches_tagged(img, k, n, src.stride, true)?;
            match &mut all {
                Some(a) => a.extend(s)?,
                None => all = Some(s),
            }
        }
        all.ok_or_else(|| Error::format(input, 0, "no PGM images found"))?
    };
    if set.n != n {
        return Err(Error::invalid(format!(
            "{} holds N = {} patches but N = {n} was requested",
            input.display(),
            set.n
        )));
    }
    if let Some(cap) = src.cap.filter(|&c| c < set.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = rand::seq::index::sample(&mut rng, set.len(), cap).into_vec();
        keep.sort_unstable();
        set.patches = keep.iter().map(|&i| set.patches[i].clone()).collect();
        if !set.origins.is_empty() {
            set.origins = keep.iter().map(|&i| set.origins[i]).collect();
        }
    }
    if set.is_empty() {
        return Err(Error::format(input, 0, "no usable patches"));
    }
    Ok(set)
}

fn analyze_all(basis: &SteerableBasis, set: &PatchSet) -> Result<Vec<SteerableCoeffs>> {
    use rayon::prelude::*;
    set.patches.par_iter().map(|p| basis.analyze(p)).collect()
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Synth(SynthCommand::Crosses { count, n, out }) => {
            let (set, atom) = synth_crosses(*count, *n, seed)?;
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            write_patches_csv(out.join("patches.csv"), &set)?;
            let template = PatchSet {
                patches: vec![atom.clone()],
                ..set.clone()
            };
            write_patches_csv(out.join("template.csv"), &template)?;
            save_pgm(&montage(&[atom], *n, 1)?, out.join("template.pgm"))?;
            println!("wrote {} patches to {}", set.len(), out.display());
        }
        Command::Synth(SynthCommand::Textures {
            classes,
            count,
            size,
            out,
        }) => {
            let set = synth_textures(*classes, *count, *size, seed)?;
            set.save(out)?;
            println!("wrote {} images to {}", set.items.len(), out.display());
        }
        Command::Learn(a) => {
            let set = load_patches(&a.source, a.n, seed)?;
            let basis = SteerableBasis::new(&BasisSpec::new(a.n))?;
            let coeffs = analyze_all(&basis, &set)?;
            let config = LearnConfig::new(a.atoms, a.sparsity, a.angles, a.iters).with_seed(seed);
            let (dict, codes, report) = match a.method {
                Method::Ksvd => ksvd_learn(&basis, &coeffs, &config)?,
                Method::Rksvd => rksvd_learn(&basis, &coeffs, &config)?,
            };
            write_dictionary(&a.out, &dict)?;
            if let Some(p) = &a.codes {
                write_codes_csv(p, &codes)?;
            }
            let scale = MSE_SCALE / coeffs.len() as f64;
            if cli.verbose {
                for (i, o) in report.objectives.iter().enumerate() {
                    eprintln!("iteration {}: mse {:.6}", i + 1, o * scale);
                }
                eprintln!(
                    "resets {}, usage {:?}, {:.2}s",
                    report.resets, report.usage, report.seconds
                );
            }
            println!("patches {}", coeffs.len());
            println!("initial_mse {:.6}", report.initial_objective * scale);
            println!(
                "mse {:.6}",
                report.objectives.last().copied().unwrap_or(0.0) * scale
            );
        }
        Command::Code(a) => {
            let dict = read_dictionary(&a.dict)?;
            let basis = dict.basis()?;
            let set = load_patches(&a.source, basis.n(), seed)?;
            let coeffs = analyze_all(&basis, &set)?;
            let rotations = a.angles.unwrap_or(dict.spec.r);
            let (codes, err) = code_set(&basis, &dict, &coeffs, a.sparsity, rotations)?;
            write_codes_csv(&a.out, &codes)?;
            println!("patches {}", coeffs.len());
            println!("mse {:.6}", MSE_SCALE * err / coeffs.len() as f64);
        }
        Command::Rotate(a) => {
            let image = load_pgm(&a.input)?;
            let method = match a.method {
                RotateMethod::Steer => RotationMethod::Steer,
                RotateMethod::Nearest => RotationMethod::Nearest,
                RotateMethod::Bicubic => RotationMethod::Bicubic,
            };
            let mut out = rotate_image(&image, a.angle.to_radians(), method, !a.projection_only)?;
            out.clamp_unit();
            save_pgm(&out, &a.out)?;
            println!("wrote {}", a.out.display());
        }
        Command::Classify(ClassifyCommand::Train { input, model, out }) => {
            let set = LabeledImageSet::load(input)?;
            let m = ClassifierModel::train(&set, &model.params(), model.mode, seed)?;
            save_model(&m, out)?;
            println!(
                "trained {} classes on {} images",
                m.classes(),
                m.labels.len()
            );
        }
        Command::Classify(ClassifyCommand::Test { model, input, out }) => {
            let m = load_model(model)?;
            let set = LabeledImageSet::load(input)?;
            let mut csv = String::from("image,label,predicted\n");
            let (mut total, mut correct) = (0, 0);
            for (i, item) in set.split(Split::Test).enumerate() {
                let p = m.classify(&item.image)?;
                csv.push_str(&format!("{i},{},{p}\n", item.label));
                total += 1;
                correct += usize::from(p == item.label);
            }
            if total == 0 {
                return Err(Error::format(
                    input.join("manifest.csv"),
                    0,
                    "no test images",
                ));
            }
            if let Some(p) = out {
                fs::write(p, csv).map_err(|e| Error::io(p, e))?;
            }
            println!(
                "accuracy {:.6} ({correct}/{total})",
                correct as f64 / total as f64
            );
        }
        Command::Classify(ClassifyCommand::Cv {
            input,
            model,
            n_list,
            k_list,
            m_list,
            repeats,
            fraction,
            out,
        }) => {
            let set = LabeledImageSet::load(input)?;
            let grid = SweepGrid {
                n: n_list.clone(),
                k: k_list.clone(),
                m: m_list.clone(),
                repeats: *repeats,
                fraction: *fraction,
                ..SweepGrid::default()
            };
            let r = cross_validate(&set, &grid, &model.params(), model.mode, seed)?;
            write_sweep_csv(out, &r.table)?;
            println!(
                "best N={} K={} M={} accuracy {:.6} ± {:.6}",
                r.best.n, r.best.k, r.best.m, r.best.accuracy_mean, r.best.accuracy_std
            );
        }
        Command::Sweep(SweepCommand::Coding {
            input,
            n,
            atoms,
            sparsity,
            angles,
            iters,
            cap,
            out,
        }) => {
            let image = load_pgm(input)?;
            let config = CodingSweepConfig {
                n: *n,
                atoms: atoms.clone(),
                sparsity: sparsity.clone(),
                rotations: *angles,
                iterations: *iters,
                cap: *cap,
                seed,
            };
            let rows = sweep_coding(&image, &config)?;
            write_sweep_coding_csv(out, &rows)?;
            for r in &rows {
                println!("{} M={} K={} mse {:.6}", r.method.as_str(), r.m, r.k, r.mse);
            }
        }
        Command::Sweep(SweepCommand::Convergence {
            source,
            n,
            atoms,
            sparsity,
            angles,
            iters,
            out,
        }) => {
            let set = load_patches(source, *n, seed)?;
            let basis = SteerableBasis::new(&BasisSpec::new(*n))?;
            let coeffs = analyze_all(&basis, &set)?;
            let config = LearnConfig::new(*atoms, *sparsity, *angles, *iters).with_seed(seed);
            let points = sweep_convergence(&basis, &coeffs, &config)?;
            write_convergence_csv(out, &points)?;
            for p in &points {
                println!("iter {} mse {:.6}", p.iter, p.mse);
            }
        }
        Command::Sweep(SweepCommand::Angles {
            source,
            n,
            atoms,
            sparsity,
            angles,
            iters,
            out,
        }) => {
            let set = load_patches(source, *n, seed)?;
            let basis = SteerableBasis::new(&BasisSpec::new(*n))?;
            let coeffs = analyze_all(&basis, &set)?;
            let config = LearnConfig::new(*atoms, *sparsity, 1, *iters).with_seed(seed);
            let points = sweep_angles(&basis, &coeffs, &config, angles)?;
            write_angles_csv(out, &points)?;
            for p in &points {
                println!("R {} mse {:.6}", p.r, p.mse);
            }
        }
        Command::Bench(BenchCommand::Rotate {
            sizes,
            patches,
            runs,
            parallel,
            out,
        }) => {
            let config = BenchConfig {
                sizes: sizes.clone(),
                patch_count: *patches,
                runs: *runs,
                seed,
                parallel: *parallel,
            };
            let results = bench_rotation(&config)?;
            write_bench_csv(out, &results)?;
            let mode = if *parallel {
                "parallel"
            } else {
                "single-threaded"
            };
            for r in &results {
                println!(
                    "{:<10} N={:<3} {:>12.0} patches/s ({mode})",
                    r.method.as_str(),
                    r.n,
                    r.patches_per_sec
                );
            }
            println!(
                "steering cost vs basis size: R^2 = {:.4}",
                steer_cost_r2(&results)
            );
        }
        Command::Montage(a) => {
            let dict = read_dictionary(&a.dict)?;
            let basis = dict.basis()?;
            if a.rotations == 0 {
                return Err(Error::InvalidArgument("--rotations must be >= 1".into()));
            }
            let mut tiles = Vec::new();
            for atom in &dict.atoms {
                for r in 0..a.rotations {
                    tiles.push(
                        basis.synthesize(&steer(atom, &basis.steering_phases(r, a.rotations)?)?)?,
                    );
                }
            }
            let columns = a.columns.unwrap_or(a.rotations.max(1));
            save_pgm(&montage(&tiles, basis.n(), columns)?, &a.out)?;
            println!("wrote {} tiles to {}", tiles.len(), a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                if e.kind() == ErrorKind::DisplayVersion {
                    println!("rotsparse {LONG_VERSION}{FORMAT_VERSIONS}");
                } else {
                    let _ = e.print();
                }
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    println!("# rotsparse {} {:?}", env!("CARGO_PKG_VERSION"), cli);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
