//! The `bfdn` command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    bias_sweep, eval_sweep, homogeneity_deviation, jacobian_full, nested_overlap, projection_energy,
    psnr_slope, svd_analyze, SvdAnalysis,
};
use crate::error::{Error, Result};
use crate::io::config::ExperimentConfig;
use crate::io::csv::{fmt_f64, sha256_hex, write_table, CsvProvenance};
use crate::io::pgm::{load_pgm, save_pgm, scaled_image, PgmImage};
use crate::io::synth::{synth_dataset, synth_images, DatasetManifest, Split};
use crate::model::{self, Mode, Model};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::{psnr, sample_noise, train, Dataset, NoiseDistribution};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "BFDN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bfdn", version, about = "Bias-free CNN denoisers: train, denoise, analyze")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Seed for every random draw (overrides a config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Byte-reproducible outputs (zero wall-time columns).
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model from a config on a directory of PGM images.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV (default: `<out>.log.csv`).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Add noise at `sigma` to an image and denoise it.
    Denoise {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also save the noisy image.
        #[arg(long)]
        noisy_out: Option<PathBuf>,
    },
    /// PSNR/SSIM of a model over a range of noise levels.
    EvalSweep {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
        #[arg(long, default_value = "gaussian")]
        dist: NoiseDistribution,
        #[arg(long)]
        out: PathBuf,
        /// Use at most this many images.
        #[arg(long)]
        images: Option<usize>,
    },
    #[command(subcommand)]
    Analyze(Analyze),
    #[command(subcommand)]
    Check(Check),
    /// Write a synthetic piecewise-smooth dataset.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Analyze {
    /// Residual and net-bias magnitudes against noise level.
    Bias {
        #[arg(long)]
        ckpt: PathBuf,
        /// Image directory; synthetic images are used when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70,80,90,100")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 40)]
        patch: usize,
        #[arg(long, default_value_t = 4)]
        images: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adaptive filters at chosen pixels and a local-linearity report.
    Jacobian {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        /// `i1,j1;i2,j2;...` in the analyzed crop.
        #[arg(long)]
        pixels: String,
        #[arg(long, default_value_t = 40)]
        patch: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Jacobian spectra, dimensionality, projections and nesting.
    Svd {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 40)]
        patch: usize,
        /// Left singular vectors emitted as images per noise level.
        #[arg(long, default_value_t = 8)]
        vectors: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Check {
    /// Worst relative deviation from `f(αy) = α f(y)`.
    Homogeneity {
        /// Checkpoint to test; without one a fresh model is built from
        /// `--config` (or the default config).
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, conflicts_with = "ckpt")]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,1,2,7.5")]
        alphas: Vec<f64>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        size: usize,
        /// Exit with status 1 when the deviation exceeds this.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

/// Run the command line; returns the process exit status (0 success,
/// 2 usage or validation failure, 1 runtime failure).
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_threads();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Invalid(_) | Error::Shape(_) => 2,
        _ => 1,
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.common.seed.unwrap_or(0);
    let deterministic = cli.common.deterministic;
    let provenance = CsvProvenance::new(seed, &fingerprint(&cli.command)?);
    match cli.command {
        Command::Train { config, data, out, log } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = cli.common.seed {
                cfg.set_seed(s);
            }
            cfg.train.deterministic |= deterministic;
            cfg.validate()?;
            let manifest = DatasetManifest::open(&data)?;
            let train_imgs = manifest.load(Split::Train)?;
            let val_imgs = manifest.load(Split::Validation)?;
            let dataset = if val_imgs.is_empty() {
                Dataset::split(train_imgs, cfg.train.validation_fraction, &mut Rng::new(cfg.seed).fork(2))
            } else {
                Dataset {
                    train: train_imgs,
                    validation: val_imgs,
                }
            };
            let model = Model::build(&cfg.model, &mut Rng::new(cfg.seed))?;
            let outcome = train(model, &dataset, &cfg.train)?;
            model::save(&outcome.model, Some(&outcome.optimizer), &out)?;
            let log_path = log.unwrap_or_else(|| with_suffix(&out, ".log.csv"));
            let mut w = create(&log_path)?;
            outcome.log.write_csv(&mut w, &cfg.provenance())?;
            w.flush()?;
            cfg.save(with_suffix(&out, ".config.json"))?;
            let last = outcome.log.rows.last().expect("at least one epoch");
            println!(
                "trained {} ({} bias) for {} steps; final mse {:.4}, val psnr {:.2} dB -> {}",
                cfg.model.arch.name(),
                if cfg.model.bias_enabled { "with" } else { "without" },
                outcome.steps,
                last.mse,
                last.val_psnr,
                out.display()
            );
        }
        Command::Denoise {
            ckpt,
            input,
            sigma,
            out,
            noisy_out,
        } => {
            let (model, _) = model::load(&ckpt)?;
            let x: Tensor<f64> = load_pgm(&input)?.to_tensor();
            let x = model.crop_for_arch(&x)?;
            let noise = sample_noise::<f64>(x.shape(), sigma, NoiseDistribution::Gaussian, &mut Rng::new(seed))?;
            let y = x.add(&noise)?;
            let f = model.forward(&y, Mode::Infer)?;
            save_pgm(&PgmImage::from_tensor(&f)?, &out)?;
            if let Some(p) = noisy_out {
                save_pgm(&PgmImage::from_tensor(&y)?, p)?;
            }
            if sigma > 0.0 {
                println!(
                    "sigma {sigma}: noisy {} dB, denoised {} dB",
                    fmt_f64(psnr(&x, &y)?),
                    fmt_f64(psnr(&x, &f)?)
                );
            }
        }
        Command::EvalSweep {
            ckpt,
            data,
            sigmas,
            dist,
            out,
            images,
        } => {
            let (model, _) = model::load(&ckpt)?;
            let imgs = eval_images(&data, images)?;
            let table = eval_sweep(&model, &imgs, &sigmas, dist, seed)?;
            let mut w = create(&out)?;
            table.write_csv(&mut w, &provenance)?;
            w.flush()?;
            if let Some([_, hi]) = model.provenance.train_sigma {
                if let Ok(slope) = psnr_slope(&table, hi + f64::EPSILON, f64::INFINITY) {
                    println!("output/input PSNR slope beyond the training range: {slope:.3}");
                }
            }
        }
        Command::Analyze(a) => analyze(a, seed, &provenance)?,
        Command::Check(Check::Homogeneity {
            ckpt,
            config,
            alphas,
            input,
            size,
            tolerance,
        }) => {
            let model = match (ckpt, config) {
                (Some(p), _) => model::load(p)?.0,
                (None, cfg) => {
                    let mut cfg = match cfg {
                        Some(p) => ExperimentConfig::load(p)?,
                        None => ExperimentConfig::default(),
                    };
                    if let Some(s) = cli.common.seed {
                        cfg.set_seed(s);
                    }
                    Model::build(&cfg.model, &mut Rng::new(cfg.seed))?
                }
            };
            let y: Tensor<f64> = match input {
                Some(p) => load_pgm(p)?.to_tensor(),
                None => {
                    let mut rng = Rng::new(seed);
                    Tensor::from_fn(vec![1, size, size], |_| rng.uniform(0.0, 255.0))
                }
            };
            let dev = homogeneity_deviation(&model, &y, &alphas)?;
            println!(
                "{} ({} bias), alphas {:?}: max relative deviation {:e}",
                model.arch().name(),
                if model.config().bias_enabled { "with" } else { "without" },
                alphas,
                dev
            );
            if let Some(tol) = tolerance {
                if dev > tol {
                    return Err(Error::Diverged(format!("deviation {dev:e} exceeds tolerance {tol:e}")));
                }
            }
        }
        Command::Synth { count, size, out } => {
            let m = synth_dataset(count, size, seed, &out)?;
            println!("wrote {} images to {}", m.files.len(), out.display());
        }
    }
    Ok(())
}

fn analyze(cmd: Analyze, seed: u64, provenance: &CsvProvenance) -> Result<()> {
    match cmd {
        Analyze::Bias {
            ckpt,
            data,
            sigmas,
            patch,
            images,
            out,
        } => {
            let (model, _) = model::load(&ckpt)?;
            let imgs: Vec<Tensor<f64>> = match data {
                Some(d) => eval_images(&d, Some(images))?,
                None => synth_images(images, patch.max(32), seed).iter().map(Tensor::cast).collect(),
            };
            let imgs = imgs.iter().map(|x| center_crop(x, patch)).collect::<Result<Vec<_>>>()?;
            let table = bias_sweep(&model, &imgs, &sigmas, seed)?;
            let mut w = create(&out)?;
            table.write_csv(&mut w, provenance)?;
            w.flush()?;
        }
        Analyze::Jacobian {
            ckpt,
            input,
            sigma,
            pixels,
            patch,
            out_dir,
        } => {
            let (model, _) = model::load(&ckpt)?;
            let pixels = parse_pixels(&pixels)?;
            let x = center_crop(&load_pgm(&input)?.to_tensor(), patch)?;
            let x = model.crop_for_arch(&x)?;
            let noise = sample_noise::<f64>(x.shape(), sigma, NoiseDistribution::Gaussian, &mut Rng::new(seed))?;
            let y = x.add(&noise)?;
            let lm = jacobian_full(&model, &y)?;
            std::fs::create_dir_all(&out_dir)?;
            save_pgm(&PgmImage::from_tensor(&x)?, out_dir.join("clean.pgm"))?;
            save_pgm(&PgmImage::from_tensor(&y)?, out_dir.join("noisy.pgm"))?;
            save_pgm(&PgmImage::from_tensor(&lm.f)?, out_dir.join("denoised.pgm"))?;
            let mut scaling = String::from("# file min max (linear map [min,max] -> [0,255])\n");
            let mut rows = Vec::new();
            for &(i, j) in &pixels {
                let filt = lm.filter(i, j)?;
                let name = format!("filter_{i}_{j}.pgm");
                let (img, lo, hi) = scaled_image(filt.data(), lm.height, lm.width)?;
                save_pgm(&img, out_dir.join(&name))?;
                scaling.push_str(&format!("{name} {} {}\n", fmt_f64(lo), fmt_f64(hi)));
                rows.push(vec![i.to_string(), j.to_string(), fmt_f64(filt.sum())]);
            }
            std::fs::write(out_dir.join("scaling.txt"), scaling)?;
            let mut w = create(&out_dir.join("filters.csv"))?;
            write_table(&mut w, provenance, &["i", "j", "row_sum"], &rows)?;
            w.flush()?;
            let report = format!(
                "pixels {}\nsigma {}\n|f(y) - A y| / |f(y)| = {:e}\n|b| / |f(y)| = {:e}\nactive relu units {}\n",
                lm.n(),
                fmt_f64(sigma),
                lm.linear_residual(),
                lm.b.norm() / lm.f.norm(),
                lm.mask_record.active_count()
            );
            std::fs::write(out_dir.join("linearity.txt"), &report)?;
            print!("{report}");
        }
        Analyze::Svd {
            ckpt,
            input,
            sigmas,
            patch,
            vectors,
            out_dir,
        } => {
            let (model, _) = model::load(&ckpt)?;
            let x = center_crop(&load_pgm(&input)?.to_tensor(), patch)?;
            let x = model.crop_for_arch(&x)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut analyses: Vec<SvdAnalysis> = Vec::new();
            let mut summary = Vec::new();
            let mut spectrum = Vec::new();
            let mut scaling = String::from("# file min max (linear map [min,max] -> [0,255])\n");
            for (row, &sigma) in sigmas.iter().enumerate() {
                let mut rng = crate::analysis::noise_stream(seed, row, 0);
                let y = x.add(&sample_noise(x.shape(), sigma, NoiseDistribution::Gaussian, &mut rng)?)?;
                let lm = jacobian_full(&model, &y)?;
                let s = svd_analyze(&lm, sigma)?;
                let energy = projection_energy(&s, x.data(), s.d.min(s.n() as f64))?;
                summary.push(vec![
                    fmt_f64(sigma),
                    fmt_f64(s.d),
                    fmt_f64(s.median_alignment()),
                    fmt_f64(s.fraction_below(0.1)),
                    fmt_f64(energy),
                    fmt_f64(lm.linear_residual()),
                ]);
                for (k, (sv, al)) in s.s.iter().zip(&s.alignment).enumerate() {
                    spectrum.push(vec![fmt_f64(sigma), k.to_string(), fmt_f64(*sv), fmt_f64(*al)]);
                }
                for k in 0..vectors.min(s.n()) {
                    let name = format!("u_sigma{}_{k}.pgm", fmt_f64(sigma));
                    let (img, lo, hi) = scaled_image(&s.left(k), lm.height, lm.width)?;
                    save_pgm(&img, out_dir.join(&name))?;
                    scaling.push_str(&format!("{name} {} {}\n", fmt_f64(lo), fmt_f64(hi)));
                }
                analyses.push(s);
            }
            let mut nested = Vec::new();
            for i in 0..analyses.len() {
                for j in i + 1..analyses.len() {
                    nested.push(vec![
                        fmt_f64(analyses[i].sigma),
                        fmt_f64(analyses[j].sigma),
                        fmt_f64(nested_overlap(&analyses[i], &analyses[j])?),
                    ]);
                }
            }
            std::fs::write(out_dir.join("scaling.txt"), scaling)?;
            for (file, header, rows) in [
                (
                    "summary.csv",
                    &["sigma", "d", "median_alignment", "fraction_below_0.1", "projection_energy", "linear_residual"][..],
                    summary,
                ),
                ("spectrum.csv", &["sigma", "index", "singular_value", "alignment"][..], spectrum),
                ("nested.csv", &["sigma_low", "sigma_high", "overlap"][..], nested),
            ] {
                let mut w = create(&out_dir.join(file))?;
                write_table(&mut w, provenance, header, &rows)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

/// Bytes identifying what a command computes: its non-path arguments and
/// the contents of the files it reads. Output locations are left out, so
/// the same experiment written elsewhere carries the same checksum.
fn fingerprint(cmd: &Command) -> Result<Vec<u8>> {
    let mut parts = Vec::new();
    match cmd {
        Command::EvalSweep {
            ckpt,
            data,
            sigmas,
            dist,
            images,
            ..
        } => {
            parts.push(format!("eval-sweep sigmas={sigmas:?} dist={} images={images:?}", dist.name()));
            parts.push(content_hash(ckpt)?);
            parts.push(content_hash(data)?);
        }
        Command::Analyze(Analyze::Bias {
            ckpt,
            data,
            sigmas,
            patch,
            images,
            ..
        }) => {
            parts.push(format!("analyze-bias sigmas={sigmas:?} patch={patch} images={images}"));
            parts.push(content_hash(ckpt)?);
            if let Some(d) = data {
                parts.push(content_hash(d)?);
            }
        }
        Command::Analyze(Analyze::Jacobian {
            ckpt,
            input,
            sigma,
            pixels,
            patch,
            ..
        }) => {
            parts.push(format!("analyze-jacobian sigma={sigma} pixels={pixels} patch={patch}"));
            parts.push(content_hash(ckpt)?);
            parts.push(content_hash(input)?);
        }
        Command::Analyze(Analyze::Svd {
            ckpt,
            input,
            sigmas,
            patch,
            vectors,
            ..
        }) => {
            parts.push(format!("analyze-svd sigmas={sigmas:?} patch={patch} vectors={vectors}"));
            parts.push(content_hash(ckpt)?);
            parts.push(content_hash(input)?);
        }
        other => parts.push(format!("{other:?}")),
    }
    Ok(parts.join("\n").into_bytes())
}

/// SHA-256 of a file, or of the sorted `name:hash` lines of a directory's
/// files.
fn content_hash(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return Ok(sha256_hex(&std::fs::read(path)?));
    }
    let mut entries = Vec::new();
    for e in std::fs::read_dir(path)? {
        let e = e?;
        if e.file_type()?.is_file() {
            let bytes = std::fs::read(e.path())?;
            entries.push(format!("{}:{}", e.file_name().to_string_lossy(), sha256_hex(&bytes)));
        }
    }
    entries.sort();
    Ok(sha256_hex(entries.join("\n").as_bytes()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Test split when the directory has one, otherwise every image.
fn eval_images(dir: &Path, limit: Option<usize>) -> Result<Vec<Tensor<f64>>> {
    let manifest = DatasetManifest::open(dir)?;
    let split = if manifest.files_in(Split::Test).next().is_some() {
        Split::Test
    } else {
        Split::Train
    };
    let mut imgs: Vec<Tensor<f64>> = manifest.load(split)?.iter().map(Tensor::cast).collect();
    if let Some(n) = limit {
        imgs.truncate(n);
    }
    if imgs.is_empty() {
        return Err(Error::invalid(format!("no images found in {}", dir.display())));
    }
    Ok(imgs)
}

/// Central `size x size` window (the whole image when it is smaller).
pub fn center_crop(x: &Tensor<f64>, size: usize) -> Result<Tensor<f64>> {
    let (b, c, h, w) = x.dims4()?;
    if b * c != 1 {
        return Err(Error::shape("expected a single-channel image"));
    }
    let (nh, nw) = (h.min(size), w.min(size));
    let (top, left) = ((h - nh) / 2, (w - nw) / 2);
    let mut data = Vec::with_capacity(nh * nw);
    for r in top..top + nh {
        data.extend_from_slice(&x.data()[r * w + left..r * w + left + nw]);
    }
    Tensor::new(vec![1, nh, nw], data)
}

fn parse_pixels(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let mut it = p.split(',').map(|v| v.trim().parse::<usize>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => Ok((i, j)),
                _ => Err(Error::invalid(format!("bad pixel `{p}`, expected `i,j`"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_lists() {
        assert_eq!(parse_pixels("1,2;3,4").unwrap(), [(1, 2), (3, 4)]);
        assert!(parse_pixels("1;2").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["bfdn", "frobnicate"]), 2);
        assert_eq!(run(["bfdn", "synth", "--count", "1", "--bogus"]), 2);
        assert_eq!(run(["bfdn", "--help"]), 0);
    }

    #[test]
    fn crop_is_central() {
        let x = Tensor::from_fn(vec![1, 4, 4], |i| i as f64);
        assert_eq!(center_crop(&x, 2).unwrap().data(), [5.0, 6.0, 9.0, 10.0]);
        assert_eq!(center_crop(&x, 9).unwrap(), x);
    }
}
