//! Mini-batch MSE training of a denoiser.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::metrics::psnr_from_mse;
use super::noise::NoiseSpec;
use super::patches::{make_patches, Augment};
use crate::error::{Error, Result};
use crate::io::csv::{fmt_f64, write_table, CsvProvenance};
use crate::model::{Arch, Mode, Model, Param};
use crate::rng::Rng;
use crate::tape::GradScope;
use crate::tensor::Tensor;

/// Learning-rate schedule applied at the end of each epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant,
    /// Multiply by `factor` after each listed (1-based) epoch.
    Milestones { epochs: Vec<usize>, factor: f64 },
    /// Multiply by `factor` whenever validation PSNR falls below the
    /// previous epoch's.
    Plateau { factor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub noise: NoiseSpec,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Optimizer steps per epoch; `None` means one pass over the patches.
    pub steps_per_epoch: Option<usize>,
    pub lr_initial: f64,
    pub schedule: Schedule,
    /// Return the parameters of the epoch with the best validation PSNR and
    /// stop after `patience` epochs without improvement.
    pub early_stopping: bool,
    pub patience: usize,
    pub augment: Augment,
    pub seed: u64,
    pub optimizer: AdamConfig,
    pub validation_fraction: f64,
    /// Upper bound on the number of fixed noisy validation patches.
    pub validation_patches: usize,
    /// Record zero wall time so logs are byte-reproducible.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    /// Desk-scale defaults: 40x40 patches, 4,000 steps.
    fn default() -> Self {
        Self {
            noise: NoiseSpec::default(),
            patch_size: 40,
            patch_stride: 20,
            batch_size: 8,
            epochs: 20,
            steps_per_epoch: Some(200),
            lr_initial: 1e-3,
            schedule: Schedule::Milestones {
                epochs: vec![14, 17],
                factor: 0.5,
            },
            early_stopping: false,
            patience: 5,
            augment: Augment::default(),
            seed: 0,
            optimizer: AdamConfig::default(),
            validation_fraction: 0.1,
            validation_patches: 32,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    /// Full-scale recipe of each architecture (50x50 patches and a
    /// milestone schedule for dncnn, 128x128 patches with a plateau schedule
    /// and early stopping for the others).
    pub fn full(arch: Arch) -> Self {
        let base = Self {
            batch_size: 128,
            steps_per_epoch: None,
            validation_patches: 256,
            ..Self::default()
        };
        match arch {
            Arch::Dncnn => Self {
                patch_size: 50,
                patch_stride: 10,
                epochs: 70,
                schedule: Schedule::Milestones {
                    epochs: vec![50, 60],
                    factor: 0.5,
                },
                ..base
            },
            _ => Self {
                patch_size: 128,
                patch_stride: 10,
                epochs: 50,
                schedule: Schedule::Plateau { factor: 0.25 },
                early_stopping: true,
                patience: 50,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.patch_size < 8 {
            return Err(Error::config(format!("patch_size must be >= 8, got {}", self.patch_size)));
        }
        if self.patch_stride == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("patch_stride, batch_size and epochs must be positive"));
        }
        if self.steps_per_epoch == Some(0) {
            return Err(Error::config("steps_per_epoch must be positive"));
        }
        if !(self.lr_initial > 0.0 && self.lr_initial.is_finite()) {
            return Err(Error::config(format!("lr_initial must be > 0, got {}", self.lr_initial)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        match &self.schedule {
            Schedule::Milestones { factor, .. } | Schedule::Plateau { factor } if !(*factor > 0.0) => {
                Err(Error::config("schedule factor must be > 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Clean images split into training and validation sets.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub train: Vec<Tensor<f32>>,
    pub validation: Vec<Tensor<f32>>,
}

impl Dataset {
    /// Seeded split holding out `round(fraction * n)` images (at least one
    /// when `fraction > 0` and `n >= 2`).
    pub fn split(images: Vec<Tensor<f32>>, fraction: f64, rng: &mut Rng) -> Self {
        let n = images.len();
        let mut n_val = (fraction * n as f64).round() as usize;
        if fraction > 0.0 && n >= 2 {
            n_val = n_val.clamp(1, n - 1);
        }
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let held: std::collections::BTreeSet<usize> = order[..n_val].iter().copied().collect();
        let mut ds = Dataset::default();
        for (i, img) in images.into_iter().enumerate() {
            if held.contains(&i) {
                ds.validation.push(img);
            } else {
                ds.train.push(img);
            }
        }
        ds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRow {
    pub epoch: usize,
    pub mse: f64,
    pub val_psnr: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainRow>,
    /// `[sigma_min, sigma_max]` the model was trained on.
    pub train_sigma: [f64; 2],
    pub noise: String,
}

impl TrainLog {
    pub const HEADER: [&'static str; 5] = ["epoch", "mse", "val_psnr", "lr", "seconds"];

    /// Epoch with the highest validation PSNR (earliest on ties).
    pub fn best_epoch(&self) -> Option<usize> {
        let mut best: Option<&TrainRow> = None;
        for r in &self.rows {
            if best.is_none_or(|b| r.val_psnr > b.val_psnr) {
                best = Some(r);
            }
        }
        best.map(|r| r.epoch)
    }

    pub fn write_csv(&self, w: &mut impl Write, provenance: &CsvProvenance) -> Result<()> {
        writeln!(
            w,
            "# train_sigma={},{} noise={}",
            fmt_f64(self.train_sigma[0]),
            fmt_f64(self.train_sigma[1]),
            self.noise
        )?;
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.epoch.to_string(),
                    fmt_f64(r.mse),
                    fmt_f64(r.val_psnr),
                    fmt_f64(r.lr),
                    fmt_f64(r.seconds),
                ]
            })
            .collect();
        write_table(w, provenance, &Self::HEADER, &rows)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub optimizer: AdamState,
    pub steps: u64,
}

/// Fixed noisy validation pairs, `[B,1,P,P]` each.
struct Validation {
    batches: Vec<(Tensor<f32>, Tensor<f32>)>,
}

impl Validation {
    fn build(images: &[Tensor<f32>], cfg: &TrainConfig, rng: &mut Rng) -> Result<Self> {
        let p = cfg.patch_size;
        let set = make_patches(images, p, p, Augment::none(), rng)?;
        if set.is_empty() {
            return Ok(Self { batches: Vec::new() });
        }
        let want = cfg.validation_patches.max(1).min(set.len());
        let picked: Vec<&Tensor<f32>> = (0..want).map(|k| &set.patches[k * set.len() / want]).collect();
        let levels = validation_sigmas(&cfg.noise);
        let mut batches = Vec::new();
        for (b, chunk) in picked.chunks(16).enumerate() {
            let clean = stack(chunk.iter().copied(), p)?;
            let mut noisy = clean.clone();
            for (k, plane) in noisy.data_mut().chunks_mut(p * p).enumerate() {
                let sigma = levels[(b * 16 + k) % levels.len()];
                let n = cfg.noise.sample::<f32>(&[p * p], sigma, rng)?;
                for (v, d) in plane.iter_mut().zip(n.data()) {
                    *v += d;
                }
            }
            batches.push((clean, noisy));
        }
        Ok(Self { batches })
    }

    fn psnr(&self, model: &Model) -> Result<f64> {
        let (mut sq, mut count) = (0.0f64, 0usize);
        for (clean, noisy) in &self.batches {
            let out = model.forward(noisy, Mode::Infer)?;
            let clean = model.crop_for_arch(clean)?;
            for (a, b) in out.data().iter().zip(clean.data()) {
                let d = *a as f64 - *b as f64;
                sq += d * d;
            }
            count += out.len();
        }
        if count == 0 {
            return Ok(f64::NAN);
        }
        Ok(psnr_from_mse(sq / count as f64))
    }
}

/// Midpoints of three equal bins over the training range (one level when
/// the range is a point).
fn validation_sigmas(noise: &NoiseSpec) -> Vec<f64> {
    let (lo, hi) = (noise.sigma_min, noise.sigma_max);
    if hi == lo {
        vec![lo]
    } else {
        (0..3).map(|k| lo + (k as f64 + 0.5) / 3.0 * (hi - lo)).collect()
    }
}

fn stack<'a>(patches: impl Iterator<Item = &'a Tensor<f32>>, p: usize) -> Result<Tensor<f32>> {
    let mut data = Vec::new();
    let mut b = 0;
    for t in patches {
        data.extend_from_slice(t.data());
        b += 1;
    }
    Tensor::new(vec![b, 1, p, p], data)
}

/// Train `model` on `data` under `cfg`.
///
/// Every patch gets its own noise level drawn uniformly from the training
/// range, with fresh noise each time it is used. `rcnn` draws its number of
/// recurrence steps uniformly from `1..=t_max` per mini-batch.
pub fn train(mut model: Model, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let root = Rng::new(cfg.seed);
    let mut rng = root.fork(0);
    let mut val_rng = root.fork(1);
    // With no held-out images, validate on the training images.
    let val_images = if data.validation.is_empty() {
        &data.train
    } else {
        &data.validation
    };
    let validation = Validation::build(val_images, cfg, &mut val_rng)?;

    let trainable = model.trainable_indices();
    let mut state = AdamState::new(&model);
    let p = cfg.patch_size;
    let mut lr = cfg.lr_initial;
    let mut log = TrainLog {
        rows: Vec::new(),
        train_sigma: [cfg.noise.sigma_min, cfg.noise.sigma_max],
        noise: cfg.noise.distribution.name().to_string(),
    };
    let mut best: Option<(f64, Vec<Param>)> = None;
    let mut since_best = 0usize;
    let mut above_limit = 0usize;
    let mut first_mse: Option<f64> = None;
    let mut prev_psnr: Option<f64> = None;
    let mut steps = 0u64;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let set = make_patches(&data.train, p, cfg.patch_stride, cfg.augment, &mut rng)?;
        if set.is_empty() {
            return Err(Error::invalid(format!(
                "no training image holds a {p}x{p} patch ({} skipped)",
                set.skipped
            )));
        }
        let mut order: Vec<usize> = (0..set.len()).collect();
        rng.shuffle(&mut order);
        let n_steps = cfg
            .steps_per_epoch
            .unwrap_or_else(|| set.len().div_ceil(cfg.batch_size));
        let mut cursor = 0usize;
        let mut loss_sum = 0.0f64;

        for _ in 0..n_steps {
            let mut picked = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                if cursor == order.len() {
                    rng.shuffle(&mut order);
                    cursor = 0;
                }
                picked.push(&set.patches[order[cursor]]);
                cursor += 1;
            }
            let clean = stack(picked.into_iter(), p)?;
            let mut noisy = clean.clone();
            for plane in noisy.data_mut().chunks_mut(p * p) {
                let sigma = cfg.noise.draw_sigma(&mut rng);
                let n = cfg.noise.sample::<f32>(&[p * p], sigma, &mut rng)?;
                for (v, d) in plane.iter_mut().zip(n.data()) {
                    *v += d;
                }
            }

            let trace = if model.arch() == Arch::Rcnn {
                let t = 1 + rng.below(model.config().recurrence_t_max);
                model.trace_recurrent(&noisy, Mode::Train, t)?
            } else {
                model.trace(&noisy, Mode::Train)?
            };
            let out = trace.output_value();
            let target = model.crop_for_arch(&clean)?;
            let n = out.len() as f64;
            let mut loss = 0.0f64;
            let cot = out.zip_map(&target, |a, b| {
                (2.0 * (a as f64 - b as f64) / n) as f32
            })?;
            for (a, b) in out.data().iter().zip(target.data()) {
                let d = *a as f64 - *b as f64;
                loss += d * d;
            }
            loss /= n;
            let mut grads = trace.tape.backward_with(trace.output, &cot, GradScope::All)?;
            let grad_data: Vec<Vec<f32>> = trainable
                .iter()
                .map(|&i| match trace.param_vars[i].and_then(|v| grads.take(v)) {
                    Some(g) => g.into_data(),
                    None => vec![0.0; model.params()[i].len()],
                })
                .collect();
            model.update_running_stats(&trace.norm_stats);
            drop(trace);

            let mut slots: Vec<(&str, &mut [f32])> = model
                .params_mut()
                .iter_mut()
                .filter(|p| p.role.trainable())
                .map(|p| (p.name.as_str(), p.data.as_mut_slice()))
                .collect();
            let grad_refs: Vec<&[f32]> = grad_data.iter().map(Vec::as_slice).collect();
            adam_step(&mut slots, &grad_refs, &mut state, lr, &cfg.optimizer)?;
            loss_sum += loss;
            steps += 1;
        }

        let mse = loss_sum / n_steps as f64;
        let val_psnr = validation.psnr(&model)?;
        let seconds = if cfg.deterministic {
            0.0
        } else {
            started.elapsed().as_secs_f64()
        };
        log.rows.push(TrainRow {
            epoch,
            mse,
            val_psnr,
            lr,
            seconds,
        });

        let first = *first_mse.get_or_insert(mse);
        if mse > 10.0 * first {
            above_limit += 1;
            if above_limit >= 3 {
                return Err(Error::Diverged(format!(
                    "epoch {epoch}: training MSE {mse:.4} has exceeded 10x the first epoch's {first:.4} for 3 consecutive epochs"
                )));
            }
        } else {
            above_limit = 0;
        }

        if best.as_ref().is_none_or(|(b, _)| val_psnr > *b) {
            best = Some((val_psnr, model.params().to_vec()));
            since_best = 0;
        } else {
            since_best += 1;
        }

        match &cfg.schedule {
            Schedule::Constant => {}
            Schedule::Milestones { epochs, factor } => {
                if epochs.contains(&epoch) {
                    lr *= factor;
                }
            }
            Schedule::Plateau { factor } => {
                if prev_psnr.is_some_and(|prev| val_psnr < prev) {
                    lr *= factor;
                }
            }
        }
        prev_psnr = Some(val_psnr);
        if cfg.early_stopping && since_best >= cfg.patience {
            break;
        }
    }

    if cfg.early_stopping {
        if let Some((_, params)) = best {
            model.params_mut().clone_from_slice(&params);
        }
    }
    model.provenance.training_step += steps;
    model.provenance.train_sigma = Some(log.train_sigma);
    model.provenance.noise = Some(log.noise.clone());
    Ok(TrainOutcome {
        model,
        log,
        optimizer: state,
        steps,
    })
}
