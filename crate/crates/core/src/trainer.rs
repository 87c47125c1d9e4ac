//! Simultaneous multipath training.
//!
//! Every step runs all ordered translation paths on fresh unpaired batches:
//! one Adam update over all encoder/decoder parameters from the summed
//! adversarial + cycle losses (discriminators frozen), then one Adam update
//! over all discriminator parameters from the summed discriminator losses
//! evaluated on the detached synthetic batches. The learning rate is
//! constant for the first `epochs_constant` epochs and decays linearly to
//! exactly zero at `epochs_total`.
//!
//! Determinism: all sampling and augmentation streams are derived from
//! (run seed, domain, epoch), so equal seeds give bit-identical parameters
//! and resuming from an epoch-boundary checkpoint replays the same run.

use ndarray::{Array2, Array4};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::checkpoint::{load_checkpoint, save_checkpoint, TrainState};
use crate::domains::{DomainRegistry, TranslationPath};
use crate::error::{Error, Result};
use crate::losses::{cycle_loss, disc_loss, gen_adversarial_loss, LossConfig, StepLosses};
use crate::networks::{ArchConfig, ModelBundle};
use crate::nn::{derive_rng, AdamState};
use crate::volume::NormalizationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs_total: usize,
    /// Epochs at the initial learning rate before linear decay begins.
    pub epochs_constant: usize,
    pub batch_size: usize,
    /// Initial Adam step size.
    pub lr0: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub seed: u64,
    /// Checkpoint interval in epochs.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    /// Reference protocol: 30 epochs (15 constant + 15 decaying), batch 8,
    /// Adam at 2e-4 with beta1 = 0.5.
    fn default() -> Self {
        TrainConfig {
            epochs_total: 30,
            epochs_constant: 15,
            batch_size: 8,
            lr0: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            seed: 17,
            checkpoint_every: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_constant > self.epochs_total {
            return Err(Error::Config(format!(
                "epochs_constant ({}) must not exceed epochs_total ({})",
                self.epochs_constant, self.epochs_total
            )));
        }
        if self.epochs_total == 0 || self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config(
                "epochs_total, batch_size and checkpoint_every must be positive".into(),
            ));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Scheduled learning rate for a 0-based epoch index; valid through
/// `epochs_total` inclusive, where it reaches exactly zero.
pub fn learning_rate(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    if epoch > cfg.epochs_total {
        return Err(Error::Config(format!(
            "epoch {epoch} out of range 0..={}",
            cfg.epochs_total
        )));
    }
    let decay_epochs = cfg.epochs_total - cfg.epochs_constant + 1;
    let past_constant = (epoch + 1).saturating_sub(cfg.epochs_constant);
    Ok(cfg.lr0 * (1.0 - past_constant as f64 / decay_epochs as f64))
}

/// Mutable training session: model, optimizers and configuration.
pub struct Trainer {
    pub bundle: ModelBundle,
    pub gen_opt: AdamState,
    pub disc_opt: AdamState,
    pub loss_cfg: LossConfig,
    pub train_cfg: TrainConfig,
    /// Next epoch to run (0-based).
    pub epoch_next: usize,
}

impl Trainer {
    pub fn new(bundle: ModelBundle, train_cfg: TrainConfig, loss_cfg: LossConfig) -> Result<Trainer> {
        train_cfg.validate()?;
        loss_cfg.validate()?;
        let gen_opt = AdamState::new(&bundle.generator_params(), train_cfg.adam_beta1, train_cfg.adam_beta2);
        let disc_opt = AdamState::new(
            &bundle.discriminator_params(),
            train_cfg.adam_beta1,
            train_cfg.adam_beta2,
        );
        Ok(Trainer { bundle, gen_opt, disc_opt, loss_cfg, train_cfg, epoch_next: 0 })
    }

    /// Restores a session from a checkpoint with training state.
    pub fn resume(path: &Path) -> Result<Trainer> {
        let (bundle, state) = load_checkpoint(path)?;
        let state = state.ok_or_else(|| {
            Error::Checkpoint(format!(
                "`{}` has no training state; it is an inference-only export",
                path.display()
            ))
        })?;
        Ok(Trainer {
            bundle,
            gen_opt: state.gen_opt,
            disc_opt: state.disc_opt,
            loss_cfg: state.loss_cfg,
            train_cfg: state.train_cfg,
            epoch_next: state.epoch_next as usize,
        })
    }

    pub fn train_state(&self) -> TrainState {
        TrainState {
            epoch_next: self.epoch_next as u32,
            seed: self.train_cfg.seed,
            train_cfg: self.train_cfg,
            loss_cfg: self.loss_cfg,
            gen_opt: self.gen_opt.clone(),
            disc_opt: self.disc_opt.clone(),
        }
    }

    /// Generator pass for one path: forward, losses, and gradient
    /// accumulation into every encoder/decoder the path touches. Returns the
    /// synthetic batch (already detached — the discriminator update sees it
    /// as data), its score map and discriminator cache (reused by the
    /// discriminator update; its parameters do not change in between), and
    /// the two loss values. Takes the bundle explicitly so path groups can
    /// run on worker copies and merge gradients afterwards.
    fn generator_pass(bundle: &mut ModelBundle, cfg: LossConfig, path: &TranslationPath, x_src: &Array4<f64>) -> Result<GeneratorPassOutput> {
        let (code_src, enc_src_cache) = bundle.encoders[&path.source].forward(x_src);
        let (fake, dec_tgt_cache) = bundle.decoders[&path.target].forward(&code_src);
        let (fake_scores, disc_cache) = bundle.discriminators[&path.target].forward(&fake);
        let adv = gen_adversarial_loss(&fake_scores, &cfg)?;

        let (code_fake, enc_tgt_cache) = bundle.encoders[&path.target].forward(&fake);
        let (reconstructed, dec_src_cache) = bundle.decoders[&path.source].forward(&code_fake);
        let cyc = cycle_loss(x_src, &reconstructed, &cfg)?;

        if !adv.is_finite() || !cyc.is_finite() {
            return Err(Error::NonFinite {
                quantity: if adv.is_finite() { "cycle loss" } else { "adversarial loss" }.into(),
                path: path.to_string(),
            });
        }

        // d(adv)/d(scores), weighted; discriminator parameters stay frozen.
        let n_scores = fake_scores.len() as f64;
        let g_scores = fake_scores
            .mapv(|s| cfg.lambda_adversarial * 2.0 * (s - cfg.real_label) / n_scores);
        let g_fake_adv = bundle.discriminators[&path.target].backward_input(&disc_cache, &g_scores);

        // d(cyc)/d(reconstructed): weighted L1 subgradient.
        let n_pix = reconstructed.len() as f64;
        let mut g_rec = Array4::<f64>::zeros(reconstructed.dim());
        ndarray::Zip::from(&mut g_rec)
            .and(&reconstructed)
            .and(x_src)
            .for_each(|g, &r, &x| {
                *g = cfg.lambda_cycle / n_pix
                    * if r > x {
                        1.0
                    } else if r < x {
                        -1.0
                    } else {
                        0.0
                    };
            });

        // Backward through the cycle half.
        let (g_code_fake, g_skips_fake) = bundle.decoders
            .get_mut(&path.source)
            .expect("path validated")
            .backward(&dec_src_cache, &g_rec);
        let g_fake_cyc = bundle.encoders
            .get_mut(&path.target)
            .expect("path validated")
            .backward(&enc_tgt_cache, &g_code_fake, &g_skips_fake);

        // Combine both contributions at the synthetic image and continue
        // into the forward half.
        let g_fake = &g_fake_adv + &g_fake_cyc;
        let (g_code_src, g_skips_src) = bundle.decoders
            .get_mut(&path.target)
            .expect("path validated")
            .backward(&dec_tgt_cache, &g_fake);
        let _ = bundle.encoders
            .get_mut(&path.source)
            .expect("path validated")
            .backward(&enc_src_cache, &g_code_src, &g_skips_src);

        Ok(GeneratorPassOutput { fake_scores, disc_cache, adv, cyc })
    }

    /// Discriminator update for all paths into one target domain: scores the
    /// real batch once, reuses the fake scores/caches from the generator
    /// phase (the discriminator has not changed in between), and accumulates
    /// parameter gradients into `disc`. Returns the per-path losses.
    fn discriminator_pass(
        disc: &mut crate::networks::Discriminator,
        cfg: LossConfig,
        x_tgt: &Array4<f64>,
        fakes: &[(TranslationPath, &GeneratorPassOutput)],
    ) -> Result<Vec<(TranslationPath, f64)>> {
        let (real_scores, real_cache) = disc.forward(x_tgt);
        let mut losses = Vec::with_capacity(fakes.len());
        for (path, pass) in fakes {
            let loss = disc_loss(&real_scores, &pass.fake_scores, &cfg)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    quantity: "discriminator loss".into(),
                    path: path.to_string(),
                });
            }
            losses.push((path.clone(), loss));
        }
        let n = real_scores.len() as f64;
        // The real term repeats once per incoming path; one backward pass
        // with the summed gradient is identical.
        let g_real = real_scores.mapv(|s| fakes.len() as f64 * (s - cfg.real_label) / n);
        disc.backward_params(&real_cache, &g_real);
        for (_, pass) in fakes {
            let g_fake = pass.fake_scores.mapv(|s| (s - cfg.fake_label) / n);
            disc.backward_params(&pass.disc_cache, &g_fake);
        }
        Ok(losses)
    }

    /// One simultaneous step over every path: generator update from the
    /// summed adversarial + cycle losses, then discriminator update from the
    /// summed discriminator losses on the same (detached) fakes. Returns the
    /// pre-update losses.
    ///
    /// Path work runs on a fixed two-way split of the path list; gradients
    /// merge in split order, so results do not depend on the host's core
    /// count or scheduling.
    pub fn train_step(&mut self, batches: &BTreeMap<String, Array4<f64>>, lr: f64) -> Result<StepLosses> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {lr}")));
        }
        for id in self.bundle.registry.clone().ids() {
            if !batches.contains_key(id) {
                return Err(Error::Config(format!("missing batch for domain `{id}`")));
            }
        }
        let paths = self.bundle.registry.enumerate_paths()?;

        self.bundle.zero_generator_grads();
        let loss_cfg = self.loss_cfg;
        let (front, back) = paths.split_at(paths.len() / 2);
        let run_paths = |group: &[TranslationPath],
                         bundle: &ModelBundle|
         -> Result<(ModelBundle, Vec<(TranslationPath, GeneratorPassOutput)>)> {
            let mut worker = bundle.clone();
            let mut out = Vec::with_capacity(group.len());
            for path in group {
                let pass = Self::generator_pass(&mut worker, loss_cfg, path, &batches[&path.source])?;
                out.push((path.clone(), pass));
            }
            Ok((worker, out))
        };
        let bundle_ref = &self.bundle;
        let (front_result, back_result) = std::thread::scope(|scope| {
            let handle = scope.spawn(|| run_paths(front, bundle_ref));
            let back_result = run_paths(back, bundle_ref);
            (handle.join().expect("generator worker panicked"), back_result)
        });

        let mut adversarial = BTreeMap::new();
        let mut cycle = BTreeMap::new();
        let mut passes: BTreeMap<TranslationPath, GeneratorPassOutput> = BTreeMap::new();
        for result in [front_result, back_result] {
            let (worker, group_passes) = result?;
            // Merge in split order: deterministic regardless of timing.
            let src = worker.generator_params();
            for (dst, s) in self.bundle.generator_params_mut().into_iter().zip(src) {
                dst.grad += &s.grad;
            }
            for (path, pass) in group_passes {
                adversarial.insert(path.clone(), pass.adv);
                cycle.insert(path.clone(), pass.cyc);
                passes.insert(path, pass);
            }
        }
        let gen_params = self.bundle.generator_params_mut();
        self.gen_opt.step(gen_params, lr);

        self.bundle.zero_discriminator_grads();
        let targets: Vec<String> = self.bundle.registry.ids().map(str::to_string).collect();
        let (front_targets, back_targets) = targets.split_at(targets.len() / 2);
        let run_targets = |group: &[String],
                           bundle: &ModelBundle|
         -> Result<Vec<(String, crate::networks::Discriminator, Vec<(TranslationPath, f64)>)>> {
            let mut out = Vec::with_capacity(group.len());
            for target in group {
                let fakes: Vec<(TranslationPath, &GeneratorPassOutput)> = paths
                    .iter()
                    .filter(|p| &p.target == target)
                    .map(|p| (p.clone(), &passes[p]))
                    .collect();
                if fakes.is_empty() {
                    continue;
                }
                let mut disc = bundle.discriminators[target].clone();
                let losses = Self::discriminator_pass(&mut disc, loss_cfg, &batches[target], &fakes)?;
                out.push((target.clone(), disc, losses));
            }
            Ok(out)
        };
        let bundle_ref = &self.bundle;
        let passes_ref = &passes;
        let paths_ref = &paths;
        let (front_disc, back_disc) = std::thread::scope(|scope| {
            let handle = scope.spawn(|| {
                let _ = (passes_ref, paths_ref);
                run_targets(front_targets, bundle_ref)
            });
            let back = run_targets(back_targets, bundle_ref);
            (handle.join().expect("discriminator worker panicked"), back)
        });

        let mut discriminator = BTreeMap::new();
        for result in [front_disc, back_disc] {
            for (target, disc, losses) in result? {
                // Per-target gradients are disjoint across workers.
                let dst = self
                    .bundle
                    .discriminators
                    .get_mut(&target)
                    .expect("target validated");
                for (d, s) in dst.params_mut().into_iter().zip(disc.params()) {
                    d.grad += &s.grad;
                }
                for (path, loss) in losses {
                    discriminator.insert(path, loss);
                }
            }
        }
        let disc_params = self.bundle.discriminator_params_mut();
        self.disc_opt.step(disc_params, lr);

        let losses = StepLosses { adversarial, cycle, discriminator };
        losses.check_finite()?;
        self.bundle.check_finite().map_err(|_| Error::NonFinite {
            quantity: "parameter".into(),
            path: "post-step check".into(),
        })?;
        Ok(losses)
    }
}

/// Everything the generator phase hands to the discriminator phase (the
/// synthetic batch itself rides along inside the discriminator cache).
struct GeneratorPassOutput {
    fake_scores: Array4<f64>,
    disc_cache: crate::networks::DiscriminatorCache,
    adv: f64,
    cyc: f64,
}

/// Per-domain endless sampler: uniform without replacement, reshuffled on
/// exhaustion.
struct DomainSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha20Rng,
}

impl DomainSampler {
    fn new(len: usize, mut rng: ChaCha20Rng) -> DomainSampler {
        let mut order: Vec<usize> = (0..len).collect();
        shuffle(&mut order, &mut rng);
        DomainSampler { order, pos: 0, rng }
    }

    fn next_index(&mut self) -> usize {
        if self.pos == self.order.len() {
            shuffle(&mut self.order, &mut self.rng);
            self.pos = 0;
        }
        let idx = self.order[self.pos];
        self.pos += 1;
        idx
    }
}

fn shuffle(values: &mut [usize], rng: &mut ChaCha20Rng) {
    for i in (1..values.len()).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
}

/// Training inputs beyond the slice data itself.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub registry: DomainRegistry,
    pub norm: NormalizationSpec,
    /// Resume from this checkpoint instead of a fresh initialization.
    pub resume: Option<PathBuf>,
    /// Hash of the dataset manifest, recorded in run metadata.
    pub manifest_sha256: Option<String>,
}

impl TrainOptions {
    pub fn new(arch: ArchConfig, train: TrainConfig, loss: LossConfig, registry: DomainRegistry) -> TrainOptions {
        TrainOptions {
            arch,
            train,
            loss,
            registry,
            norm: NormalizationSpec::default(),
            resume: None,
            manifest_sha256: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub checkpoint_path: PathBuf,
    pub loss_log_path: PathBuf,
    pub summary_log_path: PathBuf,
    pub steps_per_epoch: usize,
    pub epochs_run: usize,
}

/// Volumes per domain declared by a manifest, before any data is loaded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunPlan {
    pub per_domain: BTreeMap<String, usize>,
    pub total_volumes: usize,
}

pub fn run_plan<'a>(rows: impl IntoIterator<Item = &'a str>) -> RunPlan {
    let mut per_domain: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for domain in rows {
        *per_domain.entry(domain.to_string()).or_insert(0) += 1;
        total += 1;
    }
    RunPlan { per_domain, total_volumes: total }
}

/// Trains on in-memory normalized slices (one vec per domain), writing loss
/// logs, run metadata and checkpoints under `out_dir`. Returns the final
/// checkpoint path.
pub fn train(
    opts: &TrainOptions,
    datasets: &BTreeMap<String, Vec<Array2<f64>>>,
    out_dir: &Path,
) -> Result<TrainReport> {
    opts.arch.validate()?;
    opts.train.validate()?;
    opts.loss.validate()?;
    for id in opts.registry.ids() {
        let slices = datasets
            .get(id)
            .ok_or_else(|| Error::Config(format!("no dataset for domain `{id}`")))?;
        if slices.is_empty() {
            return Err(Error::Config(format!("dataset for domain `{id}` is empty")));
        }
        for s in slices {
            if s.dim() != (opts.arch.input_size, opts.arch.input_size) {
                return Err(Error::Shape(format!(
                    "domain `{id}` slice is {:?}, model expects {}x{}",
                    s.dim(),
                    opts.arch.input_size,
                    opts.arch.input_size
                )));
            }
        }
    }
    std::fs::create_dir_all(out_dir)?;

    let mut trainer = match &opts.resume {
        Some(path) => {
            let t = Trainer::resume(path)?;
            if t.bundle.arch != opts.arch {
                return Err(Error::Checkpoint(format!(
                    "resume arch mismatch: checkpoint {:?} vs requested {:?}",
                    t.bundle.arch, opts.arch
                )));
            }
            if t.bundle.registry != opts.registry {
                return Err(Error::Checkpoint("resume registry mismatch".into()));
            }
            t
        }
        None => {
            let bundle = ModelBundle::new(opts.arch, opts.registry.clone(), opts.train.seed)?;
            Trainer::new(bundle, opts.train, opts.loss)?
        }
    };

    let cfg = trainer.train_cfg;
    let max_len = datasets.values().map(Vec::len).max().unwrap_or(0);
    let steps_per_epoch = max_len.div_ceil(cfg.batch_size);

    // Run metadata: everything needed to reproduce the run.
    let meta_path = out_dir.join("train_meta.json");
    let meta = serde_json::json!({
        "arch": opts.arch,
        "train": cfg,
        "loss": trainer.loss_cfg,
        "registry": opts.registry,
        "normalization": opts.norm,
        "seed": cfg.seed,
        "manifest_sha256": opts.manifest_sha256,
        "steps_per_epoch": steps_per_epoch,
        "slices_per_domain": datasets.iter().map(|(k, v)| (k.clone(), v.len())).collect::<BTreeMap<_, _>>(),
        "resumed_from": opts.resume.as_ref().map(|p| p.display().to_string()),
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;

    let loss_log_path = out_dir.join("loss_log.csv");
    let summary_log_path = out_dir.join("loss_summary.csv");
    let fresh = trainer.epoch_next == 0;
    let mut loss_log = open_log(&loss_log_path, fresh, "step,path,adv,cycle,disc\n")?;
    let mut summary_log = open_log(
        &summary_log_path,
        fresh,
        "step,epoch,lr,adv_mean,cycle_mean,disc_mean\n",
    )?;

    let domain_ids: Vec<String> = opts.registry.ids().map(str::to_string).collect();
    let start_epoch = trainer.epoch_next;
    let mut checkpoint_path = out_dir.join("checkpoint_final.ckpt");
    for epoch in start_epoch..cfg.epochs_total {
        let lr = learning_rate(epoch, &cfg)?;
        let mut samplers: BTreeMap<String, DomainSampler> = domain_ids
            .iter()
            .map(|id| {
                let rng = derive_rng(cfg.seed, &format!("sampler/{id}/epoch{epoch}"));
                (id.clone(), DomainSampler::new(datasets[id].len(), rng))
            })
            .collect();

        for step_in_epoch in 0..steps_per_epoch {
            let mut batches = BTreeMap::new();
            for id in &domain_ids {
                let sampler = samplers.get_mut(id).expect("sampler per domain");
                let mut batch = Array4::<f64>::zeros((
                    cfg.batch_size,
                    1,
                    opts.arch.input_size,
                    opts.arch.input_size,
                ));
                for b in 0..cfg.batch_size {
                    let idx = sampler.next_index();
                    let augmented = crate::volume::augment_for_training(
                        &datasets[id][idx],
                        &opts.norm,
                        id,
                        &mut sampler.rng,
                    )?;
                    batch
                        .index_axis_mut(ndarray::Axis(0), b)
                        .index_axis_mut(ndarray::Axis(0), 0)
                        .assign(&augmented.pixels);
                }
                batches.insert(id.clone(), batch);
            }

            let losses = trainer.train_step(&batches, lr)?;
            let global_step = epoch * steps_per_epoch + step_in_epoch;
            for (path, adv) in &losses.adversarial {
                writeln!(
                    loss_log,
                    "{global_step},{path},{adv},{},{}",
                    losses.cycle[path], losses.discriminator[path]
                )?;
            }
            let (adv_mean, cyc_mean, disc_mean) = losses.means();
            writeln!(
                summary_log,
                "{global_step},{epoch},{lr},{adv_mean},{cyc_mean},{disc_mean}"
            )?;
        }

        trainer.epoch_next = epoch + 1;
        let last = epoch + 1 == cfg.epochs_total;
        if (epoch + 1) % cfg.checkpoint_every == 0 || last {
            let name = if last {
                "checkpoint_final.ckpt".to_string()
            } else {
                format!("checkpoint_ep{:04}.ckpt", epoch + 1)
            };
            checkpoint_path = out_dir.join(name);
            save_checkpoint(&checkpoint_path, &trainer.bundle, Some(&trainer.train_state()))?;
        }
    }
    loss_log.flush()?;
    summary_log.flush()?;

    // A run resumed at its final epoch still needs a checkpoint to return.
    if start_epoch >= cfg.epochs_total {
        save_checkpoint(&checkpoint_path, &trainer.bundle, Some(&trainer.train_state()))?;
    }

    Ok(TrainReport {
        checkpoint_path,
        loss_log_path,
        summary_log_path,
        steps_per_epoch,
        epochs_run: cfg.epochs_total.saturating_sub(start_epoch),
    })
}

fn open_log(path: &Path, fresh: bool, header: &str) -> Result<std::fs::File> {
    if fresh || !path.exists() {
        let mut f = std::fs::File::create(path)?;
        f.write_all(header.as_bytes())?;
        Ok(f)
    } else {
        Ok(std::fs::OpenOptions::new().append(true).open(path)?)
    }
}



/// Reads a training manifest CSV: columns `domain` and `path`; any other
/// columns are ignored. Relative paths resolve against the manifest
/// directory.
pub fn read_training_manifest(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    #[derive(serde::Deserialize)]
    struct Row {
        domain: String,
        path: PathBuf,
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row?;
        let resolved = if row.path.is_relative() {
            dir.join(&row.path)
        } else {
            row.path
        };
        out.push((row.domain, resolved));
    }
    Ok(out)
}
