//! The end-to-end grid: source training, masks, baseline, masked fine-tuning
//! and gains for every (strategy, init, seed) cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{config_digest, digest_hex};
use crate::data::{split, FeatureDataset};
use crate::error::{Error, Result};
use crate::eval::{build_report, compute_gains, unmasked_finetune_baseline, GainRecord, RunMeta, TransferReport};
use crate::masking::{harden_mask, learn_binary_mask, learn_editor_delta, mask_sparsity, naive_mask, threshold_delta};
use crate::masking::{MaskStrategy, WeightMask};
use crate::math::RngStream;
use crate::model::{evaluate_accuracy, train_head, TrainConfig, TrainedHead};
use crate::transfer::{finetune_with_mask, init_reuse_weights, InitStrategy};

/// Stream ids under a run seed. Baseline and masked fine-tuning share one
/// stream so an all-zeros mask with source-final init reproduces the baseline.
pub mod stream {
    pub const SOURCE: u64 = 1;
    pub const MASK: u64 = 2;
    pub const INIT: u64 = 3;
    pub const FINETUNE: u64 = 4;
}

/// Everything but the data needed to run the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub strategies: Vec<MaskStrategy>,
    pub inits: Vec<InitStrategy>,
    pub seeds: Vec<u64>,
    pub source_training: TrainConfig,
    pub mask: TrainConfig,
    pub finetune: TrainConfig,
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            strategies: vec![MaskStrategy::Naive, MaskStrategy::Editor, MaskStrategy::Binary],
            inits: vec![InitStrategy::SourceInit],
            seeds: vec![0, 1, 2],
            source_training: TrainConfig::default(),
            mask: TrainConfig::default(),
            finetune: TrainConfig::default(),
            train_fraction: 0.8,
            split_seed: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.inits.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("need at least one strategy, one init and one seed".into()));
        }
        if self.strategies.contains(&MaskStrategy::Custom) {
            return Err(Error::Config("custom masks cannot be learned".into()));
        }
        self.source_training.validate()?;
        self.source_training.require_epochs()?;
        self.mask.validate()?;
        self.finetune.validate()?;
        self.finetune.require_epochs()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} outside (0, 1)", self.train_fraction)));
        }
        Ok(())
    }
}

/// Learns a mask with the named strategy. Naive ignores `source`.
pub fn learn_mask(
    strategy: MaskStrategy,
    trained: &TrainedHead,
    source: &FeatureDataset,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<WeightMask> {
    match strategy {
        MaskStrategy::Naive => naive_mask(trained.head.weight()),
        MaskStrategy::Editor => {
            let delta = learn_editor_delta(&trained.head, source, config, rng)?;
            threshold_delta(&delta, config.freeze_direction)
        }
        MaskStrategy::Binary => Ok(harden_mask(&learn_binary_mask(&trained.head, source, config, rng)?)),
        MaskStrategy::Custom => Err(Error::Config("custom masks cannot be learned".into())),
    }
}

/// Per-seed reference accuracies, all on held-out splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub source_head_source_acc: f64,
    pub source_head_target_acc: f64,
    pub baseline_source_acc: f64,
    pub baseline_target_acc: f64,
}

impl SeedSummary {
    /// Source accuracy lost by unmasked fine-tuning.
    pub fn forgetting(&self) -> f64 {
        self.source_head_source_acc - self.baseline_source_acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub strategy: MaskStrategy,
    pub init_strategy: InitStrategy,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub report: TransferReport,
    pub seeds: Vec<SeedSummary>,
    pub failures: Vec<CellFailure>,
    /// Largest frozen-weight drift seen in any cell. Zero unless a cell failed
    /// its freeze check.
    pub max_frozen_drift: f64,
}

struct SeedContext {
    trained: TrainedHead,
    baseline: crate::model::MlpHead,
}

/// Held-out splits of both domains.
pub struct Splits {
    pub source_train: FeatureDataset,
    pub source_test: FeatureDataset,
    pub target_train: FeatureDataset,
    pub target_test: FeatureDataset,
}

pub fn make_splits(source: &FeatureDataset, target: &FeatureDataset, fraction: f64, seed: u64) -> Result<Splits> {
    if source.feature_dim() != target.feature_dim() || source.num_classes() != target.num_classes() {
        return Err(Error::Dimension("source and target datasets differ in shape".into()));
    }
    if source.domain() == target.domain() {
        return Err(Error::Config(format!("source and target share the domain name `{}`", source.domain())));
    }
    let (source_train, source_test) = split(source, fraction, seed)?;
    let (target_train, target_test) = split(target, fraction, seed)?;
    Ok(Splits {
        source_train,
        source_test,
        target_train,
        target_test,
    })
}

fn prepare_seed(plan: &ExperimentPlan, s: &Splits, seed: u64) -> Result<(SeedContext, SeedSummary)> {
    let root = RngStream::new(seed);
    let trained = train_head(&s.source_train, &plan.source_training, &mut root.derive(stream::SOURCE))?;
    let baseline = unmasked_finetune_baseline(&trained.head, &s.target_train, &plan.finetune, &mut root.derive(stream::FINETUNE))?;
    let summary = SeedSummary {
        seed,
        source_head_source_acc: evaluate_accuracy(&trained.head, &s.source_test)?,
        source_head_target_acc: evaluate_accuracy(&trained.head, &s.target_test)?,
        baseline_source_acc: evaluate_accuracy(&baseline, &s.source_test)?,
        baseline_target_acc: evaluate_accuracy(&baseline, &s.target_test)?,
    };
    Ok((SeedContext { trained, baseline }, summary))
}

fn run_cell(
    plan: &ExperimentPlan,
    s: &Splits,
    ctx: &SeedContext,
    mask: &WeightMask,
    init: InitStrategy,
    seed: u64,
) -> Result<GainRecord> {
    let root = RngStream::new(seed);
    let start = init_reuse_weights(
        &ctx.trained.head,
        mask,
        init,
        &ctx.trained.snapshots,
        plan.finetune.random_init_std,
        &mut root.derive(stream::INIT),
    )?;
    let tuned = finetune_with_mask(&start, mask, &s.target_train, &plan.finetune, &mut root.derive(stream::FINETUNE))?;
    let meta = RunMeta {
        strategy: mask.strategy(),
        init_strategy: init,
        seed,
        frozen_fraction: mask_sparsity(mask).0,
    };
    compute_gains(&tuned.head, &ctx.baseline, &s.source_test, &s.target_test, meta)
}

/// Runs the grid on up to `jobs` worker threads (0 = all processors). The
/// result does not depend on `jobs`.
pub fn run_grid(plan: &ExperimentPlan, source: &FeatureDataset, target: &FeatureDataset, jobs: usize) -> Result<GridOutcome> {
    plan.validate()?;
    let splits = make_splits(source, target, plan.train_fraction, plan.split_seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_grid_inner(plan, &splits))
}

fn run_grid_inner(plan: &ExperimentPlan, s: &Splits) -> Result<GridOutcome> {
    let mut seeds = plan.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let prepared: Vec<(u64, Result<(SeedContext, SeedSummary)>)> =
        seeds.par_iter().map(|&seed| (seed, prepare_seed(plan, s, seed))).collect();

    let mut failures = Vec::new();
    let mut summaries = Vec::new();
    let mut contexts = Vec::new();
    for (seed, res) in prepared {
        match res {
            Ok((ctx, summary)) => {
                summaries.push(summary);
                contexts.push((seed, ctx));
            }
            Err(e) => {
                for &strategy in &plan.strategies {
                    for &init in &plan.inits {
                        failures.push(CellFailure { strategy, init_strategy: init, seed, error: e.to_string() });
                    }
                }
            }
        }
    }

    let mask_jobs: Vec<(usize, MaskStrategy)> = (0..contexts.len())
        .flat_map(|i| plan.strategies.iter().map(move |&st| (i, st)))
        .collect();
    let masks: Vec<(usize, MaskStrategy, Result<WeightMask>)> = mask_jobs
        .par_iter()
        .map(|&(i, st)| {
            let (seed, ctx) = &contexts[i];
            let digest = config_digest(&plan.mask);
            let mut rng = RngStream::new(*seed).derive(stream::MASK).derive(st.tag() as u64);
            let mask = learn_mask(st, &ctx.trained, &s.source_train, &plan.mask, &mut rng)
                .map(|m| m.with_provenance(*seed, digest));
            (i, st, mask)
        })
        .collect();

    let mut cell_jobs = Vec::new();
    for (i, st, mask) in &masks {
        let seed = contexts[*i].0;
        match mask {
            Ok(m) => cell_jobs.extend(plan.inits.iter().map(|&init| (*i, m, init))),
            Err(e) => failures.extend(plan.inits.iter().map(|&init| CellFailure {
                strategy: *st,
                init_strategy: init,
                seed,
                error: e.to_string(),
            })),
        }
    }
    let results: Vec<(u64, MaskStrategy, InitStrategy, Result<GainRecord>)> = cell_jobs
        .par_iter()
        .map(|&(i, mask, init)| {
            let (seed, ctx) = &contexts[i];
            (*seed, mask.strategy(), init, run_cell(plan, s, ctx, mask, init, *seed))
        })
        .collect();

    let mut records = Vec::new();
    let mut max_frozen_drift: f64 = 0.0;
    for (seed, strategy, init, res) in results {
        match res {
            Ok(r) => records.push(r),
            Err(e) => {
                if let Error::Invariant(_) = e {
                    max_frozen_drift = f64::INFINITY;
                }
                failures.push(CellFailure { strategy, init_strategy: init, seed, error: e.to_string() });
            }
        }
    }
    failures.sort_by(|a, b| (a.strategy, a.init_strategy, a.seed).cmp(&(b.strategy, b.init_strategy, b.seed)));
    let report = build_report(records, vec![digest_hex(&config_digest(plan))])?;
    Ok(GridOutcome {
        report,
        seeds: summaries,
        failures,
        max_frozen_drift,
    })
}
