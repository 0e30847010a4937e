use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use maskshift::codec::{config_digest, digest_hex};
use maskshift::data::{encode_features, synth_domains};
use maskshift::eval::{unmasked_finetune_baseline, write_report, AblationTable, ReportFormat, TradeoffSummary};
use maskshift::masking::{
    harden_mask, learn_binary_mask, learn_editor_delta, load_mask, mask_sparsity, naive_mask, save_mask, threshold_delta,
    MSMK_MAGIC,
};
use maskshift::model::{evaluate_accuracy, load_head, save_head, train_head, weight_stats, FreezeDirection, HeadArtifact, MSHD_MAGIC};
use maskshift::pipeline::{run_grid, stream};
use maskshift::transfer::{finetune_with_mask, init_reuse_weights, max_drift};
use maskshift::{Error, FeatureDataset, InitStrategy, MaskStrategy, MlpHead, Result, RngStream, SynthConfig, TrainConfig, WeightMask};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, load_dataset, read_toml, ExperimentConfig};
use crate::Overrides;

fn apply(mut cfg: TrainConfig, ov: Overrides) -> TrainConfig {
    if let Some(d) = ov.freeze_direction {
        cfg.freeze_direction = d;
    }
    if let Some(f) = ov.forward_mask {
        cfg.forward_mask = f;
    }
    if ov.freeze_bias {
        cfg.tune_bias = false;
    }
    cfg
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("log values serialize");
    // A closed stdout is not an error; the log file has the same content.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn log_path(out: &Path) -> PathBuf {
    out.with_extension("log.json")
}

pub fn synth(config: &Path, out: &Path, csv: bool) -> Result<ExitCode> {
    let cfg: SynthConfig = read_toml(config)?;
    let (source, target) = synth_domains(&cfg)?;
    if !out.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", out.display()),
        )));
    }
    let ext = if csv { "csv" } else { "ftds" };
    let mut written: Vec<PathBuf> = Vec::new();
    for ds in [&source, &target] {
        let path = out.join(format!("{}.{ext}", ds.domain()));
        let res = if csv {
            maskshift::data::save_features_csv(ds, &path)
        } else {
            std::fs::write(&path, encode_features(ds)).map_err(Error::from)
        };
        if let Err(e) = res {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    print_json(&json!({
        "stage": "synth",
        "config_digest": digest_hex(&config_digest(&cfg)),
        "files": written,
        "samples_per_domain": source.len(),
    }));
    Ok(ExitCode::SUCCESS)
}

pub fn train_source(
    data: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    num_classes: Option<usize>,
    out: &Path,
) -> Result<ExitCode> {
    let mut cfg = config::train_config(config)?;
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    cfg.require_epochs()?;
    let ds = load_dataset(data, num_classes)?;
    let trained = train_head(&ds, &cfg, &mut RngStream::new(cfg.seed).derive(stream::SOURCE))?;
    let digest = config_digest(&cfg);
    let artifact = HeadArtifact {
        head: trained.head.clone(),
        snapshots: trained.snapshots,
        seed: cfg.seed,
        config_digest: digest,
    };
    save_head(&artifact, out)?;
    let log = json!({
        "stage": "train-source",
        "seed": cfg.seed,
        "config_digest": digest_hex(&digest),
        "domain": ds.domain(),
        "samples": ds.len(),
        "train_accuracy": evaluate_accuracy(&trained.head, &ds)?,
        "loss_history": trained.loss_history,
        "weight_stats": weight_stats(trained.head.weight(), 20)?,
        "head": out,
    });
    write_json(&log_path(out), &log)?;
    print_json(&log);
    Ok(ExitCode::SUCCESS)
}

fn masked_accuracy(head: &MlpHead, mask: &WeightMask, ds: &FeatureDataset) -> Result<f64> {
    let keep: Vec<f64> = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let (r, c) = mask.shape();
    let mut masked = head.clone();
    masked.set_weight(head.weight().hadamard(&maskshift::DenseMatrix::new(r, c, keep)?)?)?;
    evaluate_accuracy(&masked, ds)
}

#[allow(clippy::too_many_arguments)]
pub fn learn_mask(
    head_path: &Path,
    strategy: MaskStrategy,
    data: Option<&Path>,
    config: Option<&Path>,
    seed: Option<u64>,
    ov: Overrides,
    both_directions: bool,
    out: &Path,
) -> Result<ExitCode> {
    let mut cfg = apply(config::train_config(config)?, ov);
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    let artifact = load_head(head_path)?;
    let source = match (strategy, data) {
        (MaskStrategy::Naive, _) => None,
        (_, Some(p)) => Some(load_dataset(p, Some(artifact.head.num_classes()))?),
        (_, None) => return Err(Error::Config(format!("--data is required for the {strategy} strategy"))),
    };
    if both_directions && strategy != MaskStrategy::Editor {
        return Err(Error::Config("--freeze-direction both applies to the editor strategy only".into()));
    }
    let mut rng = RngStream::new(cfg.seed).derive(stream::MASK).derive(strategy.tag() as u64);

    let masks: Vec<(TrainConfig, WeightMask, PathBuf)> = match strategy {
        MaskStrategy::Naive => vec![(cfg.clone(), naive_mask(artifact.head.weight())?, out.to_path_buf())],
        MaskStrategy::Binary => {
            let logits = learn_binary_mask(&artifact.head, source.as_ref().unwrap(), &cfg, &mut rng)?;
            vec![(cfg.clone(), harden_mask(&logits), out.to_path_buf())]
        }
        MaskStrategy::Editor => {
            let delta = learn_editor_delta(&artifact.head, source.as_ref().unwrap(), &cfg, &mut rng)?;
            if both_directions {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("mask");
                let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("msmk");
                [FreezeDirection::Large, FreezeDirection::Small]
                    .into_iter()
                    .map(|d| {
                        let name = match d {
                            FreezeDirection::Large => "large",
                            FreezeDirection::Small => "small",
                        };
                        let c = TrainConfig { freeze_direction: d, ..cfg.clone() };
                        Ok((c, threshold_delta(&delta, d)?, out.with_file_name(format!("{stem}.{name}.{ext}"))))
                    })
                    .collect::<Result<_>>()?
            } else {
                vec![(cfg.clone(), threshold_delta(&delta, cfg.freeze_direction)?, out.to_path_buf())]
            }
        }
        MaskStrategy::Custom => return Err(Error::Config("custom masks cannot be learned".into())),
    };

    let mut logs = Vec::new();
    for (c, mask, path) in masks {
        let digest = config_digest(&c);
        let mask = mask.with_provenance(c.seed, digest);
        save_mask(&mask, &path)?;
        let (frozen, reuse) = mask_sparsity(&mask);
        let mut log = json!({
            "stage": "learn-mask",
            "strategy": strategy,
            "freeze_direction": c.freeze_direction,
            "seed": c.seed,
            "config_digest": digest_hex(&digest),
            "frozen_fraction": frozen,
            "reuse_fraction": reuse,
            "mask": path,
        });
        if let Some(ds) = &source {
            log["source_accuracy"] = json!(evaluate_accuracy(&artifact.head, ds)?);
            log["masked_source_accuracy"] = json!(masked_accuracy(&artifact.head, &mask, ds)?);
        }
        write_json(&log_path(&path), &log)?;
        logs.push(log);
    }
    print_json(&logs);
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
pub fn transfer(
    head_path: &Path,
    mask_path: Option<&Path>,
    target_path: &Path,
    init: InitStrategy,
    config: Option<&Path>,
    seed: Option<u64>,
    ov: Overrides,
    num_classes: Option<usize>,
    out: &Path,
) -> Result<ExitCode> {
    let mut cfg = apply(config::train_config(config)?, ov);
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    cfg.require_epochs()?;
    let artifact = load_head(head_path)?;
    let target = load_dataset(target_path, num_classes.or(Some(artifact.head.num_classes())))?;
    let root = RngStream::new(cfg.seed);

    let (tuned, mask) = match mask_path {
        Some(p) => {
            let mask = load_mask(p)?;
            let start = init_reuse_weights(
                &artifact.head,
                &mask,
                init,
                &artifact.snapshots,
                cfg.random_init_std,
                &mut root.derive(stream::INIT),
            )?;
            let outcome = finetune_with_mask(&start, &mask, &target, &cfg, &mut root.derive(stream::FINETUNE))?;
            (outcome.head, Some(mask))
        }
        None => (
            unmasked_finetune_baseline(&artifact.head, &target, &cfg, &mut root.derive(stream::FINETUNE))?,
            None,
        ),
    };

    // Checked against the stored source-final values, independent of the training loop.
    let max_frozen_drift = match (&mask, &artifact.snapshots.source_final) {
        (Some(m), Some(fin)) => max_drift(fin.weight().as_slice(), tuned.weight().as_slice(), Some(m.bits())),
        _ => 0.0,
    };
    if max_frozen_drift != 0.0 {
        return Err(Error::Invariant(format!("frozen weights drifted by {max_frozen_drift}")));
    }

    let digest = config_digest(&cfg);
    let out_artifact = HeadArtifact {
        head: tuned.clone(),
        snapshots: artifact.snapshots.clone(),
        seed: cfg.seed,
        config_digest: digest,
    };
    save_head(&out_artifact, out)?;
    let log = json!({
        "stage": "transfer",
        "init": init,
        "mask": mask_path,
        "mask_strategy": mask.as_ref().map(|m| m.strategy()),
        "frozen_fraction": mask.as_ref().map(|m| mask_sparsity(m).0).unwrap_or(0.0),
        "max_frozen_drift": max_frozen_drift,
        "max_bias_drift": max_drift(artifact.head.bias(), tuned.bias(), None),
        "tune_bias": cfg.tune_bias,
        "target_domain": target.domain(),
        "target_accuracy": evaluate_accuracy(&tuned, &target)?,
        "seed": cfg.seed,
        "config_digest": digest_hex(&digest),
        "head": out,
    });
    write_json(&log_path(out), &log)?;
    print_json(&log);
    Ok(ExitCode::SUCCESS)
}

pub fn experiment(config: &Path, out: Option<&Path>, format: ReportFormat, jobs: usize) -> Result<ExitCode> {
    let (cfg, base) = ExperimentConfig::load(config)?;
    cfg.validate(&base)?;
    let out_dir = match (out, &cfg.out_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => base.join(d),
        (None, None) => base.clone(),
    };
    let (source, target) = cfg.datasets(&base)?;
    let plan = cfg.plan();
    let outcome = run_grid(&plan, &source, &target, jobs)?;
    std::fs::create_dir_all(&out_dir)?;
    let report_path = write_report(&outcome.report, &out_dir, source.domain(), target.domain(), format)?;
    let runs_path = out_dir.join(format!("runs_{}_{}.json", source.domain(), target.domain()));
    write_json(
        &runs_path,
        &json!({
            "config_digest": digest_hex(&config_digest(&plan)),
            "plan": plan,
            "seeds": outcome.seeds,
            "records": outcome.report.records,
            "failures": outcome.failures,
        }),
    )?;

    for c in &outcome.report.cells {
        println!(
            "{:<7} {:<13} S {:+.4}{} T {:+.4}{} frozen {:.3} (n={})",
            c.strategy.name(),
            c.init_strategy.name(),
            c.source_gain_mean,
            c.source_gain_std.map(|s| format!(" ±{s:.4}")).unwrap_or_default(),
            c.target_gain_mean,
            c.target_gain_std.map(|s| format!(" ±{s:.4}")).unwrap_or_default(),
            c.frozen_fraction_mean,
            c.seeds
        );
    }
    if let Some(t) = TradeoffSummary::from_report(&outcome.report) {
        println!("best source gain: {}, best target gain: {}", t.best_source, t.best_target);
    }
    for &strategy in &plan.strategies {
        println!("\n{}", AblationTable::from_report(&outcome.report, strategy).to_markdown());
    }
    println!("wrote {} and {}", report_path.display(), runs_path.display());
    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            eprintln!("cell {}/{}/seed {} failed: {}", f.strategy, f.init_strategy, f.seed, f.error);
        }
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(artifact: &Path, config: Option<&Path>, ov: Overrides) -> Result<ExitCode> {
    let bytes = std::fs::read(artifact)?;
    let (kind, seed, embedded) = match bytes.get(..4) {
        Some(m) if m == MSHD_MAGIC => {
            let a = maskshift::model::decode_head(&bytes)?;
            ("head", a.seed, a.config_digest)
        }
        Some(m) if m == MSMK_MAGIC => {
            let m = maskshift::masking::decode_mask(&bytes)?;
            ("mask", m.seed(), *m.config_digest())
        }
        _ => return Err(Error::Format { offset: 0, reason: "not a head or mask artifact".into() }),
    };
    let mut cfg = apply(config::train_config(config)?, ov);
    cfg.seed = seed;
    let derived = config_digest(&cfg);
    let log = json!({
        "artifact": artifact,
        "kind": kind,
        "seed": seed,
        "embedded_digest": digest_hex(&embedded),
        "derived_digest": digest_hex(&derived),
        "match": derived == embedded,
    });
    print_json(&log);
    if derived != embedded {
        return Err(Error::Invariant("config digest mismatch".into()));
    }
    Ok(ExitCode::SUCCESS)
}
