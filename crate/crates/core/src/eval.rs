//! Gains against the unmasked baseline, multi-seed aggregation and report
//! serialization.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::masking::MaskStrategy;
use crate::math::RngStream;
use crate::model::{evaluate_accuracy, fit_final_layer, MlpHead, TrainConfig};
use crate::transfer::InitStrategy;

/// Fine-tunes every head weight on the target data, starting from `source_head`.
///
/// Uses the same loop as [`crate::transfer::finetune_with_mask`], so an
/// all-zeros mask with source-final init under the same stream gives the
/// bit-identical head.
pub fn unmasked_finetune_baseline(
    source_head: &MlpHead,
    target: &FeatureDataset,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<MlpHead> {
    config.require_epochs()?;
    let mut head = source_head.clone();
    fit_final_layer(&mut head, target, config, rng, None, config.tune_bias)?;
    Ok(head)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub source_gain: f64,
    pub target_gain: f64,
    pub strategy: MaskStrategy,
    pub init_strategy: InitStrategy,
    pub source_domain: String,
    pub target_domain: String,
    pub seed: u64,
    pub frozen_fraction: f64,
}

impl GainRecord {
    pub fn cell(&self) -> CellKey {
        CellKey {
            strategy: self.strategy,
            init_strategy: self.init_strategy,
            source_domain: self.source_domain.clone(),
            target_domain: self.target_domain.clone(),
        }
    }
}

/// Run metadata carried into a [`GainRecord`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMeta {
    pub strategy: MaskStrategy,
    pub init_strategy: InitStrategy,
    pub seed: u64,
    pub frozen_fraction: f64,
}

/// Accuracy of `masked` minus accuracy of `baseline` on both test sets.
/// Domain names are taken from the datasets.
pub fn compute_gains(
    masked: &MlpHead,
    baseline: &MlpHead,
    source_test: &FeatureDataset,
    target_test: &FeatureDataset,
    meta: RunMeta,
) -> Result<GainRecord> {
    if masked.input_dim() != baseline.input_dim()
        || masked.num_classes() != baseline.num_classes()
        || masked.depth() != baseline.depth()
    {
        return Err(Error::Dimension("masked and baseline heads differ in shape".into()));
    }
    for ds in [source_test, target_test] {
        if ds.feature_dim() != masked.input_dim() || ds.num_classes() != masked.num_classes() {
            return Err(Error::Dimension(format!(
                "test set `{}` is {}x{}, head expects {}x{}",
                ds.domain(),
                ds.feature_dim(),
                ds.num_classes(),
                masked.input_dim(),
                masked.num_classes()
            )));
        }
    }
    if !(0.0..=1.0).contains(&meta.frozen_fraction) {
        return Err(Error::Parameter(format!("frozen_fraction {} outside [0, 1]", meta.frozen_fraction)));
    }
    let source_gain = evaluate_accuracy(masked, source_test)? - evaluate_accuracy(baseline, source_test)?;
    let target_gain = evaluate_accuracy(masked, target_test)? - evaluate_accuracy(baseline, target_test)?;
    Ok(GainRecord {
        source_gain,
        target_gain,
        strategy: meta.strategy,
        init_strategy: meta.init_strategy,
        source_domain: source_test.domain().to_string(),
        target_domain: target_test.domain().to_string(),
        seed: meta.seed,
        frozen_fraction: meta.frozen_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub strategy: MaskStrategy,
    pub init_strategy: InitStrategy,
    pub source_domain: String,
    pub target_domain: String,
}

/// Per-cell statistics over seeds. Stds are population stds and are absent
/// for a single seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: MaskStrategy,
    pub init_strategy: InitStrategy,
    pub source_domain: String,
    pub target_domain: String,
    pub seeds: usize,
    pub source_gain_mean: f64,
    pub source_gain_std: Option<f64>,
    pub target_gain_mean: f64,
    pub target_gain_std: Option<f64>,
    pub frozen_fraction_mean: f64,
}

impl CellSummary {
    pub fn key(&self) -> CellKey {
        CellKey {
            strategy: self.strategy,
            init_strategy: self.init_strategy,
            source_domain: self.source_domain.clone(),
            target_domain: self.target_domain.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransferReport {
    /// Per-seed records in canonical order.
    pub records: Vec<GainRecord>,
    /// One entry per (strategy, init, source, target) cell, sorted by key.
    pub cells: Vec<CellSummary>,
    /// Hex config digests of the runs that produced the records, sorted and unique.
    pub config_digests: Vec<String>,
}

fn canonical_order(a: &GainRecord, b: &GainRecord) -> std::cmp::Ordering {
    a.cell()
        .cmp(&b.cell())
        .then(a.seed.cmp(&b.seed))
        .then(a.source_gain.total_cmp(&b.source_gain))
        .then(a.target_gain.total_cmp(&b.target_gain))
        .then(a.frozen_fraction.total_cmp(&b.frozen_fraction))
}

/// Mean and population std of values summed in sorted order, so the result
/// does not depend on input order.
fn sorted_moments(mut values: Vec<f64>) -> (f64, Option<f64>) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, Some((dev.iter().sum::<f64>() / n).sqrt()))
}

fn summarize(key: CellKey, records: &[&GainRecord]) -> CellSummary {
    let (source_gain_mean, source_gain_std) = sorted_moments(records.iter().map(|r| r.source_gain).collect());
    let (target_gain_mean, target_gain_std) = sorted_moments(records.iter().map(|r| r.target_gain).collect());
    let (frozen_fraction_mean, _) = sorted_moments(records.iter().map(|r| r.frozen_fraction).collect());
    CellSummary {
        strategy: key.strategy,
        init_strategy: key.init_strategy,
        source_domain: key.source_domain,
        target_domain: key.target_domain,
        seeds: records.len(),
        source_gain_mean,
        source_gain_std,
        target_gain_mean,
        target_gain_std,
        frozen_fraction_mean,
    }
}

/// Aggregates the seeds of a single cell. Records from different cells are a
/// grouping error; use [`build_report`] for a whole grid.
pub fn aggregate_runs(records: &[GainRecord]) -> Result<TransferReport> {
    let Some(first) = records.first() else {
        return Err(Error::Grouping("no records to aggregate".into()));
    };
    let key = first.cell();
    if let Some(other) = records.iter().find(|r| r.cell() != key) {
        return Err(Error::Grouping(format!("records mix cells {key:?} and {:?}", other.cell())));
    }
    build_report(records.to_vec(), Vec::new())
}

/// Groups records by cell and aggregates each one.
pub fn build_report(mut records: Vec<GainRecord>, config_digests: Vec<String>) -> Result<TransferReport> {
    for r in &records {
        for (name, v) in [("source_gain", r.source_gain), ("target_gain", r.target_gain)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} {v} outside [-1, 1]")));
            }
        }
    }
    records.sort_by(canonical_order);
    let mut groups: BTreeMap<CellKey, Vec<&GainRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry(r.cell()).or_default().push(r);
    }
    let cells = groups.into_iter().map(|(k, rs)| summarize(k, &rs)).collect();
    let mut config_digests = config_digests;
    config_digests.sort();
    config_digests.dedup();
    Ok(TransferReport {
        records,
        cells,
        config_digests,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "strategy",
    "init_strategy",
    "source_domain",
    "target_domain",
    "seeds",
    "source_gain_mean",
    "source_gain_std",
    "target_gain_mean",
    "target_gain_std",
    "frozen_fraction_mean",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes a report. CSV carries only the per-cell rows; JSON carries
/// everything.
pub fn emit_report(report: &TransferReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).map_err(|e| Error::Serialization(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let ser = |e: csv::Error| Error::Serialization(e.to_string());
            w.write_record(CSV_HEADER).map_err(ser)?;
            for c in &report.cells {
                w.write_record([
                    c.strategy.name().to_string(),
                    c.init_strategy.name().to_string(),
                    c.source_domain.clone(),
                    c.target_domain.clone(),
                    c.seeds.to_string(),
                    c.source_gain_mean.to_string(),
                    opt(c.source_gain_std),
                    c.target_gain_mean.to_string(),
                    opt(c.target_gain_std),
                    c.frozen_fraction_mean.to_string(),
                ])
                .map_err(ser)?;
            }
            w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
        }
    }
}

/// Parses an emitted report. A CSV report yields cells only.
pub fn parse_report(bytes: &[u8], format: ReportFormat) -> Result<TransferReport> {
    match format {
        ReportFormat::Json => serde_json::from_slice(bytes).map_err(|e| Error::Serialization(e.to_string())),
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_reader(bytes);
            let ser = |e: csv::Error| Error::Serialization(e.to_string());
            let header = r.headers().map_err(ser)?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(Error::Serialization(format!("unexpected report header {header:?}")));
            }
            let mut cells = Vec::new();
            for (line, row) in r.records().enumerate() {
                let row = row.map_err(ser)?;
                let bad = |field: &str| Error::Serialization(format!("row {}: bad {field}", line + 1));
                let num = |i: usize| row[i].parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
                let opt_num = |i: usize| if row[i].is_empty() { Ok(None) } else { num(i).map(Some) };
                cells.push(CellSummary {
                    strategy: row[0].parse().map_err(|_| bad("strategy"))?,
                    init_strategy: row[1].parse().map_err(|_| bad("init_strategy"))?,
                    source_domain: row[2].to_string(),
                    target_domain: row[3].to_string(),
                    seeds: row[4].parse().map_err(|_| bad("seeds"))?,
                    source_gain_mean: num(5)?,
                    source_gain_std: opt_num(6)?,
                    target_gain_mean: num(7)?,
                    target_gain_std: opt_num(8)?,
                    frozen_fraction_mean: num(9)?,
                });
            }
            Ok(TransferReport {
                records: Vec::new(),
                cells,
                config_digests: Vec::new(),
            })
        }
    }
}

pub fn report_file_name(source: &str, target: &str, format: ReportFormat) -> String {
    format!("report_{source}_{target}.{}", format.extension())
}

/// Writes `report_<source>_<target>.<ext>` under `dir` and returns its path.
pub fn write_report(
    report: &TransferReport,
    dir: impl AsRef<Path>,
    source: &str,
    target: &str,
    format: ReportFormat,
) -> Result<PathBuf> {
    let path = dir.as_ref().join(report_file_name(source, target, format));
    let bytes = emit_report(report, format)?;
    let mut f = std::fs::File::create(&path)?;
    f.write_all(&bytes)?;
    Ok(path)
}

/// Init strategy × source domain grid of (source gain, target gain) means for
/// one mask strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub strategy: MaskStrategy,
    pub source_domains: Vec<String>,
    pub rows: Vec<(InitStrategy, Vec<Option<(f64, f64)>>)>,
}

impl AblationTable {
    pub fn from_report(report: &TransferReport, strategy: MaskStrategy) -> Self {
        let mut source_domains: Vec<String> = report
            .cells
            .iter()
            .filter(|c| c.strategy == strategy)
            .map(|c| c.source_domain.clone())
            .collect();
        source_domains.sort();
        source_domains.dedup();
        let rows = InitStrategy::ALL
            .iter()
            .map(|&init| {
                let entries = source_domains
                    .iter()
                    .map(|src| {
                        let matching: Vec<&CellSummary> = report
                            .cells
                            .iter()
                            .filter(|c| c.strategy == strategy && c.init_strategy == init && &c.source_domain == src)
                            .collect();
                        if matching.is_empty() {
                            return None;
                        }
                        // Several targets per source collapse to their mean.
                        let n = matching.len() as f64;
                        Some((
                            matching.iter().map(|c| c.source_gain_mean).sum::<f64>() / n,
                            matching.iter().map(|c| c.target_gain_mean).sum::<f64>() / n,
                        ))
                    })
                    .collect();
                (init, entries)
            })
            .collect();
        Self {
            strategy,
            source_domains,
            rows,
        }
    }

    /// Markdown table, one column per source domain, cells as `S / T`.
    pub fn to_markdown(&self) -> String {
        let mut out = format!("| init ({}) |", self.strategy);
        for d in &self.source_domains {
            out.push_str(&format!(" {d} (S / T) |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.source_domains.len()));
        out.push('\n');
        for (init, entries) in &self.rows {
            out.push_str(&format!("| {init} |"));
            for e in entries {
                match e {
                    Some((s, t)) => out.push_str(&format!(" {s:+.3} / {t:+.3} |")),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Which strategy leads on each gain axis, averaged over all its records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffSummary {
    pub per_strategy: Vec<(MaskStrategy, f64, f64)>,
    pub best_source: MaskStrategy,
    pub best_target: MaskStrategy,
}

impl TradeoffSummary {
    pub fn from_report(report: &TransferReport) -> Option<Self> {
        let mut sums: BTreeMap<MaskStrategy, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in &report.records {
            let e = sums.entry(r.strategy).or_default();
            e.0.push(r.source_gain);
            e.1.push(r.target_gain);
        }
        let per_strategy: Vec<(MaskStrategy, f64, f64)> = sums
            .into_iter()
            .map(|(s, (src, tgt))| (s, sorted_moments(src).0, sorted_moments(tgt).0))
            .collect();
        let best = |pick: fn(&(MaskStrategy, f64, f64)) -> f64| {
            per_strategy
                .iter()
                .max_by(|a, b| pick(a).total_cmp(&pick(b)))
                .map(|e| e.0)
        };
        Some(Self {
            best_source: best(|e| e.1)?,
            best_target: best(|e| e.2)?,
            per_strategy,
        })
    }

    /// True when no single strategy leads on both axes.
    pub fn is_tradeoff(&self) -> bool {
        self.best_source != self.best_target
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synth_domains, SynthConfig};
    use crate::masking::WeightMask;
    use crate::model::train_head;
    use crate::transfer::{finetune_with_mask, init_reuse_weights};
    use proptest::prelude::*;

    fn rec(s: f64, t: f64, seed: u64) -> GainRecord {
        GainRecord {
            source_gain: s,
            target_gain: t,
            strategy: MaskStrategy::Binary,
            init_strategy: InitStrategy::SourceInit,
            source_domain: "a".into(),
            target_domain: "b".into(),
            seed,
            frozen_fraction: 0.5,
        }
    }

    #[test]
    fn single_record_has_no_std() {
        let r = aggregate_runs(&[rec(0.1, -0.2, 0)]).unwrap();
        let c = &r.cells[0];
        assert_eq!((c.source_gain_mean, c.target_gain_mean), (0.1, -0.2));
        assert_eq!((c.source_gain_std, c.target_gain_std), (None, None));
    }

    #[test]
    fn two_records_mean_and_population_std() {
        let r = aggregate_runs(&[rec(0.1, 0.0, 0), rec(0.3, 0.0, 1)]).unwrap();
        let c = &r.cells[0];
        approx::assert_abs_diff_eq!(c.source_gain_mean, 0.2, epsilon = 1e-15);
        approx::assert_abs_diff_eq!(c.source_gain_std.unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(c.target_gain_std, Some(0.0));
    }

    #[test]
    fn mixed_cells_are_rejected() {
        let mut other = rec(0.0, 0.0, 1);
        other.strategy = MaskStrategy::Editor;
        assert!(matches!(aggregate_runs(&[rec(0.0, 0.0, 0), other]), Err(Error::Grouping(_))));
        assert!(matches!(aggregate_runs(&[]), Err(Error::Grouping(_))));
    }

    #[test]
    fn empty_report_is_header_only_csv() {
        let out = emit_report(&TransferReport::default(), ReportFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn one_cell_one_row() {
        let r = aggregate_runs(&[rec(0.25, -0.5, 0)]).unwrap();
        let text = String::from_utf8(emit_report(&r, ReportFormat::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "binary,source-init,a,b,1,0.25,,-0.5,,0.5");
    }

    #[test]
    fn file_naming() {
        assert_eq!(report_file_name("photo", "sketch", ReportFormat::Csv), "report_photo_sketch.csv");
        let dir = tempfile::tempdir().unwrap();
        let p = write_report(&TransferReport::default(), dir.path(), "x", "y", ReportFormat::Json).unwrap();
        assert!(p.ends_with("report_x_y.json"));
    }

    #[test]
    fn gains_from_known_accuracies() {
        // Four samples along one axis; each head predicts a fixed class.
        let src = FeatureDataset::new(1, 2, "s", vec![1.0; 10], vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1]).unwrap();
        let tgt = FeatureDataset::new(1, 2, "t", vec![1.0; 20], [vec![0; 12], vec![1; 8]].concat()).unwrap();
        let always = |class: usize| {
            let b = if class == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
            MlpHead::from_parts(None, crate::math::DenseMatrix::zeros(2, 1), b).unwrap()
        };
        let meta = RunMeta {
            strategy: MaskStrategy::Custom,
            init_strategy: InitStrategy::SourceFinal,
            seed: 0,
            frozen_fraction: 0.0,
        };
        let g = compute_gains(&always(0), &always(1), &src, &tgt, meta).unwrap();
        approx::assert_abs_diff_eq!(g.source_gain, 0.8 - 0.2, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(g.target_gain, 0.6 - 0.4, epsilon = 1e-12);
        let back = compute_gains(&always(1), &always(0), &src, &tgt, meta).unwrap();
        assert_eq!((back.source_gain, back.target_gain), (-g.source_gain, -g.target_gain));
        let same = compute_gains(&always(1), &always(1), &src, &tgt, meta).unwrap();
        assert_eq!((same.source_gain, same.target_gain), (0.0, 0.0));
        assert_eq!((g.source_domain.as_str(), g.target_domain.as_str()), ("s", "t"));

        let wide = MlpHead::from_parts(None, crate::math::DenseMatrix::zeros(2, 3), vec![0.0; 2]).unwrap();
        assert!(matches!(compute_gains(&wide, &always(0), &src, &tgt, meta), Err(Error::Dimension(_))));
    }

    #[test]
    fn baseline_matches_zero_mask_source_final() {
        let cfg = SynthConfig { feature_dim: 6, num_classes: 3, samples_per_class: 40, ..Default::default() };
        let (source, target) = synth_domains(&cfg).unwrap();
        let (_, target_train) = {
            let (a, b) = split(&target, 0.8, 0).unwrap();
            (b, a)
        };
        let tc = TrainConfig { learning_rate: 1e-2, epochs: 5, ..Default::default() };
        let trained = train_head(&source, &tc, &mut RngStream::new(0)).unwrap();
        let (r, c) = trained.head.weight().shape();
        let mask = WeightMask::filled(r, c, false);
        let start = init_reuse_weights(
            &trained.head,
            &mask,
            InitStrategy::SourceFinal,
            &trained.snapshots,
            0.01,
            &mut RngStream::new(1),
        )
        .unwrap();
        let masked = finetune_with_mask(&start, &mask, &target_train, &tc, &mut RngStream::new(7)).unwrap();
        let base = unmasked_finetune_baseline(&trained.head, &target_train, &tc, &mut RngStream::new(7)).unwrap();
        assert_eq!(masked.head, base);
        let again = unmasked_finetune_baseline(&trained.head, &target_train, &tc, &mut RngStream::new(7)).unwrap();
        assert_eq!(again, base);
    }

    #[test]
    fn tradeoff_and_ablation_shapes() {
        let mut recs = vec![rec(0.1, -0.1, 0)];
        let mut e = rec(-0.05, 0.02, 0);
        e.strategy = MaskStrategy::Editor;
        recs.push(e);
        let mut r = rec(0.0, 0.0, 0);
        r.init_strategy = InitStrategy::Random;
        recs.push(r);
        let report = build_report(recs, vec![]).unwrap();
        let t = TradeoffSummary::from_report(&report).unwrap();
        assert_eq!((t.best_source, t.best_target), (MaskStrategy::Binary, MaskStrategy::Editor));
        assert!(t.is_tradeoff());
        let table = AblationTable::from_report(&report, MaskStrategy::Binary);
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.source_domains, vec!["a".to_string()]);
        assert_eq!(table.rows[0].1[0], None);
        assert!(table.to_markdown().contains("+0.100 / -0.100"));
    }

    fn arb_record() -> impl Strategy<Value = GainRecord> {
        (-1.0f64..1.0, -1.0f64..1.0, 0u64..5, 0usize..2, 0usize..3, 0.0f64..1.0).prop_map(|(s, t, seed, st, init, f)| {
            GainRecord {
                source_gain: s,
                target_gain: t,
                strategy: [MaskStrategy::Editor, MaskStrategy::Binary][st],
                init_strategy: InitStrategy::ALL[init],
                source_domain: "src".into(),
                target_domain: "tgt".into(),
                seed,
                frozen_fraction: f,
            }
        })
    }

    proptest! {
        #[test]
        fn aggregation_is_order_invariant(recs in prop::collection::vec(arb_record(), 0..20), rot in 0usize..20) {
            let a = build_report(recs.clone(), vec![]).unwrap();
            let mut shuffled = recs.clone();
            shuffled.reverse();
            if !shuffled.is_empty() {
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
            }
            let b = build_report(shuffled, vec![]).unwrap();
            prop_assert_eq!(&a, &b);
            for c in &a.cells {
                let mine: Vec<&GainRecord> = recs.iter().filter(|r| r.cell() == c.key()).collect();
                let mean = mine.iter().map(|r| r.source_gain).sum::<f64>() / mine.len() as f64;
                prop_assert!((mean - c.source_gain_mean).abs() <= 1e-15 * mine.len() as f64);
                prop_assert_eq!(c.seeds, mine.len());
                prop_assert_eq!(c.source_gain_std.is_some(), mine.len() >= 2);
            }
        }

        #[test]
        fn report_round_trips(recs in prop::collection::vec(arb_record(), 0..12)) {
            let r = build_report(recs, vec!["ab".into(), "cd".into()]).unwrap();
            for fmt in [ReportFormat::Json, ReportFormat::Csv] {
                let once = emit_report(&r, fmt).unwrap();
                let parsed = parse_report(&once, fmt).unwrap();
                prop_assert_eq!(&parsed.cells, &r.cells);
                prop_assert_eq!(emit_report(&parsed, fmt).unwrap(), once);
            }
            prop_assert_eq!(parse_report(&emit_report(&r, ReportFormat::Json).unwrap(), ReportFormat::Json).unwrap(), r);
        }
    }
}
