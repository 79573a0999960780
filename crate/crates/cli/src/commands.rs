use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mcudi_core::data::{generate_synthetic_stream, load_csv, Batch, IngestionReport, SynthConfig};
use mcudi_core::detectors::DetectorKind;
use mcudi_core::evaluation::{
    evaluate_detectors, feature_change_series, run_label_cost_pipeline, run_strategy,
    DetectorEvaluation, LabelCostReport, StrategyRunReport,
};
use mcudi_core::ground_truth::{label_all_batches, GroundTruthLabel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt_opt, render_table, Outputs};

/// Echo of what a command ran on, written as `run.json` next to its reports.
#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    csv: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detectors: Option<Vec<&'static str>>,
    config: &'a RunConfig,
    ingestion: &'a IngestionReport,
    outputs: Vec<String>,
}

struct Dataset {
    batches: Vec<Batch>,
    report: IngestionReport,
}

fn load(config: &RunConfig, csv: &Path) -> Result<Dataset, CliError> {
    let loaded = load_csv(csv, &config.schema)?;
    Ok(Dataset {
        batches: loaded.batches,
        report: loaded.report,
    })
}

fn finish(out: &mut Outputs, record: RunRecord<'_>) -> Result<(), CliError> {
    out.text("effective_config.toml", &record.config.to_toml())?;
    let record = RunRecord {
        outputs: out.written().to_vec(),
        ..record
    };
    out.json("run.json", &record)
}

fn summarize_truth(truth: &[GroundTruthLabel]) -> (usize, usize, usize) {
    let drift = truth.iter().filter(|l| l.is_drift == Some(true)).count();
    let stable = truth.iter().filter(|l| l.is_drift == Some(false)).count();
    (drift, stable, truth.len() - drift - stable)
}

fn write_truth(out: &mut Outputs, truth: &[GroundTruthLabel]) -> Result<(), CliError> {
    out.jsonl("ground_truth.jsonl", truth)?;
    let rows: Vec<Vec<String>> = truth
        .iter()
        .map(|l| {
            vec![
                l.period_id.to_string(),
                l.period_key.clone(),
                format!("{}/{}", l.drift_votes, l.n_seeds),
                match l.is_drift {
                    Some(true) => "drift".into(),
                    Some(false) => "non-drift".into(),
                    None => "excluded".into(),
                },
                fmt_opt(l.mean_severity, 4),
                fmt_opt(l.drift_severity, 4),
                l.excluded.map_or(String::new(), |r| r.as_str().to_string()),
            ]
        })
        .collect();
    let (d, s, e) = summarize_truth(truth);
    let mut table = render_table(
        &[
            "period",
            "key",
            "votes",
            "label",
            "mean_severity",
            "drift_severity",
            "excluded",
        ],
        &rows,
    );
    table.push_str(&format!("\n{d} drift, {s} non-drift, {e} excluded\n"));
    out.text("ground_truth.txt", &table)?;
    out.csv(
        "severity_series.csv",
        &[
            "period_id",
            "period_key",
            "is_drift",
            "drift_votes",
            "n_seeds",
            "mean_severity",
            "drift_severity",
            "excluded",
        ],
        truth.iter().map(|l| {
            vec![
                l.period_id.to_string(),
                l.period_key.clone(),
                l.is_drift.map_or(String::new(), |b| b.to_string()),
                l.drift_votes.to_string(),
                l.n_seeds.to_string(),
                l.mean_severity.map_or(String::new(), |v| v.to_string()),
                l.drift_severity.map_or(String::new(), |v| v.to_string()),
                l.excluded.map_or(String::new(), |r| r.as_str().to_string()),
            ]
        }),
    )
}

fn write_feature_changes(out: &mut Outputs, batches: &[Batch], alpha: f64) -> Result<(), CliError> {
    let series = feature_change_series(batches, alpha)?;
    out.csv(
        "feature_changes.csv",
        &[
            "period_id",
            "period_key",
            "changed_count",
            "changed_fraction",
            "changed_indices",
        ],
        series.iter().map(|r| {
            vec![
                r.period_id.to_string(),
                r.period_key.clone(),
                r.report.changed_count.to_string(),
                r.report.changed_fraction.to_string(),
                r.report
                    .changed_indices
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(";"),
            ]
        }),
    )
}

pub fn ground_truth(config: &RunConfig, csv: &Path, out_dir: &Path) -> Result<String, CliError> {
    let data = load(config, csv)?;
    let truth = label_all_batches(&data.batches, &config.ground_truth())?;
    let mut out = Outputs::create(out_dir)?;
    write_truth(&mut out, &truth)?;
    write_feature_changes(&mut out, &data.batches, config.alpha)?;
    finish(
        &mut out,
        RunRecord {
            command: "ground-truth",
            csv,
            ground_truth: None,
            detectors: None,
            config,
            ingestion: &data.report,
            outputs: vec![],
        },
    )?;
    let (d, s, e) = summarize_truth(&truth);
    Ok(format!(
        "{} periods labeled: {d} drift, {s} non-drift, {e} excluded; reports in {}",
        truth.len(),
        out.dir().display()
    ))
}

fn read_truth(path: &Path) -> Result<Vec<GroundTruthLabel>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(CliError::from))
        .collect()
}

/// Requested detectors plus the two constant baselines, in canonical order.
pub fn detector_set(requested: &[DetectorKind]) -> Vec<DetectorKind> {
    DetectorKind::ALL
        .into_iter()
        .filter(|k| {
            matches!(k, DetectorKind::Static | DetectorKind::Periodic) || requested.contains(k)
        })
        .collect()
}

fn detection_table(evals: &[DetectorEvaluation], truth: &[GroundTruthLabel]) -> String {
    let rows: Vec<Vec<String>> = evals
        .iter()
        .map(|e| {
            vec![
                e.detector.name().to_string(),
                fmt_opt(e.mean_specificity, 3),
                fmt_opt(e.mean_sensitivity, 3),
                fmt_opt(e.mean_balanced_accuracy, 3),
                e.per_seed.len().to_string(),
            ]
        })
        .collect();
    let (d, s, x) = summarize_truth(truth);
    let mut t = render_table(
        &[
            "detector",
            "specificity",
            "sensitivity",
            "balanced_accuracy",
            "seeds",
        ],
        &rows,
    );
    t.push_str(&format!(
        "\nscored periods: {} ({d} drift, {s} non-drift); excluded: {x}\n",
        d + s
    ));
    t.push_str("specificity = share of drift periods alarmed; sensitivity = share of non-drift periods left alone\n");
    t
}

fn strategy_rows(runs: &[StrategyRunReport]) -> Vec<Vec<String>> {
    runs.iter()
        .map(|r| {
            vec![
                r.strategy.name().to_string(),
                r.window.to_string(),
                fmt_opt(r.mean_roc_auc, 4),
                fmt_opt(r.sample_weighted_roc_auc, 4),
                format!("{:.1}/{}", r.retrain_count, r.total_periods),
                format!("{:.1}", r.label_cost),
            ]
        })
        .collect()
}

const STRATEGY_HEADER: [&str; 6] = [
    "strategy",
    "window",
    "mean_roc_auc",
    "weighted_roc_auc",
    "retrains",
    "label_cost",
];

fn auc_series_rows(runs: &[&StrategyRunReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in runs {
        for s in &r.per_seed {
            for p in &s.periods {
                rows.push(vec![
                    r.strategy.name().to_string(),
                    r.window.to_string(),
                    s.seed.to_string(),
                    p.period_id.to_string(),
                    p.n_samples.to_string(),
                    p.roc_auc.map_or(String::new(), |v| v.to_string()),
                    p.alarm.to_string(),
                    p.newly_annotated.to_string(),
                ]);
            }
        }
    }
    rows
}

const AUC_SERIES_HEADER: [&str; 8] = [
    "strategy",
    "window",
    "seed",
    "period_id",
    "n_samples",
    "roc_auc",
    "alarm",
    "newly_annotated",
];

pub fn evaluate(
    config: &RunConfig,
    csv: &Path,
    requested: &[DetectorKind],
    truth_path: Option<&Path>,
    out_dir: &Path,
) -> Result<String, CliError> {
    let data = load(config, csv)?;
    let mut out = Outputs::create(out_dir)?;
    let truth = match truth_path {
        Some(p) => read_truth(p)?,
        None => {
            let t = label_all_batches(&data.batches, &config.ground_truth())?;
            write_truth(&mut out, &t)?;
            t
        }
    };
    let kinds = detector_set(requested);
    let eval_cfg = config.evaluation();

    let evals = evaluate_detectors(&data.batches, &truth, &kinds, &eval_cfg)?;
    out.jsonl("detection.jsonl", &evals)?;
    out.text("detection_table.txt", &detection_table(&evals, &truth))?;

    let runs: Vec<StrategyRunReport> = kinds
        .iter()
        .map(|&k| run_strategy(&data.batches, k, &eval_cfg))
        .collect::<Result<_, _>>()?;
    out.jsonl("strategies.jsonl", &runs)?;
    out.text(
        "strategy_table.txt",
        &render_table(&STRATEGY_HEADER, &strategy_rows(&runs)),
    )?;
    out.csv(
        "auc_series.csv",
        &AUC_SERIES_HEADER,
        auc_series_rows(&runs.iter().collect::<Vec<_>>()),
    )?;
    write_feature_changes(&mut out, &data.batches, config.alpha)?;
    finish(
        &mut out,
        RunRecord {
            command: "evaluate",
            csv,
            ground_truth: truth_path,
            detectors: Some(kinds.iter().map(|k| k.name()).collect()),
            config,
            ingestion: &data.report,
            outputs: vec![],
        },
    )?;
    Ok(format!(
        "evaluated {} detectors over {} periods; reports in {}",
        kinds.len(),
        data.batches.len(),
        out.dir().display()
    ))
}

fn label_cost_table(r: &LabelCostReport) -> String {
    let mut rows = strategy_rows(&[r.periodic.clone(), r.mcudi.clone()]);
    rows[0][0] = "periodic".into();
    rows[1][0] = "mcudi-pipeline".into();
    let mut t = render_table(&STRATEGY_HEADER, &rows);
    t.push_str(&format!(
        "\nlabels saved: {:.1} per seed; AUC gap (periodic - mcudi): {}\n",
        r.savings,
        fmt_opt(r.auc_gap, 4)
    ));
    t
}

pub fn label_cost(config: &RunConfig, csv: &Path, out_dir: &Path) -> Result<String, CliError> {
    let data = load(config, csv)?;
    let report = run_label_cost_pipeline(&data.batches, &config.evaluation())?;
    let mut out = Outputs::create(out_dir)?;
    out.json("label_cost.json", &report)?;
    out.text("label_cost_table.txt", &label_cost_table(&report))?;
    out.csv(
        "label_cost_per_seed.csv",
        &[
            "seed",
            "mcudi_cost",
            "periodic_cost",
            "savings",
            "unflagged_samples",
        ],
        report.per_seed.iter().map(|s| {
            vec![
                s.seed.to_string(),
                s.mcudi_cost.to_string(),
                s.periodic_cost.to_string(),
                s.savings.to_string(),
                s.unflagged_samples.to_string(),
            ]
        }),
    )?;
    out.csv(
        "auc_series.csv",
        &AUC_SERIES_HEADER,
        auc_series_rows(&[&report.periodic, &report.mcudi]),
    )?;
    finish(
        &mut out,
        RunRecord {
            command: "label-cost",
            csv,
            ground_truth: None,
            detectors: None,
            config,
            ingestion: &data.report,
            outputs: vec![],
        },
    )?;
    Ok(format!(
        "mcudi pipeline annotated {:.1} samples vs {:.1} for periodic retraining; reports in {}",
        report.mcudi.label_cost,
        report.periodic.label_cost,
        out.dir().display()
    ))
}

pub fn synth(spec: &Path, seed: u64, start: NaiveDate, out_dir: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(spec).map_err(|e| CliError::io(spec, e))?;
    let cfg: SynthConfig = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("cannot parse {}: {e}", spec.display())))?;
    let stream = generate_synthetic_stream(&cfg, seed)?;
    let mut out = Outputs::create(out_dir)?;

    let csv_path = out.path("stream.csv");
    let file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    stream.write_csv(std::io::BufWriter::new(file), start)?;
    out.json("injections.json", &stream.ledger)?;
    let mut run = RunConfig::with_schema(stream.schema());
    run.output_dir = PathBuf::from("reports");
    out.text("config.toml", &run.to_toml())?;
    Ok(format!(
        "{} periods x {} rows written to {}; drift periods {:?}",
        cfg.periods,
        cfg.rows_per_period,
        csv_path.display(),
        stream.ledger.drift_periods
    ))
}
