use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use fairaudit_core::dataset::ValueRef;
use fairaudit_core::harness::{summarize, write_csv, ExperimentReport, SuiteReport};
use fairaudit_core::inference::{BootstrapEstimate, CIEstimate, DiTarget, TestResult};
use fairaudit_core::metrics::Metric;
use fairaudit_core::mitigation::Strategy;
use fairaudit_core::{Error, Result};
use serde::Serialize;

use crate::{Format, OutputArgs};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct TestEntry {
    pub target: DiTarget,
    #[serde(flatten)]
    pub result: TestResult,
}

#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub dataset: String,
    pub sensitive: ValueRef,
    pub group_labels: [String; 2],
    pub n_rows: usize,
    pub level: f64,
    /// Where the audited decisions came from, if any.
    pub prediction_source: Option<String>,
    pub data_di: CIEstimate,
    pub classifier_di: Option<CIEstimate>,
    pub tp_ratio: Option<CIEstimate>,
    pub tn_ratio: Option<CIEstimate>,
    /// Share of rows whose decision flips with `S` (saved models only).
    pub flip_fraction: Option<f64>,
    pub tests: Vec<TestEntry>,
}

#[derive(Debug, Serialize)]
pub struct MitigationReport {
    pub schema_version: u32,
    pub strategy: Strategy,
    pub baseline: ExperimentReport,
    pub mitigated: ExperimentReport,
    /// Mitigated minus baseline fold mean, per metric.
    pub mean_change: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct BootstrapComparison {
    pub schema_version: u32,
    pub dataset: String,
    pub sensitive: ValueRef,
    pub metric: Metric,
    pub n_rows: usize,
    pub level: f64,
    pub theoretical: CIEstimate,
    pub bootstrap: BootstrapEstimate,
    pub lower_difference: f64,
    pub upper_difference: f64,
}

/// CSV and human renderings; JSON comes from `Serialize`.
pub trait Render: Serialize {
    fn csv(&self) -> Result<Vec<u8>>;
    fn human(&self) -> String;
}

fn ser(e: impl std::fmt::Display) -> Error {
    Error::Serialization(e.to_string())
}

fn full(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn r4(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn ci_line(label: &str, ci: &CIEstimate) -> String {
    format!(
        "{label:<15}{:.4}  [{:.4}, {:.4}]",
        ci.point, ci.lower, ci.upper
    )
}

pub fn emit<T: Render>(out: &OutputArgs, value: &T) -> Result<()> {
    let bytes = match out.format {
        Format::Json => (serde_json::to_string_pretty(value).map_err(ser)? + "\n").into_bytes(),
        Format::Csv => value.csv()?,
        Format::Human => (value.human() + "\n").into_bytes(),
    };
    match &out.output {
        Some(path) => std::fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout().write_all(&bytes).map_err(ser),
    }
}

impl Render for AuditReport {
    fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "quantity", "point", "lower", "upper", "sigma", "n", "statistic", "p_value", "reject",
        ])
        .map_err(ser)?;
        let intervals = [
            Some(&self.data_di),
            self.classifier_di.as_ref(),
            self.tp_ratio.as_ref(),
            self.tn_ratio.as_ref(),
        ];
        for ci in intervals.into_iter().flatten() {
            w.write_record([
                ci.metric.name().to_string(),
                ci.point.to_string(),
                ci.lower.to_string(),
                ci.upper.to_string(),
                full(ci.sigma),
                ci.n.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ])
            .map_err(ser)?;
        }
        if let Some(f) = self.flip_fraction {
            let mut row = vec![String::new(); 9];
            row[0] = "flip_fraction".into();
            row[1] = f.to_string();
            w.write_record(&row).map_err(ser)?;
        }
        for t in &self.tests {
            let r = &t.result;
            w.write_record([
                format!("test:{}:{}", t.target.metric(), direction_name(t)),
                r.point.to_string(),
                String::new(),
                String::new(),
                r.sigma.to_string(),
                r.n.to_string(),
                r.statistic.to_string(),
                r.p_value.to_string(),
                r.reject.to_string(),
            ])
            .map_err(ser)?;
        }
        w.into_inner().map_err(ser)
    }

    fn human(&self) -> String {
        let mut s = format!(
            "dataset {} (n = {}), sensitive {}: S=0 {}, S=1 {}\n",
            self.dataset, self.n_rows, self.sensitive.column, self.group_labels[0], self.group_labels[1]
        );
        let _ = writeln!(s, "{:.0}% confidence intervals", self.level * 100.0);
        let _ = writeln!(s, "{}", ci_line("data DI", &self.data_di));
        if let Some(src) = &self.prediction_source {
            let _ = writeln!(s, "decisions from {src}");
        }
        for (label, ci) in [
            ("classifier DI", &self.classifier_di),
            ("TP ratio", &self.tp_ratio),
            ("TN ratio", &self.tn_ratio),
        ] {
            if let Some(ci) = ci {
                let _ = writeln!(s, "{}", ci_line(label, ci));
            }
        }
        if let Some(f) = self.flip_fraction {
            let _ = writeln!(s, "{:<15}{f:.4}", "flip fraction");
        }
        for t in &self.tests {
            let r = &t.result;
            let _ = writeln!(
                s,
                "test {} {} (beta {:.4}, alpha {:.4}): statistic {:.4}, p {:.4}, {}",
                t.target.metric(),
                direction_name(t),
                r.beta,
                r.alpha,
                r.statistic,
                r.p_value,
                if r.reject { "reject" } else { "keep" }
            );
        }
        s.trim_end().to_string()
    }
}

fn direction_name(t: &TestEntry) -> &'static str {
    match t.result.direction {
        fairaudit_core::inference::Direction::FairnessEvidence => "fairness_evidence",
        fairaudit_core::inference::Direction::DiscriminationEvidence => "discrimination_evidence",
    }
}

fn reports_csv(reports: &[ExperimentReport]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(buf)
}

fn report_table(r: &ExperimentReport) -> String {
    let mut s = format!(
        "{} on {} ({}, k = {}, seed {})\n{:<6}{:>9}{:>9}{:>9}{:>9}{:>18}\n",
        r.config.cell(),
        r.dataset,
        r.sensitive.column,
        r.config.k,
        r.config.seed,
        "fold",
        "acc",
        "TPR",
        "TNR",
        "DI",
        "DI CI"
    );
    for row in summarize(r).unwrap_or_default() {
        let label = row.fold.map_or(row.kind.clone(), |f| f.to_string());
        let _ = writeln!(
            s,
            "{label:<6}{:>9}{:>9}{:>9}{:>9}  [{}, {}]",
            r4(row.accuracy),
            r4(row.tpr),
            r4(row.tnr),
            r4(row.di),
            r4(row.di_lower),
            r4(row.di_upper)
        );
    }
    s.trim_end().to_string()
}

impl Render for ExperimentReport {
    fn csv(&self) -> Result<Vec<u8>> {
        reports_csv(std::slice::from_ref(self))
    }

    fn human(&self) -> String {
        report_table(self)
    }
}

impl Render for MitigationReport {
    fn csv(&self) -> Result<Vec<u8>> {
        reports_csv(&[self.baseline.clone(), self.mitigated.clone()])
    }

    fn human(&self) -> String {
        let mut s = format!("{}\n\n{}\n\nmean change", report_table(&self.baseline), report_table(&self.mitigated));
        for key in ["accuracy", "tpr", "tnr", "di", "fpr_s0", "fpr_s1"] {
            if let Some(v) = self.mean_change.get(key) {
                let _ = write!(s, "\n  {key:<10}{v:+.4}");
            }
        }
        s
    }
}

impl Render for BootstrapComparison {
    fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "metric", "point", "lower", "upper", "n", "replicates", "undefined"])
            .map_err(ser)?;
        let t = &self.theoretical;
        let b = &self.bootstrap;
        w.write_record([
            "delta".to_string(),
            t.metric.name().into(),
            t.point.to_string(),
            t.lower.to_string(),
            t.upper.to_string(),
            t.n.to_string(),
            String::new(),
            String::new(),
        ])
        .map_err(ser)?;
        w.write_record([
            "bootstrap_percentile".to_string(),
            b.ci.metric.name().into(),
            b.ci.point.to_string(),
            b.ci.lower.to_string(),
            b.ci.upper.to_string(),
            b.ci.n.to_string(),
            b.replicates.to_string(),
            b.undefined.to_string(),
        ])
        .map_err(ser)?;
        w.write_record([
            "abs_difference".to_string(),
            t.metric.name().into(),
            String::new(),
            self.lower_difference.to_string(),
            self.upper_difference.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])
        .map_err(ser)?;
        w.into_inner().map_err(ser)
    }

    fn human(&self) -> String {
        format!(
            "{} on {} (n = {}, sensitive {}), {:.0}% intervals\n{}\n{}\n{:<15}{:.4}  {:.4}\n{} replicates (seed {}), {} undefined",
            self.metric,
            self.dataset,
            self.n_rows,
            self.sensitive.column,
            self.level * 100.0,
            ci_line("delta method", &self.theoretical),
            ci_line("bootstrap", &self.bootstrap.ci),
            "|difference|",
            self.lower_difference,
            self.upper_difference,
            self.bootstrap.replicates,
            self.bootstrap.seed,
            self.bootstrap.undefined
        )
    }
}

/// One line per configuration with fold means and the reference DI.
pub fn suite_table(suite: &SuiteReport) -> String {
    let mut s = format!(
        "{:<14}{:<14}{:<32}{:>9}{:>9}{:>9}{:>9}{:>9}",
        "experiment", "dataset", "cell", "acc", "TPR", "TNR", "DI", "ref DI"
    );
    for r in &suite.reports {
        let _ = write!(
            s,
            "\n{:<14}{:<14}{:<32}{:>9}{:>9}{:>9}{:>9}{:>9}",
            r.config.name,
            r.dataset,
            r.config.cell(),
            r4(r.mean("accuracy")),
            r4(r.mean("tpr")),
            r4(r.mean("tnr")),
            r4(r.mean("di")),
            r4(Some(r.reference.full.point))
        );
    }
    s
}
