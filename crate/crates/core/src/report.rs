//! Run reports and the CSV tables emitted by the command line.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;

use crate::engines::EngineKind;
use crate::error::{Error, Result};
use crate::physics::SweepTable;
use crate::sensor::Stage;
use crate::stages::{
    classify_stage1, classify_stage2, classify_stage3, parse_tuple, OutcomeClass, TaxonomyRow,
};
use crate::stats::{AuditReport, Histogram, RateEstimate};

pub const REPORT_SCHEMA: &str = "sgi-run-report/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornSummary {
    pub theta: f64,
    pub left: u64,
    pub right: u64,
    pub chi2: f64,
    pub dof: u32,
    pub p_value: f64,
    /// `p_value` below the configured significance.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    /// ΔΦ of the run.
    pub expected: f64,
    pub tolerance: f64,
    /// θ = π/4 readings that carried a phase.
    pub readings: u64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Report body. Field order is the JSON key order; nothing here depends on
/// wall-clock time or worker count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: String,
    pub seed: u64,
    pub config_digest: String,
    pub stage: Stage,
    pub engine: EngineKind,
    pub trial_count: u64,
    pub confidence: f64,
    /// Count per outcome label.
    pub histogram: Histogram,
    /// Count per outcome tuple.
    pub outcomes: Histogram,
    pub born_test: Option<BornSummary>,
    pub anomaly_rates: BTreeMap<String, RateEstimate>,
    pub audit: AuditReport,
    pub phase: Option<PhaseSummary>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `kind,bucket,count` rows: labels first, then tuples.
    pub fn histogram_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        write(&mut w, ["kind", "bucket", "count"]);
        for (kind, h) in [("label", &self.histogram), ("tuple", &self.outcomes)] {
            for (bucket, n) in h.iter() {
                write(&mut w, [kind, bucket, &n.to_string()]);
            }
        }
        finish(w)
    }
}

/// Wall-clock data kept out of the report body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub version: String,
    pub started_unix: f64,
    pub elapsed_seconds: f64,
    pub workers: usize,
}

impl RunMeta {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }
}

fn write<I, T>(w: &mut csv::Writer<Vec<u8>>, rec: I)
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(rec).expect("writing to memory");
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 csv")
}

const CLASS_COLUMNS: [&str; 8] = [
    "tuple",
    "label",
    "ci_verdict",
    "mwi_verdict",
    "bhsi_verdict",
    "flags",
    "retrocausality",
    "note",
];

fn class_fields(c: &OutcomeClass) -> [String; 8] {
    [
        c.tuple.clone(),
        c.label.name().to_string(),
        c.verdicts.ci.name().to_string(),
        c.verdicts.mwi.name().to_string(),
        c.verdicts.bhsi.name().to_string(),
        c.flags.to_string(),
        match c.retrocausality {
            Some(r) => serde_json::to_value(r)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            None => String::new(),
        },
        c.note.unwrap_or("").to_string(),
    ]
}

pub fn taxonomy_csv(rows: &[TaxonomyRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w, std::iter::once("stage").chain(CLASS_COLUMNS));
    for r in rows {
        let stage = r.stage.to_string();
        write(
            &mut w,
            std::iter::once(stage.as_str())
                .chain(class_fields(&r.class).iter().map(String::as_str)),
        );
    }
    finish(w)
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let output = serde_json::to_value(table.output)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    write(
        &mut w,
        [table.field.name(), &output, "unit", "mode", "error"],
    );
    for row in &table.rows {
        let (value, error) = match &row.result {
            Ok(v) => (format!("{v:?}"), String::new()),
            Err(e) => (String::new(), e.clone()),
        };
        write(
            &mut w,
            [
                format!("{:?}", row.value),
                value,
                table.output.unit().to_string(),
                table.mode.to_string(),
                error,
            ],
        );
    }
    finish(w)
}

/// Phase reference used when classifying stage-3 tuples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReference {
    pub expected: f64,
    pub tolerance: f64,
}

/// Read `stage,tuple` rows and emit each with its classification.
pub fn classify_csv(input: impl Read, phase: PhaseReference) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                key: name.to_string(),
                message: "missing column".into(),
            })
    };
    let (stage_col, tuple_col) = (col("stage")?, col("tuple")?);

    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w, std::iter::once("stage").chain(CLASS_COLUMNS));
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let located = |key: &str, e: Error| Error::Parse {
            line,
            key: key.to_string(),
            message: match e {
                Error::Domain(m) => m,
                e => e.to_string(),
            },
        };
        let stage_text = rec.get(stage_col).unwrap_or("");
        let stage = stage_text
            .parse::<u8>()
            .map_err(|_| Error::domain(format!("`{stage_text}` is not a stage")))
            .and_then(Stage::try_from)
            .map_err(|e| located("stage", e))?;
        let tuple = rec.get(tuple_col).unwrap_or("");
        let r = parse_tuple(stage, tuple, phase.expected).map_err(|e| located("tuple", e))?;
        let class = match stage {
            Stage::One => classify_stage1(&r),
            Stage::Two => classify_stage2(&r),
            Stage::Three => classify_stage3(&r, phase.expected, phase.tolerance),
        }
        .map_err(|e| located("tuple", e))?;
        let stage = stage.to_string();
        write(
            &mut w,
            std::iter::once(stage.as_str()).chain(class_fields(&class).iter().map(String::as_str)),
        );
    }
    Ok(finish(w))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        kind => Error::Parse {
            line,
            key: String::new(),
            message: format!("{kind:?}"),
        },
    }
}
