//! Stage configurations and the outcome classifier.
//!
//! Every syntactically valid record maps to exactly one [`OutcomeLabel`]
//! together with a verdict per interpretation and the conservation laws it
//! breaks. [`enumerate_taxonomy`] walks the whole outcome space of a stage.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::physics::{em_phase_shift, PhaseMode, PhysicsParams};
use crate::sensor::{validate_timing, ClickRecord, OdTheta, SensorTimings, Stage};
use crate::state::{phase_distance, SpinQubit};

/// EM phase source for stage 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmSetup {
    pub params: PhysicsParams,
    pub mode: PhaseMode,
    /// Phase classification tolerance; `None` means `|ΔΦ| / 10`.
    pub tolerance: Option<f64>,
}

impl EmSetup {
    pub fn delta_phi(&self) -> Result<f64> {
        em_phase_shift(&self.params, self.mode)
    }

    pub fn phase_tolerance(&self) -> Result<f64> {
        match self.tolerance {
            Some(t) => Ok(t),
            None => Ok(self.delta_phi()?.abs() / 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageConfig {
    pub stage: Stage,
    pub initial: SpinQubit,
    pub timings: SensorTimings,
    pub em: Option<EmSetup>,
    /// Stages 2–3: whether the mid-loop TSs are present.
    pub ts_inserted: bool,
}

impl StageConfig {
    pub fn new(
        stage: Stage,
        initial: SpinQubit,
        timings: SensorTimings,
        em: Option<EmSetup>,
        ts_inserted: bool,
    ) -> Result<Self> {
        let cfg = StageConfig {
            stage,
            initial,
            timings,
            em,
            ts_inserted,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn stage1(initial: SpinQubit) -> Self {
        StageConfig {
            stage: Stage::One,
            initial,
            timings: SensorTimings::default(),
            em: None,
            ts_inserted: true,
        }
    }

    pub fn stage2(initial: SpinQubit) -> Self {
        StageConfig {
            stage: Stage::Two,
            ..StageConfig::stage1(initial)
        }
    }

    pub fn stage3(initial: SpinQubit, params: PhysicsParams) -> Self {
        StageConfig {
            stage: Stage::Three,
            em: Some(EmSetup {
                params,
                mode: PhaseMode::Verbatim,
                tolerance: None,
            }),
            ..StageConfig::stage1(initial)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.stage, &self.em) {
            (Stage::Three, None) => {
                return Err(Error::domain("stage 3 requires an EM phase source"))
            }
            (Stage::One | Stage::Two, Some(_)) => {
                return Err(Error::domain(format!(
                    "stage {} takes no EM phase source",
                    self.stage
                )))
            }
            _ => {}
        }
        if self.stage == Stage::One && !self.ts_inserted {
            return Err(Error::domain(
                "removing the TSs is only possible in stages 2 and 3",
            ));
        }
        let report = validate_timing(&self.timings)?;
        if !report.pass {
            let failed: Vec<_> = report.failures().map(|c| c.relation).collect();
            return Err(Error::domain(format!(
                "sensor timings violate {}",
                failed.join(", ")
            )));
        }
        let latest = self.timings.od_click_time().max(self.timings.tau_ts);
        if latest > self.timings.t_window {
            return Err(Error::domain(format!(
                "clicks up to {latest} s after the particle cannot fit a {} s window",
                self.timings.t_window
            )));
        }
        if let Some(em) = &self.em {
            let dphi = em.delta_phi()?;
            let tol = em.phase_tolerance()?;
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::domain(format!(
                    "phase tolerance must be positive, got {tol}"
                )));
            }
            if phase_distance(dphi, 0.0) <= 2.0 * tol {
                return Err(Error::domain(format!(
                    "ΔΦ = {dphi} rad cannot be told apart from 0 at tolerance {tol}"
                )));
            }
        }
        Ok(())
    }

    /// ΔΦ for stage 3.
    pub fn delta_phi(&self) -> Option<f64> {
        self.em.as_ref().and_then(|e| e.delta_phi().ok())
    }

    pub fn phase_tolerance(&self) -> Option<f64> {
        self.em.as_ref().and_then(|e| e.phase_tolerance().ok())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutcomeLabel {
    Normal,
    /// TS and OD disagree on the path.
    DelayedChoice,
    /// Stage 1: no TS fired.
    UncommittedChoice,
    /// Stage 1: both TSs fired.
    DoubleTs,
    /// Stage 1: zero or two OD clicks.
    Forbidden,
    /// One TS fired yet the OD sees a superposition.
    Recoherence,
    RecoherenceWithPhase,
    RecoherenceWithoutPhase,
    TsAnomalyNoMerge,
    TsAnomalyWithMerge,
    TsAnomalyWithMergeWithPhase,
    TsAnomalyWithMergeWithoutPhase,
    /// Stages 2–3 with the TSs removed: plain split and remerge.
    Control,
}

impl OutcomeLabel {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeLabel::Normal => "normal",
            OutcomeLabel::DelayedChoice => "delayed-choice",
            OutcomeLabel::UncommittedChoice => "uncommitted-choice",
            OutcomeLabel::DoubleTs => "double-ts",
            OutcomeLabel::Forbidden => "forbidden",
            OutcomeLabel::Recoherence => "recoherence",
            OutcomeLabel::RecoherenceWithPhase => "recoherence-with-phase",
            OutcomeLabel::RecoherenceWithoutPhase => "recoherence-without-phase",
            OutcomeLabel::TsAnomalyNoMerge => "ts-anomaly-no-merge",
            OutcomeLabel::TsAnomalyWithMerge => "ts-anomaly-with-merge",
            OutcomeLabel::TsAnomalyWithMergeWithPhase => "ts-anomaly-with-merge-with-phase",
            OutcomeLabel::TsAnomalyWithMergeWithoutPhase => "ts-anomaly-with-merge-without-phase",
            OutcomeLabel::Control => "control",
        }
    }

    /// Labels whose records carry a remerged superposition after a TS fired.
    pub fn is_recoherence(self) -> bool {
        matches!(
            self,
            OutcomeLabel::Recoherence
                | OutcomeLabel::RecoherenceWithPhase
                | OutcomeLabel::RecoherenceWithoutPhase
        )
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for OutcomeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    Violated,
    NoExplanation,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Violated => "violated",
            Verdict::NoExplanation => "no-explanation",
        }
    }
}

/// One verdict per interpretation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    pub ci: Verdict,
    pub mwi: Verdict,
    pub bhsi: Verdict,
}

impl Verdicts {
    const ALL_CONSISTENT: Verdicts = Verdicts {
        ci: Verdict::Consistent,
        mwi: Verdict::Consistent,
        bhsi: Verdict::Consistent,
    };
    const ALL_VIOLATED: Verdicts = Verdicts {
        ci: Verdict::Violated,
        mwi: Verdict::Violated,
        bhsi: Verdict::Violated,
    };
    const NONE_EXPLAIN: Verdicts = Verdicts {
        ci: Verdict::NoExplanation,
        mwi: Verdict::NoExplanation,
        bhsi: Verdict::NoExplanation,
    };
    /// Rules out instantaneous collapse and global branching, fits local
    /// branching.
    const LOCAL_ONLY: Verdicts = Verdicts {
        ci: Verdict::Violated,
        mwi: Verdict::Violated,
        bhsi: Verdict::Consistent,
    };
    const LOCAL_WITH_CAVEAT: Verdicts = Verdicts {
        ci: Verdict::NoExplanation,
        mwi: Verdict::NoExplanation,
        bhsi: Verdict::Consistent,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConservationFlags {
    /// TS clicks do not sum to one.
    pub probability: bool,
    /// OD clicks do not sum to one (mass, charge, energy).
    pub physical: bool,
}

impl ConservationFlags {
    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.probability {
            v.push("probability-violation");
        }
        if self.physical {
            v.push("physical-conservation-violation");
        }
        v
    }
}

impl fmt::Display for ConservationFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join("|"))
    }
}

/// Stage-3 reading on retrocausality, for recohered records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Retrocausality {
    /// ΔΦ survived the TS: phase set by local unitary evolution.
    Falsified,
    /// ΔΦ erased: the later measurement disrupted earlier coherence.
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeClass {
    /// `[TS_L,TS_R;OD_L,OD_R]`, `[TS_L,TS_R;θ]` or `[TS_L,TS_R;θ,φ]`.
    pub tuple: String,
    pub label: OutcomeLabel,
    pub verdicts: Verdicts,
    pub flags: ConservationFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrocausality: Option<Retrocausality>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

const NOTE_UNCOMMITTED: &str =
    "BHSI reading: the OD branched before either TS committed; whether probability may be transiently unconserved is open";
const NOTE_NO_MERGE: &str =
    "BHSI allows a transient window where probability conservation fails, but offers no natural account";
const NOTE_MERGE_NO_TS: &str =
    "if the uncommitted TSs are ignored this is the ordinary no-TS remerge, normal for all three";

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

fn ts_prefix(r: &ClickRecord) -> String {
    if r.ts_inserted {
        format!("{},{}", bit(r.ts_left), bit(r.ts_right))
    } else {
        "no-ts".to_string()
    }
}

fn probability_flag(r: &ClickRecord) -> bool {
    r.ts_inserted && r.ts_count() != 1
}

fn control_class(tuple: String) -> OutcomeClass {
    OutcomeClass {
        tuple,
        label: OutcomeLabel::Control,
        verdicts: Verdicts::ALL_CONSISTENT,
        flags: ConservationFlags::default(),
        retrocausality: None,
        note: None,
    }
}

pub fn classify_stage1(r: &ClickRecord) -> Result<OutcomeClass> {
    if r.stage != Stage::One {
        return Err(Error::domain(format!(
            "stage-{} record given to the stage-1 classifier",
            r.stage
        )));
    }
    r.validate()?;
    let (od_l, od_r) = (r.od_left.unwrap_or(false), r.od_right.unwrap_or(false));
    let tuple = format!(
        "[{},{};{},{}]",
        bit(r.ts_left),
        bit(r.ts_right),
        bit(od_l),
        bit(od_r)
    );
    let flags = ConservationFlags {
        probability: probability_flag(r),
        physical: od_l == od_r,
    };
    let (label, verdicts, note) = if od_l == od_r {
        (OutcomeLabel::Forbidden, Verdicts::ALL_VIOLATED, None)
    } else {
        match (r.ts_left, r.ts_right) {
            (true, false) | (false, true) if r.ts_left == od_l => {
                (OutcomeLabel::Normal, Verdicts::ALL_CONSISTENT, None)
            }
            (true, false) | (false, true) => {
                (OutcomeLabel::DelayedChoice, Verdicts::LOCAL_ONLY, None)
            }
            (false, false) => (
                OutcomeLabel::UncommittedChoice,
                Verdicts::LOCAL_WITH_CAVEAT,
                Some(NOTE_UNCOMMITTED),
            ),
            (true, true) => (OutcomeLabel::DoubleTs, Verdicts::NONE_EXPLAIN, None),
        }
    };
    Ok(OutcomeClass {
        tuple,
        label,
        verdicts,
        flags,
        retrocausality: None,
        note,
    })
}

fn classify_full_loop(r: &ClickRecord, theta: OdTheta, tuple: String) -> OutcomeClass {
    if !r.ts_inserted {
        return control_class(tuple);
    }
    let flags = ConservationFlags {
        probability: probability_flag(r),
        physical: false,
    };
    let (label, verdicts, note) = match (r.ts_left, r.ts_right, theta) {
        (true, false, OdTheta::Zero) | (false, true, OdTheta::HalfPi) => {
            (OutcomeLabel::Normal, Verdicts::ALL_CONSISTENT, None)
        }
        (true, false, OdTheta::QuarterPi) | (false, true, OdTheta::QuarterPi) => {
            (OutcomeLabel::Recoherence, Verdicts::LOCAL_ONLY, None)
        }
        (true, false, _) | (false, true, _) => {
            (OutcomeLabel::DelayedChoice, Verdicts::LOCAL_ONLY, None)
        }
        (false, false, OdTheta::QuarterPi) => (
            OutcomeLabel::TsAnomalyWithMerge,
            Verdicts::NONE_EXPLAIN,
            Some(NOTE_MERGE_NO_TS),
        ),
        (true, true, OdTheta::QuarterPi) => (
            OutcomeLabel::TsAnomalyWithMerge,
            Verdicts::NONE_EXPLAIN,
            None,
        ),
        _ => (
            OutcomeLabel::TsAnomalyNoMerge,
            Verdicts::NONE_EXPLAIN,
            Some(NOTE_NO_MERGE),
        ),
    };
    OutcomeClass {
        tuple,
        label,
        verdicts,
        flags,
        retrocausality: None,
        note,
    }
}

pub fn classify_stage2(r: &ClickRecord) -> Result<OutcomeClass> {
    if r.stage != Stage::Two {
        return Err(Error::domain(format!(
            "stage-{} record given to the stage-2 classifier",
            r.stage
        )));
    }
    r.validate()?;
    let theta = r
        .od_theta
        .ok_or_else(|| Error::domain("missing od_theta"))?;
    let tuple = format!("[{};{}]", ts_prefix(r), theta.symbol());
    Ok(classify_full_loop(r, theta, tuple))
}

/// Stage 3: the stage-2 taxonomy with the remerged classes split by whether
/// the OD phase matches `expected_phase` (ΔΦ) or 0. The phase of a basis
/// state reading carries no information and does not change its label.
pub fn classify_stage3(
    r: &ClickRecord,
    expected_phase: f64,
    phase_tolerance: f64,
) -> Result<OutcomeClass> {
    if r.stage != Stage::Three {
        return Err(Error::domain(format!(
            "stage-{} record given to the stage-3 classifier",
            r.stage
        )));
    }
    r.validate()?;
    if !(phase_tolerance.is_finite() && phase_tolerance > 0.0) || !expected_phase.is_finite() {
        return Err(Error::domain(
            "phase reference and tolerance must be finite, tolerance > 0",
        ));
    }
    if phase_distance(expected_phase, 0.0) <= phase_tolerance {
        return Err(Error::domain(format!(
            "expected phase {expected_phase} is within tolerance {phase_tolerance} of 0"
        )));
    }
    let theta = r
        .od_theta
        .ok_or_else(|| Error::domain("missing od_theta"))?;
    let phi = r.od_phi.ok_or_else(|| Error::domain("missing od_phi"))?;
    let shifted = if phase_distance(phi, expected_phase) <= phase_tolerance {
        true
    } else if phase_distance(phi, 0.0) <= phase_tolerance {
        false
    } else {
        return Err(Error::UnclassifiablePhase {
            od_phi: phi,
            expected: expected_phase,
            tolerance: phase_tolerance,
        });
    };
    let tuple = format!(
        "[{};{},{}]",
        ts_prefix(r),
        theta.symbol(),
        if shifted { "dphi" } else { "0" }
    );
    let mut class = classify_full_loop(r, theta, tuple);
    match (class.label, shifted) {
        (OutcomeLabel::Recoherence, true) => {
            class.label = OutcomeLabel::RecoherenceWithPhase;
            class.retrocausality = Some(Retrocausality::Falsified);
        }
        (OutcomeLabel::Recoherence, false) => {
            class.label = OutcomeLabel::RecoherenceWithoutPhase;
            class.retrocausality = Some(Retrocausality::Consistent);
        }
        (OutcomeLabel::TsAnomalyWithMerge, true) => {
            class.label = OutcomeLabel::TsAnomalyWithMergeWithPhase;
        }
        (OutcomeLabel::TsAnomalyWithMerge, false) => {
            class.label = OutcomeLabel::TsAnomalyWithMergeWithoutPhase;
        }
        _ => {}
    }
    Ok(class)
}

/// Dispatch on the record's stage, taking the stage-3 phase reference from
/// `cfg`.
pub fn classify(r: &ClickRecord, cfg: &StageConfig) -> Result<OutcomeClass> {
    match r.stage {
        Stage::One => classify_stage1(r),
        Stage::Two => classify_stage2(r),
        Stage::Three => {
            let em = cfg
                .em
                .as_ref()
                .ok_or_else(|| Error::domain("stage-3 classification needs ΔΦ"))?;
            classify_stage3(r, em.delta_phi()?, em.phase_tolerance()?)
        }
    }
}

fn parse_bit(tok: &str, text: &str) -> Result<bool> {
    match tok.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        t => Err(Error::domain(format!("`{t}` in `{text}` is not 0 or 1"))),
    }
}

/// Inverse of the tuple notation used in [`OutcomeClass::tuple`]. In stage 3
/// the phase may be `dphi` (taken as `expected_phase`), `0`, or an angle.
pub fn parse_tuple(stage: Stage, text: &str, expected_phase: f64) -> Result<ClickRecord> {
    let bad = || Error::domain(format!("`{text}` is not a stage-{stage} outcome tuple"));
    let body = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(bad)?;
    let (ts, od) = body.split_once(';').ok_or_else(bad)?;
    let (ts_inserted, ts_l, ts_r) = if ts.trim() == "no-ts" {
        (false, false, false)
    } else {
        let (l, r) = ts.split_once(',').ok_or_else(bad)?;
        (true, parse_bit(l, text)?, parse_bit(r, text)?)
    };
    let od: Vec<&str> = od.split(',').map(str::trim).collect();
    let theta = |s: &str| OdTheta::parse_symbol(s).ok_or_else(bad);
    let mut r = match (stage, od.as_slice()) {
        (Stage::One, [l, r]) => {
            ClickRecord::stage1(ts_l, ts_r, parse_bit(l, text)?, parse_bit(r, text)?)
        }
        (Stage::Two, [t]) => ClickRecord::stage2(ts_l, ts_r, theta(t)?),
        (Stage::Three, [t, phi]) => {
            let phi = match *phi {
                "dphi" => expected_phase,
                p => crate::units::parse_angle(p)?,
            };
            ClickRecord::stage3(ts_l, ts_r, theta(t)?, phi)
        }
        _ => return Err(bad()),
    };
    r.ts_inserted = ts_inserted;
    r.validate()?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxonomyRow {
    pub stage: Stage,
    #[serde(flatten)]
    pub class: OutcomeClass,
}

/// Every outcome tuple of a stage with its classification: 16 rows for
/// stage 1, 12 for stage 2 and 24 for stage 3 (phase 0 or ΔΦ).
pub fn enumerate_taxonomy(stage: Stage) -> Vec<TaxonomyRow> {
    const BITS: [bool; 2] = [false, true];
    // any nonzero reference works; the tuple shows it symbolically
    const REF_PHASE: f64 = 1.0;
    const REF_TOL: f64 = 0.1;
    let mut records = Vec::new();
    for ts_l in BITS.into_iter().rev() {
        for ts_r in BITS {
            match stage {
                Stage::One => {
                    for od_l in BITS.into_iter().rev() {
                        for od_r in BITS {
                            records.push(ClickRecord::stage1(ts_l, ts_r, od_l, od_r));
                        }
                    }
                }
                Stage::Two => {
                    for theta in OdTheta::ALL {
                        records.push(ClickRecord::stage2(ts_l, ts_r, theta));
                    }
                }
                Stage::Three => {
                    for theta in OdTheta::ALL {
                        for phi in [0.0, REF_PHASE] {
                            records.push(ClickRecord::stage3(ts_l, ts_r, theta, phi));
                        }
                    }
                }
            }
        }
    }
    records
        .iter()
        .map(|r| {
            let class = match stage {
                Stage::One => classify_stage1(r),
                Stage::Two => classify_stage2(r),
                Stage::Three => classify_stage3(r, REF_PHASE, REF_TOL),
            }
            .expect("enumerated records are well formed");
            TaxonomyRow { stage, class }
        })
        .collect()
}
