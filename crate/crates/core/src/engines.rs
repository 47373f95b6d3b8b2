//! Measurement-dynamics engines. Each maps a split (and, in stage 3,
//! phase-shifted) [`PathState`] to one trial's [`ClickRecord`].
//!
//! Copenhagen and many-worlds sample identical click statistics through
//! different routes. The branched-subspace engine reproduces them when all
//! its anomaly rates are zero and otherwise injects delayed, uncommitted and
//! double-TS readings plus recoherence of the un-engaged branch. Anomalies
//! reroute clicks; they never reweight branches, so the OD marginal stays at
//! `(cos²θ, sin²θ)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::{pair_clicks, sample_ts_event, Click, ClickRecord, OdTheta, Sensor, Stage};
use crate::stages::StageConfig;
use crate::state::{born_weights, merge, phase_difference, Branch, PathState, AMPLITUDE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EngineKind {
    #[serde(rename = "CI")]
    Copenhagen,
    #[serde(rename = "MWI")]
    ManyWorlds,
    #[serde(rename = "BHSI")]
    BranchedSubspace,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [
        EngineKind::Copenhagen,
        EngineKind::ManyWorlds,
        EngineKind::BranchedSubspace,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EngineKind::Copenhagen => "CI",
            EngineKind::ManyWorlds => "MWI",
            EngineKind::BranchedSubspace => "BHSI",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CI" => Ok(EngineKind::Copenhagen),
            "MWI" => Ok(EngineKind::ManyWorlds),
            "BHSI" => Ok(EngineKind::BranchedSubspace),
            _ => Err(Error::domain(format!(
                "unknown engine `{s}` (CI | MWI | BHSI)"
            ))),
        }
    }
}

/// What a TS measurement does to the branch phase in stage 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrocausalMode {
    /// Branches keep their independently accumulated phase.
    #[default]
    Unitary,
    /// The TS wipes the phase accumulated before it.
    Erasure,
}

impl FromStr for RetrocausalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unitary" => Ok(RetrocausalMode::Unitary),
            "erasure" => Ok(RetrocausalMode::Erasure),
            _ => Err(Error::domain(format!(
                "unknown retrocausal mode `{s}` (unitary | erasure)"
            ))),
        }
    }
}

impl fmt::Display for RetrocausalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrocausalMode::Unitary => "unitary",
            RetrocausalMode::Erasure => "erasure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BhsiParams {
    /// TS fires on one path, OD on the other.
    pub p_delayed: f64,
    /// Neither TS commits before the OD fires.
    pub p_uncommitted: f64,
    /// Both TSs commit.
    pub p_double_ts: f64,
    /// Stages 2–3: the un-engaged branch survives and remerges.
    pub p_recohere: f64,
    pub retrocausal_mode: RetrocausalMode,
}

impl BhsiParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_delayed", self.p_delayed),
            ("p_uncommitted", self.p_uncommitted),
            ("p_double_ts", self.p_double_ts),
            ("p_recohere", self.p_recohere),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let ts_total = self.p_delayed + self.p_uncommitted + self.p_double_ts;
        if ts_total > 1.0 + 1e-12 {
            return Err(Error::domain(format!(
                "p_delayed + p_uncommitted + p_double_ts = {ts_total} exceeds 1"
            )));
        }
        Ok(())
    }
}

/// A measurement-dynamics model producing one trial at a time.
pub trait InterpretationEngine: Send + Sync {
    fn kind(&self) -> EngineKind;

    fn run_trial(
        &self,
        state: &PathState,
        stage: &StageConfig,
        rng: &mut dyn RngCore,
    ) -> Result<ClickRecord>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Copenhagen;

#[derive(Debug, Clone, Copy, Default)]
pub struct ManyWorlds;

#[derive(Debug, Clone, Copy, Default)]
pub struct BranchedSubspace {
    params: BhsiParams,
}

impl BranchedSubspace {
    pub fn new(params: BhsiParams) -> Result<Self> {
        params.validate()?;
        Ok(BranchedSubspace { params })
    }

    pub fn params(&self) -> &BhsiParams {
        &self.params
    }
}

impl InterpretationEngine for Copenhagen {
    fn kind(&self) -> EngineKind {
        EngineKind::Copenhagen
    }

    fn run_trial(
        &self,
        state: &PathState,
        stage: &StageConfig,
        rng: &mut dyn RngCore,
    ) -> Result<ClickRecord> {
        run_trial_ci(state, stage, rng)
    }
}

impl InterpretationEngine for ManyWorlds {
    fn kind(&self) -> EngineKind {
        EngineKind::ManyWorlds
    }

    fn run_trial(
        &self,
        state: &PathState,
        stage: &StageConfig,
        rng: &mut dyn RngCore,
    ) -> Result<ClickRecord> {
        run_trial_mwi(state, stage, rng)
    }
}

impl InterpretationEngine for BranchedSubspace {
    fn kind(&self) -> EngineKind {
        EngineKind::BranchedSubspace
    }

    fn run_trial(
        &self,
        state: &PathState,
        stage: &StageConfig,
        rng: &mut dyn RngCore,
    ) -> Result<ClickRecord> {
        run_trial_bhsi(state, stage, &self.params, rng)
    }
}

/// Engine chosen at run time.
#[derive(Debug, Clone, Copy)]
pub enum Engine {
    Copenhagen(Copenhagen),
    ManyWorlds(ManyWorlds),
    BranchedSubspace(BranchedSubspace),
}

impl Engine {
    pub fn new(kind: EngineKind, bhsi: Option<BhsiParams>) -> Result<Self> {
        match (kind, bhsi) {
            (EngineKind::Copenhagen, None) => Ok(Engine::Copenhagen(Copenhagen)),
            (EngineKind::ManyWorlds, None) => Ok(Engine::ManyWorlds(ManyWorlds)),
            (EngineKind::BranchedSubspace, Some(p)) => {
                Ok(Engine::BranchedSubspace(BranchedSubspace::new(p)?))
            }
            (EngineKind::BranchedSubspace, None) => {
                Err(Error::domain("the BHSI engine needs its parameters"))
            }
            (k, Some(_)) => Err(Error::domain(format!("{k} takes no BHSI parameters"))),
        }
    }

    fn inner(&self) -> &dyn InterpretationEngine {
        match self {
            Engine::Copenhagen(e) => e,
            Engine::ManyWorlds(e) => e,
            Engine::BranchedSubspace(e) => e,
        }
    }
}

impl InterpretationEngine for Engine {
    fn kind(&self) -> EngineKind {
        self.inner().kind()
    }

    fn run_trial(
        &self,
        state: &PathState,
        stage: &StageConfig,
        rng: &mut dyn RngCore,
    ) -> Result<ClickRecord> {
        self.inner().run_trial(state, stage, rng)
    }
}

/// How one trial resolves.
#[derive(Debug, Clone, Copy)]
struct TrialPlan {
    /// Branch the OD ends up registering.
    od_branch: Branch,
    /// Commit probability of TS_L, TS_R.
    ts_commit: [f64; 2],
    /// Stages 2–3: the un-engaged branch survives to the lower SGI.
    recohere: bool,
    erase_phase: bool,
}

impl TrialPlan {
    fn aligned(b: Branch) -> Self {
        let mut ts_commit = [0.0; 2];
        ts_commit[side(b)] = 1.0;
        TrialPlan {
            od_branch: b,
            ts_commit,
            recohere: false,
            erase_phase: false,
        }
    }
}

fn side(b: Branch) -> usize {
    match b {
        Branch::UpLeft => 0,
        Branch::DownRight => 1,
    }
}

fn weight(weights: (f64, f64), b: Branch) -> f64 {
    match b {
        Branch::UpLeft => weights.0,
        Branch::DownRight => weights.1,
    }
}

fn sample_branch(state: &PathState, rng: &mut dyn RngCore) -> Result<Branch> {
    let (up, _) = born_weights(state)?;
    Ok(if rng.random::<f64>() < up {
        Branch::UpLeft
    } else {
        Branch::DownRight
    })
}

fn realize(
    state: &PathState,
    stage: &StageConfig,
    plan: TrialPlan,
    rng: &mut dyn RngCore,
) -> Result<ClickRecord> {
    let weights = born_weights(state)?;
    let timings = &stage.timings;
    let mut clicks = Vec::with_capacity(3);

    if stage.ts_inserted {
        for (b, sensor) in [
            (Branch::UpLeft, Sensor::TsLeft),
            (Branch::DownRight, Sensor::TsRight),
        ] {
            let ev = sample_ts_event(weight(weights, b), timings, plan.ts_commit[side(b)], rng);
            if ev.fired {
                clicks.push(Click {
                    sensor,
                    time: ev.commit_time,
                });
            }
        }
    }

    let od_time = timings.od_click_time();
    let od = match stage.stage {
        Stage::One => match plan.od_branch {
            Branch::UpLeft => Sensor::OdLeft,
            Branch::DownRight => Sensor::OdRight,
        },
        Stage::Two | Stage::Three => {
            let merged = if !stage.ts_inserted {
                Some(merge(state)?)
            } else if plan.recohere {
                let mut s = state.tag_ts(plan.od_branch)?.recohere()?;
                if plan.erase_phase {
                    s = s.erase_em_phase();
                }
                Some(merge(&s)?)
            } else {
                None
            };
            let (theta, phi) = match merged {
                Some(q) => {
                    let theta = OdTheta::from_theta(q.theta(), AMPLITUDE_TOL);
                    let phi = match theta {
                        OdTheta::QuarterPi => phase_difference(q.phi(), stage.initial.phi()),
                        _ => 0.0,
                    };
                    (theta, phi)
                }
                None => {
                    let q = state
                        .tag_ts(plan.od_branch)?
                        .absorb(plan.od_branch.other())
                        .project(plan.od_branch)?;
                    (OdTheta::from_theta(q.theta(), AMPLITUDE_TOL), 0.0)
                }
            };
            Sensor::OdSpin {
                theta,
                phi: (stage.stage == Stage::Three).then_some(phi),
            }
        }
    };
    clicks.push(Click {
        sensor: od,
        time: od_time,
    });
    clicks.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut records = pair_clicks(&clicks, stage.stage, timings)?;
    if records.len() != 1 {
        return Err(Error::domain(format!(
            "trial clicks spread over {} pairing windows",
            records.len()
        )));
    }
    let mut record = records.pop().expect("one record");
    record.ts_inserted = stage.ts_inserted;
    Ok(record)
}

/// Instantaneous global collapse: pick a branch by Born weight; only that
/// path's sensors fire.
pub fn run_trial_ci(
    state: &PathState,
    stage: &StageConfig,
    rng: &mut dyn RngCore,
) -> Result<ClickRecord> {
    let b = sample_branch(state, rng)?;
    realize(state, stage, TrialPlan::aligned(b), rng)
}

/// Global branching into two worlds; the record is the one seen from "our"
/// world, entered with its Born weight.
pub fn run_trial_mwi(
    state: &PathState,
    stage: &StageConfig,
    rng: &mut dyn RngCore,
) -> Result<ClickRecord> {
    let (up, down) = born_weights(state)?;
    let worlds = [(Branch::DownRight, down), (Branch::UpLeft, up)];
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut ours = Branch::UpLeft;
    for (b, w) in worlds {
        acc += w;
        if u < acc {
            ours = b;
            break;
        }
    }
    realize(state, stage, TrialPlan::aligned(ours), rng)
}

/// Local branching with parametric anomalies.
pub fn run_trial_bhsi(
    state: &PathState,
    stage: &StageConfig,
    params: &BhsiParams,
    rng: &mut dyn RngCore,
) -> Result<ClickRecord> {
    params.validate()?;
    let weights = born_weights(state)?;
    let b = sample_branch(state, rng)?;
    let other_alive = weight(weights, b.other()) > 0.0;

    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let mut plan = TrialPlan::aligned(b);
    let cut_delayed = params.p_delayed;
    let cut_uncommitted = cut_delayed + params.p_uncommitted;
    let cut_double = cut_uncommitted + params.p_double_ts;
    if u < cut_delayed {
        if other_alive {
            plan.ts_commit[side(b)] = 0.0;
            plan.ts_commit[side(b.other())] = 1.0;
        }
    } else if u < cut_uncommitted {
        plan.ts_commit = [0.0, 0.0];
    } else if u < cut_double && other_alive {
        plan.ts_commit = [1.0, 1.0];
    }

    if stage.stage != Stage::One && v < params.p_recohere && other_alive {
        plan.recohere = true;
        plan.erase_phase = params.retrocausal_mode == RetrocausalMode::Erasure;
    }
    realize(state, stage, plan, rng)
}
