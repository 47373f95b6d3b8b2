//! Seeded trial batches: split, engine, classify, aggregate.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::engines::{Engine, InterpretationEngine};
use crate::error::{Error, Result};
use crate::report::{BornSummary, PhaseSummary, RunReport, REPORT_SCHEMA};
use crate::sensor::{ClickRecord, OdTheta, Stage};
use crate::stages::{classify, enumerate_taxonomy, OutcomeClass, OutcomeLabel, StageConfig};
use crate::state::{apply_em_phase, split, PathState};
use crate::stats::{born_rule_test, wilson_interval, z_for_confidence, AuditReport, Histogram};

/// Random stream for one trial: a ChaCha8 key fixed by the master seed and
/// the trial index as the stream number.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Partial aggregate over a set of trials. Merging is commutative and
/// associative, so any split of the trial range gives the same total.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub labels: Histogram,
    pub tuples: Histogram,
    pub audit: AuditReport,
    /// Stage 1: OD_L clicks; stages 2–3: θ = 0 readings.
    pub born_left: u64,
    /// Stage 1: OD_R clicks; stages 2–3: θ = π/2 readings.
    pub born_right: u64,
    /// Extremes of od_phi over θ = π/4 readings, stage 3.
    pub phi_range: Option<(f64, f64)>,
    pub phi_count: u64,
}

impl Tally {
    pub fn new(stage: Stage, ts_inserted: bool) -> Self {
        let rows = enumerate_taxonomy(stage);
        let mut labels: Histogram = rows.iter().map(|r| (r.class.label.name(), 0)).collect();
        let mut tuples = Histogram::new();
        if ts_inserted {
            tuples = rows.iter().map(|r| (r.class.tuple.clone(), 0)).collect();
        } else {
            labels = Histogram::with_buckets([OutcomeLabel::Control.name()]);
        }
        Tally {
            labels,
            tuples,
            audit: AuditReport::new(),
            born_left: 0,
            born_right: 0,
            phi_range: None,
            phi_count: 0,
        }
    }

    pub fn observe(&mut self, r: &ClickRecord, class: &OutcomeClass) -> Result<()> {
        self.labels.add(class.label.name(), 1);
        self.tuples.add(&class.tuple, 1);
        self.audit.observe(r)?;
        match r.stage {
            Stage::One => match (r.od_left, r.od_right) {
                (Some(true), Some(false)) => self.born_left += 1,
                (Some(false), Some(true)) => self.born_right += 1,
                _ => {}
            },
            Stage::Two | Stage::Three => match r.od_theta {
                Some(OdTheta::Zero) => self.born_left += 1,
                Some(OdTheta::HalfPi) => self.born_right += 1,
                Some(OdTheta::QuarterPi) => {
                    if let Some(phi) = r.od_phi {
                        self.phi_count += 1;
                        self.phi_range = Some(match self.phi_range {
                            None => (phi, phi),
                            Some((lo, hi)) => (lo.min(phi), hi.max(phi)),
                        });
                    }
                }
                None => {}
            },
        }
        Ok(())
    }

    pub fn merge(self, other: Tally) -> Result<Tally> {
        Ok(Tally {
            labels: self.labels.merge(&other.labels),
            tuples: self.tuples.merge(&other.tuples),
            audit: self.audit.merge(other.audit)?,
            born_left: self.born_left + other.born_left,
            born_right: self.born_right + other.born_right,
            phi_range: match (self.phi_range, other.phi_range) {
                (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
                (x, y) => x.or(y),
            },
            phi_count: self.phi_count + other.phi_count,
        })
    }
}

/// A prepared experiment: the engine, stage config and the post-SGI state
/// shared by every trial.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub stage: StageConfig,
    pub engine: Engine,
    pub state: PathState,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let stage = config.stage_config();
        let engine = Engine::new(config.engine, config.bhsi)?;
        let mut state = split(&config.initial);
        if let Some(dphi) = stage.delta_phi() {
            state = apply_em_phase(&state, dphi)?;
        }
        Ok(Experiment {
            config: config.clone(),
            stage,
            engine,
            state,
        })
    }

    pub fn trial(&self, index: u64) -> Result<(ClickRecord, OutcomeClass)> {
        let mut rng = trial_rng(self.config.seed, index);
        let record = self.engine.run_trial(&self.state, &self.stage, &mut rng)?;
        let class = classify(&record, &self.stage)?;
        Ok((record, class))
    }

    /// Tally trials `range` on the current rayon pool.
    pub fn tally(&self, range: std::ops::Range<u64>) -> Result<Tally> {
        let fresh = || Tally::new(self.stage.stage, self.stage.ts_inserted);
        range
            .into_par_iter()
            .try_fold(fresh, |mut acc, i| {
                let (r, c) = self.trial(i)?;
                acc.observe(&r, &c)?;
                Ok::<_, Error>(acc)
            })
            .try_reduce(fresh, Tally::merge)
    }
}

/// Run `config.trials` trials on `workers` threads (0 = rayon default).
pub fn run(config: &ExperimentConfig, workers: usize) -> Result<RunReport> {
    let exp = Experiment::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(format!("cannot start worker pool: {e}")))?;
    let tally = pool.install(|| exp.tally(0..config.trials))?;
    build_report(&exp, tally)
}

fn build_report(exp: &Experiment, t: Tally) -> Result<RunReport> {
    let cfg = &exp.config;
    let z = z_for_confidence(cfg.stats.confidence)?;
    let born_test = if t.born_left + t.born_right > 0 {
        let theta = cfg.initial.theta();
        let chi = born_rule_test(t.born_left, t.born_right, theta)?;
        Some(BornSummary {
            theta,
            left: t.born_left,
            right: t.born_right,
            chi2: chi.chi2,
            dof: chi.dof,
            p_value: chi.p_value,
            significant: chi.p_value < cfg.stats.significance,
        })
    } else {
        None
    };
    let mut anomaly_rates = BTreeMap::new();
    for (label, hits) in t.labels.iter() {
        if label != OutcomeLabel::Normal.name() && label != OutcomeLabel::Control.name() {
            anomaly_rates.insert(label.to_string(), wilson_interval(hits, cfg.trials, z)?);
        }
    }
    let phase = exp.stage.delta_phi().map(|expected| PhaseSummary {
        expected,
        tolerance: exp.stage.phase_tolerance().unwrap_or(0.0),
        readings: t.phi_count,
        min: t.phi_range.map(|r| r.0),
        max: t.phi_range.map(|r| r.1),
    });
    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        seed: cfg.seed,
        config_digest: cfg.digest(),
        stage: cfg.stage,
        engine: cfg.engine,
        trial_count: cfg.trials,
        confidence: cfg.stats.confidence,
        histogram: t.labels,
        outcomes: t.tuples,
        born_test,
        anomaly_rates,
        audit: t.audit,
        phase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::{BhsiParams, EngineKind};
    use crate::state::prepare_qubit;
    use rand::Rng;
    use std::f64::consts::FRAC_PI_4;

    fn cfg(stage: Stage, engine: EngineKind, trials: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            stage,
            engine,
            prepare_qubit(FRAC_PI_4, 0.0).unwrap(),
            trials,
            11,
        )
    }

    #[test]
    fn streams_differ_per_trial_and_repeat() {
        let a: u64 = trial_rng(1, 0).random();
        let b: u64 = trial_rng(1, 1).random();
        let c: u64 = trial_rng(2, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, trial_rng(1, 0).random::<u64>());
    }

    #[test]
    fn counts_add_up() {
        let r = run(&cfg(Stage::One, EngineKind::Copenhagen, 2000), 2).unwrap();
        assert_eq!(r.histogram.total(), 2000);
        assert_eq!(r.outcomes.total(), 2000);
        assert_eq!(r.histogram.get("normal"), 2000);
        assert_eq!(r.outcomes.buckets().count(), 16);
        let b = r.born_test.unwrap();
        assert_eq!(b.left + b.right, 2000);
        assert!(r.audit.pass);
    }

    #[test]
    fn tally_split_is_irrelevant() {
        let mut c = cfg(Stage::Three, EngineKind::BranchedSubspace, 0);
        c.bhsi = Some(BhsiParams {
            p_delayed: 0.1,
            p_uncommitted: 0.1,
            p_double_ts: 0.1,
            p_recohere: 0.3,
            ..Default::default()
        });
        c.trials = 1;
        let exp = Experiment::new(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let whole = pool.install(|| exp.tally(0..500)).unwrap();
        let parts = exp
            .tally(300..500)
            .unwrap()
            .merge(exp.tally(0..300).unwrap())
            .unwrap();
        assert_eq!(whole, parts);
    }

    #[test]
    fn control_run_labels() {
        let mut c = cfg(Stage::Two, EngineKind::ManyWorlds, 300);
        c.ts_inserted = false;
        let r = run(&c, 1).unwrap();
        assert_eq!(r.histogram.get("control"), 300);
        assert!(r.born_test.is_none());
        assert_eq!(r.outcomes.get("[no-ts;pi/4]"), 300);
    }

    #[test]
    fn invalid_config_is_refused() {
        let mut c = cfg(Stage::One, EngineKind::Copenhagen, 10);
        c.trials = 0;
        assert!(run(&c, 1).is_err());
    }
}
