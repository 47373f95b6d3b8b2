//! Dual-sensing timing model: transparent sensors (TS) in front of opaque
//! detectors (OD), the click-pairing window, and the per-trial click record.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default separation factor for "T_w ≪ 1/f": `T_w ≤ (1/f) / 100`.
pub const DEFAULT_MUCH_LESS_FACTOR: f64 = 100.0;

/// Default TS→OD time of flight.
pub const DEFAULT_GAP_TRANSIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorTimings {
    /// OD reaction time, seconds.
    pub tau_od: f64,
    /// TS reaction time, seconds.
    pub tau_ts: f64,
    /// Click-pairing window T_w, seconds.
    pub t_window: f64,
    /// Trial repetition rate f, Hz.
    pub rep_rate: f64,
    /// Time of flight from the TS probe region to the OD surface, seconds.
    pub gap_transit: f64,
}

impl Default for SensorTimings {
    /// 1 ns OD, 10 ns TS, 60 ns window, 1 kHz repetition.
    fn default() -> Self {
        SensorTimings {
            tau_od: 1e-9,
            tau_ts: 10e-9,
            t_window: 60e-9,
            rep_rate: 1e3,
            gap_transit: DEFAULT_GAP_TRANSIT,
        }
    }
}

impl SensorTimings {
    pub fn check_fields(&self) -> Result<()> {
        let fields = [
            ("tau_od", self.tau_od),
            ("tau_ts", self.tau_ts),
            ("t_window", self.t_window),
            ("rep_rate", self.rep_rate),
            ("gap_transit", self.gap_transit),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Trial period 1/f.
    pub fn period(&self) -> f64 {
        1.0 / self.rep_rate
    }

    /// Latest OD click relative to the particle crossing the TS region.
    pub fn od_click_time(&self) -> f64 {
        self.gap_transit + self.tau_od
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingCheck {
    pub relation: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<TimingCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &TimingCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Check `τ_OD < τ_TS < T_w ≪ 1/f`.
pub fn validate_timing(t: &SensorTimings) -> Result<ValidationReport> {
    validate_timing_with(t, DEFAULT_MUCH_LESS_FACTOR)
}

/// As [`validate_timing`], with `≪` read as `T_w · factor ≤ 1/f`.
pub fn validate_timing_with(t: &SensorTimings, much_less_factor: f64) -> Result<ValidationReport> {
    t.check_fields()?;
    if !(much_less_factor.is_finite() && much_less_factor >= 1.0) {
        return Err(Error::domain(format!(
            "much-less factor must be ≥ 1, got {much_less_factor}"
        )));
    }
    let checks = vec![
        TimingCheck {
            relation: "tau_od < tau_ts",
            lhs: t.tau_od,
            rhs: t.tau_ts,
            pass: t.tau_od < t.tau_ts,
        },
        TimingCheck {
            relation: "tau_ts < t_window",
            lhs: t.tau_ts,
            rhs: t.t_window,
            pass: t.tau_ts < t.t_window,
        },
        TimingCheck {
            relation: "t_window << 1/rep_rate",
            lhs: t.t_window * much_less_factor,
            rhs: t.period(),
            pass: t.t_window * much_less_factor <= t.period(),
        },
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport { checks, pass })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsEvent {
    pub fired: bool,
    /// Seconds after the particle crosses the probe region.
    pub commit_time: f64,
}

/// Realize one transparent-sensor reading. A TS on a branch with zero weight
/// never fires; otherwise it commits with `commit_probability`. The commit
/// time is uniform on `[0, τ_TS]`. Always consumes two draws from `rng`.
pub fn sample_ts_event<R: Rng + ?Sized>(
    branch_weight: f64,
    timings: &SensorTimings,
    commit_probability: f64,
    rng: &mut R,
) -> TsEvent {
    debug_assert!((0.0..=1.0).contains(&branch_weight));
    debug_assert!((0.0..=1.0).contains(&commit_probability));
    let u: f64 = rng.random();
    let commit_time = rng.random::<f64>() * timings.tau_ts;
    TsEvent {
        fired: branch_weight > 0.0 && u < commit_probability,
        commit_time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stage {
    /// Single SGI with two dual sensors.
    One,
    /// Full-loop SGI with two TSs and one OD.
    Two,
    /// Two full-loop SGIs; EM phase from the neighbouring charge.
    Three,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::One, Stage::Two, Stage::Three];

    pub fn number(self) -> u8 {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
            Stage::Three => 3,
        }
    }
}

impl TryFrom<u8> for Stage {
    type Error = Error;

    fn try_from(n: u8) -> Result<Stage> {
        match n {
            1 => Ok(Stage::One),
            2 => Ok(Stage::Two),
            3 => Ok(Stage::Three),
            _ => Err(Error::domain(format!("stage must be 1, 2 or 3, got {n}"))),
        }
    }
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        s.number()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// The OD's spin reading in stages 2 and 3, discretized to the three values
/// the outcome taxonomy distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OdTheta {
    /// θ = 0, `|↑⟩`
    Zero,
    /// θ = π/4, a remerged superposition
    QuarterPi,
    /// θ = π/2, `|↓⟩`
    HalfPi,
}

impl OdTheta {
    pub const ALL: [OdTheta; 3] = [OdTheta::Zero, OdTheta::QuarterPi, OdTheta::HalfPi];

    pub fn radians(self) -> f64 {
        match self {
            OdTheta::Zero => 0.0,
            OdTheta::QuarterPi => FRAC_PI_4,
            OdTheta::HalfPi => FRAC_PI_2,
        }
    }

    /// Map a measured polar angle onto the reading set: the poles are basis
    /// states, anything strictly between is a superposition.
    pub fn from_theta(theta: f64, tol: f64) -> OdTheta {
        if theta <= tol {
            OdTheta::Zero
        } else if theta >= FRAC_PI_2 - tol {
            OdTheta::HalfPi
        } else {
            OdTheta::QuarterPi
        }
    }

    /// Exact match against 0, π/4, π/2 within `tol`; anything else is `None`.
    pub fn from_radians(theta: f64, tol: f64) -> Option<OdTheta> {
        OdTheta::ALL
            .into_iter()
            .find(|t| (t.radians() - theta).abs() <= tol)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OdTheta::Zero => "0",
            OdTheta::QuarterPi => "pi/4",
            OdTheta::HalfPi => "pi/2",
        }
    }

    pub fn parse_symbol(s: &str) -> Option<OdTheta> {
        match s.trim() {
            "0" => Some(OdTheta::Zero),
            "pi/4" | "π/4" => Some(OdTheta::QuarterPi),
            "pi/2" | "π/2" => Some(OdTheta::HalfPi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Sensor {
    TsLeft,
    TsRight,
    OdLeft,
    OdRight,
    /// Bottom OD of a full-loop SGI: spin reading plus relative phase
    /// (stage 3 only).
    OdSpin {
        theta: OdTheta,
        phi: Option<f64>,
    },
}

impl Sensor {
    fn is_od(&self) -> bool {
        !matches!(self, Sensor::TsLeft | Sensor::TsRight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Click {
    pub sensor: Sensor,
    /// Seconds from trial start.
    pub time: f64,
}

/// One trial's sensor readings: `[TS_L, TS_R; OD_L, OD_R]` in stage 1,
/// `[TS_L, TS_R; θ]` in stage 2, `[TS_L, TS_R; θ, φ]` in stage 3.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClickRecord {
    pub stage: Stage,
    /// False for the stage 2–3 control run with the mid-loop TSs removed.
    pub ts_inserted: bool,
    pub ts_left: bool,
    pub ts_right: bool,
    pub od_left: Option<bool>,
    pub od_right: Option<bool>,
    pub od_theta: Option<OdTheta>,
    pub od_phi: Option<f64>,
    pub clicks: Vec<Click>,
}

impl ClickRecord {
    fn empty(stage: Stage) -> Self {
        let stage1 = stage == Stage::One;
        ClickRecord {
            stage,
            ts_inserted: true,
            ts_left: false,
            ts_right: false,
            od_left: stage1.then_some(false),
            od_right: stage1.then_some(false),
            od_theta: None,
            od_phi: None,
            clicks: Vec::new(),
        }
    }

    pub fn stage1(ts_left: bool, ts_right: bool, od_left: bool, od_right: bool) -> Self {
        ClickRecord {
            ts_left,
            ts_right,
            od_left: Some(od_left),
            od_right: Some(od_right),
            ..ClickRecord::empty(Stage::One)
        }
    }

    pub fn stage2(ts_left: bool, ts_right: bool, theta: OdTheta) -> Self {
        ClickRecord {
            ts_left,
            ts_right,
            od_theta: Some(theta),
            ..ClickRecord::empty(Stage::Two)
        }
    }

    pub fn stage3(ts_left: bool, ts_right: bool, theta: OdTheta, phi: f64) -> Self {
        ClickRecord {
            ts_left,
            ts_right,
            od_theta: Some(theta),
            od_phi: Some(phi),
            ..ClickRecord::empty(Stage::Three)
        }
    }

    pub fn ts_count(&self) -> u8 {
        self.ts_left as u8 + self.ts_right as u8
    }

    /// Stage-1 OD click count; `None` in other stages.
    pub fn od_count(&self) -> Option<u8> {
        Some(self.od_left? as u8 + self.od_right? as u8)
    }

    fn add(&mut self, click: Click) -> Result<()> {
        match (self.stage, click.sensor) {
            (_, Sensor::TsLeft) => self.ts_left = true,
            (_, Sensor::TsRight) => self.ts_right = true,
            (Stage::One, Sensor::OdLeft) => self.od_left = Some(true),
            (Stage::One, Sensor::OdRight) => self.od_right = Some(true),
            (Stage::Two | Stage::Three, Sensor::OdSpin { theta, phi }) => {
                if self.od_theta.is_some() {
                    return Err(Error::domain("two bottom-OD clicks in one window"));
                }
                self.od_theta = Some(theta);
                self.od_phi = phi;
            }
            (stage, sensor) => {
                return Err(Error::domain(format!(
                    "sensor {sensor:?} does not exist in stage {stage}"
                )))
            }
        }
        self.clicks.push(click);
        Ok(())
    }

    /// Check the per-stage field layout.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::domain(format!(
                "malformed stage-{} record: {m}",
                self.stage
            )))
        };
        match self.stage {
            Stage::One => {
                if self.od_left.is_none() || self.od_right.is_none() {
                    return bad("missing OD_L/OD_R");
                }
                if self.od_theta.is_some() || self.od_phi.is_some() {
                    return bad("carries od_theta/od_phi");
                }
                if !self.ts_inserted {
                    return bad("stage 1 always has its TSs inserted");
                }
            }
            Stage::Two | Stage::Three => {
                if self.od_left.is_some() || self.od_right.is_some() {
                    return bad("carries OD_L/OD_R");
                }
                if self.od_theta.is_none() {
                    return bad("missing od_theta");
                }
                if self.stage == Stage::Two && self.od_phi.is_some() {
                    return bad("carries od_phi");
                }
                if self.stage == Stage::Three && !self.od_phi.is_some_and(f64::is_finite) {
                    return bad("missing od_phi");
                }
                if !self.ts_inserted && self.ts_count() != 0 {
                    return bad("TS click without inserted TSs");
                }
            }
        }
        if self.clicks.iter().any(|c| c.time.is_nan() || c.time < 0.0) {
            return bad("negative click timestamp");
        }
        Ok(())
    }
}

/// Group time-sorted clicks into trial records. A record opens at its first
/// click and collects every click within `T_w` of it; the first later click
/// opens the next record.
pub fn pair_clicks(
    events: &[Click],
    stage: Stage,
    timings: &SensorTimings,
) -> Result<Vec<ClickRecord>> {
    if events.is_empty() {
        return Err(Error::EmptyTrial);
    }
    if events
        .iter()
        .any(|c| !(c.time >= 0.0 && c.time.is_finite()))
    {
        return Err(Error::domain("click timestamps must be finite and ≥ 0"));
    }
    if events.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::domain("clicks must be sorted by timestamp"));
    }
    let mut records = Vec::new();
    let mut current = ClickRecord::empty(stage);
    let mut opened_at = events[0].time;
    for &click in events {
        if click.time - opened_at > timings.t_window {
            records.push(std::mem::replace(&mut current, ClickRecord::empty(stage)));
            opened_at = click.time;
        }
        current.add(click)?;
    }
    records.push(current);
    Ok(records)
}

/// Whether any OD fired in the record.
pub fn has_od_click(r: &ClickRecord) -> bool {
    r.clicks.iter().any(|c| c.sensor.is_od())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn timings(tau_od: f64, tau_ts: f64, t_window: f64, rep_rate: f64) -> SensorTimings {
        SensorTimings {
            tau_od,
            tau_ts,
            t_window,
            rep_rate,
            gap_transit: DEFAULT_GAP_TRANSIT,
        }
    }

    #[test]
    fn reference_timings_pass() {
        let r = validate_timing(&timings(1e-9, 10e-9, 60e-9, 1e3)).unwrap();
        assert!(r.pass);
        assert_eq!(r.checks.len(), 3);
        assert!(validate_timing(&SensorTimings::default()).unwrap().pass);
    }

    #[test]
    fn swapped_reaction_times_fail() {
        let r = validate_timing(&timings(10e-9, 1e-9, 60e-9, 1e3)).unwrap();
        assert!(!r.pass);
        let failed: Vec<_> = r.failures().map(|c| c.relation).collect();
        assert_eq!(failed, vec!["tau_od < tau_ts"]);
    }

    #[test]
    fn window_longer_than_period_fails() {
        // 1/f = 20 ns < 60 ns
        let r = validate_timing(&timings(1e-9, 10e-9, 60e-9, 50e6)).unwrap();
        assert!(!r.pass);
        let failed: Vec<_> = r.failures().map(|c| c.relation).collect();
        assert_eq!(failed, vec!["t_window << 1/rep_rate"]);
    }

    #[test]
    fn much_less_factor_boundary() {
        // 1/f = 6 μs = 100 · 60 ns exactly
        let t = timings(1e-9, 10e-9, 60e-9, 1.0 / 6e-6);
        assert!(validate_timing_with(&t, 99.0).unwrap().pass);
        assert!(!validate_timing_with(&t, 101.0).unwrap().pass);
    }

    #[test]
    fn non_positive_fields_are_domain_errors() {
        let t = SensorTimings {
            tau_od: 0.0,
            ..Default::default()
        };
        assert!(matches!(validate_timing(&t), Err(Error::Domain(_))));
        let t = SensorTimings {
            rep_rate: f64::NAN,
            ..Default::default()
        };
        assert!(matches!(validate_timing(&t), Err(Error::Domain(_))));
    }

    #[test]
    fn commit_probability_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = SensorTimings::default();
        for _ in 0..10_000 {
            assert!(sample_ts_event(0.5, &t, 1.0, &mut rng).fired);
            assert!(!sample_ts_event(0.5, &t, 0.0, &mut rng).fired);
        }
        assert!(!sample_ts_event(0.0, &t, 1.0, &mut rng).fired);
    }

    #[test]
    fn commit_rate_matches_binomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = SensorTimings::default();
        let n = 100_000;
        let fired = (0..n)
            .filter(|_| sample_ts_event(1.0, &t, 0.5, &mut rng).fired)
            .count();
        // 3σ = 3 · sqrt(0.25 / 1e5) ≈ 0.0047 ≤ 0.005
        let rate = fired as f64 / n as f64;
        assert!((rate - 0.5).abs() <= 0.005, "rate {rate}");
    }

    #[test]
    fn pair_single_window() {
        let t = SensorTimings::default();
        let events = [
            Click {
                sensor: Sensor::TsLeft,
                time: 5e-9,
            },
            Click {
                sensor: Sensor::OdLeft,
                time: 15e-9,
            },
        ];
        let recs = pair_clicks(&events, Stage::One, &t).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(
            recs[0],
            ClickRecord {
                clicks: events.to_vec(),
                ..ClickRecord::stage1(true, false, true, false)
            }
        );
    }

    #[test]
    fn pair_splits_beyond_window() {
        let t = SensorTimings::default();
        let events = [
            Click {
                sensor: Sensor::TsLeft,
                time: 5e-9,
            },
            Click {
                sensor: Sensor::OdRight,
                time: 70e-9,
            },
        ];
        let recs = pair_clicks(&events, Stage::One, &t).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0].ts_left && recs[0].od_count() == Some(0));
        assert!(!recs[1].ts_left && !recs[1].ts_right);
        assert_eq!(
            (recs[1].od_left, recs[1].od_right),
            (Some(false), Some(true))
        );
    }

    #[test]
    fn pair_empty_is_error() {
        assert_eq!(
            pair_clicks(&[], Stage::One, &SensorTimings::default()),
            Err(Error::EmptyTrial)
        );
    }

    #[test]
    fn pair_rejects_unsorted_and_foreign_sensors() {
        let t = SensorTimings::default();
        let unsorted = [
            Click {
                sensor: Sensor::OdLeft,
                time: 15e-9,
            },
            Click {
                sensor: Sensor::TsLeft,
                time: 5e-9,
            },
        ];
        assert!(pair_clicks(&unsorted, Stage::One, &t).is_err());
        let foreign = [Click {
            sensor: Sensor::OdLeft,
            time: 1e-9,
        }];
        assert!(pair_clicks(&foreign, Stage::Two, &t).is_err());
    }

    #[test]
    fn record_layout_validation() {
        assert!(ClickRecord::stage1(true, false, true, false)
            .validate()
            .is_ok());
        assert!(ClickRecord::stage2(true, false, OdTheta::Zero)
            .validate()
            .is_ok());
        assert!(ClickRecord::stage3(true, false, OdTheta::Zero, 0.0)
            .validate()
            .is_ok());
        let mut r = ClickRecord::stage2(true, false, OdTheta::Zero);
        r.od_phi = Some(0.1);
        assert!(r.validate().is_err());
        let mut r = ClickRecord::stage1(true, false, true, false);
        r.od_theta = Some(OdTheta::Zero);
        assert!(r.validate().is_err());
        let mut r = ClickRecord::stage2(true, false, OdTheta::Zero);
        r.od_theta = None;
        assert!(r.validate().is_err());
    }

    #[test]
    fn od_theta_discretization() {
        assert_eq!(OdTheta::from_theta(0.0, 1e-12), OdTheta::Zero);
        assert_eq!(OdTheta::from_theta(0.3, 1e-12), OdTheta::QuarterPi);
        assert_eq!(OdTheta::from_theta(FRAC_PI_2, 1e-12), OdTheta::HalfPi);
        assert_eq!(
            OdTheta::from_radians(FRAC_PI_4, 1e-9),
            Some(OdTheta::QuarterPi)
        );
        assert_eq!(OdTheta::from_radians(0.3, 1e-9), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn timing_strategy() -> impl Strategy<Value = SensorTimings> {
            (1e-10f64..1e-7, 1e-10f64..1e-7, 1e-9f64..1e-6, 1.0f64..1e8).prop_map(
                |(tau_od, tau_ts, t_window, rep_rate)| SensorTimings {
                    tau_od,
                    tau_ts,
                    t_window,
                    rep_rate,
                    gap_transit: DEFAULT_GAP_TRANSIT,
                },
            )
        }

        proptest! {
            #[test]
            fn validation_is_monotone(t in timing_strategy(), shrink in 0.01f64..1.0, slow in 1.0f64..100.0) {
                if validate_timing(&t).unwrap().pass {
                    let faster_od = SensorTimings { tau_od: t.tau_od * shrink, ..t };
                    prop_assert!(validate_timing(&faster_od).unwrap().pass);
                    let longer_period = SensorTimings { rep_rate: t.rep_rate / slow, ..t };
                    prop_assert!(validate_timing(&longer_period).unwrap().pass);
                }
            }

            #[test]
            fn commit_time_within_reaction_time(seed in any::<u64>(), p in 0.0f64..=1.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = SensorTimings::default();
                for _ in 0..32 {
                    let e = sample_ts_event(1.0, &t, p, &mut rng);
                    prop_assert!((0.0..=t.tau_ts).contains(&e.commit_time));
                }
            }

            #[test]
            fn pairing_is_deterministic(mut times in proptest::collection::vec(0.0f64..3e-7, 1..12)) {
                times.sort_by(f64::total_cmp);
                let events: Vec<_> = times
                    .iter()
                    .enumerate()
                    .map(|(i, &time)| Click {
                        sensor: if i % 2 == 0 { Sensor::TsLeft } else { Sensor::OdRight },
                        time,
                    })
                    .collect();
                let t = SensorTimings::default();
                let a = pair_clicks(&events, Stage::One, &t);
                let b = pair_clicks(&events, Stage::One, &t);
                prop_assert_eq!(&a, &b);
                if let Ok(recs) = a {
                    for r in recs {
                        let first = r.clicks[0].time;
                        prop_assert!(r.clicks.iter().all(|c| c.time - first <= t.t_window));
                    }
                }
            }
        }
    }
}
