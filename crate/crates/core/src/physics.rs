//! Feasibility numbers: acceleration-time mass scaling and the
//! electromagnetic phase difference between the two branches of a full-loop
//! SGI sitting next to a second charged particle.
//!
//! The phase formula is evaluated exactly as `q₁q₂τΔx / (ħ d²)` (or with the
//! `d² − Δx²/4` denominator), with no Coulomb constant. That reproduces the
//! 0.2 / 0.1 / 0.02 rad estimates for the reference geometry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.0545718e-34;
/// Electron mass, kg.
pub const ELECTRON_MASS: f64 = 9.1093837e-31;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    /// Charge of the interfering particle, C.
    pub q1: f64,
    /// Charge of the neighbouring particle, C.
    pub q2: f64,
    /// Separation between the two SGIs, m.
    pub d: f64,
    /// Branch separation Δx, m.
    pub delta_x: f64,
    /// Interaction time τ, s.
    pub tau: f64,
    /// Particle mass, kg.
    pub m: f64,
    /// Magnetic field gradient, T/m.
    pub grad_b: f64,
    /// Reference acceleration time, s.
    pub dt_ref: f64,
    /// Mass at which `dt_ref` was obtained, kg.
    pub m_ref: f64,
}

impl Default for PhysicsParams {
    /// Two `-3e` particles 100 μm apart, Δx = 10 μm, τ = 100 ms; electron
    /// mass scaled from the 0.1 s / 1e-14 kg reference at 1e6 T/m.
    fn default() -> Self {
        PhysicsParams {
            q1: -3.0 * ELEMENTARY_CHARGE,
            q2: -3.0 * ELEMENTARY_CHARGE,
            d: 100e-6,
            delta_x: 10e-6,
            tau: 100e-3,
            m: ELECTRON_MASS,
            grad_b: 1e6,
            dt_ref: 0.1,
            m_ref: 1e-14,
        }
    }
}

impl PhysicsParams {
    /// Electron next to a `-5e` heavy ion.
    pub fn electron_ion() -> Self {
        PhysicsParams {
            q1: -ELEMENTARY_CHARGE,
            q2: -5.0 * ELEMENTARY_CHARGE,
            ..Default::default()
        }
    }

    /// Electrons in both interferometers.
    pub fn electron_pair() -> Self {
        PhysicsParams {
            q1: -ELEMENTARY_CHARGE,
            q2: -ELEMENTARY_CHARGE,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q1", self.q1),
            ("q2", self.q2),
            ("d", self.d),
            ("delta_x", self.delta_x),
            ("tau", self.tau),
            ("m", self.m),
            ("grad_b", self.grad_b),
            ("dt_ref", self.dt_ref),
            ("m_ref", self.m_ref),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} = {v} is not finite")));
            }
        }
        if self.delta_x < 0.0 {
            return Err(Error::domain(format!("delta_x = {} < 0", self.delta_x)));
        }
        if self.d <= self.delta_x / 2.0 {
            return Err(Error::domain(format!(
                "d = {} must exceed delta_x/2 = {}",
                self.d,
                self.delta_x / 2.0
            )));
        }
        for (name, v) in [
            ("tau", self.tau),
            ("m", self.m),
            ("grad_b", self.grad_b),
            ("dt_ref", self.dt_ref),
            ("m_ref", self.m_ref),
        ] {
            if v <= 0.0 {
                return Err(Error::domain(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn get(&self, field: PhysicsField) -> f64 {
        match field {
            PhysicsField::Q1 => self.q1,
            PhysicsField::Q2 => self.q2,
            PhysicsField::D => self.d,
            PhysicsField::DeltaX => self.delta_x,
            PhysicsField::Tau => self.tau,
            PhysicsField::M => self.m,
            PhysicsField::GradB => self.grad_b,
            PhysicsField::DtRef => self.dt_ref,
            PhysicsField::MRef => self.m_ref,
        }
    }

    pub fn with(mut self, field: PhysicsField, value: f64) -> Self {
        let slot = match field {
            PhysicsField::Q1 => &mut self.q1,
            PhysicsField::Q2 => &mut self.q2,
            PhysicsField::D => &mut self.d,
            PhysicsField::DeltaX => &mut self.delta_x,
            PhysicsField::Tau => &mut self.tau,
            PhysicsField::M => &mut self.m,
            PhysicsField::GradB => &mut self.grad_b,
            PhysicsField::DtRef => &mut self.dt_ref,
            PhysicsField::MRef => &mut self.m_ref,
        };
        *slot = value;
        self
    }
}

/// `Δt = dt_ref · sqrt(m / m_ref)`, from `Δx ≈ (F/m) Δt² / 2` at fixed
/// Δx and gradient force.
pub fn acceleration_time(m: f64, dt_ref: f64, m_ref: f64) -> Result<f64> {
    for (name, v) in [("m", m), ("dt_ref", dt_ref), ("m_ref", m_ref)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("{name} = {v} must be positive")));
        }
    }
    Ok(dt_ref * (m / m_ref).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    /// `q₁q₂τΔx / (ħ d²)`
    #[default]
    Verbatim,
    /// `q₁q₂τΔx / (ħ [d² − Δx²/4])`
    ExactDenominator,
}

impl FromStr for PhaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(PhaseMode::Verbatim),
            "exact-denominator" | "exact" => Ok(PhaseMode::ExactDenominator),
            _ => Err(Error::domain(format!(
                "unknown phase mode `{s}` (verbatim | exact-denominator)"
            ))),
        }
    }
}

impl fmt::Display for PhaseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseMode::Verbatim => "verbatim",
            PhaseMode::ExactDenominator => "exact-denominator",
        })
    }
}

/// Relative EM phase ΔΦ picked up by the `|↓, R⟩` branch, radians.
pub fn em_phase_shift(p: &PhysicsParams, mode: PhaseMode) -> Result<f64> {
    p.validate()?;
    let denom = match mode {
        PhaseMode::Verbatim => p.d * p.d,
        PhaseMode::ExactDenominator => p.d * p.d - p.delta_x * p.delta_x / 4.0,
    };
    Ok(p.q1 * p.q2 * p.tau * p.delta_x / (HBAR * denom))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicsField {
    Q1,
    Q2,
    D,
    DeltaX,
    Tau,
    M,
    GradB,
    DtRef,
    MRef,
}

impl PhysicsField {
    pub const ALL: [PhysicsField; 9] = [
        PhysicsField::Q1,
        PhysicsField::Q2,
        PhysicsField::D,
        PhysicsField::DeltaX,
        PhysicsField::Tau,
        PhysicsField::M,
        PhysicsField::GradB,
        PhysicsField::DtRef,
        PhysicsField::MRef,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhysicsField::Q1 => "q1",
            PhysicsField::Q2 => "q2",
            PhysicsField::D => "d",
            PhysicsField::DeltaX => "delta_x",
            PhysicsField::Tau => "tau",
            PhysicsField::M => "m",
            PhysicsField::GradB => "grad_b",
            PhysicsField::DtRef => "dt_ref",
            PhysicsField::MRef => "m_ref",
        }
    }

    pub fn dimension(self) -> crate::units::Dimension {
        use crate::units::Dimension;
        match self {
            PhysicsField::Q1 | PhysicsField::Q2 => Dimension::Charge,
            PhysicsField::D | PhysicsField::DeltaX => Dimension::Length,
            PhysicsField::Tau | PhysicsField::DtRef => Dimension::Time,
            PhysicsField::M | PhysicsField::MRef => Dimension::Mass,
            PhysicsField::GradB => Dimension::FieldGradient,
        }
    }

    /// Mass-scaling fields produce an acceleration time, the rest a phase.
    pub fn output(self) -> SweepOutput {
        match self {
            PhysicsField::M | PhysicsField::DtRef | PhysicsField::MRef => {
                SweepOutput::AccelerationTime
            }
            _ => SweepOutput::EmPhase,
        }
    }
}

impl FromStr for PhysicsField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        PhysicsField::ALL
            .into_iter()
            .find(|f| f.name() == s || (s == "dx" && *f == PhysicsField::DeltaX))
            .ok_or_else(|| Error::domain(format!("unknown physics field `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutput {
    EmPhase,
    AccelerationTime,
}

impl SweepOutput {
    pub fn unit(self) -> &'static str {
        match self {
            SweepOutput::EmPhase => "rad",
            SweepOutput::AccelerationTime => "s",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// `Ok(ΔΦ or Δt)`, or the reason the row's parameters are invalid.
    pub result: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub field: PhysicsField,
    pub output: SweepOutput,
    pub mode: PhaseMode,
    pub rows: Vec<SweepRow>,
}

/// Vary one field over `values`, holding the rest of `p` fixed. Rows keep
/// input order; invalid rows are kept and marked.
pub fn sweep(
    p: &PhysicsParams,
    field: PhysicsField,
    values: &[f64],
    mode: PhaseMode,
) -> SweepTable {
    let output = field.output();
    let rows = values
        .iter()
        .map(|&value| {
            let q = p.with(field, value);
            let result = match output {
                SweepOutput::EmPhase => em_phase_shift(&q, mode),
                SweepOutput::AccelerationTime => q
                    .validate()
                    .and_then(|_| acceleration_time(q.m, q.dt_ref, q.m_ref)),
            };
            SweepRow {
                value,
                result: result.map_err(|e| e.to_string()),
            }
        })
        .collect();
    SweepTable {
        field,
        output,
        mode,
        rows,
    }
}
