use clap::Args;
use sgi_core::physics::{acceleration_time, em_phase_shift, sweep, PhysicsField, SweepTable};
use sgi_core::report::sweep_csv;
use sgi_core::sensor::{validate_timing_with, ValidationReport, DEFAULT_MUCH_LESS_FACTOR};
use sgi_core::units::{parse_quantity, Dimension};
use sgi_core::{PhaseMode, PhysicsParams, SensorTimings};

use crate::Failure;

#[derive(Args)]
pub struct FeasibilityArgs {
    /// Charge of the interfering particle, e.g. `-3e`
    #[arg(long, allow_hyphen_values = true)]
    q1: Option<String>,
    /// Charge of the neighbouring particle
    #[arg(long, allow_hyphen_values = true)]
    q2: Option<String>,
    /// Separation of the two interferometers, e.g. `100um`
    #[arg(long)]
    d: Option<String>,
    /// Branch separation
    #[arg(long)]
    delta_x: Option<String>,
    /// Interaction time
    #[arg(long)]
    tau: Option<String>,
    /// Particle mass, e.g. `1me` or `1e-14kg`
    #[arg(long)]
    m: Option<String>,
    /// Field gradient in T/m
    #[arg(long)]
    grad_b: Option<String>,
    /// Reference acceleration time
    #[arg(long)]
    dt_ref: Option<String>,
    /// Mass the reference time belongs to
    #[arg(long)]
    m_ref: Option<String>,
    #[arg(long)]
    tau_od: Option<String>,
    #[arg(long)]
    tau_ts: Option<String>,
    #[arg(long)]
    t_window: Option<String>,
    #[arg(long)]
    rep_rate: Option<String>,
    #[arg(long)]
    gap_transit: Option<String>,
    /// Factor that `<<` stands for in the window-vs-period check
    #[arg(long, default_value_t = DEFAULT_MUCH_LESS_FACTOR)]
    much_less: f64,
    /// Sweep one field: `field=v1,v2,...`
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,
    /// Phase formula for presets and sweeps
    #[arg(long, default_value = "verbatim")]
    mode: String,
    /// Machine-readable output
    #[arg(long)]
    csv: bool,
}

type Preset = (&'static str, fn() -> PhysicsParams);

const PRESETS: [Preset; 3] = [
    ("default", PhysicsParams::default),
    ("electron-ion", PhysicsParams::electron_ion),
    ("electron-pair", PhysicsParams::electron_pair),
];

fn quantity(arg: &Option<String>, dim: Dimension, default: f64) -> Result<f64, Failure> {
    match arg {
        Some(s) => Ok(parse_quantity(s, dim)?),
        None => Ok(default),
    }
}

impl FeasibilityArgs {
    fn physics(&self) -> Result<PhysicsParams, Failure> {
        let mut p = PhysicsParams::default();
        let given = [
            (PhysicsField::Q1, &self.q1),
            (PhysicsField::Q2, &self.q2),
            (PhysicsField::D, &self.d),
            (PhysicsField::DeltaX, &self.delta_x),
            (PhysicsField::Tau, &self.tau),
            (PhysicsField::M, &self.m),
            (PhysicsField::GradB, &self.grad_b),
            (PhysicsField::DtRef, &self.dt_ref),
            (PhysicsField::MRef, &self.m_ref),
        ];
        for (f, arg) in given {
            let v = quantity(arg, f.dimension(), p.get(f))?;
            p = p.with(f, v);
        }
        Ok(p)
    }

    fn timings(&self) -> Result<SensorTimings, Failure> {
        let d = SensorTimings::default();
        Ok(SensorTimings {
            tau_od: quantity(&self.tau_od, Dimension::Time, d.tau_od)?,
            tau_ts: quantity(&self.tau_ts, Dimension::Time, d.tau_ts)?,
            t_window: quantity(&self.t_window, Dimension::Time, d.t_window)?,
            rep_rate: quantity(&self.rep_rate, Dimension::Frequency, d.rep_rate)?,
            gap_transit: quantity(&self.gap_transit, Dimension::Time, d.gap_transit)?,
        })
    }
}

fn parse_sweep(text: &str) -> Result<(PhysicsField, Vec<f64>), Failure> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("--sweep expects field=v1,v2,..., got `{text}`")))?;
    let field: PhysicsField = name.parse()?;
    let values = values
        .split(',')
        .map(|v| parse_quantity(v, field.dimension()))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(Failure::Usage("--sweep needs at least one value".into()));
    }
    Ok((field, values))
}

pub fn run(a: FeasibilityArgs) -> Result<(), Failure> {
    let mode: PhaseMode = a.mode.parse()?;
    let p = a.physics()?;
    if let Some(text) = &a.sweep {
        let (field, values) = parse_sweep(text)?;
        let table = sweep(&p, field, &values, mode);
        if a.csv {
            print!("{}", sweep_csv(&table));
        } else {
            print_sweep(&table);
        }
        return Ok(());
    }

    let timings = a.timings()?;
    let dt = acceleration_time(p.m, p.dt_ref, p.m_ref)?;
    let verbatim = em_phase_shift(&p, PhaseMode::Verbatim)?;
    let exact = em_phase_shift(&p, PhaseMode::ExactDenominator)?;
    let mut presets = Vec::new();
    for (name, make) in PRESETS {
        let q = make();
        let with_charges = PhysicsParams {
            q1: q.q1,
            q2: q.q2,
            ..p
        };
        presets.push((name, with_charges, em_phase_shift(&with_charges, mode)?));
    }
    let check = validate_timing_with(&timings, a.much_less)?;

    if a.csv {
        println!("quantity,value,unit");
        println!("acceleration_time,{dt:?},s");
        println!("em_phase_verbatim,{verbatim:?},rad");
        println!("em_phase_exact_denominator,{exact:?},rad");
        for (name, _, phi) in &presets {
            println!("em_phase_{name},{phi:?},rad");
        }
        for c in &check.checks {
            println!("timing[{}],{},", c.relation, verdict(c.pass));
        }
        println!("timing_verdict,{},", verdict(check.pass));
    } else {
        print_table(&p, dt, verbatim, exact, mode, &presets, &check);
    }
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn charge(q: f64) -> String {
    format!("{:.6}e", q / sgi_core::physics::ELEMENTARY_CHARGE).replace(".000000", "")
}

fn print_table(
    p: &PhysicsParams,
    dt: f64,
    verbatim: f64,
    exact: f64,
    mode: PhaseMode,
    presets: &[(&str, PhysicsParams, f64)],
    check: &ValidationReport,
) {
    println!("acceleration time");
    println!(
        "  dt = {dt:.3e} s ({:.2} ns)  for m = {:.4e} kg, {} s at {:e} kg",
        dt * 1e9,
        p.m,
        p.dt_ref,
        p.m_ref
    );
    println!(
        "EM phase shift (q1 = {}, q2 = {})",
        charge(p.q1),
        charge(p.q2)
    );
    println!("  verbatim            {verbatim:.4} rad");
    println!("  exact-denominator   {exact:.4} rad");
    println!("charge presets ({mode})");
    for (name, q, phi) in presets {
        println!(
            "  {name:<14} q1 = {:<5} q2 = {:<5} {phi:.4} rad",
            charge(q.q1),
            charge(q.q2)
        );
    }
    println!("sensor timing");
    for c in &check.checks {
        println!(
            "  {:<24} {:>10.3e} vs {:<10.3e} {}",
            c.relation,
            c.lhs,
            c.rhs,
            verdict(c.pass)
        );
    }
    println!("  verdict: {}", verdict(check.pass));
}

fn print_sweep(t: &SweepTable) {
    let unit = t.output.unit();
    println!("{:<14} {:<14}", t.field.name(), format!("result ({unit})"));
    for row in &t.rows {
        match &row.result {
            Ok(v) => println!("{:<14e} {v:.6e}", row.value),
            Err(e) => println!("{:<14e} invalid: {e}", row.value),
        }
    }
}
