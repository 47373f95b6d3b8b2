//! Two-level spin states and their spin-path entangled form.
//!
//! A [`SpinQubit`] is the pure state `cos θ |↑⟩ + e^{iφ} sin θ |↓⟩` with
//! `θ ∈ [0, π/2]` and `φ ∈ [0, 2π)`. Passing it through the upper half of a
//! Stern-Gerlach interferometer ([`split`]) entangles spin with path and
//! yields a [`PathState`] with one amplitude on `|↑, L⟩` and one on `|↓, R⟩`.
//! The lower half ([`merge`]) undoes the split, carrying along any relative
//! phase the right branch picked up on the way ([`apply_em_phase`]).

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for algebraic identities on amplitudes and angles.
pub const AMPLITUDE_TOL: f64 = 1e-12;

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_phase(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed circular difference `a - b`, in `(-π, π]`.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Circular distance between two angles, in `[0, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    phase_difference(a, b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinQubit {
    theta: f64,
    phi: f64,
}

impl SpinQubit {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `(cos θ, e^{iφ} sin θ)`.
    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.theta.cos(), 0.0),
            Complex64::from_polar(self.theta.sin(), self.phi),
        )
    }

    /// Pure `|↑⟩`.
    pub fn up() -> Self {
        SpinQubit {
            theta: 0.0,
            phi: 0.0,
        }
    }

    /// Pure `|↓⟩`.
    pub fn down() -> Self {
        SpinQubit {
            theta: FRAC_PI_2,
            phi: 0.0,
        }
    }

    /// True when both angles agree within `tol`, phase compared modulo 2π.
    pub fn approx_eq(&self, other: &SpinQubit, tol: f64) -> bool {
        (self.theta - other.theta).abs() <= tol && phase_distance(self.phi, other.phi) <= tol
    }
}

impl fmt::Display for SpinQubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(θ={}, φ={})", self.theta, self.phi)
    }
}

/// Build the qubit `cos θ |↑⟩ + e^{iφ} sin θ |↓⟩`.
pub fn prepare_qubit(theta: f64, phi: f64) -> Result<SpinQubit> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::domain(format!(
            "qubit angles must be finite, got θ={theta}, φ={phi}"
        )));
    }
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::domain(format!("θ={theta} outside [0, π/2]")));
    }
    if !(0.0..TAU).contains(&phi) {
        return Err(Error::domain(format!("φ={phi} outside [0, 2π)")));
    }
    Ok(SpinQubit { theta, phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `|↑, L⟩`
    UpLeft,
    /// `|↓, R⟩`
    DownRight,
}

impl Branch {
    pub fn other(self) -> Branch {
        match self {
            Branch::UpLeft => Branch::DownRight,
            Branch::DownRight => Branch::UpLeft,
        }
    }

    fn index(self) -> usize {
        match self {
            Branch::UpLeft => 0,
            Branch::DownRight => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchStatus {
    Coherent,
    TsTagged,
    EnvironmentAbsorbed,
    Recohered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    amp_up_left: Complex64,
    amp_down_right: Complex64,
    em_phase: f64,
    /// Common phase of both branches; unobservable and never compared.
    global_phase: f64,
    status: [BranchStatus; 2],
}

impl PathState {
    pub fn amp_up_left(&self) -> Complex64 {
        self.amp_up_left
    }

    pub fn amp_down_right(&self) -> Complex64 {
        self.amp_down_right
    }

    /// Accumulated relative phase on the `|↓, R⟩` branch.
    pub fn em_phase(&self) -> f64 {
        self.em_phase
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn status(&self, branch: Branch) -> BranchStatus {
        self.status[branch.index()]
    }

    pub fn amplitude(&self, branch: Branch) -> Complex64 {
        match branch {
            Branch::UpLeft => self.amp_up_left,
            Branch::DownRight => self.amp_down_right,
        }
    }

    /// Branches flagged environment-absorbed keep their amplitude but no
    /// longer interfere.
    pub fn interferes(&self, branch: Branch) -> bool {
        self.status(branch) != BranchStatus::EnvironmentAbsorbed
    }

    fn any_absorbed(&self) -> bool {
        self.status.contains(&BranchStatus::EnvironmentAbsorbed)
    }

    pub fn with_global_phase(mut self, phase: f64) -> Self {
        self.global_phase = wrap_phase(phase);
        self
    }

    /// Mark a branch as having passed a transparent sensor that recorded it.
    pub fn tag_ts(mut self, branch: Branch) -> Result<Self> {
        if !self.interferes(branch) {
            return Err(Error::State(format!("{branch:?} already absorbed")));
        }
        self.status[branch.index()] = BranchStatus::TsTagged;
        Ok(self)
    }

    pub fn absorb(mut self, branch: Branch) -> Self {
        self.status[branch.index()] = BranchStatus::EnvironmentAbsorbed;
        self
    }

    /// Both branches reach the recombining gradient before the environment
    /// absorbs either of them.
    pub fn recohere(mut self) -> Result<Self> {
        if self.any_absorbed() {
            return Err(Error::RecoherenceImpossible(
                "a branch was absorbed by the environment".into(),
            ));
        }
        self.status = [BranchStatus::Recohered; 2];
        Ok(self)
    }

    /// Remove the relative phase accumulated since the split.
    pub fn erase_em_phase(mut self) -> Self {
        self.amp_down_right *= Complex64::from_polar(1.0, -self.em_phase);
        self.em_phase = 0.0;
        self
    }

    /// The spin state left after committing to `branch`: `|↑⟩` (θ = 0) or
    /// `|↓⟩` (θ = π/2), with φ = 0.
    pub fn project(&self, branch: Branch) -> Result<SpinQubit> {
        if self.amplitude(branch).norm_sqr() == 0.0 {
            return Err(Error::State(format!(
                "cannot project onto {branch:?}: zero amplitude"
            )));
        }
        Ok(match branch {
            Branch::UpLeft => SpinQubit::up(),
            Branch::DownRight => SpinQubit::down(),
        })
    }

    /// Amplitudes agree within `tol`; global phase ignored.
    pub fn observably_eq(&self, other: &PathState, tol: f64) -> bool {
        (self.amp_up_left - other.amp_up_left).norm() <= tol
            && (self.amp_down_right - other.amp_down_right).norm() <= tol
            && self.status == other.status
    }
}

/// Gradient splitting: `|ψ⟩|C⟩ → cos θ |↑, L⟩ + e^{iφ} sin θ |↓, R⟩`.
pub fn split(q: &SpinQubit) -> PathState {
    let (up, down) = q.amplitudes();
    PathState {
        amp_up_left: up,
        amp_down_right: down,
        em_phase: 0.0,
        global_phase: 0.0,
        status: [BranchStatus::Coherent; 2],
    }
}

/// Branch probabilities `(|amp_up_L|², |amp_down_R|²)`.
pub fn born_weights(s: &PathState) -> Result<(f64, f64)> {
    if s.any_absorbed() {
        return Err(Error::State(
            "Born weights undefined after environment absorption".into(),
        ));
    }
    let w = |a: Complex64| a.norm_sqr().min(1.0);
    Ok((w(s.amp_up_left), w(s.amp_down_right)))
}

/// Multiply the `|↓, R⟩` amplitude by `e^{iΔΦ}`.
pub fn apply_em_phase(s: &PathState, delta_phi: f64) -> Result<PathState> {
    if !delta_phi.is_finite() {
        return Err(Error::domain(format!("ΔΦ={delta_phi} is not finite")));
    }
    if s.any_absorbed() {
        return Err(Error::State("cannot phase-shift an absorbed branch".into()));
    }
    let mut out = *s;
    out.amp_down_right *= Complex64::from_polar(1.0, delta_phi);
    out.em_phase += delta_phi;
    Ok(out)
}

/// Recombine both branches into a spin qubit. The relative phase of the
/// result is `φ + em_phase`. When the `|↓⟩` amplitude vanishes the phase is
/// undefined and reported as 0.
pub fn merge(s: &PathState) -> Result<SpinQubit> {
    let ok = |st: BranchStatus| matches!(st, BranchStatus::Coherent | BranchStatus::Recohered);
    if !s.status.iter().all(|&st| ok(st)) {
        return Err(Error::RecoherenceImpossible(format!(
            "branch status {:?} does not allow merging",
            s.status
        )));
    }
    let (a, b) = (s.amp_up_left, s.amp_down_right);
    let theta = b.norm().atan2(a.norm());
    let phi = if b.norm() == 0.0 {
        0.0
    } else if a.norm() == 0.0 {
        wrap_phase(b.arg())
    } else {
        wrap_phase(b.arg() - a.arg())
    };
    Ok(SpinQubit { theta, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

    const TOL: f64 = 1e-12;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() <= TOL
    }

    #[test]
    fn prepare_equal_weight() {
        let (a, b) = prepare_qubit(FRAC_PI_4, 0.0).unwrap().amplitudes();
        assert!(close(a, c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(b, c(FRAC_1_SQRT_2, 0.0)));
    }

    #[test]
    fn prepare_pure_up() {
        let (a, b) = prepare_qubit(0.0, 0.0).unwrap().amplitudes();
        assert_eq!(a, c(1.0, 0.0));
        assert_eq!(b.norm(), 0.0);
    }

    #[test]
    fn prepare_pi3_half_pi() {
        // cos(π/3) = 0.5, sin(π/3) = 0.8660254037844386
        let (a, b) = prepare_qubit(FRAC_PI_3, FRAC_PI_2).unwrap().amplitudes();
        assert!(close(a, c(0.5, 0.0)));
        assert!(close(b, c(0.0, 0.8660254037844386)));
    }

    #[test]
    fn prepare_rejects_out_of_range() {
        assert!(matches!(prepare_qubit(-0.1, 0.0), Err(Error::Domain(_))));
        assert!(matches!(prepare_qubit(1.6, 0.0), Err(Error::Domain(_))));
        assert!(matches!(prepare_qubit(0.1, TAU), Err(Error::Domain(_))));
        assert!(matches!(prepare_qubit(0.1, -0.5), Err(Error::Domain(_))));
        assert!(matches!(
            prepare_qubit(f64::NAN, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            prepare_qubit(0.1, f64::INFINITY),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn split_examples() {
        let s = split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap());
        assert!(close(s.amp_up_left(), c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(s.amp_down_right(), c(FRAC_1_SQRT_2, 0.0)));
        assert_eq!(s.em_phase(), 0.0);
        assert_eq!(s.status(Branch::UpLeft), BranchStatus::Coherent);
        assert_eq!(s.status(Branch::DownRight), BranchStatus::Coherent);

        let s = split(&prepare_qubit(0.0, 0.0).unwrap());
        assert_eq!(s.amp_up_left(), c(1.0, 0.0));
        assert_eq!(s.amp_down_right().norm(), 0.0);

        // cos(π/6) = 0.8660254037844387, e^{iπ} sin(π/6) = -0.5
        let s = split(&prepare_qubit(FRAC_PI_6, PI).unwrap());
        assert!(close(s.amp_up_left(), c(0.8660254037844387, 0.0)));
        assert!(close(s.amp_down_right(), c(-0.5, 0.0)));
    }

    #[test]
    fn born_weight_examples() {
        let w = |t: f64, p: f64| born_weights(&split(&prepare_qubit(t, p).unwrap())).unwrap();
        let (u, d) = w(FRAC_PI_6, 0.0);
        assert_abs_diff_eq!(u, 0.75, epsilon = TOL);
        assert_abs_diff_eq!(d, 0.25, epsilon = TOL);
        let (u, d) = w(FRAC_PI_4, 0.0);
        assert_abs_diff_eq!(u, 0.5, epsilon = TOL);
        assert_abs_diff_eq!(d, 0.5, epsilon = TOL);
        let (u, d) = w(FRAC_PI_3, FRAC_PI_2);
        assert_abs_diff_eq!(u, 0.25, epsilon = TOL);
        assert_abs_diff_eq!(d, 0.75, epsilon = TOL);
    }

    #[test]
    fn born_weights_reject_absorbed() {
        let s = split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap()).absorb(Branch::DownRight);
        assert!(matches!(born_weights(&s), Err(Error::State(_))));
        // ts-tagged is fine
        let s = split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap())
            .tag_ts(Branch::UpLeft)
            .unwrap();
        assert!(born_weights(&s).is_ok());
    }

    #[test]
    fn merge_examples() {
        let q = prepare_qubit(FRAC_PI_4, 0.0).unwrap();
        assert!(merge(&split(&q)).unwrap().approx_eq(&q, TOL));

        let q0 = prepare_qubit(0.0, 0.0).unwrap();
        assert!(merge(&split(&q0)).unwrap().approx_eq(&q0, TOL));

        let shifted = apply_em_phase(&split(&q), 0.2).unwrap();
        let m = merge(&shifted).unwrap();
        assert_abs_diff_eq!(m.theta(), FRAC_PI_4, epsilon = TOL);
        assert_abs_diff_eq!(m.phi(), 0.2, epsilon = TOL);
    }

    #[test]
    fn merge_with_pi_shift_gives_minus_superposition() {
        let s = apply_em_phase(&split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap()), PI).unwrap();
        // explicit amplitude arithmetic: (1/√2) · e^{iπ} = -1/√2
        assert!(close(s.amp_down_right(), c(-FRAC_1_SQRT_2, 0.0)));
        let m = merge(&s).unwrap();
        assert_abs_diff_eq!(m.theta(), FRAC_PI_4, epsilon = TOL);
        assert_abs_diff_eq!(m.phi(), PI, epsilon = TOL);
    }

    #[test]
    fn merge_refuses_projected_or_absorbed() {
        let s = split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap());
        let tagged = s.tag_ts(Branch::UpLeft).unwrap();
        assert!(matches!(
            merge(&tagged),
            Err(Error::RecoherenceImpossible(_))
        ));
        let absorbed = tagged.absorb(Branch::DownRight);
        assert!(matches!(
            merge(&absorbed),
            Err(Error::RecoherenceImpossible(_))
        ));
        assert!(matches!(
            absorbed.recohere(),
            Err(Error::RecoherenceImpossible(_))
        ));
        // surviving branches remerge
        let back = merge(&tagged.recohere().unwrap()).unwrap();
        assert_abs_diff_eq!(back.theta(), FRAC_PI_4, epsilon = TOL);
    }

    #[test]
    fn em_phase_examples() {
        let s = split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap());
        assert_eq!(apply_em_phase(&s, 0.0).unwrap(), s);
        let twice = apply_em_phase(&apply_em_phase(&s, 0.2).unwrap(), 0.2).unwrap();
        assert_abs_diff_eq!(twice.em_phase(), 0.4, epsilon = TOL);
        assert!(matches!(
            apply_em_phase(&s, f64::NAN),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn erase_restores_unshifted_state() {
        let s = split(&prepare_qubit(FRAC_PI_4, 0.3).unwrap());
        let e = apply_em_phase(&s, 0.122).unwrap().erase_em_phase();
        assert!(e.observably_eq(&s, TOL));
        assert_eq!(e.em_phase(), 0.0);
    }

    #[test]
    fn global_phase_is_unobservable() {
        let s = split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap());
        let g = s.with_global_phase(1.3);
        assert!(g.observably_eq(&s, TOL));
        assert_eq!(g.global_phase(), 1.3);
        assert!(merge(&g).unwrap().approx_eq(&merge(&s).unwrap(), TOL));
    }

    #[test]
    fn projection_gives_basis_states() {
        let s = split(&prepare_qubit(FRAC_PI_4, 0.0).unwrap());
        assert_eq!(s.project(Branch::UpLeft).unwrap(), SpinQubit::up());
        assert_eq!(s.project(Branch::DownRight).unwrap(), SpinQubit::down());
        let pure = split(&prepare_qubit(0.0, 0.0).unwrap());
        assert!(pure.project(Branch::DownRight).is_err());
    }

    #[test]
    fn phase_helpers() {
        assert_eq!(wrap_phase(-1e-300), 0.0);
        assert_abs_diff_eq!(wrap_phase(-0.1), TAU - 0.1, epsilon = TOL);
        assert_abs_diff_eq!(phase_difference(0.1, TAU - 0.1), 0.2, epsilon = TOL);
        assert_abs_diff_eq!(phase_distance(TAU - 0.05, 0.05), 0.1, epsilon = TOL);
    }

    fn angles() -> impl Strategy<Value = (f64, f64)> {
        (0.0..=FRAC_PI_2, 0.0..TAU)
    }

    #[test]
    fn born_weights_never_exceed_one() {
        for phi in [0.0, 1.0, 4.0, 6.0] {
            for theta in [0.0, FRAC_PI_2] {
                let s = split(&prepare_qubit(theta, phi).unwrap());
                let s = apply_em_phase(&s, 0.219).unwrap();
                let (u, d) = born_weights(&s).unwrap();
                assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&d));
            }
        }
    }

    proptest! {
        #[test]
        fn normalization((t, p) in angles(), dphi in -10.0f64..10.0) {
            let s = apply_em_phase(&split(&prepare_qubit(t, p).unwrap()), dphi).unwrap();
            let (u, d) = born_weights(&s).unwrap();
            prop_assert!((u + d - 1.0).abs() <= TOL);
            prop_assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&d));
        }

        #[test]
        fn round_trip((t, p) in angles()) {
            let q = prepare_qubit(t, p).unwrap();
            let m = merge(&split(&q)).unwrap();
            prop_assert!((m.theta() - t).abs() <= TOL);
            // φ carries no information when the |↓⟩ amplitude vanishes
            if t.sin() > 0.0 {
                prop_assert!(phase_distance(m.phi(), p) <= TOL, "{} vs {}", m.phi(), p);
            }
        }

        #[test]
        fn phase_composition((t, p) in angles(), a in -7.0f64..7.0, b in -7.0f64..7.0) {
            let s = split(&prepare_qubit(t, p).unwrap());
            let two = apply_em_phase(&apply_em_phase(&s, a).unwrap(), b).unwrap();
            let one = apply_em_phase(&s, a + b).unwrap();
            prop_assert!(two.observably_eq(&one, TOL));
            prop_assert!(phase_distance(two.em_phase(), one.em_phase()) <= TOL);
        }

        #[test]
        fn born_weights_ignore_phase((t, p) in angles(), dphi in -10.0f64..10.0) {
            let s = split(&prepare_qubit(t, p).unwrap());
            let (u0, d0) = born_weights(&s).unwrap();
            let (u1, d1) = born_weights(&apply_em_phase(&s, dphi).unwrap()).unwrap();
            prop_assert!((u0 - u1).abs() <= TOL && (d0 - d1).abs() <= TOL);
        }
    }
}
