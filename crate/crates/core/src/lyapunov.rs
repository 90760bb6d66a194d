//! The functional `H(f) = -int sqrt(f)` and the inequalities that would make it
//! a Lyapunov functional for the scaled equation on the line `p + q = 1`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::params::{lyapunov_coefficient, MixingParams};
use crate::physical::{
    integrate_with_tails, inverse_transform, scaled_convolution, sqrt_integral, VelocityDensity,
};
use crate::solver::Trajectory;
use crate::spectral::{explicit_steady_value, FrequencyGrid, SpectralState, StateKind};

/// Largest negative mass tolerated by [`h_functional`] and the inequalities.
pub const H_NEG_LIMIT: f64 = 1e-4;
/// Quotient nodes with `f` below this are dropped.
pub const QUOTIENT_FLOOR: f64 = 1e-12;
pub const MAX_EXCLUDED_MASS: f64 = 1e-3;
pub const SATURATION_TOL: f64 = 1e-4;
/// Slack for the proven (coefficient `p`) reverse Young bound.
pub const PROVEN_SLACK: f64 = 1e-6;
pub const LINE_TOL: f64 = 1e-12;

pub const DEFAULT_V_MAX: f64 = 40.0;
pub const DEFAULT_V_POINTS: usize = 8001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; the conjecture predicts it is nonnegative.
    pub gap: f64,
    pub saturated: bool,
    /// Mass of the numerator on nodes dropped from a quotient.
    pub excluded_mass: f64,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64, excluded_mass: f64) -> Self {
        let gap = rhs - lhs;
        Self { lhs, rhs, gap, saturated: gap.abs() < SATURATION_TOL, excluded_mass }
    }
}

fn check_negativity(f: &VelocityDensity) -> Result<()> {
    if f.neg_mass() >= H_NEG_LIMIT {
        return Err(Error::ExcessNegativity { neg_mass: f.neg_mass(), limit: H_NEG_LIMIT });
    }
    Ok(())
}

fn check_line(params: &MixingParams) -> Result<()> {
    let defect = (params.p() + params.q() - 1.0).abs();
    if defect > LINE_TOL {
        return Err(Error::Precondition(format!("needs p + q = 1, got p + q - 1 = {defect:e}")));
    }
    Ok(())
}

/// `H(f) = -int sqrt(max(f, 0)) dv`, with the power-law tail beyond `v_max` included.
pub fn h_functional(f: &VelocityDensity) -> Result<f64> {
    check_negativity(f)?;
    Ok(-sqrt_integral(f))
}

/// Compares `((1 + p^2 + q^2)/2) int sqrt(f)` with `int (f_p * f_q) / sqrt(f)`.
/// The conjecture is reported, not asserted.
pub fn main_inequality(
    state: &SpectralState,
    params: &MixingParams,
    v_max: f64,
    n_points: usize,
) -> Result<InequalityReport> {
    check_line(params)?;
    let f = inverse_transform(state, v_max, n_points)?;
    check_negativity(&f)?;
    let conv = scaled_convolution(state, params, v_max, n_points)?;
    let dv = f.spacing();
    let mut excluded = 0.0;
    let quotient: Vec<f64> = f
        .values()
        .iter()
        .zip(conv.values())
        .map(|(&fv, &cv)| {
            if fv < QUOTIENT_FLOOR {
                excluded += cv.abs() * dv;
                0.0
            } else {
                cv / fv.sqrt()
            }
        })
        .collect();
    if excluded > MAX_EXCLUDED_MASS {
        return Err(Error::MassExclusionTooLarge { mass: excluded, limit: MAX_EXCLUDED_MASS });
    }
    let lhs = 0.5 * (1.0 + params.energy_factor()) * sqrt_integral(&f);
    let rhs = integrate_with_tails(v_max, &quotient);
    Ok(InequalityReport::new(lhs, rhs, excluded))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverseYoungReport {
    /// `A(p,q) int sqrt(f)` against `int sqrt(f_p * f_q)`.
    pub conjectured: InequalityReport,
    /// The same with `p` in place of `A(p,q)`, which follows from Leindler's inequality.
    pub proven: InequalityReport,
    pub proven_holds: bool,
}

/// Reverse Young test `||f_p * f_q||_{1/2}^{1/2} >= A ||f||_{1/2}^{1/2}` with
/// `A = (3 + p^2 + q^2)/4`, and the proven case `A = p`.
pub fn reverse_young(
    state: &SpectralState,
    params: &MixingParams,
    v_max: f64,
    n_points: usize,
) -> Result<ReverseYoungReport> {
    check_line(params)?;
    let f = inverse_transform(state, v_max, n_points)?;
    check_negativity(&f)?;
    let conv = scaled_convolution(state, params, v_max, n_points)?;
    check_negativity(&conv)?;
    let root_f = sqrt_integral(&f);
    let root_conv = sqrt_integral(&conv);
    let conjectured = InequalityReport::new(lyapunov_coefficient(params) * root_f, root_conv, 0.0);
    let proven = InequalityReport::new(params.p() * root_f, root_conv, 0.0);
    Ok(ReverseYoungReport { conjectured, proven, proven_holds: proven.gap >= -PROVEN_SLACK })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint {
    pub t: f64,
    pub h: f64,
    /// Centered difference in the interior, one-sided at the ends.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HScan {
    pub points: Vec<HPoint>,
    /// Whether `H` never increases by more than 1e-12 between snapshots.
    pub nonincreasing: bool,
}

/// `H` along the snapshots of a scaled trajectory on the line `p + q = 1`.
pub fn h_scan(traj: &Trajectory, v_max: f64, n_points: usize) -> Result<HScan> {
    let first = traj.first();
    check_line(first.params())?;
    if first.kind() != StateKind::Scaled {
        return Err(Error::Precondition(format!("H scan needs a scaled trajectory, got {}", first.kind())));
    }
    let snaps = traj.snapshots();
    let hs: Vec<(f64, f64)> = snaps
        .par_iter()
        .map(|s| Ok((s.time(), h_functional(&inverse_transform(s, v_max, n_points)?)?)))
        .collect::<Result<_>>()?;
    let n = hs.len();
    let slope = |i: usize| {
        if n < 2 {
            return 0.0;
        }
        let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
        (hs[b].1 - hs[a].1) / (hs[b].0 - hs[a].0)
    };
    let points: Vec<HPoint> = (0..n).map(|i| HPoint { t: hs[i].0, h: hs[i].1, slope: slope(i) }).collect();
    let nonincreasing = hs.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(HScan { points, nonincreasing })
}

/// Unit-variance test laws, each given by its characteristic function.
pub fn corpus(grid: &FrequencyGrid, params: &MixingParams) -> Vec<(&'static str, SpectralState)> {
    let real = |f: fn(f64) -> f64| move |x: f64| Complex64::new(f(x), 0.0);
    let mk = |f: &dyn Fn(f64) -> Complex64| SpectralState::from_fn(*grid, *params, StateKind::Scaled, f);
    vec![
        ("gaussian", mk(&real(|x| (-0.5 * x * x).exp()))),
        ("steady", mk(&explicit_steady_value)),
        // two Gaussians of variance 0.36 centred at +-0.8
        ("bimodal", mk(&real(|x| (0.8 * x).cos() * (-0.18 * x * x).exp()))),
        ("scale_mixture", mk(&real(|x| 0.5 * (-0.25 * x * x).exp() + 0.5 * (-0.75 * x * x).exp()))),
        ("logistic", mk(&real(logistic_cf))),
    ]
}

/// Characteristic function of the unit-variance logistic law, `pi s x / sinh(pi s x)`
/// with `s = sqrt(3)/pi`.
fn logistic_cf(x: f64) -> f64 {
    let a = 3f64.sqrt() * x;
    if a.abs() < 1e-8 {
        1.0 - a * a / 6.0
    } else {
        a / a.sinh()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRow {
    pub sample_id: String,
    pub p: f64,
    pub q: f64,
    pub report: InequalityReport,
}

impl CorpusRow {
    pub const CSV_HEADER: &'static str = "sample_id,p,q,lhs,rhs,gap,excluded_mass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.sample_id,
            fmt17(self.p),
            fmt17(self.q),
            fmt17(self.report.lhs),
            fmt17(self.report.rhs),
            fmt17(self.report.gap),
            fmt17(self.report.excluded_mass)
        )
    }
}

/// [`main_inequality`] over the whole [`corpus`], in parallel.
pub fn corpus_report(grid: &FrequencyGrid, params: &MixingParams, v_max: f64, n_points: usize) -> Result<Vec<CorpusRow>> {
    corpus(grid, params)
        .into_par_iter()
        .map(|(id, s)| {
            Ok(CorpusRow {
                sample_id: id.to_string(),
                p: params.p(),
                q: params.q(),
                report: main_inequality(&s, params, v_max, n_points)?,
            })
        })
        .collect()
}
