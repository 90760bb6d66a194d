//! Mixing parameters of the collision rule `v* = p v + q w`, `w* = q v + p w`
//! and the closed-form regime analysis built on them.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::fmt17;

/// Tolerance on `p^2 + q^2 - 1` below which a pair is treated as elastic.
pub const ELASTIC_TOL: f64 = 1e-14;

/// `S(delta)` counts as negative only below this threshold.
const NEGATIVE_EPS: f64 = -1e-15;

const DELTA_SCAN_STEP: f64 = 1e-3;
const DELTA_BISECT_TOL: f64 = 1e-10;
const LAMBDA_TOL: f64 = 1e-12;
const LAMBDA_BRACKET_MAX: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingParams {
    p: f64,
    q: f64,
}

impl MixingParams {
    /// Requires `0 < q <= p`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParams { p, q, reason: "non-finite value" });
        }
        if q <= 0.0 {
            return Err(Error::InvalidParams { p, q, reason: "q must be positive" });
        }
        if q > p {
            return Err(Error::InvalidParams { p, q, reason: "q must not exceed p" });
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `p^2 + q^2`, the factor by which a collision rescales the second moment.
    pub fn energy_factor(&self) -> f64 {
        self.p * self.p + self.q * self.q
    }

    /// `J = p^2 - q^2`.
    pub fn jacobian(&self) -> f64 {
        self.p * self.p - self.q * self.q
    }

    pub fn is_elastic(&self) -> bool {
        (self.energy_factor() - 1.0).abs() < ELASTIC_TOL
    }

    pub fn regime(&self) -> Regime {
        let e = self.energy_factor() - 1.0;
        if e.abs() < ELASTIC_TOL {
            Regime::Elastic
        } else if e < 0.0 {
            Regime::Dissipative
        } else {
            Regime::EnergyProducing
        }
    }
}

impl fmt::Display for MixingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, q={})", self.p, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Dissipative,
    Elastic,
    EnergyProducing,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Dissipative => "dissipative",
            Regime::Elastic => "elastic",
            Regime::EnergyProducing => "energy-producing",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub params: MixingParams,
    pub regime: Regime,
    pub r: Option<f64>,
    pub lambda: Option<f64>,
    pub delta_tilde: Option<f64>,
    pub admissible: bool,
}

impl RegimeReport {
    pub const CSV_HEADER: &'static str = "p,q,regime,r,lambda,delta_tilde,admissible";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_else(|| "NA".to_string());
        format!(
            "{},{},{},{},{},{},{}",
            fmt17(self.params.p()),
            fmt17(self.params.q()),
            self.regime,
            opt(self.r),
            opt(self.lambda),
            opt(self.delta_tilde),
            self.admissible
        )
    }
}

/// `S(delta) = p^{2+delta} + q^{2+delta} - 1 - (2+delta)/2 (p^2 + q^2 - 1)`.
pub fn s_function(params: &MixingParams, delta: f64) -> f64 {
    let (p, q) = (params.p(), params.q());
    let a = 2.0 + delta;
    p.powf(a) + q.powf(a) - 1.0 - 0.5 * a * (params.energy_factor() - 1.0)
}

/// Largest `delta~` in (0, 1] with `S < 0` on (0, delta~), or `None` when `S` is
/// not negative immediately to the right of zero.
pub fn delta_tilde(params: &MixingParams) -> Option<f64> {
    let negative = |d: f64| s_function(params, d) < NEGATIVE_EPS;
    let steps = (1.0 / DELTA_SCAN_STEP).round() as usize;
    if !negative(DELTA_SCAN_STEP) {
        return None;
    }
    let mut last_neg = DELTA_SCAN_STEP;
    for k in 2..=steps {
        let d = k as f64 * DELTA_SCAN_STEP;
        if !negative(d) {
            let (mut lo, mut hi) = (last_neg, d);
            while hi - lo > DELTA_BISECT_TOL {
                let mid = 0.5 * (lo + hi);
                if negative(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        last_neg = d;
    }
    Some(1.0)
}

/// The exponent `lambda` solving `p^lambda + q^lambda = 1`.
pub fn gevrey_exponent(params: &MixingParams) -> Result<f64> {
    let (p, q) = (params.p(), params.q());
    if p >= 1.0 {
        return Err(Error::NoRoot { lo: 0.0, hi: f64::INFINITY });
    }
    let phi = |l: f64| p.powf(l) + q.powf(l) - 1.0;
    // phi(0) = 1 and phi decreases strictly because p, q < 1.
    let mut hi = 2.0;
    while phi(hi) > 0.0 {
        hi *= 2.0;
        if hi > LAMBDA_BRACKET_MAX {
            return Err(Error::NoRoot { lo: 0.0, hi: LAMBDA_BRACKET_MAX });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    if phi(lambda).abs() > LAMBDA_TOL {
        return Err(Error::NoRoot { lo, hi });
    }
    Ok(lambda)
}

/// `r = 2 / (1 - p^2 - q^2)`.
pub fn jacobian_r(params: &MixingParams) -> Result<f64> {
    if params.is_elastic() {
        return Err(Error::ElasticSingularity);
    }
    Ok(2.0 / (1.0 - params.energy_factor()))
}

/// `A(p, q) = (3 + p^2 + q^2) / 4`.
pub fn lyapunov_coefficient(params: &MixingParams) -> f64 {
    (3.0 + params.energy_factor()) / 4.0
}

pub fn classify(params: &MixingParams) -> RegimeReport {
    let delta_tilde = delta_tilde(params);
    RegimeReport {
        params: *params,
        regime: params.regime(),
        r: jacobian_r(params).ok(),
        lambda: gevrey_exponent(params).ok(),
        delta_tilde,
        admissible: delta_tilde.is_some(),
    }
}

/// Rectangular region of the (p, q) plane sampled on a `steps x steps` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRegion {
    pub p_range: (f64, f64),
    pub q_range: (f64, f64),
    pub steps: usize,
}

impl SweepRegion {
    fn axis(range: (f64, f64), steps: usize) -> Vec<f64> {
        if steps == 1 || range.0 == range.1 {
            return vec![range.0];
        }
        let h = (range.1 - range.0) / (steps - 1) as f64;
        (0..steps).map(|i| range.0 + i as f64 * h).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("sweep needs at least one step".into()));
        }
        for (lo, hi) in [self.p_range, self.q_range] {
            if !(lo > 0.0 && lo <= hi && hi <= 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "sweep range [{lo}, {hi}] must lie within (0, 2]"
                )));
            }
        }
        Ok(())
    }
}

/// Classifies every grid cell with `q <= p`, row-major in `p` then `q`.
pub fn sweep_region(region: &SweepRegion) -> Result<Vec<RegimeReport>> {
    region.validate()?;
    let ps = SweepRegion::axis(region.p_range, region.steps);
    let qs = SweepRegion::axis(region.q_range, region.steps);
    let cells: Vec<MixingParams> = ps
        .iter()
        .flat_map(|&p| qs.iter().filter_map(move |&q| MixingParams::new(p, q).ok()))
        .collect();
    Ok(cells.par_iter().map(classify).collect())
}
