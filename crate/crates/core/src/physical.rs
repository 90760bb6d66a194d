//! Velocity-space densities reconstructed from spectral states.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{fmt17, write_csv};
use crate::params::MixingParams;
use crate::spectral::SpectralState;

/// `|g(xi_max)|` above this makes the truncated transform unreliable.
pub const TRANSFORM_TAIL_TOL: f64 = 1e-8;
/// Largest imaginary residue tolerated before the state is deemed asymmetric.
pub const ASYMMETRY_TOL: f64 = 1e-6;
/// Clipped mass tolerated by [`half_norm`].
pub const HALF_NORM_NEG_LIMIT: f64 = 1e-6;

pub const DEFAULT_V_MAX: f64 = 20.0;
pub const DEFAULT_V_POINTS: usize = 4097;

/// A real density sampled on a uniform symmetric velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityDensity {
    v_max: f64,
    values: Vec<f64>,
    neg_mass: f64,
    imag_residue: f64,
}

impl VelocityDensity {
    pub fn new(v_max: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if !(v_max > 0.0 && v_max.is_finite()) || n < 3 || n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "velocity grid needs v_max > 0 and an odd number of points >= 3 (v_max={v_max}, n={n})"
            )));
        }
        let mut f = Self { v_max, values, neg_mass: 0.0, imag_residue: 0.0 };
        f.neg_mass = f.trapezoid(|v| (-v).max(0.0));
        Ok(f)
    }

    pub fn from_fn<F: Fn(f64) -> f64>(v_max: f64, n_points: usize, f: F) -> Result<Self> {
        let h = 2.0 * v_max / (n_points.max(2) - 1) as f64;
        let c = (n_points / 2) as f64;
        Self::new(v_max, (0..n_points).map(|i| f((i as f64 - c) * h)).collect())
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / (self.values.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - (self.values.len() / 2) as f64) * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.node(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mass of the negative part, `int max(-f, 0)`.
    pub fn neg_mass(&self) -> f64 {
        self.neg_mass
    }

    /// Largest `|Im f|` seen by the inverse transform (0 for direct construction).
    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }

    fn trapezoid<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values.iter().map(|&v| g(v)).sum();
        (inner - 0.5 * (g(self.values[0]) + g(self.values[n - 1]))) * self.spacing()
    }

    pub fn mass(&self) -> f64 {
        self.trapezoid(|v| v)
    }

    /// `int v^k f dv` by trapezoid on the grid.
    pub fn moment(&self, k: i32) -> f64 {
        let h = self.spacing();
        let n = self.values.len();
        let s: f64 = self.nodes().zip(&self.values).map(|(v, f)| v.powi(k) * f).sum();
        let ends = self.node(0).powi(k) * self.values[0] + self.node(n - 1).powi(k) * self.values[n - 1];
        (s - 0.5 * ends) * h
    }

    pub fn positivity_report(&self) -> PositivityReport {
        PositivityReport {
            min_value: self.values.iter().copied().fold(f64::INFINITY, f64::min),
            neg_mass: self.neg_mass,
        }
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let rows: Vec<String> =
            self.nodes().zip(&self.values).map(|(v, f)| format!("{},{}", fmt17(v), fmt17(*f))).collect();
        write_csv(path, "v,f", &rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub min_value: f64,
    pub neg_mass: f64,
}

pub fn positivity_report(f: &VelocityDensity) -> PositivityReport {
    f.positivity_report()
}

fn transform_values(
    xi: &[f64],
    weights: &[f64],
    values: &[Complex64],
    v_max: f64,
    n_points: usize,
) -> Result<VelocityDensity> {
    if n_points < 3 || n_points.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("velocity grid needs an odd number of points >= 3, got {n_points}")));
    }
    let hv = 2.0 * v_max / (n_points - 1) as f64;
    let c = (n_points / 2) as f64;
    let h0 = xi[1] - xi[0];
    let out: Vec<Complex64> = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let v = (i as f64 - c) * hv;
            // e^{-i xi_j v} by a rotating phasor, renormalized every 256 nodes
            let rot = Complex64::from_polar(1.0, -h0 * v);
            let mut z = Complex64::from_polar(1.0, -xi[0] * v);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, (g, w)) in values.iter().zip(weights).enumerate() {
                if j % 256 == 0 {
                    z = Complex64::from_polar(1.0, -xi[j] * v);
                }
                acc += g * z * *w;
                z *= rot;
            }
            acc / (2.0 * PI)
        })
        .collect();
    let imag_residue = out.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag_residue > ASYMMETRY_TOL {
        return Err(Error::Asymmetry { residue: imag_residue });
    }
    let mut f = VelocityDensity::new(v_max, out.into_iter().map(|z| z.re).collect())?;
    f.imag_residue = imag_residue;
    Ok(f)
}

fn state_transform(state: &SpectralState, values: &[Complex64], v_max: f64, n_points: usize) -> Result<VelocityDensity> {
    let grid = state.grid();
    let xi: Vec<f64> = grid.nodes().collect();
    let w: Vec<f64> = (0..grid.len()).map(|i| grid.trapezoid_weight(i)).collect();
    transform_values(&xi, &w, values, v_max, n_points)
}

fn check_transform_tail(state: &SpectralState) -> Result<()> {
    let edge = state.edge_modulus();
    if !(edge < TRANSFORM_TAIL_TOL) {
        return Err(Error::TailViolation { value: edge, tol: TRANSFORM_TAIL_TOL });
    }
    Ok(())
}

/// `f(v) = (1/2pi) int g(xi) e^{-i xi v} d xi` by trapezoid over the frequency grid.
pub fn inverse_transform(state: &SpectralState, v_max: f64, n_points: usize) -> Result<VelocityDensity> {
    check_transform_tail(state)?;
    inverse_transform_unchecked(state, v_max, n_points)
}

/// As [`inverse_transform`] without the truncation guard, for diagnosing
/// states that do not decay (the result rings).
pub fn inverse_transform_unchecked(state: &SpectralState, v_max: f64, n_points: usize) -> Result<VelocityDensity> {
    state_transform(state, state.values(), v_max, n_points)
}

/// `f_p * f_q` with `f_p(v) = f(v/p)/p`, computed as the inverse transform of
/// `g(p xi) g(q xi)`.
pub fn scaled_convolution(
    state: &SpectralState,
    params: &MixingParams,
    v_max: f64,
    n_points: usize,
) -> Result<VelocityDensity> {
    check_transform_tail(state)?;
    let (p, q) = (params.p(), params.q());
    let prod: Vec<Complex64> = state.grid().nodes().map(|x| state.eval(p * x) * state.eval(q * x)).collect();
    state_transform(state, &prod, v_max, n_points)
}

/// One-sided tail `int_V^inf g` for samples that decay like a power law: the
/// local exponent is read off `g(V/2)/g(V)` and, when it is close to an integer
/// `s >= 2`, `A v^-s + B v^-(s+2)` is matched at both points and integrated
/// analytically. Faster decay needs no correction and returns 0.
pub(crate) fn power_tail(v_far: f64, g_far: f64, g_mid: f64) -> f64 {
    if !(g_far > 0.0 && g_mid > 0.0) {
        return 0.0;
    }
    let est = (g_mid / g_far).ln() / 2f64.ln();
    let s = est.round();
    if s < 2.0 || (est - s).abs() > 0.25 {
        return 0.0;
    }
    let v1 = v_far;
    let v2 = 0.5 * v_far;
    // g = A v^-s + B v^-(s+2); solve the 2x2 system at v1 and v2
    let (a11, a12) = (v1.powf(-s), v1.powf(-s - 2.0));
    let (a21, a22) = (v2.powf(-s), v2.powf(-s - 2.0));
    let det = a11 * a22 - a12 * a21;
    let a = (g_far * a22 - a12 * g_mid) / det;
    let b = (a11 * g_mid - a21 * g_far) / det;
    a * v1.powf(1.0 - s) / (s - 1.0) + b * v1.powf(-1.0 - s) / (s + 1.0)
}

/// Trapezoid over the velocity grid plus [`power_tail`] on both sides.
pub(crate) fn integrate_with_tails(v_max: f64, g: &[f64]) -> f64 {
    let n = g.len();
    let h = 2.0 * v_max / (n - 1) as f64;
    let inner: f64 = g.iter().sum::<f64>() - 0.5 * (g[0] + g[n - 1]);
    let c = n / 2;
    let mid_hi = c + (n - 1 - c) / 2;
    let mid_lo = c - c / 2;
    let v_mid = (mid_hi - c) as f64 * h;
    // the matching points must sit at exactly V and V/2
    let v_far = 2.0 * v_mid;
    let upper = if (v_far - v_max).abs() < 1e-9 * v_max { power_tail(v_far, g[n - 1], g[mid_hi]) } else { 0.0 };
    let lower = if (v_far - v_max).abs() < 1e-9 * v_max { power_tail(v_far, g[0], g[mid_lo]) } else { 0.0 };
    inner * h + upper + lower
}

/// `(int sqrt(max(f, 0)) dv)^2`.
pub fn half_norm(f: &VelocityDensity) -> Result<f64> {
    if f.neg_mass() >= HALF_NORM_NEG_LIMIT {
        return Err(Error::ExcessNegativity { neg_mass: f.neg_mass(), limit: HALF_NORM_NEG_LIMIT });
    }
    Ok(sqrt_integral(f).powi(2))
}

/// `int sqrt(max(f, 0)) dv` with power-law tail correction.
pub(crate) fn sqrt_integral(f: &VelocityDensity) -> f64 {
    let roots: Vec<f64> = f.values().iter().map(|v| v.max(0.0).sqrt()).collect();
    integrate_with_tails(f.v_max(), &roots)
}
