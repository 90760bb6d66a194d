//! Distances, norms and tail bounds on spectral states and trajectories.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::params::{s_function, MixingParams};
use crate::physical::{integrate_with_tails, inverse_transform};
use rayon::prelude::*;

use crate::solver::{rescale_to_selfsimilar, Trajectory};
use crate::spectral::{FrequencyGrid, SpectralState, StateKind};

/// Normalization tolerance required before a Fourier distance is meaningful.
pub const DISTANCE_NORM_TOL: f64 = 1e-3;
/// Multiplicative slack in the exponential domination test.
pub const DECAY_SLACK: f64 = 1.05;

pub const L1_V_MAX: f64 = 20.0;
pub const L1_V_POINTS: usize = 2001;

/// Default exclusion radius around the origin: two grid spacings.
pub fn default_xi_min(grid: &FrequencyGrid) -> f64 {
    2.0 * grid.spacing()
}

fn same_grid(a: &SpectralState, b: &SpectralState) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn check_moments(s: &SpectralState) -> Result<()> {
    let rep = s.check_normalization(DISTANCE_NORM_TOL);
    if !rep.pass {
        return Err(Error::IncompatibleMoments { mass: rep.mass_err, mean: rep.mean_err, var: rep.var_err });
    }
    Ok(())
}

/// `max |a - b| / |xi|^alpha` over `|xi| >= xi_min`, and the node attaining it.
/// No normalization check.
pub(crate) fn fourier_distance_raw(a: &[Complex64], b: &[Complex64], grid: &FrequencyGrid, alpha: f64, xi_min: f64) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    for (i, x) in grid.nodes().enumerate() {
        if x.abs() < xi_min * (1.0 - 1e-12) {
            continue;
        }
        let d = (a[i] - b[i]).norm() / x.abs().powf(alpha);
        if d > best.0 {
            best = (d, x);
        }
    }
    best
}

fn check_alpha(alpha: f64, xi_min: f64) -> Result<()> {
    if !(alpha > 2.0 && alpha <= 3.0) {
        return Err(Error::Precondition(format!("alpha must lie in (2, 3], got {alpha}")));
    }
    if !(xi_min > 0.0) {
        return Err(Error::Precondition(format!("xi_min must be positive, got {xi_min}")));
    }
    Ok(())
}

/// The Fourier metric `d_alpha` and the frequency where the supremum sits.
pub fn fourier_distance_with_argmax(
    a: &SpectralState,
    b: &SpectralState,
    alpha: f64,
    xi_min: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha, xi_min)?;
    same_grid(a, b)?;
    check_moments(a)?;
    check_moments(b)?;
    Ok(fourier_distance_raw(a.values(), b.values(), a.grid(), alpha, xi_min))
}

/// `d_alpha(a, b) = sup_{|xi| >= xi_min} |a - b| / |xi|^alpha`.
pub fn fourier_distance(a: &SpectralState, b: &SpectralState, alpha: f64, xi_min: f64) -> Result<f64> {
    fourier_distance_with_argmax(a, b, alpha, xi_min).map(|(d, _)| d)
}

pub fn sup_distance(a: &SpectralState, b: &SpectralState) -> Result<f64> {
    same_grid(a, b)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

/// The claim `|g(xi)| <= c / (1 + kappa |xi|)^mu_exp` for `|xi| > rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub c: f64,
    pub kappa: f64,
    pub mu_exp: f64,
    pub rho: f64,
}

impl TailBound {
    pub fn new(c: f64, kappa: f64, mu_exp: f64, rho: f64) -> Result<Self> {
        if !(c >= 1.0 && kappa > 0.0 && mu_exp > 0.0 && rho >= 0.0) {
            return Err(Error::Precondition(format!(
                "tail bound needs c >= 1, kappa > 0, mu > 0, rho >= 0 (got c={c}, kappa={kappa}, mu={mu_exp}, rho={rho})"
            )));
        }
        Ok(Self { c, kappa, mu_exp, rho })
    }

    /// Smallest admissible `c` for `state`, multiplied by `factor`.
    pub fn fit(state: &SpectralState, kappa: f64, mu_exp: f64, rho: f64, factor: f64) -> Result<Self> {
        let probe = Self::new(1.0, kappa, mu_exp, rho)?;
        let worst = tail_bound_check(state, &probe).worst_value;
        Self::new((factor * worst).max(1.0), kappa, mu_exp, rho)
    }

    fn weight(&self, xi: f64) -> f64 {
        (1.0 + self.kappa * xi.abs()).powf(self.mu_exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailReport {
    pub holds: bool,
    /// `max |g| (1 + kappa|xi|)^mu` over the checked nodes.
    pub worst_value: f64,
    pub worst_xi: f64,
    /// `c - worst_value`.
    pub margin: f64,
}

pub fn tail_bound_check(state: &SpectralState, bound: &TailBound) -> TailReport {
    let mut worst = (0.0, 0.0);
    for (x, v) in state.grid().nodes().zip(state.values()) {
        if x.abs() <= bound.rho {
            continue;
        }
        let w = v.norm() * bound.weight(x);
        if w > worst.0 {
            worst = (w, x);
        }
    }
    TailReport { holds: worst.0 <= bound.c, worst_value: worst.0, worst_xi: worst.1, margin: bound.c - worst.0 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationReport {
    pub holds: bool,
    pub first_failure: Option<f64>,
    pub worst_value: f64,
}

/// Tail check on a sequence of states; see [`uniform_tail_propagation`].
pub fn uniform_tail_propagation_states(states: &[SpectralState], bound: &TailBound) -> PropagationReport {
    let mut first_failure = None;
    let mut worst_value: f64 = 0.0;
    for s in states {
        let rep = tail_bound_check(s, bound);
        worst_value = worst_value.max(rep.worst_value);
        if !rep.holds && first_failure.is_none() {
            first_failure = Some(s.time());
        }
    }
    PropagationReport { holds: first_failure.is_none(), first_failure, worst_value }
}

pub fn uniform_tail_propagation(traj: &Trajectory, bound: &TailBound) -> PropagationReport {
    uniform_tail_propagation_states(traj.snapshots(), bound)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Least-squares slope of `ln d` against `t` (negative for decay).
    pub rate: f64,
    pub intercept: f64,
    /// `|S_{p,q}(alpha - 2)|`, the rate in the domination test.
    pub predicted_rate: f64,
    pub bound_ok: bool,
    /// `max d(t) / (e^{-|S|(t-t0)} d(t0))` over the window.
    pub worst_ratio: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

/// Fits `ln d = intercept + rate t` and runs the domination test
/// `d(t) <= 1.05 e^{-|S(alpha-2)| (t - t0)} d(t0)`.
pub fn decay_rate_fit_series(times: &[f64], distances: &[f64], params: &MixingParams, alpha: f64) -> Result<DecayFit> {
    if times.len() != distances.len() || times.len() < 5 {
        return Err(Error::DegenerateFit(format!("need at least 5 points, got {}", times.len())));
    }
    if let Some(d) = distances.iter().find(|&&d| !(d >= 1e-14)) {
        return Err(Error::DegenerateFit(format!("distance {d:e} below 1e-14: already converged")));
    }
    let logs: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let (rate, intercept) = linear_fit(times, &logs)?;
    let predicted_rate = s_function(params, alpha - 2.0).abs();
    let (t0, d0) = (times[0], distances[0]);
    let worst_ratio = times
        .iter()
        .zip(distances)
        .map(|(t, d)| d / ((-predicted_rate * (t - t0)).exp() * d0))
        .fold(0.0, f64::max);
    Ok(DecayFit {
        rate,
        intercept,
        predicted_rate,
        bound_ok: worst_ratio <= DECAY_SLACK,
        worst_ratio,
        times: times.to_vec(),
        distances: distances.to_vec(),
    })
}

/// Exponential decay of `d_alpha(g(t), reference)` over the snapshots in `window`.
pub fn decay_rate_fit(traj: &Trajectory, reference: &SpectralState, alpha: f64, window: (f64, f64)) -> Result<DecayFit> {
    let xi_min = default_xi_min(reference.grid());
    let mut times = Vec::new();
    let mut dists = Vec::new();
    for s in traj.snapshots() {
        if s.time() >= window.0 - 1e-9 && s.time() <= window.1 + 1e-9 {
            times.push(s.time());
            dists.push(fourier_distance(s, reference, alpha, xi_min)?);
        }
    }
    decay_rate_fit_series(&times, &dists, reference.params(), alpha)
}

/// Ordinary least squares `y = a x + b`, returning `(a, b)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = sxy / sxx;
    Ok((a, my - a * mx))
}

/// Squared homogeneous Sobolev norm `int |xi|^{2 eta} |g|^2 d xi` by trapezoid.
pub fn sobolev_norm(state: &SpectralState, eta: f64) -> f64 {
    let g = state.grid();
    g.nodes()
        .zip(state.values())
        .enumerate()
        .map(|(i, (x, v))| {
            let w = if eta == 0.0 { 1.0 } else { x.abs().powf(2.0 * eta) };
            g.trapezoid_weight(i) * w * v.norm_sqr()
        })
        .sum()
}

/// `C = -1 - ((1 - p^2 - q^2)/2)(2 eta + 1) + (q^{-(2 eta + 1)} + p^{-(2 eta + 1)})/2`.
pub fn sobolev_growth_constant(params: &MixingParams, eta: f64) -> f64 {
    let (p, q) = (params.p(), params.q());
    let k = 2.0 * eta + 1.0;
    -1.0 - 0.5 * (1.0 - params.energy_factor()) * k + 0.5 * (q.powf(-k) + p.powf(-k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevReport {
    /// `sup_t ||g(t)||^2 / max(||g(t0)||^2, 1)` over `t >= t0`.
    pub max_ratio: f64,
    /// Ratio growth over the last third of the window.
    pub late_growth: f64,
    /// Ratio growth over the middle third.
    pub mid_growth: f64,
    pub pass: bool,
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Boundedness test on a ratio series: fails when growth over the last third
/// is both noticeable (above 1% relative) and not slowing down (at least half
/// of the growth over the middle third).
pub fn sobolev_uniformity_series(times: &[f64], ratios: &[f64]) -> Result<SobolevReport> {
    let n = ratios.len();
    if n < 3 || times.len() != n {
        return Err(Error::DegenerateFit(format!("need at least 3 snapshots after t0, got {n}")));
    }
    let a = n / 3;
    let b = (2 * n) / 3;
    let mid_growth = ratios[b] - ratios[a];
    let late_growth = ratios[n - 1] - ratios[b];
    let scale = ratios[b].abs().max(1e-300);
    let growing = late_growth / scale > 1e-2 && late_growth >= 0.5 * mid_growth;
    Ok(SobolevReport {
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        late_growth,
        mid_growth,
        pass: !growing && ratios.iter().all(|r| r.is_finite()),
        times: times.to_vec(),
        ratios: ratios.to_vec(),
    })
}

pub fn sobolev_uniformity_check(traj: &Trajectory, eta: f64, t0: f64) -> Result<SobolevReport> {
    let snaps: Vec<&SpectralState> = traj.snapshots().iter().filter(|s| s.time() >= t0 - 1e-9).collect();
    let first = snaps.first().ok_or_else(|| Error::DegenerateFit(format!("no snapshot at or after t0={t0}")))?;
    let base = sobolev_norm(first, eta).max(1.0);
    let times: Vec<f64> = snaps.iter().map(|s| s.time()).collect();
    let ratios: Vec<f64> = snaps.iter().map(|s| sobolev_norm(s, eta) / base).collect();
    sobolev_uniformity_series(&times, &ratios)
}

/// `int |f_a - f_b| dv` on the given velocity grid, with power-law tail correction.
pub fn l1_distance_on(a: &SpectralState, b: &SpectralState, v_max: f64, n_points: usize) -> Result<f64> {
    same_grid(a, b)?;
    let diff: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let d = SpectralState::new(*a.grid(), diff, *a.params(), a.time(), a.kind())?;
    let f = inverse_transform(&d, v_max, n_points)?;
    let abs: Vec<f64> = f.values().iter().map(|x| x.abs()).collect();
    Ok(integrate_with_tails(v_max, &abs))
}

pub fn l1_distance(a: &SpectralState, b: &SpectralState) -> Result<f64> {
    l1_distance_on(a, b, L1_V_MAX, L1_V_POINTS)
}

/// Largest `rho` such that `|g(xi)| <= 1/(1 + k xi^2)` at every node with `|xi| <= rho`.
pub fn low_frequency_radius(state: &SpectralState, k: f64) -> f64 {
    let g = state.grid();
    let c = g.center();
    let v = state.values();
    let mut rho = 0.0;
    for j in 1..=c {
        let x = g.node(c + j);
        let bound = 1.0 / (1.0 + k * x * x);
        if v[c + j].norm() > bound || v[c - j].norm() > bound {
            break;
        }
        rho = x;
    }
    rho
}

/// One row of the metric time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub t: f64,
    pub d_alpha: f64,
    pub sup: f64,
    pub l1: f64,
    pub sobolev: f64,
}

impl MetricRow {
    pub const CSV_HEADER: &'static str = "t,d_alpha,sup,l1,sobolev_eta";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", fmt17(self.t), fmt17(self.d_alpha), fmt17(self.sup), fmt17(self.l1), fmt17(self.sobolev))
    }
}

/// Distances of every snapshot to `reference`. Unscaled snapshots are first
/// brought to unit energy. The Fourier metric uses the default exclusion radius.
pub fn metric_series(traj: &Trajectory, reference: &SpectralState, alpha: f64, eta: f64) -> Result<Vec<MetricRow>> {
    let xi_min = default_xi_min(reference.grid());
    traj.snapshots()
        .par_iter()
        .map(|s| {
            let scaled;
            let s = if s.kind() == StateKind::Unscaled {
                scaled = rescale_to_selfsimilar(s);
                &scaled
            } else {
                s
            };
            Ok(MetricRow {
                t: s.time(),
                d_alpha: fourier_distance(s, reference, alpha, xi_min)?,
                sup: sup_distance(s, reference)?,
                l1: l1_distance(s, reference)?,
                sobolev: sobolev_norm(s, eta),
            })
        })
        .collect()
}
