//! Characteristic functions sampled on a uniform symmetric frequency grid.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::{fmt17, split_key_value};
use crate::params::MixingParams;

/// Uniform nodes on `[-xi_max, xi_max]` with an exact node at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    xi_max: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub const MIN_POINTS: usize = 33;

    pub fn new(xi_max: f64, n_points: usize) -> Result<Self> {
        if !(xi_max.is_finite() && xi_max > 0.0) {
            return Err(Error::InvalidGrid(format!("xi_max must be positive, got {xi_max}")));
        }
        if n_points < Self::MIN_POINTS || n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_points must be odd and at least {}, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { xi_max, n_points })
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.xi_max / (self.n_points - 1) as f64
    }

    /// Index of the `xi = 0` node.
    pub fn center(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.node(i))
    }

    /// Trapezoid weights over the whole grid.
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.spacing()
        } else {
            self.spacing()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// Fourier transform of the unscaled density `f`.
    Unscaled,
    /// Fourier transform of the unit-energy scaled density `g`.
    Scaled,
    Steady,
}

impl StateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateKind::Unscaled => "unscaled",
            StateKind::Scaled => "scaled",
            StateKind::Steady => "steady",
        }
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unscaled" => Ok(StateKind::Unscaled),
            "scaled" => Ok(StateKind::Scaled),
            "steady" => Ok(StateKind::Steady),
            other => Err(format!("unknown state kind {other:?}")),
        }
    }
}

/// Scaled node derivatives `(h g'(xi_i), h^2 g''(xi_i))`: sixth-order centered
/// differences in the interior, lower order in the outermost three nodes,
/// where states are negligible anyway. Near `xi = 0`, where equilibria carry
/// a `|xi|^3` term, the stencils stay on one side of the origin and the center
/// averages its left and right estimates.
fn node_derivatives(f: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = f.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut d1 = vec![zero; n];
    let mut d2 = vec![zero; n];
    for i in 3..n - 3 {
        d1[i] = ((f[i + 1] - f[i - 1]) * 45.0 - (f[i + 2] - f[i - 2]) * 9.0 + (f[i + 3] - f[i - 3])) / 60.0;
        d2[i] = ((f[i + 1] + f[i - 1]) * 270.0 - (f[i + 2] + f[i - 2]) * 27.0 + (f[i + 3] + f[i - 3]) * 2.0
            - f[i] * 490.0)
            / 180.0;
    }
    for i in [2, n - 3] {
        d1[i] = ((f[i + 1] - f[i - 1]) * 8.0 - (f[i + 2] - f[i - 2])) / 12.0;
        d2[i] = ((f[i + 1] + f[i - 1]) * 16.0 - (f[i + 2] + f[i - 2]) - f[i] * 30.0) / 12.0;
    }
    for (i, s) in [(0usize, 1.0), (1, 1.0), (n - 1, -1.0), (n - 2, -1.0)] {
        // one-sided, pointing into the grid
        let at = |k: usize| if s > 0.0 { f[i + k] } else { f[i - k] };
        d1[i] = (at(0) * -3.0 + at(1) * 4.0 - at(2)) / 2.0 * s;
        d2[i] = at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3);
    }
    let c = n / 2;
    if c >= 8 {
        let side = |i: usize, first: isize, sign: isize| {
            let offsets: Vec<isize> = (0..7).map(|k| sign * (first + k)).collect();
            let (w1, w2) = fd_weights(&offsets);
            let mut a = (zero, zero);
            for (k, o) in offsets.iter().enumerate() {
                let v = f[(i as isize + o) as usize];
                a.0 += v * w1[k];
                a.1 += v * w2[k];
            }
            a
        };
        for k in 1..=2usize {
            (d1[c + k], d2[c + k]) = side(c + k, -(k as isize), 1);
            (d1[c - k], d2[c - k]) = side(c - k, -(k as isize), -1);
        }
        let (r, l) = (side(c, 0, 1), side(c, 0, -1));
        d1[c] = (r.0 + l.0) * 0.5;
        d2[c] = (r.1 + l.1) * 0.5;
    }
    (d1, d2)
}

/// Finite-difference weights for the first and second derivative at 0 on
/// integer offsets (Fornberg's recursion).
fn fd_weights(offsets: &[isize]) -> (Vec<f64>, Vec<f64>) {
    let m = offsets.len();
    let x: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    // c[k][j]: weight of node j for derivative k
    let mut c = vec![vec![0.0; m]; 3];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..m {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            for k in (0..=i.min(2)).rev() {
                let prev_k = if k > 0 { c[k - 1][j] } else { 0.0 };
                if j == i - 1 {
                    let prev_i = if k > 0 { c[k - 1][i - 1] } else { 0.0 };
                    c[k][i] = c1 * (k as f64 * prev_i - x[i - 1] * c[k][i - 1]) / c2;
                }
                c[k][j] = (x[i] * c[k][j] - k as f64 * prev_k) / c3;
            }
        }
        c1 = c2;
    }
    (c[1].clone(), c[2].clone())
}

/// Quintic Hermite interpolation matching values, first and second
/// derivatives at the nodes, with the derivatives from centered differences.
///
/// Errors in the node derivatives inherit the parity of the state, so small
/// dilations of an even state do not pick up a spurious `|xi|` component at
/// the origin, which the scaled dynamics would amplify.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Interpolator<'a> {
    inv_h: f64,
    center: f64,
    last: usize,
    xi_max: f64,
    values: &'a [Complex64],
    d1: &'a [Complex64],
    d2: &'a [Complex64],
}

impl<'a> Interpolator<'a> {
    /// `None` outside `[-xi_max, xi_max]`.
    #[inline]
    pub(crate) fn interp(&self, x: f64) -> Option<Complex64> {
        if !(x.abs() <= self.xi_max) {
            return None;
        }
        let t = (x * self.inv_h + self.center).clamp(0.0, self.last as f64);
        // queries that land on a node up to roundoff return the node value
        let nearest = t.round();
        if (t - nearest).abs() < 1e-10 {
            return Some(self.values[nearest as usize]);
        }
        let i = (t.floor() as usize).min(self.last - 1);
        let u = t - i as f64;
        let u2 = u * u;
        let u3 = u2 * u;
        let u4 = u3 * u;
        let u5 = u4 * u;
        let h0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5;
        let h1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5;
        let h2 = 0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5);
        let k0 = 10.0 * u3 - 15.0 * u4 + 6.0 * u5;
        let k1 = -4.0 * u3 + 7.0 * u4 - 3.0 * u5;
        let k2 = 0.5 * (u3 - 2.0 * u4 + u5);
        let (v, a, b) = (self.values, self.d1, self.d2);
        Some(v[i] * h0 + a[i] * h1 + b[i] * h2 + v[i + 1] * k0 + a[i + 1] * k1 + b[i + 1] * k2)
    }
}

#[derive(Debug, Default)]
pub struct EvalStats {
    out_of_range: AtomicU64,
}

impl EvalStats {
    pub fn out_of_range(&self) -> u64 {
        self.out_of_range.load(Ordering::Relaxed)
    }

    pub(crate) fn add_out_of_range(&self, n: u64) {
        if n > 0 {
            self.out_of_range.fetch_add(n, Ordering::Relaxed);
        }
    }
}

/// A characteristic function sampled on a [`FrequencyGrid`].
#[derive(Debug)]
pub struct SpectralState {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
    params: MixingParams,
    time: f64,
    kind: StateKind,
    stats: EvalStats,
}

impl Clone for SpectralState {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.clone(),
            d1: self.d1.clone(),
            d2: self.d2.clone(),
            params: self.params,
            time: self.time,
            kind: self.kind,
            stats: EvalStats {
                out_of_range: AtomicU64::new(self.stats.out_of_range()),
            },
        }
    }
}

impl PartialEq for SpectralState {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.values == other.values
            && self.params == other.params
            && self.time == other.time
            && self.kind == other.kind
    }
}

impl SpectralState {
    fn assemble(grid: FrequencyGrid, values: Vec<Complex64>, params: MixingParams, time: f64, kind: StateKind) -> Self {
        let (d1, d2) = node_derivatives(&values);
        Self { grid, values, d1, d2, params, time, kind, stats: EvalStats::default() }
    }

    pub fn new(
        grid: FrequencyGrid,
        values: Vec<Complex64>,
        params: MixingParams,
        time: f64,
        kind: StateKind,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self::assemble(grid, values, params, time, kind))
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(
        grid: FrequencyGrid,
        params: MixingParams,
        kind: StateKind,
        f: F,
    ) -> Self {
        let values: Vec<Complex64> = grid.nodes().map(f).collect();
        Self::assemble(grid, values, params, 0.0, kind)
    }

    /// `exp(-xi^2 / 2)`, the standard normal law.
    pub fn gaussian(grid: FrequencyGrid, params: MixingParams, kind: StateKind) -> Self {
        Self::from_fn(grid, params, kind, |x| Complex64::new((-0.5 * x * x).exp(), 0.0))
    }

    /// `cos(xi)`, the symmetric two-point law at +-1.
    pub fn two_point(grid: FrequencyGrid, params: MixingParams, kind: StateKind) -> Self {
        Self::from_fn(grid, params, kind, |x| Complex64::new(x.cos(), 0.0))
    }

    /// `(1 + |xi|) exp(-|xi|)`, the equilibrium of the inelastic line `p + q = 1`.
    pub fn explicit_steady(grid: FrequencyGrid, params: MixingParams, kind: StateKind) -> Self {
        Self::from_fn(grid, params, kind, explicit_steady_value)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn params(&self) -> &MixingParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn stats(&self) -> &EvalStats {
        &self.stats
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn with_kind(mut self, kind: StateKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_params(mut self, params: MixingParams) -> Self {
        self.params = params;
        self
    }

    pub(crate) fn interpolator(&self) -> Interpolator<'_> {
        Interpolator {
            inv_h: 1.0 / self.grid.spacing(),
            center: self.grid.center() as f64,
            last: self.grid.len() - 1,
            xi_max: self.grid.xi_max(),
            values: &self.values,
            d1: &self.d1,
            d2: &self.d2,
        }
    }

    pub fn value_at_zero(&self) -> Complex64 {
        self.values[self.grid.center()]
    }

    /// Off-grid evaluation. Queries beyond `xi_max` return zero and are counted.
    pub fn eval(&self, xi: f64) -> Complex64 {
        match self.interpolator().interp(xi) {
            Some(v) => v,
            None => {
                self.stats.add_out_of_range(1);
                Complex64::new(0.0, 0.0)
            }
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Modulus of the state at the outermost nodes.
    pub fn edge_modulus(&self) -> f64 {
        self.values[0].norm().max(self.values[self.grid.len() - 1].norm())
    }

    /// `max |g(-xi) - conj(g(xi))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.len();
        (0..n)
            .map(|i| (self.values[n - 1 - i] - self.values[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Second moment `-Re g''(0)`, read off with the kink-aware fit used by
    /// [`SpectralState::check_normalization`].
    pub fn second_moment(&self) -> f64 {
        -second_derivative_at_zero(self).re
    }

    /// Mass, mean and variance errors read off the behaviour at zero.
    pub fn check_normalization(&self, tol: f64) -> NormalizationReport {
        let mass_err = (self.value_at_zero() - 1.0).norm();
        let mean_err = first_derivative_at_zero(self).norm();
        let var_err = (second_derivative_at_zero(self) + 1.0).norm();
        NormalizationReport {
            mass_err,
            mean_err,
            var_err,
            pass: mass_err <= tol && mean_err <= tol && var_err <= tol,
        }
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        fs::write(path, self.to_snapshot_text())?;
        Ok(())
    }

    pub fn to_snapshot_text(&self) -> String {
        let mut out = String::with_capacity(64 * (self.grid.len() + 6));
        out.push_str(&format!("p={}\n", fmt17(self.params.p())));
        out.push_str(&format!("q={}\n", fmt17(self.params.q())));
        out.push_str(&format!("time={}\n", fmt17(self.time)));
        out.push_str(&format!("kind={}\n", self.kind));
        out.push_str(&format!("xi_max={}\n", fmt17(self.grid.xi_max())));
        out.push_str(&format!("n_points={}\n", self.grid.len()));
        for (x, v) in self.grid.nodes().zip(&self.values) {
            out.push_str(&format!("{},{},{}\n", fmt17(x), fmt17(v.re), fmt17(v.im)));
        }
        out
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse_snapshot(&text).map_err(|(line, msg)| Error::MalformedSnapshot {
            path: path.to_path_buf(),
            line,
            msg,
        })
    }

    /// Parses the snapshot text format; errors carry a 1-based line number.
    pub fn parse_snapshot(text: &str) -> std::result::Result<Self, (usize, String)> {
        const KEYS: [&str; 6] = ["p", "q", "time", "kind", "xi_max", "n_points"];
        let lines: Vec<&str> = text.lines().collect();
        let mut header = std::collections::HashMap::new();
        for (idx, key) in KEYS.iter().enumerate() {
            let line = lines.get(idx).ok_or((idx + 1, format!("missing header key {key}")))?;
            let (k, v) = split_key_value(line)
                .ok_or((idx + 1, format!("expected {key}=value, got {line:?}")))?;
            if k != *key {
                return Err((idx + 1, format!("expected header key {key}, got {k}")));
            }
            header.insert(*key, (idx + 1, v));
        }
        let num = |key: &str| -> std::result::Result<f64, (usize, String)> {
            let (line, v) = header[key];
            v.parse::<f64>().map_err(|e| (line, format!("{key}: {e}")))
        };
        let p = num("p")?;
        let q = num("q")?;
        let params = MixingParams::new(p, q).map_err(|e| (1, e.to_string()))?;
        let time = num("time")?;
        let (kind_line, kind_str) = header["kind"];
        let kind = kind_str.parse::<StateKind>().map_err(|e| (kind_line, e))?;
        let xi_max = num("xi_max")?;
        let (n_line, n_str) = header["n_points"];
        let n_points = n_str.parse::<usize>().map_err(|e| (n_line, format!("n_points: {e}")))?;
        let grid = FrequencyGrid::new(xi_max, n_points).map_err(|e| (n_line, e.to_string()))?;

        let body = &lines[KEYS.len()..];
        if body.len() != n_points {
            return Err((
                KEYS.len() + body.len().min(n_points) + 1,
                format!("expected {n_points} data lines, found {}", body.len()),
            ));
        }
        let mut values = Vec::with_capacity(n_points);
        for (i, line) in body.iter().enumerate() {
            let lineno = KEYS.len() + i + 1;
            let mut fields = line.split(',');
            let mut next = |name: &str| -> std::result::Result<f64, (usize, String)> {
                fields
                    .next()
                    .ok_or((lineno, format!("missing {name}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| (lineno, format!("{name}: {e}")))
            };
            let xi = next("xi")?;
            let re = next("re")?;
            let im = next("im")?;
            if fields.next().is_some() {
                return Err((lineno, "expected exactly three fields".into()));
            }
            if (xi - grid.node(i)).abs() > 1e-9 * grid.xi_max().max(1.0) {
                return Err((lineno, format!("node {xi} does not match grid node {}", grid.node(i))));
            }
            values.push(Complex64::new(re, im));
        }
        let zero = values[grid.center()];
        if (zero - 1.0).norm() > 1e-9 {
            return Err((
                KEYS.len() + grid.center() + 1,
                format!("value at xi=0 is {zero}, expected 1"),
            ));
        }
        Ok(Self::assemble(grid, values, params, time, kind))
    }
}

pub fn explicit_steady_value(x: f64) -> Complex64 {
    let a = x.abs();
    Complex64::new((1.0 + a) * (-a).exp(), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationReport {
    pub mass_err: f64,
    pub mean_err: f64,
    pub var_err: f64,
    pub pass: bool,
}

/// Fourth-order central difference for `g'(0)`.
pub(crate) fn first_derivative_at_zero(state: &SpectralState) -> Complex64 {
    let c = state.grid.center();
    let v = &state.values;
    let h = state.grid.spacing();
    (-v[c + 2] + v[c + 1] * 8.0 - v[c - 1] * 8.0 + v[c - 2]) / (12.0 * h)
}

/// `g''(0)` from the even part of `g`, fitted on `x^2, |x|^3, x^4, |x|^5`.
///
/// A law with a finite `2 + delta` moment has `g(x) = 1 - m2 x^2 / 2 + O(|x|^{2+delta})`,
/// and the `|x|^3` term of a heavy-tailed equilibrium defeats plain central stencils.
pub(crate) fn second_derivative_at_zero(state: &SpectralState) -> Complex64 {
    const W: [f64; 4] = [4.0, -1.5, 4.0 / 9.0, -1.0 / 16.0];
    let c = state.grid.center();
    let v = &state.values;
    let h = state.grid.spacing();
    let mut a = Complex64::new(0.0, 0.0);
    for (k, w) in W.iter().enumerate() {
        let even = (v[c + k + 1] + v[c - k - 1]) * 0.5;
        a += (even - v[c]) * *w;
    }
    a * (2.0 / (h * h))
}

/// Fourth-order first derivative at node `i`. Stencils never straddle `xi = 0`,
/// where symmetric laws are typically not smooth.
pub(crate) fn derivative_at_node(values: &[Complex64], grid: &FrequencyGrid, i: usize) -> Complex64 {
    let h = grid.spacing();
    let c = grid.center();
    let n = grid.len();
    let central = |i: usize| {
        (values[i - 2] - values[i - 1] * 8.0 + values[i + 1] * 8.0 - values[i + 2]) / (12.0 * h)
    };
    // forward-biased: x-h, x, x+h, x+2h, x+3h
    let forward = |i: usize| {
        (values[i - 1] * -3.0 - values[i] * 10.0 + values[i + 1] * 18.0 - values[i + 2] * 6.0
            + values[i + 3])
            / (12.0 * h)
    };
    let backward = |i: usize| {
        -(values[i + 1] * -3.0 - values[i] * 10.0 + values[i - 1] * 18.0 - values[i - 2] * 6.0
            + values[i - 3])
            / (12.0 * h)
    };
    if i == c + 1 && i + 3 < n {
        forward(i)
    } else if i + 1 == c && i >= 3 {
        backward(i)
    } else {
        central(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> MixingParams {
        MixingParams::new(0.7, 0.3).unwrap()
    }

    fn grid(xi_max: f64, n: usize) -> FrequencyGrid {
        FrequencyGrid::new(xi_max, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(10.0, 32).is_err());
        assert!(FrequencyGrid::new(10.0, 31).is_err());
        assert!(FrequencyGrid::new(0.0, 33).is_err());
        let g = grid(10.0, 41);
        assert_eq!(g.center(), 20);
        assert_eq!(g.node(20), 0.0);
        assert_eq!(g.node(0), -10.0);
        assert_eq!(g.node(40), 10.0);
        assert_abs_diff_eq!(g.spacing(), 0.5);
    }

    #[test]
    fn constructors_pin_known_values() {
        let g = grid(8.0, 65); // h = 0.25, nodes hit 1 and pi-ish
        let gauss = SpectralState::gaussian(g, params(), StateKind::Scaled);
        assert_eq!(gauss.value_at_zero(), Complex64::new(1.0, 0.0));
        assert_abs_diff_eq!(gauss.eval(1.0).re, 0.606_530_659_712_633_4, epsilon = 1e-15);

        let two = SpectralState::two_point(g, params(), StateKind::Scaled);
        assert_eq!(two.value_at_zero().re, 1.0);
        assert_abs_diff_eq!(two.eval(std::f64::consts::PI).re, -1.0, epsilon = 1e-4);

        let st = SpectralState::explicit_steady(g, params(), StateKind::Steady);
        assert_eq!(st.value_at_zero().re, 1.0);
        assert_abs_diff_eq!(st.eval(1.0).re, 0.735_758_882_342_884_6, epsilon = 1e-15);
    }

    #[test]
    fn eval_reproduces_nodes_exactly() {
        let g = grid(20.0, 201);
        let s = SpectralState::explicit_steady(g, params(), StateKind::Steady);
        for i in [0, 1, 57, 100, 199, 200] {
            assert_eq!(s.eval(g.node(i)), s.values()[i]);
        }
    }

    #[test]
    fn eval_off_node_is_fourth_order() {
        // |e(x)| <= max|f''''| / 24 * max|(u+1) u (u-1) (u-2)| h^4, with max|f''''| = 3
        for &n in &[201usize, 401] {
            let g = grid(10.0, n);
            let h = g.spacing();
            let s = SpectralState::gaussian(g, params(), StateKind::Scaled);
            let bound = 3.0 / 24.0 * (9.0 / 16.0) * h.powi(4);
            for i in 0..n - 1 {
                let x = g.node(i) + 0.5 * h;
                let err = (s.eval(x).re - (-0.5 * x * x).exp()).abs();
                assert!(err <= bound * 1.01, "x={x} err={err} bound={bound}");
            }
        }
    }

    #[test]
    fn eval_out_of_range_counts() {
        let g = grid(10.0, 101);
        let s = SpectralState::gaussian(g, params(), StateKind::Scaled);
        assert_eq!(s.eval(20.0), Complex64::new(0.0, 0.0));
        assert_eq!(s.eval(-10.5), Complex64::new(0.0, 0.0));
        assert_eq!(s.stats().out_of_range(), 2);
        let _ = s.eval(10.0);
        assert_eq!(s.stats().out_of_range(), 2);
    }

    #[test]
    fn normalization_checks() {
        let g = grid(40.0, 4097);
        for s in [
            SpectralState::gaussian(g, params(), StateKind::Scaled),
            SpectralState::explicit_steady(g, params(), StateKind::Steady),
            SpectralState::two_point(g, params(), StateKind::Scaled),
        ] {
            let rep = s.check_normalization(1e-4);
            assert!(rep.pass, "{rep:?}");
        }
        let point_mass =
            SpectralState::from_fn(g, params(), StateKind::Scaled, |_| Complex64::new(1.0, 0.0));
        let rep = point_mass.check_normalization(1e-4);
        assert_abs_diff_eq!(rep.var_err, 1.0, epsilon = 1e-12);
        assert!(!rep.pass);
    }

    #[test]
    fn gaussian_second_derivative_is_minus_one() {
        let g = grid(20.0, 2049);
        let s = SpectralState::gaussian(g, params(), StateKind::Scaled);
        assert_abs_diff_eq!(second_derivative_at_zero(&s).re, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn fd_weights_reproduce_known_stencils() {
        let (w1, w2) = fd_weights(&[-3, -2, -1, 0, 1, 2, 3]);
        let e1 = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0].map(|w| w / 60.0);
        let e2 = [2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0].map(|w| w / 180.0);
        for k in 0..7 {
            assert_abs_diff_eq!(w1[k], e1[k], epsilon = 1e-13);
            assert_abs_diff_eq!(w2[k], e2[k], epsilon = 1e-13);
        }
        // one-sided weights are exact on sextics
        let (w1, w2) = fd_weights(&[-1, 0, 1, 2, 3, 4, 5]);
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.3 * x.powi(6);
        let xs = [-1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let d1: f64 = xs.iter().zip(&w1).map(|(x, w)| w * f(*x)).sum();
        let d2: f64 = xs.iter().zip(&w2).map(|(x, w)| w * f(*x)).sum();
        assert_abs_diff_eq!(d1, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d2, -4.0, epsilon = 1e-10);
    }

    #[test]
    fn derivative_at_node_handles_kink() {
        let g = grid(40.0, 8193);
        let s = SpectralState::explicit_steady(g, params(), StateKind::Steady);
        let c = g.center();
        for i in [c - 2, c - 1, c + 1, c + 2, c + 100] {
            let x = g.node(i);
            let exact = -x * (-x.abs()).exp();
            assert_abs_diff_eq!(derivative_at_node(s.values(), &g, i).re, exact, epsilon = 1e-8);
        }
    }

    #[test]
    fn constructors_are_hermitian() {
        let g = grid(20.0, 2049);
        for s in [
            SpectralState::gaussian(g, params(), StateKind::Scaled),
            SpectralState::explicit_steady(g, params(), StateKind::Steady),
            SpectralState::two_point(g, params(), StateKind::Scaled),
        ] {
            assert!(s.hermitian_defect() < 1e-12);
            assert!(s.check_normalization(1e-4).pass);
        }
    }

    #[test]
    fn snapshot_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let g = grid(12.5, 257);
        let s = SpectralState::gaussian(g, params(), StateKind::Scaled).with_time(0.123);
        s.save(&path).unwrap();
        let back = SpectralState::load(&path).unwrap();
        assert_eq!(back, s);
        assert!(back.values().iter().zip(s.values()).all(|(a, b)| a.re.to_bits() == b.re.to_bits()));
    }

    #[test]
    fn snapshot_rejects_missing_key() {
        let g = grid(12.5, 33);
        let s = SpectralState::gaussian(g, params(), StateKind::Scaled);
        let text = s.to_snapshot_text().replacen("kind=scaled\n", "", 1);
        let err = SpectralState::parse_snapshot(&text).unwrap_err();
        assert_eq!(err.0, 4);
    }

    #[test]
    fn snapshot_rejects_bad_mass() {
        let g = grid(12.5, 33);
        let s = SpectralState::from_fn(g, params(), StateKind::Scaled, |x| {
            Complex64::new(0.5 * (-x * x).exp(), 0.0)
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        s.save(&path).unwrap();
        match SpectralState::load(&path) {
            Err(Error::MalformedSnapshot { line, .. }) => assert_eq!(line, 6 + 16 + 1),
            other => panic!("expected MalformedSnapshot, got {other:?}"),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn eval_is_linear(a in proptest::collection::vec(-1.0f64..1.0, 33),
                              b in proptest::collection::vec(-1.0f64..1.0, 33),
                              x in -4.0f64..4.0, s in -3.0f64..3.0) {
                let g = grid(4.0, 33);
                let mk = |v: &Vec<f64>| SpectralState::new(
                    g, v.iter().map(|&r| Complex64::new(r, 0.5 * r)).collect(),
                    params(), 0.0, StateKind::Scaled).unwrap();
                let (sa, sb) = (mk(&a), mk(&b));
                let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
                let sc = mk(&combo);
                let lhs = sc.eval(x);
                let rhs = sa.eval(x) + sb.eval(x) * s;
                prop_assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }
}
