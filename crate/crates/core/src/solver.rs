//! Time stepping for the unscaled equation and the semi-implicit scheme for
//! the self-similar (scaled) equation, plus trajectory bookkeeping.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{fmt17, read_key_values, write_csv};
use crate::moments::energy_at;
use crate::params::{delta_tilde, jacobian_r, MixingParams};
use crate::quadrature::DilationRule;
use crate::spectral::{Interpolator, SpectralState, StateKind};

/// Max modulus beyond which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1.5;

/// States must be Hermitian to this accuracy for the half-grid shortcut.
const HERMITIAN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub quad_nodes: usize,
    pub snapshot_every: usize,
    pub tail_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { dt: 1e-2, t_end: 1.0, quad_nodes: 16, snapshot_every: 1, tail_tol: 1e-6 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt < 1.0) {
            return bad(format!("dt must lie in (0, 1), got {}", self.dt));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return bad(format!("t_end must be at least dt, got {}", self.t_end));
        }
        if self.quad_nodes < 8 {
            return bad(format!("quad_nodes must be at least 8, got {}", self.quad_nodes));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        if !(self.tail_tol > 0.0) {
            return bad(format!("tail_tol must be positive, got {}", self.tail_tol));
        }
        Ok(())
    }

    /// Scheme-specific checks on top of [`SolverConfig::validate`].
    pub fn validate_for(&self, params: &MixingParams, scheme: Scheme) -> Result<()> {
        self.validate()?;
        if scheme == Scheme::Scaled {
            if params.is_elastic() {
                return Err(Error::ElasticSingularity);
            }
            let r = jacobian_r(params)?;
            if r > 0.0 {
                let delta = delta_tilde(params).unwrap_or(1.0);
                let limit = r / (2.0 + delta);
                if self.dt >= limit {
                    return Err(Error::InvalidConfig(format!(
                        "dt={} must stay below r/(2+delta)={limit}",
                        self.dt
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of steps taken to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Unscaled,
    Scaled,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Unscaled => "unscaled",
            Scheme::Scaled => "scaled",
        }
    }

    pub fn state_kind(&self) -> StateKind {
        match self {
            Scheme::Unscaled => StateKind::Unscaled,
            Scheme::Scaled => StateKind::Scaled,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unscaled" => Ok(Scheme::Unscaled),
            "scaled" => Ok(Scheme::Scaled),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

#[inline]
pub(crate) fn lookup(ip: &Interpolator<'_>, x: f64, misses: &mut u64) -> Complex64 {
    ip.interp(x).unwrap_or_else(|| {
        *misses += 1;
        Complex64::new(0.0, 0.0)
    })
}

/// Applies a pointwise update `f(xi) -> (value, misses)` to every node. For
/// Hermitian input only `xi >= 0` is computed and the rest is mirrored.
pub(crate) fn map_nodes<F>(state: &SpectralState, f: F) -> (Vec<Complex64>, u64)
where
    F: Fn(f64) -> (Complex64, u64) + Sync,
{
    let grid = state.grid();
    let n = grid.len();
    let c = grid.center();
    if state.hermitian_defect() <= HERMITIAN_TOL {
        let half: Vec<(Complex64, u64)> = (c..n).into_par_iter().map(|i| f(grid.node(i))).collect();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        let mut misses = 0;
        for (k, (v, m)) in half.into_iter().enumerate() {
            values[c + k] = v;
            values[c - k] = v.conj();
            misses += if k == 0 { m } else { 2 * m };
        }
        (values, misses)
    } else {
        let full: Vec<(Complex64, u64)> = (0..n).into_par_iter().map(|i| f(grid.node(i))).collect();
        let misses = full.iter().map(|x| x.1).sum();
        (full.into_iter().map(|x| x.0).collect(), misses)
    }
}

fn check_tail(state: &SpectralState, tail_tol: f64) -> Result<()> {
    let edge = state.edge_modulus();
    if edge > tail_tol {
        return Err(Error::TailViolation { value: edge, tol: tail_tol });
    }
    Ok(())
}

fn finish(state: &SpectralState, mut values: Vec<Complex64>, misses: u64, dt: f64) -> Result<SpectralState> {
    let c = state.grid().center();
    values[c] = Complex64::new(1.0, 0.0);
    let next = SpectralState::new(*state.grid(), values, *state.params(), state.time() + dt, state.kind())?;
    next.stats().add_out_of_range(misses);
    Ok(next)
}

/// One step of `f+ = e^{-dt} f(xi) + (1 - e^{-dt}) f(p xi) f(q xi)`.
pub fn step_unscaled(state: &SpectralState, dt: f64, tail_tol: f64) -> Result<SpectralState> {
    if state.kind() != StateKind::Unscaled {
        return Err(Error::Precondition(format!("unscaled step applied to a {} state", state.kind())));
    }
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::Precondition(format!("dt must lie in (0, 1), got {dt}")));
    }
    check_tail(state, tail_tol)?;
    let (p, q) = (state.params().p(), state.params().q());
    let keep = (-dt).exp();
    let gain = -(-dt).exp_m1();
    let ip = state.interpolator();
    let (values, misses) = map_nodes(state, |xi| {
        let mut m = 0;
        let own = lookup(&ip, xi, &mut m);
        let a = lookup(&ip, p * xi, &mut m);
        let b = lookup(&ip, q * xi, &mut m);
        (own * keep + a * b * gain, m)
    });
    finish(state, values, misses, dt)
}

/// One step of the semi-implicit scheme for the scaled equation,
/// `g+(xi) = E_s[dt g(p tau xi) g(q tau xi) + (1 - dt) g(tau xi)]` with
/// `tau = exp(s dt / r)`, `s ~ Exp(1)`. The same formula covers `r < 0`.
pub fn step_scaled_semi_implicit(
    state: &SpectralState,
    dt: f64,
    rule: &DilationRule,
    tail_tol: f64,
) -> Result<SpectralState> {
    if state.kind() != StateKind::Scaled {
        return Err(Error::Precondition(format!("scaled step applied to a {} state", state.kind())));
    }
    let params = state.params();
    if params.is_elastic() {
        return Err(Error::ElasticSingularity);
    }
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::Precondition(format!("dt must lie in (0, 1), got {dt}")));
    }
    check_tail(state, tail_tol)?;
    let (p, q) = (params.p(), params.q());
    let dilations = rule.dilations(dt / jacobian_r(params)?);
    let ip = state.interpolator();
    let (values, misses) = map_nodes(state, |xi| {
        let mut m = 0;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(tau, w) in &dilations {
            let x = tau * xi;
            let own = lookup(&ip, x, &mut m);
            let a = lookup(&ip, p * x, &mut m);
            let b = lookup(&ip, q * x, &mut m);
            acc += (a * b * dt + own * (1.0 - dt)) * w;
        }
        (acc, m)
    });
    finish(state, values, misses, dt)
}

/// `g(xi) = f(xi / sqrt(E(t)))`, the unit-energy rescaling of an unscaled state.
pub fn rescale_to_selfsimilar(state: &SpectralState) -> SpectralState {
    let scale = 1.0 / energy_at(state.params(), state.time()).sqrt();
    let values = state.grid().nodes().map(|x| state.eval(x * scale)).collect();
    SpectralState::new(*state.grid(), values, *state.params(), state.time(), StateKind::Scaled)
        .expect("grid sizes agree")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub max_modulus: f64,
    pub out_of_range: u64,
    pub mass_err: f64,
    pub var_err: f64,
}

impl StepDiagnostics {
    pub const CSV_HEADER: &'static str = "step,t,max_modulus,out_of_range,mass_err,var_err";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step,
            fmt17(self.time),
            fmt17(self.max_modulus),
            self.out_of_range,
            fmt17(self.mass_err),
            fmt17(self.var_err)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub params: MixingParams,
    pub config: SolverConfig,
    pub scheme: Scheme,
    pub initial: String,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

impl Manifest {
    fn to_text(&self, snapshots: usize) -> String {
        let c = &self.config;
        [
            format!("p={}", fmt17(self.params.p())),
            format!("q={}", fmt17(self.params.q())),
            format!("scheme={}", self.scheme),
            format!("dt={}", fmt17(c.dt)),
            format!("t_end={}", fmt17(c.t_end)),
            format!("quad_nodes={}", c.quad_nodes),
            format!("snapshot_every={}", c.snapshot_every),
            format!("tail_tol={}", fmt17(c.tail_tol)),
            format!("initial={}", self.initial),
            format!("created={}", self.created),
            format!("snapshots={snapshots}"),
        ]
        .join("\n")
            + "\n"
    }

    fn parse(text: &str) -> std::result::Result<(Self, usize), (usize, String)> {
        let kv = read_key_values(text)?;
        let get = |k: &str| kv.get(k).ok_or((0, format!("missing key {k}")));
        let num = |k: &str| -> std::result::Result<f64, (usize, String)> {
            let (line, v) = get(k)?;
            v.parse().map_err(|e| (*line, format!("{k}: {e}")))
        };
        let int = |k: &str| -> std::result::Result<usize, (usize, String)> {
            let (line, v) = get(k)?;
            v.parse().map_err(|e| (*line, format!("{k}: {e}")))
        };
        let params = MixingParams::new(num("p")?, num("q")?).map_err(|e| (get("p").unwrap().0, e.to_string()))?;
        let (scheme_line, scheme_str) = get("scheme")?;
        let scheme = scheme_str.parse().map_err(|e| (*scheme_line, e))?;
        let config = SolverConfig {
            dt: num("dt")?,
            t_end: num("t_end")?,
            quad_nodes: int("quad_nodes")?,
            snapshot_every: int("snapshot_every")?,
            tail_tol: num("tail_tol")?,
        };
        let created = {
            let (line, v) = get("created")?;
            v.parse().map_err(|e| (*line, format!("created: {e}")))?
        };
        let initial = get("initial")?.1.clone();
        Ok((Manifest { params, config, scheme, initial, created }, int("snapshots")?))
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    snapshots: Vec<SpectralState>,
    manifest: Manifest,
    diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn snapshots(&self) -> &[SpectralState] {
        &self.snapshots
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn first(&self) -> &SpectralState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &SpectralState {
        self.snapshots.last().expect("trajectories hold at least one snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn set_initial_descriptor(&mut self, desc: impl Into<String>) {
        self.manifest.initial = desc.into();
    }

    /// Overrides the creation timestamp, e.g. for reproducible output.
    pub fn set_created(&mut self, created: u64) {
        self.manifest.created = created;
    }

    /// Writes `manifest.txt`, `t_<index>.csv` per snapshot and `diagnostics.csv`.
    pub fn save<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.txt"), self.manifest.to_text(self.snapshots.len()))?;
        for (i, s) in self.snapshots.iter().enumerate() {
            s.save(dir.join(format!("t_{i}.csv")))?;
        }
        let rows: Vec<String> = self.diagnostics.iter().map(|d| d.csv_row()).collect();
        write_csv(dir.join("diagnostics.csv"), StepDiagnostics::CSV_HEADER, &rows)
    }

    /// Reads a directory written by [`Trajectory::save`]. Per-step diagnostics
    /// are not restored.
    pub fn load<P: AsRef<Path>>(dir: P) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.txt");
        let text = fs::read_to_string(&path)?;
        let (manifest, count) = Manifest::parse(&text)
            .map_err(|(line, msg)| Error::MalformedManifest { path: path.clone(), line, msg })?;
        if count == 0 {
            return Err(Error::MalformedManifest { path, line: 0, msg: "no snapshots".into() });
        }
        let snapshots = (0..count)
            .map(|i| SpectralState::load(dir.join(format!("t_{i}.csv"))))
            .collect::<Result<Vec<_>>>()?;
        let grid = *snapshots[0].grid();
        for w in snapshots.windows(2) {
            if *w[1].grid() != grid || w[1].params() != w[0].params() {
                return Err(Error::GridMismatch);
            }
            if !(w[1].time() > w[0].time()) {
                return Err(Error::MalformedManifest {
                    path,
                    line: 0,
                    msg: "snapshot times are not increasing".into(),
                });
            }
        }
        Ok(Self { snapshots, manifest, diagnostics: Vec::new() })
    }
}

/// Integrates from `initial` to `config.t_end` with the chosen scheme.
pub fn evolve(
    initial: &SpectralState,
    params: &MixingParams,
    config: &SolverConfig,
    scheme: Scheme,
) -> Result<Trajectory> {
    config.validate_for(params, scheme)?;
    let norm = initial.check_normalization(1e-3);
    if !norm.pass {
        return Err(Error::IncompatibleMoments { mass: norm.mass_err, mean: norm.mean_err, var: norm.var_err });
    }
    let rule = match scheme {
        Scheme::Scaled => Some(DilationRule::new(config.quad_nodes)?),
        Scheme::Unscaled => None,
    };
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = Manifest { params: *params, config: *config, scheme, initial: "custom".into(), created };

    let start = initial.clone().with_params(*params).with_kind(scheme.state_kind());
    let t0 = start.time();
    let steps = config.steps();
    let mut snapshots = vec![start.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    let mut state = start;
    for k in 1..=steps {
        let next = match &rule {
            Some(rule) => step_scaled_semi_implicit(&state, config.dt, rule, config.tail_tol)?,
            None => step_unscaled(&state, config.dt, config.tail_tol)?,
        };
        let next = next.with_time(t0 + k as f64 * config.dt);
        let modulus = next.max_modulus();
        if !(modulus <= DIVERGENCE_THRESHOLD) {
            return Err(Error::Divergence { time: next.time(), modulus });
        }
        let norm = next.check_normalization(1.0);
        diagnostics.push(StepDiagnostics {
            step: k,
            time: next.time(),
            max_modulus: modulus,
            out_of_range: next.stats().out_of_range(),
            mass_err: norm.mass_err,
            var_err: norm.var_err,
        });
        if k % config.snapshot_every == 0 || k == steps {
            snapshots.push(next.clone());
        }
        state = next;
    }
    Ok(Trajectory { snapshots, manifest, diagnostics })
}

/// Linear interpolation in time between the bracketing snapshots.
pub fn trajectory_eval(traj: &Trajectory, xi: f64, t: f64) -> Result<Complex64> {
    let snaps = traj.snapshots();
    let (start, end) = (snaps[0].time(), traj.last().time());
    if !(t >= start && t <= end) {
        return Err(Error::OutOfWindow { t, start, end });
    }
    let k = snaps.partition_point(|s| s.time() <= t);
    if k == snaps.len() {
        return Ok(traj.last().eval(xi));
    }
    let (prev, next) = (&snaps[k - 1], &snaps[k]);
    if t == prev.time() {
        return Ok(prev.eval(xi));
    }
    let alpha = (next.time() - t) / (next.time() - prev.time());
    Ok(prev.eval(xi) * alpha + next.eval(xi) * (1.0 - alpha))
}
