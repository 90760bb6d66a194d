//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; the process
//! exits nonzero if any criterion fails.

use std::sync::OnceLock;
use std::time::Instant;

use maxwell1d::lyapunov::{corpus, h_functional, main_inequality, reverse_young, DEFAULT_V_MAX, DEFAULT_V_POINTS};
use maxwell1d::metrics::{
    decay_rate_fit, fourier_distance, sobolev_growth_constant, sobolev_uniformity_check, tail_bound_check,
    uniform_tail_propagation, TailBound,
};
use maxwell1d::moments::{integrate_hierarchy, spectral_moments, MomentVector};
use maxwell1d::physical::inverse_transform;
use maxwell1d::solver::{evolve, Scheme, SolverConfig, Trajectory};
use maxwell1d::steady::{contraction_factor, fixed_point_steady, gevrey_fit, residual};
use maxwell1d::{FrequencyGrid, MixingParams, Result, SpectralState, StateKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn mp(p: f64, q: f64) -> MixingParams {
    MixingParams::new(p, q).expect("valid parameters")
}

fn grid(xi_max: f64, n: usize) -> FrequencyGrid {
    FrequencyGrid::new(xi_max, n).expect("valid grid")
}

fn config(dt: f64, t_end: f64, snapshot_every: usize) -> SolverConfig {
    SolverConfig { dt, t_end, snapshot_every, ..SolverConfig::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn energy_law() -> Result<Outcome> {
    let params = mp(0.7, 0.3);
    let g0 = SpectralState::gaussian(grid(40.0, 4097), params, StateKind::Unscaled);
    let traj = evolve(&g0, &params, &config(1e-3, 1.0, 1000), Scheme::Unscaled)?;
    let m2 = traj.last().second_moment();
    let want = (-0.42f64).exp();
    let err = rel(m2, want);
    outcome(err < 1e-3, format!("m2(1)={m2:.10} vs e^-0.42={want:.10}, rel err {err:.2e}"))
}

fn explicit_equilibrium() -> Result<Outcome> {
    let g = grid(40.0, 8193);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for params in [mp(0.7, 0.3), mp(0.5, 0.5)] {
        let s = SpectralState::explicit_steady(g, params, StateKind::Steady);
        let r = residual(&s, &params)?;
        worst = worst.max(r);
        parts.push(format!("({}, {}): {r:.2e}", params.p(), params.q()));
    }
    outcome(worst < 1e-8, format!("residuals {}", parts.join(", ")))
}

/// Converged state and the per-sweep distances.
type SteadyRun = Result<(SpectralState, Vec<f64>), String>;

fn computed_steady() -> &'static SteadyRun {
    static STEADY: OnceLock<SteadyRun> = OnceLock::new();
    STEADY.get_or_init(|| {
        fixed_point_steady(&mp(0.7, 0.3), &grid(40.0, 4097), 0.5, 1e-8, 1000)
            .map(|(s, log)| (s, log.iter().map(|l| l.d_distance).collect()))
            .map_err(|e| e.to_string())
    })
}

fn fixed_point() -> Result<Outcome> {
    let params = mp(0.7, 0.3);
    let (state, ds) = match computed_steady() {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("no convergence: {e}")),
    };
    let explicit = SpectralState::explicit_steady(*state.grid(), params, StateKind::Steady);
    let d = fourier_distance(state, &explicit, 2.5, 2.0 * state.grid().spacing())?;
    let factor = contraction_factor(&params, 0.5)?;
    // below 1e-7 successive changes sit at the interpolation floor
    let worst_ratio = ds
        .windows(2)
        .filter(|w| w[0] > 1e-7)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    outcome(
        d < 1e-4 && worst_ratio <= factor + 0.05,
        format!(
            "{} sweeps, d_2.5 to explicit {d:.2e}, worst sweep ratio {worst_ratio:.4} (bound {:.4})",
            ds.len(),
            factor + 0.05
        ),
    )
}

fn decay_run() -> &'static Result<Trajectory, String> {
    static RUN: OnceLock<Result<Trajectory, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let params = mp(0.7, 0.3);
        // the variance error grows like h^4 e^{0.38 t} as the profile sharpens at
        // the origin; h = 0.0098 keeps it below 1e-4 up to t = 30
        let g0 = SpectralState::gaussian(grid(20.0, 4097), params, StateKind::Scaled);
        evolve(&g0, &params, &config(1e-2, 30.0, 10), Scheme::Scaled).map_err(|e| e.to_string())
    })
}

fn exponential_decay() -> Result<Outcome> {
    let traj = match decay_run() {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let reference = SpectralState::explicit_steady(*traj.first().grid(), *traj.first().params(), StateKind::Steady);
    let fit = decay_rate_fit(traj, &reference, 2.5, (5.0, 30.0))?;
    outcome(
        fit.bound_ok,
        format!(
            "{} snapshots, d(5)={:.3e}, d(30)={:.3e}, fitted rate {:.4} vs bound {:.4}, worst ratio {:.4}",
            fit.times.len(),
            fit.distances[0],
            fit.distances[fit.distances.len() - 1],
            -fit.rate,
            fit.predicted_rate,
            fit.worst_ratio
        ),
    )
}

fn scaled_conservation() -> Result<Outcome> {
    let params = mp(0.7, 0.3);
    let g0 = SpectralState::gaussian(grid(20.0, 2049), params, StateKind::Scaled);
    let traj = evolve(&g0, &params, &config(2e-3, 20.0, 50), Scheme::Scaled)?;
    let steps = traj.diagnostics().len();
    let worst_mass = traj.diagnostics().iter().map(|d| d.mass_err).fold(0.0, f64::max);
    let worst_var = traj.diagnostics().iter().map(|d| d.var_err).fold(0.0, f64::max);
    let worst_mean = traj
        .snapshots()
        .iter()
        .map(|s| s.check_normalization(1.0).mean_err)
        .fold(0.0, f64::max);
    let exact_zero = traj.snapshots().iter().all(|s| s.value_at_zero().re == 1.0 && s.value_at_zero().im == 0.0);
    outcome(
        steps == 10_000 && worst_mass < 1e-3 && worst_var < 1e-3 && worst_mean < 1e-3 && exact_zero,
        format!(
            "{steps} steps, max errors mass {worst_mass:.1e} mean {worst_mean:.1e} var {worst_var:.2e}, value(0)=1 exactly: {exact_zero}"
        ),
    )
}

fn moment_oracle() -> Result<Outcome> {
    let g = grid(40.0, 4097);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for params in [mp(0.7, 0.3), mp(0.8, 0.6), mp(0.9, 0.6)] {
        let g0 = SpectralState::gaussian(g, params, StateKind::Unscaled);
        let traj = evolve(&g0, &params, &config(1e-3, 1.0, 1000), Scheme::Unscaled)?;
        let spectral = spectral_moments(traj.last(), 4)?;
        let oracle = integrate_hierarchy(&MomentVector::gaussian(4)?, &params, 1.0, 1e-3)?;
        let err = [2, 4].iter().map(|&n| rel(spectral.get(n), oracle.get(n))).fold(0.0, f64::max);
        let odd = [1, 3].iter().map(|&n| spectral.get(n).abs()).fold(0.0, f64::max);
        worst = worst.max(err).max(odd);
        parts.push(format!("{} {}: {err:.1e}", params.regime(), params.p()));
    }
    outcome(worst < 1e-3, format!("max rel error m2, m4 (odd moments absolute): {}", parts.join(", ")))
}

fn gevrey_exponent() -> Result<Outcome> {
    let (state, _) = match computed_steady() {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("no steady state: {e}")),
    };
    let steady = gevrey_fit(state, 5.0)?;
    let gauss = SpectralState::gaussian(*state.grid(), *state.params(), StateKind::Scaled);
    let gfit = gevrey_fit(&gauss, 3.0)?;
    let ok = (0.9..=1.1).contains(&steady.lambda_fit) && (1.95..=2.05).contains(&gfit.lambda_fit);
    outcome(ok, format!("steady lambda {:.4}, Gaussian lambda {:.4}", steady.lambda_fit, gfit.lambda_fit))
}

fn tail_propagation() -> Result<Outcome> {
    let params = mp(0.7, 0.3);
    let g = grid(40.0, 4097);
    let g0 = SpectralState::gaussian(g, params, StateKind::Scaled);
    let bound = TailBound::fit(&g0, 1.0, 2.0, 0.0, 2.0)?;
    let traj = evolve(&g0, &params, &config(1e-2, 10.0, 10), Scheme::Scaled)?;
    let prop = uniform_tail_propagation(&traj, &bound);
    let cos = SpectralState::two_point(g, params, StateKind::Scaled);
    let cos_rep = tail_bound_check(&cos, &bound);
    outcome(
        prop.holds && !cos_rep.holds,
        format!(
            "c={:.4}: worst value over t<=10 {:.4}, cos xi rejected: {} (worst {:.1} at xi={:.2})",
            bound.c,
            prop.worst_value,
            !cos_rep.holds,
            cos_rep.worst_value,
            cos_rep.worst_xi
        ),
    )
}

fn lyapunov_anchors() -> Result<Outcome> {
    let g = grid(40.0, 4097);
    let line = mp(0.5, 0.5);
    let g_inf = SpectralState::explicit_steady(g, line, StateKind::Scaled);
    let h = h_functional(&inverse_transform(&g_inf, DEFAULT_V_MAX, DEFAULT_V_POINTS)?)?;
    let h_err = (h + (2.0 * std::f64::consts::PI).sqrt()).abs();
    let mut worst_gap: f64 = 0.0;
    let mut worst_proven = f64::INFINITY;
    for p in [0.5, 0.7, 0.9] {
        let params = mp(p, 1.0 - p);
        let rep = main_inequality(&g_inf.clone().with_params(params), &params, DEFAULT_V_MAX, DEFAULT_V_POINTS)?;
        worst_gap = worst_gap.max(rep.gap.abs());
        for (_, s) in corpus(&g, &params) {
            let ry = reverse_young(&s, &params, DEFAULT_V_MAX, DEFAULT_V_POINTS)?;
            worst_proven = worst_proven.min(ry.proven.gap);
        }
    }
    outcome(
        h_err < 1e-4 && worst_gap < 1e-4 && worst_proven >= -1e-6,
        format!("|H + sqrt(2 pi)| {h_err:.1e}, max |gap| at g_inf {worst_gap:.1e}, min proven reverse-Young gap {worst_proven:.3e}"),
    )
}

fn sobolev_control() -> Result<Outcome> {
    let traj = match decay_run() {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let rep = sobolev_uniformity_check(traj, 1.0, 0.0)?;
    let cases = [
        ((0.7, 0.3, 1.0), 18.346_244_466_040_384),
        ((0.5, 0.5, 0.5), 2.5),
        ((0.6, 0.2, 2.0), 1_566.430_041_152_263_4),
    ];
    let worst = cases
        .iter()
        .map(|&((p, q, eta), want)| rel(sobolev_growth_constant(&mp(p, q), eta), want))
        .fold(0.0, f64::max);
    outcome(
        rep.pass && worst < 1e-12,
        format!(
            "max ratio {:.4}, growth mid {:.2e} late {:.2e}; growth constant max rel error {worst:.1e}",
            rep.max_ratio, rep.mid_growth, rep.late_growth
        ),
    )
}

fn self_convergence() -> Result<Outcome> {
    let params = mp(0.7, 0.3);
    let g0 = SpectralState::gaussian(grid(40.0, 4097), params, StateKind::Scaled);
    let finals = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| evolve(&g0, &params, &config(dt, 1.0, 1_000_000), Scheme::Scaled).map(|t| t.last().clone()))
        .collect::<Result<Vec<_>>>()?;
    let sup = |a: &SpectralState, b: &SpectralState| {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    let d1 = sup(&finals[0], &finals[1]);
    let d2 = sup(&finals[1], &finals[2]);
    let ratio = d1 / d2;
    outcome(
        (1.6..=2.4).contains(&ratio),
        format!("sup differences {d1:.3e}, {d2:.3e}, ratio {ratio:.4}"),
    )
}

type Check = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("energy law", energy_law),
        ("explicit equilibrium residual", explicit_equilibrium),
        ("fixed-point steady state", fixed_point),
        ("exponential decay", exponential_decay),
        ("scaled-scheme conservation", scaled_conservation),
        ("moment oracle", moment_oracle),
        ("Gevrey exponent", gevrey_exponent),
        ("tail propagation", tail_propagation),
        ("Lyapunov anchors", lyapunov_anchors),
        ("Sobolev control", sobolev_control),
        ("scheme self-convergence", self_convergence),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({detail}) [{:.1}s]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
