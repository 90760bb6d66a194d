use std::fs;
use std::path::Path;

use maxwell1d::io::write_csv;
use maxwell1d::lyapunov::{corpus_report, h_scan, main_inequality, CorpusRow};
use maxwell1d::metrics::{fourier_distance, metric_series, sup_distance, MetricRow};
use maxwell1d::params::{classify as classify_params, sweep_region, SweepRegion};
use maxwell1d::solver::{evolve as run_evolve, Trajectory};
use maxwell1d::steady::{fixed_point_steady, SweepLog};
use maxwell1d::{FrequencyGrid, MixingParams, Regime, SpectralState, StateKind};

use crate::config::RunConfig;
use crate::svg::{heatmap, line_chart, Series};
use crate::{CliError, EvolveArgs, LyapunovArgs, MetricsArgs, SteadyArgs, SweepArgs};

/// Reference iteration used when a run is compared against a computed steady state.
const REFERENCE_DELTA: f64 = 0.5;
const REFERENCE_TOL: f64 = 1e-8;
const REFERENCE_MAX_ITER: usize = 1000;

/// Exact `p + q = 1` test for choosing the closed-form profile.
const LINE_TOL: f64 = 1e-12;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn params(p: f64, q: f64) -> Result<MixingParams, CliError> {
    MixingParams::new(p, q).map_err(|e| CliError::Usage(e.to_string()))
}

fn grid(xi_max: f64, n_points: usize) -> Result<FrequencyGrid, CliError> {
    FrequencyGrid::new(xi_max, n_points).map_err(|e| CliError::Usage(e.to_string()))
}

fn on_line(params: &MixingParams) -> bool {
    (params.p() + params.q() - 1.0).abs() <= LINE_TOL
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn classify(p: f64, q: f64) -> Result<(), CliError> {
    let report = classify_params(&params(p, q)?);
    println!("p: {p}");
    println!("q: {q}");
    println!("regime: {}", report.regime);
    println!("r: {}", na(report.r));
    println!("lambda: {}", na(report.lambda));
    println!("delta_tilde: {}", na(report.delta_tilde));
    println!("admissible: {}", report.admissible);
    Ok(())
}

pub fn evolve(a: &EvolveArgs) -> Result<(), CliError> {
    let overrides = [
        ("p", a.p.clone()),
        ("q", a.q.clone()),
        ("scheme", a.scheme.clone()),
        ("dt", a.dt.clone()),
        ("t_end", a.t_end.clone()),
        ("quad_nodes", a.quad_nodes.clone()),
        ("snapshot_every", a.snapshot_every.clone()),
        ("tail_tol", a.tail_tol.clone()),
        ("init", a.init.clone()),
        ("xi_max", a.xi_max.clone()),
        ("n_points", a.n_points.clone()),
        ("out", a.out.clone()),
        ("created", a.created.clone()),
    ];
    let cfg = RunConfig::build(a.config.as_deref(), &overrides)?;
    let initial = cfg.initial_state()?;
    let mut traj = run_evolve(&initial, &cfg.params, &cfg.solver, cfg.scheme)?;
    traj.set_initial_descriptor(cfg.descriptor());
    traj.set_created(cfg.created);
    create_dir(&cfg.out)?;
    traj.save(&cfg.out)?;
    let last = traj.last();
    println!(
        "{} snapshots to t={} in {} (max |g| {:.6}, var_err {:.3e})",
        traj.snapshots().len(),
        last.time(),
        cfg.out.display(),
        last.max_modulus(),
        last.check_normalization(1.0).var_err
    );
    Ok(())
}

pub fn steady(a: &SteadyArgs) -> Result<(), CliError> {
    let params = params(a.p, a.q)?;
    let grid = grid(a.xi_max, a.n_points)?;
    let (state, log) = fixed_point_steady(&params, &grid, a.delta, a.tol, a.max_iter)?;
    create_dir(&a.out)?;
    state.save(a.out.join("steady.csv"))?;
    let rows: Vec<String> = log.iter().map(SweepLog::csv_row).collect();
    write_csv(a.out.join("sweeps.csv"), SweepLog::CSV_HEADER, &rows)?;
    let series = [Series {
        name: "d between sweeps",
        points: log.iter().map(|l| (l.sweep as f64, l.d_distance)).collect(),
    }];
    write_text(&a.out.join("sweeps.svg"), &line_chart("fixed-point iteration", "sweep", "d", &series, true))?;
    println!("converged after {} sweeps, last d={:.3e}", log.len(), log.last().map_or(0.0, |l| l.d_distance));
    if on_line(&params) {
        let explicit = SpectralState::explicit_steady(grid, params, StateKind::Steady);
        let d = fourier_distance(&state, &explicit, 2.0 + a.delta, maxwell1d::metrics::default_xi_min(&grid))?;
        let sup = sup_distance(&state, &explicit)?;
        println!("against the closed form: d_{}={d:.3e}, sup={sup:.3e}", 2.0 + a.delta);
    }
    Ok(())
}

fn reference_state(spec: &str, traj: &Trajectory) -> Result<SpectralState, CliError> {
    let first = traj.first();
    if spec != "steady" {
        let path = spec.strip_prefix("file:").unwrap_or(spec);
        return SpectralState::load(path).map_err(|e| match e {
            maxwell1d::Error::Io(io) => CliError::Io(format!("reference {path}: {io}")),
            other => other.into(),
        });
    }
    let params = *first.params();
    if on_line(&params) {
        return Ok(SpectralState::explicit_steady(*first.grid(), params, StateKind::Steady));
    }
    let (state, _) = fixed_point_steady(&params, first.grid(), REFERENCE_DELTA, REFERENCE_TOL, REFERENCE_MAX_ITER)?;
    Ok(state)
}

pub fn metrics(a: &MetricsArgs) -> Result<(), CliError> {
    let traj = Trajectory::load(&a.run)?;
    let reference = reference_state(&a.reference, &traj)?;
    let rows = metric_series(&traj, &reference, a.alpha, a.eta)?;
    let out = a.out.clone().unwrap_or_else(|| a.run.clone());
    create_dir(&out)?;
    let csv: Vec<String> = rows.iter().map(MetricRow::csv_row).collect();
    write_csv(out.join("metrics.csv"), MetricRow::CSV_HEADER, &csv)?;
    let pick = |f: fn(&MetricRow) -> f64| rows.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
    let series = [
        Series { name: "d_alpha", points: pick(|r| r.d_alpha) },
        Series { name: "sup", points: pick(|r| r.sup) },
        Series { name: "L1", points: pick(|r| r.l1) },
    ];
    write_text(&out.join("metrics.svg"), &line_chart("distance to reference", "t", "distance", &series, true))?;
    let sob = [Series { name: "Sobolev norm", points: pick(|r| r.sobolev) }];
    write_text(&out.join("sobolev.svg"), &line_chart("homogeneous Sobolev norm", "t", "norm^2", &sob, false))?;
    if let (Some(f), Some(l)) = (rows.first(), rows.last()) {
        println!("d_alpha: {:.3e} at t={} -> {:.3e} at t={}", f.d_alpha, f.t, l.d_alpha, l.t);
    }
    Ok(())
}

fn print_rows(rows: &[CorpusRow]) {
    for r in rows {
        println!(
            "{}: lhs={:.9} rhs={:.9} gap={:.3e}{}",
            r.sample_id,
            r.report.lhs,
            r.report.rhs,
            r.report.gap,
            if r.report.saturated { " (saturated)" } else { "" }
        );
    }
}

pub fn lyapunov(a: &LyapunovArgs) -> Result<(), CliError> {
    let override_params = |stored: &MixingParams| params(a.p.unwrap_or(stored.p()), a.q.unwrap_or(stored.q()));
    let rows = if a.corpus {
        let params = params(a.p.unwrap_or(0.5), a.q.unwrap_or(0.5))?;
        corpus_report(&grid(a.xi_max, a.n_points)?, &params, a.v_max, a.v_points)?
    } else if let Some(path) = &a.input {
        let state = SpectralState::load(path)?;
        let params = override_params(state.params())?;
        let report = main_inequality(&state, &params, a.v_max, a.v_points)?;
        let id = path.file_stem().map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned());
        vec![CorpusRow { sample_id: id, p: params.p(), q: params.q(), report }]
    } else if let Some(dir) = &a.run {
        let traj = Trajectory::load(dir)?;
        let params = override_params(traj.first().params())?;
        let scan = h_scan(&traj, a.v_max, a.v_points)?;
        let rows = traj
            .snapshots()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(CorpusRow {
                    sample_id: format!("t_{i}"),
                    p: params.p(),
                    q: params.q(),
                    report: main_inequality(s, &params, a.v_max, a.v_points)?,
                })
            })
            .collect::<Result<Vec<_>, maxwell1d::Error>>()?;
        create_dir(&a.out)?;
        let h_rows: Vec<String> = scan
            .points
            .iter()
            .map(|p| format!("{},{},{}", maxwell1d::io::fmt17(p.t), maxwell1d::io::fmt17(p.h), maxwell1d::io::fmt17(p.slope)))
            .collect();
        write_csv(a.out.join("h_scan.csv"), "t,h,slope", &h_rows)?;
        let series = [Series { name: "H", points: scan.points.iter().map(|p| (p.t, p.h)).collect() }];
        write_text(&a.out.join("h_scan.svg"), &line_chart("square-root functional", "t", "H", &series, false))?;
        println!("H nonincreasing: {}", scan.nonincreasing);
        rows
    } else {
        return Err(CliError::Usage("one of --run, --input or --corpus is required".into()));
    };
    create_dir(&a.out)?;
    let csv: Vec<String> = rows.iter().map(CorpusRow::csv_row).collect();
    write_csv(a.out.join("report.csv"), CorpusRow::CSV_HEADER, &csv)?;
    print_rows(&rows);
    Ok(())
}

fn regime_color(regime: Regime, admissible: bool) -> &'static str {
    match (regime, admissible) {
        (Regime::Dissipative, true) => "#1f77b4",
        (Regime::Dissipative, false) => "#aec7e8",
        (Regime::Elastic, _) => "#2ca02c",
        (Regime::EnergyProducing, _) => "#d62728",
    }
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let region = SweepRegion { p_range: (a.p_min, a.p_max), q_range: (a.q_min, a.q_max), steps: a.steps };
    let reports = sweep_region(&region).map_err(|e| CliError::Usage(e.to_string()))?;
    create_dir(&a.out)?;
    let rows: Vec<String> = reports.iter().map(|r| r.csv_row()).collect();
    write_csv(a.out.join("region.csv"), maxwell1d::RegimeReport::CSV_HEADER, &rows)?;
    let cells: Vec<(f64, f64, &str)> = reports
        .iter()
        .map(|r| (r.params.p(), r.params.q(), regime_color(r.regime, r.admissible)))
        .collect();
    let legend = [
        ("dissipative, moments", "#1f77b4"),
        ("dissipative", "#aec7e8"),
        ("elastic", "#2ca02c"),
        ("energy-producing", "#d62728"),
    ];
    write_text(&a.out.join("region.svg"), &heatmap("regimes of (p, q)", "p", "q", &cells, &legend))?;
    let admissible = reports.iter().filter(|r| r.admissible).count();
    println!("{} cells, {admissible} with an admissible moment range", reports.len());
    Ok(())
}
