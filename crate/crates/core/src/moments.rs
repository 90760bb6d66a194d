//! Closed moment hierarchy of the unscaled equation, used as an independent
//! oracle for the spectral solver.
//!
//! Differentiating the Fourier equation `n` times at `xi = 0` gives
//! `dm_n/dt = sum_k C(n,k) p^k q^{n-k} m_k m_{n-k} - m_n`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::params::{s_function, MixingParams};
use crate::spectral::SpectralState;

const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    values: Vec<f64>,
    time: f64,
}

impl MomentVector {
    /// Requires `m0 = 1`, `m1 = 0`, `m2 > 0` and `2 <= n_max <= 8`.
    pub fn new(values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() < 3 || values.len() > MAX_ORDER + 1 {
            return Err(Error::Precondition(format!(
                "moment vector needs orders 0..=n_max with 2 <= n_max <= {MAX_ORDER}"
            )));
        }
        if (values[0] - 1.0).abs() > 1e-9 || values[1].abs() > 1e-9 || values[2] <= 0.0 {
            return Err(Error::Precondition(format!(
                "moments must satisfy m0=1, m1=0, m2>0 (got {:?})",
                &values[..3]
            )));
        }
        Ok(Self { values, time })
    }

    /// Moments of the standard normal law: `m_{2k} = (2k-1)!!`.
    pub fn gaussian(n_max: usize) -> Result<Self> {
        let values = (0..=n_max)
            .map(|n| if n % 2 == 1 { 0.0 } else { (1..n).step_by(2).map(|k| k as f64).product() })
            .collect();
        Self::new(values, 0.0)
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `mu_n = m_n / E^{n/2}`, the moments of the unit-energy rescaling.
    pub fn scaled(&self) -> Vec<f64> {
        let e = self.values[2];
        self.values.iter().enumerate().map(|(n, m)| m / e.powf(n as f64 / 2.0)).collect()
    }

    pub fn csv_header(n_max: usize) -> String {
        let mut h = String::from("t");
        for n in 0..=n_max {
            h.push_str(&format!(",m{n}"));
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = fmt17(self.time);
        for m in &self.values {
            row.push(',');
            row.push_str(&fmt17(*m));
        }
        row
    }
}

/// `E(t) = exp((p^2 + q^2 - 1) t)`.
pub fn energy_at(params: &MixingParams, t: f64) -> f64 {
    ((params.energy_factor() - 1.0) * t).exp()
}

fn rhs_values(m: &[f64], params: &MixingParams) -> Vec<f64> {
    let (p, q) = (params.p(), params.q());
    let n_max = m.len() - 1;
    let mut out = vec![0.0; m.len()];
    for n in 2..=n_max {
        let mut binom = 1.0;
        let mut gain = 0.0;
        for k in 0..=n {
            gain += binom * p.powi(k as i32) * q.powi((n - k) as i32) * m[k] * m[n - k];
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        out[n] = gain - m[n];
    }
    out
}

/// Time derivative of every moment; entries 0 and 1 vanish identically.
pub fn hierarchy_rhs(m: &MomentVector, params: &MixingParams) -> Vec<f64> {
    rhs_values(&m.values, params)
}

/// The second-order entry must reduce to `(p^2 + q^2 - 1) m2`.
fn check_consistency(params: &MixingParams) -> Result<()> {
    let probe = [1.0, 0.0, 1.7];
    let got = rhs_values(&probe, params)[2];
    let want = (params.energy_factor() - 1.0) * probe[2];
    let residual = (got - want).abs();
    if residual > 1e-12 * want.abs().max(1.0) {
        return Err(Error::HierarchyInconsistent(residual));
    }
    Ok(())
}

/// Classical RK4 with a fixed step no larger than `dt`.
pub fn integrate_hierarchy(
    m0: &MomentVector,
    params: &MixingParams,
    t_end: f64,
    dt: f64,
) -> Result<MomentVector> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and t_end >= 0 (dt={dt}, t_end={t_end})")));
    }
    check_consistency(params)?;
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut m = m0.values.clone();
    if steps > 0 {
        let h = t_end / steps as f64;
        let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            a.iter().zip(k).map(|(x, y)| x + s * y).collect()
        };
        for _ in 0..steps {
            let k1 = rhs_values(&m, params);
            let k2 = rhs_values(&axpy(&m, &k1, 0.5 * h), params);
            let k3 = rhs_values(&axpy(&m, &k2, 0.5 * h), params);
            let k4 = rhs_values(&axpy(&m, &k3, h), params);
            for i in 0..m.len() {
                m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    Ok(MomentVector { values: m, time: m0.time + t_end })
}

/// `B(delta) = p^delta q^2 + q^delta p^2`.
pub fn moment_forcing(params: &MixingParams, delta: f64) -> f64 {
    let (p, q) = (params.p(), params.q());
    p.powf(delta) * q * q + q.powf(delta) * p * p
}

/// Fixed point `4 B / |S(delta)|` of the discrete `(2+delta)`-moment recursion.
pub fn moment_limit(params: &MixingParams, delta: f64) -> Result<f64> {
    let s = s_function(params, delta);
    if !(s < 0.0) {
        return Err(Error::InadmissibleDelta { delta, reason: "S(delta) is not negative" });
    }
    Ok(4.0 * moment_forcing(params, delta) / s.abs())
}

/// Iterates `d_{j+1} = d_j - (dt/2)|S| d_j + 2 dt B`, returning `d_0..=d_steps`.
pub fn discrete_moment_bound(
    d0: f64,
    params: &MixingParams,
    delta: f64,
    dt: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let s = s_function(params, delta);
    if !(s < 0.0) {
        return Err(Error::InadmissibleDelta { delta, reason: "S(delta) is not negative" });
    }
    let decay = 1.0 - 0.5 * dt * s.abs();
    if !(dt > 0.0 && decay > 0.0) {
        return Err(Error::Precondition(format!(
            "dt={dt} makes the recursion coefficient {decay} non-positive"
        )));
    }
    let forcing = 2.0 * dt * moment_forcing(params, delta);
    let mut seq = Vec::with_capacity(steps + 1);
    let mut d = d0;
    seq.push(d);
    for _ in 0..steps {
        d = decay * d + forcing;
        seq.push(d);
    }
    Ok(seq)
}

/// Moments `m_1..m_4` read off a spectral state by central differences at zero
/// (`m_n = Re[(-i)^n g^(n)(0)]`). Needs a state smooth at the origin.
pub fn spectral_moments(state: &SpectralState, n_max: usize) -> Result<MomentVector> {
    if !(2..=4).contains(&n_max) {
        return Err(Error::Precondition(format!("spectral moments support n_max in 2..=4, got {n_max}")));
    }
    let c = state.grid().center();
    let h = state.grid().spacing();
    let v = state.values();
    let f = |k: isize| v[(c as isize + k) as usize];
    let d1 = (-f(2) + f(1) * 8.0 - f(-1) * 8.0 + f(-2)) / (12.0 * h);
    let d2 = (-f(2) + f(1) * 16.0 - f(0) * 30.0 + f(-1) * 16.0 - f(-2)) / (12.0 * h * h);
    let d3 = (-f(3) + f(2) * 8.0 - f(1) * 13.0 + f(-1) * 13.0 - f(-2) * 8.0 + f(-3)) / (8.0 * h.powi(3));
    let d4 = (-f(3) + f(2) * 12.0 - f(1) * 39.0 + f(0) * 56.0 - f(-1) * 39.0 + f(-2) * 12.0 - f(-3))
        / (6.0 * h.powi(4));
    let mi = Complex64::new(0.0, -1.0);
    let derivs = [f(0), d1, d2, d3, d4];
    let mut values: Vec<f64> = derivs
        .iter()
        .enumerate()
        .take(n_max + 1)
        .map(|(n, d)| (mi.powu(n as u32) * d).re)
        .collect();
    // mass and momentum are pinned by the invariants; FD noise would trip them
    values[0] = 1.0;
    if values[1].abs() < 1e-9 {
        values[1] = 0.0;
    }
    MomentVector::new(values, state.time())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{FrequencyGrid, StateKind};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn mp(p: f64, q: f64) -> MixingParams {
        MixingParams::new(p, q).unwrap()
    }

    #[test]
    fn energy_closed_form() {
        assert_eq!(energy_at(&mp(0.7, 0.3), 0.0), 1.0);
        assert_abs_diff_eq!(energy_at(&mp(FRAC_1_SQRT_2, FRAC_1_SQRT_2), 7.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(energy_at(&mp(0.7, 0.3), 1.0), 0.657_046_819_815_056_8, epsilon = 1e-15);
    }

    #[test]
    fn rhs_low_orders() {
        let params = mp(0.7, 0.3);
        let m = MomentVector::new(vec![1.0, 0.0, 1.3, 0.4, 3.0], 0.0).unwrap();
        let rhs = hierarchy_rhs(&m, &params);
        assert_eq!(rhs[0], 0.0);
        assert_eq!(rhs[1], 0.0);
        assert_abs_diff_eq!(rhs[2], (0.58 - 1.0) * 1.3, epsilon = 1e-14);
        assert_abs_diff_eq!(rhs[3], (0.343 + 0.027 - 1.0) * 0.4, epsilon = 1e-14);
    }

    #[test]
    fn rhs_fourth_order_gaussian() {
        // (p^4 + q^4 - 1) * 3 + 6 p^2 q^2
        let rhs = hierarchy_rhs(&MomentVector::gaussian(4).unwrap(), &mp(0.7, 0.3));
        assert_abs_diff_eq!(rhs[4], -1.9908, epsilon = 1e-13);
    }

    #[test]
    fn rk4_matches_energy_law() {
        for params in [mp(0.7, 0.3), mp(1.0, 0.5), mp(0.5, 0.5)] {
            let m = integrate_hierarchy(&MomentVector::gaussian(4).unwrap(), &params, 1.0, 1e-3).unwrap();
            let e = energy_at(&params, 1.0);
            assert!(((m.get(2) - e) / e).abs() < 1e-10);
            assert_eq!(m.time(), 1.0);
        }
        let m0 = MomentVector::new(vec![1.0, 0.0, 1.0], 0.0).unwrap();
        let params = mp(0.9, 0.2);
        let m = integrate_hierarchy(&m0, &params, 2.0, 1e-3).unwrap();
        assert!(((m.get(2) - energy_at(&params, 2.0)) / energy_at(&params, 2.0)).abs() < 1e-10);
    }

    #[test]
    fn elastic_gaussian_moments_stationary() {
        let params = mp(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let m0 = MomentVector::gaussian(6).unwrap();
        let m = integrate_hierarchy(&m0, &params, 3.0, 1e-2).unwrap();
        assert_abs_diff_eq!(m.get(2), 1.0, epsilon = 1e-10);
        for n in 0..=6 {
            assert!((m.get(n) - m0.get(n)).abs() < 1e-9, "order {n}");
        }
    }

    #[test]
    fn scaled_moments_have_unit_energy() {
        let m = integrate_hierarchy(&MomentVector::gaussian(4).unwrap(), &mp(0.7, 0.3), 1.5, 1e-3).unwrap();
        assert_abs_diff_eq!(m.scaled()[2], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn discrete_bound_fixed_point_and_limits() {
        let params = mp(0.7, 0.3);
        let delta = 0.5;
        let limit = moment_limit(&params, delta).unwrap();
        // 30-digit oracle: 4 B / |S| with B = 0.7^0.5 0.09 + 0.3^0.5 0.49
        assert_abs_diff_eq!(limit, 87.331_503_340_756_82, epsilon = 1e-9);

        let flat = discrete_moment_bound(limit, &params, delta, 1e-2, 50).unwrap();
        assert!(flat.iter().all(|d| (d - limit).abs() < 1e-9 * limit));

        let up = discrete_moment_bound(0.0, &params, delta, 1e-2, 2000).unwrap();
        assert!(up.windows(2).all(|w| w[1] > w[0]));
        assert!(up.iter().all(|&d| d <= limit));

        let down = discrete_moment_bound(10.0 * limit, &params, delta, 1e-2, 2000).unwrap();
        assert!(down.windows(2).all(|w| w[1] < w[0]));
        assert!(down.iter().all(|&d| d >= limit && d <= 10.0 * limit));
    }

    #[test]
    fn discrete_bound_rejects_inadmissible() {
        assert!(matches!(
            discrete_moment_bound(1.0, &mp(2.0, 1.0), 0.5, 1e-2, 3),
            Err(Error::InadmissibleDelta { .. })
        ));
    }

    #[test]
    fn spectral_moments_of_gaussian() {
        let grid = FrequencyGrid::new(40.0, 4097).unwrap();
        let s = SpectralState::gaussian(grid, mp(0.7, 0.3), StateKind::Unscaled);
        let m = spectral_moments(&s, 4).unwrap();
        assert_abs_diff_eq!(m.get(2), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(m.get(3), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(m.get(4), 3.0, epsilon = 1e-4);
    }

    #[test]
    fn spectral_moments_of_shifted_law() {
        // N(0.2, 1 - 0.04) has mean 0.2 and would break m1 = 0
        let grid = FrequencyGrid::new(40.0, 4097).unwrap();
        let s = SpectralState::from_fn(grid, mp(0.7, 0.3), StateKind::Unscaled, |x| {
            Complex64::new(0.0, 0.2 * x).exp() * (-0.48 * x * x).exp()
        });
        assert!(spectral_moments(&s, 4).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn discrete_bound_never_exceeds_max(d0 in 0.0f64..500.0, dt in 1e-3f64..0.5, steps in 1usize..400) {
                let params = mp(0.7, 0.3);
                let seq = discrete_moment_bound(d0, &params, 0.5, dt, steps).unwrap();
                let cap = d0.max(moment_limit(&params, 0.5).unwrap());
                prop_assert!(seq.iter().all(|&d| d <= cap * (1.0 + 1e-12)));
            }

            #[test]
            fn mass_and_momentum_rates_vanish(m2 in 0.1f64..3.0, m3 in -2.0f64..2.0, m4 in 0.1f64..20.0,
                                              p in 0.1f64..1.5, frac in 0.05f64..1.0) {
                let m = MomentVector::new(vec![1.0, 0.0, m2, m3, m4], 0.0).unwrap();
                let rhs = hierarchy_rhs(&m, &mp(p, p * frac));
                prop_assert_eq!(rhs[0], 0.0);
                prop_assert_eq!(rhs[1], 0.0);
            }
        }
    }
}
