//! Quadrature for dilation averages `E[F(xi * exp(eps * s))]` with `s ~ Exp(1)`.
//!
//! Both the semi-implicit step (kernel `(r/dt) tau^{-r/dt-1}` on `[1, inf)`) and
//! the stationary map (kernel `r tau^{-r-1}`) are averages of this form after
//! the substitution `tau = exp(eps * s)`, with `eps = dt/r` or `eps = 1/r`.
//! Gauss-Laguerre integrates `exp(k eps s)` to roundoff for the small `eps`
//! of interest, so mass and second moment are carried through exactly.

use gauss_quad::GaussLaguerre;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DilationRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl DilationRule {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("quadrature needs at least 2 nodes, got {n}")));
        }
        let rule = GaussLaguerre::new(n, 0.0)
            .map_err(|e| Error::InvalidConfig(format!("Gauss-Laguerre rule of degree {n}: {e}")))?;
        // Eigenvector weights are only accurate in absolute terms, which is
        // useless at the far nodes once the integrand grows like exp(k eps s).
        // Polish each node by Newton and take the weight from the recurrence.
        let (nodes, mut weights): (Vec<f64>, Vec<f64>) = rule
            .into_node_weight_pairs()
            .into_iter()
            .map(|(x0, _)| polish(n, x0))
            .unzip();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(tau_k, w_k)` pairs with `tau_k = exp(eps * s_k)`.
    pub fn dilations(&self, eps: f64) -> Vec<(f64, f64)> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| ((eps * s).exp(), w))
            .collect()
    }

    /// `sum_k w_k f(s_k)`, approximating `int_0^inf e^{-s} f(s) ds`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(s)).sum()
    }
}

/// `(L_{n-1}(x), L_n(x), L_{n+1}(x))` by the three-term recurrence.
fn laguerre(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    let mut before = 1.0;
    for k in 1..=n {
        let next = ((2 * k + 1) as f64 - x) * cur / (k + 1) as f64 - k as f64 * prev / (k + 1) as f64;
        before = prev;
        prev = cur;
        cur = next;
    }
    // after the loop: prev = L_n, cur = L_{n+1}, before = L_{n-1}
    (before, prev, cur)
}

fn polish(n: usize, mut x: f64) -> (f64, f64) {
    for _ in 0..4 {
        let (lm1, ln, _) = laguerre(n, x);
        let dl = n as f64 * (ln - lm1) / x;
        let step = ln / dl;
        x -= step;
        if step.abs() <= 1e-15 * x {
            break;
        }
    }
    let (_, _, lp1) = laguerre(n, x);
    let w = x / ((n + 1) as f64 * lp1).powi(2);
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_are_a_probability() {
        for n in [8, 16, 32, 64] {
            let rule = DilationRule::new(n).unwrap();
            assert_abs_diff_eq!(rule.integrate(|_| 1.0), 1.0, epsilon = 1e-15);
            assert!(rule.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn exact_on_low_degree_polynomials() {
        let rule = DilationRule::new(8).unwrap();
        // int s^k e^{-s} = k!
        let mut fact = 1.0;
        for k in 0..15 {
            if k > 0 {
                fact *= k as f64;
            }
            let got = rule.integrate(|s| s.powi(k));
            assert!(((got - fact) / fact).abs() < 1e-10, "k={k}: {got} vs {fact}");
        }
    }

    #[test]
    fn dilation_moments_match_kernel_moments() {
        // (r/dt) int_1^inf tau^a tau^{-r/dt-1} dtau = 1 / (1 - a dt/r)
        for (eps, n) in [(0.0021, 16), (0.21, 64), (-0.0016, 16)] {
            let rule = DilationRule::new(n).unwrap();
            for a in [2.0, 2.5] {
                let got: f64 = rule.dilations(eps).iter().map(|(t, w)| w * t.powf(a)).sum();
                assert_abs_diff_eq!(got, 1.0 / (1.0 - a * eps), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_tiny_rules() {
        assert!(DilationRule::new(1).is_err());
    }
}
