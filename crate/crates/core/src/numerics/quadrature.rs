//! Gauss–Legendre rules and a rational map onto `[0, ∞)`.

use std::f64::consts::PI;

use crate::{Error, Result};

pub const MAX_NODES: usize = 256;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_{-1}^{1} f(u) du`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }

    /// `∫_a^b f(x) dx` by the affine map of `[-1, 1]`.
    pub fn integrate_interval(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self.integrate(|u| f(mid + half * u))
    }

    /// Nodes `p_i` and Jacobian-scaled weights of the map
    /// `p = scale·(1+u)/(1−u)`, so that `∫_0^∞ f ≈ Σ w_i f(p_i)`.
    pub fn semi_infinite_points(&self, scale: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().zip(&self.weights).map(move |(&u, &w)| {
            let denom = 1.0 - u;
            (scale * (1.0 + u) / denom, w * 2.0 * scale / (denom * denom))
        })
    }
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let n = n as f64;
    let dp = n * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// `n`-point Gauss–Legendre rule, `1 <= n <= 256`.
///
/// Positive roots are found by Newton iteration from the Tricomi-style
/// initial guess and mirrored, so `nodes[i] == -nodes[n-1-i]` holds exactly.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_NODES {
        return Err(Error::invalid(format!(
            "quadrature order must be in 1..={MAX_NODES}, got {n}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == half - 1 {
            x = 0.0;
        } else {
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `∫_0^∞ f(p) dp` with `p = scale·(1+u)/(1−u)`.
///
/// Fails with [`Error::NumericalDomain`] carrying the offending `p` when `f`
/// is not finite at some node.
pub fn integrate_semi_infinite(
    f: impl Fn(f64) -> f64,
    rule: &QuadratureRule,
    scale: f64,
) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let mut total = 0.0;
    for (p, w) in rule.semi_infinite_points(scale) {
        let v = f(p);
        if !v.is_finite() {
            return Err(Error::NumericalDomain {
                message: format!("integrand evaluated to {v}"),
                at: p,
            });
        }
        total += w * v;
    }
    Ok(total)
}
