//! Expectations under the model by Gauss–Laguerre quadrature.
//!
//! Both implemented families map to a unit-exponential variable u (for the
//! Weibull u = (x/λ)^k), so every expectation becomes ∫₀^∞ g(u) e^{-u} du.
//! Log-likelihood derivatives carry powers of log u, which are singular at
//! u = 0 and make a plain Laguerre rule converge only like O(1/N). The
//! integral is therefore split at u = 1:
//!
//! ```text
//! ∫₁^∞ g(u) e^{-u} du = e^{-1} ∫₀^∞ g(1 + v) e^{-v} dv
//! ∫₀¹  g(u) e^{-u} du =        ∫₀^∞ g(e^{-s}) exp(-e^{-s}) e^{-s} ds
//! ```
//!
//! and each half uses the same Laguerre nodes. Both transformed integrands
//! are smooth, and the rule converges geometrically.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::models::{Model, ParamPoint};

pub const MIN_ORDER: usize = 16;
pub const MAX_ORDER: usize = 512;
/// Doubling test threshold, relative to ∫|g|.
pub const DOUBLING_TOL: f64 = 1e-9;

const ORDERS: [usize; 6] = [16, 32, 64, 128, 256, 512];

/// Nodes and weights for ∫₀^∞ f(x) e^{-x} dx.
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLaguerre {
    /// Golub–Welsch: eigenvalues of the Jacobi matrix are the nodes and the
    /// squared first eigenvector components are the weights.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut diag: Vec<f64> = (0..order).map(|i| (2 * i + 1) as f64).collect();
        let mut off: Vec<f64> = (0..order).map(|i| (i + 1) as f64).collect();
        off[order - 1] = 0.0;
        let mut first = vec![0.0; order];
        first[0] = 1.0;
        tridiagonal_ql(&mut diag, &mut off, &mut first);

        let mut pairs: Vec<(f64, f64)> = diag
            .into_iter()
            .zip(first)
            .map(|(x, z)| (x, z * z))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    /// Cached rule for one of the doubling orders 16..=512.
    pub fn cached(order: usize) -> &'static GaussLaguerre {
        static RULES: [OnceLock<GaussLaguerre>; 6] = [
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
        ];
        let slot = ORDERS
            .iter()
            .position(|&o| o == order)
            .unwrap_or_else(|| panic!("no cached Gauss-Laguerre rule of order {order}"));
        RULES[slot].get_or_init(|| GaussLaguerre::new(order))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the first
/// row of the eigenvector matrix.
///
/// `diag` is overwritten with eigenvalues; `off[i]` couples i and i+1.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations <= 100, "tridiagonal QL did not converge");

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let zf = first[i + 1];
                first[i + 1] = s * first[i] + c * zf;
                first[i] = c * first[i] - s * zf;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

fn split_rule_sum<G>(rule: &GaussLaguerre, g: &G, out: &mut [f64], abs_out: &mut [f64], buf: &mut [f64]) -> Result<()>
where
    G: Fn(f64, &mut [f64]),
{
    out.iter_mut().for_each(|v| *v = 0.0);
    abs_out.iter_mut().for_each(|v| *v = 0.0);
    let e_inv = (-1.0f64).exp();
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        if w < 1e-300 {
            continue;
        }
        // u in (1, ∞)
        let wr = w * e_inv;
        g(1.0 + x, buf);
        accumulate(out, abs_out, buf, wr, 1.0 + x)?;
        // u in (0, 1)
        let u = (-x).exp();
        if u == 0.0 {
            continue;
        }
        let wl = w * (-u).exp();
        g(u, buf);
        accumulate(out, abs_out, buf, wl, u)?;
    }
    Ok(())
}

fn accumulate(out: &mut [f64], abs_out: &mut [f64], vals: &[f64], w: f64, u: f64) -> Result<()> {
    for ((o, a), v) in out.iter_mut().zip(abs_out.iter_mut()).zip(vals) {
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation(format!("integrand at u = {u:e}")));
        }
        *o += w * v;
        *a += w * v.abs();
    }
    Ok(())
}

/// ∫₀^∞ g(u) e^{-u} du for an `m`-component integrand, doubling the order
/// from 16 until every component changes by less than 1e-9·∫|g|.
pub fn integrate_unit_exponential<G>(g: G, m: usize) -> Result<Vec<f64>>
where
    G: Fn(f64, &mut [f64]),
{
    let mut buf = vec![0.0; m];
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    let mut abs = vec![0.0; m];
    split_rule_sum(GaussLaguerre::cached(MIN_ORDER), &g, &mut prev, &mut abs, &mut buf)?;
    let mut change = f64::INFINITY;
    for &order in &ORDERS[1..] {
        split_rule_sum(GaussLaguerre::cached(order), &g, &mut cur, &mut abs, &mut buf)?;
        change = 0.0;
        let mut ok = true;
        for c in 0..m {
            let delta = (cur[c] - prev[c]).abs();
            let scale = abs[c].max(f64::MIN_POSITIVE);
            change = change.max(delta / scale);
            if delta > DOUBLING_TOL * scale {
                ok = false;
            }
        }
        if ok {
            return Ok(cur);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Err(Error::QuadratureNotConverged {
        order: MAX_ORDER,
        change,
    })
}

/// E_θ[g(X)] for a scalar function of one observation.
pub fn expect_quadrature<M, G>(model: &M, theta: &ParamPoint, g: G) -> Result<f64>
where
    M: Model + ?Sized,
    G: Fn(f64) -> f64,
{
    let v = expect_quadrature_vec(model, theta, 1, |x, out| out[0] = g(x))?;
    Ok(v[0])
}

/// E_θ[g(X)] for a vector-valued function of one observation.
pub fn expect_quadrature_vec<M, G>(model: &M, theta: &ParamPoint, m: usize, g: G) -> Result<Vec<f64>>
where
    M: Model + ?Sized,
    G: Fn(f64, &mut [f64]),
{
    model.check_params(theta.values())?;
    let th = theta.values();
    integrate_unit_exponential(
        |u, out| {
            let x = model.from_unit_exponential(th, u);
            // nodes whose observation is not representable carry less mass
            // than their own weight; drop them like underflowed u
            if x > 0.0 && x.is_finite() {
                g(x, out)
            } else {
                out.fill(0.0)
            }
        },
        m,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Exponential, Weibull};

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn laguerre_rule_integrates_polynomials() {
        let rule = GaussLaguerre::new(10);
        // ∫ x^m e^{-x} = m!
        let mut fact = 1.0;
        for m in 0..20 {
            if m > 0 {
                fact *= m as f64;
            }
            let v = rule.integrate(|x| x.powi(m));
            assert!((v - fact).abs() <= 1e-11 * fact, "m={m}: {v} vs {fact}");
        }
    }

    #[test]
    fn large_rules_are_normalised() {
        for &order in &ORDERS {
            let rule = GaussLaguerre::cached(order);
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "order {order}: {total}");
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn log_moments_converge() {
        // E[log U] = −γ, E[U log U] = 1 − γ for U ~ Exp(1)
        let v = integrate_unit_exponential(
            |u, out| {
                out[0] = u.ln();
                out[1] = u * u.ln();
            },
            2,
        )
        .unwrap();
        assert!((v[0] + EULER_GAMMA).abs() < 1e-12);
        assert!((v[1] - (1.0 - EULER_GAMMA)).abs() < 1e-12);
    }

    #[test]
    fn slowly_decaying_integrand_fails_to_converge() {
        // e^{0.999u}·e^{-u} is integrable, but far too flat for any order up to 512
        let r = integrate_unit_exponential(|u, out| out[0] = (0.999 * u).exp(), 1);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }

    #[test]
    fn normalisation_and_means() {
        let w = Weibull;
        for (k, l) in [(0.5, 2.0), (1.0, 1.0), (2.0, 0.5), (3.0, 1.5)] {
            let th = w.params(k, l).unwrap();
            let one = expect_quadrature(&w, &th, |_| 1.0).unwrap();
            assert!((one - 1.0).abs() < 1e-10);
        }
        let th = w.params(1.0, 1.0).unwrap();
        let mean = expect_quadrature(&w, &th, |x| x).unwrap();
        assert!((mean - 1.0).abs() < 1e-10);

        let e = Exponential;
        let th = e.rate(2.0).unwrap();
        let mean = expect_quadrature(&e, &th, |x| x).unwrap();
        assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weibull_shape_second_derivative_expectation() {
        let w = Weibull;
        let th = w.params(1.0, 1.0).unwrap();
        let kk = expect_quadrature(&w, &th, |x| {
            let mut h = [0.0; 4];
            w.hess(th.values(), x, &mut h);
            h[0]
        })
        .unwrap();
        let g1 = EULER_GAMMA - 1.0;
        let expected = -(6.0 * g1 * g1 + std::f64::consts::PI.powi(2)) / 6.0;
        assert!((kk - expected).abs() < 1e-10, "{kk} vs {expected}");
        assert!((kk + 1.823680).abs() < 1e-6);
    }
}
