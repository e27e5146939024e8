//! First-order bias expansions.
//!
//! For per-observation cumulants
//!
//! ```text
//! κᵢⱼ = E[ℓᵢⱼ],   κᵢⱼₗ = E[ℓᵢⱼₗ],   κᵢⱼ⁽ˡ⁾ = ∂κᵢⱼ/∂θₗ
//! ```
//!
//! the Cox–Snell bias of the MLE in Cordeiro–Klein matrix form is
//! K⁻¹ A vec(K⁻¹), with K = nI the full-sample information and A = nĀ the
//! full-sample cumulant matrix whose (i, ·) row is laid out in blocks
//! [Ā⁽¹⁾ | … | Ā⁽ᵈ⁾], āᵢⱼˡ = κᵢⱼ⁽ˡ⁾ − ½κᵢⱼₗ. The n's collapse to
//!
//! ```text
//! bias = (1/n) · I⁻¹ Ā vec(I⁻¹)
//! ```
//!
//! with vec the column-stacking operator. The same quantity is also
//! available as the explicit triple sum Σᵢⱼₗ κ^{si} κ^{jl} āᵢⱼˡ; the two
//! must agree, which pins down the block layout.
//!
//! The Wallace–Freeman bias adds the penalty-driven shift (1/n) I⁻¹ a(θ).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::predicted_shift;
use crate::models::{Model, ParamPoint};
use crate::numerics::{central_jacobian, expect_quadrature_vec, Matrix, StepRule, Tensor3};
use crate::priors::Prior;

/// Third-order cumulants whose permutations disagree by more than this
/// indicate a derivative bug.
pub const SYMMETRY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct CumulantSet {
    /// κᵢⱼ = E[ℓᵢⱼ] (equals −I).
    pub kappa2: Matrix,
    /// κᵢⱼₗ = E[ℓᵢⱼₗ].
    pub kappa3: Tensor3,
    /// κᵢⱼ⁽ˡ⁾ = ∂κᵢⱼ/∂θₗ, indexed (i, j, l).
    pub kappa2_grad: Tensor3,
    /// d × d² matrix, column l·d + j of row i holds κᵢⱼ⁽ˡ⁾ − ½κᵢⱼₗ.
    pub a_bar: Matrix,
}

impl CumulantSet {
    pub fn dim(&self) -> usize {
        self.kappa2.rows()
    }

    /// max |−κᵢⱼ − Iᵢⱼ|.
    pub fn bartlett_gap(&self, fisher: &Matrix) -> f64 {
        self.kappa2
            .entries()
            .iter()
            .zip(fisher.entries())
            .fold(0.0_f64, |m, (k, i)| m.max((k + i).abs()))
    }
}

/// Expected second and third log-density derivatives by quadrature;
/// κᵢⱼ⁽ˡ⁾ by central differences of the analytic −I(θ).
pub fn compute_cumulants(model: &dyn Model, theta: &ParamPoint) -> Result<CumulantSet> {
    let d = model.dim();
    let th = theta.values();
    let d2 = d * d;
    let d3 = d2 * d;
    let moments = expect_quadrature_vec(model, theta, d2 + d3, |x, out| {
        let (h, t) = out.split_at_mut(d2);
        model.hess(th, x, h);
        model.third(th, x, t);
    })?;

    let kappa2 = Matrix::from_row_major(d, d, moments[..d2].to_vec());
    let kappa3 = Tensor3::from_entries(d, moments[d2..].to_vec());
    let asym = kappa3.max_permutation_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::SymmetryViolation(asym));
    }

    let jac = central_jacobian(
        |t| Ok(model.fisher(t)?.entries().iter().map(|v| -v).collect()),
        th,
        StepRule::Scaled,
    )?;
    let mut kappa2_grad = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                kappa2_grad[(i, j, l)] = jac[(i * d + j, l)];
            }
        }
    }

    let mut a_bar = Matrix::zeros(d, d2);
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                a_bar[(i, l * d + j)] = kappa2_grad[(i, j, l)] - 0.5 * kappa3[(i, j, l)];
            }
        }
    }

    Ok(CumulantSet {
        kappa2,
        kappa3,
        kappa2_grad,
        a_bar,
    })
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        Err(Error::invalid("sample size must be at least 1"))
    } else {
        Ok(n as f64)
    }
}

/// (1/n) I⁻¹ Ā vec(I⁻¹).
pub fn cox_snell_matrix_form(fisher: &Matrix, cumulants: &CumulantSet, n: usize) -> Result<Vec<f64>> {
    let n = check_n(n)?;
    let inv = fisher.inverse_spd()?;
    let inner = cumulants.a_bar.mul_vec(&inv.vec());
    Ok(inv.mul_vec(&inner).into_iter().map(|v| v / n).collect())
}

/// (1/n) Σᵢⱼₗ κ^{si} κ^{jl} (κᵢⱼ⁽ˡ⁾ − ½κᵢⱼₗ), with κ^{..} entries of I⁻¹.
pub fn cox_snell_triple_sum(fisher: &Matrix, cumulants: &CumulantSet, n: usize) -> Result<Vec<f64>> {
    let n = check_n(n)?;
    let inv = fisher.inverse_spd()?;
    let d = cumulants.dim();
    let mut out = vec![0.0; d];
    for (s, o) in out.iter_mut().enumerate() {
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    *o += inv[(s, i)]
                        * inv[(j, l)]
                        * (cumulants.kappa2_grad[(i, j, l)] - 0.5 * cumulants.kappa3[(i, j, l)]);
                }
            }
        }
        *o /= n;
    }
    Ok(out)
}

/// First-order bias of the MLE at θ for samples of size n.
pub fn cox_snell_bias(model: &dyn Model, theta: &ParamPoint, n: usize) -> Result<Vec<f64>> {
    let cumulants = compute_cumulants(model, theta)?;
    let fisher = model.fisher(theta.values())?;
    cox_snell_matrix_form(&fisher, &cumulants, n)
}

/// First-order bias of the Wallace–Freeman estimator: Cox–Snell plus
/// (1/n) I⁻¹ a(θ).
pub fn wf_bias(model: &dyn Model, prior: &Prior, theta: &ParamPoint, n: usize) -> Result<Vec<f64>> {
    let mle = cox_snell_bias(model, theta, n)?;
    let shift = predicted_shift(model, prior, theta, n)?;
    Ok(mle.iter().zip(&shift).map(|(b, s)| b + s).collect())
}
