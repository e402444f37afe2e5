//! Exact evaluation of the squared worst-case integration error
//! `||mu_g - sum_i w_i k(x_i, .)||^2` and the deterministic identities used
//! as diagnostics.

use crate::dpp::NodeSet;
use crate::error::{Error, Result};
use crate::linalg::{lu_factor, Matrix};
use crate::scalar::{real, Scalar};
use crate::spectral::SpectralModel;
use crate::weights::{CoefficientVector, WeightVector};

/// Three-term expansion of the squared worst-case error.
#[derive(Debug, Clone)]
pub struct WceReport<T> {
    /// `||mu_g||^2 - 2 mu_g(x)^T w + w^T K(x) w`.
    pub wce_squared: T,
    pub embedding_norm_squared: T,
    /// `mu_g(x)^T w`.
    pub cross_term: T,
    /// `w^T K(x) w`.
    pub quad_form: T,
    /// `eps^T Phi^-T K_N^perp(x) Phi^-1 eps`, when requested.
    pub decomposition_value: Option<T>,
}

/// Embedding value `mu_g(x) = sum_m sigma_m c_m phi_m(x)`.
pub fn embedding_eval<T: Scalar>(
    model: &SpectralModel<T>,
    g: &CoefficientVector<T>,
    x: T,
) -> Result<T> {
    if g.support() == 0 {
        // still validate the domain
        model.feature_vector(1, x)?;
        return Ok(T::zero());
    }
    let feats = model.feature_vector(g.support(), x)?;
    let mut acc = T::zero();
    for m in 1..=g.support() {
        acc += model.eigenvalue(m)? * g.coeff(m) * feats[m - 1];
    }
    Ok(acc)
}

/// `||mu_g||^2 = sum_m sigma_m c_m^2`.
pub fn embedding_norm_squared<T: Scalar>(model: &SpectralModel<T>, g: &CoefficientVector<T>) -> T {
    let mut acc = T::zero();
    for m in 1..=g.support() {
        let c = g.coeff(m);
        acc += model.eigenvalue(m).expect("m >= 1") * c * c;
    }
    acc
}

/// Assembles the exact kernel matrix `K(x)`.
fn kernel_matrix<T: Scalar>(model: &SpectralModel<T>, nodes: &NodeSet<T>) -> Result<Matrix<T>> {
    let n = nodes.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = model.kernel(nodes.points()[i], nodes.points()[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Truncated Mercer matrix `K_N(x)` for the first `n` eigenpairs.
fn mercer_matrix<T: Scalar>(model: &SpectralModel<T>, nodes: &NodeSet<T>) -> Result<Matrix<T>> {
    let n = nodes.len();
    let phi = nodes.feature_matrix();
    let sigmas: Vec<T> = (1..=n).map(|m| model.eigenvalue(m)).collect::<Result<_>>()?;
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = T::zero();
            for m in 0..n {
                acc += sigmas[m] * phi[(m, i)] * phi[(m, j)];
            }
            k[(i, j)] = acc;
            k[(j, i)] = acc;
        }
    }
    Ok(k)
}

/// Squared worst-case error of a weight vector, via the exact three-term
/// expansion. A result below the `-1e-9` roundoff floor (scaled by the
/// embedding norm) is reported as an internal-consistency error.
pub fn wce_squared<T: Scalar>(
    model: &SpectralModel<T>,
    nodes: &NodeSet<T>,
    weights: &WeightVector<T>,
    g: &CoefficientVector<T>,
) -> Result<WceReport<T>> {
    if weights.len() != nodes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} nodes",
            weights.len(),
            nodes.len()
        )));
    }
    let norm_sq = embedding_norm_squared(model, g);
    let mut cross = T::zero();
    for (&w, &x) in weights.weights().iter().zip(nodes.points()) {
        cross += w * embedding_eval(model, g, x)?;
    }
    let k = kernel_matrix(model, nodes)?;
    let quad = k.quadratic_form(weights.weights())?;
    let two = real::<T>(2.0);
    let value = norm_sq - two * cross + quad;
    let floor = real::<T>(-1e-9) * (T::one() + norm_sq);
    if value < floor {
        return Err(Error::Inconsistent(format!(
            "squared worst-case error {value} below the roundoff floor"
        )));
    }
    Ok(WceReport {
        wce_squared: value,
        embedding_norm_squared: norm_sq,
        cross_term: cross,
        quad_form: quad,
        decomposition_value: None,
    })
}

/// Error decomposition `eps^T Phi^-T (K(x) - K_N(x)) Phi^-1 eps` for
/// `g` supported on the first `N` coefficients.
pub fn error_decomposition<T: Scalar>(
    model: &SpectralModel<T>,
    nodes: &NodeSet<T>,
    g: &CoefficientVector<T>,
) -> Result<T> {
    let n = nodes.len();
    for m in n + 1..=g.support() {
        if g.coeff(m) != T::zero() {
            return Err(Error::Precondition(format!(
                "g has a nonzero coefficient at index {m} > N = {n}"
            )));
        }
    }
    let eps: Vec<T> = (1..=n).map(|m| g.coeff(m)).collect();
    let v = lu_factor(nodes.feature_matrix())?.solve(&eps)?;
    let k = kernel_matrix(model, nodes)?;
    let kn = mercer_matrix(model, nodes)?;
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            acc += v[i] * (k[(i, j)] - kn[(i, j)]) * v[j];
        }
    }
    Ok(acc)
}

/// Matrix of `tau_{n,n'} = sqrt(sigma_n sigma_n') phi_n(x)^T K_N(x)^-1 phi_n'(x)`;
/// mathematically the identity.
pub fn tau_matrix<T: Scalar>(model: &SpectralModel<T>, nodes: &NodeSet<T>) -> Result<Matrix<T>> {
    let n = nodes.len();
    let kn = mercer_matrix(model, nodes)?;
    let factorization = lu_factor(&kn)?;
    let phi = nodes.feature_matrix();
    // rows of Phi are the evaluation vectors phi_n(x)
    let mut solved = Vec::with_capacity(n);
    for m in 0..n {
        solved.push(factorization.solve(phi.row(m))?);
    }
    let sigmas: Vec<T> = (1..=n).map(|m| model.eigenvalue(m)).collect::<Result<_>>()?;
    let mut tau = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = T::zero();
            for i in 0..n {
                acc += phi[(a, i)] * solved[b][i];
            }
            tau[(a, b)] = (sigmas[a] * sigmas[b]).sqrt() * acc;
        }
    }
    Ok(tau)
}

/// One-sample value `eps^T Phi^-T phi_m(x) phi_m(x)^T Phi^-1 eps~` for a
/// spectral index `m > N`; its DPP expectation is `sum_n eps_n eps~_n`.
pub fn cross_term<T: Scalar>(
    model: &SpectralModel<T>,
    nodes: &NodeSet<T>,
    eps: &CoefficientVector<T>,
    eps_tilde: &CoefficientVector<T>,
    m: usize,
) -> Result<T> {
    let n = nodes.len();
    if m <= n {
        return Err(Error::InvalidParameter(format!(
            "spectral index m = {m} must exceed the node count N = {n}"
        )));
    }
    let factorization = lu_factor(nodes.feature_matrix())?;
    let e: Vec<T> = (1..=n).map(|i| eps.coeff(i)).collect();
    let et: Vec<T> = (1..=n).map(|i| eps_tilde.coeff(i)).collect();
    let v = factorization.solve(&e)?;
    let vt = factorization.solve(&et)?;
    let mut dot_v = T::zero();
    let mut dot_vt = T::zero();
    for (i, &x) in nodes.points().iter().enumerate() {
        let phi_m = model.eigenfunction(m, x)?;
        dot_v += phi_m * v[i];
        dot_vt += phi_m * vt[i];
    }
    Ok(dot_v * dot_vt)
}
