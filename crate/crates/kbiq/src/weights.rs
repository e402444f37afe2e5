//! Quadrature weight rules: EZQ, OKQ and the general KBIQ family.

use crate::dpp::NodeSet;
use crate::error::{Error, Result};
use crate::linalg::{lu_factor, Matrix};
use crate::scalar::{real, Scalar};
use crate::spectral::{EigenvalueSequence, SpectralModel};
use crate::wce::embedding_eval;

/// A function represented by finitely many coefficients on the eigenbasis:
/// `g = sum_m c_m phi_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> CoefficientVector<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite coefficient".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// The basis function `e_j = phi_j` (1-based).
    pub fn basis(j: usize) -> Self {
        assert!(j >= 1, "basis index starts at 1");
        let mut coeffs = vec![T::zero(); j];
        coeffs[j - 1] = T::one();
        Self { coeffs }
    }

    /// Coefficient `<g, phi_m>`; zero beyond the stored support.
    pub fn coeff(&self, m: usize) -> T {
        if m == 0 || m > self.coeffs.len() {
            T::zero()
        } else {
            self.coeffs[m - 1]
        }
    }

    /// Largest index with a stored coefficient.
    pub fn support(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// `||g||^2_omega = sum c_m^2`.
    pub fn norm_squared(&self) -> T {
        self.coeffs.iter().map(|&c| c * c).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Pointwise evaluation `g(x) = sum c_m phi_m(x)`.
    pub fn eval(&self, model: &SpectralModel<T>, x: T) -> Result<T> {
        if self.coeffs.is_empty() {
            return Ok(T::zero());
        }
        let feats = model.feature_vector(self.support(), x)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&feats)
            .map(|(&c, &f)| c * f)
            .sum())
    }
}

/// Which rule produced a weight vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleTag {
    Ezq,
    Okq,
    Kbiq { truncation: usize },
}

impl std::fmt::Display for RuleTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RuleTag::Ezq => write!(f, "ezq"),
            RuleTag::Okq => write!(f, "okq"),
            RuleTag::Kbiq { truncation } => write!(f, "kbiq(M={truncation})"),
        }
    }
}

/// Quadrature weights for a fixed configuration of nodes.
#[derive(Debug, Clone)]
pub struct WeightVector<T> {
    weights: Vec<T>,
    points: Vec<T>,
    rule: RuleTag,
    /// `sum_{m > N} c_m^2` silently projected away by EZQ.
    discarded_mass: T,
    condition: T,
    ill_conditioned: bool,
}

impl<T: Scalar> WeightVector<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn rule(&self) -> &RuleTag {
        &self.rule
    }

    pub fn discarded_mass(&self) -> T {
        self.discarded_mass
    }

    pub fn condition(&self) -> T {
        self.condition
    }

    pub fn ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Truncation order of a KBIQ rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Finite(usize),
    Infinite,
}

/// Parameters of the KBIQ family.
#[derive(Debug, Clone)]
pub struct KbiqParams<T> {
    pub gamma: EigenvalueSequence<T>,
    pub truncation: Truncation,
    /// Optional diagonal jitter for exploratory runs; zero by default.
    pub jitter: T,
}

impl<T: Scalar> KbiqParams<T> {
    pub fn new(gamma: EigenvalueSequence<T>, truncation: Truncation) -> Self {
        Self {
            gamma,
            truncation,
            jitter: T::zero(),
        }
    }
}

/// EZQ weights: solve `Phi_N(x) w = eps` with `eps_n = <g, phi_n>` for `n <= N`.
///
/// Coefficients above `N` are projected away; the discarded mass is recorded
/// on the returned vector.
pub fn ez_weights<T: Scalar>(nodes: &NodeSet<T>, g: &CoefficientVector<T>) -> Result<WeightVector<T>> {
    let n = nodes.len();
    let eps: Vec<T> = (1..=n).map(|m| g.coeff(m)).collect();
    let factorization = lu_factor(nodes.feature_matrix())?;
    let weights = factorization.solve(&eps)?;
    let mut discarded = T::zero();
    for m in n + 1..=g.support() {
        let c = g.coeff(m);
        discarded += c * c;
    }
    Ok(WeightVector {
        weights,
        points: nodes.points().to_vec(),
        rule: RuleTag::Ezq,
        discarded_mass: discarded,
        condition: factorization.condition_estimate(),
        ill_conditioned: false,
    })
}

/// OKQ weights: solve `K(x) w = mu_g(x)` with the exact kernel matrix.
pub fn okq_weights<T: Scalar>(
    model: &SpectralModel<T>,
    nodes: &NodeSet<T>,
    g: &CoefficientVector<T>,
) -> Result<WeightVector<T>> {
    okq_weights_jittered(model, nodes, g, T::zero())
}

/// OKQ with an opt-in diagonal jitter added to `K(x)`.
pub fn okq_weights_jittered<T: Scalar>(
    model: &SpectralModel<T>,
    nodes: &NodeSet<T>,
    g: &CoefficientVector<T>,
    jitter: T,
) -> Result<WeightVector<T>> {
    let n = nodes.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = model.kernel(nodes.points()[i], nodes.points()[j])?;
        }
        k[(i, i)] += jitter;
    }
    let mu: Vec<T> = nodes
        .points()
        .iter()
        .map(|&x| embedding_eval(model, g, x))
        .collect::<Result<_>>()?;
    let factorization = lu_factor(&k)?;
    let weights = factorization.solve(&mu)?;
    let condition = factorization.condition_estimate();
    Ok(WeightVector {
        weights,
        points: nodes.points().to_vec(),
        rule: RuleTag::Okq,
        discarded_mass: T::zero(),
        condition,
        ill_conditioned: condition > real(1e12),
    })
}

/// KBIQ weights: solve `kappa^{gamma,M}(x) w = mu_g^{gamma,M}(x)`.
///
/// `M = infinity` is only legal with the Mercer sequence, where it dispatches
/// to [`okq_weights`].
pub fn kbiq_weights<T: Scalar>(
    model: &SpectralModel<T>,
    nodes: &NodeSet<T>,
    g: &CoefficientVector<T>,
    params: &KbiqParams<T>,
) -> Result<WeightVector<T>> {
    let n = nodes.len();
    let truncation = match params.truncation {
        Truncation::Infinite => {
            if params.gamma != EigenvalueSequence::Mercer {
                return Err(Error::InvalidParameter(
                    "infinite truncation requires the Mercer eigenvalue sequence".into(),
                ));
            }
            return okq_weights_jittered(model, nodes, g, params.jitter);
        }
        Truncation::Finite(m) => m,
    };
    if truncation < n {
        return Err(Error::InvalidParameter(format!(
            "truncation M = {truncation} is below the node count N = {n}"
        )));
    }
    let gammas: Vec<T> = (1..=truncation)
        .map(|m| params.gamma.value(model, m))
        .collect::<Result<_>>()?;
    // tall feature evaluations, one column per node
    let feats: Vec<Vec<T>> = nodes
        .points()
        .iter()
        .map(|&x| model.feature_vector(truncation, x))
        .collect::<Result<_>>()?;
    let mut kappa = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = T::zero();
            for m in 0..truncation {
                acc += gammas[m] * feats[i][m] * feats[j][m];
            }
            kappa[(i, j)] = acc;
            kappa[(j, i)] = acc;
        }
        kappa[(i, i)] += params.jitter;
    }
    let mu: Vec<T> = (0..n)
        .map(|i| {
            let mut acc = T::zero();
            for m in 1..=truncation.min(g.support()) {
                acc += gammas[m - 1] * g.coeff(m) * feats[i][m - 1];
            }
            acc
        })
        .collect();
    let factorization = lu_factor(&kappa)?;
    let weights = factorization.solve(&mu)?;
    let condition = factorization.condition_estimate();
    Ok(WeightVector {
        weights,
        points: nodes.points().to_vec(),
        rule: RuleTag::Kbiq { truncation },
        discarded_mass: T::zero(),
        condition,
        ill_conditioned: condition > real(1e12),
    })
}

/// Applies the rule to a point-evaluable function: `sum_i w_i f(x_i)`.
pub fn apply_quadrature<T: Scalar>(weights: &WeightVector<T>, f: impl Fn(T) -> T) -> T {
    weights
        .weights()
        .iter()
        .zip(weights.points())
        .map(|(&w, &x)| w * f(x))
        .sum()
}

/// Fallible variant of [`apply_quadrature`]; evaluator errors propagate.
pub fn try_apply_quadrature<T: Scalar>(
    weights: &WeightVector<T>,
    f: impl Fn(T) -> Result<T>,
) -> Result<T> {
    let mut acc = T::zero();
    for (&w, &x) in weights.weights().iter().zip(weights.points()) {
        acc += w * f(x)?;
    }
    Ok(acc)
}
