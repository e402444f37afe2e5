//! Mercer data of the periodic Sobolev kernel on `[0, 1]`.
//!
//! The kernel of order `s` is `k_s(x, y) = 1 + sum_{m >= 1} m^{-2s} cos(2 pi m (x - y))`
//! with the uniform reference measure. Its eigenfunctions are the constant
//! function followed by the `sqrt(2) cos` / `sqrt(2) sin` pairs, and the
//! eigenvalue attached to frequency `j` is `j^{-2s} / 2` for each member of
//! the pair. Within a frequency the cosine comes first, so index `2j` is the
//! cosine and index `2j + 1` is the sine.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Smoothness order of the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    /// Integer order in `{1, 2, 3}`; kernel and trace evaluate in closed form.
    Integer(u32),
    /// General order `s > 1/2`; kernel and trace evaluate by truncated series
    /// with the given absolute tail tolerance.
    Fractional { s: f64, tol: f64 },
}

/// Eigenvalue-sequence selector used by truncated kernels and KBIQ.
#[derive(Debug, Clone, PartialEq)]
pub enum EigenvalueSequence<T> {
    /// `gamma_m = 1`, giving the projection kernel `kappa_N`.
    Unit,
    /// `gamma_m = sigma_m`, giving the truncated Mercer kernel `k_N`.
    Mercer,
    /// Explicit finite positive sequence.
    Explicit(Vec<T>),
}

impl<T: Scalar> EigenvalueSequence<T> {
    /// The `m`-th coefficient of the sequence (1-based).
    pub fn value(&self, model: &SpectralModel<T>, m: usize) -> Result<T> {
        match self {
            EigenvalueSequence::Unit => {
                if m == 0 {
                    return Err(Error::IndexOutOfRange(0));
                }
                Ok(T::one())
            }
            EigenvalueSequence::Mercer => model.eigenvalue(m),
            EigenvalueSequence::Explicit(seq) => {
                if m == 0 || m > seq.len() {
                    return Err(Error::InvalidParameter(format!(
                        "explicit gamma sequence has no entry {m}"
                    )));
                }
                let g = seq[m - 1];
                if g <= T::zero() {
                    return Err(Error::InvalidParameter(format!(
                        "gamma[{m}] = {g} is not positive"
                    )));
                }
                Ok(g)
            }
        }
    }
}

/// Mercer decomposition of the periodic Sobolev kernel of order `s`.
#[derive(Debug, Clone)]
pub struct SpectralModel<T: Scalar> {
    smoothness: Smoothness,
    trace: T,
}

impl<T: Scalar> SpectralModel<T> {
    /// Model with integer order `s` in `{1, 2, 3}` (exact closed forms).
    pub fn new(s: u32) -> Result<Self> {
        if !(1..=3).contains(&s) {
            return Err(Error::UnsupportedOrder(s as f64));
        }
        let trace = T::one() + zeta_even::<T>(s);
        Ok(Self {
            smoothness: Smoothness::Integer(s),
            trace,
        })
    }

    /// Model with a general real order `s > 1/2`, evaluated by truncated
    /// series with absolute tail tolerance `tol`.
    pub fn fractional(s: f64, tol: f64) -> Result<Self> {
        if !s.is_finite() || s <= 0.5 {
            return Err(Error::UnsupportedOrder(s));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tolerance {tol} is not positive"
            )));
        }
        let trace = T::one() + zeta_series::<T>(2.0 * s, tol);
        Ok(Self {
            smoothness: Smoothness::Fractional { s, tol },
            trace,
        })
    }

    /// The smoothness order as a real number.
    pub fn order(&self) -> f64 {
        match self.smoothness {
            Smoothness::Integer(s) => s as f64,
            Smoothness::Fractional { s, .. } => s,
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Total eigenvalue sum `1 + zeta(2s)`.
    pub fn trace(&self) -> T {
        self.trace
    }

    /// Eigenvalue `sigma_m` under the fixed ordering (1-based).
    pub fn eigenvalue(&self, m: usize) -> Result<T> {
        if m == 0 {
            return Err(Error::IndexOutOfRange(0));
        }
        if m == 1 {
            return Ok(T::one());
        }
        let j = real::<T>((m / 2) as f64);
        let half = real::<T>(0.5);
        Ok(match self.smoothness {
            Smoothness::Integer(s) => half * j.powi(-2 * s as i32),
            Smoothness::Fractional { s, .. } => half * j.powf(real(-2.0 * s)),
        })
    }

    /// Eigenfunction `phi_m(x)`: constant, then `sqrt(2) cos` / `sqrt(2) sin`
    /// pairs at frequency `m / 2`.
    pub fn eigenfunction(&self, m: usize, x: T) -> Result<T> {
        if m == 0 {
            return Err(Error::IndexOutOfRange(0));
        }
        check_domain(x)?;
        if m == 1 {
            return Ok(T::one());
        }
        let j = real::<T>((m / 2) as f64);
        let sqrt2 = real::<T>(std::f64::consts::SQRT_2);
        let angle = real::<T>(2.0 * std::f64::consts::PI) * j * x;
        Ok(if m.is_multiple_of(2) {
            sqrt2 * angle.cos()
        } else {
            sqrt2 * angle.sin()
        })
    }

    /// Evaluations `(phi_1(x), ..., phi_n(x))`, sharing one angle per frequency.
    pub fn feature_vector(&self, n: usize, x: T) -> Result<Vec<T>> {
        check_domain(x)?;
        let mut out = Vec::with_capacity(n);
        if n >= 1 {
            out.push(T::one());
        }
        let sqrt2 = real::<T>(std::f64::consts::SQRT_2);
        let two_pi_x = real::<T>(2.0 * std::f64::consts::PI) * x;
        let mut j = 1usize;
        while out.len() < n {
            let angle = two_pi_x * real::<T>(j as f64);
            out.push(sqrt2 * angle.cos());
            if out.len() < n {
                out.push(sqrt2 * angle.sin());
            }
            j += 1;
        }
        Ok(out)
    }

    /// Kernel value `k_s(x, y)`.
    ///
    /// Integer orders use the Bernoulli-polynomial closed form of the cosine
    /// series; fractional orders sum the series to the configured tolerance.
    pub fn kernel(&self, x: T, y: T) -> Result<T> {
        check_domain(x)?;
        check_domain(y)?;
        let t = x - y;
        let u = t - t.floor();
        Ok(match self.smoothness {
            Smoothness::Integer(s) => T::one() + bernoulli_cosine_sum::<T>(s, u),
            Smoothness::Fractional { s, tol } => T::one() + cosine_series::<T>(2.0 * s, u, tol),
        })
    }

    /// Truncated kernel `kappa^{gamma,M}(x, y) = sum_{m <= max_index} gamma_m phi_m(x) phi_m(y)`.
    pub fn truncated_kernel(
        &self,
        x: T,
        y: T,
        max_index: usize,
        weights: &EigenvalueSequence<T>,
    ) -> Result<T> {
        if max_index == 0 {
            return Err(Error::IndexOutOfRange(0));
        }
        let fx = self.feature_vector(max_index, x)?;
        let fy = self.feature_vector(max_index, y)?;
        let mut acc = T::zero();
        for m in 1..=max_index {
            acc += weights.value(self, m)? * fx[m - 1] * fy[m - 1];
        }
        Ok(acc)
    }

    /// Eigenvalue tail sum `r_N = sum_{m >= N+1} sigma_m = trace - sum_{m <= N} sigma_m`.
    pub fn tail_sum(&self, n: usize) -> T {
        let mut head = T::zero();
        for m in 1..=n {
            head += self.eigenvalue(m).expect("m >= 1");
        }
        self.trace - head
    }
}

fn check_domain<T: Scalar>(x: T) -> Result<()> {
    if x < T::zero() || x > T::one() || !x.is_finite() {
        return Err(Error::OutOfDomain(x.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// `zeta(2s)` for integer `s` in `{1, 2, 3}`.
fn zeta_even<T: Scalar>(s: u32) -> T {
    let pi = std::f64::consts::PI;
    match s {
        1 => real(pi * pi / 6.0),
        2 => real(pi.powi(4) / 90.0),
        3 => real(pi.powi(6) / 945.0),
        _ => unreachable!("constructor restricts s to 1..=3"),
    }
}

/// `zeta(p)` by direct summation with an integral tail bound below `tol`.
fn zeta_series<T: Scalar>(p: f64, tol: f64) -> T {
    let mut acc = T::zero();
    let mut m = 1u64;
    loop {
        acc += real::<T>((m as f64).powf(-p));
        // tail bound: sum_{k > m} k^-p <= m^(1-p) / (p - 1)
        let tail = (m as f64).powf(1.0 - p) / (p - 1.0);
        if tail < tol || m > 100_000_000 {
            return acc + real::<T>(tail / 2.0);
        }
        m += 1;
    }
}

/// `sum_{m >= 1} cos(2 pi m u) / m^{2s}` via the Bernoulli identity
/// `(-1)^{s-1} (2 pi)^{2s} B_{2s}(u) / (2 (2s)!)` for `u` in `[0, 1)`.
fn bernoulli_cosine_sum<T: Scalar>(s: u32, u: T) -> T {
    let pi2 = real::<T>(std::f64::consts::PI * std::f64::consts::PI);
    match s {
        1 => {
            // B_2(u) = u^2 - u + 1/6
            let b2 = u * u - u + real(1.0 / 6.0);
            pi2 * b2
        }
        2 => {
            // B_4(u) = u^4 - 2u^3 + u^2 - 1/30
            let u2 = u * u;
            let b4 = u2 * u2 - real::<T>(2.0) * u2 * u + u2 - real(1.0 / 30.0);
            -(pi2 * pi2 / real(3.0)) * b4
        }
        3 => {
            // B_6(u) = u^6 - 3u^5 + 5/2 u^4 - 1/2 u^2 + 1/42
            let u2 = u * u;
            let u4 = u2 * u2;
            let b6 = u4 * u2 - real::<T>(3.0) * u4 * u + real::<T>(2.5) * u4
                - real::<T>(0.5) * u2
                + real(1.0 / 42.0);
            (pi2 * pi2 * pi2) * real::<T>(2.0 / 45.0) * b6
        }
        _ => unreachable!("constructor restricts s to 1..=3"),
    }
}

/// `sum_{m >= 1} cos(2 pi m u) / m^p` truncated once the absolute tail is below `tol`.
fn cosine_series<T: Scalar>(p: f64, u: T, tol: f64) -> T {
    let two_pi_u = real::<T>(2.0 * std::f64::consts::PI) * u;
    let mut acc = T::zero();
    let mut m = 1u64;
    loop {
        acc += (two_pi_u * real::<T>(m as f64)).cos() * real::<T>((m as f64).powf(-p));
        let tail = (m as f64).powf(1.0 - p) / (p - 1.0);
        if tail < tol || m > 100_000_000 {
            return acc;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type M = SpectralModel<f64>;

    const PI: f64 = std::f64::consts::PI;

    fn model(s: u32) -> M {
        M::new(s).unwrap()
    }

    #[test]
    fn eigenvalue_closed_form() {
        let m2 = model(2);
        assert_eq!(m2.eigenvalue(1).unwrap(), 1.0);
        assert_eq!(m2.eigenvalue(2).unwrap(), 0.5);
        assert_eq!(m2.eigenvalue(3).unwrap(), 0.5);
        assert_eq!(m2.eigenvalue(4).unwrap(), 0.03125);
        assert!(m2.eigenvalue(0).is_err());
    }

    // Oracle: project the kernel onto sqrt(2) cos(2 pi j y) by high-resolution
    // quadrature and divide by the eigenfunction value at x.
    #[test]
    fn eigenvalue_matches_integration_oracle() {
        let m2 = model(2);
        let grid = 1 << 12;
        for (index, j) in [(2usize, 1usize), (4, 2)] {
            let x = 0.1;
            let mut acc = 0.0;
            for i in 0..grid {
                let y = i as f64 / grid as f64;
                let phi = (2.0 * PI * j as f64 * y).cos() * std::f64::consts::SQRT_2;
                acc += m2.kernel(x, y).unwrap() * phi;
            }
            acc /= grid as f64;
            let phi_x = (2.0 * PI * j as f64 * x).cos() * std::f64::consts::SQRT_2;
            let sigma = acc / phi_x;
            assert!(
                (sigma - m2.eigenvalue(index).unwrap()).abs() < 1e-10,
                "sigma_{index} oracle {sigma}"
            );
        }
    }

    #[test]
    fn eigenfunction_values() {
        let m2 = model(2);
        assert_eq!(m2.eigenfunction(1, 0.37).unwrap(), 1.0);
        assert!((m2.eigenfunction(2, 0.0).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((m2.eigenfunction(3, 0.25).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(m2.eigenfunction(2, 1.5).is_err());
        assert!(m2.eigenfunction(2, -0.1).is_err());
    }

    #[test]
    fn feature_vector_agrees_with_eigenfunction() {
        let m2 = model(2);
        let x = 0.317;
        let feats = m2.feature_vector(9, x).unwrap();
        for m in 1..=9 {
            assert!((feats[m - 1] - m2.eigenfunction(m, x).unwrap()).abs() < 1e-14);
        }
    }

    // Oracle for the diagonal: 1 + partial zeta(4) sum to 10^6.
    #[test]
    fn kernel_diagonal_s2() {
        let m2 = model(2);
        let mut oracle = 1.0;
        for m in 1..=1_000_000u64 {
            oracle += (m as f64).powi(-4);
        }
        let diag = m2.kernel(0.3, 0.3).unwrap();
        assert!((diag - oracle).abs() < 1e-10, "diag {diag} oracle {oracle}");
        assert!((diag - (1.0 + PI.powi(4) / 90.0)).abs() < 1e-12);
        // translation invariance
        assert!((m2.kernel(0.82, 0.82).unwrap() - diag).abs() < 1e-12);
    }

    // Oracle: alternating series 1 + sum (-1)^m / m^2 at half-period offset.
    #[test]
    fn kernel_s1_half_offset() {
        let m1 = model(1);
        let mut oracle = 1.0;
        for m in 1..=2_000_000u64 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            oracle += sign * (m as f64).powi(-2);
        }
        let v = m1.kernel(0.5, 0.0).unwrap();
        assert!((v - oracle).abs() < 1e-6, "v {v} oracle {oracle}");
        assert!((v - (1.0 + PI * PI * (-1.0 / 12.0))).abs() < 1e-12);
    }

    #[test]
    fn truncated_kernel_values() {
        let m2 = model(2);
        let unit = EigenvalueSequence::Unit;
        assert!((m2.truncated_kernel(0.3, 0.8, 1, &unit).unwrap() - 1.0).abs() < 1e-14);
        assert!((m2.truncated_kernel(0.41, 0.41, 3, &unit).unwrap() - 3.0).abs() < 1e-12);
        let mercer = EigenvalueSequence::Mercer;
        assert!((m2.truncated_kernel(0.17, 0.17, 3, &mercer).unwrap() - 2.0).abs() < 1e-12);
        let bad = EigenvalueSequence::Explicit(vec![1.0, -1.0]);
        assert!(m2.truncated_kernel(0.1, 0.2, 2, &bad).is_err());
    }

    #[test]
    fn tail_sum_values() {
        let m2 = model(2);
        let trace = 1.0 + PI.powi(4) / 90.0;
        assert!((m2.tail_sum(0) - trace).abs() < 1e-12);
        assert!((m2.tail_sum(1) - PI.powi(4) / 90.0).abs() < 1e-12);
        // Oracle: direct partial summation of the remaining eigenvalues.
        let mut oracle = 0.0;
        for m in 6..=2_000_000usize {
            let j = (m / 2) as f64;
            oracle += 0.5 * j.powi(-4);
        }
        let r5 = m2.tail_sum(5);
        assert!((r5 - oracle).abs() < 1e-10, "r5 {r5} oracle {oracle}");
        assert!((r5 - 0.0198232).abs() < 1e-6);
    }

    #[test]
    fn tail_sum_telescopes() {
        for s in [1, 2, 3] {
            let m = model(s);
            for n in 1..=100usize {
                let lhs = m.tail_sum(n - 1) - m.tail_sum(n);
                assert!((lhs - m.eigenvalue(n).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalues_non_increasing() {
        for s in [1, 2, 3] {
            let m = model(s);
            let mut prev = f64::INFINITY;
            for idx in 1..=200usize {
                let v = m.eigenvalue(idx).unwrap();
                assert!(v > 0.0 && v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn orthonormality_under_trapezoid_quadrature() {
        let m2 = model(2);
        let grid = 1 << 14;
        let k = 20usize;
        let mut feats = vec![vec![0.0; k]; grid];
        for (i, row) in feats.iter_mut().enumerate() {
            let x = i as f64 / grid as f64;
            *row = m2.feature_vector(k, x).unwrap();
        }
        for a in 0..k {
            for b in 0..k {
                let mut acc = 0.0;
                for row in &feats {
                    acc += row[a] * row[b];
                }
                acc /= grid as f64;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (acc - expect).abs() < 1e-8,
                    "gram[{a}][{b}] = {acc}"
                );
            }
        }
    }

    #[test]
    fn kernel_matrix_positive_semidefinite() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m2 = model(2);
        for _ in 0..20 {
            let nodes: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let mut k = vec![[0.0; 8]; 8];
            for i in 0..8 {
                for j in 0..8 {
                    k[i][j] = m2.kernel(nodes[i], nodes[j]).unwrap();
                }
            }
            for _ in 0..100 {
                let v: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let mut q = 0.0;
                for i in 0..8 {
                    for j in 0..8 {
                        q += v[i] * k[i][j] * v[j];
                    }
                }
                assert!(q >= -1e-9, "quadratic form {q}");
            }
        }
    }

    #[test]
    fn fractional_mode_matches_integer_closed_form() {
        let exact = model(2);
        let series = M::fractional(2.0, 1e-10).unwrap();
        for (x, y) in [(0.0, 0.0), (0.3, 0.7), (0.91, 0.13)] {
            let a = exact.kernel(x, y).unwrap();
            let b = series.kernel(x, y).unwrap();
            assert!((a - b).abs() < 1e-8, "closed {a} series {b}");
        }
        assert!((exact.trace() - series.trace()).abs() < 1e-8);
    }

    #[test]
    fn fractional_rejects_bad_order() {
        assert!(M::fractional(0.5, 1e-8).is_err());
        assert!(M::fractional(1.5, 0.0).is_err());
        assert!(M::new(4).is_err());
    }

    proptest! {
        // Closed form vs. direct series, with the integral tail bound as budget.
        #[test]
        fn bernoulli_form_matches_series(x in 0.0f64..1.0, y in 0.0f64..1.0, s in 1u32..=3) {
            let m = model(s);
            let p = 2.0 * s as f64;
            let cap = 10_000u64;
            let mut series = 1.0;
            let t = x - y;
            for k in 1..=cap {
                series += (2.0 * PI * k as f64 * t).cos() * (k as f64).powf(-p);
            }
            let tail = (cap as f64).powf(1.0 - p) / (p - 1.0);
            let closed = m.kernel(x, y).unwrap();
            prop_assert!((closed - series).abs() <= tail + 1e-9);
        }
    }
}
