//! Exact sampling of the projection DPP with marginal kernel
//! `kappa_N(x, y) = sum_{n <= N} phi_n(x) phi_n(y)` on `[0, 1]`.
//!
//! Points are drawn one at a time from the chain-rule conditionals, each
//! realized by rejection against the uniform proposal. The residual of the
//! conditional is maintained by Gram-Schmidt on the feature vectors of the
//! points already accepted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, Matrix};
use crate::scalar::{real, Scalar};
use crate::spectral::SpectralModel;

const MAX_PROPOSALS_PER_POINT: u64 = 1_000_000;

/// Reproducible counter-based random stream: the same `(seed, stream)` pair
/// always yields the same sequence, and distinct stream ids are independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fresh stream with the next id, for full resamples.
    pub fn next_stream(&self) -> Self {
        Self::new(self.seed, self.stream.wrapping_add(1))
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

/// An ordered DPP configuration with its cached feature matrix
/// `Phi_N(x)[n, i] = phi_n(x_i)`.
#[derive(Debug, Clone)]
pub struct NodeSet<T: Scalar> {
    points: Vec<T>,
    feature_matrix: Matrix<T>,
    seed_used: u64,
    stream_used: u64,
    rejection_count: u64,
}

impl<T: Scalar> NodeSet<T> {
    /// Wraps user-supplied nodes, validating the domain and distinctness.
    pub fn from_points(model: &SpectralModel<T>, points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty node set".into()));
        }
        for (i, &a) in points.iter().enumerate() {
            for &b in points.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate node at x = {a}"
                    )));
                }
            }
        }
        let feature_matrix = assemble_features(model, &points)?;
        Ok(Self {
            points,
            feature_matrix,
            seed_used: 0,
            stream_used: 0,
            rejection_count: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// `Phi_N(x)` with rows indexed by the basis and columns by the nodes.
    pub fn feature_matrix(&self) -> &Matrix<T> {
        &self.feature_matrix
    }

    pub fn seed_used(&self) -> u64 {
        self.seed_used
    }

    pub fn stream_used(&self) -> u64 {
        self.stream_used
    }

    pub fn rejection_count(&self) -> u64 {
        self.rejection_count
    }
}

fn assemble_features<T: Scalar>(model: &SpectralModel<T>, points: &[T]) -> Result<Matrix<T>> {
    let n = points.len();
    let mut phi = Matrix::zeros(n, n);
    for (i, &x) in points.iter().enumerate() {
        let col = model.feature_vector(n, x)?;
        for (row, &v) in col.iter().enumerate() {
            phi[(row, i)] = v;
        }
    }
    Ok(phi)
}

/// Upper bound of `kappa_N(x, x)`: `N` when the top index completes a
/// cos/sin pair (odd `N`), else `N + 1`.
fn diagonal_envelope(n: usize) -> f64 {
    if n % 2 == 1 {
        n as f64
    } else {
        (n + 1) as f64
    }
}

/// Draws one configuration of the projection DPP with `n` points.
pub fn sample_projection_dpp<T: Scalar>(
    model: &SpectralModel<T>,
    n: usize,
    rng: &mut RngStream,
) -> Result<NodeSet<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    let envelope = diagonal_envelope(n);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut points: Vec<T> = Vec::with_capacity(n);
    let mut rejections = 0u64;
    for i in 0..n {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            if proposals > MAX_PROPOSALS_PER_POINT {
                return Err(Error::SamplerStall {
                    index: i,
                    proposals,
                });
            }
            let x: T = real(rng.uniform());
            let feat = model.feature_vector(n, x)?;
            let mut residual: T = feat.iter().map(|&v| v * v).sum();
            for b in &basis {
                let dot: T = feat.iter().zip(b).map(|(&a, &c)| a * c).sum();
                residual -= dot * dot;
            }
            let accept = rng.uniform() * envelope;
            if accept < residual.to_f64().unwrap_or(0.0).max(0.0) {
                // orthonormalize the accepted feature vector into the basis
                let mut r = feat;
                for b in &basis {
                    let dot: T = r.iter().zip(b).map(|(&a, &c)| a * c).sum();
                    for (rv, &bv) in r.iter_mut().zip(b) {
                        *rv -= dot * bv;
                    }
                }
                let norm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
                if norm <= T::epsilon().sqrt() {
                    // numerically coincident with the span of previous points
                    rejections += 1;
                    continue;
                }
                for rv in r.iter_mut() {
                    *rv /= norm;
                }
                basis.push(r);
                points.push(x);
                rejections += proposals - 1;
                break;
            }
        }
    }
    let feature_matrix = assemble_features(model, &points)?;
    Ok(NodeSet {
        points,
        feature_matrix,
        seed_used: rng.seed(),
        stream_used: rng.stream(),
        rejection_count: rejections,
    })
}

/// Joint density `(1/N!) det^2 Phi_N(x)` of a configuration; exactly `0` when
/// the feature matrix is singular.
pub fn joint_density<T: Scalar>(nodes: &NodeSet<T>) -> T {
    density_from_features(nodes.len(), nodes.feature_matrix())
}

/// Joint density of raw points, without the distinctness guard of
/// [`NodeSet::from_points`]; coincident points yield exactly `0`.
pub fn joint_density_of_points<T: Scalar>(model: &SpectralModel<T>, points: &[T]) -> Result<T> {
    let phi = assemble_features(model, points)?;
    Ok(density_from_features(points.len(), &phi))
}

fn density_from_features<T: Scalar>(n: usize, phi: &Matrix<T>) -> T {
    let factorization = match lu_factor(phi) {
        Ok(f) => f,
        Err(_) => return T::zero(),
    };
    let mut log_nfact = T::zero();
    for k in 2..=n {
        log_nfact += real::<T>(k as f64).ln();
    }
    let two = real::<T>(2.0);
    (two * factorization.log_abs_det() - log_nfact).exp()
}

/// Chain-rule conditional density of the next point given `prev`, for a
/// configuration of `total` points: `residual(x) / (N - |prev|)`.
pub fn conditional_density<T: Scalar>(
    model: &SpectralModel<T>,
    total: usize,
    prev: &[T],
    x: T,
) -> Result<T> {
    if prev.len() >= total {
        return Err(Error::InvalidParameter(
            "conditional requested past the configuration size".into(),
        ));
    }
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(prev.len());
    for &p in prev {
        let mut r = model.feature_vector(total, p)?;
        for b in &basis {
            let dot: T = r.iter().zip(b).map(|(&a, &c)| a * c).sum();
            for (rv, &bv) in r.iter_mut().zip(b) {
                *rv -= dot * bv;
            }
        }
        let norm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm <= T::epsilon().sqrt() {
            return Err(Error::Precondition(
                "previous points have a singular feature system".into(),
            ));
        }
        for rv in r.iter_mut() {
            *rv /= norm;
        }
        basis.push(r);
    }
    let feat = model.feature_vector(total, x)?;
    let mut residual: T = feat.iter().map(|&v| v * v).sum();
    for b in &basis {
        let dot: T = feat.iter().zip(b).map(|(&a, &c)| a * c).sum();
        residual -= dot * dot;
    }
    Ok(residual.max(T::zero()) / real::<T>((total - prev.len()) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralModel;

    fn model() -> SpectralModel<f64> {
        SpectralModel::new(2).unwrap()
    }

    #[test]
    fn single_point_is_uniform() {
        let m = model();
        let mut rng = RngStream::new(11, 0);
        let trials = 20_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let nodes = sample_projection_dpp(&m, 1, &mut rng).unwrap();
            sum += nodes.points()[0];
        }
        let mean = sum / trials as f64;
        // Var of U[0,1] is 1/12
        let se = (1.0 / 12.0f64 / trials as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn joint_density_known_values() {
        let m = model();
        let one = NodeSet::from_points(&m, vec![0.42]).unwrap();
        assert!((joint_density(&one) - 1.0).abs() < 1e-12);
        // hand determinant: Phi = [[1, 1], [sqrt2, 0]], det = -sqrt2
        let two = NodeSet::from_points(&m, vec![0.0, 0.25]).unwrap();
        assert!((joint_density(&two) - 1.0).abs() < 1e-12);
        assert!(NodeSet::from_points(&m, vec![0.3, 0.3]).is_err());
    }

    #[test]
    fn joint_density_zero_for_duplicated_point() {
        let m = model();
        assert_eq!(joint_density_of_points(&m, &[0.3, 0.3]).unwrap(), 0.0);
        let mut rng = RngStream::new(5, 0);
        let nodes = sample_projection_dpp(&m, 3, &mut rng).unwrap();
        assert!(joint_density(&nodes) > 0.0);
    }

    #[test]
    fn chain_rule_matches_joint_density_on_grid() {
        let m = model();
        let grid = 40;
        for a in 0..grid {
            for b in 0..grid {
                let x1 = (a as f64 + 0.5) / grid as f64;
                let x2 = (b as f64 + 0.5) / grid as f64;
                let p1 = conditional_density(&m, 2, &[], x1).unwrap();
                let p2 = conditional_density(&m, 2, &[x1], x2).unwrap();
                let joint = joint_density_of_points(&m, &[x1, x2]).unwrap();
                assert!(
                    (p1 * p2 - joint).abs() < 1e-10,
                    "({x1}, {x2}): chain {} joint {joint}",
                    p1 * p2
                );
            }
        }
    }

    #[test]
    fn conditionals_integrate_to_one() {
        let m = model();
        let grid = 1 << 14;
        let mut rng = RngStream::new(9, 0);
        for n in 2..=6usize {
            let nodes = sample_projection_dpp(&m, n, &mut rng).unwrap();
            for step in 0..n {
                let prev = &nodes.points()[..step];
                let mut acc = 0.0;
                for i in 0..grid {
                    let x = i as f64 / grid as f64;
                    acc += conditional_density(&m, n, prev, x).unwrap();
                }
                acc /= grid as f64;
                assert!((acc - 1.0).abs() < 1e-3, "n={n} step={step} mass {acc}");
            }
        }
    }

    #[test]
    fn one_point_intensity_for_odd_n() {
        let m = model();
        let mut rng = RngStream::new(1234, 0);
        let trials = 50_000;
        let mut sum_x = 0.0;
        let mut sum_x2 = 0.0;
        let mut sq_x = 0.0;
        let mut sq_x2 = 0.0;
        for _ in 0..trials {
            let nodes = sample_projection_dpp(&m, 3, &mut rng).unwrap();
            let sx: f64 = nodes.points().iter().sum();
            let sx2: f64 = nodes.points().iter().map(|x| x * x).sum();
            sum_x += sx;
            sum_x2 += sx2;
            sq_x += sx * sx;
            sq_x2 += sx2 * sx2;
        }
        let t = trials as f64;
        // constant intensity kappa_3(x,x) = 3: targets 3 * int g
        for (sum, sq, target) in [(sum_x, sq_x, 1.5), (sum_x2, sq_x2, 1.0)] {
            let mean = sum / t;
            let var = (sq / t - mean * mean).max(0.0);
            let se = (var / t).sqrt();
            assert!((mean - target).abs() < 3.0 * se, "mean {mean} target {target}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let m = model();
        let a = sample_projection_dpp(&m, 5, &mut RngStream::new(42, 7)).unwrap();
        let b = sample_projection_dpp(&m, 5, &mut RngStream::new(42, 7)).unwrap();
        assert_eq!(a.points(), b.points());
        let c = sample_projection_dpp(&m, 5, &mut RngStream::new(42, 8)).unwrap();
        assert_ne!(a.points(), c.points());
    }

    #[test]
    fn symmetrized_marginal_matches_intensity_for_n2() {
        // empirical density of a uniformly chosen point of the pair tracks
        // kappa_2(x,x)/2 = (1 + 2cos^2(2 pi x)) / 2
        let m = model();
        let mut rng = RngStream::new(77, 0);
        let trials = 40_000;
        let bins = 20;
        let mut hist = vec![0.0f64; bins];
        for _ in 0..trials {
            let nodes = sample_projection_dpp(&m, 2, &mut rng).unwrap();
            for &x in nodes.points() {
                hist[((x * bins as f64) as usize).min(bins - 1)] += 1.0;
            }
        }
        for (b, count) in hist.iter().enumerate() {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            // bin mass under the intensity kappa_2(x,x)/2, 64-point midpoint rule
            let mut mass = 0.0;
            let sub = 64;
            for i in 0..sub {
                let x = lo + (hi - lo) * (i as f64 + 0.5) / sub as f64;
                let c = (2.0 * std::f64::consts::PI * x).cos();
                mass += (1.0 + 2.0 * c * c) / 2.0;
            }
            mass *= (hi - lo) / sub as f64;
            let expected = 2.0 * trials as f64 * mass;
            let se = expected.sqrt();
            let got = *count;
            assert!(
                (got - expected).abs() < 5.0 * se,
                "bin {b}: got {got} expected {expected}"
            );
        }
    }
}
