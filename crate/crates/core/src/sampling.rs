//! Seeded random variate generation.
//!
//! Every random quantity in the crate is drawn from a [`RngStream`], a
//! value-like `(seed, substream_id)` pair that expands into a ChaCha8
//! counter-based generator. Two streams with the same pair always produce the
//! same sequence, so parallel workers that each own a derived substream give
//! bit-identical results under any thread schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The concrete generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// Descriptor of a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub substream_id: u64,
}

/// Build the stream identified by `(seed, substream_id)`.
pub fn derive_stream(seed: u64, substream_id: u64) -> RngStream {
    RngStream { seed, substream_id }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    /// Instantiate a fresh generator positioned at the start of the stream.
    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.substream_id);
        rng
    }

    /// Derive an independent stream nested under this one.
    ///
    /// Used for hierarchical work splitting (replication `b`, then Monte Carlo
    /// sample `i` inside it).
    pub fn child(&self, id: u64) -> RngStream {
        let seed = splitmix64(self.seed ^ splitmix64(self.substream_id.wrapping_add(0xA5A5_A5A5)));
        RngStream { seed, substream_id: id }
    }
}

/// Beta(1, eta) by inversion: `1 - U^(1/eta)`.
pub fn sample_beta_1_eta<R: Rng + ?Sized>(rng: &mut R, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::param(format!("Beta(1, eta) requires eta > 0, got {eta}")));
    }
    let u: f64 = rng.gen();
    Ok((1.0 - u.powf(1.0 / eta)).clamp(0.0, 1.0))
}

/// Gamma(shape, 1). Valid for any positive shape, including shape < 1.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> Result<f64> {
    gamma_dist(shape).map(|g| g.sample(rng))
}

fn gamma_dist(shape: f64) -> Result<Gamma<f64>> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::param(format!("Gamma shape must be positive, got {shape}")));
    }
    Gamma::new(shape, 1.0).map_err(|e| Error::param(e.to_string()))
}

/// Symmetric Dirichlet of dimension `t` with every component parameter `conc`,
/// obtained by normalizing independent Gamma(conc, 1) draws.
pub fn sample_dirichlet_symmetric<R: Rng + ?Sized>(rng: &mut R, t: usize, conc: f64) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::param("Dirichlet dimension must be at least 1"));
    }
    let gamma = gamma_dist(conc)?;
    if t == 1 {
        return Ok(vec![1.0]);
    }
    // All-zero draws are possible in floating point at tiny shapes.
    for _ in 0..2 {
        let mut w: Vec<f64> = (0..t).map(|_| gamma.sample(rng)).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 && total.is_finite() {
            w.iter_mut().for_each(|x| *x /= total);
            return Ok(w);
        }
    }
    Err(Error::numeric(format!(
        "Dirichlet({t}; {conc}) gamma draws underflowed to zero twice"
    )))
}

/// Standard normal variate.
pub fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Zero-mean Gaussian vector with unit variances and pairwise correlation
/// `rho`, built as `sqrt(rho) z0 + sqrt(1 - rho) z_j`.
pub fn sample_mvn_compound_symmetry<R: Rng + ?Sized>(rng: &mut R, d: usize, rho: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::param(format!("compound-symmetry rho must lie in [0, 1), got {rho}")));
    }
    let shared = rho.sqrt() * sample_standard_normal(rng);
    let own = (1.0 - rho).sqrt();
    Ok((0..d).map(|_| shared + own * sample_standard_normal(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn same_stream_same_sequence() {
        let a: Vec<f64> = {
            let mut r = derive_stream(42, 0).rng();
            (0..1000).map(|_| r.gen()).collect()
        };
        let b: Vec<f64> = {
            let mut r = derive_stream(42, 0).rng();
            (0..1000).map(|_| r.gen()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_substreams_differ() {
        let x: f64 = derive_stream(42, 0).rng().gen();
        let y: f64 = derive_stream(42, 1).rng().gen();
        assert_ne!(x, y);
        let c0: u64 = derive_stream(42, 0).child(0).rng().gen();
        let c1: u64 = derive_stream(42, 1).child(0).rng().gen();
        assert_ne!(c0, c1);
    }

    #[test]
    fn stream_identical_across_threads() {
        let expected: Vec<u64> = {
            let mut r = derive_stream(42, 5).rng();
            (0..100).map(|_| r.gen()).collect()
        };
        let handles: Vec<_> = (0..8)
            .map(|_| {
                std::thread::spawn(|| {
                    let mut r = derive_stream(42, 5).rng();
                    (0..100).map(|_| r.gen::<u64>()).collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    }

    #[test]
    fn beta_one_one_is_uniform() {
        let mut r = derive_stream(1, 0).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| sample_beta_1_eta(&mut r, 1.0).unwrap()).collect();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 0.5).abs() < 3.0 * se, "mean {m} se {se}");
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn beta_mean_matches_one_over_one_plus_eta() {
        let mut r = derive_stream(2, 0).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| sample_beta_1_eta(&mut r, 9.0).unwrap()).collect();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 0.1).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn beta_rejects_nonpositive_eta() {
        let mut r = derive_stream(0, 0).rng();
        assert!(matches!(sample_beta_1_eta(&mut r, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(sample_beta_1_eta(&mut r, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn gamma_means() {
        for (seed, shape) in [(3u64, 1.0), (4, 2.6)] {
            let mut r = derive_stream(seed, 0).rng();
            let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(&mut r, shape).unwrap()).collect();
            let (m, se) = mean_and_se(&xs);
            assert!((m - shape).abs() < 3.0 * se, "shape {shape}: mean {m} se {se}");
        }
    }

    #[test]
    fn gamma_small_shape_is_positive_and_finite() {
        let mut r = derive_stream(5, 0).rng();
        for _ in 0..10_000 {
            let g = sample_gamma(&mut r, 0.05).unwrap();
            assert!(g > 0.0 && g.is_finite());
        }
        assert!(sample_gamma(&mut r, 0.0).is_err());
    }

    #[test]
    fn dirichlet_single_atom() {
        let mut r = derive_stream(6, 0).rng();
        assert_eq!(sample_dirichlet_symmetric(&mut r, 1, 0.3).unwrap(), vec![1.0]);
    }

    #[test]
    fn dirichlet_component_mean() {
        let mut r = derive_stream(7, 0).rng();
        let draws: Vec<Vec<f64>> = (0..10_000)
            .map(|_| sample_dirichlet_symmetric(&mut r, 50, 2.0).unwrap())
            .collect();
        for w in &draws {
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        for j in [0usize, 17, 49] {
            let col: Vec<f64> = draws.iter().map(|w| w[j]).collect();
            let (m, se) = mean_and_se(&col);
            assert!((m - 0.02).abs() < 3.0 * se, "component {j}: {m} se {se}");
        }
    }

    #[test]
    fn compound_symmetry_moments() {
        let mut r = derive_stream(8, 0).rng();
        let n = 100_000;
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| sample_mvn_compound_symmetry(&mut r, 2, 0.3).unwrap())
            .collect();
        let cov = xs.iter().map(|v| v[0] * v[1]).sum::<f64>() / n as f64;
        let v0 = xs.iter().map(|v| v[0] * v[0]).sum::<f64>() / n as f64;
        let v1 = xs.iter().map(|v| v[1] * v[1]).sum::<f64>() / n as f64;
        let corr = cov / (v0 * v1).sqrt();
        assert!((0.27..=0.33).contains(&corr), "corr {corr}");
        // Var of x^2 for a unit normal is 2, so se of the variance estimate is sqrt(2/n).
        let se = (2.0 / n as f64).sqrt();
        assert!((v0 - 1.0).abs() < 3.0 * se && (v1 - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn compound_symmetry_rho_zero_is_independent() {
        let mut r = derive_stream(9, 0).rng();
        let n = 100_000;
        let prods: Vec<f64> = (0..n)
            .map(|_| {
                let v = sample_mvn_compound_symmetry(&mut r, 3, 0.0).unwrap();
                v[0] * v[2]
            })
            .collect();
        let (m, se) = mean_and_se(&prods);
        assert!(m.abs() < 3.0 * se);
    }

    #[test]
    fn compound_symmetry_rejects_bad_rho() {
        let mut r = derive_stream(0, 0).rng();
        assert!(sample_mvn_compound_symmetry(&mut r, 2, 1.0).is_err());
        assert!(sample_mvn_compound_symmetry(&mut r, 2, -0.1).is_err());
    }
}
