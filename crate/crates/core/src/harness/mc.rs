use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::ar::{build_kernel, ArKernelSpec};
use crate::ergodicity::invariant_measure;
use crate::error::{Error, Result};
use crate::weighted_space::{dual_distance, SignedDensity, WeightSpec};

pub const RNG_NAME: &str = "ChaCha20 (rand_chacha)";

#[derive(Debug, Clone, Serialize)]
pub struct McOracleResult {
    pub sample_count: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub rng: &'static str,
    #[serde(skip)]
    pub histogram: SignedDensity,
    /// Fraction of samples outside `[-X, X]`.
    pub outside_fraction: f64,
    /// TV distance to the quadrature invariant measure, outside mass included.
    pub tv_distance: f64,
    /// Expected sampling contribution to the TV distance,
    /// `sum_i sqrt(2 p_i (1 - p_i) / (pi N_eff))` with `N_eff = N (1 - |alpha|) / (1 + |alpha|)`.
    pub half_width: f64,
}

/// Simulates the chain from `X_0 = 0` and bins post-burn-in states into the
/// grid's midpoint cells.
pub fn mc_oracle(spec: &ArKernelSpec, n_samples: usize, burn_in: usize, seed: u64) -> Result<McOracleResult> {
    if n_samples == 0 || n_samples < 10 * burn_in {
        return Err(Error::InvalidParameter(format!(
            "need n_samples >= 10 * burn_in, got {n_samples} and {burn_in}"
        )));
    }
    let pi = invariant_measure(&build_kernel(spec)?)?;
    let (hist, outside) = simulate(spec, n_samples, burn_in, seed);
    let tv = dual_distance(&hist, &pi, WeightSpec { r: 1.0, beta: 0.0 })? + outside;
    let a = spec.alpha.abs();
    let n_eff = n_samples as f64 * (1.0 - a) / (1.0 + a);
    let half_width = pi
        .masses()
        .iter()
        .map(|&p| {
            let p = p.clamp(0.0, 1.0);
            (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n_eff)).sqrt()
        })
        .sum();
    Ok(McOracleResult {
        sample_count: n_samples,
        burn_in,
        seed,
        rng: RNG_NAME,
        histogram: hist,
        outside_fraction: outside,
        tv_distance: tv,
        half_width,
    })
}

fn simulate(spec: &ArKernelSpec, n_samples: usize, burn_in: usize, seed: u64) -> (SignedDensity, f64) {
    let grid = &spec.grid;
    let nodes = grid.nodes();
    let n = nodes.len();
    let edges: Vec<f64> = (0..=n)
        .map(|i| match i {
            0 => -grid.x_max(),
            i if i == n => grid.x_max(),
            i => 0.5 * (nodes[i - 1] + nodes[i]),
        })
        .collect();
    let mut counts = vec![0u64; n];
    let mut outside = 0u64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = 0.0;
    for step in 0..burn_in + n_samples {
        x = spec.alpha * x + spec.noise.family.sample(&mut rng);
        if step < burn_in {
            continue;
        }
        if x < edges[0] || x > edges[n] {
            outside += 1;
        } else {
            let cell = edges.partition_point(|&e| e <= x).clamp(1, n) - 1;
            counts[cell] += 1;
        }
    }
    let total = n_samples as f64;
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    (
        SignedDensity::from_masses(grid, &masses).expect("grid-sized masses"),
        outside as f64 / total,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::{NoiseFamily, NoiseModel};
    use crate::weighted_space::Grid;

    fn spec(alpha: f64) -> ArKernelSpec {
        ArKernelSpec::new(alpha, NoiseModel::new(NoiseFamily::gaussian(1.0), 1.0).unwrap(), Grid::uniform(201, 10.0).unwrap())
            .unwrap()
            .with_tau_trunc(1e-6)
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = mc_oracle(&spec(0.5), 20_000, 100, 7).unwrap();
        let b = mc_oracle(&spec(0.5), 20_000, 100, 7).unwrap();
        assert_eq!(a.histogram.density(), b.histogram.density());
        assert_eq!(a.tv_distance, b.tv_distance);
        let c = mc_oracle(&spec(0.5), 20_000, 100, 8).unwrap();
        assert_ne!(a.tv_distance, c.tv_distance);
    }

    #[test]
    fn histogram_is_a_probability() {
        let r = mc_oracle(&spec(0.3), 50_000, 100, 1).unwrap();
        assert!((r.histogram.total_mass() + r.outside_fraction - 1.0).abs() < 1e-12);
        assert!(r.tv_distance < 4.0 * r.half_width, "{} vs {}", r.tv_distance, r.half_width);
    }

    #[test]
    fn burn_in_precondition() {
        assert!(mc_oracle(&spec(0.3), 999, 100, 1).is_err());
    }
}
