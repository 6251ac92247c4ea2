//! Seeded random initial data.

use std::f64::consts::PI;

use blochscatter_core::bloch::BandStructure;
use blochscatter_core::fields::{GridFunction, TorusGrid};
use blochscatter_core::norms::h1_norm;
use blochscatter_core::propagator::{project, SpectralMask};
use blochscatter_core::Result;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::DataConfig;

/// Complex Gaussian coefficients with variance `(1+ξ²)^{-1}` on the
/// frequencies `ξ = 2πq/reference_length` with `xi_min <= |ξ| <= xi_max`,
/// times a Gaussian envelope centred on the torus, scaled to `‖u₀‖_{H¹} = ε`.
///
/// The frequency lattice does not depend on the torus, so the same seed
/// gives the same profile on every domain large enough to hold the envelope.
pub fn random_h1_data(seed: u64, eps: f64, grid: TorusGrid, spec: &DataConfig) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = 2.0 * PI / spec.reference_length;
    let qmax = (spec.xi_max / lattice).floor() as i64;
    let mut modes = Vec::new();
    for q in -qmax..=qmax {
        let xi = lattice * q as f64;
        if xi.abs() < spec.xi_min || xi.abs() > spec.xi_max {
            continue;
        }
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        modes.push((xi, Complex64::new(re, im) / (2.0 * (1.0 + xi * xi)).sqrt()));
    }
    let centre = grid.length() / 2.0;
    let w2 = 2.0 * spec.envelope_width * spec.envelope_width;
    let f = GridFunction::from_fn(grid, |x| {
        let y = x - centre;
        let wave: Complex64 = modes.iter().map(|(xi, z)| z * Complex64::from_polar(1.0, xi * y)).sum();
        wave * (-(y * y) / w2).exp()
    });
    let norm = h1_norm(&f);
    f.scaled(Complex64::new(eps / norm, 0.0))
}

/// `random_h1_data` with the lowest `drop_bands` bands projected out, rescaled back to `H¹` norm `ε`.
pub fn initial_data(seed: u64, eps: f64, spec: &DataConfig, bs: &BandStructure) -> Result<GridFunction> {
    let f = random_h1_data(seed, eps, *bs.grid(), spec);
    if spec.drop_bands == 0 {
        return Ok(f);
    }
    let keep = SpectralMask::lowest_bands(bs, spec.drop_bands)?.complement();
    let g = project(&f, &keep, bs)?;
    let norm = h1_norm(&g);
    Ok(g.scaled(Complex64::new(eps / norm, 0.0)))
}

/// Seed of the `index`-th member of a family derived from `seed`.
pub fn member_seed(seed: u64, family: u64, index: u64) -> u64 {
    seed.wrapping_add(family.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(cells: usize) -> TorusGrid {
        TorusGrid::new(2.0 * PI, cells, 16).unwrap()
    }

    #[test]
    fn h1_norm_is_exact() {
        for eps in [1e-3, 0.02, 1.0] {
            let f = random_h1_data(3, eps, grid(64), &DataConfig::default());
            assert!((h1_norm(&f) - eps).abs() <= 1e-12 * eps);
        }
    }

    #[test]
    fn same_seed_same_field() {
        let a = random_h1_data(42, 0.02, grid(32), &DataConfig::default());
        let b = random_h1_data(42, 0.02, grid(32), &DataConfig::default());
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn distinct_seeds_are_far_apart() {
        let g = grid(64);
        let spec = DataConfig::default();
        let fields: Vec<GridFunction> = (0..10).map(|s| random_h1_data(s, 1.0, g, &spec)).collect();
        for i in 0..10 {
            for j in 0..i {
                let d = fields[i].distance(&fields[j]) / fields[i].l2_norm().max(fields[j].l2_norm());
                assert!(d > 0.2, "seeds {i} and {j} are {d} apart");
            }
        }
    }

    #[test]
    fn profile_is_domain_independent() {
        let spec = DataConfig::default();
        let a = random_h1_data(5, 1.0, grid(32), &spec);
        let b = random_h1_data(5, 1.0, grid(64), &spec);
        let shift = b.len() / 2 - a.len() / 2;
        let err = (0..a.len()).map(|i| (a.values()[i] - b.values()[i + shift]).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12 * a.sup_norm(), "{err}");
    }

    #[test]
    fn member_seeds_differ() {
        assert_ne!(member_seed(0, 0, 1), member_seed(0, 1, 0));
        assert_eq!(member_seed(7, 0, 3), 10);
    }
}
