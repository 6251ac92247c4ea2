#![allow(dead_code)]

use std::f64::consts::PI;

use blochscatter_core::bloch::{band_derivatives, solve_bands, BandStructure, BlochProblem};
use blochscatter_core::fields::{GridFunction, PeriodicPotential, TorusGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cosine() -> PeriodicPotential {
    PeriodicPotential::cosine(2.0 * PI, 1.0).unwrap()
}

pub fn free() -> PeriodicPotential {
    PeriodicPotential::zero(2.0 * PI).unwrap()
}

pub fn bands(v: PeriodicPotential, cells: usize, nx: usize) -> BandStructure {
    let grid = TorusGrid::new(v.period(), cells, nx).unwrap();
    band_derivatives(solve_bands(&BlochProblem::new(v, grid).unwrap()).unwrap()).unwrap()
}

pub fn random_field(grid: TorusGrid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    GridFunction::new(grid, values).unwrap()
}

/// Gaussian wave packet `a·e^{-(x-c)²/(2w²)} e^{iξx}` centred on the torus.
pub fn packet(grid: TorusGrid, a: f64, w: f64, xi: f64) -> GridFunction {
    let c = grid.length() / 2.0;
    GridFunction::from_fn(grid, |x| {
        let y = x - c;
        Complex64::from_polar(a * (-(y * y) / (2.0 * w * w)).exp(), xi * y)
    })
}
