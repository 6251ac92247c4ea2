mod common;

use blochscatter_core::bloch::BandStructure;
use blochscatter_core::fields::GridFunction;
use blochscatter_core::nls::{duhamel_residual, energy, evolve_nls, mass, EvolutionConfig, Nonlinearity};
use blochscatter_core::norms::h1_norm;
use blochscatter_core::Error;
use common::{bands, cosine, packet};
use num_complex::Complex64;

fn data(bs: &BandStructure, eps: f64) -> GridFunction {
    let f = packet(*bs.grid(), 1.0, 3.0, 1.0);
    f.scaled(Complex64::new(eps / h1_norm(&f), 0.0))
}

fn cfg(dt: f64, horizon: f64, stride: f64) -> EvolutionConfig {
    EvolutionConfig::new(dt, horizon, stride).unwrap()
}

#[test]
fn conservation_and_second_order() {
    let bs = bands(cosine(), 64, 16);
    let u0 = data(&bs, 0.08);
    let nl = Nonlinearity::power(1.0, 7).unwrap();
    let runs: Vec<_> =
        [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0].iter().map(|&dt| evolve_nls(&u0, &cfg(dt, 4.0, 0.125), &nl, &bs).unwrap()).collect();
    for r in &runs {
        assert!(r.max_mass_drift() <= 1e-10, "{}", r.max_mass_drift());
    }
    let drift: Vec<f64> = runs.iter().map(|r| r.max_energy_drift()).collect();
    let ratio = drift[1] / drift[2];
    assert!((3.5..=4.5).contains(&ratio), "energy drifts {drift:?}");
    let last = |i: usize| runs[i].duhamel.last().unwrap().clone();
    let e1 = last(0).distance(&last(1));
    let e2 = last(1).distance(&last(2));
    assert!((3.5..=4.5).contains(&(e1 / e2)), "Strang ratio {} {e1} {e2} {drift:?}", e1 / e2);
    // the logged drift agrees with a direct evaluation of the energy
    let r = &runs[2];
    let direct = energy(r.fields.last().unwrap(), bs.potential(), &nl).unwrap() - energy(&u0, bs.potential(), &nl).unwrap();
    assert!((direct - r.energy_drift.last().unwrap()).abs() < 1e-12 * r.energy[0].abs().max(1.0));
    assert!((mass(&u0) - u0.norm_sq()).abs() < 1e-15);
}

#[test]
fn duhamel_residual_halves_with_the_stride() {
    let bs = bands(cosine(), 32, 16);
    let u0 = data(&bs, 0.05);
    let nl = Nonlinearity::power(-1.0, 7).unwrap();
    let res: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
        .iter()
        .map(|&s| duhamel_residual(&evolve_nls(&u0, &cfg(1.0 / 128.0, 2.0, s), &nl, &bs).unwrap(), &nl, &bs).unwrap())
        .collect();
    for w in res.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.5..=2.5).contains(&ratio), "residuals {res:?}");
    }
    let lin = evolve_nls(&u0, &cfg(1.0 / 64.0, 2.0, 1.0 / 16.0), &Nonlinearity::Zero, &bs).unwrap();
    assert!(duhamel_residual(&lin, &Nonlinearity::Zero, &bs).unwrap() <= 1e-10);
    let coarse = evolve_nls(&u0, &cfg(1.0 / 64.0, 2.0, 1.0 / 8.0), &nl, &bs).unwrap();
    assert!(duhamel_residual(&coarse, &nl, &bs).is_err());
}

#[test]
fn backward_run_undoes_the_forward_run() {
    let bs = bands(cosine(), 32, 16);
    let f = packet(*bs.grid(), 1.0, 3.0, 0.0);
    let u0 = f.scaled(Complex64::new(0.05 / h1_norm(&f), 0.0));
    // strong coupling so the Duhamel part is far above rounding
    let nl = Nonlinearity::power(1e7, 7).unwrap();
    let c = cfg(1.0 / 64.0, 2.0, 0.25);
    let fwd = evolve_nls(&u0, &c, &nl, &bs).unwrap();
    let v = fwd.duhamel.last().unwrap().l2_norm();
    assert!(v > 1e-3 * u0.l2_norm(), "{v}");
    let bwd = evolve_nls(fwd.fields.last().unwrap(), &EvolutionConfig { backward: true, ..c }, &nl, &bs).unwrap();
    assert_eq!(bwd.times.last(), Some(&-2.0));
    let err = bwd.fields.last().unwrap().distance(&u0);
    assert!(err < 1e-10 * u0.l2_norm(), "{err} vs {v}");
    assert!(bwd.max_mass_drift() <= 1e-10);
}

#[test]
fn guards_and_dealiasing_defaults() {
    let bs = bands(cosine(), 16, 16);
    let big = data(&bs, 0.5);
    let nl = Nonlinearity::power(1.0, 7).unwrap();
    assert!(matches!(evolve_nls(&big, &cfg(0.0625, 1.0, 0.0625), &nl, &bs), Err(Error::DataTooLarge { .. })));
    assert!(!nl.default_dealias());
    assert!(Nonlinearity::power(1.0, 9).unwrap().default_dealias());
    for bad in [(1.0, 5), (1.0, 8), (0.0, 7)] {
        assert!(Nonlinearity::power(bad.0, bad.1).is_err());
    }
    let u0 = data(&bs, 0.05);
    let nl9 = Nonlinearity::power(1.0, 9).unwrap();
    let c = EvolutionConfig { dealias: true, ..cfg(1.0 / 32.0, 1.0, 0.125) };
    let r = evolve_nls(&u0, &c, &nl9, &bs).unwrap();
    assert!(r.max_mass_drift() <= 1e-10);
}
