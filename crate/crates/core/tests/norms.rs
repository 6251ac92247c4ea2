mod common;

use blochscatter_core::fields::GridFunction;
use blochscatter_core::norms::{
    conjugate_exponent, duhamel_ratio, mixed_norm, spatial_norm, strichartz_ratio, AdmissiblePair, MixedNormSpec,
    SpatialNorm, TimeSampledSignal,
};
use blochscatter_core::propagator::SpectralMask;
use blochscatter_core::Error;
use common::{bands, cosine, packet, random_field};
use num_complex::Complex64;

fn pair(r: f64, p: f64) -> AdmissiblePair {
    AdmissiblePair::validate(r, p).unwrap()
}

#[test]
fn holder_duality_spot_check() {
    let bs = bands(cosine(), 8, 16);
    for seed in 0..10 {
        let f = random_field(*bs.grid(), seed);
        let g = random_field(*bs.grid(), seed + 50);
        let lhs = f.inner(&g).norm();
        for p in [1.0, 1.5, 2.0, 3.0, 7.0, f64::INFINITY] {
            let q = conjugate_exponent(p).unwrap();
            let rhs = spatial_norm(&f, SpatialNorm::Lp(p)).unwrap() * spatial_norm(&g, SpatialNorm::Lp(q)).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "p = {p}");
        }
    }
}

#[test]
fn strichartz_ratio_is_homogeneous_and_unitary_at_the_energy_pair() {
    let bs = bands(cosine(), 32, 16);
    let full = SpectralMask::full(&bs).unwrap();
    let f = packet(*bs.grid(), 1.0, 4.0, 1.3);
    for pr in [pair(4.0, f64::INFINITY), pair(6.0, 6.0), pair(f64::INFINITY, 2.0)] {
        let a = strichartz_ratio(&f, pr, &full, &bs, 4.0, 1.0 / 16.0).unwrap().ratio;
        let b = strichartz_ratio(&f.scaled(Complex64::new(2.0, 0.0)), pr, &full, &bs, 4.0, 1.0 / 16.0).unwrap().ratio;
        assert!((a - b).abs() <= 1e-12 * a);
        assert!(a.is_finite() && a > 0.0);
    }
    let r = strichartz_ratio(&f, pair(f64::INFINITY, 2.0), &full, &bs, 4.0, 1.0 / 16.0).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-10);
    let zero = GridFunction::zeros(*bs.grid());
    assert!(matches!(strichartz_ratio(&zero, pair(6.0, 6.0), &full, &bs, 4.0, 0.0625), Err(Error::ZeroInput(_))));
}

#[test]
fn duhamel_ratio_homogeneity_and_point_forcing() {
    let bs = bands(cosine(), 32, 16);
    let full = SpectralMask::full(&bs).unwrap();
    let stride = 1.0 / 16.0;
    let f0 = packet(*bs.grid(), 1.0, 4.0, 0.7);
    let n = 4 * 16;
    let smooth: Vec<GridFunction> =
        (0..=n).map(|i| f0.scaled(Complex64::new((-(i as f64) * stride).exp() * (1.0 + 0.3 * i as f64).cos(), 0.0))).collect();
    let sig = TimeSampledSignal::from_fields(stride, smooth.clone()).unwrap();
    let sig2 = TimeSampledSignal::from_fields(stride, smooth.iter().map(|f| f.scaled(Complex64::new(2.0, 0.0))).collect()).unwrap();
    for (p1, p2) in [(pair(6.0, 6.0), pair(6.0, 6.0)), (pair(4.0, f64::INFINITY), pair(f64::INFINITY, 2.0))] {
        let a = duhamel_ratio(&sig, p1, p2, &full, &bs).unwrap();
        let b = duhamel_ratio(&sig2, p1, p2, &full, &bs).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }
    // F = f₀/Δ at the sample s₀ = Δ: the Duhamel integral is e^{-i(t-s₀)H}f₀ after s₀
    let spike: Vec<GridFunction> = (0..=n)
        .map(|i| if i == 1 { f0.scaled(Complex64::new(1.0 / stride, 0.0)) } else { GridFunction::zeros(*bs.grid()) })
        .collect();
    let sig = TimeSampledSignal::from_fields(stride, spike).unwrap();
    let p1 = pair(6.0, 6.0);
    let d = duhamel_ratio(&sig, p1, pair(f64::INFINITY, 2.0), &full, &bs).unwrap();
    let s = strichartz_ratio(&f0, p1, &full, &bs, 4.0, stride).unwrap().ratio;
    assert!((d / s - 1.0).abs() < 0.05, "{d} vs {s}");
    let zero = TimeSampledSignal::from_fields(stride, vec![GridFunction::zeros(*bs.grid()); n + 1]).unwrap();
    assert!(matches!(duhamel_ratio(&zero, p1, p1, &full, &bs), Err(Error::ZeroInput(_))));
}

#[test]
fn w1p_norms() {
    let bs = bands(cosine(), 8, 16);
    let f = random_field(*bs.grid(), 3);
    let h1 = spatial_norm(&f, SpatialNorm::W1p(2.0)).unwrap();
    assert!((h1 - blochscatter_core::norms::h1_norm(&f)).abs() < 1e-12 * h1);
    let d = blochscatter_core::fields::spectral_derivative(&f, 1);
    for p in [4.0, f64::INFINITY] {
        let want = spatial_norm(&f, SpatialNorm::Lp(p)).unwrap() + spatial_norm(&d, SpatialNorm::Lp(p)).unwrap();
        assert!((spatial_norm(&f, SpatialNorm::W1p(p)).unwrap() - want).abs() < 1e-12 * want);
    }
}

#[test]
fn mixed_norm_of_a_flow_signal() {
    let bs = bands(cosine(), 16, 16);
    let f = packet(*bs.grid(), 1.0, 3.0, 0.0);
    let fields: Vec<GridFunction> =
        (0..=32).map(|i| blochscatter_core::propagator::evolve_linear(&f, i as f64 / 16.0, &bs).unwrap()).collect();
    let sig = TimeSampledSignal::from_fields(1.0 / 16.0, fields).unwrap();
    let spec = MixedNormSpec::new(f64::INFINITY, f64::INFINITY, SpatialNorm::Lp(2.0)).unwrap();
    assert!((mixed_norm(&sig, &spec).unwrap() - f.l2_norm()).abs() < 1e-10 * f.l2_norm());
    let spec = MixedNormSpec::new(2.0, 2.0, SpatialNorm::Lp(2.0)).unwrap();
    // two unit intervals of constant L² norm
    assert!((mixed_norm(&sig, &spec).unwrap() - 2f64.sqrt() * f.l2_norm()).abs() < 1e-10 * f.l2_norm());
}
