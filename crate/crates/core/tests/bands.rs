mod common;

use std::f64::consts::PI;

use blochscatter_core::bloch::{
    assemble_fiber, band_derivatives, find_inflections, hermitian_eigen, solve_bands, BlochProblem, ZonePolicy,
};
use blochscatter_core::fields::{PeriodicPotential, TorusGrid};
use blochscatter_core::Error;
use common::{bands, cosine, free};
use num_complex::Complex64;

/// Roots of a real cubic `-λ³ + c₂λ² + c₁λ + c₀` by scanning for sign changes and bisecting.
fn cubic_roots(p: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    let steps = 20000;
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::new();
    for i in 0..steps {
        let (mut a, mut b) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
        if p(a) == 0.0 {
            roots.push(a);
            continue;
        }
        if p(a).signum() == p(b).signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if p(a).signum() == p(m).signum() { a = m } else { b = m }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

#[test]
fn mathieu_three_by_three_fiber() {
    let h = assemble_fiber(&cosine(), 0.0, 1, ZonePolicy::Reject).unwrap();
    // det(H - λ) for H = [[1,1,0],[1,0,1],[0,1,1]] written out by cofactors
    let det = |l: f64| (1.0 - l) * ((0.0 - l) * (1.0 - l) - 1.0) - 1.0 * (1.0 * (1.0 - l) - 0.0);
    let oracle = cubic_roots(det, -5.0, 5.0 + 1e-7);
    assert_eq!(oracle.len(), 3);
    for (r, want) in oracle.iter().zip([-1.0, 1.0, 2.0]) {
        assert!((r - want).abs() < 1e-12, "oracle root {r}");
    }
    let (values, _) = hermitian_eigen(h).unwrap();
    for (got, want) in values.iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn free_fiber_entries() {
    let h = assemble_fiber(&free(), 0.3, 1, ZonePolicy::Reject).unwrap();
    for (i, want) in [0.49, 0.09, 1.69].iter().enumerate() {
        assert!((h[(i, i)].re - want).abs() < 1e-14);
        for j in 0..3 {
            if j != i {
                assert_eq!(h[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
    }
    assert!(matches!(assemble_fiber(&free(), 0.6, 1, ZonePolicy::Reject), Err(Error::OutsideZone { .. })));
    assert!(assemble_fiber(&free(), 0.6, 1, ZonePolicy::Fold).is_ok());
}

#[test]
fn random_potential_fibers_are_hermitian() {
    let v = PeriodicPotential::new(
        3.0,
        &[(1, Complex64::new(0.3, -0.7)), (-1, Complex64::new(0.3, 0.7)), (3, Complex64::new(-1.1, 0.2)), (-3, Complex64::new(-1.1, -0.2)), (0, Complex64::new(0.4, 0.0))],
    )
    .unwrap();
    let h = assemble_fiber(&v, -0.4, 5, ZonePolicy::Reject).unwrap();
    assert_eq!(h.adjoint(), h);
}

#[test]
fn free_bands_are_folded_parabolas() {
    let bs = bands(free(), 32, 16);
    let m = bs.cutoff() as i64;
    for s in 0..bs.fibers() {
        let k = bs.kpoint(s);
        let mut want: Vec<f64> = (-m..=m).map(|j| (k + j as f64).powi(2)).collect();
        want.sort_by(f64::total_cmp);
        for (n, w) in want.iter().enumerate() {
            assert!((bs.energy(s, n) - w).abs() < 1e-10, "fiber {s} band {n}");
        }
    }
}

#[test]
fn constant_shift_covariance() {
    let a = bands(free(), 16, 16);
    let b = bands(PeriodicPotential::constant(2.0 * PI, 3.25).unwrap(), 16, 16);
    let c0 = bands(cosine(), 16, 16);
    let shifted = PeriodicPotential::new(
        2.0 * PI,
        &[(0, Complex64::new(-0.75, 0.0)), (1, Complex64::new(1.0, 0.0)), (-1, Complex64::new(1.0, 0.0))],
    )
    .unwrap();
    let c1 = bands(shifted, 16, 16);
    for s in 0..a.fibers() {
        for n in 0..a.band_count() {
            assert!((b.energy(s, n) - a.energy(s, n) - 3.25).abs() < 1e-10);
            assert!((c1.energy(s, n) - c0.energy(s, n) + 0.75).abs() < 1e-10);
        }
    }
}

/// Sturm count of eigenvalues below `x` for a real symmetric tridiagonal matrix.
fn sturm_below(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, d) in diag.iter().enumerate() {
        let prev = if i == 0 { 0.0 } else { off * off / q };
        q = d - x - prev;
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

#[test]
fn lowest_band_edge_matches_high_truncation_oracle() {
    // H(0) for V = 2cos x is tridiagonal: m² on the diagonal and 1 off it
    let big = 40i64;
    let diag: Vec<f64> = (-big..=big).map(|m| (m * m) as f64).collect();
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_below(&diag, 1.0, mid) >= 1 { hi = mid } else { lo = mid }
    }
    let oracle = 0.5 * (lo + hi);
    let bs = bands(cosine(), 16, 16);
    let zero = (0..bs.fibers()).find(|&s| bs.kpoint(s) == 0.0).unwrap();
    assert!((bs.energy(zero, 0) - oracle).abs() < 1e-8, "{} vs {oracle}", bs.energy(zero, 0));
    let m = bs.cutoff();
    let e = |cut| hermitian_eigen(assemble_fiber(&cosine(), 0.0, cut, ZonePolicy::Reject).unwrap()).unwrap().0[0];
    assert!((e(m) - e(2 * m)).abs() < 1e-8);
}

#[test]
fn spectral_invariants() {
    let v = cosine();
    let bs = bands(v.clone(), 32, 16);
    assert!(bs.max_unitarity_defect() < 1e-10);
    let scale = 1.0 + (0..bs.fibers()).map(|s| bs.energy(s, bs.band_count() - 1)).fold(0.0, f64::max);
    assert!(bs.max_residual(&v).unwrap() <= 1e-9 * scale);
    let d = bs.band_count();
    for s in 0..bs.fibers() {
        let e = bs.fiber_energies(s);
        assert!(e.windows(2).all(|w| w[0] <= w[1]));
        // completeness: Σ_n φ_n φ_n* = I
        let vec = bs.fiber_vectors(s);
        for a in 0..d {
            for b in 0..d {
                let sum: Complex64 = (0..d).map(|n| vec[a * d + n] * vec[b * d + n].conj()).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((sum - want).norm() < 1e-10);
            }
        }
    }
    for s in 0..bs.fibers() {
        let k = bs.kpoint(s);
        if let Some(r) = (0..bs.fibers()).find(|&j| (bs.kpoint(j) + k).abs() < 1e-12) {
            for n in 0..d {
                assert!((bs.energy(s, n) - bs.energy(r, n)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn free_band_derivatives() {
    let bs = bands(free(), 64, 16);
    let zero = (0..bs.fibers()).find(|&s| bs.kpoint(s) == 0.0).unwrap();
    let (d1, _, _) = bs.derivative(zero, 0).unwrap();
    assert!(d1.abs() < 1e-12);
    for s in 0..bs.fibers() {
        let k = bs.kpoint(s);
        if k.abs() < 0.4 {
            let (d1, d2, flagged) = bs.derivative(s, 0).unwrap();
            assert!(!flagged);
            assert!((d2 - 2.0).abs() < 1e-6, "E'' = {d2} at k = {k}");
            assert!((d1 - 2.0 * k).abs() < 1e-6);
        }
    }
    assert!(find_inflections(&bs, 4).unwrap().is_empty());
}

#[test]
fn cosine_inflections_are_symmetric_and_stable() {
    let locate = |cells| {
        let bs = bands(cosine(), cells, 16);
        let infl = find_inflections(&bs, 1).unwrap();
        assert_eq!(infl.len(), 2, "{infl:?}");
        let mut ks: Vec<f64> = infl.points.iter().map(|p| p.k).collect();
        ks.sort_by(f64::total_cmp);
        assert!((ks[0] + ks[1]).abs() < 1e-9);
        assert!(ks[1] > 0.0 && ks[1] < 0.5);
        ks[1]
    };
    let coarse = locate(64);
    let fine = locate(256);
    assert!((coarse - fine).abs() < 5e-3, "{coarse} vs {fine}");
    assert!(find_inflections(&bands(cosine(), 16, 16), 0).unwrap().is_empty());
}

#[test]
fn derivatives_require_enough_fibers() {
    let grid = TorusGrid::new(2.0 * PI, 4, 16).unwrap();
    let bs = solve_bands(&BlochProblem::new(cosine(), grid).unwrap()).unwrap();
    assert!(matches!(band_derivatives(bs), Err(Error::TooFewFibers(4))));
}
