//! Torus grids, complex grid functions and exact spectral calculus.
//!
//! The real line is replaced by a torus of `cells` potential periods. All
//! transforms use the L²-unitary convention
//!
//! ```text
//! f̂_q = sqrt(h / N) Σ_i f(x_i) e^{-i ξ_q x_i},    ξ_q = 2π q / Λ,
//! f(x_i) = Λ^{-1/2} Σ_q f̂_q e^{i ξ_q x_i},
//! ```
//!
//! so that `Σ_q |f̂_q|² = h Σ_i |f(x_i)|²` is exactly the discrete squared L²
//! norm. Coefficients are the components of `f` in the orthonormal plane-wave
//! basis `e^{i ξ_q x} / sqrt(Λ)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance used for the reality check of potential coefficients.
const REALITY_TOL: f64 = 1e-12;

/// A real periodic potential given by finitely many Fourier coefficients,
/// `V(x) = Σ_{|m| ≤ M_V} V̂_m e^{i 2π m x / L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPotential {
    period: f64,
    /// `coeffs[m + max_mode]` holds `V̂_m`.
    coeffs: Vec<Complex64>,
    max_mode: usize,
}

impl PeriodicPotential {
    /// Builds a potential from `(m, V̂_m)` pairs. Missing modes are zero and
    /// repeated modes are summed. Every `V̂_{-m}` must be the conjugate of
    /// `V̂_m`; both members of a pair have to be listed.
    pub fn new(period: f64, modes: &[(i64, Complex64)]) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidPotential(format!("period must be positive, got {period}")));
        }
        let max_mode = modes
            .iter()
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .map(|(m, _)| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * max_mode + 1];
        for &(m, c) in modes {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidPotential(format!("coefficient of mode {m} is not finite")));
            }
            if m.unsigned_abs() as usize <= max_mode {
                coeffs[(m + max_mode as i64) as usize] += c;
            }
        }
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for m in 0..=max_mode as i64 {
            let a = coeffs[(m + max_mode as i64) as usize];
            let b = coeffs[(max_mode as i64 - m) as usize];
            if (a - b.conj()).norm() > REALITY_TOL * scale {
                return Err(Error::Reality { mode: m, partner: -m });
            }
        }
        // exact symmetrization after the check
        for m in 0..=max_mode {
            let a = coeffs[m + max_mode];
            let b = coeffs[max_mode - m];
            let avg = (a + b.conj()) * 0.5;
            coeffs[m + max_mode] = avg;
            coeffs[max_mode - m] = avg.conj();
        }
        Ok(Self { period, coeffs, max_mode })
    }

    /// `V ≡ 0`.
    pub fn zero(period: f64) -> Result<Self> {
        Self::new(period, &[])
    }

    /// `V ≡ value`.
    pub fn constant(period: f64, value: f64) -> Result<Self> {
        Self::new(period, &[(0, Complex64::new(value, 0.0))])
    }

    /// `V(x) = 2 a cos(2π x / L)`, i.e. `V̂_{±1} = a`.
    pub fn cosine(period: f64, a: f64) -> Result<Self> {
        let c = Complex64::new(a, 0.0);
        Self::new(period, &[(1, c), (-1, c)])
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Highest Fourier mode `M_V` carried by the potential.
    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    /// `V̂_m`, zero outside `|m| ≤ M_V`.
    pub fn coeff(&self, m: i64) -> Complex64 {
        if m.unsigned_abs() as usize > self.max_mode {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(m + self.max_mode as i64) as usize]
        }
    }

    /// Mean value `V̂_0`.
    pub fn mean(&self) -> f64 {
        self.coeff(0).re
    }

    /// Nonzero `(m, V̂_m)` pairs in ascending `m`.
    pub fn modes(&self) -> Vec<(i64, Complex64)> {
        let mv = self.max_mode as i64;
        (-mv..=mv).map(|m| (m, self.coeff(m))).filter(|(_, c)| c.norm() > 0.0).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.max_mode == 0
    }

    /// Pointwise value `V(x)` (real part of the Fourier sum).
    pub fn eval(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        let mut acc = self.coeff(0).re;
        for m in 1..=self.max_mode as i64 {
            // V̂_m e^{imwx} + conj(...) = 2 Re(V̂_m e^{imwx})
            let e = Complex64::from_polar(1.0, m as f64 * w * x);
            acc += 2.0 * (self.coeff(m) * e).re;
        }
        acc
    }
}

/// A torus made of `cells` copies of the potential period, each sampled at
/// `points_per_cell` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    period: f64,
    cells: usize,
    points_per_cell: usize,
}

impl TorusGrid {
    pub fn new(period: f64, cells: usize, points_per_cell: usize) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        if cells == 0 {
            return Err(Error::InvalidGrid("cell count must be positive".into()));
        }
        if points_per_cell < 2 || points_per_cell % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per cell must be a positive even integer, got {points_per_cell}"
            )));
        }
        if !cells.is_power_of_two() {
            log::debug!("torus with {cells} cells: not a power of two, transforms will be slower");
        }
        Ok(Self { period, cells, points_per_cell })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of potential periods `N_c`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Samples per period `N_x`.
    pub fn points_per_cell(&self) -> usize {
        self.points_per_cell
    }

    /// Total number of samples `N = N_c N_x`.
    pub fn len(&self) -> usize {
        self.cells * self.points_per_cell
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Total torus length `Λ = N_c L`.
    pub fn length(&self) -> f64 {
        self.cells as f64 * self.period
    }

    /// Grid spacing `h = L / N_x`.
    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_cell as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Signed mode number `q ∈ [-N/2, N/2)` stored at transform index `i`.
    pub fn mode_at(&self, index: usize) -> i64 {
        let n = self.len();
        if index < n / 2 {
            index as i64
        } else {
            index as i64 - n as i64
        }
    }

    /// Transform index holding mode `q` (taken modulo `N`).
    pub fn index_of(&self, q: i64) -> usize {
        q.rem_euclid(self.len() as i64) as usize
    }

    /// Frequency `ξ_q = 2π q / Λ`.
    pub fn frequency(&self, q: i64) -> f64 {
        2.0 * PI * q as f64 / self.length()
    }

    /// Frequency stored at transform index `i`.
    pub fn frequency_at(&self, index: usize) -> f64 {
        self.frequency(self.mode_at(index))
    }

    /// Largest resolved frequency `π / h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Rejects potentials whose modes would alias on this grid.
    pub fn check_potential(&self, v: &PeriodicPotential) -> Result<()> {
        if (v.period() - self.period).abs() > 1e-12 * self.period {
            return Err(Error::GridMismatch(format!(
                "potential period {} differs from grid period {}",
                v.period(),
                self.period
            )));
        }
        if 2 * v.max_mode() >= self.points_per_cell {
            return Err(Error::Aliasing { max_mode: v.max_mode(), points_per_cell: self.points_per_cell });
        }
        Ok(())
    }
}

/// Complex samples on a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f(x_i)` at every grid point.
    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    /// Discrete point mass at grid index `y`, scaled by `1/h` so that its
    /// Riemann sum is one.
    pub fn point_mass(grid: TorusGrid, y: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[y % grid.len()] = Complex64::new(1.0 / grid.spacing(), 0.0);
        f
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Squared discrete L² norm `h Σ |f_i|²`.
    pub fn norm_sq(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Discrete inner product `h Σ conj(f_i) g_i`.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let h = self.grid.spacing();
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h
    }

    /// `‖self - other‖_{L²}`.
    pub fn distance(&self, other: &GridFunction) -> f64 {
        let h = self.grid.spacing();
        (h * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn scaled(&self, a: Complex64) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|z| z * a).collect() }
    }

    /// Pointwise product.
    pub fn pointwise(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    /// Cyclic shift by `offset` grid points: `g(x_i) = f(x_{i - offset})`.
    pub fn shifted(&self, offset: usize) -> GridFunction {
        let n = self.len();
        let values = (0..n).map(|i| self.values[(i + n - offset % n) % n]).collect();
        GridFunction { grid: self.grid, values }
    }

    pub(crate) fn check_same_grid(&self, other: &TorusGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch("operands live on different grids".into()));
        }
        Ok(())
    }
}

impl Add<&GridFunction> for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        GridFunction { grid: self.grid, values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect() }
    }
}

impl Sub<&GridFunction> for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        GridFunction { grid: self.grid, values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect() }
    }
}

impl Mul<Complex64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: Complex64) -> GridFunction {
        self.scaled(rhs)
    }
}

/// Plane-wave coefficients of a grid function, stored in transform order
/// (index `i` holds mode [`TorusGrid::mode_at`]`(i)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} coefficients for {} modes", coeffs.len(), grid.len())));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of mode `q`, with `q` taken modulo `N`.
    pub fn mode(&self, q: i64) -> Complex64 {
        self.coeffs[self.grid.index_of(q)]
    }

    /// `(q, ξ_q, f̂_q)` for `q = -N/2 .. N/2 - 1` in ascending order.
    pub fn ordered(&self) -> Vec<(i64, f64, Complex64)> {
        let n = self.grid.len() as i64;
        (-n / 2..n / 2).map(|q| (q, self.grid.frequency(q), self.mode(q))).collect()
    }

    /// `Σ |f̂_q|²`, equal to the squared discrete L² norm.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies every mode by `symbol(ξ_q)`.
    pub fn apply_symbol(&mut self, mut symbol: impl FnMut(usize, f64) -> Complex64) {
        let grid = self.grid;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c *= symbol(i, grid.frequency_at(i));
        }
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    let entry = guard.entry(n).or_insert_with(|| {
        let mut planner = FftPlanner::new();
        Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    });
    (Arc::clone(&entry.forward), Arc::clone(&entry.inverse))
}

/// In-place unitary forward transform of raw samples into coefficients.
pub(crate) fn forward_in_place(grid: &TorusGrid, buf: &mut [Complex64]) {
    let (fwd, _) = plans(buf.len());
    fwd.process(buf);
    let scale = (grid.spacing() / grid.len() as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= scale);
}

/// In-place inverse of [`forward_in_place`].
pub(crate) fn inverse_in_place(grid: &TorusGrid, buf: &mut [Complex64]) {
    let (_, inv) = plans(buf.len());
    inv.process(buf);
    let scale = 1.0 / grid.length().sqrt();
    buf.iter_mut().for_each(|z| *z *= scale);
}

/// Samples `V` on the grid. The result is real: imaginary parts are set to
/// exactly zero.
pub fn sample_potential(v: &PeriodicPotential, grid: &TorusGrid) -> Result<GridFunction> {
    grid.check_potential(v)?;
    Ok(GridFunction::from_fn(*grid, |x| Complex64::new(v.eval(x), 0.0)))
}

/// Unitary forward transform.
pub fn fourier_forward(f: &GridFunction) -> Spectrum {
    let mut buf = f.values.clone();
    forward_in_place(&f.grid, &mut buf);
    Spectrum { grid: f.grid, coeffs: buf }
}

/// Inverse of [`fourier_forward`].
pub fn fourier_inverse(s: &Spectrum) -> GridFunction {
    let mut buf = s.coeffs.clone();
    inverse_in_place(&s.grid, &mut buf);
    GridFunction { grid: s.grid, values: buf }
}

/// `∂ₓ^order f`, computed spectrally. For odd orders the Nyquist mode
/// `q = -N/2` is zeroed so the operator stays skew-Hermitian on the grid.
pub fn spectral_derivative(f: &GridFunction, order: u32) -> GridFunction {
    if order == 0 {
        return f.clone();
    }
    let n = f.grid.len();
    let mut s = fourier_forward(f);
    s.apply_symbol(|i, xi| {
        if order % 2 == 1 && i == n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, xi).powu(order)
        }
    });
    fourier_inverse(&s)
}

/// Bessel potential `(1 - ∂ₓ²)^{s/2} f`.
pub fn bessel_multiplier(f: &GridFunction, s: f64) -> GridFunction {
    if s == 0.0 {
        return f.clone();
    }
    let mut spec = fourier_forward(f);
    spec.apply_symbol(|_, xi| Complex64::new((1.0 + xi * xi).powf(s / 2.0), 0.0));
    fourier_inverse(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> TorusGrid {
        TorusGrid::new(2.0 * PI, 8, 16).unwrap()
    }

    fn random_field(g: TorusGrid, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(g, |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn rel_err(a: &GridFunction, b: &GridFunction) -> f64 {
        a.distance(b) / b.l2_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn constant_potential_samples() {
        let v = PeriodicPotential::constant(2.0 * PI, 3.0).unwrap();
        let f = sample_potential(&v, &grid()).unwrap();
        assert!(f.values().iter().all(|z| *z == Complex64::new(3.0, 0.0)));
    }

    #[test]
    fn cosine_potential_samples() {
        let v = PeriodicPotential::cosine(2.0 * PI, 1.0).unwrap();
        let g = grid();
        let f = sample_potential(&v, &g).unwrap();
        assert!((f.values()[0].re - 2.0).abs() < 1e-15);
        // x = π/2 is grid point 4 when h = 2π/16
        assert!(f.values()[4].re.abs() < 1e-15);
        assert!(f.values().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn aliasing_is_rejected_with_both_numbers() {
        let c = Complex64::new(1.0, 0.0);
        let v = PeriodicPotential::new(2.0 * PI, &[(8, c), (-8, c)]).unwrap();
        let err = sample_potential(&v, &grid()).unwrap_err();
        assert_eq!(err, Error::Aliasing { max_mode: 8, points_per_cell: 16 });
        let msg = err.to_string();
        assert!(msg.contains('8') && msg.contains("resolves only 8"), "{msg}");
    }

    #[test]
    fn reality_violation_is_rejected() {
        let err = PeriodicPotential::new(1.0, &[(1, Complex64::new(1.0, 0.5)), (-1, Complex64::new(1.0, 0.5))]);
        assert_eq!(err.unwrap_err(), Error::Reality { mode: 1, partner: -1 });
        assert!(PeriodicPotential::new(1.0, &[(2, Complex64::new(0.0, 1.0))]).is_err());
        assert!(PeriodicPotential::new(1.0, &[(2, Complex64::new(0.0, 1.0)), (-2, Complex64::new(0.0, -1.0))]).is_ok());
    }

    #[test]
    fn grid_rejects_odd_points() {
        assert!(TorusGrid::new(1.0, 4, 7).is_err());
        assert!(TorusGrid::new(1.0, 0, 8).is_err());
        assert!(TorusGrid::new(-1.0, 4, 8).is_err());
    }

    #[test]
    fn constant_has_single_zero_mode() {
        let g = grid();
        let s = fourier_forward(&GridFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)));
        for (q, _, c) in s.ordered() {
            if q == 0 {
                assert!((c.re - g.length().sqrt()).abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12, "mode {q}: {c}");
            }
        }
    }

    #[test]
    fn pure_mode_has_single_coefficient() {
        let g = grid();
        let xi = g.frequency(1);
        let s = fourier_forward(&GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, xi * x)));
        for (q, _, c) in s.ordered() {
            let expect = if q == 1 { g.length().sqrt() } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-11, "mode {q}: {c}");
        }
    }

    #[test]
    fn plancherel_and_roundtrip_on_random_fields() {
        let g = grid();
        for seed in 0..100 {
            let f = random_field(g, seed);
            let s = fourier_forward(&f);
            assert!((s.norm_sq() - f.norm_sq()).abs() <= 1e-12 * f.norm_sq());
            assert!(rel_err(&fourier_inverse(&s), &f) < 1e-12);
        }
    }

    #[test]
    fn derivative_of_plane_wave() {
        let g = grid();
        let xi = g.frequency(1);
        let f = GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, xi * x));
        let d = spectral_derivative(&f, 1);
        assert!(rel_err(&d, &f.scaled(Complex64::new(0.0, xi))) < 1e-12);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid();
        let f = GridFunction::from_fn(g, |_| Complex64::new(2.5, -1.0));
        for order in 1..4 {
            assert!(spectral_derivative(&f, order).sup_norm() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_of_cosine() {
        let g = grid();
        let xi = g.frequency(1);
        let f = GridFunction::from_fn(g, |x| Complex64::new((xi * x).cos(), 0.0));
        let d = spectral_derivative(&f, 2);
        assert!(rel_err(&d, &f.scaled(Complex64::new(-xi * xi, 0.0))) < 1e-12);
    }

    #[test]
    fn odd_derivative_drops_nyquist() {
        let g = grid();
        let nyq = g.len() as i64 / 2;
        let f = GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, -g.frequency(nyq) * x));
        assert!(spectral_derivative(&f, 1).sup_norm() < 1e-10);
        assert!(spectral_derivative(&f, 2).sup_norm() > 1.0);
    }

    #[test]
    fn bessel_identity_constant_and_eigenfunction() {
        let g = grid();
        let f = random_field(g, 7);
        assert_eq!(bessel_multiplier(&f, 0.0), f);
        let c = GridFunction::from_fn(g, |_| Complex64::new(1.5, 0.5));
        assert!(rel_err(&bessel_multiplier(&c, 1.3), &c) < 1e-12);
        let xi = g.frequency(3);
        let e = GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, xi * x));
        assert!(rel_err(&bessel_multiplier(&e, 2.0), &e.scaled(Complex64::new(1.0 + xi * xi, 0.0))) < 1e-12);
    }

    proptest! {
        #[test]
        fn bessel_inverse_and_commutation(seed in 0u64..1000, s in -2.0f64..2.0) {
            let g = grid();
            let f = random_field(g, seed);
            let back = bessel_multiplier(&bessel_multiplier(&f, s), -s);
            prop_assert!(rel_err(&back, &f) < 1e-10);
            let a = spectral_derivative(&bessel_multiplier(&f, s), 1);
            let b = bessel_multiplier(&spectral_derivative(&f, 1), s);
            prop_assert!(rel_err(&a, &b) < 1e-10);
        }
    }
}
