//! Exact linear flow `e^{-itH}` in the Bloch eigenbasis, sharp spectral
//! masks realizing the projection π, kernel columns and decay measurements.
//!
//! Every torus mode belongs to exactly one fiber. Within a fiber the first
//! `2M+1` slots carry Bloch bands (ascending energy); the remaining slots are
//! shell modes near the grid Nyquist frequency that the fiber basis does
//! not cover. Shell modes evolve as free plane waves shifted by the mean of
//! `V` and always count as tail bands.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::{fold_to_zone, BandStructure, InflectionSet, TorusLayout};
use crate::error::{Error, Result};
use crate::fields::{forward_in_place, inverse_in_place, GridFunction, TorusGrid};

/// Coefficients `c_{n,k_j}` of a grid function in the Bloch basis, laid out
/// `[fiber][mode]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    grid: TorusGrid,
    modes_per_fiber: usize,
    band_count: usize,
    data: Vec<Complex64>,
}

impl ModeCoefficients {
    pub fn zeros(bs: &BandStructure) -> Result<Self> {
        let layout = bs.layout()?;
        Ok(Self {
            grid: *bs.grid(),
            modes_per_fiber: layout.modes_per_fiber,
            band_count: bs.band_count(),
            data: vec![Complex64::new(0.0, 0.0); bs.grid().len()],
        })
    }

    /// Single unit coefficient at `(fiber, mode)`.
    pub fn unit(bs: &BandStructure, fiber: usize, mode: usize) -> Result<Self> {
        let mut c = Self::zeros(bs)?;
        *c.get_mut(fiber, mode) = Complex64::new(1.0, 0.0);
        Ok(c)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn modes_per_fiber(&self) -> usize {
        self.modes_per_fiber
    }

    /// Number of proper Bloch bands; modes at or above this index are shell modes.
    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn get(&self, fiber: usize, mode: usize) -> Complex64 {
        self.data[fiber * self.modes_per_fiber + mode]
    }

    pub fn get_mut(&mut self, fiber: usize, mode: usize) -> &mut Complex64 {
        &mut self.data[fiber * self.modes_per_fiber + mode]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// `Σ |c|²`.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn distance(&self, other: &ModeCoefficients) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// `a·self + other`.
    pub fn axpy(&self, a: Complex64, other: &ModeCoefficients) -> ModeCoefficients {
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + y).collect();
        ModeCoefficients { data, ..self.clone() }
    }

    /// Squared coefficient mass carried by modes with index `>= n_bands`.
    pub fn tail_mass(&self, n_bands: usize) -> f64 {
        self.data
            .chunks(self.modes_per_fiber)
            .flat_map(|f| f.iter().skip(n_bands))
            .map(|z| z.norm_sqr())
            .sum()
    }
}

/// Propagation energies of every `(fiber, mode)` slot.
pub fn mode_energies(bs: &BandStructure) -> Result<Vec<f64>> {
    let layout = bs.layout()?;
    let nx = layout.modes_per_fiber;
    let d = bs.band_count();
    let shell = nx - d;
    let mut out = Vec::with_capacity(bs.grid().len());
    for s in 0..bs.fibers() {
        out.extend_from_slice(bs.fiber_energies(s));
        out.extend_from_slice(&layout.shell_energy[s * shell..(s + 1) * shell]);
    }
    Ok(out)
}

pub(crate) fn analyze_raw(bs: &BandStructure, layout: &TorusLayout, values: &[Complex64], out: &mut [Complex64]) {
    let grid = bs.grid();
    let mut buf = values.to_vec();
    forward_in_place(grid, &mut buf);
    let nx = layout.modes_per_fiber;
    let d = bs.band_count();
    out.par_chunks_mut(nx).enumerate().for_each(|(s, c)| {
        let idx = &layout.index[s * nx..(s + 1) * nx];
        let phi = bs.fiber_vectors(s);
        for (n, cn) in c.iter_mut().enumerate().take(d) {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..d {
                acc += phi[m * d + n].conj() * buf[idx[m]];
            }
            *cn = acc;
        }
        for slot in d..nx {
            c[slot] = buf[idx[slot]];
        }
    });
}

pub(crate) fn synthesize_raw(bs: &BandStructure, layout: &TorusLayout, coeffs: &[Complex64], out: &mut [Complex64]) {
    let nx = layout.modes_per_fiber;
    let d = bs.band_count();
    let mut fibers = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    fibers.par_chunks_mut(nx).enumerate().for_each(|(s, b)| {
        let c = &coeffs[s * nx..(s + 1) * nx];
        let phi = bs.fiber_vectors(s);
        for (m, bm) in b.iter_mut().enumerate().take(d) {
            let row = &phi[m * d..(m + 1) * d];
            *bm = row.iter().zip(&c[..d]).map(|(p, x)| p * x).sum();
        }
        b[d..nx].copy_from_slice(&c[d..nx]);
    });
    for (slot, &i) in layout.index.iter().enumerate() {
        out[i] = fibers[slot];
    }
    inverse_in_place(bs.grid(), out);
}

/// Components of `f` in the Bloch basis: torus transform followed by the
/// per-fiber unitary rotation.
pub fn bloch_analyze(f: &GridFunction, bs: &BandStructure) -> Result<ModeCoefficients> {
    f.check_same_grid(bs.grid())?;
    let layout = bs.layout()?;
    let mut c = ModeCoefficients::zeros(bs)?;
    analyze_raw(bs, layout, f.values(), &mut c.data);
    Ok(c)
}

/// Adjoint (and inverse) of [`bloch_analyze`].
pub fn bloch_synthesize(c: &ModeCoefficients, bs: &BandStructure) -> Result<GridFunction> {
    if c.grid != *bs.grid() {
        return Err(Error::GridMismatch("coefficients were built on a different grid".into()));
    }
    let layout = bs.layout()?;
    let mut out = vec![Complex64::new(0.0, 0.0); c.data.len()];
    synthesize_raw(bs, layout, &c.data, &mut out);
    GridFunction::new(*bs.grid(), out)
}

/// Multiplies every coefficient by `e^{-itE}`.
pub fn apply_phases(c: &mut [Complex64], energies: &[f64], t: f64) {
    if t == 0.0 {
        return;
    }
    c.par_iter_mut().zip(energies.par_iter()).for_each(|(z, &e)| *z *= Complex64::from_polar(1.0, -t * e));
}

/// `e^{-itH} f` for the convention `i∂ₜu = Hu`.
pub fn evolve_linear(f: &GridFunction, t: f64, bs: &BandStructure) -> Result<GridFunction> {
    let mut c = bloch_analyze(f, bs)?;
    apply_phases(&mut c.data, &mode_energies(bs)?, t);
    bloch_synthesize(&c, bs)
}

/// Sharp `{0, 1}` characteristic function over `(fiber, mode)` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralMask {
    modes_per_fiber: usize,
    bits: Vec<bool>,
}

impl SpectralMask {
    pub fn full(bs: &BandStructure) -> Result<Self> {
        let nx = bs.layout()?.modes_per_fiber;
        Ok(Self { modes_per_fiber: nx, bits: vec![true; bs.grid().len()] })
    }

    pub fn empty(bs: &BandStructure) -> Result<Self> {
        let nx = bs.layout()?.modes_per_fiber;
        Ok(Self { modes_per_fiber: nx, bits: vec![false; bs.grid().len()] })
    }

    /// Mask selecting only the modes `< n_bands` of every fiber.
    pub fn lowest_bands(bs: &BandStructure, n_bands: usize) -> Result<Self> {
        let mut m = Self::empty(bs)?;
        let nx = m.modes_per_fiber;
        for (i, b) in m.bits.iter_mut().enumerate() {
            *b = i % nx < n_bands;
        }
        Ok(m)
    }

    pub fn get(&self, fiber: usize, mode: usize) -> bool {
        self.bits[fiber * self.modes_per_fiber + mode]
    }

    pub fn set(&mut self, fiber: usize, mode: usize, value: bool) {
        self.bits[fiber * self.modes_per_fiber + mode] = value;
    }

    pub fn complement(&self) -> Self {
        Self { modes_per_fiber: self.modes_per_fiber, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn and(&self, other: &Self) -> Self {
        Self {
            modes_per_fiber: self.modes_per_fiber,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn or(&self, other: &Self) -> Self {
        Self {
            modes_per_fiber: self.modes_per_fiber,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn apply(&self, c: &mut [Complex64]) {
        for (z, keep) in c.iter_mut().zip(&self.bits) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Builds `χ₁` (neighbourhoods of inflection points of the first `n_bands`
/// bands plus every mode `>= n_bands`) and its complement `χ₂`.
///
/// A fiber belongs to the neighbourhood of an inflection at `k*` when its
/// periodic distance to `k*` is at most `halfwidth`; the two fibers
/// bracketing the sign change are always included.
pub fn build_masks(
    bs: &BandStructure,
    infl: &InflectionSet,
    halfwidth: f64,
    n_bands: usize,
) -> Result<(SpectralMask, SpectralMask)> {
    if !(halfwidth > 0.0) {
        return Err(Error::InvalidMask(format!("half-width must be positive, got {halfwidth}")));
    }
    if n_bands == 0 {
        return Err(Error::InvalidMask("n_bands must be at least 1".into()));
    }
    let mut chi1 = SpectralMask::empty(bs)?;
    let nx = chi1.modes_per_fiber;
    let period = bs.period();
    for s in 0..bs.fibers() {
        for mode in n_bands.min(nx)..nx {
            chi1.set(s, mode, true);
        }
    }
    for p in infl.points.iter().filter(|p| p.band < n_bands) {
        chi1.set(p.fibers.0, p.band, true);
        chi1.set(p.fibers.1, p.band, true);
        for s in 0..bs.fibers() {
            if fold_to_zone(bs.kpoint(s) - p.k, period).abs() <= halfwidth {
                chi1.set(s, p.band, true);
            }
        }
    }
    let chi2 = chi1.complement();
    if chi2.is_empty() {
        return Err(Error::InvalidMask(format!("half-width {halfwidth} leaves the regular part empty")));
    }
    Ok((chi1, chi2))
}

/// Spectral projection: zeroes the coefficients outside `mask`.
pub fn project(f: &GridFunction, mask: &SpectralMask, bs: &BandStructure) -> Result<GridFunction> {
    let mut c = bloch_analyze(f, bs)?;
    mask.apply(&mut c.data);
    bloch_synthesize(&c, bs)
}

/// Projection in coefficient space.
pub fn project_coeffs(c: &ModeCoefficients, mask: &SpectralMask) -> ModeCoefficients {
    let mut out = c.clone();
    mask.apply(&mut out.data);
    out
}

/// `x ↦ K(t, x, y)` for the masked propagator, i.e. `e^{-itH} π δ_y` with a
/// point mass of unit integral.
pub fn kernel_column(t: f64, y: usize, mask: &SpectralMask, bs: &BandStructure) -> Result<GridFunction> {
    let delta = GridFunction::point_mass(*bs.grid(), y);
    let mut c = bloch_analyze(&delta, bs)?;
    mask.apply(&mut c.data);
    apply_phases(&mut c.data, &mode_energies(bs)?, t);
    bloch_synthesize(&c, bs)
}

/// Smallest `N_b` whose tail (modes `>= N_b`) carries less than `rel_tol` of
/// the coefficient mass.
pub fn select_band_count(c: &ModeCoefficients, rel_tol: f64) -> usize {
    let total = c.norm_sq();
    if total == 0.0 {
        return 1;
    }
    let nx = c.modes_per_fiber;
    let mut per_mode = vec![0.0; nx];
    for fiber in c.data.chunks(nx) {
        for (acc, z) in per_mode.iter_mut().zip(fiber) {
            *acc += z.norm_sqr();
        }
    }
    let mut tail: f64 = per_mode.iter().sum();
    for (n, mass) in per_mode.iter().enumerate() {
        if tail < rel_tol * total {
            return n.max(1);
        }
        tail -= mass;
    }
    nx
}

/// Time range on which the torus faithfully mimics the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityWindow {
    pub t_min: f64,
    /// `0.8 · T_wrap`
    pub t_max: f64,
    /// `(Λ/2) / max |E_n'(k)|` over the relevant bands.
    pub t_wrap: f64,
    pub max_group_velocity: f64,
}

impl ValidityWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }
}

/// Wrap time of modes `< n_bands`; needs band derivatives.
pub fn validity_window(bs: &BandStructure, n_bands: usize, t_min: f64) -> Result<ValidityWindow> {
    let der = bs.derivatives().ok_or(Error::MissingDerivatives)?;
    let d = bs.band_count();
    let mut vmax: f64 = 0.0;
    for s in 0..bs.fibers() {
        for n in 0..n_bands.min(d) {
            let v = der.first[s * d + n];
            if !der.flagged[s * d + n] && v.is_finite() {
                vmax = vmax.max(v.abs());
            }
        }
    }
    if n_bands > d {
        let layout = bs.layout()?;
        let shell = layout.modes_per_fiber - d;
        for s in 0..bs.fibers() {
            for slot in 0..shell.min(n_bands - d) {
                vmax = vmax.max(layout.shell_velocity[s * shell + slot].abs());
            }
        }
    }
    let t_wrap = if vmax > 0.0 { 0.5 * bs.grid().length() / vmax } else { f64::INFINITY };
    Ok(ValidityWindow { t_min, t_max: 0.8 * t_wrap, t_wrap, max_group_velocity: vmax })
}

/// Sup-norms of `e^{-itH} π f` at the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub usable: Vec<bool>,
    pub window: ValidityWindow,
}

impl DecayTable {
    pub fn usable_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().zip(&self.sup_norms).zip(&self.usable).filter(|(_, u)| **u).map(|((t, s), _)| (*t, *s))
    }

    /// `true` when the usable sup-norms never increase.
    pub fn is_monotone_decreasing(&self) -> bool {
        let v: Vec<f64> = self.usable_points().map(|p| p.1).collect();
        v.windows(2).all(|w| w[1] <= w[0])
    }
}

/// `count` logarithmically spaced times in `[t0, t1]`.
pub fn log_times(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![t0];
    }
    let (a, b) = (t0.ln(), t1.ln());
    let mut t: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
    t[0] = t0;
    t[count - 1] = t1;
    t
}

/// Measures `sup_x |e^{-itH} π f|` at every time; times outside `window`
/// are kept but flagged unusable.
pub fn decay_profile(
    f: &GridFunction,
    mask: &SpectralMask,
    bs: &BandStructure,
    times: &[f64],
    window: ValidityWindow,
) -> Result<DecayTable> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("decay times must be strictly increasing".into()));
    }
    let usable: Vec<bool> = times.iter().map(|&t| window.contains(t)).collect();
    if !usable.iter().any(|u| *u) {
        return Err(Error::EmptyWindow { t_min: window.t_min, t_max: window.t_max });
    }
    let mut c = bloch_analyze(f, bs)?;
    mask.apply(&mut c.data);
    let energies = mode_energies(bs)?;
    let layout = bs.layout()?;
    let sup_norms = times
        .iter()
        .map(|&t| {
            let mut ct = c.data.clone();
            apply_phases(&mut ct, &energies, t);
            let mut out = vec![Complex64::new(0.0, 0.0); ct.len()];
            synthesize_raw(bs, layout, &ct, &mut out);
            out.iter().map(|z| z.norm()).fold(0.0, f64::max)
        })
        .collect();
    Ok(DecayTable { times: times.to_vec(), sup_norms, usable, window })
}

/// Least-squares slope of `log(sup)` against `log(t)` over the usable
/// points, with its standard error.
pub fn fit_decay_slope(tbl: &DecayTable) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = tbl.usable_points().filter(|(t, s)| *t > 0.0 && *s > 0.0).collect();
    let span = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => b.0 / a.0,
        _ => 0.0,
    };
    if pts.len() < 8 || span < 10.0 * (1.0 - 1e-9) {
        return Err(Error::InsufficientSpan { points: pts.len(), span });
    }
    let xy: Vec<(f64, f64)> = pts.iter().map(|(t, s)| (t.ln(), s.ln())).collect();
    Ok(linear_fit(&xy))
}

/// Ordinary least squares `y = a + b x`; returns `(b, stderr(b))`.
pub fn linear_fit(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = if xy.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{band_derivatives, find_inflections, solve_bands, BlochProblem};
    use crate::fields::PeriodicPotential;
    use std::f64::consts::PI;

    fn mathieu(cells: usize, nx: usize) -> BandStructure {
        let grid = TorusGrid::new(2.0 * PI, cells, nx).unwrap();
        let p = BlochProblem::new(PeriodicPotential::cosine(2.0 * PI, 1.0).unwrap(), grid).unwrap();
        band_derivatives(solve_bands(&p).unwrap()).unwrap()
    }

    fn synthetic_table(exponent: f64) -> DecayTable {
        let times = log_times(1.0, 100.0, 12);
        let sup_norms = times.iter().map(|t| 3.0 * t.powf(exponent)).collect();
        let window = ValidityWindow { t_min: 1.0, t_max: 100.0, t_wrap: 125.0, max_group_velocity: 1.0 };
        DecayTable { usable: vec![true; times.len()], times, sup_norms, window }
    }

    #[test]
    fn exact_power_law_slope() {
        let (slope, stderr) = fit_decay_slope(&synthetic_table(-0.5)).unwrap();
        assert!((slope + 0.5).abs() < 1e-12);
        assert!(stderr < 1e-12);
    }

    #[test]
    fn short_span_is_rejected() {
        let mut t = synthetic_table(-0.5);
        t.times = log_times(1.0, 5.0, 12);
        assert!(matches!(fit_decay_slope(&t), Err(Error::InsufficientSpan { .. })));
        let mut t = synthetic_table(-0.5);
        for u in t.usable.iter_mut().skip(6) {
            *u = false;
        }
        assert!(matches!(fit_decay_slope(&t), Err(Error::InsufficientSpan { points: 6, .. })));
    }

    #[test]
    fn masks_partition_and_reject_empty_regular_part() {
        let bs = mathieu(16, 8);
        let infl = find_inflections(&bs, 2).unwrap();
        let (c1, c2) = build_masks(&bs, &infl, 0.05, 2).unwrap();
        assert!(c1.and(&c2).is_empty());
        assert!(c1.or(&c2).is_full());
        assert!(build_masks(&bs, &infl, 0.0, 2).is_err());
        assert!(matches!(build_masks(&bs, &infl, 10.0, 1), Err(Error::InvalidMask(_))));
    }

    #[test]
    fn tiny_halfwidth_keeps_only_bracketing_fibers() {
        let bs = mathieu(32, 8);
        let infl = find_inflections(&bs, 1).unwrap();
        assert_eq!(infl.len(), 2);
        let (c1, _) = build_masks(&bs, &infl, 1e-12, 1).unwrap();
        let band0: Vec<usize> = (0..bs.fibers()).filter(|&s| c1.get(s, 0)).collect();
        assert_eq!(band0.len(), 4);
        for p in &infl.points {
            assert!(band0.contains(&p.fibers.0) && band0.contains(&p.fibers.1));
        }
    }

    #[test]
    fn select_band_count_tracks_tail_mass() {
        let bs = mathieu(16, 8);
        let mut c = ModeCoefficients::zeros(&bs).unwrap();
        *c.get_mut(3, 0) = Complex64::new(1.0, 0.0);
        *c.get_mut(5, 2) = Complex64::new(1e-3, 0.0);
        assert_eq!(select_band_count(&c, 1e-8), 3);
        assert_eq!(select_band_count(&c, 1e-5), 1);
    }

    #[test]
    fn empty_window_is_an_error() {
        let bs = mathieu(16, 8);
        let f = GridFunction::point_mass(*bs.grid(), 3);
        let mask = SpectralMask::full(&bs).unwrap();
        let w = ValidityWindow { t_min: 1.0, t_max: 2.0, t_wrap: 2.5, max_group_velocity: 1.0 };
        assert!(matches!(decay_profile(&f, &mask, &bs, &[5.0, 6.0], w), Err(Error::EmptyWindow { .. })));
    }
}
