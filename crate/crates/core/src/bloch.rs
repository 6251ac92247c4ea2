//! Bloch fibers `H(k)`, band functions and discrete Bloch functions.
//!
//! For a potential of period `L` the operator `-∂ₓ² + V` decomposes over
//! quasimomenta `k ∈ [-π/L, π/L)` into fibers acting on the plane waves
//! `e^{i(k + 2πm/L)x}`:
//!
//! ```text
//! H(k)_{mn} = (k + 2πm/L)² δ_{mn} + V̂_{m-n},    |m|, |n| ≤ M.
//! ```
//!
//! On a torus of `N_c` periods only the quasimomenta `k_j = 2πj/Λ` occur.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{PeriodicPotential, TorusGrid};

/// Overlap below which a band continuation is considered ambiguous.
pub const CONTINUATION_THRESHOLD: f64 = 0.9;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// What to do with a quasimomentum outside the fundamental zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZonePolicy {
    #[default]
    Reject,
    /// Fold back into the zone and log a warning.
    Fold,
}

/// Folds `k` into `[-π/L, π/L)`.
pub fn fold_to_zone(k: f64, period: f64) -> f64 {
    let g = 2.0 * PI / period;
    let folded = k - g * (k / g + 0.5).floor();
    if folded >= PI / period { folded - g } else { folded }
}

/// Assembles the Hermitian fiber `H(k)` of size `2M + 1`, rows and columns
/// ordered by `m = -M..=M`.
pub fn assemble_fiber(
    v: &PeriodicPotential,
    k: f64,
    cutoff: usize,
    policy: ZonePolicy,
) -> Result<DMatrix<Complex64>> {
    let period = v.period();
    let half = PI / period;
    if cutoff < v.max_mode() {
        return Err(Error::CutoffTooSmall { cutoff, max_mode: v.max_mode() });
    }
    let k = if k.abs() <= half * (1.0 + 1e-12) {
        k
    } else {
        match policy {
            ZonePolicy::Reject => return Err(Error::OutsideZone { k, half_width: half }),
            ZonePolicy::Fold => {
                let f = fold_to_zone(k, period);
                log::warn!("quasimomentum {k} folded into the zone as {f}");
                f
            }
        }
    };
    let dim = 2 * cutoff + 1;
    let g = 2.0 * PI / period;
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for a in 0..dim {
        let m = a as i64 - cutoff as i64;
        let kin = k + g * m as f64;
        h[(a, a)] = Complex64::new(kin * kin + v.mean(), 0.0);
        for b in 0..a {
            let n = b as i64 - cutoff as i64;
            let c = v.coeff(m - n);
            h[(a, b)] = c;
            h[(b, a)] = c.conj();
        }
    }
    Ok(h)
}

/// Ascending eigenpairs of a Hermitian matrix with the phase of every
/// eigenvector fixed so that its largest-magnitude entry is real positive.
pub fn hermitian_eigen(h: DMatrix<Complex64>) -> Option<(Vec<f64>, DMatrix<Complex64>)> {
    let dim = h.nrows();
    let eig = SymmetricEigen::try_new(h, EIGEN_EPS, EIGEN_MAX_ITER)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        // first entry within roundoff of the peak, so near-ties resolve the same way everywhere
        let pivot = v.iter().position(|z| z.norm() >= peak * (1.0 - 1e-9)).unwrap_or(0);
        let phase = v[pivot].conj() / v[pivot].norm();
        for r in 0..dim {
            vectors[(r, col)] = v[r] * phase;
        }
    }
    Some((values, vectors))
}

/// Band-structure problem on a torus.
#[derive(Debug, Clone)]
pub struct BlochProblem {
    potential: PeriodicPotential,
    grid: TorusGrid,
    cutoff: usize,
}

impl BlochProblem {
    /// Uses the default cutoff `M = N_x/2 - 1`.
    pub fn new(potential: PeriodicPotential, grid: TorusGrid) -> Result<Self> {
        let cutoff = grid.points_per_cell() / 2 - 1;
        Self::with_cutoff(potential, grid, cutoff)
    }

    pub fn with_cutoff(potential: PeriodicPotential, grid: TorusGrid, cutoff: usize) -> Result<Self> {
        grid.check_potential(&potential)?;
        if cutoff < potential.max_mode() {
            return Err(Error::CutoffTooSmall { cutoff, max_mode: potential.max_mode() });
        }
        if cutoff == 0 {
            return Err(Error::CutoffTooSmall { cutoff, max_mode: 1 });
        }
        Ok(Self { potential, grid, cutoff })
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.potential
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Quasimomentum of fiber `s`; fibers are stored with
    /// `j = s` for `s < N_c/2` and `j = s - N_c` otherwise.
    pub fn kpoint(&self, fiber: usize) -> f64 {
        kpoint(&self.grid, fiber)
    }
}

fn folded_index(cells: usize, fiber: usize) -> i64 {
    if fiber < cells / 2 {
        fiber as i64
    } else {
        fiber as i64 - cells as i64
    }
}

fn kpoint(grid: &TorusGrid, fiber: usize) -> f64 {
    2.0 * PI * folded_index(grid.cells(), fiber) as f64 / grid.length()
}

/// Finite-difference band derivatives with continuation flags.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDerivatives {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// `true` where the continuation to a neighbouring fiber was ambiguous.
    pub flagged: Vec<bool>,
}

/// How torus modes map onto fibers for propagation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TorusLayout {
    /// `N_x` slots per fiber: the first `2M+1` are the fiber basis `m = -M..=M`,
    /// the rest are uncoupled shell modes.
    pub modes_per_fiber: usize,
    /// Transform index of every slot, `[fiber][slot]`.
    pub index: Vec<usize>,
    /// Free energies `(k + 2πm/L)² + V̂_0` of the shell slots, `[fiber][slot - (2M+1)]`.
    pub shell_energy: Vec<f64>,
    /// Group velocities `2(k + 2πm/L)` of the shell slots.
    pub shell_velocity: Vec<f64>,
}

/// Band functions and Bloch eigenvectors on the torus quasimomentum grid.
#[derive(Debug, Clone)]
pub struct BandStructure {
    potential: PeriodicPotential,
    grid: TorusGrid,
    period: f64,
    cutoff: usize,
    kpoints: Vec<f64>,
    /// `[fiber][band]`
    energies: Vec<f64>,
    /// `[fiber][m][band]`, column `band` is the eigenvector.
    vectors: Vec<Complex64>,
    derivatives: Option<BandDerivatives>,
    layout: Option<TorusLayout>,
}

/// Diagonalizes every fiber of `p`.
pub fn solve_bands(p: &BlochProblem) -> Result<BandStructure> {
    let cells = p.grid.cells();
    let dim = 2 * p.cutoff + 1;
    let fibers: Vec<Result<(Vec<f64>, DMatrix<Complex64>)>> = (0..cells)
        .into_par_iter()
        .map(|s| {
            let k = p.kpoint(s);
            let h = assemble_fiber(&p.potential, k, p.cutoff, ZonePolicy::Reject)?;
            hermitian_eigen(h).ok_or(Error::EigenNonConvergence { fiber: s, k })
        })
        .collect();
    let mut energies = Vec::with_capacity(cells * dim);
    let mut vectors = Vec::with_capacity(cells * dim * dim);
    for f in fibers {
        let (vals, vecs) = f?;
        energies.extend(vals);
        for m in 0..dim {
            for n in 0..dim {
                vectors.push(vecs[(m, n)]);
            }
        }
    }
    let layout = (p.cutoff < p.grid.points_per_cell() / 2).then(|| build_layout(&p.grid, p.cutoff, p.potential.mean()));
    Ok(BandStructure {
        potential: p.potential.clone(),
        grid: p.grid,
        period: p.grid.period(),
        cutoff: p.cutoff,
        kpoints: (0..cells).map(|s| p.kpoint(s)).collect(),
        energies,
        vectors,
        derivatives: None,
        layout,
    })
}

fn build_layout(grid: &TorusGrid, cutoff: usize, mean: f64) -> TorusLayout {
    let cells = grid.cells();
    let nx = grid.points_per_cell();
    let half = (nx / 2) as i64;
    let g = 2.0 * PI / grid.period();
    let mut index = Vec::with_capacity(cells * nx);
    let mut shell_energy = Vec::new();
    let mut shell_velocity = Vec::new();
    for s in 0..cells {
        let j = folded_index(cells, s);
        let k = kpoint(grid, s);
        // torus modes q = j + N_c m with q ∈ [-N/2, N/2)
        let (lo, hi) = if j >= 0 { (-half, half - 1) } else { (-half + 1, half) };
        for m in -(cutoff as i64)..=cutoff as i64 {
            index.push(grid.index_of(j + cells as i64 * m));
        }
        for m in lo..=hi {
            if m.unsigned_abs() as usize > cutoff {
                index.push(grid.index_of(j + cells as i64 * m));
                let kin = k + g * m as f64;
                shell_energy.push(kin * kin + mean);
                shell_velocity.push(2.0 * kin);
            }
        }
    }
    TorusLayout { modes_per_fiber: nx, index, shell_energy, shell_velocity }
}

impl BandStructure {
    pub fn potential(&self) -> &PeriodicPotential {
        &self.potential
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Plane-wave cutoff `M`.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Number of bands `2M + 1` per fiber.
    pub fn band_count(&self) -> usize {
        2 * self.cutoff + 1
    }

    /// Number of fibers `N_c`.
    pub fn fibers(&self) -> usize {
        self.kpoints.len()
    }

    pub fn kpoint(&self, fiber: usize) -> f64 {
        self.kpoints[fiber]
    }

    pub fn kpoints(&self) -> &[f64] {
        &self.kpoints
    }

    /// Quasimomentum spacing `2π / Λ`.
    pub fn kstep(&self) -> f64 {
        2.0 * PI / self.grid.length()
    }

    pub fn energy(&self, fiber: usize, band: usize) -> f64 {
        self.energies[fiber * self.band_count() + band]
    }

    /// Energies of one fiber, ascending.
    pub fn fiber_energies(&self, fiber: usize) -> &[f64] {
        let d = self.band_count();
        &self.energies[fiber * d..(fiber + 1) * d]
    }

    /// Eigenvector matrix of one fiber, row-major `[m][band]`.
    pub fn fiber_vectors(&self, fiber: usize) -> &[Complex64] {
        let d = self.band_count();
        &self.vectors[fiber * d * d..(fiber + 1) * d * d]
    }

    /// Coefficient of `e^{i(k + 2πm/L)x}` in the Bloch function `(band, fiber)`.
    pub fn bloch_coeff(&self, fiber: usize, m: i64, band: usize) -> Complex64 {
        let row = (m + self.cutoff as i64) as usize;
        self.fiber_vectors(fiber)[row * self.band_count() + band]
    }

    pub fn derivatives(&self) -> Option<&BandDerivatives> {
        self.derivatives.as_ref()
    }

    /// `(E', E'', flagged)` of `(fiber, band)`.
    pub fn derivative(&self, fiber: usize, band: usize) -> Option<(f64, f64, bool)> {
        let d = self.derivatives.as_ref()?;
        let i = fiber * self.band_count() + band;
        Some((d.first[i], d.second[i], d.flagged[i]))
    }

    /// Fibers in ascending quasimomentum order.
    pub fn sorted_fibers(&self) -> Vec<usize> {
        let c = self.fibers();
        (0..c).map(|i| (i + c / 2) % c).collect()
    }

    pub(crate) fn layout(&self) -> Result<&TorusLayout> {
        self.layout.as_ref().ok_or_else(|| {
            Error::GridMismatch(format!(
                "cutoff {} exceeds the torus resolution (need M <= N_x/2 - 1 = {})",
                self.cutoff,
                self.grid.points_per_cell() / 2 - 1
            ))
        })
    }

    /// Hermitian fiber residual `max_n ‖H(k)φ_n − E_n φ_n‖ / (1 + |E_n|)`.
    pub fn max_residual(&self, v: &PeriodicPotential) -> Result<f64> {
        let d = self.band_count();
        let mut worst: f64 = 0.0;
        for s in 0..self.fibers() {
            let h = assemble_fiber(v, self.kpoint(s), self.cutoff, ZonePolicy::Reject)?;
            let phi = DMatrix::from_row_slice(d, d, self.fiber_vectors(s));
            let hp = &h * &phi;
            for n in 0..d {
                let e = self.energy(s, n);
                let r: f64 = (0..d).map(|m| (hp[(m, n)] - phi[(m, n)] * e).norm_sqr()).sum::<f64>().sqrt();
                worst = worst.max(r / (1.0 + e.abs()));
            }
        }
        Ok(worst)
    }

    /// `max_s ‖Φ_s^* Φ_s − I‖_max`.
    pub fn max_unitarity_defect(&self) -> f64 {
        let d = self.band_count();
        let mut worst: f64 = 0.0;
        for s in 0..self.fibers() {
            let phi = DMatrix::from_row_slice(d, d, self.fiber_vectors(s));
            let g = phi.adjoint() * &phi;
            for a in 0..d {
                for b in 0..d {
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((g[(a, b)] - Complex64::new(target, 0.0)).norm());
                }
            }
        }
        worst
    }

    /// Overlap `|⟨φ_{a, s}, φ_{b, t}⟩|` of Bloch factors on neighbouring
    /// fibers, accounting for the basis shift across the zone edge.
    fn neighbour_overlap(&self, s: usize, a: usize, t: usize, b: usize, shift: i64) -> f64 {
        let d = self.band_count() as i64;
        let va = self.fiber_vectors(s);
        let vb = self.fiber_vectors(t);
        let mut acc = Complex64::new(0.0, 0.0);
        for row in 0..d {
            let other = row + shift;
            if (0..d).contains(&other) {
                acc += va[(row * d) as usize + a].conj() * vb[(other * d) as usize + b];
            }
        }
        acc.norm()
    }

    /// Best continuation of band `a` at fiber `s` onto the neighbour in
    /// direction `dir` (±1). Returns `(fiber, band, overlap)`.
    fn continuation(&self, s: usize, a: usize, dir: i64) -> (usize, usize, f64) {
        let c = self.fibers();
        let t = ((s as i64 + dir).rem_euclid(c as i64)) as usize;
        // crossing k = π/L: plane wave m at +π/L is m + 1 at -π/L
        let shift = if dir > 0 && s + 1 == c / 2 {
            1
        } else if dir < 0 && s == c / 2 {
            -1
        } else {
            0
        };
        let d = self.band_count();
        // only nearby bands can be the continuation; scan a small window
        let lo = a.saturating_sub(3);
        let hi = (a + 4).min(d);
        let mut best = (t, a, -1.0);
        for b in lo..hi {
            let o = self.neighbour_overlap(s, a, t, b, shift);
            if o > best.2 {
                best = (t, b, o);
            }
        }
        best
    }
}

/// Computes `E'` and `E''` by central differences along the periodic
/// quasimomentum grid, following each band by maximal eigenvector overlap.
///
/// An entry is flagged when either continuation overlap falls below
/// [`CONTINUATION_THRESHOLD`] or a one-sided difference exceeds the kinematic
/// bound `2 max |k + 2πm/L|` of a smooth band.
pub fn band_derivatives(mut bs: BandStructure) -> Result<BandStructure> {
    let c = bs.fibers();
    if c < 8 {
        return Err(Error::TooFewFibers(c));
    }
    let d = bs.band_count();
    let dk = bs.kstep();
    // |E'| <= 2 max |k + 2πm/L| for any smooth band; steeper slopes straddle a
    // truncation discontinuity at the zone edge
    let kinematic = 2.0 * (bs.cutoff as f64 + 0.5) * 2.0 * PI / bs.period;
    let results: Vec<(f64, f64, bool)> = (0..c * d)
        .into_par_iter()
        .map(|i| {
            let (s, n) = (i / d, i % d);
            let (tp, np, op) = bs.continuation(s, n, 1);
            let (tm, nm, om) = bs.continuation(s, n, -1);
            let ep = bs.energy(tp, np);
            let em = bs.energy(tm, nm);
            let e0 = bs.energy(s, n);
            let first = (ep - em) / (2.0 * dk);
            let steep = (ep - e0).abs().max((e0 - em).abs()) > kinematic * dk * (1.0 + 1e-9);
            let flagged = op < CONTINUATION_THRESHOLD || om < CONTINUATION_THRESHOLD || steep;
            (first, (ep - 2.0 * e0 + em) / (dk * dk), flagged)
        })
        .collect();
    bs.derivatives = Some(BandDerivatives {
        first: results.iter().map(|r| r.0).collect(),
        second: results.iter().map(|r| r.1).collect(),
        flagged: results.iter().map(|r| r.2).collect(),
    });
    Ok(bs)
}

/// A sign change of `E_n''` between two neighbouring fibers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inflection {
    pub band: usize,
    /// Linearly interpolated location, folded into the zone.
    pub k: f64,
    /// The two fibers bracketing the sign change (lower `k` first).
    pub fibers: (usize, usize),
}

/// All detected inflection points of the lowest bands.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InflectionSet {
    pub points: Vec<Inflection>,
}

impl InflectionSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn for_band(&self, band: usize) -> impl Iterator<Item = &Inflection> {
        self.points.iter().filter(move |p| p.band == band)
    }
}

/// Sign changes of `E_n''` for `n < n_bands`, skipping flagged entries.
pub fn find_inflections(bs: &BandStructure, n_bands: usize) -> Result<InflectionSet> {
    let der = bs.derivatives().ok_or(Error::MissingDerivatives)?;
    let c = bs.fibers();
    let d = bs.band_count();
    let dk = bs.kstep();
    let order = bs.sorted_fibers();
    let mut points = Vec::new();
    for n in 0..n_bands.min(d) {
        for w in 0..c {
            let s = order[w];
            let t = order[(w + 1) % c];
            let (i, j) = (s * d + n, t * d + n);
            if der.flagged[i] || der.flagged[j] {
                continue;
            }
            let (a, b) = (der.second[i], der.second[j]);
            if a * b < 0.0 {
                let k = fold_to_zone(bs.kpoint(s) + dk * a / (a - b), bs.period());
                points.push(Inflection { band: n, k, fibers: (s, t) });
            }
        }
    }
    Ok(InflectionSet { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_pi() -> f64 {
        2.0 * PI
    }

    #[test]
    fn free_fiber_is_diagonal() {
        let v = PeriodicPotential::zero(two_pi()).unwrap();
        let h = assemble_fiber(&v, 0.3, 1, ZonePolicy::Reject).unwrap();
        let diag: Vec<f64> = (0..3).map(|i| h[(i, i)].re).collect();
        assert_abs_diff_eq!(diag[0], 0.49, epsilon = 1e-14);
        assert_abs_diff_eq!(diag[1], 0.09, epsilon = 1e-14);
        assert_abs_diff_eq!(diag[2], 1.69, epsilon = 1e-14);
        assert!(h.iter().enumerate().all(|(i, z)| i % 4 == 0 || z.norm() == 0.0));
    }

    #[test]
    fn fiber_is_exactly_hermitian() {
        let c = |re, im| Complex64::new(re, im);
        let v = PeriodicPotential::new(
            two_pi(),
            &[(0, c(0.4, 0.0)), (1, c(0.3, -0.7)), (-1, c(0.3, 0.7)), (3, c(-1.1, 0.2)), (-3, c(-1.1, -0.2))],
        )
        .unwrap();
        let h = assemble_fiber(&v, -0.21, 6, ZonePolicy::Reject).unwrap();
        assert_eq!(h, h.adjoint());
    }

    #[test]
    fn zone_policy() {
        let v = PeriodicPotential::zero(two_pi()).unwrap();
        assert!(matches!(assemble_fiber(&v, 0.75, 2, ZonePolicy::Reject), Err(Error::OutsideZone { .. })));
        let folded = assemble_fiber(&v, 0.75, 2, ZonePolicy::Fold).unwrap();
        let direct = assemble_fiber(&v, -0.25, 2, ZonePolicy::Reject).unwrap();
        assert_eq!(folded, direct);
        assert_abs_diff_eq!(fold_to_zone(0.5, two_pi()), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fold_to_zone(-1.3, two_pi()), -0.3, epsilon = 1e-15);
    }

    #[test]
    fn cutoff_below_potential_bandwidth_is_rejected() {
        let c = Complex64::new(1.0, 0.0);
        let v = PeriodicPotential::new(two_pi(), &[(2, c), (-2, c)]).unwrap();
        assert!(matches!(assemble_fiber(&v, 0.0, 1, ZonePolicy::Reject), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn eigen_phase_convention() {
        let v = PeriodicPotential::cosine(two_pi(), 1.0).unwrap();
        let h = assemble_fiber(&v, 0.1, 4, ZonePolicy::Reject).unwrap();
        let (vals, vecs) = hermitian_eigen(h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for col in 0..vecs.ncols() {
            let c = vecs.column(col);
            let peak = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let p = c.iter().position(|z| z.norm() >= peak * (1.0 - 1e-9)).unwrap();
            assert!(c[p].im.abs() < 1e-14 && c[p].re > 0.0);
        }
    }

    #[test]
    fn too_few_fibers_for_derivatives() {
        let grid = TorusGrid::new(two_pi(), 4, 8).unwrap();
        let p = BlochProblem::new(PeriodicPotential::zero(two_pi()).unwrap(), grid).unwrap();
        let bs = solve_bands(&p).unwrap();
        assert_eq!(band_derivatives(bs).unwrap_err(), Error::TooFewFibers(4));
    }

    #[test]
    fn inflections_need_derivatives_and_allow_zero_bands() {
        let grid = TorusGrid::new(two_pi(), 16, 8).unwrap();
        let p = BlochProblem::new(PeriodicPotential::cosine(two_pi(), 1.0).unwrap(), grid).unwrap();
        let bs = solve_bands(&p).unwrap();
        assert_eq!(find_inflections(&bs, 1).unwrap_err(), Error::MissingDerivatives);
        let bs = band_derivatives(bs).unwrap();
        assert!(find_inflections(&bs, 0).unwrap().is_empty());
    }

    #[test]
    fn layout_covers_every_torus_mode_once() {
        let grid = TorusGrid::new(two_pi(), 8, 8).unwrap();
        let p = BlochProblem::new(PeriodicPotential::zero(two_pi()).unwrap(), grid).unwrap();
        let bs = solve_bands(&p).unwrap();
        let layout = bs.layout().unwrap();
        let mut seen = vec![false; grid.len()];
        for &i in &layout.index {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
