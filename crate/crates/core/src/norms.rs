//! Sobolev norms, Birman–Solomjak mixed norms `ℓᵃ(ℤ, L^q([n, n+1], X))`,
//! admissible pairs and empirical Strichartz and Duhamel ratios.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::BandStructure;
use crate::error::{Error, PairViolation, Result};
use crate::fields::{bessel_multiplier, spectral_derivative, GridFunction};
use crate::propagator::{
    analyze_raw, apply_phases, bloch_analyze, linear_fit, mode_energies, synthesize_raw, SpectralMask,
};

const PAIR_TOL: f64 = 1e-12;

fn recip(x: f64) -> f64 {
    if x.is_infinite() { 0.0 } else { 1.0 / x }
}

/// Hölder conjugate `x / (x - 1)`, with `1' = ∞` and `∞' = 1`.
pub fn conjugate_exponent(x: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::InvalidExponent(format!("conjugate of {x} is undefined")));
    }
    Ok(if x == 1.0 {
        f64::INFINITY
    } else if x.is_infinite() {
        1.0
    } else {
        x / (x - 1.0)
    })
}

/// Exponents `(r, p)` with `2/r + 1/p = 1/2`, `r ∈ [4, ∞]`, `p ∈ [2, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissiblePair {
    r: f64,
    p: f64,
}

impl AdmissiblePair {
    pub fn validate(r: f64, p: f64) -> Result<Self> {
        let fail = |reason| Err(Error::Inadmissible { r, p, reason });
        if !(r >= 4.0) {
            return fail(PairViolation::TimeExponentRange);
        }
        if !(p >= 2.0) {
            return fail(PairViolation::SpaceExponentRange);
        }
        if (2.0 * recip(r) + recip(p) - 0.5).abs() > PAIR_TOL {
            return fail(PairViolation::ScalingRelation);
        }
        Ok(Self { r, p })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Outer exponent `3r/2` of the homogeneous estimate.
    pub fn outer(&self) -> f64 {
        1.5 * self.r
    }
}

/// Spatial norm descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialNorm {
    Lp(f64),
    /// `W^{1,p}`; `p = 2` is `H¹` through the Bessel multiplier, other `p` use
    /// the equivalent `‖f‖_p + ‖f'‖_p`.
    W1p(f64),
}

impl SpatialNorm {
    pub fn exponent(&self) -> f64 {
        match *self {
            SpatialNorm::Lp(p) | SpatialNorm::W1p(p) => p,
        }
    }

    fn check(&self) -> Result<()> {
        let p = self.exponent();
        if p >= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidExponent(format!("spatial exponent {p} is below 1")))
        }
    }
}

fn lp_norm(values: &[Complex64], h: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else if p == 2.0 {
        (h * values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    } else {
        (h * values.iter().map(|z| z.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

pub fn spatial_norm(f: &GridFunction, norm: SpatialNorm) -> Result<f64> {
    norm.check()?;
    let h = f.grid().spacing();
    Ok(match norm {
        SpatialNorm::Lp(p) => lp_norm(f.values(), h, p),
        SpatialNorm::W1p(p) if p == 2.0 => bessel_multiplier(f, 1.0).l2_norm(),
        SpatialNorm::W1p(p) => lp_norm(f.values(), h, p) + lp_norm(spectral_derivative(f, 1).values(), h, p),
    })
}

/// `H¹` norm via the Bessel multiplier.
pub fn h1_norm(f: &GridFunction) -> f64 {
    bessel_multiplier(f, 1.0).l2_norm()
}

#[derive(Debug, Clone, PartialEq)]
enum Samples {
    Fields(Vec<GridFunction>),
    Norms(Vec<f64>),
}

/// Uniformly sampled signal on `[0, T]`, sample `i` at `t = i·stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSampledSignal {
    stride: f64,
    per_unit: usize,
    samples: Samples,
}

fn steps_per_unit(stride: f64) -> Result<usize> {
    if !(stride > 0.0 && stride <= 1.0) {
        return Err(Error::Alignment(format!("stride {stride} must lie in (0, 1]")));
    }
    let n = (1.0 / stride).round();
    if (n * stride - 1.0).abs() > 1e-12 {
        return Err(Error::Alignment(format!("stride {stride} does not divide the unit interval")));
    }
    Ok(n as usize)
}

impl TimeSampledSignal {
    pub fn from_fields(stride: f64, fields: Vec<GridFunction>) -> Result<Self> {
        if let Some(first) = fields.first() {
            for f in &fields {
                f.check_same_grid(first.grid())?;
            }
        }
        Ok(Self { stride, per_unit: steps_per_unit(stride)?, samples: Samples::Fields(fields) })
    }

    /// Signal of precomputed spatial norms.
    pub fn from_norms(stride: f64, norms: Vec<f64>) -> Result<Self> {
        Ok(Self { stride, per_unit: steps_per_unit(stride)?, samples: Samples::Norms(norms) })
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Fields(f) => f.len(),
            Samples::Norms(n) => n.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.per_unit as f64
    }

    pub fn fields(&self) -> Option<&[GridFunction]> {
        match &self.samples {
            Samples::Fields(f) => Some(f),
            Samples::Norms(_) => None,
        }
    }

    /// Number of whole unit intervals covered.
    pub fn intervals(&self) -> Result<usize> {
        let n = self.len();
        if n < 2 || (n - 1) % self.per_unit != 0 {
            return Err(Error::Alignment(format!(
                "{n} samples at stride {} do not cover a whole number of unit intervals",
                self.stride
            )));
        }
        Ok((n - 1) / self.per_unit)
    }

    /// Spatial norm of every sample; a norm signal is returned as stored.
    pub fn spatial_norms(&self, norm: SpatialNorm) -> Result<Vec<f64>> {
        match &self.samples {
            Samples::Norms(n) => Ok(n.clone()),
            Samples::Fields(f) => f.par_iter().map(|g| spatial_norm(g, norm)).collect(),
        }
    }
}

/// `ℓ^outer(ℤ, L^inner([n, n+1], spatial))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedNormSpec {
    pub outer: f64,
    pub inner: f64,
    pub spatial: SpatialNorm,
}

impl MixedNormSpec {
    pub fn new(outer: f64, inner: f64, spatial: SpatialNorm) -> Result<Self> {
        for (name, x) in [("outer", outer), ("inner", inner)] {
            if !(x >= 1.0) {
                return Err(Error::InvalidExponent(format!("{name} exponent {x} is below 1")));
            }
        }
        spatial.check()?;
        Ok(Self { outer, inner, spatial })
    }

    /// `ℓ^{3r/2}(ℤ, L^∞ₜ([n, n+1], X))`.
    pub fn homogeneous(pair: AdmissiblePair, spatial: SpatialNorm) -> Result<Self> {
        Self::new(pair.outer(), f64::INFINITY, spatial)
    }

    /// `L^r_t X = ℓ^r(ℤ, L^r([n, n+1], X))`.
    pub fn lebesgue(r: f64, spatial: SpatialNorm) -> Result<Self> {
        Self::new(r, r, spatial)
    }
}

fn pnorm(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        values.map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Local `L^q([n, n+1])` norms over every unit interval, composite
/// trapezoid for finite `q`, max over samples for `q = ∞`.
pub fn interval_norms(values: &[f64], per_unit: usize, q: f64, stride: f64) -> Vec<f64> {
    values
        .windows(per_unit + 1)
        .step_by(per_unit)
        .map(|w| {
            if q.is_infinite() {
                w.iter().copied().fold(0.0, f64::max)
            } else {
                let last = w.len() - 1;
                let s: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(j, v)| if j == 0 || j == last { 0.5 } else { 1.0 } * v.powf(q))
                    .sum();
                (stride * s).powf(1.0 / q)
            }
        })
        .collect()
}

/// Mixed norm of a sampled signal.
pub fn mixed_norm(s: &TimeSampledSignal, spec: &MixedNormSpec) -> Result<f64> {
    s.intervals()?;
    let values = s.spatial_norms(spec.spatial)?;
    Ok(mixed_norm_of_values(&values, s, spec))
}

fn mixed_norm_of_values(values: &[f64], s: &TimeSampledSignal, spec: &MixedNormSpec) -> f64 {
    let local = interval_norms(values, s.per_unit, spec.inner, s.stride);
    pnorm(local.into_iter(), spec.outer)
}

/// Truncated Strichartz quotient and the estimated contribution of `t > T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrichartzRatio {
    pub ratio: f64,
    /// Tail estimate of the omitted intervals, extrapolated from the decay
    /// of the local norms; infinite when the fitted decay is not summable.
    pub tail: f64,
    pub local_norms: Vec<f64>,
}

/// Spatial norms of `e^{-itH} π f` at `t = i·stride`, `i = 0..=T/stride`.
pub fn projected_flow_norms(
    f: &GridFunction,
    mask: &SpectralMask,
    bs: &BandStructure,
    horizon: f64,
    stride: f64,
    norm: SpatialNorm,
) -> Result<Vec<f64>> {
    let per_unit = steps_per_unit(stride)?;
    let samples = (horizon * per_unit as f64).round() as usize;
    let mut c = bloch_analyze(f, bs)?;
    mask.apply(c.as_mut_slice());
    let energies = mode_energies(bs)?;
    let layout = bs.layout()?;
    let grid = *bs.grid();
    (0..=samples)
        .into_par_iter()
        .map(|i| {
            let mut ct = c.as_slice().to_vec();
            apply_phases(&mut ct, &energies, i as f64 / per_unit as f64);
            let mut out = vec![Complex64::new(0.0, 0.0); ct.len()];
            synthesize_raw(bs, layout, &ct, &mut out);
            spatial_norm(&GridFunction::new(grid, out)?, norm)
        })
        .collect()
}

fn tail_estimate(local: &[f64], outer: f64) -> f64 {
    let n = local.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let pts: Vec<(f64, f64)> = (n / 2..n)
        .filter(|&i| local[i] > 0.0)
        .map(|i| (((i as f64) + 0.5).ln(), local[i].ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let (slope, _) = linear_fit(&pts);
    let t = n as f64;
    let amp = local[n - 1] / (t - 0.5).powf(slope);
    if outer.is_infinite() {
        return if slope <= 0.0 { amp * t.powf(slope) } else { f64::INFINITY };
    }
    let e = slope * outer + 1.0;
    if e >= 0.0 {
        f64::INFINITY
    } else {
        amp * (t.powf(e) / -e).powf(1.0 / outer)
    }
}

/// `‖π e^{-itH} f‖_{ℓ^{3r/2}(ℤ, L^∞ₜ([n,n+1], Lᵖ))} / ‖f‖_{L²}` over `[0, T]`.
pub fn strichartz_ratio(
    f: &GridFunction,
    pair: AdmissiblePair,
    mask: &SpectralMask,
    bs: &BandStructure,
    horizon: f64,
    stride: f64,
) -> Result<StrichartzRatio> {
    let norm = f.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroInput("strichartz_ratio needs nonzero data"));
    }
    let values = projected_flow_norms(f, mask, bs, horizon, stride, SpatialNorm::Lp(pair.p()))?;
    let s = TimeSampledSignal::from_norms(stride, values)?;
    s.intervals()?;
    let spec = MixedNormSpec::homogeneous(pair, SpatialNorm::Lp(pair.p()))?;
    let vals = s.spatial_norms(spec.spatial)?;
    let local = interval_norms(&vals, s.per_unit, spec.inner, stride);
    let ratio = pnorm(local.iter().copied(), spec.outer) / norm;
    let tail = tail_estimate(&local, spec.outer) / norm;
    Ok(StrichartzRatio { ratio, tail, local_norms: local })
}

/// Duhamel quotient for the inhomogeneous estimate: the
/// `ℓ^{3r₁/2}(L^∞ₜ L^{p₁})` norm of `∫₀ᵗ e^{-i(t-s)H} π F(s) ds` (left
/// rectangle rule on the samples) over the `ℓ^{(3r₂/2)'}(L¹ₜ L^{p₂'})` norm of `F`.
pub fn duhamel_ratio(
    forcing: &TimeSampledSignal,
    pair1: AdmissiblePair,
    pair2: AdmissiblePair,
    mask: &SpectralMask,
    bs: &BandStructure,
) -> Result<f64> {
    let fields = forcing
        .fields()
        .ok_or_else(|| Error::Alignment("duhamel_ratio needs a field-valued forcing".into()))?;
    forcing.intervals()?;
    let dual_space = SpatialNorm::Lp(conjugate_exponent(pair2.p())?);
    let rhs_spec = MixedNormSpec::new(conjugate_exponent(pair2.outer())?, 1.0, dual_space)?;
    let rhs = mixed_norm(forcing, &rhs_spec)?;
    if rhs == 0.0 {
        return Err(Error::ZeroInput("duhamel_ratio needs a nonzero forcing"));
    }
    let lhs_values = duhamel_norms(fields, forcing.stride(), mask, bs, SpatialNorm::Lp(pair1.p()))?;
    let lhs_spec = MixedNormSpec::homogeneous(pair1, SpatialNorm::Lp(pair1.p()))?;
    Ok(mixed_norm_of_values(&lhs_values, forcing, &lhs_spec) / rhs)
}

/// Spatial norms of `D(tᵢ) = Σ_{j<i} Δ e^{-i(tᵢ-sⱼ)H} π F(sⱼ)`.
pub fn duhamel_norms(
    fields: &[GridFunction],
    stride: f64,
    mask: &SpectralMask,
    bs: &BandStructure,
    norm: SpatialNorm,
) -> Result<Vec<f64>> {
    let layout = bs.layout()?;
    let energies = mode_energies(bs)?;
    let grid = *bs.grid();
    let n = grid.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut cf = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        f.check_same_grid(&grid)?;
        let mut synth = vec![Complex64::new(0.0, 0.0); n];
        synthesize_raw(bs, layout, &acc, &mut synth);
        out.push(spatial_norm(&GridFunction::new(grid, synth)?, norm)?);
        if i + 1 == fields.len() {
            break;
        }
        analyze_raw(bs, layout, f.values(), &mut cf);
        mask.apply(&mut cf);
        for (a, c) in acc.iter_mut().zip(&cf) {
            *a += c * stride;
        }
        apply_phases(&mut acc, &energies, stride);
    }
    Ok(out)
}
