//! Interaction picture, scattering states, the `u₁ + u₂` split norms and the
//! amplitude scaling of the Duhamel part.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::BandStructure;
use crate::error::{Error, Result};
use crate::fields::GridFunction;
use crate::nls::{evolve_nls_observed, EvolutionConfig, Nonlinearity, Trajectory};
use crate::norms::{h1_norm, interval_norms, spatial_norm, AdmissiblePair, MixedNormSpec, SpatialNorm, TimeSampledSignal};
use crate::propagator::{analyze_raw, apply_phases, linear_fit, mode_energies, synthesize_raw, SpectralMask};

/// `e^{itH}v(t)` for every stored sample.
fn pulled_back_duhamel(traj: &Trajectory, bs: &BandStructure) -> Result<Vec<Vec<Complex64>>> {
    traj.require_fields()?;
    let layout = bs.layout()?;
    let energies = mode_energies(bs)?;
    traj.duhamel
        .par_iter()
        .zip(traj.times.par_iter())
        .map(|(v, &t)| {
            let mut c = vec![Complex64::new(0.0, 0.0); v.len()];
            analyze_raw(bs, layout, v.values(), &mut c);
            apply_phases(&mut c, &energies, -t);
            Ok(c)
        })
        .collect()
}

fn synth(bs: &BandStructure, c: &[Complex64]) -> Result<GridFunction> {
    let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
    synthesize_raw(bs, bs.layout()?, c, &mut out);
    GridFunction::new(*bs.grid(), out)
}

/// `w(tᵢ) = e^{itᵢH}u(tᵢ)`, formed as `u₀ + e^{itᵢH}v(tᵢ)` so that `w(0) = u₀`
/// exactly.
pub fn interaction_picture(traj: &Trajectory, bs: &BandStructure) -> Result<TimeSampledSignal> {
    let pulled = pulled_back_duhamel(traj, bs)?;
    let fields = pulled
        .iter()
        .map(|c| Ok(&traj.u0 + &synth(bs, c)?))
        .collect::<Result<Vec<_>>>()?;
    TimeSampledSignal::from_fields(traj.output_stride, fields)
}

/// `{T/2^{levels-1}, …, T/2, T}`.
pub fn dyadic_checkpoints(horizon: f64, levels: usize) -> Vec<f64> {
    (0..levels).rev().map(|j| horizon / 2f64.powi(j as i32)).collect()
}

#[derive(Debug, Clone)]
pub struct ScatteringReport {
    /// `u₊ = w(T_last)` (or `u₋` for a backward trajectory).
    pub u_plus: GridFunction,
    pub checkpoints: Vec<f64>,
    /// `‖w(t_{j+1}) - w(t_j)‖_{H¹}`
    pub increments: Vec<f64>,
    pub residual_times: Vec<f64>,
    /// `‖u(t) - e^{-itH}u₊‖_{H¹}`
    pub residual: Vec<f64>,
    pub u_plus_h1: f64,
    pub u0_h1: f64,
    /// `‖u₊‖_{H¹} <= c_guard·‖u₀‖_{H¹}`
    pub guard_ok: bool,
}

impl ScatteringReport {
    pub fn increments_strictly_decreasing(&self) -> bool {
        self.increments.windows(2).all(|w| w[1] < w[0])
    }

    /// Last over first increment; zero when nothing moves.
    pub fn increment_ratio(&self) -> f64 {
        match (self.increments.first(), self.increments.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => 0.0,
        }
    }
}

/// Scattering state at the last checkpoint with Cauchy increments between
/// consecutive checkpoints; `checkpoints` are `|t|` and must be sample times.
pub fn extract_scattering_state(
    traj: &Trajectory,
    bs: &BandStructure,
    checkpoints: &[f64],
    c_guard: f64,
) -> Result<ScatteringReport> {
    if checkpoints.len() < 4 {
        return Err(Error::WindowTooShort(format!("need at least 4 checkpoints (3 dyadic levels), got {}", checkpoints.len())));
    }
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints[0] <= 0.0 {
        return Err(Error::WindowTooShort("checkpoints must be positive and strictly increasing".into()));
    }
    let stride = traj.output_stride;
    let index = |t: f64| -> Result<usize> {
        let i = (t / stride).round();
        if (i * stride - t).abs() > 1e-9 * t.max(1.0) || i as usize >= traj.len() {
            return Err(Error::WindowTooShort(format!("checkpoint {t} is not a sample time of the trajectory")));
        }
        Ok(i as usize)
    };
    let idx: Vec<usize> = checkpoints.iter().map(|&t| index(t)).collect::<Result<_>>()?;
    let pulled = pulled_back_duhamel(traj, bs)?;
    // w(t₂) - w(t₁) = e^{it₂H}v(t₂) - e^{it₁H}v(t₁)
    let increments = idx
        .windows(2)
        .map(|w| {
            let d: Vec<Complex64> = pulled[w[1]].iter().zip(&pulled[w[0]]).map(|(a, b)| a - b).collect();
            Ok(h1_norm(&synth(bs, &d)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let last = *idx.last().expect("checked length");
    let u_plus = &traj.u0 + &synth(bs, &pulled[last])?;
    let energies = mode_energies(bs)?;
    // u(t) - e^{-itH}u₊ = e^{-itH}(e^{itH}v(t) - e^{iTH}v(T))
    let residual = pulled
        .par_iter()
        .zip(traj.times.par_iter())
        .map(|(c, &t)| {
            let mut d: Vec<Complex64> = c.iter().zip(&pulled[last]).map(|(a, b)| a - b).collect();
            apply_phases(&mut d, &energies, t);
            Ok(h1_norm(&synth(bs, &d)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let u_plus_h1 = h1_norm(&u_plus);
    let u0_h1 = traj.eps;
    Ok(ScatteringReport {
        u_plus,
        checkpoints: checkpoints.to_vec(),
        increments,
        residual_times: traj.times.clone(),
        residual,
        u_plus_h1,
        u0_h1,
        guard_ok: u_plus_h1 <= c_guard * u0_h1,
    })
}

/// Norms of the split `u = u₁ + u₂` for one admissible pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRow {
    pub pair: AdmissiblePair,
    /// `‖u₁‖_{ℓ^{3r/2}(ℤ, L^∞ₜ W^{1,p})}`
    pub u1_norm: f64,
    /// `‖u₂‖_{Lʳₜ W^{1,p}}`
    pub u2_norm: f64,
    pub u1_ratio: f64,
    pub u2_ratio: f64,
}

fn projected_norms(
    fields: &[GridFunction],
    chi1: &SpectralMask,
    chi2: &SpectralMask,
    bs: &BandStructure,
    norms: &[SpatialNorm],
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let layout = bs.layout()?;
    let per_sample: Vec<Vec<(f64, f64)>> = fields
        .par_iter()
        .map(|u| {
            let mut c = vec![Complex64::new(0.0, 0.0); u.len()];
            analyze_raw(bs, layout, u.values(), &mut c);
            let mut c1 = c.clone();
            chi1.apply(&mut c1);
            chi2.apply(&mut c);
            let (u1, u2) = (synth(bs, &c1)?, synth(bs, &c)?);
            norms.iter().map(|&n| Ok((spatial_norm(&u1, n)?, spatial_norm(&u2, n)?))).collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..norms.len())
        .map(|k| (per_sample.iter().map(|s| s[k].0).collect(), per_sample.iter().map(|s| s[k].1).collect()))
        .collect())
}

fn split_norms(values1: &[f64], values2: &[f64], stride: f64, pair: AdmissiblePair) -> Result<(f64, f64)> {
    let space = SpatialNorm::W1p(pair.p());
    let s1 = TimeSampledSignal::from_norms(stride, values1.to_vec())?;
    let s2 = TimeSampledSignal::from_norms(stride, values2.to_vec())?;
    Ok((
        crate::norms::mixed_norm(&s1, &MixedNormSpec::homogeneous(pair, space)?)?,
        crate::norms::mixed_norm(&s2, &MixedNormSpec::lebesgue(pair.r(), space)?)?,
    ))
}

/// `u₁ = π_{χ₁}u`, `u₂ = π_{χ₂}u` per sample, measured for every pair.
pub fn theorem_split(
    traj: &Trajectory,
    chi1: &SpectralMask,
    chi2: &SpectralMask,
    bs: &BandStructure,
    pairs: &[AdmissiblePair],
) -> Result<Vec<SplitRow>> {
    traj.require_fields()?;
    let norms: Vec<SpatialNorm> = pairs.iter().map(|p| SpatialNorm::W1p(p.p())).collect();
    let values = projected_norms(&traj.fields, chi1, chi2, bs, &norms)?;
    pairs
        .iter()
        .zip(values)
        .map(|(&pair, (v1, v2))| {
            let (u1_norm, u2_norm) = split_norms(&v1, &v2, traj.output_stride, pair)?;
            let q = |x: f64| if traj.eps > 0.0 { x / traj.eps } else { 0.0 };
            Ok(SplitRow { pair, u1_norm, u2_norm, u1_ratio: q(u1_norm), u2_ratio: q(u2_norm) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub eps: f64,
    /// `‖πv‖` in the homogeneous mixed norm of the pair.
    pub v1_norm: f64,
    /// `‖(1-π)v‖_{Lʳₜ W^{1,p}}`
    pub v2_norm: f64,
    /// `‖u‖_{L⁶ₜ L^∞ₓ}` of the run.
    pub l6_linf: f64,
    /// Set when the run breached a guard and was excluded from the fit.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `None` when every norm vanishes (linear flow).
    pub slope_v1: Option<f64>,
    pub slope_v2: Option<f64>,
    pub reference_slope: f64,
}

/// Runs `u₀ = ε·shape` for every amplitude and fits `log ‖v_j‖` against `log ε`.
/// `shape` is rescaled to unit `H¹` norm.
pub fn epsilon_scaling(
    amplitudes: &[f64],
    shape: &GridFunction,
    cfg: &EvolutionConfig,
    nl: &Nonlinearity,
    chi1: &SpectralMask,
    bs: &BandStructure,
    pair: AdmissiblePair,
) -> Result<ScalingReport> {
    if amplitudes.len() < 3 {
        return Err(Error::Scaling(format!("need at least 3 amplitudes, got {}", amplitudes.len())));
    }
    let lo = amplitudes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = amplitudes.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 4.0 * (1.0 - 1e-12) {
        return Err(Error::Scaling(format!("amplitudes must be positive and span a factor >= 4 (got {lo}..{hi})")));
    }
    if hi > cfg.eps_max {
        return Err(Error::Scaling(format!("amplitude {hi} exceeds eps_max {}", cfg.eps_max)));
    }
    let norm = h1_norm(shape);
    if norm == 0.0 {
        return Err(Error::ZeroInput("epsilon_scaling needs a nonzero shape"));
    }
    let unit = shape.scaled(Complex64::new(1.0 / norm, 0.0));
    let chi2 = chi1.complement();
    let run_cfg = EvolutionConfig { store_fields: false, ..cfg.clone() };
    let space = SpatialNorm::W1p(pair.p());
    let layout = bs.layout()?;
    let mut rows: Vec<ScalingRow> = amplitudes
        .par_iter()
        .map(|&eps| {
            let u0 = unit.scaled(Complex64::new(eps, 0.0));
            let mut n1 = Vec::new();
            let mut n2 = Vec::new();
            let traj = evolve_nls_observed(&u0, &run_cfg, nl, bs, &mut |_, _, _, v| {
                let mut c = vec![Complex64::new(0.0, 0.0); v.len()];
                analyze_raw(bs, layout, v.values(), &mut c);
                let mut c1 = c.clone();
                chi1.apply(&mut c1);
                chi2.apply(&mut c);
                n1.push(spatial_norm(&synth(bs, &c1)?, space)?);
                n2.push(spatial_norm(&synth(bs, &c)?, space)?);
                Ok(())
            })?;
            let (v1_norm, v2_norm) = split_norms(&n1, &n2, cfg.output_stride, pair)?;
            let excluded = traj.guard_tripped.then(|| format!("H1 guard exceeded at eps = {eps}"));
            Ok(ScalingRow { eps, v1_norm, v2_norm, l6_linf: traj.l6_linf(), excluded })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let fit = |pick: fn(&ScalingRow) -> f64| -> Result<Option<f64>> {
        if rows.iter().all(|r| pick(r) == 0.0) {
            return Ok(None);
        }
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.excluded.is_none() && pick(r) > 0.0)
            .map(|r| (r.eps.ln(), pick(r).ln()))
            .collect();
        if pts.len() < 3 {
            return Err(Error::Scaling(format!("only {} usable amplitudes remain for the fit", pts.len())));
        }
        Ok(Some(linear_fit(&pts).0))
    };
    let slope_v1 = fit(|r| r.v1_norm)?;
    let slope_v2 = fit(|r| r.v2_norm)?;
    Ok(ScalingReport { rows, slope_v1, slope_v2, reference_slope: 7.0 })
}

/// Local `L^∞ₜ` norms per unit interval of a norm series, exposed for reports.
pub fn local_sup_norms(values: &[f64], stride: f64) -> Vec<f64> {
    let per_unit = (1.0 / stride).round() as usize;
    interval_norms(values, per_unit, f64::INFINITY, stride)
}
