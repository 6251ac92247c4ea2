//! Small-data nonlinear flow `i∂ₜu = Hu + β(|u|²)u` by Strang splitting
//! with the exact Bloch linear step.
//!
//! [`evolve_nls`] carries the state as `u = e^{-itH}u₀ + v`: the free part
//! is recomputed from `t` exactly and only the Duhamel part `v` accumulates
//! nonlinear increments, so `v` stays accurate even far below `‖u‖·1e-16`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::BandStructure;
use crate::error::{Error, Result};
use crate::fields::{forward_in_place, inverse_in_place, sample_potential, spectral_derivative, GridFunction, PeriodicPotential};
use crate::norms::{h1_norm, TimeSampledSignal};
use crate::propagator::{analyze_raw, apply_phases, evolve_linear, mode_energies, synthesize_raw};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pointwise nonlinearity `β(|u|²)` together with its primitive `G`.
#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    /// `β(s) = μ s^{(p-1)/2}` for odd `p >= 7`.
    Power { mu: f64, p: u32 },
    General { beta: ScalarFn, primitive: ScalarFn },
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => f.write_str("Zero"),
            Nonlinearity::Power { mu, p } => write!(f, "Power {{ mu: {mu}, p: {p} }}"),
            Nonlinearity::General { .. } => f.write_str("General"),
        }
    }
}

const FLATNESS_STEP: f64 = 1e-4;
const FLATNESS_TOL: f64 = 1e-2;

impl Nonlinearity {
    pub fn power(mu: f64, p: u32) -> Result<Self> {
        if !(mu.is_finite() && mu != 0.0) {
            return Err(Error::InvalidNonlinearity(format!("coefficient must be finite and nonzero, got {mu}")));
        }
        if p < 7 || p % 2 == 0 {
            return Err(Error::InvalidNonlinearity(format!("power must be an odd integer >= 7, got {p}")));
        }
        Ok(Nonlinearity::Power { mu, p })
    }

    /// General `β` with primitive `G` (`G' = β`, `G(0) = 0`). Rejects `β`
    /// unless `β(0)`, `β'(0)` and `β''(0)` vanish by a one-sided
    /// finite-difference probe.
    pub fn general(
        beta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        primitive: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let h = FLATNESS_STEP;
        let (b0, b1, b2) = (beta(0.0), beta(h), beta(2.0 * h));
        let d1 = (-3.0 * b0 + 4.0 * b1 - b2) / (2.0 * h);
        let d2 = (b0 - 2.0 * b1 + b2) / (h * h);
        if b0 != 0.0 || !(d1.abs() <= FLATNESS_TOL) || !(d2.abs() <= FLATNESS_TOL) {
            return Err(Error::InvalidNonlinearity(format!(
                "beta must vanish to second order at 0 (beta(0) = {b0}, beta'(0) ~ {d1}, beta''(0) ~ {d2})"
            )));
        }
        if primitive(0.0) != 0.0 {
            return Err(Error::InvalidNonlinearity("primitive must vanish at 0".into()));
        }
        Ok(Nonlinearity::General { beta: Arc::new(beta), primitive: Arc::new(primitive) })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Nonlinearity::Zero)
    }

    /// `β(s)`, `s = |u|²`.
    pub fn beta(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { mu, p } => mu * s.powi(((p - 1) / 2) as i32),
            Nonlinearity::General { beta, .. } => beta(s),
        }
    }

    /// `G(s)` with `G(0) = 0`, `G' = β`.
    pub fn primitive(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { mu, p } => {
                let k = (p + 1) / 2;
                mu * s.powi(k as i32) / k as f64
            }
            Nonlinearity::General { primitive, .. } => primitive(s),
        }
    }

    /// Same shape with the coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self {
            Nonlinearity::Zero => Ok(Nonlinearity::Zero),
            Nonlinearity::Power { mu, p } => Self::power(mu * factor, *p),
            Nonlinearity::General { beta, primitive } => {
                let (b, g) = (beta.clone(), primitive.clone());
                Ok(Nonlinearity::General {
                    beta: Arc::new(move |s| factor * b(s)),
                    primitive: Arc::new(move |s| factor * g(s)),
                })
            }
        }
    }

    /// Dealiasing is on by default for powers of 9 and above.
    pub fn default_dealias(&self) -> bool {
        matches!(self, Nonlinearity::Power { p, .. } if *p >= 9)
    }
}

/// Time-stepping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub horizon: f64,
    pub output_stride: f64,
    /// 2/3-rule filter on every nonlinear increment.
    pub dealias: bool,
    pub eps_max: f64,
    pub c_guard: f64,
    /// Integrate toward negative times; samples are stored at `-tᵢ`.
    pub backward: bool,
    /// Keep the fields `u(tᵢ)` and `v(tᵢ)`; the scalar logs are always kept.
    pub store_fields: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 256.0,
            horizon: 1.0,
            output_stride: 1.0 / 16.0,
            dealias: false,
            eps_max: 0.1,
            c_guard: 10.0,
            backward: false,
            store_fields: true,
        }
    }
}

fn ratio_index(num: f64, den: f64, what: &str) -> Result<usize> {
    let n = (num / den).round();
    if n < 1.0 || ((n * den - num) / num).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("{what}: {num} is not a positive multiple of {den}")));
    }
    Ok(n as usize)
}

impl EvolutionConfig {
    pub fn new(dt: f64, horizon: f64, output_stride: f64) -> Result<Self> {
        let cfg = Self { dt, horizon, output_stride, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        self.steps_per_output()?;
        ratio_index(1.0, self.output_stride, "output stride must divide 1")?;
        self.outputs()?;
        if !(self.eps_max > 0.0 && self.c_guard >= 1.0) {
            return Err(Error::InvalidConfig("guards must satisfy eps_max > 0 and c_guard >= 1".into()));
        }
        Ok(())
    }

    pub fn steps_per_output(&self) -> Result<usize> {
        ratio_index(self.output_stride, self.dt, "output stride must be a multiple of dt")
    }

    /// Number of output intervals `T / Δt_out`.
    pub fn outputs(&self) -> Result<usize> {
        ratio_index(self.horizon, self.output_stride, "horizon must be a multiple of the output stride")
    }

    fn sign(&self) -> f64 {
        if self.backward { -1.0 } else { 1.0 }
    }
}

/// Sampled NLS solution with conserved-quantity logs.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Signed sample times `±i·Δt_out`.
    pub times: Vec<f64>,
    pub output_stride: f64,
    pub u0: GridFunction,
    /// `‖u₀‖_{H¹}`
    pub eps: f64,
    /// `u(tᵢ)`; empty unless fields were stored.
    pub fields: Vec<GridFunction>,
    /// `v(tᵢ) = u(tᵢ) - e^{-itᵢH}u₀`; empty unless fields were stored.
    pub duhamel: Vec<GridFunction>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    /// `E(tᵢ) - E(0)`, accumulated in the split representation.
    pub energy_drift: Vec<f64>,
    pub h1: Vec<f64>,
    pub sup: Vec<f64>,
    /// `sup ‖u(t)‖_{H¹}` exceeded `c_guard·ε`.
    pub guard_tripped: bool,
    pub steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn signal(&self) -> Result<TimeSampledSignal> {
        self.require_fields()?;
        TimeSampledSignal::from_fields(self.output_stride, self.fields.clone())
    }

    pub fn duhamel_signal(&self) -> Result<TimeSampledSignal> {
        self.require_fields()?;
        TimeSampledSignal::from_fields(self.output_stride, self.duhamel.clone())
    }

    pub(crate) fn require_fields(&self) -> Result<()> {
        if self.fields.len() == self.times.len() {
            Ok(())
        } else {
            Err(Error::InvalidConfig("trajectory was recorded without fields".into()))
        }
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        let scale = if m0 > 0.0 { m0 } else { 1.0 };
        self.mass.iter().map(|m| (m - m0).abs() / scale).fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }

    /// `(∫ ‖u(t)‖_∞⁶ dt)^{1/6}` by the trapezoid rule over the samples.
    pub fn l6_linf(&self) -> f64 {
        let n = self.sup.len();
        let s: f64 =
            self.sup.iter().enumerate().map(|(i, v)| if i == 0 || i + 1 == n { 0.5 } else { 1.0 } * v.powi(6)).sum();
        (self.output_stride * s).powf(1.0 / 6.0)
    }
}

/// `∫ |u|² dx`.
pub fn mass(u: &GridFunction) -> f64 {
    u.norm_sq()
}

/// `∫ |u'|² + V|u|² + G(|u|²) dx` with the spectral derivative.
pub fn energy(u: &GridFunction, v: &PeriodicPotential, nl: &Nonlinearity) -> Result<f64> {
    let vx = sample_potential(v, u.grid())?;
    Ok(energy_with(u, &vx, nl))
}

fn energy_with(u: &GridFunction, vx: &GridFunction, nl: &Nonlinearity) -> f64 {
    let du = spectral_derivative(u, 1);
    let h = u.grid().spacing();
    let s: f64 = u
        .values()
        .iter()
        .zip(du.values())
        .zip(vx.values())
        .map(|((z, d), w)| {
            let s = z.norm_sqr();
            d.norm_sqr() + w.re * s + nl.primitive(s)
        })
        .sum();
    h * s
}

/// `u ↦ u·e^{-iθβ(|u|²)}` applied in place, returning nothing.
fn phase_in_place(u: &mut [Complex64], nl: &Nonlinearity, theta: f64) {
    u.par_iter_mut().for_each(|z| {
        let a = theta * nl.beta(z.norm_sqr());
        *z *= Complex64::from_polar(1.0, -a);
    });
}

/// One plain Strang step: half nonlinear phase, exact linear step, half phase.
pub fn strang_step(u: &GridFunction, dt: f64, nl: &Nonlinearity, bs: &BandStructure) -> Result<GridFunction> {
    let mut w = u.clone();
    phase_in_place(w.values_mut(), nl, 0.5 * dt);
    let mut w = evolve_linear(&w, dt, bs)?;
    phase_in_place(w.values_mut(), nl, 0.5 * dt);
    if !w.is_finite() {
        return Err(Error::NonFinite { step: 1 });
    }
    Ok(w)
}

/// Zeroes torus modes with `|q| > N/3`.
fn dealias(grid: &crate::fields::TorusGrid, buf: &mut [Complex64]) {
    forward_in_place(grid, buf);
    let cut = (grid.len() / 3) as i64;
    for (i, z) in buf.iter_mut().enumerate() {
        if grid.mode_at(i).abs() > cut {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    inverse_in_place(grid, buf);
}

/// Observer called at every output sample with `(index, t, u(t), v(t))`.
pub type Observer<'a> = dyn FnMut(usize, f64, &GridFunction, &GridFunction) -> Result<()> + 'a;

/// Integrates from `u₀` over `[0, T]` (or `[-T, 0]` when backward).
pub fn evolve_nls(u0: &GridFunction, cfg: &EvolutionConfig, nl: &Nonlinearity, bs: &BandStructure) -> Result<Trajectory> {
    evolve_nls_observed(u0, cfg, nl, bs, &mut |_, _, _, _| Ok(()))
}

/// [`evolve_nls`] with a per-sample observer, e.g. to reduce fields to
/// norms without storing them.
pub fn evolve_nls_observed(
    u0: &GridFunction,
    cfg: &EvolutionConfig,
    nl: &Nonlinearity,
    bs: &BandStructure,
    observer: &mut Observer<'_>,
) -> Result<Trajectory> {
    cfg.validate()?;
    u0.check_same_grid(bs.grid())?;
    let eps = h1_norm(u0);
    if eps > cfg.eps_max {
        return Err(Error::DataTooLarge { norm: eps, limit: cfg.eps_max });
    }
    let grid = *bs.grid();
    let n = grid.len();
    let layout = bs.layout()?;
    let energies = mode_energies(bs)?;
    let potential = grid_potential(bs)?;
    let sign = cfg.sign();
    let per_output = cfg.steps_per_output()?;
    let outputs = cfg.outputs()?;
    let zero = Complex64::new(0.0, 0.0);

    let mut c0 = vec![zero; n];
    analyze_raw(bs, layout, u0.values(), &mut c0);
    let mut cv = vec![zero; n];
    let mut cl = vec![zero; n];
    let mut u = vec![zero; n];
    let mut incr = vec![zero; n];
    let mut cincr = vec![zero; n];

    let g0: f64 = u0.values().iter().map(|z| nl.primitive(z.norm_sqr())).sum::<f64>() * grid.spacing();

    let mut traj = Trajectory {
        times: Vec::with_capacity(outputs + 1),
        output_stride: cfg.output_stride,
        u0: u0.clone(),
        eps,
        fields: Vec::new(),
        duhamel: Vec::new(),
        mass: Vec::new(),
        energy: Vec::new(),
        energy_drift: Vec::new(),
        h1: Vec::new(),
        sup: Vec::new(),
        guard_tripped: false,
        steps: outputs * per_output,
    };

    // u(t) from the split state: free part exact in t, Duhamel part accumulated
    let current = |t: f64, cv: &[Complex64], cl: &mut Vec<Complex64>, u: &mut Vec<Complex64>| {
        cl.copy_from_slice(&c0);
        apply_phases(cl, &energies, t);
        for (a, b) in cl.iter_mut().zip(cv) {
            *a += b;
        }
        synthesize_raw(bs, layout, cl, u);
    };

    let nonlinear = |theta: f64, u: &[Complex64], incr: &mut Vec<Complex64>, cincr: &mut Vec<Complex64>, cv: &mut Vec<Complex64>| {
        incr.par_iter_mut().zip(u.par_iter()).for_each(|(a, z)| {
            let th = theta * nl.beta(z.norm_sqr());
            // e^{-iθ} - 1 without cancellation
            let s = (0.5 * th).sin();
            *a = z * Complex64::new(-2.0 * s * s, -th.sin());
        });
        if cfg.dealias {
            dealias(&grid, incr);
        }
        analyze_raw(bs, layout, incr, cincr);
        for (a, b) in cv.iter_mut().zip(cincr.iter()) {
            *a += b;
        }
    };

    let mut record = |i: usize, t: f64, cv: &[Complex64], u: &[Complex64], traj: &mut Trajectory| -> Result<()> {
        let uf = GridFunction::new(grid, u.to_vec())?;
        let mut vbuf = vec![zero; n];
        synthesize_raw(bs, layout, cv, &mut vbuf);
        let vf = GridFunction::new(grid, vbuf)?;
        let mut cl = c0.clone();
        apply_phases(&mut cl, &energies, t);
        let cross: f64 = cl
            .iter()
            .zip(cv)
            .zip(&energies)
            .map(|((a, b), e)| e * (2.0 * (a.conj() * b).re + b.norm_sqr()))
            .sum();
        let g: f64 = u.iter().map(|z| nl.primitive(z.norm_sqr())).sum::<f64>() * grid.spacing();
        traj.times.push(t);
        traj.mass.push(uf.norm_sq());
        traj.energy.push(energy_with(&uf, &potential, nl));
        traj.energy_drift.push(cross + (g - g0));
        let h1 = h1_norm(&uf);
        traj.guard_tripped |= h1 > cfg.c_guard * eps;
        traj.h1.push(h1);
        traj.sup.push(uf.sup_norm());
        observer(i, t, &uf, &vf)?;
        if cfg.store_fields {
            traj.fields.push(uf);
            traj.duhamel.push(vf);
        }
        Ok(())
    };

    let dt = sign * cfg.dt;
    u.copy_from_slice(u0.values());
    record(0, 0.0, &cv, &u, &mut traj)?;
    let mut step = 0usize;
    for out in 1..=outputs {
        let t_start = sign * (out - 1) as f64 * cfg.output_stride;
        // first half phase, then fused full phases between linear steps
        current(t_start, &cv, &mut cl, &mut u);
        nonlinear(0.5 * dt, &u, &mut incr, &mut cincr, &mut cv);
        for j in 0..per_output {
            apply_phases(&mut cv, &energies, dt);
            step += 1;
            let t = t_start + (j + 1) as f64 * dt;
            current(t, &cv, &mut cl, &mut u);
            let theta = if j + 1 == per_output { 0.5 * dt } else { dt };
            nonlinear(theta, &u, &mut incr, &mut cincr, &mut cv);
            if cv.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFinite { step });
            }
        }
        let t = sign * out as f64 * cfg.output_stride;
        current(t, &cv, &mut cl, &mut u);
        record(out, t, &cv, &u, &mut traj)?;
    }
    if traj.guard_tripped {
        log::warn!("H1 guard exceeded: max {} vs {} x {}", traj.h1.iter().fold(0.0f64, |a, b| a.max(*b)), cfg.c_guard, eps);
    }
    Ok(traj)
}

fn grid_potential(bs: &BandStructure) -> Result<GridFunction> {
    sample_potential(bs.potential(), bs.grid())
}

/// `max_i ‖v(tᵢ) + i Σ_{j<i} Δ e^{-i(tᵢ-sⱼ)H} β(|u(sⱼ)|²)u(sⱼ)‖_{L²}`.
pub fn duhamel_residual(traj: &Trajectory, nl: &Nonlinearity, bs: &BandStructure) -> Result<f64> {
    traj.require_fields()?;
    if traj.output_stride > 1.0 / 16.0 + 1e-15 {
        return Err(Error::InvalidConfig(format!("output stride {} is coarser than 1/16", traj.output_stride)));
    }
    let layout = bs.layout()?;
    let energies = mode_energies(bs)?;
    let grid = *bs.grid();
    let n = grid.len();
    let zero = Complex64::new(0.0, 0.0);
    let step = if traj.times.len() > 1 { traj.times[1] - traj.times[0] } else { traj.output_stride };
    let mut acc = vec![zero; n];
    let mut cf = vec![zero; n];
    let mut force = vec![zero; n];
    let mut worst: f64 = 0.0;
    for (i, (u, v)) in traj.fields.iter().zip(&traj.duhamel).enumerate() {
        let mut d = vec![zero; n];
        synthesize_raw(bs, layout, &acc, &mut d);
        let r: f64 = v.values().iter().zip(&d).map(|(a, b)| (a + Complex64::i() * b).norm_sqr()).sum::<f64>();
        worst = worst.max((r * grid.spacing()).sqrt());
        if i + 1 == traj.fields.len() {
            break;
        }
        for (f, z) in force.iter_mut().zip(u.values()) {
            *f = z * nl.beta(z.norm_sqr());
        }
        analyze_raw(bs, layout, &force, &mut cf);
        for (a, c) in acc.iter_mut().zip(&cf) {
            *a += c * step;
        }
        apply_phases(&mut acc, &energies, step);
    }
    Ok(worst)
}
