//! One function per subcommand; each returns its artifacts without touching the disk.

use std::f64::consts::PI;

use blochscatter_core::bloch::{band_derivatives, find_inflections, solve_bands, BandStructure, BlochProblem};
use blochscatter_core::fields::{GridFunction, TorusGrid};
use blochscatter_core::nls::{duhamel_residual, evolve_nls, EvolutionConfig, Nonlinearity, Trajectory};
use blochscatter_core::norms::{duhamel_ratio, h1_norm, strichartz_ratio, AdmissiblePair, TimeSampledSignal};
use blochscatter_core::propagator::{
    bloch_analyze, build_masks, decay_profile, fit_decay_slope, log_times, project, select_band_count,
    validity_window, DecayTable, SpectralMask, ValidityWindow,
};
use blochscatter_core::scattering::{
    dyadic_checkpoints, epsilon_scaling, extract_scattering_state, theorem_split, ScalingReport, ScatteringReport,
};
use blochscatter_core::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{admissible, MaskChoice, RunConfig};
use crate::data::{initial_data, member_seed, random_h1_data};
use crate::output::{json_bytes, num, nums, opt_num, snapshot_bytes, Csv, REPORT_SCHEMA_VERSION};
use crate::report::{Artifacts, Gate, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Bands,
    Decay,
    Strichartz,
    Evolve,
    Scatter,
    Scaling,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Bands => "bands",
            Subcommand::Decay => "decay",
            Subcommand::Strichartz => "strichartz",
            Subcommand::Evolve => "evolve",
            Subcommand::Scatter => "scatter",
            Subcommand::Scaling => "scaling",
        }
    }
}

pub fn run(sub: Subcommand, cfg: &RunConfig) -> Result<Artifacts> {
    match sub {
        Subcommand::Bands => bands(cfg),
        Subcommand::Decay => decay(cfg),
        Subcommand::Strichartz => strichartz(cfg),
        Subcommand::Evolve => evolve(cfg),
        Subcommand::Scatter => scatter(cfg),
        Subcommand::Scaling => scaling(cfg),
    }
}

/// Bands and derivatives on a torus of `cells` periods.
pub fn band_structure(cfg: &RunConfig, cells: usize) -> Result<BandStructure> {
    let p = BlochProblem::new(cfg.potential(), cfg.grid_with_cells(cells))?;
    band_derivatives(solve_bands(&p)?)
}

pub fn nonlinearity(cfg: &RunConfig) -> Result<Nonlinearity> {
    if cfg.nls.mu == 0.0 {
        Ok(Nonlinearity::Zero)
    } else {
        Nonlinearity::power(cfg.nls.mu, cfg.nls.p_exp)
    }
}

pub fn evolution_config(cfg: &RunConfig, nl: &Nonlinearity) -> EvolutionConfig {
    let n = &cfg.nls;
    EvolutionConfig {
        dt: n.dt,
        horizon: n.horizon,
        output_stride: n.output_stride,
        dealias: n.dealias.unwrap_or_else(|| nl.default_dealias()),
        eps_max: n.eps_max,
        c_guard: n.c_guard,
        ..EvolutionConfig::default()
    }
}

pub struct Masks {
    pub n_bands: usize,
    pub chi1: SpectralMask,
    pub chi2: SpectralMask,
    pub inflections: usize,
    pub window: ValidityWindow,
}

/// Masks and validity window for data `f`: the configured band count, or
/// the bands carrying all but `1e-8` of its mass.
pub fn masks_for(cfg: &RunConfig, bs: &BandStructure, f: &GridFunction) -> Result<Masks> {
    let n_bands = match cfg.masks.n_bands {
        Some(n) => n,
        None => select_band_count(&bloch_analyze(f, bs)?, 1e-8),
    };
    let infl = find_inflections(bs, n_bands.min(bs.band_count()))?;
    let (chi1, chi2) = build_masks(bs, &infl, cfg.halfwidth(), n_bands)?;
    let window = validity_window(bs, n_bands, 0.0)?;
    Ok(Masks { n_bands, chi1, chi2, inflections: infl.len(), window })
}

fn header(sub: Subcommand, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
    m.insert("subcommand".into(), json!(sub.name()));
    m.insert("seed".into(), json!(cfg.rng_seed));
    m.insert("period".into(), num(cfg.potential.period));
    m.insert("cells".into(), json!(cfg.grid.cells));
    m.insert("points_per_cell".into(), json!(cfg.grid.points_per_cell));
    m
}

fn window_json(w: &ValidityWindow) -> Value {
    json!({ "t_wrap": num(w.t_wrap), "t_max": num(w.t_max), "max_group_velocity": num(w.max_group_velocity) })
}

fn pair_json(p: AdmissiblePair) -> Value {
    json!([num(p.r()), num(p.p())])
}

fn pair_label(p: AdmissiblePair) -> String {
    let f = |x: f64| if x.is_infinite() { "inf".to_string() } else { format!("{x}") };
    format!("({}, {})", f(p.r()), f(p.p()))
}

fn bands(cfg: &RunConfig) -> Result<Artifacts> {
    let bs = band_structure(cfg, cfg.grid.cells)?;
    let v = cfg.potential();
    let count = cfg.bands.count.min(bs.band_count());
    let mut csv = Csv::new(&["k", "n", "E", "E'", "E''", "fiber", "flagged"]);
    let mut edges = vec![(f64::INFINITY, f64::NEG_INFINITY); count];
    for s in bs.sorted_fibers() {
        for (n, edge) in edges.iter_mut().enumerate() {
            let e = bs.energy(s, n);
            let (d1, d2, flag) = bs.derivative(s, n).expect("derivatives computed");
            csv.row(vec![bs.kpoint(s).into(), n.into(), e.into(), d1.into(), d2.into(), s.into(), flag.into()]);
            *edge = (edge.0.min(e), edge.1.max(e));
        }
    }
    let infl = find_inflections(&bs, count)?;
    let mut icsv = Csv::new(&["band", "k", "fiber_lo", "fiber_hi"]);
    for p in &infl.points {
        icsv.row(vec![p.band.into(), p.k.into(), p.fibers.0.into(), p.fibers.1.into()]);
    }
    let residual = bs.max_residual(&v)?;
    let defect = bs.max_unitarity_defect();
    let scale = 1.0 + edges.last().map_or(0.0, |e| e.1.abs());
    let mut art = Artifacts::default();
    art.gate(Gate::check("eigen_residual", residual <= 1e-9 * scale, residual, "<= 1e-9 (1 + |E_max|)"));
    art.gate(Gate::check("eigenvector_unitarity", defect <= 1e-10, defect, "<= 1e-10"));
    let mut parabola_error = Value::Null;
    if v.is_constant() {
        let err = folded_parabola_error(&bs, v.mean());
        parabola_error = num(err);
        art.gate(Gate::check("folded_parabolas", err <= 1e-9, err, "<= 1e-9"));
    }
    let mut rep = header(Subcommand::Bands, cfg);
    rep.insert("cutoff".into(), json!(bs.cutoff()));
    rep.insert("band_count".into(), json!(bs.band_count()));
    rep.insert("fibers".into(), json!(bs.fibers()));
    rep.insert(
        "band_edges".into(),
        Value::Array(edges.iter().map(|&(lo, hi)| json!({ "min": num(lo), "max": num(hi) })).collect()),
    );
    rep.insert(
        "gaps".into(),
        Value::Array(edges.windows(2).map(|w| num((w[1].0 - w[0].1).max(0.0))).collect()),
    );
    rep.insert(
        "inflections".into(),
        Value::Array(infl.points.iter().map(|p| json!({ "band": p.band, "k": num(p.k) })).collect()),
    );
    rep.insert("max_residual".into(), num(residual));
    rep.insert("max_unitarity_defect".into(), num(defect));
    rep.insert("folded_parabola_error".into(), parabola_error);
    rep.insert("gates".into(), art.gates_json());
    art.file("bands.csv", csv.into_bytes());
    art.file("inflections.csv", icsv.into_bytes());
    art.file("report.json", json_bytes(&Value::Object(rep)));
    Ok(art)
}

/// Largest gap between the computed bands and the sorted `(k + 2πm/L)² + V₀`.
pub fn folded_parabola_error(bs: &BandStructure, shift: f64) -> f64 {
    let m = bs.cutoff() as i64;
    let g = 2.0 * PI / bs.period();
    let mut err: f64 = 0.0;
    for s in 0..bs.fibers() {
        let k = bs.kpoint(s);
        let mut want: Vec<f64> = (-m..=m).map(|j| (k + g * j as f64).powi(2) + shift).collect();
        want.sort_by(f64::total_cmp);
        for (n, w) in want.iter().enumerate() {
            err = err.max((bs.energy(s, n) - w).abs());
        }
    }
    err
}

pub struct DecayFit {
    pub name: &'static str,
    pub table: DecayTable,
    pub fit: Result<(f64, f64)>,
    pub target: f64,
    pub tolerance: f64,
}

/// Point-mass decay: the whole flow for a constant potential, the χ₁ and
/// χ₂ parts of the band-projected point mass otherwise.
pub fn decay_fits(cfg: &RunConfig, bs: &BandStructure) -> Result<(Vec<DecayFit>, ValidityWindow, usize)> {
    let grid = *bs.grid();
    let delta = GridFunction::point_mass(grid, grid.len() / 2);
    let dc = &cfg.decay;
    let span = |w: &ValidityWindow| {
        let lo = dc.start_fraction.map_or(dc.t_min, |f| f * w.t_wrap).max(dc.t_min);
        log_times(lo, w.t_max, dc.points)
    };
    if cfg.potential().is_constant() {
        let full = SpectralMask::full(bs)?;
        let w = validity_window(bs, grid.points_per_cell(), dc.t_min)?;
        let table = decay_profile(&delta, &full, bs, &span(&w), w)?;
        let fit = fit_decay_slope(&table);
        return Ok((vec![DecayFit { name: "full", table, fit, target: -0.5, tolerance: 0.02 }], w, grid.points_per_cell()));
    }
    let f = project(&delta, &SpectralMask::lowest_bands(bs, dc.n_bands)?, bs)?;
    let nb = select_band_count(&bloch_analyze(&f, bs)?, 1e-8);
    let infl = find_inflections(bs, dc.n_bands)?;
    let (chi1, chi2) = build_masks(bs, &infl, cfg.halfwidth(), dc.n_bands)?;
    let w = validity_window(bs, nb, dc.t_min)?;
    let times = span(&w);
    let mut fits = Vec::new();
    for (name, mask, target) in [("chi1", &chi1, -1.0 / 3.0), ("chi2", &chi2, -0.5)] {
        let table = decay_profile(&f, mask, bs, &times, w)?;
        let fit = fit_decay_slope(&table);
        fits.push(DecayFit { name, table, fit, target, tolerance: 0.07 });
    }
    Ok((fits, w, dc.n_bands))
}

fn decay(cfg: &RunConfig) -> Result<Artifacts> {
    let bs = band_structure(cfg, cfg.grid.cells)?;
    let (fits, w, n_bands) = decay_fits(cfg, &bs)?;
    let mut art = Artifacts::default();
    for f in &fits {
        let mut csv = Csv::new(&["t", "sup_norm", "usable"]);
        for i in 0..f.table.times.len() {
            csv.row(vec![f.table.times[i].into(), f.table.sup_norms[i].into(), f.table.usable[i].into()]);
        }
        let name = if fits.len() == 1 { "decay.csv".to_string() } else { format!("decay_{}.csv", f.name) };
        art.file(&name, csv.into_bytes());
    }
    let mut slopes = serde_json::Map::new();
    for f in &fits {
        let (slope, stderr, err) = match &f.fit {
            Ok((s, e)) => (num(*s), num(*e), Value::Null),
            Err(e) => (Value::Null, Value::Null, json!(e.to_string())),
        };
        let tol = format!("{} +- {}", f.target, f.tolerance);
        let gate = match &f.fit {
            Ok((s, _)) => Gate::check(&format!("slope_{}", f.name), (s - f.target).abs() <= f.tolerance, *s, &tol),
            Err(e) => Gate::new(&format!("slope_{}", f.name), Verdict::Fail, f64::NAN, &tol).with_note(e.to_string()),
        };
        art.gate(gate);
        slopes.insert(
            f.name.into(),
            json!({
                "slope": slope,
                "stderr": stderr,
                "target": num(f.target),
                "tolerance": num(f.tolerance),
                "monotone": f.table.is_monotone_decreasing(),
                "fit_error": err,
            }),
        );
    }
    let mut rep = header(Subcommand::Decay, cfg);
    let primary = &fits[0];
    let usable: Vec<f64> = primary.table.usable_points().map(|(t, _)| t).collect();
    rep.insert("slope".into(), primary.fit.as_ref().map_or(Value::Null, |(s, _)| num(*s)));
    rep.insert("stderr".into(), primary.fit.as_ref().map_or(Value::Null, |(_, e)| num(*e)));
    rep.insert("window".into(), nums(&[usable.first().copied().unwrap_or(f64::NAN), usable.last().copied().unwrap_or(f64::NAN)]));
    rep.insert("T_wrap".into(), num(w.t_wrap));
    rep.insert("n_bands".into(), json!(n_bands));
    rep.insert("halfwidth".into(), num(cfg.halfwidth()));
    rep.insert("validity".into(), window_json(&w));
    rep.insert("times".into(), nums(&primary.table.times));
    rep.insert("slopes".into(), Value::Object(slopes));
    rep.insert("gates".into(), art.gates_json());
    art.file("report.json", json_bytes(&Value::Object(rep)));
    Ok(art)
}

fn unit_l2(f: GridFunction) -> GridFunction {
    let n = f.l2_norm();
    f.scaled(Complex64::new(1.0 / n, 0.0))
}

fn survey_mask(cfg: &RunConfig, bs: &BandStructure, sample: &GridFunction) -> Result<SpectralMask> {
    match cfg.strichartz.mask {
        MaskChoice::Full => SpectralMask::full(bs),
        MaskChoice::Chi1 => Ok(masks_for(cfg, bs, sample)?.chi1),
        MaskChoice::Chi2 => Ok(masks_for(cfg, bs, sample)?.chi2),
    }
}

/// Forcing `F(s) = cos(ωs + φ) e^{-s/τ} f` with seeded `ω ∈ [0.5, 3]`, `φ`, and `τ = T/4`.
pub fn seeded_forcing(seed: u64, cfg: &RunConfig, grid: TorusGrid) -> Result<TimeSampledSignal> {
    let f = unit_l2(random_h1_data(seed, 1.0, grid, &cfg.data));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_F42D_4C95_7F2D);
    let omega = rng.random_range(0.5..3.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let stride = cfg.nls.output_stride;
    let horizon = cfg.strichartz.horizon;
    let tau = horizon / 4.0;
    let n = (horizon / stride).round() as usize;
    let fields = (0..=n)
        .map(|i| {
            let s = i as f64 * stride;
            f.scaled(Complex64::new((omega * s + phase).cos() * (-s / tau).exp(), 0.0))
        })
        .collect();
    TimeSampledSignal::from_fields(stride, fields)
}

pub struct SurveyRow {
    pub label: String,
    pub per_domain_max: Vec<f64>,
    pub per_domain_median: Vec<f64>,
    pub ratios: Vec<Vec<f64>>,
    pub tails: Vec<Vec<f64>>,
}

impl SurveyRow {
    pub fn max_ratio(&self) -> f64 {
        self.per_domain_max.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spread of the per-domain maxima, in percent of the smallest.
    pub fn stability_pct(&self) -> f64 {
        let lo = self.per_domain_max.iter().copied().fold(f64::INFINITY, f64::min);
        100.0 * (self.max_ratio() - lo) / lo
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Homogeneous and inhomogeneous ratio surveys over every domain size.
pub fn strichartz_survey(cfg: &RunConfig) -> Result<(Vec<SurveyRow>, Vec<SurveyRow>, Vec<ValidityWindow>)> {
    let s = &cfg.strichartz;
    let pairs: Vec<AdmissiblePair> = s.pairs.iter().map(admissible).collect();
    let dpairs: Vec<(AdmissiblePair, AdmissiblePair)> =
        s.duhamel_pairs.iter().map(|[a, b]| (admissible(a), admissible(b))).collect();
    let mut hom: Vec<SurveyRow> = pairs
        .iter()
        .map(|&p| SurveyRow {
            label: pair_label(p),
            per_domain_max: vec![],
            per_domain_median: vec![],
            ratios: vec![],
            tails: vec![],
        })
        .collect();
    let mut inh: Vec<SurveyRow> = dpairs
        .iter()
        .map(|&(a, b)| SurveyRow {
            label: format!("{} / {}", pair_label(a), pair_label(b)),
            per_domain_max: vec![],
            per_domain_median: vec![],
            ratios: vec![],
            tails: vec![],
        })
        .collect();
    let mut windows = Vec::new();
    let stride = cfg.nls.output_stride;
    for &cells in &s.domain_sizes {
        let bs = band_structure(cfg, cells)?;
        let grid = *bs.grid();
        let data: Vec<GridFunction> = (0..s.samples as u64)
            .map(|i| unit_l2(random_h1_data(member_seed(cfg.rng_seed, 0, i), 1.0, grid, &cfg.data)))
            .collect();
        let mask = survey_mask(cfg, &bs, &data[0])?;
        windows.push(masks_for(cfg, &bs, &data[0])?.window);
        for (row, &pair) in hom.iter_mut().zip(&pairs) {
            let (ratios, tails): (Vec<f64>, Vec<f64>) = data
                .iter()
                .map(|f| strichartz_ratio(f, pair, &mask, &bs, s.horizon, stride).map(|r| (r.ratio, r.tail)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            row.per_domain_max.push(ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            row.per_domain_median.push(median(&ratios));
            row.ratios.push(ratios);
            row.tails.push(tails);
        }
        let forcings: Vec<TimeSampledSignal> = (0..s.forcing_samples as u64)
            .map(|i| seeded_forcing(member_seed(cfg.rng_seed, 1, i), cfg, grid))
            .collect::<Result<_>>()?;
        for (row, &(p1, p2)) in inh.iter_mut().zip(&dpairs) {
            let ratios: Vec<f64> =
                forcings.par_iter().map(|f| duhamel_ratio(f, p1, p2, &mask, &bs)).collect::<Result<_>>()?;
            row.per_domain_max.push(ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            row.per_domain_median.push(median(&ratios));
            row.ratios.push(ratios);
        }
    }
    Ok((hom, inh, windows))
}

fn strichartz(cfg: &RunConfig) -> Result<Artifacts> {
    let s = &cfg.strichartz;
    let (hom, inh, windows) = strichartz_survey(cfg)?;
    let mut art = Artifacts::default();
    let pairs: Vec<AdmissiblePair> = s.pairs.iter().map(admissible).collect();
    let mut csv = Csv::new(&["cells", "r", "p", "sample", "ratio", "tail"]);
    for (row, pair) in hom.iter().zip(&pairs) {
        for (d, &cells) in s.domain_sizes.iter().enumerate() {
            for (i, (&r, &t)) in row.ratios[d].iter().zip(&row.tails[d]).enumerate() {
                csv.row(vec![cells.into(), pair.r().into(), pair.p().into(), i.into(), r.into(), t.into()]);
            }
        }
    }
    let mut dcsv = Csv::new(&["cells", "combination", "sample", "ratio"]);
    for (c, row) in inh.iter().enumerate() {
        for (d, &cells) in s.domain_sizes.iter().enumerate() {
            for (i, &r) in row.ratios[d].iter().enumerate() {
                dcsv.row(vec![cells.into(), c.into(), i.into(), r.into()]);
            }
        }
    }
    let stable = |row: &SurveyRow| row.max_ratio().is_finite() && row.stability_pct() < 25.0;
    for (row, pair) in hom.iter().zip(&pairs) {
        art.gate(Gate::check(&format!("strichartz {}", row.label), stable(row), row.stability_pct(), "finite, < 25 %"));
        if pair.r().is_infinite() && s.mask == MaskChoice::Full {
            let dev = row.ratios.iter().flatten().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
            art.gate(Gate::check("unitarity (inf, 2)", dev <= 1e-10, dev, "|ratio - 1| <= 1e-10"));
        }
    }
    for row in &inh {
        art.gate(Gate::check(&format!("duhamel {}", row.label), stable(row), row.stability_pct(), "finite, < 25 %"));
    }
    let t_max = windows.iter().map(|w| w.t_max).fold(f64::INFINITY, f64::min);
    art.gate(Gate::guard("validity_window", s.horizon <= t_max, s.horizon, "horizon <= 0.8 T_wrap on every domain"));
    let row_json = |row: &SurveyRow, extra: Value| {
        let mut v = json!({
            "label": row.label,
            "n_samples": row.ratios.first().map_or(0, Vec::len),
            "max_ratio": num(row.max_ratio()),
            "median_ratio": num(median(&row.ratios.concat())),
            "domain_sizes": s.domain_sizes,
            "per_domain_max": nums(&row.per_domain_max),
            "per_domain_median": nums(&row.per_domain_median),
            "stability_pct": num(row.stability_pct()),
        });
        v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        v
    };
    let mut rep = header(Subcommand::Strichartz, cfg);
    rep.insert("horizon".into(), num(s.horizon));
    rep.insert("mask".into(), serde_json::to_value(s.mask).expect("mask serializes"));
    rep.insert(
        "pairs".into(),
        Value::Array(
            hom.iter()
                .zip(&pairs)
                .map(|(row, &p)| {
                    let tail = row.tails.iter().flatten().copied().fold(0.0, f64::max);
                    row_json(row, json!({ "pair": pair_json(p), "max_tail": num(tail) }))
                })
                .collect(),
        ),
    );
    rep.insert(
        "duhamel".into(),
        Value::Array(
            inh.iter()
                .zip(&s.duhamel_pairs)
                .map(|(row, [a, b])| {
                    row_json(row, json!({ "pair1": pair_json(admissible(a)), "pair2": pair_json(admissible(b)) }))
                })
                .collect(),
        ),
    );
    rep.insert("windows".into(), Value::Array(windows.iter().map(window_json).collect()));
    rep.insert("gates".into(), art.gates_json());
    art.file("strichartz.csv", csv.into_bytes());
    art.file("duhamel.csv", dcsv.into_bytes());
    art.file("report.json", json_bytes(&Value::Object(rep)));
    Ok(art)
}

fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let mut csv = Csv::new(&["t", "mass", "energy", "H1_norm", "sup_norm", "energy_drift"]);
    for i in 0..traj.len() {
        csv.row(vec![
            traj.times[i].into(),
            traj.mass[i].into(),
            traj.energy[i].into(),
            traj.h1[i].into(),
            traj.sup[i].into(),
            traj.energy_drift[i].into(),
        ]);
    }
    csv.into_bytes()
}

fn evolve(cfg: &RunConfig) -> Result<Artifacts> {
    let bs = band_structure(cfg, cfg.grid.cells)?;
    let nl = nonlinearity(cfg)?;
    let ecfg = evolution_config(cfg, &nl);
    let u0 = initial_data(cfg.rng_seed, cfg.data.eps, &cfg.data, &bs)?;
    let window = masks_for(cfg, &bs, &u0)?.window;
    let traj = evolve_nls(&u0, &ecfg, &nl, &bs)?;
    let residual = if ecfg.output_stride <= 1.0 / 16.0 { Some(duhamel_residual(&traj, &nl, &bs)?) } else { None };
    let mut art = Artifacts::default();
    let mass = traj.max_mass_drift();
    art.gate(Gate::check("mass_drift", mass <= 1e-10, mass, "relative <= 1e-10"));
    art.gate(Gate::guard("h1_guard", !traj.guard_tripped, traj.h1.iter().copied().fold(0.0, f64::max), "sup_t |u|_H1 <= c_guard eps"));
    art.gate(Gate::guard("validity_window", ecfg.horizon <= window.t_max, ecfg.horizon, "T <= 0.8 T_wrap"));
    let mut richardson = Value::Null;
    if cfg.evolve.richardson {
        let drifts: Vec<f64> = [1.0, 0.5, 0.25]
            .par_iter()
            .map(|&f| {
                let c = EvolutionConfig { dt: ecfg.dt * f, store_fields: false, ..ecfg.clone() };
                evolve_nls(&u0, &c, &nl, &bs).map(|t| t.max_energy_drift())
            })
            .collect::<Result<_>>()?;
        let ratios = [drifts[0] / drifts[1], drifts[1] / drifts[2]];
        let ok = ratios.iter().all(|r| (3.5..=4.5).contains(r));
        art.gate(Gate::check("energy_order", ok, ratios[1], "drift(dt)/drift(dt/2) in [3.5, 4.5]"));
        richardson = json!({ "dt": nums(&[ecfg.dt, ecfg.dt / 2.0, ecfg.dt / 4.0]), "max_energy_drift": nums(&drifts), "ratios": nums(&ratios) });
    }
    let t_last = *traj.times.last().expect("nonempty trajectory");
    let mut rep = header(Subcommand::Evolve, cfg);
    rep.insert("eps".into(), num(traj.eps));
    rep.insert("mu".into(), num(cfg.nls.mu));
    rep.insert("p_exp".into(), json!(cfg.nls.p_exp));
    rep.insert("dt".into(), num(ecfg.dt));
    rep.insert("horizon".into(), num(ecfg.horizon));
    rep.insert("dealias".into(), json!(ecfg.dealias));
    rep.insert("steps".into(), json!(traj.steps));
    rep.insert("max_mass_drift".into(), num(mass));
    rep.insert("max_energy_drift".into(), num(traj.max_energy_drift()));
    rep.insert("energy0".into(), num(traj.energy[0]));
    rep.insert("l6_linf".into(), num(traj.l6_linf()));
    rep.insert("guard_tripped".into(), json!(traj.guard_tripped));
    rep.insert("duhamel_residual".into(), opt_num(residual));
    rep.insert("window".into(), window_json(&window));
    rep.insert("richardson".into(), richardson);
    rep.insert("gates".into(), art.gates_json());
    art.file("evolve.csv", trajectory_csv(&traj));
    art.file("u0.bin", snapshot_bytes(&u0, 0.0));
    art.file("final.bin", snapshot_bytes(traj.fields.last().expect("fields stored"), t_last));
    art.file("report.json", json_bytes(&Value::Object(rep)));
    Ok(art)
}

fn scattering_json(r: &ScatteringReport) -> Value {
    json!({
        "checkpoints": nums(&r.checkpoints),
        "increments": nums(&r.increments),
        "increment_ratio": num(r.increment_ratio()),
        "strictly_decreasing": r.increments_strictly_decreasing(),
        "final_residual": num(*r.residual.last().unwrap_or(&0.0)),
        "u_plus_h1": num(r.u_plus_h1),
        "u0_h1": num(r.u0_h1),
        "guard_ok": r.guard_ok,
    })
}

fn scattering_gates(art: &mut Artifacts, tag: &str, r: &ScatteringReport, u0: &GridFunction, linear: bool) {
    if linear {
        let moved = r.increments.iter().copied().fold(0.0, f64::max).max(h1_norm(&(&r.u_plus - u0)));
        art.gate(Gate::check(&format!("{tag} linear_degenerate"), moved <= 1e-10, moved, "<= 1e-10"));
    } else {
        let ok = r.increments_strictly_decreasing() && r.increment_ratio() < 0.1;
        art.gate(Gate::check(&format!("{tag} cauchy"), ok, r.increment_ratio(), "strictly decreasing, last/first < 0.1"));
    }
    let ratio = if r.u0_h1 > 0.0 { r.u_plus_h1 / r.u0_h1 } else { 0.0 };
    art.gate(Gate::guard(&format!("{tag} h1_bound"), r.guard_ok, ratio, "|u_+|_H1 <= c_guard |u_0|_H1"));
}

fn scatter(cfg: &RunConfig) -> Result<Artifacts> {
    let bs = band_structure(cfg, cfg.grid.cells)?;
    let nl = nonlinearity(cfg)?;
    let ecfg = evolution_config(cfg, &nl);
    let u0 = initial_data(cfg.rng_seed, cfg.data.eps, &cfg.data, &bs)?;
    let masks = masks_for(cfg, &bs, &u0)?;
    let checkpoints = dyadic_checkpoints(ecfg.horizon, cfg.scatter.levels);
    let mut configs = vec![ecfg.clone()];
    if cfg.scatter.backward {
        configs.push(EvolutionConfig { backward: true, ..ecfg.clone() });
    }
    let trajs: Vec<Trajectory> = configs.par_iter().map(|c| evolve_nls(&u0, c, &nl, &bs)).collect::<Result<_>>()?;
    let reports: Vec<ScatteringReport> = trajs
        .iter()
        .map(|t| extract_scattering_state(t, &bs, &checkpoints, ecfg.c_guard))
        .collect::<Result<_>>()?;
    let pairs: Vec<AdmissiblePair> = cfg.scatter.pairs.iter().map(admissible).collect();
    let split = theorem_split(&trajs[0], &masks.chi1, &masks.chi2, &bs, &pairs)?;
    let mut art = Artifacts::default();
    for (tag, r) in ["forward", "backward"].iter().zip(&reports) {
        scattering_gates(&mut art, tag, r, &u0, nl.is_zero());
    }
    for row in &split {
        let ok = row.u1_ratio.is_finite() && row.u2_ratio.is_finite();
        art.gate(Gate::check(&format!("split {}", pair_label(row.pair)), ok, row.u2_ratio, "finite"));
    }
    let guard = trajs.iter().any(|t| t.guard_tripped);
    art.gate(Gate::guard("h1_guard", !guard, 0.0, "sup_t |u|_H1 <= c_guard eps"));
    art.gate(Gate::guard("validity_window", ecfg.horizon <= masks.window.t_max, ecfg.horizon, "T <= 0.8 T_wrap"));
    let mut cols = vec!["t", "residual_forward"];
    if reports.len() > 1 {
        cols.push("residual_backward");
    }
    let mut csv = Csv::new(&cols);
    for i in 0..reports[0].residual.len() {
        let mut row = vec![reports[0].residual_times[i].abs().into(), reports[0].residual[i].into()];
        if let Some(b) = reports.get(1) {
            row.push(b.residual[i].into());
        }
        csv.row(row);
    }
    let mut rep = header(Subcommand::Scatter, cfg);
    rep.insert("eps".into(), num(trajs[0].eps));
    rep.insert("mu".into(), num(cfg.nls.mu));
    rep.insert("p_exp".into(), json!(cfg.nls.p_exp));
    rep.insert("horizon".into(), num(ecfg.horizon));
    rep.insert("n_bands".into(), json!(masks.n_bands));
    rep.insert("inflections".into(), json!(masks.inflections));
    rep.insert("window".into(), window_json(&masks.window));
    rep.insert("l6_linf".into(), num(trajs[0].l6_linf()));
    rep.insert("forward".into(), scattering_json(&reports[0]));
    rep.insert("backward".into(), reports.get(1).map_or(Value::Null, scattering_json));
    rep.insert(
        "split".into(),
        Value::Array(
            split
                .iter()
                .map(|r| {
                    json!({
                        "pair": pair_json(r.pair),
                        "u1_norm": num(r.u1_norm),
                        "u2_norm": num(r.u2_norm),
                        "u1_ratio": num(r.u1_ratio),
                        "u2_ratio": num(r.u2_ratio),
                    })
                })
                .collect(),
        ),
    );
    rep.insert("gates".into(), art.gates_json());
    art.file("residual.csv", csv.into_bytes());
    art.file("u_plus.bin", snapshot_bytes(&reports[0].u_plus, 0.0));
    if let Some(b) = reports.get(1) {
        art.file("u_minus.bin", snapshot_bytes(&b.u_plus, 0.0));
    }
    art.file("report.json", json_bytes(&Value::Object(rep)));
    Ok(art)
}

pub struct ScalingRun {
    pub report: ScalingReport,
    /// `‖v‖` at `2μ` over `‖v‖` at `μ`, per amplitude, for `v₁` and `v₂`.
    pub doubling: Option<Vec<(f64, f64)>>,
}

pub fn scaling_run(cfg: &RunConfig, bs: &BandStructure) -> Result<ScalingRun> {
    let nl = nonlinearity(cfg)?;
    let ecfg = evolution_config(cfg, &nl);
    let shape = initial_data(cfg.rng_seed, 1.0, &cfg.data, bs)?;
    let masks = masks_for(cfg, bs, &shape)?;
    let pair = admissible(&cfg.scaling.pair);
    let amps = &cfg.scaling.amplitudes;
    let report = epsilon_scaling(amps, &shape, &ecfg, &nl, &masks.chi1, bs, pair)?;
    let doubling = if cfg.scaling.mu_doubling && !nl.is_zero() {
        let twice = epsilon_scaling(amps, &shape, &ecfg, &nl.scaled(2.0)?, &masks.chi1, bs, pair)?;
        Some(report.rows.iter().zip(&twice.rows).map(|(a, b)| (b.v1_norm / a.v1_norm, b.v2_norm / a.v2_norm)).collect())
    } else {
        None
    };
    Ok(ScalingRun { report, doubling })
}

fn scaling(cfg: &RunConfig) -> Result<Artifacts> {
    let bs = band_structure(cfg, cfg.grid.cells)?;
    let run = scaling_run(cfg, &bs)?;
    let rep_s = &run.report;
    let mut art = Artifacts::default();
    let mut csv = Csv::new(&["eps", "v1_norm", "v2_norm"]);
    for r in &rep_s.rows {
        csv.row(vec![r.eps.into(), r.v1_norm.into(), r.v2_norm.into()]);
    }
    match (rep_s.slope_v1, rep_s.slope_v2) {
        (Some(a), Some(b)) => {
            for (name, s) in [("slope_v1", a), ("slope_v2", b)] {
                art.gate(Gate::check(name, (6.7..=7.3).contains(&s), s, "in [6.7, 7.3]"));
            }
        }
        _ => {
            let m = rep_s.rows.iter().map(|r| r.v1_norm.max(r.v2_norm)).fold(0.0, f64::max);
            art.gate(Gate::check("linear_v", m <= 1e-10, m, "<= 1e-10"));
        }
    }
    if let Some(d) = &run.doubling {
        let worst = d.iter().flat_map(|&(a, b)| [a, b]).map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
        art.gate(Gate::check("mu_doubling", worst <= 0.2, worst, "ratio in [1.8, 2.2]"));
    }
    let excluded: Vec<&String> = rep_s.rows.iter().filter_map(|r| r.excluded.as_ref()).collect();
    art.gate(Gate::guard("guards", excluded.is_empty(), excluded.len() as f64, "no amplitude excluded"));
    let mut rep = header(Subcommand::Scaling, cfg);
    rep.insert("pair".into(), pair_json(admissible(&cfg.scaling.pair)));
    rep.insert("mu".into(), num(cfg.nls.mu));
    rep.insert("p_exp".into(), json!(cfg.nls.p_exp));
    rep.insert("horizon".into(), num(cfg.nls.horizon));
    rep.insert(
        "rows".into(),
        Value::Array(
            rep_s
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "eps": num(r.eps),
                        "v1_norm": num(r.v1_norm),
                        "v2_norm": num(r.v2_norm),
                        "l6_linf": num(r.l6_linf),
                        "excluded": r.excluded,
                    })
                })
                .collect(),
        ),
    );
    rep.insert("slope_v1".into(), opt_num(rep_s.slope_v1));
    rep.insert("slope_v2".into(), opt_num(rep_s.slope_v2));
    rep.insert("reference_slope".into(), num(rep_s.reference_slope));
    rep.insert(
        "mu_doubling".into(),
        run.doubling.as_ref().map_or(Value::Null, |d| {
            Value::Array(d.iter().map(|&(a, b)| json!({ "v1": num(a), "v2": num(b) })).collect())
        }),
    );
    rep.insert("gates".into(), art.gates_json());
    art.file("scaling.csv", csv.into_bytes());
    art.file("report.json", json_bytes(&Value::Object(rep)));
    Ok(art)
}
