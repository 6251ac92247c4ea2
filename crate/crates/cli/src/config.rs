//! JSON run configuration and its parse-time validation.

use std::f64::consts::PI;
use std::fmt;

use blochscatter_core::fields::{PeriodicPotential, TorusGrid};
use blochscatter_core::norms::AdmissiblePair;
use blochscatter_core::Error as CoreError;
use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

pub const SCHEMA_VERSION: u32 = 1;

/// A time or space exponent; `"inf"` in JSON stands for infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => {
                n.as_f64().map(Exponent).ok_or_else(|| de::Error::custom(format!("exponent {n} is not representable")))
            }
            serde_json::Value::String(s) if s == "inf" => Ok(Exponent(f64::INFINITY)),
            other => Err(de::Error::custom(format!("expected a number or \"inf\", got {other}"))),
        }
    }
}

pub type PairSpec = [Exponent; 2];

fn pair(r: f64, p: f64) -> PairSpec {
    [Exponent(r), Exponent(p)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub masks: MaskConfig,
    #[serde(default)]
    pub nls: NlsConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub strichartz: StrichartzConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub scatter: ScatterConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// `V(x) = Σ V̂_m e^{2πimx/L}` given as `[m, re, im]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub period: f64,
    pub modes: Vec<(i64, f64, f64)>,
}

impl Default for PotentialConfig {
    /// `V(x) = 2cos(x)`
    fn default() -> Self {
        Self { period: 2.0 * PI, modes: vec![(-1, 1.0, 0.0), (1, 1.0, 0.0)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub cells: usize,
    pub points_per_cell: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cells: 256, points_per_cell: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    /// Quasimomentum halfwidth of χ₁ around each inflection; defaults to 10% of `π/L`.
    pub halfwidth: Option<f64>,
    /// Bands treated as resolved; chosen from the data when absent.
    pub n_bands: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlsConfig {
    /// `μ = 0` gives the linear flow.
    pub mu: f64,
    pub p_exp: u32,
    pub dt: f64,
    pub horizon: f64,
    pub output_stride: f64,
    /// Defaults to on for `p_exp >= 9`.
    pub dealias: Option<bool>,
    pub eps_max: f64,
    pub c_guard: f64,
}

impl Default for NlsConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            p_exp: 7,
            dt: 1.0 / 256.0,
            horizon: 8.0,
            output_stride: 1.0 / 16.0,
            dealias: None,
            eps_max: 0.1,
            c_guard: 10.0,
        }
    }
}

/// Random initial data: Gaussian modes on `|ξ| ∈ [xi_min, xi_max]` of the
/// lattice `2πℤ/reference_length`, under a Gaussian envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub eps: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub envelope_width: f64,
    pub reference_length: f64,
    /// Remove the lowest bands before the final rescaling.
    pub drop_bands: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { eps: 0.02, xi_min: 0.0, xi_max: 3.0, envelope_width: 6.0, reference_length: 64.0, drop_bands: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    /// Bands written to the CSV.
    pub count: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { count: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// The point mass is projected onto this many bands (non-constant `V`).
    pub n_bands: usize,
    pub points: usize,
    /// First fit time as a fraction of `T_wrap`; `t_min` when absent.
    pub start_fraction: Option<f64>,
    pub t_min: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { n_bands: 1, points: 12, start_fraction: Some(0.08), t_min: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskChoice {
    Full,
    Chi1,
    Chi2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrichartzConfig {
    pub pairs: Vec<PairSpec>,
    pub samples: usize,
    pub domain_sizes: Vec<usize>,
    pub horizon: f64,
    pub mask: MaskChoice,
    /// `(pair₁, pair₂)` combinations for the inhomogeneous estimate.
    pub duhamel_pairs: Vec<[PairSpec; 2]>,
    pub forcing_samples: usize,
}

impl Default for StrichartzConfig {
    fn default() -> Self {
        let inf = f64::INFINITY;
        Self {
            pairs: vec![pair(4.0, inf), pair(6.0, 6.0), pair(inf, 2.0)],
            samples: 20,
            domain_sizes: vec![32, 64, 128],
            horizon: 6.0,
            mask: MaskChoice::Full,
            duhamel_pairs: vec![
                [pair(6.0, 6.0), pair(6.0, 6.0)],
                [pair(4.0, inf), pair(inf, 2.0)],
                [pair(inf, 2.0), pair(4.0, inf)],
            ],
            forcing_samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// Repeat the run at `dt/2` and `dt/4` and report the energy-drift ratios.
    pub richardson: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    /// Checkpoints `T/2^{levels-1}, ..., T/2, T`.
    pub levels: usize,
    pub backward: bool,
    pub pairs: Vec<PairSpec>,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self { levels: 4, backward: true, pairs: vec![pair(4.0, f64::INFINITY), pair(f64::INFINITY, 2.0)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub amplitudes: Vec<f64>,
    pub pair: PairSpec,
    /// Repeat every amplitude at `2μ`.
    pub mu_doubling: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { amplitudes: vec![0.005, 0.01, 0.02, 0.04], pair: pair(6.0, 6.0), mu_doubling: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IssueCode {
    Schema,
    Reality,
    Aliasing,
    Alignment,
    Range,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::Schema => "E-SCHEMA",
            IssueCode::Reality => "E-REALITY",
            IssueCode::Aliasing => "E-ALIASING",
            IssueCode::Alignment => "E-ALIGNMENT",
            IssueCode::Range => "E-RANGE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub code: IssueCode,
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code.as_str(), self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration issue(s)", self.issues.len())?;
        for i in &self.issues {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a configuration, reporting every violation found.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
        issues: vec![ConfigIssue { code: IssueCode::Schema, path: "$".into(), message: e.to_string() }],
    })?;
    let issues = validate(&cfg);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { issues })
    }
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, code: IssueCode, path: &str, message: impl Into<String>) {
        self.0.push(ConfigIssue { code, path: path.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, code: IssueCode, path: &str, message: impl FnOnce() -> String) {
        if !ok {
            self.push(code, path, message());
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn divides(small: f64, big: f64) -> bool {
    if !(positive(small) && positive(big)) {
        return false;
    }
    let n = (big / small).round();
    n >= 1.0 && ((n * small - big) / big).abs() <= 1e-9
}

pub fn validate(cfg: &RunConfig) -> Vec<ConfigIssue> {
    use IssueCode::*;
    let mut out = Issues(Vec::new());
    out.check(cfg.schema_version == SCHEMA_VERSION, Schema, "schema_version", || {
        format!("unsupported version {}, expected {SCHEMA_VERSION}", cfg.schema_version)
    });

    let v = &cfg.potential;
    let mut potential_ok = positive(v.period);
    out.check(potential_ok, Range, "potential.period", || format!("must be positive, got {}", v.period));
    for (i, &(m, re, im)) in v.modes.iter().enumerate() {
        let path = format!("potential.modes[{i}]");
        if !(re.is_finite() && im.is_finite()) {
            out.push(Range, &path, "coefficients must be finite");
            potential_ok = false;
        }
        if v.modes[..i].iter().any(|&(n, _, _)| n == m) {
            out.push(Schema, &path, format!("mode {m} is listed twice"));
            potential_ok = false;
            continue;
        }
        let partner = v.modes.iter().find(|&&(n, _, _)| n == -m);
        let conj_ok = match partner {
            Some(&(_, pr, pi)) => (pr - re).abs() <= 1e-12 * (1.0 + re.abs()) && (pi + im).abs() <= 1e-12 * (1.0 + im.abs()),
            None => re == 0.0 && im == 0.0,
        };
        if !conj_ok {
            out.push(Reality, &path, format!("coefficient of mode {m} is not the conjugate of mode {}", -m));
            potential_ok = false;
        }
    }

    let g = &cfg.grid;
    let grid = TorusGrid::new(if positive(v.period) { v.period } else { 1.0 }, g.cells, g.points_per_cell);
    match &grid {
        Err(e) => out.push(Range, "grid", e.to_string()),
        Ok(_) => out.check(g.cells >= 8, Range, "grid.cells", || {
            format!("band derivatives need at least 8 cells, got {}", g.cells)
        }),
    }
    if potential_ok {
        let modes: Vec<(i64, Complex64)> = v.modes.iter().map(|&(m, re, im)| (m, Complex64::new(re, im))).collect();
        match PeriodicPotential::new(v.period, &modes) {
            Err(CoreError::Reality { .. }) => out.push(Reality, "potential.modes", "coefficients are not Hermitian"),
            Err(e) => out.push(Range, "potential", e.to_string()),
            Ok(p) => {
                if let Ok(grid) = &grid {
                    if let Err(e) = grid.check_potential(&p) {
                        let code = if matches!(e, CoreError::Aliasing { .. }) { Aliasing } else { Range };
                        out.push(code, "potential.modes", e.to_string());
                    }
                }
            }
        }
    }

    let n = &cfg.nls;
    out.check(n.mu.is_finite(), Range, "nls.mu", || "must be finite".into());
    out.check(n.mu == 0.0 || (n.p_exp >= 7 && n.p_exp % 2 == 1), Range, "nls.p_exp", || {
        format!("power must be odd and at least 7, got {}", n.p_exp)
    });
    out.check(positive(n.dt), Range, "nls.dt", || format!("must be positive, got {}", n.dt));
    out.check(positive(n.horizon), Range, "nls.horizon", || format!("must be positive, got {}", n.horizon));
    out.check(divides(n.output_stride, 1.0), Alignment, "nls.output_stride", || {
        format!("{} does not divide the unit interval", n.output_stride)
    });
    if positive(n.dt) {
        out.check(divides(n.dt, n.output_stride), Alignment, "nls.dt", || {
            format!("output stride {} is not a multiple of dt {}", n.output_stride, n.dt)
        });
    }
    if positive(n.horizon) {
        out.check(divides(n.output_stride, n.horizon), Alignment, "nls.horizon", || {
            format!("{} is not a multiple of the output stride {}", n.horizon, n.output_stride)
        });
    }
    out.check(positive(n.eps_max), Range, "nls.eps_max", || "must be positive".into());
    out.check(n.c_guard >= 1.0 && n.c_guard.is_finite(), Range, "nls.c_guard", || "must be at least 1".into());

    if let Some(h) = cfg.masks.halfwidth {
        out.check(positive(h), Range, "masks.halfwidth", || format!("must be positive, got {h}"));
    }
    out.check(cfg.masks.n_bands != Some(0), Range, "masks.n_bands", || "must be at least 1".into());

    let d = &cfg.data;
    out.check(positive(d.eps) && d.eps <= n.eps_max, Range, "data.eps", || {
        format!("must lie in (0, eps_max = {}], got {}", n.eps_max, d.eps)
    });
    out.check(d.xi_min >= 0.0 && d.xi_max > d.xi_min && d.xi_max.is_finite(), Range, "data.xi_max", || {
        format!("need 0 <= xi_min < xi_max, got [{}, {}]", d.xi_min, d.xi_max)
    });
    out.check(positive(d.envelope_width), Range, "data.envelope_width", || "must be positive".into());
    out.check(positive(d.reference_length), Range, "data.reference_length", || "must be positive".into());
    if d.xi_max.is_finite() && d.xi_max > d.xi_min && positive(d.reference_length) {
        let has_mode = {
            let q0 = (d.xi_min * d.reference_length / (2.0 * PI)).ceil();
            2.0 * PI * q0 / d.reference_length <= d.xi_max
        };
        out.check(has_mode, Range, "data", || "no lattice frequency falls inside [xi_min, xi_max]".into());
    }

    out.check(cfg.bands.count >= 1, Range, "bands.count", || "must be at least 1".into());

    let dc = &cfg.decay;
    out.check(dc.n_bands >= 1, Range, "decay.n_bands", || "must be at least 1".into());
    out.check(dc.points >= 8, Range, "decay.points", || format!("a slope fit needs at least 8 times, got {}", dc.points));
    out.check(positive(dc.t_min), Range, "decay.t_min", || "must be positive".into());
    if let Some(f) = dc.start_fraction {
        out.check(f > 0.0 && f <= 0.08, Range, "decay.start_fraction", || {
            format!("must lie in (0, 0.08] so the fit spans a decade below 0.8 T_wrap, got {f}")
        });
    }

    let s = &cfg.strichartz;
    check_pairs(&mut out, "strichartz.pairs", &s.pairs);
    for (i, [a, b]) in s.duhamel_pairs.iter().enumerate() {
        check_pairs(&mut out, &format!("strichartz.duhamel_pairs[{i}]"), &[*a, *b]);
    }
    out.check(s.samples >= 1, Range, "strichartz.samples", || "must be at least 1".into());
    out.check(!s.domain_sizes.is_empty() && s.domain_sizes.iter().all(|&c| c >= 8), Range, "strichartz.domain_sizes", || {
        "need at least one domain size, each at least 8 cells".into()
    });
    out.check(positive(s.horizon) && divides(1.0, s.horizon), Alignment, "strichartz.horizon", || {
        format!("must be a positive whole number of unit intervals, got {}", s.horizon)
    });

    let sc = &cfg.scatter;
    check_pairs(&mut out, "scatter.pairs", &sc.pairs);
    out.check(sc.levels >= 4, Range, "scatter.levels", || {
        format!("three dyadic levels need at least 4 checkpoints, got {}", sc.levels)
    });
    if sc.levels >= 4 && sc.levels < 60 && positive(n.horizon) {
        let first = n.horizon / 2f64.powi(sc.levels as i32 - 1);
        out.check(divides(n.output_stride, first), Alignment, "scatter.levels", || {
            format!("first checkpoint {first} is not a multiple of the output stride")
        });
    }

    let sl = &cfg.scaling;
    check_pairs(&mut out, "scaling.pair", &[sl.pair]);
    let (lo, hi) = sl.amplitudes.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    out.check(sl.amplitudes.len() >= 3 && lo > 0.0 && hi >= 4.0 * lo, Range, "scaling.amplitudes", || {
        "need at least 3 positive amplitudes spanning a factor of 4".into()
    });
    out.check(hi <= n.eps_max, Range, "scaling.amplitudes", || format!("amplitude {hi} exceeds eps_max = {}", n.eps_max));
    out.0
}

fn check_pairs(out: &mut Issues, path: &str, pairs: &[PairSpec]) {
    for (i, [r, p]) in pairs.iter().enumerate() {
        if let Err(e) = AdmissiblePair::validate(r.0, p.0) {
            out.push(IssueCode::Range, &format!("{path}[{i}]"), e.to_string());
        }
    }
}

impl RunConfig {
    pub fn potential(&self) -> PeriodicPotential {
        let modes: Vec<(i64, Complex64)> =
            self.potential.modes.iter().map(|&(m, re, im)| (m, Complex64::new(re, im))).collect();
        PeriodicPotential::new(self.potential.period, &modes).expect("validated at parse time")
    }

    pub fn grid_with_cells(&self, cells: usize) -> TorusGrid {
        TorusGrid::new(self.potential.period, cells, self.grid.points_per_cell).expect("validated at parse time")
    }

    pub fn halfwidth(&self) -> f64 {
        self.masks.halfwidth.unwrap_or(0.1 * PI / self.potential.period)
    }
}

pub fn admissible(p: &PairSpec) -> AdmissiblePair {
    AdmissiblePair::validate(p[0].0, p[1].0).expect("validated at parse time")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(patch: serde_json::Value) -> String {
        let mut base = serde_json::json!({ "schema_version": 1 });
        base.as_object_mut().unwrap().extend(patch.as_object().unwrap().clone());
        base.to_string()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.nls.output_stride, 1.0 / 16.0);
        assert_eq!(cfg.scaling.amplitudes, vec![0.005, 0.01, 0.02, 0.04]);
        assert_eq!(cfg.rng_seed, 0);
        assert!((cfg.potential().eval(0.0) - 2.0).abs() < 1e-14);
        assert!((cfg.halfwidth() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn missing_conjugate_is_a_reality_violation() {
        let err = parse_config(&with(serde_json::json!({"potential": {"period": 6.0, "modes": [[1, 1.0, 0.0]]}})))
            .unwrap_err();
        assert!(err.has(IssueCode::Reality), "{err}");
        let err = parse_config(&with(serde_json::json!({"potential": {"modes": [[1, 1.0, 0.5], [-1, 1.0, 0.5]]}})))
            .unwrap_err();
        assert!(err.has(IssueCode::Reality), "{err}");
    }

    #[test]
    fn misaligned_stride_is_an_alignment_violation() {
        let err = parse_config(&with(serde_json::json!({"nls": {"output_stride": 0.3}}))).unwrap_err();
        assert!(err.has(IssueCode::Alignment), "{err}");
        assert!(err.issues.iter().all(|i| i.code == IssueCode::Alignment));
    }

    #[test]
    fn aliasing_is_reported_against_the_grid() {
        let err = parse_config(&with(serde_json::json!({
            "grid": {"points_per_cell": 8},
            "potential": {"modes": [[4, 1.0, 0.0], [-4, 1.0, 0.0]]}
        })))
        .unwrap_err();
        assert!(err.has(IssueCode::Aliasing), "{err}");
    }

    #[test]
    fn all_issues_are_collected() {
        let err = parse_config(&with(serde_json::json!({
            "potential": {"modes": [[2, 1.0, 0.0]]},
            "nls": {"output_stride": 0.3, "dt": -1.0},
            "strichartz": {"pairs": [[2, "inf"]]},
            "scaling": {"amplitudes": [0.01, 0.02]}
        })))
        .unwrap_err();
        for code in [IssueCode::Reality, IssueCode::Alignment, IssueCode::Range] {
            assert!(err.has(code), "missing {code:?} in {err}");
        }
        assert!(err.issues.len() >= 5, "{err}");
    }

    #[test]
    fn schema_errors_are_distinct() {
        let err = parse_config(r#"{"schema_version": 1, "grid": {"cells": "many"}}"#).unwrap_err();
        assert_eq!(err.issues[0].code, IssueCode::Schema);
        let err = parse_config(r#"{"schema_version": 1, "unknown": 3}"#).unwrap_err();
        assert_eq!(err.issues[0].code, IssueCode::Schema);
        let err = parse_config(r#"{"schema_version": 2}"#).unwrap_err();
        assert_eq!(err.issues[0].code, IssueCode::Schema);
    }

    #[test]
    fn config_echo_reparses_identically() {
        let cfg = parse_config(&with(serde_json::json!({
            "nls": {"dt": 0.015625, "mu": -1.0},
            "masks": {"halfwidth": 0.1234567890123},
            "strichartz": {"pairs": [[4, "inf"], [6, 6]]},
            "rng_seed": 18446744073709551615u64
        })))
        .unwrap();
        let echo = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&echo).unwrap(), cfg);
    }

    #[test]
    fn exponents_accept_inf() {
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(e.0.is_infinite());
        assert!(serde_json::from_str::<Exponent>("\"infinity\"").is_err());
        assert_eq!(serde_json::to_string(&Exponent(f64::INFINITY)).unwrap(), "\"inf\"");
    }
}
