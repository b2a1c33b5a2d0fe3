// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration and the analyze / transform / evolve / sweep pipeline.
//!
//! Configs are TOML documents; unknown keys are rejected and type errors
//! carry the offending key path. A minimal config only names the preset:
//!
//! ```toml
//! [preset]
//! name = "constant-times-lag"
//! params = { c = 1.0 }
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{self, StabilityReport, DEFAULT_T_CAP};
use crate::func::ScalarFn;
use crate::grid::Grid;
use crate::integrate::ImproperIntegral;
use crate::majorants::{self, KernelPreset};
use crate::operator::{EntryMode, KernelOperator, MultiplicationOperator};
use crate::transform::{self, Certificate, Inverse, IterateOptions, SimilarityTransform, DEFAULT_SPR_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    Transform,
    Evolve,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Transform => "transform",
            Command::Evolve => "evolve",
            Command::Sweep => "sweep",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analyze" => Ok(Command::Analyze),
            "transform" => Ok(Command::Transform),
            "evolve" => Ok(Command::Evolve),
            "sweep" => Ok(Command::Sweep),
            other => Err(Error::invalid(format!(
                "unknown command `{other}` (expected analyze, transform, evolve or sweep)"
            ))),
        }
    }
}

/// Increasing symbol `phi` of the multiplication operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSpec {
    #[default]
    Identity,
    /// `slope * x + offset`, `slope > 0`.
    Affine { slope: f64, offset: f64 },
    /// `x^exponent`, needs `a >= 0`.
    Power { exponent: f64 },
    /// `exp(rate * x)`, `rate > 0`.
    Exp { rate: f64 },
}

impl PhiSpec {
    pub fn is_identity(&self) -> bool {
        matches!(self, PhiSpec::Identity) || *self == PhiSpec::Affine { slope: 1.0, offset: 0.0 }
    }

    fn validate(&self, interval: (f64, f64)) -> Result<()> {
        let bad = |m: String| Err(Error::Config { path: "phi".into(), message: m });
        match *self {
            PhiSpec::Identity => Ok(()),
            PhiSpec::Affine { slope, offset } if !(slope > 0.0 && slope.is_finite() && offset.is_finite()) => {
                bad(format!("affine phi needs finite slope > 0, got slope {slope}, offset {offset}"))
            }
            PhiSpec::Power { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                bad(format!("power phi needs a positive exponent, got {exponent}"))
            }
            PhiSpec::Power { .. } if interval.0 < 0.0 => bad("power phi needs an interval inside [0, inf)".into()),
            PhiSpec::Exp { rate } if !(rate > 0.0 && rate.is_finite()) => {
                bad(format!("exp phi needs a positive rate, got {rate}"))
            }
            _ => Ok(()),
        }
    }

    pub fn to_fn(&self) -> ScalarFn {
        match *self {
            PhiSpec::Identity => ScalarFn::identity(),
            PhiSpec::Affine { slope, offset } => ScalarFn::new(format!("{slope} x + {offset}"), move |x| slope * x + offset),
            PhiSpec::Power { exponent } => ScalarFn::new(format!("x^{exponent}"), move |x: f64| x.powf(exponent)),
            PhiSpec::Exp { rate } => ScalarFn::new(format!("exp({rate} x)"), move |x: f64| (rate * x).exp()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Kernel matrix file for `custom-csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub term_tol: f64,
    pub residual_target: f64,
    pub spr_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            term_tol: 1e-10,
            residual_target: 1e-8,
            spr_margin: DEFAULT_SPR_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformBlock {
    pub terms_cap: usize,
}

impl Default for TransformBlock {
    fn default() -> Self {
        Self { terms_cap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveBlock {
    pub t_grid: Vec<f64>,
    pub t_cap: f64,
}

impl Default for EvolveBlock {
    fn default() -> Self {
        Self {
            t_grid: (0..=20).map(f64::from).collect(),
            t_cap: DEFAULT_T_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub param: String,
    pub values: Vec<f64>,
    #[serde(default = "default_sweep_command")]
    pub command: Command,
}

fn default_sweep_command() -> Command {
    Command::Analyze
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::invalid(format!("unknown format `{other}` (expected json or csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Dense CSV of the summed `K` (transform and evolve).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_matrix: Option<PathBuf>,
    /// Wall-clock timings in the report; off by default so that reports
    /// are byte-for-byte reproducible.
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: PresetSpec,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_interval")]
    pub interval: (f64, f64),
    #[serde(default)]
    pub phi: PhiSpec,
    #[serde(default)]
    pub entry_mode: EntryMode,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub transform: TransformBlock,
    #[serde(default)]
    pub evolve: EvolveBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_grid_n() -> usize {
    512
}

fn default_interval() -> (f64, f64) {
    (0.0, 1.0)
}

impl ScenarioConfig {
    /// Defaults for everything except the preset.
    pub fn for_preset(name: &str) -> Self {
        Self {
            preset: PresetSpec {
                name: name.to_string(),
                params: BTreeMap::new(),
                path: None,
            },
            grid_n: default_grid_n(),
            interval: default_interval(),
            phi: PhiSpec::default(),
            entry_mode: EntryMode::default(),
            tolerances: Tolerances::default(),
            transform: TransformBlock::default(),
            evolve: EvolveBlock::default(),
            sweep: None,
            output: OutputBlock::default(),
        }
    }

    /// Checks every constraint that does not need the kernel itself.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |path: &str, message: String| Err(Error::Config { path: path.into(), message });
        if self.grid_n < 2 {
            return cfg_err("grid_n", format!("must be at least 2, got {}", self.grid_n));
        }
        let (a, b) = self.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return cfg_err("interval", format!("need finite a < b, got ({a}, {b})"));
        }
        self.phi.validate(self.interval)?;
        let t = &self.tolerances;
        if !(t.term_tol > 0.0 && t.term_tol.is_finite()) {
            return cfg_err("tolerances.term_tol", format!("must be positive, got {}", t.term_tol));
        }
        if !(t.residual_target > 0.0 && t.residual_target.is_finite()) {
            return cfg_err("tolerances.residual_target", format!("must be positive, got {}", t.residual_target));
        }
        if !(t.spr_margin > 0.0 && t.spr_margin <= 0.5) {
            return cfg_err("tolerances.spr_margin", format!("must lie in (0, 0.5], got {}", t.spr_margin));
        }
        if self.transform.terms_cap == 0 {
            return cfg_err("transform.terms_cap", "must be at least 1".into());
        }
        let e = &self.evolve;
        if !(e.t_cap > 0.0 && e.t_cap.is_finite()) {
            return cfg_err("evolve.t_cap", format!("must be positive, got {}", e.t_cap));
        }
        if e.t_grid.is_empty() {
            return cfg_err("evolve.t_grid", "must not be empty".into());
        }
        if let Some(t) = e.t_grid.iter().find(|t| !t.is_finite() || t.abs() > e.t_cap) {
            return cfg_err("evolve.t_grid", format!("value {t} is not finite or exceeds t_cap {}", e.t_cap));
        }
        if self.preset.name == "custom-csv" {
            if self.preset.path.is_none() {
                return cfg_err("preset.path", "preset `custom-csv` needs a kernel file".into());
            }
            if !self.preset.params.is_empty() {
                return cfg_err("preset.params", "preset `custom-csv` takes no parameters".into());
            }
        } else {
            if self.preset.path.is_some() {
                return cfg_err("preset.path", format!("only `custom-csv` reads a kernel file, not `{}`", self.preset.name));
            }
            // parameter names, ranges and the entry-mode requirement
            self.build_preset()?;
        }
        if let Some(sw) = &self.sweep {
            if sw.command == Command::Sweep {
                return cfg_err("sweep.command", "a sweep cannot run another sweep".into());
            }
            let known = majorants::catalog()
                .into_iter()
                .find(|p| p.name == self.preset.name)
                .map(|p| p.params.contains_key(sw.param.as_str()))
                .unwrap_or(false);
            if !known {
                return cfg_err(
                    "sweep.param",
                    format!("`{}` is not a parameter of preset `{}`", sw.param, self.preset.name),
                );
            }
            if let Some(v) = sw.values.iter().find(|v| !v.is_finite()) {
                return cfg_err("sweep.values", format!("non-finite value {v}"));
            }
        }
        Ok(())
    }

    fn build_preset(&self) -> Result<KernelPreset> {
        let preset = match &self.preset.path {
            Some(path) if self.preset.name == "custom-csv" => majorants::preset_from_csv(path)?,
            _ => majorants::make_preset(&self.preset.name, &self.preset.params)?,
        };
        if preset.requires_cell_average && self.entry_mode != EntryMode::CellAverage {
            return Err(Error::Config {
                path: "entry_mode".into(),
                message: format!(
                    "preset `{}` with these parameters has a non-integrable kernel singularity; use entry_mode = \"cell-average\"",
                    self.preset.name
                ),
            });
        }
        Ok(preset)
    }

    /// TOML rendering of the config with all defaults filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

/// Parses and validates a TOML config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
        path: String::new(),
        message: e.message().to_string(),
    })?;
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path: if path == "." { String::new() } else { path },
            message: e.into_inner().message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Analysis of `V` and `W` on one grid.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub preset: KernelPreset,
    pub grid: Arc<Grid>,
    pub s: MultiplicationOperator,
    pub v: KernelOperator,
    /// Majorant sampled from the kernel formula.
    pub w: KernelOperator,
    /// `|[S, .]^{-1} V|`, the majorant of the discrete iterates.
    pub w_discrete: KernelOperator,
    pub v_norm: f64,
    pub w_norm: f64,
    pub certificate: Certificate,
    pub modulus: Option<ImproperIntegral>,
}

/// Transform stage output.
#[derive(Debug, Clone)]
pub struct TransformStage {
    pub transform: SimilarityTransform,
    pub inverse: Inverse,
    pub aggregate_bound_ok: Option<bool>,
    pub cond: f64,
    pub band: &'static str,
}

/// Evolve stage output.
#[derive(Debug, Clone)]
pub struct EvolveStage {
    pub stability: StabilityReport,
    /// Gap between `exp(itT) 1` and the conjugated group applied to `1` per `t`.
    pub vector_gaps: Option<Vec<f64>>,
}

/// One pipeline run (one sweep point, or the whole run outside sweeps).
#[derive(Debug, Clone)]
pub struct RunRow {
    pub command: Command,
    pub sweep_value: Option<f64>,
    pub params: BTreeMap<String, f64>,
    pub grid_n: usize,
    pub outcome: std::result::Result<RowData, RowError>,
}

#[derive(Debug, Clone)]
pub struct RowData {
    pub analysis: Analysis,
    pub transform: Option<TransformStage>,
    pub evolve: Option<EvolveStage>,
    /// Set when the evolve command skipped the transform for lack of a certificate.
    pub note: Option<String>,
}

/// Error captured for a sweep point.
#[derive(Debug, Clone)]
pub struct RowError {
    pub kind: &'static str,
    pub message: String,
    pub ratios: Option<Vec<f64>>,
    pub term_norms: Option<Vec<f64>>,
}

impl RowError {
    pub fn from_error(e: &Error) -> Self {
        let (ratios, term_norms) = match e {
            Error::Divergence { ratios, term_norms, .. } => (Some(ratios.clone()), Some(term_norms.clone())),
            _ => (None, None),
        };
        Self {
            kind: e.kind(),
            message: e.to_string(),
            ratios,
            term_norms,
        }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: Command,
    pub config: ScenarioConfig,
    pub rows: Vec<RunRow>,
    pub timings: Option<BTreeMap<String, f64>>,
    pub version: &'static str,
}

impl RunReport {
    /// 0 when every row is certified similar, 2 when some row is
    /// inconclusive, 1 when a sweep point failed.
    pub fn exit_code(&self) -> i32 {
        let mut code = 0;
        for row in &self.rows {
            match &row.outcome {
                Err(_) => return 1,
                Ok(d) if !d.analysis.certificate.verdict.is_similar() => code = 2,
                Ok(_) => {}
            }
        }
        code
    }
}

/// Builds the operators and the applicability certificate.
pub fn analyze(cfg: &ScenarioConfig) -> Result<Analysis> {
    let preset = cfg.build_preset()?;
    let grid = Grid::new(cfg.grid_n, cfg.interval.0, cfg.interval.1)?;
    let phi = cfg.phi.to_fn();
    let s = MultiplicationOperator::from_fn(&phi, &grid)?;
    let v = preset.perturbation(&grid, cfg.entry_mode)?;
    let w = preset.majorant_operator(&phi, &grid, cfg.entry_mode)?;
    let w_discrete = majorants::discrete_majorant(&s, &v)?;
    let q = if cfg.phi.is_identity() { preset.convolution_majorant(grid.span()) } else { None };
    let mut certificate = transform::spr_certificate(&w, q.as_ref(), cfg.tolerances.spr_margin)?;
    if preset.majorant.is_some() && q.is_none() {
        certificate
            .diagnostics
            .push("documented q assumes phi = identity; convolution test skipped".into());
    }
    let modulus = preset
        .moduli
        .as_ref()
        .map(|(o1, o2)| majorants::modulus_condition(o1, o2, grid.span()));
    Ok(Analysis {
        v_norm: transform::robust_norm(&v)?,
        w_norm: transform::robust_norm(&w)?,
        preset,
        grid,
        s,
        v,
        w,
        w_discrete,
        certificate,
        modulus,
    })
}

fn run_transform(cfg: &ScenarioConfig, a: &Analysis) -> Result<TransformStage> {
    let opts = IterateOptions {
        tol: cfg.tolerances.term_tol,
        n_cap: cfg.transform.terms_cap,
    };
    let t = transform::friedrichs_iterate(&a.s, &a.v, &a.w_discrete, opts)?;
    let inverse = transform::invert_transform(&t.k)?;
    let aggregate_bound_ok = if a.certificate.verdict.is_similar() {
        // W (I - W)^{-1} only exists as a bound when the series for it converges
        transform::aggregate_bound(&t.k, &a.w_discrete).ok().map(|m| m.holds)
    } else {
        None
    };
    let cond = transform::condition_number(&t.k, &inverse)?;
    let band = transform::band(a.certificate.verdict, t.converged);
    if let Some(path) = &cfg.output.k_matrix {
        t.k.write_csv(std::fs::File::create(path)?)?;
    }
    Ok(TransformStage {
        transform: t,
        inverse,
        aggregate_bound_ok,
        cond,
        band,
    })
}

fn run_evolve(cfg: &ScenarioConfig, a: &Analysis, stage: Option<&TransformStage>) -> Result<EvolveStage> {
    let pair = stage.map(|st| (&st.transform.k, &st.inverse));
    let stability = evolution::stability_scan(&a.s, &a.v, pair, &cfg.evolve.t_grid, cfg.evolve.t_cap)?;
    let vector_gaps = match stage {
        Some(st) => {
            let one = crate::grid::GridFunction::constant(&a.grid, 1.0);
            let mut gaps = Vec::with_capacity(cfg.evolve.t_grid.len());
            for &t in &cfg.evolve.t_grid {
                let direct = evolution::evolve_t(&a.s, &a.v, t, &one, cfg.evolve.t_cap)?;
                let conj = evolution::conjugated_evolution_with(&st.transform.k, &st.inverse.m, &a.s, t, &one)?;
                gaps.push(conj.relative_gap(&direct)?);
            }
            Some(gaps)
        }
        None => None,
    };
    Ok(EvolveStage { stability, vector_gaps })
}

/// Runs one non-sweep command.
pub fn run_single(cfg: &ScenarioConfig, command: Command) -> Result<RowData> {
    let analysis = analyze(cfg)?;
    let mut note = None;
    let transform = match command {
        Command::Analyze => None,
        Command::Transform => Some(run_transform(cfg, &analysis)?),
        Command::Evolve if analysis.certificate.verdict.is_similar() => Some(run_transform(cfg, &analysis)?),
        Command::Evolve => {
            note = Some("verdict inconclusive: transform skipped, direct group scanned only".to_string());
            None
        }
        Command::Sweep => return Err(Error::invalid("run_single does not handle sweeps")),
    };
    let evolve = if command == Command::Evolve {
        Some(run_evolve(cfg, &analysis, transform.as_ref())?)
    } else {
        None
    };
    Ok(RowData {
        analysis,
        transform,
        evolve,
        note,
    })
}

/// Runs `command` on `cfg`. Errors of a single run propagate; errors of a
/// sweep point are recorded in its row.
pub fn run_scenario(cfg: &ScenarioConfig, command: Command) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    if command == Command::Sweep {
        let sw = cfg.sweep.as_ref().ok_or_else(|| Error::Config {
            path: "sweep".into(),
            message: "the sweep command needs a [sweep] block".into(),
        })?;
        for &value in &sw.values {
            let mut point = cfg.clone();
            point.sweep = None;
            point.preset.params.insert(sw.param.clone(), value);
            let outcome = point
                .validate()
                .and_then(|_| run_single(&point, sw.command))
                .map_err(|e| RowError::from_error(&e));
            rows.push(RunRow {
                command: sw.command,
                sweep_value: Some(value),
                params: point.preset.params.clone(),
                grid_n: point.grid_n,
                outcome,
            });
        }
    } else {
        let data = run_single(cfg, command)?;
        rows.push(RunRow {
            command,
            sweep_value: None,
            params: data.analysis.preset.params.clone(),
            grid_n: cfg.grid_n,
            outcome: Ok(data),
        });
    }
    let timings = cfg
        .output
        .timings
        .then(|| BTreeMap::from([("total_seconds".to_string(), start.elapsed().as_secs_f64())]));
    Ok(RunReport {
        command,
        config: cfg.clone(),
        rows,
        timings,
        version: crate::VERSION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::Verdict;

    const MINIMAL: &str = "[preset]\nname = \"constant-times-lag\"\nparams = { c = 1.0 }\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.grid_n, 512);
        assert_eq!(cfg.interval, (0.0, 1.0));
        assert_eq!(cfg.phi, PhiSpec::Identity);
        assert_eq!(cfg.tolerances.term_tol, 1e-10);
        assert_eq!(cfg.entry_mode, EntryMode::NodeSample);
    }

    #[test]
    fn config_errors() {
        let e = parse_config(&format!("grid_n = 1\n{MINIMAL}")).unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "grid_n"), "{e}");
        let e = parse_config(&format!("gridd_n = 64\n{MINIMAL}")).unwrap_err();
        assert!(e.to_string().contains("gridd_n"), "{e}");
        let e = parse_config(&format!("{MINIMAL}[tolerances]\nterm_tol = \"small\"\n")).unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "tolerances.term_tol"), "{e}");
        let e = parse_config("[preset]\nname = \"cesaro\"\nparams = { alpha = 1.0 }\n").unwrap_err();
        assert!(matches!(e, Error::Parameter { .. }), "{e}");
        let e = parse_config("[preset]\nname = \"fractional\"\nparams = { alpha = 0.5 }\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "entry_mode"), "{e}");
        assert!(parse_config("[preset]\nname = \"fractional\"\nparams = { alpha = 0.5 }\nentry_mode = \"cell-average\"\n").is_err());
        assert!(parse_config("entry_mode = \"cell-average\"\n[preset]\nname = \"fractional\"\nparams = { alpha = 0.5 }\n").is_ok());
        let e = parse_config(&format!("{MINIMAL}[sweep]\nparam = \"alpha\"\nvalues = [1.0]\n")).unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "sweep.param"), "{e}");
        assert!(parse_config("[preset]\nname = \"custom-csv\"\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = format!(
            "grid_n = 64\nphi = {{ kind = \"affine\", slope = 2.0, offset = 1.0 }}\n{MINIMAL}[sweep]\nparam = \"c\"\nvalues = [0.5, 1.0]\ncommand = \"transform\"\n"
        );
        let cfg = parse_config(&text).unwrap();
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn analyze_constant_times_lag() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.grid_n = 128;
        let r = run_scenario(&cfg, Command::Analyze).unwrap();
        let d = r.rows[0].outcome.as_ref().unwrap();
        assert_eq!(d.analysis.certificate.verdict, Verdict::SimilarByCor1);
        assert!((d.analysis.certificate.schur_value.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn transform_and_evolve_small() {
        let mut cfg = ScenarioConfig::for_preset("fractional");
        cfg.grid_n = 64;
        cfg.evolve.t_grid = vec![0.0, 1.0, 2.0];
        let r = run_scenario(&cfg, Command::Evolve).unwrap();
        let d = r.rows[0].outcome.as_ref().unwrap();
        let st = d.transform.as_ref().unwrap();
        assert!(st.transform.residual <= 1e-8);
        assert_eq!(st.band, "certified");
        let ev = d.evolve.as_ref().unwrap();
        assert_eq!(ev.stability.norms.len(), 3);
        assert!(ev.vector_gaps.as_ref().unwrap().iter().all(|&g| g <= 1e-8));
    }

    #[test]
    fn sweep_rows_and_failures() {
        let text = "grid_n = 32\n[preset]\nname = \"cesaro\"\n[sweep]\nparam = \"c\"\nvalues = [0.1, 0.2, 0.3]\n";
        let cfg = parse_config(text).unwrap();
        let r = run_scenario(&cfg, Command::Sweep).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[1].sweep_value, Some(0.2));

        let text = "grid_n = 32\n[preset]\nname = \"fractional\"\n[sweep]\nparam = \"alpha\"\nvalues = [2.0, 0.5]\n";
        let cfg = parse_config(text).unwrap();
        let r = run_scenario(&cfg, Command::Sweep).unwrap();
        assert!(r.rows[0].outcome.is_ok());
        assert!(r.rows[1].outcome.is_err());
        assert_eq!(r.exit_code(), 1);

        let mut cfg = ScenarioConfig::for_preset("cesaro");
        assert!(run_scenario(&cfg, Command::Sweep).is_err());
        cfg.sweep = Some(SweepBlock {
            param: "c".into(),
            values: vec![],
            command: Command::Analyze,
        });
        assert!(run_scenario(&cfg, Command::Sweep).unwrap().rows.is_empty());
    }
}
