//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::oracle::{Background, SamplingGrids, SteplikeOperator};
use crate::quadrature::QuadratureSpec;
use crate::reconstruct::{DeltaVariant, ReconstructionOptions};
use crate::surface::HyperellipticSurface;

/// Fewest admissible samples per band.
pub const MIN_SAMPLES_PER_BAND: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Oracle,
    Reconstruct,
    Verify,
    Periods,
    Blaschke,
    Translate,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mode: Option<Mode>,
    pub background: Option<Backgrounds>,
    #[serde(default)]
    pub perturbation: Vec<Site>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Output,
    pub surface: Option<SurfaceSection>,
    pub blaschke: Option<BlaschkeSection>,
    #[serde(default)]
    pub reconstruct: ReconstructSection,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Backgrounds {
    pub left: Option<BackgroundSection>,
    pub right: Option<BackgroundSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSection {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub n: i64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub samples_per_band: usize,
    pub scan_points: usize,
    pub margin: f64,
    /// Real evaluation points.
    pub eval_points: Vec<f64>,
    /// Complex evaluation points as `[re, im]`.
    pub eval_complex: Vec<[f64; 2]>,
}

impl Default for Grids {
    fn default() -> Self {
        let s = SamplingGrids::default();
        Self {
            samples_per_band: s.samples_per_band,
            scan_points: s.scan_points,
            margin: s.margin,
            eval_points: vec![],
            eval_complex: vec![],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub base_nodes: usize,
    /// Relative error bound used by `verify`.
    pub verify_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let q = ReconstructionOptions::default().quadrature;
        Self {
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            max_subdivisions: q.max_subdivisions,
            base_nodes: q.base_nodes,
            verify_rel: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub edges: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlaschkeSection {
    pub rho: Vec<f64>,
    /// Evaluation points as `[re, im]`; defaults to a grid over the bands.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSection {
    pub delta_variant: String,
    pub normalize_sign: bool,
    pub height_scale: f64,
    /// Scattering data to read in `reconstruct` mode.
    pub data: Option<PathBuf>,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        Self {
            delta_variant: "proof".into(),
            normalize_sign: true,
            height_scale: 1.0,
            data: None,
        }
    }
}

/// Validated configuration for one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub operator: Option<SteplikeOperator>,
    pub sampling: SamplingGrids,
    pub eval_points: Vec<Complex64>,
    pub quadrature: QuadratureSpec,
    pub reconstruction: ReconstructionOptions,
    pub verify_rel: f64,
    pub out_dir: PathBuf,
    pub data_path: Option<PathBuf>,
    pub surface: Option<HyperellipticSurface>,
    pub blaschke: Option<BlaschkeSection>,
}

/// Parse TOML text; `mode` overrides the file's `mode` key.
pub fn parse_config(text: &str, mode: Option<Mode>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    build(raw, mode)
}

fn build(raw: RawConfig, mode: Option<Mode>) -> Result<RunConfig> {
    let mode = mode
        .or(raw.mode)
        .ok_or_else(|| Error::Config("no mode given on the command line or in the file".into()))?;

    let operator = match &raw.background {
        Some(bg) => {
            let left = bg
                .left
                .ok_or_else(|| Error::Config("missing [background.left] block".into()))?;
            let right = bg
                .right
                .ok_or_else(|| Error::Config("missing [background.right] block".into()))?;
            let mut table = BTreeMap::new();
            for s in &raw.perturbation {
                if !(s.a > 0.0) {
                    return Err(Error::Config(format!(
                        "[[perturbation]] n = {}: a must be positive, got {}",
                        s.n, s.a
                    )));
                }
                if table.insert(s.n, (s.a, s.b)).is_some() {
                    return Err(Error::Config(format!(
                        "[[perturbation]] n = {} listed twice",
                        s.n
                    )));
                }
            }
            let l = Background::new(left.a, left.b)
                .map_err(|e| Error::Config(format!("[background.left]: {e}")))?;
            let r = Background::new(right.a, right.b)
                .map_err(|e| Error::Config(format!("[background.right]: {e}")))?;
            Some(SteplikeOperator::new(l, r, table)?)
        }
        None => None,
    };
    let needs_operator = matches!(mode, Mode::Oracle | Mode::Verify | Mode::Translate);
    if needs_operator && operator.is_none() {
        return Err(Error::Config(
            "missing [background.left] and [background.right] blocks".into(),
        ));
    }

    if raw.grids.samples_per_band < MIN_SAMPLES_PER_BAND {
        return Err(Error::Config(format!(
            "[grids] samples_per_band must be at least {MIN_SAMPLES_PER_BAND}, got {}",
            raw.grids.samples_per_band
        )));
    }
    if !(raw.grids.margin > 0.0) {
        return Err(Error::Config("[grids] margin must be positive".into()));
    }
    let sampling = SamplingGrids {
        samples_per_band: raw.grids.samples_per_band,
        margin: raw.grids.margin,
        scan_points: raw.grids.scan_points,
    };
    let eval_points = raw
        .grids
        .eval_points
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(
            raw.grids
                .eval_complex
                .iter()
                .map(|p| Complex64::new(p[0], p[1])),
        )
        .collect();

    let t = raw.tolerances;
    let quadrature = QuadratureSpec {
        rel_tol: t.rel_tol,
        abs_tol: t.abs_tol,
        max_subdivisions: t.max_subdivisions,
        base_nodes: t.base_nodes,
    };
    quadrature
        .validate()
        .map_err(|e| Error::Config(format!("[tolerances]: {e}")))?;
    let delta_variant: DeltaVariant = raw.reconstruct.delta_variant.parse()?;
    if !(raw.reconstruct.height_scale > 0.0) {
        return Err(Error::Config(
            "[reconstruct] height_scale must be positive".into(),
        ));
    }
    let reconstruction = ReconstructionOptions {
        delta_variant,
        height_scale: raw.reconstruct.height_scale,
        normalize_sign: raw.reconstruct.normalize_sign,
        quadrature,
    };

    let surface = match &raw.surface {
        Some(s) => Some(
            HyperellipticSurface::new(s.edges.clone())
                .map_err(|e| Error::Config(format!("[surface]: {e}")))?,
        ),
        None => None,
    };
    if matches!(mode, Mode::Periods | Mode::Blaschke) && surface.is_none() {
        return Err(Error::Config("missing [surface] block".into()));
    }
    if mode == Mode::Blaschke && raw.blaschke.is_none() {
        return Err(Error::Config("missing [blaschke] block".into()));
    }

    Ok(RunConfig {
        mode,
        operator,
        sampling,
        eval_points,
        quadrature,
        reconstruction,
        verify_rel: t.verify_rel,
        out_dir: raw.output.dir,
        data_path: raw.reconstruct.data,
        surface,
        blaschke: raw.blaschke,
    })
}
