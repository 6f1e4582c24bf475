//! Command-line driver.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64;

use crate::abelian::{compute_periods, Curve};
use crate::config::{parse_config, Mode, RunConfig};
use crate::data::ScatteringData;
use crate::error::{Error, Result};
use crate::oracle::{cos_grid, edge_list, pieces_of, Side, SteplikeOperator, WRONSKIAN_TOL};
use crate::potential::BlaschkeEvaluator;
use crate::quadrature::Integrator;
use crate::reconstruct::{write_csv, DeltaVariant, Reconstructed, ReconstructionProblem};
use crate::surface::{decompose_spectra, HyperellipticSurface, SurfacePoint};

pub const DATA_FILE: &str = "scattering_data.json";
pub const TRANSMISSION_FILE: &str = "transmission.csv";
pub const REPORT_FILE: &str = "verify_report.txt";
pub const PERIODS_FILE: &str = "periods.csv";
pub const BLASCHKE_FILE: &str = "blaschke.csv";
pub const TRANSLATE_FILE: &str = "translated.csv";

/// Bound on `|1 − |R₊|² − (ρ₊/ρ₋)|T₊|²|` and `||R₊| − 1|` checked by `verify`.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "gapflow",
    version,
    about = "Steplike Jacobi scattering and transmission reconstruction"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative quadrature tolerance; overrides `[tolerances] rel_tol`.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_parser = parse_variant)]
    pub delta_variant: Option<DeltaVariant>,
}

fn parse_variant(s: &str) -> std::result::Result<DeltaVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Load the config and apply command-line overrides.
pub fn load(cli: &Cli) -> Result<RunConfig> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = parse_config(&text, Some(cli.mode))?;
    if let Some(dir) = &cli.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(tol) = cli.tol {
        cfg.quadrature = cfg.quadrature.with_rel_tol(tol);
        cfg.quadrature.validate()?;
        cfg.reconstruction.quadrature = cfg.quadrature;
    }
    if let Some(v) = cli.delta_variant {
        cfg.reconstruction.delta_variant = v;
    }
    Ok(cfg)
}

/// Run one mode; returns the paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out_dir)?;
    match cfg.mode {
        Mode::Oracle => run_oracle(cfg).map(|(p, _)| vec![p]),
        Mode::Reconstruct => run_reconstruct(cfg),
        Mode::Verify => run_verify(cfg),
        Mode::Periods => run_periods(cfg),
        Mode::Blaschke => run_blaschke(cfg),
        Mode::Translate => run_translate(cfg),
    }
}

fn operator(cfg: &RunConfig) -> Result<&SteplikeOperator> {
    cfg.operator
        .as_ref()
        .ok_or_else(|| Error::Config("missing [background] blocks".into()))
}

fn run_oracle(cfg: &RunConfig) -> Result<(PathBuf, ScatteringData)> {
    let data = operator(cfg)?.scattering_data(&cfg.sampling)?;
    let path = cfg.out_dir.join(DATA_FILE);
    data.write(&path)?;
    Ok((path, data))
}

fn eval_points(cfg: &RunConfig, data: &ScatteringData) -> Result<Vec<Complex64>> {
    if !cfg.eval_points.is_empty() {
        return Ok(cfg.eval_points.clone());
    }
    let sigma_minus = data.sigma_minus()?;
    let sigma_plus = data.sigma_plus()?;
    let d = decompose_spectra(&sigma_minus, &sigma_plus)?;
    Ok(default_eval_points(&d.sigma.edges(), &data.eigenvalues))
}

/// Six real points outside the spectrum and sixteen in the upper half-plane.
pub fn default_eval_points(sigma_edges: &[f64], eigenvalues: &[f64]) -> Vec<Complex64> {
    let lo = sigma_edges.first().copied().unwrap_or(-1.0);
    let hi = sigma_edges.last().copied().unwrap_or(1.0);
    let mut pts: Vec<Complex64> = [0.3, 1.0, 2.0]
        .iter()
        .flat_map(|&d| [lo - d, hi + d])
        .filter(|x| eigenvalues.iter().all(|l| (x - l).abs() > 1e-3))
        .map(|x| Complex64::new(x, 0.0))
        .collect();
    for im in [0.25, 0.75] {
        for k in 0..8 {
            let re = lo - 0.5 + (hi - lo + 1.0) * k as f64 / 7.0;
            pts.push(Complex64::new(re, im));
        }
    }
    pts
}

type Rows = Vec<(Complex64, Result<Reconstructed>)>;

fn reconstruct_rows(
    cfg: &RunConfig,
    data: &ScatteringData,
    grid: &[Complex64],
) -> Result<(PathBuf, Rows)> {
    let problem = ReconstructionProblem::new(data, cfg.reconstruction)?;
    let rows = problem.reconstruct_on_grid(grid);
    let path = cfg.out_dir.join(TRANSMISSION_FILE);
    let mut out = BufWriter::new(File::create(&path)?);
    write_csv(&mut out, &rows)?;
    out.flush()?;
    Ok((path, rows))
}

fn run_reconstruct(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let input = cfg
        .data_path
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join(DATA_FILE));
    let data = ScatteringData::read(&input)?;
    let grid = eval_points(cfg, &data)?;
    let (path, rows) = reconstruct_rows(cfg, &data, &grid)?;
    for (z, r) in &rows {
        if let Err(e) = r {
            eprintln!("warning: T({z}) failed: {e}");
        }
    }
    Ok(vec![path])
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run_verify(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let op = operator(cfg)?;
    let (data_path, data) = run_oracle(cfg)?;
    let grid = eval_points(cfg, &data)?;
    let (csv_path, rows) = reconstruct_rows(cfg, &data, &grid)?;
    let mut report = String::new();

    let mut errors = Vec::new();
    let mut failed = 0;
    for (z, r) in &rows {
        match (r, op.transmission(*z, Side::Plus)) {
            (Ok(r), Ok(t)) => errors.push((r.value - t).norm() / t.norm()),
            _ => failed += 1,
        }
    }
    errors.sort_by(f64::total_cmp);
    let max = errors.last().copied().unwrap_or(f64::NAN);
    let median = if errors.is_empty() {
        f64::NAN
    } else {
        errors[errors.len() / 2]
    };
    writeln!(
        report,
        "points: {} evaluated, {} failed",
        errors.len(),
        failed
    )
    .unwrap();
    writeln!(report, "max relative error: {max:.3e}").unwrap();
    writeln!(report, "median relative error: {median:.3e}").unwrap();
    writeln!(
        report,
        "{} reconstruction: max relative error {max:.3e} < {:.1e}",
        pass(failed == 0 && max < cfg.verify_rel),
        cfg.verify_rel
    )
    .unwrap();

    let mut wron = 0.0f64;
    for z in &grid {
        match op.jost_wronskian(*z) {
            Ok(w) => wron = wron.max(w.rel_variance),
            Err(_) => wron = f64::INFINITY,
        }
    }
    writeln!(
        report,
        "{} wronskian constancy: max relative variance {wron:.3e} < {WRONSKIAN_TOL:.0e}",
        pass(wron < WRONSKIAN_TOL)
    )
    .unwrap();

    let d = op.decomposition();
    let cuts = edge_list(&d);
    let mut unit = 0.0f64;
    for (a, b) in pieces_of(&d.sigma2, &cuts) {
        for x in cos_grid(a, b, 16, 1e-4) {
            unit = unit.max(op.unitarity_residual(x)?.abs());
        }
    }
    writeln!(
        report,
        "{} unitarity on the overlap: max residual {unit:.3e} < {IDENTITY_TOL:.0e}",
        pass(unit < IDENTITY_TOL)
    )
    .unwrap();
    let mut modulus = 0.0f64;
    for (a, b) in pieces_of(&d.sigma_plus1, &cuts) {
        for x in cos_grid(a, b, 16, 1e-4) {
            modulus = modulus.max((op.reflection(x, Side::Plus)?.norm() - 1.0).abs());
        }
    }
    writeln!(
        report,
        "{} |R+| = 1 off the overlap: max deviation {modulus:.3e} < {IDENTITY_TOL:.0e}",
        pass(modulus < IDENTITY_TOL)
    )
    .unwrap();

    let path = cfg.out_dir.join(REPORT_FILE);
    fs::write(&path, &report)?;
    print!("{report}");
    Ok(vec![data_path, csv_path, path])
}

fn surface(cfg: &RunConfig) -> Result<&HyperellipticSurface> {
    cfg.surface
        .as_ref()
        .ok_or_else(|| Error::Config("missing [surface] block".into()))
}

fn run_periods(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = surface(cfg)?;
    let p = compute_periods(s, &Integrator::new(cfg.quadrature)?)?;
    let path = cfg.out_dir.join(PERIODS_FILE);
    let mut out = BufWriter::new(File::create(&path)?);
    writeln!(out, "j,k,C,C_inv")?;
    for j in 0..p.genus() {
        for k in 0..p.genus() {
            writeln!(
                out,
                "{},{},{:.16e},{:.16e}",
                j + 1,
                k + 1,
                p.c[(j, k)],
                p.inverse[(j, k)]
            )?;
        }
    }
    out.flush()?;
    println!(
        "genus {} condition number {:.3e}",
        p.genus(),
        p.condition_number()
    );
    Ok(vec![path])
}

fn run_blaschke(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = surface(cfg)?;
    let section = cfg
        .blaschke
        .as_ref()
        .ok_or_else(|| Error::Config("missing [blaschke] block".into()))?;
    let curve = Curve::new(s.clone(), Integrator::new(cfg.quadrature)?)?;
    let points: Vec<Complex64> = if section.points.is_empty() {
        s.bands()
            .intervals()
            .iter()
            .flat_map(|&(a, b)| cos_grid(a, b, 9, 0.0))
            .map(|x| Complex64::new(x, 0.0))
            .collect()
    } else {
        section
            .points
            .iter()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect()
    };
    let path = cfg.out_dir.join(BLASCHKE_FILE);
    let mut out = BufWriter::new(File::create(&path)?);
    writeln!(out, "rho,re_z,im_z,re_B,im_B,abs_B,arg_B")?;
    for &rho in &section.rho {
        let ev =
            BlaschkeEvaluator::new(&curve, rho)?.with_height_scale(cfg.reconstruction.height_scale);
        for &z in &points {
            let b = ev.blaschke(&SurfacePoint::upper(z))?;
            writeln!(
                out,
                "{rho:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                z.re,
                z.im,
                b.re,
                b.im,
                b.norm(),
                b.arg()
            )?;
        }
    }
    out.flush()?;
    Ok(vec![path])
}

fn run_translate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let op = operator(cfg)?;
    let d = op.decomposition();
    let cuts = edge_list(&d);
    let lambdas: Vec<f64> = pieces_of(&d.sigma, &cuts)
        .iter()
        .flat_map(|&(a, b)| cos_grid(a, b, cfg.sampling.samples_per_band, cfg.sampling.margin))
        .collect();
    let rows = op.translate(&lambdas)?;
    let path = cfg.out_dir.join(TRANSLATE_FILE);
    let mut out = BufWriter::new(File::create(&path)?);
    writeln!(
        out,
        "lambda,re_T_minus,im_T_minus,re_R_minus,im_R_minus,small_t"
    )?;
    for t in rows {
        let r = t.r_minus.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            t.lambda, t.t_minus.re, t.t_minus.im, r.re, r.im, t.small_t
        )?;
    }
    out.flush()?;
    Ok(vec![path])
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    match load(cli).and_then(|cfg| run(&cfg)) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", display(&p));
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
