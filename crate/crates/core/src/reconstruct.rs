//! Transmission coefficient `T₊(z)` from one-sided scattering data.
//!
//! `T₊` is assembled as a product of Blaschke factors of the `σ₋` surface
//! times the exponential of three boundary integrals against the
//! third-kind differential `ω_{zz*}` of the combined spectrum `σ`:
//!
//! * `(1/2πi) ∫_{σ₋⁽¹⁾ ∪ σ⁽²⁾} Q L ω` with `L = log|T₊|²`,
//! * `(1/2π) ∫_{σ₊⁽¹⁾} Q (arg R₊ + c δ⁻) ω`,
//!
//! divided by `Q(z) = Π √(z − e_j)` over the edges of `σ₊⁽¹⁾`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::abelian::Curve;
use crate::data::ScatteringData;
use crate::error::{Error, Result};
use crate::oracle::{edge_list, pieces_of};
use crate::potential::BlaschkeEvaluator;
use crate::quadrature::{accept_within, Integrator, QuadratureSpec, SingularEnds};
use crate::surface::{
    decompose_spectra, principal_sqrt, rho, shift, BandSet, Decomposition, HyperellipticSurface,
    SurfacePoint,
};

/// Smallest admissible distance of an evaluation point from `σ`.
pub const MIN_DISTANCE: f64 = 1e-6;

/// Absolute quadrature error up to which a non-converged boundary integral
/// is still used; logarithmic edge singularities converge slowly.
pub const ACCEPT_ERROR: f64 = 1e-7;

/// Factor in front of `δ⁻` next to `arg R₊`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeltaVariant {
    /// `arg R₊ + δ⁻`.
    Theorem,
    /// `arg R₊ + 2δ⁻`.
    #[default]
    Proof,
}

impl DeltaVariant {
    pub fn factor(self) -> f64 {
        match self {
            DeltaVariant::Theorem => 1.0,
            DeltaVariant::Proof => 2.0,
        }
    }
}

impl std::str::FromStr for DeltaVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem" => Ok(DeltaVariant::Theorem),
            "proof" => Ok(DeltaVariant::Proof),
            other => Err(Error::Config(format!(
                "unknown delta variant {other:?}, expected theorem or proof"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionOptions {
    pub delta_variant: DeltaVariant,
    /// Multiplier of the default Blaschke path height.
    pub height_scale: f64,
    /// Flip the overall sign so that `T₊` is positive left of `σ`.
    pub normalize_sign: bool,
    pub quadrature: QuadratureSpec,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            delta_variant: DeltaVariant::default(),
            height_scale: 1.0,
            normalize_sign: true,
            quadrature: QuadratureSpec {
                rel_tol: 1e-10,
                base_nodes: 16,
                ..Default::default()
            },
        }
    }
}

/// Local cubic interpolation in `θ = acos((mid − λ)/half)` on one piece,
/// with `k log|λ − e|` removed at the listed edges.
#[derive(Clone, Debug)]
pub struct PieceInterpolant {
    pub lo: f64,
    pub hi: f64,
    lambdas: Vec<f64>,
    theta: Vec<f64>,
    values: Vec<f64>,
    log_edges: Vec<(f64, f64)>,
}

impl PieceInterpolant {
    pub fn new(
        lo: f64,
        hi: f64,
        samples: &[(f64, f64)],
        log_edges: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Data(format!("fewer than 2 samples on [{lo}, {hi}]")));
        }
        let mut out = Self {
            lo,
            hi,
            lambdas: vec![],
            theta: vec![],
            values: vec![],
            log_edges,
        };
        for &(x, v) in samples {
            out.lambdas.push(x);
            out.theta.push(out.theta_of(x));
            out.values.push(v - out.log_part(x));
        }
        Ok(out)
    }

    fn theta_of(&self, x: f64) -> f64 {
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo);
        ((mid - x) / half).clamp(-1.0, 1.0).acos()
    }

    fn log_part(&self, x: f64) -> f64 {
        self.log_edges
            .iter()
            .map(|(e, k)| k * (x - e).abs().ln())
            .sum()
    }

    /// Like [`PieceInterpolant::new`], with the power of the logarithmic
    /// term at each end read off the two samples nearest to it and rounded
    /// to an integer.
    pub fn with_detected_logs(lo: f64, hi: f64, samples: &[(f64, f64)]) -> Result<Self> {
        let mut logs = Vec::new();
        let n = samples.len();
        if n >= 4 {
            let ends = [
                (lo, samples[0], samples[1]),
                (hi, samples[n - 1], samples[n - 2]),
            ];
            for (e, (x1, v1), (x2, v2)) in ends {
                let slope = (v1 - v2) / ((x1 - e).abs().ln() - (x2 - e).abs().ln());
                let k = slope.round().max(0.0);
                if k > 0.0 {
                    logs.push((e, k));
                }
            }
        }
        Self::new(lo, hi, samples, logs)
    }

    pub fn samples(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = self.theta_of(x);
        let n = self.theta.len();
        let i = self.theta.partition_point(|&s| s <= t);
        let start = i.saturating_sub(2).min(n.saturating_sub(4));
        let end = (start + 4).min(n);
        let mut acc = 0.0;
        for j in start..end {
            let mut l = 1.0;
            for k in start..end {
                if k != j {
                    l *= (t - self.theta[k]) / (self.theta[j] - self.theta[k]);
                }
            }
            acc += l * self.values[j];
        }
        acc + self.log_part(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PieceKind {
    /// `log|T₊|²` on `σ₋⁽¹⁾` or `σ⁽²⁾`.
    LogModulus,
    /// `arg R₊` on `σ₊⁽¹⁾`.
    Phase,
}

#[derive(Clone, Debug)]
struct Piece {
    kind: PieceKind,
    data: PieceInterpolant,
    delta: f64,
}

/// Evaluated `T₊(z)` with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reconstructed {
    pub z: Complex64,
    pub value: Complex64,
    pub err_est: f64,
}

#[derive(Clone, Debug)]
pub struct ReconstructionProblem {
    pub decomposition: Decomposition,
    pub sigma: Curve,
    pub sigma_minus: Curve,
    pub sigma_plus: HyperellipticSurface,
    pub q_edges: Vec<f64>,
    pub delta_minus: Vec<f64>,
    pub options: ReconstructionOptions,
    eigenvalues: Vec<f64>,
    m_minus: Vec<f64>,
    m_plus: Vec<f64>,
    pieces: Vec<Piece>,
    blaschke: Vec<(BlaschkeEvaluator, f64)>,
    sign: f64,
}

impl ReconstructionProblem {
    pub fn new(data: &ScatteringData, options: ReconstructionOptions) -> Result<Self> {
        data.validate()?;
        let integrator = Integrator::new(options.quadrature)?;
        let sm = data.sigma_minus()?;
        let sp = data.sigma_plus()?;
        let decomposition = decompose_spectra(&sm, &sp)?;
        let sigma = Curve::new(
            HyperellipticSurface::from_bands(&decomposition.sigma)?,
            integrator.clone(),
        )?;
        let sigma_minus = Curve::new(HyperellipticSurface::from_bands(&sm)?, integrator)?;
        let sigma_plus = HyperellipticSurface::from_bands(&sp)?;
        let q_edges = decomposition.sigma_plus1.edges();

        let mu_minus = dirichlet(&data.mu_minus, &sigma_minus.surface, "mu_minus")?;
        let mu_plus = dirichlet(&data.mu_plus, &sigma_plus, "mu_plus")?;
        for &x in data
            .eigenvalues
            .iter()
            .chain(&data.m_minus)
            .chain(&data.m_plus)
        {
            if decomposition.sigma.contains(x) {
                return Err(Error::Data(format!(
                    "eigenvalue or divisor point {x} lies on σ"
                )));
            }
        }

        let delta_minus =
            delta_minus_table(&sigma_minus, &data.eigenvalues, &data.m_minus, &data.m_plus)?;

        let mut blaschke = Vec::new();
        for (&x, power) in data
            .m_minus
            .iter()
            .map(|x| (x, 1.0))
            .chain(data.m_plus.iter().map(|x| (x, -1.0)))
            .chain(data.eigenvalues.iter().map(|x| (x, -1.0)))
        {
            let b =
                BlaschkeEvaluator::new(&sigma_minus, x)?.with_height_scale(options.height_scale);
            blaschke.push((b, power));
        }
        let e0 = sigma_minus.surface.e0();
        let flips = blaschke.iter().filter(|(b, _)| b.rho() < e0).count();
        let sign = if options.normalize_sign && flips % 2 == 1 {
            -1.0
        } else {
            1.0
        };

        let cuts = edge_list(&decomposition);
        let mut pieces = Vec::new();
        for (a, b) in pieces_of(&decomposition.sigma_minus1, &cuts) {
            let samples: Vec<(f64, f64)> = data
                .t_plus_sq
                .iter()
                .filter(|r| r[0] > a && r[0] < b)
                .map(|r| {
                    if r[1] > 0.0 {
                        Ok((r[0], r[1].ln()))
                    } else {
                        Err(Error::Data(format!(
                            "|T₊|² = {} at {} is not positive",
                            r[1], r[0]
                        )))
                    }
                })
                .collect::<Result<_>>()?;
            let data = PieceInterpolant::with_detected_logs(a, b, &samples)?;
            pieces.push(Piece {
                kind: PieceKind::LogModulus,
                data,
                delta: 0.0,
            });
        }
        for (a, b) in pieces_of(&decomposition.sigma2, &cuts) {
            let mut samples = Vec::new();
            for r in data.r_plus.iter().filter(|r| r[0] > a && r[0] < b) {
                let x = r[0];
                let p = SurfacePoint::upper(Complex64::new(x, 0.0));
                let ratio =
                    rho(&sigma_minus.surface, &mu_minus, &p)? / rho(&sigma_plus, &mu_plus, &p)?;
                if !(ratio.re > 0.0) || ratio.im.abs() > 1e-8 * ratio.re {
                    return Err(Error::Data(format!(
                        "ρ₋/ρ₊ = {ratio} at {x} is not positive"
                    )));
                }
                let one_minus = 1.0 - (r[1] * r[1] + r[2] * r[2]);
                if !(one_minus > 0.0) {
                    return Err(Error::Data(format!("|R₊| ≥ 1 at {x} inside the overlap")));
                }
                samples.push((x, ratio.re.ln() + one_minus.ln()));
            }
            let data = PieceInterpolant::with_detected_logs(a, b, &samples)?;
            pieces.push(Piece {
                kind: PieceKind::LogModulus,
                data,
                delta: 0.0,
            });
        }
        let sigma_edges = decomposition.sigma.edges();
        for (a, b) in pieces_of(&decomposition.sigma_plus1, &cuts) {
            let rows: Vec<&[f64; 3]> = data
                .r_plus
                .iter()
                .filter(|r| r[0] > a && r[0] < b)
                .collect();
            let args = unwrap_phase(
                rows.iter().map(|r| r[2].atan2(r[1])),
                sigma_edges.contains(&a),
            );
            let samples: Vec<(f64, f64)> = rows.iter().map(|r| r[0]).zip(args).collect();
            let delta = delta_at(&sigma_minus.surface, &delta_minus, 0.5 * (a + b));
            let data = PieceInterpolant::new(a, b, &samples, vec![])?;
            pieces.push(Piece {
                kind: PieceKind::Phase,
                data,
                delta,
            });
        }

        Ok(Self {
            decomposition,
            sigma,
            sigma_minus,
            sigma_plus,
            q_edges,
            delta_minus,
            options,
            eigenvalues: data.eigenvalues.clone(),
            m_minus: data.m_minus.clone(),
            m_plus: data.m_plus.clone(),
            pieces,
            blaschke,
            sign,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn divisors(&self) -> (&[f64], &[f64]) {
        (&self.m_minus, &self.m_plus)
    }

    /// `Q(z) = Π √(z − e_j)` over the edges of `σ₊⁽¹⁾`.
    pub fn q_eval(&self, z: Complex64) -> Complex64 {
        q_eval(&self.q_edges, z)
    }

    /// Interpolated boundary datum: `log|T₊|²` on `σ₋⁽¹⁾ ∪ σ⁽²⁾`, `arg R₊` on
    /// `σ₊⁽¹⁾`.
    pub fn boundary_value(&self, x: f64) -> Option<f64> {
        self.pieces
            .iter()
            .find(|p| x >= p.data.lo && x <= p.data.hi)
            .map(|p| p.data.eval(x))
    }

    fn distance_to_sigma(&self, z: Complex64) -> f64 {
        let d = self.decomposition.sigma.distance(z.re);
        d.hypot(z.im)
    }

    pub fn reconstruct_t(&self, z: Complex64) -> Result<Reconstructed> {
        if !(self.distance_to_sigma(z) >= MIN_DISTANCE) {
            return Err(Error::OnSpectrum(z));
        }
        let kernel = self.sigma.third_kind_kernel(SurfacePoint::upper(z))?;
        let integrator = &self.sigma.integrator;
        let mut exponent = Complex64::new(0.0, 0.0);
        let mut err = 0.0;
        let c = self.options.delta_variant.factor();
        for piece in &self.pieces {
            let (a, b) = (piece.data.lo, piece.data.hi);
            let mut breaks: Vec<f64> = piece.data.samples().to_vec();
            if z.re > a && z.re < b {
                breaks.push(z.re);
            }
            let f = |x: f64| {
                let w = Complex64::new(x, 0.0);
                let v = match piece.kind {
                    PieceKind::LogModulus => piece.data.eval(x),
                    PieceKind::Phase => piece.data.eval(x) + c * piece.delta,
                };
                self.q_eval(w) * kernel.density_upper(w) * v
            };
            let est = accept_within(
                integrator.endpoint_singular_with_breaks(f, a, b, SingularEnds::BOTH, &breaks),
                ACCEPT_ERROR,
            )?;
            let scale = match piece.kind {
                PieceKind::LogModulus => Complex64::new(0.0, -1.0 / (2.0 * PI)),
                PieceKind::Phase => Complex64::new(1.0 / (2.0 * PI), 0.0),
            };
            exponent += est.value * scale;
            err += est.error * scale.norm();
        }
        let qz = self.q_eval(z);
        exponent /= qz;
        err /= qz.norm();

        let mut log_b = Complex64::new(0.0, 0.0);
        for (b, power) in &self.blaschke {
            let est = b.log_blaschke(&SurfacePoint::upper(z))?;
            log_b += est.value * *power;
            err += est.error;
        }
        let value = (exponent + log_b).exp() * self.sign;
        Ok(Reconstructed {
            z,
            value,
            err_est: err * value.norm(),
        })
    }

    /// Evaluate on every grid point in parallel; failures are kept per point.
    pub fn reconstruct_on_grid(
        &self,
        grid: &[Complex64],
    ) -> Vec<(Complex64, Result<Reconstructed>)> {
        grid.par_iter()
            .map(|&z| (z, self.reconstruct_t(z)))
            .collect()
    }
}

fn dirichlet(
    mu: &Option<Vec<f64>>,
    surface: &HyperellipticSurface,
    name: &str,
) -> Result<Vec<f64>> {
    match mu {
        Some(v) if v.len() == surface.genus() => Ok(v.clone()),
        Some(v) => Err(Error::Data(format!(
            "{name} has {} entries, expected {}",
            v.len(),
            surface.genus()
        ))),
        None if surface.genus() == 0 => Ok(vec![]),
        None => Err(Error::Data(format!(
            "{name} is required for a background with gaps"
        ))),
    }
}

/// `Π √(z − e_j)` with principal roots.
pub fn q_eval(edges: &[f64], z: Complex64) -> Complex64 {
    edges.iter().fold(Complex64::new(1.0, 0.0), |acc, &e| {
        acc * principal_sqrt(shift(z, e))
    })
}

/// Continuous branch of a phase sequence. When the piece starts at an edge
/// of `σ`, the branch starts in `(−3π/2, π/2]`.
pub fn unwrap_phase(principal: impl Iterator<Item = f64>, starts_at_gap: bool) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for a in principal {
        let next = match out.last() {
            None if starts_at_gap && a > PI / 2.0 => a - 2.0 * PI,
            None => a,
            Some(&prev) => {
                let mut d = a - prev;
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                prev + d
            }
        };
        out.push(next);
    }
    out
}

/// `δ⁻_ℓ = −Σ_{M⁻} δ_ℓ(μ) + Σ_{M⁺} δ_ℓ(μ) + Σ_k δ_ℓ(λ_k)` per finite gap of `σ₋`.
pub fn delta_minus_table(
    sigma_minus: &Curve,
    eigenvalues: &[f64],
    m_minus: &[f64],
    m_plus: &[f64],
) -> Result<Vec<f64>> {
    let g = sigma_minus.genus();
    let mut table = vec![0.0; g];
    for (l, entry) in table.iter_mut().enumerate() {
        for &x in m_minus {
            *entry -= sigma_minus.delta_b_period(x, l + 1)?;
        }
        for &x in m_plus.iter().chain(eigenvalues) {
            *entry += sigma_minus.delta_b_period(x, l + 1)?;
        }
    }
    Ok(table)
}

/// Value of the step function `δ⁻` at `x`.
pub fn delta_at(sigma_minus: &HyperellipticSurface, table: &[f64], x: f64) -> f64 {
    sigma_minus
        .gaps()
        .iter()
        .zip(table)
        .find(|((a, b), _)| x >= *a && x <= *b)
        .map_or(0.0, |(_, &d)| d)
}

/// Write `re_z, im_z, re_T, im_T, abs_T, arg_T, err_est` rows; failed points
/// are written with `NaN` values.
pub fn write_csv<W: Write>(
    out: &mut W,
    rows: &[(Complex64, Result<Reconstructed>)],
) -> std::io::Result<()> {
    writeln!(out, "re_z,im_z,re_T,im_T,abs_T,arg_T,err_est")?;
    for (z, r) in rows {
        match r {
            Ok(r) => writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.3e}",
                z.re,
                z.im,
                r.value.re,
                r.value.im,
                r.value.norm(),
                r.value.arg(),
                r.err_est
            )?,
            Err(_) => writeln!(out, "{:.16e},{:.16e},NaN,NaN,NaN,NaN,NaN", z.re, z.im)?,
        }
    }
    Ok(())
}

/// Band set helper for tests and configs.
pub fn band(a: f64, b: f64) -> BandSet {
    BandSet::new(vec![(a, b)]).expect("a < b")
}
