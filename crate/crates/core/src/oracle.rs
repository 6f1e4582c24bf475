//! Direct scattering for Jacobi operators with two constant backgrounds and
//! a finitely supported perturbation.
//!
//! Coefficients follow the left background `(a₋, b₋)` for `n < 0` and the
//! right background `(a₊, b₊)` for `n ≥ 0`, except at the sites listed in
//! the perturbation table, which override both `a(n)` and `b(n)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::data::ScatteringData;
use crate::error::{Error, Result};
use crate::surface::{
    decompose_spectra, principal_sqrt, rho, BandSet, Decomposition, HyperellipticSurface,
    SurfacePoint,
};

/// Largest admissible `|z|` for Jost solutions.
const MAX_ABS_Z: f64 = 1e100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Background {
    pub a: f64,
    pub b: f64,
}

impl Background {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !b.is_finite() || !a.is_finite() {
            return Err(Error::Oracle(format!(
                "background needs a > 0 and finite b, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn band(&self) -> (f64, f64) {
        (self.b - 2.0 * self.a, self.b + 2.0 * self.a)
    }

    pub fn band_set(&self) -> BandSet {
        let (lo, hi) = self.band();
        BandSet::new(vec![(lo, hi)]).expect("a > 0")
    }

    pub fn surface(&self) -> HyperellipticSurface {
        let (lo, hi) = self.band();
        HyperellipticSurface::new(vec![lo, hi]).expect("a > 0")
    }

    /// Root of `a(w + 1/w) + b = z` with `|w| ≤ 1`. On the band the limit
    /// from above is taken unless `z.im` is `-0.0`.
    pub fn multiplier(&self, z: Complex64) -> Complex64 {
        let zeta = Complex64::new((z.re - self.b) / (2.0 * self.a), z.im / (2.0 * self.a));
        let root = principal_sqrt(Complex64::new(zeta.re - 1.0, zeta.im))
            * principal_sqrt(Complex64::new(zeta.re + 1.0, zeta.im));
        zeta - root
    }

    /// `ρ(z) = 1 / R^{1/2}(z)` of the background surface.
    pub fn rho(&self, z: Complex64) -> Result<Complex64> {
        let p = SurfacePoint::upper(z);
        rho(&self.surface(), &[], &p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// Background Floquet solution `w^n` (side `+`) or `w^{-n}` (side `−`).
pub fn floquet(background: &Background, z: Complex64, n: i64, side: Side) -> Complex64 {
    let w = background.multiplier(z);
    match side {
        Side::Plus => w.powi(n as i32),
        Side::Minus => w.powi(-n as i32),
    }
}

/// A solution stored on the index window `[lo, lo + values.len())`.
#[derive(Clone, Debug)]
pub struct JostSolution {
    pub z: Complex64,
    pub side: Side,
    lo: i64,
    values: Vec<Complex64>,
}

impl JostSolution {
    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> Complex64 {
        self.values[(n - self.lo) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn conj(&self) -> JostSolution {
        JostSolution {
            z: self.z.conj(),
            side: self.side,
            lo: self.lo,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }
}

/// Wronskian value together with its relative variation over the window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WronskianValue {
    pub value: Complex64,
    pub rel_variance: f64,
}

/// Relative Wronskian variation above which inputs are not solutions.
pub const WRONSKIAN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SteplikeOperator {
    pub left: Background,
    pub right: Background,
    perturbation: BTreeMap<i64, (f64, f64)>,
}

impl SteplikeOperator {
    pub fn new(
        left: Background,
        right: Background,
        perturbation: BTreeMap<i64, (f64, f64)>,
    ) -> Result<Self> {
        for (&n, &(a, b)) in &perturbation {
            if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Oracle(format!(
                    "perturbation at n={n} needs a > 0 and finite b"
                )));
            }
        }
        Ok(Self {
            left,
            right,
            perturbation,
        })
    }

    pub fn perturbation(&self) -> &BTreeMap<i64, (f64, f64)> {
        &self.perturbation
    }

    pub fn a(&self, n: i64) -> f64 {
        match self.perturbation.get(&n) {
            Some(&(a, _)) => a,
            None if n < 0 => self.left.a,
            None => self.right.a,
        }
    }

    pub fn b(&self, n: i64) -> f64 {
        match self.perturbation.get(&n) {
            Some(&(_, b)) => b,
            None if n < 0 => self.left.b,
            None => self.right.b,
        }
    }

    /// First index from which `ψ₊` is exactly the right Floquet solution.
    pub fn n_plus(&self) -> i64 {
        self.perturbation
            .keys()
            .next_back()
            .map_or(0, |&k| (k + 1).max(0))
    }

    /// Last index up to which `ψ₋` is exactly the left Floquet solution.
    pub fn n_minus(&self) -> i64 {
        self.perturbation.keys().next().map_or(0, |&k| k.min(0))
    }

    pub fn background(&self, side: Side) -> &Background {
        match side {
            Side::Plus => &self.right,
            Side::Minus => &self.left,
        }
    }

    pub fn decomposition(&self) -> Decomposition {
        decompose_spectra(&self.left.band_set(), &self.right.band_set())
            .expect("constant backgrounds decompose")
    }

    /// Window containing the whole perturbation plus two sites of margin.
    pub fn window(&self) -> (i64, i64) {
        (self.n_minus() - 2, self.n_plus() + 2)
    }

    /// Jost solution on `[lo, hi]`, which is widened to contain the
    /// perturbation window.
    pub fn jost(&self, z: Complex64, side: Side, lo: i64, hi: i64) -> Result<JostSolution> {
        if !(z.norm() <= MAX_ABS_Z) {
            return Err(Error::Oracle(format!(
                "|z| = {} too large for the recurrence",
                z.norm()
            )));
        }
        let (wlo, whi) = self.window();
        let (lo, hi) = (lo.min(wlo), hi.max(whi));
        let len = (hi - lo + 1) as usize;
        let mut values = vec![Complex64::new(0.0, 0.0); len];
        let idx = |n: i64| (n - lo) as usize;
        match side {
            Side::Plus => {
                let bg = &self.right;
                let w = bg.multiplier(z);
                let start = self.n_plus();
                for n in start..=hi {
                    values[idx(n)] = w.powi(n as i32);
                }
                let mut next = w.powi(start as i32 + 1);
                let mut cur = values[idx(start)];
                for n in (lo + 1..=start).rev() {
                    let prev = ((z - self.b(n)) * cur - next * self.a(n)) / self.a(n - 1);
                    values[idx(n - 1)] = prev;
                    next = cur;
                    cur = prev;
                }
            }
            Side::Minus => {
                let bg = &self.left;
                let w = bg.multiplier(z);
                let end = self.n_minus();
                for n in lo..=end {
                    values[idx(n)] = w.powi(-n as i32);
                }
                let mut prev = w.powi(-(end as i32 - 1));
                let mut cur = values[idx(end)];
                for n in end..hi {
                    let next = ((z - self.b(n)) * cur - prev * self.a(n - 1)) / self.a(n);
                    values[idx(n + 1)] = next;
                    prev = cur;
                    cur = next;
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle(format!(
                "Jost solution overflowed at z = {z}"
            )));
        }
        Ok(JostSolution {
            z,
            side,
            lo,
            values,
        })
    }

    pub fn jost_value(&self, z: Complex64, n: i64, side: Side) -> Result<Complex64> {
        Ok(self.jost(z, side, n, n)?.get(n))
    }

    /// `a(n) (f(n) g(n+1) - f(n+1) g(n))`.
    pub fn wronskian_at(&self, f: &JostSolution, g: &JostSolution, n: i64) -> Complex64 {
        (f.get(n) * g.get(n + 1) - f.get(n + 1) * g.get(n)) * self.a(n)
    }

    /// Wronskian at `n = 0` with its relative variation over the common
    /// window; rejects pairs whose Wronskian is not constant.
    pub fn wronskian(&self, f: &JostSolution, g: &JostSolution) -> Result<WronskianValue> {
        let lo = f.lo().max(g.lo());
        let hi = f.hi().min(g.hi()) - 1;
        let value = self.wronskian_at(f, g, 0);
        let scale = (0..=0)
            .chain(lo..=hi)
            .map(|n| {
                (f.get(n) * g.get(n + 1))
                    .norm()
                    .max((f.get(n + 1) * g.get(n)).norm())
                    * self.a(n)
            })
            .fold(value.norm(), f64::max);
        let spread = (lo..=hi)
            .map(|n| (self.wronskian_at(f, g, n) - value).norm())
            .fold(0.0, f64::max);
        let rel_variance = if scale > 0.0 { spread / scale } else { 0.0 };
        if rel_variance > WRONSKIAN_TOL {
            return Err(Error::NonSolution(rel_variance));
        }
        Ok(WronskianValue {
            value,
            rel_variance,
        })
    }

    fn pair(&self, z: Complex64) -> Result<(JostSolution, JostSolution)> {
        let (lo, hi) = self.window();
        Ok((
            self.jost(z, Side::Minus, lo, hi)?,
            self.jost(z, Side::Plus, lo, hi)?,
        ))
    }

    /// `W(ψ₋, ψ₊)` at `z`.
    pub fn jost_wronskian(&self, z: Complex64) -> Result<WronskianValue> {
        let (m, p) = self.pair(z)?;
        self.wronskian(&m, &p)
    }

    /// Transmission coefficient `T₊` or `T₋`.
    pub fn transmission(&self, z: Complex64, side: Side) -> Result<Complex64> {
        let bg = self.background(side);
        let w = bg.multiplier(z);
        let wr = self.jost_wronskian(z)?;
        Ok((w - 1.0 / w) * bg.a / wr.value)
    }

    /// Reflection coefficient `R₊` or `R₋` at a real point of the
    /// corresponding background band, limit from above.
    pub fn reflection(&self, lambda: f64, side: Side) -> Result<Complex64> {
        let (lo, hi) = self.background(side).band();
        if !(lambda > lo && lambda < hi) {
            return Err(Error::Oracle(format!(
                "reflection requested at {lambda}, outside the band [{lo}, {hi}]"
            )));
        }
        let (m, p) = self.pair(Complex64::new(lambda, 0.0))?;
        let (own, other) = match side {
            Side::Plus => (p, m),
            Side::Minus => (m, p),
        };
        let num = self.wronskian(&own.conj(), &other)?;
        let den = self.wronskian(&own, &other)?;
        Ok(-num.value / den.value)
    }

    /// Gershgorin bound on the spectrum of the whole operator.
    fn gershgorin(&self) -> (f64, f64) {
        let (wlo, whi) = self.window();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in wlo - 1..=whi + 1 {
            let r = self.a(n) + self.a(n - 1);
            lo = lo.min(self.b(n) - r);
            hi = hi.max(self.b(n) + r);
        }
        (lo, hi)
    }

    /// Eigenvalues as sign changes of the real Wronskian off the spectrum,
    /// refined by bisection.
    pub fn eigenvalues(&self, scan_points: usize) -> Result<Vec<f64>> {
        let sigma = self.decomposition().sigma;
        let pad = 5.0 * (self.left.a + self.right.a);
        let (glo, ghi) = self.gershgorin();
        let lo = (sigma.min().unwrap() - pad).min(glo - 1e-3);
        let hi = (sigma.max().unwrap() + pad).max(ghi + 1e-3);
        let w =
            |x: f64| -> Result<f64> { Ok(self.jost_wronskian(Complex64::new(x, 0.0))?.value.re) };

        let n = scan_points.max(16);
        let xs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let off: Vec<Option<f64>> = xs
            .par_iter()
            .map(|&x| {
                if sigma.contains_with(x, 1e-9) {
                    Ok(None)
                } else {
                    w(x).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        if let (Some(Some(first)), Some(Some(last))) = (off.first(), off.last()) {
            if *first == 0.0 || *last == 0.0 {
                return Err(Error::Oracle("eigenvalue at the scan-grid boundary".into()));
            }
        }
        let mut out = Vec::new();
        for i in 0..n - 1 {
            let (Some(fa), Some(fb)) = (off[i], off[i + 1]) else {
                continue;
            };
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            if sigma.intervals().iter().any(|&(l, _)| l > a && l < b) {
                continue;
            }
            if fa == 0.0 {
                out.push(a);
                continue;
            }
            if fa.signum() == fb.signum() {
                continue;
            }
            let mut f_a = fa;
            while b - a > 1e-12 {
                let m = 0.5 * (a + b);
                let fm = w(m)?;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == f_a.signum() {
                    a = m;
                    f_a = fm;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        Ok(out)
    }

    /// Norming constant `γ = 1 / Σ_n |ψ(λ, n)|²` at an eigenvalue, with both
    /// tails summed in closed form.
    pub fn norming_constant(&self, lambda: f64, side: Side) -> Result<f64> {
        self.norming_constant_split(lambda, side, self.n_minus(), self.n_plus())
    }

    /// Same as [`SteplikeOperator::norming_constant`] with the closed-form
    /// tails starting below `lo` and at `hi`; requires `lo <= n_minus` and
    /// `hi >= n_plus`.
    pub fn norming_constant_split(&self, lambda: f64, side: Side, lo: i64, hi: i64) -> Result<f64> {
        if lo > self.n_minus() || hi < self.n_plus() {
            return Err(Error::Oracle(format!(
                "tail split [{lo}, {hi}] cuts into the perturbation"
            )));
        }
        let z = Complex64::new(lambda, 0.0);
        let (m, p) = (
            self.jost(z, Side::Minus, lo, hi)?,
            self.jost(z, Side::Plus, lo, hi)?,
        );
        let wp = self.right.multiplier(z).re;
        let wm = self.left.multiplier(z).re;
        let own = match side {
            Side::Plus => &p,
            Side::Minus => &m,
        };
        let mut total: f64 = (lo..hi).map(|n| own.get(n).norm_sqr()).sum();
        let right_scale = own.get(hi).re / p.get(hi).re;
        let left_scale = own.get(lo).re / m.get(lo).re;
        total += right_scale * right_scale * wp.powi(2 * hi as i32) / (1.0 - wp * wp);
        total += left_scale * left_scale * wm.powi(-2 * (lo as i32 - 1)) / (1.0 - wm * wm);
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Oracle(format!(
                "norming sum at {lambda} is not positive and finite"
            )));
        }
        Ok(1.0 / total)
    }

    /// Direct norming constant by brute-force summation over `[lo, hi]`.
    pub fn norming_constant_window(
        &self,
        lambda: f64,
        side: Side,
        lo: i64,
        hi: i64,
    ) -> Result<f64> {
        let psi = self.jost(Complex64::new(lambda, 0.0), side, lo, hi)?;
        let s: f64 = (lo..=hi).map(|n| psi.get(n).norm_sqr()).sum();
        Ok(1.0 / s)
    }

    /// Sample the one-sided scattering data.
    pub fn scattering_data(&self, grids: &SamplingGrids) -> Result<ScatteringData> {
        let d = self.decomposition();
        let cuts = edge_list(&d);
        let plus_pieces = pieces_of(&self.right.band_set(), &cuts);
        let lambdas_plus: Vec<f64> = plus_pieces
            .iter()
            .flat_map(|&(a, b)| cos_grid(a, b, grids.samples_per_band, grids.margin))
            .collect();
        let r_plus: Vec<[f64; 3]> = lambdas_plus
            .par_iter()
            .map(|&x| self.reflection(x, Side::Plus).map(|r| [x, r.re, r.im]))
            .collect::<Result<_>>()?;
        let lambdas_t: Vec<f64> = pieces_of(&d.sigma_minus1, &cuts)
            .iter()
            .flat_map(|&(a, b)| cos_grid(a, b, grids.samples_per_band, grids.margin))
            .collect();
        let t_plus_sq: Vec<[f64; 2]> = lambdas_t
            .par_iter()
            .map(|&x| {
                self.transmission(Complex64::new(x, 0.0), Side::Plus)
                    .map(|t| [x, t.norm_sqr()])
            })
            .collect::<Result<_>>()?;
        let eigenvalues = self.eigenvalues(grids.scan_points)?;
        let norming_plus = eigenvalues
            .iter()
            .map(|&l| self.norming_constant(l, Side::Plus))
            .collect::<Result<_>>()?;
        Ok(ScatteringData {
            sigma_minus_edges: self.left.band_set().edges(),
            sigma_plus_edges: self.right.band_set().edges(),
            r_plus,
            t_plus_sq,
            eigenvalues,
            norming_plus,
            m_minus: vec![],
            m_plus: vec![],
            mu_minus: None,
            mu_plus: None,
        })
    }

    /// Residual `1 − |R₊|² − (ρ₊/ρ₋)|T₊|²` at a point of the overlap.
    pub fn unitarity_residual(&self, lambda: f64) -> Result<f64> {
        let z = Complex64::new(lambda, 0.0);
        let r = self.reflection(lambda, Side::Plus)?;
        let t = self.transmission(z, Side::Plus)?;
        let ratio = self.right.rho(z)? / self.left.rho(z)?;
        Ok(1.0 - r.norm_sqr() - ratio.re * t.norm_sqr())
    }
}

/// Sampling parameters for [`SteplikeOperator::scattering_data`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingGrids {
    pub samples_per_band: usize,
    pub margin: f64,
    pub scan_points: usize,
}

impl Default for SamplingGrids {
    fn default() -> Self {
        Self {
            samples_per_band: 400,
            margin: 1e-6,
            scan_points: 2000,
        }
    }
}

/// All edges of the decomposition, sorted and deduplicated.
pub fn edge_list(d: &Decomposition) -> Vec<f64> {
    let mut v: Vec<f64> = [&d.sigma, &d.sigma2, &d.sigma_minus1, &d.sigma_plus1]
        .iter()
        .flat_map(|s| s.edges())
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Split each interval of `set` at the interior cut points.
pub fn pieces_of(set: &BandSet, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a, b) in set.intervals() {
        let mut start = a;
        for &c in cuts.iter().filter(|&&c| c > a && c < b) {
            out.push((start, c));
            start = c;
        }
        out.push((start, b));
    }
    out
}

/// Chebyshev–Lobatto points on `[a + margin, b − margin]`.
pub fn cos_grid(a: f64, b: f64, n: usize, margin: f64) -> Vec<f64> {
    let (lo, hi) = (a + margin, b - margin);
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / (n - 1) as f64;
            lo + (hi - lo) * 0.5 * (1.0 - t.cos())
        })
        .collect()
}

/// Opposite-side quantities recovered from `T₊` and `R₊`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Translated {
    pub lambda: f64,
    pub t_minus: Complex64,
    pub r_minus: Option<Complex64>,
    pub small_t: bool,
}

/// Threshold below which `|T|` makes the reflection translation unreliable.
pub const SMALL_T: f64 = 1e-12;

/// `T₋ = (ρ₊/ρ₋) T₊` and `R₋ = −conj(R₊) T₊ / conj(T₊)` on the overlap, or
/// `R₋ = T₋ / conj(T₋)` where only the left background has spectrum.
pub fn translate_point(
    left: &Background,
    right: &Background,
    lambda: f64,
    t_plus: Complex64,
    r_plus: Option<Complex64>,
) -> Result<Translated> {
    let z = Complex64::new(lambda, 0.0);
    let t_minus = right.rho(z)? / left.rho(z)? * t_plus;
    let small_t = t_plus.norm() < SMALL_T;
    let in_left = {
        let (a, b) = left.band();
        lambda > a && lambda < b
    };
    let r_minus = match (r_plus, in_left) {
        (_, false) => None,
        (_, true) if small_t => return Err(Error::Oracle(format!("conj(T) vanishes at {lambda}"))),
        (Some(r), true) => Some(-r.conj() * t_plus / t_plus.conj()),
        (None, true) => Some(t_minus / t_minus.conj()),
    };
    Ok(Translated {
        lambda,
        t_minus,
        r_minus,
        small_t,
    })
}

impl SteplikeOperator {
    /// Apply the translation identities on the given real points, using the
    /// direct `T₊` and, inside the right band, `R₊`.
    pub fn translate(&self, lambdas: &[f64]) -> Result<Vec<Translated>> {
        let (ra, rb) = self.right.band();
        lambdas
            .par_iter()
            .map(|&x| {
                let t = self.transmission(Complex64::new(x, 0.0), Side::Plus)?;
                let r = if x > ra && x < rb {
                    Some(self.reflection(x, Side::Plus)?)
                } else {
                    None
                };
                translate_point(&self.left, &self.right, x, t, r)
            })
            .collect()
    }
}
