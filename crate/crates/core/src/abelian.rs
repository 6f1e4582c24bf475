//! Period constants, holomorphic differentials and normalized differentials
//! of the third kind.
//!
//! All a-cycle integrals are taken as twice the upper-sheet integral across
//! the corresponding gap. A pole lying on that gap is handled as a
//! principal value.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{Estimate, Integrator, SingularEnds};
use crate::surface::{HyperellipticSurface, Sheet, SurfacePoint};

/// Condition number of the period matrix above which it is rejected.
pub const MAX_PERIOD_CONDITION: f64 = 1e12;

/// Minimal distance of a pole from every band edge.
pub const POLE_EDGE_MARGIN: f64 = 1e-10;

/// `C_jk = 2 ∫_{gap k} λ^{j-1} / R^{1/2}(λ) dλ` and its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodData {
    pub c: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

impl PeriodData {
    pub fn genus(&self) -> usize {
        self.c.nrows()
    }

    /// Coefficients of `ζ_j = Σ_k c_j(k) λ^{k-1} dλ / R^{1/2}`, `j` 1-based.
    pub fn zeta_coefficients(&self, j: usize) -> Vec<f64> {
        self.inverse.row(j - 1).iter().copied().collect()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.c)
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Upper-sheet integral of `λ^m / R^{1/2}(λ)` across the gap `(a, b)`.
pub fn gap_moment(
    surface: &HyperellipticSurface,
    integrator: &Integrator,
    (a, b): (f64, f64),
    m: usize,
) -> Result<Estimate> {
    integrator.endpoint_singular(
        |x| Complex64::new(x.powi(m as i32), 0.0) / surface.sqrt_p_upper(Complex64::new(x, 0.0)),
        a,
        b,
        SingularEnds::BOTH,
    )
}

pub fn compute_periods(
    surface: &HyperellipticSurface,
    integrator: &Integrator,
) -> Result<PeriodData> {
    let g = surface.genus();
    let gaps = surface.gaps();
    let mut c = DMatrix::<f64>::zeros(g, g);
    for (k, &gap) in gaps.iter().enumerate() {
        for j in 0..g {
            c[(j, k)] = 2.0 * gap_moment(surface, integrator, gap, j)?.value.re;
        }
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditionedPeriods(f64::INFINITY));
    }
    let cond = condition_number(&c);
    if !(cond <= MAX_PERIOD_CONDITION) {
        return Err(Error::IllConditionedPeriods(cond));
    }
    let inverse = if g == 0 {
        DMatrix::zeros(0, 0)
    } else {
        c.clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::LinearSolve("period matrix is singular".into()))?
    };
    Ok(PeriodData { c, inverse })
}

/// A surface together with its periods and the integrator used for them.
#[derive(Clone, Debug)]
pub struct Curve {
    pub surface: HyperellipticSurface,
    pub periods: PeriodData,
    pub integrator: Integrator,
}

impl Curve {
    pub fn new(surface: HyperellipticSurface, integrator: Integrator) -> Result<Self> {
        let periods = compute_periods(&surface, &integrator)?;
        Ok(Self {
            surface,
            periods,
            integrator,
        })
    }

    pub fn genus(&self) -> usize {
        self.surface.genus()
    }

    /// Upper-sheet integral `∫_gap dλ / ((λ - z0) R^{1/2}(λ))`, a principal
    /// value when `z0` is real inside the gap.
    fn gap_cauchy(&self, (a, b): (f64, f64), z0: Complex64) -> Result<Complex64> {
        let s = &self.surface;
        let inv_r = |x: f64| Complex64::new(1.0, 0.0) / s.sqrt_p_upper(Complex64::new(x, 0.0));
        if z0.im == 0.0 && z0.re > a && z0.re < b {
            let one = |_x: f64| Complex64::new(1.0, 0.0);
            let est =
                self.integrator
                    .principal_value(inv_r, one, z0.re, a, b, SingularEnds::BOTH)?;
            return Ok(est.value);
        }
        let breaks: Vec<f64> = if z0.re > a && z0.re < b {
            vec![z0.re]
        } else {
            vec![]
        };
        let est = self.integrator.endpoint_singular_with_breaks(
            |x| inv_r(x) / (x - z0),
            a,
            b,
            SingularEnds::BOTH,
            &breaks,
        )?;
        Ok(est.value)
    }

    /// Normalized differential of the third kind `ω_{pp*}`.
    pub fn third_kind_kernel(&self, p: SurfacePoint) -> Result<ThirdKindKernel> {
        self.two_pole_kernel(p, p.star())
    }

    /// Normalized differential of the third kind with residue `+1` at `p`
    /// and `-1` at `q`.
    pub fn two_pole_kernel(&self, p: SurfacePoint, q: SurfacePoint) -> Result<ThirdKindKernel> {
        for pt in [&p, &q] {
            if self
                .surface
                .edges()
                .iter()
                .any(|&e| (pt.z - e).norm() < POLE_EDGE_MARGIN)
            {
                return Err(Error::SingularEvaluation(format!(
                    "pole {} is on a band edge",
                    pt.z
                )));
            }
        }
        let rp = self.surface.sqrt_p(&p);
        let rq = self.surface.sqrt_p(&q);
        let g = self.genus();
        let same_projection = p.z == q.z;
        let mut rhs = vec![Complex64::new(0.0, 0.0); g];
        for (l, &gap) in self.surface.gaps().iter().enumerate() {
            rhs[l] = if same_projection {
                rp * self.gap_cauchy(gap, p.z)?
            } else {
                rp * 0.5 * self.gap_cauchy(gap, p.z)? - rq * 0.5 * self.gap_cauchy(gap, q.z)?
            };
        }
        let inv = &self.periods.inverse;
        let poly = (0..g)
            .map(|m| (0..g).map(|l| rhs[l] * inv[(l, m)]).sum::<Complex64>() * -2.0)
            .collect();
        Ok(ThirdKindKernel {
            surface: self.surface.clone(),
            p,
            q,
            rp,
            rq,
            poly,
        })
    }

    /// `δ_j(ρ)`: half the b-period of `ω_{ρρ*}`, accumulated along the
    /// upper-sheet real axis from `E_0` to gap `j`.
    pub fn delta_b_period(&self, rho: f64, j: usize) -> Result<f64> {
        let g = self.genus();
        if j == 0 || j > g {
            return Ok(0.0);
        }
        if self.surface.bands().contains(rho) {
            return Err(Error::SingularEvaluation(format!(
                "pole {rho} lies on a band"
            )));
        }
        let kernel = self.third_kind_kernel(SurfacePoint::real(rho, Sheet::Upper))?;
        let edges = self.surface.edges();
        let mut total = 0.0;
        for m in 0..j {
            let (a, b) = (edges[2 * m], edges[2 * m + 1]);
            let est = self.integrator.endpoint_singular(
                |x| kernel.density_upper(Complex64::new(x, 0.0)),
                a,
                b,
                SingularEnds::BOTH,
            )?;
            total += est.value.im;
        }
        if rho > edges[0] && rho < edges[2 * j - 1] {
            total -= PI;
        }
        Ok(total)
    }
}

/// Normalized Abelian differential of the third kind.
///
/// The density with respect to `dλ` at a point `(λ, s)` is
/// `1/(2(λ-z_p)) - 1/(2(λ-z_q)) + s [R(p)/(2(λ-z_p)) - R(q)/(2(λ-z_q)) + P(λ)] / R^{1/2}(λ)`.
/// For `q = p*` this reduces to `[R(p)/(λ-z_p) + P(λ)] / R(λ)`.
#[derive(Clone, Debug)]
pub struct ThirdKindKernel {
    surface: HyperellipticSurface,
    p: SurfacePoint,
    q: SurfacePoint,
    rp: Complex64,
    rq: Complex64,
    poly: Vec<Complex64>,
}

impl ThirdKindKernel {
    pub fn pole(&self) -> SurfacePoint {
        self.p
    }

    pub fn second_pole(&self) -> SurfacePoint {
        self.q
    }

    /// Coefficients of the normalization polynomial, lowest degree first.
    pub fn poly(&self) -> &[Complex64] {
        &self.poly
    }

    pub fn surface(&self) -> &HyperellipticSurface {
        &self.surface
    }

    fn poly_at(&self, x: Complex64) -> Complex64 {
        self.poly
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    fn is_pp_star(&self) -> bool {
        self.p.z == self.q.z
    }

    fn odd_part(&self, x: Complex64) -> Complex64 {
        let num = if self.is_pp_star() {
            self.rp / (x - self.p.z) + self.poly_at(x)
        } else {
            self.rp * 0.5 / (x - self.p.z) - self.rq * 0.5 / (x - self.q.z) + self.poly_at(x)
        };
        num / self.surface.sqrt_p_upper(x)
    }

    fn even_part(&self, x: Complex64) -> Complex64 {
        if self.is_pp_star() {
            Complex64::new(0.0, 0.0)
        } else {
            0.5 / (x - self.p.z) - 0.5 / (x - self.q.z)
        }
    }

    /// Density on the upper sheet; a zero imaginary part selects the side.
    pub fn density_upper(&self, x: Complex64) -> Complex64 {
        self.even_part(x) + self.odd_part(x)
    }

    pub fn density(&self, q: &SurfacePoint) -> Result<Complex64> {
        if q.z == self.p.z || q.z == self.q.z {
            return Err(Error::SingularEvaluation(format!(
                "density evaluated at the pole {}",
                q.z
            )));
        }
        let x = q.signed_z();
        if self.surface.sqrt_p_upper(x) == Complex64::new(0.0, 0.0) {
            return Err(Error::SingularEvaluation(format!(
                "density evaluated at branch point {}",
                q.z
            )));
        }
        Ok(self.even_part(x) + self.odd_part(x) * q.sheet.sign())
    }

    /// The odd (sheet-alternating) part, whose gap integral doubles to the
    /// a-period.
    pub fn odd_density(&self, x: Complex64) -> Complex64 {
        self.odd_part(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(edges: &[f64]) -> Curve {
        Curve::new(
            HyperellipticSurface::new(edges.to_vec()).unwrap(),
            Integrator::default(),
        )
        .unwrap()
    }

    fn agm(mut a: f64, mut b: f64) -> f64 {
        while (a - b).abs() > 1e-16 * a {
            let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
            a = an;
            b = bn;
        }
        a
    }

    #[test]
    fn genus_zero_has_empty_periods() {
        let c = curve(&[-1.0, 1.0]);
        assert_eq!(c.periods.genus(), 0);
        let k = c
            .third_kind_kernel(SurfacePoint::real(1.25, Sheet::Upper))
            .unwrap();
        assert!(k.poly().is_empty());
    }

    #[test]
    fn c11_matches_agm() {
        // ∫_{-1}^{1} dx / sqrt((4 - x²)(1 - x²)) = K(1/4) / 2 · 2
        let c = curve(&[-2.0, -1.0, 1.0, 2.0]);
        let k = PI / (2.0 * agm(1.0, (0.75f64).sqrt()));
        let expected = 2.0 * k;
        assert!(c.periods.c[(0, 0)] > 0.0);
        assert!(
            (c.periods.c[(0, 0)] - expected).abs() < 1e-9,
            "{} vs {expected}",
            c.periods.c[(0, 0)]
        );
    }

    #[test]
    fn inverse_is_inverse() {
        let c = curve(&[-3.0, -2.0, -1.0, 0.5, 1.0, 2.0, 2.5, 4.0]);
        let id = &c.periods.inverse * &c.periods.c;
        assert!((id - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-10);
    }

    #[test]
    fn density_examples() {
        let c = curve(&[-1.0, 1.0]);
        let k = c
            .third_kind_kernel(SurfacePoint::real(1.25, Sheet::Upper))
            .unwrap();
        let d = k.density(&SurfacePoint::real(2.0, Sheet::Upper)).unwrap();
        assert!((d - Complex64::new(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-15);
        let dl = k.density(&SurfacePoint::real(2.0, Sheet::Lower)).unwrap();
        assert!((dl + d).norm() < 1e-15);
        assert!(k.density(&SurfacePoint::real(1.25, Sheet::Upper)).is_err());

        let c = curve(&[-2.0, -1.0, 1.0, 2.0]);
        let k = c
            .third_kind_kernel(SurfacePoint::real(0.3, Sheet::Upper))
            .unwrap();
        for x in [-1.7, -1.2, 1.1, 1.5, 1.9] {
            let d = k.density_upper(Complex64::new(x, 0.0));
            assert!(d.re.abs() < 1e-12 * d.norm(), "{x}: {d}");
        }
    }

    #[test]
    fn pole_on_edge_rejected() {
        let c = curve(&[-2.0, -1.0, 1.0, 2.0]);
        assert!(c
            .third_kind_kernel(SurfacePoint::real(1.0, Sheet::Upper))
            .is_err());
    }

    #[test]
    fn delta_outside_range_is_zero() {
        let c = curve(&[-2.0, -1.0, 1.0, 2.0]);
        assert_eq!(c.delta_b_period(0.0, 0).unwrap(), 0.0);
        assert_eq!(c.delta_b_period(0.0, 2).unwrap(), 0.0);
        assert!(c.delta_b_period(1.5, 1).is_err());
    }
}
