//! Blaschke factors and the Green function of the upper sheet.
//!
//! Both are exponentials of integrals of a third-kind differential starting
//! at `E_0`. The path first leaves `E_0` vertically, runs horizontally at
//! height `h` (a quarter of the smallest edge spacing) and then drops to
//! the target. It goes below the real axis for targets in the lower half
//! plane and for real targets approached from below.

use num_complex::Complex64;

use crate::abelian::{Curve, ThirdKindKernel};
use crate::error::{Error, Result};
use crate::quadrature::{Estimate, Polyline};
use crate::surface::{BoundarySide, Sheet, SurfacePoint};

/// Closest admissible approach of the integration path to a pole.
pub const POLE_PATH_MARGIN: f64 = 1e-8;

const MAX_HEIGHT_DOUBLINGS: usize = 4;

/// Integral of `kernel` on the upper sheet from `E_0` to the projection of
/// `target`.
pub fn integrate_from_e0(
    curve: &Curve,
    kernel: &ThirdKindKernel,
    target: &SurfacePoint,
    height_scale: f64,
) -> Result<Estimate> {
    let surface = &curve.surface;
    let e0 = Complex64::new(surface.e0(), 0.0);
    let z = target.signed_z();
    if z == e0 {
        return Ok(Estimate::default());
    }
    let below = z.im < 0.0 || z.im == 0.0 && target.side == BoundarySide::Below;
    let dir = if below { -1.0 } else { 1.0 };
    let at_edge = z.im == 0.0 && surface.edge_distance(z.re) == 0.0;
    let poles = upper_sheet_poles(kernel);

    let mut h = 0.25 * surface.min_spacing() * height_scale;
    for _ in 0..=MAX_HEIGHT_DOUBLINGS {
        let lift = Complex64::new(0.0, dir * h);
        let mut path = Polyline::dedup(vec![e0, e0 + lift, Complex64::new(z.re, 0.0) + lift, z])?
            .singular_start();
        if at_edge {
            path = path.singular_end();
        }
        let hit = poles
            .iter()
            .find(|&&w| path.distance_to(w) < POLE_PATH_MARGIN);
        match hit {
            None => {
                let integrand = |w: Complex64| {
                    let w = if w.im == 0.0 {
                        Complex64::new(w.re, if below { -0.0 } else { 0.0 })
                    } else {
                        w
                    };
                    kernel.density_upper(w)
                };
                return curve.integrator.path(integrand, &path);
            }
            Some(&w) if (w - z).norm() < POLE_PATH_MARGIN => return Err(Error::PoleOnPath(w)),
            Some(_) => h *= 2.0,
        }
    }
    Err(Error::PoleOnPath(poles[0]))
}

fn upper_sheet_poles(kernel: &ThirdKindKernel) -> Vec<Complex64> {
    let mut v = Vec::new();
    for p in [kernel.pole(), kernel.second_pole()] {
        if p.sheet == Sheet::Upper {
            v.push(p.z);
        }
    }
    v
}

/// Blaschke factor `B(·, ρ)` of a curve for a real pole off the bands.
#[derive(Clone, Debug)]
pub struct BlaschkeEvaluator {
    curve: Curve,
    rho: f64,
    kernel: ThirdKindKernel,
    height_scale: f64,
}

impl BlaschkeEvaluator {
    pub fn new(curve: &Curve, rho: f64) -> Result<Self> {
        if curve.surface.bands().contains(rho) {
            return Err(Error::SingularEvaluation(format!(
                "Blaschke pole {rho} lies on a band"
            )));
        }
        let kernel = curve.third_kind_kernel(SurfacePoint::real(rho, Sheet::Upper))?;
        Ok(Self {
            curve: curve.clone(),
            rho,
            kernel,
            height_scale: 1.0,
        })
    }

    /// Multiply the path height by `scale`.
    pub fn with_height_scale(mut self, scale: f64) -> Self {
        self.height_scale = scale;
        self
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    /// `log B(p, ρ)` on the branch fixed by the path template.
    pub fn log_blaschke(&self, p: &SurfacePoint) -> Result<Estimate> {
        let est = integrate_from_e0(&self.curve, &self.kernel, p, self.height_scale)?;
        Ok(match p.sheet {
            Sheet::Upper => est,
            Sheet::Lower => Estimate {
                value: -est.value,
                error: est.error,
            },
        })
    }

    pub fn blaschke(&self, p: &SurfacePoint) -> Result<Complex64> {
        if p.z.im == 0.0 && p.z.re == self.rho {
            return Ok(match p.sheet {
                Sheet::Upper => Complex64::new(0.0, 0.0),
                Sheet::Lower => Complex64::new(f64::INFINITY, 0.0),
            });
        }
        Ok(self.log_blaschke(p)?.value.exp())
    }

    /// `δ_j(ρ)`, the constant argument of `B` on the closed gap `j`.
    pub fn gap_phase(&self, j: usize) -> Result<f64> {
        self.curve.delta_b_period(self.rho, j)
    }
}

/// Green function of the upper sheet with pole at `z0`.
///
/// Real `z` approach the bands from above unless their imaginary part is
/// `-0.0`.
pub fn green(curve: &Curve, z: Complex64, z0: Complex64) -> Result<f64> {
    if z == z0 {
        return Err(Error::SingularEvaluation(
            "green evaluated at its pole".into(),
        ));
    }
    let target = SurfacePoint::upper(z);
    let target = if z.im == 0.0 && z.im.is_sign_negative() {
        SurfacePoint {
            side: BoundarySide::Below,
            ..target
        }
    } else {
        target
    };
    let kernel = if z0.im == 0.0 {
        if curve.surface.bands().contains(z0.re) {
            return Err(Error::SingularEvaluation(format!(
                "green pole {z0} lies on a band"
            )));
        }
        curve.third_kind_kernel(SurfacePoint::upper(z0))?
    } else {
        curve.two_pole_kernel(SurfacePoint::upper(z0), SurfacePoint::lower(z0.conj()))?
    };
    let est = integrate_from_e0(curve, &kernel, &target, 1.0)?;
    Ok(-est.value.re)
}
