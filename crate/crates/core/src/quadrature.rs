//! Adaptive Gauss–Legendre quadrature for the singular integrals that show
//! up on hyperelliptic surfaces.
//!
//! Three entry points cover everything the rest of the crate needs:
//!
//! * [`Integrator::endpoint_singular`] for band and gap integrals whose
//!   integrands blow up like `(x - a)^(-1/2)` (or logarithmically) at the
//!   ends. Flagged ends are removed with the substitution `x = a + s^2`.
//! * [`Integrator::principal_value`] for a simple real pole strictly inside
//!   the interval. The pole is subtracted and its principal value added back
//!   in closed form.
//! * [`Integrator::path`] for complex integrands along a [`Polyline`].
//!
//! Panels are refined by bisection, always splitting the panel with the
//! largest error estimate. The estimate for a panel is the difference
//! between the rule on the whole panel and the sum over its two halves.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard cap on the number of live panels in one adaptive integral.
const MAX_PANELS: usize = 20_000;

/// Pole distance from the interval ends below which a principal value is
/// rejected.
const PV_ENDPOINT_GAP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of any single panel.
    pub max_subdivisions: usize,
    /// Gauss–Legendre nodes per panel.
    pub base_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_subdivisions: 60,
            base_nodes: 32,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidQuadrature(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidQuadrature(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        if self.base_nodes < 2 {
            return Err(Error::InvalidQuadrature(
                "base_nodes must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Integral value together with its estimated absolute error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

impl std::ops::Mul<Complex64> for Estimate {
    type Output = Estimate;
    fn mul(self, rhs: Complex64) -> Estimate {
        Estimate {
            value: self.value * rhs,
            error: self.error * rhs.norm(),
        }
    }
}

/// Which ends of an interval carry an integrable singularity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SingularEnds {
    pub left: bool,
    pub right: bool,
}

impl SingularEnds {
    pub const NONE: SingularEnds = SingularEnds {
        left: false,
        right: false,
    };
    pub const BOTH: SingularEnds = SingularEnds {
        left: true,
        right: true,
    };
    pub const LEFT: SingularEnds = SingularEnds {
        left: true,
        right: false,
    };
    pub const RIGHT: SingularEnds = SingularEnds {
        left: false,
        right: true,
    };
}

/// Open polygonal path in the complex plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    vertices: Vec<Complex64>,
    singular_start: bool,
    singular_end: bool,
}

impl Polyline {
    pub fn new(vertices: Vec<Complex64>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidPath(
                "a polyline needs at least 2 vertices".into(),
            ));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPath(
                "consecutive vertices must be distinct".into(),
            ));
        }
        Ok(Self {
            vertices,
            singular_start: false,
            singular_end: false,
        })
    }

    /// Like [`Polyline::new`] but silently drops repeated vertices.
    pub fn dedup(mut vertices: Vec<Complex64>) -> Result<Self> {
        vertices.dedup();
        Self::new(vertices)
    }

    /// Mark the first vertex as an integrable (inverse square root) singularity.
    pub fn singular_start(mut self) -> Self {
        self.singular_start = true;
        self
    }

    pub fn singular_end(mut self) -> Self {
        self.singular_end = true;
        self
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    /// Smallest distance from `z` to any segment of the path.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let t = ((z - w[0]) * d.conj()).re / d.norm_sqr();
                let t = t.clamp(0.0, 1.0);
                (w[0] + d * t - z).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    left: Complex64,
    right: Complex64,
    error: f64,
    depth: usize,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integrator built from a [`QuadratureSpec`].
#[derive(Clone, Debug)]
pub struct Integrator {
    spec: QuadratureSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for Integrator {
    fn default() -> Self {
        Self::new(QuadratureSpec::default()).expect("default spec is valid")
    }
}

impl Integrator {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let (nodes, weights) = gauss_legendre(spec.base_nodes);
        Ok(Self {
            spec,
            nodes,
            weights,
        })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    fn rule<F: Fn(f64) -> Complex64>(&self, f: &F, a: f64, b: f64) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * x) * *w;
        }
        acc * half
    }

    fn make_panel<F: Fn(f64) -> Complex64>(
        &self,
        f: &F,
        a: f64,
        b: f64,
        whole: Complex64,
        depth: usize,
    ) -> Panel {
        let m = 0.5 * (a + b);
        let left = self.rule(f, a, m);
        let right = self.rule(f, m, b);
        let error = (left + right - whole).norm();
        Panel {
            a,
            b,
            left,
            right,
            error,
            depth,
        }
    }

    /// Plain adaptive integral of a smooth integrand over `[a, b]`.
    pub fn smooth<F: Fn(f64) -> Complex64>(&self, f: F, a: f64, b: f64) -> Result<Estimate> {
        if a == b {
            return Ok(Estimate::default());
        }
        self.adaptive(&f, &[a, b])
    }

    /// Global adaptive integration over consecutive panels `points[i]..points[i+1]`
    /// sharing one error budget.
    fn adaptive<F: Fn(f64) -> Complex64>(&self, f: &F, points: &[f64]) -> Result<Estimate> {
        let mut heap = BinaryHeap::new();
        let mut frozen: Vec<Panel> = Vec::new();
        for w in points.windows(2) {
            if w[0] != w[1] {
                let whole = self.rule(f, w[0], w[1]);
                heap.push(self.make_panel(f, w[0], w[1], whole, 0));
            }
        }
        let mut value: Complex64 = heap.iter().map(|p: &Panel| p.left + p.right).sum();
        let mut error: f64 = heap.iter().map(|p| p.error).sum();

        loop {
            if value.is_nan() || error.is_nan() {
                return Err(Error::NotConverged {
                    estimate: value,
                    error,
                });
            }
            let target = self.spec.abs_tol.max(self.spec.rel_tol * value.norm());
            if error <= target {
                return Ok(Estimate { value, error });
            }
            let Some(worst) = heap.pop() else {
                return Err(Error::NotConverged {
                    estimate: value,
                    error,
                });
            };
            if worst.depth >= self.spec.max_subdivisions || heap.len() + frozen.len() >= MAX_PANELS
            {
                frozen.push(worst);
                continue;
            }
            let m = 0.5 * (worst.a + worst.b);
            let l = self.make_panel(f, worst.a, m, worst.left, worst.depth + 1);
            let r = self.make_panel(f, m, worst.b, worst.right, worst.depth + 1);
            value += l.left + l.right + r.left + r.right - worst.left - worst.right;
            error += l.error + r.error - worst.error;
            heap.push(l);
            heap.push(r);
            if heap.len() % 256 == 0 {
                value = heap
                    .iter()
                    .chain(frozen.iter())
                    .map(|p| p.left + p.right)
                    .sum();
                error = heap.iter().chain(frozen.iter()).map(|p| p.error).sum();
            }
        }
    }

    /// Integral over `[a, b]` with inverse-square-root (or logarithmic)
    /// behaviour at the flagged ends.
    pub fn endpoint_singular<F: Fn(f64) -> Complex64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        ends: SingularEnds,
    ) -> Result<Estimate> {
        self.endpoint_singular_with_breaks(f, a, b, ends, &[])
    }

    /// Same as [`Integrator::endpoint_singular`] with extra interior
    /// breakpoints (for example the projection of a nearby pole).
    ///
    /// A flagged end is removed by the map `x = a + (b - a) u(t)` with
    /// `u(t) = t²` (left), `1 - (1 - t)²` (right) or `3t² - 2t³` (both).
    pub fn endpoint_singular_with_breaks<F: Fn(f64) -> Complex64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        ends: SingularEnds,
        breaks: &[f64],
    ) -> Result<Estimate> {
        if a == b {
            return Ok(Estimate::default());
        }
        if a > b {
            let flipped = SingularEnds {
                left: ends.right,
                right: ends.left,
            };
            let est = self.endpoint_singular_with_breaks(f, b, a, flipped, breaks)?;
            return Ok(Estimate {
                value: -est.value,
                error: est.error,
            });
        }
        let map = EndMap::new(a, b, ends);
        let mut points: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|x| *x > a && *x < b)
            .map(|x| map.inverse(x))
            .collect();
        points.push(0.0);
        points.push(1.0);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let g = |t: f64| {
            let (x, jac) = map.forward(t);
            if (ends.left && x <= a) || (ends.right && x >= b) || jac == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                f(x) * jac
            }
        };
        self.adaptive(&g, &points)
    }

    /// Principal value of `∫ f(x) w(x) / (x - pole) dx` over `[a, b]`.
    ///
    /// `f(pole) w(pole) / (x - pole)` is subtracted; its principal value is
    /// `f(pole) w(pole) log((b - pole) / (pole - a))`.
    pub fn principal_value<F, W>(
        &self,
        f: F,
        weight: W,
        pole: f64,
        a: f64,
        b: f64,
        ends: SingularEnds,
    ) -> Result<Estimate>
    where
        F: Fn(f64) -> Complex64,
        W: Fn(f64) -> Complex64,
    {
        let scale = (b - a).abs().max(1.0);
        if !(pole > a && pole < b)
            || pole - a < PV_ENDPOINT_GAP * scale
            || b - pole < PV_ENDPOINT_GAP * scale
        {
            return Err(Error::DegeneratePrincipalValue { pole, a, b });
        }
        let c = f(pole) * weight(pole);
        let remainder = |x: f64| {
            let d = x - pole;
            if d == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (f(x) * weight(x) - c) / d
            }
        };
        let closed = c * ((b - pole) / (pole - a)).ln();
        match self.endpoint_singular_with_breaks(remainder, a, b, ends, &[pole]) {
            Ok(e) => Ok(Estimate {
                value: e.value + closed,
                error: e.error,
            }),
            Err(Error::NotConverged { estimate, error }) => Err(Error::NotConverged {
                estimate: estimate + closed,
                error,
            }),
            Err(e) => Err(e),
        }
    }

    /// Integral of `f` along the polyline.
    pub fn path<F: Fn(Complex64) -> Complex64>(&self, f: F, path: &Polyline) -> Result<Estimate> {
        let verts = path.vertices();
        let n = verts.len() - 1;
        let mut total: Result<Estimate> = Ok(Estimate::default());
        for (i, w) in verts.windows(2).enumerate() {
            let (z0, z1) = (w[0], w[1]);
            let d = z1 - z0;
            let ends = SingularEnds {
                left: path.singular_start && i == 0,
                right: path.singular_end && i == n - 1,
            };
            let seg = self.endpoint_singular(|t| f(z0 + d * t) * d, 0.0, 1.0, ends);
            total = combine(total, seg);
        }
        total
    }
}

/// Change of variables `[0, 1] → [a, b]` flattening the flagged ends.
struct EndMap {
    a: f64,
    len: f64,
    ends: SingularEnds,
}

impl EndMap {
    fn new(a: f64, b: f64, ends: SingularEnds) -> Self {
        Self {
            a,
            len: b - a,
            ends,
        }
    }

    /// `(x(t), x'(t))`.
    fn forward(&self, t: f64) -> (f64, f64) {
        let (u, du) = match (self.ends.left, self.ends.right) {
            (false, false) => (t, 1.0),
            (true, false) => (t * t, 2.0 * t),
            (false, true) => (1.0 - (1.0 - t) * (1.0 - t), 2.0 * (1.0 - t)),
            (true, true) => (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)),
        };
        let x = if u > 0.5 {
            self.a + self.len - self.len * (1.0 - u)
        } else {
            self.a + self.len * u
        };
        (x, self.len * du)
    }

    fn inverse(&self, x: f64) -> f64 {
        let u = ((x - self.a) / self.len).clamp(0.0, 1.0);
        match (self.ends.left, self.ends.right) {
            (false, false) => u,
            (true, false) => u.sqrt(),
            (false, true) => 1.0 - (1.0 - u).sqrt(),
            (true, true) => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..80 {
                    let m = 0.5 * (lo + hi);
                    if m * m * (3.0 - 2.0 * m) < u {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

fn combine(a: Result<Estimate>, b: Result<Estimate>) -> Result<Estimate> {
    match (a, b) {
        (Ok(x), Ok(y)) => Ok(x + y),
        (Err(e), _) | (_, Err(e)) if !matches!(e, Error::NotConverged { .. }) => Err(e),
        (x, y) => {
            let unpack = |r: Result<Estimate>| match r {
                Ok(e) => e,
                Err(Error::NotConverged { estimate, error }) => Estimate {
                    value: estimate,
                    error,
                },
                Err(_) => unreachable!(),
            };
            let t = unpack(x) + unpack(y);
            Err(Error::NotConverged {
                estimate: t.value,
                error: t.error,
            })
        }
    }
}

/// Accept a non-converged estimate when its error bound is below `limit`.
pub fn accept_within(result: Result<Estimate>, limit: f64) -> Result<Estimate> {
    match result {
        Err(Error::NotConverged { estimate, error }) if error <= limit => Ok(Estimate {
            value: estimate,
            error,
        }),
        other => other,
    }
}
