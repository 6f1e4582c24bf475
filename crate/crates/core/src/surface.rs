//! Band sets, the two-sheeted surface of `sqrt(P)` and the fixed branch of
//! the square root.
//!
//! The branch is `R^{1/2}(z) = -prod_j sqrt(z - E_j)` with principal roots.
//! Real points carry the side of the cut through the sign of the zero
//! imaginary part: `+0.0` is the limit from above, `-0.0` from below.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default absolute tolerance for band membership and edge merging.
pub const TAU_BAND: f64 = 1e-12;

/// Principal square root that respects the sign of a zero imaginary part.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            Complex64::new(z.re.sqrt(), z.im)
        } else {
            Complex64::new(0.0, (-z.re).sqrt().copysign(z.im))
        }
    } else {
        z.sqrt()
    }
}

/// `z - e` keeping the signed zero of `z.im`.
#[inline]
pub fn shift(z: Complex64, e: f64) -> Complex64 {
    Complex64::new(z.re - e, z.im)
}

/// Ordered union of closed, pairwise disjoint real intervals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BandSet {
    intervals: Vec<(f64, f64)>,
}

impl BandSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidBandSet("edges must be finite".into()));
            }
            if !(a < b) {
                return Err(Error::InvalidBandSet(format!(
                    "empty or reversed interval [{a}, {b}]"
                )));
            }
        }
        for w in intervals.windows(2) {
            if !(w[0].1 < w[1].0) {
                return Err(Error::InvalidBandSet(format!(
                    "intervals [{}, {}] and [{}, {}] are not strictly increasing and disjoint",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn from_edges(edges: &[f64]) -> Result<Self> {
        if !edges.len().is_multiple_of(2) {
            return Err(Error::InvalidBandSet("odd number of edges".into()));
        }
        Self::new(edges.chunks(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn edges(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.contains_with(x, TAU_BAND)
    }

    pub fn contains_with(&self, x: f64, tol: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(a, b)| x >= a - tol && x <= b + tol)
    }

    /// Distance from `x` to the set (zero inside).
    pub fn distance(&self, x: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| {
                if x < a {
                    a - x
                } else if x > b {
                    x - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn min(&self) -> Option<f64> {
        self.intervals.first().map(|i| i.0)
    }

    pub fn max(&self) -> Option<f64> {
        self.intervals.last().map(|i| i.1)
    }

    fn union(&self, other: &BandSet) -> BandSet {
        let mut all: Vec<(f64, f64)> = self
            .intervals
            .iter()
            .chain(&other.intervals)
            .copied()
            .collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in all {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        BandSet { intervals: out }
    }

    fn intersection(&self, other: &BandSet) -> BandSet {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            for &(c, d) in &other.intervals {
                let (lo, hi) = (a.max(c), b.min(d));
                if lo < hi {
                    out.push((lo, hi));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        BandSet { intervals: out }
    }

    fn difference(&self, other: &BandSet) -> BandSet {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            let mut pieces = vec![(a, b)];
            for &(c, d) in &other.intervals {
                pieces = pieces
                    .into_iter()
                    .flat_map(|(x, y)| {
                        if d <= x || c >= y {
                            vec![(x, y)]
                        } else {
                            let mut v = Vec::new();
                            if c > x {
                                v.push((x, c));
                            }
                            if d < y {
                                v.push((d, y));
                            }
                            v
                        }
                    })
                    .collect();
            }
            out.extend(pieces);
        }
        BandSet { intervals: out }
    }
}

/// The four pieces of two overlapping spectra.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub sigma: BandSet,
    pub sigma2: BandSet,
    pub sigma_minus1: BandSet,
    pub sigma_plus1: BandSet,
}

/// Union, intersection and the two singly covered parts of `σ₋` and `σ₊`.
///
/// Edges of the two inputs that differ by less than [`TAU_BAND`] without
/// being equal are rejected.
pub fn decompose_spectra(sigma_minus: &BandSet, sigma_plus: &BandSet) -> Result<Decomposition> {
    for e in sigma_minus.edges() {
        for f in sigma_plus.edges() {
            let d = (e - f).abs();
            if d > 0.0 && d < TAU_BAND {
                return Err(Error::IllConditionedDecomposition(e, f));
            }
        }
    }
    let sigma2 = sigma_minus.intersection(sigma_plus);
    Ok(Decomposition {
        sigma: sigma_minus.union(sigma_plus),
        sigma_minus1: sigma_minus.difference(&sigma2),
        sigma_plus1: sigma_plus.difference(&sigma2),
        sigma2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sheet {
    Upper,
    Lower,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Upper => 1.0,
            Sheet::Lower => -1.0,
        }
    }

    pub fn flip(self) -> Sheet {
        match self {
            Sheet::Upper => Sheet::Lower,
            Sheet::Lower => Sheet::Upper,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundarySide {
    Above,
    Below,
    None,
}

/// Point of the surface: projection, sheet and, for real points on a band,
/// the side of the cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub z: Complex64,
    pub sheet: Sheet,
    pub side: BoundarySide,
}

impl SurfacePoint {
    pub fn new(z: Complex64, sheet: Sheet) -> Self {
        Self {
            z,
            sheet,
            side: BoundarySide::None,
        }
    }

    pub fn upper(z: Complex64) -> Self {
        Self::new(z, Sheet::Upper)
    }

    pub fn lower(z: Complex64) -> Self {
        Self::new(z, Sheet::Lower)
    }

    pub fn real(x: f64, sheet: Sheet) -> Self {
        Self::new(Complex64::new(x, 0.0), sheet)
    }

    /// Real point approached from the given side. The side is dropped
    /// unless `x` lies inside a band of `surface`.
    pub fn on_boundary(
        surface: &HyperellipticSurface,
        x: f64,
        sheet: Sheet,
        side: BoundarySide,
    ) -> Self {
        let side = if surface.in_band_interior(x) {
            side
        } else {
            BoundarySide::None
        };
        Self {
            z: Complex64::new(x, 0.0),
            sheet,
            side,
        }
    }

    pub fn star(self) -> Self {
        Self {
            sheet: self.sheet.flip(),
            ..self
        }
    }

    /// Projection with the boundary side encoded in the sign of a zero
    /// imaginary part.
    pub fn signed_z(&self) -> Complex64 {
        if self.z.im == 0.0 {
            let im = match self.side {
                BoundarySide::Below => -0.0,
                _ => 0.0,
            };
            Complex64::new(self.z.re, im)
        } else {
            self.z
        }
    }
}

/// Two-sheeted surface of `sqrt(P)`, `P(z) = prod (z - E_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperellipticSurface {
    edges: Vec<f64>,
}

impl HyperellipticSurface {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || !edges.len().is_multiple_of(2) {
            return Err(Error::InvalidSurface(format!(
                "need an even, nonzero number of edges, got {}",
                edges.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSurface("edges must be finite".into()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSurface(
                "edges must be strictly increasing".into(),
            ));
        }
        Ok(Self { edges })
    }

    pub fn from_bands(bands: &BandSet) -> Result<Self> {
        Self::new(bands.edges())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn genus(&self) -> usize {
        self.edges.len() / 2 - 1
    }

    pub fn e0(&self) -> f64 {
        self.edges[0]
    }

    pub fn e_max(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn bands(&self) -> BandSet {
        BandSet {
            intervals: self.edges.chunks(2).map(|c| (c[0], c[1])).collect(),
        }
    }

    /// The finite gaps `(E_{2j-1}, E_{2j})`, `j = 1..=g`.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        (1..=self.genus())
            .map(|j| (self.edges[2 * j - 1], self.edges[2 * j]))
            .collect()
    }

    pub fn in_band_interior(&self, x: f64) -> bool {
        self.edges.chunks(2).any(|c| x > c[0] && x < c[1])
    }

    /// Index `j` of the finite gap containing `x` (1-based), if any.
    pub fn gap_index(&self, x: f64) -> Option<usize> {
        self.gaps()
            .iter()
            .position(|&(a, b)| x > a && x < b)
            .map(|i| i + 1)
    }

    /// Smallest distance between consecutive edges.
    pub fn min_spacing(&self) -> f64 {
        self.edges
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance from `x` to any edge.
    pub fn edge_distance(&self, x: f64) -> f64 {
        self.edges
            .iter()
            .map(|e| (x - e).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn poly(&self, z: Complex64) -> Complex64 {
        self.edges
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &e| acc * (z - e))
    }

    /// Upper-sheet branch at a projection whose zero imaginary part selects
    /// the side of the cut.
    pub fn sqrt_p_upper(&self, z: Complex64) -> Complex64 {
        -self.edges.iter().fold(Complex64::new(1.0, 0.0), |acc, &e| {
            acc * principal_sqrt(shift(z, e))
        })
    }

    pub fn sqrt_p(&self, p: &SurfacePoint) -> Complex64 {
        self.sqrt_p_upper(p.signed_z()) * p.sheet.sign()
    }
}

/// `prod (z - mu_j) / R^{1/2}(z)` on the upper sheet.
pub fn rho(surface: &HyperellipticSurface, mu: &[f64], p: &SurfacePoint) -> Result<Complex64> {
    if mu.len() != surface.genus() {
        return Err(Error::InvalidSurface(format!(
            "expected {} Dirichlet values, got {}",
            surface.genus(),
            mu.len()
        )));
    }
    let upper = SurfacePoint {
        sheet: Sheet::Upper,
        ..*p
    };
    let r = surface.sqrt_p(&upper);
    if r == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularEvaluation(format!(
            "rho evaluated at band edge {}",
            p.z
        )));
    }
    let num = mu
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &m| acc * (p.z - m));
    Ok(num / r)
}
