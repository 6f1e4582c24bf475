//! One-sided scattering data and its JSON form.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, Serializer};

use crate::error::{Error, Result};
use crate::surface::BandSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringData {
    pub sigma_minus_edges: Vec<f64>,
    pub sigma_plus_edges: Vec<f64>,
    /// Rows `[λ, Re R₊, Im R₊]` on `σ₊`.
    #[serde(rename = "R_plus")]
    pub r_plus: Vec<[f64; 3]>,
    /// Rows `[λ, |T₊|²]` on the part of `σ₋` outside `σ₊`.
    #[serde(rename = "T_plus_sq")]
    pub t_plus_sq: Vec<[f64; 2]>,
    pub eigenvalues: Vec<f64>,
    pub norming_plus: Vec<f64>,
    #[serde(rename = "M_minus")]
    pub m_minus: Vec<f64>,
    #[serde(rename = "M_plus")]
    pub m_plus: Vec<f64>,
    /// Dirichlet values of the left background, one per finite gap of `σ₋`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_minus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_plus: Option<Vec<f64>>,
}

impl ScatteringData {
    pub fn sigma_minus(&self) -> Result<BandSet> {
        BandSet::from_edges(&self.sigma_minus_edges)
    }

    pub fn sigma_plus(&self) -> Result<BandSet> {
        BandSet::from_edges(&self.sigma_plus_edges)
    }

    pub fn validate(&self) -> Result<()> {
        let minus = self.sigma_minus()?;
        let plus = self.sigma_plus()?;
        if minus.is_empty() || plus.is_empty() {
            return Err(Error::Data("both spectra need at least one band".into()));
        }
        check_increasing("R_plus", self.r_plus.iter().map(|r| r[0]))?;
        check_increasing("T_plus_sq", self.t_plus_sq.iter().map(|r| r[0]))?;
        if self.norming_plus.len() != self.eigenvalues.len() {
            return Err(Error::Data(format!(
                "{} eigenvalues but {} norming constants",
                self.eigenvalues.len(),
                self.norming_plus.len()
            )));
        }
        let finite = self
            .r_plus
            .iter()
            .flatten()
            .chain(self.t_plus_sq.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        let mut ser = Serializer::with_formatter(&mut buf, RoundTrip::default());
        self.serialize(&mut ser)?;
        buf.push(b'\n');
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let data: ScatteringData = serde_json::from_str(text)?;
        data.validate()?;
        Ok(data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_increasing(name: &str, xs: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for x in xs {
        if !(x > prev) {
            return Err(Error::Data(format!(
                "{name}: λ values must be strictly increasing (at {x})"
            )));
        }
        prev = x;
    }
    Ok(())
}

/// Pretty JSON with every float written to 17 significant digits.
#[derive(Default)]
pub struct RoundTrip {
    indent: usize,
    has_value: bool,
    inline: usize,
}

impl RoundTrip {
    fn newline<W: ?Sized + Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl Formatter for RoundTrip {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.inline > 0 || self.indent >= 2 {
            self.inline += 1;
        } else {
            self.indent += 1;
        }
        self.has_value = false;
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.inline > 0 {
            self.inline -= 1;
        } else {
            self.indent -= 1;
            if self.has_value {
                self.newline(w)?;
            }
        }
        self.has_value = true;
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        if self.inline > 0 {
            if !first {
                w.write_all(b" ")?;
            }
            Ok(())
        } else {
            self.newline(w)
        }
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        self.has_value = true;
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}
