//! File outputs: CSV tables, JSON manifests and SVG scatter plots.
//!
//! Every writer is a pure function of its input, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num::complex::Complex64;
use serde::Serialize;

use crate::caps::Caps;
use crate::circulant::{SparseCirculant, Spectrum};
use crate::error::Result;
use crate::limit::{AtomicDistribution, LogConstant};

pub fn version_string() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Written next to every output set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest<C: Serialize> {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub caps: Caps,
    pub config: C,
    pub files: Vec<String>,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &str, seed: Option<u64>, caps: Caps, config: C) -> Self {
        Self {
            command: command.into(),
            version: version_string(),
            seed,
            caps,
            config,
            files: Vec::new(),
        }
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

/// One CSV row per record, header from the field names.
pub fn records_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_records_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    fs::write(path, records_csv(records)?)?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    re: f64,
    im: f64,
    modulus: f64,
}

/// `index, re, im, modulus` per character in enumeration order.
pub fn spectrum_csv(spectrum: &Spectrum) -> Result<String> {
    let rows: Vec<SpectrumRow> = spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(index, z)| SpectrumRow {
            index,
            re: z.re,
            im: z.im,
            modulus: z.norm(),
        })
        .collect();
    records_csv(&rows)
}

#[derive(Serialize)]
struct AtomRow {
    re: f64,
    im: f64,
    weight_num: String,
    weight_den: String,
}

/// `re, im, weight_num, weight_den` per atom.
pub fn atoms_csv(atoms: &AtomicDistribution) -> Result<String> {
    let rows: Vec<AtomRow> = atoms
        .atoms
        .iter()
        .map(|a| AtomRow {
            re: a.location.re,
            im: a.location.im,
            weight_num: a.weight.numer().to_string(),
            weight_den: a.weight.denom().to_string(),
        })
        .collect();
    records_csv(&rows)
}

/// `{m, d, c, flag}` for one log-integral constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantReport {
    pub m: u64,
    pub d: u32,
    pub c: Option<f64>,
    pub flag: &'static str,
}

impl ConstantReport {
    pub fn new(m: u64, d: u32, c: LogConstant) -> Self {
        match c {
            LogConstant::Finite(v) => Self {
                m,
                d,
                c: Some(v),
                flag: "finite",
            },
            LogConstant::MinusInfinity => Self {
                m,
                d,
                c: None,
                flag: "minus_infinity",
            },
        }
    }
}

/// A sampled instance: group literal, `d`, support and the seed it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub group: String,
    pub d: usize,
    pub support: Vec<Vec<u64>>,
    pub seed: u64,
}

impl SampleRecord {
    pub fn new(c: &SparseCirculant, seed: u64) -> Self {
        Self {
            group: c.group.to_string(),
            d: c.d,
            support: c.support.iter().map(|x| x.residues.clone()).collect(),
            seed,
        }
    }
}

/// Scatter of `points` in `[−extent, extent]²`, optionally overlaid with
/// atoms drawn as rings whose area tracks their weight.
pub fn scatter_svg(points: &[Complex64], atoms: Option<&AtomicDistribution>, extent: f64, title: &str) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 24.0;
    let scale = (SIZE - 2.0 * PAD) / (2.0 * extent);
    let px = |z: Complex64| (PAD + (z.re + extent) * scale, PAD + (extent - z.im) * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (cx, cy) = px(Complex64::new(0.0, 0.0));
    let _ = writeln!(
        s,
        r##"<line x1="{PAD}" y1="{cy:.3}" x2="{:.3}" y2="{cy:.3}" stroke="#bbb"/>"##,
        SIZE - PAD
    );
    let _ = writeln!(
        s,
        r##"<line x1="{cx:.3}" y1="{PAD}" x2="{cx:.3}" y2="{:.3}" stroke="#bbb"/>"##,
        SIZE - PAD
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="#ddd"/>"##,
        scale
    );
    if let Some(atoms) = atoms {
        for a in &atoms.atoms {
            let (x, y) = px(a.location);
            let r = 3.0 + 20.0 * crate::number_theory::rational_to_f64(&a.weight).sqrt();
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.3}" cy="{y:.3}" r="{r:.3}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##
            );
        }
    }
    for &z in points {
        let (x, y) = px(z);
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.3}" cy="{y:.3}" r="1.6" fill="#1f77b4" fill-opacity="0.6"/>"##
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
