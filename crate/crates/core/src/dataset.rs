//! Labeled datasets, normalization, margin matrices and synthetic generators.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};

/// Labeled feature vectors with labels in {−1, +1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Validation(format!(
                "dataset needs n >= 1 and d >= 1, got n={} d={}",
                features.nrows(),
                features.ncols()
            )));
        }
        if labels.len() != features.nrows() {
            return Err(Error::Validation(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.nrows()
            )));
        }
        if let Some((i, y)) = labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y != 1.0 && y != -1.0)
        {
            return Err(Error::Validation(format!("label {y} at row {} is not ±1", i + 1)));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        Ok(Dataset { features, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Validation("ragged feature rows".into()));
        }
        Dataset::new(Matrix::from_rows(rows, d), labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Reads `f1,…,fd,label` CSV with a header row. No normalization.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?;
        let cols = header.len();
        if cols < 2 || header.iter().all(str::is_empty) {
            return Err(Error::Parse {
                row: 1,
                message: "expected header f1,...,fd,label".into(),
            });
        }
        let d = cols - 1;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            // header is line 1
            let row = k + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if rec.len() != cols {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {cols} fields, found {}", rec.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("cannot parse {s:?} as a number"),
                })
            };
            let x = rec.iter().take(d).map(parse).collect::<Result<Vec<_>>>()?;
            let y = parse(&rec[d])?;
            if y != 1.0 && y != -1.0 {
                return Err(Error::Validation(format!("label {y} at row {row} is not ±1")));
            }
            rows.push(x);
            labels.push(y);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                row: 2,
                message: "no data rows".into(),
            });
        }
        Dataset::from_rows(&rows, &labels)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("f{k}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (x, &y) in self.features.rows_iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            rec.push(format!("{}", y as i64));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Scales all features by one scalar so that max_i |x_i| ≤ 1.
    pub fn normalize(&self) -> Result<Dataset> {
        let max = self.features.max_row_norm();
        if max == 0.0 {
            return Err(Error::Degenerate("all feature vectors are zero".into()));
        }
        let mut out = self.clone();
        if max > 1.0 {
            out.features.scale(1.0 / max);
        }
        Ok(out)
    }

    pub fn to_margin_matrix(&self) -> MarginMatrix {
        let mut m = self.features.clone();
        for (i, &y) in self.labels.iter().enumerate() {
            for v in m.row_mut(i) {
                *v *= -y;
            }
        }
        MarginMatrix(m)
    }
}

/// The matrix A with rows A_i = −y_i x_iᵀ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarginMatrix(Matrix);

impl MarginMatrix {
    /// Wraps raw rows. Panics on an empty or ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "margin matrix needs at least one row");
        MarginMatrix(Matrix::from_rows(rows, rows[0].len()))
    }

    pub fn from_matrix(m: Matrix) -> Self {
        MarginMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn max_row_norm(&self) -> f64 {
        self.0.max_row_norm()
    }

    /// Hex SHA-256 over dimensions and little-endian row data.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.nrows() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for v in self.0.as_slice() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// The four illustrative geometries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Two disjoint circles with a gap.
    Separable,
    /// Two intersecting circles.
    Overlap,
    /// Circles tangent at the origin plus a point at the origin.
    Touching,
    /// Tangent circles plus asymmetric points on the tangent axis.
    Mixed,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] = [
        SynthKind::Separable,
        SynthKind::Overlap,
        SynthKind::Touching,
        SynthKind::Mixed,
    ];

    fn center_offset(self) -> f64 {
        match self {
            SynthKind::Separable => 1.5,
            SynthKind::Overlap => 0.5,
            SynthKind::Touching | SynthKind::Mixed => 1.0,
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SynthKind::Separable => "separable",
            SynthKind::Overlap => "overlap",
            SynthKind::Touching => "touching",
            SynthKind::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" => Ok(SynthKind::Separable),
            "overlap" => Ok(SynthKind::Overlap),
            "touching" => Ok(SynthKind::Touching),
            "mixed" => Ok(SynthKind::Mixed),
            other => Err(Error::Usage(format!(
                "unknown dataset kind {other:?} (expected separable, overlap, touching or mixed)"
            ))),
        }
    }
}

/// Angular half-width of the arc around the tangent point that tangent
/// configurations leave empty. Keeps the closest circle point at |x₁| = ½.
const TANGENT_GAP: f64 = PI / 3.0;

/// Generates one of the four geometries in ℝ² and normalizes it.
///
/// Positive points lie on the unit circle centred at (−c, 0), negative points
/// on the unit circle centred at (+c, 0), so the max-margin direction of the
/// circles is −e₁.
pub fn synth(kind: SynthKind, n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::Usage("n_per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = kind.center_offset();
    let tangent = matches!(kind, SynthKind::Touching | SynthKind::Mixed);
    let mut rows = Vec::with_capacity(2 * n_per_class + 3);
    let mut labels = Vec::with_capacity(2 * n_per_class + 3);
    for (label, center) in [(1.0, -c), (-1.0, c)] {
        // angle measured from the direction pointing at the origin
        let toward = if center < 0.0 { 0.0 } else { PI };
        for _ in 0..n_per_class {
            let phi = if tangent {
                rng.gen_range(TANGENT_GAP..(2.0 * PI - TANGENT_GAP))
            } else {
                rng.gen_range(0.0..(2.0 * PI))
            };
            let theta = toward + phi;
            rows.push(vec![center + theta.cos(), theta.sin()]);
            labels.push(label);
        }
    }
    match kind {
        SynthKind::Touching => {
            rows.push(vec![0.0, 0.0]);
            labels.push(1.0);
        }
        SynthKind::Mixed => {
            for (h, y) in [(0.5, 1.0), (0.5, 1.0), (0.9, -1.0)] {
                rows.push(vec![0.0, h]);
                labels.push(y);
            }
        }
        _ => {}
    }
    Dataset::from_rows(&rows, &labels)?.normalize()
}

/// Row norms after normalization never exceed one (up to rounding).
pub fn is_normalized(m: &MarginMatrix) -> bool {
    m.0.rows_iter().all(|r| norm(r) <= 1.0 + 1e-12)
}
