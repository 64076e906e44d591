//! Localized latent codes: one row per coarsest-level vertex.

use std::fmt::Write as _;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    /// `[latent vertices, latent channels]`.
    pub values: Tensor,
    pub fingerprint: u64,
}

impl LatentCode {
    pub fn new(values: Tensor, fingerprint: u64) -> Self {
        LatentCode { values, fingerprint }
    }

    pub fn vertices(&self) -> usize {
        self.values.rows()
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn check_fingerprint(&self, expected: u64) -> Result<()> {
        if self.fingerprint != expected {
            return Err(Error::FingerprintMismatch {
                expected,
                found: self.fingerprint,
            });
        }
        Ok(())
    }

    fn check_compatible(&self, other: &LatentCode) -> Result<()> {
        other.check_fingerprint(self.fingerprint)?;
        if !self.values.same_shape(&other.values) {
            return Err(Error::InvalidInput(format!(
                "latent shapes differ: {:?} vs {:?}",
                self.values.shape(),
                other.values.shape()
            )));
        }
        Ok(())
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if let Some(&v) = subset.iter().find(|&&v| v >= self.vertices()) {
            return Err(Error::InvalidInput(format!(
                "latent vertex {v} is outside 0..{}",
                self.vertices()
            )));
        }
        Ok(())
    }

    /// Text form: a `# fingerprint <hex>` header, then one whitespace-separated
    /// row per latent vertex.
    pub fn to_text(&self) -> String {
        let mut out = format!("# fingerprint {:016x}\n", self.fingerprint);
        for r in 0..self.vertices() {
            let row: Vec<String> = self.values.row(r).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty latent file".into(),
        })?;
        let fingerprint = header
            .trim()
            .strip_prefix("# fingerprint ")
            .and_then(|h| u64::from_str_radix(h.trim(), 16).ok())
            .ok_or(Error::Parse {
                line: 1,
                message: "expected `# fingerprint <hex>`".into(),
            })?;
        let mut data = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: format!("bad value `{t}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if *cols.get_or_insert(row.len()) != row.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "ragged latent rows".into(),
                });
            }
            data.extend(row);
            rows += 1;
        }
        Ok(LatentCode::new(Tensor::matrix(rows, cols.unwrap_or(0), data)?, fingerprint))
    }
}

/// Rows in `subset` become `(1 - t)·source + t·target`; all other rows keep
/// the source values.
pub fn interpolate_latent(source: &LatentCode, target: &LatentCode, subset: &[usize], t: f64) -> Result<LatentCode> {
    source.check_compatible(target)?;
    source.check_subset(subset)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("interpolation parameter {t} is outside [0, 1]")));
    }
    let mut out = source.clone();
    let c = source.channels();
    for &r in subset {
        for k in 0..c {
            let (a, b) = (source.values.get(r, k), target.values.get(r, k));
            out.values.set(r, k, (1.0 - t) * a + t * b);
        }
    }
    Ok(out)
}

/// Rows in `subset` come from `donor`, the rest from `base`.
pub fn mix_latent(base: &LatentCode, donor: &LatentCode, subset: &[usize]) -> Result<LatentCode> {
    base.check_compatible(donor)?;
    base.check_subset(subset)?;
    let mut out = base.clone();
    for &r in subset {
        for k in 0..base.channels() {
            out.values.set(r, k, donor.values.get(r, k));
        }
    }
    Ok(out)
}
