//! Time-series ingestion from CSV.
//!
//! Format: optional `# unit=<unit>` comment, then a `time,value` header and
//! RFC 3339 timestamps. Short gaps are filled by linear interpolation.

use std::path::Path;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::spectral::{Series, Unit};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: unit mismatch, expected {expected} but file declares {found}")]
    UnitMismatch {
        path: String,
        expected: Unit,
        found: String,
    },
    #[error("{path}:{line}: timestamps must strictly increase")]
    NonMonotone { path: String, line: usize },
    #[error("{path}:{line}: gap of {missing} samples exceeds the limit of {max_gap}")]
    GapTooLarge {
        path: String,
        line: usize,
        missing: usize,
        max_gap: usize,
    },
    #[error("{path}:{line}: timestamp off the {period_s} s sampling grid")]
    OffGrid {
        path: String,
        line: usize,
        period_s: i64,
    },
    #[error("{path}: need at least two samples")]
    TooShort { path: String },
}

/// Read a series from a file.
pub fn ingest_series(path: &Path, unit: Unit, max_gap: usize) -> Result<Series, IngestError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: name.clone(),
        source,
    })?;
    parse_series(&text, &name, unit, max_gap)
}

/// Parse series text; `name` labels errors.
pub fn parse_series(
    text: &str,
    name: &str,
    unit: Unit,
    max_gap: usize,
) -> Result<Series, IngestError> {
    let malformed = |line: usize, message: String| IngestError::Malformed {
        path: name.to_string(),
        line,
        message,
    };

    let mut samples: Vec<(usize, DateTime<Utc>, f64)> = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(declared) = comment.trim().strip_prefix("unit=") {
                let declared = declared.trim();
                if declared.parse::<Unit>().ok() != Some(unit) {
                    return Err(IngestError::UnitMismatch {
                        path: name.to_string(),
                        expected: unit,
                        found: declared.to_string(),
                    });
                }
            }
            continue;
        }
        let mut fields = trimmed.split(',').map(str::trim);
        let (Some(ts), Some(val), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed(line, "expected two columns: time,value".into()));
        };
        if !header_seen {
            header_seen = true;
            if ts.eq_ignore_ascii_case("time") {
                continue;
            }
        }
        let t = DateTime::parse_from_rfc3339(ts)
            .map_err(|e| malformed(line, format!("bad timestamp {ts:?}: {e}")))?
            .with_timezone(&Utc);
        let v: f64 = val
            .parse()
            .map_err(|_| malformed(line, format!("bad value {val:?}")))?;
        if !v.is_finite() {
            return Err(malformed(line, format!("non-finite value {val:?}")));
        }
        if let Some(&(_, prev, _)) = samples.last() {
            if t <= prev {
                return Err(IngestError::NonMonotone {
                    path: name.to_string(),
                    line,
                });
            }
        }
        samples.push((line, t, v));
    }
    if samples.len() < 2 {
        return Err(IngestError::TooShort {
            path: name.to_string(),
        });
    }

    let period_s = samples
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).num_seconds())
        .min()
        .expect("two samples");
    let mut values = vec![samples[0].2];
    for w in samples.windows(2) {
        let (_, t0, v0) = w[0];
        let (line, t1, v1) = w[1];
        let dt = (t1 - t0).num_seconds();
        if period_s <= 0 || dt % period_s != 0 {
            return Err(IngestError::OffGrid {
                path: name.to_string(),
                line,
                period_s,
            });
        }
        let steps = (dt / period_s) as usize;
        let missing = steps - 1;
        if missing > max_gap {
            return Err(IngestError::GapTooLarge {
                path: name.to_string(),
                line,
                missing,
                max_gap,
            });
        }
        for j in 1..=steps {
            let frac = j as f64 / steps as f64;
            values.push(v0 + frac * (v1 - v0));
        }
    }
    Ok(Series::new(samples[0].1, period_s as f64, values, unit).expect("validated series"))
}
