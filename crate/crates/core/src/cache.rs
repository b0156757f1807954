//! On-disk cache of solved profile curves.
//!
//! Each curve is a CSV file (the export format) whose first line is a
//! header carrying the schema version and the data needed to rebuild the
//! curve exactly: for `H_m` the launch coordinates found by shooting. A
//! cached curve is rebuilt by one integration from the stored launch and
//! checked against the stored samples.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::profile::{hsiang_from_launch, ProfileCurve};

pub const SCHEMA: &str = "eqvidx-curve/1";
pub const CSV_HEADER: &str = "t,u1,u2,tau1,tau2,kappa";

/// Writes `curve` as CSV with the standard header, one sample per line.
pub fn write_curve_csv<W: Write>(curve: &ProfileCurve, out: &mut W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in curve.samples() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t, s.p.u1, s.p.u2, s.tau[0], s.tau[1], s.kappa
        )?;
    }
    Ok(())
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| Error::Cache(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// A cached `H_m` solve.
#[derive(Debug, Clone)]
pub struct CachedHsiang {
    pub curve: ProfileCurve,
    /// All launches found, the chosen one first.
    pub launches: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CurveCache {
    dir: PathBuf,
}

impl CurveCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CurveCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hsiang_path(&self, m: u32, tol: f64) -> PathBuf {
        self.dir.join(format!("hsiang-m{m}-tol{tol:e}.csv"))
    }

    pub fn store_hsiang(&self, m: u32, tol: f64, launches: &[f64], curve: &ProfileCurve) -> Result<()> {
        let mut buf = Vec::new();
        let list: Vec<String> = launches.iter().map(|s| format!("{s:?}")).collect();
        writeln!(
            buf,
            "# {SCHEMA} family=hsiang parameter={m} tol={tol:e} launches={}",
            list.join(";")
        )?;
        write_curve_csv(curve, &mut buf)?;
        write_atomic(&self.hsiang_path(m, tol), &buf)
    }

    /// The cached curve, or `None` on a miss. Unreadable, stale or
    /// inconsistent entries count as misses.
    pub fn load_hsiang(&self, m: u32, tol: f64) -> Option<CachedHsiang> {
        let path = self.hsiang_path(m, tol);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(_) => return None,
        };
        match parse_hsiang(&text, m, tol) {
            Ok(c) => {
                debug!("cache hit {}", path.display());
                Some(c)
            }
            Err(e) => {
                warn!("ignoring cache entry {}: {e}", path.display());
                None
            }
        }
    }
}

fn parse_hsiang(text: &str, m: u32, tol: f64) -> Result<CachedHsiang> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let fields = header
        .strip_prefix("# ")
        .ok_or_else(|| Error::Cache("missing header line".into()))?;
    let mut parts = fields.split_whitespace();
    if parts.next() != Some(SCHEMA) {
        return Err(Error::Cache(format!("schema is not {SCHEMA}")));
    }
    let mut launches = None;
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Cache(format!("bad header field {kv:?}")))?;
        match k {
            "family" if v != "hsiang" => return Err(Error::Cache(format!("family {v}"))),
            "parameter" if v != m.to_string() => {
                return Err(Error::Cache(format!("parameter {v}, expected {m}")))
            }
            "tol" if v.parse::<f64>().ok() != Some(tol) => {
                return Err(Error::Cache(format!("tolerance {v}, expected {tol:e}")))
            }
            "launches" => {
                let list = v
                    .split(';')
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Cache(format!("launches: {e}")))?;
                launches = Some(list);
            }
            _ => {}
        }
    }
    let launches = launches
        .filter(|l| !l.is_empty())
        .ok_or_else(|| Error::Cache("no launch recorded".into()))?;
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Cache("missing CSV header".into()));
    }
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    let curve = hsiang_from_launch(m, launches[0], tol)?;
    let samples = curve.samples();
    if samples.len() != rows.len() {
        return Err(Error::Cache(format!(
            "{} stored samples, rebuilt curve has {}",
            rows.len(),
            samples.len()
        )));
    }
    for (row, s) in rows.iter().zip(&samples) {
        let vals = row
            .split(',')
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Cache(format!("row {row:?}: {e}")))?;
        let want = [s.t, s.p.u1, s.p.u2];
        if vals.len() != 6 || vals.iter().zip(want).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::Cache(format!("row {row:?} does not match the rebuilt curve")));
        }
    }
    Ok(CachedHsiang { curve, launches })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CurveCache::new(dir.path());
        let tol = 1e-11;
        assert!(cache.load_hsiang(1, tol).is_none());
        let curve = hsiang_from_launch(1, 0.0, tol).unwrap();
        cache.store_hsiang(1, tol, &[0.0], &curve).unwrap();
        let hit = cache.load_hsiang(1, tol).unwrap();
        assert_eq!(hit.launches, vec![0.0]);
        assert_eq!(hit.curve.length, curve.length);
        assert!(cache.load_hsiang(1, 1e-12).is_none());

        let path = cache.hsiang_path(1, tol);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("eqvidx-curve/1", "eqvidx-curve/0", 1)).unwrap();
        assert!(cache.load_hsiang(1, tol).is_none());
        let truncated: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        fs::write(&path, truncated).unwrap();
        assert!(cache.load_hsiang(1, tol).is_none());
    }

    #[test]
    fn csv_has_the_documented_header() {
        let curve = hsiang_from_launch(1, 0.0, 1e-11).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,u1,u2,tau1,tau2,kappa"));
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 6);
        assert_eq!(first[0], 0.0);
    }
}
