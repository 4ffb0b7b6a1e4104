//! Right-censored observations and their CSV representation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation: covariates `z`, observed time `u = min(T, C)` and the
/// event indicator `delta = 1{T <= C}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    pub z: Vec<f64>,
    pub u: f64,
    pub delta: bool,
}

impl CensoredSample {
    pub fn new(z: Vec<f64>, u: f64, delta: bool) -> Result<Self> {
        if !u.is_finite() || u < 0.0 {
            return Err(Error::Domain(format!("observed time must be finite and >= 0, got {u}")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariates must be finite".into()));
        }
        Ok(Self { z, u, delta })
    }
}

/// An ordered collection of censored samples sharing one covariate dimension.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<CensoredSample>,
    d: usize,
    tau: f64,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with `tau = max u` and default feature names `z1..zd`.
    pub fn new(samples: Vec<CensoredSample>, d: usize) -> Result<Self> {
        let names = (1..=d).map(|j| format!("z{j}")).collect();
        Self::with_names(samples, names)
    }

    pub fn with_names(samples: Vec<CensoredSample>, feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        for (i, s) in samples.iter().enumerate() {
            if s.z.len() != d {
                return Err(Error::Schema(format!(
                    "sample {i} has {} covariates, expected {d}",
                    s.z.len()
                )));
            }
        }
        let tau = samples.iter().map(|s| s.u).fold(0.0, f64::max);
        Ok(Self { samples, d, tau, feature_names })
    }

    /// Convenience constructor from parallel columns.
    pub fn from_columns(z: Vec<Vec<f64>>, u: Vec<f64>, delta: Vec<bool>) -> Result<Self> {
        if z.len() != u.len() || u.len() != delta.len() {
            return Err(Error::Schema("column lengths differ".into()));
        }
        let d = z.first().map_or(0, Vec::len);
        let samples = z
            .into_iter()
            .zip(u)
            .zip(delta)
            .map(|((z, u), delta)| CensoredSample::new(z, u, delta))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, d)
    }

    /// Overrides the observation horizon. Must not be below the largest time.
    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        let max_u = self.samples.iter().map(|s| s.u).fold(0.0, f64::max);
        if !(tau >= max_u) || !tau.is_finite() {
            return Err(Error::Domain(format!("tau {tau} is below the largest observed time {max_u}")));
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn samples(&self) -> &[CensoredSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn covariates(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.z.as_slice()).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.u).collect()
    }

    pub fn n_events(&self) -> usize {
        self.samples.iter().filter(|s| s.delta).count()
    }

    pub fn n_censored(&self) -> usize {
        self.len() - self.n_events()
    }

    /// Rows at the given indices, in the given order. Keeps `tau`.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            d: self.d,
            tau: self.tau,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps only the listed covariate columns, in the listed order.
    pub fn select_features(&self, features: &[usize]) -> Result<Self> {
        if let Some(&bad) = features.iter().find(|&&j| j >= self.d) {
            return Err(Error::Domain(format!("feature index {bad} out of range for d={}", self.d)));
        }
        let samples = self
            .samples
            .iter()
            .map(|s| CensoredSample {
                z: features.iter().map(|&j| s.z[j]).collect(),
                u: s.u,
                delta: s.delta,
            })
            .collect();
        Ok(Self {
            samples,
            d: features.len(),
            tau: self.tau,
            feature_names: features.iter().map(|&j| self.feature_names[j].clone()).collect(),
        })
    }

    /// Uncensored rows only.
    pub fn events_only(&self) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.samples[i].delta).collect();
        self.subset(&idx)
    }
}

/// Maps the failure time to the response the loss is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResponseTransform {
    Identity,
    /// `+1` if `t > rho`, `-1` otherwise.
    Cutoff { rho: f64 },
}

impl ResponseTransform {
    pub fn cutoff(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("cutoff must be positive and finite, got {rho}")));
        }
        Ok(Self::Cutoff { rho })
    }

    pub fn apply(&self, t: f64) -> f64 {
        transform_response(t, *self)
    }
}

impl std::str::FromStr for ResponseTransform {
    type Err = Error;

    /// `identity` or `cutoff:<rho>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "identity" => Ok(Self::Identity),
            Some(("cutoff", rho)) => {
                let rho = rho
                    .parse::<f64>()
                    .map_err(|e| Error::Domain(format!("bad cutoff '{rho}': {e}")))?;
                Self::cutoff(rho)
            }
            _ => Err(Error::Domain(format!("unknown transform '{s}'"))),
        }
    }
}

pub fn transform_response(t: f64, transform: ResponseTransform) -> f64 {
    match transform {
        ResponseTransform::Identity => t,
        ResponseTransform::Cutoff { rho } => {
            if t > rho {
                1.0
            } else {
                -1.0
            }
        }
    }
}

fn parse_cell(raw: &str, row: usize, col: &str) -> Result<f64> {
    let v = raw.trim();
    if v.is_empty() {
        return Err(Error::Parse { row, msg: format!("missing value in column '{col}'") });
    }
    let x = v
        .parse::<f64>()
        .map_err(|_| Error::Parse { row, msg: format!("non-numeric value '{v}' in column '{col}'") })?;
    if !x.is_finite() {
        return Err(Error::Parse { row, msg: format!("non-finite value '{v}' in column '{col}'") });
    }
    Ok(x)
}

/// Reads a header-first CSV. Every column other than `time_col` and
/// `status_col` is a covariate, in file order. Rows are numbered from 1
/// (the first data row) in error messages.
pub fn load_csv(path: impl AsRef<Path>, time_col: &str, status_col: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let time_idx = find(time_col)?;
    let status_idx = find(status_col)?;
    let cov_idx: Vec<usize> = (0..headers.len()).filter(|&j| j != time_idx && j != status_idx).collect();
    let names: Vec<String> = cov_idx.iter().map(|&j| headers[j].trim().to_string()).collect();

    let mut samples = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let u = parse_cell(&rec[time_idx], row, time_col)?;
        if u < 0.0 {
            return Err(Error::Parse { row, msg: format!("negative time {u}") });
        }
        let status = parse_cell(&rec[status_idx], row, status_col)?;
        let delta = if status == 1.0 {
            true
        } else if status == 0.0 {
            false
        } else {
            return Err(Error::Parse { row, msg: format!("status must be 0 or 1, got {status}") });
        };
        let z = cov_idx
            .iter()
            .map(|&j| parse_cell(&rec[j], row, &headers[j]))
            .collect::<Result<Vec<_>>>()?;
        samples.push(CensoredSample { z, u, delta });
    }
    Dataset::with_names(samples, names)
}

/// Writes covariates, then `time_col`, then `status_col` (1/0). Values are
/// printed in shortest round-trip form so reloading is exact.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>, time_col: &str, status_col: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(time_col);
    header.push(status_col);
    w.write_record(&header)?;
    for s in data.samples() {
        let mut rec: Vec<String> = s.z.iter().map(|v| v.to_string()).collect();
        rec.push(s.u.to_string());
        rec.push(if s.delta { "1".into() } else { "0".into() });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = write_tmp("z1,time,status\n0.5,1.0,1\n-0.2,2.0,0\n1.0,3.0,1\n");
        let d = load_csv(f.path(), "time", "status").unwrap();
        assert_eq!(d.dim(), 1);
        assert_eq!(d.len(), 3);
        assert_eq!(d.tau(), 3.0);
        assert_eq!(d.samples()[1], CensoredSample { z: vec![-0.2], u: 2.0, delta: false });
        assert_eq!(d.feature_names(), &["z1".to_string()]);
    }

    #[test]
    fn bad_status_names_row() {
        let f = write_tmp("z1,time,status\n0.5,1.0,1\n-0.2,2.0,2\n");
        match load_csv(f.path(), "time", "status") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let f = write_tmp("a,b,time,status\n");
        let d = load_csv(f.path(), "time", "status").unwrap();
        assert!(d.is_empty());
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let f = write_tmp("z1,time\n1,2\n");
        assert!(matches!(load_csv(f.path(), "time", "status"), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_negative_time_and_missing_cells() {
        let f = write_tmp("z1,time,status\n1,-2,1\n");
        assert!(matches!(load_csv(f.path(), "time", "status"), Err(Error::Parse { row: 1, .. })));
        let f = write_tmp("z1,time,status\n1,2,1\n,2,1\n");
        assert!(matches!(load_csv(f.path(), "time", "status"), Err(Error::Parse { row: 2, .. })));
        let f = write_tmp("z1,time,status\nabc,2,1\n");
        assert!(matches!(load_csv(f.path(), "time", "status"), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn status_column_may_precede_time() {
        let f = write_tmp("status,x,time,y\n1,0.1,4,0.2\n");
        let d = load_csv(f.path(), "time", "status").unwrap();
        assert_eq!(d.samples()[0].z, vec![0.1, 0.2]);
        assert_eq!(d.feature_names(), &["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn transform_examples() {
        let c = ResponseTransform::cutoff(2.0).unwrap();
        assert_eq!(transform_response(3.0, c), 1.0);
        assert_eq!(transform_response(2.0, c), -1.0);
        assert_eq!(transform_response(1.5, ResponseTransform::Identity), 1.5);
        assert!(ResponseTransform::cutoff(0.0).is_err());
        assert_eq!("cutoff:2.5".parse::<ResponseTransform>().unwrap(), ResponseTransform::Cutoff { rho: 2.5 });
        assert_eq!("identity".parse::<ResponseTransform>().unwrap(), ResponseTransform::Identity);
    }

    #[test]
    fn tau_override_checked() {
        let d = Dataset::from_columns(vec![vec![0.0], vec![1.0]], vec![1.0, 2.0], vec![true, false]).unwrap();
        assert!(d.clone().with_tau(1.5).is_err());
        assert_eq!(d.with_tau(5.0).unwrap().tau(), 5.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(
            (prop::collection::vec(-1e6f64..1e6, 2), 0.0f64..1e4, any::<bool>()), 0..20)) {
            let samples: Vec<_> = rows.into_iter()
                .map(|(z, u, d)| CensoredSample::new(z, u, d).unwrap()).collect();
            let data = Dataset::new(samples, 2).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            write_csv(&data, f.path(), "time", "status").unwrap();
            let back = load_csv(f.path(), "time", "status").unwrap();
            prop_assert_eq!(back, data);
        }

        #[test]
        fn cutoff_takes_two_values(t in 0.0f64..100.0, rho in 0.01f64..50.0) {
            let y = transform_response(t, ResponseTransform::Cutoff { rho });
            prop_assert!(y == 1.0 || y == -1.0);
            prop_assert_eq!(transform_response(t, ResponseTransform::Identity), t);
        }
    }
}
