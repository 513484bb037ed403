//! Driving-log container and its CSV dialect.
//!
//! Header is required: `t,tau,s,v_enc,omega_imu[,x_t,y_t,eta_t]`. Extra
//! columns are ignored so trajectory exports load as logs too.

use std::io::{Read, Write};

use thiserror::Error;

pub const REQUIRED_COLUMNS: [&str; 5] = ["t", "tau", "s", "v_enc", "omega_imu"];
pub const MOCAP_COLUMNS: [&str; 3] = ["x_t", "y_t", "eta_t"];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("mocap columns must be all present or all absent (found {found:?})")]
    PartialMocap { found: Vec<&'static str> },
    #[error("row {row}: cannot parse `{column}` value {raw:?}")]
    Parse { row: usize, column: &'static str, raw: String },
    #[error("row {row}: non-finite `{column}`")]
    NonFinite { row: usize, column: &'static str },
    #[error("row {row}: time {t} does not increase (previous {prev})")]
    NonMonotoneTime { row: usize, t: f64, prev: f64 },
    #[error("row {row}: `{column}` = {value} outside [-1, 1]")]
    OutOfRange { row: usize, column: &'static str, value: f64 },
    #[error("column `{column}` has {len} samples, expected {expected}")]
    LengthMismatch { column: &'static str, len: usize, expected: usize },
    #[error("log contains no samples")]
    Empty,
}

/// Motion-capture pose of the centre of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Mocap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Time-stamped commands and sensor readings as recorded on the robot.
///
/// Rows are numbered from 1 in error messages, not counting the header.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLog {
    pub t: Vec<f64>,
    pub tau: Vec<f64>,
    pub s: Vec<f64>,
    pub v_enc: Vec<f64>,
    pub omega_imu: Vec<f64>,
    pub mocap: Option<Mocap>,
}

impl RawLog {
    pub fn new(
        t: Vec<f64>,
        tau: Vec<f64>,
        s: Vec<f64>,
        v_enc: Vec<f64>,
        omega_imu: Vec<f64>,
        mocap: Option<Mocap>,
    ) -> Result<Self, LogError> {
        let log = Self { t, tau, s, v_enc, omega_imu, mocap };
        log.validate()?;
        Ok(log)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Mean sample period.
    pub fn mean_dt(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        (self.t[n - 1] - self.t[0]) / (n - 1) as f64
    }

    fn columns(&self) -> Vec<(&'static str, &[f64])> {
        let mut cols: Vec<(&'static str, &[f64])> = vec![
            ("t", &self.t),
            ("tau", &self.tau),
            ("s", &self.s),
            ("v_enc", &self.v_enc),
            ("omega_imu", &self.omega_imu),
        ];
        if let Some(m) = &self.mocap {
            cols.push(("x_t", &m.x));
            cols.push(("y_t", &m.y));
            cols.push(("eta_t", &m.eta));
        }
        cols
    }

    pub fn validate(&self) -> Result<(), LogError> {
        let n = self.len();
        if n == 0 {
            return Err(LogError::Empty);
        }
        for (column, values) in self.columns() {
            if values.len() != n {
                return Err(LogError::LengthMismatch { column, len: values.len(), expected: n });
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(LogError::NonFinite { row: i + 1, column });
            }
        }
        for i in 1..n {
            if !(self.t[i] > self.t[i - 1]) {
                return Err(LogError::NonMonotoneTime { row: i + 1, t: self.t[i], prev: self.t[i - 1] });
            }
        }
        for (column, values) in [("tau", &self.tau), ("s", &self.s)] {
            if let Some(i) = values.iter().position(|v| !(-1.0..=1.0).contains(v)) {
                return Err(LogError::OutOfRange { row: i + 1, column, value: values[i] });
            }
        }
        Ok(())
    }

    /// Writes the log in the CSV dialect read by [`load_log`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), LogError> {
        let cols = self.columns();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(cols.iter().map(|(name, _)| *name))?;
        for i in 0..self.len() {
            w.write_record(cols.iter().map(|(_, v)| format_value(v[i])))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Parses and validates a CSV log.
pub fn load_log<R: Read>(source: R) -> Result<RawLog, LogError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let mut required = [0usize; 5];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = find(name).ok_or(LogError::MissingColumn(name))?;
    }
    let mocap_idx: Vec<(usize, &'static str)> =
        MOCAP_COLUMNS.iter().filter_map(|&name| find(name).map(|i| (i, name))).collect();
    let has_mocap = match mocap_idx.len() {
        0 => false,
        3 => true,
        _ => return Err(LogError::PartialMocap { found: mocap_idx.iter().map(|(_, n)| *n).collect() }),
    };

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 5 + if has_mocap { 3 } else { 0 }];
    let names: Vec<(usize, &'static str)> =
        required.iter().copied().zip(REQUIRED_COLUMNS).chain(mocap_idx.iter().copied()).collect();

    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record?;
        for (col, &(idx, name)) in names.iter().enumerate() {
            let raw = record.get(idx).unwrap_or("");
            let value: f64 =
                raw.parse().map_err(|_| LogError::Parse { row, column: name, raw: raw.to_string() })?;
            if !value.is_finite() {
                return Err(LogError::NonFinite { row, column: name });
            }
            cols[col].push(value);
        }
    }

    let mut it = cols.into_iter();
    let mut next = || it.next().unwrap_or_default();
    let (t, tau, s, v_enc, omega_imu) = (next(), next(), next(), next(), next());
    let mocap = has_mocap.then(|| Mocap { x: next(), y: next(), eta: next() });
    RawLog::new(t, tau, s, v_enc, omega_imu, mocap)
}
