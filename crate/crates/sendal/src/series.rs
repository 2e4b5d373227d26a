//! Time-series refinement: smoothing, trend extraction, resampling to a
//! uniform grid, pair alignment, and window extraction.
//!
//! The full pipeline runs moving-average smoothing, then trend smoothing,
//! then linear-interpolation resampling, independently on the low-cost and
//! reference channels, and finally aligns the two onto a shared grid.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Irregularly sampled raw readings, timestamps in epoch milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries<T> {
    pub timestamps_ms: Vec<i64>,
    pub values: Vec<T>,
}

impl<T: Scalar> RawSeries<T> {
    pub fn new(timestamps_ms: Vec<i64>, values: Vec<T>) -> Result<Self> {
        if timestamps_ms.len() != values.len() {
            return Err(Error::invalid("raw series: timestamp/value length mismatch"));
        }
        if timestamps_ms.is_empty() {
            return Err(Error::invalid("raw series: empty"));
        }
        if timestamps_ms.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("raw series: timestamps not sorted"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("raw series: non-finite value"));
        }
        Ok(RawSeries {
            timestamps_ms,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniformly sampled series after refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedSeries<T> {
    pub start_ms: i64,
    pub interval_s: f64,
    pub values: Vec<T>,
}

impl<T: Scalar> RefinedSeries<T> {
    pub fn new(start_ms: i64, interval_s: f64, values: Vec<T>) -> Result<Self> {
        if interval_s <= 0.0 {
            return Err(Error::invalid("refined series: interval must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("refined series: non-finite value"));
        }
        Ok(RefinedSeries {
            start_ms,
            interval_s,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interval_ms(&self) -> i64 {
        (self.interval_s * 1000.0).round() as i64
    }

    pub fn timestamp_at(&self, index: usize) -> i64 {
        self.start_ms + index as i64 * self.interval_ms()
    }

    pub fn end_ms(&self) -> i64 {
        self.timestamp_at(self.len().saturating_sub(1))
    }
}

/// Aligned low-cost (x) and reference (y) channels on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorPairDataset<T> {
    pub x: RefinedSeries<T>,
    pub y: RefinedSeries<T>,
}

impl<T: Scalar> SensorPairDataset<T> {
    pub fn new(x: RefinedSeries<T>, y: RefinedSeries<T>) -> Result<Self> {
        if x.start_ms != y.start_ms || x.interval_s != y.interval_s || x.len() != y.len() {
            return Err(Error::invalid("sensor pair: channels not aligned"));
        }
        Ok(SensorPairDataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Prefix of the dataset covering `range_len` samples (used by the
    /// walk-forward splitter).
    pub fn prefix(&self, range_len: usize) -> SensorPairDataset<T> {
        SensorPairDataset {
            x: RefinedSeries {
                start_ms: self.x.start_ms,
                interval_s: self.x.interval_s,
                values: self.x.values[..range_len].to_vec(),
            },
            y: RefinedSeries {
                start_ms: self.y.start_ms,
                interval_s: self.y.interval_s,
                values: self.y.values[..range_len].to_vec(),
            },
        }
    }
}

/// N consecutive low-cost readings ending at `target_index`.
#[derive(Debug, Clone, Copy)]
pub struct WindowView<'a, T> {
    pub values: &'a [T],
    pub target_index: usize,
}

/// Trailing simple moving average over raw sample values. The window is
/// truncated at the head so the output keeps the input length.
pub(crate) fn sma_values<T: Scalar>(values: &[T], k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = T::zero();
    for i in 0..values.len() {
        sum += values[i];
        if i >= k {
            sum -= values[i - k];
        }
        let width = (i + 1).min(k);
        out.push(sum / T::from_f64(width as f64));
    }
    out
}

pub fn sma_filter<T: Scalar>(series: &RefinedSeries<T>, k: usize) -> Result<RefinedSeries<T>> {
    if k == 0 {
        return Err(Error::invalid("sma: window must be >= 1"));
    }
    if series.is_empty() {
        return Err(Error::invalid("sma: empty series"));
    }
    if k > series.len() {
        return Err(Error::invalid("sma: window exceeds series length"));
    }
    Ok(RefinedSeries {
        start_ms: series.start_ms,
        interval_s: series.interval_s,
        values: sma_values(&series.values, k),
    })
}

/// Trend component of the smoothing filter: solves
/// (I + lambda * D^T D) tau = y where D is the second-difference operator.
///
/// The system matrix is symmetric positive definite and pentadiagonal, so an
/// O(n) banded LDL^T factorization solves it exactly.
pub(crate) fn hp_trend_values<T: Scalar>(y: &[T], lambda: f64) -> Vec<T> {
    let n = y.len();
    assert!(n >= 3, "hp trend: need at least 3 samples");
    let lam = T::from_f64(lambda);
    let one = T::one();
    let two = one + one;
    let four = two + two;

    // Accumulate the bands of D^T D; row j of D hits columns (j, j+1, j+2)
    // with coefficients (1, -2, 1).
    let mut a0 = vec![T::zero(); n];
    let mut a1 = vec![T::zero(); n - 1];
    let mut a2 = vec![T::zero(); n - 2];
    for j in 0..n - 2 {
        a0[j] += one;
        a0[j + 1] += four;
        a0[j + 2] += one;
        a1[j] -= two;
        a1[j + 1] -= two;
        a2[j] += one;
    }
    for v in a0.iter_mut() {
        *v = one + lam * *v;
    }
    for v in a1.iter_mut() {
        *v = lam * *v;
    }
    for v in a2.iter_mut() {
        *v = lam * *v;
    }

    // LDL^T with half-bandwidth 2: L unit lower triangular with bands
    // l1 (offset -1) and l2 (offset -2), D diagonal d.
    let mut d = vec![T::zero(); n];
    let mut l1 = vec![T::zero(); n];
    let mut l2 = vec![T::zero(); n];
    d[0] = a0[0];
    if n > 1 {
        l1[1] = a1[0] / d[0];
        d[1] = a0[1] - l1[1] * l1[1] * d[0];
    }
    for i in 2..n {
        l2[i] = a2[i - 2] / d[i - 2];
        l1[i] = (a1[i - 1] - l2[i] * d[i - 2] * l1[i - 1]) / d[i - 1];
        d[i] = a0[i] - l2[i] * l2[i] * d[i - 2] - l1[i] * l1[i] * d[i - 1];
    }

    // Forward solve L z = y, scale by D, back solve L^T tau = w.
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut v = y[i];
        if i >= 1 {
            v = v - l1[i] * z[i - 1];
        }
        if i >= 2 {
            v = v - l2[i] * z[i - 2];
        }
        z[i] = v;
    }
    let mut tau = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut v = z[i] / d[i];
        if i + 1 < n {
            v = v - l1[i + 1] * tau[i + 1];
        }
        if i + 2 < n {
            v = v - l2[i + 2] * tau[i + 2];
        }
        tau[i] = v;
    }
    tau
}

pub fn hp_filter<T: Scalar>(series: &RefinedSeries<T>, lambda_hp: f64) -> Result<RefinedSeries<T>> {
    if series.len() < 3 {
        return Err(Error::invalid("hp filter: need at least 3 samples"));
    }
    if !(lambda_hp > 0.0) {
        return Err(Error::invalid("hp filter: lambda must be positive"));
    }
    Ok(RefinedSeries {
        start_ms: series.start_ms,
        interval_s: series.interval_s,
        values: hp_trend_values(&series.values, lambda_hp),
    })
}

fn interval_to_ms(interval_s: f64) -> Result<i64> {
    if !(interval_s > 0.0) {
        return Err(Error::invalid("resample: interval must be positive"));
    }
    let ms = (interval_s * 1000.0).round();
    if ms < 1.0 || (interval_s * 1000.0 - ms).abs() > 1e-6 {
        return Err(Error::invalid(
            "resample: interval must be a whole number of milliseconds",
        ));
    }
    Ok(ms as i64)
}

/// Value of the piecewise-linear interpolant of `raw` at time `t_ms`.
/// Exact raw timestamps reproduce raw values bit-for-bit.
fn interp_at<T: Scalar>(raw: &RawSeries<T>, t_ms: i64, cursor: &mut usize) -> T {
    let ts = &raw.timestamps_ms;
    // Advance to the last point with timestamp <= t.
    while *cursor + 1 < ts.len() && ts[*cursor + 1] <= t_ms {
        *cursor += 1;
    }
    let i = *cursor;
    if ts[i] == t_ms || i + 1 == ts.len() {
        return raw.values[i];
    }
    let t0 = ts[i] as f64;
    let t1 = ts[i + 1] as f64;
    let frac = T::from_f64((t_ms as f64 - t0) / (t1 - t0));
    raw.values[i] + (raw.values[i + 1] - raw.values[i]) * frac
}

/// Resample onto the grid start_ms + k * interval_ms, k in [0, count).
pub(crate) fn resample_onto<T: Scalar>(
    raw: &RawSeries<T>,
    start_ms: i64,
    interval_ms: i64,
    count: usize,
) -> Vec<T> {
    let mut cursor = 0usize;
    (0..count)
        .map(|k| interp_at(raw, start_ms + k as i64 * interval_ms, &mut cursor))
        .collect()
}

/// Linear-interpolation resampling onto a grid anchored at the first raw
/// timestamp, ending at the last grid point that does not pass the final
/// raw timestamp.
pub fn resample_linear<T: Scalar>(raw: &RawSeries<T>, interval_s: f64) -> Result<RefinedSeries<T>> {
    if raw.len() < 2 {
        return Err(Error::invalid("resample: need at least 2 raw points"));
    }
    let interval_ms = interval_to_ms(interval_s)?;
    let start = raw.timestamps_ms[0];
    let end = raw.timestamps_ms[raw.len() - 1];
    if end - start < interval_ms {
        return Err(Error::invalid("resample: raw span shorter than one interval"));
    }
    let count = ((end - start) / interval_ms + 1) as usize;
    Ok(RefinedSeries {
        start_ms: start,
        interval_s,
        values: resample_onto(raw, start, interval_ms, count),
    })
}

/// Truncate two refined series to their overlapping time range.
/// Requires equal intervals and grids in phase with each other.
pub fn align_pair<T: Scalar>(
    x: &RefinedSeries<T>,
    y: &RefinedSeries<T>,
) -> Result<SensorPairDataset<T>> {
    if x.interval_s != y.interval_s {
        return Err(Error::invalid("align: intervals differ"));
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("align: empty series"));
    }
    let step = x.interval_ms();
    if (x.start_ms - y.start_ms) % step != 0 {
        return Err(Error::invalid("align: grids out of phase"));
    }
    let start = x.start_ms.max(y.start_ms);
    let end = x.end_ms().min(y.end_ms());
    if end < start {
        return Err(Error::invalid("align: no temporal overlap"));
    }
    let count = ((end - start) / step + 1) as usize;
    let slice = |s: &RefinedSeries<T>| -> RefinedSeries<T> {
        let offset = ((start - s.start_ms) / step) as usize;
        RefinedSeries {
            start_ms: start,
            interval_s: s.interval_s,
            values: s.values[offset..offset + count].to_vec(),
        }
    };
    SensorPairDataset::new(slice(x), slice(y))
}

/// Emit one (window, target) pair per index i in [n-1, len): the window
/// holds x[i-n+1..=i] in time order and the target is y[i]. Windows shorter
/// than n near the head are not emitted.
pub fn make_windows<T: Scalar>(
    ds: &SensorPairDataset<T>,
    n: usize,
) -> Result<Vec<(WindowView<'_, T>, T)>> {
    if n == 0 {
        return Err(Error::invalid("windows: n must be >= 1"));
    }
    if n > ds.len() {
        return Err(Error::invalid("windows: n exceeds dataset length"));
    }
    Ok((n - 1..ds.len())
        .map(|i| {
            (
                WindowView {
                    values: &ds.x.values[i + 1 - n..=i],
                    target_index: i,
                },
                ds.y.values[i],
            )
        })
        .collect())
}

/// Refinement parameters for the full pipeline.
#[derive(Debug, Clone)]
pub struct RefineConfig {
    pub sma_k: usize,
    pub hp_lambda: f64,
    pub interval_s: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            sma_k: 4,
            hp_lambda: 1600.0,
            interval_s: 15.0,
        }
    }
}

/// Full refinement: smooth each raw channel (moving average, then trend
/// filter, both over the raw sample sequence), resample both onto a grid
/// anchored at the common overlap start, and align.
pub fn refine_pair<T: Scalar>(
    raw_x: &RawSeries<T>,
    raw_y: &RawSeries<T>,
    cfg: &RefineConfig,
) -> Result<SensorPairDataset<T>> {
    if cfg.sma_k == 0 {
        return Err(Error::invalid("refine: sma window must be >= 1"));
    }
    if !(cfg.hp_lambda > 0.0) {
        return Err(Error::invalid("refine: hp lambda must be positive"));
    }
    let interval_ms = interval_to_ms(cfg.interval_s)?;
    let smooth = |raw: &RawSeries<T>| -> Result<RawSeries<T>> {
        if raw.len() < 3 {
            return Err(Error::invalid("refine: need at least 3 raw points"));
        }
        let smoothed = sma_values(&raw.values, cfg.sma_k.min(raw.len()));
        let trend = hp_trend_values(&smoothed, cfg.hp_lambda);
        Ok(RawSeries {
            timestamps_ms: raw.timestamps_ms.clone(),
            values: trend,
        })
    };
    let sx = smooth(raw_x)?;
    let sy = smooth(raw_y)?;
    let start = sx.timestamps_ms[0].max(sy.timestamps_ms[0]);
    let end = sx.timestamps_ms[sx.len() - 1].min(sy.timestamps_ms[sy.len() - 1]);
    if end - start < interval_ms {
        return Err(Error::invalid("refine: channels do not overlap"));
    }
    let count = ((end - start) / interval_ms + 1) as usize;
    let rx = RefinedSeries {
        start_ms: start,
        interval_s: cfg.interval_s,
        values: resample_onto(&sx, start, interval_ms, count),
    };
    let ry = RefinedSeries {
        start_ms: start,
        interval_s: cfg.interval_s,
        values: resample_onto(&sy, start, interval_ms, count),
    };
    align_pair(&rx, &ry)
}

const RAW_HEADER: &str = "timestamp_ms,value";

/// Load a raw CSV (`timestamp_ms,value` rows, optional header). Rejects
/// unsorted timestamps and non-numeric values, naming the offending line.
pub fn load_raw_csv(path: impl AsRef<Path>) -> Result<RawSeries<f64>> {
    let path = path.as_ref();
    let pathname = path.display().to_string();
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.trim() == RAW_HEADER {
            continue;
        }
        let parse_err = |msg: &str| Error::Parse {
            path: pathname.clone(),
            line: line_no,
            msg: msg.to_string(),
        };
        let (ts_str, val_str) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected `timestamp_ms,value`"))?;
        let ts: i64 = ts_str
            .trim()
            .parse()
            .map_err(|_| parse_err("timestamp is not an integer"))?;
        let val: f64 = val_str
            .trim()
            .parse()
            .map_err(|_| parse_err("value is not a number"))?;
        if !val.is_finite() {
            return Err(parse_err("value is not finite"));
        }
        if let Some(last) = timestamps.last() {
            if ts < *last {
                return Err(parse_err("timestamps not sorted"));
            }
        }
        timestamps.push(ts);
        values.push(val);
    }
    RawSeries::new(timestamps, values)
}

pub fn save_raw_csv(series: &RawSeries<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(RAW_HEADER);
    out.push('\n');
    for (t, v) in series.timestamps_ms.iter().zip(series.values.iter()) {
        let _ = writeln!(out, "{t},{v}");
    }
    fs::write(path, out)?;
    Ok(())
}

const PAIR_HEADER: &str = "t_index,x,y";

/// Write the refined-pair CSV. The first line is the grid descriptor
/// `# start_ms=<int> interval_s=<float>`; any extra comment lines follow it.
pub fn save_refined_csv(
    ds: &SensorPairDataset<f64>,
    path: impl AsRef<Path>,
    extra_comments: &[String],
) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "# start_ms={} interval_s={}",
        ds.x.start_ms, ds.x.interval_s
    )?;
    for c in extra_comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{PAIR_HEADER}")?;
    for i in 0..ds.len() {
        writeln!(w, "{},{},{}", i, ds.x.values[i], ds.y.values[i])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_refined_csv(path: impl AsRef<Path>) -> Result<SensorPairDataset<f64>> {
    let path = path.as_ref();
    let pathname = path.display().to_string();
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut start_ms: Option<i64> = None;
    let mut interval_s: Option<f64> = None;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        let parse_err = |msg: String| Error::Parse {
            path: pathname.clone(),
            line: line_no,
            msg,
        };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if idx == 0 {
                for token in rest.split_whitespace() {
                    if let Some(v) = token.strip_prefix("start_ms=") {
                        start_ms = Some(
                            v.parse()
                                .map_err(|_| parse_err("bad start_ms".to_string()))?,
                        );
                    } else if let Some(v) = token.strip_prefix("interval_s=") {
                        interval_s = Some(
                            v.parse()
                                .map_err(|_| parse_err("bad interval_s".to_string()))?,
                        );
                    }
                }
                if start_ms.is_none() || interval_s.is_none() {
                    return Err(parse_err(
                        "first line must be `# start_ms=<int> interval_s=<float>`".to_string(),
                    ));
                }
            }
            continue;
        }
        if start_ms.is_none() {
            return Err(parse_err(
                "missing `# start_ms=... interval_s=...` descriptor".to_string(),
            ));
        }
        if !saw_header {
            if line.trim() != PAIR_HEADER {
                return Err(parse_err(format!("expected header `{PAIR_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split(',');
        let idx_str = parts.next().unwrap_or("");
        let x_str = parts.next().ok_or_else(|| parse_err("missing x".into()))?;
        let y_str = parts.next().ok_or_else(|| parse_err("missing y".into()))?;
        if parts.next().is_some() {
            return Err(parse_err("too many columns".into()));
        }
        let t_index: usize = idx_str
            .trim()
            .parse()
            .map_err(|_| parse_err("t_index is not an integer".into()))?;
        if t_index != xs.len() {
            return Err(parse_err(format!(
                "t_index {} out of order (expected {})",
                t_index,
                xs.len()
            )));
        }
        let x: f64 = x_str
            .trim()
            .parse()
            .map_err(|_| parse_err("x is not a number".into()))?;
        let y: f64 = y_str
            .trim()
            .parse()
            .map_err(|_| parse_err("y is not a number".into()))?;
        xs.push(x);
        ys.push(y);
    }
    let start_ms = start_ms.ok_or_else(|| Error::Parse {
        path: pathname.clone(),
        line: 1,
        msg: "empty file".to_string(),
    })?;
    let interval_s = interval_s.unwrap();
    SensorPairDataset::new(
        RefinedSeries::new(start_ms, interval_s, xs)?,
        RefinedSeries::new(start_ms, interval_s, ys)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refined(values: Vec<f64>) -> RefinedSeries<f64> {
        RefinedSeries::new(0, 15.0, values).unwrap()
    }

    /// Dense solve of (I + lambda D^T D) tau = y via Gaussian elimination
    /// with partial pivoting. Independent oracle for the banded solver.
    fn hp_dense_oracle(y: &[f64], lambda: f64) -> Vec<f64> {
        let n = y.len();
        let mut a = vec![vec![0.0f64; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        // A += lambda * D^T D, D rows j: (j, j+1, j+2) -> (1, -2, 1)
        for j in 0..n - 2 {
            let coeffs = [(j, 1.0), (j + 1, -2.0), (j + 2, 1.0)];
            for (ci, cv) in coeffs {
                for (cj, cw) in coeffs {
                    a[ci][cj] += lambda * cv * cw;
                }
            }
        }
        let mut b = y.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for r in col + 1..n {
                let factor = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
        let mut x = vec![0.0f64; n];
        for r in (0..n).rev() {
            let mut acc = b[r];
            for c in r + 1..n {
                acc -= a[r][c] * x[c];
            }
            x[r] = acc / a[r][r];
        }
        x
    }

    fn seeded_values(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-10.0..30.0)).collect()
    }

    #[test]
    fn sma_window_one_is_identity() {
        let s = refined(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(sma_filter(&s, 1).unwrap().values, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sma_trailing_means() {
        let s = refined(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            sma_filter(&s, 3).unwrap().values,
            vec![1.0, 1.5, 2.0, 3.0]
        );
    }

    #[test]
    fn sma_constant_series_is_fixed_point() {
        let s = refined(vec![7.5; 6]);
        for k in 1..=6 {
            assert_eq!(sma_filter(&s, k).unwrap().values, vec![7.5; 6]);
        }
    }

    #[test]
    fn sma_rejects_bad_arguments() {
        let s = refined(vec![1.0, 2.0]);
        assert!(sma_filter(&s, 0).is_err());
        assert!(sma_filter(&s, 3).is_err());
    }

    #[test]
    fn hp_constant_series_is_fixed_point() {
        let s = refined(vec![4.25; 10]);
        let out = hp_filter(&s, 1600.0).unwrap();
        for v in out.values {
            assert!((v - 4.25).abs() <= 1e-9);
        }
    }

    #[test]
    fn hp_affine_series_unchanged() {
        let values: Vec<f64> = (0..50).map(|t| 3.0 + 0.5 * t as f64).collect();
        let s = refined(values.clone());
        let out = hp_filter(&s, 1600.0).unwrap();
        for (v, expect) in out.values.iter().zip(values.iter()) {
            assert!(
                (v - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                "{v} vs {expect}"
            );
        }
    }

    #[test]
    fn hp_matches_dense_oracle() {
        for (n, seed) in [(3usize, 1u64), (4, 2), (8, 3), (57, 4), (200, 5)] {
            let values = seeded_values(n, seed);
            let banded = hp_trend_values(&values, 1600.0);
            let dense = hp_dense_oracle(&values, 1600.0);
            for (b, d) in banded.iter().zip(dense.iter()) {
                let rel = (b - d).abs() / d.abs().max(1.0);
                assert!(rel <= 1e-8, "n={n}: {b} vs {d}");
            }
        }
    }

    #[test]
    fn hp_preserves_mean() {
        let values = seeded_values(128, 9);
        let mean_in: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let out = hp_trend_values(&values, 1600.0);
        let mean_out: f64 = out.iter().sum::<f64>() / out.len() as f64;
        assert!((mean_out - mean_in).abs() <= 1e-9 * (1.0 + mean_in.abs()));
    }

    #[test]
    fn hp_rejects_short_series() {
        let s = refined(vec![1.0, 2.0]);
        assert!(hp_filter(&s, 1600.0).is_err());
    }

    #[test]
    fn resample_midpoint_of_line() {
        let raw = RawSeries::new(vec![0, 30_000], vec![0.0, 30.0]).unwrap();
        let out = resample_linear(&raw, 15.0).unwrap();
        assert_eq!(out.values, vec![0.0, 15.0, 30.0]);
        assert_eq!(out.start_ms, 0);
    }

    #[test]
    fn resample_copies_exact_knots() {
        let raw = RawSeries::new(vec![0, 15_000, 30_000], vec![1.25, -2.5, 9.75]).unwrap();
        let out = resample_linear(&raw, 15.0).unwrap();
        assert_eq!(out.values, vec![1.25, -2.5, 9.75]);
    }

    #[test]
    fn resample_constant_segment() {
        let raw = RawSeries::new(vec![0, 60_000], vec![10.0, 10.0]).unwrap();
        let out = resample_linear(&raw, 15.0).unwrap();
        assert_eq!(out.values, vec![10.0; 5]);
    }

    #[test]
    fn resample_rejects_degenerate_input() {
        let raw = RawSeries::new(vec![0], vec![1.0]).unwrap();
        assert!(resample_linear(&raw, 15.0).is_err());
        let raw = RawSeries::new(vec![0, 5_000], vec![1.0, 2.0]).unwrap();
        assert!(resample_linear(&raw, 15.0).is_err());
    }

    #[test]
    fn align_identical_ranges_unchanged() {
        let x = refined(vec![1.0, 2.0, 3.0]);
        let y = refined(vec![4.0, 5.0, 6.0]);
        let ds = align_pair(&x, &y).unwrap();
        assert_eq!(ds.x.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(ds.y.values, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn align_truncates_to_overlap() {
        // x covers [0, 100s], y covers [30s, 130s]; both end up on [30s, 100s].
        let x = RefinedSeries::new(0, 15.0, (0..=6).map(|i| i as f64).collect()).unwrap();
        let y = RefinedSeries::new(30_000, 15.0, (0..=6).map(|i| 10.0 + i as f64).collect())
            .unwrap();
        // x grid reaches 90s only (7 points); last shared grid point is 90s.
        let ds = align_pair(&x, &y).unwrap();
        assert_eq!(ds.x.start_ms, 30_000);
        assert_eq!(ds.x.values, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ds.y.values, vec![10.0, 11.0, 12.0, 13.0, 14.0]);
    }

    #[test]
    fn align_disjoint_ranges_is_an_error() {
        let x = RefinedSeries::new(0, 15.0, vec![1.0, 2.0]).unwrap();
        let y = RefinedSeries::new(600_000, 15.0, vec![3.0, 4.0]).unwrap();
        assert!(align_pair(&x, &y).is_err());
    }

    #[test]
    fn windows_boundary_count() {
        let values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ds = SensorPairDataset::new(refined(values.clone()), refined(values)).unwrap();
        assert_eq!(make_windows(&ds, 20).unwrap().len(), 1);
    }

    #[test]
    fn windows_count_and_last_index() {
        let values: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let ds = SensorPairDataset::new(refined(values.clone()), refined(values)).unwrap();
        let windows = make_windows(&ds, 20).unwrap();
        assert_eq!(windows.len(), 6);
        assert_eq!(windows.last().unwrap().0.target_index, 24);
    }

    #[test]
    fn window_content_matches_index_arithmetic() {
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ds = SensorPairDataset::new(refined(values.clone()), refined(values)).unwrap();
        let windows = make_windows(&ds, 3).unwrap();
        let (w, target) = &windows[2]; // target index 4
        assert_eq!(w.target_index, 4);
        assert_eq!(w.values, &[2.0, 3.0, 4.0]);
        assert_eq!(*target, 4.0);
    }

    #[test]
    fn windows_reject_oversized_n() {
        let values: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let ds = SensorPairDataset::new(refined(values.clone()), refined(values)).unwrap();
        assert!(make_windows(&ds, 6).is_err());
    }

    #[test]
    fn raw_csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        std::fs::write(&path, "0,1.5\n15000,2.0\n").unwrap();
        let s = load_raw_csv(&path).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.values, vec![1.5, 2.0]);

        std::fs::write(&path, "timestamp_ms,value\n0,1.5\n15000,2.0\n").unwrap();
        assert_eq!(load_raw_csv(&path).unwrap().len(), 2);

        std::fs::write(&path, "abc,1\n").unwrap();
        match load_raw_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "timestamp_ms,value\nabc,1\n").unwrap();
        match load_raw_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "30000,1\n0,2\n").unwrap();
        assert!(load_raw_csv(&path).is_err());
    }

    #[test]
    fn refined_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.csv");
        let ds = SensorPairDataset::new(
            RefinedSeries::new(120_000, 15.0, vec![1.25, 2.5, 3.75]).unwrap(),
            RefinedSeries::new(120_000, 15.0, vec![10.0, 20.0, 30.0]).unwrap(),
        )
        .unwrap();
        save_refined_csv(&ds, &path, &["config: test".to_string()]).unwrap();
        let back = load_refined_csv(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn refine_pipeline_is_deterministic() {
        let ts: Vec<i64> = (0..400).map(|i| i as i64 * 5_100).collect();
        let vx = seeded_values(400, 31);
        let vy = seeded_values(400, 32);
        let raw_x = RawSeries::new(ts.clone(), vx).unwrap();
        let raw_y = RawSeries::new(ts, vy).unwrap();
        let cfg = RefineConfig::default();
        let a = refine_pair(&raw_x, &raw_y, &cfg).unwrap();
        let b = refine_pair(&raw_x, &raw_y, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.len() > 0);
    }
}
