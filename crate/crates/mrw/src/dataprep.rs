//! Ingestion and preprocessing of hourly spot-price data into analysis-ready
//! series: daily aggregation, log transform with drift removal, weekday
//! slicing, weekly means and seasonal profiles.
//!
//! Gaps are never imputed: frames carry the list of missing timestamps and
//! downstream consumers decide (the likelihood refuses gapped input, the
//! variogram machinery works per scale with coverage accounting). Weeks
//! follow ISO numbering, weekday 1 = Monday.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{MrwError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Hourly,
    Daily,
    Weekly,
}

/// Construction history of a series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub resolution: Resolution,
    /// ISO weekday (1 = Monday) when the series is a weekday slice.
    pub weekday: Option<u8>,
    pub log_transformed: bool,
    /// Removed drift per sampling interval, when `log_detrend` ran.
    pub drift_removed: Option<f64>,
}

/// A timestamped univariate series with gap annotations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesFrame {
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
    /// Expected-but-missing timestamps between the first and last sample.
    pub gaps: Vec<NaiveDateTime>,
    /// Indices flagged for partial coverage (days with under 12 hours, weeks
    /// with under 7 days).
    pub flagged: Vec<usize>,
    pub meta: SeriesMeta,
}

impl SeriesFrame {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A record dropped during ingestion, with its file line for the report.
#[derive(Debug, Clone, Serialize)]
pub struct RejectedRecord {
    pub line: usize,
    pub timestamp: String,
    pub reason: String,
}

/// Result of [`load_prices`]: the parsed frame plus rejected-record report.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub frame: SeriesFrame,
    pub rejected: Vec<RejectedRecord>,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    // date-only rows are taken at midnight
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| d.and_hms_opt(0, 0, 0).unwrap())
}

/// Parse an hourly `timestamp,price` CSV (ISO-8601 timestamps, prices > 0).
///
/// Rows are sorted by timestamp; nonpositive prices and duplicate timestamps
/// are rejected into the report; an unparsable row is a hard error carrying
/// its line number; missing hours between the first and last timestamp are
/// recorded as gaps.
pub fn load_prices(path: &Path) -> Result<LoadReport> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_path(path)?;
    {
        let headers = reader.headers().map_err(|e| MrwError::Parse {
            line: 1,
            message: format!("cannot read header: {e}"),
        })?;
        let cols: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
        if cols.len() < 2 || cols[0] != "timestamp" || cols[1] != "price" {
            return Err(MrwError::Parse {
                line: 1,
                message: format!("expected header `timestamp,price`, got `{}`", cols.join(",")),
            });
        }
    }
    let mut rows: Vec<(NaiveDateTime, f64, usize)> = Vec::new();
    let mut rejected = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| MrwError::Parse { line, message: e.to_string() })?;
        let ts_raw = record.get(0).unwrap_or("").trim();
        let price_raw = record.get(1).unwrap_or("").trim();
        let ts = parse_timestamp(ts_raw).ok_or_else(|| MrwError::Parse {
            line,
            message: format!("unparsable timestamp `{ts_raw}`"),
        })?;
        let price: f64 = price_raw.parse().map_err(|_| MrwError::Parse {
            line,
            message: format!("unparsable price `{price_raw}`"),
        })?;
        if !(price > 0.0) {
            rejected.push(RejectedRecord {
                line,
                timestamp: ts_raw.to_string(),
                reason: format!("nonpositive price {price}"),
            });
            continue;
        }
        rows.push((ts, price, line));
    }
    if rows.is_empty() {
        return Err(MrwError::NoData("no records".into()));
    }
    rows.sort_by_key(|r| r.0);
    let mut timestamps = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (ts, price, line) in rows {
        if timestamps.last() == Some(&ts) {
            rejected.push(RejectedRecord {
                line,
                timestamp: ts.to_string(),
                reason: "duplicate timestamp".into(),
            });
            continue;
        }
        timestamps.push(ts);
        values.push(price);
    }
    let mut gaps = Vec::new();
    for w in timestamps.windows(2) {
        let mut t = w[0] + Duration::hours(1);
        while t < w[1] {
            gaps.push(t);
            t += Duration::hours(1);
        }
    }
    Ok(LoadReport {
        frame: SeriesFrame {
            timestamps,
            values,
            gaps,
            flagged: Vec::new(),
            meta: SeriesMeta {
                resolution: Resolution::Hourly,
                weekday: None,
                log_transformed: false,
                drift_removed: None,
            },
        },
        rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    Mean,
    Max,
}

/// One value per calendar day (mean or max of the available hours); days with
/// fewer than 12 hours are flagged, fully missing days become gaps.
pub fn daily_aggregate(hourly: &SeriesFrame, mode: AggregateMode) -> Result<SeriesFrame> {
    if hourly.is_empty() {
        return Err(MrwError::NoData("empty frame".into()));
    }
    let mut days: Vec<(NaiveDate, f64, usize)> = Vec::new();
    for (ts, &v) in hourly.timestamps.iter().zip(&hourly.values) {
        let d = ts.date();
        match days.last_mut() {
            Some((day, acc, cnt)) if *day == d => {
                match mode {
                    AggregateMode::Mean => *acc += v,
                    AggregateMode::Max => *acc = acc.max(v),
                }
                *cnt += 1;
            }
            _ => days.push((d, v, 1)),
        }
    }
    let mut timestamps = Vec::with_capacity(days.len());
    let mut values = Vec::with_capacity(days.len());
    let mut flagged = Vec::new();
    for (i, (day, acc, cnt)) in days.iter().enumerate() {
        timestamps.push(day.and_hms_opt(0, 0, 0).unwrap());
        values.push(match mode {
            AggregateMode::Mean => acc / *cnt as f64,
            AggregateMode::Max => *acc,
        });
        if *cnt < 12 {
            flagged.push(i);
        }
    }
    let mut gaps = Vec::new();
    for w in timestamps.windows(2) {
        let mut t = w[0] + Duration::days(1);
        while t < w[1] {
            gaps.push(t);
            t += Duration::days(1);
        }
    }
    Ok(SeriesFrame {
        timestamps,
        values,
        gaps,
        flagged,
        meta: SeriesMeta {
            resolution: Resolution::Daily,
            weekday: None,
            log_transformed: false,
            drift_removed: None,
        },
    })
}

/// `X_k = log P_k - mu_hat k`, with `mu_hat` the mean of the log-price first
/// differences. Returns the detrended frame and `mu_hat`.
pub fn log_detrend(daily: &SeriesFrame) -> Result<(SeriesFrame, f64)> {
    if daily.len() < 2 {
        return Err(MrwError::InvalidInput("log_detrend needs at least 2 samples".into()));
    }
    if let Some(&bad) = daily.values.iter().find(|v| !(**v > 0.0)) {
        return Err(MrwError::InvalidInput(format!("nonpositive price {bad} cannot be logged")));
    }
    let logs: Vec<f64> = daily.values.iter().map(|v| v.ln()).collect();
    let mu = (logs[logs.len() - 1] - logs[0]) / (logs.len() - 1) as f64;
    let values: Vec<f64> = logs.iter().enumerate().map(|(k, l)| l - mu * k as f64).collect();
    let mut out = daily.clone();
    out.values = values;
    out.meta.log_transformed = true;
    out.meta.drift_removed = Some(mu);
    Ok((out, mu))
}

/// The sub-series of a daily frame on one ISO weekday (1 = Monday); sampling
/// becomes weekly and missing occurrences become gaps.
pub fn weekday_slice(x: &SeriesFrame, weekday: u8) -> Result<SeriesFrame> {
    if !(1..=7).contains(&weekday) {
        return Err(MrwError::InvalidInput(format!("weekday must be 1..=7, got {weekday}")));
    }
    if x.meta.resolution != Resolution::Daily {
        return Err(MrwError::InvalidInput("weekday_slice needs a daily frame".into()));
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (ts, &v) in x.timestamps.iter().zip(&x.values) {
        if ts.weekday().number_from_monday() as u8 == weekday {
            timestamps.push(*ts);
            values.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(MrwError::NoData(format!("no samples on weekday {weekday}")));
    }
    let mut gaps = Vec::new();
    for w in timestamps.windows(2) {
        let mut t = w[0] + Duration::weeks(1);
        while t < w[1] {
            gaps.push(t);
            t += Duration::weeks(1);
        }
    }
    let mut meta = x.meta.clone();
    meta.resolution = Resolution::Weekly;
    meta.weekday = Some(weekday);
    Ok(SeriesFrame { timestamps, values, gaps, flagged: Vec::new(), meta })
}

/// Calendar-week (ISO) means of a daily frame; partial weeks are flagged.
/// Each week is stamped at its Monday.
pub fn weekly_mean(x: &SeriesFrame) -> Result<SeriesFrame> {
    if x.meta.resolution != Resolution::Daily {
        return Err(MrwError::InvalidInput("weekly_mean needs a daily frame".into()));
    }
    if x.is_empty() {
        return Err(MrwError::NoData("empty frame".into()));
    }
    let mut weeks: Vec<((i32, u32), f64, usize)> = Vec::new();
    for (ts, &v) in x.timestamps.iter().zip(&x.values) {
        let iso = ts.iso_week();
        let key = (iso.year(), iso.week());
        match weeks.last_mut() {
            Some((k, acc, cnt)) if *k == key => {
                *acc += v;
                *cnt += 1;
            }
            _ => weeks.push((key, v, 1)),
        }
    }
    let mut timestamps = Vec::with_capacity(weeks.len());
    let mut values = Vec::with_capacity(weeks.len());
    let mut flagged = Vec::new();
    for (i, ((year, week), acc, cnt)) in weeks.iter().enumerate() {
        let monday = NaiveDate::from_isoywd_opt(*year, *week, Weekday::Mon)
            .expect("valid iso week")
            .and_hms_opt(0, 0, 0)
            .unwrap();
        timestamps.push(monday);
        values.push(acc / *cnt as f64);
        if *cnt < 7 {
            flagged.push(i);
        }
    }
    let mut gaps = Vec::new();
    for w in timestamps.windows(2) {
        let mut t = w[0] + Duration::weeks(1);
        while t < w[1] {
            gaps.push(t);
            t += Duration::weeks(1);
        }
    }
    let mut meta = x.meta.clone();
    meta.resolution = Resolution::Weekly;
    Ok(SeriesFrame { timestamps, values, gaps, flagged, meta })
}

/// Least-squares sinusoid with a one-year period.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    /// Phase of `amplitude * sin(2 pi w / period + phase)` at week-of-year `w = 0`.
    pub phase: f64,
    pub period_weeks: f64,
}

/// Weekday and week-of-year conditional means, with a fitted one-year
/// sinusoid when the span allows.
#[derive(Debug, Clone)]
pub struct SeasonalProfile {
    pub weekday_means: [f64; 7],
    /// Mean per ISO week number (index 0 = week 1); NaN where no data.
    pub weekofyear_means: Vec<f64>,
    /// None when the frame spans under two years.
    pub sinusoid: Option<SinusoidFit>,
}

const WEEKS_PER_YEAR: f64 = 365.25 / 7.0;

/// Conditional means per weekday and per week-of-year, plus a least-squares
/// sinusoid (period fixed at one year) through the week-of-year means.
/// Requires a daily frame; the week-of-year part needs two years of span.
pub fn seasonal_profile(x: &SeriesFrame) -> Result<SeasonalProfile> {
    if x.meta.resolution != Resolution::Daily {
        return Err(MrwError::InvalidInput("seasonal_profile needs a daily frame".into()));
    }
    if x.is_empty() {
        return Err(MrwError::NoData("empty frame".into()));
    }
    let mut day_acc = [0.0f64; 7];
    let mut day_cnt = [0usize; 7];
    let mut week_acc = vec![0.0f64; 53];
    let mut week_cnt = vec![0usize; 53];
    for (ts, &v) in x.timestamps.iter().zip(&x.values) {
        let wd = ts.weekday().number_from_monday() as usize - 1;
        day_acc[wd] += v;
        day_cnt[wd] += 1;
        let w = ts.iso_week().week() as usize - 1;
        week_acc[w] += v;
        week_cnt[w] += 1;
    }
    let mut weekday_means = [f64::NAN; 7];
    for d in 0..7 {
        if day_cnt[d] > 0 {
            weekday_means[d] = day_acc[d] / day_cnt[d] as f64;
        }
    }
    let span_days = (*x.timestamps.last().unwrap() - x.timestamps[0]).num_days();
    if span_days < 730 {
        return Ok(SeasonalProfile {
            weekday_means,
            weekofyear_means: Vec::new(),
            sinusoid: None,
        });
    }
    let weekofyear_means: Vec<f64> = (0..53)
        .map(|w| if week_cnt[w] > 0 { week_acc[w] / week_cnt[w] as f64 } else { f64::NAN })
        .collect();
    // least squares on m + a cos(2 pi w / P) + b sin(2 pi w / P)
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (w, &y) in weekofyear_means.iter().enumerate() {
        if !y.is_finite() {
            continue;
        }
        let ang = 2.0 * std::f64::consts::PI * w as f64 / WEEKS_PER_YEAR;
        let row = [1.0, ang.cos(), ang.sin()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let coef = solve3(ata, aty).ok_or_else(|| {
        MrwError::InvalidInput("degenerate design for the seasonal sinusoid".into())
    })?;
    let amplitude = (coef[1] * coef[1] + coef[2] * coef[2]).sqrt();
    // a cos t + b sin t = A sin(t + phase) with phase = atan2(a, b)
    let phase = coef[1].atan2(coef[2]);
    Ok(SeasonalProfile {
        weekday_means,
        weekofyear_means,
        sinusoid: Some(SinusoidFit { amplitude, phase, period_weeks: WEEKS_PER_YEAR }),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}
