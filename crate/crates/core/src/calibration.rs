//! Spread construction from two price series and OU estimation by least squares.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading days per year; the default spread time step is one day.
pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::InvalidSeries(format!(
                "{} dates but {} prices",
                dates.len(),
                prices.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InsufficientHistory {
                what: "price series",
                needed: 2,
                got: dates.len(),
            });
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some((d, p)) = dates
            .iter()
            .zip(&prices)
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::InvalidSeries(format!("price {p} on {d} is not positive")));
        }
        Ok(Self { dates, prices })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn price_on(&self) -> HashMap<NaiveDate, f64> {
        self.dates.iter().copied().zip(self.prices.iter().copied()).collect()
    }

    /// Headered delimited text with `date` (ISO-8601) and `close` columns.
    pub fn from_csv_reader<R: Read>(rdr: R, label: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            date: String,
            close: f64,
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        for (i, rec) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| Error::Parse {
                path: label.to_string(),
                line,
                msg: e.to_string(),
            })?;
            let date = parse_date(&row.date).map_err(|msg| Error::Parse {
                path: label.to_string(),
                line,
                msg,
            })?;
            dates.push(date);
            prices.push(row.close);
        }
        Self::new(dates, prices)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, &path.display().to_string())
    }
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date '{s}': {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSeries {
    pub dates: Vec<NaiveDate>,
    pub z: Vec<f64>,
    /// Time step in years.
    pub dt: f64,
    /// Hedge ratio; 1 after normalising each leg by its moving average.
    pub k0: f64,
}

impl SpreadSeries {
    pub fn new(dates: Vec<NaiveDate>, z: Vec<f64>, dt: f64) -> Result<Self> {
        if dates.len() != z.len() {
            return Err(Error::InvalidSeries(format!(
                "{} dates but {} spread values",
                dates.len(),
                z.len()
            )));
        }
        if z.len() < 2 {
            return Err(Error::InsufficientHistory {
                what: "spread series",
                needed: 2,
                got: z.len(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: dt,
                reason: "must be positive",
            });
        }
        Ok(Self {
            dates,
            z,
            dt,
            k0: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Prefix up to and including `last`.
    pub fn truncate_to(&self, last: NaiveDate) -> Self {
        let n = self.dates.partition_point(|d| *d <= last);
        Self {
            dates: self.dates[..n].to_vec(),
            z: self.z[..n].to_vec(),
            dt: self.dt,
            k0: self.k0,
        }
    }

    /// Headered `date,z` text.
    pub fn from_csv_reader<R: Read>(rdr: R, label: &str, dt: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            date: String,
            z: f64,
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let mut dates = Vec::new();
        let mut z = Vec::new();
        for (i, rec) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| Error::Parse {
                path: label.to_string(),
                line,
                msg: e.to_string(),
            })?;
            dates.push(parse_date(&row.date).map_err(|msg| Error::Parse {
                path: label.to_string(),
                line,
                msg,
            })?);
            z.push(row.z);
        }
        Self::new(dates, z, dt)
    }

    pub fn read_csv(path: &Path, dt: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, &path.display().to_string(), dt)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["date", "z"])?;
        for (d, z) in self.dates.iter().zip(&self.z) {
            wtr.write_record([d.to_string(), format!("{z}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Trailing simple moving average; `None` until `window` points are available.
fn moving_average(xs: &[f64], window: usize) -> Vec<Option<f64>> {
    (0..xs.len())
        .map(|i| {
            (i + 1 >= window).then(|| xs[i + 1 - window..=i].iter().sum::<f64>() / window as f64)
        })
        .collect()
}

/// `z_t = p1_t / MA(p1)_t - p2_t / MA(p2)_t` on the common dates, dropping the
/// first `ma_window - 1` points.
pub fn build_spread(p1: &PriceSeries, p2: &PriceSeries, ma_window: usize, dt: f64) -> Result<SpreadSeries> {
    if ma_window == 0 {
        return Err(Error::InvalidParameter {
            name: "window",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let other = p2.price_on();
    let mut dates = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (d, p) in p1.dates.iter().zip(&p1.prices) {
        if let Some(q) = other.get(d) {
            dates.push(*d);
            a.push(*p);
            b.push(*q);
        }
    }
    if dates.is_empty() {
        return Err(Error::MisalignedDates);
    }
    if dates.len() < ma_window + 1 {
        return Err(Error::InsufficientHistory {
            what: "spread construction",
            needed: ma_window + 1,
            got: dates.len(),
        });
    }
    let ma_a = moving_average(&a, ma_window);
    let ma_b = moving_average(&b, ma_window);
    let mut out_dates = Vec::new();
    let mut z = Vec::new();
    for i in ma_window - 1..dates.len() {
        let (Some(ma), Some(mb)) = (ma_a[i], ma_b[i]) else {
            continue;
        };
        out_dates.push(dates[i]);
        z.push(a[i] / ma - b[i] / mb);
    }
    SpreadSeries::new(out_dates, z, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuFit {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub se_sigma: f64,
    /// AR(1) intercept and slope of `z[k+1] = c0 + c1 z[k] + e`.
    pub intercept: f64,
    pub slope: f64,
    pub residual_sd: f64,
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub min_len: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_len: 30 }
    }
}

/// Least-squares AR(1) fit mapped onto the exact OU transition:
/// `a = -ln(c1)/dt`, `b = c0/(1 - c1)`, `sigma = s_e sqrt(2a/(1 - c1^2))`.
/// Standard errors by the delta method.
pub fn fit_ou(s: &SpreadSeries, opts: FitOptions) -> Result<OuFit> {
    let n_obs = s.z.len();
    if n_obs < opts.min_len.max(3) {
        return Err(Error::InsufficientHistory {
            what: "OU fit",
            needed: opts.min_len.max(3),
            got: n_obs,
        });
    }
    if !(s.dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: s.dt,
            reason: "must be positive",
        });
    }
    let xs = &s.z[..n_obs - 1];
    let ys = &s.z[1..];
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let noise_floor = n * (1e-12 * (1.0 + mx.abs())).powi(2);
    if !(sxx > noise_floor) {
        return Err(Error::Degenerate);
    }
    let c1 = sxy / sxx;
    let c0 = my - c1 * mx;
    if !(c1 > 0.0 && c1 < 1.0) {
        return Err(Error::NonStationary { slope: c1 });
    }
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - c0 - c1 * x;
            e * e
        })
        .sum();
    let s2 = ssr / (n - 2.0);
    let se = s2.sqrt();

    let dt = s.dt;
    let a = -c1.ln() / dt;
    let b = c0 / (1.0 - c1);
    let g2 = 2.0 * a / (1.0 - c1 * c1);
    let sigma = se * g2.sqrt();

    let var_c1 = s2 / sxx;
    let var_c0 = s2 * (1.0 / n + mx * mx / sxx);
    let cov = -mx * s2 / sxx;

    let se_a = var_c1.sqrt() / (c1 * dt);

    let db_dc0 = 1.0 / (1.0 - c1);
    let db_dc1 = c0 / ((1.0 - c1) * (1.0 - c1));
    let var_b = db_dc0 * db_dc0 * var_c0 + db_dc1 * db_dc1 * var_c1 + 2.0 * db_dc0 * db_dc1 * cov;

    // g^2(c1) = -2 ln(c1) / (dt (1 - c1^2))
    let one_m = 1.0 - c1 * c1;
    let dg2 = (-2.0 / dt) * ((1.0 / c1) * one_m + 2.0 * c1 * c1.ln()) / (one_m * one_m);
    let dg = dg2 / (2.0 * g2.sqrt());
    let var_se = s2 / (2.0 * (n - 2.0));
    let var_sigma = g2 * var_se + s2 * dg * dg * var_c1;

    Ok(OuFit {
        a,
        b,
        sigma,
        se_a,
        se_b: var_b.max(0.0).sqrt(),
        se_sigma: var_sigma.sqrt(),
        intercept: c0,
        slope: c1,
        residual_sd: se,
        n: xs.len(),
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn days(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn series(prices: &[f64]) -> PriceSeries {
        PriceSeries::new(days(prices.len()), prices.to_vec()).unwrap()
    }

    #[test]
    fn identical_legs_give_zero_spread() {
        let p = series(&[10.0, 11.0, 9.5, 12.0, 13.0]);
        let s = build_spread(&p, &p, 2, 1.0 / TRADING_DAYS).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.z.iter().all(|z| *z == 0.0));
        assert_eq!(s.k0, 1.0);
    }

    #[test]
    fn constant_legs_give_zero_spread() {
        let s = build_spread(&series(&[5.0; 6]), &series(&[70.0; 6]), 3, 1.0).unwrap();
        assert_eq!(s.z, vec![0.0; 4]);
        assert_eq!(s.dates[0], days(6)[2]);
    }

    #[test]
    fn step_fixture_matches_hand_values() {
        let p1 = series(&[100.0, 100.0, 100.0, 110.0, 110.0, 110.0]);
        let p2 = series(&[50.0; 6]);
        let s = build_spread(&p1, &p2, 3, 1.0).unwrap();
        // MA(p1) = 100, 310/3, 320/3, 110 on the last four days.
        let want = [0.0, 2.0 / 31.0, 0.03125, 0.0];
        for (got, want) in s.z.iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn inner_join_and_errors() {
        let p1 = series(&[1.0, 2.0, 3.0, 4.0]);
        let late = PriceSeries::new(
            days(8)[4..].to_vec(),
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert!(matches!(build_spread(&p1, &late, 1, 1.0), Err(Error::MisalignedDates)));
        assert!(matches!(
            build_spread(&p1, &p1, 4, 1.0),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn rejects_bad_price_series() {
        assert!(PriceSeries::new(days(2), vec![1.0, -1.0]).is_err());
        let mut d = days(3);
        d.swap(1, 2);
        assert!(PriceSeries::new(d, vec![1.0, 1.0, 1.0]).is_err());
        assert!(PriceSeries::new(days(1), vec![1.0]).is_err());
    }

    #[test]
    fn parses_price_csv() {
        let text = "date,close\n2021-01-04,10.5\n2021-01-05, 10.75\n";
        let p = PriceSeries::from_csv_reader(text.as_bytes(), "mem").unwrap();
        assert_eq!(p.prices, vec![10.5, 10.75]);
        let bad = "date,close\n2021-01-04,10.5\n01/05/2021,10.75\n";
        match PriceSeries::from_csv_reader(bad.as_bytes(), "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_spread_is_degenerate() {
        let s = SpreadSeries::new(days(40), vec![0.3; 40], 1.0).unwrap();
        assert!(matches!(fit_ou(&s, FitOptions::default()), Err(Error::Degenerate)));
    }

    #[test]
    fn alternating_spread_is_not_stationary() {
        let z = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = SpreadSeries::new(days(40), z, 1.0).unwrap();
        assert!(matches!(fit_ou(&s, FitOptions::default()), Err(Error::NonStationary { .. })));
    }

    #[test]
    fn too_short_is_rejected() {
        let s = SpreadSeries::new(days(10), (0..10).map(|i| i as f64).collect(), 1.0).unwrap();
        assert!(matches!(fit_ou(&s, FitOptions::default()), Err(Error::InsufficientHistory { .. })));
    }
}
