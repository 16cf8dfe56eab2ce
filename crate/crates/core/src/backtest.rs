//! Daily-close backtest of a threshold rule on a pair of price series.
//!
//! Fills happen at the close of the signal day. A long spread position buys
//! leg 1 and shorts leg 2 for equal currency amounts. Both commissions of a
//! pairs trade are settled when it closes, so the equity curve is marked to
//! market gross of the open trade's costs.

use std::collections::HashMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calibration::{PriceSeries, SpreadSeries};
use crate::error::{Error, Result};
use crate::solver::{ThresholdPolicy, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub thresholds: Thresholds,
    pub stop_loss: f64,
    pub initial_capital: f64,
    /// Charged once at entry and once at exit of every pairs trade.
    pub commission: f64,
    pub long_fraction: f64,
    pub short_fraction: f64,
    pub reentry_after_stop: bool,
    /// Size each entry from current equity rather than initial capital.
    pub reinvest: bool,
}

impl BacktestConfig {
    pub fn new(thresholds: Thresholds, stop_loss: f64, initial_capital: f64, commission: f64) -> Self {
        Self {
            thresholds,
            stop_loss,
            initial_capital,
            commission,
            long_fraction: 0.5,
            short_fraction: 0.5,
            reentry_after_stop: true,
            reinvest: true,
        }
    }

    pub fn from_policy(policy: &ThresholdPolicy, initial_capital: f64, commission: f64) -> Self {
        Self::new(policy.thresholds(), policy.params.m, initial_capital, commission)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return bad("capital", self.initial_capital, "must be positive");
        }
        if !(self.commission >= 0.0 && self.commission.is_finite()) {
            return bad("commission", self.commission, "must be non-negative");
        }
        for (name, f) in [("long_fraction", self.long_fraction), ("short_fraction", self.short_fraction)] {
            if !(f > 0.0 && f <= 1.0) {
                return bad(name, f, "must lie in (0, 1]");
            }
        }
        let t = self.thresholds;
        if !(self.stop_loss < t.x0 && t.x0 <= t.x1 && t.x1 < t.x2) {
            return bad("thresholds", t.x0, "need M < x0 <= x1 < x2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    Target,
    StopLoss,
    EndOfData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub entry_date: NaiveDate,
    pub exit_date: NaiveDate,
    pub entry_z: f64,
    pub exit_z: f64,
    pub exit_reason: ExitReason,
    pub long_entry_price: f64,
    pub long_exit_price: f64,
    pub short_entry_price: f64,
    pub short_exit_price: f64,
    pub long_amount: f64,
    pub short_amount: f64,
    pub commission: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    pub date: NaiveDate,
    pub equity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trade_count: usize,
    pub initial_capital: f64,
    pub end_balance: f64,
    pub total_profit: f64,
    /// Largest peak-to-trough fall of the equity curve, as a fraction of the peak.
    pub max_drawdown: f64,
    pub max_drawdown_amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub trades: Vec<Trade>,
    pub equity_curve: Vec<EquityPoint>,
    pub summary: Summary,
}

struct Open {
    date: NaiveDate,
    z: f64,
    long_price: f64,
    short_price: f64,
    long_amount: f64,
    short_amount: f64,
}

impl Open {
    fn pnl(&self, long_price: f64, short_price: f64) -> f64 {
        self.long_amount * (long_price / self.long_price - 1.0)
            + self.short_amount * (self.short_price - short_price) / self.short_price
    }
}

fn lookup(prices: &HashMap<NaiveDate, f64>, d: NaiveDate, leg: &str) -> Result<f64> {
    prices
        .get(&d)
        .copied()
        .ok_or_else(|| Error::Alignment(format!("no {leg} price on {d}")))
}

/// Runs the rule over the spread, buying `long_leg` and shorting `short_leg`
/// on entry.
pub fn run_backtest(
    cfg: &BacktestConfig,
    spread: &SpreadSeries,
    long_leg: &PriceSeries,
    short_leg: &PriceSeries,
) -> Result<BacktestReport> {
    cfg.validate()?;
    let p_long = long_leg.price_on();
    let p_short = short_leg.price_on();
    let Thresholds { x0, x1, x2 } = cfg.thresholds;

    let mut equity = cfg.initial_capital;
    let mut open: Option<Open> = None;
    let mut halted = false;
    let mut trades = Vec::new();
    let mut curve = Vec::with_capacity(spread.len());

    let mut close = |open: Open, date, z, lp, sp, reason, equity: &mut f64| -> Result<()> {
        let commission = 2.0 * cfg.commission;
        let profit = open.pnl(lp, sp) - commission;
        *equity += profit;
        trades.push(Trade {
            entry_date: open.date,
            exit_date: date,
            entry_z: open.z,
            exit_z: z,
            exit_reason: reason,
            long_entry_price: open.long_price,
            long_exit_price: lp,
            short_entry_price: open.short_price,
            short_exit_price: sp,
            long_amount: open.long_amount,
            short_amount: open.short_amount,
            commission,
            profit,
        });
        if *equity <= 0.0 {
            return Err(Error::CapitalExhausted {
                date: date.to_string(),
                equity: *equity,
            });
        }
        Ok(())
    };

    let last = spread.len().saturating_sub(1);
    for (i, (&date, &z)) in spread.dates.iter().zip(&spread.z).enumerate() {
        let lp = lookup(&p_long, date, "long-leg")?;
        let sp = lookup(&p_short, date, "short-leg")?;
        match open.take() {
            Some(pos) if z <= cfg.stop_loss => {
                close(pos, date, z, lp, sp, ExitReason::StopLoss, &mut equity)?;
                halted = !cfg.reentry_after_stop;
            }
            Some(pos) if z >= x2 => close(pos, date, z, lp, sp, ExitReason::Target, &mut equity)?,
            Some(pos) if i == last => close(pos, date, z, lp, sp, ExitReason::EndOfData, &mut equity)?,
            Some(pos) => open = Some(pos),
            None if !halted && z >= x0 && z <= x1 && i != last => {
                let base = if cfg.reinvest { equity } else { cfg.initial_capital };
                open = Some(Open {
                    date,
                    z,
                    long_price: lp,
                    short_price: sp,
                    long_amount: cfg.long_fraction * base,
                    short_amount: cfg.short_fraction * base,
                });
            }
            None => {}
        }
        let marked = equity + open.as_ref().map_or(0.0, |o| o.pnl(lp, sp));
        curve.push(EquityPoint { date, equity: marked });
    }

    let mut peak = cfg.initial_capital;
    let mut max_dd = 0.0f64;
    let mut max_dd_amount = 0.0f64;
    for p in &curve {
        peak = peak.max(p.equity);
        max_dd_amount = max_dd_amount.max(peak - p.equity);
        max_dd = max_dd.max((peak - p.equity) / peak);
    }
    let summary = Summary {
        trade_count: trades.len(),
        initial_capital: cfg.initial_capital,
        end_balance: equity,
        total_profit: trades.iter().map(|t| t.profit).sum(),
        max_drawdown: max_dd,
        max_drawdown_amount: max_dd_amount,
    };
    Ok(BacktestReport {
        config: *cfg,
        trades,
        equity_curve: curve,
        summary,
    })
}

/// Pointwise negation; trading `-Z` means buying leg 2 and shorting leg 1.
pub fn reverse_spread(spread: &SpreadSeries) -> SpreadSeries {
    SpreadSeries {
        dates: spread.dates.clone(),
        z: spread.z.iter().map(|z| -z).collect(),
        dt: spread.dt,
        k0: spread.k0,
    }
}

pub fn write_trades_csv<W: Write>(trades: &[Trade], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for t in trades {
        wtr.serialize(t)?;
    }
    if trades.is_empty() {
        wtr.write_record([
            "entry_date",
            "exit_date",
            "entry_z",
            "exit_z",
            "exit_reason",
            "long_entry_price",
            "long_exit_price",
            "short_entry_price",
            "short_exit_price",
            "long_amount",
            "short_amount",
            "commission",
            "profit",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_equity_csv<W: Write>(curve: &[EquityPoint], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "equity"])?;
    for p in curve {
        wtr.write_record([p.date.to_string(), format!("{}", p.equity)])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn days(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2015, 3, 2).unwrap();
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn rule() -> Thresholds {
        Thresholds {
            x0: -0.142,
            x1: -0.077,
            x2: 0.077,
        }
    }

    fn fixture(z: &[f64], long: &[f64], short: &[f64]) -> (SpreadSeries, PriceSeries, PriceSeries) {
        let d = days(z.len());
        (
            SpreadSeries::new(d.clone(), z.to_vec(), 1.0 / 252.0).unwrap(),
            PriceSeries::new(d.clone(), long.to_vec()).unwrap(),
            PriceSeries::new(d, short.to_vec()).unwrap(),
        )
    }

    const Z6: [f64; 6] = [0.0, -0.142, -0.12, -0.02, 0.08, 0.01];

    #[test]
    fn six_point_fixture_flat_prices() {
        let (s, p1, p2) = fixture(&Z6, &[100.0; 6], &[50.0; 6]);
        let cfg = BacktestConfig::new(rule(), -0.2, 10_000.0, 5.0);
        let r = run_backtest(&cfg, &s, &p1, &p2).unwrap();
        assert_eq!(r.trades.len(), 1);
        let t = &r.trades[0];
        assert_eq!(t.entry_date, s.dates[1]);
        assert_eq!(t.exit_date, s.dates[4]);
        assert_eq!(t.exit_reason, ExitReason::Target);
        assert_eq!(t.profit, -10.0);
        assert_eq!(r.summary.end_balance, 9_990.0);
        assert_eq!(r.equity_curve[0].equity, 10_000.0);
        assert_eq!(r.equity_curve[5].equity, 9_990.0);
    }

    #[test]
    fn six_point_fixture_moving_prices() {
        let long = [100.0, 100.0, 104.0, 108.0, 110.0, 90.0];
        let short = [50.0, 50.0, 49.0, 47.0, 45.0, 60.0];
        let (s, p1, p2) = fixture(&Z6, &long, &short);
        let cfg = BacktestConfig::new(rule(), -0.2, 100_000.0, 5.0);
        let r = run_backtest(&cfg, &s, &p1, &p2).unwrap();
        // 50k * 10% on each leg, less two commissions.
        assert!((r.trades[0].profit - 9_990.0).abs() < 1e-9);
        assert!((r.summary.end_balance - 109_990.0).abs() < 1e-9);
        assert!((r.equity_curve[2].equity - 103_000.0).abs() < 1e-9);
    }

    #[test]
    fn commission_difference_is_two_charges() {
        let (s, p1, p2) = fixture(&Z6, &[100.0, 101.0, 99.0, 102.0, 103.0, 100.0], &[50.0; 6]);
        let run = |c| {
            let cfg = BacktestConfig::new(rule(), -0.2, 10_000.0, c);
            run_backtest(&cfg, &s, &p1, &p2).unwrap().trades[0].profit
        };
        assert!((run(0.0) - run(5.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn no_signal_means_flat_curve() {
        let (s, p1, p2) = fixture(&[0.0, 0.01, -0.05, 0.02], &[10.0, 11.0, 12.0, 13.0], &[5.0; 4]);
        let cfg = BacktestConfig::new(rule(), -0.2, 1_000.0, 5.0);
        let r = run_backtest(&cfg, &s, &p1, &p2).unwrap();
        assert!(r.trades.is_empty());
        assert!(r.equity_curve.iter().all(|p| p.equity == 1_000.0));
        assert_eq!(r.summary.max_drawdown, 0.0);
    }

    #[test]
    fn stop_loss_and_reentry() {
        let z = [-0.1, -0.25, -0.1, 0.1, -0.1, 0.0];
        let (s, p1, p2) = fixture(&z, &[100.0; 6], &[50.0; 6]);
        let mut cfg = BacktestConfig::new(rule(), -0.2, 1_000.0, 1.0);
        let r = run_backtest(&cfg, &s, &p1, &p2).unwrap();
        let reasons: Vec<_> = r.trades.iter().map(|t| t.exit_reason).collect();
        assert_eq!(reasons, [ExitReason::StopLoss, ExitReason::Target, ExitReason::EndOfData]);
        assert!(r.trades[0].exit_z <= -0.2);
        cfg.reentry_after_stop = false;
        let r = run_backtest(&cfg, &s, &p1, &p2).unwrap();
        assert_eq!(r.trades.len(), 1);
    }

    #[test]
    fn fixed_sizing_without_reinvestment() {
        let z = [-0.1, 0.1, -0.1, 0.1];
        let (s, p1, p2) = fixture(&z, &[100.0, 120.0, 100.0, 120.0], &[50.0; 4]);
        let mut cfg = BacktestConfig::new(rule(), -0.2, 1_000.0, 0.0);
        cfg.reinvest = false;
        let r = run_backtest(&cfg, &s, &p1, &p2).unwrap();
        assert_eq!(r.trades[1].long_amount, 500.0);
        cfg.reinvest = true;
        let r = run_backtest(&cfg, &s, &p1, &p2).unwrap();
        assert_eq!(r.trades[1].long_amount, 550.0);
    }

    #[test]
    fn wipeout_is_an_error() {
        let z = [-0.1, 0.1];
        let (s, p1, p2) = fixture(&z, &[100.0, 100.0], &[50.0, 150.0]);
        let mut cfg = BacktestConfig::new(rule(), -0.2, 1_000.0, 0.0);
        cfg.short_fraction = 1.0;
        assert!(matches!(
            run_backtest(&cfg, &s, &p1, &p2),
            Err(Error::CapitalExhausted { .. })
        ));
    }

    #[test]
    fn missing_price_is_alignment_error() {
        let (s, p1, _) = fixture(&Z6, &[100.0; 6], &[50.0; 6]);
        let short = PriceSeries::new(days(5), vec![50.0; 5]).unwrap();
        let cfg = BacktestConfig::new(rule(), -0.2, 1_000.0, 0.0);
        assert!(matches!(run_backtest(&cfg, &s, &p1, &short), Err(Error::Alignment(_))));
    }

    #[test]
    fn reverse_is_an_involution() {
        let s = SpreadSeries::new(days(2), vec![0.1, -0.1], 1.0).unwrap();
        let r = reverse_spread(&s);
        assert_eq!(r.z, vec![-0.1, 0.1]);
        assert_eq!(reverse_spread(&r), s);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = BacktestConfig::new(rule(), -0.2, 0.0, 0.0);
        assert!(cfg.validate().is_err());
        cfg.initial_capital = 1.0;
        cfg.long_fraction = 1.5;
        assert!(cfg.validate().is_err());
    }
}
