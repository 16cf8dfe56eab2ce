use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::NaiveDate;
use optpair_core::backtest::{write_equity_csv, write_trades_csv, EquityPoint, Summary};
use optpair_core::calibration::{build_spread, fit_ou, FitOptions, OuFit, PriceSeries, SpreadSeries, TRADING_DAYS};
use optpair_core::simulation::{default_horizon, simulate_ou_path};
use optpair_core::value::{linspace, ValuePoint};
use optpair_core::{
    mc_value, reverse_spread, run_backtest, sensitivity_sweep, solve_policy, BacktestConfig, Coefficients,
    McEstimate, ModelParams, Position, SimConfig, SolverConfig, SweepParam, SweepRow, ThresholdPolicy, Thresholds,
    Trade, TradingRule, VerificationReport,
};
use serde::Serialize;

use crate::args::{
    BacktestArgs, CalibrateArgs, Format, PositionArg, SimulateArgs, SpreadSource, SweepArgs, ThresholdsArgs,
};
use crate::config::{self, FileConfig, Resolved};
use crate::exit::{Usage, OK, SOLVER};
use crate::output::{csv_row, emit, json, key_values, opt6, sig6, table};

fn solver_config(cfg: &Resolved) -> SolverConfig {
    SolverConfig {
        kernel: cfg.kernel,
        grid_n: cfg.grid,
    }
}

fn solve(cfg: &Resolved) -> anyhow::Result<ThresholdPolicy> {
    Ok(solve_policy(&cfg.params, &solver_config(cfg))?)
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

#[derive(Debug, Serialize)]
pub struct Bounds {
    /// `(ab - rho K)/(rho + a)`, the largest admissible `x1`.
    pub buy_bound: f64,
    /// `(ab + rho K)/(rho + a)`, the smallest admissible `x2`.
    pub sell_bound: f64,
    /// `(rho + a)|M|/rho`.
    pub value_bound: f64,
}

impl Bounds {
    fn of(p: &ModelParams) -> Self {
        Self {
            buy_bound: p.buy_bound(),
            sell_bound: p.sell_bound(),
            value_bound: p.value_bound(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ThresholdsDoc {
    pub config: Resolved,
    pub thresholds: Thresholds,
    pub coefficients: Coefficients,
    pub bounds: Bounds,
    pub verified: bool,
    pub verification: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<ValuePoint>>,
}

pub fn thresholds(cfg: &Resolved, args: &ThresholdsArgs, out: Option<&Path>) -> anyhow::Result<i32> {
    let policy = solve(cfg)?;
    let curve = match args.curve {
        Some(n) if n >= 2 => {
            let pv = policy.value_function()?;
            let hi = policy.x2 + 5.0 * cfg.params.stationary_sd();
            Some(pv.curve(&linspace(cfg.params.m, hi, n))?)
        }
        Some(n) => return Err(Usage(format!("--curve needs at least 2 points, got {n}")).into()),
        None => None,
    };
    let doc = ThresholdsDoc {
        config: cfg.clone(),
        thresholds: policy.thresholds(),
        coefficients: policy.coefficients,
        bounds: Bounds::of(&cfg.params),
        verified: policy.is_verified(),
        verification: policy.verification.clone(),
        curve,
    };
    let c = &doc.coefficients;
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => json(&doc)?,
        Format::Csv => {
            let mut s = csv_row(&["x0", "x1", "x2", "A2", "B1", "B2", "C1", "C2", "verified"].map(String::from));
            s += &csv_row(&[
                doc.thresholds.x0.to_string(),
                doc.thresholds.x1.to_string(),
                doc.thresholds.x2.to_string(),
                c.a2.to_string(),
                c.b1.to_string(),
                c.b2.to_string(),
                c.c1.to_string(),
                c.c2.to_string(),
                doc.verified.to_string(),
            ]);
            if let Some(curve) = &doc.curve {
                s += "\n";
                s += &csv_row(&["x", "v0", "v1"].map(String::from));
                for p in curve {
                    s += &csv_row(&[p.x.to_string(), p.v0.to_string(), p.v1.to_string()]);
                }
            }
            s
        }
        Format::Table => {
            let v = &doc.verification;
            let mut s = key_values(&[
                ("x0", sig6(doc.thresholds.x0)),
                ("x1", sig6(doc.thresholds.x1)),
                ("x2", sig6(doc.thresholds.x2)),
                ("A2", sig6(c.a2)),
                ("B", format!("{}  {}", sig6(c.b1), sig6(c.b2))),
                ("C", format!("{}  {}", sig6(c.c1), sig6(c.c2))),
                ("x1 bound", sig6(doc.bounds.buy_bound)),
                ("x2 bound", sig6(doc.bounds.sell_bound)),
                ("C0", sig6(doc.bounds.value_bound)),
                ("smooth fit", sig6(v.smoothfit_residuals.max())),
                ("min v0", sig6(v.v0_min)),
                ("verified", doc.verified.to_string()),
            ]);
            if let Some(curve) = &doc.curve {
                s += "\n";
                let rows: Vec<Vec<String>> = curve.iter().map(|p| vec![sig6(p.x), sig6(p.v0), sig6(p.v1)]).collect();
                s += &table(&["x", "v0", "v1"], &rows);
            }
            s
        }
    };
    emit(&text, out)?;
    Ok(if doc.verified { OK } else { SOLVER })
}

#[derive(Debug, Serialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub base: Resolved,
    pub vary: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepDoc {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
}

pub fn parse_values(raw: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if parts.is_empty() {
        return Err(Usage("--values must list at least one number".into()).into());
    }
    parts
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Usage(format!("--values: '{s}' is not a number")).into())
        })
        .collect()
}

pub fn sweep(cfg: &Resolved, args: &SweepArgs, out: Option<&Path>) -> anyhow::Result<i32> {
    let vary: SweepParam = args.vary.parse().map_err(Usage)?;
    let values = parse_values(&args.values)?;
    let rows = sensitivity_sweep(&cfg.params, vary, &values, &solver_config(cfg));
    let all_ok = rows.iter().all(|r| r.verified);
    let doc = SweepDoc {
        config: SweepConfig {
            base: cfg.clone(),
            vary,
            values,
        },
        rows,
    };
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => json(&doc)?,
        Format::Csv => {
            let mut s = csv_row(&[vary.name(), "x0", "x1", "x2", "verified"].map(String::from));
            let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for r in &doc.rows {
                s += &csv_row(&[r.value.to_string(), cell(r.x0), cell(r.x1), cell(r.x2), r.verified.to_string()]);
            }
            s
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = doc
                .rows
                .iter()
                .map(|r| {
                    vec![
                        sig6(r.value),
                        opt6(r.x0),
                        opt6(r.x1),
                        opt6(r.x2),
                        r.verified.to_string(),
                        r.error.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            table(&[vary.name(), "x0", "x1", "x2", "verified", "error"], &rows)
        }
    };
    emit(&text, out)?;
    Ok(if all_ok { OK } else { SOLVER })
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceDoc {
    pub leg1: Option<PathBuf>,
    pub leg2: Option<PathBuf>,
    pub spread: Option<PathBuf>,
    pub window: Option<usize>,
    pub dt: f64,
    pub observations: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

struct Loaded {
    spread: SpreadSeries,
    legs: Option<(PriceSeries, PriceSeries)>,
    doc: SourceDoc,
}

fn read_prices(path: &Path) -> anyhow::Result<PriceSeries> {
    PriceSeries::read_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn load_source(src: &SpreadSource, file: &FileConfig) -> anyhow::Result<Loaded> {
    let dt = src.dt.unwrap_or(1.0 / TRADING_DAYS);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Usage(format!("--dt must be positive, got {dt}")).into());
    }
    let legs = match (&src.leg1, &src.leg2) {
        (Some(p1), Some(p2)) => Some((read_prices(p1)?, read_prices(p2)?)),
        _ => None,
    };
    let (spread, window) = match (&src.spread, &legs) {
        (Some(path), _) => (
            SpreadSeries::read_csv(path, dt).with_context(|| format!("reading {}", path.display()))?,
            None,
        ),
        (None, Some((p1, p2))) => {
            let w = src.window.or(file.window).unwrap_or(config::DEFAULT_WINDOW);
            (build_spread(p1, p2, w, dt)?, Some(w))
        }
        (None, None) => return Err(Usage("give --leg1 and --leg2, or --spread".into()).into()),
    };
    let doc = SourceDoc {
        leg1: src.leg1.clone(),
        leg2: src.leg2.clone(),
        spread: src.spread.clone(),
        window,
        dt,
        observations: spread.len(),
        first_date: spread.dates[0],
        last_date: *spread.dates.last().expect("spread is non-empty"),
    };
    Ok(Loaded { spread, legs, doc })
}

#[derive(Debug, Serialize)]
pub struct CalibrateConfig {
    pub source: SourceDoc,
    pub min_len: usize,
}

#[derive(Debug, Serialize)]
pub struct CalibrateDoc {
    pub config: CalibrateConfig,
    pub fit: OuFit,
}

pub fn calibrate(cfg: &Resolved, args: &CalibrateArgs, file: &FileConfig, out: Option<&Path>) -> anyhow::Result<i32> {
    let loaded = load_source(&args.source, file)?;
    let opts = FitOptions {
        min_len: args.min_len.unwrap_or(FitOptions::default().min_len),
    };
    let fit = fit_ou(&loaded.spread, opts)?;
    let doc = CalibrateDoc {
        config: CalibrateConfig {
            source: loaded.doc,
            min_len: opts.min_len,
        },
        fit,
    };
    let rows = [("a", fit.a, fit.se_a), ("b", fit.b, fit.se_b), ("sigma", fit.sigma, fit.se_sigma)];
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => json(&doc)?,
        Format::Csv => {
            let mut s = csv_row(&["parameter", "estimate", "stderr"].map(String::from));
            for (n, v, e) in rows {
                s += &csv_row(&[n.to_string(), v.to_string(), e.to_string()]);
            }
            s
        }
        Format::Table => {
            let body: Vec<Vec<String>> = rows.iter().map(|(n, v, e)| vec![n.to_string(), sig6(*v), sig6(*e)]).collect();
            table(&["parameter", "estimate", "stderr"], &body)
        }
    };
    emit(&text, out)?;
    Ok(OK)
}

#[derive(Debug, Serialize)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub base: Resolved,
    pub seed: u64,
    pub dt: f64,
    pub x: f64,
    pub position: PositionArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ValuationDoc {
    pub config: SimulateConfig,
    pub thresholds: Thresholds,
    pub estimate: McEstimate,
    /// Closed-form value at the start point.
    pub analytic: f64,
}

#[derive(Debug, Serialize)]
pub struct SeriesPoint {
    pub date: NaiveDate,
    pub z: f64,
}

#[derive(Debug, Serialize)]
pub struct SeriesDoc {
    pub config: SimulateConfig,
    pub series: Vec<SeriesPoint>,
}

/// Calendar days from 2000-01-01, one per simulated step.
fn synthetic_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
}

pub fn simulate(cfg: &Resolved, args: &SimulateArgs, file: &FileConfig, out: Option<&Path>) -> anyhow::Result<i32> {
    let p = cfg.params;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let x = args.x.unwrap_or(p.b);
    let position = args.position.unwrap_or(PositionArg::Flat);

    if let Some(steps) = args.steps {
        let dt = args.dt.unwrap_or(1.0 / TRADING_DAYS);
        SimConfig::new(dt, 1.0)?;
        if steps == 0 {
            return Err(Usage("--steps must be positive".into()).into());
        }
        let z = simulate_ou_path(&p, x, steps, dt, seed);
        let dates = synthetic_dates(z.len());
        let config = SimulateConfig {
            base: cfg.clone(),
            seed,
            dt,
            x,
            position,
            paths: None,
            horizon: None,
            steps: Some(steps),
        };
        let text = match cfg.format.unwrap_or(Format::Csv) {
            Format::Json => json(&SeriesDoc {
                config,
                series: dates.iter().zip(&z).map(|(&date, &z)| SeriesPoint { date, z }).collect(),
            })?,
            Format::Csv | Format::Table => {
                let mut buf = Vec::new();
                SpreadSeries::new(dates, z, dt)?.write_csv(&mut buf)?;
                String::from_utf8(buf).context("series output")?
            }
        };
        emit(&text, out)?;
        return Ok(OK);
    }

    let dt = args.dt.or(file.dt).unwrap_or(config::DEFAULT_SIM_DT);
    let horizon = args.horizon.or(file.horizon).unwrap_or_else(|| default_horizon(p.rho));
    let paths = args.paths.or(file.paths).unwrap_or(config::DEFAULT_PATHS);
    let sim = SimConfig::new(dt, horizon)?;
    let policy = solve(cfg)?;
    if !policy.is_verified() {
        warn("the solved policy did not pass verification");
    }
    let pos = match position {
        PositionArg::Flat => Position::Flat,
        PositionArg::Long => Position::Long,
    };
    let estimate = mc_value(&TradingRule::from_policy(&policy), x, pos, paths, &sim, seed)?;
    let analytic = policy.value_function()?.eval(pos, x)?;
    let doc = ValuationDoc {
        config: SimulateConfig {
            base: cfg.clone(),
            seed,
            dt,
            x,
            position,
            paths: Some(paths),
            horizon: Some(horizon),
            steps: None,
        },
        thresholds: policy.thresholds(),
        estimate,
        analytic,
    };
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => json(&doc)?,
        Format::Csv => {
            let mut s = csv_row(&["x", "position", "paths", "dt", "mean", "stderr", "analytic"].map(String::from));
            s += &csv_row(&[
                x.to_string(),
                format!("{position:?}").to_lowercase(),
                paths.to_string(),
                dt.to_string(),
                estimate.mean.to_string(),
                estimate.stderr.to_string(),
                analytic.to_string(),
            ]);
            s
        }
        Format::Table => key_values(&[
            ("start", format!("{} ({})", sig6(x), format!("{position:?}").to_lowercase())),
            ("paths", paths.to_string()),
            ("dt", sig6(dt)),
            ("mean", sig6(estimate.mean)),
            ("stderr", sig6(estimate.stderr)),
            ("analytic", sig6(analytic)),
        ]),
    };
    emit(&text, out)?;
    Ok(OK)
}

#[derive(Debug, Serialize)]
pub struct BacktestRunConfig {
    #[serde(flatten)]
    pub base: Resolved,
    pub source: SourceDoc,
    pub thresholds_given: bool,
    pub reverse: bool,
    pub backtest: BacktestConfig,
}

#[derive(Debug, Serialize)]
pub struct BacktestSummaryDoc<'a> {
    pub config: &'a BacktestRunConfig,
    pub summary: Summary,
}

#[derive(Debug, Serialize)]
pub struct BacktestDoc<'a> {
    pub config: &'a BacktestRunConfig,
    pub summary: Summary,
    pub trades: &'a [Trade],
    pub equity_curve: &'a [EquityPoint],
}

pub fn backtest(cfg: &Resolved, args: &BacktestArgs, file: &FileConfig, out: Option<&Path>) -> anyhow::Result<i32> {
    let loaded = load_source(&args.source, file)?;
    let Some((leg1, leg2)) = loaded.legs else {
        return Err(Usage("backtest needs --leg1 and --leg2 price files".into()).into());
    };
    let given = match (args.x0, args.x1, args.x2) {
        (Some(x0), Some(x1), Some(x2)) => Some(Thresholds { x0, x1, x2 }),
        _ => None,
    };
    let thresholds = match given {
        Some(t) => t,
        None => {
            let policy = solve(cfg)?;
            if !policy.is_verified() {
                warn("the solved policy did not pass verification");
            }
            policy.thresholds()
        }
    };
    let mut bt = BacktestConfig::new(
        thresholds,
        cfg.params.m,
        args.capital.or(file.capital).unwrap_or(config::DEFAULT_CAPITAL),
        args.commission.or(file.commission).unwrap_or(config::DEFAULT_COMMISSION),
    );
    bt.reentry_after_stop = !args.no_reentry;
    bt.reinvest = !args.no_reinvest;
    bt.validate()?;

    let (spread, long_leg, short_leg) = if args.reverse {
        if cfg.params.b != 0.0 {
            warn("reversing a spread with b != 0; the rule is only symmetric about b = 0");
        }
        (reverse_spread(&loaded.spread), &leg2, &leg1)
    } else {
        (loaded.spread, &leg1, &leg2)
    };
    let report = run_backtest(&bt, &spread, long_leg, short_leg)?;
    let run_config = BacktestRunConfig {
        base: cfg.clone(),
        source: loaded.doc,
        thresholds_given: given.is_some(),
        reverse: args.reverse,
        backtest: bt,
    };

    let format = cfg.format.unwrap_or(Format::Json);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))
        };
        write_trades_csv(&report.trades, create("trades.csv")?)?;
        write_equity_csv(&report.equity_curve, create("equity.csv")?)?;
        let summary = json(&BacktestSummaryDoc {
            config: &run_config,
            summary: report.summary,
        })?;
        emit(&summary, Some(&dir.join("summary.json")))?;
    }

    let text = match format {
        Format::Json => json(&BacktestDoc {
            config: &run_config,
            summary: report.summary,
            trades: &report.trades,
            equity_curve: &report.equity_curve,
        })?,
        Format::Csv => {
            let mut buf = Vec::new();
            write_trades_csv(&report.trades, &mut buf)?;
            String::from_utf8(buf).context("trade log output")?
        }
        Format::Table => {
            let s = &report.summary;
            let mut text = key_values(&[
                ("trades", s.trade_count.to_string()),
                ("initial capital", sig6(s.initial_capital)),
                ("end balance", sig6(s.end_balance)),
                ("max drawdown", format!("{} ({})", sig6(s.max_drawdown), sig6(s.max_drawdown_amount))),
            ]);
            if !report.trades.is_empty() {
                text += "\n";
                let rows: Vec<Vec<String>> = report
                    .trades
                    .iter()
                    .map(|t| {
                        vec![
                            t.entry_date.to_string(),
                            t.exit_date.to_string(),
                            sig6(t.entry_z),
                            sig6(t.exit_z),
                            serde_json::to_value(t.exit_reason)
                                .ok()
                                .and_then(|v| v.as_str().map(String::from))
                                .unwrap_or_default(),
                            sig6(t.profit),
                        ]
                    })
                    .collect();
                text += &table(&["entry", "exit", "entry z", "exit z", "reason", "profit"], &rows);
            }
            text
        }
    };
    // With --out the files are the output; stdout still gets the chosen view.
    emit(&text, None)?;
    Ok(OK)
}
