//! Single-period benchmark allocators: mean-variance, mean absolute deviation
//! and parametric CVaR frontiers, utility-based point selection with a
//! lending fallback, and the equal-weight market baseline.
//!
//! Benchmarks are long-only: frontier weights are non-negative, sum to at
//! most one, and the remainder is lent out.

use std::cmp::Ordering;
use std::io::Write;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{NonnegativeConeT, SecondOrderConeT},
};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::data::MarketFrame;
use crate::env::WeightVector;

#[derive(Debug, Error, PartialEq)]
pub enum SppoError {
    #[error("return window too short: {0} rows (need at least 2)")]
    WindowTooShort(usize),
    #[error("weights have {got} entries, sample has {expected} assets")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("solver did not converge at target return {target:e}: {status}")]
    SolverFailure { target: f64, status: String },
    #[error("empty frontier")]
    EmptyFrontier,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, SppoError>;

/// Trailing window of simple returns, `rows x assets`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSample {
    rows: usize,
    assets: usize,
    data: Vec<f64>,
}

impl ReturnSample {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(SppoError::WindowTooShort(n));
        }
        let m = rows[0].len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(SppoError::Degenerate("ragged or empty rows".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SppoError::Degenerate("non-finite return".into()));
        }
        Ok(ReturnSample {
            rows: n,
            assets: m,
            data,
        })
    }

    /// Close-to-close returns for the `window` intervals ending at `end_row`
    /// (fewer when the frame starts earlier).
    pub fn from_frame(frame: &MarketFrame, end_row: usize, window: usize) -> Result<Self> {
        let first = end_row.saturating_sub(window).max(0) + 1;
        let rows: Vec<Vec<f64>> = (first..=end_row.min(frame.len().saturating_sub(1)))
            .map(|t| frame.step_returns(t - 1))
            .collect();
        ReturnSample::new(rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    #[inline]
    pub fn get(&self, t: usize, asset: usize) -> f64 {
        self.data[t * self.assets + asset]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.assets..(t + 1) * self.assets]
    }

    pub fn means(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.assets];
        for t in 0..self.rows {
            for (m, r) in mu.iter_mut().zip(self.row(t)) {
                *m += r;
            }
        }
        mu.iter_mut().for_each(|m| *m /= self.rows as f64);
        mu
    }

    /// Returns minus their column means.
    fn centered(&self) -> Vec<Vec<f64>> {
        let mu = self.means();
        (0..self.rows)
            .map(|t| self.row(t).iter().zip(&mu).map(|(r, m)| r - m).collect())
            .collect()
    }

    /// Sample covariance (denominator `rows - 1`).
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let c = self.centered();
        let m = self.assets;
        let mut cov = vec![vec![0.0; m]; m];
        for row in &c {
            for i in 0..m {
                for j in i..m {
                    cov[i][j] += row[i] * row[j];
                }
            }
        }
        let denom = (self.rows - 1) as f64;
        for i in 0..m {
            for j in i..m {
                cov[i][j] /= denom;
                cov[j][i] = cov[i][j];
            }
        }
        cov
    }

    /// Weighted portfolio return per row.
    pub fn portfolio_series(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|t| self.row(t).iter().zip(weights).map(|(r, w)| r * w).sum())
            .collect()
    }

    /// Groups (size >= 2) of assets whose return columns are identical.
    pub fn identical_groups(&self) -> Vec<Vec<usize>> {
        let same = |a: usize, b: usize| (0..self.rows).all(|t| self.get(t, a) == self.get(t, b));
        let mut seen = vec![false; self.assets];
        let mut groups = Vec::new();
        for a in 0..self.assets {
            if seen[a] {
                continue;
            }
            let group: Vec<usize> = (a..self.assets).filter(|&b| !seen[b] && same(a, b)).collect();
            group.iter().for_each(|&b| seen[b] = true);
            if group.len() > 1 {
                groups.push(group);
            }
        }
        groups
    }

    fn check(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.assets {
            return Err(SppoError::DimensionMismatch {
                expected: self.assets,
                got: weights.len(),
            });
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Portfolio variance from per-asset standard deviations and pairwise
/// correlations: `sum w_i^2 s_i^2 + sum_{i != j} w_i w_j s_i s_j rho_ij`.
pub fn portfolio_variance(weights: &[f64], sample: &ReturnSample) -> Result<f64> {
    sample.check(weights)?;
    let cov = sample.covariance();
    let sd: Vec<f64> = (0..sample.assets).map(|i| cov[i][i].sqrt()).collect();
    let mut var = 0.0;
    for i in 0..sample.assets {
        var += weights[i] * weights[i] * sd[i] * sd[i];
        for j in 0..sample.assets {
            if j == i || sd[i] == 0.0 || sd[j] == 0.0 {
                continue;
            }
            let rho = cov[i][j] / (sd[i] * sd[j]);
            var += weights[i] * weights[j] * sd[i] * sd[j] * rho;
        }
    }
    Ok(var.max(0.0))
}

/// Mean absolute deviation of the weighted portfolio return series.
pub fn portfolio_mad(weights: &[f64], sample: &ReturnSample) -> Result<f64> {
    sample.check(weights)?;
    let series = sample.portfolio_series(weights);
    let mu = mean(&series);
    Ok(series.iter().map(|r| (r - mu).abs()).sum::<f64>() / series.len() as f64)
}

/// The asset-level form: average over assets of `|mean(r_i) - mean(r_P)|`.
pub fn portfolio_mad_asset_form(weights: &[f64], sample: &ReturnSample) -> Result<f64> {
    sample.check(weights)?;
    let mu = sample.means();
    let port: f64 = mu.iter().zip(weights).map(|(m, w)| m * w).sum();
    Ok(mu.iter().map(|m| (m - port).abs()).sum::<f64>() / mu.len() as f64)
}

/// Standard normal quantile at `alpha` and the CVaR tail factor
/// `phi(z) / (1 - alpha)`.
pub fn normal_tail_factors(alpha: f64) -> (f64, f64) {
    let z = Normal::standard().inverse_cdf(alpha);
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (z, phi / (1.0 - alpha))
}

/// Parametric-normal VaR and CVaR of loss for returns with mean `mu` and
/// standard deviation `sigma`.
pub fn normal_var_cvar(mu: f64, sigma: f64, alpha: f64) -> (f64, f64) {
    let (z, k) = normal_tail_factors(alpha);
    (-(mu - z * sigma), -mu + sigma * k)
}

/// Parametric-normal CVaR (a loss magnitude) of the weighted return series.
pub fn portfolio_cvar(weights: &[f64], sample: &ReturnSample, alpha: f64) -> Result<f64> {
    sample.check(weights)?;
    let series = sample.portfolio_series(weights);
    Ok(normal_var_cvar(mean(&series), sample_std(&series), alpha).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMeasure {
    Mv,
    Mad,
    Cvar,
}

impl RiskMeasure {
    pub fn label(self) -> &'static str {
        match self {
            RiskMeasure::Mv => "MV",
            RiskMeasure::Mad => "MAD",
            RiskMeasure::Cvar => "CVaR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MadForm {
    /// Deviation of the weighted portfolio series around its mean.
    Portfolio,
    /// Deviation of each asset's mean return from the portfolio mean.
    Asset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SppoConfig {
    pub measure: RiskMeasure,
    pub alpha: f64,
    pub risk_aversion: f64,
    pub window: usize,
    pub frontier_points: usize,
    pub mad_form: MadForm,
}

impl Default for SppoConfig {
    fn default() -> Self {
        SppoConfig {
            measure: RiskMeasure::Mv,
            alpha: 0.95,
            risk_aversion: 4.0,
            window: 180,
            frontier_points: 50,
            mad_form: MadForm::Portfolio,
        }
    }
}

impl SppoConfig {
    pub fn with_measure(measure: RiskMeasure) -> Self {
        SppoConfig {
            measure,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SppoError::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        if !(self.risk_aversion > 0.0) {
            return Err(SppoError::InvalidConfig("risk_aversion must be > 0".into()));
        }
        if self.window < 2 || self.frontier_points == 0 {
            return Err(SppoError::InvalidConfig(
                "window must be >= 2 and frontier_points >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn risk(&self, weights: &[f64], sample: &ReturnSample) -> Result<f64> {
        match (self.measure, self.mad_form) {
            (RiskMeasure::Mv, _) => portfolio_variance(weights, sample),
            (RiskMeasure::Mad, MadForm::Portfolio) => portfolio_mad(weights, sample),
            (RiskMeasure::Mad, MadForm::Asset) => portfolio_mad_asset_form(weights, sample),
            (RiskMeasure::Cvar, _) => portfolio_cvar(weights, sample, self.alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub weights: Vec<f64>,
    pub expected_return: f64,
    pub risk: f64,
}

impl FrontierPoint {
    pub fn utility(&self, risk_aversion: f64) -> f64 {
        self.expected_return - risk_aversion * self.risk
    }

    pub fn invested(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Conic program in clarabel's `min 1/2 x'Px + q'x  s.t. Ax + s = b, s in K` form.
struct ConicProblem {
    n: usize,
    p: Vec<Vec<f64>>,
    q: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    nonneg_rows: usize,
    soc_dim: Option<usize>,
}

impl ConicProblem {
    fn new(n: usize) -> Self {
        ConicProblem {
            n,
            p: vec![vec![0.0; n]; n],
            q: vec![0.0; n],
            a: Vec::new(),
            b: Vec::new(),
            nonneg_rows: 0,
            soc_dim: None,
        }
    }

    /// Adds `row . x <= rhs`. All inequality rows must precede the cone block.
    fn leq(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert!(self.soc_dim.is_none());
        self.a.push(row);
        self.b.push(rhs);
        self.nonneg_rows += 1;
    }

    /// Long-only budget constraints on the first `m` variables and an
    /// optional minimum expected return.
    fn budget(&mut self, mu: &[f64], target: Option<f64>, scaling: Scaling) {
        let m = mu.len();
        for i in 0..m {
            let mut row = vec![0.0; self.n];
            row[i] = -1.0;
            self.leq(row, 0.0);
        }
        let mut sum = vec![0.0; self.n];
        sum[..m].iter_mut().for_each(|v| *v = 1.0);
        self.leq(sum, 1.0);
        if let Some(target) = target {
            let scale = match scaling {
                Scaling::Default => max_abs(mu.iter().copied()),
                Scaling::TopReturn => {
                    let top = mu.iter().fold(0.0_f64, |a, &v| a.max(v));
                    if top > 0.0 {
                        top
                    } else {
                        max_abs(mu.iter().copied())
                    }
                }
                Scaling::Off => 1.0,
            };
            let mut row = vec![0.0; self.n];
            for (r, v) in row.iter_mut().zip(mu) {
                *r = -v / scale;
            }
            self.leq(row, -target / scale);
        }
    }

    fn solve(self, target: f64) -> Result<Option<Vec<f64>>> {
        let upper: Vec<Vec<f64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| if j >= i { self.p[i][j] } else { 0.0 }).collect())
            .collect();
        let p = CscMatrix::from(&upper);
        let a = CscMatrix::from(&self.a);
        let mut cones: Vec<SupportedConeT<f64>> = vec![NonnegativeConeT(self.nonneg_rows)];
        if let Some(d) = self.soc_dim {
            cones.push(SecondOrderConeT(d));
        }
        let settings = DefaultSettings {
            verbose: false,
            max_iter: 400,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &self.b, &cones, settings).map_err(|e| {
            SppoError::SolverFailure {
                target,
                status: e.to_string(),
            }
        })?;
        solver.solve();
        match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(Some(solver.solution.x.clone())),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(None),
            status => Err(SppoError::SolverFailure {
                target,
                status: format!("{status:?}"),
            }),
        }
    }
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    let m = values.into_iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Row scalings tried in turn; the interior-point iteration occasionally
/// stalls on one of them and converges on another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scaling {
    Default,
    TopReturn,
    Off,
}

fn build_problem(sample: &ReturnSample, config: &SppoConfig, target: Option<f64>, scaling: Scaling) -> ConicProblem {
    let m = sample.assets();
    let t = sample.rows();
    let mu = sample.means();
    let unscaled = scaling == Scaling::Off;
    let scaled = |v: f64| if unscaled { 1.0 } else { v };
    match (config.measure, config.mad_form) {
        (RiskMeasure::Mv, _) => {
            let cov = sample.covariance();
            let scale = scaled(max_abs((0..m).map(|i| cov[i][i])));
            let mut pr = ConicProblem::new(m);
            for i in 0..m {
                for j in 0..m {
                    pr.p[i][j] = 2.0 * cov[i][j] / scale;
                }
            }
            pr.budget(&mu, target, scaling);
            pr
        }
        (RiskMeasure::Mad, MadForm::Portfolio) => {
            // x = [w, d]; d_t >= |a_t . w| with a_t the centered returns
            let centered = sample.centered();
            let scale = scaled(max_abs(centered.iter().flatten().copied()));
            let mut pr = ConicProblem::new(m + t);
            pr.q[m..].iter_mut().for_each(|q| *q = 1.0 / t as f64);
            for (k, a) in centered.iter().enumerate() {
                for sign in [1.0, -1.0] {
                    let mut row = vec![0.0; m + t];
                    for i in 0..m {
                        row[i] = sign * a[i] / scale;
                    }
                    row[m + k] = -1.0;
                    pr.leq(row, 0.0);
                }
            }
            pr.budget(&mu, target, scaling);
            pr
        }
        (RiskMeasure::Mad, MadForm::Asset) => {
            // x = [w, d]; d_i >= |mu_i - mu . w|
            let scale = scaled(max_abs(mu.iter().copied()));
            let mut pr = ConicProblem::new(2 * m);
            pr.q[m..].iter_mut().for_each(|q| *q = 1.0 / m as f64);
            for k in 0..m {
                for sign in [1.0, -1.0] {
                    let mut row = vec![0.0; 2 * m];
                    for i in 0..m {
                        row[i] = -sign * mu[i] / scale;
                    }
                    row[m + k] = -1.0;
                    pr.leq(row, -sign * mu[k] / scale);
                }
            }
            pr.budget(&mu, target, scaling);
            pr
        }
        (RiskMeasure::Cvar, _) => {
            // x = [w, s]; minimize -mu.w + k s with s >= ||D w|| / sqrt(T-1)
            let (_, k) = normal_tail_factors(config.alpha);
            let centered = sample.centered();
            let norm = ((t - 1) as f64).sqrt();
            let cov = sample.covariance();
            let scale = scaled(max_abs(
                mu.iter()
                    .copied()
                    .chain((0..m).map(|i| k * cov[i][i].sqrt())),
            ));
            let mut pr = ConicProblem::new(m + 1);
            for i in 0..m {
                pr.q[i] = -mu[i] / scale;
            }
            pr.q[m] = k / scale;
            pr.budget(&mu, target, scaling);
            let mut head = vec![0.0; m + 1];
            head[m] = -1.0;
            pr.a.push(head);
            pr.b.push(0.0);
            for row in &centered {
                let mut r = vec![0.0; m + 1];
                for i in 0..m {
                    r[i] = -row[i] / norm;
                }
                pr.a.push(r);
                pr.b.push(0.0);
            }
            pr.soc_dim = Some(t + 1);
            pr
        }
    }
}

fn solve_weights(sample: &ReturnSample, config: &SppoConfig, target: Option<f64>) -> Result<Option<Vec<f64>>> {
    let m = sample.assets();
    let label = target.unwrap_or(f64::NEG_INFINITY);
    let mut outcome = Ok(None);
    for scaling in [Scaling::Default, Scaling::TopReturn, Scaling::Off] {
        outcome = build_problem(sample, config, target, scaling).solve(label);
        if outcome.is_ok() {
            break;
        }
    }
    let Some(x) = outcome? else {
        return Ok(None);
    };
    let mut w: Vec<f64> = x[..m].iter().map(|v| v.max(0.0)).collect();
    // identical assets are interchangeable: split their weight evenly
    for group in sample.identical_groups() {
        let avg = group.iter().map(|&i| w[i]).sum::<f64>() / group.len() as f64;
        group.iter().for_each(|&i| w[i] = avg);
    }
    let total: f64 = w.iter().sum();
    if total > 1.0 {
        w.iter_mut().for_each(|v| *v /= total);
    }
    Ok(Some(w))
}

fn make_point(weights: Vec<f64>, sample: &ReturnSample, config: &SppoConfig) -> Result<FrontierPoint> {
    let mu = sample.means();
    Ok(FrontierPoint {
        expected_return: weights.iter().zip(&mu).map(|(w, m)| w * m).sum(),
        risk: config.risk(&weights, sample)?,
        weights,
    })
}

/// Highest expected return reachable with `w >= 0, sum w <= 1`.
pub fn max_achievable_return(sample: &ReturnSample) -> f64 {
    sample.means().into_iter().fold(0.0, f64::max)
}

/// Minimum-risk long-only portfolio whose expected return is at least
/// `target` (unconstrained when `None`). `Ok(None)` when the target is out of reach.
pub fn min_risk_portfolio(
    sample: &ReturnSample,
    config: &SppoConfig,
    target: Option<f64>,
) -> Result<Option<FrontierPoint>> {
    config.validate()?;
    if let Some(t) = target {
        let top = max_achievable_return(sample);
        if t > top + 1e-12 * top.abs().max(1e-12) {
            return Ok(None);
        }
    }
    match solve_weights(sample, config, target)? {
        Some(w) => Ok(Some(make_point(w, sample, config)?)),
        None => Ok(None),
    }
}

/// Sweeps `frontier_points` return targets from the minimum-risk portfolio's
/// return up to the largest achievable mean return.
pub fn efficient_frontier(sample: &ReturnSample, config: &SppoConfig) -> Result<Vec<FrontierPoint>> {
    let base = min_risk_portfolio(sample, config, None)?
        .ok_or_else(|| SppoError::Degenerate("unconstrained problem infeasible".into()))?;
    let lo = base.expected_return;
    let hi = max_achievable_return(sample);
    let n = config.frontier_points;
    let mut points = vec![base];
    let span = hi - lo;
    if n < 2 || !(span > 1e-12 * hi.abs().max(1e-12)) {
        return Ok(points);
    }
    for k in 1..n {
        let frac = if k == n - 1 { 1.0 - 1e-7 } else { k as f64 / (n - 1) as f64 };
        match min_risk_portfolio(sample, config, Some(lo + span * frac))? {
            Some(p) => points.push(p),
            None => break,
        }
    }
    Ok(points)
}

/// Utility of lending everything for one interval (zero risk).
pub fn cash_utility(lend_rate: f64, interval_hours: f64) -> f64 {
    lend_rate * interval_hours / crate::env::HOURS_PER_YEAR
}

pub fn equal_weight_action(m: usize) -> WeightVector {
    assert!(m >= 1, "need at least one asset");
    WeightVector {
        asset_weights: vec![1.0 / m as f64; m],
        loan_weight: 0.0,
    }
}

/// Lend the whole portfolio: no deployable capital, the asset block is the
/// projection of a zero block.
pub fn cash_action(m: usize) -> WeightVector {
    WeightVector {
        asset_weights: vec![1.0 / m as f64; m],
        loan_weight: 1.0,
    }
}

fn rank_points(a: &FrontierPoint, b: &FrontierPoint, aversion: f64) -> Ordering {
    // best first: higher utility, then lower risk, then weights
    b.utility(aversion)
        .total_cmp(&a.utility(aversion))
        .then(a.risk.total_cmp(&b.risk))
        .then_with(|| {
            a.weights
                .iter()
                .zip(&b.weights)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Picks the frontier point with the highest `return - aversion * risk`,
/// or lends everything when that utility is below `cash_utility`.
pub fn select_weights(frontier: &[FrontierPoint], config: &SppoConfig, cash_utility: f64) -> Result<WeightVector> {
    let m = frontier.first().ok_or(SppoError::EmptyFrontier)?.weights.len();
    let best = frontier
        .iter()
        .min_by(|a, b| rank_points(a, b, config.risk_aversion))
        .expect("non-empty");
    let invested = best.invested().min(1.0);
    if best.utility(config.risk_aversion) < cash_utility || invested <= 1e-12 {
        return Ok(cash_action(m));
    }
    let total: f64 = best.weights.iter().sum();
    Ok(WeightVector {
        asset_weights: best.weights.iter().map(|w| w / total).collect(),
        loan_weight: (1.0 - invested).max(0.0),
    })
}

/// Rebalancing rule for a backtest: estimate on the trailing window ending
/// at `row`, build the frontier and select.
pub fn sppo_decision(frame: &MarketFrame, row: usize, config: &SppoConfig, cash_utility: f64) -> Result<WeightVector> {
    match ReturnSample::from_frame(frame, row, config.window) {
        Ok(sample) => {
            let frontier = efficient_frontier(&sample, config)?;
            select_weights(&frontier, config, cash_utility)
        }
        Err(SppoError::WindowTooShort(_)) => Ok(cash_action(frame.n_assets())),
        Err(e) => Err(e),
    }
}

/// Writes `target_return,risk,w_<SYM>...`.
pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], symbols: &[String], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["target_return".to_string(), "risk".to_string()];
    header.extend(symbols.iter().map(|s| format!("w_{s}")));
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.expected_return.to_string(), p.risk.to_string()];
        row.extend(p.weights.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
