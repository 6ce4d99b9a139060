//! Out-of-sample comparison of a policy against the deterministic rules.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{Strategy, StrategyKind};
use crate::error::{Error, Result};
use crate::esg::ScenarioPanel;
use crate::policy_net::{MlpParams, Normalization};
use crate::transition::{
    evaluate_path, record_path, Controller, Environment, PathRecord, PathView, PolicyController,
};

fn check_panel(env: &Environment, panel: &ScenarioPanel) -> Result<()> {
    if panel.horizon() < env.horizon() {
        return Err(Error::Config(format!(
            "test panel horizon {} shorter than the retirement horizon {}",
            panel.horizon(),
            env.horizon()
        )));
    }
    Ok(())
}

/// Realized utility of `controller` on every path of `panel`.
pub fn utilities<C: Controller<f64> + Sync + ?Sized>(
    env: &Environment,
    controller: &C,
    panel: &ScenarioPanel,
) -> Result<Vec<f64>> {
    check_panel(env, panel)?;
    (0..panel.paths())
        .into_par_iter()
        .map(|m| evaluate_path(env, controller, PathView::from_panel(panel, m)))
        .collect()
}

/// Full records of `controller` on every path of `panel`.
pub fn records<C: Controller<f64> + Sync + ?Sized>(
    env: &Environment,
    controller: &C,
    panel: &ScenarioPanel,
) -> Result<Vec<PathRecord>> {
    check_panel(env, panel)?;
    (0..panel.paths())
        .into_par_iter()
        .map(|m| record_path(env, controller, PathView::from_panel(panel, m)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub kind: StrategyKind,
    pub utilities: Vec<f64>,
    /// Paths on which the policy's utility is strictly higher.
    pub outperformed: usize,
    /// `U_policy - U_strategy` per path.
    pub differences: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy_utilities: Vec<f64>,
    pub strategies: Vec<StrategyComparison>,
}

impl EvalReport {
    pub fn paths(&self) -> usize {
        self.policy_utilities.len()
    }

    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategyComparison> {
        self.strategies.iter().find(|s| s.kind == kind)
    }

    pub fn mean_policy_utility(&self) -> f64 {
        mean(&self.policy_utilities)
    }

    /// `path,strategy,utility` rows; the policy is labelled `dnn`.
    pub fn write_utilities_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<utilities csv>", std::io::Error::other(e));
        w.write_record(["path", "strategy", "utility"]).map_err(err)?;
        for (m, u) in self.policy_utilities.iter().enumerate() {
            w.write_record([m.to_string(), "dnn".into(), format!("{u:?}")]).map_err(err)?;
        }
        for s in &self.strategies {
            for (m, u) in s.utilities.iter().enumerate() {
                w.write_record([m.to_string(), s.kind.name().into(), format!("{u:?}")])
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<utilities csv>", e))
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Utilities of the policy and of each strategy on the same panel.
pub fn compare<C: Controller<f64> + Sync + ?Sized>(
    env: &Environment,
    policy: &C,
    strategies: &[Strategy],
    panel: &ScenarioPanel,
) -> Result<EvalReport> {
    let policy_utilities = utilities(env, policy, panel)?;
    let strategies = strategies
        .iter()
        .map(|s| {
            let u = utilities(env, s, panel)?;
            Ok(compare_against(s.kind, &policy_utilities, u))
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        policy_utilities,
        strategies,
    })
}

fn compare_against(kind: StrategyKind, policy: &[f64], utilities: Vec<f64>) -> StrategyComparison {
    let differences: Vec<f64> = policy.iter().zip(&utilities).map(|(p, s)| p - s).collect();
    StrategyComparison {
        kind,
        outperformed: differences.iter().filter(|d| **d > 0.0).count(),
        differences,
        utilities,
    }
}

/// `(iteration, strategy, outperformed paths)` triples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutperformanceCurve {
    pub rows: Vec<(usize, StrategyKind, usize)>,
}

impl OutperformanceCurve {
    pub fn counts(&self, kind: StrategyKind) -> Vec<(usize, usize)> {
        self.rows
            .iter()
            .filter(|r| r.1 == kind)
            .map(|r| (r.0, r.2))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<outperformance csv>", std::io::Error::other(e));
        w.write_record(["iter", "strategy", "count"]).map_err(err)?;
        for (iter, kind, count) in &self.rows {
            w.write_record([iter.to_string(), kind.name().into(), count.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<outperformance csv>", e))
    }
}

/// Outperformance counts for each snapshot of a training run.
pub fn outperformance_curve(
    env: &Environment,
    norm: &Normalization,
    snapshots: &[(usize, MlpParams)],
    strategies: &[Strategy],
    panel: &ScenarioPanel,
) -> Result<OutperformanceCurve> {
    if snapshots.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Config("snapshots must be in ascending iteration order".into()));
    }
    let baseline: Vec<(StrategyKind, Vec<f64>)> = strategies
        .iter()
        .map(|s| Ok((s.kind, utilities(env, s, panel)?)))
        .collect::<Result<_>>()?;
    let mut curve = OutperformanceCurve::default();
    for (iter, params) in snapshots {
        let ctl = PolicyController { params, norm: *norm };
        let u = utilities(env, &ctl, panel)?;
        for (kind, b) in &baseline {
            let count = u.iter().zip(b).filter(|(p, s)| p > s).count();
            curve.rows.push((*iter, *kind, count));
        }
    }
    Ok(curve)
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let m = mean(samples);
    let sd = (samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.0,
    };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-6 * sorted[0].abs().max(1.0)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Gaussian-kernel density of `samples` at each point of `grid`.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("density estimate needs at least two samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite sample".into()));
    }
    let h = silverman_bandwidth(samples);
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .par_iter()
        .map(|&x| {
            samples
                .iter()
                .map(|s| (-0.5 * ((x - s) / h).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Evenly spaced grid covering `samples` with three bandwidths of margin.
pub fn default_grid(samples: &[f64], points: usize) -> Vec<f64> {
    let h = silverman_bandwidth(samples);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| lo + step * i as f64).collect()
}

/// Density of `log10` of the positive utility differences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogDensity {
    /// Grid in `log10` units.
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub non_positive: usize,
    /// True when fewer than two differences are positive.
    pub empty: bool,
}

impl LogDensity {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<kde csv>", std::io::Error::other(e));
        w.write_record(["x", "density"]).map_err(err)?;
        for (x, d) in self.x.iter().zip(&self.density) {
            w.write_record([format!("{x:?}"), format!("{d:?}")]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<kde csv>", e))
    }
}

pub fn log_kde(differences: &[f64], points: usize) -> Result<LogDensity> {
    let logs: Vec<f64> = differences
        .iter()
        .filter(|d| **d > 0.0)
        .map(|d| d.log10())
        .collect();
    let non_positive = differences.len() - logs.len();
    if logs.len() < 2 {
        return Ok(LogDensity {
            non_positive,
            empty: true,
            ..Default::default()
        });
    }
    let x = default_grid(&logs, points);
    let density = kde(&logs, &x)?;
    Ok(LogDensity {
        x,
        density,
        non_positive,
        empty: false,
    })
}

/// Per-age medians of real consumption and wealth across paths.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MedianPaths {
    pub ages: Vec<u32>,
    pub consumption: Vec<f64>,
    pub wealth: Vec<f64>,
    /// Median consumption over median wealth.
    pub consumption_rate: Vec<f64>,
}

impl MedianPaths {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<medians csv>", std::io::Error::other(e));
        w.write_record(["age", "consumption", "wealth", "consumption_rate"]).map_err(err)?;
        for i in 0..self.ages.len() {
            w.write_record([
                self.ages[i].to_string(),
                format!("{:?}", self.consumption[i]),
                format!("{:?}", self.wealth[i]),
                format!("{:?}", self.consumption_rate[i]),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<medians csv>", e))
    }
}

pub fn median_paths(records: &[PathRecord]) -> Result<MedianPaths> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientData("no rollouts to summarise".into()))?;
    let len = first.ages.len();
    if records.iter().any(|r| r.ages.len() != len) {
        return Err(Error::Dimension("rollouts differ in length".into()));
    }
    let mut out = MedianPaths {
        ages: first.ages.clone(),
        ..Default::default()
    };
    for t in 0..len {
        let c: Vec<f64> = records.iter().map(|r| r.consumption[t]).collect();
        let w: Vec<f64> = records.iter().map(|r| r.wealth[t]).collect();
        let (mc, mw) = (median(&c), median(&w));
        out.consumption.push(mc);
        out.wealth.push(mw);
        out.consumption_rate.push(if mw > 0.0 { mc / mw } else { f64::INFINITY });
    }
    Ok(out)
}
