//! Seven-factor cascading economic scenario generator.
//!
//! Each year is generated in the order inflation → short rate → domestic
//! equity → international equity → domestic bond → international bond →
//! house prices, with later factors regressing on factors already drawn for
//! the same year:
//!
//! ```text
//! q  = (1 - phi_q) mu_q + phi_q q[-1] + eps_q
//! S  = phi_S S[-1] + (1 - phi_S)(mu_S - mu_q) + eps_S,    s = S + q
//! e  = phi_e e[-1] + (1 - phi_e) mu_e + eps_e
//! n  = psi_n0 + psi_n1 n[-1] + psi_n2 e + eps_n
//! b  = psi_b0 + psi_b1 b[-1] + psi_b2 n[-1] + eps_b
//! o  = psi_o0 + psi_o1 e + psi_o2 n + eps_o
//! h  = psi_h0 + psi_h1 b + psi_h2 q + eps_h
//! ```
//!
//! Shocks are independent normals. Every path draws from its own ChaCha
//! stream keyed by `(seed, path)`, so panels do not depend on the order in
//! which paths are generated.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::account::compound_deflators;
use crate::error::{Error, Result};

/// Coefficients of the seven recurrences (annual, dimensionless).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsgParams {
    pub mu_q: f64,
    pub phi_q: f64,
    pub sigma_q: f64,
    /// Long-run nominal short rate; the real component reverts to `mu_s - mu_q`.
    pub mu_s: f64,
    pub phi_s: f64,
    pub sigma_s: f64,
    pub mu_e: f64,
    pub phi_e: f64,
    pub sigma_e: f64,
    pub psi_n0: f64,
    /// On last year's international equity return.
    pub psi_n1: f64,
    /// On this year's domestic equity return.
    pub psi_n2: f64,
    pub sigma_n: f64,
    pub psi_b0: f64,
    /// On last year's domestic bond return.
    pub psi_b1: f64,
    /// On last year's international equity return.
    pub psi_b2: f64,
    pub sigma_b: f64,
    pub psi_o0: f64,
    /// On this year's domestic equity return.
    pub psi_o1: f64,
    /// On this year's international equity return.
    pub psi_o2: f64,
    pub sigma_o: f64,
    pub psi_h0: f64,
    /// On this year's domestic bond return.
    pub psi_h1: f64,
    /// On this year's inflation.
    pub psi_h2: f64,
    pub sigma_h: f64,
}

const PARAM_KEYS: [&str; 25] = [
    "mu_q", "phi_q", "sigma_q", "mu_s", "phi_s", "sigma_s", "mu_e", "phi_e", "sigma_e", "psi_n0",
    "psi_n1", "psi_n2", "sigma_n", "psi_b0", "psi_b1", "psi_b2", "sigma_b", "psi_o0", "psi_o1",
    "psi_o2", "sigma_o", "psi_h0", "psi_h1", "psi_h2", "sigma_h",
];

impl Default for EsgParams {
    fn default() -> Self {
        Self::published()
    }
}

impl EsgParams {
    /// Preset Australian calibration (June 1992 to June 2020 data).
    pub fn published() -> Self {
        Self {
            mu_q: 0.024,
            phi_q: 0.1346,
            sigma_q: 0.012,
            mu_s: 0.141,
            phi_s: 0.813,
            sigma_s: 0.015,
            mu_e: 0.085,
            phi_e: 0.164,
            sigma_e: 0.119,
            psi_n0: -0.018,
            psi_n1: 0.104,
            psi_n2: 0.911,
            sigma_n: 0.090,
            psi_b0: 0.073,
            psi_b1: -0.103,
            psi_b2: -0.050,
            sigma_b: 0.036,
            psi_o0: -0.026,
            psi_o1: 1.340,
            psi_o2: -0.200,
            sigma_o: 0.081,
            psi_h0: 0.066,
            psi_h1: -0.489,
            psi_h2: 1.037,
            sigma_h: 0.061,
        }
    }

    fn as_array(&self) -> [f64; 25] {
        [
            self.mu_q, self.phi_q, self.sigma_q, self.mu_s, self.phi_s, self.sigma_s, self.mu_e,
            self.phi_e, self.sigma_e, self.psi_n0, self.psi_n1, self.psi_n2, self.sigma_n,
            self.psi_b0, self.psi_b1, self.psi_b2, self.sigma_b, self.psi_o0, self.psi_o1,
            self.psi_o2, self.sigma_o, self.psi_h0, self.psi_h1, self.psi_h2, self.sigma_h,
        ]
    }

    fn from_array(a: [f64; 25]) -> Self {
        Self {
            mu_q: a[0],
            phi_q: a[1],
            sigma_q: a[2],
            mu_s: a[3],
            phi_s: a[4],
            sigma_s: a[5],
            mu_e: a[6],
            phi_e: a[7],
            sigma_e: a[8],
            psi_n0: a[9],
            psi_n1: a[10],
            psi_n2: a[11],
            sigma_n: a[12],
            psi_b0: a[13],
            psi_b1: a[14],
            psi_b2: a[15],
            sigma_b: a[16],
            psi_o0: a[17],
            psi_o1: a[18],
            psi_o2: a[19],
            sigma_o: a[20],
            psi_h0: a[21],
            psi_h1: a[22],
            psi_h2: a[23],
            sigma_h: a[24],
        }
    }

    /// `(name, value)` pairs in file order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, f64)> {
        PARAM_KEYS.into_iter().zip(self.as_array())
    }

    pub fn sigmas(&self) -> [f64; 7] {
        [
            self.sigma_q, self.sigma_s, self.sigma_e, self.sigma_n, self.sigma_b, self.sigma_o,
            self.sigma_h,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((k, v)) = self.entries().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("ESG parameter {k} is not finite ({v})")));
        }
        if self.sigmas().iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("ESG volatilities must be positive".into()));
        }
        for (k, phi) in [("phi_q", self.phi_q), ("phi_s", self.phi_s), ("phi_e", self.phi_e)] {
            if phi.abs() >= 1.0 {
                return Err(Error::Config(format!("{k} = {phi} is not stationary")));
            }
        }
        Ok(())
    }

    /// Flat `key = value` text, one coefficient per line.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::from("# seven-factor ESG coefficients (annual)\n");
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v:?}\n"));
        }
        out
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut values = [f64::NAN; 25];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: "<esg params>".into(),
                line: lineno as u64 + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got {line:?}")))?;
            let k = k.trim();
            let slot = PARAM_KEYS
                .iter()
                .position(|&name| name == k)
                .ok_or_else(|| parse_err(format!("unknown key {k:?}")))?;
            values[slot] = v
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("{k}: {e}")))?;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Parse {
                path: "<esg params>".into(),
                line: 0,
                msg: format!("missing key {}", PARAM_KEYS[i]),
            });
        }
        Ok(Self::from_array(values))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_kv_string()).map_err(|e| Error::io(path, e))
    }
}

/// One year of economic factors (annual log returns / rates).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EconState {
    pub inflation: f64,
    /// Real short-rate component `S`.
    pub real_rate: f64,
    /// Nominal short rate `s = S + q`.
    pub short_rate: f64,
    pub dom_equity: f64,
    pub intl_equity: f64,
    pub dom_bond: f64,
    pub intl_bond: f64,
    pub house: f64,
}

impl EconState {
    fn components(&self) -> [f64; 8] {
        [
            self.inflation,
            self.real_rate,
            self.short_rate,
            self.dom_equity,
            self.intl_equity,
            self.dom_bond,
            self.intl_bond,
            self.house,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite())
    }

    /// Deterministic fixed point of the recurrences.
    pub fn stationary(p: &EsgParams) -> Self {
        let q = p.mu_q;
        let real = p.mu_s - p.mu_q;
        let e = p.mu_e;
        let n = (p.psi_n0 + p.psi_n2 * e) / (1.0 - p.psi_n1);
        let b = (p.psi_b0 + p.psi_b2 * n) / (1.0 - p.psi_b1);
        let o = p.psi_o0 + p.psi_o1 * e + p.psi_o2 * n;
        let h = p.psi_h0 + p.psi_h1 * b + p.psi_h2 * q;
        Self {
            inflation: q,
            real_rate: real,
            short_rate: real + q,
            dom_equity: e,
            intl_equity: n,
            dom_bond: b,
            intl_bond: o,
            house: h,
        }
    }
}

/// Sigma-scaled residuals for one year.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShockVector {
    pub inflation: f64,
    pub real_rate: f64,
    pub dom_equity: f64,
    pub intl_equity: f64,
    pub dom_bond: f64,
    pub intl_bond: f64,
    pub house: f64,
}

impl ShockVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Scales seven standard-normal draws by the model volatilities.
    pub fn scaled(p: &EsgParams, z: [f64; 7]) -> Self {
        let s = p.sigmas();
        Self {
            inflation: s[0] * z[0],
            real_rate: s[1] * z[1],
            dom_equity: s[2] * z[2],
            intl_equity: s[3] * z[3],
            dom_bond: s[4] * z[4],
            intl_bond: s[5] * z[5],
            house: s[6] * z[6],
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.inflation,
            self.real_rate,
            self.dom_equity,
            self.intl_equity,
            self.dom_bond,
            self.intl_bond,
            self.house,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Advances the cascade by one year.
pub fn step_esg(p: &EsgParams, prev: &EconState, eps: &ShockVector) -> Result<EconState> {
    if !prev.is_finite() {
        return Err(Error::InvalidState(format!("non-finite previous state {prev:?}")));
    }
    if !eps.is_finite() {
        return Err(Error::InvalidState(format!("non-finite shocks {eps:?}")));
    }
    Ok(step_unchecked(p, prev, eps))
}

#[inline]
fn step_unchecked(p: &EsgParams, prev: &EconState, eps: &ShockVector) -> EconState {
    let q = (1.0 - p.phi_q) * p.mu_q + p.phi_q * prev.inflation + eps.inflation;
    let real = p.phi_s * prev.real_rate + (1.0 - p.phi_s) * (p.mu_s - p.mu_q) + eps.real_rate;
    let e = p.phi_e * prev.dom_equity + (1.0 - p.phi_e) * p.mu_e + eps.dom_equity;
    let n = p.psi_n0 + p.psi_n1 * prev.intl_equity + p.psi_n2 * e + eps.intl_equity;
    let b = p.psi_b0 + p.psi_b1 * prev.dom_bond + p.psi_b2 * prev.intl_equity + eps.dom_bond;
    let o = p.psi_o0 + p.psi_o1 * e + p.psi_o2 * n + eps.intl_bond;
    let h = p.psi_h0 + p.psi_h1 * b + p.psi_h2 * q + eps.house;
    EconState {
        inflation: q,
        real_rate: real,
        short_rate: real + q,
        dom_equity: e,
        intl_equity: n,
        dom_bond: b,
        intl_bond: o,
        house: h,
    }
}

/// Growth sleeve weights (domestic equity, international equity, property).
pub const GROWTH_WEIGHTS: [f64; 3] = [0.5, 0.3, 0.2];
/// Defensive sleeve weights (cash, domestic bonds, international bonds).
pub const DEFENSIVE_WEIGHTS: [f64; 3] = [0.3, 0.5, 0.2];

/// Annual log return of a fixed-mix portfolio with growth share `omega`.
pub fn portfolio_return(state: &EconState, omega: f64) -> f64 {
    let growth = GROWTH_WEIGHTS[0] * state.dom_equity
        + GROWTH_WEIGHTS[1] * state.intl_equity
        + GROWTH_WEIGHTS[2] * state.house;
    let defensive = DEFENSIVE_WEIGHTS[0] * state.short_rate
        + DEFENSIVE_WEIGHTS[1] * state.dom_bond
        + DEFENSIVE_WEIGHTS[2] * state.intl_bond;
    omega * growth + (1.0 - omega) * defensive
}

/// Panel cells (`paths * (horizon + 1)`) allowed by default, about 1 GB.
pub const DEFAULT_MAX_CELLS: usize = 12_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Growth-asset share used for the panel's portfolio returns.
    pub omega: f64,
    pub max_cells: usize,
}

impl PanelSpec {
    pub fn new(paths: usize, horizon: usize, seed: u64, omega: f64) -> Self {
        Self {
            paths,
            horizon,
            seed,
            omega,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

/// Simulated factors, portfolio returns and deflators for `paths × (horizon + 1)` years.
///
/// Year 0 holds the initial state and `deflator = 1`. Wealth moves from `t`
/// to `t + 1` with `portfolio_return(path, t + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPanel {
    paths: usize,
    horizon: usize,
    states: Vec<EconState>,
    returns: Vec<f64>,
    deflators: Vec<f64>,
}

impl ScenarioPanel {
    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn index(&self, path: usize, t: usize) -> usize {
        assert!(path < self.paths && t <= self.horizon, "panel index ({path}, {t}) out of range");
        path * (self.horizon + 1) + t
    }

    pub fn state(&self, path: usize, t: usize) -> &EconState {
        &self.states[self.index(path, t)]
    }

    pub fn portfolio_return(&self, path: usize, t: usize) -> f64 {
        self.returns[self.index(path, t)]
    }

    pub fn deflator(&self, path: usize, t: usize) -> f64 {
        self.deflators[self.index(path, t)]
    }

    pub fn path_states(&self, path: usize) -> &[EconState] {
        let start = self.index(path, 0);
        &self.states[start..start + self.horizon + 1]
    }

    pub fn path_returns(&self, path: usize) -> &[f64] {
        let start = self.index(path, 0);
        &self.returns[start..start + self.horizon + 1]
    }

    pub fn path_deflators(&self, path: usize) -> &[f64] {
        let start = self.index(path, 0);
        &self.deflators[start..start + self.horizon + 1]
    }

    /// Builds a panel from explicit state paths (each of equal length).
    pub fn from_states(paths: Vec<Vec<EconState>>, omega: f64) -> Result<Self> {
        let n = paths.len();
        let len = paths.first().map(Vec::len).unwrap_or(0);
        if n == 0 || len < 1 {
            return Err(Error::Dimension("panel needs at least one path and one year".into()));
        }
        if paths.iter().any(|p| p.len() != len) {
            return Err(Error::Dimension("all paths must have the same length".into()));
        }
        let mut panel = Self {
            paths: n,
            horizon: len - 1,
            states: Vec::with_capacity(n * len),
            returns: Vec::with_capacity(n * len),
            deflators: Vec::with_capacity(n * len),
        };
        for p in paths {
            let q: Vec<f64> = p.iter().map(|s| s.inflation).collect();
            panel.deflators.extend(compound_deflators(&q));
            panel.returns.extend(p.iter().map(|s| portfolio_return(s, omega)));
            panel.states.extend(p);
        }
        Ok(panel)
    }

    /// `path,t,q,s,e,n,b,o,h,R,Q` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::io("<panel csv>", std::io::Error::other(e));
        w.write_record(["path", "t", "q", "s", "e", "n", "b", "o", "h", "R", "Q"])
            .map_err(csv_err)?;
        for m in 0..self.paths {
            for t in 0..=self.horizon {
                let s = self.state(m, t);
                let row = [
                    s.inflation,
                    s.short_rate,
                    s.dom_equity,
                    s.intl_equity,
                    s.dom_bond,
                    s.intl_bond,
                    s.house,
                    self.portfolio_return(m, t),
                    self.deflator(m, t),
                ];
                let mut rec = vec![m.to_string(), t.to_string()];
                rec.extend(row.iter().map(|v| format!("{v:?}")));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<panel csv>", e))?;
        Ok(())
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Simulates `spec.paths` independent paths of `spec.horizon` years.
pub fn simulate(p: &EsgParams, initial: &EconState, spec: &PanelSpec) -> Result<ScenarioPanel> {
    simulate_with(p, initial, spec, |rng: &mut ChaCha8Rng| {
        ShockVector::scaled(p, std::array::from_fn(|_| StandardNormal.sample(rng)))
    })
}

/// Simulation with a caller-supplied shock generator (per-path RNG provided).
pub fn simulate_with<F>(
    p: &EsgParams,
    initial: &EconState,
    spec: &PanelSpec,
    shocks: F,
) -> Result<ScenarioPanel>
where
    F: Fn(&mut ChaCha8Rng) -> ShockVector + Sync,
{
    if spec.paths == 0 || spec.horizon == 0 {
        return Err(Error::Config(format!(
            "simulation needs paths >= 1 and horizon >= 1 (got {} x {})",
            spec.paths, spec.horizon
        )));
    }
    if !(0.0..=1.0).contains(&spec.omega) {
        return Err(Error::Config(format!("omega {} outside [0, 1]", spec.omega)));
    }
    let len = spec.horizon + 1;
    let cells = spec
        .paths
        .checked_mul(len)
        .ok_or(Error::Capacity {
            cells: usize::MAX,
            budget: spec.max_cells,
        })?;
    if cells > spec.max_cells {
        return Err(Error::Capacity {
            cells,
            budget: spec.max_cells,
        });
    }
    step_esg(p, initial, &ShockVector::zero())?;

    let mut states = vec![EconState::default(); cells];
    states
        .par_chunks_mut(len)
        .enumerate()
        .try_for_each(|(m, row)| {
            let mut rng = path_rng(spec.seed, m);
            row[0] = *initial;
            for t in 1..len {
                let eps = shocks(&mut rng);
                let next = step_unchecked(p, &row[t - 1], &eps);
                if !next.is_finite() {
                    return Err(Error::InvalidState(format!(
                        "non-finite state on path {m} at t = {t}"
                    )));
                }
                row[t] = next;
            }
            Ok(())
        })?;

    let mut returns = vec![0.0; cells];
    let mut deflators = vec![0.0; cells];
    returns
        .par_chunks_mut(len)
        .zip(deflators.par_chunks_mut(len))
        .zip(states.par_chunks(len))
        .for_each(|((r, d), s)| {
            for (ri, si) in r.iter_mut().zip(s) {
                *ri = portfolio_return(si, spec.omega);
            }
            let q: Vec<f64> = s.iter().map(|x| x.inflation).collect();
            d.copy_from_slice(&compound_deflators(&q));
        });

    Ok(ScenarioPanel {
        paths: spec.paths,
        horizon: spec.horizon,
        states,
        returns,
        deflators,
    })
}

/// One row of the historical table. `short_rate` is a fraction per year.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoricalRecord {
    pub year: i32,
    pub cpi: f64,
    pub short_rate: f64,
    pub dom_equity: f64,
    pub intl_equity: f64,
    pub dom_bond: f64,
    pub intl_bond: f64,
    pub house: f64,
}

/// Annual index levels; loaded from `year,cpi,s,E,N,B,O,HPI` with `s` in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoricalSeries {
    records: Vec<HistoricalRecord>,
}

const HISTORY_COLUMNS: [&str; 8] = ["year", "cpi", "s", "E", "N", "B", "O", "HPI"];

impl HistoricalSeries {
    pub fn new(records: Vec<HistoricalRecord>) -> Result<Self> {
        for w in records.windows(2) {
            if w[1].year <= w[0].year {
                return Err(Error::InvalidState(format!(
                    "years must be strictly increasing ({} then {})",
                    w[0].year, w[1].year
                )));
            }
        }
        for r in &records {
            let idx = [r.cpi, r.dom_equity, r.intl_equity, r.dom_bond, r.intl_bond, r.house];
            if idx.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !r.short_rate.is_finite() {
                return Err(Error::InvalidState(format!("non-positive index in year {}", r.year)));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[HistoricalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn from_csv_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse = |line: u64, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let headers = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
        let mut cols = [0usize; 8];
        for (slot, name) in HISTORY_COLUMNS.iter().enumerate() {
            cols[slot] = headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| parse(1, format!("missing column `{name}`")))?;
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                parse(line, e.to_string())
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let field = |slot: usize| -> Result<f64> {
                let raw = row.get(cols[slot]).unwrap_or("");
                raw.parse::<f64>().map_err(|e| {
                    parse(line, format!("column `{}`: {raw:?}: {e}", HISTORY_COLUMNS[slot]))
                })
            };
            let year = field(0)?;
            records.push(HistoricalRecord {
                year: year as i32,
                cpi: field(1)?,
                short_rate: field(2)? / 100.0,
                dom_equity: field(3)?,
                intl_equity: field(4)?,
                dom_bond: field(5)?,
                intl_bond: field(6)?,
                house: field(7)?,
            });
        }
        Self::new(records).map_err(|e| parse(0, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn returns(&self) -> ReturnSeries {
        let lr = |f: fn(&HistoricalRecord) -> f64| -> Vec<f64> {
            self.records
                .windows(2)
                .map(|w| (f(&w[1]) / f(&w[0])).ln())
                .collect()
        };
        let inflation = lr(|r| r.cpi);
        let real_rate: Vec<f64> = self
            .records
            .iter()
            .skip(1)
            .zip(&inflation)
            .map(|(r, q)| r.short_rate - q)
            .collect();
        ReturnSeries {
            years: self.records.iter().skip(1).map(|r| r.year).collect(),
            short_rate: real_rate.iter().zip(&inflation).map(|(s, q)| s + q).collect(),
            real_rate,
            inflation,
            dom_equity: lr(|r| r.dom_equity),
            intl_equity: lr(|r| r.intl_equity),
            dom_bond: lr(|r| r.dom_bond),
            intl_bond: lr(|r| r.intl_bond),
            house: lr(|r| r.house),
        }
    }

    /// State for the last recorded year, from the last two rows.
    pub fn last_state(&self) -> Result<EconState> {
        let r = self.returns();
        let k = r.len();
        if k == 0 {
            return Err(Error::InsufficientData("need at least two years of history".into()));
        }
        Ok(r.state(k - 1))
    }
}

/// Annual log returns aligned by year (one fewer entry than the index table).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReturnSeries {
    pub years: Vec<i32>,
    pub inflation: Vec<f64>,
    pub real_rate: Vec<f64>,
    pub short_rate: Vec<f64>,
    pub dom_equity: Vec<f64>,
    pub intl_equity: Vec<f64>,
    pub dom_bond: Vec<f64>,
    pub intl_bond: Vec<f64>,
    pub house: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.inflation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inflation.is_empty()
    }

    pub fn state(&self, k: usize) -> EconState {
        EconState {
            inflation: self.inflation[k],
            real_rate: self.real_rate[k],
            short_rate: self.short_rate[k],
            dom_equity: self.dom_equity[k],
            intl_equity: self.intl_equity[k],
            dom_bond: self.dom_bond[k],
            intl_bond: self.intl_bond[k],
            house: self.house[k],
        }
    }

    pub fn from_states(states: &[EconState], first_year: i32) -> Self {
        let mut r = Self::default();
        for (k, s) in states.iter().enumerate() {
            r.years.push(first_year + k as i32);
            r.inflation.push(s.inflation);
            r.real_rate.push(s.real_rate);
            r.short_rate.push(s.short_rate);
            r.dom_equity.push(s.dom_equity);
            r.intl_equity.push(s.intl_equity);
            r.dom_bond.push(s.dom_bond);
            r.intl_bond.push(s.intl_bond);
            r.house.push(s.house);
        }
        r
    }
}

/// Minimum number of annual index records accepted by [`calibrate`].
pub const MIN_HISTORY_RECORDS: usize = 10;

struct Fit {
    coef: Vec<f64>,
    residuals: Vec<f64>,
}

fn ols(equation: &'static str, y: &[f64], regressors: &[&[f64]]) -> Result<Fit> {
    let n = y.len();
    let k = regressors.len() + 1;
    if n <= k {
        return Err(Error::Calibration {
            equation,
            reason: format!("{n} observations for {k} coefficients"),
        });
    }
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { regressors[j - 1][i] });
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return Err(Error::Calibration {
            equation,
            reason: "singular design matrix".into(),
        });
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd.solve(&yv, 0.0).map_err(|e| Error::Calibration {
        equation,
        reason: e.to_string(),
    })?;
    let resid = &yv - &x * &beta;
    Ok(Fit {
        coef: beta.iter().copied().collect(),
        residuals: resid.iter().copied().collect(),
    })
}

fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
}

fn ar1_mean(equation: &'static str, intercept: f64, phi: f64) -> Result<f64> {
    if (1.0 - phi).abs() < 1e-12 {
        return Err(Error::Calibration {
            equation,
            reason: format!("unit root (phi = {phi})"),
        });
    }
    Ok(intercept / (1.0 - phi))
}

/// Result of [`calibrate_returns`]: coefficients plus per-equation residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub params: EsgParams,
    /// Years of the residual sample (the first return year is lost to lags).
    pub years: Vec<i32>,
    /// Residual series in equation order q, S, e, n, b, o, h.
    pub residuals: [Vec<f64>; 7],
}

/// Per-equation OLS on index history; residual RMS (divisor `n`) gives each sigma.
pub fn calibrate(history: &HistoricalSeries) -> Result<EsgParams> {
    if history.len() < MIN_HISTORY_RECORDS {
        return Err(Error::InsufficientData(format!(
            "{} annual records, at least {MIN_HISTORY_RECORDS} required",
            history.len()
        )));
    }
    Ok(calibrate_returns(&history.returns())?.params)
}

/// Calibration on a return series directly (used for long synthetic series
/// whose index levels would overflow).
pub fn calibrate_returns(r: &ReturnSeries) -> Result<Calibration> {
    let k = r.len();
    if k < 3 {
        return Err(Error::InsufficientData(format!("{k} annual returns")));
    }
    let cur = |v: &Vec<f64>| v[1..].to_vec();
    let lag = |v: &Vec<f64>| v[..k - 1].to_vec();

    let q = cur(&r.inflation);
    let fq = ols("inflation", &q, &[&lag(&r.inflation)])?;
    let phi_q = fq.coef[1];
    let mu_q = ar1_mean("inflation", fq.coef[0], phi_q)?;

    let fs = ols("short rate", &cur(&r.real_rate), &[&lag(&r.real_rate)])?;
    let phi_s = fs.coef[1];
    let mu_s = ar1_mean("short rate", fs.coef[0], phi_s)? + mu_q;

    let e = cur(&r.dom_equity);
    let fe = ols("domestic equity", &e, &[&lag(&r.dom_equity)])?;
    let phi_e = fe.coef[1];
    let mu_e = ar1_mean("domestic equity", fe.coef[0], phi_e)?;

    let n = cur(&r.intl_equity);
    let n_lag = lag(&r.intl_equity);
    let fnn = ols("international equity", &n, &[&n_lag, &e])?;

    let b = cur(&r.dom_bond);
    let fb = ols("domestic bond", &b, &[&lag(&r.dom_bond), &n_lag])?;

    let fo = ols("international bond", &cur(&r.intl_bond), &[&e, &n])?;

    let fh = ols("house", &cur(&r.house), &[&b, &q])?;

    let params = EsgParams {
        mu_q,
        phi_q,
        sigma_q: rms(&fq.residuals),
        mu_s,
        phi_s,
        sigma_s: rms(&fs.residuals),
        mu_e,
        phi_e,
        sigma_e: rms(&fe.residuals),
        psi_n0: fnn.coef[0],
        psi_n1: fnn.coef[1],
        psi_n2: fnn.coef[2],
        sigma_n: rms(&fnn.residuals),
        psi_b0: fb.coef[0],
        psi_b1: fb.coef[1],
        psi_b2: fb.coef[2],
        sigma_b: rms(&fb.residuals),
        psi_o0: fo.coef[0],
        psi_o1: fo.coef[1],
        psi_o2: fo.coef[2],
        sigma_o: rms(&fo.residuals),
        psi_h0: fh.coef[0],
        psi_h1: fh.coef[1],
        psi_h2: fh.coef[2],
        sigma_h: rms(&fh.residuals),
    };
    Ok(Calibration {
        params,
        years: r.years[1..].to_vec(),
        residuals: [
            fq.residuals,
            fs.residuals,
            fe.residuals,
            fnn.residuals,
            fb.residuals,
            fo.residuals,
            fh.residuals,
        ],
    })
}

pub const FACTOR_NAMES: [&str; 7] = ["q", "S", "e", "n", "b", "o", "h"];

/// Residual cross-correlations of the seven equations under `params`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualDiagnostics {
    pub years: Vec<i32>,
    /// `residuals[k]` holds the seven residuals for `years[k]`.
    pub residuals: Vec<[f64; 7]>,
    pub correlation: [[f64; 7]; 7],
}

impl ResidualDiagnostics {
    pub fn max_abs_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    m = m.max(self.correlation[i][j].abs());
                }
            }
        }
        m
    }

    pub fn write_residuals_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<residuals csv>", std::io::Error::other(e));
        let mut header = vec!["year"];
        header.extend(FACTOR_NAMES);
        w.write_record(&header).map_err(err)?;
        for (year, r) in self.years.iter().zip(&self.residuals) {
            let mut rec = vec![year.to_string()];
            rec.extend(r.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<residuals csv>", e))
    }

    pub fn write_correlation_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<correlation csv>", std::io::Error::other(e));
        let mut header = vec![""];
        header.extend(FACTOR_NAMES);
        w.write_record(&header).map_err(err)?;
        for (i, row) in self.correlation.iter().enumerate() {
            let mut rec = vec![FACTOR_NAMES[i].to_string()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<correlation csv>", e))
    }
}

/// Residuals of each recurrence evaluated on the observed history.
pub fn residual_diagnostics(history: &HistoricalSeries, p: &EsgParams) -> Result<ResidualDiagnostics> {
    let r = history.returns();
    if r.len() < 2 {
        return Err(Error::InsufficientData("need at least three years of history".into()));
    }
    let mut years = Vec::new();
    let mut residuals = Vec::new();
    for k in 1..r.len() {
        let prev = r.state(k - 1);
        let obs = r.state(k);
        let fitted = step_unchecked(p, &prev, &ShockVector::zero());
        // The cascade feeds same-year factors forward; residuals condition on
        // the observed values, not the fitted ones.
        let n_fit = p.psi_n0 + p.psi_n1 * prev.intl_equity + p.psi_n2 * obs.dom_equity;
        let o_fit = p.psi_o0 + p.psi_o1 * obs.dom_equity + p.psi_o2 * obs.intl_equity;
        let h_fit = p.psi_h0 + p.psi_h1 * obs.dom_bond + p.psi_h2 * obs.inflation;
        years.push(r.years[k]);
        residuals.push([
            obs.inflation - fitted.inflation,
            obs.real_rate - fitted.real_rate,
            obs.dom_equity - fitted.dom_equity,
            obs.intl_equity - n_fit,
            obs.dom_bond - fitted.dom_bond,
            obs.intl_bond - o_fit,
            obs.house - h_fit,
        ]);
    }
    let correlation = correlation_matrix(&residuals);
    Ok(ResidualDiagnostics {
        years,
        residuals,
        correlation,
    })
}

fn correlation_matrix(rows: &[[f64; 7]]) -> [[f64; 7]; 7] {
    let n = rows.len() as f64;
    let mut mean = [0.0; 7];
    for r in rows {
        for i in 0..7 {
            mean[i] += r[i] / n;
        }
    }
    let mut cov = [[0.0; 7]; 7];
    for r in rows {
        for i in 0..7 {
            for j in 0..7 {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    let mut corr = [[0.0; 7]; 7];
    for i in 0..7 {
        for j in 0..7 {
            corr[i][j] = if i == j {
                1.0
            } else {
                let d = (cov[i][i] * cov[j][j]).sqrt();
                if d > 0.0 {
                    cov[i][j] / d
                } else {
                    0.0
                }
            };
        }
    }
    // symmetrize exactly
    for i in 0..7 {
        for j in 0..i {
            corr[i][j] = corr[j][i];
        }
    }
    corr
}
