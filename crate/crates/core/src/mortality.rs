//! Period life table with geometric improvement, survival curves and life
//! expectancy.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m" | "male" => Ok(Gender::Male),
            "f" | "female" => Ok(Gender::Female),
            other => Err(Error::Config(format!("unknown gender {other:?}"))),
        }
    }
}

/// Years between the table's central year and the first projected year.
pub const DEFAULT_BASE_LAG: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Row {
    qx: [f64; 2],
    improvement: [f64; 2],
}

/// Base mortality `q(a, g)` and annual improvement `i(a, g)` for consecutive
/// integer ages; the last age has `q = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LifeTable {
    first_age: u32,
    rows: Vec<Row>,
    base_lag: f64,
}

fn gi(g: Gender) -> usize {
    match g {
        Gender::Male => 0,
        Gender::Female => 1,
    }
}

impl LifeTable {
    /// Builds a table from `(age, male_qx, female_qx, male_i, female_i)` rows.
    pub fn new(rows: &[(u32, f64, f64, f64, f64)]) -> Result<Self> {
        let first_age = rows
            .first()
            .ok_or_else(|| Error::InsufficientData("empty life table".into()))?
            .0;
        let mut out = Vec::with_capacity(rows.len());
        for (k, &(age, mq, fq, mi, fi)) in rows.iter().enumerate() {
            if age != first_age + k as u32 {
                return Err(Error::InvalidState(format!("ages must be consecutive, found {age}")));
            }
            for q in [mq, fq] {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidState(format!("q = {q} at age {age} outside [0, 1]")));
                }
            }
            for i in [mi, fi] {
                if !(i <= 0.0 && i > -1.0) {
                    return Err(Error::InvalidState(format!(
                        "improvement factor {i} at age {age} outside (-1, 0]"
                    )));
                }
            }
            out.push(Row {
                qx: [mq, fq],
                improvement: [mi, fi],
            });
        }
        let last = out.last().expect("non-empty");
        if last.qx != [1.0, 1.0] {
            return Err(Error::InvalidState(format!(
                "terminal age {} must have q = 1",
                first_age + out.len() as u32 - 1
            )));
        }
        Ok(Self {
            first_age,
            rows: out,
            base_lag: DEFAULT_BASE_LAG,
        })
    }

    pub fn with_base_lag(mut self, base_lag: f64) -> Result<Self> {
        if !(base_lag >= 0.0) || !base_lag.is_finite() {
            return Err(Error::Config(format!("base lag must be non-negative, got {base_lag}")));
        }
        self.base_lag = base_lag;
        Ok(self)
    }

    pub fn base_lag(&self) -> f64 {
        self.base_lag
    }

    pub fn first_age(&self) -> u32 {
        self.first_age
    }

    pub fn terminal_age(&self) -> u32 {
        self.first_age + self.rows.len() as u32 - 1
    }

    /// Reads `age,male_qx,female_qx,male_improvement,female_improvement`.
    pub fn from_csv_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        const COLS: [&str; 5] =
            ["age", "male_qx", "female_qx", "male_improvement", "female_improvement"];
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse = |line: u64, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let headers = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
        let mut idx = [0usize; 5];
        for (slot, name) in COLS.iter().enumerate() {
            idx[slot] = headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| parse(1, format!("missing column `{name}`")))?;
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let get = |slot: usize| -> Result<f64> {
                let raw = rec.get(idx[slot]).unwrap_or("");
                raw.parse::<f64>()
                    .map_err(|e| parse(line, format!("column `{}`: {raw:?}: {e}", COLS[slot])))
            };
            let age = get(0)?;
            if age < 0.0 || age.fract() != 0.0 {
                return Err(parse(line, format!("age {age} is not a whole number")));
            }
            rows.push((age as u32, get(1)?, get(2)?, get(3)?, get(4)?));
        }
        Self::new(&rows).map_err(|e| parse(0, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    fn row(&self, age: u32) -> Result<&Row> {
        age.checked_sub(self.first_age)
            .and_then(|k| self.rows.get(k as usize))
            .ok_or_else(|| {
                Error::Range(format!(
                    "age {age} outside table range {}..={}",
                    self.first_age,
                    self.terminal_age()
                ))
            })
    }

    pub fn base_qx(&self, gender: Gender, age: u32) -> Result<f64> {
        Ok(self.row(age)?.qx[gi(gender)])
    }

    /// Mortality at `age` projected `calendar_offset` years past the start year.
    pub fn projected_qx(&self, gender: Gender, age: u32, calendar_offset: f64) -> Result<f64> {
        if !(calendar_offset >= 0.0) {
            return Err(Error::Domain(format!("negative calendar offset {calendar_offset}")));
        }
        let row = self.row(age)?;
        if age == self.terminal_age() {
            return Ok(1.0);
        }
        let g = gi(gender);
        let q = row.qx[g] * (1.0 + row.improvement[g]).powf(self.base_lag + calendar_offset);
        Ok(q.clamp(0.0, 1.0))
    }

    pub fn survival_curve(&self, gender: Gender, age: u32, horizon: usize) -> Result<SurvivalCurve> {
        self.row(age)?;
        if age as usize + horizon > self.terminal_age() as usize + 1 {
            return Err(Error::Range(format!(
                "horizon {horizon} from age {age} overruns terminal age {}",
                self.terminal_age()
            )));
        }
        let mut tpx = Vec::with_capacity(horizon + 1);
        let mut dq = Vec::with_capacity(horizon + 1);
        tpx.push(1.0);
        dq.push(0.0);
        for t in 1..=horizon {
            let q = self.projected_qx(gender, age + t as u32 - 1, (t - 1) as f64)?;
            let alive = tpx[t - 1];
            dq.push(alive * q);
            tpx.push(alive * (1.0 - q));
        }
        Ok(SurvivalCurve {
            age,
            gender,
            tpx,
            dq,
        })
    }

    /// Curtate expectation of life plus one half, with projected mortality.
    pub fn life_expectancy(&self, gender: Gender, age: u32) -> Result<f64> {
        let horizon = (self.terminal_age() + 1 - age) as usize;
        let curve = self.survival_curve(gender, age, horizon)?;
        Ok(age as f64 + curve.tpx[1..].iter().sum::<f64>() + 0.5)
    }
}

/// Survival `tpx[t]` and deferred death `dq[t]` for `t = 0..=horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub age: u32,
    pub gender: Gender,
    pub tpx: Vec<f64>,
    /// Probability of dying between `t - 1` and `t`; `dq[0] = 0`.
    pub dq: Vec<f64>,
}

impl SurvivalCurve {
    pub fn horizon(&self) -> usize {
        self.tpx.len() - 1
    }

    /// Curve with the given survival probabilities; `dq` follows from differences.
    pub fn from_tpx(age: u32, gender: Gender, tpx: Vec<f64>) -> Result<Self> {
        if tpx.first() != Some(&1.0) {
            return Err(Error::InvalidState("tpx[0] must equal 1".into()));
        }
        if tpx.windows(2).any(|w| w[1] > w[0] || w[1] < 0.0) {
            return Err(Error::InvalidState("tpx must be non-increasing and non-negative".into()));
        }
        let mut dq = vec![0.0];
        dq.extend(tpx.windows(2).map(|w| w[0] - w[1]));
        Ok(Self {
            age,
            gender,
            tpx,
            dq,
        })
    }

    /// `t,age,tpx,dq` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<survival csv>", std::io::Error::other(e));
        w.write_record(["t", "age", "tpx", "dq"]).map_err(err)?;
        for t in 0..=self.horizon() {
            w.write_record([
                t.to_string(),
                (self.age as usize + t).to_string(),
                format!("{:?}", self.tpx[t]),
                format!("{:?}", self.dq[t]),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<survival csv>", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(q: f64, improvement: f64) -> LifeTable {
        let mut rows: Vec<_> = (60..70).map(|a| (a, q, q, improvement, improvement)).collect();
        rows.push((70, 1.0, 1.0, 0.0, 0.0));
        LifeTable::new(&rows).unwrap()
    }

    #[test]
    fn projection_examples() {
        let t = flat(0.02, 0.0);
        assert_eq!(t.projected_qx(Gender::Male, 61, 5.0).unwrap(), 0.02);

        let t = flat(0.02, -0.01).with_base_lag(0.0).unwrap();
        assert!((t.projected_qx(Gender::Female, 62, 1.0).unwrap() - 0.0198).abs() < 1e-15);
        assert_eq!(t.projected_qx(Gender::Male, 70, 30.0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_age() {
        let t = flat(0.02, 0.0);
        assert!(matches!(t.projected_qx(Gender::Male, 59, 0.0), Err(Error::Range(_))));
        assert!(matches!(t.survival_curve(Gender::Male, 65, 7), Err(Error::Range(_))));
        assert!(t.survival_curve(Gender::Male, 65, 6).is_ok());
    }

    #[test]
    fn hand_product() {
        let t = flat(0.5, 0.0);
        let c = t.survival_curve(Gender::Male, 60, 2).unwrap();
        assert_eq!(c.tpx, vec![1.0, 0.5, 0.25]);
        assert_eq!(c.dq, vec![0.0, 0.5, 0.25]);
    }

    #[test]
    fn immediate_death() {
        let t = LifeTable::new(&[(90, 0.3, 0.3, 0.0, 0.0), (91, 1.0, 1.0, 0.0, 0.0)]).unwrap();
        assert_eq!(t.life_expectancy(Gender::Male, 91).unwrap(), 91.5);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(LifeTable::new(&[(60, 0.1, 0.1, 0.0, 0.0), (61, 0.9, 1.0, 0.0, 0.0)]).is_err());
        assert!(LifeTable::new(&[(60, 1.2, 0.1, 0.0, 0.0), (61, 1.0, 1.0, 0.0, 0.0)]).is_err());
        assert!(LifeTable::new(&[(60, 0.1, 0.1, 0.01, 0.0), (61, 1.0, 1.0, 0.0, 0.0)]).is_err());
        assert!(LifeTable::new(&[(60, 0.1, 0.1, 0.0, 0.0), (62, 1.0, 1.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn csv_missing_column() {
        let text = "age,male_qx,female_qx,male_improvement\n60,1,1,0\n";
        let err = LifeTable::from_csv_reader(text.as_bytes(), "lt.csv").unwrap_err();
        assert!(err.to_string().contains("female_improvement"));
    }

    #[test]
    fn from_tpx_differences() {
        let c = SurvivalCurve::from_tpx(67, Gender::Male, vec![1.0, 0.9, 0.6]).unwrap();
        assert_eq!(c.dq, vec![0.0, 0.09999999999999998, 0.30000000000000004]);
        assert!(SurvivalCurve::from_tpx(67, Gender::Male, vec![1.0, 1.1]).is_err());
    }
}
