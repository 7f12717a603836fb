//! Index tables: calibration against SBGIA columns over a grid of states.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::calibration::{calibration_bernoulli, calibration_gaussian, CalibrationGrid};
use crate::error::{invalid, Result};
use crate::fabp::{DiscountFactor, TruncationConfig};
use crate::models::bernoulli::{bernoulli_horizon, bernoulli_truncation_with_horizon, BernoulliArm};
use crate::models::gaussian::{gaussian_bounds, gaussian_shift, GaussianArm};
use crate::models::ExpFamState;
use crate::rng::StreamKey;
use crate::solver::{extrapolate_k, solve, SolverConfig, StopReason};
use crate::tree::ReplicationSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Bernoulli,
    Gaussian,
}

/// One SBGIA column: depth `K` with `n` branches per level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub depth: usize,
    pub n: usize,
}

impl Column {
    pub fn schedule(&self) -> Result<ReplicationSchedule> {
        ReplicationSchedule::uniform(self.depth, self.n)
    }

    pub fn param(&self) -> String {
        format!("K={};n={}", self.depth, self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub family: Family,
    /// `(Ψ, κ)` per state.
    pub states: Vec<(f64, f64)>,
    pub gamma: f64,
    pub eps_trunc: f64,
    /// Overrides the horizon derived from `eps_trunc`.
    pub horizon: Option<usize>,
    pub columns: Vec<Column>,
    pub eps_nu: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub min_iters: usize,
    /// Independent solves per cell; the first is reported, all enter `sd`.
    pub repetitions: usize,
    pub seed: u64,
}

impl TableSpec {
    fn discount(&self) -> Result<DiscountFactor> {
        DiscountFactor::new(self.gamma)
    }

    pub fn horizon_for(&self) -> Result<usize> {
        if let Some(n) = self.horizon {
            return Ok(n);
        }
        let g = self.discount()?;
        match self.family {
            Family::Bernoulli => bernoulli_horizon(self.eps_trunc, g),
            Family::Gaussian => Ok(gaussian_bounds(self.eps_trunc, g, 1.0)?.1),
        }
    }

    fn truncation(&self, s: &ExpFamState) -> Result<TruncationConfig> {
        let g = self.discount()?;
        let n = self.horizon_for()?;
        match self.family {
            Family::Bernoulli => bernoulli_truncation_with_horizon(s, n, g),
            Family::Gaussian => {
                let (l, _) = gaussian_bounds(self.eps_trunc, g, s.kappa)?;
                TruncationConfig::new(n, s.mean() - l, s.mean() + l, g)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.states.is_empty() || self.repetitions == 0 {
            return invalid("a table needs states and at least one repetition");
        }
        self.discount()?;
        Ok(())
    }
}

/// Calibration index of a state.
pub fn calibration_value(family: Family, psi: f64, kappa: f64, gamma: DiscountFactor, horizon: usize) -> Result<f64> {
    match family {
        Family::Bernoulli => calibration_bernoulli(psi, kappa, gamma, horizon, &CalibrationGrid::bernoulli()),
        Family::Gaussian => {
            Ok(gaussian_shift(psi, kappa, calibration_gaussian(kappa, gamma, horizon, &CalibrationGrid::gaussian())?))
        }
    }
}

/// Solves of one column at one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub values: Vec<f64>,
    pub radii: Vec<f64>,
    pub iterations: Vec<usize>,
    pub hit_max_iters: bool,
    pub cpu_seconds: f64,
}

impl Cell {
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    /// Sample standard deviation over repetitions (NaN with one).
    pub fn sd(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return f64::NAN;
        }
        let m = self.values.iter().sum::<f64>() / n as f64;
        (self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    }
}

/// Column-level error summary against calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub bias: f64,
    pub rmse: f64,
    pub sd: f64,
    pub cpu_seconds: f64,
}

fn summarize(values: &[f64], calib: &[f64], sds: &[f64], cpu: f64) -> ErrorSummary {
    let n = values.len() as f64;
    let errs: Vec<f64> = values.iter().zip(calib).map(|(v, c)| v - c).collect();
    ErrorSummary {
        bias: errs.iter().sum::<f64>() / n,
        rmse: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        sd: sds.iter().sum::<f64>() / n,
        cpu_seconds: cpu,
    }
}

/// One CSV-shaped line of a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub state: String,
    pub calibration: f64,
    pub method: String,
    pub param: String,
    pub value: f64,
    pub bias: f64,
    pub rmse: f64,
    pub sd: f64,
    pub cpu_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub spec: TableSpec,
    pub horizon: usize,
    pub calibration: Vec<f64>,
    pub calibration_seconds: f64,
    /// `cells[column][state]`.
    pub cells: Vec<Vec<Cell>>,
    pub summaries: Vec<ErrorSummary>,
    /// Extrapolated `K → ∞` values per state when the columns span at
    /// least two depths.
    pub limit: Option<Vec<f64>>,
    pub limit_summary: Option<ErrorSummary>,
}

impl TableReport {
    pub fn hit_max_iters(&self) -> bool {
        self.cells.iter().flatten().any(|c| c.hit_max_iters)
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        self.cells[col].iter().map(Cell::value).collect()
    }

    pub fn rows(&self) -> Vec<TableRow> {
        let label = |&(p, k): &(f64, f64)| format!("{p}:{k}");
        let mut rows = Vec::new();
        for (i, st) in self.spec.states.iter().enumerate() {
            let cal = self.calibration[i];
            rows.push(TableRow {
                state: label(st),
                calibration: cal,
                method: "calibration".into(),
                param: String::new(),
                value: cal,
                bias: 0.0,
                rmse: 0.0,
                sd: 0.0,
                cpu_seconds: f64::NAN,
            });
            for (j, col) in self.spec.columns.iter().enumerate() {
                let cell = &self.cells[j][i];
                let e = cell.value() - cal;
                rows.push(TableRow {
                    state: label(st),
                    calibration: cal,
                    method: "sbgia".into(),
                    param: col.param(),
                    value: cell.value(),
                    bias: e,
                    rmse: e.abs(),
                    sd: cell.sd(),
                    cpu_seconds: cell.cpu_seconds,
                });
            }
            if let Some(lim) = &self.limit {
                let e = lim[i] - cal;
                rows.push(TableRow {
                    state: label(st),
                    calibration: cal,
                    method: "limit".into(),
                    param: self.limit_param(),
                    value: lim[i],
                    bias: e,
                    rmse: e.abs(),
                    sd: f64::NAN,
                    cpu_seconds: f64::NAN,
                });
            }
        }
        let total = |method: &str, param: String, s: &ErrorSummary| TableRow {
            state: "all".into(),
            calibration: f64::NAN,
            method: method.into(),
            param,
            value: f64::NAN,
            bias: s.bias,
            rmse: s.rmse,
            sd: s.sd,
            cpu_seconds: s.cpu_seconds,
        };
        rows.push(TableRow {
            cpu_seconds: self.calibration_seconds,
            ..total("calibration", String::new(), &ErrorSummary { bias: 0.0, rmse: 0.0, sd: 0.0, cpu_seconds: 0.0 })
        });
        for (col, s) in self.spec.columns.iter().zip(&self.summaries) {
            rows.push(total("sbgia", col.param(), s));
        }
        if let Some(s) = &self.limit_summary {
            rows.push(total("limit", self.limit_param(), s));
        }
        rows
    }

    fn limit_param(&self) -> String {
        let ks: Vec<String> = self.spec.columns.iter().map(|c| c.depth.to_string()).collect();
        format!("K={}", ks.join("|"))
    }
}

/// Seed of the solve for `(column, state, repetition)`.
pub fn cell_seed(base: u64, column: usize, state: usize, rep: usize) -> u64 {
    StreamKey::root(base).descend(&[column as u64, state as u64, rep as u64]).raw()
}

/// Calibration and SBGIA for every state and column; solves run on the
/// rayon pool and are collected in a fixed order.
pub fn table_sweep(spec: &TableSpec) -> Result<TableReport> {
    spec.validate()?;
    let g = spec.discount()?;
    let horizon = spec.horizon_for()?;
    let t0 = Instant::now();
    let calibration = spec
        .states
        .par_iter()
        .map(|&(p, k)| calibration_value(spec.family, p, k, g, horizon))
        .collect::<Result<Vec<_>>>()?;
    let calibration_seconds = t0.elapsed().as_secs_f64();

    let jobs: Vec<(usize, usize, usize)> = (0..spec.columns.len())
        .flat_map(|c| (0..spec.states.len()).flat_map(move |s| (0..spec.repetitions).map(move |r| (c, s, r))))
        .collect();
    let solved = jobs
        .par_iter()
        .map(|&(c, s, r)| {
            let (psi, kappa) = spec.states[s];
            let st = ExpFamState::new(psi, kappa);
            let trunc = spec.truncation(&st)?;
            let mut cfg = SolverConfig::new(trunc, spec.columns[c].schedule()?, st.mean(), spec.eps_nu)?;
            cfg.beta = spec.beta;
            cfg.max_iters = spec.max_iters;
            cfg.min_iters = spec.min_iters;
            let seed = cell_seed(spec.seed, c, s, r);
            let t = Instant::now();
            let res = match spec.family {
                Family::Bernoulli => solve(&BernoulliArm, &st, &cfg, seed)?,
                Family::Gaussian => solve(&GaussianArm, &st, &cfg, seed)?,
            };
            Ok((res, t.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(spec.columns.len());
    let mut it = solved.into_iter();
    for _ in &spec.columns {
        let mut col = Vec::with_capacity(spec.states.len());
        for _ in &spec.states {
            let mut cell =
                Cell { values: vec![], radii: vec![], iterations: vec![], hit_max_iters: false, cpu_seconds: 0.0 };
            for _ in 0..spec.repetitions {
                let (res, secs) = it.next().expect("one result per job");
                cell.values.push(res.nu_final);
                cell.radii.push(res.ci_radius);
                cell.iterations.push(res.iterations);
                cell.hit_max_iters |= res.stopped_by == StopReason::MaxIters;
                cell.cpu_seconds += secs;
            }
            col.push(cell);
        }
        cells.push(col);
    }

    let summaries = cells
        .iter()
        .map(|col| {
            let vals: Vec<f64> = col.iter().map(Cell::value).collect();
            let sds: Vec<f64> = col.iter().map(Cell::sd).collect();
            summarize(&vals, &calibration, &sds, col.iter().map(|c| c.cpu_seconds).sum())
        })
        .collect();

    let mut depths: Vec<usize> = spec.columns.iter().map(|c| c.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let (limit, limit_summary) = if depths.len() >= 2 && depths.len() == spec.columns.len() {
        let lim = (0..spec.states.len())
            .map(|s| {
                let pts: Vec<(usize, f64)> =
                    spec.columns.iter().enumerate().map(|(c, col)| (col.depth, cells[c][s].value())).collect();
                extrapolate_k(&pts)
            })
            .collect::<Result<Vec<_>>>()?;
        let nan = vec![f64::NAN; lim.len()];
        let summary = summarize(&lim, &calibration, &nan, 0.0);
        (Some(lim), Some(ErrorSummary { sd: f64::NAN, ..summary }))
    } else {
        (None, None)
    };

    Ok(TableReport {
        spec: spec.clone(),
        horizon,
        calibration,
        calibration_seconds,
        cells,
        summaries,
        limit,
        limit_summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_have_expected_shape() {
        use crate::harness::presets::{bernoulli_grid, gaussian_grid};
        let b = bernoulli_grid();
        assert_eq!(b.len(), 36);
        assert_eq!(b[0], (1.0, 2.0));
        assert_eq!(b[35], (6.0, 12.0));
        assert_eq!(gaussian_grid().len(), 14);
    }

    #[test]
    fn small_sweep_runs() {
        let mut spec = crate::harness::presets::bernoulli_depths(&[1, 2]);
        spec.states.truncate(2);
        spec.eps_nu = 0.01;
        let rep = table_sweep(&spec).unwrap();
        assert_eq!(rep.cells.len(), 2);
        assert!(rep.limit.is_some());
        let rows = rep.rows();
        // Per state: calibration, two columns, limit; then four summaries.
        assert_eq!(rows.len(), 2 * 4 + 4);
        assert!(rows.iter().all(|r| r.state == "all" || r.value.is_finite()));
    }
}
