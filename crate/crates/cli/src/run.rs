//! End-to-end runs: CSV in, filter/smooth/forecast, CSV out. Everything
//! is computed before the first byte is written, so a failed run leaves
//! the output directory untouched.

use crate::config::RunConfig;
use crate::fail::Fail;
use crate::table::{float_cell, parse_count, parse_float, write_atomic, Table};
use kdglm_core::family::{Family, Observation, ProjectionMode};
use kdglm_core::filter::{filter_series, FilterTrajectory, TimePoint};
use kdglm_core::nalgebra::{DMatrix, DVector};
use kdglm_core::sim::simulate;
use kdglm_core::smooth::{forecast, smooth, ForecastBundle, ForecastSpec, SmoothedTrajectory};
use kdglm_core::state_space::StateModel;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

pub struct FitReport {
    pub total_score: f64,
    pub wall: Duration,
    pub written: Vec<PathBuf>,
}

struct Series {
    points: Vec<TimePoint>,
    /// Trial count per observed row, multinomial only.
    trials: Vec<Option<u64>>,
    /// Pass-through label cells when the config names a label column.
    labels: Option<(String, Vec<String>)>,
}

pub fn run_fit(
    cfg: &RunConfig,
    data_path: &Path,
    out_dir: &Path,
    horizon_override: Option<usize>,
    fast_flag: bool,
) -> Result<FitReport, Fail> {
    let started = Instant::now();
    let model = cfg.build_model()?;
    let (prior_mean, prior_cov) = cfg.prior(&model)?;
    let table = Table::read(data_path)?;
    let series = parse_series(cfg, &model, &table)?;
    let t_len = series.points.len();

    let interventions = cfg.interventions(&model)?;
    for iv in &interventions {
        if iv.time > t_len {
            return Err(Fail::Config(format!(
                "intervention at time {} lies beyond the series length {t_len}",
                iv.time
            )));
        }
    }

    let mode = if fast_flag || cfg.fast_poisson {
        ProjectionMode::FastPoisson
    } else {
        ProjectionMode::Exact
    };
    let horizon = horizon_override.unwrap_or(cfg.horizon);

    let trajectory = filter_series(
        &model,
        &prior_mean,
        &prior_cov,
        &series.points,
        &interventions,
        mode,
    )
    .map_err(|failure| Fail::from_core(failure.into_error(), "t"))?;
    let smoothed = smooth(&trajectory, &model).map_err(|e| Fail::from_core(e, "t"))?;

    let bundle = if horizon >= 1 {
        Some(make_forecast(cfg, &model, &series, &trajectory, horizon, mode)?)
    } else {
        None
    };

    // All numbers exist now; only IO can fail from here on.
    fs::create_dir_all(out_dir)
        .map_err(|e| Fail::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut written = Vec::new();

    let label = series
        .labels
        .as_ref()
        .map(|(name, cells)| (name.as_str(), cells.as_slice()));
    let (headers, rows) = filtered_table(&trajectory, label);
    let path = out_dir.join(&cfg.outputs.filtered);
    write_atomic(&path, &headers, &rows)?;
    written.push(path);

    let (headers, rows) = smoothed_table(&smoothed, label);
    let path = out_dir.join(&cfg.outputs.smoothed);
    write_atomic(&path, &headers, &rows)?;
    written.push(path);

    if let Some(bundle) = &bundle {
        let (headers, rows) = forecast_table(bundle);
        let path = out_dir.join(&cfg.outputs.forecast);
        write_atomic(&path, &headers, &rows)?;
        written.push(path);
    }

    Ok(FitReport {
        total_score: trajectory.total_log_score(),
        wall: started.elapsed(),
        written,
    })
}

fn make_forecast(
    cfg: &RunConfig,
    model: &StateModel,
    series: &Series,
    trajectory: &FilterTrajectory,
    horizon: usize,
    mode: ProjectionMode,
) -> Result<ForecastBundle, Fail> {
    // Future covariates are not knowable here; hold the last row fixed.
    let covariates = if model.covariate_dim() > 0 {
        let last = series.points.last().expect("nonempty").covariates.clone();
        vec![last; horizon]
    } else {
        Vec::new()
    };
    let trials = match model.family() {
        Family::Multinomial { .. } => {
            let fallback = series.trials.iter().rev().find_map(|t| *t);
            let trials = cfg.forecast_trials.or(fallback);
            if trials.is_none() {
                return Err(Fail::Config(
                    "forecasting counts needs a trial total: set forecast_trials".into(),
                ));
            }
            trials
        }
        _ => None,
    };
    forecast(
        trajectory.records.last().expect("nonempty"),
        model,
        &ForecastSpec {
            horizons: horizon,
            covariates,
            trials,
            mode,
        },
    )
    .map_err(|e| Fail::from_core(e, "j"))
}

/// Turns the raw table into a time series, enforcing the data contract:
/// `NA` responses mark skipped updates, covariates must always be present,
/// counts must be nonnegative and multinomial rows must not exceed their
/// trial total. Row numbers in messages are 1-based like t.
fn parse_series(cfg: &RunConfig, model: &StateModel, table: &Table) -> Result<Series, Fail> {
    if table.rows.is_empty() {
        return Err(Fail::Data("no data rows".into()));
    }
    let response_cols = cfg
        .response
        .iter()
        .map(|name| table.column(name))
        .collect::<Result<Vec<_>, _>>()?;
    let trials_col = cfg
        .trials
        .as_ref()
        .map(|name| table.column(name))
        .transpose()?;
    let covariate_cols = model
        .covariate_names()
        .iter()
        .map(|name| table.column(name))
        .collect::<Result<Vec<_>, _>>()?;
    let label_col = cfg
        .label
        .as_ref()
        .map(|name| table.column(name))
        .transpose()?;

    let family = model.family();
    let mut points = Vec::with_capacity(table.rows.len());
    let mut trials_seen = Vec::with_capacity(table.rows.len());
    let mut labels = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let t = i + 1;
        let covariates = covariate_cols
            .iter()
            .map(|&c| {
                parse_float(&row[c], &format!("covariate '{}'", table.headers[c]), t)?
                    .ok_or_else(|| {
                        Fail::Data(format!("row {t}: covariates must not be missing"))
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let (y, trials) = parse_response(family, row, &response_cols, trials_col, t)?;
        trials_seen.push(trials);
        points.push(TimePoint { y, covariates });
        if let Some(c) = label_col {
            labels.push(row[c].clone());
        }
    }
    Ok(Series {
        points,
        trials: trials_seen,
        labels: label_col.map(|_| (cfg.label.clone().expect("label set"), labels)),
    })
}

fn parse_response(
    family: Family,
    row: &[String],
    response_cols: &[usize],
    trials_col: Option<usize>,
    t: usize,
) -> Result<(Option<Observation>, Option<u64>), Fail> {
    match family {
        Family::Poisson => {
            let y = parse_count(&row[response_cols[0]], "response", t)?;
            Ok((y.map(Observation::Count), None))
        }
        Family::Bernoulli => {
            let y = parse_count(&row[response_cols[0]], "response", t)?;
            match y {
                None => Ok((None, None)),
                Some(0) => Ok((Some(Observation::Binary(false)), None)),
                Some(1) => Ok((Some(Observation::Binary(true)), None)),
                Some(v) => Err(Fail::Data(format!(
                    "row {t}: binary response must be 0 or 1, got {v}"
                ))),
            }
        }
        Family::Normal => {
            let y = parse_float(&row[response_cols[0]], "response", t)?;
            if let Some(v) = y {
                if !v.is_finite() {
                    return Err(Fail::Data(format!("row {t}: response must be finite")));
                }
            }
            Ok((y.map(Observation::Real), None))
        }
        Family::Multinomial { .. } => {
            let cells = response_cols
                .iter()
                .map(|&c| parse_count(&row[c], "category count", t))
                .collect::<Result<Vec<_>, _>>()?;
            let trials = parse_count(
                &row[trials_col.expect("validated for multinomial")],
                "trial count",
                t,
            )?;
            if cells.iter().all(Option::is_none) {
                return Ok((None, trials));
            }
            let y: Vec<u64> = cells
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    Fail::Data(format!(
                        "row {t}: category counts must be all present or all NA"
                    ))
                })?;
            let trials = trials.ok_or_else(|| {
                Fail::Data(format!("row {t}: observed counts need a trial total"))
            })?;
            let total: u64 = y.iter().sum();
            if total > trials {
                return Err(Fail::Data(format!(
                    "row {t}: category counts sum to {total}, above the trial total {trials}"
                )));
            }
            Ok((Some(Observation::Counts { y, trials }), Some(trials)))
        }
    }
}

fn label_header(label: Option<(&str, &[String])>, headers: &mut Vec<String>) {
    if let Some((name, _)) = label {
        headers.push(name.to_string());
    }
}

fn label_cell(label: Option<(&str, &[String])>, i: usize, row: &mut Vec<String>) {
    if let Some((_, cells)) = label {
        row.push(cells[i].clone());
    }
}

fn push_series(headers: &mut Vec<String>, prefix: &str, n: usize) {
    for i in 1..=n {
        headers.push(format!("{prefix}_{i}"));
    }
}

fn filtered_table(
    trajectory: &FilterTrajectory,
    label: Option<(&str, &[String])>,
) -> (Vec<String>, Vec<Vec<String>>) {
    let k = trajectory.records[0].predictor_mean.len();
    let p = trajectory.records[0].mean.len();
    let mut headers = Vec::new();
    label_header(label, &mut headers);
    headers.push("t".into());
    push_series(&mut headers, "f", k);
    push_series(&mut headers, "q", k);
    push_series(&mut headers, "fstar", k);
    push_series(&mut headers, "qstar", k);
    push_series(&mut headers, "m", p);
    push_series(&mut headers, "c", p);
    headers.push("log_score".into());

    let rows = trajectory
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut row = Vec::with_capacity(headers.len());
            label_cell(label, i, &mut row);
            row.push(rec.t.to_string());
            row.extend(rec.predictor_mean.iter().map(|v| float_cell(*v)));
            row.extend((0..k).map(|j| float_cell(rec.predictor_cov[(j, j)])));
            row.extend(rec.post_predictor_mean.iter().map(|v| float_cell(*v)));
            row.extend((0..k).map(|j| float_cell(rec.post_predictor_cov[(j, j)])));
            row.extend(rec.mean.iter().map(|v| float_cell(*v)));
            row.extend((0..p).map(|j| float_cell(rec.cov[(j, j)])));
            row.push(match rec.log_predictive {
                Some(s) => float_cell(s),
                None => "NA".into(),
            });
            row
        })
        .collect();
    (headers, rows)
}

fn smoothed_table(
    smoothed: &SmoothedTrajectory,
    label: Option<(&str, &[String])>,
) -> (Vec<String>, Vec<Vec<String>>) {
    let p = smoothed.records[0].mean.len();
    let k = smoothed.records[0].predictor_mean.len();
    let mut headers = Vec::new();
    label_header(label, &mut headers);
    headers.push("t".into());
    push_series(&mut headers, "ms", p);
    push_series(&mut headers, "cs", p);
    push_series(&mut headers, "lambda", k);
    push_series(&mut headers, "lambda_lo", k);
    push_series(&mut headers, "lambda_hi", k);

    let rows = smoothed
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut row = Vec::with_capacity(headers.len());
            label_cell(label, i, &mut row);
            row.push(rec.t.to_string());
            row.extend(rec.mean.iter().map(|v| float_cell(*v)));
            row.extend((0..p).map(|j| float_cell(rec.cov[(j, j)])));
            row.extend(rec.predictor_mean.iter().map(|v| float_cell(*v)));
            // central 95% interval under normality of the predictor
            for j in 0..k {
                let half = 1.96 * rec.predictor_cov[(j, j)].sqrt();
                row.push(float_cell(rec.predictor_mean[j] - half));
            }
            for j in 0..k {
                let half = 1.96 * rec.predictor_cov[(j, j)].sqrt();
                row.push(float_cell(rec.predictor_mean[j] + half));
            }
            row
        })
        .collect();
    (headers, rows)
}

fn forecast_table(bundle: &ForecastBundle) -> (Vec<String>, Vec<Vec<String>>) {
    let k = bundle.horizons[0].predictor_mean.len();
    let n = bundle.horizons[0].outcomes.len();
    let mut headers = vec!["j".to_string()];
    push_series(&mut headers, "f", k);
    push_series(&mut headers, "q", k);
    push_series(&mut headers, "mean", n);
    push_series(&mut headers, "variance", n);
    push_series(&mut headers, "q025", n);
    push_series(&mut headers, "q500", n);
    push_series(&mut headers, "q975", n);

    let rows = bundle
        .horizons
        .iter()
        .map(|hz| {
            let mut row = Vec::with_capacity(headers.len());
            row.push(hz.horizon.to_string());
            row.extend(hz.predictor_mean.iter().map(|v| float_cell(*v)));
            row.extend((0..k).map(|j| float_cell(hz.predictor_cov[(j, j)])));
            row.extend(hz.outcomes.iter().map(|s| float_cell(s.mean)));
            row.extend(hz.outcomes.iter().map(|s| float_cell(s.variance)));
            row.extend(hz.outcomes.iter().map(|s| float_cell(s.q025)));
            row.extend(hz.outcomes.iter().map(|s| float_cell(s.q500)));
            row.extend(hz.outcomes.iter().map(|s| float_cell(s.q975)));
            row
        })
        .collect();
    (headers, rows)
}

pub fn run_simulate(cfg: &RunConfig, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>, Fail> {
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| Fail::Config("simulate needs a simulation block in the config".into()))?;
    if sim.t_len == 0 {
        return Err(Fail::Data("simulation length is zero".into()));
    }
    let model = cfg.build_model()?;
    let p = model.state_dim();
    if sim.state_noise.len() != p || sim.initial_state.len() != p {
        return Err(Fail::Config(format!(
            "simulation block dimensions ({}, {}) do not match the state dimension {p}",
            sim.state_noise.len(),
            sim.initial_state.len()
        )));
    }
    let w = DMatrix::from_diagonal(&DVector::from_vec(sim.state_noise.clone()));
    let theta0 = DVector::from_vec(sim.initial_state.clone());
    let out = simulate(&model, &w, &theta0, sim.t_len, seed, sim.trials)
        .map_err(|e| Fail::from_core(e, "t"))?;

    let mut headers = vec!["t".to_string()];
    headers.extend(cfg.response.iter().cloned());
    let multinomial = matches!(model.family(), Family::Multinomial { .. });
    if multinomial {
        // The reference category is written too so that row sums equal the
        // trial total; the fit reader selects columns by name and skips it.
        let trials_name = cfg.trials.clone().expect("validated for multinomial");
        if cfg.response.iter().any(|r| r == "remainder") || trials_name == "remainder" {
            return Err(Fail::Config(
                "the column name 'remainder' is reserved by simulate".into(),
            ));
        }
        headers.push("remainder".into());
        headers.push(trials_name);
    }

    let mut data_rows = Vec::with_capacity(sim.t_len);
    for (i, y) in out.observations.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        match y {
            Observation::Count(v) => row.push(v.to_string()),
            Observation::Binary(b) => row.push(u8::from(*b).to_string()),
            Observation::Real(v) => row.push(float_cell(*v)),
            Observation::Counts { y, trials } => {
                row.extend(y.iter().map(u64::to_string));
                row.push((trials - y.iter().sum::<u64>()).to_string());
                row.push(trials.to_string());
            }
        }
        data_rows.push(row);
    }

    let k = model.predictor_dim();
    let mut truth_headers = vec!["t".to_string()];
    push_series(&mut truth_headers, "theta", p);
    push_series(&mut truth_headers, "lambda", k);
    let truth_rows: Vec<Vec<String>> = (0..sim.t_len)
        .map(|i| {
            let mut row = vec![(i + 1).to_string()];
            row.extend(out.states[i].iter().map(|v| float_cell(*v)));
            row.extend(out.predictors[i].iter().map(|v| float_cell(*v)));
            row
        })
        .collect();

    fs::create_dir_all(out_dir)
        .map_err(|e| Fail::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let data_path = out_dir.join("data.csv");
    write_atomic(&data_path, &headers, &data_rows)?;
    let truth_path = out_dir.join("truth.csv");
    write_atomic(&truth_path, &truth_headers, &truth_rows)?;
    Ok(vec![data_path, truth_path])
}
