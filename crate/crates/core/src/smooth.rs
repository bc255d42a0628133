//! Backward smoothing over a stored filter trajectory, and multi-step
//! forecasting with per-horizon predictive summaries.
//!
//! Smoothing runs the fixed-interval backward recursion on the Gaussian
//! state moments,
//!
//! ```text
//! mˢ_t = m_t + C_t G' R⁻¹_{t+1} (mˢ_{t+1} − a_{t+1})
//! Cˢ_t = C_t + C_t G' R⁻¹_{t+1} (Cˢ_{t+1} − R_{t+1}) R⁻¹_{t+1} G C_t
//! ```
//!
//! starting from the terminal copy (mˢ_T, Cˢ_T) = (m_T, C_T). The stored
//! (a_{t+1}, R_{t+1}) already include any intervention applied while
//! filtering. Forecasting propagates (m_T, C_T) forward with the same
//! discount scheme the filter used, re-projects the predictor prior onto
//! the conjugate family at every horizon, and summarizes the resulting
//! closed-form predictive (negative binomial, Bernoulli, per-category
//! beta-binomial, or Student t).

use crate::family::{prior_to_conjugate, ConjugateParams, ProjectionMode};
use crate::filter::{FilterRecord, FilterTrajectory};
use crate::linalg::{symmetrize, FlooredEigen};
use crate::special::{log_beta, raw_log_gamma, reg_inc_beta};
use crate::state_space::StateModel;
use crate::{Error, Result};
use alloc::vec::Vec;
use libm::{exp, fabs, log, sqrt};
use nalgebra::{DMatrix, DVector};

/// Smoothed state and predictor moments at one time step.
#[derive(Clone, Debug)]
pub struct SmoothedRecord {
    /// 1-based time index.
    pub t: usize,
    /// Smoothed state mean mˢ_t.
    pub mean: DVector<f64>,
    /// Smoothed state covariance Cˢ_t.
    pub cov: DMatrix<f64>,
    /// Smoothed predictor mean F'_t mˢ_t.
    pub predictor_mean: DVector<f64>,
    /// Smoothed predictor covariance F'_t Cˢ_t F_t.
    pub predictor_cov: DMatrix<f64>,
}

/// Smoothing output, in forward time order.
#[derive(Clone, Debug)]
pub struct SmoothedTrajectory {
    pub records: Vec<SmoothedRecord>,
}

/// Runs the backward recursion over a completed filter pass.
///
/// The terminal step copies the filtered moments without arithmetic, so
/// the last smoothed record is bit-identical to the last filtered one.
pub fn smooth(trajectory: &FilterTrajectory, model: &StateModel) -> Result<SmoothedTrajectory> {
    let records = &trajectory.records;
    let n = records.len();
    if n == 0 {
        return Err(Error::Config("cannot smooth an empty trajectory".into()));
    }
    let g = model.evolution();
    let mut out: Vec<SmoothedRecord> = Vec::with_capacity(n);
    let last = &records[n - 1];
    out.push(smoothed_record(last, last.mean.clone(), last.cov.clone()));
    for i in (0..n - 1).rev() {
        let rec = &records[i];
        let next = &records[i + 1];
        let prev_smoothed = out.last().unwrap();
        let re = FlooredEigen::new(&next.prior_cov).map_err(|e| e.at(rec.t))?;
        // B = C_t G' R⁻¹, computed as (R⁻¹ G C_t)' through floored solves
        let b = re.solve(&(g * &rec.cov)).transpose();
        let mean = &rec.mean + &b * (&prev_smoothed.mean - &next.prior_mean);
        let mut cov =
            &rec.cov + &b * (&prev_smoothed.cov - &next.prior_cov) * b.transpose();
        symmetrize(&mut cov);
        out.push(smoothed_record(rec, mean, cov));
    }
    out.reverse();
    Ok(SmoothedTrajectory { records: out })
}

fn smoothed_record(rec: &FilterRecord, mean: DVector<f64>, cov: DMatrix<f64>) -> SmoothedRecord {
    let predictor_mean = rec.obs_matrix.transpose() * &mean;
    let mut predictor_cov = rec.obs_matrix.transpose() * &cov * &rec.obs_matrix;
    symmetrize(&mut predictor_cov);
    SmoothedRecord {
        t: rec.t,
        mean,
        cov,
        predictor_mean,
        predictor_cov,
    }
}

/// Location, spread and central quantiles of a one-step predictive.
#[derive(Clone, Copy, Debug)]
pub struct PredictiveSummary {
    pub mean: f64,
    /// Infinite for a Student t with at most two degrees of freedom.
    pub variance: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

/// What to compute when forecasting from the end of a filter pass.
#[derive(Clone, Debug)]
pub struct ForecastSpec {
    /// Number of steps ahead (J ≥ 1).
    pub horizons: usize,
    /// Covariate row per horizon; empty when the model has no
    /// regression blocks, otherwise one row per horizon.
    pub covariates: Vec<Vec<f64>>,
    /// Trial count per future observation; required for the
    /// multinomial family, ignored elsewhere.
    pub trials: Option<u64>,
    pub mode: ProjectionMode,
}

/// Forecast output for one horizon.
#[derive(Clone, Debug)]
pub struct HorizonForecast {
    /// Steps ahead, 1-based.
    pub horizon: usize,
    /// Propagated state mean a_T(j).
    pub state_mean: DVector<f64>,
    /// Propagated state covariance R_T(j).
    pub state_cov: DMatrix<f64>,
    /// Predictor prior mean f_T(j).
    pub predictor_mean: DVector<f64>,
    /// Predictor prior covariance Q_T(j).
    pub predictor_cov: DMatrix<f64>,
    /// Conjugate parameters projected at this horizon.
    pub params: ConjugateParams,
    /// One summary per outcome: a single entry for scalar families,
    /// one per category for the multinomial.
    pub outcomes: Vec<PredictiveSummary>,
}

/// Forecasts for horizons 1..=J.
#[derive(Clone, Debug)]
pub struct ForecastBundle {
    pub horizons: Vec<HorizonForecast>,
}

/// Propagates the final filtered state forward and summarizes the
/// predictive distribution at each horizon.
///
/// Future innovation covariances come from the model's discounts exactly
/// as in filtering: each propagation discounts the covariance it evolved.
pub fn forecast(
    last: &FilterRecord,
    model: &StateModel,
    spec: &ForecastSpec,
) -> Result<ForecastBundle> {
    if spec.horizons == 0 {
        return Err(Error::Config("forecast needs at least one horizon".into()));
    }
    if !spec.covariates.is_empty() && spec.covariates.len() != spec.horizons {
        return Err(Error::Config(alloc::format!(
            "got {} covariate rows for {} horizons",
            spec.covariates.len(),
            spec.horizons
        )));
    }
    let empty: Vec<f64> = Vec::new();
    let mut a = last.mean.clone();
    let mut r = last.cov.clone();
    let mut horizons = Vec::with_capacity(spec.horizons);
    for j in 1..=spec.horizons {
        let mut step = || -> Result<HorizonForecast> {
            let (a_next, r_next) = model.evolve(&a, &r)?;
            a = a_next;
            r = r_next;
            let row = spec.covariates.get(j - 1).unwrap_or(&empty);
            let f_mat = model.observation_matrix(row)?;
            let f = f_mat.transpose() * &a;
            let mut q = f_mat.transpose() * &r * &f_mat;
            symmetrize(&mut q);
            let params = prior_to_conjugate(model.family(), &f, &q, spec.mode)?;
            let outcomes = predictive_summary(&params, spec.trials)?;
            Ok(HorizonForecast {
                horizon: j,
                state_mean: a.clone(),
                state_cov: r.clone(),
                predictor_mean: f,
                predictor_cov: q,
                params,
                outcomes,
            })
        };
        horizons.push(step().map_err(|e| e.at(j))?);
    }
    Ok(ForecastBundle { horizons })
}

/// Summarizes the closed-form predictive of a conjugate prior: negative
/// binomial for Gamma, Bernoulli for Beta, per-category beta-binomial
/// for Dirichlet (needs `trials`), Student t for Normal-Gamma.
pub fn predictive_summary(
    params: &ConjugateParams,
    trials: Option<u64>,
) -> Result<Vec<PredictiveSummary>> {
    params.validate()?;
    match params {
        ConjugateParams::Gamma { tau1, tau2 } => {
            let (r, rate) = (*tau1, *tau2);
            let mean = r / rate;
            let variance = r * (1.0 + rate) / (rate * rate);
            // NB(y) with failure probability 1/(1+τ2) per unit
            let ln_p = log(rate) - libm::log1p(rate);
            let ln_1p = -libm::log1p(rate);
            let log_pmf = |y: u64| {
                let yf = y as f64;
                raw_log_gamma(yf + r) - raw_log_gamma(yf + 1.0) - raw_log_gamma(r)
                    + r * ln_p
                    + yf * ln_1p
            };
            let [q025, q500, q975] = discrete_quantiles(log_pmf, None)?;
            Ok(alloc::vec![PredictiveSummary {
                mean,
                variance,
                q025,
                q500,
                q975,
            }])
        }
        ConjugateParams::Beta { .. } => {
            let (alpha, beta) = (params.beta_alpha(), params.beta_beta());
            let p1 = alpha / (alpha + beta);
            let log_pmf = move |y: u64| if y == 0 { log(1.0 - p1) } else { log(p1) };
            let [q025, q500, q975] = discrete_quantiles(log_pmf, Some(1))?;
            Ok(alloc::vec![PredictiveSummary {
                mean: p1,
                variance: p1 * (1.0 - p1),
                q025,
                q500,
                q975,
            }])
        }
        ConjugateParams::Dirichlet { alpha } => {
            let n = trials.ok_or_else(|| {
                Error::Config("multinomial forecasting requires a trial count".into())
            })?;
            let total: f64 = alpha.iter().sum();
            let nf = n as f64;
            let ln_choose = |y: f64| {
                raw_log_gamma(nf + 1.0) - raw_log_gamma(y + 1.0) - raw_log_gamma(nf - y + 1.0)
            };
            alpha
                .iter()
                .map(|&a| {
                    let b = total - a;
                    let p = a / total;
                    let mean = nf * p;
                    let variance = nf * p * (1.0 - p) * (total + nf) / (total + 1.0);
                    let log_pmf = |y: u64| {
                        let yf = y as f64;
                        ln_choose(yf) + log_beta(a + yf, b + nf - yf) - log_beta(a, b)
                    };
                    let [q025, q500, q975] = discrete_quantiles(log_pmf, Some(n))?;
                    Ok(PredictiveSummary {
                        mean,
                        variance,
                        q025,
                        q500,
                        q975,
                    })
                })
                .collect()
        }
        ConjugateParams::NormalGamma { .. } => {
            let (c0, mu0) = (params.ng_c0(), params.ng_mu0());
            let (n0, d0) = (params.ng_n0(), params.ng_d0());
            // y ~ t with ν = n0 degrees of freedom, location μ0 and
            // squared scale d0 (c0 + 1) / (n0 c0)
            let scale = sqrt(d0 * (c0 + 1.0) / (n0 * c0));
            let variance = if n0 > 2.0 {
                scale * scale * n0 / (n0 - 2.0)
            } else {
                f64::INFINITY
            };
            let spread = student_t_quantile(0.975, n0)?;
            Ok(alloc::vec![PredictiveSummary {
                // location; it is also the median, and the mean whenever
                // the mean exists (ν > 1)
                mean: mu0,
                variance,
                q025: mu0 - scale * spread,
                q500: mu0,
                q975: mu0 + scale * spread,
            }])
        }
    }
}

// Smallest y with CDF(y) ≥ p for p in {0.025, 0.5, 0.975}, walking the
// pmf from zero. A tiny slack absorbs roundoff at exact-tie levels.
fn discrete_quantiles(
    log_pmf: impl Fn(u64) -> f64,
    upper: Option<u64>,
) -> Result<[f64; 3]> {
    const PROBS: [f64; 3] = [0.025, 0.5, 0.975];
    const CAP: u64 = 20_000_000;
    let mut out = [0.0f64; 3];
    let mut next = 0usize;
    let mut cdf = 0.0f64;
    let mut y = 0u64;
    loop {
        cdf += exp(log_pmf(y));
        while next < 3 && cdf >= PROBS[next] - 1e-13 {
            out[next] = y as f64;
            next += 1;
        }
        if next == 3 {
            return Ok(out);
        }
        if upper == Some(y) {
            // the support is exhausted; park the rest at its end
            while next < 3 {
                out[next] = y as f64;
                next += 1;
            }
            return Ok(out);
        }
        y += 1;
        if y > CAP {
            return Err(Error::Numerical(
                "predictive quantile scan exceeded its iteration cap".into(),
            ));
        }
    }
}

/// Quantile of the standard Student t with ν > 0 degrees of freedom.
///
/// The CDF is expressed through the regularized incomplete beta and
/// inverted by bracketed bisection; symmetry handles the lower tail.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(alloc::format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::Domain(alloc::format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let target = if p > 0.5 { p } else { 1.0 - p };
    let cdf = |t: f64| -> Result<f64> {
        Ok(1.0 - 0.5 * reg_inc_beta(0.5 * nu, 0.5, nu / (nu + t * t))?)
    };
    let mut hi = 1.0;
    let mut grow = 0;
    while cdf(hi)? < target {
        hi *= 2.0;
        grow += 1;
        if grow > 1024 {
            return Err(Error::NonConvergence {
                what: "student_t_quantile bracket",
                residual: target - cdf(hi)?,
                iterations: grow,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + fabs(hi)) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(if p > 0.5 { t } else { -t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, Observation};
    use crate::filter::{filter_series, TimePoint};
    use crate::state_space::{build_structure, BlockKind, BlockSpec};
    use alloc::vec;

    fn local_level(family: Family, discount: f64) -> StateModel {
        build_structure(
            family,
            vec![BlockSpec {
                kind: BlockKind::Polynomial { order: 1 },
                discount,
                targets: vec![0],
            }],
        )
        .unwrap()
    }

    fn poisson_series(counts: &[u64]) -> Vec<TimePoint> {
        counts
            .iter()
            .map(|c| TimePoint::observed(Observation::Count(*c)))
            .collect()
    }

    fn run_filter(model: &StateModel, data: &[TimePoint]) -> FilterTrajectory {
        filter_series(
            model,
            &DVector::zeros(model.state_dim()),
            &DMatrix::identity(model.state_dim(), model.state_dim()),
            data,
            &[],
            ProjectionMode::Exact,
        )
        .unwrap()
    }

    #[test]
    fn terminal_record_is_copied_bit_exact() {
        let model = local_level(Family::Poisson, 0.9);
        let traj = run_filter(&model, &poisson_series(&[4, 2, 7, 5, 3]));
        let sm = smooth(&traj, &model).unwrap();
        let last_f = traj.records.last().unwrap();
        let last_s = sm.records.last().unwrap();
        assert_eq!(last_s.mean, last_f.mean);
        assert_eq!(last_s.cov, last_f.cov);
        assert_eq!(sm.records.len(), traj.records.len());
        assert_eq!(sm.records[0].t, 1);
    }

    #[test]
    fn single_step_smoothing_equals_filtering() {
        let model = local_level(Family::Poisson, 1.0);
        let traj = run_filter(&model, &poisson_series(&[3]));
        let sm = smooth(&traj, &model).unwrap();
        assert_eq!(sm.records[0].mean, traj.records[0].mean);
        assert_eq!(sm.records[0].cov, traj.records[0].cov);
    }

    #[test]
    fn static_state_smoother_is_constant() {
        // discount 1 means no innovation: the state is one unknown
        // constant, so every smoothed moment equals the terminal one
        let model = local_level(Family::Poisson, 1.0);
        let traj = run_filter(&model, &poisson_series(&[4, 2, 7, 5, 3, 6, 2, 4]));
        let sm = smooth(&traj, &model).unwrap();
        let last = sm.records.last().unwrap();
        for rec in &sm.records {
            assert!(fabs(rec.mean[0] - last.mean[0]) < 1e-10);
            assert!(fabs(rec.cov[(0, 0)] - last.cov[(0, 0)]) < 1e-10);
            assert!(fabs(rec.predictor_mean[0] - rec.mean[0]) < 1e-14);
        }
    }

    #[test]
    fn smoothing_interpolates_across_a_gap() {
        let model = local_level(Family::Poisson, 0.8);
        let mut data = poisson_series(&[5, 5, 5, 5, 5]);
        data[2] = TimePoint::missing();
        let traj = run_filter(&model, &data);
        let sm = smooth(&traj, &model).unwrap();
        // the smoothed variance at the gap must not exceed the filtered
        // prior variance there, and should beat the filtered posterior
        let fr = &traj.records[2];
        let sr = &sm.records[2];
        assert!(sr.cov[(0, 0)] < fr.cov[(0, 0)]);
    }

    #[test]
    fn one_step_forecast_matches_next_filter_prior() {
        let model = local_level(Family::Poisson, 0.9);
        let counts = [3u64, 5, 2, 8, 4, 6, 1, 0, 7, 3];
        let data = poisson_series(&counts);
        let full = run_filter(&model, &data);
        let head = run_filter(&model, &data[..9]);
        let bundle = forecast(
            head.records.last().unwrap(),
            &model,
            &ForecastSpec {
                horizons: 1,
                covariates: vec![],
                trials: None,
                mode: ProjectionMode::Exact,
            },
        )
        .unwrap();
        let h1 = &bundle.horizons[0];
        let r10 = &full.records[9];
        assert!(fabs(h1.predictor_mean[0] - r10.predictor_mean[0]) < 1e-14);
        assert!(fabs(h1.predictor_cov[(0, 0)] - r10.predictor_cov[(0, 0)]) < 1e-14);
        let (ConjugateParams::Gamma { tau1, tau2 }, Some(ConjugateParams::Gamma { tau1: t1, tau2: t2 })) =
            (&h1.params, &r10.conjugate_prior)
        else {
            panic!()
        };
        assert!(fabs(tau1 - t1) < 1e-12 && fabs(tau2 - t2) < 1e-12);
    }

    #[test]
    fn harmonic_forecast_is_periodic() {
        let model = build_structure(
            Family::Poisson,
            vec![
                BlockSpec {
                    kind: BlockKind::Polynomial { order: 1 },
                    discount: 1.0,
                    targets: vec![0],
                },
                BlockSpec {
                    kind: BlockKind::Harmonic {
                        period: 4.0,
                        harmonic: 1,
                    },
                    discount: 1.0,
                    targets: vec![0],
                },
            ],
        )
        .unwrap();
        let traj = run_filter(&model, &poisson_series(&[6, 2, 1, 3, 7, 2, 1, 4]));
        let bundle = forecast(
            traj.records.last().unwrap(),
            &model,
            &ForecastSpec {
                horizons: 8,
                covariates: vec![],
                trials: None,
                mode: ProjectionMode::Exact,
            },
        )
        .unwrap();
        for j in 0..4 {
            let a = &bundle.horizons[j];
            let b = &bundle.horizons[j + 4];
            assert!(fabs(a.predictor_mean[0] - b.predictor_mean[0]) < 1e-10);
        }
    }

    #[test]
    fn negative_binomial_summary_hand_example() {
        let s = predictive_summary(&ConjugateParams::Gamma { tau1: 2.0, tau2: 1.0 }, None)
            .unwrap();
        assert_eq!(s.len(), 1);
        let s = s[0];
        assert!(fabs(s.mean - 2.0) < 1e-14);
        assert!(fabs(s.variance - 4.0) < 1e-14);
        // pmf(y) = (y + 1) / 2^{y+2}: CDF hits 0.025 at 0, 0.5 at 1,
        // 0.975 at 7
        assert_eq!(s.q025, 0.0);
        assert_eq!(s.q500, 1.0);
        assert_eq!(s.q975, 7.0);
    }

    #[test]
    fn bernoulli_summary_from_beta() {
        // α = 3, β = 1: success probability 0.75
        let s = predictive_summary(&ConjugateParams::Beta { tau1: 2.0, tau0: 2.0 }, None)
            .unwrap()[0];
        assert!(fabs(s.mean - 0.75) < 1e-14);
        assert!(fabs(s.variance - 0.1875) < 1e-14);
        assert_eq!((s.q025, s.q500, s.q975), (0.0, 1.0, 1.0));
    }

    #[test]
    fn beta_binomial_summary_per_category() {
        let params = ConjugateParams::Dirichlet {
            alpha: vec![2.0, 3.0, 5.0],
        };
        assert!(predictive_summary(&params, None).is_err());
        let s = predictive_summary(&params, Some(10)).unwrap();
        assert_eq!(s.len(), 3);
        assert!(fabs(s[0].mean - 2.0) < 1e-12);
        assert!(fabs(s[1].mean - 3.0) < 1e-12);
        assert!(fabs(s[2].mean - 5.0) < 1e-12);
        // var = n p (1-p) (total + n) / (total + 1)
        assert!(fabs(s[0].variance - 10.0 * 0.2 * 0.8 * 20.0 / 11.0) < 1e-12);
        // BB(10, 2, 8): cdf(1) = 0.4582, cdf(2) = 0.6672
        assert_eq!(s[0].q500, 2.0);
        for cat in &s {
            assert!(cat.q025 <= cat.q500 && cat.q500 <= cat.q975);
            assert!(cat.q975 <= 10.0);
        }
    }

    #[test]
    fn student_t_summary_and_quantiles() {
        // ν = 4, c0 = 1, d0 = 2 gives unit scale
        let params = ConjugateParams::normal_gamma_from_moments(1.0, 1.0, 4.0, 2.0);
        let s = predictive_summary(&params, None).unwrap()[0];
        let t975 = 2.7764451051977987;
        assert!(fabs(s.mean - 1.0) < 1e-14);
        assert!(fabs(s.variance - 2.0) < 1e-12);
        assert!(fabs(s.q500 - 1.0) < 1e-14);
        assert!(fabs(s.q975 - (1.0 + t975)) < 1e-9);
        assert!(fabs(s.q025 - (1.0 - t975)) < 1e-9);

        // one degree of freedom: infinite variance, Cauchy quantiles
        let params = ConjugateParams::normal_gamma_from_moments(0.0, 1.0, 1.0, 1.0);
        let s = predictive_summary(&params, None).unwrap()[0];
        assert!(s.variance.is_infinite());
        let scale = sqrt(2.0);
        assert!(fabs(s.q975 - scale * 12.706204736174698) < 1e-6);

        assert!(fabs(student_t_quantile(0.975, 1.0).unwrap() - 12.706204736174698) < 1e-9);
        assert!(fabs(student_t_quantile(0.025, 4.0).unwrap() + t975) < 1e-9);
        assert_eq!(student_t_quantile(0.5, 7.0).unwrap(), 0.0);
        assert!(student_t_quantile(0.0, 4.0).is_err());
    }

    #[test]
    fn forecast_validates_its_spec() {
        let model = local_level(Family::Poisson, 0.9);
        let traj = run_filter(&model, &poisson_series(&[3, 4]));
        let last = traj.records.last().unwrap();
        let bad = ForecastSpec {
            horizons: 0,
            covariates: vec![],
            trials: None,
            mode: ProjectionMode::Exact,
        };
        assert!(forecast(last, &model, &bad).is_err());
        let mismatched = ForecastSpec {
            horizons: 3,
            covariates: vec![vec![]; 2],
            trials: None,
            mode: ProjectionMode::Exact,
        };
        assert!(forecast(last, &model, &mismatched).is_err());
    }

    #[test]
    fn forecast_variance_grows_with_horizon_under_discounting() {
        let model = local_level(Family::Poisson, 0.9);
        let traj = run_filter(&model, &poisson_series(&[5, 6, 4, 5, 7, 5]));
        let bundle = forecast(
            traj.records.last().unwrap(),
            &model,
            &ForecastSpec {
                horizons: 6,
                covariates: vec![],
                trials: None,
                mode: ProjectionMode::Exact,
            },
        )
        .unwrap();
        for w in bundle.horizons.windows(2) {
            assert!(w[1].predictor_cov[(0, 0)] > w[0].predictor_cov[(0, 0)]);
        }
    }
}
