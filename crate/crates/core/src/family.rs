//! Conjugate exponential families and the per-family projection steps.
//!
//! For each supported family this module implements the four operations a
//! filtering step needs after the state prior has been evolved:
//!
//! 1. `prior_to_conjugate`: project the Gaussian prior N(f, Q) on the linear
//!    predictor λ onto the family's conjugate prior by moment matching
//!    E_p[H(η)] = E_q[H(η)] of the conjugate sufficient statistics (the
//!    stationarity condition of KL minimization over the conjugate family).
//! 2. `conjugate_update`: the exact Bayes update, additive in the
//!    sufficient statistics of the observation.
//! 3. `conjugate_to_predictor`: mean and covariance of λ under the updated
//!    conjugate law, returned as the Gaussian (f*, Q*).
//! 4. `log_predictive`: log marginal mass/density of the next observation,
//!    evaluated through log-normalizer differences.
//!
//! Families and links: Poisson (log), Bernoulli (logit), Normal with
//! unknown mean and precision (identity, log), Multinomial over d+1
//! categories (log odds against the last category).

use crate::linalg::check_covariance;
use crate::special::{inv_digamma_minus_log, raw_digamma, raw_log_gamma, raw_trigamma};
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use libm::{exp, fabs, log};
use nalgebra::{DMatrix, DVector};

/// Observation family of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Poisson,
    Bernoulli,
    /// Gaussian observations with unknown mean and precision; the linear
    /// predictor is (mean, log precision).
    Normal,
    /// Counts over `categories` ≥ 2 cells with a known trial total; the
    /// linear predictor holds the d = categories - 1 log odds against the
    /// last category.
    Multinomial { categories: usize },
}

impl Family {
    /// Dimension k of the linear predictor.
    pub fn predictor_dim(&self) -> usize {
        match self {
            Family::Poisson | Family::Bernoulli => 1,
            Family::Normal => 2,
            Family::Multinomial { categories } => categories - 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Bernoulli => "bernoulli",
            Family::Normal => "normal",
            Family::Multinomial { .. } => "multinomial",
        }
    }
}

/// Mode of the Gaussian-to-conjugate projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// Solve the moment-matching systems exactly.
    #[default]
    Exact,
    /// Poisson only: the closed-form digamma approximation τ1 = 1/q,
    /// τ2 = exp(-(f+q/2))/q. Other families are unaffected.
    FastPoisson,
}

/// Conjugate-prior parameters, tagged by family.
#[derive(Clone, Debug, PartialEq)]
pub enum ConjugateParams {
    /// Poisson rate prior Gamma(shape τ1, rate τ2).
    Gamma { tau1: f64, tau2: f64 },
    /// Bernoulli probability prior Beta(τ1 + 1, τ0 - τ1 + 1).
    Beta { tau1: f64, tau0: f64 },
    /// Multinomial cell-probability prior Dirichlet(α_1..α_{d+1}).
    Dirichlet { alpha: Vec<f64> },
    /// Normal-Gamma prior in canonical coordinates; see the accessors for
    /// the (μ0, c0, n0, d0) reparametrization.
    NormalGamma {
        tau1: f64,
        tau2: f64,
        tau3: f64,
        tau0: f64,
    },
}

impl ConjugateParams {
    pub fn family(&self) -> Family {
        match self {
            ConjugateParams::Gamma { .. } => Family::Poisson,
            ConjugateParams::Beta { .. } => Family::Bernoulli,
            ConjugateParams::Dirichlet { alpha } => Family::Multinomial {
                categories: alpha.len(),
            },
            ConjugateParams::NormalGamma { .. } => Family::Normal,
        }
    }

    /// Beta first shape α = τ1 + 1.
    pub fn beta_alpha(&self) -> f64 {
        match self {
            ConjugateParams::Beta { tau1, .. } => tau1 + 1.0,
            _ => f64::NAN,
        }
    }

    /// Beta second shape β = τ0 - τ1 + 1.
    pub fn beta_beta(&self) -> f64 {
        match self {
            ConjugateParams::Beta { tau1, tau0 } => tau0 - tau1 + 1.0,
            _ => f64::NAN,
        }
    }

    /// Normal-Gamma precision scale c0 = -2 τ1.
    pub fn ng_c0(&self) -> f64 {
        match self {
            ConjugateParams::NormalGamma { tau1, .. } => -2.0 * tau1,
            _ => f64::NAN,
        }
    }

    /// Normal-Gamma location μ0 = -τ2 / (2 τ1).
    pub fn ng_mu0(&self) -> f64 {
        match self {
            ConjugateParams::NormalGamma { tau1, tau2, .. } => -tau2 / (2.0 * tau1),
            _ => f64::NAN,
        }
    }

    /// Normal-Gamma degrees of freedom n0 = 2 τ0 + 1.
    pub fn ng_n0(&self) -> f64 {
        match self {
            ConjugateParams::NormalGamma { tau0, .. } => 2.0 * tau0 + 1.0,
            _ => f64::NAN,
        }
    }

    /// Normal-Gamma rate scale d0 = 2 (τ2²/(4 τ1) - τ3).
    pub fn ng_d0(&self) -> f64 {
        match self {
            ConjugateParams::NormalGamma {
                tau1, tau2, tau3, ..
            } => 2.0 * (tau2 * tau2 / (4.0 * tau1) - tau3),
            _ => f64::NAN,
        }
    }

    /// Builds the Normal-Gamma from (μ0, c0, n0, d0).
    pub fn normal_gamma_from_moments(mu0: f64, c0: f64, n0: f64, d0: f64) -> ConjugateParams {
        ConjugateParams::NormalGamma {
            tau1: -c0 / 2.0,
            tau2: c0 * mu0,
            tau3: -c0 * mu0 * mu0 / 2.0 - d0 / 2.0,
            tau0: n0 / 2.0 - 0.5,
        }
    }

    /// Validates the family's positivity invariants.
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ConjugateParams::Gamma { tau1, tau2 } => *tau1 > 0.0 && *tau2 > 0.0,
            ConjugateParams::Beta { .. } => self.beta_alpha() > 0.0 && self.beta_beta() > 0.0,
            ConjugateParams::Dirichlet { alpha } => {
                alpha.len() >= 2 && alpha.iter().all(|a| *a > 0.0)
            }
            ConjugateParams::NormalGamma { .. } => {
                self.ng_c0() > 0.0 && self.ng_d0() > 0.0 && self.ng_n0() > 0.0
            }
        };
        let finite = match self {
            ConjugateParams::Gamma { tau1, tau2 } => tau1.is_finite() && tau2.is_finite(),
            ConjugateParams::Beta { tau1, tau0 } => tau1.is_finite() && tau0.is_finite(),
            ConjugateParams::Dirichlet { alpha } => alpha.iter().all(|a| a.is_finite()),
            ConjugateParams::NormalGamma {
                tau1,
                tau2,
                tau3,
                tau0,
            } => [tau1, tau2, tau3, tau0].iter().all(|t| t.is_finite()),
        };
        if ok && finite {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "invalid {} conjugate parameters: {self:?}",
                self.family().name()
            )))
        }
    }
}

/// A single observation, matching the model family.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// Poisson count.
    Count(u64),
    /// Bernoulli outcome.
    Binary(bool),
    /// Normal response.
    Real(f64),
    /// Multinomial counts for the first d categories plus the trial total;
    /// the last cell is trials - Σ y.
    Counts { y: Vec<u64>, trials: u64 },
}

impl Observation {
    fn check_for(&self, family: Family) -> Result<()> {
        let ok = matches!(
            (self, family),
            (Observation::Count(_), Family::Poisson)
                | (Observation::Binary(_), Family::Bernoulli)
                | (Observation::Real(_), Family::Normal)
                | (Observation::Counts { .. }, Family::Multinomial { .. })
        );
        if !ok {
            return Err(Error::Domain(format!(
                "observation {self:?} does not match family {}",
                family.name()
            )));
        }
        if let (Observation::Counts { y, trials }, Family::Multinomial { categories }) =
            (self, family)
        {
            if y.len() != categories - 1 {
                return Err(Error::Domain(format!(
                    "expected {} count columns, got {}",
                    categories - 1,
                    y.len()
                )));
            }
            let sum: u64 = y.iter().sum();
            if sum > *trials {
                return Err(Error::Domain(format!(
                    "multinomial counts sum to {sum}, exceeding {trials} trials"
                )));
            }
        }
        if let Observation::Real(v) = self {
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite normal observation {v}")));
            }
        }
        Ok(())
    }
}

// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(exp(-x))
    } else {
        libm::log1p(exp(x))
    }
}

// e^x / (1 + e^x)^2 = σ(x) σ(-x), evaluated in log space.
fn sigmoid_prime(x: f64) -> f64 {
    exp(x - 2.0 * softplus(x))
}

fn check_predictor_input(family: Family, f: &DVector<f64>, q: &DMatrix<f64>) -> Result<()> {
    let k = family.predictor_dim();
    if f.len() != k || q.nrows() != k || q.ncols() != k {
        return Err(Error::Config(format!(
            "family {} needs a {k}-dimensional predictor, got f len {} and {}x{} covariance",
            family.name(),
            f.len(),
            q.nrows(),
            q.ncols()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite predictor mean".into()));
    }
    // Negative eigenvalues beyond tolerance are a domain error here.
    check_covariance(q, "predictor prior").map_err(|e| Error::Domain(format!("{e}")))
}

/// Projects the Gaussian predictor prior N(f, Q) onto the family's
/// conjugate prior by moment matching.
///
/// Poisson and Normal are solved exactly; Bernoulli and Multinomial solve
/// the stated systems whose last equation carries the second-order Taylor
/// correction of E[log π_last].
pub fn prior_to_conjugate(
    family: Family,
    f: &DVector<f64>,
    q: &DMatrix<f64>,
    mode: ProjectionMode,
) -> Result<ConjugateParams> {
    check_predictor_input(family, f, q)?;
    let params = match family {
        Family::Poisson => poisson_projection(f[0], q[(0, 0)].max(0.0), mode)?,
        Family::Bernoulli => bernoulli_projection(f[0], q[(0, 0)].max(0.0))?,
        Family::Multinomial { .. } => multinomial_projection(f, q)?,
        Family::Normal => normal_projection(f, q)?,
    };
    params.validate()?;
    Ok(params)
}

fn poisson_projection(f: f64, q: f64, mode: ProjectionMode) -> Result<ConjugateParams> {
    let scale = exp(-(f + q / 2.0));
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::Numerical(format!(
            "poisson projection overflow at f={f}, q={q}"
        )));
    }
    let (tau1, tau2) = match mode {
        ProjectionMode::FastPoisson => {
            if q <= 0.0 {
                return Err(Error::Domain(
                    "fast poisson projection requires q > 0".into(),
                ));
            }
            (1.0 / q, scale / q)
        }
        ProjectionMode::Exact => {
            // E[ln η] = f and E[η] = e^{f+q/2} reduce to ψ(τ1) - ln τ1 = -q/2.
            let tau1 = inv_digamma_minus_log(-q / 2.0).map_err(|e| match e {
                Error::Domain(_) => Error::Domain(format!(
                    "poisson projection needs q > 0, got q={q} (point-mass predictor)"
                )),
                other => other,
            })?;
            (tau1, tau1 * scale)
        }
    };
    Ok(ConjugateParams::Gamma { tau1, tau2 })
}

fn bernoulli_projection(f: f64, q: f64) -> Result<ConjugateParams> {
    if q <= 0.0 {
        return Err(Error::NonConvergence {
            what: "bernoulli projection: a zero-variance predictor has no finite Beta match",
            residual: f64::INFINITY,
            iterations: 0,
        });
    }
    // System in (α, β): ψ(α) - ψ(β) = f
    //                   ψ(β) - ψ(α+β) = -softplus(f) - (q/2) σ'(f)
    let rhs2 = -softplus(f) - 0.5 * q * sigmoid_prime(f);
    // Matching ln(α/β) ≈ f and (α+β)/(αβ) ≈ q gives the start below.
    let a0 = ((1.0 + exp(f)) / q).clamp(1e-3, 1e8);
    let b0 = ((1.0 + exp(-f)) / q).clamp(1e-3, 1e8);
    let mut u = [log(a0), log(b0)];
    let mut residual = f64::INFINITY;
    for _ in 0..100 {
        let (a, b) = (exp(u[0]), exp(u[1]));
        let r = [
            raw_digamma(a) - raw_digamma(b) - f,
            raw_digamma(b) - raw_digamma(a + b) - rhs2,
        ];
        residual = fabs(r[0]).max(fabs(r[1]));
        if residual <= 1e-11 {
            return Ok(ConjugateParams::Beta {
                tau1: a - 1.0,
                tau0: a + b - 2.0,
            });
        }
        // Jacobian in (α, β), then chain through the log parametrization.
        let (ta, tb, ts) = (raw_trigamma(a), raw_trigamma(b), raw_trigamma(a + b));
        let j = [
            [ta * a, -tb * b],
            [-ts * a, (tb - ts) * b],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut du = [
            -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
            -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];
        // Damp long steps; the surface is smooth near the solution.
        let len = fabs(du[0]).max(fabs(du[1]));
        if len > 4.0 {
            du[0] *= 4.0 / len;
            du[1] *= 4.0 / len;
        }
        u[0] += du[0];
        u[1] += du[1];
    }
    Err(Error::NonConvergence {
        what: "bernoulli projection",
        residual,
        iterations: 100,
    })
}

fn multinomial_projection(f: &DVector<f64>, q: &DMatrix<f64>) -> Result<ConjugateParams> {
    let d = f.len();
    let trace_q: f64 = (0..d).map(|i| q[(i, i)].max(0.0)).sum();
    if trace_q <= 0.0 {
        return Err(Error::NonConvergence {
            what: "multinomial projection: a zero-variance predictor has no finite Dirichlet match",
            residual: f64::INFINITY,
            iterations: 0,
        });
    }
    // Reference-cell probabilities at λ = f.
    let mut log_denom = 0.0;
    for i in 0..d {
        log_denom = log_sum_exp(log_denom, f[i]);
    }
    let pi_hat: Vec<f64> = (0..d).map(|i| exp(f[i] - log_denom)).collect();
    // Second-order correction: (1/2) tr(H̃ Q) with H̃ = -(diag(π̂) - π̂ π̂').
    let mut tr_hq = 0.0;
    for i in 0..d {
        for j in 0..d {
            let h = if i == j {
                -(pi_hat[i] - pi_hat[i] * pi_hat[i])
            } else {
                pi_hat[i] * pi_hat[j]
            };
            tr_hq += h * q[(j, i)];
        }
    }
    let rhs_last = -log_denom + 0.5 * tr_hq;

    // Unknowns τ_1..τ_{d+1}; the first d equations are the exact log-odds
    // matches ψ(τ_i) - ψ(τ_{d+1}) = f_i, the last carries the Taylor term.
    let n = d + 1;
    let mut u = DVector::<f64>::zeros(n);
    for i in 0..n {
        let ef = if i < d { exp(f[i]) } else { 1.0 };
        u[i] = log((ef.max(0.1) * 2.0 / trace_q).clamp(1e-3, 1e8));
    }
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let tau: Vec<f64> = u.iter().map(|v| exp(*v)).collect();
        let total: f64 = tau.iter().sum();
        let mut r = DVector::<f64>::zeros(n);
        for i in 0..d {
            r[i] = raw_digamma(tau[i]) - raw_digamma(tau[d]) - f[i];
        }
        r[d] = raw_digamma(tau[d]) - raw_digamma(total) - rhs_last;
        residual = r.amax();
        if residual <= 1e-11 {
            return Ok(ConjugateParams::Dirichlet { alpha: tau });
        }
        let tri: Vec<f64> = tau.iter().map(|t| raw_trigamma(*t)).collect();
        let tri_total = raw_trigamma(total);
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..d {
            jac[(i, i)] = tri[i] * tau[i];
            jac[(i, d)] = -tri[d] * tau[d];
        }
        for l in 0..n {
            jac[(d, l)] = -tri_total * tau[l];
        }
        jac[(d, d)] += tri[d] * tau[d];
        let Some(step) = jac.lu().solve(&r) else { break };
        let mut du = -step;
        let len = du.amax();
        if len > 4.0 {
            du *= 4.0 / len;
        }
        u += du;
    }
    Err(Error::NonConvergence {
        what: "multinomial projection",
        residual,
        iterations: 200,
    })
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + log(exp(a - m) + exp(b - m))
}

fn normal_projection(f: &DVector<f64>, q: &DMatrix<f64>) -> Result<ConjugateParams> {
    let (f1, f2) = (f[0], f[1]);
    let (q11, q12, q22) = (q[(0, 0)].max(0.0), q[(0, 1)], q[(1, 1)].max(0.0));
    // r = E[φ] under the lognormal push-forward of λ2.
    let r = exp(f2 + q22 / 2.0);
    if !r.is_finite() || r == 0.0 {
        return Err(Error::Numerical(format!(
            "normal projection overflow at f2={f2}, q22={q22}"
        )));
    }
    if q11 <= 0.0 {
        return Err(Error::Domain(
            "normal projection needs Q11 > 0 (point-mass mean predictor)".into(),
        ));
    }
    // Exact bivariate-lognormal matching of E[φμ²], E[φμ], E[φ], E[ln φ].
    let mu0 = f1 + q12;
    let c0 = 1.0 / (q11 * r);
    let half_n0 = inv_digamma_minus_log(-q22 / 2.0).map_err(|e| match e {
        Error::Domain(_) => Error::Domain(format!(
            "normal projection needs Q22 > 0, got {q22} (point-mass precision predictor)"
        )),
        other => other,
    })?;
    let n0 = 2.0 * half_n0;
    let d0 = n0 / r;
    Ok(ConjugateParams::normal_gamma_from_moments(mu0, c0, n0, d0))
}

/// Exact conjugate Bayes update: adds the observation's sufficient
/// statistics to τ and one unit to the prior sample size.
pub fn conjugate_update(params: &ConjugateParams, y: &Observation) -> Result<ConjugateParams> {
    params.validate()?;
    y.check_for(params.family())?;
    let updated = match (params, y) {
        (ConjugateParams::Gamma { tau1, tau2 }, Observation::Count(y)) => ConjugateParams::Gamma {
            tau1: tau1 + *y as f64,
            tau2: tau2 + 1.0,
        },
        (ConjugateParams::Beta { tau1, tau0 }, Observation::Binary(y)) => ConjugateParams::Beta {
            tau1: tau1 + if *y { 1.0 } else { 0.0 },
            tau0: tau0 + 1.0,
        },
        (ConjugateParams::Dirichlet { alpha }, Observation::Counts { y, trials }) => {
            let mut next = alpha.clone();
            let mut sum = 0u64;
            for (a, yi) in next.iter_mut().zip(y.iter()) {
                *a += *yi as f64;
                sum += *yi;
            }
            let last = next.len() - 1;
            next[last] += (*trials - sum) as f64;
            ConjugateParams::Dirichlet { alpha: next }
        }
        (
            ConjugateParams::NormalGamma {
                tau1,
                tau2,
                tau3,
                tau0,
            },
            Observation::Real(y),
        ) => ConjugateParams::NormalGamma {
            tau1: tau1 - 0.5,
            tau2: tau2 + y,
            tau3: tau3 - y * y / 2.0,
            tau0: tau0 + 0.5,
        },
        _ => unreachable!("family mismatch is rejected above"),
    };
    updated.validate()?;
    Ok(updated)
}

/// Mean and covariance of the linear predictor under the conjugate law.
pub fn conjugate_to_predictor(params: &ConjugateParams) -> Result<(DVector<f64>, DMatrix<f64>)> {
    params.validate()?;
    match params {
        ConjugateParams::Gamma { tau1, tau2 } => {
            let f = DVector::from_vec(alloc::vec![raw_digamma(*tau1) - log(*tau2)]);
            let q = DMatrix::from_vec(1, 1, alloc::vec![raw_trigamma(*tau1)]);
            Ok((f, q))
        }
        ConjugateParams::Beta { .. } => {
            let (a, b) = (params.beta_alpha(), params.beta_beta());
            let f = DVector::from_vec(alloc::vec![raw_digamma(a) - raw_digamma(b)]);
            let q = DMatrix::from_vec(1, 1, alloc::vec![raw_trigamma(a) + raw_trigamma(b)]);
            Ok((f, q))
        }
        ConjugateParams::Dirichlet { alpha } => {
            let d = alpha.len() - 1;
            let psi_last = raw_digamma(alpha[d]);
            let tri_last = raw_trigamma(alpha[d]);
            let f = DVector::from_fn(d, |i, _| raw_digamma(alpha[i]) - psi_last);
            let q = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    raw_trigamma(alpha[i]) + tri_last
                } else {
                    tri_last
                }
            });
            Ok((f, q))
        }
        ConjugateParams::NormalGamma { .. } => {
            let (mu0, c0, n0, d0) = (
                params.ng_mu0(),
                params.ng_c0(),
                params.ng_n0(),
                params.ng_d0(),
            );
            if n0 <= 2.0 {
                return Err(Error::Domain(format!(
                    "predictor variance undefined: normal-gamma needs n0 > 2, got n0={n0}"
                )));
            }
            let f = DVector::from_vec(alloc::vec![
                mu0,
                raw_digamma(n0 / 2.0) - log(d0 / 2.0)
            ]);
            let q = DMatrix::from_row_slice(
                2,
                2,
                &[
                    d0 / (c0 * (n0 - 2.0)),
                    0.0,
                    0.0,
                    raw_trigamma(n0 / 2.0),
                ],
            );
            Ok((f, q))
        }
    }
}

/// Log-normalizer ln K(τ) of the conjugate family; predictive masses are
/// differences of this function.
pub fn log_normalizer(params: &ConjugateParams) -> f64 {
    match params {
        ConjugateParams::Gamma { tau1, tau2 } => raw_log_gamma(*tau1) - tau1 * log(*tau2),
        ConjugateParams::Beta { .. } => {
            let (a, b) = (params.beta_alpha(), params.beta_beta());
            raw_log_gamma(a) + raw_log_gamma(b) - raw_log_gamma(a + b)
        }
        ConjugateParams::Dirichlet { alpha } => {
            let total: f64 = alpha.iter().sum();
            alpha.iter().map(|a| raw_log_gamma(*a)).sum::<f64>() - raw_log_gamma(total)
        }
        ConjugateParams::NormalGamma { .. } => {
            let (c0, n0, d0) = (params.ng_c0(), params.ng_n0(), params.ng_d0());
            const LN_TWO_PI: f64 = 1.8378770664093453;
            0.5 * (LN_TWO_PI - log(c0)) + raw_log_gamma(n0 / 2.0) - (n0 / 2.0) * log(d0 / 2.0)
        }
    }
}

// log c(y): the observation-only factor of the likelihood in canonical form.
fn log_base_measure(params: &ConjugateParams, y: &Observation) -> f64 {
    const LN_TWO_PI: f64 = 1.8378770664093453;
    match (params, y) {
        (ConjugateParams::Gamma { .. }, Observation::Count(y)) => -raw_log_gamma(*y as f64 + 1.0),
        (ConjugateParams::Beta { .. }, Observation::Binary(_)) => 0.0,
        (ConjugateParams::Dirichlet { .. }, Observation::Counts { y, trials }) => {
            let sum: u64 = y.iter().sum();
            let last = trials - sum;
            let mut acc = raw_log_gamma(*trials as f64 + 1.0) - raw_log_gamma(last as f64 + 1.0);
            for yi in y {
                acc -= raw_log_gamma(*yi as f64 + 1.0);
            }
            acc
        }
        (ConjugateParams::NormalGamma { .. }, Observation::Real(_)) => -0.5 * LN_TWO_PI,
        _ => f64::NAN,
    }
}

/// Log predictive mass/density of `y` under the conjugate prior:
/// log c(y) + ln K(τ updated) - ln K(τ).
pub fn log_predictive(params: &ConjugateParams, y: &Observation) -> Result<f64> {
    let updated = conjugate_update(params, y)?;
    Ok(log_base_measure(params, y) + log_normalizer(&updated) - log_normalizer(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::trigamma;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_vec(alloc::vec![x])
    }
    fn mat1(x: f64) -> DMatrix<f64> {
        DMatrix::from_vec(1, 1, alloc::vec![x])
    }

    #[test]
    fn poisson_fast_mode_matches_stated_form() {
        // f=0, q=1 in fast mode: τ1 = 1, τ2 = e^{-1/2}
        let p = prior_to_conjugate(
            Family::Poisson,
            &vec1(0.0),
            &mat1(1.0),
            ProjectionMode::FastPoisson,
        )
        .unwrap();
        let ConjugateParams::Gamma { tau1, tau2 } = p else { panic!() };
        assert!(fabs(tau1 - 1.0) < 1e-12);
        assert!(fabs(tau2 - exp(-0.5)) < 1e-12);
    }

    #[test]
    fn poisson_exact_solves_moment_equations() {
        for &(f, q) in &[(0.0, 0.5), (1.5, 0.2), (-2.0, 1.0), (3.0, 0.05)] {
            let p =
                prior_to_conjugate(Family::Poisson, &vec1(f), &mat1(q), ProjectionMode::Exact)
                    .unwrap();
            let ConjugateParams::Gamma { tau1, tau2 } = p else { panic!() };
            // E[ln η] = ψ(τ1) - ln τ2 must equal f
            assert!(fabs(raw_digamma(tau1) - log(tau2) - f) < 1e-9, "f={f}, q={q}");
            // E[η] = τ1/τ2 must equal e^{f+q/2}
            assert!(fabs(tau1 / tau2 - exp(f + q / 2.0)) / exp(f + q / 2.0) < 1e-9);
        }
        // frozen: q = 0.5 gives τ1 = root of ψ(x) - ln x = -0.25
        let p = prior_to_conjugate(
            Family::Poisson,
            &vec1(0.0),
            &mat1(0.5),
            ProjectionMode::Exact,
        )
        .unwrap();
        let ConjugateParams::Gamma { tau1, .. } = p else { panic!() };
        assert!(fabs(tau1 - 2.1518464411397233) < 1e-8);
    }

    #[test]
    fn poisson_zero_variance_is_domain_error() {
        let r = prior_to_conjugate(
            Family::Poisson,
            &vec1(1.0),
            &mat1(0.0),
            ProjectionMode::Exact,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn bernoulli_symmetric_at_zero_mean() {
        for &q in &[0.05, 0.3, 1.0] {
            let p = prior_to_conjugate(
                Family::Bernoulli,
                &vec1(0.0),
                &mat1(q),
                ProjectionMode::Exact,
            )
            .unwrap();
            assert!(
                fabs(p.beta_alpha() - p.beta_beta()) < 1e-8,
                "q={q}: α={} β={}",
                p.beta_alpha(),
                p.beta_beta()
            );
        }
    }

    #[test]
    fn bernoulli_satisfies_stated_system() {
        for &(f, q) in &[(1.0, 0.1), (-2.0, 0.4), (0.5, 0.05)] {
            let p =
                prior_to_conjugate(Family::Bernoulli, &vec1(f), &mat1(q), ProjectionMode::Exact)
                    .unwrap();
            let (a, b) = (p.beta_alpha(), p.beta_beta());
            let r1 = raw_digamma(a) - raw_digamma(b) - f;
            let rhs2 = -softplus(f) - 0.5 * q * sigmoid_prime(f);
            let r2 = raw_digamma(b) - raw_digamma(a + b) - rhs2;
            assert!(fabs(r1) < 1e-10 && fabs(r2) < 1e-10, "f={f} q={q}: {r1:e} {r2:e}");
        }
    }

    #[test]
    fn bernoulli_zero_variance_rejected() {
        let r = prior_to_conjugate(
            Family::Bernoulli,
            &vec1(0.0),
            &mat1(0.0),
            ProjectionMode::Exact,
        );
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn multinomial_zero_variance_rejected() {
        let f = DVector::from_vec(alloc::vec![0.0, 0.0]);
        let q = DMatrix::zeros(2, 2);
        let r = prior_to_conjugate(
            Family::Multinomial { categories: 3 },
            &f,
            &q,
            ProjectionMode::Exact,
        );
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn multinomial_satisfies_corrected_system() {
        let f = DVector::from_vec(alloc::vec![1.0, -0.5]);
        let q = DMatrix::from_row_slice(2, 2, &[0.05, 0.01, 0.01, 0.08]);
        let p = prior_to_conjugate(
            Family::Multinomial { categories: 3 },
            &f,
            &q,
            ProjectionMode::Exact,
        )
        .unwrap();
        let ConjugateParams::Dirichlet { alpha } = &p else { panic!() };
        // first equations: ψ(τ_i) - ψ(τ_3) = f_i
        assert!(fabs(raw_digamma(alpha[0]) - raw_digamma(alpha[2]) - 1.0) < 1e-10);
        assert!(fabs(raw_digamma(alpha[1]) - raw_digamma(alpha[2]) + 0.5) < 1e-10);
        // last equation with the Taylor-corrected right-hand side
        let denom = 1.0 + exp(1.0) + exp(-0.5);
        let pi1 = exp(1.0) / denom;
        let pi2 = exp(-0.5) / denom;
        let tr_hq = -(0.05 * (pi1 - pi1 * pi1)) - (0.08 * (pi2 - pi2 * pi2))
            + 2.0 * 0.01 * pi1 * pi2;
        let rhs = -log(denom) + 0.5 * tr_hq;
        let total: f64 = alpha.iter().sum();
        assert!(fabs(raw_digamma(alpha[2]) - raw_digamma(total) - rhs) < 1e-10);
    }

    #[test]
    fn normal_projection_matches_stated_procedure() {
        let f = DVector::from_vec(alloc::vec![0.0, 0.0]);
        let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.2]);
        let p = prior_to_conjugate(Family::Normal, &f, &q, ProjectionMode::Exact).unwrap();
        let r = exp(0.1);
        assert!(fabs(p.ng_mu0() - 0.0) < 1e-12);
        // n0/2 solves ψ(x) - ln x = -0.1
        assert!(fabs(p.ng_n0() / 2.0 - 5.160875503410202) < 1e-7);
        assert!(fabs(p.ng_c0() - 1.0 / (0.5 * r)) < 1e-12);
        assert!(fabs(p.ng_d0() - p.ng_n0() / r) < 1e-10);
    }

    #[test]
    fn normal_projection_uses_cross_covariance() {
        let f = DVector::from_vec(alloc::vec![1.0, -0.3]);
        let q = DMatrix::from_row_slice(2, 2, &[0.4, 0.15, 0.15, 0.25]);
        let p = prior_to_conjugate(Family::Normal, &f, &q, ProjectionMode::Exact).unwrap();
        // μ0 = f1 + Q12 is the exact E[φμ]/E[φ] of the lognormal pair
        assert!(fabs(p.ng_mu0() - 1.15) < 1e-12);
    }

    #[test]
    fn conjugate_update_examples() {
        let p = conjugate_update(
            &ConjugateParams::Gamma { tau1: 2.0, tau2: 1.0 },
            &Observation::Count(3),
        )
        .unwrap();
        assert_eq!(p, ConjugateParams::Gamma { tau1: 5.0, tau2: 2.0 });

        let p = conjugate_update(
            &ConjugateParams::Dirichlet {
                alpha: alloc::vec![1.0, 1.0, 1.0],
            },
            &Observation::Counts {
                y: alloc::vec![2, 1],
                trials: 5,
            },
        )
        .unwrap();
        assert_eq!(
            p,
            ConjugateParams::Dirichlet {
                alpha: alloc::vec![3.0, 2.0, 3.0]
            }
        );

        let p = conjugate_update(
            &ConjugateParams::NormalGamma {
                tau1: -1.0,
                tau2: 0.0,
                tau3: -1.0,
                tau0: 0.5,
            },
            &Observation::Real(2.0),
        )
        .unwrap();
        assert_eq!(
            p,
            ConjugateParams::NormalGamma {
                tau1: -1.5,
                tau2: 2.0,
                tau3: -3.0,
                tau0: 1.0,
            }
        );
    }

    #[test]
    fn conjugate_update_rejects_invalid_counts() {
        let r = conjugate_update(
            &ConjugateParams::Dirichlet {
                alpha: alloc::vec![1.0, 1.0, 1.0],
            },
            &Observation::Counts {
                y: alloc::vec![4, 3],
                trials: 5,
            },
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn back_projection_examples() {
        let (f, q) =
            conjugate_to_predictor(&ConjugateParams::Gamma { tau1: 1.0, tau2: 1.0 }).unwrap();
        assert!(fabs(f[0] - -0.5772156649015329) < 1e-10);
        assert!(fabs(q[(0, 0)] - 1.6449340668482266) < 1e-10);

        let (f, q) = conjugate_to_predictor(&ConjugateParams::Dirichlet {
            alpha: alloc::vec![1.0, 1.0, 1.0],
        })
        .unwrap();
        let tri1 = trigamma(1.0).unwrap();
        assert!(f.amax() < 1e-12);
        assert!(fabs(q[(0, 0)] - 2.0 * tri1) < 1e-10);
        assert!(fabs(q[(0, 1)] - tri1) < 1e-10);

        let ng = ConjugateParams::normal_gamma_from_moments(0.0, 1.0, 6.0, 2.0);
        let (f, q) = conjugate_to_predictor(&ng).unwrap();
        assert!(fabs(f[0]) < 1e-12);
        assert!(fabs(f[1] - 0.9227843350984671) < 1e-10);
        assert!(fabs(q[(0, 0)] - 0.5) < 1e-12);
        assert_eq!(q[(0, 1)], 0.0);
        assert!(fabs(q[(1, 1)] - 0.39493406684822646) < 1e-10);
    }

    #[test]
    fn back_projection_needs_n0_above_two() {
        let ng = ConjugateParams::normal_gamma_from_moments(0.0, 1.0, 2.0, 1.0);
        assert!(matches!(conjugate_to_predictor(&ng), Err(Error::Domain(_))));
    }

    #[test]
    fn log_predictive_trivial_cases() {
        // uniform Beta prior: both outcomes carry mass 1/2
        let p = ConjugateParams::Beta { tau1: 0.0, tau0: 0.0 };
        assert!(fabs(log_predictive(&p, &Observation::Binary(true)).unwrap() - log(0.5)) < 1e-12);
        // Gamma(1,1): negative binomial with mass 1/2 at zero
        let p = ConjugateParams::Gamma { tau1: 1.0, tau2: 1.0 };
        assert!(fabs(log_predictive(&p, &Observation::Count(0)).unwrap() - log(0.5)) < 1e-12);
        // symmetric Dirichlet, one trial: each category has mass 1/3
        let p = ConjugateParams::Dirichlet {
            alpha: alloc::vec![1.0, 1.0, 1.0],
        };
        let y = Observation::Counts { y: alloc::vec![1, 0], trials: 1 };
        assert!(fabs(log_predictive(&p, &y).unwrap() - log(1.0 / 3.0)) < 1e-12);
    }

    #[test]
    fn log_predictive_matches_negative_binomial() {
        // NegBin(r = τ1, success prob p = τ2/(τ2+1)) via its lgamma form
        let (tau1, tau2, y) = (2.5, 1.5, 3u64);
        let p = ConjugateParams::Gamma { tau1, tau2 };
        let lp = log_predictive(&p, &Observation::Count(y)).unwrap();
        let yf = y as f64;
        let direct = raw_log_gamma(yf + tau1) - raw_log_gamma(tau1) - raw_log_gamma(yf + 1.0)
            + tau1 * log(tau2 / (tau2 + 1.0))
            + yf * log(1.0 / (tau2 + 1.0));
        assert!(fabs(lp - direct) < 1e-12);
    }

    #[test]
    fn log_predictive_matches_student_t() {
        // Normal predictive: Student-t(ν = n0, loc μ0, scale² = d0/n0 (1+1/c0))
        let (mu0, c0, n0, d0, y) = (0.5, 2.0, 5.0, 3.0, 1.2);
        let p = ConjugateParams::normal_gamma_from_moments(mu0, c0, n0, d0);
        let lp = log_predictive(&p, &Observation::Real(y)).unwrap();
        let s2 = d0 / n0 * (1.0 + 1.0 / c0);
        let z = (y - mu0) * (y - mu0) / (n0 * s2);
        let direct = raw_log_gamma((n0 + 1.0) / 2.0)
            - raw_log_gamma(n0 / 2.0)
            - 0.5 * log(n0 * core::f64::consts::PI * s2)
            - 0.5 * (n0 + 1.0) * libm::log1p(z);
        assert!(fabs(lp - direct) < 1e-12, "{lp} vs {direct}");
    }

    #[test]
    fn log_predictive_matches_beta_binomial() {
        let p = ConjugateParams::Beta { tau1: 1.0, tau0: 3.0 };
        // α = 2, β = 3: P(y=1) = α/(α+β) = 2/5
        let lp = log_predictive(&p, &Observation::Binary(true)).unwrap();
        assert!(fabs(lp - log(0.4)) < 1e-12);
    }

    #[test]
    fn log_predictive_normalizes_over_enumerable_outcomes() {
        let p = ConjugateParams::Beta { tau1: 1.3, tau0: 2.9 };
        let total = exp(log_predictive(&p, &Observation::Binary(false)).unwrap())
            + exp(log_predictive(&p, &Observation::Binary(true)).unwrap());
        assert!(fabs(total - 1.0) < 1e-10);

        let p = ConjugateParams::Dirichlet {
            alpha: alloc::vec![1.7, 0.9, 2.2],
        };
        let m = 3u64;
        let mut total = 0.0;
        for y1 in 0..=m {
            for y2 in 0..=(m - y1) {
                let y = Observation::Counts { y: alloc::vec![y1, y2], trials: m };
                total += exp(log_predictive(&p, &y).unwrap());
            }
        }
        assert!(fabs(total - 1.0) < 1e-10, "sum {total}");
    }

    #[test]
    fn round_trip_close_for_small_variance() {
        // |f̃ - f| ≤ 0.05 (1+|f|) for q ≤ 0.5 (Poisson and Bernoulli)
        for &f in &[-1.0, 0.0, 0.8, 2.0] {
            for &q in &[0.05, 0.2, 0.5] {
                for family in [Family::Poisson, Family::Bernoulli] {
                    let p = prior_to_conjugate(family, &vec1(f), &mat1(q), ProjectionMode::Exact)
                        .unwrap();
                    let (ft, _) = conjugate_to_predictor(&p).unwrap();
                    assert!(
                        fabs(ft[0] - f) <= 0.05 * (1.0 + fabs(f)),
                        "{} f={f} q={q}: f̃={}",
                        family.name(),
                        ft[0]
                    );
                }
            }
        }
    }

    #[test]
    fn multinomial_with_two_categories_matches_bernoulli() {
        for &(f, q) in &[(0.7, 0.2), (-1.2, 0.4), (0.0, 0.08)] {
            let bp = prior_to_conjugate(Family::Bernoulli, &vec1(f), &mat1(q), ProjectionMode::Exact)
                .unwrap();
            let mp = prior_to_conjugate(
                Family::Multinomial { categories: 2 },
                &vec1(f),
                &mat1(q),
                ProjectionMode::Exact,
            )
            .unwrap();
            let ConjugateParams::Dirichlet { alpha } = &mp else { panic!() };
            assert!(fabs(alpha[0] - bp.beta_alpha()) < 1e-6, "f={f} q={q}");
            assert!(fabs(alpha[1] - bp.beta_beta()) < 1e-6);

            let (bf, bq) = conjugate_to_predictor(&bp).unwrap();
            let (mf, mq) = conjugate_to_predictor(&mp).unwrap();
            assert!(fabs(bf[0] - mf[0]) < 1e-6);
            assert!(fabs(bq[(0, 0)] - mq[(0, 0)]) < 1e-6);

            // matching predictives for the same binary observation
            let lb = log_predictive(&bp, &Observation::Binary(true)).unwrap();
            let lm = log_predictive(&mp, &Observation::Counts { y: alloc::vec![1], trials: 1 })
                .unwrap();
            assert!(fabs(lb - lm) < 1e-6);
        }
    }

    #[test]
    fn observation_family_mismatch_rejected() {
        let p = ConjugateParams::Gamma { tau1: 1.0, tau2: 1.0 };
        assert!(conjugate_update(&p, &Observation::Real(1.0)).is_err());
    }
}
