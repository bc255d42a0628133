//! Numerical cross-checks for the conjugate projections.
//!
//! Everything in this module recomputes quantities the closed forms in
//! [`crate::family`] produce, but through an independent numerical route:
//! Gauss-Hermite quadrature in transformed coordinates, direct Nelder-Mead
//! maximization of the projection objective, and quadrature-normalized
//! posterior densities. Production code never calls into here; tests use it
//! to pin the analytic solutions.

use crate::family::{log_normalizer, ConjugateParams, Family, Observation};
use crate::special::raw_log_gamma;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use libm::{exp, fabs, log, sqrt};
use nalgebra::{DMatrix, DVector};

/// Gauss-Hermite nodes and weights for ∫ e^{-x²} f(x) dx ≈ Σ w_i f(x_i).
///
/// Nodes come from the Golub-Welsch eigenvalues of the Jacobi matrix;
/// weights from the Christoffel formula w = 1/Σ p_k(x)² over the
/// orthonormal Hermite polynomials, which keeps the far-tail weights
/// accurate on a log scale (eigenvector components lose them to roundoff).
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (nodes, log_w) = gauss_hermite_log(n)?;
    let weights = nodes
        .iter()
        .zip(&log_w)
        .map(|(x, lw)| exp(lw - x * x))
        .collect();
    Ok((nodes, weights))
}

/// Nodes plus ln(w_i e^{x_i²}), the importance weights against the
/// Gaussian proposal, exact on the log scale even in the far tails.
pub(crate) fn gauss_hermite_log(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 512 {
        return Err(Error::Config(format!(
            "gauss-hermite order must be in 1..=512, got {n}"
        )));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = sqrt(i as f64 / 2.0);
        jacobi[(i - 1, i)] = b;
        jacobi[(i, i - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    nodes.sort_by(f64::total_cmp);
    let log_w = nodes.iter().map(|x| christoffel_log_weight(*x, n)).collect();
    Ok((nodes, log_w))
}

// ln(w(x) e^{x²}) = x² - ln Σ_{k<n} p_k(x)² with p_k orthonormal against
// e^{-x²}; the running pair is rescaled to dodge overflow at large |x|.
fn christoffel_log_weight(x: f64, n: usize) -> f64 {
    const QUARTER_LN_PI: f64 = 0.28618247146235004;
    let mut prev = 0.0f64;
    let mut cur = exp(-QUARTER_LN_PI);
    let mut scale = 0.0f64;
    let mut log_sum = -2.0 * QUARTER_LN_PI;
    for k in 0..n - 1 {
        let kf = k as f64;
        let next = x * sqrt(2.0 / (kf + 1.0)) * cur - sqrt(kf / (kf + 1.0)) * prev;
        prev = cur;
        cur = next;
        if fabs(cur) > 1e100 {
            prev *= 1e-100;
            cur *= 1e-100;
            scale += 100.0 * core::f64::consts::LN_10;
        }
        if cur != 0.0 {
            let term = 2.0 * (log(fabs(cur)) + scale);
            let m = log_sum.max(term);
            log_sum = m + log(exp(log_sum - m) + exp(term - m));
        }
    }
    x * x - log_sum
}

fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + log(xs.iter().map(|x| exp(x - m)).sum::<f64>())
}

/// A quadrature rule in the transformed coordinate u = center + √(2 v) x:
/// points u_i with log importance weights lw_i = ln w_i + x_i², so that
/// ln ∫ h(u) du = ln √(2v) + lse(lw_i + ln h(u_i)).
struct LogSpaceRule {
    points: Vec<f64>,
    log_w: Vec<f64>,
    log_measure: f64,
}

fn log_space_rule(n: usize, center: f64, var: f64) -> Result<LogSpaceRule> {
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::Numerical(format!(
            "quadrature proposal variance must be positive, got {var}"
        )));
    }
    let (x, log_w) = gauss_hermite_log(n)?;
    let s = sqrt(2.0 * var);
    let points: Vec<f64> = x.iter().map(|xi| center + s * xi).collect();
    Ok(LogSpaceRule {
        points,
        log_w,
        log_measure: log(s),
    })
}

impl LogSpaceRule {
    /// ln ∫ exp(log_kernel(u)) du.
    fn log_integral(&self, log_kernel: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.log_w)
            .map(|(u, lw)| lw + log_kernel(*u))
            .collect();
        self.log_measure + log_sum_exp_slice(&terms)
    }

    /// Normalized mean, variance and E[g(u)] under the density ∝ kernel.
    fn moments(&self, log_kernel: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> (f64, f64, f64) {
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.log_w)
            .map(|(u, lw)| lw + log_kernel(*u))
            .collect();
        let shift = log_sum_exp_slice(&terms);
        let mut mean = 0.0;
        let mut extra = 0.0;
        let probs: Vec<f64> = terms.iter().map(|t| exp(t - shift)).collect();
        for (p, u) in probs.iter().zip(&self.points) {
            mean += p * u;
            extra += p * g(*u);
        }
        let mut var = 0.0;
        for (p, u) in probs.iter().zip(&self.points) {
            var += p * (u - mean) * (u - mean);
        }
        (mean, var, extra)
    }
}

// Log-density kernel of λ = ln η for η ~ Gamma(shape, rate).
fn log_gamma_kernel(shape: f64, rate: f64) -> impl Fn(f64) -> f64 {
    move |lam| shape * lam - rate * exp(lam)
}

// Log-density kernel of λ = logit π for π ~ Beta(a, b).
fn log_beta_kernel(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    move |lam| -a * softplus(-lam) - b * softplus(lam)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(exp(-x))
    } else {
        libm::log1p(exp(x))
    }
}

// (E[λ], Var[λ], E[e^{-λ}]) for λ = ln η, η ~ Gamma(shape, rate), with a
// doubling consistency check between n and 2n nodes.
// Proposals are widened: the exp-linear left tails of log-gamma and
// logit-beta kernels decay slower than a matched Gaussian, and the wider
// rule pushes node-range truncation error below the doubling tolerance.
const PROPOSAL_WIDEN: f64 = 2.5;

fn gamma_log_moments(shape: f64, rate: f64, n: usize) -> Result<(f64, f64)> {
    let center = log(shape / rate);
    let var = PROPOSAL_WIDEN / shape;
    let kernel = log_gamma_kernel(shape, rate);
    let mut residual = f64::INFINITY;
    // escalate the rule before giving up; 512 is the node-count cap
    for base in [n, 256] {
        let coarse = log_space_rule(base, center, var)?;
        let fine = log_space_rule(2 * base, center, var)?;
        let a = coarse.moments(&kernel, |_| 0.0);
        let b = fine.moments(&kernel, |_| 0.0);
        residual = fabs(a.0 - b.0).max(fabs(a.1 - b.1));
        if residual <= 1e-9 {
            return Ok((b.0, b.1));
        }
    }
    Err(Error::NonConvergence {
        what: "log-gamma moment quadrature",
        residual,
        iterations: 512,
    })
}

// ln ∫_0^∞ x^{k-1} e^{-x} dx via the double-exponential map x = e^{(π/2) sinh t}.
// The map compresses the power tail at zero and the exponential right tail
// at the same doubly-exponential speed, so a plain trapezoid sum converges
// geometrically in the step size even for k close to zero.
fn log_gamma_integral(k: f64) -> Result<f64> {
    let a = core::f64::consts::FRAC_PI_2;
    // Log of the integrand-times-Jacobian maximum; keeps partial sums O(1).
    let peak = k * log(k) - k;
    let half_width = 8.5;
    let term = |t: f64| -> f64 {
        let u = a * libm::sinh(t);
        // exp(u) overflows to +inf far right; the subtraction then yields
        // -inf and the guard below maps it to an exact zero contribution.
        let ln_h = k * u - exp(u) + log(a * libm::cosh(t)) - peak;
        if ln_h < -740.0 { 0.0 } else { exp(ln_h) }
    };
    let mut step = 0.25;
    let mut prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..8 {
        let n = (2.0 * half_width / step) as usize;
        let mut sum = 0.0;
        for i in 0..=n {
            sum += term(-half_width + i as f64 * step);
        }
        let value = peak + log(sum * step);
        residual = fabs(value - prev);
        if residual <= 1e-12 {
            return Ok(value);
        }
        prev = value;
        step *= 0.5;
    }
    Err(Error::NonConvergence {
        what: "gamma integral quadrature",
        residual,
        iterations: 8,
    })
}

// E[1/η] for η ~ Gamma(shape, rate), as a ratio of gamma-type integrals.
// The 1/η reweighting shifts the power at zero down by one; for shapes just
// above the divergence at one the Gaussian-proposal rule cannot reach that
// tail, so this moment runs on the double-exponential map instead.
fn gamma_inverse_moment(shape: f64, rate: f64) -> Result<f64> {
    if shape <= 1.0 {
        return Err(Error::Domain(format!(
            "E[1/eta] diverges for shape {shape} <= 1"
        )));
    }
    let tilted = log_gamma_integral(shape - 1.0)?;
    let base = log_gamma_integral(shape)?;
    Ok(exp(log(rate) + tilted - base))
}

fn beta_logit_moments(a: f64, b: f64, n: usize) -> Result<(f64, f64)> {
    let center = log(a / b);
    let var = PROPOSAL_WIDEN * (a + b) / (a * b);
    let kernel = log_beta_kernel(a, b);
    let mut residual = f64::INFINITY;
    for base in [n, 256] {
        let coarse = log_space_rule(base, center, var)?;
        let fine = log_space_rule(2 * base, center, var)?;
        let lo = coarse.moments(&kernel, |_| 0.0);
        let hi = fine.moments(&kernel, |_| 0.0);
        residual = fabs(lo.0 - hi.0).max(fabs(lo.1 - hi.1));
        if residual <= 1e-9 {
            return Ok((hi.0, hi.1));
        }
    }
    Err(Error::NonConvergence {
        what: "logit-beta moment quadrature",
        residual,
        iterations: 512,
    })
}

/// Predictor mean and covariance under the conjugate law, computed by
/// quadrature alone (no polygamma identities).
///
/// The Dirichlet case uses the independent-gamma representation
/// λ_i = ln γ_i - ln γ_{d+1} with γ_l ~ Gamma(α_l, 1), so every entry
/// reduces to one-dimensional log-gamma moments.
pub fn moments_by_quadrature(params: &ConjugateParams) -> Result<(DVector<f64>, DMatrix<f64>)> {
    params.validate()?;
    let n = 160;
    match params {
        ConjugateParams::Gamma { tau1, tau2 } => {
            let (m, v) = gamma_log_moments(*tau1, *tau2, n)?;
            Ok((
                DVector::from_vec(alloc::vec![m]),
                DMatrix::from_vec(1, 1, alloc::vec![v]),
            ))
        }
        ConjugateParams::Beta { .. } => {
            let (m, v) = beta_logit_moments(params.beta_alpha(), params.beta_beta(), n)?;
            Ok((
                DVector::from_vec(alloc::vec![m]),
                DMatrix::from_vec(1, 1, alloc::vec![v]),
            ))
        }
        ConjugateParams::Dirichlet { alpha } => {
            let d = alpha.len() - 1;
            let mut means = Vec::with_capacity(d + 1);
            let mut vars = Vec::with_capacity(d + 1);
            for a in alpha {
                let (m, v) = gamma_log_moments(*a, 1.0, n)?;
                means.push(m);
                vars.push(v);
            }
            let f = DVector::from_fn(d, |i, _| means[i] - means[d]);
            let q = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    vars[i] + vars[d]
                } else {
                    vars[d]
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
                    "predictor variance undefined for n0 = {n0} <= 2"
                )));
            }
            let (m_logphi, v_logphi) = gamma_log_moments(n0 / 2.0, d0 / 2.0, n)?;
            let mean_inv_phi = gamma_inverse_moment(n0 / 2.0, d0 / 2.0)?;
            // μ | φ is centered at μ0 for every φ, so E[μ] = μ0,
            // Var(μ) = E[1/(c0 φ)] and Cov(μ, ln φ) vanishes identically.
            let f = DVector::from_vec(alloc::vec![mu0, m_logphi]);
            let q = DMatrix::from_row_slice(
                2,
                2,
                &[mean_inv_phi / c0, 0.0, 0.0, v_logphi],
            );
            Ok((f, q))
        }
    }
}

/// Expected conjugate sufficient statistics of the predictor under
/// N(f, Q), by (tensor) Gauss-Hermite quadrature. The returned layout
/// matches [`projection_objective`].
pub fn sufficient_moments(
    family: Family,
    f: &DVector<f64>,
    q: &DMatrix<f64>,
    n: usize,
) -> Result<Vec<f64>> {
    let k = family.predictor_dim();
    if f.len() != k || q.nrows() != k || q.ncols() != k {
        return Err(Error::Config("predictor dimensions disagree".into()));
    }
    match family {
        Family::Poisson => {
            // E[λ] and E[e^λ] under the one-dimensional Gaussian
            let (m, vv) = gaussian_expectations_1d(f[0], q[(0, 0)], n, |lam| {
                (lam, exp(lam))
            })?;
            Ok(alloc::vec![m, vv])
        }
        Family::Bernoulli => {
            let (m1, m2) = gaussian_expectations_1d(f[0], q[(0, 0)], n, |lam| {
                (-softplus(-lam), -softplus(lam))
            })?;
            Ok(alloc::vec![m1, m2])
        }
        Family::Multinomial { categories } => {
            let d = categories - 1;
            let points = gaussian_tensor_points(f, q, n)?;
            let mut m = alloc::vec![0.0; d + 1];
            for (lam, w) in &points {
                let mut terms = Vec::with_capacity(d + 1);
                terms.push(0.0);
                terms.extend(lam.iter().cloned());
                let lse = log_sum_exp_slice(&terms);
                for i in 0..d {
                    m[i] += w * (lam[i] - lse);
                }
                m[d] += w * (-lse);
            }
            Ok(m)
        }
        Family::Normal => {
            // (E[φμ²], E[φμ], E[φ], E[ln φ]) with μ = λ1, φ = e^{λ2}
            let points = gaussian_tensor_points(f, q, n)?;
            let mut m = alloc::vec![0.0; 4];
            for (lam, w) in &points {
                let (mu, phi) = (lam[0], exp(lam[1]));
                m[0] += w * phi * mu * mu;
                m[1] += w * phi * mu;
                m[2] += w * phi;
                m[3] += w * lam[1];
            }
            Ok(m)
        }
    }
}

fn gaussian_expectations_1d(
    mean: f64,
    var: f64,
    n: usize,
    g: impl Fn(f64) -> (f64, f64),
) -> Result<(f64, f64)> {
    if var < 0.0 {
        return Err(Error::Domain("negative predictor variance".into()));
    }
    let (x, w) = gauss_hermite(n)?;
    const SQRT_PI: f64 = 1.7724538509055159;
    let s = sqrt(2.0 * var);
    let mut acc = (0.0, 0.0);
    for (xi, wi) in x.iter().zip(&w) {
        let lam = mean + s * xi;
        let (g1, g2) = g(lam);
        acc.0 += wi / SQRT_PI * g1;
        acc.1 += wi / SQRT_PI * g2;
    }
    Ok(acc)
}

// Tensor-product Gaussian quadrature points (λ_i, probability weight).
fn gaussian_tensor_points(
    f: &DVector<f64>,
    q: &DMatrix<f64>,
    n: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let k = f.len();
    let chol = q.clone().cholesky().ok_or_else(|| {
        Error::Numerical("predictor covariance is not positive definite".into())
    })?;
    let l = chol.l();
    let (x, w) = gauss_hermite(n)?;
    const SQRT_PI: f64 = 1.7724538509055159;
    let mut points = Vec::with_capacity(n.pow(k as u32));
    let mut index = alloc::vec![0usize; k];
    loop {
        let mut lam = alloc::vec![0.0; k];
        let mut weight = 1.0;
        for (dim, &i) in index.iter().enumerate() {
            weight *= w[i] / SQRT_PI;
            for row in 0..k {
                lam[row] += l[(row, dim)] * core::f64::consts::SQRT_2 * x[i];
            }
        }
        for row in 0..k {
            lam[row] += f[row];
        }
        points.push((lam, weight));
        // odometer increment over the k-dimensional index
        let mut dim = 0;
        loop {
            index[dim] += 1;
            if index[dim] < n {
                break;
            }
            index[dim] = 0;
            dim += 1;
            if dim == k {
                return Ok(points);
            }
        }
    }
}

/// The KL projection objective τ·M - ln K(τ) (+ constants independent of
/// τ), evaluated for conjugate parameters against precomputed sufficient
/// moments from [`sufficient_moments`].
pub fn projection_objective(params: &ConjugateParams, m: &[f64]) -> f64 {
    match params {
        ConjugateParams::Gamma { tau1, tau2 } => {
            (tau1 - 1.0) * m[0] - tau2 * m[1] + tau1 * log(*tau2) - raw_log_gamma(*tau1)
        }
        ConjugateParams::Beta { .. } => {
            let (a, b) = (params.beta_alpha(), params.beta_beta());
            (a - 1.0) * m[0] + (b - 1.0) * m[1] - log_beta(a, b)
        }
        ConjugateParams::Dirichlet { alpha } => {
            let total: f64 = alpha.iter().sum();
            let mut acc = raw_log_gamma(total);
            for (a, mi) in alpha.iter().zip(m) {
                acc += (a - 1.0) * mi - raw_log_gamma(*a);
            }
            acc
        }
        ConjugateParams::NormalGamma {
            tau1,
            tau2,
            tau3,
            tau0,
        } => tau1 * m[0] + tau2 * m[1] + tau3 * m[2] + tau0 * m[3] - log_normalizer(params),
    }
}

fn log_beta(a: f64, b: f64) -> f64 {
    raw_log_gamma(a) + raw_log_gamma(b) - raw_log_gamma(a + b)
}

// --- Nelder-Mead maximization of the projection objective ---

fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    scale: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += scale;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1)); // descending: best first
        let spread = simplex[0].1 - simplex[n].1;
        if spread.abs() < 1e-13 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + (centroid[j] - worst.0[j]))
            .collect();
        let fr = f(&reflect);
        if fr > simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst.0[j]))
                .collect();
            let fe = f(&expand);
            simplex[n] = if fe > fr { (expand, fe) } else { (reflect, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|j| centroid[j] + 0.5 * (worst.0[j] - centroid[j]))
                .collect();
            let fc = f(&contract);
            if fc > worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    for (x, b) in item.0.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    item.1 = f(&item.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    simplex[0].clone()
}

fn params_from_unconstrained(family: Family, u: &[f64]) -> ConjugateParams {
    match family {
        Family::Poisson => ConjugateParams::Gamma {
            tau1: exp(u[0]),
            tau2: exp(u[1]),
        },
        Family::Bernoulli => ConjugateParams::Beta {
            tau1: exp(u[0]) - 1.0,
            tau0: exp(u[0]) + exp(u[1]) - 2.0,
        },
        Family::Multinomial { .. } => ConjugateParams::Dirichlet {
            alpha: u.iter().map(|v| exp(*v)).collect(),
        },
        Family::Normal => ConjugateParams::normal_gamma_from_moments(
            u[1],
            exp(u[0]),
            exp(u[2]),
            exp(u[3]),
        ),
    }
}

/// Direct numerical KL projection: maximizes the objective over the
/// conjugate family by multi-start Nelder-Mead in log coordinates. Slow
/// but free of the moment-matching identities the closed forms rely on.
pub fn oracle_project(
    family: Family,
    f: &DVector<f64>,
    q: &DMatrix<f64>,
    nodes: usize,
) -> Result<ConjugateParams> {
    let m = sufficient_moments(family, f, q, nodes)?;
    let objective = |u: &[f64]| -> f64 {
        let params = params_from_unconstrained(family, u);
        if params.validate().is_err() {
            return f64::NEG_INFINITY;
        }
        let v = projection_objective(&params, &m);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };

    // moment-heuristic starting points, independent of the exact solvers
    let start: Vec<f64> = match family {
        Family::Poisson => {
            let qv = q[(0, 0)].max(1e-6);
            alloc::vec![log(1.0 / qv), log(1.0 / qv) - (f[0] + qv / 2.0)]
        }
        Family::Bernoulli => {
            let qv = q[(0, 0)].max(1e-6);
            alloc::vec![
                log(((1.0 + exp(f[0])) / qv).clamp(1e-2, 1e6)),
                log(((1.0 + exp(-f[0])) / qv).clamp(1e-2, 1e6)),
            ]
        }
        Family::Multinomial { categories } => {
            let d = categories - 1;
            let tr: f64 = (0..d).map(|i| q[(i, i)]).sum::<f64>().max(1e-6);
            let mut v: Vec<f64> = (0..d)
                .map(|i| log((exp(f[i]).max(0.1) * 2.0 / tr).clamp(1e-2, 1e6)))
                .collect();
            v.push(log((2.0 / tr).clamp(1e-2, 1e6)));
            v
        }
        Family::Normal => {
            let q11 = q[(0, 0)].max(1e-6);
            let q22 = q[(1, 1)].max(1e-6);
            let c0 = 1.0 / (q11 * exp(f[1]));
            let n0 = 2.0 / q22;
            alloc::vec![log(c0), f[0], log(n0), log(n0) - f[1]]
        }
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for jitter in [0.0, 0.35, -0.45] {
        let s: Vec<f64> = start.iter().map(|v| v + jitter).collect();
        let (u, val) = nelder_mead(&objective, &s, 0.12, 800);
        // polish with a tighter simplex around the winner
        let (u, val) = {
            let (u2, v2) = nelder_mead(&objective, &u, 0.01, 400);
            if v2 > val { (u2, v2) } else { (u, val) }
        };
        if best.as_ref().is_none_or(|(_, bv)| val > *bv) {
            best = Some((u, val));
        }
    }
    let (u, val) = best.unwrap();
    if !val.is_finite() {
        return Err(Error::NonConvergence {
            what: "nelder-mead projection oracle",
            residual: f64::INFINITY,
            iterations: 800,
        });
    }
    let params = params_from_unconstrained(family, &u);
    params.validate()?;
    Ok(params)
}

// --- KL estimation on explicit grids ---

/// Weighted evaluation grid; weights are probabilities under the
/// reference measure p.
pub struct QuadratureGrid {
    pub points: Vec<(Vec<f64>, f64)>,
}

impl QuadratureGrid {
    /// Tensor Gauss-Hermite grid carrying the probability weights of
    /// N(mean, cov).
    pub fn gaussian(mean: &DVector<f64>, cov: &DMatrix<f64>, n: usize) -> Result<Self> {
        Ok(QuadratureGrid {
            points: gaussian_tensor_points(mean, cov, n)?,
        })
    }
}

/// KL(p ‖ q) ≈ Σ w_i (log p - log q)(x_i) over a grid whose weights are
/// p-probabilities.
pub fn kl_estimate(
    log_p: impl Fn(&[f64]) -> f64,
    log_q: impl Fn(&[f64]) -> f64,
    grid: &QuadratureGrid,
) -> f64 {
    grid.points
        .iter()
        .map(|(x, w)| w * (log_p(x) - log_q(x)))
        .sum()
}

// --- density evaluators and quadrature-normalized marginals ---

/// Log density of the conjugate prior at a natural-space point:
/// Poisson rate [η], Bernoulli [π], Multinomial [π_1..π_d] (last cell
/// implied), Normal [μ, φ].
pub fn log_conjugate_pdf(params: &ConjugateParams, point: &[f64]) -> Result<f64> {
    params.validate()?;
    let kernel = match params {
        ConjugateParams::Gamma { tau1, tau2 } => {
            let eta = point[0];
            if eta <= 0.0 {
                return Err(Error::Domain("gamma support is η > 0".into()));
            }
            (tau1 - 1.0) * log(eta) - tau2 * eta
        }
        ConjugateParams::Beta { .. } => {
            let pi = point[0];
            if !(0.0 < pi && pi < 1.0) {
                return Err(Error::Domain("beta support is 0 < π < 1".into()));
            }
            (params.beta_alpha() - 1.0) * log(pi) + (params.beta_beta() - 1.0) * libm::log1p(-pi)
        }
        ConjugateParams::Dirichlet { alpha } => {
            let d = alpha.len() - 1;
            if point.len() != d {
                return Err(Error::Config("dirichlet point dimension mismatch".into()));
            }
            let last = 1.0 - point.iter().sum::<f64>();
            if point.iter().any(|p| *p <= 0.0) || last <= 0.0 {
                return Err(Error::Domain("dirichlet support is the open simplex".into()));
            }
            let mut acc = (alpha[d] - 1.0) * log(last);
            for (a, p) in alpha.iter().zip(point) {
                acc += (a - 1.0) * log(*p);
            }
            acc
        }
        ConjugateParams::NormalGamma {
            tau1,
            tau2,
            tau3,
            tau0,
        } => {
            let (mu, phi) = (point[0], point[1]);
            if phi <= 0.0 {
                return Err(Error::Domain("normal-gamma support is φ > 0".into()));
            }
            tau1 * phi * mu * mu + tau2 * phi * mu + tau3 * phi + tau0 * log(phi)
        }
    };
    Ok(kernel - log_normalizer(params))
}

/// Log likelihood of an observation at a natural-space point (same
/// coordinates as [`log_conjugate_pdf`]).
pub fn log_likelihood(family: Family, point: &[f64], y: &Observation) -> Result<f64> {
    const LN_TWO_PI: f64 = 1.8378770664093453;
    match (family, y) {
        (Family::Poisson, Observation::Count(y)) => {
            let eta = point[0];
            Ok(*y as f64 * log(eta) - eta - raw_log_gamma(*y as f64 + 1.0))
        }
        (Family::Bernoulli, Observation::Binary(y)) => {
            let pi = point[0];
            Ok(if *y { log(pi) } else { libm::log1p(-pi) })
        }
        (Family::Multinomial { categories }, Observation::Counts { y, trials }) => {
            let d = categories - 1;
            let last_p = 1.0 - point.iter().sum::<f64>();
            let sum: u64 = y.iter().sum();
            let last_y = trials - sum;
            let mut acc = raw_log_gamma(*trials as f64 + 1.0)
                - raw_log_gamma(last_y as f64 + 1.0)
                + last_y as f64 * log(last_p);
            for i in 0..d {
                acc += y[i] as f64 * log(point[i]) - raw_log_gamma(y[i] as f64 + 1.0);
            }
            Ok(acc)
        }
        (Family::Normal, Observation::Real(y)) => {
            let (mu, phi) = (point[0], point[1]);
            Ok(0.5 * log(phi) - 0.5 * LN_TWO_PI - 0.5 * phi * (y - mu) * (y - mu))
        }
        _ => Err(Error::Domain("observation does not match family".into())),
    }
}

/// Log marginal likelihood ∫ prior(η) lik(y|η) dη by adaptive quadrature.
/// This is the numeric counterpart of [`crate::family::log_predictive`].
pub fn log_marginal_by_quadrature(params: &ConjugateParams, y: &Observation) -> Result<f64> {
    params.validate()?;
    let mut prev = f64::NAN;
    for n in [64usize, 128, 256] {
        let value = log_marginal_at(params, y, n)?;
        if prev.is_finite() && fabs(value - prev) < 1e-9 {
            return Ok(value);
        }
        prev = value;
    }
    Ok(prev)
}

fn log_marginal_at(params: &ConjugateParams, y: &Observation, n: usize) -> Result<f64> {
    match (params, y) {
        (ConjugateParams::Gamma { tau1, tau2 }, Observation::Count(yv)) => {
            // integrate over λ = ln η with a Laplace proposal at the
            // posterior-shaped kernel (τ1+y, τ2+1)
            let (a, b) = (tau1 + *yv as f64, tau2 + 1.0);
            let rule = log_space_rule(n, log(a / b), PROPOSAL_WIDEN / a)?;
            let family = params.family();
            let prior = params.clone();
            let obs = y.clone();
            Ok(rule.log_integral(move |lam| {
                let eta = [exp(lam)];
                // + λ: Jacobian dη = e^λ dλ
                log_conjugate_pdf(&prior, &eta).unwrap_or(f64::NEG_INFINITY)
                    + log_likelihood(family, &eta, &obs).unwrap_or(f64::NEG_INFINITY)
                    + lam
            }))
        }
        (ConjugateParams::Beta { .. }, Observation::Binary(yv)) => {
            let (a, b) = (
                params.beta_alpha() + if *yv { 1.0 } else { 0.0 },
                params.beta_beta() + if *yv { 0.0 } else { 1.0 },
            );
            let rule = log_space_rule(n, log(a / b), PROPOSAL_WIDEN * (a + b) / (a * b))?;
            let prior = params.clone();
            let obs = y.clone();
            Ok(rule.log_integral(move |lam| {
                let pi = [1.0 / (1.0 + exp(-lam))];
                // Jacobian dπ = π(1-π) dλ
                log_conjugate_pdf(&prior, &pi).unwrap_or(f64::NEG_INFINITY)
                    + log_likelihood(Family::Bernoulli, &pi, &obs).unwrap_or(f64::NEG_INFINITY)
                    - softplus(lam)
                    - softplus(-lam)
            }))
        }
        (ConjugateParams::Dirichlet { alpha }, Observation::Counts { y: counts, trials }) => {
            // Stick-breaking factorizes the posterior-shaped Dirichlet
            // integral into d independent Beta integrals.
            let d = alpha.len() - 1;
            let mut c = alloc::vec![0.0; d + 1];
            let mut used = 0u64;
            for i in 0..d {
                c[i] = alpha[i] + counts[i] as f64;
                used += counts[i];
            }
            c[d] = alpha[d] + (trials - used) as f64;
            let mut acc = raw_log_gamma(*trials as f64 + 1.0)
                - raw_log_gamma((trials - used) as f64 + 1.0);
            for yi in counts {
                acc -= raw_log_gamma(*yi as f64 + 1.0);
            }
            // subtract the prior normalizer: the integrand carries it
            acc -= log_normalizer(params);
            for l in 0..d {
                let a = c[l];
                let b: f64 = c[l + 1..].iter().sum();
                let rule = log_space_rule(n, log(a / b), PROPOSAL_WIDEN * (a + b) / (a * b))?;
                acc += rule.log_integral(log_beta_kernel(a, b));
            }
            Ok(acc)
        }
        (ConjugateParams::NormalGamma { .. }, Observation::Real(yv)) => {
            let (mu0, c0, n0, d0) = (
                params.ng_mu0(),
                params.ng_c0(),
                params.ng_n0(),
                params.ng_d0(),
            );
            // posterior-shaped proposal in u = ln φ
            let n_star = n0 + 1.0;
            let d_star = d0 + c0 * (yv - mu0) * (yv - mu0) / (c0 + 1.0);
            let outer = log_space_rule(n, log(n_star / d_star), PROPOSAL_WIDEN * 2.0 / n_star)?;
            let (zin, lwin) = gauss_hermite_log(24)?;
            let prior = params.clone();
            let m_hat = (c0 * mu0 + yv) / (c0 + 1.0);
            Ok(outer.log_integral(move |u| {
                let phi = exp(u);
                let v_hat = 1.0 / ((c0 + 1.0) * phi);
                let s = sqrt(2.0 * v_hat);
                // inner ∫ over μ with a completed-square proposal
                let mut terms = [0.0f64; 24];
                for (t, (z, lw)) in terms.iter_mut().zip(zin.iter().zip(&lwin)) {
                    let mu = m_hat + s * z;
                    let pt = [mu, phi];
                    *t = lw
                        + log_conjugate_pdf(&prior, &pt).unwrap_or(f64::NEG_INFINITY)
                        + log_likelihood(Family::Normal, &pt, &Observation::Real(*yv))
                            .unwrap_or(f64::NEG_INFINITY);
                }
                log(s) + log_sum_exp_slice(&terms) + u // + u: dφ = φ du
            }))
        }
        _ => Err(Error::Domain("observation does not match family".into())),
    }
}
