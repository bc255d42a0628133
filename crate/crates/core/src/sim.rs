//! Synthetic data generation with known latent states.
//!
//! States follow θ_t = G θ_{t-1} + ω_t with ω_t ~ N(0, W) for a caller
//! supplied PSD innovation covariance, the linear predictor is
//! λ_t = F'_t θ_t exactly, and observations are drawn from the model
//! family through its inverse link (exp for Poisson, logistic for
//! Bernoulli, softmax with a reference cell for Multinomial, identity
//! and exp for the Normal mean and precision). Everything is a pure
//! function of the seed; the generator is ChaCha20, a counter-based
//! stream whose output sequence is specified independently of this
//! runtime.

use crate::family::{Family, Observation};
use crate::linalg::check_covariance;
use crate::state_space::StateModel;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use libm::{cos, exp, log, sqrt};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use core::f64::consts::TAU;

// Largest Poisson rate sampled exactly by chunked inversion.
const MAX_POISSON_RATE: f64 = 1e6;

/// Deterministic sampler over a ChaCha20 stream.
pub struct SimRng {
    rng: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform draw on (0, 1], so logarithms are always finite.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw by the Box-Muller transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let radius = sqrt(-2.0 * log(self.uniform()));
        let angle = TAU * self.uniform();
        self.spare_normal = Some(radius * libm::sin(angle));
        radius * cos(angle)
    }

    /// Poisson draw by multiplicative inversion, chunked through rate
    /// additivity so the per-chunk acceptance product never underflows.
    pub fn poisson(&mut self, rate: f64) -> Result<u64> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::Simulation(format!("invalid Poisson rate {rate}")));
        }
        if rate > MAX_POISSON_RATE {
            return Err(Error::Simulation(format!(
                "Poisson rate {rate:.3e} too large to sample exactly; rescale the model"
            )));
        }
        let mut total = 0u64;
        let mut remaining = rate;
        while remaining > 0.0 {
            let chunk = remaining.min(30.0);
            remaining -= chunk;
            let floor = exp(-chunk);
            let mut product = 1.0;
            let mut k = 0u64;
            loop {
                product *= self.uniform();
                if product <= floor {
                    break;
                }
                k += 1;
            }
            total += k;
        }
        Ok(total)
    }

    /// Binomial draw by walking the pmf recurrence against one uniform.
    pub fn binomial(&mut self, n: u64, p: f64) -> u64 {
        if p <= 0.0 || n == 0 {
            return 0;
        }
        if p >= 1.0 {
            return n;
        }
        let nf = n as f64;
        let ratio = p / (1.0 - p);
        let mut pmf = libm::pow(1.0 - p, nf);
        let mut cdf = pmf;
        let u = self.uniform();
        let mut k = 0u64;
        while cdf < u && k < n {
            pmf *= (nf - k as f64) / (k as f64 + 1.0) * ratio;
            cdf += pmf;
            k += 1;
        }
        k
    }

    /// Multinomial draw by sequential binomial conditioning.
    pub fn multinomial(&mut self, trials: u64, probs: &[f64]) -> Vec<u64> {
        let mut out = Vec::with_capacity(probs.len());
        let mut remaining_n = trials;
        let mut remaining_p = 1.0f64;
        for (i, &p) in probs.iter().enumerate() {
            if i + 1 == probs.len() {
                out.push(remaining_n);
                break;
            }
            let conditional = if remaining_p > 0.0 {
                (p / remaining_p).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let y = self.binomial(remaining_n, conditional);
            out.push(y);
            remaining_n -= y;
            remaining_p -= p;
        }
        out
    }
}

/// A simulated path: states, the exact linear predictors they induce,
/// and observations drawn from the family.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub states: Vec<DVector<f64>>,
    pub predictors: Vec<DVector<f64>>,
    pub observations: Vec<Observation>,
    pub seed: u64,
}

/// Simulates T steps of the model from the initial state θ0 with
/// innovation covariance W. `trials` sets the per-step total for the
/// multinomial family and is ignored elsewhere. Deterministic per seed.
pub fn simulate(
    model: &StateModel,
    w: &DMatrix<f64>,
    theta0: &DVector<f64>,
    t_len: usize,
    seed: u64,
    trials: Option<u64>,
) -> Result<SimOutput> {
    let p = model.state_dim();
    if t_len == 0 {
        return Err(Error::Config("simulation length must be at least 1".into()));
    }
    if theta0.len() != p || w.nrows() != p || w.ncols() != p {
        return Err(Error::Config(format!(
            "simulation inputs must match state dimension {p}"
        )));
    }
    check_covariance(w, "innovation covariance")?;
    if model.covariate_dim() != 0 {
        return Err(Error::Config(
            "simulation does not generate covariates; drop regression blocks".into(),
        ));
    }
    // W = U diag(max(s, 0)) U' gives the exact square root U diag(√s);
    // a zero W then propagates states with no noise at all
    let eig = w.clone().symmetric_eigen();
    let mut root = eig.eigenvectors.clone();
    for (j, s) in eig.eigenvalues.iter().enumerate() {
        let scale = sqrt(s.max(0.0));
        for i in 0..p {
            root[(i, j)] *= scale;
        }
    }

    let mut rng = SimRng::new(seed);
    let f_mat = model.observation_matrix(&[])?;
    let g = model.evolution();
    let mut states = Vec::with_capacity(t_len);
    let mut predictors = Vec::with_capacity(t_len);
    let mut observations = Vec::with_capacity(t_len);
    let mut theta = theta0.clone();
    for t in 1..=t_len {
        let z = DVector::from_fn(p, |_, _| rng.normal());
        theta = g * &theta + &root * z;
        let lambda = f_mat.transpose() * &theta;
        let y = draw_observation(model.family(), &lambda, trials, &mut rng)
            .map_err(|e| e.at(t))?;
        states.push(theta.clone());
        predictors.push(lambda.clone());
        observations.push(y);
    }
    Ok(SimOutput {
        states,
        predictors,
        observations,
        seed,
    })
}

fn check_link_range(lambda: &DVector<f64>) -> Result<()> {
    for v in lambda.iter() {
        if !v.is_finite() || libm::fabs(*v) > 700.0 {
            return Err(Error::Simulation(format!(
                "linear predictor {v} overflows the exponential link; rescale the model"
            )));
        }
    }
    Ok(())
}

fn draw_observation(
    family: Family,
    lambda: &DVector<f64>,
    trials: Option<u64>,
    rng: &mut SimRng,
) -> Result<Observation> {
    check_link_range(lambda)?;
    match family {
        Family::Poisson => Ok(Observation::Count(rng.poisson(exp(lambda[0]))?)),
        Family::Bernoulli => {
            let p = 1.0 / (1.0 + exp(-lambda[0]));
            Ok(Observation::Binary(rng.uniform() <= p))
        }
        Family::Normal => {
            // λ = (mean, log precision)
            let sd = exp(-0.5 * lambda[1]);
            Ok(Observation::Real(lambda[0] + sd * rng.normal()))
        }
        Family::Multinomial { categories } => {
            let n = trials.ok_or_else(|| {
                Error::Config("multinomial simulation requires a trial count".into())
            })?;
            // softmax over (λ_1..λ_d, 0), shifted for stability
            let mut shift = 0.0f64;
            for v in lambda.iter() {
                shift = shift.max(*v);
            }
            let mut probs = Vec::with_capacity(categories);
            let mut z = exp(-shift);
            for v in lambda.iter() {
                let e = exp(v - shift);
                probs.push(e);
                z += e;
            }
            probs.push(exp(-shift));
            for p in probs.iter_mut() {
                *p /= z;
            }
            let counts = rng.multinomial(n, &probs);
            Ok(Observation::Counts {
                y: counts[..categories - 1].to_vec(),
                trials: n,
            })
        }
    }
}
