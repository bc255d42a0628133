//! Structural state-space models: block-composed evolution and observation
//! matrices plus discount-factor innovation covariances.
//!
//! A model is a list of blocks, each contributing a few state components:
//!
//! * polynomial trend of a given order (local level, local trend, ...)
//!   with the unit upper-bidiagonal Jordan evolution;
//! * a seasonal harmonic, a 2x2 rotation by `harmonic * 2π / period`;
//! * static regression coefficients (identity evolution) whose observation
//!   rows carry the covariate values supplied at each time step.
//!
//! Each block addresses one or more of the k linear-predictor entries, so
//! multivariate families can share or separate structure per predictor.
//! Innovation covariances come from discount factors: per block,
//! W = ((1-δ)/δ) (G C G')_bb, zero across blocks.

use crate::family::Family;
use crate::linalg::{check_covariance, symmetrize};
use crate::{Error, Result};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;
use libm::{cos, sin};
use nalgebra::{DMatrix, DVector};

/// Structural role of one block of state components.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockKind {
    /// Polynomial trend; `order` = 1 is a local level, 2 adds a slope.
    Polynomial { order: usize },
    /// Seasonal harmonic `harmonic` of a cycle of length `period`.
    Harmonic { period: f64, harmonic: usize },
    /// Regression on named covariate columns, one coefficient each.
    Regression { columns: Vec<String> },
}

impl BlockKind {
    /// Number of state components the block occupies.
    pub fn dim(&self) -> usize {
        match self {
            BlockKind::Polynomial { order } => *order,
            BlockKind::Harmonic { .. } => 2,
            BlockKind::Regression { columns } => columns.len(),
        }
    }
}

/// One block plus its discount factor and the predictors it feeds.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub kind: BlockKind,
    /// Discount factor in (0, 1]; 1 means a static block.
    pub discount: f64,
    /// Zero-based indices of the linear predictors this block enters.
    pub targets: Vec<usize>,
}

/// A fully validated structural model for one observation family.
#[derive(Clone, Debug)]
pub struct StateModel {
    family: Family,
    blocks: Vec<BlockSpec>,
    ranges: Vec<Range<usize>>,
    g: DMatrix<f64>,
    p: usize,
    n_covariates: usize,
}

/// Builds and validates a structural model.
///
/// Fails with a configuration error if a block is malformed, a discount is
/// outside (0, 1], a target index is out of range for the family's
/// predictor dimension, or some predictor is fed by no block at all.
pub fn build_structure(family: Family, blocks: Vec<BlockSpec>) -> Result<StateModel> {
    let k = family.predictor_dim();
    if blocks.is_empty() {
        return Err(Error::Config("model needs at least one block".into()));
    }
    let mut covered = alloc::vec![false; k];
    for (i, b) in blocks.iter().enumerate() {
        match &b.kind {
            BlockKind::Polynomial { order } => {
                if *order == 0 {
                    return Err(Error::Config(format!("block {i}: polynomial order must be >= 1")));
                }
            }
            BlockKind::Harmonic { period, harmonic } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::Config(format!("block {i}: harmonic period must be positive")));
                }
                if *harmonic == 0 {
                    return Err(Error::Config(format!("block {i}: harmonic index must be >= 1")));
                }
            }
            BlockKind::Regression { columns } => {
                if columns.is_empty() {
                    return Err(Error::Config(format!("block {i}: regression needs at least one column")));
                }
            }
        }
        if !(b.discount.is_finite() && b.discount > 0.0 && b.discount <= 1.0) {
            return Err(Error::Config(format!(
                "block {i}: discount must lie in (0, 1], got {}",
                b.discount
            )));
        }
        if b.targets.is_empty() {
            return Err(Error::Config(format!("block {i}: empty target list")));
        }
        let mut seen = alloc::vec![false; k];
        for &t in &b.targets {
            if t >= k {
                return Err(Error::Config(format!(
                    "block {i}: target predictor {t} out of range for {} (k = {k})",
                    family.name()
                )));
            }
            if seen[t] {
                return Err(Error::Config(format!("block {i}: duplicate target {t}")));
            }
            seen[t] = true;
            covered[t] = true;
        }
    }
    if let Some(idx) = covered.iter().position(|c| !c) {
        return Err(Error::Config(format!(
            "predictor {idx} is fed by no block (k = {k} inconsistent with block targets)"
        )));
    }

    let mut ranges = Vec::with_capacity(blocks.len());
    let mut p = 0usize;
    let mut n_covariates = 0usize;
    for b in &blocks {
        let d = b.kind.dim();
        ranges.push(p..p + d);
        p += d;
        if let BlockKind::Regression { columns } = &b.kind {
            n_covariates += columns.len();
        }
    }

    let mut g = DMatrix::<f64>::zeros(p, p);
    for (b, r) in blocks.iter().zip(&ranges) {
        match &b.kind {
            BlockKind::Polynomial { order } => {
                for i in 0..*order {
                    g[(r.start + i, r.start + i)] = 1.0;
                    if i + 1 < *order {
                        g[(r.start + i, r.start + i + 1)] = 1.0;
                    }
                }
            }
            BlockKind::Harmonic { period, harmonic } => {
                let angle = *harmonic as f64 * 2.0 * core::f64::consts::PI / *period;
                let (c, s) = (cos(angle), sin(angle));
                g[(r.start, r.start)] = c;
                g[(r.start, r.start + 1)] = s;
                g[(r.start + 1, r.start)] = -s;
                g[(r.start + 1, r.start + 1)] = c;
            }
            BlockKind::Regression { columns } => {
                for i in 0..columns.len() {
                    g[(r.start + i, r.start + i)] = 1.0;
                }
            }
        }
    }

    Ok(StateModel {
        family,
        blocks,
        ranges,
        g,
        p,
        n_covariates,
    })
}

impl StateModel {
    pub fn family(&self) -> Family {
        self.family
    }

    /// State dimension.
    pub fn state_dim(&self) -> usize {
        self.p
    }

    /// Predictor dimension k.
    pub fn predictor_dim(&self) -> usize {
        self.family.predictor_dim()
    }

    /// Evolution matrix G (time invariant).
    pub fn evolution(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    /// Component range of block `i` within the state vector.
    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.ranges[i].clone()
    }

    /// Number of covariate values each time step must supply, in block
    /// order (regression blocks only).
    pub fn covariate_dim(&self) -> usize {
        self.n_covariates
    }

    /// Names of the covariate columns, in the order `observation_matrix`
    /// consumes them.
    pub fn covariate_names(&self) -> Vec<&str> {
        let mut names = Vec::with_capacity(self.n_covariates);
        for b in &self.blocks {
            if let BlockKind::Regression { columns } = &b.kind {
                for c in columns {
                    names.push(c.as_str());
                }
            }
        }
        names
    }

    /// The p x k observation matrix F_t. Polynomial blocks put a 1 in the
    /// level row of each targeted predictor, harmonics a 1 in their first
    /// row, regression rows carry the covariate values.
    pub fn observation_matrix(&self, covariates: &[f64]) -> Result<DMatrix<f64>> {
        if covariates.len() != self.n_covariates {
            return Err(Error::Config(format!(
                "expected {} covariate values, got {}",
                self.n_covariates,
                covariates.len()
            )));
        }
        if covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite covariate value".into()));
        }
        let k = self.predictor_dim();
        let mut f = DMatrix::<f64>::zeros(self.p, k);
        let mut cov_pos = 0usize;
        for (b, r) in self.blocks.iter().zip(&self.ranges) {
            match &b.kind {
                BlockKind::Polynomial { .. } | BlockKind::Harmonic { .. } => {
                    for &t in &b.targets {
                        f[(r.start, t)] = 1.0;
                    }
                }
                BlockKind::Regression { columns } => {
                    for i in 0..columns.len() {
                        for &t in &b.targets {
                            f[(r.start + i, t)] = covariates[cov_pos + i];
                        }
                    }
                    cov_pos += columns.len();
                }
            }
        }
        Ok(f)
    }

    /// Discount innovation covariance: block-diagonal pieces of
    /// ((1-δ)/δ) G C G', exactly zero for δ = 1.
    pub fn discount_innovation(&self, c_prev: &DMatrix<f64>) -> DMatrix<f64> {
        let propagated = &self.g * c_prev * self.g.transpose();
        let mut w = DMatrix::<f64>::zeros(self.p, self.p);
        for (b, r) in self.blocks.iter().zip(&self.ranges) {
            if b.discount == 1.0 {
                continue;
            }
            let inflation = (1.0 - b.discount) / b.discount;
            for i in r.clone() {
                for j in r.clone() {
                    w[(i, j)] = inflation * propagated[(i, j)];
                }
            }
        }
        symmetrize(&mut w);
        w
    }

    /// One evolution step: a = G m, R = G C G' + W with W from the block
    /// discounts applied to C.
    pub fn evolve(&self, m: &DVector<f64>, c: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if m.len() != self.p || c.nrows() != self.p || c.ncols() != self.p {
            return Err(Error::Config(format!(
                "state moment dimensions {}/{}x{} do not match p = {}",
                m.len(),
                c.nrows(),
                c.ncols(),
                self.p
            )));
        }
        check_covariance(c, "state covariance")?;
        let a = &self.g * m;
        let mut r = &self.g * c * self.g.transpose() + self.discount_innovation(c);
        symmetrize(&mut r);
        Ok((a, r))
    }

    /// Gaussian prior on the linear predictor: f = F' a, Q = F' R F.
    pub fn predictor_prior(
        &self,
        a: &DVector<f64>,
        r: &DMatrix<f64>,
        covariates: &[f64],
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let f_mat = self.observation_matrix(covariates)?;
        let f = f_mat.transpose() * a;
        let mut q = f_mat.transpose() * r * &f_mat;
        symmetrize(&mut q);
        Ok((f, q))
    }

    /// Reference initial moments: zero mean, unit covariance.
    pub fn default_prior(&self) -> (DVector<f64>, DMatrix<f64>) {
        (DVector::zeros(self.p), DMatrix::identity(self.p, self.p))
    }
}

/// A Gaussian summary (mean, covariance) of a state or predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::Config(format!(
                "moment dimensions disagree: mean {} vs covariance {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite mean".into()));
        }
        check_covariance(&cov, "moments")?;
        Ok(GaussianMoments { mean, cov })
    }
}
