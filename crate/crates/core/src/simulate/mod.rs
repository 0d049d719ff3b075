//! Gaussian random field simulation and the low/high-pass filtering experiment.
//!
//! Random numbers: every `(replicate, variable)` pair draws from its own
//! ChaCha20 stream, keyed by the user seed and stream id
//! `replicate · 2^16 + variable`; normals come from `rand_distr::StandardNormal`.
//! Output is therefore independent of how replicates are spread over threads.

mod circulant;
mod dense;
mod filter;

pub use circulant::{CirculantPlan, MAX_EXPANSION};
pub use dense::{DensePlan, DENSE_LIMIT};
pub use filter::{filter2d, filtered_correlation, pearson, FilterStencil, FilteredCorrelation};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{ModelError, SimError};
use crate::grid::{GridSpec, MultiField};
use crate::models::{ModelSpec, SpectralModel, Validity, ValidityBudget};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    Dense,
    #[default]
    Circulant,
}

#[derive(Clone, Debug)]
pub struct SimRequest<'a> {
    pub model: &'a ModelSpec,
    pub grid: GridSpec,
    pub reps: usize,
    pub seed: u64,
    pub method: Method,
}

/// Random stream for one replicate and variable.
pub fn stream(seed: u64, rep: usize, var: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 16) | var as u64);
    rng
}

pub(crate) fn normals(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Reject models that fail their validity check.
pub fn ensure_valid(model: &ModelSpec) -> Result<(), SimError> {
    match model.validity(&ValidityBudget::default()) {
        Validity::Valid => Ok(()),
        Validity::Invalid(v) => Err(ModelError::Invalid(v.to_string()).into()),
    }
}

enum Plan {
    Dense(DensePlan),
    Circulant(CirculantPlan),
}

/// Simulate `reps` independent zero-mean Gaussian replicates of `model`.
///
/// The circulant path falls back to the dense path when embedding fails and
/// the problem fits the dense budget.
pub fn simulate(req: &SimRequest) -> Result<MultiField, SimError> {
    ensure_valid(req.model)?;
    if req.reps == 0 {
        return Err(SimError::Unsupported("zero replicates requested".into()));
    }
    if req.model.dim() != req.grid.dims() {
        return Err(SimError::Unsupported(format!(
            "{}-d model on a {}-d grid",
            req.model.dim(),
            req.grid.dims()
        )));
    }
    let p = req.model.nvars();
    let plan = match req.method {
        Method::Dense => {
            let cov = req.model.as_covariance().ok_or_else(|| {
                SimError::Unsupported("dense simulation needs a covariance model".into())
            })?;
            Plan::Dense(DensePlan::new(cov, &req.grid)?)
        }
        Method::Circulant => match CirculantPlan::new(req.model, &req.grid) {
            Ok(plan) => Plan::Circulant(plan),
            Err(SimError::EmbeddingFailed) if req.grid.len() * p <= DENSE_LIMIT => {
                let cov = req.model.as_covariance().ok_or(SimError::EmbeddingFailed)?;
                Plan::Dense(DensePlan::new(cov, &req.grid)?)
            }
            Err(e) => return Err(e),
        },
    };
    let per_rep: Vec<Vec<f64>> = (0..req.reps)
        .into_par_iter()
        .map(|r| match &plan {
            Plan::Dense(d) => d.draw(req.seed, r),
            Plan::Circulant(c) => c.draw(req.seed, r),
        })
        .collect();
    Ok(MultiField::from_real(
        req.grid.clone(),
        p,
        req.reps,
        per_rep.concat(),
    )?)
}
