//! The experiment implementations behind each CLI subcommand.
//!
//! Each module exposes a `run` entry point for the standalone subcommand and,
//! where the acceptance suite needs it, a `criterion` entry point with frozen
//! parameters.  All Monte Carlo batches fan out over sample indices on a
//! rayon pool and are reduced in index order, so results are independent of
//! the worker count.

pub mod accept;
pub mod autocorr;
pub mod decay;
pub mod f_operator;
pub mod functional;
pub mod gap;
pub mod hermitian;
pub mod kernel_mc;
pub mod linearization;
pub mod mde_check;

use ndarray::Array2;
use rayon::prelude::*;
use rayon::ThreadPool;

use randnet::kernel::SpectralPoint;
use randnet::profile::{build_profile, VarianceProfile};
use randnet::sampler::{sample_matrix, EnsembleSpec, EntryLaw};
use randnet::C64;

use crate::config::{config_hash, Resolved};
use crate::report::{Provenance, RunReport, CODE_VERSION};

/// Shared context for one standalone experiment run.
pub struct ExpContext {
    pub cfg: Resolved,
    pub pool: ThreadPool,
}

impl ExpContext {
    pub fn new(cfg: Resolved) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()?;
        Ok(ExpContext { cfg, pool })
    }

    /// The run's variance profile (profile randomness uses the run seed).
    pub fn profile(&self) -> anyhow::Result<VarianceProfile> {
        Ok(build_profile(&self.cfg.profile, self.cfg.n, self.cfg.seed)?)
    }

    /// The run's spectral point.
    pub fn point(&self) -> anyhow::Result<SpectralPoint> {
        Ok(SpectralPoint::new(self.cfg.zeta1, self.cfg.zeta2)?)
    }

    /// A fresh report skeleton with provenance filled in.
    pub fn report(&self) -> RunReport {
        let echo = self.cfg.echo();
        let hash = config_hash(self.cfg.experiment, &echo);
        RunReport::new(
            self.cfg.experiment,
            Provenance {
                config_hash: hash,
                seed: self.cfg.seed,
                code_version: CODE_VERSION,
            },
            Some(echo),
        )
    }

    /// Geometric time grid from the resolved grid parameters.
    pub fn times(&self) -> anyhow::Result<Vec<f64>> {
        Ok(randnet::dynamics::geometric_times(
            self.cfg.t_min,
            self.cfg.t_max,
            self.cfg.t_points,
        )?)
    }

    /// Uniform τ grid `0, step, …` up to `tau_max`.
    pub fn taus(&self) -> Vec<f64> {
        let count = (self.cfg.tau_max / self.cfg.tau_step).round() as usize;
        (0..=count).map(|i| i as f64 * self.cfg.tau_step).collect()
    }
}

/// Runs `f` over `0..count` on the pool, preserving index order.
pub fn par_map_indices<T, F>(pool: &ThreadPool, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

/// Draws the coupling matrix for one `(seed, sample_index)` slot.
pub fn draw(profile: &VarianceProfile, law: EntryLaw, seed: u64, index: u64) -> Array2<C64> {
    sample_matrix(&EnsembleSpec {
        law,
        profile,
        seed,
        sample_index: index,
    })
}
