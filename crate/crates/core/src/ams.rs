//! The splitting loop.
//!
//! `run_ams` drives n particles toward the target level a. Each iteration
//! kills the k lowest particles, records the k-th order statistic Z as the
//! new level, and redraws the killed particles from the exact conditional
//! law above Z. The loop stops when Z >= a and returns the unbiased
//! estimator
//!
//! ```text
//!     p_hat = C * (1 - k/n)^J,
//! ```
//!
//! with J the number of completed iterations and C the fraction of
//! particles at or above a in the final state (C is m/n for some
//! m in {n - k + 1, ..., n}; for k = 1 it is always 1).
//!
//! Determinism: all draws come from the caller's [`CounterRng`], one
//! substream per run; killed particles are redrawn in ascending rank order,
//! and ordering ties are broken by particle slot. Two runs with the same
//! seed are bit-identical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, RandomModel};
use crate::real::{real, real_u64, Real};
use crate::rng::CounterRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The level trace failed to reach the target within the iteration
    /// budget. Distinct from config errors so callers can map it to a
    /// dedicated exit status.
    #[error("exceeded {limit} iterations at level {level} (target {target})")]
    MaxIterationsExceeded { limit: u64, level: f64, target: f64 },
}

/// Parameters of one splitting run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmsConfig<T> {
    /// Number of particles, at least 2.
    pub n: u32,
    /// Particles killed per iteration, in {1, ..., n - 1}.
    pub k: u32,
    /// Initial level (particles start from L(X | X > x)).
    pub x: T,
    /// Target level.
    pub a: T,
    /// Iteration budget; `None` derives a generous default from the hazard
    /// gap between x and a.
    pub max_iterations: Option<u64>,
}

impl<T: Real> AmsConfig<T> {
    pub fn new(n: u32, k: u32, x: T, a: T) -> Self {
        AmsConfig {
            n,
            k,
            x,
            a,
            max_iterations: None,
        }
    }

    /// Structural checks plus model compatibility (finite hazard at the
    /// start, positive mass beyond the target, atom only at the target).
    pub fn validate<M: RandomModel<T>>(&self, model: &M) -> Result<(), AmsError> {
        if self.n < 2 {
            return Err(AmsError::InvalidConfig(format!(
                "n = {} violates n >= 2",
                self.n
            )));
        }
        if self.k < 1 || self.k >= self.n {
            return Err(AmsError::InvalidConfig(format!(
                "k = {} violates 1 <= k <= n - 1 with n = {}",
                self.k, self.n
            )));
        }
        if !(self.x.is_finite() && self.a.is_finite()) {
            return Err(AmsError::InvalidConfig(
                "levels x and a must be finite".to_string(),
            ));
        }
        if self.x > self.a {
            return Err(AmsError::InvalidConfig(format!(
                "start level x = {} exceeds target a = {}",
                self.x, self.a
            )));
        }
        if model.survival(self.x) <= T::zero() {
            return Err(AmsError::Model(ModelError::DegenerateConditioning {
                x: self.x.to_f64().unwrap_or(f64::NAN),
            }));
        }
        if model.survival(self.a) <= T::zero() {
            return Err(AmsError::InvalidConfig(format!(
                "target a = {} carries zero probability",
                self.a
            )));
        }
        if let Some(atom) = model.atom_level() {
            if atom != self.a {
                return Err(AmsError::InvalidConfig(format!(
                    "model has an atom at {atom}; the target must equal it, got a = {}",
                    self.a
                )));
            }
        }
        Ok(())
    }

    /// Default budget: 100 times a high quantile of the expected iteration
    /// count, n * gap / k <= n * gap for the unit-exponential hazard gap.
    pub fn resolved_max_iterations<M: RandomModel<T>>(&self, model: &M) -> u64 {
        if let Some(m) = self.max_iterations {
            return m;
        }
        let gap = (model.lambda(self.a) - model.lambda(self.x))
            .to_f64()
            .unwrap_or(f64::MAX)
            .max(0.0);
        let n = f64::from(self.n);
        let mean_scale = n * gap;
        (100.0 * (mean_scale + 10.0 * mean_scale.sqrt() + n)).ceil() as u64
    }
}

/// One particle: current level plus its original slot, which breaks
/// ordering ties deterministically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Particle<T> {
    pub level: T,
    pub slot: u32,
}

fn particle_key<T: Real>(p: &Particle<T>) -> (T, u32) {
    (p.level, p.slot)
}

/// Particle system between iterations. `current_level` is the latest Z and
/// `iteration` counts how many levels have been computed so far.
#[derive(Clone, Debug)]
pub struct AmsState<T> {
    n: u32,
    k: u32,
    particles: Vec<Particle<T>>,
    current_level: T,
    iteration: u64,
    samples_drawn: u64,
}

impl<T: Real> AmsState<T> {
    /// Draw the initial n particles from L(X | X > x) and compute Z^1.
    pub fn initialize<M: RandomModel<T>>(
        model: &M,
        config: &AmsConfig<T>,
        rng: &mut CounterRng,
    ) -> Result<Self, AmsError> {
        config.validate(model)?;
        let mut particles: Vec<Particle<T>> = (0..config.n)
            .map(|slot| Particle {
                level: model.sample_above(config.x, rng),
                slot,
            })
            .collect();
        for p in &particles {
            if !p.level.is_finite() {
                return Err(AmsError::InvalidConfig(format!(
                    "model produced a non-finite level {}",
                    p.level
                )));
            }
        }
        particles.sort_by(|a, b| particle_key(a).partial_cmp(&particle_key(b)).unwrap());
        let current_level = particles[(config.k - 1) as usize].level;
        Ok(AmsState {
            n: config.n,
            k: config.k,
            particles,
            current_level,
            iteration: 1,
            samples_drawn: u64::from(config.n),
        })
    }

    /// One splitting iteration: kill the k lowest, redraw them above the
    /// current level (ascending rank order), recompute the level.
    pub fn step<M: RandomModel<T>>(&mut self, model: &M, rng: &mut CounterRng) {
        let z = self.current_level;
        let killed: Vec<u32> = self.particles[..self.k as usize]
            .iter()
            .map(|p| p.slot)
            .collect();
        self.particles.drain(..self.k as usize);
        for slot in killed {
            let level = model.sample_above(z, rng);
            let p = Particle { level, slot };
            let at = self
                .particles
                .partition_point(|q| particle_key(q) < particle_key(&p));
            self.particles.insert(at, p);
        }
        self.current_level = self.particles[(self.k - 1) as usize].level;
        self.iteration += 1;
        self.samples_drawn += u64::from(self.k);
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn current_level(&self) -> T {
        self.current_level
    }

    /// Number of levels computed so far (the run's J is this minus one once
    /// the loop has stopped).
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn
    }

    fn count_at_or_above(&self, a: T) -> u32 {
        let below = self.particles.partition_point(|p| p.level < a);
        self.n - below as u32
    }
}

/// Outcome of one splitting run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmsResult<T> {
    /// Number of completed splitting iterations J.
    pub j_count: u64,
    /// Particles at or above the target in the final state.
    pub n_above: u32,
    /// Corrector C = n_above / n, in {(n - k + 1)/n, ..., 1}.
    pub corrector: T,
    /// Unbiased estimate C (1 - k/n)^J.
    pub estimate: T,
    /// Total conditional draws: n + k J.
    pub samples_drawn: u64,
    /// Levels x = Z^0, Z^1, ..., Z^(J+1); the last entry clears the target.
    pub level_trace: Vec<T>,
}

/// The estimator value from its integer statistics, evaluated in log space
/// so huge J cannot underflow step by step.
pub fn estimate<T: Real>(j_count: u64, corrector: T, n: u32, k: u32) -> T {
    let ratio = real::<T>(f64::from(k)) / real::<T>(f64::from(n));
    corrector * (real_u64::<T>(j_count) * (-ratio).ln_1p()).exp()
}

/// Run to the target with an explicit stream. Library callers that need
/// substream discipline (one stream per replication) use this entry.
pub fn run_ams_from<T: Real, M: RandomModel<T>>(
    model: &M,
    config: &AmsConfig<T>,
    rng: &mut CounterRng,
) -> Result<AmsResult<T>, AmsError> {
    let max_iterations = config.resolved_max_iterations(model);
    let mut state = AmsState::initialize(model, config, rng)?;
    let mut level_trace = vec![config.x, state.current_level];
    while state.current_level < config.a {
        if state.iteration > max_iterations {
            return Err(AmsError::MaxIterationsExceeded {
                limit: max_iterations,
                level: state.current_level.to_f64().unwrap_or(f64::NAN),
                target: config.a.to_f64().unwrap_or(f64::NAN),
            });
        }
        state.step(model, rng);
        level_trace.push(state.current_level);
    }
    let j_count = state.iteration - 1;
    let n_above = state.count_at_or_above(config.a);
    let corrector = real::<T>(f64::from(n_above)) / real::<T>(f64::from(config.n));
    Ok(AmsResult {
        j_count,
        n_above,
        corrector,
        estimate: estimate(j_count, corrector, config.n, config.k),
        samples_drawn: state.samples_drawn(),
        level_trace,
    })
}

/// Run with the root substream of `seed`.
pub fn run_ams<T: Real, M: RandomModel<T>>(
    model: &M,
    config: &AmsConfig<T>,
    seed: u64,
) -> Result<AmsResult<T>, AmsError> {
    run_ams_from(model, config, &mut CounterRng::substream(seed, 0))
}

/// Fixed number of splitting iterations with no stopping rule, for
/// distributional checks on levels and particles free of stopping bias.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnstoppedRun<T> {
    /// x = Z^0, Z^1, ..., Z^(steps+1).
    pub levels: Vec<T>,
    /// Sorted particle levels after `steps` resampling iterations.
    pub particles: Vec<T>,
}

pub fn run_unstopped<T: Real, M: RandomModel<T>>(
    model: &M,
    n: u32,
    k: u32,
    x: T,
    steps: u64,
    seed: u64,
) -> Result<UnstoppedRun<T>, AmsError> {
    // The target plays no role without a stopping rule; validation only
    // needs a reachable dummy at the start level.
    let config = AmsConfig::new(n, k, x, x);
    let mut rng = CounterRng::substream(seed, 0);
    let mut state = AmsState::initialize(model, &config, &mut rng)?;
    let mut levels = vec![x, state.current_level];
    for _ in 0..steps {
        state.step(model, &mut rng);
        levels.push(state.current_level);
    }
    Ok(UnstoppedRun {
        levels,
        particles: state.particles.iter().map(|p| p.level).collect(),
    })
}

/// Direct Monte Carlo of P(X >= a): `m_samples` unconditional draws, one
/// substream each, so the result is independent of evaluation order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectMcResult<T> {
    pub hits: u64,
    pub m_samples: u64,
    pub estimate: T,
}

pub fn run_direct_mc<T: Real, M: RandomModel<T> + Sync>(
    model: &M,
    a: T,
    m_samples: u64,
    seed: u64,
) -> DirectMcResult<T> {
    use rayon::prelude::*;
    let hits = (0..m_samples)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = CounterRng::substream(seed, i);
            model.sample_above(T::zero(), &mut rng) >= a
        })
        .count() as u64;
    DirectMcResult {
        hits,
        m_samples,
        estimate: real::<T>(hits as f64) / real::<T>(m_samples as f64),
    }
}

/// The particle system mapped to the hazard scale, where every model looks
/// like the unit exponential.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformedView<T> {
    /// Hazard-scale particle levels, ascending.
    pub levels: Vec<T>,
    /// Hazard-scale current level.
    pub current_level: T,
}

pub fn transformed_view<T: Real, M: RandomModel<T>>(
    state: &AmsState<T>,
    model: &M,
) -> Result<TransformedView<T>, ModelError> {
    let mut levels = Vec::with_capacity(state.particles.len());
    for p in &state.particles {
        levels.push(crate::models::lambda_between(model, p.level, T::zero())?);
    }
    let current_level = crate::models::lambda_between(model, state.current_level, T::zero())?;
    Ok(TransformedView {
        levels,
        current_level,
    })
}
