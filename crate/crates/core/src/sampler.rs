//! Rejection sampler for the discrete conservative Brownian excursion `ν_N`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::FilmState;
use crate::rng::{NoiseStream, Purpose};

/// Default cap on the total number of proposals in a batch.
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSample {
    pub state: FilmState,
    /// Rejections plus one.
    pub attempts: u64,
}

/// Turns raw increments into a proposal: centre the increments, integrate
/// them with step `1/N` starting from 0, shift to unit mean.
pub fn bridge_from_increments(dw: &[f64], out: &mut [f64]) {
    let n = dw.len();
    let nf = n as f64;
    let mean_dw = dw.iter().sum::<f64>() / nf;
    out[0] = 0.0;
    for i in 1..n {
        out[i] = out[i - 1] + (dw[i - 1] - mean_dw) / nf;
    }
    let shift = 1.0 - out.iter().sum::<f64>() / nf;
    for v in out.iter_mut() {
        *v += shift;
    }
}

fn check_inputs(n: usize, beta: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be >= 2, got {n}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "beta must be finite and > 0, got {beta}"
        )));
    }
    Ok(())
}

/// Draws one sample, giving up after `max_attempts` proposals.
pub fn sample_nu_bounded(
    n: usize,
    beta: f64,
    stream: &mut NoiseStream,
    max_attempts: u64,
) -> Result<InvariantSample> {
    check_inputs(n, beta)?;
    let sd = (n as f64 / beta).sqrt();
    let mut dw = vec![0.0; n];
    let mut w = vec![0.0; n];
    for attempt in 0..max_attempts {
        stream.gaussian_into(attempt, &mut dw);
        for v in dw.iter_mut() {
            *v *= sd;
        }
        bridge_from_increments(&dw, &mut w);
        if !w.iter().any(|&x| x < 0.0) {
            return Ok(InvariantSample {
                state: FilmState::new(w)?,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::AttemptBudget {
        budget: max_attempts,
        accepted: 0,
        n,
        beta,
    })
}

/// Draws one sample, retrying until acceptance.
pub fn sample_nu(n: usize, beta: f64, stream: &mut NoiseStream) -> Result<InvariantSample> {
    sample_nu_bounded(n, beta, stream, u64::MAX)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<FilmState>,
    pub attempts: u64,
}

impl SampleBatch {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.attempts as f64
    }
}

/// `count` samples; sample `j` uses its own stream `(seed, j)`, so the
/// result does not depend on the thread count.
pub fn sample_batch(n: usize, beta: f64, count: usize, seed: u64) -> Result<SampleBatch> {
    sample_batch_with_budget(n, beta, count, seed, DEFAULT_ATTEMPT_BUDGET)
}

pub fn sample_batch_with_budget(
    n: usize,
    beta: f64,
    count: usize,
    seed: u64,
    budget: u64,
) -> Result<SampleBatch> {
    check_inputs(n, beta)?;
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let results: Vec<Result<InvariantSample>> = (0..count as u64)
        .into_par_iter()
        .map(|j| {
            let mut stream = NoiseStream::new(seed, j, Purpose::Sampler);
            sample_nu_bounded(n, beta, &mut stream, budget)
        })
        .collect();
    let mut samples = Vec::with_capacity(count);
    let mut attempts = 0u64;
    for r in results {
        match r {
            Ok(s) => {
                attempts = attempts.saturating_add(s.attempts);
                samples.push(s.state);
            }
            Err(Error::AttemptBudget { .. }) => {
                return Err(Error::AttemptBudget {
                    budget,
                    accepted: samples.len(),
                    n,
                    beta,
                })
            }
            Err(e) => return Err(e),
        }
        if attempts > budget {
            return Err(Error::AttemptBudget {
                budget,
                accepted: samples.len(),
                n,
                beta,
            });
        }
    }
    Ok(SampleBatch { samples, attempts })
}
