use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{fill_noise, CollapseModel};
use crate::error::{Error, Result};
use crate::hilbert::{born_weight, StateVector};

/// `dt * gamma` above this draws a step-size warning.
pub const STIFF_STEP: f64 = 0.1;
/// Unresolved fractions above this are flagged.
pub const UNRESOLVED_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub t_max: f64,
    pub dt: f64,
    /// A trajectory has collapsed onto outcome `k` once `<P_k> > 1 - epsilon`.
    pub epsilon: f64,
    /// Store every `record_every`-th state; `0` keeps only the endpoints.
    pub record_every: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            t_max: 50.0,
            dt: 1e-3,
            epsilon: 1e-6,
            record_every: 0,
        }
    }
}

impl SimParams {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::Domain(format!("t_max must be nonnegative, got {}", self.t_max)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        let n = self.t_max / self.dt;
        let r = n.round();
        if (n - r).abs() < 1e-9 * n.max(1.0) { r as usize } else { n.ceil() as usize }
    }
}

fn warnings(model: &CollapseModel, params: &SimParams) -> Vec<String> {
    let stiffness = params.dt * model.gamma();
    if stiffness > STIFF_STEP {
        vec![format!("dt * gamma = {stiffness} exceeds {STIFF_STEP}; the Euler scheme may be inaccurate")]
    } else {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// `<P_k>` at each stored time.
    pub weights: Vec<Vec<f64>>,
    pub outcome: Option<usize>,
    pub steps: usize,
    pub warnings: Vec<String>,
}

struct Run {
    outcome: Option<usize>,
    steps: usize,
}

/// Integrates one trajectory in the model's eigenbasis, calling `visit(step, psi,
/// weights)` after the initial check and after every step. Stops on collapse when
/// `stop_on_collapse`.
fn integrate<F>(
    model: &CollapseModel,
    psi0: &StateVector,
    params: &SimParams,
    seed: u64,
    stop_on_collapse: bool,
    mut visit: F,
) -> Result<Run>
where
    F: FnMut(usize, &[num_complex::Complex64], &[f64]) -> Result<()>,
{
    if psi0.dim() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), found: psi0.dim() });
    }
    let mut psi = model.to_eigenbasis(&psi0.normalized()?);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sd = (model.gamma() * params.dt).sqrt();
    let mut db = vec![0.0; model.num_observables()];
    let mut w = vec![0.0; model.num_outcomes()];
    let mut scratch = Vec::with_capacity(model.dim());
    let collapsed = |w: &[f64]| w.iter().position(|&x| x > 1.0 - params.epsilon);
    model.weights_eig(&psi, &mut w);
    visit(0, &psi, &w)?;
    let mut outcome = collapsed(&w);
    if outcome.is_some() && stop_on_collapse {
        return Ok(Run { outcome, steps: 0 });
    }
    let total = params.steps();
    for step in 1..=total {
        fill_noise(&mut db, sd, &mut rng);
        if model.step_eig(&mut psi, params.dt, &db, &mut scratch)
            && psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Integration {
                step,
                time: step as f64 * params.dt,
                reason: "non-finite amplitude".into(),
            });
        }
        model.weights_eig(&psi, &mut w);
        visit(step, &psi, &w)?;
        outcome = collapsed(&w);
        if outcome.is_some() && stop_on_collapse {
            return Ok(Run { outcome, steps: step });
        }
    }
    Ok(Run { outcome, steps: total })
}

/// One seeded trajectory, stopped at collapse or at `t_max`.
pub fn simulate(model: &CollapseModel, psi0: &StateVector, params: &SimParams, seed: u64) -> Result<Trajectory> {
    params.validate()?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut weights = Vec::new();
    let mut last = None;
    let every = params.record_every;
    let run = integrate(model, psi0, params, seed, true, |step, psi, w| {
        if step == 0 || (every > 0 && step % every == 0) {
            times.push(step as f64 * params.dt);
            states.push(model.out_of_eigenbasis(psi)?);
            weights.push(w.to_vec());
            last = None;
        } else {
            last = Some((step, psi.to_vec(), w.to_vec()));
        }
        Ok(())
    })?;
    if let Some((step, psi, w)) = last {
        times.push(step as f64 * params.dt);
        states.push(model.out_of_eigenbasis(&psi)?);
        weights.push(w);
    }
    Ok(Trajectory {
        seed,
        times,
        states,
        weights,
        outcome: run.outcome,
        steps: run.steps,
        warnings: warnings(model, params),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub trajectories: usize,
    pub base_seed: u64,
    /// Deviations must fall within `multiplier` times the 3-sigma band.
    pub multiplier: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            trajectories: 10_000,
            base_seed: 0,
            multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub outcome: usize,
    pub count: usize,
    pub frequency: f64,
    pub born: f64,
    pub deviation: f64,
    /// `3 sqrt(p (1 - p) / N)`.
    pub band: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub trajectories: usize,
    pub base_seed: u64,
    pub rows: Vec<OutcomeRow>,
    pub unresolved: usize,
    pub unresolved_fraction: f64,
    pub unresolved_flag: bool,
    pub mean_collapse_time: Option<f64>,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Runs trajectories with seeds `base_seed + i` and compares outcome frequencies
/// with the Born weights of `psi0`.
pub fn ensemble_outcomes(
    model: &CollapseModel,
    psi0: &StateVector,
    params: &SimParams,
    opts: &EnsembleOptions,
) -> Result<EnsembleReport> {
    params.validate()?;
    if opts.trajectories == 0 {
        return Err(Error::Domain("at least one trajectory is required".into()));
    }
    let quiet = SimParams { record_every: 0, ..*params };
    let runs: Vec<Run> = (0..opts.trajectories)
        .into_par_iter()
        .map(|i| integrate(model, psi0, &quiet, opts.base_seed.wrapping_add(i as u64), true, |_, _, _| Ok(())))
        .collect::<Result<_>>()?;
    let n = opts.trajectories;
    let mut counts = vec![0usize; model.num_outcomes()];
    let mut unresolved = 0;
    let mut collapse_steps = 0u64;
    for r in &runs {
        match r.outcome {
            Some(k) => {
                counts[k] += 1;
                collapse_steps += r.steps as u64;
            }
            None => unresolved += 1,
        }
    }
    let psi = psi0.normalized()?;
    let mut rows = Vec::with_capacity(counts.len());
    for (k, &count) in counts.iter().enumerate() {
        let born = born_weight(&psi, &model.projectors()[k])?;
        let frequency = count as f64 / n as f64;
        let deviation = (frequency - born).abs();
        let band = 3.0 * (born * (1.0 - born) / n as f64).sqrt();
        rows.push(OutcomeRow {
            outcome: k,
            count,
            frequency,
            born,
            deviation,
            band,
            within: deviation <= band * opts.multiplier,
        });
    }
    let resolved = n - unresolved;
    let unresolved_fraction = unresolved as f64 / n as f64;
    Ok(EnsembleReport {
        trajectories: n,
        base_seed: opts.base_seed,
        pass: rows.iter().all(|r| r.within),
        rows,
        unresolved,
        unresolved_fraction,
        unresolved_flag: unresolved_fraction > UNRESOLVED_LIMIT,
        mean_collapse_time: (resolved > 0).then(|| collapse_steps as f64 * params.dt / resolved as f64),
        warnings: warnings(model, params),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub time: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Standard error of the mean.
    pub sigma: Vec<f64>,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub trajectories: usize,
    pub born: Vec<f64>,
    pub rows: Vec<CheckpointRow>,
    pub pass: bool,
}

/// Ensemble mean and variance of `<P_k>` at each checkpoint time, integrating
/// without stopping at collapse. A checkpoint passes when every mean is within
/// `4 sigma + 1e-12` of the Born weight.
pub fn martingale_check(
    model: &CollapseModel,
    psi0: &StateVector,
    dt: f64,
    checkpoints: &[f64],
    opts: &EnsembleOptions,
) -> Result<MartingaleReport> {
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::Domain("checkpoints must be nonnegative and increasing".into()));
    }
    let t_max = checkpoints.last().copied().unwrap_or(0.0);
    let params = SimParams {
        t_max,
        dt,
        epsilon: 0.5,
        record_every: 0,
    };
    params.validate()?;
    if opts.trajectories == 0 {
        return Err(Error::Domain("at least one trajectory is required".into()));
    }
    let at: Vec<usize> = checkpoints
        .iter()
        .map(|&t| SimParams { t_max: t, ..params }.steps())
        .collect();
    let k = model.num_outcomes();
    let samples: Vec<Vec<Vec<f64>>> = (0..opts.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(at.len());
            let mut next = 0;
            integrate(model, psi0, &params, opts.base_seed.wrapping_add(i as u64), false, |step, _, w| {
                while next < at.len() && at[next] == step {
                    out.push(w.to_vec());
                    next += 1;
                }
                Ok(())
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let psi = psi0.normalized()?;
    let born: Vec<f64> = model
        .projectors()
        .iter()
        .map(|p| born_weight(&psi, p))
        .collect::<Result<_>>()?;
    let n = opts.trajectories as f64;
    let mut rows = Vec::with_capacity(at.len());
    for (c, &time) in checkpoints.iter().enumerate() {
        let mut mean = vec![0.0; k];
        for s in &samples {
            for j in 0..k {
                mean[j] += s[c][j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut variance = vec![0.0; k];
        for s in &samples {
            for j in 0..k {
                variance[j] += (s[c][j] - mean[j]).powi(2);
            }
        }
        let denom = (n - 1.0).max(1.0);
        variance.iter_mut().for_each(|v| *v /= denom);
        let sigma: Vec<f64> = variance.iter().map(|v| (v / n).sqrt()).collect();
        let within = (0..k).all(|j| {
            let dev = (mean[j] - born[j]).abs();
            // The floor absorbs rounding in ensembles that do not move.
            dev < 4.0 * sigma[j] + 1e-12
        });
        rows.push(CheckpointRow {
            time,
            mean,
            variance,
            sigma,
            within,
        });
    }
    Ok(MartingaleReport {
        trajectories: opts.trajectories,
        born,
        pass: rows.iter().all(|r| r.within),
        rows,
    })
}
