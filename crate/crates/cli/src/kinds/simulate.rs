use std::fmt::Write as _;

use bornlab_core::csl::{
    ensemble_outcomes, martingale_check, simulate, CollapseModel, EnsembleOptions, NormConvention, SimParams,
};
use bornlab_core::{born_weight, CMatrix};
use serde::Deserialize;
use serde_json::json;

use crate::doc::{matrix, state, MatDoc, VecDoc};
use crate::error::{numeric, CliError};
use crate::report::{CheckResult, Outcome};
use crate::scenario::Scenario;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    psi0: VecDoc,
    /// Zero when absent.
    hamiltonian: Option<MatDoc>,
    /// `diag(1, -1)` when absent (two-level systems only).
    observables: Option<Vec<MatDoc>>,
    #[serde(default = "one")]
    gamma: f64,
    #[serde(default)]
    convention: NormConvention,
    dt: Option<f64>,
    t_max: Option<f64>,
    epsilon: Option<f64>,
    trajectories: Option<usize>,
    /// Scales the 3-sigma acceptance band.
    multiplier: Option<f64>,
    martingale: Option<Martingale>,
    #[serde(default)]
    csv: CsvOptions,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Martingale {
    checkpoints: Vec<f64>,
    trajectories: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvOptions {
    #[serde(default = "csv_trajectories")]
    trajectories: usize,
    #[serde(default = "csv_every")]
    record_every: usize,
}

fn csv_trajectories() -> usize {
    1
}

fn csv_every() -> usize {
    100
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            trajectories: csv_trajectories(),
            record_every: csv_every(),
        }
    }
}

pub fn run(scenario: &Scenario, want_csv: bool) -> Result<Outcome, CliError> {
    let p: Params = scenario.params()?;
    let psi0 = state(&p.psi0, "psi0")?;
    let dim = psi0.dim();
    let hamiltonian = match &p.hamiltonian {
        Some(h) => matrix(h, "hamiltonian")?,
        None => CMatrix::zeros(dim, dim),
    };
    let model = match &p.observables {
        Some(obs) => {
            let obs = obs
                .iter()
                .enumerate()
                .map(|(k, m)| matrix(m, &format!("observables[{k}]")))
                .collect::<Result<_, _>>()?;
            CollapseModel::new(hamiltonian, obs, p.gamma)
        }
        None if dim == 2 => CollapseModel::qubit(hamiltonian, p.gamma),
        None => {
            return Err(CliError::Schema(format!(
                "observables are required for dimension {dim}"
            )))
        }
    }
    .map_err(|e| CliError::Schema(format!("model: {e}")))?
    .with_convention(p.convention);

    let defaults = SimParams::default();
    let params = SimParams {
        t_max: p.t_max.unwrap_or(defaults.t_max),
        dt: p.dt.unwrap_or(defaults.dt),
        epsilon: p.epsilon.unwrap_or(defaults.epsilon),
        record_every: 0,
    };
    let opts = EnsembleOptions {
        trajectories: p.trajectories.unwrap_or(EnsembleOptions::default().trajectories),
        base_seed: scenario.seed,
        multiplier: p.multiplier.unwrap_or(1.0),
    };
    let ensemble = ensemble_outcomes(&model, &psi0, &params, &opts).map_err(numeric("running the ensemble"))?;

    let mut checks = Vec::new();
    for row in &ensemble.rows {
        checks.push(CheckResult::check(format!("born_frequency[{}]", row.outcome), row.within, || {
            format!(
                "frequency {} deviates from Born weight {} by {}, beyond the band {}",
                row.frequency, row.born, row.deviation, row.band
            )
        }));
    }
    checks.push(if ensemble.unresolved_flag {
        CheckResult::inconclusive(
            "unresolved_fraction",
            format!(
                "{} of trajectories did not collapse by t_max = {}",
                ensemble.unresolved_fraction, params.t_max
            ),
        )
    } else {
        CheckResult::pass("unresolved_fraction")
    });

    let martingale = match &p.martingale {
        Some(m) => {
            let mopts = EnsembleOptions {
                trajectories: m.trajectories,
                ..opts
            };
            let r = martingale_check(&model, &psi0, params.dt, &m.checkpoints, &mopts)
                .map_err(numeric("checking the martingale property"))?;
            checks.push(CheckResult::check("martingale", r.pass, || {
                let t = r.rows.iter().find(|row| !row.within).map_or(f64::NAN, |row| row.time);
                format!("ensemble mean of the outcome weights leaves the 4-sigma band at t = {t}")
            }));
            Some(r)
        }
        None => None,
    };

    let born: Vec<f64> = model
        .projectors()
        .iter()
        .map(|pk| born_weight(&psi0, pk))
        .collect::<Result<_, _>>()
        .map_err(numeric("computing Born weights"))?;
    let metrics = json!({
        "model": {
            "dim": dim,
            "gamma": model.gamma(),
            "convention": model.convention(),
            "c_norm": model.c_norm(),
            "outcomes": model.num_outcomes(),
            "eigenvalues": model.eigenvalues(),
            "born": born,
        },
        "params": params,
        "ensemble": ensemble,
        "martingale": martingale,
    });

    let csv = if want_csv {
        Some(trajectory_csv(&model, &psi0, &params, scenario.seed, &p.csv)?)
    } else {
        None
    };
    Ok(Outcome { checks, metrics, csv })
}

/// Columns: trajectory, seed, t, then `re_i, im_i` per amplitude and `p_k` per outcome.
fn trajectory_csv(
    model: &CollapseModel,
    psi0: &bornlab_core::StateVector,
    params: &SimParams,
    base_seed: u64,
    opts: &CsvOptions,
) -> Result<String, CliError> {
    let dim = psi0.dim();
    let mut out = String::from("trajectory,seed,t");
    for i in 0..dim {
        let _ = write!(out, ",re_{i},im_{i}");
    }
    for k in 0..model.num_outcomes() {
        let _ = write!(out, ",p_{k}");
    }
    out.push('\n');
    let params = SimParams {
        record_every: opts.record_every.max(1),
        ..*params
    };
    for i in 0..opts.trajectories {
        let seed = base_seed.wrapping_add(i as u64);
        let tr = simulate(model, psi0, &params, seed).map_err(numeric("recording a trajectory"))?;
        for ((t, s), w) in tr.times.iter().zip(&tr.states).zip(&tr.weights) {
            let _ = write!(out, "{i},{seed},{t}");
            for a in s.as_slice() {
                let _ = write!(out, ",{},{}", a.re, a.im);
            }
            for x in w {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}
