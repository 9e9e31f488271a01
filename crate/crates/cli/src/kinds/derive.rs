use bornlab_core::emergence::{
    born_limit, equiprobable_values, measure_uniqueness_solve, rational_born_values, RationalState, UniquenessOutcome,
};
use bornlab_core::{born_weight, CoarseGraining, GrainingFamily, Projector, Resolution, SeparatingSet};
use serde::Deserialize;
use serde_json::json;

use crate::doc::{schema, state, GrainingDoc, VecDoc};
use crate::error::{numeric, CliError};
use crate::report::{CheckResult, Outcome};
use crate::scenario::Scenario;

const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Deserialize)]
#[serde(tag = "lemma", rename_all = "snake_case", deny_unknown_fields)]
enum Params {
    /// Equal-modulus coefficients on the blocks listed in `parts`.
    Equiprobable {
        psi: VecDoc,
        graining: GrainingDoc,
        parts: Vec<Vec<usize>>,
    },
    /// Weights `m_k` on the blocks of `graining` (one unit cell per weight by default).
    Rational {
        weights: Vec<u64>,
        graining: Option<GrainingDoc>,
        resolution: Option<Resolution>,
    },
    /// Norm-continuity limit for the cell projector on `cells`.
    Limit { psi: VecDoc, cells: Vec<usize>, tol: f64 },
}

pub fn run(scenario: &Scenario) -> Result<Outcome, CliError> {
    match scenario.params::<Params>()? {
        Params::Equiprobable { psi, graining, parts } => {
            let psi = state(&psi, "psi")?;
            let g = graining.build("graining")?;
            let projectors = parts
                .iter()
                .map(|c| Projector::from_cells(g.dim(), c.iter().copied()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(schema("parts"))?;
            let set = SeparatingSet::from_state(&psi, projectors).map_err(schema("parts"))?;
            let d = equiprobable_values(&psi, &set, &g).map_err(numeric("replaying the equiprobable case"))?;
            let mut dev = 0.0f64;
            for (cells, v) in d.table.iter() {
                let p = Projector::cells(g.dim(), cells.clone()).map_err(numeric("rebuilding projectors"))?;
                dev = dev.max((v - born_weight(&psi, &p).map_err(numeric("computing Born weights"))?).abs());
            }
            let checks = vec![
                trace_check(&d.trace, TRACE_TOL),
                CheckResult::check("born_agreement", dev <= 1e-10, || format!("largest deviation {dev:e}")),
            ];
            Ok(Outcome {
                checks,
                metrics: json!({ "lemma": "equiprobable", "derived": d, "max_born_deviation": dev }),
                csv: None,
            })
        }
        Params::Rational {
            weights,
            graining,
            resolution,
        } => {
            let g = match graining {
                Some(doc) => doc.build("graining")?,
                None => CoarseGraining::unit_cells(weights.len()).map_err(schema("weights"))?,
            };
            let r = RationalState::on_blocks(&g, weights).map_err(schema("weights"))?;
            let mut family = GrainingFamily::new(vec![g.clone()]).map_err(schema("graining"))?;
            if let Some(res) = resolution {
                family = family.with_resolution(res);
            }
            let d = rational_born_values(&r, &g, &family).map_err(numeric("replaying the rational case"))?;
            let born = r.born_exact();
            let exact_ok = d.exact.len() == born.len() && d.exact.iter().zip(&born).all(|((_, v), b)| v == b);
            let checks = vec![
                trace_check(&d.trace, TRACE_TOL),
                CheckResult::check("born_agreement_exact", exact_ok, || {
                    "derived rational values differ from m_k / sum m".to_string()
                }),
            ];
            let born: Vec<String> = born.iter().map(|b| b.to_string()).collect();
            Ok(Outcome {
                checks,
                metrics: json!({ "lemma": "rational", "derived": d, "born_exact": born }),
                csv: None,
            })
        }
        Params::Limit { psi, cells, tol } => {
            let psi = state(&psi, "psi")?;
            let p = Projector::from_cells(psi.dim(), cells).map_err(schema("cells"))?;
            let lim = born_limit(&psi, &p, tol).map_err(numeric("approximating by rational states"))?;
            let w = born_weight(&psi, &p).map_err(numeric("computing Born weights"))?;
            let errs: Vec<f64> = lim.record.iter().map(|a| a.norm_error).collect();
            let monotone = errs.windows(2).all(|e| e[1] <= e[0]);
            let checks = vec![
                trace_check(&lim.trace, tol),
                CheckResult::check("limit_within_tol", (lim.value - w).abs() <= tol, || {
                    format!("limit {} differs from {w} by more than {tol}", lim.value)
                }),
                CheckResult::check("approximants_improve", monotone, || {
                    "recorded approximant errors increase".to_string()
                }),
            ];
            Ok(Outcome {
                checks,
                metrics: json!({ "lemma": "limit", "limit": lim, "born": w }),
                csv: None,
            })
        }
    }
}

fn trace_check(trace: &bornlab_core::emergence::DerivationTrace, tol: f64) -> CheckResult {
    match trace.validate(tol) {
        Ok(()) => CheckResult::pass("trace_valid"),
        Err(e) => CheckResult::fail("trace_valid", e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureParams {
    psi: VecDoc,
    grainings: Vec<GrainingDoc>,
    resolution: Option<Resolution>,
}

pub fn run_measure(scenario: &Scenario) -> Result<Outcome, CliError> {
    let p: MeasureParams = scenario.params()?;
    let psi = state(&p.psi, "psi")?;
    let gs = p
        .grainings
        .iter()
        .enumerate()
        .map(|(i, g)| g.build(&format!("grainings[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(g) = gs.iter().find(|g| g.dim() != psi.dim()) {
        return Err(CliError::Schema(format!(
            "grainings: a graining of dimension {} does not fit psi of dimension {}",
            g.dim(),
            psi.dim()
        )));
    }
    let mut family = GrainingFamily::new(gs).map_err(schema("grainings"))?;
    if let Some(res) = p.resolution {
        family = family.with_resolution(res);
    }
    let r = measure_uniqueness_solve(&psi, &family).map_err(numeric("solving the measure constraints"))?;
    let mut checks = vec![CheckResult::check("invariance_unitaries", r.invariance_residual <= 1e-10, || {
        format!("transposition unitary residual {:e}", r.invariance_residual)
    })];
    match &r.outcome {
        UniquenessOutcome::Unique { born_deviation, .. } => {
            checks.push(CheckResult::pass("unique"));
            checks.push(CheckResult::check("born_agreement", *born_deviation <= 1e-9, || {
                format!("solution deviates from the Born table by {born_deviation:e}")
            }));
        }
        UniquenessOutcome::Underdetermined { nullity, .. } => checks.push(CheckResult::inconclusive(
            "unique",
            format!("the constraints leave {nullity} free direction(s); finer grainings may pin them"),
        )),
    }
    Ok(Outcome {
        checks,
        metrics: json!({ "uniqueness": r }),
        csv: None,
    })
}
