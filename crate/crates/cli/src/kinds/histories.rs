use bornlab_core::histories::{consistency_check, HistorySet, IdentityResolution, Verdict as Consistency, DEFAULT_EPSILON};
use bornlab_core::{c, CMatrix, CVector, StateVector, SymmetryUnitary, UnitaryKind, C64};
use serde::Deserialize;
use serde_json::json;

use crate::doc::{hadamard, schema, state, ProjectorDoc, UnitaryDoc, VecDoc};
use crate::error::{numeric, CliError};
use crate::report::{CheckResult, Outcome};
use crate::scenario::Scenario;

/// Rows are listed in the report up to this many histories.
const ROW_LIMIT: usize = 4096;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    /// `commuting-chain` or `interference`; excludes `psi0` and `steps`.
    preset: Option<String>,
    psi0: Option<VecDoc>,
    steps: Option<Vec<StepDoc>>,
    epsilon: Option<f64>,
    expect: Option<Consistency>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    resolution: ResolutionDoc,
    /// Applied before the step's projection; identity when absent.
    unitary: Option<UnitaryDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum ResolutionDoc {
    /// `z` (standard basis) or `x` (Hadamard basis, two levels).
    Named(String),
    Basis { basis: Vec<VecDoc> },
    Projectors { projectors: Vec<ProjectorDoc> },
}

fn named(name: &str, dim: usize) -> Result<IdentityResolution, CliError> {
    match name {
        "z" => IdentityResolution::standard("z", dim).map_err(schema("resolution")),
        "x" if dim == 2 => {
            let h = hadamard();
            let basis: Vec<StateVector> = (0..2)
                .map(|j| StateVector::from_vector(h.column(j).into_owned()))
                .collect::<Result<_, _>>()
                .map_err(schema("resolution"))?;
            IdentityResolution::from_basis("x", &basis).map_err(schema("resolution"))
        }
        _ => Err(CliError::Schema(format!(
            "resolution {name:?} unknown for dimension {dim} (expected z, x, basis, or projectors)"
        ))),
    }
}

fn preset(name: &str) -> Result<(StateVector, Vec<IdentityResolution>, Vec<SymmetryUnitary>, Consistency), CliError> {
    let bad = schema("preset");
    match name {
        // Diagonal evolution between standard-basis projections never mixes branches.
        "commuting-chain" => {
            let phase = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.1)]));
            let u = SymmetryUnitary::new(phase, UnitaryKind::Phase).map_err(schema("preset"))?;
            let psi = StateVector::from_real(&[0.6, 0.8]).map_err(schema("preset"))?;
            let z = named("z", 2)?;
            Ok((psi, vec![z.clone(), z.clone(), z], vec![u.clone(), u.clone(), u], Consistency::Consistent))
        }
        "interference" => {
            let psi = StateVector::from_vector(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).map_err(bad)?;
            let id = SymmetryUnitary::identity(2);
            Ok((
                psi,
                vec![named("z", 2)?, named("x", 2)?, named("z", 2)?],
                vec![id.clone(), id.clone(), id],
                Consistency::Inconsistent,
            ))
        }
        _ => Err(CliError::Schema(format!(
            "preset {name:?} unknown (expected commuting-chain or interference)"
        ))),
    }
}

pub fn run(scenario: &Scenario) -> Result<Outcome, CliError> {
    let p: Params = scenario.params()?;
    let (psi0, resolutions, unitaries, preset_expect) = match (&p.preset, &p.psi0, &p.steps) {
        (Some(name), None, None) => {
            let (a, b, c, e) = preset(name)?;
            (a, b, c, Some(e))
        }
        (None, Some(psi0), Some(steps)) => {
            let psi0 = state(psi0, "psi0")?;
            let dim = psi0.dim();
            let mut resolutions = Vec::new();
            let mut unitaries = Vec::new();
            for (i, s) in steps.iter().enumerate() {
                let what = format!("steps[{i}]");
                resolutions.push(match &s.resolution {
                    ResolutionDoc::Named(n) => named(n, dim)?,
                    ResolutionDoc::Basis { basis } => {
                        let vs = basis.iter().map(|v| state(v, &what)).collect::<Result<Vec<_>, _>>()?;
                        IdentityResolution::from_basis(what.clone(), &vs).map_err(schema(&what))?
                    }
                    ResolutionDoc::Projectors { projectors } => {
                        let ps = projectors
                            .iter()
                            .map(|q| q.build(dim, &what))
                            .collect::<Result<Vec<_>, _>>()?;
                        IdentityResolution::new(what.clone(), ps).map_err(schema(&what))?
                    }
                });
                unitaries.push(match &s.unitary {
                    Some(u) => u.build(dim, &what)?,
                    None => SymmetryUnitary::identity(dim),
                });
            }
            (psi0, resolutions, unitaries, None)
        }
        _ => {
            return Err(CliError::Schema(
                "histories parameters need either preset, or both psi0 and steps".into(),
            ))
        }
    };
    let epsilon = p.epsilon.unwrap_or(DEFAULT_EPSILON);
    let set = HistorySet::new(resolutions, unitaries, epsilon).map_err(schema("steps"))?;
    let report = consistency_check(&set, &psi0).map_err(numeric("enumerating histories"))?;

    let mut checks = vec![
        CheckResult::check("collapsed_normalization", report.collapsed_normalized, || {
            format!("collapsed probabilities sum to {}", report.collapsed_sum)
        }),
        CheckResult::check("uncollapsed_normalization", report.uncollapsed_normalized, || {
            format!("uncollapsed weights sum to {}", report.uncollapsed_sum)
        }),
    ];
    if let Some(expect) = p.expect.or(preset_expect) {
        checks.push(CheckResult::check("consistency", report.verdict == expect, || {
            format!(
                "expected {expect:?} but max discrepancy {} against epsilon {epsilon} gives {:?}",
                report.max_discrepancy, report.verdict
            )
        }));
    }
    let rows_listed = report.rows.len() <= ROW_LIMIT;
    let metrics = json!({
        "verdict": report.verdict,
        "max_discrepancy": report.max_discrepancy,
        "epsilon": report.epsilon,
        "histories": report.rows.len(),
        "collapsed_sum": report.collapsed_sum,
        "uncollapsed_sum": report.uncollapsed_sum,
        "rows": if rows_listed { Some(&report.rows) } else { None },
    });
    Ok(Outcome {
        checks,
        metrics,
        csv: None,
    })
}
