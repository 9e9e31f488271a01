use bornlab_core::nogo::{
    dispersion_free_search, propagate_pm_constraint, rotation_jump_demo, separation_check, JumpStatus, PmGeometry,
    PmOutcome, PmValues, RaySet, SearchOptions, SearchOutcome,
};
use serde::Deserialize;
use serde_json::json;

use crate::doc::{schema, state, VecDoc};
use crate::error::{numeric, CliError};
use crate::report::{CheckResult, Outcome};
use crate::scenario::Scenario;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    pm: Option<PmDoc>,
    rotation: Option<RotationDoc>,
    search: Option<SearchDoc>,
    #[serde(default)]
    separation: Vec<PairDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmDoc {
    chi1: VecDoc,
    chi2: VecDoc,
    /// Defaults to `chi1 + chi2` and `chi1 - chi2`.
    plus: Option<VecDoc>,
    minus: Option<VecDoc>,
    values: PmValues,
    /// Expected values after propagation, or `"contradiction"`.
    expect: Option<PmExpect>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PmExpect {
    Values(PmValues),
    Status(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RotationDoc {
    chi: VecDoc,
    phi: VecDoc,
    steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchDoc {
    rays: Vec<VecDoc>,
    /// `[ray, value]` pairs.
    #[serde(default)]
    pinned: Vec<(usize, bool)>,
    #[serde(default = "count_limit")]
    count_limit: u64,
    #[serde(default = "node_limit")]
    node_limit: u64,
    expect_solutions: Option<u64>,
    /// `satisfiable` or `unsatisfiable`.
    expect: Option<String>,
}

fn count_limit() -> u64 {
    u64::MAX
}

fn node_limit() -> u64 {
    SearchOptions::default().node_limit
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    chi: VecDoc,
    phi: VecDoc,
}

const VALUE_TOL: f64 = 1e-12;

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= VALUE_TOL,
        (None, None) => true,
        _ => false,
    }
}

pub fn run(scenario: &Scenario) -> Result<Outcome, CliError> {
    let p: Params = scenario.params()?;
    let mut checks = Vec::new();

    let pm = match &p.pm {
        Some(d) => {
            let (a, b) = (state(&d.chi1, "pm.chi1")?, state(&d.chi2, "pm.chi2")?);
            let geom = match (&d.plus, &d.minus) {
                (None, None) => PmGeometry::from_pair(&a, &b),
                (Some(pl), Some(mi)) => PmGeometry::new(&a, &b, &state(pl, "pm.plus")?, &state(mi, "pm.minus")?),
                _ => return Err(CliError::Schema("pm: give both plus and minus, or neither".into())),
            }
            .map_err(schema("pm"))?;
            let out = propagate_pm_constraint(&geom, &d.values).map_err(numeric("propagating P+ and P-"))?;
            checks.push(match (&d.expect, &out) {
                (None, _) => CheckResult::pass("pm"),
                (Some(PmExpect::Status(s)), PmOutcome::Contradiction { .. }) if s == "contradiction" => {
                    CheckResult::pass("pm")
                }
                (Some(PmExpect::Values(want)), PmOutcome::Extended { values, .. })
                    if close(want.p1, values.p1)
                        && close(want.p2, values.p2)
                        && close(want.plus, values.plus)
                        && close(want.minus, values.minus) =>
                {
                    CheckResult::pass("pm")
                }
                (Some(want), got) => CheckResult::fail("pm", format!("expected {want:?}, propagation gave {got:?}")),
            });
            Some(out)
        }
        None => None,
    };

    let rotation = match &p.rotation {
        Some(d) => {
            let chi = state(&d.chi, "rotation.chi")?;
            let phi = state(&d.phi, "rotation.phi")?;
            let r = rotation_jump_demo(&chi, &phi, d.steps).map_err(schema("rotation"))?;
            checks.push(match r.status {
                JumpStatus::Contradiction | JumpStatus::NoFlipRequired => CheckResult::pass("rotation"),
                JumpStatus::Inconclusive => CheckResult::inconclusive(
                    "rotation",
                    format!(
                        "consecutive rays {:?} are far enough apart to carry a flip; use more steps",
                        r.first_allowed
                    ),
                ),
            });
            Some(r)
        }
        None => None,
    };

    let search = match &p.search {
        Some(d) => {
            let rays = d
                .rays
                .iter()
                .enumerate()
                .map(|(i, v)| state(v, &format!("search.rays[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let rays = RaySet::new(rays).map_err(schema("search.rays"))?;
            let opts = SearchOptions {
                count_limit: d.count_limit,
                node_limit: d.node_limit,
            };
            let r = dispersion_free_search(&rays, &d.pinned, opts).map_err(schema("search"))?;
            let status = match r.outcome {
                SearchOutcome::Satisfiable { .. } => "satisfiable",
                SearchOutcome::Unsatisfiable { .. } => "unsatisfiable",
                SearchOutcome::Inconclusive { .. } => "inconclusive",
            };
            if status == "inconclusive" {
                checks.push(CheckResult::inconclusive(
                    "search",
                    format!("node limit {} reached before the search finished", d.node_limit),
                ));
            } else if let Some(want) = &d.expect {
                checks.push(CheckResult::check("search", want == status, || format!("expected {want}, found {status}")));
            }
            if let Some(n) = d.expect_solutions {
                checks.push(if r.exhaustive {
                    CheckResult::check("search.solutions", r.solutions == n, || {
                        format!("expected {n} satisfying assignments, found {}", r.solutions)
                    })
                } else {
                    CheckResult::inconclusive("search.solutions", "the count stopped before the search was exhaustive")
                });
            }
            Some(r)
        }
        None => None,
    };

    let separation = p
        .separation
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let what = format!("separation[{i}]");
            separation_check(&state(&d.chi, &what)?, &state(&d.phi, &what)?).map_err(schema(&what))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Outcome {
        checks,
        metrics: json!({ "pm": pm, "rotation": rotation, "search": search, "separation": separation }),
        csv: None,
    })
}
