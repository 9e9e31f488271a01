use bornlab_core::lln::{frequency_audit, lln_limit_scan, lln_tail, lln_tail_exact, LlnQuery};
use num_traits::ToPrimitive;
use serde::Deserialize;
use serde_json::json;

use crate::doc::{schema, RationalDoc};
use crate::error::{numeric, CliError};
use crate::report::{CheckResult, Outcome};
use crate::scenario::Scenario;

/// Float and exact tails must agree to this absolute tolerance.
const TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    #[serde(default)]
    tails: Vec<TailDoc>,
    scan: Option<ScanDoc>,
    audit: Option<AuditDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailDoc {
    n: u64,
    delta: RationalDoc,
    p: RationalDoc,
    /// Expected exact value, e.g. `"7/64"`.
    expect: Option<RationalDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanDoc {
    p: f64,
    delta: f64,
    ns: Vec<u64>,
    #[serde(default = "threshold")]
    threshold: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditDoc {
    outcomes: Vec<usize>,
    weights: Vec<f64>,
    /// Smallest surprise score still counted as typical.
    #[serde(default = "threshold")]
    threshold: f64,
}

fn threshold() -> f64 {
    1e-3
}

pub fn run(scenario: &Scenario) -> Result<Outcome, CliError> {
    let p: Params = scenario.params()?;
    let mut checks = Vec::new();
    let mut tails = Vec::new();
    for (i, t) in p.tails.iter().enumerate() {
        let what = format!("tails[{i}]");
        let q = LlnQuery::new(t.n, t.delta.to_f64()?, t.p.to_f64()?).map_err(schema(&what))?;
        let float = lln_tail(&q).map_err(numeric("summing a binomial tail"))?;
        let exact = if t.n <= bornlab_core::lln::EXACT_COEFFICIENT_LIMIT {
            Some(lln_tail_exact(t.n, &t.delta.exact()?, &t.p.exact()?).map_err(numeric("summing an exact tail"))?)
        } else {
            None
        };
        if let Some(e) = &exact {
            let ef = e.to_f64().unwrap_or(f64::NAN);
            checks.push(CheckResult::check(format!("{what}.exact_agreement"), (ef - float).abs() <= TAIL_TOL, || {
                format!("float tail {float} differs from exact {e}")
            }));
        }
        if let Some(want) = &t.expect {
            let want = want.exact()?;
            let ok = exact.as_ref() == Some(&want);
            checks.push(CheckResult::check(format!("{what}.expected"), ok, || {
                format!("tail is {} but {want} was expected", exact.as_ref().map_or(float.to_string(), |e| e.to_string()))
            }));
        }
        tails.push(json!({
            "n": t.n,
            "delta": q.delta,
            "p": q.p,
            "value": float,
            "exact": exact.map(|e| e.to_string()),
        }));
    }

    let scan = match &p.scan {
        Some(s) => {
            let r = lln_limit_scan(s.p, s.delta, &s.ns, s.threshold).map_err(schema("scan"))?;
            checks.push(CheckResult::check("scan.converges", r.final_is_min && r.converged, || {
                format!(
                    "final tail {} is {} the minimum and {} below {}",
                    r.values.last().copied().unwrap_or(f64::NAN),
                    if r.final_is_min { "" } else { "not" },
                    if r.converged { "" } else { "not" },
                    r.threshold
                )
            }));
            Some(r)
        }
        None => None,
    };

    let audit = match &p.audit {
        Some(a) => {
            let r = frequency_audit(&a.outcomes, &a.weights).map_err(schema("audit"))?;
            let least = r.rows.iter().map(|row| row.surprise).fold(f64::INFINITY, f64::min);
            checks.push(CheckResult::check("audit.typical", least >= a.threshold, || {
                format!("a deviation this large has probability {least:e}, below {}", a.threshold)
            }));
            Some(r)
        }
        None => None,
    };

    Ok(Outcome {
        checks,
        metrics: json!({ "tails": tails, "scan": scan, "audit": audit }),
        csv: None,
    })
}
