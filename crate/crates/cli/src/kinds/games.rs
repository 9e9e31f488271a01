use bornlab_core::games::{
    derive_pivotal, pivotal_generators, value_solve, CheckStatus, Game, Generator, PayoffFn, Pivotal, Relabeling,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;
use serde_json::json;

use crate::doc::{matrix, schema, state, MatDoc, ProjectorDoc, UnitaryDoc, VecDoc};
use crate::error::{numeric, CliError};
use crate::report::{CheckResult, Outcome};
use crate::scenario::Scenario;

const VALUE_TOL: f64 = 1e-9;
const SOUND_TOL: f64 = 1e-10;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    #[serde(default)]
    pivotal: Vec<PivotalDoc>,
    #[serde(default)]
    games: Vec<GameDoc>,
    #[serde(default)]
    relabelings: Vec<Relabeling>,
    #[serde(default)]
    unitaries: Vec<UnitaryDoc>,
    /// Sure-thing shifts applied to linear-payoff games.
    #[serde(default)]
    shifts: Vec<f64>,
    #[serde(default)]
    zero_sum: bool,
    /// Adds the swap-argument generators of every input game.
    #[serde(default = "yes")]
    canonical: bool,
    #[serde(default = "four")]
    depth: usize,
    /// Seeded random pivotal games, each solved on its own closure.
    #[serde(default)]
    random_pivotal: usize,
}

fn yes() -> bool {
    true
}

fn four() -> usize {
    4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PivotalDoc {
    x1: f64,
    x2: f64,
    #[serde(default = "PayoffFn::identity")]
    payoff: PayoffFn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDoc {
    psi: VecDoc,
    outcomes: Option<Vec<OutcomeDoc>>,
    observable: Option<MatDoc>,
    #[serde(default = "PayoffFn::identity")]
    payoff: PayoffFn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeDoc {
    label: f64,
    projector: ProjectorDoc,
}

fn build_game(doc: &GameDoc, what: &str) -> Result<Game, CliError> {
    let psi = state(&doc.psi, what)?;
    match (&doc.outcomes, &doc.observable) {
        (Some(outs), None) => {
            let outs = outs
                .iter()
                .map(|o| Ok((o.label, o.projector.build(psi.dim(), what)?)))
                .collect::<Result<_, CliError>>()?;
            Game::new(psi, outs, doc.payoff.clone()).map_err(schema(what))
        }
        (None, Some(obs)) => Game::from_observable(psi, &matrix(obs, what)?, doc.payoff.clone()).map_err(schema(what)),
        _ => Err(CliError::Schema(format!("{what}: give exactly one of outcomes or observable"))),
    }
}

fn pivotal_check(name: String, p: &Pivotal, expected: f64) -> CheckResult {
    if let Err(e) = p.trace.validate(SOUND_TOL) {
        return CheckResult::fail(name, format!("trace does not validate: {e}"));
    }
    let v = p.value.value.unwrap_or(f64::NAN);
    CheckResult::check(name, p.trace.len() == 4 && (v - expected).abs() <= VALUE_TOL, || {
        format!("derived value {v} with {} steps, expected {expected} with 4", p.trace.len())
    })
}

pub fn run(scenario: &Scenario) -> Result<Outcome, CliError> {
    let p: Params = scenario.params()?;
    let mut checks = Vec::new();
    let mut games = Vec::new();
    let mut derivations = Vec::new();
    for (i, d) in p.pivotal.iter().enumerate() {
        let what = format!("pivotal[{i}]");
        let r = derive_pivotal(d.x1, d.x2, d.payoff.clone()).map_err(schema(&what))?;
        let half = |x: f64| d.payoff.eval(x).map_err(schema(&what));
        let expected = 0.5 * (half(d.x1)? + half(d.x2)?);
        checks.push(pivotal_check(what.clone(), &r, expected));
        derivations.push(r);
        games.push(Game::two_outcome(d.x1, d.x2, d.payoff.clone()).map_err(schema(&what))?);
    }
    for (i, d) in p.games.iter().enumerate() {
        games.push(build_game(d, &format!("games[{i}]"))?);
    }

    let solved = if games.is_empty() {
        None
    } else {
        let dim = games[0].dim();
        let mut gens: Vec<Generator> = p.relabelings.iter().cloned().map(Generator::Relabel).collect();
        for (i, u) in p.unitaries.iter().enumerate() {
            gens.push(Generator::Transform(u.build(dim, &format!("unitaries[{i}]"))?));
        }
        gens.extend(p.shifts.iter().map(|&s| Generator::SureThing { s }));
        if p.zero_sum {
            gens.push(Generator::ZeroSum);
        }
        if p.canonical {
            for g in &games {
                gens.extend(pivotal_generators(g).map_err(numeric("building swap generators"))?);
            }
        }
        let r = value_solve(&games, &gens, p.depth).map_err(numeric("solving the value constraints"))?;
        let scale = r.games.iter().fold(1f64, |m, g| m.max(g.value.born.abs()));
        checks.push(CheckResult::check("soundness", r.soundness_residual <= SOUND_TOL * scale, || {
            format!("Born values miss a constraint by {:e}", r.soundness_residual)
        }));
        let fails = r.special.iter().filter(|c| c.status == CheckStatus::Fail).count();
        let open = r.special.iter().filter(|c| c.status == CheckStatus::Undetermined).count();
        checks.push(if fails > 0 {
            CheckResult::fail("special_equivalence", format!("{fails} equal-weight pair(s) have different values"))
        } else if open > 0 {
            CheckResult::inconclusive("special_equivalence", format!("{open} equal-weight pair(s) left undetermined"))
        } else {
            CheckResult::pass("special_equivalence")
        });
        for (i, g) in r.games.iter().take(games.len()).enumerate() {
            let name = format!("value[{i}]");
            checks.push(match g.value.value {
                Some(v) => CheckResult::check(name, (v - g.value.born).abs() <= VALUE_TOL * scale, || {
                    format!("solved value {v} differs from the Born value {}", g.value.born)
                }),
                None => CheckResult::inconclusive(name, "the closure does not determine this value"),
            });
        }
        Some(r)
    };

    let random = if p.random_pivotal > 0 {
        let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
        let mut worst = 0.0f64;
        let mut failures = 0usize;
        for _ in 0..p.random_pivotal {
            let (x1, x2) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let payoff = PayoffFn::linear(rng.random_range(-3.0..3.0));
            let expected = 0.5 * (payoff.eval(x1).unwrap_or(f64::NAN) + payoff.eval(x2).unwrap_or(f64::NAN));
            let g = Game::two_outcome(x1, x2, payoff).map_err(numeric("drawing a random game"))?;
            let gens = pivotal_generators(&g).map_err(numeric("building swap generators"))?;
            let r = value_solve(&[g], &gens, p.depth).map_err(numeric("solving a random closure"))?;
            match r.games[0].value.value {
                Some(v) if r.unique => worst = worst.max((v - expected).abs()),
                _ => failures += 1,
            }
        }
        checks.push(CheckResult::check("random_pivotal", failures == 0 && worst <= VALUE_TOL, || {
            format!("{failures} closure(s) not full rank; largest value error {worst:e}")
        }));
        Some(json!({ "draws": p.random_pivotal, "not_full_rank": failures, "max_error": worst }))
    } else {
        None
    };

    Ok(Outcome {
        checks,
        metrics: json!({ "pivotal": derivations, "solve": solved, "random_pivotal": random }),
        csv: None,
    })
}
