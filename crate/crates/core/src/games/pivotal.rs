//! Replay of the equal-weight swap argument fixing the value of a two-outcome game.

use serde::{Deserialize, Serialize};

use super::game::{relabel_game, sure_thing_game, transform_game, zero_sum_game, Game, Relabeling};
use super::solve::{GameValue, IDENTIFY_TOL};
use crate::emergence::{Axiom, Check, DerivationTrace, Premise, Rule};
use crate::error::{Error, Result};
use crate::hilbert::{c, intertwiner, max_abs_diff, CMatrix, SymmetryUnitary, UnitaryKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pivotal {
    pub value: GameValue,
    pub trace: DerivationTrace,
}

/// `V(<phi_1 + phi_2, x1 P_1 + x2 P_2, payoff>) = (payoff(x1) + payoff(x2)) / 2`.
pub fn derive_pivotal(x1: f64, x2: f64, payoff: super::PayoffFn) -> Result<Pivotal> {
    let g = Game::two_outcome(x1, x2, payoff)?;
    if g.outcomes().len() == 1 {
        let swap = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let u = SymmetryUnitary::new(swap, UnitaryKind::Permutation)?;
        return chain(&g, &u, &Relabeling::swap(x1, x1), -2.0 * x1);
    }
    derive_pivotal_game(&g, 0, 1)
}

/// The same argument for outcomes `i`, `j` of an arbitrary game. Requires equal Born
/// weights on the pair, equal ranks, and every other label at the pair's midpoint
/// (the reflection swapping the pair must fix them).
pub fn derive_pivotal_game(g: &Game, i: usize, j: usize) -> Result<Pivotal> {
    let out = g.outcomes();
    for k in [i, j] {
        if k >= out.len() {
            return Err(Error::Index { index: k, len: out.len() });
        }
    }
    if i == j {
        return Err(Error::Precondition("the pair must be two distinct outcomes".into()));
    }
    if !g.payoff().is_linear() {
        return Err(Error::Linearity("the swap argument needs a linear payoff".into()));
    }
    let w = g.weights()?;
    if (w[i] - w[j]).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "unequal amplitudes on the pair (weights {} and {}); the swap argument does not apply",
            w[i], w[j]
        )));
    }
    let (a, b) = (out[i].label, out[j].label);
    let mid = 0.5 * (a + b);
    if let Some(k) = (0..out.len()).find(|&k| k != i && k != j && (out[k].label - mid).abs() > 1e-10 * 1f64.max(mid.abs()))
    {
        return Err(Error::Precondition(format!(
            "label {} is not fixed by the reflection swapping {a} and {b}",
            out[k].label
        )));
    }
    let parts: Vec<_> = out.iter().map(|o| o.projector.clone()).collect();
    let mut swapped = parts.clone();
    swapped.swap(i, j);
    let u = intertwiner(g.state(), &parts, g.state(), &swapped, 1e-10)?
        .ok_or_else(|| Error::Precondition("the pair's projectors have different ranks".into()))?;
    chain(g, &u, &Relabeling::swap(a, b), -a - b)
}

fn chain(g0: &Game, u: &SymmetryUnitary, pi: &Relabeling, s: f64) -> Result<Pivotal> {
    let g1 = transform_game(g0, u)?;
    let moved = g1.state().distance(g0.state())?;
    if moved > IDENTIFY_TOL {
        return Err(Error::Precondition(format!("the swap moves the state by {moved:e}")));
    }
    let g2 = relabel_game(&g1, pi)?;
    let observable_gap = max_abs_diff(&g2.observable(), &g0.observable());
    if observable_gap > IDENTIFY_TOL * 1f64.max(s.abs()) {
        return Err(Error::Precondition("relabeling does not restore the observable".into()));
    }
    let g3 = zero_sum_game(g0)?;
    let shifted = sure_thing_game(&g3, s)?;
    if !shifted.same_game(&g2, IDENTIFY_TOL) {
        return Err(Error::Precondition("the shifted negation does not reproduce the swapped payoff".into()));
    }
    let q_s = g3.payoff().eval(s)?;
    let [b0, b1, b2, b3] = [g0, &g1, &g2, &g3].map(|g| g.born_value());
    let (b0, b1, b2, b3) = (b0?, b1?, b2?, b3?);
    let value = 0.5 * q_s;

    let mut trace = DerivationTrace::new();
    let s0 = trace.push(
        Rule::MeasurementEquivalence,
        vec![Premise::Axiom(Axiom::MeasurementEquivalence)],
        "the swap unitary fixes phi, so V(<phi, X, P>) = V(<phi, U X U^-1, P>)",
        Check::Numeric {
            residual: (b0 - b1).abs().max(moved),
        },
    );
    let s1 = trace.push(
        Rule::PayoffEquivalence,
        vec![Premise::Axiom(Axiom::PayoffEquivalence), Premise::Step(s0)],
        "U X U^-1 = pi(X), and relabeling by pi gives V(<phi, U X U^-1, P>) = V(<phi, X, P o pi^-1>)",
        Check::Numeric {
            residual: (b1 - b2).abs().max(observable_gap),
        },
    );
    let s2 = trace.push(
        Rule::SureThing,
        vec![Premise::Axiom(Axiom::SureThing), Premise::Axiom(Axiom::Linearity), Premise::Step(s1)],
        format!("pi^-1 = -I o f_s with s = {s}, so V(<phi, X, P o pi^-1>) = V(<phi, X, P o -I>) + {q_s}"),
        Check::Numeric {
            residual: (b2 - b3 - q_s).abs(),
        },
    );
    trace.push(
        Rule::ZeroSum,
        vec![Premise::Axiom(Axiom::ZeroSum), Premise::Axiom(Axiom::Linearity), Premise::Step(s2)],
        format!("V(<phi, X, P o -I>) = -V(<phi, X, P>), hence 2 V = {q_s} and V = {value}"),
        Check::Numeric {
            residual: (b3 + b0).abs(),
        },
    );
    Ok(Pivotal {
        value: GameValue {
            value: Some(value),
            born: b0,
        },
        trace,
    })
}
