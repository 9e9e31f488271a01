//! Constraint closure over game values and its linear solve.

use serde::{Deserialize, Serialize};

use super::game::{relabel_game, sure_thing_game, transform_game, zero_sum_game, Game, Relabeling};
use crate::emergence::Rule;
use crate::error::{Error, Result};
use crate::hilbert::{intertwiner, SymmetryUnitary};
use crate::linsys::LinearSystem;

/// Closures larger than this are refused.
pub const CLOSURE_CAP: usize = 5000;
/// Games equal within this (state, projectors, utilities) share one unknown.
pub const IDENTIFY_TOL: f64 = 1e-9;
const SOLVE_TOL: f64 = 1e-9;

/// One way of producing a game from another together with the value relation it carries.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Relabel(Relabeling),
    Transform(SymmetryUnitary),
    SureThing { s: f64 },
    ZeroSum,
}

impl Generator {
    pub fn rule(&self) -> Rule {
        match self {
            Generator::Relabel(_) => Rule::PayoffEquivalence,
            Generator::Transform(_) => Rule::MeasurementEquivalence,
            Generator::SureThing { .. } => Rule::SureThing,
            Generator::ZeroSum => Rule::ZeroSum,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Generator::Relabel(f) => format!("relabel {f:?}"),
            Generator::Transform(u) => format!("transform by {:?} unitary", u.kind()),
            Generator::SureThing { s } => format!("sure-thing shift {s}"),
            Generator::ZeroSum => "zero-sum negation".into(),
        }
    }

    /// The relation `V(to) = coefficient * V(from) + offset` this generator imposes on `g`.
    pub fn apply(&self, g: &Game) -> Result<Constraint> {
        let (to, coefficient, offset) = match self {
            Generator::Relabel(f) => (relabel_game(g, f)?, 1.0, 0.0),
            Generator::Transform(u) => (transform_game(g, u)?, 1.0, 0.0),
            Generator::SureThing { s } => (sure_thing_game(g, *s)?, 1.0, g.payoff().eval(*s)?),
            Generator::ZeroSum => (zero_sum_game(g)?, -1.0, 0.0),
        };
        Ok(Constraint {
            rule: self.rule(),
            from: g.clone(),
            to,
            coefficient,
            offset,
        })
    }

    fn applies_to(&self, g: &Game) -> bool {
        match self {
            Generator::Relabel(f) => f.check_on(&g.spectrum()).is_ok(),
            Generator::Transform(u) => u.dim() == g.dim(),
            Generator::SureThing { .. } | Generator::ZeroSum => g.payoff().is_linear(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub rule: Rule,
    pub from: Game,
    pub to: Game,
    pub coefficient: f64,
    pub offset: f64,
}

impl Constraint {
    /// How far the Born values are from satisfying the relation.
    pub fn born_residual(&self) -> Result<f64> {
        Ok((self.to.born_value()? - self.coefficient * self.from.born_value()? - self.offset).abs())
    }
}

/// Value relations between `g` and its images under `generators`. Decision axioms on a
/// nonlinear payoff are a linearity error.
pub fn axiom_constraints(g: &Game, generators: &[Generator]) -> Result<Vec<Constraint>> {
    generators.iter().map(|gen| gen.apply(g)).collect()
}

/// The four generators of the equal-weight swap argument, for every pair of
/// equal-weight outcomes whose remaining labels sit at the pair's midpoint.
pub fn pivotal_generators(g: &Game) -> Result<Vec<Generator>> {
    let out = g.outcomes();
    if out.len() == 1 {
        return Ok(vec![Generator::SureThing { s: -2.0 * out[0].label }, Generator::ZeroSum]);
    }
    let w = g.weights()?;
    let parts: Vec<_> = out.iter().map(|o| o.projector.clone()).collect();
    let mut gens = Vec::new();
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            let (a, b) = (out[i].label, out[j].label);
            let mid = 0.5 * (a + b);
            let fixed = (0..out.len())
                .filter(|&k| k != i && k != j)
                .all(|k| (out[k].label - mid).abs() <= 1e-10 * 1f64.max(mid.abs()));
            if (w[i] - w[j]).abs() > 1e-10 || !fixed {
                continue;
            }
            let mut swapped = parts.clone();
            swapped.swap(i, j);
            let Some(u) = intertwiner(g.state(), &parts, g.state(), &swapped, 1e-10)? else {
                continue;
            };
            gens.extend([
                Generator::Transform(u),
                Generator::Relabel(Relabeling::swap(a, b)),
                Generator::SureThing { s: -a - b },
                Generator::ZeroSum,
            ]);
        }
    }
    Ok(gens)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameValue {
    /// `None` when the constraints leave it free.
    pub value: Option<f64>,
    /// `sum_k p_k P(lambda_k)`.
    pub born: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub parent: usize,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub id: usize,
    pub origin: Option<Origin>,
    pub spectrum: Vec<f64>,
    pub utilities: Vec<f64>,
    pub weights: Vec<f64>,
    pub value: GameValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub rule: Rule,
    pub from: usize,
    pub to: usize,
    pub coefficient: f64,
    pub offset: f64,
    pub born_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceKind {
    /// Same state, equal Born weights per utility.
    Special,
    /// Different states, equal Born weights per utility.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub a: usize,
    pub b: usize,
    pub kind: EquivalenceKind,
    pub status: CheckStatus,
    /// `V(a) - V(b)` when the constraints fix it.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub depth: usize,
    pub games: Vec<GameRecord>,
    pub constraints: Vec<ConstraintRecord>,
    pub unknowns: usize,
    pub rank: usize,
    pub unique: bool,
    /// Largest Born-value residual over all constraints.
    pub soundness_residual: f64,
    pub special: Vec<EquivalenceCheck>,
    pub general: Vec<EquivalenceCheck>,
    /// Every special pair has equal solved values.
    pub special_pass: bool,
}

struct Closure {
    games: Vec<Game>,
    origin: Vec<Option<Origin>>,
    edges: Vec<(Rule, usize, usize, f64, f64)>,
}

impl Closure {
    fn find(&self, g: &Game) -> Option<usize> {
        self.games.iter().position(|h| h.same_game(g, IDENTIFY_TOL))
    }

    /// Returns the index and whether the entry changed (new, or payoff upgraded to linear).
    fn insert(&mut self, g: Game, origin: Option<Origin>) -> Result<(usize, bool)> {
        if let Some(i) = self.find(&g) {
            if g.payoff().is_linear() && !self.games[i].payoff().is_linear() {
                self.games[i] = self.games[i].with_payoff(g.payoff().clone());
                return Ok((i, true));
            }
            return Ok((i, false));
        }
        if self.games.len() >= CLOSURE_CAP {
            return Err(Error::Size(format!("closure exceeds {CLOSURE_CAP} games; lower the depth")));
        }
        self.games.push(g);
        self.origin.push(origin);
        Ok((self.games.len() - 1, true))
    }
}

/// Lottery over utilities: merged equal utilities, zero weights dropped.
fn lottery(g: &Game) -> Result<Vec<(f64, f64)>> {
    let mut pairs: Vec<(f64, f64)> = g.utilities()?.into_iter().zip(g.weights()?).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (u, w) in pairs {
        match out.last_mut() {
            Some(last) if (last.0 - u).abs() <= 1e-10 * 1f64.max(u.abs()) => last.1 += w,
            _ => out.push((u, w)),
        }
    }
    out.retain(|p| p.1 > 1e-12);
    Ok(out)
}

fn same_lottery(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x.0 - y.0).abs() <= 1e-10 * 1f64.max(x.0.abs()) && (x.1 - y.1).abs() <= 1e-10)
}

/// Generates the closure of `games` under `generators` to `depth` applications, solves
/// the value relations it carries, and checks equal-weight games for equal values.
/// Decision axioms are applied only where the payoff is linear.
pub fn value_solve(games: &[Game], generators: &[Generator], depth: usize) -> Result<ValueReport> {
    let mut cl = Closure {
        games: Vec::new(),
        origin: Vec::new(),
        edges: Vec::new(),
    };
    let mut frontier = Vec::new();
    for g in games {
        let (i, fresh) = cl.insert(g.clone(), None)?;
        if fresh {
            frontier.push(i);
        }
    }
    for _ in 0..depth {
        let mut next = Vec::new();
        for &i in &frontier {
            for gen in generators {
                let g = cl.games[i].clone();
                if !gen.applies_to(&g) {
                    continue;
                }
                let c = gen.apply(&g)?;
                let origin = Origin {
                    parent: i,
                    generator: gen.describe(),
                };
                let (j, changed) = cl.insert(c.to, Some(origin))?;
                cl.edges.push((c.rule, i, j, c.coefficient, c.offset));
                if changed && !next.contains(&j) {
                    next.push(j);
                }
            }
        }
        frontier = next;
    }

    let n = cl.games.len();
    let mut sys = LinearSystem::<f64>::new(n);
    let born: Vec<f64> = cl.games.iter().map(Game::born_value).collect::<Result<_>>()?;
    let mut constraints = Vec::with_capacity(cl.edges.len());
    for &(rule, from, to, coefficient, offset) in &cl.edges {
        sys.push(&[(to, 1.0), (from, -coefficient)], offset);
        constraints.push(ConstraintRecord {
            rule,
            from,
            to,
            coefficient,
            offset,
            born_residual: (born[to] - coefficient * born[from] - offset).abs(),
        });
    }
    let rref = sys
        .reduce(SOLVE_TOL)
        .map_err(|constraints| Error::Inconsistent { constraints })?;
    let unit = |i: usize| -> Vec<f64> { (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };

    let mut records = Vec::with_capacity(n);
    for (i, g) in cl.games.iter().enumerate() {
        records.push(GameRecord {
            id: i,
            origin: cl.origin[i].clone(),
            spectrum: g.spectrum(),
            utilities: g.utilities()?,
            weights: g.weights()?,
            value: GameValue {
                value: rref.determined(&unit(i)),
                born: born[i],
            },
        });
    }

    let lotteries: Vec<Vec<(f64, f64)>> = cl.games.iter().map(lottery).collect::<Result<_>>()?;
    let (mut special, mut general) = (Vec::new(), Vec::new());
    for a in 0..n {
        for b in a + 1..n {
            if !same_lottery(&lotteries[a], &lotteries[b]) {
                continue;
            }
            let mut f = unit(a);
            f[b] = -1.0;
            let difference = rref.determined(&f);
            let scale = 1f64.max(born[a].abs()).max(born[b].abs());
            let status = match difference {
                Some(d) if d.abs() <= 1e-9 * scale => CheckStatus::Pass,
                Some(_) => CheckStatus::Fail,
                None => CheckStatus::Undetermined,
            };
            let same_state = cl.games[a]
                .state()
                .distance(cl.games[b].state())
                .is_ok_and(|d| d <= IDENTIFY_TOL);
            let kind = if same_state { EquivalenceKind::Special } else { EquivalenceKind::General };
            let check = EquivalenceCheck {
                a,
                b,
                kind,
                status,
                difference,
            };
            if same_state {
                special.push(check);
            } else {
                general.push(check);
            }
        }
    }

    Ok(ValueReport {
        depth,
        unknowns: n,
        rank: rref.rank(),
        unique: rref.rank() == n,
        soundness_residual: constraints.iter().map(|c| c.born_residual).fold(0.0, f64::max),
        special_pass: special.iter().all(|c| c.status == CheckStatus::Pass),
        games: records,
        constraints,
        special,
        general,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::PayoffFn;
    use crate::hilbert::random_unitary;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pivotal_closure_is_full_rank() {
        let g = Game::two_outcome(0.0, 10.0, PayoffFn::identity()).unwrap();
        let gens = pivotal_generators(&g).unwrap();
        assert_eq!(gens.len(), 4);
        let r = value_solve(&[g], &gens, 4).unwrap();
        assert!(r.unique, "rank {} of {}", r.rank, r.unknowns);
        assert!((r.games[0].value.value.unwrap() - 5.0).abs() < 1e-9);
        assert!(r.soundness_residual < 1e-10);
        assert!(r.special_pass && !r.special.is_empty());
    }

    #[test]
    fn depth_zero_leaves_value_free() {
        let g = Game::two_outcome(0.0, 10.0, PayoffFn::identity()).unwrap();
        let gens = pivotal_generators(&g).unwrap();
        let r = value_solve(&[g], &gens, 0).unwrap();
        assert_eq!((r.unknowns, r.rank), (1, 0));
        assert_eq!(r.games[0].value.value, None);
    }

    #[test]
    fn constraint_tautologies() {
        let g = Game::two_outcome(1.0, 3.0, PayoffFn::linear(2.0)).unwrap();
        let c = axiom_constraints(&g, &[Generator::SureThing { s: 0.0 }]).unwrap();
        assert!(c[0].to.same_game(&g, 1e-15) && c[0].offset == 0.0);
        let r = value_solve(&[g], &[Generator::ZeroSum], 2).unwrap();
        // negating twice returns to the original game
        assert_eq!(r.unknowns, 2);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn nonlinear_payoff_rejected_by_sure_thing() {
        let g = Game::two_outcome(1.0, 3.0, PayoffFn::table(vec![(1.0, 0.0), (3.0, 5.0)]).unwrap()).unwrap();
        assert!(matches!(
            axiom_constraints(&g, &[Generator::SureThing { s: 1.0 }]),
            Err(Error::Linearity(_))
        ));
    }

    #[test]
    fn random_equal_weight_games_pass_special_equivalence() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (x1, x2) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let base = Game::two_outcome(x1, x2, PayoffFn::linear(rng.random_range(0.1..3.0))).unwrap();
            let g = transform_game(&base, &random_unitary(2, &mut rng)).unwrap();
            let r = value_solve(std::slice::from_ref(&g), &pivotal_generators(&g).unwrap(), 4).unwrap();
            assert!(r.unique && r.special_pass);
            assert!((r.games[0].value.value.unwrap() - g.born_value().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn unequal_weights_stay_undetermined_but_sound() {
        let psi = crate::hilbert::StateVector::from_real(&[0.6, 0.8]).unwrap();
        let g = Game::new(
            psi,
            vec![
                (0.0, crate::hilbert::Projector::from_cells(2, [0]).unwrap()),
                (1.0, crate::hilbert::Projector::from_cells(2, [1]).unwrap()),
            ],
            PayoffFn::identity(),
        )
        .unwrap();
        assert!(pivotal_generators(&g).unwrap().is_empty());
        let gens = [
            Generator::ZeroSum,
            Generator::SureThing { s: 2.0 },
            Generator::Relabel(Relabeling::Shift { s: 1.0 }),
            Generator::Relabel(Relabeling::Negate),
        ];
        let r = value_solve(&[g], &gens, 3).unwrap();
        assert!(!r.unique);
        assert!(r.soundness_residual < 1e-10);
        assert_eq!(r.games[0].value.value, None);
    }
}
