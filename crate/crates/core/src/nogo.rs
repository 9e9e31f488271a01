//! Frame-function constraints: additivity propagation on a two-dimensional
//! subspace, the closeness bound for rays carrying values 1 and 0, and a
//! backtracking search for {0,1}-valued assignments on finite ray sets.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{orthonormalize, CVector, Projector, StateVector, C64};

/// Rays closer than this (in `1 - |<a,b>|`) are identified.
const PARALLEL_TOL: f64 = 1e-12;
/// Rays with `|<a,b>|` below this are orthogonal.
pub const ORTHOGONAL_TOL: f64 = 1e-10;
/// The closeness bound: normalized rays within this distance cannot carry 1 and 0.
pub const SEPARATION_BOUND: f64 = 0.5;
/// Largest angle handled by a single close-pair gadget.
const GADGET_MAX_ANGLE: f64 = 15.0 * PI / 180.0;

/// Normalized, pairwise non-parallel rays in a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySet {
    dim: usize,
    rays: Vec<StateVector>,
}

impl RaySet {
    pub fn empty(dim: usize) -> Self {
        Self { dim, rays: Vec::new() }
    }

    /// Builds a set from arbitrary nonzero vectors; parallel vectors are kept as
    /// separate entries.
    pub fn new(rays: Vec<StateVector>) -> Result<Self> {
        let dim = rays
            .first()
            .map(|r| r.dim())
            .ok_or_else(|| Error::InvalidState("empty ray set".into()))?;
        let mut out = Self::empty(dim);
        for r in rays {
            if r.dim() != dim {
                return Err(Error::Dimension { expected: dim, found: r.dim() });
            }
            out.rays.push(r.normalized()?);
        }
        Ok(out)
    }

    /// Inserts a ray unless a parallel one is present; returns its index either way.
    pub fn insert(&mut self, v: &StateVector) -> Result<usize> {
        if v.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: v.dim() });
        }
        let n = v.normalized()?;
        for (i, r) in self.rays.iter().enumerate() {
            if 1.0 - r.inner(&n)?.norm() < PARALLEL_TOL {
                return Ok(i);
            }
        }
        self.rays.push(n);
        Ok(self.rays.len() - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn rays(&self) -> &[StateVector] {
        &self.rays
    }

    pub fn orthogonal(&self, i: usize, j: usize) -> bool {
        self.rays[i].amplitudes().dotc(self.rays[j].amplitudes()).norm() < ORTHOGONAL_TOL
    }

    /// Complete orthogonal contexts: sets of `dim` mutually orthogonal rays.
    pub fn contexts(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut out = Vec::new();
        let mut current = Vec::new();
        extend_cliques(&adj, self.dim, 0, &mut current, &mut out);
        out
    }

    fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if self.orthogonal(i, j) {
                    adj[i][j] = true;
                    adj[j][i] = true;
                }
            }
        }
        adj
    }
}

fn extend_cliques(
    adj: &[Vec<bool>],
    size: usize,
    start: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == size {
        out.push(current.clone());
        return;
    }
    for v in start..adj.len() {
        if current.iter().all(|&u| adj[u][v]) {
            current.push(v);
            extend_cliques(adj, size, v + 1, current, out);
            current.pop();
        }
    }
}

/// A partial map from ray index to a value in `[0,1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameAssignment {
    pub values: BTreeMap<usize, f64>,
}

impl FrameAssignment {
    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(&i).copied()
    }
}

/// Rank-one projectors `P1, P2` onto orthogonal rays and `P+, P-` onto an orthogonal
/// pair spanning the same plane.
#[derive(Debug, Clone)]
pub struct PmGeometry {
    pub p1: Projector,
    pub p2: Projector,
    pub plus: Projector,
    pub minus: Projector,
}

impl PmGeometry {
    /// `P+` and `P-` onto `chi1 + chi2` and `chi1 - chi2` (after normalizing each).
    pub fn from_pair(chi1: &StateVector, chi2: &StateVector) -> Result<Self> {
        let a = chi1.normalized()?;
        let b = chi2.normalized()?;
        let plus = StateVector::from_vector(a.amplitudes() + b.amplitudes())?;
        let minus = StateVector::from_vector(a.amplitudes() - b.amplitudes())?;
        Self::new(&a, &b, &plus, &minus)
    }

    pub fn new(chi1: &StateVector, chi2: &StateVector, plus: &StateVector, minus: &StateVector) -> Result<Self> {
        let rs = RaySet::new(vec![chi1.clone(), chi2.clone(), plus.clone(), minus.clone()])?;
        if !rs.orthogonal(0, 1) {
            return Err(Error::Geometry("P1 and P2 are not orthogonal".into()));
        }
        if !rs.orthogonal(2, 3) {
            return Err(Error::Geometry("P+ and P- are not orthogonal".into()));
        }
        let plane = Projector::onto_span(&rs.rays()[..2])?;
        for (name, k) in [("P+", 2), ("P-", 3)] {
            let r = &rs.rays()[k];
            if plane.apply(r)?.distance(r)? > 1e-10 {
                return Err(Error::Geometry(format!("{name} is not in the span of P1 and P2")));
            }
        }
        let p = |k: usize| Projector::onto(&rs.rays()[k]);
        Ok(Self { p1: p(0)?, p2: p(1)?, plus: p(2)?, minus: p(3)? })
    }
}

/// Values for `(P1, P2, P+, P-)`, any of which may be unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PmValues {
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub plus: Option<f64>,
    pub minus: Option<f64>,
}

impl PmValues {
    fn as_array(&self) -> [Option<f64>; 4] {
        [self.p1, self.p2, self.plus, self.minus]
    }

    fn from_array(a: [Option<f64>; 4]) -> Self {
        Self { p1: a[0], p2: a[1], plus: a[2], minus: a[3] }
    }

    pub fn defined(&self) -> usize {
        self.as_array().iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PmOutcome {
    Extended {
        values: PmValues,
        /// `f(P+) + f(P-)` when pinned by additivity.
        pair_sum: Option<f64>,
        /// Feasible interval for each of the four values.
        bounds: [(f64, f64); 4],
    },
    Contradiction {
        reason: String,
    },
}

/// Propagates `f(P1) + f(P2) = f(P+) + f(P-)` together with `0 <= f <= 1`.
pub fn propagate_pm_constraint(geometry: &PmGeometry, f: &PmValues) -> Result<PmOutcome> {
    let _ = geometry;
    const EPS: f64 = 1e-12;
    let given = f.as_array();
    let mut lo = [0.0f64; 4];
    let mut hi = [1.0f64; 4];
    for (k, v) in given.iter().enumerate() {
        if let Some(x) = v {
            if !(-EPS..=1.0 + EPS).contains(x) {
                return Ok(PmOutcome::Contradiction {
                    reason: format!("value {x} outside [0,1]"),
                });
            }
            lo[k] = x.clamp(0.0, 1.0);
            hi[k] = lo[k];
        }
    }
    // sides: {0,1} and {2,3}; iterate interval propagation to a fixed point
    for _ in 0..16 {
        let s_lo = (lo[0] + lo[1]).max(lo[2] + lo[3]);
        let s_hi = (hi[0] + hi[1]).min(hi[2] + hi[3]);
        if s_lo > s_hi + EPS {
            return Ok(PmOutcome::Contradiction {
                reason: format!(
                    "f(P1)+f(P2) lies in [{}, {}] but f(P+)+f(P-) lies in [{}, {}]",
                    lo[0] + lo[1],
                    hi[0] + hi[1],
                    lo[2] + lo[3],
                    hi[2] + hi[3]
                ),
            });
        }
        let mut changed = false;
        for (k, other) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
            let new_lo = lo[k].max(s_lo - hi[other]);
            let new_hi = hi[k].min(s_hi - lo[other]);
            if new_lo > new_hi + EPS {
                return Ok(PmOutcome::Contradiction {
                    reason: format!("no feasible value for projector {k}"),
                });
            }
            if new_lo > lo[k] + EPS || new_hi < hi[k] - EPS {
                changed = true;
            }
            lo[k] = new_lo;
            hi[k] = new_hi.max(new_lo);
        }
        if !changed {
            break;
        }
    }
    let mut out = given;
    for k in 0..4 {
        if out[k].is_none() && hi[k] - lo[k] <= EPS {
            out[k] = Some(clean(lo[k]));
        }
    }
    let s_lo = (lo[0] + lo[1]).max(lo[2] + lo[3]);
    let s_hi = (hi[0] + hi[1]).min(hi[2] + hi[3]);
    let pair_sum = (s_hi - s_lo <= EPS).then(|| clean(s_lo));
    Ok(PmOutcome::Extended {
        values: PmValues::from_array(out),
        pair_sum,
        bounds: [0, 1, 2, 3].map(|k| (clean(lo[k]), clean(hi[k]))),
    })
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separation {
    Allowed,
    Forbidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub verdict: Separation,
    /// `min_alpha |e^{i alpha} chi - phi|` over normalized vectors.
    pub distance: f64,
}

/// Whether normalized rays are close enough that they cannot carry the values 1 and 0.
pub fn separation_check(chi: &StateVector, phi: &StateVector) -> Result<SeparationReport> {
    let a = chi.normalized()?;
    let b = phi.normalized()?;
    let overlap = a.inner(&b)?.norm().min(1.0);
    let distance = (2.0 - 2.0 * overlap).max(0.0).sqrt();
    Ok(SeparationReport {
        verdict: if distance <= SEPARATION_BOUND {
            Separation::Forbidden
        } else {
            Separation::Allowed
        },
        distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    Pinned,
    /// Branch choice: this ray is the one in the context.
    Decision { context: usize },
    /// Free ray with no complete context, branched on directly.
    FreeChoice,
    /// Orthogonal to a ray carrying 1.
    Orthogonal { to: usize },
    /// Last unassigned ray in a context whose other members are 0.
    LastInContext { context: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailStep {
    pub ray: usize,
    pub value: bool,
    pub reason: Reason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// Exactly one ray of the context carries 1.
    Context { context: usize },
    /// At most one of two orthogonal rays carries 1.
    Pair { a: usize, b: usize },
    /// Pinned value clashes with another pin.
    Pin { ray: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictChain {
    pub violated: Constraint,
    /// Assignments from the root of the search to the conflict, in order.
    pub trail: Vec<TrailStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Stop after this many satisfying assignments.
    pub count_limit: u64,
    pub node_limit: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { count_limit: 1, node_limit: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Satisfiable { assignment: Vec<bool> },
    Unsatisfiable { certificate: ConflictChain },
    Inconclusive { nodes: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub rays: usize,
    pub contexts: Vec<Vec<usize>>,
    pub orthogonal_pairs: usize,
    pub outcome: SearchOutcome,
    /// Satisfying assignments found (exact when `exhaustive`).
    pub solutions: u64,
    pub exhaustive: bool,
    pub nodes: u64,
}

impl SearchReport {
    pub fn is_unsat(&self) -> bool {
        matches!(self.outcome, SearchOutcome::Unsatisfiable { .. })
    }
}

struct Searcher<'a> {
    neighbors: Vec<Vec<usize>>,
    contexts: &'a [Vec<usize>],
    ray_contexts: Vec<Vec<usize>>,
    values: Vec<Option<bool>>,
    trail: Vec<TrailStep>,
    clash: Option<TrailStep>,
    options: SearchOptions,
    nodes: u64,
    solutions: u64,
    first: Option<Vec<bool>>,
    deepest: Option<ConflictChain>,
    aborted: bool,
}

impl Searcher<'_> {
    fn assign(&mut self, ray: usize, value: bool, reason: Reason) -> std::result::Result<(), Constraint> {
        match self.values[ray] {
            Some(v) if v == value => return Ok(()),
            Some(_) => {
                self.clash = Some(TrailStep { ray, value, reason });
                return Err(match reason {
                    Reason::Orthogonal { to } => Constraint::Pair { a: to, b: ray },
                    Reason::LastInContext { context } | Reason::Decision { context } => {
                        Constraint::Context { context }
                    }
                    _ => Constraint::Pin { ray },
                });
            }
            None => {}
        }
        self.values[ray] = Some(value);
        self.trail.push(TrailStep { ray, value, reason });
        Ok(())
    }

    /// Unit propagation from trail position `from`.
    fn propagate(&mut self, mut from: usize) -> std::result::Result<(), Constraint> {
        while from < self.trail.len() {
            let TrailStep { ray, value, .. } = self.trail[from];
            from += 1;
            if value {
                for k in 0..self.neighbors[ray].len() {
                    let n = self.neighbors[ray][k];
                    self.assign(n, false, Reason::Orthogonal { to: ray })?;
                }
            }
            for k in 0..self.ray_contexts[ray].len() {
                let c = self.ray_contexts[ray][k];
                let mut open = None;
                let mut open_count = 0;
                let mut ones = 0;
                for &r in &self.contexts[c] {
                    match self.values[r] {
                        None => {
                            open_count += 1;
                            open = Some(r);
                        }
                        Some(true) => ones += 1,
                        Some(false) => {}
                    }
                }
                if ones > 1 {
                    return Err(Constraint::Context { context: c });
                }
                if ones == 0 {
                    match open_count {
                        0 => return Err(Constraint::Context { context: c }),
                        1 => self.assign(open.unwrap(), true, Reason::LastInContext { context: c })?,
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    fn record_conflict(&mut self, violated: Constraint) {
        let deeper = self
            .deepest
            .as_ref()
            .is_none_or(|d| self.trail.len() > d.trail.len());
        let clash = self.clash.take();
        if deeper {
            let mut trail = self.trail.clone();
            trail.extend(clash);
            self.deepest = Some(ConflictChain { violated, trail });
        }
    }

    fn undo(&mut self, to: usize) {
        for step in self.trail.drain(to..) {
            self.values[step.ray] = None;
        }
    }

    fn done(&self) -> bool {
        self.aborted || self.solutions >= self.options.count_limit
    }

    fn branch(&mut self, ray: usize, value: bool, reason: Reason) {
        let mark = self.trail.len();
        let result = self.assign(ray, value, reason).and_then(|_| self.propagate(mark));
        match result {
            Ok(()) => self.search(),
            Err(c) => self.record_conflict(c),
        }
        self.undo(mark);
    }

    fn search(&mut self) {
        if self.done() {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.options.node_limit {
            self.aborted = true;
            return;
        }
        // the open context with the fewest open rays
        let mut best: Option<(usize, Vec<usize>)> = None;
        for (c, ctx) in self.contexts.iter().enumerate() {
            if ctx.iter().any(|&r| self.values[r] == Some(true)) {
                continue;
            }
            let open: Vec<usize> = ctx.iter().copied().filter(|&r| self.values[r].is_none()).collect();
            if open.len() >= 2 && best.as_ref().is_none_or(|(_, b)| open.len() < b.len()) {
                best = Some((c, open));
            }
        }
        if let Some((c, open)) = best {
            for r in open {
                self.branch(r, true, Reason::Decision { context: c });
                if self.done() {
                    return;
                }
            }
            return;
        }
        if let Some(free) = self.values.iter().position(|v| v.is_none()) {
            for value in [false, true] {
                self.branch(free, value, Reason::FreeChoice);
                if self.done() {
                    return;
                }
            }
            return;
        }
        self.solutions += 1;
        if self.first.is_none() {
            self.first = Some(self.values.iter().map(|v| v.unwrap()).collect());
        }
    }
}

/// Exhaustive search for {0,1} assignments with exactly one 1 per complete context and
/// at most one 1 per orthogonal pair, subject to `pinned` values.
pub fn dispersion_free_search(rays: &RaySet, pinned: &[(usize, bool)], options: SearchOptions) -> Result<SearchReport> {
    if rays.dim() < 2 {
        return Err(Error::Dimension { expected: 2, found: rays.dim() });
    }
    let n = rays.len();
    for &(r, _) in pinned {
        if r >= n {
            return Err(Error::Index { index: r, len: n });
        }
    }
    let adj = rays.adjacency();
    let neighbors: Vec<Vec<usize>> = adj
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &o)| o).map(|(j, _)| j).collect())
        .collect();
    let orthogonal_pairs = neighbors.iter().map(|v| v.len()).sum::<usize>() / 2;
    let contexts = rays.contexts();
    let mut ray_contexts = vec![Vec::new(); n];
    for (c, ctx) in contexts.iter().enumerate() {
        for &r in ctx {
            ray_contexts[r].push(c);
        }
    }
    let mut s = Searcher {
        neighbors,
        contexts: &contexts,
        ray_contexts,
        values: vec![None; n],
        trail: Vec::new(),
        clash: None,
        options,
        nodes: 0,
        solutions: 0,
        first: None,
        deepest: None,
        aborted: false,
    };
    let root = pinned
        .iter()
        .try_for_each(|&(r, v)| s.assign(r, v, Reason::Pinned))
        .and_then(|_| s.propagate(0));
    // contexts with every ray unassigned and no pins still need the empty-context check
    let root = root.and_then(|_| {
        (0..contexts.len()).try_for_each(|c| {
            if contexts[c].is_empty() {
                Err(Constraint::Context { context: c })
            } else {
                Ok(())
            }
        })
    });
    match root {
        Ok(()) => s.search(),
        Err(c) => s.record_conflict(c),
    }
    let exhaustive = !s.aborted && s.solutions < options.count_limit;
    let outcome = if let Some(a) = s.first.clone() {
        SearchOutcome::Satisfiable { assignment: a }
    } else if s.aborted {
        SearchOutcome::Inconclusive { nodes: s.nodes }
    } else {
        SearchOutcome::Unsatisfiable {
            certificate: s.deepest.clone().expect("an exhausted search records a conflict"),
        }
    };
    Ok(SearchReport {
        rays: n,
        contexts: contexts.clone(),
        orthogonal_pairs,
        outcome,
        solutions: s.solutions,
        exhaustive,
        nodes: s.nodes,
    })
}

type R3 = [f64; 3];

fn dot3(a: R3, b: R3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: R3, b: R3) -> R3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit3(a: R3) -> R3 {
    let n = dot3(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Rays in real 3-space, in a frame with `a = z`, `b` in the xz-plane at angle `theta`
/// from `a`, such that no {0,1} assignment has `f(a) = 1` and `f(b) = 0`.
///
/// The first two rays are `a` and `b`.
pub fn close_pair_gadget(theta: f64) -> Result<Vec<R3>> {
    if !(theta > 0.0 && theta <= GADGET_MAX_ANGLE + 1e-12) {
        return Err(Error::Geometry(format!("gadget angle {theta} outside (0, {GADGET_MAX_ANGLE}]")));
    }
    let (s, c) = theta.sin_cos();
    let a = [0.0, 0.0, 1.0];
    let b = [s, 0.0, c];
    let e = [0.0, 1.0, 0.0];
    let p = |f: f64| [f.sin() * s, f.cos(), f.sin() * c];
    let q = |f: f64| unit3([f.cos(), -f.sin() * s, 0.0]);
    let v_of = |f1: f64| {
        let u = p(f1);
        let au = dot3(a, u);
        unit3([a[0] - au * u[0], a[1] - au * u[1], a[2] - au * u[2]])
    };
    let g = |v: R3, f2: f64| dot3(v, cross3(p(f2), q(f2)));
    const SCAN: usize = 720;
    let root = |v: R3| -> Option<f64> {
        let fs: Vec<f64> = (0..=SCAN).map(|i| PI * i as f64 / SCAN as f64).collect();
        let mut prev = g(v, fs[0]);
        for w in fs.windows(2) {
            let next = g(v, w[1]);
            if prev * next < 0.0 {
                let (mut lo, mut hi) = (w[0], w[1]);
                let glo = prev;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if g(v, mid) * glo > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev = next;
        }
        None
    };
    let feasible: Vec<(f64, f64)> = (1..SCAN)
        .map(|i| PI * i as f64 / SCAN as f64)
        .filter_map(|f1| root(v_of(f1)).map(|f2| (f1, f2)))
        .collect();
    let &(f1, f2) = feasible
        .get(feasible.len() / 2)
        .ok_or_else(|| Error::Geometry(format!("no gadget for angle {theta}")))?;
    let u = p(f1);
    let u_perp = p(f1 + PI / 2.0);
    let pp = p(f2);
    let pp_perp = p(f2 + PI / 2.0);
    let qq = q(f2);
    let n_pq = unit3(cross3(pp, qq));
    let v = v_of(f1);
    let v_perp = unit3(cross3(n_pq, v));
    let n_be = unit3(cross3(b, e));
    let n_uv = unit3(cross3(u, v));
    let a_perp = unit3(cross3(n_uv, a));
    let rays = vec![a, b, e, n_be, u, u_perp, pp, pp_perp, qq, n_pq, v, v_perp, n_uv, a_perp];
    if dot3(v, n_pq).abs() > 1e-13 {
        return Err(Error::Geometry("gadget root not resolved".into()));
    }
    Ok(rays)
}

type Sweep = ([CVector; 3], f64, Vec<StateVector>);

/// Orthonormal frame `(x0, x1, x2)` with `chi = x0`, `phi` in `span(x0, x1)` after phase
/// alignment, plus an orthonormal basis of the complement. Returns `(frame, angle, rest)`.
fn sweep_frame(chi: &StateVector, phi: &StateVector) -> Result<Option<Sweep>> {
    if chi.dim() < 3 {
        return Err(Error::Dimension { expected: 3, found: chi.dim() });
    }
    let x0 = chi.normalized()?;
    let b = phi.normalized()?;
    let ov = x0.inner(&b)?;
    if 1.0 - ov.norm() < PARALLEL_TOL {
        return Ok(None);
    }
    let aligned = b.scaled(C64::from_polar(1.0, -ov.arg()));
    let cos = ov.norm().min(1.0);
    let x1 = StateVector::from_vector(aligned.amplitudes() - x0.amplitudes() * C64::new(cos, 0.0))?.normalized()?;
    let d = chi.dim();
    let mut seed = vec![x0.clone(), x1.clone()];
    for k in 0..d {
        seed.push(StateVector::basis(d, k)?);
    }
    let basis = orthonormalize(&seed, 1e-8)?;
    let rest = basis[3..].to_vec();
    Ok(Some((
        [x0.amplitudes().clone(), x1.amplitudes().clone(), basis[2].amplitudes().clone()],
        cos.acos(),
        rest,
    )))
}

fn embed(frame: &[CVector; 3], r: R3) -> Result<StateVector> {
    StateVector::from_vector(
        &frame[0] * C64::new(r[0], 0.0) + &frame[1] * C64::new(r[1], 0.0) + &frame[2] * C64::new(r[2], 0.0),
    )
}

/// Ray family along the great circle from `chi` to `phi` (phase aligned), with a
/// close-pair gadget between every consecutive pair. Returns the rays and the indices
/// of `chi` and `phi` in the set.
pub fn rotation_sweep_family(chi: &StateVector, phi: &StateVector, steps: usize) -> Result<(RaySet, usize, usize)> {
    if steps == 0 {
        return Err(Error::Domain("steps must be positive".into()));
    }
    let (frame, angle, rest) = sweep_frame(chi, phi)?
        .ok_or_else(|| Error::Geometry("chi and phi are the same ray".into()))?;
    let per_step = angle / steps as f64;
    let sub = (per_step / GADGET_MAX_ANGLE).ceil().max(1.0) as usize;
    let total = steps * sub;
    let theta = angle / total as f64;
    let gadget = close_pair_gadget(theta)?;
    let mut set = RaySet::empty(chi.dim());
    for r in &rest {
        set.insert(r)?;
    }
    let mut first = None;
    let mut last = 0;
    for j in 0..total {
        let t0 = theta * j as f64;
        // local gadget frame: z = a(t0), x = tangent toward b, y = x2
        let (s0, c0) = t0.sin_cos();
        let z = [c0, s0, 0.0];
        let x = [-s0, c0, 0.0];
        let y = [0.0, 0.0, 1.0];
        for (k, g) in gadget.iter().enumerate() {
            let w = [
                g[0] * x[0] + g[1] * y[0] + g[2] * z[0],
                g[0] * x[1] + g[1] * y[1] + g[2] * z[1],
                g[0] * x[2] + g[1] * y[2] + g[2] * z[2],
            ];
            let idx = set.insert(&embed(&frame, w)?)?;
            if j == 0 && k == 0 {
                first = Some(idx);
            }
            if k == 1 {
                last = idx;
            }
        }
    }
    Ok((set, first.expect("at least one step"), last))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpStatus {
    /// Every consecutive pair is within the bound, so a 1-to-0 flip has nowhere to occur.
    Contradiction,
    /// Some consecutive pair is far enough apart for a flip.
    Inconclusive,
    /// `chi` and `phi` are the same ray.
    NoFlipRequired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub status: JumpStatus,
    pub angle: f64,
    /// Distances between consecutive rays of the interpolation.
    pub distances: Vec<f64>,
    /// First consecutive pair whose flip would violate the bound.
    pub first_forbidden: Option<usize>,
    /// First consecutive pair that could carry a flip.
    pub first_allowed: Option<usize>,
    /// Whether `f(phi) = 0` is forced by orthogonality to `chi`.
    pub flip_forced: bool,
    /// Backtracking result for the gadget family with `f(chi) = 1`, `f(phi) = 0`.
    pub sweep: Option<SearchReport>,
}

/// Rotates `chi` into `phi` in `steps` equal steps and checks the closeness bound on
/// each consecutive pair.
pub fn rotation_jump_demo(chi: &StateVector, phi: &StateVector, steps: usize) -> Result<RotationReport> {
    if chi.dim() != phi.dim() {
        return Err(Error::Dimension { expected: chi.dim(), found: phi.dim() });
    }
    if steps < 2 {
        return Err(Error::Precondition(format!("need at least 2 steps, got {steps}")));
    }
    let a = chi.normalized()?;
    let b = phi.normalized()?;
    let ov = a.inner(&b)?;
    if 1.0 - ov.norm() < PARALLEL_TOL {
        return Ok(RotationReport {
            status: JumpStatus::NoFlipRequired,
            angle: 0.0,
            distances: Vec::new(),
            first_forbidden: None,
            first_allowed: None,
            flip_forced: false,
            sweep: None,
        });
    }
    let aligned = b.scaled(C64::from_polar(1.0, -ov.arg()));
    let cos = ov.norm().min(1.0);
    let angle = cos.acos();
    let x1 = StateVector::from_vector(aligned.amplitudes() - a.amplitudes() * C64::new(cos, 0.0))?.normalized()?;
    let ray = |t: f64| {
        StateVector::from_vector(a.amplitudes() * C64::new(t.cos(), 0.0) + x1.amplitudes() * C64::new(t.sin(), 0.0))
    };
    let mut seq = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        seq.push(ray(angle * j as f64 / steps as f64)?);
    }
    let mut distances = Vec::with_capacity(steps);
    let mut first_forbidden = None;
    let mut first_allowed = None;
    for (j, w) in seq.windows(2).enumerate() {
        let r = separation_check(&w[0], &w[1])?;
        distances.push(r.distance);
        match r.verdict {
            Separation::Forbidden => {
                first_forbidden.get_or_insert(j);
            }
            Separation::Allowed => {
                first_allowed.get_or_insert(j);
            }
        }
    }
    let status = if first_allowed.is_none() {
        JumpStatus::Contradiction
    } else {
        JumpStatus::Inconclusive
    };
    let sweep = if chi.dim() >= 3 {
        let (set, ic, ip) = rotation_sweep_family(chi, phi, steps)?;
        Some(dispersion_free_search(&set, &[(ic, true), (ip, false)], SearchOptions::default())?)
    } else {
        None
    };
    Ok(RotationReport {
        status,
        angle,
        distances,
        first_forbidden,
        first_allowed,
        flip_forced: ov.norm() < ORTHOGONAL_TOL,
        sweep,
    })
}
