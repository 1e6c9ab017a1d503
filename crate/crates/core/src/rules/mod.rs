//! Invertible sub-circuit rewrite rules: matching, application, move
//! enumeration and unitary validation.

pub mod euler;
pub mod expr;
pub mod format;
pub mod library;

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;

use crate::cost::PatchEntry;
use crate::error::{Error, Result};
use crate::lattice::{Axis, CircuitTensor, GateKind, GateToken, LatticeDims, Site};
use crate::semantics::phase_distance;

pub use expr::{AngleExpr, PiFraction, DELTA, NUM_VARS, VAR_NAMES};
pub use library::load_ruleset;

pub const VALIDATION_TOLERANCE: f64 = 1e-9;
/// Binding spaces up to this size are validated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 4096;
pub const VALIDATION_SAMPLES: usize = 256;

/// One cell of a pattern. A control's partner is the cell one row below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatternToken {
    pub kind: GateKind,
    pub angle: Option<AngleExpr>,
}

impl PatternToken {
    pub fn plain(kind: GateKind) -> Self {
        PatternToken { kind, angle: None }
    }

    pub fn with_angle(kind: GateKind, angle: AngleExpr) -> Self {
        PatternToken { kind, angle: Some(angle) }
    }
}

/// A `rows × cols` block of pattern tokens; rows are qubits along the anchor
/// axis, columns are time steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    pub rows: usize,
    pub cols: usize,
    cells: Vec<PatternToken>,
}

impl Pattern {
    /// `rows[r][c]`.
    pub fn from_rows(rows: Vec<Vec<PatternToken>>) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        if n == 0 || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("pattern rows must be non-empty and equally long".into()));
        }
        let mut cells = Vec::with_capacity(n * cols);
        for c in 0..cols {
            for r in &rows {
                cells.push(r[c]);
            }
        }
        let p = Pattern { rows: n, cols, cells };
        p.check()?;
        Ok(p)
    }

    pub fn get(&self, row: usize, col: usize) -> PatternToken {
        self.cells[col * self.rows + row]
    }

    pub fn row(&self, r: usize) -> Vec<PatternToken> {
        (0..self.cols).map(|c| self.get(r, c)).collect()
    }

    fn check(&self) -> Result<()> {
        for c in 0..self.cols {
            for r in 0..self.rows {
                let tok = self.get(r, c);
                if tok.kind.is_parametric() != tok.angle.is_some() {
                    return Err(Error::InvalidConfig(format!("{} needs an angle iff parametric", tok.kind.name())));
                }
                let below = (r + 1 < self.rows).then(|| self.get(r + 1, c).kind);
                let above = (r > 0).then(|| self.get(r - 1, c).kind);
                if tok.kind.is_control() && below != Some(GateKind::Busy) {
                    return Err(Error::InvalidConfig(format!("{} at row {r} lacks BUSY below", tok.kind.name())));
                }
                if tok.kind == GateKind::Busy && !above.is_some_and(|k| k.is_control()) {
                    return Err(Error::InvalidConfig(format!("BUSY at row {r} has no control above")));
                }
            }
        }
        Ok(())
    }

    fn vars(&self) -> BTreeSet<usize> {
        self.cells.iter().filter_map(|t| t.angle).flat_map(|e| e.vars().collect::<Vec<_>>()).collect()
    }

    fn uses_delta(&self) -> bool {
        self.cells.iter().any(|t| t.angle.is_some_and(|e| e.uses(DELTA)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimeWindow {
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Backward];

    pub fn reversed(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Pattern,
    pub window: Option<TimeWindow>,
    /// Values the step variable `d` ranges over.
    pub deltas: Vec<PiFraction>,
    /// `lhs` is `RZ RX RZ`, `rhs` is `RX RZ RX`, and the angles are related by
    /// the Euler-frame conversion rather than by expressions.
    pub euler: bool,
    /// Free-form remarks carried through the rule file.
    pub notes: Vec<String>,
}

impl Rule {
    pub fn new(name: &str, lhs: Pattern, rhs: Pattern) -> Result<Self> {
        let r = Rule {
            name: name.to_string(),
            lhs,
            rhs,
            window: None,
            deltas: Vec::new(),
            euler: false,
            notes: Vec::new(),
        };
        r.check()?;
        Ok(r)
    }

    pub fn source(&self, dir: Direction) -> &Pattern {
        match dir {
            Direction::Forward => &self.lhs,
            Direction::Backward => &self.rhs,
        }
    }

    pub fn target(&self, dir: Direction) -> &Pattern {
        self.source(dir.reversed())
    }

    pub fn rows(&self) -> usize {
        self.lhs.rows
    }

    pub fn cols(&self) -> usize {
        self.lhs.cols
    }

    /// Structural checks: equal extents, solvable variables, Euler layout.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("rule {}: {m}", self.name)));
        if self.lhs.rows != self.rhs.rows || self.lhs.cols != self.rhs.cols {
            return bad("lhs and rhs extents differ".into());
        }
        if self.euler {
            let zxz = [GateKind::RZ, GateKind::RX, GateKind::RZ];
            let xzx = [GateKind::RX, GateKind::RZ, GateKind::RX];
            let kinds = |p: &Pattern| (0..p.cols).map(|c| p.get(0, c).kind).collect::<Vec<_>>();
            if self.lhs.rows != 1 || kinds(&self.lhs) != zxz || kinds(&self.rhs) != xzx {
                return bad("euler rule must be RZ RX RZ against RX RZ RX".into());
            }
            return Ok(());
        }
        let uses_d = self.lhs.uses_delta() || self.rhs.uses_delta();
        if uses_d && self.deltas.is_empty() {
            return bad("uses d but has no delta set".into());
        }
        for dir in Direction::BOTH {
            let (src, dst) = (self.source(dir), self.target(dir));
            let mut known: BTreeSet<usize> = BTreeSet::new();
            known.insert(DELTA);
            // Fixed point of single-unknown solving over source tokens.
            loop {
                let before = known.len();
                for e in src.cells.iter().filter_map(|t| t.angle) {
                    let open: Vec<usize> = e.vars().filter(|v| !known.contains(v)).collect();
                    if open.len() == 1 && e.coeffs[open[0]].abs() == 1 {
                        known.insert(open[0]);
                    }
                }
                if known.len() == before {
                    break;
                }
            }
            if !src.vars().is_subset(&known) || !dst.vars().is_subset(&known) {
                return bad(format!("variables not determined by the {dir:?} source"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RuleSet {
    pub name: String,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(name: &str, rules: Vec<Rule>) -> Self {
        RuleSet { name: name.to_string(), rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Validates every rule at `modulus`, failing on the first unsound one.
    pub fn validate(&self, modulus: u64) -> Result<Vec<RuleReport>> {
        let mut out = Vec::with_capacity(self.rules.len());
        for rule in &self.rules {
            let rep = validate_rule(rule, modulus)?;
            if !rep.pass {
                return Err(Error::RuleValidationFailed { name: rule.name.clone(), distance: rep.distance });
            }
            out.push(rep);
        }
        Ok(out)
    }
}

/// Pattern origin: time step, lattice qubit of row 0, and the axis the rows
/// run along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Anchor {
    pub t: usize,
    pub q: usize,
    pub axis: Axis,
}

/// Variable values bound by a match. For Euler rules the source and target
/// angle triples are stored instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding {
    pub values: [Option<u64>; NUM_VARS],
    pub euler: Option<([u64; 3], [u64; 3])>,
}

impl Binding {
    pub fn of(values: [Option<u64>; NUM_VARS]) -> Self {
        Binding { values, euler: None }
    }

    /// The binding that undoes a move made with `self`.
    pub fn reversed(&self) -> Self {
        Binding { values: self.values, euler: self.euler.map(|(s, t)| (t, s)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub rule: usize,
    pub direction: Direction,
    pub anchor: Anchor,
    pub binding: Binding,
}

impl Move {
    pub fn reversed(&self) -> Self {
        Move {
            rule: self.rule,
            direction: self.direction.reversed(),
            anchor: self.anchor,
            binding: self.binding.reversed(),
        }
    }
}

/// Lattice qubits covered by the pattern rows, if the anchor fits.
pub fn anchor_qubits(rule: &Rule, dims: &LatticeDims, anchor: Anchor) -> Option<Vec<usize>> {
    if anchor.t + rule.cols() > dims.time_steps || anchor.q >= dims.num_qubits() {
        return None;
    }
    if rule.rows() == 1 && anchor.axis != Axis(0) {
        return None;
    }
    match rule.window {
        Some(TimeWindow::First) if anchor.t != 0 => return None,
        Some(TimeWindow::Last) if anchor.t + rule.cols() != dims.time_steps => return None,
        _ => {}
    }
    (0..rule.rows()).map(|r| dims.step(anchor.q, anchor.axis, r)).collect()
}

/// All anchors at which the rule's window fits, in lexicographic order.
pub fn anchors(rule: &Rule, dims: &LatticeDims) -> Vec<Anchor> {
    let axes = if rule.rows() == 1 { 1 } else { dims.num_axes() };
    let mut out = Vec::new();
    for t in 0..dims.time_steps {
        for q in 0..dims.num_qubits() {
            for a in 0..axes {
                let anchor = Anchor { t, q, axis: Axis(a as u8) };
                if anchor_qubits(rule, dims, anchor).is_some() {
                    out.push(anchor);
                }
            }
        }
    }
    out
}

fn token_matches(pt: &PatternToken, tok: &GateToken, axis: Axis) -> bool {
    if pt.kind != tok.kind {
        return false;
    }
    if pt.kind.is_control() {
        return tok.partner == Some(axis);
    }
    true
}

/// Source angles read off the lattice, in pattern column-major order.
fn euler_source_angles(tensor: &CircuitTensor, anchor: Anchor) -> [u64; 3] {
    [0, 1, 2].map(|c| tensor.get(anchor.t + c, anchor.q).angle.unwrap_or(0))
}

/// Every distinct binding under which the source side of `rule` matches at
/// `anchor`. Empty when it does not match.
pub fn bindings_at(rule: &Rule, dir: Direction, tensor: &CircuitTensor, anchor: Anchor) -> Vec<Binding> {
    let dims = tensor.dims();
    let src = rule.source(dir);
    // Most proposals fail on the corner token; reject those before allocating.
    if anchor.t >= dims.time_steps
        || anchor.q >= dims.num_qubits()
        || !token_matches(&src.get(0, 0), &tensor.get(anchor.t, anchor.q), anchor.axis)
    {
        return Vec::new();
    }
    let Some(qubits) = anchor_qubits(rule, dims, anchor) else {
        return Vec::new();
    };
    for c in 0..src.cols {
        for (r, &q) in qubits.iter().enumerate() {
            if !token_matches(&src.get(r, c), &tensor.get(anchor.t + c, q), anchor.axis) {
                return Vec::new();
            }
        }
    }
    let m = dims.angle_modulus;
    if rule.euler {
        let from = euler_source_angles(tensor, anchor);
        return euler::grid_conversions(from, m)
            .into_iter()
            .map(|to| Binding { values: [None; NUM_VARS], euler: Some((from, to)) })
            .collect();
    }
    let deltas: Vec<Option<u64>> = if src.uses_delta() || rule.target(dir).uses_delta() {
        let set: BTreeSet<u64> = rule.deltas.iter().filter_map(|d| d.to_index(m)).collect();
        set.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let mut out: Vec<Binding> = Vec::new();
    for d in deltas {
        let mut values = [None; NUM_VARS];
        values[DELTA] = d;
        if solve_source(src, tensor, anchor, &qubits, &mut values) {
            let b = Binding::of(values);
            if !out.contains(&b) {
                out.push(b);
            }
        }
    }
    out
}

/// Binds the source variables from the lattice angles and checks every
/// source token. Returns whether all tokens are consistent.
fn solve_source(
    src: &Pattern,
    tensor: &CircuitTensor,
    anchor: Anchor,
    qubits: &[usize],
    values: &mut [Option<u64>; NUM_VARS],
) -> bool {
    let m = tensor.dims().angle_modulus;
    let angled: Vec<(AngleExpr, u64)> = (0..src.cols)
        .flat_map(|c| qubits.iter().enumerate().map(move |(r, &q)| (r, c, q)))
        .filter_map(|(r, c, q)| {
            let e = src.get(r, c).angle?;
            Some((e, tensor.get(anchor.t + c, q).angle.unwrap_or(0)))
        })
        .collect();
    loop {
        let mut progress = false;
        for (e, k) in &angled {
            let open: Vec<usize> = e.vars().filter(|&v| values[v].is_none()).collect();
            if open.len() == 1 {
                if let Some(v) = e.solve_for(open[0], *k, values, m) {
                    values[open[0]] = Some(v);
                    progress = true;
                }
            }
        }
        if !progress {
            break;
        }
    }
    angled.iter().all(|(e, k)| e.eval(values, m) == Some(*k))
}

pub fn matches_at(rule: &Rule, dir: Direction, tensor: &CircuitTensor, anchor: Anchor) -> Option<Binding> {
    bindings_at(rule, dir, tensor, anchor).into_iter().next()
}

/// Instantiates one side of the rule under `binding`.
fn instantiate(rule: &Rule, side: &Pattern, angles: Option<[u64; 3]>, binding: &Binding, axis: Axis, m: u64) -> Option<Vec<GateToken>> {
    let mut out = Vec::with_capacity(side.cells.len());
    for c in 0..side.cols {
        for r in 0..side.rows {
            let pt = side.get(r, c);
            let angle = match (pt.angle, angles) {
                (None, _) => None,
                (Some(_), Some(a)) if rule.euler => Some(a[c]),
                (Some(e), _) => Some(e.eval(&binding.values, m)?),
            };
            let partner = pt.kind.is_control().then_some(axis);
            out.push(GateToken { kind: pt.kind, angle, partner });
        }
    }
    Some(out)
}

/// Site rewrites performing the move, skipping sites left unchanged.
pub fn move_patch(rule: &Rule, dir: Direction, tensor: &CircuitTensor, anchor: Anchor, binding: &Binding) -> Result<Vec<PatchEntry>> {
    let dims = tensor.dims();
    let qubits = anchor_qubits(rule, dims, anchor).ok_or(Error::StaleBinding)?;
    let m = dims.angle_modulus;
    let (src_angles, dst_angles) = match binding.euler {
        Some((s, t)) => (Some(s), Some(t)),
        None => (None, None),
    };
    if rule.euler != binding.euler.is_some() {
        return Err(Error::StaleBinding);
    }
    let before = instantiate(rule, rule.source(dir), src_angles, binding, anchor.axis, m).ok_or(Error::StaleBinding)?;
    let after = instantiate(rule, rule.target(dir), dst_angles, binding, anchor.axis, m).ok_or(Error::StaleBinding)?;
    let rows = rule.rows();
    let mut patch = Vec::new();
    for c in 0..rule.cols() {
        for (r, &q) in qubits.iter().enumerate() {
            let site = Site { t: anchor.t + c, q };
            let (old, new) = (before[c * rows + r], after[c * rows + r]);
            if tensor.at(site) != old {
                return Err(Error::StaleBinding);
            }
            if old != new {
                patch.push(PatchEntry { site, old, new });
            }
        }
    }
    Ok(patch)
}

pub fn apply_at(rule: &Rule, dir: Direction, tensor: &CircuitTensor, anchor: Anchor, binding: &Binding) -> Result<CircuitTensor> {
    let patch = move_patch(rule, dir, tensor, anchor, binding)?;
    crate::cost::apply_patch(tensor, &patch)
}

pub fn apply_move(ruleset: &RuleSet, tensor: &CircuitTensor, mv: &Move) -> Result<CircuitTensor> {
    let rule = ruleset.rules.get(mv.rule).ok_or(Error::StaleBinding)?;
    apply_at(rule, mv.direction, tensor, mv.anchor, &mv.binding)
}

/// Every applicable move, ordered by rule, direction, anchor, binding.
pub fn enumerate_moves(ruleset: &RuleSet, tensor: &CircuitTensor) -> Vec<Move> {
    let mut out = Vec::new();
    for (i, rule) in ruleset.rules.iter().enumerate() {
        let anchors = anchors(rule, tensor.dims());
        for dir in Direction::BOTH {
            for &anchor in &anchors {
                for binding in bindings_at(rule, dir, tensor, anchor) {
                    out.push(Move { rule: i, direction: dir, anchor, binding });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleReport {
    pub name: String,
    pub pass: bool,
    /// Largest phase-invariant distance over the checked bindings.
    pub distance: f64,
    pub bindings_checked: usize,
    pub exhaustive: bool,
}

fn side_tensor(rule: &Rule, side: &Pattern, angles: Option<[u64; 3]>, binding: &Binding, m: u64) -> Result<Option<CircuitTensor>> {
    let dims = LatticeDims::linear(side.cols, side.rows, m)?;
    let Some(tokens) = instantiate(rule, side, angles, binding, Axis(0), m) else {
        return Ok(None);
    };
    Ok(Some(CircuitTensor::from_tokens(dims, tokens)?))
}

/// Checks lhs ≡ rhs up to global phase for every grid binding, or for a fixed
/// pseudo-random sample when the space exceeds [`EXHAUSTIVE_LIMIT`].
pub fn validate_rule(rule: &Rule, modulus: u64) -> Result<RuleReport> {
    rule.check()?;
    let bindings = candidate_bindings(rule, modulus);
    let exhaustive = bindings.len() <= EXHAUSTIVE_LIMIT || rule.euler;
    let checked: Vec<Binding> = if exhaustive {
        bindings
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        bindings.choose_multiple(&mut rng, VALIDATION_SAMPLES).copied().collect()
    };
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for b in &checked {
        let (sa, ta) = match b.euler {
            Some((s, t)) => (Some(s), Some(t)),
            None => (None, None),
        };
        let (Some(l), Some(r)) = (side_tensor(rule, &rule.lhs, sa, b, modulus)?, side_tensor(rule, &rule.rhs, ta, b, modulus)?) else {
            continue;
        };
        let ul = crate::semantics::circuit_unitary(&l)?;
        let ur = crate::semantics::circuit_unitary(&r)?;
        worst = worst.max(phase_distance(&ul, &ur)?);
        count += 1;
    }
    Ok(RuleReport {
        name: rule.name.clone(),
        pass: worst <= VALIDATION_TOLERANCE,
        distance: worst,
        bindings_checked: count,
        exhaustive,
    })
}

/// The admissible binding space on the grid.
fn candidate_bindings(rule: &Rule, m: u64) -> Vec<Binding> {
    if rule.euler {
        let mut out = Vec::new();
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for t in euler::grid_conversions([a, b, c], m) {
                        out.push(Binding { values: [None; NUM_VARS], euler: Some(([a, b, c], t)) });
                    }
                }
            }
        }
        return out;
    }
    let vars: Vec<usize> = rule.lhs.vars().union(&rule.rhs.vars()).copied().filter(|&v| v != DELTA).collect();
    let deltas: Vec<Option<u64>> = if rule.lhs.uses_delta() || rule.rhs.uses_delta() {
        let s: BTreeSet<u64> = rule.deltas.iter().filter_map(|d| d.to_index(m)).collect();
        s.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    // Cap the enumerated grid so large moduli stay cheap; beyond the cap the
    // values are drawn at random instead.
    let space = (m as u128).saturating_pow(vars.len() as u32).saturating_mul(deltas.len() as u128);
    if space > (EXHAUSTIVE_LIMIT as u128) * 4 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xb1d);
        return (0..VALIDATION_SAMPLES * 2)
            .map(|_| {
                let mut values = [None; NUM_VARS];
                for &v in &vars {
                    values[v] = Some(rand::Rng::random_range(&mut rng, 0..m));
                }
                values[DELTA] = *deltas.choose(&mut rng).expect("non-empty");
                Binding::of(values)
            })
            .collect();
    }
    let mut out = Vec::new();
    let total = space as usize;
    for idx in 0..total {
        let mut rest = idx;
        let mut values = [None; NUM_VARS];
        for &v in &vars {
            values[v] = Some((rest % m as usize) as u64);
            rest /= m as usize;
        }
        values[DELTA] = deltas[rest % deltas.len()];
        out.push(Binding::of(values));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: &str) -> PatternToken {
        format::parse_pattern_token(s).unwrap()
    }

    fn rule1(name: &str, lhs: &[&str], rhs: &[&str]) -> Rule {
        let l = Pattern::from_rows(vec![lhs.iter().map(|s| pt(s)).collect()]).unwrap();
        let r = Pattern::from_rows(vec![rhs.iter().map(|s| pt(s)).collect()]).unwrap();
        Rule::new(name, l, r).unwrap()
    }

    fn line(tokens: &[GateToken], m: u64) -> CircuitTensor {
        CircuitTensor::from_tokens(LatticeDims::linear(tokens.len(), 1, m).unwrap(), tokens.to_vec()).unwrap()
    }

    const A0: Anchor = Anchor { t: 0, q: 0, axis: Axis(0) };

    #[test]
    fn hh_cancels() {
        let r = rule1("hh", &["H", "H"], &["Idle", "Idle"]);
        let c = line(&[GateToken::H, GateToken::H], 2);
        let b = matches_at(&r, Direction::Forward, &c, A0).unwrap();
        let out = apply_at(&r, Direction::Forward, &c, A0, &b).unwrap();
        assert!(out.tokens().iter().all(|t| t.is_idle()));
        let back = apply_at(&r, Direction::Backward, &out, A0, &b.reversed()).unwrap();
        assert_eq!(back, c);
        assert!(matches_at(&r, Direction::Forward, &line(&[GateToken::H, GateToken::IDLE], 2), A0).is_none());
    }

    #[test]
    fn delta_binding() {
        let text = "ruleset t\nrule s\n  delta pi/8\n  lhs\n    RZ(a) RZ(b)\n  rhs\n    RZ(a-d) RZ(b+d)\nend\n";
        let r = format::parse(text).unwrap().rules.remove(0);
        let c = line(&[GateToken::rotation(GateKind::RZ, 4), GateToken::rotation(GateKind::RZ, 2)], 16);
        let b = bindings_at(&r, Direction::Forward, &c, A0);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].values, [Some(4), Some(2), None, Some(1)]);
        let out = apply_at(&r, Direction::Forward, &c, A0, &b[0]).unwrap();
        assert_eq!(out.get(0, 0).angle, Some(3));
        assert_eq!(out.get(1, 0).angle, Some(3));
    }

    #[test]
    fn stale_binding() {
        let r = rule1("rz0", &["RZ(0)"], &["Idle"]);
        let c = line(&[GateToken::rotation(GateKind::RZ, 0)], 16);
        let b = matches_at(&r, Direction::Forward, &c, A0).unwrap();
        let changed = line(&[GateToken::rotation(GateKind::RZ, 3)], 16);
        assert_eq!(apply_at(&r, Direction::Forward, &changed, A0, &b), Err(Error::StaleBinding));
    }

    #[test]
    fn commute_moves_on_two_steps() {
        let rs = RuleSet::new("t", vec![rule1("shift", &["Idle", "H"], &["H", "Idle"])]);
        let moves = enumerate_moves(&rs, &line(&[GateToken::H, GateToken::IDLE], 2));
        assert_eq!(moves.len(), 1);
        assert_eq!(moves[0].direction, Direction::Backward);
        assert!(enumerate_moves(&RuleSet::default(), &line(&[GateToken::H], 2)).is_empty());
    }

    #[test]
    fn idle_pair_creation() {
        let rs = RuleSet::new("t", vec![rule1("hh", &["H", "H"], &["Idle", "Idle"])]);
        let moves = enumerate_moves(&rs, &line(&[GateToken::IDLE, GateToken::IDLE], 2));
        assert_eq!(moves.len(), 1);
        assert_eq!(moves[0].direction, Direction::Backward);
    }

    #[test]
    fn corrupted_rule_fails_with_h_distance() {
        let r = rule1("bad", &["H"], &["Idle"]);
        let rep = validate_rule(&r, 2).unwrap();
        assert!(!rep.pass);
        // min over φ of ‖H − e^{iφ}I‖_F: tr(H) = 0 so the distance is 2.
        assert!((rep.distance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rx_through_z_pi_is_sound() {
        let r = rule1("9", &["RX(a)", "RZ(pi)"], &["RZ(pi)", "RX(-a)"]);
        let rep = validate_rule(&r, 16).unwrap();
        assert!(rep.pass && rep.exhaustive);
        assert_eq!(rep.bindings_checked, 16);
    }
}
