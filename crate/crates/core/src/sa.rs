//! Simulated-annealing compilation: Metropolis–Hastings over rule-reachable
//! circuits with a geometric temperature schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{apply_patch_in_place, CostModel, MachineSpec};
use crate::error::{Error, Result};
use crate::lattice::CircuitTensor;
use crate::rules::{anchors, bindings_at, move_patch, Anchor, Direction, Move, RuleSet};

/// Proposals drawn when estimating a default `T_max`.
pub const TMAX_PROBES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    /// `None` picks the 95th percentile of `|ΔI|` over random proposals.
    pub t_max: Option<f64>,
    /// `None` picks 1e-3 times the smallest positive infidelity.
    pub t_min: Option<f64>,
    pub steps: u64,
    pub seed: u64,
    /// Record every this many steps (the final step is always recorded).
    pub record_stride: u64,
    pub replicas: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig { t_max: None, t_min: None, steps: 10_000, seed: 0, record_stride: 1000, replicas: 1 }
    }
}

/// `T_k = T_max (T_min/T_max)^(k/N)`.
pub fn temperature(k: u64, n: u64, t_max: f64, t_min: f64) -> f64 {
    if n == 0 {
        return t_max;
    }
    t_max * (t_min / t_max).powf(k as f64 / n as f64)
}

/// The fixed set of `(rule, direction, anchor)` triples a proposal draws from.
#[derive(Debug, Clone)]
pub struct ProposalSpace {
    pub triples: Vec<(usize, Direction, Anchor)>,
}

impl ProposalSpace {
    pub fn new(ruleset: &RuleSet, tensor: &CircuitTensor) -> Self {
        let mut triples = Vec::new();
        for (i, rule) in ruleset.rules.iter().enumerate() {
            let a = anchors(rule, tensor.dims());
            for dir in Direction::BOTH {
                triples.extend(a.iter().map(|&anchor| (i, dir, anchor)));
            }
        }
        ProposalSpace { triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn draw_index<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        (!self.triples.is_empty()).then(|| rng.random_range(0..self.triples.len()))
    }

    /// Uniform triple, then a uniform binding among those that match. `None`
    /// when the drawn triple does not match.
    pub fn propose<R: Rng>(&self, ruleset: &RuleSet, tensor: &CircuitTensor, rng: &mut R) -> Option<Move> {
        let (rule, direction, anchor) = self.triples[self.draw_index(rng)?];
        let bindings = bindings_at(&ruleset.rules[rule], direction, tensor, anchor);
        if bindings.is_empty() {
            return None;
        }
        let binding = bindings[rng.random_range(0..bindings.len())];
        Some(Move { rule, direction, anchor, binding })
    }
}

/// Metropolis acceptance for a cost change `delta` at temperature `t`.
pub fn accept<R: Rng>(delta: f64, t: f64, rng: &mut R) -> bool {
    delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp()
}

/// Chain state: the circuit and its running cost.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub tensor: CircuitTensor,
    pub cost: f64,
}

/// One Metropolis–Hastings step at temperature `t`. Returns whether a move
/// was accepted; the state is untouched otherwise.
pub fn mh_step<R: Rng>(
    state: &mut ChainState,
    space: &ProposalSpace,
    ruleset: &RuleSet,
    model: &CostModel,
    t: f64,
    rng: &mut R,
) -> Result<bool> {
    mh_step_lazy(state, space, ruleset, model, || t, rng)
}

/// [`mh_step`] with the temperature evaluated only for uphill moves.
fn mh_step_lazy<R: Rng>(
    state: &mut ChainState,
    space: &ProposalSpace,
    ruleset: &RuleSet,
    model: &CostModel,
    t: impl FnOnce() -> f64,
    rng: &mut R,
) -> Result<bool> {
    let Some(mv) = space.propose(ruleset, &state.tensor, rng) else {
        return Ok(false);
    };
    let rule = &ruleset.rules[mv.rule];
    let patch = move_patch(rule, mv.direction, &state.tensor, mv.anchor, &mv.binding)?;
    if patch.is_empty() {
        return Ok(false);
    }
    let delta = model.delta(&state.tensor, &patch)?;
    if delta > 0.0 && !accept(delta, t(), rng) {
        return Ok(false);
    }
    apply_patch_in_place(&mut state.tensor, &patch)?;
    state.cost += delta;
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    pub k: u64,
    pub temperature: f64,
    pub current: f64,
    pub best: f64,
    pub accepted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub seed: u64,
    pub replica: usize,
    pub t_max: f64,
    pub t_min: f64,
    pub steps: u64,
    pub samples: Vec<ChainSample>,
    pub input_cost: f64,
    pub best_cost: f64,
    /// `1 − best_cost / input_cost`.
    pub improvement: f64,
    #[serde(skip)]
    pub best: Option<CircuitTensor>,
}

fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `T_max` from the spread of cost changes of random matching proposals.
pub fn default_t_max(input: &CircuitTensor, ruleset: &RuleSet, model: &CostModel, seed: u64) -> Result<Option<f64>> {
    let space = ProposalSpace::new(ruleset, input);
    let mut rng = replica_rng(seed, u64::MAX);
    let mut deltas = Vec::with_capacity(TMAX_PROBES);
    let mut attempts = 0;
    while deltas.len() < TMAX_PROBES && attempts < 200 * TMAX_PROBES {
        attempts += 1;
        let Some(mv) = space.propose(ruleset, input, &mut rng) else { continue };
        let patch = move_patch(&ruleset.rules[mv.rule], mv.direction, input, mv.anchor, &mv.binding)?;
        deltas.push(model.delta(input, &patch)?.abs());
    }
    let mut pos: Vec<f64> = deltas.into_iter().filter(|&d| d > 0.0).collect();
    if pos.is_empty() {
        return Ok(None);
    }
    pos.sort_by(f64::total_cmp);
    let idx = ((pos.len() as f64 * 0.95).ceil() as usize).clamp(1, pos.len()) - 1;
    Ok(Some(pos[idx]))
}

/// Resolves the schedule endpoints, filling in the defaults.
pub fn schedule_bounds(input: &CircuitTensor, ruleset: &RuleSet, machine: &MachineSpec, cfg: &SaConfig) -> Result<(f64, f64)> {
    let model = CostModel::new(machine, input.dims())?;
    let floor = machine.smallest_gate_infidelity().unwrap_or(1e-6);
    let t_min = cfg.t_min.unwrap_or(1e-3 * floor);
    let t_max = match cfg.t_max {
        Some(t) => t,
        None => default_t_max(input, ruleset, &model, cfg.seed)?.unwrap_or(floor).max(t_min),
    };
    if !(t_min > 0.0 && t_min <= t_max && t_max.is_finite()) {
        return Err(Error::InvalidConfig(format!("need 0 < T_min <= T_max, got {t_min:e} and {t_max:e}")));
    }
    Ok((t_max, t_min))
}

/// Runs a single chain with the given replica index; the output is the best
/// circuit seen.
pub fn run_chain(
    input: &CircuitTensor,
    ruleset: &RuleSet,
    machine: &MachineSpec,
    cfg: &SaConfig,
    replica: usize,
) -> Result<ChainRecord> {
    let (t_max, t_min) = schedule_bounds(input, ruleset, machine, cfg)?;
    run_chain_with(input, ruleset, machine, cfg, replica, t_max, t_min)
}

fn run_chain_with(
    input: &CircuitTensor,
    ruleset: &RuleSet,
    machine: &MachineSpec,
    cfg: &SaConfig,
    replica: usize,
    t_max: f64,
    t_min: f64,
) -> Result<ChainRecord> {
    let model = CostModel::new(machine, input.dims())?;
    let space = ProposalSpace::new(ruleset, input);
    let mut rng = replica_rng(cfg.seed, replica as u64);
    let input_cost = model.total(input)?;
    let mut state = ChainState { tensor: input.clone(), cost: input_cost };
    let mut best = input.clone();
    let mut best_cost = input_cost;
    let mut accepted = 0u64;
    let stride = cfg.record_stride.max(1);
    let mut samples = vec![ChainSample { k: 0, temperature: t_max, current: input_cost, best: input_cost, accepted: 0 }];
    for k in 0..cfg.steps {
        let t = || temperature(k, cfg.steps, t_max, t_min);
        if mh_step_lazy(&mut state, &space, ruleset, &model, t, &mut rng)? {
            accepted += 1;
            if state.cost < best_cost {
                best_cost = state.cost;
                best.clone_from(&state.tensor);
            }
        }
        let done = k + 1;
        if done % stride == 0 || done == cfg.steps {
            samples.push(ChainSample {
                k: done,
                temperature: temperature(done, cfg.steps, t_max, t_min),
                current: state.cost,
                best: best_cost,
                accepted,
            });
        }
    }
    // Recompute from scratch so the reported value carries no accumulated drift.
    let best_cost = model.total(&best)?.min(input_cost);
    let improvement = if input_cost > 0.0 { 1.0 - best_cost / input_cost } else { 0.0 };
    Ok(ChainRecord {
        seed: cfg.seed,
        replica,
        t_max,
        t_min,
        steps: cfg.steps,
        samples,
        input_cost,
        best_cost,
        improvement,
        best: Some(best),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub chains: Vec<ChainRecord>,
    pub mean_improvement: f64,
    pub min_improvement: f64,
    pub max_improvement: f64,
    /// Replica holding the lowest-cost circuit.
    pub best_replica: usize,
}

impl EnsembleRecord {
    pub fn best(&self) -> Option<&CircuitTensor> {
        self.chains[self.best_replica].best.as_ref()
    }
}

/// Runs `cfg.replicas` independent chains in parallel (replica `r` uses
/// stream `r` of the seed) and aggregates them.
pub fn run_ensemble(input: &CircuitTensor, ruleset: &RuleSet, machine: &MachineSpec, cfg: &SaConfig) -> Result<EnsembleRecord> {
    if cfg.replicas == 0 {
        return Err(Error::InvalidConfig("replicas must be at least 1".into()));
    }
    let (t_max, t_min) = schedule_bounds(input, ruleset, machine, cfg)?;
    let chains: Vec<ChainRecord> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_chain_with(input, ruleset, machine, cfg, r, t_max, t_min))
        .collect::<Result<_>>()?;
    let imps: Vec<f64> = chains.iter().map(|c| c.improvement).collect();
    let best_replica = (0..chains.len()).min_by(|&a, &b| chains[a].best_cost.total_cmp(&chains[b].best_cost)).unwrap_or(0);
    Ok(EnsembleRecord {
        mean_improvement: imps.iter().sum::<f64>() / imps.len() as f64,
        min_improvement: imps.iter().copied().fold(f64::INFINITY, f64::min),
        max_improvement: imps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        best_replica,
        chains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GateToken, LatticeDims};
    use crate::presets::example1_machine_without_swap_area;
    use crate::rules::format;

    fn hh_rules() -> RuleSet {
        format::parse("ruleset t\nrule hh\n  lhs\n    H H\n  rhs\n    Idle Idle\nend\n").unwrap()
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(temperature(0, 10, 1.0, 1e-4), 1.0);
        assert!((temperature(10, 10, 1.0, 1e-4) - 1e-4).abs() < 1e-18);
        assert!((temperature(5, 10, 1.0, 1e-4) - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn metropolis_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 1e-5;
        let n = 200_000;
        let hits = (0..n).filter(|_| accept(t * 2f64.ln(), t, &mut rng)).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{p}");
        assert!(accept(-1.0, t, &mut rng) && accept(0.0, t, &mut rng));
    }

    #[test]
    fn empty_ruleset_never_proposes() {
        let c = CircuitTensor::idle(LatticeDims::linear(2, 1, 2).unwrap());
        let space = ProposalSpace::new(&RuleSet::default(), &c);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(space.propose(&RuleSet::default(), &c, &mut rng).is_none());
    }

    #[test]
    fn zero_steps_leave_input() {
        let dims = LatticeDims::linear(2, 1, 2).unwrap();
        let c = CircuitTensor::from_tokens(dims, vec![GateToken::H, GateToken::H]).unwrap();
        let cfg = SaConfig { steps: 0, seed: 1, t_max: Some(1e-5), t_min: Some(1e-8), ..SaConfig::default() };
        let rec = run_chain(&c, &hh_rules(), &example1_machine_without_swap_area(), &cfg, 0).unwrap();
        assert_eq!(rec.improvement, 0.0);
        assert_eq!(rec.best_cost, rec.input_cost);
    }

    #[test]
    fn cancels_pair_and_is_deterministic() {
        let dims = LatticeDims::linear(2, 1, 2).unwrap();
        let c = CircuitTensor::from_tokens(dims, vec![GateToken::H, GateToken::H]).unwrap();
        let cfg = SaConfig { steps: 50, seed: 9, record_stride: 10, replicas: 3, ..SaConfig::default() };
        let a = run_ensemble(&c, &hh_rules(), &example1_machine_without_swap_area(), &cfg).unwrap();
        let b = run_ensemble(&c, &hh_rules(), &example1_machine_without_swap_area(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean_improvement, 1.0);
        for ch in &a.chains {
            assert!(ch.samples.windows(2).all(|w| w[1].best <= w[0].best));
        }
    }
}
