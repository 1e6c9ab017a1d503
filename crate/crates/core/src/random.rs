//! Random valid circuit tensors, for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lattice::{Axis, CircuitTensor, GateKind, GateToken, LatticeDims, Site};
use crate::rules::{bindings_at, move_patch, RuleSet};
use crate::sa::ProposalSpace;

/// Fills each site with a uniformly chosen kind from `kinds` (Idle included
/// with weight `idle_weight`), pairing two-qubit gates with a free neighbour
/// when one exists.
pub fn random_tensor<R: Rng>(dims: &LatticeDims, kinds: &[GateKind], idle_weight: usize, rng: &mut R) -> CircuitTensor {
    let mut t = CircuitTensor::idle(dims.clone());
    let nq = dims.num_qubits();
    let m = dims.angle_modulus;
    let mut order: Vec<usize> = (0..nq).collect();
    for step in 0..dims.time_steps {
        order.shuffle(rng);
        let mut used = vec![false; nq];
        for &q in &order {
            if used[q] {
                continue;
            }
            let pick = rng.random_range(0..kinds.len() + idle_weight);
            let Some(&kind) = kinds.get(pick) else { continue };
            let angle = kind.is_parametric().then(|| rng.random_range(0..m));
            if kind.is_control() {
                let axis = Axis(rng.random_range(0..dims.num_axes()) as u8);
                let Some(p) = dims.step(q, axis, 1).filter(|&p| !used[p]) else { continue };
                used[q] = true;
                used[p] = true;
                t.set(Site { t: step, q }, GateToken::control(kind, axis, angle));
                t.set(Site { t: step, q: p }, GateToken::BUSY);
            } else if kind.is_gate() {
                used[q] = true;
                t.set(Site { t: step, q }, GateToken { kind, angle, partner: None });
            }
        }
    }
    t
}

/// Applies up to `len` uniformly proposed matching moves, returning the final
/// circuit and the number of moves applied.
pub fn random_walk<R: Rng>(input: &CircuitTensor, ruleset: &RuleSet, len: usize, rng: &mut R) -> (CircuitTensor, usize) {
    let space = ProposalSpace::new(ruleset, input);
    let mut cur = input.clone();
    let mut applied = 0;
    let mut attempts = 0;
    while applied < len && attempts < 1000 * len.max(1) && !space.is_empty() {
        attempts += 1;
        let Some(i) = space.draw_index(rng) else { break };
        let (rule, dir, anchor) = space.triples[i];
        let b = bindings_at(&ruleset.rules[rule], dir, &cur, anchor);
        if b.is_empty() {
            continue;
        }
        let binding = b[rng.random_range(0..b.len())];
        let patch = move_patch(&ruleset.rules[rule], dir, &cur, anchor, &binding).expect("fresh binding");
        crate::cost::apply_patch_in_place(&mut cur, &patch).expect("fresh patch");
        applied += 1;
    }
    (cur, applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn random_tensors_are_valid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let kinds = [GateKind::H, GateKind::RZ, GateKind::CP, GateKind::Swap, GateKind::CZ, GateKind::RX];
        for dims in [LatticeDims::linear(5, 4, 16).unwrap(), LatticeDims::new(4, vec![3, 3], 8).unwrap()] {
            for _ in 0..50 {
                let t = random_tensor(&dims, &kinds, 2, &mut rng);
                assert!(crate::lattice::validate(&t).is_empty());
            }
        }
    }
}
