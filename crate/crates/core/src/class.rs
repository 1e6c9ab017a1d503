//! Breadth-first enumeration of the circuits reachable from an input under a
//! rule set.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::CircuitTensor;
use crate::rules::{apply_move, enumerate_moves, RuleSet};

#[derive(Debug, Clone)]
pub struct EquivalenceClass {
    /// Discovery order; index 0 is the input.
    pub members: Vec<CircuitTensor>,
    pub index: HashMap<CircuitTensor, usize>,
    /// For every member, the member index reached by each enumerated move
    /// (one entry per move, so repeated targets count with multiplicity).
    pub edges: Vec<Vec<usize>>,
}

impl EquivalenceClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Fails with [`Error::ClassCapExceeded`] once more than `cap` members appear.
pub fn enumerate_class(input: &CircuitTensor, ruleset: &RuleSet, cap: usize) -> Result<EquivalenceClass> {
    let mut members = vec![input.clone()];
    let mut index = HashMap::from([(input.clone(), 0usize)]);
    let mut edges = Vec::new();
    let mut next = 0;
    while next < members.len() {
        let current = members[next].clone();
        let mut out = Vec::new();
        for mv in enumerate_moves(ruleset, &current) {
            let child = apply_move(ruleset, &current, &mv)?;
            let id = match index.get(&child) {
                Some(&id) => id,
                None => {
                    if members.len() >= cap {
                        return Err(Error::ClassCapExceeded(cap));
                    }
                    let id = members.len();
                    index.insert(child.clone(), id);
                    members.push(child);
                    id
                }
            };
            out.push(id);
        }
        edges.push(out);
        next += 1;
    }
    Ok(EquivalenceClass { members, index, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GateToken, LatticeDims};
    use crate::rules::format;

    #[test]
    fn h_shift_class() {
        let rs = format::parse("ruleset t\nrule s\n  lhs\n    Idle H\n  rhs\n    H Idle\nend\n").unwrap();
        let dims = LatticeDims::linear(3, 1, 2).unwrap();
        let mut toks = vec![GateToken::IDLE; 3];
        toks[0] = GateToken::H;
        let c = CircuitTensor::from_tokens(dims, toks).unwrap();
        let class = enumerate_class(&c, &rs, 10).unwrap();
        assert_eq!(class.len(), 3);
        // Moves are their own inverses' partners, so the edge relation is symmetric.
        for (i, out) in class.edges.iter().enumerate() {
            for &j in out {
                assert!(class.edges[j].contains(&i));
            }
        }
        assert_eq!(enumerate_class(&c, &rs, 2).unwrap_err(), Error::ClassCapExceeded(2));
    }
}
