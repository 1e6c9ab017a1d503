//! Infidelity cost of a circuit lattice.
//!
//! The cost is a sum of per-time-step contributions:
//!
//! * `i_G` for every gate instance (charged on the control token, BUSY is free),
//! * `x_G(r)` for every pair of qubits belonging to two distinct simultaneous
//!   gates of crosstalking kinds,
//! * `i_Idle` for every idle site, minus `N_Q · i_Idle` for a completely idle step,
//! * in swap-area steps (first and last) only a flat penalty for every gate
//!   instance whose kind is not free there.
//!
//! Because the cost decomposes over time steps, a local rewrite only has to
//! re-evaluate the steps it touches.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CircuitTensor, GateKind, GateToken, LatticeDims, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Manhattan,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            DistanceMetric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// `x(r) = coefficient / r^exponent` between simultaneous gates of `kind`
/// (and, optionally, of the `couples_with` kinds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkKernel {
    pub kind: GateKind,
    pub coefficient: f64,
    pub exponent: f64,
    #[serde(default)]
    pub metric: DistanceMetric,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub couples_with: Vec<GateKind>,
}

impl CrosstalkKernel {
    pub fn value(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::ZeroDistance);
        }
        Ok(self.coefficient / r.powf(self.exponent))
    }

    fn couples(&self, a: GateKind, b: GateKind) -> bool {
        let ok = |k: GateKind| k == self.kind || self.couples_with.contains(&k);
        (a == self.kind && ok(b)) || (b == self.kind && ok(a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapArea {
    pub enabled: bool,
    /// Kinds that cost nothing inside the swap area (Idle and BUSY always do).
    pub free_kinds: Vec<GateKind>,
    /// Charged once per gate instance of any other kind inside the swap area.
    pub penalty: f64,
}

impl Default for SwapArea {
    fn default() -> Self {
        SwapArea { enabled: false, free_kinds: vec![GateKind::Swap], penalty: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub name: String,
    /// Number of qubit axes the machine is laid out on.
    pub axes: usize,
    pub gate_infidelity: BTreeMap<GateKind, f64>,
    pub idle_infidelity: f64,
    #[serde(default)]
    pub crosstalk: Vec<CrosstalkKernel>,
    #[serde(default)]
    pub swap_area: SwapArea,
    /// 1 counts each unordered qubit pair once; 2 reproduces the ordered sum.
    #[serde(default = "one")]
    pub pair_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl MachineSpec {
    pub fn kernel(&self, kind: GateKind) -> Option<&CrosstalkKernel> {
        self.crosstalk.iter().find(|k| k.kind == kind)
    }

    /// Warnings for parameters outside the small-infidelity regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (k, v) in &self.gate_infidelity {
            if *v > 1e-2 {
                w.push(format!("i_{k} = {v:e} exceeds 1e-2"));
            }
        }
        if self.idle_infidelity > 1e-2 {
            w.push(format!("i_Idle = {:e} exceeds 1e-2", self.idle_infidelity));
        }
        w
    }

    pub fn check(&self) -> Result<()> {
        let bad = |v: f64| !(v.is_finite() && v >= 0.0);
        if self.gate_infidelity.values().any(|&v| bad(v)) || bad(self.idle_infidelity) {
            return Err(Error::InvalidConfig("infidelities must be finite and >= 0".into()));
        }
        for k in &self.crosstalk {
            if bad(k.coefficient) || !(k.exponent > 0.0) {
                return Err(Error::InvalidConfig(format!("bad crosstalk kernel for {}", k.kind)));
            }
        }
        if bad(self.swap_area.penalty) || !(self.pair_factor > 0.0) {
            return Err(Error::InvalidConfig("bad swap-area penalty or pair factor".into()));
        }
        Ok(())
    }

    pub fn smallest_gate_infidelity(&self) -> Option<f64> {
        self.gate_infidelity
            .values()
            .copied()
            .chain(std::iter::once(self.idle_infidelity))
            .filter(|&v| v > 0.0)
            .min_by(f64::total_cmp)
    }
}

pub fn crosstalk_term(machine: &MachineSpec, kind: GateKind, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    match machine.kernel(kind) {
        Some(k) => k.value(r),
        None => Ok(0.0),
    }
}

/// Cost evaluator bound to one lattice shape.
#[derive(Debug, Clone)]
pub struct CostModel {
    machine: MachineSpec,
    dims: LatticeDims,
    gate_cost: [Option<f64>; 8],
    coords: Vec<Vec<f64>>,
    kernels: Vec<CrosstalkKernel>,
    /// Per kernel, `x(r)·pair_factor` for every qubit pair; empty on lattices
    /// too large to tabulate.
    table: Vec<Vec<f64>>,
}

/// Largest qubit count whose pair table is precomputed.
const TABLE_MAX_QUBITS: usize = 1024;

/// A gate instance in one step: kind, first qubit, partner qubit.
type Instance = (GateKind, usize, Option<usize>);

fn kind_slot(kind: GateKind) -> usize {
    kind as usize
}

impl CostModel {
    pub fn new(machine: &MachineSpec, dims: &LatticeDims) -> Result<Self> {
        machine.check()?;
        let mut gate_cost = [None; 8];
        for (k, v) in &machine.gate_infidelity {
            gate_cost[kind_slot(*k)] = Some(*v);
        }
        let coords = (0..dims.num_qubits())
            .map(|q| dims.coords(q).into_iter().map(|c| c as f64).collect())
            .collect();
        let kernels: Vec<CrosstalkKernel> =
            machine.crosstalk.iter().filter(|k| k.coefficient > 0.0).cloned().collect();
        let mut model = CostModel { machine: machine.clone(), dims: dims.clone(), gate_cost, coords, kernels, table: Vec::new() };
        let nq = dims.num_qubits();
        if nq <= TABLE_MAX_QUBITS {
            for kernel in &model.kernels {
                let mut row = vec![0.0; nq * nq];
                for qa in 0..nq {
                    for qb in 0..nq {
                        if qa != qb {
                            let r = kernel.metric.distance(&model.coords[qa], &model.coords[qb]);
                            row[qa * nq + qb] = kernel.value(r)? * machine.pair_factor;
                        }
                    }
                }
                model.table.push(row);
            }
        }
        Ok(model)
    }

    fn pair_value(&self, k: usize, qa: usize, qb: usize) -> Result<f64> {
        match self.table.get(k) {
            Some(row) => Ok(row[qa * self.dims.num_qubits() + qb]),
            None => {
                let kernel = &self.kernels[k];
                let r = kernel.metric.distance(&self.coords[qa], &self.coords[qb]);
                Ok(kernel.value(r)? * self.machine.pair_factor)
            }
        }
    }

    fn instances(&self, tokens: &[GateToken]) -> Vec<Instance> {
        tokens
            .iter()
            .enumerate()
            .filter(|(_, tok)| tok.kind.is_gate())
            .map(|(q, tok)| (tok.kind, q, tok.partner.and_then(|a| self.dims.step(q, a, 1))))
            .collect()
    }

    /// Crosstalk between two gate instances, summed over kernels.
    fn instance_pair(&self, a: &Instance, b: &Instance) -> Result<f64> {
        let mut x = 0.0;
        for (k, kernel) in self.kernels.iter().enumerate() {
            if !kernel.couples(a.0, b.0) {
                continue;
            }
            for qa in std::iter::once(a.1).chain(a.2) {
                for qb in std::iter::once(b.1).chain(b.2) {
                    x += self.pair_value(k, qa, qb)?;
                }
            }
        }
        Ok(x)
    }

    fn instance_at(&self, tokens: &[GateToken], q: usize) -> Option<Instance> {
        let tok = tokens[q];
        tok.kind.is_gate().then(|| (tok.kind, q, tok.partner.and_then(|a| self.dims.step(q, a, 1))))
    }

    /// Crosstalk of every pair with at least one instance touching `touched`.
    fn local_crosstalk(&self, tokens: &[GateToken], touched: &[usize]) -> Result<f64> {
        let hit = |i: &Instance| touched.contains(&i.1) || i.2.is_some_and(|p| touched.contains(&p));
        let mut x = 0.0;
        for qa in 0..tokens.len() {
            let Some(a) = self.instance_at(tokens, qa).filter(|a| hit(a)) else { continue };
            for qb in 0..tokens.len() {
                if qb == qa {
                    continue;
                }
                let Some(b) = self.instance_at(tokens, qb) else { continue };
                // Each unordered pair once: touched-untouched from the touched
                // side, touched-touched from the lower qubit.
                if !hit(&b) || qa < qb {
                    x += self.instance_pair(&a, &b)?;
                }
            }
        }
        Ok(x)
    }

    pub fn machine(&self) -> &MachineSpec {
        &self.machine
    }

    pub fn dims(&self) -> &LatticeDims {
        &self.dims
    }

    pub fn is_swap_step(&self, t: usize) -> bool {
        self.machine.swap_area.enabled && (t == 0 || t + 1 == self.dims.time_steps)
    }

    fn gate_infidelity(&self, kind: GateKind) -> Result<f64> {
        self.gate_cost[kind_slot(kind)].ok_or_else(|| Error::UnknownGateKind(kind.name().into()))
    }

    /// Contribution of time step `t` holding `tokens`.
    pub fn step_cost(&self, t: usize, tokens: &[GateToken]) -> Result<f64> {
        debug_assert_eq!(tokens.len(), self.dims.num_qubits());
        if self.is_swap_step(t) {
            let area = &self.machine.swap_area;
            let mut cost = 0.0;
            for tok in tokens {
                if tok.kind.is_gate() && !area.free_kinds.contains(&tok.kind) {
                    cost += area.penalty;
                }
            }
            return Ok(cost);
        }
        let (mut cost, empty) = self.step_base(tokens)?;
        if !empty && !self.kernels.is_empty() {
            cost += self.step_crosstalk(tokens)?;
        }
        Ok(cost)
    }

    fn step_crosstalk(&self, tokens: &[GateToken]) -> Result<f64> {
        let all = self.instances(tokens);
        let mut x = 0.0;
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                x += self.instance_pair(a, b)?;
            }
        }
        Ok(x)
    }

    /// Step cost without crosstalk; fully idle steps cost nothing.
    fn step_base(&self, tokens: &[GateToken]) -> Result<(f64, bool)> {
        let mut idle = 0usize;
        let mut gates = 0.0;
        for tok in tokens {
            match tok.kind {
                GateKind::Idle => idle += 1,
                GateKind::Busy => {}
                k => gates += self.gate_infidelity(k)?,
            }
        }
        if idle == tokens.len() {
            return Ok((0.0, true));
        }
        Ok((gates + idle as f64 * self.machine.idle_infidelity, false))
    }

    /// Every crosstalking qubit pair `(qa, qb, x)` of one time step, with the
    /// pair factor already applied.
    pub fn crosstalk_pairs(&self, tokens: &[GateToken]) -> Result<Vec<(usize, usize, f64)>> {
        let mut out = Vec::new();
        if self.kernels.is_empty() {
            return Ok(out);
        }
        let instances = self.instances(tokens);
        for (k, kernel) in self.kernels.iter().enumerate() {
            for (i, a) in instances.iter().enumerate() {
                for b in &instances[i + 1..] {
                    if !kernel.couples(a.0, b.0) {
                        continue;
                    }
                    for qa in std::iter::once(a.1).chain(a.2) {
                        for qb in std::iter::once(b.1).chain(b.2) {
                            out.push((qa, qb, self.pair_value(k, qa, qb)?));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn step_costs(&self, tensor: &CircuitTensor) -> Result<Vec<f64>> {
        (0..tensor.time_steps()).map(|t| self.step_cost(t, tensor.step_tokens(t))).collect()
    }

    pub fn total(&self, tensor: &CircuitTensor) -> Result<f64> {
        Ok(self.step_costs(tensor)?.iter().sum())
    }

    /// Change in total cost if `patch` were applied to `tensor`.
    pub fn delta(&self, tensor: &CircuitTensor, patch: &[PatchEntry]) -> Result<f64> {
        let steps = check_patch(tensor, patch)?;
        let nq = self.dims.num_qubits();
        let mut delta = 0.0;
        let mut buf: Vec<GateToken> = Vec::with_capacity(nq);
        let mut touched = Vec::new();
        for t in steps {
            let old = tensor.step_tokens(t);
            buf.clear();
            buf.extend_from_slice(old);
            touched.clear();
            for e in patch.iter().filter(|e| e.site.t == t) {
                buf[e.site.q] = e.new;
                touched.push(e.site.q);
            }
            if self.is_swap_step(t) {
                delta += self.step_cost(t, &buf)? - self.step_cost(t, old)?;
                continue;
            }
            // Pairs between two untouched gates are the same on both sides.
            delta += self.step_base(&buf)?.0 - self.step_base(old)?.0;
            if !self.kernels.is_empty() {
                delta += self.local_crosstalk(&buf, &touched)? - self.local_crosstalk(old, &touched)?;
            }
        }
        Ok(delta)
    }
}

/// One site rewrite: the token expected at `site` and its replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchEntry {
    pub site: Site,
    pub old: GateToken,
    pub new: GateToken,
}

impl PatchEntry {
    pub fn reversed(self) -> Self {
        PatchEntry { site: self.site, old: self.new, new: self.old }
    }
}

pub fn reverse_patch(patch: &[PatchEntry]) -> Vec<PatchEntry> {
    patch.iter().map(|e| e.reversed()).collect()
}

/// Checks a patch against `tensor` and returns the affected time steps.
fn check_patch(tensor: &CircuitTensor, patch: &[PatchEntry]) -> Result<BTreeSet<usize>> {
    let mut seen = BTreeSet::new();
    for e in patch {
        if e.site.t >= tensor.time_steps() || e.site.q >= tensor.num_qubits() {
            return Err(Error::InvalidPatch(format!("site {} outside lattice", e.site)));
        }
        if !seen.insert(e.site) {
            return Err(Error::InvalidPatch(format!("site {} patched twice", e.site)));
        }
        if tensor.at(e.site) != e.old {
            return Err(Error::InvalidPatch(format!("site {} does not hold {}", e.site, e.old)));
        }
    }
    Ok(seen.into_iter().map(|s| s.t).collect())
}

pub fn apply_patch(tensor: &CircuitTensor, patch: &[PatchEntry]) -> Result<CircuitTensor> {
    let mut out = tensor.clone();
    apply_patch_in_place(&mut out, patch)?;
    Ok(out)
}

pub fn apply_patch_in_place(tensor: &mut CircuitTensor, patch: &[PatchEntry]) -> Result<()> {
    check_patch(tensor, patch)?;
    for e in patch {
        tensor.set(e.site, e.new);
    }
    Ok(())
}

pub fn total_infidelity(tensor: &CircuitTensor, machine: &MachineSpec) -> Result<f64> {
    CostModel::new(machine, tensor.dims())?.total(tensor)
}

pub fn delta_infidelity(
    tensor: &CircuitTensor,
    patch: &[PatchEntry],
    machine: &MachineSpec,
) -> Result<f64> {
    CostModel::new(machine, tensor.dims())?.delta(tensor, patch)
}

/// Diagonal of the infidelity Hamiltonian on an explicit circuit basis.
pub fn infidelity_over_basis(circuits: &[CircuitTensor], machine: &MachineSpec) -> Result<Vec<f64>> {
    let mut model: Option<CostModel> = None;
    circuits
        .iter()
        .map(|c| {
            if model.as_ref().map(|m| m.dims() != c.dims()).unwrap_or(true) {
                model = Some(CostModel::new(machine, c.dims())?);
            }
            model.as_ref().expect("model initialised").total(c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{encode_instructions, Axis, Instruction};
    use crate::presets;

    #[test]
    fn crosstalk_kernel_values() {
        let m = presets::ths_machine();
        assert_eq!(crosstalk_term(&m, GateKind::CP, 1.0).unwrap(), 2e-5);
        assert_eq!(crosstalk_term(&m, GateKind::CP, 2.0).unwrap(), 3.125e-7);
        assert_eq!(crosstalk_term(&m, GateKind::RZ, 3.0).unwrap(), 0.0);
        assert_eq!(crosstalk_term(&m, GateKind::CP, 0.0), Err(Error::ZeroDistance));
    }

    #[test]
    fn single_h_example_one() {
        let m = presets::example1_machine_without_swap_area();
        let dims = LatticeDims::linear(1, 1, 2).unwrap();
        let t = encode_instructions(&[Instruction::new(GateKind::H, 0, vec![0])], &dims).unwrap();
        assert_eq!(total_infidelity(&t, &m).unwrap(), 0.5e-5);
    }

    #[test]
    fn idle_step_refunded() {
        let m = presets::example1_machine_without_swap_area();
        let t = CircuitTensor::idle(LatticeDims::linear(1, 2, 2).unwrap());
        assert_eq!(total_infidelity(&t, &m).unwrap(), 0.0);
    }

    /// Brute force over all ordered qubit pairs of distinct gates, halved.
    fn brute_crosstalk(pairs: &[[(f64, f64); 2]], c: f64, p: f64) -> f64 {
        let mut s = 0.0;
        for (i, a) in pairs.iter().enumerate() {
            for (j, b) in pairs.iter().enumerate() {
                if i == j {
                    continue;
                }
                for qa in a {
                    for qb in b {
                        let r = ((qa.0 - qb.0).powi(2) + (qa.1 - qb.1).powi(2)).sqrt();
                        s += c / r.powf(p);
                    }
                }
            }
        }
        s / 2.0
    }

    #[test]
    fn parallel_cp_crosstalk() {
        let m = presets::ths_machine();
        let dims = LatticeDims::new(1, vec![2, 2], 16).unwrap();
        let ins = [
            Instruction::new(GateKind::CP, 0, vec![0, 0]).with_angle(3).with_partner(vec![0, 1]),
            Instruction::new(GateKind::CP, 0, vec![1, 0]).with_angle(3).with_partner(vec![1, 1]),
        ];
        let t = encode_instructions(&ins, &dims).unwrap();
        let oracle = 2.0 * 5e-5
            + brute_crosstalk(&[[(0., 0.), (0., 1.)], [(1., 0.), (1., 1.)]], 2e-5, 6.0);
        let got = total_infidelity(&t, &m).unwrap();
        assert!((got - oracle).abs() < 1e-18);
        assert!((got - 1.45e-4).abs() < 1e-18);
    }

    #[test]
    fn pair_factor_doubles_crosstalk() {
        let mut m = presets::ths_machine();
        m.pair_factor = 2.0;
        let dims = LatticeDims::new(1, vec![2, 2], 16).unwrap();
        let ins = [
            Instruction::new(GateKind::CP, 0, vec![0, 0]).with_angle(3).with_partner(vec![0, 1]),
            Instruction::new(GateKind::CP, 0, vec![1, 0]).with_angle(3).with_partner(vec![1, 1]),
        ];
        let t = encode_instructions(&ins, &dims).unwrap();
        assert!((total_infidelity(&t, &m).unwrap() - (1e-4 + 9e-5)).abs() < 1e-18);
    }

    #[test]
    fn manhattan_metric() {
        let mut m = presets::ths_machine();
        m.crosstalk[0].metric = DistanceMetric::Manhattan;
        let dims = LatticeDims::new(1, vec![2, 2], 16).unwrap();
        let mut t = CircuitTensor::idle(dims.clone());
        t.set(Site { t: 0, q: 0 }, GateToken::control(GateKind::CP, Axis(1), Some(1)));
        t.set(Site { t: 0, q: 1 }, GateToken::BUSY);
        t.set(Site { t: 0, q: 2 }, GateToken::control(GateKind::CP, Axis(1), Some(1)));
        t.set(Site { t: 0, q: 3 }, GateToken::BUSY);
        let x = 2e-5 * (1.0 + 1.0 / 64.0 + 1.0 / 64.0 + 1.0);
        assert!((total_infidelity(&t, &m).unwrap() - (1e-4 + x)).abs() < 1e-18);
    }

    #[test]
    fn delta_examples() {
        let m = presets::example1_machine_without_swap_area();
        let dims = LatticeDims::linear(2, 1, 2).unwrap();
        let t = encode_instructions(
            &[Instruction::new(GateKind::H, 0, vec![0]), Instruction::new(GateKind::H, 1, vec![0])],
            &dims,
        )
        .unwrap();
        assert_eq!(delta_infidelity(&t, &[], &m).unwrap(), 0.0);
        let patch: Vec<_> = (0..2)
            .map(|s| PatchEntry { site: Site { t: s, q: 0 }, old: GateToken::H, new: GateToken::IDLE })
            .collect();
        let d = delta_infidelity(&t, &patch, &m).unwrap();
        let after = apply_patch(&t, &patch).unwrap();
        let oracle = total_infidelity(&after, &m).unwrap() - total_infidelity(&t, &m).unwrap();
        assert!((d - oracle).abs() < 1e-20);
        assert!((d + 1.0e-5).abs() < 1e-20);
    }

    #[test]
    fn swap_area_costs() {
        let m = presets::example1_machine();
        let dims = LatticeDims::linear(3, 2, 2).unwrap();
        let ins = [
            Instruction::new(GateKind::Swap, 0, vec![0]).with_partner(vec![1]),
            Instruction::new(GateKind::H, 2, vec![1]),
            Instruction::new(GateKind::H, 1, vec![0]),
        ];
        let t = encode_instructions(&ins, &dims).unwrap();
        // swap-area SWAP free, middle H + one idle, H in last step penalised.
        let want = 0.5e-5 + 0.5e-5 + 5.0e-5;
        assert!((total_infidelity(&t, &m).unwrap() - want).abs() < 1e-18);
    }

    #[test]
    fn unknown_kind_is_error() {
        let m = presets::example1_machine_without_swap_area();
        let dims = LatticeDims::linear(1, 1, 16).unwrap();
        let t = encode_instructions(&[Instruction::new(GateKind::RZ, 0, vec![0]).with_angle(1)], &dims)
            .unwrap();
        assert!(matches!(total_infidelity(&t, &m), Err(Error::UnknownGateKind(_))));
    }

    #[test]
    fn basis_diagonal_is_elementwise() {
        let m = presets::example1_machine_without_swap_area();
        let c = CircuitTensor::idle(LatticeDims::linear(1, 3, 2).unwrap());
        assert_eq!(infidelity_over_basis(&[c], &m).unwrap(), vec![0.0]);
    }

    #[test]
    fn bad_patch_rejected() {
        let m = presets::example1_machine_without_swap_area();
        let t = CircuitTensor::idle(LatticeDims::linear(1, 1, 2).unwrap());
        let e = PatchEntry { site: Site { t: 0, q: 0 }, old: GateToken::H, new: GateToken::IDLE };
        assert!(matches!(delta_infidelity(&t, &[e], &m), Err(Error::InvalidPatch(_))));
    }
}
