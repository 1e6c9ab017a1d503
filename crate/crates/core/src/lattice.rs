//! Circuit-as-lattice encoding.
//!
//! A circuit on `N_Q` qubits and `N_T` time steps is a dense array of
//! [`GateToken`]s, one per `(t, q)` site. Two-qubit gates occupy a control
//! token (which records the lattice axis of its partner) and a `BUSY` token on
//! the neighbouring qubit in the positive direction of that axis. Angles are
//! integer indices on the grid `2πk/M`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    Idle,
    H,
    CZ,
    #[serde(rename = "SWAP")]
    Swap,
    #[serde(rename = "BUSY")]
    Busy,
    RZ,
    RX,
    CP,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::Idle,
        GateKind::H,
        GateKind::CZ,
        GateKind::Swap,
        GateKind::Busy,
        GateKind::RZ,
        GateKind::RX,
        GateKind::CP,
    ];

    pub fn is_parametric(self) -> bool {
        matches!(self, GateKind::RZ | GateKind::RX | GateKind::CP)
    }

    /// Control token of a two-qubit gate.
    pub fn is_control(self) -> bool {
        matches!(self, GateKind::CZ | GateKind::Swap | GateKind::CP)
    }

    /// A gate instance is anchored on this token (everything except Idle and BUSY).
    pub fn is_gate(self) -> bool {
        !matches!(self, GateKind::Idle | GateKind::Busy)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Idle => "Idle",
            GateKind::H => "H",
            GateKind::CZ => "CZ",
            GateKind::Swap => "SWAP",
            GateKind::Busy => "BUSY",
            GateKind::RZ => "RZ",
            GateKind::RX => "RX",
            GateKind::CP => "CP",
        }
    }

    pub fn parse(s: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lattice axis along which a control token finds its `BUSY` partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Axis(pub u8);

/// One qudit state of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateToken {
    pub kind: GateKind,
    pub angle: Option<u64>,
    pub partner: Option<Axis>,
}

impl GateToken {
    pub const IDLE: GateToken = GateToken { kind: GateKind::Idle, angle: None, partner: None };
    pub const BUSY: GateToken = GateToken { kind: GateKind::Busy, angle: None, partner: None };
    pub const H: GateToken = GateToken { kind: GateKind::H, angle: None, partner: None };

    pub fn single(kind: GateKind) -> Self {
        GateToken { kind, angle: None, partner: None }
    }

    pub fn rotation(kind: GateKind, angle: u64) -> Self {
        GateToken { kind, angle: Some(angle), partner: None }
    }

    pub fn control(kind: GateKind, axis: Axis, angle: Option<u64>) -> Self {
        GateToken { kind, angle, partner: Some(axis) }
    }

    pub fn is_idle(&self) -> bool {
        self.kind == GateKind::Idle
    }

    /// Checks the per-token invariants, independent of neighbours.
    pub fn well_formed(&self) -> bool {
        self.kind.is_parametric() == self.angle.is_some()
            && self.kind.is_control() == self.partner.is_some()
    }
}

impl fmt::Display for GateToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(k) = self.angle {
            write!(f, "({k})")?;
        }
        if let Some(a) = self.partner {
            write!(f, "+{}", axis_name(a))?;
        }
        Ok(())
    }
}

pub fn axis_name(a: Axis) -> &'static str {
    match a.0 {
        0 => "x",
        1 => "y",
        _ => "?",
    }
}

/// A lattice site: time step and flattened qubit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub t: usize,
    pub q: usize,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, q={})", self.t, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeDims {
    pub time_steps: usize,
    /// One extent per qubit axis (one or two axes).
    pub extents: Vec<usize>,
    /// Angle grid modulus `M`; angle index `k` stands for `2πk/M`.
    pub angle_modulus: u64,
}

impl LatticeDims {
    pub fn new(time_steps: usize, extents: Vec<usize>, angle_modulus: u64) -> Result<Self> {
        let dims = LatticeDims { time_steps, extents, angle_modulus };
        dims.check()?;
        Ok(dims)
    }

    pub fn linear(time_steps: usize, qubits: usize, angle_modulus: u64) -> Result<Self> {
        Self::new(time_steps, vec![qubits], angle_modulus)
    }

    pub fn check(&self) -> Result<()> {
        if self.time_steps == 0 {
            return Err(Error::InvalidConfig("lattice needs at least one time step".into()));
        }
        if self.extents.is_empty() || self.extents.len() > 2 {
            return Err(Error::InvalidConfig("one or two qubit axes are supported".into()));
        }
        if self.extents.iter().any(|&e| e == 0) {
            return Err(Error::InvalidConfig("qubit extents must be positive".into()));
        }
        if !self.angle_modulus.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "angle modulus {} is not a power of two",
                self.angle_modulus
            )));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn num_axes(&self) -> usize {
        self.extents.len()
    }

    pub fn num_sites(&self) -> usize {
        self.time_steps * self.num_qubits()
    }

    pub fn stride(&self, axis: Axis) -> usize {
        self.extents[axis.0 as usize + 1..].iter().product()
    }

    pub fn coords(&self, q: usize) -> Vec<usize> {
        let mut out = vec![0; self.extents.len()];
        let mut rem = q;
        for a in (0..self.extents.len()).rev() {
            out[a] = rem % self.extents[a];
            rem /= self.extents[a];
        }
        out
    }

    pub fn index_of(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.extents.len() {
            return None;
        }
        let mut q = 0;
        for (c, e) in coords.iter().zip(&self.extents) {
            if c >= e {
                return None;
            }
            q = q * e + c;
        }
        Some(q)
    }

    /// Neighbour of `q` one step along `axis`, if it stays inside the lattice.
    pub fn step(&self, q: usize, axis: Axis, by: usize) -> Option<usize> {
        let a = axis.0 as usize;
        if a >= self.extents.len() {
            return None;
        }
        let stride = self.stride(axis);
        if (q / stride) % self.extents[a] + by >= self.extents[a] {
            return None;
        }
        Some(q + by * stride)
    }

    /// Reverse of [`LatticeDims::step`] with `by = 1`.
    pub fn step_back(&self, q: usize, axis: Axis) -> Option<usize> {
        let a = axis.0 as usize;
        if a >= self.extents.len() {
            return None;
        }
        let stride = self.stride(axis);
        if (q / stride) % self.extents[a] == 0 {
            return None;
        }
        Some(q - stride)
    }
}

/// A single `(t, q)` qudit lattice holding one token per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CircuitTensor {
    dims: LatticeDims,
    sites: Vec<GateToken>,
}

impl CircuitTensor {
    pub fn idle(dims: LatticeDims) -> Self {
        let n = dims.num_sites();
        CircuitTensor { dims, sites: vec![GateToken::IDLE; n] }
    }

    /// Wraps a raw token array without validation; see [`validate`].
    pub fn from_tokens(dims: LatticeDims, sites: Vec<GateToken>) -> Result<Self> {
        if sites.len() != dims.num_sites() {
            return Err(Error::DimensionMismatch(sites.len(), dims.num_sites()));
        }
        Ok(CircuitTensor { dims, sites })
    }

    pub fn dims(&self) -> &LatticeDims {
        &self.dims
    }

    pub fn num_qubits(&self) -> usize {
        self.dims.num_qubits()
    }

    pub fn time_steps(&self) -> usize {
        self.dims.time_steps
    }

    pub fn tokens(&self) -> &[GateToken] {
        &self.sites
    }

    pub fn get(&self, t: usize, q: usize) -> GateToken {
        self.sites[t * self.dims.num_qubits() + q]
    }

    pub fn at(&self, site: Site) -> GateToken {
        self.get(site.t, site.q)
    }

    pub fn set(&mut self, site: Site, token: GateToken) {
        let nq = self.dims.num_qubits();
        self.sites[site.t * nq + site.q] = token;
    }

    pub fn step_tokens(&self, t: usize) -> &[GateToken] {
        let nq = self.dims.num_qubits();
        &self.sites[t * nq..(t + 1) * nq]
    }

    /// Qubit holding the BUSY partner of the control token at `(t, q)`.
    pub fn partner_of(&self, t: usize, q: usize) -> Option<usize> {
        let tok = self.get(t, q);
        tok.partner.and_then(|a| self.dims.step(q, a, 1))
    }

    pub fn gate_count(&self) -> usize {
        self.sites.iter().filter(|t| t.kind.is_gate()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    MalformedToken,
    AngleOutOfRange,
    UnpairedControl,
    OrphanBusy,
    PartnerOutsideLattice,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub site: Site,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::MalformedToken => "malformed token",
            ViolationKind::AngleOutOfRange => "angle index out of range",
            ViolationKind::UnpairedControl => "unpaired control",
            ViolationKind::OrphanBusy => "orphan BUSY",
            ViolationKind::PartnerOutsideLattice => "partner outside lattice",
        };
        write!(f, "{what} at {}", self.site)
    }
}

pub type ValidationReport = Vec<Violation>;

/// Checks every structural invariant of the encoding. Never fails; an empty
/// report means the tensor is valid.
pub fn validate(tensor: &CircuitTensor) -> ValidationReport {
    let dims = tensor.dims();
    let nq = dims.num_qubits();
    let mut report = Vec::new();
    let mut claimed = vec![false; tensor.sites.len()];
    for t in 0..dims.time_steps {
        for q in 0..nq {
            let site = Site { t, q };
            let tok = tensor.get(t, q);
            if !tok.well_formed() {
                report.push(Violation { site, kind: ViolationKind::MalformedToken });
                continue;
            }
            if let Some(k) = tok.angle {
                if k >= dims.angle_modulus {
                    report.push(Violation { site, kind: ViolationKind::AngleOutOfRange });
                }
            }
            if let Some(axis) = tok.partner {
                match dims.step(q, axis, 1) {
                    None => report
                        .push(Violation { site, kind: ViolationKind::PartnerOutsideLattice }),
                    Some(p) if tensor.get(t, p).kind == GateKind::Busy => {
                        claimed[t * nq + p] = true;
                    }
                    Some(_) => {
                        report.push(Violation { site, kind: ViolationKind::UnpairedControl })
                    }
                }
            }
        }
    }
    for t in 0..dims.time_steps {
        for q in 0..nq {
            let tok = tensor.get(t, q);
            if tok.kind == GateKind::Busy && tok.well_formed() && !claimed[t * nq + q] {
                report.push(Violation { site: Site { t, q }, kind: ViolationKind::OrphanBusy });
            }
        }
    }
    report
}

/// `(G, t, q)` instruction form of a circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instruction {
    pub kind: GateKind,
    pub angle: Option<u64>,
    pub t: usize,
    pub qubit: Vec<usize>,
    pub partner: Option<Vec<usize>>,
}

impl Instruction {
    pub fn new(kind: GateKind, t: usize, qubit: Vec<usize>) -> Self {
        Instruction { kind, angle: None, t, qubit, partner: None }
    }

    pub fn with_angle(mut self, k: u64) -> Self {
        self.angle = Some(k);
        self
    }

    pub fn with_partner(mut self, p: Vec<usize>) -> Self {
        self.partner = Some(p);
        self
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} t={} q={:?}", self.kind, self.t, self.qubit)?;
        if let Some(k) = self.angle {
            write!(f, " k={k}")?;
        }
        if let Some(p) = &self.partner {
            write!(f, " p={p:?}")?;
        }
        Ok(())
    }
}

pub type InstructionList = Vec<Instruction>;

pub fn encode_instructions(list: &[Instruction], dims: &LatticeDims) -> Result<CircuitTensor> {
    dims.check()?;
    let mut tensor = CircuitTensor::idle(dims.clone());
    let nq = dims.num_qubits();
    let mut taken = vec![false; dims.num_sites()];
    let mut claim = |site: Site, tensor: &mut CircuitTensor, tok: GateToken| -> Result<()> {
        let idx = site.t * nq + site.q;
        if taken[idx] {
            return Err(Error::SiteCollision(site));
        }
        taken[idx] = true;
        tensor.set(site, tok);
        Ok(())
    };
    for ins in list {
        if matches!(ins.kind, GateKind::Idle | GateKind::Busy) {
            return Err(Error::InvalidInstruction(format!("{ins}: not an executable gate")));
        }
        if ins.kind.is_parametric() != ins.angle.is_some() {
            return Err(Error::InvalidInstruction(format!("{ins}: angle presence mismatch")));
        }
        if let Some(k) = ins.angle {
            if k >= dims.angle_modulus {
                return Err(Error::InvalidInstruction(format!("{ins}: angle index >= modulus")));
            }
        }
        let q = dims.index_of(&ins.qubit).ok_or(Error::OutOfBounds(Site { t: ins.t, q: usize::MAX }))?;
        if ins.t >= dims.time_steps {
            return Err(Error::OutOfBounds(Site { t: ins.t, q }));
        }
        if ins.kind.is_control() {
            let partner = ins
                .partner
                .as_ref()
                .ok_or_else(|| Error::InvalidInstruction(format!("{ins}: missing partner")))?;
            let p = dims
                .index_of(partner)
                .ok_or(Error::OutOfBounds(Site { t: ins.t, q: usize::MAX }))?;
            let axis = (0..dims.num_axes() as u8)
                .map(Axis)
                .find(|&a| dims.step(q, a, 1) == Some(p))
                .ok_or_else(|| Error::NonAdjacentPair(ins.to_string()))?;
            claim(Site { t: ins.t, q }, &mut tensor, GateToken::control(ins.kind, axis, ins.angle))?;
            claim(Site { t: ins.t, q: p }, &mut tensor, GateToken::BUSY)?;
        } else {
            if ins.partner.is_some() {
                return Err(Error::InvalidInstruction(format!("{ins}: single-qubit gate with partner")));
            }
            claim(
                Site { t: ins.t, q },
                &mut tensor,
                GateToken { kind: ins.kind, angle: ins.angle, partner: None },
            )?;
        }
    }
    Ok(tensor)
}

pub fn decode_instructions(tensor: &CircuitTensor) -> Result<InstructionList> {
    let report = validate(tensor);
    if let Some(v) = report.first() {
        return Err(Error::InvalidTensor(v.to_string()));
    }
    let dims = tensor.dims();
    let mut out = Vec::new();
    for t in 0..dims.time_steps {
        for q in 0..dims.num_qubits() {
            let tok = tensor.get(t, q);
            if !tok.kind.is_gate() {
                continue;
            }
            let partner = tensor.partner_of(t, q).map(|p| dims.coords(p));
            out.push(Instruction { kind: tok.kind, angle: tok.angle, t, qubit: dims.coords(q), partner });
        }
    }
    Ok(out)
}

pub fn fully_idle_steps(tensor: &CircuitTensor) -> BTreeSet<usize> {
    (0..tensor.time_steps())
        .filter(|&t| tensor.step_tokens(t).iter().all(GateToken::is_idle))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims2x1(t: usize) -> LatticeDims {
        LatticeDims::new(t, vec![2, 1], 16).unwrap()
    }

    #[test]
    fn vacuum_is_valid() {
        let t = CircuitTensor::idle(LatticeDims::new(1, vec![2, 2], 16).unwrap());
        assert!(validate(&t).is_empty());
    }

    #[test]
    fn unpaired_control_reported() {
        let dims = LatticeDims::new(1, vec![2, 2], 16).unwrap();
        let mut t = CircuitTensor::idle(dims);
        t.set(Site { t: 0, q: 0 }, GateToken::control(GateKind::CP, Axis(0), Some(3)));
        let r = validate(&t);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].kind, ViolationKind::UnpairedControl);
    }

    #[test]
    fn orphan_busy_reported() {
        let dims = LatticeDims::new(1, vec![2, 2], 16).unwrap();
        let mut t = CircuitTensor::idle(dims.clone());
        let q = dims.index_of(&[1, 0]).unwrap();
        t.set(Site { t: 0, q }, GateToken::BUSY);
        let r = validate(&t);
        assert_eq!(r, vec![Violation { site: Site { t: 0, q }, kind: ViolationKind::OrphanBusy }]);
    }

    #[test]
    fn malformed_tokens_do_not_abort() {
        let dims = LatticeDims::linear(1, 3, 16).unwrap();
        let bad = vec![
            GateToken { kind: GateKind::RZ, angle: None, partner: None },
            GateToken { kind: GateKind::Busy, angle: Some(2), partner: None },
            GateToken { kind: GateKind::CP, angle: Some(1), partner: Some(Axis(0)) },
        ];
        let t = CircuitTensor::from_tokens(dims, bad).unwrap();
        let r = validate(&t);
        assert_eq!(r.len(), 3);
        assert!(r.iter().any(|v| v.kind == ViolationKind::PartnerOutsideLattice));
    }

    #[test]
    fn encode_empty_and_single() {
        let dims = LatticeDims::linear(2, 4, 16).unwrap();
        let t = encode_instructions(&[], &dims).unwrap();
        assert!(t.tokens().iter().all(GateToken::is_idle));

        let dims = LatticeDims::linear(1, 1, 16).unwrap();
        let t = encode_instructions(&[Instruction::new(GateKind::H, 0, vec![0])], &dims).unwrap();
        assert_eq!(t.tokens(), &[GateToken::H]);
    }

    #[test]
    fn encode_cp_pair_round_trips() {
        let dims = dims2x1(1);
        let ins = Instruction::new(GateKind::CP, 0, vec![0, 0]).with_angle(8).with_partner(vec![1, 0]);
        let t = encode_instructions(std::slice::from_ref(&ins), &dims).unwrap();
        assert!(validate(&t).is_empty());
        assert_eq!(t.get(0, 0), GateToken::control(GateKind::CP, Axis(0), Some(8)));
        assert_eq!(t.get(0, 1), GateToken::BUSY);
        assert_eq!(decode_instructions(&t).unwrap(), vec![ins]);
    }

    #[test]
    fn encode_errors() {
        let dims = LatticeDims::linear(2, 3, 16).unwrap();
        let far = Instruction::new(GateKind::CZ, 0, vec![0]).with_partner(vec![2]);
        assert!(matches!(encode_instructions(&[far], &dims), Err(Error::NonAdjacentPair(_))));
        let back = Instruction::new(GateKind::CZ, 0, vec![1]).with_partner(vec![0]);
        assert!(matches!(encode_instructions(&[back], &dims), Err(Error::NonAdjacentPair(_))));
        let oob = Instruction::new(GateKind::H, 2, vec![0]);
        assert!(matches!(encode_instructions(&[oob], &dims), Err(Error::OutOfBounds(_))));
        let clash = [
            Instruction::new(GateKind::CZ, 0, vec![0]).with_partner(vec![1]),
            Instruction::new(GateKind::H, 0, vec![1]),
        ];
        assert!(matches!(encode_instructions(&clash, &dims), Err(Error::SiteCollision(_))));
    }

    #[test]
    fn decode_rejects_invalid() {
        let dims = LatticeDims::linear(1, 2, 16).unwrap();
        let mut t = CircuitTensor::idle(dims);
        t.set(Site { t: 0, q: 1 }, GateToken::BUSY);
        assert!(matches!(decode_instructions(&t), Err(Error::InvalidTensor(_))));
    }

    #[test]
    fn idle_steps() {
        let dims = LatticeDims::linear(3, 4, 16).unwrap();
        let mut t = CircuitTensor::idle(dims);
        assert_eq!(fully_idle_steps(&t), BTreeSet::from([0, 1, 2]));
        t.set(Site { t: 1, q: 0 }, GateToken::H);
        assert_eq!(fully_idle_steps(&t), BTreeSet::from([0, 2]));
    }

    #[test]
    fn coords_and_steps_2d() {
        let dims = LatticeDims::new(1, vec![3, 4], 16).unwrap();
        for q in 0..12 {
            assert_eq!(dims.index_of(&dims.coords(q)), Some(q));
        }
        let q = dims.index_of(&[1, 3]).unwrap();
        assert_eq!(dims.step(q, Axis(1), 1), None);
        assert_eq!(dims.step(q, Axis(0), 1), dims.index_of(&[2, 3]));
        assert_eq!(dims.step_back(dims.index_of(&[2, 3]).unwrap(), Axis(0)), Some(q));
    }
}
