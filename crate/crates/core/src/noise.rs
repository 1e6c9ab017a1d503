//! Noisy-gate trajectories used to cross-check the infidelity cost model.
//!
//! Every gate is written as `exp(−iθG/2)` around a nominal angle and executed
//! at `θ + ε` with `ε ~ N(0, σ²)`:
//!
//! * `RZ`, `RX`, `CP`: their own angle; `CZ` is `CP(π + ε)`,
//! * `H` and `SWAP`: generator equal to the gate itself at `θ = π`,
//! * idle sites: `RZ(ε)`, skipped on completely idle steps (which the cost
//!   model refunds),
//! * crosstalk: every qubit pair between two simultaneous coupled gates picks
//!   up `exp(−iε·ZZ/2)` with `σ = 2·sqrt(x(r))`, whose infidelity is `x(r)`.
//!
//! Swap-area steps run noiselessly.
//!
//! Each (trajectory, step, site) reads its noise from a fixed block of the
//! trajectory's stream, so two circuits simulated with the same seed see the
//! same draw wherever their gates coincide.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, MachineSpec};
use crate::error::{Error, Result};
use crate::lattice::{CircuitTensor, GateKind, GateToken};
use crate::semantics::{
    angle_of, apply_1q, apply_2q, apply_circuit, apply_diag_2q, cphase, gate_matrix, hadamard, rx, rz, swap, Matrix,
    MAX_DENSE_QUBITS,
};

/// Draws used by [`calibrate_sigma`].
pub const CALIBRATION_DRAWS: usize = 100_000;
pub const CALIBRATION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Estimate { mean, stderr: (var / n).sqrt() }
    }
}

/// `cos(ε/2)·G − i·sin(ε/2)·I`: the involutory gate `G` rotated by `ε` about itself.
fn involution_noise(g: &Matrix, eps: f64) -> Matrix {
    let (c, s) = ((eps / 2.0).cos(), (eps / 2.0).sin());
    let mut m = g.scale(C64::new(c, 0.0));
    for i in 0..m.dim {
        m.data[i * m.dim + i] -= C64::new(0.0, s);
    }
    m
}

/// The gate at its nominal angle plus `eps`.
pub fn perturbed_gate(kind: GateKind, theta: f64, eps: f64) -> Result<Matrix> {
    Ok(match kind {
        GateKind::RZ => rz(theta + eps),
        GateKind::RX => rx(theta + eps),
        GateKind::CP => cphase(theta + eps),
        GateKind::CZ => cphase(std::f64::consts::PI + eps),
        GateKind::H => involution_noise(&hadamard(), eps),
        GateKind::Swap => involution_noise(&swap(), eps),
        GateKind::Idle => rz(eps),
        GateKind::Busy => return Err(Error::UnknownGateKind("BUSY".into())),
    })
}

/// One noisy sample of `token`, `None` for BUSY (and for Idle, whose noise
/// depends on the step).
pub fn noisy_gate<R: Rng>(token: &GateToken, modulus: u64, sigma: f64, rng: &mut R) -> Result<Option<Matrix>> {
    if !token.kind.is_gate() {
        return Ok(None);
    }
    if sigma == 0.0 {
        return Ok(gate_matrix(token, modulus));
    }
    let eps: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
    let theta = token.angle.map_or(0.0, |k| angle_of(k, modulus));
    perturbed_gate(token.kind, theta, eps).map(Some)
}

/// `1 − |tr(U†V)|²/d²`.
pub fn entanglement_infidelity(u: &Matrix, v: &Matrix) -> f64 {
    let d = u.dim as f64;
    (1.0 - u.trace_adj_product(v).norm_sqr() / (d * d)).max(0.0)
}

fn infidelity_for_draws(kind: GateKind, theta: f64, sigma: f64, draws: &[f64]) -> Result<Vec<f64>> {
    let ideal = perturbed_gate(kind, theta, 0.0)?;
    draws.iter().map(|z| Ok(entanglement_infidelity(&ideal, &perturbed_gate(kind, theta, sigma * z)?))).collect()
}

fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Monte-Carlo estimate of the mean entanglement infidelity at `sigma`.
pub fn gate_infidelity_mc(kind: GateKind, theta: f64, sigma: f64, n: usize, seed: u64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one draw".into()));
    }
    Ok(Estimate::of(&infidelity_for_draws(kind, theta, sigma, &normal_draws(n, seed))?))
}

/// Small-`σ` expansion `σ²/4 · (tr G²/d − (tr G/d)²)`.
pub fn infidelity_second_order(kind: GateKind, sigma: f64) -> f64 {
    let var = match kind {
        GateKind::CP | GateKind::CZ | GateKind::Swap => 0.75,
        GateKind::Busy => 0.0,
        _ => 1.0,
    };
    sigma * sigma / 4.0 * var
}

/// `σ` whose Monte-Carlo infidelity is within 5% of `target`. The same normal
/// draws are reused at every trial `σ`, so the estimate is monotone in `σ`.
pub fn calibrate_sigma(kind: GateKind, target: f64, n: usize, seed: u64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let draws = normal_draws(n.max(1), seed);
    let est = |s: f64| -> Result<f64> { Ok(Estimate::of(&infidelity_for_draws(kind, 0.0, s, &draws)?).mean) };
    let guess = (target / infidelity_second_order(kind, 1.0)).sqrt();
    let (mut lo, mut hi) = (0.0, 2.0 * guess);
    let (mut f_lo, mut f_hi) = (0.0, est(hi)?);
    while f_hi < target {
        if hi > 1e3 {
            return Err(Error::NonMonotoneEstimate);
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = est(hi)?;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = est(mid)?;
        if f < f_lo || f > f_hi {
            return Err(Error::NonMonotoneEstimate);
        }
        if ((f - target) / target).abs() <= CALIBRATION_TOLERANCE * 0.1 {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    let s = 0.5 * (lo + hi);
    if ((est(s)? - target) / target).abs() <= CALIBRATION_TOLERANCE {
        Ok(s)
    } else {
        Err(Error::NonMonotoneEstimate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gate_sigma: BTreeMap<GateKind, f64>,
    pub idle_sigma: f64,
    /// Include the crosstalk perturbation of the machine's kernels.
    pub crosstalk: bool,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel { gate_sigma: BTreeMap::new(), idle_sigma: 0.0, crosstalk: false }
    }

    /// Calibrates every gate kind (and idling) so its per-gate infidelity
    /// equals the machine's value.
    pub fn calibrated(machine: &MachineSpec, n: usize, seed: u64) -> Result<Self> {
        let mut gate_sigma = BTreeMap::new();
        for (&k, &i) in &machine.gate_infidelity {
            gate_sigma.insert(k, calibrate_sigma(k, i, n, seed)?);
        }
        let idle_sigma = calibrate_sigma(GateKind::Idle, machine.idle_infidelity, n, seed)?;
        Ok(NoiseModel { gate_sigma, idle_sigma, crosstalk: true })
    }
}

/// Stream words reserved for one noise draw.
const SLOT_WORDS: u128 = 256;

/// Positions `rng` at the block owned by the qubit pair `(a, b)` of step `t`
/// (`a == b` for single-site draws). Block 0 holds the input state.
fn seek(rng: &mut ChaCha8Rng, n: usize, t: usize, a: usize, b: usize) {
    let slot = ((t * n + a) * n + b) as u128 + 1;
    rng.set_word_pos(slot * SLOT_WORDS);
}

/// Applies one noisy sample of time step `t` to `state`.
fn apply_noisy_step(
    state: &mut [C64],
    tensor: &CircuitTensor,
    t: usize,
    noise: &NoiseModel,
    model: &CostModel,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = tensor.num_qubits();
    let m = tensor.dims().angle_modulus;
    let quiet = model.is_swap_step(t);
    let tokens = tensor.step_tokens(t);
    let all_idle = tokens.iter().all(|x| x.is_idle());
    for (q, tok) in tokens.iter().enumerate() {
        let sigma = if quiet { 0.0 } else { noise.gate_sigma.get(&tok.kind).copied().unwrap_or(0.0) };
        seek(rng, n, t, q, q);
        if tok.kind == GateKind::Idle {
            if !quiet && !all_idle && noise.idle_sigma > 0.0 {
                let eps: f64 = noise.idle_sigma * rng.sample::<f64, _>(StandardNormal);
                apply_1q(state, n, q, &rz(eps));
            }
            continue;
        }
        let Some(u) = noisy_gate(tok, m, sigma, rng)? else { continue };
        match tensor.partner_of(t, q) {
            Some(p) => apply_2q(state, n, q, p, &u),
            None => apply_1q(state, n, q, &u),
        }
    }
    if quiet || !noise.crosstalk {
        return Ok(());
    }
    for (qa, qb, x) in model.crosstalk_pairs(tokens)? {
        seek(rng, n, t, qa.min(qb), qa.max(qb));
        let sigma = 2.0 * x.sqrt();
        let eps: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
        let (a, b) = (C64::from_polar(1.0, -eps / 2.0), C64::from_polar(1.0, eps / 2.0));
        apply_diag_2q(state, n, qa, qb, [a, b, b, a]);
    }
    Ok(())
}

fn haar_qubit<R: Rng>(rng: &mut R) -> [C64; 2] {
    let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let (a, b) = (C64::new(g[0], g[1]), C64::new(g[2], g[3]));
    let nrm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    [a / nrm, b / nrm]
}

fn product_state(qubits: &[[C64; 2]]) -> Vec<C64> {
    let n = qubits.len();
    (0..1usize << n)
        .map(|i| (0..n).map(|q| qubits[q][(i >> (n - 1 - q)) & 1]).product())
        .collect()
}

/// `1 − mean_i |⟨φ_i|U†Ũ_i|φ_i⟩|²` over `n_traj` random separable states and
/// fresh noise samples. Trajectory `i` uses stream `i` of `seed`.
pub fn simulate_circuit_infidelity(
    tensor: &CircuitTensor,
    machine: &MachineSpec,
    noise: &NoiseModel,
    n_traj: usize,
    seed: u64,
) -> Result<Estimate> {
    let n = tensor.num_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    if n_traj == 0 {
        return Err(Error::InvalidConfig("need at least one trajectory".into()));
    }
    let model = CostModel::new(machine, tensor.dims())?;
    let losses: Vec<f64> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let qubits: Vec<[C64; 2]> = (0..n).map(|_| haar_qubit(&mut rng)).collect();
            let phi = product_state(&qubits);
            let mut ideal = phi.clone();
            apply_circuit(&mut ideal, tensor);
            let mut noisy = phi;
            for t in 0..tensor.time_steps() {
                apply_noisy_step(&mut noisy, tensor, t, noise, &model, &mut rng)?;
            }
            let overlap: C64 = ideal.iter().zip(&noisy).map(|(a, b)| a.conj() * b).sum();
            Ok((1.0 - overlap.norm_sqr()).max(0.0))
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::of(&losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeDims;
    use crate::presets::ths_machine;

    #[test]
    fn zero_sigma_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for tok in [GateToken::H, GateToken::rotation(GateKind::RZ, 3), GateToken::control(GateKind::CP, crate::lattice::Axis(0), Some(5))] {
            assert_eq!(noisy_gate(&tok, 16, 0.0, &mut rng).unwrap(), gate_matrix(&tok, 16));
        }
        assert_eq!(gate_infidelity_mc(GateKind::H, 0.0, 0.0, 10, 0).unwrap().mean, 0.0);
    }

    #[test]
    fn noisy_rz_adds_the_draw() {
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = a.clone();
        let u = noisy_gate(&GateToken::rotation(GateKind::RZ, 2), 16, 0.1, &mut a).unwrap().unwrap();
        let eps: f64 = 0.1 * b.sample::<f64, _>(StandardNormal);
        assert_eq!(u, rz(angle_of(2, 16) + eps));
        assert!(u.unitarity_error() < 1e-12);
        let h = perturbed_gate(GateKind::H, 0.0, 0.3).unwrap();
        assert!(h.unitarity_error() < 1e-12);
    }

    #[test]
    fn matches_second_order_expansion() {
        for kind in [GateKind::RZ, GateKind::H, GateKind::CP, GateKind::Swap, GateKind::CZ] {
            let est = gate_infidelity_mc(kind, 0.7, 1e-3, 100_000, 5).unwrap();
            let taylor = infidelity_second_order(kind, 1e-3);
            assert!((est.mean - taylor).abs() < 4.0 * est.stderr + 1e-3 * taylor, "{kind}: {est:?} vs {taylor}");
        }
    }

    #[test]
    fn infidelity_grows_with_sigma() {
        let vals: Vec<f64> = [1e-4, 3e-4, 1e-3, 3e-3].iter().map(|&s| gate_infidelity_mc(GateKind::H, 0.0, s, 2000, 2).unwrap().mean).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn calibration_self_consistent() {
        let target = gate_infidelity_mc(GateKind::CP, 0.0, 2e-3, 20_000, 8).unwrap().mean;
        let s = calibrate_sigma(GateKind::CP, target, 20_000, 8).unwrap();
        assert!((s - 2e-3).abs() / 2e-3 < 0.03, "{s}");
        assert_eq!(calibrate_sigma(GateKind::RZ, 0.0, 10, 0).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_simulation_is_exact() {
        let dims = LatticeDims::linear(2, 2, 16).unwrap();
        let mut t = CircuitTensor::idle(dims);
        t.set(crate::lattice::Site { t: 0, q: 0 }, GateToken::rotation(GateKind::RZ, 3));
        let est = simulate_circuit_infidelity(&t, &ths_machine(), &NoiseModel::noiseless(), 8, 1).unwrap();
        assert!(est.mean < 1e-14);
    }

    #[test]
    fn shared_sites_share_draws() {
        use crate::lattice::Site;
        let dims = LatticeDims::linear(2, 2, 16).unwrap();
        let mut a = CircuitTensor::idle(dims);
        a.set(Site { t: 0, q: 0 }, GateToken::rotation(GateKind::RZ, 3));
        let mut b = a.clone();
        b.set(Site { t: 1, q: 1 }, GateToken::single(GateKind::H));
        // Only RZ is noisy, and H on the other wire commutes with its error.
        let noise = NoiseModel { gate_sigma: BTreeMap::from([(GateKind::RZ, 0.05)]), idle_sigma: 0.0, crosstalk: false };
        let ea = simulate_circuit_infidelity(&a, &ths_machine(), &noise, 5, 9).unwrap();
        let eb = simulate_circuit_infidelity(&b, &ths_machine(), &noise, 5, 9).unwrap();
        assert!(ea.mean > 0.0);
        assert!((ea.mean - eb.mean).abs() < 1e-15);
    }
}
