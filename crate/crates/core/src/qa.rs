//! Exact emulation of annealing-based compilation on the equivalence class of
//! the input circuit.
//!
//! The state lives on the enumerated class. Each time step applies the exact
//! propagator of the midpoint Hamiltonian `w0·H0 + wd·Hd + wI·HI`, computed by
//! a Lanczos projection with full reorthogonalisation.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::class::{enumerate_class, EquivalenceClass};
use crate::cost::{CostModel, MachineSpec};
use crate::error::{Error, Result};
use crate::lattice::CircuitTensor;
use crate::rules::RuleSet;
use crate::semantics::{equivalent, EQUIVALENCE_TOLERANCE, MAX_DENSE_QUBITS};

/// Largest circuit the sampling check re-verifies.
pub const MAX_VERIFY_QUBITS: usize = 10;
pub const STEP_NORM_TOLERANCE: f64 = 1e-10;
const KRYLOV_TOLERANCE: f64 = 1e-12;
const MAX_HALVINGS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaConfig {
    pub tau: f64,
    pub steps: usize,
    pub cap: usize,
    /// `λ` in `HI = λ·I(C)`; `None` scales the largest class infidelity to 1.
    pub hi_scale: Option<f64>,
    /// Observables are recorded this many times (plus the start).
    pub checkpoints: usize,
    pub krylov_dim: usize,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig { tau: 100.0, steps: 1000, cap: 20_000, hi_scale: None, checkpoints: 20, krylov_dim: 24 }
    }
}

/// The three operators on the class basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonians {
    /// Site-wise Hamming distance to the input.
    pub h0: Vec<f64>,
    /// Sparse symmetric rows `(column, value)`; value is minus the move count.
    pub hd: Vec<Vec<(usize, f64)>>,
    /// `λ·I(C)`.
    pub hi: Vec<f64>,
    /// Unscaled infidelities.
    pub costs: Vec<f64>,
    pub lambda: f64,
}

impl Hamiltonians {
    pub fn dim(&self) -> usize {
        self.h0.len()
    }

    /// `out = (w0·H0 + wd·Hd + wI·HI)·x`.
    pub fn apply(&self, w: (f64, f64, f64), x: &[C64], out: &mut [C64]) {
        for (i, row) in self.hd.iter().enumerate() {
            let mut acc = x[i] * (w.0 * self.h0[i] + w.2 * self.hi[i]);
            for &(j, v) in row {
                acc += x[j] * (w.1 * v);
            }
            out[i] = acc;
        }
    }

    pub fn dense(&self, w: (f64, f64, f64)) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += w.0 * self.h0[i] + w.2 * self.hi[i];
            for &(j, v) in &self.hd[i] {
                m[(i, j)] += w.1 * v;
            }
        }
        m
    }
}

fn hamming(a: &CircuitTensor, b: &CircuitTensor) -> usize {
    a.tokens().iter().zip(b.tokens()).filter(|(x, y)| x != y).count()
}

pub fn build_hamiltonians(class: &EquivalenceClass, machine: &MachineSpec, hi_scale: Option<f64>) -> Result<Hamiltonians> {
    let input = &class.members[0];
    let model = CostModel::new(machine, input.dims())?;
    let costs: Vec<f64> = class.members.iter().map(|c| model.total(c)).collect::<Result<_>>()?;
    let h0 = class.members.iter().map(|c| hamming(c, input) as f64).collect();
    let mut hd: Vec<Vec<(usize, f64)>> = Vec::with_capacity(class.len());
    for out in &class.edges {
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut targets = out.clone();
        targets.sort_unstable();
        for j in targets {
            match row.last_mut() {
                Some((c, v)) if *c == j => *v -= 1.0,
                _ => row.push((j, -1.0)),
            }
        }
        hd.push(row);
    }
    for (i, row) in hd.iter().enumerate() {
        for &(j, v) in row {
            let back = hd[j].iter().find(|(c, _)| *c == i).map(|&(_, w)| w);
            if back != Some(v) {
                return Err(Error::InvalidConfig(format!("driving term {i}->{j} is not symmetric")));
            }
        }
    }
    let max = costs.iter().copied().fold(0.0, f64::max);
    let lambda = hi_scale.unwrap_or(if max > 0.0 { 1.0 / max } else { 1.0 });
    let hi = costs.iter().map(|c| lambda * c).collect();
    Ok(Hamiltonians { h0, hd, hi, costs, lambda })
}

/// Weights `(w0, wd, wI)` of the two-phase linear schedule.
pub fn schedule(t: f64, tau: f64) -> Result<(f64, f64, f64)> {
    if !(tau > 0.0) || !(0.0..=tau).contains(&t) {
        return Err(Error::OutOfRange(format!("t = {t} outside [0, {tau}]")));
    }
    let s = t / tau;
    Ok(if s <= 0.5 { (1.0 - 2.0 * s, 2.0 * s, 0.0) } else { (0.0, 2.0 - 2.0 * s, 2.0 * s - 1.0) })
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `exp(−i·H·dt)·psi` for a real symmetric `H` given by `apply`, via a Lanczos
/// projection. Returns the a-posteriori error estimate.
pub fn lanczos_step<F>(apply: F, psi: &mut [C64], dt: f64, max_dim: usize) -> f64
where
    F: Fn(&[C64], &mut [C64]),
{
    let n = psi.len();
    let beta0 = norm(psi);
    if beta0 == 0.0 {
        return 0.0;
    }
    let m_max = max_dim.max(1).min(n);
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|z| z / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    let tail;
    loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // Full reorthogonalisation, twice for stability.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let b = norm(&w);
        if basis.len() == m_max || b < 1e-13 {
            tail = if b < 1e-13 { 0.0 } else { b };
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    // c = Q·exp(−iΛdt)·Qᵀ·e1
    let coeffs: Vec<C64> = (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let q = eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)];
                    C64::from_polar(q, -eig.eigenvalues[k] * dt)
                })
                .sum()
        })
        .collect();
    for (i, z) in psi.iter_mut().enumerate() {
        *z = basis.iter().zip(&coeffs).map(|(v, c)| v[i] * c).sum::<C64>() * beta0;
    }
    tail * coeffs[m - 1].norm() * beta0
}

/// Advances `psi` by `dt` under a constant Hamiltonian, halving the sub-step
/// until both the Krylov error estimate and the norm change are within
/// tolerance.
fn propagate(h: &Hamiltonians, w: (f64, f64, f64), psi: &mut Vec<C64>, dt: f64, krylov: usize) -> Result<()> {
    let before = norm(psi);
    for halvings in 0..=MAX_HALVINGS {
        let pieces = 1usize << halvings;
        let sub = dt / pieces as f64;
        let mut trial = psi.clone();
        let mut ok = true;
        for _ in 0..pieces {
            let err = lanczos_step(|x, out| h.apply(w, x, out), &mut trial, sub, krylov);
            if err > KRYLOV_TOLERANCE {
                ok = false;
                break;
            }
        }
        if ok && (norm(&trial) - before).abs() <= STEP_NORM_TOLERANCE {
            *psi = trial;
            return Ok(());
        }
    }
    Err(Error::StepTooCoarse(dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaCheckpoint {
    pub s: f64,
    /// `⟨I⟩` in infidelity units (unscaled).
    pub mean_infidelity: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResult {
    pub tau: f64,
    pub steps: usize,
    pub class_size: usize,
    pub checkpoints: Vec<QaCheckpoint>,
    pub probabilities: Vec<f64>,
    pub p_ground: f64,
    pub input_cost: f64,
    pub min_cost: f64,
    /// `1 − ⟨I⟩_final / I_input`.
    pub expected_improvement: f64,
    /// `1 − I_min / I_input`.
    pub optimal_improvement: f64,
    pub max_norm_drift: f64,
}

/// Indices of the minimum-cost members (relative tolerance 1e-12).
pub fn ground_indices(costs: &[f64]) -> Vec<usize> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(f64::MIN_POSITIVE);
    (0..costs.len()).filter(|&i| costs[i] - min <= tol).collect()
}

/// Evolves the input basis vector under the annealing schedule.
pub fn evolve_on(h: &Hamiltonians, cfg: &QaConfig) -> Result<QaResult> {
    if !(cfg.tau > 0.0) || cfg.steps == 0 {
        return Err(Error::InvalidConfig("need tau > 0 and at least one step".into()));
    }
    let n = h.dim();
    let mut psi = vec![C64::new(0.0, 0.0); n];
    psi[0] = C64::new(1.0, 0.0);
    let dt = cfg.tau / cfg.steps as f64;
    let mean = |psi: &[C64]| psi.iter().zip(&h.costs).map(|(z, c)| z.norm_sqr() * c).sum::<f64>();
    let mut checkpoints = vec![QaCheckpoint { s: 0.0, mean_infidelity: mean(&psi), norm: 1.0 }];
    let every = (cfg.steps / cfg.checkpoints.max(1)).max(1);
    let mut drift: f64 = 0.0;
    for k in 0..cfg.steps {
        let t_mid = ((k as f64 + 0.5) * dt).min(cfg.tau);
        let w = schedule(t_mid, cfg.tau)?;
        propagate(h, w, &mut psi, dt, cfg.krylov_dim)?;
        let nrm = norm(&psi);
        drift = drift.max((nrm * nrm - 1.0).abs());
        if (k + 1) % every == 0 || k + 1 == cfg.steps {
            checkpoints.push(QaCheckpoint { s: (k + 1) as f64 / cfg.steps as f64, mean_infidelity: mean(&psi), norm: nrm });
        }
    }
    let probabilities: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let ground = ground_indices(&h.costs);
    let input_cost = h.costs[0];
    let min_cost = ground.first().map_or(input_cost, |&i| h.costs[i]);
    let final_mean = mean(&psi);
    let ratio = |x: f64| if input_cost > 0.0 { 1.0 - x / input_cost } else { 0.0 };
    Ok(QaResult {
        tau: cfg.tau,
        steps: cfg.steps,
        class_size: n,
        checkpoints,
        p_ground: ground.iter().map(|&i| probabilities[i]).sum(),
        probabilities,
        input_cost,
        min_cost,
        expected_improvement: ratio(final_mean),
        optimal_improvement: ratio(min_cost),
        max_norm_drift: drift,
    })
}

pub fn evolve(input: &CircuitTensor, ruleset: &RuleSet, machine: &MachineSpec, cfg: &QaConfig) -> Result<(EquivalenceClass, QaResult)> {
    let class = enumerate_class(input, ruleset, cfg.cap)?;
    let h = build_hamiltonians(&class, machine, cfg.hi_scale)?;
    let res = evolve_on(&h, cfg)?;
    Ok((class, res))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub p_ground: f64,
    pub samples: usize,
    /// Fraction of samples verified equivalent to the input; `None` when the
    /// circuits are too large to verify.
    pub equivalent_fraction: Option<f64>,
    pub counts: Vec<usize>,
}

/// Draws `n` circuits from the final distribution and re-verifies each
/// distinct sample against the input.
pub fn measure<R: Rng>(class: &EquivalenceClass, result: &QaResult, n: usize, rng: &mut R) -> Result<Measurement> {
    let total: f64 = result.probabilities.iter().sum();
    let mut counts = vec![0usize; class.len()];
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut pick = class.len() - 1;
        for (i, p) in result.probabilities.iter().enumerate() {
            if u < *p {
                pick = i;
                break;
            }
            u -= p;
        }
        counts[pick] += 1;
    }
    let input = &class.members[0];
    let equivalent_fraction = if input.num_qubits() > MAX_VERIFY_QUBITS.min(MAX_DENSE_QUBITS) {
        None
    } else {
        let mut ok = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 && equivalent(input, &class.members[i], EQUIVALENCE_TOLERANCE)? {
                ok += c;
            }
        }
        Some(if n > 0 { ok as f64 / n as f64 } else { 1.0 })
    };
    Ok(Measurement { p_ground: result.p_ground, samples: n, equivalent_fraction, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(h0: [f64; 2], coupling: f64, costs: [f64; 2]) -> Hamiltonians {
        Hamiltonians {
            h0: h0.to_vec(),
            hd: vec![vec![(1, -coupling)], vec![(0, -coupling)]],
            hi: costs.to_vec(),
            costs: costs.to_vec(),
            lambda: 1.0,
        }
    }

    #[test]
    fn schedule_corners() {
        assert_eq!(schedule(0.0, 4.0).unwrap(), (1.0, 0.0, 0.0));
        assert_eq!(schedule(2.0, 4.0).unwrap(), (0.0, 1.0, 0.0));
        assert_eq!(schedule(4.0, 4.0).unwrap(), (0.0, 0.0, 1.0));
        assert!(schedule(5.0, 4.0).is_err());
    }

    #[test]
    fn rabi_oscillation() {
        // H = −σx: ψ(t) = cos t |0⟩ + i sin t |1⟩.
        let h = two_level([0.0, 0.0], 1.0, [0.0, 0.0]);
        for &t in &[0.3, 1.0, 2.7] {
            let mut psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
            lanczos_step(|x, o| h.apply((0.0, 1.0, 0.0), x, o), &mut psi, t, 8);
            assert!((psi[0] - C64::new(t.cos(), 0.0)).norm() < 1e-12);
            assert!((psi[1] - C64::new(0.0, t.sin())).norm() < 1e-12);
        }
    }

    /// Closed-form `exp(−iHdt)` of a real symmetric 2×2 matrix.
    fn expm2(h: [[f64; 2]; 2], dt: f64) -> [[C64; 2]; 2] {
        let mean = (h[0][0] + h[1][1]) / 2.0;
        let d = (h[0][0] - h[1][1]) / 2.0;
        let b = h[0][1];
        let w = (d * d + b * b).sqrt();
        let (c, s) = ((w * dt).cos(), if w > 0.0 { (w * dt).sin() / w } else { dt });
        let ph = C64::from_polar(1.0, -mean * dt);
        let i = C64::new(0.0, 1.0);
        [
            [ph * (c - i * s * d), ph * (-i * s * b)],
            [ph * (-i * s * b), ph * (c + i * s * d)],
        ]
    }

    #[test]
    fn annealing_matches_two_level_products() {
        let h = two_level([0.0, 1.0], 1.0, [0.3, 1.0]);
        let cfg = QaConfig { tau: 7.0, steps: 300, ..QaConfig::default() };
        let res = evolve_on(&h, &cfg).unwrap();
        let dt = cfg.tau / cfg.steps as f64;
        let mut psi = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        for k in 0..cfg.steps {
            let (w0, wd, wi) = schedule((k as f64 + 0.5) * dt, cfg.tau).unwrap();
            let m = [[w0 * 0.0 + wi * 0.3, -wd], [-wd, w0 * 1.0 + wi * 1.0]];
            let u = expm2(m, dt);
            psi = [u[0][0] * psi[0] + u[0][1] * psi[1], u[1][0] * psi[0] + u[1][1] * psi[1]];
        }
        assert!((res.probabilities[0] - psi[0].norm_sqr()).abs() < 1e-6);
        assert!((res.probabilities[1] - psi[1].norm_sqr()).abs() < 1e-6);
        assert!(res.max_norm_drift < 1e-8);
    }

    #[test]
    fn instant_anneal_stays_on_input() {
        let h = two_level([0.0, 1.0], 1.0, [0.3, 1.0]);
        let res = evolve_on(&h, &QaConfig { tau: 1e-9, steps: 1, ..QaConfig::default() }).unwrap();
        assert!((res.probabilities[0] - 1.0).abs() < 1e-12);
        assert_eq!(res.p_ground, res.probabilities[0]);
    }
}
