//! Gate matrices, statevector application and phase-invariant equivalence.
//!
//! Conventions: `RZ(θ) = exp(−iθZ/2)`, `RX(θ) = exp(−iθX/2)`,
//! `CP(θ) = diag(1, 1, 1, e^{iθ})` on (control, partner), `CZ = CP(π)`.
//! Qubit `q` of an `n`-qubit register is bit `n − 1 − q` of the basis index,
//! so qubit 0 is the most significant.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{CircuitTensor, GateKind, GateToken};

pub const MAX_DENSE_QUBITS: usize = 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        Matrix { dim, data }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        Matrix { dim, data: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        Matrix { dim: d, data: out }
    }

    pub fn adjoint(&self) -> Matrix {
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                out[j * d + i] = self.data[i * d + j].conj();
            }
        }
        Matrix { dim: d, data: out }
    }

    pub fn scale(&self, s: C64) -> Matrix {
        Matrix { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    /// `tr(self† · other)`.
    pub fn trace_adj_product(&self, other: &Matrix) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest entry of `U†U − 1`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = Matrix::identity(self.dim);
        p.data.iter().zip(&id.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

pub fn angle_of(index: u64, modulus: u64) -> f64 {
    2.0 * PI * (index as f64) / (modulus as f64)
}

pub fn rz(theta: f64) -> Matrix {
    let e = C64::from_polar(1.0, -theta / 2.0);
    Matrix::from_rows(&[&[e, ZERO], &[ZERO, e.conj()]])
}

pub fn rx(theta: f64) -> Matrix {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    Matrix::from_rows(&[&[c, s], &[s, c]])
}

pub fn hadamard() -> Matrix {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Matrix::from_rows(&[&[h, h], &[h, -h]])
}

pub fn cphase(theta: f64) -> Matrix {
    let mut m = Matrix::identity(4);
    m.data[15] = C64::from_polar(1.0, theta);
    m
}

pub fn swap() -> Matrix {
    Matrix::from_rows(&[
        &[ONE, ZERO, ZERO, ZERO],
        &[ZERO, ZERO, ONE, ZERO],
        &[ZERO, ONE, ZERO, ZERO],
        &[ZERO, ZERO, ZERO, ONE],
    ])
}

/// Matrix of a gate instance (2×2 or 4×4), `None` for Idle and BUSY.
pub fn gate_matrix(token: &GateToken, modulus: u64) -> Option<Matrix> {
    let theta = token.angle.map(|k| angle_of(k, modulus)).unwrap_or(0.0);
    Some(match token.kind {
        GateKind::Idle | GateKind::Busy => return None,
        GateKind::H => hadamard(),
        GateKind::RZ => rz(theta),
        GateKind::RX => rx(theta),
        GateKind::CZ => cphase(PI),
        GateKind::CP => cphase(theta),
        GateKind::Swap => swap(),
    })
}

/// Applies a 2×2 matrix to qubit `q` of an `n`-qubit state.
pub fn apply_1q(state: &mut [C64], n: usize, q: usize, m: &Matrix) {
    let bit = 1usize << (n - 1 - q);
    let (a, b, c, d) = (m.data[0], m.data[1], m.data[2], m.data[3]);
    for i in 0..state.len() {
        if i & bit == 0 {
            let j = i | bit;
            let (x, y) = (state[i], state[j]);
            state[i] = a * x + b * y;
            state[j] = c * x + d * y;
        }
    }
}

/// Applies a 4×4 matrix to qubits `(qa, qb)`, `qa` being the high bit of the
/// local index.
pub fn apply_2q(state: &mut [C64], n: usize, qa: usize, qb: usize, m: &Matrix) {
    let ba = 1usize << (n - 1 - qa);
    let bb = 1usize << (n - 1 - qb);
    for i in 0..state.len() {
        if i & ba == 0 && i & bb == 0 {
            let idx = [i, i | bb, i | ba, i | ba | bb];
            let v = idx.map(|k| state[k]);
            for (r, &k) in idx.iter().enumerate() {
                let row = &m.data[r * 4..r * 4 + 4];
                state[k] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
            }
        }
    }
}

/// Multiplies the amplitude of basis states by `phase(bits of qa, qb)`.
pub fn apply_diag_2q(state: &mut [C64], n: usize, qa: usize, qb: usize, phases: [C64; 4]) {
    let ba = 1usize << (n - 1 - qa);
    let bb = 1usize << (n - 1 - qb);
    for (i, amp) in state.iter_mut().enumerate() {
        let k = (((i & ba) != 0) as usize) << 1 | ((i & bb) != 0) as usize;
        *amp *= phases[k];
    }
}

/// Applies time step `t` of `tensor` to a statevector.
pub fn apply_step(state: &mut [C64], tensor: &CircuitTensor, t: usize) {
    let n = tensor.num_qubits();
    let modulus = tensor.dims().angle_modulus;
    for q in 0..n {
        let tok = tensor.get(t, q);
        let Some(m) = gate_matrix(&tok, modulus) else { continue };
        match tensor.partner_of(t, q) {
            Some(p) => apply_2q(state, n, q, p, &m),
            None => apply_1q(state, n, q, &m),
        }
    }
}

pub fn apply_circuit(state: &mut [C64], tensor: &CircuitTensor) {
    for t in 0..tensor.time_steps() {
        apply_step(state, tensor, t);
    }
}

fn guard(tensor: &CircuitTensor) -> Result<usize> {
    let n = tensor.num_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    Ok(n)
}

fn basis_column(n: usize, k: usize) -> Vec<C64> {
    let mut v = vec![ZERO; 1 << n];
    v[k] = ONE;
    v
}

pub fn circuit_unitary(tensor: &CircuitTensor) -> Result<Matrix> {
    let n = guard(tensor)?;
    let d = 1usize << n;
    let cols: Vec<Vec<C64>> = (0..d)
        .into_par_iter()
        .map(|k| {
            let mut v = basis_column(n, k);
            apply_circuit(&mut v, tensor);
            v
        })
        .collect();
    let mut data = vec![ZERO; d * d];
    for (k, col) in cols.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            data[r * d + k] = *x;
        }
    }
    Ok(Matrix { dim: d, data })
}

/// `min_φ ‖U − e^{iφ} V‖_F = sqrt(2d − 2|tr(U†V)|)`.
pub fn phase_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.dim != v.dim {
        return Err(Error::DimensionMismatch(u.dim, v.dim));
    }
    let phase = optimal_phase(u.trace_adj_product(v));
    Ok(u.data.iter().zip(&v.data).map(|(a, b)| (a - phase * b).norm_sqr()).sum::<f64>().sqrt())
}

/// `e^{iφ}` minimising `‖U − e^{iφ}V‖` given `tr(U†V)`. The distance itself is
/// then summed entrywise, which keeps full precision near zero where
/// `sqrt(2d − 2|tr|)` would not.
fn optimal_phase(tr: C64) -> C64 {
    if tr.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        tr.conj() / tr.norm()
    }
}

/// Phase distance between the unitaries of two circuits, computed column by
/// column without materialising either matrix.
pub fn circuit_distance(c1: &CircuitTensor, c2: &CircuitTensor) -> Result<f64> {
    let n = guard(c1)?;
    if c2.num_qubits() != n {
        return Err(Error::DimensionMismatch(n, c2.num_qubits()));
    }
    let d = 1usize << n;
    let columns = |k: usize| {
        let mut a = basis_column(n, k);
        let mut b = a.clone();
        apply_circuit(&mut a, c1);
        apply_circuit(&mut b, c2);
        (a, b)
    };
    let tr: C64 = (0..d)
        .into_par_iter()
        .map(|k| {
            let (a, b) = columns(k);
            a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<C64>()
        })
        .sum();
    let phase = optimal_phase(tr);
    let sq: f64 = (0..d)
        .into_par_iter()
        .map(|k| {
            let (a, b) = columns(k);
            a.iter().zip(&b).map(|(x, y)| (x - phase * y).norm_sqr()).sum::<f64>()
        })
        .sum();
    Ok(sq.sqrt())
}

pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

pub fn equivalent(c1: &CircuitTensor, c2: &CircuitTensor, tol: f64) -> Result<bool> {
    Ok(circuit_distance(c1, c2)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{encode_instructions, Instruction, LatticeDims, Site};

    fn rand_unitary(seed: u64, d: usize) -> Matrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Gram-Schmidt on random complex columns.
        let mut cols: Vec<Vec<C64>> = Vec::new();
        for _ in 0..d {
            let mut v: Vec<C64> =
                (0..d).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            for c in &cols {
                let p: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
            let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            cols.push(v);
        }
        let mut data = vec![ZERO; d * d];
        for (k, c) in cols.iter().enumerate() {
            for (r, x) in c.iter().enumerate() {
                data[r * d + k] = *x;
            }
        }
        Matrix { dim: d, data }
    }

    #[test]
    fn gates_are_unitary() {
        for m in [rz(0.3), rx(1.7), hadamard(), cphase(2.1), swap(), cphase(PI)] {
            assert!(m.unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn cz_is_cp_pi() {
        let cz = gate_matrix(&GateToken::control(GateKind::CZ, crate::lattice::Axis(0), None), 16).unwrap();
        let cp = gate_matrix(&GateToken::control(GateKind::CP, crate::lattice::Axis(0), Some(8)), 16).unwrap();
        assert_eq!(cz, cp);
    }

    #[test]
    fn idle_circuit_is_identity() {
        let t = CircuitTensor::idle(LatticeDims::linear(3, 3, 16).unwrap());
        assert_eq!(circuit_unitary(&t).unwrap(), Matrix::identity(8));
    }

    #[test]
    fn single_h() {
        let dims = LatticeDims::linear(1, 1, 16).unwrap();
        let t = encode_instructions(&[Instruction::new(GateKind::H, 0, vec![0])], &dims).unwrap();
        let u = circuit_unitary(&t).unwrap();
        assert!(u.data.iter().zip(&hadamard().data).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn phase_distance_examples() {
        let u = rand_unitary(1, 4);
        let v = u.scale(C64::from_polar(1.0, PI / 4.0));
        assert!(phase_distance(&u, &v).unwrap() < 1e-7);
        let z = rz(PI).scale(C64::new(0.0, 1.0));
        assert!((phase_distance(&Matrix::identity(2), &z).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(phase_distance(&u, &Matrix::identity(2)), Err(Error::DimensionMismatch(4, 2)));
    }

    #[test]
    fn phase_distance_matches_scan() {
        for seed in 0..5 {
            let u = rand_unitary(seed, 4);
            let v = rand_unitary(seed + 100, 4);
            let got = phase_distance(&u, &v).unwrap();
            // Golden-section-free dense scan followed by local refinement.
            let f = |phi: f64| {
                let e = C64::from_polar(1.0, phi);
                u.data.iter().zip(&v.data).map(|(a, b)| (a - e * b).norm_sqr()).sum::<f64>().sqrt()
            };
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..20000 {
                let phi = 2.0 * PI * i as f64 / 20000.0;
                let val = f(phi);
                if val < best.0 {
                    best = (val, phi);
                }
            }
            let (mut lo, mut hi) = (best.1 - 1e-3, best.1 + 1e-3);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1) < f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            assert!((f((lo + hi) / 2.0) - got).abs() < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn hh_equivalent_to_idle() {
        let dims = LatticeDims::linear(2, 1, 16).unwrap();
        let mut hh = CircuitTensor::idle(dims.clone());
        hh.set(Site { t: 0, q: 0 }, GateToken::H);
        hh.set(Site { t: 1, q: 0 }, GateToken::H);
        let idle = CircuitTensor::idle(dims);
        assert!(equivalent(&hh, &idle, EQUIVALENCE_TOLERANCE).unwrap());
        assert!(equivalent(&hh, &hh, EQUIVALENCE_TOLERANCE).unwrap());
        let mut h = idle.clone();
        h.set(Site { t: 0, q: 0 }, GateToken::H);
        assert!(!equivalent(&h, &idle, EQUIVALENCE_TOLERANCE).unwrap());
    }

    #[test]
    fn too_many_qubits() {
        let t = CircuitTensor::idle(LatticeDims::linear(1, 13, 16).unwrap());
        assert_eq!(circuit_unitary(&t), Err(Error::TooManyQubits(13)));
    }
}
