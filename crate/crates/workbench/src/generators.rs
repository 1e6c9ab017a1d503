//! Input circuits: the nearest-neighbour QFT, the Trotterized 2D lattice
//! evolution, and the small worked example shipped as an asset.

use qcl_core::lattice::{encode_instructions, CircuitTensor, GateKind, Instruction, LatticeDims};
use qcl_core::{Error, Result};

use crate::error::{WbError, WbResult};
use crate::formats;

/// Largest register `gen_qft` accepts: the angle modulus `2^(n+1)` must fit
/// in a `u64`.
pub const QFT_MAX_QUBITS: usize = 62;

/// Time steps per controlled-phase-plus-SWAP block.
const QFT_BLOCK: usize = 10;

/// Content time steps of `gen_qft(n)`: one leading Hadamard step followed by
/// `2n − 3` block slots.
pub fn qft_steps(n: usize) -> usize {
    1 + QFT_BLOCK * (2 * n - 3)
}

/// Angle modulus used by `gen_qft(n)`. The smallest rotation is half of the
/// last controlled phase, `π/2^n`.
pub fn qft_modulus(n: usize) -> u64 {
    1u64 << (n + 1)
}

/// Quantum Fourier transform on a line of `n` qubits with H, RZ, CZ and SWAP.
///
/// Round `k` applies H to logical qubit `k` (on wire 0) and walks it down the
/// line. At every wire it meets the next logical qubit: a controlled phase
/// built from two CNOTs, then a SWAP. Rounds pipeline two blocks apart, and
/// block `(k, j)` sits in slot `2k + j`. The walk leaves the register
/// bit-reversed, which is exactly the output order of the transform.
///
/// `swap_area` adds one idle step at each end.
pub fn gen_qft(n: usize, swap_area: bool) -> Result<CircuitTensor> {
    if !(2..=QFT_MAX_QUBITS).contains(&n) {
        return Err(Error::OutOfRange(format!("QFT needs 2..={QFT_MAX_QUBITS} qubits, got {n}")));
    }
    let m = qft_modulus(n);
    let pad = usize::from(swap_area);
    let steps = qft_steps(n) + 2 * pad;
    let dims = LatticeDims::linear(steps, n, m)?;
    let mut list = Vec::new();
    let one = |kind, t: usize, q: usize| Instruction::new(kind, t + pad, vec![q]);
    let two = |kind, t: usize, q: usize| Instruction::new(kind, t + pad, vec![q]).with_partner(vec![q + 1]);
    let rz = |t: usize, q: usize, k: u64| one(GateKind::RZ, t, q).with_angle(k % m);
    for k in 0..n - 1 {
        // The round's Hadamard goes one step before its first block.
        let h_at = if k == 0 { 0 } else { 1 + QFT_BLOCK * (2 * k) - 1 };
        list.push(one(GateKind::H, h_at, 0));
        for j in 0..n - 1 - k {
            let t0 = 1 + QFT_BLOCK * (2 * k + j);
            // Partner distance j + 1 gives phase π/2^(j+1); half of it is
            // index 2^(n−j−2) of 2^(n+1).
            let half = 1u64 << (n - j - 2);
            // In the very last block the wire holding the final logical qubit
            // takes the bare RZ, so its Hadamard fits before the SWAP.
            let last = k == n - 2;
            let (a, b) = if last { (j + 1, j) } else { (j, j + 1) };
            list.push(rz(t0, a, half));
            list.push(one(GateKind::H, t0 + 1, b));
            list.push(two(GateKind::CZ, t0 + 2, j));
            list.push(one(GateKind::H, t0 + 3, b));
            list.push(rz(t0 + 4, b, m - half));
            list.push(one(GateKind::H, t0 + 5, b));
            list.push(two(GateKind::CZ, t0 + 6, j));
            list.push(one(GateKind::H, t0 + 7, b));
            list.push(rz(t0 + 8, b, half));
            if last {
                list.push(one(GateKind::H, t0 + 7, a));
            }
            list.push(two(GateKind::Swap, t0 + 9, j));
        }
    }
    encode_instructions(&list, &dims)
}

/// Angles of one Trotter period as grid indices `(θ_z, θ_x, θ_zz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThsAngles {
    pub rz: u64,
    pub rx: u64,
    pub cp: u64,
}

pub const THS_MODULUS: u64 = 16;
pub const THS_PERIOD: usize = 8;

/// Default angles: `π/4, π/4, π/2` on the 16-point grid.
pub const THS_DEFAULT_ANGLES: ThsAngles = ThsAngles { rz: 2, rx: 2, cp: 4 };

/// Trotterized evolution on a `rows × cols` grid, `periods` repetitions of
/// an 8-step block: RZ layer, RX layer, then CP on even and odd bonds along
/// the first axis, then along the second axis, then two idle steps.
pub fn gen_ths(rows: usize, cols: usize, periods: usize, angles: ThsAngles) -> WbResult<CircuitTensor> {
    if rows % 2 != 0 || cols % 2 != 0 || rows == 0 || cols == 0 {
        return Err(WbError::OddExtent(rows, cols));
    }
    if periods == 0 {
        return Err(Error::OutOfRange("THS needs at least one period".into()).into());
    }
    for k in [angles.rz, angles.rx, angles.cp] {
        if k >= THS_MODULUS {
            return Err(Error::OutOfRange(format!("angle index {k} is off the {THS_MODULUS}-point grid")).into());
        }
    }
    let dims = LatticeDims::new(THS_PERIOD * periods, vec![rows, cols], THS_MODULUS)?;
    let mut list = Vec::new();
    for p in 0..periods {
        let t = p * THS_PERIOD;
        for r in 0..rows {
            for c in 0..cols {
                list.push(Instruction::new(GateKind::RZ, t, vec![r, c]).with_angle(angles.rz));
                list.push(Instruction::new(GateKind::RX, t + 1, vec![r, c]).with_angle(angles.rx));
            }
        }
        for parity in 0..2 {
            for r in (parity..rows - 1).step_by(2) {
                for c in 0..cols {
                    list.push(
                        Instruction::new(GateKind::CP, t + 2 + parity, vec![r, c])
                            .with_angle(angles.cp)
                            .with_partner(vec![r + 1, c]),
                    );
                }
            }
            for r in 0..rows {
                for c in (parity..cols - 1).step_by(2) {
                    list.push(
                        Instruction::new(GateKind::CP, t + 4 + parity, vec![r, c])
                            .with_angle(angles.cp)
                            .with_partner(vec![r, c + 1]),
                    );
                }
            }
        }
    }
    Ok(encode_instructions(&list, &dims)?)
}

const EXAMPLE1_TEXT: &str = include_str!("../assets/example1.circuit");

/// The 4-qubit, 8-step worked example on H, CZ and SWAP, with swap-area
/// steps first and last.
pub fn example1_input() -> Result<CircuitTensor> {
    formats::parse_circuit(EXAMPLE1_TEXT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qcl_core::lattice::{validate, Axis, GateToken};
    use qcl_core::semantics::{circuit_unitary, cphase, hadamard, phase_distance, rx, rz, Matrix};
    use num_complex::Complex64 as C64;
    use std::f64::consts::PI;

    fn dft(n: usize) -> Matrix {
        let d = 1usize << n;
        let w = 2.0 * PI / d as f64;
        let s = 1.0 / (d as f64).sqrt();
        let rows: Vec<Vec<C64>> =
            (0..d).map(|r| (0..d).map(|c| C64::from_polar(s, w * ((r * c) % d) as f64)).collect()).collect();
        let refs: Vec<&[C64]> = rows.iter().map(|r| r.as_slice()).collect();
        Matrix::from_rows(&refs)
    }

    #[test]
    fn qft_is_the_dft() {
        for n in 2..=6 {
            let c = gen_qft(n, false).unwrap();
            assert!(validate(&c).is_empty());
            let d = phase_distance(&circuit_unitary(&c).unwrap(), &dft(n)).unwrap();
            assert!(d < 1e-9, "n={n} distance {d}");
        }
    }

    #[test]
    fn qft_with_swap_area_is_the_dft() {
        let c = gen_qft(4, true).unwrap();
        assert_eq!(c.time_steps(), qft_steps(4) + 2);
        for t in [0, c.time_steps() - 1] {
            assert!(c.step_tokens(t).iter().all(GateToken::is_idle));
        }
        assert!(phase_distance(&circuit_unitary(&c).unwrap(), &dft(4)).unwrap() < 1e-9);
    }

    #[test]
    fn qft_step_counts() {
        assert_eq!(qft_steps(40), 771);
        assert_eq!(gen_qft(40, false).unwrap().time_steps(), 771);
        assert_eq!(gen_qft(40, true).unwrap().time_steps(), 773);
    }

    #[test]
    fn qft_three_qubit_census() {
        let c = gen_qft(3, false).unwrap();
        let count = |k| c.tokens().iter().filter(|t| t.kind == k).count();
        assert_eq!(c.time_steps(), 31);
        assert_eq!(count(GateKind::H), 3 + 4 * 3);
        assert_eq!(count(GateKind::CZ), 6);
        assert_eq!(count(GateKind::RZ), 9);
        assert_eq!(count(GateKind::Swap), 3);
        assert_eq!(count(GateKind::CP) + count(GateKind::RX), 0);
    }

    #[test]
    fn qft_rejects_out_of_range() {
        assert!(gen_qft(1, false).is_err());
        assert!(gen_qft(63, false).is_err());
    }

    /// Product of the layers built directly from gate matrices.
    fn ths_layers(rows: usize, cols: usize, a: ThsAngles) -> Matrix {
        let n = rows * cols;
        let d = 1usize << n;
        let m = THS_MODULUS;
        let th = |k: u64| 2.0 * PI * k as f64 / m as f64;
        let on = |gate: &Matrix, q: usize| -> Matrix {
            // Kronecker product with qubit 0 most significant.
            let mut out = Matrix::identity(1);
            for i in 0..n {
                let f = if i == q { gate.clone() } else { Matrix::identity(2) };
                out = kron(&out, &f);
            }
            out
        };
        let pair = |theta: f64, qa: usize, qb: usize| -> Matrix {
            let mut rows_ = vec![vec![C64::new(0.0, 0.0); d]; d];
            for (i, row) in rows_.iter_mut().enumerate() {
                let ba = (i >> (n - 1 - qa)) & 1;
                let bb = (i >> (n - 1 - qb)) & 1;
                row[i] = if ba == 1 && bb == 1 { C64::from_polar(1.0, theta) } else { C64::new(1.0, 0.0) };
            }
            let refs: Vec<&[C64]> = rows_.iter().map(|r| r.as_slice()).collect();
            Matrix::from_rows(&refs)
        };
        let _ = cphase(0.0);
        let mut u = Matrix::identity(d);
        for q in 0..n {
            u = on(&rz(th(a.rz)), q).mul(&u);
        }
        for q in 0..n {
            u = on(&rx(th(a.rx)), q).mul(&u);
        }
        let idx = |r: usize, c: usize| r * cols + c;
        for r in 0..rows - 1 {
            for c in 0..cols {
                u = pair(th(a.cp), idx(r, c), idx(r + 1, c)).mul(&u);
            }
        }
        for r in 0..rows {
            for c in 0..cols - 1 {
                u = pair(th(a.cp), idx(r, c), idx(r, c + 1)).mul(&u);
            }
        }
        u
    }

    fn kron(a: &Matrix, b: &Matrix) -> Matrix {
        let (da, db) = (a.dim, b.dim);
        let rows: Vec<Vec<C64>> = (0..da * db)
            .map(|r| (0..da * db).map(|c| a.get(r / db, c / db) * b.get(r % db, c % db)).collect())
            .collect();
        let refs: Vec<&[C64]> = rows.iter().map(|r| r.as_slice()).collect();
        Matrix::from_rows(&refs)
    }

    #[test]
    fn ths_single_period_matches_layer_product() {
        let a = ThsAngles { rz: 3, rx: 5, cp: 7 };
        let c = gen_ths(2, 2, 1, a).unwrap();
        let d = phase_distance(&circuit_unitary(&c).unwrap(), &ths_layers(2, 2, a)).unwrap();
        assert!(d < 1e-9, "{d}");
        let _ = hadamard();
    }

    #[test]
    fn ths_is_periodic() {
        let c = gen_ths(4, 4, 3, THS_DEFAULT_ANGLES).unwrap();
        assert!(validate(&c).is_empty());
        let dims = c.dims().clone();
        for t in 0..c.time_steps() - THS_PERIOD {
            for q in 0..dims.num_qubits() {
                assert_eq!(c.get(t, q), c.get(t + THS_PERIOD, q));
            }
        }
        // Two-site translation away from the open boundary.
        let c = gen_ths(8, 8, 1, THS_DEFAULT_ANGLES).unwrap();
        let dims = c.dims().clone();
        for t in 0..THS_PERIOD {
            for r in 1..4 {
                for col in 1..4 {
                    let here = c.get(t, dims.index_of(&[r, col]).unwrap());
                    for there in [[r + 2, col], [r, col + 2]] {
                        let other = c.get(t, dims.index_of(&there).unwrap());
                        if here.kind != GateKind::Busy && other.kind != GateKind::Busy {
                            assert_eq!(here, other, "t={t} ({r},{col}) vs {there:?}");
                        }
                    }
                }
            }
        }
        assert_eq!(c.get(2, 0).partner, Some(Axis(0)));
    }

    #[test]
    fn ths_full_size() {
        let c = gen_ths(8, 8, 8, THS_DEFAULT_ANGLES).unwrap();
        assert_eq!((c.num_qubits(), c.time_steps()), (64, 64));
        assert!(gen_ths(3, 4, 1, THS_DEFAULT_ANGLES).is_err());
    }

    #[test]
    fn example1_asset() {
        let c = example1_input().unwrap();
        assert_eq!((c.time_steps(), c.num_qubits()), (8, 4));
        assert!(validate(&c).is_empty());
        assert!(c.step_tokens(0).iter().all(GateToken::is_idle));
        assert!(c.tokens().iter().all(|t| matches!(
            t.kind,
            GateKind::H | GateKind::CZ | GateKind::Swap | GateKind::Busy | GateKind::Idle
        )));
    }
}
