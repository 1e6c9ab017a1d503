//! Conversion between the z-x-z and x-z-x Euler forms of a single-qubit rotation.
//!
//! Angles are listed in time order: `(θ, θ′, θ″)` stands for `RZ(θ)`, then
//! `RX(θ′)`, then `RZ(θ″)`, i.e. the operator `RZ(θ″)·RX(θ′)·RZ(θ)`.

use std::f64::consts::PI;

use crate::semantics::{hadamard, rx, rz, Matrix};

const TWO_PI: f64 = 2.0 * PI;
const DEGENERACY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConversion {
    /// `(γ, γ′, γ″)` for `RX(γ)`, `RZ(γ′)`, `RX(γ″)` in time order.
    pub angles: [f64; 3],
    /// The middle angle is 0 or π, so only a sum or difference of the outer
    /// angles is fixed; `γ″ = 0` is the returned representative.
    pub gimbal_lock: bool,
    /// Every output angle lies within 1e-9 of the grid `2πk/M`.
    pub on_grid: bool,
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if (TWO_PI - r).abs() < 1e-12 {
        0.0
    } else {
        r
    }
}

pub fn zxz_unitary(angles: [f64; 3]) -> Matrix {
    rz(angles[2]).mul(&rx(angles[1])).mul(&rz(angles[0]))
}

pub fn xzx_unitary(angles: [f64; 3]) -> Matrix {
    rx(angles[2]).mul(&rz(angles[1])).mul(&rx(angles[0]))
}

/// z-x-z angles `(a, b, c)` of `v = RZ(c)·RX(b)·RZ(a)` up to phase, with
/// `b ∈ [0, π]`, and whether `b` is degenerate.
fn zxz_angles(v: &Matrix) -> ([f64; 3], bool) {
    let (v00, v01, v10, v11) = (v.get(0, 0), v.get(0, 1), v.get(1, 0), v.get(1, 1));
    let cos = (v00.norm() + v11.norm()) / 2.0;
    let sin = (v01.norm() + v10.norm()) / 2.0;
    let b = 2.0 * sin.atan2(cos);
    let sum = (v11 * v00.conj()).arg(); // a + c
    let diff = (v10 * v01.conj()).arg(); // c − a
    if sin < DEGENERACY_EPS {
        return ([wrap(sum), 0.0, 0.0], true);
    }
    if cos < DEGENERACY_EPS {
        return ([wrap(-diff), PI, 0.0], true);
    }
    // Halving fixes a and c only modulo π; shifting both by π flips the sign
    // of the product, so keep whichever branch reproduces v's phase pattern.
    let a = (sum - diff) / 2.0;
    let c = (sum + diff) / 2.0;
    let direct = [a, b, c];
    let shifted = [a + PI, b, c + PI];
    let pick = if rotation_distance(&zxz_unitary(direct), v) <= rotation_distance(&zxz_unitary(shifted), v) {
        direct
    } else {
        shifted
    };
    (pick.map(wrap), false)
}

fn grid_snapped(x: f64, modulus: u64) -> Option<u64> {
    let step = TWO_PI / modulus as f64;
    let k = (x / step).round();
    if (x - k * step).abs() <= 1e-9 {
        Some((k as i128).rem_euclid(modulus as i128) as u64)
    } else {
        None
    }
}

/// Converts z-x-z time-ordered angles to x-z-x ones describing the same rotation
/// up to global phase.
pub fn euler_zxz_to_xzx(theta: [f64; 3], modulus: u64) -> EulerConversion {
    let u = zxz_unitary(theta);
    let h = hadamard();
    // H·RX·H = RZ, so the x-z-x angles of U are the z-x-z angles of H·U·H.
    let v = h.mul(&u).mul(&h);
    let (angles, gimbal_lock) = zxz_angles(&v);
    let on_grid = angles.iter().all(|&x| grid_snapped(x, modulus).is_some());
    EulerConversion { angles, gimbal_lock, on_grid }
}

/// The inverse conversion; by H-conjugation symmetry it is the same map.
pub fn euler_xzx_to_zxz(gamma: [f64; 3], modulus: u64) -> EulerConversion {
    euler_zxz_to_xzx(gamma, modulus)
}

/// All grid representations of the converted rotation, for a non-degenerate
/// source and target: the principal solution and its `(a+π, −b, c+π)` twin.
/// Empty when the conversion is off-grid or degenerate on either side.
pub fn grid_conversions(source: [u64; 3], modulus: u64) -> Vec<[u64; 3]> {
    let half = modulus / 2;
    if modulus < 2 || source[1] == 0 || source[1] == half {
        return Vec::new();
    }
    let theta = source.map(|k| crate::semantics::angle_of(k, modulus));
    let conv = euler_zxz_to_xzx(theta, modulus);
    if conv.gimbal_lock || !conv.on_grid {
        return Vec::new();
    }
    let g = conv.angles.map(|x| grid_snapped(x, modulus).expect("on grid"));
    if g[1] == 0 || g[1] == half {
        return Vec::new();
    }
    let twin = [(g[0] + half) % modulus, (modulus - g[1]) % modulus, (g[2] + half) % modulus];
    let mut out = vec![g, twin];
    out.sort();
    out.dedup();
    out
}

/// Phase-invariant distance between two 2×2 unitaries.
pub fn rotation_distance(u: &Matrix, v: &Matrix) -> f64 {
    crate::semantics::phase_distance(u, v).expect("2x2 operands")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pure_x_rotation() {
        let c = euler_zxz_to_xzx([0.0, 1.1, 0.0], 16);
        assert!((c.angles[0] - 1.1).abs() < 1e-12);
        assert_eq!(c.angles[1], 0.0);
        assert_eq!(c.angles[2], 0.0);
        assert!(c.gimbal_lock);
    }

    #[test]
    fn pure_z_rotation() {
        let c = euler_zxz_to_xzx([PI, 0.0, 0.0], 16);
        assert!(c.angles[0].abs() < 1e-12);
        assert!((c.angles[1] - PI).abs() < 1e-12);
        assert!(c.angles[2].abs() < 1e-12);
        assert!(c.gimbal_lock);
        assert!(c.on_grid);
    }

    #[test]
    fn random_triples_match_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let th = [rng.random::<f64>() * TWO_PI, rng.random::<f64>() * TWO_PI, rng.random::<f64>() * TWO_PI];
            let c = euler_zxz_to_xzx(th, 16);
            let d = rotation_distance(&zxz_unitary(th), &xzx_unitary(c.angles));
            assert!(d < 1e-12, "{th:?} -> {:?}: {d}", c.angles);
        }
    }

    #[test]
    fn grid_twins_are_equivalent() {
        let m = 16;
        let mut count = 0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let src = [a, b, c];
                    let u = zxz_unitary(src.map(|k| crate::semantics::angle_of(k, m)));
                    for g in grid_conversions(src, m) {
                        count += 1;
                        let v = xzx_unitary(g.map(|k| crate::semantics::angle_of(k, m)));
                        assert!(rotation_distance(&u, &v) < 1e-9);
                        // Reversibility: the source is among the back-conversions.
                        assert!(grid_conversions(g, m).contains(&src), "{src:?} {g:?}");
                    }
                }
            }
        }
        assert!(count > 0);
    }
}
