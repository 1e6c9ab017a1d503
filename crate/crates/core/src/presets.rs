//! Machine descriptions used by the shipped experiments.

use std::collections::BTreeMap;

use crate::cost::{CrosstalkKernel, DistanceMetric, MachineSpec, SwapArea};
use crate::lattice::GateKind;

fn infidelities(pairs: &[(GateKind, f64)]) -> BTreeMap<GateKind, f64> {
    pairs.iter().copied().collect()
}

/// Line of qubits with H, CZ and SWAP, first and last steps reserved for swaps.
pub fn example1_machine() -> MachineSpec {
    MachineSpec {
        name: "example1".into(),
        axes: 1,
        gate_infidelity: infidelities(&[(GateKind::H, 0.5e-5), (GateKind::CZ, 1.0e-5), (GateKind::Swap, 1.5e-5)]),
        idle_infidelity: 0.5e-5,
        crosstalk: Vec::new(),
        swap_area: SwapArea { enabled: true, free_kinds: vec![GateKind::Swap], penalty: 5.0e-5 },
        pair_factor: 1.0,
    }
}

pub fn example1_machine_without_swap_area() -> MachineSpec {
    MachineSpec { swap_area: SwapArea::default(), ..example1_machine() }
}

/// 2D nearest-neighbour device with RZ, RX and CP and a `1/r^6` CP crosstalk.
pub fn ths_machine() -> MachineSpec {
    MachineSpec {
        name: "ths".into(),
        axes: 2,
        gate_infidelity: infidelities(&[(GateKind::RZ, 2e-5), (GateKind::RX, 2e-5), (GateKind::CP, 5e-5)]),
        idle_infidelity: 1e-5,
        crosstalk: vec![CrosstalkKernel {
            kind: GateKind::CP,
            coefficient: 2e-5,
            exponent: 6.0,
            metric: DistanceMetric::Euclidean,
            couples_with: Vec::new(),
        }],
        swap_area: SwapArea::default(),
        pair_factor: 1.0,
    }
}

/// Linear device where SWAP and CZ crosstalk dominate. These numbers are
/// defaults of this repository, not measured values.
pub fn qft_machine() -> MachineSpec {
    MachineSpec {
        name: "qft".into(),
        axes: 1,
        gate_infidelity: infidelities(&[
            (GateKind::H, 1e-5),
            (GateKind::RZ, 1e-5),
            (GateKind::CZ, 2e-5),
            (GateKind::Swap, 6e-5),
        ]),
        idle_infidelity: 0.5e-5,
        crosstalk: vec![CrosstalkKernel {
            kind: GateKind::CZ,
            coefficient: 2e-5,
            exponent: 6.0,
            metric: DistanceMetric::Euclidean,
            couples_with: vec![GateKind::Swap],
        }],
        swap_area: SwapArea::default(),
        pair_factor: 1.0,
    }
}

pub fn machine_by_name(name: &str) -> Option<MachineSpec> {
    match name {
        "example1" => Some(example1_machine()),
        "ths" => Some(ths_machine()),
        "qft" => Some(qft_machine()),
        _ => None,
    }
}
