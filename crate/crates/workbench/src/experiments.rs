//! The three shipped experiment presets and the record streams they emit.

use qcl_core::class::EquivalenceClass;
use qcl_core::cost::MachineSpec;
use qcl_core::lattice::CircuitTensor;
use qcl_core::noise::{simulate_circuit_infidelity, Estimate, NoiseModel};
use qcl_core::presets::{example1_machine, qft_machine, ths_machine};
use qcl_core::qa::{evolve_on, measure, build_hamiltonians, QaConfig, QaResult};
use qcl_core::rules::{load_ruleset, RuleSet};
use qcl_core::sa::{run_ensemble, EnsembleRecord, SaConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::WbResult;
use crate::formats::{config_hash, parse_circuit, ResultRecord};
use crate::generators::{gen_qft, gen_ths, qft_modulus, THS_DEFAULT_ANGLES, THS_MODULUS};

/// Records for one SA ensemble: the sampled trajectory of every chain, one
/// summary per chain (`index` = chain length) and one ensemble summary.
pub fn sa_records(experiment: &str, hash: &str, ens: &EnsembleRecord) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    for c in &ens.chains {
        for s in &c.samples {
            out.push(
                ResultRecord::new(experiment, hash, Some(c.seed), s.k)
                    .replica(c.replica)
                    .with("T", s.temperature)
                    .with("I", s.current)
                    .with("I_best", s.best)
                    .with("I_I", 1.0 - s.best / c.input_cost)
                    .with("accepted", s.accepted as f64),
            );
        }
        out.push(
            ResultRecord::new(experiment, hash, Some(c.seed), c.steps)
                .replica(c.replica)
                .with("I_input", c.input_cost)
                .with("I_opt", c.best_cost)
                .with("I_I", c.improvement)
                .with("T_max", c.t_max)
                .with("T_min", c.t_min),
        );
    }
    let seed = ens.chains.first().map(|c| c.seed);
    let steps = ens.chains.first().map_or(0, |c| c.steps);
    out.push(
        ResultRecord::new(experiment, hash, seed, steps)
            .with("mean_I_I", ens.mean_improvement)
            .with("min_I_I", ens.min_improvement)
            .with("max_I_I", ens.max_improvement)
            .with("replicas", ens.chains.len() as f64),
    );
    out
}

/// Records for one annealing time: checkpoints along the schedule
/// (`index` = checkpoint number) and a final summary.
pub fn qa_records(experiment: &str, hash: &str, res: &QaResult, p_sampled: Option<(f64, Option<f64>)>) -> Vec<ResultRecord> {
    let mut out: Vec<ResultRecord> = res
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, cp)| {
            ResultRecord::new(experiment, hash, None, i as u64)
                .with("tau", res.tau)
                .with("s", cp.s)
                .with("mean_I", cp.mean_infidelity)
                .with("norm", cp.norm)
        })
        .collect();
    let mut summary = ResultRecord::new(experiment, hash, None, res.checkpoints.len() as u64)
        .with("tau", res.tau)
        .with("class_size", res.class_size as f64)
        .with("P_G", res.p_ground)
        .with("I_I_exp", res.expected_improvement)
        .with("I_I_opt", res.optimal_improvement)
        .with("norm_drift", res.max_norm_drift);
    if let Some((pg, eq)) = p_sampled {
        summary = summary.with("P_G_sampled", pg);
        if let Some(f) = eq {
            summary = summary.with("P_equiv", f);
        }
    }
    out.push(summary);
    out
}

/// SA on a generated circuit: shared by the QFT and THS presets.
#[derive(Debug, Clone, PartialEq)]
pub struct SaRun {
    pub input: CircuitTensor,
    pub ruleset: RuleSet,
    pub machine: MachineSpec,
    pub config: SaConfig,
}

impl SaRun {
    /// Chain length as a multiple of the circuit volume `N_Q · N_T`.
    pub fn sweeps_to_steps(input: &CircuitTensor, sweeps: u64) -> u64 {
        sweeps * (input.num_qubits() * input.time_steps()) as u64
    }

    pub fn run(&self) -> WbResult<EnsembleRecord> {
        Ok(run_ensemble(&self.input, &self.ruleset, &self.machine, &self.config)?)
    }
}

/// `qft-sa`: the nearest-neighbour QFT compiled with the QFT rule set.
#[derive(Debug, Clone, PartialEq)]
pub struct QftSaPreset {
    pub qubits: usize,
    pub sweeps: u64,
    pub replicas: usize,
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
    pub samples: u64,
}

impl Default for QftSaPreset {
    fn default() -> Self {
        QftSaPreset { qubits: 10, sweeps: 100, replicas: 5, t_max: None, t_min: None, samples: 50 }
    }
}

impl QftSaPreset {
    pub fn canonical(&self) -> String {
        format!("{self:?}")
    }

    pub fn build(&self, seed: u64) -> WbResult<SaRun> {
        let input = gen_qft(self.qubits, false)?;
        let steps = SaRun::sweeps_to_steps(&input, self.sweeps);
        Ok(SaRun {
            ruleset: load_ruleset("qft", qft_modulus(self.qubits))?,
            machine: qft_machine(),
            config: SaConfig {
                t_max: self.t_max,
                t_min: self.t_min,
                steps,
                seed,
                record_stride: (steps / self.samples.max(1)).max(1),
                replicas: self.replicas,
            },
            input,
        })
    }

    pub fn run(&self, seed: u64) -> WbResult<(EnsembleRecord, Vec<ResultRecord>)> {
        let ens = self.build(seed)?.run()?;
        let recs = sa_records("qft-sa", &config_hash(&self.canonical()), &ens);
        Ok((ens, recs))
    }
}

/// `ths-sa`: the Trotterized lattice evolution compiled with the THS rules.
#[derive(Debug, Clone, PartialEq)]
pub struct ThsSaPreset {
    pub rows: usize,
    pub cols: usize,
    pub periods: usize,
    pub sweeps: u64,
    pub replicas: usize,
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
    pub samples: u64,
}

impl ThsSaPreset {
    pub fn new(rows: usize, cols: usize) -> Self {
        ThsSaPreset { rows, cols, periods: 8, sweeps: 300_000, replicas: 5, t_max: None, t_min: None, samples: 50 }
    }

    pub fn canonical(&self) -> String {
        format!("{self:?}")
    }

    pub fn build(&self, seed: u64) -> WbResult<SaRun> {
        let input = gen_ths(self.rows, self.cols, self.periods, THS_DEFAULT_ANGLES)?;
        let steps = SaRun::sweeps_to_steps(&input, self.sweeps);
        Ok(SaRun {
            ruleset: load_ruleset("ths", THS_MODULUS)?,
            machine: ths_machine(),
            config: SaConfig {
                t_max: self.t_max,
                t_min: self.t_min,
                steps,
                seed,
                record_stride: (steps / self.samples.max(1)).max(1),
                replicas: self.replicas,
            },
            input,
        })
    }

    pub fn run(&self, seed: u64) -> WbResult<(EnsembleRecord, Vec<ResultRecord>)> {
        let ens = self.build(seed)?.run()?;
        let recs = sa_records("ths-sa", &config_hash(&self.canonical()), &ens);
        Ok((ens, recs))
    }
}

const EXAMPLE1_REDUCED: &str = include_str!("../assets/example1_reduced.circuit");

/// Three-qubit cut of the worked example whose equivalence class is small
/// enough for exact annealing.
pub fn example1_reduced() -> WbResult<CircuitTensor> {
    Ok(parse_circuit(EXAMPLE1_REDUCED)?)
}

/// `example1-qa`: annealing over the reduced example for a grid of `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example1QaPreset {
    pub taus: Vec<f64>,
    /// Propagator steps per unit of `τ`.
    pub steps_per_unit: f64,
    pub cap: usize,
    pub samples: usize,
}

impl Default for Example1QaPreset {
    fn default() -> Self {
        Example1QaPreset { taus: vec![125.0, 250.0, 500.0, 1000.0, 2000.0], steps_per_unit: 0.5, cap: 20_000, samples: 10_000 }
    }
}

pub struct QaSweep {
    pub class: EquivalenceClass,
    pub results: Vec<QaResult>,
    pub sampled: Vec<(f64, Option<f64>)>,
}

impl Example1QaPreset {
    pub fn canonical(&self) -> String {
        format!("{self:?}")
    }

    pub fn config(&self, tau: f64) -> QaConfig {
        QaConfig { tau, steps: ((tau * self.steps_per_unit).ceil() as usize).max(1), cap: self.cap, ..QaConfig::default() }
    }

    pub fn run(&self, seed: u64) -> WbResult<(QaSweep, Vec<ResultRecord>)> {
        let input = example1_reduced()?;
        let ruleset = load_ruleset("example1", input.dims().angle_modulus)?;
        let machine = example1_machine();
        let class = qcl_core::class::enumerate_class(&input, &ruleset, self.cap)?;
        let h = build_hamiltonians(&class, &machine, None)?;
        let hash = config_hash(&self.canonical());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sweep = QaSweep { class, results: Vec::new(), sampled: Vec::new() };
        let mut recs = Vec::new();
        for &tau in &self.taus {
            let mut res = evolve_on(&h, &self.config(tau))?;
            res.class_size = sweep.class.len();
            let m = measure(&sweep.class, &res, self.samples, &mut rng)?;
            let sampled = (m.p_ground, m.equivalent_fraction);
            let mut r = qa_records("example1-qa", &hash, &res, Some(sampled));
            for rec in &mut r {
                rec.seed = Some(seed);
            }
            recs.extend(r);
            sweep.results.push(res);
            sweep.sampled.push(sampled);
        }
        Ok((sweep, recs))
    }
}

/// Noisy-trajectory infidelity of a circuit next to its cost-model value.
pub fn noisy_estimate(
    circuit: &CircuitTensor,
    machine: &MachineSpec,
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
) -> WbResult<(Estimate, f64)> {
    let est = simulate_circuit_infidelity(circuit, machine, noise, trajectories, seed)?;
    let model = qcl_core::cost::CostModel::new(machine, circuit.dims())?;
    Ok((est, model.total(circuit)?))
}
