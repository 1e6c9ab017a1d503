//! The `qcl` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcl_core::cost::{CostModel, MachineSpec};
use qcl_core::lattice::CircuitTensor;
use qcl_core::noise::NoiseModel;
use qcl_core::presets::machine_by_name;
use qcl_core::qa::{build_hamiltonians, evolve_on, measure, QaConfig};
use qcl_core::rules::{load_ruleset, validate_rule};
use qcl_core::sa::{run_ensemble, SaConfig};
use qcl_core::semantics::{circuit_distance, circuit_unitary, phase_distance, EQUIVALENCE_TOLERANCE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{WbError, WbResult};
use crate::experiments::{qa_records, sa_records, Example1QaPreset, QftSaPreset, ThsSaPreset};
use crate::formats::{
    config_hash, emit_circuit, parse_circuit, parse_machine, parse_records, records_to_csv, write_records,
    ResultRecord,
};
use crate::generators::{example1_input, gen_qft, gen_ths, ThsAngles, THS_DEFAULT_ANGLES};

#[derive(Debug, Parser)]
#[command(name = "qcl", version, about = "Circuit compilation on a gate lattice")]
pub struct Cli {
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated input circuit.
    Generate {
        #[command(subcommand)]
        which: Generate,
    },
    /// Infidelity of a circuit under a machine model.
    Cost(CostArgs),
    /// Simulated-annealing compilation.
    Compile(CompileArgs),
    /// Quantum-annealing emulation over the equivalence class.
    Anneal(AnnealArgs),
    /// Check a circuit against another circuit or the DFT matrix.
    Verify(VerifyArgs),
    /// Check every rule of a rule set against its unitary.
    ValidateRules(ValidateArgs),
    /// Noisy-trajectory infidelity estimate.
    NoisySim(NoisyArgs),
    /// Run one of the shipped experiment presets.
    Experiment(ExperimentArgs),
    /// Convert a record stream to CSV.
    ExportCsv {
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Generate {
    Qft {
        #[arg(long)]
        qubits: usize,
        /// Add one idle step at each end.
        #[arg(long)]
        swap_area: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Ths {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 8)]
        periods: usize,
        /// Grid indices `rz,rx,cp` on the 16-point grid.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        angles: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Example1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    /// Preset name (example1, ths, qft) or machine file.
    #[arg(long)]
    pub machine: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub machine: String,
    /// Builtin rule set name or rule file.
    #[arg(long)]
    pub rules: String,
    #[arg(long)]
    pub steps: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Trajectory sample spacing; defaults to a fiftieth of the chain.
    #[arg(long)]
    pub record_stride: Option<u64>,
    /// Where to write the best circuit found.
    #[arg(long)]
    pub emit_circuit: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnealArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub machine: String,
    #[arg(long)]
    pub rules: String,
    /// Total annealing times, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub steps_per_unit: f64,
    #[arg(long, default_value_t = 20_000)]
    pub cap: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub circuit: PathBuf,
    /// Second circuit to compare with.
    #[arg(long, conflicts_with = "against_dft")]
    pub against: Option<PathBuf>,
    #[arg(long)]
    pub against_dft: bool,
    #[arg(long, default_value_t = EQUIVALENCE_TOLERANCE)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub rules: String,
    #[arg(long, default_value_t = 16)]
    pub modulus: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoisyArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub machine: String,
    #[arg(long, default_value_t = 100)]
    pub trajectories: usize,
    /// Monte-Carlo draws per gate kind when calibrating the noise widths.
    #[arg(long, default_value_t = qcl_core::noise::CALIBRATION_DRAWS)]
    pub calibration_draws: usize,
    /// Calibrate every gate kind to this infidelity instead of the machine's.
    #[arg(long)]
    pub target_infidelity: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Example1Qa,
    QftSa,
    ThsSa,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub preset: Preset,
    #[arg(long)]
    pub seed: u64,
    /// Chain length in units of the circuit volume (SA presets).
    #[arg(long)]
    pub sweeps: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> WbResult<String> {
    std::fs::read_to_string(path).map_err(|e| WbError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> WbResult<()> {
    std::fs::write(path, text).map_err(|e| WbError::io(path, e))
}

fn load_circuit(path: &Path) -> WbResult<CircuitTensor> {
    parse_circuit(&read(path)?).map_err(|e| WbError::Runtime(format!("{}: {e}", path.display())))
}

/// A preset name, or else a machine file.
pub fn load_machine(spec: &str) -> WbResult<MachineSpec> {
    if let Some(m) = machine_by_name(spec) {
        return Ok(m);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(WbError::Usage(format!("`{spec}` is neither a machine preset nor a file")));
    }
    parse_machine(&read(path)?)
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, records: &[ResultRecord]) -> WbResult<()> {
    match out {
        Some(p) => {
            let mut f = std::fs::File::create(p).map_err(|e| WbError::io(p, e))?;
            write_records(&mut f, records).map_err(|e| WbError::io(p, e))
        }
        None => write_records(&mut &mut *stdout, records).map_err(|e| WbError::io("<stdout>", e)),
    }
}

fn emit_text(out: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> WbResult<()> {
    match out {
        Some(p) => write_file(p, text),
        None => stdout.write_all(text.as_bytes()).map_err(|e| WbError::io("<stdout>", e)),
    }
}

fn dft_distance(c: &CircuitTensor) -> WbResult<f64> {
    use num_complex::Complex64 as C64;
    let n = c.num_qubits();
    let u = circuit_unitary(c)?;
    let d = 1usize << n;
    let w = 2.0 * std::f64::consts::PI / d as f64;
    let s = 1.0 / (d as f64).sqrt();
    let rows: Vec<Vec<C64>> =
        (0..d).map(|r| (0..d).map(|k| C64::from_polar(s, w * ((r * k) % d) as f64)).collect()).collect();
    let refs: Vec<&[C64]> = rows.iter().map(|r| r.as_slice()).collect();
    Ok(phase_distance(&u, &qcl_core::semantics::Matrix::from_rows(&refs))?)
}

/// Parses `argv` and runs one command, returning the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let msg = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{msg}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{msg}");
                    1
                }
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> WbResult<()> {
    if let Some(n) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let hash = config_hash(&format!("{:?}", cli.command));
    match cli.command {
        Command::Generate { which } => {
            let (c, out) = match which {
                Generate::Qft { qubits, swap_area, out } => (gen_qft(qubits, swap_area)?, out),
                Generate::Ths { rows, cols, periods, angles, out } => {
                    let a = match angles.as_deref() {
                        Some([rz, rx, cp]) => ThsAngles { rz: *rz, rx: *rx, cp: *cp },
                        Some(_) => return Err(WbError::Usage("--angles takes three indices".into())),
                        None => THS_DEFAULT_ANGLES,
                    };
                    (gen_ths(rows, cols, periods, a)?, out)
                }
                Generate::Example1 { out } => (example1_input()?, out),
            };
            emit_text(&out, stdout, &emit_circuit(&c)?)
        }
        Command::Cost(a) => {
            let c = load_circuit(&a.circuit)?;
            let machine = load_machine(&a.machine)?;
            for w in machine.warnings() {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let model = CostModel::new(&machine, c.dims())?;
            let rec = ResultRecord::new("cost", &hash, None, 0)
                .with("I", model.total(&c)?)
                .with("gates", c.gate_count() as f64)
                .with("qubits", c.num_qubits() as f64)
                .with("steps", c.time_steps() as f64);
            emit(&a.out, stdout, &[rec])
        }
        Command::Compile(a) => {
            let c = load_circuit(&a.circuit)?;
            let machine = load_machine(&a.machine)?;
            let rules = load_ruleset(&a.rules, c.dims().angle_modulus)?;
            let cfg = SaConfig {
                t_max: a.t_max,
                t_min: a.t_min,
                steps: a.steps,
                seed: a.seed,
                record_stride: a.record_stride.unwrap_or((a.steps / 50).max(1)),
                replicas: a.replicas,
            };
            let ens = run_ensemble(&c, &rules, &machine, &cfg)?;
            if let Some(p) = &a.emit_circuit {
                let best = ens.best().ok_or_else(|| WbError::Runtime("no chain ran".into()))?;
                write_file(p, &emit_circuit(best)?)?;
            }
            emit(&a.out, stdout, &sa_records("compile", &hash, &ens))
        }
        Command::Anneal(a) => {
            let c = load_circuit(&a.circuit)?;
            let machine = load_machine(&a.machine)?;
            let rules = load_ruleset(&a.rules, c.dims().angle_modulus)?;
            let class = qcl_core::class::enumerate_class(&c, &rules, a.cap)?;
            let h = build_hamiltonians(&class, &machine, None)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut recs = Vec::new();
            for &tau in &a.tau {
                let steps = ((tau * a.steps_per_unit).ceil() as usize).max(1);
                let res = evolve_on(&h, &QaConfig { tau, steps, cap: a.cap, ..QaConfig::default() })?;
                let m = measure(&class, &res, a.samples, &mut rng)?;
                let mut r = qa_records("anneal", &hash, &res, Some((m.p_ground, m.equivalent_fraction)));
                for rec in &mut r {
                    rec.seed = Some(a.seed);
                }
                recs.extend(r);
            }
            emit(&a.out, stdout, &recs)
        }
        Command::Verify(a) => {
            let c = load_circuit(&a.circuit)?;
            let d = if a.against_dft {
                dft_distance(&c)?
            } else if let Some(p) = &a.against {
                circuit_distance(&c, &load_circuit(p)?)?
            } else {
                return Err(WbError::Usage("verify needs --against <circuit> or --against-dft".into()));
            };
            let ok = d <= a.tol;
            let rec = ResultRecord::new("verify", &hash, None, 0).with("distance", d).with("equivalent", f64::from(u8::from(ok)));
            emit(&a.out, stdout, &[rec])?;
            if ok {
                Ok(())
            } else {
                Err(WbError::Runtime(format!("circuits differ: distance {d:e} > {:e}", a.tol)))
            }
        }
        Command::ValidateRules(a) => {
            let rules = load_ruleset(&a.rules, a.modulus);
            // A failing builtin is reported rule by rule below, so parse without
            // the validation gate first.
            let set = match rules {
                Ok(s) => s,
                Err(qcl_core::Error::RuleValidationFailed { .. }) => {
                    let text = match qcl_core::rules::library::builtin_text(&a.rules) {
                        Some(t) => t.to_string(),
                        None => read(Path::new(&a.rules))?,
                    };
                    qcl_core::rules::format::parse(&text)?
                }
                Err(e) => return Err(e.into()),
            };
            let mut recs = Vec::new();
            let mut failed = Vec::new();
            for (i, rule) in set.rules.iter().enumerate() {
                let r = validate_rule(rule, a.modulus)?;
                if !r.pass {
                    failed.push(r.name.clone());
                }
                recs.push(
                    ResultRecord::new("validate-rules", &hash, None, i as u64)
                        .label(&r.name)
                        .with("pass", f64::from(u8::from(r.pass)))
                        .with("distance", r.distance)
                        .with("bindings", r.bindings_checked as f64)
                        .with("exhaustive", f64::from(u8::from(r.exhaustive))),
                );
            }
            emit(&a.out, stdout, &recs)?;
            let _ = writeln!(stderr, "{}: {} of {} rules pass", set.name, set.rules.len() - failed.len(), set.rules.len());
            if failed.is_empty() {
                Ok(())
            } else {
                Err(WbError::Runtime(format!("failing rules: {}", failed.join(", "))))
            }
        }
        Command::NoisySim(a) => {
            let c = load_circuit(&a.circuit)?;
            let machine = load_machine(&a.machine)?;
            let mut calib = machine.clone();
            if let Some(x) = a.target_infidelity {
                calib.gate_infidelity.values_mut().for_each(|v| *v = x);
                calib.idle_infidelity = x;
            }
            let noise = NoiseModel::calibrated(&calib, a.calibration_draws, a.seed)?;
            let est = qcl_core::noise::simulate_circuit_infidelity(&c, &machine, &noise, a.trajectories, a.seed)?;
            let model = CostModel::new(&machine, c.dims())?;
            let mut rec = ResultRecord::new("noisy-sim", &hash, Some(a.seed), 0)
                .with("I_sim", est.mean)
                .with("I_sim_stderr", est.stderr)
                .with("I", model.total(&c)?)
                .with("sigma_idle", noise.idle_sigma);
            for (k, s) in &noise.gate_sigma {
                rec = rec.with(&format!("sigma_{k}"), *s);
            }
            emit(&a.out, stdout, &[rec])
        }
        Command::Experiment(a) => {
            let recs = match a.preset {
                Preset::QftSa => {
                    let mut p = QftSaPreset::default();
                    p.qubits = a.qubits.unwrap_or(p.qubits);
                    p.sweeps = a.sweeps.unwrap_or(p.sweeps);
                    p.replicas = a.replicas.unwrap_or(p.replicas);
                    p.run(a.seed)?.1
                }
                Preset::ThsSa => {
                    let mut p = ThsSaPreset::new(a.rows.unwrap_or(4), a.cols.unwrap_or(4));
                    p.sweeps = a.sweeps.unwrap_or(p.sweeps);
                    p.replicas = a.replicas.unwrap_or(p.replicas);
                    p.run(a.seed)?.1
                }
                Preset::Example1Qa => Example1QaPreset::default().run(a.seed)?.1,
            };
            emit(&a.out, stdout, &recs)
        }
        Command::ExportCsv { records, out } => {
            let recs = parse_records(&read(&records)?)?;
            emit_text(&out, stdout, &records_to_csv(&recs)?)
        }
    }
}
