//! Text formats: circuit files, machine files, and result records.
//!
//! Circuit file (canonical form shown; `#` comments and blank lines are
//! accepted on input and dropped on output):
//!
//! ```text
//! qcl-circuit 1
//! dims steps=31 extents=3 modulus=16
//! H t=0 q=0
//! RZ t=1 q=0 k=4
//! CZ t=3 q=0 p=1
//! ```
//!
//! Coordinates of 2D lattices are written `q=r,c`. Instructions are listed by
//! time step, then by qubit index. Angles are grid indices, never floats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use qcl_core::cost::MachineSpec;
use qcl_core::lattice::{decode_instructions, encode_instructions, CircuitTensor, GateKind, Instruction, LatticeDims};
use qcl_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{WbError, WbResult};

pub const CIRCUIT_HEADER: &str = "qcl-circuit 1";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn coords(s: &str) -> Option<Vec<usize>> {
    s.split(',').map(|c| c.parse().ok()).collect()
}

fn join(c: &[usize]) -> String {
    c.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_circuit(text: &str) -> Result<CircuitTensor, Error> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty circuit file"))?;
    if header != CIRCUIT_HEADER {
        return Err(parse_err(n, format!("expected `{CIRCUIT_HEADER}`")));
    }
    let (n, dims_line) = lines.next().ok_or_else(|| parse_err(n, "missing dims line"))?;
    let dims = parse_dims(n, dims_line)?;
    let mut list = Vec::new();
    for (n, line) in lines {
        list.push(parse_instruction(n, line)?);
    }
    encode_instructions(&list, &dims).map_err(|e| match e {
        Error::Parse { .. } => e,
        other => parse_err(0, other.to_string()),
    })
}

fn fields(n: usize, parts: &[&str]) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| parse_err(n, format!("expected key=value, got `{p}`")))?;
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(parse_err(n, format!("duplicate field `{k}`")));
        }
    }
    Ok(out)
}

fn parse_dims(n: usize, line: &str) -> Result<LatticeDims, Error> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.first() != Some(&"dims") {
        return Err(parse_err(n, "expected `dims steps=.. extents=.. modulus=..`"));
    }
    let f = fields(n, &parts[1..])?;
    let get = |k: &str| f.get(k).ok_or_else(|| parse_err(n, format!("missing `{k}`")));
    if f.len() != 3 {
        return Err(parse_err(n, "dims takes exactly steps, extents and modulus"));
    }
    let steps = get("steps")?.parse().map_err(|_| parse_err(n, "bad steps"))?;
    let extents: Vec<usize> = get("extents")?
        .split('x')
        .map(|e| e.parse().ok())
        .collect::<Option<_>>()
        .ok_or_else(|| parse_err(n, "bad extents"))?;
    let modulus = get("modulus")?.parse().map_err(|_| parse_err(n, "bad modulus"))?;
    LatticeDims::new(steps, extents, modulus).map_err(|e| parse_err(n, e.to_string()))
}

fn parse_instruction(n: usize, line: &str) -> Result<Instruction, Error> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let kind = GateKind::parse(parts[0])
        .filter(|k| k.is_gate())
        .ok_or_else(|| parse_err(n, format!("unknown gate `{}`", parts[0])))?;
    let f = fields(n, &parts[1..])?;
    if let Some(k) = f.keys().find(|k| !["t", "q", "k", "p"].contains(&k.as_str())) {
        return Err(parse_err(n, format!("unknown field `{k}`")));
    }
    let t = f.get("t").and_then(|v| v.parse().ok()).ok_or_else(|| parse_err(n, "missing or bad t"))?;
    let q = f.get("q").and_then(|v| coords(v)).ok_or_else(|| parse_err(n, "missing or bad q"))?;
    let mut ins = Instruction::new(kind, t, q);
    if let Some(k) = f.get("k") {
        ins = ins.with_angle(k.parse().map_err(|_| parse_err(n, "bad angle index"))?);
    }
    if let Some(p) = f.get("p") {
        ins = ins.with_partner(coords(p).ok_or_else(|| parse_err(n, "bad partner"))?);
    }
    Ok(ins)
}

pub fn emit_circuit(tensor: &CircuitTensor) -> Result<String, Error> {
    let dims = tensor.dims();
    let mut out = String::new();
    let ext = dims.extents.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
    writeln!(out, "{CIRCUIT_HEADER}").unwrap();
    writeln!(out, "dims steps={} extents={ext} modulus={}", dims.time_steps, dims.angle_modulus).unwrap();
    for ins in decode_instructions(tensor)? {
        write!(out, "{} t={} q={}", ins.kind, ins.t, join(&ins.qubit)).unwrap();
        if let Some(k) = ins.angle {
            write!(out, " k={k}").unwrap();
        }
        if let Some(p) = &ins.partner {
            write!(out, " p={}", join(p)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_machine(text: &str) -> WbResult<MachineSpec> {
    let m: MachineSpec = toml::from_str(text).map_err(|e| WbError::Machine(e.to_string()))?;
    m.check()?;
    Ok(m)
}

pub fn emit_machine(machine: &MachineSpec) -> WbResult<String> {
    toml::to_string(machine).map_err(|e| WbError::Machine(e.to_string()))
}

/// One line of an experiment's output stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    /// Step, checkpoint or chain index, depending on the experiment.
    pub index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica: Option<usize>,
    /// Free-form tag, e.g. a rule name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub values: BTreeMap<String, f64>,
}

impl ResultRecord {
    pub fn new(experiment: &str, config_hash: &str, seed: Option<u64>, index: u64) -> Self {
        ResultRecord {
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            seed,
            index,
            replica: None,
            label: None,
            values: BTreeMap::new(),
        }
    }

    pub fn replica(mut self, r: usize) -> Self {
        self.replica = Some(r);
        self
    }

    pub fn label(mut self, l: &str) -> Self {
        self.label = Some(l.into());
        self
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// Short stable hash of a configuration's canonical text.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn write_records<W: Write>(out: &mut W, records: &[ResultRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}

pub fn parse_records(text: &str) -> WbResult<Vec<ResultRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| WbError::Core(parse_err(i + 1, e.to_string())))
        })
        .collect()
}

/// Flattens records into CSV, one column per value name seen anywhere.
pub fn records_to_csv(records: &[ResultRecord]) -> WbResult<String> {
    let keys: BTreeSet<&String> = records.iter().flat_map(|r| r.values.keys()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["experiment", "config_hash", "seed", "index", "replica", "label"];
    header.extend(keys.iter().map(|k| k.as_str()));
    let io = |e: csv::Error| WbError::Runtime(e.to_string());
    w.write_record(&header).map_err(io)?;
    for r in records {
        let mut row = vec![
            r.experiment.clone(),
            r.config_hash.clone(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.index.to_string(),
            r.replica.map(|s| s.to_string()).unwrap_or_default(),
            r.label.clone().unwrap_or_default(),
        ];
        row.extend(keys.iter().map(|k| r.values.get(*k).map(|v| format!("{v:e}")).unwrap_or_default()));
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| WbError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_qft, gen_ths, THS_DEFAULT_ANGLES};
    use qcl_core::presets::{example1_machine, qft_machine, ths_machine};

    #[test]
    fn circuits_round_trip() {
        for c in [gen_qft(4, true).unwrap(), gen_ths(2, 4, 2, THS_DEFAULT_ANGLES).unwrap()] {
            let text = emit_circuit(&c).unwrap();
            let back = parse_circuit(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(emit_circuit(&back).unwrap(), text);
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\nqcl-circuit 1\n\ndims steps=2 extents=2 modulus=8\nH t=0 q=0  # first\nCZ t=1 q=0 p=1\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(emit_circuit(&c).unwrap(), "qcl-circuit 1\ndims steps=2 extents=2 modulus=8\nH t=0 q=0\nCZ t=1 q=0 p=1\n");
    }

    #[test]
    fn circuit_errors_carry_lines() {
        let bad = "qcl-circuit 1\ndims steps=2 extents=2 modulus=8\nH t=0 q=0\nFOO t=1 q=0\n";
        assert!(matches!(parse_circuit(bad), Err(Error::Parse { line: 4, .. })));
        let bad = "qcl-circuit 1\ndims steps=2 extents=2 modulus=6\n";
        assert!(matches!(parse_circuit(bad), Err(Error::Parse { line: 2, .. })));
        let bad = "qcl-circuit 1\ndims steps=2 extents=2 modulus=8\nRZ t=0 q=0 z=1\n";
        assert!(matches!(parse_circuit(bad), Err(Error::Parse { line: 3, .. })));
        assert!(parse_circuit("qcl-circuit 2\n").is_err());
    }

    #[test]
    fn machines_round_trip() {
        for m in [example1_machine(), ths_machine(), qft_machine()] {
            let text = emit_machine(&m).unwrap();
            let back = parse_machine(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(emit_machine(&back).unwrap(), text);
        }
    }

    #[test]
    fn machine_rejects_unknown_keys() {
        let mut text = emit_machine(&ths_machine()).unwrap();
        text.insert_str(0, "colour = \"blue\"\n");
        assert!(parse_machine(&text).is_err());
    }

    #[test]
    fn records_round_trip_and_flatten() {
        let recs = vec![
            ResultRecord::new("qft-sa", &config_hash("x"), Some(3), 0).with("I", 1.5e-3).with("T", 0.1),
            ResultRecord::new("qft-sa", &config_hash("x"), Some(3), 10).replica(1).with("I", 1.0e-3),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_records(&text).unwrap(), recs);
        let csv = records_to_csv(&recs).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "experiment,config_hash,seed,index,replica,label,I,T");
        assert!(lines.nth(1).unwrap().ends_with(",1,,1e-3,"));
    }

    #[test]
    fn config_hash_is_stable() {
        assert_eq!(config_hash("abc"), config_hash("abc"));
        assert_ne!(config_hash("abc"), config_hash("abd"));
        assert_eq!(config_hash("").len(), 16);
    }
}
