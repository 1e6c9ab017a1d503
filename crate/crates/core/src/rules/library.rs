//! Built-in rule sets and the validating loader.

use super::{format, RuleSet};
use crate::error::{Error, Result};

pub const BUILTIN: [(&str, &str); 3] = [
    ("example1", include_str!("library/example1.rules")),
    ("ths", include_str!("library/ths.rules")),
    ("qft", include_str!("library/qft.rules")),
];

pub fn builtin_text(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Loads a built-in set by name, or else a rule file by path, and validates
/// every rule at `modulus`.
pub fn load_ruleset(name_or_path: &str, modulus: u64) -> Result<RuleSet> {
    let owned;
    let text = match builtin_text(name_or_path) {
        Some(t) => t,
        None => {
            owned = std::fs::read_to_string(name_or_path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read rule file {name_or_path}: {e}")))?;
            &owned
        }
    };
    let rs = format::parse(text)?;
    rs.validate(modulus)?;
    Ok(rs)
}
