//! Text format for rule sets.
//!
//! ```text
//! ruleset <name>
//!
//! rule <name>
//!   note <free text>          (any number)
//!   window first|last         (optional)
//!   delta pi -pi pi/2 ...     (optional)
//!   euler                     (optional)
//!   lhs
//!     <token> <token> ...     (one line per qubit row, one token per time step)
//!   rhs
//!     <token> <token> ...
//! end
//! ```
//!
//! Tokens are `Idle`, `H`, `CZ`, `SWAP`, `BUSY`, `RZ(e)`, `RX(e)`, `CP(e)` with
//! `e` a linear expression in `a`, `b`, `c`, `d` plus a multiple of π such as
//! `a-d` or `-pi/2`. A two-qubit control pairs with the `BUSY` on the row
//! below. Lines starting with `#` and blank lines are ignored. [`emit`] writes
//! the canonical form, which [`parse`] reads back unchanged.

use std::fmt::Write;

use super::{AngleExpr, Pattern, PatternToken, PiFraction, Rule, RuleSet, TimeWindow};
use crate::error::{Error, Result};
use crate::lattice::GateKind;

pub fn parse_pattern_token(s: &str) -> Option<PatternToken> {
    let (name, angle) = match s.find('(') {
        Some(i) => {
            let inner = s[i + 1..].strip_suffix(')')?;
            (&s[..i], Some(AngleExpr::parse(inner)?))
        }
        None => (s, None),
    };
    let kind = GateKind::parse(name)?;
    if kind.is_parametric() != angle.is_some() {
        return None;
    }
    Some(PatternToken { kind, angle })
}

fn token_text(t: &PatternToken) -> String {
    match t.angle {
        Some(e) => format!("{}({e})", t.kind.name()),
        None => t.kind.name().to_string(),
    }
}

#[derive(PartialEq)]
enum Section {
    Header,
    Lhs,
    Rhs,
}

struct Draft {
    name: String,
    line: usize,
    notes: Vec<String>,
    window: Option<TimeWindow>,
    deltas: Vec<PiFraction>,
    euler: bool,
    lhs: Vec<Vec<PatternToken>>,
    rhs: Vec<Vec<PatternToken>>,
    section: Section,
}

impl Draft {
    fn finish(self) -> Result<Rule> {
        let err = |m: String| Error::Parse { line: self.line, message: format!("rule {}: {m}", self.name) };
        let lhs = Pattern::from_rows(self.lhs.clone()).map_err(|e| err(e.to_string()))?;
        let rhs = Pattern::from_rows(self.rhs.clone()).map_err(|e| err(e.to_string()))?;
        let rule = Rule {
            name: self.name.clone(),
            lhs,
            rhs,
            window: self.window,
            deltas: self.deltas.clone(),
            euler: self.euler,
            notes: self.notes.clone(),
        };
        rule.check().map_err(|e| err(e.to_string()))?;
        Ok(rule)
    }
}

pub fn parse(text: &str) -> Result<RuleSet> {
    let mut name: Option<String> = None;
    let mut rules = Vec::new();
    let mut draft: Option<Draft> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |m: &str| Error::Parse { line, message: m.to_string() };
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let (head, rest) = s.split_once(char::is_whitespace).map_or((s, ""), |(h, r)| (h, r.trim()));
        match (&mut draft, head) {
            (None, "ruleset") if name.is_none() && !rest.is_empty() => name = Some(rest.to_string()),
            (None, "rule") if name.is_some() && !rest.is_empty() => {
                draft = Some(Draft {
                    name: rest.to_string(),
                    line,
                    notes: Vec::new(),
                    window: None,
                    deltas: Vec::new(),
                    euler: false,
                    lhs: Vec::new(),
                    rhs: Vec::new(),
                    section: Section::Header,
                })
            }
            (None, _) => return Err(err("expected `ruleset <name>` then `rule <name>`")),
            (Some(_), "end") if rest.is_empty() => rules.push(draft.take().expect("open rule").finish()?),
            (Some(d), "note") if d.section == Section::Header => d.notes.push(rest.to_string()),
            (Some(d), "window") if d.section == Section::Header => {
                d.window = Some(match rest {
                    "first" => TimeWindow::First,
                    "last" => TimeWindow::Last,
                    _ => return Err(err("window must be `first` or `last`")),
                })
            }
            (Some(d), "delta") if d.section == Section::Header => {
                for w in rest.split_whitespace() {
                    let e = AngleExpr::parse(w).filter(|e| e.coeffs == [0; 4]).ok_or_else(|| err("bad delta value"))?;
                    d.deltas.push(e.constant);
                }
            }
            (Some(d), "euler") if d.section == Section::Header && rest.is_empty() => d.euler = true,
            (Some(d), "lhs") if d.section == Section::Header && rest.is_empty() => d.section = Section::Lhs,
            (Some(d), "rhs") if d.section == Section::Lhs && rest.is_empty() => d.section = Section::Rhs,
            (Some(d), _) if d.section != Section::Header => {
                let row = s
                    .split_whitespace()
                    .map(|w| parse_pattern_token(w).ok_or_else(|| err(&format!("bad token `{w}`"))))
                    .collect::<Result<Vec<_>>>()?;
                match d.section {
                    Section::Lhs => d.lhs.push(row),
                    _ => d.rhs.push(row),
                }
            }
            (Some(_), _) => return Err(err(&format!("unexpected `{head}`"))),
        }
    }
    if let Some(d) = draft {
        return Err(Error::Parse { line: d.line, message: format!("rule {} has no `end`", d.name) });
    }
    let name = name.ok_or(Error::Parse { line: 0, message: "missing `ruleset <name>`".into() })?;
    Ok(RuleSet::new(&name, rules))
}

pub fn emit(rs: &RuleSet) -> String {
    let mut out = format!("ruleset {}\n", rs.name);
    for r in &rs.rules {
        let _ = writeln!(out, "\nrule {}", r.name);
        for n in &r.notes {
            let _ = writeln!(out, "  note {n}");
        }
        match r.window {
            Some(TimeWindow::First) => out.push_str("  window first\n"),
            Some(TimeWindow::Last) => out.push_str("  window last\n"),
            None => {}
        }
        if !r.deltas.is_empty() {
            let ds: Vec<String> = r.deltas.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "  delta {}", ds.join(" "));
        }
        if r.euler {
            out.push_str("  euler\n");
        }
        for (label, p) in [("lhs", &r.lhs), ("rhs", &r.rhs)] {
            let _ = writeln!(out, "  {label}");
            for row in 0..p.rows {
                let toks: Vec<String> = p.row(row).iter().map(token_text).collect();
                let _ = writeln!(out, "    {}", toks.join(" "));
            }
        }
        out.push_str("end\n");
    }
    out
}
