//! Linear angle expressions over the rule variables `a`, `b`, `c` and the
//! step variable `d`, with a constant that is a dyadic fraction of π.

use std::fmt;

pub const NUM_VARS: usize = 4;
pub const VAR_NAMES: [char; NUM_VARS] = ['a', 'b', 'c', 'd'];
/// Index of the step variable `d` (drawn from the rule's Δ set).
pub const DELTA: usize = 3;

/// `num·π/den` with `den` a power of two, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PiFraction {
    pub num: i64,
    pub den: u64,
}

impl PiFraction {
    pub const ZERO: PiFraction = PiFraction { num: 0, den: 1 };
    pub const PI: PiFraction = PiFraction { num: 1, den: 1 };

    pub fn new(num: i64, den: u64) -> Option<Self> {
        if den == 0 || !den.is_power_of_two() {
            return None;
        }
        let mut f = PiFraction { num, den };
        while f.den > 1 && f.num % 2 == 0 {
            f.num /= 2;
            f.den /= 2;
        }
        if f.num == 0 {
            f.den = 1;
        }
        Some(f)
    }

    /// Grid index `k` with `2πk/M = num·π/den`, if it lies on the grid.
    pub fn to_index(self, modulus: u64) -> Option<u64> {
        // k = num·M/(2·den)
        let m = modulus as i128;
        let top = self.num as i128 * m;
        let bottom = 2 * self.den as i128;
        if top % bottom != 0 {
            return None;
        }
        Some((top / bottom).rem_euclid(m) as u64)
    }

    pub fn neg(self) -> Self {
        PiFraction { num: -self.num, den: self.den }
    }

    pub fn add(self, other: Self) -> Self {
        let den = self.den.max(other.den);
        let a = self.num * (den / self.den) as i64;
        let b = other.num * (den / other.den) as i64;
        PiFraction::new(a + b, den).expect("power-of-two denominator")
    }
}

impl Default for PiFraction {
    fn default() -> Self {
        PiFraction::ZERO
    }
}

impl fmt::Display for PiFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            return f.write_str("0");
        }
        let sign = if self.num < 0 { "-" } else { "" };
        let n = self.num.unsigned_abs();
        match (n, self.den) {
            (1, 1) => write!(f, "{sign}pi"),
            (1, d) => write!(f, "{sign}pi/{d}"),
            (n, 1) => write!(f, "{sign}{n}pi"),
            (n, d) => write!(f, "{sign}{n}pi/{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AngleExpr {
    pub coeffs: [i64; NUM_VARS],
    pub constant: PiFraction,
}

impl AngleExpr {
    pub fn var(i: usize) -> Self {
        let mut coeffs = [0; NUM_VARS];
        coeffs[i] = 1;
        AngleExpr { coeffs, constant: PiFraction::ZERO }
    }

    pub fn constant(c: PiFraction) -> Self {
        AngleExpr { coeffs: [0; NUM_VARS], constant: c }
    }

    pub fn uses(&self, i: usize) -> bool {
        self.coeffs[i] != 0
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_VARS).filter(|&i| self.coeffs[i] != 0)
    }

    /// Evaluates with all used variables bound; `None` if one is missing or the
    /// constant is off-grid.
    pub fn eval(&self, values: &[Option<u64>; NUM_VARS], modulus: u64) -> Option<u64> {
        let m = modulus as i128;
        let mut acc = self.constant.to_index(modulus)? as i128;
        for i in self.vars() {
            acc += self.coeffs[i] as i128 * values[i]? as i128;
        }
        Some(acc.rem_euclid(m) as u64)
    }

    /// Solves `self = target (mod M)` for the single unbound variable `var`,
    /// which must carry a coefficient of ±1.
    pub fn solve_for(
        &self,
        var: usize,
        target: u64,
        values: &[Option<u64>; NUM_VARS],
        modulus: u64,
    ) -> Option<u64> {
        let c = self.coeffs[var];
        if c != 1 && c != -1 {
            return None;
        }
        let m = modulus as i128;
        let mut rest = self.constant.to_index(modulus)? as i128;
        for i in self.vars().filter(|&i| i != var) {
            rest += self.coeffs[i] as i128 * values[i]? as i128;
        }
        let v = (target as i128 - rest) * c as i128;
        Some(v.rem_euclid(m) as u64)
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return None;
        }
        let mut expr = AngleExpr::default();
        let mut rest = s.as_str();
        let mut first = true;
        while !rest.is_empty() {
            let (neg, body) = match rest.as_bytes()[0] {
                b'+' if !first => (false, &rest[1..]),
                b'-' => (true, &rest[1..]),
                _ if first => (false, rest),
                _ => return None,
            };
            first = false;
            let end = body[1.min(body.len())..]
                .find(['+', '-'])
                .map(|i| i + 1)
                .unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            parse_term(term, neg, &mut expr)?;
        }
        Some(expr)
    }
}

fn parse_term(term: &str, neg: bool, expr: &mut AngleExpr) -> Option<()> {
    let sign = if neg { -1 } else { 1 };
    if let Some(pos) = term.find("pi") {
        let n: i64 = if pos == 0 { 1 } else { term[..pos].parse().ok()? };
        let tail = &term[pos + 2..];
        let den: u64 = if tail.is_empty() { 1 } else { tail.strip_prefix('/')?.parse().ok()? };
        let c = PiFraction::new(sign * n, den)?;
        expr.constant = expr.constant.add(c);
        return Some(());
    }
    let last = term.chars().last()?;
    if let Some(v) = VAR_NAMES.iter().position(|&c| c == last) {
        let head = &term[..term.len() - 1];
        let n: i64 = if head.is_empty() { 1 } else { head.parse().ok()? };
        expr.coeffs[v] += sign * n;
        return Some(());
    }
    let n: i64 = term.parse().ok()?;
    if n != 0 {
        return None;
    }
    Some(())
}

impl fmt::Display for AngleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for i in 0..NUM_VARS {
            let c = self.coeffs[i];
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else if wrote { "+" } else { "" };
            let mag = c.unsigned_abs();
            if mag == 1 {
                write!(f, "{sign}{}", VAR_NAMES[i])?;
            } else {
                write!(f, "{sign}{mag}{}", VAR_NAMES[i])?;
            }
            wrote = true;
        }
        if self.constant.num != 0 || !wrote {
            let s = self.constant.to_string();
            if wrote && !s.starts_with('-') {
                f.write_str("+")?;
            }
            f.write_str(&s)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        for s in ["a", "-a", "a-d", "b+d", "pi", "-pi/2", "0", "a+pi", "2a-pi/8", "3pi/4"] {
            let e = AngleExpr::parse(s).unwrap_or_else(|| panic!("{s}"));
            assert_eq!(e.to_string(), s);
        }
        assert!(AngleExpr::parse("q").is_none());
        assert!(AngleExpr::parse("pi/3").is_none());
    }

    #[test]
    fn grid_evaluation() {
        let e = AngleExpr::parse("a-d").unwrap();
        let vals = [Some(4), None, None, Some(1)];
        assert_eq!(e.eval(&vals, 16), Some(3));
        assert_eq!(AngleExpr::parse("-pi/2").unwrap().eval(&vals, 16), Some(12));
        assert_eq!(AngleExpr::parse("pi/16").unwrap().eval(&vals, 16), None);
        let vals = [None, None, None, Some(15)];
        assert_eq!(e.solve_for(0, 3, &vals, 16), Some(2));
    }
}
