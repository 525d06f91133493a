//! Monomials over named dimension symbols and their pointwise maxima.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::schema::Dim;

/// `coeff · ∏ sym^e` with nonnegative integer exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub coeff: u128,
    pub powers: BTreeMap<String, u32>,
}

impl Default for Monomial {
    fn default() -> Self {
        Monomial::one()
    }
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { coeff: 1, powers: BTreeMap::new() }
    }

    pub fn constant(c: u128) -> Self {
        Monomial { coeff: c, powers: BTreeMap::new() }
    }

    pub fn var(sym: &str, e: u32) -> Self {
        let mut m = Monomial::one();
        if e > 0 {
            m.powers.insert(sym.to_string(), e);
        }
        m
    }

    /// Multiplies by one factor of the dimension: its symbol when named, its
    /// size otherwise.
    pub fn mul_dim(&mut self, dim: &Dim) {
        match (&dim.symbol, dim.size) {
            (Some(s), _) => *self.powers.entry(s.clone()).or_insert(0) += 1,
            (None, Some(n)) => self.coeff = self.coeff.saturating_mul(n as u128),
            (None, None) => {}
        }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.clone();
        out.coeff = out.coeff.saturating_mul(other.coeff);
        for (s, e) in &other.powers {
            *out.powers.entry(s.clone()).or_insert(0) += e;
        }
        out
    }

    pub fn exponent(&self, sym: &str) -> u32 {
        self.powers.get(sym).copied().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.powers.values().sum()
    }

    /// True when `self ≤ other` for every assignment of values ≥ 1.
    pub fn dominated_by(&self, other: &Monomial) -> bool {
        self.coeff <= other.coeff && self.powers.iter().all(|(s, &e)| e <= other.exponent(s))
    }

    pub fn eval(&self, values: &BTreeMap<String, f64>) -> Option<f64> {
        let mut v = self.coeff as f64;
        for (s, &e) in &self.powers {
            v *= values.get(s)?.powi(e as i32);
        }
        Some(v)
    }

    /// Exponent of a single sweep variable after substituting each symbol by
    /// `sweep^rate[sym]`; unknown symbols are held fixed.
    pub fn sweep_degree(&self, rate: &BTreeMap<String, f64>) -> f64 {
        self.powers.iter().map(|(s, &e)| e as f64 * rate.get(s).copied().unwrap_or(0.0)).sum()
    }

    fn ordered<'a>(&'a self, order: &'a [String]) -> impl Iterator<Item = (&'a str, u32)> + 'a {
        let known = order.iter().filter_map(|s| self.powers.get(s).map(|&e| (s.as_str(), e)));
        let rest = self
            .powers
            .iter()
            .filter(|(s, _)| !order.contains(s))
            .map(|(s, &e)| (s.as_str(), e));
        known.chain(rest).filter(|(_, e)| *e > 0)
    }

    /// Renders at squared scale, e.g. `n·d^2`.
    pub fn render(&self, order: &[String]) -> String {
        let mut parts = Vec::new();
        if self.coeff != 1 || self.powers.values().all(|&e| e == 0) {
            parts.push(self.coeff.to_string());
        }
        for (s, e) in self.ordered(order) {
            parts.push(if e == 1 { s.to_string() } else { format!("{s}^{e}") });
        }
        parts.join("·")
    }

    /// Renders the square root, e.g. `d·√m`, `√(m·d)` or `d^(3/2)`.
    pub fn render_sqrt(&self, order: &[String]) -> String {
        let mut whole = Vec::new();
        let mut under = Vec::new();
        let root = integer_sqrt(self.coeff);
        if root * root == self.coeff {
            if root != 1 {
                whole.push(root.to_string());
            }
        } else {
            under.push(self.coeff.to_string());
        }
        let mut fractional = Vec::new();
        for (s, e) in self.ordered(order) {
            match (e / 2, e % 2) {
                (h, 0) => whole.push(if h == 1 { s.to_string() } else { format!("{s}^{h}") }),
                (0, _) => under.push(s.to_string()),
                _ => fractional.push(format!("{s}^({e}/2)")),
            }
        }
        let mut parts = whole;
        parts.extend(fractional);
        match under.len() {
            0 => {}
            1 => parts.push(format!("√{}", under[0])),
            _ => parts.push(format!("√({})", under.join("·"))),
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("·")
        }
    }
}

fn integer_sqrt(n: u128) -> u128 {
    let mut r = (n as f64).sqrt() as u128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

impl FromStr for Monomial {
    type Err = String;

    /// Parses `1`, `d^2`, `n·d^2`, `2*m*d` or `m d`.
    fn from_str(text: &str) -> Result<Self, String> {
        let mut out = Monomial::one();
        let tokens = text.split(['·', '*', ' ']).filter(|t| !t.is_empty());
        let mut any = false;
        for tok in tokens {
            any = true;
            if let Ok(c) = tok.parse::<u128>() {
                out.coeff *= c;
                continue;
            }
            let (s, e) = match tok.split_once('^') {
                Some((s, e)) => (s, e.parse::<u32>().map_err(|_| format!("bad exponent in {tok:?}"))?),
                None => (tok, 1),
            };
            if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(format!("bad factor {tok:?}"));
            }
            out = out.mul(&Monomial::var(s, e));
        }
        if !any {
            return Err("empty monomial".into());
        }
        Ok(out)
    }
}

/// Pointwise maximum of monomials, kept as its maximal elements in
/// first-occurrence order. Equality is set equality.
#[derive(Clone, Debug, Default, Eq)]
pub struct MonomialMax(Vec<Monomial>);

impl PartialEq for MonomialMax {
    fn eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().all(|m| other.0.contains(m))
    }
}

impl MonomialMax {
    pub fn empty() -> Self {
        MonomialMax(Vec::new())
    }

    pub fn push(&mut self, m: Monomial) {
        if self.0.iter().any(|x| m.dominated_by(x)) {
            return;
        }
        self.0.retain(|x| !x.dominated_by(&m));
        self.0.push(m);
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, values: &BTreeMap<String, f64>) -> Option<f64> {
        self.0.iter().try_fold(0.0f64, |acc, m| Some(acc.max(m.eval(values)?)))
    }

    pub fn max_exponent(&self, sym: &str) -> u32 {
        self.0.iter().map(|m| m.exponent(sym)).max().unwrap_or(0)
    }

    pub fn render(&self, order: &[String]) -> String {
        self.join(order, Monomial::render)
    }

    pub fn render_sqrt(&self, order: &[String]) -> String {
        self.join(order, Monomial::render_sqrt)
    }

    fn join(&self, order: &[String], f: fn(&Monomial, &[String]) -> String) -> String {
        if self.0.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                out.push_str(" ∨ ");
            }
            let _ = write!(out, "{}", f(m, order));
        }
        out
    }
}

impl FromIterator<Monomial> for MonomialMax {
    fn from_iter<I: IntoIterator<Item = Monomial>>(iter: I) -> Self {
        let mut out = MonomialMax::empty();
        for m in iter {
            out.push(m);
        }
        out
    }
}

impl FromStr for MonomialMax {
    type Err = String;

    /// Parses `d^2 ∨ n`; `0` is the empty maximum.
    fn from_str(text: &str) -> Result<Self, String> {
        if text.trim() == "0" {
            return Ok(MonomialMax::empty());
        }
        text.split('∨').map(|t| t.trim().parse::<Monomial>()).collect()
    }
}
