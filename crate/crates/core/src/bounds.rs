//! Norm-bound profiles: distribution factor × log power × flattening parameter,
//! with the unspecified order-dependent constants kept as symbolic tags.

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::BoundsError;
use crate::flattening::{chaos_parameters, ChaosParameters};
use crate::schema::{ChaosSchema, DistributionSpec};

/// Distributional factors of the entry law `h`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionParams {
    pub l1: f64,
    pub psi2: f64,
    /// `‖h‖_{L^k}` with `k = alpha_exponent = max(2, ⌊log(d+m)⌋)`.
    pub alpha: f64,
    pub alpha_exponent: u32,
    /// `‖h‖_{L^k}` with `k = max(2, ⌊log m⌋)`.
    pub lp_log_m: f64,
    pub log_m_exponent: u32,
    pub variance: f64,
}

/// `max(2, ⌊ln x⌋)`; the small offset keeps exact powers of e on their integer.
pub fn log_exponent_of(x: f64) -> u32 {
    ((x.ln() + 1e-9).floor().max(2.0)) as u32
}

pub fn distribution_params(dist: &DistributionSpec, d: f64, m: f64) -> Result<DistributionParams, BoundsError> {
    if let DistributionSpec::StandardizedBernoulli { param } = *dist {
        if !(param > 0.0 && param < 1.0) {
            return Err(BoundsError::InvalidParam(param));
        }
    }
    let k = log_exponent_of(d + m);
    let km = log_exponent_of(m);
    Ok(DistributionParams {
        l1: lp_norm(dist, 1.0),
        psi2: psi2_norm(dist),
        alpha: lp_norm(dist, k as f64),
        alpha_exponent: k,
        lp_log_m: lp_norm(dist, km as f64),
        log_m_exponent: km,
        variance: dist.variance(),
    })
}

fn two_point(dist: &DistributionSpec) -> Option<[(f64, f64); 2]> {
    match *dist {
        DistributionSpec::Rademacher | DistributionSpec::EdgeRademacher => Some([(1.0, 0.5), (-1.0, 0.5)]),
        DistributionSpec::StandardizedBernoulli { param: p } => {
            Some([(((1.0 - p) / p).sqrt(), p), (-(p / (1.0 - p)).sqrt(), 1.0 - p)])
        }
        _ => None,
    }
}

/// `h` as a function of a standard Gaussian, for the continuous laws.
fn gaussian_map(dist: &DistributionSpec) -> fn(f64) -> f64 {
    match dist {
        DistributionSpec::CenteredChiSq1 => |x| x * x - 1.0,
        _ => |x| x,
    }
}

/// `‖h‖_{L^k} = (E|h|^k)^{1/k}`.
pub fn lp_norm(dist: &DistributionSpec, k: f64) -> f64 {
    if let Some(law) = two_point(dist) {
        let mut logs: Vec<(f64, f64)> = law.iter().map(|&(v, p)| (k * v.abs().ln(), p)).collect();
        let top = logs.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
        logs.iter_mut().for_each(|x| x.0 -= top);
        let s: f64 = logs.iter().map(|&(l, p)| p * l.exp()).sum();
        return ((top + s.ln()) / k).exp();
    }
    let h = gaussian_map(dist);
    (log_gaussian_expectation(|x| k * h(x).abs().ln()) / k).exp()
}

const QUAD_STEPS: usize = 20_000;

/// `ln E exp(L(g))` for standard Gaussian `g` and an even log-integrand `L`,
/// by composite Simpson on `[0, 1]` and `[1, X]` in log-scaled form.
fn log_gaussian_expectation(log_f: impl Fn(f64) -> f64) -> f64 {
    let log_density = |x: f64| log_f(x) - 0.5 * x * x;
    let upper = {
        // Past the mode of the integrand the Gaussian tail dominates quickly.
        let mut x = 1.0f64;
        let mut best = log_density(0.0).max(log_density(1.0));
        let mut hi = 1.0;
        while x < 400.0 {
            x += 0.25;
            let v = log_density(x);
            if v > best {
                best = v;
            }
            if v < best - 60.0 {
                hi = x;
                break;
            }
            hi = x;
        }
        hi
    };
    let segments = [(0.0, 1.0), (1.0, upper.max(1.5))];
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for &(a, b) in &segments {
        let n = QUAD_STEPS;
        let h = (b - a) / n as f64;
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            // Interior kinks sit on segment ends, never on interior nodes.
            let x = a + i as f64 * h;
            let v = log_density(x);
            if v.is_finite() {
                samples.push((v, w * h / 3.0));
            }
        }
    }
    let top = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = samples.iter().map(|&(v, w)| w * (v - top).exp()).sum();
    // Two half-lines, density normalized by √(2π).
    top + (2.0 * sum).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// `inf{t > 0 : E exp(h²/t²) ≤ 2}`; infinite for laws without a Gaussian tail.
pub fn psi2_norm(dist: &DistributionSpec) -> f64 {
    let excess: Box<dyn Fn(f64) -> f64> = match two_point(dist) {
        Some(law) => Box::new(move |t: f64| law.iter().map(|&(v, p)| p * (v * v / (t * t)).exp()).sum::<f64>() - 2.0),
        None => match dist {
            DistributionSpec::CenteredChiSq1 => return f64::INFINITY,
            _ => {
                let h = gaussian_map(dist);
                Box::new(move |t: f64| {
                    if t * t <= 2.0 {
                        return f64::INFINITY;
                    }
                    log_gaussian_expectation(|x| h(x).powi(2) / (t * t)).exp() - 2.0
                })
            }
        },
    };
    let (mut lo, mut hi) = (1e-3f64, 1.0f64);
    while excess(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Theorem {
    NckUpper,
    /// Iterated NCK upper bound with `‖h‖_{L^{log m}}` in place of `‖h‖_{ψ₂}`.
    NckUpperLogM,
    NckLower,
    StrongNck,
    RosenthalUpper,
    RosenthalLower,
    StrongRosenthal,
}

impl Theorem {
    pub const ALL: [Theorem; 7] = [
        Theorem::NckUpper,
        Theorem::NckUpperLogM,
        Theorem::NckLower,
        Theorem::StrongNck,
        Theorem::RosenthalUpper,
        Theorem::RosenthalLower,
        Theorem::StrongRosenthal,
    ];

    /// The four upper bounds compared by [`best_bound`].
    pub const UPPER: [Theorem; 4] =
        [Theorem::NckUpper, Theorem::StrongNck, Theorem::RosenthalUpper, Theorem::StrongRosenthal];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::NckUpper => "NCK_upper",
            Theorem::NckUpperLogM => "NCK_upper_logm",
            Theorem::NckLower => "NCK_lower",
            Theorem::StrongNck => "StrongNCK",
            Theorem::RosenthalUpper => "Rosenthal_upper",
            Theorem::RosenthalLower => "Rosenthal_lower",
            Theorem::StrongRosenthal => "StrongRosenthal",
        }
    }

    pub fn is_upper(self) -> bool {
        !matches!(self, Theorem::NckLower | Theorem::RosenthalLower)
    }

    pub fn needs_unit_variance(self) -> bool {
        matches!(self, Theorem::RosenthalUpper | Theorem::RosenthalLower | Theorem::StrongRosenthal)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ConstantTag {
    /// Hidden constant of an upper bound, depending only on `q`.
    UpperCq,
    /// Hidden constant of a lower bound, depending only on `q`.
    LowerCq,
}

impl ConstantTag {
    pub fn symbol(self) -> &'static str {
        match self {
            ConstantTag::UpperCq => "C_q",
            ConstantTag::LowerCq => "c_q",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Factor {
    One,
    Psi2,
    L1,
    Alpha,
    LpLogM,
}

impl Factor {
    pub fn symbol(self) -> &'static str {
        match self {
            Factor::One => "1",
            Factor::Psi2 => "psi2",
            Factor::L1 => "L1",
            Factor::Alpha => "alpha",
            Factor::LpLogM => "Lp[log m]",
        }
    }

    fn value(self, p: &DistributionParams) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Psi2 => p.psi2,
            Factor::L1 => p.l1,
            Factor::Alpha => p.alpha,
            Factor::LpLogM => p.lp_log_m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Param {
    Sigma,
    V,
    R,
}

impl Param {
    pub fn symbol(self) -> &'static str {
        match self {
            Param::Sigma => "sigma",
            Param::V => "v",
            Param::R => "r",
        }
    }
}

/// Log power `(q_coeff·q + offset) / 2` of `log(d+m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct LogPower {
    pub q_coeff: i64,
    pub offset: i64,
}

impl LogPower {
    pub const ZERO: LogPower = LogPower { q_coeff: 0, offset: 0 };

    const fn half_q_plus(offset: i64) -> LogPower {
        LogPower { q_coeff: 1, offset }
    }

    pub fn at(self, q: usize) -> Ratio<i64> {
        Ratio::new(self.q_coeff * q as i64 + self.offset, 2)
    }

    pub fn is_zero(self) -> bool {
        self.q_coeff == 0 && self.offset == 0
    }

    fn render(self) -> String {
        match (self.q_coeff, self.offset) {
            (1, 0) => "(q/2)".into(),
            (1, o) if o > 0 => format!("((q+{o})/2)"),
            (1, o) => format!("((q-{})/2)", -o),
            (0, o) => format!("({o}/2)"),
            (c, o) => format!("(({c}q+{o})/2)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundTerm {
    pub negative: bool,
    pub constant: ConstantTag,
    pub factor: Factor,
    pub log_power: LogPower,
    pub param: Param,
    /// `factor^q` at the evaluated distribution.
    pub coefficient: Option<f64>,
    pub log_exponent: Ratio<i64>,
    /// Term value with every hidden constant set to 1, sign included.
    pub value: Option<f64>,
}

impl BoundTerm {
    fn render(&self, factor_power: &str, log_power: &str) -> String {
        let mut parts = vec![self.constant.symbol().to_string()];
        if self.factor != Factor::One {
            parts.push(format!("{}^{}", self.factor.symbol(), factor_power));
        }
        if !self.log_power.is_zero() {
            parts.push(format!("log(d+m)^{log_power}"));
        }
        parts.push(self.param.symbol().into());
        parts.join(" · ")
    }

    pub fn canonical(&self) -> String {
        self.render("q", &self.log_power.render())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundProfile {
    pub theorem: Theorem,
    pub q: usize,
    pub terms: Vec<BoundTerm>,
    /// Sum of the terms with every hidden constant set to 1.
    pub numeric_value: Option<f64>,
    pub notes: Vec<String>,
}

fn term(negative: bool, constant: ConstantTag, factor: Factor, log_power: LogPower, param: Param) -> BoundTerm {
    BoundTerm {
        negative,
        constant,
        factor,
        log_power,
        param,
        coefficient: None,
        log_exponent: Ratio::from_integer(0),
        value: None,
    }
}

fn template(theorem: Theorem) -> Vec<BoundTerm> {
    use ConstantTag::*;
    use Factor::*;
    use Param::*;
    let half_q = LogPower::half_q_plus(0);
    match theorem {
        Theorem::NckUpper => vec![term(false, UpperCq, Psi2, half_q, Sigma)],
        Theorem::NckUpperLogM => vec![term(false, UpperCq, LpLogM, half_q, Sigma)],
        Theorem::NckLower => vec![term(false, LowerCq, L1, LogPower::ZERO, Sigma)],
        Theorem::StrongNck => vec![
            term(false, UpperCq, Psi2, LogPower::ZERO, Sigma),
            term(false, UpperCq, Psi2, LogPower::half_q_plus(2), V),
        ],
        Theorem::RosenthalUpper => vec![
            term(false, UpperCq, One, half_q, Sigma),
            term(false, UpperCq, Alpha, LogPower::half_q_plus(1), R),
        ],
        Theorem::RosenthalLower => vec![
            term(false, LowerCq, One, LogPower::ZERO, Sigma),
            term(true, UpperCq, Alpha, half_q, R),
        ],
        Theorem::StrongRosenthal => vec![
            term(false, UpperCq, One, LogPower::ZERO, Sigma),
            term(false, UpperCq, Alpha, LogPower::half_q_plus(3), V),
        ],
    }
}

impl BoundProfile {
    /// Term structure only, no numbers.
    pub fn symbolic(theorem: Theorem, q: usize) -> Self {
        let mut terms = template(theorem);
        for t in &mut terms {
            t.log_exponent = t.log_power.at(q);
        }
        BoundProfile { theorem, q, terms, numeric_value: None, notes: Vec::new() }
    }

    fn relation(&self) -> &'static str {
        if self.theorem.is_upper() {
            "E‖Y‖ ≲"
        } else {
            "E‖Y‖ ≳"
        }
    }

    fn join(&self, rendered: impl Iterator<Item = String>) -> String {
        let mut out = String::new();
        for (i, (t, s)) in self.terms.iter().zip(rendered).enumerate() {
            match (i, t.negative) {
                (0, false) => {}
                (0, true) => out.push_str("- "),
                (_, false) => out.push_str(" + "),
                (_, true) => out.push_str(" - "),
            }
            out.push_str(&s);
        }
        out
    }

    /// Order-generic serialization, stable for golden files.
    pub fn canonical(&self) -> String {
        format!("{}: {} {}", self.theorem, self.relation(), self.join(self.terms.iter().map(BoundTerm::canonical)))
    }

    /// Serialization with `q` substituted.
    pub fn instantiated(&self) -> String {
        let q = self.q.to_string();
        let body = self.join(self.terms.iter().map(|t| t.render(&q, &ratio_string(t.log_exponent))));
        format!("{}: {} {}", self.theorem, self.relation(), body)
    }

    pub fn term_values(&self) -> Vec<Option<f64>> {
        self.terms.iter().map(|t| t.value).collect()
    }
}

fn ratio_string(r: Ratio<i64>) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("({}/{})", r.numer(), r.denom())
    }
}

/// Instantiates a profile at the chaos parameters and dimensions `d`, `m`.
pub fn bound_profile(
    theorem: Theorem,
    params: &DistributionParams,
    cp: &ChaosParameters,
    q: usize,
    d: f64,
    m: f64,
) -> Result<BoundProfile, BoundsError> {
    if cp.q != q {
        return Err(BoundsError::OrderMismatch { expected: q, found: cp.q });
    }
    let mut profile = BoundProfile::symbolic(theorem, q);
    let values = cp.values();
    let log = (d + m).ln();
    let mut total = Some(0.0);
    for t in &mut profile.terms {
        let coefficient = t.factor.value(params).powi(q as i32);
        t.coefficient = Some(coefficient);
        let param = values.map(|(s, v, r)| match t.param {
            Param::Sigma => s,
            Param::V => v,
            Param::R => r,
        });
        t.value = param.map(|p| {
            let e = *t.log_exponent.numer() as f64 / *t.log_exponent.denom() as f64;
            // A vanishing parameter kills the term even when the factor is infinite.
            let v = if p == 0.0 { 0.0 } else { coefficient * log.powf(e) * p };
            if t.negative {
                -v
            } else {
                v
            }
        });
        total = total.zip(t.value).map(|(a, b)| a + b);
    }
    profile.numeric_value = total;
    profile.notes.push("hidden constants C_q, c_q set to 1".into());
    if theorem.needs_unit_variance() && (params.variance - 1.0).abs() > 1e-12 {
        profile
            .notes
            .push(format!("h has variance {}; this bound assumes unit variance", params.variance));
    }
    Ok(profile)
}

/// Every profile of a bound schema, in [`Theorem::ALL`] order.
pub fn all_profiles(schema: &ChaosSchema) -> Result<Vec<BoundProfile>, BoundsError> {
    let (params, cp, d, m) = evaluate_inputs(schema)?;
    Theorem::ALL.iter().map(|&t| bound_profile(t, &params, &cp, schema.q, d, m)).collect()
}

fn evaluate_inputs(schema: &ChaosSchema) -> Result<(DistributionParams, ChaosParameters, f64, f64), BoundsError> {
    let dims = schema.dims_of()?;
    let params = distribution_params(&schema.distribution, dims.d, dims.m)?;
    Ok((params, chaos_parameters(schema), dims.d, dims.m))
}

/// Ratio below which a regime condition `a ≪ b` is reported as holding.
pub const REGIME_RATIO: f64 = 0.1;

/// The smallest of the four upper profiles at the schema's dimensions, with
/// a note on the regime conditions.
pub fn best_bound(schema: &ChaosSchema) -> Result<(BoundProfile, String), BoundsError> {
    let (params, cp, d, m) = evaluate_inputs(schema)?;
    let q = schema.q;
    let profiles: Vec<BoundProfile> = Theorem::UPPER
        .iter()
        .map(|&t| bound_profile(t, &params, &cp, q, d, m))
        .collect::<Result<_, _>>()?;
    let value = |p: &BoundProfile| p.numeric_value.unwrap_or(f64::INFINITY);
    let best = profiles
        .iter()
        .min_by(|a, b| value(a).total_cmp(&value(b)))
        .expect("four profiles")
        .clone();

    let (sigma, v, r) = cp.values().expect("bound schema has numeric parameters");
    let aq = params.alpha.powi(q as i32);
    let cond = |name: &str, num: f64, den: f64| {
        let ratio = if den > 0.0 { num / den } else { f64::INFINITY };
        let verdict = if ratio <= REGIME_RATIO { "holds" } else { "fails" };
        format!("{name}: ratio {} ({verdict})", fmt_num(ratio))
    };
    let listing: Vec<String> =
        profiles.iter().map(|p| format!("{}={}", p.theorem, fmt_num(value(p)))).collect();
    let explanation = format!(
        "{} is the smallest upper profile with constants set to 1 [{}]; regime conditions: {}; {}; {}",
        best.theorem,
        listing.join(", "),
        cond("v ≪ σ", v, sigma),
        cond("α^q·v ≪ σ", aq * v, sigma),
        cond("r ≪ σ", r, sigma),
    );
    Ok((best, explanation))
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.4e}")
    }
}

/// Log power after `k` of `q` iterations of the NCK step.
pub fn partial_nck_log_power(k: u32, q: u32) -> Result<Ratio<u32>, BoundsError> {
    if k > q {
        return Err(BoundsError::TooManyIterations { k, q });
    }
    Ok(Ratio::new(k, 2))
}
