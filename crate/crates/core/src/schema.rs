//! Declarative model of a matrix chaos of (nearly) combinatorial type.
//!
//! A chaos has `p` summation indices `s_0..s_{p-1}` with ranges `S_u`, `q` chaos
//! coordinates and two matrix coordinates, each an ordered subset of the
//! summation indices. Coordinates are addressed 0-based: `0..q` are the chaos
//! coordinates, `q` is the row coordinate and `q + 1` the column coordinate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

/// Range of one summation index: a symbol, a size, or both.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DimRepr", into = "DimRepr")]
pub struct Dim {
    pub symbol: Option<String>,
    pub size: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DimRepr {
    Size(u64),
    Symbol(String),
    Full {
        #[serde(default)]
        symbol: Option<String>,
        #[serde(default)]
        size: Option<u64>,
    },
}

impl TryFrom<DimRepr> for Dim {
    type Error = String;

    fn try_from(r: DimRepr) -> Result<Self, String> {
        let dim = match r {
            DimRepr::Size(n) => Dim::sized(n),
            DimRepr::Symbol(s) => Dim::symbol(&s),
            DimRepr::Full { symbol, size } => Dim { symbol, size },
        };
        if dim.symbol.is_none() && dim.size.is_none() {
            return Err("dimension needs a size or a symbol".into());
        }
        if let Some(s) = &dim.symbol {
            if !is_symbol(s) {
                return Err(format!("invalid dimension symbol {s:?}"));
            }
        }
        Ok(dim)
    }
}

impl From<Dim> for DimRepr {
    fn from(d: Dim) -> Self {
        match (d.symbol, d.size) {
            (None, Some(n)) => DimRepr::Size(n),
            (Some(s), None) => DimRepr::Symbol(s),
            (symbol, size) => DimRepr::Full { symbol, size },
        }
    }
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Dim {
    pub fn sized(n: u64) -> Self {
        Dim { symbol: None, size: Some(n) }
    }

    pub fn symbol(s: &str) -> Self {
        Dim { symbol: Some(s.to_string()), size: None }
    }

    pub fn bound(s: &str, n: u64) -> Self {
        Dim { symbol: Some(s.to_string()), size: Some(n) }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.symbol, self.size) {
            (Some(s), Some(n)) => write!(f, "{s}={n}"),
            (Some(s), None) => write!(f, "{s}"),
            (None, Some(n)) => write!(f, "{n}"),
            (None, None) => write!(f, "?"),
        }
    }
}

/// Ordered list of summation-index identifiers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet(pub Vec<usize>);

impl IndexSet {
    pub fn new(v: impl Into<Vec<usize>>) -> Self {
        IndexSet(v.into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Bitmask of member indices; schemas are limited to 64 indices.
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &u| m | (1u64 << u))
    }
}

impl From<Vec<usize>> for IndexSet {
    fn from(v: Vec<usize>) -> Self {
        IndexSet(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    AllDistinct(Vec<usize>),
    Less(usize, usize),
    Greater(usize, usize),
    NotEqualTuple(Vec<usize>, Vec<usize>),
}

impl Constraint {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Constraint::AllDistinct(v) => v.clone(),
            Constraint::Less(a, b) | Constraint::Greater(a, b) => vec![*a, *b],
            Constraint::NotEqualTuple(a, b) => a.iter().chain(b).copied().collect(),
        }
    }

    pub fn holds(&self, s: &[u64]) -> bool {
        match self {
            Constraint::AllDistinct(v) => {
                for (i, &a) in v.iter().enumerate() {
                    if v[i + 1..].iter().any(|&b| s[a] == s[b]) {
                        return false;
                    }
                }
                true
            }
            Constraint::Less(a, b) => s[*a] < s[*b],
            Constraint::Greater(a, b) => s[*a] > s[*b],
            Constraint::NotEqualTuple(a, b) => a.iter().zip(b).any(|(&x, &y)| s[x] != s[y]),
        }
    }
}

/// Conjunction of indicator constraints; the weight is `f(s) ∈ {0, 1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl WeightSpec {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        WeightSpec { constraints }
    }

    pub fn is_trivial(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn holds(&self, s: &[u64]) -> bool {
        self.constraints.iter().all(|c| c.holds(s))
    }
}

/// Law of the scalar variables feeding the chaos.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DistributionSpec {
    #[default]
    Gaussian,
    Rademacher,
    /// Centered, unit-variance Bernoulli with success probability `param`.
    StandardizedBernoulli { param: f64 },
    /// Rademacher signs indexed by unordered pairs of vertex labels.
    EdgeRademacher,
    /// `g² − 1` for standard Gaussian `g`; mean 0, variance 2.
    CenteredChiSq1,
}

impl DistributionSpec {
    pub fn variance(&self) -> f64 {
        match self {
            DistributionSpec::CenteredChiSq1 => 2.0,
            _ => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistributionSpec::Gaussian => "Gaussian",
            DistributionSpec::Rademacher => "Rademacher",
            DistributionSpec::StandardizedBernoulli { .. } => "StandardizedBernoulli",
            DistributionSpec::EdgeRademacher => "EdgeRademacher",
            DistributionSpec::CenteredChiSq1 => "CenteredChiSq1",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSchema {
    pub p: usize,
    pub dims: Vec<Dim>,
    pub q: usize,
    pub chaos_coords: Vec<IndexSet>,
    pub row_coord: IndexSet,
    pub col_coord: IndexSet,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default)]
    pub distribution: DistributionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// Derived sizes: `d1`, `d2`, `d = max(d1, d2)`, per-coordinate alphabets `m_t`
/// and `m = max_t m_t`. Floats, since products outgrow `u64` quickly.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedDims {
    pub d1: f64,
    pub d2: f64,
    pub d: f64,
    pub m_t: Vec<f64>,
    pub m: f64,
}

impl ChaosSchema {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        serde_json::from_str(text).map_err(|e| SchemaError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Coordinate `t` in `0..q+2`.
    pub fn coord(&self, t: usize) -> &IndexSet {
        if t < self.q {
            &self.chaos_coords[t]
        } else if t == self.q {
            &self.row_coord
        } else if t == self.q + 1 {
            &self.col_coord
        } else {
            panic!("coordinate {t} out of range for q = {}", self.q)
        }
    }

    pub fn n_coords(&self) -> usize {
        self.q + 2
    }

    pub fn label(&self, u: usize) -> String {
        match &self.labels {
            Some(l) if u < l.len() => l[u].clone(),
            _ => format!("s{u}"),
        }
    }

    /// Concatenated index labels of coordinate `t`; `∅` when empty.
    pub fn coord_label(&self, t: usize) -> String {
        let c = self.coord(t);
        if c.is_empty() {
            return "∅".into();
        }
        c.iter().map(|u| self.label(u)).collect()
    }

    /// Dimension symbols in order of first appearance.
    pub fn symbols(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for d in &self.dims {
            if let Some(s) = &d.symbol {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
        }
        out
    }

    pub fn is_bound(&self) -> bool {
        self.dims.iter().all(|d| d.size.is_some())
    }

    pub fn sizes(&self) -> Result<Vec<u64>, SchemaError> {
        self.dims
            .iter()
            .enumerate()
            .map(|(u, d)| {
                let n = d.size.ok_or_else(|| SchemaError::Unbound {
                    index: u,
                    symbol: d.symbol.clone(),
                })?;
                if n == 0 {
                    return Err(SchemaError::ZeroDimension(n));
                }
                Ok(n)
            })
            .collect()
    }

    /// Binds symbol sizes. Every key must name a symbol of the schema.
    pub fn bind(&self, bindings: &BTreeMap<String, u64>) -> Result<Self, SchemaError> {
        let symbols = self.symbols();
        if let Some(k) = bindings.keys().find(|k| !symbols.contains(k)) {
            return Err(SchemaError::UnknownSymbol(k.clone()));
        }
        let mut out = self.clone();
        for d in &mut out.dims {
            if let Some(n) = d.symbol.as_ref().and_then(|s| bindings.get(s)) {
                d.size = Some(*n);
            }
        }
        Ok(out)
    }

    /// Drops sizes from every symbolic dimension.
    pub fn unbind(&self) -> Self {
        let mut out = self.clone();
        for d in &mut out.dims {
            if d.symbol.is_some() {
                d.size = None;
            }
        }
        out
    }

    pub fn coord_size(&self, t: usize) -> Result<f64, SchemaError> {
        let sizes = self.sizes()?;
        Ok(self.coord(t).iter().map(|u| sizes[u] as f64).product())
    }

    pub fn dims_of(&self) -> Result<DerivedDims, SchemaError> {
        let d1 = self.coord_size(self.q)?;
        let d2 = self.coord_size(self.q + 1)?;
        let m_t: Vec<f64> = (0..self.q).map(|t| self.coord_size(t)).collect::<Result<_, _>>()?;
        let m = m_t.iter().copied().fold(0.0, f64::max);
        Ok(DerivedDims { d1, d2, d: d1.max(d2), m_t, m })
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Applies a permutation `perm[old] = new` to the summation indices.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let map_set = |s: &IndexSet| IndexSet(s.iter().map(|u| perm[u]).collect());
        let map_vec = |v: &[usize]| v.iter().map(|&u| perm[u]).collect::<Vec<_>>();
        let mut dims = self.dims.clone();
        for (old, d) in self.dims.iter().enumerate() {
            dims[perm[old]] = d.clone();
        }
        let labels = self.labels.as_ref().map(|l| {
            let mut out = l.clone();
            for (old, s) in l.iter().enumerate() {
                out[perm[old]] = s.clone();
            }
            out
        });
        let constraints = self
            .weight
            .constraints
            .iter()
            .map(|c| match c {
                Constraint::AllDistinct(v) => Constraint::AllDistinct(map_vec(v)),
                Constraint::Less(a, b) => Constraint::Less(perm[*a], perm[*b]),
                Constraint::Greater(a, b) => Constraint::Greater(perm[*a], perm[*b]),
                Constraint::NotEqualTuple(a, b) => Constraint::NotEqualTuple(map_vec(a), map_vec(b)),
            })
            .collect();
        ChaosSchema {
            p: self.p,
            dims,
            q: self.q,
            chaos_coords: self.chaos_coords.iter().map(map_set).collect(),
            row_coord: map_set(&self.row_coord),
            col_coord: map_set(&self.col_coord),
            weight: WeightSpec::new(constraints),
            distribution: self.distribution.clone(),
            labels,
        }
    }

    /// Swaps the row and column coordinates.
    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.row_coord, &mut out.col_coord);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ZeroOrder,
    CoordCountMismatch { declared: usize, found: usize },
    DimCountMismatch { declared: usize, found: usize },
    TooManyIndices { p: usize },
    IndexOutOfRange { coord: String, index: usize },
    DuplicateIndex { coord: String, index: usize },
    ZeroDimension { index: usize },
    MalformedConstraint { constraint: usize, reason: String },
    UnsatisfiableWeight,
    SatisfiabilityUndetermined,
    InvalidDistribution { reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroOrder => write!(f, "q = 0: a chaos needs at least one chaos coordinate"),
            Violation::CoordCountMismatch { declared, found } => {
                write!(f, "q = {declared} but {found} chaos coordinates given")
            }
            Violation::DimCountMismatch { declared, found } => {
                write!(f, "p = {declared} but {found} dimensions given")
            }
            Violation::TooManyIndices { p } => write!(f, "p = {p} exceeds the supported 64 indices"),
            Violation::IndexOutOfRange { coord, index } => {
                write!(f, "index out of range: {index} in {coord}")
            }
            Violation::DuplicateIndex { coord, index } => {
                write!(f, "duplicate index {index} in {coord}")
            }
            Violation::ZeroDimension { index } => write!(f, "dimension of index {index} is 0"),
            Violation::MalformedConstraint { constraint, reason } => {
                write!(f, "malformed constraint #{constraint}: {reason}")
            }
            Violation::UnsatisfiableWeight => write!(f, "unsatisfiable weight"),
            Violation::SatisfiabilityUndetermined => {
                write!(f, "weight satisfiability undetermined within search budget")
            }
            Violation::InvalidDistribution { reason } => write!(f, "invalid distribution: {reason}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate(schema: &ChaosSchema) -> ValidationReport {
    let mut violations = Vec::new();
    let p = schema.p;
    if schema.q == 0 {
        violations.push(Violation::ZeroOrder);
    }
    if schema.chaos_coords.len() != schema.q {
        violations.push(Violation::CoordCountMismatch {
            declared: schema.q,
            found: schema.chaos_coords.len(),
        });
    }
    if schema.dims.len() != p {
        violations.push(Violation::DimCountMismatch { declared: p, found: schema.dims.len() });
    }
    if p > 64 {
        violations.push(Violation::TooManyIndices { p });
    }
    let named = schema
        .chaos_coords
        .iter()
        .enumerate()
        .map(|(t, c)| (format!("chaos coordinate {t}"), c))
        .chain([("row coordinate".to_string(), &schema.row_coord)])
        .chain([("column coordinate".to_string(), &schema.col_coord)]);
    for (name, c) in named {
        let mut seen = BTreeSet::new();
        for u in c.iter() {
            if u >= p {
                violations.push(Violation::IndexOutOfRange { coord: name.clone(), index: u });
            } else if !seen.insert(u) {
                violations.push(Violation::DuplicateIndex { coord: name.clone(), index: u });
            }
        }
    }
    for (u, d) in schema.dims.iter().enumerate() {
        if d.size == Some(0) {
            violations.push(Violation::ZeroDimension { index: u });
        }
    }
    for (i, c) in schema.weight.constraints.iter().enumerate() {
        if let Some(&u) = c.indices().iter().find(|&&u| u >= p) {
            violations.push(Violation::IndexOutOfRange { coord: format!("constraint #{i}"), index: u });
        }
        if let Constraint::NotEqualTuple(a, b) = c {
            if a.len() != b.len() {
                violations.push(Violation::MalformedConstraint {
                    constraint: i,
                    reason: format!("tuple lengths {} and {} differ", a.len(), b.len()),
                });
            }
        }
    }
    if let DistributionSpec::StandardizedBernoulli { param } = schema.distribution {
        if !(param > 0.0 && param < 1.0) {
            violations.push(Violation::InvalidDistribution {
                reason: format!("Bernoulli parameter {param} outside (0, 1)"),
            });
        }
    }
    if violations.is_empty() {
        match weight_satisfiable(schema) {
            Some(true) => {}
            Some(false) => violations.push(Violation::UnsatisfiableWeight),
            None => violations.push(Violation::SatisfiabilityUndetermined),
        }
    }
    ValidationReport { violations }
}

const SAT_BUDGET: u64 = 2_000_000;

/// Decides whether some `s` in the lattice satisfies every constraint.
///
/// The constraints only compare index values, so replacing values by their
/// ranks keeps a solution valid; searching `[0, min(S_u, p))` is complete.
/// Unbound symbols count as arbitrarily large. `None` means the search
/// budget ran out.
pub fn weight_satisfiable(schema: &ChaosSchema) -> Option<bool> {
    let constraints = &schema.weight.constraints;
    if constraints.is_empty() {
        return Some(true);
    }
    let p = schema.p;
    let domain: Vec<u64> = schema
        .dims
        .iter()
        .map(|d| d.size.map_or(p as u64, |n| n.min(p as u64)))
        .collect();

    for c in constraints {
        if let Constraint::AllDistinct(v) = c {
            let mut sizes: Vec<u64> = v.iter().map(|&u| domain[u]).collect();
            sizes.sort_unstable();
            if sizes.iter().enumerate().any(|(i, &n)| n < i as u64 + 1) {
                return Some(false);
            }
        }
    }
    if order_cycle(p, constraints) {
        return Some(false);
    }
    if let Some(s) = rank_candidate(p, constraints) {
        if s.iter().zip(&domain).all(|(v, n)| v < n) && constraints.iter().all(|c| c.holds(&s)) {
            return Some(true);
        }
    }

    let involved: Vec<usize> = {
        let set: BTreeSet<usize> = constraints.iter().flat_map(|c| c.indices()).collect();
        set.into_iter().collect()
    };
    let mut position = vec![usize::MAX; p];
    for (i, &u) in involved.iter().enumerate() {
        position[u] = i;
    }
    let mut due: Vec<Vec<&Constraint>> = vec![Vec::new(); involved.len()];
    for c in constraints {
        let last = c.indices().iter().map(|&u| position[u]).max().unwrap_or(0);
        due[last].push(c);
    }
    let mut s = vec![0u64; p];
    let mut nodes = 0u64;
    search(0, &involved, &domain, &due, &mut s, &mut nodes)
}

fn search(
    depth: usize,
    order: &[usize],
    domain: &[u64],
    due: &[Vec<&Constraint>],
    s: &mut [u64],
    nodes: &mut u64,
) -> Option<bool> {
    if depth == order.len() {
        return Some(true);
    }
    let u = order[depth];
    for v in 0..domain[u] {
        *nodes += 1;
        if *nodes > SAT_BUDGET {
            return None;
        }
        s[u] = v;
        if due[depth].iter().all(|c| c.holds(s)) && search(depth + 1, order, domain, due, s, nodes)? {
            return Some(true);
        }
    }
    Some(false)
}

fn order_edges(constraints: &[Constraint]) -> Vec<(usize, usize)> {
    constraints
        .iter()
        .filter_map(|c| match c {
            Constraint::Less(a, b) => Some((*a, *b)),
            Constraint::Greater(a, b) => Some((*b, *a)),
            _ => None,
        })
        .collect()
}

fn order_cycle(p: usize, constraints: &[Constraint]) -> bool {
    topological(p, &order_edges(constraints)).is_none()
}

fn topological(p: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; p];
    let mut out = vec![Vec::new(); p];
    for &(a, b) in edges {
        out[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: Vec<usize> = (0..p).rev().filter(|&u| indeg[u] == 0).collect();
    let mut order = Vec::with_capacity(p);
    while let Some(u) = ready.pop() {
        order.push(u);
        for &w in &out[u] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(w);
            }
        }
    }
    (order.len() == p).then_some(order)
}

/// Distinct ranks along a topological order of the strict-order constraints.
fn rank_candidate(p: usize, constraints: &[Constraint]) -> Option<Vec<u64>> {
    let order = topological(p, &order_edges(constraints))?;
    let mut s = vec![0u64; p];
    for (r, &u) in order.iter().enumerate() {
        s[u] = r as u64;
    }
    Some(s)
}

fn bound_dims<'a>(symbols: &'a [(&'a str, u64)]) -> impl Fn(usize) -> Dim + 'a {
    move |i| Dim::bound(symbols[i].0, symbols[i].1)
}

/// Khatri-Rao product of `q` Gaussian `d×n` matrices as a decoupled chaos:
/// indices `(j_1, …, j_q, k)`, chaos coordinates `(j_t, k)`, rows
/// `(j_1, …, j_q)`, columns `(k)`.
pub fn khatri_rao_schema(q: usize, d: u64, n: u64) -> Result<ChaosSchema, SchemaError> {
    if q == 0 {
        return Err(SchemaError::ZeroOrder);
    }
    if d == 0 || n == 0 {
        return Err(SchemaError::ZeroDimension(0));
    }
    let mut dims: Vec<Dim> = (0..q).map(|_| Dim::bound("d", d)).collect();
    dims.push(Dim::bound("n", n));
    let mut labels: Vec<String> = (1..=q).map(|t| format!("j{t}")).collect();
    labels.push("k".into());
    Ok(ChaosSchema {
        p: q + 1,
        dims,
        q,
        chaos_coords: (0..q).map(|t| IndexSet(vec![t, q])).collect(),
        row_coord: IndexSet((0..q).collect()),
        col_coord: IndexSet(vec![q]),
        weight: WeightSpec::default(),
        distribution: DistributionSpec::Gaussian,
        labels: Some(labels),
    })
}

/// The two chaoses of the tensor-PCA certificate: the diagonal part with
/// `g² − 1` entries (order 1) and the off-diagonal Gaussian part (order 2).
pub fn tensor_pca_schemas(n: u64, d: u64) -> (ChaosSchema, ChaosSchema) {
    let s = [("n", n), ("d", d)];
    let dim = bound_dims(&s);
    let first = ChaosSchema {
        p: 3,
        dims: vec![dim(0), dim(1), dim(1)],
        q: 1,
        chaos_coords: vec![IndexSet(vec![0, 1, 2])],
        row_coord: IndexSet(vec![1]),
        col_coord: IndexSet(vec![2]),
        weight: WeightSpec::default(),
        distribution: DistributionSpec::CenteredChiSq1,
        labels: Some(["i", "j", "k"].map(String::from).to_vec()),
    };
    let second = ChaosSchema {
        p: 5,
        dims: vec![dim(0), dim(1), dim(1), dim(1), dim(1)],
        q: 2,
        chaos_coords: vec![IndexSet(vec![0, 1, 3]), IndexSet(vec![0, 2, 4])],
        row_coord: IndexSet(vec![1, 2]),
        col_coord: IndexSet(vec![3, 4]),
        weight: WeightSpec::new(vec![Constraint::NotEqualTuple(vec![1, 3], vec![2, 4])]),
        distribution: DistributionSpec::Gaussian,
        labels: Some(["i", "j1", "j2", "k1", "k2"].map(String::from).to_vec()),
    };
    (first, second)
}

/// The ellipsoid-fitting matrices `M_φ` (order 4, Gaussian) and `M_ψ`
/// (order 2, `g² − 1` entries).
pub fn ellipsoid_schemas(m: u64, d: u64) -> (ChaosSchema, ChaosSchema) {
    let s = [("m", m), ("d", d)];
    let dim = bound_dims(&s);
    let phi = ChaosSchema {
        p: 4,
        dims: vec![dim(0), dim(0), dim(1), dim(1)],
        q: 4,
        chaos_coords: vec![
            IndexSet(vec![0, 2]),
            IndexSet(vec![0, 3]),
            IndexSet(vec![1, 2]),
            IndexSet(vec![1, 3]),
        ],
        row_coord: IndexSet(vec![0]),
        col_coord: IndexSet(vec![1]),
        weight: WeightSpec::new(vec![
            Constraint::AllDistinct(vec![0, 1]),
            Constraint::AllDistinct(vec![2, 3]),
        ]),
        distribution: DistributionSpec::Gaussian,
        labels: Some(["i", "j", "a", "b"].map(String::from).to_vec()),
    };
    let psi = ChaosSchema {
        p: 3,
        dims: vec![dim(0), dim(0), dim(1)],
        q: 2,
        chaos_coords: vec![IndexSet(vec![0, 2]), IndexSet(vec![1, 2])],
        row_coord: IndexSet(vec![0]),
        col_coord: IndexSet(vec![1]),
        weight: WeightSpec::new(vec![Constraint::AllDistinct(vec![0, 1])]),
        distribution: DistributionSpec::CenteredChiSq1,
        labels: Some(["i", "j", "a"].map(String::from).to_vec()),
    };
    (phi, psi)
}
