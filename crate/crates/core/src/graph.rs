//! Graph-matrix shapes: vertex separators, norm exponents, the edge ordering
//! behind the log power, orientation schemas and materialization.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::flattening::{enumerate_assignments, norm_exponents as flattening_exponents, FlatteningClass};
use crate::linalg::Matrix;
use crate::sampler::{check_cells, draw_edge_sign, Accumulator, Caps};
use crate::schema::{weight_satisfiable, ChaosSchema, Constraint, Dim, DistributionSpec, IndexSet, WeightSpec};

/// A graph with ordered left and right vertex tuples. Vertices are indices
/// into `names`; each edge is stored with its endpoints as given.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub names: Vec<String>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeFile {
    vertices: Vec<String>,
    left: Vec<String>,
    right: Vec<String>,
    edges: Vec<[String; 2]>,
}

impl Shape {
    pub fn new(vertices: &[&str], left: &[&str], right: &[&str], edges: &[(&str, &str)]) -> Result<Self, GraphError> {
        let file = ShapeFile {
            vertices: vertices.iter().map(|s| s.to_string()).collect(),
            left: left.iter().map(|s| s.to_string()).collect(),
            right: right.iter().map(|s| s.to_string()).collect(),
            edges: edges.iter().map(|(a, b)| [a.to_string(), b.to_string()]).collect(),
        };
        Shape::from_file(file)
    }

    fn from_file(f: ShapeFile) -> Result<Self, GraphError> {
        let mut index = HashMap::new();
        for (i, v) in f.vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(v.clone()));
            }
        }
        let lookup = |v: &String| index.get(v).copied().ok_or_else(|| GraphError::UnknownVertex(v.clone()));
        let left = f.left.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
        let right = f.right.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
        let edges = f
            .edges
            .iter()
            .map(|[a, b]| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        Shape::from_indices(f.vertices, left, right, edges)
    }

    /// Validating constructor over vertex indices.
    pub fn from_indices(
        names: Vec<String>,
        left: Vec<usize>,
        right: Vec<usize>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self, GraphError> {
        let n = names.len();
        let name = |v: usize| names.get(v).cloned().unwrap_or_else(|| format!("#{v}"));
        for tuple in [&left, &right] {
            let mut seen = BTreeSet::new();
            for &v in tuple {
                if v >= n {
                    return Err(GraphError::UnknownVertex(name(v)));
                }
                if !seen.insert(v) {
                    return Err(GraphError::DuplicateVertex(name(v)));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(GraphError::UnknownVertex(name(a.max(b))));
            }
            if a == b {
                return Err(GraphError::SelfLoop(name(a)));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GraphError::DuplicateEdge(name(a), name(b)));
            }
        }
        Ok(Shape { names, left, right, edges })
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let f: ShapeFile = serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
        Shape::from_file(f)
    }

    pub fn to_json(&self) -> String {
        let f = ShapeFile {
            vertices: self.names.clone(),
            left: self.left.iter().map(|&v| self.names[v].clone()).collect(),
            right: self.right.iter().map(|&v| self.names[v].clone()).collect(),
            edges: self.edges.iter().map(|&(a, b)| [self.names[a].clone(), self.names[b].clone()]).collect(),
        };
        serde_json::to_string_pretty(&f).expect("shape serializes")
    }

    /// Wigner matrix without a diagonal.
    pub fn wigner() -> Self {
        Shape::new(&["i", "j"], &["i"], &["j"], &[("i", "j")]).expect("valid shape")
    }

    /// Z-shaped graph matrix.
    pub fn z_shape() -> Self {
        Shape::new(&["i", "j", "k", "l"], &["i", "j"], &["k", "l"], &[("i", "k"), ("j", "k"), ("j", "l")])
            .expect("valid shape")
    }

    /// Four spokes into a middle vertex `m`, plus an isolated middle vertex `o`.
    pub fn star() -> Self {
        Shape::new(
            &["i", "j", "k", "l", "m", "o"],
            &["i", "j"],
            &["k", "l"],
            &[("i", "m"), ("j", "m"), ("k", "m"), ("l", "m")],
        )
        .expect("valid shape")
    }

    pub fn n_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn is_left(&self, v: usize) -> bool {
        self.left.contains(&v)
    }

    pub fn is_right(&self, v: usize) -> bool {
        self.right.contains(&v)
    }

    pub fn middle(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| !self.is_left(v) && !self.is_right(v)).collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn isolated_middle(&self) -> Vec<usize> {
        self.middle().into_iter().filter(|&v| self.degree(v) == 0).collect()
    }

    pub fn both_sides(&self) -> Vec<usize> {
        self.left.iter().copied().filter(|&v| self.is_right(v)).collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj.iter_mut().for_each(|l| l.sort_unstable());
        adj
    }

    pub fn name_list(&self, vs: &[usize]) -> String {
        let names: Vec<&str> = vs.iter().map(|&v| self.names[v].as_str()).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// True when every path from a left to a right vertex meets `s`.
    pub fn is_separator(&self, s: &[usize]) -> bool {
        let blocked: Vec<bool> = (0..self.n_vertices()).map(|v| s.contains(&v)).collect();
        let adj = self.adjacency();
        let mut seen = vec![false; self.n_vertices()];
        let mut queue: VecDeque<usize> = self.left.iter().copied().filter(|&v| !blocked[v]).collect();
        queue.iter().for_each(|&v| seen[v] = true);
        while let Some(v) = queue.pop_front() {
            if self.is_right(v) {
                return false;
            }
            for &w in &adj[v] {
                if !blocked[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeparatorResult {
    pub separator: Vec<usize>,
    pub size: usize,
    /// Vertex-disjoint left-to-right paths, one per separator vertex.
    pub disjoint_paths: Vec<Vec<usize>>,
}

/// Unit-capacity flow network with split vertices: `2v` is the entry and
/// `2v + 1` the exit of vertex `v`.
struct Network {
    cap: Vec<HashMap<usize, i32>>,
}

const INF: i32 = 1 << 20;

impl Network {
    fn new(nodes: usize) -> Self {
        Network { cap: vec![HashMap::new(); nodes] }
    }

    fn add(&mut self, a: usize, b: usize, c: i32) {
        *self.cap[a].entry(b).or_insert(0) += c;
        self.cap[b].entry(a).or_insert(0);
    }

    /// Residual BFS from `s`; parent pointers, sorted neighbour order.
    fn bfs(&self, s: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.cap.len()];
        parent[s] = Some(s);
        let mut queue = VecDeque::from([s]);
        while let Some(a) = queue.pop_front() {
            let mut next: Vec<(&usize, &i32)> = self.cap[a].iter().collect();
            next.sort_unstable();
            for (&b, &c) in next {
                if c > 0 && parent[b].is_none() {
                    parent[b] = Some(a);
                    queue.push_back(b);
                }
            }
        }
        parent
    }
}

/// Minimum left-right vertex separator via vertex-split max-flow. Vertices on
/// both sides are forced into the separator as length-one paths; the returned
/// cut is the one closest to the left side.
pub fn min_vertex_separator(shape: &Shape) -> SeparatorResult {
    let n = shape.n_vertices();
    let both = shape.both_sides();
    let removed: Vec<bool> = (0..n).map(|v| both.contains(&v)).collect();
    let (source, sink) = (2 * n, 2 * n + 1);
    let mut net = Network::new(2 * n + 2);
    for v in (0..n).filter(|&v| !removed[v]) {
        net.add(2 * v, 2 * v + 1, 1);
        if shape.is_left(v) {
            net.add(source, 2 * v, INF);
        }
        if shape.is_right(v) {
            net.add(2 * v + 1, sink, INF);
        }
    }
    for &(a, b) in &shape.edges {
        if !removed[a] && !removed[b] {
            net.add(2 * a + 1, 2 * b, INF);
            net.add(2 * b + 1, 2 * a, INF);
        }
    }
    let original = net.cap.clone();
    loop {
        let parent = net.bfs(source);
        if parent[sink].is_none() {
            break;
        }
        let mut b = sink;
        while b != source {
            let a = parent[b].expect("on path");
            *net.cap[a].get_mut(&b).expect("edge") -= 1;
            *net.cap[b].get_mut(&a).expect("reverse") += 1;
            b = a;
        }
    }

    let reach = net.bfs(source);
    let mut separator: Vec<usize> = both.clone();
    separator.extend((0..n).filter(|&v| !removed[v] && reach[2 * v].is_some() && reach[2 * v + 1].is_none()));
    separator.sort_unstable();

    // Decompose the flow into paths, then trim each to its last left vertex and
    // the first right vertex after it.
    let mut flow: Vec<HashMap<usize, i32>> = vec![HashMap::new(); net.cap.len()];
    for a in 0..net.cap.len() {
        for (&b, &c0) in &original[a] {
            let used = c0 - net.cap[a][&b];
            if used > 0 {
                flow[a].insert(b, used);
            }
        }
    }
    let mut paths: Vec<Vec<usize>> = both.iter().map(|&v| vec![v]).collect();
    loop {
        let mut starts: Vec<usize> = flow[source].iter().filter(|(_, &f)| f > 0).map(|(&b, _)| b).collect();
        starts.sort_unstable();
        let Some(&first) = starts.first() else { break };
        *flow[source].get_mut(&first).expect("flow") -= 1;
        let mut nodes = vec![first];
        let mut at = first;
        while at != sink {
            let mut next: Vec<usize> = flow[at].iter().filter(|(_, &f)| f > 0).map(|(&b, _)| b).collect();
            next.sort_unstable();
            let b = next[0];
            *flow[at].get_mut(&b).expect("flow") -= 1;
            nodes.push(b);
            at = b;
        }
        let mut vertices: Vec<usize> = nodes.iter().filter(|&&x| x < 2 * n && x % 2 == 0).map(|&x| x / 2).collect();
        let last_left = vertices.iter().rposition(|&v| shape.is_left(v)).expect("path starts on the left");
        vertices.drain(..last_left);
        let first_right = vertices.iter().position(|&v| shape.is_right(v)).expect("path ends on the right");
        vertices.truncate(first_right + 1);
        paths.push(vertices);
    }
    paths.sort();
    SeparatorResult { size: separator.len(), separator, disjoint_paths: paths }
}

/// Smallest separator size by exhaustive subset search.
pub fn brute_force_separator_size(shape: &Shape) -> usize {
    let n = shape.n_vertices();
    (0..=n)
        .find(|&k| subsets(n, k).any(|s| shape.is_separator(&s)))
        .expect("the full vertex set separates")
}

fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1 << n)).filter(move |m| m.count_ones() as usize == k).map(move |m| (0..n).filter(|&v| m >> v & 1 == 1).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeOrdering {
    /// Edge indices, first to last.
    pub order: Vec<usize>,
    pub path_edges: Vec<usize>,
    pub cover_edges: Vec<usize>,
    pub k1: usize,
    pub k2: usize,
}

impl EdgeOrdering {
    pub fn k(&self) -> usize {
        self.k1 + self.k2
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphBoundReport {
    pub separator: SeparatorResult,
    pub w_iso: Vec<usize>,
    /// `(|V| − |S_min| + |W_iso|) / 2`.
    pub poly_exponent: Ratio<i64>,
    /// `f = |S_min| − |U ∩ V| + |W| − |W_iso|`.
    pub f: usize,
    pub log_exponent: Ratio<i64>,
    pub ordering: EdgeOrdering,
    pub row_power: usize,
    pub col_power: usize,
}

impl GraphBoundReport {
    pub fn k(&self) -> usize {
        self.ordering.k()
    }
}

pub fn norm_exponents(shape: &Shape) -> GraphBoundReport {
    let separator = min_vertex_separator(shape);
    let w_iso = shape.isolated_middle();
    let f = separator.size - shape.both_sides().len() + shape.middle().len() - w_iso.len();
    let poly = (shape.n_vertices() + w_iso.len() - separator.size) as i64;
    let ordering = order_edges(shape, &separator);
    GraphBoundReport {
        poly_exponent: Ratio::new(poly, 2),
        log_exponent: Ratio::new(f as i64, 2),
        f,
        w_iso,
        ordering,
        row_power: shape.left.len(),
        col_power: shape.right.len(),
        separator,
    }
}

pub fn edge_ordering(shape: &Shape) -> EdgeOrdering {
    norm_exponents(shape).ordering
}

fn edge_index(shape: &Shape, a: usize, b: usize) -> usize {
    shape
        .edges
        .iter()
        .position(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
        .expect("consecutive path vertices are adjacent")
}

fn order_edges(shape: &Shape, sep: &SeparatorResult) -> EdgeOrdering {
    let mut path_edges: Vec<usize> = Vec::new();
    let mut on_path = vec![false; shape.n_vertices()];
    for p in &sep.disjoint_paths {
        p.iter().for_each(|&v| on_path[v] = true);
        path_edges.extend(p.windows(2).map(|w| edge_index(shape, w[0], w[1])));
    }

    // Minimum edge cover of the uncovered middle vertices: a maximum matching
    // inside them plus one incident edge per unmatched vertex.
    let x: Vec<usize> =
        shape.middle().into_iter().filter(|&v| !on_path[v] && shape.degree(v) > 0).collect();
    let inner: Vec<usize> = (0..shape.edges.len())
        .filter(|&e| {
            let (a, b) = shape.edges[e];
            x.contains(&a) && x.contains(&b)
        })
        .collect();
    let matching = max_matching(shape, &inner);
    let mut cover_edges = matching.clone();
    let mut covered: BTreeSet<usize> = matching.iter().flat_map(|&e| [shape.edges[e].0, shape.edges[e].1]).collect();
    for &v in &x {
        if covered.insert(v) {
            let e = (0..shape.edges.len())
                .find(|&e| shape.edges[e].0 == v || shape.edges[e].1 == v)
                .expect("non-isolated");
            cover_edges.push(e);
        }
    }
    cover_edges.sort_unstable();

    let mut order: Vec<usize> =
        (0..shape.edges.len()).filter(|e| !path_edges.contains(e) && !cover_edges.contains(e)).collect();
    order.extend(&cover_edges);
    order.extend(&path_edges);
    let (k1, k2) = (path_edges.len(), cover_edges.len());
    EdgeOrdering { order, path_edges, cover_edges, k1, k2 }
}

/// Maximum matching among `edges` by branching; shapes are small.
fn max_matching(shape: &Shape, edges: &[usize]) -> Vec<usize> {
    fn go(shape: &Shape, edges: &[usize], used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut Vec<usize>) {
        if cur.len() + edges.len() <= best.len() {
            return;
        }
        let Some((&e, rest)) = edges.split_first() else {
            *best = cur.clone();
            return;
        };
        let (a, b) = shape.edges[e];
        if !used[a] && !used[b] {
            used[a] = true;
            used[b] = true;
            cur.push(e);
            go(shape, rest, used, cur, best);
            cur.pop();
            used[a] = false;
            used[b] = false;
        }
        go(shape, rest, used, cur, best);
    }
    let mut best = Vec::new();
    go(shape, edges, &mut vec![false; shape.n_vertices()], &mut Vec::new(), &mut best);
    best
}

pub const MAX_SHAPE_EDGES: usize = 16;

fn vertex_dims(shape: &Shape, n: Option<u64>) -> Vec<Dim> {
    let dim = match n {
        Some(n) => Dim::bound("n", n),
        None => Dim::symbol("n"),
    };
    vec![dim; shape.n_vertices()]
}

fn base_schema(shape: &Shape, n: Option<u64>, weight: WeightSpec) -> ChaosSchema {
    ChaosSchema {
        p: shape.n_vertices(),
        dims: vertex_dims(shape, n),
        q: shape.edges.len(),
        chaos_coords: shape.edges.iter().map(|&(a, b)| IndexSet(vec![a, b])).collect(),
        row_coord: IndexSet(shape.left.clone()),
        col_coord: IndexSet(shape.right.clone()),
        weight,
        distribution: DistributionSpec::EdgeRademacher,
        labels: Some(shape.names.clone()),
    }
}

/// One nearly-combinatorial schema per edge orientation: bit `e` of the
/// orientation index set means edge `e = (a, b)` has `s_a < s_b`. Each weight
/// also requires all vertex labels distinct. An edgeless shape yields a
/// single order-0 schema, which validation rejects.
pub fn shape_to_schemas(shape: &Shape, n: Option<u64>) -> Result<Vec<ChaosSchema>, GraphError> {
    let e = shape.edges.len();
    if e > MAX_SHAPE_EDGES {
        return Err(GraphError::TooManyEdges(e));
    }
    let all: Vec<usize> = (0..shape.n_vertices()).collect();
    Ok((0u32..1 << e)
        .map(|mask| {
            let mut constraints: Vec<Constraint> = shape
                .edges
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| if mask >> i & 1 == 1 { Constraint::Less(a, b) } else { Constraint::Greater(a, b) })
                .collect();
            constraints.push(Constraint::AllDistinct(all.clone()));
            base_schema(shape, n, WeightSpec::new(constraints))
        })
        .collect())
}

/// The graph matrix as one chaos with shared edge variables; coupled
/// materialization of it reproduces [`materialize_graph_matrix`].
pub fn shape_coupled_schema(shape: &Shape, n: Option<u64>) -> ChaosSchema {
    let all: Vec<usize> = (0..shape.n_vertices()).collect();
    base_schema(shape, n, WeightSpec::new(vec![Constraint::AllDistinct(all)]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrientationSigma {
    pub orientation: u32,
    pub satisfiable: bool,
    pub sigma_exponent: Ratio<i64>,
    /// Placement strings of the maximizing σ-flattenings.
    pub maximizers: Vec<String>,
    /// Some maximizer has `𝓡 ∩ 𝓒` equal to a minimum separator.
    pub realizes_separator: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaBoundReport {
    pub poly_exponent: Ratio<i64>,
    pub orientations: Vec<OrientationSigma>,
    pub within: bool,
    pub tight: bool,
    pub deterministic: bool,
}

/// Exponent, maximizing placements, and whether a maximizer realizes a minimum separator.
type SigmaScan = (Ratio<i64>, Vec<String>, bool);

/// σ-exponent of a shape schema: the largest `n`-degree of a σ-flattening,
/// halved. Uses only coordinates, so it is shared by all orientations.
fn sigma_scan(shape: &Shape, schema: &ChaosSchema, s_min: usize) -> SigmaScan {
    let mut best = 0u32;
    let mut rows = Vec::new();
    for a in enumerate_assignments(schema, FlatteningClass::Sigma) {
        let (rm, cm) = a.masks();
        let e: u32 = flattening_exponents(schema.p, rm, cm).iter().map(|&x| x as u32).sum();
        let both: Vec<usize> = (0..schema.p).filter(|&u| (rm & cm) >> u & 1 == 1).collect();
        let realizes = both.len() == s_min && shape.is_separator(&both);
        if e > best {
            best = e;
            rows.clear();
        }
        if e == best {
            rows.push((a.placement_string(), realizes));
        }
    }
    let realizes = rows.iter().any(|r| r.1);
    (Ratio::new(best as i64, 2), rows.into_iter().map(|r| r.0).collect(), realizes)
}

/// σ-exponent of the first orientation schema; `None` for edgeless shapes.
pub fn sigma_exponent(shape: &Shape) -> Option<Ratio<i64>> {
    sigma_witness(shape, usize::MAX).map(|w| w.0)
}

/// σ-exponent plus whether some maximizing flattening diagonalizes exactly a
/// separator of size `s_min`.
pub fn sigma_witness(shape: &Shape, s_min: usize) -> Option<(Ratio<i64>, bool)> {
    if shape.edges.is_empty() {
        return None;
    }
    let (e, _, realizes) = sigma_scan(shape, &shape_coupled_schema(shape, None), s_min);
    Some((e, realizes))
}

pub fn sigma_bound_check(shape: &Shape) -> Result<SigmaBoundReport, GraphError> {
    let report = norm_exponents(shape);
    let poly = report.poly_exponent;
    if shape.edges.is_empty() {
        return Ok(SigmaBoundReport { poly_exponent: poly, orientations: Vec::new(), within: true, tight: true, deterministic: true });
    }
    let schemas = shape_to_schemas(shape, None)?;
    let mut cache: HashMap<(Vec<IndexSet>, IndexSet, IndexSet), SigmaScan> = HashMap::new();
    let mut orientations = Vec::new();
    for (mask, s) in schemas.iter().enumerate() {
        let key = (s.chaos_coords.clone(), s.row_coord.clone(), s.col_coord.clone());
        let (exp, maximizers, realizes) =
            cache.entry(key).or_insert_with(|| sigma_scan(shape, s, report.separator.size)).clone();
        orientations.push(OrientationSigma {
            orientation: mask as u32,
            satisfiable: weight_satisfiable(s) == Some(true),
            sigma_exponent: exp,
            maximizers,
            realizes_separator: realizes,
        });
    }
    let within = orientations.iter().all(|o| o.sigma_exponent <= poly);
    let tight = orientations.iter().all(|o| o.sigma_exponent == poly && o.realizes_separator);
    Ok(SigmaBoundReport { poly_exponent: poly, orientations, within, tight, deterministic: false })
}

/// `Σ_φ (∏_{(i,j) ∈ E} ε_{φ(i)φ(j)}) e_{φ(U)} e_{φ(V)}ᵀ` over injective
/// `φ: V(α) → [n]`, with signs drawn per unordered label pair.
pub fn materialize_graph_matrix(shape: &Shape, n: u64, seed: u64) -> Result<Matrix, GraphError> {
    materialize_graph_matrix_trial(shape, n, seed, 0, &Caps::default())
}

pub fn materialize_graph_matrix_trial(
    shape: &Shape,
    n: u64,
    seed: u64,
    trial: u64,
    caps: &Caps,
) -> Result<Matrix, GraphError> {
    let p = shape.n_vertices();
    if (n as u128) < p as u128 {
        return Err(GraphError::TooFewLabels { n, vertices: p });
    }
    let rows = (n as u128).checked_pow(shape.left.len() as u32).unwrap_or(u128::MAX);
    let cols = (n as u128).checked_pow(shape.right.len() as u32).unwrap_or(u128::MAX);
    let realizations: u128 = (0..p as u128).map(|i| n as u128 - i).product();
    check_cells(rows, cols, realizations, caps)?;
    let (rows, cols) = (rows as usize, cols as usize);
    let nn = n as usize;

    let signs: Vec<f64> = if shape.edges.is_empty() {
        Vec::new()
    } else {
        let mut t = vec![0.0; nn * nn];
        for a in 0..nn {
            for b in a + 1..nn {
                let s = draw_edge_sign(seed, trial, 0, (a * nn + b) as u64);
                t[a * nn + b] = s;
                t[b * nn + a] = s;
            }
        }
        t
    };

    let mut acc = Accumulator::new(rows, cols, realizations);
    let mut phi = vec![0usize; p];
    let mut used = vec![false; nn];
    fn place(
        v: usize,
        shape: &Shape,
        nn: usize,
        signs: &[f64],
        phi: &mut Vec<usize>,
        used: &mut Vec<bool>,
        acc: &mut Accumulator,
    ) {
        if v == phi.len() {
            let value: f64 = shape.edges.iter().map(|&(a, b)| signs[phi[a] * nn + phi[b]]).product();
            let r = shape.left.iter().fold(0, |r, &u| r * nn + phi[u]);
            let c = shape.right.iter().fold(0, |c, &u| c * nn + phi[u]);
            acc.add(r, c, value);
            return;
        }
        for label in 0..nn {
            if !used[label] {
                used[label] = true;
                phi[v] = label;
                place(v + 1, shape, nn, signs, phi, used, acc);
                used[label] = false;
            }
        }
    }
    place(0, shape, nn, &signs, &mut phi, &mut used, &mut acc);
    Ok(acc.finish())
}

/// All shapes on `k ≤ max_vertices` vertices with at most `max_edges` edges,
/// one per assignment of vertex classes (left only, right only, both, middle)
/// and edge set. Vertex order within a class is irrelevant to every exponent,
/// so classes are filled in a fixed order.
pub fn enumerate_shapes(max_vertices: usize, max_edges: usize) -> impl Iterator<Item = Shape> {
    (1..=max_vertices).flat_map(move |k| {
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        let edge_sets: Vec<Vec<(usize, usize)>> = (0u32..1 << pairs.len())
            .filter(|m| m.count_ones() as usize <= max_edges)
            .map(|m| (0..pairs.len()).filter(|&i| m >> i & 1 == 1).map(|i| pairs[i]).collect())
            .collect();
        class_splits(k).into_iter().flat_map(move |(lo, ro, bo)| {
            let edge_sets = edge_sets.clone();
            edge_sets.into_iter().map(move |edges| {
                let both: Vec<usize> = (lo + ro..lo + ro + bo).collect();
                let left: Vec<usize> = (0..lo).chain(both.iter().copied()).collect();
                let right: Vec<usize> = (lo..lo + ro).chain(both.iter().copied()).collect();
                let names = (0..k).map(|v| format!("v{v}")).collect();
                Shape::from_indices(names, left, right, edges).expect("generated shape is valid")
            })
        })
    })
}

fn class_splits(k: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for lo in 0..=k {
        for ro in 0..=k - lo {
            for bo in 0..=k - lo - ro {
                out.push((lo, ro, bo));
            }
        }
    }
    out
}
