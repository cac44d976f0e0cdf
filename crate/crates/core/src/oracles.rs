//! Exact linear-optimization oracles over the binary feasible set.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::model::{check_vertex, Graph, Instance, ProblemKind, Vertex};
use crate::scalar::Scalar;

/// Largest node count the internal TSP oracle accepts.
pub const HELD_KARP_MAX_NODES: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle requires a {expected} instance, got {got}")]
    WrongKind { expected: ProblemKind, got: ProblemKind },
    #[error("oracle size limit: {nodes} nodes exceeds {limit}; use an external oracle")]
    SizeLimit { nodes: usize, limit: usize },
    #[error("cost vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fixing index {index} out of range for dimension {n}")]
    FixingOutOfRange { index: usize, n: usize },
    #[error("conflicting fixings for variable {0}")]
    ConflictingFixing(usize),
    #[error("oracle protocol violation: {0}")]
    Protocol(String),
    #[error("oracle returned an infeasible vertex: {0}")]
    InvalidVertex(String),
    #[error("external oracle timed out after {0:?}")]
    Timeout(Duration),
    #[error("external oracle i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Variables fixed to 0 or 1 by branching.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Fixings {
    map: BTreeMap<usize, bool>,
}

impl Fixings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a fixing; re-fixing a variable to the same value is a no-op.
    pub fn insert(&mut self, index: usize, value: bool) -> Result<(), OracleError> {
        match self.map.insert(index, value) {
            Some(old) if old != value => {
                self.map.insert(index, old);
                Err(OracleError::ConflictingFixing(index))
            }
            _ => Ok(()),
        }
    }

    pub fn with(mut self, index: usize, value: bool) -> Result<Self, OracleError> {
        self.insert(index, value)?;
        Ok(self)
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.map.get(&index).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.map.iter().map(|(&i, &b)| (i, b))
    }

    pub fn respected_by(&self, v: &Vertex) -> bool {
        self.iter().all(|(i, b)| i < v.len() && v.get(i) == b)
    }

    pub fn validate(&self, n: usize) -> Result<(), OracleError> {
        match self.map.keys().find(|&&i| i >= n) {
            Some(&index) => Err(OracleError::FixingOutOfRange { index, n }),
            None => Ok(()),
        }
    }

    /// Union of two fixing sets, or `None` if they disagree somewhere.
    pub fn merged(&self, other: &Fixings) -> Option<Fixings> {
        let mut out = self.clone();
        for (i, b) in other.iter() {
            out.insert(i, b).ok()?;
        }
        Some(out)
    }
}

/// Exact minimizer of `costs·x` over the feasible set, optionally under fixings.
///
/// `Ok(None)` means no feasible point respects the fixings.
pub trait LinearOracle<T: Scalar> {
    fn dimension(&self) -> usize;

    fn supports_fixings(&self) -> bool {
        true
    }

    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError>;

    /// Feasibility predicate used to validate vertices placed in an active set.
    fn is_feasible(&self, v: &Vertex) -> bool {
        v.len() == self.dimension()
    }
}

impl<T: Scalar, O: LinearOracle<T> + ?Sized> LinearOracle<T> for &O {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn supports_fixings(&self) -> bool {
        (**self).supports_fixings()
    }
    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        (**self).minimize(costs, fixings)
    }
    fn is_feasible(&self, v: &Vertex) -> bool {
        (**self).is_feasible(v)
    }
}

impl<T: Scalar, O: LinearOracle<T> + ?Sized> LinearOracle<T> for Box<O> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn supports_fixings(&self) -> bool {
        (**self).supports_fixings()
    }
    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        (**self).minimize(costs, fixings)
    }
    fn is_feasible(&self, v: &Vertex) -> bool {
        (**self).is_feasible(v)
    }
}

/// An oracle restricted to the points respecting a fixed set of fixings.
pub struct Restricted<'a, O: ?Sized> {
    inner: &'a O,
    fixings: &'a Fixings,
}

impl<'a, O: ?Sized> Restricted<'a, O> {
    pub fn new(inner: &'a O, fixings: &'a Fixings) -> Self {
        Restricted { inner, fixings }
    }
}

impl<T: Scalar, O: LinearOracle<T> + ?Sized> LinearOracle<T> for Restricted<'_, O> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn supports_fixings(&self) -> bool {
        self.inner.supports_fixings()
    }
    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        match self.fixings.merged(fixings) {
            Some(all) => self.inner.minimize(costs, &all),
            None => Ok(None),
        }
    }
    fn is_feasible(&self, v: &Vertex) -> bool {
        self.fixings.respected_by(v) && self.inner.is_feasible(v)
    }
}

fn check_input<T: Scalar>(costs: &[T], fixings: &Fixings, n: usize) -> Result<(), OracleError> {
    if costs.len() != n {
        return Err(OracleError::DimensionMismatch {
            expected: n,
            got: costs.len(),
        });
    }
    fixings.validate(n)
}

fn require_kind<T>(instance: &Instance<T>, kind: ProblemKind) -> Result<&Graph, OracleError> {
    match (&instance.graph, instance.kind == kind) {
        (Some(g), true) => Ok(g),
        _ => Err(OracleError::WrongKind {
            expected: kind,
            got: instance.kind,
        }),
    }
}

/// Kruskal's algorithm on a complete graph, forced edges contracted first.
#[derive(Clone, Debug)]
pub struct KruskalOracle {
    graph: Graph,
}

impl KruskalOracle {
    pub fn new(graph: Graph) -> Self {
        KruskalOracle { graph }
    }

    pub fn for_instance<T>(instance: &Instance<T>) -> Result<Self, OracleError> {
        require_kind(instance, ProblemKind::Mst).map(|g| Self::new(g.clone()))
    }

    pub fn mst_kruskal<T: Scalar>(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        let n = self.graph.edge_count();
        check_input(costs, fixings, n)?;
        let nodes = self.graph.node_count();
        let edges = self.graph.edges();
        let mut uf = UnionFind::new(nodes);
        let mut chosen = vec![false; n];
        let mut count = 0;
        for (i, value) in fixings.iter() {
            if value {
                let (a, b) = edges[i];
                if !uf.union(a, b) {
                    return Ok(None);
                }
                chosen[i] = true;
                count += 1;
            }
        }
        let mut order: Vec<usize> = (0..n).filter(|&i| fixings.get(i).is_none()).collect();
        order.sort_by(|&a, &b| {
            costs[a]
                .partial_cmp(&costs[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for i in order {
            if count + 1 >= nodes {
                break;
            }
            let (a, b) = edges[i];
            if uf.union(a, b) {
                chosen[i] = true;
                count += 1;
            }
        }
        Ok((count + 1 == nodes).then(|| Vertex::new(chosen)))
    }
}

impl<T: Scalar> LinearOracle<T> for KruskalOracle {
    fn dimension(&self) -> usize {
        self.graph.edge_count()
    }
    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        self.mst_kruskal(costs, fixings)
    }
    fn is_feasible(&self, v: &Vertex) -> bool {
        self.graph.is_spanning_tree(v)
    }
}

/// Exact Held-Karp dynamic program for the symmetric TSP on up to 20 nodes.
///
/// Fixings are applied as a uniform penalty of `1 + n·max|c|` per edge
/// (added for forbidden edges, subtracted for forced ones). Every tour has
/// the same number of edges, so any tour respecting all fixings beats any
/// tour that violates one; a violating optimum therefore means infeasible.
#[derive(Clone, Debug)]
pub struct HeldKarpOracle {
    graph: Graph,
}

impl HeldKarpOracle {
    pub fn new(graph: Graph) -> Result<Self, OracleError> {
        if graph.node_count() > HELD_KARP_MAX_NODES {
            return Err(OracleError::SizeLimit {
                nodes: graph.node_count(),
                limit: HELD_KARP_MAX_NODES,
            });
        }
        Ok(HeldKarpOracle { graph })
    }

    pub fn for_instance<T>(instance: &Instance<T>) -> Result<Self, OracleError> {
        Self::new(require_kind(instance, ProblemKind::Tsp)?.clone())
    }

    pub fn tsp_held_karp<T: Scalar>(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        let n = self.graph.edge_count();
        check_input(costs, fixings, n)?;
        let nodes = self.graph.node_count();
        let edges = self.graph.edges();
        if nodes < 3 {
            return Ok(None);
        }

        let max_abs = costs.iter().fold(T::zero(), |a, c| a.max(c.abs()));
        // any two tours differ by at most 2·nodes·max_abs before shifting, and nodes <= n
        let big = T::one() + T::from_usize(2 * n).unwrap() * max_abs;
        let mut dist = vec![T::zero(); nodes * nodes];
        let mut edge_at = vec![usize::MAX; nodes * nodes];
        for (i, &(u, v)) in edges.iter().enumerate() {
            let c = match fixings.get(i) {
                Some(true) => costs[i] - big,
                Some(false) => costs[i] + big,
                None => costs[i],
            };
            dist[u * nodes + v] = c;
            dist[v * nodes + u] = c;
            edge_at[u * nodes + v] = i;
            edge_at[v * nodes + u] = i;
        }

        // node 0 is the depot; bit k of a mask stands for node k + 1
        let k = nodes - 1;
        let full = (1usize << k) - 1;
        let mut dp = vec![T::infinity(); (full + 1) * k];
        let mut parent = vec![u8::MAX; (full + 1) * k];
        for j in 0..k {
            dp[(1 << j) * k + j] = dist[j + 1];
        }
        for mask in 1..=full {
            for j in 0..k {
                if mask & (1 << j) == 0 {
                    continue;
                }
                let cur = dp[mask * k + j];
                if !cur.is_finite() {
                    continue;
                }
                for next in 0..k {
                    if mask & (1 << next) != 0 {
                        continue;
                    }
                    let nm = mask | (1 << next);
                    let cand = cur + dist[(j + 1) * nodes + next + 1];
                    if cand < dp[nm * k + next] {
                        dp[nm * k + next] = cand;
                        parent[nm * k + next] = j as u8;
                    }
                }
            }
        }
        let mut best = (T::infinity(), 0);
        for j in 0..k {
            let cand = dp[full * k + j] + dist[(j + 1) * nodes];
            if cand < best.0 {
                best = (cand, j);
            }
        }
        let mut bits = vec![false; n];
        let (mut mask, mut j) = (full, best.1);
        bits[edge_at[j + 1]] = true;
        while mask.count_ones() > 1 {
            let p = parent[mask * k + j] as usize;
            bits[edge_at[(p + 1) * nodes + j + 1]] = true;
            mask &= !(1 << j);
            j = p;
        }
        bits[edge_at[j + 1]] = true;
        let tour = Vertex::new(bits);
        Ok(fixings.respected_by(&tour).then_some(tour))
    }
}

impl<T: Scalar> LinearOracle<T> for HeldKarpOracle {
    fn dimension(&self) -> usize {
        self.graph.edge_count()
    }
    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        self.tsp_held_karp(costs, fixings)
    }
    fn is_feasible(&self, v: &Vertex) -> bool {
        self.graph.is_tour(v)
    }
}

/// Linear scan over an explicit list of feasible points; ties go to the earliest.
#[derive(Clone, Debug)]
pub struct EnumerationOracle {
    n: usize,
    vertices: Vec<Vertex>,
}

impl EnumerationOracle {
    pub fn new(n: usize, vertices: Vec<Vertex>) -> Self {
        EnumerationOracle { n, vertices }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn enumeration_oracle<T: Scalar>(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        check_input(costs, fixings, self.n)?;
        let mut best: Option<(T, &Vertex)> = None;
        for v in self.vertices.iter().filter(|v| fixings.respected_by(v)) {
            let val = v.dot(costs);
            if best.is_none_or(|(b, _)| val < b) {
                best = Some((val, v));
            }
        }
        Ok(best.map(|(_, v)| v.clone()))
    }
}

impl<T: Scalar> LinearOracle<T> for EnumerationOracle {
    fn dimension(&self) -> usize {
        self.n
    }
    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        self.enumeration_oracle(costs, fixings)
    }
    fn is_feasible(&self, v: &Vertex) -> bool {
        self.vertices.contains(v)
    }
}

/// All spanning trees of `graph`, in lexicographic order of their edge-index sets.
pub fn enumerate_spanning_trees(graph: &Graph) -> Vec<Vertex> {
    let n = graph.edge_count();
    let k = graph.node_count().saturating_sub(1);
    combinations(n, k)
        .map(|c| Vertex::from_ones(n, &c))
        .filter(|v| graph.is_spanning_tree(v))
        .collect()
}

/// All Hamiltonian cycles of a complete graph, each listed once.
pub fn enumerate_tours(graph: &Graph) -> Vec<Vertex> {
    let nodes = graph.node_count();
    let n = graph.edge_count();
    let index = |u: usize, v: usize| {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        graph.edges().iter().position(|&e| e == (a, b))
    };
    let mut out = Vec::new();
    let mut rest: Vec<usize> = (1..nodes).collect();
    permute(&mut rest, 0, &mut |perm| {
        // fix orientation: first interior node smaller than last
        if perm.first() > perm.last() {
            return;
        }
        let mut ones = Vec::with_capacity(nodes);
        let mut prev = 0;
        for &p in perm.iter().chain(std::iter::once(&0)) {
            match index(prev, p) {
                Some(i) => ones.push(i),
                None => return,
            }
            prev = p;
        }
        out.push(Vertex::from_ones(n, &ones));
    });
    out.sort();
    out
}

fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = (k <= n).then(|| (0..k).collect());
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            if next[i] < n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                current = Some(next);
                break;
            }
        }
        Some(out)
    })
}

/// Child-process oracle speaking a line protocol over stdin/stdout.
///
/// Request: `n m_fix`, then the `n` costs, then one `index value` line per
/// fixing. Response: `n` space-separated 0/1 values, or `INFEASIBLE`.
/// The command runs through `sh -c` and is spawned once per call.
#[derive(Clone, Debug)]
pub struct ExternalOracle {
    command: String,
    n: usize,
    kind: ProblemKind,
    graph: Option<Graph>,
    timeout: Duration,
    fixings: bool,
}

impl ExternalOracle {
    pub fn new(command: impl Into<String>, n: usize) -> Self {
        ExternalOracle {
            command: command.into(),
            n,
            kind: ProblemKind::Generic,
            graph: None,
            timeout: Duration::from_secs(60),
            fixings: true,
        }
    }

    /// Validates returned vertices against the instance's structure.
    pub fn for_instance<T: Scalar>(command: impl Into<String>, instance: &Instance<T>) -> Self {
        ExternalOracle {
            kind: instance.kind,
            graph: instance.graph.clone(),
            ..Self::new(command, instance.dimension())
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Declares that the external solver ignores fixings (root-only use).
    pub fn without_fixings(mut self) -> Self {
        self.fixings = false;
        self
    }

    pub fn external_oracle<T: Scalar>(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        check_input(costs, fixings, self.n)?;
        let request = encode_request(costs, fixings);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let writer = thread::spawn(move || {
            // a child that never reads its input closes the pipe early
            let _ = stdin.write_all(request.as_bytes());
        });
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut s = String::new();
            let res = stdout.read_to_string(&mut s).map(|_| s);
            let _ = tx.send(res);
        });
        let output = match rx.recv_timeout(self.timeout) {
            Ok(res) => res?,
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(OracleError::Timeout(self.timeout));
            }
        };
        let status = child.wait()?;
        let _ = writer.join();
        let err_text = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(OracleError::Protocol(format!(
                "oracle exited with {status}: {}",
                err_text.trim()
            )));
        }
        let vertex = match decode_response(&output, self.n)? {
            None => return Ok(None),
            Some(v) => v,
        };
        if !fixings.respected_by(&vertex) {
            return Err(OracleError::Protocol(format!(
                "returned vertex violates a fixing ({} fixings)",
                fixings.len()
            )));
        }
        if !check_vertex(&vertex, self.kind, self.graph.as_ref(), self.n) {
            return Err(OracleError::InvalidVertex(format!(
                "not a feasible {} solution",
                self.kind
            )));
        }
        Ok(Some(vertex))
    }
}

impl<T: Scalar> LinearOracle<T> for ExternalOracle {
    fn dimension(&self) -> usize {
        self.n
    }
    fn supports_fixings(&self) -> bool {
        self.fixings
    }
    fn minimize(&self, costs: &[T], fixings: &Fixings) -> Result<Option<Vertex>, OracleError> {
        self.external_oracle(costs, fixings)
    }
    fn is_feasible(&self, v: &Vertex) -> bool {
        check_vertex(v, self.kind, self.graph.as_ref(), self.n)
    }
}

pub fn encode_request<T: Scalar>(costs: &[T], fixings: &Fixings) -> String {
    let mut s = format!("{} {}\n", costs.len(), fixings.len());
    let line: Vec<String> = costs.iter().map(|c| c.to_string()).collect();
    s.push_str(&line.join(" "));
    s.push('\n');
    for (i, b) in fixings.iter() {
        s.push_str(&format!("{} {}\n", i, u8::from(b)));
    }
    s
}

pub fn decode_response(text: &str, n: usize) -> Result<Option<Vertex>, OracleError> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| OracleError::Protocol("empty response".into()))?;
    if line == "INFEASIBLE" {
        return Ok(None);
    }
    let bits = line
        .split_whitespace()
        .map(|t| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(OracleError::Protocol(format!("unexpected token {other:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if bits.len() != n {
        return Err(OracleError::Protocol(format!(
            "response has {} entries, expected {n}",
            bits.len()
        )));
    }
    Ok(Some(Vertex::new(bits)))
}

/// Parses one request from `input`, answers it with `oracle`, and writes the response.
pub fn serve_request<T: Scalar>(
    oracle: &dyn LinearOracle<T>,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<(), OracleError> {
    let mut lines = input.lines();
    let mut next = || -> Result<String, OracleError> {
        lines
            .next()
            .ok_or_else(|| OracleError::Protocol("truncated request".into()))?
            .map_err(OracleError::from)
    };
    let header = next()?;
    let mut head = header.split_whitespace().map(str::parse::<usize>);
    let (n, m_fix) = match (head.next(), head.next()) {
        (Some(Ok(n)), Some(Ok(m))) => (n, m),
        _ => return Err(OracleError::Protocol(format!("bad header {header:?}"))),
    };
    let costs = next()?
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .and_then(T::from_f64)
                .ok_or_else(|| OracleError::Protocol(format!("bad cost {t:?}")))
        })
        .collect::<Result<Vec<T>, _>>()?;
    if costs.len() != n {
        return Err(OracleError::Protocol(format!(
            "expected {n} costs, got {}",
            costs.len()
        )));
    }
    let mut fixings = Fixings::new();
    for _ in 0..m_fix {
        let line = next()?;
        let mut it = line.split_whitespace();
        match (it.next().and_then(|t| t.parse::<usize>().ok()), it.next()) {
            (Some(i), Some("0")) => fixings.insert(i, false)?,
            (Some(i), Some("1")) => fixings.insert(i, true)?,
            _ => return Err(OracleError::Protocol(format!("bad fixing line {line:?}"))),
        }
    }
    match oracle.minimize(&costs, &fixings)? {
        Some(v) => writeln!(output, "{v}")?,
        None => writeln!(output, "INFEASIBLE")?,
    }
    output.flush()?;
    Ok(())
}
