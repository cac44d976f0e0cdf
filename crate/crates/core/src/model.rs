//! Problem data: scenario sets, graphs, binary vertices, and the instance file format.

use std::collections::HashSet;
use std::fmt;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{dot, Scalar};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty scenario set")]
    EmptyScenarioSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite entry in scenario {scenario}")]
    NonFinite { scenario: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("{kind} instance requires a complete graph ({expected} edges for {nodes} nodes, got {got})")]
    IncompleteGraph {
        kind: ProblemKind,
        nodes: usize,
        expected: usize,
        got: usize,
    },
    #[error("malformed instance: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scalar conversion failed for value {0}")]
    Conversion(f64),
}

/// One affine piece `costs·x + constant` of the worst-case objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T> {
    pub constant: T,
    pub costs: Vec<T>,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(constant: T, costs: Vec<T>) -> Self {
        Scenario { constant, costs }
    }

    pub fn value(&self, x: &[T]) -> T {
        dot(&self.costs, x) + self.constant
    }

    pub fn value_at(&self, v: &Vertex) -> T {
        v.dot(&self.costs) + self.constant
    }
}

/// The finite uncertainty set; `f(x)` is the maximum over its affine pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet<T> {
    scenarios: Vec<Scenario<T>>,
    dimension: usize,
}

impl<T: Scalar> ScenarioSet<T> {
    pub fn new(scenarios: Vec<Scenario<T>>) -> Result<Self, ModelError> {
        let first = scenarios.first().ok_or(ModelError::EmptyScenarioSet)?;
        let dimension = first.costs.len();
        for (j, s) in scenarios.iter().enumerate() {
            if s.costs.len() != dimension {
                return Err(ModelError::DimensionMismatch {
                    expected: dimension,
                    got: s.costs.len(),
                });
            }
            if !s.constant.is_finite() || s.costs.iter().any(|c| !c.is_finite()) {
                return Err(ModelError::NonFinite { scenario: j });
            }
        }
        Ok(ScenarioSet { scenarios, dimension })
    }

    /// Builds a set from cost rows with zero constants.
    pub fn from_costs(rows: Vec<Vec<T>>) -> Result<Self, ModelError> {
        Self::new(rows.into_iter().map(|c| Scenario::new(T::zero(), c)).collect())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[Scenario<T>] {
        &self.scenarios
    }

    pub fn get(&self, j: usize) -> &Scenario<T> {
        &self.scenarios[j]
    }

    /// Worst-case value `max_j c_j·x + c0_j` and the smallest maximizing scenario index.
    pub fn evaluate(&self, x: &[T]) -> Result<(T, usize), ModelError> {
        if x.len() != self.dimension {
            return Err(ModelError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        let mut best = (self.scenarios[0].value(x), 0);
        for (j, s) in self.scenarios.iter().enumerate().skip(1) {
            let v = s.value(x);
            if v > best.0 {
                best = (v, j);
            }
        }
        Ok(best)
    }

    pub fn evaluate_vertex(&self, v: &Vertex) -> Result<(T, usize), ModelError> {
        if v.len() != self.dimension {
            return Err(ModelError::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        let mut best = (self.scenarios[0].value_at(v), 0);
        for (j, s) in self.scenarios.iter().enumerate().skip(1) {
            let val = s.value_at(v);
            if val > best.0 {
                best = (val, j);
            }
        }
        Ok(best)
    }

    /// Applies `f` to every entry (constants included), e.g. for random perturbation.
    pub fn map_entries(&self, mut f: impl FnMut(T) -> T) -> Self {
        let scenarios = self
            .scenarios
            .iter()
            .map(|s| Scenario {
                constant: f(s.constant),
                costs: s.costs.iter().map(|&c| f(c)).collect(),
            })
            .collect();
        ScenarioSet {
            scenarios,
            dimension: self.dimension,
        }
    }
}

/// `f(x) = max_j c_j·x + c0_j` with the smallest maximizing index.
pub fn evaluate_f<T: Scalar>(x: &[T], scenarios: &ScenarioSet<T>) -> Result<(T, usize), ModelError> {
    scenarios.evaluate(x)
}

/// Undirected simple graph whose edge positions are the decision-variable indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        if node_count == 0 {
            return Err(ModelError::InvalidGraph("graph needs at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u >= v {
                return Err(ModelError::InvalidGraph(format!("edge ({u},{v}) must satisfy u < v")));
            }
            if v >= node_count {
                return Err(ModelError::InvalidGraph(format!(
                    "edge ({u},{v}) references a node >= {node_count}"
                )));
            }
            if !seen.insert((u, v)) {
                return Err(ModelError::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
        }
        Ok(Graph { node_count, edges })
    }

    /// Complete graph with edges in lexicographic `(u, v)` order.
    pub fn complete(node_count: usize) -> Self {
        let edges = (0..node_count)
            .flat_map(|u| (u + 1..node_count).map(move |v| (u, v)))
            .collect();
        Graph { node_count, edges }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.node_count * (self.node_count - 1) / 2
    }

    /// True iff the selected edges form a spanning tree.
    pub fn is_spanning_tree(&self, v: &Vertex) -> bool {
        if v.len() != self.edges.len() || v.count_ones() + 1 != self.node_count {
            return false;
        }
        let mut uf = UnionFind::new(self.node_count);
        v.ones().all(|i| {
            let (a, b) = self.edges[i];
            uf.union(a, b)
        })
    }

    /// True iff the selected edges form a single Hamiltonian cycle.
    pub fn is_tour(&self, v: &Vertex) -> bool {
        if v.len() != self.edges.len() || self.node_count < 3 || v.count_ones() != self.node_count {
            return false;
        }
        let mut degree = vec![0usize; self.node_count];
        let mut uf = UnionFind::new(self.node_count);
        for i in v.ones() {
            let (a, b) = self.edges[i];
            degree[a] += 1;
            degree[b] += 1;
            uf.union(a, b);
        }
        if degree.iter().any(|&d| d != 2) {
            return false;
        }
        let root = uf.find(0);
        (1..self.node_count).all(|u| uf.find(u) == root)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Mst,
    Tsp,
    Generic,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Mst => "mst",
            ProblemKind::Tsp => "tsp",
            ProblemKind::Generic => "generic",
        })
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mst" => Ok(ProblemKind::Mst),
            "tsp" => Ok(ProblemKind::Tsp),
            "generic" => Ok(ProblemKind::Generic),
            _ => Err(format!("unknown problem kind {s:?} (expected mst, tsp or generic)")),
        }
    }
}

/// Provenance attached to generated instances; never read by the solvers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicate: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_vector: Option<String>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance<T> {
    pub name: String,
    pub kind: ProblemKind,
    pub graph: Option<Graph>,
    pub scenarios: ScenarioSet<T>,
    pub meta: InstanceMeta,
}

impl<T: Scalar> Instance<T> {
    pub fn new(
        name: impl Into<String>,
        kind: ProblemKind,
        graph: Option<Graph>,
        scenarios: ScenarioSet<T>,
    ) -> Result<Self, ModelError> {
        match (kind, &graph) {
            (ProblemKind::Generic, _) => {}
            (_, None) => return Err(ModelError::InvalidGraph(format!("{kind} instance needs a graph"))),
            (_, Some(g)) => {
                if !g.is_complete() {
                    return Err(ModelError::IncompleteGraph {
                        kind,
                        nodes: g.node_count(),
                        expected: g.node_count() * (g.node_count() - 1) / 2,
                        got: g.edge_count(),
                    });
                }
            }
        }
        if let Some(g) = &graph {
            if g.edge_count() != scenarios.dimension() {
                return Err(ModelError::DimensionMismatch {
                    expected: g.edge_count(),
                    got: scenarios.dimension(),
                });
            }
        }
        Ok(Instance {
            name: name.into(),
            kind,
            graph,
            scenarios,
            meta: InstanceMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: InstanceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn dimension(&self) -> usize {
        self.scenarios.dimension()
    }

    pub fn check_vertex(&self, v: &Vertex) -> bool {
        check_vertex(v, self.kind, self.graph.as_ref(), self.dimension())
    }

    pub fn objective(&self, v: &Vertex) -> Result<T, ModelError> {
        self.scenarios.evaluate_vertex(v).map(|(val, _)| val)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let raw = RawInstance {
            name: self.name.clone(),
            kind: self.kind,
            nodes: self.graph.as_ref().map(Graph::node_count),
            edges: self
                .graph
                .as_ref()
                .map(|g| g.edges().iter().map(|&(u, v)| [u, v]).collect()),
            scenarios: self
                .scenarios
                .scenarios()
                .iter()
                .map(|s| RawScenario {
                    c0: s.constant.as_f64(),
                    c: s.costs.iter().map(|c| c.as_f64()).collect(),
                })
                .collect(),
            meta: if self.meta == InstanceMeta::default() {
                None
            } else {
                Some(self.meta.clone())
            },
        };
        let mut out = serde_json::to_vec_pretty(&raw).expect("instance serialization");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        let raw: RawInstance = serde_json::from_slice(bytes)?;
        let conv = |x: f64| T::from_f64(x).ok_or(ModelError::Conversion(x));
        let scenarios = raw
            .scenarios
            .into_iter()
            .map(|s| {
                Ok(Scenario::new(
                    conv(s.c0)?,
                    s.c.into_iter().map(conv).collect::<Result<_, _>>()?,
                ))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let scenarios = ScenarioSet::new(scenarios)?;
        let graph = match (raw.kind, raw.nodes, raw.edges) {
            (_, Some(nodes), Some(edges)) => Some(Graph::new(nodes, edges.into_iter().map(|[u, v]| (u, v)).collect())?),
            (ProblemKind::Generic, None, None) => None,
            (ProblemKind::Generic, Some(_), None) | (ProblemKind::Generic, None, Some(_)) => {
                return Err(ModelError::InvalidGraph(
                    "generic instance must give both nodes and edges or neither".into(),
                ))
            }
            (_, Some(nodes), None) => Some(Graph::complete(nodes)),
            (kind, None, _) => return Err(ModelError::InvalidGraph(format!("{kind} instance requires \"nodes\""))),
        };
        Ok(Instance::new(raw.name, raw.kind, graph, scenarios)?.with_meta(raw.meta.unwrap_or_default()))
    }
}

pub fn load_instance<T: Scalar>(bytes: &[u8]) -> Result<Instance<T>, ModelError> {
    Instance::from_json(bytes)
}

pub fn save_instance<T: Scalar>(instance: &Instance<T>) -> Vec<u8> {
    instance.to_json()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    name: String,
    kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<[usize; 2]>>,
    scenarios: Vec<RawScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<InstanceMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    c0: f64,
    c: Vec<f64>,
}

/// A binary point of the feasible set, stored densely.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    bits: Vec<bool>,
}

impl Vertex {
    pub fn new(bits: Vec<bool>) -> Self {
        Vertex { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Vertex { bits: vec![false; n] }
    }

    pub fn from_ones(n: usize, ones: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in ones {
            bits[i] = true;
        }
        Vertex { bits }
    }

    /// Parses a 0/1 slice; any other entry yields `None`.
    pub fn from_u8(values: &[u8]) -> Option<Self> {
        values
            .iter()
            .map(|&b| match b {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Vertex::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn dot<T: Scalar>(&self, costs: &[T]) -> T {
        self.ones().map(|i| costs[i]).sum()
    }

    pub fn to_reals<T: Scalar>(&self) -> Vec<T> {
        self.bits
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect()
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &b) in self.bits.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Kind-specific feasibility of a binary vector; generic instances accept any vector of the right length.
pub fn check_vertex(v: &Vertex, kind: ProblemKind, graph: Option<&Graph>, n: usize) -> bool {
    if v.len() != n {
        return false;
    }
    match (kind, graph) {
        (ProblemKind::Generic, _) => true,
        (ProblemKind::Mst, Some(g)) => g.is_spanning_tree(v),
        (ProblemKind::Tsp, Some(g)) => g.is_tour(v),
        (_, None) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_one() -> ScenarioSet<f64> {
        ScenarioSet::from_costs(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
    }

    #[test]
    fn evaluate_f_matches_examples() {
        let u = example_one();
        assert_eq!(evaluate_f(&[0.0, 0.0], &u).unwrap(), (0.0, 0));
        assert_eq!(evaluate_f(&[0.0, 1.0], &u).unwrap(), (1.0, 1));
        let single = ScenarioSet::new(vec![Scenario::new(5.0, vec![2.0, 3.0])]).unwrap();
        assert_eq!(evaluate_f(&[1.0, 1.0], &single).unwrap(), (10.0, 0));
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        assert!(matches!(
            example_one().evaluate(&[1.0]),
            Err(ModelError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn scenario_set_rejects_empty_and_ragged() {
        assert!(matches!(
            ScenarioSet::<f64>::from_costs(vec![]),
            Err(ModelError::EmptyScenarioSet)
        ));
        assert!(ScenarioSet::from_costs(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(ScenarioSet::from_costs(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn check_vertex_small_graphs() {
        let k3 = Graph::complete(3);
        let mk = |kind| {
            Instance::new(
                "k3",
                kind,
                Some(k3.clone()),
                ScenarioSet::from_costs(vec![vec![1.0; 3]]).unwrap(),
            )
            .unwrap()
        };
        let mst = mk(ProblemKind::Mst);
        let tsp = mk(ProblemKind::Tsp);
        assert!(mst.check_vertex(&Vertex::from_ones(3, &[0, 1])));
        let all = Vertex::from_ones(3, &[0, 1, 2]);
        assert!(!mst.check_vertex(&all));
        assert!(tsp.check_vertex(&all));

        // K4 edges: 01 02 03 12 13 23; node 0 gets degree 3
        let k4 = Graph::complete(4);
        assert!(!k4.is_tour(&Vertex::from_ones(6, &[0, 1, 2, 5])));
        assert!(k4.is_tour(&Vertex::from_ones(6, &[0, 3, 5, 2])));
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(3, vec![(1, 0)]).is_err());
        assert!(Graph::new(3, vec![(0, 1), (0, 1)]).is_err());
        assert!(Graph::new(3, vec![(0, 3)]).is_err());
        assert_eq!(Graph::complete(4).edges()[3], (1, 2));
    }

    #[test]
    fn minimal_generic_instance_parses() {
        let json = br#"{"name":"g","kind":"generic","scenarios":[{"c0":0.5,"c":[1.0,2.0]}]}"#;
        let inst: Instance<f64> = load_instance(json).unwrap();
        assert_eq!(inst.kind, ProblemKind::Generic);
        assert_eq!(inst.dimension(), 2);
        assert_eq!(inst.scenarios.get(0).constant, 0.5);
    }

    #[test]
    fn empty_scenarios_rejected() {
        let json = br#"{"name":"g","kind":"generic","scenarios":[]}"#;
        let err = load_instance::<f64>(json).unwrap_err();
        assert_eq!(err.to_string(), "empty scenario set");
    }

    #[test]
    fn unknown_kind_and_dimension_errors() {
        let json = br#"{"name":"g","kind":"vrp","scenarios":[{"c0":0,"c":[1]}]}"#;
        assert!(matches!(load_instance::<f64>(json), Err(ModelError::Parse(_))));
        let json = br#"{"name":"g","kind":"mst","nodes":3,"scenarios":[{"c0":0,"c":[1,2]}]}"#;
        assert!(matches!(
            load_instance::<f64>(json),
            Err(ModelError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn mst_edges_default_to_complete() {
        let json = br#"{"name":"k3","kind":"mst","nodes":3,"scenarios":[{"c0":0,"c":[1,2,3]}]}"#;
        let inst: Instance<f64> = load_instance(json).unwrap();
        assert_eq!(inst.graph.unwrap(), Graph::complete(3));
    }
}
