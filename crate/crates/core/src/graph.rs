//! Measurement graph: typed nodes, directed wireless/wired links, adjacency
//! indices and tree validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Ue,
    Frontend,
    MtDu,
    DonorDu,
}

impl NodeKind {
    /// MT+DU or donor DU: the baseband half of a unit.
    pub fn is_baseband(self) -> bool {
        matches!(self, NodeKind::MtDu | NodeKind::DonorDu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_id: Option<u32>,
    pub pos: [f64; 3],
    #[serde(default)]
    pub indoor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_azimuth_deg: Option<f64>,
}

impl Node {
    pub fn ue(id: u32, pos: [f64; 3], indoor: bool) -> Self {
        Self { id: NodeId(id), kind: NodeKind::Ue, unit_id: None, pos, indoor, sector_azimuth_deg: None }
    }

    pub fn frontend(id: u32, unit_id: u32, pos: [f64; 3], azimuth_deg: f64) -> Self {
        Self {
            id: NodeId(id),
            kind: NodeKind::Frontend,
            unit_id: Some(unit_id),
            pos,
            indoor: false,
            sector_azimuth_deg: Some(azimuth_deg),
        }
    }

    pub fn mt_du(id: u32, unit_id: u32, pos: [f64; 3]) -> Self {
        Self { id: NodeId(id), kind: NodeKind::MtDu, unit_id: Some(unit_id), pos, indoor: false, sector_azimuth_deg: None }
    }

    pub fn donor(id: u32, unit_id: u32, pos: [f64; 3]) -> Self {
        Self { id: NodeId(id), kind: NodeKind::DonorDu, unit_id: Some(unit_id), pos, indoor: false, sector_azimuth_deg: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Wireless,
    Wired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser_db")]
    pub pathloss_db: Option<f64>,
    #[serde(default)]
    pub los: bool,
}

impl Edge {
    pub fn wireless(src: u32, dst: u32, pathloss_db: f64, los: bool) -> Self {
        Self { src: NodeId(src), dst: NodeId(dst), kind: EdgeKind::Wireless, pathloss_db: Some(pathloss_db), los }
    }

    pub fn wired(src: u32, dst: u32) -> Self {
        Self { src: NodeId(src), dst: NodeId(dst), kind: EdgeKind::Wired, pathloss_db: None, los: false }
    }

    pub fn link(&self) -> Link {
        Link { src: self.src, dst: self.dst }
    }

    pub fn is_wireless(&self) -> bool {
        self.kind == EdgeKind::Wireless
    }
}

fn ser_db<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => {
            let raw = serde_json::value::RawValue::from_string(format!("{x:.6}")).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        }
        None => s.serialize_none(),
    }
}

/// Directed (src, dst) pair naming a graph edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
}

impl Link {
    pub fn new(src: NodeId, dst: NodeId) -> Self {
        Self { src, dst }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.dst)
    }
}

/// Downlink routing requirement from the donor DU to one UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commodity {
    pub id: u32,
    pub source: NodeId,
    pub dest: NodeId,
    pub demand_mbps: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("duplicate edge {0}")]
    DuplicateEdge(Link),
    #[error("edge references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("illegal edge endpoints {link}: {reason}")]
    IllegalEdgeEndpoints { link: Link, reason: &'static str },
    #[error("graph has no donor DU")]
    MissingDonor,
    #[error("graph has more than one donor DU")]
    MultipleDonors,
    #[error("frontend {0} does not belong to exactly one MT+DU or donor unit")]
    OrphanFrontend(NodeId),
    #[error("unit {unit} has {count} frontends (expected 1-3)")]
    BadSectorCount { unit: u32, count: usize },
    #[error("node {0} is missing a required field: {1}")]
    MissingField(NodeId, &'static str),
    #[error("UE {0} has no incoming wireless edge")]
    DisconnectedUe(NodeId),
    #[error("invalid pathloss on {0}")]
    InvalidPathloss(Link),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Immutable measurement graph with in/out adjacency.
#[derive(Debug, Clone)]
pub struct MeasurementGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
    edge_index: HashMap<Link, usize>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    donor: usize,
}

impl PartialEq for MeasurementGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl MeasurementGraph {
    /// Checks every structural invariant and builds the adjacency indices.
    pub fn build(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(GraphError::DuplicateId(n.id));
            }
        }

        let mut donors = nodes.iter().enumerate().filter(|(_, n)| n.kind == NodeKind::DonorDu);
        let donor = donors.next().map(|(i, _)| i).ok_or(GraphError::MissingDonor)?;
        if donors.next().is_some() {
            return Err(GraphError::MultipleDonors);
        }

        // unit id -> baseband node
        let mut units: HashMap<u32, usize> = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.kind.is_baseband() {
                let unit = n.unit_id.ok_or(GraphError::MissingField(n.id, "unit_id"))?;
                if units.insert(unit, i).is_some() {
                    return Err(GraphError::DuplicateId(n.id));
                }
            }
        }
        let mut sectors: BTreeMap<u32, usize> = BTreeMap::new();
        for n in &nodes {
            if n.kind == NodeKind::Frontend {
                let unit = n.unit_id.ok_or(GraphError::OrphanFrontend(n.id))?;
                if !units.contains_key(&unit) {
                    return Err(GraphError::OrphanFrontend(n.id));
                }
                if n.sector_azimuth_deg.is_none() {
                    return Err(GraphError::MissingField(n.id, "sector_azimuth_deg"));
                }
                *sectors.entry(unit).or_default() += 1;
            }
        }
        for (&unit, _) in units.iter() {
            let count = sectors.get(&unit).copied().unwrap_or(0);
            if !(1..=3).contains(&count) {
                return Err(GraphError::BadSectorCount { unit, count });
            }
        }

        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut in_edges = vec![Vec::new(); nodes.len()];
        let mut out_edges = vec![Vec::new(); nodes.len()];
        for (ei, e) in edges.iter().enumerate() {
            let link = e.link();
            let si = *index.get(&e.src).ok_or(GraphError::UnknownNode(e.src))?;
            let di = *index.get(&e.dst).ok_or(GraphError::UnknownNode(e.dst))?;
            check_endpoints(e, &nodes[si], &nodes[di])?;
            if edge_index.insert(link, ei).is_some() {
                return Err(GraphError::DuplicateEdge(link));
            }
            out_edges[si].push(ei);
            in_edges[di].push(ei);
        }

        for (i, n) in nodes.iter().enumerate() {
            if n.kind == NodeKind::Ue && !in_edges[i].iter().any(|&e| edges[e].is_wireless()) {
                return Err(GraphError::DisconnectedUe(n.id));
            }
        }

        Ok(Self { nodes, edges, index, edge_index, in_edges, out_edges, donor })
    }

    pub fn from_json_str(s: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(s)
            .map_err(|e| GraphError::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        Self::build(file.nodes, file.edges)
    }

    pub fn to_json_string(&self) -> String {
        let file = GraphFile { nodes: self.nodes.clone(), edges: self.edges.clone() };
        serde_json::to_string_pretty(&file).expect("graph serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| GraphError::Io(e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        fs::write(path.as_ref(), self.to_json_string()).map_err(|e| GraphError::Io(e.to_string()))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn donor(&self) -> &Node {
        &self.nodes[self.donor]
    }

    pub fn edge(&self, link: Link) -> Option<&Edge> {
        self.edge_index.get(&link).map(|&i| &self.edges[i])
    }

    pub fn edge_position(&self, link: Link) -> Option<usize> {
        self.edge_index.get(&link).copied()
    }

    /// Indices into [`edges`](Self::edges) of the links entering `id`.
    pub fn in_edges(&self, id: NodeId) -> &[usize] {
        self.index.get(&id).map(|&i| self.in_edges[i].as_slice()).unwrap_or(&[])
    }

    pub fn out_edges(&self, id: NodeId) -> &[usize] {
        self.index.get(&id).map(|&i| self.out_edges[i].as_slice()).unwrap_or(&[])
    }

    pub fn neighbors_in(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges(id).iter().map(|&e| self.edges[e].src)
    }

    pub fn neighbors_out(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edges(id).iter().map(|&e| self.edges[e].dst)
    }

    /// N_all(v) = N_in(v) ∪ N_out(v).
    pub fn neighbors_all(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.neighbors_in(id).chain(self.neighbors_out(id)).collect()
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.in_edges(id).len()
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.out_edges(id).len()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.in_degree(id) + self.out_degree(id)
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn frontend_ids(&self) -> Vec<NodeId> {
        self.nodes_of(NodeKind::Frontend).map(|n| n.id).collect()
    }

    pub fn ue_ids(&self) -> Vec<NodeId> {
        self.nodes_of(NodeKind::Ue).map(|n| n.id).collect()
    }

    pub fn wireless_edges(&self) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_wireless())
    }

    /// One commodity per UE, sourced at the donor, all with the same demand.
    pub fn commodities(&self, demand_mbps: f64) -> Vec<Commodity> {
        let source = self.donor().id;
        self.nodes_of(NodeKind::Ue)
            .enumerate()
            .map(|(k, n)| Commodity { id: k as u32, source, dest: n.id, demand_mbps })
            .collect()
    }

    /// Same node set, restricted edge set. Invariants are re-checked.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self, GraphError> {
        Self::build(self.nodes.clone(), edges)
    }
}

fn check_endpoints(e: &Edge, src: &Node, dst: &Node) -> Result<(), GraphError> {
    let link = e.link();
    let illegal = |reason| Err(GraphError::IllegalEdgeEndpoints { link, reason });
    if e.src == e.dst {
        return illegal("self loop");
    }
    match e.kind {
        EdgeKind::Wireless => {
            if src.kind != NodeKind::Frontend {
                return illegal("wireless links must leave a frontend");
            }
            match dst.kind {
                NodeKind::Ue => {}
                NodeKind::MtDu => {
                    if src.unit_id == dst.unit_id {
                        return illegal("wireless link into the frontend's own unit");
                    }
                }
                _ => return illegal("wireless links must enter a UE or an MT+DU"),
            }
            match e.pathloss_db {
                Some(pl) if pl.is_finite() && pl >= 0.0 => Ok(()),
                _ => Err(GraphError::InvalidPathloss(link)),
            }
        }
        EdgeKind::Wired => {
            if !src.kind.is_baseband() || dst.kind != NodeKind::Frontend {
                return illegal("wired links connect a unit to its frontend");
            }
            if src.unit_id != dst.unit_id {
                return illegal("wired link across units");
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeViolationKind {
    UnknownEdge,
    InDegree,
    Cycle,
    Unreached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeViolation {
    pub kind: TreeViolationKind,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeReport {
    pub ok: bool,
    pub violations: Vec<TreeViolation>,
    /// Nodes reached from the donor through chosen edges (donor included).
    pub reached: BTreeSet<NodeId>,
}

/// Checks that `chosen` forms a donor-rooted tree covering `required` nodes.
pub fn validate_tree(graph: &MeasurementGraph, chosen: &[Link], required: &[NodeId]) -> TreeReport {
    let mut violations = Vec::new();
    let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut indeg: BTreeMap<NodeId, usize> = BTreeMap::new();
    let set: BTreeSet<Link> = chosen.iter().copied().collect();
    for l in &set {
        if graph.edge(*l).is_none() {
            violations.push(TreeViolation { kind: TreeViolationKind::UnknownEdge, node: l.dst });
            continue;
        }
        children.entry(l.src).or_default().push(l.dst);
        *indeg.entry(l.dst).or_default() += 1;
    }
    let donor = graph.donor().id;
    for (&n, &d) in &indeg {
        if d > 1 || n == donor {
            violations.push(TreeViolation { kind: TreeViolationKind::InDegree, node: n });
        }
    }

    // iterative three-colour DFS over every chosen edge
    let mut colour: BTreeMap<NodeId, u8> = BTreeMap::new();
    let starts: Vec<NodeId> = children.keys().copied().collect();
    for s in starts {
        if colour.get(&s).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        colour.insert(s, 1);
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let kids = children.get(&v).map(Vec::as_slice).unwrap_or(&[]);
            if *next < kids.len() {
                let w = kids[*next];
                *next += 1;
                match colour.get(&w).copied().unwrap_or(0) {
                    0 => {
                        colour.insert(w, 1);
                        stack.push((w, 0));
                    }
                    1 => violations.push(TreeViolation { kind: TreeViolationKind::Cycle, node: w }),
                    _ => {}
                }
            } else {
                colour.insert(v, 2);
                stack.pop();
            }
        }
    }

    let mut reached = BTreeSet::new();
    let mut frontier = vec![donor];
    reached.insert(donor);
    while let Some(v) = frontier.pop() {
        for &w in children.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if reached.insert(w) {
                frontier.push(w);
            }
        }
    }
    for &r in required {
        if !reached.contains(&r) {
            violations.push(TreeViolation { kind: TreeViolationKind::Unreached, node: r });
        }
    }
    TreeReport { ok: violations.is_empty(), violations, reached }
}
