//! Metric graphs, edge dressings and validated graph Hamiltonians.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::coupling::{CouplingSpec, UnitaryCoupling};
use crate::{Error, Result};

pub type VertexId = u32;
pub type EdgeId = u32;
pub type CouplingId = String;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Length {
    Finite(f64),
    Infinite,
}

impl Length {
    pub fn finite(self) -> Option<f64> {
        match self {
            Length::Finite(l) => Some(l),
            Length::Infinite => None,
        }
    }
}

/// Fields living on an edge, in the edge's own coordinate `x ∈ [0, L]`.
///
/// The scalar potential is piecewise constant: entry `(x_i, v_i)` means
/// `V = v_i` on `[x_{i−1}, x_i)` (with `x_{−1} = 0`) and `V = 0` beyond the
/// last breakpoint. δ points carry `(position, strength)`: ψ is continuous
/// and the covariant derivative `Dψ = ψ' − iAψ` jumps by `strength·ψ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeDressing {
    pub vector_potential: f64,
    pub potential: Vec<(f64, f64)>,
    pub delta_points: Vec<(f64, f64)>,
}

/// One ingredient of an edge, traversed in increasing `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Segment { len: f64, potential: f64 },
    Delta(f64),
}

impl EdgeDressing {
    pub fn is_bare(&self) -> bool {
        self.vector_potential == 0.0 && self.potential.is_empty() && self.delta_points.is_empty()
    }

    pub fn with_delta(mut self, x: f64, strength: f64) -> Self {
        self.delta_points.push((x, strength));
        self.delta_points.sort_by(|a, b| a.0.total_cmp(&b.0));
        self
    }

    /// Rightmost point where the dressing is not free (0 for a bare edge).
    pub fn support_end(&self) -> f64 {
        let p = self.potential.last().map(|p| p.0).unwrap_or(0.0);
        let d = self.delta_points.last().map(|d| d.0).unwrap_or(0.0);
        p.max(d)
    }

    /// Validates ordering and placement against an edge of length `length`.
    pub fn validate(&self, length: Length, at: &str) -> Result<()> {
        let limit = length.finite().unwrap_or(f64::INFINITY);
        if !self.vector_potential.is_finite() {
            return Err(invalid(at, "vector_potential", "must be finite"));
        }
        let mut prev = 0.0;
        for (i, &(x, v)) in self.potential.iter().enumerate() {
            if !(x > prev) || !(x <= limit) || !x.is_finite() {
                return Err(invalid(
                    at,
                    &format!("potential[{i}]"),
                    "breakpoints must be strictly increasing inside (0, L]",
                ));
            }
            if !v.is_finite() {
                return Err(invalid(at, &format!("potential[{i}]"), "value must be finite"));
            }
            prev = x;
        }
        let mut prev = 0.0;
        for (i, &(x, c)) in self.delta_points.iter().enumerate() {
            if !(x > prev) || !(x < limit) {
                return Err(invalid(
                    at,
                    &format!("delta_points[{i}]"),
                    "positions must be strictly increasing inside (0, L)",
                ));
            }
            if !c.is_finite() {
                return Err(invalid(at, &format!("delta_points[{i}]"), "strength must be finite"));
            }
            prev = x;
        }
        Ok(())
    }

    /// Merges equal neighbouring potential values and drops a trailing zero
    /// piece, which does not change the potential.
    pub fn canonical(&self) -> Self {
        let mut pot: Vec<(f64, f64)> = Vec::with_capacity(self.potential.len());
        for &(x, v) in &self.potential {
            match pot.last_mut() {
                Some(last) if last.1 == v => last.0 = x,
                _ => pot.push((x, v)),
            }
        }
        while matches!(pot.last(), Some(&(_, v)) if v == 0.0) {
            pot.pop();
        }
        EdgeDressing {
            vector_potential: self.vector_potential,
            potential: pot,
            delta_points: self.delta_points.clone(),
        }
    }

    /// Potential value on the open cell just right of `x`.
    pub fn potential_at(&self, x: f64) -> f64 {
        self.potential
            .iter()
            .find(|&&(bp, _)| x < bp)
            .map(|&(_, v)| v)
            .unwrap_or(0.0)
    }

    /// The dressing seen from the other end of an edge of length `length`:
    /// positions mirrored, vector potential negated.
    pub fn reversed(&self, length: f64) -> Self {
        // Pieces [x_{i−1}, x_i) with value v_i, plus the trailing zero piece.
        let mut cuts: Vec<(f64, f64, f64)> = Vec::new();
        let mut prev = 0.0;
        for &(x, v) in &self.potential {
            cuts.push((prev, x, v));
            prev = x;
        }
        if prev < length {
            cuts.push((prev, length, 0.0));
        }
        let mut pot = Vec::with_capacity(cuts.len());
        for &(lo, _hi, v) in cuts.iter().rev() {
            pot.push((length - lo, v));
        }
        let mut delta: Vec<(f64, f64)> = self
            .delta_points
            .iter()
            .map(|&(x, c)| (length - x, c))
            .collect();
        delta.reverse();
        EdgeDressing {
            vector_potential: -self.vector_potential,
            potential: pot,
            delta_points: delta,
        }
        .canonical()
    }

    /// Splits the dressing at `x`: returns the parts on `[0, x]` and on
    /// `[x, L]` (the latter shifted to start at 0). A δ exactly at `x` is
    /// dropped.
    pub fn split_at(&self, x: f64) -> (Self, Self) {
        let mut left_pot = Vec::new();
        let mut right_pot = Vec::new();
        let mut prev = 0.0;
        for &(bp, v) in &self.potential {
            if bp <= x {
                left_pot.push((bp, v));
            } else {
                if prev < x {
                    left_pot.push((x, v));
                }
                right_pot.push((bp - x, v));
            }
            prev = bp;
        }
        let left_delta = self.delta_points.iter().filter(|d| d.0 < x).copied().collect();
        let right_delta = self
            .delta_points
            .iter()
            .filter(|d| d.0 > x)
            .map(|&(p, c)| (p - x, c))
            .collect();
        (
            EdgeDressing {
                vector_potential: self.vector_potential,
                potential: left_pot,
                delta_points: left_delta,
            }
            .canonical(),
            EdgeDressing {
                vector_potential: self.vector_potential,
                potential: right_pot,
                delta_points: right_delta,
            }
            .canonical(),
        )
    }

    /// Segments and δ points in order of increasing `x`, covering `[0, end]`.
    /// For half-lines pass `end = support_end()`.
    pub fn pieces(&self, end: f64) -> Vec<Piece> {
        let mut cuts: Vec<f64> = self
            .potential
            .iter()
            .map(|p| p.0)
            .chain(self.delta_points.iter().map(|d| d.0))
            .filter(|&x| x < end)
            .collect();
        cuts.push(end);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::new();
        let mut pos = 0.0;
        let mut di = 0;
        for &c in &cuts {
            if c > pos {
                out.push(Piece::Segment {
                    len: c - pos,
                    potential: self.potential_at(pos),
                });
                pos = c;
            }
            while di < self.delta_points.len() && self.delta_points[di].0 <= pos {
                if self.delta_points[di].0 == pos && pos < end {
                    out.push(Piece::Delta(self.delta_points[di].1));
                }
                di += 1;
            }
        }
        out
    }
}

fn invalid(at: &str, field: &str, reason: &str) -> Error {
    Error::InvalidGraph {
        at: format!("{at}.{field}"),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub coupling: CouplingId,
}

/// A finite edge runs from `from` (x = 0) to `to` (x = L); a half-line has
/// `to = None`, `length = Infinite` and starts at `from`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: VertexId,
    pub to: Option<VertexId>,
    pub length: Length,
    pub dressing: EdgeDressing,
}

impl Edge {
    pub fn is_half_line(&self) -> bool {
        self.to.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum End {
    Start,
    End,
}

/// One edge end attached to a vertex. The order of a vertex's ends (sorted
/// by edge id, start before end) fixes the rows and columns of its coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EndRef {
    pub edge: EdgeId,
    pub end: End,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricGraph {
    vertices: BTreeMap<VertexId, Vertex>,
    edges: BTreeMap<EdgeId, Edge>,
}

/// A structural edit; see [`MetricGraph::apply`].
#[derive(Debug, Clone, PartialEq)]
pub enum GraphOp {
    AddVertex { coupling: CouplingId },
    Connect {
        from: VertexId,
        to: VertexId,
        length: f64,
        dressing: EdgeDressing,
    },
    AttachHalfLine { vertex: VertexId, dressing: EdgeDressing },
    SetDressing { edge: EdgeId, dressing: EdgeDressing },
    SetCoupling { vertex: VertexId, coupling: CouplingId },
}

/// Id produced by an operation of a mutation batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewId {
    Vertex(VertexId),
    Edge(EdgeId),
    None,
}

impl MetricGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles and validates a graph from explicit maps.
    pub fn from_parts(
        vertices: BTreeMap<VertexId, Vertex>,
        edges: BTreeMap<EdgeId, Edge>,
    ) -> Result<Self> {
        let g = MetricGraph { vertices, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn vertices(&self) -> &BTreeMap<VertexId, Vertex> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeMap<EdgeId, Edge> {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn is_compact(&self) -> bool {
        self.edges.values().all(|e| !e.is_half_line())
    }

    /// Edge ends at `v` in coupling order.
    pub fn ends_at(&self, v: VertexId) -> Vec<EndRef> {
        let mut out = Vec::new();
        for (&id, e) in &self.edges {
            if e.from == v {
                out.push(EndRef { edge: id, end: End::Start });
            }
            if e.to == Some(v) {
                out.push(EndRef { edge: id, end: End::End });
            }
        }
        out
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.ends_at(v).len()
    }

    pub fn validate(&self) -> Result<()> {
        for (&id, e) in &self.edges {
            let at = format!("edges[{id}]");
            match (e.length, e.to) {
                (Length::Finite(l), Some(_)) => {
                    if !(l > 0.0) || !l.is_finite() {
                        return Err(Error::NonPositiveLength {
                            at: format!("{at}.length"),
                            value: l,
                        });
                    }
                }
                (Length::Infinite, None) => {}
                (Length::Finite(_), None) => {
                    return Err(invalid(&at, "to", "a finite edge needs two endpoints"))
                }
                (Length::Infinite, Some(_)) => {
                    return Err(invalid(&at, "to", "a half-line has exactly one endpoint"))
                }
            }
            for v in core::iter::once(e.from).chain(e.to) {
                if !self.vertices.contains_key(&v) {
                    return Err(Error::DanglingReference {
                        at: at.clone(),
                        what: format!("vertex {v}"),
                    });
                }
            }
            e.dressing.validate(e.length, &at)?;
        }
        for &v in self.vertices.keys() {
            if self.degree(v) == 0 {
                return Err(Error::InvalidGraph {
                    at: format!("vertices[{v}]"),
                    reason: "vertex has degree 0".into(),
                });
            }
        }
        Ok(())
    }

    fn next_vertex_id(&self) -> VertexId {
        self.vertices.keys().next_back().map_or(0, |v| v + 1)
    }

    fn next_edge_id(&self) -> EdgeId {
        self.edges.keys().next_back().map_or(0, |e| e + 1)
    }

    /// Applies a batch of edits to a copy of the graph and validates the
    /// result. New ids are the smallest unused id above the current maximum.
    pub fn apply(&self, ops: &[GraphOp]) -> Result<(MetricGraph, Vec<NewId>)> {
        let mut g = self.clone();
        let mut ids = Vec::with_capacity(ops.len());
        for (i, op) in ops.iter().enumerate() {
            let at = format!("op[{i}]");
            let need_vertex = |g: &MetricGraph, v: VertexId| {
                if g.vertices.contains_key(&v) {
                    Ok(())
                } else {
                    Err(Error::DanglingReference {
                        at: at.clone(),
                        what: format!("vertex {v}"),
                    })
                }
            };
            match op {
                GraphOp::AddVertex { coupling } => {
                    let id = g.next_vertex_id();
                    g.vertices.insert(id, Vertex { coupling: coupling.clone() });
                    ids.push(NewId::Vertex(id));
                }
                GraphOp::Connect {
                    from,
                    to,
                    length,
                    dressing,
                } => {
                    need_vertex(&g, *from)?;
                    need_vertex(&g, *to)?;
                    if !(*length > 0.0) || !length.is_finite() {
                        return Err(Error::NonPositiveLength {
                            at: format!("{at}.length"),
                            value: *length,
                        });
                    }
                    let id = g.next_edge_id();
                    g.edges.insert(
                        id,
                        Edge {
                            from: *from,
                            to: Some(*to),
                            length: Length::Finite(*length),
                            dressing: dressing.clone(),
                        },
                    );
                    ids.push(NewId::Edge(id));
                }
                GraphOp::AttachHalfLine { vertex, dressing } => {
                    need_vertex(&g, *vertex)?;
                    let id = g.next_edge_id();
                    g.edges.insert(
                        id,
                        Edge {
                            from: *vertex,
                            to: None,
                            length: Length::Infinite,
                            dressing: dressing.clone(),
                        },
                    );
                    ids.push(NewId::Edge(id));
                }
                GraphOp::SetDressing { edge, dressing } => {
                    let e = g.edges.get_mut(edge).ok_or_else(|| Error::DanglingReference {
                        at: at.clone(),
                        what: format!("edge {edge}"),
                    })?;
                    e.dressing = dressing.clone();
                    ids.push(NewId::None);
                }
                GraphOp::SetCoupling { vertex, coupling } => {
                    need_vertex(&g, *vertex)?;
                    g.vertices.get_mut(vertex).expect("checked").coupling = coupling.clone();
                    ids.push(NewId::None);
                }
            }
        }
        g.validate()?;
        Ok((g, ids))
    }

    /// Reverses the orientation of a finite edge.
    pub fn reverse_edge(&self, id: EdgeId) -> Result<MetricGraph> {
        let mut g = self.clone();
        let e = g.edges.get_mut(&id).ok_or_else(|| Error::DanglingReference {
            at: "reverse_edge".into(),
            what: format!("edge {id}"),
        })?;
        let (Some(to), Length::Finite(l)) = (e.to, e.length) else {
            return Err(Error::Precondition("half-lines cannot be reversed".into()));
        };
        e.to = Some(e.from);
        e.from = to;
        e.dressing = e.dressing.reversed(l);
        Ok(g)
    }
}

/// A metric graph together with the coupling attached to every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphHamiltonian {
    graph: MetricGraph,
    couplings: BTreeMap<CouplingId, CouplingSpec>,
    unitaries: BTreeMap<VertexId, UnitaryCoupling>,
}

impl GraphHamiltonian {
    /// Validates the graph and resolves every vertex coupling; the coupling
    /// dimension must equal the vertex degree.
    pub fn new(graph: MetricGraph, couplings: BTreeMap<CouplingId, CouplingSpec>) -> Result<Self> {
        graph.validate()?;
        let mut unitaries = BTreeMap::new();
        for (&v, vx) in graph.vertices() {
            let at = format!("vertices[{v}].coupling");
            let spec = couplings.get(&vx.coupling).ok_or_else(|| Error::DanglingReference {
                at: at.clone(),
                what: format!("coupling '{}'", vx.coupling),
            })?;
            let deg = graph.degree(v);
            let u = spec.unitary(deg).map_err(|e| match e {
                Error::DimensionMismatch { expected, found, .. } => Error::DimensionMismatch {
                    at: format!("{at} ('{}')", vx.coupling),
                    expected,
                    found,
                },
                Error::InvalidCoupling(r) => Error::InvalidCoupling(format!("couplings.{}: {r}", vx.coupling)),
                other => other,
            })?;
            unitaries.insert(v, u);
        }
        Ok(GraphHamiltonian {
            graph,
            couplings,
            unitaries,
        })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn couplings(&self) -> &BTreeMap<CouplingId, CouplingSpec> {
        &self.couplings
    }

    pub fn unitary(&self, v: VertexId) -> &UnitaryCoupling {
        &self.unitaries[&v]
    }

    /// Applies graph edits and coupling updates, then revalidates.
    pub fn mutate(
        &self,
        ops: &[GraphOp],
        new_couplings: impl IntoIterator<Item = (CouplingId, CouplingSpec)>,
    ) -> Result<(GraphHamiltonian, Vec<NewId>)> {
        let (g, ids) = self.graph.apply(ops)?;
        let mut c = self.couplings.clone();
        c.extend(new_couplings);
        Ok((GraphHamiltonian::new(g, c)?, ids))
    }

    /// Replaces the `index`-th δ point of `edge` by a degree-2 vertex with
    /// the same δ coupling.
    pub fn promote_delta_point(&self, edge: EdgeId, index: usize) -> Result<GraphHamiltonian> {
        let e = self.graph.edge(edge).ok_or_else(|| Error::DanglingReference {
            at: "promote_delta_point".into(),
            what: format!("edge {edge}"),
        })?;
        let &(x, strength) = e.dressing.delta_points.get(index).ok_or_else(|| {
            Error::Precondition(format!("edge {edge} has no δ point #{index}"))
        })?;
        let (left, right) = e.dressing.split_at(x);
        let coupling_id = format!("promoted_{edge}_{index}");
        let mut g = self.graph.clone();
        let w = g.next_vertex_id();
        let new_edge = g.next_edge_id();
        g.vertices.insert(w, Vertex { coupling: coupling_id.clone() });
        let old = g.edges.get_mut(&edge).expect("checked");
        let tail = Edge {
            from: w,
            to: old.to,
            length: match old.length {
                Length::Finite(l) => Length::Finite(l - x),
                Length::Infinite => Length::Infinite,
            },
            dressing: right,
        };
        old.to = Some(w);
        old.length = Length::Finite(x);
        old.dressing = left;
        g.edges.insert(new_edge, tail);
        let mut couplings = self.couplings.clone();
        couplings.insert(coupling_id, CouplingSpec::delta(strength));
        GraphHamiltonian::new(g, couplings)
    }

    /// Smallest finite edge length (or of the dressing features on
    /// half-lines), used to size scan steps.
    pub fn min_feature_length(&self) -> f64 {
        let mut m = f64::INFINITY;
        for e in self.graph.edges().values() {
            let mut marks: Vec<f64> = alloc::vec![0.0];
            marks.extend(e.dressing.potential.iter().map(|p| p.0));
            marks.extend(e.dressing.delta_points.iter().map(|d| d.0));
            if let Length::Finite(l) = e.length {
                marks.push(l);
            }
            marks.sort_by(f64::total_cmp);
            for w in marks.windows(2) {
                if w[1] > w[0] {
                    m = m.min(w[1] - w[0]);
                }
            }
        }
        m
    }
}

impl core::fmt::Display for Length {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Length::Finite(l) => write!(f, "{l}"),
            Length::Infinite => f.write_str("inf"),
        }
    }
}

/// Convenience constructor for star graphs: one centre vertex (id 0) with
/// coupling `centre`, and `n` edges with ids `0..n`. Finite arms end in
/// vertices `1..=n` carrying coupling `outer`.
pub fn star(
    n: usize,
    arm: Option<f64>,
    centre: CouplingSpec,
    outer: Option<CouplingSpec>,
    dressings: &[EdgeDressing],
) -> Result<GraphHamiltonian> {
    let mut vertices = BTreeMap::new();
    let mut edges = BTreeMap::new();
    vertices.insert(0, Vertex { coupling: "centre".to_string() });
    for j in 0..n {
        let dressing = dressings.get(j).cloned().unwrap_or_default();
        let (to, length) = match arm {
            Some(l) => {
                let v = j as VertexId + 1;
                vertices.insert(v, Vertex { coupling: "outer".to_string() });
                (Some(v), Length::Finite(l))
            }
            None => (None, Length::Infinite),
        };
        edges.insert(
            j as EdgeId,
            Edge {
                from: 0,
                to,
                length,
                dressing,
            },
        );
    }
    let mut couplings = BTreeMap::new();
    couplings.insert("centre".to_string(), centre);
    if arm.is_some() {
        let outer = outer.ok_or_else(|| {
            Error::Precondition("finite arms need an outer-end coupling".into())
        })?;
        couplings.insert("outer".to_string(), outer);
    }
    GraphHamiltonian::new(MetricGraph::from_parts(vertices, edges)?, couplings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::NamedForm;

    fn line_pair() -> MetricGraph {
        let mut vertices = BTreeMap::new();
        vertices.insert(0, Vertex { coupling: "c".into() });
        let mut edges = BTreeMap::new();
        for id in 0..2 {
            edges.insert(
                id,
                Edge {
                    from: 0,
                    to: None,
                    length: Length::Infinite,
                    dressing: EdgeDressing::default(),
                },
            );
        }
        MetricGraph::from_parts(vertices, edges).unwrap()
    }

    #[test]
    fn two_half_line_star_is_valid() {
        let g = line_pair();
        assert_eq!(g.vertices().len(), 1);
        assert_eq!(g.degree(0), 2);
        let mut c = BTreeMap::new();
        c.insert("c".to_string(), CouplingSpec::delta(0.0));
        GraphHamiltonian::new(g, c).unwrap();
    }

    #[test]
    fn negative_length_is_rejected() {
        let mut vertices = BTreeMap::new();
        vertices.insert(0, Vertex { coupling: "c".into() });
        vertices.insert(1, Vertex { coupling: "c".into() });
        let mut edges = BTreeMap::new();
        edges.insert(
            0,
            Edge {
                from: 0,
                to: Some(1),
                length: Length::Finite(-1.0),
                dressing: EdgeDressing::default(),
            },
        );
        let err = MetricGraph::from_parts(vertices, edges).unwrap_err();
        assert!(matches!(err, Error::NonPositiveLength { .. }));
        assert!(err.to_string().contains("non-positive length"));
    }

    #[test]
    fn coupling_dimension_must_match_degree() {
        let g = star(3, None, CouplingSpec::delta(0.0), None, &[]).unwrap();
        let u2 = crate::coupling::make_named(&NamedForm::Free, 2).unwrap();
        let mut c = g.couplings().clone();
        c.insert("centre".into(), CouplingSpec::Unitary(u2));
        let err = GraphHamiltonian::new(g.graph().clone(), c).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 2, .. }));
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn mutation_examples() {
        let mut vertices = BTreeMap::new();
        let mut edges = BTreeMap::new();
        for v in 0..2 {
            vertices.insert(v, Vertex { coupling: "c".into() });
            edges.insert(
                v,
                Edge {
                    from: v,
                    to: None,
                    length: Length::Infinite,
                    dressing: EdgeDressing::default(),
                },
            );
        }
        let g = MetricGraph::from_parts(vertices, edges).unwrap();
        let d = 0.05;
        let (g2, ids) = g
            .apply(&[GraphOp::Connect {
                from: 0,
                to: 1,
                length: 2.0 * d,
                dressing: EdgeDressing::default(),
            }])
            .unwrap();
        assert_eq!(g2.edges().len(), g.edges().len() + 1);
        assert_eq!(ids, [NewId::Edge(2)]);

        let (g3, _) = g
            .apply(&[GraphOp::AttachHalfLine {
                vertex: 0,
                dressing: EdgeDressing::default(),
            }])
            .unwrap();
        assert_eq!(g3.degree(0), g.degree(0) + 1);

        let err = g
            .apply(&[GraphOp::Connect {
                from: 0,
                to: 1,
                length: 0.0,
                dressing: EdgeDressing::default(),
            }])
            .unwrap_err();
        assert!(matches!(err, Error::NonPositiveLength { .. }));

        let err = g
            .apply(&[GraphOp::AttachHalfLine {
                vertex: 9,
                dressing: EdgeDressing::default(),
            }])
            .unwrap_err();
        assert!(matches!(err, Error::DanglingReference { .. }));

        // A lone new vertex fails validation at the end of the batch, a
        // connected one passes.
        assert!(g.apply(&[GraphOp::AddVertex { coupling: "c".into() }]).is_err());
        let (g4, ids) = g
            .apply(&[
                GraphOp::AddVertex { coupling: "c".into() },
                GraphOp::AttachHalfLine {
                    vertex: 2,
                    dressing: EdgeDressing::default(),
                },
            ])
            .unwrap();
        assert_eq!(ids[0], NewId::Vertex(2));
        assert_eq!(g4.degree(2), 1);
    }

    #[test]
    fn mutation_keeps_coupling_dimensions_checked() {
        let h = star(2, None, CouplingSpec::Unitary(crate::coupling::make_named(&NamedForm::Free, 2).unwrap()), None, &[]).unwrap();
        let op = GraphOp::AttachHalfLine {
            vertex: 0,
            dressing: EdgeDressing::default(),
        };
        assert!(matches!(
            h.mutate(&[op], []),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pieces_interleave_potential_and_deltas() {
        let d = EdgeDressing {
            vector_potential: 0.0,
            potential: alloc::vec![(0.5, 2.0), (1.0, -1.0)],
            delta_points: alloc::vec![(0.25, 3.0), (0.5, 4.0)],
        };
        let p = d.pieces(2.0);
        assert_eq!(
            p,
            alloc::vec![
                Piece::Segment { len: 0.25, potential: 2.0 },
                Piece::Delta(3.0),
                Piece::Segment { len: 0.25, potential: 2.0 },
                Piece::Delta(4.0),
                Piece::Segment { len: 0.5, potential: -1.0 },
                Piece::Segment { len: 1.0, potential: 0.0 },
            ]
        );
    }

    #[test]
    fn reversal_round_trip() {
        let d = EdgeDressing {
            vector_potential: 0.7,
            potential: alloc::vec![(0.5, 2.0), (1.0, -1.0)],
            delta_points: alloc::vec![(0.25, 3.0), (1.5, 4.0)],
        };
        let r = d.reversed(2.0);
        assert_eq!(r.vector_potential, -0.7);
        assert_eq!(r.delta_points, alloc::vec![(0.5, 4.0), (1.75, 3.0)]);
        assert_eq!(r.potential, alloc::vec![(1.0, 0.0), (1.5, -1.0), (2.0, 2.0)]);
        assert_eq!(r.reversed(2.0), d.canonical());
    }
}
