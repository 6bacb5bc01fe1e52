//! The evolving weighted graph state.
//!
//! The state starts as a single triangle in which every object (the triangle,
//! its three edges, its three vertices) has weight 1. Every step adds exactly
//! one unit of triangle weight and three units of edge weight, so after `n`
//! steps the totals are `n + 1` and `3(n + 1)` exactly. A vertex's weight is
//! the sum of the weights of the triangles containing it, which is half the
//! weight of its incident edges.
//!
//! Weight-proportional sampling is realized by token arrays: one slot per
//! unit of weight, so a uniform slot draw selects an edge with probability
//! `weight / 3n` and a triangle with probability `weight / n`. Sampling is
//! O(1) and each step appends 3 edge tokens and 1 triangle token.
//!
//! Triples that have never interacted are not materialized: they would carry
//! no preferential mass, and uniform triple selection ranges over vertex
//! triples rather than stored triangles.

use std::collections::{BTreeMap, HashMap};
use std::io;

use serde::Serialize;

pub type VertexId = u32;

/// Unordered vertex pair, canonicalized ascending.
pub type EdgeKey = (VertexId, VertexId);

/// Unordered vertex triple, canonicalized ascending.
pub type TriangleKey = (VertexId, VertexId, VertexId);

pub fn edge_key(a: VertexId, b: VertexId) -> EdgeKey {
    assert_ne!(a, b, "edge endpoints must be distinct");
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn triangle_key(a: VertexId, b: VertexId, c: VertexId) -> TriangleKey {
    assert!(a != b && b != c && a != c, "triangle vertices must be distinct");
    let mut t = [a, b, c];
    t.sort_unstable();
    (t[0], t[1], t[2])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphState {
    steps: u64,
    vertex_weights: Vec<u64>,
    edges: HashMap<EdgeKey, u64>,
    triangles: HashMap<TriangleKey, u64>,
    edge_tokens: Vec<EdgeKey>,
    triangle_tokens: Vec<TriangleKey>,
}

impl Default for GraphState {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphState {
    /// The initial triangle: vertices 0, 1, 2, all weights 1, zero steps.
    pub fn new() -> Self {
        let edges: HashMap<EdgeKey, u64> =
            [((0, 1), 1), ((0, 2), 1), ((1, 2), 1)].into_iter().collect();
        GraphState {
            steps: 0,
            vertex_weights: vec![1, 1, 1],
            edges,
            triangles: [((0, 1, 2), 1)].into_iter().collect(),
            edge_tokens: vec![(0, 1), (0, 2), (1, 2)],
            triangle_tokens: vec![(0, 1, 2)],
        }
    }

    /// Completed steps `n`.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_weights.len()
    }

    pub fn vertex_weight(&self, v: VertexId) -> Option<u64> {
        self.vertex_weights.get(v as usize).copied()
    }

    pub fn vertex_weights(&self) -> &[u64] {
        &self.vertex_weights
    }

    pub fn edge_weight(&self, a: VertexId, b: VertexId) -> Option<u64> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    pub fn triangle_weight(&self, a: VertexId, b: VertexId, c: VertexId) -> Option<u64> {
        self.triangles.get(&triangle_key(a, b, c)).copied()
    }

    /// All edges with weights, in unspecified order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeKey, u64)> + '_ {
        self.edges.iter().map(|(&k, &w)| (k, w))
    }

    /// All positive-weight triangles, in unspecified order.
    pub fn triangles(&self) -> impl Iterator<Item = (TriangleKey, u64)> + '_ {
        self.triangles.iter().map(|(&k, &w)| (k, w))
    }

    /// Edges sorted by key, for deterministic output.
    pub fn edges_sorted(&self) -> Vec<(EdgeKey, u64)> {
        let mut edges: Vec<_> = self.edges().collect();
        edges.sort_unstable();
        edges
    }

    /// Triangles sorted by key, for deterministic output.
    pub fn triangles_sorted(&self) -> Vec<(TriangleKey, u64)> {
        let mut triangles: Vec<_> = self.triangles().collect();
        triangles.sort_unstable();
        triangles
    }

    /// Total edge weight, `3(n + 1)`; equals the edge token count.
    pub fn total_edge_weight(&self) -> u64 {
        self.edge_tokens.len() as u64
    }

    /// Total triangle weight, `n + 1`; equals the triangle token count.
    pub fn total_triangle_weight(&self) -> u64 {
        self.triangle_tokens.len() as u64
    }

    /// One entry per unit of edge weight.
    pub fn edge_tokens(&self) -> &[EdgeKey] {
        &self.edge_tokens
    }

    /// One entry per unit of triangle weight.
    pub fn triangle_tokens(&self) -> &[TriangleKey] {
        &self.triangle_tokens
    }

    pub fn weight_histogram(&self) -> WeightHistogram {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for &w in &self.vertex_weights {
            *counts.entry(w).or_insert(0) += 1;
        }
        WeightHistogram {
            counts,
            v_count: self.vertex_weights.len() as u64,
        }
    }

    pub(crate) fn add_vertex(&mut self) -> VertexId {
        let id = self.vertex_weights.len() as VertexId;
        self.vertex_weights.push(0);
        id
    }

    /// Create-or-increment an edge by one unit and append its token.
    pub(crate) fn bump_edge(&mut self, a: VertexId, b: VertexId) {
        let key = edge_key(a, b);
        *self.edges.entry(key).or_insert(0) += 1;
        self.edge_tokens.push(key);
    }

    /// Create-or-increment a triangle by one unit, append its token, and
    /// propagate one unit of weight to each of its vertices.
    pub(crate) fn bump_triangle(&mut self, a: VertexId, b: VertexId, c: VertexId) {
        let key = triangle_key(a, b, c);
        *self.triangles.entry(key).or_insert(0) += 1;
        self.triangle_tokens.push(key);
        for v in [a, b, c] {
            self.vertex_weights[v as usize] += 1;
        }
    }

    pub(crate) fn finish_step(&mut self) {
        self.steps += 1;
    }

    /// Audits every structural identity. Returns an empty list iff the state
    /// is consistent; each entry names the violated identity and the
    /// offending quantity.
    pub fn verify_invariants(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let n = self.steps;
        let v_count = self.vertex_weights.len() as u64;

        let edge_total: u64 = self.edges.values().sum();
        if edge_total != 3 * (n + 1) {
            violations.push(format!(
                "edge-weight total: sum = {edge_total}, expected 3(n+1) = {}",
                3 * (n + 1)
            ));
        }
        let triangle_total: u64 = self.triangles.values().sum();
        if triangle_total != n + 1 {
            violations.push(format!(
                "triangle-weight total: sum = {triangle_total}, expected n+1 = {}",
                n + 1
            ));
        }
        let vertex_total: u64 = self.vertex_weights.iter().sum();
        if vertex_total != 3 * (n + 1) {
            violations.push(format!(
                "vertex-weight total: sum = {vertex_total}, expected 3(n+1) = {}",
                3 * (n + 1)
            ));
        }

        for (&(a, b), &w) in &self.edges {
            if a >= b {
                violations.push(format!("edge key not canonical: ({a}, {b})"));
            }
            if b as u64 >= v_count {
                violations.push(format!("edge endpoint out of range: ({a}, {b})"));
            }
            if w == 0 {
                violations.push(format!("edge weight zero: ({a}, {b})"));
            }
        }
        for (&(a, b, c), &w) in &self.triangles {
            if !(a < b && b < c) {
                violations.push(format!("triangle key not canonical: ({a}, {b}, {c})"));
            }
            if c as u64 >= v_count {
                violations.push(format!("triangle vertex out of range: ({a}, {b}, {c})"));
            }
            if w == 0 {
                violations.push(format!("triangle weight zero: ({a}, {b}, {c})"));
            }
        }

        // per-vertex weight identities, recomputed from scratch
        let mut from_triangles = vec![0u64; self.vertex_weights.len()];
        for (&(a, b, c), &w) in &self.triangles {
            for v in [a, b, c] {
                if (v as u64) < v_count {
                    from_triangles[v as usize] += w;
                }
            }
        }
        let mut incident_edge_weight = vec![0u64; self.vertex_weights.len()];
        for (&(a, b), &w) in &self.edges {
            for v in [a, b] {
                if (v as u64) < v_count {
                    incident_edge_weight[v as usize] += w;
                }
            }
        }
        for (v, &w) in self.vertex_weights.iter().enumerate() {
            if from_triangles[v] != w {
                violations.push(format!(
                    "vertex weight = sum of containing-triangle weights: vertex {v} stores {w}, triangles give {}",
                    from_triangles[v]
                ));
            }
            if incident_edge_weight[v] != 2 * w {
                violations.push(format!(
                    "vertex weight = half incident edge weight: vertex {v} stores {w}, incident edge weight {}",
                    incident_edge_weight[v]
                ));
            }
        }

        // token arrays carry exactly the stored weights
        if self.edge_tokens.len() as u64 != edge_total {
            violations.push(format!(
                "edge token count: {} tokens, stored weight {edge_total}",
                self.edge_tokens.len()
            ));
        }
        if self.triangle_tokens.len() as u64 != triangle_total {
            violations.push(format!(
                "triangle token count: {} tokens, stored weight {triangle_total}",
                self.triangle_tokens.len()
            ));
        }
        let mut edge_token_counts: HashMap<EdgeKey, u64> =
            HashMap::with_capacity(self.edges.len());
        for &t in &self.edge_tokens {
            *edge_token_counts.entry(t).or_insert(0) += 1;
        }
        if edge_token_counts != self.edges {
            violations.push("edge token multiset differs from stored edge weights".into());
        }
        let mut triangle_token_counts: HashMap<TriangleKey, u64> =
            HashMap::with_capacity(self.triangles.len());
        for &t in &self.triangle_tokens {
            *triangle_token_counts.entry(t).or_insert(0) += 1;
        }
        if triangle_token_counts != self.triangles {
            violations.push("triangle token multiset differs from stored triangle weights".into());
        }

        violations
    }

    /// `vertices.csv`: `label,weight`.
    pub fn write_vertices_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "label,weight")?;
        for (v, w) in self.vertex_weights.iter().enumerate() {
            writeln!(out, "{v},{w}")?;
        }
        Ok(())
    }

    /// `edges.csv`: `u,v,weight`.
    pub fn write_edges_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "u,v,weight")?;
        for ((a, b), w) in self.edges_sorted() {
            writeln!(out, "{a},{b},{w}")?;
        }
        Ok(())
    }

    /// `triangles.csv`: `u,v,w,weight`.
    pub fn write_triangles_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "u,v,w,weight")?;
        for ((a, b, c), w) in self.triangles_sorted() {
            writeln!(out, "{a},{b},{c},{w}")?;
        }
        Ok(())
    }
}

/// Counts of vertices per weight: `counts[w]` is the number of vertices of
/// weight `w` after `n` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightHistogram {
    counts: BTreeMap<u64, u64>,
    v_count: u64,
}

impl WeightHistogram {
    pub fn count(&self, w: u64) -> u64 {
        self.counts.get(&w).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn v_count(&self) -> u64 {
        self.v_count
    }

    /// `sum_w w * count(w)`; equals `3(n + 1)` for a consistent state.
    pub fn weighted_total(&self) -> u64 {
        self.counts.iter().map(|(&w, &c)| w * c).sum()
    }

    /// Empirical ratio `count(w) / V`.
    pub fn ratio(&self, w: u64) -> f64 {
        self.count(w) as f64 / self.v_count as f64
    }

    pub(crate) fn from_counts(counts: BTreeMap<u64, u64>) -> Self {
        let v_count = counts.values().sum();
        WeightHistogram { counts, v_count }
    }
}
