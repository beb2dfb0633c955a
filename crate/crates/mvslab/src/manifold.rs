//! Triangulated 2-D charts with conformal metrics.
//!
//! A `ChartManifold` is a planar triangle mesh together with a per-vertex
//! conformal factor λ: metric lengths are λ·(chart length) and metric areas
//! are λ²·(chart area). The built-in geometries put the base point at the
//! chart origin:
//!
//! * flat: λ ≡ 1;
//! * sphere-stereographic: λ(z) = 2/(1+|z|²), the unit sphere projected
//!   from the north pole, so the chart origin is the south-pole antipode
//!   of the projection point and geodesic radius d maps to chart radius
//!   tan(d/2);
//! * hyperbolic-poincare: λ(z) = 2/(1−|z|²) on |z| < 1, geodesic radius
//!   ρ maps to chart radius tanh(ρ/2).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryTag {
    Flat,
    SphereStereographic,
    HyperbolicPoincare,
    Custom,
}

/// Shape parameters accepted by `build_builtin`.
#[derive(Debug, Clone, Copy)]
pub enum Shape {
    /// Square [0, side]² in the flat chart.
    Square { side: f64 },
    /// Disk of chart radius `radius` about the origin (flat chart).
    Disk { radius: f64 },
    /// Geodesic cap of angle `angle` about the chart origin of the unit
    /// sphere. `angle` close to π gives the sphere minus a small cap.
    SphereCap { angle: f64 },
    /// Geodesic disk of radius `rho` about the origin of the hyperbolic
    /// plane (curvature -1), meshed in the Poincaré chart.
    HyperbolicDisk { rho: f64 },
}

#[derive(Debug, Clone)]
pub struct ChartManifold {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub conformal_factor: Vec<f64>,
    pub boundary_flags: Vec<bool>,
    pub geometry_tag: GeometryTag,
    /// Constant sectional curvature when known in closed form.
    pub curvature_data: Option<f64>,
    /// For submeshes produced by `restrict_submanifold`: index of each
    /// vertex in the parent mesh.
    pub parent_index: Option<Vec<usize>>,
}

impl ChartManifold {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn chart_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        triangle_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Metric area of a triangle: chart area times the mean of λ² over
    /// its corners.
    pub fn metric_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let l2 = (self.conformal_factor[a].powi(2)
            + self.conformal_factor[b].powi(2)
            + self.conformal_factor[c].powi(2))
            / 3.0;
        self.chart_area(t) * l2
    }

    pub fn total_metric_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.metric_area(t)).sum()
    }

    /// Vertex-to-vertex adjacency from triangle edges.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices()];
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if !adj[a].contains(&b) {
                    adj[a].push(b);
                }
                if !adj[b].contains(&a) {
                    adj[b].push(a);
                }
            }
        }
        adj
    }

    /// Index of the vertex nearest to `p` in chart coordinates.
    pub fn nearest_vertex(&self, p: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Geodesic distance between two vertices. Built-in tags use the
    /// closed-form chart distance; custom tags fall back to Dijkstra over
    /// the edge graph with metric edge lengths, which is an upper bound.
    pub fn geodesic_distance(&self, p: usize, x: usize) -> f64 {
        match self.geometry_tag {
            GeometryTag::Custom => self.dijkstra_distance(p, x),
            _ => chart_distance(self.geometry_tag, self.vertices[p], self.vertices[x]),
        }
    }

    /// Geodesic distance from vertex `p` to an arbitrary chart point.
    pub fn geodesic_distance_to_point(&self, p: usize, x: [f64; 2]) -> f64 {
        chart_distance(self.geometry_tag, self.vertices[p], x)
    }

    fn dijkstra_distance(&self, p: usize, x: usize) -> f64 {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let adj = self.vertex_adjacency();
        let mut dist = vec![f64::INFINITY; self.num_vertices()];
        dist[p] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((ordered(0.0), p)));
        while let Some(Reverse((d, v))) = heap.pop() {
            let d = d.0;
            if d > dist[v] {
                continue;
            }
            if v == x {
                return d;
            }
            for &u in &adj[v] {
                let lam = 0.5 * (self.conformal_factor[v] + self.conformal_factor[u]);
                let dv = self.vertices[v];
                let du = self.vertices[u];
                let edge = lam * ((dv[0] - du[0]).powi(2) + (dv[1] - du[1]).powi(2)).sqrt();
                if dist[v] + edge < dist[u] {
                    dist[u] = dist[v] + edge;
                    heap.push(Reverse((ordered(dist[u]), u)));
                }
            }
        }
        dist[x]
    }

    /// Induced submesh of all triangles whose vertices lie within the
    /// geodesic ball of `radius` about `center`. Boundary flags are
    /// recomputed from the submesh edge structure; vertices inherited
    /// from the ambient boundary stay boundary-flagged even inside the
    /// ball.
    pub fn restrict_submanifold(&self, center: usize, radius: f64) -> Result<ChartManifold> {
        if radius <= 0.0 {
            return Err(Error::Parameter("restriction radius must be positive".into()));
        }
        let inside: Vec<bool> = (0..self.num_vertices())
            .map(|v| self.geodesic_distance(center, v) < radius)
            .collect();
        let tris: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .copied()
            .filter(|t| t.iter().all(|&v| inside[v]))
            .collect();
        if tris.is_empty() {
            return Err(Error::Restriction("no triangle lies within the ball".into()));
        }
        let mut old_to_new = vec![usize::MAX; self.num_vertices()];
        let mut keep = Vec::new();
        for t in &tris {
            for &v in t {
                if old_to_new[v] == usize::MAX {
                    old_to_new[v] = keep.len();
                    keep.push(v);
                }
            }
        }
        let new_tris: Vec<[usize; 3]> =
            tris.iter().map(|t| [old_to_new[t[0]], old_to_new[t[1]], old_to_new[t[2]]]).collect();
        let vertices: Vec<[f64; 2]> = keep.iter().map(|&v| self.vertices[v]).collect();
        let conformal_factor: Vec<f64> = keep.iter().map(|&v| self.conformal_factor[v]).collect();
        let mut boundary_flags = boundary_from_edges(vertices.len(), &new_tris);
        for (new_v, &old_v) in keep.iter().enumerate() {
            if self.boundary_flags[old_v] {
                boundary_flags[new_v] = true;
            }
        }
        let parent_index = match &self.parent_index {
            Some(parent) => keep.iter().map(|&v| parent[v]).collect(),
            None => keep.clone(),
        };
        let sub = ChartManifold {
            vertices,
            triangles: new_tris,
            conformal_factor,
            boundary_flags,
            geometry_tag: self.geometry_tag,
            curvature_data: self.curvature_data,
            parent_index: Some(parent_index),
        };
        if !sub.is_connected() {
            return Err(Error::Restriction("restricted submesh is disconnected".into()));
        }
        Ok(sub)
    }

    pub fn is_connected(&self) -> bool {
        if self.num_vertices() == 0 {
            return false;
        }
        let adj = self.vertex_adjacency();
        let mut seen = vec![false; self.num_vertices()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.num_vertices()
    }

    /// Check the type invariants; used by the builders and by tests.
    pub fn validate(&self) -> Result<()> {
        for (t, _) in self.triangles.iter().enumerate() {
            if self.chart_area(t) <= 0.0 {
                return Err(Error::Assembly(format!("triangle {t} has nonpositive area")));
            }
        }
        if self.conformal_factor.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Assembly("conformal factor must be positive".into()));
        }
        Ok(())
    }
}

fn ordered(x: f64) -> OrderedF64 {
    OrderedF64(x)
}

#[derive(PartialEq, PartialOrd)]
struct OrderedF64(f64);
impl Eq for OrderedF64 {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap()
    }
}

pub fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Closed-form geodesic distance between chart points for built-in tags.
pub fn chart_distance(tag: GeometryTag, p: [f64; 2], x: [f64; 2]) -> f64 {
    match tag {
        GeometryTag::Flat | GeometryTag::Custom => {
            ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt()
        }
        GeometryTag::SphereStereographic => {
            let a = stereographic_inverse(p);
            let b = stereographic_inverse(x);
            let dot: f64 = a.iter().zip(&b).map(|(u, v)| u * v).sum();
            dot.clamp(-1.0, 1.0).acos()
        }
        GeometryTag::HyperbolicPoincare => {
            // Möbius displacement modulus |(p - x)/(1 - conj(p) x)|
            let num = complex_abs(sub(p, x));
            let den = complex_abs(sub([1.0, 0.0], complex_mul(conj(p), x)));
            2.0 * (num / den).atanh()
        }
    }
}

/// Chart point -> unit sphere point, origin mapping to the south pole.
pub fn stereographic_inverse(z: [f64; 2]) -> [f64; 3] {
    let r2 = z[0] * z[0] + z[1] * z[1];
    [2.0 * z[0] / (1.0 + r2), 2.0 * z[1] / (1.0 + r2), (r2 - 1.0) / (1.0 + r2)]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}
fn conj(a: [f64; 2]) -> [f64; 2] {
    [a[0], -a[1]]
}
fn complex_mul(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}
fn complex_abs(a: [f64; 2]) -> f64 {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

pub fn conformal_factor_at(tag: GeometryTag, z: [f64; 2]) -> f64 {
    let r2 = z[0] * z[0] + z[1] * z[1];
    match tag {
        GeometryTag::Flat | GeometryTag::Custom => 1.0,
        GeometryTag::SphereStereographic => 2.0 / (1.0 + r2),
        GeometryTag::HyperbolicPoincare => 2.0 / (1.0 - r2),
    }
}

fn boundary_from_edges(n: usize, tris: &[[usize; 3]]) -> Vec<bool> {
    use std::collections::HashMap;
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in tris {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            let key = (a.min(b), a.max(b));
            *edge_count.entry(key).or_insert(0) += 1;
        }
    }
    let mut flags = vec![false; n];
    for (&(a, b), &c) in &edge_count {
        if c == 1 {
            flags[a] = true;
            flags[b] = true;
        }
    }
    flags
}

/// Build one of the built-in chart manifolds.
///
/// `target_edge_length` is in chart units.
pub fn build_builtin(shape: Shape, target_edge_length: f64) -> Result<ChartManifold> {
    if !(target_edge_length > 0.0) {
        return Err(Error::Parameter("target edge length must be positive".into()));
    }
    let h = target_edge_length;
    match shape {
        Shape::Square { side } => {
            if !(side > 0.0) {
                return Err(Error::Parameter("square side must be positive".into()));
            }
            Ok(build_square(side, h))
        }
        Shape::Disk { radius } => {
            if !(radius > 0.0) {
                return Err(Error::Parameter("disk radius must be positive".into()));
            }
            build_polar_disk(GeometryTag::Flat, radius, h, Some(0.0))
        }
        Shape::SphereCap { angle } => {
            if !(angle > 0.0 && angle < std::f64::consts::PI) {
                return Err(Error::Parameter(
                    "cap angle must lie in (0, pi); the chart excludes the point at infinity".into(),
                ));
            }
            let chart_radius = (angle / 2.0).tan();
            build_polar_disk(GeometryTag::SphereStereographic, chart_radius, h, Some(1.0))
        }
        Shape::HyperbolicDisk { rho } => {
            if !(rho > 0.0) {
                return Err(Error::Parameter("hyperbolic radius must be positive".into()));
            }
            let chart_radius = (rho / 2.0).tanh();
            if chart_radius >= 1.0 {
                return Err(Error::Parameter("Poincaré chart radius must be < 1".into()));
            }
            build_polar_disk(GeometryTag::HyperbolicPoincare, chart_radius, h, Some(-1.0))
        }
    }
}

/// Regular grid on [0, side]², every cell split along the same diagonal
/// so that cotangent weights reduce to the 5-point stencil.
fn build_square(side: f64, h: f64) -> ChartManifold {
    let n = (side / h).round().max(1.0) as usize;
    let dx = side / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * dx, j as f64 * dx]);
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let boundary_flags = boundary_from_edges(vertices.len(), &triangles);
    let conformal_factor = vec![1.0; vertices.len()];
    ChartManifold {
        vertices,
        triangles,
        conformal_factor,
        boundary_flags,
        geometry_tag: GeometryTag::Flat,
        curvature_data: Some(0.0),
        parent_index: None,
    }
}

/// Concentric-ring disk mesh about the chart origin: ring k carries 6k
/// vertices, so the triangles stay near-equilateral. Meshes built with
/// the same edge length share their inner rings vertex-for-vertex, which
/// the domain monotonicity checks rely on.
fn build_polar_disk(
    tag: GeometryTag,
    chart_radius: f64,
    h: f64,
    curvature: Option<f64>,
) -> Result<ChartManifold> {
    let rings = (chart_radius / h).round().max(1.0) as usize;
    let dr = chart_radius / rings as f64;
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize; rings + 1];
    for k in 1..=rings {
        ring_start[k] = vertices.len();
        let m = 6 * k;
        let r = k as f64 * dr;
        for j in 0..m {
            let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut triangles = Vec::new();
    // center fan
    for j in 0..6usize.min(vertices.len() - 1) {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    // strips between ring k and ring k+1, advancing whichever side has
    // the smaller next angle
    for k in 1..rings {
        let (na, nb) = (6 * k, 6 * (k + 1));
        let (sa, sb) = (ring_start[k], ring_start[k + 1]);
        let ang = |n: usize, j: usize| 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let next_a = ang(na, i + 1);
            let next_b = ang(nb, j + 1);
            if j >= nb || (i < na && next_a <= next_b) {
                triangles.push([sa + i % na, sb + j % nb, sa + (i + 1) % na]);
                i += 1;
            } else {
                triangles.push([sa + i % na, sb + j % nb, sb + (j + 1) % nb]);
                j += 1;
            }
        }
    }
    // consistent CCW orientation
    for t in triangles.iter_mut() {
        if triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) < 0.0 {
            t.swap(1, 2);
        }
    }
    let conformal_factor: Vec<f64> =
        vertices.iter().map(|&v| conformal_factor_at(tag, v)).collect();
    let boundary_flags = boundary_from_edges(vertices.len(), &triangles);
    let m = ChartManifold {
        vertices,
        triangles,
        conformal_factor,
        boundary_flags,
        geometry_tag: tag,
        curvature_data: curvature,
        parent_index: None,
    };
    m.validate()?;
    Ok(m)
}

/// 1-D path mesh on [a, b]: stiffness and mass of -u'' with spacing dx.
/// Test fixture for the obstacle solvers; not part of the 2-D surface.
pub fn path_system(a: f64, b: f64, n: usize) -> (crate::sparse::SparseMatrix, Vec<f64>, Vec<f64>) {
    let dx = (b - a) / n as f64;
    let mut trips = Vec::new();
    for i in 0..=n {
        if i > 0 {
            trips.push((i, i - 1, -1.0 / dx));
            trips.push((i, i, 1.0 / dx));
        }
        if i < n {
            trips.push((i, i + 1, -1.0 / dx));
            trips.push((i, i, 1.0 / dx));
        }
    }
    let stiffness = crate::sparse::SparseMatrix::from_triplets(n + 1, &trips);
    let mass: Vec<f64> =
        (0..=n).map(|i| if i == 0 || i == n { dx / 2.0 } else { dx }).collect();
    let coords: Vec<f64> = (0..=n).map(|i| a + i as f64 * dx).collect();
    (stiffness, mass, coords)
}
