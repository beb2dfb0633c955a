//! Mean value sets D_{x0}(r): extraction from membrane solutions, radius
//! sweeps with nestedness and monotone-average verification, ambient
//! invariance and monotonicity, the maximal-radius search, and the
//! boundedness probe on the hyperbolic plane.
//!
//! The defining identity: integrating the membrane equation over the
//! noncontact set (where ∇(G-w) vanishes on its boundary) forces
//! |D_{x0}(r)| = r^n independent of the metric.

use crate::error::{Error, Result};
use crate::green::{green_function, GreenField};
use crate::manifold::{ChartManifold, Shape};
use crate::obstacle::{contact_tau, solve_membrane, MembraneSolution};
use crate::operators::{assemble_operators, discrete_laplacian, OperatorBundle};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct MeanValueSet {
    /// Member vertices, ascending.
    pub member_vertices: Vec<usize>,
    pub x0: usize,
    pub r_param: f64,
    /// Mass-weighted volume of the member set. Layer-quantized: the
    /// discrete free boundary snaps to mesh vertices, so this carries an
    /// O(h·perimeter) bias.
    pub volume: f64,
    /// Member mass plus a sub-cell strip correction along the free
    /// boundary. Near the detachment point the gap v = G - w vanishes
    /// quadratically with Δ_g v = r^{-n}, so √v is linear in the normal
    /// distance and each rim vertex localizes the interface at
    /// δ = r·√(2v) beyond itself; the strip between the counted cells
    /// and that interface is added back.
    pub volume_refined: f64,
    pub touches_boundary: bool,
}

impl MeanValueSet {
    pub fn member_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &v in &self.member_vertices {
            mask[v] = true;
        }
        mask
    }
}

/// Extract the noncontact set {G - w > τ} of a membrane solution.
pub fn extract_mvs(
    m: &ChartManifold,
    ops: &OperatorBundle,
    sol: &MembraneSolution,
) -> Result<MeanValueSet> {
    let tau = contact_tau(m, &sol.green_ref);
    let member_vertices: Vec<usize> = (0..m.num_vertices())
        .filter(|&v| sol.green_ref.values[v] - sol.values[v] > tau)
        .collect();
    if member_vertices.is_empty() {
        return Err(Error::Extraction(format!(
            "empty mean value set at r = {}",
            sol.r_param
        )));
    }
    let volume: f64 = member_vertices.iter().map(|&v| ops.lumped_mass[v]).sum();
    let adj = m.vertex_adjacency();
    let mut mask = vec![false; m.num_vertices()];
    for &v in &member_vertices {
        mask[v] = true;
    }
    let touches_boundary = member_vertices.iter().any(|&v| {
        m.boundary_flags[v] || adj[v].iter().any(|&u| m.boundary_flags[u])
    });
    let strip = rim_strip_correction(m, ops, sol, &mask, &adj);
    Ok(MeanValueSet {
        member_vertices,
        x0: sol.green_ref.pole,
        r_param: sol.r_param,
        volume,
        volume_refined: volume + strip,
        touches_boundary,
    })
}

/// Sub-cell free-boundary strip: for every member vertex on the rim,
/// extrapolate the detachment interface from the gap field (√v is linear
/// in the normal distance with slope 1/(r√2)) and add the mass of the
/// strip between the vertex cell and the interface. The estimate from
/// one layer further in is preferred when larger, because the gap right
/// at the rim sits near the solver's truncation floor.
fn rim_strip_correction(
    m: &ChartManifold,
    ops: &OperatorBundle,
    sol: &MembraneSolution,
    mask: &[bool],
    adj: &[Vec<usize>],
) -> f64 {
    let x0 = sol.green_ref.pole;
    let mut corr = 0.0;
    for v in 0..m.num_vertices() {
        if !mask[v] {
            continue;
        }
        let outside: Vec<usize> = adj[v]
            .iter()
            .copied()
            .filter(|&u| !mask[u] && !m.boundary_flags[u])
            .collect();
        if outside.is_empty() {
            continue;
        }
        let rho_v = m.geodesic_distance(x0, v);
        // normal cell spacing: mean outward distance increment
        let e = outside
            .iter()
            .map(|&u| m.geodesic_distance(x0, u) - rho_v)
            .sum::<f64>()
            / outside.len() as f64;
        if !(e > 0.0) {
            continue;
        }
        let delta = interface_reach(m, sol, adj, mask, v);
        corr += ops.lumped_mass[v] * (delta / e - 0.5).clamp(-0.5, 1.5);
    }
    corr
}

/// Sub-cell interface reach of a member vertex: how far beyond itself
/// the detachment interface lies, extrapolated from the gap field
/// (√v is linear in the normal distance with slope 1/(r√2); estimates
/// from one layer in are preferred when larger because the rim gap sits
/// near the solver's truncation floor).
fn interface_reach(
    m: &ChartManifold,
    sol: &MembraneSolution,
    adj: &[Vec<usize>],
    mask: &[bool],
    v: usize,
) -> f64 {
    let x0 = sol.green_ref.pole;
    let r = sol.r_param;
    let gap = |u: usize| sol.green_ref.values[u] - sol.values[u];
    let rho_v = m.geodesic_distance(x0, v);
    let mut delta = r * (2.0 * gap(v).max(0.0)).sqrt();
    for &k in &adj[v] {
        if mask[k] {
            let reach =
                r * (2.0 * gap(k).max(0.0)).sqrt() - (rho_v - m.geodesic_distance(x0, k));
            delta = delta.max(reach);
        }
    }
    delta
}

/// Geodesic circumradius of the set about x0 with the free boundary
/// localized below the mesh scale: max over rim members of their
/// distance from x0 plus the extrapolated interface reach. The raw
/// vertex maximum is quantized by whole mesh layers, which drowns the
/// slow circumradius growth probed on the hyperbolic plane.
pub fn refined_circumradius(
    m: &ChartManifold,
    sol: &MembraneSolution,
    d: &MeanValueSet,
) -> f64 {
    let adj = m.vertex_adjacency();
    let mask = d.member_mask(m.num_vertices());
    let mut circ = 0.0f64;
    for &v in &d.member_vertices {
        let rho = m.geodesic_distance(d.x0, v);
        if adj[v].iter().any(|&u| !mask[u]) {
            circ = circ.max(rho + interface_reach(m, sol, &adj, &mask, v));
        } else {
            circ = circ.max(rho);
        }
    }
    circ
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub radii: Vec<f64>,
    pub sets: Vec<MeanValueSet>,
    pub solutions: Vec<MembraneSolution>,
    pub nestedness_pass: bool,
    /// Vertices violating member+1-ring containment, per radius pair.
    pub nestedness_witnesses: Vec<usize>,
    pub volume_monotone: bool,
}

/// Solve membranes for increasing radii against one shared Green's
/// function. `parallel` solves radii concurrently; the sequential path
/// chains warm starts instead.
pub fn mvs_sweep(
    m: &ChartManifold,
    ops: &OperatorBundle,
    g: &GreenField,
    r_list: &[f64],
    parallel: bool,
) -> Result<SweepReport> {
    if r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("sweep radii must be strictly increasing".into()));
    }
    let solutions: Vec<MembraneSolution> = if parallel {
        let results: Vec<Result<MembraneSolution>> = r_list
            .par_iter()
            .map(|&r| solve_membrane(m, ops, g, r, None))
            .collect();
        results.into_iter().collect::<Result<Vec<_>>>()?
    } else {
        let mut sols = Vec::with_capacity(r_list.len());
        let mut prev: Option<MembraneSolution> = None;
        for &r in r_list {
            let sol = solve_membrane(m, ops, g, r, prev.as_ref())?;
            prev = Some(sol.clone());
            sols.push(sol);
        }
        sols
    };
    let sets: Vec<MeanValueSet> =
        solutions.iter().map(|s| extract_mvs(m, ops, s)).collect::<Result<Vec<_>>>()?;

    let adj = m.vertex_adjacency();
    let mut witnesses = Vec::new();
    for k in 0..sets.len().saturating_sub(1) {
        let larger = sets[k + 1].member_mask(m.num_vertices());
        for &v in &sets[k].member_vertices {
            if !larger[v] {
                witnesses.push(v);
                continue;
            }
            for &u in &adj[v] {
                if !larger[u] && !m.boundary_flags[u] {
                    witnesses.push(u);
                }
            }
        }
    }
    witnesses.sort_unstable();
    witnesses.dedup();
    let volume_monotone = sets.windows(2).all(|p| p[1].volume >= p[0].volume);
    Ok(SweepReport {
        radii: r_list.to_vec(),
        sets,
        solutions,
        nestedness_pass: witnesses.is_empty(),
        nestedness_witnesses: witnesses,
        volume_monotone,
    })
}

/// Unweighted (mass-integrated) average of u over a mean value set.
pub fn mean_value_average(u: &[f64], d: &MeanValueSet, ops: &OperatorBundle) -> f64 {
    let sum: f64 = d.member_vertices.iter().map(|&v| ops.lumped_mass[v] * u[v]).sum();
    sum / d.volume
}

#[derive(Debug, Clone)]
pub struct MvtVerdict {
    /// Average of u over D(r), by radius.
    pub averages: Vec<f64>,
    /// max distance from x0 to the boundary layer of D(r), by radius.
    pub boundary_reach: Vec<f64>,
    /// Monotone nondecreasing averages (subharmonic) or flat within the
    /// spread tolerance (harmonic).
    pub monotone_pass: bool,
    /// |average at smallest r - u(x0)|.
    pub limit_error: f64,
    pub spread: f64,
}

/// Verify the mean value properties for a (sub)harmonic u
/// over a sweep. `mono_tol` absorbs quadrature error in the discrete
/// averages; `residual_tol` guards the (sub)harmonicity precondition.
pub fn mvt_verify(
    m: &ChartManifold,
    ops: &OperatorBundle,
    u: &[f64],
    sweep: &SweepReport,
    x0: usize,
    subharmonic: bool,
    residual_tol: f64,
    mono_tol: f64,
) -> Result<MvtVerdict> {
    // precondition: u is discrete-(sub)harmonic on the union of the sets
    let lap = discrete_laplacian(ops, u);
    let members_all = sweep.sets.last().unwrap().member_mask(m.num_vertices());
    for v in 0..m.num_vertices() {
        if !members_all[v] || m.boundary_flags[v] {
            continue;
        }
        let bad = if subharmonic { lap[v] < -residual_tol } else { lap[v].abs() > residual_tol };
        if bad {
            return Err(Error::Parameter(format!(
                "u is not discrete-{}harmonic: residual {} at vertex {v}",
                if subharmonic { "sub" } else { "" },
                lap[v]
            )));
        }
    }
    let averages: Vec<f64> =
        sweep.sets.iter().map(|d| mean_value_average(u, d, ops)).collect();
    // (B): distance from x0 to the set's boundary layer shrinks with r
    let adj = m.vertex_adjacency();
    let boundary_reach: Vec<f64> = sweep
        .sets
        .iter()
        .map(|d| {
            let mask = d.member_mask(m.num_vertices());
            (0..m.num_vertices())
                .filter(|&v| mask[v] && adj[v].iter().any(|&u2| !mask[u2]))
                .map(|v| m.geodesic_distance(x0, v))
                .fold(0.0f64, f64::max)
        })
        .collect();
    let monotone_pass = if subharmonic {
        averages.windows(2).all(|p| p[1] >= p[0] - mono_tol)
    } else {
        let lo = averages.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = averages.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo <= mono_tol
    };
    let limit_error = (averages[0] - u[x0]).abs();
    let lo = averages.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = averages.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(MvtVerdict { averages, boundary_reach, monotone_pass, limit_error, spread: hi - lo })
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub sym_diff_volume: f64,
    pub layer_tolerance: f64,
    pub pass: bool,
}

/// Compare mean value sets built on two different ambients for the same
/// base point and radius. Vertices are matched across the meshes by
/// chart position relative to x0; the symmetric difference is the mass
/// of vertices whose nearest counterpart disagrees on membership.
pub fn domain_invariance(
    m1: &ChartManifold,
    ops1: &OperatorBundle,
    d1: &MeanValueSet,
    m2: &ChartManifold,
    ops2: &OperatorBundle,
    d2: &MeanValueSet,
    layer_tolerance: f64,
) -> Result<InvarianceReport> {
    if d1.touches_boundary || d2.touches_boundary {
        return Err(Error::Parameter(
            "domain invariance requires compactly contained sets; see domain_monotonicity".into(),
        ));
    }
    let x1 = m1.vertices[d1.x0];
    let x2 = m2.vertices[d2.x0];
    let mask1 = d1.member_mask(m1.num_vertices());
    let mask2 = d2.member_mask(m2.num_vertices());
    let mut sym_diff = 0.0;
    for &v in &d1.member_vertices {
        let p = m1.vertices[v];
        let q = [p[0] - x1[0] + x2[0], p[1] - x1[1] + x2[1]];
        if !mask2[m2.nearest_vertex(q)] {
            sym_diff += ops1.lumped_mass[v];
        }
    }
    for &v in &d2.member_vertices {
        let p = m2.vertices[v];
        let q = [p[0] - x2[0] + x1[0], p[1] - x2[1] + x1[1]];
        if !mask1[m1.nearest_vertex(q)] {
            sym_diff += ops2.lumped_mass[v];
        }
    }
    Ok(InvarianceReport {
        sym_diff_volume: sym_diff,
        layer_tolerance,
        pass: sym_diff <= layer_tolerance,
    })
}

#[derive(Debug, Clone)]
pub struct InclusionReport {
    /// Members of the smaller-ambient set with no counterpart in the
    /// larger-ambient set within one mesh layer.
    pub violations: Vec<usize>,
    pub strict: bool,
    pub pass: bool,
}

/// D(r; n1) ⊂ D(r; n2) for nested ambients, up to one mesh layer.
/// Vertices are matched by chart coordinates (nested built-ins share
/// their inner rings exactly).
pub fn domain_monotonicity(
    m1: &ChartManifold,
    d1: &MeanValueSet,
    m2: &ChartManifold,
    d2: &MeanValueSet,
    coord_eps: f64,
) -> Result<InclusionReport> {
    let mask2 = d2.member_mask(m2.num_vertices());
    let adj2 = m2.vertex_adjacency();
    let mut violations = Vec::new();
    for &v in &d1.member_vertices {
        let u = m2.nearest_vertex(m1.vertices[v]);
        let dv = m1.vertices[v];
        let du = m2.vertices[u];
        if ((dv[0] - du[0]).powi(2) + (dv[1] - du[1]).powi(2)).sqrt() > coord_eps {
            return Err(Error::Parameter(format!(
                "vertex {v} of the smaller ambient has no counterpart in the larger one"
            )));
        }
        if !mask2[u] && !adj2[u].iter().any(|&w| mask2[w]) {
            violations.push(v);
        }
    }
    let strict = d2.member_vertices.len() > d1.member_vertices.len();
    Ok(InclusionReport { violations: violations.clone(), strict, pass: violations.is_empty() })
}

/// Sub-cell boundary contact: the set touches the ambient boundary when
/// some rim member's extrapolated interface reach extends at least as far
/// as its geodesic distance to the boundary. Vertex adjacency alone flags
/// contact a full mesh layer early, which biases the maximal radius low
/// by more than the bisection tolerance.
fn reaches_boundary(m: &ChartManifold, sol: &MembraneSolution, d: &MeanValueSet) -> bool {
    let mask = d.member_mask(m.num_vertices());
    let adj = m.vertex_adjacency();
    let boundary: Vec<usize> =
        (0..m.num_vertices()).filter(|&v| m.boundary_flags[v]).collect();
    d.member_vertices
        .iter()
        .filter(|&&v| adj[v].iter().any(|&u| !mask[u]))
        .any(|&v| {
            let reach = interface_reach(m, sol, &adj, &mask, v);
            let dist = boundary
                .iter()
                .map(|&b| m.geodesic_distance(v, b))
                .fold(f64::INFINITY, f64::min);
            reach >= dist
        })
}

#[derive(Debug, Clone)]
pub struct R0Estimate {
    pub r_in: f64,
    pub r_out: f64,
    /// Min geodesic distance from the boundary layer of D(r_in) to the
    /// ambient boundary.
    pub boundary_gap: f64,
    /// True when no touching radius was found below the cap.
    pub hit_cap: bool,
}

/// Bisect on r between a compactly-contained radius and a boundary-
/// touching radius. Monotonicity of the membrane family in r makes the
/// touching indicator monotone, so bisection is justified.
pub fn r0_search(
    m: &ChartManifold,
    ops: &OperatorBundle,
    g: &GreenField,
    tolerance: f64,
    r_cap: f64,
) -> Result<R0Estimate> {
    if !m.boundary_flags.iter().any(|&f| f) {
        return Err(Error::Parameter("r0 search needs an ambient with boundary".into()));
    }
    let touches = |r: f64, warm: Option<&MembraneSolution>| -> Result<(bool, MembraneSolution)> {
        let sol = solve_membrane(m, ops, g, r, warm)?;
        match extract_mvs(m, ops, &sol) {
            Ok(d) => Ok((reaches_boundary(m, &sol, &d), sol)),
            // collapsed set at a tiny radius: certainly not touching
            Err(Error::Extraction(_)) => Ok((false, sol)),
            Err(e) => Err(e),
        }
    };
    // establish a bracket by doubling
    let mut r_in = tolerance.max(1e-3);
    let (t0, mut warm) = touches(r_in, None)?;
    if t0 {
        return Err(Error::Parameter(
            "initial radius already touches the boundary; decrease the tolerance".into(),
        ));
    }
    let mut r_out = r_in;
    loop {
        let cand = (r_out * 2.0).min(r_cap);
        let (t, sol) = touches(cand, Some(&warm))?;
        warm = sol;
        if t {
            r_out = cand;
            break;
        }
        r_in = cand;
        r_out = cand;
        if cand >= r_cap {
            let d = extract_mvs(m, ops, &warm)?;
            let gap = boundary_gap(m, &d);
            return Ok(R0Estimate { r_in, r_out: r_cap, boundary_gap: gap, hit_cap: true });
        }
    }
    while r_out - r_in > tolerance {
        let mid = 0.5 * (r_in + r_out);
        let (t, sol) = touches(mid, Some(&warm))?;
        warm = sol;
        if t {
            r_out = mid;
        } else {
            r_in = mid;
        }
    }
    let (_, sol_in) = touches(r_in, Some(&warm))?;
    let d_in = extract_mvs(m, ops, &sol_in)?;
    let gap = boundary_gap(m, &d_in);
    Ok(R0Estimate { r_in, r_out, boundary_gap: gap, hit_cap: false })
}

fn boundary_gap(m: &ChartManifold, d: &MeanValueSet) -> f64 {
    let mask = d.member_mask(m.num_vertices());
    let adj = m.vertex_adjacency();
    let rim: Vec<usize> = (0..m.num_vertices())
        .filter(|&v| mask[v] && adj[v].iter().any(|&u| !mask[u]))
        .collect();
    let boundary: Vec<usize> =
        (0..m.num_vertices()).filter(|&v| m.boundary_flags[v]).collect();
    let mut gap = f64::INFINITY;
    for &v in &rim {
        for &b in &boundary {
            gap = gap.min(m.geodesic_distance(v, b));
        }
    }
    gap
}

#[derive(Debug, Clone)]
pub struct BoundednessRow {
    pub r: f64,
    /// Geodesic circumradius of the stabilized set about x0.
    pub circumradius: f64,
    pub volume: f64,
    pub stabilized: bool,
    /// Ambient geodesic radius at which the set stabilized.
    pub ambient_rho: f64,
}

/// Boundedness probe on the hyperbolic plane: grow the ambient geodesic
/// disk until D(r) stops changing, then record its circumradius. The
/// exponential volume growth should make the circumradius sublinear in r.
pub fn nonparabolic_boundedness_probe(
    h: f64,
    r_list: &[f64],
    ambient_start: f64,
    ambient_step: f64,
    ambient_cap: f64,
) -> Result<Vec<BoundednessRow>> {
    let mut rows = Vec::new();
    for &r in r_list {
        let mut rho = ambient_start;
        let mut prev: Option<(ChartManifold, MeanValueSet)> = None;
        let mut stabilized = false;
        let mut latest: Option<(ChartManifold, MembraneSolution, MeanValueSet)> = None;
        while rho <= ambient_cap + 1e-12 {
            let m = crate::manifold::build_builtin(Shape::HyperbolicDisk { rho }, h)?;
            let ops = assemble_operators(&m)?;
            let x0 = m.nearest_vertex([0.0, 0.0]);
            let g = green_function(&ops, x0)?;
            let sol = solve_membrane(&m, &ops, &g, r, None)?;
            let d = extract_mvs(&m, &ops, &sol)?;
            if let Some((pm, pd)) = &prev {
                if !d.touches_boundary && sets_agree(pm, pd, &m, &d, h) {
                    stabilized = true;
                    latest = Some((m, sol, d));
                    break;
                }
            }
            prev = Some((m.clone(), d.clone()));
            latest = Some((m, sol, d));
            rho += ambient_step;
        }
        let (m, sol, d) = latest.expect("at least one ambient evaluated");
        let circumradius = refined_circumradius(&m, &sol, &d);
        rows.push(BoundednessRow {
            r,
            circumradius,
            volume: d.volume_refined,
            stabilized,
            ambient_rho: rho.min(ambient_cap),
        });
    }
    Ok(rows)
}

/// Two sets on different ambients agree when membership matches after
/// nearest-vertex transfer, up to a band of chart width 2h around each
/// set's rim.
fn sets_agree(
    m1: &ChartManifold,
    d1: &MeanValueSet,
    m2: &ChartManifold,
    d2: &MeanValueSet,
    h: f64,
) -> bool {
    let mask2 = d2.member_mask(m2.num_vertices());
    let rim_band = 2.0 * h;
    for &v in &d1.member_vertices {
        let p = m1.vertices[v];
        let u = m2.nearest_vertex(p);
        if !mask2[u] {
            let q = m2.vertices[u];
            let chart_gap = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            // tolerate disagreement only within the rim band
            let rim_dist = d2
                .member_vertices
                .iter()
                .map(|&w| {
                    let t = m2.vertices[w];
                    ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            if chart_gap + rim_dist > rim_band {
                return false;
            }
        }
    }
    true
}
