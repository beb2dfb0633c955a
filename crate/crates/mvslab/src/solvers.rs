//! Sparse SPD solvers: diagonally preconditioned conjugate gradients for
//! the unconstrained Dirichlet problems, and projected SOR for the bound-
//! constrained quadratic programs coming from the obstacle problems.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, norm_inf, SparseMatrix};

pub const DEFAULT_OMEGA: f64 = 1.5;
pub const DEFAULT_TOL: f64 = 1e-10;

/// Box constraint on the minimizer of ½wᵀAw - bᵀw.
#[derive(Debug, Clone)]
pub enum Bound {
    /// w ≤ ψ componentwise.
    Upper(Vec<f64>),
    /// w ≥ φ componentwise.
    Lower(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub constraint: Option<Bound>,
}

impl SparseSystem {
    pub fn unconstrained(matrix: SparseMatrix, rhs: Vec<f64>) -> Self {
        SparseSystem { matrix, rhs, constraint: None }
    }

    pub fn with_bound(matrix: SparseMatrix, rhs: Vec<f64>, bound: Bound) -> Self {
        let len = match &bound {
            Bound::Upper(v) | Bound::Lower(v) => v.len(),
        };
        assert_eq!(len, rhs.len(), "constraint length mismatch");
        SparseSystem { matrix, rhs, constraint: Some(bound) }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub complementarity_violation: f64,
    pub wall_time: f64,
}

/// Conjugate gradients with Jacobi preconditioning.
/// Returns x with ‖Ax - b‖₂ ≤ tol·‖b‖₂, or a convergence error carrying
/// the best iterate after 10·dim iterations.
pub fn cg_solve(sys: &SparseSystem, tol: f64) -> Result<Vec<f64>> {
    assert!(sys.constraint.is_none(), "cg_solve takes unconstrained systems");
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Parameter("cg tolerance must lie in (0,1)".into()));
    }
    let a = &sys.matrix;
    let b = &sys.rhs;
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let cap = 10 * n;
    let mut ap = vec![0.0; n];
    for it in 0..cap {
        a.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        let _ = it;
    }
    Err(Error::Convergence { iterations: cap, residual: norm2(&r) / bnorm })
}

/// Options for the PSOR sweep loop.
#[derive(Debug, Clone)]
pub struct PsorOptions {
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub warm_start: Option<Vec<f64>>,
    /// When set, the quadratic energy ½wᵀAw - bᵀw is recorded after every
    /// sweep (one extra matvec per sweep).
    pub track_energy: bool,
}

impl Default for PsorOptions {
    fn default() -> Self {
        PsorOptions {
            omega: DEFAULT_OMEGA,
            tol: DEFAULT_TOL,
            max_sweeps: 200_000,
            warm_start: None,
            track_energy: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsorOutput {
    pub solution: Vec<f64>,
    pub report: SolveReport,
    pub energy_trace: Vec<f64>,
}

/// Projected SOR for min ½wᵀAw - bᵀw subject to the box constraint.
///
/// For an upper bound ψ the sweep is
///   w_i ← min(ψ_i, w_i + ω (b_i - (Aw)_i) / A_ii),
/// in ascending vertex order, until the complementarity measure
///   max_i |min(ψ_i - w_i, (b_i - (Aw)_i) / A_ii)|
/// drops below tol·scale with scale = max|b| / min diag(A). Both arms of
/// the min carry solution units (the residual is diagonally scaled), so
/// the measure and threshold are invariant under rescaling A and b
/// together. The lower bound case mirrors this with max(φ_i, ·) and
/// min(w_i - φ_i, ((Aw)_i - b_i) / A_ii).
pub fn psor_lcp(sys: &SparseSystem, opts: &PsorOptions) -> Result<PsorOutput> {
    let bound = sys
        .constraint
        .as_ref()
        .expect("psor_lcp requires a bound constraint");
    if !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(Error::Parameter("relaxation factor must lie in (0,2)".into()));
    }
    let a = &sys.matrix;
    let b = &sys.rhs;
    let n = a.dim();
    let diag = a.diagonal();
    let min_diag = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_diag > 0.0) {
        return Err(Error::Parameter("matrix diagonal must be strictly positive".into()));
    }
    let scale = (norm_inf(b) / min_diag).max(f64::MIN_POSITIVE);
    let threshold = opts.tol * scale;

    let mut w = match &opts.warm_start {
        Some(w0) => {
            assert_eq!(w0.len(), n);
            let mut w = w0.clone();
            project(&mut w, bound);
            w
        }
        None => {
            let mut w = vec![0.0; n];
            project(&mut w, bound);
            w
        }
    };

    let start = std::time::Instant::now();
    let mut energy_trace = Vec::new();
    if opts.track_energy {
        energy_trace.push(energy(a, b, &w));
    }
    let mut sweeps = 0;
    let (mut comp, mut resid);
    loop {
        for i in 0..n {
            let sigma = a.row_dot_skip(i, &w, i);
            let target = w[i] + opts.omega * ((b[i] - sigma) / diag[i] - w[i]);
            w[i] = match bound {
                Bound::Upper(psi) => target.min(psi[i]),
                Bound::Lower(phi) => target.max(phi[i]),
            };
        }
        sweeps += 1;
        if opts.track_energy {
            energy_trace.push(energy(a, b, &w));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("NaN during PSOR sweep".into()));
        }
        let (c, r) = complementarity(a, b, &w, bound);
        comp = c;
        resid = r;
        if comp <= threshold {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(Error::Convergence { iterations: sweeps, residual: comp });
        }
    }
    let report = SolveReport {
        iterations: sweeps,
        final_residual: resid,
        complementarity_violation: comp,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(PsorOutput { solution: w, report, energy_trace })
}

fn project(w: &mut [f64], bound: &Bound) {
    match bound {
        Bound::Upper(psi) => {
            for (wi, &pi) in w.iter_mut().zip(psi) {
                *wi = wi.min(pi);
            }
        }
        Bound::Lower(phi) => {
            for (wi, &pi) in w.iter_mut().zip(phi) {
                *wi = wi.max(pi);
            }
        }
    }
}

pub fn energy(a: &SparseMatrix, b: &[f64], w: &[f64]) -> f64 {
    0.5 * dot(w, &a.apply(w)) - dot(b, w)
}

/// (complementarity measure, max-norm residual on the inactive set)
fn complementarity(a: &SparseMatrix, b: &[f64], w: &[f64], bound: &Bound) -> (f64, f64) {
    let aw = a.apply(w);
    let mut comp = 0.0f64;
    let mut resid = 0.0f64;
    let diag = a.diagonal();
    for i in 0..w.len() {
        let (slack, g) = match bound {
            Bound::Upper(psi) => (psi[i] - w[i], (b[i] - aw[i]) / diag[i]),
            Bound::Lower(phi) => (w[i] - phi[i], (aw[i] - b[i]) / diag[i]),
        };
        comp = comp.max(slack.min(g).abs());
        if slack > g.abs() {
            // clearly inactive: the equation should hold here
            resid = resid.max((b[i] - aw[i]).abs());
        }
    }
    (comp, resid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> SparseMatrix {
        SparseMatrix::from_triplets(
            2,
            &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
        )
    }

    #[test]
    fn cg_identity_in_one_iteration() {
        let a = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let b = vec![1.0, -2.0, 3.0];
        let x = cg_solve(&SparseSystem::unconstrained(a, b.clone()), 1e-12).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_hand_elimination() {
        let x = cg_solve(
            &SparseSystem::unconstrained(two_by_two(), vec![1.0, 1.0]),
            1e-12,
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10);
        assert!((x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cg_path_laplacian_parabola() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0 -> u = x(1-x)/2; Dirichlet ends
        // eliminated. The discrete solution is nodally exact.
        let n = 64usize;
        let dx = 1.0 / n as f64;
        let mut trips = Vec::new();
        for i in 0..n - 1 {
            trips.push((i, i, 2.0 / dx));
            if i > 0 {
                trips.push((i, i - 1, -1.0 / dx));
                trips.push((i - 1, i, -1.0 / dx));
            }
        }
        let a = SparseMatrix::from_triplets(n - 1, &trips);
        let b = vec![dx; n - 1];
        let x = cg_solve(&SparseSystem::unconstrained(a, b), 1e-13).unwrap();
        for i in 0..n - 1 {
            let xi = (i + 1) as f64 * dx;
            assert!((x[i] - xi * (1.0 - xi) / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_rejects_bad_tol() {
        assert!(cg_solve(&SparseSystem::unconstrained(two_by_two(), vec![1.0, 1.0]), 0.0).is_err());
    }

    #[test]
    fn psor_inactive_constraint_matches_unconstrained() {
        let sys = SparseSystem::with_bound(
            two_by_two(),
            vec![1.0, 1.0],
            Bound::Upper(vec![f64::INFINITY, f64::INFINITY]),
        );
        let out = psor_lcp(&sys, &PsorOptions::default()).unwrap();
        assert!((out.solution[0] - 1.0).abs() < 1e-9);
        assert!((out.solution[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn psor_active_constraint_brute_force_kkt() {
        // brute force over both active sets gives w = (0.4, 0.7)
        let sys = SparseSystem::with_bound(
            two_by_two(),
            vec![1.0, 1.0],
            Bound::Upper(vec![0.4, 10.0]),
        );
        let out = psor_lcp(&sys, &PsorOptions::default()).unwrap();
        assert!((out.solution[0] - 0.4).abs() < 1e-9, "{:?}", out.solution);
        assert!((out.solution[1] - 0.7).abs() < 1e-9, "{:?}", out.solution);
        // KKT: at the active index the gradient pushes up (b - Aw >= 0)
        let aw = sys.matrix.apply(&out.solution);
        assert!(1.0 - aw[0] >= -1e-9);
        assert!((1.0 - aw[1]).abs() < 1e-9);
    }

    #[test]
    fn psor_nonpositive_load_stays_at_zero_bound() {
        let sys = SparseSystem::with_bound(
            two_by_two(),
            vec![-1.0, -0.5],
            Bound::Lower(vec![0.0, 0.0]),
        );
        let out = psor_lcp(&sys, &PsorOptions::default()).unwrap();
        assert_eq!(out.solution, vec![0.0, 0.0]);
    }

    #[test]
    fn psor_omega_independence() {
        let sys = SparseSystem::with_bound(
            two_by_two(),
            vec![1.0, 1.0],
            Bound::Upper(vec![0.4, 10.0]),
        );
        let o1 = psor_lcp(&sys, &PsorOptions { omega: 1.1, ..Default::default() }).unwrap();
        let o2 = psor_lcp(&sys, &PsorOptions { omega: 1.8, ..Default::default() }).unwrap();
        for (a, b) in o1.solution.iter().zip(&o2.solution) {
            assert!((a - b).abs() <= 10.0 * DEFAULT_TOL);
        }
    }

    #[test]
    fn psor_energy_monotone() {
        let sys = SparseSystem::with_bound(
            two_by_two(),
            vec![2.0, -1.0],
            Bound::Upper(vec![0.9, 0.9]),
        );
        let out = psor_lcp(
            &sys,
            &PsorOptions { track_energy: true, omega: 1.0, ..Default::default() },
        )
        .unwrap();
        for pair in out.energy_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-14);
        }
    }

    #[test]
    fn psor_lower_bound_mirror() {
        // min ½wᵀAw - bᵀw with w >= 0 and negative load pins w at 0
        let sys = SparseSystem::with_bound(
            two_by_two(),
            vec![-1.0, 3.0],
            Bound::Lower(vec![0.0, 0.0]),
        );
        let out = psor_lcp(&sys, &PsorOptions::default()).unwrap();
        assert!(out.solution[0] >= 0.0);
        assert!(out.solution[1] > 0.0);
        // complementarity: (Aw - b) >= 0 where w = 0
        let aw = sys.matrix.apply(&out.solution);
        assert!(aw[0] - (-1.0) >= -1e-9);
        assert!((aw[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn psor_rejects_bad_omega() {
        let sys = SparseSystem::with_bound(
            two_by_two(),
            vec![1.0, 1.0],
            Bound::Upper(vec![1.0, 1.0]),
        );
        assert!(psor_lcp(&sys, &PsorOptions { omega: 2.5, ..Default::default() }).is_err());
    }
}
