//! Randomized property tests for the solver and geometry layers.

use mvslab::manifold::{chart_distance, path_system, GeometryTag};
use mvslab::solvers::{psor_lcp, Bound, PsorOptions, SparseSystem};
use proptest::prelude::*;

/// Random 1-D lower-obstacle problems: whatever the load and boundary
/// data, the PSOR solution must satisfy the complementarity system
/// w >= 0, Aw - b >= 0, w (Aw - b) = 0 up to the stopping tolerance.
fn one_d_lcp(n: usize, load: &[f64], h_left: f64, h_right: f64) -> (Vec<f64>, Vec<f64>) {
    let (a, mass, _coords) = path_system(-1.0, 1.0, n);
    let ni = n - 1;
    let mut trips = Vec::new();
    for i in 1..n {
        for (c, v) in a.row(i) {
            if c >= 1 && c < n {
                trips.push((i - 1, c - 1, v));
            }
        }
    }
    let ai = mvslab::sparse::SparseMatrix::from_triplets(ni, &trips);
    let mut rhs: Vec<f64> = (1..n).map(|i| -mass[i] * load[i - 1]).collect();
    rhs[0] += a.get(1, 0).abs() * h_left;
    rhs[ni - 1] += a.get(n - 1, n).abs() * h_right;
    let sys = SparseSystem::with_bound(ai.clone(), rhs.clone(), Bound::Lower(vec![0.0; ni]));
    let out = psor_lcp(&sys, &PsorOptions::default()).unwrap();
    let aw = ai.apply(&out.solution);
    let resid: Vec<f64> = aw.iter().zip(&rhs).map(|(x, b)| x - b).collect();
    (out.solution, resid)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_d_obstacle_complementarity(
        loads in prop::collection::vec(0.2f64..5.0, 7),
        h_left in 0.0f64..0.3,
        h_right in 0.0f64..0.3,
    ) {
        let n = 64;
        // piecewise-constant load from the 7 random levels
        let load: Vec<f64> = (0..n - 1).map(|i| loads[i * 7 / (n - 1)]).collect();
        let (w, resid) = one_d_lcp(n, &load, h_left, h_right);
        let scale = resid.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for (i, (&wi, &ri)) in w.iter().zip(&resid).enumerate() {
            prop_assert!(wi >= -1e-12, "negative w[{i}] = {wi}");
            prop_assert!(ri >= -1e-6 * scale, "multiplier sign at {i}: {ri}");
            prop_assert!(
                wi.min(ri.abs() / scale) <= 1e-4,
                "complementarity gap at {i}: w = {wi}, resid = {ri}"
            );
        }
    }

    #[test]
    fn psor_warm_start_agrees_with_cold(
        shift in 0.0f64..0.5,
    ) {
        let n = 64;
        let load = vec![1.0 + shift; n - 1];
        let (cold, _) = one_d_lcp(n, &load, 0.125, 0.125);
        // warm start from an arbitrary clamped state
        let (a, mass, _coords) = path_system(-1.0, 1.0, n);
        let ni = n - 1;
        let mut trips = Vec::new();
        for i in 1..n {
            for (c, v) in a.row(i) {
                if c >= 1 && c < n {
                    trips.push((i - 1, c - 1, v));
                }
            }
        }
        let ai = mvslab::sparse::SparseMatrix::from_triplets(ni, &trips);
        let mut rhs: Vec<f64> = (1..n).map(|i| -mass[i] * load[i - 1]).collect();
        rhs[0] += a.get(1, 0).abs() * 0.125;
        rhs[ni - 1] += a.get(n - 1, n).abs() * 0.125;
        let sys = SparseSystem::with_bound(ai, rhs, Bound::Lower(vec![0.0; ni]));
        let warm = vec![0.3; ni];
        let out = psor_lcp(
            &sys,
            &PsorOptions { warm_start: Some(warm), ..Default::default() },
        ).unwrap();
        let dev = out
            .solution
            .iter()
            .zip(&cold)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        prop_assert!(dev < 1e-7, "warm/cold deviation {dev}");
    }

    #[test]
    fn chart_distances_are_metrics(
        ax in -0.6f64..0.6, ay in -0.6f64..0.6,
        bx in -0.6f64..0.6, by in -0.6f64..0.6,
        cx in -0.6f64..0.6, cy in -0.6f64..0.6,
    ) {
        for tag in [
            GeometryTag::Flat,
            GeometryTag::SphereStereographic,
            GeometryTag::HyperbolicPoincare,
        ] {
            let a = [ax, ay];
            let b = [bx, by];
            let c = [cx, cy];
            let dab = chart_distance(tag, a, b);
            let dba = chart_distance(tag, b, a);
            let dac = chart_distance(tag, a, c);
            let dcb = chart_distance(tag, c, b);
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() <= 1e-12 * (1.0 + dab));
            // acos near 1 loses half the digits on the sphere chart
            prop_assert!(chart_distance(tag, a, a) <= 1e-7);
            prop_assert!(
                dab <= dac + dcb + 1e-10,
                "triangle inequality fails: {dab} > {dac} + {dcb}"
            );
        }
    }
}
