//! Subcommand implementations. Every runner builds the configured
//! scenario, writes its artifacts into the output directory, and returns
//! whether all requested checks passed. All file contents are
//! byte-deterministic for a fixed config and seed; wall times go to the
//! log only.

use crate::acceptance;
use crate::config::{ExperimentConfig, TestFunction};
use mvslab::error::Error;
use mvslab::estimates::{coefficient_discrepancy_report, harnack_ensemble, key_estimate_fit};
use mvslab::export::{write_csv, write_vtk};
use mvslab::green::{green_function, verify_green, GreenField};
use mvslab::manifold::{build_builtin, ChartManifold, GeometryTag};
use mvslab::meanvalue::{mvs_sweep, mvt_verify, nonparabolic_boundedness_probe, r0_search};
use mvslab::obstacle::{check_complementarity_membrane, solve_membrane, VertexClass};
use mvslab::operators::{assemble_operators, OperatorBundle};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct RunOutcome {
    /// All requested checks passed (exit 0) or not (exit 1).
    pub all_pass: bool,
    /// Path of the primary report written for this run.
    pub report_path: PathBuf,
}

struct Scene {
    m: ChartManifold,
    ops: OperatorBundle,
    x0: usize,
}

fn build_scene(cfg: &ExperimentConfig) -> mvslab::Result<Scene> {
    let start = Instant::now();
    let m = build_builtin(cfg.geometry.shape(), cfg.mesh_h)?;
    let ops = assemble_operators(&m)?;
    let x0 = m.nearest_vertex(cfg.x0);
    log::info!(
        "mesh: {} vertices, {} triangles in {:.2} s",
        m.num_vertices(),
        m.num_triangles(),
        start.elapsed().as_secs_f64()
    );
    Ok(Scene { m, ops, x0 })
}

fn green_of(scene: &Scene) -> mvslab::Result<GreenField> {
    let start = Instant::now();
    let g = green_function(&scene.ops, scene.x0)?;
    log::info!("green solve in {:.2} s", start.elapsed().as_secs_f64());
    Ok(g)
}

/// x0 snapping report: the configured chart point and the vertex it
/// landed on.
fn snap_report(cfg: &ExperimentConfig, scene: &Scene) -> serde_json::Value {
    let p = scene.m.vertices[scene.x0];
    json!({
        "requested": cfg.x0,
        "snapped_vertex": scene.x0,
        "snapped_chart": p,
    })
}

fn write_summary<T: Serialize>(out_dir: &Path, value: &T) -> mvslab::Result<PathBuf> {
    let path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("summary serialization: {e}")))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

pub fn run_mesh(cfg: &ExperimentConfig, out_dir: &Path) -> mvslab::Result<RunOutcome> {
    let scene = build_scene(cfg)?;
    scene.m.validate()?;
    let lam = scene.m.conformal_factor.clone();
    write_vtk(&scene.m, &[("conformal_factor", &lam)], &out_dir.join("mesh.vtk"))?;
    let summary = json!({
        "geometry": cfg.geometry,
        "mesh_h": cfg.mesh_h,
        "num_vertices": scene.m.num_vertices(),
        "num_triangles": scene.m.num_triangles(),
        "metric_area": scene.m.total_metric_area(),
        "x0": snap_report(cfg, &scene),
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass: true, report_path })
}

pub fn run_green(cfg: &ExperimentConfig, out_dir: &Path) -> mvslab::Result<RunOutcome> {
    let scene = build_scene(cfg)?;
    let g = green_of(&scene)?;
    let audit = verify_green(&g, &scene.ops, &scene.m.boundary_flags);
    write_vtk(&scene.m, &[("green", &g.values)], &out_dir.join("green.vtk"))?;
    let checks: Vec<serde_json::Value> = audit
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "pass": c.pass, "violation": c.violation}))
        .collect();
    let summary = json!({
        "x0": snap_report(cfg, &scene),
        "checks": checks,
        "flux_sum": audit.flux_sum,
        "all_pass": audit.all_pass(),
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass: audit.all_pass(), report_path })
}

pub fn run_membrane(cfg: &ExperimentConfig, out_dir: &Path) -> mvslab::Result<RunOutcome> {
    let scene = build_scene(cfg)?;
    let g = green_of(&scene)?;
    let r = cfg.radii[0];
    let sol = solve_membrane(&scene.m, &scene.ops, &g, r, None)?;
    let report = check_complementarity_membrane(&scene.m, &scene.ops, &sol);
    let member: Vec<f64> = report
        .classes
        .iter()
        .map(|&c| if c == VertexClass::Noncontact { 1.0 } else { 0.0 })
        .collect();
    write_vtk(
        &scene.m,
        &[("membrane", &sol.values), ("green", &g.values), ("noncontact", &member)],
        &out_dir.join("membrane.vtk"),
    )?;
    let summary = json!({
        "x0": snap_report(cfg, &scene),
        "r": r,
        "iterations": sol.report.iterations,
        "complementarity": {
            "max_noncontact_gap": report.max_noncontact_gap,
            "max_contact_violation": report.max_contact_violation,
            "flagged": report.flagged.len(),
            "no_gap": report.no_gap,
        },
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass: report.no_gap, report_path })
}

fn test_field(
    tf: &TestFunction,
    m: &ChartManifold,
    x0: usize,
) -> mvslab::Result<(String, Vec<f64>, bool)> {
    let c = m.vertices[x0];
    Ok(match tf {
        TestFunction::Constant => {
            ("constant".into(), vec![1.0; m.num_vertices()], false)
        }
        TestFunction::CoordinateHarmonic => (
            "coordinate-harmonic".into(),
            m.vertices.iter().map(|p| p[0] - c[0]).collect(),
            false,
        ),
        TestFunction::DistSquared => (
            "dist-squared".into(),
            m.vertices
                .iter()
                .map(|p| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
                .collect(),
            true,
        ),
        TestFunction::CustomFromFile { path } => {
            let text = std::fs::read_to_string(path)?;
            let vals: Vec<f64> = text
                .lines()
                .map(|l| {
                    l.trim().parse::<f64>().map_err(|e| {
                        Error::Parameter(format!("bad value in {}: {e}", path.display()))
                    })
                })
                .collect::<mvslab::Result<_>>()?;
            if vals.len() != m.num_vertices() {
                return Err(Error::Parameter(format!(
                    "{} has {} values for {} vertices",
                    path.display(),
                    vals.len(),
                    m.num_vertices()
                )));
            }
            ("custom-from-file".into(), vals, true)
        }
    })
}

pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> mvslab::Result<RunOutcome> {
    let scene = build_scene(cfg)?;
    let g = green_of(&scene)?;
    let sweep = mvs_sweep(&scene.m, &scene.ops, &g, &cfg.radii, jobs > 1)?;
    let rows: Vec<Vec<f64>> = sweep
        .radii
        .iter()
        .zip(&sweep.sets)
        .map(|(&r, d)| {
            vec![
                r,
                d.volume,
                d.volume_refined,
                d.member_vertices.len() as f64,
                if d.touches_boundary { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    write_csv(
        &["r", "volume", "volume_refined", "members", "touches_boundary"],
        &rows,
        &out_dir.join("sweep.csv"),
    )?;
    let masks: Vec<(String, Vec<f64>)> = sweep
        .sets
        .iter()
        .zip(&sweep.radii)
        .map(|(d, &r)| {
            let mask = d.member_mask(scene.m.num_vertices());
            (
                format!("member_r_{r}").replace('.', "_"),
                mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            )
        })
        .collect();
    let fields: Vec<(&str, &[f64])> =
        masks.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    write_vtk(&scene.m, &fields, &out_dir.join("sweep.vtk"))?;

    let mvt_tol = cfg.tolerance("mvt_average", 1e-3);
    let mut verdicts = Vec::new();
    let mut all_pass = sweep.nestedness_pass;
    for tf in &cfg.test_functions {
        let (name, u, subharmonic) = test_field(tf, &scene.m, scene.x0)?;
        let verdict = mvt_verify(
            &scene.m,
            &scene.ops,
            &u,
            &sweep,
            scene.x0,
            subharmonic,
            cfg.tolerance("harmonicity_residual", 1e-6),
            mvt_tol,
        )?;
        all_pass &= verdict.monotone_pass;
        if !subharmonic {
            all_pass &= verdict.limit_error <= mvt_tol;
        }
        verdicts.push(json!({
            "function": name,
            "averages": verdict.averages,
            "monotone_pass": verdict.monotone_pass,
            "limit_error": verdict.limit_error,
            "spread": verdict.spread,
        }));
    }
    let summary = json!({
        "x0": snap_report(cfg, &scene),
        "radii": cfg.radii,
        "nestedness_pass": sweep.nestedness_pass,
        "nestedness_witnesses": sweep.nestedness_witnesses.len(),
        "volume_monotone": sweep.volume_monotone,
        "mvt": verdicts,
        "all_pass": all_pass,
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass, report_path })
}

pub fn run_key_estimate(cfg: &ExperimentConfig, out_dir: &Path) -> mvslab::Result<RunOutcome> {
    let scene = build_scene(cfg)?;
    let fit = key_estimate_fit(&scene.m, &scene.ops, scene.x0, &cfg.radii)?;
    let rows: Vec<Vec<f64>> = fit.table.iter().map(|r| r.to_vec()).collect();
    write_csv(&["rho", "measured", "fitted"], &rows, &out_dir.join("key_estimate.csv"))?;
    let ricci = scene.m.curvature_data.unwrap_or(0.0);
    let a0_tol = cfg.tolerance("a0", 0.05);
    let all_pass = (fit.a0 - 4.0).abs() <= a0_tol;
    let summary = json!({
        "x0": snap_report(cfg, &scene),
        "a0": fit.a0,
        "a2": fit.a2,
        "residual": fit.residual,
        "c_ke1_proxy": fit.c_ke1_proxy,
        "discrepancy_report": coefficient_discrepancy_report(&fit, ricci),
        "all_pass": all_pass,
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass, report_path })
}

pub fn run_harnack(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: u64,
) -> mvslab::Result<RunOutcome> {
    let scene = build_scene(cfg)?;
    let hc = cfg.harnack.ok_or_else(|| {
        Error::Parameter("harnack subcommand needs the \"harnack\" config section".into())
    })?;
    let k = match scene.m.curvature_data {
        Some(c) if c < 0.0 => -c,
        _ => 0.0,
    };
    let reports = harnack_ensemble(&scene.m, scene.x0, hc.s, k, hc.samples, seed)?;
    let rows: Vec<Vec<f64>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i as f64, r.ratio, r.c_backsolved])
        .collect();
    write_csv(&["sample", "ratio", "c_backsolved"], &rows, &out_dir.join("harnack.csv"))?;
    let c_max = reports.iter().map(|r| r.c_backsolved).fold(0.0f64, f64::max);
    // boundary data lies in [1, 2], so the maximum principle caps every
    // ratio at 2
    let all_pass = reports.iter().all(|r| r.ratio >= 1.0 && r.ratio <= 2.0 + 1e-9);
    let summary = json!({
        "x0": snap_report(cfg, &scene),
        "s": hc.s,
        "k": k,
        "seed": seed,
        "samples": hc.samples,
        "c_max": c_max,
        "all_pass": all_pass,
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass, report_path })
}

pub fn run_r0(cfg: &ExperimentConfig, out_dir: &Path) -> mvslab::Result<RunOutcome> {
    let scene = build_scene(cfg)?;
    let g = green_of(&scene)?;
    let tol = cfg.tolerance("r0_bracket", 0.02);
    let cap = cfg.tolerance("r0_cap", 16.0);
    let est = r0_search(&scene.m, &scene.ops, &g, tol, cap)?;
    let all_pass = !est.hit_cap;
    let summary = json!({
        "x0": snap_report(cfg, &scene),
        "r_in": est.r_in,
        "r_out": est.r_out,
        "boundary_gap": est.boundary_gap,
        "hit_cap": est.hit_cap,
        "all_pass": all_pass,
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass, report_path })
}

pub fn run_nonparabolic(cfg: &ExperimentConfig, out_dir: &Path) -> mvslab::Result<RunOutcome> {
    if !matches!(cfg.geometry.shape(), mvslab::manifold::Shape::HyperbolicDisk { .. })
        && scene_tag(cfg) != GeometryTag::HyperbolicPoincare
    {
        return Err(Error::Parameter(
            "nonparabolic probe is defined on the hyperbolic geometry".into(),
        ));
    }
    let rows = nonparabolic_boundedness_probe(cfg.mesh_h, &cfg.radii, 1.0, 0.5, 3.5)?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            vec![
                row.r,
                row.circumradius,
                row.volume,
                if row.stabilized { 1.0 } else { 0.0 },
                row.ambient_rho,
            ]
        })
        .collect();
    write_csv(
        &["r", "circumradius", "volume", "stabilized", "ambient_rho"],
        &table,
        &out_dir.join("nonparabolic.csv"),
    )?;
    let all_pass = rows.iter().all(|row| row.stabilized);
    let summary = json!({
        "rows": rows.iter().map(|row| json!({
            "r": row.r,
            "circumradius": row.circumradius,
            "volume": row.volume,
            "stabilized": row.stabilized,
            "ambient_rho": row.ambient_rho,
        })).collect::<Vec<_>>(),
        "all_pass": all_pass,
    });
    let report_path = write_summary(out_dir, &summary)?;
    Ok(RunOutcome { all_pass, report_path })
}

fn scene_tag(cfg: &ExperimentConfig) -> GeometryTag {
    match cfg.geometry.shape() {
        mvslab::manifold::Shape::HyperbolicDisk { .. } => GeometryTag::HyperbolicPoincare,
        mvslab::manifold::Shape::SphereCap { .. } => GeometryTag::SphereStereographic,
        _ => GeometryTag::Flat,
    }
}

pub fn run_verify(out_dir: &Path) -> mvslab::Result<RunOutcome> {
    let start = Instant::now();
    let results = acceptance::run_all();
    log::info!("acceptance suite in {:.1} s", start.elapsed().as_secs_f64());
    for c in &results {
        println!("criterion {:02} [{}] {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let all_pass = results.iter().all(|c| c.pass);
    let verdict = json!({
        "criteria": results,
        "all_pass": all_pass,
    });
    let path = out_dir.join("verdict.json");
    let text = serde_json::to_string_pretty(&verdict)
        .map_err(|e| Error::Numeric(format!("verdict serialization: {e}")))?;
    std::fs::write(&path, text + "\n")?;
    Ok(RunOutcome { all_pass, report_path: path })
}
