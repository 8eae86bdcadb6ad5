//! Executes a validated scenario and assembles the report. Reports are
//! deterministic for a fixed (config, seed) pair: payloads are built from
//! `serde_json` values whose object keys are sorted, no timestamps are
//! recorded, and every randomized battery draws from a seeded stream.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use distcurve::algebra::{
    conformal_circle_direction, cr_direction, dkr_filtration, legendrean_direction,
    verify_sym_constraints, AlgebraSpec, ModelData, C64,
};
use distcurve::cr::{
    cr_constraint_check, cr_einstein_check, load_cr_fixture, reality_check, CRDirection,
};
use distcurve::curvature::einstein_check;
use distcurve::curves::{
    cc_residual_norms, conformal_circle_integrate, geodesic_integrate, normalize_initial_data,
};
use distcurve::legendrean::{
    constraint_check, einstein_scale_check, load_fixture, LegendreanDirection,
};
use distcurve::metric::{by_name, ChartMetric, MetricError};
use distcurve::suite::{rng, run_all};
use distcurve::tractor::closure_defect;

use crate::config::{CheckCommand, CheckGeometry, Command, Config, CurveKind, MetricConfig};

/// Failure classes that map onto the process exit codes: `Config` covers
/// schema-valid documents that reference something unusable (exit 2),
/// `Numerical` covers runs the library had to abandon (exit 3).
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(String),
}

pub struct RunOutput {
    /// Pretty-printed report JSON (sorted keys at every level).
    pub report: String,
    pub pass: bool,
}

pub fn execute(
    config: &Config,
    raw_config: &[u8],
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<RunOutput, RunError> {
    let (pass, payload, csv) = match &config.command {
        Command::Symalg { family, n } => {
            let (pass, payload) = cmd_symalg(family, *n)?;
            (pass, payload, None)
        }
        Command::Integrate {
            metric,
            kind,
            x0,
            u0,
            c0,
            arc,
            step,
            tol,
        } => cmd_integrate(metric, *kind, x0, u0, c0.as_deref(), *arc, *step, *tol)?,
        Command::Check(check) => {
            let (pass, payload) = cmd_check(check, seed)?;
            (pass, payload, None)
        }
        Command::Suite { fixtures_dir } => {
            let (pass, payload) = cmd_suite(fixtures_dir, seed)?;
            (pass, payload, None)
        }
    };

    let report = render_report(config, raw_config, pass, payload);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| RunError::Config(format!("cannot create {}: {e}", dir.display())))?;
        let report_path = dir.join(format!("{}.report.json", config.id));
        fs::write(&report_path, &report).map_err(|e| {
            RunError::Config(format!("cannot write {}: {e}", report_path.display()))
        })?;
        if let Some(csv) = csv {
            let csv_path = dir.join(format!("{}.csv", config.id));
            fs::write(&csv_path, csv).map_err(|e| {
                RunError::Config(format!("cannot write {}: {e}", csv_path.display()))
            })?;
        }
    }
    Ok(RunOutput { report, pass })
}

fn render_report(config: &Config, raw_config: &[u8], pass: bool, payload: Value) -> String {
    let digest = Sha256::digest(raw_config);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").unwrap();
    }
    let report = json!({
        "command": config.command_name,
        "config_sha256": hex,
        "id": config.id,
        "pass": pass,
        "payload": payload,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    text
}

/// Library errors that arise mid-run are numerical breakdowns; data problems
/// the validator could not see (a vanishing velocity, say) stay config-class.
fn classify(e: MetricError) -> RunError {
    match e {
        MetricError::BadCurveData(_) | MetricError::Dimension { .. } => {
            RunError::Config(e.to_string())
        }
        other => RunError::Numerical(other.to_string()),
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Config(e.to_string())
}

fn lookup_metric(m: &MetricConfig) -> Result<ChartMetric, RunError> {
    let metric = by_name(&m.name, m.n)
        .ok_or_else(|| RunError::Config(format!("metric {:?} is not in the catalog", m.name)))?;
    if metric.n != m.n {
        return Err(RunError::Config(format!(
            "metric {:?} has dimension {}, config says {}",
            m.name, metric.n, m.n
        )));
    }
    Ok(metric)
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 })
}

// ---------------------------------------------------------------------------
// symalg
// ---------------------------------------------------------------------------

fn cmd_symalg(family: &str, n: usize) -> Result<(bool, Value), RunError> {
    let (result, spec, model) = match family {
        "conformal" => {
            let spec = AlgebraSpec::conformal(n).map_err(config_err)?;
            let u = unit(n, 0);
            let c = unit(n, 1) * 0.7;
            let dir = conformal_circle_direction(&spec, &u, &c).map_err(config_err)?;
            let res = dkr_filtration(&spec, &dir).map_err(RunError::numerical)?;
            (res, spec, ModelData::ConformalCircle { u, c })
        }
        "legendrean" => {
            let spec = AlgebraSpec::legendrean(n).map_err(config_err)?;
            let u = DVector::from_fn(n, |j, _| 1.0 / (j as f64 + 1.0));
            let mut v = unit(n, 0);
            v /= u.dot(&v);
            let dir = legendrean_direction(&spec, &u, &v).map_err(config_err)?;
            let res = dkr_filtration(&spec, &dir).map_err(RunError::numerical)?;
            (res, spec, ModelData::Legendrean { u, v })
        }
        "cr" => {
            let spec = AlgebraSpec::cr(n).map_err(config_err)?;
            let u = DVector::from_fn(n, |j, _| match j {
                0 => C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                1 => C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2),
                _ => C64::new(0.0, 0.0),
            });
            let dir = cr_direction(&spec, &u).map_err(config_err)?;
            let res = dkr_filtration(&spec, &dir).map_err(RunError::numerical)?;
            (res, spec, ModelData::Cr { u })
        }
        other => return Err(RunError::Config(format!("unknown family {other:?}"))),
    };

    let shape = verify_sym_constraints(&result.sym, &model).map_err(RunError::numerical)?;
    let pass = shape.passes(1e-8);
    let payload = json!({
        "algebra_dim": spec.dim(),
        "chain_dims": result.chain_dims(),
        "family": family,
        "moduli_dim": result.moduli_dim(&spec),
        "n": n,
        "shape_residual": shape.max_residual,
        "sym_dim": result.sym_dim(),
    });
    Ok((pass, payload))
}

// ---------------------------------------------------------------------------
// integrate
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_integrate(
    metric: &MetricConfig,
    kind: CurveKind,
    x0: &[f64],
    u0: &[f64],
    c0: Option<&[f64]>,
    arc: f64,
    step: f64,
    tol: f64,
) -> Result<(bool, Value, Option<String>), RunError> {
    let m = lookup_metric(metric)?;
    let x0 = DVector::from_column_slice(x0);
    let u_raw = DVector::from_column_slice(u0);
    let c_raw = c0.map_or_else(|| DVector::zeros(m.n), DVector::from_column_slice);
    let (u, c) = normalize_initial_data(&m, &x0, &u_raw, &c_raw).map_err(classify)?;

    let traj = match kind {
        CurveKind::Geodesic => geodesic_integrate(&m, &x0, &u, arc, step),
        CurveKind::Circle => conformal_circle_integrate(&m, &x0, &u, &c, arc, step),
    }
    .map_err(classify)?;

    // Surfaces have no flow residual; the gate is then domain containment.
    let max_residual = match cc_residual_norms(&m, &traj) {
        Ok(norms) => Some(norms.into_iter().fold(0.0, f64::max)),
        Err(MetricError::DimensionTooSmall { .. }) => None,
        Err(e) => return Err(classify(e)),
    };
    let pass = !traj.exited_domain && max_residual.is_none_or(|r| r < tol);

    let csv = traj.to_csv(&m).map_err(classify)?;
    let last = traj.states.last().expect("at least two states");
    let payload = json!({
        "arc": arc,
        "drift_orthogonality": traj.drift.orthogonality,
        "drift_speed": traj.drift.speed,
        "exited_domain": traj.exited_domain,
        "final_t": last.t,
        "final_x": last.x.as_slice(),
        "kind": match kind { CurveKind::Geodesic => "geodesic", CurveKind::Circle => "circle" },
        "max_residual": max_residual,
        "metric": { "n": metric.n, "name": metric.name },
        "samples": traj.states.len(),
        "step": step,
        "tol": tol,
    });
    Ok((pass, payload, Some(csv)))
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn cmd_check(check: &CheckCommand, seed: u64) -> Result<(bool, Value), RunError> {
    match check {
        CheckCommand::Einstein {
            metric,
            points,
            tol,
        } => {
            let m = lookup_metric(metric)?;
            let rep = einstein_check(&m, points, *tol).map_err(classify)?;
            let payload = json!({
                "geometry": "einstein",
                "lambda": rep.lambda,
                "lambda_variation": rep.lambda_variation,
                "max_traceless": rep.max_traceless,
                "metric": { "n": metric.n, "name": metric.name },
                "points": points.len(),
                "tol": tol,
            });
            Ok((rep.einstein, payload))
        }
        CheckCommand::Closure {
            metric,
            x0,
            u0,
            arc,
            step,
            tol,
        } => {
            let m = lookup_metric(metric)?;
            let x0 = DVector::from_column_slice(x0);
            let u_raw = DVector::from_column_slice(u0);
            let zero = DVector::zeros(m.n);
            let (u, _) = normalize_initial_data(&m, &x0, &u_raw, &zero).map_err(classify)?;
            let traj = geodesic_integrate(&m, &x0, &u, *arc, *step).map_err(classify)?;
            let max_defect = closure_defect(&m, &traj)
                .map_err(classify)?
                .into_iter()
                .fold(0.0, f64::max);
            let payload = json!({
                "arc": arc,
                "geometry": "closure",
                "max_defect": max_defect,
                "metric": { "n": metric.n, "name": metric.name },
                "samples": traj.states.len(),
                "step": step,
                "tol": tol,
            });
            Ok((max_defect < *tol, payload))
        }
        CheckCommand::Fixture {
            geometry: CheckGeometry::Legendrean,
            fixture,
            directions,
            tol,
        } => {
            let fx = load_fixture(Path::new(fixture))
                .map_err(|e| RunError::Config(format!("fixture {fixture}: {e}")))?;
            let (isotropic, lambda) =
                einstein_scale_check(&fx.samples, *tol).map_err(config_err)?;
            let mut r = rng(seed);
            let mut all_pass = true;
            let mut worst = 0.0_f64;
            for s in &fx.samples {
                for _ in 0..*directions {
                    let d = LegendreanDirection::random(s.n, &mut r);
                    let rep = constraint_check(s, &d, *tol).map_err(RunError::numerical)?;
                    all_pass &= rep.pass;
                    worst = worst.max(rep.residuals.worst());
                }
            }
            let payload = json!({
                "direction_checks": directions * fx.samples.len(),
                "directions_all_pass": all_pass,
                "geometry": "legendrean",
                "isotropic": isotropic,
                "lambda": lambda,
                "samples": fx.samples.len(),
                "seed": seed,
                "tol": tol,
                "worst_residual": worst,
            });
            Ok((isotropic && all_pass, payload))
        }
        CheckCommand::Fixture {
            geometry: CheckGeometry::Cr,
            fixture,
            directions,
            tol,
        } => {
            let fx = load_cr_fixture(Path::new(fixture))
                .map_err(|e| RunError::Config(format!("fixture {fixture}: {e}")))?;
            let (isotropic, lambda) = cr_einstein_check(&fx.samples, *tol).map_err(config_err)?;
            let mut r = rng(seed);
            let mut all_pass = true;
            let mut worst = 0.0_f64;
            let mut reality_worst = 0.0_f64;
            for (i, s) in fx.samples.iter().enumerate() {
                reality_worst = reality_worst.max(reality_check(s, fx.barred.get(i)).worst());
                for _ in 0..*directions {
                    let d = CRDirection::random(&s.h, &mut r);
                    let rep = cr_constraint_check(s, &d, *tol).map_err(RunError::numerical)?;
                    all_pass &= rep.pass;
                    worst = worst.max(rep.residuals.worst());
                }
            }
            let payload = json!({
                "direction_checks": directions * fx.samples.len(),
                "directions_all_pass": all_pass,
                "geometry": "cr",
                "isotropic": isotropic,
                "lambda": lambda,
                "reality_worst": reality_worst,
                "samples": fx.samples.len(),
                "seed": seed,
                "tol": tol,
                "worst_residual": worst,
            });
            Ok((isotropic && all_pass && reality_worst < *tol, payload))
        }
    }
}

// ---------------------------------------------------------------------------
// suite
// ---------------------------------------------------------------------------

fn cmd_suite(fixtures_dir: &str, seed: u64) -> Result<(bool, Value), RunError> {
    let dir = Path::new(fixtures_dir);
    if !dir.is_dir() {
        return Err(RunError::Config(format!(
            "fixtures_dir {fixtures_dir:?} is not a directory"
        )));
    }
    let outcomes = run_all(seed, dir);
    let pass = outcomes.iter().all(|o| o.passed != Some(false));
    let payload = json!({
        "fixtures_dir": fixtures_dir,
        "scenarios": serde_json::to_value(&outcomes).expect("outcomes serialize"),
        "seed": seed,
    });
    Ok((pass, payload))
}

impl RunError {
    fn numerical<E: std::fmt::Display>(e: E) -> Self {
        RunError::Numerical(e.to_string())
    }
}
