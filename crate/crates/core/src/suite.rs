//! Acceptance battery: every headline capability of the crate, exercised in a
//! fixed order with pinned tolerances and a deterministic RNG, so that a
//! single call reports pass/fail per scenario. Also home to the shared
//! random-stream helpers used by the randomized tests across modules.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{
    conformal_circle_direction, conformal_line_direction, cr_direction, dkr_filtration,
    legendrean_direction, tangency_oracle, verify_sym_constraints, AlgebraSpec, FlatCurve,
    ModelData, Subspace, C64,
};
use crate::cr::{
    cr_constraint_check, cr_corollary_probe, cr_einstein_check, load_cr_fixture, CRDirection,
    CRSample,
};
use crate::curvature::{christoffel, connection_rescale_check, schouten_rescale_residual};
use crate::curves::{
    accelerated_curve, cc_residual, cc_residual_norms, conformal_circle_integrate, eigencheck,
    flat_unit_circle_point, geodesic_integrate, hausdorff_distance, rescaled_initial_data,
    rescaled_length, CurveState,
};
use crate::legendrean::{
    constraint_check, corollary_equivalence_probe, einstein_scale_check, load_fixture,
    LegendreanDirection, LegendreanSample, EXACT_TOL,
};
use crate::metric::{self, conformal_rescale, ChartMetric, ConformalFactor};
use crate::rescale::{rescale_to_geodesic, TubeOptions};
use crate::tractor::{appendix_defect, closure_defect};

/// Deterministic generator used by every randomized battery in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal sample via Box-Muller; keeps the dependency surface small
/// and the streams reproducible across platforms.
pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform sample in `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Result of one numbered scenario of the battery. `passed` is `None` when
/// the scenario was skipped (currently only the fixture report, when no
/// fixture files are present); skipped scenarios never fail a run.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: Option<bool>,
    pub details: String,
}

/// Runs the whole battery. `seed` feeds every randomized scenario through
/// per-scenario derived streams; `fixtures_dir` is scanned for the curvature
/// fixture files of scenario 10.
pub fn run_all(seed: u64, fixtures_dir: &Path) -> Vec<CriterionOutcome> {
    vec![
        outcome(1, "symmetry-algebra dimensions", symmetry_dimension_battery),
        outcome(2, "tangency oracle agreement", oracle_agreement),
        outcome(3, "flat circle closed form", flat_circle_closed_form),
        outcome(4, "geodesic einstein detector", || {
            geodesic_einstein_detector(seed ^ 0x04)
        }),
        outcome(5, "conformal invariance of circles", || {
            circle_conformal_invariance(seed ^ 0x05)
        }),
        outcome(6, "transport defect cross-check", || {
            transport_defect_crosscheck(seed ^ 0x06)
        }),
        outcome(
            7,
            "circle-to-geodesic rescaling",
            circle_rescaling_construction,
        ),
        outcome(8, "pointwise equivalence probes", || {
            pointwise_probe_battery(seed ^ 0x08)
        }),
        outcome(9, "curvature rescaling laws", || {
            rescaling_laws(seed ^ 0x09)
        }),
        fixture_scale_reports(fixtures_dir),
    ]
}

fn outcome(
    id: u32,
    name: &'static str,
    run: impl FnOnce() -> Result<(bool, String), String>,
) -> CriterionOutcome {
    match run() {
        Ok((passed, details)) => CriterionOutcome {
            id,
            name,
            passed: Some(passed),
            details,
        },
        Err(e) => CriterionOutcome {
            id,
            name,
            passed: Some(false),
            details: format!("error: {e}"),
        },
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn verdict(fails: Vec<String>, ok: String) -> Result<(bool, String), String> {
    if fails.is_empty() {
        return Ok((true, ok));
    }
    let mut details = fails.iter().take(6).cloned().collect::<Vec<_>>().join("; ");
    if fails.len() > 6 {
        details.push_str(&format!(" (+{} more)", fails.len() - 6));
    }
    Ok((false, details))
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 })
}

fn random_point(r: &mut ChaCha8Rng, n: usize, half_width: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| uniform(r, -half_width, half_width))
}

/// Random tangent of unit `g`-speed at `x`.
fn random_unit_tangent(
    m: &ChartMetric,
    x: &DVector<f64>,
    r: &mut ChaCha8Rng,
) -> Result<DVector<f64>, String> {
    let g = m.at(x.as_slice()).map_err(err)?;
    loop {
        let u = DVector::from_fn(m.n, |_, _| std_normal(r));
        let s2 = (u.transpose() * &g * &u)[(0, 0)];
        if s2 > 1e-6 {
            return Ok(u / s2.sqrt());
        }
    }
}

/// Random positive factor `exp(b + a.x + x^T Q x / 2)` with gentle slopes, so
/// rescaled runs stay comfortably inside every catalog chart.
fn random_factor(r: &mut ChaCha8Rng, n: usize) -> ConformalFactor {
    let b = uniform(r, -0.2, 0.2);
    let a: Vec<f64> = (0..n).map(|_| uniform(r, -0.15, 0.15)).collect();
    let mut q = DMatrix::from_fn(n, n, |_, _| uniform(r, -0.08, 0.08));
    q = (&q + q.transpose()) * 0.5;
    ConformalFactor::exp_quadratic(b, a, q)
}

// ---------------------------------------------------------------------------
// 1. Integer dimension identities of the symmetry algebras.
// ---------------------------------------------------------------------------

fn symmetry_dimension_battery() -> Result<(bool, String), String> {
    let mut fails = Vec::new();

    for n in 3usize..=6 {
        let spec = AlgebraSpec::conformal(n).map_err(err)?;
        let expected = (n - 1) * (n - 2) / 2 + 3;
        let u = unit(n, 0);
        let c = unit(n, 1) * 0.7;

        let line = dkr_filtration(&spec, &conformal_line_direction(&spec, &u).map_err(err)?)
            .map_err(err)?;
        if line.sym_dim() != expected {
            fails.push(format!(
                "conformal line n={n}: dim {} != {expected}",
                line.sym_dim()
            ));
        }
        let circle = dkr_filtration(
            &spec,
            &conformal_circle_direction(&spec, &u, &c).map_err(err)?,
        )
        .map_err(err)?;
        if circle.sym_dim() != expected {
            fails.push(format!(
                "conformal circle n={n}: dim {} != {expected}",
                circle.sym_dim()
            ));
        }
        if circle.moduli_dim(&spec) != 3 * (n - 1) {
            fails.push(format!(
                "conformal moduli n={n}: {} != {}",
                circle.moduli_dim(&spec),
                3 * (n - 1)
            ));
        }
    }

    for n in 2usize..=5 {
        let spec = AlgebraSpec::legendrean(n).map_err(err)?;
        let u = DVector::from_fn(n, |j, _| 1.0 / (j as f64 + 1.0));
        let mut v = unit(n, 0);
        v /= u.dot(&v);
        let res = dkr_filtration(&spec, &legendrean_direction(&spec, &u, &v).map_err(err)?)
            .map_err(err)?;
        let expected = n * n - 2 * n + 4;
        if res.sym_dim() != expected {
            fails.push(format!(
                "legendrean n={n}: dim {} != {expected}",
                res.sym_dim()
            ));
        }
        // The chain must take all of p_0, p_1, p_2, p_3 to stabilize: depth
        // three exactly, one past the grading depth.
        if res.chain_dims().len() != 4 {
            fails.push(format!(
                "legendrean n={n}: chain {:?} does not stabilize at depth 3",
                res.chain_dims()
            ));
        }
    }

    for n in 2usize..=4 {
        let spec = AlgebraSpec::cr(n).map_err(err)?;
        let u = DVector::from_fn(n, |j, _| match j {
            0 => C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            1 => C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2),
            _ => C64::new(0.0, 0.0),
        });
        let res = dkr_filtration(&spec, &cr_direction(&spec, &u).map_err(err)?).map_err(err)?;
        if res.moduli_dim(&spec) != 6 * n - 1 {
            fails.push(format!(
                "cr n={n}: moduli {} != {}",
                res.moduli_dim(&spec),
                6 * n - 1
            ));
        }
    }

    verdict(
        fails,
        "conformal line+circle (n-1)(n-2)/2+3 and moduli 3(n-1) for n=3..6; \
         legendrean n^2-2n+4 with depth-3 chains for n=2..5; cr moduli 6n-1 for n=2..4"
            .into(),
    )
}

// ---------------------------------------------------------------------------
// 2. The numeric tangency oracle against the algebraic filtration.
// ---------------------------------------------------------------------------

fn oracle_agreement() -> Result<(bool, String), String> {
    let mut fails = Vec::new();

    for n in [3usize, 4] {
        let spec = AlgebraSpec::conformal(n).map_err(err)?;
        let u = unit(n, 0);
        let c = unit(n, 1) * 0.8;

        let line_curve = FlatCurve::line(u.clone()).map_err(err)?;
        let line_model = ModelData::ConformalLine { u: u.clone() };
        let line_dir = conformal_line_direction(&spec, &u).map_err(err)?;
        compare_oracle(
            &mut fails,
            format!("line n={n}"),
            &spec,
            &line_curve,
            &line_dir,
            &line_model,
        )?;

        let circle_curve = FlatCurve::circle(u.clone(), c.clone()).map_err(err)?;
        let circle_model = ModelData::ConformalCircle {
            u: u.clone(),
            c: c.clone(),
        };
        let circle_dir = conformal_circle_direction(&spec, &u, &c).map_err(err)?;
        compare_oracle(
            &mut fails,
            format!("circle n={n}"),
            &spec,
            &circle_curve,
            &circle_dir,
            &circle_model,
        )?;
    }

    // A generic cubic admits no tangent symmetries at all.
    let ts: Vec<f64> = (0..40).map(|i| -1.2 + 2.4 * i as f64 / 39.0).collect();
    let points: Vec<DVector<f64>> = ts
        .iter()
        .map(|&t| DVector::from_vec(vec![t, t * t, t * t * t]))
        .collect();
    let tangents: Vec<DVector<f64>> = ts
        .iter()
        .map(|&t| DVector::from_vec(vec![1.0, 2.0 * t, 3.0 * t * t]))
        .collect();
    let cubic = FlatCurve::sampled(points, tangents).map_err(err)?;
    let cubic_dim = tangency_oracle(&cubic, 20).map_err(err)?.dim();
    if cubic_dim != 0 {
        fails.push(format!("generic cubic: dim {cubic_dim} != 0"));
    }

    verdict(
        fails,
        "oracle and filtration spans coincide for lines and circles (n=3,4); generic cubic dim 0"
            .into(),
    )
}

fn compare_oracle(
    fails: &mut Vec<String>,
    label: String,
    spec: &AlgebraSpec,
    curve: &FlatCurve,
    dir: &crate::algebra::AlgebraElement,
    model: &ModelData,
) -> Result<(), String> {
    let oracle = tangency_oracle(curve, 30).map_err(err)?;
    let sym = dkr_filtration(spec, dir).map_err(err)?.sym;

    if oracle.dim() != sym.dim() {
        fails.push(format!(
            "{label}: oracle dim {} != filtration dim {}",
            oracle.dim(),
            sym.dim()
        ));
        return Ok(());
    }
    for kp in &oracle.basis {
        let elem = kp.to_matrix(spec.tag);
        let (ok, _, residual) = sym.membership(&elem, 1e-6 * (1.0 + elem.norm()));
        if !ok {
            fails.push(format!(
                "{label}: oracle field escapes the filtration span ({residual:.3e})"
            ));
            return Ok(());
        }
    }
    let span = Subspace::span(
        spec.tag,
        &oracle
            .basis
            .iter()
            .map(|kp| kp.to_matrix(spec.tag))
            .collect::<Vec<_>>(),
    );
    if !span.contains(&sym, 1e-6) {
        fails.push(format!("{label}: filtration span escapes the oracle span"));
    }
    let report = verify_sym_constraints(&sym, model).map_err(err)?;
    if !report.passes(1e-8) {
        fails.push(format!(
            "{label}: predicted shape violated ({:.3e})",
            report.max_residual
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 3. Flat-space circle integration against the closed form.
// ---------------------------------------------------------------------------

fn flat_circle_closed_form() -> Result<(bool, String), String> {
    let m = metric::flat(3);
    let x0 = DVector::zeros(3);
    let u0 = unit(3, 0);
    let c0 = unit(3, 1);
    let traj =
        conformal_circle_integrate(&m, &x0, &u0, &c0, std::f64::consts::TAU, 1e-3).map_err(err)?;
    let mut worst: f64 = 0.0;
    for s in &traj.states {
        let exact = flat_unit_circle_point(&u0, &c0, s.t);
        worst = worst.max((&s.x - exact).norm());
    }
    if worst < 1e-6 {
        Ok((
            true,
            format!("max point deviation {worst:.3e} over a full turn at step 1e-3"),
        ))
    } else {
        Ok((false, format!("max point deviation {worst:.3e} >= 1e-6")))
    }
}

// ---------------------------------------------------------------------------
// 4. Geodesic flow residual as an Einstein detector, both directions.
// ---------------------------------------------------------------------------

fn geodesic_einstein_detector(seed: u64) -> Result<(bool, String), String> {
    let mut r = rng(seed);
    let mut fails = Vec::new();

    // The projective-plane chart reaches its boundary at finite arc length
    // (the complement of the chart is a hypersurface at finite distance), so
    // its starting ball is smaller: from radius 0.2 every unit-speed
    // geodesic needs more than unit arc to reach the domain cube.
    let mut worst_einstein: f64 = 0.0;
    for (m, half_width) in [
        (metric::sphere(3), 0.3),
        (metric::sphere(4), 0.3),
        (metric::fubini_study(), 0.1),
    ] {
        for k in 0..20 {
            let x0 = random_point(&mut r, m.n, half_width);
            let u0 = random_unit_tangent(&m, &x0, &mut r)?;
            let traj = geodesic_integrate(&m, &x0, &u0, 1.0, 1e-3).map_err(err)?;
            if traj.exited_domain {
                fails.push(format!("{} geodesic {k}: left the chart", m.name));
                continue;
            }
            let worst = cc_residual_norms(&m, &traj)
                .map_err(err)?
                .into_iter()
                .fold(0.0, f64::max);
            worst_einstein = worst_einstein.max(worst);
            if worst >= 1e-5 {
                fails.push(format!("{} geodesic {k}: residual {worst:.3e}", m.name));
            }
        }
    }

    let m = metric::non_einstein_diag(4);
    let mut detected = 0usize;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..20 {
        let mut x0 = random_point(&mut r, 4, 0.3);
        x0[0] += 1.0;
        let u0 = random_unit_tangent(&m, &x0, &mut r)?;
        let traj = geodesic_integrate(&m, &x0, &u0, 1.0, 1e-3).map_err(err)?;
        let norms = cc_residual_norms(&m, &traj).map_err(err)?;
        if norms.iter().copied().fold(0.0, f64::max) > 1e-3 {
            detected += 1;
        }
        for (i, s) in traj.states.iter().enumerate().skip(1).step_by(37) {
            if i + 1 >= traj.states.len() {
                break;
            }
            let (_, nrm) = eigencheck(&m, &s.x, &s.u).map_err(err)?;
            worst_gap = worst_gap.max((norms[i] - nrm).abs());
        }
    }
    if detected < 19 {
        fails.push(format!(
            "non_einstein_diag: only {detected}/20 geodesics exceeded 1e-3"
        ));
    }
    if worst_gap >= 1e-5 {
        fails.push(format!(
            "non_einstein_diag: flow residual vs eigencheck gap {worst_gap:.3e}"
        ));
    }

    verdict(
        fails,
        format!(
            "60 einstein geodesics max residual {worst_einstein:.3e}; \
             {detected}/20 detections off-einstein, eigencheck gap {worst_gap:.3e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Conformal invariance of integrated circles under g -> Omega^2 g.
// ---------------------------------------------------------------------------

fn circle_conformal_invariance(seed: u64) -> Result<(bool, String), String> {
    let mut r = rng(seed);
    let mut fails = Vec::new();
    let mut worst: f64 = 0.0;

    for k in 0..10 {
        let m = if k % 2 == 0 {
            metric::flat(3)
        } else {
            metric::sphere(3)
        };
        let x0 = random_point(&mut r, 3, 0.2);
        let u0 = random_unit_tangent(&m, &x0, &mut r)?;
        let g = m.at(x0.as_slice()).map_err(err)?;
        let mut c0 = DVector::from_fn(3, |_, _| std_normal(&mut r));
        let along = (u0.transpose() * &g * &c0)[(0, 0)];
        c0 -= &u0 * along;
        let c_norm = (c0.transpose() * &g * &c0)[(0, 0)].sqrt();
        c0 *= 0.8 / c_norm;

        let omega = random_factor(&mut r, 3);
        let base = conformal_circle_integrate(&m, &x0, &u0, &c0, 1.0, 1e-3).map_err(err)?;

        let hat_metric = conformal_rescale(&m, &omega);
        let (u_hat, c_hat) = rescaled_initial_data(&m, &omega, &x0, &u0, &c0).map_err(err)?;
        // Match the arcs: the base curve's length in the rescaled metric is
        // the parameter span the rescaled run must cover. The step divides
        // that span evenly, otherwise the final sample lands up to half a
        // step away from the matched endpoint.
        let hat_arc = rescaled_length(&m, &omega, &base).map_err(err)?;
        let hat =
            conformal_circle_integrate(&hat_metric, &x0, &u_hat, &c_hat, hat_arc, hat_arc / 1000.0)
                .map_err(err)?;

        let base_points: Vec<DVector<f64>> = base.states.iter().map(|s| s.x.clone()).collect();
        let hat_points: Vec<DVector<f64>> = hat.states.iter().map(|s| s.x.clone()).collect();
        let d = hausdorff_distance(&base_points, &hat_points);
        worst = worst.max(d);
        if d >= 1e-5 {
            fails.push(format!("pair {k} ({}): hausdorff {d:.3e}", m.name));
        }
    }

    verdict(
        fails,
        format!("10 rescaled circle pairs, worst hausdorff distance {worst:.3e}"),
    )
}

// ---------------------------------------------------------------------------
// 6. Transport-level defects against the direct flow residual.
// ---------------------------------------------------------------------------

fn transport_defect_crosscheck(seed: u64) -> Result<(bool, String), String> {
    let mut r = rng(seed);
    let mut fails = Vec::new();

    // Generic accelerated curves: the frame-derivative defect must reproduce
    // the flow residual sample by sample.
    let mut worst_gap: f64 = 0.0;
    for k in 0..20 {
        let m = if k % 2 == 0 {
            metric::flat(3)
        } else {
            metric::sphere(3)
        };
        let x0 = random_point(&mut r, 3, 0.15);
        let u0 = random_unit_tangent(&m, &x0, &mut r)?;
        let a = DMatrix::from_fn(3, 3, |_, _| uniform(&mut r, -0.5, 0.5));
        let b = DVector::from_fn(3, |_, _| uniform(&mut r, -0.3, 0.3));
        let force = move |x: &DVector<f64>| &a * x + &b;
        let traj = accelerated_curve(&m, &x0, &u0, force, 0.3, 2e-4).map_err(err)?;
        let defect = appendix_defect(&m, &traj).map_err(err)?;
        let mut checked = 0usize;
        for i in (1..traj.states.len() - 1).step_by(29) {
            let e = cc_residual(&m, &traj, i).map_err(err)?;
            let gap = (&defect[i] - &e).amax();
            worst_gap = worst_gap.max(gap);
            if gap >= 1e-6 {
                fails.push(format!("curve {k} ({}) sample {i}: gap {gap:.3e}", m.name));
                break;
            }
            checked += 1;
        }
        if checked < 40 {
            fails.push(format!("curve {k}: only {checked} samples compared"));
        }
    }

    // Frame-closure defect: silent on Einstein geodesics, loud and equal to
    // the eigencheck off-Einstein.
    let sphere = metric::sphere(3);
    let mut worst_closed: f64 = 0.0;
    for _ in 0..5 {
        let x0 = random_point(&mut r, 3, 0.2);
        let u0 = random_unit_tangent(&sphere, &x0, &mut r)?;
        let traj = geodesic_integrate(&sphere, &x0, &u0, 0.4, 1e-3).map_err(err)?;
        let worst = closure_defect(&sphere, &traj)
            .map_err(err)?
            .into_iter()
            .fold(0.0, f64::max);
        worst_closed = worst_closed.max(worst);
        if worst >= 1e-6 {
            fails.push(format!("sphere closure defect {worst:.3e}"));
        }
    }

    let ne = metric::non_einstein_diag(4);
    let mut worst_closure_gap: f64 = 0.0;
    for j in 0..5 {
        let mut x0 = random_point(&mut r, 4, 0.3);
        x0[0] += 1.0;
        let u0 = random_unit_tangent(&ne, &x0, &mut r)?;
        let traj = geodesic_integrate(&ne, &x0, &u0, 0.2, 1e-3).map_err(err)?;
        let defects = closure_defect(&ne, &traj).map_err(err)?;
        let mut largest: f64 = 0.0;
        for (i, s) in traj.states.iter().enumerate().skip(1) {
            if i + 1 >= traj.states.len() {
                break;
            }
            let (_, nrm) = eigencheck(&ne, &s.x, &s.u).map_err(err)?;
            worst_closure_gap = worst_closure_gap.max((defects[i] - nrm).abs());
            largest = largest.max(defects[i]);
        }
        if largest <= 1e-3 {
            fails.push(format!("off-einstein geodesic {j}: defect {largest:.3e}"));
        }
    }
    if worst_closure_gap >= 1e-5 {
        fails.push(format!(
            "closure defect vs eigencheck gap {worst_closure_gap:.3e}"
        ));
    }

    verdict(
        fails,
        format!(
            "20 forced curves, defect vs residual gap {worst_gap:.3e}; \
             einstein closure {worst_closed:.3e}, off-einstein eigencheck gap {worst_closure_gap:.3e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Rescaling a circle into a geodesic.
// ---------------------------------------------------------------------------

fn circle_rescaling_construction() -> Result<(bool, String), String> {
    let count = 4096;
    let states: Vec<CurveState> = (0..count)
        .map(|i| {
            let s = std::f64::consts::TAU * i as f64 / count as f64;
            CurveState {
                t: s,
                x: DVector::from_vec(vec![s.cos() - 1.0, s.sin()]),
                u: DVector::from_vec(vec![-s.sin(), s.cos()]),
                c: DVector::from_vec(vec![-s.cos(), -s.sin()]),
            }
        })
        .collect();
    let omega = rescale_to_geodesic(&states, &TubeOptions::default()).map_err(err)?;
    let hat = conformal_rescale(&metric::flat(2), &omega);
    let mut worst: f64 = 0.0;
    for j in 0..41 {
        let s = 0.05 + std::f64::consts::TAU * j as f64 / 41.0;
        let p = [s.cos() - 1.0, s.sin()];
        let u = DVector::from_vec(vec![-s.sin(), s.cos()]);
        let du_ds = DVector::from_vec(vec![-s.cos(), -s.sin()]);
        let gamma = christoffel(&hat, &p).map_err(err)?;
        let acc = DVector::from_fn(2, |b, _| {
            du_ds[b] + (u.transpose() * &gamma[b] * &u)[(0, 0)]
        });
        worst = worst.max(acc.norm());
    }
    if worst < 1e-5 {
        Ok((
            true,
            format!("unit circle becomes a geodesic, worst rescaled acceleration {worst:.3e}"),
        ))
    } else {
        Ok((false, format!("rescaled acceleration {worst:.3e} >= 1e-5")))
    }
}

// ---------------------------------------------------------------------------
// 8. Pointwise equivalence probes for the split and complex contact checks.
// ---------------------------------------------------------------------------

fn pointwise_probe_battery(seed: u64) -> Result<(bool, String), String> {
    let mut fails = Vec::new();
    let mut probes = 0usize;

    // Split-leg battery: every single-component violation must be witnessed
    // within 200 trial directions, with no false witnesses on curvature data
    // of the isotropic shape.
    for n in [2usize, 3] {
        let mut violations: Vec<(String, LegendreanSample)> = Vec::new();
        {
            let mut with = |name: String, f: &dyn Fn(&mut LegendreanSample)| {
                let mut s = LegendreanSample::zero(n);
                f(&mut s);
                violations.push((name, s));
            };
            for i in 0..n {
                with(format!("T_lo[{i}]"), &|s| s.t_lo[i] = 1.0);
                with(format!("T_hi[{i}]"), &|s| s.t_hi[i] = 1.0);
                for j in i..n {
                    with(format!("A_lo[{i}][{j}]"), &|s| {
                        s.a_lo[(i, j)] = 1.0;
                        s.a_lo[(j, i)] = 1.0;
                    });
                    with(format!("A_hi[{i}][{j}]"), &|s| {
                        s.a_hi[(i, j)] = 1.0;
                        s.a_hi[(j, i)] = 1.0;
                    });
                }
                for j in 0..n {
                    if i != j {
                        with(format!("P[{i}][{j}]"), &|s| s.p[(i, j)] = 1.0);
                    }
                }
            }
            with("P diag".into(), &|s| {
                for i in 0..n {
                    s.p[(i, i)] = 1.0 + i as f64;
                }
            });
        }
        for (idx, (name, s)) in violations.iter().enumerate() {
            probes += 1;
            if !corollary_equivalence_probe(s, 200, seed.wrapping_add(idx as u64)) {
                fails.push(format!("split n={n}: no witness for {name}"));
            }
        }
        for (label, s) in [
            ("zero", LegendreanSample::zero(n)),
            ("einstein", LegendreanSample::einstein(n, 1.5)),
        ] {
            probes += 1;
            if !corollary_equivalence_probe(&s, 200, seed.wrapping_add(7000 + n as u64)) {
                fails.push(format!("split n={n}: false witness on {label} data"));
            }
        }
    }

    // Complex battery with the identity Levi form, real and imaginary parts
    // violated separately; the mixed-trace block stays Hermitian throughout.
    for n in [2usize, 3] {
        let h = DMatrix::<C64>::identity(n, n);
        let mut violations: Vec<(String, CRSample)> = Vec::new();
        {
            let mut with = |name: String, f: &dyn Fn(&mut CRSample)| {
                let mut s = CRSample::zero(h.clone()).expect("identity Levi form");
                f(&mut s);
                violations.push((name, s));
            };
            for i in 0..n {
                with(format!("Re T[{i}]"), &|s| s.t[i] = C64::new(1.0, 0.0));
                with(format!("Im T[{i}]"), &|s| s.t[i] = C64::new(0.0, 1.0));
                for j in i..n {
                    with(format!("Re A[{i}][{j}]"), &|s| {
                        s.a[(i, j)] = C64::new(1.0, 0.0);
                        s.a[(j, i)] = C64::new(1.0, 0.0);
                    });
                    with(format!("Im A[{i}][{j}]"), &|s| {
                        s.a[(i, j)] = C64::new(0.0, 1.0);
                        s.a[(j, i)] = C64::new(0.0, 1.0);
                    });
                }
                for j in (i + 1)..n {
                    with(format!("Re P[{i}][{j}]"), &|s| {
                        s.p[(i, j)] = C64::new(1.0, 0.0);
                        s.p[(j, i)] = C64::new(1.0, 0.0);
                    });
                    with(format!("Im P[{i}][{j}]"), &|s| {
                        s.p[(i, j)] = C64::new(0.0, 1.0);
                        s.p[(j, i)] = C64::new(0.0, -1.0);
                    });
                }
            }
            with("P diag".into(), &|s| {
                for i in 0..n {
                    s.p[(i, i)] = C64::new(1.0 + i as f64, 0.0);
                }
            });
        }
        for (idx, (name, s)) in violations.iter().enumerate() {
            probes += 1;
            if !cr_corollary_probe(s, 200, seed.wrapping_add(3000 + idx as u64)) {
                fails.push(format!("cr n={n}: no witness for {name}"));
            }
        }
        for (label, s) in [
            (
                "zero",
                CRSample::zero(h.clone()).expect("identity Levi form"),
            ),
            (
                "einstein",
                CRSample::einstein(h.clone(), 1.0).expect("identity Levi form"),
            ),
        ] {
            probes += 1;
            if !cr_corollary_probe(&s, 200, seed.wrapping_add(9000 + n as u64)) {
                fails.push(format!("cr n={n}: false witness on {label} data"));
            }
        }
    }

    // Real embedding: a split sample with equal legs, pushed through the
    // complex check with the identity Levi form, must agree exactly.
    let mut r = rng(seed ^ 0xE);
    for n in [2usize, 3] {
        for k in 0..10 {
            let sym = {
                let a = DMatrix::from_fn(n, n, |_, _| std_normal(&mut r));
                (&a + a.transpose()) * 0.5
            };
            let t = DVector::from_fn(n, |_, _| std_normal(&mut r));
            let split = LegendreanSample::new(
                DMatrix::from_fn(n, n, |_, _| std_normal(&mut r)),
                sym.clone(),
                sym,
                t.clone(),
                t,
            )
            .map_err(err)?;
            let embedded = CRSample::from_real(&split).map_err(err)?;
            let d_real = LegendreanDirection::random(n, &mut r);
            let d_cr = CRDirection {
                u: d_real.u.map(|x| C64::new(x, 0.0)),
                v: d_real.v.map(|x| C64::new(x, 0.0)),
            };
            let rep_real = constraint_check(&split, &d_real, EXACT_TOL).map_err(err)?;
            let rep_cr = cr_constraint_check(&embedded, &d_cr, EXACT_TOL).map_err(err)?;
            let drift = (rep_cr.lambda - C64::new(rep_real.lambda, 0.0))
                .norm()
                .max((rep_cr.residuals.k - rep_real.residuals.k).abs())
                .max((rep_cr.residuals.u_leg - rep_real.residuals.u_leg).abs())
                .max((rep_cr.residuals.v_leg - rep_real.residuals.v_leg).abs());
            if rep_real.pass != rep_cr.pass || drift != 0.0 {
                fails.push(format!(
                    "embedding n={n} sample {k}: verdicts {}/{} drift {drift:.3e}",
                    rep_real.pass, rep_cr.pass
                ));
            }
        }
    }

    verdict(
        fails,
        format!("{probes} probes witnessed or confirmed; real embedding bit-exact"),
    )
}

// ---------------------------------------------------------------------------
// 9. Curvature and connection rescaling laws.
// ---------------------------------------------------------------------------

fn rescaling_laws(seed: u64) -> Result<(bool, String), String> {
    let mut r = rng(seed);
    let mut fails = Vec::new();
    let metrics = [
        metric::flat(3),
        metric::sphere(3),
        metric::hyperbolic(3),
        metric::fubini_study(),
        metric::non_einstein_diag(3),
    ];
    let mut worst_schouten: f64 = 0.0;
    let mut worst_connection: f64 = 0.0;
    for k in 0..10 {
        let m = &metrics[k % metrics.len()];
        let n = m.n;
        let omega = random_factor(&mut r, n);
        let x = random_point(&mut r, n, 0.25);

        let schouten = schouten_rescale_residual(m, &omega, x.as_slice()).map_err(err)?;
        worst_schouten = worst_schouten.max(schouten);
        if schouten >= 1e-7 {
            fails.push(format!(
                "pair {k} ({}): schouten law residual {schouten:.3e}",
                m.name
            ));
        }

        let c = DVector::from_fn(n, |_, _| uniform(&mut r, -0.8, 0.8));
        let a = DMatrix::from_fn(n, n, |_, _| uniform(&mut r, -0.6, 0.6));
        let connection = connection_rescale_check(m, &omega, &c, &a, x.as_slice()).map_err(err)?;
        worst_connection = worst_connection.max(connection);
        if connection >= 1e-7 {
            fails.push(format!(
                "pair {k} ({}): connection law residual {connection:.3e}",
                m.name
            ));
        }
    }
    verdict(
        fails,
        format!(
            "10 pairs: worst schouten residual {worst_schouten:.3e}, \
             worst connection residual {worst_connection:.3e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Curvature fixtures for the classified contact and CR models.
// ---------------------------------------------------------------------------

fn fixture_scale_reports(dir: &Path) -> CriterionOutcome {
    enum Kind {
        Split,
        Complex,
    }
    let cases = [
        ("d7_lambda1.json", 1.0, Kind::Split),
        ("n72_lambda0.json", 0.0, Kind::Split),
        ("cr_tube_lambda1.json", 1.0, Kind::Complex),
        ("cr_n72_lambda0.json", 0.0, Kind::Complex),
    ];
    let mut fails = Vec::new();
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for (file, want, kind) in &cases {
        let path = dir.join(file);
        if !path.exists() {
            missing.push(*file);
            continue;
        }
        let outcome = match kind {
            Kind::Split => load_fixture(&path)
                .map_err(err)
                .and_then(|fx| einstein_scale_check(&fx.samples, EXACT_TOL).map_err(err)),
            Kind::Complex => load_cr_fixture(&path)
                .map_err(err)
                .and_then(|fx| cr_einstein_check(&fx.samples, crate::cr::EXACT_TOL).map_err(err)),
        };
        match outcome {
            Ok((true, lambda)) if (lambda - want).abs() < 1e-9 => {
                found.push(format!("{file}: pass, lambda = {lambda}"));
            }
            Ok((pass, lambda)) => {
                fails.push(format!(
                    "{file}: expected (pass, {want}), got ({pass}, {lambda})"
                ));
            }
            Err(e) => fails.push(format!("{file}: {e}")),
        }
    }

    let (passed, mut details) = if !fails.is_empty() {
        (Some(false), fails.join("; "))
    } else if found.is_empty() {
        (
            None,
            format!("skipped: no fixture files in {}", dir.display()),
        )
    } else {
        (Some(true), found.join("; "))
    };
    if passed.is_some() && !missing.is_empty() {
        details.push_str(&format!("; skipped missing: {}", missing.join(", ")));
    }
    CriterionOutcome {
        id: 10,
        name: "fixture scale reports",
        passed,
        details,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_rng_is_deterministic_across_calls() {
        let mut a = rng(7);
        let mut b = rng(7);
        for _ in 0..32 {
            assert_eq!(std_normal(&mut a).to_bits(), std_normal(&mut b).to_bits());
        }
    }

    #[test]
    fn normal_samples_have_plausible_moments() {
        let mut r = rng(11);
        let xs: Vec<f64> = (0..20_000).map(|_| std_normal(&mut r)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn missing_fixture_directory_is_a_skip_not_a_failure() {
        let out = fixture_scale_reports(Path::new("/nonexistent/for/sure"));
        assert_eq!(out.passed, None);
        assert!(out.details.contains("skipped"));
    }
}
