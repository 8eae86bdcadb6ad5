//! Distinguished-curve integration on chart metrics.
//!
//! Two second-order flows live here. Geodesics solve the usual equation
//! `D_t u = 0`. The richer flow is the conformally invariant one for a
//! unit-speed curve with velocity `u` and acceleration one-form `C`:
//!
//! ```text
//! D_t C_b = P_ab u^a - (|C|^2 + P(u, u)) u_b
//! ```
//!
//! with `P` the Schouten tensor. Its residual `E_b` (left side minus right
//! side, measured on any unit-speed curve) is the crate's central numerical
//! observable: it vanishes on solutions, and along geodesics its size
//! measures exactly how far `u` is from being an eigenvector of `P`.

use crate::curvature::{christoffel, curvature};
use crate::metric::{ChartMetric, ConformalFactor, MetricError};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;

/// One record of an integrated curve: time, position, velocity, and the
/// (index-raised) acceleration. Geodesic records carry zero acceleration.
#[derive(Clone, Debug)]
pub struct CurveState {
    pub t: f64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub c: DVector<f64>,
}

/// Worst-case invariant drift accumulated over an integration.
#[derive(Clone, Copy, Debug, Default)]
pub struct DriftStats {
    /// Deviation of `|u|_g` from one.
    pub speed: f64,
    /// Deviation of `g(u, c)` from zero.
    pub orthogonality: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub metric_name: String,
    pub n: usize,
    pub states: Vec<CurveState>,
    /// True when integration stopped early at the chart boundary.
    pub exited_domain: bool,
    pub drift: DriftStats,
}

impl Trajectory {
    pub fn step(&self) -> f64 {
        if self.states.len() < 2 {
            return 0.0;
        }
        self.states[1].t - self.states[0].t
    }

    /// CSV dump: `t, x*, u*, c*, e_norm` with one row per state. The
    /// residual column at the two endpoints repeats the nearest interior
    /// value, since the centered difference does not exist there.
    pub fn to_csv(&self, metric: &ChartMetric) -> Result<String, MetricError> {
        // Surfaces too small for a Schouten tensor still get a CSV; the
        // residual column is explicitly undefined there.
        let norms = match cc_residual_norms(metric, self) {
            Ok(norms) => norms,
            Err(MetricError::DimensionTooSmall { .. }) => vec![f64::NAN; self.states.len()],
            Err(e) => return Err(e),
        };
        let mut out = String::new();
        out.push('t');
        for k in 1..=self.n {
            write!(out, ",x{k}").unwrap();
        }
        for k in 1..=self.n {
            write!(out, ",u{k}").unwrap();
        }
        for k in 1..=self.n {
            write!(out, ",c{k}").unwrap();
        }
        out.push_str(",e_norm\n");
        for (s, e) in self.states.iter().zip(&norms) {
            write!(out, "{:.12e}", s.t).unwrap();
            for v in s.x.iter().chain(s.u.iter()).chain(s.c.iter()) {
                write!(out, ",{v:.12e}").unwrap();
            }
            writeln!(out, ",{e:.6e}").unwrap();
        }
        Ok(out)
    }
}

/// Flattened ODE state: position, velocity, and optionally acceleration.
fn pack_state(x: &DVector<f64>, u: &DVector<f64>, c: Option<&DVector<f64>>) -> DVector<f64> {
    let n = x.len();
    let blocks = if c.is_some() { 3 } else { 2 };
    let mut s = DVector::zeros(blocks * n);
    s.rows_mut(0, n).copy_from(x);
    s.rows_mut(n, n).copy_from(u);
    if let Some(c) = c {
        s.rows_mut(2 * n, n).copy_from(c);
    }
    s
}

fn rk4_step<F>(s: &DVector<f64>, h: f64, f: &F) -> Result<DVector<f64>, MetricError>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, MetricError>,
{
    let k1 = f(s)?;
    let k2 = f(&(s + &k1 * (h / 2.0)))?;
    let k3 = f(&(s + &k2 * (h / 2.0)))?;
    let k4 = f(&(s + &k3 * h))?;
    Ok(s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// `Gamma^b_{ae} u^a w^e` for each upper index `b`.
fn gamma_contract(gamma: &[DMatrix<f64>], u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(u.len(), |b, _| (u.transpose() * &gamma[b] * w)[(0, 0)])
}

fn validate_initial(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    c0: Option<&DVector<f64>>,
    unit_speed: bool,
) -> Result<(), MetricError> {
    let g = metric.at(x0.as_slice())?;
    if u0.len() != metric.n {
        return Err(MetricError::Dimension {
            expected: metric.n,
            got: u0.len(),
        });
    }
    let speed2 = (u0.transpose() * &g * u0)[(0, 0)];
    if unit_speed && (speed2 - 1.0).abs() > 1e-8 {
        return Err(MetricError::BadCurveData(format!(
            "velocity must be unit for this flow (|u|^2 = {speed2:.6})"
        )));
    }
    if let Some(c0) = c0 {
        if c0.len() != metric.n {
            return Err(MetricError::Dimension {
                expected: metric.n,
                got: c0.len(),
            });
        }
        let ortho = (u0.transpose() * &g * c0)[(0, 0)];
        if ortho.abs() > 1e-8 {
            return Err(MetricError::BadCurveData(format!(
                "acceleration must be g-orthogonal to the velocity (g(u,c) = {ortho:.2e})"
            )));
        }
    }
    Ok(())
}

/// Projects raw data onto admissible initial conditions: `u` is normalised
/// to unit `g`-length and `c` loses its component along `u`.
pub fn normalize_initial_data(
    metric: &ChartMetric,
    x: &DVector<f64>,
    u_raw: &DVector<f64>,
    c_raw: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), MetricError> {
    let g = metric.at(x.as_slice())?;
    let speed = (u_raw.transpose() * &g * u_raw)[(0, 0)].sqrt();
    if speed < 1e-12 {
        return Err(MetricError::BadCurveData("vanishing velocity".into()));
    }
    let u = u_raw / speed;
    let along = (u.transpose() * &g * c_raw)[(0, 0)];
    let c = c_raw - &u * along;
    Ok((u, c))
}

/// Per-step controls for the fixed-step integrators.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepControl {
    /// Rescale the velocity to unit `g`-norm after every accepted step.
    /// Off by default so the raw conservation drift stays visible in
    /// `DriftStats`; turn it on for long runs where a pinned speed matters
    /// more than an honest error ledger.
    pub renormalize_speed: bool,
}

fn integrate(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    c0: Option<&DVector<f64>>,
    t_end: f64,
    step: f64,
    control: StepControl,
) -> Result<Trajectory, MetricError> {
    if step <= 0.0 || t_end <= 0.0 {
        return Err(MetricError::BadCurveData(
            "step and duration must be positive".into(),
        ));
    }
    validate_initial(metric, x0, u0, c0, c0.is_some())?;
    let n = metric.n;
    let with_c = c0.is_some();

    let f = |s: &DVector<f64>| -> Result<DVector<f64>, MetricError> {
        let x = s.rows(0, n).into_owned();
        let u = s.rows(n, n).into_owned();
        let gamma = christoffel(metric, x.as_slice())?;
        let mut ds = DVector::zeros(s.len());
        ds.rows_mut(0, n).copy_from(&u);
        if with_c {
            let c = s.rows(2 * n, n).into_owned();
            let pack = curvature(metric, x.as_slice())?;
            let pu = &pack.g_inv * (&pack.schouten * &u);
            let c_low = &pack.g * &c;
            let c2 = c.dot(&c_low);
            let puu = (u.transpose() * &pack.schouten * &u)[(0, 0)];
            let dc = pu - &u * (c2 + puu) - gamma_contract(&gamma, &u, &c);
            ds.rows_mut(n, n)
                .copy_from(&(&c - gamma_contract(&gamma, &u, &u)));
            ds.rows_mut(2 * n, n).copy_from(&dc);
        } else {
            ds.rows_mut(n, n)
                .copy_from(&(-gamma_contract(&gamma, &u, &u)));
        }
        Ok(ds)
    };

    let steps = (t_end / step).round() as usize;
    let mut s = pack_state(x0, u0, c0);
    let mut states = Vec::with_capacity(steps + 1);
    let mut drift = DriftStats::default();
    let mut exited = false;
    let zero = DVector::zeros(n);

    for i in 0..=steps {
        let t = i as f64 * step;
        let x = s.rows(0, n).into_owned();
        let u = s.rows(n, n).into_owned();
        let c = if with_c {
            s.rows(2 * n, n).into_owned()
        } else {
            zero.clone()
        };
        if !x.iter().chain(u.iter()).all(|v| v.is_finite()) {
            return Err(MetricError::NonFinite { t });
        }
        if !metric.domain.contains(x.as_slice()) {
            exited = true;
            break;
        }
        if with_c {
            let g = metric.at(x.as_slice())?;
            let speed2 = (u.transpose() * &g * &u)[(0, 0)];
            drift.speed = drift.speed.max((speed2.sqrt() - 1.0).abs());
            let ortho = (u.transpose() * &g * &c)[(0, 0)];
            drift.orthogonality = drift.orthogonality.max(ortho.abs());
        }
        states.push(CurveState { t, x, u, c });
        if i < steps {
            s = rk4_step(&s, step, &f)?;
            if control.renormalize_speed {
                let x_new = s.rows(0, n).into_owned();
                let u_new = s.rows(n, n).into_owned();
                let g = metric.at(x_new.as_slice())?;
                let speed = (u_new.transpose() * &g * &u_new)[(0, 0)].sqrt();
                if speed > 1e-12 {
                    s.rows_mut(n, n).copy_from(&(u_new / speed));
                }
            }
        }
    }

    if states.len() < 2 {
        return Err(MetricError::BadCurveData(
            "curve left the chart immediately".into(),
        ));
    }
    Ok(Trajectory {
        metric_name: metric.name.clone(),
        n,
        states,
        exited_domain: exited,
        drift,
    })
}

/// Integrates the geodesic through `(x0, u0)` for time `t_end`.
pub fn geodesic_integrate(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    t_end: f64,
    step: f64,
) -> Result<Trajectory, MetricError> {
    integrate(metric, x0, u0, None, t_end, step, StepControl::default())
}

/// `geodesic_integrate` with explicit per-step controls.
pub fn geodesic_integrate_with(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    t_end: f64,
    step: f64,
    control: StepControl,
) -> Result<Trajectory, MetricError> {
    integrate(metric, x0, u0, None, t_end, step, control)
}

/// Integrates a unit-speed curve whose acceleration is prescribed by a
/// force field, projected `g`-orthogonally to the velocity so that the
/// speed stays one. The projected force is recorded as the acceleration
/// data of each state, so downstream residual checks see the curve's
/// actual `∇_u u`.
pub fn accelerated_curve<F>(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    force: F,
    t_end: f64,
    step: f64,
) -> Result<Trajectory, MetricError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if step <= 0.0 || t_end <= 0.0 {
        return Err(MetricError::BadCurveData(
            "step and duration must be positive".into(),
        ));
    }
    validate_initial(metric, x0, u0, None, true)?;
    let n = metric.n;

    let projected = |x: &DVector<f64>, u: &DVector<f64>| -> Result<DVector<f64>, MetricError> {
        let g = metric.at(x.as_slice())?;
        let raw = force(x);
        let along = (u.transpose() * &g * &raw)[(0, 0)];
        let speed2 = (u.transpose() * &g * u)[(0, 0)];
        Ok(raw - u * (along / speed2))
    };
    let f = |s: &DVector<f64>| -> Result<DVector<f64>, MetricError> {
        let x = s.rows(0, n).into_owned();
        let u = s.rows(n, n).into_owned();
        let gamma = christoffel(metric, x.as_slice())?;
        let c = projected(&x, &u)?;
        let mut ds = DVector::zeros(s.len());
        ds.rows_mut(0, n).copy_from(&u);
        ds.rows_mut(n, n)
            .copy_from(&(&c - gamma_contract(&gamma, &u, &u)));
        Ok(ds)
    };

    let steps = (t_end / step).round() as usize;
    let mut s = pack_state(x0, u0, None);
    let mut states = Vec::with_capacity(steps + 1);
    let mut drift = DriftStats::default();
    let mut exited = false;

    for i in 0..=steps {
        let t = i as f64 * step;
        let x = s.rows(0, n).into_owned();
        let u = s.rows(n, n).into_owned();
        if !x.iter().chain(u.iter()).all(|v| v.is_finite()) {
            return Err(MetricError::NonFinite { t });
        }
        if !metric.domain.contains(x.as_slice()) {
            exited = true;
            break;
        }
        let g = metric.at(x.as_slice())?;
        let speed2 = (u.transpose() * &g * &u)[(0, 0)];
        drift.speed = drift.speed.max((speed2.sqrt() - 1.0).abs());
        let c = projected(&x, &u)?;
        states.push(CurveState { t, x, u, c });
        if i < steps {
            s = rk4_step(&s, step, &f)?;
        }
    }

    if states.len() < 2 {
        return Err(MetricError::BadCurveData(
            "curve left the chart immediately".into(),
        ));
    }
    Ok(Trajectory {
        metric_name: metric.name.clone(),
        n,
        states,
        exited_domain: exited,
        drift,
    })
}

/// Integrates the conformally invariant flow from unit-speed data
/// `(x0, u0, c0)` with `g(u0, c0) = 0`.
pub fn conformal_circle_integrate(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    c0: &DVector<f64>,
    t_end: f64,
    step: f64,
) -> Result<Trajectory, MetricError> {
    integrate(
        metric,
        x0,
        u0,
        Some(c0),
        t_end,
        step,
        StepControl::default(),
    )
}

/// `conformal_circle_integrate` with explicit per-step controls.
pub fn conformal_circle_integrate_with(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    c0: &DVector<f64>,
    t_end: f64,
    step: f64,
    control: StepControl,
) -> Result<Trajectory, MetricError> {
    integrate(metric, x0, u0, Some(c0), t_end, step, control)
}

/// Covariant time derivative of the lowered acceleration at interior index
/// `i`, by centered differences of the stored states.
fn covariant_dc_low(
    metric: &ChartMetric,
    states: &[CurveState],
    i: usize,
) -> Result<DVector<f64>, MetricError> {
    let h = states[i + 1].t - states[i].t;
    let low = |j: usize| -> Result<DVector<f64>, MetricError> {
        Ok(metric.at(states[j].x.as_slice())? * &states[j].c)
    };
    let plain = (low(i + 1)? - low(i - 1)?) / (2.0 * h);
    let gamma = christoffel(metric, states[i].x.as_slice())?;
    let c_low_i = low(i)?;
    let u = &states[i].u;
    // (D_t C)_b = dC_b/dt - Gamma^f_{ab} u^a C_f.
    let n = metric.n;
    let correction = DVector::from_fn(n, |b, _| {
        (0..n)
            .map(|f| c_low_i[f] * (u.transpose() * gamma[f].column(b))[(0, 0)])
            .sum::<f64>()
    });
    Ok(plain - correction)
}

/// Residual one-form of the invariant flow equation at interior state `i`.
pub fn cc_residual(
    metric: &ChartMetric,
    traj: &Trajectory,
    i: usize,
) -> Result<DVector<f64>, MetricError> {
    if traj.states.len() < 3 || i == 0 || i + 1 >= traj.states.len() {
        return Err(MetricError::BadCurveData(
            "residual needs an interior state with neighbours".into(),
        ));
    }
    let s = &traj.states[i];
    let pack = curvature(metric, s.x.as_slice())?;
    let dc_low = covariant_dc_low(metric, &traj.states, i)?;
    let c_low = &pack.g * &s.c;
    let c2 = s.c.dot(&c_low);
    let puu = (s.u.transpose() * &pack.schouten * &s.u)[(0, 0)];
    let pu_low = &pack.schouten * &s.u;
    let u_low = &pack.g * &s.u;
    Ok(dc_low - pu_low + u_low * (c2 + puu))
}

/// `g`-dual norms of the residual at every state; endpoints copy their
/// nearest interior neighbour.
pub fn cc_residual_norms(metric: &ChartMetric, traj: &Trajectory) -> Result<Vec<f64>, MetricError> {
    let len = traj.states.len();
    let mut norms = vec![0.0; len];
    #[allow(clippy::needless_range_loop)] // i also indexes traj.states
    for i in 1..len - 1 {
        let e = cc_residual(metric, traj, i)?;
        let ginv = metric.inverse_at(traj.states[i].x.as_slice())?;
        norms[i] = (e.transpose() * &ginv * &e)[(0, 0)].max(0.0).sqrt();
    }
    if len >= 3 {
        norms[0] = norms[1];
        norms[len - 1] = norms[len - 2];
    }
    Ok(norms)
}

pub fn max_cc_residual(metric: &ChartMetric, traj: &Trajectory) -> Result<f64, MetricError> {
    Ok(cc_residual_norms(metric, traj)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// The obstruction to `u` being a Schouten eigenvector at `x`:
/// `D_b = P_ab u^a - P(u,u) u_b`, returned with its `g`-dual norm.
///
/// Along a unit-speed geodesic the flow residual is exactly `-D`, so this
/// is the pointwise quantity that turns geodesics into an Einstein detector.
pub fn eigencheck(
    metric: &ChartMetric,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, f64), MetricError> {
    let pack = curvature(metric, x.as_slice())?;
    let pu = &pack.schouten * u;
    let puu = (u.transpose() * &pack.schouten * u)[(0, 0)];
    let d = pu - (&pack.g * u) * puu;
    let norm = (d.transpose() * &pack.g_inv * &d)[(0, 0)].max(0.0).sqrt();
    Ok((d, norm))
}

/// Defect of the projective-parameter identity on parameterized data, where
/// `u = dx/dt` need not be unit, `c = D_t u`, and `dc = D_t c`:
///
/// ```text
/// u . (D_t c) - [ 3 (u . c)^2 - (3/2) |c|^2 - P(u, u) ]
/// ```
///
/// Zero picks out the preferred parameterizations of the flow's solutions;
/// unit-speed solutions generically score `|c|^2 / 2` instead.
pub fn projective_param_defect(
    metric: &ChartMetric,
    x: &DVector<f64>,
    u: &DVector<f64>,
    c: &DVector<f64>,
    dc: &DVector<f64>,
) -> Result<f64, MetricError> {
    let pack = curvature(metric, x.as_slice())?;
    let udc = (u.transpose() * &pack.g * dc)[(0, 0)];
    let uc = (u.transpose() * &pack.g * c)[(0, 0)];
    let c2 = (c.transpose() * &pack.g * c)[(0, 0)];
    let puu = (u.transpose() * &pack.schouten * u)[(0, 0)];
    Ok(udc - (3.0 * uc * uc - 1.5 * c2 - puu))
}

/// The defect above evaluated along a trajectory's interior states, with
/// `D_t c` from covariant centered differences.
pub fn projective_defect_along(
    metric: &ChartMetric,
    traj: &Trajectory,
) -> Result<Vec<f64>, MetricError> {
    let len = traj.states.len();
    if len < 3 {
        return Err(MetricError::BadCurveData(
            "need at least three states".into(),
        ));
    }
    let mut out = Vec::with_capacity(len - 2);
    for i in 1..len - 1 {
        let s = &traj.states[i];
        let h = traj.states[i + 1].t - traj.states[i].t;
        let gamma = christoffel(metric, s.x.as_slice())?;
        let plain = (&traj.states[i + 1].c - &traj.states[i - 1].c) / (2.0 * h);
        let dc = plain + gamma_contract(&gamma, &s.u, &s.c);
        out.push(projective_param_defect(metric, &s.x, &s.u, &s.c, &dc)?);
    }
    Ok(out)
}

/// Initial data `(u, c)` transformed to the rescaled metric `Omega^2 g`:
/// the velocity scales by `1/Omega` and the lowered acceleration picks up
/// the standard log-gradient correction.
pub fn rescaled_initial_data(
    metric: &ChartMetric,
    omega: &ConformalFactor,
    x: &DVector<f64>,
    u: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), MetricError> {
    let g = metric.at(x.as_slice())?;
    let ginv = metric.inverse_at(x.as_slice())?;
    let (upsilon_raw, _) = omega.log_gradient(x.as_slice())?;
    let upsilon = DVector::from_vec(upsilon_raw);
    let value = omega.value(x.as_slice())?;
    let u_hat = u / value;
    let u_up_dot = u.dot(&upsilon); // U^b Upsilon_b
    let c_low = &g * c;
    let c_hat_low = c_low - &upsilon + (&g * u) * u_up_dot;
    let c_hat = (&ginv * c_hat_low) / (value * value);
    Ok((u_hat, c_hat))
}

/// Curve length in the rescaled metric `Omega^2 g`, by composite Simpson
/// over the stored (uniform) grid; an odd last interval falls back to the
/// trapezoid rule.
pub fn rescaled_length(
    metric: &ChartMetric,
    omega: &ConformalFactor,
    traj: &Trajectory,
) -> Result<f64, MetricError> {
    let states = &traj.states;
    if states.len() < 2 {
        return Err(MetricError::BadCurveData("need at least two states".into()));
    }
    let h = traj.step();
    let mut f = Vec::with_capacity(states.len());
    for s in states {
        let g = metric.at(s.x.as_slice())?;
        let speed = (s.u.transpose() * &g * &s.u)[(0, 0)].max(0.0).sqrt();
        f.push(omega.value(s.x.as_slice())? * speed);
    }
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < f.len() {
        total += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
        i += 2;
    }
    if i + 1 < f.len() {
        total += 0.5 * h * (f[i] + f[i + 1]);
    }
    Ok(total)
}

/// Largest distance from any vertex of `a` to the polyline `b`.
fn directed_polyline_distance(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for p in a {
        let mut best = f64::INFINITY;
        for seg in b.windows(2) {
            let d = point_segment_distance(p, &seg[0], &seg[1]);
            if d < best {
                best = d;
            }
        }
        worst = worst.max(best);
    }
    worst
}

fn point_segment_distance(p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-300 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

/// Symmetric Hausdorff distance between two polylines (coordinate space).
pub fn hausdorff_distance(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    directed_polyline_distance(a, b).max(directed_polyline_distance(b, a))
}

/// Closed-form point of the flat unit-speed circle through the origin with
/// initial velocity `u` and centripetal acceleration `c`.
pub fn flat_unit_circle_point(u: &DVector<f64>, c: &DVector<f64>, s: f64) -> DVector<f64> {
    let k = c.norm();
    let center_dir = c / (k * k);
    &center_dir * (1.0 - (k * s).cos()) + u * ((k * s).sin() / k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{self, DiffMode};
    use approx::assert_relative_eq;

    fn unit(n: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn flat_geodesics_are_straight() {
        let m = metric::flat(3);
        let x0 = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let u0 = unit(3, 1);
        let traj = geodesic_integrate(&m, &x0, &u0, 1.0, 1e-2).unwrap();
        let last = traj.states.last().unwrap();
        assert_relative_eq!(last.x[1], -0.2 + 1.0, epsilon = 1e-12);
        assert!(traj.drift.speed < 1e-12);
        assert!(!traj.exited_domain);
    }

    #[test]
    fn flat_circle_integration_matches_the_closed_form() {
        let m = metric::flat(3);
        let u0 = unit(3, 0);
        let c0 = unit(3, 1) * 2.0;
        let x0 = DVector::zeros(3);
        let t_end = std::f64::consts::TAU / 2.0;
        let traj = conformal_circle_integrate(&m, &x0, &u0, &c0, t_end, 1e-3).unwrap();
        for s in traj.states.iter().step_by(100) {
            let exact = flat_unit_circle_point(&u0, &c0, s.t);
            assert!((&s.x - exact).norm() < 1e-8, "t = {}", s.t);
        }
        assert!(traj.drift.speed < 1e-9);
        assert!(traj.drift.orthogonality < 1e-9);
        assert!(max_cc_residual(&m, &traj).unwrap() < 1e-5);
    }

    #[test]
    fn sphere_great_circles_solve_the_flow() {
        // On the round sphere P = g/2, so unit-speed geodesics satisfy the
        // flow equation with c = 0: both integrators agree.
        let m = metric::sphere(3);
        let x0 = DVector::from_vec(vec![0.2, 0.0, -0.1]);
        let g = m.at(x0.as_slice()).unwrap();
        let mut u0 = unit(3, 2);
        let speed = (u0.transpose() * &g * &u0)[(0, 0)].sqrt();
        u0 /= speed;
        let c0 = DVector::zeros(3);
        let geo = geodesic_integrate(&m, &x0, &u0, 1.5, 1e-3).unwrap();
        let circ = conformal_circle_integrate(&m, &x0, &u0, &c0, 1.5, 1e-3).unwrap();
        let dx = (&geo.states.last().unwrap().x - &circ.states.last().unwrap().x).norm();
        assert!(dx < 1e-9, "endpoints differ by {dx:.3e}");
        assert!(max_cc_residual(&m, &circ).unwrap() < 1e-6);
    }

    #[test]
    fn geodesic_residual_matches_the_eigencheck_norm() {
        let m = metric::non_einstein_diag(4);
        let x0 = DVector::from_vec(vec![0.9, 0.1, -0.3, 0.2]);
        let g = m.at(x0.as_slice()).unwrap();
        let mut u0 = DVector::from_vec(vec![0.5, 1.0, -0.2, 0.4]);
        let speed = (u0.transpose() * &g * &u0)[(0, 0)].sqrt();
        u0 /= speed;
        let traj = geodesic_integrate(&m, &x0, &u0, 0.4, 1e-3).unwrap();
        // Geodesics have c = 0, so the centered difference sees exactly
        // -eigencheck at each interior state.
        for i in (1..traj.states.len() - 1).step_by(37) {
            let e = cc_residual(&m, &traj, i).unwrap();
            let s = &traj.states[i];
            let (d, dn) = eigencheck(&m, &s.x, &s.u).unwrap();
            assert!((e.clone() + d).norm() < 1e-6 * (1.0 + dn));
            let ginv = m.inverse_at(s.x.as_slice()).unwrap();
            let en = (e.transpose() * &ginv * &e)[(0, 0)].sqrt();
            assert_relative_eq!(en, dn, epsilon = 1e-6);
        }
    }

    #[test]
    fn invalid_initial_data_is_rejected() {
        let m = metric::flat(3);
        let x0 = DVector::zeros(3);
        let bad_u = unit(3, 0) * 2.0;
        assert!(matches!(
            conformal_circle_integrate(&m, &x0, &bad_u, &unit(3, 1), 1.0, 1e-2),
            Err(MetricError::BadCurveData(_))
        ));
        let u = unit(3, 0);
        assert!(conformal_circle_integrate(&m, &x0, &u, &u, 1.0, 1e-2).is_err());
        assert!(geodesic_integrate(&m, &x0, &u, -1.0, 1e-2).is_err());
    }

    #[test]
    fn domain_exit_is_flagged_not_fatal() {
        let m = metric::hyperbolic(3);
        let x0 = DVector::zeros(3);
        let u0 = unit(3, 0) * 0.5; // unit for g = 4 delta at the origin
        let traj = geodesic_integrate(&m, &x0, &u0, 50.0, 1e-2).unwrap();
        assert!(traj.exited_domain);
        assert!(!traj.states.is_empty());
    }

    #[test]
    fn normalization_produces_admissible_data() {
        let m = metric::sphere(4);
        let x = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.05]);
        let (u, c) = normalize_initial_data(
            &m,
            &x,
            &DVector::from_vec(vec![1.0, 2.0, -0.5, 0.3]),
            &DVector::from_vec(vec![0.4, 0.4, 1.0, -2.0]),
        )
        .unwrap();
        let g = m.at(x.as_slice()).unwrap();
        assert_relative_eq!((u.transpose() * &g * &u)[(0, 0)], 1.0, epsilon = 1e-12);
        assert!((u.transpose() * &g * &c)[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn csv_has_header_and_residual_column() {
        let m = metric::flat(2);
        let x0 = DVector::zeros(2);
        let u0 = unit(2, 0);
        let traj = geodesic_integrate(&m, &x0, &u0, 0.1, 1e-2).unwrap();
        let csv = traj.to_csv(&m).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,u1,u2,c1,c2,e_norm");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 8);
        assert_eq!(csv.lines().count(), traj.states.len() + 1);
    }

    #[test]
    fn projective_defect_vanishes_on_the_symmetric_parameterization() {
        // Flat circle swept by the rational parameterization: at t = 0 the
        // data is u = 2 u0, c = 4 c0, dc = -12 |c0|^2 u0, and the defect
        // cancels exactly; unit-speed data instead leaves |c|^2 / 2.
        let m = metric::flat(3);
        let x = DVector::zeros(3);
        let u0 = unit(3, 0);
        let c0 = unit(3, 1) * 0.8;
        let k2 = c0.norm_squared();
        let defect =
            projective_param_defect(&m, &x, &(&u0 * 2.0), &(&c0 * 4.0), &(&u0 * (-12.0 * k2)))
                .unwrap();
        assert!(defect.abs() < 1e-12, "defect {defect:.3e}");

        let arc = projective_param_defect(&m, &x, &u0, &c0, &(&u0 * (-k2))).unwrap();
        assert_relative_eq!(arc, k2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_geodesics_have_constant_projective_defect_half() {
        let m = metric::sphere(3);
        let x0 = DVector::from_vec(vec![0.1, 0.2, 0.0]);
        let g = m.at(x0.as_slice()).unwrap();
        let mut u0 = unit(3, 0);
        u0 /= (u0.transpose() * &g * &u0)[(0, 0)].sqrt();
        let traj = geodesic_integrate(&m, &x0, &u0, 1.0, 1e-3).unwrap();
        for d in projective_defect_along(&m, &traj)
            .unwrap()
            .iter()
            .step_by(50)
        {
            assert_relative_eq!(*d, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn hausdorff_of_shifted_polylines() {
        let a: Vec<DVector<f64>> = (0..50)
            .map(|i| DVector::from_vec(vec![i as f64 / 10.0, 0.0]))
            .collect();
        let b: Vec<DVector<f64>> = (0..50)
            .map(|i| DVector::from_vec(vec![i as f64 / 10.0, 0.25]))
            .collect();
        assert_relative_eq!(hausdorff_distance(&a, &b), 0.25, epsilon = 1e-12);
        // Denser resampling of the same segment is close to it.
        let c: Vec<DVector<f64>> = (0..500)
            .map(|i| DVector::from_vec(vec![4.9 * i as f64 / 499.0, 0.0]))
            .collect();
        assert!(hausdorff_distance(&a, &c) < 1e-12);
    }

    #[test]
    fn length_under_constant_factor_scales() {
        let m = metric::flat(2);
        let omega = ConformalFactor::constant(3.0, 2);
        let x0 = DVector::zeros(2);
        let traj = geodesic_integrate(&m, &x0, &unit(2, 0), 1.0, 1e-2).unwrap();
        let l = rescaled_length(&m, &omega, &traj).unwrap();
        assert_relative_eq!(l, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn forced_curves_keep_unit_speed_and_record_their_acceleration() {
        let m = metric::sphere(3);
        let x0 = DVector::from_vec(vec![0.2, -0.1, 0.05]);
        let g = m.at(x0.as_slice()).unwrap();
        let mut u0 = unit(3, 0);
        u0 /= (u0.transpose() * &g * &u0)[(0, 0)].sqrt();
        let force = |x: &DVector<f64>| {
            DVector::from_vec(vec![0.3 * x[1] + 0.1, -0.2 * x[0], 0.4 * x[2] - 0.05])
        };
        let traj = accelerated_curve(&m, &x0, &u0, force, 0.8, 1e-3).unwrap();
        assert!(
            traj.drift.speed < 1e-9,
            "speed drift {:.3e}",
            traj.drift.speed
        );
        for s in traj.states.iter().step_by(100) {
            let g = m.at(s.x.as_slice()).unwrap();
            let ortho = (s.u.transpose() * &g * &s.c)[(0, 0)];
            assert!(ortho.abs() < 1e-12);
        }
        // With the force switched off the curve is the geodesic.
        let quiet = accelerated_curve(&m, &x0, &u0, |_| DVector::zeros(3), 0.8, 1e-3).unwrap();
        let geo = geodesic_integrate(&m, &x0, &u0, 0.8, 1e-3).unwrap();
        let dx = (&quiet.states.last().unwrap().x - &geo.states.last().unwrap().x).norm();
        assert!(dx < 1e-12);
    }

    #[test]
    fn finite_difference_metric_integrates_consistently() {
        let dual = metric::sphere(3);
        let fd = metric::sphere(3).with_diff(DiffMode::FiniteDifference { h: 1e-5 });
        let x0 = DVector::from_vec(vec![0.1, -0.05, 0.2]);
        let g = dual.at(x0.as_slice()).unwrap();
        let mut u0 = unit(3, 1);
        u0 /= (u0.transpose() * &g * &u0)[(0, 0)].sqrt();
        let a = geodesic_integrate(&dual, &x0, &u0, 0.5, 1e-2).unwrap();
        let b = geodesic_integrate(&fd, &x0, &u0, 0.5, 1e-2).unwrap();
        let dx = (&a.states.last().unwrap().x - &b.states.last().unwrap().x).norm();
        assert!(dx < 1e-7, "routes differ by {dx:.3e}");
    }

    #[test]
    fn renormalization_pins_the_speed_without_bending_the_track() {
        let m = metric::flat(3);
        let x0 = DVector::zeros(3);
        let u0 = unit(3, 0);
        let c0 = unit(3, 1);
        let t_end = std::f64::consts::TAU;
        let coarse = 0.05;
        let plain = conformal_circle_integrate(&m, &x0, &u0, &c0, t_end, coarse).unwrap();
        let pinned = conformal_circle_integrate_with(
            &m,
            &x0,
            &u0,
            &c0,
            t_end,
            coarse,
            StepControl {
                renormalize_speed: true,
            },
        )
        .unwrap();
        assert!(
            pinned.drift.speed < 1e-13,
            "pinned {:.3e}",
            pinned.drift.speed
        );
        assert!(plain.drift.speed >= pinned.drift.speed);
        let worst_gap = |traj: &Trajectory| {
            traj.states
                .iter()
                .map(|s| (&s.x - flat_unit_circle_point(&u0, &c0, s.t)).norm())
                .fold(0.0, f64::max)
        };
        // Projecting onto the speed constraint trades a little phase error
        // for the drift; both runs stay at the integrator's own order.
        let plain_gap = worst_gap(&plain);
        let pinned_gap = worst_gap(&pinned);
        assert!(
            pinned_gap < 10.0 * plain_gap + 1e-9,
            "pinning bent the track: {pinned_gap:.3e} vs {plain_gap:.3e}"
        );
    }
}
