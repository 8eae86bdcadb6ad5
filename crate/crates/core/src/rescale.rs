//! Building a metric in which a given flat-space curve is a geodesic.
//!
//! Any embedded curve with unit tangent `u` and acceleration `c` becomes a
//! geodesic of `e^{2f} g` as soon as `grad f = c` along the curve (plus an
//! arbitrary tangential component). The factor built here realises that in
//! tubular coordinates: for a query point `q` project to the curve, getting
//! a foot parameter `s` and normal offset `nu`, and set
//!
//! ```text
//! f(q) = [ integral of (c . u) up to s ] + c(s) . nu
//! ```
//!
//! so that on the curve the tangential derivative is `c . u` and the normal
//! derivative is `c(s)`. A quintic cutoff in `|nu|^2` turns the tube
//! function smoothly off away from the curve, standing in for the arbitrary
//! partition-of-unity extension.
//!
//! Everything is driven by the curve's samples: the foot point comes from a
//! local second-order model around the nearest sample (a short Newton
//! iteration carried out in jet arithmetic, so the factor stays twice
//! differentiable for the curvature machinery).

use crate::curves::CurveState;
use crate::jet::Jet2;
use crate::metric::{ConformalFactor, MetricError};
use nalgebra::DVector;
use std::sync::Arc;

/// Options for the tube construction.
#[derive(Clone, Debug, Default)]
pub struct TubeOptions {
    /// Tube radius; the cutoff is identically one inside it and fades to
    /// zero at twice the radius. Defaults to 10% of the curve diameter.
    pub radius: Option<f64>,
}

struct TubeData {
    n: usize,
    x: Vec<DVector<f64>>,
    u: Vec<DVector<f64>>,
    c: Vec<DVector<f64>>,
    /// Arc-length slope of `c` at each sample.
    dc: Vec<DVector<f64>>,
    /// Prefix integral of `c . u` (zero for honest unit-speed data, kept
    /// for generality) and its local slope.
    pref: Vec<f64>,
    cu: Vec<f64>,
    r0: f64,
}

fn flat_dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b)
}

/// Builds `Omega = e^f` from samples of an embedded curve in a flat chart
/// (dimension 2 or 3), such that the curve is a geodesic of `Omega^2 g`.
pub fn rescale_to_geodesic(
    states: &[CurveState],
    opts: &TubeOptions,
) -> Result<ConformalFactor, MetricError> {
    if states.len() < 16 {
        return Err(MetricError::BadCurveData(
            "tube construction needs at least 16 samples".into(),
        ));
    }
    let n = states[0].x.len();
    if n != 2 && n != 3 {
        return Err(MetricError::BadCurveData(
            "tube construction works in flat charts of dimension 2 or 3".into(),
        ));
    }
    let count = states.len();
    let mut x = Vec::with_capacity(count);
    let mut u = Vec::with_capacity(count);
    let mut c = Vec::with_capacity(count);
    for s in states {
        if s.x.len() != n || s.u.len() != n || s.c.len() != n {
            return Err(MetricError::BadCurveData("inconsistent dimensions".into()));
        }
        if (s.u.norm() - 1.0).abs() > 1e-6 {
            return Err(MetricError::BadCurveData(
                "tangents must be unit in the flat chart".into(),
            ));
        }
        x.push(s.x.clone());
        u.push(s.u.clone());
        c.push(s.c.clone());
    }

    // Chord arc length, mean spacing, and closure detection.
    let mut s_arc = vec![0.0; count];
    for i in 1..count {
        s_arc[i] = s_arc[i - 1] + (&x[i] - &x[i - 1]).norm();
    }
    let mean_h = s_arc[count - 1] / (count - 1) as f64;
    if mean_h <= 0.0 {
        return Err(MetricError::BadCurveData("degenerate samples".into()));
    }
    let closed = (&x[count - 1] - &x[0]).norm() < 2.0 * mean_h;

    // Curve diameter from a decimated scan, for the default tube radius.
    let stride = (count / 256).max(1);
    let picked: Vec<usize> = (0..count).step_by(stride).collect();
    let mut diameter: f64 = 0.0;
    for (a, &i) in picked.iter().enumerate() {
        for &j in picked.iter().skip(a + 1) {
            diameter = diameter.max((&x[i] - &x[j]).norm());
        }
    }
    let r0 = match opts.radius {
        Some(r) if r > 0.0 => r,
        Some(_) => {
            return Err(MetricError::BadCurveData(
                "tube radius must be positive".into(),
            ))
        }
        None => 0.1 * diameter,
    };
    if r0 <= 0.0 {
        return Err(MetricError::BadCurveData("curve has zero diameter".into()));
    }

    // Reject self-approach: two points far apart along the curve but within
    // the cutoff's support make the foot point ambiguous, and an actual
    // crossing is the extreme case. "Far apart" means an arc gap of at
    // least ten radii: the chord of an arc that long is above the spatial
    // threshold whenever the curvature radius stays above a few tube radii,
    // so a tube thin enough to be well defined never trips this check.
    let window_arc = (10.0 * r0).max(4.0 * stride as f64 * mean_h);
    let total_arc = s_arc[count - 1];
    for (a, &i) in picked.iter().enumerate() {
        for &j in picked.iter().skip(a + 1) {
            let along = s_arc[j] - s_arc[i];
            let gap = if closed {
                along.min(total_arc - along)
            } else {
                along
            };
            if gap >= window_arc && (&x[i] - &x[j]).norm() < 2.5 * r0 {
                return Err(MetricError::BadCurveData(
                    "curve approaches itself within the tube; rejecting the construction".into(),
                ));
            }
        }
    }

    // Arc-length slope of c and the prefix integral of c . u.
    let cu: Vec<f64> = (0..count).map(|i| flat_dot(&c[i], &u[i])).collect();
    let mut pref = vec![0.0; count];
    for i in 1..count {
        pref[i] = pref[i - 1] + 0.5 * (cu[i] + cu[i - 1]) * (s_arc[i] - s_arc[i - 1]);
    }
    let mut dc = Vec::with_capacity(count);
    for i in 0..count {
        let (lo, hi, ds) = if closed {
            let lo = (i + count - 1) % count;
            let hi = (i + 1) % count;
            // Wrapping steps are one sample each way.
            (lo, hi, 2.0 * mean_h)
        } else if i == 0 {
            (0, 1, s_arc[1] - s_arc[0])
        } else if i == count - 1 {
            (count - 2, count - 1, s_arc[count - 1] - s_arc[count - 2])
        } else {
            (i - 1, i + 1, s_arc[i + 1] - s_arc[i - 1])
        };
        dc.push((&c[hi] - &c[lo]) / ds);
    }

    let data = Arc::new(TubeData {
        n,
        x,
        u,
        c,
        dc,
        pref,
        cu,
        r0,
    });
    let name = format!("tube_r{:.3}", r0);
    let eval_data = Arc::clone(&data);
    Ok(ConformalFactor::new(
        &name,
        Arc::new(move |q: &[Jet2]| tube_factor(&eval_data, q)),
    ))
}

/// One evaluation of `Omega = e^f` in jet arithmetic.
fn tube_factor(data: &TubeData, q: &[Jet2]) -> Jet2 {
    let n = data.n;
    let dim = q[0].grad.len();
    let qv: Vec<f64> = q.iter().map(|j| j.val).collect();

    // Nearest sample on plain values; the index choice is locally constant.
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, p) in data.x.iter().enumerate() {
        let mut d2 = 0.0;
        for k in 0..n {
            let d = qv[k] - p[k];
            d2 += d * d;
        }
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    let i = best;

    // Quick reject far from the curve: the cutoff support ends at 2 r0.
    if best_d2.sqrt() > 2.0 * data.r0 + 1.0 {
        return Jet2::constant(1.0, dim);
    }

    let cst = |v: f64| Jet2::constant(v, dim);
    let xi: Vec<Jet2> = (0..n).map(|k| cst(data.x[i][k])).collect();
    let ui: Vec<Jet2> = (0..n).map(|k| cst(data.u[i][k])).collect();
    let ci: Vec<Jet2> = (0..n).map(|k| cst(data.c[i][k])).collect();
    let dci: Vec<Jet2> = (0..n).map(|k| cst(data.dc[i][k])).collect();

    // Local second-order curve model m(s) = x + s u + s^2/2 c around the
    // sample; project q by Newton on (q - m(s)) . m'(s) = 0. The start is
    // the tangential offset, already first-order correct. Inside the tube
    // (radius below the curvature scale) the iteration is a contraction;
    // the derivative guard only matters for degenerate oversized tubes.
    let mut sigma = cst(0.0);
    for k in 0..n {
        sigma = &sigma + &(&(&q[k] - &xi[k]) * &ui[k]);
    }
    for _ in 0..4 {
        let mut phi = cst(0.0);
        let mut dphi = cst(0.0);
        let half_s2 = &(&sigma * &sigma) * 0.5;
        for k in 0..n {
            let m_k = &(&xi[k] + &(&ui[k] * &sigma)) + &(&ci[k] * &half_s2);
            let dm_k = &ui[k] + &(&ci[k] * &sigma);
            let r_k = &q[k] - &m_k;
            phi = &phi + &(&r_k * &dm_k);
            dphi = &dphi + &(&(&r_k * &ci[k]) - &(&dm_k * &dm_k));
        }
        if dphi.val.abs() < 1e-12 {
            break;
        }
        sigma = &sigma - &(&phi / &dphi);
    }

    // Foot point, normal offset, and the first-order transported data.
    let half_s2 = &(&sigma * &sigma) * 0.5;
    let mut nu2 = cst(0.0);
    let mut c_dot_nu = cst(0.0);
    for k in 0..n {
        let m_k = &(&xi[k] + &(&ui[k] * &sigma)) + &(&ci[k] * &half_s2);
        let nu_k = &q[k] - &m_k;
        let c_k = &ci[k] + &(&dci[k] * &sigma);
        nu2 = &nu2 + &(&nu_k * &nu_k);
        c_dot_nu = &c_dot_nu + &(&c_k * &nu_k);
    }

    // Quintic cutoff in t = |nu|^2 / r0^2: identically 1 for t <= 1,
    // identically 0 for t >= 4, C^2 across the joins. Outside the support
    // the factor is exactly one, with no dependence on the tube quantities.
    let t = &nu2 * (1.0 / (data.r0 * data.r0));
    if t.val >= 4.0 {
        return cst(1.0);
    }
    let chi = if t.val <= 1.0 {
        cst(1.0)
    } else {
        let y = &(&t + (-1.0)) * (1.0 / 3.0);
        let y3 = &(&y * &y) * &y;
        let poly = &(&(&(&y * 6.0) + (-15.0)) * &y) + 10.0;
        &cst(1.0) - &(&y3 * &poly)
    };

    let pref = &cst(data.pref[i]) + &(&sigma * data.cu[i]);
    let f_raw = &pref + &c_dot_nu;
    (&f_raw * &chi).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::christoffel;
    use crate::metric::{self, conformal_rescale};

    /// Unit-circle samples in the plane: x = (cos s - 1, sin s) so the
    /// curve passes through the origin with velocity e2.
    fn circle_states(count: usize) -> Vec<CurveState> {
        (0..count)
            .map(|i| {
                let s = std::f64::consts::TAU * i as f64 / count as f64;
                CurveState {
                    t: s,
                    x: DVector::from_vec(vec![s.cos() - 1.0, s.sin()]),
                    u: DVector::from_vec(vec![-s.sin(), s.cos()]),
                    c: DVector::from_vec(vec![-s.cos(), -s.sin()]),
                }
            })
            .collect()
    }

    #[test]
    fn straight_line_gives_the_trivial_factor() {
        let states: Vec<CurveState> = (0..64)
            .map(|i| {
                let t = i as f64 / 10.0;
                CurveState {
                    t,
                    x: DVector::from_vec(vec![t, 0.0]),
                    u: DVector::from_vec(vec![1.0, 0.0]),
                    c: DVector::zeros(2),
                }
            })
            .collect();
        let omega = rescale_to_geodesic(&states, &TubeOptions::default()).unwrap();
        for p in [[0.5, 0.0], [1.0, 0.2], [3.0, -0.4], [2.2, 5.0]] {
            assert!((omega.value(&p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_gradient_reproduces_the_acceleration_on_the_circle() {
        let states = circle_states(8192);
        let omega = rescale_to_geodesic(&states, &TubeOptions::default()).unwrap();
        // Probe at parameters incommensurate with the sample grid.
        for j in 0..17 {
            let s = 0.37 + j as f64 * 0.35;
            let p = [s.cos() - 1.0, s.sin()];
            let c_true = [-s.cos(), -s.sin()];
            let (grad, _) = omega.log_gradient(&p).unwrap();
            let err = ((grad[0] - c_true[0]).powi(2) + (grad[1] - c_true[1]).powi(2)).sqrt();
            assert!(err < 1e-6, "s = {s}: gradient error {err:.3e}");
            assert!((omega.value(&p).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn circle_becomes_a_geodesic_of_the_rescaled_metric() {
        let states = circle_states(4096);
        let omega = rescale_to_geodesic(&states, &TubeOptions::default()).unwrap();
        let hat = conformal_rescale(&metric::flat(2), &omega);
        let mut worst: f64 = 0.0;
        for j in 0..41 {
            let s = 0.05 + std::f64::consts::TAU * j as f64 / 41.0;
            let p = [s.cos() - 1.0, s.sin()];
            let u = DVector::from_vec(vec![-s.sin(), s.cos()]);
            let du_ds = DVector::from_vec(vec![-s.cos(), -s.sin()]);
            let gamma = christoffel(&hat, &p).unwrap();
            let acc = DVector::from_fn(2, |b, _| {
                du_ds[b] + (u.transpose() * &gamma[b] * &u)[(0, 0)]
            });
            worst = worst.max(acc.norm());
        }
        assert!(worst < 1e-5, "worst rescaled acceleration {worst:.3e}");
    }

    #[test]
    fn factor_is_one_outside_the_tube() {
        let states = circle_states(1024);
        let omega = rescale_to_geodesic(&states, &TubeOptions { radius: Some(0.15) }).unwrap();
        // Circle center (-1, 0): distance 1 from the curve, far past 2 r0.
        assert!((omega.value(&[-1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((omega.value(&[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_approaching_curves_are_rejected() {
        // A hairpin: out along y = 0.02 and back along y = -0.02, joined by
        // a half-circle; the two legs are far apart in arc but close in
        // space compared to any reasonable tube.
        let mut states = Vec::new();
        let gap = 0.02;
        for i in 0..200 {
            let t = i as f64 / 50.0;
            states.push(CurveState {
                t,
                x: DVector::from_vec(vec![t, gap]),
                u: DVector::from_vec(vec![1.0, 0.0]),
                c: DVector::zeros(2),
            });
        }
        for i in 0..200 {
            let t = i as f64 / 50.0;
            states.push(CurveState {
                t: 4.0 + t,
                x: DVector::from_vec(vec![4.0 - t, -gap]),
                u: DVector::from_vec(vec![-1.0, 0.0]),
                c: DVector::zeros(2),
            });
        }
        let err = rescale_to_geodesic(&states, &TubeOptions { radius: Some(0.1) });
        assert!(matches!(err, Err(MetricError::BadCurveData(_))));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let few = circle_states(8);
        assert!(rescale_to_geodesic(&few, &TubeOptions::default()).is_err());

        let mut not_unit = circle_states(64);
        for s in &mut not_unit {
            s.u *= 2.0;
        }
        assert!(rescale_to_geodesic(&not_unit, &TubeOptions::default()).is_err());

        let states = circle_states(64);
        assert!(rescale_to_geodesic(&states, &TubeOptions { radius: Some(-1.0) }).is_err());
    }
}
