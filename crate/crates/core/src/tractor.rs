//! Standard tractors, their metric-preserving endomorphisms, and the
//! directional calculus along curves that turns "the model subbundle is
//! preserved by the connection" into computable per-sample defects.
//!
//! Components are always trivialized in the chart metric: a tractor is a
//! triple `(sigma, mu_b, rho)` and the connection along a curve with
//! velocity `u` acts by
//!
//! ```text
//! d (sigma)   (d sigma - u^a mu_a                          )
//! - (mu_b ) = (d mu_b + u_b rho + P_ab u^a sigma           )
//! dt(rho  )   (d rho - u^a P_a^b mu_b                      )
//! ```
//!
//! with `d` the Levi-Civita-coupled derivative of the components and `P`
//! the Schouten tensor of the chart metric.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::curvature::curvature;
use crate::curves::{CurveState, Trajectory};
use crate::metric::{ChartMetric, MetricError};

/// Relative singular-value cutoff for subspace projections.
const SV_EPS: f64 = 1e-12;

/// A standard tractor in the scale of the chart metric: a weight-one
/// scalar, a weight-one covector, and a weight-minus-one scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct Tractor {
    pub sigma: f64,
    pub mu: DVector<f64>,
    pub rho: f64,
}

impl Tractor {
    pub fn new(sigma: f64, mu: DVector<f64>, rho: f64) -> Self {
        Tractor { sigma, mu, rho }
    }

    pub fn zeros(n: usize) -> Self {
        Tractor::new(0.0, DVector::zeros(n), 0.0)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Components as a flat vector `[sigma, mu_1 .. mu_n, rho]`.
    pub fn to_vec(&self) -> DVector<f64> {
        let n = self.n();
        let mut v = DVector::zeros(n + 2);
        v[0] = self.sigma;
        v.rows_mut(1, n).copy_from(&self.mu);
        v[n + 1] = self.rho;
        v
    }

    pub fn from_vec(v: &DVector<f64>) -> Self {
        let n = v.len() - 2;
        Tractor::new(v[0], v.rows(1, n).into_owned(), v[n + 1])
    }

    /// The invariant pairing `sigma rho' + mu^b mu'_b + rho sigma'`; the
    /// middle term raises one index, hence the inverse metric.
    pub fn pair(&self, other: &Tractor, g_inv: &DMatrix<f64>) -> f64 {
        self.sigma * other.rho
            + (self.mu.transpose() * g_inv * &other.mu)[(0, 0)]
            + self.rho * other.sigma
    }

    fn minus(&self, other: &Tractor) -> Tractor {
        Tractor::new(
            self.sigma - other.sigma,
            &self.mu - &other.mu,
            self.rho - other.rho,
        )
    }
}

/// A pairing-preserving endomorphism of the tractor bundle, stored as the
/// parameter block `(X^b, F_bc, lambda, Y_b)` with `X` raised, `F` and `Y`
/// lowered, and `F` skew.
#[derive(Clone, Debug)]
pub struct TractorEndo {
    /// `X^b`, raised.
    pub x: DVector<f64>,
    /// `F_bc`, lowered and skew.
    pub f: DMatrix<f64>,
    pub lambda: f64,
    /// `Y_b`, lowered.
    pub y: DVector<f64>,
}

impl TractorEndo {
    pub fn new(x: DVector<f64>, f: DMatrix<f64>, lambda: f64, y: DVector<f64>) -> Self {
        TractorEndo { x, f, lambda, y }
    }

    pub fn zeros(n: usize) -> Self {
        TractorEndo::new(
            DVector::zeros(n),
            DMatrix::zeros(n, n),
            0.0,
            DVector::zeros(n),
        )
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Largest symmetric part of `F`, which the construction keeps at zero.
    pub fn skewness(&self) -> f64 {
        let s = &self.f + &self.f.transpose();
        s.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, k: f64) -> TractorEndo {
        TractorEndo::new(&self.x * k, &self.f * k, self.lambda * k, &self.y * k)
    }

    pub fn plus(&self, other: &TractorEndo) -> TractorEndo {
        TractorEndo::new(
            &self.x + &other.x,
            &self.f + &other.f,
            self.lambda + other.lambda,
            &self.y + &other.y,
        )
    }

    /// Applies the endomorphism:
    ///
    /// ```text
    /// (sigma, mu_b, rho) -> (X^b mu_b - lambda sigma,
    ///                        Y_b sigma + F_b{}^c mu_c - X_b rho,
    ///                        lambda rho - Y^b mu_b)
    /// ```
    pub fn apply(&self, t: &Tractor, g: &DMatrix<f64>, g_inv: &DMatrix<f64>) -> Tractor {
        let sigma = self.x.dot(&t.mu) - self.lambda * t.sigma;
        let mu = &self.y * t.sigma + &self.f * (g_inv * &t.mu) - (g * &self.x) * t.rho;
        let rho = self.lambda * t.rho - (g_inv * &self.y).dot(&t.mu);
        Tractor::new(sigma, mu, rho)
    }

    /// The `(n+2) x (n+2)` matrix of the action on component vectors
    /// `[sigma, mu_c, rho]`.
    pub fn action_matrix(&self, g: &DMatrix<f64>, g_inv: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n + 2, n + 2);
        m[(0, 0)] = -self.lambda;
        for c in 0..n {
            m[(0, c + 1)] = self.x[c];
        }
        let f_mixed = &self.f * g_inv;
        let x_low = g * &self.x;
        let y_up = g_inv * &self.y;
        for b in 0..n {
            m[(b + 1, 0)] = self.y[b];
            for c in 0..n {
                m[(b + 1, c + 1)] = f_mixed[(b, c)];
            }
            m[(b + 1, n + 1)] = -x_low[b];
            m[(n + 1, b + 1)] = -y_up[b];
        }
        m[(n + 1, n + 1)] = self.lambda;
        m
    }

    /// Reads the parameter block back off an action matrix, returning the
    /// endomorphism together with the largest violation of the constrained
    /// shape (corner zeros, trace pairing, skewness, lowered `X` column).
    pub fn from_action_matrix(
        m: &DMatrix<f64>,
        g: &DMatrix<f64>,
        g_inv: &DMatrix<f64>,
    ) -> (TractorEndo, f64) {
        let n = m.nrows() - 2;
        let lambda = -m[(0, 0)];
        let x = DVector::from_fn(n, |c, _| m[(0, c + 1)]);
        let y = DVector::from_fn(n, |b, _| m[(b + 1, 0)]);
        let f_raw = m.view((1, 1), (n, n)).into_owned() * g;
        let f = (&f_raw - &f_raw.transpose()) * 0.5;

        let mut defect = m[(0, n + 1)].abs().max(m[(n + 1, 0)].abs());
        defect = defect.max((m[(n + 1, n + 1)] - lambda).abs());
        let sym = (&f_raw + &f_raw.transpose()) * 0.5;
        defect = defect.max(sym.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let x_low = g * &x;
        let y_up = g_inv * &y;
        for b in 0..n {
            defect = defect.max((m[(b + 1, n + 1)] + x_low[b]).abs());
            defect = defect.max((m[(n + 1, b + 1)] + y_up[b]).abs());
        }
        (TractorEndo::new(x, f, lambda, y), defect)
    }

    /// Number of free parameters at dimension `n`.
    pub fn param_dim(n: usize) -> usize {
        2 * n + 1 + n * (n - 1) / 2
    }

    /// Plain parameter coordinates: `X`, the strict upper triangle of `F`
    /// (row-major), `lambda`, `Y`.
    pub fn param_vec(&self) -> DVector<f64> {
        let n = self.n();
        let mut v = DVector::zeros(Self::param_dim(n));
        let mut k = 0;
        for b in 0..n {
            v[k] = self.x[b];
            k += 1;
        }
        for b in 0..n {
            for c in (b + 1)..n {
                v[k] = self.f[(b, c)];
                k += 1;
            }
        }
        v[k] = self.lambda;
        k += 1;
        for b in 0..n {
            v[k] = self.y[b];
            k += 1;
        }
        v
    }

    pub fn from_param_vec(n: usize, v: &DVector<f64>) -> Self {
        let mut k = 0;
        let x = DVector::from_fn(n, |b, _| v[b]);
        k += n;
        let mut f = DMatrix::zeros(n, n);
        for b in 0..n {
            for c in (b + 1)..n {
                f[(b, c)] = v[k];
                f[(c, b)] = -v[k];
                k += 1;
            }
        }
        let lambda = v[k];
        k += 1;
        let y = DVector::from_fn(n, |b, _| v[k + b]);
        TractorEndo::new(x, f, lambda, y)
    }

    /// Parameter coordinates in a `g`-orthonormal frame (via the Cholesky
    /// factor `g = L L^T`), in which the Euclidean norm of the result is the
    /// metric-invariant size of the endomorphism: `|X|_g`, half the full
    /// contraction `F_bc F^bc`, `lambda`, and the dual norm of `Y`. Using
    /// these coordinates makes subspace projections independent of the
    /// chart and lines the defect scale up with the curvature residuals.
    pub fn frame_param_vec(&self, l: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n();
        let x_hat = l.transpose() * &self.x;
        let a = l
            .solve_lower_triangular(&self.f)
            .expect("cholesky factor is invertible");
        let f_hat = l
            .solve_lower_triangular(&a.transpose())
            .expect("cholesky factor is invertible")
            .transpose();
        let y_hat = l
            .solve_lower_triangular(&self.y)
            .expect("cholesky factor is invertible");

        let mut v = DVector::zeros(Self::param_dim(n));
        let mut k = 0;
        for b in 0..n {
            v[k] = x_hat[b];
            k += 1;
        }
        for b in 0..n {
            for c in (b + 1)..n {
                v[k] = f_hat[(b, c)];
                k += 1;
            }
        }
        v[k] = self.lambda;
        k += 1;
        for b in 0..n {
            v[k] = y_hat[b];
            k += 1;
        }
        v
    }

    /// The corresponding element of the flat matrix realization (identity
    /// metric), obtained by flipping the first and last tractor slots.
    pub fn so_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n + 2, n + 2);
        m[(0, 0)] = self.lambda;
        m[(n + 1, n + 1)] = -self.lambda;
        for c in 0..n {
            m[(0, c + 1)] = -self.y[c];
            m[(n + 1, c + 1)] = self.x[c];
            m[(c + 1, 0)] = -self.x[c];
            m[(c + 1, n + 1)] = self.y[c];
        }
        for b in 0..n {
            for c in 0..n {
                m[(b + 1, c + 1)] = self.f[(b, c)];
            }
        }
        m
    }
}

/// Applies `phi` to `t` in the trivialization with metric `g`.
pub fn endo_apply(
    phi: &TractorEndo,
    t: &Tractor,
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
) -> Tractor {
    phi.apply(t, g, g_inv)
}

/// The scalar parameters cut out by the model-subspace conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymLParams {
    pub f: f64,
    pub lambda: f64,
    pub h: f64,
}

/// Which component equations the circle conditions enforce: the compact set
/// leaves three components unconstrained; the full set checks them too.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionSet {
    Full,
    Compact,
}

/// Extracts `(f, lambda, h)` and the largest violation of the straight-line
/// model conditions
///
/// ```text
/// Phi(0,0,1) = (0; -f U_b; lambda)
/// Phi(0,U_b,0) = (f; 0; -h)
/// Phi(1,0,0) = (-lambda; h U_b; 0)
/// ```
pub fn line_conditions(
    phi: &TractorEndo,
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
    u: &DVector<f64>,
) -> (SymLParams, f64) {
    let n = u.len();
    let u_low = g * u;
    let a1 = phi.apply(&Tractor::new(0.0, DVector::zeros(n), 1.0), g, g_inv);
    let a2 = phi.apply(&Tractor::new(0.0, u_low.clone(), 0.0), g, g_inv);
    let a3 = phi.apply(&Tractor::new(1.0, DVector::zeros(n), 0.0), g, g_inv);

    let f = a2.sigma;
    let lambda = a1.rho;
    let h = -a2.rho;

    let mut r = a1.sigma.abs();
    r = r.max((&a1.mu + &u_low * f).amax());
    r = r.max(a2.mu.amax());
    r = r.max((a3.sigma + lambda).abs());
    r = r.max((&a3.mu - &u_low * h).amax());
    r = r.max(a3.rho.abs());
    (SymLParams { f, lambda, h }, r)
}

/// Stacked component residuals of the circle model conditions, linear in
/// the endomorphism at fixed `(g, u, c)`.
fn circle_condition_components(
    phi: &TractorEndo,
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
    u: &DVector<f64>,
    c: &DVector<f64>,
    set: ConditionSet,
) -> (SymLParams, DVector<f64>) {
    let n = u.len();
    let u_low = g * u;
    let c_low = g * c;
    let c2 = c.dot(&c_low);

    let a1 = phi.apply(&Tractor::new(0.0, DVector::zeros(n), 1.0), g, g_inv);
    let a2 = phi.apply(&Tractor::new(0.0, u_low.clone(), 0.0), g, g_inv);
    let a3 = phi.apply(&Tractor::new(1.0, -&c_low, 0.0), g, g_inv);

    let f = a2.sigma;
    let lambda = a1.rho;
    let h = (&a3.mu - &c_low * lambda).dot(u);

    let len = if set == ConditionSet::Full {
        3 * n + 4
    } else {
        3 * n + 1
    };
    let mut comps = DVector::zeros(len);
    comps[0] = a1.sigma;
    comps.rows_mut(1, n).copy_from(&(&a1.mu + &u_low * f));
    comps.rows_mut(1 + n, n).copy_from(&(&a2.mu + &c_low * f));
    comps
        .rows_mut(1 + 2 * n, n)
        .copy_from(&(&a3.mu - &u_low * h - &c_low * lambda));
    if set == ConditionSet::Full {
        comps[1 + 3 * n] = a2.rho + h + f * c2;
        comps[2 + 3 * n] = a3.sigma + lambda;
        comps[3 + 3 * n] = a3.rho - lambda * c2;
    }
    (SymLParams { f, lambda, h }, comps)
}

/// Extracts `(f, lambda, h)` and the largest violation of the circle model
/// conditions for data `(u, c)` with `u` unit and `g(u, c) = 0`.
pub fn circle_conditions(
    phi: &TractorEndo,
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
    u: &DVector<f64>,
    c: &DVector<f64>,
    set: ConditionSet,
) -> (SymLParams, f64) {
    let (params, comps) = circle_condition_components(phi, g, g_inv, u, c, set);
    (params, comps.amax())
}

/// A basis of the model subspace of endomorphisms at one curve point.
#[derive(Clone, Debug)]
pub struct SFrame {
    pub u: DVector<f64>,
    /// Acceleration data; `None` marks the straight-line case.
    pub c: Option<DVector<f64>>,
    pub basis: Vec<TractorEndo>,
}

impl SFrame {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Largest violation of the defining conditions over the basis.
    pub fn verify(&self, g: &DMatrix<f64>, g_inv: &DMatrix<f64>) -> f64 {
        self.basis
            .iter()
            .map(|phi| match &self.c {
                Some(c) => circle_conditions(phi, g, g_inv, &self.u, c, ConditionSet::Full).1,
                None => line_conditions(phi, g, g_inv, &self.u).1,
            })
            .fold(0.0, f64::max)
    }
}

/// Completes `u` to a `g`-orthonormal basis by Gram-Schmidt over the
/// coordinate seeds, returning the complement vectors and which seeds were
/// used. Passing a previous `kept` list pins the seed choice so that the
/// frame varies smoothly along a curve.
fn gs_complement(
    g: &DMatrix<f64>,
    u: &DVector<f64>,
    kept: Option<&[usize]>,
) -> Result<(Vec<DVector<f64>>, Vec<usize>), MetricError> {
    let n = u.len();
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    let u_norm = ip(u, u).sqrt();
    if u_norm < 1e-12 {
        return Err(MetricError::BadCurveData("zero velocity in frame".into()));
    }
    let mut ws = vec![u / u_norm];
    let mut used = Vec::new();
    let order: Vec<usize> = match kept {
        Some(k) => k.to_vec(),
        None => (0..n).collect(),
    };
    for &k in &order {
        if ws.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        for w in &ws {
            let a = ip(w, &v);
            v -= w * a;
        }
        let nrm = ip(&v, &v).sqrt();
        if kept.is_some() {
            if nrm < 1e-6 {
                return Err(MetricError::BadCurveData(
                    "orthonormal frame degenerated along the curve".into(),
                ));
            }
            ws.push(v / nrm);
            used.push(k);
        } else if nrm > 0.05 {
            ws.push(v / nrm);
            used.push(k);
        }
    }
    if ws.len() != n {
        return Err(MetricError::BadCurveData(
            "could not complete an orthonormal frame".into(),
        ));
    }
    Ok((ws[1..].to_vec(), used))
}

fn wedge(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose() - b * a.transpose()
}

fn s_frame_with(
    g: &DMatrix<f64>,
    u: &DVector<f64>,
    c: Option<&DVector<f64>>,
    kept: Option<&[usize]>,
) -> Result<(SFrame, Vec<usize>), MetricError> {
    let n = u.len();
    let speed = (u.transpose() * g * u)[(0, 0)].sqrt();
    if (speed - 1.0).abs() > 1e-6 {
        return Err(MetricError::BadCurveData(format!(
            "frame construction needs a unit velocity (|u| = {speed:.6})"
        )));
    }
    if let Some(c) = c {
        let along = (u.transpose() * g * c)[(0, 0)];
        if along.abs() > 1e-6 {
            return Err(MetricError::BadCurveData(format!(
                "acceleration data must be orthogonal to the velocity (g(u,c) = {along:.2e})"
            )));
        }
    }
    let (ws, used) = gs_complement(g, u, kept)?;
    let u_low = g * u;
    let zero_v = DVector::zeros(n);
    let zero_m = DMatrix::zeros(n, n);

    let mut basis = Vec::new();
    match c {
        None => {
            basis.push(TractorEndo::new(
                u.clone(),
                zero_m.clone(),
                0.0,
                zero_v.clone(),
            ));
            basis.push(TractorEndo::new(
                zero_v.clone(),
                zero_m.clone(),
                1.0,
                zero_v.clone(),
            ));
            basis.push(TractorEndo::new(
                zero_v.clone(),
                zero_m.clone(),
                0.0,
                u_low.clone(),
            ));
            for i in 0..ws.len() {
                for j in (i + 1)..ws.len() {
                    let f = wedge(&(g * &ws[i]), &(g * &ws[j]));
                    basis.push(TractorEndo::new(zero_v.clone(), f, 0.0, zero_v.clone()));
                }
            }
        }
        Some(c) => {
            let c_low = g * c;
            let c2 = c.dot(&c_low);
            basis.push(TractorEndo::new(
                u.clone(),
                wedge(&u_low, &c_low),
                0.0,
                &u_low * c2,
            ));
            basis.push(TractorEndo::new(
                zero_v.clone(),
                zero_m.clone(),
                1.0,
                c_low.clone(),
            ));
            basis.push(TractorEndo::new(
                zero_v.clone(),
                zero_m.clone(),
                0.0,
                u_low.clone(),
            ));
            for i in 0..ws.len() {
                for j in (i + 1)..ws.len() {
                    let f = wedge(&(g * &ws[i]), &(g * &ws[j]));
                    let y = &f * c;
                    basis.push(TractorEndo::new(zero_v.clone(), f, 0.0, y));
                }
            }
        }
    }
    Ok((
        SFrame {
            u: u.clone(),
            c: c.cloned(),
            basis,
        },
        used,
    ))
}

/// Basis of the straight-line model subspace at a point with velocity `u`:
/// dimension `(n-1)(n-2)/2 + 3`.
pub fn s_frame_geodesic(g: &DMatrix<f64>, u: &DVector<f64>) -> Result<SFrame, MetricError> {
    Ok(s_frame_with(g, u, None, None)?.0)
}

/// Basis of the circle model subspace at a point with velocity `u` and
/// acceleration `c` (orthogonal to `u`): the same dimension as the line
/// case, to which it degenerates when `c = 0`.
pub fn s_frame_circle(
    g: &DMatrix<f64>,
    u: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<SFrame, MetricError> {
    Ok(s_frame_with(g, u, Some(c), None)?.0)
}

/// Metric data prepared once along a sampled curve so that repeated
/// derivative passes stay cheap.
pub struct CurveGeometry {
    pub n: usize,
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub c: Vec<DVector<f64>>,
    pub g: Vec<DMatrix<f64>>,
    pub g_inv: Vec<DMatrix<f64>>,
    pub gamma: Vec<Vec<DMatrix<f64>>>,
    /// Schouten tensor, indices down.
    pub p: Vec<DMatrix<f64>>,
}

impl CurveGeometry {
    pub fn along(metric: &ChartMetric, states: &[CurveState]) -> Result<Self, MetricError> {
        if states.len() < 3 {
            return Err(MetricError::BadCurveData(
                "directional calculus needs at least three samples".into(),
            ));
        }
        let n = metric.n;
        let mut geom = CurveGeometry {
            n,
            t: Vec::with_capacity(states.len()),
            x: Vec::with_capacity(states.len()),
            u: Vec::with_capacity(states.len()),
            c: Vec::with_capacity(states.len()),
            g: Vec::with_capacity(states.len()),
            g_inv: Vec::with_capacity(states.len()),
            gamma: Vec::with_capacity(states.len()),
            p: Vec::with_capacity(states.len()),
        };
        for s in states {
            if s.x.len() != n || s.u.len() != n {
                return Err(MetricError::Dimension {
                    expected: n,
                    got: s.x.len().max(s.u.len()),
                });
            }
            let pack = curvature(metric, s.x.as_slice())?;
            geom.t.push(s.t);
            geom.x.push(s.x.clone());
            geom.u.push(s.u.clone());
            geom.c.push(s.c.clone());
            geom.g.push(pack.g);
            geom.g_inv.push(pack.g_inv);
            geom.gamma.push(pack.gamma);
            geom.p.push(pack.schouten);
        }
        Ok(geom)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Levi-Civita correction for a covector field along the curve:
    /// `Gamma^f_ab u^a w_f` as a lowered vector.
    fn covector_correction(&self, i: usize, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for f in 0..n {
            out += &(&self.gamma[i][f] * &self.u[i]) * w[f];
        }
        out
    }
}

/// Directional derivative of a tractor field sampled along a curve, by
/// centered differences of the components with the metric and Schouten
/// couplings of the standard connection. Endpoint entries duplicate their
/// nearest interior neighbour.
pub fn tractor_derivative(
    geom: &CurveGeometry,
    fields: &[Tractor],
) -> Result<Vec<Tractor>, MetricError> {
    let count = geom.len();
    if fields.len() != count {
        return Err(MetricError::BadCurveData(format!(
            "field has {} samples but the curve has {count}",
            fields.len()
        )));
    }
    let n = geom.n;
    for f in fields {
        if f.n() != n {
            return Err(MetricError::Dimension {
                expected: n,
                got: f.n(),
            });
        }
    }

    let mut out = vec![Tractor::zeros(n); count];
    for i in 1..count - 1 {
        let dt = geom.t[i + 1] - geom.t[i - 1];
        if dt.abs() < 1e-15 {
            return Err(MetricError::BadCurveData("coincident sample times".into()));
        }
        let d_sigma = (fields[i + 1].sigma - fields[i - 1].sigma) / dt;
        let d_mu_plain = (&fields[i + 1].mu - &fields[i - 1].mu) / dt;
        let d_rho = (fields[i + 1].rho - fields[i - 1].rho) / dt;

        let d_mu = d_mu_plain - geom.covector_correction(i, &fields[i].mu);
        let u = &geom.u[i];
        let u_low = &geom.g[i] * u;
        let p_u = &geom.p[i] * u;

        let sigma = d_sigma - u.dot(&fields[i].mu);
        let mu = d_mu + &u_low * fields[i].rho + &p_u * fields[i].sigma;
        let rho = d_rho - p_u.dot(&(&geom.g_inv[i] * &fields[i].mu));
        out[i] = Tractor::new(sigma, mu, rho);
    }
    out[0] = out[1].clone();
    out[count - 1] = out[count - 2].clone();
    Ok(out)
}

/// `(dPhi)(T) = d(Phi T) - Phi(dT)` per sample, for endomorphism and
/// tractor fields along the same curve.
pub fn leibniz_apply(
    geom: &CurveGeometry,
    phis: &[TractorEndo],
    ts: &[Tractor],
) -> Result<Vec<Tractor>, MetricError> {
    let count = geom.len();
    if phis.len() != count || ts.len() != count {
        return Err(MetricError::BadCurveData(
            "fields must be sampled at every curve point".into(),
        ));
    }
    let applied: Vec<Tractor> = (0..count)
        .map(|i| phis[i].apply(&ts[i], &geom.g[i], &geom.g_inv[i]))
        .collect();
    let d_applied = tractor_derivative(geom, &applied)?;
    let d_ts = tractor_derivative(geom, ts)?;
    let mut out: Vec<Tractor> = (0..count)
        .map(|i| d_applied[i].minus(&phis[i].apply(&d_ts[i], &geom.g[i], &geom.g_inv[i])))
        .collect();
    out[0] = out[1].clone();
    out[count - 1] = out[count - 2].clone();
    Ok(out)
}

/// Directional derivative of an endomorphism field: the Leibniz rule is
/// evaluated on the constant-component frame and the action matrix is
/// reassembled into the parameter block at each sample.
pub fn endo_derivative(
    geom: &CurveGeometry,
    phis: &[TractorEndo],
) -> Result<Vec<TractorEndo>, MetricError> {
    let count = geom.len();
    if phis.len() != count {
        return Err(MetricError::BadCurveData(
            "endomorphism field must be sampled at every curve point".into(),
        ));
    }
    let n = geom.n;
    let dim = n + 2;
    let mut columns: Vec<Vec<Tractor>> = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut e = DVector::zeros(dim);
        e[k] = 1.0;
        let frame_field = vec![Tractor::from_vec(&e); count];
        columns.push(leibniz_apply(geom, phis, &frame_field)?);
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut m = DMatrix::zeros(dim, dim);
        for (k, col) in columns.iter().enumerate() {
            m.set_column(k, &col[i].to_vec());
        }
        let (endo, _) = TractorEndo::from_action_matrix(&m, &geom.g[i], &geom.g_inv[i]);
        out.push(endo);
    }
    out[0] = out[1].clone();
    out[count - 1] = out[count - 2].clone();
    Ok(out)
}

/// Per-sample distance from the derivative of the line model subspace to
/// the subspace itself along a geodesic: the basis is differentiated and
/// projected onto the orthogonal complement in frame parameter
/// coordinates, and the largest residual over the basis is reported.
/// Endpoint entries duplicate their nearest interior neighbour.
pub fn closure_defect(metric: &ChartMetric, traj: &Trajectory) -> Result<Vec<f64>, MetricError> {
    let geom = CurveGeometry::along(metric, &traj.states)?;
    let count = geom.len();

    let (_, kept) = s_frame_with(&geom.g[0], &geom.u[0], None, None)?;
    let frames: Vec<SFrame> = (0..count)
        .map(|i| s_frame_with(&geom.g[i], &geom.u[i], None, Some(&kept)).map(|(f, _)| f))
        .collect::<Result<_, _>>()?;
    let n_elems = frames[0].dim();

    let mut derivs: Vec<Vec<TractorEndo>> = Vec::with_capacity(n_elems);
    for e in 0..n_elems {
        let field: Vec<TractorEndo> = frames.iter().map(|fr| fr.basis[e].clone()).collect();
        derivs.push(endo_derivative(&geom, &field)?);
    }

    let p_dim = TractorEndo::param_dim(geom.n);
    let mut out = vec![0.0; count];
    for i in 1..count - 1 {
        let chol = Cholesky::new(geom.g[i].clone()).ok_or(MetricError::NotPositiveDefinite {
            point: geom.x[i].as_slice().to_vec(),
        })?;
        let l = chol.l();
        let mut basis = DMatrix::zeros(p_dim, n_elems);
        for (e, fr) in frames[i].basis.iter().enumerate() {
            basis.set_column(e, &fr.frame_param_vec(&l));
        }
        let svd = basis.clone().svd(true, true);
        let mut worst = 0.0f64;
        for d in &derivs {
            let v = d[i].frame_param_vec(&l);
            let coef = svd.solve(&v, SV_EPS).map_err(|_| MetricError::Singular {
                point: geom.x[i].as_slice().to_vec(),
            })?;
            worst = worst.max((&v - &basis * coef).norm());
        }
        out[i] = worst;
    }
    out[0] = out[1];
    out[count - 1] = out[count - 2];
    Ok(out)
}

/// Per-sample obstruction to preserving the circle model subspace along a
/// trajectory carrying acceleration data: the derivative of the canonical
/// basis element is applied to `(0, U_b, 0)` and the lowered obstruction
/// one-form is read off its middle slot. On consistent data this is the
/// same one-form as the curve-side flow residual. Endpoint entries
/// duplicate their nearest interior neighbour.
pub fn appendix_defect(
    metric: &ChartMetric,
    traj: &Trajectory,
) -> Result<Vec<DVector<f64>>, MetricError> {
    let geom = CurveGeometry::along(metric, &traj.states)?;
    let count = geom.len();
    let mut phis = Vec::with_capacity(count);
    let mut ts = Vec::with_capacity(count);
    for i in 0..count {
        let u_low = &geom.g[i] * &geom.u[i];
        let c_low = &geom.g[i] * &geom.c[i];
        let c2 = geom.c[i].dot(&c_low);
        phis.push(TractorEndo::new(
            geom.u[i].clone(),
            wedge(&u_low, &c_low),
            0.0,
            &u_low * c2,
        ));
        ts.push(Tractor::new(0.0, u_low, 0.0));
    }
    let r = leibniz_apply(&geom, &phis, &ts)?;
    let mut out: Vec<DVector<f64>> = r.into_iter().map(|t| -t.mu).collect();
    out[0] = out[1].clone();
    out[count - 1] = out[count - 2].clone();
    Ok(out)
}

fn rk4<F>(y: &DVector<f64>, h: f64, f: &F) -> Result<DVector<f64>, MetricError>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, MetricError>,
{
    let k1 = f(y)?;
    let k2 = f(&(y + &k1 * (h / 2.0)))?;
    let k3 = f(&(y + &k2 * (h / 2.0)))?;
    let k4 = f(&(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn geodesic_checks(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    t_end: f64,
    step: f64,
) -> Result<(), MetricError> {
    if step <= 0.0 || t_end <= 0.0 {
        return Err(MetricError::BadCurveData(
            "step and duration must be positive".into(),
        ));
    }
    let g = metric.at(x0.as_slice())?;
    let speed2 = (u0.transpose() * &g * u0)[(0, 0)];
    if (speed2 - 1.0).abs() > 1e-8 {
        return Err(MetricError::BadCurveData(format!(
            "transport needs a unit initial velocity (|u|^2 = {speed2:.6})"
        )));
    }
    Ok(())
}

/// Parallel-transports a tractor along the geodesic through `(x0, u0)`,
/// re-integrating the curve jointly with the transport so that no
/// interpolation of the metric data is needed. Returns the curve samples
/// and the transported tractor at each of them.
pub fn transport_along_geodesic(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    t_end: f64,
    step: f64,
    t0: &Tractor,
) -> Result<(Vec<CurveState>, Vec<Tractor>), MetricError> {
    geodesic_checks(metric, x0, u0, t_end, step)?;
    let n = metric.n;

    let f = |y: &DVector<f64>| -> Result<DVector<f64>, MetricError> {
        let x = y.rows(0, n).into_owned();
        let u = y.rows(n, n).into_owned();
        let pack = curvature(metric, x.as_slice())?;
        let sigma = y[2 * n];
        let mu = y.rows(2 * n + 1, n).into_owned();
        let rho = y[3 * n + 1];

        let mut du = DVector::zeros(n);
        let mut gamma_mu = DVector::zeros(n);
        for b in 0..n {
            du[b] = -(u.transpose() * &pack.gamma[b] * &u)[(0, 0)];
        }
        for fidx in 0..n {
            gamma_mu += &(&pack.gamma[fidx] * &u) * mu[fidx];
        }
        let u_low = &pack.g * &u;
        let p_u = &pack.schouten * &u;

        let mut dy = DVector::zeros(y.len());
        dy.rows_mut(0, n).copy_from(&u);
        dy.rows_mut(n, n).copy_from(&du);
        dy[2 * n] = u.dot(&mu);
        let d_mu = gamma_mu - &u_low * rho - &p_u * sigma;
        dy.rows_mut(2 * n + 1, n).copy_from(&d_mu);
        dy[3 * n + 1] = p_u.dot(&(&pack.g_inv * &mu));
        Ok(dy)
    };

    let steps = (t_end / step).round() as usize;
    let mut y = DVector::zeros(3 * n + 2);
    y.rows_mut(0, n).copy_from(x0);
    y.rows_mut(n, n).copy_from(u0);
    y[2 * n] = t0.sigma;
    y.rows_mut(2 * n + 1, n).copy_from(&t0.mu);
    y[3 * n + 1] = t0.rho;

    let mut states = Vec::with_capacity(steps + 1);
    let mut tractors = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 * step;
        let x = y.rows(0, n).into_owned();
        if !metric.domain.contains(x.as_slice()) {
            break;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(MetricError::NonFinite { t });
        }
        states.push(CurveState {
            t,
            x,
            u: y.rows(n, n).into_owned(),
            c: DVector::zeros(n),
        });
        tractors.push(Tractor::new(
            y[2 * n],
            y.rows(2 * n + 1, n).into_owned(),
            y[3 * n + 1],
        ));
        if i < steps {
            y = rk4(&y, step, &f)?;
        }
    }
    if states.len() < 2 {
        return Err(MetricError::BadCurveData(
            "curve left the chart immediately".into(),
        ));
    }
    Ok((states, tractors))
}

/// Parallel-transports an endomorphism along the geodesic through
/// `(x0, u0)` by integrating its action matrix against the connection.
/// This is the finite cross-check for the infinitesimal defect: on a
/// metric where the model subspace closes up, a transported basis element
/// keeps satisfying the model conditions over finite arcs.
pub fn endo_transport_along_geodesic(
    metric: &ChartMetric,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    t_end: f64,
    step: f64,
    phi0: &TractorEndo,
) -> Result<(Vec<CurveState>, Vec<TractorEndo>), MetricError> {
    geodesic_checks(metric, x0, u0, t_end, step)?;
    let n = metric.n;
    let dim = n + 2;

    let connection = |pack: &crate::curvature::CurvaturePack, u: &DVector<f64>| {
        let mut omega = DMatrix::zeros(dim, dim);
        let u_low = &pack.g * u;
        let p_u = &pack.schouten * u;
        let p_u_up = &pack.g_inv * &p_u;
        for c in 0..n {
            omega[(0, c + 1)] = -u[c];
            omega[(n + 1, c + 1)] = -p_u_up[c];
        }
        for b in 0..n {
            omega[(b + 1, 0)] = p_u[b];
            omega[(b + 1, n + 1)] = u_low[b];
            for fidx in 0..n {
                // Covector components couple through the upper slot of Gamma.
                omega[(b + 1, fidx + 1)] = -(u.transpose() * &pack.gamma[fidx])[(0, b)];
            }
        }
        omega
    };

    let f = |y: &DVector<f64>| -> Result<DVector<f64>, MetricError> {
        let x = y.rows(0, n).into_owned();
        let u = y.rows(n, n).into_owned();
        let pack = curvature(metric, x.as_slice())?;
        let a = DMatrix::from_row_slice(dim, dim, y.rows(2 * n, dim * dim).as_slice());
        let omega = connection(&pack, &u);
        let da = &a * &omega - &omega * &a;

        let mut dy = DVector::zeros(y.len());
        dy.rows_mut(0, n).copy_from(&u);
        let mut du = DVector::zeros(n);
        for b in 0..n {
            du[b] = -(u.transpose() * &pack.gamma[b] * &u)[(0, 0)];
        }
        dy.rows_mut(n, n).copy_from(&du);
        for r in 0..dim {
            for c in 0..dim {
                dy[2 * n + r * dim + c] = da[(r, c)];
            }
        }
        Ok(dy)
    };

    let pack0 = curvature(metric, x0.as_slice())?;
    let a0 = phi0.action_matrix(&pack0.g, &pack0.g_inv);
    let steps = (t_end / step).round() as usize;
    let mut y = DVector::zeros(2 * n + dim * dim);
    y.rows_mut(0, n).copy_from(x0);
    y.rows_mut(n, n).copy_from(u0);
    for r in 0..dim {
        for c in 0..dim {
            y[2 * n + r * dim + c] = a0[(r, c)];
        }
    }

    let mut states = Vec::with_capacity(steps + 1);
    let mut endos = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 * step;
        let x = y.rows(0, n).into_owned();
        if !metric.domain.contains(x.as_slice()) {
            break;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(MetricError::NonFinite { t });
        }
        let pack = curvature(metric, x.as_slice())?;
        let a = DMatrix::from_row_slice(dim, dim, y.rows(2 * n, dim * dim).as_slice());
        let (endo, _) = TractorEndo::from_action_matrix(&a, &pack.g, &pack.g_inv);
        states.push(CurveState {
            t,
            x,
            u: y.rows(n, n).into_owned(),
            c: DVector::zeros(n),
        });
        endos.push(endo);
        if i < steps {
            y = rk4(&y, step, &f)?;
        }
    }
    if states.len() < 2 {
        return Err(MetricError::BadCurveData(
            "curve left the chart immediately".into(),
        ));
    }
    Ok((states, endos))
}
