//! Chart metrics.
//!
//! A [`ChartMetric`] is a Riemannian metric presented in a single coordinate
//! chart: a closure producing the matrix `g_ab(x)` in [`Jet2`] arithmetic, a
//! coordinate box on which the chart is valid, and a choice of
//! differentiation backend. The jet backend is exact to roundoff; the
//! finite-difference backend exists as an independent cross-check of the jet
//! arithmetic, not as the workhorse.

use crate::jet::Jet2;
use nalgebra::DMatrix;
use serde::Deserialize;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub type MetricFn = Arc<dyn Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[Jet2]) -> Jet2 + Send + Sync>;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("point has dimension {got}, chart has dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("metric is not symmetric at {point:?} (residual {residual:.3e})")]
    NotSymmetric { point: Vec<f64>, residual: f64 },
    #[error("metric is not positive-definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("metric is singular at {point:?}")]
    Singular { point: Vec<f64> },
    #[error("operation needs dimension >= {needed}, chart has {got}")]
    DimensionTooSmall { needed: usize, got: usize },
    #[error("invalid polynomial metric: {0}")]
    BadPolynomial(String),
    #[error("conformal factor is not positive at {point:?} (value {value:.3e})")]
    FactorNotPositive { point: Vec<f64>, value: f64 },
    #[error("invalid curve data: {0}")]
    BadCurveData(String),
    #[error("computation produced a non-finite value near t = {t}")]
    NonFinite { t: f64 },
}

/// Coordinate box on which a chart is trusted.
#[derive(Clone, Debug, Deserialize)]
pub struct Domain {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Domain {
    pub fn cube(n: usize, half_width: f64) -> Self {
        Domain {
            min: vec![-half_width; n],
            max: vec![half_width; n],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }
}

/// Differentiation backend for metric derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffMode {
    /// Forward-mode jets; exact first and second derivatives.
    Dual,
    /// Central differences with the given step, applied to metric values.
    FiniteDifference { h: f64 },
}

/// Metric values and their first and second coordinate derivatives at a point.
///
/// `dg[c][(a, b)]` is the derivative of `g_ab` along `x^c`; `d2g[c][d]` the
/// second derivative along `x^c, x^d`.
pub struct MetricJets {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub d2g: Vec<Vec<DMatrix<f64>>>,
}

#[derive(Clone)]
pub struct ChartMetric {
    pub name: String,
    pub n: usize,
    pub domain: Domain,
    pub diff: DiffMode,
    f: MetricFn,
}

impl fmt::Debug for ChartMetric {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("ChartMetric")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("diff", &self.diff)
            .finish()
    }
}

impl ChartMetric {
    pub fn new(name: &str, n: usize, domain: Domain, f: MetricFn) -> Self {
        ChartMetric {
            name: name.to_string(),
            n,
            domain,
            diff: DiffMode::Dual,
            f,
        }
    }

    pub fn with_diff(mut self, diff: DiffMode) -> Self {
        self.diff = diff;
        self
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), MetricError> {
        if x.len() != self.n {
            return Err(MetricError::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn raw_value(&self, x: &[f64]) -> DMatrix<f64> {
        let jets: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v, self.n)).collect();
        let vals = (self.f)(&jets);
        DMatrix::from_fn(self.n, self.n, |a, b| vals[a * self.n + b].val)
    }

    /// Metric matrix at `x`, validated symmetric positive-definite.
    pub fn at(&self, x: &[f64]) -> Result<DMatrix<f64>, MetricError> {
        self.check_dim(x)?;
        let g = self.raw_value(x);
        let residual = (&g - g.transpose()).norm();
        if residual > 1e-10 * (1.0 + g.norm()) {
            return Err(MetricError::NotSymmetric {
                point: x.to_vec(),
                residual,
            });
        }
        let g = (&g + g.transpose()) * 0.5;
        if g.clone().cholesky().is_none() {
            return Err(MetricError::NotPositiveDefinite { point: x.to_vec() });
        }
        Ok(g)
    }

    pub fn inverse_at(&self, x: &[f64]) -> Result<DMatrix<f64>, MetricError> {
        self.at(x)?
            .try_inverse()
            .ok_or(MetricError::Singular { point: x.to_vec() })
    }

    /// Metric with first and second derivatives, by the configured backend.
    pub fn jets(&self, x: &[f64]) -> Result<MetricJets, MetricError> {
        self.check_dim(x)?;
        let g = self.at(x)?;
        let n = self.n;
        match self.diff {
            DiffMode::Dual => {
                let seeds = Jet2::seed_point(x);
                let vals = (self.f)(&seeds);
                let entry = |a: usize, b: usize| &vals[a * n + b];
                let dg = (0..n)
                    .map(|c| DMatrix::from_fn(n, n, |a, b| entry(a, b).grad[c]))
                    .collect();
                let d2g = (0..n)
                    .map(|c| {
                        (0..n)
                            .map(|d| DMatrix::from_fn(n, n, |a, b| entry(a, b).hess[(c, d)]))
                            .collect()
                    })
                    .collect();
                Ok(MetricJets { g, dg, d2g })
            }
            DiffMode::FiniteDifference { h } => {
                let shift = |x: &[f64], c: usize, s: f64| {
                    let mut y = x.to_vec();
                    y[c] += s;
                    y
                };
                let dg: Vec<DMatrix<f64>> = (0..n)
                    .map(|c| {
                        (self.raw_value(&shift(x, c, h)) - self.raw_value(&shift(x, c, -h)))
                            / (2.0 * h)
                    })
                    .collect();
                let mut d2g = vec![vec![DMatrix::zeros(n, n); n]; n];
                #[allow(clippy::needless_range_loop)] // c and d drive the stencil shifts too
                for c in 0..n {
                    d2g[c][c] = (self.raw_value(&shift(x, c, h)) - &g * 2.0
                        + self.raw_value(&shift(x, c, -h)))
                        / (h * h);
                    for d in (c + 1)..n {
                        let pp = self.raw_value(&shift(&shift(x, c, h), d, h));
                        let pm = self.raw_value(&shift(&shift(x, c, h), d, -h));
                        let mp = self.raw_value(&shift(&shift(x, c, -h), d, h));
                        let mm = self.raw_value(&shift(&shift(x, c, -h), d, -h));
                        let mixed = (pp - pm - mp + mm) / (4.0 * h * h);
                        d2g[c][d] = mixed.clone();
                        d2g[d][c] = mixed;
                    }
                }
                Ok(MetricJets { g, dg, d2g })
            }
        }
    }
}

fn dot(x: &[Jet2]) -> Jet2 {
    let n = x[0].dim();
    x.iter()
        .fold(Jet2::constant(0.0, n), |acc, v| &acc + &(v * v))
}

/// Flat Euclidean metric on a box.
pub fn flat(n: usize) -> ChartMetric {
    ChartMetric::new(
        "flat",
        n,
        Domain::cube(n, 50.0),
        Arc::new(move |_x: &[Jet2]| {
            let mut out = vec![Jet2::constant(0.0, n); n * n];
            for a in 0..n {
                out[a * n + a] = Jet2::constant(1.0, n);
            }
            out
        }),
    )
}

/// Round unit sphere in stereographic coordinates: `g = 4 (1 + |x|^2)^-2 d`.
pub fn sphere(n: usize) -> ChartMetric {
    ChartMetric::new(
        "sphere",
        n,
        Domain::cube(n, 20.0),
        Arc::new(move |x: &[Jet2]| {
            let w = &(dot(x) + 1.0).recip().powi(2) * 4.0;
            let mut out = vec![Jet2::constant(0.0, n); n * n];
            for a in 0..n {
                out[a * n + a] = w.clone();
            }
            out
        }),
    )
}

/// Hyperbolic space on the unit ball: `g = 4 (1 - |x|^2)^-2 d`.
pub fn hyperbolic(n: usize) -> ChartMetric {
    ChartMetric::new(
        "hyperbolic",
        n,
        Domain::cube(n, 0.57),
        Arc::new(move |x: &[Jet2]| {
            let w = &(&(-&dot(x)) + 1.0).recip().powi(2) * 4.0;
            let mut out = vec![Jet2::constant(0.0, n); n * n];
            for a in 0..n {
                out[a * n + a] = w.clone();
            }
            out
        }),
    )
}

/// Fubini-Study metric on the affine chart of the complex projective plane,
/// written in real coordinates `(x1, y1, x2, y2)`:
/// `g = [(1 + r^2) I - X X^T - (JX)(JX)^T] / (1 + r^2)^2`
/// with `J` the standard complex structure. Einstein but not constant
/// curvature.
pub fn fubini_study() -> ChartMetric {
    let n = 4;
    ChartMetric::new(
        "fubini_study",
        n,
        Domain::cube(n, 3.0),
        Arc::new(move |x: &[Jet2]| {
            let w = dot(x) + 1.0;
            let winv2 = w.recip().powi(2);
            // J (x1, y1, x2, y2) = (-y1, x1, -y2, x2)
            let jx = [-&x[1], x[0].clone(), -&x[3], x[2].clone()];
            let mut out = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    let mut e = &(&x[a] * &x[b]) + &(&jx[a] * &jx[b]);
                    e = -&e;
                    if a == b {
                        e = &e + &w;
                    }
                    out.push(&e * &winv2);
                }
            }
            out
        }),
    )
}

/// Diagonal non-Einstein example: `g = diag(1, 1 + x1^2, 1, ..., 1)`.
pub fn non_einstein_diag(n: usize) -> ChartMetric {
    ChartMetric::new(
        "non_einstein_diag",
        n,
        Domain::cube(n, 20.0),
        Arc::new(move |x: &[Jet2]| {
            let mut out = vec![Jet2::constant(0.0, n); n * n];
            for a in 0..n {
                out[a * n + a] = Jet2::constant(1.0, n);
            }
            out[n + 1] = &(&x[0] * &x[0]) + 1.0;
            out
        }),
    )
}

/// Catalog lookup used by the command line and fixtures.
pub fn by_name(name: &str, n: usize) -> Option<ChartMetric> {
    match name {
        "flat" => Some(flat(n)),
        "sphere" => Some(sphere(n)),
        "hyperbolic" => Some(hyperbolic(n)),
        "fubini_study" => Some(fubini_study()),
        "non_einstein_diag" => Some(non_einstein_diag(n)),
        _ => None,
    }
}

/// Positive conformal factor `Omega` presented as a jet closure.
#[derive(Clone)]
pub struct ConformalFactor {
    pub name: String,
    f: ScalarFn,
}

impl fmt::Debug for ConformalFactor {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("ConformalFactor")
            .field("name", &self.name)
            .finish()
    }
}

impl ConformalFactor {
    pub fn new(name: &str, f: ScalarFn) -> Self {
        ConformalFactor {
            name: name.to_string(),
            f,
        }
    }

    pub fn constant(c: f64, _n: usize) -> Self {
        ConformalFactor::new(
            "constant",
            Arc::new(move |x: &[Jet2]| Jet2::constant(c, x[0].dim())),
        )
    }

    /// `Omega = exp(b + a . x + x^T Q x / 2)`, positive by construction.
    pub fn exp_quadratic(b: f64, a: Vec<f64>, q: DMatrix<f64>) -> Self {
        ConformalFactor::new(
            "exp_quadratic",
            Arc::new(move |x: &[Jet2]| {
                let n = x[0].dim();
                let mut e = Jet2::constant(b, n);
                for (i, xi) in x.iter().enumerate() {
                    e = &e + &(xi * a[i]);
                    for (j, xj) in x.iter().enumerate() {
                        e = &e + &(&(xi * xj) * (0.5 * q[(i, j)]));
                    }
                }
                e.exp()
            }),
        )
    }

    pub fn eval(&self, x: &[Jet2]) -> Jet2 {
        (self.f)(x)
    }

    /// Value of `Omega` at a chart point; errors if not positive.
    pub fn value(&self, x: &[f64]) -> Result<f64, MetricError> {
        let jets: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v, x.len())).collect();
        let v = (self.f)(&jets).val;
        if v <= 0.0 {
            return Err(MetricError::FactorNotPositive {
                point: x.to_vec(),
                value: v,
            });
        }
        Ok(v)
    }

    /// `Upsilon_a = d_a log Omega` with its coordinate Jacobian
    /// `d_a Upsilon_b`, both from one jet evaluation.
    pub fn log_gradient(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>), MetricError> {
        self.value(x)?;
        let seeds = Jet2::seed_point(x);
        let lo = (self.f)(&seeds).ln();
        Ok((lo.grad.iter().copied().collect(), lo.hess.clone()))
    }
}

/// Rescaled metric `Omega^2 g` as a new chart metric on the same box.
pub fn conformal_rescale(m: &ChartMetric, omega: &ConformalFactor) -> ChartMetric {
    let f = m.f.clone();
    let of = omega.clone();
    ChartMetric::new(
        &format!("{}*{}^2", m.name, omega.name),
        m.n,
        m.domain.clone(),
        Arc::new(move |x: &[Jet2]| {
            let w = of.eval(x);
            let w2 = &w * &w;
            f(x).into_iter().map(|e| &e * &w2).collect()
        }),
    )
    .with_diff(m.diff)
}

/// One polynomial term: coefficient times a monomial in the coordinates.
#[derive(Clone, Debug, Deserialize)]
pub struct PolyTerm {
    pub c: f64,
    pub powers: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct PolyEntry {
    pub i: usize,
    pub j: usize,
    pub terms: Vec<PolyTerm>,
}

/// Custom metric as a polynomial coefficient table. Entries give the upper
/// triangle; omitted entries are zero.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialMetricSpec {
    pub name: Option<String>,
    pub n: usize,
    pub domain: Option<Domain>,
    pub entries: Vec<PolyEntry>,
}

impl PolynomialMetricSpec {
    pub fn build(&self) -> Result<ChartMetric, MetricError> {
        let n = self.n;
        if n < 2 {
            return Err(MetricError::BadPolynomial(format!(
                "n must be >= 2, got {n}"
            )));
        }
        for (k, e) in self.entries.iter().enumerate() {
            if e.i > e.j || e.j >= n {
                return Err(MetricError::BadPolynomial(format!(
                    "entries[{k}]: indices ({}, {}) must satisfy i <= j < n",
                    e.i, e.j
                )));
            }
            for (t, term) in e.terms.iter().enumerate() {
                if term.powers.len() != n {
                    return Err(MetricError::BadPolynomial(format!(
                        "entries[{k}].terms[{t}]: powers has length {}, expected {n}",
                        term.powers.len()
                    )));
                }
            }
        }
        let entries = self.entries.clone();
        let domain = self.domain.clone().unwrap_or(Domain::cube(n, 10.0));
        if domain.min.len() != n || domain.max.len() != n {
            return Err(MetricError::BadPolynomial(
                "domain bounds must have length n".into(),
            ));
        }
        let name = self.name.clone().unwrap_or_else(|| "polynomial".into());
        Ok(ChartMetric::new(
            &name,
            n,
            domain,
            Arc::new(move |x: &[Jet2]| {
                let mut out = vec![Jet2::constant(0.0, n); n * n];
                for e in &entries {
                    let mut v = Jet2::constant(0.0, n);
                    for term in &e.terms {
                        let mut mono = Jet2::constant(term.c, n);
                        for (k, &p) in term.powers.iter().enumerate() {
                            if p > 0 {
                                mono = &mono * &x[k].powi(p as i32);
                            }
                        }
                        v = &v + &mono;
                    }
                    out[e.i * n + e.j] = v.clone();
                    out[e.j * n + e.i] = v;
                }
                out
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_value_and_positivity() {
        let m = sphere(3);
        let g = m.at(&[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 1)], 1.0, epsilon = 1e-14);
        assert!(m.at(&[0.3, -0.2, 0.9]).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = flat(3);
        assert!(matches!(
            m.at(&[0.0, 0.0]),
            Err(MetricError::Dimension { .. })
        ));
    }

    #[test]
    fn jets_agree_with_finite_differences_on_catalog() {
        for m in [
            sphere(3),
            hyperbolic(3),
            fubini_study(),
            non_einstein_diag(4),
        ] {
            let fd = m.clone().with_diff(DiffMode::FiniteDifference { h: 1e-4 });
            let x: Vec<f64> = (0..m.n).map(|i| 0.11 + 0.07 * i as f64).collect();
            let a = m.jets(&x).unwrap();
            let b = fd.jets(&x).unwrap();
            for c in 0..m.n {
                let scale = 1.0 + a.dg[c].norm();
                assert!((&a.dg[c] - &b.dg[c]).norm() < 1e-6 * scale, "{} dg", m.name);
                for d in 0..m.n {
                    let scale = 1.0 + a.d2g[c][d].norm();
                    assert!(
                        (&a.d2g[c][d] - &b.d2g[c][d]).norm() < 1e-6 * scale,
                        "{} d2g",
                        m.name
                    );
                }
            }
        }
    }

    #[test]
    fn fubini_study_restricts_to_identity_at_origin() {
        let m = fubini_study();
        let g = m.at(&[0.0; 4]).unwrap();
        assert!((g - DMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn polynomial_metric_roundtrip() {
        let json = r#"{
            "n": 2,
            "entries": [
                {"i": 0, "j": 0, "terms": [{"c": 1.0, "powers": [0, 0]}]},
                {"i": 1, "j": 1, "terms": [{"c": 1.0, "powers": [0, 0]},
                                            {"c": 1.0, "powers": [2, 0]}]}
            ]
        }"#;
        let spec: PolynomialMetricSpec = serde_json::from_str(json).unwrap();
        let m = spec.build().unwrap();
        let g = m.at(&[2.0, 5.0]).unwrap();
        assert_relative_eq!(g[(1, 1)], 5.0, epsilon = 1e-14);
        let jets = m.jets(&[2.0, 5.0]).unwrap();
        assert_relative_eq!(jets.dg[0][(1, 1)], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn polynomial_metric_rejects_bad_shapes() {
        let spec = PolynomialMetricSpec {
            name: None,
            n: 2,
            domain: None,
            entries: vec![PolyEntry {
                i: 1,
                j: 0,
                terms: vec![],
            }],
        };
        assert!(spec.build().is_err());
    }

    #[test]
    fn conformal_factor_gradients() {
        let q = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.1, -0.3]);
        let om = ConformalFactor::exp_quadratic(0.4, vec![0.5, -0.2], q.clone());
        let x = [0.3, 0.7];
        let (ups, dups) = om.log_gradient(&x).unwrap();
        // log Omega is the quadratic itself, so Upsilon = a + Q x.
        let expect0 = 0.5 + q[(0, 0)] * x[0] + q[(0, 1)] * x[1];
        assert_relative_eq!(ups[0], expect0, epsilon = 1e-12);
        assert_relative_eq!(dups[(0, 1)], q[(0, 1)], epsilon = 1e-12);
    }

    #[test]
    fn rescale_by_one_is_identity() {
        let m = sphere(3);
        let r = conformal_rescale(&m, &ConformalFactor::constant(1.0, 3));
        let x = [0.2, -0.4, 0.1];
        assert!((m.at(&x).unwrap() - r.at(&x).unwrap()).norm() < 1e-14);
    }
}
