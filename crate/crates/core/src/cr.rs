//! Constraint checks for hypersurface-type CR geometry over ingested
//! curvature data.
//!
//! This is the Hermitian sibling of [`crate::legendrean`]: the contact
//! distribution carries a complex structure and a Levi form `h` fixed by a
//! contact form, and the Weyl-connection curvature in that scale consists
//! of `P` (mixed-index, Hermitian), `A` (holomorphic, complex symmetric),
//! and `T` (a complex vector). Only the unbarred legs are stored; the
//! barred legs are their conjugates by construction, which removes a
//! whole class of inconsistent inputs. With indices raised and lowered by
//! `h`, a curve direction `(U, V)` normalized to `h(U, V) = 1` passes the
//! along-curve conditions when
//!
//! ```text
//! K = U^a T_a + V^a conj(T)_a = 0
//! conj(h)^{-1} (P^T U + conj(A) V) = L U
//! h^{-1} (A U + P V)              = L V,   L = A(U,U) + P(U,V)
//! ```
//!
//! and the scale is Einstein-like exactly when every admissible direction
//! passes: `T = 0`, `A = 0`, `P = lambda h` with `lambda` real.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::algebra::C64;
use crate::legendrean::LegendreanSample;
use crate::suite::{rng as suite_rng, std_normal};

/// Default tolerance for exact-valued fixture data.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CrError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("fixture is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("could not read fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("direction is not normalized: h(U, V) = {re} + {im}i (want 1)")]
    Direction { re: f64, im: f64 },
    #[error("dimension mismatch: sample has n = {sample}, direction has n = {direction}")]
    Dimension { sample: usize, direction: usize },
    #[error("Levi form is singular")]
    SingularLevi,
    #[error("no samples to check")]
    Empty,
}

fn cmax(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.norm()))
}

fn vmax(v: &DVector<C64>) -> f64 {
    v.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

fn conj_m(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.map(|z| z.conj())
}

fn conj_v(v: &DVector<C64>) -> DVector<C64> {
    v.map(|z| z.conj())
}

/// Curvature components of an exact Weyl connection at one point of a CR
/// manifold of hypersurface type, in the scale of a chosen contact form.
///
/// Matrix conventions for the stored (unbarred) legs: `h[(a, b)]` and
/// `p[(a, b)]` carry one index of each type (row unbarred, column barred),
/// `a[(a, b)]` is the holomorphic symmetric block, `t[a]` the holomorphic
/// vector. The Levi form must be Hermitian (any signature) and invertible;
/// `A` must be symmetric. Hermiticity of `P` is a reality condition that
/// [`reality_check`] measures rather than a shape requirement, so that
/// violating data can be represented and caught by the checks.
#[derive(Clone, Debug)]
pub struct CRSample {
    pub n: usize,
    pub h: DMatrix<C64>,
    pub p: DMatrix<C64>,
    pub a: DMatrix<C64>,
    pub t: DVector<C64>,
}

impl CRSample {
    pub fn new(
        h: DMatrix<C64>,
        p: DMatrix<C64>,
        a: DMatrix<C64>,
        t: DVector<C64>,
    ) -> Result<Self, CrError> {
        let n = h.nrows();
        for (name, m) in [("h", &h), ("P", &p), ("A", &a)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(CrError::Schema {
                    path: name.into(),
                    message: format!(
                        "expected a {n} x {n} matrix, got {} x {}",
                        m.nrows(),
                        m.ncols()
                    ),
                });
            }
        }
        if t.len() != n {
            return Err(CrError::Schema {
                path: "T".into(),
                message: format!("expected a vector of length {n}, got {}", t.len()),
            });
        }
        let herm = cmax(&(&h - h.adjoint()));
        if herm > 1e-12 {
            return Err(CrError::Schema {
                path: "h".into(),
                message: format!("Levi form must be Hermitian, max |h - h*| = {herm:.3e}"),
            });
        }
        let skew = cmax(&(&a - a.transpose()));
        if skew > 1e-12 {
            return Err(CrError::Schema {
                path: "A".into(),
                message: format!("must be symmetric, max |a - a^T| = {skew:.3e}"),
            });
        }
        let finite = h
            .iter()
            .chain(p.iter())
            .chain(a.iter())
            .chain(t.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(CrError::Schema {
                path: "sample".into(),
                message: "contains a non-finite entry".into(),
            });
        }
        Ok(CRSample { n, h, p, a, t })
    }

    /// Zero curvature over a given Levi form.
    pub fn zero(h: DMatrix<C64>) -> Result<Self, CrError> {
        let n = h.nrows();
        CRSample::new(
            h,
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            DVector::zeros(n),
        )
    }

    /// The Einstein-like sample `P = lambda h`, everything else zero.
    pub fn einstein(h: DMatrix<C64>, lambda: f64) -> Result<Self, CrError> {
        let n = h.nrows();
        let p = &h * C64::new(lambda, 0.0);
        CRSample::new(h, p, DMatrix::zeros(n, n), DVector::zeros(n))
    }

    /// Embeds real split-leg data with equal `A` blocks over the identity
    /// Levi form. The two storage conventions describe the same structure,
    /// so checks on either side must agree.
    pub fn from_real(s: &LegendreanSample) -> Result<Self, CrError> {
        if cmax(&(s.a_lo.map(|v| C64::new(v, 0.0)) - s.a_hi.map(|v| C64::new(v, 0.0)))) > 0.0
            || (&s.t_lo - &s.t_hi).amax() > 0.0
        {
            return Err(CrError::Schema {
                path: "sample".into(),
                message: "real embedding needs equal legs (A_lo = A_hi, T_lo = T_hi)".into(),
            });
        }
        CRSample::new(
            DMatrix::identity(s.n, s.n).map(|v| C64::new(v, 0.0)),
            s.p.map(|v| C64::new(v, 0.0)),
            s.a_lo.map(|v| C64::new(v, 0.0)),
            s.t_lo.map(|v| C64::new(v, 0.0)),
        )
    }

    fn h_inv(&self) -> Result<DMatrix<C64>, CrError> {
        self.h.clone().try_inverse().ok_or(CrError::SingularLevi)
    }
}

/// A type-(c) contact direction: the holomorphic leg `U` and the
/// antiholomorphic leg `V` (components of the barred-index vector),
/// normalized so that `h(U, V) = U^T h V = 1`.
#[derive(Clone, Debug)]
pub struct CRDirection {
    pub u: DVector<C64>,
    pub v: DVector<C64>,
}

impl CRDirection {
    pub fn new(u: DVector<C64>, v: DVector<C64>, h: &DMatrix<C64>) -> Result<Self, CrError> {
        let pairing = (u.transpose() * h * &v)[(0, 0)];
        if (pairing - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(CrError::Direction {
                re: pairing.re,
                im: pairing.im,
            });
        }
        Ok(CRDirection { u, v })
    }

    /// Draws a random admissible direction over the given Levi form,
    /// rescaling the second leg to normalize the pairing.
    pub fn random(h: &DMatrix<C64>, r: &mut ChaCha8Rng) -> Self {
        let n = h.nrows();
        loop {
            let u = DVector::from_fn(n, |_, _| C64::new(std_normal(r), std_normal(r)));
            let v = DVector::from_fn(n, |_, _| C64::new(std_normal(r), std_normal(r)));
            let pairing = (u.transpose() * h * &v)[(0, 0)];
            if pairing.norm() > 0.3 {
                return CRDirection { u, v: v / pairing };
            }
        }
    }

    /// The conjugate-type direction through `u`: `V = conj(U)`, with `U`
    /// rescaled so the pairing is 1. Only exists where `h(U, conj(U))` is
    /// away from zero (always, for definite Levi forms).
    pub fn conjugate_type(h: &DMatrix<C64>, u: &DVector<C64>) -> Result<Self, CrError> {
        let pairing = (u.transpose() * h * conj_v(u))[(0, 0)];
        if pairing.norm() < 1e-10 {
            return Err(CrError::Direction {
                re: pairing.re,
                im: pairing.im,
            });
        }
        // h(U, conj U) is real for Hermitian h; scale U by 1/sqrt to fix it.
        let s = C64::new(1.0, 0.0) / pairing.sqrt();
        Ok(CRDirection {
            u: u * s,
            v: conj_v(&(u * s)),
        })
    }
}

/// The along-curve scalars `L = A(U, U) + P(U, V)` and
/// `K = U . T + V . conj(T)`, both complex for generic data.
pub fn cr_lambda_k(s: &CRSample, d: &CRDirection) -> (C64, C64) {
    let lambda = (d.u.transpose() * &s.a * &d.u)[(0, 0)] + (d.u.transpose() * &s.p * &d.v)[(0, 0)];
    let k = (d.u.transpose() * &s.t)[(0, 0)] + (d.v.transpose() * conj_v(&s.t))[(0, 0)];
    (lambda, k)
}

/// Residuals of the CR along-curve conditions.
#[derive(Clone, Copy, Debug)]
pub struct CrResiduals {
    pub k: f64,
    pub u_leg: f64,
    pub v_leg: f64,
}

impl CrResiduals {
    pub fn worst(&self) -> f64 {
        self.k.max(self.u_leg).max(self.v_leg)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CrReport {
    pub pass: bool,
    pub lambda: C64,
    pub residuals: CrResiduals,
}

/// Checks the along-curve conditions for one sample and direction, raising
/// and lowering indices with the Levi form.
pub fn cr_constraint_check(s: &CRSample, d: &CRDirection, tol: f64) -> Result<CrReport, CrError> {
    if d.u.len() != s.n || d.v.len() != s.n {
        return Err(CrError::Dimension {
            sample: s.n,
            direction: d.u.len().max(d.v.len()),
        });
    }
    let pairing = (d.u.transpose() * &s.h * &d.v)[(0, 0)];
    if (pairing - C64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(CrError::Direction {
            re: pairing.re,
            im: pairing.im,
        });
    }
    let h_inv = s.h_inv()?;
    let (lambda, k) = cr_lambda_k(s, d);
    let u_row = conj_m(&h_inv) * (s.p.transpose() * &d.u + conj_m(&s.a) * &d.v) - &d.u * lambda;
    let v_row = h_inv * (&s.a * &d.u + &s.p * &d.v) - &d.v * lambda;
    let residuals = CrResiduals {
        k: k.norm(),
        u_leg: vmax(&u_row),
        v_leg: vmax(&v_row),
    };
    Ok(CrReport {
        pass: residuals.worst() < tol,
        lambda,
        residuals,
    })
}

/// Checks whether a batch of samples is an Einstein-like scale: `T` and
/// `A` vanish and `P = lambda h` with a common real `lambda`, read off as
/// `trace(h^{-1} P) / n` per sample. Returns the verdict and the mean of
/// the real parts.
pub fn cr_einstein_check(samples: &[CRSample], tol: f64) -> Result<(bool, f64), CrError> {
    if samples.is_empty() {
        return Err(CrError::Empty);
    }
    let mut lambdas = Vec::with_capacity(samples.len());
    let mut pass = true;
    for s in samples {
        let h_inv = s.h_inv()?;
        let lambda = (h_inv * &s.p).trace() / C64::new(s.n as f64, 0.0);
        if lambda.im.abs() > tol {
            pass = false;
        }
        let iso = cmax(&(&s.p - &s.h * C64::new(lambda.re, 0.0)));
        if iso > tol || cmax(&s.a) > tol || vmax(&s.t) > tol {
            pass = false;
        }
        lambdas.push(lambda.re);
    }
    let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    if lambdas.iter().any(|l| (l - mean).abs() > tol) {
        pass = false;
    }
    Ok((pass, mean))
}

/// Optionally supplied barred legs of a fixture, to be checked against
/// the conjugates of the stored data.
#[derive(Clone, Debug)]
pub struct BarredLegs {
    pub t_bar: Option<DVector<C64>>,
    pub a_bar: Option<DMatrix<C64>>,
}

/// Deviations from the reality conventions tying the two index families
/// together.
#[derive(Clone, Debug)]
pub struct RealityReport {
    /// `max |P - P*|`: `P` must be Hermitian.
    pub p_hermitian: f64,
    /// `max |T_bar - conj(T)|` when a barred `T` leg is supplied, else 0.
    pub t_conjugate: f64,
    /// `max |A_bar - conj(A)|` when a barred `A` leg is supplied, else 0.
    pub a_conjugate: f64,
    /// The barred legs implied by the stored data.
    pub derived_t_bar: DVector<C64>,
    pub derived_a_bar: DMatrix<C64>,
}

impl RealityReport {
    pub fn worst(&self) -> f64 {
        self.p_hermitian.max(self.t_conjugate).max(self.a_conjugate)
    }
}

/// Measures the reality conditions. With one-leg storage the conjugate
/// identities hold by construction and the report certifies that by
/// returning the derived barred legs; independently supplied barred legs
/// are compared entry by entry.
pub fn reality_check(s: &CRSample, supplied: Option<&BarredLegs>) -> RealityReport {
    let derived_t_bar = conj_v(&s.t);
    let derived_a_bar = conj_m(&s.a);
    let mut t_conjugate = 0.0;
    let mut a_conjugate = 0.0;
    if let Some(legs) = supplied {
        if let Some(tb) = &legs.t_bar {
            t_conjugate = vmax(&(tb - &derived_t_bar));
        }
        if let Some(ab) = &legs.a_bar {
            a_conjugate = cmax(&(ab - &derived_a_bar));
        }
    }
    RealityReport {
        p_hermitian: cmax(&(&s.p - s.p.adjoint())),
        t_conjugate,
        a_conjugate,
        derived_t_bar,
        derived_a_bar,
    }
}

/// Monte-Carlo probe mirroring the split-leg version: the Einstein-like
/// conditions must predict the fate of every sampled direction.
pub fn cr_corollary_probe(s: &CRSample, trials: usize, seed: u64) -> bool {
    let (iso, _) = match cr_einstein_check(std::slice::from_ref(s), EXACT_TOL) {
        Ok(out) => out,
        Err(_) => return false,
    };
    let mut r = suite_rng(seed);
    if iso {
        for _ in 0..trials {
            let d = CRDirection::random(&s.h, &mut r);
            match cr_constraint_check(s, &d, EXACT_TOL) {
                Ok(rep) if rep.pass => {}
                _ => return false,
            }
        }
        true
    } else {
        for _ in 0..trials.saturating_mul(10) {
            let d = CRDirection::random(&s.h, &mut r);
            match cr_constraint_check(s, &d, EXACT_TOL) {
                Ok(rep) if !rep.pass => return true,
                Ok(_) => {}
                Err(_) => return false,
            }
        }
        false
    }
}

type RawComplex = [f64; 2];

fn to_c(v: RawComplex) -> C64 {
    C64::new(v[0], v[1])
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrSample {
    h: Vec<Vec<RawComplex>>,
    #[serde(rename = "P")]
    p: Vec<Vec<RawComplex>>,
    #[serde(rename = "A")]
    a: Vec<Vec<RawComplex>>,
    #[serde(rename = "T")]
    t: Vec<RawComplex>,
    #[serde(rename = "T_bar", default)]
    t_bar: Option<Vec<RawComplex>>,
    #[serde(rename = "A_bar", default)]
    a_bar: Option<Vec<Vec<RawComplex>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrFixture {
    n: usize,
    samples: Vec<RawCrSample>,
    #[serde(default)]
    curve_meta: Value,
}

/// A batch of CR curvature samples along one curve, as ingested from
/// JSON; complex entries are `[re, im]` pairs. Barred legs are optional
/// and retained for [`reality_check`].
#[derive(Debug)]
pub struct CrFixture {
    pub n: usize,
    pub samples: Vec<CRSample>,
    pub barred: Vec<BarredLegs>,
    pub curve_meta: Value,
}

fn cmatrix_from(path: &str, rows: &[Vec<RawComplex>], n: usize) -> Result<DMatrix<C64>, CrError> {
    if rows.len() != n {
        return Err(CrError::Schema {
            path: path.into(),
            message: format!("expected {n} rows, got {}", rows.len()),
        });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(CrError::Schema {
                path: format!("{path}[{i}]"),
                message: format!("expected {n} entries, got {}", row.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| to_c(rows[i][j])))
}

fn cvector_from(path: &str, entries: &[RawComplex], n: usize) -> Result<DVector<C64>, CrError> {
    if entries.len() != n {
        return Err(CrError::Schema {
            path: path.into(),
            message: format!("expected {n} entries, got {}", entries.len()),
        });
    }
    Ok(DVector::from_fn(n, |i, _| to_c(entries[i])))
}

/// Parses and validates a CR fixture document, reporting violations with
/// the JSON path of the offending field. Stored legs must satisfy the
/// shape invariants; `P` must be Hermitian within 1e-12 at ingestion.
pub fn parse_cr_fixture(json: &str) -> Result<CrFixture, CrError> {
    let raw: RawCrFixture = serde_json::from_str(json)?;
    if raw.n == 0 {
        return Err(CrError::Schema {
            path: "n".into(),
            message: "CR dimension must be positive".into(),
        });
    }
    let mut samples = Vec::with_capacity(raw.samples.len());
    let mut barred = Vec::with_capacity(raw.samples.len());
    for (i, rs) in raw.samples.iter().enumerate() {
        let at = |field: &str| format!("samples[{i}].{field}");
        let h = cmatrix_from(&at("h"), &rs.h, raw.n)?;
        let p = cmatrix_from(&at("P"), &rs.p, raw.n)?;
        let a = cmatrix_from(&at("A"), &rs.a, raw.n)?;
        let t = cvector_from(&at("T"), &rs.t, raw.n)?;
        let herm = cmax(&(&p - p.adjoint()));
        if herm > 1e-12 {
            return Err(CrError::Schema {
                path: at("P"),
                message: format!("must be Hermitian, max |P - P*| = {herm:.3e}"),
            });
        }
        let sample = CRSample::new(h, p, a, t).map_err(|e| match e {
            CrError::Schema { path, message } => CrError::Schema {
                path: format!("samples[{i}].{path}"),
                message,
            },
            other => other,
        })?;
        samples.push(sample);
        barred.push(BarredLegs {
            t_bar: match &rs.t_bar {
                Some(v) => Some(cvector_from(&at("T_bar"), v, raw.n)?),
                None => None,
            },
            a_bar: match &rs.a_bar {
                Some(m) => Some(cmatrix_from(&at("A_bar"), m, raw.n)?),
                None => None,
            },
        });
    }
    Ok(CrFixture {
        n: raw.n,
        samples,
        barred,
        curve_meta: raw.curve_meta,
    })
}

/// Reads and parses a CR fixture file.
pub fn load_cr_fixture(path: &std::path::Path) -> Result<CrFixture, CrError> {
    parse_cr_fixture(&std::fs::read_to_string(path)?)
}
