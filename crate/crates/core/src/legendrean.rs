//! Constraint checks for contact Legendrean geometry over ingested
//! curvature data.
//!
//! A contact Legendrean structure splits the contact distribution into two
//! Legendrean legs, `H = E + F`, and an exact Weyl connection in the
//! contact directions carries curvature components `P`, `A` (one for each
//! leg), and `T` (likewise). This module does not derive those components
//! from a contact form; they are ingested as samples along a curve, in a
//! chosen exact scale, and the along-curve conditions are checked:
//!
//! ```text
//! K = U^a T_a + V_a T^a = 0
//! [ P    A_hi ] [U]     [U]
//! [ A_lo P^T  ] [V] = L [V],   L = A_lo(U,U) + P(U,V)
//! ```
//!
//! for a curve direction `(U, V)` normalized to `U^a V_a = 1`. The scale
//! is Einstein-like exactly when these hold for every admissible
//! direction, which pins the curvature to `T = 0`, `A = 0`, `P` a multiple
//! of the identity.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::suite::{rng, std_normal};

/// Default tolerance for exact-valued (rational) fixture data.
pub const EXACT_TOL: f64 = 1e-9;
/// Default tolerance for floating-point fixture data.
pub const FLOAT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LegendreanError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("fixture is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("could not read fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("direction is not normalized: U^a V_a = {pairing} (want 1)")]
    Direction { pairing: f64 },
    #[error("dimension mismatch: sample has n = {sample}, direction has n = {direction}")]
    Dimension { sample: usize, direction: usize },
    #[error("no samples to check")]
    Empty,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Curvature components of an exact Weyl connection at one curve point, in
/// the chosen scale. `n` is the rank of each Legendrean leg (the ambient
/// contact manifold has dimension `2n + 1`).
///
/// Matrix conventions: `p[(a, b)] = P_a^b`, `a_lo[(a, b)] = A_ab` (leg E),
/// `a_hi[(a, b)] = A^ab` (leg F); both `A` blocks are symmetric.
#[derive(Clone, Debug)]
pub struct LegendreanSample {
    pub n: usize,
    pub p: DMatrix<f64>,
    pub a_lo: DMatrix<f64>,
    pub a_hi: DMatrix<f64>,
    pub t_lo: DVector<f64>,
    pub t_hi: DVector<f64>,
}

impl LegendreanSample {
    pub fn new(
        p: DMatrix<f64>,
        a_lo: DMatrix<f64>,
        a_hi: DMatrix<f64>,
        t_lo: DVector<f64>,
        t_hi: DVector<f64>,
    ) -> Result<Self, LegendreanError> {
        let n = p.nrows();
        let shape = |name: &str, rows: usize, cols: usize| -> Result<(), LegendreanError> {
            if rows != n || cols != n {
                return Err(LegendreanError::Schema {
                    path: name.into(),
                    message: format!("expected a {n} x {n} matrix, got {rows} x {cols}"),
                });
            }
            Ok(())
        };
        shape("P", p.nrows(), p.ncols())?;
        shape("A_lo", a_lo.nrows(), a_lo.ncols())?;
        shape("A_hi", a_hi.nrows(), a_hi.ncols())?;
        for (name, t) in [("T_lo", &t_lo), ("T_hi", &t_hi)] {
            if t.len() != n {
                return Err(LegendreanError::Schema {
                    path: name.into(),
                    message: format!("expected a vector of length {n}, got {}", t.len()),
                });
            }
        }
        for (name, a) in [("A_lo", &a_lo), ("A_hi", &a_hi)] {
            let skew = max_abs(&(a - a.transpose()));
            if skew > 1e-12 {
                return Err(LegendreanError::Schema {
                    path: name.into(),
                    message: format!("must be symmetric, max |a - a^T| = {skew:.3e}"),
                });
            }
        }
        let finite = p.iter().all(|v| v.is_finite())
            && a_lo.iter().all(|v| v.is_finite())
            && a_hi.iter().all(|v| v.is_finite())
            && t_lo.iter().all(|v| v.is_finite())
            && t_hi.iter().all(|v| v.is_finite());
        if !finite {
            return Err(LegendreanError::Schema {
                path: "sample".into(),
                message: "contains a non-finite entry".into(),
            });
        }
        Ok(LegendreanSample {
            n,
            p,
            a_lo,
            a_hi,
            t_lo,
            t_hi,
        })
    }

    /// The zero-curvature sample.
    pub fn zero(n: usize) -> Self {
        LegendreanSample {
            n,
            p: DMatrix::zeros(n, n),
            a_lo: DMatrix::zeros(n, n),
            a_hi: DMatrix::zeros(n, n),
            t_lo: DVector::zeros(n),
            t_hi: DVector::zeros(n),
        }
    }

    /// The Einstein-like sample `P = lambda I`, everything else zero.
    pub fn einstein(n: usize, lambda: f64) -> Self {
        let mut s = LegendreanSample::zero(n);
        s.p = DMatrix::identity(n, n) * lambda;
        s
    }
}

/// A type-(c) contact direction: a vector on each Legendrean leg,
/// normalized so that `U^a V_a = 1`.
#[derive(Clone, Debug)]
pub struct LegendreanDirection {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

impl LegendreanDirection {
    pub fn new(u: DVector<f64>, v: DVector<f64>) -> Result<Self, LegendreanError> {
        let pairing = u.dot(&v);
        if (pairing - 1.0).abs() > 1e-10 {
            return Err(LegendreanError::Direction { pairing });
        }
        Ok(LegendreanDirection { u, v })
    }

    /// Draws a random admissible direction, rescaling the second leg to
    /// normalize the pairing. Draws are rejected while the legs are too
    /// close to orthogonal for the rescaling to stay well conditioned.
    pub fn random(n: usize, r: &mut ChaCha8Rng) -> Self {
        loop {
            let u = DVector::from_fn(n, |_, _| std_normal(r));
            let v = DVector::from_fn(n, |_, _| std_normal(r));
            let pairing = u.dot(&v);
            if pairing.abs() > 0.3 {
                return LegendreanDirection { u, v: v / pairing };
            }
        }
    }
}

/// The two scalars of the along-curve conditions:
/// `L = A_ab U^a U^b + P_a^b U^a V_b` and `K = U^a T_a + V_a T^a`.
pub fn lambda_k(s: &LegendreanSample, d: &LegendreanDirection) -> (f64, f64) {
    let lambda =
        (d.u.transpose() * &s.a_lo * &d.u)[(0, 0)] + (d.u.transpose() * &s.p * &d.v)[(0, 0)];
    let k = d.u.dot(&s.t_lo) + d.v.dot(&s.t_hi);
    (lambda, k)
}

/// Residuals of the along-curve conditions, by component group.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintResiduals {
    /// `|K|`.
    pub k: f64,
    /// Max-abs residual of `P^T U + A_hi V - L U`.
    pub u_leg: f64,
    /// Max-abs residual of `A_lo U + P V - L V`.
    pub v_leg: f64,
}

impl ConstraintResiduals {
    pub fn worst(&self) -> f64 {
        self.k.max(self.u_leg).max(self.v_leg)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstraintReport {
    pub pass: bool,
    pub lambda: f64,
    pub residuals: ConstraintResiduals,
}

/// Checks the along-curve conditions for one sample and direction.
pub fn constraint_check(
    s: &LegendreanSample,
    d: &LegendreanDirection,
    tol: f64,
) -> Result<ConstraintReport, LegendreanError> {
    if d.u.len() != s.n || d.v.len() != s.n {
        return Err(LegendreanError::Dimension {
            sample: s.n,
            direction: d.u.len().max(d.v.len()),
        });
    }
    let pairing = d.u.dot(&d.v);
    if (pairing - 1.0).abs() > 1e-10 {
        return Err(LegendreanError::Direction { pairing });
    }
    let (lambda, k) = lambda_k(s, d);
    let u_row = s.p.transpose() * &d.u + &s.a_hi * &d.v - &d.u * lambda;
    let v_row = &s.a_lo * &d.u + &s.p * &d.v - &d.v * lambda;
    let residuals = ConstraintResiduals {
        k: k.abs(),
        u_leg: u_row.amax(),
        v_leg: v_row.amax(),
    };
    Ok(ConstraintReport {
        pass: residuals.worst() < tol,
        lambda,
        residuals,
    })
}

/// Checks whether a batch of samples is an Einstein-like scale: `T` and
/// `A` vanish and `P` is a common multiple of the identity, with `lambda`
/// read off as `trace(P) / n` per sample and required consistent across
/// the batch. Returns the verdict and the mean `lambda`.
pub fn einstein_scale_check(
    samples: &[LegendreanSample],
    tol: f64,
) -> Result<(bool, f64), LegendreanError> {
    if samples.is_empty() {
        return Err(LegendreanError::Empty);
    }
    let mut lambdas = Vec::with_capacity(samples.len());
    let mut pass = true;
    for s in samples {
        let lambda = s.p.trace() / s.n as f64;
        let iso = max_abs(&(&s.p - DMatrix::identity(s.n, s.n) * lambda));
        if iso > tol
            || max_abs(&s.a_lo) > tol
            || max_abs(&s.a_hi) > tol
            || s.t_lo.amax() > tol
            || s.t_hi.amax() > tol
        {
            pass = false;
        }
        lambdas.push(lambda);
    }
    let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    if lambdas.iter().any(|l| (l - mean).abs() > tol) {
        pass = false;
    }
    Ok((pass, mean))
}

/// Monte-Carlo probe of the equivalence between the Einstein-like scale
/// conditions and every admissible direction passing the along-curve
/// check. Returns true when the sample behaves as the pointwise conditions
/// predict: if they hold, every sampled direction must pass; if they fail,
/// a failing witness direction must turn up. The witness search widens
/// tenfold before giving up, so a false return on a violating sample is a
/// genuine inconsistency, not sampling noise.
pub fn corollary_equivalence_probe(s: &LegendreanSample, trials: usize, seed: u64) -> bool {
    let (iso, _) = match einstein_scale_check(std::slice::from_ref(s), EXACT_TOL) {
        Ok(out) => out,
        Err(_) => return false,
    };
    let mut r = rng(seed);
    if iso {
        for _ in 0..trials {
            let d = LegendreanDirection::random(s.n, &mut r);
            match constraint_check(s, &d, EXACT_TOL) {
                Ok(rep) if rep.pass => {}
                _ => return false,
            }
        }
        true
    } else {
        for _ in 0..trials.saturating_mul(10) {
            let d = LegendreanDirection::random(s.n, &mut r);
            match constraint_check(s, &d, EXACT_TOL) {
                Ok(rep) if !rep.pass => return true,
                Ok(_) => {}
                Err(_) => return false,
            }
        }
        false
    }
}

/// The residual of the constant scale under the unique first-order
/// two-jet operator acting on scales, written in its own scale: the pair
/// `(-A_lo, -A_hi)`. A scale is in the kernel exactly when both `A`
/// blocks vanish in it.
pub fn bgg_trivial_scale(s: &LegendreanSample) -> (DMatrix<f64>, DMatrix<f64>) {
    (-&s.a_lo, -&s.a_hi)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "A_lo")]
    a_lo: Vec<Vec<f64>>,
    #[serde(rename = "A_hi")]
    a_hi: Vec<Vec<f64>>,
    #[serde(rename = "T_lo")]
    t_lo: Vec<f64>,
    #[serde(rename = "T_hi")]
    t_hi: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    n: usize,
    samples: Vec<RawSample>,
    #[serde(default)]
    curve_meta: Value,
}

/// A batch of curvature samples along one curve, as ingested from JSON.
#[derive(Debug)]
pub struct LegendreanFixture {
    pub n: usize,
    pub samples: Vec<LegendreanSample>,
    /// Free-form provenance carried through verbatim.
    pub curve_meta: Value,
}

pub(crate) fn matrix_from_rows(
    path: &str,
    rows: &[Vec<f64>],
    n: usize,
) -> Result<DMatrix<f64>, LegendreanError> {
    if rows.len() != n {
        return Err(LegendreanError::Schema {
            path: path.into(),
            message: format!("expected {n} rows, got {}", rows.len()),
        });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(LegendreanError::Schema {
                path: format!("{path}[{i}]"),
                message: format!("expected {n} entries, got {}", row.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn vector_from(path: &str, entries: &[f64], n: usize) -> Result<DVector<f64>, LegendreanError> {
    if entries.len() != n {
        return Err(LegendreanError::Schema {
            path: path.into(),
            message: format!("expected {n} entries, got {}", entries.len()),
        });
    }
    Ok(DVector::from_row_slice(entries))
}

/// Parses and validates a fixture document. Shape and symmetry violations
/// are reported with the JSON path of the offending field.
pub fn parse_fixture(json: &str) -> Result<LegendreanFixture, LegendreanError> {
    let raw: RawFixture = serde_json::from_str(json)?;
    if raw.n == 0 {
        return Err(LegendreanError::Schema {
            path: "n".into(),
            message: "leg rank must be positive".into(),
        });
    }
    let mut samples = Vec::with_capacity(raw.samples.len());
    for (i, rs) in raw.samples.iter().enumerate() {
        let at = |field: &str| format!("samples[{i}].{field}");
        let p = matrix_from_rows(&at("P"), &rs.p, raw.n)?;
        let a_lo = matrix_from_rows(&at("A_lo"), &rs.a_lo, raw.n)?;
        let a_hi = matrix_from_rows(&at("A_hi"), &rs.a_hi, raw.n)?;
        let t_lo = vector_from(&at("T_lo"), &rs.t_lo, raw.n)?;
        let t_hi = vector_from(&at("T_hi"), &rs.t_hi, raw.n)?;
        let sample = LegendreanSample::new(p, a_lo, a_hi, t_lo, t_hi).map_err(|e| match e {
            LegendreanError::Schema { path, message } => LegendreanError::Schema {
                path: format!("samples[{i}].{path}"),
                message,
            },
            other => other,
        })?;
        samples.push(sample);
    }
    Ok(LegendreanFixture {
        n: raw.n,
        samples,
        curve_meta: raw.curve_meta,
    })
}

/// Reads and parses a fixture file.
pub fn load_fixture(path: &std::path::Path) -> Result<LegendreanFixture, LegendreanError> {
    parse_fixture(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| std_normal(r));
        (&a + a.transpose()) * 0.5
    }

    fn random_sample(r: &mut ChaCha8Rng, n: usize) -> LegendreanSample {
        LegendreanSample::new(
            DMatrix::from_fn(n, n, |_, _| std_normal(r)),
            random_symmetric(r, n),
            random_symmetric(r, n),
            DVector::from_fn(n, |_, _| std_normal(r)),
            DVector::from_fn(n, |_, _| std_normal(r)),
        )
        .unwrap()
    }

    /// Second contraction routine, written index by index.
    fn lambda_k_by_loops(s: &LegendreanSample, d: &LegendreanDirection) -> (f64, f64) {
        let n = s.n;
        let mut lambda = 0.0;
        for a in 0..n {
            for b in 0..n {
                lambda += s.a_lo[(a, b)] * d.u[a] * d.u[b] + s.p[(a, b)] * d.u[a] * d.v[b];
            }
        }
        let mut k = 0.0;
        for a in 0..n {
            k += d.u[a] * s.t_lo[a] + d.v[a] * s.t_hi[a];
        }
        (lambda, k)
    }

    #[test]
    fn the_two_scalars_on_simple_samples() {
        let n = 3;
        let d = LegendreanDirection::new(
            DVector::from_vec(vec![1.0, 0.5, -0.2]),
            DVector::from_vec(vec![1.0, 0.4, 1.0]),
        )
        .unwrap();
        let (lambda, k) = lambda_k(&LegendreanSample::zero(n), &d);
        assert_eq!((lambda, k), (0.0, 0.0));

        let (lambda, k) = lambda_k(&LegendreanSample::einstein(n, 1.0), &d);
        assert!((lambda - 1.0).abs() < 1e-15);
        assert_eq!(k, 0.0);
    }

    #[test]
    fn contractions_match_an_independent_loop_oracle() {
        let mut r = rng(41);
        for n in [2usize, 3, 5] {
            for _ in 0..20 {
                let s = random_sample(&mut r, n);
                let d = LegendreanDirection::random(n, &mut r);
                let fast = lambda_k(&s, &d);
                let slow = lambda_k_by_loops(&s, &d);
                assert!((fast.0 - slow.0).abs() < 1e-12);
                assert!((fast.1 - slow.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contractions_are_linear_in_the_sample_and_homogeneous_in_the_direction() {
        let mut r = rng(43);
        let n = 3;
        let s1 = random_sample(&mut r, n);
        let s2 = random_sample(&mut r, n);
        let d = LegendreanDirection::random(n, &mut r);
        let (a, b) = (0.7, -1.3);
        let combo = LegendreanSample::new(
            &s1.p * a + &s2.p * b,
            &s1.a_lo * a + &s2.a_lo * b,
            &s1.a_hi * a + &s2.a_hi * b,
            &s1.t_lo * a + &s2.t_lo * b,
            &s1.t_hi * a + &s2.t_hi * b,
        )
        .unwrap();
        let (l1, k1) = lambda_k(&s1, &d);
        let (l2, k2) = lambda_k(&s2, &d);
        let (lc, kc) = lambda_k(&combo, &d);
        assert!((lc - (a * l1 + b * l2)).abs() < 1e-12);
        assert!((kc - (a * k1 + b * k2)).abs() < 1e-12);

        // Homogeneity degrees dictated by the index picture: with A_lo = 0
        // the scalar is bilinear, with P = 0 it is quadratic in U.
        let (c1, c2) = (1.9, -0.4);
        let scaled = LegendreanDirection {
            u: &d.u * c1,
            v: &d.v * c2,
        };
        let mut no_a = s1.clone();
        no_a.a_lo = DMatrix::zeros(n, n);
        assert!((lambda_k(&no_a, &scaled).0 - c1 * c2 * lambda_k(&no_a, &d).0).abs() < 1e-12);
        let mut no_p = s1.clone();
        no_p.p = DMatrix::zeros(n, n);
        assert!((lambda_k(&no_p, &scaled).0 - c1 * c1 * lambda_k(&no_p, &d).0).abs() < 1e-12);
        assert!(
            (lambda_k(&s1, &scaled).1 - (c1 * d.u.dot(&s1.t_lo) + c2 * d.v.dot(&s1.t_hi))).abs()
                < 1e-12
        );
    }

    #[test]
    fn zero_and_einstein_samples_pass_for_every_admissible_direction() {
        let mut r = rng(47);
        for n in [2usize, 3] {
            for _ in 0..50 {
                let d = LegendreanDirection::random(n, &mut r);
                let rep = constraint_check(&LegendreanSample::zero(n), &d, EXACT_TOL).unwrap();
                assert!(rep.pass && rep.lambda.abs() < 1e-12);

                let rep =
                    constraint_check(&LegendreanSample::einstein(n, -2.7), &d, EXACT_TOL).unwrap();
                assert!(rep.pass, "residuals {:?}", rep.residuals);
                assert!((rep.lambda + 2.7).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn a_torsion_component_fails_through_the_scalar_k() {
        let n = 3;
        let mut s = LegendreanSample::zero(n);
        s.t_lo[0] = 1.0;
        let d = LegendreanDirection::new(
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![1.0, 2.0, -0.5]),
        )
        .unwrap();
        let rep = constraint_check(&s, &d, EXACT_TOL).unwrap();
        assert!(!rep.pass);
        assert!((rep.residuals.k - 1.0).abs() < 1e-15);
        assert_eq!(rep.residuals.u_leg, 0.0);
        assert_eq!(rep.residuals.v_leg, 0.0);
    }

    #[test]
    fn unnormalized_directions_are_rejected() {
        let n = 2;
        let d = LegendreanDirection {
            u: DVector::from_vec(vec![1.0, 0.0]),
            v: DVector::from_vec(vec![2.0, 0.0]),
        };
        let err = constraint_check(&LegendreanSample::zero(n), &d, EXACT_TOL).unwrap_err();
        assert!(matches!(err, LegendreanError::Direction { .. }));
        assert!(LegendreanDirection::new(d.u.clone(), d.v.clone()).is_err());
    }

    #[test]
    fn lambda_agrees_with_both_rayleigh_quotients_on_passing_data() {
        // A non-isotropic P that still passes for one particular direction.
        let n = 3;
        let s = LegendreanSample::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 4.0])),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            DVector::zeros(n),
            DVector::zeros(n),
        )
        .unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let d = LegendreanDirection::new(e1.clone(), e1).unwrap();
        let rep = constraint_check(&s, &d, EXACT_TOL).unwrap();
        assert!(rep.pass);
        assert!((rep.lambda - 2.0).abs() < 1e-15);

        // Both contractions of the block system recover the same scalar.
        let u_quotient = d.v.dot(&(s.p.transpose() * &d.u + &s.a_hi * &d.v));
        let v_quotient = d.u.dot(&(&s.a_lo * &d.u + &s.p * &d.v));
        assert!((u_quotient - rep.lambda).abs() < 1e-12);
        assert!((v_quotient - rep.lambda).abs() < 1e-12);
    }

    #[test]
    fn scale_check_requires_isotropy_and_a_common_lambda() {
        let zeros = vec![LegendreanSample::zero(2); 4];
        let (pass, lambda) = einstein_scale_check(&zeros, EXACT_TOL).unwrap();
        assert!(pass && lambda == 0.0);

        let batch: Vec<_> = (0..5).map(|_| LegendreanSample::einstein(3, 1.0)).collect();
        let (pass, lambda) = einstein_scale_check(&batch, EXACT_TOL).unwrap();
        assert!(pass);
        assert!((lambda - 1.0).abs() < 1e-15);

        let diag = LegendreanSample::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])),
            DMatrix::zeros(3, 3),
            DMatrix::zeros(3, 3),
            DVector::zeros(3),
            DVector::zeros(3),
        )
        .unwrap();
        let (pass, _) = einstein_scale_check(std::slice::from_ref(&diag), EXACT_TOL).unwrap();
        assert!(!pass);

        // Isotropic at each sample but drifting across the batch.
        let drift = vec![
            LegendreanSample::einstein(2, 1.0),
            LegendreanSample::einstein(2, 1.5),
        ];
        let (pass, _) = einstein_scale_check(&drift, EXACT_TOL).unwrap();
        assert!(!pass);

        assert!(matches!(
            einstein_scale_check(&[], EXACT_TOL),
            Err(LegendreanError::Empty)
        ));
    }

    #[test]
    fn the_probe_confirms_the_equivalence_in_both_directions() {
        assert!(corollary_equivalence_probe(
            &LegendreanSample::einstein(2, 1.0),
            200,
            101
        ));
        assert!(corollary_equivalence_probe(
            &LegendreanSample::zero(3),
            200,
            103
        ));

        let mut bad = LegendreanSample::zero(3);
        bad.a_lo[(0, 0)] = 1.0;
        assert!(corollary_equivalence_probe(&bad, 200, 107));
    }

    #[test]
    fn every_single_component_violation_is_witnessed() {
        for n in [2usize, 3] {
            let mut violations: Vec<(String, LegendreanSample)> = Vec::new();
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
            // A non-isotropic diagonal P.
            with("P diag".into(), &|s| {
                for i in 0..n {
                    s.p[(i, i)] = 1.0 + i as f64;
                }
            });
            for (seed, (name, s)) in violations.iter().enumerate() {
                assert!(
                    corollary_equivalence_probe(s, 200, 1000 + seed as u64),
                    "n = {n}: no witness for violation in {name}"
                );
            }
        }
    }

    #[test]
    fn trivial_scale_residual_is_minus_the_a_blocks() {
        let mut r = rng(53);
        let s = random_sample(&mut r, 3);
        let (lo, hi) = bgg_trivial_scale(&s);
        assert_eq!(lo, -&s.a_lo);
        assert_eq!(hi, -&s.a_hi);

        let (lo, hi) = bgg_trivial_scale(&LegendreanSample::einstein(3, 2.0));
        assert!(max_abs(&lo) == 0.0 && max_abs(&hi) == 0.0);
    }

    #[test]
    fn fixtures_parse_validate_and_report_paths() {
        let good = r#"{
            "n": 2,
            "samples": [{
                "P": [[1.0, 0.0], [0.0, 1.0]],
                "A_lo": [[0.0, 0.0], [0.0, 0.0]],
                "A_hi": [[0.0, 0.0], [0.0, 0.0]],
                "T_lo": [0.0, 0.0],
                "T_hi": [0.0, 0.0]
            }],
            "curve_meta": {"model": "test"}
        }"#;
        let fx = parse_fixture(good).unwrap();
        assert_eq!(fx.n, 2);
        assert_eq!(fx.samples.len(), 1);
        assert_eq!(fx.curve_meta["model"], "test");
        let (pass, lambda) = einstein_scale_check(&fx.samples, EXACT_TOL).unwrap();
        assert!(pass && (lambda - 1.0).abs() < 1e-15);

        let ragged = good.replace("[[1.0, 0.0], [0.0, 1.0]]", "[[1.0, 0.0], [0.0]]");
        let err = parse_fixture(&ragged).unwrap_err().to_string();
        assert!(err.contains("samples[0].P[1]"), "got: {err}");

        let asym = good.replace(
            r#""A_lo": [[0.0, 0.0], [0.0, 0.0]]"#,
            r#""A_lo": [[0.0, 0.5], [0.0, 0.0]]"#,
        );
        let err = parse_fixture(&asym).unwrap_err().to_string();
        assert!(
            err.contains("samples[0].A_lo") && err.contains("symmetric"),
            "got: {err}"
        );

        let unknown = good.replace(r#""n": 2,"#, r#""n": 2, "extra": 1,"#);
        assert!(parse_fixture(&unknown).is_err());
    }
}
