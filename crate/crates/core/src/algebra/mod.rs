//! Graded matrix Lie algebras for the three flat models.
//!
//! Each family is realised concretely as `(n+2) x (n+2)` matrices, with block
//! structure relative to the splitting `1 + n + 1` of the rows and columns:
//!
//! * `Conformal`: `so(n+1, 1)` preserving the form with antidiagonal corner
//!   ones and an identity middle block. Elements look like
//!   `[[l, -Y, 0], [-X, F, Y'], [0, X', -l]]` with `F` skew; the grading is
//!   `-1, 0, +1` for `X`, `(l, F)`, `Y`.
//! * `Legendrean`: `sl(n+2, R)`, graded `-2..+2` by block diagonals; the
//!   parabolic is the block upper triangle.
//! * `Cr`: `su(n+1, 1)` for the Hermitian form with the same block shape,
//!   treated as a real Lie algebra; grading again `-2..+2`.
//!
//! Everything downstream works with real coefficients: complex matrices are
//! flattened to real vectors (real parts then imaginary parts) before any
//! rank or membership computation.

mod constraints;
mod filtration;
mod oracle;
mod subspace;

pub use constraints::{verify_sym_constraints, ModelData, SymCheckReport};
pub use filtration::{dkr_filtration, FiltrationResult};
pub use oracle::{tangency_oracle, FlatCurve, KillingParams, OracleResult};
pub use subspace::Subspace;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Relative singular-value cutoff for every rank decision in this module.
pub const SV_CUTOFF: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("elements belong to different algebras")]
    TagMismatch,
    #[error("algebra construction failed: {0}")]
    SpecInvalid(String),
    #[error("direction lies in the parabolic; its curve is degenerate")]
    DegenerateDirection,
    #[error("element is not in the algebra (residual {residual:.3e})")]
    NotInAlgebra { residual: f64 },
    #[error("filtration failed to stabilise within the graded depth")]
    NoStabilization,
    #[error(
        "tangency system is sampling-degenerate (nullity {coarse} at base density, {fine} at doubled)"
    )]
    DegenerateSampling { coarse: usize, fine: usize },
    #[error("invalid curve data: {0}")]
    BadCurveData(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Conformal,
    Legendrean,
    Cr,
}

impl Family {
    pub fn is_complex(self) -> bool {
        matches!(self, Family::Cr)
    }
}

/// Identifies the ambient algebra of an element: family plus the geometry
/// dimension `n` (matrices are `(n+2) x (n+2)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlgebraTag {
    pub family: Family,
    pub n: usize,
}

impl AlgebraTag {
    pub fn matrix_size(&self) -> usize {
        self.n + 2
    }

    /// Length of the real coefficient vector of one element.
    pub fn real_len(&self) -> usize {
        2 * self.matrix_size() * self.matrix_size()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    pub tag: AlgebraTag,
    pub mat: DMatrix<C64>,
}

impl AlgebraElement {
    pub fn new(tag: AlgebraTag, mat: DMatrix<C64>) -> Self {
        let m = tag.matrix_size();
        assert_eq!(mat.nrows(), m, "matrix size mismatch");
        assert_eq!(mat.ncols(), m, "matrix size mismatch");
        AlgebraElement { tag, mat }
    }

    pub fn zeros(tag: AlgebraTag) -> Self {
        let m = tag.matrix_size();
        AlgebraElement::new(tag, DMatrix::zeros(m, m))
    }

    pub fn from_real(tag: AlgebraTag, mat: DMatrix<f64>) -> Self {
        AlgebraElement::new(tag, mat.map(|v| C64::new(v, 0.0)))
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        AlgebraElement::new(self.tag, &self.mat * C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.tag, other.tag);
        AlgebraElement::new(self.tag, &self.mat + &other.mat)
    }

    /// Flattens to `[Re(entries row-major), Im(entries row-major)]`.
    pub fn realify(&self) -> DVector<f64> {
        let m = self.tag.matrix_size();
        let mut v = DVector::zeros(2 * m * m);
        for r in 0..m {
            for c in 0..m {
                v[r * m + c] = self.mat[(r, c)].re;
                v[m * m + r * m + c] = self.mat[(r, c)].im;
            }
        }
        v
    }

    pub fn from_realified(tag: AlgebraTag, v: &DVector<f64>) -> Self {
        let m = tag.matrix_size();
        let mat = DMatrix::from_fn(m, m, |r, c| C64::new(v[r * m + c], v[m * m + r * m + c]));
        AlgebraElement::new(tag, mat)
    }
}

/// Matrix commutator `[X, Y] = XY - YX`.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
    if x.tag != y.tag {
        return Err(AlgebraError::TagMismatch);
    }
    Ok(AlgebraElement::new(
        x.tag,
        &x.mat * &y.mat - &y.mat * &x.mat,
    ))
}

/// A graded real basis of one of the model algebras, together with its
/// parabolic subalgebra.
#[derive(Clone, Debug)]
pub struct AlgebraSpec {
    pub tag: AlgebraTag,
    pub basis: Vec<AlgebraElement>,
    /// Grade of each basis element, parallel to `basis`.
    pub grades: Vec<i32>,
    /// Grading depth: grades run over `-k..=k`.
    pub k: i32,
}

fn e(m: usize, r: usize, c: usize, v: C64) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(m, m);
    out[(r, c)] = v;
    out
}

const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

impl AlgebraSpec {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `so(n+1, 1)` in the conformal block realization.
    pub fn conformal(n: usize) -> Result<Self, AlgebraError> {
        if n < 2 {
            return Err(AlgebraError::SpecInvalid("conformal needs n >= 2".into()));
        }
        let tag = AlgebraTag {
            family: Family::Conformal,
            n,
        };
        let m = tag.matrix_size();
        let mut basis = Vec::new();
        let mut grades = Vec::new();
        for i in 1..=n {
            // X = e_i: entries -X in the (mid, 0) block, X in (last, mid).
            basis.push(AlgebraElement::new(
                tag,
                e(m, i, 0, -ONE) + e(m, m - 1, i, ONE),
            ));
            grades.push(-1);
        }
        basis.push(AlgebraElement::new(
            tag,
            e(m, 0, 0, ONE) + e(m, m - 1, m - 1, -ONE),
        ));
        grades.push(0);
        for i in 1..=n {
            for j in (i + 1)..=n {
                basis.push(AlgebraElement::new(tag, e(m, i, j, ONE) + e(m, j, i, -ONE)));
                grades.push(0);
            }
        }
        for i in 1..=n {
            // Y = e_i: entries -Y in the (0, mid) block, Y in (mid, last).
            basis.push(AlgebraElement::new(
                tag,
                e(m, 0, i, -ONE) + e(m, i, m - 1, ONE),
            ));
            grades.push(1);
        }
        let spec = AlgebraSpec {
            tag,
            basis,
            grades,
            k: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `sl(n+2, R)` graded by the contact block structure.
    pub fn legendrean(n: usize) -> Result<Self, AlgebraError> {
        if n < 1 {
            return Err(AlgebraError::SpecInvalid("legendrean needs n >= 1".into()));
        }
        let tag = AlgebraTag {
            family: Family::Legendrean,
            n,
        };
        let m = tag.matrix_size();
        let block = |r: usize| -> i32 {
            if r == 0 {
                0
            } else if r < m - 1 {
                1
            } else {
                2
            }
        };
        let mut basis = Vec::new();
        let mut grades = Vec::new();
        for r in 0..m {
            for c in 0..m {
                if r == c {
                    continue;
                }
                basis.push(AlgebraElement::new(tag, e(m, r, c, ONE)));
                grades.push(block(c) - block(r));
            }
        }
        // Traceless diagonal: a - e, a + e balanced against the middle, and
        // consecutive middle differences.
        basis.push(AlgebraElement::new(
            tag,
            e(m, 0, 0, ONE) + e(m, m - 1, m - 1, -ONE),
        ));
        grades.push(0);
        let mut balanced = e(m, 0, 0, ONE) + e(m, m - 1, m - 1, ONE);
        for i in 1..=n {
            balanced += e(m, i, i, C64::new(-2.0 / n as f64, 0.0));
        }
        basis.push(AlgebraElement::new(tag, balanced));
        grades.push(0);
        for i in 1..n {
            basis.push(AlgebraElement::new(
                tag,
                e(m, i, i, ONE) + e(m, i + 1, i + 1, -ONE),
            ));
            grades.push(0);
        }
        let spec = AlgebraSpec {
            tag,
            basis,
            grades,
            k: 2,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `su(n+1, 1)` as a real Lie algebra of complex matrices.
    pub fn cr(n: usize) -> Result<Self, AlgebraError> {
        if n < 1 {
            return Err(AlgebraError::SpecInvalid("cr needs n >= 1".into()));
        }
        let tag = AlgebraTag {
            family: Family::Cr,
            n,
        };
        let m = tag.matrix_size();
        let mut basis = Vec::new();
        let mut grades = Vec::new();
        // grade -2: ip in the lower corner.
        basis.push(AlgebraElement::new(tag, e(m, m - 1, 0, I)));
        grades.push(-2);
        // grade -1: s and is columns.
        for i in 1..=n {
            basis.push(AlgebraElement::new(
                tag,
                e(m, i, 0, ONE) + e(m, m - 1, i, -ONE),
            ));
            grades.push(-1);
            basis.push(AlgebraElement::new(tag, e(m, i, 0, I) + e(m, m - 1, i, I)));
            grades.push(-1);
        }
        // grade 0: Re(lambda), Im(lambda) tied to trace(C), and the
        // skew-Hermitian traceless middle block.
        basis.push(AlgebraElement::new(
            tag,
            e(m, 0, 0, ONE) + e(m, m - 1, m - 1, -ONE),
        ));
        grades.push(0);
        let mut iml = e(m, 0, 0, I) + e(m, m - 1, m - 1, I);
        for i in 1..=n {
            iml += e(m, i, i, I * C64::new(-2.0 / n as f64, 0.0));
        }
        basis.push(AlgebraElement::new(tag, iml));
        grades.push(0);
        for i in 1..=n {
            for j in (i + 1)..=n {
                basis.push(AlgebraElement::new(tag, e(m, i, j, ONE) + e(m, j, i, -ONE)));
                grades.push(0);
                basis.push(AlgebraElement::new(tag, e(m, i, j, I) + e(m, j, i, I)));
                grades.push(0);
            }
        }
        for i in 1..n {
            basis.push(AlgebraElement::new(
                tag,
                e(m, i, i, I) + e(m, i + 1, i + 1, -I),
            ));
            grades.push(0);
        }
        // grade +1: r and ir columns.
        for i in 1..=n {
            basis.push(AlgebraElement::new(
                tag,
                e(m, i, m - 1, ONE) + e(m, 0, i, -ONE),
            ));
            grades.push(1);
            basis.push(AlgebraElement::new(tag, e(m, i, m - 1, I) + e(m, 0, i, I)));
            grades.push(1);
        }
        // grade +2: iq in the upper corner.
        basis.push(AlgebraElement::new(tag, e(m, 0, m - 1, I)));
        grades.push(2);
        let spec = AlgebraSpec {
            tag,
            basis,
            grades,
            k: 2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn by_family(family: Family, n: usize) -> Result<Self, AlgebraError> {
        match family {
            Family::Conformal => AlgebraSpec::conformal(n),
            Family::Legendrean => AlgebraSpec::legendrean(n),
            Family::Cr => AlgebraSpec::cr(n),
        }
    }

    /// Expected real dimension of the family.
    pub fn classical_dim(&self) -> usize {
        let n = self.tag.n;
        match self.tag.family {
            Family::Conformal => (n + 1) * (n + 2) / 2,
            Family::Legendrean | Family::Cr => (n + 2) * (n + 2) - 1,
        }
    }

    /// Residual of the family's defining relations for one matrix.
    pub fn defining_residual(&self, x: &AlgebraElement) -> f64 {
        let m = self.tag.matrix_size();
        match self.tag.family {
            Family::Conformal => {
                // M^T B + B M = 0 for B with corner ones and identity middle;
                // real entries.
                let b = form_matrix(m);
                let r = x.mat.transpose() * &b + &b * &x.mat;
                let im: f64 = x.mat.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
                r.norm() + im
            }
            Family::Legendrean => {
                let im: f64 = x.mat.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
                x.mat.trace().norm() + im
            }
            Family::Cr => {
                let h = form_matrix(m);
                let r = x.mat.adjoint() * &h + &h * &x.mat;
                r.norm() + x.mat.trace().norm()
            }
        }
    }

    pub fn validate(&self) -> Result<(), AlgebraError> {
        if self.basis.len() != self.classical_dim() {
            return Err(AlgebraError::SpecInvalid(format!(
                "basis has {} elements, family dimension is {}",
                self.basis.len(),
                self.classical_dim()
            )));
        }
        if self.grades.len() != self.basis.len() {
            return Err(AlgebraError::SpecInvalid(
                "grading does not cover the basis".into(),
            ));
        }
        for (i, x) in self.basis.iter().enumerate() {
            let r = self.defining_residual(x);
            if r > 1e-12 * (1.0 + x.norm()) {
                return Err(AlgebraError::SpecInvalid(format!(
                    "basis[{i}] violates the defining relations (residual {r:.3e})"
                )));
            }
        }
        let full = Subspace::span(self.tag, &self.basis);
        if full.dim() != self.basis.len() {
            return Err(AlgebraError::SpecInvalid(
                "basis is linearly dependent".into(),
            ));
        }
        // Bracket closure, checked pairwise through membership.
        for (i, x) in self.basis.iter().enumerate() {
            for y in self.basis.iter().skip(i + 1) {
                let b = bracket(x, y).expect("same tag");
                let (ok, _, residual) = full.membership(&b, 1e-10 * (1.0 + b.norm()));
                if !ok {
                    return Err(AlgebraError::SpecInvalid(format!(
                        "bracket closure fails (residual {residual:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Element with the given real coefficients in this basis.
    pub fn element(&self, coeffs: &DVector<f64>) -> AlgebraElement {
        assert_eq!(coeffs.len(), self.dim());
        let mut out = AlgebraElement::zeros(self.tag);
        for (c, b) in coeffs.iter().zip(&self.basis) {
            out = out.add(&b.scale(*c));
        }
        out
    }

    pub fn full_span(&self) -> Subspace {
        Subspace::span(self.tag, &self.basis)
    }

    /// Parabolic subalgebra: span of the grade `>= 0` part.
    pub fn parabolic(&self) -> Subspace {
        self.graded_span(|g| g >= 0)
    }

    pub fn graded_span(&self, keep: impl Fn(i32) -> bool) -> Subspace {
        let elems: Vec<AlgebraElement> = self
            .basis
            .iter()
            .zip(&self.grades)
            .filter(|(_, &g)| keep(g))
            .map(|(b, _)| b.clone())
            .collect();
        Subspace::span(self.tag, &elems)
    }
}

/// The invariant bilinear/Hermitian form shared by the conformal and CR
/// realizations: antidiagonal corner ones around an identity middle block.
fn form_matrix(m: usize) -> DMatrix<C64> {
    let mut b = DMatrix::zeros(m, m);
    b[(0, m - 1)] = ONE;
    b[(m - 1, 0)] = ONE;
    for i in 1..(m - 1) {
        b[(i, i)] = ONE;
    }
    b
}

/// Model direction generating a line through the flat conformal basepoint.
pub fn conformal_line_direction(
    spec: &AlgebraSpec,
    u: &DVector<f64>,
) -> Result<AlgebraElement, AlgebraError> {
    let n = spec.tag.n;
    if u.len() != n {
        return Err(AlgebraError::BadCurveData("direction length != n".into()));
    }
    if (u.norm() - 1.0).abs() > 1e-10 {
        return Err(AlgebraError::BadCurveData("direction must be unit".into()));
    }
    let params = KillingParams {
        x: u.clone(),
        f: DMatrix::zeros(n, n),
        lambda: 0.0,
        y: DVector::zeros(n),
    };
    Ok(params.to_matrix(spec.tag))
}

/// Model direction generating the circle with velocity `u` and acceleration
/// `c` at the basepoint: a conformal Killing field tangent to that circle.
pub fn conformal_circle_direction(
    spec: &AlgebraSpec,
    u: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<AlgebraElement, AlgebraError> {
    let n = spec.tag.n;
    if u.len() != n || c.len() != n {
        return Err(AlgebraError::BadCurveData("direction length != n".into()));
    }
    if (u.norm() - 1.0).abs() > 1e-10 || u.dot(c).abs() > 1e-10 {
        return Err(AlgebraError::BadCurveData(
            "need |u| = 1 and u.c = 0".into(),
        ));
    }
    let params = KillingParams {
        x: u.clone(),
        f: u * c.transpose() - c * u.transpose(),
        lambda: 0.0,
        y: u * c.norm_squared(),
    };
    Ok(params.to_matrix(spec.tag))
}

/// Legendrean model direction `(U, V)` with `U^a V_a = 1`.
pub fn legendrean_direction(
    spec: &AlgebraSpec,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<AlgebraElement, AlgebraError> {
    let n = spec.tag.n;
    let m = spec.tag.matrix_size();
    if u.len() != n || v.len() != n {
        return Err(AlgebraError::BadCurveData("direction length != n".into()));
    }
    if (u.dot(v) - 1.0).abs() > 1e-10 {
        return Err(AlgebraError::BadCurveData("need u.v = 1".into()));
    }
    let mut mat = DMatrix::zeros(m, m);
    for i in 0..n {
        mat[(i + 1, 0)] = C64::new(u[i], 0.0);
        mat[(m - 1, i + 1)] = C64::new(v[i], 0.0);
    }
    Ok(AlgebraElement::new(spec.tag, mat))
}

/// CR model direction with Levi-unit `u`.
pub fn cr_direction(spec: &AlgebraSpec, u: &DVector<C64>) -> Result<AlgebraElement, AlgebraError> {
    let n = spec.tag.n;
    let m = spec.tag.matrix_size();
    if u.len() != n {
        return Err(AlgebraError::BadCurveData("direction length != n".into()));
    }
    if (u.norm() - 1.0).abs() > 1e-10 {
        return Err(AlgebraError::BadCurveData("direction must be unit".into()));
    }
    let mut mat = DMatrix::zeros(m, m);
    for i in 0..n {
        mat[(i + 1, 0)] = u[i];
        mat[(m - 1, i + 1)] = -u[i].conj();
    }
    Ok(AlgebraElement::new(spec.tag, mat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn families_construct_with_expected_dimensions() {
        assert_eq!(AlgebraSpec::conformal(3).unwrap().dim(), 10);
        assert_eq!(AlgebraSpec::conformal(4).unwrap().dim(), 15);
        assert_eq!(AlgebraSpec::legendrean(2).unwrap().dim(), 15);
        assert_eq!(AlgebraSpec::cr(2).unwrap().dim(), 15);
        assert_eq!(AlgebraSpec::cr(3).unwrap().dim(), 24);
    }

    #[test]
    fn parabolic_spans_nonnegative_grades() {
        let spec = AlgebraSpec::legendrean(2).unwrap();
        let p = spec.parabolic();
        // a, e, C (4), Z (2), W (2), b: dim n^2 + 2n + 2 = 10.
        assert_eq!(p.dim(), 10);
        let neg = spec.graded_span(|g| g < 0);
        assert_eq!(neg.dim() + p.dim(), spec.dim());
    }

    #[test]
    fn bracket_is_antisymmetric_and_tagged() {
        let spec = AlgebraSpec::conformal(3).unwrap();
        let x = &spec.basis[0];
        let y = &spec.basis[4];
        let xy = bracket(x, y).unwrap();
        let yx = bracket(y, x).unwrap();
        assert!((xy.mat.clone() + yx.mat).norm() < 1e-14);
        assert!(bracket(x, x).unwrap().norm() < 1e-14);

        let other = AlgebraSpec::conformal(4).unwrap();
        assert!(matches!(
            bracket(x, &other.basis[0]),
            Err(AlgebraError::TagMismatch)
        ));
    }

    #[test]
    fn jacobi_identity_on_random_combinations() {
        let spec = AlgebraSpec::cr(2).unwrap();
        let mut rng = crate::suite::rng(7);
        for _ in 0..20 {
            let coeffs = |rng: &mut rand_chacha::ChaCha8Rng| {
                DVector::from_fn(spec.dim(), |_, _| crate::suite::std_normal(rng))
            };
            let x = spec.element(&coeffs(&mut rng));
            let y = spec.element(&coeffs(&mut rng));
            let z = spec.element(&coeffs(&mut rng));
            let j = bracket(&bracket(&x, &y).unwrap(), &z)
                .unwrap()
                .add(&bracket(&bracket(&y, &z).unwrap(), &x).unwrap())
                .add(&bracket(&bracket(&z, &x).unwrap(), &y).unwrap());
            assert!(j.norm() < 1e-9 * (1.0 + x.norm() * y.norm() * z.norm()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn conformal_brackets_stay_in_the_algebra(seed in 0u64..1000) {
            let spec = AlgebraSpec::conformal(3).unwrap();
            let mut rng = crate::suite::rng(seed);
            let c1 = DVector::from_fn(spec.dim(), |_, _| crate::suite::std_normal(&mut rng));
            let c2 = DVector::from_fn(spec.dim(), |_, _| crate::suite::std_normal(&mut rng));
            let b = bracket(&spec.element(&c1), &spec.element(&c2)).unwrap();
            prop_assert!(spec.defining_residual(&b) < 1e-10 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn realify_roundtrip() {
        let spec = AlgebraSpec::cr(2).unwrap();
        let x = &spec.basis[3];
        let v = x.realify();
        let back = AlgebraElement::from_realified(spec.tag, &v);
        assert!((back.mat - &x.mat).norm() < 1e-15);
    }
}
