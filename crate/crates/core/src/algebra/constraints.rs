//! Shape checks for computed symmetry algebras.
//!
//! Each model curve has a predicted description of its symmetry algebra as
//! linear constraints on the matrix blocks. [`verify_sym_constraints`] takes
//! a computed subspace and measures how badly each basis element violates
//! those constraints; a genuine symmetry algebra scores at round-off level.

use super::{AlgebraError, Family, Subspace, C64};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub enum ModelData {
    /// Flat line with unit direction `u`.
    ConformalLine { u: DVector<f64> },
    /// Flat circle with unit velocity `u` and centripetal acceleration `c`.
    ConformalCircle { u: DVector<f64>, c: DVector<f64> },
    /// Contact-projective model chord with `u . v = 1`.
    Legendrean { u: DVector<f64>, v: DVector<f64> },
    /// CR model chain direction, a Levi-unit complex vector.
    Cr { u: DVector<C64> },
}

impl ModelData {
    fn family(&self) -> Family {
        match self {
            ModelData::ConformalLine { .. } | ModelData::ConformalCircle { .. } => {
                Family::Conformal
            }
            ModelData::Legendrean { .. } => Family::Legendrean,
            ModelData::Cr { .. } => Family::Cr,
        }
    }

    fn n(&self) -> usize {
        match self {
            ModelData::ConformalLine { u } => u.len(),
            ModelData::ConformalCircle { u, .. } => u.len(),
            ModelData::Legendrean { u, .. } => u.len(),
            ModelData::Cr { u } => u.len(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SymCheckReport {
    /// Worst constraint violation of each (orthonormalised) basis element.
    pub per_element: Vec<f64>,
    pub max_residual: f64,
}

impl SymCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual < tol
    }
}

/// Conformal blocks of a real `(n+2) x (n+2)` matrix in the algebra:
/// `lambda` scaling, `x` translation-like column, `y` row, skew middle `f`.
struct ConformalBlocks {
    lambda: f64,
    x: DVector<f64>,
    y: DVector<f64>,
    f: DMatrix<f64>,
}

fn conformal_blocks(mat: &DMatrix<C64>, n: usize) -> ConformalBlocks {
    ConformalBlocks {
        lambda: mat[(0, 0)].re,
        x: DVector::from_fn(n, |b, _| -mat[(b + 1, 0)].re),
        y: DVector::from_fn(n, |c, _| -mat[(0, c + 1)].re),
        f: DMatrix::from_fn(n, n, |b, c| mat[(b + 1, c + 1)].re),
    }
}

fn check_elem(model: &ModelData, mat: &DMatrix<C64>) -> f64 {
    let n = model.n();
    let m = n + 2;
    match model {
        ModelData::ConformalLine { u } => {
            let bl = conformal_blocks(mat, n);
            let f_dir = bl.x.dot(u);
            let h = bl.y.dot(u);
            [
                (&bl.x - u * f_dir).norm(),
                (&bl.f * u).norm(),
                (&bl.y - u * h).norm(),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        }
        ModelData::ConformalCircle { u, c } => {
            let bl = conformal_blocks(mat, n);
            let f_dir = bl.x.dot(u);
            let fc = &bl.f * c;
            let reduced = &bl.y - c * bl.lambda - &fc;
            let h = reduced.dot(u);
            [
                (&bl.x - u * f_dir).norm(),
                (&bl.f * u + c * f_dir).norm(),
                (reduced - u * h).norm(),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        }
        ModelData::Legendrean { u, v } => {
            let re = |r: usize, c: usize| mat[(r, c)].re;
            let a = re(0, 0);
            let e = re(m - 1, m - 1);
            let kappa = 0.5 * (a + e);
            let x = DVector::from_fn(n, |i, _| re(i + 1, 0));
            let y = DVector::from_fn(n, |i, _| re(m - 1, i + 1));
            let z = DVector::from_fn(n, |i, _| re(0, i + 1));
            let w = DVector::from_fn(n, |i, _| re(i + 1, m - 1));
            let cmid = DMatrix::from_fn(n, n, |i, j| re(i + 1, j + 1));
            let f_dir = (x.dot(u) + y.dot(v)) / (u.norm_squared() + v.norm_squared());
            let h = (z.dot(v) + w.dot(u)) / (u.norm_squared() + v.norm_squared());
            [
                (&x - u * f_dir).norm(),
                (&y - v * f_dir).norm(),
                (&z - v * h).norm(),
                (&w - u * h).norm(),
                (&cmid * u - u * kappa).norm(),
                (cmid.transpose() * v - v * kappa).norm(),
                re(0, m - 1).abs(),
                re(m - 1, 0).abs(),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        }
        ModelData::Cr { u } => {
            let lambda = mat[(0, 0)];
            let s = DVector::from_fn(n, |i, _| mat[(i + 1, 0)]);
            let r = DVector::from_fn(n, |i, _| mat[(i + 1, m - 1)]);
            let cmid = DMatrix::from_fn(n, n, |i, j| mat[(i + 1, j + 1)]);
            let f_dir = u.dotc(&s).re;
            let h = u.dotc(&r).re;
            let theta = lambda.im;
            [
                mat[(m - 1, 0)].norm(),
                mat[(0, m - 1)].norm(),
                (&s - u * C64::new(f_dir, 0.0)).norm(),
                (&r - u * C64::new(h, 0.0)).norm(),
                (&cmid * u - u * C64::new(0.0, theta)).norm(),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        }
    }
}

/// Measures how well `sym` matches the predicted shape for `model`.
pub fn verify_sym_constraints(
    sym: &Subspace,
    model: &ModelData,
) -> Result<SymCheckReport, AlgebraError> {
    if sym.tag.family != model.family() || sym.tag.n != model.n() {
        return Err(AlgebraError::TagMismatch);
    }
    let per_element: Vec<f64> = sym
        .orthonormal_elements()
        .iter()
        .map(|x| check_elem(model, &x.mat))
        .collect();
    let max_residual = per_element.iter().copied().fold(0.0, f64::max);
    Ok(SymCheckReport {
        per_element,
        max_residual,
    })
}
