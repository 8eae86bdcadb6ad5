//! Numerically robust subspaces of a matrix algebra.
//!
//! A subspace keeps the caller's spanning elements (for reporting
//! coefficients in a meaningful basis) alongside an orthonormal frame of
//! their realified coordinate vectors, computed once by SVD. Rank decisions
//! use the relative cutoff [`SV_CUTOFF`](super::SV_CUTOFF).

use super::{AlgebraElement, AlgebraTag, SV_CUTOFF};
use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

#[derive(Clone, Debug)]
pub struct Subspace {
    pub tag: AlgebraTag,
    /// The spanning elements as provided (possibly redundant).
    pub spanning: Vec<AlgebraElement>,
    /// Columns form an orthonormal basis of the realified span.
    frame: DMatrix<f64>,
}

impl Subspace {
    /// Span of the given elements; linearly dependent inputs are fine and
    /// simply do not increase the dimension.
    pub fn span(tag: AlgebraTag, elems: &[AlgebraElement]) -> Self {
        for x in elems {
            assert_eq!(x.tag, tag, "span of elements from different algebras");
        }
        let rows = tag.real_len();
        if elems.is_empty() {
            return Subspace {
                tag,
                spanning: Vec::new(),
                frame: DMatrix::zeros(rows, 0),
            };
        }
        let mut a = DMatrix::zeros(rows, elems.len());
        for (j, x) in elems.iter().enumerate() {
            a.set_column(j, &x.realify());
        }
        let svd = a.svd(true, false);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > SV_CUTOFF * smax)
            .count();
        let u = svd.u.expect("svd with u");
        let frame = u.columns(0, rank).into_owned();
        Subspace {
            tag,
            spanning: elems.to_vec(),
            frame,
        }
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// Orthogonal projection of the realified vector onto the span.
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.frame * (self.frame.transpose() * v)
    }

    /// Membership test. Returns `(inside, coefficients, residual)` where the
    /// coefficients express `x` in the original spanning elements (least
    /// squares, so they are meaningful only when `inside` holds).
    pub fn membership(&self, x: &AlgebraElement, tol: f64) -> (bool, Option<DVector<f64>>, f64) {
        assert_eq!(x.tag, self.tag, "membership across algebras");
        let v = x.realify();
        let residual = (&v - self.project(&v)).norm();
        if residual >= tol {
            return (false, None, residual);
        }
        if self.spanning.is_empty() {
            return (true, Some(DVector::zeros(0)), residual);
        }
        let rows = self.tag.real_len();
        let mut a = DMatrix::zeros(rows, self.spanning.len());
        for (j, b) in self.spanning.iter().enumerate() {
            a.set_column(j, &b.realify());
        }
        let coeffs = a
            .svd(true, true)
            .solve(&v, SV_CUTOFF)
            .expect("least squares solve");
        (true, Some(coeffs), residual)
    }

    /// Component of `x` orthogonal to the span, as a realified vector.
    pub fn orthogonal_defect(&self, x: &AlgebraElement) -> DVector<f64> {
        assert_eq!(x.tag, self.tag);
        let v = x.realify();
        &v - self.project(&v)
    }

    /// Largest projection defect over the other space's frame: zero iff
    /// `other` is contained in `self` (up to round-off).
    pub fn containment_defect(&self, other: &Subspace) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..other.frame.ncols() {
            let v = other.frame.column(j).into_owned();
            worst = worst.max((&v - self.project(&v)).norm());
        }
        worst
    }

    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        self.containment_defect(other) < tol
    }

    /// Dimension of the intersection, via `dim A + dim B - rank [A | B]`.
    pub fn intersection_dim(&self, other: &Subspace) -> usize {
        assert_eq!(self.tag, other.tag);
        let total = self.dim() + other.dim();
        if total == 0 {
            return 0;
        }
        let rows = self.tag.real_len();
        let mut joint = DMatrix::zeros(rows, total);
        for j in 0..self.dim() {
            joint.set_column(j, &self.frame.column(j).into_owned());
        }
        for j in 0..other.dim() {
            joint.set_column(self.dim() + j, &other.frame.column(j).into_owned());
        }
        let sv = joint.singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > SV_CUTOFF * smax).count();
        total - rank
    }

    /// Span of `self` together with the extra elements.
    pub fn extended(&self, extra: &[AlgebraElement]) -> Subspace {
        let mut elems = self.spanning.clone();
        elems.extend_from_slice(extra);
        Subspace::span(self.tag, &elems)
    }

    /// An orthonormal basis of the span, as algebra elements.
    pub fn orthonormal_elements(&self) -> Vec<AlgebraElement> {
        (0..self.dim())
            .map(|j| AlgebraElement::from_realified(self.tag, &self.frame.column(j).into_owned()))
            .collect()
    }
}

impl Serialize for Subspace {
    /// Matrices are nested row-major arrays; complex entries become
    /// two-element `[re, im]` arrays.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let m = self.tag.matrix_size();
        let complex = self.tag.family.is_complex();
        let elems = self.orthonormal_elements();
        let mut st = serializer.serialize_struct("Subspace", 4)?;
        st.serialize_field("field", if complex { "complex" } else { "real" })?;
        st.serialize_field("matrix_size", &m)?;
        st.serialize_field("dim", &self.dim())?;
        if complex {
            let basis: Vec<Vec<Vec<[f64; 2]>>> = elems
                .iter()
                .map(|x| {
                    (0..m)
                        .map(|r| {
                            (0..m)
                                .map(|c| [x.mat[(r, c)].re, x.mat[(r, c)].im])
                                .collect()
                        })
                        .collect()
                })
                .collect();
            st.serialize_field("basis", &basis)?;
        } else {
            let basis: Vec<Vec<Vec<f64>>> = elems
                .iter()
                .map(|x| {
                    (0..m)
                        .map(|r| (0..m).map(|c| x.mat[(r, c)].re).collect())
                        .collect()
                })
                .collect();
            st.serialize_field("basis", &basis)?;
        }
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::super::AlgebraSpec;
    use super::*;

    #[test]
    fn span_drops_redundant_elements() {
        let spec = AlgebraSpec::conformal(3).unwrap();
        let x = spec.basis[0].clone();
        let y = spec.basis[1].clone();
        let sum = x.add(&y);
        let s = Subspace::span(spec.tag, &[x, y, sum]);
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn membership_accepts_interior_and_rejects_perturbed() {
        let spec = AlgebraSpec::conformal(4).unwrap();
        let s = spec.parabolic();
        let inside = spec
            .basis
            .iter()
            .zip(&spec.grades)
            .find(|(_, &g)| g == 0)
            .unwrap()
            .0
            .clone();
        let (ok, coeffs, r) = s.membership(&inside, 1e-9);
        assert!(ok, "residual {r}");
        let c = coeffs.unwrap();
        let rebuilt = s
            .spanning
            .iter()
            .zip(c.iter())
            .fold(AlgebraElement::zeros(spec.tag), |acc, (b, &w)| {
                acc.add(&b.scale(w))
            });
        assert!((rebuilt.mat - &inside.mat).norm() < 1e-9);

        // A grade -1 contamination of size 1e-3 must be flagged.
        let down = spec
            .basis
            .iter()
            .zip(&spec.grades)
            .find(|(_, &g)| g == -1)
            .unwrap()
            .0
            .clone();
        let perturbed = inside.add(&down.scale(1e-3));
        let (ok, _, r) = s.membership(&perturbed, 1e-6);
        assert!(!ok);
        assert!((r - 1e-3 * down.norm()).abs() < 1e-9);
    }

    #[test]
    fn intersection_dims_match_grading() {
        let spec = AlgebraSpec::legendrean(2).unwrap();
        let p = spec.parabolic();
        let low = spec.graded_span(|g| g <= 0);
        let zero = spec.graded_span(|g| g == 0);
        assert_eq!(p.intersection_dim(&low), zero.dim());
        assert!(p.contains(&zero, 1e-10));
        assert!(!zero.contains(&p, 1e-10));
    }

    #[test]
    fn serializes_with_field_marker() {
        let spec = AlgebraSpec::cr(2).unwrap();
        let s = Subspace::span(spec.tag, &spec.basis[0..2]);
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["field"], "complex");
        assert_eq!(json["dim"], 2);
        assert_eq!(json["basis"][0][0][0].as_array().unwrap().len(), 2);

        let cspec = AlgebraSpec::conformal(3).unwrap();
        let cs = Subspace::span(cspec.tag, &cspec.basis[0..1]);
        let cjson = serde_json::to_value(&cs).unwrap();
        assert_eq!(cjson["field"], "real");
        assert!(cjson["basis"][0][0][0].is_number());
    }
}
