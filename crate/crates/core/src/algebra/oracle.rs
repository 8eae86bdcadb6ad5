//! Independent cross-check for conformal curve symmetries.
//!
//! A conformal Killing field on flat space is a quadratic vector field
//!
//! ```text
//! V(x) = X - F x + lambda x - (Y . x) x + (|x|^2 / 2) Y,   F skew.
//! ```
//!
//! The oracle samples a concrete curve, assembles the linear system asking
//! that `V(x)` be parallel to the curve tangent at every sample, and returns
//! the nullspace. This route never touches the filtration machinery, so
//! agreement between the two is meaningful evidence rather than a tautology.

use super::{AlgebraElement, AlgebraError, AlgebraTag, Family, SV_CUTOFF};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

/// Parameters of a flat conformal Killing field.
#[derive(Clone, Debug)]
pub struct KillingParams {
    pub x: DVector<f64>,
    /// Skew matrix acting as `-F x` in the field.
    pub f: DMatrix<f64>,
    pub lambda: f64,
    pub y: DVector<f64>,
}

impl KillingParams {
    pub fn geometry_dim(&self) -> usize {
        self.x.len()
    }

    /// Number of free parameters for geometry dimension `n`.
    pub fn param_count(n: usize) -> usize {
        2 * n + 1 + n * (n - 1) / 2
    }

    pub fn zeros(n: usize) -> Self {
        KillingParams {
            x: DVector::zeros(n),
            f: DMatrix::zeros(n, n),
            lambda: 0.0,
            y: DVector::zeros(n),
        }
    }

    /// Field value at a point.
    pub fn eval(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.x - &self.f * p + p * self.lambda - p * self.y.dot(p)
            + &self.y * (0.5 * p.norm_squared())
    }

    /// Flattened coordinates: translations, strict upper triangle of the
    /// rotation (row-major), dilation, then the inversion parameters.
    pub fn to_vec(&self) -> DVector<f64> {
        let n = self.geometry_dim();
        let mut v = DVector::zeros(Self::param_count(n));
        let mut idx = 0;
        for i in 0..n {
            v[idx] = self.x[i];
            idx += 1;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                v[idx] = self.f[(i, j)];
                idx += 1;
            }
        }
        v[idx] = self.lambda;
        idx += 1;
        for i in 0..n {
            v[idx] = self.y[i];
            idx += 1;
        }
        v
    }

    pub fn from_vec(n: usize, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), Self::param_count(n));
        let mut out = Self::zeros(n);
        let mut idx = 0;
        for i in 0..n {
            out.x[i] = v[idx];
            idx += 1;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                out.f[(i, j)] = v[idx];
                out.f[(j, i)] = -v[idx];
                idx += 1;
            }
        }
        out.lambda = v[idx];
        idx += 1;
        for i in 0..n {
            out.y[i] = v[idx];
            idx += 1;
        }
        out
    }

    /// The corresponding element of the conformal matrix algebra.
    pub fn to_matrix(&self, tag: AlgebraTag) -> AlgebraElement {
        assert_eq!(tag.family, Family::Conformal);
        let n = tag.n;
        assert_eq!(self.geometry_dim(), n);
        let m = tag.matrix_size();
        let mut mat = DMatrix::zeros(m, m);
        let c = |v: f64| Complex::new(v, 0.0);
        mat[(0, 0)] = c(self.lambda);
        mat[(m - 1, m - 1)] = c(-self.lambda);
        for b in 0..n {
            mat[(b + 1, 0)] = c(-self.x[b]);
            mat[(m - 1, b + 1)] = c(self.x[b]);
            mat[(0, b + 1)] = c(-self.y[b]);
            mat[(b + 1, m - 1)] = c(self.y[b]);
            for cc in 0..n {
                mat[(b + 1, cc + 1)] = c(self.f[(b, cc)]);
            }
        }
        AlgebraElement::new(tag, mat)
    }

    /// Reads the parameters back off a conformal algebra element.
    pub fn from_matrix(elem: &AlgebraElement) -> Result<Self, AlgebraError> {
        if elem.tag.family != Family::Conformal {
            return Err(AlgebraError::TagMismatch);
        }
        let n = elem.tag.n;
        Ok(KillingParams {
            x: DVector::from_fn(n, |b, _| -elem.mat[(b + 1, 0)].re),
            f: DMatrix::from_fn(n, n, |b, c| elem.mat[(b + 1, c + 1)].re),
            lambda: elem.mat[(0, 0)].re,
            y: DVector::from_fn(n, |c, _| -elem.mat[(0, c + 1)].re),
        })
    }
}

/// A concrete curve in flat space, given either in closed form or by
/// samples.
#[derive(Clone, Debug)]
pub enum FlatCurve {
    Line {
        u: DVector<f64>,
    },
    Circle {
        u: DVector<f64>,
        c: DVector<f64>,
    },
    Sampled {
        points: Vec<DVector<f64>>,
        tangents: Vec<DVector<f64>>,
    },
}

impl FlatCurve {
    pub fn line(u: DVector<f64>) -> Result<Self, AlgebraError> {
        if (u.norm() - 1.0).abs() > 1e-10 {
            return Err(AlgebraError::BadCurveData(
                "line direction must be unit".into(),
            ));
        }
        Ok(FlatCurve::Line { u })
    }

    pub fn circle(u: DVector<f64>, c: DVector<f64>) -> Result<Self, AlgebraError> {
        if (u.norm() - 1.0).abs() > 1e-10 {
            return Err(AlgebraError::BadCurveData(
                "circle velocity must be unit".into(),
            ));
        }
        if u.dot(&c).abs() > 1e-10 {
            return Err(AlgebraError::BadCurveData(
                "circle acceleration must be orthogonal to the velocity".into(),
            ));
        }
        if c.norm() < 1e-12 {
            return Err(AlgebraError::BadCurveData(
                "circle needs nonzero acceleration; use a line instead".into(),
            ));
        }
        Ok(FlatCurve::Circle { u, c })
    }

    pub fn sampled(
        points: Vec<DVector<f64>>,
        tangents: Vec<DVector<f64>>,
    ) -> Result<Self, AlgebraError> {
        if points.len() != tangents.len() {
            return Err(AlgebraError::BadCurveData(
                "points and tangents must pair up".into(),
            ));
        }
        if points.len() < 8 {
            return Err(AlgebraError::BadCurveData("need at least 8 samples".into()));
        }
        let n = points[0].len();
        for (p, t) in points.iter().zip(&tangents) {
            if p.len() != n || t.len() != n {
                return Err(AlgebraError::BadCurveData("inconsistent dimensions".into()));
            }
            if t.norm() < 1e-12 {
                return Err(AlgebraError::BadCurveData("vanishing tangent".into()));
            }
        }
        Ok(FlatCurve::Sampled { points, tangents })
    }

    pub fn geometry_dim(&self) -> usize {
        match self {
            FlatCurve::Line { u } => u.len(),
            FlatCurve::Circle { u, .. } => u.len(),
            FlatCurve::Sampled { points, .. } => points[0].len(),
        }
    }

    /// Point/tangent samples. Closed-form curves use the parameterization
    /// that sweeps the circle through infinity symmetrically, so the samples
    /// stay well scaled.
    fn sample(&self, count: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
        match self {
            FlatCurve::Line { u } => spread(count, 1.5)
                .into_iter()
                .map(|t| (u * t, u.clone()))
                .collect(),
            FlatCurve::Circle { u, c } => {
                let c2 = c.norm_squared();
                spread(count, 2.0)
                    .into_iter()
                    .map(|t| {
                        let den = 1.0 + c2 * t * t;
                        let p = (u * (2.0 * t) + c * (2.0 * t * t)) / den;
                        let tan = (u * (2.0 * (1.0 - c2 * t * t)) + c * (4.0 * t)) / (den * den);
                        (p, tan)
                    })
                    .collect()
            }
            FlatCurve::Sampled { points, tangents } => {
                let len = points.len();
                let take = count.min(len);
                (0..take)
                    .map(|i| {
                        let j = if take == 1 {
                            0
                        } else {
                            i * (len - 1) / (take - 1)
                        };
                        (points[j].clone(), tangents[j].clone())
                    })
                    .collect()
            }
        }
    }
}

fn spread(count: usize, half_width: f64) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * half_width];
    }
    (0..count)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    /// Basis of the space of fields tangent along the curve.
    pub basis: Vec<KillingParams>,
    pub n: usize,
}

impl OracleResult {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Wedge rows `V_i T_j - V_j T_i` for all `i < j` at each sample.
fn tangency_system(samples: &[(DVector<f64>, DVector<f64>)], n: usize) -> DMatrix<f64> {
    let params = KillingParams::param_count(n);
    let pairs = n * (n - 1) / 2;
    let mut a = DMatrix::zeros(samples.len() * pairs, params);
    for (si, (p, t)) in samples.iter().enumerate() {
        // Columns of m: the field of each parameter basis vector at p.
        let mut m = DMatrix::zeros(n, params);
        let mut col = 0;
        for b in 0..n {
            m[(b, col)] = 1.0;
            col += 1;
        }
        for b in 0..n {
            for c in (b + 1)..n {
                // F = E_bc - E_cb acts as -(e_b p_c - e_c p_b).
                m[(b, col)] = -p[c];
                m[(c, col)] = p[b];
                col += 1;
            }
        }
        for b in 0..n {
            m[(b, col)] = p[b];
        }
        col += 1;
        let half_p2 = 0.5 * p.norm_squared();
        for c in 0..n {
            for b in 0..n {
                m[(b, col)] = if b == c {
                    half_p2 - p[c] * p[b]
                } else {
                    -p[c] * p[b]
                };
            }
            col += 1;
        }
        let mut row = si * pairs;
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..params {
                    a[(row, k)] = m[(i, k)] * t[j] - m[(j, k)] * t[i];
                }
                row += 1;
            }
        }
    }
    a
}

fn nullspace(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let cols = a.ncols();
    let svd = a.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let rank = if smax <= 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|&&s| s > SV_CUTOFF * smax)
            .count()
    };
    let v_t = svd.v_t.expect("svd with v_t");
    (rank..cols.min(v_t.nrows()))
        .map(|r| v_t.row(r).transpose())
        .collect()
}

/// Finds all flat conformal Killing fields tangent along `curve`.
///
/// The system is solved at `samples` sample points and again at double the
/// density; a nullity that changes under refinement means the sampling was
/// too coarse to pin the answer down, which is reported as an error rather
/// than returned as a wrong dimension.
pub fn tangency_oracle(curve: &FlatCurve, samples: usize) -> Result<OracleResult, AlgebraError> {
    if samples == 0 {
        return Err(AlgebraError::BadCurveData(
            "need at least one sample".into(),
        ));
    }
    let n = curve.geometry_dim();
    let coarse_samples = curve.sample(samples);
    let fine_samples = curve.sample(2 * samples);
    let coarse = nullspace(&tangency_system(&coarse_samples, n)).len();
    let fine_basis = nullspace(&tangency_system(&fine_samples, n));
    if coarse != fine_basis.len() {
        return Err(AlgebraError::DegenerateSampling {
            coarse,
            fine: fine_basis.len(),
        });
    }
    Ok(OracleResult {
        basis: fine_basis
            .iter()
            .map(|v| KillingParams::from_vec(n, v))
            .collect(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{
        conformal_circle_direction, conformal_line_direction, dkr_filtration, AlgebraSpec, Subspace,
    };
    use super::*;

    fn unit(n: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn params_roundtrip_through_matrix_and_vector_forms() {
        let n = 4;
        let tag = AlgebraTag {
            family: Family::Conformal,
            n,
        };
        let mut p = KillingParams::zeros(n);
        p.x = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        p.y = DVector::from_vec(vec![0.25, 1.5, -1.0, 2.0]);
        p.lambda = -0.75;
        p.f[(0, 2)] = 1.25;
        p.f[(2, 0)] = -1.25;
        p.f[(1, 3)] = -0.5;
        p.f[(3, 1)] = 0.5;

        let mat = p.to_matrix(tag);
        let spec = AlgebraSpec::conformal(n).unwrap();
        assert!(spec.defining_residual(&mat) < 1e-12);
        let back = KillingParams::from_matrix(&mat).unwrap();
        assert!((back.to_vec() - p.to_vec()).norm() < 1e-14);
        let roundtrip = KillingParams::from_vec(n, &p.to_vec());
        assert!((roundtrip.to_vec() - p.to_vec()).norm() < 1e-14);
    }

    #[test]
    fn line_and_circle_dimensions_match_the_filtration() {
        for n in [3usize, 4] {
            let spec = AlgebraSpec::conformal(n).unwrap();
            let u = unit(n, 0);
            let c = unit(n, 1) * 0.8;

            let line = FlatCurve::line(u.clone()).unwrap();
            let line_oracle = tangency_oracle(&line, 30).unwrap();
            let line_sym = dkr_filtration(&spec, &conformal_line_direction(&spec, &u).unwrap())
                .unwrap()
                .sym;
            assert_eq!(line_oracle.dim(), line_sym.dim(), "line n = {n}");

            let circle = FlatCurve::circle(u.clone(), c.clone()).unwrap();
            let circle_oracle = tangency_oracle(&circle, 30).unwrap();
            let circle_sym =
                dkr_filtration(&spec, &conformal_circle_direction(&spec, &u, &c).unwrap())
                    .unwrap()
                    .sym;
            assert_eq!(circle_oracle.dim(), circle_sym.dim(), "circle n = {n}");

            // Mutual membership, both directions.
            for kp in &circle_oracle.basis {
                let elem = kp.to_matrix(spec.tag);
                let (ok, _, r) = circle_sym.membership(&elem, 1e-6 * (1.0 + elem.norm()));
                assert!(ok, "oracle field escaped the algebra side: {r:.3e}");
            }
            let oracle_span = Subspace::span(
                spec.tag,
                &circle_oracle
                    .basis
                    .iter()
                    .map(|kp| kp.to_matrix(spec.tag))
                    .collect::<Vec<_>>(),
            );
            assert!(oracle_span.contains(&circle_sym, 1e-6));
        }
    }

    #[test]
    fn oracle_fields_are_tangent_along_the_curve() {
        let n = 3;
        let u = unit(n, 0);
        let c = unit(n, 2) * 1.3;
        let circle = FlatCurve::circle(u, c).unwrap();
        let oracle = tangency_oracle(&circle, 25).unwrap();
        for kp in &oracle.basis {
            for (p, t) in circle.sample(17) {
                let v = kp.eval(&p);
                // Wedge with the tangent must vanish.
                for i in 0..n {
                    for j in (i + 1)..n {
                        assert!((v[i] * t[j] - v[j] * t[i]).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn generic_cubic_has_no_tangent_symmetries() {
        let n = 3;
        let ts = spread(40, 1.2);
        let points: Vec<DVector<f64>> = ts
            .iter()
            .map(|&t| DVector::from_vec(vec![t, t * t, t * t * t]))
            .collect();
        let tangents: Vec<DVector<f64>> = ts
            .iter()
            .map(|&t| DVector::from_vec(vec![1.0, 2.0 * t, 3.0 * t * t]))
            .collect();
        let curve = FlatCurve::sampled(points, tangents).unwrap();
        let oracle = tangency_oracle(&curve, 20).unwrap();
        assert_eq!(oracle.dim(), 0, "n = {n}");
    }

    #[test]
    fn undersampling_is_reported_not_returned() {
        let u = unit(3, 0);
        let c = unit(3, 1);
        let circle = FlatCurve::circle(u, c).unwrap();
        assert!(matches!(
            tangency_oracle(&circle, 1),
            Err(AlgebraError::DegenerateSampling { .. })
        ));
    }

    #[test]
    fn invalid_curve_data_is_rejected() {
        assert!(FlatCurve::line(DVector::from_vec(vec![2.0, 0.0])).is_err());
        assert!(FlatCurve::circle(unit(3, 0), unit(3, 0)).is_err());
        assert!(FlatCurve::circle(unit(3, 0), DVector::zeros(3)).is_err());
        let few = vec![unit(3, 0); 3];
        assert!(FlatCurve::sampled(few.clone(), few).is_err());
    }
}
