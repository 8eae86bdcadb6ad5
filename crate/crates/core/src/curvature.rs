//! Curvature of chart metrics.
//!
//! Conventions, fixed once and used everywhere downstream:
//!
//! * curvature sign: `(D_a D_b - D_b D_a) X^c = R_ab^c_d X^d`, so
//!   `R_ab^c_e = d_a G^c_be - d_b G^c_ae + G^c_af G^f_be - G^c_bf G^f_ae`
//!   in terms of Christoffel symbols `G`;
//! * `R_abcd = g_ce R_ab^e_d`, Ricci is the first-against-third trace
//!   `Ric_bd = R_ab^a_d`, and the Schouten tensor solves
//!   `R_abcd = W_abcd + P_ac g_bd - P_bc g_ad - P_ad g_bc + P_bd g_ac`
//!   with `W` trace-free.
//!
//! With these choices the round unit sphere comes out with `P = g/2`, which
//! the tests pin down numerically.

use crate::metric::{conformal_rescale, ChartMetric, ConformalFactor, MetricError};
use nalgebra::{DMatrix, DVector};

/// Dense rank-4 tensor with all indices down, row-major in `(a, b, c, d)`.
#[derive(Clone, Debug)]
pub struct Tensor4 {
    pub n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        self.data[((a * self.n + b) * self.n + c) * self.n + d] = v;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Christoffel symbols at a point; `gamma[a][(b, c)］= G^a_bc`.
pub fn christoffel(m: &ChartMetric, x: &[f64]) -> Result<Vec<DMatrix<f64>>, MetricError> {
    let jets = m.jets(x)?;
    let ginv = jets
        .g
        .clone()
        .try_inverse()
        .ok_or(MetricError::Singular { point: x.to_vec() })?;
    let n = m.n;
    let mut gamma = vec![DMatrix::zeros(n, n); n];
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += ginv[(a, d)]
                        * (jets.dg[b][(d, c)] + jets.dg[c][(b, d)] - jets.dg[d][(b, c)]);
                }
                gamma[a][(b, c)] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// Full curvature data of a chart metric at one point.
#[derive(Clone, Debug)]
pub struct CurvaturePack {
    pub n: usize,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub gamma: Vec<DMatrix<f64>>,
    /// `R_abcd`, all indices down.
    pub riemann: Tensor4,
    pub ricci: DMatrix<f64>,
    pub scal: f64,
    /// Schouten `P_ab`, indices down.
    pub schouten: DMatrix<f64>,
    /// `P_a^b` as a matrix (row `a`, column `b`).
    pub schouten_mixed: DMatrix<f64>,
    pub weyl: Tensor4,
}

/// Computes the curvature pack. Needs chart dimension at least 3 for the
/// Schouten split to make sense.
pub fn curvature(m: &ChartMetric, x: &[f64]) -> Result<CurvaturePack, MetricError> {
    let n = m.n;
    if n < 3 {
        return Err(MetricError::DimensionTooSmall { needed: 3, got: n });
    }
    let jets = m.jets(x)?;
    let g = jets.g.clone();
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or(MetricError::Singular { point: x.to_vec() })?;

    let mut gamma = vec![DMatrix::zeros(n, n); n];
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += g_inv[(a, d)]
                        * (jets.dg[b][(d, c)] + jets.dg[c][(b, d)] - jets.dg[d][(b, c)]);
                }
                gamma[a][(b, c)] = 0.5 * s;
            }
        }
    }

    // d_e G^a_bc, via d g^-1 = -g^-1 (d g) g^-1.
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|e| -(&g_inv * &jets.dg[e] * &g_inv)).collect();
    let mut dgamma = vec![vec![DMatrix::zeros(n, n); n]; n]; // [e][a][(b,c)]
    for e in 0..n {
        for b in 0..n {
            for c in 0..n {
                for a in 0..n {
                    let mut s = 0.0;
                    for d in 0..n {
                        s += dginv[e][(a, d)]
                            * (jets.dg[b][(d, c)] + jets.dg[c][(b, d)] - jets.dg[d][(b, c)]);
                        s += g_inv[(a, d)]
                            * (jets.d2g[e][b][(d, c)] + jets.d2g[e][c][(b, d)]
                                - jets.d2g[e][d][(b, c)]);
                    }
                    dgamma[e][a][(b, c)] = 0.5 * s;
                }
            }
        }
    }

    let mut riemann_mixed = Tensor4::zeros(n); // R_ab^c_e stored at (a, b, c, e)
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for e in 0..n {
                    let mut v = dgamma[a][c][(b, e)] - dgamma[b][c][(a, e)];
                    for f in 0..n {
                        v += gamma[c][(a, f)] * gamma[f][(b, e)]
                            - gamma[c][(b, f)] * gamma[f][(a, e)];
                    }
                    riemann_mixed.set(a, b, c, e, v);
                }
            }
        }
    }

    let mut riemann = Tensor4::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = 0.0;
                    for e in 0..n {
                        v += g[(c, e)] * riemann_mixed.get(a, b, e, d);
                    }
                    riemann.set(a, b, c, d, v);
                }
            }
        }
    }

    let mut ricci = DMatrix::zeros(n, n);
    for b in 0..n {
        for d in 0..n {
            let mut v = 0.0;
            for a in 0..n {
                v += riemann_mixed.get(a, b, a, d);
            }
            ricci[(b, d)] = v;
        }
    }
    let scal = (&g_inv * &ricci).trace();
    let trace_p = scal / (2.0 * (n as f64 - 1.0));
    let schouten = (&ricci - &g * trace_p) / (n as f64 - 2.0);
    let schouten_mixed = &schouten * &g_inv;

    let mut weyl = Tensor4::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = riemann.get(a, b, c, d)
                        - (schouten[(a, c)] * g[(b, d)]
                            - schouten[(b, c)] * g[(a, d)]
                            - schouten[(a, d)] * g[(b, c)]
                            + schouten[(b, d)] * g[(a, c)]);
                    weyl.set(a, b, c, d, v);
                }
            }
        }
    }

    Ok(CurvaturePack {
        n,
        g,
        g_inv,
        gamma,
        riemann,
        ricci,
        scal,
        schouten,
        schouten_mixed,
        weyl,
    })
}

/// Residuals of the algebraic identities a curvature pack must satisfy.
#[derive(Clone, Debug)]
pub struct PackResiduals {
    pub gamma_symmetry: f64,
    pub antisym_front: f64,
    pub antisym_back: f64,
    pub pair_symmetry: f64,
    pub first_bianchi: f64,
    pub weyl_trace: f64,
    pub reconstruction: f64,
}

impl PackResiduals {
    pub fn max(&self) -> f64 {
        [
            self.gamma_symmetry,
            self.antisym_front,
            self.antisym_back,
            self.pair_symmetry,
            self.first_bianchi,
            self.weyl_trace,
            self.reconstruction,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl CurvaturePack {
    pub fn residuals(&self) -> PackResiduals {
        let n = self.n;
        let r = &self.riemann;
        let mut antisym_front = 0.0_f64;
        let mut antisym_back = 0.0_f64;
        let mut pair_symmetry = 0.0_f64;
        let mut first_bianchi = 0.0_f64;
        let mut gamma_symmetry = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    gamma_symmetry =
                        gamma_symmetry.max((self.gamma[a][(b, c)] - self.gamma[a][(c, b)]).abs());
                    for d in 0..n {
                        antisym_front =
                            antisym_front.max((r.get(a, b, c, d) + r.get(b, a, c, d)).abs());
                        antisym_back =
                            antisym_back.max((r.get(a, b, c, d) + r.get(a, b, d, c)).abs());
                        pair_symmetry =
                            pair_symmetry.max((r.get(a, b, c, d) - r.get(c, d, a, b)).abs());
                        first_bianchi = first_bianchi
                            .max((r.get(a, b, c, d) + r.get(b, c, a, d) + r.get(c, a, b, d)).abs());
                    }
                }
            }
        }
        // Trace of Weyl over the first and third slots, raised with g^-1.
        let mut weyl_trace = 0.0_f64;
        for b in 0..n {
            for d in 0..n {
                let mut v = 0.0;
                for a in 0..n {
                    for c in 0..n {
                        v += self.g_inv[(a, c)] * self.weyl.get(a, b, c, d);
                    }
                }
                weyl_trace = weyl_trace.max(v.abs());
            }
        }
        let mut reconstruction = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let back = self.weyl.get(a, b, c, d)
                            + self.schouten[(a, c)] * self.g[(b, d)]
                            - self.schouten[(b, c)] * self.g[(a, d)]
                            - self.schouten[(a, d)] * self.g[(b, c)]
                            + self.schouten[(b, d)] * self.g[(a, c)];
                        reconstruction =
                            reconstruction.max((back - self.riemann.get(a, b, c, d)).abs());
                    }
                }
            }
        }
        PackResiduals {
            gamma_symmetry,
            antisym_front,
            antisym_back,
            pair_symmetry,
            first_bianchi,
            weyl_trace,
            reconstruction,
        }
    }

    /// Residual of metric compatibility `D_a g_bc = 0`, computed from the
    /// metric derivatives that produced this pack.
    pub fn metric_compatibility(&self, m: &ChartMetric, x: &[f64]) -> Result<f64, MetricError> {
        let jets = m.jets(x)?;
        let n = self.n;
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut v = jets.dg[a][(b, c)];
                    for d in 0..n {
                        v -= self.gamma[d][(a, b)] * self.g[(d, c)]
                            + self.gamma[d][(a, c)] * self.g[(b, d)];
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug)]
pub struct EinsteinReport {
    pub einstein: bool,
    /// Mean of `trace(P) / n` over the sample points.
    pub lambda: f64,
    /// Worst trace-free part of `P_a^b` over the samples.
    pub max_traceless: f64,
    /// Spread of `lambda` across the samples.
    pub lambda_variation: f64,
}

/// Tests `P_a^b = lambda d_a^b` with a common `lambda` over the samples.
pub fn einstein_check(
    m: &ChartMetric,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<EinsteinReport, MetricError> {
    assert!(!points.is_empty(), "einstein_check needs sample points");
    let n = m.n as f64;
    let mut lambdas = Vec::with_capacity(points.len());
    let mut max_traceless = 0.0_f64;
    for x in points {
        let pack = curvature(m, x)?;
        let lam = pack.schouten_mixed.trace() / n;
        let traceless = &pack.schouten_mixed - DMatrix::identity(m.n, m.n) * lam;
        max_traceless = max_traceless.max(traceless.norm());
        lambdas.push(lam);
    }
    let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    let variation = lambdas.iter().map(|l| (l - mean).abs()).fold(0.0, f64::max);
    Ok(EinsteinReport {
        einstein: max_traceless < tol && variation < tol,
        lambda: mean,
        max_traceless,
        lambda_variation: variation,
    })
}

/// Covariant derivative of a one-form value at a point:
/// `D_a phi_b = d_a phi_b - G^c_ab phi_c` given the coordinate Jacobian.
fn covariant_one_form(
    gamma: &[DMatrix<f64>],
    dphi: &DMatrix<f64>,
    phi: &DVector<f64>,
) -> DMatrix<f64> {
    let n = phi.len();
    DMatrix::from_fn(n, n, |a, b| {
        let mut v = dphi[(a, b)];
        for c in 0..n {
            v -= gamma[c][(a, b)] * phi[c];
        }
        v
    })
}

/// Residual of the one-form connection transformation under `g -> Omega^2 g`:
/// `Dhat_a phi_b = D_a phi_b - U_a phi_b - U_b phi_a + U^c phi_c g_ab`
/// where `U = d log Omega`. The left side is computed from the rescaled
/// metric's own Christoffel symbols; `phi` is the affine one-form
/// `phi_b(x) = c_b + A_bc x^c`.
pub fn connection_rescale_check(
    m: &ChartMetric,
    omega: &ConformalFactor,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    x: &[f64],
) -> Result<f64, MetricError> {
    let n = m.n;
    let xv = DVector::from_column_slice(x);
    let phi = c + a * &xv;
    // d_a phi_b = A_ba.
    let dphi = DMatrix::from_fn(n, n, |p, q| a[(q, p)]);

    let g = m.at(x)?;
    let g_inv = m.inverse_at(x)?;
    let gamma = christoffel(m, x)?;
    let nabla = covariant_one_form(&gamma, &dphi, &phi);

    let rescaled = conformal_rescale(m, omega);
    let gamma_hat = christoffel(&rescaled, x)?;
    let nabla_hat = covariant_one_form(&gamma_hat, &dphi, &phi);

    let (ups, _) = omega.log_gradient(x)?;
    let ups = DVector::from_vec(ups);
    let ups_phi = (&g_inv * &ups).dot(&phi);
    let rhs = &nabla - &ups * phi.transpose() - &phi * ups.transpose() + &g * ups_phi;

    Ok((nabla_hat - rhs).norm())
}

/// Residual of the Schouten transformation under `g -> Omega^2 g`:
/// `Phat_ab = P_ab - D_a U_b + U_a U_b - (U^c U_c / 2) g_ab`.
pub fn schouten_rescale_residual(
    m: &ChartMetric,
    omega: &ConformalFactor,
    x: &[f64],
) -> Result<f64, MetricError> {
    let pack = curvature(m, x)?;
    let (ups, dups) = omega.log_gradient(x)?;
    let ups = DVector::from_vec(ups);
    let nabla_ups = covariant_one_form(&pack.gamma, &dups, &ups);
    let ups2 = (&pack.g_inv * &ups).dot(&ups);
    let rhs = &pack.schouten - &nabla_ups + &ups * ups.transpose() - &pack.g * (0.5 * ups2);

    let hat = curvature(&conformal_rescale(m, omega), x)?;
    Ok((hat.schouten - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{self, DiffMode, Domain};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn flat_metric_is_flat() {
        let m = metric::flat(4);
        let gamma = christoffel(&m, &[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert!(gamma.iter().all(|g| g.norm() == 0.0));
        let pack = curvature(&m, &[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert!(pack.riemann.norm() == 0.0);
        assert!(pack.schouten.norm() == 0.0);
    }

    #[test]
    fn sphere_christoffel_vanishes_at_origin() {
        // Chart dimension 2 is fine for Christoffel-level operations.
        let m = metric::sphere(2);
        let gamma = christoffel(&m, &[0.0, 0.0]).unwrap();
        assert!(gamma.iter().all(|g| g.norm() < 1e-14));
    }

    #[test]
    fn schouten_needs_dimension_three() {
        let m = metric::sphere(2);
        assert!(matches!(
            curvature(&m, &[0.1, 0.2]),
            Err(MetricError::DimensionTooSmall { .. })
        ));
    }

    // Constant-curvature oracle: on the unit sphere R_abcd = g_ac g_bd - g_ad g_bc,
    // which forces P = g/2 through the trace conventions fixed above.
    #[test]
    fn sphere_riemann_and_schouten_match_constant_curvature_form() {
        for n in [3, 4] {
            let m = metric::sphere(n);
            for x in [
                vec![0.0; n],
                (0..n).map(|i| 0.2 - 0.15 * i as f64).collect(),
            ] {
                let pack = curvature(&m, &x).unwrap();
                let g = &pack.g;
                let mut worst = 0.0_f64;
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            for d in 0..n {
                                let expect = g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)];
                                worst = worst.max((pack.riemann.get(a, b, c, d) - expect).abs());
                            }
                        }
                    }
                }
                assert!(worst < 1e-9, "n={n}: riemann residual {worst:.3e}");
                assert!((&pack.schouten - g * 0.5).norm() < 1e-9);
                assert!(pack.weyl.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn hyperbolic_schouten_is_minus_half_g() {
        let m = metric::hyperbolic(3);
        let x = [0.2, -0.1, 0.3];
        let pack = curvature(&m, &x).unwrap();
        assert!((&pack.schouten + &pack.g * 0.5).norm() < 1e-9);
    }

    #[test]
    fn einstein_catalog_verdicts() {
        let pts3: Vec<Vec<f64>> = vec![vec![0.0; 3], vec![0.4, -0.2, 0.1], vec![0.1, 0.3, -0.5]];
        let flat = einstein_check(&metric::flat(3), &pts3, 1e-7).unwrap();
        assert!(flat.einstein);
        assert_relative_eq!(flat.lambda, 0.0, epsilon = 1e-12);

        let sph = einstein_check(&metric::sphere(3), &pts3, 1e-7).unwrap();
        assert!(sph.einstein);
        assert_relative_eq!(sph.lambda, 0.5, epsilon = 1e-9);

        let pts4: Vec<Vec<f64>> = vec![
            vec![0.1, 0.2, -0.1, 0.3],
            vec![0.0; 4],
            vec![0.5, 0.1, 0.2, -0.4],
        ];
        let fs = einstein_check(&metric::fubini_study(), &pts4, 1e-7).unwrap();
        assert!(fs.einstein, "trace-free residual {:.3e}", fs.max_traceless);

        let ne = einstein_check(&metric::non_einstein_diag(4), &pts4, 1e-7).unwrap();
        assert!(!ne.einstein);
    }

    // Hand-derived Schouten of diag(1, 1 + x1^2, 1, 1) at x1 = u:
    // P_11 = -1/(3 (1+u^2)^2), P_22 = -(1+u^2) trace piece... frozen at u = 1.
    #[test]
    fn non_einstein_diag_schouten_closed_form() {
        let m = metric::non_einstein_diag(4);
        let pack = curvature(&m, &[1.0, 0.4, -0.2, 0.7]).unwrap();
        assert_relative_eq!(pack.schouten[(0, 0)], -1.0 / 12.0, epsilon = 1e-10);
        assert_relative_eq!(pack.schouten[(1, 1)], -1.0 / 6.0, epsilon = 1e-10);
        assert_relative_eq!(pack.schouten[(2, 2)], 1.0 / 24.0, epsilon = 1e-10);
        assert_relative_eq!(pack.schouten[(3, 3)], 1.0 / 24.0, epsilon = 1e-10);
        let offdiag: f64 = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b)
            .map(|(a, b)| pack.schouten[(a, b)].abs())
            .fold(0.0, f64::max);
        assert!(offdiag < 1e-12);
    }

    #[test]
    fn pack_residuals_on_catalog() {
        for m in [
            metric::sphere(4),
            metric::hyperbolic(3),
            metric::fubini_study(),
            metric::non_einstein_diag(4),
        ] {
            let x: Vec<f64> = (0..m.n).map(|i| 0.13 + 0.09 * i as f64).collect();
            let pack = curvature(&m, &x).unwrap();
            let res = pack.residuals();
            assert!(res.max() < 1e-8, "{}: {:?}", m.name, res);
            assert!(pack.metric_compatibility(&m, &x).unwrap() < 1e-8);
        }
    }

    #[test]
    fn dual_and_finite_difference_packs_agree() {
        for m in [metric::sphere(3), metric::fubini_study()] {
            let fd = m.clone().with_diff(DiffMode::FiniteDifference { h: 1e-4 });
            let x: Vec<f64> = (0..m.n).map(|i| 0.21 - 0.11 * i as f64).collect();
            let a = curvature(&m, &x).unwrap();
            let b = curvature(&fd, &x).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..m.n {
                for j in 0..m.n {
                    for k in 0..m.n {
                        for l in 0..m.n {
                            worst = worst
                                .max((a.riemann.get(i, j, k, l) - b.riemann.get(i, j, k, l)).abs());
                        }
                    }
                }
            }
            assert!(worst < 1e-6, "{}: riemann fd mismatch {worst:.3e}", m.name);
            assert!((&a.schouten - &b.schouten).norm() < 1e-6);
        }
    }

    // Rescaling flat space by 2 / (1 + |x|^2) is the round sphere; its
    // Schouten must come out as g_hat / 2 through the rescale route too.
    #[test]
    fn flat_rescales_to_round_sphere() {
        let n = 3;
        let omega = ConformalFactor::new(
            "stereographic",
            Arc::new(move |x: &[crate::jet::Jet2]| {
                let n = x[0].dim();
                let r2 = x
                    .iter()
                    .fold(crate::jet::Jet2::constant(1.0, n), |acc, v| &acc + &(v * v));
                &r2.recip() * 2.0
            }),
        );
        let hat = conformal_rescale(&metric::flat(n), &omega);
        let x = [0.3, -0.5, 0.2];
        let pack = curvature(&hat, &x).unwrap();
        assert!((&pack.schouten - &pack.g * 0.5).norm() < 1e-9);
        let direct = curvature(&metric::sphere(n), &x).unwrap();
        assert!((&pack.g - &direct.g).norm() < 1e-12);
    }

    #[test]
    fn schouten_rescale_law_random_factors() {
        let m = metric::sphere(3);
        let q = DMatrix::from_row_slice(
            3,
            3,
            &[0.12, 0.05, -0.02, 0.05, -0.08, 0.03, -0.02, 0.03, 0.09],
        );
        let omega = ConformalFactor::exp_quadratic(0.1, vec![0.2, -0.3, 0.15], q);
        for x in [[0.1, 0.2, -0.3], [0.4, 0.0, 0.2]] {
            let r = schouten_rescale_residual(&m, &omega, &x).unwrap();
            assert!(r < 1e-7, "residual {r:.3e}");
        }
    }

    #[test]
    fn connection_rescale_law() {
        let m = metric::flat(3);
        let q = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.1, 0.0, -0.1, 0.05, 0.1, 0.05, 0.3]);
        let omega = ConformalFactor::exp_quadratic(-0.2, vec![0.1, 0.4, -0.2], q);
        let c = DVector::from_vec(vec![0.3, -0.7, 0.2]);
        let a = DMatrix::from_row_slice(3, 3, &[0.1, 0.5, -0.3, 0.2, 0.0, 0.7, -0.4, 0.1, 0.2]);
        let r = connection_rescale_check(&m, &omega, &c, &a, &[0.25, -0.1, 0.4]).unwrap();
        assert!(r < 1e-9, "residual {r:.3e}");

        // A constant factor leaves the connection untouched.
        let id = connection_rescale_check(
            &m,
            &ConformalFactor::constant(3.0, 3),
            &c,
            &a,
            &[0.25, -0.1, 0.4],
        )
        .unwrap();
        assert!(id < 1e-12);
    }

    // Constant rescale c^2 g keeps lowered P and divides lambda by c^2.
    #[test]
    fn constant_rescale_scales_lambda() {
        let m = metric::sphere(3);
        let c = 1.7_f64;
        let scaled = conformal_rescale(&m, &ConformalFactor::constant(c, 3));
        let x = [0.2, 0.1, -0.3];
        let a = curvature(&m, &x).unwrap();
        let b = curvature(&scaled, &x).unwrap();
        assert!((&a.schouten - &b.schouten).norm() < 1e-10);
        let rep = einstein_check(&scaled, &[x.to_vec()], 1e-7).unwrap();
        assert_relative_eq!(rep.lambda, 0.5 / (c * c), epsilon = 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pack_identities_hold_at_random_points(
            x0 in -0.6_f64..0.6, x1 in -0.6_f64..0.6, x2 in -0.6_f64..0.6, x3 in -0.6_f64..0.6
        ) {
            let m = metric::fubini_study();
            let pack = curvature(&m, &[x0, x1, x2, x3]).unwrap();
            prop_assert!(pack.residuals().max() < 1e-8);
        }
    }

    #[test]
    fn polynomial_chart_curvature_is_well_defined() {
        let spec = metric::PolynomialMetricSpec {
            name: None,
            n: 3,
            domain: Some(Domain::cube(3, 2.0)),
            entries: vec![
                metric::PolyEntry {
                    i: 0,
                    j: 0,
                    terms: vec![metric::PolyTerm {
                        c: 1.0,
                        powers: vec![0, 0, 0],
                    }],
                },
                metric::PolyEntry {
                    i: 1,
                    j: 1,
                    terms: vec![
                        metric::PolyTerm {
                            c: 1.0,
                            powers: vec![0, 0, 0],
                        },
                        metric::PolyTerm {
                            c: 0.5,
                            powers: vec![2, 0, 0],
                        },
                    ],
                },
                metric::PolyEntry {
                    i: 2,
                    j: 2,
                    terms: vec![metric::PolyTerm {
                        c: 1.0,
                        powers: vec![0, 0, 0],
                    }],
                },
            ],
        };
        let m = spec.build().unwrap();
        let pack = curvature(&m, &[0.5, 0.2, -0.1]).unwrap();
        assert!(pack.residuals().max() < 1e-8);
    }
}
