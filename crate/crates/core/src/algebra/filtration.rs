//! The descending filtration of the parabolic attached to a curve direction.
//!
//! Starting from the parabolic `p_0 = p`, each step keeps the elements whose
//! bracket with the direction `V` stays inside the previous step up to a
//! multiple of `V`:
//!
//! ```text
//! p_{l+1} = { X in p_l : [X, V] in p_l + <V> }
//! ```
//!
//! For a `|k|`-graded algebra the chain stabilises no later than `p_{k+1}`,
//! and the symmetry algebra of the model curve generated by `V` is the
//! stabilised space together with `V` itself.

use super::{bracket, AlgebraElement, AlgebraError, AlgebraSpec, Subspace, SV_CUTOFF};
use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct FiltrationResult {
    /// `p_0, p_1, ..., p_inf` with the last entry stabilised.
    pub chain: Vec<Subspace>,
    /// Stabilised space plus the line through `V`.
    pub sym: Subspace,
    pub v: AlgebraElement,
}

impl FiltrationResult {
    pub fn chain_dims(&self) -> Vec<usize> {
        self.chain.iter().map(|s| s.dim()).collect()
    }

    pub fn sym_dim(&self) -> usize {
        self.sym.dim()
    }

    /// Codimension of the symmetry algebra: the number of parameters of the
    /// model's local moduli of curves of this type.
    pub fn moduli_dim(&self, spec: &AlgebraSpec) -> usize {
        spec.dim() - self.sym_dim()
    }
}

/// Runs the filtration for direction `v` inside the algebra described by
/// `spec`. Errors if `v` is not in the algebra or lies in the parabolic.
pub fn dkr_filtration(
    spec: &AlgebraSpec,
    v: &AlgebraElement,
) -> Result<FiltrationResult, AlgebraError> {
    let full = spec.full_span();
    let (inside, _, residual) = full.membership(v, 1e-9 * (1.0 + v.norm()));
    if !inside {
        return Err(AlgebraError::NotInAlgebra { residual });
    }
    let p0 = spec.parabolic();
    let (in_p, _, _) = p0.membership(v, 1e-9 * (1.0 + v.norm()));
    if in_p {
        return Err(AlgebraError::DegenerateDirection);
    }
    // The filtration only sees the line through v, so normalise once and
    // work at unit scale; this keeps the rank thresholds meaningful.
    let v_unit = v.scale(1.0 / v.norm());

    let mut chain = vec![p0];
    // The stabilisation bound is k + 1 steps; allow one extra before
    // declaring failure.
    for _ in 0..(spec.k as usize + 2) {
        let current = chain.last().expect("nonempty chain");
        let next = filtration_step(spec, current, &v_unit);
        if next.dim() == current.dim() {
            let sym = current.extended(std::slice::from_ref(&v_unit));
            return Ok(FiltrationResult {
                chain,
                sym,
                v: v.clone(),
            });
        }
        chain.push(next);
    }
    Err(AlgebraError::NoStabilization)
}

/// One step: the kernel of `X |-> [X, V] mod (p_l + <V>)` on `p_l`.
fn filtration_step(spec: &AlgebraSpec, current: &Subspace, v: &AlgebraElement) -> Subspace {
    let basis = current.orthonormal_elements();
    if basis.is_empty() {
        return Subspace::span(spec.tag, &[]);
    }
    let target = current.extended(std::slice::from_ref(v));
    let rows = spec.tag.real_len();
    let mut defect = DMatrix::zeros(rows, basis.len());
    for (j, x) in basis.iter().enumerate() {
        let b = bracket(x, v).expect("same tag");
        // Column is the component of [x, v] orthogonal to p_l + <V>.
        defect.set_column(j, &target.orthogonal_defect(&b));
    }
    let svd = defect.svd(false, true);
    // The basis is orthonormal and v comes in at unit norm, so genuine
    // defects have singular values of order one; flooring the scale at 1
    // keeps a stabilised (all round-off) defect matrix from faking rank.
    let scale = svd.singular_values.max().max(1.0);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > SV_CUTOFF * scale)
        .count();
    let v_t = svd.v_t.expect("svd with v_t");
    let mut kernel_elems = Vec::new();
    for r in rank..v_t.nrows() {
        let coeffs = v_t.row(r);
        let mut x = AlgebraElement::zeros(spec.tag);
        for (c, b) in coeffs.iter().zip(&basis) {
            x = x.add(&b.scale(*c));
        }
        kernel_elems.push(x);
    }
    Subspace::span(spec.tag, &kernel_elems)
}
