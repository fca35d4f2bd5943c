//! Sequential-regression parameterization of an unstructured covariance.
//!
//! `Σ = L Λ L'` with `Λ = diag(1/γ_j)` and `U = L⁻¹` unit lower-triangular
//! with off-diagonal entries `−β_jt`, so that component `j` regresses on
//! components `1..j−1` with coefficients `β_jt` and residual precision `γ_j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdlFactor {
    /// `beta[(j, t)]` for `t < j`; entries on and above the diagonal are zero.
    pub beta: DMatrix<f64>,
    pub gamma: DVector<f64>,
}

impl LdlFactor {
    pub fn new(beta: DMatrix<f64>, gamma: DVector<f64>) -> Result<Self> {
        let p = gamma.len();
        if beta.nrows() != p || beta.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: beta.nrows() });
        }
        let mut beta = beta;
        for j in 0..p {
            for t in j..p {
                beta[(j, t)] = 0.0;
            }
        }
        Ok(Self { beta, gamma })
    }

    pub fn identity(p: usize) -> Self {
        Self { beta: DMatrix::zeros(p, p), gamma: DVector::from_element(p, 1.0) }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn check_gamma(&self) -> Result<()> {
        for (j, g) in self.gamma.iter().enumerate() {
            if !(*g > 0.0) || !g.is_finite() {
                return Err(invalid(format!("gamma[{j}] must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// `U` with unit diagonal and `−β` below it.
    pub fn u_matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        DMatrix::from_fn(p, p, |j, t| match j.cmp(&t) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Greater => -self.beta[(j, t)],
            std::cmp::Ordering::Less => 0.0,
        })
    }

    /// `L = U⁻¹`, built column by column with forward substitution.
    pub fn l_matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut l = DMatrix::zeros(p, p);
        for c in 0..p {
            let mut e = DVector::zeros(p);
            e[c] = 1.0;
            l.set_column(c, &self.apply_l(&e));
        }
        l
    }

    /// `(U v)_j = v_j − Σ_{t<j} β_jt v_t`.
    pub fn apply_u(&self, v: &DVector<f64>) -> DVector<f64> {
        let p = self.dim();
        DVector::from_fn(p, |j, _| {
            let mut acc = v[j];
            for t in 0..j {
                acc -= self.beta[(j, t)] * v[t];
            }
            acc
        })
    }

    /// `L v = U⁻¹ v` by forward substitution: `x_j = v_j + Σ_{t<j} β_jt x_t`.
    pub fn apply_l(&self, v: &DVector<f64>) -> DVector<f64> {
        let p = self.dim();
        let mut x = DVector::zeros(p);
        for j in 0..p {
            let mut acc = v[j];
            for t in 0..j {
                acc += self.beta[(j, t)] * x[t];
            }
            x[j] = acc;
        }
        x
    }

    /// `Σ⁻¹ = U' diag(γ) U`.
    pub fn precision_matrix(&self) -> DMatrix<f64> {
        let u = self.u_matrix();
        u.transpose() * DMatrix::from_diagonal(&self.gamma) * u
    }

    /// `(Σ⁻¹)_jj = γ_j + Σ_{k>j} γ_k β_kj²`.
    pub fn precision_diagonal(&self) -> DVector<f64> {
        let p = self.dim();
        DVector::from_fn(p, |j, _| {
            let mut acc = self.gamma[j];
            for k in (j + 1)..p {
                acc += self.gamma[k] * self.beta[(k, j)].powi(2);
            }
            acc
        })
    }

    /// `log |Σ| = −Σ log γ_j`.
    pub fn log_det_sigma(&self) -> f64 {
        -self.gamma.iter().map(|g| g.ln()).sum::<f64>()
    }

    /// Factor of the leading `k × k` block of `Σ`.
    pub fn leading(&self, k: usize) -> Self {
        Self {
            beta: self.beta.view((0, 0), (k, k)).into_owned(),
            gamma: self.gamma.rows(0, k).into_owned(),
        }
    }
}

/// LDL' decomposition of an SPD matrix.
pub fn ldl_decompose(sigma: &DMatrix<f64>) -> Result<LdlFactor> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: sigma.ncols() });
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(invalid("covariance contains non-finite entries"));
    }
    let scale = (0..p).map(|j| sigma[(j, j)].abs()).fold(0.0, f64::max);
    let tol = PIVOT_TOL * scale;
    let mut l = DMatrix::<f64>::identity(p, p);
    let mut dvals = DVector::<f64>::zeros(p);
    for j in 0..p {
        let mut dj = sigma[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * dvals[k];
        }
        if !(dj > tol) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: dj });
        }
        dvals[j] = dj;
        for i in (j + 1)..p {
            let mut v = sigma[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * dvals[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    // U = L⁻¹ by forward substitution on unit columns; β = −U below diagonal.
    let mut beta = DMatrix::zeros(p, p);
    for c in 0..p {
        let mut x = DVector::<f64>::zeros(p);
        x[c] = 1.0;
        for i in (c + 1)..p {
            let mut acc = 0.0;
            for k in c..i {
                acc -= l[(i, k)] * x[k];
            }
            x[i] = acc;
        }
        for i in (c + 1)..p {
            beta[(i, c)] = -x[i];
        }
    }
    let gamma = dvals.map(|d| 1.0 / d);
    Ok(LdlFactor { beta, gamma })
}

/// `Σ = L diag(1/γ) L'`.
pub fn ldl_reconstruct(factor: &LdlFactor) -> Result<DMatrix<f64>> {
    factor.check_gamma()?;
    let l = factor.l_matrix();
    let lambda = DMatrix::from_diagonal(&factor.gamma.map(|g| 1.0 / g));
    let s = &l * lambda * l.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Maps visit-indexed coefficient columns through `U`:
/// `α̲_kj = α_kj − Σ_{t<j} β_jt α_kt`. `alpha` is `p × q` (visit by covariate).
pub fn transform_coefficients(
    alpha: &DMatrix<f64>,
    psi: &DVector<f64>,
    factor: &LdlFactor,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = factor.dim();
    if alpha.nrows() != p {
        return Err(Error::DimensionMismatch { expected: p, got: alpha.nrows() });
    }
    if psi.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: psi.len() });
    }
    let mut out = alpha.clone();
    for k in 0..alpha.ncols() {
        let col = factor.apply_u(&alpha.column(k).into_owned());
        out.set_column(k, &col);
    }
    Ok((out, factor.apply_u(psi)))
}

/// Inverse of [`transform_coefficients`].
pub fn untransform_coefficients(
    alpha_u: &DMatrix<f64>,
    psi_u: &DVector<f64>,
    factor: &LdlFactor,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = factor.dim();
    if alpha_u.nrows() != p {
        return Err(Error::DimensionMismatch { expected: p, got: alpha_u.nrows() });
    }
    if psi_u.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: psi_u.len() });
    }
    let mut out = alpha_u.clone();
    for k in 0..alpha_u.ncols() {
        let col = factor.apply_l(&alpha_u.column(k).into_owned());
        out.set_column(k, &col);
    }
    Ok((out, factor.apply_l(psi_u)))
}

/// Blocks of `U` split after the first `s` components.
#[derive(Debug, Clone, PartialEq)]
pub struct UPartition {
    pub s: usize,
    pub u11: DMatrix<f64>,
    pub u21: DMatrix<f64>,
    pub u22: DMatrix<f64>,
}

impl UPartition {
    /// `U22⁻¹ v` by forward substitution (`U22` is unit lower-triangular).
    pub fn u22_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.u22.nrows();
        let mut x = DVector::zeros(m);
        for i in 0..m {
            let mut acc = v[i];
            for k in 0..i {
                acc -= self.u22[(i, k)] * x[k];
            }
            x[i] = acc;
        }
        x
    }
}

pub fn u_partition(factor: &LdlFactor, s: usize) -> Result<UPartition> {
    let p = factor.dim();
    if s >= p {
        return Err(Error::OutOfRange { index: s, dim: p });
    }
    let u = factor.u_matrix();
    Ok(UPartition {
        s,
        u11: u.view((0, 0), (s, s)).into_owned(),
        u21: u.view((s, 0), (p - s, s)).into_owned(),
        u22: u.view((s, s), (p - s, p - s)).into_owned(),
    })
}
