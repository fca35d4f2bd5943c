//! Conditional laws of the latent `(d, W)` and unobserved outcomes given an
//! observed prefix, in the sequential-regression parameterization.
//!
//! All outcome vectors here are on the offset scale `ỹ = y − Zη`; `mean_u`
//! holds `μ̲_j = Σ_k α̲_kj x_k`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::covariance::{ldl_reconstruct, u_partition, LdlFactor};
use crate::distributions::{
    gamma_rate, log_density_from_parts, sample_truncated, standard_normal, Dof, SkewTMulti,
    TruncatedSpec,
};
use crate::error::{Error, Result};

/// Sufficient quantities for `(d, W)` given `y_1..y_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixStats {
    /// `1 + Σ γ_j ψ̱_j²`.
    pub a: f64,
    /// `Σ γ_j ψ̱_j y*_j`.
    pub b: f64,
    /// `Σ γ_j y*_j² − B²/A`.
    pub quad: f64,
    /// `ν + quad`; infinite for the infinite-df sentinel.
    pub nu_d: f64,
    pub s: usize,
    pub nu: Dof,
}

/// `y*_j = y_j − Σ_{t<j} β_jt y_t − μ̲_j` over the prefix.
pub fn prefix_residuals(y_prefix: &[f64], mean_u: &[f64], factor: &LdlFactor) -> Vec<f64> {
    (0..y_prefix.len())
        .map(|j| {
            let mut r = y_prefix[j] - mean_u[j];
            for t in 0..j {
                r -= factor.beta[(j, t)] * y_prefix[t];
            }
            r
        })
        .collect()
}

pub fn prefix_stats(
    y_prefix: &[f64],
    mean_u: &[f64],
    factor: &LdlFactor,
    psi_u: &[f64],
    nu: Dof,
) -> Result<PrefixStats> {
    let s = y_prefix.len();
    if s > factor.dim() || mean_u.len() < s || psi_u.len() < s {
        return Err(Error::DimensionMismatch { expected: factor.dim(), got: s });
    }
    let resid = prefix_residuals(y_prefix, mean_u, factor);
    let mut a = 1.0;
    let mut b = 0.0;
    let mut sq = 0.0;
    for j in 0..s {
        let g = factor.gamma[j];
        a += g * psi_u[j] * psi_u[j];
        b += g * psi_u[j] * resid[j];
        sq += g * resid[j] * resid[j];
    }
    let quad = sq - b * b / a;
    let nu_d = match nu {
        Dof::Finite(v) => v + quad,
        Dof::Infinite => f64::INFINITY,
    };
    Ok(PrefixStats { a, b, quad, nu_d, s, nu })
}

/// Draws `(W, d)` given the prefix: `W ~ t⁺(B/A, ν_d/(A(ν+s)), ν+s)` and
/// `d | W ~ G((ν+s+1)/2, (ν_d + A(W − B/A)²)/2)`; for the infinite sentinel
/// `W ~ N⁺(B/A, 1/A)` and `d = 1`.
pub fn draw_dw_given_prefix<R: Rng + ?Sized>(stats: &PrefixStats, rng: &mut R) -> (f64, f64) {
    let loc = stats.b / stats.a;
    match stats.nu {
        Dof::Infinite => {
            let w = sample_truncated(&TruncatedSpec::positive_normal(loc, 1.0 / stats.a), rng);
            (w, 1.0)
        }
        Dof::Finite(nu) => {
            let df = nu + stats.s as f64;
            let scale2 = stats.nu_d / (stats.a * df);
            let w = sample_truncated(&TruncatedSpec::positive_t(loc, scale2, df), rng);
            let dev = w - loc;
            let d = gamma_rate(rng, 0.5 * (df + 1.0), 0.5 * (stats.nu_d + stats.a * dev * dev));
            (w, d)
        }
    }
}

/// Sequential suffix `y_j = Σ_{t<j} β_jt y_t + μ̲_j + ψ̱_j W + z_j/√(d γ_j)`
/// for `j > s`, with the standard normals `z` supplied.
pub fn suffix_sequential(
    prefix: &[f64],
    w: f64,
    d: f64,
    factor: &LdlFactor,
    mean_u: &[f64],
    psi_u: &[f64],
    z: &[f64],
) -> Vec<f64> {
    let p = factor.dim();
    let s = prefix.len();
    let mut y = prefix.to_vec();
    y.reserve(p - s);
    for j in s..p {
        let mut v = mean_u[j] + psi_u[j] * w + z[j - s] / (d * factor.gamma[j]).sqrt();
        for t in 0..j {
            v += factor.beta[(j, t)] * y[t];
        }
        y.push(v);
    }
    y.split_off(s)
}

/// Matrix form of the same suffix:
/// `μ_2 − U22⁻¹U21(y_1 − μ_1) + U22⁻¹(ψ̱_2 W + ε_2/√d)`, with `μ = L μ̲`.
pub fn suffix_matrix(
    prefix: &[f64],
    w: f64,
    d: f64,
    factor: &LdlFactor,
    mean_u: &[f64],
    psi_u: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    let p = factor.dim();
    let s = prefix.len();
    if s == p {
        return Ok(Vec::new());
    }
    let part = u_partition(factor, s)?;
    let mu = factor.apply_l(&DVector::from_column_slice(&mean_u[..p]));
    let dev1 = DVector::from_fn(s, |i, _| prefix[i] - mu[i]);
    let shift = &part.u21 * dev1;
    let rhs = DVector::from_fn(p - s, |i, _| {
        let j = s + i;
        psi_u[j] * w + z[i] / (d * factor.gamma[j]).sqrt() - shift[i]
    });
    let sol = part.u22_solve(&rhs);
    Ok((0..p - s).map(|i| mu[s + i] + sol[i]).collect())
}

pub fn draw_suffix_given_prefix<R: Rng + ?Sized>(
    prefix: &[f64],
    w: f64,
    d: f64,
    factor: &LdlFactor,
    mean_u: &[f64],
    psi_u: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let m = factor.dim() - prefix.len();
    let z: Vec<f64> = (0..m).map(|_| standard_normal(rng)).collect();
    suffix_sequential(prefix, w, d, factor, mean_u, psi_u, &z)
}

/// Joint posterior of `(W, y_m)` and `d` for one subject with intermittent
/// gaps before its last observation. The unknown vector is `W` (skew
/// variants only) followed by the missing outcomes in visit order.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPosterior {
    pub skew: bool,
    pub nu: Dof,
    /// 0-based visits of the missing outcomes.
    pub missing: Vec<usize>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Lower-triangular with `A = L'L`, factored in reversed index order.
    pub l: DMatrix<f64>,
    /// `U = L⁻¹`.
    pub u: DMatrix<f64>,
    /// `C = U'B`.
    pub c: DVector<f64>,
    /// `μ = A⁻¹B = U C`.
    pub mu: DVector<f64>,
    /// `ν + o_i` (the observed count when ν is infinite).
    pub b_a: f64,
    /// `ν + Σ γ y*² − C'C` (without the ν term when ν is infinite).
    pub b_d: f64,
    /// `y*_j` for `j ≤ s` and the rows `U_jm`, kept for the alternative form.
    pub y_star: Vec<f64>,
    pub u_rows: Vec<DVector<f64>>,
    pub gamma: Vec<f64>,
}

/// Builds the augmented posterior for outcomes `y` (offset scale, length
/// `p`, `None` for missing) up to the last observed visit.
pub fn augmented_posterior(
    y: &[Option<f64>],
    mean_u: &[f64],
    factor: &LdlFactor,
    psi_u: &[f64],
    nu: Dof,
    skew: bool,
) -> Result<AugmentedPosterior> {
    let s = y.iter().rposition(Option::is_some).map_or(0, |i| i + 1);
    if s == 0 {
        return Err(Error::Data("augmented posterior needs at least one observed outcome".into()));
    }
    let missing: Vec<usize> = (0..s).filter(|&j| y[j].is_none()).collect();
    let o = s - missing.len();
    let off = usize::from(skew);
    let dim = off + missing.len();
    let mut slot = vec![usize::MAX; s];
    for (k, &j) in missing.iter().enumerate() {
        slot[j] = off + k;
    }
    let mut a = DMatrix::zeros(dim, dim);
    if skew {
        a[(0, 0)] = 1.0;
    }
    let mut b = DVector::zeros(dim);
    let mut sq = 0.0;
    let mut y_star = Vec::with_capacity(s);
    let mut u_rows = Vec::with_capacity(s);
    let mut gamma = Vec::with_capacity(s);
    for j in 0..s {
        let g = factor.gamma[j];
        let mut ys = y[j].unwrap_or(0.0) - mean_u[j];
        let mut row = DVector::zeros(dim);
        if skew {
            row[0] = psi_u[j];
        }
        for t in 0..j {
            match y[t] {
                Some(v) => ys -= factor.beta[(j, t)] * v,
                None => row[slot[t]] = factor.beta[(j, t)],
            }
        }
        if y[j].is_none() {
            row[slot[j]] = -1.0;
        }
        a.ger(g, &row, &row, 1.0);
        b.axpy(g * ys, &row, 1.0);
        sq += g * ys * ys;
        y_star.push(ys);
        u_rows.push(row);
        gamma.push(g);
    }
    let (l, u) = reversed_cholesky(&a)?;
    let c = u.transpose() * &b;
    let mu = &u * &c;
    let nu_term = nu.finite().unwrap_or(0.0);
    let b_d = nu_term + sq - c.dot(&c);
    if nu.finite().is_some() && !(b_d > 0.0) {
        return Err(Error::Numerical(format!("non-positive b_d = {b_d}")));
    }
    Ok(AugmentedPosterior {
        skew,
        nu,
        missing,
        a,
        b,
        l,
        u,
        c,
        mu,
        b_a: nu_term + o as f64,
        b_d: b_d.max(0.0),
        y_star,
        u_rows,
        gamma,
    })
}

/// `A = L'L` with `L` lower-triangular, from the Cholesky factor of the
/// index-reversed matrix. Returns `(L, L⁻¹)`.
fn reversed_cholesky(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = a.nrows();
    if m == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let rev = DMatrix::from_fn(m, m, |i, j| a[(m - 1 - i, m - 1 - j)]);
    let chol = rev.cholesky().ok_or(Error::NotPositiveDefinite { index: 0, pivot: f64::NAN })?;
    let c = chol.l();
    // L = P C' P
    let l = DMatrix::from_fn(m, m, |i, j| c[(m - 1 - j, m - 1 - i)]);
    let u = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    Ok((l, u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDraw {
    /// 0 for the symmetric variants.
    pub w: f64,
    /// 1 for the infinite-df variants.
    pub d: f64,
    pub y_m: Vec<f64>,
}

impl AugmentedPosterior {
    fn m(&self) -> usize {
        self.missing.len()
    }

    /// Mean of `y_m` given `W`: `μ_2 + U21 L11 (W − μ_1)`.
    pub fn y_m_mean(&self, w: f64) -> DVector<f64> {
        let m = self.m();
        if !self.skew {
            return self.mu.clone();
        }
        let l11 = self.l[(0, 0)];
        DVector::from_fn(m, |k, _| self.mu[1 + k] + self.u[(1 + k, 0)] * l11 * (w - self.mu[0]))
    }

    /// `U22 U22'`, the scale of `y_m` given `W` (times `1/d`).
    pub fn y_m_scale(&self) -> DMatrix<f64> {
        let off = usize::from(self.skew);
        let m = self.m();
        let u22 = self.u.view((off, off), (m, m));
        &u22 * u22.transpose()
    }

    /// The alternative form: `V = (Σ γ_j Ũ_j Ũ_j')⁻¹` and
    /// `μ = V Σ γ_j Ũ_j (y*_j − ψ̱_j W)` over the rows touching `y_m`.
    pub fn y_m_moments_alternative(&self, w: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let off = usize::from(self.skew);
        let m = self.m();
        let mut prec = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for ((row, ys), g) in self.u_rows.iter().zip(&self.y_star).zip(&self.gamma) {
            let tail = row.rows(off, m).into_owned();
            let yss = if self.skew { ys - row[0] * w } else { *ys };
            prec.ger(*g, &tail, &tail, 1.0);
            rhs.axpy(g * yss, &tail, 1.0);
        }
        let chol = prec.cholesky().ok_or(Error::NotPositiveDefinite { index: 0, pivot: f64::NAN })?;
        let v = chol.inverse();
        let mean = &v * rhs;
        Ok((mean, v))
    }

    /// Law of `W` alone: `t⁺(μ_1, U11² b_d / b_a, b_a)`, or `N⁺(μ_1, U11²)`
    /// for the infinite sentinel.
    pub fn w_marginal(&self) -> Option<TruncatedSpec> {
        if !self.skew {
            return None;
        }
        let u11 = self.u[(0, 0)];
        Some(match self.nu {
            Dof::Infinite => TruncatedSpec::positive_normal(self.mu[0], u11 * u11),
            Dof::Finite(_) => TruncatedSpec::positive_t(self.mu[0], u11 * u11 * self.b_d / self.b_a, self.b_a),
        })
    }

    /// Draws `(W, d, y_m)`. `W` comes from its exact truncated-t marginal,
    /// then `d | W ~ G((b_a+1)/2, (b_d + (W−μ_1)² L11²)/2)` and
    /// `y_m | W, d ~ N(μ_m(W), U22U22'/d)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentedDraw {
        let m = self.m();
        let (w, d) = match (self.skew, self.nu) {
            (true, nu) => {
                let w = sample_truncated(&self.w_marginal().expect("skew slot present"), rng);
                let d = match nu {
                    Dof::Infinite => 1.0,
                    Dof::Finite(_) => {
                        let l11 = self.l[(0, 0)];
                        let dev = (w - self.mu[0]) * l11;
                        gamma_rate(rng, 0.5 * (self.b_a + 1.0), 0.5 * (self.b_d + dev * dev))
                    }
                };
                (w, d)
            }
            (false, Dof::Finite(_)) => (0.0, gamma_rate(rng, 0.5 * self.b_a, 0.5 * self.b_d)),
            (false, Dof::Infinite) => (0.0, 1.0),
        };
        if m == 0 {
            return AugmentedDraw { w, d, y_m: Vec::new() };
        }
        let off = usize::from(self.skew);
        let mean = self.y_m_mean(w);
        let z = DVector::from_fn(m, |_, _| standard_normal(rng));
        let u22 = self.u.view((off, off), (m, m));
        let noise = u22 * z / d.sqrt();
        AugmentedDraw { w, d, y_m: (mean + noise).iter().copied().collect() }
    }
}

/// Fills the missing slots of `y` (up to the last observation) with `y_m`.
pub fn fill_prefix(y: &[Option<f64>], y_m: &[f64]) -> Vec<f64> {
    let s = y.iter().rposition(Option::is_some).map_or(0, |i| i + 1);
    let mut k = 0;
    (0..s)
        .map(|j| match y[j] {
            Some(v) => v,
            None => {
                k += 1;
                y_m[k - 1]
            }
        })
        .collect()
}

/// The ν-free pieces of one subject's observed-data density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedParts {
    /// Number of observed outcomes.
    pub o: usize,
    /// `(y − μ)'Ω⁻¹(y − μ)`.
    pub q: f64,
    /// `log |Ω|`.
    pub log_det: f64,
    /// `λ*'(y − μ)`.
    pub skew_arg: f64,
}

impl ObservedParts {
    pub fn log_density(&self, nu: Dof) -> f64 {
        log_density_from_parts(self.o, self.q, self.log_det, self.skew_arg, nu)
    }
}

/// Observed-data density pieces; `None` when nothing is observed. Without
/// intermittent gaps this runs on the sequential residuals with no matrix
/// inversion; otherwise the dense form on the observed sub-vector is used.
pub fn observed_parts(
    y: &[Option<f64>],
    mean_u: &[f64],
    factor: &LdlFactor,
    psi_u: &[f64],
) -> Result<Option<ObservedParts>> {
    let s = y.iter().rposition(Option::is_some).map_or(0, |i| i + 1);
    if s == 0 {
        return Ok(None);
    }
    if y[..s].iter().all(Option::is_some) {
        let prefix: Vec<f64> = y[..s].iter().map(|v| v.unwrap()).collect();
        Ok(Some(observed_parts_shortcut(&prefix, mean_u, factor, psi_u)))
    } else {
        observed_parts_dense(y, mean_u, factor, psi_u).map(Some)
    }
}

/// Log density of the observed outcomes of one subject (0 when none).
pub fn observed_loglik(
    y: &[Option<f64>],
    mean_u: &[f64],
    factor: &LdlFactor,
    psi_u: &[f64],
    nu: Dof,
) -> Result<f64> {
    Ok(observed_parts(y, mean_u, factor, psi_u)?.map_or(0.0, |pt| pt.log_density(nu)))
}

/// Shortcut for a complete prefix `y_1..y_s`:
/// `Q = Σ γ r² − (Σ γ ψ̱ r)²/A`, `λ*'(y − μ) = Σ γ ψ̱ r / √A`,
/// `log |Ω| = −Σ log γ + log A`.
pub fn observed_parts_shortcut(prefix: &[f64], mean_u: &[f64], factor: &LdlFactor, psi_u: &[f64]) -> ObservedParts {
    let s = prefix.len();
    let r = prefix_residuals(prefix, mean_u, factor);
    let mut a = 1.0;
    let mut b = 0.0;
    let mut sq = 0.0;
    let mut log_det = 0.0;
    for j in 0..s {
        let g = factor.gamma[j];
        a += g * psi_u[j] * psi_u[j];
        b += g * psi_u[j] * r[j];
        sq += g * r[j] * r[j];
        log_det -= g.ln();
    }
    ObservedParts { o: s, q: (sq - b * b / a).max(0.0), log_det: log_det + a.ln(), skew_arg: b / a.sqrt() }
}

pub fn observed_loglik_shortcut(prefix: &[f64], mean_u: &[f64], factor: &LdlFactor, psi_u: &[f64], nu: Dof) -> f64 {
    observed_parts_shortcut(prefix, mean_u, factor, psi_u).log_density(nu)
}

/// Dense pieces on the observed entries, with `μ = L μ̲`, `ψ = L ψ̱` and
/// `Σ = L Λ L'`.
pub fn observed_parts_dense(
    y: &[Option<f64>],
    mean_u: &[f64],
    factor: &LdlFactor,
    psi_u: &[f64],
) -> Result<ObservedParts> {
    let p = factor.dim();
    let idx: Vec<usize> = (0..p.min(y.len())).filter(|&j| y[j].is_some()).collect();
    if idx.is_empty() {
        return Err(Error::Data("no observed outcomes".into()));
    }
    let mu = factor.apply_l(&DVector::from_column_slice(&mean_u[..p]));
    let psi = factor.apply_l(&DVector::from_column_slice(&psi_u[..p]));
    let sigma = ldl_reconstruct(factor)?;
    let k = idx.len();
    let sig_o = DMatrix::from_fn(k, k, |i, j| sigma[(idx[i], idx[j])]);
    let psi_o = DVector::from_fn(k, |i, _| psi[idx[i]]);
    let dev = DVector::from_fn(k, |i, _| y[idx[i]].unwrap() - mu[idx[i]]);
    let chol = sig_o.cholesky().ok_or(Error::NotPositiveDefinite { index: 0, pivot: f64::NAN })?;
    let s_psi = chol.solve(&psi_o);
    let s_dev = chol.solve(&dev);
    let a = 1.0 + psi_o.dot(&s_psi);
    let b = psi_o.dot(&s_dev);
    let log_det_sigma: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(ObservedParts { o: k, q: (dev.dot(&s_dev) - b * b / a).max(0.0), log_det: log_det_sigma + a.ln(), skew_arg: b / a.sqrt() })
}

/// Reference density through [`SkewTMulti`] on the observed entries.
pub fn observed_loglik_dense(
    y: &[Option<f64>],
    mean_u: &[f64],
    factor: &LdlFactor,
    psi_u: &[f64],
    nu: Dof,
) -> Result<f64> {
    let p = factor.dim();
    let idx: Vec<usize> = (0..p.min(y.len())).filter(|&j| y[j].is_some()).collect();
    if idx.is_empty() {
        return Ok(0.0);
    }
    let mu = factor.apply_l(&DVector::from_column_slice(&mean_u[..p]));
    let psi = factor.apply_l(&DVector::from_column_slice(&psi_u[..p]));
    let sigma = ldl_reconstruct(factor)?;
    let k = idx.len();
    let dist = SkewTMulti::new(
        DVector::from_fn(k, |i, _| mu[idx[i]]),
        DMatrix::from_fn(k, k, |i, j| sigma[(idx[i], idx[j])]),
        DVector::from_fn(k, |i, _| psi[idx[i]]),
        nu,
    )?;
    dist.log_pdf(&DVector::from_fn(k, |i, _| y[idx[i]].unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factor3() -> LdlFactor {
        let mut beta = DMatrix::zeros(3, 3);
        beta[(1, 0)] = 0.4;
        beta[(2, 0)] = -0.3;
        beta[(2, 1)] = 0.6;
        LdlFactor::new(beta, DVector::from_vec(vec![1.2, 0.7, 2.0])).unwrap()
    }

    #[test]
    fn empty_prefix_recovers_prior() {
        let st = prefix_stats(&[], &[0.0; 3], &factor3(), &[0.5; 3], Dof::Finite(6.0)).unwrap();
        assert_eq!((st.a, st.b, st.nu_d), (1.0, 0.0, 6.0));
    }

    #[test]
    fn skewless_prefix() {
        let f = factor3();
        let y = [1.0, -0.5];
        let mean = [0.2, 0.1, 0.0];
        let st = prefix_stats(&y, &mean, &f, &[0.0; 3], Dof::Finite(5.0)).unwrap();
        let r = prefix_residuals(&y, &mean, &f);
        let expect = 5.0 + f.gamma[0] * r[0] * r[0] + f.gamma[1] * r[1] * r[1];
        assert_eq!(st.a, 1.0);
        assert_eq!(st.b, 0.0);
        assert!((st.nu_d - expect).abs() < 1e-14);
    }

    #[test]
    fn sequential_and_matrix_suffix_agree() {
        let f = factor3();
        let mean = [0.3, -0.2, 1.0];
        let psi = [0.5, 1.5, -0.7];
        for s in 0..3 {
            let prefix: Vec<f64> = [0.8, -1.1, 0.4][..s].to_vec();
            let z: Vec<f64> = [0.3, -1.4, 0.9][..3 - s].to_vec();
            let a = suffix_sequential(&prefix, 0.7, 1.3, &f, &mean, &psi, &z);
            let b = suffix_matrix(&prefix, 0.7, 1.3, &f, &mean, &psi, &z).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "s={s}");
            }
        }
        assert!(suffix_sequential(&[1.0, 2.0, 3.0], 0.0, 1.0, &f, &mean, &psi, &[]).is_empty());
    }

    #[test]
    fn augmented_without_gaps_matches_prefix_stats() {
        let f = factor3();
        let mean = [0.3, -0.2, 1.0];
        let psi = [0.5, 1.5, -0.7];
        let y = [Some(0.8), Some(-1.1), None];
        let post = augmented_posterior(&y, &mean, &f, &psi, Dof::Finite(7.0), true).unwrap();
        let st = prefix_stats(&[0.8, -1.1], &mean, &f, &psi, Dof::Finite(7.0)).unwrap();
        assert!((post.a[(0, 0)] - st.a).abs() < 1e-14);
        assert!((post.mu[0] - st.b / st.a).abs() < 1e-14);
        assert!((post.b_d - st.nu_d).abs() < 1e-12);
        assert_eq!(post.b_a, 9.0);
    }

    #[test]
    fn alternative_y_m_form_agrees() {
        let f = factor3();
        let mean = [0.3, -0.2, 1.0];
        let psi = [0.5, 1.5, -0.7];
        let y = [None, None, Some(0.4)];
        let post = augmented_posterior(&y, &mean, &f, &psi, Dof::Finite(4.0), true).unwrap();
        for w in [0.1, 0.9, 2.5] {
            let (m_alt, v_alt) = post.y_m_moments_alternative(w).unwrap();
            assert!((post.y_m_mean(w) - m_alt).amax() < 1e-12);
            assert!((post.y_m_scale() - v_alt).amax() < 1e-12);
        }
        assert!((post.l.transpose() * &post.l - &post.a).amax() < 1e-12);
    }

    #[test]
    fn shortcut_matches_dense() {
        let f = factor3();
        let mean = [0.3, -0.2, 1.0];
        let psi = [0.5, 1.5, -0.7];
        let y = [0.8, -1.1, 2.3];
        for nu in [Dof::Finite(5.0), Dof::Infinite] {
            let a = observed_loglik_shortcut(&y, &mean, &f, &psi, nu);
            let yo: Vec<Option<f64>> = y.iter().map(|v| Some(*v)).collect();
            let b = observed_loglik_dense(&yo, &mean, &f, &psi, nu).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let gap = [Some(0.8), None, Some(2.3)];
        for nu in [Dof::Finite(5.0), Dof::Infinite] {
            let a = observed_parts_dense(&gap, &mean, &f, &psi).unwrap().log_density(nu);
            let b = observed_loglik_dense(&gap, &mean, &f, &psi, nu).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
