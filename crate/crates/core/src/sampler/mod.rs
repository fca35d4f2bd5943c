//! Monotone data augmentation sampler over steps P0, P1, P1b, P2, I, PX1
//! and PX2, with the step set filtered by the model variant.

mod dic;
mod store;

pub use dic::{compute_dic, deviance, mean_params, Dic};
pub use store::{Draw, DrawStore, SubjectLatent};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conditional::{augmented_posterior, observed_parts, ObservedParts};
use crate::covariance::LdlFactor;
use crate::data::PatternedDataset;
use crate::distributions::{gamma_rate, sample_gig_form, standard_normal, Dof};
use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, ModelSpec};
use crate::priors::{huang_wand_rho_update, CovariancePrior, PriorConfig, ResolvedPrior};
use crate::rng::{Domain, StreamFactory};
use crate::special::ln_gamma;

const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

/// How ν is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuScheme {
    /// ν from its observed-data posterior, followed by step I: one block.
    #[default]
    Blocked,
    /// ν given the current mixing weights only.
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub n_draws: usize,
    /// Proposal SD `c` for `log(ν − ν_l)`.
    pub mh_step: f64,
    /// Robbins-Monro adaptation of `c` during burn-in.
    pub adapt: bool,
    pub target_acceptance: f64,
    pub seed: u64,
    pub nu_scheme: NuScheme,
    /// Rescaling move on `(d, γ)`.
    pub px_scale: bool,
    /// Rescaling move on `(W, ψ̱)`.
    pub px_skew: bool,
    pub nu_init: f64,
    /// Holds ν fixed; `Infinite` turns off the mixing weights.
    pub fix_nu: Option<Dof>,
    /// Holds every ψ̱_j at zero in the skew variants.
    pub pin_skew_zero: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            thin: 1,
            n_draws: 1000,
            mh_step: 0.5,
            adapt: true,
            target_acceptance: 0.45,
            seed: 1,
            nu_scheme: NuScheme::Blocked,
            px_scale: true,
            px_skew: true,
            nu_init: 10.0,
            fix_nu: None,
            pin_skew_zero: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        if self.n_draws == 0 {
            return Err(invalid("n_draws must be at least 1"));
        }
        if !(self.mh_step > 0.0) || !self.mh_step.is_finite() {
            return Err(invalid("mh_step must be positive"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(invalid("target_acceptance must lie in (0, 1)"));
        }
        if let Some(Dof::Finite(v)) = self.fix_nu {
            if !(v > 0.0) {
                return Err(invalid("fixed nu must be positive"));
            }
        }
        Ok(())
    }
}

/// Full state of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub params: ModelParams,
    /// Huang-Wand latents ρ_j.
    pub rho: DVector<f64>,
    /// Skewness latents d_ψj.
    pub d_psi: DVector<f64>,
    /// Mixing weights, one per subject (1 when unused).
    pub d: Vec<f64>,
    /// Positive latents, one per subject (0 when unused).
    pub w: Vec<f64>,
    /// Outcomes up to the dropout visit with intermittent gaps filled, on
    /// the data scale.
    pub y_fill: Vec<Vec<f64>>,
    pub mh_step: f64,
}

pub struct Sampler<'a> {
    data: &'a PatternedDataset,
    spec: &'a ModelSpec,
    prior: ResolvedPrior,
    cfg: SamplerConfig,
    streams: StreamFactory,
    n: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a PatternedDataset, spec: &'a ModelSpec, prior: &PriorConfig, cfg: SamplerConfig) -> Result<Self> {
        data.check_spec(spec)?;
        cfg.validate()?;
        let prior = prior.resolve(spec.p, spec.q(), spec.r())?;
        let n = data.n();
        if n == 0 {
            return Err(Error::Data("no subject has an observed outcome".into()));
        }
        if let Some(Dof::Finite(v)) = cfg.fix_nu {
            if !(v > prior.nu_l) {
                return Err(invalid("fixed nu must exceed nu_l"));
            }
        }
        let streams = StreamFactory::new(cfg.seed);
        Ok(Self { data, spec, prior, cfg, streams, n })
    }

    pub fn prior(&self) -> &ResolvedPrior {
        &self.prior
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Subjects with at least one observation.
    pub fn n(&self) -> usize {
        self.n
    }

    fn has_w(&self) -> bool {
        self.spec.variant.has_skew()
    }

    /// The ψ̱ slot is sampled (not pinned).
    fn psi_free(&self) -> bool {
        self.has_w() && !self.cfg.pin_skew_zero
    }

    fn mixing(&self) -> bool {
        self.spec.variant.has_mixing() && !matches!(self.cfg.fix_nu, Some(Dof::Infinite))
    }

    fn nu_free(&self) -> bool {
        self.mixing() && self.cfg.fix_nu.is_none()
    }

    /// `ỹ = y − Zη` of the filled prefix of every subject.
    fn offset_outcomes(&self, st: &ChainState) -> Vec<Vec<f64>> {
        self.data.subjects[..self.n]
            .iter()
            .zip(&st.y_fill)
            .map(|(subj, y)| {
                let off = subj.z_offset(&st.params.eta);
                y.iter().enumerate().map(|(j, v)| v - off[j]).collect()
            })
            .collect()
    }

    /// Observed outcomes on the offset scale, `None` in the gaps.
    fn offset_observed(&self, i: usize, eta: &DVector<f64>) -> Vec<Option<f64>> {
        let subj = &self.data.subjects[i];
        let off = subj.z_offset(eta);
        subj.y.iter().enumerate().map(|(j, v)| v.map(|v| v - off[j])).collect()
    }

    pub fn initial_state(&self) -> Result<ChainState> {
        let p = self.data.p;
        let q = self.spec.q();
        let mut rng = self.streams.stream(Domain::Init, 0, 0);
        let mut y_fill = Vec::with_capacity(self.n);
        let mut visit_mean = vec![0.0; p];
        let mut visit_count = vec![0usize; p];
        for subj in &self.data.subjects[..self.n] {
            for (j, v) in subj.y.iter().enumerate() {
                if let Some(v) = v {
                    visit_mean[j] += v;
                    visit_count[j] += 1;
                }
            }
        }
        for j in 0..p {
            if visit_count[j] > 0 {
                visit_mean[j] /= visit_count[j] as f64;
            }
        }
        for subj in &self.data.subjects[..self.n] {
            let s = subj.dropout();
            y_fill.push((0..s).map(|j| subj.y[j].unwrap_or(visit_mean[j])).collect::<Vec<f64>>());
        }
        // Per-visit least squares on the filled values for a starting point.
        let mut alpha_u = DMatrix::zeros(p, q);
        let mut gamma = DVector::from_element(p, 1.0);
        for j in 0..p {
            let rows: Vec<usize> = (0..self.n).filter(|&i| y_fill[i].len() > j).collect();
            if rows.is_empty() {
                continue;
            }
            let x = DMatrix::from_fn(rows.len(), q, |r, k| self.data.subjects[rows[r]].x[k]);
            let y = DVector::from_fn(rows.len(), |r, _| y_fill[rows[r]][j]);
            let coef = if q > 0 {
                x.clone().svd(true, true).solve(&y, 1e-10).unwrap_or_else(|_| DVector::zeros(q))
            } else {
                DVector::zeros(0)
            };
            let resid = &y - &x * &coef;
            let var = resid.norm_squared() / rows.len().max(1) as f64;
            gamma[j] = 1.0 / var.max(1e-8);
            for k in 0..q {
                alpha_u[(j, k)] = coef[k];
            }
        }
        let nu = match self.cfg.fix_nu {
            Some(v) => v,
            None if self.spec.variant.has_mixing() => {
                Dof::Finite(self.cfg.nu_init.clamp(self.prior.nu_l + 0.1, self.prior.nu_m - 0.1))
            }
            None => Dof::Infinite,
        };
        let params = ModelParams {
            factor: LdlFactor::new(DMatrix::zeros(p, p), gamma)?,
            alpha_u,
            psi_u: DVector::zeros(p),
            eta: self.prior.eta0.clone(),
            nu,
        };
        let w = if self.has_w() {
            (0..self.n).map(|_| standard_normal(&mut rng).abs()).collect()
        } else {
            vec![0.0; self.n]
        };
        let mut st = ChainState {
            params,
            rho: DVector::from_element(p, 1.0),
            d_psi: DVector::from_element(p, 1.0),
            d: vec![1.0; self.n],
            w,
            y_fill,
            mh_step: self.cfg.mh_step,
        };
        self.step_i(&mut st, 0)?;
        Ok(st)
    }

    /// Huang-Wand latents.
    pub fn step_p0<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) {
        if let CovariancePrior::HuangWand { n0, a0 } = self.prior.covariance {
            st.rho = huang_wand_rho_update(&st.params.factor, n0, a0, rng);
        }
    }

    /// `(d_ψj, θ_j, γ_j)` for visit `jj` (0-based).
    pub fn step_p1_visit<R: Rng + ?Sized>(
        &self,
        st: &mut ChainState,
        ytilde: &[Vec<f64>],
        jj: usize,
        rng: &mut R,
    ) -> Result<()> {
        let j = jj + 1;
        let p = self.data.p;
        let q = self.spec.q();
        let psi_free = self.psi_free();
        let qv = q + usize::from(psi_free);
        let k = qv + j;
        let d_psi = if psi_free {
            let g = st.params.factor.gamma[jj];
            let s = st.params.psi_u[jj];
            let v = gamma_rate(rng, 0.75, 0.25 + 2.0 * g * s * s / PI2);
            st.d_psi[jj] = v;
            v
        } else {
            0.0
        };
        let mut kmat = self.prior.build_e(&st.rho, d_psi, j, psi_free)?;
        let mut row = DVector::zeros(k);
        let mut n_j = 0usize;
        for (i, subj) in self.data.subjects[..self.n].iter().enumerate() {
            if ytilde[i].len() < j {
                break;
            }
            n_j += 1;
            for c in 0..q {
                row[c] = subj.x[c];
            }
            if psi_free {
                row[q] = st.w[i];
            }
            for t in 0..j {
                row[qv + t] = ytilde[i][t];
            }
            kmat.ger(st.d[i], &row, &row, 1.0);
        }
        let m = k - 1;
        let k11 = kmat.view((0, 0), (m, m)).into_owned();
        let k12 = kmat.view((0, m), (m, 1)).column(0).into_owned();
        let k22 = kmat[(m, m)];
        let chol = k11.cholesky().ok_or(Error::NotPositiveDefinite { index: jj, pivot: f64::NAN })?;
        let mean = chol.solve(&k12);
        let ss = k22 - k12.dot(&mean);
        let r = self.prior.rank_r(psi_free) as f64;
        let e = 0.5 * (n_j as f64 + self.prior.n_w() + r + 2.0 * j as f64 - p as f64 - 3.0);
        let shape = e - 0.5 * m as f64 + 1.0;
        if !(shape > 0.0) || !(ss > 0.0) {
            return Err(Error::Numerical(format!(
                "visit {j}: gamma posterior shape {shape}, rate {} is improper",
                0.5 * ss
            )));
        }
        let gamma = gamma_rate(rng, shape, 0.5 * ss);
        let z = DVector::from_fn(m, |_, _| standard_normal(rng));
        let dev = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let theta = mean + dev / gamma.sqrt();
        st.params.set_theta(jj, &theta, psi_free);
        st.params.factor.gamma[jj] = gamma;
        Ok(())
    }

    /// Shared effects η of the Z covariates.
    pub fn step_p1b<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) -> Result<()> {
        let rz = self.spec.r();
        if rz == 0 {
            return Ok(());
        }
        let (mut prec, mut rhs) = match &self.prior.eta_precision {
            Some(pm) => (pm.clone(), pm * &self.prior.eta0),
            None => (DMatrix::zeros(rz, rz), DVector::zeros(rz)),
        };
        let f = &st.params.factor;
        let mut zrow = DVector::zeros(rz);
        for (i, subj) in self.data.subjects[..self.n].iter().enumerate() {
            let y = &st.y_fill[i];
            let mu = st.params.mean_u(&subj.x);
            for j in 0..y.len() {
                let mut yrow = y[j] - mu[j] - st.params.psi_u[j] * st.w[i];
                for c in 0..rz {
                    zrow[c] = subj.z[(j, c)];
                }
                for t in 0..j {
                    let b = f.beta[(j, t)];
                    yrow -= b * y[t];
                    for c in 0..rz {
                        zrow[c] -= b * subj.z[(t, c)];
                    }
                }
                let wgt = f.gamma[j] * st.d[i];
                prec.ger(wgt, &zrow, &zrow, 1.0);
                rhs.axpy(wgt * yrow, &zrow, 1.0);
            }
        }
        let chol = prec.cholesky().ok_or(Error::NotPositiveDefinite { index: 0, pivot: f64::NAN })?;
        let mean = chol.solve(&rhs);
        let z = DVector::from_fn(rz, |_, _| standard_normal(rng));
        let dev = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        st.params.eta = mean + dev;
        Ok(())
    }

    /// Observed-data density pieces of every subject at the current state.
    pub fn observed_parts(&self, st: &ChainState) -> Result<Vec<ObservedParts>> {
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let subj = &self.data.subjects[i];
            let y = self.offset_observed(i, &st.params.eta);
            let mu = st.params.mean_u(&subj.x);
            if let Some(pt) = observed_parts(&y, mu.as_slice(), &st.params.factor, st.params.psi_u.as_slice())? {
                out.push(pt);
            }
        }
        Ok(out)
    }

    /// Log target of ν under the configured scheme, up to a constant.
    pub fn nu_log_target(&self, st: &ChainState, parts: &[ObservedParts], nu: f64) -> f64 {
        let prior = self.prior.pc_logpdf(nu);
        if !prior.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.cfg.nu_scheme {
            NuScheme::Blocked => prior + parts.iter().map(|pt| pt.log_density(Dof::Finite(nu))).sum::<f64>(),
            NuScheme::Conditional => {
                let n = self.n as f64;
                let (sum_d, sum_log_d) = st.d.iter().fold((0.0, 0.0), |(a, b), d| (a + d, b + d.ln()));
                let h = 0.5 * nu;
                prior + n * h * h.ln() - n * ln_gamma(h) + (h - 1.0) * sum_log_d - h * sum_d
            }
        }
    }

    /// Metropolis-Hastings update of ν; returns whether the move was accepted.
    pub fn step_p2<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) -> Result<bool> {
        let Dof::Finite(nu) = st.params.nu else {
            return Ok(false);
        };
        let parts = match self.cfg.nu_scheme {
            NuScheme::Blocked => self.observed_parts(st)?,
            NuScheme::Conditional => Vec::new(),
        };
        let nu_l = self.prior.nu_l;
        let log_gap = (nu - nu_l).ln();
        let prop_gap = log_gap + st.mh_step * standard_normal(rng);
        let prop = nu_l + prop_gap.exp();
        let cur_t = self.nu_log_target(st, &parts, nu);
        let prop_t = self.nu_log_target(st, &parts, prop);
        let log_ratio = prop_t - cur_t + prop_gap - log_gap;
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            st.params.nu = Dof::Finite(prop);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// `(W_i, d_i, y_im)` of every subject with an observation.
    pub fn step_i(&self, st: &mut ChainState, iteration: u64) -> Result<()> {
        let has_w = self.has_w();
        let nu = if self.mixing() { st.params.nu } else { Dof::Infinite };
        for i in 0..self.n {
            let subj = &self.data.subjects[i];
            if !has_w && !self.mixing() && subj.intermittent().is_empty() {
                continue;
            }
            let mut rng = self.streams.stream(Domain::Subject, iteration, i as u64);
            let y = self.offset_observed(i, &st.params.eta);
            let mu = st.params.mean_u(&subj.x);
            let post = augmented_posterior(&y, mu.as_slice(), &st.params.factor, st.params.psi_u.as_slice(), nu, has_w)?;
            let draw = post.draw(&mut rng);
            st.w[i] = draw.w;
            st.d[i] = draw.d;
            if !post.missing.is_empty() {
                let off = subj.z_offset(&st.params.eta);
                for (k, &j) in post.missing.iter().enumerate() {
                    st.y_fill[i][j] = draw.y_m[k] + off[j];
                }
            }
        }
        Ok(())
    }

    /// Rescales `(d, γ)` by `g` drawn from
    /// `g^{a−1} exp(−b g − c/g)`.
    pub fn step_px1<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) -> Result<()> {
        if st.params.nu.is_infinite() {
            return Ok(());
        }
        let (a, b, c) = self.px1_params(st)?;
        if c == 0.0 && !(a > 0.0) {
            return Ok(());
        }
        let g = sample_gig_form(a, b, c, rng)?;
        for d in &mut st.d {
            *d *= g;
        }
        st.params.factor.gamma /= g;
        Ok(())
    }

    /// `(a, b, c)` of the PX1 density.
    pub fn px1_params(&self, st: &ChainState) -> Result<(f64, f64, f64)> {
        let nu = st.params.nu.finite().ok_or_else(|| invalid("PX1 needs a finite nu"))?;
        let n = self.n as f64;
        let p = self.data.p as f64;
        let psi_free = self.psi_free();
        let r = self.prior.rank_r(psi_free) as f64;
        let nw = self.prior.n_w();
        let (a, b) = if self.has_w() {
            let b: f64 = st.d.iter().zip(&st.w).map(|(d, w)| d * (nu + w * w)).sum();
            (0.5 * (n * (1.0 + nu) - p * (nw + r)), 0.5 * b)
        } else {
            (0.5 * (n * nu - p * (nw + r)), 0.5 * nu * st.d.iter().sum::<f64>())
        };
        let mut c = 0.0;
        for jj in 0..self.data.p {
            let e = self.prior.build_e(&st.rho, st.d_psi[jj], jj + 1, psi_free)?;
            let theta = self.theta_tilde(st, jj, psi_free);
            c += st.params.factor.gamma[jj] * theta.dot(&(&e * &theta));
        }
        Ok((a, b, 0.5 * c))
    }

    /// θ̃_j = (−θ_j', 1)'.
    fn theta_tilde(&self, st: &ChainState, jj: usize, psi_free: bool) -> DVector<f64> {
        let th = st.params.theta(jj, psi_free);
        let m = th.len();
        DVector::from_fn(m + 1, |i, _| if i < m { -th[i] } else { 1.0 })
    }

    /// Rescales `(W, ψ̱)` by `h = √H`, `H ~ H^{(n−p)/2−1} exp(−H u/2 − v/(2H))`.
    pub fn step_px2<R: Rng + ?Sized>(&self, st: &mut ChainState, rng: &mut R) -> Result<()> {
        let (a, b, c) = self.px2_params(st);
        if c == 0.0 && !(a > 0.0) {
            return Ok(());
        }
        let h = sample_gig_form(a, b, c, rng)?.sqrt();
        for w in &mut st.w {
            *w *= h;
        }
        st.params.psi_u /= h;
        Ok(())
    }

    pub fn px2_params(&self, st: &ChainState) -> (f64, f64, f64) {
        let a = 0.5 * (self.n as f64 - self.data.p as f64);
        let b = 0.5 * st.d.iter().zip(&st.w).map(|(d, w)| d * w * w).sum::<f64>();
        let c = 0.5
            * (0..self.data.p)
                .map(|j| {
                    let s = st.params.psi_u[j];
                    st.params.factor.gamma[j] * s * s * 4.0 * st.d_psi[j] / PI2
                })
                .sum::<f64>();
        (a, b, c)
    }

    /// One full sweep; returns the ν acceptance indicator when P2 ran.
    pub fn sweep(&self, st: &mut ChainState, iteration: u64) -> Result<Option<bool>> {
        let mut rng = self.streams.stream(Domain::Hyper, iteration, 0);
        self.step_p0(st, &mut rng);
        let ytilde = self.offset_outcomes(st);
        for jj in 0..self.data.p {
            let mut rng = self.streams.stream(Domain::Visit, iteration, jj as u64);
            self.step_p1_visit(st, &ytilde, jj, &mut rng)?;
        }
        let mut rng = self.streams.stream(Domain::Shared, iteration, 0);
        self.step_p1b(st, &mut rng)?;
        let accepted = if self.nu_free() {
            let mut rng = self.streams.stream(Domain::Dof, iteration, 0);
            Some(self.step_p2(st, &mut rng)?)
        } else {
            None
        };
        self.step_i(st, iteration)?;
        if self.mixing() && self.cfg.px_scale {
            let mut rng = self.streams.stream(Domain::Expansion, iteration, 0);
            self.step_px1(st, &mut rng)?;
        }
        if self.psi_free() && self.cfg.px_skew {
            let mut rng = self.streams.stream(Domain::Expansion, iteration, 1);
            self.step_px2(st, &mut rng)?;
        }
        Ok(accepted)
    }

    /// Runs burn-in and the stored iterations from a fresh initial state.
    pub fn run(&self) -> Result<DrawStore> {
        let mut st = self.initial_state()?;
        self.run_from(&mut st)
    }

    pub fn run_from(&self, st: &mut ChainState) -> Result<DrawStore> {
        let total = self.cfg.burn_in + self.cfg.n_draws * self.cfg.thin;
        let mut store = DrawStore::new(self.spec, self.data.p);
        let mut accepted = 0usize;
        let mut proposed = 0usize;
        for it in 1..=total {
            let acc = self.sweep(st, it as u64)?;
            if it <= self.cfg.burn_in {
                if let (Some(a), true) = (acc, self.cfg.adapt) {
                    let rate = if a { 1.0 } else { 0.0 };
                    let log_c = st.mh_step.ln() + (rate - self.cfg.target_acceptance) / (it as f64).powf(0.6);
                    st.mh_step = log_c.exp().clamp(1e-3, 10.0);
                }
                continue;
            }
            if let Some(a) = acc {
                proposed += 1;
                accepted += usize::from(a);
            }
            if (it - self.cfg.burn_in) % self.cfg.thin == 0 {
                let dev = deviance(self.data, &st.params)?;
                store.push(Draw {
                    params: st.params.clone(),
                    deviance: dev,
                    latent: self.latent(st),
                });
            }
        }
        store.acceptance_rate = (proposed > 0).then(|| accepted as f64 / proposed as f64);
        store.mh_step = st.mh_step;
        Ok(store)
    }

    fn latent(&self, st: &ChainState) -> Vec<SubjectLatent> {
        (0..self.n)
            .map(|i| SubjectLatent { w: st.w[i], d: st.d[i], y_fill: st.y_fill[i].clone() })
            .collect()
    }
}

/// Builds a sampler and runs one chain.
pub fn run_chain(data: &PatternedDataset, spec: &ModelSpec, prior: &PriorConfig, cfg: &SamplerConfig) -> Result<DrawStore> {
    Sampler::new(data, spec, prior, cfg.clone())?.run()
}
