//! Post-dropout imputation under MAR and the control-based and
//! delta-adjusted departures from it.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conditional::{draw_dw_given_prefix, prefix_stats, suffix_sequential};
use crate::covariance::u_partition;
use crate::data::{PatternedDataset, Subject};
use crate::distributions::{gamma_rate, standard_normal, Dof};
use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, ModelSpec};
use crate::rng::{Domain, StreamFactory};
use crate::sampler::{DrawStore, SubjectLatent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Mar,
    Delta,
    J2r,
    Cir,
    Cr,
}

/// Offsets for the delta strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSpec {
    /// One constant per arm, applied at every post-dropout visit.
    PerArm { control: f64, treated: f64 },
    /// Indexed `[pattern s][arm g][visit j]` with 0-based visits; only
    /// visits `j ≥ s` are read.
    Tensor(Vec<Vec<Vec<f64>>>),
}

impl Default for DeltaSpec {
    fn default() -> Self {
        DeltaSpec::PerArm { control: 0.0, treated: 0.0 }
    }
}

impl DeltaSpec {
    fn validate(&self, p: usize) -> Result<()> {
        match self {
            DeltaSpec::PerArm { control, treated } => {
                if !control.is_finite() || !treated.is_finite() {
                    return Err(invalid("delta offsets must be finite"));
                }
            }
            DeltaSpec::Tensor(t) => {
                if t.len() != p || t.iter().any(|arms| arms.len() != 2 || arms.iter().any(|v| v.len() != p)) {
                    return Err(invalid(format!("delta tensor must be {p} x 2 x {p}")));
                }
                if t.iter().flatten().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("delta offsets must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Offsets for visits `s+1..p` of a pattern-`s` subject in `arm`.
    pub fn offsets(&self, s: usize, arm: usize, p: usize) -> Vec<f64> {
        match self {
            DeltaSpec::PerArm { control, treated } => {
                vec![if arm == 1 { *treated } else { *control }; p - s]
            }
            DeltaSpec::Tensor(t) => t[s][arm][s..p].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationStrategy {
    pub kind: StrategyKind,
    #[serde(default)]
    pub delta: DeltaSpec,
    /// Delta mode: shift the sequential residuals (`U22⁻¹Δ`) rather than the
    /// outcomes themselves.
    #[serde(default)]
    pub conditional: bool,
}

impl ImputationStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, delta: DeltaSpec::default(), conditional: false }
    }

    pub fn mar() -> Self {
        Self::new(StrategyKind::Mar)
    }

    pub fn delta(control: f64, treated: f64, conditional: bool) -> Self {
        Self { kind: StrategyKind::Delta, delta: DeltaSpec::PerArm { control, treated }, conditional }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        self.delta.validate(spec.p)?;
        if matches!(self.kind, StrategyKind::J2r | StrategyKind::Cir | StrategyKind::Cr) {
            spec.require_treatment()?;
        }
        Ok(())
    }
}

/// 0/1 arm of a subject; everyone is in arm 0 without a treatment covariate.
pub fn arm_of(subject: &Subject, spec: &ModelSpec) -> Result<usize> {
    let Some(k) = spec.treatment_slot() else {
        return Ok(0);
    };
    let g = subject.x[k];
    if g == 0.0 {
        Ok(0)
    } else if g == 1.0 {
        Ok(1)
    } else {
        Err(Error::Data(format!("subject {}: treatment must be 0 or 1, got {g}", subject.id)))
    }
}

/// `(d, W)` from their prior.
fn prior_dw<R: Rng + ?Sized>(params: &ModelParams, skew: bool, rng: &mut R) -> (f64, f64) {
    let d = match params.nu {
        Dof::Finite(nu) => gamma_rate(rng, 0.5 * nu, 0.5 * nu),
        Dof::Infinite => 1.0,
    };
    let w = if skew { standard_normal(rng).abs() / d.sqrt() } else { 0.0 };
    (w, d)
}

/// Prefix on the `y − Zη` scale with `(W, d)`, from the stored latent or
/// (pattern 0) a fresh prior draw.
fn latent_prefix<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    skew: bool,
    offset: &DVector<f64>,
    rng: &mut R,
) -> Result<(Vec<f64>, f64, f64)> {
    let s = subject.dropout();
    if s == 0 {
        let (w, d) = prior_dw(params, skew, rng);
        return Ok((Vec::new(), w, d));
    }
    let lat = latent.ok_or_else(|| invalid(format!("subject {} needs its latent draw", subject.id)))?;
    if lat.y_fill.len() != s {
        return Err(Error::DimensionMismatch { expected: s, got: lat.y_fill.len() });
    }
    let prefix = (0..s).map(|j| lat.y_fill[j] - offset[j]).collect();
    Ok((prefix, lat.w, lat.d))
}

fn normals<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..m).map(|_| standard_normal(rng)).collect()
}

/// MAR suffix `y_{s+1..p}` on the data scale.
pub fn impute_mar<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let p = spec.p;
    let s = subject.dropout();
    if s == p {
        return Ok(Vec::new());
    }
    let offset = subject.z_offset(&params.eta);
    let (prefix, w, d) = latent_prefix(subject, params, latent, spec.variant.has_skew(), &offset, rng)?;
    let mean_u = params.mean_u(&subject.x);
    let z = normals(p - s, rng);
    let suffix = suffix_sequential(&prefix, w, d, &params.factor, mean_u.as_slice(), params.psi_u.as_slice(), &z);
    Ok(suffix.iter().enumerate().map(|(k, v)| v + offset[s + k]).collect())
}

/// MAR draw plus the delta offsets, either directly or through `U22⁻¹`.
pub fn impute_delta<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    spec: &ModelSpec,
    strategy: &ImputationStrategy,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut y = impute_mar(subject, params, latent, spec, rng)?;
    if y.is_empty() {
        return Ok(y);
    }
    let s = subject.dropout();
    let delta = DVector::from_vec(strategy.delta.offsets(s, arm_of(subject, spec)?, spec.p));
    let shift = if strategy.conditional {
        u_partition(&params.factor, s)?.u22_solve(&delta)
    } else {
        delta
    };
    for (v, sh) in y.iter_mut().zip(shift.iter()) {
        *v += sh;
    }
    Ok(y)
}

/// Full-scale treatment effect per visit, `δ = L α̲_trt`.
fn treatment_effect(params: &ModelParams, spec: &ModelSpec) -> Result<DVector<f64>> {
    Ok(params.full_effect(spec.require_treatment()?))
}

/// Jump to reference: treated dropouts lose the whole effect after dropout.
pub fn impute_j2r<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let delta = treatment_effect(params, spec)?;
    let mut y = impute_mar(subject, params, latent, spec, rng)?;
    if arm_of(subject, spec)? == 1 {
        let s = subject.dropout();
        for (k, v) in y.iter_mut().enumerate() {
            *v -= delta[s + k];
        }
    }
    Ok(y)
}

/// Copy increments in reference: the effect reached at dropout is kept.
pub fn impute_cir<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let delta = treatment_effect(params, spec)?;
    let mut y = impute_mar(subject, params, latent, spec, rng)?;
    if arm_of(subject, spec)? == 1 {
        let s = subject.dropout();
        let kept = if s == 0 { 0.0 } else { delta[s - 1] };
        for (k, v) in y.iter_mut().enumerate() {
            *v -= delta[s + k] - kept;
        }
    }
    Ok(y)
}

/// Copy reference: treated dropouts follow the control-arm mean profile,
/// with `(d, W)` redrawn given the observed prefix under that profile.
pub fn impute_cr<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let trt = spec.require_treatment()?;
    let p = spec.p;
    let s = subject.dropout();
    if s == p || arm_of(subject, spec)? == 0 {
        return impute_mar(subject, params, latent, spec, rng);
    }
    let offset = subject.z_offset(&params.eta);
    let prefix: Vec<f64> = if s == 0 {
        Vec::new()
    } else {
        let lat = latent.ok_or_else(|| invalid(format!("subject {} needs its latent draw", subject.id)))?;
        (0..s).map(|j| lat.y_fill[j] - offset[j]).collect()
    };
    let mut x_control = subject.x.clone();
    x_control[trt] = 0.0;
    let mean_c = params.mean_u(&x_control);
    let stats = prefix_stats(&prefix, mean_c.as_slice(), &params.factor, params.psi_u.as_slice(), params.nu)?;
    let (mut w, d) = draw_dw_given_prefix(&stats, rng);
    if !spec.variant.has_skew() {
        w = 0.0;
    }
    let z = normals(p - s, rng);
    let suffix = suffix_sequential(&prefix, w, d, &params.factor, mean_c.as_slice(), params.psi_u.as_slice(), &z);
    Ok(suffix.iter().enumerate().map(|(k, v)| v + offset[s + k]).collect())
}

pub fn impute_subject<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    spec: &ModelSpec,
    strategy: &ImputationStrategy,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match strategy.kind {
        StrategyKind::Mar => impute_mar(subject, params, latent, spec, rng),
        StrategyKind::Delta => impute_delta(subject, params, latent, spec, strategy, rng),
        StrategyKind::J2r => impute_j2r(subject, params, latent, spec, rng),
        StrategyKind::Cir => impute_cir(subject, params, latent, spec, rng),
        StrategyKind::Cr => impute_cr(subject, params, latent, spec, rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    IntermittentDraw,
    StrategyDraw,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::IntermittentDraw => "intermittent_draw",
            Provenance::StrategyDraw => "strategy_draw",
        }
    }
}

/// One completed dataset; rows follow the sorted subject order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputedDataset {
    /// 1-based imputation number.
    pub index: usize,
    /// Position of the source draw in the store.
    pub draw: usize,
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub provenance: Vec<Vec<Provenance>>,
}

impl ImputedDataset {
    pub fn visit(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    /// `(subject, visit, value, provenance)` in long format, visits 1-based.
    pub fn long_rows(&self) -> impl Iterator<Item = (&str, usize, f64, Provenance)> + '_ {
        self.ids.iter().enumerate().flat_map(move |(i, id)| {
            self.values[i]
                .iter()
                .zip(&self.provenance[i])
                .enumerate()
                .map(move |(j, (v, pr))| (id.as_str(), j + 1, *v, *pr))
        })
    }
}

/// Completes one subject's row from a stored draw.
fn complete_row<R: Rng + ?Sized>(
    subject: &Subject,
    params: &ModelParams,
    latent: Option<&SubjectLatent>,
    spec: &ModelSpec,
    strategy: &ImputationStrategy,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<Provenance>)> {
    let s = subject.dropout();
    let mut values = Vec::with_capacity(spec.p);
    let mut prov = Vec::with_capacity(spec.p);
    for j in 0..s {
        match subject.y[j] {
            Some(v) => {
                values.push(v);
                prov.push(Provenance::Observed);
            }
            None => {
                let lat = latent.ok_or_else(|| invalid(format!("subject {} needs its latent draw", subject.id)))?;
                values.push(lat.y_fill[j]);
                prov.push(Provenance::IntermittentDraw);
            }
        }
    }
    let tail = impute_subject(subject, params, latent, spec, strategy, rng)?;
    prov.extend(std::iter::repeat_n(Provenance::StrategyDraw, tail.len()));
    values.extend(tail);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite imputation for subject {}", subject.id)));
    }
    Ok((values, prov))
}

/// `m` completed datasets from draws spread over the store. Each
/// (imputation, subject) pair has its own random stream, so reruns with the
/// same seed reuse the same numbers whatever the strategy.
pub fn generate_mi_sets(
    store: &DrawStore,
    data: &PatternedDataset,
    spec: &ModelSpec,
    strategy: &ImputationStrategy,
    m: usize,
    seed: u64,
) -> Result<Vec<ImputedDataset>> {
    if m == 0 {
        return Err(invalid("at least one imputation is required"));
    }
    if store.len() < m {
        return Err(Error::InsufficientDraws { needed: m, have: store.len() });
    }
    data.check_spec(spec)?;
    strategy.validate(spec)?;
    let n = data.n();
    let streams = StreamFactory::new(seed);
    store
        .spread_indices(m)
        .into_iter()
        .enumerate()
        .map(|(b, idx)| {
            let draw = &store.draws[idx];
            if draw.latent.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: draw.latent.len() });
            }
            let mut values = Vec::with_capacity(data.n_tot());
            let mut provenance = Vec::with_capacity(data.n_tot());
            for (i, subject) in data.subjects.iter().enumerate() {
                let mut rng = streams.stream(Domain::Impute, b as u64, i as u64);
                let (v, pr) = complete_row(subject, &draw.params, draw.latent.get(i), spec, strategy, &mut rng)?;
                values.push(v);
                provenance.push(pr);
            }
            Ok(ImputedDataset {
                index: b + 1,
                draw: idx,
                ids: data.subjects.iter().map(|s| s.id.clone()).collect(),
                values,
                provenance,
            })
        })
        .collect()
}
