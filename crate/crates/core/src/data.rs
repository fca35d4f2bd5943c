//! Subject records sorted into monotone dropout patterns.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{expanded_name, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    /// X covariates (constant over visits).
    pub x: DVector<f64>,
    /// Z covariates, visits by columns.
    pub z: DMatrix<f64>,
    /// Outcomes per visit; `None` is missing.
    pub y: Vec<Option<f64>>,
}

impl Subject {
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: Vec<Option<f64>>) -> Self {
        let p = y.len();
        Self { id: id.into(), x: DVector::from_vec(x), z: DMatrix::zeros(p, 0), y }
    }

    /// Last observed visit `s_i` (1-based; 0 when nothing is observed).
    pub fn dropout(&self) -> usize {
        self.y.iter().rposition(Option::is_some).map_or(0, |i| i + 1)
    }

    /// Number of observed outcomes `o_i`.
    pub fn observed_count(&self) -> usize {
        self.y.iter().filter(|v| v.is_some()).count()
    }

    /// 0-based visits missing before the last observation.
    pub fn intermittent(&self) -> Vec<usize> {
        let s = self.dropout();
        (0..s).filter(|&j| self.y[j].is_none()).collect()
    }

    /// `z_j' η` for each visit.
    pub fn z_offset(&self, eta: &DVector<f64>) -> DVector<f64> {
        if self.z.ncols() == 0 {
            DVector::zeros(self.y.len())
        } else {
            &self.z * eta
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternSummary {
    /// `n_j`: subjects observed at visit `j` or later (index `j − 1`).
    pub n_tail: Vec<usize>,
    /// Subjects in each pattern `s = 0..=p`.
    pub pattern_counts: Vec<usize>,
    /// Intermittent-missing cells per visit.
    pub intermittent_counts: Vec<usize>,
    pub n: usize,
    pub n_tot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternedDataset {
    pub p: usize,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    /// Sorted by dropout visit descending, ties by id.
    pub subjects: Vec<Subject>,
}

impl PatternedDataset {
    pub fn new(p: usize, x_names: Vec<String>, z_names: Vec<String>, mut subjects: Vec<Subject>) -> Result<Self> {
        if p == 0 {
            return Err(Error::Data("at least one visit is required".into()));
        }
        let q = x_names.len();
        let r = z_names.len();
        let mut ids = std::collections::HashSet::new();
        for s in &subjects {
            if !ids.insert(s.id.clone()) {
                return Err(Error::Data(format!("duplicate subject '{}'", s.id)));
            }
            if s.y.len() != p {
                return Err(Error::Data(format!("subject '{}' has {} visits, expected {p}", s.id, s.y.len())));
            }
            if s.x.len() != q {
                return Err(Error::Data(format!("subject '{}' has {} X values, expected {q}", s.id, s.x.len())));
            }
            if s.z.nrows() != p || s.z.ncols() != r {
                return Err(Error::Data(format!("subject '{}' has a {}x{} Z block, expected {p}x{r}", s.id, s.z.nrows(), s.z.ncols())));
            }
            if s.x.iter().chain(s.z.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("subject '{}' has non-finite covariates", s.id)));
            }
            if s.y.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("subject '{}' has non-finite outcomes", s.id)));
            }
        }
        subjects.sort_by(|a, b| b.dropout().cmp(&a.dropout()).then_with(|| a.id.cmp(&b.id)));
        Ok(Self { p, x_names, z_names, subjects })
    }

    pub fn n_tot(&self) -> usize {
        self.subjects.len()
    }

    /// Subjects with at least one observed outcome; they come first.
    pub fn n(&self) -> usize {
        self.subjects.iter().take_while(|s| s.dropout() > 0).count()
    }

    /// `n_j` for 1-based visit `j`.
    pub fn n_tail(&self, j: usize) -> usize {
        self.subjects.iter().take_while(|s| s.dropout() >= j).count()
    }

    pub fn summary(&self) -> PatternSummary {
        let mut pattern_counts = vec![0; self.p + 1];
        let mut intermittent_counts = vec![0; self.p];
        for s in &self.subjects {
            pattern_counts[s.dropout()] += 1;
            for j in s.intermittent() {
                intermittent_counts[j] += 1;
            }
        }
        PatternSummary {
            n_tail: (1..=self.p).map(|j| self.n_tail(j)).collect(),
            pattern_counts,
            intermittent_counts,
            n: self.n(),
            n_tot: self.n_tot(),
        }
    }

    /// Checks that the dataset columns match the model.
    pub fn check_spec(&self, spec: &ModelSpec) -> Result<()> {
        spec.validate()?;
        if spec.p != self.p {
            return Err(Error::Spec(format!("model has {} visits, data has {}", spec.p, self.p)));
        }
        if spec.x_names != self.x_names || spec.z_names != self.z_names {
            return Err(Error::Spec("model covariates do not match the dataset columns".into()));
        }
        if let Some(slot) = spec.treatment_slot() {
            for s in &self.subjects {
                let g = s.x[slot];
                if g != 0.0 && g != 1.0 {
                    return Err(Error::Data(format!("treatment of subject '{}' must be 0 or 1, got {g}", s.id)));
                }
            }
        }
        Ok(())
    }

    /// Dataset counterpart of [`crate::model::x_to_z_expand`]: X column
    /// `name` becomes `p` Z columns holding `x` at its own visit and 0
    /// elsewhere.
    pub fn expand_x_to_z(&self, name: &str) -> Result<Self> {
        let pos = self
            .x_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Spec(format!("covariate '{name}' is not in X")))?;
        let mut x_names = self.x_names.clone();
        x_names.remove(pos);
        let mut z_names = self.z_names.clone();
        for j in 1..=self.p {
            z_names.push(expanded_name(name, j));
        }
        let r = self.z_names.len();
        let subjects = self
            .subjects
            .iter()
            .map(|s| {
                let mut xs: Vec<f64> = s.x.iter().copied().collect();
                let v = xs.remove(pos);
                let mut z = DMatrix::zeros(self.p, r + self.p);
                z.view_mut((0, 0), (self.p, r)).copy_from(&s.z);
                for j in 0..self.p {
                    z[(j, r + j)] = v;
                }
                Subject { id: s.id.clone(), x: DVector::from_vec(xs), z, y: s.y.clone() }
            })
            .collect();
        Self::new(self.p, x_names, z_names, subjects)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_bookkeeping() {
        let subjects = vec![
            Subject::new("a", vec![1.0], vec![Some(1.0), None, None]),
            Subject::new("b", vec![1.0], vec![Some(1.0), None, Some(2.0)]),
            Subject::new("c", vec![1.0], vec![None, None, None]),
            Subject::new("d", vec![1.0], vec![Some(0.0), Some(1.0), Some(2.0)]),
        ];
        let d = PatternedDataset::new(3, vec!["(intercept)".into()], vec![], subjects).unwrap();
        let order: Vec<&str> = d.subjects.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(order, vec!["b", "d", "a", "c"]);
        assert_eq!(d.subjects[0].dropout(), 3);
        assert_eq!(d.subjects[0].intermittent(), vec![1]);
        let sum = d.summary();
        assert_eq!(sum.n_tail, vec![3, 2, 2]);
        assert_eq!(sum.pattern_counts, vec![1, 1, 0, 2]);
        assert_eq!(sum.intermittent_counts, vec![0, 1, 0]);
        assert_eq!(sum.n, 3);
    }

    #[test]
    fn rejects_duplicates() {
        let subjects = vec![
            Subject::new("a", vec![], vec![Some(1.0)]),
            Subject::new("a", vec![], vec![Some(2.0)]),
        ];
        assert!(PatternedDataset::new(1, vec![], vec![], subjects).is_err());
    }
}
