use crate::error::{KifError, Result};
use crate::rank_stats::LabelVector;

/// Column-major `n × p` feature matrix with a label per row.
///
/// `feature_ids` maps each column back to its index in the dataset it was
/// derived from (identity for freshly built data); screening results are
/// reported in those ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    labels: LabelVector,
    feature_names: Vec<String>,
    feature_ids: Vec<usize>,
}

impl Dataset {
    /// `values` is column-major: column `j` occupies `values[j*n..(j+1)*n]`.
    pub fn new(n: usize, p: usize, values: Vec<f64>, labels: LabelVector) -> Result<Self> {
        if n < 2 {
            return Err(KifError::TooFewObservations {
                required: 2,
                got: n,
            });
        }
        if p < 2 {
            return Err(KifError::TooFewFeatures { got: p });
        }
        if values.len() != n * p {
            return Err(KifError::ShapeMismatch {
                cells: values.len(),
                n,
                p,
            });
        }
        if labels.len() != n {
            return Err(KifError::LengthMismatch {
                left: labels.len(),
                right: n,
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(KifError::NonFiniteFeature {
                row: idx % n,
                column: idx / n,
            });
        }
        Ok(Self {
            n,
            p,
            values,
            labels,
            feature_names: (1..=p).map(|j| format!("X{j}")).collect(),
            feature_ids: (0..p).collect(),
        })
    }

    pub fn from_columns(columns: Vec<Vec<f64>>, labels: LabelVector) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(KifError::LengthMismatch {
                left: bad.len(),
                right: n,
            });
        }
        Self::new(n, p, columns.concat(), labels)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(KifError::LengthMismatch {
                left: names.len(),
                right: self.p,
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn value(&self, row: usize, j: usize) -> f64 {
        self.values[j * self.n + row]
    }

    /// Raw column-major storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_ids(&self) -> &[usize] {
        &self.feature_ids
    }

    /// Keeps the given columns (in the given order), preserving their
    /// original ids and names.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if columns.len() < 2 {
            return Err(KifError::TooFewFeatures { got: columns.len() });
        }
        let mut values = Vec::with_capacity(columns.len() * self.n);
        for &j in columns {
            if j >= self.p {
                return Err(KifError::InvalidConfig(format!(
                    "feature column {j} out of range (p = {})",
                    self.p
                )));
            }
            values.extend_from_slice(self.column(j));
        }
        Ok(Self {
            n: self.n,
            p: columns.len(),
            values,
            labels: self.labels.clone(),
            feature_names: columns
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            feature_ids: columns.iter().map(|&j| self.feature_ids[j]).collect(),
        })
    }

    /// Applies `f` to every feature value. Errors if the result is not
    /// finite.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut out = Self::new(self.n, self.p, values, self.labels.clone())?;
        out.feature_names = self.feature_names.clone();
        out.feature_ids = self.feature_ids.clone();
        Ok(out)
    }

    /// Same features with rows reordered: row `i` of the result is row
    /// `perm[i]` of `self`, labels included.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(KifError::LengthMismatch {
                left: perm.len(),
                right: self.n,
            });
        }
        let values = self
            .columns()
            .flat_map(|col| perm.iter().map(move |&i| col[i]))
            .collect();
        let codes = perm.iter().map(|&i| self.labels.codes()[i]).collect();
        let labels = LabelVector::from_codes(codes, self.labels.class_names().to_vec())?;
        let mut out = Self::new(self.n, self.p, values, labels)?;
        out.feature_names = self.feature_names.clone();
        out.feature_ids = self.feature_ids.clone();
        Ok(out)
    }

    /// Same features with a different label vector.
    pub fn with_labels(&self, labels: LabelVector) -> Result<Self> {
        if labels.len() != self.n {
            return Err(KifError::LengthMismatch {
                left: labels.len(),
                right: self.n,
            });
        }
        let mut out = self.clone();
        out.labels = labels;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> LabelVector {
        LabelVector::from_values(&[0, 1, 0]).unwrap()
    }

    #[test]
    fn column_access() {
        let d = Dataset::new(3, 2, vec![1., 2., 3., 4., 5., 6.], labels()).unwrap();
        assert_eq!(d.column(1), &[4., 5., 6.]);
        assert_eq!(d.value(2, 0), 3.);
        assert_eq!(d.feature_names(), &["X1", "X2"]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Dataset::new(3, 1, vec![1., 2., 3.], labels()),
            Err(KifError::TooFewFeatures { got: 1 })
        ));
        assert!(matches!(
            Dataset::new(3, 2, vec![1.; 5], labels()),
            Err(KifError::ShapeMismatch { .. })
        ));
        assert_eq!(
            Dataset::new(3, 2, vec![1., 2., 3., 4., f64::NAN, 6.], labels()),
            Err(KifError::NonFiniteFeature { row: 1, column: 1 })
        );
    }

    #[test]
    fn select_keeps_ids() {
        let d = Dataset::from_columns(vec![vec![1., 2., 3.]; 4], labels()).unwrap();
        let s = d.select_features(&[1, 3]).unwrap();
        assert_eq!(s.feature_ids(), &[1, 3]);
        assert_eq!(s.feature_names(), &["X2", "X4"]);
        let s2 = s.select_features(&[1, 0]).unwrap();
        assert_eq!(s2.feature_ids(), &[3, 1]);
    }
}
