//! Coarse/fine partition of the unknowns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    Coarse,
    Fine,
}

/// Partition of `0..n` into a coarse set `C` and a fine set `F`.
///
/// The index lists are kept sorted and in sync with the labels, so the
/// position of a vertex inside `coarse()` is its coarse-grid column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfSplit {
    labels: Vec<PointKind>,
    coarse: Vec<usize>,
    fine: Vec<usize>,
    coarse_index: Vec<Option<usize>>,
}

impl CfSplit {
    /// Every vertex fine.
    pub fn all_fine(n: usize) -> Self {
        Self::from_labels(vec![PointKind::Fine; n])
    }

    /// Every vertex coarse.
    pub fn all_coarse(n: usize) -> Self {
        Self::from_labels(vec![PointKind::Coarse; n])
    }

    pub fn from_labels(labels: Vec<PointKind>) -> Self {
        let mut coarse = Vec::new();
        let mut fine = Vec::new();
        let mut coarse_index = vec![None; labels.len()];
        for (i, kind) in labels.iter().enumerate() {
            match kind {
                PointKind::Coarse => {
                    coarse_index[i] = Some(coarse.len());
                    coarse.push(i);
                }
                PointKind::Fine => fine.push(i),
            }
        }
        Self {
            labels,
            coarse,
            fine,
            coarse_index,
        }
    }

    /// Builds a split of `0..n` whose coarse set is `coarse` (any order, no duplicates).
    pub fn from_coarse(n: usize, coarse: &[usize]) -> Result<Self> {
        let mut labels = vec![PointKind::Fine; n];
        for &c in coarse {
            if c >= n {
                return Err(Error::InvalidParameter(format!(
                    "coarse vertex {c} out of range for n = {n}"
                )));
            }
            if labels[c] == PointKind::Coarse {
                return Err(Error::InvalidParameter(format!(
                    "coarse vertex {c} listed twice"
                )));
            }
            labels[c] = PointKind::Coarse;
        }
        Ok(Self::from_labels(labels))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn kind(&self, i: usize) -> PointKind {
        self.labels[i]
    }

    pub fn is_coarse(&self, i: usize) -> bool {
        self.labels[i] == PointKind::Coarse
    }

    pub fn is_fine(&self, i: usize) -> bool {
        self.labels[i] == PointKind::Fine
    }

    pub fn labels(&self) -> &[PointKind] {
        &self.labels
    }

    /// Sorted coarse vertices.
    pub fn coarse(&self) -> &[usize] {
        &self.coarse
    }

    /// Sorted fine vertices.
    pub fn fine(&self) -> &[usize] {
        &self.fine
    }

    pub fn n_coarse(&self) -> usize {
        self.coarse.len()
    }

    pub fn n_fine(&self) -> usize {
        self.fine.len()
    }

    /// Coarse-grid column of vertex `i`, if it is coarse.
    pub fn coarse_index(&self, i: usize) -> Option<usize> {
        self.coarse_index[i]
    }

    /// Moves the given fine vertices into `C`.
    pub fn promote(&mut self, vertices: &[usize]) {
        for &v in vertices {
            self.labels[v] = PointKind::Coarse;
        }
        *self = Self::from_labels(std::mem::take(&mut self.labels));
    }

    /// The coarsening factor `|C| / |Ω|`.
    pub fn coarsening_factor(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.coarse.len() as f64 / self.labels.len() as f64
    }
}
