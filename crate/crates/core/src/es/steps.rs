use std::ops::Deref;

/// A tuple of n-vectors stored row-major: the lambda sampled steps of one
/// iteration, or the mu selected ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Steps {
    dim: usize,
    data: Vec<f64>,
}

impl Steps {
    pub fn zeros(dim: usize, count: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * count],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            assert_eq!(r.as_ref().len(), dim, "rows must share one dimension");
            data.extend_from_slice(r.as_ref());
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Every entry multiplied by `rho`.
    pub fn scaled(&self, rho: f64) -> Steps {
        Steps {
            dim: self.dim,
            data: self.data.iter().map(|v| rho * v).collect(),
        }
    }

    /// Each row mapped through `f`.
    pub fn map_rows<F: FnMut(&[f64]) -> Vec<f64>>(&self, mut f: F) -> Steps {
        let rows: Vec<Vec<f64>> = self.rows().map(&mut f).collect();
        Steps::from_rows(&rows)
    }

    /// sum_i w_i row_i.
    pub fn weighted_sum(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (row, w) in self.rows().zip(weights) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
        out
    }
}

/// The mu best steps of an iteration in f-order, together with the indices
/// they had among the lambda samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSteps {
    steps: Steps,
    indices: Vec<usize>,
}

impl SelectedSteps {
    pub(crate) fn new(steps: Steps, indices: Vec<usize>) -> Self {
        Self { steps, indices }
    }

    pub fn steps(&self) -> &Steps {
        &self.steps
    }

    /// Original sample index of each selected step, best first.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl Deref for SelectedSteps {
    type Target = Steps;

    fn deref(&self) -> &Steps {
        &self.steps
    }
}
