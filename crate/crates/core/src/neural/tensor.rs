use crate::dataset::FeatureMatrix;

/// Row-major n-dimensional array; the first axis is always the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor data must match its shape");
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn from_matrix(m: &FeatureMatrix) -> Self {
        Self::new(vec![m.rows, m.cols], m.values.clone())
    }

    pub fn from_rows(m: &FeatureMatrix, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * m.cols);
        for &r in rows {
            data.extend_from_slice(m.row(r));
        }
        Self::new(vec![rows.len(), m.cols], data)
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
