//! Dense value storage for tape nodes.

/// A dense row-major array with an explicit 2-D shape.
///
/// Everything the tape computes on is one of these: scalars are `(1, 1)`,
/// 3-vectors are rows `(1, 3)`, point sets are `(n, 3)`, images are `(h, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Value {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Value {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "autodiff: value data length {} does not match shape {}x{}",
            data.len(),
            rows,
            cols
        );
        Value { data, rows, cols }
    }

    pub fn scalar(x: f64) -> Self {
        Value { data: vec![x], rows: 1, cols: 1 }
    }

    pub fn vec3(v: [f64; 3]) -> Self {
        Value { data: v.to_vec(), rows: 1, cols: 3 }
    }

    pub fn row(v: Vec<f64>) -> Self {
        let n = v.len();
        Value { data: v, rows: 1, cols: n }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Value { data: vec![0.0; rows * cols], rows, cols }
    }

    pub fn matrix3(m: [[f64; 3]; 3]) -> Self {
        let mut data = Vec::with_capacity(9);
        for r in m {
            data.extend_from_slice(&r);
        }
        Value { data, rows: 3, cols: 3 }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn as_scalar(&self) -> f64 {
        assert!(self.is_scalar(), "autodiff: expected scalar, got {}x{}", self.rows, self.cols);
        self.data[0]
    }

    pub fn as_vec3(&self) -> [f64; 3] {
        assert_eq!(
            (self.rows, self.cols),
            (1, 3),
            "autodiff: expected 1x3 vector, got {}x{}",
            self.rows,
            self.cols
        );
        [self.data[0], self.data[1], self.data[2]]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}
