//! Dense d-dimensional grids stored row-major in a flat buffer.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct GridError {
    msg: String,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.msg)
    }
}

impl std::error::Error for GridError {}

/// A d-dimensional array of f64 values, row-major (last axis contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct GridNd {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl GridNd {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self, GridError> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(GridError {
                msg: format!(
                    "grid data length {} does not match dims {:?} (expected {})",
                    data.len(),
                    dims,
                    len
                ),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Stride of an axis in the flat buffer.
    pub fn stride(&self, axis: usize) -> usize {
        self.dims[axis + 1..].iter().product()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut flat = 0;
        for (a, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[a]);
            flat = flat * self.dims[a] + i;
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let f = self.flat_index(idx);
        self.data[f] = v;
    }

    /// Number of 1-D lines along `axis`.
    pub fn line_count(&self, axis: usize) -> usize {
        self.len() / self.dims[axis]
    }

    /// Flat index of element `t` of line `line` along `axis`.
    ///
    /// Lines are enumerated by (outer, inner) blocks so that every element
    /// of the grid belongs to exactly one line.
    pub fn line_element(&self, axis: usize, line: usize, t: usize) -> usize {
        let stride = self.stride(axis);
        let outer = line / stride;
        let inner = line % stride;
        outer * (self.dims[axis] * stride) + inner + t * stride
    }

    pub fn gather_line(&self, axis: usize, line: usize, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.dims[axis]);
        for (t, b) in buf.iter_mut().enumerate() {
            *b = self.data[self.line_element(axis, line, t)];
        }
    }

    pub fn scatter_line(&mut self, axis: usize, line: usize, buf: &[f64]) {
        debug_assert_eq!(buf.len(), self.dims[axis]);
        for (t, &b) in buf.iter().enumerate() {
            let f = self.line_element(axis, line, t);
            self.data[f] = b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Iterates multi-indices in row-major order.
    pub fn indices(&self) -> IndexIter {
        IndexIter {
            dims: self.dims.clone(),
            next: if self.data.is_empty() {
                None
            } else {
                Some(vec![0; self.dims.len()])
            },
        }
    }
}

pub struct IndexIter {
    dims: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for IndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.clone()?;
        let mut nxt = cur.clone();
        let mut axis = self.dims.len();
        loop {
            if axis == 0 {
                self.next = None;
                break;
            }
            axis -= 1;
            nxt[axis] += 1;
            if nxt[axis] < self.dims[axis] {
                self.next = Some(nxt);
                break;
            }
            nxt[axis] = 0;
        }
        Some(cur)
    }
}
