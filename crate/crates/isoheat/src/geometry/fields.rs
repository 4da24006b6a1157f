//! Tensor fields sampled on periodic grids, in orthonormal-frame components.

/// Position of `(i, j)`, `i ≤ j`, in the packed lexicographic layout
/// `(0,0), (0,1), …, (0,n−1), (1,1), …`.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Inverse of [`sym_index`]: all pairs `(i, j)`, `i ≤ j`, in packed order.
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// Covariant 1-form field `t_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    pub n: usize,
    /// `comps[i][p]`.
    pub comps: Vec<Vec<f64>>,
}

impl TangentField {
    pub fn zeros(n: usize, len: usize) -> Self {
        TangentField {
            n,
            comps: vec![vec![0.0; len]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.comps.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Symmetric 2-tensor field `h_ij(x)`, stored packed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub n: usize,
    /// `comps[sym_index(i, j)][p]`.
    pub comps: Vec<Vec<f64>>,
}

impl SymTensorField {
    pub fn zeros(n: usize, len: usize) -> Self {
        SymTensorField {
            n,
            comps: vec![vec![0.0; len]; n * (n + 1) / 2],
        }
    }

    /// The same constant tensor at every point.
    pub fn constant(t: &nalgebra::DMatrix<f64>, len: usize) -> Self {
        let n = t.nrows();
        let comps = sym_pairs(n)
            .into_iter()
            .map(|(i, j)| vec![0.5 * (t[(i, j)] + t[(j, i)]); len])
            .collect();
        SymTensorField { n, comps }
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym_index(self.n, i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Vec<f64> {
        let k = sym_index(self.n, i, j);
        &mut self.comps[k]
    }

    pub fn len(&self) -> usize {
        self.comps.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, p: usize) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j)[p])
    }

    /// Frame norm sup over the grid.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len())
            .map(|p| self.at(p).norm())
            .fold(0.0, f64::max)
    }
}

/// Field of one of the two supported tensor kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Tangent(TangentField),
    Sym(SymTensorField),
}
