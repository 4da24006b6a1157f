use std::sync::Arc;

/// Enumeration of sorted derivative multi-indices `(i₁ ≤ … ≤ i_m)`, `m ≤ order`,
/// ordered by length then lexicographically. Index 0 is the value itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexTable {
    n: usize,
    order: usize,
    tuples: Vec<Vec<usize>>,
}

impl MultiIndexTable {
    pub fn new(n: usize, order: usize) -> Self {
        let mut tuples = vec![Vec::new()];
        let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..order {
            let mut next = Vec::new();
            for t in &layer {
                let start = t.last().copied().unwrap_or(0);
                for i in start..n {
                    let mut u = t.clone();
                    u.push(i);
                    next.push(u);
                }
            }
            tuples.extend(next.iter().cloned());
            layer = next;
        }
        MultiIndexTable { n, order, tuples }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    /// Position of a (not necessarily sorted) multi-index.
    pub fn id(&self, idx: &[usize]) -> usize {
        let mut s = idx.to_vec();
        s.sort_unstable();
        self.tuples
            .iter()
            .position(|t| *t == s)
            .unwrap_or_else(|| panic!("multi-index {idx:?} beyond order {}", self.order))
    }
}

/// Chart partial derivatives of every basis function at one point:
/// `data[id·q + j] = ∂^{tuple(id)} φ_j(x)`.
#[derive(Debug, Clone)]
pub struct ModeJets {
    pub table: Arc<MultiIndexTable>,
    pub q: usize,
    pub data: Vec<f64>,
}

impl ModeJets {
    pub fn zeros(table: Arc<MultiIndexTable>, q: usize) -> Self {
        let len = table.len() * q;
        ModeJets {
            table,
            q,
            data: vec![0.0; len],
        }
    }

    pub fn row(&self, idx: &[usize]) -> &[f64] {
        let id = self.table.id(idx);
        &self.data[id * self.q..(id + 1) * self.q]
    }

    pub fn row_by_id(&self, id: usize) -> &[f64] {
        &self.data[id * self.q..(id + 1) * self.q]
    }

    pub fn values(&self) -> &[f64] {
        self.row_by_id(0)
    }
}
