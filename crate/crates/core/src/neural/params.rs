//! Flat parameter storage with named, shaped blocks.
//!
//! All learnable parameters of a component live in one contiguous `Vec<f64>`
//! addressed through named blocks. Gradients use an identically-shaped
//! vector, so optimizers and the finite-difference checker can walk every
//! scalar without knowing the model structure.

use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl BlockSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamVec {
    data: Vec<f64>,
    blocks: Vec<BlockSpec>,
    index: BTreeMap<String, usize>,
}

pub struct ParamVecBuilder {
    blocks: Vec<BlockSpec>,
    total: usize,
}

impl ParamVecBuilder {
    pub fn new() -> Self {
        ParamVecBuilder { blocks: Vec::new(), total: 0 }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> &mut Self {
        let name = name.into();
        assert!(
            !self.blocks.iter().any(|b| b.name == name),
            "duplicate parameter block {name}"
        );
        let len: usize = shape.iter().product();
        self.blocks.push(BlockSpec { name, offset: self.total, shape: shape.to_vec() });
        self.total += len;
        self
    }

    pub fn finish(self) -> ParamVec {
        let index = self.blocks.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
        ParamVec { data: vec![0.0; self.total], blocks: self.blocks, index }
    }
}

impl ParamVec {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn spec(&self, name: &str) -> &BlockSpec {
        &self.blocks[*self.index.get(name).unwrap_or_else(|| panic!("no block {name}"))]
    }

    pub fn block(&self, name: &str) -> &[f64] {
        let spec = self.spec(name);
        &self.data[spec.offset..spec.offset + spec.len()]
    }

    pub fn block_mut(&mut self, name: &str) -> &mut [f64] {
        let spec = self.spec(name).clone();
        &mut self.data[spec.offset..spec.offset + spec.len()]
    }

    /// Same block layout, all zeros. Gradient accumulators start here.
    pub fn zeros_like(&self) -> ParamVec {
        ParamVec {
            data: vec![0.0; self.data.len()],
            blocks: self.blocks.clone(),
            index: self.index.clone(),
        }
    }

    /// Which block a flat index belongs to.
    pub fn block_of(&self, flat_index: usize) -> &BlockSpec {
        self.blocks
            .iter()
            .rev()
            .find(|b| b.offset <= flat_index)
            .expect("index within parameter vector")
    }
}

// Small dense kernels. Matrices are row-major `[rows, cols]`.

/// y += W x
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for i in 0..rows {
        let row = &w[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for (wj, xj) in row.iter().zip(x) {
            acc += wj * xj;
        }
        y[i] += acc;
    }
}

/// x̄ += Wᵀ ȳ
pub fn matvec_t(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(dx.len(), cols);
    for i in 0..rows {
        let row = &w[i * cols..(i + 1) * cols];
        let d = dy[i];
        for (dxj, wj) in dx.iter_mut().zip(row) {
            *dxj += d * wj;
        }
    }
}

/// W̄ += ȳ ⊗ x
pub fn outer_acc(dw: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    debug_assert_eq!(dw.len(), rows * cols);
    for i in 0..rows {
        let d = dy[i];
        let row = &mut dw[i * cols..(i + 1) * cols];
        for (wj, xj) in row.iter_mut().zip(x) {
            *wj += d * xj;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_contiguous_and_named() {
        let mut b = ParamVecBuilder::new();
        b.add("a", &[2, 3]).add("b", &[4]);
        let params = b.finish();
        assert_eq!(params.len(), 10);
        assert_eq!(params.spec("a").offset, 0);
        assert_eq!(params.spec("b").offset, 6);
        assert_eq!(params.block("b").len(), 4);
        assert_eq!(params.block_of(7).name, "b");
        assert_eq!(params.block_of(5).name, "a");
    }

    #[test]
    fn matvec_matches_hand_computation() {
        // W = [[1,2],[3,4]], x = [5,6]
        let w = [1.0, 2.0, 3.0, 4.0];
        let x = [5.0, 6.0];
        let mut y = [0.0, 0.0];
        matvec(&w, 2, 2, &x, &mut y);
        assert_eq!(y, [17.0, 39.0]);

        let mut dx = [0.0, 0.0];
        matvec_t(&w, 2, 2, &[1.0, 1.0], &mut dx);
        assert_eq!(dx, [4.0, 6.0]);

        let mut dw = [0.0; 4];
        outer_acc(&mut dw, 2, 2, &[1.0, 2.0], &x);
        assert_eq!(dw, [5.0, 6.0, 10.0, 12.0]);
    }
}
