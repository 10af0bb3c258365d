//! Solution vectors and the named-block layout they carry.
//!
//! A problem's unknowns live in one flat `Vec<f64>`; the [`BlockLayout`]
//! records which sub-range of that vector holds which physical field
//! (e.g. `u`, `w`, `T`, `C` for the convection problem). Solver layers
//! operate on plain slices; the layout is consulted wherever per-block
//! scaling or per-block linear operators apply.

use std::ops::Range;
use std::sync::Arc;

/// One named block of degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Partition of a flat state vector into contiguous named blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    blocks: Vec<Block>,
    total: usize,
}

impl BlockLayout {
    pub fn new(spec: &[(&str, usize)]) -> Self {
        let mut blocks = Vec::with_capacity(spec.len());
        let mut offset = 0;
        for (name, len) in spec {
            blocks.push(Block {
                name: (*name).to_string(),
                offset,
                len: *len,
            });
            offset += len;
        }
        BlockLayout {
            blocks,
            total: offset,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.block(name).map(|b| b.range())
    }
}

/// Flat vector of real degrees of freedom plus the layout describing it.
#[derive(Debug, Clone)]
pub struct SolutionVector {
    pub data: Vec<f64>,
    pub layout: Arc<BlockLayout>,
}

impl SolutionVector {
    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let n = layout.len();
        SolutionVector {
            data: vec![0.0; n],
            layout,
        }
    }

    pub fn from_vec(layout: Arc<BlockLayout>, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            layout.len(),
            "state length does not match layout"
        );
        SolutionVector { data, layout }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, name: &str) -> &[f64] {
        let r = self
            .layout
            .range(name)
            .unwrap_or_else(|| panic!("no block named {name}"));
        &self.data[r]
    }

    pub fn block_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self
            .layout
            .range(name)
            .unwrap_or_else(|| panic!("no block named {name}"));
        &mut self.data[r]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(v: &mut [f64], a: f64) {
    for x in v.iter_mut() {
        *x *= a;
    }
}

/// `a + s * b` as a new vector.
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `a - b` as a new vector.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
