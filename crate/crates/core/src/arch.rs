use std::fmt;
use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Result, RisError};
use crate::linalg::{self, ComplexMatrix, ComplexVector};

/// Block structure of a lossless group-connected RIS: `N = G * Gs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RisArchitecture {
    n: usize,
    groups: usize,
    group_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchitectureKind {
    SingleConnected,
    GroupConnected,
    FullyConnected,
}

impl RisArchitecture {
    /// `n` elements split into `groups` equal groups.
    pub fn new(n: usize, groups: usize) -> Result<Self> {
        if n == 0 || groups == 0 || !n.is_multiple_of(groups) {
            return Err(RisError::InvalidArchitecture(format!(
                "N = {n} is not divisible into G = {groups} equal groups"
            )));
        }
        Ok(Self {
            n,
            groups,
            group_size: n / groups,
        })
    }

    pub fn with_group_size(n: usize, group_size: usize) -> Result<Self> {
        if group_size == 0 || !n.is_multiple_of(group_size) {
            return Err(RisError::InvalidArchitecture(format!(
                "N = {n} is not a multiple of Gs = {group_size}"
            )));
        }
        Self::new(n, n / group_size)
    }

    pub fn single_connected(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn fully_connected(n: usize) -> Result<Self> {
        Self::new(n, 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn kind(&self) -> ArchitectureKind {
        if self.group_size == 1 {
            ArchitectureKind::SingleConnected
        } else if self.groups == 1 {
            ArchitectureKind::FullyConnected
        } else {
            ArchitectureKind::GroupConnected
        }
    }

    /// Element indices of group `g`.
    pub fn group_range(&self, g: usize) -> Range<usize> {
        g * self.group_size..(g + 1) * self.group_size
    }

    /// Sub-vector of `v` belonging to group `g`.
    pub fn group_of(&self, v: &ComplexVector, g: usize) -> ComplexVector {
        linalg::segment(v, g * self.group_size, self.group_size)
    }

    /// Rows of `m` belonging to group `g`.
    pub fn group_rows(&self, m: &ComplexMatrix, g: usize) -> ComplexMatrix {
        m.rows(g * self.group_size, self.group_size).into_owned()
    }
}

impl fmt::Display for RisArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} G={} Gs={}", self.n, self.groups, self.group_size)
    }
}

/// Block-diagonal scattering matrix stored as its square blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<ComplexMatrix>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(RisError::EmptyInput("blocks"));
        }
        if blocks.iter().any(|b| !b.is_square() || b.nrows() == 0) {
            return Err(RisError::DimensionMismatch(
                "blocks must be square and non-empty".into(),
            ));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<ComplexMatrix> {
        self.blocks
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        linalg::block_diag(&self.blocks).expect("blocks validated on construction")
    }

    /// `Theta * v` without forming the dense matrix.
    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(v.len(), self.n(), "vector length does not match Theta");
        let mut out = ComplexVector::from_element(v.len(), Complex64::new(0.0, 0.0));
        let mut off = 0;
        for b in &self.blocks {
            let k = b.nrows();
            let seg = b * v.rows(off, k);
            out.rows_mut(off, k).copy_from(&seg);
            off += k;
        }
        out
    }

    /// `x^H Theta y`.
    pub fn bilinear(&self, x: &ComplexVector, y: &ComplexVector) -> Complex64 {
        x.dotc(&self.mul_vec(y))
    }

    /// Largest `max |B^H B - I|` over the blocks.
    pub fn max_unitarity_deviation(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::unitarity_deviation)
            .fold(0.0, f64::max)
    }
}

/// How the group size follows `N` in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupSizePolicy {
    Fixed(usize),
    /// `Gs = N`.
    FullyConnected,
}

impl GroupSizePolicy {
    pub fn group_size(&self, n: usize) -> usize {
        match self {
            GroupSizePolicy::Fixed(gs) => *gs,
            GroupSizePolicy::FullyConnected => n,
        }
    }

    pub fn architecture(&self, n: usize) -> Result<RisArchitecture> {
        RisArchitecture::with_group_size(n, self.group_size(n))
    }

    pub fn label(&self) -> String {
        match self {
            GroupSizePolicy::Fixed(1) => "single-connected".into(),
            GroupSizePolicy::Fixed(gs) => format!("Gs={gs}"),
            GroupSizePolicy::FullyConnected => "fully-connected".into(),
        }
    }
}
