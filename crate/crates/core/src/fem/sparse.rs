use std::collections::BTreeMap;

use crate::error::{config_err, Result};

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseSystem {
    /// Compresses coordinate triplets, summing duplicates. Column indices in each
    /// row come out sorted.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Self {
        triplets.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            dim: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
            symmetric: true,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// Bilinear form `x^T A y`.
    pub fn energy(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &SparseSystem, factor: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = self.triplets();
        t.extend(
            other
                .triplets()
                .into_iter()
                .map(|(i, j, v)| (i, j, factor * v)),
        );
        Self::from_triplets(self.dim, t, self.symmetric && other.symmetric)
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(self.dim, d.len());
        let mut t = self.triplets();
        t.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        Self::from_triplets(self.dim, t, self.symmetric)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise `|A_ij - A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Eliminates the constrained degrees of freedom of `dofs`: their rows and
    /// columns become identity rows, the right-hand side takes the prescribed
    /// value, and column couplings are moved to the right-hand side of the free rows.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], dofs: &DofMap) {
        assert_eq!(rhs.len(), self.dim);
        let fixed = &dofs.dirichlet;
        if fixed.is_empty() {
            return;
        }
        let mut is_fixed = vec![None; self.dim];
        for (&d, &g) in fixed {
            is_fixed[d] = Some(g);
        }
        for i in 0..self.dim {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            if let Some(g) = is_fixed[i] {
                for k in range {
                    self.values[k] = if self.col_idx[k] == i { 1.0 } else { 0.0 };
                }
                rhs[i] = g;
            } else {
                for k in range {
                    if let Some(g) = is_fixed[self.col_idx[k]] {
                        rhs[i] -= self.values[k] * g;
                        self.values[k] = 0.0;
                    }
                }
            }
        }
        // constrained rows need an explicit unit diagonal even if none was stored
        let missing: Vec<usize> = fixed
            .keys()
            .copied()
            .filter(|&d| self.get(d, d) != 1.0)
            .collect();
        if !missing.is_empty() {
            let mut t = self.triplets();
            t.extend(missing.into_iter().map(|d| (d, d, 1.0)));
            *self = Self::from_triplets(self.dim, t, self.symmetric);
        }
    }
}

/// Maps nodes to degrees of freedom and records prescribed values.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub components: usize,
    pub num_nodes: usize,
    pub dirichlet: BTreeMap<usize, f64>,
}

impl DofMap {
    pub fn new(num_nodes: usize, components: usize) -> Self {
        Self {
            components,
            num_nodes,
            dirichlet: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.num_nodes * self.components
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.components + component
    }

    /// Fixes every component of each listed node to `value`.
    pub fn fix_nodes(&mut self, nodes: &[usize], value: f64) -> Result<()> {
        for &n in nodes {
            if n >= self.num_nodes {
                return config_err(format!("node {n} outside mesh of {} nodes", self.num_nodes));
            }
            for c in 0..self.components {
                self.dirichlet.insert(self.dof(n, c), value);
            }
        }
        Ok(())
    }

    pub fn fix_dof(&mut self, dof: usize, value: f64) -> Result<()> {
        if dof >= self.dimension() {
            return config_err(format!("dof {dof} outside range 0..{}", self.dimension()));
        }
        self.dirichlet.insert(dof, value);
        Ok(())
    }
}
