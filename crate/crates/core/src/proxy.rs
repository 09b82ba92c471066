//! Discretized-attention proxies for the latent covariates.
//!
//! Each covariate vector is split into a top block of `⌈d/2⌉` coordinates and a
//! bottom block of `⌊d/2⌋` coordinates. Neighbour `j` of node `i` gets the binary
//! weight `w_ij,k = 1{z_i^(k)ᵀ z_j^(k) ≥ tau_screen}` for each block `k`. The top
//! block of the proxy averages `z_j^(1)` over neighbours passing the *bottom*
//! screen and vice versa, then rescales by `√d / t_n`:
//!
//! ```text
//! λ_i^(1) = (√d / t_n) Σ_j w_ij,2 z_j^(1) / Σ_j w_ij,2
//! λ_i^(2) = (√d / t_n) Σ_j w_ij,1 z_j^(2) / Σ_j w_ij,1
//! ```
//!
//! A block whose denominator is zero is set to the zero vector.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::matfile;
use crate::model::{DerivedParams, GraphSample};

/// Smallest graph for which proxies are computed from model parameters;
/// below this `t_n` is too close to zero for the `√d / t_n` rescaling.
pub const MIN_PROXY_NODES: usize = 8;

/// Screening threshold and rescaling divisor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenConfig {
    pub tau_screen: f64,
    pub t_n: f64,
}

impl ScreenConfig {
    pub fn new(tau_screen: f64, t_n: f64) -> Result<Self> {
        if !(t_n > 0.0 && t_n.is_finite()) {
            return Err(Error::InvalidParams(format!("t_n must be positive, got {t_n}")));
        }
        if !(tau_screen > 0.0 && tau_screen.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "screening threshold must be positive, got {tau_screen}"
            )));
        }
        Ok(ScreenConfig { tau_screen, t_n })
    }

    /// Uses the true `σ_x²` and `t_n` of the generating model.
    pub fn from_derived(derived: &DerivedParams, n: usize) -> Result<Self> {
        if n < MIN_PROXY_NODES {
            return Err(Error::InvalidParams(format!(
                "proxies need n >= {MIN_PROXY_NODES}, got {n}"
            )));
        }
        Self::new(derived.tau_screen, derived.t_n)
    }

    pub fn for_sample(sample: &GraphSample) -> Result<Self> {
        Self::from_derived(&sample.derived, sample.params.n)
    }

    /// `√d / t_n`.
    pub fn scale(&self, d: usize) -> f64 {
        (d as f64).sqrt() / self.t_n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Top `⌈d/2⌉` coordinates.
    First,
    /// Bottom `⌊d/2⌋` coordinates.
    Second,
}

/// Length of the top block.
pub fn split_point(d: usize) -> usize {
    d.div_ceil(2)
}

fn block_of(v: &[f64], block: Block) -> &[f64] {
    let h = split_point(v.len());
    match block {
        Block::First => &v[..h],
        Block::Second => &v[h..],
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w_ij,k`: whether the block-`k` dot product reaches the threshold (inclusive).
pub fn attention_weight(z_i: &[f64], z_j: &[f64], block: Block, cfg: &ScreenConfig) -> bool {
    dot(block_of(z_i, block), block_of(z_j, block)) >= cfg.tau_screen
}

/// Screened-neighbour counts of one node: the two proxy denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScreenCounts {
    /// `Σ_j w_ij,2`, the denominator of the top block.
    pub block2: u32,
    /// `Σ_j w_ij,1`, the denominator of the bottom block.
    pub block1: u32,
}

impl ScreenCounts {
    /// Zero-fallback flags for the (top, bottom) proxy blocks.
    pub fn fallback(&self) -> [bool; 2] {
        [self.block2 == 0, self.block1 == 0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeProxy {
    pub lambda: Vec<f64>,
    pub counts: ScreenCounts,
    pub fallback: [bool; 2],
}

/// Adds the screened contributions of `neighbors` into `sums`
/// (laid out like a covariate row) in the order given.
fn accumulate(
    z_i: &[f64],
    neighbors: &[u32],
    z: ArrayView2<'_, f64>,
    cfg: &ScreenConfig,
    sums: &mut [f64],
) -> ScreenCounts {
    let h = split_point(z_i.len());
    let (zi1, zi2) = z_i.split_at(h);
    let (s1, s2) = sums.split_at_mut(h);
    let mut counts = ScreenCounts::default();
    for &j in neighbors {
        let zj = z.row(j as usize);
        let zj = zj.as_slice().expect("row-major covariates");
        let (zj1, zj2) = zj.split_at(h);
        // cross-fitting: bottom-block screen selects the top-block average
        if dot(zi2, zj2) >= cfg.tau_screen {
            counts.block2 += 1;
            s1.iter_mut().zip(zj1).for_each(|(s, v)| *s += v);
        }
        if dot(zi1, zj1) >= cfg.tau_screen {
            counts.block1 += 1;
            s2.iter_mut().zip(zj2).for_each(|(s, v)| *s += v);
        }
    }
    counts
}

/// Turns block sums into the proxy row in place; returns the fallback flags.
fn finalize(sums: &mut [f64], counts: ScreenCounts, scale: f64) -> [bool; 2] {
    let h = split_point(sums.len());
    let (s1, s2) = sums.split_at_mut(h);
    for (block, c) in [(s1, counts.block2), (s2, counts.block1)] {
        if c == 0 {
            block.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let f = scale / c as f64;
            block.iter_mut().for_each(|v| *v *= f);
        }
    }
    counts.fallback()
}

/// Proxy of a node with observed covariate `z_i` and the given (sorted)
/// neighbour ids into `z`. The node itself need not be a row of `z`.
pub fn proxy_from_neighbors(
    z_i: &[f64],
    neighbors: &[u32],
    z: ArrayView2<'_, f64>,
    cfg: &ScreenConfig,
) -> NodeProxy {
    let mut lambda = vec![0.0; z_i.len()];
    let counts = accumulate(z_i, neighbors, z, cfg, &mut lambda);
    let fallback = finalize(&mut lambda, counts, cfg.scale(z_i.len()));
    NodeProxy {
        lambda,
        counts,
        fallback,
    }
}

/// Proxy `λ_i` of node `i`, summing neighbours in ascending id order.
pub fn compute_proxy(i: usize, adjacency: &Adjacency, z: ArrayView2<'_, f64>, cfg: &ScreenConfig) -> NodeProxy {
    let zi = z.row(i);
    proxy_from_neighbors(zi.as_slice().expect("row-major covariates"), adjacency.neighbors(i), z, cfg)
}

/// All proxies `Λ` stacked row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyMatrix {
    pub lambda: Array2<f64>,
    pub counts: Vec<ScreenCounts>,
    /// Per node, (top, bottom) zero-fallback flags.
    pub fallback: Vec<[bool; 2]>,
}

impl ProxyMatrix {
    pub fn n(&self) -> usize {
        self.lambda.nrows()
    }

    /// Number of `(node, block)` pairs that fell back to zero.
    pub fn fallback_blocks(&self) -> usize {
        self.fallback.iter().flatten().filter(|&&f| f).count()
    }

    /// Fraction of nodes with at least one fallback block.
    pub fn fallback_rate(&self) -> f64 {
        let hit = self.fallback.iter().filter(|f| f[0] || f[1]).count();
        hit as f64 / self.n().max(1) as f64
    }

    /// Ids of nodes with no fallback block.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !(self.fallback[i][0] || self.fallback[i][1])).collect()
    }

    /// CSV `node,count_block2,count_block1,fallback1,fallback2`.
    pub fn write_counts_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "count_block2", "count_block1", "fallback1", "fallback2"])?;
        for (i, (c, f)) in self.counts.iter().zip(&self.fallback).enumerate() {
            w.write_record([
                i.to_string(),
                c.block2.to_string(),
                c.block1.to_string(),
                u8::from(f[0]).to_string(),
                u8::from(f[1]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_lambda(&self, path: &Path) -> Result<()> {
        matfile::save_matrix(path, self.lambda.view())
    }
}

/// Runs the proxy construction for every node of `(adjacency, z)`.
/// Rows are computed independently and match [`compute_proxy`] bit for bit.
pub fn compute_proxies(adjacency: &Adjacency, z: ArrayView2<'_, f64>, cfg: &ScreenConfig) -> ProxyMatrix {
    let sums = ScreenedSums::compute(adjacency, z, cfg);
    sums.finish(cfg)
}

pub fn compute_all_proxies(sample: &GraphSample, cfg: &ScreenConfig) -> ProxyMatrix {
    compute_proxies(&sample.adjacency, sample.observed.view(), cfg)
}

/// Un-normalised block sums and counts for every node. Keeping them lets a
/// caller delete nodes from the graph and update the affected proxies by
/// subtraction instead of recomputing every neighbourhood.
#[derive(Debug, Clone)]
pub(crate) struct ScreenedSums {
    sums: Array2<f64>,
    counts: Vec<ScreenCounts>,
}

impl ScreenedSums {
    pub(crate) fn compute(adjacency: &Adjacency, z: ArrayView2<'_, f64>, cfg: &ScreenConfig) -> Self {
        let (n, d) = z.dim();
        let mut sums = Array2::zeros((n, d));
        let counts: Vec<ScreenCounts> = sums
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .map(|(i, mut row)| {
                let zi = z.row(i);
                accumulate(
                    zi.as_slice().expect("row-major covariates"),
                    adjacency.neighbors(i),
                    z,
                    cfg,
                    row.as_slice_mut().expect("contiguous row"),
                )
            })
            .collect();
        ScreenedSums { sums, counts }
    }

    pub(crate) fn finish(mut self, cfg: &ScreenConfig) -> ProxyMatrix {
        let scale = cfg.scale(self.sums.ncols());
        let counts = self.counts;
        let fallback: Vec<[bool; 2]> = self
            .sums
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(counts.par_iter())
            .map(|(mut row, &c)| finalize(row.as_slice_mut().unwrap(), c, scale))
            .collect();
        ProxyMatrix {
            lambda: self.sums,
            counts,
            fallback,
        }
    }

    /// Proxies of the graph induced by deleting `removed` (sorted, unique ids).
    /// Returns the proxy matrix of the kept nodes in ascending id order, and
    /// those ids. Equal to a fresh computation on the induced subgraph up to
    /// floating-point rounding.
    pub(crate) fn without(
        &self,
        removed: &[u32],
        adjacency: &Adjacency,
        z: ArrayView2<'_, f64>,
        cfg: &ScreenConfig,
    ) -> (ProxyMatrix, Vec<usize>) {
        let n = self.sums.nrows();
        let h = split_point(z.ncols());
        let mut gone = vec![false; n];
        for &r in removed {
            gone[r as usize] = true;
        }
        let mut sums = self.sums.clone();
        let mut counts = self.counts.clone();
        for &r in removed {
            let zr = z.row(r as usize);
            let zr = zr.as_slice().expect("row-major covariates");
            let (zr1, zr2) = zr.split_at(h);
            for &i in adjacency.neighbors(r as usize) {
                let i = i as usize;
                if gone[i] {
                    continue;
                }
                let zi = z.row(i);
                let (zi1, zi2) = zi.as_slice().unwrap().split_at(h);
                let mut row = sums.row_mut(i);
                let (s1, s2) = row.as_slice_mut().unwrap().split_at_mut(h);
                if dot(zi2, zr2) >= cfg.tau_screen {
                    counts[i].block2 -= 1;
                    s1.iter_mut().zip(zr1).for_each(|(s, v)| *s -= v);
                }
                if dot(zi1, zr1) >= cfg.tau_screen {
                    counts[i].block1 -= 1;
                    s2.iter_mut().zip(zr2).for_each(|(s, v)| *s -= v);
                }
            }
        }
        let kept: Vec<usize> = (0..n).filter(|&i| !gone[i]).collect();
        let sub = ScreenedSums {
            sums: sums.select(Axis(0), &kept),
            counts: kept.iter().map(|&i| counts[i]).collect(),
        };
        (sub.finish(cfg), kept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::assemble_graph;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn cfg(tau: f64, t_n: f64) -> ScreenConfig {
        ScreenConfig::new(tau, t_n).unwrap()
    }

    #[test]
    fn boundary_is_inclusive() {
        // block norm² equals the threshold exactly
        let z = [1.0, 1.0, 3.0, 0.0];
        let c = cfg(2.0, 1.0);
        assert!(attention_weight(&z, &z, Block::First, &c));
        assert!(!attention_weight(&z, &[1.0, 0.99, 3.0, 0.0], Block::First, &c));
    }

    #[test]
    fn orthogonal_blocks_fail_screen() {
        let c = cfg(0.5, 1.0);
        assert!(!attention_weight(&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0], Block::First, &c));
        assert!(!attention_weight(&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0], Block::Second, &c));
    }

    #[test]
    fn weights_match_scalar_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let c = cfg(0.8, 1.0);
        for _ in 0..10_000 {
            let d = rng.random_range(1..9);
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let h = (d + 1) / 2;
            let mut top = 0.0;
            for k in 0..h {
                top += a[k] * b[k];
            }
            let mut bottom = 0.0;
            for k in h..d {
                bottom += a[k] * b[k];
            }
            assert_eq!(attention_weight(&a, &b, Block::First, &c), top >= 0.8);
            assert_eq!(attention_weight(&a, &b, Block::Second, &c), bottom >= 0.8);
        }
    }

    #[test]
    fn odd_dimension_split() {
        assert_eq!(split_point(5), 3);
        assert_eq!(split_point(4), 2);
        assert_eq!(split_point(1), 1);
    }

    #[test]
    fn isolated_node_falls_back_to_zero() {
        let adj = assemble_graph(&[], &[], 3);
        let z = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let p = compute_proxy(0, &adj, z.view(), &cfg(1.0, 2.0));
        assert_eq!(p.lambda, vec![0.0, 0.0]);
        assert_eq!(p.fallback, [true, true]);
    }

    #[test]
    fn single_neighbour_passing_both_screens() {
        let adj = assemble_graph(&[(0, 1)], &[], 2);
        let z = array![[1.0, 2.0, 1.0, 1.0], [2.0, 1.0, 1.5, 2.0]];
        let c = cfg(1.0, 1.7);
        let p = compute_proxy(0, &adj, z.view(), &c);
        let s = 2.0 / 1.7;
        let want = [s * 2.0, s * 1.0, s * 1.5, s * 2.0];
        for (g, w) in p.lambda.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        assert_eq!(p.counts, ScreenCounts { block2: 1, block1: 1 });
    }

    #[test]
    fn two_neighbours_cross_screens() {
        // j1 = 1 passes only the bottom screen (feeds the top block),
        // j2 = 2 passes only the top screen (feeds the bottom block).
        let adj = assemble_graph(&[(0, 1)], &[(0, 2)], 3);
        let z = array![
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 3.0, 2.0, 5.0],
            [2.0, 7.0, 0.0, -4.0]
        ];
        let c = cfg(1.5, 0.9);
        let p = compute_proxy(0, &adj, z.view(), &c);
        let s = 2.0 / 0.9;
        let want = [0.0, s * 3.0, 0.0, s * -4.0];
        for (g, w) in p.lambda.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{:?}", p.lambda);
        }
        assert_eq!(p.fallback, [false, false]);
    }

    #[test]
    fn path_graph_rows_match_per_node() {
        let adj = assemble_graph(&[(0, 1), (1, 2)], &[], 3);
        let z = array![[1.0, 1.0, 1.0], [2.0, 0.5, 1.0], [1.0, 2.0, 3.0]];
        let c = cfg(0.5, 1.3);
        let all = compute_proxies(&adj, z.view(), &c);
        for i in 0..3 {
            let p = compute_proxy(i, &adj, z.view(), &c);
            assert_eq!(all.lambda.row(i).to_vec(), p.lambda);
            assert_eq!(all.counts[i], p.counts);
            assert_eq!(all.fallback[i], p.fallback);
        }
    }

    #[test]
    fn counts_csv_layout() {
        let adj = assemble_graph(&[(0, 1)], &[], 3);
        let z = array![[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]];
        let all = compute_proxies(&adj, z.view(), &cfg(0.5, 1.0));
        let mut out = Vec::new();
        all.write_counts_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "node,count_block2,count_block1,fallback1,fallback2\n0,1,1,0,0\n1,1,1,0,0\n2,0,0,1,1\n"
        );
        assert_eq!(all.fallback_blocks(), 2);
    }

    #[test]
    fn rejects_tiny_graphs_and_bad_thresholds() {
        let derived = DerivedParams {
            t_n: 1.0,
            p_n: 0.1,
            tau: 2.0,
            tau_screen: 1.0,
        };
        assert!(ScreenConfig::from_derived(&derived, 7).is_err());
        assert!(ScreenConfig::from_derived(&derived, 8).is_ok());
        assert!(ScreenConfig::new(1.0, 0.0).is_err());
        assert!(ScreenConfig::new(0.0, 1.0).is_err());
    }
}
