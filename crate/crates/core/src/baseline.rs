//! Mean-aggregation message passing without attention.
//!
//! Layer `ℓ` maps `ξ^(ℓ)` to
//! `ξ_i^(ℓ+1) = ψ(c ξ_i^(ℓ) + (1 − c) mean_{j ∈ N_i} ξ_j^(ℓ))` with `ξ^(0) = Z`,
//! i.e. the self and neighbour matrices are `cI` and `(1 − c)I`. An isolated
//! node's neighbour mean is the zero vector. A linear readout fitted by least
//! squares maps `ξ^(L)` to the response.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::predict::PredictionTask;
use crate::regress::ols;

/// Coordinatewise odd, 1-Lipschitz activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub layers: usize,
    /// `c` in `c ξ_i + (1 − c) mean_j ξ_j`.
    pub self_weight: f64,
    pub activation: Activation,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            layers: 2,
            self_weight: 0.5,
            activation: Activation::Identity,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.self_weight) {
            return Err(Error::InvalidConfig(format!(
                "self weight must lie in [0, 1], got {}",
                self.self_weight
            )));
        }
        Ok(())
    }

    #[inline]
    fn mix(&self, own: f64, neighbor_mean: f64) -> f64 {
        self.activation
            .apply(self.self_weight * own + (1.0 - self.self_weight) * neighbor_mean)
    }
}

/// Sums `rows[j]` over the neighbours of `i` into `out` (ascending id order).
fn neighbor_sum(i: usize, adjacency: &Adjacency, rows: ArrayView2<'_, f64>, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &j in adjacency.neighbors(i) {
        let r = rows.row(j as usize);
        out.iter_mut().zip(r.iter()).for_each(|(o, v)| *o += v);
    }
}

/// One propagation step. Returns the next features and the neighbour sums used.
fn layer_with_sums(
    prev: ArrayView2<'_, f64>,
    adjacency: &Adjacency,
    cfg: &GcnConfig,
) -> (Array2<f64>, Array2<f64>) {
    let mut sums = Array2::zeros(prev.dim());
    sums.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut s)| neighbor_sum(i, adjacency, prev, s.as_slice_mut().unwrap()));
    let mut next = Array2::zeros(prev.dim());
    next.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let deg = adjacency.degree(i);
            for ((o, &own), &s) in row.iter_mut().zip(prev.row(i)).zip(sums.row(i)) {
                let mean = if deg == 0 { 0.0 } else { s / deg as f64 };
                *o = cfg.mix(own, mean);
            }
        });
    (next, sums)
}

/// `ξ^(L)` for every node.
pub fn gcn_features(z: ArrayView2<'_, f64>, adjacency: &Adjacency, cfg: &GcnConfig) -> Array2<f64> {
    let mut cur = z.to_owned();
    for _ in 0..cfg.layers {
        cur = layer_with_sums(cur.view(), adjacency, cfg).0;
    }
    cur
}

/// A fitted linear readout on top of `ξ^(L)`, without intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub config: GcnConfig,
    pub readout: Vec<f64>,
    pub train_rows: usize,
    pub gram_condition: f64,
}

impl GcnModel {
    /// Least-squares readout over the `labeled` rows of `features`.
    pub fn fit(
        config: GcnConfig,
        features: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        labeled: &[usize],
    ) -> Result<Self> {
        let design = features.select(Axis(0), labeled);
        let targets: Array1<f64> = labeled.iter().map(|&i| y[i]).collect();
        let fit = ols(design.view(), targets.view())?;
        Ok(GcnModel {
            config,
            readout: fit.beta_hat,
            train_rows: labeled.len(),
            gram_condition: fit.gram_condition,
        })
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.readout.iter().zip(features).map(|(a, b)| a * b).sum()
    }
}

/// Propagates over all nodes of the task graph, fits the readout on the labelled
/// nodes and predicts the target.
pub fn gcn_fit_predict(task: &PredictionTask, cfg: &GcnConfig) -> Result<f64> {
    cfg.validate()?;
    let labeled = task.labeled_nodes();
    let d = task.graph.d();
    if labeled.len() < 4 * d {
        return Err(Error::InvalidParams(format!(
            "readout needs at least {} labelled nodes, got {}",
            4 * d,
            labeled.len()
        )));
    }
    let features = gcn_features(task.graph.observed.view(), &task.graph.adjacency, cfg);
    let model = GcnModel::fit(*cfg, features.view(), task.graph.responses.view(), &labeled)?;
    Ok(model.predict(features.row(task.target).as_slice().unwrap()))
}

/// Layer-by-layer features and neighbour sums of a base graph, used to compute
/// the exact features of one extra node attached to it without re-propagating
/// the whole graph.
#[derive(Debug, Clone)]
pub(crate) struct GcnPropagation {
    cfg: GcnConfig,
    /// `features[ℓ]` is `ξ^(ℓ)`, for `ℓ = 0..=layers`.
    features: Vec<Array2<f64>>,
    /// `sums[ℓ][i] = Σ_{j ∈ N_i} ξ_j^(ℓ)`, for `ℓ < layers`.
    sums: Vec<Array2<f64>>,
}

impl GcnPropagation {
    pub(crate) fn new(z: ArrayView2<'_, f64>, adjacency: &Adjacency, cfg: &GcnConfig) -> Self {
        let mut features = vec![z.to_owned()];
        let mut sums = Vec::with_capacity(cfg.layers);
        for _ in 0..cfg.layers {
            let (next, s) = layer_with_sums(features.last().unwrap().view(), adjacency, cfg);
            sums.push(s);
            features.push(next);
        }
        GcnPropagation {
            cfg: *cfg,
            features,
            sums,
        }
    }

    pub(crate) fn features(&self, depth: usize) -> ArrayView2<'_, f64> {
        self.features[depth].view()
    }

    /// `ξ_new^(ℓ)` for `ℓ = 0..=layers` of a node with covariate `z_new`
    /// attached to the sorted base nodes `attach`, computed exactly on the
    /// enlarged graph.
    ///
    /// Attaching the node changes the layer-`ℓ` features of base nodes within
    /// distance `ℓ` of it; only those within distance `layers − ℓ` matter for
    /// the new node's final features, so each layer touches at most
    /// `min(ℓ, layers − ℓ)` hops.
    pub(crate) fn attached_features(&self, z_new: &[f64], attach: &[u32], adjacency: &Adjacency) -> Vec<Vec<f64>> {
        let n = adjacency.num_nodes();
        let d = z_new.len();
        let layers = self.cfg.layers;

        // hop distance from the new node, capped at `layers`
        let mut dist = vec![u32::MAX; n];
        let mut frontier: Vec<u32> = attach.to_vec();
        for &j in attach {
            dist[j as usize] = 1;
        }
        for hop in 2..=layers as u32 {
            let mut next = Vec::new();
            for &k in &frontier {
                for &j in adjacency.neighbors(k as usize) {
                    if dist[j as usize] == u32::MAX {
                        dist[j as usize] = hop;
                        next.push(j);
                    }
                }
            }
            next.sort_unstable();
            frontier = next;
        }

        let mut is_attached = vec![false; n];
        for &j in attach {
            is_attached[j as usize] = true;
        }

        let mut out = vec![z_new.to_vec()];
        // base nodes whose current-layer feature differs from the base graph
        let mut changed: Vec<(u32, Vec<f64>)> = Vec::new();
        let mut slot = vec![u32::MAX; n];
        for layer in 0..layers {
            let prev = self.features[layer].view();
            let new_prev = out.last().unwrap().clone();
            let reach = (layer + 1).min(layers - layer - 1) as u32;

            // targets: base nodes within `reach` hops whose value can change
            let mut targets: Vec<u32> = Vec::new();
            if reach >= 1 {
                for &j in attach {
                    targets.push(j);
                }
                for (k, _) in &changed {
                    for &j in adjacency.neighbors(*k as usize) {
                        if dist[j as usize] <= reach {
                            targets.push(j);
                        }
                    }
                }
                targets.sort_unstable();
                targets.dedup();
                targets.retain(|&j| dist[j as usize] <= reach);
            }
            for (s, &j) in targets.iter().enumerate() {
                slot[j as usize] = s as u32;
            }

            let mut delta = vec![vec![0.0; d]; targets.len()];
            for (k, value) in &changed {
                let base = prev.row(*k as usize);
                for &j in adjacency.neighbors(*k as usize) {
                    let s = slot[j as usize];
                    if s != u32::MAX {
                        for ((acc, v), b) in delta[s as usize].iter_mut().zip(value).zip(base.iter()) {
                            *acc += v - b;
                        }
                    }
                }
            }
            let changed_value = |k: u32| changed.binary_search_by_key(&k, |(id, _)| *id).ok().map(|p| &changed[p].1);

            let mut next_changed = Vec::with_capacity(targets.len());
            for (s, &j) in targets.iter().enumerate() {
                let ji = j as usize;
                let own: Vec<f64> = match changed_value(j) {
                    Some(v) => v.clone(),
                    None => prev.row(ji).to_vec(),
                };
                let mut deg = adjacency.degree(ji);
                let mut sum: Vec<f64> = self.sums[layer].row(ji).iter().zip(&delta[s]).map(|(a, b)| a + b).collect();
                if is_attached[ji] {
                    deg += 1;
                    sum.iter_mut().zip(&new_prev).for_each(|(a, b)| *a += b);
                }
                let value: Vec<f64> = own
                    .iter()
                    .zip(&sum)
                    .map(|(&o, &t)| self.cfg.mix(o, t / deg as f64))
                    .collect();
                next_changed.push((j, value));
            }
            for &j in &targets {
                slot[j as usize] = u32::MAX;
            }

            // the new node itself
            let mut sum = vec![0.0; d];
            for &j in attach {
                let v: &[f64] = match changed_value(j) {
                    Some(v) => v,
                    None => prev.row(j as usize).to_slice_or_panic(),
                };
                sum.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            let deg = attach.len();
            let new_value: Vec<f64> = new_prev
                .iter()
                .zip(&sum)
                .map(|(&o, &t)| self.cfg.mix(o, if deg == 0 { 0.0 } else { t / deg as f64 }))
                .collect();
            out.push(new_value);
            changed = next_changed;
        }
        out
    }
}

trait RowSlice<'a> {
    fn to_slice_or_panic(self) -> &'a [f64];
}

impl<'a> RowSlice<'a> for ArrayView1<'a, f64> {
    fn to_slice_or_panic(self) -> &'a [f64] {
        self.to_slice().expect("row-major features")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::assemble_graph;
    use ndarray::array;

    fn cfg(layers: usize, self_weight: f64, activation: Activation) -> GcnConfig {
        GcnConfig {
            layers,
            self_weight,
            activation,
        }
    }

    #[test]
    fn zero_layers_is_identity() {
        let z = array![[1.0, -2.0], [0.5, 3.0]];
        let adj = assemble_graph(&[(0, 1)], &[], 2);
        assert_eq!(gcn_features(z.view(), &adj, &cfg(0, 0.3, Activation::Tanh)), z);
    }

    #[test]
    fn complete_graph_neighbor_mean() {
        let n = 5;
        let edges: Vec<_> = (0..n as u32).flat_map(|i| (i + 1..n as u32).map(move |j| (i, j))).collect();
        let adj = assemble_graph(&edges, &[], n);
        let z = Array2::from_shape_fn((n, 2), |(i, j)| (i * 3 + j) as f64);
        let out = gcn_features(z.view(), &adj, &cfg(1, 0.0, Activation::Identity));
        let total: Vec<f64> = (0..2).map(|j| z.column(j).sum()).collect();
        for i in 0..n {
            for j in 0..2 {
                let want = (total[j] - z[(i, j)]) / 4.0;
                assert!((out[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn star_center_mixes_self_and_leaves() {
        let adj = assemble_graph(&[(0, 1), (0, 2), (0, 3), (0, 4)], &[], 5);
        let z = array![[1.0, 0.0], [2.0, 4.0], [0.0, -1.0], [3.0, 1.0], [-1.0, 2.0]];
        let out = gcn_features(z.view(), &adj, &cfg(1, 0.5, Activation::Identity));
        assert!((out[(0, 0)] - (0.5 * 1.0 + 0.5 * 1.0)).abs() < 1e-15);
        assert!((out[(0, 1)] - (0.5 * 0.0 + 0.5 * 1.5)).abs() < 1e-15);
        // leaf 1 has the centre as its only neighbour
        assert!((out[(1, 0)] - (0.5 * 2.0 + 0.5 * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_uses_zero_mean() {
        let adj = assemble_graph(&[], &[], 2);
        let z = array![[2.0, -4.0], [1.0, 1.0]];
        let out = gcn_features(z.view(), &adj, &cfg(2, 0.5, Activation::Identity));
        assert_eq!(out.row(0).to_vec(), vec![0.5, -1.0]);
    }

    #[test]
    fn odd_activations_commute_with_negation() {
        let adj = assemble_graph(&[(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)], &[], 4);
        let z = array![[0.3, -1.2], [2.0, 0.1], [-0.7, 0.9], [1.5, -2.5]];
        for act in [Activation::Identity, Activation::Tanh] {
            let c = cfg(3, 0.4, act);
            let pos = gcn_features(z.view(), &adj, &c);
            let neg = gcn_features((-&z).view(), &adj, &c);
            assert_eq!(neg, -pos);
        }
    }

    #[test]
    fn rejects_bad_self_weight() {
        assert!(cfg(1, 1.5, Activation::Identity).validate().is_err());
        assert!("relu".parse::<Activation>().is_err());
        assert_eq!("tanh".parse::<Activation>().unwrap(), Activation::Tanh);
    }

    #[test]
    fn attached_features_match_full_recompute() {
        // base graph on 7 nodes plus node 7 attached to {1, 4, 5}
        let base_edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (1, 5), (2, 6)];
        let attach = [1u32, 4, 5];
        let base = assemble_graph(&base_edges, &[], 7);
        let mut all: Vec<(u32, u32)> = base_edges.to_vec();
        all.extend(attach.iter().map(|&j| (j, 7)));
        let full = assemble_graph(&all, &[], 8);
        let z = Array2::from_shape_fn((8, 3), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64);
        let z_base = z.slice(ndarray::s![..7, ..]);
        for act in [Activation::Identity, Activation::Tanh] {
            for layers in 0..5 {
                let c = cfg(layers, 0.3, act);
                let prop = GcnPropagation::new(z_base, &base, &c);
                let got = prop.attached_features(z.row(7).as_slice().unwrap(), &attach, &base);
                for depth in 0..=layers {
                    let want = gcn_features(z.view(), &full, &cfg(depth, 0.3, act));
                    for (g, w) in got[depth].iter().zip(want.row(7)) {
                        assert!((g - w).abs() < 1e-12, "depth {depth} of {layers}: {g} vs {w}");
                    }
                }
            }
        }
    }
}
