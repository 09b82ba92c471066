//! Prediction of an unlabelled node's response.
//!
//! The new node's proxy is computed on the full graph. The coefficients are
//! fitted by proxy regression on the subgraph induced by the labelled nodes
//! outside its neighbourhood, so the fit never sees the new node's neighbours
//! and the prediction `λ_{n+1}ᵀ β̂` is conditionally unbiased.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::baseline::{GcnConfig, GcnModel, GcnPropagation};
use crate::error::{Error, Result};
use crate::graph::{assemble_graph, Edge, EdgeKind};
use crate::model::{bernoulli_positions, dot, gaussian_vector, GraphSample, ModelParams};
use crate::proxy::{compute_all_proxies, compute_proxy, proxy_from_neighbors, ScreenConfig, ScreenedSums};
use crate::regress::ols;
use crate::rng::{stream, Purpose};
use crate::stats;

/// A graph over `n + 1` nodes whose node `target` is unlabelled.
///
/// The target's entry of `graph.responses` is NaN; its true response, when
/// known, is kept aside for scoring.
#[derive(Debug, Clone)]
pub struct PredictionTask {
    pub graph: GraphSample,
    pub target: usize,
    pub withheld_response: Option<f64>,
}

impl PredictionTask {
    /// Hides the response of `target` in `graph`.
    pub fn new(mut graph: GraphSample, target: usize) -> Result<Self> {
        if target >= graph.n() {
            return Err(Error::InvalidParams(format!(
                "target {target} outside a graph of {} nodes",
                graph.n()
            )));
        }
        let y = graph.responses[target];
        graph.responses[target] = f64::NAN;
        Ok(PredictionTask {
            graph,
            target,
            withheld_response: y.is_finite().then_some(y),
        })
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.graph.n()).filter(|&i| i != self.target).collect()
    }
}

/// A subgraph with ids `0..m` and the parent id of each node.
#[derive(Debug, Clone)]
pub struct InducedSubgraph {
    pub sample: GraphSample,
    pub original_ids: Vec<usize>,
}

/// The subgraph induced by `keep` (any order, duplicates ignored), with nodes
/// renumbered in ascending parent-id order. The generating parameters of the
/// parent (thresholds included) carry over; only `params.n` changes.
pub fn induced_subgraph(sample: &GraphSample, keep: &[usize]) -> Result<InducedSubgraph> {
    let n = sample.n();
    let mut ids = keep.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidParams(format!("node {bad} outside a graph of {n} nodes")));
    }
    let required = 4 * sample.d();
    if ids.len() < required {
        return Err(Error::EmptySubgraph {
            kept: ids.len(),
            required,
        });
    }
    let mut remap = vec![u32::MAX; n];
    for (new, &old) in ids.iter().enumerate() {
        remap[old] = new as u32;
    }
    let restrict = |edges: &[Edge]| -> Vec<Edge> {
        edges
            .iter()
            .filter_map(|&(i, j)| {
                let (a, b) = (remap[i as usize], remap[j as usize]);
                (a != u32::MAX && b != u32::MAX).then_some((a, b))
            })
            .collect()
    };
    let edges_geo = restrict(&sample.edges_geo);
    let edges_er = restrict(&sample.edges_er);
    let adjacency = assemble_graph(&edges_geo, &edges_er, ids.len());
    let rows = |m: &Array2<f64>| m.select(Axis(0), &ids);
    let entries = |v: &Array1<f64>| ids.iter().map(|&i| v[i]).collect::<Array1<f64>>();
    let params = ModelParams {
        n: ids.len(),
        ..sample.params.clone()
    };
    Ok(InducedSubgraph {
        sample: GraphSample {
            params,
            derived: sample.derived,
            latent: rows(&sample.latent),
            noise: rows(&sample.noise),
            observed: rows(&sample.observed),
            responses: entries(&sample.responses),
            response_noise: entries(&sample.response_noise),
            edges_geo,
            edges_er,
            adjacency,
        },
        original_ids: ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    /// `|N_{n+1}|`
    pub neighborhood_size: usize,
    /// (top, bottom) zero-fallback flags of `λ_{n+1}`.
    pub fallback: [bool; 2],
    /// Nodes in the subgraph the coefficients were fitted on.
    pub kept_nodes: usize,
    pub lambda: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub squared_error: Option<f64>,
}

/// `β̂_{λ,−(n+1)}`: proxy regression on the subgraph induced by the labelled
/// nodes outside the target's neighbourhood. Reads no covariate or response of
/// the target or its neighbours.
pub fn holdout_coefficients(task: &PredictionTask, cfg: &ScreenConfig) -> Result<(Vec<f64>, usize)> {
    let adj = &task.graph.adjacency;
    let mut excluded = vec![false; task.graph.n()];
    excluded[task.target] = true;
    for &j in adj.neighbors(task.target) {
        excluded[j as usize] = true;
    }
    let keep: Vec<usize> = (0..task.graph.n()).filter(|&i| !excluded[i]).collect();
    let sub = induced_subgraph(&task.graph, &keep)?;
    let proxies = compute_all_proxies(&sub.sample, cfg);
    let fit = ols(proxies.lambda.view(), sub.sample.responses.view())?;
    Ok((fit.beta_hat, keep.len()))
}

/// Predicts the target's response as `λ_{n+1}ᵀ β̂_{λ,−(n+1)}`.
///
/// A target whose screened neighbourhood is empty gets a zero proxy block; an
/// isolated target is predicted as 0.
pub fn predict_unlabeled(task: &PredictionTask, cfg: &ScreenConfig) -> Result<(f64, PredictionReport)> {
    let node = compute_proxy(task.target, &task.graph.adjacency, task.graph.observed.view(), cfg);
    let (beta_hat, kept_nodes) = holdout_coefficients(task, cfg)?;
    let y_hat = predict_with(&node.lambda, &beta_hat);
    let report = PredictionReport {
        neighborhood_size: task.graph.adjacency.degree(task.target),
        fallback: node.fallback,
        kept_nodes,
        lambda: node.lambda,
        beta_hat,
        squared_error: task.withheld_response.map(|y| (y - y_hat).powi(2)),
    };
    Ok((y_hat, report))
}

pub fn predict_with(lambda: &[f64], beta_hat: &[f64]) -> f64 {
    dot(lambda, beta_hat)
}

/// A fresh node drawn from the model and attached to a base sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutNode {
    pub latent: Vec<f64>,
    pub noise: Vec<f64>,
    pub observed: Vec<f64>,
    pub response_noise: f64,
    pub response: f64,
    /// Sorted base-node neighbours with the edge set(s) that produced them.
    pub neighbors: Vec<(u32, EdgeKind)>,
}

impl HoldoutNode {
    /// Holdout `k` of a base sample, from the sample seed's holdout streams.
    pub fn sample(base: &GraphSample, k: u64) -> Self {
        let p = &base.params;
        let seed = p.seed;
        let latent = gaussian_vector(p.d, p.sigma_x2, &mut stream(seed, Purpose::HoldoutLatent, k));
        let noise = gaussian_vector(p.d, p.sigma_eta2, &mut stream(seed, Purpose::HoldoutNoise, k));
        let observed: Vec<f64> = latent.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let response_noise = gaussian_vector(1, p.sigma_eps2, &mut stream(seed, Purpose::HoldoutResponse, k))[0];
        let response = dot(&latent, &p.beta) + response_noise;

        let n = base.n();
        let geo: Vec<u32> = (0..n)
            .filter(|&j| dot(base.latent.row(j).as_slice().unwrap(), &latent) >= base.derived.tau)
            .map(|j| j as u32)
            .collect();
        let er: Vec<u32> = bernoulli_positions(
            0,
            n as u64,
            base.derived.p_n,
            &mut stream(seed, Purpose::HoldoutEr, k),
        )
        .into_iter()
        .map(|j| j as u32)
        .collect();
        let neighbors = merge_kinds(&geo, &er);
        HoldoutNode {
            latent,
            noise,
            observed,
            response_noise,
            response,
            neighbors,
        }
    }

    pub fn neighbor_ids(&self) -> Vec<u32> {
        self.neighbors.iter().map(|&(j, _)| j).collect()
    }
}

fn merge_kinds(geo: &[u32], er: &[u32]) -> Vec<(u32, EdgeKind)> {
    let mut out = Vec::with_capacity(geo.len() + er.len());
    let (mut a, mut b) = (0, 0);
    while a < geo.len() || b < er.len() {
        match (geo.get(a), er.get(b)) {
            (Some(&g), Some(&e)) if g == e => {
                out.push((g, EdgeKind::Both));
                a += 1;
                b += 1;
            }
            (Some(&g), Some(&e)) if g < e => {
                out.push((g, EdgeKind::Geometric));
                a += 1;
            }
            (Some(&g), None) => {
                out.push((g, EdgeKind::Geometric));
                a += 1;
            }
            (_, Some(&e)) => {
                out.push((e, EdgeKind::ErdosRenyi));
                b += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// The `(n + 1)`-node task obtained by appending `holdout` as node `n`. The
/// thresholds of the base sample are kept.
pub fn append_holdout(base: &GraphSample, holdout: &HoldoutNode) -> Result<PredictionTask> {
    let n = base.n();
    let d = base.d();
    let push_row = |m: &Array2<f64>, row: &[f64]| -> Array2<f64> {
        let mut out = m.clone();
        out.push_row(ArrayView1::from(row)).expect("matching width");
        out
    };
    let latent = push_row(&base.latent, &holdout.latent);
    let noise = push_row(&base.noise, &holdout.noise);
    let observed = push_row(&base.observed, &holdout.observed);
    if holdout.latent.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "holdout has dimension {}, base {d}",
            holdout.latent.len()
        )));
    }
    let mut responses = base.responses.to_vec();
    responses.push(holdout.response);
    let mut response_noise = base.response_noise.to_vec();
    response_noise.push(holdout.response_noise);

    let new = n as u32;
    let mut edges_geo = base.edges_geo.clone();
    let mut edges_er = base.edges_er.clone();
    for &(j, kind) in &holdout.neighbors {
        if kind.is_geometric() {
            edges_geo.push((j, new));
        }
        if kind.is_er() {
            edges_er.push((j, new));
        }
    }
    edges_geo.sort_unstable();
    edges_er.sort_unstable();
    let adjacency = assemble_graph(&edges_geo, &edges_er, n + 1);
    let graph = GraphSample {
        params: ModelParams {
            n: n + 1,
            ..base.params.clone()
        },
        derived: base.derived,
        latent,
        noise,
        observed,
        responses: Array1::from(responses),
        response_noise: Array1::from(response_noise),
        edges_geo,
        edges_er,
        adjacency,
    };
    PredictionTask::new(graph, n)
}

/// Mean squared error with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MseEstimate {
    pub fn from_errors(errors: &[f64]) -> Self {
        MseEstimate {
            mean: stats::mean(errors),
            stderr: stats::std_err(errors),
            count: errors.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutOutcome {
    pub response: f64,
    pub attention: f64,
    /// Baseline predictions at depth `0..=layers`.
    pub gcn: Vec<f64>,
    pub neighborhood_size: usize,
    pub fallback: [bool; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseSummary {
    pub attention: MseEstimate,
    /// Baseline MSE at depth `0..=layers`; depth 0 is naive regression on `Z`.
    pub gcn: Vec<MseEstimate>,
    /// Fraction of holdouts with at least one zero proxy block.
    pub fallback_rate: f64,
    pub mean_neighborhood: f64,
    pub outcomes: Vec<HoldoutOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Screening thresholds; derived from the base sample when `None`.
    pub screen: Option<ScreenConfig>,
    /// Baseline evaluated at every depth up to `gcn.layers`; skipped when `None`.
    pub gcn: Option<GcnConfig>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            screen: None,
            gcn: Some(GcnConfig::default()),
        }
    }
}

/// Monte-Carlo prediction error on one base sample drawn from `params`.
///
/// Holdout `k` is a fresh node attached to the base graph with its own edges;
/// holdouts never see each other. For each, the attention predictor refits
/// `β̂` on the base graph minus the holdout's neighbourhood. The baseline's
/// readout is fitted once per depth on the base graph, where every node is
/// labelled, and applied to the holdout's exact propagated features.
pub fn evaluate_prediction_mse(params: &ModelParams, n_holdout: usize, options: &EvalOptions) -> Result<MseSummary> {
    let base = GraphSample::generate(params)?;
    evaluate_on_base(&base, n_holdout, options)
}

pub fn evaluate_on_base(base: &GraphSample, n_holdout: usize, options: &EvalOptions) -> Result<MseSummary> {
    if n_holdout == 0 {
        return Err(Error::InvalidParams("need at least one holdout".into()));
    }
    let cfg = match options.screen {
        Some(c) => c,
        None => ScreenConfig::for_sample(base)?,
    };
    let z = base.observed.view();
    let adj = &base.adjacency;
    let sums = ScreenedSums::compute(adj, z, &cfg);

    let gcn = match &options.gcn {
        Some(g) => {
            g.validate()?;
            let prop = GcnPropagation::new(z, adj, g);
            let all: Vec<usize> = (0..base.n()).collect();
            let models = (0..=g.layers)
                .map(|depth| {
                    let c = GcnConfig { layers: depth, ..*g };
                    GcnModel::fit(c, prop.features(depth), base.responses.view(), &all)
                })
                .collect::<Result<Vec<_>>>()?;
            Some((prop, models))
        }
        None => None,
    };

    let outcomes: Vec<HoldoutOutcome> = (0..n_holdout as u64)
        .into_par_iter()
        .map(|k| {
            let h = HoldoutNode::sample(base, k);
            let attach = h.neighbor_ids();
            let node = proxy_from_neighbors(&h.observed, &attach, z, &cfg);
            let beta_hat = subgraph_coefficients(base, &sums, &attach, &cfg)?;
            let gcn = match &gcn {
                Some((prop, models)) => {
                    let feats = prop.attached_features(&h.observed, &attach, adj);
                    models.iter().zip(&feats).map(|(m, f)| m.predict(f)).collect()
                }
                None => Vec::new(),
            };
            Ok(HoldoutOutcome {
                response: h.response,
                attention: predict_with(&node.lambda, &beta_hat),
                gcn,
                neighborhood_size: attach.len(),
                fallback: node.fallback,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let errors = |pick: &dyn Fn(&HoldoutOutcome) -> f64| -> Vec<f64> {
        outcomes.iter().map(|o| (o.response - pick(o)).powi(2)).collect()
    };
    let attention = MseEstimate::from_errors(&errors(&|o| o.attention));
    let depths = options.gcn.map_or(0, |g| g.layers + 1);
    let gcn = (0..depths)
        .map(|l| MseEstimate::from_errors(&errors(&|o| o.gcn[l])))
        .collect();
    let fallback: Vec<f64> = outcomes
        .iter()
        .map(|o| f64::from(u8::from(o.fallback[0] || o.fallback[1])))
        .collect();
    let sizes: Vec<f64> = outcomes.iter().map(|o| o.neighborhood_size as f64).collect();
    Ok(MseSummary {
        attention,
        gcn,
        fallback_rate: stats::mean(&fallback),
        mean_neighborhood: stats::mean(&sizes),
        outcomes,
    })
}

/// Proxy-regression coefficients on the base graph minus `removed`, updating
/// the precomputed screened sums instead of recomputing every proxy.
fn subgraph_coefficients(
    base: &GraphSample,
    sums: &ScreenedSums,
    removed: &[u32],
    cfg: &ScreenConfig,
) -> Result<Vec<f64>> {
    let required = 4 * base.d();
    let kept = base.n() - removed.len();
    if kept < required {
        return Err(Error::EmptySubgraph { kept, required });
    }
    let (proxies, ids) = sums.without(removed, &base.adjacency, base.observed.view(), cfg);
    let y: Array1<f64> = ids.iter().map(|&i| base.responses[i]).collect();
    Ok(ols(proxies.lambda.view(), y.view())?.beta_hat)
}

/// Edges of `adjacency` between nodes of `keep`, by brute-force filtering.
#[cfg(test)]
fn filtered_edges(adjacency: &crate::graph::Adjacency, keep: &[usize]) -> Vec<(u32, u32, EdgeKind)> {
    let mut pos = vec![None; adjacency.num_nodes()];
    for (new, &old) in keep.iter().enumerate() {
        pos[old] = Some(new as u32);
    }
    adjacency
        .edges()
        .filter_map(|(i, j, k)| match (pos[i as usize], pos[j as usize]) {
            (Some(a), Some(b)) => Some((a, b, k)),
            _ => None,
        })
        .collect()
}
