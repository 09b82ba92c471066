//! Sampling of Erdős–Rényi contaminated random dot-product graphs.
//!
//! Node `i` carries a latent covariate `x_i ~ N(0, σ_x² I_d)`, an observed
//! covariate `z_i = x_i + η_i` with `η_i ~ N(0, σ_η² I_d)`, and a response
//! `y_i = x_iᵀβ + ε_i`. Nodes `i ≠ j` are joined by a geometric edge when
//! `x_iᵀx_j ≥ σ_x² t_n √d` and, independently, by an ER edge with
//! probability `p_n = n^{γ-1}`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{assemble_graph, Adjacency, Edge, EdgeKind};
use crate::matfile;
use crate::rng::{stream, Purpose};

/// Default tile height for the blocked Gram product.
pub const DEFAULT_BLOCK_ROWS: usize = 1024;

/// Generative configuration of one simulated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub d: usize,
    /// Geometric-degree exponent.
    pub alpha: f64,
    /// ER-degree exponent.
    pub gamma: f64,
    pub sigma_x2: f64,
    pub sigma_eta2: f64,
    pub sigma_eps2: f64,
    pub beta: Vec<f64>,
    pub seed: u64,
}

impl ModelParams {
    /// Unit variances, the default coefficient vector and seed 0.
    pub fn new(n: usize, d: usize, alpha: f64, gamma: f64) -> Self {
        ModelParams {
            n,
            d,
            alpha,
            gamma,
            sigma_x2: 1.0,
            sigma_eta2: 1.0,
            sigma_eps2: 1.0,
            beta: default_beta(d),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variances(mut self, sigma_x2: f64, sigma_eta2: f64, sigma_eps2: f64) -> Self {
        self.sigma_x2 = sigma_x2;
        self.sigma_eta2 = sigma_eta2;
        self.sigma_eps2 = sigma_eps2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if u32::try_from(self.n).is_err() {
            return bad(format!("n = {} does not fit node ids", self.n));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.sigma_x2 > 0.0 && self.sigma_x2.is_finite()) {
            return bad(format!("sigma_x2 must be positive, got {}", self.sigma_x2));
        }
        for (name, v) in [("sigma_eta2", self.sigma_eta2), ("sigma_eps2", self.sigma_eps2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.beta.len() != self.d {
            return bad(format!("beta has length {}, expected d = {}", self.beta.len(), self.d));
        }
        if !self.beta.iter().all(|b| b.is_finite()) {
            return bad("beta must be finite".into());
        }
        Ok(())
    }

    pub fn beta_norm(&self) -> f64 {
        self.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    /// The errors-in-variables shrinkage factor `σ_x² / (σ_x² + σ_η²)`.
    pub fn attenuation(&self) -> f64 {
        let total = self.sigma_x2 + self.sigma_eta2;
        if total > 0.0 {
            self.sigma_x2 / total
        } else {
            1.0
        }
    }

    /// Asymptotic MSE floor of non-attention aggregation networks:
    /// `σ_ε² + σ_x²σ_η² ‖β‖² / (σ_x² + σ_η²)`.
    pub fn gcn_floor(&self) -> f64 {
        let total = self.sigma_x2 + self.sigma_eta2;
        let b2 = self.beta.iter().map(|b| b * b).sum::<f64>();
        if total > 0.0 {
            self.sigma_eps2 + self.sigma_x2 * self.sigma_eta2 / total * b2
        } else {
            self.sigma_eps2
        }
    }
}

/// Unit-norm coefficients with alternating signs, `β_j = (-1)^j / √d`.
pub fn default_beta(d: usize) -> Vec<f64> {
    let v = 1.0 / (d as f64).sqrt();
    (0..d).map(|j| if j % 2 == 0 { v } else { -v }).collect()
}

/// Threshold scale and ER probability implied by `(n, d, α, γ, σ_x²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub t_n: f64,
    pub p_n: f64,
    /// Geometric edge threshold `σ_x² t_n √d`.
    pub tau: f64,
    /// Screening threshold `tau / 2`.
    pub tau_screen: f64,
}

/// `t_n = √(2(1-α) ln n)` and `p_n = n^{γ-1}`.
pub fn threshold_scale(n: usize, alpha: f64) -> f64 {
    (2.0 * (1.0 - alpha) * (n as f64).ln()).sqrt()
}

pub fn er_probability(n: usize, gamma: f64) -> f64 {
    (n as f64).powf(gamma - 1.0)
}

pub fn derive_params(p: &ModelParams) -> Result<DerivedParams> {
    p.validate()?;
    let t_n = threshold_scale(p.n, p.alpha);
    let p_n = er_probability(p.n, p.gamma);
    let tau = p.sigma_x2 * t_n * (p.d as f64).sqrt();
    Ok(DerivedParams {
        t_n,
        p_n,
        tau,
        tau_screen: tau / 2.0,
    })
}

/// Latent, noise and observed covariate matrices (`n × d`, row per node).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub latent: Array2<f64>,
    pub noise: Array2<f64>,
    pub observed: Array2<f64>,
}

pub(crate) fn gaussian_vector<R: Rng>(d: usize, variance: f64, rng: &mut R) -> Vec<f64> {
    let sd = variance.sqrt();
    (0..d)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            sd * g
        })
        .collect()
}

/// `n × d` matrix whose row `i` comes from stream `(seed, purpose, i)`.
fn gaussian_rows(n: usize, d: usize, variance: f64, seed: u64, purpose: Purpose) -> Array2<f64> {
    let mut m = Array2::zeros((n, d));
    m.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let mut rng = stream(seed, purpose, i as u64);
            let v = gaussian_vector(d, variance, &mut rng);
            row.assign(&ArrayView1::from(&v));
        });
    m
}

/// Draws `X`, `H` and `Z = X + H` from the seed's latent and noise streams.
pub fn sample_covariates(p: &ModelParams) -> Result<Covariates> {
    for (name, v) in [("sigma_x2", p.sigma_x2), ("sigma_eta2", p.sigma_eta2)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} must be non-negative, got {v}")));
        }
    }
    let latent = gaussian_rows(p.n, p.d, p.sigma_x2, p.seed, Purpose::Latent);
    let noise = gaussian_rows(p.n, p.d, p.sigma_eta2, p.seed, Purpose::Noise);
    let observed = &latent + &noise;
    Ok(Covariates {
        latent,
        noise,
        observed,
    })
}

/// `Y_i = x_iᵀβ + ε_i` for given noise.
pub fn responses_from_noise(
    x: ArrayView2<'_, f64>,
    beta: &[f64],
    eps: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    if x.ncols() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "covariates have {} columns, beta has {} entries",
            x.ncols(),
            beta.len()
        )));
    }
    if x.nrows() != eps.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariate rows, {} noise entries",
            x.nrows(),
            eps.len()
        )));
    }
    Ok(Array1::from_iter(
        x.outer_iter()
            .zip(eps.iter())
            .map(|(row, e)| dot(row.as_slice().unwrap_or(&row.to_vec()), beta) + e),
    ))
}

/// Samples `ε_i ~ N(0, σ_ε²)` from the response streams and returns `(Y, ε)`.
pub fn sample_responses(
    x: ArrayView2<'_, f64>,
    beta: &[f64],
    sigma_eps2: f64,
    seed: u64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if !(sigma_eps2 >= 0.0 && sigma_eps2.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "sigma_eps2 must be non-negative, got {sigma_eps2}"
        )));
    }
    let sd = sigma_eps2.sqrt();
    let eps = Array1::from_iter((0..x.nrows()).map(|i| {
        let g: f64 = StandardNormal.sample(&mut stream(seed, Purpose::Response, i as u64));
        sd * g
    }));
    let y = responses_from_noise(x, beta, eps.view())?;
    Ok((y, eps))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All pairs `i < j` with `x_iᵀx_j ≥ tau`, using the default tile size.
pub fn build_geometric_edges(x: ArrayView2<'_, f64>, tau: f64) -> Vec<Edge> {
    build_geometric_edges_blocked(x, tau, DEFAULT_BLOCK_ROWS)
}

/// Tiled version of [`build_geometric_edges`]: Gram blocks of at most
/// `block_rows × block_rows` entries are formed one at a time, so peak memory is
/// independent of `n`. The tiling is fixed by `block_rows` alone, which keeps the
/// result independent of the worker count.
pub fn build_geometric_edges_blocked(x: ArrayView2<'_, f64>, tau: f64, block_rows: usize) -> Vec<Edge> {
    let n = x.nrows();
    let block_rows = block_rows.max(1);
    let blocks = n.div_ceil(block_rows);
    let pairs: Vec<(usize, usize)> = (0..blocks)
        .flat_map(|a| (a..blocks).map(move |b| (a, b)))
        .collect();
    let mut edges: Vec<Edge> = pairs
        .par_iter()
        .flat_map_iter(|&(a, b)| {
            let (r0, r1) = (a * block_rows, ((a + 1) * block_rows).min(n));
            let (c0, c1) = (b * block_rows, ((b + 1) * block_rows).min(n));
            let gram = x.slice(s![r0..r1, ..]).dot(&x.slice(s![c0..c1, ..]).t());
            let mut found = Vec::new();
            for (di, row) in gram.outer_iter().enumerate() {
                let i = r0 + di;
                let start = if a == b { di + 1 } else { 0 };
                for (dj, &g) in row.iter().enumerate().skip(start) {
                    if g >= tau {
                        found.push((i as u32, (c0 + dj) as u32));
                    }
                }
            }
            found
        })
        .collect();
    edges.sort_unstable();
    edges
}

/// Positions `start + skip_1`, `start + skip_1 + 1 + skip_2`, ... below `end`,
/// with geometric skips, i.e. each position is hit independently with
/// probability `p`. Cost is proportional to the number of hits.
pub(crate) fn bernoulli_positions<R: Rng>(start: u64, end: u64, p: f64, rng: &mut R) -> Vec<u64> {
    let mut hits = Vec::new();
    if p <= 0.0 || start >= end {
        return hits;
    }
    if p >= 1.0 {
        return (start..end).collect();
    }
    let skips = Geometric::new(p).expect("p in (0, 1)");
    let mut pos = start;
    loop {
        let skip = skips.sample(rng);
        pos = match pos.checked_add(skip) {
            Some(v) if v < end => v,
            _ => break,
        };
        hits.push(pos);
        pos += 1;
    }
    hits
}

/// Independent Bernoulli(`p`) edges over all unordered pairs. Row `i` (pairs
/// `(i, j)`, `j > i`) uses its own stream, so rows can be sampled in any order.
pub fn build_er_edges(n: usize, p: f64, seed: u64) -> Vec<Edge> {
    if p <= 0.0 || n < 2 {
        return Vec::new();
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::ErEdges, i as u64);
            bernoulli_positions(i as u64 + 1, n as u64, p, &mut rng)
                .into_iter()
                .map(|j| (i as u32, j as u32))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// One realisation of the model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub params: ModelParams,
    pub derived: DerivedParams,
    /// `X`, rows `x_i`.
    pub latent: Array2<f64>,
    /// `H`, rows `η_i`.
    pub noise: Array2<f64>,
    /// `Z = X + H`.
    pub observed: Array2<f64>,
    /// `Y`.
    pub responses: Array1<f64>,
    /// `ε`.
    pub response_noise: Array1<f64>,
    /// `E1`, sorted pairs `i < j`.
    pub edges_geo: Vec<Edge>,
    /// `E2`, sorted pairs `i < j`.
    pub edges_er: Vec<Edge>,
    pub adjacency: Adjacency,
}

impl GraphSample {
    /// Samples everything from `params.seed`.
    pub fn generate(params: &ModelParams) -> Result<Self> {
        Self::generate_with_block(params, DEFAULT_BLOCK_ROWS)
    }

    pub fn generate_with_block(params: &ModelParams, block_rows: usize) -> Result<Self> {
        let derived = derive_params(params)?;
        let cov = sample_covariates(params)?;
        let (_, eps) = sample_responses(cov.latent.view(), &params.beta, params.sigma_eps2, params.seed)?;
        let edges_er = build_er_edges(params.n, derived.p_n, params.seed);
        Self::from_parts(params, cov.latent, cov.noise, eps, edges_er, block_rows)
    }

    /// Completes a sample from its primitive random inputs: derives `Z`, `Y`,
    /// the geometric edges and the union adjacency.
    pub fn from_parts(
        params: &ModelParams,
        latent: Array2<f64>,
        noise: Array2<f64>,
        response_noise: Array1<f64>,
        edges_er: Vec<Edge>,
        block_rows: usize,
    ) -> Result<Self> {
        let derived = derive_params(params)?;
        let shape = (params.n, params.d);
        if latent.dim() != shape || noise.dim() != shape || response_noise.len() != params.n {
            return Err(Error::DimensionMismatch(format!(
                "expected {shape:?} covariates and {} noise entries",
                params.n
            )));
        }
        let observed = &latent + &noise;
        let responses = responses_from_noise(latent.view(), &params.beta, response_noise.view())?;
        let edges_geo = build_geometric_edges_blocked(latent.view(), derived.tau, block_rows);
        let adjacency = assemble_graph(&edges_geo, &edges_er, params.n);
        Ok(GraphSample {
            params: params.clone(),
            derived,
            latent,
            noise,
            observed,
            responses,
            response_noise,
            edges_geo,
            edges_er,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.observed.nrows()
    }

    pub fn d(&self) -> usize {
        self.observed.ncols()
    }

    /// Writes `graph.txt` (`n d` header, then `i j tag` per edge with 0-based
    /// ids) plus `latent.bin`, `observed.bin` and `responses.bin` into `dir`.
    pub fn write_dump(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("graph.txt"), self.graph_text())?;
        matfile::save_matrix(&dir.join("latent.bin"), self.latent.view())?;
        matfile::save_matrix(&dir.join("observed.bin"), self.observed.view())?;
        let y = self.responses.view().insert_axis(Axis(1));
        matfile::save_matrix(&dir.join("responses.bin"), y)?;
        Ok(())
    }

    pub fn graph_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n(), self.d());
        for (i, j, kind) in self.adjacency.edges() {
            let _ = writeln!(out, "{i} {j} {kind}");
        }
        out
    }
}

/// Parses the text produced by [`GraphSample::graph_text`] into `(n, d, edges)`.
pub fn parse_graph_text(text: &str) -> Result<(usize, usize, Vec<(u32, u32, EdgeKind)>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty graph dump".into()))?;
    let mut h = header.split_whitespace().map(str::parse::<usize>);
    let (n, d) = match (h.next(), h.next()) {
        (Some(Ok(n)), Some(Ok(d))) => (n, d),
        _ => return Err(Error::Format(format!("bad header line {header:?}"))),
    };
    let mut edges = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = match f.as_slice() {
            [i, j, t] if t.len() == 1 => match (i.parse(), j.parse(), EdgeKind::from_tag(t.chars().next().unwrap())) {
                (Ok(i), Ok(j), Some(k)) => Some((i, j, k)),
                _ => None,
            },
            _ => None,
        };
        edges.push(parsed.ok_or_else(|| Error::Format(format!("bad edge line {line:?}")))?);
    }
    Ok((n, d, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn derived_params_closed_forms() {
        let p = ModelParams::new(30000, 250, 0.72, 0.725);
        let dp = derive_params(&p).unwrap();
        // √(0.56 · ln 30000) and 30000^(-0.275), evaluated with mpmath at 30 digits
        assert!((dp.t_n - 2.402_709_614_156_651).abs() < 1e-9, "{}", dp.t_n);
        assert!((dp.p_n - 0.058_720_758_256_179).abs() < 1e-9, "{}", dp.p_n);
        assert_eq!(dp.tau_screen, dp.tau / 2.0);
        assert!((dp.tau - dp.t_n * 250f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn t_n_matches_formula_and_vanishes_as_alpha_approaches_one() {
        let t3 = threshold_scale(3, 0.5);
        assert_eq!(t3, (2.0 * 0.5 * 3f64.ln()).sqrt());
        assert!(threshold_scale(3, 1.0 - 1e-12) < 1e-5);
    }

    #[test]
    fn rejects_invalid_params() {
        let ok = ModelParams::new(10, 4, 0.5, 0.5);
        assert!(derive_params(&ok).is_ok());
        for bad in [
            ModelParams { n: 1, ..ok.clone() },
            ModelParams { alpha: 1.0, ..ok.clone() },
            ModelParams { gamma: 0.0, ..ok.clone() },
            ModelParams { sigma_x2: 0.0, ..ok.clone() },
            ModelParams { sigma_eta2: -1.0, ..ok.clone() },
            ModelParams { beta: vec![1.0], ..ok.clone() },
        ] {
            assert!(matches!(derive_params(&bad), Err(Error::InvalidParams(_))), "{bad:?}");
        }
    }

    #[test]
    fn default_beta_is_unit_norm_and_alternating() {
        let b = default_beta(5);
        assert!((b.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(b[0] > 0.0 && b[1] < 0.0 && b[2] > 0.0);
    }

    #[test]
    fn zero_latent_variance_gives_zero_matrix() {
        let p = ModelParams::new(50, 6, 0.5, 0.5).with_variances(0.0, 1.0, 1.0);
        let c = sample_covariates(&p).unwrap();
        assert!(c.latent.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_noise_variance_gives_observed_equal_latent() {
        let p = ModelParams::new(50, 6, 0.5, 0.5).with_variances(1.0, 0.0, 1.0);
        let c = sample_covariates(&p).unwrap();
        assert_eq!(c.observed, c.latent);
    }

    #[test]
    fn latent_second_moment_concentrates() {
        let (n, d, s2) = (2000, 20, 1.7);
        let p = ModelParams::new(n, d, 0.5, 0.5).with_variances(s2, 1.0, 1.0).with_seed(11);
        let c = sample_covariates(&p).unwrap();
        let mean = c.latent.iter().map(|v| v * v).sum::<f64>() / (n * d) as f64;
        let sd = (2.0 * s2 * s2 / (n * d) as f64).sqrt();
        assert!((mean - s2).abs() < 4.0 * sd, "mean {mean}");
    }

    #[test]
    fn noiseless_responses_equal_linear_predictor() {
        let p = ModelParams::new(40, 3, 0.5, 0.5).with_seed(2);
        let c = sample_covariates(&p).unwrap();
        let (y, eps) = sample_responses(c.latent.view(), &p.beta, 0.0, 2).unwrap();
        assert!(eps.iter().all(|&e| e == 0.0));
        for (i, row) in c.latent.outer_iter().enumerate() {
            let expect: f64 = row.iter().zip(&p.beta).map(|(a, b)| a * b).sum();
            assert_eq!(y[i], expect);
        }
    }

    #[test]
    fn basis_rows_pick_out_coefficients() {
        let x = Array2::eye(3);
        let beta = [0.5, -2.0, 7.0];
        let (y, eps) = sample_responses(x.view(), &beta, 1.0, 9).unwrap();
        for i in 0..3 {
            assert_eq!(y[i], beta[i] + eps[i]);
        }
    }

    #[test]
    fn response_variance_with_zero_beta() {
        let n = 4000;
        let x = Array2::zeros((n, 2));
        let (y, _) = sample_responses(x.view(), &[0.0, 0.0], 1.0, 5).unwrap();
        let mean = y.sum() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // sd of the sample variance is about √(2/(n-1))
        assert!((var - 1.0).abs() < 4.0 * (2.0 / (n - 1) as f64).sqrt(), "{var}");
    }

    #[test]
    fn response_dimension_mismatch() {
        let x = Array2::zeros((4, 3));
        assert!(matches!(
            sample_responses(x.view(), &[1.0, 2.0], 1.0, 0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn geometric_edges_three_point_example() {
        let x = array![[1.0, 0.0], [1.0, 0.5], [-1.0, 0.0]];
        assert_eq!(build_geometric_edges(x.view(), 1.0), vec![(0, 1)]);
    }

    #[test]
    fn geometric_edges_vacuous_threshold() {
        let x = array![[1.0, 0.0], [1.0, 0.5], [2.0, 3.0]];
        assert!(build_geometric_edges(x.view(), f64::INFINITY).is_empty());
        assert!(build_geometric_edges(x.view(), f64::MAX).is_empty());
    }

    #[test]
    fn geometric_threshold_is_inclusive() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [0.0, -1.0]];
        assert_eq!(build_geometric_edges(x.view(), 2.0), vec![(0, 1)]);
    }

    #[test]
    fn er_edges_empty_for_zero_probability() {
        assert!(build_er_edges(100, 0.0, 1).is_empty());
    }

    #[test]
    fn er_edges_nearly_complete() {
        // P(all 45 present) = 0.999999^45 ≈ 0.99995
        let full = (0..200)
            .filter(|&s| build_er_edges(10, 0.999_999, s).len() == 45)
            .count();
        assert!(full >= 199, "{full}");
    }

    #[test]
    fn er_edge_count_matches_binomial() {
        let m = build_er_edges(1000, 0.01, 3).len() as f64;
        let mean = 499_500.0 * 0.01;
        let sd = (499_500.0 * 0.01 * 0.99f64).sqrt();
        assert!((m - mean).abs() < 4.0 * sd, "{m}");
    }

    #[test]
    fn er_edges_are_sorted_pairs() {
        let e = build_er_edges(300, 0.05, 8);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert!(e.iter().all(|&(i, j)| i < j && (j as usize) < 300));
    }

    #[test]
    fn bernoulli_positions_frequency() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let hits = bernoulli_positions(0, 100_000, 0.3, &mut rng);
        let f = hits.len() as f64 / 1e5;
        assert!((f - 0.3).abs() < 4.0 * (0.21f64 / 1e5).sqrt());
        assert!(hits.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn graph_dump_round_trip() {
        let p = ModelParams::new(60, 4, 0.5, 0.5).with_seed(4);
        let g = GraphSample::generate(&p).unwrap();
        let (n, d, edges) = parse_graph_text(&g.graph_text()).unwrap();
        assert_eq!((n, d), (60, 4));
        let again = Adjacency::from_sorted_labelled(n, &edges);
        assert_eq!(again, g.adjacency);
        assert!(parse_graph_text("3 2\n0 1 Q\n").is_err());
    }
}
