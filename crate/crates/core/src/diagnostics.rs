//! Neighbourhood-size and proxy-error statistics.

use std::io::Write;

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DerivedParams, GraphSample};
use crate::proxy::{ProxyMatrix, ScreenConfig, ScreenCounts};
use crate::stats;

/// Per-node degrees and screened counts of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub er: Vec<usize>,
    pub geometric: Vec<usize>,
    pub union: Vec<usize>,
    pub screened: Vec<ScreenCounts>,
    /// Expected ER degree `n^γ` (strictly `(n − 1) p_n`; the two agree to `O(n^{γ−1})`).
    pub expected_er: f64,
    /// Order of the geometric degree, `n^α / t_n`.
    pub geometric_order: f64,
    /// Fraction of nodes with ER degree in `[n^γ/2, 2n^γ]`; `None` when `p_n = 0`.
    pub er_band_fraction: Option<f64>,
    /// Exponent `γ + σ_x⁴(α − 1) / (2(σ_x² + σ_η²)²)` governing how many ER
    /// neighbours survive screening. Informational.
    pub screened_er_exponent: f64,
}

/// Quartiles and extremes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().collect();
        let mean = stats::mean(&v);
        v.sort_by(f64::total_cmp);
        Summary {
            min: stats::quantile_sorted(&v, 0.0),
            q25: stats::quantile_sorted(&v, 0.25),
            median: stats::quantile_sorted(&v, 0.5),
            q75: stats::quantile_sorted(&v, 0.75),
            max: stats::quantile_sorted(&v, 1.0),
            mean,
        }
    }
}

impl DegreeStats {
    pub fn er_summary(&self) -> Summary {
        Summary::of(self.er.iter().map(|&v| v as f64))
    }

    pub fn geometric_summary(&self) -> Summary {
        Summary::of(self.geometric.iter().map(|&v| v as f64))
    }

    pub fn union_summary(&self) -> Summary {
        Summary::of(self.union.iter().map(|&v| v as f64))
    }

    pub fn screened_summary(&self) -> [Summary; 2] {
        [
            Summary::of(self.screened.iter().map(|c| c.block2 as f64)),
            Summary::of(self.screened.iter().map(|c| c.block1 as f64)),
        ]
    }

    /// `node,er_degree,geo_degree,union_degree,screened_block2,screened_block1`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "er_degree", "geo_degree", "union_degree", "screened_block2", "screened_block1"])?;
        for i in 0..self.union.len() {
            w.write_record([
                i.to_string(),
                self.er[i].to_string(),
                self.geometric[i].to_string(),
                self.union[i].to_string(),
                self.screened[i].block2.to_string(),
                self.screened[i].block1.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact per-node counts. Screening uses the sample's observed covariates and
/// the thresholds in `derived`.
pub fn degree_stats(sample: &GraphSample, derived: &DerivedParams) -> Result<DegreeStats> {
    let n = sample.n();
    let p = &sample.params;
    let cfg = ScreenConfig::new(derived.tau_screen, derived.t_n)?;
    let z = sample.observed.view();
    let adj = &sample.adjacency;
    let per_node: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let c = adj.degree_counts(i);
            let node = crate::proxy::compute_proxy(i, adj, z, &cfg);
            (c, node.counts)
        })
        .collect();
    let er: Vec<usize> = per_node.iter().map(|(c, _)| c.er).collect();
    let expected_er = (n as f64).powf(p.gamma);
    let er_band_fraction = (derived.p_n > 0.0).then(|| {
        let inside = er
            .iter()
            .filter(|&&k| (k as f64) >= expected_er / 2.0 && (k as f64) <= 2.0 * expected_er)
            .count();
        inside as f64 / n as f64
    });
    let s = p.sigma_x2 + p.sigma_eta2;
    Ok(DegreeStats {
        geometric: per_node.iter().map(|(c, _)| c.geometric).collect(),
        union: per_node.iter().map(|(c, _)| c.union).collect(),
        screened: per_node.iter().map(|(_, s)| *s).collect(),
        er,
        expected_er,
        geometric_order: (n as f64).powf(p.alpha) / derived.t_n,
        er_band_fraction,
        screened_er_exponent: p.gamma + p.sigma_x2.powi(2) * (p.alpha - 1.0) / (2.0 * s * s),
    })
}

/// Distance of the proxies from the latent covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyErrorStats {
    /// `‖λ_i − x_i‖`
    pub proxy_norms: Vec<f64>,
    /// `‖z_i − x_i‖`
    pub naive_norms: Vec<f64>,
    /// Mean of `‖λ_i − x_i‖² / d`.
    pub mean_proxy_error: f64,
    /// Mean of `‖z_i − x_i‖² / d`; concentrates at `σ_η²`.
    pub mean_naive_error: f64,
    /// Fraction of nodes with at least one zero proxy block.
    pub fallback_rate: f64,
    pub d: usize,
}

impl ProxyErrorStats {
    /// `node,proxy_error,naive_error,fallback` with errors as `‖·‖² / d`.
    pub fn write_csv<W: Write>(&self, out: W, fallback: &[[bool; 2]]) -> Result<()> {
        let d = self.d as f64;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "proxy_error", "naive_error", "fallback"])?;
        for i in 0..self.proxy_norms.len() {
            let fb = fallback.get(i).is_some_and(|f| f[0] || f[1]);
            w.write_record([
                i.to_string(),
                (self.proxy_norms[i].powi(2) / d).to_string(),
                (self.naive_norms[i].powi(2) / d).to_string(),
                u8::from(fb).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Proxy error against `x`, with the naive `z` error for comparison.
pub fn proxy_error_stats(
    proxies: &ProxyMatrix,
    x: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
) -> Result<ProxyErrorStats> {
    if proxies.lambda.dim() != x.dim() || z.dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!(
            "proxies {:?}, latent {:?}, observed {:?}",
            proxies.lambda.dim(),
            x.dim(),
            z.dim()
        )));
    }
    let d = x.ncols() as f64;
    let dist = |a: ArrayView2<'_, f64>| -> Vec<f64> {
        a.outer_iter()
            .zip(x.outer_iter())
            .map(|(r, xr)| r.iter().zip(xr).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
            .collect()
    };
    let proxy_norms = dist(proxies.lambda.view());
    let naive_norms = dist(z);
    let per_coord = |v: &[f64]| stats::mean(&v.iter().map(|r| r * r / d).collect::<Vec<_>>());
    Ok(ProxyErrorStats {
        mean_proxy_error: per_coord(&proxy_norms),
        mean_naive_error: per_coord(&naive_norms),
        fallback_rate: proxies.fallback_rate(),
        proxy_norms,
        naive_norms,
        d: x.ncols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::proxy::compute_all_proxies;

    #[test]
    fn no_er_edges_gives_no_band() {
        let p = ModelParams::new(300, 8, 0.6, 0.5).with_seed(2);
        let mut g = GraphSample::generate(&p).unwrap();
        g.edges_er.clear();
        g.adjacency = crate::graph::assemble_graph(&g.edges_geo, &[], g.n());
        let mut derived = g.derived;
        derived.p_n = 0.0;
        let s = degree_stats(&g, &derived).unwrap();
        assert!(s.er.iter().all(|&k| k == 0));
        assert_eq!(s.er_band_fraction, None);
    }

    #[test]
    fn degree_accounting() {
        let p = ModelParams::new(400, 8, 0.6, 0.5).with_seed(3);
        let g = GraphSample::generate(&p).unwrap();
        let s = degree_stats(&g, &g.derived).unwrap();
        assert_eq!(s.union.iter().sum::<usize>(), 2 * g.adjacency.num_edges());
        for i in 0..g.n() {
            assert!(s.union[i] <= s.er[i] + s.geometric[i]);
            assert!(s.screened[i].block1 as usize <= s.union[i]);
            assert!(s.screened[i].block2 as usize <= s.union[i]);
        }
    }

    #[test]
    fn exact_proxies_have_zero_error() {
        let p = ModelParams::new(100, 4, 0.6, 0.5).with_seed(4);
        let g = GraphSample::generate(&p).unwrap();
        let cfg = ScreenConfig::for_sample(&g).unwrap();
        let mut proxies = compute_all_proxies(&g, &cfg);
        proxies.lambda = g.latent.clone();
        let s = proxy_error_stats(&proxies, g.latent.view(), g.observed.view()).unwrap();
        assert!(s.proxy_norms.iter().all(|&v| v == 0.0));
        assert_eq!(s.mean_proxy_error, 0.0);
        assert!(s.mean_naive_error > 0.0);
    }
}
