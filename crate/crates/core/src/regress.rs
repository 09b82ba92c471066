//! Least-squares estimates of the response coefficients and their errors.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::model::{GraphSample, ModelParams};
use crate::proxy::ProxyMatrix;

/// Which design matrix the coefficients were fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NaiveZ,
    ProxyLambda,
    OracleX,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::NaiveZ => "naive_z",
            Method::ProxyLambda => "proxy_lambda",
            Method::OracleX => "oracle_x",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive_z" => Ok(Method::NaiveZ),
            "proxy_lambda" => Ok(Method::ProxyLambda),
            "oracle_x" => Ok(Method::OracleX),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

/// Fitted coefficients with error metrics against the true `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub beta_hat: Vec<f64>,
    /// `‖β̂ − β‖ / ‖β‖` (NaN when `β = 0`).
    pub rel_error: f64,
    /// `‖β̂ − β‖`
    pub abs_error: f64,
    /// `‖β̂ − σ_x²/(σ_x²+σ_η²) β‖`
    pub attenuated_target_error: f64,
    pub gram_condition: f64,
}

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "n",
    "d",
    "alpha",
    "gamma",
    "sigma_eta2",
    "seed",
    "rel_error",
    "abs_error",
    "attenuated_target_error",
    "gram_condition",
];

impl EstimateReport {
    pub fn new(method: Method, beta_hat: Vec<f64>, gram_condition: f64, params: &ModelParams) -> Self {
        let shrink = params.attenuation();
        let abs_error = distance(&beta_hat, params.beta.iter().copied());
        let attenuated_target_error = distance(&beta_hat, params.beta.iter().map(|b| shrink * b));
        let norm = params.beta_norm();
        let rel_error = if norm > 0.0 { abs_error / norm } else { f64::NAN };
        EstimateReport {
            method,
            beta_hat,
            rel_error,
            abs_error,
            attenuated_target_error,
            gram_condition,
        }
    }

    /// Fields in [`CSV_HEADER`] order.
    pub fn csv_record(&self, params: &ModelParams) -> Vec<String> {
        vec![
            self.method.tag().to_string(),
            params.n.to_string(),
            params.d.to_string(),
            params.alpha.to_string(),
            params.gamma.to_string(),
            params.sigma_eta2.to_string(),
            params.seed.to_string(),
            self.rel_error.to_string(),
            self.abs_error.to_string(),
            self.attenuated_target_error.to_string(),
            self.gram_condition.to_string(),
        ]
    }
}

fn distance(a: &[f64], b: impl Iterator<Item = f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// An OLS fit: coefficients and the normal-equations condition estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta_hat: Vec<f64>,
    pub gram_condition: f64,
}

/// `argmin_b ‖design · b − y‖²` through an orthogonal factorisation.
pub fn ols(design: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<OlsFit> {
    let sol = least_squares(design, y)?;
    let gram_condition = sol.gram_condition();
    Ok(OlsFit {
        beta_hat: sol.coefficients,
        gram_condition,
    })
}

fn require_tall(sample: &GraphSample) -> Result<()> {
    if sample.n() < 4 * sample.d() {
        return Err(Error::InvalidParams(format!(
            "estimation needs n >= 4d, got n = {}, d = {}",
            sample.n(),
            sample.d()
        )));
    }
    Ok(())
}

/// `β̂_z`: OLS of `Y` on the observed covariates.
pub fn naive_estimate(sample: &GraphSample) -> Result<EstimateReport> {
    require_tall(sample)?;
    let fit = ols(sample.observed.view(), sample.responses.view())?;
    Ok(EstimateReport::new(Method::NaiveZ, fit.beta_hat, fit.gram_condition, &sample.params))
}

/// OLS of `Y` on the latent covariates; the infeasible benchmark.
pub fn oracle_estimate(sample: &GraphSample) -> Result<EstimateReport> {
    require_tall(sample)?;
    let fit = ols(sample.latent.view(), sample.responses.view())?;
    Ok(EstimateReport::new(Method::OracleX, fit.beta_hat, fit.gram_condition, &sample.params))
}

/// `β̂_λ`: OLS of `Y` on the proxies of the same sample. Every row of `Λ`
/// is used, including zero fallback rows.
pub fn proxy_estimate(sample: &GraphSample, proxies: &ProxyMatrix) -> Result<EstimateReport> {
    proxy_estimate_with(sample, proxies, false)
}

/// [`proxy_estimate`], optionally dropping rows where either block fell back to zero.
pub fn proxy_estimate_with(
    sample: &GraphSample,
    proxies: &ProxyMatrix,
    drop_fallback_rows: bool,
) -> Result<EstimateReport> {
    require_tall(sample)?;
    if proxies.lambda.dim() != sample.observed.dim() {
        return Err(Error::DimensionMismatch(format!(
            "proxies are {:?}, sample covariates {:?}",
            proxies.lambda.dim(),
            sample.observed.dim()
        )));
    }
    let fit = if drop_fallback_rows {
        let rows = proxies.complete_rows();
        let design = proxies.lambda.select(Axis(0), &rows);
        let y: Array1<f64> = rows.iter().map(|&i| sample.responses[i]).collect();
        ols(design.view(), y.view())?
    } else {
        ols(proxies.lambda.view(), sample.responses.view())?
    };
    Ok(EstimateReport::new(
        Method::ProxyLambda,
        fit.beta_hat,
        fit.gram_condition,
        &sample.params,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn report_metrics() {
        let p = ModelParams {
            beta: vec![3.0, 4.0],
            ..ModelParams::new(10, 2, 0.5, 0.5).with_variances(1.0, 1.0, 1.0)
        };
        let r = EstimateReport::new(Method::NaiveZ, vec![1.5, 2.0], 1.0, &p);
        assert!((r.abs_error - 2.5).abs() < 1e-15);
        assert!((r.rel_error - 0.5).abs() < 1e-15);
        assert!(r.attenuated_target_error.abs() < 1e-15);
    }

    #[test]
    fn zero_beta_relative_error_is_nan() {
        let p = ModelParams {
            beta: vec![0.0, 0.0],
            ..ModelParams::new(10, 2, 0.5, 0.5)
        };
        let r = EstimateReport::new(Method::OracleX, vec![0.1, 0.0], 1.0, &p);
        assert!(r.rel_error.is_nan());
        assert!(r.abs_error > 0.0);
    }

    #[test]
    fn method_tags_round_trip() {
        for m in [Method::NaiveZ, Method::ProxyLambda, Method::OracleX] {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!("gat".parse::<Method>().is_err());
    }

    #[test]
    fn naive_requires_tall_design() {
        let p = ModelParams::new(30, 10, 0.5, 0.5).with_seed(1);
        let g = GraphSample::generate(&p).unwrap();
        assert!(matches!(naive_estimate(&g), Err(Error::InvalidParams(_))));
    }

    fn gaussian_design(n: usize, d: usize, seed: u64) -> Array2<f64> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recovers_exact_coefficients(
            n in 8usize..500,
            d in 1usize..6,
            seed in any::<u64>(),
            b in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let a = gaussian_design(n, d, seed);
            let beta = Array1::from(b[..d].to_vec());
            let y = a.dot(&beta);
            let fit = ols(a.view(), y.view()).unwrap();
            for (g, w) in fit.beta_hat.iter().zip(beta.iter()) {
                prop_assert!((g - w).abs() <= 1e-10, "{} vs {} (cond {})", g, w, fit.gram_condition);
            }
        }
    }
}
