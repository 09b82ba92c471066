//! Grid sweeps over seeds and methods.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{GridAxis, SweepConfig, SweepMethod, SweepMode};
use crate::error::{Error, Result};
use crate::model::GraphSample;
use crate::predict::{evaluate_on_base, EvalOptions};
use crate::proxy::{compute_all_proxies, ScreenConfig};
use crate::regress::{naive_estimate, proxy_estimate};
use crate::stats;

pub const RESULTS_HEADER: [&str; 5] = ["grid_value", "seed", "method", "metric", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub grid_value: f64,
    pub seed: u64,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: String,
    /// Sorted by grid point, then seed, then method in configured order.
    pub rows: Vec<SweepRow>,
}

/// Mean and SD over seeds of one (grid point, method, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub grid_value: f64,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    /// Finite values aggregated; NaN cells are skipped.
    pub count: usize,
}

pub const AGGREGATE_HEADER: [&str; 6] = ["grid_value", "method", "metric", "mean", "sd", "count"];

impl SweepResult {
    /// Aggregates in first-appearance order of (grid point, method, metric).
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut keys: Vec<(f64, &str, &str)> = Vec::new();
        for r in &self.rows {
            let key = (r.grid_value, r.method.as_str(), r.metric.as_str());
            if !keys.iter().any(|k| k.0.to_bits() == key.0.to_bits() && k.1 == key.1 && k.2 == key.2) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(g, method, metric)| {
                let values: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.grid_value.to_bits() == g.to_bits() && r.method == method && r.metric == metric)
                    .map(|r| r.value)
                    .filter(|v| v.is_finite())
                    .collect();
                AggregateRow {
                    grid_value: g,
                    method: method.to_string(),
                    metric: metric.to_string(),
                    mean: stats::mean(&values),
                    sd: stats::std_dev(&values),
                    count: values.len(),
                }
            })
            .collect()
    }

    /// `comments` (already `#`-prefixed) followed by the rows.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &str) -> Result<()> {
        out.write_all(comments.as_bytes())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.grid_value.to_string(),
                r.seed.to_string(),
                r.method.clone(),
                r.metric.clone(),
                r.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a results file, skipping `#` comment lines. The axis is taken from
    /// an `# axis = ...` comment when present.
    pub fn read_csv(text: &str) -> Result<Self> {
        let axis = text
            .lines()
            .filter_map(|l| l.strip_prefix("# axis = "))
            .next()
            .unwrap_or("grid_value")
            .trim_matches('"')
            .to_string();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(RESULTS_HEADER.iter().copied()) {
            return Err(Error::Format(format!("unexpected results header {headers:?}")));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad number {:?}", &rec[i])))
            };
            rows.push(SweepRow {
                grid_value: num(0)?,
                seed: rec[1].parse().map_err(|_| Error::Format(format!("bad seed {:?}", &rec[1])))?,
                method: rec[2].to_string(),
                metric: rec[3].to_string(),
                value: num(4)?,
            });
        }
        Ok(SweepResult { axis, rows })
    }
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.grid_value.to_string(),
            r.method.clone(),
            r.metric.clone(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(AGGREGATE_HEADER.iter().copied()) {
        return Err(Error::Format(format!("unexpected aggregate header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Format(format!("bad number {:?}", &rec[i])))
        };
        rows.push(AggregateRow {
            grid_value: num(0)?,
            method: rec[1].to_string(),
            metric: rec[2].to_string(),
            mean: num(3)?,
            sd: num(4)?,
            count: rec[5].parse().map_err(|_| Error::Format(format!("bad count {:?}", &rec[5])))?,
        });
    }
    Ok(rows)
}

/// Metric values of one (grid point, seed) cell, per method in configured order.
type CellValues = Vec<(SweepMethod, Vec<f64>)>;

fn nan_cell(cfg: &SweepConfig) -> CellValues {
    let k = cfg.mode.metrics().len();
    cfg.methods.iter().map(|&m| (m, vec![f64::NAN; k])).collect()
}

/// Numerical failures become NaN; anything else is a real error.
fn or_nan(r: Result<Vec<f64>>, width: usize) -> Result<Vec<f64>> {
    match r {
        Ok(v) => Ok(v),
        Err(e) if e.is_numerical() => Ok(vec![f64::NAN; width]),
        Err(e) => Err(e),
    }
}

fn estimation_cell(cfg: &SweepConfig, value: f64, seed: u64) -> Result<CellValues> {
    let params = cfg.params_at(value, seed)?;
    let sample = match GraphSample::generate(&params) {
        Ok(s) => s,
        Err(e) if e.is_numerical() => return Ok(nan_cell(cfg)),
        Err(e) => return Err(e),
    };
    cfg.methods
        .iter()
        .map(|&m| {
            let report = match m {
                SweepMethod::Naive => naive_estimate(&sample),
                SweepMethod::Proxy => {
                    ScreenConfig::for_sample(&sample).and_then(|c| proxy_estimate(&sample, &compute_all_proxies(&sample, &c)))
                }
                _ => unreachable!("validated"),
            };
            Ok((m, or_nan(report.map(|r| vec![r.rel_error, r.abs_error]), 2)?))
        })
        .collect()
}

fn prediction_cell(cfg: &SweepConfig, value: f64, seed: u64) -> Result<CellValues> {
    let params = cfg.params_at(value, seed)?;
    let summary = GraphSample::generate(&params).and_then(|base| {
        let options = EvalOptions {
            screen: None,
            gcn: Some(cfg.gcn),
        };
        evaluate_on_base(&base, cfg.holdouts, &options)
    });
    let summary = match summary {
        Ok(s) => s,
        Err(e) if e.is_numerical() => return Ok(nan_cell(cfg)),
        Err(e) => return Err(e),
    };
    Ok(cfg
        .methods
        .iter()
        .map(|&m| {
            let v = match m {
                SweepMethod::AttentionPredict => {
                    vec![summary.attention.mean, summary.attention.stderr, summary.fallback_rate]
                }
                SweepMethod::Gcn => {
                    let e = summary.gcn[cfg.gcn.layers];
                    vec![e.mean, e.stderr, 0.0]
                }
                SweepMethod::Naive => {
                    let e = summary.gcn[0];
                    vec![e.mean, e.stderr, 0.0]
                }
                SweepMethod::Proxy => unreachable!("validated"),
            };
            (m, v)
        })
        .collect())
}

/// Where per-cell results are kept so an interrupted sweep can resume.
#[derive(Debug, Clone)]
pub struct CellStore {
    dir: PathBuf,
}

impl CellStore {
    const FINGERPRINT: &'static str = "config.txt";

    /// Opens `dir`, checking that any cells in it came from the same config.
    /// Without `resume`, existing cells are discarded.
    pub fn open(dir: &Path, cfg: &SweepConfig, resume: bool) -> Result<Self> {
        let fingerprint = cfg.header_comments();
        let fp_path = dir.join(Self::FINGERPRINT);
        if resume && fp_path.exists() {
            let old = fs::read_to_string(&fp_path)?;
            if old != fingerprint {
                return Err(Error::InvalidConfig(format!(
                    "cannot resume: {} holds cells of a different configuration",
                    dir.display()
                )));
            }
        } else if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::create_dir_all(dir)?;
        write_atomic(&fp_path, fingerprint.as_bytes())?;
        Ok(CellStore { dir: dir.to_path_buf() })
    }

    fn path(&self, grid_index: usize, seed_index: usize) -> PathBuf {
        self.dir.join(format!("cell_{grid_index}_{seed_index}.csv"))
    }

    fn load(&self, grid_index: usize, seed_index: usize, cfg: &SweepConfig) -> Result<Option<CellValues>> {
        let path = self.path(grid_index, seed_index);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut cell = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let method: SweepMethod = rec
                .get(0)
                .ok_or_else(|| Error::Format(format!("empty record in {}", path.display())))?
                .parse()?;
            let values = rec
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|_| Error::Format(format!("bad value {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            cell.push((method, values));
        }
        let expected: Vec<SweepMethod> = cfg.methods.clone();
        if cell.iter().map(|c| c.0).ne(expected.iter().copied())
            || cell.iter().any(|c| c.1.len() != cfg.mode.metrics().len())
        {
            return Err(Error::Format(format!("{} does not match the configuration", path.display())));
        }
        Ok(Some(cell))
    }

    fn save(&self, grid_index: usize, seed_index: usize, cell: &CellValues) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
            for (m, values) in cell {
                let mut rec = vec![m.tag().to_string()];
                rec.extend(values.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        write_atomic(&self.path(grid_index, seed_index), &buf)
    }
}

/// Writes through a temporary file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every (grid point, seed) cell, in parallel, and returns rows in
/// canonical order. With a store, finished cells are saved and cells already
/// present are reused.
pub fn run_sweep(cfg: &SweepConfig, store: Option<&CellStore>) -> Result<SweepResult> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let jobs: Vec<(usize, usize)> = (0..cfg.grid.len())
        .flat_map(|g| (0..seeds.len()).map(move |s| (g, s)))
        .collect();
    let cells: Vec<CellValues> = jobs
        .par_iter()
        .map(|&(g, s)| {
            if let Some(store) = store {
                if let Some(cell) = store.load(g, s, cfg)? {
                    return Ok(cell);
                }
            }
            let cell = match cfg.mode {
                SweepMode::Estimation => estimation_cell(cfg, cfg.grid[g], seeds[s])?,
                SweepMode::Prediction => prediction_cell(cfg, cfg.grid[g], seeds[s])?,
            };
            if let Some(store) = store {
                store.save(g, s, &cell)?;
            }
            Ok(cell)
        })
        .collect::<Result<_>>()?;

    let metrics = cfg.mode.metrics();
    let mut rows = Vec::with_capacity(jobs.len() * cfg.methods.len() * metrics.len());
    for (&(g, s), cell) in jobs.iter().zip(&cells) {
        for (m, values) in cell {
            for (metric, &value) in metrics.iter().zip(values) {
                rows.push(SweepRow {
                    grid_value: cfg.grid[g],
                    seed: seeds[s],
                    method: m.tag().to_string(),
                    metric: metric.to_string(),
                    value,
                });
            }
        }
    }
    Ok(SweepResult {
        axis: cfg.axis.tag().to_string(),
        rows,
    })
}

/// [`run_sweep`] in estimation mode.
pub fn run_estimation_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.mode != SweepMode::Estimation {
        return Err(Error::InvalidConfig("configuration is not in estimation mode".into()));
    }
    run_sweep(cfg, None)
}

/// [`run_sweep`] in prediction mode.
pub fn run_prediction_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.mode != SweepMode::Prediction {
        return Err(Error::InvalidConfig("configuration is not in prediction mode".into()));
    }
    run_sweep(cfg, None)
}

/// Axis label used in plots.
pub fn axis_label(axis: &str) -> String {
    match axis.parse::<GridAxis>() {
        Ok(GridAxis::Gamma) => "gamma".into(),
        Ok(GridAxis::SigmaEta2) => "sigma_eta^2".into(),
        Ok(GridAxis::N) => "n".into(),
        Err(_) => axis.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_beta;

    fn tiny(axis: GridAxis) -> SweepConfig {
        let mut c = SweepConfig::defaults(axis, false);
        c.base.n = 400;
        c.base.d = 4;
        c.base.beta = default_beta(4);
        c.num_seeds = 2;
        c
    }

    #[test]
    fn single_point_single_seed_row_count() {
        let mut c = tiny(GridAxis::SigmaEta2);
        c.grid = vec![1.0];
        c.num_seeds = 1;
        let r = run_estimation_sweep(&c).unwrap();
        assert_eq!(r.rows.iter().filter(|r| r.metric == "rel_error").count(), c.methods.len());
        assert_eq!(r.rows.len(), c.methods.len() * 2);
    }

    #[test]
    fn rows_are_in_canonical_order() {
        let mut c = tiny(GridAxis::Gamma);
        c.grid = vec![0.5, 0.6];
        let r = run_estimation_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2 * 2);
        let seeds = c.seeds();
        assert_eq!((r.rows[0].grid_value, r.rows[0].seed, r.rows[0].method.as_str()), (0.5, seeds[0], "naive"));
        assert_eq!(r.rows[2].method, "proxy");
        assert_eq!(r.rows[4].seed, seeds[1]);
        assert_eq!(r.rows[8].grid_value, 0.6);
    }

    #[test]
    fn numerical_failures_become_nan() {
        let rank = Err(Error::RankDeficient {
            min_pivot: 0.0,
            max_pivot: 1.0,
        });
        assert!(or_nan(rank, 2).unwrap().iter().all(|v| v.is_nan()));
        let empty = Err(Error::EmptySubgraph { kept: 1, required: 8 });
        assert_eq!(or_nan(empty, 3).unwrap().len(), 3);
        assert!(or_nan(Err(Error::InvalidParams("n".into())), 2).is_err());
    }

    #[test]
    fn results_round_trip_through_csv() {
        let mut c = tiny(GridAxis::SigmaEta2);
        c.grid = vec![0.5, 1.5];
        let r = run_estimation_sweep(&c).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, &c.header_comments()).unwrap();
        let back = SweepResult::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn aggregate_matches_rows() {
        let mut c = tiny(GridAxis::SigmaEta2);
        c.grid = vec![1.0];
        c.num_seeds = 3;
        let r = run_estimation_sweep(&c).unwrap();
        let agg = r.aggregate();
        assert_eq!(agg.len(), 4);
        let vals: Vec<f64> = r
            .rows
            .iter()
            .filter(|x| x.method == "naive" && x.metric == "rel_error")
            .map(|x| x.value)
            .collect();
        assert_eq!(agg[0].mean, stats::mean(&vals));
        assert_eq!(agg[0].count, 3);
        let mut buf = Vec::new();
        write_aggregate_csv(&agg, &mut buf).unwrap();
        assert_eq!(read_aggregate_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), agg);
    }
}
