//! Benchmark protocols: simulators, designs, metrics and the replication
//! runner.

mod design;
mod metrics;
mod testfun;

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use design::{
    factorial_design, fractional_factorial_243, latin_hypercube, latin_hypercube_with,
    sample_level_combinations, MAX_FACTORIAL_ROWS,
};
pub use metrics::{nse, rmse, NseForm};
pub use testfun::{testfun_ex4, testfun_ex5};

use crate::data::{Dataset, MixedInput, ProblemSchema};
use crate::error::{Error, Result};
use crate::inference::{fit, FitConfig};
use crate::kernels::ModelKind;
use crate::lezgp::lezgp_predict;
use crate::predict::predict_batch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Example {
    /// Three quantitative and three qualitative inputs; 81 training runs.
    Ex4,
    /// Nine and nine; 243 training runs.
    Ex5,
    /// Nine and nine on the full 3^9 factorial, predicted locally.
    Ex6,
}

impl Example {
    pub fn id(self) -> u8 {
        match self {
            Example::Ex4 => 4,
            Example::Ex5 => 5,
            Example::Ex6 => 6,
        }
    }

    pub fn schema(self) -> ProblemSchema {
        match self {
            Example::Ex4 => ProblemSchema::symmetric(3, 3, 3),
            _ => ProblemSchema::symmetric(9, 9, 3),
        }
        .expect("fixed schema")
    }

    pub fn simulate(self, w: &MixedInput) -> Result<f64> {
        match self {
            Example::Ex4 => testfun_ex4(&w.x, w.z[0], w.z[1], w.z[2]),
            _ => testfun_ex5(&w.x, &w.z),
        }
    }

    /// Models compared by default.
    pub fn default_models(self) -> Vec<ModelKind> {
        match self {
            Example::Ex4 => ModelKind::ALL.to_vec(),
            Example::Ex5 => ModelKind::ALL
                .iter()
                .copied()
                .filter(|k| *k != ModelKind::Ezgp)
                .collect(),
            Example::Ex6 => vec![ModelKind::Eezgp],
        }
    }
}

impl TryFrom<u8> for Example {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Example::Ex4),
            5 => Ok(Example::Ex5),
            6 => Ok(Example::Ex6),
            _ => Err(Error::InvalidParameter(format!("unknown example {v}; expected 4, 5 or 6"))),
        }
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| Error::InvalidParameter(format!("unknown example {s:?}; expected 4, 5 or 6")))
            .and_then(Example::try_from)
    }
}

/// Training and test sets for one replication.
#[derive(Debug, Clone)]
pub struct Replication {
    pub train: Dataset,
    pub test: Vec<MixedInput>,
    pub test_y: Vec<f64>,
}

fn with_lhs<R: Rng>(levels: Vec<Vec<usize>>, p: usize, rng: &mut R) -> Vec<MixedInput> {
    let x = latin_hypercube_with(levels.len(), p, rng);
    x.into_iter().zip(levels).map(|(x, z)| MixedInput::new(x, z)).collect()
}

fn responses(ex: Example, ws: &[MixedInput]) -> Result<Vec<f64>> {
    ws.iter().map(|w| ex.simulate(w)).collect()
}

/// Generates the train/test sets of replication `rep`.
pub fn replication(ex: Example, rep: usize, seed: u64) -> Result<Replication> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((ex.id() as u64) << 32) | rep as u64);
    let schema = ex.schema();
    let p = schema.p();
    let (train, test) = match ex {
        Example::Ex4 => {
            let train = with_lhs(factorial_design(&[3; 3], 3)?, p, &mut rng);
            let test = with_lhs(factorial_design(&[3; 3], 45)?, p, &mut rng);
            (train, test)
        }
        Example::Ex5 => {
            let train = with_lhs(fractional_factorial_243(), p, &mut rng);
            let levels = sample_level_combinations(&[3; 9], 1215, &mut rng)?;
            (train, with_lhs(levels, p, &mut rng))
        }
        Example::Ex6 => {
            let train = with_lhs(factorial_design(&[3; 9], 1)?, p, &mut rng);
            let z: Vec<usize> = (0..9).map(|_| rng.random_range(1..=3)).collect();
            (train, with_lhs(vec![z; 100], p, &mut rng))
        }
    };
    let y = responses(ex, &train)?;
    let test_y = responses(ex, &test)?;
    Ok(Replication {
        train: Dataset::new(schema, train, y)?,
        test,
        test_y,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub example: u8,
    /// Model label: the kind name, prefixed with `lezgp_` for localized fits.
    pub model: String,
    pub rep: usize,
    pub rmse: f64,
    pub nse: f64,
    /// Fit plus prediction wall time, when recorded.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub nse_form: NseForm,
    /// Tuning parameter for the localized example.
    pub n_s: usize,
    pub record_time: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            nse_form: NseForm::PredictionMean,
            n_s: 7,
            record_time: false,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fit seed for one (example, rep, model) cell.
pub fn cell_seed(seed: u64, ex: Example, rep: usize, kind: ModelKind) -> u64 {
    let kind_idx = ModelKind::ALL.iter().position(|k| *k == kind).expect("known kind") as u64;
    splitmix64(seed ^ splitmix64(((ex.id() as u64) << 56) ^ ((rep as u64) << 8) ^ kind_idx))
}

/// Runs `reps` replications of `ex` for every model. Failed cells are
/// logged and recorded with NaN metrics. Results are ordered by replication,
/// then by the order of `models`.
pub fn run_benchmark(
    ex: Example,
    reps: usize,
    models: &[ModelKind],
    cfg: &FitConfig,
    opts: &BenchOptions,
) -> Result<Vec<BenchResult>> {
    if ex == Example::Ex6 {
        if let Some(k) = models.iter().find(|k| !k.is_indicator()) {
            return Err(Error::InvalidParameter(format!(
                "example 6 runs localized fits with ezgp or eezgp, not {k}"
            )));
        }
    }
    let data: Vec<Replication> = (0..reps)
        .into_par_iter()
        .map(|rep| replication(ex, rep, cfg.seed))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, ModelKind)> = (0..reps)
        .flat_map(|rep| models.iter().map(move |&k| (rep, k)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(rep, kind)| run_cell(ex, rep, kind, &data[rep], cfg, opts))
        .collect())
}

fn run_cell(
    ex: Example,
    rep: usize,
    kind: ModelKind,
    data: &Replication,
    cfg: &FitConfig,
    opts: &BenchOptions,
) -> BenchResult {
    let cell_cfg = FitConfig {
        seed: cell_seed(cfg.seed, ex, rep, kind),
        ..cfg.clone()
    };
    let start = Instant::now();
    let preds = match ex {
        Example::Ex6 => lezgp_predict(&data.train, &data.test, opts.n_s, kind, &cell_cfg),
        _ => fit(&data.train, kind, &cell_cfg).and_then(|m| predict_batch(&m, &data.test)),
    };
    let seconds = opts.record_time.then(|| start.elapsed().as_secs_f64());
    let model = match ex {
        Example::Ex6 => format!("lezgp_{kind}"),
        _ => kind.name().to_string(),
    };
    let (rmse_v, nse_v) = match preds {
        Ok(p) => {
            let means: Vec<f64> = p.iter().map(|r| r.mean).collect();
            let r = rmse(&means, &data.test_y).unwrap_or(f64::NAN);
            let n = nse(&means, &data.test_y, opts.nse_form).unwrap_or(f64::NAN);
            (r, n)
        }
        Err(e) => {
            log::warn!("example {} rep {rep} {model}: {e}", ex.id());
            (f64::NAN, f64::NAN)
        }
    };
    log::info!(
        "example {} rep {rep} {model}: rmse {rmse_v:.5} nse {nse_v:.4}",
        ex.id()
    );
    BenchResult {
        example: ex.id(),
        model,
        rep,
        rmse: rmse_v,
        nse: nse_v,
        seconds,
    }
}

/// Writes `example,model,rep,rmse,nse,seconds`.
pub fn write_results<W: Write>(results: &[BenchResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["example", "model", "rep", "rmse", "nse", "seconds"])?;
    for r in results {
        wtr.write_record([
            r.example.to_string(),
            r.model.clone(),
            r.rep.to_string(),
            format!("{:?}", r.rmse),
            format!("{:?}", r.nse),
            r.seconds.map(|s| format!("{s:?}")).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(r: R) -> Result<Vec<BenchResult>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse().map_err(|_| Error::InvalidRow {
                row,
                msg: format!("bad number {:?}", field(k)),
            })
        };
        out.push(BenchResult {
            example: field(0).parse().map_err(|_| Error::InvalidRow {
                row,
                msg: format!("bad example {:?}", field(0)),
            })?,
            model: field(1).to_string(),
            rep: field(2).parse().map_err(|_| Error::InvalidRow {
                row,
                msg: format!("bad rep {:?}", field(2)),
            })?,
            rmse: num(3)?,
            nse: num(4)?,
            seconds: if field(5).is_empty() { None } else { Some(num(5)?) },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Median, mean and sample standard deviation of the finite values.
pub fn stats(values: &[f64]) -> Option<Stats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Stats { median, mean, sd })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub example: u8,
    pub model: String,
    pub cells: usize,
    pub failed: usize,
    pub rmse: Option<Stats>,
    pub nse: Option<Stats>,
}

/// Per-(example, model) summaries in first-appearance order.
pub fn summarize(results: &[BenchResult]) -> Vec<ModelSummary> {
    let mut keys: Vec<(u8, String)> = Vec::new();
    for r in results {
        if !keys.iter().any(|(e, m)| *e == r.example && *m == r.model) {
            keys.push((r.example, r.model.clone()));
        }
    }
    keys.into_iter()
        .map(|(example, model)| {
            let rows: Vec<&BenchResult> = results
                .iter()
                .filter(|r| r.example == example && r.model == model)
                .collect();
            let rmses: Vec<f64> = rows.iter().map(|r| r.rmse).collect();
            let nses: Vec<f64> = rows.iter().map(|r| r.nse).collect();
            ModelSummary {
                example,
                model,
                cells: rows.len(),
                failed: rows.iter().filter(|r| !r.rmse.is_finite()).count(),
                rmse: stats(&rmses),
                nse: stats(&nses),
            }
        })
        .collect()
}

/// Plain-text table of [`summarize`].
pub fn format_summary(summaries: &[ModelSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8}{:<12}{:>6}{:>8}{:>12}{:>12}{:>12}{:>10}{:>10}{:>10}",
        "example", "model", "cells", "failed", "rmse_med", "rmse_mean", "rmse_sd", "nse_med", "nse_mean", "nse_sd"
    );
    let f = |v: Option<Stats>, g: fn(Stats) -> f64| v.map(g).unwrap_or(f64::NAN);
    for m in summaries {
        let _ = writeln!(
            s,
            "{:<8}{:<12}{:>6}{:>8}{:>12.5}{:>12.5}{:>12.5}{:>10.4}{:>10.4}{:>10.4}",
            m.example,
            m.model,
            m.cells,
            m.failed,
            f(m.rmse, |s| s.median),
            f(m.rmse, |s| s.mean),
            f(m.rmse, |s| s.sd),
            f(m.nse, |s| s.median),
            f(m.nse, |s| s.mean),
            f(m.nse, |s| s.sd),
        );
    }
    s
}
