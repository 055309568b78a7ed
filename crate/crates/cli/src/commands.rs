use std::path::{Path, PathBuf};

use serde::Serialize;
use slicedmi::gaussian::{cca_coefficient, gaussian_smi_mc, gaussian_smi_upper_bound};
use slicedmi::independence::run_independence_experiment;
use slicedmi::rates::{run_rate_sweep, SlopeFit, SweepAxis};
use slicedmi::smine::{feature_extract, train_smine, Linear, SmineRun};
use slicedmi::synthetic::{generate, Scenario};
use slicedmi::{estimate_smi, SampleMatrix, SmiEstimate};

use crate::config::{as_comment, RunConfig, Unit};
use crate::data::{format_table, read_table};
use crate::error::{CliError, Result};

/// Where a command writes, and the config it embeds.
pub struct Sink {
    pub dir: PathBuf,
    pub config: RunConfig,
}

impl Sink {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let fail = |source| CliError::Output { path: path.display().to_string(), source };
        std::fs::create_dir_all(&self.dir).map_err(fail)?;
        std::fs::write(&path, contents).map_err(fail)?;
        Ok(path)
    }

    /// A TOML report with the resolved config under `[config]`.
    fn report<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            result: &'a T,
            config: &'a RunConfig,
        }
        let text = toml::to_string(&Doc { result, config: &self.config })
            .map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))?;
        self.write(name, &text)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Config(format!("cannot format {name}: {e}"));
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.write_record(r).map_err(fail)?;
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv");
        self.write(name, &(as_comment(&self.config) + &body))
    }

    fn unit(&self) -> Unit {
        self.config.unit
    }
}

fn section<T: Clone>(s: &Option<T>, name: &str) -> Result<T> {
    s.clone().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

fn load_pair(x: &Path, y: &Path) -> Result<(SampleMatrix, SampleMatrix)> {
    let (x, y) = (read_table(x)?, read_table(y)?);
    if x.rows() != y.rows() {
        return Err(CliError::Input(format!("X has {} rows but Y has {}", x.rows(), y.rows())));
    }
    Ok((x, y))
}

#[derive(Serialize)]
struct Quantiles {
    min: f64,
    q05: f64,
    q25: f64,
    median: f64,
    q75: f64,
    q95: f64,
    max: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    unit: Unit,
    value: f64,
    std_error: f64,
    n: usize,
    m: usize,
    per_slice: Quantiles,
}

fn summarize(est: &SmiEstimate, unit: Unit, n: usize) -> EstimateReport {
    let q = |p: f64| unit.convert(est.slice_quantile(p));
    EstimateReport {
        unit,
        value: unit.convert(est.value),
        std_error: unit.convert(est.std_error),
        n,
        m: est.per_slice.len(),
        per_slice: Quantiles {
            min: unit.convert(est.min_slice()),
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: unit.convert(est.max_slice()),
        },
    }
}

pub fn estimate(sink: &Sink) -> Result<String> {
    let s = section(&sink.config.estimate, "estimate")?;
    s.smi.validate().map_err(CliError::invalid)?;
    let (x, y) = load_pair(&s.x, &s.y)?;
    let est = estimate_smi(&x, &y, &s.smi)?;
    let report = summarize(&est, sink.unit(), x.rows());
    let path = sink.report("estimate.toml", &report)?;
    Ok(format!("SMI = {} {:?} ± {} -> {}", report.value, sink.unit(), report.std_error, path.display()))
}

#[derive(Serialize)]
struct OracleReport {
    unit: Unit,
    value: f64,
    std_error: f64,
    slices: usize,
    cca: f64,
    /// Absent when the canonical correlation is 1 (the bound is infinite).
    #[serde(skip_serializing_if = "Option::is_none")]
    upper_bound: Option<f64>,
}

pub fn oracle(sink: &Sink) -> Result<String> {
    let s = section(&sink.config.oracle, "oracle")?;
    let spec = s.gaussian_spec()?;
    let est = gaussian_smi_mc(&spec, s.slices, s.seed)?;
    let u = sink.unit();
    let report = OracleReport {
        unit: u,
        value: u.convert(est.value),
        std_error: u.convert(est.std_error),
        slices: s.slices,
        cca: cca_coefficient(&spec)?,
        upper_bound: gaussian_smi_upper_bound(&spec).ok().map(|b| u.convert(b)),
    };
    let path = sink.report("oracle.toml", &report)?;
    Ok(format!("Gaussian SMI = {} {u:?} ± {} -> {}", report.value, report.std_error, path.display()))
}

pub fn indep(sink: &Sink) -> Result<String> {
    let plan = section(&sink.config.indep, "indep")?;
    plan.validate().map_err(CliError::invalid)?;
    let rows = run_independence_experiment(&plan)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scenario.clone(),
                r.d.to_string(),
                r.n.to_string(),
                r.estimator.label().to_string(),
                r.auc.to_string(),
                r.trials.to_string(),
                r.m.to_string(),
                r.k.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    let header = ["scenario", "d", "n", "estimator", "auc", "trials", "m", "k", "seed"];
    let path = sink.csv("indep.csv", &header, &table)?;
    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("d={} n={}: {e}", r.d, r.n)))
        .collect();
    if let Some(first) = failed.first() {
        return Err(CliError::Estimator(slicedmi::SmiError::Numerical(format!(
            "{} failed cells written as NaN to {}; first: {first}",
            failed.len() / 2,
            path.display()
        ))));
    }
    Ok(format!("{} rows -> {}", table.len(), path.display()))
}

#[derive(Serialize)]
struct RatesReport {
    unit: Unit,
    truth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_joint: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_n: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_m: Option<SlopeFit>,
}

pub fn rates(sink: &Sink) -> Result<String> {
    let grid = section(&sink.config.rates, "rates")?;
    grid.validate().map_err(CliError::invalid)?;
    let report = run_rate_sweep(&grid)?;
    let u = sink.unit();
    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let axis = match r.axis {
                SweepAxis::Joint => "joint",
                SweepAxis::N => "n",
                SweepAxis::M => "m",
            };
            vec![axis.to_string(), r.n.to_string(), r.m.to_string(), u.convert(r.rmse).to_string(), r.trials.to_string()]
        })
        .collect();
    let csv_path = sink.csv("rates.csv", &["axis", "n", "m", "rmse", "trials"], &table)?;
    let summary = RatesReport {
        unit: u,
        truth: u.convert(report.truth),
        slope_joint: report.slope_joint,
        slope_n: report.slope_n,
        slope_m: report.slope_m,
    };
    let path = sink.report("rates.toml", &summary)?;
    let slopes: Vec<String> = [("joint", &summary.slope_joint), ("n", &summary.slope_n), ("m", &summary.slope_m)]
        .iter()
        .filter_map(|(name, fit)| fit.as_ref().map(|f| format!("{name} slope {:.3}", f.slope)))
        .collect();
    Ok(format!("{} -> {}, {}", slopes.join(", "), csv_path.display(), path.display()))
}

#[derive(Serialize)]
struct TrainReport {
    unit: Unit,
    estimate: f64,
    fold_estimates: Vec<f64>,
    epochs: usize,
}

fn write_run(sink: &Sink, name: &str, run: &SmineRun) -> Result<PathBuf> {
    let u = sink.unit();
    let curve: Vec<Vec<String>> =
        run.curve.iter().enumerate().map(|(e, v)| vec![(e + 1).to_string(), u.convert(*v).to_string()]).collect();
    sink.csv("curve.csv", &["epoch", "estimate"], &curve)?;
    sink.write("model.txt", &(as_comment(&sink.config) + &run.model.to_text()))?;
    let report = TrainReport {
        unit: u,
        estimate: u.convert(run.estimate),
        fold_estimates: run.fold_estimates.iter().map(|v| u.convert(*v)).collect(),
        epochs: run.curve.len(),
    };
    sink.report(name, &report)
}

pub fn smine(sink: &Sink) -> Result<String> {
    let s = section(&sink.config.smine, "smine")?;
    s.train.validate().map_err(CliError::invalid)?;
    let (x, y) = load_pair(&s.x, &s.y)?;
    let run = train_smine(&x, &y, &s.train)?;
    let path = write_run(sink, "smine.toml", &run)?;
    Ok(format!("S-MINE estimate = {} {:?} -> {}", sink.unit().convert(run.estimate), sink.unit(), path.display()))
}

/// One row per learned direction: its dominant input coordinate (1-based),
/// that coordinate's share `|a_j| / ‖a‖`, then the raw weights.
fn map_rows(map: &Linear) -> Vec<Vec<String>> {
    (0..map.rows)
        .map(|i| {
            let row = map.row(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let (j, top) = row.iter().enumerate().fold((0, 0.0f64), |best, (j, v)| if v.abs() > best.1 { (j, v.abs()) } else { best });
            let mut cells = vec![(i + 1).to_string(), (j + 1).to_string(), (top / norm).to_string()];
            cells.extend(row.iter().map(|v| v.to_string()));
            cells
        })
        .collect()
}

fn map_header(cols: usize) -> Vec<String> {
    let mut h = vec!["row".to_string(), "dominant".to_string(), "alignment".to_string()];
    h.extend((1..=cols).map(|j| format!("c{j}")));
    h
}

pub fn extract(sink: &Sink) -> Result<String> {
    let s = section(&sink.config.extract, "extract")?;
    s.train.validate().map_err(CliError::invalid)?;
    let (x, y) = load_pair(&s.x, &s.y)?;
    if s.r_x == 0 || s.r_x > x.cols() || s.r_y > y.cols() {
        return Err(CliError::Config(format!(
            "ranks r_x = {}, r_y = {} do not fit data of widths {} and {}",
            s.r_x,
            s.r_y,
            x.cols(),
            y.cols()
        )));
    }
    let run = feature_extract(&x, &y, s.r_x, s.r_y, &s.train)?;
    let maps = run.maps.as_ref().expect("feature extraction returns maps");
    sink.write("maps.txt", &(as_comment(&sink.config) + &maps.to_text()))?;
    let header = map_header(maps.a_x.cols);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv("a_x.csv", &header, &map_rows(&maps.a_x))?;
    if maps.a_y.rows > 0 {
        let header = map_header(maps.a_y.cols);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        sink.csv("a_y.csv", &header, &map_rows(&maps.a_y))?;
    }
    let path = write_run(sink, "extract.toml", &run)?;
    let dominant: Vec<String> = maps.dominant_coordinates().iter().map(|j| (j + 1).to_string()).collect();
    Ok(format!(
        "estimate = {} {:?}, dominant X coordinates [{}] -> {}",
        sink.unit().convert(run.estimate),
        sink.unit(),
        dominant.join(", "),
        path.display()
    ))
}

pub fn gen(sink: &Sink) -> Result<String> {
    let s = section(&sink.config.gen, "gen")?;
    s.scenario.validate().map_err(CliError::invalid)?;
    let (x, y) = generate(&Scenario { kind: s.scenario, n: s.n, seed: s.seed }).map_err(CliError::invalid)?;
    let header = as_comment(&sink.config);
    let px = sink.write("x.csv", &(header.clone() + &format_table(&x)))?;
    let py = sink.write("y.csv", &(header + &format_table(&y)))?;
    Ok(format!("{} samples of {} -> {}, {}", s.n, s.scenario.name(), px.display(), py.display()))
}
