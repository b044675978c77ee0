//! Report containers and their CSV form.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Reported for context; never fails a run.
    Info,
}

impl Outcome {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub experiment: String,
    pub metric: String,
    pub estimate: f64,
    pub se: f64,
    pub threshold: f64,
    pub n_samples: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub curve: String,
    pub x: f64,
    pub y: f64,
}

/// One diagnostic table, written as `<experiment>_<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    /// Wraps CSV text produced by one of the crate's writers.
    pub fn from_csv(name: &str, bytes: &[u8]) -> Self {
        let text = String::from_utf8_lossy(bytes);
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().split(',').map(str::to_string).collect();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Self { name: name.to_string(), header, rows }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    }
}

/// Builds a CSV row from displayable cells.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$(format!("{}", $x)),*] };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    /// The configuration the run used, as TOML.
    pub config_echo: String,
    pub tables: Vec<Table>,
    pub plots: Vec<PlotPoint>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, config_echo: String) -> Self {
        Self { experiment: experiment.to_string(), seed, config_echo, tables: Vec::new(), plots: Vec::new(), verdicts: Vec::new() }
    }

    pub fn verdict(&mut self, metric: impl Display, estimate: f64, se: f64, threshold: f64, n_samples: u64, outcome: Outcome) {
        self.verdicts.push(Verdict {
            experiment: self.experiment.clone(),
            metric: metric.to_string(),
            estimate,
            se,
            threshold,
            n_samples,
            outcome,
        });
    }

    pub fn plot(&mut self, curve: impl Display, x: f64, y: f64) {
        self.plots.push(PlotPoint { curve: curve.to_string(), x, y });
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn find_verdict(&self, metric: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.metric == metric)
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.outcome != Outcome::Fail)
    }

    pub fn write_verdicts<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "experiment,metric,estimate,se,threshold,n_samples,verdict")?;
        for v in &self.verdicts {
            writeln!(w, "{},{},{},{},{},{},{}", v.experiment, v.metric, v.estimate, v.se, v.threshold, v.n_samples, v.outcome.label())?;
        }
        Ok(())
    }

    pub fn write_plots<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "curve,x,y")?;
        for p in &self.plots {
            writeln!(w, "{},{},{}", p.curve, p.x, p.y)?;
        }
        Ok(())
    }

    /// Writes every table, the verdicts, the plot data and the config echo into `dir`.
    /// Returns the written file names.
    pub fn write_dir(&self, dir: &Path) -> io::Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        let mut names = Vec::new();
        let mut put = |name: String, bytes: Vec<u8>| -> io::Result<()> {
            fs::write(dir.join(&name), bytes)?;
            names.push(name);
            Ok(())
        };
        for t in &self.tables {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            put(format!("{}_{}.csv", self.experiment, t.name), buf)?;
        }
        let mut buf = Vec::new();
        self.write_verdicts(&mut buf)?;
        put(format!("{}_verdicts.csv", self.experiment), buf)?;
        if !self.plots.is_empty() {
            let mut buf = Vec::new();
            self.write_plots(&mut buf)?;
            put(format!("{}_plot_data.csv", self.experiment), buf)?;
        }
        put(format!("{}_config.toml", self.experiment), format!("# seed = {}\n{}", self.seed, self.config_echo).into_bytes())?;
        Ok(names)
    }
}
