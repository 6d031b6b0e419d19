//! Hyperparameter grids, resumable sweep records, best-run selection and
//! Markdown result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::HyperParams;

/// Candidate values per knob. Runs are the cross product, enumerated in
/// field order with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    /// Multipliers on the base `lr_peak`.
    pub lr_scale: Vec<f64>,
    pub label_smoothing: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub warmup_steps: Vec<u64>,
    pub patience: Vec<usize>,
    pub beam_size: Vec<usize>,
    pub sp: Vec<bool>,
    pub sa: Vec<bool>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lr_scale: vec![1.0],
            label_smoothing: vec![0.1],
            batch_size: vec![32],
            warmup_steps: vec![250],
            patience: vec![10],
            beam_size: vec![10],
            sp: vec![false],
            sa: vec![true],
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: usize,
    pub lr_scale: f64,
    pub hyper: HyperParams,
    pub sp: bool,
    pub sa: bool,
}

impl Grid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let g: Grid = toml::from_str(text).map_err(|e| Error::config("grid", e.message()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Grid::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    fn sizes(&self) -> [(&'static str, usize); 8] {
        [
            ("lr_scale", self.lr_scale.len()),
            ("label_smoothing", self.label_smoothing.len()),
            ("batch_size", self.batch_size.len()),
            ("warmup_steps", self.warmup_steps.len()),
            ("patience", self.patience.len()),
            ("beam_size", self.beam_size.len()),
            ("sp", self.sp.len()),
            ("sa", self.sa.len()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((name, _)) = self.sizes().into_iter().find(|&(_, n)| n == 0) {
            return Err(Error::config(name, "axis is empty"));
        }
        if let Some(s) = self.lr_scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::config("lr_scale", format!("{s} is not a positive multiplier")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sizes().iter().map(|&(_, n)| n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `run`-th configuration in lexicographic axis order.
    pub fn config(&self, run: usize, base: &HyperParams) -> RunConfig {
        let sizes = self.sizes();
        let mut idx = [0usize; 8];
        let mut rest = run;
        for (slot, &(_, n)) in idx.iter_mut().zip(&sizes).rev() {
            *slot = rest % n;
            rest /= n;
        }
        let lr_scale = self.lr_scale[idx[0]];
        RunConfig {
            run,
            lr_scale,
            hyper: HyperParams {
                lr_peak: base.lr_peak * lr_scale,
                label_smoothing: self.label_smoothing[idx[1]],
                batch_size: self.batch_size[idx[2]],
                warmup_steps: self.warmup_steps[idx[3]],
                patience: self.patience[idx[4]],
                beam_size: self.beam_size[idx[5]],
                ..base.clone()
            },
            sp: self.sp[idx[6]],
            sa: self.sa[idx[7]],
        }
    }

    pub fn configs(&self, base: &HyperParams) -> Vec<RunConfig> {
        (0..self.len()).map(|i| self.config(i, base)).collect()
    }
}

/// Result of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub dev_bleu: f64,
    pub dev_chrf: f64,
    pub best_epoch: usize,
}

/// One sweep row, persisted as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub run: usize,
    pub lr: f64,
    #[serde(default = "one")]
    pub lr_scale: f64,
    pub label_smoothing: f64,
    pub batch_size: usize,
    pub warmup_steps: u64,
    pub patience: usize,
    pub beam_size: usize,
    #[serde(default)]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    pub sp: bool,
    pub sa: bool,
    #[serde(default)]
    pub dev_bleu: Option<f64>,
    #[serde(default)]
    pub dev_chrf: Option<f64>,
    #[serde(default)]
    pub best_epoch: Option<usize>,
    #[serde(default)]
    pub wall_time_sec: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn one() -> f64 {
    1.0
}

impl ExperimentRecord {
    pub fn from_config(c: &RunConfig) -> Self {
        ExperimentRecord {
            run: c.run,
            lr: c.hyper.lr_peak,
            lr_scale: c.lr_scale,
            label_smoothing: c.hyper.label_smoothing,
            batch_size: c.hyper.batch_size,
            warmup_steps: c.hyper.warmup_steps,
            patience: c.hyper.patience,
            beam_size: c.hyper.beam_size,
            max_epochs: c.hyper.max_epochs,
            seed: c.hyper.seed,
            sp: c.sp,
            sa: c.sa,
            dev_bleu: None,
            dev_chrf: None,
            best_epoch: None,
            wall_time_sec: 0.0,
            error: None,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.dev_bleu.is_some()
    }

    /// Same grid point, ignoring outcome and timing.
    fn same_config(&self, other: &ExperimentRecord) -> bool {
        let strip = |r: &ExperimentRecord| ExperimentRecord {
            dev_bleu: None,
            dev_chrf: None,
            best_epoch: None,
            wall_time_sec: 0.0,
            error: None,
            ..r.clone()
        };
        strip(self) == strip(other)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes") + "\n"
    }
}

/// Parses a records file. A trailing line without a newline is an
/// interrupted write and is ignored; the returned offset marks the end of
/// the last complete line.
pub fn parse_records(text: &str) -> Result<(Vec<ExperimentRecord>, usize)> {
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    let mut out = Vec::new();
    for (i, line) in text[..complete].lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok((out, complete))
}

pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_records(&text)?.0)
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Maximum number of runs, taken as a prefix of the grid order.
    pub budget: Option<usize>,
    /// Worker threads; 1 runs sequentially.
    pub parallel: usize,
    /// JSON Lines file; existing complete records are kept and skipped.
    pub records_path: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            budget: None,
            parallel: 1,
            records_path: None,
        }
    }
}

fn open_records(path: &Path, planned: &[RunConfig]) -> Result<(File, BTreeMap<usize, ExperimentRecord>)> {
    let mut done = BTreeMap::new();
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (records, complete) = parse_records(&text)?;
        for r in records {
            if let Some(c) = planned.get(r.run) {
                let mut expected = ExperimentRecord::from_config(c);
                expected.lr = r.lr;
                if !r.same_config(&expected) || (r.lr - c.hyper.lr_peak).abs() > 1e-12 * c.hyper.lr_peak.abs() {
                    return Err(Error::config(
                        "records",
                        format!("{}: run {} does not match this grid", path.display(), r.run),
                    ));
                }
            }
            done.insert(r.run, r);
        }
        if complete < text.len() {
            let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
            f.set_len(complete as u64).map_err(|e| Error::io(path, e))?;
        }
    } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    Ok((f, done))
}

fn execute<F>(c: &RunConfig, run: &F) -> ExperimentRecord
where
    F: Fn(&RunConfig) -> Result<RunOutcome> + Sync,
{
    let mut r = ExperimentRecord::from_config(c);
    let start = Instant::now();
    match run(c) {
        Ok(o) if o.dev_bleu.is_finite() && o.dev_chrf.is_finite() => {
            r.dev_bleu = Some(o.dev_bleu);
            r.dev_chrf = Some(o.dev_chrf);
            r.best_epoch = Some(o.best_epoch);
        }
        Ok(_) => r.error = Some("non-finite dev score".into()),
        Err(e) => r.error = Some(e.to_string()),
    }
    r.wall_time_sec = start.elapsed().as_secs_f64();
    r
}

/// Runs the grid with `run` as the trainer. Failed runs are recorded with
/// their error and the sweep continues. Records are appended to the records
/// file as each run finishes; the result is ordered by run index.
pub fn run_grid_with<F>(grid: &Grid, base: &HyperParams, opts: &SweepOptions, run: F) -> Result<Vec<ExperimentRecord>>
where
    F: Fn(&RunConfig) -> Result<RunOutcome> + Sync,
{
    grid.validate()?;
    if opts.budget == Some(0) {
        return Err(Error::config("budget", "must be at least 1"));
    }
    if opts.parallel == 0 {
        return Err(Error::config("parallel", "must be at least 1"));
    }
    let n = opts.budget.map_or(grid.len(), |b| b.min(grid.len()));
    let planned: Vec<RunConfig> = (0..n).map(|i| grid.config(i, base)).collect();
    let (mut file, mut done) = match &opts.records_path {
        Some(p) => {
            let (f, d) = open_records(p, &planned)?;
            (Some((f, p.clone())), d)
        }
        None => (None, BTreeMap::new()),
    };
    let pending: Vec<&RunConfig> = planned.iter().filter(|c| !done.contains_key(&c.run)).collect();
    let mut persist = |r: ExperimentRecord| -> Result<()> {
        if let Some((f, p)) = &mut file {
            f.write_all(r.to_json_line().as_bytes()).map_err(|e| Error::io(&*p, e))?;
            f.flush().map_err(|e| Error::io(&*p, e))?;
        }
        done.insert(r.run, r);
        Ok(())
    };
    if opts.parallel == 1 {
        for c in pending {
            persist(execute(c, &run))?;
        }
    } else {
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|s| -> Result<()> {
            for _ in 0..opts.parallel.min(pending.len()) {
                let tx = tx.clone();
                let (next, pending, run) = (&next, &pending, &run);
                s.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(c) = pending.get(i) else { break };
                    if tx.send(execute(c, run)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for r in rx {
                persist(r)?;
            }
            Ok(())
        })?;
    }
    Ok(done.into_values().filter(|r| r.run < n).collect())
}

/// Best successful record: highest dev BLEU, then higher chrF++, then
/// smaller batch size, then lower run index, then earlier position.
pub fn select_best(records: &[ExperimentRecord]) -> Result<&ExperimentRecord> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.succeeded())
        .max_by(|(ia, a), (ib, b)| {
            let key = |r: &ExperimentRecord| (r.dev_bleu.unwrap_or(f64::NEG_INFINITY), r.dev_chrf.unwrap_or(f64::NEG_INFINITY));
            let (ba, ca) = key(a);
            let (bb, cb) = key(b);
            ba.total_cmp(&bb)
                .then(ca.total_cmp(&cb))
                .then(b.batch_size.cmp(&a.batch_size))
                .then(b.run.cmp(&a.run))
                .then(ib.cmp(ia))
        })
        .map(|(_, r)| r)
        .ok_or(Error::NoResult)
}

/// Result table layouts, named after the tables they mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// LR, batch size, BLEU, chrF++.
    LrBatch,
    /// LS, BLEU, chrF++.
    LabelSmoothing,
    /// SP, SA, BLEU.
    Augmentation,
    /// All nine knobs and BLEU.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Lr,
    Ls,
    Batch,
    Sp,
    Sa,
    Warmup,
    Patience,
    Beam,
    Bleu,
    Chrf,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table3" | "lr-batch" => Ok(Layout::LrBatch),
            "table4" | "label-smoothing" => Ok(Layout::LabelSmoothing),
            "table5" | "augmentation" => Ok(Layout::Augmentation),
            "table6" | "full" => Ok(Layout::Full),
            _ => Err(Error::Layout(s.to_string())),
        }
    }
}

impl Layout {
    fn columns(self) -> &'static [(Column, &'static str, &'static str)] {
        use Column::*;
        match self {
            Layout::LrBatch => &[
                (Lr, "LR", ":---"),
                (Batch, "batch size", "---:"),
                (Bleu, "BLEU", "---:"),
                (Chrf, "chrF++", "---:"),
            ],
            Layout::LabelSmoothing => &[(Ls, "LS", ":---"), (Bleu, "BLEU", "---:"), (Chrf, "chrF++", "---:")],
            Layout::Augmentation => &[(Sp, "SP", ":---:"), (Sa, "SA", ":---:"), (Bleu, "BLEU", "---:")],
            Layout::Full => &[
                (Lr, "LR", ":---"),
                (Ls, "LS", "---:"),
                (Batch, "Batch size", "---:"),
                (Sp, "SP", "---:"),
                (Sa, "SA", "---:"),
                (Warmup, "Warm up steps", "---:"),
                (Patience, "Patience", "---:"),
                (Beam, "Beam size", "---:"),
                (Bleu, "BLEU", "---:"),
            ],
        }
    }
}

fn bool_cell(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn score_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

fn cell(r: &ExperimentRecord, c: Column) -> String {
    match c {
        Column::Lr => format!("{:e}", r.lr),
        Column::Ls => format!("{:.1}", r.label_smoothing),
        Column::Batch => r.batch_size.to_string(),
        Column::Sp => bool_cell(r.sp).into(),
        Column::Sa => bool_cell(r.sa).into(),
        Column::Warmup => r.warmup_steps.to_string(),
        Column::Patience => r.patience.to_string(),
        Column::Beam => r.beam_size.to_string(),
        Column::Bleu => score_cell(r.dev_bleu),
        Column::Chrf => score_cell(r.dev_chrf),
    }
}

fn row(cells: impl IntoIterator<Item = impl AsRef<str>>) -> String {
    let mut s = String::from("|");
    for c in cells {
        let _ = write!(s, " {} |", c.as_ref());
    }
    s.push('\n');
    s
}

/// Markdown table with one row per record, in record order. Scores print
/// with one decimal; a missing score prints as `-`.
pub fn render_table(records: &[ExperimentRecord], layout: Layout) -> String {
    let cols = layout.columns();
    let mut s = row(cols.iter().map(|c| c.1));
    s.push_str(&row(cols.iter().map(|c| c.2)));
    for r in records {
        s.push_str(&row(cols.iter().map(|c| cell(r, c.0))));
    }
    s
}

pub fn render_tables(records: &[ExperimentRecord], layout: &str) -> Result<String> {
    Ok(render_table(records, layout.parse()?))
}

fn parse_cell<T: std::str::FromStr>(v: &str, line: usize, name: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} value `{v}`"),
    })
}

fn parse_bool(v: &str, line: usize) -> Result<bool> {
    match v {
        "True" => Ok(true),
        "False" => Ok(false),
        _ => Err(Error::Parse {
            line,
            message: format!("bad boolean `{v}`"),
        }),
    }
}

/// Reads a table written by [`render_table`]. Columns absent from the
/// layout take their grid defaults.
pub fn parse_table(text: &str, layout: Layout) -> Result<Vec<ExperimentRecord>> {
    let cols = layout.columns();
    let split = |l: &str| -> Vec<String> {
        l.trim()
            .trim_start_matches('|')
            .trim_end_matches('|')
            .split('|')
            .map(|c| c.trim().to_string())
            .collect()
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<String> = lines.next().map(|(_, l)| split(l)).unwrap_or_default();
    if header.iter().map(String::as_str).ne(cols.iter().map(|c| c.1)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("header {header:?} does not match the layout"),
        });
    }
    lines.next();
    let defaults = ExperimentRecord::from_config(&Grid::default().config(0, &HyperParams::default()));
    let mut out = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let cells = split(l);
        if cells.len() != cols.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} cells, got {}", cols.len(), cells.len()),
            });
        }
        let mut r = ExperimentRecord {
            run: out.len(),
            ..defaults.clone()
        };
        for (&(c, name, _), v) in cols.iter().zip(&cells) {
            let score = |v: &str| -> Result<Option<f64>> {
                if v == "-" {
                    Ok(None)
                } else {
                    parse_cell(v, line, name).map(Some)
                }
            };
            match c {
                Column::Lr => r.lr = parse_cell(v, line, name)?,
                Column::Ls => r.label_smoothing = parse_cell(v, line, name)?,
                Column::Batch => r.batch_size = parse_cell(v, line, name)?,
                Column::Sp => r.sp = parse_bool(v, line)?,
                Column::Sa => r.sa = parse_bool(v, line)?,
                Column::Warmup => r.warmup_steps = parse_cell(v, line, name)?,
                Column::Patience => r.patience = parse_cell(v, line, name)?,
                Column::Beam => r.beam_size = parse_cell(v, line, name)?,
                Column::Bleu => r.dev_bleu = score(v)?,
                Column::Chrf => r.dev_chrf = score(v)?,
            }
        }
        out.push(r);
    }
    Ok(out)
}
