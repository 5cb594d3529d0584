//! Datasets: a synthetic multi-view generator and CSV ingestion.
//!
//! In the multi-view generator every class owns one signal direction per view.
//! Signals live in disjoint coordinate blocks of width `view_dim`, block
//! `(class, view)` starting at `(class·views + view)·view_dim`, so all signals
//! are orthonormal and each view spans its own subspace. A sample of class `c`
//! is `Σ_v s_v·signal(c, v) + noise`; some samples carry a single view. Dropping
//! a view zeroes every coordinate of that view's blocks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub splits: Vec<Split>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Inputs and labels of one split, in dataset order.
    pub fn subset(&self, split: Split) -> (Matrix, Vec<usize>) {
        let idx = self.indices(split);
        (self.inputs.select_rows(&idx), idx.iter().map(|&i| self.labels[i]).collect())
    }

    /// Every class must appear in the training split; the validation split must
    /// be nonempty when it is going to be used for temperature scaling.
    pub fn validate(&self, need_val: bool) -> Result<()> {
        let mut seen = vec![false; self.classes];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= self.classes {
                return Err(Error::LabelOutOfRange { label: l, classes: self.classes });
            }
            if self.splits[i] == Split::Train {
                seen[l] = true;
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::config("dataset", format!("class {c} has no training samples")));
        }
        if need_val && !self.splits.contains(&Split::Val) {
            return Err(Error::EmptyDataset("validation split"));
        }
        Ok(())
    }
}

/// Test-time corruption of multi-view inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    None,
    DropView(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewSpec {
    pub classes: usize,
    pub views: usize,
    pub view_dim: usize,
    pub input_dim: usize,
    pub noise: f64,
    /// Present views get strength `scale_v · U(strength_min, strength_max)`.
    pub strength_min: f64,
    pub strength_max: f64,
    /// Per-view strength multipliers (length `views`).
    pub view_scale: Vec<f64>,
    /// Probability that a sample carries only one (uniformly chosen) view.
    pub single_view_fraction: f64,
    pub corruption: Corruption,
}

impl Default for MultiViewSpec {
    fn default() -> Self {
        MultiViewSpec {
            classes: 4,
            views: 2,
            view_dim: 4,
            input_dim: 40,
            noise: 0.5,
            strength_min: 0.5,
            strength_max: 1.5,
            view_scale: vec![1.0, 1.0],
            single_view_fraction: 0.2,
            corruption: Corruption::None,
        }
    }
}

/// Per-split sample counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl MultiViewSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.views == 0 || self.view_dim == 0 {
            return Err(Error::config("multiview", "need at least 2 classes, 1 view and view_dim ≥ 1"));
        }
        if self.classes * self.views * self.view_dim > self.input_dim {
            return Err(Error::config(
                "input_dim",
                format!(
                    "{} classes × {} views × {} dims do not fit in {} inputs",
                    self.classes, self.views, self.view_dim, self.input_dim
                ),
            ));
        }
        if self.view_scale.len() != self.views {
            return Err(Error::config("view_scale", format!("need {} entries", self.views)));
        }
        if self.view_scale.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::config("view_scale", "must be nonnegative"));
        }
        if !(0.0 <= self.strength_min && self.strength_min <= self.strength_max) {
            return Err(Error::config("strength_min", "need 0 ≤ strength_min ≤ strength_max"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.single_view_fraction) {
            return Err(Error::config("single_view_fraction", "must lie in [0, 1]"));
        }
        if let Corruption::DropView(k) = self.corruption {
            if k >= self.views {
                return Err(Error::config("corruption", format!("view {k} does not exist")));
            }
        }
        Ok(())
    }

    fn block_start(&self, class: usize, view: usize) -> usize {
        (class * self.views + view) * self.view_dim
    }

    /// Draws one unit signal direction per `(class, view)` block.
    pub fn draw_signals(&self, rng: &mut RngState) -> Vec<Vec<Vec<f64>>> {
        (0..self.classes)
            .map(|c| {
                (0..self.views)
                    .map(|v| {
                        let mut s = vec![0.0; self.input_dim];
                        let start = self.block_start(c, v);
                        let block = &mut s[start..start + self.view_dim];
                        loop {
                            block.iter_mut().for_each(|x| *x = rng.normal());
                            let len = dot(block, block).sqrt();
                            if len > 1e-8 {
                                block.iter_mut().for_each(|x| *x /= len);
                                break;
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }

    /// Copy of `x` with every coordinate of view `view` set to zero.
    pub fn drop_view(&self, x: &Matrix, view: usize) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for c in 0..self.classes {
                let start = self.block_start(c, view);
                row[start..start + self.view_dim].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        out
    }
}

/// A generated multi-view dataset together with its signal directions.
#[derive(Debug, Clone)]
pub struct MultiViewData {
    pub dataset: Dataset,
    /// `signals[class][view]`, unit vectors of length `input_dim`.
    pub signals: Vec<Vec<Vec<f64>>>,
}

/// Generates train, validation and test samples in that order. Labels cycle
/// through the classes so every split is balanced. A `DropView` corruption is
/// applied to the test rows only.
pub fn gen_multiview(spec: &MultiViewSpec, counts: SplitCounts, rng: &mut RngState) -> Result<MultiViewData> {
    spec.validate()?;
    let signals = spec.draw_signals(rng);
    let total = counts.train + counts.val + counts.test;
    let mut inputs = Matrix::zeros(total, spec.input_dim);
    let mut labels = Vec::with_capacity(total);
    let mut splits = Vec::with_capacity(total);
    let mut strengths = vec![0.0; spec.views];
    for i in 0..total {
        let split = if i < counts.train {
            Split::Train
        } else if i < counts.train + counts.val {
            Split::Val
        } else {
            Split::Test
        };
        let local = match split {
            Split::Train => i,
            Split::Val => i - counts.train,
            Split::Test => i - counts.train - counts.val,
        };
        let class = local % spec.classes;

        let single = rng.uniform(0.0, 1.0) < spec.single_view_fraction;
        let only = rng.below(spec.views);
        for (v, s) in strengths.iter_mut().enumerate() {
            let base = rng.uniform(spec.strength_min, spec.strength_max);
            *s = if single && v != only { 0.0 } else { spec.view_scale[v] * base };
        }
        let row = inputs.row_mut(i);
        for x in row.iter_mut() {
            *x = spec.noise * rng.normal();
        }
        for (v, s) in strengths.iter().enumerate() {
            for (x, sig) in row.iter_mut().zip(&signals[class][v]) {
                *x += s * sig;
            }
        }
        labels.push(class);
        splits.push(split);
    }

    if let Corruption::DropView(k) = spec.corruption {
        let test_rows: Vec<usize> = (0..total).filter(|&i| splits[i] == Split::Test).collect();
        let corrupted = spec.drop_view(&inputs.select_rows(&test_rows), k);
        for (o, &i) in test_rows.iter().enumerate() {
            inputs.row_mut(i).copy_from_slice(corrupted.row(o));
        }
    }

    Ok(MultiViewData {
        dataset: Dataset {
            inputs,
            labels,
            classes: spec.classes,
            splits,
        },
        signals,
    })
}

/// Fractions for the seeded train/val/test split of a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.8, val: 0.1, test: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvOptions {
    /// Class count; inferred as `max label + 1` when absent.
    pub classes: Option<usize>,
    pub fractions: SplitFractions,
    pub seed: u64,
}

/// Assigns split tags by a seeded shuffle: the first `round(train·N)` shuffled
/// rows train, the next `round(val·N)` validate, the rest test.
pub fn assign_splits(n: usize, fractions: &SplitFractions, seed: u64) -> Result<Vec<Split>> {
    let f = fractions;
    if [f.train, f.val, f.test].iter().any(|v| !(*v >= 0.0)) || (f.train + f.val + f.test - 1.0).abs() > 1e-9 {
        return Err(Error::config("split", "fractions must be nonnegative and sum to 1"));
    }
    let n_train = (f.train * n as f64).round() as usize;
    let n_val = ((f.val * n as f64).round() as usize).min(n - n_train.min(n));
    let perm = RngState::derive(seed, crate::rng::streams::SPLIT).permutation(n);
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in perm.iter().enumerate() {
        if rank < n_train {
            splits[i] = Split::Train;
        } else if rank < n_train + n_val {
            splits[i] = Split::Val;
        }
    }
    Ok(splits)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Csv { path: path.to_path_buf(), line, message: e.to_string() }
}

/// Reads `label,x_1,...,x_d` rows. A first line whose label field is not an
/// integer is taken as a header. Errors carry the 1-based line number.
pub fn load_csv_dataset(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Csv { path: path.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let lineno = record.position().map_or(0, |p| p.line() as usize);
        let first = record.get(0).unwrap_or("");
        if record.len() == 1 && first.is_empty() {
            continue;
        }
        let label = match first.parse::<i64>() {
            Ok(l) => l,
            Err(_) if lineno == 1 => continue,
            Err(_) => return Err(err(lineno, format!("label `{first}` is not an integer"))),
        };
        if label < 0 {
            return Err(err(lineno, format!("label {label} is negative")));
        }
        let label = label as usize;
        if let Some(c) = opts.classes {
            if label >= c {
                return Err(err(lineno, format!("label {label} out of range for {c} classes")));
            }
        }
        let values = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(lineno, format!("`{f}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(err(lineno, format!("{} features, expected {w}", values.len())));
            }
            Some(_) => {}
        }
        rows.push(values);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset("csv file has no data rows"));
    }
    let classes = opts.classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let splits = assign_splits(rows.len(), &opts.fractions, opts.seed)?;
    Ok(Dataset {
        inputs: Matrix::from_rows(&rows)?,
        labels,
        classes,
        splits,
    })
}

/// Writes `label,x_0,...` with a header line; values use shortest round-trip
/// formatting so reading back gives identical numbers.
pub fn write_csv_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = std::iter::once("label".to_string()).chain((0..ds.input_dim()).map(|j| format!("x{j}")));
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for (i, label) in ds.labels.iter().enumerate() {
        let fields = std::iter::once(label.to_string()).chain(ds.inputs.row(i).iter().map(f64::to_string));
        w.write_record(fields).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}
