//! Segmentation metrics over label masks.
//!
//! Per class `i` of a confusion matrix `counts[gt][pred]`:
//! `TP_i = counts[i][i]`, `FP_i = sum_{j != i} counts[j][i]`,
//! `FN_i = sum_{j != i} counts[i][j]`. All reported values are percentages.
//!
//! Classes with no ground-truth pixels are excluded from the class-accuracy
//! and mean-IoU averages, and the report lists them. Precision or recall
//! with a zero denominator is `None`, not zero.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PaletteSpec, SemanticClass};
use crate::error::{Error, Result};
use crate::raster::{read_rgb, Raster, Rgb};
use crate::scene::LabelPalette;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    /// Row-major `counts[gt * n + pred]`.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    /// From rows indexed by ground truth.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("confusion matrix rows must be square".into()));
        }
        Ok(Self {
            n,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.n + pred]
    }

    pub fn add(&mut self, gt: usize, pred: usize, count: u64) {
        self.counts[gt * self.n + pred] += count;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn true_positives(&self, i: usize) -> u64 {
        self.get(i, i)
    }

    pub fn false_positives(&self, i: usize) -> u64 {
        (0..self.n).filter(|&j| j != i).map(|j| self.get(j, i)).sum()
    }

    pub fn false_negatives(&self, i: usize) -> u64 {
        (0..self.n).filter(|&j| j != i).map(|j| self.get(i, j)).sum()
    }

    /// Number of ground-truth pixels of class `i`.
    pub fn support(&self, i: usize) -> u64 {
        (0..self.n).map(|j| self.get(i, j)).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::new(self.n);
        for g in 0..self.n {
            for p in 0..self.n {
                t.add(p, g, self.get(g, p));
            }
        }
        t
    }

    /// Sum of two matrices over the same classes.
    pub fn merged(mut self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}-class and {}-class matrices",
                self.n, other.n
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(self)
    }

    /// Sum counts under `mapping[source] = target`, producing `targets`
    /// classes. The mapping must cover every source class.
    pub fn remap(&self, mapping: &[usize], targets: usize) -> Result<Self> {
        if mapping.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "mapping covers {} of {} classes",
                mapping.len(),
                self.n
            )));
        }
        if let Some(bad) = mapping.iter().find(|&&t| t >= targets) {
            return Err(Error::InvalidArgument(format!("mapping target {bad} out of range")));
        }
        let mut out = Self::new(targets);
        for g in 0..self.n {
            for p in 0..self.n {
                out.add(mapping[g], mapping[p], self.get(g, p));
            }
        }
        Ok(out)
    }
}

/// Tally class-index masks of equal length.
pub fn confusion_indices(pred: &[usize], gt: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "prediction has {} pixels, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&p, &g) in pred.iter().zip(gt) {
        if p >= classes || g >= classes {
            return Err(Error::InvalidArgument(format!("class index {} out of range", p.max(g))));
        }
        cm.add(g, p, 1);
    }
    Ok(cm)
}

/// Class index per pixel of a palette-colored label raster.
pub fn class_mask(raster: &Raster<Rgb>, palette: &LabelPalette) -> Result<Vec<usize>> {
    let (w, _) = raster.dims();
    raster
        .data()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            palette.class_of(c).map(SemanticClass::index).ok_or(Error::UnknownColor {
                x: k as u32 % w,
                y: k as u32 / w,
                color: c,
            })
        })
        .collect()
}

/// Per-pixel tally of `(gt class, pred class)` over two label rasters.
pub fn confusion(pred: &Raster<Rgb>, gt: &Raster<Rgb>, palette: &LabelPalette) -> Result<ConfusionMatrix> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {:?}, ground truth {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let p = class_mask(pred, palette)?;
    let g = class_mask(gt, palette)?;
    confusion_indices(&p, &g, SemanticClass::ALL.len())
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn present(cm: &ConfusionMatrix) -> Vec<usize> {
    (0..cm.classes()).filter(|&i| cm.support(i) > 0).collect()
}

pub fn global_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    pct(cm.trace(), cm.total()).ok_or_else(|| Error::Undefined("empty confusion matrix".into()))
}

/// Mean per-class recall over classes present in the ground truth.
pub fn class_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let classes = present(cm);
    if classes.is_empty() {
        return Err(Error::Undefined("no class has ground-truth samples".into()));
    }
    let sum: f64 = classes
        .iter()
        .map(|&i| cm.true_positives(i) as f64 / cm.support(i) as f64)
        .sum();
    Ok(100.0 * sum / classes.len() as f64)
}

/// Per-class IoU (`None` for a zero denominator) and the mean over classes
/// present in the ground truth.
pub fn iou(cm: &ConfusionMatrix) -> Result<(Vec<Option<f64>>, f64)> {
    let per: Vec<Option<f64>> = (0..cm.classes())
        .map(|i| {
            let tp = cm.true_positives(i);
            pct(tp, tp + cm.false_positives(i) + cm.false_negatives(i))
        })
        .collect();
    let classes = present(cm);
    if classes.is_empty() {
        return Err(Error::Undefined("no class has ground-truth samples".into()));
    }
    let mean = classes.iter().map(|&i| per[i].unwrap_or(0.0)).sum::<f64>() / classes.len() as f64;
    Ok((per, mean))
}

/// Per-class `(precision, recall)`.
pub fn precision_recall(cm: &ConfusionMatrix) -> Vec<(Option<f64>, Option<f64>)> {
    (0..cm.classes())
        .map(|i| {
            let tp = cm.true_positives(i);
            (pct(tp, tp + cm.false_positives(i)), pct(tp, tp + cm.false_negatives(i)))
        })
        .collect()
}

/// Crop and weed merged into vegetation: `[soil, vegetation]`.
pub const VEGETATION_MAPPING: [usize; 3] = [0, 1, 1];
pub const VEGETATION_NAMES: [&str; 2] = ["soil", "vegetation"];

pub fn class_names() -> Vec<String> {
    SemanticClass::ALL.iter().map(|c| c.name().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub support: u64,
    pub iou: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub images: usize,
    pub pixels: u64,
    pub global_accuracy: f64,
    pub class_accuracy: f64,
    pub mean_iou: f64,
    pub classes: Vec<ClassMetrics>,
    /// Classes without ground-truth pixels, left out of CA and mean IoU.
    pub excluded: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix, names: &[String], images: usize) -> Result<Self> {
        if names.len() != cm.classes() {
            return Err(Error::DimensionMismatch(format!(
                "{} class names for {} classes",
                names.len(),
                cm.classes()
            )));
        }
        let (per_iou, mean_iou) = iou(cm)?;
        let pr = precision_recall(cm);
        let classes = (0..cm.classes())
            .map(|i| ClassMetrics {
                name: names[i].clone(),
                support: cm.support(i),
                iou: per_iou[i],
                precision: pr[i].0,
                recall: pr[i].1,
            })
            .collect();
        Ok(Self {
            images,
            pixels: cm.total(),
            global_accuracy: global_accuracy(cm)?,
            class_accuracy: class_accuracy(cm)?,
            mean_iou,
            classes,
            excluded: (0..cm.classes())
                .filter(|&i| cm.support(i) == 0)
                .map(|i| names[i].clone())
                .collect(),
            confusion: cm.rows(),
        })
    }

    /// Plain-text table: summary row, then one row per class.
    pub fn table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "undef".to_string(), |v| format!("{v:.2}"));
        let mut s = String::new();
        let _ = writeln!(s, "images {}  pixels {}", self.images, self.pixels);
        let _ = writeln!(s, "{:>8} {:>8} {:>8}", "GA", "CA", "mIoU");
        let _ = writeln!(
            s,
            "{:>8.2} {:>8.2} {:>8.2}",
            self.global_accuracy, self.class_accuracy, self.mean_iou
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:>10} {:>8} {:>8} {:>8}", "class", "support", "IoU", "P", "R");
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<12} {:>10} {:>8} {:>8} {:>8}",
                c.name,
                c.support,
                cell(c.iou),
                cell(c.precision),
                cell(c.recall)
            );
        }
        if !self.excluded.is_empty() {
            let _ = writeln!(s, "\nabsent from ground truth (excluded from CA, mIoU): {}", self.excluded.join(", "));
        }
        s
    }
}

/// Palette from a TOML or JSON palette table, or from a dataset manifest's
/// `palette` entry.
pub fn load_palette(path: &Path) -> Result<LabelPalette> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: PaletteSpec = if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let table = value.get("palette").cloned().unwrap_or(value);
        serde_json::from_value(table).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?
    } else {
        #[derive(Deserialize)]
        struct Wrapped {
            palette: PaletteSpec,
        }
        toml::from_str::<Wrapped>(&text)
            .map(|w| w.palette)
            .or_else(|_| toml::from_str::<PaletteSpec>(&text))
            .map_err(|e| Error::ConfigParse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
    };
    Ok(LabelPalette::from(&spec))
}

/// Mask files of a directory: `*_label.png` when present, else every PNG.
pub fn mask_files(dir: &Path) -> Result<Vec<String>> {
    let mut pngs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".png") && entry.path().is_file() {
            pngs.push(name);
        }
    }
    let labels: Vec<String> = pngs.iter().filter(|n| n.ends_with("_label.png")).cloned().collect();
    let mut files = if labels.is_empty() { pngs } else { labels };
    files.sort();
    Ok(files)
}

/// Confusion matrix summed over mask pairs matched by file name.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, palette: &LabelPalette) -> Result<(ConfusionMatrix, usize)> {
    let pred: BTreeSet<String> = mask_files(pred_dir)?.into_iter().collect();
    let gt: BTreeSet<String> = mask_files(gt_dir)?.into_iter().collect();
    if pred != gt {
        let missing: Vec<&String> = gt.difference(&pred).collect();
        let extra: Vec<&String> = pred.difference(&gt).collect();
        let mut msg = String::new();
        if !missing.is_empty() {
            let _ = write!(msg, "missing predictions: {}", join(&missing));
        }
        if !extra.is_empty() {
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            let _ = write!(msg, "predictions without ground truth: {}", join(&extra));
        }
        return Err(Error::FileSetMismatch(msg));
    }
    if gt.is_empty() {
        return Err(Error::FileSetMismatch(format!("no masks in {}", gt_dir.display())));
    }
    let names: Vec<&String> = gt.iter().collect();
    let matrices: Vec<ConfusionMatrix> = names
        .par_iter()
        .map(|name| {
            let (p, g): (PathBuf, PathBuf) = (pred_dir.join(name), gt_dir.join(name));
            confusion(&read_rgb(&p)?, &read_rgb(&g)?, palette).map_err(|e| match e {
                Error::DimensionMismatch(m) => Error::DimensionMismatch(format!("{name}: {m}")),
                Error::UnknownColor { x, y, color } => {
                    Error::InvalidArgument(format!("{name}: unknown label color {color:?} at pixel ({x}, {y})"))
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let total = matrices
        .iter()
        .try_fold(ConfusionMatrix::new(SemanticClass::ALL.len()), |acc, m| acc.merged(m))?;
    Ok((total, names.len()))
}

fn join(names: &[&String]) -> String {
    names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}

/// Full report for two mask directories, optionally with crop and weed
/// merged into one vegetation class.
pub fn evaluate(pred_dir: &Path, gt_dir: &Path, palette: &LabelPalette, merge_vegetation: bool) -> Result<MetricsReport> {
    let (cm, images) = evaluate_dirs(pred_dir, gt_dir, palette)?;
    if merge_vegetation {
        let merged = cm.remap(&VEGETATION_MAPPING, 2)?;
        let names: Vec<String> = VEGETATION_NAMES.iter().map(|s| s.to_string()).collect();
        MetricsReport::from_confusion(&merged, &names, images)
    } else {
        MetricsReport::from_confusion(&cm, &class_names(), images)
    }
}
