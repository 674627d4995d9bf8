//! Per-region error metrics and prediction/label distribution discrepancy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Region, ShotRegions};
use crate::error::{Error, Result};
use crate::label_space::LabelSpace;

pub const DEFAULT_GM_EPS: f64 = 1e-10;

pub fn mae(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64)
}

/// Geometric mean of `|e_i| + eps`, computed in log space.
pub fn gm(errors: &[f64], eps: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mean_log = errors.iter().map(|e| (e.abs() + eps).ln()).sum::<f64>() / errors.len() as f64;
    Ok(mean_log.exp())
}

/// Earth mover's distance between two histograms on the same bins, after
/// normalizing each to unit mass: `delta_y * sum |CDF_1 - CDF_2|`.
pub fn wasserstein1_hist(h1: &[f64], h2: &[f64], delta_y: f64) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::shape(h1.len(), h2.len()));
    }
    let (m1, m2): (f64, f64) = (h1.iter().sum(), h2.iter().sum());
    if m1 <= 0.0 || m2 <= 0.0 {
        return Err(Error::EmptyHistogram);
    }
    let mut c1 = 0.0;
    let mut c2 = 0.0;
    let mut total = 0.0;
    for (a, b) in h1.iter().zip(h2) {
        c1 += a / m1;
        c2 += b / m2;
        total += (c1 - c2).abs();
    }
    Ok(delta_y * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKey {
    All,
    Many,
    Median,
    Few,
}

impl RegionKey {
    pub const ORDER: [RegionKey; 4] = [RegionKey::All, RegionKey::Many, RegionKey::Median, RegionKey::Few];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionKey::All => "all",
            RegionKey::Many => "many",
            RegionKey::Median => "median",
            RegionKey::Few => "few",
        }
    }
}

impl From<Region> for RegionKey {
    fn from(r: Region) -> Self {
        match r {
            Region::Many => RegionKey::Many,
            Region::Median => RegionKey::Median,
            Region::Few => RegionKey::Few,
        }
    }
}

/// Metrics of one region; `mae` and `gm` are `None` when it has no samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub region: RegionKey,
    pub mae: Option<f64>,
    pub gm: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    pub centers: Vec<f64>,
    pub labels: Vec<u64>,
    pub predictions: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub regions: Vec<RegionMetrics>,
    pub wasserstein1: f64,
    pub gm_eps: f64,
    pub histograms: Histograms,
    /// Resolved run configuration, when the report comes from a run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<BTreeMap<String, String>>,
}

impl RegionReport {
    pub fn region(&self, key: RegionKey) -> &RegionMetrics {
        self.regions.iter().find(|r| r.region == key).expect("report carries all regions")
    }

    pub fn few_mae(&self) -> Option<f64> {
        self.region(RegionKey::Few).mae
    }
}

/// MAE/GM for all samples and per shot region, plus the histogram pair and
/// its Wasserstein-1 distance.
pub fn region_metrics(
    predictions: &[f64],
    targets: &[f64],
    regions: &ShotRegions,
    space: &LabelSpace,
    gm_eps: f64,
) -> Result<RegionReport> {
    if predictions.len() != targets.len() {
        return Err(Error::shape(targets.len(), predictions.len()));
    }
    if regions.regions.len() != space.num_bins() {
        return Err(Error::shape(space.num_bins(), regions.regions.len()));
    }
    if let Some(i) = predictions.iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(i));
    }
    let mut errors: BTreeMap<RegionKey, Vec<f64>> = BTreeMap::new();
    let mut label_hist = vec![0u64; space.num_bins()];
    let mut pred_hist = vec![0u64; space.num_bins()];
    for (&p, &t) in predictions.iter().zip(targets) {
        let bin = space.bin_index(t)?;
        label_hist[bin] += 1;
        pred_hist[space.bin_index(p)?] += 1;
        let e = p - t;
        errors.entry(RegionKey::All).or_default().push(e);
        errors.entry(regions.region_of_bin(bin).into()).or_default().push(e);
    }
    let regions = RegionKey::ORDER
        .iter()
        .map(|&key| {
            let errs = errors.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            if errs.is_empty() {
                Ok(RegionMetrics { region: key, mae: None, gm: None, count: 0 })
            } else {
                Ok(RegionMetrics { region: key, mae: Some(mae(errs)?), gm: Some(gm(errs, gm_eps)?), count: errs.len() })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let to_f = |h: &[u64]| h.iter().map(|&c| c as f64).collect::<Vec<_>>();
    let wasserstein1 = if predictions.is_empty() {
        0.0
    } else {
        wasserstein1_hist(&to_f(&pred_hist), &to_f(&label_hist), space.delta_y())?
    };
    Ok(RegionReport {
        regions,
        wasserstein1,
        gm_eps,
        histograms: Histograms { centers: space.centers().to_vec(), labels: label_hist, predictions: pred_hist },
        config: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |v| format!("{v:?}"))
}

pub fn report_to_json(report: &RegionReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// `region,metric,value` rows; config entries become leading `#` lines.
pub fn report_to_csv(report: &RegionReport) -> String {
    let mut out = String::new();
    if let Some(cfg) = &report.config {
        for (k, v) in cfg {
            let _ = writeln!(out, "# {k}={v}");
        }
    }
    out.push_str("region,metric,value\n");
    for r in &report.regions {
        let name = r.region.as_str();
        let _ = writeln!(out, "{name},mae,{}", fmt_opt(r.mae));
        let _ = writeln!(out, "{name},gm,{}", fmt_opt(r.gm));
        let _ = writeln!(out, "{name},count,{}", r.count);
    }
    let _ = writeln!(out, "all,wasserstein1,{:?}", report.wasserstein1);
    out
}

/// Plot-ready `bin,center,labels,predictions` table.
pub fn histograms_to_csv(report: &RegionReport) -> String {
    let h = &report.histograms;
    let mut out = String::from("bin,center,labels,predictions\n");
    for i in 0..h.centers.len() {
        let _ = writeln!(out, "{i},{:?},{},{}", h.centers[i], h.labels[i], h.predictions[i]);
    }
    out
}

pub fn emit_report(report: &RegionReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report_to_json(report)?,
        ReportFormat::Csv => report_to_csv(report),
    };
    crate::io::write_atomic(path, text.as_bytes())
}

pub fn read_report(path: &Path) -> Result<RegionReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
