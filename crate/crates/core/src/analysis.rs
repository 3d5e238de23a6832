//! Post-processing of study outputs: rate fits, μQ residual curves, bounds and histograms.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::study::{
    read_records, read_summary, records_file_name, SampleRecord, StudySummary,
};
use crate::tensor::{complement2, symmetry_residual4, SymTensor2, SymmetryClass, VOIGT_LABELS};

/// Minimum number of histogram bins.
pub const MIN_BINS: usize = 20;
/// Guard against degenerate Freedman–Diaconis widths.
pub const MAX_BINS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub component: String,
    pub sizes: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// `log err − (intercept + slope log L)` per point.
    pub residuals: Vec<f64>,
}

/// Least-squares line through `(ln L, ln err)`.
pub fn fit_rate(component: &str, sizes: &[f64], errors: &[f64]) -> Result<RateFit> {
    if sizes.len() != errors.len() || sizes.len() < 2 {
        return Err(Error::validation("rate fit needs at least 2 matching (size, error) pairs"));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] <= 0.0 {
        return Err(Error::validation("rate fit sizes must be positive and strictly increasing"));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::validation(format!("rate fit needs positive errors (got {e})")));
    }
    let x: Vec<f64> = sizes.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !slope.is_finite() {
        return Err(Error::numerical("rate fit produced a non-finite slope"));
    }
    Ok(RateFit {
        component: component.to_string(),
        sizes: sizes.to_vec(),
        slope,
        intercept,
        residuals: x.iter().zip(&y).map(|(a, b)| b - (intercept + slope * a)).collect(),
    })
}

/// `(L, ‖μQ − P::μQ‖ / ‖P::μQ‖)` per size.
pub fn mu_q_residual_curve(summary: &StudySummary, class: &SymmetryClass) -> Result<Vec<(f64, f64)>> {
    summary
        .sizes
        .iter()
        .map(|s| Ok((s.cell_um, symmetry_residual4(class, &s.mu_q)?)))
        .collect()
}

/// Reuss (harmonic) and Voigt (arithmetic) means for `[matrix, fiber]` at fiber fraction `vf`.
pub fn voigt_reuss_bounds(conductivities: [f64; 2], vf: f64) -> Result<(f64, f64)> {
    let [am, af] = conductivities;
    if !(am > 0.0 && af > 0.0) || !(0.0..=1.0).contains(&vf) {
        return Err(Error::validation("bounds need positive conductivities and vf in [0, 1]"));
    }
    let lower = 1.0 / ((1.0 - vf) / am + vf / af);
    let upper = (1.0 - vf) * am + vf * af;
    Ok((lower.min(upper), upper.max(lower)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Frequency density `count / (total · width)` per bin.
    pub fn density(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().sum();
        self.counts
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let w = self.edges[b + 1] - self.edges[b];
                if w > 0.0 {
                    c as f64 / (total as f64 * w)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Freedman–Diaconis binning with at least [`MIN_BINS`] bins. Constant data gives one zero-width bin.
pub fn histogram(values: &[f64]) -> Result<Histogram> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("histogram needs non-empty finite data"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi == lo {
        return Ok(Histogram { edges: vec![lo, hi], counts: vec![values.len()] });
    }
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr / (values.len() as f64).cbrt();
    let fd = if width > 0.0 { ((hi - lo) / width).ceil() as usize } else { MIN_BINS };
    let bins = fd.clamp(MIN_BINS, MAX_BINS);
    let w = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| if b == bins { hi } else { lo + b as f64 * w }).collect();
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Per-sample error ratios of one realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRatios {
    /// `‖P:Aᵢ − A_ref‖ / ‖Aᵢ − A_ref‖`, given a reference.
    pub projected_total: Option<f64>,
    /// `‖Q:Aᵢ‖ / ‖Aᵢ − A_ref‖`, given a reference.
    pub symmetry: Option<f64>,
    /// `‖P:Aᵢ − mean(P:A)‖ / ‖Aᵢ − mean(A)‖`.
    pub dispersion: f64,
}

/// Ratios per record; entries whose denominator vanishes are skipped.
pub fn sample_ratios(
    records: &[SampleRecord],
    class: &SymmetryClass,
    reference: Option<&SymTensor2>,
) -> Result<Vec<SampleRatios>> {
    let n = records.len() as f64;
    let mean = records.iter().fold(SymTensor2::ZERO, |a, r| a + r.apparent) * (1.0 / n);
    let pmean = records.iter().fold(SymTensor2::ZERO, |a, r| a + r.projected) * (1.0 / n);
    let mut out = Vec::new();
    for r in records {
        let disp = (r.apparent - mean).norm();
        let (projected_total, symmetry) = match reference {
            Some(aref) => {
                let total = (r.apparent - *aref).norm();
                if total == 0.0 {
                    continue;
                }
                (
                    Some((r.projected - *aref).norm() / total),
                    Some(complement2(class, &r.apparent)?.norm() / total),
                )
            }
            None => (None, None),
        };
        if disp == 0.0 {
            continue;
        }
        out.push(SampleRatios {
            projected_total,
            symmetry,
            dispersion: (r.projected - pmean).norm() / disp,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub cell_um: f64,
    pub volume_fraction: f64,
    pub reuss: f64,
    pub voigt: f64,
    pub mean_diagonal: [f64; 3],
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisReport {
    pub rates: Vec<(String, RateFit)>,
    pub residuals: Vec<(f64, Option<f64>, f64)>,
    pub bounds: Vec<SizeBounds>,
    pub histograms: Vec<(String, Histogram)>,
}

/// Reads `results/`, writes `rates.csv`, `residuals.csv`, `histograms/*.csv` and `bounds.json` to `out`.
pub fn analyze(results: &Path, out: &Path) -> Result<AnalysisReport> {
    let summary = read_summary(results)?;
    let class = summary.config.symmetry;
    let reference = summary.reference.tensor;
    let records = summary
        .sizes
        .iter()
        .map(|s| read_records(&results.join(records_file_name(s.cell_um))))
        .collect::<Result<Vec<_>>>()?;

    let sizes: Vec<f64> = summary.sizes.iter().map(|s| s.cell_um).collect();
    let mut rates = Vec::new();
    if sizes.len() >= 2 {
        let kinds: [(&str, fn(&crate::study::NormalizedErrors) -> [f64; 6]); 4] = [
            ("ran", |e| e.ran),
            ("proj-ran", |e| e.ran_projected),
            ("sys", |e| e.sys),
            ("proj-sys", |e| e.sys_projected),
        ];
        for (kind, get) in kinds {
            if kind.ends_with("sys") && reference.is_none() {
                continue;
            }
            for (c, label) in VOIGT_LABELS.iter().enumerate().take(3) {
                let errs: Vec<f64> = summary.sizes.iter().map(|s| get(&s.errors)[c]).collect();
                // exactly vanishing errors (for example in homogeneous ensembles) have no rate
                if errs.iter().all(|e| *e > 0.0) {
                    rates.push((kind.to_string(), fit_rate(label, &sizes, &errs)?));
                }
            }
        }
    }

    let residuals: Vec<(f64, Option<f64>, f64)> =
        summary.sizes.iter().map(|s| (s.cell_um, s.mu_q_residual, s.mean_residual)).collect();

    let [am, af] = summary.config.conductivities;
    let mut bounds = Vec::new();
    for s in &summary.sizes {
        let (reuss, voigt) = voigt_reuss_bounds([am, af], s.mean_volume_fraction)?;
        let d = [s.mean.0[0], s.mean.0[1], s.mean.0[2]];
        let slack = 1e-12 * voigt;
        bounds.push(SizeBounds {
            cell_um: s.cell_um,
            volume_fraction: s.mean_volume_fraction,
            reuss,
            voigt,
            mean_diagonal: d,
            within: d.iter().all(|v| *v >= reuss - slack && *v <= voigt + slack),
        });
    }

    let mut histograms = Vec::new();
    for (s, recs) in summary.sizes.iter().zip(&records) {
        let tag = format!("L{}", s.cell_um);
        for (c, label) in VOIGT_LABELS.iter().enumerate() {
            let raw: Vec<f64> = recs.iter().map(|r| r.apparent.0[c]).collect();
            let proj: Vec<f64> = recs.iter().map(|r| r.projected.0[c]).collect();
            histograms.push((format!("{tag}_{label}"), histogram(&raw)?));
            histograms.push((format!("{tag}_{label}_projected"), histogram(&proj)?));
        }
        let ratios = sample_ratios(recs, &class, reference.as_ref())?;
        if !ratios.is_empty() {
            let disp: Vec<f64> = ratios.iter().map(|r| r.dispersion).collect();
            histograms.push((format!("{tag}_dispersion_ratio"), histogram(&disp)?));
            if reference.is_some() {
                let tot: Vec<f64> = ratios.iter().filter_map(|r| r.projected_total).collect();
                let sym: Vec<f64> = ratios.iter().filter_map(|r| r.symmetry).collect();
                histograms.push((format!("{tag}_projected_total_ratio"), histogram(&tot)?));
                histograms.push((format!("{tag}_symmetry_ratio"), histogram(&sym)?));
            }
        }
    }

    write_outputs(out, &rates, &residuals, &bounds, &histograms)?;
    Ok(AnalysisReport { rates, residuals, bounds, histograms })
}

fn write_outputs(
    out: &Path,
    rates: &[(String, RateFit)],
    residuals: &[(f64, Option<f64>, f64)],
    bounds: &[SizeBounds],
    histograms: &[(String, Histogram)],
) -> Result<()> {
    let hist_dir = out.join("histograms");
    fs::create_dir_all(&hist_dir).map_err(|e| Error::io(&hist_dir, e))?;

    let path = out.join("rates.csv");
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &path, ["kind", "component", "slope", "intercept", "points", "sizes"])?;
    for (kind, f) in rates {
        let sizes = f.sizes.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";");
        write_row(
            &mut w,
            &path,
            [kind.clone(), f.component.clone(), f.slope.to_string(), f.intercept.to_string(), f.sizes.len().to_string(), sizes],
        )?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("residuals.csv");
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &path, ["L", "mu_q_residual", "mean_residual"])?;
    for (l, q, m) in residuals {
        write_row(&mut w, &path, [l.to_string(), q.map(|v| v.to_string()).unwrap_or_default(), m.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    for (name, h) in histograms {
        let path = hist_dir.join(format!("{name}.csv"));
        let mut w = csv_writer(&path)?;
        write_row(&mut w, &path, ["bin_lo", "bin_hi", "count", "density"])?;
        for (b, d) in h.density().iter().enumerate() {
            write_row(
                &mut w,
                &path,
                [h.edges[b].to_string(), h.edges[b + 1].to_string(), h.counts[b].to_string(), d.to_string()],
            )?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let path = out.join("bounds.json");
    let text = serde_json::to_string_pretty(bounds).map_err(|e| Error::Json(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Json(format!("{}: {e}", path.display())))
}

fn write_row<I, S>(w: &mut csv::Writer<fs::File>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::Json(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&s, 0.5), 1.5);
        assert_eq!(quantile(&s, 1.0), 3.0);
    }
}
