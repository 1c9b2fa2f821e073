use std::path::Path;

use crate::grid::store::write_raster;
use crate::grid::GriddedPair;
use crate::kv::write_file;
use crate::{Error, Result};

use super::contingency::{accumulate, metrics, MetricReport};
use super::render::{rate_color, write_ppm};

/// One product's rate field over the case window.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseProduct {
    pub name: String,
    pub rates: Vec<f32>,
}

/// Writes a case-study bundle to `dir`: the truth and every product as
/// float32 rasters (`<name>.bin`) and pixmaps (`<name>.ppm`), plus
/// `<name>_metrics.csv` per product scored against the valid truth cells.
/// Truth cells without ground truth are stored as NaN.
pub fn case_report(
    dir: &Path,
    truth: &GriddedPair,
    products: &[CaseProduct],
    thresholds: &[f64],
) -> Result<Vec<(String, MetricReport)>> {
    let (rows, cols) = (truth.rows, truth.cols);
    for p in products {
        if p.rates.len() != truth.cells() {
            return Err(Error::Shape(format!(
                "product {} has {} cells but the case window is {rows}x{cols}",
                p.name,
                p.rates.len()
            )));
        }
        if p.name.is_empty() || p.name == "truth" || p.name.contains(['/', '\\']) {
            return Err(Error::Invalid(format!("unusable product name `{}`", p.name)));
        }
    }
    let truth_field: Vec<f32> = truth
        .y
        .iter()
        .zip(&truth.m)
        .map(|(&y, &m)| if m { y } else { f32::NAN })
        .collect();
    write_raster(&dir.join("truth.bin"), rows, cols, &truth_field)?;
    write_ppm(&dir.join("truth.ppm"), rows, cols, &truth_field, rate_color)?;
    let mut out = Vec::with_capacity(products.len());
    for p in products {
        let report = metrics(&accumulate(&truth.m, &truth.y, &p.rates, thresholds)?);
        write_raster(&dir.join(format!("{}.bin", p.name)), rows, cols, &p.rates)?;
        write_ppm(&dir.join(format!("{}.ppm", p.name)), rows, cols, &p.rates, rate_color)?;
        write_file(&dir.join(format!("{}_metrics.csv", p.name)), report.to_csv().as_bytes())?;
        out.push((p.name.clone(), report));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_dry_products() {
        let dir = tempfile::tempdir().unwrap();
        let y: Vec<f32> = (0..16).map(|i| (i % 5) as f32 * 2.0).collect();
        let truth = GriddedPair::new(4, 4, 1, vec![0.0; 16], y.clone(), vec![true; 16]).unwrap();
        let products = [
            CaseProduct { name: "same".into(), rates: y.clone() },
            CaseProduct { name: "dry".into(), rates: vec![0.0; 16] },
        ];
        let th = [0.2, 1.0, 2.4, 7.0];
        let reports = case_report(dir.path(), &truth, &products, &th).unwrap();
        for (_, s, _) in &reports[0].1.rows {
            assert_eq!(s.csi, Some(1.0));
        }
        for (_, s, _) in &reports[1].1.rows {
            assert_eq!((s.pod, s.bias), (Some(0.0), Some(0.0)));
        }
        for f in ["truth.bin", "truth.ppm", "same.bin", "same.ppm", "same_metrics.csv", "dry_metrics.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let bad = [CaseProduct { name: "short".into(), rates: vec![0.0; 15] }];
        assert!(case_report(dir.path(), &truth, &bad, &th).is_err());
    }
}
