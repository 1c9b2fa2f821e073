//! Quasi-global products from several geostationary satellites, averaging
//! the per-satellite estimates where their views overlap.

use std::path::Path;

use crate::grid::store::{format_time, write_raster};
use crate::grid::{GridSpec, Timestamp};
use crate::kv::{write_file, KvWriter};
use crate::{Error, Execution, Result};

/// Default usable view: a 70° great-circle disk around the sub-satellite
/// point.
pub const DEFAULT_MAX_VIEW_RADIUS: f64 = 70.0;

/// Great-circle distance in degrees (haversine).
pub fn great_circle_deg(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    (2.0 * h.sqrt().min(1.0).asin()).to_degrees()
}

/// Cells of `g` whose centers lie within `max_view_radius` degrees of arc
/// of `(0°, sub_longitude)`.
pub fn coverage_mask(sub_longitude: f64, max_view_radius: f64, g: &GridSpec, exec: Execution) -> Result<Vec<bool>> {
    if !(max_view_radius > 0.0 && max_view_radius <= 90.0) {
        return Err(Error::Config(format!("view radius must lie in (0, 90], got {max_view_radius}")));
    }
    if !sub_longitude.is_finite() {
        return Err(Error::Config("sub-satellite longitude must be finite".into()));
    }
    let mut mask = vec![false; g.cells()];
    exec.for_each_chunk_mut(&mut mask, g.cols, |r, row| {
        for (c, v) in row.iter_mut().enumerate() {
            let (lat, lon) = g.cell_center(r, c);
            *v = great_circle_deg(0.0, sub_longitude, lat, lon) <= max_view_radius;
        }
    });
    Ok(mask)
}

/// A satellite's usable footprint on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteCoverage {
    pub satellite_id: String,
    pub sub_longitude: f64,
    pub max_view_radius: f64,
    pub coverage: Vec<bool>,
}

impl SatelliteCoverage {
    pub fn new(id: impl Into<String>, sub_longitude: f64, max_view_radius: f64, g: &GridSpec, exec: Execution) -> Result<Self> {
        let satellite_id = id.into();
        let coverage = coverage_mask(sub_longitude, max_view_radius, g, exec)?;
        if !coverage.iter().any(|&v| v) {
            return Err(Error::Invalid(format!("satellite {satellite_id} covers no cell of the grid")));
        }
        Ok(SatelliteCoverage {
            satellite_id,
            sub_longitude,
            max_view_radius,
            coverage,
        })
    }
}

/// Merged product: `rates` is NaN (no data) where no satellite contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEstimate {
    pub rows: usize,
    pub cols: usize,
    pub rates: Vec<f32>,
    pub contributor_count: Vec<u32>,
}

/// Per-cell unweighted mean of the covering satellites' rates. Each cell's
/// contributions are sorted before summation, so the result does not depend
/// on the order of `estimates`.
pub fn merge_global(estimates: &[(&[f32], &[bool])], g: &GridSpec, exec: Execution) -> Result<GlobalEstimate> {
    if estimates.is_empty() {
        return Err(Error::Invalid("mosaic needs at least one satellite".into()));
    }
    let n = g.cells();
    for (k, (rates, cov)) in estimates.iter().enumerate() {
        if rates.len() != n || cov.len() != n {
            return Err(Error::Shape(format!("estimate {k} is not on the {}x{} grid", g.rows, g.cols)));
        }
        if rates.iter().zip(cov.iter()).any(|(&r, &c)| c && !(r.is_finite() && r >= 0.0)) {
            return Err(Error::Invalid(format!("estimate {k} has a negative or undefined rate inside its coverage")));
        }
    }
    let mut cells = vec![(f32::NAN, 0u32); n];
    exec.for_each_chunk_mut(&mut cells, g.cols, |r, row| {
        let mut vals = Vec::with_capacity(estimates.len());
        for (c, out) in row.iter_mut().enumerate() {
            let i = r * g.cols + c;
            vals.clear();
            vals.extend(estimates.iter().filter(|(_, cov)| cov[i]).map(|(rates, _)| rates[i]));
            if vals.is_empty() {
                continue;
            }
            vals.sort_by(f32::total_cmp);
            let sum: f64 = vals.iter().map(|&v| v as f64).sum();
            *out = ((sum / vals.len() as f64) as f32, vals.len() as u32);
        }
    });
    Ok(GlobalEstimate {
        rows: g.rows,
        cols: g.cols,
        rates: cells.iter().map(|c| c.0).collect(),
        contributor_count: cells.iter().map(|c| c.1).collect(),
    })
}

/// One contributing satellite scan, listed in the product manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Contributor {
    pub satellite_id: String,
    pub sub_longitude: f64,
    pub max_view_radius: f64,
    pub scan_start: Timestamp,
}

impl GlobalEstimate {
    /// Writes `estimate.bin` (rate plane then contributor-count plane) and
    /// `manifest.txt` listing the grid, product time and contributors.
    pub fn write(&self, dir: &Path, g: &GridSpec, time: Timestamp, contributors: &[Contributor]) -> Result<()> {
        if (g.rows, g.cols) != (self.rows, self.cols) {
            return Err(Error::Shape("product grid does not match the estimate".into()));
        }
        let mut planes = self.rates.clone();
        planes.extend(self.contributor_count.iter().map(|&c| c as f32));
        write_raster(&dir.join("estimate.bin"), self.rows, self.cols, &planes)?;
        let mut w = KvWriter::new();
        w.comment("merged precipitation product; planes: rate (mm/h, NaN = no data), contributor count")
            .put("time", format_time(&time));
        g.write_kv(&mut w, "grid.");
        for c in contributors {
            w.put(
                "satellite",
                format!(
                    "{}|{}|{}|{}",
                    c.satellite_id,
                    c.sub_longitude,
                    c.max_view_radius,
                    format_time(&c.scan_start)
                ),
            );
        }
        write_file(&dir.join("manifest.txt"), w.finish().as_bytes())
    }
}
