use crate::kv::{KvDoc, KvWriter};
use crate::{Error, Result};

/// Nominal 5 km at the equator (0.045° ≈ 5.005 km).
pub const DEFAULT_SPACING: f64 = 0.045;

/// An equirectangular grid. Row 0 is the northernmost row and column 0 the
/// westernmost column; cell `(r, c)` spans latitudes
/// `(lat_max - (r + 1) * spacing, lat_max - r * spacing]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub spacing: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64, spacing: f64) -> Result<Self> {
        let finite = [lat_min, lat_max, lon_min, lon_max, spacing]
            .iter()
            .all(|v| v.is_finite());
        if !finite || spacing <= 0.0 || lat_max <= lat_min || lon_max <= lon_min {
            return Err(Error::Config(format!(
                "degenerate grid extent lat [{lat_min}, {lat_max}] lon [{lon_min}, {lon_max}] spacing {spacing}"
            )));
        }
        if lat_min < -90.0 || lat_max > 90.0 || lon_min < -180.0 || lon_max > 180.0 {
            return Err(Error::Config("grid extent exceeds the globe".into()));
        }
        let rows = ((lat_max - lat_min) / spacing).round() as usize;
        let cols = ((lon_max - lon_min) / spacing).round() as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::Config("grid has no cells".into()));
        }
        Ok(GridSpec {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            spacing,
            rows,
            cols,
        })
    }

    /// 60°S–60°N, 180°W–180°E at [`DEFAULT_SPACING`]: 2667 × 8000 cells.
    pub fn global() -> Self {
        Self::new(-60.0, 60.0, -180.0, 180.0, DEFAULT_SPACING).expect("static extent")
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Center of cell `(row, col)` as `(lat, lon)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.lat_max - (row as f64 + 0.5) * self.spacing,
            self.lon_min + (col as f64 + 0.5) * self.spacing,
        )
    }

    /// Cell containing `(lat, lon)`; coordinates outside
    /// `[lat_min, lat_max] × [lon_min, lon_max)` are rejected.
    pub fn index(&self, lat: f64, lon: f64) -> Result<(usize, usize)> {
        if !(lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon < self.lon_max) {
            return Err(Error::OutOfExtent { lat, lon });
        }
        let row = ((self.lat_max - lat) / self.spacing).floor() as usize;
        let col = ((lon - self.lon_min) / self.spacing).floor() as usize;
        Ok((row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    /// The `rows × cols` block of this grid whose top-left cell is
    /// `(row0, col0)`.
    pub fn sub_window(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<GridSpec> {
        if rows == 0 || cols == 0 || row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::Shape(format!(
                "window {rows}x{cols} at ({row0}, {col0}) exceeds {}x{} grid",
                self.rows, self.cols
            )));
        }
        let lat_max = self.lat_max - row0 as f64 * self.spacing;
        let lon_min = self.lon_min + col0 as f64 * self.spacing;
        Ok(GridSpec {
            lat_min: lat_max - rows as f64 * self.spacing,
            lat_max,
            lon_min,
            lon_max: lon_min + cols as f64 * self.spacing,
            spacing: self.spacing,
            rows,
            cols,
        })
    }

    /// Offset of this window inside `parent` when both share a lattice.
    pub fn offset_in(&self, parent: &GridSpec) -> Option<(usize, usize)> {
        if (self.spacing - parent.spacing).abs() > 1e-12 {
            return None;
        }
        let dr = (parent.lat_max - self.lat_max) / parent.spacing;
        let dc = (self.lon_min - parent.lon_min) / parent.spacing;
        let (r, c) = (dr.round(), dc.round());
        if (dr - r).abs() > 1e-6 || (dc - c).abs() > 1e-6 || r < 0.0 || c < 0.0 {
            return None;
        }
        let (r, c) = (r as usize, c as usize);
        (r + self.rows <= parent.rows && c + self.cols <= parent.cols).then_some((r, c))
    }

    pub(crate) fn write_kv(&self, w: &mut KvWriter, prefix: &str) {
        w.put(&format!("{prefix}lat_min"), self.lat_min)
            .put(&format!("{prefix}lat_max"), self.lat_max)
            .put(&format!("{prefix}lon_min"), self.lon_min)
            .put(&format!("{prefix}lon_max"), self.lon_max)
            .put(&format!("{prefix}spacing"), self.spacing)
            .put(&format!("{prefix}rows"), self.rows)
            .put(&format!("{prefix}cols"), self.cols);
    }

    pub(crate) fn read_kv(doc: &KvDoc, prefix: &str) -> Result<GridSpec> {
        let g = GridSpec {
            lat_min: doc.req(&format!("{prefix}lat_min"))?,
            lat_max: doc.req(&format!("{prefix}lat_max"))?,
            lon_min: doc.req(&format!("{prefix}lon_min"))?,
            lon_max: doc.req(&format!("{prefix}lon_max"))?,
            spacing: doc.req(&format!("{prefix}spacing"))?,
            rows: doc.opt(&format!("{prefix}rows"))?.unwrap_or(0),
            cols: doc.opt(&format!("{prefix}cols"))?.unwrap_or(0),
        };
        let derived = GridSpec::new(g.lat_min, g.lat_max, g.lon_min, g.lon_max, g.spacing)?;
        if (g.rows != 0 && g.rows != derived.rows) || (g.cols != 0 && g.cols != derived.cols) {
            return Err(doc.bad("grid rows/cols disagree with extent and spacing"));
        }
        Ok(derived)
    }

    /// Reads a grid spec file (`lat_min`, `lat_max`, `lon_min`, `lon_max`,
    /// `spacing`, optional `rows`/`cols`).
    pub fn read(path: &std::path::Path) -> Result<GridSpec> {
        let doc = KvDoc::read(path)?;
        Self::read_kv(&doc, "")
    }

    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new();
        self.write_kv(&mut w, "");
        w.finish()
    }
}

/// Free-function form of [`GridSpec::index`].
pub fn latlon_to_index(lat: f64, lon: f64, g: &GridSpec) -> Result<(usize, usize)> {
    g.index(lat, lon)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Nearest cell center by exhaustive scan.
    fn nearest_center(g: &GridSpec, lat: f64, lon: f64) -> (usize, usize) {
        let mut best_row = 0;
        let mut best = f64::INFINITY;
        for r in 0..g.rows {
            let d = (g.cell_center(r, 0).0 - lat).abs();
            if d < best {
                best = d;
                best_row = r;
            }
        }
        let mut best_col = 0;
        best = f64::INFINITY;
        for c in 0..g.cols {
            let d = (g.cell_center(0, c).1 - lon).abs();
            if d < best {
                best = d;
                best_col = c;
            }
        }
        (best_row, best_col)
    }

    #[test]
    fn global_dimensions() {
        let g = GridSpec::global();
        assert_eq!((g.rows, g.cols), (2667, 8000));
    }

    #[test]
    fn corner_is_origin() {
        let g = GridSpec::global();
        assert_eq!(g.index(60.0 - 1e-9, -180.0).unwrap(), (0, 0));
        assert_eq!(g.index(60.0, -180.0).unwrap(), (0, 0));
    }

    #[test]
    fn equator_cell_matches_brute_force() {
        let g = GridSpec::global();
        let expect = nearest_center(&g, 0.0225, 0.0225);
        assert_eq!(expect, (1332, 4000));
        assert_eq!(latlon_to_index(0.0225, 0.0225, &g).unwrap(), expect);
        let (_, lon) = g.cell_center(1332, 4000);
        assert!((lon - 0.0225).abs() < 1e-9);
    }

    #[test]
    fn outside_extent_rejected() {
        let g = GridSpec::global();
        assert!(matches!(g.index(75.0, 0.0), Err(Error::OutOfExtent { .. })));
        assert!(g.index(0.0, 180.0).is_err());
        assert!(g.index(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn centers_round_trip_on_global_grid() {
        let g = GridSpec::global();
        for r in (0..g.rows).step_by(7).chain([g.rows - 1]) {
            for c in (0..g.cols).step_by(13).chain([g.cols - 1]) {
                let (lat, lon) = g.cell_center(r, c);
                assert_eq!(g.index(lat, lon).unwrap(), (r, c));
            }
        }
    }

    #[test]
    fn windows_align_with_parent() {
        let g = GridSpec::global();
        let w = g.sub_window(100, 2000, 64, 64).unwrap();
        assert_eq!(w.offset_in(&g), Some((100, 2000)));
        assert_eq!((w.rows, w.cols), (64, 64));
        let (lat, lon) = w.cell_center(5, 9);
        assert_eq!(g.index(lat, lon).unwrap(), (105, 2009));
        assert!(g.sub_window(2660, 0, 64, 64).is_err());
    }

    #[test]
    fn kv_round_trip() {
        let g = GridSpec::new(-10.0, 12.5, 3.0, 30.0, 0.5).unwrap();
        let doc = KvDoc::parse(&g.to_text(), std::path::Path::new("g")).unwrap();
        assert_eq!(GridSpec::read_kv(&doc, "").unwrap(), g);
    }
}
