use crate::grid::GridSpec;
use crate::{Error, Result};

use super::contingency::{scores, Counts};

/// Per-cell contingency counts at one threshold over a stream of pairs.
/// Memory is one [`Counts`] per grid cell, independent of stream length.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMapAccumulator {
    grid: GridSpec,
    threshold: f64,
    counts: Vec<Counts>,
}

impl CsiMapAccumulator {
    pub fn new(grid: GridSpec, threshold: f64) -> Self {
        CsiMapAccumulator {
            grid,
            threshold,
            counts: vec![Counts::default(); grid.cells()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Adds a pair covering `window`, which must lie on this grid's lattice.
    pub fn add(&mut self, window: &GridSpec, m: &[bool], y_true: &[f32], y_pred: &[f32]) -> Result<()> {
        let (r0, c0) = window
            .offset_in(&self.grid)
            .ok_or_else(|| Error::Shape("pair window is not part of the map grid".into()))?;
        let n = window.cells();
        if m.len() != n || y_true.len() != n || y_pred.len() != n {
            return Err(Error::Shape("pair arrays do not match their window".into()));
        }
        for r in 0..window.rows {
            for c in 0..window.cols {
                let i = r * window.cols + c;
                if m[i] {
                    let g = (r0 + r) * self.grid.cols + c0 + c;
                    self.counts[g].add(y_true[i] as f64 >= self.threshold, y_pred[i] as f64 >= self.threshold);
                }
            }
        }
        Ok(())
    }

    /// Combines shards accumulated separately over the same grid.
    pub fn merge(&mut self, other: &CsiMapAccumulator) -> Result<()> {
        if self.grid != other.grid || self.threshold != other.threshold {
            return Err(Error::Invalid("CSI map shards differ in grid or threshold".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a = a.merged(*b);
        }
        Ok(())
    }

    pub fn counts(&self) -> &[Counts] {
        &self.counts
    }

    /// Per-cell CSI; NaN where undefined.
    pub fn finish(&self) -> Vec<f32> {
        self.counts
            .iter()
            .map(|c| scores(*c).csi.map_or(f32::NAN, |v| v as f32))
            .collect()
    }
}

/// Per-cell CSI over `(window, m, y_true, y_pred)` items.
pub fn csi_map<'a, I>(pairs: I, threshold: f64, g: &GridSpec) -> Result<Vec<f32>>
where
    I: IntoIterator<Item = (&'a GridSpec, &'a [bool], &'a [f32], &'a [f32])>,
{
    let mut acc = CsiMapAccumulator::new(*g, threshold);
    for (w, m, y, p) in pairs {
        acc.add(w, m, y, p)?;
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_and_never_valid_cells() {
        let g = GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.25).unwrap();
        let m: Vec<bool> = (0..16).map(|i| i % 3 != 0).collect();
        let y: Vec<f32> = (0..16).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let map = csi_map([(&g, &m[..], &y[..], &y[..])], 0.2, &g).unwrap();
        for i in 0..16 {
            if m[i] && y[i] >= 0.2 {
                assert_eq!(map[i], 1.0);
            } else {
                assert!(map[i].is_nan());
            }
        }
    }

    #[test]
    fn sub_windows_land_at_their_offset() {
        let g = GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.25).unwrap();
        let w = g.sub_window(1, 2, 2, 2).unwrap();
        let mut acc = CsiMapAccumulator::new(g, 0.2);
        acc.add(&w, &[true; 4], &[1.0; 4], &[1.0, 0.0, 1.0, 1.0]).unwrap();
        let map = acc.finish();
        assert_eq!(map[4 + 2], 1.0);
        assert_eq!(map[4 + 3], 0.0);
        assert!(map[0].is_nan());
        let outside = GridSpec::new(0.1, 0.6, 0.0, 0.5, 0.25).unwrap();
        assert!(acc.add(&outside, &[true; 4], &[1.0; 4], &[1.0; 4]).is_err());
    }
}
