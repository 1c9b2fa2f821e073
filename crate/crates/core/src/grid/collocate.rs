use super::channels::check_unique;
use super::{ChannelDescriptor, GridSpec, Timestamp};
use crate::{Error, Result};

/// One geostationary observation on a grid window. `data` holds one
/// `rows × cols` plane per channel, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoScene {
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub grid: GridSpec,
    pub channels: Vec<ChannelDescriptor>,
    pub data: Vec<f32>,
}

impl GeoScene {
    pub fn new(
        t_start: Timestamp,
        t_end: Timestamp,
        grid: GridSpec,
        channels: Vec<ChannelDescriptor>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if t_start > t_end {
            return Err(Error::Invalid("scene starts after it ends".into()));
        }
        check_unique(&channels)?;
        if data.len() != grid.cells() * channels.len() {
            return Err(Error::Shape(format!(
                "scene data has {} values, expected {}x{}x{}",
                data.len(),
                grid.rows,
                grid.cols,
                channels.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("scene contains non-finite values".into()));
        }
        Ok(GeoScene {
            t_start,
            t_end,
            grid,
            channels,
            data,
        })
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.grid.cells();
        &self.data[channel * n..(channel + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecipSample {
    pub lat: f64,
    pub lon: f64,
    pub time: Timestamp,
    /// mm/h
    pub rate: f64,
}

/// Sparse ground-truth samples from one radar overpass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrecipSwath {
    pub samples: Vec<PrecipSample>,
}

impl PrecipSwath {
    pub fn new(samples: Vec<PrecipSample>) -> Result<Self> {
        for s in &samples {
            if !(s.rate.is_finite() && s.rate >= 0.0) {
                return Err(Error::Invalid(format!("swath rate {} is not a finite non-negative value", s.rate)));
            }
            if !(-90.0..=90.0).contains(&s.lat) || !(-180.0..180.0).contains(&s.lon) {
                return Err(Error::Invalid(format!("swath sample at ({}, {}) is off the globe", s.lat, s.lon)));
            }
        }
        Ok(PrecipSwath { samples })
    }
}

/// Collocated `(x, y, m)` triple. `x` is channel-major like [`GeoScene::data`];
/// `y` is the rain rate in mm/h, meaningful only where `m` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedPair {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub m: Vec<bool>,
}

impl GriddedPair {
    pub fn new(rows: usize, cols: usize, channels: usize, x: Vec<f32>, y: Vec<f32>, m: Vec<bool>) -> Result<Self> {
        let n = rows * cols;
        if x.len() != n * channels || y.len() != n || m.len() != n {
            return Err(Error::Shape(format!(
                "pair arrays ({}, {}, {}) do not match {rows}x{cols}x{channels}",
                x.len(),
                y.len(),
                m.len()
            )));
        }
        Ok(GriddedPair {
            rows,
            cols,
            channels,
            x,
            y,
            m,
        })
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.cells();
        &self.x[channel * n..(channel + 1) * n]
    }

    pub fn valid_count(&self) -> usize {
        self.m.iter().filter(|&&v| v).count()
    }

    /// Copies the `rows × cols` block at `(row0, col0)`.
    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<GriddedPair> {
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::Shape(format!(
                "crop {rows}x{cols} at ({row0}, {col0}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        let n = rows * cols;
        let mut x = Vec::with_capacity(n * self.channels);
        for c in 0..self.channels {
            let plane = self.plane(c);
            for r in row0..row0 + rows {
                x.extend_from_slice(&plane[r * self.cols + col0..r * self.cols + col0 + cols]);
            }
        }
        let mut y = Vec::with_capacity(n);
        let mut m = Vec::with_capacity(n);
        for r in row0..row0 + rows {
            y.extend_from_slice(&self.y[r * self.cols + col0..r * self.cols + col0 + cols]);
            m.extend_from_slice(&self.m[r * self.cols + col0..r * self.cols + col0 + cols]);
        }
        GriddedPair::new(rows, cols, self.channels, x, y, m)
    }
}

/// Grids the samples with `t0 <= time <= t1`: each cell holding at least one
/// sample gets the mean of their rates and `m = 1`; all other cells get
/// `y = 0, m = 0`. Samples outside the grid extent are dropped.
pub fn rasterize_swath(s: &PrecipSwath, g: &GridSpec, t0: Timestamp, t1: Timestamp) -> (Vec<f32>, Vec<bool>) {
    let n = g.cells();
    let mut sum = vec![0.0f64; n];
    let mut count = vec![0u32; n];
    for sample in s.samples.iter().filter(|s| s.time >= t0 && s.time <= t1) {
        if let Ok((r, c)) = g.index(sample.lat, sample.lon) {
            sum[r * g.cols + c] += sample.rate;
            count[r * g.cols + c] += 1;
        }
    }
    let y = sum
        .iter()
        .zip(&count)
        .map(|(&s, &k)| if k > 0 { (s / k as f64) as f32 } else { 0.0 })
        .collect();
    let m = count.iter().map(|&k| k > 0).collect();
    (y, m)
}

/// Pairs a scene with the swath samples inside its closed time window.
/// `target` is the grid the caller expects the pair on; a scene on any other
/// grid is rejected.
pub fn collocate(scene: &GeoScene, s: &PrecipSwath, target: &GridSpec) -> Result<GriddedPair> {
    if scene.grid != *target {
        return Err(Error::Shape(format!(
            "scene grid {:?} differs from target grid {:?}",
            scene.grid, target
        )));
    }
    let (y, m) = rasterize_swath(s, &scene.grid, scene.t_start, scene.t_end);
    GriddedPair::new(
        scene.grid.rows,
        scene.grid.cols,
        scene.channels.len(),
        scene.data.clone(),
        y,
        m,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ChannelCategory;
    use chrono::{Duration, TimeZone, Utc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn t(min: i64) -> Timestamp {
        Utc.with_ymd_and_hms(2020, 6, 1, 12, 0, 0).unwrap() + Duration::minutes(min)
    }

    fn small_grid() -> GridSpec {
        GridSpec::new(0.0, 1.0, 10.0, 11.0, 0.125).unwrap()
    }

    fn scene(g: GridSpec) -> GeoScene {
        let ch = vec![ChannelDescriptor::new("IR_108", 10.8, ChannelCategory::Ir).unwrap()];
        GeoScene::new(t(0), t(15), g, ch, vec![250.0; g.cells()]).unwrap()
    }

    fn sample(lat: f64, lon: f64, min: i64, rate: f64) -> PrecipSample {
        PrecipSample {
            lat,
            lon,
            time: t(min),
            rate,
        }
    }

    #[test]
    fn empty_swath_gives_empty_mask() {
        let g = small_grid();
        let (y, m) = rasterize_swath(&PrecipSwath::default(), &g, t(0), t(15));
        assert!(y.iter().all(|&v| v == 0.0));
        assert!(m.iter().all(|&v| !v));
    }

    #[test]
    fn same_cell_samples_are_averaged() {
        let g = small_grid();
        let s = PrecipSwath::new(vec![sample(0.45, 10.45, 1, 2.0), sample(0.46, 10.46, 2, 4.0)]).unwrap();
        let (y, m) = rasterize_swath(&s, &g, t(0), t(15));
        let (r, c) = g.index(0.45, 10.45).unwrap();
        assert_eq!(y[r * g.cols + c], 3.0);
        assert!(m[r * g.cols + c]);
        assert_eq!(m.iter().filter(|&&v| v).count(), 1);
    }

    #[test]
    fn random_samples_match_grouping_oracle() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<_> = (0..100)
            .map(|_| {
                sample(
                    rng.random_range(0.0..1.0),
                    rng.random_range(10.0..11.0),
                    rng.random_range(0..15),
                    rng.random_range(0.0..20.0),
                )
            })
            .collect();
        let s = PrecipSwath::new(samples.clone()).unwrap();
        let (y, m) = rasterize_swath(&s, &g, t(0), t(15));

        // Oracle: group by the cell whose bounds contain the sample.
        let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for smp in &samples {
            let row = (0..g.rows)
                .find(|&r| {
                    let top = g.lat_max - r as f64 * g.spacing;
                    smp.lat <= top && smp.lat > top - g.spacing
                })
                .unwrap();
            let col = (0..g.cols)
                .find(|&c| {
                    let left = g.lon_min + c as f64 * g.spacing;
                    smp.lon >= left && smp.lon < left + g.spacing
                })
                .unwrap();
            groups.entry((row, col)).or_default().push(smp.rate);
        }
        for r in 0..g.rows {
            for c in 0..g.cols {
                let i = r * g.cols + c;
                match groups.get(&(r, c)) {
                    Some(v) => {
                        assert!(m[i]);
                        let mean = v.iter().sum::<f64>() / v.len() as f64;
                        assert_eq!(y[i], mean as f32);
                    }
                    None => {
                        assert!(!m[i]);
                        assert_eq!(y[i], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn time_window_is_closed() {
        let g = small_grid();
        let sc = scene(g);
        let at_start = PrecipSwath::new(vec![sample(0.5, 10.5, 0, 1.0)]).unwrap();
        assert_eq!(collocate(&sc, &at_start, &g).unwrap().valid_count(), 1);
        let at_end = PrecipSwath::new(vec![sample(0.5, 10.5, 15, 1.0)]).unwrap();
        assert_eq!(collocate(&sc, &at_end, &g).unwrap().valid_count(), 1);
        let outside = PrecipSwath::new(vec![sample(0.5, 10.5, -1, 1.0), sample(0.5, 10.5, 16, 1.0)]).unwrap();
        assert_eq!(collocate(&sc, &outside, &g).unwrap().valid_count(), 0);
    }

    #[test]
    fn mixed_window_matches_filter_then_rasterize() {
        let g = small_grid();
        let sc = scene(g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<_> = (0..200)
            .map(|_| {
                sample(
                    rng.random_range(0.0..1.0),
                    rng.random_range(10.0..11.0),
                    rng.random_range(-20..35),
                    rng.random_range(0.0..5.0),
                )
            })
            .collect();
        let pair = collocate(&sc, &PrecipSwath::new(samples.clone()).unwrap(), &g).unwrap();
        let filtered: Vec<_> = samples.into_iter().filter(|s| s.time >= t(0) && s.time <= t(15)).collect();
        let far_past = t(-100_000);
        let far_future = t(100_000);
        let (y, m) = rasterize_swath(&PrecipSwath::new(filtered).unwrap(), &g, far_past, far_future);
        assert_eq!(pair.y, y);
        assert_eq!(pair.m, m);
        assert_eq!(pair.x, sc.data);
    }

    #[test]
    fn collocate_rejects_other_grid() {
        let g = small_grid();
        let sc = scene(g);
        let other = GridSpec::new(0.0, 1.0, 10.0, 11.0, 0.25).unwrap();
        assert!(collocate(&sc, &PrecipSwath::default(), &other).is_err());
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(PrecipSwath::new(vec![sample(0.0, 0.0, 0, -1.0)]).is_err());
        assert!(PrecipSwath::new(vec![sample(0.0, 180.0, 0, 1.0)]).is_err());
        let g = small_grid();
        let ch = vec![ChannelDescriptor::new("a", 1.0, ChannelCategory::Ir).unwrap()];
        assert!(GeoScene::new(t(10), t(0), g, ch.clone(), vec![0.0; g.cells()]).is_err());
        assert!(GeoScene::new(t(0), t(10), g, ch.clone(), vec![0.0; 3]).is_err());
        let mut bad = vec![0.0; g.cells()];
        bad[0] = f32::NAN;
        assert!(GeoScene::new(t(0), t(10), g, ch, bad).is_err());
    }
}
