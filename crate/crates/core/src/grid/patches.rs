use super::{GriddedPair, Timestamp};
use crate::{Error, Result};

/// A gridded pair plus where and when it sits: `origin` is the top-left cell
/// in the store's parent grid and the timestamps are the scene window.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub origin: (usize, usize),
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub pair: GriddedPair,
}

/// Cuts `scene` into non-overlapping `patch × patch` tiles on a lattice
/// anchored at its top-left cell and keeps the tiles with at least one valid
/// ground-truth cell. Cells past the last whole tile are not covered.
pub fn tile_patches(scene: &PatchRecord, patch: usize) -> Result<Vec<PatchRecord>> {
    let p = &scene.pair;
    if patch == 0 || patch > p.rows || patch > p.cols {
        return Err(Error::Shape(format!(
            "patch size {patch} does not fit a {}x{} pair",
            p.rows, p.cols
        )));
    }
    let mut out = Vec::new();
    for tr in 0..p.rows / patch {
        for tc in 0..p.cols / patch {
            let (r0, c0) = (tr * patch, tc * patch);
            let any_valid = (r0..r0 + patch).any(|r| p.m[r * p.cols + c0..r * p.cols + c0 + patch].iter().any(|&v| v));
            if any_valid {
                out.push(PatchRecord {
                    origin: (scene.origin.0 + r0, scene.origin.1 + c0),
                    t_start: scene.t_start,
                    t_end: scene.t_end,
                    pair: p.crop(r0, c0, patch, patch)?,
                });
            }
        }
    }
    Ok(out)
}
