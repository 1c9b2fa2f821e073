use crate::grid::{GriddedPair, PatchRecord};
use crate::{Error, Result};

/// Geometric augmentations applied identically to `x`, `y` and `m`.
/// Rotations are counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentOp {
    Identity,
    HFlip,
    VFlip,
    Rot90,
    Rot180,
    Rot270,
}

impl AugmentOp {
    pub const ALL: [AugmentOp; 6] = [
        AugmentOp::Identity,
        AugmentOp::HFlip,
        AugmentOp::VFlip,
        AugmentOp::Rot90,
        AugmentOp::Rot180,
        AugmentOp::Rot270,
    ];

    pub fn inverse(self) -> AugmentOp {
        match self {
            AugmentOp::Rot90 => AugmentOp::Rot270,
            AugmentOp::Rot270 => AugmentOp::Rot90,
            other => other,
        }
    }

    fn swaps_axes(self) -> bool {
        matches!(self, AugmentOp::Rot90 | AugmentOp::Rot270)
    }

    /// Source cell for output cell `(r, c)` of a `rows × cols` input.
    #[inline]
    fn source(self, r: usize, c: usize, rows: usize, cols: usize) -> (usize, usize) {
        match self {
            AugmentOp::Identity => (r, c),
            AugmentOp::HFlip => (r, cols - 1 - c),
            AugmentOp::VFlip => (rows - 1 - r, c),
            AugmentOp::Rot180 => (rows - 1 - r, cols - 1 - c),
            AugmentOp::Rot90 => (c, cols - 1 - r),
            AugmentOp::Rot270 => (rows - 1 - c, r),
        }
    }

    /// Transforms one `rows × cols` plane.
    pub fn apply_plane<T: Copy>(self, src: &[T], rows: usize, cols: usize) -> Vec<T> {
        debug_assert_eq!(src.len(), rows * cols);
        if self == AugmentOp::Identity {
            return src.to_vec();
        }
        let (out_rows, out_cols) = if self.swaps_axes() { (cols, rows) } else { (rows, cols) };
        let mut out = Vec::with_capacity(src.len());
        for r in 0..out_rows {
            for c in 0..out_cols {
                let (sr, sc) = self.source(r, c, rows, cols);
                out.push(src[sr * cols + sc]);
            }
        }
        out
    }
}

/// Applies `op` to every plane of the record; the channel axis is untouched.
pub fn augment(record: &PatchRecord, op: AugmentOp) -> Result<PatchRecord> {
    let p = &record.pair;
    if op.swaps_axes() && p.rows != p.cols {
        return Err(Error::Shape(format!("{op:?} needs a square patch, got {}x{}", p.rows, p.cols)));
    }
    let mut x = Vec::with_capacity(p.x.len());
    for c in 0..p.channels {
        x.extend(op.apply_plane(p.plane(c), p.rows, p.cols));
    }
    let (rows, cols) = if op.swaps_axes() { (p.cols, p.rows) } else { (p.rows, p.cols) };
    Ok(PatchRecord {
        pair: GriddedPair::new(
            rows,
            cols,
            p.channels,
            x,
            op.apply_plane(&p.y, p.rows, p.cols),
            op.apply_plane(&p.m, p.rows, p.cols),
        )?,
        ..record.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{class_histogram, IntensityThresholds};
    use chrono::{TimeZone, Utc};
    use rand::{Rng, SeedableRng};

    fn random_record(rows: usize, cols: usize, seed: u64) -> PatchRecord {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rows * cols;
        let t = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        PatchRecord {
            origin: (3, 4),
            t_start: t,
            t_end: t,
            pair: GriddedPair::new(
                rows,
                cols,
                3,
                (0..3 * n).map(|_| rng.random()).collect(),
                (0..n).map(|_| rng.random_range(0.0..10.0)).collect(),
                (0..n).map(|_| rng.random_bool(0.3)).collect(),
            )
            .unwrap(),
        }
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let r = random_record(8, 8, 1);
        let mut cur = r.clone();
        for _ in 0..4 {
            cur = augment(&cur, AugmentOp::Rot90).unwrap();
        }
        assert_eq!(cur, r);
    }

    #[test]
    fn flips_are_involutions() {
        let r = random_record(6, 9, 2);
        for op in [AugmentOp::HFlip, AugmentOp::VFlip, AugmentOp::Rot180] {
            assert_eq!(augment(&augment(&r, op).unwrap(), op).unwrap(), r);
        }
    }

    #[test]
    fn inverse_undoes_every_op() {
        let r = random_record(7, 7, 3);
        for op in AugmentOp::ALL {
            assert_eq!(augment(&augment(&r, op).unwrap(), op.inverse()).unwrap(), r);
        }
    }

    #[test]
    fn rotation_direction() {
        // 2x2 plane [a b; c d] rotated counter-clockwise is [b d; a c].
        assert_eq!(AugmentOp::Rot90.apply_plane(&[1, 2, 3, 4], 2, 2), vec![2, 4, 1, 3]);
        assert_eq!(AugmentOp::Rot270.apply_plane(&[1, 2, 3, 4], 2, 2), vec![3, 1, 4, 2]);
        assert_eq!(AugmentOp::HFlip.apply_plane(&[1, 2, 3, 4], 2, 2), vec![2, 1, 4, 3]);
        assert_eq!(AugmentOp::VFlip.apply_plane(&[1, 2, 3, 4], 2, 2), vec![3, 4, 1, 2]);
    }

    #[test]
    fn non_square_rotation_rejected() {
        let r = random_record(4, 6, 4);
        assert!(augment(&r, AugmentOp::Rot90).is_err());
        assert!(augment(&r, AugmentOp::Rot270).is_err());
        assert!(augment(&r, AugmentOp::HFlip).is_ok());
    }

    #[test]
    fn histogram_is_invariant() {
        let t = IntensityThresholds::default();
        let r = random_record(16, 16, 5);
        let h = class_histogram(std::slice::from_ref(&r), &t).unwrap();
        for op in AugmentOp::ALL {
            let a = augment(&r, op).unwrap();
            assert_eq!(class_histogram(&[a], &t).unwrap(), h);
        }
    }

    #[test]
    fn channels_move_together() {
        let r = random_record(5, 5, 6);
        let a = augment(&r, AugmentOp::Rot90).unwrap();
        for c in 0..3 {
            assert_eq!(a.pair.plane(c), AugmentOp::Rot90.apply_plane(r.pair.plane(c), 5, 5).as_slice());
        }
    }
}
