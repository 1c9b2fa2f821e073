use std::fmt::Write;

use crate::{Error, Result};

/// Hit/miss counts at one threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Classifies one cell; both sides use `>= threshold`.
    #[inline]
    pub fn add(&mut self, truth: bool, pred: bool) {
        match (truth, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merged(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// Per-threshold counts over valid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    thresholds: Vec<f64>,
    counts: Vec<Counts>,
}

impl ContingencyTable {
    /// Empty table; thresholds must be finite and strictly increasing.
    pub fn new(thresholds: &[f64]) -> Result<Self> {
        if thresholds.is_empty() || thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("thresholds must be finite and strictly increasing, got {thresholds:?}")));
        }
        Ok(ContingencyTable {
            thresholds: thresholds.to_vec(),
            counts: vec![Counts::default(); thresholds.len()],
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn counts(&self) -> &[Counts] {
        &self.counts
    }

    /// Adds one valid cell.
    #[inline]
    pub fn add_cell(&mut self, truth: f64, pred: f64) {
        for (t, c) in self.thresholds.iter().zip(&mut self.counts) {
            c.add(truth >= *t, pred >= *t);
        }
    }

    /// Elementwise sum; the threshold sets must be identical.
    pub fn merge(&self, other: &ContingencyTable) -> Result<ContingencyTable> {
        if self.thresholds != other.thresholds {
            return Err(Error::ThresholdMismatch(self.thresholds.clone(), other.thresholds.clone()));
        }
        Ok(ContingencyTable {
            thresholds: self.thresholds.clone(),
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a.merged(*b)).collect(),
        })
    }
}

/// Counts over cells with `m` set. A NaN prediction never reaches a
/// threshold.
pub fn accumulate(m: &[bool], y_true: &[f32], y_pred: &[f32], thresholds: &[f64]) -> Result<ContingencyTable> {
    if m.len() != y_true.len() || m.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "mask, truth and prediction sizes differ: {}, {}, {}",
            m.len(),
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut t = ContingencyTable::new(thresholds)?;
    for i in 0..m.len() {
        if m[i] {
            t.add_cell(y_true[i] as f64, y_pred[i] as f64);
        }
    }
    Ok(t)
}

/// Sums any number of tables with identical thresholds.
pub fn merge(tables: &[ContingencyTable]) -> Result<ContingencyTable> {
    let (first, rest) = tables
        .split_first()
        .ok_or_else(|| Error::Invalid("nothing to merge".into()))?;
    rest.iter().try_fold(first.clone(), |acc, t| acc.merge(t))
}

/// Scores at one threshold; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub csi: Option<f64>,
    pub pod: Option<f64>,
    pub far: Option<f64>,
    pub bias: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn scores(c: Counts) -> Scores {
    Scores {
        csi: ratio(c.tp, c.tp + c.fp + c.fn_),
        pod: ratio(c.tp, c.tp + c.fn_),
        far: ratio(c.fp, c.tp + c.fp),
        bias: ratio(c.tp + c.fp, c.tp + c.fn_),
    }
}

/// Scores for every threshold of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<(f64, Scores, Counts)>,
}

pub fn metrics(table: &ContingencyTable) -> MetricReport {
    MetricReport {
        rows: table
            .thresholds
            .iter()
            .zip(&table.counts)
            .map(|(&t, &c)| (t, scores(c), c))
            .collect(),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "threshold,CSI,POD,FAR,Bias,TP,FP,FN,TN";

    /// CSI at `threshold`, if that threshold is in the report.
    pub fn csi_at(&self, threshold: f64) -> Option<f64> {
        self.rows.iter().find(|(t, _, _)| *t == threshold).and_then(|(_, s, _)| s.csi)
    }

    /// Undefined scores are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (t, s, c) in &self.rows {
            writeln!(
                out,
                "{t},{},{},{},{},{},{},{},{}",
                cell(s.csi),
                cell(s.pod),
                cell(s.far),
                cell(s.bias),
                c.tp,
                c.fp,
                c.fn_,
                c.tn
            )
            .expect("writing to a String");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_case() {
        let s = scores(Counts { tp: 3, fp: 1, fn_: 1, tn: 7 });
        assert_eq!(s.csi, Some(0.6));
        assert_eq!(s.pod, Some(0.75));
        assert_eq!(s.far, Some(0.25));
        assert_eq!(s.bias, Some(1.0));
        let s = scores(Counts { tn: 5, ..Default::default() });
        assert_eq!((s.csi, s.pod, s.far, s.bias), (None, None, None, None));
        let s = scores(Counts { tp: 9, ..Default::default() });
        assert_eq!((s.csi, s.pod, s.far, s.bias), (Some(1.0), Some(1.0), Some(0.0), Some(1.0)));
    }

    #[test]
    fn thresholds_validated_and_merge_checked() {
        assert!(ContingencyTable::new(&[1.0, 1.0]).is_err());
        assert!(ContingencyTable::new(&[]).is_err());
        let a = ContingencyTable::new(&[0.2, 1.0]).unwrap();
        let b = ContingencyTable::new(&[0.2, 2.0]).unwrap();
        assert!(matches!(a.merge(&b), Err(Error::ThresholdMismatch(..))));
        assert!(merge(&[]).is_err());
    }

    #[test]
    fn csv_marks_undefined() {
        let t = accumulate(&[true], &[0.0], &[0.0], &[0.2]).unwrap();
        let csv = metrics(&t).to_csv();
        assert_eq!(csv, "threshold,CSI,POD,FAR,Bias,TP,FP,FN,TN\n0.2,NA,NA,NA,NA,0,0,0,1\n");
    }

    proptest! {
        #[test]
        fn algebra_and_bounds(
            cells in prop::collection::vec((any::<bool>(), 0.0f32..10.0, 0.0f32..10.0), 0..200),
            split in 0usize..200,
        ) {
            let th = [0.2, 1.0, 2.4, 7.0];
            let m: Vec<bool> = cells.iter().map(|c| c.0).collect();
            let y: Vec<f32> = cells.iter().map(|c| c.1).collect();
            let p: Vec<f32> = cells.iter().map(|c| c.2).collect();
            let k = split.min(cells.len());
            let whole = accumulate(&m, &y, &p, &th).unwrap();
            let a = accumulate(&m[..k], &y[..k], &p[..k], &th).unwrap();
            let b = accumulate(&m[k..], &y[k..], &p[k..], &th).unwrap();
            let empty = ContingencyTable::new(&th).unwrap();
            prop_assert_eq!(&a.merge(&b).unwrap(), &whole);
            prop_assert_eq!(&b.merge(&a).unwrap(), &whole);
            prop_assert_eq!(&whole.merge(&empty).unwrap(), &whole);
            let valid = m.iter().filter(|&&v| v).count() as u64;
            for c in whole.counts() {
                prop_assert_eq!(c.total(), valid);
                let s = scores(*c);
                if let (Some(csi), Some(pod)) = (s.csi, s.pod) {
                    prop_assert!(csi <= pod);
                }
                if let Some(far) = s.far {
                    let prec = c.tp as f64 / (c.tp + c.fp) as f64;
                    prop_assert!((far + prec - 1.0).abs() < 1e-12);
                }
                if let Some(bias) = s.bias {
                    prop_assert!(bias >= 0.0);
                }
            }
        }
    }
}
