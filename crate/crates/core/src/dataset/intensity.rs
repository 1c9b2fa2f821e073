use std::fmt;

use crate::grid::PatchRecord;
use crate::{Error, Result};

/// Lower bounds (mm/h) of the light, medium, heavy and extreme classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityThresholds {
    pub light: f64,
    pub medium: f64,
    pub heavy: f64,
    pub extreme: f64,
}

impl Default for IntensityThresholds {
    fn default() -> Self {
        IntensityThresholds {
            light: 0.2,
            medium: 1.0,
            heavy: 2.4,
            extreme: 7.0,
        }
    }
}

impl IntensityThresholds {
    pub fn new(light: f64, medium: f64, heavy: f64, extreme: f64) -> Result<Self> {
        if !(0.0 < light && light < medium && medium < heavy && heavy < extreme && extreme.is_finite()) {
            return Err(Error::Config(format!(
                "intensity thresholds must be strictly increasing and positive, got {light}, {medium}, {heavy}, {extreme}"
            )));
        }
        Ok(IntensityThresholds {
            light,
            medium,
            heavy,
            extreme,
        })
    }

    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.light, self.medium, self.heavy, self.extreme]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntensityClass {
    None,
    Light,
    Medium,
    Heavy,
    Extreme,
}

impl IntensityClass {
    pub const ALL: [IntensityClass; 5] = [
        IntensityClass::None,
        IntensityClass::Light,
        IntensityClass::Medium,
        IntensityClass::Heavy,
        IntensityClass::Extreme,
    ];
}

impl fmt::Display for IntensityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntensityClass::None => "none",
            IntensityClass::Light => "light",
            IntensityClass::Medium => "medium",
            IntensityClass::Heavy => "heavy",
            IntensityClass::Extreme => "extreme",
        })
    }
}

pub fn classify_intensity(rate: f64, t: &IntensityThresholds) -> Result<IntensityClass> {
    if !(rate >= 0.0) {
        return Err(Error::Invalid(format!("negative rain rate {rate}")));
    }
    Ok(if rate < t.light {
        IntensityClass::None
    } else if rate < t.medium {
        IntensityClass::Light
    } else if rate < t.heavy {
        IntensityClass::Medium
    } else if rate < t.extreme {
        IntensityClass::Heavy
    } else {
        IntensityClass::Extreme
    })
}

/// Counts of valid cells per intensity class, indexed like [`IntensityClass::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassHistogram {
    pub counts: [u64; 5],
}

impl ClassHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, class: IntensityClass) -> u64 {
        self.counts[class as usize]
    }

    /// Plain-text `class count fraction` table.
    pub fn to_table(&self) -> String {
        let total = self.total();
        let mut out = String::from("class\tcount\tfraction\n");
        for class in IntensityClass::ALL {
            let n = self.get(class);
            let frac = if total > 0 {
                format!("{:.6}", n as f64 / total as f64)
            } else {
                "NA".into()
            };
            out.push_str(&format!("{class}\t{n}\t{frac}\n"));
        }
        out
    }
}

/// Histogram over valid (`m = 1`) cells only.
pub fn class_histogram(records: &[PatchRecord], t: &IntensityThresholds) -> Result<ClassHistogram> {
    let mut h = ClassHistogram::default();
    for r in records {
        for (&y, &m) in r.pair.y.iter().zip(&r.pair.m) {
            if m {
                h.counts[classify_intensity(y as f64, t)? as usize] += 1;
            }
        }
    }
    Ok(h)
}
