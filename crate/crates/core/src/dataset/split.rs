use std::collections::BTreeSet;

use chrono::Datelike;

use crate::grid::PatchRecord;
use crate::{Error, Result};

/// Assigns records to `(train, validation)` by the year of `t_start`.
/// Records dated in neither year set are dropped.
pub fn split_by_period(
    records: Vec<PatchRecord>,
    train_years: &BTreeSet<i32>,
    validation_years: &BTreeSet<i32>,
) -> Result<(Vec<PatchRecord>, Vec<PatchRecord>)> {
    if let Some(y) = train_years.intersection(validation_years).next() {
        return Err(Error::Config(format!("year {y} is in both the train and validation periods")));
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for r in records {
        let year = r.t_start.year();
        if train_years.contains(&year) {
            train.push(r);
        } else if validation_years.contains(&year) {
            validation.push(r);
        }
    }
    Ok((train, validation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GriddedPair;
    use chrono::{TimeZone, Utc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(year: i32, tag: usize) -> PatchRecord {
        let t = Utc.with_ymd_and_hms(year, 7, 1, 0, 0, 0).unwrap();
        PatchRecord {
            origin: (tag, 0),
            t_start: t,
            t_end: t,
            pair: GriddedPair::new(1, 1, 1, vec![0.0], vec![0.0], vec![true]).unwrap(),
        }
    }

    fn years(r: std::ops::RangeInclusive<i32>) -> BTreeSet<i32> {
        r.collect()
    }

    #[test]
    fn validation_year_goes_to_validation() {
        let (t, v) = split_by_period(vec![rec(2022, 0), rec(2019, 1)], &years(2016..=2021), &years(2022..=2022)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].origin.0, 0);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].origin.0, 1);
    }

    #[test]
    fn overlapping_periods_rejected() {
        assert!(split_by_period(vec![], &years(2016..=2022), &years(2022..=2022)).is_err());
    }

    #[test]
    fn random_records_match_year_lookup() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs: Vec<_> = (0..1000).map(|i| rec(rng.random_range(2010..2025), i)).collect();
        let (ty, vy) = (years(2016..=2021), years(2022..=2022));
        let (t, v) = split_by_period(recs.clone(), &ty, &vy).unwrap();
        let expect_t: Vec<_> = recs.iter().filter(|r| ty.contains(&r.t_start.year())).map(|r| r.origin).collect();
        let expect_v: Vec<_> = recs.iter().filter(|r| vy.contains(&r.t_start.year())).map(|r| r.origin).collect();
        assert_eq!(t.iter().map(|r| r.origin).collect::<Vec<_>>(), expect_t);
        assert_eq!(v.iter().map(|r| r.origin).collect::<Vec<_>>(), expect_v);
    }
}
