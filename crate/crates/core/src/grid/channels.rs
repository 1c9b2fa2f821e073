use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Name of the 10.8 µm longwave infrared window channel.
pub const LONGWAVE_WINDOW: &str = "IR_108";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelCategory {
    Visible,
    NearIr,
    Ir,
}

impl fmt::Display for ChannelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelCategory::Visible => "visible",
            ChannelCategory::NearIr => "near-IR",
            ChannelCategory::Ir => "IR",
        })
    }
}

impl FromStr for ChannelCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visible" => Ok(ChannelCategory::Visible),
            "near-IR" => Ok(ChannelCategory::NearIr),
            "IR" => Ok(ChannelCategory::Ir),
            other => Err(Error::Invalid(format!("unknown channel category `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDescriptor {
    pub name: String,
    /// Center wavelength in microns.
    pub center_wavelength: f64,
    pub category: ChannelCategory,
}

impl ChannelDescriptor {
    pub fn new(name: impl Into<String>, center_wavelength: f64, category: ChannelCategory) -> Result<Self> {
        let name = name.into();
        if !(center_wavelength > 0.0 && center_wavelength.is_finite()) {
            return Err(Error::Invalid(format!("channel `{name}` has non-positive wavelength")));
        }
        if name.is_empty() || name.contains('|') {
            return Err(Error::Invalid(format!("bad channel name `{name}`")));
        }
        Ok(ChannelDescriptor {
            name,
            center_wavelength,
            category,
        })
    }

    /// SEVIRI-like channel set, longwave window first. Synthetic scenes use
    /// a prefix of this list.
    pub fn catalog() -> Vec<ChannelDescriptor> {
        use ChannelCategory::*;
        [
            ("IR_108", 10.8, Ir),
            ("WV_062", 6.2, Ir),
            ("VIS_006", 0.6, Visible),
            ("NIR_016", 1.6, NearIr),
            ("IR_039", 3.9, Ir),
            ("WV_073", 7.3, Ir),
            ("IR_087", 8.7, Ir),
            ("IR_120", 12.0, Ir),
            ("IR_097", 9.7, Ir),
            ("IR_134", 13.4, Ir),
            ("NIR_008", 0.8, NearIr),
        ]
        .into_iter()
        .map(|(n, w, c)| ChannelDescriptor::new(n, w, c).expect("static catalog"))
        .collect()
    }

    pub(crate) fn encode(&self) -> String {
        format!("{}|{}|{}", self.name, self.center_wavelength, self.category)
    }

    pub(crate) fn decode(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return Err(Error::Invalid(format!("bad channel descriptor `{s}`")));
        }
        let wl = parts[1]
            .parse()
            .map_err(|_| Error::Invalid(format!("bad wavelength in `{s}`")))?;
        ChannelDescriptor::new(parts[0], wl, parts[2].parse()?)
    }
}

/// Names must be unique within a scene.
pub(crate) fn check_unique(channels: &[ChannelDescriptor]) -> Result<()> {
    for (i, a) in channels.iter().enumerate() {
        if channels[..i].iter().any(|b| b.name == a.name) {
            return Err(Error::Invalid(format!("duplicate channel `{}`", a.name)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_valid() {
        let cat = ChannelDescriptor::catalog();
        assert_eq!(cat[0].name, LONGWAVE_WINDOW);
        check_unique(&cat).unwrap();
        for c in &cat {
            assert_eq!(ChannelDescriptor::decode(&c.encode()).unwrap(), *c);
        }
    }

    #[test]
    fn rejects_bad_descriptors() {
        assert!(ChannelDescriptor::new("x", 0.0, ChannelCategory::Ir).is_err());
        let dup = vec![
            ChannelDescriptor::new("a", 1.0, ChannelCategory::Ir).unwrap(),
            ChannelDescriptor::new("a", 2.0, ChannelCategory::Ir).unwrap(),
        ];
        assert!(check_unique(&dup).is_err());
    }
}
