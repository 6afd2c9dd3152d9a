use std::fmt;

use crate::error::{Error, Result};

/// The five global ridge patterns, indexed 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FingerprintClass {
    Arch,
    TentedArch,
    LeftLoop,
    RightLoop,
    Whorl,
}

impl FingerprintClass {
    pub const ALL: [FingerprintClass; 5] = [
        FingerprintClass::Arch,
        FingerprintClass::TentedArch,
        FingerprintClass::LeftLoop,
        FingerprintClass::RightLoop,
        FingerprintClass::Whorl,
    ];

    pub fn from_index(index: usize) -> Result<Self> {
        index
            .checked_sub(1)
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or_else(|| Error::Domain(format!("class index {index} outside 1..=5")))
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            FingerprintClass::Arch => "arch",
            FingerprintClass::TentedArch => "tented_arch",
            FingerprintClass::LeftLoop => "left_loop",
            FingerprintClass::RightLoop => "right_loop",
            FingerprintClass::Whorl => "whorl",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Domain(format!("unknown class name {name:?}")))
    }

    /// `(cores, deltas)` of the class template.
    pub fn singularity_counts(self) -> (usize, usize) {
        match self {
            FingerprintClass::Arch => (0, 0),
            FingerprintClass::TentedArch | FingerprintClass::LeftLoop | FingerprintClass::RightLoop => {
                (1, 1)
            }
            FingerprintClass::Whorl => (2, 2),
        }
    }
}

impl fmt::Display for FingerprintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_name_bijection() {
        for (i, class) in FingerprintClass::ALL.iter().enumerate() {
            assert_eq!(class.index(), i + 1);
            assert_eq!(FingerprintClass::from_index(i + 1).unwrap(), *class);
            assert_eq!(FingerprintClass::from_name(class.name()).unwrap(), *class);
        }
        assert!(FingerprintClass::from_index(0).is_err());
        assert!(FingerprintClass::from_index(6).is_err());
        assert!(FingerprintClass::from_name("spiral").is_err());
    }
}
