use std::fmt;

use serde::{Deserialize, Serialize};

/// Values below this are reserved for globally accessible VNIs and are never
/// handed out by the allocator.
pub const RESERVED_VNI_CEILING: u16 = 1024;

/// A Slingshot virtual network identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vni(pub u16);

impl Vni {
    pub fn get(self) -> u16 {
        self.0
    }
}

impl fmt::Display for Vni {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u16> for Vni {
    fn from(v: u16) -> Self {
        Vni(v)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VniRangeError {
    #[error("empty VNI range: {start} > {end}")]
    Empty { start: u16, end: u16 },
    #[error("VNI range start {0} overlaps the reserved range below {RESERVED_VNI_CEILING}")]
    Reserved(u16),
}

/// Inclusive range of allocatable VNIs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VniRange {
    start: Vni,
    end: Vni,
}

impl VniRange {
    pub fn new(start: u16, end: u16) -> Result<Self, VniRangeError> {
        if start < RESERVED_VNI_CEILING {
            return Err(VniRangeError::Reserved(start));
        }
        if start > end {
            return Err(VniRangeError::Empty { start, end });
        }
        Ok(Self {
            start: Vni(start),
            end: Vni(end),
        })
    }

    pub fn start(&self) -> Vni {
        self.start
    }

    pub fn end(&self) -> Vni {
        self.end
    }

    pub fn contains(&self, vni: Vni) -> bool {
        self.start <= vni && vni <= self.end
    }

    pub fn len(&self) -> usize {
        usize::from(self.end.0 - self.start.0) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = Vni> {
        (self.start.0..=self.end.0).map(Vni)
    }
}

impl Default for VniRange {
    fn default() -> Self {
        Self {
            start: Vni(RESERVED_VNI_CEILING),
            end: Vni(u16::MAX),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pool_bounds() {
        let r = VniRange::default();
        assert_eq!(r.start(), Vni(1024));
        assert_eq!(r.end(), Vni(65535));
        assert_eq!(r.len(), 64512);
        assert!(!r.contains(Vni(1023)));
    }

    #[test]
    fn rejects_reserved_and_inverted() {
        assert_eq!(VniRange::new(10, 20), Err(VniRangeError::Reserved(10)));
        assert!(matches!(
            VniRange::new(2000, 1999),
            Err(VniRangeError::Empty { .. })
        ));
        assert_eq!(VniRange::new(2000, 2000).unwrap().len(), 1);
    }
}
