use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard limits on every brute-force enumeration in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest bundle enumerated by subset scans (proxy values, demand scans).
    pub subsets: usize,
    /// Largest item count for which the full configuration LP is built.
    pub lp_items: usize,
    /// Largest item count for explicit valuation tables.
    pub table_items: usize,
    /// Largest item count for pairwise property checks (subadditivity, monotonicity).
    pub check_items: usize,
    /// Largest number of joint atoms enumerated for exact probabilities.
    pub atoms: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            subsets: 20,
            lp_items: 12,
            table_items: 8,
            check_items: 12,
            atoms: 10_000_000,
        }
    }
}

impl Caps {
    pub(crate) fn check(what: &'static str, actual: usize, cap: usize) -> Result<()> {
        if actual > cap {
            Err(Error::capacity(what, actual as u128, cap as u128))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Caps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "subsets={},lp={},table={},check={},atoms={}",
            self.subsets, self.lp_items, self.table_items, self.check_items, self.atoms
        )
    }
}

/// Parses `key=value` pairs separated by commas, e.g. `lp=10,atoms=1000000`.
/// Unspecified keys keep their defaults.
impl FromStr for Caps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut caps = Caps::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in caps, got `{part}`")))?;
            let parsed: u64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid cap value `{value}`")))?;
            match key.trim() {
                "subsets" => caps.subsets = parsed as usize,
                "lp" => caps.lp_items = parsed as usize,
                "table" => caps.table_items = parsed as usize,
                "check" => caps.check_items = parsed as usize,
                "atoms" => caps.atoms = parsed,
                other => return Err(Error::Parse(format!("unknown cap `{other}`"))),
            }
        }
        Ok(caps)
    }
}
