use serde::{Deserialize, Serialize};

/// Boolean model selectors per time step: `lam` by forward arc, `gam` by bus pair,
/// `phi` by arc (forward then reverse).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresolveFlags {
    pub lam: Vec<Vec<bool>>,
    pub gam: Vec<Vec<bool>>,
    pub phi: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlagCensus {
    pub lam: usize,
    pub gam: usize,
    pub phi: usize,
}

impl PresolveFlags {
    pub fn uniform(horizon: usize, branches: usize, pairs: usize, lam: bool, gam: bool, phi: bool) -> Self {
        Self {
            lam: vec![vec![lam; branches]; horizon],
            gam: vec![vec![gam; pairs]; horizon],
            phi: vec![vec![phi; 2 * branches]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.lam.len()
    }

    pub fn census(&self) -> FlagCensus {
        let count = |v: &[Vec<bool>]| v.iter().flatten().filter(|b| **b).count();
        FlagCensus {
            lam: count(&self.lam),
            gam: count(&self.gam),
            phi: count(&self.phi),
        }
    }
}
