use crate::env::{EVAgentSpec, GridConfig, OBS_DIM};
use crate::{Error, Result};

/// Static per-feature bounds mapping observations into [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    lower: [f64; OBS_DIM],
    upper: [f64; OBS_DIM],
}

impl Normalizer {
    pub fn new(lower: [f64; OBS_DIM], upper: [f64; OBS_DIM]) -> Result<Self> {
        if lower.iter().zip(&upper).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Config("normalizer needs finite bounds with upper > lower".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Bounds from the physical ranges of one agent's features.
    pub fn for_agent(grid: &GridConfig, spec: &EVAgentSpec) -> Result<Self> {
        let h = grid.horizon as f64;
        let target = spec.target();
        let price_lo = grid.price.c;
        let price_hi = grid.price.price(grid.max_total_load())?;
        Self::new(
            [(target - spec.battery_kwh).min(0.0), 0.0, price_lo, 0.0, 0.0],
            [target, h, price_hi, 1.0, h],
        )
    }

    pub fn for_grid(grid: &GridConfig) -> Result<Vec<Self>> {
        grid.agent_specs().iter().map(|s| Self::for_agent(grid, s)).collect()
    }

    pub fn normalize(&self, obs: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        for k in 0..OBS_DIM {
            out[k] = ((obs[k] - self.lower[k]) / (self.upper[k] - self.lower[k])).clamp(0.0, 1.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_physical_ranges_into_unit_box() {
        let grid = GridConfig::with_agents(3);
        let n = Normalizer::for_agent(&grid, &grid.ev).unwrap();
        assert_eq!(n.normalize(&[60.0, 34.0, 1e9, 1.0, 34.0]), [1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(n.normalize(&[0.0, 0.0, 0.1, 0.0, 0.0]), [0.0; 5]);
        let mid = n.normalize(&[30.0, 17.0, 0.1, 0.0, 17.0]);
        assert_eq!(mid[0], 0.5);
        assert_eq!(mid[1], 0.5);
    }

    #[test]
    fn rejects_degenerate_bounds() {
        assert!(Normalizer::new([0.0; 5], [1.0, 1.0, 0.0, 1.0, 1.0]).is_err());
    }
}
