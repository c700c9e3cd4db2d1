//! Adaptive neighbour zone around an advisee.

use serde::{Deserialize, Serialize};

use crate::env::{Cell, GridConfig};
use crate::error::{config_err, Result};

/// Box of half-width `radius` around `center`, clipped to the grid.
/// Bounds are inclusive cell indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborZone {
    pub center: Cell,
    pub radius: f64,
    pub x_min: usize,
    pub x_max: usize,
    pub y_min: usize,
    pub y_max: usize,
}

pub fn zone_radius(height: usize, width: usize, n_agents: usize) -> Result<f64> {
    if n_agents == 0 {
        return Err(config_err("neighbour zone needs at least one agent"));
    }
    Ok(((height * width) as f64 / n_agents as f64).sqrt())
}

impl NeighborZone {
    pub fn around(center: Cell, radius: f64, grid: &GridConfig) -> Self {
        let clip = |c: usize, hi: usize| {
            let lo = (c as f64 - radius).ceil().max(0.0) as usize;
            let up = (c as f64 + radius).floor().min(hi as f64) as usize;
            (lo, up)
        };
        let (x_min, x_max) = clip(center.x, grid.width - 1);
        let (y_min, y_max) = clip(center.y, grid.height - 1);
        Self {
            center,
            radius,
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// The whole grid, used by the ablations without zone restriction.
    pub fn whole_grid(center: Cell, grid: &GridConfig) -> Self {
        Self {
            center,
            radius: f64::INFINITY,
            x_min: 0,
            x_max: grid.width - 1,
            y_min: 0,
            y_max: grid.height - 1,
        }
    }

    /// Chebyshev-box membership.
    pub fn contains(&self, c: Cell) -> bool {
        let dx = c.x.abs_diff(self.center.x) as f64;
        let dy = c.y.abs_diff(self.center.y) as f64;
        dx <= self.radius && dy <= self.radius
    }
}

/// Zone with radius `sqrt(H·W / |N|)` around the advisee.
pub fn neighbor_zone(
    n_agents: usize,
    advisee_pos: Cell,
    grid: &GridConfig,
) -> Result<NeighborZone> {
    let r = zone_radius(grid.height, grid.width, n_agents)?;
    Ok(NeighborZone::around(advisee_pos, r, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn medium_grid_membership() {
        let grid = GridConfig::new(10, 10, 10, 3);
        let z = neighbor_zone(10, Cell::new(5, 5), &grid).unwrap();
        assert!((z.radius - 10f64.sqrt()).abs() < 1e-12);
        assert!((z.radius - 3.1623).abs() < 1e-4);
        assert!(z.contains(Cell::new(8, 7)));
        assert!(!z.contains(Cell::new(9, 5)));
        assert_eq!((z.x_min, z.x_max, z.y_min, z.y_max), (2, 8, 2, 8));
    }

    #[test]
    fn radii_for_presets() {
        assert!((zone_radius(5, 5, 5).unwrap() - 2.2361).abs() < 1e-4);
        assert!((zone_radius(30, 30, 20).unwrap() - 6.7082).abs() < 1e-4);
        assert!(zone_radius(5, 5, 0).is_err());
    }

    #[test]
    fn bounds_clip_at_edges() {
        let grid = GridConfig::new(10, 10, 10, 3);
        let z = neighbor_zone(10, Cell::new(0, 9), &grid).unwrap();
        assert_eq!((z.x_min, z.x_max, z.y_min, z.y_max), (0, 3, 6, 9));
    }

    proptest! {
        #[test]
        fn radius_monotone(h in 2usize..40, w in 2usize..40, n in 1usize..50) {
            let r = zone_radius(h, w, n).unwrap();
            prop_assert!(zone_radius(h, w, n + 1).unwrap() < r);
            prop_assert!(zone_radius(h + 1, w, n).unwrap() > r);
        }

        #[test]
        fn bounds_agree_with_membership(x in 0usize..12, y in 0usize..9, n in 1usize..30, cx in 0usize..12, cy in 0usize..9) {
            let grid = GridConfig::new(9, 12, n, 0);
            let z = neighbor_zone(n, Cell::new(cx, cy), &grid).unwrap();
            let inside_box = (z.x_min..=z.x_max).contains(&x) && (z.y_min..=z.y_max).contains(&y);
            prop_assert_eq!(inside_box, z.contains(Cell::new(x, y)));
        }
    }
}
