use std::cmp::Ordering;

use super::{
    drop_zero, DisjointSet, FeatureRegion, MergeEvent, MergeHistory, PersistenceDiagram, PersistencePoint, PointKind,
    ScalarGrid,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl std::str::FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SublevelOptions {
    pub connectivity: Connectivity,
    pub keep_zero: bool,
}

/// 0D sublevel-set persistence of a grid, dropping zero-persistence pairs.
pub fn sublevel_pd0(grid: &ScalarGrid, connectivity: Connectivity) -> Result<(PersistenceDiagram, MergeHistory)> {
    sublevel_pd0_with(
        grid,
        SublevelOptions {
            connectivity,
            keep_zero: false,
        },
    )
}

/// Cells enter in (value, raster index) order; at a merge the component whose
/// birth cell comes first in that order survives.
pub fn sublevel_pd0_with(grid: &ScalarGrid, opts: SublevelOptions) -> Result<(PersistenceDiagram, MergeHistory)> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let values = grid.values();
    let n = values.len();
    let order_key = |a: usize, b: usize| values[a].total_cmp(&values[b]).then(a.cmp(&b));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| order_key(a, b));

    let mut uf = DisjointSet::new(n);
    let mut birth_of = vec![usize::MAX; n];
    let mut present = vec![false; n];
    let mut events = Vec::with_capacity(2 * n);
    let mut points = Vec::new();

    for &cell in &order {
        let level = values[cell];
        events.push(MergeEvent::ComponentBorn { level, cell });
        present[cell] = true;
        birth_of[cell] = cell;
        for nb in grid.neighbors(cell, opts.connectivity) {
            if !present[nb] {
                continue;
            }
            let (rc, rn) = (uf.find(cell), uf.find(nb));
            if rc == rn {
                continue;
            }
            let (bc, bn) = (birth_of[rc], birth_of[rn]);
            let (older, younger) = match order_key(bc, bn) {
                Ordering::Less => (bc, bn),
                _ => (bn, bc),
            };
            events.push(MergeEvent::Merge {
                level,
                younger,
                older,
                saddle: cell,
            });
            points.push(
                PersistencePoint::new(values[younger], level, 0, PointKind::Ordinary)
                    .with_cells(Some(younger), Some(cell)),
            );
            let root = uf.union(rc, rn);
            birth_of[root] = older;
        }
    }

    if !opts.keep_zero {
        drop_zero(&mut points);
    }

    let roots: Vec<usize> = (0..n).map(|c| birth_of[uf.find(c)]).collect();
    let mut essential: Vec<usize> = roots.clone();
    essential.sort_unstable();
    essential.dedup();
    points.extend(essential.into_iter().map(|b| {
        PersistencePoint::new(values[b], f64::INFINITY, 0, PointKind::Essential).with_cells(Some(b), None)
    }));

    Ok((PersistenceDiagram::new(points, ""), MergeHistory { events, roots }))
}

/// Pixels of the component of `{f < death}` that contains the point's birth
/// cell, i.e. the feature just before it merges into an older one. Essential
/// points give their whole final component.
pub fn feature_region(grid: &ScalarGrid, history: &MergeHistory, point: &PersistencePoint) -> Result<FeatureRegion> {
    if grid.len() != history.num_cells() {
        return Err(Error::invalid(format!(
            "grid has {} cells but merge history has {}",
            grid.len(),
            history.num_cells()
        )));
    }
    let birth_cell = point
        .birth_cell
        .filter(|&c| c < grid.len())
        .ok_or_else(|| Error::invalid("point has no birth cell on this grid"))?;

    if point.kind == PointKind::Essential {
        if history.roots[birth_cell] != birth_cell {
            return Err(Error::invalid(format!("cell {birth_cell} is not a final component")));
        }
        let pixels = (0..grid.len()).filter(|&c| history.roots[c] == birth_cell).collect();
        return Ok(FeatureRegion {
            point: point.clone(),
            pixels,
        });
    }

    let death = point.death;
    let found = history.events.iter().any(|e| {
        matches!(*e, MergeEvent::Merge { level, younger, .. } if younger == birth_cell && level == death)
    });
    if !found || grid.value(birth_cell) != point.birth {
        return Err(Error::invalid(format!(
            "point ({}, {}) is not in the merge history",
            point.birth, point.death
        )));
    }
    if point.birth == death {
        return Ok(FeatureRegion {
            point: point.clone(),
            pixels: vec![birth_cell],
        });
    }

    let n = grid.len();
    let mut uf = DisjointSet::new(n);
    let mut present = vec![false; n];
    for event in history.events.iter().take_while(|e| e.level() < death) {
        match *event {
            MergeEvent::ComponentBorn { cell, .. } => present[cell] = true,
            MergeEvent::Merge { younger, older, .. } => {
                uf.union(younger, older);
            }
        }
    }
    let root = uf.find(birth_cell);
    let pixels = (0..n).filter(|&c| present[c] && uf.find(c) == root).collect();
    Ok(FeatureRegion {
        point: point.clone(),
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, v: &[f64]) -> ScalarGrid {
        ScalarGrid::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn one_by_three_valley_pair() {
        let g = grid(3, 1, &[1.0, 5.0, 2.0]);
        let (d, _) = sublevel_pd0(&g, Connectivity::Four).unwrap();
        let finite: Vec<_> = d.finite_points().collect();
        assert_eq!(finite.len(), 1);
        assert_eq!((finite[0].birth, finite[0].death), (2.0, 5.0));
        assert_eq!(finite[0].birth_cell, Some(2));
        assert_eq!(finite[0].death_cell, Some(1));
        let ess: Vec<_> = d.of_kind(PointKind::Essential).collect();
        assert_eq!(ess.len(), 1);
        assert_eq!(ess[0].birth, 1.0);
        assert!(ess[0].death.is_infinite());
    }

    #[test]
    fn constant_grid_is_one_component() {
        let g = grid(3, 3, &[7.0; 9]);
        let (d, _) = sublevel_pd0(&g, Connectivity::Four).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.points[0].kind, PointKind::Essential);
        assert_eq!(d.points[0].birth, 7.0);
        let region = feature_region(&g, &sublevel_pd0(&g, Connectivity::Four).unwrap().1, &d.points[0]).unwrap();
        assert_eq!(region.pixels, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn keep_zero_retains_plateau_pairs() {
        let g = grid(3, 1, &[1.0, 1.0, 2.0]);
        let opts = SublevelOptions {
            keep_zero: true,
            ..Default::default()
        };
        let (d, _) = sublevel_pd0_with(&g, opts).unwrap();
        assert_eq!(d.finite_points().count(), 2);
        assert!(d.finite_points().all(|p| p.birth == p.death));
        let (d, _) = sublevel_pd0(&g, Connectivity::Four).unwrap();
        assert_eq!(d.finite_points().count(), 0);
    }

    #[test]
    fn diagonal_neighbours_only_join_under_eight_connectivity() {
        let g = grid(2, 2, &[0.0, 9.0, 9.0, 1.0]);
        let (d4, _) = sublevel_pd0(&g, Connectivity::Four).unwrap();
        let (d8, _) = sublevel_pd0(&g, Connectivity::Eight).unwrap();
        assert_eq!(d4.finite_points().next().map(|p| (p.birth, p.death)), Some((1.0, 9.0)));
        assert_eq!(d8.finite_points().count(), 0);
    }

    #[test]
    fn region_of_valley_is_its_basin() {
        let g = grid(3, 1, &[1.0, 5.0, 2.0]);
        let (d, h) = sublevel_pd0(&g, Connectivity::Four).unwrap();
        let p = d.finite_points().next().unwrap();
        assert_eq!(feature_region(&g, &h, p).unwrap().pixels, vec![2]);
    }

    #[test]
    fn region_rejects_foreign_points() {
        let g = grid(3, 1, &[1.0, 5.0, 2.0]);
        let (_, h) = sublevel_pd0(&g, Connectivity::Four).unwrap();
        let bogus = PersistencePoint::ordinary(2.0, 4.0).with_cells(Some(2), Some(1));
        assert!(feature_region(&g, &h, &bogus).is_err());
        let other = grid(2, 1, &[0.0, 1.0]);
        let p = PersistencePoint::ordinary(2.0, 5.0).with_cells(Some(2), Some(1));
        assert!(feature_region(&other, &h, &p).is_err());
    }

    #[test]
    fn history_is_sorted_and_obeys_elder_rule() {
        let g = grid(4, 3, &[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0]);
        let (_, h) = sublevel_pd0(&g, Connectivity::Four).unwrap();
        assert!(h.events.windows(2).all(|w| w[0].level() <= w[1].level()));
        for e in h.merges() {
            if let MergeEvent::Merge { younger, older, .. } = *e {
                let key = |c: usize| (g.value(c), c);
                assert!(key(older) < key(younger));
            }
        }
    }
}
