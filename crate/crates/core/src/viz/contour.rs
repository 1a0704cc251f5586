/// Isocontour segments in grid coordinates: x is the column, y the row, and
/// grid values sit at integer coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourSet {
    pub isovalue: f64,
    pub segments: Vec<[(f64, f64); 2]>,
}

/// Marching squares over a row-major `n_y x n_x` grid. A corner is inside
/// when its value is >= `iso`. Saddle cells use the mean of the four corners
/// to decide whether the inside corners connect.
pub fn marching_squares(values: &[f64], n_x: usize, n_y: usize, iso: f64) -> ContourSet {
    let mut segments = Vec::new();
    if n_x < 2 || n_y < 2 {
        return ContourSet { isovalue: iso, segments };
    }
    let v = |x: usize, y: usize| values[y * n_x + x];
    for y in 0..n_y - 1 {
        for x in 0..n_x - 1 {
            // corners clockwise from top-left; edge k joins corner k and k+1
            let pos = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
            let val = pos.map(|(px, py)| v(px, py));
            let inside = val.map(|c| c >= iso);
            let crossing = |k: usize| -> (f64, f64) {
                let (a, b) = (k, (k + 1) % 4);
                let t = (iso - val[a]) / (val[b] - val[a]);
                let (ax, ay) = (pos[a].0 as f64, pos[a].1 as f64);
                let (bx, by) = (pos[b].0 as f64, pos[b].1 as f64);
                (ax + (bx - ax) * t, ay + (by - ay) * t)
            };
            let crossed: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
            match crossed.len() {
                2 => segments.push([crossing(crossed[0]), crossing(crossed[1])]),
                4 => {
                    let centre_inside = val.iter().sum::<f64>() / 4.0 >= iso;
                    // cut off the two corners whose state differs from the centre
                    for k in 0..4 {
                        if inside[k] != centre_inside {
                            segments.push([crossing((k + 3) % 4), crossing(k)]);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    ContourSet { isovalue: iso, segments }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn segments_cross(s: &[(f64, f64); 2], t: &[(f64, f64); 2]) -> bool {
    let d1 = cross(t[0], t[1], s[0]);
    let d2 = cross(t[0], t[1], s[1]);
    let d3 = cross(s[0], s[1], t[0]);
    let d4 = cross(s[0], s[1], t[1]);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn cell_of(s: &[(f64, f64); 2]) -> (i64, i64) {
    let mx = (s[0].0 + s[1].0) / 2.0;
    let my = (s[0].1 + s[1].1) / 2.0;
    (mx.floor() as i64, my.floor() as i64)
}

/// True when the superlevel regions of increasing isovalues are nested:
/// grid points inside a higher level are inside every lower one, and no
/// contour segment of one level crosses a segment of another.
pub fn contours_nested(values: &[f64], n_x: usize, n_y: usize, isovalues: &[f64]) -> bool {
    let mut isos = isovalues.to_vec();
    isos.sort_by(f64::total_cmp);
    for w in isos.windows(2) {
        if values.iter().any(|&v| v >= w[1] && v < w[0]) {
            return false;
        }
    }
    let sets: Vec<ContourSet> = isos.iter().map(|&l| marching_squares(values, n_x, n_y, l)).collect();
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            for s in &a.segments {
                let cell = cell_of(s);
                if b.segments.iter().any(|t| cell_of(t) == cell && segments_cross(s, t)) {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_below_is_empty() {
        assert!(marching_squares(&[0.2; 9], 3, 3, 0.5).segments.is_empty());
        assert!(marching_squares(&[0.7; 9], 3, 3, 0.5).segments.is_empty());
    }

    #[test]
    fn two_by_two_midpoints() {
        let c = marching_squares(&[0.0, 0.0, 1.0, 1.0], 2, 2, 0.5);
        assert_eq!(c.segments.len(), 1);
        let mut pts = c.segments[0].to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(pts, vec![(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn saddle_follows_centre() {
        // inside corners on one diagonal
        let high_centre = marching_squares(&[1.0, 0.0, 0.2, 1.0], 2, 2, 0.5);
        let low_centre = marching_squares(&[1.0, 0.0, 0.0, 0.9], 2, 2, 0.5);
        assert_eq!(high_centre.segments.len(), 2);
        assert_eq!(low_centre.segments.len(), 2);
        // centre inside: the outside corners (top-right, bottom-left) are cut off
        let near = |s: &[(f64, f64); 2], c: (f64, f64)| s.iter().all(|p| (p.0 - c.0).abs() <= 1.0 && (p.1 - c.1).abs() <= 1.0 && (p.0 - c.0).abs() + (p.1 - c.1).abs() <= 1.0);
        assert!(high_centre.segments.iter().any(|s| near(s, (1.0, 0.0))));
        assert!(low_centre.segments.iter().any(|s| near(s, (0.0, 0.0))));
    }

    #[test]
    fn nested_levels() {
        let vals: Vec<f64> = (0..100)
            .map(|i| {
                let (x, y) = ((i % 10) as f64, (i / 10) as f64);
                (-((x - 4.0).powi(2) + (y - 5.0).powi(2)) / 8.0).exp()
            })
            .collect();
        assert!(contours_nested(&vals, 10, 10, &[0.5, 0.7, 0.9]));
    }
}
