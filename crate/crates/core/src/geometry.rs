//! Level point sets on the unit square and point-set quality measures.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Collocation centres of one level.
///
/// `interior` is the full tensor grid including its perimeter; `boundary`
/// repeats the perimeter grid points, which carry Dirichlet conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPointSet {
    pub level: usize,
    pub interior: Vec<Point>,
    pub boundary: Vec<Point>,
    /// Grid spacing; the `h` entering the scale schedule.
    pub nominal_h: f64,
    /// Fill distance measured on a probe grid.
    pub measured_h: f64,
    pub separation_q: f64,
}

impl LevelPointSet {
    /// Total number of centres, counting boundary centres separately.
    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of unknowns of the collocation system (two per centre).
    pub fn unknowns(&self) -> usize {
        2 * self.len()
    }
}

/// Grid spacing of level `level`: `2^-(level+1)`.
pub fn nominal_spacing(level: usize) -> f64 {
    0.5f64.powi(level as i32 + 1)
}

/// The level-`level` point set (level >= 1): a `(2^(level+1)+1)^2` tensor grid
/// of interior centres and its `4 * 2^(level+1)` perimeter points as
/// boundary centres.
pub fn make_level_pointset(level: usize) -> Result<LevelPointSet> {
    if level == 0 {
        return Err(Error::InvalidArgument("levels start at 1".into()));
    }
    let n = 1usize << (level + 1);
    let h = nominal_spacing(level);
    let coord = |i: usize| i as f64 * h;

    let mut interior = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            interior.push([coord(i), coord(j)]);
        }
    }

    // Perimeter walked counter-clockwise from the origin.
    let mut boundary = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary.push([coord(i), 0.0]);
    }
    for j in 0..n {
        boundary.push([1.0, coord(j)]);
    }
    for i in (1..=n).rev() {
        boundary.push([coord(i), 1.0]);
    }
    for j in (1..=n).rev() {
        boundary.push([0.0, coord(j)]);
    }

    // Probing at a quarter of the spacing hits the cell centres exactly.
    let measured_h = mesh_norm(&interior, 4 * n)?;
    let separation_q = separation_distance(&interior)?;
    Ok(LevelPointSet {
        level,
        interior,
        boundary,
        nominal_h: h,
        measured_h,
        separation_q,
    })
}

/// Fill distance of `points` in the unit square, estimated as the largest
/// nearest-centre distance over a `(probe_density+1)^2` uniform probe grid.
/// Probe grids are nested when one density divides the other; refining that
/// way can only raise the estimate towards the true fill distance.
pub fn mesh_norm(points: &[Point], probe_density: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if probe_density == 0 {
        return Err(Error::InvalidArgument("probe density must be positive".into()));
    }
    let grid = BucketGrid::new(points, nearest_cell_size(points.len()));
    let step = 1.0 / probe_density as f64;
    let worst = (0..=probe_density)
        .into_par_iter()
        .map(|j| {
            let y = j as f64 * step;
            (0..=probe_density)
                .map(|i| grid.nearest_distance([i as f64 * step, y], points))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Half the smallest distance between two distinct points.
pub fn separation_distance(points: &[Point]) -> Result<f64> {
    match points.len() {
        0 => return Err(Error::EmptyPointSet),
        1 => return Err(Error::SinglePoint),
        _ => {}
    }
    let min = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            for q in &points[i + 1..] {
                let d = dist(points[i], *q);
                if d < best {
                    best = d;
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        return Err(Error::SinglePoint);
    }
    Ok(0.5 * min)
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn nearest_cell_size(n: usize) -> f64 {
    // About one point per cell on the unit square.
    (1.0 / (n as f64).sqrt()).max(1e-3)
}

/// Uniform bucketing of points into square cells; used for neighbour
/// queries within a radius and nearest-point searches.
#[derive(Clone, Debug)]
pub struct BucketGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    indices: Vec<usize>,
}

impl BucketGrid {
    pub fn new(points: &[Point], cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let cell = cell.max(f64::MIN_POSITIVE);
        let count = |k: usize| (((hi[k] - lo[k]) / cell).floor() as usize + 1).min(1 << 12);
        let (nx, ny) = (count(0), count(1));
        let mut counts = vec![0usize; nx * ny + 1];
        let cell_of = |p: &Point| {
            let cx = (((p[0] - lo[0]) / cell) as usize).min(nx - 1);
            let cy = (((p[1] - lo[1]) / cell) as usize).min(ny - 1);
            cy * nx + cx
        };
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut indices = vec![0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            indices[fill[c]] = i;
            fill[c] += 1;
        }
        BucketGrid {
            origin: lo,
            cell,
            nx,
            ny,
            starts: counts,
            indices,
        }
    }

    fn cell_coords(&self, p: Point) -> (isize, isize) {
        (
            ((p[0] - self.origin[0]) / self.cell).floor() as isize,
            ((p[1] - self.origin[1]) / self.cell).floor() as isize,
        )
    }

    fn cell_points(&self, cx: isize, cy: isize) -> &[usize] {
        if cx < 0 || cy < 0 || cx as usize >= self.nx || cy as usize >= self.ny {
            return &[];
        }
        let c = cy as usize * self.nx + cx as usize;
        &self.indices[self.starts[c]..self.starts[c + 1]]
    }

    /// Indices of all points within `radius` of `p` (inclusive).
    pub fn within(&self, p: Point, radius: f64, points: &[Point], out: &mut Vec<usize>) {
        out.clear();
        let reach = (radius / self.cell).ceil() as isize;
        let (cx, cy) = self.cell_coords(p);
        for y in cy - reach..=cy + reach {
            for x in cx - reach..=cx + reach {
                for &i in self.cell_points(x, y) {
                    if dist(points[i], p) <= radius {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Distance from `p` to the nearest point.
    pub fn nearest_distance(&self, p: Point, points: &[Point]) -> f64 {
        let (cx, cy) = self.cell_coords(p);
        let max_ring = self.nx.max(self.ny) as isize + cx.abs().max(cy.abs()) + 1;
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            for y in cy - ring..=cy + ring {
                for x in cx - ring..=cx + ring {
                    if (y - cy).abs() != ring && (x - cx).abs() != ring {
                        continue;
                    }
                    for &i in self.cell_points(x, y) {
                        best = best.min(dist(points[i], p));
                    }
                }
            }
            // Every unvisited cell is at least `ring * cell` away.
            if best <= ring as f64 * self.cell {
                break;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_counts_follow_table() {
        for (level, n, m, h) in [
            (1, 25, 16, 0.25),
            (2, 81, 32, 0.125),
            (3, 289, 64, 1.0 / 16.0),
            (4, 1089, 128, 1.0 / 32.0),
            (5, 4225, 256, 1.0 / 64.0),
        ] {
            let set = make_level_pointset(level).unwrap();
            assert_eq!(set.interior.len(), n, "level {level}");
            assert_eq!(set.boundary.len(), m, "level {level}");
            assert_eq!(set.nominal_h, h);
        }
    }

    #[test]
    fn boundary_points_are_distinct_perimeter_points() {
        let set = make_level_pointset(2).unwrap();
        let mut b = set.boundary.clone();
        b.sort_by(|p, q| p.partial_cmp(q).unwrap());
        b.dedup();
        assert_eq!(b.len(), set.boundary.len());
        for p in &set.boundary {
            assert!(p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0);
            assert!(set.interior.contains(p));
        }
    }

    #[test]
    fn level_zero_rejected() {
        assert!(make_level_pointset(0).is_err());
    }

    #[test]
    fn mesh_norm_of_level_one_grid() {
        let set = make_level_pointset(1).unwrap();
        let h = mesh_norm(&set.interior, 1000).unwrap();
        let expected = 2f64.sqrt() / 8.0;
        assert!((h - expected).abs() <= 2f64.sqrt() / 1000.0, "{h}");
        assert!((set.measured_h - expected).abs() < 1e-15);
    }

    #[test]
    fn mesh_norm_single_point() {
        let h = mesh_norm(&[[0.5, 0.5]], 10).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(mesh_norm(&[], 10), Err(Error::EmptyPointSet)));
    }

    #[test]
    fn mesh_norm_nested_refinement_is_monotone() {
        let pts = [[0.1, 0.2], [0.7, 0.33], [0.45, 0.9], [0.93, 0.81]];
        let fine = mesh_norm(&pts, 3 * 256).unwrap();
        let mut last = 0.0;
        for density in [3, 6, 12, 24, 48] {
            let h = mesh_norm(&pts, density).unwrap();
            assert!(h >= last);
            assert!(h <= fine);
            last = h;
        }
    }

    #[test]
    fn separation_examples() {
        assert_eq!(
            separation_distance(&make_level_pointset(1).unwrap().interior).unwrap(),
            0.125
        );
        assert_eq!(
            separation_distance(&make_level_pointset(3).unwrap().interior).unwrap(),
            1.0 / 32.0
        );
        assert_eq!(separation_distance(&[[0.0, 0.0], [1.0, 0.0]]).unwrap(), 0.5);
        assert!(matches!(separation_distance(&[[0.0, 0.0]]), Err(Error::SinglePoint)));
        assert!(matches!(separation_distance(&[]), Err(Error::EmptyPointSet)));
    }

    #[test]
    fn quasi_uniformity_across_levels() {
        let ratios: Vec<f64> = (1..=5)
            .map(|l| {
                let s = make_level_pointset(l).unwrap();
                s.measured_h / s.separation_q
            })
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo - 1.0 <= 0.05, "{ratios:?}");
        for l in 1..5 {
            let (a, b) = (nominal_spacing(l), nominal_spacing(l + 1));
            assert!(0.5 * a <= b && b <= 0.5 * a);
        }
    }

    #[test]
    fn bucket_queries_match_brute_force() {
        let set = make_level_pointset(2).unwrap();
        let pts = &set.interior;
        let grid = BucketGrid::new(pts, 0.2);
        let mut out = Vec::new();
        for &p in &[[0.5, 0.5], [0.0, 1.0], [0.33, 0.71]] {
            grid.within(p, 0.3, pts, &mut out);
            let brute: Vec<usize> = (0..pts.len()).filter(|&i| dist(pts[i], p) <= 0.3).collect();
            assert_eq!(out, brute);
            let nearest = pts.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min);
            assert_eq!(grid.nearest_distance(p, pts), nearest);
        }
    }
}
