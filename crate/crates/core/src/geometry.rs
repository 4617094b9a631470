//! Surface aperture, its partition into fluid subareas, and the preset
//! position lattice shared by every subarea.
//!
//! Subareas are numbered row-major from the origin corner: subarea `m`
//! sits in grid column `m % cols` and grid row `m / cols`. Preset lattice
//! points are stored with 0-based row-major flat indices
//! `row * lattice_cols + col`; [`map_index`] and [`unmap_index`] expose the
//! 1-based convention used in matrix notation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A coordinate pair on the surface plane, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Physical extent of the radiating surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aperture {
    /// Horizontal extent in meters.
    pub width: f64,
    /// Vertical extent in meters.
    pub height: f64,
}

impl Aperture {
    pub const fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    /// Square aperture of the given total area.
    pub fn square(area: f64) -> Self {
        let side = area.sqrt();
        Self::new(side, side)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Shape of the subarea grid: `cols × rows` subareas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubareaGrid {
    pub cols: usize,
    pub rows: usize,
}

impl SubareaGrid {
    pub const fn new(cols: usize, rows: usize) -> Self {
        Self { cols, rows }
    }

    pub fn count(&self) -> usize {
        self.cols * self.rows
    }
}

/// Number of preset positions inside every subarea.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetDensity {
    /// Presets per row (`N_h`).
    pub per_row: usize,
    /// Presets per column (`N_v`).
    pub per_col: usize,
}

impl PresetDensity {
    pub const fn new(per_row: usize, per_col: usize) -> Self {
        Self { per_row, per_col }
    }

    pub const fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    pub fn count(&self) -> usize {
        self.per_row * self.per_col
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, p: &Point) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Euclidean-nearest point of the rectangle.
    pub fn clamp(&self, p: &Point) -> Point {
        Point::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }
}

/// The aperture, its subarea tiling, the preset lattice, the carrier
/// wavelength and the minimum element spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGeometry {
    aperture: Aperture,
    grid: SubareaGrid,
    presets: PresetDensity,
    min_spacing: f64,
    wavelength: f64,
}

/// Partitions `aperture` into `m` equal subareas.
///
/// The grid is chosen so the subareas are square, which on a square
/// aperture requires `m` to be a perfect square. Any `m` without such a
/// factorization is rejected; use [`SurfaceGeometry::with_grid`] to pick a
/// grid shape explicitly.
pub fn partition_surface(
    aperture: Aperture,
    m: usize,
    presets: PresetDensity,
    min_spacing: f64,
    wavelength: f64,
) -> Result<SurfaceGeometry> {
    check_aperture(&aperture)?;
    if m == 0 {
        return Err(Error::Geometry("element count must be at least 1".into()));
    }
    let ratio = aperture.width / aperture.height;
    let cols = (m as f64 * ratio).sqrt().round() as usize;
    let grid = (cols > 0 && m.is_multiple_of(cols))
        .then(|| SubareaGrid::new(cols, m / cols))
        .filter(|g| {
            let got = g.cols as f64 / g.rows as f64;
            ((got - ratio) / ratio).abs() < 1e-9
        })
        .ok_or_else(|| {
            Error::Geometry(format!(
                "{m} subareas cannot tile a {} x {} m aperture with square cells",
                aperture.width, aperture.height
            ))
        })?;
    SurfaceGeometry::with_grid(aperture, grid, presets, min_spacing, wavelength)
}

fn check_aperture(aperture: &Aperture) -> Result<()> {
    if !(aperture.width > 0.0 && aperture.height > 0.0)
        || !aperture.width.is_finite()
        || !aperture.height.is_finite()
    {
        return Err(Error::Geometry(format!(
            "aperture dimensions must be positive and finite, got {} x {}",
            aperture.width, aperture.height
        )));
    }
    Ok(())
}

impl SurfaceGeometry {
    /// Builds a geometry with an explicit subarea grid.
    pub fn with_grid(
        aperture: Aperture,
        grid: SubareaGrid,
        presets: PresetDensity,
        min_spacing: f64,
        wavelength: f64,
    ) -> Result<Self> {
        check_aperture(&aperture)?;
        if grid.cols == 0 || grid.rows == 0 {
            return Err(Error::Geometry("subarea grid must be non-empty".into()));
        }
        if presets.per_row == 0 || presets.per_col == 0 {
            return Err(Error::Geometry(
                "each subarea needs at least one preset position".into(),
            ));
        }
        if !(min_spacing > 0.0 && min_spacing.is_finite()) {
            return Err(Error::Geometry(format!(
                "minimum spacing must be positive, got {min_spacing}"
            )));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Geometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self {
            aperture,
            grid,
            presets,
            min_spacing,
            wavelength,
        })
    }

    pub fn aperture(&self) -> Aperture {
        self.aperture
    }

    pub fn grid(&self) -> SubareaGrid {
        self.grid
    }

    pub fn presets(&self) -> PresetDensity {
        self.presets
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Number of fluid elements `M`.
    pub fn num_elements(&self) -> usize {
        self.grid.count()
    }

    /// Lattice points per global row (`L_h`).
    pub fn lattice_cols(&self) -> usize {
        self.grid.cols * self.presets.per_row
    }

    /// Lattice points per global column (`L_v`).
    pub fn lattice_rows(&self) -> usize {
        self.grid.rows * self.presets.per_col
    }

    /// Total preset count `L`.
    pub fn num_presets(&self) -> usize {
        self.lattice_cols() * self.lattice_rows()
    }

    /// Side lengths of one subarea.
    pub fn subarea_size(&self) -> (f64, f64) {
        (
            self.aperture.width / self.grid.cols as f64,
            self.aperture.height / self.grid.rows as f64,
        )
    }

    /// Distance between adjacent lattice points along each axis.
    pub fn lattice_pitch(&self) -> (f64, f64) {
        (
            axis_pitch(self.aperture.width, self.lattice_cols()),
            axis_pitch(self.aperture.height, self.lattice_rows()),
        )
    }

    fn check_subarea(&self, m: usize) -> Result<()> {
        if m >= self.num_elements() {
            return Err(Error::Index(format!(
                "subarea {m} out of range for {} subareas",
                self.num_elements()
            )));
        }
        Ok(())
    }

    pub fn subarea_bounds(&self, m: usize) -> Result<Rect> {
        self.check_subarea(m)?;
        Ok(self.bounds_unchecked(m))
    }

    fn bounds_unchecked(&self, m: usize) -> Rect {
        let (w, h) = self.subarea_size();
        let col = (m % self.grid.cols) as f64;
        let row = (m / self.grid.cols) as f64;
        Rect {
            x_min: col * w,
            x_max: if m % self.grid.cols + 1 == self.grid.cols {
                self.aperture.width
            } else {
                (col + 1.0) * w
            },
            y_min: row * h,
            y_max: if m / self.grid.cols + 1 == self.grid.rows {
                self.aperture.height
            } else {
                (row + 1.0) * h
            },
        }
    }

    /// Coordinates of the lattice point with 0-based flat index `flat`.
    pub fn lattice_point(&self, flat: usize) -> Point {
        let cols = self.lattice_cols();
        let (col, row) = (flat % cols, flat / cols);
        Point::new(
            axis_coord(col, self.aperture.width, cols),
            axis_coord(row, self.aperture.height, self.lattice_rows()),
        )
    }

    /// Subarea that owns the lattice point `flat`.
    pub fn subarea_of_preset(&self, flat: usize) -> usize {
        let cols = self.lattice_cols();
        let (col, row) = (flat % cols, flat / cols);
        (row / self.presets.per_col) * self.grid.cols + col / self.presets.per_row
    }

    fn preset_ranges(&self, m: usize) -> (usize, usize, usize, usize) {
        let col0 = (m % self.grid.cols) * self.presets.per_row;
        let row0 = (m / self.grid.cols) * self.presets.per_col;
        (
            col0,
            col0 + self.presets.per_row - 1,
            row0,
            row0 + self.presets.per_col - 1,
        )
    }

    /// 0-based flat lattice indices of subarea `m`'s presets, ascending.
    pub fn preset_indices(&self, m: usize) -> Result<Vec<usize>> {
        self.check_subarea(m)?;
        let (c0, c1, r0, r1) = self.preset_ranges(m);
        let cols = self.lattice_cols();
        Ok((r0..=r1)
            .flat_map(|r| (c0..=c1).map(move |c| r * cols + c))
            .collect())
    }

    /// Preset positions of subarea `m`, in ascending flat-index order.
    pub fn preset_grid(&self, m: usize) -> Result<Vec<Point>> {
        Ok(self
            .preset_indices(m)?
            .into_iter()
            .map(|i| self.lattice_point(i))
            .collect())
    }

    /// Clamps `p` onto subarea `m`'s rectangle.
    pub fn project_to_subarea(&self, p: &Point, m: usize) -> Result<Point> {
        Ok(self.subarea_bounds(m)?.clamp(p))
    }

    /// Nearest preset of subarea `m` to `p`; ties go to the smaller flat index.
    pub fn snap_to_subarea(&self, p: &Point, m: usize) -> Result<usize> {
        self.check_subarea(m)?;
        let (c0, c1, r0, r1) = self.preset_ranges(m);
        Ok(self.snap_within(p, c0, c1, r0, r1))
    }

    /// Nearest lattice point anywhere on the surface.
    pub fn nearest_preset(&self, p: &Point) -> usize {
        self.snap_within(p, 0, self.lattice_cols() - 1, 0, self.lattice_rows() - 1)
    }

    fn snap_within(&self, p: &Point, c0: usize, c1: usize, r0: usize, r1: usize) -> usize {
        let cols = self.lattice_cols();
        let col = nearest_on_axis(p.x, self.aperture.width, cols, c0, c1);
        let row = nearest_on_axis(p.y, self.aperture.height, self.lattice_rows(), r0, r1);
        row * cols + col
    }

    /// Whether every position lies in its own subarea.
    pub fn contains(&self, placement: &Placement) -> bool {
        placement.positions.len() == self.num_elements()
            && placement
                .positions
                .iter()
                .enumerate()
                .all(|(m, p)| self.bounds_unchecked(m).contains(p))
    }
}

fn axis_pitch(extent: f64, points: usize) -> f64 {
    if points > 1 {
        extent / (points - 1) as f64
    } else {
        0.0
    }
}

fn axis_coord(idx: usize, extent: f64, points: usize) -> f64 {
    if points > 1 {
        idx as f64 * extent / (points - 1) as f64
    } else {
        0.5 * extent
    }
}

// Per-axis rounding is exact Euclidean snapping on a rectangular lattice,
// and picking the lower index per axis gives the smaller flat index.
fn nearest_on_axis(coord: f64, extent: f64, points: usize, lo: usize, hi: usize) -> usize {
    if points < 2 {
        return lo;
    }
    let pitch = extent / (points - 1) as f64;
    let base = ((coord / pitch).floor().max(0.0) as usize).clamp(lo, hi);
    let mut best = base;
    let mut best_d = (coord - axis_coord(base, extent, points)).abs();
    for cand in [base.saturating_sub(1), base + 1] {
        if cand < lo || cand > hi {
            continue;
        }
        let d = (coord - axis_coord(cand, extent, points)).abs();
        if d < best_d || (d == best_d && cand < best) {
            best = cand;
            best_d = d;
        }
    }
    best
}

/// Row-major 1-based flat index `(n_v − 1)·L_h + n_h`.
pub fn map_index(n_h: usize, n_v: usize, l_h: usize) -> Result<usize> {
    if n_h == 0 || n_h > l_h || n_v == 0 {
        return Err(Error::Index(format!(
            "lattice index ({n_h}, {n_v}) out of range for {l_h} columns"
        )));
    }
    Ok((n_v - 1) * l_h + n_h)
}

/// Inverse of [`map_index`].
pub fn unmap_index(flat: usize, l_h: usize) -> Result<(usize, usize)> {
    if flat == 0 || l_h == 0 {
        return Err(Error::Index(format!(
            "flat index {flat} out of range for {l_h} columns"
        )));
    }
    Ok(((flat - 1) % l_h + 1, (flat - 1) / l_h + 1))
}

/// Positions of the `M` fluid elements, one per subarea.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub positions: Vec<Point>,
}

impl Placement {
    pub fn new(positions: Vec<Point>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spacing_violations(&self, min_spacing: f64) -> usize {
        spacing_violations(&self.positions, min_spacing)
    }

    pub fn is_feasible(&self, geom: &SurfaceGeometry) -> bool {
        geom.contains(self) && self.spacing_violations(geom.min_spacing()) == 0
    }
}

/// Number of unordered pairs closer than `min_spacing`.
pub fn spacing_violations(positions: &[Point], min_spacing: f64) -> usize {
    positions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            positions[i + 1..]
                .iter()
                .filter(|b| a.distance(b) < min_spacing)
                .count()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn square(side: f64, m: usize, n: usize) -> SurfaceGeometry {
        partition_surface(
            Aperture::new(side, side),
            m,
            PresetDensity::square(n),
            0.01,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn four_subareas_unit_squares() {
        let g = square(2.0, 4, 2);
        assert_eq!(g.grid(), SubareaGrid::new(2, 2));
        assert_eq!(g.subarea_size(), (1.0, 1.0));
        let r = g.subarea_bounds(3).unwrap();
        assert_eq!((r.x_min, r.x_max, r.y_min, r.y_max), (1.0, 2.0, 1.0, 2.0));
    }

    #[test]
    fn nine_subareas_side_two_thirds() {
        let g = square(2.0, 9, 2);
        assert_eq!(g.grid(), SubareaGrid::new(3, 3));
        let (w, h) = g.subarea_size();
        assert_relative_eq!(w, 2.0 / 3.0);
        assert_relative_eq!(h, 2.0 / 3.0);
    }

    #[test]
    fn non_square_count_rejected() {
        let err = partition_surface(
            Aperture::new(2.0, 2.0),
            5,
            PresetDensity::square(2),
            0.01,
            0.1,
        );
        assert!(matches!(err, Err(Error::Geometry(_))));
    }

    #[test]
    fn rectangular_aperture_uses_matching_grid() {
        let g = partition_surface(
            Aperture::new(4.0, 2.0),
            8,
            PresetDensity::square(2),
            0.01,
            0.1,
        )
        .unwrap();
        assert_eq!(g.grid(), SubareaGrid::new(4, 2));
        assert!(partition_surface(
            Aperture::new(4.0, 2.0),
            4,
            PresetDensity::square(2),
            0.01,
            0.1
        )
        .is_err());
    }

    #[test]
    fn bad_dimensions_rejected() {
        for (w, h) in [(0.0, 1.0), (1.0, -1.0), (f64::NAN, 1.0)] {
            assert!(
                partition_surface(Aperture::new(w, h), 4, PresetDensity::square(2), 0.01, 0.1)
                    .is_err()
            );
        }
        assert!(partition_surface(
            Aperture::new(1.0, 1.0),
            0,
            PresetDensity::square(2),
            0.01,
            0.1
        )
        .is_err());
    }

    #[test]
    fn smallest_preset_grid() {
        let g = square(2.0, 4, 2);
        let pts = g.preset_grid(0).unwrap();
        assert_eq!(pts.len(), 4);
        let pitch = 2.0 / 3.0;
        let expect = [(0.0, 0.0), (pitch, 0.0), (0.0, pitch), (pitch, pitch)];
        for (p, (x, y)) in pts.iter().zip(expect) {
            assert_relative_eq!(p.x, x);
            assert_relative_eq!(p.y, y);
        }
        assert!(g.preset_grid(4).is_err());
    }

    #[test]
    fn union_of_presets_is_whole_lattice() {
        let g = square(2.0, 9, 3);
        let mut all: Vec<usize> = (0..9).flat_map(|m| g.preset_indices(m).unwrap()).collect();
        assert_eq!(all.len(), g.num_presets());
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 81);
        for flat in all {
            let m = g.subarea_of_preset(flat);
            assert!(g
                .subarea_bounds(m)
                .unwrap()
                .contains(&g.lattice_point(flat)));
        }
    }

    #[test]
    fn full_resolution_preset_count() {
        let g = square(2.0, 4, 100);
        assert_eq!(g.preset_indices(2).unwrap().len(), 10_000);
    }

    #[test]
    fn lattice_spans_aperture() {
        let g = square(2.0, 4, 5);
        let last = g.num_presets() - 1;
        assert_eq!(g.lattice_point(0), Point::new(0.0, 0.0));
        let p = g.lattice_point(last);
        assert_relative_eq!(p.x, 2.0);
        assert_relative_eq!(p.y, 2.0);
    }

    #[test]
    fn subarea_areas_sum_to_aperture() {
        let g = square(2.0, 16, 2);
        let total: f64 = (0..16)
            .map(|m| {
                let r = g.subarea_bounds(m).unwrap();
                r.width() * r.height()
            })
            .sum();
        assert_relative_eq!(total, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn map_index_examples() {
        assert_eq!(map_index(1, 1, 10).unwrap(), 1);
        assert_eq!(map_index(3, 2, 10).unwrap(), 13);
        assert!(map_index(0, 1, 10).is_err());
        assert!(map_index(11, 1, 10).is_err());
        assert!(map_index(1, 0, 10).is_err());
        assert!(unmap_index(0, 10).is_err());
    }

    #[test]
    fn map_index_round_trip_on_lattice() {
        let l_h = 7;
        for n_v in 1..=5 {
            for n_h in 1..=l_h {
                let f = map_index(n_h, n_v, l_h).unwrap();
                assert_eq!(unmap_index(f, l_h).unwrap(), (n_h, n_v));
            }
        }
    }

    #[test]
    fn projection_semantics() {
        let g = square(2.0, 4, 2);
        let inside = Point::new(1.3, 0.2);
        assert_eq!(g.project_to_subarea(&inside, 1).unwrap(), inside);
        let left = Point::new(0.4, 0.5);
        assert_eq!(
            g.project_to_subarea(&left, 1).unwrap(),
            Point::new(1.0, 0.5)
        );
    }

    #[test]
    fn spacing_examples() {
        let d = 0.5;
        assert_eq!(
            spacing_violations(&[Point::new(0.0, 0.0), Point::new(d, 0.0)], d),
            0
        );
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(d / 2.0, 0.0),
            Point::new(10.0, 10.0),
        ];
        assert_eq!(spacing_violations(&pts, d), 1);
        assert_eq!(spacing_violations(&[Point::new(1.0, 1.0)], d), 0);
    }

    #[test]
    fn snap_is_identity_on_lattice() {
        let g = square(2.0, 4, 4);
        for m in 0..4 {
            for flat in g.preset_indices(m).unwrap() {
                let p = g.lattice_point(flat);
                assert_eq!(g.snap_to_subarea(&p, m).unwrap(), flat);
                assert_eq!(g.nearest_preset(&p), flat);
            }
        }
    }

    #[test]
    fn snap_tie_goes_to_smaller_index() {
        // pitch 0.5 on a 1 m aperture, midpoint 0.25 is an exact tie
        let g = square(1.0, 1, 3);
        assert_eq!(g.snap_to_subarea(&Point::new(0.25, 0.75), 0).unwrap(), 3);
        assert_eq!(g.snap_to_subarea(&Point::new(0.26, 0.75), 0).unwrap(), 4);
    }

    #[test]
    fn snap_stays_inside_own_subarea() {
        let g = square(2.0, 4, 3);
        // left of the shared edge, nearest global point belongs to subarea 0
        let p = Point::new(0.9, 0.0);
        let flat = g.snap_to_subarea(&p, 1).unwrap();
        assert_eq!(g.subarea_of_preset(flat), 1);
        assert_eq!(g.subarea_of_preset(g.nearest_preset(&p)), 0);
    }

    fn brute_spacing(pts: &[Point], d: f64) -> usize {
        let mut n = 0;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if i < j
                    && ((pts[i].x - pts[j].x).powi(2) + (pts[i].y - pts[j].y).powi(2)).sqrt() < d
                {
                    n += 1;
                }
            }
        }
        n
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_feasible(x in -5.0..5.0f64, y in -5.0..5.0f64, m in 0usize..9) {
            let g = square(2.0, 9, 2);
            let p = g.project_to_subarea(&Point::new(x, y), m).unwrap();
            prop_assert!(g.subarea_bounds(m).unwrap().contains(&p));
            prop_assert_eq!(g.project_to_subarea(&p, m).unwrap(), p);
        }

        #[test]
        fn spacing_matches_brute_force_and_is_symmetric(
            coords in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..8),
            d in 0.05..0.6f64,
        ) {
            let pts: Vec<Point> = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let n = spacing_violations(&pts, d);
            prop_assert_eq!(n, brute_spacing(&pts, d));
            let mut rev = pts.clone();
            rev.reverse();
            prop_assert_eq!(spacing_violations(&rev, d), n);
        }

        #[test]
        fn snap_matches_exhaustive_nearest(x in 0.0..1.0f64, y in 0.0..1.0f64, m in 0usize..4) {
            let g = square(2.0, 4, 4);
            let r = g.subarea_bounds(m).unwrap();
            let p = Point::new(r.x_min + x * r.width(), r.y_min + y * r.height());
            let got = g.snap_to_subarea(&p, m).unwrap();
            let best = g
                .preset_indices(m)
                .unwrap()
                .into_iter()
                .min_by(|&a, &b| {
                    p.distance(&g.lattice_point(a))
                        .total_cmp(&p.distance(&g.lattice_point(b)))
                        .then(a.cmp(&b))
                })
                .unwrap();
            prop_assert_eq!(
                p.distance(&g.lattice_point(got)),
                p.distance(&g.lattice_point(best))
            );
        }
    }
}
