//! Candidate grid, subarea partition, baseline layouts and the Bessel
//! spatial-correlation matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::bessel_j0;

/// Planar coordinate in metres.
pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Aperture, candidate grid and subarea partition of a fluid surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometry {
    pub width_m: f64,
    pub height_m: f64,
    pub n_h: usize,
    pub n_v: usize,
    /// Element width (m).
    pub d_h: f64,
    /// Element height (m).
    pub d_v: f64,
    pub wavelength_m: f64,
    pub m_subareas_h: usize,
    pub m_subareas_v: usize,
}

impl SurfaceGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.width_m, self.height_m, self.d_h, self.d_v, self.wavelength_m];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!(
                "aperture, element size and wavelength must be positive: {self:?}"
            )));
        }
        if self.n_h == 0 || self.n_v == 0 || self.m_subareas_h == 0 || self.m_subareas_v == 0 {
            return Err(Error::Config("grid and subarea counts must be nonzero".into()));
        }
        if self.n_h % self.m_subareas_h != 0 || self.n_v % self.m_subareas_v != 0 {
            return Err(Error::Config(format!(
                "{}x{} subareas do not evenly divide the {}x{} candidate grid",
                self.m_subareas_h, self.m_subareas_v, self.n_h, self.n_v
            )));
        }
        Ok(())
    }

    pub fn n_candidates(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn n_subareas(&self) -> usize {
        self.m_subareas_h * self.m_subareas_v
    }

    pub fn candidates_per_subarea(&self) -> usize {
        self.n_candidates() / self.n_subareas()
    }

    /// Candidates per subarea along each axis.
    pub fn block(&self) -> (usize, usize) {
        (self.n_h / self.m_subareas_h, self.n_v / self.m_subareas_v)
    }

    /// Grid pitch (horizontal, vertical); the grid spans the full aperture.
    pub fn pitch(&self) -> (f64, f64) {
        let p = |extent: f64, n: usize| if n > 1 { extent / (n - 1) as f64 } else { 0.0 };
        (p(self.width_m, self.n_h), p(self.height_m, self.n_v))
    }

    /// Area of one element (m^2).
    pub fn element_area(&self) -> f64 {
        self.d_h * self.d_v
    }

    /// Smallest distance between two distinct candidates.
    pub fn min_grid_spacing(&self) -> f64 {
        let (ph, pv) = self.pitch();
        match (self.n_h > 1, self.n_v > 1) {
            (true, true) => ph.min(pv),
            (true, false) => ph,
            (false, true) => pv,
            (false, false) => 0.0,
        }
    }
}

/// One preset position on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub point: Point,
    pub subarea: usize,
    /// Row-major index inside the subarea's local grid.
    pub local: usize,
}

/// Candidate set of a surface together with its subarea lookup tables.
#[derive(Debug, Clone)]
pub struct CandidateGrid {
    pub geometry: SurfaceGeometry,
    pub candidates: Vec<Candidate>,
    /// Candidate indices of every subarea, ordered by local index.
    pub members: Vec<Vec<usize>>,
    /// Bounding box (min corner, max corner) of each subarea's candidates.
    pub bounds: Vec<(Point, Point)>,
}

impl CandidateGrid {
    pub fn points(&self) -> Vec<Point> {
        self.candidates.iter().map(|c| c.point).collect()
    }

    pub fn candidate(&self, subarea: usize, local: usize) -> usize {
        self.members[subarea][local]
    }

    /// Smallest distance between the bounding boxes of two subareas.
    pub fn subarea_gap(&self, a: usize, b: usize) -> f64 {
        let ((alo, ahi), (blo, bhi)) = (self.bounds[a], self.bounds[b]);
        let gap = |lo1: f64, hi1: f64, lo2: f64, hi2: f64| (lo2 - hi1).max(lo1 - hi2).max(0.0);
        gap(alo[0], ahi[0], blo[0], bhi[0]).hypot(gap(alo[1], ahi[1], blo[1], bhi[1]))
    }
}

/// Lays out the `n_h x n_v` candidates row-major and tags each with its subarea.
pub fn build_grid(geometry: &SurfaceGeometry) -> Result<CandidateGrid> {
    geometry.validate()?;
    let (ph, pv) = geometry.pitch();
    let (bh, bv) = geometry.block();
    let coord = |i: usize, n: usize, pitch: f64, extent: f64| {
        if n > 1 {
            i as f64 * pitch
        } else {
            0.5 * extent
        }
    };
    let mut candidates = Vec::with_capacity(geometry.n_candidates());
    let mut members = vec![Vec::with_capacity(bh * bv); geometry.n_subareas()];
    for iv in 0..geometry.n_v {
        for ih in 0..geometry.n_h {
            let index = iv * geometry.n_h + ih;
            let subarea = (iv / bv) * geometry.m_subareas_h + ih / bh;
            let local = (iv % bv) * bh + ih % bh;
            let point = [
                coord(ih, geometry.n_h, ph, geometry.width_m),
                coord(iv, geometry.n_v, pv, geometry.height_m),
            ];
            candidates.push(Candidate { index, point, subarea, local });
            members[subarea].push(index);
        }
    }
    for list in members.iter_mut() {
        list.sort_by_key(|&i| candidates[i].local);
    }
    let bounds = members
        .iter()
        .map(|list| {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for &i in list {
                let p = candidates[i].point;
                for ax in 0..2 {
                    lo[ax] = lo[ax].min(p[ax]);
                    hi[ax] = hi[ax].max(p[ax]);
                }
            }
            (lo, hi)
        })
        .collect();
    Ok(CandidateGrid {
        geometry: geometry.clone(),
        candidates,
        members,
        bounds,
    })
}

/// Ordered selection of one active candidate per subarea.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    /// Candidate index of the element of subarea `m`.
    pub positions: Vec<usize>,
    pub coordinates: Vec<Point>,
}

impl Configuration {
    pub fn from_positions(grid: &CandidateGrid, positions: Vec<usize>) -> Result<Self> {
        if positions.len() != grid.members.len() {
            return Err(Error::Config(format!(
                "configuration has {} elements, surface has {} subareas",
                positions.len(),
                grid.members.len()
            )));
        }
        for (m, &p) in positions.iter().enumerate() {
            let c = grid
                .candidates
                .get(p)
                .ok_or_else(|| domain(format!("candidate index {p} out of range")))?;
            if c.subarea != m {
                return Err(Error::Config(format!(
                    "candidate {p} lies in subarea {}, not {m}",
                    c.subarea
                )));
            }
        }
        let coordinates = positions.iter().map(|&p| grid.candidates[p].point).collect();
        Ok(Self {
            positions,
            coordinates,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks the one-per-subarea rule and the minimum spacing `min_spacing`.
    pub fn validate(&self, grid: &CandidateGrid, min_spacing: f64) -> Result<()> {
        Self::from_positions(grid, self.positions.clone())?;
        if self.len() >= 2 {
            let d = min_pairwise_distance(&self.coordinates)?;
            if d < min_spacing - SPACING_SLACK {
                return Err(Error::Feasibility(format!(
                    "elements are {d} m apart, minimum spacing is {min_spacing} m"
                )));
            }
        }
        Ok(())
    }
}

/// Tolerance applied to spacing comparisons so that grid points exactly one
/// pitch apart satisfy a constraint equal to the pitch.
pub const SPACING_SLACK: f64 = 1e-12;

/// Argument scaling of the Bessel correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// `J0(2 d / lambda)`
    PaperLiteral,
    /// `J0(2 pi d / lambda)`, the usual isotropic-scattering form.
    #[serde(rename = "jakes_2pi")]
    Jakes2Pi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationKernel {
    pub mode: KernelMode,
    pub wavelength_m: f64,
}

impl CorrelationKernel {
    pub fn new(mode: KernelMode, wavelength_m: f64) -> Result<Self> {
        if !(wavelength_m > 0.0 && wavelength_m.is_finite()) {
            return Err(Error::Config(format!("invalid wavelength {wavelength_m}")));
        }
        Ok(Self { mode, wavelength_m })
    }

    pub fn correlation(&self, distance_m: f64) -> Result<f64> {
        let scale = match self.mode {
            KernelMode::PaperLiteral => 2.0,
            KernelMode::Jakes2Pi => 2.0 * std::f64::consts::PI,
        };
        bessel_j0(scale * distance_m / self.wavelength_m)
    }
}

/// Symmetric correlation matrix with entries `J0(c |u_a - u_b| / lambda)`.
pub fn correlation_matrix(points: &[Point], kernel: &CorrelationKernel) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(domain("correlation matrix needs at least one point"));
    }
    let n = points.len();
    let mut r = DMatrix::<f64>::identity(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = kernel.correlation(distance(points[a], points[b]))?;
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    Ok(r)
}

/// Conventional surface: in every subarea, the candidate nearest the centre
/// of the subarea's share of the aperture (lowest index on ties).
pub fn baseline_conventional(grid: &CandidateGrid) -> Configuration {
    let g = &grid.geometry;
    let cell_w = g.width_m / g.m_subareas_h as f64;
    let cell_h = g.height_m / g.m_subareas_v as f64;
    let positions = grid
        .members
        .iter()
        .enumerate()
        .map(|(m, list)| {
            let centre = [
                ((m % g.m_subareas_h) as f64 + 0.5) * cell_w,
                ((m / g.m_subareas_h) as f64 + 0.5) * cell_h,
            ];
            let mut best = list[0];
            let mut best_d = f64::INFINITY;
            for &i in list {
                let d = distance(grid.candidates[i].point, centre);
                if d < best_d || (d == best_d && i < best) {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    Configuration::from_positions(grid, positions).expect("centre picks stay inside their subarea")
}

/// Compact surface: an `m_subareas_h x m_subareas_v` lattice with pitch
/// `spacing_m`, centred in the aperture.
pub fn baseline_compact(geometry: &SurfaceGeometry, spacing_m: f64) -> Result<Vec<Point>> {
    geometry.validate()?;
    if !(spacing_m > 0.0) {
        return Err(Error::Config(format!("compact spacing must be positive, got {spacing_m}")));
    }
    let half_wave = 0.5 * geometry.wavelength_m;
    if spacing_m > half_wave * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "compact spacing {spacing_m} m exceeds half a wavelength ({half_wave} m)"
        )));
    }
    let (mh, mv) = (geometry.m_subareas_h, geometry.m_subareas_v);
    let span_h = (mh - 1) as f64 * spacing_m;
    let span_v = (mv - 1) as f64 * spacing_m;
    if span_h > geometry.width_m * (1.0 + 1e-12) || span_v > geometry.height_m * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "{mh}x{mv} lattice at {spacing_m} m does not fit the aperture"
        )));
    }
    let x0 = 0.5 * (geometry.width_m - span_h);
    let y0 = 0.5 * (geometry.height_m - span_v);
    Ok((0..mv)
        .flat_map(|iv| {
            (0..mh).map(move |ih| [x0 + ih as f64 * spacing_m, y0 + iv as f64 * spacing_m])
        })
        .collect())
}

pub fn min_pairwise_distance(points: &[Point]) -> Result<f64> {
    if points.len() < 2 {
        return Err(domain("minimum pairwise distance needs at least two points"));
    }
    let mut best = f64::INFINITY;
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i + 1..] {
            best = best.min(distance(a, b));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn geometry(n: usize, m: usize, size: f64) -> SurfaceGeometry {
        SurfaceGeometry {
            width_m: size,
            height_m: size,
            n_h: n,
            n_v: n,
            d_h: 0.125 / 3.0,
            d_v: 0.125 / 3.0,
            wavelength_m: 0.125,
            m_subareas_h: m,
            m_subareas_v: m,
        }
    }

    #[test]
    fn full_size_grid() {
        let grid = build_grid(&geometry(48, 2, 2.0)).unwrap();
        assert_eq!(grid.candidates.len(), 2304);
        let (ph, pv) = grid.geometry.pitch();
        assert!((ph - 2.0 / 47.0).abs() < 1e-15 && (pv - ph).abs() < 1e-15);
        let step = grid.candidates[1].point[0] - grid.candidates[0].point[0];
        assert!((step - 0.042_553_191_5).abs() < 1e-9);
        assert_eq!(grid.candidates[2303].point, [2.0, 2.0]);
    }

    #[test]
    fn degenerate_grid_is_square_corners() {
        let grid = build_grid(&geometry(2, 1, 1.0)).unwrap();
        let pts = grid.points();
        assert_eq!(pts, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
    }

    #[test]
    fn subareas_hold_equal_counts() {
        let grid = build_grid(&geometry(4, 2, 1.0)).unwrap();
        assert!(grid.members.iter().all(|m| m.len() == 4));
        for (s, list) in grid.members.iter().enumerate() {
            for (local, &i) in list.iter().enumerate() {
                assert_eq!(grid.candidates[i].subarea, s);
                assert_eq!(grid.candidates[i].local, local);
            }
        }
        // subarea 3 is the top-right block
        assert_eq!(grid.members[3], vec![10, 11, 14, 15]);
    }

    #[test]
    fn indivisible_partition_is_rejected() {
        let mut g = geometry(5, 2, 1.0);
        assert!(matches!(build_grid(&g), Err(Error::Config(_))));
        g.n_h = 4;
        g.n_v = 4;
        g.wavelength_m = 0.0;
        assert!(matches!(build_grid(&g), Err(Error::Config(_))));
    }

    #[test]
    fn correlation_entries() {
        let k = CorrelationKernel::new(KernelMode::PaperLiteral, 0.125).unwrap();
        let one = correlation_matrix(&[[0.3, 0.3]], &k).unwrap();
        assert_eq!(one, DMatrix::from_element(1, 1, 1.0));
        let pts = [[0.0, 0.0], [0.0625, 0.0]];
        let r = correlation_matrix(&pts, &k).unwrap();
        assert!((r[(0, 1)] - 0.765_197_686_557_966_6).abs() < 1e-12);
        assert_eq!(r[(0, 1)], r[(1, 0)]);
        let j = CorrelationKernel::new(KernelMode::Jakes2Pi, 0.125).unwrap();
        let r = correlation_matrix(&pts, &j).unwrap();
        assert!((r[(0, 1)] + 0.304_242_177_644_093_9).abs() < 1e-12);
        assert!(correlation_matrix(&[], &j).is_err());
    }

    #[test]
    fn conventional_single_subarea_picks_centre() {
        let grid = build_grid(&geometry(5, 1, 1.0)).unwrap();
        let c = baseline_conventional(&grid);
        assert_eq!(c.positions, vec![12]);
        assert_eq!(c.coordinates[0], [0.5, 0.5]);
    }

    #[test]
    fn conventional_full_grid_quadrants() {
        let grid = build_grid(&geometry(48, 2, 2.0)).unwrap();
        let c = baseline_conventional(&grid);
        // nearest grid coordinate to 0.5 is 12 * 2/47, to 1.5 is 35 * 2/47
        let lo = 12.0 * 2.0 / 47.0;
        let hi = 35.0 * 2.0 / 47.0;
        let expect = [[lo, lo], [hi, lo], [lo, hi], [hi, hi]];
        for (got, want) in c.coordinates.iter().zip(expect) {
            assert!(distance(*got, want) < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn conventional_one_candidate_per_subarea_is_identity() {
        let grid = build_grid(&geometry(4, 4, 1.0)).unwrap();
        let c = baseline_conventional(&grid);
        let mut sorted = c.positions.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        for (m, &p) in c.positions.iter().enumerate() {
            assert_eq!(grid.candidates[p].subarea, m);
        }
    }

    #[test]
    fn compact_lattice() {
        let g = geometry(48, 2, 2.0);
        let pts = baseline_compact(&g, 0.0625).unwrap();
        let expect = [
            [0.968_75, 0.968_75],
            [1.031_25, 0.968_75],
            [0.968_75, 1.031_25],
            [1.031_25, 1.031_25],
        ];
        for (p, e) in pts.iter().zip(expect) {
            assert!(distance(*p, e) < 1e-12);
        }
        let single = baseline_compact(&geometry(4, 1, 2.0), 0.05).unwrap();
        assert_eq!(single, vec![[1.0, 1.0]]);
        assert!(matches!(baseline_compact(&g, 0.07), Err(Error::Config(_))));
        let tiny = SurfaceGeometry {
            width_m: 0.1,
            height_m: 0.1,
            ..geometry(8, 8, 0.1)
        };
        assert!(matches!(baseline_compact(&tiny, 0.06), Err(Error::Config(_))));
    }

    #[test]
    fn pairwise_distance() {
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert_eq!(min_pairwise_distance(&corners).unwrap(), 1.0);
        let line = [[0.0, 0.0], [0.3, 0.0], [1.0, 0.0]];
        assert!((min_pairwise_distance(&line).unwrap() - 0.3).abs() < 1e-15);
        assert!(min_pairwise_distance(&[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn configuration_checks() {
        let grid = build_grid(&geometry(4, 2, 1.0)).unwrap();
        assert!(Configuration::from_positions(&grid, vec![0, 2, 8, 10]).is_ok());
        // candidate 1 belongs to subarea 0, not 1
        assert!(Configuration::from_positions(&grid, vec![0, 1, 8, 10]).is_err());
        assert!(Configuration::from_positions(&grid, vec![0, 2, 8]).is_err());
        let tight = Configuration::from_positions(&grid, vec![1, 2, 8, 10]).unwrap();
        let pitch = grid.geometry.pitch().0;
        assert!(tight.validate(&grid, pitch).is_ok());
        assert!(matches!(tight.validate(&grid, 1.5 * pitch), Err(Error::Feasibility(_))));
    }

    #[test]
    fn subarea_gaps() {
        let grid = build_grid(&geometry(4, 2, 3.0)).unwrap();
        assert!((grid.subarea_gap(0, 1) - 1.0).abs() < 1e-12);
        assert!((grid.subarea_gap(0, 3) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(grid.subarea_gap(2, 2), 0.0);
    }
}
