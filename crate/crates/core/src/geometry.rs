//! Planar domains and their Cartesian discretization.
//!
//! A [`Grid`] is the set of lattice nodes lying strictly inside the domain,
//! together with the cut-cell distances from boundary-adjacent nodes to the
//! boundary along each axis (Shortley–Weller fractions). The lattice is
//! anchored at the disk center, or at the lower corner of a rectangle, so
//! that both the center of the unit disk and rectangle faces that are an
//! integer number of steps away land on lattice points.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Nodes closer to the boundary than this fraction of `h` are treated as
/// boundary points rather than interior nodes.
const SNAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Disk { center: Point2, radius: f64 },
    Rectangle { lo: Point2, hi: Point2 },
}

impl DomainSpec {
    pub fn unit_disk() -> Self {
        DomainSpec::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn unit_square() -> Self {
        DomainSpec::Rectangle {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::Disk { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidDomain(format!("radius must be positive, got {radius}")));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidDomain("center must be finite".into()));
                }
            }
            DomainSpec::Rectangle { lo, hi } => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                    return Err(Error::InvalidDomain(format!(
                        "lower corner {lo:?} must lie strictly below upper corner {hi:?}"
                    )));
                }
                if !lo.iter().chain(hi.iter()).all(|c| c.is_finite()) {
                    return Err(Error::InvalidDomain("corners must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// True iff `p` lies strictly inside the domain.
    pub fn contains(&self, p: Point2) -> bool {
        self.depth(p) > 0.0
    }

    /// Distance from `p` to the boundary, negative outside.
    pub fn depth(&self, p: Point2) -> f64 {
        match *self {
            DomainSpec::Disk { center, radius } => {
                radius - (p[0] - center[0]).hypot(p[1] - center[1])
            }
            DomainSpec::Rectangle { lo, hi } => (p[0] - lo[0])
                .min(hi[0] - p[0])
                .min(p[1] - lo[1])
                .min(hi[1] - p[1]),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            DomainSpec::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            DomainSpec::Rectangle { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
        }
    }

    /// True for domains whose boundary has corners (outside the smooth-boundary setting).
    pub fn has_corners(&self) -> bool {
        matches!(self, DomainSpec::Rectangle { .. })
    }

    fn anchor(&self) -> Point2 {
        match *self {
            DomainSpec::Disk { center, .. } => center,
            DomainSpec::Rectangle { lo, .. } => lo,
        }
    }

    fn bounds(&self) -> (Point2, Point2) {
        match *self {
            DomainSpec::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            DomainSpec::Rectangle { lo, hi } => (lo, hi),
        }
    }

    /// Distance from the interior point `p` to the boundary along `dir`.
    fn exit_distance(&self, p: Point2, dir: Dir) -> f64 {
        let (axis, sign) = (dir.axis(), dir.sign());
        let other = 1 - axis;
        match *self {
            DomainSpec::Disk { center, radius } => {
                let off = p[other] - center[other];
                let half_chord = (radius * radius - off * off).max(0.0).sqrt();
                half_chord - sign * (p[axis] - center[axis])
            }
            DomainSpec::Rectangle { lo, hi } => {
                if sign > 0.0 {
                    hi[axis] - p[axis]
                } else {
                    p[axis] - lo[axis]
                }
            }
        }
    }

    /// Outward unit normal at the boundary point `q` reached by moving along `dir`.
    fn normal(&self, q: Point2, dir: Dir) -> Point2 {
        match *self {
            DomainSpec::Disk { center, radius } => {
                [(q[0] - center[0]) / radius, (q[1] - center[1]) / radius]
            }
            // Axis-parallel moves only ever hit the face across that axis.
            DomainSpec::Rectangle { .. } => dir.unit(),
        }
    }

    /// Area of the intersection of the domain with the box `[lo, hi]`.
    pub fn clip_area(&self, lo: Point2, hi: Point2) -> f64 {
        match *self {
            DomainSpec::Disk { center, radius } => disk_box_area(
                radius,
                [lo[0] - center[0], lo[1] - center[1]],
                [hi[0] - center[0], hi[1] - center[1]],
            ),
            DomainSpec::Rectangle { lo: a, hi: b } => {
                let w = (hi[0].min(b[0]) - lo[0].max(a[0])).max(0.0);
                let v = (hi[1].min(b[1]) - lo[1].max(a[1])).max(0.0);
                w * v
            }
        }
    }
}

/// Exact area of `{x² + y² < r²} ∩ [lo, hi]`.
fn disk_box_area(r: f64, lo: Point2, hi: Point2) -> f64 {
    let (x0, x1) = (lo[0].max(-r), hi[0].min(r));
    if x0 >= x1 || lo[1] >= hi[1] {
        return 0.0;
    }
    let (y0, y1) = (lo[1], hi[1]);
    let half = |x: f64| (r * r - x * x).max(0.0).sqrt();
    // Antiderivative of the upper semicircle.
    let prim = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * half(x) + r * r * (x / r).asin())
    };
    let mut cuts = vec![x0, x1];
    for y in [y0, y1] {
        if y.abs() < r {
            let s = half(y);
            cuts.extend([-s, s]);
        }
    }
    cuts.retain(|&c| c >= x0 && c <= x1);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let s = half(0.5 * (a + b));
        let upper_is_box = y1 < s;
        let lower_is_box = y0 > -s;
        let upper = if upper_is_box { y1 } else { s };
        let lower = if lower_is_box { y0 } else { -s };
        if upper <= lower {
            continue;
        }
        let arc = prim(b) - prim(a);
        let top = if upper_is_box { y1 * (b - a) } else { arc };
        let bottom = if lower_is_box { y0 * (b - a) } else { -arc };
        area += top - bottom;
    }
    area.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    East,
    West,
    North,
    South,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::West, Dir::North, Dir::South];

    pub fn axis(self) -> usize {
        match self {
            Dir::East | Dir::West => 0,
            Dir::North | Dir::South => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Dir::East | Dir::North => 1.0,
            Dir::West | Dir::South => -1.0,
        }
    }

    pub fn unit(self) -> Point2 {
        let mut v = [0.0; 2];
        v[self.axis()] = self.sign();
        v
    }

    fn offset(self) -> [i64; 2] {
        match self {
            Dir::East => [1, 0],
            Dir::West => [-1, 0],
            Dir::North => [0, 1],
            Dir::South => [0, -1],
        }
    }
}

/// Neighbor of an interior node in one axis direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Node(usize),
    /// Index into [`Grid::boundary_points`].
    Boundary(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub x: Point2,
    pub normal: Point2,
    /// Interior node this cut belongs to.
    pub node: usize,
    pub dir: Dir,
    /// Distance to the node in units of `h`, in `(0, 1]`.
    pub fraction: f64,
    /// The geometric fraction fell below the floor and was raised to it.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub cut_floor: f64,
    /// Fail with [`Error::DegenerateCut`] instead of clamping.
    pub strict_cuts: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            cut_floor: 1e-6,
            strict_cuts: false,
        }
    }
}

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
pub struct Grid {
    id: u64,
    domain: DomainSpec,
    h: f64,
    origin: Point2,
    lattice_lo: [i64; 2],
    lattice_dims: [usize; 2],
    lattice: Vec<Option<usize>>,
    nodes: Vec<Point2>,
    ij: Vec<[i64; 2]>,
    links: Vec<[Link; 4]>,
    boundary: Vec<BoundaryPoint>,
    weights: Vec<f64>,
}

pub fn build_grid(domain: &DomainSpec, h: f64) -> Result<Grid> {
    Grid::build(domain, h, GridOptions::default())
}

pub fn contains(domain: &DomainSpec, p: Point2) -> bool {
    domain.contains(p)
}

/// Quadrature weights, one per interior node, summing to the domain area.
pub fn cell_weights(grid: &Grid) -> Vec<(usize, f64)> {
    grid.weights.iter().copied().enumerate().collect()
}

impl Grid {
    pub fn build(domain: &DomainSpec, h: f64, opts: GridOptions) -> Result<Grid> {
        domain.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("grid spacing must be positive, got {h}")));
        }
        let origin = domain.anchor();
        let (blo, bhi) = domain.bounds();
        let mut lattice_lo = [0i64; 2];
        let mut lattice_dims = [0usize; 2];
        for a in 0..2 {
            // One extra layer on each side so every interior node has lattice neighbors.
            let lo = ((blo[a] - origin[a]) / h).floor() as i64 - 1;
            let hi = ((bhi[a] - origin[a]) / h).ceil() as i64 + 1;
            lattice_lo[a] = lo;
            lattice_dims[a] = (hi - lo + 1) as usize;
        }

        let coord = |i: i64, j: i64| [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
        let mut lattice = vec![None; lattice_dims[0] * lattice_dims[1]];
        let mut nodes = Vec::new();
        let mut ij = Vec::new();
        for jj in 0..lattice_dims[1] {
            for ii in 0..lattice_dims[0] {
                let (i, j) = (lattice_lo[0] + ii as i64, lattice_lo[1] + jj as i64);
                let p = coord(i, j);
                if domain.depth(p) > SNAP * h {
                    lattice[jj * lattice_dims[0] + ii] = Some(nodes.len());
                    nodes.push(p);
                    ij.push([i, j]);
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::EmptyGrid { h });
        }

        let mut grid = Grid {
            id: NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed),
            domain: domain.clone(),
            h,
            origin,
            lattice_lo,
            lattice_dims,
            lattice,
            nodes,
            ij,
            links: Vec::new(),
            boundary: Vec::new(),
            weights: Vec::new(),
        };

        let mut links = Vec::with_capacity(grid.nodes.len());
        let mut boundary = Vec::new();
        for (k, &p) in grid.nodes.iter().enumerate() {
            let [i, j] = grid.ij[k];
            let mut row = [Link::Node(0); 4];
            for (slot, dir) in Dir::ALL.into_iter().enumerate() {
                let [di, dj] = dir.offset();
                row[slot] = match grid.node_at(i + di, j + dj) {
                    Some(q) => Link::Node(q),
                    None => {
                        let t = domain.exit_distance(p, dir).clamp(0.0, h);
                        let mut fraction = t / h;
                        let mut clamped = false;
                        if fraction < opts.cut_floor {
                            if opts.strict_cuts {
                                return Err(Error::DegenerateCut {
                                    x: p[0],
                                    y: p[1],
                                    fraction,
                                    floor: opts.cut_floor,
                                });
                            }
                            fraction = opts.cut_floor;
                            clamped = true;
                        }
                        let u = dir.unit();
                        let x = [p[0] + t * u[0], p[1] + t * u[1]];
                        boundary.push(BoundaryPoint {
                            x,
                            normal: domain.normal(x, dir),
                            node: k,
                            dir,
                            fraction,
                            clamped,
                        });
                        Link::Boundary(boundary.len() - 1)
                    }
                };
            }
            links.push(row);
        }
        grid.links = links;
        grid.boundary = boundary;
        grid.weights = grid.compute_weights();
        Ok(grid)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> Point2 {
        self.nodes[k]
    }

    /// Lattice coordinates `(i, j)` of node `k`.
    pub fn lattice_index(&self, k: usize) -> [i64; 2] {
        self.ij[k]
    }

    pub fn links(&self, k: usize) -> &[Link; 4] {
        &self.links[k]
    }

    pub fn link(&self, k: usize, dir: Dir) -> Link {
        self.links[k][dir as usize]
    }

    pub fn boundary_points(&self) -> &[BoundaryPoint] {
        &self.boundary
    }

    pub fn clamped_cuts(&self) -> usize {
        self.boundary.iter().filter(|b| b.clamped).count()
    }

    /// Solver index of the lattice point `(i, j)` if it is an interior node.
    pub fn node_at(&self, i: i64, j: i64) -> Option<usize> {
        let ii = i - self.lattice_lo[0];
        let jj = j - self.lattice_lo[1];
        if ii < 0 || jj < 0 || ii as usize >= self.lattice_dims[0] || jj as usize >= self.lattice_dims[1] {
            return None;
        }
        self.lattice[jj as usize * self.lattice_dims[0] + ii as usize]
    }

    pub fn lattice_point(&self, i: i64, j: i64) -> Point2 {
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Lower-left lattice indices of the lattice cell containing `p`.
    pub fn cell_of(&self, p: Point2) -> [i64; 2] {
        [
            ((p[0] - self.origin[0]) / self.h).floor() as i64,
            ((p[1] - self.origin[1]) / self.h).floor() as i64,
        ]
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.weights
    }

    fn compute_weights(&self) -> Vec<f64> {
        let h = self.h;
        let mut w = vec![0.0; self.nodes.len()];
        for jj in 0..self.lattice_dims[1] {
            for ii in 0..self.lattice_dims[0] {
                let (i, j) = (self.lattice_lo[0] + ii as i64, self.lattice_lo[1] + jj as i64);
                let c = self.lattice_point(i, j);
                let lo = [c[0] - 0.5 * h, c[1] - 0.5 * h];
                let hi = [c[0] + 0.5 * h, c[1] + 0.5 * h];
                let inside = [lo, hi, [lo[0], hi[1]], [hi[0], lo[1]]]
                    .iter()
                    .all(|&q| self.domain.contains(q));
                let area = if inside { h * h } else { self.domain.clip_area(lo, hi) };
                if area <= 0.0 {
                    continue;
                }
                let owner = self.node_at(i, j).or_else(|| self.nearest_node(i, j));
                if let Some(k) = owner {
                    w[k] += area;
                }
            }
        }
        w
    }

    /// Nearest interior node to a non-interior lattice point, preferring axis neighbors.
    fn nearest_node(&self, i: i64, j: i64) -> Option<usize> {
        const RING: [[i64; 2]; 8] = [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, 1], [1, -1], [-1, -1]];
        if let Some(k) = RING.iter().find_map(|[di, dj]| self.node_at(i + di, j + dj)) {
            return Some(k);
        }
        let p = self.lattice_point(i, j);
        let dist = |k: usize| {
            let q = self.nodes[k];
            (q[0] - p[0]).hypot(q[1] - p[1])
        };
        (0..self.nodes.len()).min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_half_spacing_contains_axis_nodes() {
        let g = build_grid(&DomainSpec::unit_disk(), 0.5).unwrap();
        for p in [[0.0, 0.0], [0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]] {
            assert!(g.nodes().contains(&p), "missing {p:?}");
        }
        // (±1, 0) sit on the boundary.
        assert!(!g.nodes().contains(&[1.0, 0.0]));
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn aligned_square_has_unit_fractions() {
        let g = build_grid(&DomainSpec::unit_square(), 0.25).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.boundary_points().iter().all(|b| b.fraction == 1.0));
        // Corner node has two cuts, center none.
        let center = g.nodes().iter().position(|&p| p == [0.5, 0.5]).unwrap();
        assert!(g.links(center).iter().all(|l| matches!(l, Link::Node(_))));
    }

    #[test]
    fn contains_is_strict() {
        let d = DomainSpec::unit_disk();
        assert!(d.contains([0.0, 0.0]));
        assert!(!d.contains([1.0, 0.0]));
        assert!(!d.contains([0.6, 0.8]));
    }

    #[test]
    fn invalid_domains_rejected() {
        let bad = DomainSpec::Disk {
            center: [0.0, 0.0],
            radius: 0.0,
        };
        assert!(matches!(build_grid(&bad, 0.1), Err(Error::InvalidDomain(_))));
        let bad = DomainSpec::Rectangle {
            lo: [0.0, 1.0],
            hi: [1.0, 1.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn coarse_spacing_gives_empty_grid() {
        let d = DomainSpec::Rectangle {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        };
        assert!(matches!(build_grid(&d, 1.0), Err(Error::EmptyGrid { .. })));
    }

    #[test]
    fn fractions_in_unit_interval_and_points_on_boundary() {
        let d = DomainSpec::unit_disk();
        let g = build_grid(&d, 0.07).unwrap();
        for b in g.boundary_points() {
            assert!(b.fraction > 0.0 && b.fraction <= 1.0);
            assert!(d.depth(b.x).abs() < 1e-12);
            let n = b.normal;
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
            // Moving outward along the link.
            assert!(n[b.dir.axis()] * b.dir.sign() >= 0.0);
        }
    }

    #[test]
    fn strict_cuts_reject_tiny_fraction() {
        // Node at x = 0.9999999 sits 1e-7 from the face.
        let d = DomainSpec::Rectangle {
            lo: [0.0, 0.0],
            hi: [1.0 + 1e-7 * 0.5, 1.0],
        };
        let opts = GridOptions {
            cut_floor: 1e-6,
            strict_cuts: true,
        };
        assert!(matches!(Grid::build(&d, 0.5, opts), Err(Error::DegenerateCut { .. })));
        let g = Grid::build(&d, 0.5, GridOptions::default()).unwrap();
        assert_eq!(g.clamped_cuts(), 1);
        assert!(g.boundary_points().iter().all(|b| b.fraction >= 1e-6));
    }

    #[test]
    fn disk_box_area_matches_quadrants() {
        let q = disk_box_area(1.0, [0.0, 0.0], [2.0, 2.0]);
        assert!((q - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        let full = disk_box_area(1.0, [-1.0, -1.0], [1.0, 1.0]);
        assert!((full - std::f64::consts::PI).abs() < 1e-14);
        // Box fully inside.
        assert!((disk_box_area(1.0, [-0.1, -0.2], [0.1, 0.2]) - 0.08).abs() < 1e-15);
        // Horizontal strip 0 < y < 0.5 of the unit disk.
        let strip = disk_box_area(1.0, [-1.0, 0.0], [1.0, 0.5]);
        let exact = 0.5 * 0.75f64.sqrt() + (0.5f64).asin();
        assert!((strip - exact).abs() < 1e-14);
    }

    #[test]
    fn square_weights_sum_to_one() {
        for h in [0.25, 0.125, 1.0 / 3.0, 0.1] {
            let g = build_grid(&DomainSpec::unit_square(), h).unwrap();
            let s: f64 = g.cell_weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "h={h}: {s}");
            assert!(g.cell_weights().iter().all(|&w| w >= 0.0));
        }
    }
}
