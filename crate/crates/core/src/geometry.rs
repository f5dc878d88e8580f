//! Computational domains, the Γ1/Γ2 boundary partition, outward normals and
//! boundary quadrature.
//!
//! Points are stored as `[f64; 3]`; in two dimensions the third coordinate is
//! always zero and only the leading `dim()` coordinates are meaningful.

use alloc::format;
use alloc::vec::Vec;

use crate::math::{self, PI};
use crate::{Error, Result};

pub type Point = [f64; 3];

/// Relative tolerance used when checking that patch edges land on
/// quadrature cell edges.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rectangle { width: f64, height: f64 },
    Box { sides: [f64; 3] },
    Disk { radius: f64 },
    Ball { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    shape: Shape,
    center: Point,
}

impl Domain {
    pub fn new(shape: Shape, center: Point) -> Result<Self> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{what} must be positive, got {v}")))
            }
        };
        match shape {
            Shape::Rectangle { width, height } => {
                positive(width, "width")?;
                positive(height, "height")?;
            }
            Shape::Box { sides } => {
                for s in sides {
                    positive(s, "side")?;
                }
            }
            Shape::Disk { radius } | Shape::Ball { radius } => positive(radius, "radius")?,
        }
        let mut center = center;
        if matches!(shape, Shape::Rectangle { .. } | Shape::Disk { .. }) {
            center[2] = 0.0;
        }
        Ok(Self { shape, center })
    }

    /// `[0,1]²`.
    pub fn unit_square() -> Self {
        Self { shape: Shape::Rectangle { width: 1.0, height: 1.0 }, center: [0.5, 0.5, 0.0] }
    }

    /// `[0,1]³`.
    pub fn unit_cube() -> Self {
        Self { shape: Shape::Box { sides: [1.0; 3] }, center: [0.5; 3] }
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(Shape::Disk { radius }, [0.0; 3])
    }

    pub fn ball(radius: f64) -> Result<Self> {
        Self::new(Shape::Ball { radius }, [0.0; 3])
    }

    pub fn unit_disk() -> Self {
        Self { shape: Shape::Disk { radius: 1.0 }, center: [0.0; 3] }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Rectangle { .. } | Shape::Disk { .. } => 2,
            Shape::Box { .. } | Shape::Ball { .. } => 3,
        }
    }

    /// Side lengths per axis (the bounding box for round domains).
    pub fn extents(&self) -> [f64; 3] {
        match self.shape {
            Shape::Rectangle { width, height } => [width, height, 0.0],
            Shape::Box { sides } => sides,
            Shape::Disk { radius } => [2.0 * radius, 2.0 * radius, 0.0],
            Shape::Ball { radius } => [2.0 * radius; 3],
        }
    }

    pub fn lower_corner(&self) -> Point {
        let e = self.extents();
        let mut p = self.center;
        for a in 0..self.dim() {
            p[a] -= 0.5 * e[a];
        }
        p
    }

    /// Boundary C² (disk, ball) as opposed to polygonal.
    pub fn is_smooth(&self) -> bool {
        matches!(self.shape, Shape::Disk { .. } | Shape::Ball { .. })
    }

    pub fn boundary_measure(&self) -> f64 {
        match self.shape {
            Shape::Rectangle { width, height } => 2.0 * (width + height),
            Shape::Box { sides: [a, b, c] } => 2.0 * (a * b + b * c + a * c),
            Shape::Disk { radius } => 2.0 * PI * radius,
            Shape::Ball { radius } => 4.0 * PI * radius * radius,
        }
    }

    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Rectangle { width, height } => width * height,
            Shape::Box { sides: [a, b, c] } => a * b * c,
            Shape::Disk { radius } => PI * radius * radius,
            Shape::Ball { radius } => 4.0 / 3.0 * PI * radius * radius * radius,
        }
    }

    /// Largest radius of a ball that fits inside the domain.
    pub fn inradius(&self) -> f64 {
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius } => radius,
            _ => {
                let e = self.extents();
                e[..self.dim()].iter().fold(f64::INFINITY, |m, &s| m.min(0.5 * s))
            }
        }
    }

    /// Strict interior test.
    pub fn contains(&self, p: &Point) -> bool {
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius } => {
                math::dist2(&p[..self.dim()], &self.center[..self.dim()]) < radius * radius
            }
            _ => {
                let lo = self.lower_corner();
                let e = self.extents();
                (0..self.dim()).all(|a| p[a] > lo[a] && p[a] < lo[a] + e[a])
            }
        }
    }

    /// Distance from `p` to the boundary (positive inside).
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius } => {
                radius - math::sqrt(math::dist2(&p[..self.dim()], &self.center[..self.dim()]))
            }
            _ => {
                let lo = self.lower_corner();
                let e = self.extents();
                (0..self.dim()).fold(f64::INFINITY, |m, a| m.min(p[a] - lo[a]).min(lo[a] + e[a] - p[a]))
            }
        }
    }

    /// Outward unit normal at a boundary point. Undefined on rectangle
    /// edges/corners, where an error is returned.
    pub fn normal(&self, x: &Point) -> Result<Point> {
        let tol = 1e-9 * self.extents()[0].max(1.0);
        match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius } => {
                let d = self.dim();
                let r = math::sqrt(math::dist2(&x[..d], &self.center[..d]));
                if math::abs(r - radius) > tol {
                    return Err(Error::InvalidParameter(format!("point at radius {r} is not on the boundary")));
                }
                let mut n = [0.0; 3];
                for a in 0..d {
                    n[a] = (x[a] - self.center[a]) / r;
                }
                Ok(n)
            }
            _ => {
                let lo = self.lower_corner();
                let e = self.extents();
                let mut normal = None;
                let mut hits = 0;
                for a in 0..self.dim() {
                    if math::abs(x[a] - lo[a]) <= tol {
                        hits += 1;
                        let mut n = [0.0; 3];
                        n[a] = -1.0;
                        normal = Some(n);
                    } else if math::abs(x[a] - lo[a] - e[a]) <= tol {
                        hits += 1;
                        let mut n = [0.0; 3];
                        n[a] = 1.0;
                        normal = Some(n);
                    } else if x[a] < lo[a] - tol || x[a] > lo[a] + e[a] + tol {
                        return Err(Error::InvalidParameter("point lies outside the domain".into()));
                    }
                }
                match (hits, normal) {
                    (1, Some(n)) => Ok(n),
                    (0, _) => Err(Error::InvalidParameter("point is not on the boundary".into())),
                    _ => Err(Error::InvalidParameter("normal undefined at an edge or corner".into())),
                }
            }
        }
    }

    /// Boundary point of a disk at polar angle `theta`.
    pub fn circle_point(&self, theta: f64) -> Point {
        let r = match self.shape {
            Shape::Disk { radius } | Shape::Ball { radius } => radius,
            _ => 0.5 * self.extents()[0],
        };
        [self.center[0] + r * math::cos(theta), self.center[1] + r * math::sin(theta), 0.0]
    }
}

/// The offset point `x_h = x − h n(x)` used to define normal derivatives.
pub fn normal_offset(domain: &Domain, x: &Point, h: f64) -> Result<Point> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("offset must be positive, got {h}")));
    }
    let n = domain.normal(x)?;
    let mut p = *x;
    for a in 0..domain.dim() {
        p[a] -= h * n[a];
    }
    if h >= domain.inradius() || !domain.contains(&p) {
        return Err(Error::OffsetOutside(format!("h = {h} exceeds the interior ball radius {}", domain.inradius())));
    }
    Ok(p)
}

/// Where the Γ1 patch sits on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// A patch on the face normal to `axis` (at the low side unless `upper`),
    /// centred on the face and shifted by `shift` along the tangential axes
    /// (in increasing axis order). In 3D the patch is a square.
    Face { axis: usize, upper: bool, shift: [f64; 2] },
    /// A circular arc centred at polar angle `center_angle`.
    Arc { center_angle: f64 },
    /// A spherical cap centred on the unit vector `direction`.
    Cap { direction: Point },
}

impl Placement {
    /// Bottom face for rectangles/boxes, bottom arc or cap for round domains.
    pub fn default_for(domain: &Domain) -> Self {
        match domain.shape() {
            Shape::Rectangle { .. } => Placement::Face { axis: 1, upper: false, shift: [0.0; 2] },
            Shape::Box { .. } => Placement::Face { axis: 2, upper: false, shift: [0.0; 2] },
            Shape::Disk { .. } => Placement::Arc { center_angle: -PI / 2.0 },
            Shape::Ball { .. } => Placement::Cap { direction: [0.0, 0.0, -1.0] },
        }
    }
}

/// Geometric description of Γ1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Patch {
    Empty,
    /// Whole boundary.
    Whole,
    /// Axis-aligned interval/rectangle on one face. `lo`/`hi` are absolute
    /// coordinates along the tangential axes (increasing axis order).
    Face { axis: usize, upper: bool, lo: [f64; 2], hi: [f64; 2] },
    /// Polar angles `start < end`, `end − start ≤ 2π`.
    Arc { start: f64, end: f64 },
    /// `{x : (x − c)·d ≥ R cos_half}`.
    Cap { direction: Point, cos_half: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionTag {
    Gamma1,
    Gamma2,
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPartition {
    pub placement: Placement,
    pub patch: Patch,
    pub gamma1_measure: f64,
    pub boundary_measure: f64,
    /// Γ̃ = ∂Γ1: the two endpoints in 2D, sampled points along the curve in 3D.
    pub interface: Vec<Point>,
}

impl BoundaryPartition {
    pub fn gamma2_measure(&self) -> f64 {
        self.boundary_measure - self.gamma1_measure
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.patch, Patch::Empty)
    }

    /// Classify a boundary point.
    pub fn classify(&self, domain: &Domain, x: &Point) -> RegionTag {
        let tol = 1e-10;
        match self.patch {
            Patch::Empty => RegionTag::Gamma2,
            Patch::Whole => RegionTag::Gamma1,
            Patch::Face { axis, upper, lo, hi } => {
                let lc = domain.lower_corner();
                let face_coord = if upper { lc[axis] + domain.extents()[axis] } else { lc[axis] };
                if math::abs(x[axis] - face_coord) > tol {
                    return RegionTag::Gamma2;
                }
                let mut on_edge = false;
                for (slot, a) in tangential_axes(domain.dim(), axis).into_iter().enumerate() {
                    let Some(a) = a else { continue };
                    if x[a] < lo[slot] - tol || x[a] > hi[slot] + tol {
                        return RegionTag::Gamma2;
                    }
                    if math::abs(x[a] - lo[slot]) <= tol || math::abs(x[a] - hi[slot]) <= tol {
                        on_edge = true;
                    }
                }
                if on_edge {
                    RegionTag::Interface
                } else {
                    RegionTag::Gamma1
                }
            }
            Patch::Arc { start, end } => {
                let c = domain.center();
                let theta = math::atan2(x[1] - c[1], x[0] - c[0]);
                let rel = wrap_angle(theta - start);
                let len = end - start;
                let near = |d: f64| math::abs(d) <= tol || math::abs(d - 2.0 * PI) <= tol;
                if near(rel) || near(rel - len) {
                    RegionTag::Interface
                } else if rel < len {
                    RegionTag::Gamma1
                } else {
                    RegionTag::Gamma2
                }
            }
            Patch::Cap { direction, cos_half } => {
                let c = domain.center();
                let r = match domain.shape() {
                    Shape::Ball { radius } => radius,
                    _ => 1.0,
                };
                let d = (0..3).map(|a| (x[a] - c[a]) * direction[a]).sum::<f64>() / r;
                if math::abs(d - cos_half) <= tol {
                    RegionTag::Interface
                } else if d > cos_half {
                    RegionTag::Gamma1
                } else {
                    RegionTag::Gamma2
                }
            }
        }
    }
}

/// Angle mapped into `[0, 2π)`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let r = a % (2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Tangential axes of the face normal to `axis`, in increasing order.
pub(crate) fn tangential_axes(dim: usize, axis: usize) -> [Option<usize>; 2] {
    let mut out = [None, None];
    let mut slot = 0;
    for a in 0..dim {
        if a != axis {
            out[slot] = Some(a);
            slot += 1;
        }
    }
    out
}

/// Split the boundary into Γ1 (of the requested measure) and Γ2.
pub fn partition_boundary(domain: &Domain, gamma1_measure: f64, placement: Placement) -> Result<BoundaryPartition> {
    let total = domain.boundary_measure();
    if !(gamma1_measure >= 0.0) || !gamma1_measure.is_finite() {
        return Err(Error::InvalidPartition(format!("measure must be non-negative, got {gamma1_measure}")));
    }
    if gamma1_measure > total * (1.0 + 1e-12) {
        return Err(Error::InvalidPartition(format!("measure {gamma1_measure} exceeds |∂Ω| = {total}")));
    }
    let empty = |placement| BoundaryPartition {
        placement,
        patch: Patch::Empty,
        gamma1_measure: 0.0,
        boundary_measure: total,
        interface: Vec::new(),
    };
    if gamma1_measure == 0.0 {
        return Ok(empty(placement));
    }
    if math::abs(gamma1_measure - total) <= 1e-12 * total {
        return Ok(BoundaryPartition {
            placement,
            patch: Patch::Whole,
            gamma1_measure: total,
            boundary_measure: total,
            interface: Vec::new(),
        });
    }
    let dim = domain.dim();
    match (domain.shape(), placement) {
        (Shape::Rectangle { .. } | Shape::Box { .. }, Placement::Face { axis, upper, shift }) => {
            if axis >= dim {
                return Err(Error::InvalidPartition(format!("face axis {axis} out of range")));
            }
            let ext = domain.extents();
            let lc = domain.lower_corner();
            let tang = tangential_axes(dim, axis);
            // 2D: interval of length |Γ1|; 3D: square of side √|Γ1|.
            let side = if dim == 2 { gamma1_measure } else { math::sqrt(gamma1_measure) };
            let mut lo = [0.0; 2];
            let mut hi = [0.0; 2];
            for (slot, a) in tang.iter().enumerate() {
                let Some(a) = *a else { continue };
                let mid = lc[a] + 0.5 * ext[a] + shift[slot];
                lo[slot] = mid - 0.5 * side;
                hi[slot] = mid + 0.5 * side;
                let eps = 1e-12 * ext[a];
                if lo[slot] < lc[a] - eps || hi[slot] > lc[a] + ext[a] + eps {
                    return Err(Error::InvalidPartition(format!(
                        "patch of measure {gamma1_measure} does not fit on face {axis}"
                    )));
                }
            }
            let face = if upper { lc[axis] + ext[axis] } else { lc[axis] };
            let mut interface = Vec::new();
            if dim == 2 {
                let t = tang[0].unwrap();
                for v in [lo[0], hi[0]] {
                    let mut p = [0.0; 3];
                    p[axis] = face;
                    p[t] = v;
                    interface.push(p);
                }
            } else {
                let (t0, t1) = (tang[0].unwrap(), tang[1].unwrap());
                let samples = 16;
                let corners = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])];
                for e in 0..4 {
                    let (a0, a1) = corners[e];
                    let (b0, b1) = corners[(e + 1) % 4];
                    for s in 0..samples {
                        let f = s as f64 / samples as f64;
                        let mut p = [0.0; 3];
                        p[axis] = face;
                        p[t0] = a0 + f * (b0 - a0);
                        p[t1] = a1 + f * (b1 - a1);
                        interface.push(p);
                    }
                }
            }
            Ok(BoundaryPartition {
                placement,
                patch: Patch::Face { axis, upper, lo, hi },
                gamma1_measure,
                boundary_measure: total,
                interface,
            })
        }
        (Shape::Disk { radius }, Placement::Arc { center_angle }) => {
            let half = 0.5 * gamma1_measure / radius;
            let start = center_angle - half;
            let end = center_angle + half;
            Ok(BoundaryPartition {
                placement,
                patch: Patch::Arc { start, end },
                gamma1_measure,
                boundary_measure: total,
                interface: alloc::vec![domain.circle_point(start), domain.circle_point(end)],
            })
        }
        (Shape::Ball { radius }, Placement::Cap { direction }) => {
            let norm = math::sqrt(math::dot(&direction, &direction));
            if !(norm > 0.0) {
                return Err(Error::InvalidPartition("cap direction must be non-zero".into()));
            }
            let d = [direction[0] / norm, direction[1] / norm, direction[2] / norm];
            // Cap area 2πR²(1 − cos α).
            let cos_half = 1.0 - gamma1_measure / (2.0 * PI * radius * radius);
            let frame = orthonormal_frame(&d);
            let sin_half = math::sqrt((1.0 - cos_half * cos_half).max(0.0));
            let c = domain.center();
            let samples = 64;
            let interface = (0..samples)
                .map(|s| {
                    let phi = 2.0 * PI * s as f64 / samples as f64;
                    let mut p = c;
                    for a in 0..3 {
                        p[a] += radius
                            * (cos_half * d[a]
                                + sin_half * (math::cos(phi) * frame[0][a] + math::sin(phi) * frame[1][a]));
                    }
                    p
                })
                .collect();
            Ok(BoundaryPartition {
                placement,
                patch: Patch::Cap { direction: d, cos_half },
                gamma1_measure,
                boundary_measure: total,
                interface,
            })
        }
        (_, p) => Err(Error::InvalidPartition(format!("placement {p:?} does not apply to this domain"))),
    }
}

/// Two unit vectors completing `d` to an orthonormal frame.
fn orthonormal_frame(d: &Point) -> [Point; 2] {
    let helper = if math::abs(d[0]) < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let proj = math::dot(&helper, d);
    let mut e1 = [helper[0] - proj * d[0], helper[1] - proj * d[1], helper[2] - proj * d[2]];
    let n1 = math::sqrt(math::dot(&e1, &e1));
    for v in e1.iter_mut() {
        *v /= n1;
    }
    let e2 = [d[1] * e1[2] - d[2] * e1[1], d[2] * e1[0] - d[0] * e1[2], d[0] * e1[1] - d[1] * e1[0]];
    [e1, e2]
}

/// Composite midpoint rule on the parametrized boundary.
///
/// On the circle the nodes are equally spaced in arc length and rotated so
/// that both interface points are nodes; interface nodes give half their
/// weight to each side. On faces and spheres the patch edges coincide with
/// cell edges, so no node sits on Γ̃.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point>,
    pub tags: Vec<RegionTag>,
    /// Polar angle of each node (circle only; empty otherwise).
    pub angles: Vec<f64>,
    /// Node spacing in arc length (circle) or a representative cell size.
    pub spacing: f64,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weight a node contributes to Γ1.
    pub fn gamma1_weight(&self, i: usize) -> f64 {
        match self.tags[i] {
            RegionTag::Gamma1 => self.weights[i],
            RegionTag::Interface => 0.5 * self.weights[i],
            RegionTag::Gamma2 => 0.0,
        }
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn gamma1_total(&self) -> f64 {
        (0..self.len()).map(|i| self.gamma1_weight(i)).sum()
    }
}

pub fn boundary_quadrature(domain: &Domain, partition: &BoundaryPartition, n: usize) -> Result<BoundaryQuadrature> {
    if n < 8 {
        return Err(Error::UnresolvedQuadrature(format!("need at least 8 nodes, got {n}")));
    }
    let quad = match domain.shape() {
        Shape::Disk { radius } => circle_quadrature(domain, radius, partition, n)?,
        Shape::Rectangle { .. } | Shape::Box { .. } => face_quadrature(domain, partition, n)?,
        Shape::Ball { radius } => sphere_quadrature(domain, radius, partition, n)?,
    };
    let g1 = quad.gamma1_total();
    if math::abs(g1 - partition.gamma1_measure) > ALIGN_TOL * domain.boundary_measure().max(1.0) {
        return Err(Error::UnresolvedQuadrature(format!(
            "Γ1 weight {g1} does not match |Γ1| = {} on {n} nodes",
            partition.gamma1_measure
        )));
    }
    Ok(quad)
}

fn circle_quadrature(domain: &Domain, radius: f64, partition: &BoundaryPartition, n: usize) -> Result<BoundaryQuadrature> {
    let dtheta = 2.0 * PI / n as f64;
    let start = match partition.patch {
        Patch::Arc { start, end } => {
            let intervals = (end - start) / dtheta;
            if intervals < 1.0 - ALIGN_TOL || math::abs(intervals - libm::round(intervals)) > 1e-6 {
                return Err(Error::UnresolvedQuadrature(format!(
                    "arc spans {intervals} node intervals; needs a positive integer"
                )));
            }
            start
        }
        _ => 0.0,
    };
    let c = domain.center();
    let mut q = BoundaryQuadrature {
        nodes: Vec::with_capacity(n),
        weights: alloc::vec![radius * dtheta; n],
        normals: Vec::with_capacity(n),
        tags: Vec::with_capacity(n),
        angles: Vec::with_capacity(n),
        spacing: radius * dtheta,
    };
    let arc_nodes = match partition.patch {
        Patch::Arc { start, end } => libm::round((end - start) / dtheta) as usize,
        _ => 0,
    };
    for i in 0..n {
        let theta = start + i as f64 * dtheta;
        let (s, co) = (math::sin(theta), math::cos(theta));
        q.nodes.push([c[0] + radius * co, c[1] + radius * s, 0.0]);
        q.normals.push([co, s, 0.0]);
        q.angles.push(theta);
        let tag = match partition.patch {
            Patch::Empty => RegionTag::Gamma2,
            Patch::Whole => RegionTag::Gamma1,
            _ if i == 0 || i == arc_nodes => RegionTag::Interface,
            _ if i < arc_nodes => RegionTag::Gamma1,
            _ => RegionTag::Gamma2,
        };
        q.tags.push(tag);
    }
    Ok(q)
}

fn face_quadrature(domain: &Domain, partition: &BoundaryPartition, n: usize) -> Result<BoundaryQuadrature> {
    let dim = domain.dim();
    let ext = domain.extents();
    let lc = domain.lower_corner();
    let total = domain.boundary_measure();
    // Cells per unit length, spread evenly in measure.
    let density = if dim == 2 { n as f64 / total } else { math::sqrt(n as f64 / total) };
    let mut q = BoundaryQuadrature {
        nodes: Vec::new(),
        weights: Vec::new(),
        normals: Vec::new(),
        tags: Vec::new(),
        angles: Vec::new(),
        spacing: 1.0 / density,
    };
    for axis in 0..dim {
        for upper in [false, true] {
            let tang = tangential_axes(dim, axis);
            let counts: [usize; 2] = core::array::from_fn(|s| match tang[s] {
                Some(a) => (libm::round(ext[a] * density) as usize).max(1),
                None => 1,
            });
            let mut normal = [0.0; 3];
            normal[axis] = if upper { 1.0 } else { -1.0 };
            let face = if upper { lc[axis] + ext[axis] } else { lc[axis] };
            for i in 0..counts[0] {
                for j in 0..counts[1] {
                    let mut p = [0.0; 3];
                    p[axis] = face;
                    let mut w = 1.0;
                    for (slot, idx) in [(0usize, i), (1, j)] {
                        if let Some(a) = tang[slot] {
                            let cell = ext[a] / counts[slot] as f64;
                            p[a] = lc[a] + (idx as f64 + 0.5) * cell;
                            w *= cell;
                        }
                    }
                    q.tags.push(partition.classify(domain, &p));
                    q.nodes.push(p);
                    q.weights.push(w);
                    q.normals.push(normal);
                }
            }
        }
    }
    Ok(q)
}

fn sphere_quadrature(domain: &Domain, radius: f64, partition: &BoundaryPartition, n: usize) -> Result<BoundaryQuadrature> {
    // Equal-area cells: uniform in z = cos(polar angle) and in azimuth.
    let bands = (libm::round(math::sqrt(n as f64 / 2.0)) as usize).max(2);
    let sectors = (n / bands).max(4);
    let (d, frame) = match partition.patch {
        Patch::Cap { direction, .. } => (direction, orthonormal_frame(&direction)),
        _ => ([0.0, 0.0, 1.0], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
    };
    let dz = 2.0 / bands as f64;
    let dphi = 2.0 * PI / sectors as f64;
    let w = radius * radius * dz * dphi;
    let c = domain.center();
    let mut q = BoundaryQuadrature {
        nodes: Vec::with_capacity(bands * sectors),
        weights: alloc::vec![w; bands * sectors],
        normals: Vec::with_capacity(bands * sectors),
        tags: Vec::with_capacity(bands * sectors),
        angles: Vec::new(),
        spacing: radius * math::sqrt(dz * dphi),
    };
    for b in 0..bands {
        let z = -1.0 + (b as f64 + 0.5) * dz;
        let s = math::sqrt(1.0 - z * z);
        for k in 0..sectors {
            let phi = (k as f64 + 0.5) * dphi;
            let mut nrm = [0.0; 3];
            for a in 0..3 {
                nrm[a] = z * d[a] + s * (math::cos(phi) * frame[0][a] + math::sin(phi) * frame[1][a]);
            }
            let p = [c[0] + radius * nrm[0], c[1] + radius * nrm[1], c[2] + radius * nrm[2]];
            q.tags.push(partition.classify(domain, &p));
            q.nodes.push(p);
            q.normals.push(nrm);
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_shapes_have_analytic_boundary_measure() {
        assert_eq!(Domain::unit_square().boundary_measure(), 4.0);
        assert!((Domain::unit_disk().boundary_measure() - 2.0 * PI).abs() < 1e-15);
        assert_eq!(Domain::unit_cube().boundary_measure(), 6.0);
        assert!((Domain::ball(2.0).unwrap().boundary_measure() - 16.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn negative_side_is_rejected() {
        let err = Domain::new(Shape::Rectangle { width: -1.0, height: 1.0 }, [0.0; 3]);
        assert!(matches!(err, Err(Error::InvalidDomain(_))));
        assert!(Domain::disk(0.0).is_err());
    }

    #[test]
    fn square_patch_half_length_has_two_interface_points() {
        let d = Domain::unit_square();
        let p = partition_boundary(&d, 20.0 / 40.0, Placement::default_for(&d)).unwrap();
        assert_eq!(p.interface.len(), 2);
        assert!((p.interface[0][0] - 0.25).abs() < 1e-15);
        assert!((p.interface[1][0] - 0.75).abs() < 1e-15);
        assert!((p.gamma1_measure + p.gamma2_measure() - 4.0).abs() < 1e-15);
        match p.patch {
            Patch::Face { lo, hi, .. } => assert!((hi[0] - lo[0] - 0.5).abs() < 1e-15),
            _ => panic!("expected a face patch"),
        }
    }

    #[test]
    fn cube_patch_is_centred_square() {
        let d = Domain::unit_cube();
        let p = partition_boundary(&d, 0.49, Placement::default_for(&d)).unwrap();
        match p.patch {
            Patch::Face { axis, lo, hi, .. } => {
                assert_eq!(axis, 2);
                for s in 0..2 {
                    assert!((lo[s] - 0.15).abs() < 1e-12);
                    assert!((hi[s] - 0.85).abs() < 1e-12);
                }
            }
            _ => panic!("expected a face patch"),
        }
    }

    #[test]
    fn zero_measure_is_empty_partition() {
        let d = Domain::unit_square();
        let p = partition_boundary(&d, 0.0, Placement::default_for(&d)).unwrap();
        assert!(p.is_empty());
        assert!(p.interface.is_empty());
        assert_eq!(p.gamma2_measure(), 4.0);
    }

    #[test]
    fn oversize_patches_are_rejected() {
        let d = Domain::unit_square();
        assert!(partition_boundary(&d, 5.0, Placement::default_for(&d)).is_err());
        assert!(partition_boundary(&d, 1.5, Placement::default_for(&d)).is_err());
    }

    #[test]
    fn normal_offsets() {
        let disk = Domain::unit_disk();
        let p = normal_offset(&disk, &[1.0, 0.0, 0.0], 0.1).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15 && p[1].abs() < 1e-15);
        assert!(matches!(normal_offset(&disk, &[1.0, 0.0, 0.0], 3.0), Err(Error::OffsetOutside(_))));
        let sq = Domain::unit_square();
        let p = normal_offset(&sq, &[0.5, 0.0, 0.0], 0.05).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.05).abs() < 1e-15);
        assert!((sq.boundary_distance(&p) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn circle_quadrature_integrates_constants_and_cos_squared() {
        let d = Domain::unit_disk();
        let p = partition_boundary(&d, 0.0, Placement::default_for(&d)).unwrap();
        let q = boundary_quadrature(&d, &p, 256).unwrap();
        assert!((q.integrate(|_| 1.0) - 2.0 * PI).abs() < 1e-10);
        assert!((q.integrate(|x| x[0] * x[0]) - PI).abs() < 1e-8);
        for nrm in &q.normals {
            assert!((math::dot(nrm, nrm) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_circle_gamma1_weight_is_pi() {
        let d = Domain::unit_disk();
        let p = partition_boundary(&d, PI, Placement::default_for(&d)).unwrap();
        let q = boundary_quadrature(&d, &p, 256).unwrap();
        assert!((q.gamma1_total() - PI).abs() < 1e-10);
        assert_eq!(q.tags.iter().filter(|t| **t == RegionTag::Interface).count(), 2);
        for x in &p.interface {
            assert_eq!(p.classify(&d, x), RegionTag::Interface);
        }
    }

    #[test]
    fn misaligned_arc_is_unresolved() {
        let d = Domain::unit_disk();
        let p = partition_boundary(&d, 1.0, Placement::default_for(&d)).unwrap();
        assert!(matches!(boundary_quadrature(&d, &p, 64), Err(Error::UnresolvedQuadrature(_))));
        assert!(boundary_quadrature(&d, &p, 4).is_err());
    }

    #[test]
    fn face_and_sphere_quadratures_sum_to_measure() {
        let sq = Domain::unit_square();
        let p = partition_boundary(&sq, 0.5, Placement::default_for(&sq)).unwrap();
        let q = boundary_quadrature(&sq, &p, 256).unwrap();
        assert!((q.total_weight() - 4.0).abs() < 1e-12);
        assert!((q.gamma1_total() - 0.5).abs() < 1e-12);

        let cube = Domain::unit_cube();
        let p = partition_boundary(&cube, 0.16, Placement::default_for(&cube)).unwrap();
        let q = boundary_quadrature(&cube, &p, 6 * 400).unwrap();
        assert!((q.total_weight() - 6.0).abs() < 1e-12);
        assert!((q.gamma1_total() - 0.16).abs() < 1e-12);

        let ball = Domain::ball(1.0).unwrap();
        let p = partition_boundary(&ball, PI, Placement::default_for(&ball)).unwrap();
        let q = boundary_quadrature(&ball, &p, 800).unwrap();
        assert!((q.total_weight() - 4.0 * PI).abs() < 1e-10);
        assert!((q.gamma1_total() - PI).abs() < 1e-10);
    }

    #[test]
    fn quadrature_error_drops_with_refinement() {
        // ∫ x1^4 over the unit square boundary: 2·(1/5) + 0 + 1 = 1.4
        let sq = Domain::unit_square();
        let p = partition_boundary(&sq, 0.0, Placement::default_for(&sq)).unwrap();
        let err = |n| {
            let q = boundary_quadrature(&sq, &p, n).unwrap();
            (q.integrate(|x| x[0].powi(4)) - 1.4).abs()
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 / e2 > 3.5, "midpoint rule should be second order: {e1} -> {e2}");
    }

    #[test]
    fn circle_defect_identity() {
        // (x − y)·n(x) = |x − y|²/(2R)
        let r = 2.5;
        let d = Domain::disk(r).unwrap();
        for i in 0..50 {
            let x = d.circle_point(0.37 * i as f64);
            let y = d.circle_point(1.91 * i as f64 + 0.3);
            let n = d.normal(&x).unwrap();
            let lhs = (0..2).map(|a| (x[a] - y[a]) * n[a]).sum::<f64>();
            let rhs = math::dist2(&x[..2], &y[..2]) / (2.0 * r);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
