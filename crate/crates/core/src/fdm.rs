//! Explicit finite differences for `u_t = Δu + f` on a rectangle or box with
//! flux `u^q` on Γ1 and zero flux elsewhere.
//!
//! The grid is node-centred with nodes on the boundary. Neumann data enter
//! through a ghost layer: for a node on a face, the ghost value across that
//! face is `u_mirror + 2h·flux`. The flux at a face node is `c·u^q` where `c`
//! is the fraction of the node's dual cell covered by Γ1, so nodes sitting
//! exactly on Γ̃ get the interface coefficient (½ by default) and nodes on
//! domain edges or corners get zero.
//!
//! Conservation: with trapezoid node weights (the dual-cell volumes) the
//! scheme satisfies `Σ w u(t+k) − Σ w u(t) = k·Σ_faces Σ a·c·u^q` exactly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{tangential_axes, BoundaryPartition, Domain, Patch, Point, Shape};
use crate::math::{self, Exponent};
use crate::{Error, Result};

/// `max u` level past which the march is abandoned even if the threshold
/// is higher.
pub const OVERFLOW_GUARD: f64 = 1e6;

/// Slack allowed in pointwise dominance checks.
pub const DOMINANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Constant(f64),
    /// Values at every grid node, in [`Grid`] order.
    Samples(Vec<f64>),
}

/// How a face patch is laid onto the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatchAlignment {
    /// Use the patch as given; nodes exactly on Γ̃ take the interface coefficient.
    #[default]
    Exact,
    /// Shift the patch by −h/2 along any tangential axis where its edges sit
    /// on nodes, so Γ1 is a union of whole boundary dual cells.
    DualCells,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub domain: Domain,
    pub partition: BoundaryPartition,
    pub q: f64,
    pub u0: InitialData,
    pub h: f64,
    pub k: f64,
    pub threshold: f64,
    pub t_max: f64,
    /// Time-independent interior source at every grid node.
    pub source: Option<Vec<f64>>,
    /// Flux coefficient applied at nodes on Γ̃.
    pub interface_coefficient: f64,
    pub alignment: PatchAlignment,
    /// Series sampling stride in steps; 0 picks a stride giving at most
    /// about 20 000 samples up to `t_max`.
    pub record_every: u64,
}

impl SolverConfig {
    pub fn new(domain: Domain, partition: BoundaryPartition, q: f64, u0: f64, h: f64, k: f64) -> Self {
        Self {
            domain,
            partition,
            q,
            u0: InitialData::Constant(u0),
            h,
            k,
            threshold: 10.0,
            t_max: 1e5,
            source: None,
            interface_coefficient: 0.5,
            alignment: PatchAlignment::Exact,
            record_every: 0,
        }
    }

    pub fn cfl_limit(&self) -> f64 {
        self.h * self.h / (2.0 * self.domain.dim() as f64)
    }

    pub fn validate(&self) -> Result<Grid> {
        if !(self.q > 1.0) {
            return Err(Error::InvalidParameter(format!("q must exceed 1, got {}", self.q)));
        }
        if !(self.h > 0.0) || !(self.k > 0.0) {
            return Err(Error::InvalidParameter("h and k must be positive".into()));
        }
        if !(self.threshold > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::InvalidParameter("threshold and t_max must be positive".into()));
        }
        if self.k > self.cfl_limit() * (1.0 + 1e-12) {
            return Err(Error::Cfl { k: self.k, limit: self.cfl_limit() });
        }
        let grid = Grid::new(&self.domain, self.h)?;
        match &self.u0 {
            InitialData::Constant(c) if !(*c >= 0.0) => {
                return Err(Error::InvalidParameter(format!("u0 must be non-negative, got {c}")));
            }
            InitialData::Samples(s) => {
                if s.len() != grid.len() {
                    return Err(Error::InvalidParameter(format!(
                        "u0 has {} samples, grid has {} nodes",
                        s.len(),
                        grid.len()
                    )));
                }
                if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidParameter("u0 must be finite and non-negative".into()));
                }
            }
            _ => {}
        }
        if let Some(f) = &self.source {
            if f.len() != grid.len() {
                return Err(Error::InvalidParameter("source must have one value per node".into()));
            }
        }
        Ok(grid)
    }
}

/// Uniform node-centred grid covering a rectangle or box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    /// Cells per axis (nodes per axis = cells + 1).
    pub cells: [usize; 3],
    pub h: f64,
    pub origin: Point,
}

impl Grid {
    pub fn new(domain: &Domain, h: f64) -> Result<Self> {
        if !matches!(domain.shape(), Shape::Rectangle { .. } | Shape::Box { .. }) {
            return Err(Error::InvalidDomain("finite differences need a rectangle or box".into()));
        }
        let ext = domain.extents();
        let dim = domain.dim();
        let mut cells = [0usize; 3];
        for a in 0..dim {
            let c = ext[a] / h;
            let r = libm::round(c);
            if r < 2.0 || math::abs(c - r) > 1e-9 * c {
                return Err(Error::InvalidParameter(format!("side {} is not a multiple of h = {h}", ext[a])));
            }
            cells[a] = r as usize;
        }
        Ok(Self { dim, cells, h, origin: domain.lower_corner() })
    }

    pub fn nodes_per_axis(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.cells[axis] + 1
        } else {
            1
        }
    }

    pub fn len(&self) -> usize {
        (0..3).map(|a| self.nodes_per_axis(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index, axis 0 fastest.
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        let n0 = self.nodes_per_axis(0);
        let n1 = self.nodes_per_axis(1);
        ijk[0] + n0 * (ijk[1] + n1 * ijk[2])
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n0 = self.nodes_per_axis(0);
        let n1 = self.nodes_per_axis(1);
        [idx % n0, (idx / n0) % n1, idx / (n0 * n1)]
    }

    pub fn coord(&self, ijk: [usize; 3]) -> Point {
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.origin[a] + ijk[a] as f64 * self.h;
        }
        p
    }

    pub fn point(&self, idx: usize) -> Point {
        self.coord(self.multi_index(idx))
    }

    /// Dual-cell volume of a node (trapezoid weight).
    pub fn weight(&self, idx: usize) -> f64 {
        let ijk = self.multi_index(idx);
        (0..self.dim)
            .map(|a| if ijk[a] == 0 || ijk[a] == self.cells[a] { 0.5 * self.h } else { self.h })
            .product()
    }

    /// Sample a function at every node.
    pub fn sample<F: Fn(&Point) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    /// Trapezoid-rule integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(i, v)| self.weight(i) * v).sum()
    }

    /// Nodes lying on the face normal to `axis`, with their dual area on
    /// that face.
    pub fn face_nodes(&self, axis: usize, upper: bool) -> Vec<(usize, f64)> {
        let fixed = if upper { self.cells[axis] } else { 0 };
        let tang = tangential_axes(self.dim, axis);
        let mut out = Vec::new();
        for idx in 0..self.len() {
            let ijk = self.multi_index(idx);
            if ijk[axis] != fixed {
                continue;
            }
            let mut area = 1.0;
            for a in tang.iter().flatten() {
                area *= if ijk[*a] == 0 || ijk[*a] == self.cells[*a] { 0.5 * self.h } else { self.h };
            }
            out.push((idx, area));
        }
        out
    }

    /// True when the node lies on at least one face.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let ijk = self.multi_index(idx);
        (0..self.dim).any(|a| ijk[a] == 0 || ijk[a] == self.cells[a])
    }
}

/// Flux coefficients on one face, in [`Grid`] order of the face nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    pub axis: usize,
    pub upper: bool,
    /// `(grid index, dual area, coefficient)` for nodes with a non-zero coefficient.
    pub nodes: Vec<(usize, f64, f64)>,
}

/// Coefficient of `u^q` in the flux at every face node carrying Γ1.
pub fn flux_coefficients(
    grid: &Grid,
    partition: &BoundaryPartition,
    interface_coefficient: f64,
    alignment: PatchAlignment,
) -> Vec<FaceFlux> {
    let mut out = Vec::new();
    let h = grid.h;
    for axis in 0..grid.dim {
        for upper in [false, true] {
            let mut nodes = Vec::new();
            for (idx, area) in grid.face_nodes(axis, upper) {
                let ijk = grid.multi_index(idx);
                let coef = match partition.patch {
                    Patch::Empty | Patch::Arc { .. } | Patch::Cap { .. } => 0.0,
                    Patch::Whole => 1.0,
                    Patch::Face { axis: pa, upper: pu, mut lo, mut hi } => {
                        if alignment == PatchAlignment::DualCells {
                            align_to_dual_cells(grid, axis, &mut lo, &mut hi);
                        }
                        if pa != axis || pu != upper || grid.is_edge(ijk) {
                            0.0
                        } else {
                            let mut c = 1.0;
                            for (slot, a) in tangential_axes(grid.dim, axis).into_iter().enumerate() {
                                let Some(a) = a else { continue };
                                let x = grid.origin[a] + ijk[a] as f64 * h;
                                let tol = 1e-9 * h;
                                let factor = if math::abs(x - lo[slot]) <= tol || math::abs(x - hi[slot]) <= tol {
                                    interface_coefficient
                                } else {
                                    let a0 = (x - 0.5 * h).max(lo[slot]);
                                    let a1 = (x + 0.5 * h).min(hi[slot]);
                                    let f = ((a1 - a0) / h).clamp(0.0, 1.0);
                                    if f < 1e-9 {
                                        0.0
                                    } else if f > 1.0 - 1e-9 {
                                        1.0
                                    } else {
                                        f
                                    }
                                };
                                c *= factor;
                            }
                            c
                        }
                    }
                };
                if coef != 0.0 {
                    nodes.push((idx, area, coef));
                }
            }
            if !nodes.is_empty() {
                out.push(FaceFlux { axis, upper, nodes });
            }
        }
    }
    out
}

fn align_to_dual_cells(grid: &Grid, axis: usize, lo: &mut [f64; 2], hi: &mut [f64; 2]) {
    let h = grid.h;
    for (slot, a) in tangential_axes(grid.dim, axis).into_iter().enumerate() {
        let Some(a) = a else { continue };
        let rel = (lo[slot] - grid.origin[a]) / h;
        if math::abs(rel - libm::round(rel)) < 1e-9 {
            lo[slot] -= 0.5 * h;
            hi[slot] -= 0.5 * h;
        }
    }
}

impl Grid {
    /// Node on two or more faces.
    fn is_edge(&self, ijk: [usize; 3]) -> bool {
        (0..self.dim).filter(|&a| ijk[a] == 0 || ijk[a] == self.cells[a]).count() > 1
    }
}

/// Discrete field at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    pub step_index: u64,
    /// Values at every node in [`Grid`] order.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub step: u64,
    pub t: f64,
    /// `M1(t)`: max over the closed domain.
    pub max: f64,
    /// `m1(t)`: min over the closed domain.
    pub min: f64,
    /// Max over the boundary nodes.
    pub boundary_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub crossed: bool,
    /// First time `M1` reaches the threshold, linearly interpolated.
    pub t0: Option<f64>,
    pub m1_at_t0: Option<f64>,
    pub threshold: f64,
    pub steps: u64,
    pub final_time: f64,
    pub series: Vec<SeriesPoint>,
    /// Smallest nodal value seen over the whole march.
    pub min_seen: f64,
}

impl ThresholdReport {
    pub fn positivity_held(&self) -> bool {
        self.min_seen >= 0.0
    }
}

/// Explicit solver with preallocated ghost-padded buffers.
#[derive(Debug, Clone)]
pub struct FdmSolver {
    config: SolverConfig,
    grid: Grid,
    /// Padded length per axis (nodes + 2 ghosts).
    padded: [usize; 3],
    strides: [usize; 3],
    faces: Vec<PaddedFace>,
    source: Option<Vec<f64>>,
    exponent: Exponent,
    ratio: f64,
    cur: Vec<f64>,
    next: Vec<f64>,
    t: f64,
    step_index: u64,
}

#[derive(Debug, Clone)]
struct PaddedFace {
    /// Ghost index, mirror index, face node index, flux coefficient times 2h.
    entries: Vec<(usize, usize, usize, f64)>,
}

impl FdmSolver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        let grid = config.validate()?;
        let dim = grid.dim;
        let mut padded = [1usize; 3];
        for a in 0..dim {
            padded[a] = grid.nodes_per_axis(a) + 2;
        }
        let strides = [1, padded[0], padded[0] * padded[1]];
        let flux = flux_coefficients(&grid, &config.partition, config.interface_coefficient, config.alignment);

        let pad_index = |ijk: [isize; 3]| -> usize {
            let mut idx = 0usize;
            for a in 0..3 {
                let off = if a < dim { (ijk[a] + 1) as usize } else { 0 };
                idx += off * strides[a];
            }
            idx
        };
        let mut faces = Vec::new();
        for axis in 0..dim {
            for upper in [false, true] {
                let coefs: Vec<(usize, f64)> = flux
                    .iter()
                    .filter(|f| f.axis == axis && f.upper == upper)
                    .flat_map(|f| f.nodes.iter().map(|&(i, _, c)| (i, c)))
                    .collect();
                let mut entries = Vec::new();
                for (idx, _) in grid.face_nodes(axis, upper) {
                    let ijk = grid.multi_index(idx);
                    let base = [ijk[0] as isize, ijk[1] as isize, ijk[2] as isize];
                    let dir: isize = if upper { 1 } else { -1 };
                    let mut ghost = base;
                    ghost[axis] += dir;
                    let mut mirror = base;
                    mirror[axis] -= dir;
                    let c = coefs.iter().find(|(i, _)| *i == idx).map_or(0.0, |(_, c)| *c);
                    entries.push((pad_index(ghost), pad_index(mirror), pad_index(base), 2.0 * config.h * c));
                }
                faces.push(PaddedFace { entries });
            }
        }

        let total: usize = padded.iter().product();
        let mut solver = Self {
            exponent: Exponent::new(config.q),
            ratio: config.k / (config.h * config.h),
            source: None,
            padded,
            strides,
            faces,
            cur: vec![0.0; total],
            next: vec![0.0; total],
            t: 0.0,
            step_index: 0,
            grid,
            config,
        };
        let u0 = match &solver.config.u0 {
            InitialData::Constant(c) => vec![*c; solver.grid.len()],
            InitialData::Samples(s) => s.clone(),
        };
        solver.load(&u0);
        if let Some(f) = &solver.config.source {
            let mut padded_f = vec![0.0; total];
            for (i, v) in f.iter().enumerate() {
                padded_f[solver.pad(i)] = solver.config.k * v;
            }
            solver.source = Some(padded_f);
        }
        Ok(solver)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn pad(&self, idx: usize) -> usize {
        let ijk = self.grid.multi_index(idx);
        (0..self.grid.dim).map(|a| (ijk[a] + 1) * self.strides[a]).sum()
    }

    fn load(&mut self, u: &[f64]) {
        for i in 0..u.len() {
            let p = self.pad(i);
            self.cur[p] = u[i];
        }
        fill_ghosts(&mut self.cur, &self.faces, self.exponent);
    }

    /// Reset to a given state.
    pub fn set_state(&mut self, state: &GridState) -> Result<()> {
        if state.u.len() != self.grid.len() {
            return Err(Error::InvalidParameter("state does not match the grid".into()));
        }
        self.load(&state.u);
        self.t = state.t;
        self.step_index = state.step_index;
        Ok(())
    }

    pub fn state(&self) -> GridState {
        GridState { t: self.t, step_index: self.step_index, u: self.values() }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.cur[self.pad(i)]).collect()
    }

    /// One forward-Euler step of `state`, leaving the solver holding the result.
    pub fn step(&mut self, state: &GridState) -> Result<GridState> {
        self.set_state(state)?;
        self.advance()?;
        Ok(self.state())
    }

    /// Advance the internal state by one step and return `(max, min)` of the new field.
    pub fn advance(&mut self) -> Result<(f64, f64)> {
        let ext = if self.grid.dim == 2 { self.sweep_2d() } else { self.sweep_3d() };
        core::mem::swap(&mut self.cur, &mut self.next);
        fill_ghosts(&mut self.cur, &self.faces, self.exponent);
        self.step_index += 1;
        self.t = self.step_index as f64 * self.config.k;
        let (max, min, sum) = ext.finish();
        if !sum.is_finite() {
            return Err(Error::SolverFault { step: self.step_index, reason: "non-finite value".into() });
        }
        Ok((max, min))
    }

    fn sweep_2d(&mut self) -> Extrema {
        let p = self.padded[0];
        let n0 = self.grid.nodes_per_axis(0);
        let n1 = self.grid.nodes_per_axis(1);
        let r = self.ratio;
        let mut ext = Extrema::new();
        for j in 1..=n1 {
            let row = j * p;
            let out = &mut self.next[row + 1..row + 1 + n0];
            let centre = &self.cur[row + 1..row + 1 + n0];
            let left = &self.cur[row..row + n0];
            let right = &self.cur[row + 2..row + 2 + n0];
            let up = &self.cur[row - p + 1..row - p + 1 + n0];
            let down = &self.cur[row + p + 1..row + p + 1 + n0];
            for i in 0..n0 {
                let c = centre[i];
                out[i] = c + r * ((left[i] + right[i]) + (up[i] + down[i]) - 4.0 * c);
            }
            if let Some(src) = &self.source {
                for (o, f) in out.iter_mut().zip(&src[row + 1..row + 1 + n0]) {
                    *o += f;
                }
            }
            ext.scan(out);
        }
        ext
    }

    fn sweep_3d(&mut self) -> Extrema {
        let p0 = self.padded[0];
        let plane = self.strides[2];
        let (n0, n1, n2) = (self.grid.nodes_per_axis(0), self.grid.nodes_per_axis(1), self.grid.nodes_per_axis(2));
        let r = self.ratio;
        let mut ext = Extrema::new();
        for k in 1..=n2 {
            for j in 1..=n1 {
                let row = k * plane + j * p0 + 1;
                let out = &mut self.next[row..row + n0];
                let cur = &self.cur;
                let centre = &cur[row..row + n0];
                let (left, right) = (&cur[row - 1..row - 1 + n0], &cur[row + 1..row + 1 + n0]);
                let (north, south) = (&cur[row - p0..row - p0 + n0], &cur[row + p0..row + p0 + n0]);
                let (below, above) = (&cur[row - plane..row - plane + n0], &cur[row + plane..row + plane + n0]);
                for i in 0..n0 {
                    let c = centre[i];
                    out[i] = c + r * ((left[i] + right[i]) + (north[i] + south[i]) + (below[i] + above[i]) - 6.0 * c);
                }
                if let Some(src) = &self.source {
                    for (o, f) in out.iter_mut().zip(&src[row..row + n0]) {
                        *o += f;
                    }
                }
                ext.scan(out);
            }
        }
        ext
    }

    fn boundary_max(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.grid.is_boundary(i))
            .map(|i| self.cur[self.pad(i)])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn extrema(&self) -> (f64, f64) {
        (0..self.grid.len()).map(|i| self.cur[self.pad(i)]).fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), v| {
            (a.max(v), b.min(v))
        })
    }
}

/// Lane-wise running max/min/sum so the scan vectorizes. The sum only
/// serves to detect NaN/Inf.
struct Extrema {
    max: [f64; 4],
    min: [f64; 4],
    sum: [f64; 4],
}

impl Extrema {
    fn new() -> Self {
        Self { max: [f64::NEG_INFINITY; 4], min: [f64::INFINITY; 4], sum: [0.0; 4] }
    }

    #[inline]
    fn scan(&mut self, v: &[f64]) {
        let mut chunks = v.chunks_exact(4);
        for c in &mut chunks {
            for l in 0..4 {
                let x = c[l];
                self.max[l] = if x > self.max[l] { x } else { self.max[l] };
                self.min[l] = if x < self.min[l] { x } else { self.min[l] };
                self.sum[l] += x;
            }
        }
        for &x in chunks.remainder() {
            self.max[0] = if x > self.max[0] { x } else { self.max[0] };
            self.min[0] = if x < self.min[0] { x } else { self.min[0] };
            self.sum[0] += x;
        }
    }

    fn finish(&self) -> (f64, f64, f64) {
        let max = self.max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.min.iter().copied().fold(f64::INFINITY, f64::min);
        (max, min, self.sum.iter().sum())
    }
}

fn fill_ghosts(u: &mut [f64], faces: &[PaddedFace], q: Exponent) {
    for face in faces {
        for &(ghost, mirror, node, c2h) in &face.entries {
            let flux = if c2h != 0.0 { c2h * q.apply(u[node]) } else { 0.0 };
            u[ghost] = u[mirror] + flux;
        }
    }
}

/// March until `max u` reaches the threshold or `t_max` passes.
pub fn run_until_threshold(config: &SolverConfig) -> Result<ThresholdReport> {
    let mut solver = FdmSolver::new(config.clone())?;
    let k = config.k;
    let max_steps = libm::ceil(config.t_max / k) as u64;
    let stride = if config.record_every > 0 { config.record_every } else { (max_steps / 20_000).max(1) };

    let (mut prev_max, mut prev_min) = solver.extrema();
    let mut series = vec![SeriesPoint { step: 0, t: 0.0, max: prev_max, min: prev_min, boundary_max: solver.boundary_max() }];
    let mut min_seen = prev_min;
    let report = |series: Vec<SeriesPoint>, crossed, t0, m1, steps, min_seen| ThresholdReport {
        crossed,
        t0,
        m1_at_t0: m1,
        threshold: config.threshold,
        steps,
        final_time: steps as f64 * k,
        series,
        min_seen,
    };
    if prev_max >= config.threshold {
        return Ok(report(series, true, Some(0.0), Some(prev_min), 0, min_seen));
    }
    for step in 1..=max_steps {
        let (max, min) = solver.advance()?;
        min_seen = min_seen.min(min);
        if max >= config.threshold {
            let frac = (config.threshold - prev_max) / (max - prev_max);
            let t0 = (step - 1) as f64 * k + frac * k;
            let m1 = prev_min + frac * (min - prev_min);
            series.push(SeriesPoint { step, t: solver.time(), max, min, boundary_max: solver.boundary_max() });
            return Ok(report(series, true, Some(t0), Some(m1), step, min_seen));
        }
        if max > OVERFLOW_GUARD {
            return Err(Error::SolverFault { step, reason: "overflow guard exceeded".into() });
        }
        if step % stride == 0 {
            series.push(SeriesPoint { step, t: solver.time(), max, min, boundary_max: solver.boundary_max() });
        }
        prev_max = max;
        prev_min = min;
    }
    Ok(report(series, false, None, None, max_steps, min_seen))
}

/// Snapshots every `every` steps (including the initial state) up to `t_end`.
pub fn run_trace(config: &SolverConfig, t_end: f64, every: u64) -> Result<Vec<GridState>> {
    let mut solver = FdmSolver::new(config.clone())?;
    let steps = libm::round(t_end / config.k) as u64;
    let every = every.max(1);
    let mut out = vec![solver.state()];
    for s in 1..=steps {
        solver.advance()?;
        if s % every == 0 || s == steps {
            out.push(solver.state());
        }
    }
    Ok(out)
}

/// Boundary flux rate `Σ a·c·u^q` weighted by an optional test function.
fn flux_rate(faces: &[FaceFlux], q: Exponent, u: &[f64], weight: impl Fn(usize) -> f64) -> f64 {
    faces
        .iter()
        .flat_map(|f| f.nodes.iter())
        .map(|&(idx, area, c)| area * c * q.apply(u[idx]) * weight(idx))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassBalance {
    /// `[∫u(t₂) − ∫u(t₁)] − ∫∫_{Γ1} u^q − ∫∫ f` per trace interval.
    pub residuals: Vec<f64>,
    /// `max |r| / ∫u(t₂)` (0 when the field vanishes).
    pub max_normalized: f64,
}

/// Discrete mass balance over consecutive trace snapshots. Time integrals
/// use the trapezoid rule over the snapshots.
pub fn mass_balance_residual(trace: &[GridState], config: &SolverConfig) -> Result<MassBalance> {
    let grid = config.validate()?;
    let faces = flux_coefficients(&grid, &config.partition, config.interface_coefficient, config.alignment);
    let q = Exponent::new(config.q);
    let source_mass = config.source.as_ref().map_or(0.0, |f| grid.integrate(f));
    let mut residuals = Vec::new();
    let mut max_normalized = 0.0f64;
    for pair in trace.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        let mass_change = grid.integrate(&b.u) - grid.integrate(&a.u);
        let inflow = 0.5 * dt * (flux_rate(&faces, q, &a.u, |_| 1.0) + flux_rate(&faces, q, &b.u, |_| 1.0));
        let r = mass_change - inflow - dt * source_mass;
        let scale = grid.integrate(&b.u);
        if scale > 0.0 {
            max_normalized = max_normalized.max(math::abs(r) / scale);
        }
        residuals.push(r);
    }
    Ok(MassBalance { residuals, max_normalized })
}

/// Smooth space-time test function for the weak formulation.
pub trait TestFunction {
    fn value(&self, x: &Point, t: f64) -> f64;
    fn time_derivative(&self, x: &Point, t: f64) -> f64;
    fn laplacian(&self, x: &Point, t: f64) -> f64;
    fn normal_derivative(&self, x: &Point, normal: &Point, t: f64) -> f64;
}

/// `φ ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantTest(pub f64);

impl TestFunction for ConstantTest {
    fn value(&self, _: &Point, _: f64) -> f64 {
        self.0
    }
    fn time_derivative(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
    fn laplacian(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
    fn normal_derivative(&self, _: &Point, _: &Point, _: f64) -> f64 {
        0.0
    }
}

/// `φ(y, τ) = τ`.
#[derive(Debug, Clone, Copy)]
pub struct TimeTest;

impl TestFunction for TimeTest {
    fn value(&self, _: &Point, t: f64) -> f64 {
        t
    }
    fn time_derivative(&self, _: &Point, _: f64) -> f64 {
        1.0
    }
    fn laplacian(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
    fn normal_derivative(&self, _: &Point, _: &Point, _: f64) -> f64 {
        0.0
    }
}

/// `|LHS − RHS|` of the weak formulation
/// `∫∫(φ_τ + Δφ)u = ∫φ(t)u(t) − ∫φ(0)u0 − ∫∫_{Γ1}φ u^q + ∫∫_{∂Ω} u ∂φ/∂n`
/// on a trace starting at t = 0, with trapezoid time integration over the
/// snapshots. Source terms are not included.
pub fn weak_form_residual<T: TestFunction>(trace: &[GridState], config: &SolverConfig, phi: &T) -> Result<f64> {
    let grid = config.validate()?;
    let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
        return Ok(0.0);
    };
    let faces = flux_coefficients(&grid, &config.partition, config.interface_coefficient, config.alignment);
    let q = Exponent::new(config.q);
    let points: Vec<Point> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let g = &grid;
    let boundary: Vec<(usize, f64, Point)> = (0..grid.dim)
        .flat_map(|axis| {
            [false, true].into_iter().flat_map(move |upper| {
                let mut n = [0.0; 3];
                n[axis] = if upper { 1.0 } else { -1.0 };
                g.face_nodes(axis, upper).into_iter().map(move |(i, a)| (i, a, n))
            })
        })
        .collect();

    let volume_term = |s: &GridState| -> f64 {
        s.u.iter()
            .enumerate()
            .map(|(i, u)| grid.weight(i) * (phi.time_derivative(&points[i], s.t) + phi.laplacian(&points[i], s.t)) * u)
            .sum()
    };
    let boundary_term = |s: &GridState| -> f64 {
        let normal_part: f64 =
            boundary.iter().map(|(i, a, n)| a * s.u[*i] * phi.normal_derivative(&points[*i], n, s.t)).sum();
        normal_part - flux_rate(&faces, q, &s.u, |i| phi.value(&points[i], s.t))
    };
    let mut lhs = 0.0;
    let mut rhs_time = 0.0;
    for pair in trace.windows(2) {
        let dt = pair[1].t - pair[0].t;
        lhs += 0.5 * dt * (volume_term(&pair[0]) + volume_term(&pair[1]));
        rhs_time += 0.5 * dt * (boundary_term(&pair[0]) + boundary_term(&pair[1]));
    }
    let pairing = |s: &GridState| -> f64 { s.u.iter().enumerate().map(|(i, u)| grid.weight(i) * phi.value(&points[i], s.t) * u).sum() };
    let rhs = pairing(last) - pairing(first) + rhs_time;
    Ok(math::abs(lhs - rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceVerdict {
    pub steps_checked: u64,
    /// `(step, node, u_a − u_b)` for the first node with `u_a < u_b − slack`.
    pub first_violation: Option<(u64, usize, f64)>,
    /// Smallest `u_a − u_b` seen.
    pub min_gap: f64,
}

impl DominanceVerdict {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// March two configurations in lockstep and check `u_a ≥ u_b − slack` at every
/// node and step, until either run crosses its threshold or `t_max`.
pub fn compare_runs(a: &SolverConfig, b: &SolverConfig) -> Result<DominanceVerdict> {
    if a.domain != b.domain || a.h != b.h || a.k != b.k {
        return Err(Error::InvalidParameter("dominance check needs identical grids and steps".into()));
    }
    let mut sa = FdmSolver::new(a.clone())?;
    let mut sb = FdmSolver::new(b.clone())?;
    let steps = libm::ceil(a.t_max.min(b.t_max) / a.k) as u64;
    let mut verdict = DominanceVerdict { steps_checked: 0, first_violation: None, min_gap: f64::INFINITY };
    let check = |sa: &FdmSolver, sb: &FdmSolver, step: u64, v: &mut DominanceVerdict| {
        for i in 0..sa.grid.len() {
            let (pa, pb) = (sa.pad(i), sb.pad(i));
            let gap = sa.cur[pa] - sb.cur[pb];
            v.min_gap = v.min_gap.min(gap);
            if gap < -DOMINANCE_SLACK && v.first_violation.is_none() {
                v.first_violation = Some((step, i, gap));
            }
        }
    };
    check(&sa, &sb, 0, &mut verdict);
    for step in 1..=steps {
        let (ma, _) = sa.advance()?;
        let (mb, _) = sb.advance()?;
        check(&sa, &sb, step, &mut verdict);
        verdict.steps_checked = step;
        if ma >= a.threshold || mb >= b.threshold || verdict.first_violation.is_some() {
            break;
        }
    }
    Ok(verdict)
}
