//! Spatial discretization: uniform unit-measure grids in 1D and 2D,
//! subdomain masks, reaction-rate profiles, diffusion fields (including
//! profiles that vanish at a point), and discrete Poincaré constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("grid needs at least 2 cells per axis, got {0}")]
    TooFewCells(usize),
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("mask selects no cells")]
    EmptyMask,
    #[error("mask fraction must lie in (0, 1] and select at least one cell")]
    BadFraction,
    #[error("interval ({0}, {1}) not contained in [0, 1]")]
    BadInterval(f64, f64),
    #[error("vanishing-diffusion exponent must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("point {0:?} lies outside the unit domain")]
    BadPoint(Vec<f64>),
    #[error("field defined on {expected} cells, got {got}")]
    CellCount { expected: usize, got: usize },
}

/// Uniform cell-centered grid on [0,1] or [0,1]^2 with total measure one.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    cell_measure: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self, SpatialError> {
        if dim != 1 && dim != 2 {
            return Err(SpatialError::BadDimension(dim));
        }
        if n < 2 {
            return Err(SpatialError::TooFewCells(n));
        }
        Ok(Self {
            dim,
            n,
            cell_measure: 1.0 / (n as f64).powi(dim as i32),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn n_cells(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    /// Grid spacing along each axis.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Center coordinates of cell `c` (row-major in 2D: `c = iy * n + ix`).
    pub fn center(&self, c: usize) -> Vec<f64> {
        let h = self.h();
        match self.dim {
            1 => vec![(c as f64 + 0.5) * h],
            _ => {
                let ix = c % self.n;
                let iy = c / self.n;
                vec![(ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h]
            }
        }
    }

    /// Interior faces as (left cell, right cell) pairs, x-faces first.
    pub fn faces(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut faces = Vec::new();
        match self.dim {
            1 => {
                for i in 0..n - 1 {
                    faces.push((i, i + 1));
                }
            }
            _ => {
                for iy in 0..n {
                    for ix in 0..n - 1 {
                        faces.push((iy * n + ix, iy * n + ix + 1));
                    }
                }
                for iy in 0..n - 1 {
                    for ix in 0..n {
                        faces.push((iy * n + ix, (iy + 1) * n + ix));
                    }
                }
            }
        }
        faces
    }
}

/// Axis-aligned rectangle ((ax, bx), (ay, by)) in the unit square.
pub type Rect = ((f64, f64), (f64, f64));

/// Subset of grid cells with its measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainMask {
    member: Vec<bool>,
    measure: f64,
}

impl SubdomainMask {
    fn from_members(grid: &Grid, member: Vec<bool>) -> Result<Self, SpatialError> {
        let count = member.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(SpatialError::EmptyMask);
        }
        Ok(Self {
            measure: count as f64 * grid.cell_measure(),
            member,
        })
    }

    /// Full-domain mask.
    pub fn full(grid: &Grid) -> Self {
        Self {
            member: vec![true; grid.n_cells()],
            measure: 1.0,
        }
    }

    /// Cells whose centers lie in the union of the given 1D intervals.
    pub fn from_intervals(grid: &Grid, intervals: &[(f64, f64)]) -> Result<Self, SpatialError> {
        assert_eq!(grid.dim(), 1, "interval masks are one-dimensional");
        for &(a, b) in intervals {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
                return Err(SpatialError::BadInterval(a, b));
            }
        }
        let member = (0..grid.n_cells())
            .map(|c| {
                let x = grid.center(c)[0];
                intervals.iter().any(|&(a, b)| x >= a && x <= b)
            })
            .collect();
        Self::from_members(grid, member)
    }

    /// Cells whose centers lie in the union of axis-aligned rectangles,
    /// each given as ((ax, bx), (ay, by)).
    pub fn from_rects(grid: &Grid, rects: &[Rect]) -> Result<Self, SpatialError> {
        assert_eq!(grid.dim(), 2, "rectangle masks are two-dimensional");
        for &((ax, bx), (ay, by)) in rects {
            for &(a, b) in &[(ax, bx), (ay, by)] {
                if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
                    return Err(SpatialError::BadInterval(a, b));
                }
            }
        }
        let member = (0..grid.n_cells())
            .map(|c| {
                let p = grid.center(c);
                rects.iter().any(|&((ax, bx), (ay, by))| {
                    p[0] >= ax && p[0] <= bx && p[1] >= ay && p[1] <= by
                })
            })
            .collect();
        Self::from_members(grid, member)
    }

    /// Exactly `round(fraction * n_cells)` cells drawn without replacement
    /// from a seeded generator. For a fixed seed, masks of smaller fractions
    /// are subsets of masks of larger fractions (the seed fixes one cell
    /// permutation and the fraction decides how much of it is taken).
    pub fn random(grid: &Grid, fraction: f64, seed: u64) -> Result<Self, SpatialError> {
        let total = grid.n_cells();
        if !fraction.is_finite() || fraction <= 0.0 || fraction > 1.0 {
            return Err(SpatialError::BadFraction);
        }
        let count = (fraction * total as f64).round() as usize;
        if count == 0 {
            return Err(SpatialError::BadFraction);
        }
        let mut perm: Vec<usize> = (0..total).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..total - 1 {
            let j = rng.random_range(i..total);
            perm.swap(i, j);
        }
        let mut member = vec![false; total];
        for &c in &perm[..count] {
            member[c] = true;
        }
        Self::from_members(grid, member)
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.member[cell]
    }

    pub fn members(&self) -> &[bool] {
        &self.member
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }
}

/// Spatial profile alpha_l(x) scaling the rates of one component: a per-cell
/// value with a declared lower bound on a mask.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    values: Vec<f64>,
    mask: SubdomainMask,
    lower_bound: f64,
}

impl CoefficientField {
    /// Profile equal to `level` on the mask and zero outside.
    pub fn masked(mask: SubdomainMask, level: f64) -> Self {
        assert!(level > 0.0, "profile level must be positive");
        let values = mask
            .members()
            .iter()
            .map(|&m| if m { level } else { 0.0 })
            .collect();
        Self {
            values,
            mask,
            lower_bound: level,
        }
    }

    /// Constant profile on the whole domain.
    pub fn constant(grid: &Grid, level: f64) -> Self {
        Self::masked(SubdomainMask::full(grid), level)
    }

    /// Everywhere-inactive profile (all reactions scaling with it are off).
    pub fn zero(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.n_cells()],
            mask: SubdomainMask::full(grid),
            lower_bound: 0.0,
        }
    }

    /// Arbitrary per-cell values with an explicit floor on a mask. The floor
    /// must actually hold on masked cells and values must be nonnegative.
    pub fn from_values(
        values: Vec<f64>,
        mask: SubdomainMask,
        lower_bound: f64,
    ) -> Result<Self, SpatialError> {
        if values.len() != mask.members().len() {
            return Err(SpatialError::CellCount {
                expected: mask.members().len(),
                got: values.len(),
            });
        }
        assert!(lower_bound >= 0.0);
        for (c, &v) in values.iter().enumerate() {
            assert!(v >= 0.0, "profile values must be >= 0");
            assert!(
                !mask.contains(c) || v >= lower_bound,
                "profile below its declared floor on masked cell {c}"
            );
        }
        Ok(Self {
            values,
            mask,
            lower_bound,
        })
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &SubdomainMask {
        &self.mask
    }

    /// Declared lower bound on the mask (the kappa of the rate assumption).
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }
}

/// Kind of diffusion profile, kept for reporting and for the epsilon shift.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum DiffusionKind {
    Constant,
    Masked,
    /// Vanishes like |x - x0|^p at a single point.
    VanishingPoint { x0: Vec<f64>, exponent: f64 },
    /// A base profile shifted by a constant epsilon.
    Shifted { eps: f64 },
}

/// Per-species scalar diffusion coefficient field d_i(x) >= 0.
#[derive(Debug, Clone)]
pub struct DiffusionField {
    values: Vec<f64>,
    kind: DiffusionKind,
}

impl DiffusionField {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        assert!(value >= 0.0);
        Self {
            values: vec![value; grid.n_cells()],
            kind: DiffusionKind::Constant,
        }
    }

    /// `inside` on the mask, `outside` elsewhere.
    pub fn masked(mask: &SubdomainMask, inside: f64, outside: f64) -> Self {
        assert!(inside >= 0.0 && outside >= 0.0);
        Self {
            values: mask
                .members()
                .iter()
                .map(|&m| if m { inside } else { outside })
                .collect(),
            kind: DiffusionKind::Masked,
        }
    }

    /// Profile |x_center - x0|^p, zero only on a measure-zero set. With
    /// p = 1 the profile is Lipschitz with constant 1.
    pub fn vanishing(grid: &Grid, x0: &[f64], p: f64) -> Result<Self, SpatialError> {
        if p < 1.0 {
            return Err(SpatialError::BadExponent(p));
        }
        if x0.len() != grid.dim() || x0.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(SpatialError::BadPoint(x0.to_vec()));
        }
        let values = (0..grid.n_cells())
            .map(|c| {
                let center = grid.center(c);
                let dist2: f64 = center
                    .iter()
                    .zip(x0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dist2.sqrt().powf(p)
            })
            .collect();
        Ok(Self {
            values,
            kind: DiffusionKind::VanishingPoint {
                x0: x0.to_vec(),
                exponent: p,
            },
        })
    }

    /// The same field with `eps` added everywhere (the regularized d + eps).
    pub fn shifted(&self, eps: f64) -> Self {
        assert!(eps >= 0.0);
        Self {
            values: self.values.iter().map(|v| v + eps).collect(),
            kind: DiffusionKind::Shifted { eps },
        }
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> &DiffusionKind {
        &self.kind
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Serialize a per-cell field as `cell,value` CSV lines.
pub fn field_to_csv(values: &[f64]) -> String {
    let mut out = String::from("cell,value\n");
    for (c, v) in values.iter().enumerate() {
        out.push_str(&format!("{c},{v:.16e}\n"));
    }
    out
}

/// Smallest nonzero eigenvalue of the Neumann Laplacian restricted to the
/// masked cell subgraph (face weights 1/h^2, zero flux across unmasked
/// faces), estimated by deflated inverse power iteration to 1e-8 relative.
/// Returns 0 when the masked subgraph is disconnected: the mean-value
/// Poincaré inequality fails across components.
pub fn poincare_constant(grid: &Grid, mask: &SubdomainMask) -> Result<f64, SpatialError> {
    let cells: Vec<usize> = (0..grid.n_cells()).filter(|&c| mask.contains(c)).collect();
    if cells.is_empty() {
        return Err(SpatialError::EmptyMask);
    }
    let index_of: std::collections::HashMap<usize, usize> =
        cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = cells.len();
    if n == 1 {
        // A single cell carries no gradient; the inequality is vacuous.
        return Ok(f64::INFINITY);
    }

    let w = 1.0 / (grid.h() * grid.h());
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in grid.faces() {
        if let (Some(&ia), Some(&ib)) = (index_of.get(&a), index_of.get(&b)) {
            adj[ia].push(ib);
            adj[ib].push(ia);
        }
    }

    // Connectivity sweep.
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                reached += 1;
                stack.push(u);
            }
        }
    }
    if reached < n {
        return Ok(0.0);
    }

    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut acc = 0.0;
            for &j in &adj[i] {
                acc += x[i] - x[j];
            }
            out[i] = w * acc;
        }
    };

    // Deterministic start with good overlap with low modes, constants removed.
    let mut v: Vec<f64> = cells
        .iter()
        .map(|&c| {
            let p = grid.center(c);
            p.iter().sum::<f64>() + 0.3 * (7.0 * p[0]).sin()
        })
        .collect();
    let project = |z: &mut Vec<f64>| {
        let mean = z.iter().sum::<f64>() / n as f64;
        for zi in z.iter_mut() {
            *zi -= mean;
        }
        let norm = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            for zi in z.iter_mut() {
                *zi /= norm;
            }
        }
    };
    project(&mut v);

    let mut lambda_old = f64::INFINITY;
    let mut y = vec![0.0; n];
    let mut ly = vec![0.0; n];
    for _ in 0..1000 {
        y.copy_from_slice(&v);
        // Singular solve on the range of the Laplacian.
        linalg::conjugate_gradient(apply, &v, &mut y, 1e-12, 20 * n, true);
        let mut yv = y.clone();
        project(&mut yv);
        apply(&yv, &mut ly);
        let lambda = yv.iter().zip(&ly).map(|(a, b)| a * b).sum::<f64>();
        v = yv;
        if (lambda - lambda_old).abs() <= 1e-8 * lambda.abs() {
            return Ok(lambda);
        }
        lambda_old = lambda;
    }
    Ok(lambda_old)
}
