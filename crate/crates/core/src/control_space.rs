//! Space-time grids, the control constraint set `B`, nodal control fields
//! and the finite atom dictionaries that stand in for the space of admissible
//! control fields.
//!
//! Nodal ordering is x-fastest: interior node `(ix, iy)` has flat index
//! `ix + (nx - 1) * iy`. Multi-component values are stored node-major with
//! the component index innermost.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on a box `Ω = Π [0, L_a]` with a uniform time grid on
/// `[0, T]`. Homogeneous Dirichlet data live on the boundary nodes, so only
/// interior nodes carry unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    cells: Vec<usize>,
    extents: Vec<f64>,
    nt: usize,
    horizon: f64,
    weights: Vec<f64>,
}

/// Serialized grid header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub nx: Vec<usize>,
    pub extents: Vec<f64>,
    pub nt: usize,
    pub horizon: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        if spec.dim != spec.nx.len() {
            return Err(Error::InvalidGrid(format!(
                "dim = {} but {} cell counts given",
                spec.dim,
                spec.nx.len()
            )));
        }
        make_grid(&spec.nx, &spec.extents, spec.nt, spec.horizon)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            dim: g.dim(),
            nx: g.cells,
            extents: g.extents,
            nt: g.nt,
            horizon: g.horizon,
        }
    }
}

/// Builds a uniform grid. `cells[a]` is the number of cells along axis `a`.
pub fn make_grid(cells: &[usize], extents: &[f64], nt: usize, horizon: f64) -> Result<Grid> {
    if cells.is_empty() || cells.len() > 2 {
        return Err(Error::InvalidGrid(format!(
            "spatial dimension must be 1 or 2, got {}",
            cells.len()
        )));
    }
    if extents.len() != cells.len() {
        return Err(Error::InvalidGrid(format!(
            "{} cell counts but {} extents",
            cells.len(),
            extents.len()
        )));
    }
    if let Some(&n) = cells.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidGrid(format!("cell count {n} < 2")));
    }
    if let Some(&e) = extents.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidGrid(format!("extent {e} must be positive")));
    }
    if nt < 1 {
        return Err(Error::InvalidGrid("nt must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidGrid(format!("horizon {horizon} must be positive")));
    }

    let axis_weights: Vec<Vec<f64>> = cells
        .iter()
        .zip(extents)
        .map(|(&n, &len)| axis_quadrature(n, len / n as f64))
        .collect();
    let weights = match axis_weights.as_slice() {
        [wx] => wx.clone(),
        [wx, wy] => wy
            .iter()
            .flat_map(|&a| wx.iter().map(move |&b| a * b))
            .collect(),
        _ => unreachable!(),
    };

    Ok(Grid {
        cells: cells.to_vec(),
        extents: extents.to_vec(),
        nt,
        horizon,
        weights,
    })
}

/// Interior-node weights along one axis: `h` per node, with the boundary
/// half-cells lumped into the two end nodes. Exact for affine integrands.
fn axis_quadrature(cells: usize, h: f64) -> Vec<f64> {
    let n = cells - 1;
    let mut w = vec![h; n];
    w[0] += 0.5 * h;
    w[n - 1] += 0.5 * h;
    w
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt()
    }

    /// Interior node count per axis.
    pub fn interior_counts(&self) -> Vec<usize> {
        self.cells.iter().map(|&n| n - 1).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.cells.iter().map(|&n| n - 1).product()
    }

    /// Axis indices of a flat node index (x-fastest).
    pub fn node_indices(&self, node: usize) -> [usize; 2] {
        let nix = self.cells[0] - 1;
        [node % nix, node / nix]
    }

    /// Physical coordinates of an interior node; unused axes are zero.
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let idx = self.node_indices(node);
        let mut x = [0.0; 2];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim()) {
            *xa = (idx[a] + 1) as f64 * self.spacing(a);
        }
        x
    }

    /// Quadrature weight of every interior node; they sum to `|Ω|`.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }

    /// The grid with every cell count and the step count multiplied by `k`.
    pub fn refine(&self, space: usize, time: usize) -> Result<Grid> {
        let cells: Vec<usize> = self.cells.iter().map(|&n| n * space).collect();
        make_grid(&cells, &self.extents, self.nt * time, self.horizon)
    }

    pub fn spec(&self) -> GridSpec {
        self.clone().into()
    }
}

/// The bounded closed control set `B ⊂ ℝ^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ControlSetSpec", into = "ControlSetSpec")]
pub enum ControlSet {
    Box(Vec<[f64; 2]>),
    FinitePoints(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSetSpec {
    Box(Vec<[f64; 2]>),
    FinitePoints(Vec<Vec<f64>>),
}

impl TryFrom<ControlSetSpec> for ControlSet {
    type Error = Error;

    fn try_from(spec: ControlSetSpec) -> Result<Self> {
        match spec {
            ControlSetSpec::Box(b) => ControlSet::new_box(b),
            ControlSetSpec::FinitePoints(p) => ControlSet::new_points(p),
        }
    }
}

impl From<ControlSet> for ControlSetSpec {
    fn from(s: ControlSet) -> Self {
        match s {
            ControlSet::Box(b) => ControlSetSpec::Box(b),
            ControlSet::FinitePoints(p) => ControlSetSpec::FinitePoints(p),
        }
    }
}

impl ControlSet {
    pub fn new_box(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidControlSet("box has no components".into()));
        }
        for [lo, hi] in &bounds {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidControlSet(format!(
                    "bad interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(ControlSet::Box(bounds))
    }

    /// Scalar interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![[lo, hi]])
    }

    pub fn new_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidControlSet("empty point list".into()));
        };
        let m = first.len();
        if m == 0 {
            return Err(Error::InvalidControlSet("zero-dimensional points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != m || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidControlSet(format!("malformed point {i}")));
            }
            if points[..i].contains(p) {
                return Err(Error::InvalidControlSet(format!("duplicate point {p:?}")));
            }
        }
        Ok(ControlSet::FinitePoints(points))
    }

    /// Control dimension `m`.
    pub fn dim(&self) -> usize {
        match self {
            ControlSet::Box(b) => b.len(),
            ControlSet::FinitePoints(p) => p[0].len(),
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        if z.len() != self.dim() {
            return false;
        }
        match self {
            ControlSet::Box(b) => b.iter().zip(z).all(|([lo, hi], v)| lo <= v && v <= hi),
            ControlSet::FinitePoints(p) => p.iter().any(|q| q.as_slice() == z),
        }
    }

    /// Extreme points: box vertices in lexicographic order, or every point of
    /// a finite set in its given order.
    pub fn extreme_points(&self) -> Vec<Vec<f64>> {
        match self {
            ControlSet::Box(b) => {
                let levels: Vec<Vec<f64>> = b
                    .iter()
                    .map(|&[lo, hi]| if lo == hi { vec![lo] } else { vec![lo, hi] })
                    .collect();
                cartesian(&levels)
            }
            ControlSet::FinitePoints(p) => p.clone(),
        }
    }

    /// Deterministic sample points of `B` used for coarse supports and the
    /// `constants` dictionary strategy.
    pub fn sample_points(&self, count: usize) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(Error::InvalidDictionary("count must be at least 1".into()));
        }
        match self {
            ControlSet::FinitePoints(p) => {
                if count > p.len() {
                    return Err(Error::InvalidDictionary(format!(
                        "count {count} exceeds the {} points of B",
                        p.len()
                    )));
                }
                Ok(p[..count].to_vec())
            }
            ControlSet::Box(b) => {
                if count == 1 {
                    return Ok(vec![b.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()]);
                }
                let m = b.len() as u32;
                let mut q = 2usize;
                while q.pow(m) < count {
                    q += 1;
                }
                let levels: Vec<Vec<f64>> = b
                    .iter()
                    .map(|&[lo, hi]| {
                        let mut lv: Vec<f64> = (0..q)
                            .map(|j| lo + (hi - lo) * j as f64 / (q - 1) as f64)
                            .collect();
                        lv.dedup();
                        lv
                    })
                    .collect();
                let lattice = cartesian(&levels);
                if lattice.len() < count {
                    return Err(Error::InvalidDictionary(format!(
                        "count {count} exceeds the {} distinct lattice points of a degenerate box",
                        lattice.len()
                    )));
                }
                let vertices = self.extreme_points();
                let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(count);
                for p in vertices.iter().chain(lattice.iter()) {
                    if chosen.len() == count {
                        break;
                    }
                    if !chosen.contains(p) {
                        chosen.push(p.clone());
                    }
                }
                chosen.sort_by(|a, b| lex_cmp(a, b));
                Ok(chosen)
            }
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Cartesian product, first factor varying slowest.
fn cartesian(levels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for lv in levels {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                lv.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Nearest point of `B` in the Euclidean norm. Ties go to the lowest index.
pub fn project_to_b(point: &[f64], set: &ControlSet) -> Vec<f64> {
    match set {
        ControlSet::Box(b) => point
            .iter()
            .zip(b)
            .map(|(&v, &[lo, hi])| v.clamp(lo, hi))
            .collect(),
        ControlSet::FinitePoints(p) => {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, q) in p.iter().enumerate() {
                let d: f64 = q.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            p[best].clone()
        }
    }
}

/// A grid-sampled control field with values in `B` at every interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    dim: usize,
    values: Vec<f64>,
}

impl ControlField {
    /// Validates length and membership of every nodal value.
    pub fn new(values: Vec<f64>, grid: &Grid, set: &ControlSet) -> Result<Self> {
        let m = set.dim();
        let expected = grid.n_nodes() * m;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "control field values",
                expected,
                found: values.len(),
            });
        }
        for (node, z) in values.chunks(m).enumerate() {
            if !set.contains(z) {
                return Err(Error::Infeasible {
                    node,
                    value: z.to_vec(),
                });
            }
        }
        Ok(ControlField { dim: m, values })
    }

    /// The spatially constant field `u ≡ z`.
    pub fn constant(grid: &Grid, z: &[f64], set: &ControlSet) -> Result<Self> {
        let values = (0..grid.n_nodes()).flat_map(|_| z.iter().copied()).collect();
        Self::new(values, grid, set)
    }

    /// Builds a field by evaluating `f` at each interior node.
    pub fn from_fn(
        grid: &Grid,
        set: &ControlSet,
        mut f: impl FnMut([f64; 2]) -> Vec<f64>,
    ) -> Result<Self> {
        let values = (0..grid.n_nodes())
            .flat_map(|node| f(grid.node_coords(node)))
            .collect();
        Self::new(values, grid, set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionaryStrategy {
    /// Spatially constant atoms at lattice points of `B`.
    Constants,
    /// Random two-valued spatial patterns between extreme points of `B`.
    Bang,
    /// Atoms read from a JSON file.
    Custom { path: String },
}

/// Ordered, nonempty family of feasible control fields on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDictionary {
    grid: Grid,
    set: ControlSet,
    atoms: Vec<ControlField>,
}

impl ControlDictionary {
    pub fn new(grid: Grid, set: ControlSet, atoms: Vec<ControlField>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDictionary("dictionary is empty".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.n_nodes() != grid.n_nodes() || a.dim() != set.dim() {
                return Err(Error::InvalidDictionary(format!(
                    "atom {i} does not match the grid or the control dimension"
                )));
            }
            for node in 0..a.n_nodes() {
                if !set.contains(a.at(node)) {
                    return Err(Error::Infeasible {
                        node,
                        value: a.at(node).to_vec(),
                    });
                }
            }
        }
        Ok(ControlDictionary { grid, set, atoms })
    }

    /// Dictionary of spatially constant atoms, one per point.
    pub fn from_constants(grid: &Grid, set: &ControlSet, points: &[Vec<f64>]) -> Result<Self> {
        let atoms = points
            .iter()
            .map(|p| ControlField::constant(grid, p, set))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid.clone(), set.clone(), atoms)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn control_set(&self) -> &ControlSet {
        &self.set
    }

    pub fn atoms(&self) -> &[ControlField] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, l: usize) -> &ControlField {
        &self.atoms[l]
    }

    /// The same atoms over a different number of time steps.
    pub fn with_time_steps(&self, nt: usize) -> Result<Self> {
        let grid = make_grid(&self.grid.cells, &self.grid.extents, nt, self.grid.horizon)?;
        Ok(ControlDictionary {
            grid,
            set: self.set.clone(),
            atoms: self.atoms.clone(),
        })
    }

    /// Atoms as nested arrays (atom-major, node-minor, component-innermost).
    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.atoms.iter().map(|a| a.values().to_vec()).collect()
    }

    /// Reads the custom atoms format and repairs infeasible values by
    /// projection onto `B`.
    pub fn from_nested(grid: &Grid, set: &ControlSet, nested: Vec<Vec<f64>>) -> Result<Self> {
        let expected = grid.n_nodes() * set.dim();
        let mut atoms = Vec::with_capacity(nested.len());
        for (i, raw) in nested.into_iter().enumerate() {
            if raw.len() != expected {
                return Err(Error::InvalidDictionary(format!(
                    "atom {i} has {} values, expected {expected}",
                    raw.len()
                )));
            }
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDictionary(format!("atom {i} has non-finite values")));
            }
            let repaired: Vec<f64> = raw
                .chunks(set.dim())
                .flat_map(|z| project_to_b(z, set))
                .collect();
            atoms.push(ControlField::new(repaired, grid, set)?);
        }
        Self::new(grid.clone(), set.clone(), atoms)
    }
}

/// Builds a dictionary of `count` atoms. The result is a pure function of the
/// arguments; custom atoms come from `strategy`'s file.
pub fn build_dictionary(
    grid: &Grid,
    set: &ControlSet,
    strategy: &DictionaryStrategy,
    count: usize,
    seed: u64,
) -> Result<ControlDictionary> {
    if count == 0 {
        return Err(Error::InvalidDictionary("count must be at least 1".into()));
    }
    match strategy {
        DictionaryStrategy::Constants => {
            let points = set.sample_points(count)?;
            ControlDictionary::from_constants(grid, set, &points)
        }
        DictionaryStrategy::Bang => {
            let extremes = set.extreme_points();
            let m = set.dim();
            let mut atoms = Vec::with_capacity(count);
            for l in 0..count {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(l as u64);
                let (a, b) = if extremes.len() == 1 {
                    (0, 0)
                } else {
                    let a = rng.random_range(0..extremes.len());
                    let mut b = rng.random_range(0..extremes.len() - 1);
                    if b >= a {
                        b += 1;
                    }
                    (a, b)
                };
                let mut values = Vec::with_capacity(grid.n_nodes() * m);
                for _ in 0..grid.n_nodes() {
                    let pick = if rng.random_bool(0.5) { a } else { b };
                    values.extend_from_slice(&extremes[pick]);
                }
                atoms.push(ControlField::new(values, grid, set)?);
            }
            ControlDictionary::new(grid.clone(), set.clone(), atoms)
        }
        DictionaryStrategy::Custom { path } => {
            let mut dict = load_custom_atoms(Path::new(path), grid, set)?;
            if count > dict.len() {
                return Err(Error::InvalidDictionary(format!(
                    "count {count} exceeds the {} atoms in {path}",
                    dict.len()
                )));
            }
            dict.atoms.truncate(count);
            Ok(dict)
        }
    }
}

pub fn load_custom_atoms(path: &Path, grid: &Grid, set: &ControlSet) -> Result<ControlDictionary> {
    let text = std::fs::read_to_string(path)?;
    let nested: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidDictionary(format!("{}: {e}", path.display())))?;
    ControlDictionary::from_nested(grid, set, nested)
}
