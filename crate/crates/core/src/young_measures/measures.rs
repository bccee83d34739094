use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::integrand::{CompositeFunctional, Integrand, Sample};
use crate::control_space::{ControlDictionary, ControlField, ControlSet, Grid, GridSpec};
use crate::error::{Error, Result};

/// Admissible drift of a probability row sum away from one.
pub const SIMPLEX_TOL: f64 = 1e-12;

fn check_row(row: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &v in row {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidWeights(format!("weight {v} is negative or non-finite")));
        }
        sum += v;
    }
    if !(sum > 0.0) {
        return Err(Error::InvalidWeights("row has zero mass".into()));
    }
    Ok(sum)
}

/// Validates a row that must already lie on the simplex (up to
/// [`SIMPLEX_TOL`]) and removes the residual drift.
fn settle_row(row: &mut [f64]) -> Result<()> {
    let sum = check_row(row)?;
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidWeights(format!(
            "row sums to {sum}, off the simplex by more than {SIMPLEX_TOL:e}"
        )));
    }
    if sum != 1.0 {
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(())
}

/// Explicit renormalization of a nonnegative row.
fn normalize_row(row: &mut [f64]) -> Result<()> {
    let sum = check_row(row)?;
    if sum != 1.0 {
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(())
}

fn check_rows_unchanged(rows: &[f64], width: usize) -> Result<()> {
    for row in rows.chunks(width) {
        let sum = check_row(row)?;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidWeights(format!("row sums to {sum}")));
        }
    }
    Ok(())
}

/// A probability vector over dictionary atoms: a finite mix of Dirac
/// functionals at control fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        settle_row(&mut weights)?;
        Ok(ProbabilityVector(weights))
    }

    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        normalize_row(&mut weights)?;
        Ok(ProbabilityVector(weights))
    }

    pub fn dirac(len: usize, index: usize) -> Self {
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        ProbabilityVector(w)
    }

    pub fn uniform(len: usize) -> Self {
        ProbabilityVector(vec![1.0 / len as f64; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-time-step probability weights over the atoms of a dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedControl {
    dictionary: Arc<ControlDictionary>,
    weights: Array2<f64>,
}

impl RelaxedControl {
    /// `weights` is `nt × L`; rows must be on the simplex up to
    /// [`SIMPLEX_TOL`] and are renormalized.
    pub fn new(dictionary: Arc<ControlDictionary>, mut weights: Array2<f64>) -> Result<Self> {
        let (nt, l) = weights.dim();
        Self::check_shape(&dictionary, nt, l)?;
        for mut row in weights.rows_mut() {
            settle_row(row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(RelaxedControl {
            dictionary,
            weights,
        })
    }

    /// Like [`new`](Self::new) but scales arbitrary nonnegative rows onto the
    /// simplex.
    pub fn normalized(dictionary: Arc<ControlDictionary>, mut weights: Array2<f64>) -> Result<Self> {
        let (nt, l) = weights.dim();
        Self::check_shape(&dictionary, nt, l)?;
        for mut row in weights.rows_mut() {
            normalize_row(row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(RelaxedControl {
            dictionary,
            weights,
        })
    }

    fn check_shape(dictionary: &ControlDictionary, nt: usize, l: usize) -> Result<()> {
        if nt != dictionary.grid().nt() {
            return Err(Error::DimensionMismatch {
                what: "relaxed control time steps",
                expected: dictionary.grid().nt(),
                found: nt,
            });
        }
        if l != dictionary.len() {
            return Err(Error::DimensionMismatch {
                what: "relaxed control atoms",
                expected: dictionary.len(),
                found: l,
            });
        }
        Ok(())
    }

    pub fn uniform(dictionary: Arc<ControlDictionary>) -> Self {
        let nt = dictionary.grid().nt();
        let l = dictionary.len();
        RelaxedControl {
            weights: Array2::from_elem((nt, l), 1.0 / l as f64),
            dictionary,
        }
    }

    /// The same row at every time step.
    pub fn stationary(dictionary: Arc<ControlDictionary>, row: &ProbabilityVector) -> Result<Self> {
        let nt = dictionary.grid().nt();
        let l = dictionary.len();
        if row.len() != l {
            return Err(Error::DimensionMismatch {
                what: "relaxed control atoms",
                expected: l,
                found: row.len(),
            });
        }
        let weights = Array2::from_shape_fn((nt, l), |(_, j)| row.as_slice()[j]);
        Ok(RelaxedControl {
            dictionary,
            weights,
        })
    }

    /// Classical control: atom `indices[k]` at step `k`.
    pub fn from_atoms(dictionary: Arc<ControlDictionary>, indices: &[usize]) -> Result<Self> {
        let nt = dictionary.grid().nt();
        let l = dictionary.len();
        if indices.len() != nt {
            return Err(Error::DimensionMismatch {
                what: "atom selections",
                expected: nt,
                found: indices.len(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= l) {
            return Err(Error::DimensionMismatch {
                what: "atom index",
                expected: l,
                found: bad,
            });
        }
        let mut weights = Array2::zeros((nt, l));
        for (k, &i) in indices.iter().enumerate() {
            weights[[k, i]] = 1.0;
        }
        Ok(RelaxedControl {
            dictionary,
            weights,
        })
    }

    pub fn dictionary(&self) -> &Arc<ControlDictionary> {
        &self.dictionary
    }

    pub fn grid(&self) -> &Grid {
        self.dictionary.grid()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, f64> {
        self.weights.row(k)
    }

    pub fn row_vector(&self, k: usize) -> ProbabilityVector {
        ProbabilityVector(self.weights.row(k).to_vec())
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.weights
    }

    pub fn to_file(&self) -> RelaxedControlFile {
        RelaxedControlFile {
            grid: self.grid().spec(),
            control_set: self.dictionary.control_set().clone(),
            atoms: self.dictionary.to_nested(),
            weights: self.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn from_file(file: RelaxedControlFile) -> Result<Self> {
        let grid = Grid::try_from(file.grid)?;
        let set = file.control_set;
        let mut atoms = Vec::with_capacity(file.atoms.len());
        for a in file.atoms {
            atoms.push(ControlField::new(a, &grid, &set)?);
        }
        let dictionary = Arc::new(ControlDictionary::new(grid, set, atoms)?);
        let nt = file.weights.len();
        let l = dictionary.len();
        if file.weights.iter().any(|r| r.len() != l) {
            return Err(Error::DimensionMismatch {
                what: "relaxed control atoms",
                expected: l,
                found: file.weights.iter().map(Vec::len).find(|&n| n != l).unwrap_or(0),
            });
        }
        let flat: Vec<f64> = file.weights.into_iter().flatten().collect();
        check_rows_unchanged(&flat, l)?;
        Self::check_shape(&dictionary, nt, l)?;
        let weights = Array2::from_shape_vec((nt, l), flat).expect("shape checked");
        Ok(RelaxedControl {
            dictionary,
            weights,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }
}

/// Serialized form of a [`RelaxedControl`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxedControlFile {
    pub grid: GridSpec,
    pub control_set: ControlSet,
    /// Atom-major, node-minor, component-innermost.
    pub atoms: Vec<Vec<f64>>,
    /// `nt` rows of `L` weights.
    pub weights: Vec<Vec<f64>>,
}

/// Probability weights over a fixed list of points of `B` for every interior
/// node of one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungSlice {
    grid: Grid,
    support: Vec<Vec<f64>>,
    weights: Array2<f64>,
}

impl YoungSlice {
    /// `weights` is `nodes × Z`; rows are validated and renormalized.
    pub fn new(grid: Grid, support: Vec<Vec<f64>>, mut weights: Array2<f64>) -> Result<Self> {
        let (nodes, z) = weights.dim();
        if nodes != grid.n_nodes() || z != support.len() {
            return Err(Error::DimensionMismatch {
                what: "Young slice weights",
                expected: grid.n_nodes() * support.len(),
                found: nodes * z,
            });
        }
        for mut row in weights.rows_mut() {
            settle_row(row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(YoungSlice {
            grid,
            support,
            weights,
        })
    }

    /// `ν_x = δ_{u(x)}`.
    pub fn dirac(grid: &Grid, u: &ControlField) -> Self {
        let mut support: Vec<Vec<f64>> = Vec::new();
        let mut idx = Vec::with_capacity(u.n_nodes());
        for node in 0..u.n_nodes() {
            idx.push(support_index(&mut support, u.at(node)));
        }
        let mut weights = Array2::zeros((u.n_nodes(), support.len()));
        for (node, &j) in idx.iter().enumerate() {
            weights[[node, j]] = 1.0;
        }
        YoungSlice {
            grid: grid.clone(),
            support,
            weights,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    /// Weight of the exact point `z` at `node` (zero when `z` is not in the
    /// support).
    pub fn weight_of(&self, node: usize, z: &[f64]) -> f64 {
        self.support
            .iter()
            .position(|p| p.as_slice() == z)
            .map_or(0.0, |j| self.weights[[node, j]])
    }
}

fn support_index(support: &mut Vec<Vec<f64>>, z: &[f64]) -> usize {
    match support.iter().position(|p| p.as_slice() == z) {
        Some(j) => j,
        None => {
            support.push(z.to_vec());
            support.len() - 1
        }
    }
}

/// Space-time Young measure: weights over `support ⊂ B` for every time step
/// and interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeYoungMeasure {
    grid: Grid,
    set: ControlSet,
    support: Vec<Vec<f64>>,
    weights: Array3<f64>,
}

impl SpaceTimeYoungMeasure {
    /// `weights` is `nt × nodes × Z`; every cell must be on the simplex up to
    /// [`SIMPLEX_TOL`].
    pub fn new(
        grid: Grid,
        set: ControlSet,
        support: Vec<Vec<f64>>,
        mut weights: Array3<f64>,
    ) -> Result<Self> {
        Self::check(&grid, &set, &support, weights.dim())?;
        let z = support.len();
        for row in weights
            .as_slice_mut()
            .expect("standard layout")
            .chunks_mut(z)
        {
            settle_row(row)?;
        }
        Ok(SpaceTimeYoungMeasure {
            grid,
            set,
            support,
            weights,
        })
    }

    fn check(
        grid: &Grid,
        set: &ControlSet,
        support: &[Vec<f64>],
        dim: (usize, usize, usize),
    ) -> Result<()> {
        if support.is_empty() {
            return Err(Error::InvalidWeights("empty support".into()));
        }
        for (j, z) in support.iter().enumerate() {
            if !set.contains(z) {
                return Err(Error::Infeasible {
                    node: j,
                    value: z.clone(),
                });
            }
        }
        let expected = (grid.nt(), grid.n_nodes(), support.len());
        if dim != expected {
            return Err(Error::DimensionMismatch {
                what: "space-time Young measure weights",
                expected: expected.0 * expected.1 * expected.2,
                found: dim.0 * dim.1 * dim.2,
            });
        }
        Ok(())
    }

    pub fn uniform(grid: Grid, set: ControlSet, support: Vec<Vec<f64>>) -> Result<Self> {
        let z = support.len();
        let weights = Array3::from_elem((grid.nt(), grid.n_nodes(), z.max(1)), 1.0 / z as f64);
        Self::new(grid, set, support, weights)
    }

    /// The same per-node distribution at every time step and node.
    pub fn homogeneous(
        grid: Grid,
        set: ControlSet,
        support: Vec<Vec<f64>>,
        row: &[f64],
    ) -> Result<Self> {
        let dims = (grid.nt(), grid.n_nodes(), support.len());
        if row.len() != support.len() {
            return Err(Error::DimensionMismatch {
                what: "support weights",
                expected: support.len(),
                found: row.len(),
            });
        }
        let weights = Array3::from_shape_fn(dims, |(_, _, j)| row[j]);
        Self::new(grid, set, support, weights)
    }

    /// Dirac at `support[index[k][node]]`.
    pub fn from_indices(
        grid: Grid,
        set: ControlSet,
        support: Vec<Vec<f64>>,
        index: &Array2<usize>,
    ) -> Result<Self> {
        let (nt, nodes) = index.dim();
        let mut weights = Array3::zeros((nt, nodes, support.len()));
        for ((k, n), &j) in index.indexed_iter() {
            if j >= support.len() {
                return Err(Error::DimensionMismatch {
                    what: "support index",
                    expected: support.len(),
                    found: j,
                });
            }
            weights[[k, n, j]] = 1.0;
        }
        Self::new(grid, set, support, weights)
    }

    /// Stacks one slice per time step; all slices must share the support.
    pub fn from_slices(set: ControlSet, slices: &[YoungSlice]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidWeights("no slices".into()))?;
        let grid = first.grid.clone();
        let support = first.support.clone();
        let (nodes, z) = first.weights.dim();
        let mut weights = Array3::zeros((slices.len(), nodes, z));
        for (k, s) in slices.iter().enumerate() {
            if s.support != support {
                return Err(Error::InvalidWeights("slices have different supports".into()));
            }
            weights
                .index_axis_mut(ndarray::Axis(0), k)
                .assign(&s.weights);
        }
        Self::new(grid, set, support, weights)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn control_set(&self) -> &ControlSet {
        &self.set
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn weights(&self) -> ndarray::ArrayView3<'_, f64> {
        self.weights.view()
    }

    pub fn into_weights(self) -> Array3<f64> {
        self.weights
    }

    pub fn slice(&self, k: usize) -> YoungSlice {
        YoungSlice {
            grid: self.grid.clone(),
            support: self.support.clone(),
            weights: self.weights.index_axis(ndarray::Axis(0), k).to_owned(),
        }
    }

    pub fn to_file(&self) -> YoungMeasureFile {
        YoungMeasureFile {
            grid: self.grid.spec(),
            control_set: self.set.clone(),
            support: self.support.clone(),
            weights: self
                .weights
                .outer_iter()
                .map(|s| s.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
        }
    }

    pub fn from_file(file: YoungMeasureFile) -> Result<Self> {
        let grid = Grid::try_from(file.grid)?;
        let nt = file.weights.len();
        let nodes = file.weights.first().map_or(0, Vec::len);
        let z = file.support.len();
        let flat: Vec<f64> = file.weights.into_iter().flatten().flatten().collect();
        if flat.len() != nt * nodes * z {
            return Err(Error::DimensionMismatch {
                what: "space-time Young measure weights",
                expected: nt * nodes * z,
                found: flat.len(),
            });
        }
        Self::check(&grid, &file.control_set, &file.support, (nt, nodes, z))?;
        check_rows_unchanged(&flat, z)?;
        let weights = Array3::from_shape_vec((nt, nodes, z), flat).expect("shape checked");
        Ok(SpaceTimeYoungMeasure {
            grid,
            set: file.control_set,
            support: file.support,
            weights,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }
}

/// Serialized form of a [`SpaceTimeYoungMeasure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungMeasureFile {
    pub grid: GridSpec,
    pub control_set: ControlSet,
    pub support: Vec<Vec<f64>>,
    /// `[time][node][support point]`.
    pub weights: Vec<Vec<Vec<f64>>>,
}

/// `Ψh(u) = ∫_Ω h(t, x, u(x)) dx` by the nodal rule of `grid`.
pub fn psi_eval(h: &Integrand, u: &ControlField, grid: &Grid, t: f64) -> f64 {
    grid.quadrature_weights()
        .iter()
        .enumerate()
        .map(|(node, w)| {
            w * h.eval(&Sample {
                t,
                node,
                x: grid.node_coords(node),
                y: &[],
                z: u.at(node),
            })
        })
        .sum()
}

/// Functionals on control fields that extend to mixes of atoms by averaging.
pub trait TestFunctional {
    fn value(&self, u: &ControlField, grid: &Grid, t: f64) -> f64;
}

impl TestFunctional for Integrand {
    fn value(&self, u: &ControlField, grid: &Grid, t: f64) -> f64 {
        psi_eval(self, u, grid, t)
    }
}

impl TestFunctional for CompositeFunctional {
    fn value(&self, u: &ControlField, grid: &Grid, t: f64) -> f64 {
        let inner: Vec<f64> = self
            .factors()
            .map(|f| psi_eval(&f.integrand, u, grid, t))
            .collect();
        self.combine(&inner)
    }
}

/// `Σ_l μ_l v(u_l)`.
pub fn relaxed_eval<V: TestFunctional + ?Sized>(
    v: &V,
    mu: &ProbabilityVector,
    dictionary: &ControlDictionary,
    t: f64,
) -> Result<f64> {
    if mu.len() != dictionary.len() {
        return Err(Error::DimensionMismatch {
            what: "measure row",
            expected: dictionary.len(),
            found: mu.len(),
        });
    }
    Ok(mu
        .as_slice()
        .iter()
        .zip(dictionary.atoms())
        .filter(|(&w, _)| w != 0.0)
        .map(|(&w, u)| w * v.value(u, dictionary.grid(), t))
        .sum())
}

/// `∫_Ω Σ_z ν_x(z) h(t, x, z) dx`.
pub fn young_eval(h: &Integrand, nu: &YoungSlice, t: f64) -> f64 {
    let grid = &nu.grid;
    grid.quadrature_weights()
        .iter()
        .enumerate()
        .map(|(node, w)| {
            let x = grid.node_coords(node);
            let inner: f64 = nu
                .weights
                .row(node)
                .iter()
                .zip(&nu.support)
                .filter(|(&p, _)| p != 0.0)
                .map(|(&p, z)| {
                    p * h.eval(&Sample {
                        t,
                        node,
                        x,
                        y: &[],
                        z,
                    })
                })
                .sum();
            w * inner
        })
        .sum()
}

/// Pushes a mix of atoms forward to the Young measure `ν_x = Σ_l μ_l δ_{u_l(x)}`.
/// Atoms with identical nodal values are merged by exact equality; the
/// support lists distinct values in order of first appearance.
pub fn barycenter(mu: &ProbabilityVector, dictionary: &ControlDictionary) -> Result<YoungSlice> {
    if mu.len() != dictionary.len() {
        return Err(Error::DimensionMismatch {
            what: "measure row",
            expected: dictionary.len(),
            found: mu.len(),
        });
    }
    let grid = dictionary.grid();
    let mut support: Vec<Vec<f64>> = Vec::new();
    let mut index = vec![vec![0usize; grid.n_nodes()]; dictionary.len()];
    for (l, atom) in dictionary.atoms().iter().enumerate() {
        for (node, slot) in index[l].iter_mut().enumerate() {
            *slot = support_index(&mut support, atom.at(node));
        }
    }
    let mut weights = Array2::zeros((grid.n_nodes(), support.len()));
    for (l, &w) in mu.as_slice().iter().enumerate() {
        for (node, &j) in index[l].iter().enumerate() {
            weights[[node, j]] += w;
        }
    }
    Ok(YoungSlice {
        grid: grid.clone(),
        support,
        weights,
    })
}

/// Piecewise homogeneous two-atomic Young measure: `½δ_{u₁} + ½δ_{u₂}` on
/// the region `A` and `¼δ_{u₁} + ¾δ_{u₂}` on its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoAtomicSlice {
    pub grid: Grid,
    pub set: ControlSet,
    pub u1: ControlField,
    pub u2: ControlField,
    /// Node membership in `A`.
    pub region: Vec<bool>,
}

impl TwoAtomicSlice {
    pub fn new(
        grid: Grid,
        set: ControlSet,
        u1: ControlField,
        u2: ControlField,
        region: Vec<bool>,
    ) -> Result<Self> {
        if region.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "region mask",
                expected: grid.n_nodes(),
                found: region.len(),
            });
        }
        if u1.n_nodes() != grid.n_nodes() || u2.n_nodes() != grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "two-atomic fields",
                expected: grid.n_nodes(),
                found: u1.n_nodes().min(u2.n_nodes()),
            });
        }
        Ok(TwoAtomicSlice {
            grid,
            set,
            u1,
            u2,
            region,
        })
    }

    /// Region mask of the half-open box `lo <= x < hi`.
    pub fn box_region(grid: &Grid, lo: &[f64], hi: &[f64]) -> Vec<bool> {
        (0..grid.n_nodes())
            .map(|n| {
                let x = grid.node_coords(n);
                (0..grid.dim()).all(|a| lo[a] <= x[a] && x[a] < hi[a])
            })
            .collect()
    }

    /// The Young measure itself, with coincident values merged.
    pub fn young_slice(&self) -> YoungSlice {
        let mut support: Vec<Vec<f64>> = Vec::new();
        let mut entries = Vec::with_capacity(self.grid.n_nodes());
        for node in 0..self.grid.n_nodes() {
            let j1 = support_index(&mut support, self.u1.at(node));
            let j2 = support_index(&mut support, self.u2.at(node));
            let (w1, w2) = if self.region[node] { (0.5, 0.5) } else { (0.25, 0.75) };
            entries.push((j1, w1, j2, w2));
        }
        let mut weights = Array2::zeros((self.grid.n_nodes(), support.len()));
        for (node, (j1, w1, j2, w2)) in entries.into_iter().enumerate() {
            weights[[node, j1]] += w1;
            weights[[node, j2]] += w2;
        }
        YoungSlice {
            grid: self.grid.clone(),
            support,
            weights,
        }
    }
}

/// The one-parameter family of four-atomic representations of a
/// [`TwoAtomicSlice`]: atoms `(u₁₁, u₁₂, u₂₁, u₂₂)` with `u₁₁ = u₁`,
/// `u₂₂ = u₂`, `u₁₂ = u₁` on `A` and `u₂` off `A`, `u₂₁` the reverse,
/// weighted `(a, ½ − a, ¼ − a, ¼ + a)` for `0 ≤ a ≤ ¼`. Zero-weight atoms
/// stay in place.
pub fn choquet_represent(
    nu: &TwoAtomicSlice,
    a: f64,
) -> Result<(ControlDictionary, ProbabilityVector)> {
    if !(0.0..=0.25).contains(&a) {
        return Err(Error::OutOfRange {
            name: "a",
            value: a,
            reason: "must lie in [0, 1/4]",
        });
    }
    let m = nu.u1.dim();
    let switch = |inside: &ControlField, outside: &ControlField| -> Vec<f64> {
        (0..nu.grid.n_nodes())
            .flat_map(|node| {
                if nu.region[node] {
                    inside.at(node)[..m].to_vec()
                } else {
                    outside.at(node)[..m].to_vec()
                }
            })
            .collect()
    };
    let u12 = ControlField::new(switch(&nu.u1, &nu.u2), &nu.grid, &nu.set)?;
    let u21 = ControlField::new(switch(&nu.u2, &nu.u1), &nu.grid, &nu.set)?;
    let dictionary = ControlDictionary::new(
        nu.grid.clone(),
        nu.set.clone(),
        vec![nu.u1.clone(), u12, u21, nu.u2.clone()],
    )?;
    let weights = ProbabilityVector::new(vec![a, 0.5 - a, 0.25 - a, 0.25 + a])?;
    Ok((dictionary, weights))
}
