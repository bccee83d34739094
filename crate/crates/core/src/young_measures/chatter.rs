//! Recovery of classical controls from relaxed ones by fast switching.
//!
//! Every coarse step (or space-time cell) is split into `k` slots. Atom
//! occupancy per slot count is fixed by largest-remainder rounding of
//! `k · weights` (ties to the lowest index), and the slots are ordered by a
//! smooth weighted round robin so that each atom is spread as evenly as
//! possible through the step.

use std::sync::Arc;

use ndarray::Array2;

use super::measures::{RelaxedControl, SpaceTimeYoungMeasure};
use crate::control_space::{ControlDictionary, ControlField, ControlSet, Grid};
use crate::error::{Error, Result};

/// Slot counts per atom summing to `k`.
pub fn allocate(weights: &[f64], k: usize) -> Vec<usize> {
    let kf = k as f64;
    let mut counts = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for &w in weights {
        let mut target = w * kf;
        let nearest = target.round();
        if (target - nearest).abs() < 1e-9 {
            target = nearest;
        }
        let c = target.floor();
        counts.push(c as usize);
        remainders.push(target - c);
    }
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]).then(a.cmp(&b)));
    for &i in order.iter().take(k.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Orders slot occupancy so each atom's slots are evenly spaced.
pub fn interleave(counts: &[usize]) -> Vec<usize> {
    let k: usize = counts.iter().sum();
    let mut credit = vec![0i64; counts.len()];
    let mut seq = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = 0;
        for (i, c) in credit.iter_mut().enumerate() {
            *c += counts[i] as i64;
        }
        for i in 1..credit.len() {
            if credit[i] > credit[best] {
                best = i;
            }
        }
        credit[best] -= k as i64;
        seq.push(best);
    }
    seq
}

/// Slot sequence for one probability row.
pub fn switching_sequence(weights: &[f64], k: usize) -> Vec<usize> {
    interleave(&allocate(weights, k))
}

/// A classical control on a time grid refined `k`-fold: one atom per sub-step.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatteredControl {
    pub grid: Grid,
    pub atoms: Vec<usize>,
}

impl ChatteredControl {
    /// The chattered control as a Dirac relaxed control on the refined grid.
    pub fn to_relaxed(&self, dictionary: &ControlDictionary) -> Result<RelaxedControl> {
        let fine = Arc::new(dictionary.with_time_steps(self.grid.nt())?);
        RelaxedControl::from_atoms(fine, &self.atoms)
    }
}

pub fn chatter_time(mu: &RelaxedControl, k: usize) -> Result<ChatteredControl> {
    if k == 0 {
        return Err(Error::OutOfRange {
            name: "k",
            value: 0.0,
            reason: "refinement must be at least 1",
        });
    }
    let grid = mu.grid().refine(1, k)?;
    let mut atoms = Vec::with_capacity(grid.nt());
    for row in mu.weights().rows() {
        atoms.extend(switching_sequence(row.as_slice().expect("standard layout"), k));
    }
    Ok(ChatteredControl { grid, atoms })
}

/// The relaxed control held piecewise constant on a `k`-fold refined time
/// grid, i.e. the reference against which chattered controls are compared.
pub fn refine_time(mu: &RelaxedControl, k: usize) -> Result<RelaxedControl> {
    let fine = Arc::new(mu.dictionary().with_time_steps(mu.grid().nt() * k)?);
    let w = mu.weights();
    let weights = Array2::from_shape_fn((w.nrows() * k, w.ncols()), |(s, l)| w[[s / k, l]]);
    RelaxedControl::new(fine, weights)
}

/// A classical control on a space-time grid refined `k`-fold in every
/// direction, stored as support indices per fine step and node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatteredField {
    pub grid: Grid,
    pub support: Vec<Vec<f64>>,
    pub index: Array2<usize>,
}

impl ChatteredField {
    pub fn field(&self, step: usize, set: &ControlSet) -> Result<ControlField> {
        let values = self
            .index
            .row(step)
            .iter()
            .flat_map(|&j| self.support[j].iter().copied())
            .collect();
        ControlField::new(values, &self.grid, set)
    }

    pub fn to_young(&self, set: &ControlSet) -> Result<SpaceTimeYoungMeasure> {
        SpaceTimeYoungMeasure::from_indices(
            self.grid.clone(),
            set.clone(),
            self.support.clone(),
            &self.index,
        )
    }
}

/// Coarse interior node and slot offset owning fine interior node `j`
/// along an axis with `cells` coarse cells.
fn coarse_owner(j: usize, k: usize, cells: usize) -> (usize, usize) {
    let pos = (j + 1) as f64 / k as f64;
    let i = (pos.round() as usize).clamp(1, cells - 1) - 1;
    (i, j % k)
}

pub fn chatter_spacetime(nu: &SpaceTimeYoungMeasure, k: usize) -> Result<ChatteredField> {
    if k == 0 {
        return Err(Error::OutOfRange {
            name: "k",
            value: 0.0,
            reason: "refinement must be at least 1",
        });
    }
    let coarse = nu.grid();
    let fine = coarse.refine(k, k)?;
    let w = nu.weights();
    let (nt, nodes, _) = w.dim();
    let mut seqs = Vec::with_capacity(nt * nodes);
    for t in 0..nt {
        for n in 0..nodes {
            let row: Vec<f64> = w.slice(ndarray::s![t, n, ..]).to_vec();
            seqs.push(switching_sequence(&row, k));
        }
    }
    let coarse_nix = coarse.cells()[0] - 1;
    let mut index = Array2::zeros((fine.nt(), fine.n_nodes()));
    for s_f in 0..fine.nt() {
        let (t, s) = (s_f / k, s_f % k);
        for node in 0..fine.n_nodes() {
            let idx = fine.node_indices(node);
            let (ix, ox) = coarse_owner(idx[0], k, coarse.cells()[0]);
            let (iy, oy) = if coarse.dim() == 2 {
                coarse_owner(idx[1], k, coarse.cells()[1])
            } else {
                (0, 0)
            };
            let cn = ix + coarse_nix * iy;
            let seq = &seqs[t * nodes + cn];
            index[[s_f, node]] = seq[(s + ox + oy) % k];
        }
    }
    Ok(ChatteredField {
        grid: fine,
        support: nu.support().to_vec(),
        index,
    })
}
