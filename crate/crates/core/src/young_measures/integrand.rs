//! Closed-form integrand registry.
//!
//! An [`Integrand`] is a sum of [`Term`]s, each a documented closed form in
//! `(t, x, y, z)`: monomials of degree at most four per variable group,
//! distances `|z - c|^p` to a point or to a nodal field, tracking terms
//! `w (y_c - target(x))^2`, and restrictions of any of these to a box
//! subdomain. The same type serves as a `Ψ`-integrand `h(t, x, z)` (no state
//! dependence), as a local running-cost density, as a component of the
//! semilinear field, and as a terminal cost `φ_T(x, y)`.

use serde::{Deserialize, Serialize};

use crate::control_space::{ControlSet, Grid};
use crate::error::{Error, Result};

const MAX_DEGREE: u32 = 4;

/// Evaluation point. `y` may be empty for state-independent use, in which
/// case every state variable reads as zero.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub t: f64,
    pub node: usize,
    pub x: [f64; 2],
    pub y: &'a [f64],
    pub z: &'a [f64],
}

/// Spatial profile used by tracking terms and initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    /// `amplitude * Π_a sin(π x_a / L_a)`.
    Sine { amplitude: f64, lengths: Vec<f64> },
    /// `amplitude * Π_a 4 x_a (L_a - x_a) / L_a^2`.
    Parabola { amplitude: f64, lengths: Vec<f64> },
}

impl Profile {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Sine { amplitude, lengths } => lengths
                .iter()
                .enumerate()
                .fold(*amplitude, |acc, (a, l)| {
                    acc * (std::f64::consts::PI * x[a] / l).sin()
                }),
            Profile::Parabola { amplitude, lengths } => lengths
                .iter()
                .enumerate()
                .fold(*amplitude, |acc, (a, l)| acc * 4.0 * x[a] * (l - x[a]) / (l * l)),
        }
    }

    /// Nodal samples on the interior nodes of `grid`.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.n_nodes())
            .map(|n| self.eval(grid.node_coords(n)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Term {
    Constant {
        value: f64,
    },
    /// `coef * t^t * Π x_a^{x[a]} * Π y_c^{y[c]} * Π z_c^{z[c]}`; missing
    /// exponents are zero.
    Monomial {
        coef: f64,
        #[serde(default)]
        t: u32,
        #[serde(default)]
        x: Vec<u32>,
        #[serde(default)]
        y: Vec<u32>,
        #[serde(default)]
        z: Vec<u32>,
    },
    /// `weight * |z - center|^p`.
    Distance {
        weight: f64,
        center: Vec<f64>,
        p: f64,
    },
    /// `weight * |z - u(x)|^p` for a nodal field `u` (node-major values).
    FieldDistance {
        weight: f64,
        field: Vec<f64>,
        p: f64,
    },
    /// `weight * (y_component - target(x))^2`.
    Tracking {
        weight: f64,
        #[serde(default)]
        component: usize,
        target: Profile,
    },
    /// The inner terms on the half-open box `lo <= x < hi`, zero elsewhere.
    Indicator {
        lo: Vec<f64>,
        hi: Vec<f64>,
        inner: Vec<Term>,
    },
}

fn powi(v: f64, e: u32) -> f64 {
    v.powi(e as i32)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

impl Term {
    fn eval(&self, s: &Sample) -> f64 {
        match self {
            Term::Constant { value } => *value,
            Term::Monomial { coef, t, x, y, z } => {
                let mut v = *coef * powi(s.t, *t);
                for (a, &e) in x.iter().enumerate() {
                    v *= powi(s.x[a], e);
                }
                for (c, &e) in y.iter().enumerate() {
                    v *= powi(s.y.get(c).copied().unwrap_or(0.0), e);
                }
                for (c, &e) in z.iter().enumerate() {
                    v *= powi(s.z[c], e);
                }
                v
            }
            Term::Distance { weight, center, p } => weight * euclid(s.z, center).powf(*p),
            Term::FieldDistance { weight, field, p } => {
                let m = s.z.len();
                let u = &field[s.node * m..(s.node + 1) * m];
                weight * euclid(s.z, u).powf(*p)
            }
            Term::Tracking {
                weight,
                component,
                target,
            } => {
                let d = s.y.get(*component).copied().unwrap_or(0.0) - target.eval(s.x);
                weight * d * d
            }
            Term::Indicator { lo, hi, inner } => {
                if in_box(s.x, lo, hi) {
                    inner.iter().map(|t| t.eval(s)).sum()
                } else {
                    0.0
                }
            }
        }
    }

    /// Accumulates `∂/∂y` into `out` (length = state dimension).
    fn add_dy(&self, s: &Sample, out: &mut [f64]) {
        match self {
            Term::Constant { .. } | Term::Distance { .. } | Term::FieldDistance { .. } => {}
            Term::Monomial { coef, t, x, y, z } => {
                if y.iter().all(|&e| e == 0) {
                    return;
                }
                let mut base = *coef * powi(s.t, *t);
                for (a, &e) in x.iter().enumerate() {
                    base *= powi(s.x[a], e);
                }
                for (c, &e) in z.iter().enumerate() {
                    base *= powi(s.z[c], e);
                }
                for (c, slot) in out.iter_mut().enumerate() {
                    let ec = y.get(c).copied().unwrap_or(0);
                    if ec == 0 {
                        continue;
                    }
                    let mut v = base * ec as f64 * powi(s.y[c], ec - 1);
                    for (c2, &e2) in y.iter().enumerate() {
                        if c2 != c {
                            v *= powi(s.y.get(c2).copied().unwrap_or(0.0), e2);
                        }
                    }
                    *slot += v;
                }
            }
            Term::Tracking {
                weight,
                component,
                target,
            } => {
                if let Some(slot) = out.get_mut(*component) {
                    *slot += 2.0 * weight * (s.y[*component] - target.eval(s.x));
                }
            }
            Term::Indicator { lo, hi, inner } => {
                if in_box(s.x, lo, hi) {
                    for t in inner {
                        t.add_dy(s, out);
                    }
                }
            }
        }
    }

    fn uses_time(&self) -> bool {
        match self {
            Term::Monomial { t, .. } => *t > 0,
            Term::Indicator { inner, .. } => inner.iter().any(Term::uses_time),
            _ => false,
        }
    }

    fn uses_state(&self) -> bool {
        match self {
            Term::Monomial { y, .. } => y.iter().any(|&e| e > 0),
            Term::Tracking { .. } => true,
            Term::Indicator { inner, .. } => inner.iter().any(Term::uses_state),
            _ => false,
        }
    }

    fn uses_control(&self) -> bool {
        match self {
            Term::Monomial { z, .. } => z.iter().any(|&e| e > 0),
            Term::Distance { .. } | Term::FieldDistance { .. } => true,
            Term::Indicator { inner, .. } => inner.iter().any(Term::uses_control),
            _ => false,
        }
    }

    fn validate(&self, dims: Dims) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidIntegrand(msg));
        match self {
            Term::Constant { .. } => Ok(()),
            Term::Monomial { coef, t, x, y, z } => {
                if !coef.is_finite() {
                    return bad("non-finite coefficient".into());
                }
                if x.len() > dims.space || y.len() > dims.state || z.len() > dims.control {
                    return bad("monomial exponent list longer than the variable".into());
                }
                let deg = |v: &[u32]| v.iter().sum::<u32>();
                if *t > MAX_DEGREE
                    || deg(x) > MAX_DEGREE
                    || deg(y) > MAX_DEGREE
                    || deg(z) > MAX_DEGREE
                {
                    return bad(format!("monomial degree exceeds {MAX_DEGREE}"));
                }
                Ok(())
            }
            Term::Distance { center, p, .. } => {
                if center.len() != dims.control {
                    return bad("distance center has the wrong dimension".into());
                }
                if !(*p > 0.0) {
                    return bad("distance exponent must be positive".into());
                }
                Ok(())
            }
            Term::FieldDistance { field, p, .. } => {
                if field.len() != dims.nodes * dims.control {
                    return bad("reference field has the wrong length".into());
                }
                if !(*p > 0.0) {
                    return bad("distance exponent must be positive".into());
                }
                Ok(())
            }
            Term::Tracking { component, .. } => {
                if *component >= dims.state {
                    return bad("tracking component out of range".into());
                }
                Ok(())
            }
            Term::Indicator { lo, hi, inner } => {
                if lo.len() != dims.space || hi.len() != dims.space {
                    return bad("indicator box has the wrong dimension".into());
                }
                inner.iter().try_for_each(|t| t.validate(dims))
            }
        }
    }
}

fn in_box(x: [f64; 2], lo: &[f64], hi: &[f64]) -> bool {
    lo.iter()
        .zip(hi)
        .enumerate()
        .all(|(a, (l, h))| *l <= x[a] && x[a] < *h)
}

#[derive(Debug, Clone, Copy)]
pub struct Dims {
    pub space: usize,
    pub nodes: usize,
    pub state: usize,
    pub control: usize,
}

/// Sum of registry terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Integrand {
    pub terms: Vec<Term>,
}

/// `h(t, x, z)` integrands fed to `Ψ`. The alias marks intent; any
/// state-free integrand qualifies.
pub type PsiIntegrand = Integrand;

impl Integrand {
    pub fn new(terms: Vec<Term>) -> Self {
        Integrand { terms }
    }

    pub fn zero() -> Self {
        Integrand::default()
    }

    pub fn constant(value: f64) -> Self {
        Integrand::new(vec![Term::Constant { value }])
    }

    /// `coef * z_0^power` for scalar controls.
    pub fn control_power(coef: f64, power: u32) -> Self {
        Integrand::new(vec![Term::Monomial {
            coef,
            t: 0,
            x: vec![],
            y: vec![],
            z: vec![power],
        }])
    }

    pub fn eval(&self, s: &Sample) -> f64 {
        self.terms.iter().map(|t| t.eval(s)).sum()
    }

    pub fn add_dy(&self, s: &Sample, out: &mut [f64]) {
        for t in &self.terms {
            t.add_dy(s, out);
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(Term::uses_time)
    }

    pub fn depends_on_state(&self) -> bool {
        self.terms.iter().any(Term::uses_state)
    }

    pub fn depends_on_control(&self) -> bool {
        self.terms.iter().any(Term::uses_control)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn validate(&self, dims: Dims) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.validate(dims))
    }

    /// Structural validation plus a finiteness probe on `I × Ω × B` at the
    /// sample points of `B`, with the state at zero.
    pub fn check_finite(&self, grid: &Grid, set: &ControlSet, state_dim: usize) -> Result<()> {
        self.validate(Dims {
            space: grid.dim(),
            nodes: grid.n_nodes(),
            state: state_dim,
            control: set.dim(),
        })?;
        let mut probes = set.extreme_points();
        if let ControlSet::Box(_) = set {
            probes.extend(set.sample_points(3usize.pow(set.dim() as u32).min(81))?);
        }
        let y = vec![0.0; state_dim];
        for t in [0.0, 0.5 * grid.horizon(), grid.horizon()] {
            for node in 0..grid.n_nodes() {
                for z in &probes {
                    let s = Sample {
                        t,
                        node,
                        x: grid.node_coords(node),
                        y: &y,
                        z,
                    };
                    if !self.eval(&s).is_finite() {
                        return Err(Error::InvalidIntegrand(format!(
                            "non-finite value at t={t}, node {node}, z={z:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Outer scalar functions `f_ij` of composite functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFn {
    Identity,
    Square,
    /// `exp(min(v, clip))`.
    ExpClip { clip: f64 },
    /// `a v + b`.
    Affine { a: f64, b: f64 },
}

impl ScalarFn {
    pub fn value(&self, v: f64) -> f64 {
        match *self {
            ScalarFn::Identity => v,
            ScalarFn::Square => v * v,
            ScalarFn::ExpClip { clip } => v.min(clip).exp(),
            ScalarFn::Affine { a, b } => a * v + b,
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        match *self {
            ScalarFn::Identity => 1.0,
            ScalarFn::Square => 2.0 * v,
            ScalarFn::ExpClip { clip } => {
                if v < clip {
                    v.exp()
                } else {
                    0.0
                }
            }
            ScalarFn::Affine { a, .. } => a,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, ScalarFn::Identity | ScalarFn::Affine { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub func: ScalarFn,
    pub integrand: Integrand,
}

/// `v = Σ_i Π_j f_ij(∫_Ω h_ij dx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompositeFunctional {
    pub terms: Vec<Vec<Factor>>,
}

impl CompositeFunctional {
    pub fn new(terms: Vec<Vec<Factor>>) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidIntegrand(
                "composite functional needs at least one term and one factor per term".into(),
            ));
        }
        Ok(CompositeFunctional { terms })
    }

    /// A single factor `f(∫ h)`.
    pub fn single(func: ScalarFn, integrand: Integrand) -> Self {
        CompositeFunctional {
            terms: vec![vec![Factor { func, integrand }]],
        }
    }

    pub fn factors(&self) -> impl Iterator<Item = &Factor> {
        self.terms.iter().flatten()
    }

    pub fn n_factors(&self) -> usize {
        self.terms.iter().map(Vec::len).sum()
    }

    /// Combines inner integral values (flattened factor order).
    pub fn combine(&self, inner: &[f64]) -> f64 {
        let mut k = 0;
        let mut total = 0.0;
        for term in &self.terms {
            let mut prod = 1.0;
            for f in term {
                prod *= f.func.value(inner[k]);
                k += 1;
            }
            total += prod;
        }
        total
    }

    /// Partial derivatives of [`combine`](Self::combine) with respect to each
    /// inner integral.
    pub fn combine_gradient(&self, inner: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; inner.len()];
        let mut offset = 0;
        for term in &self.terms {
            let vals: Vec<f64> = term
                .iter()
                .enumerate()
                .map(|(j, f)| f.func.value(inner[offset + j]))
                .collect();
            for (j, f) in term.iter().enumerate() {
                let others: f64 = vals
                    .iter()
                    .enumerate()
                    .filter(|&(j2, _)| j2 != j)
                    .map(|(_, v)| v)
                    .product();
                grad[offset + j] = others * f.func.derivative(inner[offset + j]);
            }
            offset += term.len();
        }
        grad
    }

    pub fn is_time_dependent(&self) -> bool {
        self.factors().any(|f| f.integrand.is_time_dependent())
    }

    pub fn validate(&self, dims: Dims) -> Result<()> {
        if self.terms.is_empty() || self.terms.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidIntegrand("empty composite term".into()));
        }
        self.factors().try_for_each(|f| f.integrand.validate(dims))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at<'a>(t: f64, x: f64, y: &'a [f64], z: &'a [f64]) -> Sample<'a> {
        Sample {
            t,
            node: 0,
            x: [x, 0.0],
            y,
            z,
        }
    }

    #[test]
    fn monomial_and_derivative() {
        // 3 t x y^2 z
        let h = Integrand::new(vec![Term::Monomial {
            coef: 3.0,
            t: 1,
            x: vec![1],
            y: vec![2],
            z: vec![1],
        }]);
        let s = at(2.0, 0.5, &[1.5], &[-1.0]);
        assert!((h.eval(&s) - 3.0 * 2.0 * 0.5 * 2.25 * -1.0).abs() < 1e-14);
        let mut g = [0.0];
        h.add_dy(&s, &mut g);
        assert!((g[0] - 3.0 * 2.0 * 0.5 * 2.0 * 1.5 * -1.0).abs() < 1e-14);
        assert!(h.is_time_dependent());
        assert!(h.depends_on_state());
    }

    #[test]
    fn state_derivative_matches_finite_difference() {
        let h = Integrand::new(vec![
            Term::Tracking {
                weight: 0.7,
                component: 0,
                target: Profile::Sine {
                    amplitude: 0.3,
                    lengths: vec![1.0],
                },
            },
            Term::Monomial {
                coef: -1.0,
                t: 0,
                x: vec![],
                y: vec![3],
                z: vec![1],
            },
            Term::Indicator {
                lo: vec![0.0],
                hi: vec![0.5],
                inner: vec![Term::Monomial {
                    coef: 2.0,
                    t: 0,
                    x: vec![],
                    y: vec![2],
                    z: vec![],
                }],
            },
        ]);
        for &(x, y, z) in &[(0.2, 0.4, 0.3), (0.7, -1.1, 0.9)] {
            let mut g = [0.0];
            h.add_dy(&at(0.0, x, &[y], &[z]), &mut g);
            let e = 1e-6;
            let fd = (h.eval(&at(0.0, x, &[y + e], &[z])) - h.eval(&at(0.0, x, &[y - e], &[z])))
                / (2.0 * e);
            assert!((g[0] - fd).abs() < 1e-8, "{} vs {}", g[0], fd);
        }
    }

    #[test]
    fn degree_limit_enforced() {
        let h = Integrand::control_power(1.0, 5);
        let dims = Dims {
            space: 1,
            nodes: 3,
            state: 1,
            control: 1,
        };
        assert!(h.validate(dims).is_err());
        assert!(Integrand::control_power(1.0, 4).validate(dims).is_ok());
    }

    #[test]
    fn composite_gradient_matches_finite_difference() {
        let c = CompositeFunctional::new(vec![
            vec![
                Factor {
                    func: ScalarFn::Square,
                    integrand: Integrand::zero(),
                },
                Factor {
                    func: ScalarFn::ExpClip { clip: 2.0 },
                    integrand: Integrand::zero(),
                },
            ],
            vec![Factor {
                func: ScalarFn::Affine { a: -0.5, b: 1.0 },
                integrand: Integrand::zero(),
            }],
        ])
        .unwrap();
        let inner = [0.3, -0.4, 1.2];
        let g = c.combine_gradient(&inner);
        for k in 0..3 {
            let e = 1e-6;
            let mut p = inner;
            let mut m = inner;
            p[k] += e;
            m[k] -= e;
            let fd = (c.combine(&p) - c.combine(&m)) / (2.0 * e);
            assert!((g[k] - fd).abs() < 1e-8);
        }
        assert!(CompositeFunctional::new(vec![]).is_err());
        assert!(CompositeFunctional::new(vec![vec![]]).is_err());
    }

    #[test]
    fn integrand_json_shape() {
        let h = Integrand::new(vec![Term::Distance {
            weight: 1.0,
            center: vec![0.0],
            p: 2.0,
        }]);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"[{"kind":"distance","weight":1.0,"center":[0.0],"p":2.0}]"#);
        let back: Integrand = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<Integrand>(r#"[{"kind":"constant","value":1,"x":2}]"#).is_err());
    }
}
