//! Built-in problems.
//!
//! Every preset lives on `Ω = (0, 1)^d` with `B = [−1, 1]`, zero Dirichlet
//! data and a constants dictionary `{−1, 0, 1}` by default. Parameters are
//! optional overrides with documented ranges.

use serde::{Deserialize, Serialize};

use crate::control_space::{make_grid, ControlSet, Grid};
use crate::error::{Error, Result};
use crate::optimizer::StepRule;
use crate::pde::{DerivativeSource, Diffusion, ParabolicProblem, ProblemData, RunningCost};
use crate::young_measures::{CompositeFunctional, Factor, Integrand, Profile, ScalarFn, Term};

/// Structural facts about a preset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// `⟨f(t, r₁, s) − f(t, r₂, s), r₁ − r₂⟩ ≤ a₁ |r₁ − r₂|²` with this `a₁`.
    pub semi_monotone: Option<f64>,
    /// `f`, `φ` and `φ_T` are continuously differentiable in the state.
    pub differentiable: bool,
    pub autonomous: bool,
    /// `{(f(z), φ(z) + r) : z ∈ B, r ≥ 0}` is convex at every `(t, x, y)`;
    /// `None` for nonlocal costs.
    pub orientor_convex: Option<bool>,
    pub cost_quadratic_in_control_average: bool,
    pub default_cells: usize,
    pub default_nt: usize,
}

/// Optional overrides. Each preset accepts a subset; passing any other
/// field is an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    /// Control penalty weight, `[0, 10]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Tracking target amplitude, `[−1, 1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Scalar diffusion coefficient, `(0, 100]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    /// Terminal tracking weight, `[0, 100]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_weight: Option<f64>,
    /// Bias added to `∂f/∂y` by the broken-derivative fixture, `[−10, 10]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
}

const PRESETS: [PresetInfo; 6] = [
    PresetInfo {
        name: "lq",
        description: "f = z, φ = ½(y − y_d)² + ½β z², φ_T = ½γ(y − y_d)², y_d = target·sin(πx)",
        semi_monotone: Some(0.0),
        differentiable: true,
        autonomous: true,
        orientor_convex: Some(true),
        cost_quadratic_in_control_average: true,
        default_cells: 16,
        default_nt: 20,
    },
    PresetInfo {
        name: "chatter",
        description: "f = z, φ = y² + (z² − 1)²; the relaxed optimum ½δ₋₁ + ½δ₁ has cost 0",
        semi_monotone: Some(0.0),
        differentiable: true,
        autonomous: true,
        orientor_convex: Some(false),
        cost_quadratic_in_control_average: true,
        default_cells: 16,
        default_nt: 40,
    },
    PresetInfo {
        name: "composite",
        description: "f = z, φ = (∫(y − y_d))² · exp(½∫z) + β ∫z² (product of integral functionals)",
        semi_monotone: Some(0.0),
        differentiable: true,
        autonomous: true,
        orientor_convex: None,
        cost_quadratic_in_control_average: false,
        default_cells: 16,
        default_nt: 20,
    },
    PresetInfo {
        name: "convex",
        description: "f = z, φ = y²; every control with zero mean is optimal",
        semi_monotone: Some(0.0),
        differentiable: true,
        autonomous: true,
        orientor_convex: Some(true),
        cost_quadratic_in_control_average: true,
        default_cells: 16,
        default_nt: 20,
    },
    PresetInfo {
        name: "nonautonomous",
        description: "f = z + ½t, φ = ½y² − t·y + ½β z²",
        semi_monotone: Some(0.0),
        differentiable: true,
        autonomous: false,
        orientor_convex: Some(true),
        cost_quadratic_in_control_average: true,
        default_cells: 16,
        default_nt: 20,
    },
    PresetInfo {
        name: "broken",
        description: "lq with a deliberately biased ∂f/∂y (gradient-check negative control)",
        semi_monotone: Some(0.0),
        differentiable: true,
        autonomous: true,
        orientor_convex: Some(true),
        cost_quadratic_in_control_average: true,
        default_cells: 16,
        default_nt: 20,
    },
];

pub fn list_presets() -> &'static [PresetInfo] {
    &PRESETS
}

pub fn preset_info(name: &str) -> Result<&'static PresetInfo> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Default grid of a preset on the unit interval with `T = 1`.
pub fn default_grid(name: &str) -> Result<Grid> {
    let info = preset_info(name)?;
    make_grid(&[info.default_cells], &[1.0], info.default_nt, 1.0)
}

/// Step rule suited to the preset's cost structure.
pub fn default_step_rule(name: &str) -> Result<StepRule> {
    Ok(if preset_info(name)?.cost_quadratic_in_control_average {
        StepRule::Exact
    } else {
        StepRule::Armijo {
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 40,
        }
    })
}

pub fn control_set() -> ControlSet {
    ControlSet::interval(-1.0, 1.0).expect("valid interval")
}

/// Default dictionary points.
pub fn default_points() -> Vec<Vec<f64>> {
    vec![vec![-1.0], vec![0.0], vec![1.0]]
}

fn mono(coef: f64, t: u32, y: u32, z: u32) -> Term {
    Term::Monomial {
        coef,
        t,
        x: vec![],
        y: if y > 0 { vec![y] } else { vec![] },
        z: if z > 0 { vec![z] } else { vec![] },
    }
}

fn check(name: &'static str, value: Option<f64>, default: f64, lo: f64, hi: f64, open_lo: bool) -> Result<f64> {
    let v = value.unwrap_or(default);
    let ok = v.is_finite() && v <= hi && if open_lo { v > lo } else { v >= lo };
    if !ok {
        return Err(Error::OutOfRange {
            name,
            value: v,
            reason: "outside the documented preset range",
        });
    }
    Ok(v)
}

fn sine(grid: &Grid, amplitude: f64) -> Profile {
    Profile::Sine {
        amplitude,
        lengths: grid.extents().to_vec(),
    }
}

/// Fills the defaults of every parameter `name` takes and range-checks all
/// of them. Parameters the preset does not take are rejected.
pub fn resolve_params(name: &str, params: &PresetParams) -> Result<PresetParams> {
    preset_info(name)?;
    let accepts: &[&str] = match name {
        "lq" => &["beta", "target", "diffusion", "terminal_weight"],
        "broken" => &["beta", "target", "diffusion", "terminal_weight", "bias"],
        "chatter" | "convex" => &["diffusion"],
        "composite" => &["beta", "target", "diffusion"],
        "nonautonomous" => &["beta", "diffusion"],
        _ => unreachable!("checked by preset_info"),
    };
    let given = [
        ("beta", params.beta.is_some()),
        ("target", params.target.is_some()),
        ("diffusion", params.diffusion.is_some()),
        ("terminal_weight", params.terminal_weight.is_some()),
        ("bias", params.bias.is_some()),
    ];
    for (field, present) in given {
        if present && !accepts.contains(&field) {
            return Err(Error::Config {
                path: format!("params.{field}"),
                message: format!("preset `{name}` does not take `{field}`"),
            });
        }
    }
    let takes = |f: &str| accepts.contains(&f);
    let beta_default = match name {
        "lq" | "broken" => 0.01,
        "composite" => 0.05,
        _ => 0.1,
    };
    Ok(PresetParams {
        beta: takes("beta")
            .then(|| check("beta", params.beta, beta_default, 0.0, 10.0, false))
            .transpose()?,
        target: takes("target")
            .then(|| check("target", params.target, 0.2, -1.0, 1.0, false))
            .transpose()?,
        diffusion: Some(check("diffusion", params.diffusion, 1.0, 0.0, 100.0, true)?),
        terminal_weight: takes("terminal_weight")
            .then(|| check("terminal_weight", params.terminal_weight, 0.0, 0.0, 100.0, false))
            .transpose()?,
        bias: takes("bias")
            .then(|| check("bias", params.bias, 0.5, -10.0, 10.0, false))
            .transpose()?,
    })
}

/// Builds preset `name` on `grid`.
pub fn build_preset(name: &str, grid: &Grid, params: &PresetParams) -> Result<ParabolicProblem> {
    let params = resolve_params(name, params)?;
    let a = params.diffusion.unwrap_or(1.0);
    let beta = params.beta.unwrap_or(0.0);
    let amp = params.target.unwrap_or(0.0);
    let zero_state = vec![0.0; grid.n_nodes()];
    let z = Integrand::control_power(1.0, 1);
    let mut derivatives = DerivativeSource::Analytic;
    let tracking = |weight: f64, amp: f64| Term::Tracking {
        weight,
        component: 0,
        target: sine(grid, amp),
    };
    let (field, running, terminal) = match name {
        "lq" | "broken" => {
            let gamma = params.terminal_weight.unwrap_or(0.0);
            if let Some(bias) = params.bias {
                derivatives = DerivativeSource::Perturbed { bias };
            }
            let running = Integrand::new(vec![tracking(0.5, amp), mono(0.5 * beta, 0, 0, 2)]);
            let terminal = if gamma > 0.0 {
                Integrand::new(vec![tracking(0.5 * gamma, amp)])
            } else {
                Integrand::zero()
            };
            (z, RunningCost::Local(running), terminal)
        }
        "chatter" => {
            let running = Integrand::new(vec![
                mono(1.0, 0, 2, 0),
                mono(1.0, 0, 0, 4),
                mono(-2.0, 0, 0, 2),
                Term::Constant { value: 1.0 },
            ]);
            (z, RunningCost::Local(running), Integrand::zero())
        }
        "composite" => {
            // ∫(y − y_d) with the target folded into a constant via the same quadrature
            let yd = sine(grid, amp).sample(grid);
            let mean_yd = grid
                .quadrature_weights()
                .iter()
                .zip(&yd)
                .map(|(w, v)| w * v)
                .sum::<f64>()
                / grid.measure();
            let deviation = vec![mono(1.0, 0, 1, 0), Term::Constant { value: -mean_yd }];
            let v = CompositeFunctional::new(vec![
                vec![
                    Factor {
                        func: ScalarFn::Square,
                        integrand: Integrand::new(deviation),
                    },
                    Factor {
                        func: ScalarFn::ExpClip { clip: 5.0 },
                        integrand: Integrand::control_power(0.5, 1),
                    },
                ],
                vec![Factor {
                    func: ScalarFn::Affine { a: beta, b: 0.0 },
                    integrand: Integrand::control_power(1.0, 2),
                }],
            ])?;
            (z, RunningCost::Composite(v), Integrand::zero())
        }
        "convex" => {
            (z, RunningCost::Local(Integrand::new(vec![mono(1.0, 0, 2, 0)])), Integrand::zero())
        }
        "nonautonomous" => {
            let field = Integrand::new(vec![mono(1.0, 0, 0, 1), mono(0.5, 1, 0, 0)]);
            let running = Integrand::new(vec![mono(0.5, 0, 2, 0), mono(-1.0, 1, 1, 0), mono(0.5 * beta, 0, 0, 2)]);
            (field, RunningCost::Local(running), Integrand::zero())
        }
        _ => unreachable!("checked by preset_info"),
    };
    ParabolicProblem::new(ProblemData {
        grid: grid.clone(),
        state_dim: 1,
        diffusion: vec![Diffusion::scalar(a)],
        field: vec![field],
        running,
        terminal,
        initial: zero_state,
        control_set: control_set(),
        derivatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_the_required_presets() {
        let names: Vec<&str> = list_presets().iter().map(|p| p.name).collect();
        for n in ["lq", "chatter", "composite"] {
            assert!(names.contains(&n));
        }
        assert!(matches!(preset_info("lqq"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn every_preset_builds_in_one_and_two_dimensions() {
        for p in list_presets() {
            let g1 = default_grid(p.name).unwrap();
            let g2 = make_grid(&[4, 5], &[1.0, 2.0], 3, 0.5).unwrap();
            for g in [g1, g2] {
                let prob = build_preset(p.name, &g, &PresetParams::default()).unwrap();
                assert_eq!(prob.is_autonomous(), p.autonomous, "{}", p.name);
            }
        }
    }

    #[test]
    fn parameters_are_checked_per_preset() {
        let beta = PresetParams { beta: Some(0.5), ..Default::default() };
        assert!(resolve_params("lq", &beta).is_ok());
        assert!(matches!(resolve_params("chatter", &beta), Err(Error::Config { .. })));
        let bad = PresetParams { diffusion: Some(0.0), ..Default::default() };
        assert!(matches!(resolve_params("convex", &bad), Err(Error::OutOfRange { name: "diffusion", .. })));
        let bad = PresetParams { target: Some(2.0), ..Default::default() };
        assert!(resolve_params("lq", &bad).is_err());
        let r = resolve_params("lq", &PresetParams::default()).unwrap();
        assert_eq!((r.beta, r.target, r.bias), (Some(0.01), Some(0.2), None));
        assert!(serde_json::from_str::<PresetParams>(r#"{"betta": 1}"#).is_err());
    }

    #[test]
    fn broken_preset_biases_the_state_derivative() {
        let g = default_grid("broken").unwrap();
        let p = build_preset("broken", &g, &PresetParams::default()).unwrap();
        assert_eq!(p.derivatives(), DerivativeSource::Perturbed { bias: 0.5 });
        let q = build_preset("lq", &g, &PresetParams::default()).unwrap();
        assert_eq!(q.derivatives(), DerivativeSource::Analytic);
    }

    #[test]
    fn composite_deviation_vanishes_on_the_target() {
        let g = default_grid("composite").unwrap();
        let p = build_preset("composite", &g, &PresetParams::default()).unwrap();
        let RunningCost::Composite(v) = p.running() else { panic!("composite cost expected") };
        let yd = sine(&g, 0.2).sample(&g);
        let w = g.quadrature_weights();
        let inner: f64 = (0..g.n_nodes())
            .map(|n| {
                w[n] * v.terms[0][0].integrand.eval(&crate::young_measures::Sample {
                    t: 0.0,
                    node: n,
                    x: g.node_coords(n),
                    y: &yd[n..n + 1],
                    z: &[0.0],
                })
            })
            .sum();
        assert!(inner.abs() < 1e-15);
    }

    #[test]
    fn default_step_rules_follow_the_cost_structure() {
        assert_eq!(default_step_rule("lq").unwrap(), StepRule::Exact);
        assert!(matches!(default_step_rule("composite").unwrap(), StepRule::Armijo { .. }));
    }
}
