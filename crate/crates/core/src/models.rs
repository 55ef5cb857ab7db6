//! Reference networks: the mutual-inhibition toy, the two worked systems
//! with their published parameter values, canonical negative loops, and a
//! few small degenerate networks used in tests.

use crate::model::{Network, NetworkBuilder, Sign};

const PLUS: Sign = Sign::Plus;
const MINUS: Sign = Sign::Minus;

/// Two genes repressing each other, with basal production and structural
/// constraints `κ⁰/γ < θ < (κ⁰+κ¹)/γ`.
pub fn toggle_switch() -> Network {
    NetworkBuilder::new()
        .variable("x1", [0.0, 0.5, 1.5])
        .variable("x2", [0.0, 0.5, 1.5])
        .production("x1", 0.1, &[])
        .production("x1", 0.9, &[("x2", 1, MINUS)])
        .production("x2", 0.1, &[])
        .production("x2", 0.9, &[("x1", 1, MINUS)])
        .decay0("x1", 1.0, &[])
        .decay0("x2", 1.2, &[])
        .build()
        .expect("toggle switch is well formed")
}

/// Mixed feedback loop whose uncontrolled graph is a single 6-cycle.
/// `K1 = 0.9, K2 = 0.2, γ1⁰ = γ1¹ = 1, γ2⁰ = 0.3, θ1 = (0.5, 0.75), θ2 = 0.5`, `U = 1`.
pub fn example1() -> Network {
    example1_builder().build().expect("example 1 is well formed")
}

fn example1_builder() -> NetworkBuilder {
    NetworkBuilder::new()
        .variable("x1", [0.0, 0.5, 0.75, 1.0])
        .variable("x2", [0.0, 0.5, 1.0])
        .production("x1", 0.9, &[("x2", 1, MINUS)])
        .production("x2", 0.2, &[("x1", 1, PLUS), ("x2", 1, PLUS)])
        .production("x2", 0.2, &[("x1", 2, PLUS), ("x2", 1, MINUS)])
        .decay0("x1", 1.0, &[])
        .decay1("x1", 1.0, &[])
        .decay0("x2", 0.3, &[])
        .input_bound(1.0)
}

/// Example 1 with a dynamic controller `y` replacing the input:
/// `γ1 = γ1⁰ + γ1¹ υ s⁺(y, θy)` and `dy/dt = s⁺(x1, θ1¹) s⁻(x2) − γy y`,
/// with `y ∈ [0, 1/γy]`. The result has no external input.
pub fn example1_with_controller(upsilon: f64, theta_y: f64, gamma_y: f64) -> Network {
    NetworkBuilder::new()
        .variable("x1", [0.0, 0.5, 0.75, 1.0])
        .variable("x2", [0.0, 0.5, 1.0])
        .variable("y", [0.0, theta_y, 1.0 / gamma_y])
        .production("x1", 0.9, &[("x2", 1, MINUS)])
        .production("x2", 0.2, &[("x1", 1, PLUS), ("x2", 1, PLUS)])
        .production("x2", 0.2, &[("x1", 2, PLUS), ("x2", 1, MINUS)])
        .production("y", 1.0, &[("x1", 1, PLUS), ("x2", 1, MINUS)])
        .decay0("x1", 1.0, &[])
        .decay0("x1", upsilon, &[("y", 1, PLUS)])
        .decay0("x2", 0.3, &[])
        .decay0("y", gamma_y, &[])
        .build()
        .expect("extended example 1 is well formed")
}

/// Two combined negative loops in three genes.
/// `K1 = 0.9, K2¹ = 0.6, K2³ = 1, K3 = 0.5, γ⁰ = (1, 1, 0.5), γ¹ = 1`,
/// `θ_i¹ = 0.5, θ1² = 0.75`, `U = 1`.
pub fn example2() -> Network {
    NetworkBuilder::new()
        .variable("x1", [0.0, 0.5, 0.75, 1.0])
        .variable("x2", [0.0, 0.5, 2.0])
        .variable("x3", [0.0, 0.5, 2.0])
        .production("x1", 0.9, &[("x2", 1, PLUS)])
        .production("x2", 1.0, &[("x3", 1, MINUS)])
        .production("x2", 0.6, &[("x1", 2, MINUS)])
        .production("x3", 0.5, &[("x1", 1, PLUS)])
        .decay0("x1", 1.0, &[])
        .decay0("x2", 1.0, &[])
        .decay0("x3", 0.5, &[])
        .decay1("x1", 1.0, &[])
        .decay1("x2", 1.0, &[])
        .decay1("x3", 1.0, &[])
        .input_bound(1.0)
        .build()
        .expect("example 2 is well formed")
}

/// `dx_i/dt = κ_i⁰ + s^{ε_i}(x_{i-1}, θ_{i-1}) − γ_i x_i` (indices mod n),
/// one threshold per variable, unit production step. `inhibitory[i]` selects
/// `ε_i = −`.
pub fn feedback_loop(gamma: &[f64], basal: &[f64], theta: &[f64], inhibitory: &[bool]) -> Network {
    let n = gamma.len();
    assert!(basal.len() == n && theta.len() == n && inhibitory.len() == n);
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut b = NetworkBuilder::new();
    for i in 0..n {
        let cap = (basal[i] + 1.0) / gamma[i] + 1.0;
        b = b.variable(&names[i], [0.0, theta[i], cap]);
    }
    for i in 0..n {
        let src = (i + n - 1) % n;
        let sign = if inhibitory[i] { MINUS } else { PLUS };
        if basal[i] > 0.0 {
            b = b.production(&names[i], basal[i], &[]);
        }
        b = b.production(&names[i], 1.0, &[(&names[src], 1, sign)]).decay0(&names[i], gamma[i], &[]);
    }
    b.build().expect("feedback loop is well formed")
}

/// Canonical two-gene negative loop: `x1 ⊣ ... ← x2`, distinct decay rates.
pub fn negative_loop_2() -> Network {
    feedback_loop(&[1.0, 1.3], &[0.0, 0.0], &[0.5, 0.5], &[true, false])
}

/// Canonical three-gene negative loop with distinct decay rates.
pub fn negative_loop_3() -> Network {
    feedback_loop(&[1.0, 1.3, 0.8], &[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5], &[true, false, false])
}

/// Two identical independent genes started symmetrically: exit times tie.
pub fn symmetric_race() -> Network {
    NetworkBuilder::new()
        .variable("x1", [0.0, 0.5, 1.5])
        .variable("x2", [0.0, 0.5, 1.5])
        .production("x1", 1.0, &[])
        .production("x2", 1.0, &[])
        .decay0("x1", 1.0, &[])
        .decay0("x2", 1.0, &[])
        .build()
        .expect("race network is well formed")
}

/// One gene whose focal point sits exactly on its threshold (`κ = γ θ`).
pub fn focal_on_threshold() -> Network {
    NetworkBuilder::new()
        .variable("x", [0.0, 0.5, 1.0])
        .production("x", 0.5, &[])
        .decay0("x", 1.0, &[])
        .build()
        .expect("network is well formed")
}
