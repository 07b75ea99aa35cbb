//! Closed forms of the two-point harmonic function.
//!
//! Brownian motion with scale σ has h^{(γ)}(y) = (|y| + γy)/σ², giving a
//! piecewise linear φ^{(γ)}_{a,b}. Stable processes have
//! h(y) = K (1 - β sgn y) |y|^{α-1}; the constant K is not needed because
//! the two-point function is linear in h, so the stable oracle returns φ/K.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OracleFamily {
    Brownian { sigma: f64 },
    Stable { alpha: f64, beta: f64 },
}

/// (1 - β sgn y)|y|^{α-1}.
pub fn stable_h_shape(alpha: f64, beta: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        (1.0 - beta * y.signum()) * y.abs().powf(alpha - 1.0)
    }
}

/// φ^{(γ)}_{a,b}(x) for a < b. For the stable family γ has no effect and
/// the value is up to the factor K.
pub fn closed_form_oracle(family: OracleFamily, gamma: f64, a: f64, b: f64, x: f64) -> f64 {
    assert!(a < b, "oracle expects a < b");
    match family {
        OracleFamily::Brownian { sigma } => {
            let s2 = sigma * sigma;
            if x < a {
                (1.0 - gamma) * (a - x) / s2
            } else if x <= b {
                0.0
            } else {
                (1.0 + gamma) * (x - b) / s2
            }
        }
        OracleFamily::Stable { alpha, beta } => {
            let h = |y: f64| stable_h_shape(alpha, beta, y);
            // P_x(T_b < T_a) from the two-point hitting identity.
            let p_b = (h(x - a) - h(x - b) + h(a - b)) / (h(a - b) + h(b - a));
            h(x - a) - p_b * h(b - a)
        }
    }
}
