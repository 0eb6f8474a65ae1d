//! Flow parameters and the pointwise geometric scalars of the Berger ansatz.
//!
//! A state `(alpha, beta)` describes the metric that scales the Hopf fiber by
//! `alpha` and its horizontal complement by `beta` relative to the round unit
//! sphere. Everything here is a pure function of those two scales and the
//! flow parameters.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `2π²`, the volume of the round unit 3-sphere.
pub const ROUND_VOLUME: f64 = 2.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    /// Unnormalized spinor flow.
    Collapse,
    /// Volume-normalized spinor flow.
    Normalized,
}

impl FlowKind {
    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Collapse => "collapse",
            FlowKind::Normalized => "normalized",
        }
    }

    /// Admissible magnitude of the Killing constant.
    pub fn kappa_magnitude(self) -> f64 {
        match self {
            FlowKind::Collapse => 1.0,
            FlowKind::Normalized => 0.5,
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters selecting one member of either flow family.
///
/// `kappa` is the Killing constant: it plays the role of `λ ∈ {±1}` for the
/// collapse flow and of `μ ∈ {±1/2}` for the normalized flow. The dynamics
/// depend on `a` and `kappa` only through the product `a·kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub kind: FlowKind,
    pub a: f64,
    pub kappa: f64,
    pub epsilon: f64,
}

impl FlowParams {
    pub fn new(kind: FlowKind, a: f64, kappa: f64, epsilon: f64) -> Result<Self> {
        if a != 2.0 && a != -2.0 {
            return Err(Error::invalid("a", format!("must be 2 or -2, got {a}")));
        }
        let m = kind.kappa_magnitude();
        if kappa != m && kappa != -m {
            return Err(Error::invalid(
                "kappa",
                format!("must be ±{m} for the {kind} flow, got {kappa}"),
            ));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be positive and finite, got {epsilon}"),
            ));
        }
        Ok(Self {
            kind,
            a,
            kappa,
            epsilon,
        })
    }

    pub fn collapse(a: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        Self::new(FlowKind::Collapse, a, lambda, epsilon)
    }

    pub fn normalized(a: f64, mu: f64, epsilon: f64) -> Result<Self> {
        Self::new(FlowKind::Normalized, a, mu, epsilon)
    }

    /// `a·kappa`: `±2` for the collapse flow, `±1` for the normalized flow.
    pub fn product(&self) -> f64 {
        self.a * self.kappa
    }

    /// The same flow with the opposite orientation convention and Killing sign.
    pub fn flipped(&self) -> Self {
        Self {
            a: -self.a,
            kappa: -self.kappa,
            ..*self
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kind, self.a, self.kappa, epsilon)
    }

    pub(crate) fn require(&self, kind: FlowKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind.name(),
            })
        }
    }
}

/// Flow time plus the fiber and base scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl State {
    pub fn new(t: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain { x: alpha, y: beta });
        }
        Ok(Self { t, alpha, beta })
    }

    pub fn point(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryScalars {
    pub volume: f64,
    pub energy: f64,
    /// Fiber diagonal of the metric velocity tensor (`Q̃₁` for the normalized flow).
    pub q00: f64,
    /// Horizontal diagonal of the metric velocity tensor.
    pub q11: f64,
    pub f: f64,
    pub g: f64,
}

pub(crate) fn check_point(alpha: f64, beta: f64) -> Result<()> {
    if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { x: alpha, y: beta })
    }
}

/// `c(ε) = (2π²ε)^(-2/3)`, the factor making the Berger metric unit volume.
pub fn normalizing_constant(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(
            "epsilon",
            format!("must be positive and finite, got {epsilon}"),
        ));
    }
    Ok((ROUND_VOLUME * epsilon).powf(-2.0 / 3.0))
}

pub fn volume(state: &State) -> f64 {
    volume_at(state.alpha, state.beta)
}

pub fn volume_at(alpha: f64, beta: f64) -> f64 {
    ROUND_VOLUME * alpha * beta * beta
}

/// Diagonal of `Q₁` for the collapse ansatz, `(Q₁(e₀,e₀), Q₁(e₁,e₁))`.
///
/// `Q₁(e₂,e₂) = Q₁(e₁,e₁)` and all off-diagonal entries vanish.
pub fn q1_collapse_components(params: &FlowParams, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    params.require(FlowKind::Collapse)?;
    check_point(alpha, beta)?;
    let a = params.a;
    let lambda = params.kappa;
    let q00 = -9.0 / 64.0 * alpha.powi(2) / beta.powi(4) * (a * a)
        + 1.0 / 2.0 * alpha / beta.powi(3) * (a * lambda)
        - 1.0 / 2.0 / beta.powi(2) * (lambda * lambda);
    let q11 = 3.0 / 64.0 * alpha.powi(2) / beta.powi(4) * (a * a)
        - 1.0 / 8.0 * alpha / beta.powi(3) * (a * lambda);
    Ok((q00, q11))
}

/// Diagonal of `Q₁` (before the volume correction) for the normalized ansatz.
pub fn q1_normalized_components(params: &FlowParams, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    params.require(FlowKind::Normalized)?;
    check_point(alpha, beta)?;
    let a = params.a;
    let mu = params.kappa;
    let shifted = mu - 0.25 * a;
    let q00 = 1.0 / 4.0 / alpha.powi(2) * (shifted * shifted)
        + 1.0 / beta.powi(2) * (-1.0 / 2.0 * (mu * mu) - 3.0 / 8.0 * (a * mu))
        + alpha / beta.powi(3) * (1.0 / 8.0 * (a * a) + 1.0 / 2.0 * (a * mu))
        - 9.0 / 64.0 * alpha.powi(2) / beta.powi(4) * (a * a);
    let q11 = -1.0 / 4.0 / alpha.powi(2) * (shifted * shifted)
        + alpha / beta.powi(3) * (-1.0 / 32.0 * (a * a) - 1.0 / 8.0 * (a * mu))
        + 3.0 / 64.0 * alpha.powi(2) / beta.powi(4) * (a * a);
    Ok((q00, q11))
}

/// `(1/6)·E/vol`, the coefficient of `g` in the volume-normalization correction
/// for a 3-manifold.
pub fn energy_density_sixth(params: &FlowParams, alpha: f64, beta: f64) -> Result<f64> {
    params.require(FlowKind::Normalized)?;
    check_point(alpha, beta)?;
    let a = params.a;
    let mu = params.kappa;
    let shifted = mu - 0.25 * a;
    let summed = 0.25 * a + mu;
    Ok(1.0 / 12.0 * (shifted * shifted) / alpha.powi(2)
        + 1.0 / 64.0 * (a * a) * alpha.powi(2) / beta.powi(4)
        + 1.0 / 24.0 * (a * shifted) / beta.powi(2)
        + 1.0 / 6.0 * (summed * summed) / beta.powi(2)
        - 1.0 / 12.0 * (a * summed) * alpha / beta.powi(3))
}

/// Coefficients `(f, g)` with `∇_K φ = f K·φ` and `∇_Y φ = g Y·φ` for horizontal `Y`.
///
/// Both flip sign under `(a, kappa) → (-a, -kappa)`.
pub fn spinor_coefficients(params: &FlowParams, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    check_point(alpha, beta)?;
    let a = params.a;
    let kappa = params.kappa;
    let fiber_twist = 1.0 / 4.0 * alpha / beta.powi(2) * a;
    Ok(match params.kind {
        FlowKind::Collapse => (fiber_twist, 1.0 / beta * kappa - fiber_twist),
        FlowKind::Normalized => (
            (kappa - 0.25 * a) / alpha + fiber_twist,
            1.0 / beta * (-1.0 / 4.0 * a * (alpha / beta - 1.0) + kappa),
        ),
    })
}

/// Spinorial energy `½∫|∇φ|² = π²·α·β²·(f² + 2g²)`.
pub fn energy(params: &FlowParams, alpha: f64, beta: f64) -> Result<f64> {
    let (f, g) = spinor_coefficients(params, alpha, beta)?;
    Ok(PI * PI * alpha * beta * beta * (f * f + 2.0 * g * g))
}

/// All per-sample diagnostics at `(alpha, beta)`.
pub fn geometry_scalars(params: &FlowParams, alpha: f64, beta: f64) -> Result<GeometryScalars> {
    let (f, g) = spinor_coefficients(params, alpha, beta)?;
    let (q00, q11) = match params.kind {
        FlowKind::Collapse => q1_collapse_components(params, alpha, beta)?,
        FlowKind::Normalized => {
            let (q00, q11) = q1_normalized_components(params, alpha, beta)?;
            let correction = energy_density_sixth(params, alpha, beta)?;
            (q00 + correction, q11 + correction)
        }
    };
    Ok(GeometryScalars {
        volume: volume_at(alpha, beta),
        energy: energy(params, alpha, beta)?,
        q00,
        q11,
        f,
        g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn params_validation() {
        assert!(FlowParams::collapse(2.0, 1.0, 1.0).is_ok());
        assert!(FlowParams::collapse(2.0, 0.5, 1.0).is_err());
        assert!(FlowParams::normalized(-2.0, -0.5, 0.3).is_ok());
        assert!(FlowParams::normalized(2.0, 1.0, 0.3).is_err());
        assert!(FlowParams::collapse(1.0, 1.0, 1.0).is_err());
        assert!(FlowParams::collapse(2.0, 1.0, 0.0).is_err());
        assert!(FlowParams::collapse(2.0, 1.0, f64::NAN).is_err());
        assert_eq!(
            FlowParams::normalized(2.0, -0.5, 1.0).unwrap().product(),
            -1.0
        );
    }

    #[test]
    fn normalizing_constant_values() {
        assert_eq!(normalizing_constant(1.0 / ROUND_VOLUME).unwrap(), 1.0);
        assert!(close(
            normalizing_constant(1.0).unwrap(),
            0.136_913_678_615_385_75,
            1e-15
        ));
        assert!(close(
            normalizing_constant(2.0 / 3.0).unwrap(),
            0.179_407_672_490_377_45,
            1e-15
        ));
        assert!(normalizing_constant(-1.0).is_err());
        assert!(normalizing_constant(0.0).is_err());
    }

    #[test]
    fn volume_values() {
        let s = normalizing_constant(1.0).unwrap().sqrt();
        assert!(close(volume_at(s, s), 1.0, 1e-15));
        assert!(close(volume_at(1.0, 1.0), 19.739_208_802_178_716, 1e-15));
        assert!(close(volume_at(0.5, 1.0), 9.869_604_401_089_358, 1e-15));
    }

    #[test]
    fn collapse_q_components() {
        let p = FlowParams::collapse(2.0, 1.0, 1.0).unwrap();
        let (q00, q11) = q1_collapse_components(&p, 1.0, 1.0).unwrap();
        assert!(close(q00, -1.0 / 16.0, 1e-15));
        assert!(close(q11, -1.0 / 16.0, 1e-15));

        let p = FlowParams::collapse(2.0, -1.0, 1.0).unwrap();
        let (q00, q11) = q1_collapse_components(&p, 1.0, 1.0).unwrap();
        assert!(close(q00, -33.0 / 16.0, 1e-15));
        assert!(close(q11, 7.0 / 16.0, 1e-15));

        // α'(0) of the ε = 2/3 closed form is -1/36.
        let p = FlowParams::collapse(2.0, 1.0, 2.0 / 3.0).unwrap();
        let (q00, _) = q1_collapse_components(&p, 2.0 / 3.0, 1.0).unwrap();
        assert!(close(2.0 / 3.0 / 2.0 * q00, -1.0 / 36.0, 1e-15));

        let n = FlowParams::normalized(2.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            q1_collapse_components(&n, 1.0, 1.0),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn normalized_q_components() {
        let p = FlowParams::normalized(2.0, 0.5, 1.0).unwrap();
        let (q00, _) = q1_normalized_components(&p, 1.0, 1.0).unwrap();
        assert!(close(q00, -1.0 / 16.0, 1e-15));

        // 1/4·1 + (-1/8 + 3/8) + 0 - 9/16
        let p = FlowParams::normalized(2.0, -0.5, 1.0).unwrap();
        let (q00, q11) = q1_normalized_components(&p, 1.0, 1.0).unwrap();
        assert!(close(q00, -1.0 / 16.0, 1e-15));
        // -1/4·1 + (-1/8 + 1/8) + 3/16
        assert!(close(q11, -1.0 / 16.0, 1e-15));

        let c = FlowParams::collapse(2.0, 1.0, 1.0).unwrap();
        assert!(q1_normalized_components(&c, 1.0, 1.0).is_err());
    }

    #[test]
    fn energy_density_values() {
        let p = FlowParams::normalized(2.0, 0.5, 1.0).unwrap();
        let s = normalizing_constant(1.0).unwrap().sqrt();
        let expected = ROUND_VOLUME.powf(2.0 / 3.0) / 16.0;
        assert!(close(
            energy_density_sixth(&p, s, s).unwrap(),
            expected,
            1e-14
        ));
        assert!(close(expected, 0.456_492, 1e-6));
        for s in [0.1, 0.7, 1.0, 2.5] {
            let e = energy_density_sixth(&p, s, s).unwrap();
            assert!(close(e, 1.0 / (16.0 * s * s), 1e-14));
        }
    }

    #[test]
    fn spinor_coefficient_values() {
        let c = FlowParams::collapse(2.0, 1.0, 1.0).unwrap();
        assert_eq!(spinor_coefficients(&c, 1.0, 1.0).unwrap(), (0.5, 0.5));

        let n = FlowParams::normalized(2.0, 0.5, 1.0).unwrap();
        let s = normalizing_constant(1.0).unwrap().sqrt();
        let (f, g) = spinor_coefficients(&n, s, s).unwrap();
        assert!(close(f, 0.5 / s, 1e-15));
        assert!(close(g, 0.5 / s, 1e-15));

        for b in [0.3, 1.0, 4.0] {
            let (_, g) = spinor_coefficients(&n, b, b).unwrap();
            assert!(close(g, 0.5 / b, 1e-15));
        }
    }

    #[test]
    fn energy_values() {
        let n = FlowParams::normalized(2.0, 0.5, 1.0).unwrap();
        let s = normalizing_constant(1.0).unwrap().sqrt();
        let killing = 0.5 / s;
        let oracle = 0.5 * 3.0 * killing * killing;
        let e = energy(&n, s, s).unwrap();
        assert!(close(e, oracle, 1e-14));
        assert!(close(e, 2.738_952, 1e-6));

        let c = FlowParams::collapse(2.0, 1.0, 1.0).unwrap();
        assert!(close(energy(&c, 1.0, 1.0).unwrap(), 0.75 * PI * PI, 1e-15));
    }

    #[test]
    fn scalars_reject_axes() {
        let c = FlowParams::collapse(2.0, 1.0, 1.0).unwrap();
        assert!(geometry_scalars(&c, 0.0, 1.0).is_err());
        assert!(geometry_scalars(&c, 1.0, -1.0).is_err());
    }
}
