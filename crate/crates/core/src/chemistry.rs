//! Pointwise free-energy densities, truncations, penalty operators and
//! derived parameters.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpreadingKind {
    /// Every coefficient is nonnegative.
    Partial,
    /// Exactly one coefficient is negative.
    Total,
}

/// Per-phase spreading coefficients `Σᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadingCoefficients {
    values: Vec<f64>,
    kind: SpreadingKind,
}

impl SpreadingCoefficients {
    /// Classifies a coefficient list; more than one negative entry is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("spreading coefficients must be finite".into()));
        }
        let negatives = values.iter().filter(|&&v| v < 0.0).count();
        let kind = match negatives {
            0 => SpreadingKind::Partial,
            1 => SpreadingKind::Total,
            _ => {
                return Err(Error::Parameter(format!(
                    "at most one spreading coefficient may be negative, got {values:?}"
                )))
            }
        };
        Ok(SpreadingCoefficients { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SpreadingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ₁Σ₂ + Σ₁Σ₃ + Σ₂Σ₃` (sum over all pairs for general N).
    pub fn pair_product_sum(&self) -> f64 {
        let v = &self.values;
        let mut s = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                s += v[i] * v[j];
            }
        }
        s
    }

    /// Pairwise tensions `σᵢⱼ = (Σᵢ + Σⱼ) / 2` (ternary case).
    pub fn pairwise(&self) -> Option<(f64, f64, f64)> {
        match self.values.as_slice() {
            &[s1, s2, s3] => Some((0.5 * (s1 + s2), 0.5 * (s1 + s3), 0.5 * (s2 + s3))),
            _ => None,
        }
    }
}

/// Spreading coefficients `Σᵢ = σᵢⱼ + σᵢₖ − σⱼₖ` from surface tensions.
pub fn sigma_from_pairwise(s12: f64, s13: f64, s23: f64) -> Result<SpreadingCoefficients> {
    if [s12, s13, s23].iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::Parameter(format!(
            "surface tensions must be nonnegative, got ({s12}, {s13}, {s23})"
        )));
    }
    let values = vec![s12 + s13 - s23, s12 + s23 - s13, s13 + s23 - s12];
    SpreadingCoefficients::new(values).map_err(|e| Error::Internal(e.to_string()))
}

/// Physical parameters of the penalized model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Interface thickness `ε`.
    pub epsilon: f64,
    /// Penalization parameter `λ`.
    pub lambda: f64,
    /// Coefficient `Λ` of the triple-product potential.
    pub big_lambda: f64,
    pub mobility: Vec<f64>,
    pub sigma: SpreadingCoefficients,
    /// Per-phase viscosities, only read by the flow solver.
    pub viscosity: Vec<f64>,
}

impl ModelParams {
    pub fn new(
        epsilon: f64,
        lambda: f64,
        big_lambda: f64,
        mobility: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        let n = sigma.len();
        let p = ModelParams {
            epsilon,
            lambda,
            big_lambda,
            mobility,
            sigma: SpreadingCoefficients::new(sigma)?,
            viscosity: vec![1.0; n],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_viscosity(mut self, viscosity: Vec<f64>) -> Result<Self> {
        self.viscosity = viscosity;
        self.validate()?;
        Ok(self)
    }

    pub fn num_phases(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sigma.len();
        if n < 2 {
            return Err(Error::Parameter("at least two phases are required".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Parameter(format!(
                "penalty lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.big_lambda >= 0.0) {
            return Err(Error::Parameter(format!(
                "Lambda must be nonnegative, got {}",
                self.big_lambda
            )));
        }
        if self.mobility.len() != n || self.mobility.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Parameter(format!(
                "need {n} positive mobilities, got {:?}",
                self.mobility
            )));
        }
        if self.viscosity.len() != n || self.viscosity.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Parameter(format!(
                "need {n} positive viscosities, got {:?}",
                self.viscosity
            )));
        }
        Ok(())
    }
}

/// `(F, f, f′)` for `F = ¼φ²(1−φ)²`.
pub fn double_well(phi: f64) -> (f64, f64, f64) {
    let s = phi - 0.5;
    let big_f = 0.25 * phi * phi * (1.0 - phi) * (1.0 - phi);
    (big_f, s * s * s - 0.25 * s, 3.0 * s * s - 0.25)
}

/// Double well continued quadratically outside `[0, 1]`.
pub fn truncated_double_well(phi: f64) -> (f64, f64, f64) {
    if phi > 1.0 {
        let d = phi - 1.0;
        (0.25 * d * d, 0.5 * d, 0.5)
    } else if phi < 0.0 {
        (0.25 * phi * phi, 0.5 * phi, 0.5)
    } else {
        double_well(phi)
    }
}

/// Truncated or plain double well.
pub fn potential(phi: f64, truncated: bool) -> (f64, f64, f64) {
    if truncated {
        truncated_double_well(phi)
    } else {
        double_well(phi)
    }
}

/// `F₁₂₃ = ½φ₁²φ₂²φ₃²` and its gradient.
pub fn f123_grad(p1: f64, p2: f64, p3: f64) -> (f64, [f64; 3]) {
    let (q1, q2, q3) = (p1 * p1, p2 * p2, p3 * p3);
    (
        0.5 * q1 * q2 * q3,
        [p1 * q2 * q3, q1 * p2 * q3, q1 * q2 * p3],
    )
}

/// Exact Hessian of `F₁₂₃`.
pub fn f123_hessian(p1: f64, p2: f64, p3: f64) -> [[f64; 3]; 3] {
    let (q1, q2, q3) = (p1 * p1, p2 * p2, p3 * p3);
    let h12 = 2.0 * p1 * p2 * q3;
    let h13 = 2.0 * p1 * q2 * p3;
    let h23 = 2.0 * q1 * p2 * p3;
    [[q2 * q3, h12, h13], [h12, q1 * q3, h23], [h13, h23, q1 * q2]]
}

/// `½ Πⱼ φⱼ²` and its gradient for any number of phases.
pub fn product_potential(phi: &[f64]) -> (f64, Vec<f64>) {
    let n = phi.len();
    let value = 0.5 * phi.iter().map(|p| p * p).product::<f64>();
    let grad = (0..n)
        .map(|i| {
            phi[i]
                * (0..n)
                    .filter(|&j| j != i)
                    .map(|j| phi[j] * phi[j])
                    .product::<f64>()
        })
        .collect();
    (value, grad)
}

/// Hessian of `½ Πⱼ φⱼ²`, row-major `n x n`.
pub fn product_hessian(phi: &[f64]) -> Vec<f64> {
    let n = phi.len();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = if i == j {
                (0..n).filter(|&k| k != i).map(|k| phi[k] * phi[k]).product()
            } else {
                2.0 * phi[i]
                    * phi[j]
                    * (0..n)
                        .filter(|&k| k != i && k != j)
                        .map(|k| phi[k] * phi[k])
                        .product::<f64>()
            };
        }
    }
    h
}

/// Penalty value, gradient component and Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct Penalty {
    /// `(1/2λ)(Σφ − 1)²`.
    pub value: f64,
    /// `(1/λ)(Σφ − 1)`, identical in every component.
    pub grad: f64,
    /// `(1/λ)` times the all-ones matrix, row-major.
    pub hessian: Vec<f64>,
}

pub fn penalty(phi: &[f64], lambda: f64) -> Result<Penalty> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("penalty lambda must be positive, got {lambda}")));
    }
    let n = phi.len();
    let c = phi.iter().sum::<f64>() - 1.0;
    Ok(Penalty {
        value: c * c / (2.0 * lambda),
        grad: c / lambda,
        hessian: vec![1.0 / lambda; n * n],
    })
}

/// Lower-triangular replacement of the penalty Hessian, row-major `n x n`:
/// `1/(2λ)` on the diagonal, `1/λ` below it and zero above.
pub fn penalty_lower_triangular(n: usize, lambda: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least two phases, got {n}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("penalty lambda must be positive, got {lambda}")));
    }
    let s = 1.0 / (2.0 * lambda);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            m[i * n + j] = if i == j { s } else { 2.0 * s };
        }
    }
    Ok(m)
}

/// Second-order optimal-dissipation linearization `g + ½ g′ (φ_new − φ_old)`.
pub fn od2(value_at_old: f64, slope_at_old: f64, phi_old: f64, phi_new: f64) -> f64 {
    value_at_old + 0.5 * slope_at_old * (phi_new - phi_old)
}

/// Which stabilization threshold to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdMode {
    /// `72 M Σ² / ε²` for the truncated scheme.
    Truncated,
    /// `72 M Σ² ‖f′(φⁿ)‖²∞ / ε²`, carrying the sup-norm bound.
    NonTruncated { f_prime_bound: f64 },
}

pub fn tau_threshold(mobility: f64, sigma: f64, epsilon: f64, mode: ThresholdMode) -> f64 {
    let bound = match mode {
        ThresholdMode::Truncated => 1.0,
        ThresholdMode::NonTruncated { f_prime_bound } => f_prime_bound,
    };
    72.0 * mobility * sigma * sigma * bound * bound / (epsilon * epsilon)
}

/// Outcome of one sufficient solvability condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolvabilityReport {
    /// Partial spreading: unique solvability for every step size.
    Unconditional,
    /// Total spreading: the two sufficient conditions evaluated with `C = 1`.
    Conditional {
        phase: usize,
        /// `λ ≤ h² / (ε|Σ|)`.
        lambda: ConditionCheck,
        /// `Δt ≤ h⁴ (4 − 3ε|Σ|) / M`; `None` when `4 − 3ε|Σ| ≤ 0`.
        dt: Option<ConditionCheck>,
    },
}

impl SolvabilityReport {
    pub fn any_satisfied(&self) -> bool {
        match self {
            SolvabilityReport::Unconditional => true,
            SolvabilityReport::Conditional { lambda, dt, .. } => {
                lambda.satisfied || dt.as_ref().is_some_and(|c| c.satisfied)
            }
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        match self {
            SolvabilityReport::Unconditional => Vec::new(),
            SolvabilityReport::Conditional { phase, lambda, dt } => {
                let mut out = Vec::new();
                if !lambda.satisfied {
                    out.push(format!(
                        "phase {}: lambda exceeds h^2/(eps|Sigma|) = {:.4e}",
                        phase + 1,
                        lambda.bound
                    ));
                }
                match dt {
                    Some(c) if !c.satisfied => out.push(format!(
                        "phase {}: dt exceeds h^4(4-3eps|Sigma|)/M = {:.4e}",
                        phase + 1,
                        c.bound
                    )),
                    None => out.push(format!(
                        "phase {}: dt condition inapplicable (4 - 3 eps |Sigma| <= 0)",
                        phase + 1
                    )),
                    _ => {}
                }
                out
            }
        }
    }
}

/// Advisory unique-solvability check for the decoupled schemes.
pub fn solvability_guard(params: &ModelParams, h: f64, dt: f64) -> SolvabilityReport {
    let sigma = params.sigma.values();
    let Some(phase) = sigma.iter().position(|&s| s < 0.0) else {
        return SolvabilityReport::Unconditional;
    };
    let abs = sigma[phase].abs();
    let eps = params.epsilon;
    let lambda_bound = h * h / (eps * abs);
    let slack = 4.0 - 3.0 * eps * abs;
    let dt_check = (slack > 0.0).then(|| {
        let bound = h.powi(4) * slack / params.mobility[phase];
        ConditionCheck {
            bound,
            satisfied: dt <= bound,
        }
    });
    SolvabilityReport::Conditional {
        phase,
        lambda: ConditionCheck {
            bound: lambda_bound,
            satisfied: params.lambda <= lambda_bound,
        },
        dt: dt_check,
    }
}
