//! Numerical tolerances shared by every module.

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative threshold for trimming leading polynomial coefficients.
    pub poly_trim: f64,
    /// Maximum Newton steps used to polish companion-matrix roots.
    pub newton_steps: usize,
    /// Relative threshold used to call two roots distinct.
    pub root_separation: f64,
    /// Roots with |Re| below this are treated as lying on the imaginary axis.
    pub imag_axis: f64,
    /// Required ratio smallest/largest singular value for a null vector.
    pub null_ratio: f64,
    /// Allowed residual ||F(gamma) v|| for spectral null vectors.
    pub null_residual: f64,
    /// Sylvester common-eigenvalue threshold, relative to ||A|| + ||B||.
    pub sylvester_gap: f64,
    /// Allowed relative Sylvester residual.
    pub sylvester_residual: f64,
    /// Row-sum slack for generators.
    pub generator_rows: f64,
    /// Imaginary residue allowed when a result must be real.
    pub imag_residue: f64,
    /// Slack for probabilities before clipping to [0, 1].
    pub prob_slack: f64,
    /// Largest acceptable condition number for inverted matrices.
    pub max_cond: f64,
    /// Confluent-limit guard in closed-form exponential integrals.
    pub confluent: f64,
    /// Relative step of central finite differences.
    pub fd_step: f64,
}

pub const TOL: Tolerances = Tolerances {
    poly_trim: 1e-12,
    newton_steps: 10,
    root_separation: 1e-7,
    imag_axis: 1e-9,
    null_ratio: 1e-8,
    null_residual: 1e-8,
    sylvester_gap: 1e-9,
    sylvester_residual: 1e-10,
    generator_rows: 1e-8,
    imag_residue: 1e-9,
    prob_slack: 1e-9,
    max_cond: 1e12,
    confluent: 1e-10,
    fd_step: 1e-6,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOL
    }
}
