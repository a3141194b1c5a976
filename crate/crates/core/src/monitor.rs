//! Lyapunov functions of the closed-loop error dynamics and an integrator
//! for the scalar barrier ODE `d̈ = −k_o ḋ/d − α(t)`.

/// `½ k1 ỹ² + ½ θ̃²`.
pub fn lyapunov_lateral(y_tilde: f64, theta_tilde: f64, k1: f64) -> f64 {
    0.5 * k1 * y_tilde * y_tilde + 0.5 * theta_tilde * theta_tilde
}

/// `½ k4 ẽ² + ½ ν²`.
pub fn lyapunov_longitudinal(e_tilde: f64, nu: f64, k4: f64) -> f64 {
    0.5 * k4 * e_tilde * e_tilde + 0.5 * nu * nu
}

/// Nominal step of [`barrier_ode_check`].
pub const BARRIER_DT: f64 = 1e-4;
/// Samples kept in a [`BarrierTrace`] are this many nominal steps apart.
const TRACE_STRIDE: f64 = 100.0;

/// Result of integrating the barrier ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierTrace {
    /// `(t, d, ḋ)` every 0.01 s of simulated time.
    pub samples: Vec<(f64, f64, f64)>,
    /// Smallest `d` seen at any integration step.
    pub min_d: f64,
    /// Final `(d, ḋ)`.
    pub last: (f64, f64),
    /// Time reached; short of the requested duration if `d` left `(0, ∞)`.
    pub t_end: f64,
    pub steps: usize,
}

impl BarrierTrace {
    /// Divergent flow `ḋ/d` at the end of the run.
    pub fn final_flow(&self) -> f64 {
        self.last.1 / self.last.0
    }
}

/// Integrates `d̈ = −k_o ḋ/d − α(t)` from `d(0) = d0`, `ḋ(0)/d(0) = phi0`
/// with classical RK4.
///
/// The damping rate `k_o/d` grows as `d` shrinks, so the step is refined
/// below [`BARRIER_DT`] whenever `k_o h / d` would leave RK4's stability
/// region. A step that would still produce a non-positive `d` is recorded as
/// such; positivity is the property under test, not something enforced here.
pub fn barrier_ode_check(
    k_o: f64,
    alpha: impl Fn(f64) -> f64,
    d0: f64,
    phi0: f64,
    duration: f64,
) -> BarrierTrace {
    let rhs = |t: f64, d: f64, q: f64| (q, -k_o * q / d - alpha(t));
    let mut t = 0.0;
    let mut d = d0;
    let mut q = phi0 * d0;
    let mut samples = vec![(0.0, d, q)];
    let mut next_sample = BARRIER_DT * TRACE_STRIDE;
    let mut min_d = d;
    let mut steps = 0;
    while t < duration && d > 0.0 && d.is_finite() {
        let stiff = 0.2 * d / k_o;
        let h = BARRIER_DT.min(stiff).min(duration - t);
        let (k1d, k1q) = rhs(t, d, q);
        let (k2d, k2q) = rhs(t + 0.5 * h, d + 0.5 * h * k1d, q + 0.5 * h * k1q);
        let (k3d, k3q) = rhs(t + 0.5 * h, d + 0.5 * h * k2d, q + 0.5 * h * k2q);
        let (k4d, k4q) = rhs(t + h, d + h * k3d, q + h * k3q);
        d += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        t += h;
        steps += 1;
        min_d = min_d.min(d);
        if t >= next_sample - 1e-12 {
            samples.push((t, d, q));
            next_sample += BARRIER_DT * TRACE_STRIDE;
        }
        if h < 1e-300 {
            break;
        }
    }
    BarrierTrace {
        samples,
        min_d,
        last: (d, q),
        t_end: t,
        steps,
    }
}
