//! Dormand–Prince 5(4) stepping with proportional-integral step control.

// Butcher tableau of the DOPRI5 pair; the systems here are autonomous so the
// stage nodes are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

pub(crate) struct StepResult<const N: usize> {
    pub y: [f64; N],
    /// Derivative at the new point (first stage of the next step).
    pub dy: [f64; N],
    /// Scaled error norm; the step is acceptable when `<= 1`.
    pub err: f64,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One DOPRI5 step of size `h` from `y` with `k1 = f(y)`.
///
/// Returns `None` if any stage leaves the domain accepted by `valid` or the
/// result is not finite.
pub(crate) fn step<const N: usize, F, V>(
    f: &F,
    valid: &V,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Option<StepResult<N>>
where
    F: Fn(&[f64; N]) -> [f64; N],
    V: Fn(&[f64; N]) -> bool,
{
    let eval = |y: [f64; N]| -> Option<[f64; N]> {
        if !valid(&y) {
            return None;
        }
        let k = f(&y);
        k.iter().all(|v| v.is_finite()).then_some(k)
    };
    let k2 = eval(axpy(y, h, &[(A21, k1)]))?;
    let k3 = eval(axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = eval(axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = eval(axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = eval(axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ))?;
    let y_new = axpy(
        y,
        h,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = eval(y_new)?;

    let mut sum = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
        sum += (e / scale).powi(2);
    }
    Some(StepResult {
        y: y_new,
        dy: k7,
        err: (sum / N as f64).sqrt(),
    })
}

/// Proportional-integral step-size controller.
#[derive(Debug, Clone)]
pub(crate) struct Controller {
    fac_old: f64,
    last_rejected: bool,
}

impl Controller {
    pub fn new() -> Self {
        Self {
            fac_old: 1e-4,
            last_rejected: false,
        }
    }

    /// Next step size after an accepted step with error `err`.
    pub fn accept(&mut self, h: f64, err: f64) -> f64 {
        let expo = 0.2 - PI_BETA * 0.75;
        let fac11 = err.max(1e-300).powf(expo);
        let fac = (fac11 / self.fac_old.powf(PI_BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        self.fac_old = err.max(1e-4);
        let mut h_new = h / fac;
        if self.last_rejected {
            h_new = h_new.min(h);
        }
        self.last_rejected = false;
        h_new
    }

    /// Next step size after a rejected step with error `err`; halves the step
    /// when the trial left the domain.
    pub fn reject(&mut self, h: f64, err: Option<f64>) -> f64 {
        self.last_rejected = true;
        match err {
            Some(err) if err.is_finite() => {
                let expo = 0.2 - PI_BETA * 0.75;
                let fac11 = err.powf(expo);
                h / (fac11 / SAFETY).min(1.0 / FAC_MIN)
            }
            _ => 0.5 * h,
        }
    }
}
