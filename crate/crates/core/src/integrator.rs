//! Dormand–Prince 5(4) integration with continuous output and event location.
//!
//! Each accepted step keeps the coefficients of the fourth-order Hairer–Wanner
//! interpolant, so states between step endpoints are available without re-stepping.
//! Event location brackets a sign change of the (optionally unwrapped) event function
//! over an accepted step and refines the root on the interpolant.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and budgets shared by every integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Bound on the event residual at a located crossing.
    pub event_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-11,
            max_step: 0.1,
            max_steps: 200_000,
            event_tol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("event_tol", self.event_tol),
        ] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(Error::InvalidParams(format!(
                    "{name} must lie in (0, 1e-2], got {v}"
                )));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParams("max_step must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParams("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.abs_tol = tol;
        self
    }
}

/// Autonomous system `dy/dt = f(y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, y: &SVector<f64, N>) -> Result<SVector<f64, N>>;
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    fn rhs(&self, y: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        self(y)
    }
}

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

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: SVector<f64, N>,
    pub y1: SVector<f64, N>,
    coeffs: [SVector<f64, N>; 4],
}

impl<const N: usize> DenseStep<N> {
    /// Interpolated state at `t`; the endpoints return the stepped states exactly.
    pub fn eval(&self, t: f64) -> SVector<f64, N> {
        if t == self.t1 {
            return self.y1;
        }
        if t == self.t0 {
            return self.y0;
        }
        let theta = (t - self.t0) / (self.t1 - self.t0);
        let theta1 = 1.0 - theta;
        let [r2, r3, r4, r5] = &self.coeffs;
        self.y0 + (r2 + (r3 + (r4 + r5 * theta1) * theta) * theta1) * theta
    }

    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// Adaptive stepper owning its workspace; steps forward or backward in time.
pub struct Stepper<'a, S, const N: usize> {
    sys: &'a S,
    cfg: IntegratorConfig,
    t: f64,
    y: SVector<f64, N>,
    f: SVector<f64, N>,
    h: f64,
    dir: f64,
    steps: usize,
}

impl<'a, S: OdeSystem<N>, const N: usize> Stepper<'a, S, N> {
    /// `direction` is `+1.0` for forward and `-1.0` for backward integration.
    pub fn new(
        sys: &'a S,
        y0: SVector<f64, N>,
        t0: f64,
        direction: f64,
        cfg: IntegratorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let f = sys.rhs(&y0)?;
        let dir = if direction < 0.0 { -1.0 } else { 1.0 };
        let mut st = Self {
            sys,
            cfg,
            t: t0,
            y: y0,
            f,
            h: 0.0,
            dir,
            steps: 0,
        };
        st.h = st.initial_step()?;
        Ok(st)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &SVector<f64, N> {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn scale(&self, a: &SVector<f64, N>, b: &SVector<f64, N>) -> SVector<f64, N> {
        a.zip_map(b, |x, y| {
            self.cfg.abs_tol + self.cfg.rel_tol * x.abs().max(y.abs())
        })
    }

    // Hairer–Nørsett–Wanner starting step heuristic.
    fn initial_step(&self) -> Result<f64> {
        let sc = self.scale(&self.y, &self.y);
        let d0 = rms_ratio(&self.y, &sc);
        let d1 = rms_ratio(&self.f, &sc);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.cfg.max_step);
        let y1 = self.y + self.f * (self.dir * h0);
        let f1 = self.sys.rhs(&y1)?;
        let d2 = rms_ratio(&(f1 - self.f), &sc) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.cfg.max_step))
    }

    /// Takes one accepted step, shrinking the step on rejection.
    pub fn step(&mut self) -> Result<DenseStep<N>> {
        self.step_limited(self.dir * f64::INFINITY)
    }

    /// Like [`step`](Self::step) but never moves beyond `t_limit` (in the stepping direction).
    pub fn step_limited(&mut self, t_limit: f64) -> Result<DenseStep<N>> {
        let mut h = self.h.min(self.cfg.max_step);
        let remaining = (t_limit - self.t) * self.dir;
        let mut clipped = false;
        if remaining <= h {
            h = remaining;
            clipped = true;
        }
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::StepCountExceeded {
                    max_steps: self.cfg.max_steps,
                });
            }
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            self.steps += 1;
            let hs = h * self.dir;
            let (y_new, f_new, err_vec, ks) = self.stage(hs)?;
            let sc = self.scale(&self.y, &y_new);
            let err = rms_ratio(&err_vec, &sc);
            if err <= 1.0 {
                let t_new = if clipped { t_limit } else { self.t + hs };
                let k1 = self.f;
                let dy = y_new - self.y;
                let r3 = k1 * hs - dy;
                let r4 = dy - f_new * hs - r3;
                let r5 =
                    (k1 * D1 + ks[0] * D3 + ks[1] * D4 + ks[2] * D5 + ks[3] * D6 + f_new * D7) * hs;
                let dense = DenseStep {
                    t0: self.t,
                    t1: t_new,
                    y0: self.y,
                    y1: y_new,
                    coeffs: [dy, r3, r4, r5],
                };
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !clipped {
                    self.h = (h * fac).min(self.cfg.max_step);
                }
                self.t = t_new;
                self.y = y_new;
                self.f = f_new;
                return Ok(dense);
            }
            clipped = false;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }

    #[allow(clippy::type_complexity)]
    fn stage(
        &self,
        h: f64,
    ) -> Result<(
        SVector<f64, N>,
        SVector<f64, N>,
        SVector<f64, N>,
        [SVector<f64, N>; 4],
    )> {
        let y = &self.y;
        let k1 = &self.f;
        let k2 = self.sys.rhs(&(y + k1 * (h * A21)))?;
        let k3 = self.sys.rhs(&(y + (k1 * A31 + k2 * A32) * h))?;
        let k4 = self.sys.rhs(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h))?;
        let k5 = self
            .sys
            .rhs(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h))?;
        let k6 = self
            .sys
            .rhs(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h))?;
        let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = self.sys.rhs(&y_new)?;
        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        Ok((y_new, k7, err, [k3, k4, k5, k6]))
    }
}

fn rms_ratio<const N: usize>(v: &SVector<f64, N>, scale: &SVector<f64, N>) -> f64 {
    let s: f64 = v
        .iter()
        .zip(scale.iter())
        .map(|(a, b)| (a / b) * (a / b))
        .sum();
    (s / N as f64).sqrt()
}

/// Accepted steps of an integration, in the order they were taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
}

impl<const N: usize> Trajectory<N> {
    /// Step endpoints including the initial point.
    pub fn samples(&self) -> impl Iterator<Item = (f64, SVector<f64, N>)> + '_ {
        let first = self.steps.first().map(|s| (s.t0, s.y0));
        first
            .into_iter()
            .chain(self.steps.iter().map(|s| (s.t1, s.y1)))
    }

    pub fn final_state(&self) -> Option<(f64, SVector<f64, N>)> {
        self.steps.last().map(|s| (s.t1, s.y1))
    }

    /// Interpolated state at any time inside the covered span.
    pub fn eval(&self, t: f64) -> Option<SVector<f64, N>> {
        let dir = self.steps.first()?.h().signum();
        let idx = self.steps.partition_point(|s| (s.t1 - t) * dir < 0.0);
        let s = self.steps.get(idx)?;
        if (t - s.t0) * dir < 0.0 {
            return None;
        }
        Some(s.eval(t))
    }
}

/// Integrates from `t_span.0` to `t_span.1` (either direction).
pub fn integrate<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    y0: SVector<f64, N>,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>> {
    let (t0, t1) = t_span;
    let mut stepper = Stepper::new(sys, y0, t0, t1 - t0, *cfg)?;
    let mut steps = Vec::new();
    while stepper.t() != t1 {
        steps.push(stepper.step_limited(t1)?);
    }
    Ok(Trajectory { steps })
}

/// Which sign changes of the event function count as crossings (in forward time).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CrossingDirection {
    /// Event function increasing through the level.
    #[default]
    Positive,
    /// Event function decreasing through the level.
    Negative,
    Any,
}

impl CrossingDirection {
    pub fn reversed(self) -> Self {
        match self {
            Self::Positive => Self::Negative,
            Self::Negative => Self::Positive,
            Self::Any => Self::Any,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "+",
            Self::Negative => "-",
            Self::Any => "any",
        }
    }
}

impl std::str::FromStr for CrossingDirection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "+" | "positive" | "pos" => Ok(Self::Positive),
            "-" | "negative" | "neg" => Ok(Self::Negative),
            "any" | "both" => Ok(Self::Any),
            other => Err(format!("unknown crossing direction '{other}'")),
        }
    }
}

/// Scalar event. When `period` is set the value is treated as an angle and tracked as a
/// continuous lift, so crossings are detected at every level `k * period`.
pub struct EventFn<F> {
    pub f: F,
    pub period: Option<f64>,
}

impl<F> EventFn<F> {
    pub fn plain(f: F) -> Self {
        Self { f, period: None }
    }

    pub fn angular(f: F, period: f64) -> Self {
        Self {
            f,
            period: Some(period),
        }
    }
}

/// A located crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<const N: usize> {
    pub t: f64,
    pub y: SVector<f64, N>,
    /// Event residual relative to the crossed level.
    pub residual: f64,
}

fn wrap_pi(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Steps until the event crosses one of its levels in `direction`, then refines the
/// crossing on the dense output. The initial point never counts as a crossing.
pub fn locate_section_crossing<S, F, const N: usize>(
    stepper: &mut Stepper<'_, S, N>,
    event: &EventFn<F>,
    direction: CrossingDirection,
) -> Result<Crossing<N>>
where
    S: OdeSystem<N>,
    F: Fn(&SVector<f64, N>) -> f64,
{
    let event_tol = stepper.cfg.event_tol;
    // Backward stepping sees the forward-time slope reversed.
    let stepping_dir = if stepper.dir < 0.0 {
        direction.reversed()
    } else {
        direction
    };
    let mut raw_prev = (event.f)(stepper.y());
    // a start within round-off of a level sits on it, so it cannot count as a crossing
    let offset = match event.period {
        Some(p) => wrap_pi(raw_prev, p),
        None => raw_prev,
    };
    if offset.abs() < event_tol {
        raw_prev -= offset;
    }
    let mut lift_prev = raw_prev;
    let start_steps = stepper.steps();
    loop {
        let step = match stepper.step() {
            Ok(s) => s,
            Err(Error::StepCountExceeded { .. }) => {
                return Err(Error::NoCrossingFound {
                    steps: stepper.steps() - start_steps,
                })
            }
            Err(e) => return Err(e),
        };
        let raw_next = (event.f)(&step.y1);
        if !raw_next.is_finite() {
            return Err(Error::NoCrossingFound {
                steps: stepper.steps() - start_steps,
            });
        }
        let lift_next = match event.period {
            Some(p) => lift_prev + wrap_pi(raw_next - raw_prev, p),
            None => raw_next,
        };
        if let Some(level) = crossed_level(lift_prev, lift_next, event.period, stepping_dir) {
            let lift_at = |y: &SVector<f64, N>| -> f64 {
                let raw = (event.f)(y);
                match event.period {
                    Some(p) => lift_prev + wrap_pi(raw - raw_prev, p) - level,
                    None => raw - level,
                }
            };
            let (t, residual) = refine_root(
                &step,
                &lift_at,
                lift_prev - level,
                lift_next - level,
                event_tol,
            )?;
            let y = step.eval(t);
            return Ok(Crossing { t, y, residual });
        }
        raw_prev = raw_next;
        lift_prev = lift_next;
    }
}

/// Level crossed going from `before` to `after` in stepping order. The level may
/// coincide with `after` but never with `before`.
fn crossed_level(
    before: f64,
    after: f64,
    period: Option<f64>,
    direction: CrossingDirection,
) -> Option<f64> {
    let up = after > before;
    match direction {
        CrossingDirection::Positive if !up => return None,
        CrossingDirection::Negative if up || after == before => return None,
        _ => {}
    }
    match period {
        None => {
            let upward = before < 0.0 && after >= 0.0;
            let downward = before > 0.0 && after <= 0.0;
            (upward || downward).then_some(0.0)
        }
        Some(p) => {
            if up {
                // level in (before, after]
                let k = (after / p).floor();
                (k * p > before).then_some(k * p)
            } else {
                // level in [after, before)
                let k = (after / p).ceil();
                (k * p < before).then_some(k * p)
            }
        }
    }
}

/// Illinois-safeguarded root refinement on one step's interpolant.
fn refine_root<const N: usize>(
    step: &DenseStep<N>,
    g: &dyn Fn(&SVector<f64, N>) -> f64,
    g0: f64,
    g1: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let (mut a, mut b) = (step.t0, step.t1);
    let (mut fa, mut fb) = (g0, g1);
    if fa == 0.0 {
        return Ok((a, 0.0));
    }
    if fb == 0.0 {
        return Ok((b, 0.0));
    }
    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() {
        (a, fa)
    } else {
        (b, fb)
    };
    for _ in 0..200 {
        // secant point, bisection when it falls outside the bracket
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || (c - a) * (c - b) > 0.0 {
            c = 0.5 * (a + b);
        }
        let fc = g(&step.eval(c));
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc.abs() < tol {
            return Ok((c, fc));
        }
        if c == a || c == b {
            break;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
    }
    if best.1.abs() < tol {
        Ok(best)
    } else {
        Err(Error::NoConvergence {
            iterations: 200,
            residual: best.1.abs(),
        })
    }
}

/// Classical Lorenz field `x' = s(y - x), y' = x(r - z) - y, z' = xy - bz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzField {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
}

impl Default for LorenzField {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            r: 28.0,
            b: 8.0 / 3.0,
        }
    }
}

impl LorenzField {
    pub fn new(sigma: f64, r: f64, b: f64) -> Self {
        Self { sigma, r, b }
    }

    pub fn eval(&self, p: &SVector<f64, 3>) -> SVector<f64, 3> {
        let (x, y, z) = (p[0], p[1], p[2]);
        SVector::<f64, 3>::new(
            self.sigma * (y - x),
            x * (self.r - z) - y,
            x * y - self.b * z,
        )
    }

    pub fn jacobian(&self, p: &SVector<f64, 3>) -> nalgebra::Matrix3<f64> {
        let (x, y, z) = (p[0], p[1], p[2]);
        nalgebra::Matrix3::new(
            -self.sigma,
            self.sigma,
            0.0,
            self.r - z,
            -1.0,
            -x,
            y,
            x,
            -self.b,
        )
    }

    pub fn divergence(&self) -> f64 {
        -(self.sigma + 1.0 + self.b)
    }
}

impl OdeSystem<3> for LorenzField {
    fn rhs(&self, y: &SVector<f64, 3>) -> Result<SVector<f64, 3>> {
        Ok(self.eval(y))
    }
}

/// Lorenz field together with one tangent vector: `(x, v)` with `v' = Df(x) v`.
#[derive(Debug, Clone, Copy)]
pub struct LorenzTangent(pub LorenzField);

impl OdeSystem<6> for LorenzTangent {
    fn rhs(&self, y: &SVector<f64, 6>) -> Result<SVector<f64, 6>> {
        let p = y.fixed_rows::<3>(0).into_owned();
        let v = y.fixed_rows::<3>(3).into_owned();
        let f = self.0.eval(&p);
        let dv = self.0.jacobian(&p) * v;
        Ok(SVector::<f64, 6>::from_iterator(
            f.iter().chain(dv.iter()).copied(),
        ))
    }
}

/// Largest Lyapunov exponent of the Lorenz flow by tangent-vector renormalisation
/// every `renorm_interval` time units after discarding `transient` time units.
pub fn lorenz_max_exponent(
    field: LorenzField,
    start: SVector<f64, 3>,
    transient: f64,
    duration: f64,
    renorm_interval: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let traj = integrate(&field, start, (0.0, transient), cfg)?;
    let p0 = traj.final_state().map(|s| s.1).unwrap_or(start);
    let sys = LorenzTangent(field);
    let mut y = SVector::<f64, 6>::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&p0);
    y[3] = 1.0;
    let n = (duration / renorm_interval).round() as usize;
    let mut sum = 0.0;
    for i in 0..n {
        let t0 = i as f64 * renorm_interval;
        let seg = integrate(&sys, y, (t0, t0 + renorm_interval), cfg)?;
        y = seg.final_state().expect("non-empty segment").1;
        let norm = y.fixed_rows::<3>(3).norm();
        sum += norm.ln();
        let scaled = y.fixed_rows::<3>(3) / norm;
        y.fixed_rows_mut::<3>(3).copy_from(&scaled);
    }
    Ok(sum / (n as f64 * renorm_interval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    type V2 = SVector<f64, 2>;

    fn rotation(y: &V2) -> Result<V2> {
        Ok(Vector2::new(-y[1], y[0]))
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(&rotation, Vector2::new(1.0, 0.0), (0.0, 10.0), &cfg).unwrap();
        let (t, y) = traj.final_state().unwrap();
        assert_eq!(t, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] - 10f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn backward_integration_returns() {
        let cfg = IntegratorConfig::default();
        let fw = integrate(&rotation, Vector2::new(1.0, 0.0), (0.0, 3.0), &cfg).unwrap();
        let y1 = fw.final_state().unwrap().1;
        let bw = integrate(&rotation, y1, (3.0, 0.0), &cfg).unwrap();
        let y0 = bw.final_state().unwrap().1;
        assert!((y0 - Vector2::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn dense_output_endpoints_are_exact_and_interior_accurate() {
        let cfg = IntegratorConfig::default().with_tolerance(1e-8);
        let traj = integrate(&rotation, Vector2::new(1.0, 0.0), (0.0, 5.0), &cfg).unwrap();
        for s in &traj.steps {
            assert_eq!(s.eval(s.t0), s.y0);
            assert_eq!(s.eval(s.t1), s.y1);
            let tm = 0.5 * (s.t0 + s.t1);
            let ym = s.eval(tm);
            assert!((ym[0] - tm.cos()).abs() < 1e-7);
        }
        let t = 2.345;
        assert!((traj.eval(t).unwrap()[1] - t.sin()).abs() < 1e-7);
    }

    #[test]
    fn deterministic() {
        let cfg = IntegratorConfig::default();
        let l = LorenzField::default();
        let a = integrate(&l, SVector::<f64, 3>::new(1.0, 1.0, 1.0), (0.0, 5.0), &cfg).unwrap();
        let b = integrate(&l, SVector::<f64, 3>::new(1.0, 1.0, 1.0), (0.0, 5.0), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_budget_exhaustion() {
        let cfg = IntegratorConfig {
            max_steps: 5,
            ..IntegratorConfig::default()
        };
        let err = integrate(&rotation, Vector2::new(1.0, 0.0), (0.0, 100.0), &cfg).unwrap_err();
        assert!(matches!(err, Error::StepCountExceeded { .. }));
    }

    #[test]
    fn linear_crossing_located() {
        // x' = 1: x(t) = t - 0.7 crosses zero at t = 0.7
        let sys = |_: &V2| -> Result<V2> { Ok(Vector2::new(1.0, 0.0)) };
        let cfg = IntegratorConfig {
            event_tol: 1e-12,
            max_step: 0.25,
            ..IntegratorConfig::default()
        };
        let mut st = Stepper::new(&sys, Vector2::new(-0.7, 0.0), 0.0, 1.0, cfg).unwrap();
        let ev = EventFn::plain(|y: &V2| y[0]);
        let c = locate_section_crossing(&mut st, &ev, CrossingDirection::Positive).unwrap();
        assert!((c.t - 0.7).abs() < 1e-12);
        assert!(c.residual.abs() < 1e-12);
    }

    #[test]
    fn direction_filter_skips_opposite_slope() {
        // x = sin t: downward crossing at pi, upward at 2 pi
        let cfg = IntegratorConfig {
            event_tol: 1e-12,
            ..IntegratorConfig::default()
        };
        let start = Vector2::new(0.0, 1.0); // (sin, cos)
        let ev = EventFn::plain(|y: &V2| y[0]);
        let mut st = Stepper::new(&rotation_sin, start, 0.0, 1.0, cfg).unwrap();
        let c = locate_section_crossing(&mut st, &ev, CrossingDirection::Positive).unwrap();
        assert!((c.t - 2.0 * std::f64::consts::PI).abs() < 1e-9);
        let mut st = Stepper::new(&rotation_sin, start, 0.0, 1.0, cfg).unwrap();
        let c = locate_section_crossing(&mut st, &ev, CrossingDirection::Negative).unwrap();
        assert!((c.t - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn start_near_level_is_not_a_crossing() {
        let cfg = IntegratorConfig {
            event_tol: 1e-12,
            ..IntegratorConfig::default()
        };
        let start = Vector2::new(0.0, 1.0);
        let tau = 2.0 * std::f64::consts::PI;
        // the start reads as a hair above the level, and backward stepping moves down through it
        let ev = EventFn::plain(|y: &V2| y[0] + 1e-16);
        let mut st = Stepper::new(&rotation_sin, start, 0.0, -1.0, cfg).unwrap();
        let c = locate_section_crossing(&mut st, &ev, CrossingDirection::Positive).unwrap();
        assert!((c.t + tau).abs() < 1e-9);
        // the angle reads as a hair below 2 pi, and forward stepping passes 2 pi at once
        let ev = EventFn::angular(|y: &V2| (y[0].atan2(y[1]) - 1e-16).rem_euclid(tau), tau);
        let mut st = Stepper::new(&rotation_sin, start, 0.0, 1.0, cfg).unwrap();
        let c = locate_section_crossing(&mut st, &ev, CrossingDirection::Positive).unwrap();
        assert!((c.t - tau).abs() < 1e-9);
    }

    fn rotation_sin(y: &V2) -> Result<V2> {
        // (s, c)' = (c, -s)
        Ok(Vector2::new(y[1], -y[0]))
    }

    #[test]
    fn angular_event_ignores_seam() {
        // phase = atan2 of a rotating vector; wraps at pi but the lift is continuous
        let cfg = IntegratorConfig {
            event_tol: 1e-11,
            ..IntegratorConfig::default()
        };
        let start = Vector2::new(0.0, 1.0);
        let ev = EventFn::angular(|y: &V2| y[0].atan2(y[1]) - 1.0, std::f64::consts::TAU);
        let mut st = Stepper::new(&rotation_sin, start, 0.0, 1.0, cfg).unwrap();
        // phase(t) = t; crossing of 1.0 at t = 1, then at 1 + 2 pi
        let c = locate_section_crossing(&mut st, &ev, CrossingDirection::Positive).unwrap();
        assert!((c.t - 1.0).abs() < 1e-9);
        let c = locate_section_crossing(&mut st, &ev, CrossingDirection::Positive).unwrap();
        assert!((c.t - 1.0 - std::f64::consts::TAU).abs() < 1e-9, "{}", c.t);
    }

    #[test]
    fn lorenz_field_identities() {
        let l = LorenzField::new(10.0, 28.0, 8.0 / 3.0);
        assert_eq!(
            l.eval(&SVector::<f64, 3>::zeros()),
            SVector::<f64, 3>::zeros()
        );
        let p = SVector::<f64, 3>::new(1.3, -2.0, 20.0);
        assert!((l.jacobian(&p).trace() - l.divergence()).abs() < 1e-14);
        for (s, r, b) in [(1.0, 2.0, 3.0), (5.0, 0.5, 0.1)] {
            let f = LorenzField::new(s, r, b);
            assert_eq!(
                f.eval(&SVector::<f64, 3>::zeros()),
                SVector::<f64, 3>::zeros()
            );
        }
    }
}
