//! Moving morphable components in a flat chart: topology description
//! function (TDF), its design gradient, and Kreisselmeier-Steinhauser (K-S)
//! smooth maximum aggregation.
//!
//! A component is a bar of half-length `L` centered at `(x0, y0)`, rotated by
//! `theta`, with a quadratic half-thickness profile through `t1` (at `x' = -L`),
//! `t3` (at the center) and `t2` (at `x' = L`). Its TDF is
//!
//! ```text
//! phi = 1 - ((x'/L)^6 + (y'/f(x'))^6)^(1/6)
//! ```
//!
//! which is positive inside, zero on the boundary and negative outside.

use serde::{Deserialize, Serialize};

/// Number of design variables per component.
pub const N_VARS: usize = 7;

/// Names of the per-component variables in flattening order.
pub const VAR_NAMES: [&str; N_VARS] = ["x0", "y0", "theta", "L", "t1", "t2", "t3"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ComponentError {
    #[error("half-thickness profile f({x_prime}) = {f} is not positive inside the component span")]
    NonPositiveProfile { x_prime: f64, f: f64 },
    #[error("half-length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("TDF gradient is undefined at the component center")]
    SingularOrigin,
    #[error("K-S aggregation of an empty set")]
    EmptyKs,
    #[error("design vector has length {got}, expected {expected}")]
    DesignLength { got: usize, expected: usize },
}

/// Design variables of one component, in chart units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub x0: f64,
    pub y0: f64,
    pub theta: f64,
    /// Half-length.
    #[serde(rename = "L")]
    pub length: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl ComponentParams {
    pub fn to_array(&self) -> [f64; N_VARS] {
        [self.x0, self.y0, self.theta, self.length, self.t1, self.t2, self.t3]
    }

    pub fn from_slice(d: &[f64]) -> Self {
        Self {
            x0: d[0],
            y0: d[1],
            theta: d[2],
            length: d[3],
            t1: d[4],
            t2: d[5],
            t3: d[6],
        }
    }

    fn profile_coefficients(&self) -> (f64, f64) {
        let l = self.length;
        let a = (self.t1 + self.t2 - 2.0 * self.t3) / (2.0 * l * l);
        let b = (self.t2 - self.t1) / (2.0 * l);
        (a, b)
    }

    /// Quadratic half-thickness profile `f(x')`, exact at `-L`, `0`, `L`.
    pub fn profile(&self, x_prime: f64) -> f64 {
        let (a, b) = self.profile_coefficients();
        a * x_prime * x_prime + b * x_prime + self.t3
    }

    /// Minimum of the profile over the span `[-L, L]`.
    pub fn profile_min(&self) -> f64 {
        let (a, b) = self.profile_coefficients();
        let mut m = self.t1.min(self.t2);
        if a > 0.0 {
            let xs = -b / (2.0 * a);
            if xs.abs() < self.length {
                m = m.min(self.profile(xs));
            }
        }
        m
    }

    /// Local frame coordinates `(x', y')` of a chart point.
    pub fn local(&self, p: [f64; 2]) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = p[0] - self.x0;
        let dy = p[1] - self.y0;
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Components of all patches.
///
/// The flattened design vector is patch-major, component-minor, with the
/// fields of each component in the order `x0, y0, theta, L, t1, t2, t3`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComponentSet {
    pub patches: Vec<Vec<ComponentParams>>,
}

impl ComponentSet {
    pub fn new(patches: Vec<Vec<ComponentParams>>) -> Self {
        Self { patches }
    }

    /// Component counts per patch.
    pub fn shape(&self) -> Vec<usize> {
        self.patches.iter().map(Vec::len).collect()
    }

    pub fn n_components(&self) -> usize {
        self.patches.iter().map(Vec::len).sum()
    }

    pub fn n_vars(&self) -> usize {
        N_VARS * self.n_components()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.patches
            .iter()
            .flatten()
            .flat_map(|c| c.to_array())
            .collect()
    }

    /// Rebuilds a set with the given per-patch counts from a flat vector.
    pub fn from_flat(shape: &[usize], d: &[f64]) -> Result<Self, ComponentError> {
        let expected = N_VARS * shape.iter().sum::<usize>();
        if d.len() != expected {
            return Err(ComponentError::DesignLength {
                got: d.len(),
                expected,
            });
        }
        let mut chunks = d.chunks_exact(N_VARS);
        let patches = shape
            .iter()
            .map(|&n| (0..n).map(|_| ComponentParams::from_slice(chunks.next().unwrap())).collect())
            .collect();
        Ok(Self { patches })
    }

    /// Global index of the first component of each patch.
    pub fn patch_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.patches
            .iter()
            .map(|p| {
                let o = acc;
                acc += p.len();
                o
            })
            .collect()
    }

    /// Iterates `(patch, global component index, params)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &ComponentParams)> {
        self.patches
            .iter()
            .enumerate()
            .flat_map(|(k, p)| p.iter().map(move |c| (k, c)))
            .enumerate()
            .map(|(i, (k, c))| (k, i, c))
    }
}

/// Evaluated profile and the branch it came from.
struct Profile {
    f: f64,
    /// `df/dx'`.
    slope: f64,
    /// `df/d(L, t1, t2, t3)` at fixed `x'`.
    dparams: [f64; 4],
}

fn eval_profile(c: &ComponentParams, xp: f64) -> Result<Profile, ComponentError> {
    let l = c.length;
    if !(l > 0.0) {
        return Err(ComponentError::NonPositiveLength(l));
    }
    let (a, b) = c.profile_coefficients();
    let f = c.profile(xp);
    let inside = xp.abs() <= l;
    if inside && !(f > 0.0) {
        return Err(ComponentError::NonPositiveProfile { x_prime: xp, f });
    }
    // Beyond the span the quadratic may turn negative; floor it at the thinner
    // end so phi stays finite and negative there.
    let floor = c.t1.min(c.t2);
    if inside || f >= floor {
        let q = xp * xp / (l * l);
        let r = xp / l;
        return Ok(Profile {
            f,
            slope: 2.0 * a * xp + b,
            dparams: [
                -(c.t1 + c.t2 - 2.0 * c.t3) * xp * xp / (l * l * l) - (c.t2 - c.t1) * xp / (2.0 * l * l),
                0.5 * q - 0.5 * r,
                0.5 * q + 0.5 * r,
                1.0 - q,
            ],
        });
    }
    if !(floor > 0.0) {
        return Err(ComponentError::NonPositiveProfile { x_prime: xp, f: floor });
    }
    let dparams = if c.t1 <= c.t2 {
        [0.0, 1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0, 0.0]
    };
    Ok(Profile {
        f: floor,
        slope: 0.0,
        dparams,
    })
}

/// Six-norm of `(a, b)` computed without overflow.
fn norm6(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let (x, y) = (a / m, b / m);
    m * (x.powi(6) + y.powi(6)).powf(1.0 / 6.0)
}

/// TDF of component `c` at chart point `p`.
pub fn component_tdf(p: [f64; 2], c: &ComponentParams) -> Result<f64, ComponentError> {
    let (xp, yp) = c.local(p);
    let prof = eval_profile(c, xp)?;
    Ok(1.0 - norm6(xp / c.length, yp / prof.f))
}

/// TDF value and its gradient with respect to `(x0, y0, theta, L, t1, t2, t3)`.
pub fn component_tdf_and_grad(p: [f64; 2], c: &ComponentParams) -> Result<(f64, [f64; N_VARS]), ComponentError> {
    let (s, co) = c.theta.sin_cos();
    let (xp, yp) = c.local(p);
    let prof = eval_profile(c, xp)?;
    let l = c.length;
    let a = xp / l;
    let b = yp / prof.f;
    let n = norm6(a, b);
    if n == 0.0 {
        return Err(ComponentError::SingularOrigin);
    }
    let wa = (a / n).powi(5);
    let wb = (b / n).powi(5);

    // derivatives of the local coordinates with respect to x0, y0, theta
    let dxp = [-co, -s, yp];
    let dyp = [s, -co, -xp];
    let mut g = [0.0; N_VARS];
    for k in 0..3 {
        let da = dxp[k] / l;
        let df = prof.slope * dxp[k];
        let db = dyp[k] / prof.f - yp * df / (prof.f * prof.f);
        g[k] = -(wa * da + wb * db);
    }
    // L enters A directly and f through its coefficients
    let da_dl = -xp / (l * l);
    let db_dl = -yp * prof.dparams[0] / (prof.f * prof.f);
    g[3] = -(wa * da_dl + wb * db_dl);
    for k in 0..3 {
        let db = -yp * prof.dparams[k + 1] / (prof.f * prof.f);
        g[4 + k] = -wb * db;
    }
    Ok((1.0 - n, g))
}

/// Gradient of [`component_tdf`] with respect to the seven design variables.
pub fn component_tdf_grad(p: [f64; 2], c: &ComponentParams) -> Result<[f64; N_VARS], ComponentError> {
    component_tdf_and_grad(p, c).map(|(_, g)| g)
}

/// Smooth maximum `ln(sum exp(l v_i)) / l`, evaluated in shifted form.
pub fn ks_max(values: &[f64], l: f64) -> Result<f64, ComponentError> {
    let m = values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(ComponentError::EmptyKs);
    }
    let sum: f64 = values.iter().map(|v| (l * (v - m)).exp()).sum();
    Ok(m + sum.ln() / l)
}

/// Softmax weights `d ks_max / d v_i`; non-negative and summing to one.
pub fn ks_max_grad(values: &[f64], l: f64) -> Result<Vec<f64>, ComponentError> {
    ks_max_with_weights(values, l).map(|(_, w)| w)
}

/// K-S value and weights from the same shifted evaluation.
pub fn ks_max_with_weights(values: &[f64], l: f64) -> Result<(f64, Vec<f64>), ComponentError> {
    if values.is_empty() {
        return Err(ComponentError::EmptyKs);
    }
    let m = values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = values.iter().map(|v| (l * (v - m)).exp()).collect();
    let sum: f64 = w.iter().sum();
    for x in &mut w {
        *x /= sum;
    }
    Ok((m + sum.ln() / l, w))
}
