//! Method of moving asymptotes for one constraint, design scaling and the
//! optimization loop.
//!
//! The problem solved is
//!
//! ```text
//! minimize   C(D) / C(D_0)
//! subject to V(D) / V_bar - 1 <= 0,   D_min <= D <= D_max
//! ```
//!
//! in scaled variables `x = D / s`, where the scale `s` puts positions,
//! angle, length and thicknesses on comparable footing.

use serde::{Deserialize, Serialize};

use crate::components::{ComponentParams, ComponentSet, N_VARS};

#[derive(Debug, thiserror::Error)]
pub enum MmaError {
    #[error("non-finite {0} passed to the MMA update")]
    NonFinite(&'static str),
    #[error("constraint is violated ({0:e}) but its gradient is zero; the design cannot move toward feasibility")]
    ZeroConstraintGradient(f64),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("empty design")]
    Empty,
}

/// MMA constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmaSettings {
    /// Largest change of a scaled variable per iteration.
    pub move_limit: f64,
    pub asyinit: f64,
    pub asyincr: f64,
    pub asydecr: f64,
    pub albefa: f64,
    pub raa0: f64,
    /// Closest and farthest asymptote distance, as fractions of the range.
    pub asymin: f64,
    pub asymax: f64,
    /// Per-variable move limits: a variable whose step reverses direction
    /// has its limit multiplied by `move_shrink`, one that keeps its
    /// direction by `move_grow`, capped at `move_limit`. 1 disables either.
    pub move_shrink: f64,
    pub move_grow: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        Self {
            move_limit: 0.2,
            asyinit: 0.5,
            asyincr: 1.2,
            asydecr: 0.7,
            albefa: 0.1,
            raa0: 1e-5,
            asymin: 0.01,
            asymax: 10.0,
            move_shrink: 1.0,
            move_grow: 1.0,
        }
    }
}

/// MMA state for problems with a single inequality constraint.
#[derive(Debug, Clone)]
pub struct Mma {
    settings: MmaSettings,
    xmin: Vec<f64>,
    xmax: Vec<f64>,
    xold1: Option<Vec<f64>>,
    xold2: Option<Vec<f64>>,
    low: Vec<f64>,
    upp: Vec<f64>,
    moves: Vec<f64>,
    updates: usize,
}

impl Mma {
    pub fn new(xmin: Vec<f64>, xmax: Vec<f64>, settings: MmaSettings) -> Result<Self, MmaError> {
        if xmin.is_empty() {
            return Err(MmaError::Empty);
        }
        if xmax.len() != xmin.len() {
            return Err(MmaError::Length {
                what: "xmax",
                got: xmax.len(),
                expected: xmin.len(),
            });
        }
        let n = xmin.len();
        Ok(Self {
            settings,
            xmin,
            xmax,
            xold1: None,
            xold2: None,
            low: vec![0.0; n],
            upp: vec![0.0; n],
            moves: vec![settings.move_limit; n],
            updates: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.xmin.len()
    }

    /// Returns the next iterate from the current point `x`, objective
    /// gradient `df0`, constraint value `g` and constraint gradient `dg`.
    pub fn update(&mut self, x: &[f64], df0: &[f64], g: f64, dg: &[f64]) -> Result<Vec<f64>, MmaError> {
        let n = self.n();
        for (what, v) in [("x", x), ("objective gradient", df0), ("constraint gradient", dg)] {
            if v.len() != n {
                return Err(MmaError::Length {
                    what,
                    got: v.len(),
                    expected: n,
                });
            }
            if v.iter().any(|a| !a.is_finite()) {
                return Err(MmaError::NonFinite(what));
            }
        }
        if !g.is_finite() {
            return Err(MmaError::NonFinite("constraint value"));
        }
        if g > 0.0 && dg.iter().all(|d| *d == 0.0) {
            return Err(MmaError::ZeroConstraintGradient(g));
        }
        let s = self.settings;
        let range: Vec<f64> = (0..n).map(|j| (self.xmax[j] - self.xmin[j]).max(1e-5)).collect();

        // asymptotes
        match (&self.xold1, &self.xold2) {
            (Some(x1), Some(x2)) if self.updates >= 2 => {
                for j in 0..n {
                    let z = (x[j] - x1[j]) * (x1[j] - x2[j]);
                    let factor = if z < 0.0 {
                        s.asydecr
                    } else if z > 0.0 {
                        s.asyincr
                    } else {
                        1.0
                    };
                    let m = if z < 0.0 {
                        s.move_shrink
                    } else if z > 0.0 {
                        s.move_grow
                    } else {
                        1.0
                    };
                    self.moves[j] = (self.moves[j] * m).min(s.move_limit);
                    self.low[j] = x[j] - factor * (x1[j] - self.low[j]);
                    self.upp[j] = x[j] + factor * (self.upp[j] - x1[j]);
                    self.low[j] = self.low[j].clamp(x[j] - s.asymax * range[j], x[j] - s.asymin * range[j]);
                    self.upp[j] = self.upp[j].clamp(x[j] + s.asymin * range[j], x[j] + s.asymax * range[j]);
                }
            }
            _ => {
                for j in 0..n {
                    self.low[j] = x[j] - s.asyinit * range[j];
                    self.upp[j] = x[j] + s.asyinit * range[j];
                }
            }
        }

        // move limits
        let mut alpha = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for j in 0..n {
            alpha[j] = self
                .xmin[j]
                .max(self.low[j] + s.albefa * (x[j] - self.low[j]))
                .max(x[j] - self.moves[j]);
            beta[j] = self
                .xmax[j]
                .min(self.upp[j] - s.albefa * (self.upp[j] - x[j]))
                .min(x[j] + self.moves[j]);
            if alpha[j] > beta[j] {
                let m = 0.5 * (alpha[j] + beta[j]);
                alpha[j] = m;
                beta[j] = m;
            }
        }

        // convex separable approximations
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut p1 = vec![0.0; n];
        let mut q1 = vec![0.0; n];
        let mut b = -g;
        for j in 0..n {
            let ux = self.upp[j] - x[j];
            let xl = x[j] - self.low[j];
            let reg = s.raa0 / range[j];
            let (pp, qq) = (df0[j].max(0.0), (-df0[j]).max(0.0));
            let r = 1e-3 * (pp + qq) + reg;
            p0[j] = (pp + r) * ux * ux;
            q0[j] = (qq + r) * xl * xl;
            let (pp, qq) = (dg[j].max(0.0), (-dg[j]).max(0.0));
            let r = 1e-3 * (pp + qq) + reg;
            p1[j] = (pp + r) * ux * ux;
            q1[j] = (qq + r) * xl * xl;
            b += p1[j] / ux + q1[j] / xl;
        }

        let x_of = |lam: f64| -> Vec<f64> {
            (0..n)
                .map(|j| {
                    let sp = (p0[j] + lam * p1[j]).sqrt();
                    let sq = (q0[j] + lam * q1[j]).sqrt();
                    let xj = (sp * self.low[j] + sq * self.upp[j]) / (sp + sq);
                    xj.clamp(alpha[j], beta[j])
                })
                .collect()
        };
        let g_of = |xs: &[f64]| -> f64 {
            (0..n)
                .map(|j| p1[j] / (self.upp[j] - xs[j]) + q1[j] / (xs[j] - self.low[j]))
                .sum::<f64>()
                - b
        };

        let mut x_new = x_of(0.0);
        if g_of(&x_new) > 0.0 {
            let mut hi = 1.0;
            while g_of(&x_of(hi)) > 0.0 && hi < 1e30 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g_of(&x_of(mid)) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * hi {
                    break;
                }
            }
            x_new = x_of(hi);
        }

        self.xold2 = self.xold1.take();
        self.xold1 = Some(x.to_vec());
        self.updates += 1;
        Ok(x_new)
    }
}

/// Maps component designs to scaled MMA variables and back, with bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    shape: Vec<usize>,
    scale: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Minimum half-thickness per component.
    t_min: Vec<f64>,
}

impl DesignSpace {
    /// `dims[k]` is the `(W, H)` of patch `k`'s chart rectangle.
    pub fn new(shape: &[usize], dims: &[(f64, f64)]) -> Self {
        let mut scale = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut t_min = Vec::new();
        for (&n, &(w, h)) in shape.iter().zip(dims) {
            let small = w.min(h);
            let floor = 0.01 * small;
            let diag = w.hypot(h);
            let s = [w, h, std::f64::consts::PI, w.max(h), 0.1 * small, 0.1 * small, 0.1 * small];
            let lo = [
                0.0,
                0.0,
                -std::f64::consts::PI,
                floor,
                floor,
                floor,
                floor,
            ];
            let hi = [
                w,
                h,
                std::f64::consts::PI,
                0.5 * diag,
                0.2 * small,
                0.2 * small,
                0.2 * small,
            ];
            for _ in 0..n {
                scale.extend_from_slice(&s);
                lower.extend_from_slice(&lo);
                upper.extend_from_slice(&hi);
                t_min.push(floor);
            }
        }
        Self {
            shape: shape.to_vec(),
            scale,
            lower,
            upper,
            t_min,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_vars(&self) -> usize {
        self.scale.len()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Design bounds in physical units.
    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn to_scaled(&self, d: &[f64]) -> Vec<f64> {
        d.iter().zip(&self.scale).map(|(v, s)| v / s).collect()
    }

    pub fn from_scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(v, s)| v * s).collect()
    }

    pub fn scaled_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.to_scaled(&self.lower), self.to_scaled(&self.upper))
    }

    /// Clamps every variable into its bounds.
    pub fn clamp(&self, d: &mut [f64]) {
        for ((v, lo), hi) in d.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Raises `t3` where the quadratic profile dips below the thickness floor.
    pub fn repair_profiles(&self, d: &mut [f64]) {
        for (i, chunk) in d.chunks_mut(N_VARS).enumerate() {
            let t_min = self.t_min[i];
            let mut c = ComponentParams::from_slice(chunk);
            if c.profile_min() >= t_min {
                continue;
            }
            let mut lo = c.t3;
            let mut hi = c.t1.max(c.t2).max(t_min);
            c.t3 = hi;
            if c.profile_min() < t_min {
                chunk[6] = hi;
                continue;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                c.t3 = mid;
                if c.profile_min() >= t_min {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            chunk[6] = hi;
        }
    }

    pub fn components(&self, d: &[f64]) -> crate::Result<ComponentSet> {
        Ok(ComponentSet::from_flat(&self.shape, d)?)
    }
}

/// Responses and gradients of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub compliance: f64,
    pub volume_fraction: f64,
    pub compliance_gradient: Vec<f64>,
    pub volume_gradient: Vec<f64>,
    pub band: Option<BandStats>,
}

/// Narrow-band statistics reported per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandStats {
    pub kept_elements: usize,
    pub kept_dofs: usize,
    pub active_components: usize,
    pub fallback: bool,
}

/// Anything the optimizer can evaluate.
pub trait DesignProblem {
    fn evaluate(&mut self, design: &[f64]) -> crate::Result<Evaluated>;
}

/// Loop controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSettings {
    pub tol: f64,
    pub max_iterations: usize,
    pub volume_bound: f64,
    pub mma: MmaSettings,
}

/// Slack on the volume bound accepted at convergence.
pub const VOLUME_SLACK: f64 = 1e-6;

/// Stopping test.
pub fn converged(iteration: usize, max_scaled_delta: f64, volume_fraction: f64, settings: &LoopSettings) -> bool {
    iteration >= 1 && max_scaled_delta < settings.tol && volume_fraction <= settings.volume_bound + VOLUME_SLACK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
}

/// One line of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub compliance: f64,
    pub volume_fraction: f64,
    /// `NaN` on the first row.
    pub max_scaled_delta: f64,
    pub band: Option<BandStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub design: Vec<f64>,
    pub history: Vec<HistoryRow>,
    pub status: Status,
}

/// Runs the optimization from `initial`. `observer` is called after every
/// evaluation with the history row and the evaluated design.
pub fn optimize(
    problem: &mut dyn DesignProblem,
    space: &DesignSpace,
    initial: &[f64],
    settings: &LoopSettings,
    observer: &mut dyn FnMut(&HistoryRow, &[f64]) -> crate::Result<()>,
) -> crate::Result<OptimizationResult> {
    if initial.len() != space.n_vars() {
        return Err(MmaError::Length {
            what: "initial design",
            got: initial.len(),
            expected: space.n_vars(),
        }
        .into());
    }
    let (xmin, xmax) = space.scaled_bounds();
    let mut mma = Mma::new(xmin, xmax, settings.mma)?;
    let mut d = initial.to_vec();
    space.clamp(&mut d);
    space.repair_profiles(&mut d);
    let mut x = space.to_scaled(&d);
    let mut x_prev: Option<Vec<f64>> = None;
    let mut c0 = None;
    let mut history = Vec::new();
    for k in 0..=settings.max_iterations {
        let ev = problem.evaluate(&d).map_err(|e| e.at_iteration(k, "evaluation"))?;
        if !ev.compliance.is_finite() || !(ev.compliance > 0.0) {
            return Err(crate::Error::Invalid(format!("compliance {} is not positive", ev.compliance)).at_iteration(k, "evaluation"));
        }
        let c_ref = *c0.get_or_insert(ev.compliance);
        let delta = match &x_prev {
            None => f64::NAN,
            Some(p) => x.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        };
        let row = HistoryRow {
            iteration: k,
            compliance: ev.compliance,
            volume_fraction: ev.volume_fraction,
            max_scaled_delta: delta,
            band: ev.band,
        };
        log::info!(
            "iter {k:4}  C {:.6e}  V {:.4}  dx {:.3e}",
            ev.compliance,
            ev.volume_fraction,
            delta
        );
        history.push(row);
        observer(&row, &d)?;
        if converged(k, delta, ev.volume_fraction, settings) {
            return Ok(OptimizationResult {
                design: d,
                history,
                status: Status::Converged,
            });
        }
        if k == settings.max_iterations {
            break;
        }
        let scale = space.scale();
        let df0: Vec<f64> = ev
            .compliance_gradient
            .iter()
            .zip(scale)
            .map(|(g, s)| g * s / c_ref)
            .collect();
        let g = ev.volume_fraction / settings.volume_bound - 1.0;
        let dg: Vec<f64> = ev
            .volume_gradient
            .iter()
            .zip(scale)
            .map(|(g, s)| g * s / settings.volume_bound)
            .collect();
        let x_new = mma.update(&x, &df0, g, &dg).map_err(|e| crate::Error::from(e).at_iteration(k, "update"))?;
        let mut d_new = space.from_scaled(&x_new);
        space.clamp(&mut d_new);
        space.repair_profiles(&mut d_new);
        x_prev = Some(std::mem::replace(&mut x, space.to_scaled(&d_new)));
        d = d_new;
    }
    Ok(OptimizationResult {
        design: d,
        history,
        status: Status::MaxIterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_step(mma: &mut Mma, x: &[f64]) -> Vec<f64> {
        // minimize sum (x - 2)^2 subject to sum x <= 1
        let df: Vec<f64> = x.iter().map(|v| 2.0 * (v - 2.0)).collect();
        let g = x.iter().sum::<f64>() - 1.0;
        mma.update(x, &df, g, &vec![1.0; x.len()]).unwrap()
    }

    #[test]
    fn mma_solves_a_constrained_quadratic() {
        let n = 4;
        let mut mma = Mma::new(vec![-5.0; n], vec![5.0; n], MmaSettings { move_limit: 1.0, ..Default::default() }).unwrap();
        let mut x = vec![0.0; n];
        for _ in 0..200 {
            x = quadratic_step(&mut mma, &x);
        }
        for v in &x {
            assert!((v - 0.25).abs() < 1e-4, "{x:?}");
        }
    }

    #[test]
    fn mma_respects_bounds_and_move_limit() {
        let mut mma = Mma::new(vec![0.0; 3], vec![1.0; 3], MmaSettings::default()).unwrap();
        let x = vec![0.5; 3];
        let x1 = mma.update(&x, &[-1.0, 1.0, 0.0], -1.0, &[0.0, 0.0, 0.0]).unwrap();
        for (a, b) in x1.iter().zip(&x) {
            assert!((a - b).abs() <= 0.2 + 1e-12);
            assert!((0.0..=1.0).contains(a));
        }
        assert!(x1[0] > 0.5 && x1[1] < 0.5);
    }

    #[test]
    fn adaptive_move_damps_oscillation() {
        // minimizing |x - 0.3| from linear information alone overshoots back and forth
        let run = |move_shrink| {
            let settings = MmaSettings { move_limit: 1.0, move_shrink, move_grow: 1.2, ..Default::default() };
            let mut mma = Mma::new(vec![-10.0], vec![10.0], settings).unwrap();
            let mut x = vec![5.0];
            for _ in 0..60 {
                let g = if x[0] > 0.3 { 1.0 } else { -1.0 };
                x = mma.update(&x, &[g], -1.0, &[0.0]).unwrap();
            }
            (x[0] - 0.3).abs()
        };
        assert!(run(0.7) < 1e-4);
        assert!(run(0.7) < run(1.0));
    }

    #[test]
    fn mma_rejects_bad_input() {
        let mut mma = Mma::new(vec![0.0; 2], vec![1.0; 2], MmaSettings::default()).unwrap();
        assert!(matches!(
            mma.update(&[0.5, 0.5], &[f64::NAN, 0.0], 0.0, &[1.0, 1.0]),
            Err(MmaError::NonFinite(_))
        ));
        assert!(matches!(
            mma.update(&[0.5, 0.5], &[1.0, 0.0], 0.5, &[0.0, 0.0]),
            Err(MmaError::ZeroConstraintGradient(_))
        ));
        assert!(matches!(mma.update(&[0.5], &[1.0], 0.0, &[0.0]), Err(MmaError::Length { .. })));
        assert!(Mma::new(vec![], vec![], MmaSettings::default()).is_err());
    }

    #[test]
    fn convergence_test() {
        let s = LoopSettings {
            tol: 1e-4,
            max_iterations: 10,
            volume_bound: 0.4,
            mma: MmaSettings::default(),
        };
        assert!(!converged(0, 0.0, 0.3, &s));
        assert!(!converged(1, f64::NAN, 0.3, &s));
        assert!(converged(1, 5e-5, 0.4 + 5e-7, &s));
        assert!(!converged(1, 5e-5, 0.41, &s));
        assert!(!converged(3, 2e-4, 0.3, &s));
    }

    #[test]
    fn scaling_round_trip_and_bounds() {
        let space = DesignSpace::new(&[2, 1], &[(2.0, 1.0), (3.0, 3.0)]);
        assert_eq!(space.n_vars(), 21);
        let d: Vec<f64> = (0..21).map(|i| 0.1 + 0.01 * i as f64).collect();
        let back = space.from_scaled(&space.to_scaled(&d));
        for (a, b) in d.iter().zip(&back) {
            assert!((a - b).abs() < 1e-15);
        }
        let (lo, hi) = space.bounds();
        assert_eq!(lo[3], 0.01);
        assert_eq!(hi[4], 0.2);
        assert!((hi[3] - 0.5 * 5f64.sqrt()).abs() < 1e-15);
        assert!((space.scale()[14 + 4] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn profile_repair_lifts_t3() {
        let space = DesignSpace::new(&[1], &[(1.0, 1.0)]);
        let mut d = vec![0.5, 0.5, 0.0, 0.3, 0.05, 0.05, 0.0];
        space.clamp(&mut d);
        space.repair_profiles(&mut d);
        let c = ComponentParams::from_slice(&d);
        assert!(c.profile_min() >= 0.01 - 1e-14);
        assert!(c.t3 <= 0.05);
        // a healthy component is untouched
        let mut ok = vec![0.5, 0.5, 0.0, 0.3, 0.05, 0.05, 0.04];
        space.repair_profiles(&mut ok);
        assert_eq!(ok[6], 0.04);
    }

    struct Quadratic;

    impl DesignProblem for Quadratic {
        fn evaluate(&mut self, d: &[f64]) -> crate::Result<Evaluated> {
            // compliance falls as the first thickness grows, volume grows with it
            let c = 1.0 / d[4] + (d[0] - 0.3).powi(2);
            let mut dc = vec![0.0; d.len()];
            dc[4] = -1.0 / (d[4] * d[4]);
            dc[0] = 2.0 * (d[0] - 0.3);
            let mut dv = vec![0.0; d.len()];
            dv[4] = 1.0;
            Ok(Evaluated {
                compliance: c,
                volume_fraction: d[4],
                compliance_gradient: dc,
                volume_gradient: dv,
                band: None,
            })
        }
    }

    #[test]
    fn loop_converges_to_active_bound() {
        let space = DesignSpace::new(&[1], &[(1.0, 1.0)]);
        let settings = LoopSettings {
            tol: 1e-4,
            max_iterations: 300,
            volume_bound: 0.2,
            mma: MmaSettings::default(),
        };
        let init = [0.5, 0.5, 0.0, 0.3, 0.05, 0.05, 0.05];
        let mut rows = 0;
        let res = optimize(&mut Quadratic, &space, &init, &settings, &mut |_, _| {
            rows += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(res.status, Status::Converged);
        assert_eq!(rows, res.history.len());
        assert!(res.history[0].max_scaled_delta.is_nan());
        assert!((res.design[4] - 0.2).abs() < 1e-3, "{:?}", res.design);
        assert!((res.design[0] - 0.3).abs() < 1e-2);
    }

    #[test]
    fn zero_iterations_returns_initial_design() {
        let space = DesignSpace::new(&[1], &[(1.0, 1.0)]);
        let settings = LoopSettings {
            tol: 1e-4,
            max_iterations: 0,
            volume_bound: 0.2,
            mma: MmaSettings::default(),
        };
        let init = [0.5, 0.5, 0.0, 0.3, 0.05, 0.05, 0.05];
        let res = optimize(&mut Quadratic, &space, &init, &settings, &mut |_, _| Ok(())).unwrap();
        assert_eq!(res.status, Status::MaxIterations);
        assert_eq!(res.design, init.to_vec());
        assert_eq!(res.history.len(), 1);
    }
}
