//! Moment functions φ̃_k, the normalized pair (φ₁, φ₂), the operator 𝓛 by
//! finite differences and modified moments of measures.
//!
//! Every moment function here is a multiple of the double integral
//! I[g](x) = ∫₀^x (y²m(y))⁻¹ ∫₀^y m(ξ) g(ξ) dξ dy, which satisfies 𝓛 I[g] = −g/4.
//! I[g] is tabulated once per source g on a log grid, with its exact
//! derivative K(y) = (y²m(y))⁻¹∫₀^y m g stored for Hermite interpolation.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infdiv::ExponentFn;
use crate::quad::{gk21, integrate_breaks, integrate_to_inf, log_breaks, QuadConfig};
use crate::specfun::{bw, laplace_weighted, upper_incomplete_gamma_scaled, Order, Params, Route};
use crate::spectral::DiscreteMeasure;

/// Highest moment order supported.
pub const K_MAX: usize = 4;

const GRID_LO: f64 = 1e-3;
const GRID_HI: f64 = 1e4;
const GRID_STEP: f64 = 0.01;
// below this K(y) = y g(y) (1 + O(y²)) to double precision
const K_SERIES_BELOW: f64 = 1e-5;

type Source = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tabulated I[g] with derivative, for one source g.
pub struct Profile {
    p: Params,
    src: Source,
    xs: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Profile").field("alpha", &self.p.alpha).field("nodes", &self.xs.len()).finish()
    }
}

fn inner_cfg() -> QuadConfig {
    QuadConfig { abs_tol: 1e-300, rel_tol: 1e-13, max_subdivisions: 2000, truncation_tail_tol: 1e-16 }
}

/// K(y) = y⁻² ∫₀^y exp(ln m(ξ) − ln m(y)) g(ξ) dξ, integrated in s = y − ξ.
fn k_of(p: &Params, g: &dyn Fn(f64) -> f64, y: f64) -> Result<f64> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    if y < K_SERIES_BELOW {
        return Ok(y * g(y));
    }
    let e = 1.0 - 4.0 * p.alpha;
    let y2 = y * y;
    // ξ below this contributes less than e^{−745} relative
    let xi_min = 1.0 / (1490.0 + 1.0 / y2).sqrt();
    let s_max = y - xi_min;
    let mut breaks = vec![0.0];
    let c = y2 * y;
    let mut s = 0.25 * c;
    while s < 0.5 * s_max.min(y) {
        breaks.push(s);
        s *= 2.0;
    }
    if s_max > 0.5 * y {
        // geometric panels in ξ down to ξ_min
        let lb = log_breaks(xi_min, 0.5 * y);
        for xi in lb.iter().rev() {
            let sv = y - xi;
            if sv > *breaks.last().unwrap() {
                breaks.push(sv);
            }
        }
    }
    if s_max > *breaks.last().unwrap() {
        breaks.push(s_max);
    }
    let r = integrate_breaks(
        |s: f64| {
            let xi = y - s;
            let ex = -s * (2.0 * y - s) / (2.0 * xi * xi * y2) + e * (-s / y).ln_1p();
            if ex < -745.0 {
                0.0
            } else {
                ex.exp() * g(xi)
            }
        },
        &breaks,
        &inner_cfg(),
    )?;
    Ok(r.value / y2)
}

impl Profile {
    fn build(p: &Params, src: Source) -> Result<Self> {
        let n = ((GRID_HI / GRID_LO).ln() / GRID_STEP).round() as usize;
        let xs: Vec<f64> = (0..=n).map(|i| GRID_LO * (i as f64 * GRID_STEP).exp()).collect();
        let g = src.clone();
        let d: Vec<f64> = xs.par_iter().map(|&y| k_of(p, &*g, y)).collect::<Result<_>>()?;
        let incr: Vec<f64> = xs
            .par_windows(2)
            .map(|w| {
                let mut fail = None;
                let (v, _, _) = gk21(
                    &mut |y: f64| match k_of(p, &*g, y) {
                        Ok(k) => k,
                        Err(e) => {
                            fail.get_or_insert(e);
                            0.0
                        }
                    },
                    w[0],
                    w[1],
                );
                match fail {
                    Some(e) => Err(e),
                    None => Ok(v),
                }
            })
            .collect::<Result<_>>()?;
        let start = integrate_breaks(
            |y: f64| k_of(p, &*g, y).unwrap_or(f64::NAN),
            &[0.0, 0.25 * GRID_LO, 0.5 * GRID_LO, GRID_LO],
            &inner_cfg(),
        )?
        .value;
        if !start.is_finite() {
            return Err(Error::NonConvergence("moment profile start value".into()));
        }
        let mut v = Vec::with_capacity(xs.len());
        let mut acc = start;
        v.push(acc);
        for dv in incr {
            acc += dv;
            v.push(acc);
        }
        Ok(Profile { p: *p, src, xs, v, d })
    }

    fn k(&self, y: f64) -> Result<f64> {
        k_of(&self.p, &*self.src, y)
    }

    fn locate(&self, x: f64) -> usize {
        let i = ((x / GRID_LO).ln() / GRID_STEP).floor() as usize;
        i.min(self.xs.len() - 2)
    }

    /// I[g](x).
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if x < GRID_LO {
            let r = integrate_breaks(|y: f64| self.k(y).unwrap_or(f64::NAN), &[0.0, 0.5 * x, x], &inner_cfg())?;
            return Ok(r.value);
        }
        let hi = *self.xs.last().unwrap();
        if x > hi {
            let r = integrate_breaks(|y: f64| self.k(y).unwrap_or(f64::NAN), &log_breaks(hi, x), &inner_cfg())?;
            return Ok(self.v[self.xs.len() - 1] + r.value);
        }
        Ok(self.hermite(x).0)
    }

    /// Value for use inside other sources: interpolated on the grid and
    /// extrapolated by the local power law below it.
    fn eval_fast(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x < GRID_LO {
            let slope = GRID_LO * self.d[0] / self.v[0];
            return self.v[0] * (x / GRID_LO).powf(slope);
        }
        if x > *self.xs.last().unwrap() {
            return self.eval(x).unwrap_or(f64::NAN);
        }
        self.hermite(x).0
    }

    /// dI[g]/dx.
    pub fn deriv(&self, x: f64) -> Result<f64> {
        if x < GRID_LO || x > *self.xs.last().unwrap() {
            return self.k(x);
        }
        Ok(self.hermite(x).1)
    }

    fn hermite(&self, x: f64) -> (f64, f64) {
        let i = self.locate(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let hh = x1 - x0;
        let t = ((x - x0) / hh).clamp(0.0, 1.0);
        let (y0, y1, d0, d1) = (self.v[i], self.v[i + 1], self.d[i] * hh, self.d[i + 1] * hh);
        let t2 = t * t;
        let t3 = t2 * t;
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1;
        let der = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * d1) / hh;
        (val, der)
    }
}

/// A profile times a constant.
#[derive(Debug, Clone)]
pub struct ScaledProfile {
    pub scale: f64,
    pub profile: Arc<Profile>,
}

impl ScaledProfile {
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.scale * self.profile.eval(x)?)
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        Ok(self.scale * self.profile.deriv(x)?)
    }

    fn eval_fast(&self, x: f64) -> f64 {
        self.scale * self.profile.eval_fast(x)
    }
}

type Cache = Mutex<HashMap<(u64, usize), ScaledProfile>>;

fn cache() -> &'static Cache {
    static C: OnceLock<Cache> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// φ̃_k as a memoized profile; φ̃_k = 4k I[(1−2α)φ̃_{k−1} + (k−1)φ̃_{k−2}].
pub fn phi_tilde_profile(p: &Params, k: usize) -> Result<ScaledProfile> {
    if k == 0 || k > K_MAX {
        return Err(Error::CostCap(format!("moment order must be in 1..={K_MAX}, got {k}")));
    }
    let key = (p.alpha.to_bits(), k);
    if let Some(sp) = cache().lock().unwrap().get(&key) {
        return Ok(sp.clone());
    }
    let a1 = 1.0 - 2.0 * p.alpha;
    let prev1 = if k >= 2 { Some(phi_tilde_profile(p, k - 1)?) } else { None };
    let prev2 = if k >= 3 { Some(phi_tilde_profile(p, k - 2)?) } else { None };
    let km1 = (k - 1) as f64;
    let src: Source = Arc::new(move |x: f64| {
        let f1 = prev1.as_ref().map_or(1.0, |q| q.eval_fast(x));
        let f2 = match &prev2 {
            Some(q) => q.eval_fast(x),
            None => 1.0,
        };
        if k == 1 {
            a1
        } else {
            a1 * f1 + km1 * f2
        }
    });
    let prof = Arc::new(Profile::build(p, src)?);
    let sp = ScaledProfile { scale: 4.0 * k as f64, profile: prof };
    cache().lock().unwrap().insert(key, sp.clone());
    Ok(sp)
}

/// φ̃_k(x) by the recursion; φ̃₀ ≡ 1.
pub fn phi_tilde(p: &Params, k: usize, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("phi_tilde needs x >= 0, got {x}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    phi_tilde_profile(p, k)?.eval(x)
}

/// φ̃₁(x) = (1−2α) ∫_{1/(2x²)}^∞ v^{−2α} e^v Γ(−1+2α, v) dv.
pub fn phi_tilde1_closed(p: &Params, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("closed form needs x > 0, got {x}")));
    }
    let a = -1.0 + 2.0 * p.alpha;
    let lo = 0.5 / (x * x);
    let cfg = QuadConfig { abs_tol: 1e-300, rel_tol: 1e-13, ..QuadConfig::default() };
    let mut fail = None;
    let mut f = |v: f64| match upper_incomplete_gamma_scaled(a, v) {
        Ok(g) => v.powf(-2.0 * p.alpha) * g,
        Err(e) => {
            fail.get_or_insert(e);
            0.0
        }
    };
    let mut total = 0.0;
    let mid = lo.max(1.0);
    if lo < mid {
        total += integrate_breaks(&mut f, &log_breaks(lo, mid), &cfg)?.value;
    }
    total += integrate_to_inf(&mut f, mid, &cfg)?;
    if let Some(e) = fail {
        return Err(e);
    }
    Ok((1.0 - 2.0 * p.alpha) * total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaplaceMomentReport {
    pub k: usize,
    pub x: f64,
    pub laplace: f64,
    pub recursive: f64,
    pub rel_gap: f64,
    pub pass: bool,
}

/// φ̃_k(x) = ∫ s^k e^{(½−α)s} η_x(s) ds against the recursion.
pub fn laplace_moment_rep_check(p: &Params, k: usize, x: f64) -> Result<LaplaceMomentReport> {
    if k > K_MAX {
        return Err(Error::CostCap(format!("moment order must be <= {K_MAX}, got {k}")));
    }
    let h = p.h();
    let lap = laplace_weighted(p, x, |s| s.powi(k as i32) * (h * s).exp())?;
    let rec = phi_tilde(p, k, x)?;
    let rel_gap = (lap - rec).abs() / rec.abs().max(1e-300);
    Ok(LaplaceMomentReport { k, x, laplace: lap, recursive: rec, rel_gap, pass: rel_gap <= 1e-6 })
}

/// 𝓛f(x) = −¼(x² f'' + (x⁻¹ + (3−4α)x) f') by central differences with one
/// Richardson step.
pub fn apply_l(p: &Params, f: &dyn Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("apply_L needs x > 0, got {x}")));
    }
    if !(h > 0.0 && h <= x / 10.0) {
        return Err(Error::InvalidParam(format!("step {h} must lie in (0, x/10] at x = {x}")));
    }
    let f0 = f(x)?;
    let diffs = |h: f64| -> Result<(f64, f64)> {
        let fp = f(x + h)?;
        let fm = f(x - h)?;
        Ok(((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
    };
    let (d1a, d2a) = diffs(h)?;
    let (d1b, d2b) = diffs(0.5 * h)?;
    let d1 = (4.0 * d1b - d1a) / 3.0;
    let d2 = (4.0 * d2b - d2a) / 3.0;
    Ok(-0.25 * (x * x * d2 + (1.0 / x + (3.0 - 4.0 * p.alpha) * x) * d1))
}

/// The pair φ₁ = c I[1], φ₂ = 2c I[φ₁] with c fixed so that 𝓛φ₁ = −1.
#[derive(Debug, Clone)]
pub struct NormalizedPair {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Calibrated constant c.
    pub normalization_factor: f64,
    /// Constant in front of the bare double integral as printed (1).
    pub printed_factor: f64,
    /// Max |𝓛φ₁ + 1| over the calibration probes.
    pub calibration_residual: f64,
    i1: ScaledProfile,
    i_phi1: Arc<Profile>,
}

impl NormalizedPair {
    pub fn phi1(&self, x: f64) -> Result<f64> {
        Ok(self.normalization_factor * self.i1.eval(x)?)
    }

    pub fn phi1_deriv(&self, x: f64) -> Result<f64> {
        Ok(self.normalization_factor * self.i1.deriv(x)?)
    }

    pub fn phi2(&self, x: f64) -> Result<f64> {
        Ok(2.0 * self.normalization_factor * self.i_phi1.eval(x)?)
    }
}

/// Probe points for the calibration of c.
pub const CALIBRATION_PROBES: [f64; 3] = [0.3, 1.0, 3.0];

pub fn normalized_pair(p: &Params) -> Result<NormalizedPair> {
    static PAIRS: OnceLock<Mutex<HashMap<u64, NormalizedPair>>> = OnceLock::new();
    let pairs = PAIRS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(np) = pairs.lock().unwrap().get(&p.alpha.to_bits()) {
        return Ok(np.clone());
    }
    // I[1] = φ̃₁ / (4(1−2α))
    let t1 = phi_tilde_profile(p, 1)?;
    let i1 = ScaledProfile { scale: t1.scale / (4.0 * (1.0 - 2.0 * p.alpha)), profile: t1.profile.clone() };
    let l: Vec<f64> = CALIBRATION_PROBES
        .iter()
        .map(|&x| apply_l(p, &|y| i1.eval(y), x, x / 20.0))
        .collect::<Result<_>>()?;
    let mean = l.iter().sum::<f64>() / l.len() as f64;
    if !(mean < 0.0) {
        return Err(Error::Calibration(format!("𝓛 of the double integral has the wrong sign ({mean})")));
    }
    let c = -1.0 / mean;
    let resid = l.iter().map(|v| (c * v + 1.0).abs()).fold(0.0, f64::max);
    if resid > 1e-3 {
        return Err(Error::Calibration(format!("no constant gives 𝓛φ₁ = −1 uniformly (residual {resid:.2e})")));
    }
    let i1c = i1.clone();
    let src: Source = Arc::new(move |x: f64| c * i1c.eval_fast(x));
    let i_phi1 = Arc::new(Profile::build(p, src)?);
    let np = NormalizedPair {
        lambda1: -1.0,
        lambda2: 0.0,
        normalization_factor: c,
        printed_factor: 1.0,
        calibration_residual: resid,
        i1,
        i_phi1,
    };
    pairs.lock().unwrap().insert(p.alpha.to_bits(), np.clone());
    Ok(np)
}

/// Source of a modified moment.
#[derive(Debug, Clone)]
pub enum MomentSource {
    Measure(DiscreteMeasure),
    /// The semigroup law μ_t of an exponent.
    Semigroup { psi: ExponentFn, t: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModifiedMoment {
    pub k: usize,
    pub value: f64,
    /// Last change in the Richardson diagonal.
    pub richardson_change: f64,
    /// Σ w_i φ̃_k(x_i) for discrete measures.
    pub direct: Option<f64>,
}

/// ∂^k/∂σ^k ∫ 𝑾_{α,σ} dμ at σ = ½−α, by one-sided differences into the strip
/// and a Richardson table in the step.
pub fn modified_moment(p: &Params, src: &MomentSource, k: usize) -> Result<ModifiedMoment> {
    if k != 1 && k != 2 {
        return Err(Error::InvalidParam(format!("modified moments are for k = 1, 2; got {k}")));
    }
    let h = p.h();
    let f = |sigma: f64| -> Result<f64> {
        match src {
            MomentSource::Measure(mu) => mu.integrate(|x| bw(p, Order::real(sigma), x, Route::Tricomi)),
            MomentSource::Semigroup { psi, t } => Ok((-t * psi.eval(p, h * h - sigma * sigma)?).exp()),
        }
    };
    let f0 = f(h)?;
    let stencil = |d: f64| -> Result<f64> {
        match k {
            1 => Ok((3.0 * f0 - 4.0 * f(h - d)? + f(h - 2.0 * d)?) / (2.0 * d)),
            _ => Ok((2.0 * f0 - 5.0 * f(h - d)? + 4.0 * f(h - 2.0 * d)? - f(h - 3.0 * d)?) / (d * d)),
        }
    };
    // both stencils have error expansions starting at d²
    let d0 = 1e-2 * h;
    let levels = 5;
    let mut table: Vec<Vec<f64>> = Vec::new();
    for i in 0..levels {
        let d = d0 / 2f64.powi(i as i32);
        let mut row = vec![stencil(d)?];
        for j in 1..=i {
            let fac = 2f64.powi((j + 1) as i32);
            let prev = &table[i - 1];
            row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / (fac - 1.0));
        }
        table.push(row);
    }
    let last = table[levels - 1][levels - 1];
    let before = table[levels - 2][levels - 2];
    let change = (last - before).abs();
    if !(change <= 1e-5 * last.abs().max(1e-8)) && !(change <= 1e-9) {
        return Err(Error::Divergent(format!("Richardson table for the order-{k} moment did not settle (change {change:.2e})")));
    }
    let direct = match src {
        MomentSource::Measure(mu) => Some(mu.integrate(|x| phi_tilde(p, k, x))?),
        _ => None,
    };
    Ok(ModifiedMoment { k, value: last, richardson_change: change, direct })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub k: usize,
    pub slope: f64,
    pub eps: f64,
    pub pass: bool,
}

/// Log-log least-squares slope of φ̃_k over `x_grid`.
pub fn growth_check(p: &Params, k: usize, x_grid: &[f64]) -> Result<GrowthReport> {
    if x_grid.len() < 2 {
        return Err(Error::InvalidParam("growth check needs at least two points".into()));
    }
    let pts: Vec<(f64, f64)> = x_grid
        .iter()
        .map(|&x| Ok((x.ln(), phi_tilde(p, k, x)?.ln())))
        .collect::<Result<_>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let eps = 0.2;
    Ok(GrowthReport { k, slope, eps, pass: slope <= eps })
}

/// φ̃₀..φ̃_{k_max} on a grid; row 0 is φ̃₀ ≡ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub k_max: usize,
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl MomentTable {
    pub fn build(p: &Params, k_max: usize, grid: Vec<f64>) -> Result<Self> {
        if k_max == 0 || k_max > K_MAX {
            return Err(Error::CostCap(format!("k_max must be in 1..={K_MAX}, got {k_max}")));
        }
        if grid.iter().any(|&x| !(x > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParam("moment grid must be positive and increasing".into()));
        }
        let mut values = vec![vec![1.0; grid.len()]];
        for k in 1..=k_max {
            let prof = phi_tilde_profile(p, k)?;
            let row: Vec<f64> = grid.par_iter().map(|&x| prof.eval(x)).collect::<Result<_>>()?;
            values.push(row);
        }
        Ok(MomentTable { k_max, grid, values })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["x".to_string()];
        header.extend((1..=self.k_max).map(|k| format!("phi{k}")));
        w.write_record(&header)?;
        for (i, x) in self.grid.iter().enumerate() {
            let mut rec = vec![format!("{x:e}")];
            rec.extend((1..=self.k_max).map(|k| format!("{:e}", self.values[k][i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string()];
        header.extend((1..=self.k_max).map(|k| format!("phi{k}")));
        w.write_record(&header)?;
        for (i, x) in self.grid.iter().enumerate() {
            let mut rec = vec![format!("{x:e}")];
            rec.extend((1..=self.k_max).map(|k| format!("{:e}", self.values[k][i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn phi1_alpha0_incomplete_gamma() {
        let p = Params::new(0.0).unwrap();
        // e^{1/(2x²)} Γ(0, 1/(2x²)), mpmath at 30 digits
        let table = [
            (0.1, 0.019615109930114872502),
            (0.5, 0.3613286168882225847),
            (1.0, 0.92291063248373046883),
            (3.0, 2.5032250842434782356),
            (10.0, 4.7497851106541182046),
        ];
        for &(x, want) in &table {
            assert!(rel(phi_tilde(&p, 1, x).unwrap(), want) < 1e-9, "{x}");
            assert!(rel(phi_tilde1_closed(&p, x).unwrap(), want) < 1e-9, "{x}");
        }
        assert_eq!(phi_tilde(&p, 1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_other_alpha() {
        let p = Params::new(0.25).unwrap();
        let a = phi_tilde(&p, 1, 0.7).unwrap();
        let b = phi_tilde1_closed(&p, 0.7).unwrap();
        assert!(rel(a, b) < 1e-6);
    }

    #[test]
    fn small_x_ratio() {
        for &al in &[0.0, 0.25, -0.5] {
            let p = Params::new(al).unwrap();
            let x = 0.02;
            let r = phi_tilde(&p, 1, x).unwrap() / (x * x);
            assert!(rel(r, 2.0 * (1.0 - 2.0 * al)) < 0.02);
        }
    }

    #[test]
    fn l_of_moments() {
        let p = Params::new(0.0).unwrap();
        let f1 = |x: f64| phi_tilde(&p, 1, x);
        for &x in &[0.3, 1.0, 3.0] {
            let l = apply_l(&p, &f1, x, x / 20.0).unwrap();
            assert!((l + 1.0).abs() < 1e-6, "{x} {l}");
        }
        let one = apply_l(&p, &|_| Ok(1.0), 1.0, 0.05).unwrap();
        assert_eq!(one, 0.0);
        assert!(apply_l(&p, &f1, 1.0, 0.5).is_err());
    }

    #[test]
    fn pair_calibration() {
        let p = Params::new(0.0).unwrap();
        let np = normalized_pair(&p).unwrap();
        assert!((np.normalization_factor - 4.0).abs() < 1e-6);
        for &x in &[0.3, 1.0, 3.0] {
            let l2 = apply_l(&p, &|y| np.phi2(y), x, x / 20.0).unwrap();
            let want = -2.0 * np.phi1(x).unwrap();
            assert!((l2 - want).abs() < 1e-3 * want.abs().max(1.0));
        }
        assert_eq!(np.phi1(0.0).unwrap(), 0.0);
        assert_eq!(np.phi2(0.0).unwrap(), 0.0);
    }

    #[test]
    fn jensen_and_laplace() {
        let p = Params::new(0.0).unwrap();
        for &x in &[0.2, 1.0, 5.0] {
            let f1 = phi_tilde(&p, 1, x).unwrap();
            assert!(phi_tilde(&p, 2, x).unwrap() >= f1 * f1);
        }
        let r = laplace_moment_rep_check(&p, 1, 1.0).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn modified_moment_dirac() {
        let p = Params::new(0.0).unwrap();
        let mu = DiscreteMeasure::dirac(1.3).unwrap();
        for k in 1..=2 {
            let m = modified_moment(&p, &MomentSource::Measure(mu.clone()), k).unwrap();
            let d = m.direct.unwrap();
            assert!((m.value - d).abs() < 1e-4 * d, "{k} {} {d}", m.value);
        }
        let z = modified_moment(&p, &MomentSource::Measure(DiscreteMeasure::dirac(0.0).unwrap()), 1).unwrap();
        assert!(z.value.abs() < 1e-9);
    }
}
