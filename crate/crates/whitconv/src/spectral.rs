//! The index Whittaker transform pair: weight m, spectral density ρ,
//! transforms of grid densities and discrete measures, and inversion.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gk21, integrate_breaks, pairwise_sum, QuadConfig};
use crate::specfun::{bw_auto, ln_gamma_complex, Order, OrderKind, Params};

/// m(x) = x^{1−4α} e^{−1/(2x²)}.
pub fn m_weight(p: &Params, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("m_weight needs x > 0, got {x}")));
    }
    Ok(ln_m_weight(p, x).exp())
}

/// log m(x) for x > 0.
pub fn ln_m_weight(p: &Params, x: f64) -> f64 {
    (1.0 - 4.0 * p.alpha) * x.ln() - 0.5 / (x * x)
}

/// ρ(λ) = 2^{1−2α} π^{−2} sinh(2πτ) |Γ(h + iτ)|², λ = h² + τ².
pub fn rho_density(p: &Params, lambda: f64) -> Result<f64> {
    let h2 = p.h2();
    if lambda < h2 || !lambda.is_finite() {
        return Err(Error::Domain(format!("rho needs lambda >= {h2}, got {lambda}")));
    }
    if lambda == h2 {
        return Ok(0.0);
    }
    Ok(ln_rho_tau(p, (lambda - h2).sqrt()).exp())
}

/// log ρ as a function of τ > 0.
pub fn ln_rho_tau(p: &Params, tau: f64) -> f64 {
    let lg = ln_gamma_complex(Complex64::new(p.h(), tau)).re;
    // ln sinh(2πτ) without overflow
    let t = 2.0 * PI * tau;
    let ln_sinh = if t > 20.0 { t - 2f64.ln() } else { t.sinh().ln() };
    (1.0 - 2.0 * p.alpha) * 2f64.ln() - 2.0 * PI.ln() + ln_sinh + 2.0 * lg
}

/// ρ(λ) dλ expressed in τ: 2τ ρ(h² + τ²).
pub fn rho_tau(p: &Params, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    2.0 * tau * ln_rho_tau(p, tau).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: f64,
    pub order: Order,
}

impl SpectralPoint {
    pub fn new(p: &Params, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(SpectralPoint { lambda, order: Order::from_lambda(p, lambda) })
    }

    pub fn from_tau(p: &Params, tau: f64) -> Self {
        SpectralPoint { lambda: p.h2() + tau * tau, order: Order::imag(tau) }
    }
}

// ------------------------------------------------------------- measures

/// Finite measure made of point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

impl DiscreteMeasure {
    /// Merges repeated locations and validates weights.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = atoms.into_iter().collect();
        for &(x, w) in &v {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidParam(format!("atom location must be finite and >= 0, got {x}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParam(format!("atom weight must be positive, got {w}")));
            }
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(v.len());
        for (x, w) in v {
            match atoms.last_mut() {
                Some(last) if last.x == x => last.w += w,
                _ => atoms.push(Atom { x, w }),
            }
        }
        Ok(DiscreteMeasure { atoms })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new([(x, 1.0)])
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.atoms.iter().map(|a| a.w).collect::<Vec<_>>())
    }

    pub fn is_probability(&self) -> bool {
        (self.mass() - 1.0).abs() <= 1e-12
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| (a.x, a.w * c)))
    }

    /// Σ w_i f(x_i).
    pub fn integrate(&self, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            terms.push(a.w * f(a.x)?);
        }
        Ok(pairwise_sum(&terms))
    }
}

/// Density against m(x)dx sampled on a grid, plus an optional atom at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub atom_at_zero: f64,
}

impl GridDensity {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, atom_at_zero: f64) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::InvalidParam("grid and values must have equal length >= 2".into()));
        }
        if grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParam("grid must be positive and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParam("density values must be finite and >= 0".into()));
        }
        if !(atom_at_zero >= 0.0) {
            return Err(Error::InvalidParam("atom at zero must be >= 0".into()));
        }
        Ok(GridDensity { grid, values, atom_at_zero })
    }

    /// Tabulate a density on a grid, clipping tiny negative round-off.
    pub fn from_fn(grid: Vec<f64>, mut f: impl FnMut(f64) -> Result<f64>, atom_at_zero: f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for &x in &grid {
            values.push(f(x)?.max(0.0));
        }
        Self::new(grid, values, atom_at_zero)
    }

    /// Linear interpolation of the density; 0 outside the grid.
    pub fn density(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|&v| v <= x).clamp(1, g.len() - 1);
        let (x0, x1) = (g[i - 1], g[i]);
        let t = (x - x0) / (x1 - x0);
        self.values[i - 1] * (1.0 - t) + self.values[i] * t
    }

    /// ∫ f(x) density(x) m(x) dx over the grid (trapezoid), plus atom·f(0).
    pub fn integrate(&self, p: &Params, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.grid.len());
        let n = self.grid.len();
        for i in 0..n {
            let left = if i > 0 { self.grid[i] - self.grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { self.grid[i + 1] - self.grid[i] } else { 0.0 };
            let v = self.values[i];
            if v == 0.0 {
                continue;
            }
            terms.push(0.5 * (left + right) * v * m_weight(p, self.grid[i])? * f(self.grid[i])?);
        }
        let mut total = pairwise_sum(&terms);
        if self.atom_at_zero > 0.0 {
            total += self.atom_at_zero * f(0.0)?;
        }
        Ok(total)
    }

    pub fn mass(&self, p: &Params) -> Result<f64> {
        self.integrate(p, |_| Ok(1.0))
    }

    /// Mass of [a, ∞) (linear interpolation at the cut).
    pub fn tail_mass(&self, p: &Params, a: f64) -> Result<f64> {
        let mut g = vec![a];
        g.extend(self.grid.iter().copied().filter(|&x| x > a));
        if g.len() < 2 {
            return Ok(if a <= 0.0 { self.atom_at_zero } else { 0.0 });
        }
        let vals: Vec<f64> = g.iter().map(|&x| self.density(x)).collect();
        let mut terms = Vec::with_capacity(g.len());
        for i in 0..g.len() - 1 {
            let (x0, x1) = (g[i], g[i + 1]);
            terms.push(0.5 * (x1 - x0) * (vals[i] * m_weight(p, x0)? + vals[i + 1] * m_weight(p, x1)?));
        }
        let atom = if a <= 0.0 { self.atom_at_zero } else { 0.0 };
        Ok(pairwise_sum(&terms) + atom)
    }

    /// Index Whittaker transform of the measure density·m dx + atom·δ₀.
    pub fn transform(&self, p: &Params, pt: SpectralPoint) -> Result<f64> {
        self.integrate(p, |x| bw_auto(p, pt.order, x))
    }

    /// L₁(m) distance between two densities, by trapezoid on the merged grid.
    pub fn l1_distance(&self, other: &GridDensity, p: &Params) -> Result<f64> {
        let mut g: Vec<f64> = self.grid.iter().chain(other.grid.iter()).copied().collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        let mut terms = Vec::with_capacity(g.len());
        for w in g.windows(2) {
            let d0 = (self.density(w[0]) - other.density(w[0])).abs() * m_weight(p, w[0])?;
            let d1 = (self.density(w[1]) - other.density(w[1])).abs() * m_weight(p, w[1])?;
            terms.push(0.5 * (w[1] - w[0]) * (d0 + d1));
        }
        Ok(pairwise_sum(&terms) + (self.atom_at_zero - other.atom_at_zero).abs())
    }
}

/// A finite measure in either representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Density(GridDensity),
}

impl Measure {
    pub fn transform(&self, p: &Params, pt: SpectralPoint) -> Result<f64> {
        match self {
            Measure::Discrete(mu) => transform_of_measure(p, mu, pt),
            Measure::Density(g) => g.transform(p, pt),
        }
    }

    pub fn mass(&self, p: &Params) -> Result<f64> {
        match self {
            Measure::Discrete(mu) => Ok(mu.mass()),
            Measure::Density(g) => g.mass(p),
        }
    }
}

// ----------------------------------------------------------- transforms

/// f̂(λ) = ∫ f(x) 𝑾_{α,Δ_λ}(x) m(x) dx over the support [a, b].
pub fn forward_transform(
    p: &Params,
    f: impl Fn(f64) -> f64,
    support: (f64, f64),
    pt: SpectralPoint,
    cfg: &QuadConfig,
) -> Result<f64> {
    let (a, b) = support;
    if !(a > 0.0 && b > a) {
        return Err(Error::Domain(format!("support must satisfy 0 < a < b, got ({a}, {b})")));
    }
    let nb = 8;
    let breaks: Vec<f64> = (0..=nb).map(|i| a + (b - a) * i as f64 / nb as f64).collect();
    // for large τ the kernel is of size e^{−πτ/2}; an absolute tolerance
    // would stop the refinement at once, so accuracy is measured relative
    // to ∫|f 𝑾| m instead
    let cfg = QuadConfig { abs_tol: 1e-300, ..*cfg };
    let cfg = &cfg;
    let mut failure = None;
    let r = integrate_breaks(
        |x: f64| {
            let fx = f(x);
            if fx == 0.0 {
                return 0.0;
            }
            match bw_auto(p, pt.order, x) {
                Ok(w) => fx * w * ln_m_weight(p, x).exp(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &breaks,
        cfg,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// μ̂(λ) = Σ w_i 𝑾(x_i).
pub fn transform_of_measure(p: &Params, mu: &DiscreteMeasure, pt: SpectralPoint) -> Result<f64> {
    mu.integrate(|x| bw_auto(p, pt.order, x))
}

/// Width of one τ panel in the inversion integral.
const TAU_PANEL: f64 = 0.25;
/// Panels per tail block examined by the truncation test.
const TAU_BLOCK: usize = 8;
/// Largest τ the inversion will reach before declaring missing decay.
pub const INVERSION_TAU_MAX: f64 = 200.0;

/// f(x) = ∫ f̂(λ) 𝑾_{α,Δ_λ}(x) ρ(λ) dλ evaluated at several x at once.
///
/// The integral runs in τ with λ = h² + τ² over panels of fixed width,
/// with f̂ evaluated once per node. Blocks are added until three in a row
/// have an absolute contribution whose projected O(τ⁻²) tail is below the
/// tolerance; if that never happens before `INVERSION_TAU_MAX` the tail
/// estimate is reported as failed.
pub fn inverse_transform_many(
    p: &Params,
    fhat: impl Fn(f64) -> Result<f64> + Sync,
    xs: &[f64],
    cfg: &QuadConfig,
) -> Result<Vec<f64>> {
    Ok(inverse_transform_detailed(p, fhat, xs, cfg)?.into_iter().map(|v| v.value).collect())
}

/// Inversion result with ∫|integrand|, which bounds the rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionValue {
    pub value: f64,
    pub absval: f64,
}

pub fn inverse_transform_detailed(
    p: &Params,
    fhat: impl Fn(f64) -> Result<f64> + Sync,
    xs: &[f64],
    cfg: &QuadConfig,
) -> Result<Vec<InversionValue>> {
    for &x in xs {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("inverse transform needs x > 0, got {x}")));
        }
    }
    let n = xs.len();
    let mut totals: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut quiet = 0;
    let mut block = 0usize;
    let mut prev_abs = vec![f64::INFINITY; n];
    let mut abs_total = vec![0.0f64; n];
    loop {
        let t0 = block as f64 * TAU_PANEL * TAU_BLOCK as f64;
        let t1 = t0 + TAU_PANEL * TAU_BLOCK as f64;
        if t0 >= INVERSION_TAU_MAX {
            return Err(Error::TailEstimate(format!(
                "inverse transform integrand shows no decay up to tau = {INVERSION_TAU_MAX}"
            )));
        }
        let panels: Vec<(f64, f64)> = (0..TAU_BLOCK)
            .map(|k| (t0 + k as f64 * TAU_PANEL, t0 + (k + 1) as f64 * TAU_PANEL))
            .collect();
        let res: Vec<Result<Vec<(f64, f64, f64)>>> = panels
            .par_iter()
            .map(|&(a, b)| inverse_panel(p, &fhat, xs, a, b))
            .collect();
        let mut block_abs = vec![0.0f64; n];
        let mut block_err = vec![0.0f64; n];
        for r in res {
            for (j, (v, e, ab)) in r?.into_iter().enumerate() {
                totals[j].push(v);
                block_abs[j] += ab;
                block_err[j] += e;
            }
        }
        let mut all_small = true;
        for j in 0..n {
            let total = pairwise_sum(&totals[j]).abs();
            let tol = cfg.truncation_tail_tol.max(cfg.abs_tol).max(cfg.rel_tol * total);
            let projected = block_abs[j] * t1 / (t1 - t0);
            // a growing integrand can look small against a growing total
            if !(projected < tol) || block_abs[j] > 2.0 * prev_abs[j] {
                all_small = false;
            }
            prev_abs[j] = block_abs[j];
            abs_total[j] += block_abs[j];
            if block_err[j] > 1e3 * tol.max(1e-300) && block_err[j] > 1e-6 * block_abs[j] {
                log::warn!("inverse transform panel error {:e} at tau in [{t0}, {t1}]", block_err[j]);
            }
        }
        quiet = if all_small { quiet + 1 } else { 0 };
        log::debug!("inversion block [{t0}, {t1}]: largest |contribution| {:e}", block_abs.iter().fold(0.0f64, |a, &b| a.max(b)));
        block += 1;
        if quiet >= 3 {
            break;
        }
    }
    Ok(totals
        .iter()
        .zip(abs_total)
        .map(|(t, a)| InversionValue { value: pairwise_sum(t), absval: a })
        .collect())
}

/// Single-point inversion.
pub fn inverse_transform(
    p: &Params,
    fhat: impl Fn(f64) -> Result<f64> + Sync,
    x: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    Ok(inverse_transform_many(p, fhat, &[x], cfg)?[0])
}

fn inverse_panel(
    p: &Params,
    fhat: &(impl Fn(f64) -> Result<f64> + Sync),
    xs: &[f64],
    a: f64,
    b: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    // collect the 21 nodes once and reuse f̂ across x
    let mut nodes = Vec::with_capacity(21);
    let mut probe = |t: f64| {
        nodes.push(t);
        0.0
    };
    gk21(&mut probe, a, b);
    let mut fvals = Vec::with_capacity(nodes.len());
    for &t in &nodes {
        let lam = p.h2() + t * t;
        let w = rho_tau(p, t);
        fvals.push(if w == 0.0 { 0.0 } else { fhat(lam)? * w });
    }
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut vals = Vec::with_capacity(nodes.len());
        for (k, &t) in nodes.iter().enumerate() {
            vals.push(if fvals[k] == 0.0 { 0.0 } else { fvals[k] * bw_auto(p, Order::imag(t), x)? });
        }
        let mut idx = 0;
        let mut replay = |_t: f64| {
            let v = vals[idx];
            idx += 1;
            v
        };
        let (v, e, ab) = gk21(&mut replay, a, b);
        out.push((v, e, ab));
    }
    Ok(out)
}

/// ∫ |f̂(λ)|² ρ(λ) dλ for the Plancherel identity, truncated like the inversion.
pub fn spectral_l2_norm_sq(p: &Params, fhat: impl Fn(f64) -> Result<f64> + Sync, cfg: &QuadConfig) -> Result<f64> {
    let mut parts: Vec<f64> = Vec::new();
    let mut quiet = 0;
    let mut t0 = 0.0;
    let mut prev_abs = f64::INFINITY;
    while quiet < 3 {
        if t0 >= INVERSION_TAU_MAX {
            return Err(Error::TailEstimate("spectral norm integrand shows no decay".into()));
        }
        let t1 = t0 + TAU_PANEL * TAU_BLOCK as f64;
        let breaks: Vec<f64> = (0..=TAU_BLOCK).map(|k| t0 + k as f64 * TAU_PANEL).collect();
        let mut failure = None;
        let r = integrate_breaks(
            |t: f64| {
                let w = rho_tau(p, t);
                if w == 0.0 {
                    return 0.0;
                }
                match fhat(p.h2() + t * t) {
                    Ok(v) => v * v * w,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &breaks,
            cfg,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        parts.push(r.value);
        let total = pairwise_sum(&parts).abs();
        let tol = cfg.truncation_tail_tol.max(cfg.abs_tol).max(cfg.rel_tol * total);
        quiet = if r.absval * t1 / (t1 - t0) < tol && r.absval <= 2.0 * prev_abs { quiet + 1 } else { 0 };
        prev_abs = r.absval;
        t0 = t1;
    }
    Ok(pairwise_sum(&parts))
}

// --------------------------------------------------------- diagnostics

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakConvergenceReport {
    /// sup over the λ grid of |μ̂_n − target^| for each n
    pub gaps: Vec<f64>,
    pub monotone: bool,
    pub final_gap: f64,
}

pub fn weak_convergence_check(
    p: &Params,
    mus: &[DiscreteMeasure],
    target: &DiscreteMeasure,
    lambda_grid: &[f64],
) -> Result<WeakConvergenceReport> {
    let pts: Vec<SpectralPoint> = lambda_grid.iter().map(|&l| SpectralPoint::new(p, l)).collect::<Result<_>>()?;
    let tgt: Vec<f64> = pts.iter().map(|&pt| transform_of_measure(p, target, pt)).collect::<Result<_>>()?;
    let mut gaps = Vec::with_capacity(mus.len());
    for mu in mus {
        let mut g = 0.0f64;
        for (k, &pt) in pts.iter().enumerate() {
            g = g.max((transform_of_measure(p, mu, pt)? - tgt[k]).abs());
        }
        gaps.push(g);
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let final_gap = gaps.last().copied().unwrap_or(0.0);
    Ok(WeakConvergenceReport { gaps, monotone, final_gap })
}

// ------------------------------------------------------------------- io

#[derive(Serialize, Deserialize)]
struct Row {
    x: f64,
    value: f64,
}

impl GridDensity {
    /// CSV with columns x,value; an atom at zero is written as a row with x = 0.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        if self.atom_at_zero > 0.0 {
            w.serialize(Row { x: 0.0, value: self.atom_at_zero })?;
        }
        for (&x, &value) in self.grid.iter().zip(&self.values) {
            w.serialize(Row { x, value })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut atom = 0.0;
        let (mut grid, mut values) = (Vec::new(), Vec::new());
        for row in r.deserialize() {
            let row: Row = row?;
            if row.x == 0.0 {
                atom += row.value;
            } else {
                grid.push(row.x);
                values.push(row.value);
            }
        }
        Self::new(grid, values, atom)
    }
}

impl DiscreteMeasure {
    /// CSV with columns x,value (location, weight).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for a in &self.atoms {
            w.serialize(Row { x: a.x, value: a.w })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut atoms = Vec::new();
        for row in r.deserialize() {
            let row: Row = row?;
            atoms.push((row.x, row.value));
        }
        Self::new(atoms)
    }
}

impl Measure {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Measure = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        match &m {
            Measure::Discrete(d) => {
                DiscreteMeasure::new(d.atoms.iter().map(|a| (a.x, a.w)))?;
            }
            Measure::Density(g) => {
                GridDensity::new(g.grid.clone(), g.values.clone(), g.atom_at_zero)?;
            }
        }
        Ok(m)
    }

    /// Reads a measure from .json or .csv; CSV files with any x = 0 row or
    /// more than one row are read as densities only when `density` is set.
    pub fn read(path: &Path, density: bool) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&std::fs::read_to_string(path)?),
            Some("csv") if density => Ok(Measure::Density(GridDensity::read_csv(path)?)),
            Some("csv") => Ok(Measure::Discrete(DiscreteMeasure::read_csv(path)?)),
            _ => Err(Error::Parse(format!("unknown measure file type: {}", path.display()))),
        }
    }
}

/// Kind of a spectral order, convenient for reporting.
pub fn order_label(o: Order) -> String {
    match o.kind {
        OrderKind::Real => format!("real:{}", o.value),
        OrderKind::Imaginary => format!("imag:{}", o.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma_complex;

    #[test]
    fn weight_values() {
        let p = Params::new(0.0).unwrap();
        assert!((m_weight(&p, 1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        let q = Params::new(0.25).unwrap();
        assert!((m_weight(&q, 2.0).unwrap() - (-0.125f64).exp()).abs() < 1e-15);
        assert!(m_weight(&p, 1e-3).unwrap() == 0.0);
        assert!(m_weight(&p, 0.0).is_err());
    }

    #[test]
    fn rho_matches_gamma() {
        for &a in &[-0.5, 0.0, 0.25] {
            let p = Params::new(a).unwrap();
            assert_eq!(rho_density(&p, p.h2()).unwrap(), 0.0);
            let tau = 1.0;
            let g = gamma_complex(Complex64::new(p.h(), tau)).unwrap().norm_sqr();
            let direct = 2f64.powf(1.0 - 2.0 * a) / (PI * PI) * (2.0 * PI * tau).sinh() * g;
            let r = rho_density(&p, p.h2() + 1.0).unwrap();
            assert!(r > 0.0 && ((r - direct) / direct).abs() < 1e-12);
            assert!(rho_density(&p, p.h2() - 0.1).is_err());
        }
    }

    #[test]
    fn rho_growth_bounded() {
        let p = Params::new(0.0).unwrap();
        let ratio = |t: f64| rho_density(&p, p.h2() + t * t).unwrap() * (-PI * t).exp() * t.powf(2.0 * p.alpha);
        let (r10, r30) = (ratio(10.0), ratio(30.0));
        assert!((r10 / r30 - 1.0).abs() < 0.05, "{r10} {r30}");
    }

    #[test]
    fn measure_transforms() {
        let p = Params::new(0.0).unwrap();
        let pt = SpectralPoint::new(&p, 1.3).unwrap();
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        assert_eq!(transform_of_measure(&p, &d0, pt).unwrap(), 1.0);
        let mix = DiscreteMeasure::new([(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let w1 = bw_auto(&p, pt.order, 1.0).unwrap();
        let w2 = bw_auto(&p, pt.order, 2.0).unwrap();
        assert!((transform_of_measure(&p, &mix, pt).unwrap() - 0.5 * (w1 + w2)).abs() < 1e-15);
        let merged = DiscreteMeasure::new([(1.0, 0.25), (1.0, 0.75)]).unwrap();
        assert_eq!(merged.atoms.len(), 1);
        assert!(DiscreteMeasure::new([(1.0, -1.0)]).is_err());
    }

    #[test]
    fn forward_transform_at_lambda_zero_is_mass() {
        let p = Params::new(0.0).unwrap();
        let cfg = QuadConfig::default();
        let (a, b) = (0.5, 2.0);
        let mass = crate::quad::integrate(|x| ln_m_weight(&p, x).exp(), a, b, &cfg).unwrap();
        let f = |x: f64| if (a..=b).contains(&x) { 1.0 / mass } else { 0.0 };
        let pt = SpectralPoint::new(&p, 0.0).unwrap();
        let v = forward_transform(&p, f, (a, b), pt, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn narrow_bump_transform() {
        let p = Params::new(0.0).unwrap();
        let cfg = QuadConfig::default();
        let (x0, w) = (1.3, 1e-3);
        let norm = crate::quad::integrate(|x| bump(x, x0, w) * ln_m_weight(&p, x).exp(), x0 - w, x0 + w, &cfg).unwrap();
        let pt = SpectralPoint::new(&p, 2.0).unwrap();
        let v = forward_transform(&p, |x| bump(x, x0, w) / norm, (x0 - w, x0 + w), pt, &cfg).unwrap();
        let direct = bw_auto(&p, pt.order, x0).unwrap();
        assert!((v - direct).abs() < 1e-5, "{v} {direct}");
    }

    fn bump(x: f64, c: f64, w: f64) -> f64 {
        let u = (x - c) / w;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - u * u).powi(3)
        }
    }

    #[test]
    fn inversion_of_constant_fails() {
        let p = Params::new(0.0).unwrap();
        let r = inverse_transform(&p, |_| Ok(1.0), 1.0, &QuadConfig::loose());
        assert!(matches!(r, Err(Error::TailEstimate(_))), "{r:?}");
    }

    #[test]
    fn grid_density_roundtrip_io() {
        let dir = std::env::temp_dir().join(format!("whitconv-spectral-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = GridDensity::new(vec![0.5, 1.0, 2.0], vec![0.1, 0.7, 0.2], 0.25).unwrap();
        let path = dir.join("g.csv");
        g.write_csv(&path).unwrap();
        let back = GridDensity::read_csv(&path).unwrap();
        assert_eq!(g, back);
        let js = Measure::Density(g.clone()).to_json().unwrap();
        assert_eq!(Measure::from_json(&js).unwrap(), Measure::Density(g));
        let d = DiscreteMeasure::new([(0.0, 0.5), (1.5, 0.5)]).unwrap();
        let js = Measure::Discrete(d.clone()).to_json().unwrap();
        assert_eq!(Measure::from_json(&js).unwrap(), Measure::Discrete(d));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn weak_convergence_to_origin() {
        let p = Params::new(0.0).unwrap();
        let mus: Vec<DiscreteMeasure> = (1..=6).map(|n| DiscreteMeasure::dirac(1.0 / n as f64).unwrap()).collect();
        let target = DiscreteMeasure::dirac(0.0).unwrap();
        let rep = weak_convergence_check(&p, &mus, &target, &[0.5, 1.0, 3.0]).unwrap();
        assert!(rep.monotone);
        assert!(rep.final_gap < 0.2);
    }
}
